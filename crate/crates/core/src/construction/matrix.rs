//! Sparse matrices over GF(2^m) and their alist-style text encoding.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::galois::{Field, FieldElement};

/// Sparse matrix over GF(2^m) as a list of nonzero `(row, col, value)` entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseFieldMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, FieldElement)>,
}

impl SparseFieldMatrix {
    /// Entries are sorted by `(row, col)`; duplicates and zeros are rejected.
    pub fn new(
        rows: usize,
        cols: usize,
        mut entries: Vec<(usize, usize, FieldElement)>,
    ) -> Result<SparseFieldMatrix> {
        entries.sort_by_key(|&(r, c, _)| (r, c));
        for (i, &(r, c, v)) in entries.iter().enumerate() {
            if r >= rows || c >= cols {
                return Err(Error::InvalidSpec(format!(
                    "entry ({r}, {c}) outside {rows}x{cols} matrix"
                )));
            }
            if v.is_zero() || (i > 0 && entries[i - 1].0 == r && entries[i - 1].1 == c) {
                return Err(Error::BadEntry { row: r, col: c });
            }
        }
        Ok(SparseFieldMatrix { rows, cols, entries })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[(usize, usize, FieldElement)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, row: usize, col: usize) -> FieldElement {
        self.entries
            .binary_search_by_key(&(row, col), |&(r, c, _)| (r, c))
            .map(|i| self.entries[i].2)
            .unwrap_or(FieldElement::ZERO)
    }

    /// Per row, the `(col, value)` pairs in column order.
    pub fn row_lists(&self) -> Vec<Vec<(usize, FieldElement)>> {
        let mut out = vec![Vec::new(); self.rows];
        for &(r, c, v) in &self.entries {
            out[r].push((c, v));
        }
        out
    }

    /// Per column, the `(row, value)` pairs in row order.
    pub fn column_lists(&self) -> Vec<Vec<(usize, FieldElement)>> {
        let mut out = vec![Vec::new(); self.cols];
        for &(r, c, v) in &self.entries {
            out[c].push((r, v));
        }
        out
    }

    pub fn row_weights(&self) -> Vec<usize> {
        self.row_lists().iter().map(Vec::len).collect()
    }

    pub fn column_weights(&self) -> Vec<usize> {
        self.column_lists().iter().map(Vec::len).collect()
    }

    /// `H x^T` over the field.
    pub fn syndrome(&self, field: &Field, x: &[FieldElement]) -> Result<Vec<FieldElement>> {
        if x.len() != self.cols {
            return Err(Error::LengthMismatch {
                expected: self.cols,
                got: x.len(),
            });
        }
        let mut s = vec![FieldElement::ZERO; self.rows];
        for &(r, c, v) in &self.entries {
            s[r] = field.add(s[r], field.mul(v, x[c]));
        }
        Ok(s)
    }

    pub fn is_codeword(&self, field: &Field, x: &[FieldElement]) -> Result<bool> {
        Ok(self.syndrome(field, x)?.iter().all(|s| s.is_zero()))
    }

    pub fn to_dense(&self) -> Vec<Vec<FieldElement>> {
        let mut d = vec![vec![FieldElement::ZERO; self.cols]; self.rows];
        for &(r, c, v) in &self.entries {
            d[r][c] = v;
        }
        d
    }

    /// Rank over GF(q) by Gaussian elimination on a dense copy.
    pub fn rank(&self, field: &Field) -> usize {
        let mut m = self.to_dense();
        let mut rank = 0;
        for col in 0..self.cols {
            let Some(pivot) = (rank..self.rows).find(|&r| !m[r][col].is_zero()) else {
                continue;
            };
            m.swap(rank, pivot);
            let inv = field.inv(m[rank][col]).expect("pivot is nonzero");
            for c in col..self.cols {
                m[rank][c] = field.mul(m[rank][c], inv);
            }
            for r in 0..self.rows {
                if r != rank && !m[r][col].is_zero() {
                    let factor = m[r][col];
                    for c in col..self.cols {
                        let t = field.mul(factor, m[rank][c]);
                        m[r][c] = field.add(m[r][c], t);
                    }
                }
            }
            rank += 1;
            if rank == self.rows {
                break;
            }
        }
        rank
    }

    /// Alist text: the usual binary alist block followed by a coefficient
    /// table parallel to the per-column row lists.
    ///
    /// ```text
    /// <cols> <rows>
    /// <max col weight> <max row weight>
    /// <col weights...>
    /// <row weights...>
    /// <cols lines: 1-based row indices, zero padded>
    /// <rows lines: 1-based col indices, zero padded>
    /// gf <m> <prim_poly hex>
    /// <cols lines: coefficients matching the row indices above, zero padded>
    /// ```
    pub fn to_alist(&self, field: &Field) -> String {
        let cols = self.column_lists();
        let rows = self.row_lists();
        let max_cw = cols.iter().map(Vec::len).max().unwrap_or(0);
        let max_rw = rows.iter().map(Vec::len).max().unwrap_or(0);
        let mut out = String::new();
        let join = |v: Vec<String>| v.join(" ");
        writeln!(out, "{} {}", self.cols, self.rows).unwrap();
        writeln!(out, "{} {}", max_cw, max_rw).unwrap();
        writeln!(
            out,
            "{}",
            join(cols.iter().map(|c| c.len().to_string()).collect())
        )
        .unwrap();
        writeln!(
            out,
            "{}",
            join(rows.iter().map(|r| r.len().to_string()).collect())
        )
        .unwrap();
        for c in &cols {
            let mut items: Vec<String> = c.iter().map(|(r, _)| (r + 1).to_string()).collect();
            items.resize(max_cw, "0".into());
            writeln!(out, "{}", join(items)).unwrap();
        }
        for r in &rows {
            let mut items: Vec<String> = r.iter().map(|(c, _)| (c + 1).to_string()).collect();
            items.resize(max_rw, "0".into());
            writeln!(out, "{}", join(items)).unwrap();
        }
        writeln!(out, "gf {} {:#x}", field.m(), field.prim_poly()).unwrap();
        for c in &cols {
            let mut items: Vec<String> = c.iter().map(|(_, v)| v.0.to_string()).collect();
            items.resize(max_cw, "0".into());
            writeln!(out, "{}", join(items)).unwrap();
        }
        out
    }

    /// Parses [`to_alist`](Self::to_alist) output, returning the field too.
    pub fn from_alist(text: &str) -> Result<(Field, SparseFieldMatrix)> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .enumerate()
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut next_line = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::Parse(format!("alist truncated before {what}")))
        };
        let nums = |(ln, l): (usize, &str)| -> Result<Vec<usize>> {
            l.split_whitespace()
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| Error::Parse(format!("line {}: bad integer {t:?}", ln + 1)))
                })
                .collect()
        };
        let dims = nums(next_line("dimensions")?)?;
        if dims.len() != 2 {
            return Err(Error::Parse("first line must be '<cols> <rows>'".into()));
        }
        let (n_cols, n_rows) = (dims[0], dims[1]);
        let _max_weights = nums(next_line("max weights")?)?;
        let col_w = nums(next_line("column weights")?)?;
        let _row_w = nums(next_line("row weights")?)?;
        if col_w.len() != n_cols {
            return Err(Error::Parse("column weight count mismatch".into()));
        }
        let mut col_rows = Vec::with_capacity(n_cols);
        for c in 0..n_cols {
            let idx = nums(next_line("column lists")?)?;
            let rows: Vec<usize> = idx.into_iter().filter(|&i| i != 0).map(|i| i - 1).collect();
            if rows.len() != col_w[c] {
                return Err(Error::Parse(format!("column {c}: weight mismatch")));
            }
            col_rows.push(rows);
        }
        for _ in 0..n_rows {
            next_line("row lists")?;
        }
        let (ln, gf) = next_line("coefficient table header")?;
        let parts: Vec<&str> = gf.split_whitespace().collect();
        if parts.len() != 3 || parts[0] != "gf" {
            return Err(Error::Parse(format!(
                "line {}: expected 'gf <m> <prim_poly>'",
                ln + 1
            )));
        }
        let m: u32 = parts[1]
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: bad m", ln + 1)))?;
        let poly = u32::from_str_radix(parts[2].trim_start_matches("0x"), 16)
            .map_err(|_| Error::Parse(format!("line {}: bad polynomial", ln + 1)))?;
        let field = Field::new(m, poly)?;
        let mut entries = Vec::new();
        for (c, rows) in col_rows.iter().enumerate() {
            let coefs = nums(next_line("coefficient rows")?)?;
            for (i, &r) in rows.iter().enumerate() {
                let v = *coefs
                    .get(i)
                    .ok_or_else(|| Error::Parse(format!("column {c}: missing coefficient")))?;
                entries.push((r, c, field.element(v as u32)?));
            }
        }
        Ok((field, SparseFieldMatrix::new(n_rows, n_cols, entries)?))
    }
}
