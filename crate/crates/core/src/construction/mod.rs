//! Code construction: the coefficient sequences, the interleaver, the
//! parity-check matrices of the parallel (PCCC) and serial
//! differentiate-accumulate (DA) constructions, and the rate-adaptation
//! plans (puncturing and multiplicative repetition).
//!
//! Codeword symbol order is fixed per mode:
//!
//! | mode     | order            | length |
//! |----------|------------------|--------|
//! | `Pccc`   | `[u | p1 | p2]`  | 3K     |
//! | `DaR12`  | `[u | p]`        | 2K     |
//! | `DaR13`  | `[u | p | v]`    | 3K     |
//!
//! and every parity-check matrix built here orders its columns to match.

mod config;
mod matrix;
mod mr;
mod puncture;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use config::{describe_interleaver, CodeConfig, CoefficientConfig, InterleaverConfig, PunctureConfig};
pub use matrix::SparseFieldMatrix;
pub use mr::{apply_mr, combine_mr, MrPlan};
pub use puncture::{make_puncture_plan, PuncturePattern, PuncturePlan, Rate};

use crate::error::{Error, Result};
use crate::galois::{Field, FieldElement};
use crate::interleaver::Interleaver;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Parallel concatenation of two accumulators, rate 1/3.
    Pccc,
    /// Differentiator, scale/permute, accumulator; codeword `[u | p]`.
    DaR12,
    /// As `DaR12` with the differentiator output appended, `[u | p | v]`.
    DaR13,
}

impl Mode {
    pub fn mother_rate(self) -> Rate {
        match self {
            Mode::Pccc | Mode::DaR13 => Rate::new(1, 3),
            Mode::DaR12 => Rate::new(1, 2),
        }
    }

    /// Codeword length in symbols for `k` information symbols.
    pub fn codeword_len(self, k: usize) -> usize {
        match self {
            Mode::Pccc | Mode::DaR13 => 3 * k,
            Mode::DaR12 => 2 * k,
        }
    }

    pub fn is_serial(self) -> bool {
        matches!(self, Mode::DaR12 | Mode::DaR13)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Pccc => "pccc",
            Mode::DaR12 => "da-r12",
            Mode::DaR13 => "da-r13",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mode> {
        match s.to_ascii_lowercase().as_str() {
            "pccc" | "pccc-r13" => Ok(Mode::Pccc),
            "da-r12" | "da_r12" | "da" => Ok(Mode::DaR12),
            "da-r13" | "da_r13" => Ok(Mode::DaR13),
            other => Err(Error::Parse(format!(
                "unknown mode {other:?} (expected pccc, da-r12 or da-r13)"
            ))),
        }
    }
}

/// The four length-K coefficient sequences, all over the nonzero elements.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coefficients {
    pub g1: Vec<FieldElement>,
    pub f1: Vec<FieldElement>,
    pub g2: Vec<FieldElement>,
    pub f2: Vec<FieldElement>,
}

/// Whether a memory-1 tail-biting recursion with feedback `f` has a unique
/// circular state, i.e. `prod f != 1`.
pub fn tailbiting_solvable(field: &Field, f: &[FieldElement]) -> bool {
    field.product(f) != FieldElement::ONE
}

const MAX_COEFFICIENT_ATTEMPTS: usize = 100;

/// Uniform draws from the nonzero elements, redrawing the feedback vectors
/// until both are tail-biting solvable. Deterministic in `seed`.
pub fn select_coefficients(field: &Field, k: usize, seed: u64) -> Result<Coefficients> {
    if k < 2 {
        return Err(Error::InvalidSpec("K must be at least 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = field.q();
    let draw = |rng: &mut ChaCha8Rng| -> Vec<FieldElement> {
        (0..k)
            .map(|_| FieldElement(rng.random_range(1..q) as u8))
            .collect()
    };
    let g1 = draw(&mut rng);
    let g2 = draw(&mut rng);
    let feedback = |rng: &mut ChaCha8Rng| -> Result<Vec<FieldElement>> {
        for _ in 0..MAX_COEFFICIENT_ATTEMPTS {
            let f = draw(rng);
            if tailbiting_solvable(field, &f) {
                return Ok(f);
            }
        }
        Err(Error::CoefficientSelection(MAX_COEFFICIENT_ATTEMPTS))
    };
    let f1 = feedback(&mut rng)?;
    let f2 = feedback(&mut rng)?;
    Ok(Coefficients { g1, f1, g2, f2 })
}

/// Complete description of one code instance.
#[derive(Clone, Debug, PartialEq)]
pub struct CodeSpec {
    field: Field,
    mode: Mode,
    coefficients: Coefficients,
    interleaver: Interleaver,
    puncture: PuncturePlan,
    mr: MrPlan,
}

impl CodeSpec {
    pub fn new(
        field: Field,
        mode: Mode,
        coefficients: Coefficients,
        interleaver: Interleaver,
    ) -> Result<CodeSpec> {
        let k = interleaver.len();
        if k < 2 {
            return Err(Error::InvalidSpec("K must be at least 2".into()));
        }
        let c = &coefficients;
        for (name, v) in [("g1", &c.g1), ("f1", &c.f1), ("g2", &c.g2), ("f2", &c.f2)] {
            if v.len() != k {
                return Err(Error::InvalidSpec(format!(
                    "{name} has length {}, expected K={k}",
                    v.len()
                )));
            }
            if let Some(i) = v.iter().position(|x| x.is_zero() || x.index() >= field.q()) {
                return Err(Error::InvalidSpec(format!(
                    "{name}[{i}] = {} is not a nonzero element of GF({})",
                    v[i].0,
                    field.q()
                )));
            }
        }
        if !tailbiting_solvable(&field, &c.f1) || !tailbiting_solvable(&field, &c.f2) {
            return Err(Error::SingularTailBiting);
        }
        let n = mode.codeword_len(k);
        Ok(CodeSpec {
            field,
            mode,
            coefficients,
            interleaver,
            puncture: PuncturePlan::none(n),
            mr: MrPlan::off(),
        })
    }

    /// Spec with coefficients from [`select_coefficients`].
    pub fn random(field: Field, mode: Mode, interleaver: Interleaver, seed: u64) -> Result<CodeSpec> {
        let coefficients = select_coefficients(&field, interleaver.len(), seed)?;
        CodeSpec::new(field, mode, coefficients, interleaver)
    }

    pub fn with_puncture(mut self, plan: PuncturePlan) -> Result<CodeSpec> {
        if plan.codeword_len() != self.n() {
            return Err(Error::InvalidSpec(format!(
                "puncture plan is for length {}, codeword has {}",
                plan.codeword_len(),
                self.n()
            )));
        }
        self.puncture = plan;
        Ok(self)
    }

    pub fn with_mr(mut self, plan: MrPlan) -> Result<CodeSpec> {
        plan.validate(self.n())?;
        self.mr = plan;
        Ok(self)
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn k(&self) -> usize {
        self.interleaver.len()
    }

    /// Mother codeword length in symbols.
    pub fn n(&self) -> usize {
        self.mode.codeword_len(self.k())
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coefficients
    }

    pub fn interleaver(&self) -> &Interleaver {
        &self.interleaver
    }

    pub fn puncture(&self) -> &PuncturePlan {
        &self.puncture
    }

    pub fn mr(&self) -> &MrPlan {
        &self.mr
    }

    /// Positions of the information symbols inside the codeword.
    pub fn info_range(&self) -> Range<usize> {
        0..self.k()
    }

    /// Codeword positions sent over the channel, in order.
    pub fn transmitted_positions(&self) -> Vec<usize> {
        (0..self.n())
            .filter(|&i| !self.puncture.is_punctured(i))
            .collect()
    }

    /// Number of channel symbols per frame, replicas included.
    pub fn transmitted_symbols(&self) -> usize {
        (self.n() - self.puncture.len()) * self.mr.factor()
    }

    pub fn k_bits(&self) -> usize {
        self.k() * self.field.m() as usize
    }

    pub fn transmitted_bits(&self) -> usize {
        self.transmitted_symbols() * self.field.m() as usize
    }

    /// Binary code rate after puncturing and repetition.
    pub fn rate(&self) -> f64 {
        self.k_bits() as f64 / self.transmitted_bits() as f64
    }

    /// Exact rate as a reduced fraction.
    pub fn rate_fraction(&self) -> Rate {
        Rate::new(self.k() as u32, self.transmitted_symbols() as u32)
    }

    /// Mode-matched parity-check matrix: the 2K x 3K matrix for `Pccc`, the
    /// compact K x 2K matrix for `DaR12`, the extended 2K x 3K matrix for
    /// `DaR13`.
    pub fn parity_check(&self) -> SparseFieldMatrix {
        match self.mode {
            Mode::Pccc => build_h_pccc(self),
            Mode::DaR12 => build_h_da(self).compact,
            Mode::DaR13 => build_h_da(self).extended,
        }
    }
}

/// The 2K x 3K parity-check matrix of the parallel construction,
///
/// ```text
/// [ I~  P~1  0  ]
/// [ Pi~  0  P~2 ]
/// ```
///
/// with `I~ = diag(g1)`, `Pi~` holding `g2[i]` at `(i, pi(i))`, and `P~z`
/// double diagonal with unit diagonal, `fz[i]` at `(i, i-1)` and `fz[0]` in
/// the top-right corner. Row `i` of the upper block is
/// `g1[i] u[i] + p1[i] + f1[i] p1[i-1] = 0`.
pub fn build_h_pccc(spec: &CodeSpec) -> SparseFieldMatrix {
    pccc_parity_check(&spec.coefficients, &spec.interleaver)
}

/// [`build_h_pccc`] on raw parts, without the tail-biting solvability check.
/// With all coefficients equal to 1 this is the binary adjacency matrix of
/// the expanded protograph.
pub fn pccc_parity_check(c: &Coefficients, pi: &Interleaver) -> SparseFieldMatrix {
    let k = pi.len();
    let one = FieldElement::ONE;
    let mut e = Vec::with_capacity(6 * k);
    for i in 0..k {
        let prev = (i + k - 1) % k;
        e.push((i, i, c.g1[i]));
        e.push((i, k + i, one));
        e.push((i, k + prev, c.f1[i]));
        e.push((k + i, pi.get(i), c.g2[i]));
        e.push((k + i, 2 * k + i, one));
        e.push((k + i, 2 * k + prev, c.f2[i]));
    }
    SparseFieldMatrix::new(2 * k, 3 * k, e).expect("K >= 2 keeps entries distinct")
}

/// Parity-check matrices of the serial construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DaParityCheck {
    /// K x 2K over `[u | p]`: `[diag(g1) Pi~^T P~2 | P~1]`.
    pub compact: SparseFieldMatrix,
    /// 2K x 3K over `[u | p | v]`: differentiator checks on top,
    /// accumulator checks below.
    pub extended: SparseFieldMatrix,
    /// Columns of `extended` holding the differentiator output `v`.
    pub v_columns: Range<usize>,
}

/// Builds both DA parity-check matrices. The encoder computes
/// `v[i] = u[i] + f2[i] u[i-1]`, `v'[pi(r)] = g2[r] v[r]` and
/// `p[i] = g1[i] v'[i] + f1[i] p[i-1]`, all indices circular.
pub fn build_h_da(spec: &CodeSpec) -> DaParityCheck {
    da_parity_check(&spec.field, &spec.coefficients, &spec.interleaver)
}

/// [`build_h_da`] on raw parts.
pub fn da_parity_check(field: &Field, c: &Coefficients, pi: &Interleaver) -> DaParityCheck {
    let k = pi.len();
    let inv = pi.inverse();
    let one = FieldElement::ONE;

    let mut compact = Vec::with_capacity(4 * k);
    for i in 0..k {
        let prev = (i + k - 1) % k;
        let r = inv[i];
        let scale = field.mul(c.g1[i], c.g2[r]);
        compact.push((i, r, scale));
        compact.push((i, (r + k - 1) % k, field.mul(scale, c.f2[r])));
        compact.push((i, k + i, one));
        compact.push((i, k + prev, c.f1[i]));
    }

    let mut extended = Vec::with_capacity(6 * k);
    for i in 0..k {
        let prev = (i + k - 1) % k;
        extended.push((i, i, one));
        extended.push((i, prev, c.f2[i]));
        extended.push((i, 2 * k + i, one));
        let r = inv[i];
        extended.push((k + i, 2 * k + r, field.mul(c.g1[i], c.g2[r])));
        extended.push((k + i, k + i, one));
        extended.push((k + i, k + prev, c.f1[i]));
    }

    DaParityCheck {
        compact: SparseFieldMatrix::new(k, 2 * k, compact).expect("K >= 2 keeps entries distinct"),
        extended: SparseFieldMatrix::new(2 * k, 3 * k, extended).expect("K >= 2 keeps entries distinct"),
        v_columns: 2 * k..3 * k,
    }
}
