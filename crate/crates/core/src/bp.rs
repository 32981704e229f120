//! Belief propagation over the non-binary Tanner graph, with check-node
//! updates in the Walsh-Hadamard domain.

use crate::construction::SparseFieldMatrix;
use crate::error::{Error, Result};
use crate::galois::{Field, FieldElement};
use crate::pmf::{
    argmax, convolve_direct_into, max_is_tied, normalize_in_place, permute_scalar_into,
    unpermute_scalar_into, wht_in_place, ConvBackend, Pmf,
};

/// Bipartite graph of a parity-check matrix. Edges are ordered by check,
/// then by variable, matching the matrix entry order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TannerGraph {
    n_vn: usize,
    n_cn: usize,
    edge_vn: Vec<usize>,
    edge_cn: Vec<usize>,
    edge_h: Vec<FieldElement>,
    /// Edges of check `c` are `cn_start[c]..cn_start[c + 1]`.
    cn_start: Vec<usize>,
    vn_edges: Vec<Vec<usize>>,
}

impl TannerGraph {
    pub fn from_matrix(h: &SparseFieldMatrix) -> TannerGraph {
        let entries = h.entries();
        let mut cn_start = vec![0; h.rows() + 1];
        let mut vn_edges = vec![Vec::new(); h.cols()];
        for (e, &(r, c, _)) in entries.iter().enumerate() {
            cn_start[r + 1] += 1;
            vn_edges[c].push(e);
        }
        for r in 0..h.rows() {
            cn_start[r + 1] += cn_start[r];
        }
        TannerGraph {
            n_vn: h.cols(),
            n_cn: h.rows(),
            edge_vn: entries.iter().map(|e| e.1).collect(),
            edge_cn: entries.iter().map(|e| e.0).collect(),
            edge_h: entries.iter().map(|e| e.2).collect(),
            cn_start,
            vn_edges,
        }
    }

    pub fn n_vn(&self) -> usize {
        self.n_vn
    }

    pub fn n_cn(&self) -> usize {
        self.n_cn
    }

    pub fn n_edges(&self) -> usize {
        self.edge_vn.len()
    }

    /// `(vn, cn, h)` of edge `e`.
    pub fn edge(&self, e: usize) -> (usize, usize, FieldElement) {
        (self.edge_vn[e], self.edge_cn[e], self.edge_h[e])
    }

    pub fn vn_degree(&self, v: usize) -> usize {
        self.vn_edges[v].len()
    }

    pub fn cn_degree(&self, c: usize) -> usize {
        self.cn_start[c + 1] - self.cn_start[c]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyndromeReport {
    pub failing: Vec<usize>,
}

impl SyndromeReport {
    pub fn is_zero(&self) -> bool {
        self.failing.is_empty()
    }
}

pub fn syndrome(graph: &TannerGraph, field: &Field, hard: &[FieldElement]) -> Result<SyndromeReport> {
    if hard.len() != graph.n_vn {
        return Err(Error::LengthMismatch {
            expected: graph.n_vn,
            got: hard.len(),
        });
    }
    let mut failing = Vec::new();
    for c in 0..graph.n_cn {
        let mut acc = FieldElement::ZERO;
        for e in graph.cn_start[c]..graph.cn_start[c + 1] {
            acc = field.add(acc, field.mul(graph.edge_h[e], hard[graph.edge_vn[e]]));
        }
        if !acc.is_zero() {
            failing.push(c);
        }
    }
    Ok(SyndromeReport { failing })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BpConfig {
    pub max_iter: usize,
    pub backend: ConvBackend,
    /// Stop as soon as the hard decision is a codeword with no tied maxima.
    pub early_stop: bool,
}

impl Default for BpConfig {
    fn default() -> BpConfig {
        BpConfig {
            max_iter: 200,
            backend: ConvBackend::Wht,
            early_stop: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BpOutput {
    /// Hard decision on every variable node.
    pub decision: Vec<FieldElement>,
    pub app: Vec<Pmf>,
    pub iterations: usize,
    pub converged: bool,
    /// Messages replaced by uniform ones after vanishing.
    pub underflow_fallbacks: usize,
}

/// Messages from one check to each of its `msgs.len()` neighbours: the
/// p.m.f. of `x_e` such that `sum_j h_j x_j = 0` given the other incoming
/// messages.
pub fn check_node_update(
    field: &Field,
    backend: ConvBackend,
    h: &[FieldElement],
    msgs: &[Pmf],
) -> Result<Vec<Pmf>> {
    let q = field.q();
    let d = h.len();
    if msgs.len() != d {
        return Err(Error::LengthMismatch {
            expected: d,
            got: msgs.len(),
        });
    }
    if h.iter().any(|x| x.is_zero()) {
        return Err(Error::ZeroScalar);
    }
    let flat: Vec<f64> = msgs.iter().flat_map(|m| m.values().iter().copied()).collect();
    let raw: Vec<u8> = h.iter().map(|x| x.0).collect();
    let mut out = vec![0.0; d * q];
    let mut ws = CheckWorkspace::new(q, d);
    ws.update(field, backend, &raw, &flat, &mut out);
    Ok(out
        .chunks_exact(q)
        .map(|r| Pmf::new(r.to_vec()).expect("valid p.m.f."))
        .collect())
}

struct CheckWorkspace {
    q: usize,
    perm: Vec<f64>,
    prefix: Vec<f64>,
    suffix: Vec<f64>,
    tmp: Vec<f64>,
}

impl CheckWorkspace {
    fn new(q: usize, max_deg: usize) -> CheckWorkspace {
        CheckWorkspace {
            q,
            perm: vec![0.0; max_deg * q],
            prefix: vec![0.0; (max_deg + 1) * q],
            suffix: vec![0.0; (max_deg + 1) * q],
            tmp: vec![0.0; q],
        }
    }

    fn grow(&mut self, d: usize) {
        let q = self.q;
        if self.perm.len() < d * q {
            self.perm.resize(d * q, 0.0);
            self.prefix.resize((d + 1) * q, 0.0);
            self.suffix.resize((d + 1) * q, 0.0);
        }
    }

    /// `incoming` and `out` are `d x q`. Returns the number of outgoing
    /// messages replaced by uniform ones.
    fn update(
        &mut self,
        field: &Field,
        backend: ConvBackend,
        h: &[u8],
        incoming: &[f64],
        out: &mut [f64],
    ) -> usize {
        let q = self.q;
        let d = h.len();
        self.grow(d);
        for j in 0..d {
            permute_scalar_into(
                field,
                &incoming[j * q..(j + 1) * q],
                h[j],
                &mut self.perm[j * q..(j + 1) * q],
            );
        }
        // Prefix/suffix products (WHT) or convolutions (direct) of the
        // permuted messages; the identity is the transform of a delta at 0,
        // i.e. all ones, or the delta itself.
        let wht = backend == ConvBackend::Wht;
        if wht {
            for j in 0..d {
                wht_in_place(&mut self.perm[j * q..(j + 1) * q]);
            }
        }
        let identity = |v: &mut [f64]| {
            if wht {
                v.iter_mut().for_each(|x| *x = 1.0);
            } else {
                v.iter_mut().for_each(|x| *x = 0.0);
                v[0] = 1.0;
            }
        };
        identity(&mut self.prefix[..q]);
        identity(&mut self.suffix[d * q..(d + 1) * q]);
        for j in 0..d {
            let (head, tail) = self.prefix.split_at_mut((j + 1) * q);
            let (prev, next) = (&head[j * q..], &mut tail[..q]);
            combine(wht, prev, &self.perm[j * q..(j + 1) * q], next);
        }
        for j in (0..d).rev() {
            let (head, tail) = self.suffix.split_at_mut((j + 1) * q);
            combine(
                wht,
                &tail[..q],
                &self.perm[j * q..(j + 1) * q],
                &mut head[j * q..],
            );
        }
        let mut fallbacks = 0;
        for j in 0..d {
            combine(
                wht,
                &self.prefix[j * q..(j + 1) * q],
                &self.suffix[(j + 1) * q..(j + 2) * q],
                &mut self.tmp,
            );
            if wht {
                wht_in_place(&mut self.tmp);
                let scale = 1.0 / q as f64;
                self.tmp.iter_mut().for_each(|x| *x = (*x * scale).max(0.0));
            }
            // The others sum to s, so h_j x_j = s and x_j = h_j^{-1} s.
            let dst = &mut out[j * q..(j + 1) * q];
            unpermute_scalar_into(field, &self.tmp, h[j], dst);
            if normalize_in_place(dst).is_err() {
                dst.iter_mut().for_each(|x| *x = 1.0 / q as f64);
                fallbacks += 1;
            }
        }
        fallbacks
    }
}

/// Point-wise product in the transform domain, convolution otherwise.
fn combine(wht: bool, a: &[f64], b: &[f64], out: &mut [f64]) {
    if wht {
        for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
            *o = x * y;
        }
    } else {
        convolve_direct_into(a, b, out);
    }
}

/// Reusable flooding-schedule decoder.
pub struct BpDecoder<'a> {
    graph: &'a TannerGraph,
    field: &'a Field,
    config: BpConfig,
    v2c: Vec<f64>,
    c2v: Vec<f64>,
    app: Vec<f64>,
    ws: CheckWorkspace,
    h_raw: Vec<u8>,
}

impl<'a> BpDecoder<'a> {
    pub fn new(graph: &'a TannerGraph, field: &'a Field, config: BpConfig) -> BpDecoder<'a> {
        let q = field.q();
        let e = graph.n_edges();
        let max_deg = (0..graph.n_cn).map(|c| graph.cn_degree(c)).max().unwrap_or(0);
        BpDecoder {
            graph,
            field,
            config,
            v2c: vec![0.0; e * q],
            c2v: vec![0.0; e * q],
            app: vec![0.0; graph.n_vn * q],
            ws: CheckWorkspace::new(q, max_deg),
            h_raw: graph.edge_h.iter().map(|x| x.0).collect(),
        }
    }

    /// `channel` is flat `n x q`, one row per variable node.
    pub fn decode_flat(&mut self, channel: &[f64]) -> Result<BpOutput> {
        let g = self.graph;
        let q = self.field.q();
        if channel.len() != g.n_vn * q {
            return Err(Error::LengthMismatch {
                expected: g.n_vn * q,
                got: channel.len(),
            });
        }
        for e in 0..g.n_edges() {
            let v = g.edge_vn[e];
            self.v2c[e * q..(e + 1) * q].copy_from_slice(&channel[v * q..(v + 1) * q]);
        }
        let mut fallbacks = 0;
        let mut iterations = 0;
        let mut converged = false;
        let mut decision = Vec::with_capacity(g.n_vn);
        for iter in 1..=self.config.max_iter {
            iterations = iter;
            for c in 0..g.n_cn {
                let r = g.cn_start[c]..g.cn_start[c + 1];
                fallbacks += self.ws.update(
                    self.field,
                    self.config.backend,
                    &self.h_raw[r.clone()],
                    &self.v2c[r.start * q..r.end * q],
                    &mut self.c2v[r.start * q..r.end * q],
                );
            }
            for v in 0..g.n_vn {
                let app = &mut self.app[v * q..(v + 1) * q];
                app.copy_from_slice(&channel[v * q..(v + 1) * q]);
                for &e in &g.vn_edges[v] {
                    for (a, m) in app.iter_mut().zip(&self.c2v[e * q..(e + 1) * q]) {
                        *a *= m;
                    }
                }
                for &e in &g.vn_edges[v] {
                    let out = &mut self.v2c[e * q..(e + 1) * q];
                    out.copy_from_slice(&channel[v * q..(v + 1) * q]);
                    for &o in &g.vn_edges[v] {
                        if o != e {
                            for (x, m) in out.iter_mut().zip(&self.c2v[o * q..(o + 1) * q]) {
                                *x *= m;
                            }
                        }
                    }
                    if normalize_in_place(out).is_err() {
                        out.iter_mut().for_each(|x| *x = 1.0 / q as f64);
                        fallbacks += 1;
                    }
                }
                if normalize_in_place(app).is_err() {
                    app.iter_mut().for_each(|x| *x = 1.0 / q as f64);
                    fallbacks += 1;
                }
            }
            decision.clear();
            let mut tied = false;
            for row in self.app.chunks_exact(q) {
                decision.push(FieldElement(argmax(row) as u8));
                tied |= max_is_tied(row);
            }
            if !tied && syndrome(g, self.field, &decision)?.is_zero() {
                converged = true;
                if self.config.early_stop {
                    break;
                }
            } else {
                converged = false;
            }
        }
        Ok(BpOutput {
            decision,
            app: self
                .app
                .chunks_exact(q)
                .map(|r| Pmf::new(r.to_vec()).expect("valid p.m.f."))
                .collect(),
            iterations,
            converged,
            underflow_fallbacks: fallbacks,
        })
    }

    pub fn decode(&mut self, channel: &[Pmf]) -> Result<BpOutput> {
        let flat: Vec<f64> = channel.iter().flat_map(|p| p.values().iter().copied()).collect();
        self.decode_flat(&flat)
    }
}

pub fn bp_decode(graph: &TannerGraph, field: &Field, channel: &[Pmf], max_iter: usize) -> Result<BpOutput> {
    let config = BpConfig {
        max_iter,
        ..BpConfig::default()
    };
    BpDecoder::new(graph, field, config).decode(channel)
}
