//! Iterative decoding of the parallel and serial constructions from
//! per-symbol channel p.m.f.s.

use crate::construction::{CodeSpec, Mode, SparseFieldMatrix};
use crate::error::{Error, Result};
use crate::galois::FieldElement;
use crate::pmf::{argmax, max_is_tied, permute_scalar_into, unpermute_scalar_into, ConvBackend, Pmf};
use crate::trellis::{AccumulatorDecoder, Boundary, DifferentiatorDecoder, TailPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TurboConfig {
    pub max_iter: usize,
    pub policy: TailPolicy,
    pub backend: ConvBackend,
}

impl Default for TurboConfig {
    fn default() -> TurboConfig {
        TurboConfig {
            max_iter: 200,
            policy: TailPolicy::Circular,
            backend: ConvBackend::Wht,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TurboDiagnostics {
    pub iterations: usize,
    /// The hard decision satisfied every parity check with no tied maxima.
    pub converged: bool,
    /// Component runs whose circular recursion hit the wrap limit.
    pub wrap_warnings: usize,
    /// A component run underflowed and decoding stopped early.
    pub underflow: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TurboOutput {
    pub message: Vec<FieldElement>,
    pub app_u: Vec<Pmf>,
    pub diagnostics: TurboDiagnostics,
}

fn mul_norm(dst: &mut [f64], a: &[f64], b: &[f64], q: usize) {
    for (d, (x, y)) in dst.iter_mut().zip(a.iter().zip(b)) {
        *d = x * y;
    }
    for row in dst.chunks_exact_mut(q) {
        if crate::pmf::normalize_in_place(row).is_err() {
            row.iter_mut().for_each(|v| *v = 1.0 / q as f64);
        }
    }
}

fn hard(app: &[f64], q: usize, out: &mut Vec<FieldElement>) -> bool {
    let mut tied = false;
    for row in app.chunks_exact(q) {
        out.push(FieldElement(argmax(row) as u8));
        tied |= max_is_tied(row);
    }
    tied
}

fn flatten(channel: &[Pmf], n: usize, q: usize) -> Result<Vec<f64>> {
    if channel.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: channel.len(),
        });
    }
    let mut flat = Vec::with_capacity(n * q);
    for p in channel {
        if p.len() != q {
            return Err(Error::LengthMismatch {
                expected: q,
                got: p.len(),
            });
        }
        flat.extend_from_slice(p.values());
    }
    Ok(flat)
}

/// Turbo decoder for one spec, reusable across frames.
pub struct TurboDecoder<'a> {
    spec: &'a CodeSpec,
    config: TurboConfig,
    h: SparseFieldMatrix,
    acc1: AccumulatorDecoder,
    acc2: AccumulatorDecoder,
    diff: DifferentiatorDecoder,
}

impl<'a> TurboDecoder<'a> {
    pub fn new(spec: &'a CodeSpec, config: TurboConfig) -> TurboDecoder<'a> {
        let q = spec.field().q();
        let h = match spec.mode() {
            Mode::Pccc => spec.parity_check(),
            Mode::DaR12 | Mode::DaR13 => crate::construction::build_h_da(spec).compact,
        };
        TurboDecoder {
            spec,
            config,
            h,
            acc1: AccumulatorDecoder::new(q, config.backend),
            acc2: AccumulatorDecoder::new(q, config.backend),
            diff: DifferentiatorDecoder::new(q, config.backend),
        }
    }

    /// Decodes one frame of mother-codeword channel p.m.f.s, flat `n x q`
    /// in codeword order.
    pub fn decode_flat(&mut self, channel: &[f64]) -> Result<TurboOutput> {
        let q = self.spec.field().q();
        let n = self.spec.n();
        if channel.len() != n * q {
            return Err(Error::LengthMismatch {
                expected: n * q,
                got: channel.len(),
            });
        }
        match self.spec.mode() {
            Mode::Pccc => self.parallel(channel),
            Mode::DaR12 | Mode::DaR13 => self.serial(channel),
        }
    }

    pub fn decode(&mut self, channel: &[Pmf]) -> Result<TurboOutput> {
        let flat = flatten(channel, self.spec.n(), self.spec.field().q())?;
        self.decode_flat(&flat)
    }

    fn parallel(&mut self, ch: &[f64]) -> Result<TurboOutput> {
        let spec = self.spec;
        let field = spec.field();
        let (q, k) = (field.q(), spec.k());
        let c = spec.coefficients();
        let pi = spec.interleaver();
        let boundary = Boundary::Tailbiting(self.config.policy);
        let ch_u = &ch[..k * q];
        let ch_p1 = &ch[k * q..2 * k * q];
        let ch_p2 = &ch[2 * k * q..3 * k * q];

        let uniform = 1.0 / q as f64;
        let mut ext21 = vec![uniform; k * q];
        let mut mu1 = vec![0.0; k * q];
        let mut mu2 = vec![0.0; k * q];
        let mut gamma = vec![0.0; k * q];
        let mut gamma_perm = vec![0.0; k * q];
        let mut prior_perm = vec![0.0; k * q];
        let mut app_p1 = vec![uniform; k * q];
        let mut app_p2 = vec![uniform; k * q];
        let mut app_u = vec![0.0; k * q];
        let mut tmp = vec![0.0; k * q];
        let mut diag = TurboDiagnostics::default();
        let mut decision = Vec::with_capacity(3 * k);

        for iter in 1..=self.config.max_iter {
            diag.iterations = iter;
            mul_norm(&mut gamma, ch_u, &ext21, q);
            match self.acc1.decode_flat(
                field,
                &gamma,
                ch_p1,
                &c.g1,
                &c.f1,
                boundary,
                &mut mu1,
                &mut app_p1,
            ) {
                Ok(info) => diag.wrap_warnings += usize::from(!info.converged),
                Err(_) => {
                    diag.underflow = true;
                    break;
                }
            }
            for i in 0..k {
                let j = pi.get(i);
                prior_perm[i * q..(i + 1) * q].copy_from_slice(&mu1[j * q..(j + 1) * q]);
                tmp[i * q..(i + 1) * q].copy_from_slice(&ch_u[j * q..(j + 1) * q]);
            }
            mul_norm(&mut gamma_perm, &tmp, &prior_perm, q);
            match self.acc2.decode_flat(
                field,
                &gamma_perm,
                ch_p2,
                &c.g2,
                &c.f2,
                boundary,
                &mut mu2,
                &mut app_p2,
            ) {
                Ok(info) => diag.wrap_warnings += usize::from(!info.converged),
                Err(_) => {
                    diag.underflow = true;
                    break;
                }
            }
            for i in 0..k {
                let j = pi.get(i);
                ext21[j * q..(j + 1) * q].copy_from_slice(&mu2[i * q..(i + 1) * q]);
            }
            mul_norm(&mut tmp, ch_u, &mu1, q);
            mul_norm(&mut app_u, &tmp, &ext21, q);

            decision.clear();
            let tied = hard(&app_u, q, &mut decision);
            hard(&app_p1, q, &mut decision);
            hard(&app_p2, q, &mut decision);
            if !tied && self.h.is_codeword(field, &decision)? {
                diag.converged = true;
                break;
            }
        }
        if app_u.iter().all(|&v| v == 0.0) {
            mul_norm(&mut app_u, ch_u, &ext21, q);
        }
        Ok(finish(app_u, q, k, diag))
    }

    fn serial(&mut self, ch: &[f64]) -> Result<TurboOutput> {
        let spec = self.spec;
        let field = spec.field();
        let (q, k) = (field.q(), spec.k());
        let c = spec.coefficients();
        let pi = spec.interleaver();
        let boundary = Boundary::Tailbiting(self.config.policy);
        let ch_u = &ch[..k * q];
        let ch_p = &ch[k * q..2 * k * q];
        let uniform = 1.0 / q as f64;
        let ch_v: Vec<f64> = if spec.mode() == Mode::DaR13 {
            ch[2 * k * q..3 * k * q].to_vec()
        } else {
            vec![uniform; k * q]
        };

        let mut mu_v_outer = vec![uniform; k * q];
        let mut mu_v_inner = vec![0.0; k * q];
        let mut mu_vp = vec![0.0; k * q];
        let mut mu_u = vec![0.0; k * q];
        let mut app_u = vec![0.0; k * q];
        let mut app_p = vec![uniform; k * q];
        let mut prior_v = vec![0.0; k * q];
        let mut prior_vp = vec![0.0; k * q];
        let mut gamma_v = vec![0.0; k * q];
        let mut diag = TurboDiagnostics::default();
        let mut decision = Vec::with_capacity(2 * k);

        for iter in 1..=self.config.max_iter {
            diag.iterations = iter;
            // Inner accumulator on v', a-priori from the outer decoder.
            mul_norm(&mut prior_v, &ch_v, &mu_v_outer, q);
            for r in 0..k {
                let j = pi.get(r);
                permute_scalar_into(
                    field,
                    &prior_v[r * q..(r + 1) * q],
                    c.g2[r].0,
                    &mut prior_vp[j * q..(j + 1) * q],
                );
            }
            match self.acc1.decode_flat(
                field, &prior_vp, ch_p, &c.g1, &c.f1, boundary, &mut mu_vp, &mut app_p,
            ) {
                Ok(info) => diag.wrap_warnings += usize::from(!info.converged),
                Err(_) => {
                    diag.underflow = true;
                    break;
                }
            }
            for r in 0..k {
                let j = pi.get(r);
                unpermute_scalar_into(
                    field,
                    &mu_vp[j * q..(j + 1) * q],
                    c.g2[r].0,
                    &mut mu_v_inner[r * q..(r + 1) * q],
                );
            }
            // Outer differentiator.
            mul_norm(&mut gamma_v, &ch_v, &mu_v_inner, q);
            match self.diff.decode_flat(
                field,
                ch_u,
                &gamma_v,
                &c.f2,
                self.config.policy,
                &mut mu_u,
                &mut mu_v_outer,
                &mut app_u,
            ) {
                Ok(info) => diag.wrap_warnings += usize::from(!info.converged),
                Err(_) => {
                    diag.underflow = true;
                    break;
                }
            }

            decision.clear();
            let tied = hard(&app_u, q, &mut decision);
            hard(&app_p, q, &mut decision);
            if !tied && self.h.is_codeword(field, &decision)? {
                diag.converged = true;
                break;
            }
        }
        if app_u.iter().all(|&v| v == 0.0) {
            app_u.copy_from_slice(ch_u);
        }
        Ok(finish(app_u, q, k, diag))
    }
}

fn finish(app_u: Vec<f64>, q: usize, k: usize, diag: TurboDiagnostics) -> TurboOutput {
    let mut message = Vec::with_capacity(k);
    hard(&app_u, q, &mut message);
    let app_u = app_u
        .chunks_exact(q)
        .map(|r| Pmf::new(r.to_vec()).expect("valid p.m.f."))
        .collect();
    TurboOutput {
        message,
        app_u,
        diagnostics: diag,
    }
}

/// Parallel schedule: the first accumulator's decoder, then the second's on
/// the interleaved input, exchanging extrinsic information on `u`.
pub fn turbo_decode_parallel(spec: &CodeSpec, channel: &[Pmf], max_iter: usize) -> Result<TurboOutput> {
    if spec.mode() != Mode::Pccc {
        return Err(Error::InvalidSpec(format!(
            "parallel schedule needs pccc, got {}",
            spec.mode()
        )));
    }
    TurboDecoder::new(
        spec,
        TurboConfig {
            max_iter,
            ..TurboConfig::default()
        },
    )
    .decode(channel)
}

/// Serial schedule: the inner accumulator's decoder, then the outer
/// differentiator's, exchanging extrinsic information on `v`.
pub fn turbo_decode_serial(spec: &CodeSpec, channel: &[Pmf], max_iter: usize) -> Result<TurboOutput> {
    if !spec.mode().is_serial() {
        return Err(Error::InvalidSpec(format!(
            "serial schedule needs a DA mode, got {}",
            spec.mode()
        )));
    }
    TurboDecoder::new(
        spec,
        TurboConfig {
            max_iter,
            ..TurboConfig::default()
        },
    )
    .decode(channel)
}
