//! Symbol-MAP decoding of the memory-1 component codes.
//!
//! Both component trellises have q states and one step per symbol, and both
//! fit one template. With `S_i` the observation attached to the state
//! reached at step `i` and `E_i` the observation attached to the edge
//! increment,
//!
//! ```text
//! phi_i      = S_i . [pi_f(phi_{i-1}) (*) E_i]
//! beta_{i-1} = pi_f^{-1}{ [beta_i . S_i] (*) E_i }
//! X_i        = pi_f(phi_{i-1}) (*) [beta_i . S_i]      (edge extrinsic)
//! Y_i        = [pi_f(phi_{i-1}) (*) E_i] . beta_i      (state extrinsic)
//! ```
//!
//! where `(*)` is the XOR convolution. For the accumulator
//! `p_i = g_i u_i + f_i p_{i-1}` the state is `p_i`, so `S = gamma_p` and
//! `E = pi_g(gamma_u)`, and the input extrinsic is `pi_g^{-1}(X)`. For the
//! differentiator `v_i = u_i + f_i u_{i-1}` the state is `u_i`, so
//! `S = gamma_u` and `E = gamma_v`; `X` is the extrinsic on `v` and `Y` the
//! extrinsic on `u`.

use crate::error::{Error, Result};
use crate::galois::{Field, FieldElement};
use crate::pmf::{
    convolve_direct_into, convolve_wht_into, permute_scalar_into, unpermute_scalar_into, wht_in_place,
    ConvBackend, Pmf,
};

/// How the circular trellis of a tail-biting code is closed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TailPolicy {
    /// Uniform start, repeated wraps around the ring until the wrap-point
    /// p.m.f. moves by less than [`WRAP_EPSILON`] in L1 or [`MAX_WRAPS`]
    /// wraps are spent, then one clean sweep each way.
    #[default]
    Circular,
    /// One anchored pass per start state, combined with the weight of the
    /// closed paths through that state. Exact, and q times the work.
    Exact,
}

pub const WRAP_EPSILON: f64 = 1e-6;
pub const MAX_WRAPS: usize = 4;

/// Per-step observations of an accumulator trellis.
#[derive(Clone, Debug, PartialEq)]
pub struct TrellisObservations {
    pub gamma_u: Vec<Pmf>,
    pub gamma_p: Vec<Pmf>,
    pub g: Vec<FieldElement>,
    pub f: Vec<FieldElement>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtrinsicOutput {
    pub mu_u: Vec<Pmf>,
    pub app_u: Vec<Pmf>,
    pub app_p: Vec<Pmf>,
    pub wraps: usize,
    /// False when a circular sweep hit the wrap limit before settling.
    pub converged: bool,
}

/// Per-step observations of a differentiator trellis.
#[derive(Clone, Debug, PartialEq)]
pub struct DifferentiatorObservations {
    pub gamma_u: Vec<Pmf>,
    pub gamma_v: Vec<Pmf>,
    pub f: Vec<FieldElement>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DifferentiatorOutput {
    pub mu_u: Vec<Pmf>,
    pub app_u: Vec<Pmf>,
    pub mu_v: Vec<Pmf>,
    pub wraps: usize,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Boundary {
    /// Start and end in state 0.
    Terminated,
    Tailbiting(TailPolicy),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub(crate) struct RunInfo {
    pub wraps: usize,
    pub converged: bool,
}

/// Scales `v` to unit sum and returns the natural log of the factor removed,
/// or `None` if `v` vanished.
fn unit_sum(v: &mut [f64]) -> Option<f64> {
    let max = v.iter().cloned().fold(0.0f64, f64::max);
    if max <= 0.0 || !max.is_finite() {
        return None;
    }
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x /= max;
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
    Some(max.ln() + sum.ln())
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Flat-buffer forward-backward engine shared by both trellis types.
///
/// Inputs are `n x q` row-major: `s` and `e` as in the module docs, `f` the
/// per-step feedback. After [`run`](Self::run), `x`, `y` and `app` hold the
/// normalized edge extrinsic, state extrinsic and state APP per step.
pub(crate) struct Engine {
    q: usize,
    backend: ConvBackend,
    phi: Vec<f64>,
    beta: Vec<f64>,
    e_hat: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub app: Vec<f64>,
    acc_x: Vec<f64>,
    acc_y: Vec<f64>,
    acc_app: Vec<f64>,
    t1: Vec<f64>,
    t2: Vec<f64>,
    t3: Vec<f64>,
    t4: Vec<f64>,
}

impl Engine {
    pub fn new(q: usize, backend: ConvBackend) -> Engine {
        Engine {
            q,
            backend,
            phi: Vec::new(),
            beta: Vec::new(),
            e_hat: Vec::new(),
            x: Vec::new(),
            y: Vec::new(),
            app: Vec::new(),
            acc_x: Vec::new(),
            acc_y: Vec::new(),
            acc_app: Vec::new(),
            t1: vec![0.0; q],
            t2: vec![0.0; q],
            t3: vec![0.0; q],
            t4: vec![0.0; q],
        }
    }

    fn resize(&mut self, n: usize) {
        let q = self.q;
        for v in [&mut self.phi, &mut self.beta] {
            v.resize((n + 1) * q, 0.0);
        }
        for v in [
            &mut self.e_hat,
            &mut self.x,
            &mut self.y,
            &mut self.app,
            &mut self.acc_x,
            &mut self.acc_y,
            &mut self.acc_app,
        ] {
            v.resize(n * q, 0.0);
        }
    }

    /// `out = a (*) E_i`, using the cached spectrum of `E_i` on the WHT path.
    fn conv_e(&mut self, e: &[f64], i: usize, a_is_t1: bool) {
        let q = self.q;
        let (src, out) = if a_is_t1 {
            (&self.t1, &mut self.t3)
        } else {
            (&self.t2, &mut self.t3)
        };
        match self.backend {
            ConvBackend::Direct => convolve_direct_into(src, &e[i * q..(i + 1) * q], out),
            ConvBackend::Wht => {
                out.copy_from_slice(src);
                wht_in_place(out);
                for (o, s) in out.iter_mut().zip(&self.e_hat[i * q..(i + 1) * q]) {
                    *o *= s;
                }
                wht_in_place(out);
                let scale = 1.0 / q as f64;
                for o in out.iter_mut() {
                    *o = (*o * scale).max(0.0);
                }
            }
        }
    }

    /// `t3 = t1 (*) t2`.
    fn conv_t1_t2(&mut self) {
        match self.backend {
            ConvBackend::Direct => convolve_direct_into(&self.t1, &self.t2, &mut self.t3),
            ConvBackend::Wht => convolve_wht_into(&self.t1, &self.t2, &mut self.t3, &mut self.t4),
        }
    }

    /// Forward sweep from `phi[0..q]`, storing `phi_i` at row `i + 1`.
    /// Returns the log of the total scale removed, `None` on underflow.
    fn forward(&mut self, field: &Field, s: &[f64], e: &[f64], f: &[u8], n: usize) -> Option<f64> {
        let q = self.q;
        let mut log_scale = 0.0;
        for i in 0..n {
            permute_scalar_into(field, &self.phi[i * q..(i + 1) * q], f[i], &mut self.t1);
            self.conv_e(e, i, true);
            let row = &mut self.phi[(i + 1) * q..(i + 2) * q];
            for ((r, c), sv) in row.iter_mut().zip(&self.t3).zip(&s[i * q..(i + 1) * q]) {
                *r = c * sv;
            }
            log_scale += unit_sum(row)?;
        }
        Some(log_scale)
    }

    /// Backward sweep from `beta` row `n` (`beta_{n-1}`), storing
    /// `beta_{i-1}` at row `i`.
    fn backward(&mut self, field: &Field, s: &[f64], e: &[f64], f: &[u8], n: usize) -> Option<()> {
        let q = self.q;
        for i in (0..n).rev() {
            for ((t, b), sv) in self
                .t2
                .iter_mut()
                .zip(&self.beta[(i + 1) * q..(i + 2) * q])
                .zip(&s[i * q..(i + 1) * q])
            {
                *t = b * sv;
            }
            self.conv_e(e, i, false);
            let row = &mut self.beta[i * q..(i + 1) * q];
            unpermute_scalar_into(field, &self.t3, f[i], row);
            unit_sum(row)?;
        }
        Some(())
    }

    /// Fills `x`, `y`, `app` (unnormalized) from the stored sweeps.
    fn outputs(&mut self, field: &Field, s: &[f64], e: &[f64], f: &[u8], n: usize) {
        let q = self.q;
        for i in 0..n {
            let si = &s[i * q..(i + 1) * q];
            permute_scalar_into(field, &self.phi[i * q..(i + 1) * q], f[i], &mut self.t1);
            for ((t, b), sv) in self
                .t2
                .iter_mut()
                .zip(&self.beta[(i + 1) * q..(i + 2) * q])
                .zip(si)
            {
                *t = b * sv;
            }
            self.conv_t1_t2();
            self.x[i * q..(i + 1) * q].copy_from_slice(&self.t3);
            self.conv_e(e, i, true);
            for (w, (c, b)) in self
                .t3
                .iter()
                .zip(&self.beta[(i + 1) * q..(i + 2) * q])
                .enumerate()
            {
                self.y[i * q + w] = c * b;
            }
            for w in 0..q {
                self.app[i * q + w] = self.phi[(i + 1) * q + w] * self.beta[(i + 1) * q + w];
            }
        }
    }

    fn prepare(&mut self, e: &[f64], n: usize) {
        self.resize(n);
        if self.backend == ConvBackend::Wht {
            self.e_hat[..n * self.q].copy_from_slice(&e[..n * self.q]);
            for row in self.e_hat[..n * self.q].chunks_exact_mut(self.q) {
                wht_in_place(row);
            }
        }
    }

    pub fn run(
        &mut self,
        field: &Field,
        s: &[f64],
        e: &[f64],
        f: &[u8],
        boundary: Boundary,
    ) -> Result<RunInfo> {
        let q = self.q;
        let n = f.len();
        debug_assert_eq!(s.len(), n * q);
        debug_assert_eq!(e.len(), n * q);
        self.prepare(e, n);
        match boundary {
            Boundary::Terminated => {
                self.anchored(field, s, e, f, n, 0).ok_or(Error::Underflow)?;
                self.normalize_outputs(n)?;
                Ok(RunInfo {
                    wraps: 0,
                    converged: true,
                })
            }
            Boundary::Tailbiting(TailPolicy::Circular) => {
                let info = self.circular(field, s, e, f, n)?;
                self.normalize_outputs(n)?;
                Ok(info)
            }
            Boundary::Tailbiting(TailPolicy::Exact) => {
                self.exact(field, s, e, f, n)?;
                Ok(RunInfo {
                    wraps: 0,
                    converged: true,
                })
            }
        }
    }

    /// Sweeps pinned to start and end in state `s0`. Returns the log of the
    /// total weight of the closed paths, `-inf` when there are none, or
    /// `None` on underflow mid-sweep.
    fn anchored(
        &mut self,
        field: &Field,
        s: &[f64],
        e: &[f64],
        f: &[u8],
        n: usize,
        s0: usize,
    ) -> Option<f64> {
        let q = self.q;
        self.phi[..q].iter_mut().for_each(|x| *x = 0.0);
        self.phi[s0] = 1.0;
        let log_scale = self.forward(field, s, e, f, n)?;
        let end = self.phi[n * q + s0];
        if end <= 0.0 {
            return Some(f64::NEG_INFINITY);
        }
        self.beta[n * q..(n + 1) * q].iter_mut().for_each(|x| *x = 0.0);
        self.beta[n * q + s0] = 1.0;
        self.backward(field, s, e, f, n)?;
        self.outputs(field, s, e, f, n);
        Some(log_scale + end.ln())
    }

    fn circular(&mut self, field: &Field, s: &[f64], e: &[f64], f: &[u8], n: usize) -> Result<RunInfo> {
        let q = self.q;
        let uniform = 1.0 / q as f64;
        let mut converged = true;
        let mut wraps = 0;

        self.phi[..q].iter_mut().for_each(|x| *x = uniform);
        let mut settled = false;
        for w in 1..=MAX_WRAPS {
            self.forward(field, s, e, f, n).ok_or(Error::Underflow)?;
            let (start, rest) = self.phi.split_at_mut(q);
            let end = &rest[(n - 1) * q..n * q];
            let d = l1(start, end);
            start.copy_from_slice(end);
            wraps = wraps.max(w);
            if d < WRAP_EPSILON {
                settled = true;
                break;
            }
        }
        converged &= settled;
        self.forward(field, s, e, f, n).ok_or(Error::Underflow)?;

        self.beta[n * q..(n + 1) * q]
            .iter_mut()
            .for_each(|x| *x = uniform);
        let mut settled = false;
        for w in 1..=MAX_WRAPS {
            self.backward(field, s, e, f, n).ok_or(Error::Underflow)?;
            let (head, tail) = self.beta.split_at_mut(n * q);
            let d = l1(&head[..q], &tail[..q]);
            tail[..q].copy_from_slice(&head[..q]);
            wraps = wraps.max(w);
            if d < WRAP_EPSILON {
                settled = true;
                break;
            }
        }
        converged &= settled;
        self.backward(field, s, e, f, n).ok_or(Error::Underflow)?;
        self.outputs(field, s, e, f, n);
        Ok(RunInfo { wraps, converged })
    }

    fn exact(&mut self, field: &Field, s: &[f64], e: &[f64], f: &[u8], n: usize) -> Result<()> {
        let q = self.q;
        let mut weights = Vec::with_capacity(q);
        // First pass finds the anchor weights; the second accumulates with
        // weights relative to the largest, so nothing overflows.
        for s0 in 0..q {
            weights.push(self.anchored(field, s, e, f, n, s0).ok_or(Error::Underflow)?);
        }
        let top = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(Error::Underflow);
        }
        self.acc_x.iter_mut().for_each(|v| *v = 0.0);
        self.acc_y.iter_mut().for_each(|v| *v = 0.0);
        self.acc_app.iter_mut().for_each(|v| *v = 0.0);
        for s0 in 0..q {
            if !weights[s0].is_finite() {
                continue;
            }
            let w = (weights[s0] - top).exp();
            if w == 0.0 {
                continue;
            }
            self.anchored(field, s, e, f, n, s0).ok_or(Error::Underflow)?;
            for i in 0..n {
                let r = i * q..(i + 1) * q;
                let mass = |v: &[f64], c: &[f64]| -> f64 { v.iter().zip(c).map(|(a, b)| a * b).sum() };
                let mx = mass(&self.x[r.clone()], &e[r.clone()]);
                let my = mass(&self.y[r.clone()], &s[r.clone()]);
                let ma: f64 = self.app[r.clone()].iter().sum();
                for j in r.clone() {
                    if mx > 0.0 {
                        self.acc_x[j] += w * self.x[j] / mx;
                    }
                    if my > 0.0 {
                        self.acc_y[j] += w * self.y[j] / my;
                    }
                    if ma > 0.0 {
                        self.acc_app[j] += w * self.app[j] / ma;
                    }
                }
            }
        }
        std::mem::swap(&mut self.x, &mut self.acc_x);
        std::mem::swap(&mut self.y, &mut self.acc_y);
        std::mem::swap(&mut self.app, &mut self.acc_app);
        self.normalize_outputs(n)
    }

    fn normalize_outputs(&mut self, n: usize) -> Result<()> {
        let q = self.q;
        for v in [&mut self.x, &mut self.y, &mut self.app] {
            for row in v[..n * q].chunks_exact_mut(q) {
                unit_sum(row).ok_or(Error::Underflow)?;
            }
        }
        Ok(())
    }
}

fn check_obs(q: usize, n: usize, pmfs: &[Pmf], coeffs: &[FieldElement]) -> Result<()> {
    if pmfs.len() != n || coeffs.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: pmfs.len().min(coeffs.len()),
        });
    }
    if let Some(p) = pmfs.iter().find(|p| p.len() != q) {
        return Err(Error::LengthMismatch {
            expected: q,
            got: p.len(),
        });
    }
    if coeffs.iter().any(|c| c.is_zero()) {
        return Err(Error::ZeroScalar);
    }
    Ok(())
}

fn flatten(pmfs: &[Pmf]) -> Vec<f64> {
    pmfs.iter().flat_map(|p| p.values().iter().copied()).collect()
}

fn rows(v: &[f64], q: usize, n: usize) -> Vec<Pmf> {
    v[..n * q]
        .chunks_exact(q)
        .map(|r| Pmf::new(r.to_vec()).expect("engine output is a valid p.m.f."))
        .collect()
}

/// `phi_i = gamma_p . [pi_f(phi_{i-1}) (*) pi_g(gamma_u)]`, normalized.
pub fn forward_step(
    field: &Field,
    phi_prev: &Pmf,
    gamma_u: &Pmf,
    gamma_p: &Pmf,
    g: FieldElement,
    f: FieldElement,
) -> Result<Pmf> {
    let q = field.q();
    check_obs(q, 1, std::slice::from_ref(gamma_u), &[g])?;
    check_obs(q, 1, std::slice::from_ref(gamma_p), &[f])?;
    let mut a = vec![0.0; q];
    let mut b = vec![0.0; q];
    permute_scalar_into(field, phi_prev.values(), f.0, &mut a);
    permute_scalar_into(field, gamma_u.values(), g.0, &mut b);
    let mut out = vec![0.0; q];
    let mut scratch = vec![0.0; q];
    convolve_wht_into(&a, &b, &mut out, &mut scratch);
    for (o, p) in out.iter_mut().zip(gamma_p.values()) {
        *o *= p;
    }
    unit_sum(&mut out).ok_or(Error::Underflow)?;
    Pmf::new(out)
}

/// `beta_i = pi_f^{-1}{[beta_{i+1} . gamma_p] (*) pi_g(gamma_u)}` with the
/// observations and coefficients of step `i + 1`, normalized.
pub fn backward_step(
    field: &Field,
    beta_next: &Pmf,
    gamma_u_next: &Pmf,
    gamma_p_next: &Pmf,
    g: FieldElement,
    f: FieldElement,
) -> Result<Pmf> {
    let q = field.q();
    check_obs(q, 1, std::slice::from_ref(gamma_u_next), &[g])?;
    check_obs(q, 1, std::slice::from_ref(gamma_p_next), &[f])?;
    let a: Vec<f64> = beta_next
        .values()
        .iter()
        .zip(gamma_p_next.values())
        .map(|(b, p)| b * p)
        .collect();
    let mut b = vec![0.0; q];
    permute_scalar_into(field, gamma_u_next.values(), g.0, &mut b);
    let mut c = vec![0.0; q];
    let mut scratch = vec![0.0; q];
    convolve_wht_into(&a, &b, &mut c, &mut scratch);
    let mut out = vec![0.0; q];
    unpermute_scalar_into(field, &c, f.0, &mut out);
    unit_sum(&mut out).ok_or(Error::Underflow)?;
    Pmf::new(out)
}

/// Reusable accumulator decoder holding its working buffers.
pub struct AccumulatorDecoder {
    engine: Engine,
    s: Vec<f64>,
    e: Vec<f64>,
    g: Vec<u8>,
    f: Vec<u8>,
}

impl AccumulatorDecoder {
    pub fn new(q: usize, backend: ConvBackend) -> AccumulatorDecoder {
        AccumulatorDecoder {
            engine: Engine::new(q, backend),
            s: Vec::new(),
            e: Vec::new(),
            g: Vec::new(),
            f: Vec::new(),
        }
    }

    /// Flat `n x q` inputs. On success `mu_u` and `app_p` receive the input
    /// extrinsic and the state (parity) APP, both normalized.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn decode_flat(
        &mut self,
        field: &Field,
        gamma_u: &[f64],
        gamma_p: &[f64],
        g: &[FieldElement],
        f: &[FieldElement],
        boundary: Boundary,
        mu_u: &mut [f64],
        app_p: &mut [f64],
    ) -> Result<RunInfo> {
        let q = self.engine.q;
        let n = g.len();
        self.g.clear();
        self.g.extend(g.iter().map(|x| x.0));
        self.f.clear();
        self.f.extend(f.iter().map(|x| x.0));
        self.s.clear();
        self.s.extend_from_slice(&gamma_p[..n * q]);
        self.e.resize(n * q, 0.0);
        for i in 0..n {
            permute_scalar_into(
                field,
                &gamma_u[i * q..(i + 1) * q],
                self.g[i],
                &mut self.e[i * q..(i + 1) * q],
            );
        }
        let info = self.engine.run(field, &self.s, &self.e, &self.f, boundary)?;
        for i in 0..n {
            unpermute_scalar_into(
                field,
                &self.engine.x[i * q..(i + 1) * q],
                self.g[i],
                &mut mu_u[i * q..(i + 1) * q],
            );
        }
        app_p[..n * q].copy_from_slice(&self.engine.app[..n * q]);
        Ok(info)
    }

    fn decode(
        &mut self,
        field: &Field,
        obs: &TrellisObservations,
        boundary: Boundary,
    ) -> Result<ExtrinsicOutput> {
        let q = field.q();
        let n = obs.g.len();
        check_obs(q, n, &obs.gamma_u, &obs.g)?;
        check_obs(q, n, &obs.gamma_p, &obs.f)?;
        let gu = flatten(&obs.gamma_u);
        let gp = flatten(&obs.gamma_p);
        let mut mu = vec![0.0; n * q];
        let mut app_p = vec![0.0; n * q];
        let info = self.decode_flat(field, &gu, &gp, &obs.g, &obs.f, boundary, &mut mu, &mut app_p)?;
        let mut app_u = mu.clone();
        for (a, c) in app_u.iter_mut().zip(&gu) {
            *a *= c;
        }
        for row in app_u.chunks_exact_mut(q) {
            unit_sum(row).ok_or(Error::Underflow)?;
        }
        Ok(ExtrinsicOutput {
            mu_u: rows(&mu, q, n),
            app_u: rows(&app_u, q, n),
            app_p: rows(&app_p, q, n),
            wraps: info.wraps,
            converged: info.converged,
        })
    }
}

/// MAP decoding of a zero-terminated accumulator. The observations cover
/// all steps including the termination step, whose input is the symbol that
/// returns the state to zero.
pub fn bcjr_terminated(field: &Field, obs: &TrellisObservations) -> Result<ExtrinsicOutput> {
    AccumulatorDecoder::new(field.q(), ConvBackend::Wht).decode(field, obs, Boundary::Terminated)
}

/// MAP decoding of a tail-biting accumulator.
pub fn bcjr_tailbiting(
    field: &Field,
    obs: &TrellisObservations,
    policy: TailPolicy,
) -> Result<ExtrinsicOutput> {
    bcjr_tailbiting_with(field, obs, policy, ConvBackend::Wht)
}

pub fn bcjr_tailbiting_with(
    field: &Field,
    obs: &TrellisObservations,
    policy: TailPolicy,
    backend: ConvBackend,
) -> Result<ExtrinsicOutput> {
    if field.product(&obs.f) == FieldElement::ONE {
        return Err(Error::SingularTailBiting);
    }
    AccumulatorDecoder::new(field.q(), backend).decode(field, obs, Boundary::Tailbiting(policy))
}

/// Reusable tail-biting differentiator decoder.
pub struct DifferentiatorDecoder {
    engine: Engine,
    f: Vec<u8>,
}

impl DifferentiatorDecoder {
    pub fn new(q: usize, backend: ConvBackend) -> DifferentiatorDecoder {
        DifferentiatorDecoder {
            engine: Engine::new(q, backend),
            f: Vec::new(),
        }
    }

    /// On success `mu_u`, `mu_v`, `app_u` receive the normalized extrinsic
    /// on `u`, extrinsic on `v` and APP on `u`.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn decode_flat(
        &mut self,
        field: &Field,
        gamma_u: &[f64],
        gamma_v: &[f64],
        f: &[FieldElement],
        policy: TailPolicy,
        mu_u: &mut [f64],
        mu_v: &mut [f64],
        app_u: &mut [f64],
    ) -> Result<RunInfo> {
        let n = f.len();
        let q = self.engine.q;
        self.f.clear();
        self.f.extend(f.iter().map(|x| x.0));
        let info = self
            .engine
            .run(field, gamma_u, gamma_v, &self.f, Boundary::Tailbiting(policy))?;
        mu_v[..n * q].copy_from_slice(&self.engine.x[..n * q]);
        mu_u[..n * q].copy_from_slice(&self.engine.y[..n * q]);
        app_u[..n * q].copy_from_slice(&self.engine.app[..n * q]);
        Ok(info)
    }
}

/// MAP decoding of the tail-biting differentiator `v_i = u_i + f_i u_{i-1}`.
/// The feedback product plays no role here: every message is a valid
/// circular input.
pub fn bcjr_differentiator(
    field: &Field,
    obs: &DifferentiatorObservations,
    policy: TailPolicy,
) -> Result<DifferentiatorOutput> {
    let q = field.q();
    let n = obs.f.len();
    check_obs(q, n, &obs.gamma_u, &obs.f)?;
    check_obs(q, n, &obs.gamma_v, &obs.f)?;
    let gu = flatten(&obs.gamma_u);
    let gv = flatten(&obs.gamma_v);
    let (mut mu_u, mut mu_v, mut app_u) = (vec![0.0; n * q], vec![0.0; n * q], vec![0.0; n * q]);
    let info = DifferentiatorDecoder::new(q, ConvBackend::Wht)
        .decode_flat(field, &gu, &gv, &obs.f, policy, &mut mu_u, &mut mu_v, &mut app_u)?;
    Ok(DifferentiatorOutput {
        mu_u: rows(&mu_u, q, n),
        app_u: rows(&app_u, q, n),
        mu_v: rows(&mu_v, q, n),
        wraps: info.wraps,
        converged: info.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{accumulate_tailbiting, accumulate_terminated, differentiate_circular};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gf4() -> Field {
        Field::with_default_poly(2).unwrap()
    }

    fn random_pmf(rng: &mut ChaCha8Rng, q: usize) -> Pmf {
        let v: Vec<f64> = (0..q).map(|_| rng.random_range(0.01..1.0)).collect();
        let s: f64 = v.iter().sum();
        Pmf::new(v.into_iter().map(|x| x / s).collect()).unwrap()
    }

    fn nonzero(rng: &mut ChaCha8Rng, q: usize) -> FieldElement {
        FieldElement(rng.random_range(1..q) as u8)
    }

    fn messages(q: usize, k: usize) -> impl Iterator<Item = Vec<FieldElement>> {
        (0..q.pow(k as u32)).map(move |mut idx| {
            (0..k)
                .map(|_| {
                    let d = idx % q;
                    idx /= q;
                    FieldElement(d as u8)
                })
                .collect()
        })
    }

    /// Largest entry difference relative to the largest reference entry.
    fn rel_err(a: &Pmf, b: &[f64]) -> f64 {
        let s: f64 = b.iter().sum();
        let top = b.iter().cloned().fold(0.0, f64::max) / s;
        a.values()
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y / s).abs())
            .fold(0.0, f64::max)
            / top
    }

    #[test]
    fn forward_step_matches_edge_enumeration() {
        let f = gf4();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (phi, gu, gp) = (
                random_pmf(&mut rng, 4),
                random_pmf(&mut rng, 4),
                random_pmf(&mut rng, 4),
            );
            let (g, fb) = (nonzero(&mut rng, 4), nonzero(&mut rng, 4));
            let mut want = vec![0.0; 4];
            for sp in f.elements() {
                for u in f.elements() {
                    let s = f.add(f.mul(g, u), f.mul(fb, sp));
                    want[s.index()] += phi.values()[sp.index()] * gu.values()[u.index()];
                }
            }
            for (w, p) in want.iter_mut().zip(gp.values()) {
                *w *= p;
            }
            let got = forward_step(&f, &phi, &gu, &gp, g, fb).unwrap();
            assert!(rel_err(&got, &want) < 1e-12);
        }
    }

    #[test]
    fn backward_step_matches_edge_enumeration() {
        let f = gf4();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let (beta, gu, gp) = (
                random_pmf(&mut rng, 4),
                random_pmf(&mut rng, 4),
                random_pmf(&mut rng, 4),
            );
            let (g, fb) = (nonzero(&mut rng, 4), nonzero(&mut rng, 4));
            let mut want = vec![0.0; 4];
            for sp in f.elements() {
                for u in f.elements() {
                    let s = f.add(f.mul(g, u), f.mul(fb, sp)).index();
                    want[sp.index()] += gu.values()[u.index()] * gp.values()[s] * beta.values()[s];
                }
            }
            let got = backward_step(&f, &beta, &gu, &gp, g, fb).unwrap();
            assert!(rel_err(&got, &want) < 1e-12);
        }
    }

    #[test]
    fn step_special_cases() {
        let f = Field::with_default_poly(4).unwrap();
        let (g, fb) = (FieldElement(7), FieldElement(3));
        let (u, sp) = (FieldElement(9), FieldElement(12));
        let s = f.add(f.mul(g, u), f.mul(fb, sp));
        let out = forward_step(
            &f,
            &Pmf::delta(16, sp),
            &Pmf::delta(16, u),
            &Pmf::uniform(16),
            g,
            fb,
        )
        .unwrap();
        assert_eq!(out, Pmf::delta(16, s));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gp = random_pmf(&mut rng, 16);
        let out = forward_step(&f, &Pmf::uniform(16), &Pmf::uniform(16), &gp, g, fb).unwrap();
        assert!(rel_err(&out, gp.values()) < 1e-12);
        let out = backward_step(&f, &Pmf::uniform(16), &Pmf::uniform(16), &Pmf::uniform(16), g, fb).unwrap();
        assert!(rel_err(&out, &[1.0; 16]) < 1e-12);
    }

    struct Instance {
        obs: TrellisObservations,
    }

    fn random_instance(rng: &mut ChaCha8Rng, q: usize, n: usize, tailbiting: bool) -> Instance {
        let field = Field::with_default_poly(q.trailing_zeros()).unwrap();
        loop {
            let g: Vec<_> = (0..n).map(|_| nonzero(rng, q)).collect();
            let fb: Vec<_> = (0..n).map(|_| nonzero(rng, q)).collect();
            if tailbiting && field.product(&fb) == FieldElement::ONE {
                continue;
            }
            return Instance {
                obs: TrellisObservations {
                    gamma_u: (0..n).map(|_| random_pmf(rng, q)).collect(),
                    gamma_p: (0..n).map(|_| random_pmf(rng, q)).collect(),
                    g,
                    f: fb,
                },
            };
        }
    }

    /// Unnormalized posterior marginals of inputs and outputs over all
    /// messages; `encode` maps a message to the `(inputs, outputs)` sequences.
    fn brute_force(
        obs: &TrellisObservations,
        q: usize,
        k: usize,
        encode: impl Fn(&[FieldElement]) -> (Vec<FieldElement>, Vec<FieldElement>),
    ) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let n = obs.g.len();
        let mut app_u = vec![vec![0.0; q]; n];
        let mut app_p = vec![vec![0.0; q]; n];
        for msg in messages(q, k) {
            let (inp, out) = encode(&msg);
            let w: f64 = (0..n)
                .map(|i| obs.gamma_u[i].values()[inp[i].index()] * obs.gamma_p[i].values()[out[i].index()])
                .product();
            for i in 0..n {
                app_u[i][inp[i].index()] += w;
                app_p[i][out[i].index()] += w;
            }
        }
        (app_u, app_p)
    }

    #[test]
    fn terminated_matches_exhaustive_posterior() {
        let f = gf4();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for k in 2..=4 {
            for _ in 0..30 {
                let inst = random_instance(&mut rng, 4, k + 1, false);
                let obs = &inst.obs;
                let (want_u, want_p) = brute_force(obs, 4, k, |m| {
                    accumulate_terminated(&f, m, &obs.g, &obs.f).unwrap()
                });
                let out = bcjr_terminated(&f, obs).unwrap();
                for i in 0..=k {
                    assert!(rel_err(&out.app_u[i], &want_u[i]) < 1e-10);
                    assert!(rel_err(&out.app_p[i], &want_p[i]) < 1e-10);
                }
            }
        }
    }

    fn tailbiting_truth(f: &Field, obs: &TrellisObservations) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let k = obs.g.len();
        brute_force(obs, f.q(), k, |m| {
            (m.to_vec(), accumulate_tailbiting(f, m, &obs.g, &obs.f).unwrap())
        })
    }

    #[test]
    fn exact_tailbiting_matches_exhaustive_posterior() {
        let f = gf4();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 2..=4 {
            for _ in 0..30 {
                let inst = random_instance(&mut rng, 4, k, true);
                let (want_u, want_p) = tailbiting_truth(&f, &inst.obs);
                let out = bcjr_tailbiting(&f, &inst.obs, TailPolicy::Exact).unwrap();
                for i in 0..k {
                    assert!(rel_err(&out.app_u[i], &want_u[i]) < 1e-10);
                    assert!(rel_err(&out.app_p[i], &want_p[i]) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn circular_tailbiting_is_close_on_informative_frames() {
        // Strong observations make the circular recursion settle quickly.
        let f = gf4();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let k = 4;
        let inst = random_instance(&mut rng, 4, k, true);
        let mut obs = inst.obs;
        let u: Vec<FieldElement> = (0..k).map(|_| FieldElement(rng.random_range(0..4))).collect();
        let p = accumulate_tailbiting(&f, &u, &obs.g, &obs.f).unwrap();
        for i in 0..k {
            let mut a = vec![0.02; 4];
            a[u[i].index()] = 0.94;
            let mut b = vec![0.02; 4];
            b[p[i].index()] = 0.94;
            obs.gamma_u[i] = Pmf::new(a).unwrap();
            obs.gamma_p[i] = Pmf::new(b).unwrap();
        }
        let (want_u, _) = tailbiting_truth(&f, &obs);
        let out = bcjr_tailbiting(&f, &obs, TailPolicy::Circular).unwrap();
        for i in 0..k {
            assert!(rel_err(&out.app_u[i], &want_u[i]) < 1e-2);
            assert_eq!(out.app_u[i].argmax(), u[i]);
        }
    }

    #[test]
    fn noiseless_tailbiting_recovers_message() {
        let f = Field::with_default_poly(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let k = 16;
        let inst = random_instance(&mut rng, 256, k, true);
        let mut obs = inst.obs;
        let u: Vec<FieldElement> = (0..k).map(|_| FieldElement(rng.random())).collect();
        let p = accumulate_tailbiting(&f, &u, &obs.g, &obs.f).unwrap();
        for i in 0..k {
            obs.gamma_u[i] = Pmf::delta(256, u[i]);
            obs.gamma_p[i] = Pmf::delta(256, p[i]);
        }
        let out = bcjr_tailbiting(&f, &obs, TailPolicy::Circular).unwrap();
        assert!(out.converged);
        assert!(out.wraps <= 2, "{}", out.wraps);
        for i in 0..k {
            assert_eq!(out.app_u[i], Pmf::delta(256, u[i]));
        }
    }

    #[test]
    fn uniform_observations_give_uniform_outputs() {
        let f = Field::with_default_poly(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let inst = random_instance(&mut rng, 16, 6, true);
        let mut obs = inst.obs;
        obs.gamma_u = vec![Pmf::uniform(16); 6];
        obs.gamma_p = vec![Pmf::uniform(16); 6];
        for policy in [TailPolicy::Circular, TailPolicy::Exact] {
            let out = bcjr_tailbiting(&f, &obs, policy).unwrap();
            for p in out.app_u.iter().chain(&out.mu_u).chain(&out.app_p) {
                assert!(rel_err(p, &[1.0; 16]) < 1e-12);
            }
        }
    }

    #[test]
    fn uniform_parity_gives_uniform_extrinsic() {
        // With nothing observed on the outputs and the termination input
        // unobserved too, every message is equally compatible.
        let f = gf4();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let k = 4;
        let inst = random_instance(&mut rng, 4, k + 1, false);
        let mut obs = inst.obs;
        obs.gamma_p = vec![Pmf::uniform(4); k + 1];
        obs.gamma_u[k] = Pmf::uniform(4);
        let out = bcjr_terminated(&f, &obs).unwrap();
        for p in &out.mu_u[..k] {
            assert!(rel_err(p, &[1.0; 4]) < 1e-10);
        }
    }

    #[test]
    fn extrinsic_excludes_own_observation() {
        let f = Field::with_default_poly(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        // The circular start state is itself estimated from every
        // observation, so that policy is only exclusive up to its wrap
        // tolerance.
        for (policy, tol) in [(TailPolicy::Circular, 1e-5), (TailPolicy::Exact, 1e-10)] {
            let inst = random_instance(&mut rng, 16, 8, true);
            let base = bcjr_tailbiting(&f, &inst.obs, policy).unwrap();
            for i in [0, 3, 7] {
                let mut obs = inst.obs.clone();
                obs.gamma_u[i] = random_pmf(&mut rng, 16);
                let out = bcjr_tailbiting(&f, &obs, policy).unwrap();
                assert!(rel_err(&out.mu_u[i], base.mu_u[i].values()) < tol);
            }
        }
    }

    #[test]
    fn wht_and_direct_backends_agree() {
        for m in [2, 4, 8] {
            let q = 1usize << m;
            let f = Field::with_default_poly(m).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(17 + m as u64);
            let inst = random_instance(&mut rng, q, 6, true);
            let a = bcjr_tailbiting_with(&f, &inst.obs, TailPolicy::Circular, ConvBackend::Wht).unwrap();
            let b = bcjr_tailbiting_with(&f, &inst.obs, TailPolicy::Circular, ConvBackend::Direct).unwrap();
            for (x, y) in a.app_u.iter().zip(&b.app_u).chain(a.mu_u.iter().zip(&b.mu_u)) {
                assert!(rel_err(x, y.values()) < 1e-12);
            }
        }
    }

    #[test]
    fn outputs_are_normalized() {
        let f = Field::with_default_poly(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let inst = random_instance(&mut rng, 256, 16, true);
        let out = bcjr_tailbiting(&f, &inst.obs, TailPolicy::Circular).unwrap();
        for p in out.app_u.iter().chain(&out.mu_u).chain(&out.app_p) {
            assert!((p.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn differentiator_matches_exhaustive_posterior() {
        let f = gf4();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for k in 2..=4 {
            for _ in 0..20 {
                let obs = DifferentiatorObservations {
                    gamma_u: (0..k).map(|_| random_pmf(&mut rng, 4)).collect(),
                    gamma_v: (0..k).map(|_| random_pmf(&mut rng, 4)).collect(),
                    f: (0..k).map(|_| nonzero(&mut rng, 4)).collect(),
                };
                let mut app_u = vec![vec![0.0; 4]; k];
                let mut app_v = vec![vec![0.0; 4]; k];
                for msg in messages(4, k) {
                    let v = differentiate_circular(&f, &msg, &obs.f).unwrap();
                    let w: f64 = (0..k)
                        .map(|i| {
                            obs.gamma_u[i].values()[msg[i].index()] * obs.gamma_v[i].values()[v[i].index()]
                        })
                        .product();
                    for i in 0..k {
                        app_u[i][msg[i].index()] += w;
                        app_v[i][v[i].index()] += w;
                    }
                }
                let out = bcjr_differentiator(&f, &obs, TailPolicy::Exact).unwrap();
                for i in 0..k {
                    assert!(rel_err(&out.app_u[i], &app_u[i]) < 1e-10);
                    let mu_u: Vec<f64> = app_u[i]
                        .iter()
                        .zip(obs.gamma_u[i].values())
                        .map(|(a, b)| a / b)
                        .collect();
                    assert!(rel_err(&out.mu_u[i], &mu_u) < 1e-10);
                    let mu_v: Vec<f64> = app_v[i]
                        .iter()
                        .zip(obs.gamma_v[i].values())
                        .map(|(a, b)| a / b)
                        .collect();
                    assert!(rel_err(&out.mu_v[i], &mu_v) < 1e-10);
                }
            }
        }
    }
}
