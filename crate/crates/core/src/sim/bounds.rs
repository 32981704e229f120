//! Gallager random-coding upper bound for the binary-input AWGN channel and
//! Shannon's sphere-packing lower bound for the continuous-input AWGN
//! channel, both for `(n, k)` binary codes with unit-energy signals and Eb
//! counted per information bit.

use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    Rcb,
    Spb,
}

impl Bound {
    pub fn eval(self, n: usize, k: usize, ebno_db: f64) -> Result<f64> {
        match self {
            Bound::Rcb => rcb(n, k, ebno_db),
            Bound::Spb => spb(n, k, ebno_db),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Bound::Rcb => "rcb",
            Bound::Spb => "spb",
        }
    }
}

const GRID: usize = 2000;
const RHO_TOL: f64 = 1e-6;
const QUADRATURE_TOL: f64 = 1e-8;

fn check_code(n: usize, k: usize) -> Result<()> {
    if n < 2 || k == 0 || k >= n {
        return Err(Error::InvalidSpec(format!(
            "bounds need 0 < k < n, n >= 2 (n={n}, k={k})"
        )));
    }
    Ok(())
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `ln` of the composite Simpson rule for `exp(lf)` over `[a, b]` with
/// `intervals` (even) subintervals.
fn log_simpson(lf: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let h = (b - a) / intervals as f64;
    let terms: Vec<f64> = (0..=intervals)
        .map(|i| {
            let w: f64 = if i == 0 || i == intervals {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            lf(a + i as f64 * h) + w.ln()
        })
        .collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln() + (h / 3.0).ln()
}

fn sigma2_of(n: usize, k: usize, ebno_db: f64) -> f64 {
    let rate = k as f64 / n as f64;
    1.0 / (2.0 * rate * 10f64.powf(ebno_db / 10.0))
}

/// Gallager's `E0(rho)` in bits for equiprobable antipodal inputs and noise
/// variance `sigma2`.
pub fn e0(rho: f64, sigma2: f64) -> Result<f64> {
    let s = 1.0 / (1.0 + rho);
    let norm = -0.5 * (2.0 * PI * sigma2).ln();
    let lf = |y: f64| {
        let lp = norm - (y - 1.0).powi(2) / (2.0 * sigma2);
        let lm = norm - (y + 1.0).powi(2) / (2.0 * sigma2);
        (1.0 + rho) * (log_add(s * lp, s * lm) - LN_2)
    };
    let reach = 1.0 + 14.0 * sigma2.sqrt();
    let fine = log_simpson(lf, -reach, reach, GRID);
    let coarse = log_simpson(lf, -reach, reach, GRID / 2);
    if !fine.is_finite() || (fine - coarse).abs() > QUADRATURE_TOL {
        return Err(Error::Numeric(format!(
            "E0 quadrature did not converge (rho={rho}, sigma2={sigma2})"
        )));
    }
    Ok((-fine / LN_2).max(0.0))
}

/// Best random-coding exponent `max_{rho in [0,1]} E0(rho) - rho R` in bits,
/// `R = k/n`. The objective is concave in `rho`, so golden-section search
/// suffices.
pub fn rcb_exponent(n: usize, k: usize, ebno_db: f64) -> Result<f64> {
    check_code(n, k)?;
    let sigma2 = sigma2_of(n, k, ebno_db);
    let rate = k as f64 / n as f64;
    let obj = |rho: f64| e0(rho, sigma2).map(|e| e - rho * rate);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (obj(c)?, obj(d)?);
    while b - a > RHO_TOL {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = obj(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = obj(d)?;
        }
    }
    // The endpoints are candidates too: rho = 0 gives exponent 0.
    Ok(fc.max(fd).max(obj(1.0)?).max(0.0))
}

/// Random coding bound on the block error probability.
pub fn rcb(n: usize, k: usize, ebno_db: f64) -> Result<f64> {
    let ex = rcb_exponent(n, k, ebno_db)?;
    Ok((-(n as f64) * ex * LN_2).exp().min(1.0))
}

fn lgamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `ln` of the fraction of the unit sphere in `R^n` inside a cone of
/// half-angle `theta`.
fn log_cone_fraction(n: usize, theta: f64) -> f64 {
    let e = (n - 2) as f64;
    let full = 0.5 * PI.ln() + lgamma((n as f64 - 1.0) / 2.0) - lgamma(n as f64 / 2.0);
    let part = if n == 2 {
        theta.ln()
    } else {
        log_simpson(|p| e * p.sin().ln(), 0.0, theta, 2 * GRID)
    };
    part - full
}

/// Half-angle of a cone holding `2^-k` of the sphere.
fn cone_angle(n: usize, k: usize) -> f64 {
    let target = -(k as f64) * LN_2;
    let (mut lo, mut hi) = (0.0, PI);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if log_cone_fraction(n, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `ln int_0^inf r^(n-1) exp(-r^2/2 + r c) dr`.
fn log_radial(n: usize, c: f64) -> f64 {
    let e = (n - 1) as f64;
    let peak = (c + (c * c + 4.0 * e).sqrt()) / 2.0;
    let width = 1.0 / (1.0 + e / (peak * peak)).sqrt();
    let lo = (peak - 40.0 * width).max(0.0);
    let hi = peak + 40.0 * width;
    log_simpson(|r| e * r.ln() - r * r / 2.0 + r * c, lo, hi, 400)
}

/// Sphere packing bound: the probability that white Gaussian noise pushes a
/// signal of energy `n A^2` outside the cone holding `2^-k` of the sphere
/// around it.
pub fn spb(n: usize, k: usize, ebno_db: f64) -> Result<f64> {
    check_code(n, k)?;
    let a = 1.0 / sigma2_of(n, k, ebno_db).sqrt();
    let nf = n as f64;
    let theta = cone_angle(n, k);
    let amp = nf.sqrt() * a;
    let c0 = -0.5 * nf * (2.0 * PI).ln() + LN_2 + 0.5 * (nf - 1.0) * PI.ln()
        - lgamma((nf - 1.0) / 2.0)
        - 0.5 * amp * amp;
    let e = nf - 2.0;
    let lf = |p: f64| {
        let s = if e == 0.0 { 0.0 } else { e * p.sin().ln() };
        c0 + s + log_radial(n, amp * p.cos())
    };
    let lp = log_simpson(lf, theta, PI, GRID);
    if lp.is_nan() {
        return Err(Error::Numeric(format!("sphere packing bound at {ebno_db} dB")));
    }
    Ok(lp.exp().min(1.0))
}

/// Eb/N0 in dB at which `bound` falls to `target`, by bisection on
/// `[-10, 20]` dB.
pub fn bound_crossing(bound: Bound, n: usize, k: usize, target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidSpec(format!(
            "target probability {target} outside (0, 1)"
        )));
    }
    let (mut lo, mut hi) = (-10.0, 20.0);
    if bound.eval(n, k, lo)? < target || bound.eval(n, k, hi)? > target {
        return Err(Error::Numeric(format!(
            "{} for ({n}, {k}) does not cross {target} in [{lo}, {hi}] dB",
            bound.name()
        )));
    }
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if bound.eval(n, k, mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
