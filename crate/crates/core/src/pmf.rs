//! Probability mass vectors over the elements of GF(2^m).
//!
//! Both decoders exchange length-q p.m.f. vectors. The two operations they
//! need are the permutation induced by multiplying a random variable by a
//! field scalar, and the convolution over the additive group of the field
//! (the p.m.f. of a sum `X + Y`). Addition is XOR, so the group Fourier
//! transform is the Walsh-Hadamard transform and convolution becomes a
//! point-wise product in the transform domain.

use crate::error::{Error, Result};
use crate::galois::{Field, FieldElement};

/// Length-q p.m.f. indexed by the integer representation of field elements.
#[derive(Clone, Debug, PartialEq)]
pub struct Pmf(Vec<f64>);

/// Walsh-Hadamard transform of a [`Pmf`].
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum(Vec<f64>);

/// How group convolutions are evaluated. `Direct` is the O(q^2) reference sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ConvBackend {
    #[default]
    Wht,
    Direct,
}

impl Pmf {
    /// Wraps raw values. Entries must be finite and non-negative.
    pub fn new(values: Vec<f64>) -> Result<Pmf> {
        if !values.len().is_power_of_two() {
            return Err(Error::NotPowerOfTwo(values.len()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Numeric("p.m.f. entries must be finite and >= 0".into()));
        }
        Ok(Pmf(values))
    }

    pub fn uniform(q: usize) -> Pmf {
        Pmf(vec![1.0 / q as f64; q])
    }

    /// Point mass at `at`.
    pub fn delta(q: usize, at: FieldElement) -> Pmf {
        let mut v = vec![0.0; q];
        v[at.index()] = 1.0;
        Pmf(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Index of the largest entry; ties go to the smaller index.
    pub fn argmax(&self) -> FieldElement {
        FieldElement(argmax(&self.0) as u8)
    }

    /// Point-wise product.
    pub fn mul(&self, other: &Pmf) -> Result<Pmf> {
        check_len(self.len(), other.len())?;
        Ok(Pmf(self.0.iter().zip(&other.0).map(|(a, b)| a * b).collect()))
    }
}

impl Spectrum {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn mul(&self, other: &Spectrum) -> Result<Spectrum> {
        check_len(self.0.len(), other.0.len())?;
        Ok(Spectrum(
            self.0.iter().zip(&other.0).map(|(a, b)| a * b).collect(),
        ))
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        Err(Error::LengthMismatch { expected, got })
    } else {
        Ok(())
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// True when the maximum of `v` is attained at more than one index.
pub(crate) fn max_is_tied(v: &[f64]) -> bool {
    let best = argmax(v);
    v.iter().enumerate().any(|(i, &x)| i != best && x == v[best])
}

#[cfg(debug_assertions)]
thread_local! {
    static BUTTERFLY_OPS: std::cell::Cell<u64> = const { std::cell::Cell::new(0) };
}

/// Butterfly additions/subtractions performed by [`wht_in_place`] on this
/// thread since the last reset. Only tracked in debug builds.
#[cfg(debug_assertions)]
pub fn butterfly_ops() -> u64 {
    BUTTERFLY_OPS.with(|c| c.get())
}

#[cfg(debug_assertions)]
pub fn reset_butterfly_ops() {
    BUTTERFLY_OPS.with(|c| c.set(0));
}

/// Unnormalized fast Walsh-Hadamard transform,
/// `X(v) = sum_w x(w) (-1)^{popcount(w & v)}`.
///
/// Performs exactly `q log2 q` additions and subtractions.
pub fn wht_in_place(x: &mut [f64]) {
    let n = x.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for block in x.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (s, d) = (*a + *b, *a - *b);
                *a = s;
                *b = d;
            }
        }
        #[cfg(debug_assertions)]
        BUTTERFLY_OPS.with(|c| c.set(c.get() + n as u64));
        h *= 2;
    }
}

pub fn wht(p: &Pmf) -> Spectrum {
    let mut v = p.0.clone();
    wht_in_place(&mut v);
    Spectrum(v)
}

/// Inverse transform: a forward transform followed by division by q.
///
/// Rounding can leave tiny negative entries; they are clamped to zero.
pub fn iwht(s: &Spectrum) -> Pmf {
    let mut v = s.0.clone();
    wht_in_place(&mut v);
    let scale = 1.0 / v.len() as f64;
    for x in v.iter_mut() {
        *x = (*x * scale).max(0.0);
    }
    Pmf(v)
}

/// `dst[a * w] = src[w]`: the p.m.f. of `a X` when `X ~ src`.
#[inline]
pub fn permute_scalar_into(field: &Field, src: &[f64], a: u8, dst: &mut [f64]) {
    debug_assert!(a != 0);
    dst[0] = src[0];
    for w in 1..src.len() {
        dst[field.mul_raw(a, w as u8) as usize] = src[w];
    }
}

/// `dst[w] = src[a * w]`: the p.m.f. of `a^{-1} X` when `X ~ src`.
#[inline]
pub fn unpermute_scalar_into(field: &Field, src: &[f64], a: u8, dst: &mut [f64]) {
    debug_assert!(a != 0);
    dst[0] = src[0];
    for w in 1..src.len() {
        dst[w] = src[field.mul_raw(a, w as u8) as usize];
    }
}

/// Permutation induced by multiplication by the nonzero scalar `a`.
pub fn permute_scalar(field: &Field, p: &Pmf, a: FieldElement) -> Result<Pmf> {
    if a.is_zero() {
        return Err(Error::ZeroScalar);
    }
    check_len(field.q(), p.len())?;
    let mut out = vec![0.0; p.len()];
    permute_scalar_into(field, &p.0, a.0, &mut out);
    Ok(Pmf(out))
}

/// Inverse of [`permute_scalar`] (equivalently, permutation by `a^{-1}`).
pub fn permute_scalar_inv(field: &Field, p: &Pmf, a: FieldElement) -> Result<Pmf> {
    if a.is_zero() {
        return Err(Error::ZeroScalar);
    }
    check_len(field.q(), p.len())?;
    let mut out = vec![0.0; p.len()];
    unpermute_scalar_into(field, &p.0, a.0, &mut out);
    Ok(Pmf(out))
}

/// Reference O(q^2) group convolution, `out[w] = sum_v p[v] r[w ^ v]`.
pub fn convolve_direct_into(p: &[f64], r: &[f64], out: &mut [f64]) {
    for (w, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (v, &pv) in p.iter().enumerate() {
            acc += pv * r[w ^ v];
        }
        *o = acc;
    }
}

/// Group convolution through the Walsh-Hadamard domain. `scratch` must have
/// the same length as the inputs.
pub fn convolve_wht_into(p: &[f64], r: &[f64], out: &mut [f64], scratch: &mut [f64]) {
    let n = p.len();
    out.copy_from_slice(p);
    scratch.copy_from_slice(r);
    wht_in_place(out);
    wht_in_place(scratch);
    for (o, s) in out.iter_mut().zip(scratch.iter()) {
        *o *= *s;
    }
    wht_in_place(out);
    let scale = 1.0 / n as f64;
    for o in out.iter_mut() {
        *o = (*o * scale).max(0.0);
    }
}

/// Group convolution with the chosen backend; `scratch` is only used by WHT.
pub fn convolve_into(backend: ConvBackend, p: &[f64], r: &[f64], out: &mut [f64], scratch: &mut [f64]) {
    match backend {
        ConvBackend::Wht => convolve_wht_into(p, r, out, scratch),
        ConvBackend::Direct => convolve_direct_into(p, r, out),
    }
}

/// P.m.f. of `X + Y` for independent `X ~ p`, `Y ~ r`, evaluated via WHT.
pub fn convolve(p: &Pmf, r: &Pmf) -> Result<Pmf> {
    check_len(p.len(), r.len())?;
    let mut out = vec![0.0; p.len()];
    let mut scratch = vec![0.0; p.len()];
    convolve_wht_into(&p.0, &r.0, &mut out, &mut scratch);
    Ok(Pmf(out))
}

/// The O(q^2) convolution sum.
pub fn convolve_direct(p: &Pmf, r: &Pmf) -> Result<Pmf> {
    check_len(p.len(), r.len())?;
    let mut out = vec![0.0; p.len()];
    convolve_direct_into(&p.0, &r.0, &mut out);
    Ok(Pmf(out))
}

/// Scales `v` to unit sum. Fails if every entry is zero.
///
/// Vectors whose entries are all tiny are rescaled by their maximum first,
/// so a positive but subnormal sum still normalizes cleanly.
pub fn normalize_in_place(v: &mut [f64]) -> Result<()> {
    let max = v.iter().cloned().fold(0.0f64, f64::max);
    if max <= 0.0 || !max.is_finite() {
        return Err(Error::Underflow);
    }
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x /= max;
        sum += *x;
    }
    let inv = 1.0 / sum;
    for x in v.iter_mut() {
        *x *= inv;
    }
    Ok(())
}

pub fn normalize(p: &Pmf) -> Result<Pmf> {
    let mut v = p.0.clone();
    normalize_in_place(&mut v)?;
    Ok(Pmf(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pmf(rng: &mut impl Rng, q: usize) -> Pmf {
        let v: Vec<f64> = (0..q).map(|_| rng.random::<f64>()).collect();
        normalize(&Pmf(v)).unwrap()
    }

    fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
        let scale = b.iter().cloned().fold(0.0, f64::max);
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs() / scale)
            .fold(0.0, f64::max)
    }

    #[test]
    fn identity_scalar_keeps_pmf() {
        let f = Field::with_default_poly(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_pmf(&mut rng, 16);
        assert_eq!(permute_scalar(&f, &p, FieldElement::ONE).unwrap(), p);
    }

    #[test]
    fn delta_moves_to_scalar() {
        let f = Field::with_default_poly(8).unwrap();
        let p = Pmf::delta(256, FieldElement::ONE);
        let out = permute_scalar(&f, &p, f.alpha()).unwrap();
        assert_eq!(out, Pmf::delta(256, f.alpha()));
    }

    #[test]
    fn inverse_permutation_roundtrip_gf4() {
        let f = Field::with_default_poly(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for a in f.nonzero_elements() {
            let p = random_pmf(&mut rng, 4);
            let back = permute_scalar(&f, &permute_scalar(&f, &p, a).unwrap(), f.inv(a).unwrap()).unwrap();
            assert_eq!(back, p);
            let back2 = permute_scalar_inv(&f, &permute_scalar(&f, &p, a).unwrap(), a).unwrap();
            assert_eq!(back2, p);
        }
    }

    #[test]
    fn zero_scalar_rejected() {
        let f = Field::with_default_poly(2).unwrap();
        assert_eq!(
            permute_scalar(&f, &Pmf::uniform(4), FieldElement::ZERO),
            Err(Error::ZeroScalar)
        );
    }

    #[test]
    fn permutation_composition_exhaustive_gf16() {
        let f = Field::with_default_poly(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_pmf(&mut rng, 16);
        for a in f.nonzero_elements() {
            for b in f.nonzero_elements() {
                let lhs = permute_scalar(&f, &p, f.mul(a, b)).unwrap();
                let rhs = permute_scalar(&f, &permute_scalar(&f, &p, b).unwrap(), a).unwrap();
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn permutation_is_law_of_scaled_variable() {
        let f = Field::with_default_poly(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_pmf(&mut rng, 16);
        let a = FieldElement(7);
        let out = permute_scalar(&f, &p, a).unwrap();
        for w in f.elements() {
            assert_eq!(out.values()[f.mul(a, w).index()], p.values()[w.index()]);
        }
    }

    #[test]
    fn delta_convolution_translates() {
        let a = FieldElement(5);
        let b = FieldElement(12);
        let out = convolve(&Pmf::delta(16, a), &Pmf::delta(16, b)).unwrap();
        assert_eq!(out.argmax(), FieldElement(5 ^ 12));
        assert!((out.values()[(5 ^ 12) as usize] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_absorbs_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_pmf(&mut rng, 16);
        let out = convolve(&Pmf::uniform(16), &p).unwrap();
        for v in out.values() {
            assert!((v - 1.0 / 16.0).abs() < 1e-15);
        }
    }

    #[test]
    fn wht_of_delta_is_flat() {
        let s = wht(&Pmf::delta(16, FieldElement::ZERO));
        assert!(s.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn wht_gf4_example() {
        let s = wht(&Pmf(vec![0.5, 0.5, 0.0, 0.0]));
        assert_eq!(s.values(), &[1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn wht_matches_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = random_pmf(&mut rng, 16);
        let s = wht(&p);
        for nu in 0..16usize {
            let direct: f64 = (0..16usize)
                .map(|w| {
                    let sign = if (w & nu).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                    p.values()[w] * sign
                })
                .sum();
            assert!((s.values()[nu] - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn transform_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for q in [4, 16, 256] {
            for _ in 0..50 {
                let p = random_pmf(&mut rng, q);
                let back = iwht(&wht(&p));
                assert!(max_rel_err(back.values(), p.values()) < 1e-12);
            }
        }
    }

    #[test]
    fn fast_convolution_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for q in [4, 16, 256] {
            for _ in 0..100 {
                let p = random_pmf(&mut rng, q);
                let r = random_pmf(&mut rng, q);
                let fast = convolve(&p, &r).unwrap();
                let slow = convolve_direct(&p, &r).unwrap();
                assert!(max_rel_err(fast.values(), slow.values()) < 1e-12);
                let via_spectra = iwht(&wht(&p).mul(&wht(&r)).unwrap());
                assert!(max_rel_err(via_spectra.values(), slow.values()) < 1e-12);
            }
        }
    }

    #[test]
    fn convolution_length_mismatch() {
        assert!(matches!(
            convolve(&Pmf::uniform(4), &Pmf::uniform(16)),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn normalize_cases() {
        assert_eq!(
            normalize(&Pmf(vec![2.0, 2.0, 0.0, 0.0])).unwrap(),
            Pmf(vec![0.5, 0.5, 0.0, 0.0])
        );
        let p = Pmf(vec![0.25; 4]);
        assert_eq!(normalize(&p).unwrap(), p);
        assert_eq!(normalize(&Pmf(vec![0.0; 4])), Err(Error::Underflow));
        let tiny = normalize(&Pmf(vec![1e-310, 3e-310, 0.0, 0.0])).unwrap();
        assert!((tiny.values()[1] - 0.75).abs() < 1e-9);
    }

    #[cfg(debug_assertions)]
    #[test]
    fn butterfly_count_is_q_log_q() {
        for m in 1..=8u32 {
            let q = 1usize << m;
            reset_butterfly_ops();
            let mut v = vec![1.0; q];
            wht_in_place(&mut v);
            assert_eq!(butterfly_ops(), (q as u64) * m as u64);
        }
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(Pmf(vec![0.25; 4]).argmax(), FieldElement(0));
        assert_eq!(Pmf(vec![0.1, 0.4, 0.4, 0.1]).argmax(), FieldElement(1));
        assert!(max_is_tied(&[0.1, 0.4, 0.4, 0.1]));
        assert!(!max_is_tied(&[0.1, 0.5, 0.3, 0.1]));
    }
}
