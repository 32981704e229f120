//! Systematic encoders for the parallel and serial constructions.

use crate::construction::{CodeSpec, Mode};
use crate::error::{Error, Result};
use crate::galois::{Field, FieldElement};

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, got })
    }
}

/// `p[i] = g[i] u[i] + f[i] p[i-1]` with `p[-1] = p[K-1]`.
///
/// A first pass from the zero state gives `p~[K-1]`; by linearity the
/// circular state is `p~[K-1] / (1 + prod f)` and a second pass from it
/// closes the ring.
pub fn accumulate_tailbiting(
    field: &Field,
    u: &[FieldElement],
    g: &[FieldElement],
    f: &[FieldElement],
) -> Result<Vec<FieldElement>> {
    let k = u.len();
    check_len(k, g.len())?;
    check_len(k, f.len())?;
    let denom = field.add(FieldElement::ONE, field.product(f));
    if denom.is_zero() {
        return Err(Error::SingularTailBiting);
    }
    let run = |init: FieldElement| {
        let mut p = Vec::with_capacity(k);
        let mut state = init;
        for i in 0..k {
            state = field.add(field.mul(g[i], u[i]), field.mul(f[i], state));
            p.push(state);
        }
        p
    };
    let open = run(FieldElement::ZERO);
    let init = field.div(open[k - 1], denom)?;
    Ok(run(init))
}

/// Zero-started accumulator closed by one extra step whose input drives the
/// state back to zero. `g` and `f` have `K + 1` entries; returns the
/// `K + 1` inputs (the message plus the termination symbol) and outputs.
pub fn accumulate_terminated(
    field: &Field,
    u: &[FieldElement],
    g: &[FieldElement],
    f: &[FieldElement],
) -> Result<(Vec<FieldElement>, Vec<FieldElement>)> {
    let k = u.len();
    check_len(k + 1, g.len())?;
    check_len(k + 1, f.len())?;
    let mut inputs = u.to_vec();
    let mut p = Vec::with_capacity(k + 1);
    let mut state = FieldElement::ZERO;
    for i in 0..k {
        state = field.add(field.mul(g[i], u[i]), field.mul(f[i], state));
        p.push(state);
    }
    inputs.push(field.div(field.mul(f[k], state), g[k])?);
    p.push(FieldElement::ZERO);
    Ok((inputs, p))
}

/// Circular differentiator `v[i] = u[i] + f[i] u[i-1]`, `u[-1] = u[K-1]`.
pub fn differentiate_circular(
    field: &Field,
    u: &[FieldElement],
    f: &[FieldElement],
) -> Result<Vec<FieldElement>> {
    let k = u.len();
    check_len(k, f.len())?;
    Ok((0..k)
        .map(|i| field.add(u[i], field.mul(f[i], u[(i + k - 1) % k])))
        .collect())
}

/// `[u | p1 | p2]` with `p2` accumulating `u'[i] = u[pi(i)]`.
pub fn encode_pccc(spec: &CodeSpec, u: &[FieldElement]) -> Result<Vec<FieldElement>> {
    let k = spec.k();
    check_len(k, u.len())?;
    let field = spec.field();
    let c = spec.coefficients();
    let pi = spec.interleaver();
    let p1 = accumulate_tailbiting(field, u, &c.g1, &c.f1)?;
    let u_perm: Vec<FieldElement> = (0..k).map(|i| u[pi.get(i)]).collect();
    let p2 = accumulate_tailbiting(field, &u_perm, &c.g2, &c.f2)?;
    let mut out = Vec::with_capacity(3 * k);
    out.extend_from_slice(u);
    out.extend(p1);
    out.extend(p2);
    Ok(out)
}

/// Intermediate sequences of the serial encoder.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DaTrace {
    /// Differentiator output.
    pub v: Vec<FieldElement>,
    /// `v'[pi(r)] = g2[r] v[r]`, the accumulator input.
    pub v_prime: Vec<FieldElement>,
    /// Accumulator output.
    pub p: Vec<FieldElement>,
}

pub fn da_trace(spec: &CodeSpec, u: &[FieldElement]) -> Result<DaTrace> {
    let k = spec.k();
    check_len(k, u.len())?;
    let field = spec.field();
    let c = spec.coefficients();
    let pi = spec.interleaver();
    let v = differentiate_circular(field, u, &c.f2)?;
    let mut v_prime = vec![FieldElement::ZERO; k];
    for r in 0..k {
        v_prime[pi.get(r)] = field.mul(c.g2[r], v[r]);
    }
    let p = accumulate_tailbiting(field, &v_prime, &c.g1, &c.f1)?;
    Ok(DaTrace { v, v_prime, p })
}

/// `[u | p]` for `DaR12`, `[u | p | v]` for `DaR13`.
pub fn encode_da(spec: &CodeSpec, u: &[FieldElement]) -> Result<Vec<FieldElement>> {
    let t = da_trace(spec, u)?;
    let mut out = Vec::with_capacity(spec.n());
    out.extend_from_slice(u);
    out.extend(t.p);
    if spec.mode() == Mode::DaR13 {
        out.extend(t.v);
    }
    Ok(out)
}

/// Mother codeword for the spec's mode, before puncturing and repetition.
pub fn encode(spec: &CodeSpec, u: &[FieldElement]) -> Result<Vec<FieldElement>> {
    match spec.mode() {
        Mode::Pccc => encode_pccc(spec, u),
        Mode::DaR12 | Mode::DaR13 => encode_da(spec, u),
    }
}
