//! Multiplicative repetition: each transmitted symbol `c` is sent again as
//! `a c` for a random nonzero multiplier `a`, lowering the rate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::galois::{Field, FieldElement};
use crate::pmf::{normalize_in_place, unpermute_scalar_into, Pmf};

/// Repetition factor and multipliers. `multipliers[r][i]` scales codeword
/// position `i` in replica `r + 1`; factor 1 means no repetition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MrPlan {
    multipliers: Vec<Vec<FieldElement>>,
}

impl MrPlan {
    pub fn off() -> MrPlan {
        MrPlan {
            multipliers: Vec::new(),
        }
    }

    /// Uniform nonzero multipliers for `factor - 1` replicas of an `n`-symbol
    /// codeword.
    pub fn random(field: &Field, n: usize, factor: usize, seed: u64) -> Result<MrPlan> {
        if factor == 0 {
            return Err(Error::InvalidSpec("repetition factor must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d72_5f70_6c61_6e00);
        let q = field.q();
        let multipliers = (1..factor)
            .map(|_| {
                (0..n)
                    .map(|_| FieldElement(rng.random_range(1..q) as u8))
                    .collect()
            })
            .collect();
        Ok(MrPlan { multipliers })
    }

    pub fn from_multipliers(multipliers: Vec<Vec<FieldElement>>) -> Result<MrPlan> {
        if multipliers.iter().flatten().any(|a| a.is_zero()) {
            return Err(Error::ZeroScalar);
        }
        Ok(MrPlan { multipliers })
    }

    pub fn factor(&self) -> usize {
        self.multipliers.len() + 1
    }

    pub fn multipliers(&self) -> &[Vec<FieldElement>] {
        &self.multipliers
    }

    pub(crate) fn validate(&self, n: usize) -> Result<()> {
        for m in &self.multipliers {
            if m.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: m.len(),
                });
            }
            if m.iter().any(|a| a.is_zero()) {
                return Err(Error::ZeroScalar);
            }
        }
        Ok(())
    }
}

/// Codeword followed by each of its scaled replicas.
pub fn apply_mr(field: &Field, codeword: &[FieldElement], plan: &MrPlan) -> Result<Vec<FieldElement>> {
    plan.validate(codeword.len())?;
    let mut out = codeword.to_vec();
    for m in &plan.multipliers {
        out.extend(codeword.iter().zip(m).map(|(&c, &a)| field.mul(a, c)));
    }
    Ok(out)
}

/// Folds replica observations back onto the original symbols: the p.m.f. of
/// `a c` is mapped to one over `c` and multiplied in.
///
/// `replicas[r]` holds the p.m.f.s received for replica `r + 1`.
pub fn combine_mr(field: &Field, original: &[Pmf], replicas: &[Vec<Pmf>], plan: &MrPlan) -> Result<Vec<Pmf>> {
    if replicas.len() != plan.multipliers.len() {
        return Err(Error::LengthMismatch {
            expected: plan.multipliers.len(),
            got: replicas.len(),
        });
    }
    let mut out: Vec<Pmf> = original.to_vec();
    let mut buf = vec![0.0; field.q()];
    for (rep, mult) in replicas.iter().zip(&plan.multipliers) {
        if rep.len() != original.len() || mult.len() != original.len() {
            return Err(Error::LengthMismatch {
                expected: original.len(),
                got: rep.len(),
            });
        }
        for ((acc, p), &a) in out.iter_mut().zip(rep).zip(mult) {
            unpermute_scalar_into(field, p.values(), a.0, &mut buf);
            for (x, y) in acc.values_mut().iter_mut().zip(&buf) {
                *x *= y;
            }
            normalize_in_place(acc.values_mut())?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_two_doubles_length() {
        let f = Field::with_default_poly(8).unwrap();
        let plan = MrPlan::random(&f, 48, 2, 1).unwrap();
        assert_eq!(plan.factor(), 2);
        let c: Vec<FieldElement> = (0..48).map(|i| FieldElement(i as u8)).collect();
        let ext = apply_mr(&f, &c, &plan).unwrap();
        assert_eq!(ext.len(), 96);
        for i in 0..48 {
            assert_eq!(ext[48 + i], f.mul(plan.multipliers()[0][i], c[i]));
        }
    }

    #[test]
    fn unit_multiplier_is_plain_repetition() {
        let f = Field::with_default_poly(4).unwrap();
        let plan = MrPlan::from_multipliers(vec![vec![FieldElement::ONE; 3]]).unwrap();
        let c = [FieldElement(3), FieldElement(0), FieldElement(9)];
        let ext = apply_mr(&f, &c, &plan).unwrap();
        assert_eq!(&ext[3..], &c);
    }

    #[test]
    fn zero_multiplier_rejected() {
        assert_eq!(
            MrPlan::from_multipliers(vec![vec![FieldElement::ZERO]]),
            Err(Error::ZeroScalar)
        );
    }

    #[test]
    fn noiseless_combination_is_delta() {
        let f = Field::with_default_poly(4).unwrap();
        let plan = MrPlan::random(&f, 2, 2, 5).unwrap();
        let c = [FieldElement(6), FieldElement(13)];
        let ext = apply_mr(&f, &c, &plan).unwrap();
        let orig: Vec<Pmf> = c.iter().map(|&x| Pmf::delta(16, x)).collect();
        let reps: Vec<Pmf> = ext[2..].iter().map(|&x| Pmf::delta(16, x)).collect();
        let combined = combine_mr(&f, &orig, &[reps], &plan).unwrap();
        for (p, &x) in combined.iter().zip(&c) {
            assert_eq!(p, &Pmf::delta(16, x));
        }
    }

    #[test]
    fn replica_alone_recovers_symbol() {
        let f = Field::with_default_poly(4).unwrap();
        let plan = MrPlan::random(&f, 1, 2, 7).unwrap();
        let c = [FieldElement(11)];
        let ext = apply_mr(&f, &c, &plan).unwrap();
        let combined = combine_mr(&f, &[Pmf::uniform(16)], &[vec![Pmf::delta(16, ext[1])]], &plan).unwrap();
        assert_eq!(combined[0].argmax(), c[0]);
    }
}
