//! Interleaver generators: relative-prime, spread (S-random style) and a
//! girth-aware search over random candidates.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::CycleGraph;

/// How an interleaver was generated, kept so a run manifest can say so.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InterleaverKind {
    RelativePrime {
        a: usize,
        p: usize,
    },
    Spread {
        seed: u64,
        s_target: usize,
        achieved: usize,
    },
    GirthAware {
        seed: u64,
        trials: usize,
    },
    Explicit,
}

/// A bijection on `0..K`. `mapping[i] = pi(i)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interleaver {
    mapping: Vec<usize>,
    kind: InterleaverKind,
}

impl Interleaver {
    pub fn from_mapping(mapping: Vec<usize>) -> Result<Interleaver> {
        Interleaver::with_kind(mapping, InterleaverKind::Explicit)
    }

    fn with_kind(mapping: Vec<usize>, kind: InterleaverKind) -> Result<Interleaver> {
        if !is_permutation(&mapping) {
            return Err(Error::NotPermutation(mapping.len()));
        }
        Ok(Interleaver { mapping, kind })
    }

    pub fn identity(k: usize) -> Interleaver {
        Interleaver {
            mapping: (0..k).collect(),
            kind: InterleaverKind::RelativePrime { a: 0, p: 1 },
        }
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> usize {
        self.mapping[i]
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn kind(&self) -> &InterleaverKind {
        &self.kind
    }

    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.mapping.len()];
        for (i, &p) in self.mapping.iter().enumerate() {
            inv[p] = i;
        }
        inv
    }

    /// Spread of this mapping under [`spread_of`].
    pub fn spread(&self) -> usize {
        spread_of(&self.mapping)
    }
}

pub fn is_permutation(mapping: &[usize]) -> bool {
    let mut seen = vec![false; mapping.len()];
    for &p in mapping {
        if p >= mapping.len() || seen[p] {
            return false;
        }
        seen[p] = true;
    }
    true
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `pi(j) = (a + p j) mod K`.
pub fn relative_prime_interleaver(k: usize, a: usize, p: usize) -> Result<Interleaver> {
    if k == 0 || gcd(p % k, k) != 1 {
        return Err(Error::NotCoprime { p, k });
    }
    let mapping = (0..k).map(|j| (a + p * j) % k).collect();
    Interleaver::with_kind(mapping, InterleaverKind::RelativePrime { a, p })
}

#[inline]
fn circ_dist(a: usize, b: usize, k: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(k - d)
}

/// True when every pair `i != j` with circular `|i - j| < s` satisfies
/// `|pi(i) - pi(j)| + |i - j| >= s`, distances taken circularly.
pub fn satisfies_spread(mapping: &[usize], s: usize) -> bool {
    let k = mapping.len();
    for i in 0..k {
        for j in (i + 1)..k {
            let d = circ_dist(i, j, k);
            if d < s && circ_dist(mapping[i], mapping[j], k) + d < s {
                return false;
            }
        }
    }
    true
}

/// Largest `s` for which [`satisfies_spread`] holds.
pub fn spread_of(mapping: &[usize]) -> usize {
    let k = mapping.len();
    let mut s = 1;
    while s <= k && satisfies_spread(mapping, s + 1) {
        s += 1;
    }
    s
}

const SPREAD_RESTARTS: usize = 200;

fn try_spread(k: usize, s: usize, rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
    let mut pool: Vec<usize> = (0..k).collect();
    pool.shuffle(rng);
    let mut mapping = Vec::with_capacity(k);
    for i in 0..k {
        let pos = pool.iter().position(|&v| {
            mapping.iter().enumerate().all(|(j, &pj): (usize, &usize)| {
                let d = circ_dist(i, j, k);
                d >= s || circ_dist(v, pj, k) + d >= s
            })
        })?;
        mapping.push(pool.swap_remove(pos));
    }
    Some(mapping)
}

/// S-random style generator. Retries with a smaller spread target when the
/// requested one cannot be met; the kind records the spread achieved.
pub fn spread_interleaver(k: usize, seed: u64, s_target: usize) -> Interleaver {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = s_target.max(1);
    loop {
        for _ in 0..SPREAD_RESTARTS {
            if let Some(mapping) = try_spread(k, s, &mut rng) {
                let achieved = spread_of(&mapping);
                return Interleaver {
                    mapping,
                    kind: InterleaverKind::Spread {
                        seed,
                        s_target,
                        achieved,
                    },
                };
            }
        }
        // s = 1 always succeeds, so this terminates.
        s -= 1;
    }
}

/// Ranking of a candidate: larger girth first, then fewer shortest cycles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GirthScore {
    pub girth: usize,
    pub shortest_cycles: u64,
}

fn score_candidate(mapping: &[usize]) -> GirthScore {
    let graph = CycleGraph::pccc(mapping);
    match graph.girth() {
        Some(g) => GirthScore {
            girth: g,
            shortest_cycles: graph.count_cycles(g),
        },
        None => GirthScore {
            girth: usize::MAX,
            shortest_cycles: 0,
        },
    }
}

fn candidate(k: usize, seed: u64, trial: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    let mut mapping: Vec<usize> = (0..k).collect();
    mapping.shuffle(&mut rng);
    mapping
}

/// Girth-driven search for the cycle graph of the parallel construction.
///
/// Candidates are `trials` random permutations plus every relative-prime
/// mapping `pi(j) = p j mod K`. The best one (larger girth, then fewer
/// shortest cycles, then earliest candidate) is refined by sweeps of
/// improving transpositions until a sweep finds none or
/// `MAX_SWAP_SWEEPS` is reached.
pub fn girth_aware_interleaver(k: usize, seed: u64, trials: usize) -> Result<Interleaver> {
    if trials == 0 {
        return Err(Error::InvalidSpec("girth-aware search needs trials >= 1".into()));
    }
    if k < 2 {
        return Err(Error::InvalidSpec("interleaver length must be >= 2".into()));
    }
    let coprime: Vec<usize> = (1..k).filter(|&p| gcd(p, k) == 1).collect();
    let make = |t: usize| -> Vec<usize> {
        if t < trials {
            candidate(k, seed, t)
        } else {
            let p = coprime[t - trials];
            (0..k).map(|j| p * j % k).collect()
        }
    };
    let best = (0..trials + coprime.len())
        .into_par_iter()
        .map(|t| (score_candidate(&make(t)), t))
        .reduce_with(|a, b| if better(&b, &a) { b } else { a })
        .expect("trials >= 1");
    let mapping = refine_by_swaps(make(best.1), best.0);
    Interleaver::with_kind(mapping, InterleaverKind::GirthAware { seed, trials })
}

const MAX_SWAP_SWEEPS: usize = 4;

fn refine_by_swaps(mut mapping: Vec<usize>, mut score: GirthScore) -> Vec<usize> {
    let k = mapping.len();
    for _ in 0..MAX_SWAP_SWEEPS {
        let mut improved = false;
        for i in 0..k {
            for j in (i + 1)..k {
                mapping.swap(i, j);
                let s = score_candidate(&mapping);
                if better(&(s, 0), &(score, 0)) {
                    score = s;
                    improved = true;
                } else {
                    mapping.swap(i, j);
                }
            }
        }
        if !improved {
            break;
        }
    }
    mapping
}

fn better(a: &(GirthScore, usize), b: &(GirthScore, usize)) -> bool {
    let key = |x: &(GirthScore, usize)| (std::cmp::Reverse(x.0.girth), x.0.shortest_cycles, x.1);
    key(a) < key(b)
}

/// Score used by [`girth_aware_interleaver`], exposed for reports.
pub fn girth_score(mapping: &[usize]) -> GirthScore {
    score_candidate(mapping)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_prime_examples() {
        let il = relative_prime_interleaver(5, 1, 2).unwrap();
        assert_eq!(il.mapping(), &[1, 3, 0, 2, 4]);
        let id = relative_prime_interleaver(7, 0, 1).unwrap();
        assert_eq!(id.mapping(), &[0, 1, 2, 3, 4, 5, 6]);
        assert!(matches!(
            relative_prime_interleaver(6, 0, 2),
            Err(Error::NotCoprime { .. })
        ));
    }

    #[test]
    fn inverse_composes_to_identity() {
        let il = relative_prime_interleaver(11, 3, 4).unwrap();
        let inv = il.inverse();
        for i in 0..11 {
            assert_eq!(inv[il.get(i)], i);
        }
    }

    #[test]
    fn explicit_mapping_validated() {
        assert!(Interleaver::from_mapping(vec![0, 0, 1]).is_err());
        assert!(Interleaver::from_mapping(vec![0, 3, 1]).is_err());
        assert!(Interleaver::from_mapping(vec![2, 0, 1]).is_ok());
    }

    /// Pair scan written independently of `satisfies_spread`.
    fn pair_scan_ok(mapping: &[usize], s: usize) -> bool {
        let k = mapping.len() as i64;
        let cd = |a: i64, b: i64| {
            let d = (a - b).rem_euclid(k);
            d.min(k - d)
        };
        for i in 0..k {
            for j in 0..k {
                if i == j {
                    continue;
                }
                let d = cd(i, j);
                if d < s as i64 && cd(mapping[i as usize] as i64, mapping[j as usize] as i64) + d < s as i64 {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn spread_k40_s4() {
        let il = spread_interleaver(40, 11, 4);
        assert!(is_permutation(il.mapping()));
        assert!(pair_scan_ok(il.mapping(), 4));
        match il.kind() {
            InterleaverKind::Spread { achieved, .. } => assert!(*achieved >= 4),
            k => panic!("unexpected kind {k:?}"),
        }
    }

    #[test]
    fn spread_one_is_trivial_and_seeded() {
        let a = spread_interleaver(20, 5, 1);
        let b = spread_interleaver(20, 5, 1);
        assert_eq!(a, b);
        assert!(pair_scan_ok(a.mapping(), 1));
        let c = spread_interleaver(64, 9, 5);
        assert_eq!(c, spread_interleaver(64, 9, 5));
    }

    #[test]
    fn spread_degrades_gracefully() {
        let il = spread_interleaver(8, 1, 8);
        assert!(is_permutation(il.mapping()));
        assert!(pair_scan_ok(il.mapping(), il.spread()));
    }

    #[test]
    fn girth_aware_k5_reaches_cage_girth() {
        let il = girth_aware_interleaver(5, 3, 200).unwrap();
        assert_eq!(girth_score(il.mapping()).girth, 5);
    }

    #[test]
    fn girth_aware_is_seeded() {
        let a = girth_aware_interleaver(12, 4, 8).unwrap();
        assert_eq!(a, girth_aware_interleaver(12, 4, 8).unwrap());
        assert!(is_permutation(a.mapping()));
    }

    #[test]
    fn girth_aware_beats_relative_prime_on_average() {
        let base = relative_prime_interleaver(16, 1, 3).unwrap();
        let base_girth = girth_score(base.mapping()).girth as f64;
        let mean: f64 = (0..10)
            .map(|s| girth_score(girth_aware_interleaver(16, s, 64).unwrap().mapping()).girth as f64)
            .sum::<f64>()
            / 10.0;
        assert!(mean >= base_girth, "mean {mean} < baseline {base_girth}");
    }

    proptest::proptest! {
        #[test]
        fn generators_yield_bijections(k in 2usize..60, seed in 0u64..1000) {
            proptest::prop_assert!(is_permutation(spread_interleaver(k, seed, 3).mapping()));
            proptest::prop_assert!(is_permutation(candidate(k, seed, 0).as_slice()));
        }
    }
}
