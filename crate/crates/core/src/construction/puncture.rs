//! Symbol-wise puncturing plans.

use std::fmt;
use std::str::FromStr;

use super::Mode;
use crate::error::{Error, Result};

/// A code rate as a reduced fraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rate {
    num: u32,
    den: u32,
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Rate {
    /// Panics on a zero denominator.
    pub fn new(num: u32, den: u32) -> Rate {
        assert!(den != 0, "rate denominator must be nonzero");
        let g = gcd(num, den).max(1);
        Rate {
            num: num / g,
            den: den / g,
        }
    }

    pub fn num(self) -> u32 {
        self.num
    }

    pub fn den(self) -> u32 {
        self.den
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Rate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Rate> {
        let bad = || Error::Parse(format!("bad rate {s:?}, expected a fraction like 1/2"));
        let (a, b) = s.trim().split_once('/').ok_or_else(bad)?;
        let num: u32 = a.trim().parse().map_err(|_| bad())?;
        let den: u32 = b.trim().parse().map_err(|_| bad())?;
        if num == 0 || den == 0 || num > den {
            return Err(bad());
        }
        Ok(Rate::new(num, den))
    }
}

/// Which symbols a plan removes first.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum PuncturePattern {
    /// Periodic puncturing of accumulator outputs. For the parallel
    /// construction the two parity branches are punctured in balance.
    #[default]
    Parity,
    /// Parallel construction only: puncture every symbol of the degree-2
    /// variable node type attached to both accumulators (the information
    /// symbols `u`), which yields the rate-1/2 DA code on the same graph;
    /// higher rates then puncture the first accumulator's output.
    V0,
}

impl fmt::Display for PuncturePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PuncturePattern::Parity => "parity",
            PuncturePattern::V0 => "v0",
        })
    }
}

impl FromStr for PuncturePattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<PuncturePattern> {
        match s.to_ascii_lowercase().as_str() {
            "parity" | "periodic" => Ok(PuncturePattern::Parity),
            "v0" => Ok(PuncturePattern::V0),
            other => Err(Error::Parse(format!(
                "unknown puncture pattern {other:?} (expected parity or v0)"
            ))),
        }
    }
}

/// Codeword positions sent as erasures.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PuncturePlan {
    n: usize,
    /// Sorted, distinct.
    punctured: Vec<usize>,
    mask: Vec<bool>,
}

impl PuncturePlan {
    pub fn none(n: usize) -> PuncturePlan {
        PuncturePlan {
            n,
            punctured: Vec::new(),
            mask: vec![false; n],
        }
    }

    pub fn from_indices(n: usize, mut punctured: Vec<usize>) -> Result<PuncturePlan> {
        punctured.sort_unstable();
        punctured.dedup();
        if let Some(&bad) = punctured.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidSpec(format!(
                "punctured index {bad} outside codeword of length {n}"
            )));
        }
        let mut mask = vec![false; n];
        for &i in &punctured {
            mask[i] = true;
        }
        Ok(PuncturePlan { n, punctured, mask })
    }

    pub fn codeword_len(&self) -> usize {
        self.n
    }

    pub fn indices(&self) -> &[usize] {
        &self.punctured
    }

    pub fn len(&self) -> usize {
        self.punctured.len()
    }

    pub fn is_empty(&self) -> bool {
        self.punctured.is_empty()
    }

    #[inline]
    pub fn is_punctured(&self, i: usize) -> bool {
        self.mask[i]
    }
}

/// `count` evenly spaced offsets in `0..len`, starting from offset 1 so the
/// first symbol of the block is kept. `count >= len` selects everything.
fn periodic_offsets(count: usize, len: usize) -> Vec<usize> {
    if count >= len {
        return (0..len).collect();
    }
    (0..count).map(|j| 1 + j * len / count).collect()
}

/// Plan reaching `target` from the mother rate of `mode` with `k` information
/// symbols per frame.
pub fn make_puncture_plan(
    mode: Mode,
    pattern: PuncturePattern,
    target: Rate,
    k: usize,
) -> Result<PuncturePlan> {
    let n = mode.codeword_len(k);
    let unreachable = |reason: String| Error::UnreachableRate {
        num: target.num(),
        den: target.den(),
        reason,
    };
    let scaled = k as u64 * target.den() as u64;
    if !scaled.is_multiple_of(target.num() as u64) {
        return Err(unreachable(format!(
            "K={k} information symbols do not give an integer codeword length"
        )));
    }
    let transmitted = (scaled / target.num() as u64) as usize;
    if transmitted > n {
        return Err(unreachable(format!(
            "below the mother rate {}",
            mode.mother_rate()
        )));
    }
    let count = n - transmitted;
    if count == 0 {
        return Ok(PuncturePlan::none(n));
    }
    let mut punctured = Vec::with_capacity(count);
    match (mode, pattern) {
        (Mode::Pccc, PuncturePattern::Parity) => {
            if count >= 2 * k {
                return Err(unreachable("would remove every parity symbol".into()));
            }
            let first = count.div_ceil(2);
            punctured.extend(periodic_offsets(first, k).into_iter().map(|o| k + o));
            punctured.extend(periodic_offsets(count - first, k).into_iter().map(|o| 2 * k + o));
        }
        (Mode::Pccc, PuncturePattern::V0) => {
            if count < k {
                return Err(unreachable(
                    "V0 puncturing removes all K information symbols first".into(),
                ));
            }
            if count - k >= k {
                return Err(unreachable("would remove a whole accumulator output".into()));
            }
            punctured.extend(0..k);
            punctured.extend(periodic_offsets(count - k, k).into_iter().map(|o| k + o));
        }
        (Mode::DaR12, _) => {
            if count >= k {
                return Err(unreachable("would remove the whole accumulator output".into()));
            }
            punctured.extend(periodic_offsets(count, k).into_iter().map(|o| k + o));
        }
        (Mode::DaR13, _) => {
            if count <= k {
                punctured.extend(periodic_offsets(count, k).into_iter().map(|o| 2 * k + o));
            } else {
                if count - k >= k {
                    return Err(unreachable("would remove the whole accumulator output".into()));
                }
                punctured.extend(2 * k..3 * k);
                punctured.extend(periodic_offsets(count - k, k).into_iter().map(|o| k + o));
            }
        }
    }
    PuncturePlan::from_indices(n, punctured)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_parsing() {
        assert_eq!("2/4".parse::<Rate>().unwrap(), Rate::new(1, 2));
        assert!("3/2".parse::<Rate>().is_err());
        assert!("half".parse::<Rate>().is_err());
        assert_eq!(Rate::new(16, 96).to_string(), "1/6");
    }

    #[test]
    fn pccc_half_rate_balanced() {
        let k = 16;
        let plan = make_puncture_plan(Mode::Pccc, PuncturePattern::Parity, Rate::new(1, 2), k).unwrap();
        assert_eq!(plan.len(), 16);
        let b1: Vec<usize> = plan
            .indices()
            .iter()
            .filter(|&&i| i < 2 * k)
            .map(|i| i - k)
            .collect();
        let b2: Vec<usize> = plan
            .indices()
            .iter()
            .filter(|&&i| i >= 2 * k)
            .map(|i| i - 2 * k)
            .collect();
        assert_eq!(b1, vec![1, 3, 5, 7, 9, 11, 13, 15]);
        assert_eq!(b2, b1);
        assert!(plan.indices().iter().all(|&i| i >= k));
        // rate check: k / (n - punctured)
        assert_eq!(Rate::new(k as u32, (3 * k - plan.len()) as u32), Rate::new(1, 2));
    }

    #[test]
    fn pccc_two_thirds() {
        let plan = make_puncture_plan(Mode::Pccc, PuncturePattern::Parity, Rate::new(2, 3), 16).unwrap();
        assert_eq!(plan.len(), 24);
        assert!(!plan.is_punctured(16) && !plan.is_punctured(32));
    }

    #[test]
    fn mother_rate_is_empty() {
        for mode in [Mode::Pccc, Mode::DaR12, Mode::DaR13] {
            let plan = make_puncture_plan(mode, PuncturePattern::Parity, mode.mother_rate(), 16).unwrap();
            assert!(plan.is_empty());
        }
    }

    #[test]
    fn v0_puncturing_gives_da_half_rate() {
        let plan = make_puncture_plan(Mode::Pccc, PuncturePattern::V0, Rate::new(1, 2), 16).unwrap();
        assert_eq!(plan.indices(), (0..16).collect::<Vec<_>>().as_slice());
        let more = make_puncture_plan(Mode::Pccc, PuncturePattern::V0, Rate::new(2, 3), 16).unwrap();
        assert_eq!(more.len(), 24);
        assert!(more.indices().iter().all(|&i| i < 32));
    }

    #[test]
    fn serial_plans() {
        let plan = make_puncture_plan(Mode::DaR13, PuncturePattern::Parity, Rate::new(1, 2), 16).unwrap();
        assert_eq!(plan.indices(), (32..48).collect::<Vec<_>>().as_slice());
        let plan = make_puncture_plan(Mode::DaR12, PuncturePattern::Parity, Rate::new(2, 3), 16).unwrap();
        assert_eq!(plan.len(), 8);
        assert!(plan.indices().iter().all(|&i| (17..32).contains(&i)));
    }

    #[test]
    fn unreachable_rates() {
        assert!(make_puncture_plan(Mode::DaR12, PuncturePattern::Parity, Rate::new(1, 3), 16).is_err());
        assert!(make_puncture_plan(Mode::Pccc, PuncturePattern::Parity, Rate::new(1, 1), 16).is_err());
        assert!(make_puncture_plan(Mode::Pccc, PuncturePattern::Parity, Rate::new(3, 7), 16).is_err());
        assert!(make_puncture_plan(Mode::Pccc, PuncturePattern::V0, Rate::new(2, 5), 16).is_err());
    }

    #[test]
    fn rate_bookkeeping_is_exact() {
        for (num, den) in [(1u32, 2u32), (2, 3), (1, 3)] {
            let plan =
                make_puncture_plan(Mode::Pccc, PuncturePattern::Parity, Rate::new(num, den), 16).unwrap();
            assert_eq!(Rate::new(16, (48 - plan.len()) as u32), Rate::new(num, den));
        }
    }
}
