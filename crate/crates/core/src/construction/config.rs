//! TOML code description.
//!
//! ```toml
//! field_m = 8
//! prim_poly = 0x11D        # optional, defaults per m
//! K = 16
//! mode = "pccc"            # pccc | da-r12 | da-r13
//! seed = 7                 # coefficients, interleaver and MR multipliers
//! mr_factor = 1            # optional
//!
//! [interleaver]
//! kind = "girth-aware"     # relative-prime | spread | girth-aware | explicit
//! trials = 256             # girth-aware
//! # a = 1, p = 2           # relative-prime
//! # s_target = 4           # spread
//! # seed = 11              # spread / girth-aware, defaults to the top-level seed
//! # mapping = [1, 3, 0, 2, 4]  # explicit
//!
//! [coefficients]           # optional, drawn from `seed` when absent
//! g1 = [1, 2, 3, 1, 2]
//! f1 = [2, 2, 1, 3, 1]
//! g2 = [3, 3, 2, 1, 1]
//! f2 = [1, 2, 2, 2, 3]
//!
//! [puncture]               # optional
//! target_rate = "1/2"
//! pattern = "parity"       # parity | v0
//! ```

use serde::{Deserialize, Serialize};

use super::{make_puncture_plan, CodeSpec, Coefficients, Mode, MrPlan, PuncturePattern, Rate};
use crate::error::{Error, Result};
use crate::galois::{default_primitive_poly, Field, FieldElement};
use crate::interleaver::{
    girth_aware_interleaver, relative_prime_interleaver, spread_interleaver, Interleaver, InterleaverKind,
};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeConfig {
    pub field_m: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prim_poly: Option<u32>,
    #[serde(rename = "K")]
    pub k: usize,
    pub mode: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub mr_factor: usize,
    pub interleaver: InterleaverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<CoefficientConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub puncture: Option<PunctureConfig>,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterleaverConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_target: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientConfig {
    pub g1: Vec<u32>,
    pub f1: Vec<u32>,
    pub g2: Vec<u32>,
    pub f2: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PunctureConfig {
    pub target_rate: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
}

const DEFAULT_GIRTH_TRIALS: usize = 256;
const DEFAULT_SPREAD: usize = 4;
const MR_SEED_SALT: u64 = 0x4d52;

/// 1-based line of the first `key = ...` assignment, optionally inside
/// `[table]`; 1 when the key is absent.
fn key_line(text: &str, table: Option<&str>, key: &str) -> usize {
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = Some(name.trim().to_string());
            if table == Some(name.trim()) && key.is_empty() {
                return i + 1;
            }
            continue;
        }
        let in_scope = match table {
            None => current.is_none(),
            Some(t) => current.as_deref() == Some(t),
        };
        if in_scope {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return i + 1;
                }
            }
        }
    }
    1
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl CodeConfig {
    pub fn from_toml(text: &str) -> Result<CodeConfig> {
        toml::from_str(text).map_err(|e| Error::Config {
            line: e.span().map(|s| line_of_offset(text, s.start)).unwrap_or(1),
            msg: e.message().trim().to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Parses and builds in one step, reporting semantic errors at the line
    /// of the offending key.
    pub fn parse_spec(text: &str) -> Result<CodeSpec> {
        let cfg = CodeConfig::from_toml(text)?;
        cfg.build().map_err(|(table, key, e)| Error::Config {
            line: key_line(text, table, key),
            msg: e.to_string(),
        })
    }

    pub fn build_spec(&self) -> Result<CodeSpec> {
        self.build().map_err(|(_, _, e)| e)
    }

    /// On failure returns the `(table, key)` responsible along with the error.
    fn build(&self) -> std::result::Result<CodeSpec, (Option<&'static str>, &'static str, Error)> {
        let top = |key: &'static str| move |e: Error| (None, key, e);
        let il = |key: &'static str| move |e: Error| (Some("interleaver"), key, e);
        let field = match self.prim_poly {
            Some(p) => Field::new(self.field_m, p).map_err(top("prim_poly"))?,
            None => Field::with_default_poly(self.field_m).map_err(top("field_m"))?,
        };
        let mode: Mode = self.mode.parse().map_err(top("mode"))?;
        let k = self.k;
        if k < 2 {
            return Err(top("K")(Error::InvalidSpec("K must be at least 2".into())));
        }
        let ic = &self.interleaver;
        let il_seed = ic.seed.unwrap_or(self.seed);
        let interleaver = match ic.kind.as_str() {
            "relative-prime" | "relative_prime" => relative_prime_interleaver(
                k,
                ic.a.unwrap_or(0),
                ic.p.ok_or_else(|| il("kind")(Error::InvalidSpec("relative-prime needs p".into())))?,
            )
            .map_err(il("p"))?,
            "spread" => spread_interleaver(k, il_seed, ic.s_target.unwrap_or(DEFAULT_SPREAD)),
            "girth-aware" | "girth_aware" => {
                girth_aware_interleaver(k, il_seed, ic.trials.unwrap_or(DEFAULT_GIRTH_TRIALS))
                    .map_err(il("trials"))?
            }
            "explicit" => {
                let m = ic.mapping.clone().ok_or_else(|| {
                    il("kind")(Error::InvalidSpec("explicit interleaver needs mapping".into()))
                })?;
                if m.len() != k {
                    return Err(il("mapping")(Error::LengthMismatch {
                        expected: k,
                        got: m.len(),
                    }));
                }
                Interleaver::from_mapping(m).map_err(il("mapping"))?
            }
            other => {
                return Err(il("kind")(Error::InvalidSpec(format!(
                    "unknown interleaver kind {other:?}"
                ))))
            }
        };
        let spec = match &self.coefficients {
            None => CodeSpec::random(field, mode, interleaver, self.seed).map_err(top("seed"))?,
            Some(c) => {
                let conv = |v: &[u32]| -> Result<Vec<FieldElement>> {
                    v.iter().map(|&x| field.element(x)).collect()
                };
                let co = |key| move |e| (Some("coefficients"), key, e);
                let coefficients = Coefficients {
                    g1: conv(&c.g1).map_err(co("g1"))?,
                    f1: conv(&c.f1).map_err(co("f1"))?,
                    g2: conv(&c.g2).map_err(co("g2"))?,
                    f2: conv(&c.f2).map_err(co("f2"))?,
                };
                CodeSpec::new(field.clone(), mode, coefficients, interleaver)
                    .map_err(|e| (Some("coefficients"), "", e))?
            }
        };
        let spec = match &self.puncture {
            None => spec,
            Some(p) => {
                let pu = |key| move |e| (Some("puncture"), key, e);
                let rate: Rate = p.target_rate.parse().map_err(pu("target_rate"))?;
                let pattern: PuncturePattern = match &p.pattern {
                    Some(s) => s.parse().map_err(pu("pattern"))?,
                    None => PuncturePattern::default(),
                };
                let plan = make_puncture_plan(mode, pattern, rate, k).map_err(pu("target_rate"))?;
                spec.with_puncture(plan).map_err(pu("target_rate"))?
            }
        };
        if self.mr_factor > 1 {
            let n = spec.n();
            let plan = MrPlan::random(spec.field(), n, self.mr_factor, self.seed ^ MR_SEED_SALT)
                .map_err(top("mr_factor"))?;
            spec.with_mr(plan).map_err(top("mr_factor"))
        } else if self.mr_factor == 0 {
            Err(top("mr_factor")(Error::InvalidSpec(
                "mr_factor must be >= 1".into(),
            )))
        } else {
            Ok(spec)
        }
    }

    /// Fully resolved form of this config: explicit mapping and coefficients,
    /// so the result rebuilds the same spec without any search.
    pub fn resolved(&self) -> Result<CodeConfig> {
        let spec = self.build_spec()?;
        let mut out = CodeConfig::from_spec(&spec, self.seed);
        out.mr_factor = self.mr_factor;
        out.puncture = self.puncture.clone();
        Ok(out)
    }

    /// Explicit description of `spec`. Puncturing and repetition are not
    /// recoverable from a plan and are left unset.
    pub fn from_spec(spec: &CodeSpec, seed: u64) -> CodeConfig {
        let field = spec.field();
        let c = spec.coefficients();
        let raw = |v: &[FieldElement]| v.iter().map(|x| x.0 as u32).collect();
        CodeConfig {
            field_m: field.m(),
            prim_poly: (default_primitive_poly(field.m()) != Some(field.prim_poly()))
                .then_some(field.prim_poly()),
            k: spec.k(),
            mode: spec.mode().to_string(),
            seed,
            mr_factor: 1,
            interleaver: InterleaverConfig {
                kind: "explicit".into(),
                a: None,
                p: None,
                seed: None,
                s_target: None,
                trials: None,
                mapping: Some(spec.interleaver().mapping().to_vec()),
            },
            coefficients: Some(CoefficientConfig {
                g1: raw(&c.g1),
                f1: raw(&c.f1),
                g2: raw(&c.g2),
                f2: raw(&c.f2),
            }),
            puncture: None,
        }
    }
}

/// Short human-readable label for an interleaver's origin.
pub fn describe_interleaver(kind: &InterleaverKind) -> String {
    match kind {
        InterleaverKind::RelativePrime { a, p } => format!("relative-prime a={a} p={p}"),
        InterleaverKind::Spread {
            seed,
            s_target,
            achieved,
        } => format!("spread seed={seed} s_target={s_target} achieved={achieved}"),
        InterleaverKind::GirthAware { seed, trials } => {
            format!("girth-aware seed={seed} trials={trials}")
        }
        InterleaverKind::Explicit => "explicit".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PETERSEN: &str = r#"
field_m = 2
K = 5
mode = "pccc"
seed = 3

[interleaver]
kind = "relative-prime"
a = 1
p = 2
"#;

    #[test]
    fn petersen_config_builds() {
        let spec = CodeConfig::parse_spec(PETERSEN).unwrap();
        assert_eq!(spec.k(), 5);
        assert_eq!(spec.field().q(), 4);
        assert_eq!(spec.interleaver().mapping(), &[1, 3, 0, 2, 4]);
    }

    #[test]
    fn resolved_round_trip() {
        let cfg = CodeConfig::from_toml(PETERSEN).unwrap();
        let resolved = cfg.resolved().unwrap();
        let text = resolved.to_toml();
        let again = CodeConfig::from_toml(&text).unwrap();
        assert_eq!(again, resolved);
        let (a, b) = (again.build_spec().unwrap(), cfg.build_spec().unwrap());
        assert_eq!(a.interleaver().mapping(), b.interleaver().mapping());
        assert_eq!(a.coefficients(), b.coefficients());
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = "field_m = 2\nK = 5\nmode = \"pccc\"\nbogus = 1\n[interleaver]\nkind = \"spread\"\n";
        match CodeConfig::from_toml(text) {
            Err(Error::Config { line, msg }) => {
                assert_eq!(line, 4, "{msg}");
                assert!(msg.contains("bogus"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_error_reports_key_line() {
        let text = PETERSEN.replace("p = 2", "p = 5");
        match CodeConfig::parse_spec(&text) {
            Err(Error::Config { line, .. }) => {
                assert_eq!(text.lines().nth(line - 1).unwrap().trim(), "p = 5");
            }
            other => panic!("{other:?}"),
        }
        let text = PETERSEN.replace("\"pccc\"", "\"ldpc\"");
        assert!(matches!(
            CodeConfig::parse_spec(&text),
            Err(Error::Config { line: 4, .. })
        ));
    }

    #[test]
    fn puncture_and_mr() {
        let text = format!("{PETERSEN}\n[puncture]\ntarget_rate = \"1/2\"\npattern = \"v0\"\n")
            .replace("seed = 3", "seed = 3\nmr_factor = 1");
        let spec = CodeConfig::parse_spec(&text).unwrap();
        assert_eq!(spec.rate_fraction(), Rate::new(1, 2));
        let text = PETERSEN.replace("seed = 3", "seed = 3\nmr_factor = 2");
        let spec = CodeConfig::parse_spec(&text).unwrap();
        assert_eq!(spec.rate_fraction(), Rate::new(1, 6));
    }

    #[test]
    fn explicit_coefficients() {
        let text = r#"
field_m = 2
K = 3
mode = "da-r12"
[interleaver]
kind = "explicit"
mapping = [2, 0, 1]
[coefficients]
g1 = [1, 2, 3]
f1 = [2, 1, 1]
g2 = [1, 1, 1]
f2 = [3, 1, 1]
"#;
        let spec = CodeConfig::parse_spec(text).unwrap();
        assert_eq!(spec.coefficients().f1[0], FieldElement(2));
        let bad = text.replace("f2 = [3, 1, 1]", "f2 = [0, 1, 1]");
        assert!(matches!(CodeConfig::parse_spec(&bad), Err(Error::Config { .. })));
    }
}
