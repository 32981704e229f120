//! Monte Carlo codeword error rate estimation.
//!
//! Frame `f` at Eb/N0 `e` draws its message and noise from a ChaCha8 stream
//! keyed by `(seed, e)` with stream number `f`, so results do not depend on
//! batching, thread count or interruption.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::channel::{modulate_and_transmit, ChannelModel};
use crate::bp::{BpConfig, BpDecoder, TannerGraph};
use crate::construction::{CodeConfig, CodeSpec};
use crate::encoder::encode;
use crate::error::{Error, Result};
use crate::galois::FieldElement;
use crate::turbo::{TurboConfig, TurboDecoder};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderKind {
    Bp,
    Turbo,
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecoderKind::Bp => "bp",
            DecoderKind::Turbo => "turbo",
        })
    }
}

impl FromStr for DecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<DecoderKind> {
        match s {
            "bp" => Ok(DecoderKind::Bp),
            "turbo" => Ok(DecoderKind::Turbo),
            _ => Err(Error::Parse(format!("unknown decoder {s:?} (bp | turbo)"))),
        }
    }
}

/// A point ends at `target_errors` codeword errors or `max_frames` frames,
/// whichever comes first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopRule {
    pub target_errors: u64,
    pub max_frames: u64,
}

impl Default for StopRule {
    fn default() -> StopRule {
        StopRule {
            target_errors: 100,
            max_frames: 10_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub decoder: DecoderKind,
    pub max_iter: usize,
    pub stop: StopRule,
    pub seed: u64,
    /// Frames decoded in parallel between stop-rule checks.
    pub batch: usize,
    /// Progress file; an existing one with matching settings is resumed.
    pub checkpoint: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> RunOptions {
        RunOptions {
            decoder: DecoderKind::Bp,
            max_iter: 200,
            stop: StopRule::default(),
            seed: 0,
            batch: 256,
            checkpoint: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimRecord {
    pub ebno_db: f64,
    pub frames: u64,
    pub codeword_errors: u64,
    pub symbol_errors: u64,
    pub bit_errors: u64,
    pub avg_iterations: f64,
    pub decoder: DecoderKind,
    pub seed: u64,
    /// Seconds spent in this process; not part of the CSV.
    pub wall_time: f64,
    pub info_bits: usize,
}

impl SimRecord {
    pub fn cer(&self) -> f64 {
        self.codeword_errors as f64 / self.frames as f64
    }

    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / (self.frames as f64 * self.info_bits as f64)
    }
}

pub const CSV_HEADER: &str = "ebno_db,frames,cw_errors,cer,ber,avg_iters,decoder,seed";

pub fn csv_row(r: &SimRecord) -> String {
    format!(
        "{},{},{},{:.6e},{:.6e},{:.4},{},{}",
        r.ebno_db,
        r.frames,
        r.codeword_errors,
        r.cer(),
        r.ber(),
        r.avg_iterations,
        r.decoder,
        r.seed
    )
}

pub fn to_csv(records: &[SimRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&csv_row(r));
        out.push('\n');
    }
    out
}

/// Run description written next to the CSV: the resolved code plus every
/// setting that influences the numbers.
#[derive(Serialize)]
struct Manifest<'a> {
    run: RunManifest<'a>,
    code: &'a CodeConfig,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    version: &'a str,
    decoder: DecoderKind,
    max_iter: usize,
    seed: u64,
    ebno_db: &'a [f64],
    target_errors: u64,
    max_frames: u64,
    rate: f64,
    n_bits: usize,
    k_bits: usize,
}

pub fn manifest_toml(resolved: &CodeConfig, spec: &CodeSpec, ebno_db: &[f64], opts: &RunOptions) -> String {
    let m = Manifest {
        run: RunManifest {
            version: env!("CARGO_PKG_VERSION"),
            decoder: opts.decoder,
            max_iter: opts.max_iter,
            seed: opts.seed,
            ebno_db,
            target_errors: opts.stop.target_errors,
            max_frames: opts.stop.max_frames,
            rate: spec.rate(),
            n_bits: spec.transmitted_bits(),
            k_bits: spec.k_bits(),
        },
        code: resolved,
    };
    toml::to_string(&m).expect("manifest serializes")
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
struct PointState {
    ebno_db: f64,
    frames: u64,
    codeword_errors: u64,
    symbol_errors: u64,
    bit_errors: u64,
    iterations: u64,
    done: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Checkpoint {
    seed: u64,
    decoder: DecoderKind,
    max_iter: usize,
    stop: StopRule,
    points: Vec<PointState>,
}

impl Checkpoint {
    fn load(path: &Path) -> Result<Option<Checkpoint>> {
        match fs::read_to_string(path) {
            Ok(text) => toml::from_str(&text)
                .map(Some)
                .map_err(|e| Error::Parse(format!("checkpoint {}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    fn store(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, toml::to_string(self).expect("checkpoint serializes"))?;
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

/// Stream for frame `frame` at Eb/N0 `ebno_db`.
pub fn frame_rng(seed: u64, ebno_db: f64, frame: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&ebno_db.to_bits().to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(frame);
    rng
}

#[derive(Clone, Copy, Debug, Default)]
struct FrameResult {
    codeword_error: bool,
    symbol_errors: u64,
    bit_errors: u64,
    iterations: u64,
}

// One per worker thread, so the size difference is irrelevant.
#[allow(clippy::large_enum_variant)]
enum Decoder<'a> {
    Bp(BpDecoder<'a>),
    Turbo(TurboDecoder<'a>),
}

struct Worker<'a> {
    spec: &'a CodeSpec,
    decoder: Decoder<'a>,
}

impl<'a> Worker<'a> {
    fn new(spec: &'a CodeSpec, graph: &'a TannerGraph, opts: &RunOptions) -> Worker<'a> {
        let decoder = match opts.decoder {
            DecoderKind::Bp => Decoder::Bp(BpDecoder::new(
                graph,
                spec.field(),
                BpConfig {
                    max_iter: opts.max_iter,
                    ..BpConfig::default()
                },
            )),
            DecoderKind::Turbo => Decoder::Turbo(TurboDecoder::new(
                spec,
                TurboConfig {
                    max_iter: opts.max_iter,
                    ..TurboConfig::default()
                },
            )),
        };
        Worker { spec, decoder }
    }

    fn frame(&mut self, channel: &ChannelModel, rng: &mut ChaCha8Rng) -> Result<FrameResult> {
        let spec = self.spec;
        let q = spec.field().q();
        let u: Vec<FieldElement> = (0..spec.k())
            .map(|_| FieldElement(rng.random_range(0..q) as u8))
            .collect();
        let c = encode(spec, &u)?;
        let obs = modulate_and_transmit(spec, &c, channel, rng)?;
        let (decided, iterations) = match &mut self.decoder {
            Decoder::Bp(d) => {
                let out = d.decode(&obs)?;
                (out.decision[spec.info_range()].to_vec(), out.iterations)
            }
            Decoder::Turbo(d) => {
                let out = d.decode(&obs)?;
                (out.message, out.diagnostics.iterations)
            }
        };
        let mut r = FrameResult {
            iterations: iterations as u64,
            ..FrameResult::default()
        };
        for (a, b) in decided.iter().zip(&u) {
            let diff = (a.0 ^ b.0).count_ones() as u64;
            r.bit_errors += diff;
            r.symbol_errors += u64::from(diff > 0);
        }
        r.codeword_error = r.symbol_errors > 0;
        Ok(r)
    }
}

fn record(state: &PointState, opts: &RunOptions, spec: &CodeSpec, wall_time: f64) -> SimRecord {
    SimRecord {
        ebno_db: state.ebno_db,
        frames: state.frames,
        codeword_errors: state.codeword_errors,
        symbol_errors: state.symbol_errors,
        bit_errors: state.bit_errors,
        avg_iterations: if state.frames == 0 {
            0.0
        } else {
            state.iterations as f64 / state.frames as f64
        },
        decoder: opts.decoder,
        seed: opts.seed,
        wall_time,
        info_bits: spec.k_bits(),
    }
}

pub fn run_curve(spec: &CodeSpec, ebno_db: &[f64], opts: &RunOptions) -> Result<Vec<SimRecord>> {
    run_curve_with(spec, ebno_db, opts, |_| Ok(()))
}

/// As [`run_curve`], calling `on_point` after every finished point.
pub fn run_curve_with(
    spec: &CodeSpec,
    ebno_db: &[f64],
    opts: &RunOptions,
    mut on_point: impl FnMut(&SimRecord) -> Result<()>,
) -> Result<Vec<SimRecord>> {
    if opts.batch == 0 || opts.stop.max_frames == 0 {
        return Err(Error::InvalidSpec(
            "batch size and frame limit must be positive".into(),
        ));
    }
    let fresh = Checkpoint {
        seed: opts.seed,
        decoder: opts.decoder,
        max_iter: opts.max_iter,
        stop: opts.stop,
        points: ebno_db
            .iter()
            .map(|&e| PointState {
                ebno_db: e,
                ..PointState::default()
            })
            .collect(),
    };
    let mut ckpt = match &opts.checkpoint {
        Some(path) => match Checkpoint::load(path)? {
            Some(old)
                if old.seed == fresh.seed
                    && old.decoder == fresh.decoder
                    && old.max_iter == fresh.max_iter
                    && old.stop == fresh.stop
                    && old.points.iter().map(|p| p.ebno_db).eq(ebno_db.iter().copied()) =>
            {
                old
            }
            _ => fresh,
        },
        None => fresh,
    };
    let graph = TannerGraph::from_matrix(&spec.parity_check());
    let mut records = Vec::with_capacity(ebno_db.len());
    for idx in 0..ckpt.points.len() {
        let started = Instant::now();
        let channel = ChannelModel::for_spec(spec, ckpt.points[idx].ebno_db)?;
        while !ckpt.points[idx].done {
            let state = &ckpt.points[idx];
            let start = state.frames;
            let end = (start + opts.batch as u64).min(opts.stop.max_frames);
            let results: Vec<FrameResult> = (start..end)
                .into_par_iter()
                .map_init(
                    || Worker::new(spec, &graph, opts),
                    |w, f| w.frame(&channel, &mut frame_rng(opts.seed, state.ebno_db, f)),
                )
                .collect::<Result<_>>()?;
            let state = &mut ckpt.points[idx];
            for r in results {
                state.frames += 1;
                state.codeword_errors += u64::from(r.codeword_error);
                state.symbol_errors += r.symbol_errors;
                state.bit_errors += r.bit_errors;
                state.iterations += r.iterations;
                if state.codeword_errors >= opts.stop.target_errors || state.frames >= opts.stop.max_frames {
                    state.done = true;
                    break;
                }
            }
            if let Some(path) = &opts.checkpoint {
                ckpt.store(path)?;
            }
        }
        let rec = record(&ckpt.points[idx], opts, spec, started.elapsed().as_secs_f64());
        on_point(&rec)?;
        records.push(rec);
    }
    Ok(records)
}

/// Parses `start:step:stop` (inclusive) or a comma-separated list.
pub fn parse_ebno_list(text: &str) -> Result<Vec<f64>> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("bad Eb/N0 value {s:?}")))
    };
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [a, step, b] => {
            let (a, step, b) = (num(a)?, num(step)?, num(b)?);
            if step <= 0.0 || b < a {
                return Err(Error::Parse(format!("bad Eb/N0 range {text:?}")));
            }
            let count = ((b - a) / step + 1e-9).floor() as usize + 1;
            // Round to the step's grid so printed values stay short.
            Ok((0..count)
                .map(|i| ((a + i as f64 * step) * 1e9).round() / 1e9)
                .collect())
        }
        [_] => text.split(',').map(num).collect(),
        _ => Err(Error::Parse(format!("bad Eb/N0 range {text:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galois::Field;
    use crate::interleaver::relative_prime_interleaver;

    fn petersen() -> CodeSpec {
        let f = Field::with_default_poly(2).unwrap();
        CodeSpec::random(
            f,
            crate::construction::Mode::Pccc,
            relative_prime_interleaver(5, 1, 2).unwrap(),
            3,
        )
        .unwrap()
    }

    #[test]
    fn ebno_ranges() {
        assert_eq!(
            parse_ebno_list("0:0.5:3").unwrap(),
            vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]
        );
        assert_eq!(parse_ebno_list("1,2.5").unwrap(), vec![1.0, 2.5]);
        assert!(parse_ebno_list("1:0:2").is_err());
    }

    #[test]
    fn hopeless_channel_fails_every_frame() {
        let opts = RunOptions {
            stop: StopRule {
                target_errors: 50,
                max_frames: 1000,
            },
            ..RunOptions::default()
        };
        let r = run_curve(&petersen(), &[-10.0], &opts).unwrap();
        // CER near one: 50 errors within a handful of extra frames.
        assert_eq!(r[0].codeword_errors, 50);
        assert!(r[0].frames < 80, "{}", r[0].frames);
    }

    #[test]
    fn batching_does_not_change_results() {
        let spec = petersen();
        let mut opts = RunOptions {
            decoder: DecoderKind::Turbo,
            seed: 9,
            stop: StopRule {
                target_errors: 20,
                max_frames: 3000,
            },
            ..RunOptions::default()
        };
        let a = run_curve(&spec, &[2.0, 4.0], &opts).unwrap();
        opts.batch = 7;
        let b = run_curve(&spec, &[2.0, 4.0], &opts).unwrap();
        assert_eq!(to_csv(&a), to_csv(&b));
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.ckpt");
        let spec = petersen();
        let mut opts = RunOptions {
            seed: 4,
            batch: 16,
            stop: StopRule {
                target_errors: 30,
                max_frames: 400,
            },
            ..RunOptions::default()
        };
        let full = run_curve(&spec, &[3.0], &opts).unwrap();
        // An interrupted run leaves a partial point behind.
        opts.checkpoint = Some(path.clone());
        opts.stop.max_frames = 64;
        run_curve(&spec, &[3.0], &opts).unwrap();
        let mut ckpt = Checkpoint::load(&path).unwrap().unwrap();
        ckpt.stop.max_frames = 400;
        ckpt.points[0].done = false;
        ckpt.store(&path).unwrap();
        opts.stop.max_frames = 400;
        let resumed = run_curve(&spec, &[3.0], &opts).unwrap();
        assert_eq!(to_csv(&full), to_csv(&resumed));
    }

    #[test]
    fn error_count_consistent_with_frames() {
        let opts = RunOptions {
            seed: 1,
            stop: StopRule {
                target_errors: 100,
                max_frames: 1_000_000,
            },
            ..RunOptions::default()
        };
        let spec = petersen();
        let r = &run_curve(&spec, &[4.0], &opts).unwrap()[0];
        assert_eq!(r.codeword_errors, 100);
        // An independent estimate of the CER from fresh frames must agree
        // with 100 / frames to within the binomial spread of both.
        let long = RunOptions {
            seed: 2,
            stop: StopRule {
                target_errors: u64::MAX,
                max_frames: 20_000,
            },
            ..opts.clone()
        };
        let p = run_curve(&spec, &[4.0], &long).unwrap()[0].cer();
        let expected = 100.0 / p;
        // Frames to the 100th error: negative binomial, sd = sqrt(100 (1-p)) / p.
        let sd = (100.0 * (1.0 - p)).sqrt() / p;
        let tol = 4.0 * sd + 4.0 * expected * (p * (1.0 - p) / 20_000.0).sqrt() / p;
        assert!(
            (r.frames as f64 - expected).abs() < tol,
            "{} vs {expected}",
            r.frames
        );
    }
}
