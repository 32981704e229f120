use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gfturbo::bp::TannerGraph;
use gfturbo::bp::{BpConfig, BpDecoder};
use gfturbo::construction::{CodeConfig, CodeSpec, InterleaverConfig, PunctureConfig};
use gfturbo::encoder::encode;
use gfturbo::galois::FieldElement;
use gfturbo::graph::build_cycle_graph;
use gfturbo::pmf::Pmf;
use gfturbo::sim::harness::{csv_row, manifest_toml, parse_ebno_list, run_curve_with, to_csv, CSV_HEADER};
use gfturbo::sim::{bound_crossing, rcb, spb, Bound, DecoderKind, RunOptions, StopRule};
use gfturbo::turbo::{TurboConfig, TurboDecoder};
use gfturbo::Error;

#[derive(Parser)]
#[command(name = "gfturbo", version, about = "Non-binary turbo codes over GF(2^m)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo CER/BER curve over AWGN.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// `start:step:stop` in dB, inclusive, or a comma-separated list.
        #[arg(long)]
        ebno: String,
        #[arg(long, default_value = "bp")]
        decoder: String,
        /// Defaults to the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
        #[arg(long, default_value_t = 100)]
        target_errors: u64,
        #[arg(long, default_value_t = 10_000_000)]
        max_frames: u64,
        #[arg(long, default_value_t = 256)]
        batch: usize,
        /// CSV output; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Defaults to `<out>.manifest.toml`.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Progress file for interruption-safe runs.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Random coding and sphere packing bounds for an (n, k) binary code.
    Bounds {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        /// Report the Eb/N0 at which each bound crosses this probability.
        #[arg(long)]
        cer: Option<f64>,
        /// Tabulate both bounds over this Eb/N0 range.
        #[arg(long)]
        ebno: Option<String>,
    },
    /// Parity-check matrix and cycle-graph statistics.
    Graph {
        #[arg(long)]
        config: PathBuf,
        /// Also write the parity-check matrix in alist format.
        #[arg(long)]
        alist: Option<PathBuf>,
        /// Also write the cycle graph as an edge list.
        #[arg(long)]
        edges: Option<PathBuf>,
    },
    /// Encode one message given as comma-separated symbols.
    Encode {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        message: String,
    },
    /// Decode one frame of channel p.m.f.s, one codeword symbol per line.
    Decode {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "bp")]
        decoder: String,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
    },
    /// Generate a fully resolved code description.
    SpecGen {
        #[arg(long)]
        k_bits: usize,
        #[arg(long)]
        m: u32,
        #[arg(long, default_value = "pccc")]
        mode: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "girth-aware")]
        interleaver: String,
        #[arg(long)]
        rate: Option<String>,
        #[arg(long, default_value_t = 1)]
        mr: usize,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numeric(_) | Error::Underflow | Error::SingularTailBiting | Error::DivisionByZero => 3,
        _ => 2,
    }
}

fn load(path: &Path) -> Result<(CodeConfig, CodeSpec), Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let cfg = CodeConfig::from_toml(&text)?;
    let spec = CodeConfig::parse_spec(&text)?;
    Ok((cfg, spec))
}

fn parse_symbols(text: &str, q: usize) -> Result<Vec<FieldElement>, Error> {
    text.split(',')
        .map(|s| {
            let v: usize = s
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad symbol {s:?}")))?;
            if v >= q {
                return Err(Error::ElementOutOfRange { value: v as u32, q });
            }
            Ok(FieldElement(v as u8))
        })
        .collect()
}

fn join(v: &[FieldElement]) -> String {
    v.iter().map(|x| x.0.to_string()).collect::<Vec<_>>().join(",")
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate {
            config,
            ebno,
            decoder,
            seed,
            max_iter,
            target_errors,
            max_frames,
            batch,
            out,
            manifest,
            checkpoint,
        } => {
            let (cfg, spec) = load(&config)?;
            let ebno = parse_ebno_list(&ebno)?;
            let opts = RunOptions {
                decoder: decoder.parse()?,
                max_iter,
                stop: StopRule {
                    target_errors,
                    max_frames,
                },
                seed: seed.unwrap_or(cfg.seed),
                batch,
                checkpoint,
            };
            let manifest = manifest.or_else(|| out.as_ref().map(|o| o.with_extension("manifest.toml")));
            if let Some(m) = &manifest {
                write(m, &manifest_toml(&cfg.resolved()?, &spec, &ebno, &opts))?;
            }
            if out.is_none() {
                println!("{CSV_HEADER}");
            }
            let mut done = Vec::new();
            let records = run_curve_with(&spec, &ebno, &opts, |r| {
                done.push(r.clone());
                match &out {
                    Some(path) => write(path, &to_csv(&done)),
                    None => {
                        println!("{}", csv_row(r));
                        Ok(())
                    }
                }
            })?;
            for r in &records {
                eprintln!(
                    "Eb/N0 {:>6} dB  frames {:>9}  errors {:>5}  CER {:.3e}  {:.1} s",
                    r.ebno_db,
                    r.frames,
                    r.codeword_errors,
                    r.cer(),
                    r.wall_time
                );
            }
        }
        Command::Bounds { n, k, cer, ebno } => {
            if cer.is_none() && ebno.is_none() {
                return Err(Error::Parse("bounds needs --cer or --ebno".into()));
            }
            if let Some(target) = cer {
                println!("bound,ebno_db_at_{target:e}");
                for b in [Bound::Rcb, Bound::Spb] {
                    println!("{},{:.4}", b.name(), bound_crossing(b, n, k, target)?);
                }
            }
            if let Some(range) = ebno {
                println!("ebno_db,rcb,spb");
                for e in parse_ebno_list(&range)? {
                    println!("{e},{:.6e},{:.6e}", rcb(n, k, e)?, spb(n, k, e)?);
                }
            }
        }
        Command::Graph { config, alist, edges } => {
            let (_, spec) = load(&config)?;
            let h = spec.parity_check();
            let tanner = TannerGraph::from_matrix(&h);
            println!("mode {}", spec.mode());
            println!(
                "field GF({}) poly {:#x}",
                spec.field().q(),
                spec.field().prim_poly()
            );
            println!("K {}  n {}  rate {}", spec.k(), spec.n(), spec.rate_fraction());
            println!(
                "H {} x {}  nnz {}  rank {}",
                h.rows(),
                h.cols(),
                h.nnz(),
                h.rank(spec.field())
            );
            println!("tanner edges {}", tanner.n_edges());
            match build_cycle_graph(&h) {
                Ok(g) => {
                    println!("cycle graph vertices {}  edges {}", g.n_vertices(), g.n_edges());
                    match g.regular_degree() {
                        Some(d) => println!("regular degree {d}"),
                        None => println!("degrees {:?}", g.degrees()),
                    }
                    match (g.girth(), g.tanner_girth()) {
                        (Some(a), Some(b)) => println!("girth {a}  tanner girth {b}"),
                        _ => println!("girth infinite (acyclic)"),
                    }
                    if let Some(path) = edges {
                        write(&path, &g.to_text())?;
                    }
                }
                Err(e) => println!("no cycle graph: {e}"),
            }
            if let Some(path) = alist {
                write(&path, &h.to_alist(spec.field()))?;
            }
        }
        Command::Encode { config, message } => {
            let (_, spec) = load(&config)?;
            let u = parse_symbols(&message, spec.field().q())?;
            let c = encode(&spec, &u)?;
            println!("codeword {}", join(&c));
            let sent: Vec<FieldElement> = spec.transmitted_positions().iter().map(|&i| c[i]).collect();
            println!("transmitted {}", join(&sent));
        }
        Command::Decode {
            config,
            input,
            decoder,
            max_iter,
        } => {
            let (_, spec) = load(&config)?;
            let q = spec.field().q();
            let text =
                fs::read_to_string(&input).map_err(|e| Error::Io(format!("{}: {e}", input.display())))?;
            let channel: Vec<Pmf> = text
                .lines()
                .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
                .map(|l| {
                    let v: Vec<f64> = l
                        .split(|c: char| c.is_whitespace() || c == ',')
                        .filter(|s| !s.is_empty())
                        .map(|s| {
                            s.parse()
                                .map_err(|_| Error::Parse(format!("bad probability {s:?}")))
                        })
                        .collect::<Result<_, _>>()?;
                    if v.len() != q {
                        return Err(Error::LengthMismatch {
                            expected: q,
                            got: v.len(),
                        });
                    }
                    gfturbo::pmf::normalize(&Pmf::new(v)?)
                })
                .collect::<Result<_, _>>()?;
            let (message, iterations, converged) = match decoder.parse()? {
                DecoderKind::Bp => {
                    let graph = TannerGraph::from_matrix(&spec.parity_check());
                    let cfg = BpConfig {
                        max_iter,
                        ..BpConfig::default()
                    };
                    let out = BpDecoder::new(&graph, spec.field(), cfg).decode(&channel)?;
                    (
                        out.decision[spec.info_range()].to_vec(),
                        out.iterations,
                        out.converged,
                    )
                }
                DecoderKind::Turbo => {
                    let cfg = TurboConfig {
                        max_iter,
                        ..TurboConfig::default()
                    };
                    let out = TurboDecoder::new(&spec, cfg).decode(&channel)?;
                    (out.message, out.diagnostics.iterations, out.diagnostics.converged)
                }
            };
            println!("message {}", join(&message));
            println!("iterations {iterations}");
            println!("converged {converged}");
        }
        Command::SpecGen {
            k_bits,
            m,
            mode,
            seed,
            interleaver,
            rate,
            mr,
        } => {
            if m == 0 || k_bits % m as usize != 0 {
                return Err(Error::InvalidSpec(format!(
                    "{k_bits} bits is not a whole number of {m}-bit symbols"
                )));
            }
            let cfg = CodeConfig {
                field_m: m,
                prim_poly: None,
                k: k_bits / m as usize,
                mode,
                seed,
                mr_factor: mr,
                interleaver: InterleaverConfig {
                    kind: interleaver,
                    a: None,
                    p: None,
                    seed: None,
                    s_target: None,
                    trials: None,
                    mapping: None,
                },
                coefficients: None,
                puncture: rate.map(|r| PunctureConfig {
                    target_rate: r,
                    pattern: None,
                }),
            };
            print!("{}", cfg.resolved()?.to_toml());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
