use std::fs;
use std::process::{Command, Output};

fn gfturbo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gfturbo"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const PETERSEN: &str = "field_m = 2\nK = 5\nmode = \"pccc\"\nseed = 1\n\n[interleaver]\nkind = \"relative-prime\"\na = 1\np = 2\n";

#[test]
fn simulate_writes_one_row_per_point_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("petersen.cfg");
    fs::write(&cfg, PETERSEN).unwrap();
    let mut csv = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("run{run}.csv"));
        let o = gfturbo(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--ebno",
            "0:0.5:3",
            "--max-frames",
            "300",
            "--target-errors",
            "20",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        csv.push(fs::read_to_string(&out).unwrap());
        let manifest = fs::read_to_string(out.with_extension("manifest.toml")).unwrap();
        assert!(manifest.contains("mapping = [") && manifest.contains("[run]"));
    }
    let lines: Vec<&str> = csv[0].lines().collect();
    assert_eq!(
        lines[0],
        "ebno_db,frames,cw_errors,cer,ber,avg_iters,decoder,seed"
    );
    assert_eq!(lines.len(), 8);
    assert_eq!(csv[0], csv[1]);
}

#[test]
fn bounds_report_crossings() {
    let o = gfturbo(&["bounds", "--n", "384", "--k", "128", "--cer", "1e-4"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let crossing = |name: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(name)).unwrap();
        line.split(',').nth(1).unwrap().parse().unwrap()
    };
    let (r, s) = (crossing("rcb"), crossing("spb"));
    assert!(s < r && (0.0..2.0).contains(&r), "{text}");
}

#[test]
fn spec_gen_derives_symbol_count() {
    let o = gfturbo(&[
        "spec-gen", "--k-bits", "128", "--m", "8", "--mode", "pccc", "--seed", "7",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "K = 16"), "{text}");
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gen.toml");
    fs::write(&cfg, &text).unwrap();
    let g = gfturbo(&["graph", "--config", cfg.to_str().unwrap()]);
    assert!(g.status.success());
    assert!(stdout(&g).contains("H 32 x 48"));
}

#[test]
fn graph_reports_petersen() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("petersen.cfg");
    fs::write(&cfg, PETERSEN).unwrap();
    let alist = dir.path().join("h.alist");
    let o = gfturbo(&[
        "graph",
        "--config",
        cfg.to_str().unwrap(),
        "--alist",
        alist.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("cycle graph vertices 10  edges 15"));
    assert!(text.contains("girth 5  tanner girth 10"));
    assert!(fs::read_to_string(alist).unwrap().lines().count() > 4);
}

#[test]
fn encode_then_decode_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("petersen.cfg");
    fs::write(&cfg, PETERSEN).unwrap();
    let o = gfturbo(&[
        "encode",
        "--config",
        cfg.to_str().unwrap(),
        "--message",
        "1,3,0,2,2",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let cw: Vec<usize> = text.lines().next().unwrap()["codeword ".len()..]
        .split(',')
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(cw.len(), 15);
    // Soft observations leaning towards the codeword, with one symbol erased.
    let lines: Vec<String> = cw
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            (0..4)
                .map(|w| {
                    if i == 4 {
                        "0.25"
                    } else if w == c {
                        "0.7"
                    } else {
                        "0.1"
                    }
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    let input = dir.path().join("frame.txt");
    fs::write(&input, lines.join("\n")).unwrap();
    for decoder in ["bp", "turbo"] {
        let d = gfturbo(&[
            "decode",
            "--config",
            cfg.to_str().unwrap(),
            "--input",
            input.to_str().unwrap(),
            "--decoder",
            decoder,
        ]);
        assert!(d.status.success(), "{}", String::from_utf8_lossy(&d.stderr));
        assert!(
            stdout(&d).starts_with("message 1,3,0,2,2\n"),
            "{decoder}: {}",
            stdout(&d)
        );
    }
}

#[test]
fn config_errors_exit_with_two_and_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(
        &cfg,
        "field_m = 2\nK = 5\nmode = \"pccc\"\nseed = 1\nbogus = 3\n[interleaver]\nkind = \"spread\"\n",
    )
    .unwrap();
    let o = gfturbo(&["graph", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 5"));
    fs::write(&cfg, "field_m = 2\nK = 5\nmode = \"pccc\"\nseed = 1\n[interleaver]\nkind = \"relative-prime\"\na = 1\np = 5\n").unwrap();
    let o = gfturbo(&["graph", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        String::from_utf8_lossy(&o.stderr).contains("line "),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn unreachable_bounds_exit_with_three() {
    let o = gfturbo(&["bounds", "--n", "384", "--k", "128", "--cer", "1e-300"]);
    assert_eq!(o.status.code(), Some(3));
}
