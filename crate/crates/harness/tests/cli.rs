use std::path::Path;
use std::process::{Command, Output};

use invspec_core::spectra::load_dataset;

const BIN: &str = env!("CARGO_BIN_EXE_invspec");

const SQUARE: &str = r#"
seed = 5

[domain]
dim = 2
extent = [1.0, 1.0]
res = [10, 10]

[potential1]
kind = "gaussian_bump"
amplitude = 5.0
center = [0.5, 0.5]
width = 0.15

[potential2]
kind = "zero"

[isozaki]
xi = [[0.0, 0.0], [6.283185307179586, 0.0]]
tau = [4.0, 8.0]
route = "series"
fgrid_m = 1

[verify]
decay_taus = [2.0, 4.0, 8.0]
forcings = 4
"#;

fn run(config: &str, args: &[&str], dir: &Path) -> Output {
    let path = dir.join("run.toml");
    std::fs::write(&path, config).unwrap();
    Command::new(BIN)
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn forward_matches_closed_form_in_one_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
[domain]
dim = 1
extent = [1.0]
res = [15]

[potential1]
kind = "zero"

[potential2]
kind = "constant"
value = 2.5
"#;
    let out = run(cfg, &["forward"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let ds = load_dataset(dir.path().join("out/dataset1.bsd")).unwrap();
    let shifted = load_dataset(dir.path().join("out/dataset2.bsd")).unwrap();
    assert_eq!(ds.len(), 15);
    for k in 1..=15 {
        let s = (k as f64 * std::f64::consts::PI / 32.0).sin();
        let exact = 4.0 * 256.0 * s * s;
        assert!((ds.eigenvalues()[k - 1] - exact).abs() < 1e-10 * exact);
        assert!((shifted.eigenvalues()[k - 1] - exact - 2.5).abs() < 1e-10 * exact);
    }
}

#[test]
fn reruns_are_bitwise_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for cmd in ["forward", "reconstruct", "sweep"] {
        assert_eq!(code(&run(SQUARE, &[cmd], a.path())), 0);
        assert_eq!(code(&run(SQUARE, &[cmd, "--threads", "2"], b.path())), 0);
    }
    for name in ["dataset1.bsd", "dataset2.bsd", "reconstruction.bsd", "samples.csv", "field.csv", "sweep_0.csv", "sweep_1.csv"] {
        let x = std::fs::read(a.path().join("out").join(name)).unwrap();
        let y = std::fs::read(b.path().join("out").join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
    let csv = std::fs::read_to_string(a.path().join("out/sweep_0.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "tau,re_s,im_s,re_oracle,im_oracle,abs_err,residual_diag");
}

#[test]
fn identical_potentials_reconstruct_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SQUARE.replace("[potential2]\nkind = \"zero\"", "[potential2]\nkind = \"gaussian_bump\"\namplitude = 5.0\ncenter = [0.5, 0.5]\nwidth = 0.15");
    assert_eq!(code(&run(&cfg, &["reconstruct"], dir.path())), 0);
    let field = std::fs::read_to_string(dir.path().join("out/field.csv")).unwrap();
    for line in field.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[2].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn verify_writes_a_report_and_reports_status_by_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    // The decay checks need a grid fine enough to resolve tau = 16.
    let cfg = SQUARE
        .replace("res = [10, 10]", "res = [24, 24]")
        .replace("decay_taus = [2.0, 4.0, 8.0]", "decay_taus = [4.0, 8.0, 16.0]");
    let out = run(&cfg, &["verify", "all"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let report = std::fs::read_to_string(dir.path().join("out/report.tsv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next().unwrap(), "check\tstatus\tmeasured\tthreshold\tanchor");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r.split('\t').count() == 5 && r.contains("\tpass\t")));

    // The second-order trace is not the Green partner of the stencil, so the
    // two routes disagree.
    let cfg = SQUARE.replace("[isozaki]", "[spectra]\ntrace_scheme = \"onesided2\"\n\n[isozaki]");
    assert_eq!(code(&run(&cfg, &["verify", "route_equivalence"], dir.path())), 2);
}

#[test]
fn configuration_problems_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let coarse = SQUARE.replace("res = [10, 10]", "res = [2, 10]");
    assert_eq!(code(&run(&coarse, &["forward"], dir.path())), 3);
    let unknown = SQUARE.replace("seed = 5", "seed = 5\ncolour = 1");
    assert_eq!(code(&run(&unknown, &["forward"], dir.path())), 3);
    assert_eq!(code(&run(SQUARE, &["verify", "nonsense"], dir.path())), 3);
    let fast = SQUARE.replace("tau = [4.0, 8.0]", "tau = [4.0, 80.0]");
    assert_eq!(code(&run(&fast, &["sweep"], dir.path())), 3);
    // The ceiling can be overridden.
    assert_eq!(code(&run(&fast, &["sweep", "--force-tau"], dir.path())), 0);
}

#[test]
fn unwritable_output_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("out");
    std::fs::write(&blocker, b"not a directory").unwrap();
    assert_eq!(code(&run(SQUARE, &["forward"], dir.path())), 4);
}
