//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::f64::consts::PI;
use std::time::Instant;

use invspec::commands::{datasets, frequency_grid, recon_tau, run_reconstruction, run_sweep};
use invspec::verify::{run_check, Check};
use invspec::{HarnessError, Problem, Status};
use invspec_core::reconstruct::{reconstruct, SampleOptions, SampleSource};
use invspec_core::spectra::{perturb_dataset, PerturbMode, SpectralDataset};

const BUMP: &str = r#"kind = "gaussian_bump"
amplitude = 5.0
center = [0.5, 0.5]
width = 0.1"#;

const ZERO: &str = r#"kind = "zero""#;

/// Singular at the midpoint between four nodes.
const SINGULAR: &str = r#"kind = "inverse_power"
amplitude = 1.0
center = [0.5, 0.5]
exponent = 0.8"#;

fn square(res: usize, p1: &str, p2: &str, extra: &str) -> String {
    format!(
        "seed = 17\n\n[domain]\ndim = 2\nextent = [1.0, 1.0]\nres = [{res}, {res}]\n\n\
         [potential1]\n{p1}\n\n[potential2]\n{p2}\n\n{extra}\n"
    )
}

fn problem(text: &str) -> Result<Problem, HarnessError> {
    Problem::from_toml(text)
}

type Verdict = Result<(bool, String), HarnessError>;

fn single_check(text: &str, check: Check) -> Verdict {
    let report = run_check(&problem(text)?, check)?;
    let pass = report.checks.iter().all(|c| c.status == Status::Pass);
    let detail = report
        .checks
        .iter()
        .map(|c| format!("{}: {} [{}]", c.name, c.measured, c.threshold))
        .collect::<Vec<_>>()
        .join("; ");
    Ok((pass, detail))
}

const XIS: &str = "xi = [[0.0, 0.0], [6.283185307179586, 0.0], [6.283185307179586, 6.283185307179586]]";

/// Relative errors `|S_diff - oracle| / |oracle|` per frequency, one entry
/// per admissible probe parameter.
fn sweep_errors(res: usize, taus: &str) -> Result<Vec<(Vec<f64>, Vec<(f64, f64, f64)>)>, HarnessError> {
    let text = square(res, BUMP, ZERO, &format!("[isozaki]\n{XIS}\ntau = {taus}\nroute = \"direct\""));
    let tables = run_sweep(&problem(&text)?)?;
    Ok(tables
        .into_iter()
        .map(|t| {
            let rows = t
                .rows
                .iter()
                .map(|r| (r.tau, r.abs_err, r.abs_err / r.oracle.norm()))
                .collect();
            (t.xi, rows)
        })
        .collect())
}

fn c1_probe_limit() -> Verdict {
    let coarse = sweep_errors(64, "[4.0, 8.0, 16.0]")?;
    let fine = sweep_errors(128, "[16.0]")?;
    let mut pass = true;
    let mut parts = Vec::new();
    for ((xi, rows), (_, frows)) in coarse.iter().zip(&fine) {
        let errs: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
        let at16 = rows.iter().find(|r| r.0 == 16.0).map(|r| r.2).unwrap_or(f64::NAN);
        let floor = frows[0].2;
        let ok = decreasing && at16 <= 3.0 * floor;
        pass &= ok;
        let taus: Vec<String> = rows.iter().map(|r| format!("{}", r.0)).collect();
        parts.push(format!(
            "xi=({:.3},{:.3}) tau=[{}] abs_err=[{}] rel@16={at16:.4} floor128={floor:.4}",
            xi[0],
            xi[1],
            taus.join(","),
            errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(","),
        ));
    }
    Ok((pass, format!("{} [strictly decreasing; rel@16 <= 3 x floor]", parts.join("; "))))
}

fn c2_route_equivalence() -> Verdict {
    let xis = "xi = [[0.0, 0.0], [6.283185307179586, 0.0], [3.141592653589793, 6.283185307179586], [-4.0, 5.0]]";
    single_check(&square(24, BUMP, ZERO, &format!("[isozaki]\n{xis}\ntau = [8.0]")), Check::RouteEquivalence)
}

fn c3_trace_expansion() -> Verdict {
    single_check(
        &square(24, BUMP, ZERO, "[isozaki]\nxi = [[6.283185307179586, 0.0]]\ntau = [8.0]"),
        Check::TraceExpansion,
    )
}

fn c4_parseval() -> Verdict {
    let cosine = "kind = \"cosine_separable\"\namplitude = 2.0\nmodes = [1.0, 2.0]\nphases = [0.0, 0.5]";
    single_check(
        &square(24, BUMP, cosine, "[isozaki]\nxi = [[3.141592653589793, 3.141592653589793]]\ntau = [8.0]"),
        Check::Parseval,
    )
}

fn c5_trace_difference_decay() -> Verdict {
    single_check(
        &square(32, BUMP, ZERO, "[verify]\nlambdas = [-1e2, -1e3, -1e4, -1e5]"),
        Check::TraceDifferenceDecay,
    )
}

fn c6_correction_decay() -> Verdict {
    single_check(
        &square(96, BUMP, ZERO, "[verify]\ndecay_taus = [8.0, 16.0, 32.0, 64.0]"),
        Check::CorrectionDecay,
    )
}

fn c7_trace_growth() -> Verdict {
    single_check(&square(48, SINGULAR, ZERO, "[verify]\ntrace_pairs = 200"), Check::TraceGrowth)
}

fn c8_trace_estimate_stability() -> Verdict {
    single_check(
        &square(32, BUMP, SINGULAR, "[verify]\nforcings = 20\nrefine_res = [64, 64]"),
        Check::TraceEstimateStability,
    )
}

fn c9_end_to_end() -> Verdict {
    let iso = format!("[isozaki]\nroute = \"series\"\nfgrid_m = 2\nxi_max = {}", 4.0 * PI);
    let series = problem(&square(48, BUMP, ZERO, &iso))?;
    let direct = problem(&square(48, BUMP, ZERO, &iso.replace("series", "direct")))?;

    let (ds1, ds2, _) = datasets(&series)?;
    let fgrid = frequency_grid(&series)?;
    let tau = recon_tau(&series);
    let opts = SampleOptions::default();
    let same = reconstruct(SampleSource::Series { ds1: &ds1, ds2: &ds1, k: ds1.len() }, &fgrid, tau, &opts, None)
        .map_err(|e| HarnessError::Stage { stage: "reconstruction", source: e })?;
    let zero = same.field.iter().all(|v| *v == 0.0);

    let truth = series.q1.difference(&series.q2).expect("same grid");
    let from_data = reconstruct(SampleSource::Series { ds1: &ds1, ds2: &ds2, k: ds1.len() }, &fgrid, tau, &opts, Some(&truth))
        .map_err(|e| HarnessError::Stage { stage: "reconstruction", source: e })?;
    let reference = run_reconstruction(&direct)?;
    let err = from_data.metrics.rel_l2.expect("truth given");
    let threshold = 2.0 * reference.metrics.rel_l2.expect("truth given");
    Ok((
        zero && err <= threshold,
        format!(
            "identical_data_zero_field={zero} series_rel_l2={err:.6} direct_rel_l2={:.6} tau={tau:.3} frequencies={} \
             [series <= 2 x direct]",
            threshold / 2.0,
            fgrid.len()
        ),
    ))
}

fn c10_sensitivity() -> Verdict {
    let p = problem(&square(24, BUMP, ZERO, "[isozaki]\nfgrid_m = 2"))?;
    let (ds, _, _) = datasets(&p)?;
    let fgrid = frequency_grid(&p)?;
    let tau = recon_tau(&p);
    let norm = |pert: &SpectralDataset| -> Result<f64, HarnessError> {
        let r = reconstruct(
            SampleSource::Series { ds1: &ds, ds2: pert, k: ds.len() },
            &fgrid,
            tau,
            &SampleOptions::default(),
            None,
        )
        .map_err(|e| HarnessError::Stage { stage: "reconstruction", source: e })?;
        Ok(invspec::commands::field_norm(&r))
    };
    let response = |mode: PerturbMode, eps: f64| -> Result<f64, HarnessError> {
        let pert = perturb_dataset(&ds, mode, eps, 23)
            .map_err(|e| HarnessError::Stage { stage: "perturbation", source: e })?;
        norm(&pert)
    };
    let eps = 1e-3;
    let mut pass = true;
    let mut parts = Vec::new();
    for mode in [PerturbMode::EigenShiftDecaying, PerturbMode::TraceNoiseL2] {
        let ratio = response(mode, eps)? / response(mode, eps / 2.0)?;
        pass &= (1.6..=2.4).contains(&ratio);
        parts.push(format!("{} ratio={ratio:.4}", mode.name()));
    }
    let constant = response(PerturbMode::TraceNoiseConstant, eps)?;
    let decaying = response(PerturbMode::TraceNoiseL2, eps)?;
    pass &= constant >= 5.0 * decaying;
    let shift_constant = response(PerturbMode::EigenShiftConstant, eps)?;
    let shift_decaying = response(PerturbMode::EigenShiftDecaying, eps)?;
    parts.push(format!(
        "trace_noise_constant={constant:.4e} trace_noise_l2={decaying:.4e} (x{:.1}); \
         eigen_shift_constant={shift_constant:.4e} eigen_shift_decaying={shift_decaying:.4e}",
        constant / decaying
    ));
    Ok((pass, format!("{} [ratios in [1.6, 2.4]; constant >= 5 x decaying]", parts.join("; "))))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Verdict); 10] = [
        (1, "probe limit approaches the Fourier transform", c1_probe_limit),
        (2, "series route equals direct route", c2_route_equivalence),
        (3, "boundary trace expansion is exact", c3_trace_expansion),
        (4, "Parseval identity for probe solutions", c4_parseval),
        (5, "trace differences vanish at large negative energy", c5_trace_difference_decay),
        (6, "resolvent correction decays like 1/tau", c6_correction_decay),
        (7, "trace norms grow at most linearly", c7_trace_growth),
        (8, "trace estimate constant is stable under refinement", c8_trace_estimate_stability),
        (9, "reconstruction from boundary spectral data", c9_end_to_end),
        (10, "sensitivity to non-decaying perturbations", c10_sensitivity),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {}: {name}: {detail} ({:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
