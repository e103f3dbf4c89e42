use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use invspec_core::isozaki::{tau_ceiling, tau_sweep_diff, ConvergenceTable, SweepOptions, SweepSource};
use invspec_core::reconstruct::{reconstruct, FrequencyGrid, ReconstructionResult, SampleOptions, SampleSource};
use invspec_core::spectra::{build_dataset, perturb_dataset, save_dataset, SpectralDataset};
use log::{info, warn};

use crate::config::RouteChoice;
use crate::verify::admissible;
use crate::{stage, HarnessError, Problem};

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), HarnessError> {
    std::fs::write(path, bytes).map_err(|source| HarnessError::Output {
        path: path.to_path_buf(),
        source,
    })
}

fn ensure_dir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Output {
        path: dir.to_path_buf(),
        source,
    })
}

/// Both datasets at the configured truncation, the second one perturbed when
/// the configuration asks for it.
pub fn datasets(problem: &Problem) -> Result<(SpectralDataset, SpectralDataset, Option<SpectralDataset>), HarnessError> {
    let k = problem.cfg.spectra.pairs.unwrap_or(problem.grid.len());
    let build = |q| build_dataset(q, k, problem.scheme, &problem.eigen_opts);
    let (a, b) = rayon::join(|| build(&problem.q1), || build(&problem.q2));
    let (ds1, ds2) = (a.map_err(stage("eigensolve"))?, b.map_err(stage("eigensolve"))?);
    let perturbed = match problem.cfg.perturb_mode() {
        Some((mode, eps)) => Some(perturb_dataset(&ds2, mode, eps, problem.cfg.seed).map_err(stage("perturbation"))?),
        None => None,
    };
    Ok((ds1, ds2, perturbed))
}

#[derive(Debug)]
pub struct ForwardSummary {
    pub files: Vec<PathBuf>,
    pub text: String,
}

pub fn cmd_forward(problem: &Problem, out: &Path) -> Result<ForwardSummary, HarnessError> {
    ensure_dir(out)?;
    let (ds1, ds2, perturbed) = datasets(problem)?;
    let mut files = Vec::new();
    let mut text = String::new();
    let named = [("dataset1.bsd", Some(&ds1)), ("dataset2.bsd", Some(&ds2)), ("dataset2_perturbed.bsd", perturbed.as_ref())];
    for (name, ds) in named {
        let Some(ds) = ds else { continue };
        let path = out.join(name);
        save_dataset(ds, &path).map_err(|e| match e {
            invspec_core::Error::Io(source) => HarnessError::Output { path: path.clone(), source },
            other => HarnessError::Stage { stage: "write dataset", source: other },
        })?;
        let head: Vec<String> = ds.eigenvalues().iter().take(4).map(|l| format!("{l:.6}")).collect();
        writeln!(
            text,
            "{name}: {} pairs, scheme {:?}, trace constant {:.4e}, lowest [{}]",
            ds.len(),
            ds.scheme(),
            ds.trace_bound_constant(),
            head.join(", ")
        )
        .expect("writing to a string");
        files.push(path);
    }
    for w in problem.q1.warnings.iter().chain(&problem.q2.warnings) {
        warn!("{w}");
    }
    Ok(ForwardSummary { files, text })
}

/// Probe parameter for reconstruction: the configured value, or the
/// resolution ceiling.
pub fn recon_tau(problem: &Problem) -> f64 {
    problem.cfg.isozaki.recon_tau.unwrap_or_else(|| tau_ceiling(&problem.grid))
}

pub fn frequency_grid(problem: &Problem) -> Result<FrequencyGrid, HarnessError> {
    let iso = &problem.cfg.isozaki;
    let xi_max = iso.xi_max.unwrap_or_else(|| {
        let l = problem.grid.extent().iter().cloned().fold(f64::INFINITY, f64::min);
        2.0 * std::f64::consts::PI * iso.fgrid_m as f64 / l
    });
    FrequencyGrid::new(&problem.grid, iso.fgrid_m, xi_max).map_err(stage("frequency grid"))
}

pub fn run_reconstruction(problem: &Problem) -> Result<ReconstructionResult, HarnessError> {
    let fgrid = frequency_grid(problem)?;
    let tau = recon_tau(problem);
    let opts = SampleOptions {
        scheme: problem.scheme,
        eta: problem.eta.clone(),
        force: problem.force,
    };
    let truth = problem.q1.difference(&problem.q2).map_err(stage("potential"))?;
    match problem.route {
        RouteChoice::Direct => {
            if problem.cfg.perturbation.is_some() {
                warn!("perturbations only apply to the series route; ignoring");
            }
            let source = SampleSource::Direct {
                q1: &problem.q1,
                q2: &problem.q2,
            };
            reconstruct(source, &fgrid, tau, &opts, Some(&truth)).map_err(stage("reconstruction"))
        }
        RouteChoice::Series => {
            let (ds1, ds2, perturbed) = datasets(problem)?;
            let ds2 = perturbed.as_ref().unwrap_or(&ds2);
            let source = SampleSource::Series {
                ds1: &ds1,
                ds2,
                k: ds1.len(),
            };
            reconstruct(source, &fgrid, tau, &opts, Some(&truth)).map_err(stage("reconstruction"))
        }
    }
}

/// `x_0,..,x_{n-1},value,truth` per interior node.
pub fn field_csv(problem: &Problem, result: &ReconstructionResult) -> Result<String, HarnessError> {
    let truth = problem.q1.difference(&problem.q2).map_err(stage("potential"))?;
    let grid = &problem.grid;
    let mut out = String::new();
    let cols: Vec<String> = (0..grid.dim()).map(|a| format!("x{a}")).collect();
    writeln!(out, "{},value,truth", cols.join(",")).expect("writing to a string");
    for (idx, (v, t)) in result.field.iter().zip(&truth).enumerate() {
        let x = grid.position(idx);
        for xa in &x[..grid.dim()] {
            write!(out, "{xa},").expect("writing to a string");
        }
        writeln!(out, "{v},{t}").expect("writing to a string");
    }
    Ok(out)
}

pub fn field_norm(result: &ReconstructionResult) -> f64 {
    result.field.iter().map(|v| v * v).sum::<f64>().sqrt() * result.grid.cell_volume().sqrt()
}

pub fn cmd_reconstruct(problem: &Problem, out: &Path) -> Result<(ReconstructionResult, String), HarnessError> {
    ensure_dir(out)?;
    let result = run_reconstruction(problem)?;
    let path = out.join("reconstruction.bsd");
    write(&path, result.encode())?;
    write(&out.join("samples.csv"), result.samples_csv())?;
    write(&out.join("field.csv"), field_csv(problem, &result)?)?;
    let m = &result.metrics;
    let mut text = format!(
        "route {} tau {:.4} frequencies {} field_norm {:.6e} sample_asymmetry {:.3e} imag_residue {:.3e}",
        result.route.name(),
        result.tau,
        result.fgrid.len(),
        field_norm(&result),
        result.sample_asymmetry,
        result.imag_residue
    );
    if let (Some(rel), Some(max)) = (m.rel_l2, m.max_err) {
        write!(text, " rel_l2 {rel:.6e} max_err {max:.6e}").expect("writing to a string");
    }
    Ok((result, text))
}

/// One convergence table per configured frequency, over the probe
/// parameters admissible for it.
pub fn run_sweep(problem: &Problem) -> Result<Vec<ConvergenceTable>, HarnessError> {
    let iso = &problem.cfg.isozaki;
    if iso.xi.is_empty() || iso.tau.is_empty() {
        return Err(HarnessError::Config("sweep needs isozaki.xi and isozaki.tau".into()));
    }
    let opts = SweepOptions {
        scheme: problem.scheme,
        eta: problem.eta.clone(),
        force: problem.force,
    };
    let series = match problem.route {
        RouteChoice::Direct => None,
        RouteChoice::Series => Some(datasets(problem)?),
    };
    let mut tables = Vec::with_capacity(iso.xi.len());
    for xi in &iso.xi {
        let taus: Vec<f64> = iso.tau.iter().copied().filter(|t| admissible(xi, *t)).collect();
        if taus.len() < iso.tau.len() {
            warn!("xi {xi:?}: skipping tau below max(1, |xi|)");
        }
        if taus.is_empty() {
            warn!("xi {xi:?}: no admissible tau");
            continue;
        }
        let source = match &series {
            None => SweepSource::Direct,
            Some((ds1, ds2, perturbed)) => SweepSource::Series {
                ds1,
                ds2: perturbed.as_ref().unwrap_or(ds2),
                k: ds1.len(),
            },
        };
        let table = tau_sweep_diff(&problem.q1, &problem.q2, source, xi, &taus, &opts).map_err(stage("sweep"))?;
        info!("xi {xi:?}: {} rows", table.rows.len());
        tables.push(table);
    }
    Ok(tables)
}

pub fn cmd_sweep(problem: &Problem, out: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    ensure_dir(out)?;
    let tables = run_sweep(problem)?;
    let mut files = Vec::new();
    for (i, t) in tables.iter().enumerate() {
        let path = out.join(format!("sweep_{i}.csv"));
        write(&path, t.to_csv())?;
        files.push(path);
    }
    Ok(files)
}
