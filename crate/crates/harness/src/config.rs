//! Run configuration: a flat TOML file with one table per stage.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use invspec_core::isozaki::EtaRule;
use invspec_core::mesh::Grid;
use invspec_core::schrodinger::{PotentialKind, PotentialSpec};
use invspec_core::spectra::{PerturbMode, TraceScheme};
use serde::Deserialize;

use crate::HarnessError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub domain: DomainConfig,
    pub potential1: PotentialConfig,
    pub potential2: PotentialConfig,
    #[serde(default)]
    pub spectra: SpectraConfig,
    #[serde(default)]
    pub isozaki: IsozakiConfig,
    pub perturbation: Option<PerturbationConfig>,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub dim: usize,
    pub extent: Vec<f64>,
    pub res: Vec<usize>,
}

/// One potential. `kind` picks the family; the remaining keys are the
/// family's parameters and must match it.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub kind: String,
    pub value: Option<f64>,
    pub amplitude: Option<f64>,
    pub center: Option<Vec<f64>>,
    pub width: Option<f64>,
    pub exponent: Option<f64>,
    pub modes: Option<Vec<f64>>,
    pub phases: Option<Vec<f64>>,
    pub values: Option<Vec<f64>>,
    pub lower_bound_c: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectraConfig {
    /// Number of eigenpairs; omitted means the full basis.
    pub pairs: Option<usize>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_scheme")]
    pub trace_scheme: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsozakiConfig {
    #[serde(default)]
    pub xi: Vec<Vec<f64>>,
    #[serde(default)]
    pub tau: Vec<f64>,
    #[serde(default = "default_route")]
    pub route: String,
    /// Explicit unit vector orthogonal to every `xi`; omitted means the
    /// deterministic choice.
    pub eta: Option<Vec<f64>>,
    /// Frequency lattice half-width for reconstruction.
    #[serde(default = "default_fgrid_m")]
    pub fgrid_m: usize,
    pub xi_max: Option<f64>,
    /// Probe parameter for reconstruction; omitted means the resolution
    /// ceiling.
    pub recon_tau: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub mode: String,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_decay_taus")]
    pub decay_taus: Vec<f64>,
    #[serde(default = "default_forcings")]
    pub forcings: usize,
    /// Finer resolution for the refinement check; omitted means twice the
    /// domain resolution.
    pub refine_res: Option<Vec<usize>>,
    #[serde(default = "default_trace_pairs")]
    pub trace_pairs: usize,
    #[serde(default = "default_coercivity_samples")]
    pub coercivity_samples: usize,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

fn default_tol() -> f64 {
    1e-9
}
fn default_scheme() -> String {
    "flux1".into()
}
fn default_route() -> String {
    "direct".into()
}
fn default_fgrid_m() -> usize {
    2
}
fn default_lambdas() -> Vec<f64> {
    vec![-1e2, -1e3, -1e4, -1e5]
}
fn default_decay_taus() -> Vec<f64> {
    vec![8.0, 16.0, 32.0, 64.0]
}
fn default_forcings() -> usize {
    20
}
fn default_trace_pairs() -> usize {
    200
}
fn default_coercivity_samples() -> usize {
    16
}

impl Default for SpectraConfig {
    fn default() -> Self {
        SpectraConfig {
            pairs: None,
            tol: default_tol(),
            trace_scheme: default_scheme(),
        }
    }
}

impl Default for IsozakiConfig {
    fn default() -> Self {
        IsozakiConfig {
            xi: Vec::new(),
            tau: Vec::new(),
            route: default_route(),
            eta: None,
            fgrid_m: default_fgrid_m(),
            xi_max: None,
            recon_tau: None,
        }
    }
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            lambdas: default_lambdas(),
            decay_taus: default_decay_taus(),
            forcings: default_forcings(),
            refine_res: None,
            trace_pairs: default_trace_pairs(),
            coercivity_samples: default_coercivity_samples(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouteChoice {
    Direct,
    Series,
}

fn bad(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Checks everything that can be checked without numerics.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let d = &self.domain;
        if d.extent.len() != d.dim || d.res.len() != d.dim {
            return Err(bad(format!("domain: extent and res need {} entries", d.dim)));
        }
        if d.res.iter().any(|&m| m < 3) {
            return Err(bad("domain: every resolution must be at least 3"));
        }
        self.grid()?;
        self.potential_spec(1)?;
        self.potential_spec(2)?;
        self.trace_scheme()?;
        self.route()?;
        self.eta_rule()?;
        for xi in &self.isozaki.xi {
            if xi.len() != d.dim {
                return Err(bad(format!("isozaki: frequency {xi:?} has the wrong dimension")));
            }
        }
        if self.isozaki.tau.iter().any(|t| !(*t > 0.0)) {
            return Err(bad("isozaki: tau values must be positive"));
        }
        if !self.isozaki.tau.windows(2).all(|w| w[0] < w[1]) {
            return Err(bad("isozaki: tau list must be strictly ascending"));
        }
        if let Some(p) = &self.perturbation {
            p.mode
                .parse::<PerturbMode>()
                .map_err(|e| bad(format!("perturbation: {e}")))?;
            if !p.magnitude.is_finite() || p.magnitude < 0.0 {
                return Err(bad("perturbation: magnitude must be finite and non-negative"));
            }
        }
        let v = &self.verify;
        if v.lambdas.len() < 2 || !v.lambdas.windows(2).all(|w| w[0] > w[1]) {
            return Err(bad("verify: lambdas must be at least two strictly descending values"));
        }
        if v.lambdas.iter().any(|l| *l >= 0.0) {
            return Err(bad("verify: lambdas must be negative"));
        }
        if v.decay_taus.len() < 2 || !v.decay_taus.windows(2).all(|w| w[0] < w[1]) {
            return Err(bad("verify: decay_taus must be at least two ascending values"));
        }
        if let Some(r) = &v.refine_res {
            if r.len() != d.dim || r.iter().any(|&m| m < 3) {
                return Err(bad("verify: refine_res needs one resolution >= 3 per axis"));
            }
        }
        if v.forcings == 0 || v.coercivity_samples == 0 {
            return Err(bad("verify: sample counts must be positive"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Arc<Grid>, HarnessError> {
        self.grid_with_res(&self.domain.res)
    }

    pub fn grid_with_res(&self, res: &[usize]) -> Result<Arc<Grid>, HarnessError> {
        Grid::new(self.domain.dim, &self.domain.extent, res)
            .map(Arc::new)
            .map_err(|e| bad(format!("domain: {e}")))
    }

    pub fn refine_res(&self) -> Vec<usize> {
        self.verify
            .refine_res
            .clone()
            .unwrap_or_else(|| self.domain.res.iter().map(|m| 2 * m).collect())
    }

    pub fn potential_spec(&self, which: usize) -> Result<PotentialSpec, HarnessError> {
        let p = if which == 1 { &self.potential1 } else { &self.potential2 };
        p.to_spec(self.domain.dim)
            .map_err(|e| bad(format!("potential{which}: {e}")))
    }

    pub fn trace_scheme(&self) -> Result<TraceScheme, HarnessError> {
        match self.spectra.trace_scheme.as_str() {
            "flux1" => Ok(TraceScheme::Flux1),
            "onesided2" => Ok(TraceScheme::OneSided2),
            other => Err(bad(format!("spectra: unknown trace scheme '{other}'"))),
        }
    }

    pub fn route(&self) -> Result<RouteChoice, HarnessError> {
        match self.isozaki.route.as_str() {
            "direct" => Ok(RouteChoice::Direct),
            "series" => Ok(RouteChoice::Series),
            other => Err(bad(format!("isozaki: unknown route '{other}'"))),
        }
    }

    pub fn eta_rule(&self) -> Result<EtaRule, HarnessError> {
        match &self.isozaki.eta {
            None => Ok(EtaRule::Deterministic),
            Some(v) if v.len() == self.domain.dim => Ok(EtaRule::Explicit(v.clone())),
            Some(_) => Err(bad("isozaki: eta has the wrong dimension")),
        }
    }

    pub fn perturb_mode(&self) -> Option<(PerturbMode, f64)> {
        self.perturbation
            .as_ref()
            .map(|p| (p.mode.parse().expect("validated"), p.magnitude))
    }
}

impl PotentialConfig {
    fn to_spec(&self, dim: usize) -> Result<PotentialSpec, String> {
        let need = |v: &Option<f64>, name: &str| v.ok_or_else(|| format!("'{}' needs '{name}'", self.kind));
        let need_vec = |v: &Option<Vec<f64>>, name: &str| {
            let v = v.clone().ok_or_else(|| format!("'{}' needs '{name}'", self.kind))?;
            if v.len() != dim {
                return Err(format!("'{name}' needs {dim} entries"));
            }
            Ok(v)
        };
        let (kind, used): (PotentialKind, &[&str]) = match self.kind.as_str() {
            "zero" => (PotentialKind::Constant { value: 0.0 }, &[]),
            "constant" => (
                PotentialKind::Constant {
                    value: need(&self.value, "value")?,
                },
                &["value"],
            ),
            "gaussian_bump" => (
                PotentialKind::GaussianBump {
                    amplitude: need(&self.amplitude, "amplitude")?,
                    center: need_vec(&self.center, "center")?,
                    width: need(&self.width, "width")?,
                },
                &["amplitude", "center", "width"],
            ),
            "cosine_separable" => (
                PotentialKind::CosineSeparable {
                    amplitude: need(&self.amplitude, "amplitude")?,
                    modes: need_vec(&self.modes, "modes")?,
                    phases: self.phases.clone().unwrap_or_else(|| vec![0.0; dim]),
                },
                &["amplitude", "modes", "phases"],
            ),
            "inverse_power" => (
                PotentialKind::InversePower {
                    amplitude: need(&self.amplitude, "amplitude")?,
                    center: need_vec(&self.center, "center")?,
                    exponent: need(&self.exponent, "exponent")?,
                },
                &["amplitude", "center", "exponent"],
            ),
            "grid_samples" => (
                PotentialKind::GridSamples {
                    values: self.values.clone().ok_or("'grid_samples' needs 'values'")?,
                },
                &["values"],
            ),
            other => return Err(format!("unknown potential kind '{other}'")),
        };
        let given = [
            ("value", self.value.is_some()),
            ("amplitude", self.amplitude.is_some()),
            ("center", self.center.is_some()),
            ("width", self.width.is_some()),
            ("exponent", self.exponent.is_some()),
            ("modes", self.modes.is_some()),
            ("phases", self.phases.is_some()),
            ("values", self.values.is_some()),
        ];
        if let Some((name, _)) = given.iter().find(|(name, set)| *set && !used.contains(name)) {
            return Err(format!("'{name}' does not apply to '{}'", self.kind));
        }
        let mut spec = PotentialSpec::new(kind);
        if let Some(c) = self.lower_bound_c {
            spec = spec.with_lower_bound(c);
        }
        Ok(spec)
    }
}
