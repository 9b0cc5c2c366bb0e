//! The experiment catalog, config resolution, and CSV/JSON rendering shared
//! by the command-line runner.

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::ensemble::{self, CampaignConfig, ChiRuleKind, Control, EnsembleError, GridPoint, StateEnsemble};
use crate::haar::RngStream;
use crate::mps::{Boundary, BoundaryKind, MpsError};
use crate::weingarten::{self, McAverageSpec, Permutation, Weighting, WeingartenError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    AverageStateDistance,
    EigenHistogram,
    VarianceScan,
    DistanceScan,
    LipschitzProbe,
    ConcentrationTail,
    WeingartenCheck,
}

pub const ALL_EXPERIMENTS: [ExperimentKind; 7] = [
    ExperimentKind::AverageStateDistance,
    ExperimentKind::EigenHistogram,
    ExperimentKind::VarianceScan,
    ExperimentKind::DistanceScan,
    ExperimentKind::LipschitzProbe,
    ExperimentKind::ConcentrationTail,
    ExperimentKind::WeingartenCheck,
];

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::AverageStateDistance => "average_state_distance",
            Self::EigenHistogram => "eigen_histogram",
            Self::VarianceScan => "variance_scan",
            Self::DistanceScan => "distance_scan",
            Self::LipschitzProbe => "lipschitz_probe",
            Self::ConcentrationTail => "concentration_tail",
            Self::WeingartenCheck => "weingarten_check",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Self::AverageStateDistance => "running distance of the average state from I/D^N, MPS vs Haar states",
            Self::EigenHistogram => "reduced-state eigenvalue distribution, MPS vs Haar states, with KS test",
            Self::VarianceScan => "ensemble variance of a centered observable over an (N, chi) grid",
            Self::DistanceScan => "mean trace distance of reduced states from their ensemble average",
            Self::LipschitzProbe => "finite-difference Lipschitz ratios against the analytic bound",
            Self::ConcentrationTail => "deviation tail fractions and exponential concentration fit",
            Self::WeingartenCheck => "exact Weingarten average state against Monte Carlo",
        }
    }

    /// Column header of the emitted CSV.
    pub fn columns(self) -> &'static str {
        match self {
            Self::AverageStateDistance => "samples,rmps_d1,rmps_stderr,haar_d1,haar_stderr",
            Self::EigenHistogram => "bin_lo,bin_hi,rmps_mass,haar_mass",
            Self::VarianceScan => "N,chi,samples,f_mean,f_var,f_stderr",
            Self::DistanceScan => "N,chi,samples,d1_mean,d1_stderr",
            Self::LipschitzProbe => "scale,pairs,degenerate,max_ratio,mean_ratio,bound",
            Self::ConcentrationTail => "N,chi,samples,epsilon,count,fraction",
            Self::WeingartenCheck => "row,col,exact_re,exact_im,mc_re,mc_im,stderr_re,stderr_im",
        }
    }

    pub fn default_config(self) -> CampaignConfig {
        let base = CampaignConfig::default();
        match self {
            Self::AverageStateDistance => CampaignConfig { n_grid: vec![4], chi: vec![2], ..base },
            Self::EigenHistogram => CampaignConfig { n_grid: vec![4], chi: vec![2], samples: 5000, ..base },
            Self::VarianceScan | Self::DistanceScan => base,
            Self::LipschitzProbe => CampaignConfig { n_grid: vec![8], chi: vec![4], ..base },
            Self::ConcentrationTail => CampaignConfig {
                n_grid: vec![3, 4, 5, 6],
                chi_rule: ChiRuleKind::Poly,
                chi_power: 2.5,
                chi_cap: 128,
                samples: 2000,
                epsilon_grid: (0..=20).map(|k| 0.05 * k as f64).collect(),
                ..base
            },
            Self::WeingartenCheck => CampaignConfig { n_grid: vec![2], chi: vec![2], samples: 100_000, ..base },
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = EnsembleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().replace('-', "_");
        ALL_EXPERIMENTS
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| config_error("experiment", s, "unknown experiment; see `rmps list`"))
    }
}

fn config_error(key: &str, value: impl fmt::Display, reason: impl Into<String>) -> EnsembleError {
    EnsembleError::Config { key: key.into(), value: value.to_string(), reason: reason.into() }
}

/// A parsed, not yet validated config document.
#[derive(Debug, Clone, Default)]
pub struct ConfigDocument {
    pub experiment: Option<ExperimentKind>,
    pub fields: Map<String, Value>,
}

impl ConfigDocument {
    /// Parse a flat JSON object. An `experiment` key, if present, selects the
    /// experiment; every other key must be a campaign field.
    pub fn parse(text: &str) -> Result<Self, EnsembleError> {
        let value: Value = serde_json::from_str(text).map_err(|e| config_error("<document>", "", e.to_string()))?;
        let Value::Object(mut fields) = value else {
            return Err(config_error("<document>", "", "config must be a JSON object"));
        };
        let experiment = match fields.remove("experiment") {
            None => None,
            Some(Value::String(s)) => Some(s.parse()?),
            Some(other) => return Err(config_error("experiment", other, "expected a string")),
        };
        Ok(Self { experiment, fields })
    }

    /// Apply `KEY=VALUE` overrides to a copy; `VALUE` is read as JSON and
    /// falls back to a plain string.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self, EnsembleError> {
        let mut out = self.clone();
        for item in overrides {
            let (key, raw) =
                item.split_once('=').ok_or_else(|| config_error(item, "", "override must have the form KEY=VALUE"))?;
            let key = key.trim();
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            if key == "experiment" {
                let Value::String(s) = &value else {
                    return Err(config_error("experiment", raw, "expected a string"));
                };
                out.experiment = Some(s.parse()?);
            } else {
                out.fields.insert(key.to_string(), value);
            }
        }
        Ok(out)
    }

    /// Merge onto the experiment's defaults and validate.
    pub fn resolve(&self, kind: ExperimentKind) -> Result<CampaignConfig, EnsembleError> {
        let mut merged = match serde_json::to_value(kind.default_config()).expect("config serializes") {
            Value::Object(m) => m,
            _ => unreachable!("config serializes to an object"),
        };
        let known: Vec<String> = merged.keys().cloned().collect();
        for (k, v) in &self.fields {
            if !known.contains(k) {
                return Err(config_error(k, v, "unknown key"));
            }
            merged.insert(k.clone(), v.clone());
        }
        let cfg: CampaignConfig = serde_json::from_value(Value::Object(merged)).map_err(|e| {
            // find the key that fails on its own against the defaults
            let defaults = match serde_json::to_value(kind.default_config()).expect("config serializes") {
                Value::Object(m) => m,
                _ => unreachable!("config serializes to an object"),
            };
            for (k, v) in &self.fields {
                let mut single = defaults.clone();
                single.insert(k.clone(), v.clone());
                if let Err(err) = serde_json::from_value::<CampaignConfig>(Value::Object(single)) {
                    return config_error(k, v, err.to_string());
                }
            }
            config_error("<document>", "", e.to_string())
        })?;
        check_for(kind, &cfg)?;
        Ok(cfg)
    }
}

/// Experiment-specific constraints on top of [`CampaignConfig::validate`].
pub fn check_for(kind: ExperimentKind, cfg: &CampaignConfig) -> Result<Vec<GridPoint>, EnsembleError> {
    let points = cfg.validate()?;
    let single = matches!(
        kind,
        ExperimentKind::AverageStateDistance
            | ExperimentKind::EigenHistogram
            | ExperimentKind::LipschitzProbe
            | ExperimentKind::WeingartenCheck
    );
    if single && points.len() != 1 {
        return Err(config_error(
            "N_grid",
            format!("{:?}", cfg.n_grid),
            format!("{kind} runs a single (N, chi) point, got {}", points.len()),
        ));
    }
    match kind {
        ExperimentKind::DistanceScan | ExperimentKind::EigenHistogram if cfg.window_len > 3 => {
            Err(config_error("L", cfg.window_len, "reduced states are limited to L ≤ 3"))
        }
        ExperimentKind::WeingartenCheck
            if cfg.boundary_kind != BoundaryKind::Open
                || !cfg.homogeneous
                || cfg.n_grid[0] > weingarten::EXACT_MAX_ORDER =>
        {
            Err(config_error(
                "N_grid",
                cfg.n_grid[0],
                format!("exact averaging needs a homogeneous open chain with N ≤ {}", weingarten::EXACT_MAX_ORDER),
            ))
        }
        ExperimentKind::ConcentrationTail if cfg.epsilon_grid.is_empty() || cfg.samples < 100 => Err(config_error(
            "epsilon_grid",
            format!("{:?}", cfg.epsilon_grid),
            "tail estimation needs a nonempty epsilon grid and at least 100 samples",
        )),
        _ => Ok(points),
    }
}

/// SHA-256 of the resolved config in canonical form (sorted keys, compact).
pub fn config_hash(kind: ExperimentKind, cfg: &CampaignConfig) -> String {
    let mut value = serde_json::to_value(cfg).expect("config serializes");
    if let Value::Object(m) = &mut value {
        m.insert("experiment".into(), Value::String(kind.name().into()));
    }
    let digest = Sha256::digest(serde_json::to_string(&value).expect("value serializes").as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// 17 significant digits, round-trip exact.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Serialize)]
pub struct GridTiming {
    #[serde(rename = "N")]
    pub n_sites: usize,
    pub chi: usize,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub kind: ExperimentKind,
    pub csv: String,
    pub rows: usize,
    pub summary: Value,
    pub timings: Vec<GridTiming>,
    pub interrupted: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub experiment: ExperimentKind,
    pub config_hash: String,
    pub master_seed: u64,
    pub artifacts: Vec<String>,
    pub tool_version: String,
    pub grid_wall_seconds: Vec<GridTiming>,
    pub interrupted: bool,
    pub summary: Value,
    pub config: CampaignConfig,
}

struct Csv {
    text: String,
    rows: usize,
}

impl Csv {
    fn new(header: &str) -> Self {
        Self { text: format!("{header}\n"), rows: 0 }
    }

    fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
        self.rows += 1;
    }
}

fn timing(point: GridPoint, wall_seconds: f64) -> GridTiming {
    GridTiming { n_sites: point.n_sites, chi: point.chi, wall_seconds }
}

/// Run one experiment on a validated config. Cancellation returns the
/// completed grid points with `interrupted` set.
pub fn run_experiment(
    kind: ExperimentKind,
    cfg: &CampaignConfig,
    control: &Control,
) -> Result<ExperimentOutput, EnsembleError> {
    let points = check_for(kind, cfg)?;
    let mut csv = Csv::new(kind.columns());
    let mut timings = Vec::new();
    let mut summary = Map::new();
    let started = std::time::Instant::now();
    match kind {
        ExperimentKind::VarianceScan | ExperimentKind::DistanceScan => {
            let recs = if kind == ExperimentKind::VarianceScan {
                ensemble::variance_scan(cfg, control)?
            } else {
                ensemble::distance_scan(cfg, control)?
            };
            for r in &recs {
                let mut fields = vec![r.point.n_sites.to_string(), r.point.chi.to_string(), r.samples.to_string()];
                let values = if kind == ExperimentKind::VarianceScan {
                    vec![r.f_mean, r.f_var, r.f_stderr]
                } else {
                    vec![r.d1_mean, r.d1_stderr]
                };
                fields.extend(values.into_iter().map(|v| fmt_f64(v.expect("computed by the scan"))));
                csv.row(&fields);
                timings.push(timing(r.point, r.wall_seconds));
            }
        }
        ExperimentKind::AverageStateDistance => {
            let ens = StateEnsemble::from_config(cfg, points[0]);
            let curve = ensemble::average_state_distance_curve(&ens, &cfg.sample_grid)?;
            for p in &curve.points {
                csv.row(&[
                    p.samples.to_string(),
                    fmt_f64(p.rmps_d1),
                    fmt_f64(p.rmps_stderr),
                    fmt_f64(p.haar_d1),
                    fmt_f64(p.haar_stderr),
                ]);
            }
            timings.push(timing(points[0], started.elapsed().as_secs_f64()));
        }
        ExperimentKind::EigenHistogram => {
            let ens = StateEnsemble::from_config(cfg, points[0]);
            let h = ensemble::eigenvalue_histogram(&ens, cfg.window_len, cfg.samples, cfg.bins)?;
            for k in 0..h.bins {
                csv.row(&[
                    fmt_f64(k as f64 / h.bins as f64),
                    fmt_f64((k + 1) as f64 / h.bins as f64),
                    fmt_f64(h.rmps_mass[k]),
                    fmt_f64(h.haar_mass[k]),
                ]);
            }
            summary.insert("ks_statistic".into(), h.ks_statistic.into());
            summary.insert("ks_critical_1pct".into(), h.ks_critical.into());
            summary.insert("distributions_differ".into(), (h.ks_statistic > h.ks_critical).into());
            timings.push(timing(points[0], started.elapsed().as_secs_f64()));
        }
        ExperimentKind::LipschitzProbe => {
            let ens = StateEnsemble::from_config(cfg, points[0]);
            let obs = cfg.observable_for(points[0].n_sites)?;
            let mut all_within = true;
            for &scale in &cfg.perturbation_scales {
                if control.is_cancelled() {
                    break;
                }
                let r = ensemble::lipschitz_probe(&ens, &obs, cfg.pairs, scale)?;
                all_within &= r.max_ratio <= r.bound;
                csv.row(&[
                    fmt_f64(r.scale),
                    r.pairs.to_string(),
                    r.degenerate.to_string(),
                    fmt_f64(r.max_ratio),
                    fmt_f64(r.mean_ratio),
                    fmt_f64(r.bound),
                ]);
            }
            summary.insert("all_within_bound".into(), all_within.into());
            timings.push(timing(points[0], started.elapsed().as_secs_f64()));
        }
        ExperimentKind::ConcentrationTail => {
            let res = ensemble::concentration_tail(cfg, control)?;
            for row in &res.rows {
                for (k, &e) in res.epsilons.iter().enumerate() {
                    csv.row(&[
                        row.point.n_sites.to_string(),
                        row.point.chi.to_string(),
                        row.samples.to_string(),
                        fmt_f64(e),
                        row.counts[k].to_string(),
                        fmt_f64(row.fraction(k)),
                    ]);
                }
                timings.push(timing(row.point, row.wall_seconds));
            }
            if let Some(fit) = res.fit {
                summary.insert("c1".into(), fit.c1.into());
                summary.insert("c2_prime".into(), fit.c2_prime.into());
                summary.insert("c2_prime_lower_95".into(), fit.c2_lower.into());
                summary.insert("rms_residual".into(), fit.rms_residual.into());
                summary.insert("points_used".into(), fit.points_used.into());
                summary.insert("concentrating".into(), fit.concentrating().into());
            }
        }
        ExperimentKind::WeingartenCheck => {
            let pt = points[0];
            let boundary = Boundary::open_default(pt.chi);
            let (phi_i, phi_f) = match &boundary {
                Boundary::Open { left, right } => (left.clone(), right.clone()),
                Boundary::Periodic => unreachable!("open boundary"),
            };
            let exact = weingarten::average_state_exact(pt.n_sites, cfg.phys_dim, pt.chi, &phi_i, &phi_f)?;
            let spec = McAverageSpec {
                n_sites: pt.n_sites,
                phys_dim: cfg.phys_dim,
                chi: pt.chi,
                boundary,
                homogeneous: true,
                weighting: Weighting::Raw,
            };
            let mc = weingarten::average_state_mc(&spec, cfg.samples, RngStream::new(cfg.master_seed, 0))?;
            let dim = exact.rho.nrows();
            let mut max_z = 0.0f64;
            for r in 0..dim {
                for s in 0..dim {
                    let (e, m) = (exact.rho[(r, s)], mc.mean[(r, s)]);
                    let (se_re, se_im) = (mc.stderr_re[(r, s)], mc.stderr_im[(r, s)]);
                    for (diff, se) in [(e.re - m.re, se_re), (e.im - m.im, se_im)] {
                        if diff.abs() > 1e-12 {
                            max_z = max_z.max(diff.abs() / se.max(f64::MIN_POSITIVE));
                        }
                    }
                    csv.row(&[
                        r.to_string(),
                        s.to_string(),
                        fmt_f64(e.re),
                        fmt_f64(e.im),
                        fmt_f64(m.re),
                        fmt_f64(m.im),
                        fmt_f64(se_re),
                        fmt_f64(se_im),
                    ]);
                }
            }
            let table = weingarten::weingarten_function(2, cfg.phys_dim)?;
            summary.insert("exact_trace".into(), exact.trace.into());
            summary.insert("max_abs_z".into(), max_z.into());
            summary.insert("within_3_stderr".into(), (max_z <= 3.0).into());
            summary.insert("wg_s2_identity".into(), table.value(&Permutation::identity(2)).into());
            summary.insert("wg_s2_swap".into(), table.value(&Permutation::transposition(2, 0, 1)).into());
            timings.push(timing(pt, started.elapsed().as_secs_f64()));
        }
    }
    Ok(ExperimentOutput {
        kind,
        rows: csv.rows,
        csv: csv.text,
        summary: Value::Object(summary),
        timings,
        interrupted: control.is_cancelled(),
    })
}

/// Exit-code class of an error: 3 for numerical failures, 2 otherwise.
pub fn exit_code(err: &EnsembleError) -> i32 {
    let numerical =
        err.is_numerical() || matches!(err, EnsembleError::Weingarten(WeingartenError::Mps(MpsError::Linalg(_))));
    if numerical {
        3
    } else {
        2
    }
}

/// Run every requested experiment in a dedicated pool of `workers` threads.
pub fn run_in_pool(
    workers: usize,
    kind: ExperimentKind,
    cfg: &CampaignConfig,
    control: &Control,
) -> Result<ExperimentOutput, EnsembleError> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().expect("thread pool");
    pool.install(|| run_experiment(kind, cfg, control))
}
