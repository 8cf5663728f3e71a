//! Experiment configuration: a TOML file with `geometry`, `measures`,
//! `monitors` and `output` sections.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use levolve_core::geometry::{FlowModel, Geometry, TabulatedFlow};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    /// Malformed TOML or a field of the wrong shape; the message carries the
    /// line and column.
    #[error("{0}")]
    Parse(String),

    #[error("{field}: {msg}")]
    Semantic { field: String, msg: String },
}

fn semantic(field: impl Into<String>, msg: impl Into<String>) -> ConfigError {
    ConfigError::Semantic { field: field.into(), msg: msg.into() }
}

pub const DEFAULT_SEED: u64 = 7;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub geodesic: GeodesicConfig,
    #[serde(default)]
    pub measures: BTreeMap<String, MeasureConfig>,
    #[serde(default)]
    pub monitors: Vec<MonitorConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub model: String,
    pub nodes: usize,
    pub tau_domain: [f64; 2],
    pub circumference: Option<f64>,
    pub radius: Option<f64>,
    pub initial_radius: Option<f64>,
    pub phi0_sq: Option<f64>,
    pub coupling: Option<f64>,
    pub winding: Option<f64>,
    /// Table file for `custom_tabulated`, relative to the config file.
    pub table: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
}

fn default_samples() -> usize {
    64
}

fn default_grad_tol() -> f64 {
    1e-10
}

impl Default for GeodesicConfig {
    fn default() -> Self {
        GeodesicConfig { samples: default_samples(), grad_tol: default_grad_tol() }
    }
}

/// Initial profile of a named density. `tau` is its starting time and
/// defaults to the lower end of the geometry's time domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureConfig {
    Uniform {
        tau: Option<f64>,
    },
    Bump {
        center: f64,
        width: f64,
        #[serde(default)]
        floor: f64,
        tau: Option<f64>,
    },
    /// Half the mass on each of the nodes nearest to `a` and `b`.
    TwoPoint {
        a: f64,
        b: f64,
        tau: Option<f64>,
    },
}

impl MeasureConfig {
    pub fn tau(&self) -> Option<f64> {
        match *self {
            MeasureConfig::Uniform { tau } | MeasureConfig::Bump { tau, .. } | MeasureConfig::TwoPoint { tau, .. } => tau,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    #[default]
    Exact,
    Entropic,
}

/// One `amplitude·cos(harmonic·θ)` term of a potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosTerm {
    pub amplitude: f64,
    #[serde(default = "one")]
    pub harmonic: u32,
}

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MonitorConfig {
    Theta {
        name: Option<String>,
        measures: [String; 2],
        tau_bar: [f64; 2],
        s_grid: Vec<f64>,
        #[serde(default)]
        solver: SolverKind,
        epsilon: Option<f64>,
        slack: Option<f64>,
    },
    WEntropy {
        name: Option<String>,
        measure: String,
        taus: Vec<f64>,
        slack: Option<f64>,
    },
    /// Reduced volume and the `L̄` minimum gap from one distance field.
    ReducedVolume {
        name: Option<String>,
        #[serde(default)]
        base_point: f64,
        base_offset: Option<f64>,
        taus: Vec<f64>,
        slack: Option<f64>,
    },
    Convexity {
        name: Option<String>,
        measure: String,
        taus: [f64; 2],
        #[serde(default = "nine")]
        points: usize,
        #[serde(default)]
        potential: Vec<CosTerm>,
        slack: Option<f64>,
    },
    Pl {
        name: Option<String>,
        measures: [String; 2],
        taus: [f64; 2],
        lambda: f64,
        #[serde(default = "sixteen")]
        azimuth_samples: usize,
        slack: Option<f64>,
    },
    /// Residuals of the first-variation identity on seeded random pairs.
    Lemma26 {
        name: Option<String>,
        #[serde(default = "twenty")]
        pairs: usize,
        tau_range: [f64; 2],
        /// σ-samples for these solves, overriding `geodesic.samples`.
        samples: Option<usize>,
        slack: Option<f64>,
    },
    EnergyIdentity {
        name: Option<String>,
        #[serde(default = "twenty")]
        pairs: usize,
        tau_range: [f64; 2],
        /// σ-samples for these solves, overriding `geodesic.samples`.
        samples: Option<usize>,
        slack: Option<f64>,
    },
    Corollary25 {
        name: Option<String>,
        measures: [String; 2],
        taus: [f64; 2],
        slack: Option<f64>,
    },
    DNonneg {
        name: Option<String>,
        taus: Vec<f64>,
        slack: Option<f64>,
    },
}

fn nine() -> usize {
    9
}

fn sixteen() -> usize {
    16
}

fn twenty() -> usize {
    20
}

/// Slack for checks backed by a transport solve.
pub const TRANSPORT_SLACK: f64 = 1e-3;
/// Slack for checks backed by single geodesic identities.
pub const IDENTITY_SLACK: f64 = 1e-4;
pub const D_SLACK: f64 = 1e-8;
pub const DEFAULT_BASE_OFFSET: f64 = 1e-3;

impl MonitorConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            MonitorConfig::Theta { .. } => "theta",
            MonitorConfig::WEntropy { .. } => "w_entropy",
            MonitorConfig::ReducedVolume { .. } => "reduced_volume",
            MonitorConfig::Convexity { .. } => "convexity",
            MonitorConfig::Pl { .. } => "pl",
            MonitorConfig::Lemma26 { .. } => "lemma26",
            MonitorConfig::EnergyIdentity { .. } => "energy_identity",
            MonitorConfig::Corollary25 { .. } => "corollary25",
            MonitorConfig::DNonneg { .. } => "d_nonneg",
        }
    }

    fn explicit_name(&self) -> Option<&str> {
        match self {
            MonitorConfig::Theta { name, .. }
            | MonitorConfig::WEntropy { name, .. }
            | MonitorConfig::ReducedVolume { name, .. }
            | MonitorConfig::Convexity { name, .. }
            | MonitorConfig::Pl { name, .. }
            | MonitorConfig::Lemma26 { name, .. }
            | MonitorConfig::EnergyIdentity { name, .. }
            | MonitorConfig::Corollary25 { name, .. }
            | MonitorConfig::DNonneg { name, .. } => name.as_deref(),
        }
    }

    /// Explicit name, or `<kind>_<index>`.
    pub fn name(&self, index: usize) -> String {
        self.explicit_name().map(str::to_string).unwrap_or_else(|| format!("{}_{index}", self.kind()))
    }

    pub fn slack(&self) -> f64 {
        let (explicit, default) = match self {
            MonitorConfig::Theta { slack, .. }
            | MonitorConfig::WEntropy { slack, .. }
            | MonitorConfig::ReducedVolume { slack, .. }
            | MonitorConfig::Convexity { slack, .. }
            | MonitorConfig::Pl { slack, .. }
            | MonitorConfig::Corollary25 { slack, .. } => (slack, TRANSPORT_SLACK),
            MonitorConfig::Lemma26 { slack, .. } | MonitorConfig::EnergyIdentity { slack, .. } => {
                (slack, IDENTITY_SLACK)
            }
            MonitorConfig::DNonneg { slack, .. } => (slack, D_SLACK),
        };
        explicit.unwrap_or(default)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub plots: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("levolve-out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_dir(), plots: false }
    }
}

/// Parses and checks a configuration file. Relative table paths are
/// resolved against the file's directory.
pub fn validate_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let mut config = parse_config(&text)?;
    if let Some(table) = &config.geometry.table {
        if table.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            config.geometry.table = Some(base.join(table));
        }
    }
    check(&config)?;
    Ok(config)
}

/// Parses configuration text without semantic checks.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string().trim_end().to_string()))
}

/// Semantic checks: positive times inside the domain, known measures,
/// positive slacks, a well-defined metric.
pub fn check(config: &ExperimentConfig) -> Result<(), ConfigError> {
    let [lo, hi] = config.geometry.tau_domain;
    if !(lo > 0.0) {
        return Err(semantic("geometry.tau_domain", format!("tau_min must be positive, got {lo}")));
    }
    if !(hi > lo) || !hi.is_finite() {
        return Err(semantic("geometry.tau_domain", format!("need tau_min < tau_max, got [{lo}, {hi}]")));
    }
    build_geometry(config)?;
    if config.geodesic.samples < 32 {
        return Err(semantic("geodesic.samples", format!("need at least 32 samples, got {}", config.geodesic.samples)));
    }
    if !(config.geodesic.grad_tol > 0.0) {
        return Err(semantic("geodesic.grad_tol", "must be positive"));
    }

    let in_domain = |field: &str, t: f64| -> Result<(), ConfigError> {
        if !(t > 0.0) {
            Err(semantic(field, format!("times must be positive, got {t}")))
        } else if t < lo || t > hi {
            Err(semantic(field, format!("time {t} lies outside the domain [{lo}, {hi}]")))
        } else {
            Ok(())
        }
    };

    for (name, m) in &config.measures {
        let field = format!("measures.{name}");
        if let Some(t) = m.tau() {
            in_domain(&format!("{field}.tau"), t)?;
        }
        if let MeasureConfig::Bump { width, floor, .. } = *m {
            if !(width > 0.0) {
                return Err(semantic(format!("{field}.width"), "must be positive"));
            }
            if !(floor >= 0.0) {
                return Err(semantic(format!("{field}.floor"), "must be nonnegative"));
            }
        }
    }
    let start = |name: &str| config.measures.get(name).map(|m| m.tau().unwrap_or(lo));

    let mut names = std::collections::BTreeSet::new();
    for (k, m) in config.monitors.iter().enumerate() {
        let field = format!("monitors[{k}]");
        let name = m.name(k);
        if !names.insert(name.clone()) {
            return Err(semantic(format!("{field}.name"), format!("duplicate monitor name `{name}`")));
        }
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(semantic(format!("{field}.name"), "use letters, digits, `_` or `-`"));
        }
        if !(m.slack() > 0.0) {
            return Err(semantic(format!("{field}.slack"), format!("must be positive, got {}", m.slack())));
        }
        let measure_at = |key: &str, measure: &str, t: f64| -> Result<(), ConfigError> {
            let s = start(measure)
                .ok_or_else(|| semantic(format!("{field}.{key}"), format!("unknown measure `{measure}`")))?;
            if t < s {
                return Err(semantic(
                    format!("{field}.{key}"),
                    format!("measure `{measure}` starts at {s}, after the requested time {t}"),
                ));
            }
            Ok(())
        };
        let ordered = |key: &str, [a, b]: [f64; 2]| -> Result<(), ConfigError> {
            in_domain(&format!("{field}.{key}"), a)?;
            in_domain(&format!("{field}.{key}"), b)?;
            if !(a < b) {
                return Err(semantic(format!("{field}.{key}"), format!("need first < second, got [{a}, {b}]")));
            }
            Ok(())
        };
        let grid = |key: &str, taus: &[f64]| -> Result<(), ConfigError> {
            if taus.is_empty() {
                return Err(semantic(format!("{field}.{key}"), "must not be empty"));
            }
            for &t in taus {
                in_domain(&format!("{field}.{key}"), t)?;
            }
            if taus.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(semantic(format!("{field}.{key}"), "must be strictly increasing"));
            }
            Ok(())
        };
        match m {
            MonitorConfig::Theta { measures, tau_bar, s_grid, solver, epsilon, .. } => {
                ordered("tau_bar", *tau_bar)?;
                if s_grid.is_empty() || s_grid.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(semantic(format!("{field}.s_grid"), "must be nonempty and strictly increasing"));
                }
                for &s in s_grid {
                    let (t1, t2) = (tau_bar[0] * s.exp(), tau_bar[1] * s.exp());
                    in_domain(&format!("{field}.s_grid"), t1)?;
                    in_domain(&format!("{field}.s_grid"), t2)?;
                    measure_at("measures", &measures[0], t1)?;
                    measure_at("measures", &measures[1], t2)?;
                }
                match (solver, epsilon) {
                    (SolverKind::Entropic, Some(e)) if *e > 0.0 => {}
                    (SolverKind::Entropic, _) => {
                        return Err(semantic(format!("{field}.epsilon"), "entropic solver needs a positive epsilon"))
                    }
                    (SolverKind::Exact, Some(_)) => {
                        return Err(semantic(format!("{field}.epsilon"), "only used with solver = \"entropic\""))
                    }
                    (SolverKind::Exact, None) => {}
                }
            }
            MonitorConfig::WEntropy { measure, taus, .. } => {
                grid("taus", taus)?;
                measure_at("measure", measure, taus[0])?;
            }
            MonitorConfig::ReducedVolume { base_offset, taus, base_point, .. } => {
                grid("taus", taus)?;
                let eps = base_offset.unwrap_or(DEFAULT_BASE_OFFSET);
                if !(eps > 0.0) || !(eps < taus[0]) {
                    return Err(semantic(
                        format!("{field}.base_offset"),
                        format!("must lie in (0, {}), got {eps}", taus[0]),
                    ));
                }
                if !base_point.is_finite() {
                    return Err(semantic(format!("{field}.base_point"), "must be finite"));
                }
            }
            MonitorConfig::Convexity { measure, taus, points, potential, .. } => {
                ordered("taus", *taus)?;
                measure_at("measure", measure, taus[0])?;
                if *points < 3 {
                    return Err(semantic(format!("{field}.points"), "need at least 3 points for second differences"));
                }
                if potential.iter().any(|t| !t.amplitude.is_finite()) {
                    return Err(semantic(format!("{field}.potential"), "amplitudes must be finite"));
                }
            }
            MonitorConfig::Pl { measures, taus, lambda, azimuth_samples, .. } => {
                ordered("taus", *taus)?;
                measure_at("measures", &measures[0], taus[0])?;
                measure_at("measures", &measures[1], taus[1])?;
                if !(*lambda > 0.0 && *lambda < 1.0) {
                    return Err(semantic(format!("{field}.lambda"), format!("must lie in (0, 1), got {lambda}")));
                }
                if *azimuth_samples == 0 {
                    return Err(semantic(format!("{field}.azimuth_samples"), "must be positive"));
                }
            }
            MonitorConfig::Lemma26 { pairs, tau_range, samples, .. }
            | MonitorConfig::EnergyIdentity { pairs, tau_range, samples, .. } => {
                ordered("tau_range", *tau_range)?;
                if *pairs == 0 {
                    return Err(semantic(format!("{field}.pairs"), "must be positive"));
                }
                if samples.is_some_and(|m| m < 32) {
                    return Err(semantic(format!("{field}.samples"), "need at least 32 samples"));
                }
            }
            MonitorConfig::Corollary25 { measures, taus, .. } => {
                ordered("taus", *taus)?;
                measure_at("measures", &measures[0], taus[0])?;
                measure_at("measures", &measures[1], taus[1])?;
            }
            MonitorConfig::DNonneg { taus, .. } => grid("taus", taus)?,
        }
    }
    Ok(())
}

fn required(field: &str, value: Option<f64>, default: Option<f64>) -> Result<f64, ConfigError> {
    value.or(default).ok_or_else(|| semantic(format!("geometry.{field}"), "missing"))
}

/// The flow model named by the geometry section; parameters that the model
/// does not use are rejected.
pub fn flow_model(g: &GeometryConfig) -> Result<FlowModel, ConfigError> {
    let used: &[&str] = match g.model.as_str() {
        "static_flat_circle" => &["circumference"],
        "static_round_sphere" => &["radius"],
        "ricci_round_sphere" => &["initial_radius"],
        "dilaton_circle" => &["phi0_sq", "coupling", "winding"],
        "custom_tabulated" => &["table"],
        other => {
            return Err(semantic(
                "geometry.model",
                format!("unknown model `{other}` (see `levolve list-flows`)"),
            ))
        }
    };
    let given = [
        ("circumference", g.circumference.is_some()),
        ("radius", g.radius.is_some()),
        ("initial_radius", g.initial_radius.is_some()),
        ("phi0_sq", g.phi0_sq.is_some()),
        ("coupling", g.coupling.is_some()),
        ("winding", g.winding.is_some()),
        ("table", g.table.is_some()),
    ];
    if let Some((key, _)) = given.iter().find(|(k, set)| *set && !used.contains(k)) {
        return Err(semantic(format!("geometry.{key}"), format!("not a parameter of {}", g.model)));
    }
    Ok(match g.model.as_str() {
        "static_flat_circle" => FlowModel::StaticFlatCircle { circumference: required("circumference", g.circumference, Some(2.0 * PI))? },
        "static_round_sphere" => FlowModel::StaticRoundSphere { radius: required("radius", g.radius, Some(1.0))? },
        "ricci_round_sphere" => {
            FlowModel::RicciRoundSphere { initial_radius: required("initial_radius", g.initial_radius, Some(1.0))? }
        }
        "dilaton_circle" => FlowModel::DilatonCircle {
            phi0_sq: required("phi0_sq", g.phi0_sq, None)?,
            coupling: required("coupling", g.coupling, Some(1.0))?,
            winding: required("winding", g.winding, Some(1.0))?,
        },
        _ => {
            let path = g.table.as_ref().ok_or_else(|| semantic("geometry.table", "missing"))?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| semantic("geometry.table", format!("cannot read {}: {e}", path.display())))?;
            let table: TabulatedFlow = text.parse().map_err(|e| semantic("geometry.table", format!("{e}")))?;
            FlowModel::CustomTabulated(table)
        }
    })
}

pub fn build_geometry(config: &ExperimentConfig) -> Result<Geometry, ConfigError> {
    let g = &config.geometry;
    let model = flow_model(g)?;
    let [lo, hi] = g.tau_domain;
    Geometry::build(model, g.nodes, (lo, hi)).map_err(|e| {
        let field = match e {
            levolve_core::Error::Config(ref m) if m.contains("node count") => "geometry.nodes",
            levolve_core::Error::Domain(ref m) if m.contains("metric degenerates") => "geometry",
            levolve_core::Error::Domain(_) => "geometry.tau_domain",
            _ => "geometry",
        };
        semantic(field, e.to_string())
    })
}
