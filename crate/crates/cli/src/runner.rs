//! Executes the monitors of a configuration and writes their artifacts.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use levolve_core::diffusion::{evolve_density, DiffusionPath, DiffusionState};
use levolve_core::geometry::Geometry;
use levolve_core::io::fmt_g17;
use levolve_core::lgeodesic::{l_distance_field, GeodesicOptions};
use levolve_core::monitors::{
    convexity_profile, corollary25_check, energy_identity_check, lemma26_check, min_lbar_gap, pl_check,
    reduced_volume_series, theta_series, w_entropy_series, AbscissaKind, MonitorSeries, PairSample, PlOptions,
    Property,
};
use levolve_core::transport::{DiscreteMeasure, Potential, SolverMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{build_geometry, ExperimentConfig, MeasureConfig, MonitorConfig, SolverKind, DEFAULT_BASE_OFFSET};
use crate::plot::svg_polyline;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq)]
pub struct MonitorOutcome {
    pub name: String,
    pub kind: &'static str,
    pub series: Vec<MonitorSeries>,
    /// Extra tables written next to the series, as `(file stem, csv)`.
    pub tables: Vec<(String, String)>,
    pub notes: Vec<String>,
    pub wall_time: f64,
}

impl MonitorOutcome {
    pub fn passed(&self) -> bool {
        self.series.iter().all(|s| s.passed)
    }

    /// File stem of each series: the monitor name alone when it has one
    /// series, `<monitor>_<series>` otherwise.
    pub fn series_stems(&self) -> Vec<String> {
        if self.series.len() == 1 {
            vec![self.name.clone()]
        } else {
            self.series.iter().map(|s| format!("{}_{}", self.name, s.name)).collect()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub version: String,
    pub seed: u64,
    pub config_echo: String,
    pub monitors: Vec<MonitorOutcome>,
    /// False when a monitor aborted; `monitors` then holds the ones before it.
    pub complete: bool,
    pub error: Option<String>,
    pub wall_time: f64,
}

impl RunReport {
    pub fn all_passed(&self) -> bool {
        self.complete && self.monitors.iter().all(MonitorOutcome::passed)
    }

    /// 0 when every verdict passes, 1 when some fail, 2 when the run aborted.
    pub fn exit_code(&self) -> i32 {
        if !self.complete {
            2
        } else if self.all_passed() {
            0
        } else {
            1
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "levolve {}", self.version);
        match &self.error {
            None => {
                let _ = writeln!(out, "status: complete");
            }
            Some(e) => {
                let _ = writeln!(out, "status: INCOMPLETE ({e})");
            }
        }
        let passed = self.monitors.iter().filter(|m| m.passed()).count();
        let _ = writeln!(out, "seed: {}", self.seed);
        let _ = writeln!(
            out,
            "monitors: {} run, {passed} passed, {} failed",
            self.monitors.len(),
            self.monitors.len() - passed
        );
        let _ = writeln!(out, "verdict: {}", if self.all_passed() { "PASS" } else { "FAIL" });
        let _ = writeln!(out, "wall time: {:.3} s", self.wall_time);
        for m in &self.monitors {
            let _ = writeln!(out);
            let _ = writeln!(
                out,
                "[{}] {} ({}) {:.3} s",
                if m.passed() { "pass" } else { "FAIL" },
                m.name,
                m.kind,
                m.wall_time
            );
            for s in &m.series {
                let _ = writeln!(
                    out,
                    "    {}: {} over {}, {} points, slack {}, worst violation {}",
                    s.name,
                    s.property.label(),
                    s.abscissa_kind.label(),
                    s.values.len(),
                    fmt_g17(s.slack),
                    fmt_g17(s.worst_violation)
                );
            }
            for n in &m.notes {
                let _ = writeln!(out, "    note: {n}");
            }
        }
        let _ = writeln!(out, "\n--- config ---");
        out.push_str(&self.config_echo);
        out
    }

    pub fn summary_json(&self) -> Value {
        json!({
            "tool": "levolve",
            "version": self.version,
            "complete": self.complete,
            "error": self.error,
            "seed": self.seed,
            "passed": self.all_passed(),
            "wall_time_s": self.wall_time,
            "monitors": self.monitors.iter().map(|m| json!({
                "name": m.name,
                "kind": m.kind,
                "passed": m.passed(),
                "wall_time_s": m.wall_time,
                "notes": m.notes,
                "series": m.series.iter().map(|s| json!({
                    "name": s.name,
                    "abscissa": s.abscissa_kind.label(),
                    "property": s.property.label(),
                    "slack": number(s.slack),
                    "verdict": if s.passed { "pass" } else { "fail" },
                    "worst_violation": number(s.worst_violation),
                })).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })
    }
}

/// Non-finite numbers become strings, since JSON has no literal for them.
fn number(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(fmt_g17(x))
    }
}

fn geodesic_options(config: &ExperimentConfig) -> GeodesicOptions {
    GeodesicOptions {
        samples: config.geodesic.samples,
        grad_tol: config.geodesic.grad_tol,
        seed: config.seed,
        ..GeodesicOptions::default()
    }
}

/// Mesh node nearest to `x`; on spheres, the nearest upper-half polar band.
fn nearest_node(geom: &Geometry, x: f64) -> usize {
    let n = geom.nodes();
    let h = geom.spacing();
    if geom.model().is_sphere() {
        let t = x.rem_euclid(2.0 * PI);
        let psi = t.min(2.0 * PI - t);
        ((psi / h - 0.5).round().max(0.0) as usize).min(n / 2 - 1)
    } else {
        ((geom.wrap(x - geom.coord(0)) / h).round() as usize) % n
    }
}

fn initial_state(geom: &Geometry, m: &MeasureConfig) -> Result<DiffusionState> {
    let tau = m.tau().unwrap_or(geom.tau_domain().0);
    Ok(match *m {
        MeasureConfig::Uniform { .. } => DiffusionState::uniform(geom, tau)?,
        MeasureConfig::Bump { center, width, floor, .. } => DiffusionState::bump(geom, center, width, floor, tau)?,
        MeasureConfig::TwoPoint { a, b, .. } => {
            let w = geom.volume_weights(tau)?;
            let n = geom.nodes();
            let mut u = vec![0.0; n];
            for x in [a, b] {
                let k = nearest_node(geom, x);
                let targets: Vec<usize> = if geom.model().is_sphere() { vec![k, n - 1 - k] } else { vec![k] };
                let share = 0.5 / targets.len() as f64;
                for t in targets {
                    u[t] += share / w.values[t];
                }
            }
            DiffusionState::new(geom, u, tau)?
        }
    })
}

struct Run<'a> {
    config: &'a ExperimentConfig,
    geom: &'a Geometry,
    opts: GeodesicOptions,
}

impl Run<'_> {
    fn measure(&self, name: &str) -> Result<DiffusionState> {
        let m = self.config.measures.get(name).ok_or_else(|| anyhow!("unknown measure `{name}`"))?;
        initial_state(self.geom, m)
    }

    fn density_at(&self, name: &str, tau: f64) -> Result<Vec<f64>> {
        Ok(evolve_density(self.geom, &self.measure(name)?, tau)?.u)
    }

    fn path(&self, name: &str, taus: &[f64]) -> Result<DiffusionPath> {
        Ok(DiffusionPath::compute(self.geom, &self.measure(name)?, taus)?)
    }

    fn discrete(&self, name: &str, tau: f64) -> Result<DiscreteMeasure> {
        Ok(DiscreteMeasure::from_density(self.geom, &self.density_at(name, tau)?, tau)?)
    }
}

/// `count` endpoint pairs with times in `range`, reproducible from `seed`.
pub fn random_pairs(seed: u64, count: usize, range: [f64; 2]) -> Vec<PairSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_gap = 0.05 * (range[1] - range[0]);
    (0..count)
        .map(|_| loop {
            let (a, b) = (rng.gen_range(range[0]..=range[1]), rng.gen_range(range[0]..=range[1]));
            let (tau1, tau2) = if a < b { (a, b) } else { (b, a) };
            let (x, y) = (rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI));
            if tau2 - tau1 >= min_gap {
                break PairSample { x, tau1, y, tau2 };
            }
        })
        .collect()
}

fn single(name: &str, x: f64, value: f64, property: Property, slack: f64) -> MonitorSeries {
    MonitorSeries::new(name, AbscissaKind::Index, vec![x], vec![value], property, slack)
}

fn run_monitor(cx: &Run, index: usize, m: &MonitorConfig) -> Result<MonitorOutcome> {
    let start = Instant::now();
    let geom = cx.geom;
    let slack = m.slack();
    let mut tables = Vec::new();
    let mut notes = Vec::new();
    let name = m.name(index);
    let series = match m {
        MonitorConfig::Theta { measures, tau_bar, s_grid, solver, epsilon, .. } => {
            let mode = match solver {
                SolverKind::Exact => SolverMode::Exact,
                SolverKind::Entropic => SolverMode::Entropic(epsilon.unwrap_or(1e-2)),
            };
            if let SolverMode::Entropic(e) = mode {
                notes.push(format!("entropic transport, epsilon {}", fmt_g17(e)));
            }
            let times = |t: f64| s_grid.iter().map(|s| t * s.exp()).collect::<Vec<f64>>();
            let p1 = cx.path(&measures[0], &times(tau_bar[0]))?;
            let p2 = cx.path(&measures[1], &times(tau_bar[1]))?;
            vec![theta_series(geom, &p1, &p2, tau_bar[0], tau_bar[1], s_grid, mode, &cx.opts, slack)?]
        }
        MonitorConfig::WEntropy { measure, taus, .. } => {
            let path = cx.path(measure, taus)?;
            vec![w_entropy_series(geom, &path, taus, slack)?]
        }
        MonitorConfig::ReducedVolume { base_point, base_offset, taus, .. } => {
            let eps = base_offset.unwrap_or(DEFAULT_BASE_OFFSET);
            let nodes: Vec<usize> = (0..geom.nodes()).collect();
            let field = l_distance_field(geom, *base_point, eps, taus, &nodes, &cx.opts)?;
            if !field.all_valid() {
                return Err(anyhow!("distance field has failed entries"));
            }
            notes.push(format!("base point {} at offset {}", fmt_g17(*base_point), fmt_g17(eps)));
            tables.push((format!("{name}_field"), field.to_csv()));
            vec![reduced_volume_series(geom, &field, slack)?, min_lbar_gap(geom, &field, slack)?]
        }
        MonitorConfig::Convexity { measure, taus, points, potential, .. } => {
            let nu1 = cx.discrete(measure, taus[0])?;
            let terms: Vec<(f64, f64)> = potential.iter().map(|t| (t.amplitude, t.harmonic as f64)).collect();
            let phi = Potential::from_fn(geom, |x| terms.iter().map(|(a, k)| a * (k * x).cos()).sum());
            let p = convexity_profile(geom, &nu1, &phi, taus[1], *points, &cx.opts, slack)?;
            vec![p.series]
        }
        MonitorConfig::Pl { measures, taus, lambda, azimuth_samples, .. } => {
            let u1 = cx.density_at(&measures[0], taus[0])?;
            let u2 = cx.density_at(&measures[1], taus[1])?;
            let pl = PlOptions { azimuth_samples: *azimuth_samples, slack };
            let r = pl_check(geom, &u1, &u2, *lambda, taus[0], taus[1], &cx.opts, &pl)?;
            notes.push(format!(
                "lhs {}, rhs {}, margin {}, tau_bar {}, {} geodesics",
                fmt_g17(r.lhs),
                fmt_g17(r.rhs),
                fmt_g17(r.margin),
                fmt_g17(r.tau_bar),
                r.geodesics
            ));
            notes.push("series value is lhs - rhs; slack is the relative slack times rhs".into());
            let mut v = String::from("node_index,v\n");
            for (i, x) in r.v.iter().enumerate() {
                let _ = writeln!(v, "{i},{}", fmt_g17(*x));
            }
            tables.push((format!("{name}_v"), v));
            vec![single("pl_excess", *lambda, r.lhs - r.rhs, Property::GeBound(0.0), slack * r.rhs)]
        }
        MonitorConfig::Lemma26 { pairs, tau_range, samples, .. }
        | MonitorConfig::EnergyIdentity { pairs, tau_range, samples, .. } => {
            let opts = cx.opts.clone().with_samples(samples.unwrap_or(cx.opts.samples));
            let pairs = random_pairs(cx.config.seed.wrapping_add(index as u64), *pairs, *tau_range);
            let check = if matches!(m, MonitorConfig::Lemma26 { .. }) {
                lemma26_check(geom, &pairs, &opts, slack)?
            } else {
                energy_identity_check(geom, &pairs, &opts, slack)?
            };
            if !check.skipped.is_empty() {
                notes.push(format!("{} near-cut pairs skipped: {:?}", check.skipped.len(), check.skipped));
            }
            vec![check.series]
        }
        MonitorConfig::Corollary25 { measures, taus, .. } => {
            let nu1 = cx.discrete(&measures[0], taus[0])?;
            let nu2 = cx.discrete(&measures[1], taus[1])?;
            let r = corollary25_check(geom, &nu1, &nu2, &cx.opts, slack)?;
            notes.push("applied to arbitrary density pairs rather than geodesic endpoints".into());
            notes.push(format!(
                "lhs {}, bound {}, {} plan entries, near-cut mass {}",
                fmt_g17(r.lhs),
                fmt_g17(r.bound),
                r.pairs,
                fmt_g17(r.skipped_mass)
            ));
            vec![single("corollary25", 0.0, r.lhs, Property::LeBound(r.bound), slack)]
        }
        MonitorConfig::DNonneg { taus, .. } => {
            let values = taus
                .iter()
                .map(|&t| Ok(geom.verify_d_nonneg(&[t], slack)?.min))
                .collect::<Result<Vec<f64>>>()?;
            vec![MonitorSeries::new("d_min", AbscissaKind::Tau, taus.clone(), values, Property::GeBound(0.0), slack)]
        }
    };
    Ok(MonitorOutcome { name, kind: m.kind(), series, tables, notes, wall_time: start.elapsed().as_secs_f64() })
}

/// Runs every monitor (in parallel) and collects verdicts in config order.
/// The first monitor that errors, in config order, ends the report.
pub fn run_experiment(config: &ExperimentConfig) -> RunReport {
    let start = Instant::now();
    let mut report = RunReport {
        version: VERSION.to_string(),
        seed: config.seed,
        config_echo: toml::to_string(config).unwrap_or_else(|e| format!("# config echo unavailable: {e}\n")),
        monitors: Vec::new(),
        complete: true,
        error: None,
        wall_time: 0.0,
    };
    let geom = match build_geometry(config) {
        Ok(g) => g,
        Err(e) => {
            report.complete = false;
            report.error = Some(format!("geometry: {e}"));
            report.wall_time = start.elapsed().as_secs_f64();
            return report;
        }
    };
    let cx = Run { config, geom: &geom, opts: geodesic_options(config) };
    let results: Vec<Result<MonitorOutcome>> = config
        .monitors
        .par_iter()
        .enumerate()
        .map(|(k, m)| run_monitor(&cx, k, m).with_context(|| format!("monitor `{}`", m.name(k))))
        .collect();
    for r in results {
        match r {
            Ok(o) => report.monitors.push(o),
            Err(e) => {
                report.complete = false;
                report.error = Some(format!("{e:#}"));
                break;
            }
        }
    }
    report.wall_time = start.elapsed().as_secs_f64();
    report
}

/// Writes `<stem>.csv` per series and table, `report.txt`, `summary.json`
/// and, when asked, `plot_<stem>.svg`.
pub fn write_artifacts(report: &RunReport, dir: &Path, plots: bool) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let write = |file: String, body: &str| -> Result<()> {
        let path = dir.join(file);
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
    };
    for m in &report.monitors {
        for (stem, s) in m.series_stems().into_iter().zip(&m.series) {
            write(format!("{stem}.csv"), &s.to_csv())?;
            if plots {
                write(format!("plot_{stem}.svg"), &svg_polyline(&stem, s))?;
            }
        }
        for (stem, csv) in &m.tables {
            write(format!("{stem}.csv"), csv)?;
        }
    }
    write("report.txt".into(), &report.to_text())?;
    write("summary.json".into(), &(serde_json::to_string_pretty(&report.summary_json())? + "\n"))?;
    Ok(())
}
