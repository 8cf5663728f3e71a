//! Acceptance suite. Prints one line per criterion and exits nonzero when any
//! criterion fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use levolve_core::diffusion::{evolve_density, DiffusionPath, DiffusionState};
use levolve_core::geometry::{FlowModel, Geometry, TangentVector};
use levolve_core::lgeodesic::{kappa_integral, l_distance_field, q_distance, q_partials, GeodesicOptions};
use levolve_core::monitors::{
    convexity_profile, energy_identity_check, entropy, lemma26_check, min_lbar_gap, pl_check, reduced_volume,
    theta_series, w_entropy, w_entropy_series, PairSample, PlOptions,
};
use levolve_core::transport::{ot_solve, renormalized_theta, DiscreteMeasure, Potential, SolverMode};
use levolve_validation::{
    circle_distance, flat_q, flat_reduced_volume, flat_uniform_theta, flat_uniform_w, has_negative_cycle,
    sphere_constant_kappa, sphere_uniform_density,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;

const DOMAIN: (f64, f64) = (0.5, 5.0);

fn flat(n: usize, domain: (f64, f64)) -> Geometry {
    Geometry::build(FlowModel::StaticFlatCircle { circumference: 2.0 * PI }, n, domain).unwrap()
}

fn sphere(n: usize, domain: (f64, f64)) -> Geometry {
    Geometry::build(FlowModel::RicciRoundSphere { initial_radius: 1.0 }, n, domain).unwrap()
}

fn dilaton(n: usize, domain: (f64, f64)) -> Geometry {
    Geometry::build(FlowModel::DilatonCircle { phi0_sq: 12.0, coupling: 1.0, winding: 1.0 }, n, domain).unwrap()
}

fn models(n: usize, domain: (f64, f64)) -> Vec<Geometry> {
    vec![flat(n, domain), sphere(n, domain), dilaton(n, domain)]
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn random_pairs(rng: &mut ChaCha8Rng, count: usize) -> Vec<PairSample> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let (x, y) = (rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI));
        if PI - circle_distance(x, y) < 0.1 {
            continue;
        }
        let tau1 = rng.gen_range(0.8..1.5);
        out.push(PairSample { x, tau1, y, tau2: tau1 + rng.gen_range(0.5..2.5) });
    }
    out
}

fn c1() -> Outcome {
    let g = flat(512, (0.1, 10.0));
    let o = GeodesicOptions::default().with_samples(64);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let (mut worst, mut done) = (0.0f64, 0);
    while done < 50 {
        let (x, y) = (rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI));
        let t1 = rng.gen_range(0.1..5.0);
        let t2 = t1 + rng.gen_range(0.1..5.0);
        let d = circle_distance(x, y);
        if d < 1e-3 || PI - d < 1e-3 {
            continue;
        }
        let q = q_distance(&g, x, t1, y, t2, &o).map_err(err)?.length;
        let exact = flat_q(x, t1, y, t2);
        worst = worst.max((q - exact).abs() / exact);
        done += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst < 1e-6 && secs < 30.0,
        format!("max rel err {worst:.2e} over 50 pairs (tol 1e-6), {secs:.2} s (limit 30 s)"),
    ))
}

fn c2() -> Outcome {
    let g = sphere(64, DOMAIN);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let node = rng.gen_range(0..64);
        let tau = rng.gen_range(0.5..4.0);
        let x = TangentVector::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        worst = worst.max(g.d_quantity(node, tau, &x).map_err(err)?.abs());
    }
    let taus = [0.5, 1.0, 2.0, 3.0, 4.0];
    let mut min = f64::INFINITY;
    for g in models(64, DOMAIN) {
        min = min.min(g.verify_d_nonneg(&taus, 1e-8).map_err(err)?.min);
    }
    Ok((
        worst <= 1e-8 && min >= -1e-8,
        format!("|D| on Ricci flow {worst:.2e} over 100 samples (tol 1e-8), min D over models {min:.3e} (>= -1e-8)"),
    ))
}

fn c3() -> Outcome {
    // The identity residual is the trapezoid error in σ, second order in M.
    let coarse = GeodesicOptions::default().with_samples(256);
    let fine = GeodesicOptions::default().with_samples(512);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_l, mut worst_e, mut worst_coarse) = (0.0f64, 0.0f64, 0.0f64);
    for g in models(64, DOMAIN) {
        let pairs = random_pairs(&mut rng, 20);
        let l = lemma26_check(&g, &pairs, &fine, 1e-4).map_err(err)?;
        let e = energy_identity_check(&g, &pairs, &fine, 1e-4).map_err(err)?;
        if !l.skipped.is_empty() || !e.skipped.is_empty() {
            return Ok((false, format!("{}: pairs skipped near the cut locus", g.model().name())));
        }
        worst_l = worst_l.max(l.series.worst_violation);
        worst_e = worst_e.max(e.series.worst_violation);
        worst_coarse = worst_coarse.max(lemma26_check(&g, &pairs, &coarse, 1e-4).map_err(err)?.series.worst_violation);
    }

    // First variations against central differences of Q itself.
    let h = 1e-3;
    let mut worst_fd = 0.0f64;
    for g in models(64, DOMAIN) {
        for p in random_pairs(&mut rng, 5) {
            let r = q_distance(&g, p.x, p.tau1, p.y, p.tau2, &fine).map_err(err)?;
            let d = q_partials(&g, &r).map_err(err)?;
            let q = |x: f64, t1: f64, y: f64, t2: f64| q_distance(&g, x, t1, y, t2, &fine).map(|r| r.length);
            let dt1 = (q(p.x, p.tau1 + h, p.y, p.tau2).map_err(err)? - q(p.x, p.tau1 - h, p.y, p.tau2).map_err(err)?) / (2.0 * h);
            let dt2 = (q(p.x, p.tau1, p.y, p.tau2 + h).map_err(err)? - q(p.x, p.tau1, p.y, p.tau2 - h).map_err(err)?) / (2.0 * h);
            let dx = (q(p.x + h, p.tau1, p.y, p.tau2).map_err(err)? - q(p.x - h, p.tau1, p.y, p.tau2).map_err(err)?) / (2.0 * h);
            let dy = (q(p.x, p.tau1, p.y + h, p.tau2).map_err(err)? - q(p.x, p.tau1, p.y - h, p.tau2).map_err(err)?) / (2.0 * h);
            let (a1, a2) = (g.line_sample(p.x, p.tau1).metric, g.line_sample(p.y, p.tau2).metric);
            for (fd, an) in [
                (dt1, d.d_tau1),
                (dt2, d.d_tau2),
                (dx, a1 * d.grad1.components[0]),
                (dy, a2 * d.grad2.components[0]),
            ] {
                worst_fd = worst_fd.max((fd - an).abs() / fd.abs().max(1.0));
            }
        }
    }
    Ok((
        worst_l < 1e-4 && worst_e < 1e-4 && worst_fd < 1e-4,
        format!(
            "sum-rule residual {worst_l:.2e}, energy residual {worst_e:.2e} (tol 1e-4, M=512, 60 pairs; \
             sum-rule {worst_coarse:.2e} at M=256); first-variation FD rel err {worst_fd:.2e} (tol 1e-4)"
        ),
    ))
}

fn c4() -> Outcome {
    let g = sphere(64, DOMAIN);
    let o = GeodesicOptions::default().with_samples(256);
    let r = q_distance(&g, 0.3, 1.0, 0.3, 4.0, &o).map_err(err)?;
    let k = kappa_integral(&g, &r).map_err(err)?;
    let oracle = sphere_constant_kappa(1.0, 4.0);
    let diff = (k - oracle).abs();
    Ok((
        diff < 1e-4,
        format!(
            "sphere constant-path kappa {k:.9} vs quadrature {oracle:.9}, |diff| {diff:.2e} (tol 1e-4); \
             quoted approximation -0.3066 is off by {:.1e}",
            (oracle + 0.3066).abs()
        ),
    ))
}

fn c5() -> Outcome {
    let mut worst_mass = 0.0f64;
    for g in models(64, DOMAIN) {
        let s = DiffusionState::bump(&g, 1.0, 0.5, 0.1, 1.0).map_err(err)?;
        worst_mass = worst_mass.max((s.mass(&g) - 1.0).abs());
        let mut state = s;
        for t in [1.5, 2.0, 3.0, 4.0] {
            state = evolve_density(&g, &state, t).map_err(err)?;
            worst_mass = worst_mass.max((state.mass(&g) - 1.0).abs());
        }
    }
    let g = sphere(64, DOMAIN);
    let u = DiffusionState::uniform(&g, 1.0).map_err(err)?;
    let u4 = evolve_density(&g, &u, 4.0).map_err(err)?;
    let exact = sphere_uniform_density(4.0);
    let rel = u4.u.iter().map(|v| (v - exact).abs() / exact).fold(0.0, f64::max);
    Ok((
        worst_mass < 1e-8 && rel < 1e-4,
        format!("max |mass - 1| {worst_mass:.2e} on [1,4] (tol 1e-8), uniform sphere at tau=4 rel err {rel:.2e} (tol 1e-4)"),
    ))
}

fn c6() -> Outcome {
    let o = GeodesicOptions::default();
    let s_grid = [-0.2, -0.1, 0.0, 0.1, 0.2];
    let mut times: Vec<f64> = s_grid.iter().flat_map(|s: &f64| [s.exp(), 4.0 * s.exp()]).collect();
    times.sort_by(f64::total_cmp);
    let mut worst = 0.0f64;
    for g in models(32, DOMAIN) {
        let a = DiffusionState::bump(&g, 1.0, 0.5, 0.1, 0.8).map_err(err)?;
        let b = DiffusionState::bump(&g, 3.0, 0.7, 0.2, 0.8).map_err(err)?;
        let pa = DiffusionPath::compute(&g, &a, &times).map_err(err)?;
        let pb = DiffusionPath::compute(&g, &b, &times).map_err(err)?;
        let th = theta_series(&g, &pa, &pb, 1.0, 4.0, &s_grid, SolverMode::Exact, &o, 1e-3).map_err(err)?;
        worst = worst.max(th.worst_violation);
    }

    let g = flat(16, (0.5, 6.0));
    let u = DiffusionState::uniform(&g, 0.6).map_err(err)?;
    let taus: Vec<f64> = (0..=54).map(|k| 0.6 + 0.1 * k as f64).collect();
    let path = DiffusionPath::compute(&g, &u, &taus).map_err(err)?;
    let mut closed = 0.0f64;
    for s in s_grid {
        let th = renormalized_theta(&g, &path, &path, 1.0, 4.0, s, SolverMode::Exact, &o).map_err(err)?;
        closed = closed.max((th - flat_uniform_theta(1.0, 4.0, s)).abs());
    }
    Ok((
        worst <= 1e-3 && closed < 1e-9,
        format!("worst increase of Theta(s) {worst:.2e} on 3 models (slack 1e-3), uniform flat closed-form err {closed:.2e} (tol 1e-9)"),
    ))
}

fn c7() -> Outcome {
    let taus: Vec<f64> = (0..=12).map(|k| 1.0 + 0.25 * k as f64).collect();
    let mut worst = 0.0f64;
    for g in models(64, DOMAIN) {
        let s = DiffusionState::bump(&g, 1.0, 0.5, 0.1, 1.0).map_err(err)?;
        let path = DiffusionPath::compute(&g, &s, &taus).map_err(err)?;
        worst = worst.max(w_entropy_series(&g, &path, &taus, 1e-3).map_err(err)?.worst_violation);
    }
    let g = flat(64, DOMAIN);
    let u = DiffusionState::uniform(&g, 1.0).map_err(err)?;
    let w = w_entropy(&g, &u.u, 1.0).map_err(err)?;
    let oracle = flat_uniform_w(1.0);
    Ok((
        worst <= 1e-3 && (w - oracle).abs() < 1e-4,
        format!("worst increase of W {worst:.2e} on 3 models (slack 1e-3), uniform flat W(1) {w:.6} vs {oracle:.6} (tol 1e-4)"),
    ))
}

fn c8() -> Outcome {
    let eps = 1e-3;
    let o = GeodesicOptions::default();
    let taus = [0.5, 1.0, 2.0, 4.0];
    let nodes: Vec<usize> = (0..64).collect();
    let mut gap_ok = true;
    let mut rv_flat = Vec::new();
    for g in models(64, (5e-4, 5.0)) {
        let field = l_distance_field(&g, 0.0, eps, &taus, &nodes, &o).map_err(err)?;
        gap_ok &= min_lbar_gap(&g, &field, 1e-3).map_err(err)?.passed;
        if matches!(g.model(), FlowModel::StaticFlatCircle { .. }) {
            for t in 0..taus.len() {
                rv_flat.push(reduced_volume(&g, &field, taus[t]).map_err(err)?);
            }
        }
    }
    let decreasing = rv_flat.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    let rv1 = rv_flat[1];
    let target = flat_reduced_volume(1.0, 0.0);
    let biased = flat_reduced_volume(1.0, eps);
    let diff = (rv1 - target).abs();
    Ok((
        gap_ok && decreasing && diff < 2e-3,
        format!(
            "flat reduced volume at tau=1 {rv1:.5} vs erf(pi/2) {target:.5}, |diff| {diff:.2e} (tol 2e-3); \
             with the base offset eps=1e-3 the exact value is {biased:.5}; \
             decreasing on {{0.5,1,2,4}}: {decreasing}; min Lbar gap decreasing on 3 models: {gap_ok}"
        ),
    ))
}

fn c9() -> Outcome {
    let o = GeodesicOptions::default();
    let mut worst = 0.0f64;
    let mut zero_flat = f64::NAN;
    for g in [flat(32, DOMAIN), sphere(32, DOMAIN)] {
        let s = DiffusionState::bump(&g, 1.0, 0.6, 0.2, 1.0).map_err(err)?;
        let nu = DiscreteMeasure::from_density(&g, &s.u, 1.0).map_err(err)?;
        for amp in [0.0, 0.1] {
            let phi = Potential::from_fn(&g, |x| amp * x.cos());
            let p = convexity_profile(&g, &nu, &phi, 4.0, 9, &o, 1e-3).map_err(err)?;
            worst = worst.max(p.series.worst_violation);
            if amp == 0.0 && matches!(g.model(), FlowModel::StaticFlatCircle { .. }) {
                let e0 = entropy(&g, &s.u, 1.0).map_err(err)?;
                zero_flat = p
                    .series
                    .abscissa
                    .iter()
                    .zip(&p.series.values)
                    .map(|(w, v)| (v - (e0 - w.ln())).abs())
                    .fold(0.0, f64::max);
            }
        }
    }
    Ok((
        worst <= 1e-3 && zero_flat < 1e-9,
        format!("worst negative second difference {worst:.2e} (slack 1e-3, 9 points), zero potential on flat vs E0 - ln w {zero_flat:.2e} (tol 1e-9)"),
    ))
}

fn c10() -> Outcome {
    let o = GeodesicOptions::default();
    let pl = PlOptions::default();
    let g = flat(16, DOMAIN);
    let ones = vec![1.0; 16];
    let r = pl_check(&g, &ones, &ones, 0.5, 1.0, 4.0, &o, &pl).map_err(err)?;
    let expected = (9.0f64 / 8.0).sqrt();
    let closed = (r.margin - expected).abs();

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut failures = 0;
    let mut min_margin = f64::INFINITY;
    for g in models(16, DOMAIN) {
        for _ in 0..5 {
            let mut profile = || -> Vec<f64> {
                (0..16).map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..2.0) }).collect()
            };
            let (u1, u2) = (profile(), profile());
            let lambda = rng.gen_range(0.2..0.8);
            let r = pl_check(&g, &u1, &u2, lambda, 1.0, 4.0, &o, &pl).map_err(err)?;
            failures += usize::from(!r.passed);
            min_margin = min_margin.min(r.margin);
        }
    }
    Ok((
        closed < 1e-3 && failures == 0,
        format!(
            "u=1 margin {:.6} vs sqrt(9/8) {expected:.6} (tol 1e-3); random profiles: {failures}/15 failed, min margin {min_margin:.4}",
            r.margin
        ),
    ))
}

fn random_measure(rng: &mut ChaCha8Rng, n: usize) -> DiscreteMeasure {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|v| v / total).collect();
    w[0] += 1.0 - w.iter().sum::<f64>();
    DiscreteMeasure::new((0..n).map(|i| i as f64).collect(), w, 1.0).unwrap()
}

fn c11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst_cert, mut cycles, mut not_monotone) = (0.0f64, 0, 0);
    let mut last_gap = 0.0f64;
    for _ in 0..10 {
        let (m, n) = (rng.gen_range(2..=12), rng.gen_range(2..=12));
        let mu = random_measure(&mut rng, m);
        let nu = random_measure(&mut rng, n);
        let cost: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(0.0..3.0)).collect()).collect();
        let plan = ot_solve(&mu, &nu, &cost, SolverMode::Exact).map_err(err)?;
        let scale = cost.iter().flatten().fold(1.0f64, |a, c| a.max(c.abs()));
        worst_cert = worst_cert.max(plan.certificate_violation().unwrap_or(f64::INFINITY) / scale);
        cycles += usize::from(has_negative_cycle(&plan.pi, &cost, 1e-10 * scale));
        let gaps = [1e-1, 1e-2, 1e-3]
            .iter()
            .map(|&e| ot_solve(&mu, &nu, &cost, SolverMode::Entropic(e)).map(|p| p.total_cost - plan.total_cost))
            .collect::<Result<Vec<f64>, _>>()
            .map_err(err)?;
        not_monotone += usize::from(!(gaps[0] >= gaps[1] && gaps[1] >= gaps[2]));
        last_gap = last_gap.max(gaps[2]);
    }
    Ok((
        worst_cert <= 1e-9 && cycles == 0 && not_monotone == 0 && last_gap < 1e-2,
        format!(
            "dual certificate {worst_cert:.2e} (tol 1e-9), negative cycles {cycles}/10; \
             entropic gap non-monotone {not_monotone}/10, gap at eps=1e-3 {last_gap:.2e}"
        ),
    ))
}

fn c12(suite_start: Instant) -> Outcome {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../cli/configs/acceptance.toml");
    let mut cfg = levolve::validate_config(&path).map_err(err)?;
    cfg.seed = 7;
    let tmp = tempfile::tempdir().map_err(err)?;
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let report = levolve::run_experiment(&cfg);
        if !report.complete {
            return Ok((false, format!("bundled experiment did not complete: {:?}", report.error)));
        }
        let dir = tmp.path().join(name);
        levolve::write_artifacts(&report, &dir, false).map_err(err)?;
        let mut csvs: Vec<(String, Vec<u8>)> = std::fs::read_dir(&dir)
            .map_err(err)?
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|e| e == "csv"))
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
            .collect();
        csvs.sort();
        runs.push((csvs, report.all_passed()));
    }
    let identical = runs[0].0 == runs[1].0 && !runs[0].0.is_empty();
    let secs = suite_start.elapsed().as_secs_f64();
    Ok((
        identical && secs < 600.0,
        format!(
            "bundled experiment twice with seed 7: {} CSV files, byte-identical {identical}, verdict {}; suite wall time {secs:.1} s (limit 600 s)",
            runs[0].0.len(),
            if runs[0].1 { "PASS" } else { "FAIL" }
        ),
    ))
}

fn main() {
    let start = Instant::now();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("flat-circle Q against closed form", Box::new(c1)),
        ("D vanishes on Ricci flow and is nonnegative", Box::new(c2)),
        ("geodesic identities and first variations", Box::new(c3)),
        ("kappa on a constant sphere path", Box::new(c4)),
        ("heat flow mass and uniform sphere density", Box::new(c5)),
        ("Theta(s) monotone and closed form", Box::new(c6)),
        ("W monotone and uniform flat value", Box::new(c7)),
        ("reduced volume and Lbar gap", Box::new(c8)),
        ("convexity profile", Box::new(c9)),
        ("PL inequality", Box::new(c10)),
        ("optimal transport solvers", Box::new(c11)),
        ("reproducible CLI experiment", Box::new(move || c12(start))),
    ];
    let mut failed = 0;
    for (k, (title, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (passed, detail) = match catch_unwind(AssertUnwindSafe(run)) {
            Ok(Ok(v)) => v,
            Ok(Err(e)) => (false, format!("error: {e}")),
            Err(_) => (false, "panicked".to_string()),
        };
        failed += usize::from(!passed);
        println!(
            "[{}] C{} {title}: {detail} [{:.1} s]",
            if passed { "PASS" } else { "FAIL" },
            k + 1,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
