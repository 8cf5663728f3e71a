use super::{q_batch, GeodesicOptions, QQuery};
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::io::fmt_g17;

/// `L(y, τ) = Q(x, ε; y, τ)` on a grid of mesh nodes and times, with the
/// reduced distance `L̄ = 2√τ·L`.
#[derive(Clone, Debug, PartialEq)]
pub struct LDistanceField {
    pub base_point: f64,
    pub base_tau: f64,
    pub taus: Vec<f64>,
    pub nodes: Vec<usize>,
    /// `l[t][j]` at time `taus[t]` and node `nodes[j]`; NaN where invalid.
    pub l: Vec<Vec<f64>>,
    pub valid: Vec<Vec<bool>>,
}

impl LDistanceField {
    pub fn l(&self, t: usize, j: usize) -> Result<f64> {
        if self.valid[t][j] {
            Ok(self.l[t][j])
        } else {
            Err(Error::InvalidFieldEntry { node: self.nodes[j], tau: self.taus[t] })
        }
    }

    pub fn lbar(&self, t: usize, j: usize) -> Result<f64> {
        self.l(t, j).map(|l| 2.0 * self.taus[t].sqrt() * l)
    }

    pub fn lbar_row(&self, t: usize) -> Result<Vec<f64>> {
        (0..self.nodes.len()).map(|j| self.lbar(t, j)).collect()
    }

    pub fn all_valid(&self) -> bool {
        self.valid.iter().flatten().all(|&v| v)
    }

    /// CSV with columns `node_index,tau,L,Lbar,valid`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node_index,tau,L,Lbar,valid\n");
        for (t, &tau) in self.taus.iter().enumerate() {
            for (j, &node) in self.nodes.iter().enumerate() {
                let l = self.l[t][j];
                out.push_str(&format!(
                    "{node},{},{},{},{}\n",
                    fmt_g17(tau),
                    fmt_g17(l),
                    fmt_g17(2.0 * tau.sqrt() * l),
                    self.valid[t][j]
                ));
            }
        }
        out
    }
}

/// Solves every grid entry (in parallel). Entries whose minimization fails
/// are marked invalid instead of aborting the whole field.
pub fn l_distance_field(
    geom: &Geometry,
    x: f64,
    base_eps: f64,
    tau_grid: &[f64],
    node_grid: &[usize],
    opts: &GeodesicOptions,
) -> Result<LDistanceField> {
    let min_tau = tau_grid.iter().copied().fold(f64::INFINITY, f64::min);
    if !(base_eps > 0.0) || !(base_eps < min_tau) {
        return Err(Error::Domain(format!(
            "base offset {base_eps} must lie in (0, {min_tau})"
        )));
    }
    geom.check_tau(base_eps)?;
    for &tau in tau_grid {
        geom.check_tau(tau)?;
    }
    if let Some(&bad) = node_grid.iter().find(|&&j| j >= geom.nodes()) {
        return Err(Error::Domain(format!("node {bad} out of range 0..{}", geom.nodes())));
    }
    let queries: Vec<QQuery> = tau_grid
        .iter()
        .flat_map(|&tau| {
            node_grid.iter().map(move |&j| QQuery { x, tau1: base_eps, y: geom.coord(j), tau2: tau })
        })
        .collect();
    let values = q_batch(geom, &queries, opts);
    let width = node_grid.len();
    let mut l = vec![vec![f64::NAN; width]; tau_grid.len()];
    let mut valid = vec![vec![false; width]; tau_grid.len()];
    for (k, v) in values.into_iter().enumerate() {
        if let Ok(v) = v {
            if v.is_finite() {
                l[k / width][k % width] = v;
                valid[k / width][k % width] = true;
            }
        }
    }
    Ok(LDistanceField {
        base_point: x,
        base_tau: base_eps,
        taus: tau_grid.to_vec(),
        nodes: node_grid.to_vec(),
        l,
        valid,
    })
}
