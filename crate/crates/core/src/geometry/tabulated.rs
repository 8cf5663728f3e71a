//! One-dimensional flows given as per-node, per-time tables of `g_θθ` and
//! `S_θθ`.
//!
//! Plain-text format:
//!
//! ```text
//! nodes=<N> taus=<τ0,τ1,...>
//! <node_index> <tau_index> <g_θθ> <S_θθ>
//! ...
//! ```
//!
//! Values between table times are interpolated linearly in `τ`; between
//! nodes, by periodic Catmull–Rom splines.

use std::str::FromStr;

use super::{periodic_cubic, LineSample};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedFlow {
    taus: Vec<f64>,
    /// `g[k][i]` at table time `k`, node `i`.
    g: Vec<Vec<f64>>,
    s: Vec<Vec<f64>>,
}

impl TabulatedFlow {
    pub fn new(taus: Vec<f64>, g: Vec<Vec<f64>>, s: Vec<Vec<f64>>) -> Result<Self> {
        let t = TabulatedFlow { taus, g, s };
        t.validate()?;
        Ok(t)
    }

    pub fn nodes(&self) -> usize {
        self.g.first().map_or(0, Vec::len)
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn tau_range(&self) -> (f64, f64) {
        (self.taus[0], *self.taus.last().unwrap())
    }

    pub(super) fn validate(&self) -> Result<()> {
        if self.taus.len() < 2 {
            return Err(Error::Config("table needs at least two times".into()));
        }
        if !(self.taus[0] > 0.0) || self.taus.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("table times must be positive and increasing".into()));
        }
        let n = self.nodes();
        if self.g.len() != self.taus.len() || self.s.len() != self.taus.len() {
            return Err(Error::Config("table shape does not match its time list".into()));
        }
        for (k, (gk, sk)) in self.g.iter().zip(&self.s).enumerate() {
            if gk.len() != n || sk.len() != n {
                return Err(Error::Config(format!("table time {k} has a ragged row")));
            }
            if let Some(i) = gk.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(Error::Domain(format!(
                    "metric degenerates at node {i}, tau {}",
                    self.taus[k]
                )));
            }
            if sk.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("non-finite S at table time {k}")));
            }
        }
        Ok(())
    }

    /// Bracketing table interval and linear weight for `tau`.
    fn locate(&self, tau: f64) -> (usize, f64) {
        let last = self.taus.len() - 1;
        let k = match self.taus.partition_point(|&t| t <= tau) {
            0 => 0,
            p => (p - 1).min(last - 1),
        };
        let w = (tau - self.taus[k]) / (self.taus[k + 1] - self.taus[k]);
        (k, w)
    }

    fn lerp(table: &[Vec<f64>], k: usize, w: f64, node: usize) -> f64 {
        (1.0 - w) * table[k][node] + w * table[k + 1][node]
    }

    pub(super) fn g_node(&self, node: usize, tau: f64) -> f64 {
        let (k, w) = self.locate(tau);
        Self::lerp(&self.g, k, w, node)
    }

    pub(super) fn s_node(&self, node: usize, tau: f64) -> f64 {
        let (k, w) = self.locate(tau);
        Self::lerp(&self.s, k, w, node)
    }

    pub(super) fn trace_node(&self, node: usize, tau: f64) -> f64 {
        self.s_node(node, tau) / self.g_node(node, tau)
    }

    fn trace_at_table(&self, k: usize, node: usize) -> f64 {
        self.s[k][node] / self.g[k][node]
    }

    /// Derivative in `τ` of the trace at table time `k`: three-point
    /// Lagrange differences (second order, one-sided at the table ends), or a
    /// plain difference when the table has only two times.
    fn dtau_trace_at_table(&self, k: usize, node: usize) -> f64 {
        let last = self.taus.len() - 1;
        if last == 1 {
            return (self.trace_at_table(1, node) - self.trace_at_table(0, node))
                / (self.taus[1] - self.taus[0]);
        }
        let c = k.clamp(1, last - 1);
        let (t0, t1, t2) = (self.taus[c - 1], self.taus[c], self.taus[c + 1]);
        let (f0, f1, f2) =
            (self.trace_at_table(c - 1, node), self.trace_at_table(c, node), self.trace_at_table(c + 1, node));
        let t = self.taus[k];
        f0 * (2.0 * t - t1 - t2) / ((t0 - t1) * (t0 - t2))
            + f1 * (2.0 * t - t0 - t2) / ((t1 - t0) * (t1 - t2))
            + f2 * (2.0 * t - t0 - t1) / ((t2 - t0) * (t2 - t1))
    }

    pub(super) fn dtau_trace_node(&self, node: usize, tau: f64) -> f64 {
        let (k, w) = self.locate(tau);
        (1.0 - w) * self.dtau_trace_at_table(k, node) + w * self.dtau_trace_at_table(k + 1, node)
    }

    pub(super) fn line_sample(&self, x: f64, h: f64, tau: f64) -> LineSample {
        let n = self.nodes();
        let (k, w) = self.locate(tau);
        let g: Vec<f64> = (0..n).map(|i| Self::lerp(&self.g, k, w, i)).collect();
        let s: Vec<f64> = (0..n).map(|i| Self::lerp(&self.s, k, w, i)).collect();
        let tr: Vec<f64> = g.iter().zip(&s).map(|(g, s)| s / g).collect();
        let dtr: Vec<f64> = (0..n)
            .map(|i| (1.0 - w) * self.dtau_trace_at_table(k, i) + w * self.dtau_trace_at_table(k + 1, i))
            .collect();
        let (metric, metric_dx) = periodic_cubic(&g, h, x);
        let (trace, trace_dx) = periodic_cubic(&tr, h, x);
        let (dtau_trace, _) = periodic_cubic(&dtr, h, x);
        let (s_along, _) = periodic_cubic(&s, h, x);
        LineSample { metric, metric_dx, trace, trace_dx, dtau_trace, s_along }
    }
}

impl FromStr for TabulatedFlow {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let (hline, header) =
            lines.next().ok_or(Error::Parse { line: 1, msg: "empty table".into() })?;
        let mut nodes = None;
        let mut taus = None;
        for tok in header.split_whitespace() {
            let (key, value) = tok.split_once('=').ok_or_else(|| Error::Parse {
                line: hline,
                msg: format!("expected key=value, found `{tok}`"),
            })?;
            match key {
                "nodes" => {
                    nodes = Some(value.parse::<usize>().map_err(|e| Error::Parse {
                        line: hline,
                        msg: format!("nodes: {e}"),
                    })?)
                }
                "taus" => {
                    let parsed: std::result::Result<Vec<f64>, _> =
                        value.split(',').map(str::parse::<f64>).collect();
                    taus = Some(parsed.map_err(|e| Error::Parse {
                        line: hline,
                        msg: format!("taus: {e}"),
                    })?)
                }
                other => {
                    return Err(Error::Parse { line: hline, msg: format!("unknown key `{other}`") })
                }
            }
        }
        let nodes = nodes.ok_or(Error::Parse { line: hline, msg: "missing nodes=".into() })?;
        let taus: Vec<f64> =
            taus.ok_or(Error::Parse { line: hline, msg: "missing taus=".into() })?;

        let mut g = vec![vec![f64::NAN; nodes]; taus.len()];
        let mut s = vec![vec![f64::NAN; nodes]; taus.len()];
        for (line, row) in lines {
            let fields: Vec<&str> = row.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected 4 fields (node, tau index, g, S), found {}", fields.len()),
                });
            }
            let perr = |msg: String| Error::Parse { line, msg };
            let i: usize = fields[0].parse().map_err(|e| perr(format!("node index: {e}")))?;
            let k: usize = fields[1].parse().map_err(|e| perr(format!("tau index: {e}")))?;
            let gv: f64 = fields[2].parse().map_err(|e| perr(format!("g: {e}")))?;
            let sv: f64 = fields[3].parse().map_err(|e| perr(format!("S: {e}")))?;
            if i >= nodes || k >= taus.len() {
                return Err(perr(format!("index ({i}, {k}) out of range")));
            }
            if !g[k][i].is_nan() {
                return Err(perr(format!("duplicate entry ({i}, {k})")));
            }
            g[k][i] = gv;
            s[k][i] = sv;
        }
        for (k, row) in g.iter().enumerate() {
            if let Some(i) = row.iter().position(|v| v.is_nan()) {
                return Err(Error::Config(format!("missing table entry ({i}, {k})")));
            }
        }
        TabulatedFlow::new(taus, g, s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{FlowModel, Geometry, TangentVector};
    use std::f64::consts::PI;

    /// Dilaton circle written out as a table: g = 10 − 2τ, S = −1.
    fn dilaton_table(n: usize) -> String {
        let taus = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
        let mut out = format!(
            "# dilaton\nnodes={n} taus={}\n",
            taus.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(",")
        );
        for (k, t) in taus.iter().enumerate() {
            for i in 0..n {
                out.push_str(&format!("{i} {k} {} -1\n", 10.0 - 2.0 * t));
            }
        }
        out
    }

    #[test]
    fn parses_and_matches_closed_form() {
        let table: TabulatedFlow = dilaton_table(32).parse().unwrap();
        let geom = Geometry::build(FlowModel::CustomTabulated(table), 32, (1.0, 3.0)).unwrap();
        let closed = Geometry::build(
            FlowModel::DilatonCircle { phi0_sq: 10.0, coupling: 1.0, winding: 1.0 },
            32,
            (1.0, 3.0),
        )
        .unwrap();
        let x = TangentVector::along(0.4);
        for &tau in &[1.0, 1.7, 2.2] {
            let a = geom.flow_sample(3, tau).unwrap();
            let b = closed.flow_sample(3, tau).unwrap();
            assert!((a.trace - b.trace).abs() < 1e-12);
            assert!((geom.metric_at(3, tau).unwrap().g[0][0] - (10.0 - 2.0 * tau)).abs() < 1e-12);
            // Table differences of 1/g lag the exact derivative by O(Δτ²).
            assert!((a.dtau_trace - b.dtau_trace).abs() < 5e-3);
            let d = geom.d_quantity(3, tau, &x).unwrap() - closed.d_quantity(3, tau, &x).unwrap();
            assert!(d.abs() < 5e-3);
        }
        assert!(geom.flow_consistency_residual(2.0, 0.25).unwrap() < 1e-12);
    }

    #[test]
    fn line_sample_interpolates_nonuniform_metric() {
        let n = 64;
        let taus = vec![1.0, 2.0];
        let h = 2.0 * PI / n as f64;
        let g: Vec<Vec<f64>> =
            taus.iter().map(|_| (0..n).map(|i| 2.0 + (i as f64 * h).cos()).collect()).collect();
        let s = vec![vec![0.0; n]; 2];
        let t = TabulatedFlow::new(taus, g, s).unwrap();
        let ls = t.line_sample(1.0, h, 1.5);
        // Catmull-Rom is third order in the mesh spacing.
        assert!((ls.metric - (2.0 + 1f64.cos())).abs() < 5e-4);
        assert!((ls.metric_dx + 1f64.sin()).abs() < 1e-3);
    }

    #[test]
    fn rejects_malformed_tables() {
        assert!(matches!("".parse::<TabulatedFlow>(), Err(Error::Parse { .. })));
        assert!(matches!(
            "nodes=2 taus=1,2\n0 0 1 0\n".parse::<TabulatedFlow>(),
            Err(Error::Config(_))
        ));
        let e = "nodes=1 taus=1,2\n0 0 1 0\n0 1 1\n".parse::<TabulatedFlow>().unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }));
        let e = "nodes=1 taus=1,2\n0 0 1 0\n0 1 -1 0\n".parse::<TabulatedFlow>().unwrap_err();
        assert!(matches!(e, Error::Domain(_)));
    }
}
