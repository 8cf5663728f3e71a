//! Monotone and convex quantities, inequality checks, and their verdicts.
//!
//! Every check produces a [`MonitorSeries`]: an abscissa grid, values, an
//! expected property and an additive slack. The verdict is recomputed from
//! those fields alone, so it is reproducible bit for bit.

mod checks;
mod entropy;
mod pl;
mod profile;

pub use checks::{corollary25_check, energy_identity_check, lemma26_check, Corollary25Report, IdentityCheck, PairSample};
pub use entropy::{entropy, min_lbar_gap, reduced_volume, reduced_volume_series, w_entropy, w_entropy_series};
pub use pl::{pl_check, pl_tau_bar, PlConstraint, PlOptions, PlReport};
pub use profile::{convexity_profile, theta_series, ConvexityProfile};

use crate::io::fmt_g17;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AbscissaKind {
    Tau,
    S,
    /// `τ^{-1/2}`
    InvSqrtTau,
    /// Sample index (for per-pair residuals).
    Index,
}

impl AbscissaKind {
    pub fn label(&self) -> &'static str {
        match self {
            AbscissaKind::Tau => "tau",
            AbscissaKind::S => "s",
            AbscissaKind::InvSqrtTau => "inv_sqrt_tau",
            AbscissaKind::Index => "index",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Property {
    WeaklyDecreasing,
    Convex,
    /// Every value at most the bound.
    LeBound(f64),
    /// Every value at least the bound.
    GeBound(f64),
}

impl Property {
    pub fn label(&self) -> String {
        match self {
            Property::WeaklyDecreasing => "weakly_decreasing".into(),
            Property::Convex => "convex".into(),
            Property::LeBound(b) => format!("le_bound({})", fmt_g17(*b)),
            Property::GeBound(b) => format!("ge_bound({})", fmt_g17(*b)),
        }
    }

    /// Signed worst violation: positive amounts break the property. Series
    /// too short for the property have worst violation 0; any
    /// non-finite value is an infinite violation.
    pub fn worst_violation(&self, abscissa: &[f64], values: &[f64]) -> f64 {
        if values.iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        let worst = match *self {
            Property::WeaklyDecreasing => values.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max),
            Property::Convex => (1..values.len().saturating_sub(1))
                .map(|k| -scaled_second_difference(&abscissa[k - 1..=k + 1], &values[k - 1..=k + 1]))
                .fold(f64::NEG_INFINITY, f64::max),
            Property::LeBound(b) => values.iter().map(|v| v - b).fold(f64::NEG_INFINITY, f64::max),
            Property::GeBound(b) => values.iter().map(|v| b - v).fold(f64::NEG_INFINITY, f64::max),
        };
        if worst == f64::NEG_INFINITY {
            0.0
        } else if worst.is_nan() {
            f64::INFINITY
        } else {
            worst
        }
    }
}

/// Second divided difference rescaled by the squared half-width, which is
/// the plain second difference on a uniform grid.
fn scaled_second_difference(x: &[f64], v: &[f64]) -> f64 {
    let left = (v[1] - v[0]) / (x[1] - x[0]);
    let right = (v[2] - v[1]) / (x[2] - x[1]);
    let half = 0.5 * (x[2] - x[0]);
    (right - left) / half * half * half
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonitorSeries {
    pub name: String,
    pub abscissa_kind: AbscissaKind,
    pub abscissa: Vec<f64>,
    pub values: Vec<f64>,
    pub property: Property,
    pub slack: f64,
    pub passed: bool,
    pub worst_violation: f64,
}

impl MonitorSeries {
    pub fn new(
        name: impl Into<String>,
        abscissa_kind: AbscissaKind,
        abscissa: Vec<f64>,
        values: Vec<f64>,
        property: Property,
        slack: f64,
    ) -> Self {
        assert_eq!(abscissa.len(), values.len(), "abscissa and values differ in length");
        let worst_violation = property.worst_violation(&abscissa, &values);
        MonitorSeries {
            name: name.into(),
            abscissa_kind,
            abscissa,
            values,
            property,
            slack,
            passed: worst_violation <= slack,
            worst_violation,
        }
    }

    /// Recomputes the verdict from values, property and slack.
    pub fn reevaluate(&self) -> (bool, f64) {
        let w = self.property.worst_violation(&self.abscissa, &self.values);
        (w <= self.slack, w)
    }

    /// CSV with columns `abscissa,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("abscissa,value\n");
        for (x, v) in self.abscissa.iter().zip(&self.values) {
            out.push_str(&format!("{},{}\n", fmt_g17(*x), fmt_g17(*v)));
        }
        out
    }

    /// One-line JSON summary record.
    pub fn summary_json(&self) -> String {
        format!(
            "{{\"name\":{},\"abscissa\":\"{}\",\"property\":\"{}\",\"slack\":{},\"verdict\":\"{}\",\"worst_violation\":{}}}",
            json_string(&self.name),
            self.abscissa_kind.label(),
            self.property.label(),
            json_number(self.slack),
            if self.passed { "pass" } else { "fail" },
            json_number(self.worst_violation)
        )
    }
}

fn json_string(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn json_number(x: f64) -> String {
    if x.is_finite() {
        fmt_g17(x)
    } else {
        "null".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdicts() {
        let x = vec![0.0, 1.0, 2.0, 3.0];
        let s = MonitorSeries::new("d", AbscissaKind::Tau, x.clone(), vec![3.0, 2.0, 2.0, 1.0], Property::WeaklyDecreasing, 1e-3);
        assert!(s.passed);
        assert_eq!(s.worst_violation, 0.0);
        let s = MonitorSeries::new("d", AbscissaKind::Tau, x.clone(), vec![3.0, 2.0, 2.01, 1.0], Property::WeaklyDecreasing, 1e-3);
        assert!(!s.passed);
        let s = MonitorSeries::new("c", AbscissaKind::Tau, x.clone(), vec![0.0, 1.0, 4.0, 9.0], Property::Convex, 0.0);
        assert!(s.passed);
        assert_eq!(s.worst_violation, -2.0);
        let s = MonitorSeries::new("c", AbscissaKind::Tau, vec![0.0, 1.0, 3.0], vec![0.0, 1.0, 9.0], Property::Convex, 0.0);
        assert!((s.worst_violation + 4.5).abs() < 1e-15);
        let s = MonitorSeries::new("one", AbscissaKind::S, vec![0.0], vec![5.0], Property::WeaklyDecreasing, 1e-3);
        assert!(s.passed);
        let s = MonitorSeries::new("nan", AbscissaKind::S, vec![0.0, 1.0], vec![0.0, f64::NAN], Property::WeaklyDecreasing, 1e-3);
        assert!(!s.passed);
        assert_eq!(s.reevaluate(), (false, f64::INFINITY));
    }

    #[test]
    fn serializes() {
        let s = MonitorSeries::new("theta", AbscissaKind::S, vec![0.0, 0.5], vec![-2.0, -4.0], Property::WeaklyDecreasing, 1e-3);
        assert_eq!(s.to_csv(), "abscissa,value\n0,-2\n0.5,-4\n");
        assert_eq!(
            s.summary_json(),
            "{\"name\":\"theta\",\"abscissa\":\"s\",\"property\":\"weakly_decreasing\",\"slack\":0.001,\"verdict\":\"pass\",\"worst_violation\":-2}"
        );
    }
}
