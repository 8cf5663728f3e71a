//! Log-domain Sinkhorn with ε-scaling, followed by the rounding of Altschuler,
//! Weed and Rigollet onto the exact transport polytope.

pub(crate) struct EntropicSolution {
    pub plan: Vec<Vec<f64>>,
    /// L1 row-marginal error before rounding.
    pub marginal_error: f64,
    pub iterations: usize,
}

const TARGET_ERROR: f64 = 1e-9;
const STAGE_ERROR: f64 = 1e-6;
const MAX_ITER: usize = 200_000;

fn logsumexp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub(crate) fn solve(a: &[f64], b: &[f64], cost: &[Vec<f64>], epsilon: f64) -> EntropicSolution {
    let (m, n) = (a.len(), b.len());
    let la: Vec<f64> = a.iter().map(|x| x.ln()).collect();
    let lb: Vec<f64> = b.iter().map(|x| x.ln()).collect();
    let spread = {
        let flat = cost.iter().flatten();
        let hi = flat.clone().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = flat.copied().fold(f64::INFINITY, f64::min);
        (hi - lo).max(epsilon)
    };
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; n];
    let mut eps = spread;
    let mut iterations = 0;
    let mut error;
    loop {
        eps = eps.max(epsilon);
        let last_stage = eps == epsilon;
        let goal = if last_stage { TARGET_ERROR } else { STAGE_ERROR };
        loop {
            for i in 0..m {
                f[i] = eps * la[i] - eps * logsumexp((0..n).map(|j| (g[j] - cost[i][j]) / eps));
            }
            for j in 0..n {
                g[j] = eps * lb[j] - eps * logsumexp((0..m).map(|i| (f[i] - cost[i][j]) / eps));
            }
            iterations += 1;
            error = (0..m)
                .map(|i| {
                    let row: f64 = (0..n).map(|j| ((f[i] + g[j] - cost[i][j]) / eps).exp()).sum();
                    (row - a[i]).abs()
                })
                .sum::<f64>();
            if error < goal || iterations >= MAX_ITER {
                break;
            }
        }
        if last_stage || iterations >= MAX_ITER {
            break;
        }
        eps *= 0.5;
    }
    let mut plan: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..n).map(|j| ((f[i] + g[j] - cost[i][j]) / eps).exp()).collect())
        .collect();
    round_to_polytope(&mut plan, a, b);
    EntropicSolution { plan, marginal_error: error, iterations }
}

fn round_to_polytope(p: &mut [Vec<f64>], a: &[f64], b: &[f64]) {
    let (m, n) = (a.len(), b.len());
    for i in 0..m {
        let r: f64 = p[i].iter().sum();
        if r > a[i] {
            let k = a[i] / r;
            p[i].iter_mut().for_each(|x| *x *= k);
        }
    }
    for j in 0..n {
        let c: f64 = (0..m).map(|i| p[i][j]).sum();
        if c > b[j] {
            let k = b[j] / c;
            (0..m).for_each(|i| p[i][j] *= k);
        }
    }
    let er: Vec<f64> = (0..m).map(|i| a[i] - p[i].iter().sum::<f64>()).collect();
    let ec: Vec<f64> = (0..n).map(|j| b[j] - (0..m).map(|i| p[i][j]).sum::<f64>()).collect();
    let norm: f64 = er.iter().sum();
    if norm > 0.0 {
        for i in 0..m {
            for j in 0..n {
                p[i][j] += er[i] * ec[j] / norm;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounded_plan_is_feasible() {
        let cost = vec![vec![0.0, 1.0, 4.0], vec![1.0, 0.0, 1.0]];
        let a = [0.4, 0.6];
        let b = [0.2, 0.3, 0.5];
        let s = solve(&a, &b, &cost, 1e-2);
        for i in 0..2 {
            assert!((s.plan[i].iter().sum::<f64>() - a[i]).abs() < 1e-14);
        }
        for j in 0..3 {
            assert!(((0..2).map(|i| s.plan[i][j]).sum::<f64>() - b[j]).abs() < 1e-14);
        }
        assert!(s.marginal_error < 1e-9);
    }
}
