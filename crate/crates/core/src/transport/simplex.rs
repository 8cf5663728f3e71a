//! Transportation simplex on the bipartite spanning-tree basis.
//!
//! Entering cells follow Dantzig's rule (most negative reduced cost) while
//! pivots make progress; after a degenerate pivot the entering and leaving
//! choices switch to Bland's smallest-index rule until progress resumes,
//! which rules out cycling.

use std::collections::VecDeque;

use crate::error::{Error, Result};

pub(crate) struct ExactSolution {
    pub flow: Vec<Vec<f64>>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub pivots: usize,
}

/// Solves `min Σ c_ij π_ij` subject to row sums `a`, column sums `b`,
/// `π ≥ 0`. `a` and `b` must be strictly positive with equal totals.
pub(crate) fn solve(a: &[f64], b: &[f64], cost: &[Vec<f64>]) -> Result<ExactSolution> {
    let (m, n) = (a.len(), b.len());
    let scale = cost.iter().flatten().fold(0.0f64, |s, c| s.max(c.abs())).max(1.0);
    let tol = 1e-12 * scale;

    // North-west corner basis: m + n − 1 cells forming a staircase tree.
    let mut basis: Vec<(usize, usize)> = Vec::with_capacity(m + n - 1);
    let mut flow: Vec<f64> = Vec::with_capacity(m + n - 1);
    let (mut ra, mut rb) = (a.to_vec(), b.to_vec());
    let (mut i, mut j) = (0, 0);
    loop {
        let x = ra[i].min(rb[j]);
        basis.push((i, j));
        flow.push(x);
        ra[i] -= x;
        rb[j] -= x;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if j == n - 1 || (i < m - 1 && ra[i] <= rb[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }
    debug_assert_eq!(basis.len(), m + n - 1);

    let budget = 50 * (m + n) * (m + n) + 1000;
    let mut bland = false;
    let mut pivots = 0;
    let nodes = m + n;
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes];
    let mut parent = vec![usize::MAX; nodes];
    let mut parent_edge = vec![usize::MAX; nodes];
    let mut depth = vec![0usize; nodes];
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    loop {
        // Tree structure and potentials, rooted at row 0.
        for l in adj.iter_mut() {
            l.clear();
        }
        for (e, &(r, c)) in basis.iter().enumerate() {
            adj[r].push((m + c, e));
            adj[m + c].push((r, e));
        }
        parent.fill(usize::MAX);
        parent[0] = 0;
        depth[0] = 0;
        u[0] = 0.0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(p) = queue.pop_front() {
            for &(q, e) in &adj[p] {
                if parent[q] != usize::MAX {
                    continue;
                }
                parent[q] = p;
                parent_edge[q] = e;
                depth[q] = depth[p] + 1;
                let (r, c) = basis[e];
                if q >= m {
                    v[c] = cost[r][c] - u[r];
                } else {
                    u[r] = cost[r][c] - v[c];
                }
                queue.push_back(q);
            }
        }
        if parent.iter().any(|&p| p == usize::MAX) {
            return Err(Error::Infeasible("basis lost its spanning-tree structure".into()));
        }

        // Entering cell.
        let mut enter: Option<(usize, usize)> = None;
        let mut best = -tol;
        'scan: for r in 0..m {
            for c in 0..n {
                let red = cost[r][c] - u[r] - v[c];
                if red < best {
                    enter = Some((r, c));
                    if bland {
                        break 'scan;
                    }
                    best = red;
                }
            }
        }
        let Some((er, ec)) = enter else {
            let mut out = vec![vec![0.0; n]; m];
            for (&(r, c), &x) in basis.iter().zip(&flow) {
                out[r][c] = x.max(0.0);
            }
            return Ok(ExactSolution { flow: out, u, v, pivots });
        };
        if pivots >= budget {
            return Err(Error::NoConvergence(format!("transportation simplex exceeded {budget} pivots")));
        }
        pivots += 1;

        // Tree path from row er to column ec; edges alternate −, +, −, ...
        let (mut p, mut q) = (er, m + ec);
        let mut from_row: Vec<usize> = Vec::new();
        let mut from_col: Vec<usize> = Vec::new();
        while p != q {
            if depth[p] >= depth[q] {
                from_row.push(parent_edge[p]);
                p = parent[p];
            } else {
                from_col.push(parent_edge[q]);
                q = parent[q];
            }
        }
        let cycle: Vec<usize> = from_row.into_iter().chain(from_col.into_iter().rev()).collect();
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for (t, &e) in cycle.iter().enumerate() {
            if t % 2 == 1 {
                continue;
            }
            let x = flow[e];
            let better = x < theta || (x == theta && basis[e] < basis[leave]);
            if better {
                theta = x;
                leave = e;
            }
        }
        for (t, &e) in cycle.iter().enumerate() {
            if t % 2 == 0 {
                flow[e] -= theta;
            } else {
                flow[e] += theta;
            }
        }
        basis[leave] = (er, ec);
        flow[leave] = theta;
        bland = theta <= 0.0;
    }
}
