//! Primal network simplex on the bipartite transportation network.
//!
//! Supply nodes `0..m`, demand nodes `m..m+n`, plus an artificial root tied
//! to every node. The spanning tree is kept strongly feasible (zero-flow
//! tree arcs point towards the root) and the leaving arc is the last
//! blocking arc met when walking the pivot cycle from its apex, which rules
//! out cycling on degenerate instances such as assignment problems.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::cost::CostMatrix;
use super::plan::TransportPlan;
use crate::dataset::validate_weights;
use crate::error::{check_dim, Error, Result};
use crate::Matrix;

const MAX_PIVOTS_PER_ARC: usize = 200;

/// Optimal vertex plus a dual certificate `u_i + v_j <= C_ij`.
#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub plan: TransportPlan,
    pub row_potential: Vec<f64>,
    pub col_potential: Vec<f64>,
    pub pivots: usize,
}

/// Exact optimal plan by network simplex.
pub fn solve_ot_exact(row_w: &[f64], col_w: &[f64], cost: &CostMatrix) -> Result<TransportPlan> {
    Ok(solve_ot_exact_with_duals(row_w, col_w, cost)?.plan)
}

pub fn solve_ot_exact_with_duals(
    row_w: &[f64],
    col_w: &[f64],
    cost: &CostMatrix,
) -> Result<ExactSolution> {
    check_dim(row_w.len(), cost.nrows())?;
    check_dim(col_w.len(), cost.ncols())?;
    if row_w.is_empty() || col_w.is_empty() {
        return Err(Error::invalid("transport problem with an empty side"));
    }
    validate_weights(row_w, "row marginal")?;
    validate_weights(col_w, "column marginal")?;
    let mut ns = Simplex::new(row_w, col_w, cost.values());
    ns.run()?;
    Ok(ns.into_solution(row_w, col_w))
}

struct Simplex<'a> {
    m: usize,
    n: usize,
    root: usize,
    cost: &'a [f64],
    art_cost: f64,
    // Real arcs are indexed column-major like the cost slice: a = i + j*m,
    // from node i to node m + j. Artificial arc of node u is `real + u`.
    real: usize,
    flow: Vec<f64>,
    art_up: Vec<bool>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    up: Vec<bool>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    children: Vec<Vec<usize>>,
    eps: f64,
    next_arc: usize,
    block: usize,
    pivots: usize,
}

impl<'a> Simplex<'a> {
    fn new(row_w: &[f64], col_w: &[f64], cost: &'a Matrix) -> Self {
        let (m, n) = (row_w.len(), col_w.len());
        let nodes = m + n;
        let root = nodes;
        let slice = cost.as_slice();
        let cmax = slice.iter().fold(0.0f64, |a, b| a.max(*b));
        let art_cost = (cmax + 1.0) * (nodes + 1) as f64;
        let real = m * n;
        let mut flow = vec![0.0; real + nodes];
        let mut art_up = vec![true; nodes];
        let mut parent = vec![root; nodes + 1];
        let mut pred = vec![usize::MAX; nodes + 1];
        let mut up = vec![true; nodes + 1];
        let mut pi = vec![0.0; nodes + 1];
        let depth = {
            let mut d = vec![1; nodes + 1];
            d[root] = 0;
            d
        };
        for u in 0..nodes {
            let supply = if u < m { row_w[u] } else { -col_w[u - m] };
            let arc = real + u;
            pred[u] = arc;
            if supply >= 0.0 {
                // u -> root, cost 0
                art_up[u] = true;
                up[u] = true;
                flow[arc] = supply;
                pi[u] = 0.0;
            } else {
                // root -> u, cost ART
                art_up[u] = false;
                up[u] = false;
                flow[arc] = -supply;
                pi[u] = art_cost;
            }
        }
        parent[root] = usize::MAX;
        let mut children = vec![Vec::new(); nodes + 1];
        children[root] = (0..nodes).collect();
        let block = (libm::ceil(libm::sqrt(real as f64)) as usize).max(10).min(real.max(1));
        Simplex {
            m,
            n,
            root,
            cost: slice,
            art_cost,
            real,
            flow,
            art_up,
            parent,
            pred,
            up,
            depth,
            pi,
            children,
            eps: 1e-12 * cmax.max(1.0),
            next_arc: 0,
            block,
            pivots: 0,
        }
    }

    fn source(&self, a: usize) -> usize {
        if a < self.real {
            a % self.m
        } else {
            let u = a - self.real;
            if self.art_up[u] {
                u
            } else {
                self.root
            }
        }
    }

    fn target(&self, a: usize) -> usize {
        if a < self.real {
            self.m + a / self.m
        } else {
            let u = a - self.real;
            if self.art_up[u] {
                self.root
            } else {
                u
            }
        }
    }

    fn arc_cost(&self, a: usize) -> f64 {
        if a < self.real {
            self.cost[a]
        } else if self.art_up[a - self.real] {
            0.0
        } else {
            self.art_cost
        }
    }

    #[inline]
    fn reduced(&self, a: usize) -> f64 {
        let i = a % self.m;
        let j = a / self.m;
        self.cost[a] + self.pi[i] - self.pi[self.m + j]
    }

    /// Block search pricing over the real arcs.
    fn find_entering(&mut self) -> Option<usize> {
        let total = self.real;
        let mut best = None;
        let mut min = -self.eps;
        let mut count = self.block;
        let mut a = self.next_arc;
        for _ in 0..total {
            let rc = self.reduced(a);
            if rc < min {
                min = rc;
                best = Some(a);
            }
            a += 1;
            if a == total {
                a = 0;
            }
            count -= 1;
            if count == 0 {
                if best.is_some() {
                    self.next_arc = a;
                    return best;
                }
                count = self.block;
            }
        }
        self.next_arc = a;
        best
    }

    fn join(&self, mut u: usize, mut v: usize) -> usize {
        while u != v {
            if self.depth[u] > self.depth[v] {
                u = self.parent[u];
            } else if self.depth[v] > self.depth[u] {
                v = self.parent[v];
            } else {
                u = self.parent[u];
                v = self.parent[v];
            }
        }
        u
    }

    fn pivot(&mut self, entering: usize) -> Result<()> {
        let first = self.source(entering);
        let second = self.target(entering);
        let join = self.join(first, second);

        // Leaving arc: last blocking arc in cycle order starting at the apex.
        let mut delta = f64::INFINITY;
        let mut u_out = usize::MAX;
        let mut side = 0u8;
        let mut u = first;
        while u != join {
            if self.up[u] {
                let d = self.flow[self.pred[u]];
                if d < delta {
                    delta = d;
                    u_out = u;
                    side = 1;
                }
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != join {
            if !self.up[u] {
                let d = self.flow[self.pred[u]];
                if d <= delta {
                    delta = d;
                    u_out = u;
                    side = 2;
                }
            }
            u = self.parent[u];
        }
        if side == 0 {
            return Err(Error::Solver("unbounded pivot cycle".into()));
        }

        if delta > 0.0 {
            self.flow[entering] += delta;
            let mut u = first;
            while u != join {
                let a = self.pred[u];
                if self.up[u] {
                    self.flow[a] -= delta;
                } else {
                    self.flow[a] += delta;
                }
                u = self.parent[u];
            }
            let mut u = second;
            while u != join {
                let a = self.pred[u];
                if self.up[u] {
                    self.flow[a] += delta;
                } else {
                    self.flow[a] -= delta;
                }
                u = self.parent[u];
            }
        }
        self.flow[self.pred[u_out]] = 0.0;

        // Re-hang the path u_in .. u_out below v_in through the entering arc.
        let (u_in, v_in) = if side == 1 { (first, second) } else { (second, first) };
        let mut child = u_in;
        let mut new_parent = v_in;
        let mut new_pred = entering;
        loop {
            let old_parent = self.parent[child];
            let old_pred = self.pred[child];
            let kids = &mut self.children[old_parent];
            if let Some(pos) = kids.iter().position(|&k| k == child) {
                kids.swap_remove(pos);
            }
            self.children[new_parent].push(child);
            self.parent[child] = new_parent;
            self.pred[child] = new_pred;
            self.up[child] = self.source(new_pred) == child;
            if child == u_out {
                break;
            }
            new_parent = child;
            new_pred = old_pred;
            child = old_parent;
        }
        self.refresh_subtree(u_in);
        self.pivots += 1;
        Ok(())
    }

    /// Recompute depth and potentials below (and including) `top`.
    fn refresh_subtree(&mut self, top: usize) {
        let mut stack = vec![top];
        while let Some(u) = stack.pop() {
            let p = self.parent[u];
            let a = self.pred[u];
            let c = self.arc_cost(a);
            self.depth[u] = self.depth[p] + 1;
            // Tree arcs have zero reduced cost: c + pi[src] - pi[dst] = 0.
            self.pi[u] = if self.up[u] { self.pi[p] - c } else { self.pi[p] + c };
            stack.extend_from_slice(&self.children[u]);
        }
    }

    fn run(&mut self) -> Result<()> {
        let limit = MAX_PIVOTS_PER_ARC * (self.real + self.m + self.n).max(100);
        while let Some(a) = self.find_entering() {
            if self.pivots >= limit {
                return Err(Error::Solver(format!(
                    "network simplex exceeded {limit} pivots"
                )));
            }
            self.pivot(a)?;
        }
        Ok(())
    }

    fn into_solution(self, row_w: &[f64], col_w: &[f64]) -> ExactSolution {
        let (m, n) = (self.m, self.n);
        let mut plan = Matrix::zeros(m, n);
        plan.as_mut_slice().copy_from_slice(&self.flow[..self.real]);
        let row_potential = (0..m).map(|i| -self.pi[i]).collect();
        let col_potential = (0..n).map(|j| self.pi[m + j]).collect();
        ExactSolution {
            plan: TransportPlan::from_parts(plan, row_w.to_vec(), col_w.to_vec()),
            row_potential,
            col_potential,
            pivots: self.pivots,
        }
    }
}
