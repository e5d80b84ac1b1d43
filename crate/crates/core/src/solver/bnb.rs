use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{
    rel_gap, solve_qp_bounded, ContinuousSolution, Duals, KktResiduals, MiqpSolution, MiqpStatus, QpStatus,
    SolverParams,
};
use crate::model::QpProblem;
use crate::sparse::CscMatrix;

/// Best-first branch-and-bound over the binary columns of `p`.
pub fn solve_exact(p: &QpProblem, params: &SolverParams) -> MiqpSolution {
    let ctx = Ctx::new(p, params);
    let root = ctx.solve(&[], None);
    if root.status == QpStatus::Infeasible {
        return MiqpSolution::infeasible(1);
    }
    if p.binaries.is_empty() {
        return ctx.finish(root, 1);
    }
    let mut nodes = 1usize;
    let mut reliable = root.status == QpStatus::Optimal;
    let root_bound = if reliable { root.objective } else { f64::NEG_INFINITY };
    let root_x = ctx.canonical(&root.x, &[]);

    let mut incumbent: Option<ContinuousSolution> = None;
    ctx.offer(&mut incumbent, ctx.solve_rounded(&root_x, Some(&root)));

    let mut heap = BinaryHeap::new();
    let mut next_id = 0usize;
    heap.push(Node {
        bound: root_bound,
        id: next_id,
        fixings: Vec::new(),
        x: root_x,
        duals: root.duals,
    });
    let mut pruned_bound = f64::INFINITY;
    let mut hit_limit = false;

    while let Some(node) = heap.pop() {
        if let Some(inc) = &incumbent {
            if rel_gap(inc.objective, node.bound) <= params.gap_tol {
                pruned_bound = pruned_bound.min(node.bound);
                // every remaining node is at least as good a bound
                break;
            }
        }
        let Some(col) = ctx.branch_column(&node.x, &node.fixings) else {
            let warm = (node.x.as_slice(), &node.duals);
            ctx.offer(
                &mut incumbent,
                ctx.solve_fixed(&round(&node.x, p), &node.fixings, Some(warm)),
            );
            continue;
        };
        if nodes >= params.node_limit {
            hit_limit = true;
            heap.push(node);
            break;
        }
        for val in [0.0, 1.0] {
            let mut fixings = node.fixings.clone();
            fixings.push((col, val));
            let child = ctx.solve(&fixings, Some((&node.x, &node.duals)));
            nodes += 1;
            let bound = match child.status {
                QpStatus::Infeasible => continue,
                QpStatus::Optimal => child.objective.max(node.bound),
                QpStatus::IterLimit => {
                    reliable = false;
                    node.bound
                }
            };
            if let Some(inc) = &incumbent {
                if rel_gap(inc.objective, bound) <= params.gap_tol {
                    pruned_bound = pruned_bound.min(bound);
                    continue;
                }
            }
            let x = ctx.canonical(&child.x, &fixings);
            if child.status == QpStatus::Optimal && ctx.branch_column(&x, &fixings).is_none() {
                ctx.offer(
                    &mut incumbent,
                    ctx.solve_fixed(&round(&x, p), &fixings, Some((&x, &child.duals))),
                );
                pruned_bound = pruned_bound.min(bound);
                continue;
            }
            next_id += 1;
            heap.push(Node {
                bound,
                id: next_id,
                fixings,
                x,
                duals: child.duals,
            });
        }
    }

    let Some(inc) = incumbent else {
        let mut out = MiqpSolution::infeasible(nodes);
        if hit_limit {
            out.status = MiqpStatus::NodeLimit;
        }
        return out;
    };
    let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let bound = inc.objective.min(pruned_bound).min(open_bound);
    let gap = rel_gap(inc.objective, bound);
    let status = if hit_limit {
        MiqpStatus::NodeLimit
    } else if reliable && gap <= params.gap_tol {
        MiqpStatus::Optimal
    } else {
        MiqpStatus::Feasible
    };
    MiqpSolution {
        x: inc.x,
        objective: inc.objective,
        bound,
        rel_gap: gap,
        nodes_explored: nodes,
        status,
        kkt: inc.kkt,
    }
}

/// Relax, round at 0.5, re-solve with the binaries fixed; on failure flip the
/// least decided binaries one at a time.
pub fn solve_heuristic(p: &QpProblem, params: &SolverParams) -> MiqpSolution {
    let ctx = Ctx::new(p, params);
    let root = ctx.solve(&[], None);
    if root.status == QpStatus::Infeasible {
        return MiqpSolution::infeasible(1);
    }
    if p.binaries.is_empty() {
        return ctx.finish(root, 1);
    }
    let bound = if root.status == QpStatus::Optimal {
        root.objective
    } else {
        f64::NEG_INFINITY
    };
    let x = ctx.canonical(&root.x, &[]);
    let mut assign = round(&x, p);
    let mut sol = ctx.solve_rounded(&x, Some(&root));
    if sol.status != QpStatus::Optimal {
        let mut order: Vec<usize> = (0..p.binaries.len()).collect();
        order.sort_by(|&a, &b| {
            let da = (x[p.binaries[a]] - 0.5).abs();
            let db = (x[p.binaries[b]] - 0.5).abs();
            da.total_cmp(&db).then(a.cmp(&b))
        });
        for &k in order.iter().take(params.flip_budget) {
            assign[k].1 = 1.0 - assign[k].1;
            sol = ctx.solve_fixed(&assign, &[], Some((&root.x, &root.duals)));
            if sol.status == QpStatus::Optimal {
                break;
            }
        }
    }
    if sol.status != QpStatus::Optimal {
        return MiqpSolution::infeasible(1);
    }
    let bound = bound.min(sol.objective);
    let gap = rel_gap(sol.objective, bound);
    MiqpSolution {
        status: if gap <= params.gap_tol {
            MiqpStatus::Optimal
        } else {
            MiqpStatus::Feasible
        },
        x: sol.x,
        objective: sol.objective,
        bound,
        rel_gap: gap,
        nodes_explored: 1,
        kkt: sol.kkt,
    }
}

struct Node {
    bound: f64,
    id: usize,
    fixings: Vec<(usize, f64)>,
    x: Vec<f64>,
    duals: Duals,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: smallest bound, then oldest node, pops first
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(other.id.cmp(&self.id))
    }
}

struct Ctx<'a> {
    p: &'a QpProblem,
    params: &'a SolverParams,
    ineq_cols: CscMatrix,
    pinned: Vec<bool>,
}

impl<'a> Ctx<'a> {
    fn new(p: &'a QpProblem, params: &'a SolverParams) -> Self {
        // binaries touching the objective or an equality are left alone
        let mut pinned = vec![false; p.num_vars()];
        for &c in &p.eq.col_idx {
            pinned[c] = true;
        }
        for &b in &p.binaries {
            if p.linear[b] != 0.0 || p.quad.col(b).next().is_some() {
                pinned[b] = true;
            }
        }
        Self {
            p,
            params,
            ineq_cols: p.ineq.to_csc(),
            pinned,
        }
    }

    fn bounds(&self, fixings: &[(usize, f64)]) -> (Vec<f64>, Vec<f64>) {
        let mut lo = self.p.lower.clone();
        let mut hi = self.p.upper.clone();
        for &(c, v) in fixings {
            lo[c] = v;
            hi[c] = v;
        }
        (lo, hi)
    }

    fn solve(&self, fixings: &[(usize, f64)], warm: Option<(&[f64], &Duals)>) -> ContinuousSolution {
        let (lo, hi) = self.bounds(fixings);
        let sol = solve_qp_bounded(self.p, &lo, &hi, &self.params.qp_settings(), warm);
        log::trace!(
            "node qp: {:?} obj {} iters {}",
            sol.status,
            sol.objective,
            sol.iterations
        );
        sol
    }

    /// QP with every binary pinned; `fixings` are already contained in `assign`.
    fn solve_fixed(
        &self,
        assign: &[(usize, f64)],
        _fixings: &[(usize, f64)],
        warm: Option<(&[f64], &Duals)>,
    ) -> ContinuousSolution {
        self.solve(assign, warm)
    }

    fn solve_rounded(&self, x: &[f64], warm: Option<&ContinuousSolution>) -> ContinuousSolution {
        let assign = round(x, self.p);
        self.solve_fixed(&assign, &[], warm.map(|w| (w.x.as_slice(), &w.duals)))
    }

    fn offer(&self, incumbent: &mut Option<ContinuousSolution>, cand: ContinuousSolution) {
        if cand.status != QpStatus::Optimal {
            return;
        }
        let better = incumbent.as_ref().map_or(true, |inc| cand.objective < inc.objective);
        if better {
            *incumbent = Some(cand);
        }
    }

    fn finish(&self, sol: ContinuousSolution, nodes: usize) -> MiqpSolution {
        let status = match sol.status {
            QpStatus::Optimal => MiqpStatus::Optimal,
            QpStatus::IterLimit => MiqpStatus::Feasible,
            QpStatus::Infeasible => MiqpStatus::Infeasible,
        };
        let kkt: KktResiduals = sol.kkt;
        MiqpSolution {
            objective: sol.objective,
            bound: sol.objective,
            rel_gap: 0.0,
            nodes_explored: nodes,
            status,
            kkt,
            x: sol.x,
        }
    }

    /// Replaces each binary by a representative of the values consistent with
    /// the rest of `x`.
    ///
    /// In the relaxation a mode binary is only pinned down by the rows it
    /// appears in; with no charge and no discharge any value in [0, 1] is
    /// optimal. The representative chosen is 0 or 1 whenever that is
    /// consistent, otherwise the discharge share `a / (a + b)`, where `a` and
    /// `b` are the distances of the feasible interval from 0 and from 1.
    fn canonical(&self, x: &[f64], fixings: &[(usize, f64)]) -> Vec<f64> {
        let mut out = x.to_vec();
        let tol = self.params.int_tol;
        for &b in &self.p.binaries {
            if let Some(&(_, v)) = fixings.iter().find(|&&(c, _)| c == b) {
                out[b] = v;
                continue;
            }
            if self.pinned[b] {
                continue;
            }
            let mut lo = self.p.lower[b];
            let mut hi = self.p.upper[b];
            for (r, a) in self.ineq_cols.col(b) {
                if a == 0.0 {
                    continue;
                }
                let rest = self.p.ineq.row_dot(r, x) - a * x[b];
                let lim = (self.p.ineq_rhs[r] - rest) / a;
                if a > 0.0 {
                    hi = hi.min(lim);
                } else {
                    lo = lo.max(lim);
                }
            }
            let a = lo.max(0.0);
            let bb = (1.0 - hi).max(0.0);
            out[b] = if a <= tol {
                0.0
            } else if bb <= tol {
                1.0
            } else {
                a / (a + bb)
            };
        }
        out
    }

    /// Most fractional free binary; ties go to the lowest column.
    fn branch_column(&self, x: &[f64], fixings: &[(usize, f64)]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &b in &self.p.binaries {
            if fixings.iter().any(|&(c, _)| c == b) {
                continue;
            }
            let frac = x[b].min(1.0 - x[b]);
            if frac > self.params.int_tol && best.map_or(true, |(_, f)| frac > f) {
                best = Some((b, frac));
            }
        }
        best.map(|(b, _)| b)
    }
}

/// Every binary fixed to 1 iff its value is at least 0.5.
fn round(x: &[f64], p: &QpProblem) -> Vec<(usize, f64)> {
    p.binaries
        .iter()
        .map(|&b| (b, if x[b] >= 0.5 { 1.0 } else { 0.0 }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RowTag;
    use crate::solver::solve_qp;

    /// min (x − 0.3)² + (y − 0.6)² with x, y binary, x + y ≤ 1.
    fn knap() -> QpProblem {
        let mut p = QpProblem::new();
        let x = p.add_binary();
        let y = p.add_binary();
        p.linear = vec![-0.6, -1.2];
        p.set_quadratic(&[(x, x, 2.0), (y, y, 2.0)]);
        p.add_le(&[(x, 1.0), (y, 1.0)], 1.0, RowTag::Generic);
        p
    }

    #[test]
    fn branch_and_bound_finds_integer_optimum() {
        let p = knap();
        let s = solve_exact(&p, &SolverParams::default());
        assert_eq!(s.status, MiqpStatus::Optimal);
        // y = 1: 1 − 1.2 = −0.2 beats x = 1 (1 − 0.6) and the origin (0)
        assert_eq!(s.x, vec![0.0, 1.0]);
        assert!((s.objective + 0.2).abs() < 1e-7);
        assert!(s.rel_gap <= 1e-4);
    }

    #[test]
    fn no_binaries_matches_continuous_solve() {
        let mut p = QpProblem::new();
        let a = p.add_var(0.0, 5.0, -1.0);
        p.set_quadratic(&[(a, a, 1.0)]);
        let exact = solve_exact(&p, &SolverParams::default());
        let qp = solve_qp(&p, &SolverParams::default().qp_settings());
        assert_eq!(exact.x, qp.x);
        assert_eq!(exact.objective, qp.objective);
        assert_eq!(exact.nodes_explored, 1);
    }

    #[test]
    fn heuristic_is_no_better_than_exact() {
        let p = knap();
        let params = SolverParams::default();
        let h = solve_heuristic(&p, &params);
        let e = solve_exact(&p, &params);
        assert!(h.objective >= e.objective - 1e-9);
        assert!(e.objective >= h.bound - 1e-9);
    }

    #[test]
    fn infeasible_root() {
        let mut p = knap();
        p.add_le(&[(0, -1.0), (1, -1.0)], -3.0, RowTag::Generic);
        assert_eq!(solve_exact(&p, &SolverParams::default()).status, MiqpStatus::Infeasible);
    }
}
