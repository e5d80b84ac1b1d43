//! Operator-splitting (ADMM) convex QP solver with active-set polishing.
//!
//! The problem is rewritten as `min ½xᵀPx + qᵀx  s.t.  l ≤ Ax ≤ u,  lb ≤ x ≤ ub`
//! and solved in a Ruiz-equilibrated space. Each iteration solves one
//! quasi-definite KKT system with a cached LDLᵀ factor. Once the iterates are
//! moderately accurate the guessed active set is solved exactly ("polish"),
//! which is what lets the returned point meet tight KKT tolerances.

use std::time::Instant;

use super::ldl::Ldl;
use super::{ContinuousSolution, Duals, KktResiduals, QpSettings, QpStatus};
use crate::model::QpProblem;
use crate::sparse::{norm_inf, CscMatrix};

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const RHO_EQ_SCALE: f64 = 1e3;
const SCALING_ITERS: usize = 15;
const POLISH_DELTA: f64 = 1e-7;
const POLISH_REFINE: usize = 10;
const POLISH_ROUNDS: usize = 6;
const POLISH_SLACK: f64 = 1e-9;
const EPS_PINF: f64 = 1e-6;

/// Solves the continuous relaxation of `p` (binary columns relaxed to [0, 1]).
pub fn solve_qp(p: &QpProblem, settings: &QpSettings) -> ContinuousSolution {
    solve_qp_bounded(p, &p.lower, &p.upper, settings, None)
}

/// Like [`solve_qp`] with replacement column bounds and an optional warm start.
pub fn solve_qp_bounded(
    p: &QpProblem,
    lower: &[f64],
    upper: &[f64],
    settings: &QpSettings,
    warm: Option<(&[f64], &Duals)>,
) -> ContinuousSolution {
    let n = p.num_vars();
    if (0..n).any(|j| lower[j] > upper[j]) {
        return infeasible_solution(n);
    }
    let mut w = match Workspace::new(p, lower, upper, settings) {
        Some(w) => w,
        None => return infeasible_solution(n),
    };
    if let Some((x, y)) = warm {
        w.warm_start(x, y);
    }
    w.run(p, lower, upper, settings)
}

fn infeasible_solution(n: usize) -> ContinuousSolution {
    ContinuousSolution {
        x: vec![0.0; n],
        objective: f64::INFINITY,
        kkt: KktResiduals::default(),
        status: QpStatus::Infeasible,
        duals: Duals::default(),
        iterations: 0,
    }
}

/// KKT residuals of `(x, duals)` for `p` with the given column bounds.
///
/// Multipliers with the wrong sign for their constraint are projected to zero
/// before the stationarity residual is formed, so a bad sign shows up as dual
/// infeasibility rather than being silently accepted.
pub fn kkt_residuals(p: &QpProblem, lower: &[f64], upper: &[f64], x: &[f64], duals: &Duals) -> KktResiduals {
    let n = p.num_vars();
    let mut primal = 0.0f64;
    let mut compl = 0.0f64;
    let mut stat = p.gradient(x);

    for r in 0..p.eq.nrows() {
        primal = primal.max((p.eq.row_dot(r, x) - p.eq_rhs[r]).abs());
        let y = duals.eq.get(r).copied().unwrap_or(0.0);
        if y != 0.0 {
            for (c, v) in p.eq.row(r) {
                stat[c] += v * y;
            }
        }
    }
    for r in 0..p.ineq.nrows() {
        let slack = p.ineq_rhs[r] - p.ineq.row_dot(r, x);
        primal = primal.max(-slack);
        let y = duals.ineq.get(r).copied().unwrap_or(0.0).max(0.0);
        if y != 0.0 {
            compl = compl.max(y * slack.abs());
            for (c, v) in p.ineq.row(r) {
                stat[c] += v * y;
            }
        }
    }
    for j in 0..n {
        primal = primal.max(lower[j] - x[j]).max(x[j] - upper[j]);
        let y = duals.bounds.get(j).copied().unwrap_or(0.0);
        let y = if y > 0.0 && upper[j].is_finite() {
            compl = compl.max(y * (upper[j] - x[j]).abs());
            y
        } else if y < 0.0 && lower[j].is_finite() {
            compl = compl.max(-y * (x[j] - lower[j]).abs());
            y
        } else {
            0.0
        };
        stat[j] += y;
    }
    KktResiduals {
        primal_infeas: primal.max(0.0),
        dual_infeas: norm_inf(&stat),
        complementarity: compl,
    }
}

/// Solver state in the scaled space.
struct Workspace {
    n: usize,
    m: usize,
    m_eq: usize,
    p: CscMatrix,
    p_diag: Vec<f64>,
    q: Vec<f64>,
    a: CscMatrix,
    at: CscMatrix,
    l: Vec<f64>,
    u: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    d: Vec<f64>,
    e: Vec<f64>,
    c: f64,
    rho: f64,
    sigma: f64,
    rho_c: Vec<f64>,
    rho_b: Vec<f64>,
    kkt: CscMatrix,
    diag_pos: Vec<usize>,
    factor: Ldl,
    x: Vec<f64>,
    z: Vec<f64>,
    zb: Vec<f64>,
    y: Vec<f64>,
    yb: Vec<f64>,
}

struct Residuals {
    prim: f64,
    dual: f64,
    prim_scale: f64,
    dual_scale: f64,
    // scaled-space counterparts used for step-size adaptation
    prim_s: f64,
    dual_s: f64,
    prim_scale_s: f64,
    dual_scale_s: f64,
}

impl Workspace {
    fn new(p: &QpProblem, lower: &[f64], upper: &[f64], settings: &QpSettings) -> Option<Self> {
        let n = p.num_vars();
        let m_eq = p.eq.nrows();
        let a_eq = p.eq.to_csc();
        let a_in = p.ineq.to_csc();
        let mut a = CscMatrix::vstack(&[&a_eq, &a_in]);
        let m = a.nrows;
        let mut l: Vec<f64> = p
            .eq_rhs
            .iter()
            .copied()
            .chain(std::iter::repeat(f64::NEG_INFINITY).take(p.ineq.nrows()))
            .collect();
        let mut u: Vec<f64> = p.eq_rhs.iter().chain(&p.ineq_rhs).copied().collect();
        let mut pm = p.quad.clone();
        let mut q = p.linear.clone();

        // Ruiz equilibration of [P Aᵀ; A 0] followed by cost scaling
        let mut d = vec![1.0; n];
        let mut e = vec![1.0; m];
        let mut c = 1.0;
        for _ in 0..SCALING_ITERS {
            let pn = pm.col_norms_inf();
            let an = a.col_norms_inf();
            let dt: Vec<f64> = (0..n).map(|j| inv_sqrt(pn[j].max(an[j]))).collect();
            let et: Vec<f64> = a.row_norms_inf().into_iter().map(inv_sqrt).collect();
            pm.scale(&dt, &dt);
            a.scale(&et, &dt);
            for j in 0..n {
                q[j] *= dt[j];
                d[j] *= dt[j];
            }
            for i in 0..m {
                e[i] *= et[i];
            }
            let pn = pm.col_norms_inf();
            let mean = if n > 0 { pn.iter().sum::<f64>() / n as f64 } else { 0.0 };
            let ct = inv_sqrt_raw(mean.max(norm_inf(&q)));
            pm.values.iter_mut().for_each(|v| *v *= ct);
            q.iter_mut().for_each(|v| *v *= ct);
            c *= ct;
        }
        for i in 0..m {
            l[i] *= e[i];
            u[i] *= e[i];
        }
        let lb: Vec<f64> = (0..n).map(|j| lower[j] / d[j]).collect();
        let ub: Vec<f64> = (0..n).map(|j| upper[j] / d[j]).collect();

        let mut p_diag = vec![0.0; n];
        for j in 0..n {
            for (r, v) in pm.col(j) {
                if r == j {
                    p_diag[j] = v;
                }
            }
        }
        let at = a.transpose();
        let rho = settings.rho;
        let mut w = Self {
            n,
            m,
            m_eq,
            p: pm,
            p_diag,
            q,
            a,
            at,
            l,
            u,
            lb,
            ub,
            d,
            e,
            c,
            rho,
            sigma: settings.sigma,
            rho_c: Vec::new(),
            rho_b: Vec::new(),
            kkt: CscMatrix::zeros(0, 0),
            diag_pos: Vec::new(),
            factor: Ldl::new(&CscMatrix::zeros(0, 0)).ok()?,
            x: vec![0.0; n],
            z: vec![0.0; m],
            zb: vec![0.0; n],
            y: vec![0.0; m],
            yb: vec![0.0; n],
        };
        w.set_rho_vectors();
        w.build_kkt();
        let t0 = Instant::now();
        w.factor = Ldl::new(&w.kkt).ok()?;
        log::debug!(
            "kkt n={} m={} nnz={} L nnz={} factor {:?}",
            n,
            m,
            w.kkt.nnz(),
            w.factor.nnz_l(),
            t0.elapsed()
        );
        for j in 0..n {
            w.zb[j] = clamp(0.0, w.lb[j], w.ub[j]);
            w.x[j] = w.zb[j];
        }
        for i in 0..m {
            w.z[i] = clamp(0.0, w.l[i], w.u[i]);
        }
        Some(w)
    }

    fn set_rho_vectors(&mut self) {
        let rho = self.rho;
        self.rho_c = (0..self.m).map(|i| row_rho(rho, self.l[i], self.u[i])).collect();
        self.rho_b = (0..self.n).map(|j| row_rho(rho, self.lb[j], self.ub[j])).collect();
    }

    fn build_kkt(&mut self) {
        let (n, m) = (self.n, self.m);
        let mut t = Vec::with_capacity(self.p.nnz() + self.a.nnz() + n + m);
        for j in 0..n {
            for (r, v) in self.p.col(j) {
                if r < j {
                    t.push((r, j, v));
                }
            }
            t.push((j, j, self.p_diag[j] + self.sigma + self.rho_b[j]));
        }
        for i in 0..m {
            for (j, v) in self.at.col(i) {
                t.push((j, n + i, v));
            }
            t.push((n + i, n + i, -1.0 / self.rho_c[i]));
        }
        self.kkt = CscMatrix::from_triplets(n + m, n + m, &t);
        self.diag_pos = (0..n + m)
            .map(|c| {
                let end = self.kkt.col_ptr[c + 1];
                debug_assert_eq!(self.kkt.row_idx[end - 1], c);
                end - 1
            })
            .collect();
    }

    fn update_rho(&mut self, rho: f64) -> bool {
        self.rho = rho;
        self.set_rho_vectors();
        for j in 0..self.n {
            self.kkt.values[self.diag_pos[j]] = self.p_diag[j] + self.sigma + self.rho_b[j];
        }
        for i in 0..self.m {
            self.kkt.values[self.diag_pos[self.n + i]] = -1.0 / self.rho_c[i];
        }
        self.factor.refactor(&self.kkt.values).is_ok()
    }

    fn warm_start(&mut self, x: &[f64], y: &Duals) {
        for j in 0..self.n {
            self.x[j] = x[j] / self.d[j];
            self.zb[j] = clamp(self.x[j], self.lb[j], self.ub[j]);
            self.yb[j] = y.bounds.get(j).copied().unwrap_or(0.0) * self.d[j] * self.c;
        }
        let ax = self.a.mul_vec(&self.x);
        for i in 0..self.m {
            self.z[i] = clamp(ax[i], self.l[i], self.u[i]);
            let yi = if i < self.m_eq {
                y.eq.get(i).copied().unwrap_or(0.0)
            } else {
                y.ineq.get(i - self.m_eq).copied().unwrap_or(0.0)
            };
            self.y[i] = yi * self.c / self.e[i];
        }
    }

    fn run(&mut self, p: &QpProblem, lower: &[f64], upper: &[f64], s: &QpSettings) -> ContinuousSolution {
        let (n, m) = (self.n, self.m);
        let start = Instant::now();
        let alpha = s.alpha;
        let mut rhs = vec![0.0; n + m];
        let mut y_prev = self.y.clone();
        let mut yb_prev = self.yb.clone();
        let mut eps = s.eps_start;
        let mut best: Option<ContinuousSolution> = None;
        let mut iter = 0;
        let check_every = s.check_every.max(1);
        let mut last_polish_fail_eps = f64::INFINITY;

        while iter < s.max_iter {
            iter += 1;
            let record = iter % check_every == 0;
            if record {
                y_prev.copy_from_slice(&self.y);
                yb_prev.copy_from_slice(&self.yb);
            }
            for j in 0..n {
                rhs[j] = self.sigma * self.x[j] - self.q[j] + self.rho_b[j] * self.zb[j] - self.yb[j];
            }
            for i in 0..m {
                rhs[n + i] = self.z[i] - self.y[i] / self.rho_c[i];
            }
            self.factor.solve(&mut rhs);
            for i in 0..m {
                let nu = rhs[n + i];
                let zt = self.z[i] + (nu - self.y[i]) / self.rho_c[i];
                let zr = alpha * zt + (1.0 - alpha) * self.z[i];
                let zn = clamp(zr + self.y[i] / self.rho_c[i], self.l[i], self.u[i]);
                self.y[i] += self.rho_c[i] * (zr - zn);
                self.z[i] = zn;
            }
            for j in 0..n {
                let xt = rhs[j];
                let xr = alpha * xt + (1.0 - alpha) * self.x[j];
                let zr = alpha * xt + (1.0 - alpha) * self.zb[j];
                self.x[j] = xr;
                let zn = clamp(zr + self.yb[j] / self.rho_b[j], self.lb[j], self.ub[j]);
                self.yb[j] += self.rho_b[j] * (zr - zn);
                self.zb[j] = zn;
            }

            if !record {
                continue;
            }
            if self.primal_infeasible(&y_prev, &yb_prev) {
                let mut sol = infeasible_solution(n);
                sol.iterations = iter;
                return sol;
            }
            let r = self.residuals();
            log::trace!(
                "iter {iter} prim {:.2e} dual {:.2e} rho {:.2e} {:?}",
                r.prim,
                r.dual,
                self.rho,
                start.elapsed()
            );
            let converged = r.prim <= eps * (1.0 + r.prim_scale) && r.dual <= eps * (1.0 + r.dual_scale);
            if converged {
                let cand = self.candidate(p, lower, upper, s, iter);
                log::debug!(
                    "iter {iter} eps {eps:.0e} candidate {:?} kkt {:.2e} {:?}",
                    cand.status,
                    cand.kkt.max(),
                    start.elapsed()
                );
                if cand.status == QpStatus::Optimal {
                    return cand;
                }
                keep_better(&mut best, cand);
                last_polish_fail_eps = eps;
                eps = (eps * 0.1).max(1e-13);
            }
            if iter % (check_every * 4) == 0 {
                let ratio =
                    ((r.prim_s / r.prim_scale_s.max(1e-30)) / (r.dual_s / r.dual_scale_s.max(1e-30)).max(1e-30)).sqrt();
                let new_rho = (self.rho * ratio).clamp(RHO_MIN, RHO_MAX);
                if new_rho.is_finite()
                    && (new_rho > 5.0 * self.rho || new_rho < 0.2 * self.rho)
                    && !self.update_rho(new_rho)
                {
                    break;
                }
            }
            if let Some(limit) = s.time_limit {
                if start.elapsed() > limit {
                    break;
                }
            }
        }
        let _ = last_polish_fail_eps;
        let cand = self.candidate(p, lower, upper, s, iter);
        if cand.status == QpStatus::Optimal {
            return cand;
        }
        keep_better(&mut best, cand);
        let mut out = best.expect("at least one candidate evaluated");
        out.status = QpStatus::IterLimit;
        out.iterations = iter;
        out
    }

    /// Polished point if polishing succeeds, else the current iterate.
    fn candidate(
        &mut self,
        p: &QpProblem,
        lower: &[f64],
        upper: &[f64],
        s: &QpSettings,
        iter: usize,
    ) -> ContinuousSolution {
        if s.polish {
            if let Some((x, duals)) = self.polish() {
                let kkt = kkt_residuals(p, lower, upper, &x, &duals);
                if kkt.max() <= s.tol {
                    return ContinuousSolution {
                        objective: p.objective(&x),
                        x,
                        kkt,
                        status: QpStatus::Optimal,
                        duals,
                        iterations: iter,
                    };
                }
            }
        }
        let (x, duals) = self.unscaled();
        let kkt = kkt_residuals(p, lower, upper, &x, &duals);
        let status = if kkt.max() <= s.tol {
            QpStatus::Optimal
        } else {
            QpStatus::IterLimit
        };
        ContinuousSolution {
            objective: p.objective(&x),
            x,
            kkt,
            status,
            duals,
            iterations: iter,
        }
    }

    fn unscale_pair(&self, xs: &[f64], ys: &[f64], ybs: &[f64]) -> (Vec<f64>, Duals) {
        let x: Vec<f64> = (0..self.n).map(|j| xs[j] * self.d[j]).collect();
        let y: Vec<f64> = (0..self.m).map(|i| ys[i] * self.e[i] / self.c).collect();
        let bounds: Vec<f64> = (0..self.n).map(|j| ybs[j] / (self.d[j] * self.c)).collect();
        let duals = Duals {
            eq: y[..self.m_eq].to_vec(),
            ineq: y[self.m_eq..].to_vec(),
            bounds,
        };
        (x, duals)
    }

    fn unscaled(&self) -> (Vec<f64>, Duals) {
        // the projected copy zb is feasible for the bounds
        self.unscale_pair(&self.zb, &self.y, &self.yb)
    }

    fn residuals(&self) -> Residuals {
        let (n, m) = (self.n, self.m);
        let ax = self.a.mul_vec(&self.x);
        let px = self.p.mul_vec(&self.x);
        let aty = self.at.mul_vec(&self.y);
        let mut prim = 0.0f64;
        let mut prim_scale = 0.0f64;
        let mut prim_s = 0.0f64;
        let mut prim_scale_s = 0.0f64;
        for i in 0..m {
            let ei = 1.0 / self.e[i];
            prim = prim.max(((ax[i] - self.z[i]) * ei).abs());
            prim_scale = prim_scale.max((ax[i] * ei).abs()).max((self.z[i] * ei).abs());
            prim_s = prim_s.max((ax[i] - self.z[i]).abs());
            prim_scale_s = prim_scale_s.max(ax[i].abs()).max(self.z[i].abs());
        }
        let mut dual = 0.0f64;
        let mut dual_scale = 0.0f64;
        let mut dual_s = 0.0f64;
        let mut dual_scale_s = 0.0f64;
        for j in 0..n {
            let dj = self.d[j];
            prim = prim.max(((self.x[j] - self.zb[j]) * dj).abs());
            prim_scale = prim_scale.max((self.x[j] * dj).abs());
            prim_s = prim_s.max((self.x[j] - self.zb[j]).abs());
            prim_scale_s = prim_scale_s.max(self.x[j].abs());
            let g = px[j] + self.q[j] + aty[j] + self.yb[j];
            let inv = 1.0 / (dj * self.c);
            dual = dual.max((g * inv).abs());
            dual_scale = dual_scale
                .max((px[j] * inv).abs())
                .max((aty[j] * inv).abs())
                .max((self.yb[j] * inv).abs())
                .max((self.q[j] * inv).abs());
            dual_s = dual_s.max(g.abs());
            dual_scale_s = dual_scale_s
                .max(px[j].abs())
                .max(aty[j].abs())
                .max(self.yb[j].abs())
                .max(self.q[j].abs());
        }
        Residuals {
            prim,
            dual,
            prim_scale,
            dual_scale,
            prim_s,
            dual_s,
            prim_scale_s,
            dual_scale_s,
        }
    }

    /// Farkas-type certificate from the last dual step.
    fn primal_infeasible(&self, y_prev: &[f64], yb_prev: &[f64]) -> bool {
        let (n, m) = (self.n, self.m);
        // unscaled dual step
        let dy: Vec<f64> = (0..m).map(|i| (self.y[i] - y_prev[i]) * self.e[i] / self.c).collect();
        let dyb: Vec<f64> = (0..n)
            .map(|j| (self.yb[j] - yb_prev[j]) / (self.d[j] * self.c))
            .collect();
        let norm = norm_inf(&dy).max(norm_inf(&dyb));
        if norm < 1e-12 {
            return false;
        }
        let tol = EPS_PINF * norm;
        let mut support = 0.0;
        let bound_term = |v: f64, lo: f64, hi: f64| -> Option<f64> {
            if v > tol {
                hi.is_finite().then_some(hi * v)
            } else if v < -tol {
                lo.is_finite().then_some(lo * v)
            } else {
                Some(0.0)
            }
        };
        for i in 0..m {
            let (lo, hi) = (self.l[i] / self.e[i], self.u[i] / self.e[i]);
            match bound_term(dy[i], lo, hi) {
                Some(v) => support += v,
                None => return false,
            }
        }
        for j in 0..n {
            let (lo, hi) = (self.lb[j] * self.d[j], self.ub[j] * self.d[j]);
            match bound_term(dyb[j], lo, hi) {
                Some(v) => support += v,
                None => return false,
            }
        }
        if support > -tol {
            return false;
        }
        // ‖Aᵀδy + δy_b‖ (unscaled) must vanish
        let scaled: Vec<f64> = (0..m).map(|i| self.y[i] - y_prev[i]).collect();
        let aty = self.at.mul_vec(&scaled);
        (0..n).all(|j| ((aty[j] + self.yb[j] - yb_prev[j]) / (self.d[j] * self.c)).abs() <= tol)
    }

    /// Solves the equality-constrained QP on the guessed active set, then
    /// repairs the guess a few times from the violations it produces.
    fn polish(&self) -> Option<(Vec<f64>, Duals)> {
        let (n, m) = (self.n, self.m);
        // columns pinned at a bound
        let mut fixed: Vec<Option<f64>> = vec![None; n];
        for j in 0..n {
            let (lo, hi) = (self.lb[j], self.ub[j]);
            if lo == hi || (lo.is_finite() && self.zb[j] - lo < -self.yb[j]) {
                fixed[j] = Some(lo);
            } else if hi.is_finite() && hi - self.zb[j] < self.yb[j] {
                fixed[j] = Some(hi);
            }
        }
        // active rows with their target values
        let mut active: Vec<Option<f64>> = vec![None; m];
        for i in 0..m {
            let (lo, hi) = (self.l[i], self.u[i]);
            if lo == hi || (lo.is_finite() && self.z[i] - lo < -self.y[i]) {
                active[i] = Some(lo);
            } else if hi.is_finite() && hi - self.z[i] < self.y[i] {
                active[i] = Some(hi);
            }
        }
        let mut last = None;
        for _ in 0..POLISH_ROUNDS {
            let (xs, ys, ybs) = self.polish_solve(&fixed, &active)?;
            let mut changed = false;
            for j in 0..n {
                let (lo, hi) = (self.lb[j], self.ub[j]);
                match fixed[j] {
                    None if xs[j] < lo - POLISH_SLACK * (1.0 + lo.abs()) => {
                        fixed[j] = Some(lo);
                        changed = true;
                    }
                    None if xs[j] > hi + POLISH_SLACK * (1.0 + hi.abs()) => {
                        fixed[j] = Some(hi);
                        changed = true;
                    }
                    // a multiplier of the wrong sign releases the bound
                    Some(v)
                        if lo < hi && ((v == lo && ybs[j] > POLISH_SLACK) || (v == hi && ybs[j] < -POLISH_SLACK)) =>
                    {
                        fixed[j] = None;
                        changed = true;
                    }
                    _ => {}
                }
            }
            let ax = self.a.mul_vec(&xs);
            for i in 0..m {
                let (lo, hi) = (self.l[i], self.u[i]);
                match active[i] {
                    None if ax[i] < lo - POLISH_SLACK * (1.0 + lo.abs()) => {
                        active[i] = Some(lo);
                        changed = true;
                    }
                    None if ax[i] > hi + POLISH_SLACK * (1.0 + hi.abs()) => {
                        active[i] = Some(hi);
                        changed = true;
                    }
                    Some(v) if lo < hi && ((v == lo && ys[i] > POLISH_SLACK) || (v == hi && ys[i] < -POLISH_SLACK)) => {
                        active[i] = None;
                        changed = true;
                    }
                    _ => {}
                }
            }
            last = Some(self.unscale_pair(&xs, &ys, &ybs));
            if !changed {
                break;
            }
        }
        last
    }

    /// Proximal solve of `[P_FF + δI, A_RFᵀ; A_RF, −δI]` around the current
    /// iterate, so directions the active set leaves undetermined stay put.
    fn polish_solve(&self, fixed: &[Option<f64>], active: &[Option<f64>]) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let (n, m) = (self.n, self.m);
        let rows: Vec<(usize, f64)> = active
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (i, v)))
            .collect();
        let free: Vec<usize> = (0..n).filter(|&j| fixed[j].is_none()).collect();
        let mut pos = vec![usize::MAX; n];
        for (k, &j) in free.iter().enumerate() {
            pos[j] = k;
        }
        let nf = free.len();
        let nr = rows.len();
        let mut x_fixed = vec![0.0; n];
        for j in 0..n {
            if let Some(v) = fixed[j] {
                x_fixed[j] = v;
            }
        }
        let px_fixed = self.p.mul_vec(&x_fixed);
        let ax_fixed = self.a.mul_vec(&x_fixed);

        let mut t = Vec::new();
        for (k, &j) in free.iter().enumerate() {
            let mut has_diag = false;
            for (r, v) in self.p.col(j) {
                if pos[r] != usize::MAX && pos[r] <= k {
                    t.push((pos[r], k, if pos[r] == k { v + POLISH_DELTA } else { v }));
                    has_diag |= pos[r] == k;
                }
            }
            if !has_diag {
                t.push((k, k, POLISH_DELTA));
            }
        }
        for (k, &(i, _)) in rows.iter().enumerate() {
            for (j, v) in self.at.col(i) {
                if pos[j] != usize::MAX {
                    t.push((pos[j], nf + k, v));
                }
            }
            t.push((nf + k, nf + k, -POLISH_DELTA));
        }
        let dim = nf + nr;
        let k_reg = CscMatrix::from_triplets(dim, dim, &t);
        let mut factor = Ldl::new(&k_reg).ok()?;

        let mut b = vec![0.0; dim];
        for (k, &j) in free.iter().enumerate() {
            b[k] = -self.q[j] - px_fixed[j] + POLISH_DELTA * self.zb[j];
        }
        for (k, &(i, target)) in rows.iter().enumerate() {
            b[nf + k] = target - ax_fixed[i] - POLISH_DELTA * self.y[i];
        }
        let mut sol = b.clone();
        factor.solve(&mut sol);
        for _ in 0..POLISH_REFINE {
            let ks = sym_upper_mul(&k_reg, &sol);
            let mut r: Vec<f64> = b.iter().zip(&ks).map(|(b, k)| b - k).collect();
            if norm_inf(&r) < 1e-15 * (1.0 + norm_inf(&b)) {
                break;
            }
            factor.solve(&mut r);
            sol.iter_mut().zip(&r).for_each(|(s, d)| *s += d);
        }
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }

        let mut xs = x_fixed;
        for (k, &j) in free.iter().enumerate() {
            xs[j] = sol[k];
        }
        let mut ys = vec![0.0; m];
        for (k, &(i, _)) in rows.iter().enumerate() {
            ys[i] = sol[nf + k];
        }
        let px = self.p.mul_vec(&xs);
        let aty = self.at.mul_vec(&ys);
        let mut ybs = vec![0.0; n];
        for j in 0..n {
            if fixed[j].is_some() {
                ybs[j] = -(px[j] + self.q[j] + aty[j]);
            }
        }
        Some((xs, ys, ybs))
    }
}

/// y = K x for a symmetric K stored as its upper triangle.
fn sym_upper_mul(k: &CscMatrix, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; k.ncols];
    for c in 0..k.ncols {
        for (r, v) in k.col(c) {
            y[r] += v * x[c];
            if r != c {
                y[c] += v * x[r];
            }
        }
    }
    y
}

fn keep_better(best: &mut Option<ContinuousSolution>, cand: ContinuousSolution) {
    let better = match best {
        None => true,
        Some(b) => cand.kkt.max() < b.kkt.max(),
    };
    if better {
        *best = Some(cand);
    }
}

fn row_rho(rho: f64, lo: f64, hi: f64) -> f64 {
    if !lo.is_finite() && !hi.is_finite() {
        RHO_MIN
    } else if lo == hi {
        (rho * RHO_EQ_SCALE).min(RHO_MAX)
    } else {
        rho
    }
}

fn clamp(v: f64, lo: f64, hi: f64) -> f64 {
    v.max(lo).min(hi)
}

fn inv_sqrt(norm: f64) -> f64 {
    if norm < 1e-4 {
        1.0
    } else {
        1.0 / norm.min(1e4).sqrt()
    }
}

fn inv_sqrt_raw(norm: f64) -> f64 {
    if norm < 1e-6 {
        1.0
    } else {
        1.0 / norm.min(1e6)
    }
}
