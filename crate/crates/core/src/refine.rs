//! Exact finishing step for ℓ1 minimization.
//!
//! First-order splitting gets close to the optimum quickly but needs very many
//! iterations to reach tight feasibility on polyhedral constraint sets. Near
//! the end the optimal face is small: a few dozen support columns and a few
//! dozen active rows. This module solves ℓ1 minimization restricted to a
//! guessed set of columns and rows with a log-barrier Newton method, then
//! grows the guess until the point is feasible for every row and the barrier
//! multipliers certify optimality for every column.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::partition::PartitionedSystem;

/// One side of one linear constraint, written as `gᵀx ≤ h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) enum Row {
    /// `±(Φ̃x − ỹ)ᵢ ≤ Δ/2`, `true` for the upper side.
    Linf(usize, bool),
    /// `±(Φ̃ᵀΦ̃x − Φ̃ᵀỹ)ᵢ ≤ λΔ/2`.
    Dantzig(usize, bool),
    /// `−(Φ̄x)ᵢ ≤ −ȳᵢ`.
    Saturation(usize),
}

/// The constraint set of a pure ℓ1 model.
pub(crate) struct Constraints<'a> {
    pub system: &'a PartitionedSystem,
    /// `Φ̃ᵀΦ̃`.
    pub gram: &'a DMatrix<f64>,
    /// `Φ̃ᵀỹ`.
    pub gram_rhs: &'a DVector<f64>,
    pub linf: bool,
    /// Half-width `λΔ/2` of the Dantzig box.
    pub dantzig: Option<f64>,
    pub saturation: bool,
    /// Radius `εΔ` of the ℓ2 ball.
    pub l2: Option<f64>,
}

/// Fraction of a row's natural scale within which it counts as nearly active.
const NEAR_ACTIVE: f64 = 0.2;
/// Columns whose dual estimate reaches this magnitude join the support guess.
const DUAL_CANDIDATE: f64 = 0.9;
/// Cap on columns added per round; the most violated enter first.
const MAX_ENTERING: usize = 50;
const MAX_ROUNDS: usize = 30;
const CERTIFICATE_TOL: f64 = 1e-7;

impl Constraints<'_> {
    fn coefficient(&self, row: Row, col: usize) -> f64 {
        let sys = self.system;
        match row {
            Row::Linf(i, up) => sign(up) * sys.phi_tilde[(i, col)],
            Row::Dantzig(i, up) => sign(up) * self.gram[(i, col)],
            Row::Saturation(i) => -sys.phi_bar[(i, col)],
        }
    }

    fn bound(&self, row: Row) -> f64 {
        let sys = self.system;
        match row {
            Row::Linf(i, up) => sign(up) * sys.y_tilde[i] + sys.delta / 2.0,
            Row::Dantzig(i, up) => sign(up) * self.gram_rhs[i] + self.dantzig.unwrap_or(0.0),
            Row::Saturation(i) => -sys.y_bar[i],
        }
    }

    /// Every row with its slack `h − gᵀx` and a natural scale.
    fn slacks(&self, x: &DVector<f64>) -> Vec<(Row, f64, f64)> {
        let sys = self.system;
        let mut out = Vec::new();
        let half = sys.delta / 2.0;
        if self.linf || self.l2.is_some() || self.dantzig.is_some() {
            let resid = sys.tilde_residual(x);
            if self.linf {
                for (i, &r) in resid.iter().enumerate() {
                    out.push((Row::Linf(i, true), half - r, half));
                    out.push((Row::Linf(i, false), half + r, half));
                }
            }
            if let Some(w) = self.dantzig {
                let corr = sys.phi_tilde.transpose() * &resid;
                let scale = if w > 0.0 { w } else { half };
                for (i, &c) in corr.iter().enumerate() {
                    out.push((Row::Dantzig(i, true), w - c, scale));
                    out.push((Row::Dantzig(i, false), w + c, scale));
                }
            }
        }
        if self.saturation {
            for (i, &s) in sys.bar_slack(x).iter().enumerate() {
                out.push((Row::Saturation(i), s, half));
            }
        }
        out
    }

    fn l2_excess(&self, x: &DVector<f64>) -> f64 {
        self.l2.map_or(0.0, |r| self.system.tilde_residual(x).norm() - r)
    }

    fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let lin = self.slacks(x).iter().fold(0.0f64, |m, &(_, s, _)| m.max(-s));
        lin.max(self.l2_excess(x))
    }

    /// `Σ μₐgₐ + ν∇‖Φ̃x − ỹ‖²` over all columns.
    fn multiplier_image(&self, rows: &[Row], mu: &[f64], nu: f64, x: &DVector<f64>) -> DVector<f64> {
        let sys = self.system;
        let n = sys.cols();
        let mut tilde = DVector::zeros(sys.m_tilde());
        let mut gram = DVector::zeros(n);
        let mut bar = DVector::zeros(sys.m_bar());
        for (&row, &m) in rows.iter().zip(mu) {
            match row {
                Row::Linf(i, up) => tilde[i] += sign(up) * m,
                Row::Dantzig(i, up) => gram[i] += sign(up) * m,
                Row::Saturation(i) => bar[i] -= m,
            }
        }
        if nu > 0.0 {
            tilde.axpy(2.0 * nu, &sys.tilde_residual(x), 1.0);
        }
        let mut q = DVector::zeros(n);
        q.gemv_tr(1.0, &sys.phi_tilde, &tilde, 0.0);
        q.gemv(1.0, self.gram, &gram, 1.0);
        q.gemv_tr(1.0, &sys.phi_bar, &bar, 1.0);
        q
    }
}

fn sign(up: bool) -> f64 {
    if up {
        1.0
    } else {
        -1.0
    }
}

/// Minimizes `‖x‖₁` over `cons`, starting from the guess `x`. The initial
/// columns are the nonzeros of `sparse` plus those where `dual` (an estimate
/// of the ℓ1 subgradient at the optimum) is close to ±1. Returns a point that
/// violates no constraint by more than `tol` and carries an optimality
/// certificate, or `None` when the guess could not be completed.
pub(crate) fn refine(
    cons: &Constraints<'_>,
    x: &DVector<f64>,
    sparse: &DVector<f64>,
    dual: &DVector<f64>,
    tol: f64,
) -> Option<DVector<f64>> {
    let n = cons.system.cols();
    let mut cols: Vec<usize> = (0..n).filter(|&j| sparse[j] != 0.0 || dual[j].abs() >= DUAL_CANDIDATE).collect();
    let mut rows: Vec<Row> =
        cons.slacks(x).into_iter().filter(|&(_, s, scale)| s <= NEAR_ACTIVE * scale).map(|(r, _, _)| r).collect();
    let mut current = x.clone();

    for _ in 0..MAX_ROUNDS {
        let reduced = Reduced::new(cons, &cols, &rows);
        let start = DVector::from_fn(cols.len(), |c, _| current[cols[c]]);
        let sol = reduced.solve(&start)?;
        let mut full = DVector::zeros(n);
        for (c, &j) in cols.iter().enumerate() {
            full[j] = sol.x[c];
        }

        let mut grew = false;
        for (row, s, _) in cons.slacks(&full) {
            if s < 0.0 && !rows.contains(&row) {
                rows.push(row);
                grew = true;
            }
        }
        let q = cons.multiplier_image(&rows[..sol.mu.len()], &sol.mu, sol.nu, &full);
        let mut in_cols = vec![false; n];
        cols.iter().for_each(|&j| in_cols[j] = true);
        let mut entering: Vec<usize> = (0..n).filter(|&j| !in_cols[j] && q[j].abs() > 1.0 + CERTIFICATE_TOL).collect();
        entering.sort_by(|&a, &b| q[b].abs().total_cmp(&q[a].abs()).then(a.cmp(&b)));
        entering.truncate(MAX_ENTERING);
        grew |= !entering.is_empty();
        cols.extend(entering);
        current = full;
        if !grew {
            return (cons.max_violation(&current) <= tol).then_some(current);
        }
        cols.sort_unstable();
    }
    None
}

/// The optional quadratic constraint `(xᵀAx − 2bᵀx + c) − 1 ≤ 0`, already
/// divided by the squared radius.
struct Quad {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: f64,
    /// Squared radius, to undo the normalization of the multiplier.
    r2: f64,
}

impl Quad {
    fn value(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.a * x)) - 2.0 * self.b.dot(x) + self.c - 1.0
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (&self.a * x - &self.b) * 2.0
    }
}

/// ℓ1 minimization over the chosen columns and rows, with each linear row
/// scaled to unit norm. One elastic variable `s ≥ 0` relaxes every
/// constraint at a large cost, so a guess that is missing columns still
/// yields multipliers that point at them.
struct Reduced {
    g: DMatrix<f64>,
    h: DVector<f64>,
    row_norm: DVector<f64>,
    quad: Option<Quad>,
}

struct ReducedSolution {
    x: DVector<f64>,
    /// Multipliers of the linear rows in their original scaling.
    mu: Vec<f64>,
    /// Multiplier of `‖Φ̃x − ỹ‖² ≤ r²`.
    nu: f64,
}

const ELASTIC_PENALTY: f64 = 1e6;
const MAX_IPM: usize = 120;
const STEP_TO_BOUNDARY: f64 = 0.995;
const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-8;
const GAP_TOL: f64 = 1e-10;

/// Primal-dual iterate. `x = p − m`, `w` and `wq` are slacks of the rows and
/// of the quadratic constraint, `s` is the elastic variable and `sp`, `sm`,
/// `z`, `zq`, `ss` the matching duals.
#[derive(Clone)]
struct Point {
    p: DVector<f64>,
    m: DVector<f64>,
    w: DVector<f64>,
    wq: f64,
    s: f64,
    sp: DVector<f64>,
    sm: DVector<f64>,
    z: DVector<f64>,
    zq: f64,
    ss: f64,
}

struct Direction(Point);

impl Point {
    fn x(&self) -> DVector<f64> {
        &self.p - &self.m
    }

    fn pairs(&self, quad: bool) -> usize {
        2 * self.p.len() + self.w.len() + 1 + usize::from(quad)
    }

    fn complementarity(&self, quad: bool) -> f64 {
        let mut total = self.p.dot(&self.sp) + self.m.dot(&self.sm) + self.w.dot(&self.z) + self.s * self.ss;
        if quad {
            total += self.wq * self.zq;
        }
        total / self.pairs(quad).max(1) as f64
    }

    fn max_step(&self, d: &Direction, quad: bool) -> f64 {
        let mut alpha = 1.0f64;
        let mut limit = |v: &DVector<f64>, dv: &DVector<f64>| {
            for (&a, &b) in v.iter().zip(dv.iter()) {
                if b < 0.0 {
                    alpha = alpha.min(-a / b);
                }
            }
        };
        let d = &d.0;
        limit(&self.p, &d.p);
        limit(&self.m, &d.m);
        limit(&self.w, &d.w);
        limit(&self.sp, &d.sp);
        limit(&self.sm, &d.sm);
        limit(&self.z, &d.z);
        for (a, b) in [(self.s, d.s), (self.ss, d.ss)] {
            if b < 0.0 {
                alpha = alpha.min(-a / b);
            }
        }
        if quad {
            for (a, b) in [(self.wq, d.wq), (self.zq, d.zq)] {
                if b < 0.0 {
                    alpha = alpha.min(-a / b);
                }
            }
        }
        alpha
    }

    fn step(&self, d: &Direction, alpha: f64) -> Point {
        let d = &d.0;
        Point {
            p: &self.p + &d.p * alpha,
            m: &self.m + &d.m * alpha,
            w: &self.w + &d.w * alpha,
            wq: self.wq + d.wq * alpha,
            s: self.s + d.s * alpha,
            ss: self.ss + d.ss * alpha,
            sp: &self.sp + &d.sp * alpha,
            sm: &self.sm + &d.sm * alpha,
            z: &self.z + &d.z * alpha,
            zq: self.zq + d.zq * alpha,
        }
    }
}

/// Residuals of the optimality conditions at a point.
struct Residuals {
    /// `1 + g − sp` and `1 − g − sm` with `g = Gᵀz + zq∇f`.
    rp: DVector<f64>,
    rm: DVector<f64>,
    /// `Gx − s + w − h`.
    rw: DVector<f64>,
    /// `f(x) − s + wq`.
    rq: f64,
    /// `ρ − Σz − zq − ss`.
    rs: f64,
}

impl Residuals {
    fn primal(&self) -> f64 {
        self.rw.amax().max(self.rq.abs())
    }

    fn dual(&self) -> f64 {
        self.rp.amax().max(self.rm.amax()).max(self.rs.abs() / ELASTIC_PENALTY)
    }
}

impl Reduced {
    fn new(cons: &Constraints<'_>, cols: &[usize], rows: &[Row]) -> Self {
        let mut g = DMatrix::from_fn(rows.len(), cols.len(), |a, c| cons.coefficient(rows[a], cols[c]));
        let mut h = DVector::from_fn(rows.len(), |a, _| cons.bound(rows[a]));
        let mut row_norm = DVector::from_element(rows.len(), 1.0);
        for a in 0..rows.len() {
            let norm = g.row(a).norm();
            if norm > 0.0 {
                g.row_mut(a).unscale_mut(norm);
                h[a] /= norm;
                row_norm[a] = norm;
            }
        }
        let quad = cons.l2.map(|r| {
            let r2 = r * r;
            Quad {
                a: DMatrix::from_fn(cols.len(), cols.len(), |a, b| cons.gram[(cols[a], cols[b])] / r2),
                b: DVector::from_fn(cols.len(), |a, _| cons.gram_rhs[cols[a]] / r2),
                c: cons.system.y_tilde.norm_squared() / r2,
                r2,
            }
        });
        Reduced { g, h, row_norm, quad }
    }

    fn residuals(&self, pt: &Point) -> Residuals {
        let x = pt.x();
        let mut g = self.g.tr_mul(&pt.z);
        let mut rq = 0.0;
        let mut rs = ELASTIC_PENALTY - pt.z.sum() - pt.ss;
        if let Some(q) = &self.quad {
            g.axpy(pt.zq, &q.gradient(&x), 1.0);
            rq = q.value(&x) - pt.s + pt.wq;
            rs -= pt.zq;
        }
        Residuals {
            rp: g.map(|v| 1.0 + v) - &pt.sp,
            rm: g.map(|v| 1.0 - v) - &pt.sm,
            rw: (&self.g * &x + &pt.w - &self.h).add_scalar(-pt.s),
            rq,
            rs,
        }
    }

    fn start(&self, x0: &DVector<f64>) -> Point {
        let pad = 1e-2 * (1.0 + x0.amax());
        let p = x0.map(|v| v.max(0.0) + pad);
        let m = x0.map(|v| (-v).max(0.0) + pad);
        let x = &p - &m;
        let room = &self.h - &self.g * &x;
        let fx = self.quad.as_ref().map_or(-1.0, |q| q.value(&x));
        let s = (-room.min()).max(fx).max(0.0) + pad;
        let w = room.add_scalar(s);
        let wq = s - fx;
        let z = DVector::from_element(w.len(), 0.1);
        let zq = 1.0;
        let ss = (ELASTIC_PENALTY - z.sum() - zq).max(1.0);
        let mut g = self.g.tr_mul(&z);
        if let Some(q) = &self.quad {
            g.axpy(zq, &q.gradient(&x), 1.0);
        }
        let sp = g.map(|v| (1.0 + v).max(0.1));
        let sm = g.map(|v| (1.0 - v).max(0.1));
        Point { p, m, w, wq, s, sp, sm, z, zq, ss }
    }

    fn solve(&self, x0: &DVector<f64>) -> Option<ReducedSolution> {
        let quad = self.quad.is_some();
        let n = x0.len();
        let mut pt = self.start(x0);
        for _ in 0..MAX_IPM {
            let res = self.residuals(&pt);
            let mu = pt.complementarity(quad);
            if res.primal() <= PRIMAL_TOL && res.dual() <= DUAL_TOL && mu <= GAP_TOL {
                let mu_rows = pt.z.iter().zip(self.row_norm.iter()).map(|(&z, &s)| z / s).collect();
                let nu = self.quad.as_ref().map_or(0.0, |q| pt.zq / q.r2);
                return Some(ReducedSolution { x: pt.x(), mu: mu_rows, nu });
            }
            let newton = self.factor(&pt)?;

            let affine = Targets {
                p: -pt.p.component_mul(&pt.sp),
                m: -pt.m.component_mul(&pt.sm),
                w: -pt.w.component_mul(&pt.z),
                q: -pt.wq * pt.zq,
                s: -pt.s * pt.ss,
            };
            let da = newton.direction(self, &pt, &res, &affine);
            let alpha_aff = pt.max_step(&da, quad);
            let mu_aff = pt.step(&da, alpha_aff).complementarity(quad);
            let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);
            let target = sigma * mu;
            let a = &da.0;
            let corrector = Targets {
                p: affine.p.map(|v| v + target) - a.p.component_mul(&a.sp),
                m: affine.m.map(|v| v + target) - a.m.component_mul(&a.sm),
                w: affine.w.map(|v| v + target) - a.w.component_mul(&a.z),
                q: affine.q + target - a.wq * a.zq,
                s: affine.s + target - a.s * a.ss,
            };
            let d = newton.direction(self, &pt, &res, &corrector);
            let alpha = (STEP_TO_BOUNDARY * pt.max_step(&d, quad)).min(1.0);
            if !(alpha > 1e-12) {
                return None;
            }
            pt = pt.step(&d, alpha);
            debug_assert_eq!(pt.p.len(), n);
        }
        None
    }

    /// Factors the normal matrix `E⁻¹ + GᵀZW⁻¹G + (zq/wq)∇f∇fᵀ + zq∇²f`.
    fn factor(&self, pt: &Point) -> Option<Newton> {
        let n = pt.p.len();
        let dp = pt.sp.component_div(&pt.p);
        let dm = pt.sm.component_div(&pt.m);
        let e = DVector::from_fn(n, |j, _| 1.0 / dp[j] + 1.0 / dm[j]);
        let zw = pt.z.component_div(&pt.w);
        let scaled = DMatrix::from_fn(self.g.nrows(), n, |a, c| self.g[(a, c)] * zw[a].sqrt());
        let mut k = scaled.tr_mul(&scaled);
        for j in 0..n {
            k[(j, j)] += 1.0 / e[j];
        }
        let grad = self.quad.as_ref().map(|q| q.gradient(&pt.x()));
        if let (Some(q), Some(gf)) = (&self.quad, &grad) {
            k.ger(pt.zq / pt.wq, gf, gf, 1.0);
            k += &q.a * (2.0 * pt.zq);
        }
        let chol = Cholesky::new(k)?;
        Some(Newton { chol, dp, dm, e, zw, grad })
    }
}

/// Right-hand sides of the linearized complementarity equations.
struct Targets {
    p: DVector<f64>,
    m: DVector<f64>,
    w: DVector<f64>,
    q: f64,
    s: f64,
}

struct Newton {
    chol: Cholesky<f64, nalgebra::Dyn>,
    dp: DVector<f64>,
    dm: DVector<f64>,
    e: DVector<f64>,
    zw: DVector<f64>,
    grad: Option<DVector<f64>>,
}

impl Newton {
    fn direction(&self, red: &Reduced, pt: &Point, res: &Residuals, t: &Targets) -> Direction {
        let ap = -&res.rp + t.p.component_div(&pt.p);
        let am = -&res.rm + t.m.component_div(&pt.m);
        let c = ap.component_div(&self.dp) - am.component_div(&self.dm);
        let bw = -&res.rw - t.w.component_div(&pt.z);
        let kappa = if red.quad.is_some() { pt.zq / pt.wq } else { 0.0 };
        let bq = if red.quad.is_some() { -res.rq - t.q / pt.zq } else { 0.0 };
        let a_s = -res.rs + t.s / pt.s;

        // dx = dx0 + ds·dv, then the elastic equation fixes ds
        let mut r0 = c.component_div(&self.e);
        r0.gemv_tr(1.0, &red.g, &self.zw.component_mul(&bw), 1.0);
        let mut v = red.g.tr_mul(&self.zw);
        if let Some(gf) = &self.grad {
            r0.axpy(kappa * bq, gf, 1.0);
            v.axpy(kappa, gf, 1.0);
        }
        let dx0 = self.chol.solve(&r0);
        let dv = self.chol.solve(&v);
        let ds = (a_s - self.zw.dot(&bw) - kappa * bq + v.dot(&dx0))
            / (self.zw.sum() + kappa + pt.ss / pt.s - v.dot(&dv));
        let dx = dx0 + dv * ds;

        let dz = (&red.g * &dx - &bw).add_scalar(-ds).component_mul(&self.zw);
        let mut dg = red.g.tr_mul(&dz);
        let mut dzq = 0.0;
        let mut dwq = 0.0;
        if let (Some(q), Some(gf)) = (&red.quad, &self.grad) {
            dzq = kappa * (gf.dot(&dx) - ds - bq);
            dg.axpy(dzq, gf, 1.0);
            dg.gemv(2.0 * pt.zq, &q.a, &dx, 1.0);
            dwq = (t.q - pt.wq * dzq) / pt.zq;
        }
        // take the well-conditioned side from its own equation, the other from dx
        let mut dp = DVector::zeros(dx.len());
        let mut dm = DVector::zeros(dx.len());
        for j in 0..dx.len() {
            if self.dp[j] >= self.dm[j] {
                dp[j] = (ap[j] - dg[j]) / self.dp[j];
                dm[j] = dp[j] - dx[j];
            } else {
                dm[j] = (am[j] + dg[j]) / self.dm[j];
                dp[j] = dx[j] + dm[j];
            }
        }
        let dsp = (&t.p - pt.sp.component_mul(&dp)).component_div(&pt.p);
        let dsm = (&t.m - pt.sm.component_mul(&dm)).component_div(&pt.m);
        let dw = (&t.w - pt.w.component_mul(&dz)).component_div(&pt.z);
        let dss = (t.s - pt.ss * ds) / pt.s;
        Direction(Point { p: dp, m: dm, w: dw, wq: dwq, s: ds, sp: dsp, sm: dsm, z: dz, zq: dzq, ss: dss })
    }
}
