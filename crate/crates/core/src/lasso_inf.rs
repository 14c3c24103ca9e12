//! ADMM for the quantization-consistent LASSO
//!
//! ```text
//! minimize    ½‖Φ̃x − ỹ‖² + λΔ‖x‖₁
//! subject to  ‖Φ̃x − ỹ‖∞ ≤ Δ/2,   Φ̄x ≥ ȳ
//! ```
//!
//! The constraints are split off with `u = Φ̃x − ỹ` and `v = Φ̄x − ȳ`. Each
//! outer iteration projects `u` onto the `Δ/2` box and `v` onto the
//! nonnegative orthant, minimizes the augmented Lagrangian over `x` with an
//! accelerated proximal gradient inner loop, takes a dual ascent step on
//! `α`, `β`, and then adapts the penalty `θ` from the residual balance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::gram_top_eigenvalue;
use crate::partition::PartitionedSystem;
use crate::prox::{clamp_in_place, nonneg_in_place, shrink_in_place};
use crate::report::{dvector_as_vec, Feasibility, SolveReport, TraceRow, TraceSink};

/// Safety factor applied to power-iteration Lipschitz estimates.
pub const LIPSCHITZ_INFLATION: f64 = 1.01;

/// Options for the `x`-update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InnerOptions {
    pub max_iterations: usize,
    /// Stop once `‖x_k − x_{k−1}‖ ≤ tol · max(‖x_k‖, 1)`.
    pub tolerance: f64,
    pub power_iterations: usize,
}

impl Default for InnerOptions {
    fn default() -> Self {
        InnerOptions { max_iterations: 5_000, tolerance: 1e-8, power_iterations: 50 }
    }
}

/// Penalty schedule and stopping rule shared by the ADMM solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdmmOptions {
    /// Initial penalty `θ`.
    pub theta0: f64,
    /// Residual balance factor `μ`.
    pub mu: f64,
    /// Penalty multiplier `τ`.
    pub tau: f64,
    pub max_outer: usize,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub inner: InnerOptions,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        AdmmOptions {
            theta0: 1.0,
            mu: 10.0,
            tau: 2.0,
            max_outer: 20_000,
            tol_abs: 1e-6,
            tol_rel: 1e-6,
            inner: InnerOptions::default(),
        }
    }
}

impl AdmmOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.theta0 > 0.0 && self.theta0.is_finite()) {
            return bad("theta0 must be positive");
        }
        if !(self.mu > 1.0) {
            return bad("mu must exceed 1");
        }
        if !(self.tau > 1.0) {
            return bad("tau must exceed 1");
        }
        if !(self.tol_abs > 0.0 && self.tol_rel > 0.0 && self.inner.tolerance > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.max_outer == 0 || self.inner.max_iterations == 0 {
            return bad("iteration caps must be positive");
        }
        Ok(())
    }
}

/// Primal, auxiliary, and dual iterates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmState {
    #[serde(with = "dvector_as_vec")]
    pub x: DVector<f64>,
    #[serde(with = "dvector_as_vec")]
    pub u: DVector<f64>,
    #[serde(with = "dvector_as_vec")]
    pub v: DVector<f64>,
    #[serde(with = "dvector_as_vec")]
    pub alpha: DVector<f64>,
    #[serde(with = "dvector_as_vec")]
    pub beta: DVector<f64>,
    pub theta: f64,
    #[serde(with = "dvector_as_vec")]
    pub x_last: DVector<f64>,
}

impl AdmmState {
    /// Zero duals with `u = Φ̃x − ỹ` and `v = Φ̄x − ȳ`.
    pub fn new(system: &PartitionedSystem, x: DVector<f64>, theta: f64) -> Result<Self> {
        if x.len() != system.cols() {
            return Err(Error::DimensionMismatch(format!(
                "start point has length {} but the system has {} columns",
                x.len(),
                system.cols()
            )));
        }
        Ok(AdmmState {
            u: system.tilde_residual(&x),
            v: system.bar_slack(&x),
            alpha: DVector::zeros(system.m_tilde()),
            beta: DVector::zeros(system.m_bar()),
            theta,
            x_last: x.clone(),
            x,
        })
    }
}

/// Penalty update from the residual balance.
///
/// Grows `θ` by `τ` when `‖r‖ > μ‖d‖`, shrinks it by `τ` when `‖d‖ > μ‖r‖`,
/// and leaves it alone otherwise.
pub fn adapt_penalty(theta: f64, r_norm: f64, d_norm: f64, mu: f64, tau: f64) -> f64 {
    if r_norm > mu * d_norm {
        theta * tau
    } else if d_norm > mu * r_norm {
        theta / tau
    } else {
        theta
    }
}

/// Primal residual `r = [u − Φ̃x + ỹ; v − Φ̄x + ȳ]` and dual residual
/// `d = θ[Φ̃(x − x_last); Φ̄(x − x_last)]`.
pub fn residuals(state: &AdmmState, system: &PartitionedSystem) -> (DVector<f64>, DVector<f64>) {
    let r_t = &state.u - system.tilde_residual(&state.x);
    let r_b = &state.v - system.bar_slack(&state.x);
    let step = &state.x - &state.x_last;
    let d_t = (&system.phi_tilde * &step) * state.theta;
    let d_b = (&system.phi_bar * &step) * state.theta;
    (concat(&r_t, &r_b), concat(&d_t, &d_b))
}

fn concat(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

/// `Φ̃` and `Φ̄` stacked into one matrix, with cached spectral information.
struct Stacked {
    a: DMatrix<f64>,
    m_tilde: usize,
    lip_tilde: f64,
    lip_bar: f64,
}

impl Stacked {
    fn new(system: &PartitionedSystem, power_iterations: usize) -> Self {
        let (mt, mb, n) = (system.m_tilde(), system.m_bar(), system.cols());
        let mut a = DMatrix::zeros(mt + mb, n);
        a.rows_mut(0, mt).copy_from(&system.phi_tilde);
        a.rows_mut(mt, mb).copy_from(&system.phi_bar);
        Stacked {
            a,
            m_tilde: mt,
            lip_tilde: gram_top_eigenvalue(&system.phi_tilde, power_iterations),
            lip_bar: gram_top_eigenvalue(&system.phi_bar, power_iterations),
        }
    }

    fn lipschitz(&self, theta: f64) -> f64 {
        let l = ((1.0 + theta) * self.lip_tilde + theta * self.lip_bar) * LIPSCHITZ_INFLATION;
        if l > 0.0 {
            l
        } else {
            1.0
        }
    }
}

/// The `x`-subproblem of one outer iteration:
///
/// ```text
/// ½‖Φ̃x−ỹ‖² + (θ/2)‖u−Φ̃x+ỹ+α/θ‖² + (θ/2)‖v−Φ̄x+ȳ+β/θ‖² + λΔ‖x‖₁
/// ```
///
/// Internally the smooth part is kept in the equivalent weighted form
/// `½Σ wᵢ(aᵢᵀx − tᵢ)²`, which differs from the expression above by a constant.
pub struct XSubproblem<'a> {
    a: &'a DMatrix<f64>,
    m_tilde: usize,
    w_tilde: f64,
    w_bar: f64,
    target: DVector<f64>,
    l1_weight: f64,
    lipschitz: f64,
}

impl<'a> XSubproblem<'a> {
    fn build(stacked: &'a Stacked, state: &AdmmState, system: &PartitionedSystem, lambda: f64) -> Self {
        let theta = state.theta;
        let (mt, mb) = (system.m_tilde(), system.m_bar());
        let mut target = DVector::zeros(mt + mb);
        for i in 0..mt {
            target[i] = system.y_tilde[i] + (theta * state.u[i] + state.alpha[i]) / (1.0 + theta);
        }
        for i in 0..mb {
            target[mt + i] = system.y_bar[i] + state.v[i] + state.beta[i] / theta;
        }
        XSubproblem {
            a: &stacked.a,
            m_tilde: stacked.m_tilde,
            w_tilde: 1.0 + theta,
            w_bar: theta,
            target,
            l1_weight: lambda * system.delta,
            lipschitz: stacked.lipschitz(theta),
        }
    }

    /// Upper bound on the Lipschitz constant of the smooth gradient.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn weight(&self, i: usize) -> f64 {
        if i < self.m_tilde {
            self.w_tilde
        } else {
            self.w_bar
        }
    }

    fn smooth_from_product(&self, ax: &DVector<f64>) -> f64 {
        let (mut st, mut sb) = (0.0, 0.0);
        for (i, (p, t)) in ax.iter().zip(self.target.iter()).enumerate() {
            let e = p - t;
            if i < self.m_tilde {
                st += e * e;
            } else {
                sb += e * e;
            }
        }
        0.5 * (self.w_tilde * st + self.w_bar * sb)
    }

    fn objective_from_product(&self, x: &DVector<f64>, ax: &DVector<f64>) -> f64 {
        self.smooth_from_product(ax) + self.l1_weight * x.lp_norm(1)
    }

    /// Smooth part in weighted form.
    pub fn smooth_value(&self, x: &DVector<f64>) -> f64 {
        self.smooth_from_product(&(self.a * x))
    }

    /// Full subproblem objective in weighted form.
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        self.objective_from_product(x, &(self.a * x))
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(x.len());
        let mut resid = self.a * x;
        self.weigh_residual(&mut resid);
        g.gemv_tr(1.0, self.a, &resid, 0.0);
        g
    }

    fn weigh_residual(&self, ax: &mut DVector<f64>) {
        for (i, (p, t)) in ax.iter_mut().zip(self.target.iter()).enumerate() {
            *p = self.weight(i) * (*p - t);
        }
    }

    /// Accelerated proximal gradient with a monotone restart: a momentum step
    /// that would increase the objective is discarded and replaced by a plain
    /// proximal gradient step from the current iterate.
    ///
    /// Returns the minimizer estimate and the iteration count. When `history`
    /// is given, the objective after every accepted step is appended.
    pub fn minimize(
        &self,
        start: &DVector<f64>,
        opts: &InnerOptions,
        mut history: Option<&mut Vec<f64>>,
    ) -> (DVector<f64>, usize) {
        let n = start.len();
        let step = 1.0 / self.lipschitz;
        let thr = self.l1_weight * step;

        let mut x = start.clone();
        let mut ax = self.a * &x;
        let mut fx = self.objective_from_product(&x, &ax);
        let mut y = x.clone();
        let mut ay = ax.clone();
        let mut momentum = false;
        let mut t = 1.0f64;

        let mut resid = DVector::zeros(ax.len());
        let mut grad = DVector::zeros(n);
        let mut z = DVector::zeros(n);
        let mut az = DVector::zeros(ax.len());

        let mut iterations = 0;
        while iterations < opts.max_iterations {
            iterations += 1;
            resid.copy_from(&ay);
            self.weigh_residual(&mut resid);
            grad.gemv_tr(1.0, self.a, &resid, 0.0);
            z.copy_from(&y);
            z.axpy(-step, &grad, 1.0);
            shrink_in_place(z.as_mut_slice(), thr);
            az.gemv(1.0, self.a, &z, 0.0);
            let fz = self.objective_from_product(&z, &az);

            if fz > fx {
                if momentum {
                    y.copy_from(&x);
                    ay.copy_from(&ax);
                    momentum = false;
                    t = 1.0;
                    continue;
                }
                // a plain step failed to descend: numerically converged
                break;
            }

            let change = (&z - &x).norm();
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let coef = (t - 1.0) / t_next;
            // y = z + coef (z − x), and the same for the products
            y.copy_from(&z);
            y.axpy(-coef, &x, 1.0 + coef);
            ay.copy_from(&az);
            ay.axpy(-coef, &ax, 1.0 + coef);
            momentum = coef != 0.0;
            std::mem::swap(&mut x, &mut z);
            std::mem::swap(&mut ax, &mut az);
            fx = fz;
            t = t_next;
            if let Some(h) = history.as_deref_mut() {
                h.push(fx);
            }
            if change <= opts.tolerance * x.norm().max(1.0) {
                break;
            }
        }
        (x, iterations)
    }
}

/// Builds the `x`-subproblem for `state` (computes its Lipschitz bound).
pub fn x_subproblem<'a>(
    stacked: &'a StackedSystem,
    state: &AdmmState,
    system: &PartitionedSystem,
    lambda: f64,
) -> XSubproblem<'a> {
    XSubproblem::build(&stacked.0, state, system, lambda)
}

/// Cached stacked form of a system, reusable across `x`-updates.
pub struct StackedSystem(Stacked);

impl StackedSystem {
    pub fn new(system: &PartitionedSystem, power_iterations: usize) -> Self {
        StackedSystem(Stacked::new(system, power_iterations))
    }
}

/// Approximately minimizes the augmented Lagrangian over `x`, warm-started
/// at `state.x`.
pub fn x_update(
    state: &AdmmState,
    system: &PartitionedSystem,
    lambda: f64,
    inner: &InnerOptions,
) -> Result<DVector<f64>> {
    check_state(state, system)?;
    if !(state.theta > 0.0) {
        return Err(Error::InvalidArgument("θ must be positive".into()));
    }
    let stacked = Stacked::new(system, inner.power_iterations);
    let sub = XSubproblem::build(&stacked, state, system, lambda);
    Ok(sub.minimize(&state.x, inner, None).0)
}

fn check_state(state: &AdmmState, system: &PartitionedSystem) -> Result<()> {
    let ok = state.x.len() == system.cols()
        && state.x_last.len() == system.cols()
        && state.u.len() == system.m_tilde()
        && state.alpha.len() == system.m_tilde()
        && state.v.len() == system.m_bar()
        && state.beta.len() == system.m_bar();
    if ok {
        Ok(())
    } else {
        Err(Error::DimensionMismatch("ADMM state does not match the system".into()))
    }
}

/// `½‖Φ̃x−ỹ‖² + λΔ‖x‖₁`.
pub fn lasso_objective(system: &PartitionedSystem, lambda: f64, x: &DVector<f64>) -> f64 {
    0.5 * system.tilde_residual(x).norm_squared() + lambda * system.delta * x.lp_norm(1)
}

/// Solves from `x = 0`.
pub fn solve_lasso_inf(system: &PartitionedSystem, lambda: f64, options: &AdmmOptions) -> Result<SolveReport> {
    solve_lasso_inf_with(system, lambda, options, None, None)
}

/// Solves from an optional start point, reporting each outer iteration to
/// `trace` when one is given.
pub fn solve_lasso_inf_with(
    system: &PartitionedSystem,
    lambda: f64,
    options: &AdmmOptions,
    start: Option<&DVector<f64>>,
    mut trace: Option<&mut dyn TraceSink>,
) -> Result<SolveReport> {
    options.validate()?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("λ must be finite and nonnegative, got {lambda}")));
    }
    if system.m_tilde() == 0 {
        return Err(Error::EmptyUnsaturatedBlock);
    }
    let n = system.cols();
    let x0 = start.cloned().unwrap_or_else(|| DVector::zeros(n));
    let mut state = AdmmState::new(system, x0, options.theta0)?;

    let stacked = Stacked::new(system, options.inner.power_iterations);
    let (mt, mb) = (system.m_tilde(), system.m_bar());
    let half = system.delta / 2.0;
    let b = concat(&system.y_tilde, &system.y_bar);

    let mut ax = &stacked.a * &state.x;
    let mut ax_last = ax.clone();
    let mut r = DVector::zeros(mt + mb);
    let mut aty = DVector::zeros(n);
    let sqrt_m = ((mt + mb) as f64).sqrt();
    let sqrt_n = (n as f64).sqrt();

    let mut converged = false;
    let mut iterations = 0;
    let (mut r_norm, mut d_norm) = (f64::INFINITY, f64::INFINITY);

    for k in 0..options.max_outer {
        iterations = k + 1;
        let theta = state.theta;
        for i in 0..mt {
            state.u[i] = ax[i] - system.y_tilde[i] - state.alpha[i] / theta;
        }
        clamp_in_place(state.u.as_mut_slice(), half);
        for i in 0..mb {
            state.v[i] = ax[mt + i] - system.y_bar[i] - state.beta[i] / theta;
        }
        nonneg_in_place(state.v.as_mut_slice());

        let sub = XSubproblem::build(&stacked, &state, system, lambda);
        let (x_new, _) = sub.minimize(&state.x, &options.inner, None);
        state.x_last = std::mem::replace(&mut state.x, x_new);
        std::mem::swap(&mut ax, &mut ax_last);
        ax.gemv(1.0, &stacked.a, &state.x, 0.0);

        for i in 0..mt {
            r[i] = state.u[i] - ax[i] + system.y_tilde[i];
            state.alpha[i] += theta * r[i];
        }
        for i in 0..mb {
            r[mt + i] = state.v[i] - ax[mt + i] + system.y_bar[i];
            state.beta[i] += theta * r[mt + i];
        }
        r_norm = r.norm();
        d_norm = theta * (&ax - &ax_last).norm();

        if let Some(sink) = trace.as_deref_mut() {
            sink.record(&TraceRow {
                iteration: iterations,
                theta,
                primal_residual: r_norm,
                dual_residual: d_norm,
                objective: lasso_objective(system, lambda, &state.x),
            });
        }

        let uv_norm = (state.u.norm_squared() + state.v.norm_squared()).sqrt();
        let eps_pri = sqrt_m * options.tol_abs + options.tol_rel * uv_norm.max((&ax - &b).norm());
        if r_norm <= eps_pri {
            let y = concat(&state.alpha, &state.beta);
            aty.gemv_tr(1.0, &stacked.a, &y, 0.0);
            let eps_dual = sqrt_n * options.tol_abs + options.tol_rel * aty.norm();
            if d_norm <= eps_dual && max_violation_from_product(&ax, system) <= options.tol_abs {
                converged = true;
                break;
            }
        }
        state.theta = adapt_penalty(theta, r_norm, d_norm, options.mu, options.tau);
    }

    let x_hat = state.x;
    let feasibility = Feasibility {
        linf: Some(system.linf_violation(&x_hat)),
        saturation: Some(system.saturation_violation(&x_hat)),
        l2: None,
        dantzig: None,
    };
    Ok(SolveReport {
        objective: lasso_objective(system, lambda, &x_hat),
        x_hat,
        iterations,
        primal_residual: r_norm,
        dual_residual: d_norm,
        feasibility,
        converged,
        stalled: false,
        theta: state.theta,
    })
}

fn max_violation_from_product(ax: &DVector<f64>, system: &PartitionedSystem) -> f64 {
    let mt = system.m_tilde();
    let half = system.delta / 2.0;
    let mut worst = 0.0f64;
    for i in 0..mt {
        worst = worst.max((ax[i] - system.y_tilde[i]).abs() - half);
    }
    for i in 0..system.m_bar() {
        worst = worst.max(system.y_bar[i] - ax[mt + i]);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_system(y: &[f64], delta: f64) -> PartitionedSystem {
        let n = y.len();
        PartitionedSystem::from_blocks(
            DMatrix::identity(n, n),
            DVector::from_column_slice(y),
            DMatrix::zeros(0, n),
            DMatrix::zeros(0, n),
            delta,
            4.0,
        )
        .unwrap()
    }

    fn tight() -> AdmmOptions {
        AdmmOptions { tol_abs: 1e-9, tol_rel: 1e-9, ..Default::default() }
    }

    /// Minimizes `½(x − y)² + c|x|` over `[lo, hi]` on a grid of step 1e-6.
    fn grid_min(y: f64, c: f64, lo: f64, hi: f64) -> f64 {
        let steps = ((hi - lo) / 1e-6).round() as usize;
        (0..=steps)
            .map(|k| lo + (hi - lo) * k as f64 / steps as f64)
            .map(|x| (0.5 * (x - y) * (x - y) + c * x.abs(), x))
            .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a })
            .1
    }

    #[test]
    fn separable_example_clamps_to_box() {
        let sys = identity_system(&[1.0, 1.0], 1.0);
        let rep = solve_lasso_inf(&sys, 2.0, &tight()).unwrap();
        assert!(rep.converged);
        let oracle = grid_min(1.0, 2.0, 0.5, 1.5);
        assert!((oracle - 0.5).abs() < 1e-6);
        for v in rep.x_hat.iter() {
            assert!((v - oracle).abs() < 1e-6, "{}", rep.x_hat);
        }
    }

    #[test]
    fn zero_lambda_recovers_observations() {
        let sys = identity_system(&[1.0, 1.0], 1.0);
        let rep = solve_lasso_inf(&sys, 0.0, &tight()).unwrap();
        assert!((rep.x_hat - DVector::from_element(2, 1.0)).amax() < 1e-6);
    }

    #[test]
    fn penalty_rule() {
        assert_eq!(adapt_penalty(3.0, 100.0, 1.0, 10.0, 2.0), 6.0);
        assert_eq!(adapt_penalty(3.0, 1.0, 100.0, 10.0, 2.0), 1.5);
        assert_eq!(adapt_penalty(3.0, 5.0, 5.0, 10.0, 2.0), 3.0);
        assert_eq!(adapt_penalty(3.0, 10.0, 1.0, 10.0, 2.0), 3.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let sys = identity_system(&[1.0], 1.0);
        assert!(solve_lasso_inf(&sys, -1.0, &AdmmOptions::default()).is_err());
        let bad = AdmmOptions { mu: 1.0, ..Default::default() };
        assert!(solve_lasso_inf(&sys, 1.0, &bad).is_err());
        let empty = PartitionedSystem::from_blocks(
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
            DMatrix::identity(2, 2),
            DMatrix::zeros(0, 2),
            1.0,
            4.0,
        )
        .unwrap();
        assert!(matches!(solve_lasso_inf(&empty, 1.0, &AdmmOptions::default()), Err(Error::EmptyUnsaturatedBlock)));
        let start = DVector::zeros(3);
        assert!(solve_lasso_inf_with(&sys, 1.0, &AdmmOptions::default(), Some(&start), None).is_err());
    }

    #[test]
    fn residuals_vanish_without_motion() {
        let sys = identity_system(&[1.0, -2.0], 1.0);
        let mut st = AdmmState::new(&sys, DVector::from_column_slice(&[0.3, 0.1]), 2.0).unwrap();
        let (r, d) = residuals(&st, &sys);
        assert_eq!(r.amax(), 0.0);
        assert_eq!(d.amax(), 0.0);
        st.x[0] = 1.3;
        let (_, d) = residuals(&st, &sys);
        assert!((d[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn trace_receives_every_iteration() {
        let sys = identity_system(&[1.0, 0.2], 1.0);
        let mut rows = Vec::new();
        let mut sink = |row: &TraceRow| rows.push(*row);
        let rep = solve_lasso_inf_with(&sys, 0.5, &AdmmOptions::default(), None, Some(&mut sink)).unwrap();
        assert_eq!(rows.len(), rep.iterations);
        assert!(rows.windows(2).all(|w| w[1].iteration == w[0].iteration + 1));
    }

    fn random_system(seed: u64) -> PartitionedSystem {
        use crate::instance::generate_instance;
        use crate::partition::partition;
        use crate::quantizer::QuantizerConfig;
        let inst = generate_instance(20, 14, 3, 3.0, QuantizerConfig::new(3, 0.8).unwrap(), seed).unwrap();
        partition(&inst)
    }

    fn random_state(sys: &PartitionedSystem, seed: u64) -> AdmmState {
        use rand::Rng;
        let mut g = crate::rng::stream(seed);
        let x = DVector::from_fn(sys.cols(), |_, _| g.gen_range(-1.0..1.0));
        let mut st = AdmmState::new(sys, x, 1.7).unwrap();
        st.alpha = DVector::from_fn(sys.m_tilde(), |_, _| g.gen_range(-0.5..0.5));
        st.beta = DVector::from_fn(sys.m_bar(), |_, _| g.gen_range(-0.5..0.5));
        st
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let sys = random_system(5);
        let st = random_state(&sys, 6);
        let stacked = StackedSystem::new(&sys, 50);
        let sub = x_subproblem(&stacked, &st, &sys, 0.4);
        let grad = sub.gradient(&st.x);
        let h = 1e-6;
        for j in 0..sys.cols() {
            let mut up = st.x.clone();
            let mut down = st.x.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (sub.smooth_value(&up) - sub.smooth_value(&down)) / (2.0 * h);
            assert!((fd - grad[j]).abs() <= 1e-5 * (1.0 + fd.abs()), "{j}: {fd} vs {}", grad[j]);
        }
    }

    #[test]
    fn inner_objective_never_increases() {
        let sys = random_system(7);
        let st = random_state(&sys, 8);
        let stacked = StackedSystem::new(&sys, 50);
        let sub = x_subproblem(&stacked, &st, &sys, 0.4);
        let mut hist = vec![sub.objective(&st.x)];
        let (x, _) = sub.minimize(&st.x, &InnerOptions::default(), Some(&mut hist));
        assert!(hist.len() > 1);
        assert!(hist.windows(2).all(|w| w[1] <= w[0]), "{hist:?}");
        assert!(sub.objective(&x) <= hist[0]);
    }

    #[test]
    fn random_instance_is_feasible_and_repeatable() {
        let sys = random_system(9);
        let a = solve_lasso_inf(&sys, 0.5, &AdmmOptions::default()).unwrap();
        let b = solve_lasso_inf(&sys, 0.5, &AdmmOptions::default()).unwrap();
        assert!(a.converged);
        assert!(a.feasibility.max_violation() <= 1e-6);
        assert_eq!(a, b);
    }
}
