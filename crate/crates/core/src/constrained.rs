//! ℓ1 minimization under any combination of the data-consistency constraints
//!
//! ```text
//! ‖Φ̃x − ỹ‖ ≤ εΔ             (l2)
//! ‖Φ̃x − ỹ‖∞ ≤ Δ/2           (linf)
//! ‖Φ̃ᵀ(Φ̃x − ỹ)‖∞ ≤ λΔ/2     (dantzig)
//! Φ̄x ≥ ȳ                    (saturation)
//! ```
//!
//! solved by consensus ADMM: every constraint gets its own split variable
//! `zᵢ = Aᵢx − bᵢ` projected onto its set, the ℓ1 term gets `z = x`, and the
//! `x`-update is one linear solve with a factorization cached for the whole
//! run. A least-squares objective can be selected instead of pure ℓ1, which
//! turns the LassoInf preset into the same model as [`crate::lasso_inf`].

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lasso_inf::{adapt_penalty, AdmmOptions};
use crate::linalg::gram_top_eigenvalue;
use crate::partition::PartitionedSystem;
use crate::prox::{clamp_in_place, nonneg_in_place, scale_into_ball, shrink_in_place};
use crate::refine::{refine, Constraints};
use crate::report::{Feasibility, SolveReport, TraceRow, TraceSink};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// `‖x‖₁`.
    L1Min,
    /// `½‖Φ̃x − ỹ‖² + λΔ‖x‖₁`.
    Lasso(f64),
}

/// Named models compared throughout the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Preset {
    Linf,
    L2,
    Dantzig,
    L2DantzigInf,
    LassoInf,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::LassoInf, Preset::Linf, Preset::L2, Preset::Dantzig, Preset::L2DantzigInf];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Linf => "Linf",
            Preset::L2 => "L2",
            Preset::Dantzig => "Dantzig",
            Preset::L2DantzigInf => "L2DantzigInf",
            Preset::LassoInf => "LassoInf",
        }
    }

    pub fn needs_epsilon(self) -> bool {
        matches!(self, Preset::L2 | Preset::L2DantzigInf)
    }

    pub fn needs_lambda(self) -> bool {
        matches!(self, Preset::Dantzig | Preset::L2DantzigInf | Preset::LassoInf)
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model `{s}`")))
    }
}

/// Which constraints are active and what is minimized.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    /// `ε` of the ℓ2 constraint.
    pub use_l2: Option<f64>,
    pub use_linf: bool,
    /// `λ` of the Dantzig constraint.
    pub use_dantzig: Option<f64>,
    pub use_saturation: bool,
    pub objective: Objective,
    /// Set when the spec was built by [`preset`].
    pub preset: Option<Preset>,
}

/// Builds a named model. `epsilon` and `lambda` are required only by the
/// presets that use them.
pub fn preset(name: Preset, epsilon: Option<f64>, lambda: Option<f64>) -> Result<ModelSpec> {
    let eps = || epsilon.ok_or(Error::MissingParameter("epsilon"));
    let lam = || lambda.ok_or(Error::MissingParameter("lambda"));
    let base = ModelSpec {
        use_l2: None,
        use_linf: false,
        use_dantzig: None,
        use_saturation: true,
        objective: Objective::L1Min,
        preset: Some(name),
    };
    let spec = match name {
        Preset::Linf => ModelSpec { use_linf: true, ..base },
        Preset::L2 => ModelSpec { use_l2: Some(eps()?), ..base },
        Preset::Dantzig => ModelSpec { use_dantzig: Some(lam()?), ..base },
        Preset::L2DantzigInf => ModelSpec { use_l2: Some(eps()?), use_linf: true, use_dantzig: Some(lam()?), ..base },
        Preset::LassoInf => ModelSpec { use_linf: true, objective: Objective::Lasso(lam()?), ..base },
    };
    spec.validate()?;
    Ok(spec)
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: f64, what: &str| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{what} must be finite and nonnegative, got {v}")))
            }
        };
        if let Some(e) = self.use_l2 {
            nonneg(e, "epsilon")?;
        }
        if let Some(l) = self.use_dantzig {
            nonneg(l, "Dantzig lambda")?;
        }
        if let Objective::Lasso(l) = self.objective {
            nonneg(l, "lasso lambda")?;
        }
        let constrained = self.use_l2.is_some() || self.use_linf || self.use_dantzig.is_some() || self.use_saturation;
        if !constrained && self.objective == Objective::L1Min {
            return Err(Error::InvalidConfig("ℓ1 minimization without constraints is trivially x = 0".into()));
        }
        Ok(())
    }

    fn epsilon_param(&self) -> Option<f64> {
        self.use_l2
    }

    fn lambda_param(&self) -> Option<f64> {
        match self.objective {
            Objective::Lasso(l) => Some(l),
            Objective::L1Min => self.use_dantzig,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SpecDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    use_l2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    use_linf: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    use_dantzig: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    use_saturation: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    objective: Option<Objective>,
}

impl Serialize for ModelSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let doc = match self.preset {
            Some(p) => SpecDoc {
                preset: Some(p),
                epsilon: if p.needs_epsilon() { self.epsilon_param() } else { None },
                lambda: if p.needs_lambda() { self.lambda_param() } else { None },
                use_l2: None,
                use_linf: None,
                use_dantzig: None,
                use_saturation: None,
                objective: None,
            },
            None => SpecDoc {
                preset: None,
                epsilon: None,
                lambda: None,
                use_l2: self.use_l2,
                use_linf: Some(self.use_linf),
                use_dantzig: self.use_dantzig,
                use_saturation: Some(self.use_saturation),
                objective: Some(self.objective),
            },
        };
        doc.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ModelSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = SpecDoc::deserialize(d)?;
        let spec = match doc.preset {
            Some(p) => {
                if doc.use_l2.is_some()
                    || doc.use_linf.is_some()
                    || doc.use_dantzig.is_some()
                    || doc.use_saturation.is_some()
                    || doc.objective.is_some()
                {
                    return Err(D::Error::custom("a preset cannot be combined with explicit constraint fields"));
                }
                preset(p, doc.epsilon, doc.lambda).map_err(D::Error::custom)?
            }
            None => {
                let spec = ModelSpec {
                    use_l2: doc.use_l2,
                    use_linf: doc.use_linf.unwrap_or(false),
                    use_dantzig: doc.use_dantzig,
                    use_saturation: doc.use_saturation.unwrap_or(false),
                    objective: doc.objective.unwrap_or(Objective::L1Min),
                    preset: None,
                };
                spec.validate().map_err(D::Error::custom)?;
                spec
            }
        };
        Ok(spec)
    }
}

/// Recomputes every constraint violation of `x` under `spec`.
pub fn feasibility(system: &PartitionedSystem, spec: &ModelSpec, x: &DVector<f64>) -> Feasibility {
    let resid = system.tilde_residual(x);
    Feasibility {
        linf: spec.use_linf.then(|| (resid.amax() - system.delta / 2.0).max(0.0)),
        saturation: spec.use_saturation.then(|| system.saturation_violation(x)),
        l2: spec.use_l2.map(|eps| (resid.norm() - eps * system.delta).max(0.0)),
        dantzig: spec
            .use_dantzig
            .map(|lam| ((system.phi_tilde.transpose() * &resid).amax() - lam * system.delta / 2.0).max(0.0)),
    }
}

/// Objective of `spec` at `x`.
pub fn objective_value(system: &PartitionedSystem, spec: &ModelSpec, x: &DVector<f64>) -> f64 {
    match spec.objective {
        Objective::L1Min => x.lp_norm(1),
        Objective::Lasso(l) => 0.5 * system.tilde_residual(x).norm_squared() + l * system.delta * x.lp_norm(1),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Identity,
    Tilde,
    /// `Φ̃ᵀΦ̃`.
    Gram,
    Bar,
}

#[derive(Debug, Clone, Copy)]
enum Set {
    /// Weighted ℓ1 prox.
    L1(f64),
    /// `½‖z/s‖²` prox.
    Quad,
    Ball(f64),
    Box(f64),
    Nonneg,
}

struct Block {
    op: Op,
    set: Set,
    scale: f64,
    b: DVector<f64>,
    z: DVector<f64>,
    /// Scaled dual `α/θ`.
    y: DVector<f64>,
    ax: DVector<f64>,
}

impl Block {
    fn new(op: Op, set: Set, scale: f64, b_unscaled: DVector<f64>) -> Self {
        let m = b_unscaled.len();
        let set = match set {
            Set::Ball(r) => Set::Ball(r * scale),
            Set::Box(r) => Set::Box(r * scale),
            other => other,
        };
        Block { op, set, scale, b: b_unscaled * scale, z: DVector::zeros(m), y: DVector::zeros(m), ax: DVector::zeros(m) }
    }

    /// `z ← prox(v)` with `v = Ax − b − y`.
    fn project(&mut self, theta: f64) {
        self.z.copy_from(&self.ax);
        self.z -= &self.b;
        self.z -= &self.y;
        let z = self.z.as_mut_slice();
        match self.set {
            Set::L1(w) => shrink_in_place(z, w / theta),
            Set::Quad => {
                let s2 = self.scale * self.scale;
                let f = theta * s2 / (1.0 + theta * s2);
                z.iter_mut().for_each(|v| *v *= f);
            }
            Set::Ball(r) => scale_into_ball(z, r),
            Set::Box(r) => clamp_in_place(z, r),
            Set::Nonneg => nonneg_in_place(z),
        }
    }
}

struct Operators<'a> {
    system: &'a PartitionedSystem,
    tilde_x: DVector<f64>,
    bar_x: DVector<f64>,
    gram_x: DVector<f64>,
    need_gram: bool,
}

impl<'a> Operators<'a> {
    fn apply(&mut self, x: &DVector<f64>) {
        self.tilde_x.gemv(1.0, &self.system.phi_tilde, x, 0.0);
        self.bar_x.gemv(1.0, &self.system.phi_bar, x, 0.0);
        if self.need_gram {
            self.gram_x.gemv_tr(1.0, &self.system.phi_tilde, &self.tilde_x, 0.0);
        }
    }

    fn fill(&self, blocks: &mut [Block], x: &DVector<f64>) {
        for blk in blocks {
            let src = match blk.op {
                Op::Identity => x,
                Op::Tilde => &self.tilde_x,
                Op::Gram => &self.gram_x,
                Op::Bar => &self.bar_x,
            };
            blk.ax.copy_from(src);
            blk.ax *= blk.scale;
        }
    }

    /// `Σ Aᵢᵀ vᵢ` where `vᵢ = pick(block)`.
    fn adjoint_sum(&self, blocks: &[Block], pick: impl Fn(&Block) -> DVector<f64>) -> DVector<f64> {
        let sys = self.system;
        let n = sys.cols();
        let mut out = DVector::zeros(n);
        let mut tilde = DVector::zeros(sys.m_tilde());
        let mut bar = DVector::zeros(sys.m_bar());
        let mut gram = DVector::zeros(n);
        let (mut any_tilde, mut any_bar, mut any_gram) = (false, false, false);
        for blk in blocks {
            let v = pick(blk);
            match blk.op {
                Op::Identity => out.axpy(blk.scale, &v, 1.0),
                Op::Tilde => {
                    tilde.axpy(blk.scale, &v, 1.0);
                    any_tilde = true;
                }
                Op::Gram => {
                    gram.axpy(blk.scale, &v, 1.0);
                    any_gram = true;
                }
                Op::Bar => {
                    bar.axpy(blk.scale, &v, 1.0);
                    any_bar = true;
                }
            }
        }
        if any_gram {
            tilde.gemv(1.0, &sys.phi_tilde, &gram, 1.0);
            any_tilde = true;
        }
        if any_tilde {
            out.gemv_tr(1.0, &sys.phi_tilde, &tilde, 1.0);
        }
        if any_bar {
            out.gemv_tr(1.0, &sys.phi_bar, &bar, 1.0);
        }
        out
    }
}

fn inverse_norm(sq_norm: f64) -> f64 {
    if sq_norm > 0.0 {
        1.0 / sq_norm.sqrt()
    } else {
        1.0
    }
}

/// First iteration at which the exact finishing step is attempted; later
/// attempts are spaced geometrically.
const REFINE_START: usize = 50;

/// Number of trailing iterations inspected by the stall diagnostic.
const STALL_WINDOW: usize = 500;

/// Solves from `x = 0`.
pub fn solve_constrained(system: &PartitionedSystem, spec: &ModelSpec, options: &AdmmOptions) -> Result<SolveReport> {
    solve_constrained_with(system, spec, options, None)
}

pub fn solve_constrained_with(
    system: &PartitionedSystem,
    spec: &ModelSpec,
    options: &AdmmOptions,
    mut trace: Option<&mut dyn TraceSink>,
) -> Result<SolveReport> {
    options.validate()?;
    spec.validate()?;
    let n = system.cols();
    let (mt, mb) = (system.m_tilde(), system.m_bar());
    let delta = system.delta;

    let tilde_sq = gram_top_eigenvalue(&system.phi_tilde, options.inner.power_iterations);
    let bar_sq = gram_top_eigenvalue(&system.phi_bar, options.inner.power_iterations);
    let s_tilde = inverse_norm(tilde_sq);
    let s_bar = inverse_norm(bar_sq);
    // ‖Φ̃ᵀΦ̃‖ = ‖Φ̃‖²
    let s_gram = inverse_norm(tilde_sq * tilde_sq);

    let l1_weight = match spec.objective {
        Objective::L1Min => 1.0,
        Objective::Lasso(l) => l * delta,
    };
    let mut blocks = vec![Block::new(Op::Identity, Set::L1(l1_weight), 1.0, DVector::zeros(n))];
    if mt > 0 {
        if matches!(spec.objective, Objective::Lasso(_)) {
            blocks.push(Block::new(Op::Tilde, Set::Quad, s_tilde, system.y_tilde.clone()));
        }
        if let Some(eps) = spec.use_l2 {
            blocks.push(Block::new(Op::Tilde, Set::Ball(eps * delta), s_tilde, system.y_tilde.clone()));
        }
        if spec.use_linf {
            blocks.push(Block::new(Op::Tilde, Set::Box(delta / 2.0), s_tilde, system.y_tilde.clone()));
        }
        if let Some(lam) = spec.use_dantzig {
            let b = system.phi_tilde.transpose() * &system.y_tilde;
            blocks.push(Block::new(Op::Gram, Set::Box(lam * delta / 2.0), s_gram, b));
        }
    }
    if spec.use_saturation && mb > 0 {
        blocks.push(Block::new(Op::Bar, Set::Nonneg, s_bar, system.y_bar.clone()));
    }
    let need_gram = blocks.iter().any(|b| b.op == Op::Gram);

    // H = Σ sᵢ² AᵢᵀAᵢ, independent of θ
    let gram = system.phi_tilde.transpose() * &system.phi_tilde;
    let mut h = DMatrix::<f64>::zeros(n, n);
    for blk in &blocks {
        let s2 = blk.scale * blk.scale;
        match blk.op {
            Op::Identity => {
                for i in 0..n {
                    h[(i, i)] += s2;
                }
            }
            Op::Tilde => h += &gram * s2,
            Op::Gram => h.gemm(s2, &gram, &gram, 1.0),
            Op::Bar => h.gemm_tr(s2, &system.phi_bar, &system.phi_bar, 1.0),
        }
    }
    let chol: Cholesky<f64, Dyn> = Cholesky::new(h)
        .ok_or_else(|| Error::NonFinite("x-update system is not positive definite".into()))?;

    let m_total: usize = blocks.iter().map(|b| b.b.len()).sum();
    let sqrt_m = (m_total as f64).sqrt();
    let sqrt_n = (n as f64).sqrt();

    let mut ops = Operators {
        system,
        tilde_x: DVector::zeros(mt),
        bar_x: DVector::zeros(mb),
        gram_x: DVector::zeros(n),
        need_gram,
    };
    let mut x = DVector::zeros(n);
    ops.apply(&x);
    ops.fill(&mut blocks, &x);
    let mut ax_last: Vec<DVector<f64>> = blocks.iter().map(|b| b.ax.clone()).collect();

    let mut theta = options.theta0;
    let mut converged = false;
    let mut iterations = 0;
    let (mut r_norm, mut d_norm) = (f64::INFINITY, f64::INFINITY);
    let mut history = Vec::new();

    let gram_rhs = system.phi_tilde.transpose() * &system.y_tilde;
    let finisher = (spec.objective == Objective::L1Min).then(|| Constraints {
        system,
        gram: &gram,
        gram_rhs: &gram_rhs,
        linf: spec.use_linf,
        dantzig: spec.use_dantzig.map(|l| l * delta / 2.0),
        saturation: spec.use_saturation,
        l2: spec.use_l2.map(|e| e * delta),
    });
    let mut next_refine = REFINE_START;

    for k in 0..options.max_outer {
        iterations = k + 1;
        for blk in blocks.iter_mut() {
            blk.project(theta);
        }
        let rhs = ops.adjoint_sum(&blocks, |b| &b.b + &b.z + &b.y);
        x = chol.solve(&rhs);
        for (last, blk) in ax_last.iter_mut().zip(&blocks) {
            last.copy_from(&blk.ax);
        }
        ops.apply(&x);
        ops.fill(&mut blocks, &x);

        let (mut r_sq, mut d_sq, mut z_sq, mut axb_sq) = (0.0, 0.0, 0.0, 0.0);
        for (blk, last) in blocks.iter_mut().zip(&ax_last) {
            for i in 0..blk.z.len() {
                let axb = blk.ax[i] - blk.b[i];
                let r = blk.z[i] - axb;
                blk.y[i] += r;
                r_sq += r * r;
                let dd = blk.ax[i] - last[i];
                d_sq += dd * dd;
                z_sq += blk.z[i] * blk.z[i];
                axb_sq += axb * axb;
            }
        }
        r_norm = r_sq.sqrt();
        d_norm = theta * d_sq.sqrt();
        history.push(r_norm);

        if let Some(sink) = trace.as_deref_mut() {
            sink.record(&TraceRow {
                iteration: iterations,
                theta,
                primal_residual: r_norm,
                dual_residual: d_norm,
                objective: objective_value(system, spec, &x),
            });
        }

        let eps_pri = sqrt_m * options.tol_abs + options.tol_rel * z_sq.sqrt().max(axb_sq.sqrt());
        if r_norm <= eps_pri {
            let aty = ops.adjoint_sum(&blocks, |b| b.y.clone()) * theta;
            let eps_dual = sqrt_n * options.tol_abs + options.tol_rel * aty.norm();
            if d_norm <= eps_dual && feasibility(system, spec, &x).max_violation() <= options.tol_abs {
                converged = true;
                break;
            }
        }
        if let Some(cons) = finisher.as_ref().filter(|_| iterations == next_refine) {
            next_refine += (iterations / 2).max(REFINE_START);
            let dual = &blocks[0].y * (-theta);
            if let Some(p) = refine(cons, &x, &blocks[0].z, &dual, options.tol_abs) {
                x = p;
                converged = true;
                break;
            }
        }
        let next = adapt_penalty(theta, r_norm, d_norm, options.mu, options.tau);
        if next != theta {
            let f = theta / next;
            for blk in blocks.iter_mut() {
                blk.y *= f;
            }
            theta = next;
        }
    }

    let feas = feasibility(system, spec, &x);
    let stalled = !converged && feas.max_violation() > options.tol_abs && residual_stalled(&history);
    Ok(SolveReport {
        objective: objective_value(system, spec, &x),
        x_hat: x,
        iterations,
        primal_residual: r_norm,
        dual_residual: d_norm,
        feasibility: feas,
        converged,
        stalled,
        theta,
    })
}

/// The best primal residual of the last window improves on the best before
/// it by less than 1%.
fn residual_stalled(history: &[f64]) -> bool {
    if history.len() < 2 * STALL_WINDOW {
        return false;
    }
    let (early, late) = history.split_at(history.len() - STALL_WINDOW);
    let best = |h: &[f64]| h.iter().copied().fold(f64::INFINITY, f64::min);
    best(late) > 0.99 * best(early)
}
