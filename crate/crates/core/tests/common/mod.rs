//! Shared helpers for the integration tests, including an independent
//! reference solver used as an oracle.

#![allow(dead_code)]

use dequant::calibration::{oracle_parameters, CalibrationResult};
use dequant::constrained::Preset;
use dequant::instance::{generate_instance, ProblemInstance};
use dequant::partition::{partition, PartitionedSystem};
use dequant::quantizer::QuantizerConfig;
use nalgebra::{DMatrix, DVector};

/// A small instance with at least two unsaturated rows, searched from `seed`.
pub fn small_instance(n: usize, m: usize, s: usize, bits: u32, seed: u64) -> (ProblemInstance, PartitionedSystem) {
    for k in 0.. {
        let inst = generate_instance(n, m, s, 2.0, QuantizerConfig::new(bits, 1.0).unwrap(), seed * 1000 + k).unwrap();
        let sys = partition(&inst);
        if sys.m_tilde() >= 2 {
            return (inst, sys);
        }
    }
    unreachable!()
}

/// Oracle parameters scaled by `factor`, so that `x*` is strictly inside the
/// ℓ2 and Dantzig constraints when `factor > 1`.
pub fn inflated_oracle(sys: &PartitionedSystem, x_star: &DVector<f64>, factor: f64) -> CalibrationResult {
    let mut c = oracle_parameters(sys, x_star);
    c.epsilon *= factor;
    c.lambda *= factor;
    c
}

/// Constraint set and objective of one model, written out independently of
/// the library's model builder.
pub struct Model {
    pub linf: bool,
    pub saturation: bool,
    pub l2: Option<f64>,
    pub dantzig: Option<f64>,
    /// `Some(λ)` for `½‖Φ̃x − ỹ‖² + λΔ‖x‖₁`, `None` for `‖x‖₁`.
    pub lasso: Option<f64>,
}

impl Model {
    pub fn of(preset: Preset, cal: &CalibrationResult) -> Model {
        let base = Model { linf: false, saturation: true, l2: None, dantzig: None, lasso: None };
        match preset {
            Preset::Linf => Model { linf: true, ..base },
            Preset::L2 => Model { l2: Some(cal.epsilon), ..base },
            Preset::Dantzig => Model { dantzig: Some(cal.lambda), ..base },
            Preset::L2DantzigInf => Model { linf: true, l2: Some(cal.epsilon), dantzig: Some(cal.lambda), ..base },
            Preset::LassoInf => Model { linf: true, lasso: Some(cal.lambda), ..base },
        }
    }
}

pub struct Reference {
    pub x: DVector<f64>,
    pub objective: f64,
    /// Certified upper bound on `objective − optimum`.
    pub gap: f64,
}

struct Barrier<'a> {
    sys: &'a PartitionedSystem,
    model: &'a Model,
    /// Rows of `Ax ≤ b`.
    a: DMatrix<f64>,
    b: DVector<f64>,
    /// `(εΔ)²` for the quadratic constraint.
    radius2: Option<f64>,
    /// Weight of `‖x‖₁` in the objective.
    weight: f64,
}

impl<'a> Barrier<'a> {
    fn new(sys: &'a PartitionedSystem, model: &'a Model) -> Self {
        let n = sys.cols();
        let d = sys.delta;
        let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
        if model.linf {
            for i in 0..sys.m_tilde() {
                let r = sys.phi_tilde.row(i).transpose();
                rows.push((r.clone(), sys.y_tilde[i] + d / 2.0));
                rows.push((-r, -sys.y_tilde[i] + d / 2.0));
            }
        }
        if model.saturation {
            for i in 0..sys.m_bar() {
                rows.push((-sys.phi_bar.row(i).transpose(), -sys.y_bar[i]));
            }
        }
        if let Some(lam) = model.dantzig {
            let g = sys.phi_tilde.transpose() * &sys.phi_tilde;
            let c = sys.phi_tilde.transpose() * &sys.y_tilde;
            for j in 0..n {
                let r = g.row(j).transpose();
                rows.push((r.clone(), c[j] + lam * d / 2.0));
                rows.push((-r, -c[j] + lam * d / 2.0));
            }
        }
        let a = DMatrix::from_fn(rows.len(), n, |i, j| rows[i].0[j]);
        let b = DVector::from_fn(rows.len(), |i, _| rows[i].1);
        let radius2 = model.l2.map(|e| (e * d) * (e * d));
        let weight = model.lasso.map_or(1.0, |l| l * d);
        Barrier { sys, model, a, b, radius2, weight }
    }

    fn constraint_count(&self, n: usize) -> usize {
        self.b.len() + 2 * n + usize::from(self.radius2.is_some())
    }

    fn objective(&self, x: &DVector<f64>, l1: f64) -> f64 {
        let quad = if self.model.lasso.is_some() { 0.5 * self.sys.tilde_residual(x).norm_squared() } else { 0.0 };
        quad + self.weight * l1
    }

    /// Barrier value, or `None` outside the strict interior.
    fn value(&self, t: f64, p: &DVector<f64>, m: &DVector<f64>) -> Option<f64> {
        if p.iter().chain(m.iter()).any(|&v| v <= 0.0) {
            return None;
        }
        let x = p - m;
        let s = &self.b - &self.a * &x;
        if s.iter().any(|&v| v <= 0.0) {
            return None;
        }
        let mut phi = -s.iter().map(|v| v.ln()).sum::<f64>() - p.iter().chain(m.iter()).map(|v| v.ln()).sum::<f64>();
        if let Some(r2) = self.radius2 {
            let slack = r2 - self.sys.tilde_residual(&x).norm_squared();
            if slack <= 0.0 {
                return None;
            }
            phi -= slack.ln();
        }
        Some(t * self.objective(&x, p.sum() + m.sum()) + phi)
    }

    /// Gradient and Hessian in the stacked `(p, m)` variables.
    fn derivatives(&self, t: f64, p: &DVector<f64>, m: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let n = p.len();
        let x = p - m;
        let phi = &self.sys.phi_tilde;
        let resid = self.sys.tilde_residual(&x);
        let s = &self.b - &self.a * &x;
        let inv_s = s.map(|v| 1.0 / v);

        let mut gx = self.a.transpose() * &inv_s;
        let scaled = DMatrix::from_fn(self.a.nrows(), n, |i, j| self.a[(i, j)] * inv_s[i]);
        let mut hx = scaled.transpose() * &scaled;
        if self.model.lasso.is_some() {
            gx += t * phi.transpose() * &resid;
            hx += t * phi.transpose() * phi;
        }
        if let Some(r2) = self.radius2 {
            let slack = r2 - resid.norm_squared();
            let grad_q = 2.0 * phi.transpose() * &resid;
            gx += &grad_q / slack;
            hx += &grad_q * grad_q.transpose() / (slack * slack) + 2.0 * phi.transpose() * phi / slack;
        }

        let mut g = DVector::zeros(2 * n);
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            g[i] = gx[i] + t * self.weight - 1.0 / p[i];
            g[n + i] = -gx[i] + t * self.weight - 1.0 / m[i];
            for j in 0..n {
                h[(i, j)] = hx[(i, j)];
                h[(n + i, n + j)] = hx[(i, j)];
                h[(i, n + j)] = -hx[(i, j)];
                h[(n + i, j)] = -hx[(i, j)];
            }
            h[(i, i)] += 1.0 / (p[i] * p[i]);
            h[(n + i, n + i)] += 1.0 / (m[i] * m[i]);
        }
        (g, h)
    }
}

/// Log-barrier path following with damped Newton steps, started from the
/// strictly feasible point `start`. Returns `None` when `start` is not
/// strictly feasible.
pub fn reference_solve(sys: &PartitionedSystem, model: &Model, start: &DVector<f64>, gap: f64) -> Option<Reference> {
    let n = sys.cols();
    let bar = Barrier::new(sys, model);
    let mut p = start.map(|v| v.max(0.0) + 0.1);
    let mut m = start.map(|v| (-v).max(0.0) + 0.1);
    let mut t = 1.0;
    bar.value(t, &p, &m)?;
    let count = bar.constraint_count(n) as f64;
    loop {
        for _ in 0..200 {
            let (g, h) = bar.derivatives(t, &p, &m);
            let step = match h.clone().cholesky() {
                Some(c) => -c.solve(&g),
                None => -h.lu().solve(&g)?,
            };
            let decrement = -g.dot(&step);
            if decrement <= 1e-12 {
                break;
            }
            let f0 = bar.value(t, &p, &m)?;
            let mut alpha = 1.0;
            loop {
                let np = &p + alpha * step.rows(0, n);
                let nm = &m + alpha * step.rows(n, n);
                if let Some(f) = bar.value(t, &np, &nm) {
                    if f <= f0 - 0.01 * alpha * decrement {
                        p = np;
                        m = nm;
                        break;
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-14 {
                    break;
                }
            }
            if alpha < 1e-14 {
                break;
            }
        }
        if count / t <= gap {
            break;
        }
        t *= 10.0;
    }
    let x = &p - &m;
    let objective = bar.objective(&x, x.lp_norm(1));
    Some(Reference { x, objective, gap: count / t })
}
