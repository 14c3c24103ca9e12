//! Closed-form projections and proximal maps.

use nalgebra::DVector;

use crate::error::{Error, Result};

fn check_radius(r: f64, what: &str) -> Result<()> {
    if r >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{what} must be nonnegative, got {r}")))
    }
}

/// Euclidean projection onto `{z : ‖z‖∞ ≤ r}`, i.e. `sign(x) ⊙ min(|x|, r)`.
pub fn project_linf_ball(x: &DVector<f64>, r: f64) -> Result<DVector<f64>> {
    check_radius(r, "radius")?;
    let mut out = x.clone();
    clamp_in_place(out.as_mut_slice(), r);
    Ok(out)
}

/// `sign(x) ⊙ max(|x| - t, 0)`, the minimizer of `½‖z - x‖² + t‖z‖₁`.
pub fn soft_threshold(x: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    check_radius(t, "threshold")?;
    let mut out = x.clone();
    shrink_in_place(out.as_mut_slice(), t);
    Ok(out)
}

/// Euclidean projection onto `{z : ‖z‖₂ ≤ r}`.
pub fn project_l2_ball(x: &DVector<f64>, r: f64) -> Result<DVector<f64>> {
    check_radius(r, "radius")?;
    let mut out = x.clone();
    scale_into_ball(out.as_mut_slice(), r);
    Ok(out)
}

/// Componentwise `max(x, 0)`.
pub fn project_nonneg(x: &DVector<f64>) -> DVector<f64> {
    x.map(|v| v.max(0.0))
}

#[inline]
pub(crate) fn clamp_in_place(x: &mut [f64], r: f64) {
    for v in x {
        *v = v.clamp(-r, r);
    }
}

#[inline]
pub(crate) fn shrink_in_place(x: &mut [f64], t: f64) {
    for v in x {
        let a = v.abs() - t;
        *v = if a > 0.0 { a.copysign(*v) } else { 0.0 };
    }
}

#[inline]
pub(crate) fn scale_into_ball(x: &mut [f64], r: f64) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > r {
        let s = r / norm;
        x.iter_mut().for_each(|v| *v *= s);
    }
}

#[inline]
pub(crate) fn nonneg_in_place(x: &mut [f64]) {
    for v in x {
        *v = v.max(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn examples() {
        assert_eq!(project_linf_ball(&v(&[3.0, -0.2]), 1.0).unwrap(), v(&[1.0, -0.2]));
        assert_eq!(project_linf_ball(&v(&[3.0, -0.2]), 0.0).unwrap(), v(&[0.0, 0.0]));
        assert_eq!(soft_threshold(&v(&[2.0, -0.5]), 1.0).unwrap(), v(&[1.0, 0.0]));
        assert_eq!(soft_threshold(&v(&[2.0, -0.5]), 0.0).unwrap(), v(&[2.0, -0.5]));
        let x = v(&[1.2, -1.6]);
        assert_eq!(project_l2_ball(&x, 1.0).unwrap(), &x / 2.0);
        assert_eq!(project_l2_ball(&x, 5.0).unwrap(), x);
        assert_eq!(project_nonneg(&v(&[-1.0, 2.0])), v(&[0.0, 2.0]));
    }

    #[test]
    fn negative_radius_rejected() {
        let x = v(&[1.0]);
        assert!(project_linf_ball(&x, -1.0).is_err());
        assert!(soft_threshold(&x, -1.0).is_err());
        assert!(project_l2_ball(&x, -0.1).is_err());
    }

    #[test]
    fn soft_threshold_matches_scalar_grid_search() {
        let mut rng = rng::stream(41);
        for _ in 0..20 {
            let x: f64 = rng.gen_range(-3.0..3.0);
            let t: f64 = rng.gen_range(0.0..2.0);
            let objective = |z: f64| 0.5 * (z - x) * (z - x) + t * z.abs();
            // grid search on [-4, 4] with step 1e-6
            let steps = 8_000_000;
            let mut best = (f64::INFINITY, 0.0);
            for k in 0..=steps {
                let z = -4.0 + 8.0 * k as f64 / steps as f64;
                let f = objective(z);
                if f < best.0 {
                    best = (f, z);
                }
            }
            let got = soft_threshold(&v(&[x]), t).unwrap()[0];
            assert!((got - best.1).abs() <= 1e-6, "x={x} t={t} got={got} grid={}", best.1);
        }
    }

    /// No sampled point of the set is strictly closer to `x` than `p`.
    fn assert_nearest(x: &DVector<f64>, p: &DVector<f64>, sample: impl Fn(&mut rand_chacha::ChaCha8Rng) -> DVector<f64>) {
        let mut rng = rng::stream(5);
        let d = (x - p).norm();
        for _ in 0..20_000 {
            let q = sample(&mut rng);
            assert!((x - q).norm() >= d - 1e-12);
        }
    }

    #[test]
    fn linf_projection_is_nearest_point() {
        let mut rng = rng::stream(1);
        for _ in 0..5 {
            let x = DVector::from_fn(3, |_, _| rng.gen_range(-3.0..3.0));
            let r = rng.gen_range(0.1..2.0);
            let p = project_linf_ball(&x, r).unwrap();
            assert!(p.amax() <= r);
            assert_nearest(&x, &p, |g| DVector::from_fn(3, |_, _| g.gen_range(-r..=r)));
        }
    }

    #[test]
    fn l2_projection_is_nearest_point() {
        let mut rng = rng::stream(2);
        for _ in 0..5 {
            let x = DVector::from_fn(3, |_, _| rng.gen_range(-3.0..3.0));
            let r = rng.gen_range(0.1..2.0);
            let p = project_l2_ball(&x, r).unwrap();
            assert!(p.norm() <= r + 1e-12);
            assert_nearest(&x, &p, |g| {
                let d = DVector::from_fn(3, |_, _| g.gen_range(-1.0..1.0));
                let rad = r * g.gen::<f64>().cbrt();
                if d.norm() > 0.0 {
                    d.normalize() * rad
                } else {
                    d
                }
            });
        }
    }

    fn vec_strategy() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0f64..10.0, 1..8)
    }

    proptest! {
        #[test]
        fn idempotent_nonexpansive_feasible(a in vec_strategy(), shift in -3.0f64..3.0, r in 0.0f64..4.0) {
            let a = DVector::from_vec(a);
            let b = a.map(|x| x + shift * 0.7 - x * 0.3);
            let maps: Vec<(&str, Box<dyn Fn(&DVector<f64>) -> DVector<f64>>)> = vec![
                ("linf", Box::new(move |x| project_linf_ball(x, r).unwrap())),
                ("l2", Box::new(move |x| project_l2_ball(x, r).unwrap())),
                ("nonneg", Box::new(project_nonneg)),
                ("soft", Box::new(move |x| soft_threshold(x, r).unwrap())),
            ];
            for (name, f) in &maps {
                let (pa, pb) = (f(&a), f(&b));
                prop_assert!((&pa - &pb).norm() <= (&a - &b).norm() + 1e-12, "{} expands", name);
                if *name != "soft" {
                    prop_assert!((f(&pa) - &pa).norm() <= 1e-12, "{} not idempotent", name);
                }
            }
            prop_assert!(project_linf_ball(&a, r).unwrap().amax() <= r);
            prop_assert!(project_l2_ball(&a, r).unwrap().norm() <= r * (1.0 + 1e-12));
            prop_assert!(project_nonneg(&a).iter().all(|&x| x >= 0.0));
        }

        #[test]
        fn soft_threshold_optimality(a in vec_strategy(), t in 0.0f64..4.0) {
            let x = DVector::from_vec(a);
            let z = soft_threshold(&x, t).unwrap();
            // (x - z) / t must be a subgradient of ‖·‖₁ at z
            for (xi, zi) in x.iter().zip(z.iter()) {
                let g = xi - zi;
                if *zi != 0.0 {
                    prop_assert!((g - t * zi.signum()).abs() <= 1e-12);
                } else {
                    prop_assert!(g.abs() <= t + 1e-12);
                }
            }
        }
    }
}
