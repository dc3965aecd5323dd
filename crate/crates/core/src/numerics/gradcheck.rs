//! Central finite-difference verification of hand-written gradients.

use serde::Serialize;

use super::params::ParameterStore;
use crate::error::Result;

/// A deterministic scalar function of the parameters.
pub trait Objective {
    fn loss(&self, store: &ParameterStore) -> Result<f64>;

    /// Returns the loss and accumulates its gradient into the store's
    /// gradient buffers (which the caller has zeroed).
    fn loss_and_grad(&self, store: &mut ParameterStore) -> Result<f64>;
}

/// Builds an [`Objective`] from a pair of closures.
pub struct FnObjective<L, G> {
    pub loss: L,
    pub loss_and_grad: G,
}

impl<L, G> Objective for FnObjective<L, G>
where
    L: Fn(&ParameterStore) -> Result<f64>,
    G: Fn(&mut ParameterStore) -> Result<f64>,
{
    fn loss(&self, store: &ParameterStore) -> Result<f64> {
        (self.loss)(store)
    }

    fn loss_and_grad(&self, store: &mut ParameterStore) -> Result<f64> {
        (self.loss_and_grad)(store)
    }
}

/// Denominator floor for the relative error, so coordinates whose true
/// gradient is zero are judged on absolute error.
pub const REL_ERR_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
    (analytic - numeric).abs() / denom
}

#[derive(Clone, Debug, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub coords: usize,
    pub max_rel_err: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub h: f64,
    pub tolerance: f64,
    pub coords_checked: usize,
    pub max_rel_err: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub params: Vec<ParamCheck>,
    pub passed: bool,
}

/// Compares `(f(θ+h) − f(θ−h)) / 2h` with the analytic gradient for every
/// coordinate of every parameter. Parameter values are restored afterwards.
pub fn grad_check(
    store: &mut ParameterStore,
    objective: &dyn Objective,
    h: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    store.zero_grad();
    objective.loss_and_grad(store)?;
    let names: Vec<String> = store.names().map(str::to_string).collect();

    let mut report = GradCheckReport {
        h,
        tolerance,
        coords_checked: 0,
        max_rel_err: 0.0,
        worst: None,
        params: Vec::with_capacity(names.len()),
        passed: true,
    };
    for name in names {
        let analytic = store.get(&name)?.grad.clone();
        let mut worst_here = 0.0f64;
        for i in 0..analytic.len() {
            let orig = store.value(&name)?.data()[i];
            store.value_mut(&name)?.data_mut()[i] = orig + h;
            let plus = objective.loss(store)?;
            store.value_mut(&name)?.data_mut()[i] = orig - h;
            let minus = objective.loss(store)?;
            store.value_mut(&name)?.data_mut()[i] = orig;

            let numeric = (plus - minus) / (2.0 * h);
            let err = relative_error(analytic.data()[i], numeric);
            worst_here = worst_here.max(err);
            if err > report.max_rel_err || report.worst.is_none() {
                report.max_rel_err = err;
                report.worst = Some((name.clone(), i));
            }
        }
        report.coords_checked += analytic.len();
        report.params.push(ParamCheck {
            name,
            coords: analytic.len(),
            max_rel_err: worst_here,
        });
    }
    report.passed = report.max_rel_err <= tolerance;
    store.zero_grad();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::kernels::sigmoid_scalar;
    use crate::numerics::params::xavier_init;
    use crate::numerics::tensor::{dot, Tensor2};

    #[test]
    fn square_at_three() {
        let mut s = ParameterStore::new();
        s.insert("x", Tensor2::filled(1, 1, 3.0));
        let obj = FnObjective {
            loss: |s: &ParameterStore| Ok(s.value("x")?.get(0, 0).powi(2)),
            loss_and_grad: |s: &mut ParameterStore| {
                let x = s.value("x")?.get(0, 0);
                s.grad_mut("x")?.set(0, 0, 2.0 * x);
                Ok(x * x)
            },
        };
        let r = grad_check(&mut s, &obj, 1e-5, 1e-9).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(s.value("x").unwrap().get(0, 0), 3.0);
    }

    #[test]
    fn logistic_loss_on_random_weights() {
        let x = [0.3, -1.2, 0.7, 2.0, -0.4];
        let y = 1.0;
        let mut s = ParameterStore::new();
        s.insert("w", xavier_init(1, 5, 42).unwrap());
        let loss = move |s: &ParameterStore| {
            let p = sigmoid_scalar(dot(s.value("w")?.row(0), &x));
            Ok(-(y * p.ln() + (1.0 - y) * (1.0 - p).ln()))
        };
        let obj = FnObjective {
            loss,
            loss_and_grad: move |s: &mut ParameterStore| {
                let l = loss(s)?;
                let p = sigmoid_scalar(dot(s.value("w")?.row(0), &x));
                let g: Vec<f64> = x.iter().map(|xi| (p - y) * xi).collect();
                s.accumulate("w", &Tensor2::row_vector(&g))?;
                Ok(l)
            },
        };
        let r = grad_check(&mut s, &obj, 1e-5, 1e-4).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn wrong_gradient_is_reported() {
        let mut s = ParameterStore::new();
        s.insert("x", Tensor2::filled(1, 2, 1.0));
        let obj = FnObjective {
            loss: |s: &ParameterStore| Ok(s.value("x")?.sum() * 2.0),
            loss_and_grad: |s: &mut ParameterStore| {
                s.grad_mut("x")?.fill(1.0);
                Ok(0.0)
            },
        };
        let r = grad_check(&mut s, &obj, 1e-5, 1e-4).unwrap();
        assert!(!r.passed);
        assert!((r.max_rel_err - 0.5).abs() < 1e-6);
        assert_eq!(r.worst.as_ref().unwrap().0, "x");
    }
}
