//! Central finite-difference gradient checking.

use super::params::ParameterStore;
use crate::error::Result;

/// Denominator floor for relative errors; below it errors are absolute.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares the gradient slots of `store` against central differences of
/// `loss`, perturbing every trainable element by `h`. `stride` > 1 checks
/// every `stride`-th element of each tensor (always including element 0).
pub fn check_gradients<F>(store: &mut ParameterStore, h: f64, stride: usize, mut loss: F) -> Result<GradCheckReport>
where
    F: FnMut(&ParameterStore) -> Result<f64>,
{
    let names: Vec<(String, usize)> = store
        .iter()
        .filter(|p| p.trainable)
        .map(|p| (p.name.clone(), p.tensor.len()))
        .collect();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        checked: 0,
    };
    for (name, len) in names {
        let analytic = store
            .get(&name)
            .and_then(|t| t.grad.clone())
            .unwrap_or_else(|| vec![0.0; len]);
        for i in (0..len).step_by(stride.max(1)) {
            let orig = store.get(&name).unwrap().data[i];
            store.get_mut(&name).unwrap().data[i] = orig + h;
            let plus = loss(store)?;
            store.get_mut(&name).unwrap().data[i] = orig - h;
            let minus = loss(store)?;
            store.get_mut(&name).unwrap().data[i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let err = relative_error(analytic[i], numeric);
            report.checked += 1;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst_param = name.clone();
                report.worst_index = i;
            }
        }
    }
    Ok(report)
}
