//! Central finite-difference verification of tape gradients.

use crate::params::{Gradients, ParamId, ParamStore};
use crate::tape::{Tape, Var};
use crate::Result;

fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / (a.abs() + n.abs()).max(1e-8)
}

/// `max |a - n| / max(1e-8, |a| + |n|)` over every scalar.
pub fn max_relative_error(analytic: &Gradients, numeric: &Gradients) -> f64 {
    analytic
        .tensors()
        .iter()
        .zip(numeric.tensors())
        .flat_map(|(a, n)| a.data().iter().zip(n.data()))
        .map(|(a, n)| relative_error(*a, *n))
        .fold(0.0, f64::max)
}

/// `(f(w + eps) - f(w - eps)) / 2 eps` for every scalar parameter.
pub fn numeric_gradients<F>(store: &ParamStore, eps: f64, mut loss: F) -> Result<Gradients>
where
    F: FnMut(&ParamStore, &mut Tape) -> Result<Var>,
{
    let mut out = Gradients::zeros_like(store);
    perturb_each(store, eps, &mut loss, |id, j, up, down| {
        out.get_mut(id).data_mut()[j] = (up.0 - down.0) / (2.0 * eps);
    })?;
    Ok(out)
}

fn perturb_each<F, G>(store: &ParamStore, eps: f64, loss: &mut F, mut visit: G) -> Result<()>
where
    F: FnMut(&ParamStore, &mut Tape) -> Result<Var>,
    G: FnMut(ParamId, usize, (f64, Vec<bool>), (f64, Vec<bool>)),
{
    let mut eval = |s: &ParamStore| -> Result<(f64, Vec<bool>)> {
        let mut tape = Tape::new();
        let l = loss(s, &mut tape)?;
        Ok((tape.value(l)?.data()[0], tape.kink_signature()))
    };
    let mut work = store.clone();
    for id in store.ids() {
        for j in 0..store.get(id).len() {
            let w = store.get(id).data()[j];
            work.get_mut(id).data_mut()[j] = w + eps;
            let up = eval(&work)?;
            work.get_mut(id).data_mut()[j] = w - eps;
            let down = eval(&work)?;
            work.get_mut(id).data_mut()[j] = w;
            visit(id, j, up, down);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    /// Largest relative error over the compared coordinates.
    pub max_error: f64,
    pub checked: usize,
    /// Coordinates whose `±eps` perturbation moved a ReLU input or MAE
    /// residual across zero; the difference quotient is not a derivative
    /// there, so they are not compared.
    pub crossed_kink: usize,
}

/// Compares the tape gradient of `loss` with central differences. The
/// closure must be deterministic (evaluation mode).
pub fn grad_check<F>(store: &ParamStore, eps: f64, mut loss: F) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore, &mut Tape) -> Result<Var>,
{
    let mut tape = Tape::new();
    let l = loss(store, &mut tape)?;
    let analytic = tape.backward(l, store)?;
    let base = tape.kink_signature();
    let mut report = GradCheckReport {
        max_error: 0.0,
        checked: 0,
        crossed_kink: 0,
    };
    perturb_each(store, eps, &mut loss, |id, j, up, down| {
        if up.1 != base || down.1 != base {
            report.crossed_kink += 1;
            return;
        }
        let numeric = (up.0 - down.0) / (2.0 * eps);
        report.max_error = report.max_error.max(relative_error(analytic.get(id).data()[j], numeric));
        report.checked += 1;
    })?;
    Ok(report)
}
