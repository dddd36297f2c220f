//! Finite-difference verification of tape gradients.
//!
//! Runs at f64: the truncation error of the central difference is O(h^2) and
//! the rounding error O(eps/h), so h = 1e-5 keeps both comfortably below the
//! tolerances used in the test suites.

use crate::autodiff::params::ParamStore;
use crate::autodiff::tape::{Tape, Var};

/// Relative error with a unit floor, so values near zero are compared
/// absolutely: `|a - b| / max(1, |a|, |b|)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1.0_f64.max(a.abs()).max(b.abs())
}

/// One analytic/numeric disagreement above tolerance.
#[derive(Debug, Clone)]
pub struct GradMismatch {
    pub param: String,
    pub element: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub failures: Vec<GradMismatch>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Configuration for [`check`].
#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    /// Central-difference step.
    pub h: f64,
    /// Maximum tolerated [`rel_err`] per element.
    pub tolerance: f64,
    /// Upper bound on elements probed per parameter; larger tensors are
    /// sampled at a uniform stride so every region is still touched.
    pub max_per_param: usize,
}

impl Default for GradCheck {
    fn default() -> Self {
        GradCheck { h: 1e-5, tolerance: 1e-4, max_per_param: usize::MAX }
    }
}

/// Compare the tape's gradients against central differences.
///
/// `build` must record the scalar loss for the current store contents onto
/// the given tape; it is invoked once for the analytic sweep and twice per
/// probed element for the numeric estimate. The store is returned to its
/// original values before this function returns.
pub fn check<F>(cfg: &GradCheck, store: &mut ParamStore<f64>, build: F) -> GradCheckReport
where
    F: Fn(&ParamStore<f64>, &mut Tape<f64>) -> Var,
{
    let mut tape = Tape::new();
    let loss = build(store, &mut tape);
    tape.backward(loss);
    store.zero_grads();
    store.absorb_grads(&tape);

    let analytic: Vec<Vec<f64>> = (0..store.len())
        .map(|i| store.grad(crate::autodiff::params::ParamId(i)).data().to_vec())
        .collect();

    let eval = |store: &ParamStore<f64>| -> f64 {
        let mut tape = Tape::new();
        let loss = build(store, &mut tape);
        tape.value(loss).item()
    };

    let mut report = GradCheckReport { checked: 0, max_rel_err: 0.0, failures: Vec::new() };
    for i in 0..store.len() {
        let id = crate::autodiff::params::ParamId(i);
        let name = store.name(id).to_string();
        let n = store.value(id).numel();
        let stride = n.div_ceil(cfg.max_per_param.max(1)).max(1);
        let mut j = 0;
        while j < n {
            let orig = store.value(id).data()[j];
            store.value_mut(id).data_mut()[j] = orig + cfg.h;
            let plus = eval(store);
            store.value_mut(id).data_mut()[j] = orig - cfg.h;
            let minus = eval(store);
            store.value_mut(id).data_mut()[j] = orig;

            let numeric = (plus - minus) / (2.0 * cfg.h);
            let a = analytic[i][j];
            let e = rel_err(a, numeric);
            report.checked += 1;
            if e > report.max_rel_err {
                report.max_rel_err = e;
            }
            if e > cfg.tolerance {
                report.failures.push(GradMismatch {
                    param: name.clone(),
                    element: j,
                    analytic: a,
                    numeric,
                    rel_err: e,
                });
            }
            j += stride;
        }
    }
    report
}
