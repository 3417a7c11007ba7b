//! Central-difference verification of tape gradients.

use rayon::prelude::*;

use super::tape::{Tape, TensorId};
use super::{Real, TensorError};

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub entries_checked: usize,
    pub max_rel_err: Real,
    pub worst_param: String,
    pub worst_index: usize,
    pub worst_analytic: Real,
    pub worst_numeric: Real,
    pub tol: Real,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tol
    }
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "checked {} entries, max rel err {:.3e} at {}[{}] (analytic {:.6e}, numeric {:.6e}), tol {:.1e}: {}",
            self.entries_checked,
            self.max_rel_err,
            self.worst_param,
            self.worst_index,
            self.worst_analytic,
            self.worst_numeric,
            self.tol,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

// Denominator floor for the relative error. Central differences on a loss of
// magnitude L resolve gradients no finer than ~1e-11*L/eps, so entries far
// below this scale are compared against the floor instead of their own
// magnitude.
const REL_ERR_FLOOR: Real = 1e-4;

fn rel_err(a: Real, n: Real) -> Real {
    let denom = a.abs().max(n.abs()).max(REL_ERR_FLOOR);
    (a - n).abs() / denom
}

/// A (name, shape, values) triple checked by [`grad_check`].
pub type CheckedParam = (String, Vec<usize>, Vec<Real>);

/// Check the analytic gradient of a scalar function against central
/// differences, entry by entry over every parameter.
///
/// `build` receives a fresh tape plus one leaf per parameter (in order) and
/// returns the scalar loss. The analytic gradient comes from one backward
/// pass; the numeric side perturbs each entry by ±eps and re-evaluates.
pub fn grad_check<F>(
    params: &[CheckedParam],
    eps: Real,
    tol: Real,
    build: F,
) -> Result<GradCheckReport, TensorError>
where
    F: Fn(&mut Tape, &[TensorId]) -> TensorId + Sync,
{
    assert!(
        (1e-6..=1e-4).contains(&(eps as f64)),
        "eps {} outside the supported range [1e-6, 1e-4]",
        eps
    );

    let shapes: Vec<Vec<usize>> = params.iter().map(|(_, s, _)| s.clone()).collect();
    let eval = |values: &[Vec<Real>]| -> (Real, Tape, TensorId) {
        let mut tape = Tape::new();
        let leaves: Vec<TensorId> = values
            .iter()
            .zip(&shapes)
            .map(|(v, s)| tape.leaf(v.clone(), s.clone()))
            .collect();
        let loss = build(&mut tape, &leaves);
        (tape.scalar_value(loss), tape, loss)
    };

    let base_values: Vec<Vec<Real>> = params.iter().map(|(_, _, v)| v.clone()).collect();
    let (loss_value, mut tape, loss) = eval(&base_values);
    if !loss_value.is_finite() {
        return Err(TensorError::NonFinite {
            context: "grad_check loss".into(),
            value: loss_value,
        });
    }
    tape.backward(loss);
    let analytic: Vec<Vec<Real>> = (0..params.len())
        .map(|i| tape.grad(TensorId(i)).to_vec())
        .collect();

    // Flatten (param, element) pairs and sweep them in parallel chunks; each
    // chunk works on its own copy of the parameter values.
    let entries: Vec<(usize, usize)> = params
        .iter()
        .enumerate()
        .flat_map(|(p, (_, _, v))| (0..v.len()).map(move |j| (p, j)))
        .collect();

    let chunk_results: Vec<(Real, usize, usize, Real, Real)> = entries
        .par_chunks(256)
        .map(|chunk| {
            let mut values = base_values.clone();
            let mut worst = (-1.0, 0usize, 0usize, 0.0, 0.0);
            for &(p, j) in chunk {
                let orig = values[p][j];
                values[p][j] = orig + eps;
                let mut tp = Tape::new();
                let leaves: Vec<TensorId> = values
                    .iter()
                    .zip(&shapes)
                    .map(|(v, s)| tp.leaf(v.clone(), s.clone()))
                    .collect();
                let loss_p = build(&mut tp, &leaves);
                let lp = tp.scalar_value(loss_p);
                values[p][j] = orig - eps;
                let mut tm = Tape::new();
                let leaves: Vec<TensorId> = values
                    .iter()
                    .zip(&shapes)
                    .map(|(v, s)| tm.leaf(v.clone(), s.clone()))
                    .collect();
                let loss_m = build(&mut tm, &leaves);
                let lm = tm.scalar_value(loss_m);
                values[p][j] = orig;

                let numeric = (lp - lm) / (2.0 * eps);
                let err = rel_err(analytic[p][j], numeric);
                if err > worst.0 {
                    worst = (err, p, j, analytic[p][j], numeric);
                }
            }
            worst
        })
        .collect();

    let mut worst = (0.0, 0usize, 0usize, 0.0, 0.0);
    for r in chunk_results {
        if r.0 > worst.0 {
            worst = r;
        }
    }

    Ok(GradCheckReport {
        entries_checked: entries.len(),
        max_rel_err: worst.0,
        worst_param: params[worst.1].0.clone(),
        worst_index: worst.2,
        worst_analytic: worst.3,
        worst_numeric: worst.4,
        tol,
    })
}
