use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::Tensor;

/// One loss evaluation for the checker. `signature` identifies the smooth
/// piece the evaluation landed on (see [`super::Tape::branch_signature`]).
#[derive(Debug, Clone, Copy)]
pub struct FdEval {
    pub loss: f64,
    pub signature: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct FdConfig {
    pub step: f64,
    pub tolerance: f64,
    /// Number of scalar parameters to check (all of them if fewer exist).
    pub samples: usize,
    pub seed: u64,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self {
            step: 1e-4,
            tolerance: 1e-4,
            samples: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FdFailure {
    pub tensor: usize,
    pub offset: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FdReport {
    pub checked: usize,
    /// Parameters whose perturbation crossed a non-differentiable point.
    pub skipped: usize,
    /// Parameters whose analytic and numeric gradients both sit below
    /// [`resolution`], where central differences carry no relative information.
    pub unresolved: usize,
    pub resolution: f64,
    pub max_rel_error: f64,
    pub failures: Vec<FdFailure>,
    pub passed: bool,
}

/// Compare `analytic` gradients against central differences of `loss` on a
/// random subsample of scalar parameters.
///
/// A parameter is skipped when `loss` reports a different branch signature at
/// `x + h` or `x - h` than at `x` (argmax flips, leaky-relu sign changes).
/// Near-zero gradients are set aside as unresolved, see [`resolution`].
pub fn finite_diff_check<F>(
    params: &mut [Tensor],
    analytic: &[Tensor],
    mut loss: F,
    config: FdConfig,
) -> FdReport
where
    F: FnMut(&[Tensor]) -> FdEval,
{
    assert_eq!(
        params.len(),
        analytic.len(),
        "one gradient per parameter tensor"
    );
    let mut coords: Vec<(usize, usize)> = params
        .iter()
        .enumerate()
        .flat_map(|(t, p)| (0..p.len()).map(move |o| (t, o)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    coords.shuffle(&mut rng);
    let target = config.samples.min(coords.len());

    let base = loss(params);
    let h = config.step;
    let floor = resolution(base.loss, h, config.tolerance);
    let base = base.signature;
    let mut report = FdReport {
        checked: 0,
        skipped: 0,
        unresolved: 0,
        resolution: floor,
        max_rel_error: 0.0,
        failures: Vec::new(),
        passed: false,
    };
    for (t, o) in coords {
        if report.checked >= target {
            break;
        }
        let original = params[t].data()[o];
        params[t].data_mut()[o] = original + h;
        let plus = loss(params);
        params[t].data_mut()[o] = original - h;
        let minus = loss(params);
        params[t].data_mut()[o] = original;
        if plus.signature != base || minus.signature != base {
            report.skipped += 1;
            continue;
        }
        let numeric = (plus.loss - minus.loss) / (2.0 * h);
        let a = analytic[t].data()[o];
        let scale = a.abs().max(numeric.abs());
        if scale < floor {
            report.unresolved += 1;
            continue;
        }
        let rel_error = (a - numeric).abs() / scale;
        report.checked += 1;
        report.max_rel_error = report.max_rel_error.max(rel_error);
        if rel_error.is_nan() || rel_error >= config.tolerance {
            report.failures.push(FdFailure {
                tensor: t,
                offset: o,
                analytic: a,
                numeric,
                rel_error,
            });
        }
    }
    report.passed = report.failures.is_empty() && report.checked > 0;
    report
}

/// Smallest gradient magnitude whose central difference can be trusted to
/// relative accuracy `tolerance`. Rounding a loss near `loss` perturbs each
/// evaluation by a few ulps, so the difference quotient carries an absolute
/// error of order `eps * |loss| / h`; the factor 4 covers those few ulps.
pub fn resolution(loss: f64, step: f64, tolerance: f64) -> f64 {
    4.0 * f64::EPSILON * loss.abs().max(1.0) / (step * tolerance)
}
