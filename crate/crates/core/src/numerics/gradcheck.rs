//! Central finite-difference gradient checking.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{HecvlError, Result};

use super::matrix::Matrix;

/// Coordinates checked per parameter block, at most.
pub const MAX_COORDS_PER_BLOCK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coords_checked: usize,
    /// `(block, flat index)` of the worst coordinate.
    pub worst: Option<(usize, usize)>,
}

/// Relative error between an analytic and a numeric derivative.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-8);
    (analytic - numeric).abs() / denom
}

/// Compares `analytic` against central differences of `loss_fn` around
/// `params`. Blocks larger than [`MAX_COORDS_PER_BLOCK`] are subsampled with a
/// generator seeded by `seed`. `params` is restored before returning.
pub fn finite_diff_check<F>(
    loss_fn: F,
    params: &mut [Matrix],
    analytic: &[Matrix],
    eps: f64,
    seed: u64,
) -> Result<GradCheckReport>
where
    F: FnMut(&[Matrix]) -> Result<f64>,
{
    finite_diff_check_steps(loss_fn, params, analytic, &[eps], seed)
}

/// Like [`finite_diff_check`], but each coordinate is differenced with every
/// step in `steps` and scored by its best agreement.
///
/// A single step cannot serve every coordinate: near a ReLU kink a large step
/// straddles the kink, while for a derivative below ~1e-6 a small step leaves
/// the difference of two losses at the level of their last-bit rounding.
pub fn finite_diff_check_steps<F>(
    mut loss_fn: F,
    params: &mut [Matrix],
    analytic: &[Matrix],
    steps: &[f64],
    seed: u64,
) -> Result<GradCheckReport>
where
    F: FnMut(&[Matrix]) -> Result<f64>,
{
    if steps.is_empty() {
        return Err(HecvlError::Config("no finite-difference steps given".into()));
    }
    for &eps in steps {
        if !(1e-7..=1e-3).contains(&eps) {
            return Err(HecvlError::Config(format!(
                "finite-difference step must lie in [1e-7, 1e-3], got {eps}"
            )));
        }
    }
    if analytic.len() != params.len() {
        return Err(HecvlError::Contract(format!(
            "{} analytic gradient blocks for {} parameter blocks",
            analytic.len(),
            params.len()
        )));
    }
    for (p, g) in params.iter().zip(analytic) {
        if p.shape() != g.shape() {
            return Err(HecvlError::Shape {
                op: "finite_diff_check",
                left_rows: p.rows(),
                left_cols: p.cols(),
                right_rows: g.rows(),
                right_cols: g.cols(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        coords_checked: 0,
        worst: None,
    };
    for block in 0..params.len() {
        let len = params[block].len();
        let coords: Vec<usize> = if len <= MAX_COORDS_PER_BLOCK {
            (0..len).collect()
        } else {
            let mut picked = index::sample(&mut rng, len, MAX_COORDS_PER_BLOCK).into_vec();
            picked.sort_unstable();
            picked
        };
        for idx in coords {
            let original = params[block].data()[idx];
            let mut err = f64::INFINITY;
            for &eps in steps {
                params[block].data_mut()[idx] = original + eps;
                let plus = loss_fn(params);
                params[block].data_mut()[idx] = original - eps;
                let minus = loss_fn(params);
                params[block].data_mut()[idx] = original;
                let (plus, minus) = (plus?, minus?);
                if !plus.is_finite() || !minus.is_finite() {
                    return Err(HecvlError::NonFinite {
                        context: format!(
                            "loss during finite differences (block {block}, index {idx})"
                        ),
                    });
                }
                let numeric = (plus - minus) / (2.0 * eps);
                err = err.min(relative_error(analytic[block].data()[idx], numeric));
            }
            report.coords_checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some((block, idx));
            }
        }
    }
    Ok(report)
}
