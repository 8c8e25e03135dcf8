//! Evaluation metrics: MSE, MAE in original units, the acceptable-dose rate and
//! the clean/poisoned/defended ratio columns.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{invert_target, ScalingParams};
use crate::{Error, Result};

/// Relative band used by [`acceptable_rate`] when none is given.
pub const ACCEPTABLE_BAND: f64 = 0.2;

fn check(y_true: &[f64], y_pred: &[f64]) -> Result<()> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

pub fn mse(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check(y_true, y_pred)?;
    let s: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p) * (t - p)).sum();
    Ok(s / y_true.len() as f64)
}

/// Mean absolute error; with `scaling`, both vectors are first mapped back to
/// original target units.
pub fn mae(y_true: &[f64], y_pred: &[f64], scaling: Option<&ScalingParams>) -> Result<f64> {
    check(y_true, y_pred)?;
    let mut s = 0.0;
    for (&t, &p) in y_true.iter().zip(y_pred) {
        s += match scaling {
            Some(sc) => (invert_target(sc, t)? - invert_target(sc, p)?).abs(),
            None => (t - p).abs(),
        };
    }
    Ok(s / y_true.len() as f64)
}

/// Percentage of predictions within `band·|y_true|` of the truth. A zero true value
/// only counts when the prediction is exactly zero.
pub fn acceptable_rate(y_true: &[f64], y_pred: &[f64], band: f64) -> Result<f64> {
    check(y_true, y_pred)?;
    let ok = y_true
        .iter()
        .zip(y_pred)
        .filter(|(&t, &p)| if t == 0.0 { p == 0.0 } else { (p - t).abs() <= band * t.abs() })
        .count();
    Ok(100.0 * ok as f64 / y_true.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mse: f64,
    pub mae_original_units: f64,
    pub acceptable_rate_pct: f64,
    pub n_test: usize,
}

impl MetricsReport {
    /// Scores predictions on scaled targets. MSE stays in scaled units; MAE and the
    /// acceptable rate are computed in original units when `scaling` is known.
    pub fn evaluate(y_true: &[f64], y_pred: &[f64], scaling: Option<&ScalingParams>) -> Result<Self> {
        let mse = mse(y_true, y_pred)?;
        let mae_original_units = mae(y_true, y_pred, scaling)?;
        let acceptable_rate_pct = match scaling {
            Some(sc) => {
                let t: Vec<f64> = y_true.iter().map(|&v| invert_target(sc, v)).collect::<Result<_>>()?;
                let p: Vec<f64> = y_pred.iter().map(|&v| invert_target(sc, v)).collect::<Result<_>>()?;
                acceptable_rate(&t, &p, ACCEPTABLE_BAND)?
            }
            None => acceptable_rate(y_true, y_pred, ACCEPTABLE_BAND)?,
        };
        Ok(MetricsReport { mse, mae_original_units, acceptable_rate_pct, n_test: y_true.len() })
    }
}

/// Ratio columns of a clean / poisoned / defended comparison. `*_decrease_pct` is
/// the relative drop of the acceptable rate versus clean, in percent; negative
/// values mean the rate went up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub mae_p_over_c: f64,
    pub mse_p_over_c: f64,
    pub acceptable_p_decrease_pct: f64,
    pub mae_d_over_c: Option<f64>,
    pub mse_d_over_c: Option<f64>,
    pub acceptable_d_decrease_pct: Option<f64>,
}

fn ratio(num: f64, den: f64, what: &'static str) -> Result<f64> {
    if den == 0.0 {
        return Err(Error::DivisionByZero(what));
    }
    Ok(num / den)
}

fn decrease(clean: f64, other: f64) -> Result<f64> {
    if clean == 0.0 {
        return Err(Error::DivisionByZero("acceptable rate"));
    }
    Ok(100.0 * (clean - other) / clean)
}

pub fn ratio_report(
    clean: &MetricsReport,
    poisoned: &MetricsReport,
    defended: Option<&MetricsReport>,
) -> Result<RatioRow> {
    let (mae_d, mse_d, acc_d) = match defended {
        Some(d) => (
            Some(ratio(d.mae_original_units, clean.mae_original_units, "MAE")?),
            Some(ratio(d.mse, clean.mse, "MSE")?),
            Some(decrease(clean.acceptable_rate_pct, d.acceptable_rate_pct)?),
        ),
        None => (None, None, None),
    };
    Ok(RatioRow {
        mae_p_over_c: ratio(poisoned.mae_original_units, clean.mae_original_units, "MAE")?,
        mse_p_over_c: ratio(poisoned.mse, clean.mse, "MSE")?,
        acceptable_p_decrease_pct: decrease(clean.acceptable_rate_pct, poisoned.acceptable_rate_pct)?,
        mae_d_over_c: mae_d,
        mse_d_over_c: mse_d,
        acceptable_d_decrease_pct: acc_d,
    })
}

/// Median with the lower middle element for even counts. NaNs sort last.
pub fn lower_median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v[(v.len() - 1) / 2])
}
