use std::ops::Range;

use crate::error::{Error, Result};
use crate::num::Real;
use crate::ops::TrialRecord;

/// Coefficient of determination `1 - SS_res / SS_tot`.
pub fn r_squared<T: Real>(pred: &[T], actual: &[T]) -> Result<T> {
    if pred.len() != actual.len() {
        return Err(Error::argument(format!("length mismatch: {} predictions, {} targets", pred.len(), actual.len())));
    }
    if actual.is_empty() {
        return Err(Error::argument("R^2 of an empty series"));
    }
    let mean = actual.iter().copied().sum::<T>() / T::of_usize(actual.len());
    let mut ss_tot = T::zero();
    let mut ss_res = T::zero();
    for (&p, &y) in pred.iter().zip(actual) {
        ss_tot += (y - mean) * (y - mean);
        ss_res += (y - p) * (y - p);
    }
    if ss_tot == T::zero() {
        return Err(Error::Undefined("R^2 with constant targets".into()));
    }
    Ok(T::one() - ss_res / ss_tot)
}

/// Mean of the per-axis R^2 values.
pub fn r_squared_2d<T: Real>(pred: &[[T; 2]], actual: &[[T; 2]]) -> Result<T> {
    let axis = |v: &[[T; 2]], a: usize| v.iter().map(|p| p[a]).collect::<Vec<T>>();
    let rx = r_squared(&axis(pred, 0), &axis(actual, 0))?;
    let ry = r_squared(&axis(pred, 1), &axis(actual, 1))?;
    Ok((rx + ry) / T::of(2.0))
}

/// Mean time-to-target over `window` trials of every run; failed trials
/// count as `max_duration`.
pub fn aggregate_time_to_target(runs: &[Vec<TrialRecord>], window: Range<usize>, max_duration: f64) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for run in runs {
        let end = window.end.min(run.len());
        if window.start >= end {
            continue;
        }
        for r in &run[window.start..end] {
            sum += r.effective_time(max_duration);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::argument(format!("no trials in window {window:?}")));
    }
    Ok(sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(t: Option<f64>) -> TrialRecord {
        TrialRecord { trajectory: Vec::new(), time_to_target: t, success: t.is_some() }
    }

    #[test]
    fn perfect_and_mean_predictors() {
        let y = [1.0f64, 2.0, 4.0, 8.0];
        assert_eq!(r_squared(&y, &y).unwrap(), 1.0);
        let m = [3.75; 4];
        assert!(r_squared(&m, &y).unwrap().abs() < 1e-15);
        assert!(matches!(r_squared(&y, &[2.0; 4]), Err(Error::Undefined(_))));
        assert!(r_squared(&y[..2], &y).is_err());
    }

    #[test]
    fn two_dimensional_is_axis_mean() {
        let a = [[1.0f64, 0.0], [2.0, 1.0], [3.0, 5.0]];
        let p = [[1.0, 2.0], [2.0, 2.0], [3.0, 2.0]];
        let ry = r_squared(&[2.0, 2.0, 2.0], &[0.0, 1.0, 5.0]).unwrap();
        assert!((r_squared_2d(&p, &a).unwrap() - (1.0 + ry) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn time_to_target_windows() {
        let ok = vec![rec(Some(1.0)); 10];
        assert_eq!(aggregate_time_to_target(&[ok.clone()], 0..10, 3.0).unwrap(), 1.0);
        let fail = vec![rec(None); 10];
        assert_eq!(aggregate_time_to_target(&[fail], 0..10, 3.0).unwrap(), 3.0);
        assert!(aggregate_time_to_target(&[ok], 20..30, 3.0).is_err());
        let mixed = vec![vec![rec(Some(0.5)), rec(None), rec(Some(1.5))], vec![rec(Some(2.0)), rec(Some(1.0))]];
        let flat = [0.5, 3.0, 1.5, 2.0, 1.0];
        let oracle = flat.iter().sum::<f64>() / 5.0;
        assert!((aggregate_time_to_target(&mixed, 0..3, 3.0).unwrap() - oracle).abs() < 1e-15);
        assert!((aggregate_time_to_target(&mixed, 1..3, 3.0).unwrap() - (3.0 + 1.5 + 1.0) / 3.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn matches_two_pass_oracle(pairs in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..64)) {
            let pred: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let actual: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let n = actual.len() as f64;
            let mean = actual.iter().sum::<f64>() / n;
            let tot: f64 = actual.iter().map(|y| (y - mean).powi(2)).sum();
            prop_assume!(tot > 1e-9);
            let res: f64 = pred.iter().zip(&actual).map(|(p, y)| (y - p).powi(2)).sum();
            let r2 = r_squared(&pred, &actual).unwrap();
            prop_assert!((r2 - (1.0 - res / tot)).abs() < 1e-12);
            prop_assert!(r2 <= 1.0);
        }
    }
}
