use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// Outcome of a two-sided hypothesis test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// `None` when the statistic is undefined (degenerate variance).
    pub statistic: Option<f64>,
    pub p_value: f64,
    pub alpha: f64,
    pub reject_null: bool,
}

impl TestResult {
    fn new(statistic: Option<f64>, p_value: f64, alpha: f64) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        TestResult {
            statistic,
            p_value,
            alpha,
            reject_null: statistic.is_some() && p_value < alpha,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha {alpha} outside (0, 1)")))
    }
}

/// Pooled two-proportion z-test of `x1/n1` against `x2/n2`.
pub fn two_proportion_ztest(x1: u64, n1: u64, x2: u64, n2: u64, alpha: f64) -> Result<TestResult> {
    check_alpha(alpha)?;
    if n1 == 0 || n2 == 0 || x1 > n1 || x2 > n2 {
        return Err(Error::invalid(format!(
            "z-test needs 0 <= x <= n and n >= 1, got {x1}/{n1} and {x2}/{n2}"
        )));
    }
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let pooled = (x1 + x2) as f64 / (n1f + n2f);
    if pooled <= 0.0 || pooled >= 1.0 {
        return Ok(TestResult::new(None, 1.0, alpha));
    }
    let se = (pooled * (1.0 - pooled) * (1.0 / n1f + 1.0 / n2f)).sqrt();
    let z = (x1 as f64 / n1f - x2 as f64 / n2f) / se;
    let normal = Normal::standard();
    Ok(TestResult::new(Some(z), 2.0 * normal.sf(z.abs()), alpha))
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Welch's unequal-variance t-test on two timing samples.
pub fn time_significance(times_a: &[f64], times_b: &[f64], alpha: f64) -> Result<TestResult> {
    check_alpha(alpha)?;
    if times_a.len() < 5 || times_b.len() < 5 {
        return Err(Error::invalid(format!(
            "timing test needs at least 5 repetitions per side, got {} and {}",
            times_a.len(),
            times_b.len()
        )));
    }
    let (ma, va) = mean_var(times_a);
    let (mb, vb) = mean_var(times_b);
    let (sa, sb) = (va / times_a.len() as f64, vb / times_b.len() as f64);
    let se2 = sa + sb;
    if se2 == 0.0 {
        return Ok(if ma == mb {
            TestResult::new(Some(0.0), 1.0, alpha)
        } else {
            let t = if ma > mb {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            };
            TestResult::new(Some(t), 0.0, alpha)
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df =
        se2 * se2 / (sa * sa / (times_a.len() - 1) as f64 + sb * sb / (times_b.len() - 1) as f64);
    let dist =
        StudentsT::new(0.0, 1.0, df).map_err(|e| Error::invalid(format!("t distribution: {e}")))?;
    Ok(TestResult::new(Some(t), 2.0 * dist.sf(t.abs()), alpha))
}
