use serde::{Deserialize, Serialize};

use crate::classify::ConfusionMatrix;
use crate::error::{Error, Result};

/// Metrics whose denominator is zero are `None`, not 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Harmonic mean of sensitivity and PPV.
pub fn f1(sensitivity: f64, ppv: f64) -> Option<f64> {
    let sum = sensitivity + ppv;
    (sum > 0.0).then(|| 2.0 * (sensitivity * ppv) / sum)
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    if cm.total() == 0 {
        return Err(Error::invalid("confusion matrix is empty"));
    }
    let sensitivity = ratio(cm.tp, cm.tp + cm.fn_);
    let ppv = ratio(cm.tp, cm.tp + cm.fp);
    Ok(MetricsReport {
        sensitivity,
        specificity: ratio(cm.tn, cm.tn + cm.fp),
        ppv,
        npv: ratio(cm.tn, cm.tn + cm.fn_),
        f1: sensitivity.zip(ppv).and_then(|(s, p)| f1(s, p)),
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn cm(tp: u64, fp: u64, tn: u64, fn_: u64) -> ConfusionMatrix {
        ConfusionMatrix { tp, fp, tn, fn_ }
    }

    #[test]
    fn perfect_classifier() {
        let m = metrics(&cm(1, 0, 1, 0)).unwrap();
        for v in [m.sensitivity, m.specificity, m.ppv, m.npv, m.f1] {
            assert_eq!(v, Some(1.0));
        }
    }

    #[test]
    fn undefined_not_zero() {
        let m = metrics(&cm(0, 0, 5, 0)).unwrap();
        assert_eq!(m.sensitivity, None);
        assert_eq!(m.ppv, None);
        assert_eq!(m.f1, None);
        assert_eq!(m.specificity, Some(1.0));
        let m = metrics(&cm(0, 3, 5, 2)).unwrap();
        assert_eq!(m.sensitivity, Some(0.0));
        assert_eq!(m.f1, None);
        assert!(metrics(&cm(0, 0, 0, 0)).is_err());
    }

    proptest! {
        #[test]
        fn ratio_identities(tp in 0u64..500, fp in 0u64..500, tn in 0u64..500, fn_ in 0u64..500) {
            prop_assume!(tp + fp + tn + fn_ > 0);
            let m = metrics(&cm(tp, fp, tn, fn_)).unwrap();
            let check = |v: Option<f64>, num: u64, den: u64| match v {
                Some(r) => (r * den as f64).round() as u64 == num && r * den as f64 - num as f64 <= 1e-9,
                None => den == 0,
            };
            prop_assert!(check(m.sensitivity, tp, tp + fn_));
            prop_assert!(check(m.specificity, tn, tn + fp));
            prop_assert!(check(m.ppv, tp, tp + fp));
            prop_assert!(check(m.npv, tn, tn + fn_));
            for v in [m.sensitivity, m.specificity, m.ppv, m.npv, m.f1].into_iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn f1_symmetric(s in 0.0f64..=1.0, p in 0.0f64..=1.0) {
            prop_assert_eq!(f1(s, p), f1(p, s));
        }
    }
}
