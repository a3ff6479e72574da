use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::kmeans::Centroids;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    /// Breakpoints `[a, b]`: 1 up to `a`, falling to 0 at `b`.
    TrapezoidalLeft,
    /// Breakpoints `[a, b, c]`: 0 at `a`, 1 at `b`, 0 at `c`.
    Triangular,
    /// Breakpoints `[a, b]`: 0 up to `a`, rising to 1 at `b`.
    TrapezoidalRight,
}

/// One labeled membership function of a feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzySetDef {
    pub feature: String,
    pub label: String,
    pub shape: Shape,
    pub breakpoints: Vec<f64>,
}

fn falling(x: f64, top: f64, zero: f64) -> f64 {
    if x <= top {
        1.0
    } else if x >= zero {
        0.0
    } else {
        (zero - x) / (zero - top)
    }
}

fn rising(x: f64, zero: f64, top: f64) -> f64 {
    if x <= zero {
        0.0
    } else if x >= top {
        1.0
    } else {
        (x - zero) / (top - zero)
    }
}

impl FuzzySetDef {
    pub fn membership(&self, x: f64) -> f64 {
        let b = &self.breakpoints;
        match self.shape {
            Shape::TrapezoidalLeft => falling(x, b[0], b[1]),
            Shape::TrapezoidalRight => rising(x, b[0], b[1]),
            Shape::Triangular => {
                if x <= b[1] {
                    rising(x, b[0], b[1])
                } else {
                    falling(x, b[1], b[2])
                }
            }
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let want = match self.shape {
            Shape::Triangular => 3,
            _ => 2,
        };
        let b = &self.breakpoints;
        if b.len() != want
            || b.windows(2)
                .any(|w| w[0].partial_cmp(&w[1]) != Some(Ordering::Less))
        {
            return Err(Error::invalid(format!(
                "fuzzy set {}={} has malformed breakpoints {b:?}",
                self.feature, self.label
            )));
        }
        Ok(())
    }
}

pub fn membership(set: &FuzzySetDef, x: f64) -> f64 {
    set.membership(x)
}

/// Builds the partition-of-unity family anchored at the sorted centers:
/// a left shoulder at `c1`, triangles peaking at `c2..c(k-1)` and a right
/// shoulder at `ck`, labeled `L1..Lk`.
pub fn build_fuzzy_sets(centroids: &Centroids) -> Result<Vec<FuzzySetDef>> {
    let c = &centroids.centers;
    let k = c.len();
    if k < 2 {
        return Err(Error::invalid(format!(
            "feature {} needs at least 2 centers for fuzzy sets, got {k}",
            centroids.feature
        )));
    }
    if c.windows(2)
        .any(|w| w[0].partial_cmp(&w[1]) != Some(Ordering::Less))
    {
        return Err(Error::invalid(format!(
            "centers of {} are not strictly increasing: {c:?}",
            centroids.feature
        )));
    }
    Ok((0..k)
        .map(|i| {
            let (shape, breakpoints) = if i == 0 {
                (Shape::TrapezoidalLeft, vec![c[0], c[1]])
            } else if i == k - 1 {
                (Shape::TrapezoidalRight, vec![c[k - 2], c[k - 1]])
            } else {
                (Shape::Triangular, vec![c[i - 1], c[i], c[i + 1]])
            };
            FuzzySetDef {
                feature: centroids.feature.clone(),
                label: format!("L{}", i + 1),
                shape,
                breakpoints,
            }
        })
        .collect())
}
