//! Parametric curves with area utilities.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveRole {
    Exit,
    Gexit,
    Ebp,
    Bp,
    MapEstimate,
    Dual,
    CheckChart,
    VariableChart,
}

/// Ordered list of `(x, y)` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub role: CurveRole,
    pub points: Vec<(f64, f64)>,
}

impl Curve {
    pub fn new(role: CurveRole, points: Vec<(f64, f64)>) -> Curve {
        Curve { role, points }
    }

    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    /// Signed trapezoid `∫ y dx` along the point order.
    pub fn area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
            .sum()
    }

    /// Signed trapezoid `∫ x dy` along the point order (area to the left).
    pub fn left_area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) * (w[0].0 + w[1].0) / 2.0)
            .sum()
    }

    /// Linear interpolation of `y` at `x`; the abscissae must be sorted
    /// ascending. Values outside the range are clamped to the end points.
    pub fn interpolate(&self, x: f64) -> Option<f64> {
        let p = &self.points;
        if p.is_empty() {
            return None;
        }
        if x <= p[0].0 {
            return Some(p[0].1);
        }
        if x >= p[p.len() - 1].0 {
            return Some(p[p.len() - 1].1);
        }
        let i = p.partition_point(|q| q.0 <= x);
        let (a, b) = (p[i - 1], p[i]);
        if b.0 == a.0 {
            return Some(b.1);
        }
        Some(a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0))
    }
}
