//! Quadrature rules on `[0, 1]` for the integrated-gradients path integral.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureRule {
    /// Composite trapezoid over equally spaced nodes, endpoints included.
    #[default]
    Trapezoid,
    GaussLegendre,
}

impl std::str::FromStr for QuadratureRule {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "trapezoid" | "trap" => Ok(QuadratureRule::Trapezoid),
            "gauss-legendre" | "gauss" | "gl" => Ok(QuadratureRule::GaussLegendre),
            other => contract(format!("unknown quadrature rule {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub rule: QuadratureRule,
    pub points: usize,
    /// Re-run at twice the node count and report the largest change.
    #[serde(default)]
    pub refine_check: bool,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rule: QuadratureRule::Trapezoid,
            points: 256,
            refine_check: false,
        }
    }
}

impl QuadratureConfig {
    pub fn trapezoid(points: usize) -> Self {
        Self {
            rule: QuadratureRule::Trapezoid,
            points,
            refine_check: false,
        }
    }

    pub fn gauss_legendre(points: usize) -> Self {
        Self {
            rule: QuadratureRule::GaussLegendre,
            points,
            refine_check: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return contract(format!(
                "quadrature needs at least 2 points, got {}",
                self.points
            ));
        }
        Ok(())
    }

    pub fn doubled(&self) -> Self {
        Self {
            points: self.points * 2,
            refine_check: false,
            ..*self
        }
    }

    /// Nodes and weights on `[0, 1]`.
    pub fn nodes(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        self.validate()?;
        Ok(match self.rule {
            QuadratureRule::Trapezoid => trapezoid_nodes(self.points),
            QuadratureRule::GaussLegendre => gauss_legendre_nodes(self.points),
        })
    }
}

fn trapezoid_nodes(m: usize) -> (Vec<f64>, Vec<f64>) {
    let h = 1.0 / (m - 1) as f64;
    let nodes = (0..m).map(|i| i as f64 * h).collect();
    let mut weights = vec![h; m];
    weights[0] *= 0.5;
    weights[m - 1] *= 0.5;
    (nodes, weights)
}

/// Legendre roots by Newton iteration from the Tricomi initial guess,
/// mapped from `[-1, 1]` to `[0, 1]`.
fn gauss_legendre_nodes(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let nf = m as f64;
    for i in 0..m.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(m, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // x is the i-th largest root; mirror for the smallest
        nodes[m - 1 - i] = 0.5 * (1.0 + x);
        nodes[i] = 0.5 * (1.0 - x);
        weights[m - 1 - i] = 0.5 * w;
        weights[i] = 0.5 * w;
    }
    (nodes, weights)
}

/// `(P_m(x), P_m'(x))` by the three-term recurrence.
fn legendre(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
