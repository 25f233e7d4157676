//! Training-domain geometry for the convex-geometry audit.
//!
//! Membership is decided in coordinates normalized by the fitted box, so a
//! price axis near 1000 and a volatility axis near 0.3 weigh the same.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::features::{AttributionResult, FeatureVector};

use super::{Axiom, AxiomReport, ReportBuilder, Witness};

/// Slack for membership tests, in normalized units.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Default membership radius of a point cloud, in normalized units.
pub const DEFAULT_RADIUS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum DomainMode {
    AxisBox,
    Hull2d { pair: (usize, usize) },
    PointCloud { radius: f64 },
}

/// The region a model was trained on.
///
/// `bounds` always holds the per-feature `[lo, hi]` of the fitted data; the
/// hull and cloud modes refine it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum TrainingDomain {
    AxisBox {
        names: Vec<String>,
        bounds: Vec<(f64, f64)>,
    },
    Hull2d {
        names: Vec<String>,
        bounds: Vec<(f64, f64)>,
        pair: (usize, usize),
        /// Counter-clockwise, in raw coordinates of the pair.
        vertices: Vec<[f64; 2]>,
    },
    PointCloud {
        names: Vec<String>,
        bounds: Vec<(f64, f64)>,
        /// Min-max normalized sample points.
        points: Vec<Vec<f64>>,
        radius: f64,
    },
}

fn span(lo: f64, hi: f64) -> f64 {
    if hi > lo {
        hi - lo
    } else {
        1.0
    }
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + t * d[0], a[1] + t * d[1]])
}

/// Andrew's monotone chain; returns the hull counter-clockwise without
/// collinear points. Degenerate inputs yield one or two vertices.
pub(crate) fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Signed distance outside a counter-clockwise polygon (negative inside).
fn polygon_excess(p: [f64; 2], poly: &[[f64; 2]]) -> f64 {
    match poly.len() {
        0 => f64::INFINITY,
        1 => dist(p, poly[0]),
        2 => segment_distance(p, poly[0], poly[1]),
        n => {
            let mut inside_depth = f64::INFINITY;
            let mut outside = false;
            let mut nearest = f64::INFINITY;
            for i in 0..n {
                let (a, b) = (poly[i], poly[(i + 1) % n]);
                let signed = cross(a, b, p) / dist(a, b);
                if signed < 0.0 {
                    outside = true;
                }
                inside_depth = inside_depth.min(signed);
                nearest = nearest.min(segment_distance(p, a, b));
            }
            if outside {
                nearest
            } else {
                -inside_depth
            }
        }
    }
}

impl TrainingDomain {
    pub fn names(&self) -> &[String] {
        match self {
            TrainingDomain::AxisBox { names, .. }
            | TrainingDomain::Hull2d { names, .. }
            | TrainingDomain::PointCloud { names, .. } => names,
        }
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        match self {
            TrainingDomain::AxisBox { bounds, .. }
            | TrainingDomain::Hull2d { bounds, .. }
            | TrainingDomain::PointCloud { bounds, .. } => bounds,
        }
    }

    pub fn mode_label(&self) -> &'static str {
        match self {
            TrainingDomain::AxisBox { .. } => "axis-box",
            TrainingDomain::Hull2d { .. } => "hull2d",
            TrainingDomain::PointCloud { .. } => "point-cloud",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (names, bounds) = (self.names(), self.bounds());
        if names.is_empty() || names.len() != bounds.len() {
            return contract("domain needs one [lo, hi] per feature");
        }
        if bounds
            .iter()
            .any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi))
        {
            return contract("domain bounds need finite lo <= hi");
        }
        match self {
            TrainingDomain::AxisBox { .. } => {}
            TrainingDomain::Hull2d { pair, vertices, .. } => {
                if pair.0 == pair.1 || pair.0 >= names.len() || pair.1 >= names.len() {
                    return contract(format!("invalid hull feature pair {pair:?}"));
                }
                if vertices.is_empty() {
                    return contract("hull has no vertices");
                }
                let norm: Vec<[f64; 2]> =
                    vertices.iter().map(|v| self.normalize_pair(*v)).collect();
                let n = norm.len();
                if n >= 3 {
                    for i in 0..n {
                        if cross(norm[i], norm[(i + 1) % n], norm[(i + 2) % n]) < -MEMBERSHIP_TOL {
                            return contract(
                                "hull vertices are not a convex counter-clockwise polygon",
                            );
                        }
                    }
                }
            }
            TrainingDomain::PointCloud { points, radius, .. } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return contract(format!(
                        "point-cloud radius must be positive (got {radius})"
                    ));
                }
                if points.is_empty() || points.iter().any(|p| p.len() != names.len()) {
                    return contract("point cloud needs points of the domain's dimension");
                }
            }
        }
        Ok(())
    }

    fn normalize_pair(&self, v: [f64; 2]) -> [f64; 2] {
        let TrainingDomain::Hull2d { bounds, pair, .. } = self else {
            return v;
        };
        let (a, b) = (bounds[pair.0], bounds[pair.1]);
        [(v[0] - a.0) / span(a.0, a.1), (v[1] - b.0) / span(b.0, b.1)]
    }

    fn box_excess(&self, x: &[f64], skip: Option<(usize, usize)>) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for (i, (&v, &(lo, hi))) in x.iter().zip(self.bounds()).enumerate() {
            if skip.is_some_and(|(a, b)| i == a || i == b) {
                continue;
            }
            let s = span(lo, hi);
            worst = worst.max((lo - v) / s).max((v - hi) / s);
        }
        worst
    }

    /// How far `x` lies outside the domain in normalized units; at most
    /// [`MEMBERSHIP_TOL`] means inside.
    pub fn excess(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.names().len() {
            return contract(format!(
                "point has {} coordinates, domain has {}",
                x.len(),
                self.names().len()
            ));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Ok(f64::INFINITY);
        }
        Ok(match self {
            TrainingDomain::AxisBox { .. } => self.box_excess(x, None),
            TrainingDomain::Hull2d { pair, vertices, .. } => {
                let poly: Vec<[f64; 2]> =
                    vertices.iter().map(|v| self.normalize_pair(*v)).collect();
                let p = self.normalize_pair([x[pair.0], x[pair.1]]);
                polygon_excess(p, &poly).max(self.box_excess(x, Some(*pair)))
            }
            TrainingDomain::PointCloud {
                bounds,
                points,
                radius,
                ..
            } => {
                let z: Vec<f64> = x
                    .iter()
                    .zip(bounds)
                    .map(|(v, (lo, hi))| (v - lo) / span(*lo, *hi))
                    .collect();
                let nearest = points
                    .iter()
                    .map(|p| {
                        p.iter()
                            .zip(&z)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .fold(f64::INFINITY, f64::min);
                nearest - radius
            }
        })
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        Ok(self.excess(x)? <= MEMBERSHIP_TOL)
    }
}

/// Fits a training domain to sample points.
pub fn fit_domain(points: &[FeatureVector], mode: DomainMode) -> Result<TrainingDomain> {
    if points.len() < 3 {
        return Err(Error::InsufficientData {
            what: "domain points",
            needed: 3,
            got: points.len(),
        });
    }
    let names = points[0].names().to_vec();
    for p in &points[1..] {
        p.ensure_aligned(&points[0])?;
    }
    let d = names.len();
    let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); d];
    for p in points {
        for (b, &v) in bounds.iter_mut().zip(p.values()) {
            b.0 = b.0.min(v);
            b.1 = b.1.max(v);
        }
    }
    let domain = match mode {
        DomainMode::AxisBox => TrainingDomain::AxisBox { names, bounds },
        DomainMode::Hull2d { pair } => {
            if pair.0 == pair.1 || pair.0 >= d || pair.1 >= d {
                return contract(format!(
                    "invalid hull feature pair {pair:?} for {d} features"
                ));
            }
            let (a, b) = (bounds[pair.0], bounds[pair.1]);
            let (sa, sb) = (span(a.0, a.1), span(b.0, b.1));
            let norm: Vec<[f64; 2]> = points
                .iter()
                .map(|p| {
                    let v = p.values();
                    [(v[pair.0] - a.0) / sa, (v[pair.1] - b.0) / sb]
                })
                .collect();
            let vertices = convex_hull(&norm)
                .into_iter()
                .map(|[u, w]| [a.0 + u * sa, b.0 + w * sb])
                .collect();
            TrainingDomain::Hull2d {
                names,
                bounds,
                pair,
                vertices,
            }
        }
        DomainMode::PointCloud { radius } => {
            let points = points
                .iter()
                .map(|p| {
                    p.values()
                        .iter()
                        .zip(&bounds)
                        .map(|(v, (lo, hi))| (v - lo) / span(*lo, *hi))
                        .collect()
                })
                .collect();
            TrainingDomain::PointCloud {
                names,
                bounds,
                points,
                radius,
            }
        }
    };
    domain.validate()?;
    Ok(domain)
}

/// Convex geometry: every point the attribution method fed to the model lies
/// in the training domain. Point-cloud domains are not convex, so their
/// reports carry an "extended-CG" note.
pub fn check_cg(result: &AttributionResult, domain: &TrainingDomain) -> Result<AxiomReport> {
    domain.validate()?;
    result.explicand.ensure_names(domain.names())?;
    for (label, x) in [
        ("explicand", &result.explicand),
        ("baseline", &result.baseline),
    ] {
        let e = domain.excess(x.values())?;
        if e > MEMBERSHIP_TOL {
            return contract(format!(
                "{label} {:?} lies outside the {} domain (excess {e})",
                x.values(),
                domain.mode_label()
            ));
        }
    }
    let mut report = ReportBuilder::new(Axiom::Cg, result.method, domain.mode_label());
    if matches!(domain, TrainingDomain::PointCloud { .. }) {
        report.note("extended-CG: point-cloud domain is not convex");
    }
    for p in &result.evaluation_points {
        let e = domain.excess(p)?;
        report.compare(e, || Witness {
            points: vec![p.clone()],
            attributions: result.attributions.clone(),
            margin: 0.0,
            detail: format!(
                "evaluation point outside the {} domain",
                domain.mode_label()
            ),
        });
    }
    Ok(report.finish_with(MEMBERSHIP_TOL))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[[f64; 2]]) -> Vec<FeatureVector> {
        v.iter()
            .map(|p| FeatureVector::new(["x", "y"], p.to_vec()).unwrap())
            .collect()
    }

    #[test]
    fn unit_square_hull() {
        let sq = pts(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.2]]);
        let d = fit_domain(&sq, DomainMode::Hull2d { pair: (0, 1) }).unwrap();
        let TrainingDomain::Hull2d { vertices, .. } = &d else {
            panic!()
        };
        assert_eq!(vertices.len(), 4);
        assert!(d.contains(&[0.5, 0.5]).unwrap());
        assert!(d.contains(&[1.0, 1.0]).unwrap());
        assert!(!d.contains(&[2.0, 2.0]).unwrap());
        assert!((d.excess(&[2.0, 0.5]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_points_form_a_segment() {
        let line = pts(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [0.5, 0.5]]);
        let d = fit_domain(&line, DomainMode::Hull2d { pair: (0, 1) }).unwrap();
        let TrainingDomain::Hull2d { vertices, .. } = &d else {
            panic!()
        };
        assert_eq!(vertices.len(), 2);
        assert!(d.contains(&[1.5, 1.5]).unwrap());
        assert!(!d.contains(&[1.5, 1.5 + 1e-6]).unwrap());
        assert!(!d.contains(&[3.0, 3.0]).unwrap());
    }

    #[test]
    fn box_and_cloud_membership() {
        let p = pts(&[[0.0, 0.0], [10.0, 1.0], [10.0, 0.0]]);
        let b = fit_domain(&p, DomainMode::AxisBox).unwrap();
        assert!(b.contains(&[0.0, 1.0]).unwrap());
        assert!(!b.contains(&[-0.1, 0.5]).unwrap());
        let c = fit_domain(&p, DomainMode::PointCloud { radius: 0.05 }).unwrap();
        assert!(c.contains(&[0.3, 0.0]).unwrap());
        assert!(!c.contains(&[0.0, 1.0]).unwrap());
        assert!(fit_domain(&p, DomainMode::PointCloud { radius: 0.0 }).is_err());
    }

    #[test]
    fn too_few_points() {
        let p = pts(&[[0.0, 0.0], [1.0, 1.0]]);
        assert!(matches!(
            fit_domain(&p, DomainMode::AxisBox),
            Err(Error::InsufficientData {
                needed: 3,
                got: 2,
                ..
            })
        ));
    }

    #[test]
    fn concave_vertices_rejected() {
        let d = TrainingDomain::Hull2d {
            names: vec!["x".into(), "y".into()],
            bounds: vec![(0.0, 1.0), (0.0, 1.0)],
            pair: (0, 1),
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.2, 0.2], [0.0, 1.0]],
        };
        assert!(d.validate().is_err());
    }

    #[test]
    fn serde_tags_the_mode() {
        let p = pts(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let d = fit_domain(&p, DomainMode::Hull2d { pair: (0, 1) }).unwrap();
        let json = serde_json::to_string(&d).unwrap();
        assert!(json.contains("\"mode\":\"hull2d\""));
        let back: TrainingDomain = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
    }
}
