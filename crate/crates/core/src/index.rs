//! Fixed-point index as the winding number of `p - f(p)` along a Jordan curve.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rayon::prelude::*;
use thiserror::Error;

use crate::dynamics::{MapError, PlanarMap};
use crate::geom::{segment_intersection, Point};

pub const MIN_DISPLACEMENT: f64 = 1e-8;
pub const INITIAL_SAMPLES: usize = 256;
pub const SAMPLE_BUDGET: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IndexError {
    #[error("fixed point on curve: |p - f(p)| = {displacement:e} at {point}")]
    FixedPointOnCurve { point: Point, displacement: f64 },
    #[error("refinement budget of {0} samples exhausted")]
    BudgetExhausted(usize),
    #[error("polygon is not simple: edges {0} and {1} intersect")]
    NotSimple(usize, usize),
    #[error("polygon needs at least three vertices")]
    TooFewVertices,
    #[error("circle radius must be positive")]
    BadRadius,
    #[error(transparent)]
    Map(#[from] MapError),
}

/// A counterclockwise Jordan curve.
#[derive(Debug, Clone, PartialEq)]
pub enum JordanCurve {
    Circle { center: Point, radius: f64 },
    Polygon(Vec<Point>),
}

impl JordanCurve {
    pub fn circle(center: Point, radius: f64) -> Result<JordanCurve, IndexError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(IndexError::BadRadius);
        }
        Ok(JordanCurve::Circle { center, radius })
    }

    /// Validates simplicity and reorders the vertices counterclockwise.
    pub fn polygon(mut vertices: Vec<Point>) -> Result<JordanCurve, IndexError> {
        let n = vertices.len();
        if n < 3 {
            return Err(IndexError::TooFewVertices);
        }
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                let (c, d) = (vertices[j], vertices[(j + 1) % n]);
                if segment_intersection(a, b, c, d).is_some() {
                    return Err(IndexError::NotSimple(i, j));
                }
            }
        }
        let area: f64 = (0..n).map(|i| vertices[i].cross(vertices[(i + 1) % n])).sum();
        if area < 0.0 {
            vertices.reverse();
        }
        Ok(JordanCurve::Polygon(vertices))
    }

    /// Point at curve parameter `s` in `[0, 1)`.
    pub fn at(&self, s: f64) -> Point {
        match self {
            JordanCurve::Circle { center, radius } => {
                let a = TAU * s;
                *center + Point::new(a.cos(), a.sin()) * *radius
            }
            JordanCurve::Polygon(v) => {
                let n = v.len();
                let lens: Vec<f64> = (0..n).map(|i| v[i].dist(v[(i + 1) % n])).collect();
                let total: f64 = lens.iter().sum();
                let mut target = s.rem_euclid(1.0) * total;
                for i in 0..n {
                    if target <= lens[i] || i == n - 1 {
                        return v[i].lerp(v[(i + 1) % n], (target / lens[i]).min(1.0));
                    }
                    target -= lens[i];
                }
                unreachable!()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexResult {
    pub degree: i32,
    pub min_displacement: f64,
    pub samples_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexParams {
    pub initial_samples: usize,
    pub budget: usize,
    pub min_displacement: f64,
}

impl Default for IndexParams {
    fn default() -> Self {
        IndexParams { initial_samples: INITIAL_SAMPLES, budget: SAMPLE_BUDGET, min_displacement: MIN_DISPLACEMENT }
    }
}

/// Signed angle from `a` to `b` in `(-pi, pi]`.
fn turn(a: Point, b: Point) -> f64 {
    a.cross(b).atan2(a.dot(b))
}

/// Degree of `I - f` along `curve`.
///
/// Any arc across which the direction of `p - f(p)` turns by `pi/2` or more
/// is bisected, so each increment of the winding sum is unambiguous.
pub fn fixed_point_index(
    f: &dyn PlanarMap,
    curve: &JordanCurve,
    params: &IndexParams,
) -> Result<IndexResult, IndexError> {
    let displacement = |s: f64| -> Result<(Point, Point), IndexError> {
        let p = curve.at(s);
        let v = p - f.eval(p)?;
        let d = v.norm();
        if !(d >= params.min_displacement) {
            return Err(IndexError::FixedPointOnCurve { point: p, displacement: d });
        }
        Ok((p, v))
    };
    let n0 = params.initial_samples.max(4);
    let initial: Vec<(f64, Point)> = (0..n0)
        .into_par_iter()
        .map(|i| {
            let s = i as f64 / n0 as f64;
            displacement(s).map(|(_, v)| (s, v))
        })
        .collect::<Result<_, _>>()?;
    let mut samples = n0;
    let mut min_disp = initial.iter().map(|(_, v)| v.norm()).fold(f64::INFINITY, f64::min);
    let mut total = 0.0;
    for i in 0..n0 {
        let (s0, v0) = initial[i];
        let (s1, v1) = if i + 1 < n0 { initial[i + 1] } else { (1.0, initial[0].1) };
        // depth-first bisection keeps the sum in curve order
        let mut stack = vec![(s0, v0, s1, v1)];
        while let Some((a, va, b, vb)) = stack.pop() {
            let t = turn(va, vb);
            if t.abs() < FRAC_PI_2 {
                total += t;
                continue;
            }
            if samples >= params.budget || b - a < 1e-15 {
                return Err(IndexError::BudgetExhausted(samples));
            }
            let m = 0.5 * (a + b);
            let (_, vm) = displacement(m)?;
            samples += 1;
            min_disp = min_disp.min(vm.norm());
            stack.push((m, vm, b, vb));
            stack.push((a, va, m, vm));
        }
    }
    let degree = (total / TAU).round();
    debug_assert!((total - degree * TAU).abs() < PI / 4.0);
    Ok(IndexResult { degree: degree as i32, min_displacement: min_disp, samples_used: samples })
}

pub const PROBE_SHRINKS: usize = 3;

/// Index of an isolated fixed point `p`, probed on a small circle whose
/// radius starts at `1e-3 (1 + |p|)` and shrinks tenfold when the curve
/// passes too close to a fixed point. `others` are the remaining known fixed
/// points, used to reject probes that are not isolating.
pub fn index_at_point(f: &dyn PlanarMap, p: Point, others: &[Point]) -> Result<i32, IndexError> {
    let mut radius = 1e-3 * (1.0 + p.norm());
    let params = IndexParams::default();
    let mut last_err = None;
    for _ in 0..=PROBE_SHRINKS {
        let isolated = others.iter().filter(|q| q.dist(p) > 0.0).all(|q| q.dist(p) > 2.0 * radius);
        if isolated {
            match fixed_point_index(f, &JordanCurve::circle(p, radius)?, &params) {
                Ok(r) => return Ok(r.degree),
                Err(e @ IndexError::FixedPointOnCurve { .. }) => last_err = Some(e),
                Err(e) => return Err(e),
            }
        }
        radius /= 10.0;
    }
    Err(last_err.unwrap_or(IndexError::FixedPointOnCurve { point: p, displacement: 0.0 }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::MapSpec;
    use crate::geom::Rect;

    fn map(fx: &str, fy: &str) -> MapSpec {
        MapSpec::parse("m", Rect::square(10.0), fx, fy)
    }

    fn index_on(m: &MapSpec, c: Point, r: f64) -> i32 {
        let curve = JordanCurve::circle(c, r).unwrap();
        fixed_point_index(m.forward().as_ref(), &curve, &IndexParams::default()).unwrap().degree
    }

    #[test]
    fn circle_examples() {
        let twisted = map("-0.5*x^3 + (0.5-1)*x", "-2*y");
        assert_eq!(index_on(&twisted, Point::ORIGIN, 0.5), 1);
        assert_eq!(index_on(&map("2*x", "y/2"), Point::ORIGIN, 1.0), -1);
        assert_eq!(index_on(&map("2*x*(1+y^2)", "y/3"), Point::new(5.0, 5.0), 1.0), 0);
    }

    #[test]
    fn point_index_examples() {
        let phi = map("x*(1+atan(x)^2)/(4+pi^2)", "2*y");
        assert_eq!(index_at_point(phi.forward().as_ref(), Point::ORIGIN, &[]).unwrap(), -1);
        let twisted = map("-0.5*x^3 + (0.5-1)*x", "-2*y");
        assert_eq!(index_at_point(twisted.forward().as_ref(), Point::ORIGIN, &[]).unwrap(), 1);
        let attract = map("x/2", "y/3");
        assert_eq!(index_at_point(attract.forward().as_ref(), Point::ORIGIN, &[]).unwrap(), 1);
    }

    #[test]
    fn fixed_point_on_curve_is_an_error() {
        let m = map("2*x", "y/2");
        let curve = JordanCurve::circle(Point::new(1.0, 0.0), 1.0).unwrap();
        assert!(matches!(
            fixed_point_index(m.forward().as_ref(), &curve, &IndexParams::default()),
            Err(IndexError::FixedPointOnCurve { .. })
        ));
    }

    #[test]
    fn polygon_curves() {
        let m = map("2*x", "y/2");
        let square = vec![Point::new(-1.0, -1.0), Point::new(-1.0, 1.0), Point::new(1.0, 1.0), Point::new(1.0, -1.0)];
        // clockwise input is reordered
        let c = JordanCurve::polygon(square).unwrap();
        let r = fixed_point_index(m.forward().as_ref(), &c, &IndexParams::default()).unwrap();
        assert_eq!(r.degree, -1);
        let bowtie = vec![Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        assert!(matches!(JordanCurve::polygon(bowtie), Err(IndexError::NotSimple(..))));
    }

    #[test]
    fn rapid_rotation_forces_refinement() {
        // p - f(p) is z^7, which winds 7 times around the unit circle
        let m = map("x - (x^7 - 21*x^5*y^2 + 35*x^3*y^4 - 7*x*y^6)", "y - (7*x^6*y - 35*x^4*y^3 + 21*x^2*y^5 - y^7)");
        let curve = JordanCurve::circle(Point::ORIGIN, 1.0).unwrap();
        // 16 samples turn by 7pi/8 per arc, forcing bisection; 8 would alias
        let p = IndexParams { initial_samples: 16, ..IndexParams::default() };
        let r = fixed_point_index(m.forward().as_ref(), &curve, &p).unwrap();
        assert_eq!(r.degree, 7);
        assert!(r.samples_used > 16);
    }
}
