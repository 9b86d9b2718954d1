//! Detection of the admissible symmetry groups `Z2(-Id)`, `Z2(κ)` and `D2`.

use std::fmt;

use rayon::prelude::*;

use crate::dynamics::MapSpec;
use crate::geom::{Point, Rect};

pub const TOL_EQUIV: f64 = 1e-9;

/// An involution of the plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupElement {
    MinusId,
    /// `(x, y) -> (x, -y)`, fixing the x-axis.
    KappaX,
    /// `(x, y) -> (-x, y)`, fixing the y-axis.
    KappaY,
}

impl GroupElement {
    pub const CANDIDATES: [GroupElement; 3] = [GroupElement::MinusId, GroupElement::KappaX, GroupElement::KappaY];

    pub fn apply(self, p: Point) -> Point {
        match self {
            GroupElement::MinusId => -p,
            GroupElement::KappaX => Point::new(p.x, -p.y),
            GroupElement::KappaY => Point::new(-p.x, p.y),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            GroupElement::MinusId => "-Id",
            GroupElement::KappaX => "kappa_x",
            GroupElement::KappaY => "kappa_y",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn label(self) -> &'static str {
        match self {
            Axis::X => "x-axis",
            Axis::Y => "y-axis",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SymmetryGroup {
    Trivial,
    Z2MinusId,
    /// A single reflection fixing the given axis.
    Z2Kappa(Axis),
    D2,
}

impl SymmetryGroup {
    pub fn label(self) -> &'static str {
        match self {
            SymmetryGroup::Trivial => "TRIVIAL",
            SymmetryGroup::Z2MinusId => "Z2_MINUS_ID",
            SymmetryGroup::Z2Kappa(Axis::X) => "Z2_KAPPA(x-axis)",
            SymmetryGroup::Z2Kappa(Axis::Y) => "Z2_KAPPA(y-axis)",
            SymmetryGroup::D2 => "D2",
        }
    }

    pub fn has_reflection(self) -> bool {
        matches!(self, SymmetryGroup::Z2Kappa(_) | SymmetryGroup::D2)
    }
}

impl fmt::Display for SymmetryGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToleranceSource {
    Default,
    /// Taken from the map, e.g. an integrator accuracy.
    MapHint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryReport {
    pub group: SymmetryGroup,
    /// Max over samples of `|f(γp) - γf(p)| / (1 + |f(p)|)`, per candidate.
    pub residuals: Vec<(GroupElement, f64)>,
    /// Sample attaining each maximal residual.
    pub worst_points: Vec<(GroupElement, Point)>,
    pub sample_count: usize,
    pub eval_failures: usize,
    pub tolerance: f64,
    pub tolerance_source: ToleranceSource,
    pub warnings: Vec<String>,
}

impl SymmetryReport {
    pub fn residual(&self, g: GroupElement) -> f64 {
        self.residuals.iter().find(|(e, _)| *e == g).map(|(_, r)| *r).unwrap_or(f64::INFINITY)
    }

    pub fn worst_point(&self, g: GroupElement) -> Option<Point> {
        self.worst_points.iter().find(|(e, _)| *e == g).map(|(_, p)| *p)
    }

    pub fn passes(&self, g: GroupElement) -> bool {
        self.residual(g) <= self.tolerance
    }
}

/// Test each candidate involution on quasi-random samples of `region` and
/// assemble the largest admissible group from those that pass.
pub fn detect_symmetry(m: &MapSpec, region: Rect, samples: usize) -> SymmetryReport {
    assert!(samples >= 100, "at least 100 samples are required");
    let (tolerance, tolerance_source) = match m.equivariance_tol {
        Some(t) => (t, ToleranceSource::MapHint),
        None => (TOL_EQUIV, ToleranceSource::Default),
    };
    let scale = region.width().max(region.height());
    // skip points on the axes, which the reflections fix
    let mut pts: Vec<Point> = Vec::with_capacity(samples);
    let mut k = 0;
    while pts.len() < samples {
        let batch = region.halton(samples + k + 16);
        pts = batch.into_iter().filter(|p| p.x.abs() > 1e-12 * scale && p.y.abs() > 1e-12 * scale).collect();
        pts.truncate(samples);
        k += 16;
    }
    let rows: Vec<Option<[f64; 3]>> = pts
        .par_iter()
        .map(|&p| {
            let fp = m.eval(p).ok()?;
            let mut out = [0.0; 3];
            for (i, g) in GroupElement::CANDIDATES.iter().enumerate() {
                let lhs = m.eval(g.apply(p)).ok()?;
                out[i] = lhs.dist(g.apply(fp)) / (1.0 + fp.norm());
            }
            Some(out)
        })
        .collect();
    let mut maxes = [0.0f64; 3];
    let mut worst = [pts[0]; 3];
    let mut eval_failures = 0;
    for (p, r) in pts.iter().zip(rows) {
        match r {
            Some(r) => {
                for i in 0..3 {
                    let v = if r[i].is_nan() { f64::INFINITY } else { r[i] };
                    if v > maxes[i] {
                        maxes[i] = v;
                        worst[i] = *p;
                    }
                }
            }
            None => eval_failures += 1,
        }
    }
    let residuals: Vec<(GroupElement, f64)> = GroupElement::CANDIDATES.iter().copied().zip(maxes).collect();
    let worst_points: Vec<(GroupElement, Point)> = GroupElement::CANDIDATES.iter().copied().zip(worst).collect();
    let pass = |i: usize| maxes[i] <= tolerance;
    let mut warnings = Vec::new();
    let group = match (pass(0), pass(1), pass(2)) {
        (_, true, true) => {
            if !pass(0) {
                warnings.push(format!(
                    "both reflections pass but -Id residual {:e} exceeds tolerance",
                    maxes[0]
                ));
            }
            SymmetryGroup::D2
        }
        (_, true, false) => SymmetryGroup::Z2Kappa(Axis::X),
        (_, false, true) => SymmetryGroup::Z2Kappa(Axis::Y),
        (true, false, false) => SymmetryGroup::Z2MinusId,
        (false, false, false) => SymmetryGroup::Trivial,
    };
    if eval_failures > 0 {
        warnings.push(format!("{eval_failures} samples could not be evaluated"));
    }
    SymmetryReport {
        group,
        residuals,
        worst_points,
        sample_count: pts.len(),
        eval_failures,
        tolerance,
        tolerance_source,
        warnings,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedSubspace {
    Line(Axis),
    /// Only the origin; `-Id` is not a reflection.
    Origin,
}

impl FixedSubspace {
    pub fn is_degenerate(self) -> bool {
        self == FixedSubspace::Origin
    }
}

pub fn fixed_subspace(g: GroupElement) -> FixedSubspace {
    match g {
        GroupElement::KappaX => FixedSubspace::Line(Axis::X),
        GroupElement::KappaY => FixedSubspace::Line(Axis::Y),
        GroupElement::MinusId => FixedSubspace::Origin,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineInvariance {
    pub invariant: bool,
    pub max_residual: f64,
    pub samples: usize,
}

/// Is the axis mapped into itself? Samples span the region's extent along it.
pub fn check_invariant_line(m: &MapSpec, line: Axis, samples: usize, tol: f64) -> LineInvariance {
    let r = m.region;
    let n = samples.max(2);
    let mut max_residual: f64 = 0.0;
    for i in 0..n {
        let s = (i as f64 + 0.5) / n as f64;
        let p = match line {
            Axis::X => Point::new(r.x0 + s * r.width(), 0.0),
            Axis::Y => Point::new(0.0, r.y0 + s * r.height()),
        };
        let res = match m.eval(p) {
            Ok(q) => {
                let off = match line {
                    Axis::X => q.y.abs(),
                    Axis::Y => q.x.abs(),
                };
                off / (1.0 + q.norm())
            }
            Err(_) => f64::INFINITY,
        };
        max_residual = max_residual.max(res);
    }
    LineInvariance { invariant: max_residual <= tol, max_residual, samples: n }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detection_examples() {
        let pd2 = MapSpec::parse("pd2", Rect::square(10.0), "2*x*(1+y^2)", "y/3");
        assert_eq!(detect_symmetry(&pd2, pd2.region, 200).group, SymmetryGroup::D2);
        let phi = MapSpec::parse("phi", Rect::square(5.0), "x*(1+atan(x)^2)/(4+pi^2)", "-2*y");
        assert_eq!(detect_symmetry(&phi, phi.region, 200).group, SymmetryGroup::D2);
        // y^2 is even, so f(x, -y) = (2x + y^2, -y/2) = kappa_x f(x, y)
        let even = MapSpec::parse("even", Rect::square(2.0), "2*x+y^2", "y/2");
        let r = detect_symmetry(&even, even.region, 200);
        assert_eq!(r.group, SymmetryGroup::Z2Kappa(Axis::X));
        assert_eq!(r.residual(GroupElement::KappaX), 0.0);
        let none = MapSpec::parse("none", Rect::square(2.0), "2*x+y^2", "y/2+x^2");
        let r = detect_symmetry(&none, none.region, 200);
        assert_eq!(r.group, SymmetryGroup::Trivial);
        assert!(r.residuals.iter().all(|(_, v)| *v > TOL_EQUIV));
    }

    #[test]
    fn single_generators() {
        let odd = MapSpec::parse("odd", Rect::square(2.0), "2*x+y^3", "x/3+y/2");
        assert_eq!(detect_symmetry(&odd, odd.region, 100).group, SymmetryGroup::Z2MinusId);
        let kx = MapSpec::parse("kx", Rect::square(2.0), "2*x+x^2+y^2", "y/2");
        assert_eq!(detect_symmetry(&kx, kx.region, 100).group, SymmetryGroup::Z2Kappa(Axis::X));
    }

    #[test]
    fn fixed_subspaces() {
        assert_eq!(fixed_subspace(GroupElement::KappaX), FixedSubspace::Line(Axis::X));
        assert_eq!(fixed_subspace(GroupElement::KappaY), FixedSubspace::Line(Axis::Y));
        assert!(fixed_subspace(GroupElement::MinusId).is_degenerate());
        for g in GroupElement::CANDIDATES {
            let p = Point::new(0.3, -1.7);
            assert_eq!(g.apply(g.apply(p)), p);
        }
    }

    #[test]
    fn invariant_lines() {
        let pd2 = MapSpec::parse("pd2", Rect::square(10.0), "2*x*(1+y^2)", "y/3");
        assert!(check_invariant_line(&pd2, Axis::X, 100, TOL_EQUIV).invariant);
        assert!(check_invariant_line(&pd2, Axis::Y, 100, TOL_EQUIV).invariant);
        let shift = MapSpec::parse("shift", Rect::square(3.0), "x+y+1", "y");
        assert!(check_invariant_line(&shift, Axis::X, 100, TOL_EQUIV).invariant);
        assert!(!check_invariant_line(&shift, Axis::Y, 100, TOL_EQUIV).invariant);
    }
}
