//! Fixed points of `f` and `f²`, local saddle classification, the
//! spectrum-gap test and orientation.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::dynamics::{MapError, MapSpec, PlanarMap};
use crate::geom::{Mat2, Point, Rect};
use crate::newton::{self, NewtonFailure, NewtonOptions};

/// Eigenvalues closer than this to the unit circle make a point non-hyperbolic.
pub const HYPERBOLICITY_BAND: f64 = 1e-6;
pub const MERGE_TOL: f64 = 1e-7;
pub const RESIDUAL_TOL: f64 = 1e-10;
pub const FIXED_INPUT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SaddleKind {
    Direct,
    Twisted,
    NotSaddle,
}

impl SaddleKind {
    pub fn label(self) -> &'static str {
        match self {
            SaddleKind::Direct => "DIRECT_SADDLE",
            SaddleKind::Twisted => "TWISTED_SADDLE",
            SaddleKind::NotSaddle => "NOT_SADDLE",
        }
    }

    pub fn is_saddle(self) -> bool {
        self != SaddleKind::NotSaddle
    }
}

impl fmt::Display for SaddleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointRecord {
    pub location: Point,
    pub period: u8,
    /// Jacobian of `f^period` at `location`.
    pub jacobian: Mat2,
    /// Ordered by increasing modulus.
    pub eigenvalues: [Complex64; 2],
    pub saddle_kind: SaddleKind,
    pub residual: f64,
    pub note: Option<String>,
    /// Unit eigenvectors for the contracting and expanding eigenvalue of a saddle.
    pub stable_dir: Option<Point>,
    pub unstable_dir: Option<Point>,
}

impl FixedPointRecord {
    /// Contracting and expanding eigenvalue of a saddle.
    pub fn saddle_eigenvalues(&self) -> Option<(f64, f64)> {
        self.saddle_kind.is_saddle().then(|| (self.eigenvalues[0].re, self.eigenvalues[1].re))
    }
}

/// Classify a point whose residual under `f^period` has already been measured.
pub fn classify_jacobian(location: Point, period: u8, jacobian: Mat2, residual: f64) -> FixedPointRecord {
    let mut ev = jacobian.eigenvalues();
    if ev[0].norm() > ev[1].norm() {
        ev.swap(0, 1);
    }
    let real = ev[0].im == 0.0 && ev[1].im == 0.0;
    let mut note = None;
    let mut kind = SaddleKind::NotSaddle;
    let (mut stable_dir, mut unstable_dir) = (None, None);
    if !real {
        note = Some("complex eigenvalues".to_string());
    } else {
        let (l, m) = (ev[0].re, ev[1].re);
        let near = |v: f64| (v.abs() - 1.0).abs() <= HYPERBOLICITY_BAND;
        if near(l) || near(m) {
            note = Some("near-nonhyperbolic".to_string());
        } else if l != 0.0 && l.abs() < 1.0 && m.abs() > 1.0 {
            kind = if l > 0.0 && m > 0.0 { SaddleKind::Direct } else { SaddleKind::Twisted };
            stable_dir = Some(jacobian.eigenvector(l));
            unstable_dir = Some(jacobian.eigenvector(m));
        }
    }
    FixedPointRecord {
        location,
        period,
        jacobian,
        eigenvalues: ev,
        saddle_kind: kind,
        residual,
        note,
        stable_dir,
        unstable_dir,
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FixedPointError {
    #[error("{point} is not fixed: residual {residual:e}")]
    NotFixed { point: Point, residual: f64 },
    #[error(transparent)]
    Map(#[from] MapError),
}

/// Jacobian, eigenvalues and saddle type of a fixed point of `f`.
pub fn classify_local(m: &MapSpec, p: Point) -> Result<FixedPointRecord, FixedPointError> {
    let (q, j) = m.eval_with_jacobian(p)?;
    let residual = q.dist(p);
    if !(residual <= FIXED_INPUT_TOL) {
        return Err(FixedPointError::NotFixed { point: p, residual });
    }
    Ok(classify_jacobian(p, 1, j, residual))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CensusParams {
    /// Seeds per side of the uniform seed grid.
    pub grid: usize,
    pub newton_steps: usize,
    pub merge_tol: f64,
    pub residual_tol: f64,
}

impl Default for CensusParams {
    fn default() -> Self {
        CensusParams { grid: 64, newton_steps: 50, merge_tol: MERGE_TOL, residual_tol: RESIDUAL_TOL }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Census {
    pub period: u8,
    pub region: Rect,
    /// All points of `Fix(f^period)` found, sorted by coordinates.
    pub points: Vec<FixedPointRecord>,
    /// For period 2: the points that are not fixed by `f`.
    pub genuine_period2: Vec<FixedPointRecord>,
    pub seeds: usize,
    pub skipped_singular: usize,
    pub unconverged: usize,
}

impl Census {
    pub fn locations(&self) -> Vec<Point> {
        self.points.iter().map(|r| r.location).collect()
    }
}

fn power_map(m: &MapSpec, period: u8) -> std::sync::Arc<dyn PlanarMap> {
    if period == 1 {
        m.forward().clone()
    } else {
        m.square().forward().clone()
    }
}

enum SeedOutcome {
    Found(Point),
    Singular,
    Failed,
}

fn lex(a: &Point, b: &Point) -> std::cmp::Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y))
}

/// Grid-seeded Newton search for `Fix(f^period)` in `region`.
pub fn find_fixed_points(m: &MapSpec, region: Rect, period: u8, params: &CensusParams) -> Census {
    assert!(period == 1 || period == 2, "period must be 1 or 2");
    let map = power_map(m, period);
    let seeds = region.grid(params.grid, params.grid);
    let diam = region.width().hypot(region.height());
    let opts = NewtonOptions {
        max_steps: params.newton_steps,
        abs_tol: 1e-14,
        escape_radius: 1e3 * (diam + region.center().norm() + 1.0),
    };
    let outcomes: Vec<SeedOutcome> = seeds
        .par_iter()
        .map(|&s| {
            let g = |q: Point| {
                map.eval_with_jacobian(q).map(|(v, j)| (v - q, j.sub(&Mat2::IDENTITY)))
            };
            match newton::solve(g, s, &opts) {
                Ok(sol) => SeedOutcome::Found(sol.point),
                Err(NewtonFailure::Singular(_)) => SeedOutcome::Singular,
                Err(_) => SeedOutcome::Failed,
            }
        })
        .collect();

    let mut skipped_singular = 0;
    let mut unconverged = 0;
    let mut found = Vec::new();
    let inside = region.inflated(params.merge_tol);
    for o in outcomes {
        match o {
            SeedOutcome::Found(p) if inside.contains(p) => found.push(p),
            SeedOutcome::Found(_) => {}
            SeedOutcome::Singular => skipped_singular += 1,
            SeedOutcome::Failed => unconverged += 1,
        }
    }
    found.sort_by(lex);

    let mut records: Vec<FixedPointRecord> = Vec::new();
    for p in found {
        let Ok((q, j)) = map.eval_with_jacobian(p) else { continue };
        let residual = q.dist(p);
        if !(residual <= params.residual_tol) {
            continue;
        }
        match records.iter_mut().find(|r| r.location.dist(p) <= params.merge_tol) {
            Some(r) => {
                if residual < r.residual {
                    *r = classify_jacobian(p, period, j, residual);
                }
            }
            None => records.push(classify_jacobian(p, period, j, residual)),
        }
    }
    records.sort_by(|a, b| lex(&a.location, &b.location));

    let genuine_period2 = if period == 2 {
        let fix1 = find_fixed_points(m, region, 1, params);
        records
            .iter()
            .filter(|r| fix1.points.iter().all(|q| q.location.dist(r.location) > params.merge_tol))
            .filter(|r| {
                // f also moves the point, so it is not a stray fixed point outside the period-1 census
                m.eval(r.location).map(|q| q.dist(r.location) > params.merge_tol).unwrap_or(false)
            })
            .cloned()
            .collect()
    } else {
        Vec::new()
    };

    Census {
        period,
        region,
        points: records,
        genuine_period2,
        seeds: seeds.len(),
        skipped_singular,
        unconverged,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGapReport {
    pub epsilon: f64,
    pub violation_points: Vec<(Point, f64)>,
    pub sample_count: usize,
    pub eval_failures: usize,
    pub holds_on_samples: bool,
}

/// A spectrum gap that holds on the samples allows at most one fixed point.
/// More than one means the census or the sampling is at fault.
pub fn gap_consistency(gap: &SpectrumGapReport, census: &Census) -> Result<(), String> {
    if gap.holds_on_samples && census.period == 1 && census.points.len() > 1 {
        return Err(format!(
            "spectrum gap holds on {} samples but the census found {} fixed points: {:?}",
            gap.sample_count,
            census.points.len(),
            census.locations()
        ));
    }
    Ok(())
}

/// Does any real eigenvalue of `Df` fall in `[1, 1+epsilon)` at a quasi-random
/// sample of `region`? A sampling check only.
pub fn spectrum_gap(m: &MapSpec, region: Rect, epsilon: f64, samples: usize) -> SpectrumGapReport {
    assert!(epsilon > 0.0, "epsilon must be positive");
    let pts = region.halton(samples);
    let evals: Vec<Option<Mat2>> = pts.par_iter().map(|&p| m.jacobian(p).ok()).collect();
    let mut violation_points = Vec::new();
    let mut eval_failures = 0;
    for (p, j) in pts.iter().zip(evals) {
        let Some(j) = j else {
            eval_failures += 1;
            continue;
        };
        for ev in j.eigenvalues() {
            if ev.im == 0.0 && ev.re >= 1.0 && ev.re < 1.0 + epsilon {
                violation_points.push((*p, ev.re));
                break;
            }
        }
    }
    SpectrumGapReport {
        epsilon,
        holds_on_samples: violation_points.is_empty(),
        violation_points,
        sample_count: pts.len(),
        eval_failures,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Orientation {
    Preserving,
    Reversing,
    /// A point with positive and a point with non-positive determinant, or
    /// twice the same point when the determinant vanishes there.
    Mixed(Point, Point),
}

impl Orientation {
    pub fn label(&self) -> &'static str {
        match self {
            Orientation::Preserving => "PRESERVING",
            Orientation::Reversing => "REVERSING",
            Orientation::Mixed(..) => "MIXED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientationReport {
    pub orientation: Orientation,
    /// First sample with `det Df <= 0`.
    pub non_positive_at: Option<Point>,
    pub sample_count: usize,
    pub eval_failures: usize,
}

/// Sign of `det Df` over a quasi-random sample of `region`.
pub fn orientation(m: &MapSpec, region: Rect, samples: usize) -> OrientationReport {
    let pts = region.halton(samples);
    let dets: Vec<Option<f64>> = pts.par_iter().map(|&p| m.jacobian(p).ok().map(|j| j.det())).collect();
    let mut pos = None;
    let mut neg = None;
    let mut eval_failures = 0;
    for (p, d) in pts.iter().zip(dets) {
        match d {
            None => eval_failures += 1,
            Some(d) if d == 0.0 || d.is_nan() => {
                return OrientationReport {
                    orientation: Orientation::Mixed(*p, *p),
                    non_positive_at: Some(*p),
                    sample_count: pts.len(),
                    eval_failures,
                }
            }
            Some(d) if d > 0.0 => {
                pos.get_or_insert(*p);
            }
            Some(_) => {
                neg.get_or_insert(*p);
            }
        }
    }
    let orientation = match (pos, neg) {
        (Some(a), Some(b)) => Orientation::Mixed(a, b),
        (_, Some(_)) => Orientation::Reversing,
        _ => Orientation::Preserving,
    };
    OrientationReport { orientation, non_positive_at: neg, sample_count: pts.len(), eval_failures }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn twisted() -> MapSpec {
        MapSpec::parse("twisted", Rect::square(3.0), "-0.5*x^3 + (0.5-1)*x", "-2*y")
    }

    fn pd2() -> MapSpec {
        MapSpec::parse("pd2", Rect::square(10.0), "2*x*(1+y^2)", "y/3")
    }

    #[test]
    fn twisted_period_two_census() {
        let c = find_fixed_points(&twisted(), Rect::square(3.0), 2, &CensusParams::default());
        let locs = c.locations();
        assert_eq!(locs.len(), 3, "{locs:?}");
        for (got, want) in locs.iter().zip([-1.0, 0.0, 1.0]) {
            assert!(got.dist(Point::new(want, 0.0)) < 1e-8);
        }
        assert_eq!(c.genuine_period2.len(), 2);
        for r in &c.points {
            assert!(r.residual <= RESIDUAL_TOL);
        }
    }

    #[test]
    fn gap_with_several_fixed_points_is_a_fault() {
        // x -> x^3 has fixed points -1, 0, 1 and f' = 3x^2 meets [1, 2) near |x| = 0.6
        let m = MapSpec::parse("cubic", Rect::square(2.0), "x^3", "y/2");
        let c = find_fixed_points(&m, m.region, 1, &CensusParams { grid: 16, ..CensusParams::default() });
        assert_eq!(c.points.len(), 3);
        let mut gap = spectrum_gap(&m, m.region, 1.0, 400);
        assert!(!gap.holds_on_samples);
        assert!(gap_consistency(&gap, &c).is_ok());
        gap.holds_on_samples = true;
        assert!(gap_consistency(&gap, &c).unwrap_err().contains("3 fixed points"));
    }

    #[test]
    fn pd2_and_linear_have_single_fixed_point() {
        let c = find_fixed_points(&pd2(), Rect::square(10.0), 1, &CensusParams::default());
        assert_eq!(c.locations(), vec![Point::ORIGIN]);
        let lin = MapSpec::parse("lin", Rect::square(3.0), "2*x", "y/2");
        let c = find_fixed_points(&lin, Rect::square(3.0), 1, &CensusParams::default());
        assert_eq!(c.locations(), vec![Point::ORIGIN]);
    }

    #[test]
    fn local_classification_examples() {
        let r = classify_local(&twisted(), Point::ORIGIN).unwrap();
        assert_eq!(r.saddle_kind, SaddleKind::Twisted);
        assert_eq!((r.eigenvalues[0].re, r.eigenvalues[1].re), (-0.5, -2.0));

        let quartic = MapSpec::parse(
            "quartic",
            Rect::square(10.0),
            "2*x*(1+x^2)/(4+x^2*(1+x^2)^2)",
            "8*y*(1+x^2)/(4+x^2*(1+x^2)^2)",
        );
        let r = classify_local(&quartic, Point::ORIGIN).unwrap();
        assert_eq!(r.jacobian, Mat2::diag(0.5, 2.0));
        assert_eq!(r.saddle_kind, SaddleKind::Direct);

        let m = MapSpec::parse("m", Rect::square(1.0), "x/2", "2*y");
        let r = classify_local(&m, Point::ORIGIN).unwrap();
        assert_eq!(r.saddle_kind, SaddleKind::Direct);
        assert_eq!(r.saddle_eigenvalues(), Some((0.5, 2.0)));
        assert_eq!(r.stable_dir, Some(Point::new(1.0, 0.0)));
        assert_eq!(r.unstable_dir, Some(Point::new(0.0, 1.0)));
    }

    #[test]
    fn non_fixed_input_rejected() {
        assert!(matches!(
            classify_local(&pd2(), Point::new(1.0, 1.0)),
            Err(FixedPointError::NotFixed { .. })
        ));
    }

    #[test]
    fn near_unit_eigenvalue_is_not_a_saddle() {
        let r = classify_jacobian(Point::ORIGIN, 1, Mat2::diag(1.0 + 1e-7, 0.5), 0.0);
        assert_eq!(r.saddle_kind, SaddleKind::NotSaddle);
        assert_eq!(r.note.as_deref(), Some("near-nonhyperbolic"));
        let r = classify_jacobian(Point::ORIGIN, 1, Mat2::new(0.0, -2.0, 2.0, 0.0), 0.0);
        assert_eq!(r.saddle_kind, SaddleKind::NotSaddle);
    }

    #[test]
    fn spectrum_gap_examples() {
        let r = spectrum_gap(&pd2(), Rect::square(10.0), 1.0, 2000);
        assert!(r.holds_on_samples);
        let m = MapSpec::parse("m", Rect::square(1.0), "1.05*x", "y/2");
        let r = spectrum_gap(&m, Rect::square(1.0), 0.1, 200);
        assert!(!r.holds_on_samples);
        assert_eq!(r.violation_points.len(), 200);
        assert!((r.violation_points[0].1 - 1.05).abs() < 1e-15);
        let r = spectrum_gap(&twisted(), Rect::square(3.0), 0.5, 2000);
        assert!(r.holds_on_samples);
    }

    #[test]
    fn orientation_examples() {
        assert_eq!(orientation(&twisted(), Rect::square(3.0), 500).orientation, Orientation::Preserving);
        let flip = MapSpec::parse("flip", Rect::square(1.0), "x", "-y");
        assert_eq!(orientation(&flip, Rect::square(1.0), 100).orientation, Orientation::Reversing);
        assert_eq!(orientation(&pd2(), Rect::square(10.0), 500).orientation, Orientation::Preserving);
        let fold = MapSpec::parse("fold", Rect::square(2.0), "x^2", "y");
        assert!(matches!(orientation(&fold, Rect::square(2.0), 100).orientation, Orientation::Mixed(..)));
    }
}
