//! Planar maps, orbits and limit-set classification.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::expr::{EvalError, Expression};
use crate::geom::{Mat2, Point, Rect};
use crate::newton::{self, NewtonFailure, NewtonOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("non-finite image of {0}")]
    NonFinite(Point),
    #[error("no preimage found for {0}")]
    InversionFailed(Point),
    #[error("integration failed: {0}")]
    Integration(String),
}

/// A map of the plane that can be evaluated with its Jacobian.
pub trait PlanarMap: Send + Sync {
    fn eval(&self, p: Point) -> Result<Point, MapError>;

    fn eval_with_jacobian(&self, p: Point) -> Result<(Point, Mat2), MapError>;

    fn jacobian(&self, p: Point) -> Result<Mat2, MapError> {
        self.eval_with_jacobian(p).map(|(_, j)| j)
    }

    /// Preimage of `p` starting the search at `seed`. Maps with a closed
    /// form inverse ignore the seed.
    fn preimage(&self, p: Point, seed: Point) -> Result<Point, MapError> {
        newton_preimage(self, p, seed)
    }
}

fn check(q: Point, p: Point) -> Result<Point, MapError> {
    if q.is_finite() {
        Ok(q)
    } else {
        Err(MapError::NonFinite(p))
    }
}

/// Newton solve of `f(q) = p` from `seed`.
pub fn newton_preimage<M: PlanarMap + ?Sized>(f: &M, p: Point, seed: Point) -> Result<Point, MapError> {
    let opts = NewtonOptions { max_steps: 50, abs_tol: 1e-14, escape_radius: 1e15 };
    match newton::solve(|q| f.eval_with_jacobian(q).map(|(v, j)| (v - p, j)), seed, &opts) {
        Ok(sol) => Ok(sol.point),
        Err(NewtonFailure::Map(e @ MapError::Integration(_))) => Err(e),
        Err(_) => Err(MapError::InversionFailed(p)),
    }
}

/// `(x, y) -> (fx(x, y), fy(x, y))` given by two expressions.
#[derive(Debug, Clone)]
pub struct ExprMap {
    pub fx: Expression,
    pub fy: Expression,
}

impl PlanarMap for ExprMap {
    fn eval(&self, p: Point) -> Result<Point, MapError> {
        let q = Point::new(self.fx.eval(p.x, p.y, 0.0)?, self.fy.eval(p.x, p.y, 0.0)?);
        check(q, p)
    }

    fn eval_with_jacobian(&self, p: Point) -> Result<(Point, Mat2), MapError> {
        let u = self.fx.eval_dual(p.x, p.y, 0.0)?;
        let v = self.fy.eval_dual(p.x, p.y, 0.0)?;
        let j = Mat2::new(u.dx, u.dy, v.dx, v.dy);
        let q = check(Point::new(u.value, v.value), p)?;
        if !j.is_finite() {
            return Err(MapError::NonFinite(p));
        }
        Ok((q, j))
    }
}

/// `second(first(p))`.
pub struct Composed {
    pub first: Arc<dyn PlanarMap>,
    pub second: Arc<dyn PlanarMap>,
}

impl PlanarMap for Composed {
    fn eval(&self, p: Point) -> Result<Point, MapError> {
        self.second.eval(self.first.eval(p)?)
    }

    fn eval_with_jacobian(&self, p: Point) -> Result<(Point, Mat2), MapError> {
        let (q, a) = self.first.eval_with_jacobian(p)?;
        let (r, b) = self.second.eval_with_jacobian(q)?;
        Ok((r, b.matmul(&a)))
    }

    fn preimage(&self, p: Point, seed: Point) -> Result<Point, MapError> {
        let mid_seed = self.first.eval(seed).unwrap_or(seed);
        let mid = self.second.preimage(p, mid_seed)?;
        self.first.preimage(mid, seed)
    }
}

/// `p -> inner(p + shift) - shift`, which moves the point `shift` to the origin.
pub struct Translated {
    pub inner: Arc<dyn PlanarMap>,
    pub shift: Point,
}

impl PlanarMap for Translated {
    fn eval(&self, p: Point) -> Result<Point, MapError> {
        Ok(self.inner.eval(p + self.shift)? - self.shift)
    }

    fn eval_with_jacobian(&self, p: Point) -> Result<(Point, Mat2), MapError> {
        let (q, j) = self.inner.eval_with_jacobian(p + self.shift)?;
        Ok((q - self.shift, j))
    }

    fn preimage(&self, p: Point, seed: Point) -> Result<Point, MapError> {
        Ok(self.inner.preimage(p + self.shift, seed + self.shift)? - self.shift)
    }
}

/// Inverse of a map with a known closed form inverse `inv`.
struct Inverted {
    forward: Arc<dyn PlanarMap>,
    inverse: Arc<dyn PlanarMap>,
}

impl PlanarMap for Inverted {
    fn eval(&self, p: Point) -> Result<Point, MapError> {
        self.inverse.eval(p)
    }
    fn eval_with_jacobian(&self, p: Point) -> Result<(Point, Mat2), MapError> {
        self.inverse.eval_with_jacobian(p)
    }
    fn preimage(&self, p: Point, _seed: Point) -> Result<Point, MapError> {
        self.forward.eval(p)
    }
}

/// Inverse evaluated by Newton's method seeded at the query point.
struct NewtonInverse {
    forward: Arc<dyn PlanarMap>,
}

impl PlanarMap for NewtonInverse {
    fn eval(&self, p: Point) -> Result<Point, MapError> {
        self.forward.preimage(p, p)
    }
    fn eval_with_jacobian(&self, p: Point) -> Result<(Point, Mat2), MapError> {
        let q = self.eval(p)?;
        let j = self.forward.jacobian(q)?;
        let inv = j.inverse().ok_or(MapError::InversionFailed(p))?;
        Ok((q, inv))
    }
    fn preimage(&self, p: Point, _seed: Point) -> Result<Point, MapError> {
        self.forward.eval(p)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoadError {
    #[error("inverse check failed at {point}: |f(f^-1(q)) - q| = {residual:e}")]
    InverseMismatch { point: Point, residual: f64 },
    #[error("inverse check could not evaluate at {point}: {source}")]
    InverseEval { point: Point, source: MapError },
    #[error("declared region {0} is degenerate")]
    BadRegion(Rect),
}

/// A planar map together with the data the analyses need about it.
#[derive(Clone)]
pub struct MapSpec {
    pub name: String,
    pub region: Rect,
    forward: Arc<dyn PlanarMap>,
    inverse: Option<Arc<dyn PlanarMap>>,
    /// Tolerance for equivariance checks when the map is only known to
    /// integrator accuracy.
    pub equivariance_tol: Option<f64>,
    /// The original coordinates of the origin of this map, if it was translated.
    pub translation: Option<Point>,
}

impl fmt::Debug for MapSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MapSpec")
            .field("name", &self.name)
            .field("region", &self.region)
            .field("has_inverse", &self.inverse.is_some())
            .finish()
    }
}

pub const INVERSE_CHECK_POINTS: usize = 100;
pub const INVERSE_CHECK_TOL: f64 = 1e-9;

impl MapSpec {
    pub fn new(
        name: impl Into<String>,
        region: Rect,
        forward: Arc<dyn PlanarMap>,
        inverse: Option<Arc<dyn PlanarMap>>,
    ) -> Result<MapSpec, LoadError> {
        if !region.is_valid() {
            return Err(LoadError::BadRegion(region));
        }
        let spec = MapSpec {
            name: name.into(),
            region,
            forward,
            inverse,
            equivariance_tol: None,
            translation: None,
        };
        spec.check_inverse()?;
        Ok(spec)
    }

    pub fn from_formulas(
        name: impl Into<String>,
        region: Rect,
        fx: Expression,
        fy: Expression,
        inverse: Option<(Expression, Expression)>,
    ) -> Result<MapSpec, LoadError> {
        let inv = inverse.map(|(ix, iy)| Arc::new(ExprMap { fx: ix, fy: iy }) as Arc<dyn PlanarMap>);
        MapSpec::new(name, region, Arc::new(ExprMap { fx, fy }), inv)
    }

    /// Convenience constructor for tests and fixtures; panics on bad input.
    pub fn parse(name: &str, region: Rect, fx: &str, fy: &str) -> MapSpec {
        let fx = Expression::parse(fx).expect("valid x formula");
        let fy = Expression::parse(fy).expect("valid y formula");
        MapSpec::from_formulas(name, region, fx, fy, None).expect("valid map")
    }

    fn check_inverse(&self) -> Result<(), LoadError> {
        let Some(inv) = &self.inverse else { return Ok(()) };
        for q in self.region.halton(INVERSE_CHECK_POINTS) {
            let back = inv
                .eval(q)
                .and_then(|r| self.forward.eval(r))
                .map_err(|source| LoadError::InverseEval { point: q, source })?;
            let residual = back.dist(q);
            if residual.is_nan() || residual > INVERSE_CHECK_TOL {
                return Err(LoadError::InverseMismatch { point: q, residual });
            }
        }
        Ok(())
    }

    pub fn forward(&self) -> &Arc<dyn PlanarMap> {
        &self.forward
    }

    pub fn has_inverse_formula(&self) -> bool {
        self.inverse.is_some()
    }

    /// The inverse map: closed form when supplied, Newton inversion otherwise.
    pub fn inverse_map(&self) -> Arc<dyn PlanarMap> {
        match &self.inverse {
            Some(inv) => Arc::new(Inverted { forward: self.forward.clone(), inverse: inv.clone() }),
            None => Arc::new(NewtonInverse { forward: self.forward.clone() }),
        }
    }

    pub fn eval(&self, p: Point) -> Result<Point, MapError> {
        self.forward.eval(p)
    }

    pub fn eval_with_jacobian(&self, p: Point) -> Result<(Point, Mat2), MapError> {
        self.forward.eval_with_jacobian(p)
    }

    pub fn jacobian(&self, p: Point) -> Result<Mat2, MapError> {
        self.forward.jacobian(p)
    }

    /// `f^-1(p)`; Newton searches start at `seed`.
    pub fn preimage(&self, p: Point, seed: Point) -> Result<Point, MapError> {
        match &self.inverse {
            Some(inv) => inv.eval(p),
            None => self.forward.preimage(p, seed),
        }
    }

    /// `f∘f`, composed by chained evaluation.
    pub fn square(&self) -> MapSpec {
        let forward: Arc<dyn PlanarMap> =
            Arc::new(Composed { first: self.forward.clone(), second: self.forward.clone() });
        let inverse = self.inverse.as_ref().map(|inv| {
            Arc::new(Composed { first: inv.clone(), second: inv.clone() }) as Arc<dyn PlanarMap>
        });
        MapSpec {
            name: format!("{}^2", self.name),
            region: self.region,
            forward,
            inverse,
            equivariance_tol: self.equivariance_tol,
            translation: self.translation,
        }
    }

    /// Conjugate by the translation taking `shift` to the origin. The
    /// region is translated along.
    pub fn translated(&self, shift: Point) -> MapSpec {
        let forward: Arc<dyn PlanarMap> = Arc::new(Translated { inner: self.forward.clone(), shift });
        let inverse = self
            .inverse
            .as_ref()
            .map(|inv| Arc::new(Translated { inner: inv.clone(), shift }) as Arc<dyn PlanarMap>);
        let r = self.region;
        MapSpec {
            name: format!("{} (origin at {})", self.name, shift),
            region: Rect::new(r.x0 - shift.x, r.x1 - shift.x, r.y0 - shift.y, r.y1 - shift.y),
            forward,
            inverse,
            equivariance_tol: self.equivariance_tol,
            translation: Some(self.translation.unwrap_or(Point::ORIGIN) + shift),
        }
    }

    pub fn with_region(mut self, region: Rect) -> MapSpec {
        self.region = region;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IterateError {
    #[error("orbit escaped after {steps} steps, last finite iterate {last}")]
    Escaped { last: Point, steps: usize },
    #[error(transparent)]
    Map(MapError),
}

/// `f^n(p)`; negative `n` iterates the inverse.
pub fn iterate(m: &MapSpec, p: Point, n: i64) -> Result<Point, IterateError> {
    let map = if n >= 0 { m.forward.clone() } else { m.inverse_map() };
    let mut q = p;
    for k in 0..n.unsigned_abs() as usize {
        match map.eval(q) {
            Ok(r) if r.is_finite() => q = r,
            Ok(_) | Err(MapError::NonFinite(_)) => return Err(IterateError::Escaped { last: q, steps: k }),
            Err(e) => return Err(IterateError::Map(e)),
        }
    }
    Ok(q)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitParams {
    pub r_escape: f64,
    pub n_max: usize,
    pub tol_conv: f64,
}

impl Default for OrbitParams {
    fn default() -> Self {
        OrbitParams { r_escape: 1e6, n_max: 10_000, tol_conv: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrbitVerdict {
    ConvergesToFixed(Point),
    ConvergesToPeriod2(Point, Point),
    Escapes,
    Unresolved,
}

impl OrbitVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            OrbitVerdict::ConvergesToFixed(_) => "CONVERGES_TO_FIXED",
            OrbitVerdict::ConvergesToPeriod2(..) => "CONVERGES_TO_PERIOD2",
            OrbitVerdict::Escapes => "ESCAPES",
            OrbitVerdict::Unresolved => "UNRESOLVED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitClassification {
    pub verdict: OrbitVerdict,
    pub iterations_used: usize,
    pub final_point: Point,
}

/// Classify the forward orbit of `p` under `map`.
pub fn classify_orbit(
    map: &dyn PlanarMap,
    p: Point,
    known_fixed: &[Point],
    params: &OrbitParams,
) -> OrbitClassification {
    let done = |verdict, n, q| OrbitClassification { verdict, iterations_used: n, final_point: q };
    if !p.is_finite() || p.norm() > params.r_escape {
        return done(OrbitVerdict::Escapes, 0, p);
    }
    let tol = params.tol_conv;
    if let Some(q) = known_fixed.iter().find(|q| q.dist(p) < tol) {
        return done(OrbitVerdict::ConvergesToFixed(*q), 0, p);
    }
    // hist[0] is the newest iterate
    let mut hist = [p; 4];
    for n in 1..=params.n_max {
        let next = match map.eval(hist[0]) {
            Ok(q) => q,
            Err(MapError::NonFinite(_)) => return done(OrbitVerdict::Escapes, n, hist[0]),
            Err(_) => return done(OrbitVerdict::Unresolved, n, hist[0]),
        };
        if !next.is_finite() || next.norm() > params.r_escape {
            return done(OrbitVerdict::Escapes, n, if next.is_finite() { next } else { hist[0] });
        }
        hist = [next, hist[0], hist[1], hist[2]];
        if let Some(q) = known_fixed.iter().find(|q| q.dist(next) < tol) {
            return done(OrbitVerdict::ConvergesToFixed(*q), n, next);
        }
        let step = next.dist(hist[1]);
        if step < tol {
            return done(OrbitVerdict::ConvergesToFixed(next), n, next);
        }
        if n >= 3 && next.dist(hist[2]) < tol && hist[1].dist(hist[3]) < tol {
            let (a, b) = if (next.x, next.y) <= (hist[1].x, hist[1].y) { (next, hist[1]) } else { (hist[1], next) };
            return done(OrbitVerdict::ConvergesToPeriod2(a, b), n, next);
        }
    }
    done(OrbitVerdict::Unresolved, params.n_max, hist[0])
}

/// Forward limit of `p` under `m`.
pub fn classify_omega(m: &MapSpec, p: Point, known_fixed: &[Point], params: &OrbitParams) -> OrbitClassification {
    classify_orbit(m.forward.as_ref(), p, known_fixed, params)
}

/// Backward limit of `p`; without an inverse formula each step is a Newton
/// solve seeded at the current point, and a failed solve leaves the orbit
/// unresolved.
pub fn classify_alpha(m: &MapSpec, p: Point, known_fixed: &[Point], params: &OrbitParams) -> OrbitClassification {
    classify_orbit(m.inverse_map().as_ref(), p, known_fixed, params)
}

/// Relation between the forward limits of `p` under `f^2` and under `f`
/// for a homeomorphism fixing the origin.
#[derive(Debug, Clone, PartialEq)]
pub enum Omega2Agreement {
    /// `ω₂(p) = {0}` and `ω(p) = {0}`.
    BothOrigin,
    /// `ω₂(p) = ∞` and `ω(p) = ∞`.
    BothInfinite,
    /// `ω₂(p)` is neither `{0}` nor `∞`, so nothing is implied.
    NotApplicable(OrbitVerdict),
    /// The implication fails.
    Violated { under_f: OrbitVerdict, under_f2: OrbitVerdict },
}

/// Classify `p` under `f^2` and `f`, giving `f` twice the iterations so both
/// cover the same time span, and check that `ω₂` determines `ω`.
pub fn omega2_agreement(m: &MapSpec, p: Point, params: &OrbitParams) -> Omega2Agreement {
    let origin = [Point::ORIGIN];
    let at_origin = |v: &OrbitVerdict| matches!(v, OrbitVerdict::ConvergesToFixed(q) if q.norm() <= 10.0 * params.tol_conv);
    let w2 = classify_omega(&m.square(), p, &origin, params).verdict;
    let long = OrbitParams { n_max: 2 * params.n_max, ..*params };
    let w1 = classify_omega(m, p, &origin, &long).verdict;
    match (&w2, &w1) {
        (a, b) if at_origin(a) && at_origin(b) => Omega2Agreement::BothOrigin,
        (OrbitVerdict::Escapes, OrbitVerdict::Escapes) => Omega2Agreement::BothInfinite,
        (a, _) if at_origin(a) || *a == OrbitVerdict::Escapes => {
            Omega2Agreement::Violated { under_f: w1, under_f2: w2 }
        }
        _ => Omega2Agreement::NotApplicable(w2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear() -> MapSpec {
        MapSpec::parse("linear", Rect::square(3.0), "2*x", "y/2")
    }

    fn pd2() -> MapSpec {
        MapSpec::parse("pd2", Rect::square(10.0), "2*x*(1+y^2)", "y/3")
    }

    fn twisted() -> MapSpec {
        MapSpec::parse("twisted", Rect::square(3.0), "-0.5*x^3 + (0.5-1)*x", "-2*y")
    }

    #[test]
    fn iterate_examples() {
        assert_eq!(iterate(&linear(), Point::new(1.0, 1.0), 3).unwrap(), Point::new(8.0, 0.125));
        assert_eq!(iterate(&pd2(), Point::new(1.0, 0.0), 4).unwrap(), Point::new(16.0, 0.0));
        assert_eq!(iterate(&twisted(), Point::new(1.0, 0.0), 2).unwrap(), Point::new(1.0, 0.0));
    }

    #[test]
    fn iterate_reports_escape_with_last_finite_point() {
        let m = MapSpec::parse("sq", Rect::square(1.0), "x^2", "y");
        match iterate(&m, Point::new(10.0, 0.0), 20) {
            Err(IterateError::Escaped { last, .. }) => assert!(last.is_finite() && last.x > 1e100),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_iterates_use_newton_inverse() {
        let q = iterate(&linear(), Point::new(8.0, 0.125), -3).unwrap();
        assert!(q.dist(Point::new(1.0, 1.0)) < 1e-12);
    }

    #[test]
    fn square_examples() {
        let phi = "x*(1+atan(x)^2)/(4+pi^2)";
        let m = MapSpec::parse("phi", Rect::square(3.0), phi, "-2*y");
        let sq = m.square();
        let p = Point::new(0.7, 0.3);
        let e = Expression::parse(phi).unwrap();
        let once = e.eval_x(0.7).unwrap();
        let want = Point::new(e.eval_x(once).unwrap(), 4.0 * 0.3);
        assert_eq!(sq.eval(p).unwrap(), want);
        assert_eq!(pd2().square().eval(Point::new(1.0, 0.0)).unwrap(), Point::new(4.0, 0.0));
        // y/9 from composition, not the printed y^2/9
        let r = pd2().square().eval(Point::new(0.0, 3.0)).unwrap();
        assert!((r.y - 1.0 / 3.0).abs() < 1e-15);
        let id = MapSpec::parse("id", Rect::square(1.0), "x", "y");
        assert_eq!(id.square().eval(p).unwrap(), p);
    }

    #[test]
    fn square_jacobian_is_chain_rule() {
        let m = pd2();
        let p = Point::new(0.3, -0.4);
        let (q, a) = m.eval_with_jacobian(p).unwrap();
        let b = m.jacobian(q).unwrap();
        let c = m.square().jacobian(p).unwrap();
        assert_eq!(c, b.matmul(&a));
    }

    #[test]
    fn inverse_formula_is_checked_at_load() {
        let parse = |s: &str| Expression::parse(s).unwrap();
        let good = MapSpec::from_formulas(
            "pd2",
            Rect::square(10.0),
            parse("2*x*(1+y^2)"),
            parse("y/3"),
            Some((parse("x/(2*(1+9*y^2))"), parse("3*y"))),
        );
        assert!(good.is_ok());
        let bad = MapSpec::from_formulas(
            "pd2",
            Rect::square(10.0),
            parse("2*x*(1+y^2)"),
            parse("y/3"),
            Some((parse("x/2"), parse("3*y"))),
        );
        assert!(matches!(bad, Err(LoadError::InverseMismatch { .. })));
    }

    #[test]
    fn omega_examples() {
        let params = OrbitParams::default();
        let o = Point::ORIGIN;
        let c = classify_omega(&pd2(), Point::new(0.0, 1.0), &[o], &params);
        assert_eq!(c.verdict, OrbitVerdict::ConvergesToFixed(o));
        assert!(c.final_point.dist(o) < params.tol_conv);
        let c = classify_omega(&pd2(), Point::new(1.0, 1.0), &[o], &params);
        assert_eq!(c.verdict, OrbitVerdict::Escapes);
        assert!(c.final_point.norm() > params.r_escape);
        let c = classify_omega(&twisted(), Point::new(0.5, 0.0), &[o], &params);
        assert_eq!(c.verdict, OrbitVerdict::ConvergesToFixed(o));
    }

    #[test]
    fn omega_on_twisted_axis_matches_scalar_iteration() {
        // oracle: iterate the cubic directly
        let mut x = 0.5f64;
        for _ in 0..10_000 {
            x = -0.5 * x * x * x - 0.5 * x;
        }
        assert!(x.abs() < 1e-300);
    }

    #[test]
    fn alpha_examples() {
        let params = OrbitParams::default();
        let o = Point::ORIGIN;
        let c = classify_alpha(&pd2(), Point::new(1.0, 0.0), &[o], &params);
        assert_eq!(c.verdict, OrbitVerdict::ConvergesToFixed(o));
        let c = classify_alpha(&linear(), Point::new(0.0, 1.0), &[o], &params);
        assert_eq!(c.verdict, OrbitVerdict::Escapes);
        let c = classify_alpha(&twisted(), o, &[o], &params);
        assert_eq!(c.verdict, OrbitVerdict::ConvergesToFixed(o));
    }

    #[test]
    fn twisted_backward_orbit_near_period_two_point() {
        let params = OrbitParams::default();
        let c = classify_alpha(&twisted(), Point::new(0.999, 0.001), &[Point::ORIGIN], &params);
        match c.verdict {
            OrbitVerdict::ConvergesToPeriod2(a, b) => {
                assert!(a.dist(Point::new(-1.0, 0.0)) < 1e-8);
                assert!(b.dist(Point::new(1.0, 0.0)) < 1e-8);
            }
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn translation_moves_fixed_point_to_origin() {
        let m = MapSpec::parse("shifted", Rect::square(5.0), "2*(x-1)+1", "(y-2)/2+2");
        let t = m.translated(Point::new(1.0, 2.0));
        assert_eq!(t.eval(Point::ORIGIN).unwrap(), Point::ORIGIN);
        assert_eq!(t.translation, Some(Point::new(1.0, 2.0)));
    }
}
