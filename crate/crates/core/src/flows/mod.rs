//! Periodically forced planar ODEs, their time-T maps, and monodromy.

pub mod dopri;
pub mod lienard;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::dynamics::{MapError, MapSpec, PlanarMap};
use crate::expr::Expression;
use crate::fixed_points::{classify_jacobian, FixedPointRecord};
use crate::geom::{Mat2, Point, Rect};
use crate::newton::{self, NewtonFailure, NewtonOptions};

pub use dopri::{IntegrationError, Tolerances, DEFAULT_TOL};
pub use lienard::{build_lienard, AssumptionStatus, LienardSpec};

/// Tolerances for variational integrations, where the monodromy entries
/// must be accurate relative to its determinant rather than to its norm.
pub const MONODROMY_TOL: Tolerances = Tolerances { atol: 1e-14, rtol: 1e-13 };

/// Equivariance tolerance attached to time-T maps.
pub const TIME_T_EQUIV_TOL: f64 = 1e-8;

/// A non-autonomous planar vector field `X(t, p)`.
pub trait VectorField: Send + Sync {
    fn eval(&self, t: f64, p: Point) -> Result<Point, MapError>;

    /// Value and spatial Jacobian.
    fn eval_with_jacobian(&self, t: f64, p: Point) -> Result<(Point, Mat2), MapError>;
}

/// `(X1(x, y, t), X2(x, y, t))`.
#[derive(Debug, Clone)]
pub struct ExprField {
    pub x1: Expression,
    pub x2: Expression,
}

impl VectorField for ExprField {
    fn eval(&self, t: f64, p: Point) -> Result<Point, MapError> {
        Ok(Point::new(self.x1.eval(p.x, p.y, t)?, self.x2.eval(p.x, p.y, t)?))
    }

    fn eval_with_jacobian(&self, t: f64, p: Point) -> Result<(Point, Mat2), MapError> {
        let a = self.x1.eval_dual(p.x, p.y, t)?;
        let b = self.x2.eval_dual(p.x, p.y, t)?;
        Ok((Point::new(a.value, b.value), Mat2::new(a.dx, a.dy, b.dx, b.dy)))
    }
}

#[derive(Clone)]
pub struct PeriodicSystem {
    pub name: String,
    pub field: Arc<dyn VectorField>,
    pub period: f64,
}

impl fmt::Debug for PeriodicSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicSystem").field("name", &self.name).field("period", &self.period).finish()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error("period must be positive and finite, got {0}")]
    BadPeriod(f64),
    #[error("field is not finite at {point}, t = {t}")]
    NotFinite { point: Point, t: f64 },
    #[error("field evaluation failed at {point}, t = {t}: {source}")]
    Eval { point: Point, t: f64, source: MapError },
}

impl PeriodicSystem {
    pub fn new(name: impl Into<String>, field: Arc<dyn VectorField>, period: f64) -> Result<Self, SystemError> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(SystemError::BadPeriod(period));
        }
        Ok(PeriodicSystem { name: name.into(), field, period })
    }

    pub fn from_expressions(name: &str, x1: Expression, x2: Expression, period: f64) -> Result<Self, SystemError> {
        PeriodicSystem::new(name, Arc::new(ExprField { x1, x2 }), period)
    }

    /// Check that the field is finite on `region × [0, T]` at grid samples.
    pub fn check_finite(&self, region: Rect, per_axis: usize) -> Result<(), SystemError> {
        for p in region.grid(per_axis, per_axis) {
            for k in 0..per_axis {
                let t = self.period * k as f64 / per_axis as f64;
                match self.field.eval(t, p) {
                    Ok(v) if v.is_finite() => {}
                    Ok(_) => return Err(SystemError::NotFinite { point: p, t }),
                    Err(source) => return Err(SystemError::Eval { point: p, t, source }),
                }
            }
        }
        Ok(())
    }

    fn rhs2(&self, t: f64, y: &[f64; 2]) -> Result<[f64; 2], MapError> {
        let v = self.field.eval(t, Point::new(y[0], y[1]))?;
        Ok([v.x, v.y])
    }

    /// State followed by the variational matrix, stored column by column.
    fn rhs6(&self, t: f64, y: &[f64; 6]) -> Result<[f64; 6], MapError> {
        let (v, a) = self.field.eval_with_jacobian(t, Point::new(y[0], y[1]))?;
        let c1 = a.apply(Point::new(y[2], y[3]));
        let c2 = a.apply(Point::new(y[4], y[5]));
        Ok([v.x, v.y, c1.x, c1.y, c2.x, c2.y])
    }

    /// As `rhs6`, plus the integrals of the divergence and of the real
    /// parts of the eigenvalues of `DX`.
    fn rhs9(&self, t: f64, y: &[f64; 9]) -> Result<[f64; 9], MapError> {
        let (v, a) = self.field.eval_with_jacobian(t, Point::new(y[0], y[1]))?;
        let c1 = a.apply(Point::new(y[2], y[3]));
        let c2 = a.apply(Point::new(y[4], y[5]));
        let ev = a.eigenvalues();
        let (hi, lo) = if ev[0].re >= ev[1].re { (ev[0].re, ev[1].re) } else { (ev[1].re, ev[0].re) };
        Ok([v.x, v.y, c1.x, c1.y, c2.x, c2.y, a.trace(), hi, lo])
    }
}

/// Solution at `t1` of the solution starting at `q` at time `t0`.
pub fn integrate(s: &PeriodicSystem, q: Point, t0: f64, t1: f64) -> Result<Point, IntegrationError> {
    integrate_with(s, q, t0, t1, DEFAULT_TOL)
}

pub fn integrate_with(
    s: &PeriodicSystem,
    q: Point,
    t0: f64,
    t1: f64,
    tol: Tolerances,
) -> Result<Point, IntegrationError> {
    let y = dopri::integrate(|t, y| s.rhs2(t, y), t0, t1, [q.x, q.y], tol)?;
    Ok(Point::new(y[0], y[1]))
}

/// Solution and derivative with respect to the initial condition.
pub fn integrate_variational(
    s: &PeriodicSystem,
    q: Point,
    t0: f64,
    t1: f64,
    tol: Tolerances,
) -> Result<(Point, Mat2), IntegrationError> {
    let y = dopri::integrate(|t, y| s.rhs6(t, y), t0, t1, [q.x, q.y, 1.0, 0.0, 0.0, 1.0], tol)?;
    Ok((Point::new(y[0], y[1]), Mat2::new(y[2], y[4], y[3], y[5])))
}

/// The time-`T` map `q -> u(T; 0, q)` of a periodic system.
#[derive(Debug, Clone)]
pub struct PoincareMap {
    pub system: PeriodicSystem,
    pub tol: Tolerances,
}

impl PlanarMap for PoincareMap {
    fn eval(&self, p: Point) -> Result<Point, MapError> {
        Ok(integrate_with(&self.system, p, 0.0, self.system.period, self.tol)?)
    }

    fn eval_with_jacobian(&self, p: Point) -> Result<(Point, Mat2), MapError> {
        Ok(integrate_variational(&self.system, p, 0.0, self.system.period, self.tol)?)
    }

    /// Backward integration from `T` to `0`.
    fn preimage(&self, p: Point, _seed: Point) -> Result<Point, MapError> {
        Ok(integrate_with(&self.system, p, self.system.period, 0.0, self.tol)?)
    }
}

/// The time-T map as a `MapSpec`. Its inverse is backward integration, so
/// no inverse formula is attached and no load-time inverse check runs.
pub fn time_t_map(s: &PeriodicSystem, region: Rect) -> MapSpec {
    let map = PoincareMap { system: s.clone(), tol: DEFAULT_TOL };
    let mut spec = MapSpec::new(format!("P[{}]", s.name), region, Arc::new(map), None)
        .expect("region validated by caller");
    spec.equivariance_tol = Some(TIME_T_EQUIV_TOL);
    spec
}

pub const CLOSURE_TOL: f64 = 1e-8;
pub const LIOUVILLE_TOL: f64 = 1e-6;
pub const LAMBDA_SAMPLES: usize = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonodromyError {
    #[error("orbit start is not periodic: |P(q) - q| = {0:e}")]
    NotPeriodic(f64),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonodromyResult {
    pub orbit_start: Point,
    pub closure_residual: f64,
    pub matrix: Mat2,
    /// Largest modulus first.
    pub multipliers: [Complex64; 2],
    pub det: f64,
    /// `exp` of the divergence integrated along the orbit.
    pub liouville_det: f64,
    pub det_rel_error: f64,
    /// `exp ∫ Re λ±(s) ds` for the eigenvalues of the linearised field;
    /// equal to the multipliers only when `DX` has constant eigenvectors.
    pub eigenvalue_integral_multipliers: [f64; 2],
    /// `(t, λ+, λ-)` along the orbit; `None` where `DX` has complex eigenvalues.
    pub lambda_samples: Vec<(f64, Option<(f64, f64)>)>,
}

impl MonodromyResult {
    pub fn liouville_ok(&self) -> bool {
        self.det_rel_error <= LIOUVILLE_TOL
    }

    /// `λ+(s) > 0 > λ-(s)` at every sample.
    pub fn lambda_signs_split(&self) -> bool {
        self.lambda_samples.iter().all(|(_, l)| matches!(l, Some((hi, lo)) if *hi > 0.0 && *lo < 0.0))
    }
}

/// Monodromy along the periodic orbit through `orbit_start`.
pub fn monodromy(s: &PeriodicSystem, orbit_start: Point) -> Result<MonodromyResult, MonodromyError> {
    let closure = integrate_with(s, orbit_start, 0.0, s.period, MONODROMY_TOL)?.dist(orbit_start);
    if !(closure <= CLOSURE_TOL) {
        return Err(MonodromyError::NotPeriodic(closure));
    }
    let mut y = [orbit_start.x, orbit_start.y, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
    let mut samples = Vec::with_capacity(LAMBDA_SAMPLES + 1);
    let dt = s.period / LAMBDA_SAMPLES as f64;
    for k in 0..=LAMBDA_SAMPLES {
        let t = k as f64 * dt;
        let a = s.field.eval_with_jacobian(t, Point::new(y[0], y[1])).map_err(IntegrationError::Field)?.1;
        let ev = a.eigenvalues();
        let lam = (ev[0].im == 0.0).then(|| (ev[0].re.max(ev[1].re), ev[0].re.min(ev[1].re)));
        samples.push((t, lam));
        if k < LAMBDA_SAMPLES {
            let t1 = if k + 1 == LAMBDA_SAMPLES { s.period } else { t + dt };
            y = dopri::integrate(|t, y| s.rhs9(t, y), t, t1, y, MONODROMY_TOL)?;
        }
    }
    let matrix = Mat2::new(y[2], y[4], y[3], y[5]);
    let det = matrix.det();
    let liouville_det = y[6].exp();
    Ok(MonodromyResult {
        orbit_start,
        closure_residual: closure,
        matrix,
        multipliers: matrix.eigenvalues(),
        det,
        liouville_det,
        det_rel_error: (det - liouville_det).abs() / det.abs(),
        eigenvalue_integral_multipliers: [y[7].exp(), y[8].exp()],
        lambda_samples: samples,
    })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PeriodicOrbitError {
    #[error("Newton did not converge from {seed}: {detail}")]
    NoConvergence { seed: Point, detail: String },
    #[error(transparent)]
    Map(#[from] MapError),
}

/// Fixed point of the time-T map near `seed`, classified.
pub fn find_periodic_orbit(s: &PeriodicSystem, seed: Point) -> Result<FixedPointRecord, PeriodicOrbitError> {
    let map = PoincareMap { system: s.clone(), tol: MONODROMY_TOL };
    let opts = NewtonOptions { max_steps: 50, abs_tol: 1e-12, escape_radius: 1e8 };
    let sol = newton::solve(
        |q| {
            let (v, j) = map.eval_with_jacobian(q)?;
            Ok((v - q, j.sub(&Mat2::IDENTITY)))
        },
        seed,
        &opts,
    )
    .map_err(|e| match e {
        NewtonFailure::Map(m) => PeriodicOrbitError::Map(m),
        other => PeriodicOrbitError::NoConvergence { seed, detail: format!("{other:?}") },
    })?;
    let (v, j) = map.eval_with_jacobian(sol.point)?;
    Ok(classify_jacobian(sol.point, 1, j, v.dist(sol.point)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed_points::SaddleKind;

    fn system(x1: &str, x2: &str, period: f64) -> PeriodicSystem {
        PeriodicSystem::from_expressions("s", Expression::parse(x1).unwrap(), Expression::parse(x2).unwrap(), period)
            .unwrap()
    }

    #[test]
    fn linear_diagonal_flow() {
        let s = system("ln(2)*x", "-ln(3)*y", 1.0);
        let q = integrate(&s, Point::new(1.0, 1.0), 0.0, 1.0).unwrap();
        assert!(q.dist(Point::new(2.0, 1.0 / 3.0)) < 1e-9);
        let m = time_t_map(&s, Rect::square(2.0));
        let j = m.jacobian(Point::new(0.3, -0.2)).unwrap();
        assert!((j.a - 2.0).abs() < 1e-9 && (j.d - 1.0 / 3.0).abs() < 1e-9);
        assert!(j.b.abs() < 1e-12 && j.c.abs() < 1e-12);
        let r = find_periodic_orbit(&s, Point::new(0.7, -0.4)).unwrap();
        assert!(r.location.norm() < 1e-10);
        assert_eq!(r.saddle_kind, SaddleKind::Direct);
        let md = monodromy(&s, Point::ORIGIN).unwrap();
        assert!((md.multipliers[0].re - 2.0).abs() < 1e-10);
        assert!((md.multipliers[1].re - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn forced_linear_flow_matches_closed_form() {
        // x'' + x' - x = sin t; solution = homogeneous + (-2 sin t - cos t)/5
        let s = system("y - x", "x + sin(t)", 2.0 * std::f64::consts::PI);
        let t = 2.0 * std::f64::consts::PI;
        let q = integrate(&s, Point::ORIGIN, 0.0, t).unwrap();
        let (r1, r2) = ((-1.0 + 5f64.sqrt()) / 2.0, (-1.0 - 5f64.sqrt()) / 2.0);
        // x(0) = 0, x'(0) = y(0) - x(0) = 0 fixes the homogeneous part
        let (xp0, dxp0) = (-0.2, -0.4);
        let c2 = ((0.0 - xp0) * r1 - (0.0 - dxp0)) / (r1 - r2);
        let c1 = (0.0 - xp0) - c2;
        let x = |t: f64| c1 * (r1 * t).exp() + c2 * (r2 * t).exp() + (-2.0 * t.sin() - t.cos()) / 5.0;
        let dx = |t: f64| c1 * r1 * (r1 * t).exp() + c2 * r2 * (r2 * t).exp() + (-2.0 * t.cos() + t.sin()) / 5.0;
        let want = Point::new(x(t), dx(t) + x(t));
        assert!(q.dist(want) < 1e-8 * (1.0 + want.norm()), "{q} vs {want}");
        // backwards, the contracting direction expands by e^{2π(1+√5)/2},
        // so the round trip needs the tight tolerances
        let fwd = integrate_with(&s, Point::ORIGIN, 0.0, t, MONODROMY_TOL).unwrap();
        let back = integrate_with(&s, fwd, t, 0.0, MONODROMY_TOL).unwrap();
        assert!(back.norm() < 1e-8, "{back}");
    }

    #[test]
    fn time_t_map_inverse_is_backward_flow() {
        let s = system("x - x^3", "-y + y^3", 0.5);
        let m = time_t_map(&s, Rect::square(0.9));
        let p = Point::new(0.4, -0.3);
        let q = m.eval(p).unwrap();
        assert!(m.preimage(q, Point::ORIGIN).unwrap().dist(p) < 1e-9);
        assert_eq!(m.equivariance_tol, Some(TIME_T_EQUIV_TOL));
    }

    #[test]
    fn monodromy_rejects_non_periodic_start() {
        let s = system("x", "-y", 1.0);
        assert!(matches!(monodromy(&s, Point::new(1.0, 0.0)), Err(MonodromyError::NotPeriodic(_))));
    }

    #[test]
    fn lienard_orbit_and_multipliers() {
        let e = |s: &str| Expression::parse(s).unwrap();
        let tau = 2.0 * std::f64::consts::PI;
        let (spec, sys) = build_lienard(e("1"), e("-x"), e("sin(t)"), tau).unwrap();
        let rec = find_periodic_orbit(&sys, spec.orbit_seed()).unwrap();
        assert!(rec.location.dist(Point::new(-0.2, -0.6)) < 1e-9, "{}", rec.location);
        assert_eq!(rec.saddle_kind, SaddleKind::Direct);
        let md = monodromy(&sys, rec.location).unwrap();
        let r5 = 5f64.sqrt();
        let want = [(tau * (-1.0 + r5) / 2.0).exp(), (tau * (-1.0 - r5) / 2.0).exp()];
        for (got, w) in md.multipliers.iter().zip(want) {
            assert!((got.re - w).abs() / w < 1e-6, "{got} vs {w}");
        }
        assert!(md.liouville_ok() && md.det > 0.0 && md.det <= 1.0);
        assert!(((md.det - (-tau).exp()) / md.det).abs() < 1e-8);
        assert!(md.lambda_signs_split());
        for (got, w) in md.eigenvalue_integral_multipliers.iter().zip(want) {
            assert!((got - w).abs() / w < 1e-8);
        }
    }
}
