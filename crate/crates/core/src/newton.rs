//! Damped Newton iteration for planar systems `G(q) = 0`.

use crate::dynamics::MapError;
use crate::geom::{Mat2, Point};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_steps: usize,
    /// Converged once `|G| <= abs_tol * (1 + |q|)`.
    pub abs_tol: f64,
    /// Iterates farther than this from the origin are abandoned.
    pub escape_radius: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { max_steps: 50, abs_tol: 1e-13, escape_radius: 1e12 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NewtonFailure {
    Singular(Point),
    NotConverged { last: Point, residual: f64 },
    Escaped(Point),
    Map(MapError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSolution {
    pub point: Point,
    pub residual: f64,
    pub steps: usize,
}

/// Solve `G(q) = 0` from `seed`, where `g` returns `G(q)` and `DG(q)`.
///
/// The step is damped by Armijo backtracking on `|G|`. When backtracking
/// cannot decrease the residual the full step is taken anyway, which lets
/// the iteration leave shallow basins.
pub fn solve<F>(g: F, seed: Point, opts: &NewtonOptions) -> Result<NewtonSolution, NewtonFailure>
where
    F: Fn(Point) -> Result<(Point, Mat2), MapError>,
{
    let mut q = seed;
    let (mut val, mut jac) = g(q).map_err(NewtonFailure::Map)?;
    let mut res = val.norm();
    for step in 0..=opts.max_steps {
        if res <= opts.abs_tol * (1.0 + q.norm()) {
            return Ok(NewtonSolution { point: q, residual: res, steps: step });
        }
        if step == opts.max_steps {
            break;
        }
        let delta = match jac.solve(-val) {
            Some(d) if d.is_finite() => d,
            _ => return Err(NewtonFailure::Singular(q)),
        };
        let mut t = 1.0;
        let mut accepted = None;
        let mut fallback = None;
        while t >= 1.0 / 1024.0 {
            let trial = q + delta * t;
            if let Ok((v, j)) = g(trial) {
                let r = v.norm();
                if r.is_finite() && r <= (1.0 - 1e-4 * t) * res {
                    accepted = Some((trial, v, j, r));
                    break;
                }
                if fallback.is_none() && r.is_finite() {
                    fallback = Some((trial, v, j, r));
                }
            }
            t *= 0.5;
        }
        let Some((nq, nv, nj, nr)) = accepted.or(fallback) else {
            return Err(NewtonFailure::NotConverged { last: q, residual: res });
        };
        if !nq.is_finite() || nq.norm() > opts.escape_radius {
            return Err(NewtonFailure::Escaped(nq));
        }
        // a vanishing step with a stuck residual means we are at the
        // attainable precision
        let stalled = (nq - q).norm() <= 1e-16 * (1.0 + q.norm());
        q = nq;
        val = nv;
        jac = nj;
        res = nr;
        if stalled {
            break;
        }
    }
    if res <= 1e3 * opts.abs_tol * (1.0 + q.norm()) {
        return Ok(NewtonSolution { point: q, residual: res, steps: opts.max_steps });
    }
    Err(NewtonFailure::NotConverged { last: q, residual: res })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_root_of_nonlinear_system() {
        // x^2 + y^2 = 4, x = y
        let g = |p: Point| {
            Ok((
                Point::new(p.x * p.x + p.y * p.y - 4.0, p.x - p.y),
                Mat2::new(2.0 * p.x, 2.0 * p.y, 1.0, -1.0),
            ))
        };
        let sol = solve(g, Point::new(1.0, 0.5), &NewtonOptions::default()).unwrap();
        let r = 2f64.sqrt();
        assert!((sol.point.x - r).abs() < 1e-12 && (sol.point.y - r).abs() < 1e-12);
    }

    #[test]
    fn singular_jacobian_is_reported() {
        let g = |p: Point| Ok((Point::new(p.x * p.x + 1.0, 0.0), Mat2::new(2.0 * p.x, 0.0, 0.0, 0.0)));
        assert!(matches!(
            solve(g, Point::new(1.0, 1.0), &NewtonOptions::default()),
            Err(NewtonFailure::Singular(_))
        ));
    }
}
