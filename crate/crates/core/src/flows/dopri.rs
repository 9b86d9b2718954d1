//! Dormand–Prince 5(4) with adaptive steps, on fixed-size state arrays.

use thiserror::Error;

use crate::dynamics::MapError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub atol: f64,
    pub rtol: f64,
}

pub const DEFAULT_TOL: Tolerances = Tolerances { atol: 1e-12, rtol: 1e-10 };

/// Guard on the state norm; larger states count as escaped.
pub const OVERFLOW_GUARD: f64 = 1e12;
pub const MAX_STEPS: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("solution escaped (|state| = {norm:e}) at t = {t}")]
    Escaped { t: f64, norm: f64 },
    #[error("step limit reached at t = {t}")]
    TooManySteps { t: f64 },
    #[error(transparent)]
    Field(#[from] MapError),
}

impl From<IntegrationError> for MapError {
    fn from(e: IntegrationError) -> MapError {
        match e {
            IntegrationError::Field(m) => m,
            other => MapError::Integration(other.to_string()),
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn norm<const N: usize>(y: &[f64; N]) -> f64 {
    y.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Integrate `y' = rhs(t, y)` from `t0` to `t1`; `t1 < t0` runs backwards.
pub fn integrate<const N: usize, F>(
    rhs: F,
    t0: f64,
    t1: f64,
    y0: [f64; N],
    tol: Tolerances,
) -> Result<[f64; N], IntegrationError>
where
    F: Fn(f64, &[f64; N]) -> Result<[f64; N], MapError>,
{
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(y0);
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0;
    let mut k0 = rhs(t, &y)?;
    // initial step from the size of the derivative
    let sc0: f64 = (0..N).map(|i| (y[i] / (tol.atol + tol.rtol * y[i].abs())).powi(2)).sum::<f64>() / N as f64;
    let sc1: f64 = (0..N).map(|i| (k0[i] / (tol.atol + tol.rtol * y[i].abs())).powi(2)).sum::<f64>() / N as f64;
    let mut h = if sc0 < 1e-10 || sc1 < 1e-10 { 1e-6 } else { 0.01 * (sc0 / sc1).sqrt() };
    h = h.min(span.abs()) * dir;
    let mut k = [[0.0; N]; 7];
    for _ in 0..MAX_STEPS {
        let remaining = t1 - t;
        if remaining * dir <= 0.0 {
            return Ok(y);
        }
        let last = (h.abs() >= remaining.abs()) || (remaining - h).abs() <= 1e-14 * t1.abs().max(1.0);
        if last {
            h = remaining;
        }
        if h.abs() <= 1e-14 * t.abs().max(1.0) {
            return Err(IntegrationError::StepUnderflow { t });
        }
        k[0] = k0;
        for s in 1..7 {
            let mut ys = y;
            for (i, v) in ys.iter_mut().enumerate() {
                let mut acc = 0.0;
                for j in 0..s {
                    acc += A[s][j] * k[j][i];
                }
                *v += h * acc;
            }
            k[s] = rhs(t + C[s] * h, &ys)?;
        }
        let mut y_new = y;
        for (i, v) in y_new.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..6 {
                acc += A[6][j] * k[j][i];
            }
            *v += h * acc;
        }
        let mut err = 0.0;
        for i in 0..N {
            let mut e = 0.0;
            for j in 0..7 {
                e += E[j] * k[j][i];
            }
            let sc = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
            err += (h * e / sc).powi(2);
        }
        let err = (err / N as f64).sqrt();
        if !err.is_finite() {
            h *= 0.2;
            continue;
        }
        let fac = if err == 0.0 { 10.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 10.0) };
        if err <= 1.0 {
            t = if last { t1 } else { t + h };
            y = y_new;
            k0 = k[6];
            let n = norm(&y);
            if !(n <= OVERFLOW_GUARD) {
                return Err(IntegrationError::Escaped { t, norm: n });
            }
            h *= fac;
        } else {
            h *= fac.min(1.0);
        }
    }
    Err(IntegrationError::TooManySteps { t })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_and_growth() {
        let (a, b) = (2f64.ln(), 3f64.ln());
        let y = integrate(|_, y: &[f64; 2]| Ok([a * y[0], -b * y[1]]), 0.0, 1.0, [1.0, 1.0], DEFAULT_TOL).unwrap();
        assert!((y[0] - 2.0).abs() < 1e-9 && (y[1] - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn harmonic_oscillator_round_trip() {
        let f = |_: f64, y: &[f64; 2]| Ok([y[1], -y[0]]);
        let fwd = integrate(f, 0.0, 10.0, [1.0, 0.0], DEFAULT_TOL).unwrap();
        assert!((fwd[0] - 10f64.cos()).abs() < 1e-8);
        let back = integrate(f, 10.0, 0.0, fwd, DEFAULT_TOL).unwrap();
        assert!((back[0] - 1.0).abs() < 1e-8 && back[1].abs() < 1e-8);
    }

    #[test]
    fn blow_up_is_reported() {
        let r = integrate(|_, y: &[f64; 1]| Ok([y[0] * y[0]]), 0.0, 2.0, [1.0], DEFAULT_TOL);
        assert!(matches!(r, Err(IntegrationError::Escaped { .. } | IntegrationError::StepUnderflow { .. })));
    }
}
