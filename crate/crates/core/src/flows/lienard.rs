//! Forced Liénard equations `x'' + f(x) x' + g(x) = p(t)` written as the
//! first-order system `x' = y - F(x)`, `y' = -g(x) + p(t)`.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use thiserror::Error;

use crate::dynamics::MapError;
use crate::expr::{Expression, Var};
use crate::geom::{Mat2, Point};

use super::{PeriodicSystem, SystemError, VectorField};

pub const QUAD_TOL: f64 = 1e-10;
/// Width of the cells on which `F` is cached.
pub const QUAD_CELL: f64 = 0.125;
pub const PERIOD_TOL: f64 = 1e-9;

const GL_NODES: [f64; 4] = [0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363];
const GL_WEIGHTS: [f64; 4] = [0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763];

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
}

#[allow(clippy::too_many_arguments)]
fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64, m: f64, fm: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let (lm, flm, left) = simpson(f, a, fa, m, fm);
    let (rm, frm, right) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
        + adaptive(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    adaptive(f, a, fa, b, fb, m, fm, whole, tol, 40)
}

fn gauss_legendre(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    GL_NODES.iter().zip(GL_WEIGHTS).map(|(x, w)| w * (f(c - h * x) + f(c + h * x))).sum::<f64>() * h
}

/// `F(x) = ∫_0^x f`. Values at the cell boundaries `k * QUAD_CELL` are
/// accumulated cell by cell from 0 and cached; inside a cell a Gauss rule
/// is blended so that `F` is continuous at the boundaries.
pub struct Antiderivative {
    f: Expression,
    nodes: RwLock<HashMap<i64, f64>>,
}

impl std::fmt::Debug for Antiderivative {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Antiderivative({})", self.f.source())
    }
}

impl Antiderivative {
    pub fn new(f: Expression) -> Self {
        let mut nodes = HashMap::new();
        nodes.insert(0, 0.0);
        Antiderivative { f, nodes: RwLock::new(nodes) }
    }

    fn integrand(&self) -> impl Fn(f64) -> f64 + '_ {
        |x| self.f.eval_x(x).unwrap_or(f64::NAN)
    }

    fn cell(&self, k: i64) -> f64 {
        let (a, b) = (k as f64 * QUAD_CELL, (k + 1) as f64 * QUAD_CELL);
        adaptive_simpson(&self.integrand(), a, b, QUAD_TOL)
    }

    fn node(&self, k: i64) -> f64 {
        if let Some(v) = self.nodes.read().unwrap().get(&k) {
            return *v;
        }
        let mut nodes = self.nodes.write().unwrap();
        let step = k.signum();
        let mut j = k;
        while !nodes.contains_key(&j) {
            j -= step;
        }
        let mut acc = nodes[&j];
        while j != k {
            acc += if step > 0 { self.cell(j) } else { -self.cell(j - 1) };
            j += step;
            nodes.insert(j, acc);
        }
        acc
    }

    pub fn value(&self, x: f64) -> Result<f64, MapError> {
        if !x.is_finite() {
            return Err(MapError::NonFinite(Point::new(x, 0.0)));
        }
        let k = (x / QUAD_CELL).floor() as i64;
        let base = self.node(k);
        let a = k as f64 * QUAD_CELL;
        if x == a {
            return Ok(base);
        }
        let g = self.integrand();
        let full_gl = gauss_legendre(&g, a, a + QUAD_CELL);
        let exact = self.node(k + 1) - base;
        let s = (x - a) / QUAD_CELL;
        let v = base + gauss_legendre(&g, a, x) + s * (exact - full_gl);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(MapError::NonFinite(Point::new(x, 0.0)))
        }
    }
}

pub struct LienardField {
    pub f: Expression,
    pub g: Expression,
    pub p: Expression,
    pub antiderivative: Arc<Antiderivative>,
}

impl VectorField for LienardField {
    fn eval(&self, t: f64, q: Point) -> Result<Point, MapError> {
        let big_f = self.antiderivative.value(q.x)?;
        Ok(Point::new(q.y - big_f, -self.g.eval_x(q.x)? + self.p.eval_t(t)?))
    }

    fn eval_with_jacobian(&self, t: f64, q: Point) -> Result<(Point, Mat2), MapError> {
        let v = self.eval(t, q)?;
        let fx = self.f.eval_x(q.x)?;
        let dg = self.g.eval_dual(q.x, 0.0, 0.0)?.dx;
        Ok((v, Mat2::new(-fx, 1.0, -dg, 0.0)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AssumptionStatus {
    VerifiedOnSamples,
    /// The sampled values that break the assumption.
    Refuted { witness: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub id: &'static str,
    pub status: AssumptionStatus,
    pub detail: String,
}

impl AssumptionCheck {
    pub fn holds(&self) -> bool {
        self.status == AssumptionStatus::VerifiedOnSamples
    }
}

#[derive(Debug)]
pub struct LienardSpec {
    pub f: Expression,
    pub g: Expression,
    pub p: Expression,
    pub period: f64,
    pub antiderivative: Arc<Antiderivative>,
    pub assumptions: Vec<AssumptionCheck>,
    /// `min p` and `max p` over sampled times.
    pub p_min: f64,
    pub p_max: f64,
    /// `g^-1(max p)` and `g^-1(min p)`.
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    /// Linear growth bound `|g(x)| <= c + d|x|` fitted on samples.
    pub growth_c: f64,
    pub growth_d: f64,
    /// Half-width of the sampled range of `x`.
    pub check_range: f64,
}

impl LienardSpec {
    pub fn assumptions_hold(&self) -> bool {
        self.assumptions.iter().all(AssumptionCheck::holds)
    }

    /// A starting point for the periodic-orbit search between the
    /// sub- and supersolution levels.
    pub fn orbit_seed(&self) -> Point {
        let x = match (self.alpha, self.beta) {
            (Some(a), Some(b)) => 0.5 * (a + b),
            _ => 0.0,
        };
        Point::new(x, self.antiderivative.value(x).unwrap_or(0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LienardError {
    #[error("{which} may only depend on {allowed}")]
    BadVariables { which: &'static str, allowed: &'static str },
    #[error("{which} cannot be evaluated at {at}: {source}")]
    Eval { which: &'static str, at: f64, source: MapError },
    #[error(transparent)]
    System(#[from] SystemError),
}

pub const X_SAMPLES: usize = 4001;
pub const T_SAMPLES: usize = 1000;
pub const DEFAULT_CHECK_RANGE: f64 = 10.0;

/// Solve `g(x) = v` for decreasing `g` by bisection, widening the bracket.
fn invert_decreasing(g: &Expression, v: f64, start: f64) -> Option<f64> {
    let h = |x: f64| g.eval_x(x).ok().map(|gx| gx - v);
    let mut r = start.max(1.0);
    let (mut lo, mut hi) = loop {
        let (a, b) = (h(-r)?, h(r)?);
        if a >= 0.0 && b <= 0.0 {
            break (-r, r);
        }
        r *= 2.0;
        if r > 1e8 {
            return None;
        }
    };
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if m == lo || m == hi {
            break;
        }
        if h(m)? >= 0.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    Some(0.5 * (lo + hi))
}

pub fn build_lienard(
    f: Expression,
    g: Expression,
    p: Expression,
    period: f64,
) -> Result<(LienardSpec, PeriodicSystem), LienardError> {
    build_lienard_on(f, g, p, period, DEFAULT_CHECK_RANGE)
}

/// As [`build_lienard`], sampling `x` in `[-check_range, check_range]`.
pub fn build_lienard_on(
    f: Expression,
    g: Expression,
    p: Expression,
    period: f64,
    check_range: f64,
) -> Result<(LienardSpec, PeriodicSystem), LienardError> {
    let only = |e: &Expression, v: Var| e.free_variables().iter().all(|w| *w == v);
    if !only(&f, Var::X) {
        return Err(LienardError::BadVariables { which: "f", allowed: "x" });
    }
    if !only(&g, Var::X) {
        return Err(LienardError::BadVariables { which: "g", allowed: "x" });
    }
    if !only(&p, Var::T) {
        return Err(LienardError::BadVariables { which: "p", allowed: "t" });
    }
    if !(period > 0.0 && period.is_finite()) {
        return Err(SystemError::BadPeriod(period).into());
    }
    let ev = |which: &'static str, e: &Expression, at: f64| {
        e.eval(at, 0.0, at).map_err(|err| LienardError::Eval { which, at, source: err.into() })
    };
    let xs: Vec<f64> = (0..X_SAMPLES)
        .map(|i| -check_range + 2.0 * check_range * i as f64 / (X_SAMPLES - 1) as f64)
        .collect();
    let ts: Vec<f64> = (0..T_SAMPLES).map(|i| period * i as f64 / T_SAMPLES as f64).collect();
    let mut assumptions = Vec::new();

    // A1: T-periodic, and not periodic with any period T/k
    let pv: Vec<f64> = ts.iter().map(|&t| ev("p", &p, t)).collect::<Result<_, _>>()?;
    let mut drift: f64 = 0.0;
    for (&t, &v) in ts.iter().zip(&pv) {
        drift = drift.max((ev("p", &p, t + period)? - v).abs());
    }
    let mut shorter = None;
    for k in 2..=8 {
        let sub = period / k as f64;
        let mut d: f64 = 0.0;
        for (&t, &v) in ts.iter().zip(&pv) {
            d = d.max((ev("p", &p, t + sub)? - v).abs());
        }
        if d <= PERIOD_TOL {
            shorter = Some(k);
            break;
        }
    }
    let status = if drift > PERIOD_TOL {
        let worst = ts.iter().zip(&pv).map(|(&t, &v)| (t, (p.eval_t(t + period).unwrap_or(f64::NAN) - v).abs()));
        let t = worst.fold((0.0, -1.0), |b, c| if c.1 > b.1 { c } else { b }).0;
        AssumptionStatus::Refuted { witness: vec![t] }
    } else if let Some(k) = shorter {
        AssumptionStatus::Refuted { witness: vec![period / k as f64] }
    } else {
        AssumptionStatus::VerifiedOnSamples
    };
    assumptions.push(AssumptionCheck {
        id: "A1",
        status,
        detail: format!("max |p(t+T) - p(t)| = {drift:e}; shorter period {shorter:?}"),
    });

    // A2: f >= 0 and bounded
    let fv: Vec<f64> = xs.iter().map(|&x| ev("f", &f, x)).collect::<Result<_, _>>()?;
    let f_sup = fv.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let neg = xs.iter().zip(&fv).find(|(_, v)| **v < 0.0);
    assumptions.push(AssumptionCheck {
        id: "A2",
        status: match neg {
            Some((&x, _)) => AssumptionStatus::Refuted { witness: vec![x] },
            None => AssumptionStatus::VerifiedOnSamples,
        },
        detail: format!("sup |f| on samples = {f_sup:e}"),
    });

    // A3: g strictly decreasing
    let gv: Vec<f64> = xs.iter().map(|&x| ev("g", &g, x)).collect::<Result<_, _>>()?;
    let bad = (1..xs.len()).find(|&i| gv[i] >= gv[i - 1]);
    assumptions.push(AssumptionCheck {
        id: "A3",
        status: match bad {
            Some(i) => AssumptionStatus::Refuted { witness: vec![xs[i - 1], xs[i]] },
            None => AssumptionStatus::VerifiedOnSamples,
        },
        detail: format!("g({}) = {:e}, g({}) = {:e}", xs[0], gv[0], xs[xs.len() - 1], gv[gv.len() - 1]),
    });

    // A4: |g(x)| <= c + d|x| with c = |g(0)|
    let growth_c = ev("g", &g, 0.0)?.abs();
    let growth_d = xs
        .iter()
        .zip(&gv)
        .filter(|(x, _)| **x != 0.0)
        .map(|(x, v)| (v.abs() - growth_c) / x.abs())
        .fold(0.0f64, f64::max);
    assumptions.push(AssumptionCheck {
        id: "A4",
        status: AssumptionStatus::VerifiedOnSamples,
        detail: format!("c = {growth_c:e}, d = {growth_d:e}"),
    });

    let p_min = pv.iter().copied().fold(f64::INFINITY, f64::min);
    let p_max = pv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let monotone = bad.is_none();
    let alpha = monotone.then(|| invert_decreasing(&g, p_max, check_range)).flatten();
    let beta = monotone.then(|| invert_decreasing(&g, p_min, check_range)).flatten();

    let antiderivative = Arc::new(Antiderivative::new(f.clone()));
    let field = LienardField { f: f.clone(), g: g.clone(), p: p.clone(), antiderivative: antiderivative.clone() };
    let name = format!("lienard[f={}, g={}, p={}]", f.source(), g.source(), p.source());
    let system = PeriodicSystem::new(name, Arc::new(field), period)?;
    let spec = LienardSpec {
        f,
        g,
        p,
        period,
        antiderivative,
        assumptions,
        p_min,
        p_max,
        alpha,
        beta,
        growth_c,
        growth_d,
        check_range,
    };
    Ok((spec, system))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: &str) -> Expression {
        Expression::parse(s).unwrap()
    }

    fn build(f: &str, g: &str, p: &str) -> LienardSpec {
        build_lienard(e(f), e(g), e(p), 2.0 * std::f64::consts::PI).unwrap().0
    }

    #[test]
    fn linear_instance_passes_all_assumptions() {
        let s = build("1", "-x", "sin(t)");
        assert!(s.assumptions_hold(), "{:?}", s.assumptions);
        assert!((s.p_min + 1.0).abs() < 1e-4 && (s.p_max - 1.0).abs() < 1e-4);
        let (a, b) = (s.alpha.unwrap(), s.beta.unwrap());
        assert!((a - s.p_max * -1.0).abs() < 1e-12 && (b + s.p_min).abs() < 1e-12);
        assert!(a <= b);
    }

    #[test]
    fn refuted_assumptions_carry_witnesses() {
        let s = build("1", "x", "sin(t)");
        let a3 = s.assumptions.iter().find(|a| a.id == "A3").unwrap();
        assert!(matches!(&a3.status, AssumptionStatus::Refuted { witness } if witness.len() == 2 && witness[0] < witness[1]));
        let s = build("-1", "-x", "sin(t)");
        let a2 = s.assumptions.iter().find(|a| a.id == "A2").unwrap();
        assert!(matches!(&a2.status, AssumptionStatus::Refuted { witness } if witness.len() == 1));
        let s = build("1", "-x", "sin(2*t)");
        let a1 = s.assumptions.iter().find(|a| a.id == "A1").unwrap();
        assert!(!a1.holds());
    }

    #[test]
    fn antiderivative_against_closed_form() {
        let big_f = Antiderivative::new(e("cos(x)"));
        for x in [-3.3, -0.125, 0.0, 0.01, 0.125, 0.3, 2.7, 9.0] {
            assert!((big_f.value(x).unwrap() - f64::sin(x)).abs() < 1e-10, "x = {x}");
        }
        // continuity across a cell boundary
        let k = 3.0 * QUAD_CELL;
        let jump = big_f.value(k - 1e-13).unwrap() - big_f.value(k).unwrap();
        assert!(jump.abs() < 1e-12);
    }

    #[test]
    fn bad_variables_rejected() {
        let r = build_lienard(e("y"), e("-x"), e("sin(t)"), 1.0);
        assert!(matches!(r, Err(LienardError::BadVariables { which: "f", .. })));
        let r = build_lienard(e("1"), e("-x"), e("sin(x)"), 1.0);
        assert!(matches!(r, Err(LienardError::BadVariables { which: "p", .. })));
    }
}
