use std::f64::consts::{E, PI};
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::{BinOp, Constant, DualValue, EvalError, Func, Node, NodeKind, Var};

/// Numeric type the tree can be evaluated over.
pub(super) trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn lift(v: f64) -> Self;
    fn value(&self) -> f64;
    /// Apply a scalar function given its value and derivative at `value()`.
    fn map(self, fv: f64, dfv: f64) -> Self;
    fn depends(&self) -> bool;
}

impl Scalar for f64 {
    fn lift(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn map(self, fv: f64, _dfv: f64) -> Self {
        fv
    }
    fn depends(&self) -> bool {
        false
    }
}

impl Scalar for DualValue {
    fn lift(v: f64) -> Self {
        DualValue::constant(v)
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn map(self, fv: f64, dfv: f64) -> Self {
        self.chain(fv, dfv)
    }
    fn depends(&self) -> bool {
        self.has_gradient()
    }
}

pub(super) struct Env<S> {
    pub x: S,
    pub y: S,
    pub t: f64,
}

fn domain(node: &Node, message: String) -> EvalError {
    EvalError::Domain { offset: node.offset, message }
}

/// Exponents this close to an integer use repeated multiplication.
fn as_small_integer(v: f64) -> Option<i32> {
    (v.fract() == 0.0 && v.abs() <= 64.0).then_some(v as i32)
}

pub(super) fn eval_node<S: Scalar>(node: &Node, env: &Env<S>) -> Result<S, EvalError> {
    Ok(match &node.kind {
        NodeKind::Num(v) => S::lift(*v),
        NodeKind::Var(Var::X) => env.x,
        NodeKind::Var(Var::Y) => env.y,
        NodeKind::Var(Var::T) => S::lift(env.t),
        NodeKind::Const(Constant::Pi) => S::lift(PI),
        NodeKind::Const(Constant::E) => S::lift(E),
        NodeKind::Neg(a) => -eval_node(a, env)?,
        NodeKind::Binary(op, l, r) => {
            let a = eval_node(l, env)?;
            let b = eval_node(r, env)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b.value() == 0.0 {
                        return Err(domain(node, "division by zero".into()));
                    }
                    a / b
                }
                BinOp::Pow => pow(node, a, b)?,
            }
        }
        NodeKind::Call(func, arg) => {
            let a = eval_node(arg, env)?;
            let v = a.value();
            match func {
                Func::Sin => a.map(v.sin(), v.cos()),
                Func::Cos => a.map(v.cos(), -v.sin()),
                Func::Tan => {
                    let t = v.tan();
                    a.map(t, 1.0 + t * t)
                }
                Func::Atan => a.map(v.atan(), 1.0 / (1.0 + v * v)),
                Func::Exp => {
                    let e = v.exp();
                    a.map(e, e)
                }
                Func::Ln => {
                    if v <= 0.0 {
                        return Err(domain(node, format!("ln of non-positive value {v}")));
                    }
                    a.map(v.ln(), 1.0 / v)
                }
                Func::Sqrt => {
                    if v < 0.0 {
                        return Err(domain(node, format!("sqrt of negative value {v}")));
                    }
                    let s = v.sqrt();
                    a.map(s, 0.5 / s)
                }
                Func::Abs => a.map(v.abs(), if v < 0.0 { -1.0 } else { 1.0 }),
            }
        }
    })
}

fn pow<S: Scalar>(node: &Node, a: S, b: S) -> Result<S, EvalError> {
    let av = a.value();
    let bv = b.value();
    // value and d/da are computed identically for plain and dual evaluation
    let (value, d_base) = match as_small_integer(bv) {
        Some(0) => (1.0, 0.0),
        Some(n) => {
            if av == 0.0 && n < 0 {
                return Err(domain(node, "zero raised to a negative power".into()));
            }
            (av.powi(n), n as f64 * av.powi(n - 1))
        }
        None => {
            if av < 0.0 {
                return Err(domain(node, format!("negative base {av} with non-integer exponent {bv}")));
            }
            let v = av.powf(bv);
            let d = if av == 0.0 { if bv > 1.0 { 0.0 } else { f64::INFINITY } } else { bv * v / av };
            (v, d)
        }
    };
    let base_part = a.map(value, d_base);
    if !b.depends() {
        return Ok(base_part);
    }
    let d_exp = if av > 0.0 { value * av.ln() } else { f64::NAN };
    Ok(base_part + b.map(0.0, d_exp))
}
