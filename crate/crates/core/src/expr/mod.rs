//! The expression language used to define maps and vector fields.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?          right associative
//! primary := number | 'x' | 'y' | 't' | 'pi' | 'e'
//!          | func '(' expr ')' | '(' expr ')'
//! func    := sin | cos | tan | atan | exp | ln | sqrt | abs
//! ```
//!
//! `-x^2` parses as `-(x^2)`. Angles are radians.

mod dual;
mod eval;
mod parser;

use std::collections::BTreeSet;
use std::fmt;

pub use dual::DualValue;
pub use parser::ParseError;

use thiserror::Error;

/// Free variables an expression may reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    X,
    Y,
    T,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::T => "t",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constant {
    Pi,
    E,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Atan,
    Exp,
    Ln,
    Sqrt,
    Abs,
}

impl Func {
    pub const ALL: [Func; 8] =
        [Func::Sin, Func::Cos, Func::Tan, Func::Atan, Func::Exp, Func::Ln, Func::Sqrt, Func::Abs];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Atan => "atan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// A syntax tree node. `offset` is the byte offset of the node in the source
/// and is ignored by equality.
#[derive(Debug, Clone)]
pub struct Node {
    pub kind: NodeKind,
    pub offset: usize,
}

#[derive(Debug, Clone)]
pub enum NodeKind {
    Num(f64),
    Var(Var),
    Const(Constant),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        use NodeKind::*;
        match (&self.kind, &other.kind) {
            (Num(a), Num(b)) => a.to_bits() == b.to_bits(),
            (Var(a), Var(b)) => a == b,
            (Const(a), Const(b)) => a == b,
            (Neg(a), Neg(b)) => a == b,
            (Binary(o1, l1, r1), Binary(o2, l2, r2)) => o1 == o2 && l1 == l2 && r1 == r2,
            (Call(f1, a1), Call(f2, a2)) => f1 == f2 && a1 == a2,
            _ => false,
        }
    }
}

impl fmt::Display for Node {
    /// Fully parenthesised rendering; re-parsing yields an identical tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            NodeKind::Num(v) => write!(f, "{v:?}"),
            NodeKind::Var(v) => f.write_str(v.name()),
            NodeKind::Const(Constant::Pi) => f.write_str("pi"),
            NodeKind::Const(Constant::E) => f.write_str("e"),
            NodeKind::Neg(inner) => write!(f, "(-{inner})"),
            NodeKind::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            NodeKind::Call(func, arg) => write!(f, "{}({arg})", func.name()),
        }
    }
}

/// Evaluation failure, located at the offending node.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error at byte {offset}: {message}")]
    Domain { offset: usize, message: String },
}

/// A parsed, immutable expression.
#[derive(Debug, Clone)]
pub struct Expression {
    root: Node,
    source: String,
}

impl PartialEq for Expression {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
    }
}

impl Expression {
    pub fn parse(source: &str) -> Result<Expression, ParseError> {
        let root = parser::parse(source)?;
        Ok(Expression { root, source: source.to_string() })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn free_variables(&self) -> BTreeSet<Var> {
        fn walk(n: &Node, acc: &mut BTreeSet<Var>) {
            match &n.kind {
                NodeKind::Var(v) => {
                    acc.insert(*v);
                }
                NodeKind::Num(_) | NodeKind::Const(_) => {}
                NodeKind::Neg(a) | NodeKind::Call(_, a) => walk(a, acc),
                NodeKind::Binary(_, l, r) => {
                    walk(l, acc);
                    walk(r, acc);
                }
            }
        }
        let mut acc = BTreeSet::new();
        walk(&self.root, &mut acc);
        acc
    }

    /// IEEE double evaluation.
    pub fn eval(&self, x: f64, y: f64, t: f64) -> Result<f64, EvalError> {
        eval::eval_node(&self.root, &eval::Env { x, y, t })
    }

    /// Value together with exact partials with respect to `x` and `y`.
    pub fn eval_dual(&self, x: f64, y: f64, t: f64) -> Result<DualValue, EvalError> {
        eval::eval_node(&self.root, &eval::Env { x: DualValue::var_x(x), y: DualValue::var_y(y), t })
    }

    /// Convenience for one-variable expressions in `x`.
    pub fn eval_x(&self, x: f64) -> Result<f64, EvalError> {
        self.eval(x, 0.0, 0.0)
    }

    /// Convenience for one-variable expressions in `t`.
    pub fn eval_t(&self, t: f64) -> Result<f64, EvalError> {
        self.eval(0.0, 0.0, t)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

impl std::str::FromStr for Expression {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expression::parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const PHI: &str = "x*(1+atan(x)^2)/(4+pi^2)";

    #[test]
    fn phi_parses_with_single_free_variable() {
        let e = Expression::parse(PHI).unwrap();
        assert_eq!(e.free_variables().into_iter().collect::<Vec<_>>(), vec![Var::X]);
    }

    #[test]
    fn zero_is_constant() {
        let e = Expression::parse("0").unwrap();
        assert!(e.free_variables().is_empty());
        for (x, y) in [(0.0, 0.0), (3.0, -2.0), (1e6, 1e-6)] {
            assert_eq!(e.eval(x, y, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn unbalanced_parenthesis_reports_offset() {
        match Expression::parse("2*x*(1+y^2") {
            Err(ParseError::Syntax { offset, expected, .. }) => {
                assert_eq!(offset, 10);
                assert!(expected.iter().any(|e| e == "')'"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_identifier_is_rejected() {
        assert!(matches!(
            Expression::parse("x + z"),
            Err(ParseError::UnknownIdentifier { offset: 4, .. })
        ));
        assert!(matches!(
            Expression::parse("foo(x)"),
            Err(ParseError::UnknownIdentifier { offset: 0, .. })
        ));
    }

    #[test]
    fn phi_values() {
        let e = Expression::parse(PHI).unwrap();
        assert_eq!(e.eval(0.0, 0.0, 0.0).unwrap(), 0.0);
        // (1 + (pi/4)^2) / (4 + pi^2), evaluated independently
        let hand = (1.0 + (PI / 4.0) * (PI / 4.0)) / (4.0 + PI * PI);
        let v = e.eval(1.0, 0.0, 0.0).unwrap();
        assert!((v - 0.1165751).abs() < 1e-6, "{v}");
        assert!((v - hand).abs() < 1e-15);
    }

    #[test]
    fn y_over_three() {
        let e = Expression::parse("y/3").unwrap();
        assert_eq!(e.eval(0.0, 3.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn dual_of_product_example() {
        let e = Expression::parse("2*x*(1+y^2)").unwrap();
        let d = e.eval_dual(1.0, 1.0, 0.0).unwrap();
        assert_eq!((d.value, d.dx, d.dy), (4.0, 4.0, 4.0));
    }

    #[test]
    fn dual_of_phi_at_origin_matches_central_difference() {
        let e = Expression::parse(PHI).unwrap();
        let h = 1e-6;
        let fd = (e.eval(h, 0.0, 0.0).unwrap() - e.eval(-h, 0.0, 0.0).unwrap()) / (2.0 * h);
        let d = e.eval_dual(0.0, 0.0, 0.0).unwrap();
        // oracle: central difference, h = 1e-6; equals 1/(4+pi^2)
        assert!((fd - 0.0721001).abs() < 1e-6, "{fd}");
        assert!((d.dx - fd).abs() < 1e-9);
        assert_eq!(d.dy, 0.0);
    }

    #[test]
    fn dual_of_constant() {
        let d = Expression::parse("7").unwrap().eval_dual(2.0, 3.0, 0.0).unwrap();
        assert_eq!((d.value, d.dx, d.dy), (7.0, 0.0, 0.0));
    }

    #[test]
    fn domain_errors_carry_location() {
        let e = Expression::parse("1 + ln(x)").unwrap();
        assert_eq!(e.eval(0.0, 0.0, 0.0), Err(EvalError::Domain { offset: 4, message: "ln of non-positive value 0".into() }));
        let e = Expression::parse("sqrt(y)").unwrap();
        assert!(matches!(e.eval_dual(0.0, -1.0, 0.0), Err(EvalError::Domain { offset: 0, .. })));
        let e = Expression::parse("x^0.5").unwrap();
        assert!(matches!(e.eval(-2.0, 0.0, 0.0), Err(EvalError::Domain { offset: 1, .. })));
        // integer exponents of negative bases are fine
        assert_eq!(Expression::parse("x^3").unwrap().eval(-2.0, 0.0, 0.0).unwrap(), -8.0);
    }

    #[test]
    fn precedence_and_associativity() {
        let ev = |s: &str| Expression::parse(s).unwrap().eval(2.0, 3.0, 0.0).unwrap();
        assert_eq!(ev("-x^2"), -4.0);
        assert_eq!(ev("2^3^2"), 512.0);
        assert_eq!(ev("x - y - 1"), -2.0);
        assert_eq!(ev("x / y * 3"), 2.0);
        assert_eq!(ev("2^-1"), 0.5);
        assert_eq!(ev("1e1 + .5"), 10.5);
    }

    #[test]
    fn pretty_print_round_trip() {
        for s in [PHI, "2*x*(1+y^2)", "-x^2 - -y", "sin(t)*exp(-x/2)", "2^3^2", "abs(x)-sqrt(1+y^2)"] {
            let e = Expression::parse(s).unwrap();
            let again = Expression::parse(&e.to_string()).unwrap();
            assert_eq!(e, again, "{s} -> {e}");
        }
    }

    #[test]
    fn evaluation_is_deterministic() {
        let e = Expression::parse("sin(x*y) + exp(atan(t))").unwrap();
        let a = e.eval(0.3, 0.7, 1.1).unwrap();
        let b = e.eval(0.3, 0.7, 1.1).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
