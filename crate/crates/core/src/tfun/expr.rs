//! Expression trees in one real variable `t`.
//!
//! Besides the closed-form nodes of the input grammar there are three
//! internal node kinds: `Slot(i)` (the `i`-th state component, only
//! meaningful inside ODE right-hand sides), `At(f, g)` (the composition
//! `f(g(t))`) and `Leaf` (a numerically backed function of `t`).

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use num_integer::Integer;

use super::timefn::{MonotoneMap, OdeSystem};

#[derive(Clone)]
pub struct Expr(Arc<Node>);

#[derive(Clone)]
pub enum Node {
    Const(f64),
    T,
    Slot(usize),
    Add(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Neg(Expr),
    /// `base^(num/den)` with `den > 0` and the fraction in lowest terms.
    Pow(Expr, i64, i64),
    Exp(Expr),
    Log(Expr),
    Sin(Expr),
    Cos(Expr),
    At(Expr, Expr),
    Leaf(Leaf),
}

#[derive(Clone)]
pub enum Leaf {
    /// Component `idx` of a numerically solved ODE.
    Ode(Arc<OdeSystem>, usize),
    /// Inverse `t(tau)` of a monotone reparametrisation.
    Inverse(Arc<MonotoneMap>),
}

impl Leaf {
    fn eval(&self, t: f64) -> f64 {
        match self {
            Leaf::Ode(sys, i) => sys.eval_component(t, *i),
            Leaf::Inverse(map) => map.inverse(t).unwrap_or(f64::NAN),
        }
    }

    /// Derivative as an expression in `t`.
    fn derivative(&self) -> Expr {
        match self {
            Leaf::Ode(sys, i) => {
                let sys2 = sys.clone();
                sys.rhs()[*i].subst_slots(&|j| Expr::leaf(Leaf::Ode(sys2.clone(), j)))
            }
            Leaf::Inverse(map) => {
                let inner = Expr::leaf(self.clone());
                Expr::one() / Expr::at(map.xi().expr().clone(), inner)
            }
        }
    }
}

impl Expr {
    fn new(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn constant(c: f64) -> Self {
        Expr::new(Node::Const(c))
    }

    pub fn zero() -> Self {
        Expr::constant(0.0)
    }

    pub fn one() -> Self {
        Expr::constant(1.0)
    }

    pub fn t() -> Self {
        Expr::new(Node::T)
    }

    pub fn slot(i: usize) -> Self {
        Expr::new(Node::Slot(i))
    }

    pub(crate) fn leaf(l: Leaf) -> Self {
        Expr::new(Node::Leaf(l))
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    fn is_const(&self, c: f64) -> bool {
        self.as_const() == Some(c)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x + y),
            (Some(x), _) if x == 0.0 => b,
            (_, Some(y)) if y == 0.0 => a,
            _ => Expr::new(Node::Add(a, b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::add(a, Expr::neg(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x * y),
            (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::zero(),
            (Some(x), _) if x == 1.0 => b,
            (_, Some(y)) if y == 1.0 => a,
            (Some(x), _) if x == -1.0 => Expr::neg(b),
            (_, Some(y)) if y == -1.0 => Expr::neg(a),
            _ => Expr::new(Node::Mul(a, b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x / y),
            (Some(x), _) if x == 0.0 => Expr::zero(),
            (_, Some(y)) if y == 1.0 => a,
            _ => Expr::new(Node::Div(a, b)),
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match &*a.0 {
            Node::Const(c) => Expr::constant(-c),
            Node::Neg(inner) => inner.clone(),
            _ => Expr::new(Node::Neg(a)),
        }
    }

    /// `base^(num/den)`; the fraction is normalised.
    pub fn pow(base: Expr, num: i64, den: i64) -> Expr {
        assert!(den != 0, "zero exponent denominator");
        let g = num.gcd(&den);
        let (mut p, mut q) = (num / g, den / g);
        if q < 0 {
            p = -p;
            q = -q;
        }
        if p == 0 {
            return Expr::one();
        }
        if p == 1 && q == 1 {
            return base;
        }
        if let Some(c) = base.as_const() {
            return Expr::constant(rational_pow(c, p, q));
        }
        Expr::new(Node::Pow(base, p, q))
    }

    pub fn powi(base: Expr, k: i64) -> Expr {
        Expr::pow(base, k, 1)
    }

    pub fn exp(a: Expr) -> Expr {
        match a.as_const() {
            Some(c) => Expr::constant(c.exp()),
            None => Expr::new(Node::Exp(a)),
        }
    }

    pub fn log(a: Expr) -> Expr {
        match a.as_const() {
            Some(c) => Expr::constant(c.ln()),
            None => Expr::new(Node::Log(a)),
        }
    }

    pub fn sin(a: Expr) -> Expr {
        match a.as_const() {
            Some(c) => Expr::constant(c.sin()),
            None => Expr::new(Node::Sin(a)),
        }
    }

    pub fn cos(a: Expr) -> Expr {
        match a.as_const() {
            Some(c) => Expr::constant(c.cos()),
            None => Expr::new(Node::Cos(a)),
        }
    }

    /// The composition `f(g(t))`.
    pub fn at(f: Expr, g: Expr) -> Expr {
        if f.as_const().is_some() {
            return f;
        }
        if matches!(*g.0, Node::T) {
            return f;
        }
        Expr::new(Node::At(f, g))
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_with(t, &[])
    }

    /// Evaluation with state values bound to `Slot` nodes.
    pub fn eval_with(&self, t: f64, slots: &[f64]) -> f64 {
        match &*self.0 {
            Node::Const(c) => *c,
            Node::T => t,
            Node::Slot(i) => slots.get(*i).copied().unwrap_or(f64::NAN),
            Node::Add(a, b) => a.eval_with(t, slots) + b.eval_with(t, slots),
            Node::Mul(a, b) => a.eval_with(t, slots) * b.eval_with(t, slots),
            Node::Div(a, b) => a.eval_with(t, slots) / b.eval_with(t, slots),
            Node::Neg(a) => -a.eval_with(t, slots),
            Node::Pow(b, p, q) => rational_pow(b.eval_with(t, slots), *p, *q),
            Node::Exp(a) => a.eval_with(t, slots).exp(),
            Node::Log(a) => a.eval_with(t, slots).ln(),
            Node::Sin(a) => a.eval_with(t, slots).sin(),
            Node::Cos(a) => a.eval_with(t, slots).cos(),
            Node::At(f, g) => f.eval_with(g.eval_with(t, slots), slots),
            Node::Leaf(l) => l.eval(t),
        }
    }

    /// Symbolic derivative with respect to `t`. Slots are treated as
    /// constants; callers substitute them first when that matters.
    pub fn differentiate(&self) -> Expr {
        match &*self.0 {
            Node::Const(_) | Node::Slot(_) => Expr::zero(),
            Node::T => Expr::one(),
            Node::Add(a, b) => Expr::add(a.differentiate(), b.differentiate()),
            Node::Mul(a, b) => Expr::add(
                Expr::mul(a.differentiate(), b.clone()),
                Expr::mul(a.clone(), b.differentiate()),
            ),
            Node::Div(a, b) => {
                let da = a.differentiate();
                let db = b.differentiate();
                if db.is_const(0.0) {
                    return Expr::div(da, b.clone());
                }
                Expr::div(
                    Expr::sub(Expr::mul(da, b.clone()), Expr::mul(a.clone(), db)),
                    Expr::powi(b.clone(), 2),
                )
            }
            Node::Neg(a) => Expr::neg(a.differentiate()),
            Node::Pow(b, p, q) => {
                let coef = Expr::constant(*p as f64 / *q as f64);
                Expr::mul(
                    Expr::mul(coef, Expr::pow(b.clone(), p - q, *q)),
                    b.differentiate(),
                )
            }
            Node::Exp(a) => Expr::mul(self.clone(), a.differentiate()),
            Node::Log(a) => Expr::div(a.differentiate(), a.clone()),
            Node::Sin(a) => Expr::mul(Expr::cos(a.clone()), a.differentiate()),
            Node::Cos(a) => Expr::neg(Expr::mul(Expr::sin(a.clone()), a.differentiate())),
            Node::At(f, g) => Expr::mul(Expr::at(f.differentiate(), g.clone()), g.differentiate()),
            Node::Leaf(l) => l.derivative(),
        }
    }

    /// Replaces every `Slot(j)` by `repl(j)`.
    pub fn subst_slots(&self, repl: &dyn Fn(usize) -> Expr) -> Expr {
        self.map_nodes(&|node| match node {
            Node::Slot(j) => Some(repl(*j)),
            _ => None,
        })
    }

    fn map_nodes(&self, f: &dyn Fn(&Node) -> Option<Expr>) -> Expr {
        if let Some(e) = f(&self.0) {
            return e;
        }
        let m = |e: &Expr| e.map_nodes(f);
        match &*self.0 {
            Node::Const(_) | Node::T | Node::Slot(_) | Node::Leaf(_) => self.clone(),
            Node::Add(a, b) => Expr::add(m(a), m(b)),
            Node::Mul(a, b) => Expr::mul(m(a), m(b)),
            Node::Div(a, b) => Expr::div(m(a), m(b)),
            Node::Neg(a) => Expr::neg(m(a)),
            Node::Pow(b, p, q) => Expr::pow(m(b), *p, *q),
            Node::Exp(a) => Expr::exp(m(a)),
            Node::Log(a) => Expr::log(m(a)),
            Node::Sin(a) => Expr::sin(m(a)),
            Node::Cos(a) => Expr::cos(m(a)),
            // Slots inside a composition body still refer to the same state.
            Node::At(g, h) => Expr::at(m(g), m(h)),
        }
    }

    /// True when no numerically backed node occurs; such expressions print
    /// in the input grammar.
    pub fn is_closed_form(&self) -> bool {
        match &*self.0 {
            Node::Const(_) | Node::T => true,
            Node::Slot(_) | Node::Leaf(_) | Node::At(..) => false,
            Node::Add(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.is_closed_form() && b.is_closed_form()
            }
            Node::Neg(a)
            | Node::Pow(a, ..)
            | Node::Exp(a)
            | Node::Log(a)
            | Node::Sin(a)
            | Node::Cos(a) => a.is_closed_form(),
        }
    }

    /// Number of nodes, counting shared subtrees once per occurrence.
    pub fn size(&self) -> usize {
        1 + match &*self.0 {
            Node::Const(_) | Node::T | Node::Slot(_) | Node::Leaf(_) => 0,
            Node::Add(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::At(a, b) => {
                a.size() + b.size()
            }
            Node::Neg(a)
            | Node::Pow(a, ..)
            | Node::Exp(a)
            | Node::Log(a)
            | Node::Sin(a)
            | Node::Cos(a) => a.size(),
        }
    }

    fn prec(&self) -> u8 {
        match &*self.0 {
            Node::Add(..) => 1,
            Node::Mul(..) | Node::Div(..) => 2,
            Node::Neg(_) => 3,
            Node::Const(c) if *c < 0.0 => 3,
            Node::Pow(..) => 4,
            _ => 5,
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.prec() < min {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

/// Real `c^(p/q)`; odd roots of negative numbers are real.
pub(crate) fn rational_pow(c: f64, p: i64, q: i64) -> f64 {
    if q == 1 {
        return c.powi(p as i32);
    }
    if c < 0.0 {
        if q % 2 == 0 {
            return f64::NAN;
        }
        let r = (-c).powf(p as f64 / q as f64);
        return if p % 2 == 0 { r } else { -r };
    }
    c.powf(p as f64 / q as f64)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Node::Const(c) => write!(f, "{c}"),
            Node::T => write!(f, "t"),
            Node::Slot(i) => write!(f, "y[{i}]"),
            Node::Add(a, b) => {
                a.fmt_child(f, 1)?;
                match &*b.0 {
                    Node::Neg(inner) => {
                        write!(f, " - ")?;
                        inner.fmt_child(f, 2)
                    }
                    Node::Const(c) if *c < 0.0 => write!(f, " - {}", -c),
                    _ => {
                        write!(f, " + ")?;
                        b.fmt_child(f, 1)
                    }
                }
            }
            Node::Mul(a, b) => {
                a.fmt_child(f, 2)?;
                write!(f, "*")?;
                b.fmt_child(f, 3)
            }
            Node::Div(a, b) => {
                a.fmt_child(f, 2)?;
                write!(f, "/")?;
                b.fmt_child(f, 4)
            }
            Node::Neg(a) => {
                write!(f, "-")?;
                a.fmt_child(f, 3)
            }
            Node::Pow(b, p, q) => {
                b.fmt_child(f, 5)?;
                match (p, q) {
                    (p, 1) if *p >= 0 => write!(f, "^{p}"),
                    (p, 1) => write!(f, "^({p})"),
                    (p, q) => write!(f, "^({p}/{q})"),
                }
            }
            Node::Exp(a) => write!(f, "exp({a})"),
            Node::Log(a) => write!(f, "log({a})"),
            Node::Sin(a) => write!(f, "sin({a})"),
            Node::Cos(a) => write!(f, "cos({a})"),
            Node::At(g, h) => write!(f, "[{g}]@({h})"),
            Node::Leaf(Leaf::Ode(sys, i)) => write!(f, "ode{}[{i}](t)", sys.id()),
            Node::Leaf(Leaf::Inverse(map)) => write!(f, "inv{}(t)", map.id()),
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $ctor:path) => {
        impl $tr for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                $ctor(self, rhs)
            }
        }
        impl $tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                $ctor(self.clone(), rhs.clone())
            }
        }
        impl $tr<f64> for Expr {
            type Output = Expr;
            fn $m(self, rhs: f64) -> Expr {
                $ctor(self, Expr::constant(rhs))
            }
        }
        impl $tr<Expr> for f64 {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                $ctor(Expr::constant(self), rhs)
            }
        }
    };
}

binop!(Add, add, Expr::add);
binop!(Sub, sub, Expr::sub);
binop!(Mul, mul, Expr::mul);
binop!(Div, div, Expr::div);

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t() -> Expr {
        Expr::t()
    }

    #[test]
    fn constant_folding() {
        assert!((Expr::constant(2.0) * Expr::constant(3.0)).is_const(6.0));
        assert!((t() * 0.0).is_const(0.0));
        assert_eq!((t() * 1.0).to_string(), "t");
        assert_eq!(Expr::neg(Expr::neg(t())).to_string(), "t");
    }

    #[test]
    fn derivative_rules() {
        assert!(Expr::constant(5.0).differentiate().is_const(0.0));
        let cube = Expr::powi(t(), 3);
        assert_eq!(cube.differentiate().to_string(), "3*t^2");
        let e = Expr::exp(2.0 * t());
        assert_eq!(e.differentiate().to_string(), "exp(2*t)*2");
    }

    #[test]
    fn odd_root_of_negative_base() {
        assert!((rational_pow(-8.0, 1, 3) + 2.0).abs() < 1e-15);
        assert!((rational_pow(-8.0, 2, 3) - 4.0).abs() < 1e-12);
        assert!(rational_pow(-4.0, 1, 2).is_nan());
    }

    #[test]
    fn composition_chain_rule() {
        // sin(t^2) via At
        let f = Expr::at(Expr::sin(t()), Expr::powi(t(), 2));
        let d = f.differentiate();
        let x = 0.7;
        assert!((d.eval(x) - (x * x).cos() * 2.0 * x).abs() < 1e-14);
    }

    #[test]
    fn display_is_reparseable() {
        let e = Expr::sub(
            Expr::div(Expr::constant(2.0), 1.0 + Expr::powi(t(), 2)),
            Expr::pow(t(), -1, 2),
        );
        let back = super::super::parse_expr(&e.to_string()).unwrap();
        for x in [0.3, 1.1, 2.5] {
            assert!((back.eval(x) - e.eval(x)).abs() < 1e-14, "{e}");
        }
    }
}
