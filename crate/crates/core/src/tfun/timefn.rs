//! Time functions with exact derivatives, ODE-backed functions, quadrature
//! and monotone reparametrisations.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use thiserror::Error;

use super::expr::{Expr, Leaf};
use super::parse::{parse_expr, ParseError};
use crate::odeint::{integrate, DomainViolation, IntegratorConfig, OdeError, Trajectory};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TfunError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("reparametrisation is not monotone: xi({t}) = {xi:e}")]
    NonMonotone { t: f64, xi: f64 },
    #[error(transparent)]
    Integrator(#[from] OdeError),
    #[error("invalid span: {0}")]
    InvalidSpan(String),
    #[error("auxiliary solve stopped early at t = {t} (requested {requested})")]
    Incomplete { t: f64, requested: f64 },
}

static NEXT_ID: AtomicUsize = AtomicUsize::new(0);

fn next_id() -> usize {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

/// A scalar function of time together with its derivative.
#[derive(Clone)]
pub struct TimeFn {
    f: Expr,
    df: Expr,
}

impl TimeFn {
    pub fn new(f: Expr) -> Self {
        let df = f.differentiate();
        TimeFn { f, df }
    }

    fn from_parts(f: Expr, df: Expr) -> Self {
        TimeFn { f, df }
    }

    pub fn parse(src: &str) -> Result<Self, ParseError> {
        Ok(TimeFn::new(parse_expr(src)?))
    }

    pub fn constant(c: f64) -> Self {
        TimeFn::from_parts(Expr::constant(c), Expr::zero())
    }

    pub fn t() -> Self {
        TimeFn::from_parts(Expr::t(), Expr::one())
    }

    pub fn expr(&self) -> &Expr {
        &self.f
    }

    pub fn deriv_expr(&self) -> &Expr {
        &self.df
    }

    pub fn value(&self, t: f64) -> f64 {
        self.f.eval(t)
    }

    pub fn deriv(&self, t: f64) -> f64 {
        self.df.eval(t)
    }

    /// The derivative as a function in its own right.
    pub fn derivative(&self) -> TimeFn {
        TimeFn::new(self.df.clone())
    }

    pub fn as_const(&self) -> Option<f64> {
        self.f.as_const()
    }

    pub fn is_closed_form(&self) -> bool {
        self.f.is_closed_form()
    }

    /// `self(inner(t))`.
    pub fn compose(&self, inner: &TimeFn) -> TimeFn {
        let f = Expr::at(self.f.clone(), inner.f.clone());
        let df = Expr::mul(Expr::at(self.df.clone(), inner.f.clone()), inner.df.clone());
        TimeFn::from_parts(f, df)
    }

    pub fn exp(&self) -> TimeFn {
        let f = Expr::exp(self.f.clone());
        let df = Expr::mul(f.clone(), self.df.clone());
        TimeFn::from_parts(f, df)
    }

    pub fn ln(&self) -> TimeFn {
        TimeFn::from_parts(
            Expr::log(self.f.clone()),
            Expr::div(self.df.clone(), self.f.clone()),
        )
    }

    /// `self^(p/q)`.
    pub fn powr(&self, p: i64, q: i64) -> TimeFn {
        let f = Expr::pow(self.f.clone(), p, q);
        let df = Expr::mul(
            Expr::mul(
                Expr::constant(p as f64 / q as f64),
                Expr::pow(self.f.clone(), p - q, q),
            ),
            self.df.clone(),
        );
        TimeFn::from_parts(f, df)
    }

    pub fn powi(&self, k: i64) -> TimeFn {
        self.powr(k, 1)
    }

    pub fn recip(&self) -> TimeFn {
        TimeFn::constant(1.0) / self.clone()
    }

    pub fn scale(&self, c: f64) -> TimeFn {
        self.clone() * c
    }

    /// Supremum of `|self|` over `n` equally spaced points of `[a, b]`.
    pub fn sup_abs(&self, a: f64, b: f64, n: usize) -> f64 {
        grid(a, b, n)
            .map(|t| self.value(t).abs())
            .fold(0.0, f64::max)
    }
}

/// `n` equally spaced points on `[a, b]`, both ends included.
pub fn grid(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    let n = n.max(2);
    (0..n).map(move |k| {
        if k == n - 1 {
            b
        } else {
            a + (b - a) * k as f64 / (n - 1) as f64
        }
    })
}

impl fmt::Display for TimeFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.f)
    }
}

impl fmt::Debug for TimeFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TimeFn({})", self.f)
    }
}

impl Add for TimeFn {
    type Output = TimeFn;
    fn add(self, rhs: TimeFn) -> TimeFn {
        TimeFn::from_parts(self.f + rhs.f, self.df + rhs.df)
    }
}

impl Sub for TimeFn {
    type Output = TimeFn;
    fn sub(self, rhs: TimeFn) -> TimeFn {
        TimeFn::from_parts(self.f - rhs.f, self.df - rhs.df)
    }
}

impl Mul for TimeFn {
    type Output = TimeFn;
    fn mul(self, rhs: TimeFn) -> TimeFn {
        let df = &self.df * &rhs.f + &self.f * &rhs.df;
        TimeFn::from_parts(self.f * rhs.f, df)
    }
}

impl Div for TimeFn {
    type Output = TimeFn;
    fn div(self, rhs: TimeFn) -> TimeFn {
        let f = &self.f / &rhs.f;
        let df = if rhs.df.as_const() == Some(0.0) {
            &self.df / &rhs.f
        } else {
            (&self.df * &rhs.f - &self.f * &rhs.df) / Expr::powi(rhs.f.clone(), 2)
        };
        TimeFn::from_parts(f, df)
    }
}

impl Neg for TimeFn {
    type Output = TimeFn;
    fn neg(self) -> TimeFn {
        TimeFn::from_parts(-self.f, -self.df)
    }
}

impl Mul<f64> for TimeFn {
    type Output = TimeFn;
    fn mul(self, c: f64) -> TimeFn {
        TimeFn::from_parts(self.f * c, self.df * c)
    }
}

impl Add<f64> for TimeFn {
    type Output = TimeFn;
    fn add(self, c: f64) -> TimeFn {
        TimeFn::from_parts(self.f + c, self.df)
    }
}

macro_rules! ref_ops {
    ($tr:ident, $m:ident) => {
        impl $tr<&TimeFn> for &TimeFn {
            type Output = TimeFn;
            fn $m(self, rhs: &TimeFn) -> TimeFn {
                $tr::$m(self.clone(), rhs.clone())
            }
        }
    };
}

ref_ops!(Add, add);
ref_ops!(Sub, sub);
ref_ops!(Mul, mul);
ref_ops!(Div, div);

/// A system `y' = rhs(t, y)` solved once on `[t0, t1]`; its components are
/// available as [`TimeFn`]s whose derivatives are the right-hand sides
/// evaluated on the solution.
pub struct OdeSystem {
    id: usize,
    rhs: Vec<Expr>,
    traj: Trajectory,
}

impl OdeSystem {
    /// `rhs[i]` may refer to `t` and to `Slot(j)` for the state.
    pub fn solve(
        rhs: Vec<Expr>,
        y0: &[f64],
        t0: f64,
        t1: f64,
        cfg: &IntegratorConfig,
    ) -> Result<Arc<OdeSystem>, TfunError> {
        assert_eq!(
            rhs.len(),
            y0.len(),
            "rhs and initial state differ in length"
        );
        let f = |t: f64, y: &[f64], dy: &mut [f64]| {
            for (d, e) in dy.iter_mut().zip(&rhs) {
                *d = e.eval_with(t, y);
                if !d.is_finite() {
                    return Err(DomainViolation(format!(
                        "non-finite right-hand side at t = {t}"
                    )));
                }
            }
            Ok(())
        };
        let traj = integrate(&f, t0, y0, t1, cfg)?;
        if !traj.completed() {
            return Err(TfunError::Incomplete {
                t: traj.t_end(),
                requested: t1,
            });
        }
        Ok(Arc::new(OdeSystem {
            id: next_id(),
            rhs,
            traj,
        }))
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn rhs(&self) -> &[Expr] {
        &self.rhs
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    pub fn eval_component(&self, t: f64, i: usize) -> f64 {
        if !self.traj.covers(t) {
            return f64::NAN;
        }
        self.traj.eval_component(t, i)
    }

    pub fn component(self: &Arc<Self>, i: usize) -> TimeFn {
        TimeFn::new(Expr::leaf(Leaf::Ode(self.clone(), i)))
    }
}

/// `t -> integral_0^t f` on `[0, end]` as a function with derivative `f`.
pub fn integral_fn(f: &TimeFn, end: f64) -> Result<TimeFn, TfunError> {
    if let Some(c) = f.as_const() {
        return Ok(TimeFn::t() * c);
    }
    if !(end > 0.0) {
        return Err(TfunError::InvalidSpan(format!(
            "integration end {end} must be positive"
        )));
    }
    let sys = OdeSystem::solve(
        vec![f.expr().clone()],
        &[0.0],
        0.0,
        end,
        &quadrature_config(),
    )?;
    Ok(sys.component(0))
}

/// Quadratures feed later integrations (through `tau` and its inverse), so
/// they run well below the default tolerances.
fn quadrature_config() -> IntegratorConfig {
    IntegratorConfig::default().scaled(1e-3)
}

/// `integral_0^t f` by the shared integrator.
pub fn cumint(f: &TimeFn, t: f64) -> Result<f64, TfunError> {
    if t == 0.0 {
        return Ok(0.0);
    }
    let (integrand, end, sign) = if t > 0.0 {
        (f.expr().clone(), t, 1.0)
    } else {
        (Expr::at(f.expr().clone(), -Expr::t()), -t, -1.0)
    };
    let rhs = |s: f64, _y: &[f64], dy: &mut [f64]| {
        dy[0] = integrand.eval(s);
        if dy[0].is_finite() {
            Ok(())
        } else {
            Err(DomainViolation(format!("integrand not finite at {s}")))
        }
    };
    let traj = integrate(&rhs, 0.0, &[0.0], end, &quadrature_config())?;
    Ok(sign * traj.last_state()[0])
}

/// `tau(t) = integral_0^t xi` on `[0, T]` with a certified constant sign of
/// `xi` and an inverse.
pub struct MonotoneMap {
    id: usize,
    xi: TimeFn,
    forward: Arc<OdeSystem>,
    end: f64,
    increasing: bool,
}

/// Number of grid points used to certify sign conditions.
pub const CERT_GRID: usize = 1001;
const XI_FLOOR: f64 = 1e-12;

pub fn build_monotone(xi: &TimeFn, span: (f64, f64)) -> Result<Arc<MonotoneMap>, TfunError> {
    let (a, b) = span;
    if a != 0.0 || !(b > 0.0) || !b.is_finite() {
        return Err(TfunError::InvalidSpan(format!(
            "reparametrisation span must be [0, T] with T > 0, got [{a}, {b}]"
        )));
    }
    let xi0 = xi.value(0.0);
    let check = |t: f64| -> Result<(), TfunError> {
        let v = xi.value(t);
        if !v.is_finite() || v.abs() < XI_FLOOR || v.signum() != xi0.signum() {
            return Err(TfunError::NonMonotone { t, xi: v });
        }
        Ok(())
    };
    for t in grid(0.0, b, CERT_GRID) {
        check(t)?;
    }
    let forward = OdeSystem::solve(
        vec![xi.expr().clone()],
        &[0.0],
        0.0,
        b,
        &quadrature_config(),
    )?;
    for &t in forward.trajectory().times() {
        check(t)?;
    }
    Ok(Arc::new(MonotoneMap {
        id: next_id(),
        xi: xi.clone(),
        forward,
        end: b,
        increasing: xi0 > 0.0,
    }))
}

impl fmt::Debug for MonotoneMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MonotoneMap")
            .field("xi", self.xi())
            .field("span", &self.t_span())
            .finish()
    }
}

impl MonotoneMap {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn xi(&self) -> &TimeFn {
        &self.xi
    }

    pub fn t_span(&self) -> (f64, f64) {
        (0.0, self.end)
    }

    pub fn is_increasing(&self) -> bool {
        self.increasing
    }

    /// `(min, max)` of `tau` over the span.
    pub fn tau_range(&self) -> (f64, f64) {
        let e = self.forward(self.end);
        if self.increasing {
            (0.0, e)
        } else {
            (e, 0.0)
        }
    }

    pub fn forward(&self, t: f64) -> f64 {
        self.forward.eval_component(t, 0)
    }

    /// `tau` as a function of `t`.
    pub fn forward_fn(&self) -> TimeFn {
        self.forward.component(0)
    }

    /// `t(tau)`, or `None` outside the range.
    pub fn inverse(&self, tau: f64) -> Option<f64> {
        let (lo, hi) = self.tau_range();
        let slack = 1e-12 * (hi - lo).abs().max(1.0);
        if !(tau >= lo - slack && tau <= hi + slack) {
            return None;
        }
        let traj = self.forward.trajectory();
        let times = traj.times();
        let taus: Vec<f64> = traj.states().iter().map(|s| s[0]).collect();
        let sgn = if self.increasing { 1.0 } else { -1.0 };
        // bracket by step table (sgn * tau is increasing)
        let k = taus.partition_point(|&s| sgn * s <= sgn * tau);
        let (i0, i1) = match k {
            0 => (0, 1),
            k if k >= taus.len() => (taus.len() - 2, taus.len() - 1),
            k => (k - 1, k),
        };
        let (mut a, mut b) = (times[i0], times[i1]);
        let g = |t: f64| sgn * (self.forward(t) - tau);
        if g(a) > 0.0 {
            return Some(a);
        }
        if g(b) < 0.0 {
            return Some(b);
        }
        // Safeguarded Newton on the dense output.
        let mut t = a + (b - a) * 0.5;
        for _ in 0..100 {
            let gt = g(t);
            if gt == 0.0 {
                return Some(t);
            }
            if gt < 0.0 {
                a = t;
            } else {
                b = t;
            }
            let slope = sgn * self.xi.value(t);
            let mut next = t - gt / slope;
            if !(next > a && next < b) || !next.is_finite() {
                next = 0.5 * (a + b);
            }
            if (next - t).abs() <= 1e-15 * t.abs().max(1.0) || b - a <= 1e-15 * b.abs().max(1.0) {
                return Some(next);
            }
            t = next;
        }
        Some(t)
    }

    /// `t(tau)` as a function of `tau`, with derivative `1 / xi(t(tau))`.
    pub fn inverse_fn(self: &Arc<Self>) -> TimeFn {
        TimeFn::new(Expr::leaf(Leaf::Inverse(self.clone())))
    }

    /// `f(t(tau))` as a function of `tau`.
    pub fn pull(self: &Arc<Self>, f: &TimeFn) -> TimeFn {
        f.compose(&self.inverse_fn())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tf(s: &str) -> TimeFn {
        TimeFn::parse(s).unwrap()
    }

    #[test]
    fn cumint_examples() {
        assert!((cumint(&TimeFn::constant(1.0), 2.0).unwrap() - 2.0).abs() < 1e-12);
        assert!((cumint(&tf("cos(t)"), std::f64::consts::FRAC_PI_2).unwrap() - 1.0).abs() < 1e-9);
        assert!((cumint(&tf("3*t^2"), 1.0).unwrap() - 1.0).abs() < 1e-9);
        assert!((cumint(&tf("3*t^2"), -1.0).unwrap() + 1.0).abs() < 1e-9);
    }

    #[test]
    fn cumint_is_additive() {
        let f = tf("exp(-t)*cos(3*t) + 1");
        let (a, b) = (0.7, 1.3);
        let whole = cumint(&f, a + b).unwrap();
        let first = cumint(&f, a).unwrap();
        let shifted = f.compose(&(TimeFn::t() + a));
        let second = cumint(&shifted, b).unwrap();
        assert!((whole - first - second).abs() < 1e-9);
    }

    #[test]
    fn monotone_identity_and_exp() {
        let m = build_monotone(&TimeFn::constant(1.0), (0.0, 2.0)).unwrap();
        assert!((m.forward(1.5) - 1.5).abs() < 1e-12);
        assert!((m.inverse(0.25).unwrap() - 0.25).abs() < 1e-12);
        let m = build_monotone(&tf("exp(t)"), (0.0, 2.0)).unwrap();
        assert!((m.forward(1.0) - (std::f64::consts::E - 1.0)).abs() < 1e-9);
        for t in grid(0.0, 2.0, 57) {
            assert!((m.inverse(m.forward(t)).unwrap() - t).abs() <= 1e-9);
        }
    }

    #[test]
    fn monotone_rejects_vanishing_xi() {
        assert!(matches!(
            build_monotone(&tf("sin(t)"), (0.0, 2.0)),
            Err(TfunError::NonMonotone { .. })
        ));
        assert!(matches!(
            build_monotone(&tf("cos(t)"), (0.0, 2.0)),
            Err(TfunError::NonMonotone { .. })
        ));
    }

    #[test]
    fn decreasing_map_inverts() {
        let m = build_monotone(&tf("-(1 + t^2)"), (0.0, 1.5)).unwrap();
        assert!(!m.is_increasing());
        for t in grid(0.0, 1.5, 31) {
            assert!((m.inverse(m.forward(t)).unwrap() - t).abs() <= 1e-9);
        }
    }

    #[test]
    fn pulled_function_has_chain_rule_derivative() {
        let m = build_monotone(&tf("2 + sin(t)"), (0.0, 3.0)).unwrap();
        let f = tf("t^2");
        let g = m.pull(&f);
        let tau = 2.0;
        let t = m.inverse(tau).unwrap();
        assert!((g.value(tau) - t * t).abs() < 1e-9);
        let expect = 2.0 * t / (2.0 + t.sin());
        assert!((g.deriv(tau) - expect).abs() < 1e-9);
    }

    #[test]
    fn ode_backed_component_derivative_is_rhs() {
        // y' = -y, y(0) = 1
        let sys = OdeSystem::solve(
            vec![-Expr::slot(0)],
            &[1.0],
            0.0,
            2.0,
            &IntegratorConfig::default(),
        )
        .unwrap();
        let y = sys.component(0);
        assert!((y.value(1.0) - (-1.0f64).exp()).abs() < 1e-9);
        assert!((y.deriv(1.0) + (-1.0f64).exp()).abs() < 1e-9);
        assert!((y.derivative().deriv(1.0) - (-1.0f64).exp()).abs() < 1e-9);
        assert!(y.value(2.5).is_nan());
    }
}
