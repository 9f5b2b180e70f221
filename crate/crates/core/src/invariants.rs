//! Constants of motion for Gambier equations that map to Kummer–Schwarz
//! form, and their numerical certification.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::models::{GambierSpec, RiccatiSpec};
use crate::odeint::{IntegratorConfig, Trajectory};
use crate::scheme::{FlowElement, SchemeError};
use crate::tfun::{grid, integral_fn, Expr, OdeSystem, TfunError, TimeFn, CERT_GRID};
use crate::transforms::{check_ks2_conditions, Ks2Conditions, RESIDUAL_TOL};

/// Tolerance on the residual of the equation for `alpha`.
pub const EQR_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvariantError {
    #[error("condition `{condition}` fails with residual {residual:e}")]
    ConditionFailed { condition: String, residual: f64 },
    #[error(transparent)]
    Tfun(#[from] TfunError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error("invariant undefined at t = {t}: {reason}")]
    Domain { t: f64, reason: String },
}

fn failed(condition: &str, residual: f64) -> InvariantError {
    InvariantError::ConditionFailed {
        condition: condition.into(),
        residual,
    }
}

fn sup_on(span: (f64, f64), f: impl Fn(f64) -> f64) -> f64 {
    grid(span.0, span.1, CERT_GRID)
        .map(|t| f(t).abs())
        .fold(
            0.0,
            |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v) },
        )
}

fn require_quasi_lie(
    spec: &GambierSpec,
    span: (f64, f64),
) -> Result<Ks2Conditions, InvariantError> {
    let c = check_ks2_conditions(spec, span);
    for (name, r) in [
        ("n = -2", c.n_plus_2),
        ("sigma = 0", c.sigma),
        ("a0*a1 = da0/dt", c.a0a1_minus_da0),
    ] {
        if !(r <= RESIDUAL_TOL) {
            return Err(failed(name, r));
        }
    }
    Ok(c)
}

type Evaluator = dyn Fn(f64, f64, f64) -> f64 + Send + Sync;

/// A function `F(t, x, dx/dt)` claimed to be constant along solutions.
#[derive(Clone)]
pub struct InvariantFn {
    pub name: &'static str,
    pub lambda: Option<f64>,
    pub flow: Option<FlowElement>,
    eval: Arc<Evaluator>,
}

impl fmt::Debug for InvariantFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InvariantFn")
            .field("name", &self.name)
            .field("lambda", &self.lambda)
            .finish()
    }
}

impl InvariantFn {
    pub fn new(
        name: &'static str,
        lambda: Option<f64>,
        eval: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        InvariantFn {
            name,
            lambda,
            flow: None,
            eval: Arc::new(eval),
        }
    }

    pub fn eval(&self, t: f64, x: f64, xdot: f64) -> f64 {
        (self.eval)(t, x, xdot)
    }
}

/// `-a0(0)^2 x + (a0(0)^2/a0^2) xdot^2/x^3 + 4 lambda/x`, valid when
/// `a2 = -lambda a0^2/a0(0)^2`.
pub fn easy_invariant(
    spec: &GambierSpec,
    lambda: f64,
    span: (f64, f64),
) -> Result<InvariantFn, InvariantError> {
    require_quasi_lie(spec, span)?;
    let a00 = spec.a00();
    let k = a00 * a00;
    let r = sup_on(span, |t| {
        spec.a2.value(t) + lambda * spec.a0.value(t).powi(2) / k
    });
    if !(r <= RESIDUAL_TOL) {
        return Err(failed("a2 = -lambda*a0^2/a0(0)^2", r));
    }
    let a0 = spec.a0.clone();
    Ok(InvariantFn::new("easy", Some(lambda), move |t, x, xd| {
        let a = a0.value(t);
        -k * x + k / (a * a) * xd * xd / (x * x * x) + 4.0 * lambda / x
    }))
}

/// Right-hand side of the `alpha` equation as a first-order system in
/// `(log alpha, d log alpha/dt)`.
fn eqr_rhs(spec: &GambierSpec, lambda: f64) -> Vec<Expr> {
    let a00 = spec.a00();
    let a0 = spec.a0.expr().clone();
    let da0 = spec.a0.deriv_expr().clone();
    let a2 = spec.a2.expr().clone();
    let (l, w) = (Expr::slot(0), Expr::slot(1));
    let c = |v: f64| Expr::constant(v);
    let forcing = Expr::div(
        Expr::mul(
            c(2.0 * lambda / (a00 * a00)),
            Expr::mul(a0.clone(), a0.clone()),
        ),
        Expr::exp(Expr::mul(c(2.0), l)),
    );
    let dw = Expr::add(
        Expr::add(forcing, Expr::mul(c(2.0), a2)),
        Expr::sub(
            Expr::mul(Expr::div(da0, a0), w.clone()),
            Expr::mul(c(0.5), Expr::mul(w.clone(), w.clone())),
        ),
    );
    vec![w, dw]
}

/// Positive solution `alpha` of the `alpha` equation with `alpha(0) = 1`
/// and initial logarithmic slope `w0`, integrated on `span`.
pub fn solve_alpha_eqr(
    spec: &GambierSpec,
    lambda: f64,
    w0: f64,
    span: (f64, f64),
) -> Result<TimeFn, InvariantError> {
    require_quasi_lie(spec, span)?;
    if span.0 != 0.0 || !(span.1 > 0.0) {
        return Err(TfunError::InvalidSpan(format!("span must be [0, T], got {span:?}")).into());
    }
    let sys = OdeSystem::solve(
        eqr_rhs(spec, lambda),
        &[0.0, w0],
        0.0,
        span.1,
        &IntegratorConfig::default(),
    )?;
    Ok(sys.component(0).exp())
}

/// Sup over the grid of the residual of the `alpha` equation.
pub fn eqr_residual(spec: &GambierSpec, lambda: f64, alpha: &TimeFn, span: (f64, f64)) -> f64 {
    let a00 = spec.a00();
    let da = alpha.derivative();
    sup_on(span, |t| {
        let (a, ad, add) = (alpha.value(t), da.value(t), da.deriv(t));
        let w = ad / a;
        let lhs = add / a - w * w;
        let a0 = spec.a0.value(t);
        let rhs = 2.0 * lambda * a0 * a0 / (a00 * a00 * a * a)
            + 2.0 * spec.a2.value(t)
            + spec.a0.deriv(t) / a0 * w
            - 0.5 * w * w;
        (lhs - rhs) / rhs.abs().max(1.0)
    })
}

/// `-a0(0)^2 xb + vb^2/xb^3 + 4 lambda/xb` with `xb = alpha x`,
/// `vb = delta xdot + gamma x`, `delta = alpha^2 a0(0)/a0`,
/// `gamma = alpha a0(0) alpha'/a0`.
pub fn general_invariant(
    spec: &GambierSpec,
    lambda: f64,
    alpha: &TimeFn,
    span: (f64, f64),
) -> Result<InvariantFn, InvariantError> {
    require_quasi_lie(spec, span)?;
    let r = eqr_residual(spec, lambda, alpha, span);
    if !(r <= EQR_TOL) {
        return Err(failed("alpha equation", r));
    }
    let a00 = spec.a00();
    let a0 = spec.a0.clone();
    let delta = alpha.clone() * alpha.clone() * a00 / a0.clone();
    let gamma = alpha.clone() * alpha.derivative() * a00 / a0;
    let flow = FlowElement::new(alpha.clone(), gamma, delta, span)?;
    let f = flow.clone();
    let mut inv = InvariantFn::new("general", Some(lambda), move |t, x, xd| {
        let (xb, vb) = f.apply(t, (x, xd));
        -a00 * a00 * xb + vb * vb / (xb * xb * xb) + 4.0 * lambda / xb
    });
    inv.flow = Some(flow);
    Ok(inv)
}

/// `dw/dt = 2 a2 + (a0'/a0) w - w^2/2`, whose solutions lift to solutions
/// of the `alpha` equation with `lambda = 0` through `alpha = exp(int w)`.
pub fn lambda0_riccati(
    spec: &GambierSpec,
    span: (f64, f64),
) -> Result<RiccatiSpec, InvariantError> {
    require_quasi_lie(spec, span)?;
    Ok(RiccatiSpec {
        b1: spec.a2.scale(2.0),
        b2: spec.a0.derivative() / spec.a0.clone(),
        b3: TimeFn::constant(-0.5),
    })
}

/// Solution of `dx/dt = b1 + b2 x + b3 x^2` with `x(0) = x0` on `[0, end]`,
/// as a function whose derivative is the right-hand side.
pub fn riccati_solution(r: &RiccatiSpec, x0: f64, end: f64) -> Result<TimeFn, InvariantError> {
    let x = Expr::slot(0);
    let rhs = Expr::add(
        r.b1.expr().clone(),
        Expr::add(
            Expr::mul(r.b2.expr().clone(), x.clone()),
            Expr::mul(r.b3.expr().clone(), Expr::mul(x.clone(), x)),
        ),
    );
    let sys = OdeSystem::solve(vec![rhs], &[x0], 0.0, end, &IntegratorConfig::default())?;
    Ok(sys.component(0))
}

/// `alpha = exp(int_0^t w)`.
pub fn lift_to_alpha(w: &TimeFn, end: f64) -> Result<TimeFn, InvariantError> {
    Ok(integral_fn(w, end)?.exp())
}

/// `(1/4) xdot^2/(x^3 a0^2) - (1/(2x) + x/4)` for the family `2 a2 = a0^2 > 0`.
pub fn i2g(spec: &GambierSpec, span: (f64, f64)) -> Result<InvariantFn, InvariantError> {
    require_quasi_lie(spec, span)?;
    let r = sup_on(span, |t| {
        let a0 = spec.a0.value(t);
        (2.0 * spec.a2.value(t) - a0 * a0) / (a0 * a0).max(1.0)
    });
    if !(r <= RESIDUAL_TOL) {
        return Err(failed("2*a2 = a0^2", r));
    }
    let a0 = spec.a0.clone();
    Ok(InvariantFn::new("i2g", None, move |t, x, xd| {
        let a = a0.value(t);
        0.25 * xd * xd / (x * x * x * a * a) - (0.5 / x + 0.25 * x)
    }))
}

/// `(1/2)[ydot^2 - (y^2/2 + 1/(4 y^2))]`, conserved by
/// `y'' = y/2 - 1/(4 y^3)`.
pub fn i_mp() -> InvariantFn {
    InvariantFn::new("i_mp", None, |_, y, yd| {
        0.5 * (yd * yd - (0.5 * y * y + 0.25 / (y * y)))
    })
}

/// Max over accepted steps of `|F(t) - F(t0)|`; state components 0 and 1
/// are `(x, dx/dt)`.
pub fn drift(f: &InvariantFn, traj: &Trajectory) -> Result<f64, InvariantError> {
    let mut f0 = None;
    let mut worst: f64 = 0.0;
    for (&t, s) in traj.times().iter().zip(traj.states()) {
        let v = f.eval(t, s[0], s[1]);
        if !v.is_finite() {
            return Err(InvariantError::Domain {
                t,
                reason: format!("{} is not finite at state {:?}", f.name, s),
            });
        }
        let base = *f0.get_or_insert(v);
        worst = worst.max((v - base).abs());
    }
    Ok(worst)
}

/// JSON summary for the `invariant` command.
#[derive(Clone, Debug, Serialize)]
pub struct InvariantReport {
    pub invariant: &'static str,
    pub lambda: Option<f64>,
    pub conditions: Option<Ks2Conditions>,
    pub initial_value: f64,
    pub drift: f64,
    pub steps: usize,
    pub trajectory_ref: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::OdeModel;

    fn spec(a0: &str, a1: &str, a2: &str) -> GambierSpec {
        GambierSpec::parse(a0, a1, a2, 0.0, -2).unwrap()
    }

    fn tf(s: &str) -> TimeFn {
        TimeFn::parse(s).unwrap()
    }

    #[test]
    fn easy_invariant_constant_coefficients() {
        let s = spec("1.5", "0", "0");
        let f = easy_invariant(&s, 0.0, (0.0, 1.0)).unwrap();
        let (x, xd) = (0.7, 0.3);
        assert!((f.eval(0.4, x, xd) - (-2.25 * x + xd * xd / (x * x * x))).abs() < 1e-14);
        assert!(easy_invariant(&s, 0.3, (0.0, 1.0)).is_err());
    }

    #[test]
    fn easy_invariant_is_conserved() {
        let lambda = 0.3;
        let s = spec("-2*exp(sin(t))", "cos(t)", "-0.3*exp(2*sin(t))");
        let f = easy_invariant(&s, lambda, (0.0, 1.0)).unwrap();
        let traj = s
            .integrate(0.0, &[0.3, -0.5], 1.0, &IntegratorConfig::default())
            .unwrap();
        assert!(traj.completed());
        assert!(drift(&f, &traj).unwrap() < 1e-7);
        // same formula with a perturbed lambda drifts
        let a0 = s.a0.clone();
        let wrong = InvariantFn::new("control", Some(lambda + 0.1), move |t, x, xd| {
            let a = a0.value(t);
            -4.0 * x + 4.0 / (a * a) * xd * xd / (x * x * x) + 4.0 * (lambda + 0.1) / x
        });
        assert!(drift(&wrong, &traj).unwrap() > 1e-3);
    }

    #[test]
    fn alpha_is_one_when_easy_case_holds() {
        let s = spec("2", "0", "-0.6");
        let alpha = solve_alpha_eqr(&s, 0.6, 0.0, (0.0, 1.0)).unwrap();
        for t in grid(0.0, 1.0, 21) {
            assert!((alpha.value(t) - 1.0).abs() < 1e-9);
        }
        assert_eq!(alpha.value(0.0), 1.0);
    }

    #[test]
    fn general_invariant_for_lambda_zero() {
        let s = spec("1 + t/2", "1/(2 + t)", "0.3 + t/5");
        let alpha = solve_alpha_eqr(&s, 0.0, 0.0, (0.0, 1.0)).unwrap();
        assert!(eqr_residual(&s, 0.0, &alpha, (0.0, 1.0)) <= 1e-8);
        let f = general_invariant(&s, 0.0, &alpha, (0.0, 1.0)).unwrap();
        let (x0, v0) = (0.5, 0.2);
        assert!((f.eval(0.0, x0, v0) - (-x0 + v0 * v0 / x0.powi(3))).abs() < 1e-14);
        let traj = s
            .integrate(0.0, &[x0, v0], 1.0, &IntegratorConfig::default())
            .unwrap();
        assert!(drift(&f, &traj).unwrap() < 1e-7);
        // a mismatched alpha is not conserved
        let wrong = general_invariant(&s, 0.0, &TimeFn::constant(1.0), (0.0, 1.0));
        assert!(matches!(wrong, Err(InvariantError::ConditionFailed { .. })));
    }

    #[test]
    fn lambda0_riccati_lifts() {
        let s = spec("1 + t/2", "1/(2 + t)", "0.3 + t/5");
        let r = lambda0_riccati(&s, (0.0, 1.0)).unwrap();
        let w = riccati_solution(&r, 0.1, 1.0).unwrap();
        let alpha = lift_to_alpha(&w, 1.0).unwrap();
        assert!(eqr_residual(&s, 0.0, &alpha, (0.0, 1.0)) <= 1e-8);
        let c = spec("3", "0", "0");
        let r = lambda0_riccati(&c, (0.0, 1.0)).unwrap();
        assert_eq!(r.b2.value(0.5), 0.0);
        let w = riccati_solution(&r, 0.0, 1.0).unwrap();
        assert_eq!(w.value(0.7), 0.0);
    }

    #[test]
    fn i2g_examples() {
        let s = spec("1", "0", "0.5");
        let f = i2g(&s, (0.0, 1.0)).unwrap();
        assert_eq!(f.eval(0.0, 2.0, 0.0), -0.75);
        assert!(i2g(&spec("1", "0", "1"), (0.0, 1.0)).is_err());
    }

    #[test]
    fn i2g_is_a_multiple_of_easy() {
        let s = spec("1.5*exp(t/3)", "1/3", "1.125*exp(2*t/3)");
        let a00: f64 = 1.5;
        let easy = easy_invariant(&s, -a00 * a00 / 2.0, (0.0, 1.0)).unwrap();
        let i = i2g(&s, (0.0, 1.0)).unwrap();
        for &(t, x, xd) in &[(0.1, 0.4, 0.3), (0.8, 1.7, -0.9), (0.5, -0.6, 2.0)] {
            let (a, b) = (easy.eval(t, x, xd), 4.0 * a00 * a00 * i.eval(t, x, xd));
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn i_mp_is_conserved() {
        let mp = crate::models::MPSpec::new(tf("-0.5"), 0.25).unwrap();
        let traj = mp
            .integrate(0.0, &[1.0, 0.2], 1.0, &IntegratorConfig::default())
            .unwrap();
        assert!(drift(&i_mp(), &traj).unwrap() < 1e-9);
    }

    #[test]
    fn drift_of_constant_is_zero() {
        let f = InvariantFn::new("one", None, |_, _, _| 1.0);
        let s = spec("1", "0", "0");
        let traj = s
            .integrate(0.0, &[0.5, 0.0], 0.5, &IntegratorConfig::default())
            .unwrap();
        assert_eq!(drift(&f, &traj).unwrap(), 0.0);
    }
}
