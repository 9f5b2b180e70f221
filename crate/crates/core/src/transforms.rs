//! Named transformation pipelines: a flow element, a reparametrisation
//! `dtau = xi dt` with `xi = alpha / delta`, and the target equation in `tau`.
//!
//! In every pipeline `xi` equals the `Y1` coefficient of the pushed-forward
//! field, so a source state `(x, v)` at time `t` maps to the target state
//! `apply_flow(g, t, (x, v))` at `tau(t)`.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::models::{GambierSpec, KS2Spec, MPSpec, Model, ModelError, OdeModel, SecondRiccatiSpec};
use crate::scheme::{new_coefficients, FlowElement, SchemeError};
use crate::tfun::{build_monotone, grid, integral_fn, MonotoneMap, TfunError, TimeFn, CERT_GRID};

/// Threshold for "identically zero" on the certification grid.
pub const ZERO_TOL: f64 = 1e-12;
/// Threshold for recorded condition residuals.
pub const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("no reduction exists: {0}")]
    Unreducible(String),
    #[error("condition `{condition}` fails with residual {residual:e}")]
    ConditionFailed { condition: String, residual: f64 },
    #[error("consistency residual `{name}` = {value:e} exceeds tolerance")]
    Residual { name: String, value: f64 },
    #[error(transparent)]
    Tfun(#[from] TfunError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("state outside the domain of the map: {0}")]
    Domain(String),
}

fn condition(name: &str, residual: f64, tol: f64) -> Result<(), TransformError> {
    if residual <= tol {
        Ok(())
    } else {
        Err(TransformError::ConditionFailed {
            condition: name.into(),
            residual,
        })
    }
}

fn check_span(span: (f64, f64)) -> Result<(), TransformError> {
    if span.0 != 0.0 || !(span.1 > 0.0) || !span.1.is_finite() {
        return Err(TfunError::InvalidSpan(format!(
            "span must be [0, T] with T > 0, got {span:?}"
        ))
        .into());
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub enum Target {
    Gambier(GambierSpec),
    KS2(KS2Spec),
    SecondRiccati(SecondRiccatiSpec),
}

impl Target {
    pub fn model(&self) -> Model {
        match self {
            Target::Gambier(s) => Model::Gambier(s.clone()),
            Target::KS2(s) => Model::KS2(s.clone()),
            Target::SecondRiccati(s) => Model::SecondRiccati(s.clone()),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Target::Gambier(_) => "gambier",
            Target::KS2(_) => "ks2",
            Target::SecondRiccati(_) => "second_riccati",
        }
    }
}

#[derive(Clone, Debug)]
pub struct TransformResult {
    pub name: &'static str,
    pub flow: FlowElement,
    pub reparam: Arc<MonotoneMap>,
    /// Target equation with `tau` as independent variable.
    pub target: Target,
    /// Target coefficient functions of `t` by name, before composing with
    /// the inverse reparametrisation.
    pub target_in_t: BTreeMap<&'static str, TimeFn>,
    pub residuals: BTreeMap<String, f64>,
}

impl TransformResult {
    /// `(tau, target state)` for the source state `(x, v)` at time `t`.
    pub fn map_state(&self, t: f64, state: (f64, f64)) -> (f64, (f64, f64)) {
        (self.reparam.forward(t), self.flow.apply(t, state))
    }

    /// Source state at `t` recovered from the target state at `tau(t)`.
    pub fn unmap_state(&self, t: f64, state: (f64, f64)) -> (f64, f64) {
        self.flow.inverse().apply(t, state)
    }

    pub fn report(&self, samples: usize) -> TransformReport {
        let flow = self.flow.sample(samples);
        let (_, t_end) = self.reparam.t_span();
        let target = self
            .target_in_t
            .iter()
            .map(|(k, f)| (k.to_string(), f.is_closed_form().then(|| f.to_string())))
            .collect();
        let constants = match &self.target {
            Target::Gambier(s) => BTreeMap::from([
                ("sigma".to_string(), s.sigma),
                ("n".to_string(), s.n as f64),
            ]),
            Target::KS2(s) => BTreeMap::from([("c0".to_string(), s.c0)]),
            Target::SecondRiccati(_) => BTreeMap::new(),
        };
        TransformReport {
            transform: self.name,
            family: self.target.family(),
            span: [0.0, t_end],
            tau_end: self.reparam.forward(t_end),
            flow,
            target_coefficients_in_t: target,
            constants,
            residuals: self.residuals.clone(),
        }
    }
}

/// Serializable summary of a [`TransformResult`].
#[derive(Clone, Debug, Serialize)]
pub struct TransformReport {
    pub transform: &'static str,
    pub family: &'static str,
    pub span: [f64; 2],
    pub tau_end: f64,
    /// Rows `[t, alpha, gamma, delta]`.
    pub flow: Vec<[f64; 4]>,
    /// Closed-form coefficient expressions in `t`, `null` when backed by a
    /// numeric solution.
    pub target_coefficients_in_t: BTreeMap<String, Option<String>>,
    pub constants: BTreeMap<String, f64>,
    pub residuals: BTreeMap<String, f64>,
}

/// `f(t(tau))`, skipping the composition when `tau = t`.
fn pull(map: &Arc<MonotoneMap>, f: &TimeFn) -> TimeFn {
    if map.xi().as_const() == Some(1.0) {
        f.clone()
    } else {
        map.pull(f)
    }
}

fn sup_on(span: (f64, f64), f: impl Fn(f64) -> f64) -> f64 {
    grid(span.0, span.1, CERT_GRID)
        .map(|t| f(t).abs())
        .fold(0.0, f64::max)
}

fn is_zero_on(f: &TimeFn, span: (f64, f64)) -> bool {
    f.sup_abs(span.0, span.1, CERT_GRID) <= ZERO_TOL
}

/// Checks, on the grid, that the closed-form pushforward coefficients divided
/// by `xi` equal `expected(t)`; each entry of `expected` is `(k, name, f)`
/// with `k` the 0-based basis index.
/// `(index into c1..c11, label, expected value in t)`.
type ExpectedCoef<'a> = (usize, &'a str, &'a dyn Fn(f64) -> f64);

fn scheme_residuals(
    spec: &GambierSpec,
    flow: &FlowElement,
    span: (f64, f64),
    expected: &[ExpectedCoef],
) -> Result<BTreeMap<String, f64>, TransformError> {
    let mut out = BTreeMap::new();
    for &(k, name, f) in expected {
        let r = sup_on(span, |t| {
            let c = new_coefficients(&spec.jet(t), &flow.jet(t));
            let want = f(t);
            (c[k] / c[0] - want) / want.abs().max(1.0)
        });
        if !(r <= RESIDUAL_TOL) {
            return Err(TransformError::Residual {
                name: name.into(),
                value: r,
            });
        }
        out.insert(name.to_string(), r);
    }
    let r = sup_on(span, |t| new_coefficients(&spec.jet(t), &flow.jet(t))[10]);
    if !(r <= RESIDUAL_TOL) {
        return Err(TransformError::Residual {
            name: "Y11 coefficient".into(),
            value: r,
        });
    }
    out.insert("Y11 coefficient".into(), r);
    Ok(out)
}

/// Removes `a1` by the flow `alpha = exp(int n a1/(n-2))`, `gamma = n a1/(n-2)`,
/// `delta = 1`, with `dtau = alpha dt`.
pub fn reduce_a1(spec: &GambierSpec, span: (f64, f64)) -> Result<TransformResult, TransformError> {
    check_span(span)?;
    let a1_zero = is_zero_on(&spec.a1, span);
    if spec.n == 2 && !a1_zero {
        return Err(TransformError::Unreducible(
            "the a1-removing transformation does not exist for n=2".into(),
        ));
    }
    let n = spec.n as f64;
    let (alpha, gamma) = if a1_zero {
        (TimeFn::constant(1.0), TimeFn::constant(0.0))
    } else {
        let c = n / (n - 2.0);
        let gamma = spec.a1.scale(c);
        (integral_fn(&gamma, span.1)?.exp(), gamma)
    };
    let flow = FlowElement::new(alpha.clone(), gamma, TimeFn::constant(1.0), span)?;
    let reparam = build_monotone(&alpha, span)?;
    let alpha_sq = alpha.clone() * alpha.clone();
    let (a0_t, a2_t) = if a1_zero {
        (spec.a0.clone(), spec.a2.clone())
    } else {
        let a1 = &spec.a1;
        let shift = a1.clone() * a1.clone() * ((n - 1.0) / ((n - 2.0) * (n - 2.0)))
            - a1.derivative() * (1.0 / (n - 2.0));
        (
            spec.a0.clone() / alpha_sq.clone(),
            (spec.a2.clone() - shift) / alpha_sq,
        )
    };
    let target = GambierSpec::new(
        pull(&reparam, &a0_t),
        TimeFn::constant(0.0),
        pull(&reparam, &a2_t),
        spec.sigma,
        spec.n,
    )?;
    let (a0c, a2c) = (a0_t.clone(), a2_t.clone());
    let sigma = spec.sigma;
    let residuals = scheme_residuals(
        spec,
        &flow,
        span,
        &[
            (1, "Y2", &|_| (n - 1.0) / n),
            (2, "Y3", &|t| a0c.value(t) * (n + 2.0) / n),
            (3, "Y4", &|_| 0.0),
            (4, "Y5", &|_| -sigma * (n - 2.0) / n),
            (5, "Y6", &|t| -a0c.value(t).powi(2) / n),
            (6, "Y7", &|t| a0c.deriv(t) / alpha.value(t)),
            (7, "Y8", &|t| {
                a2c.value(t) * n - 2.0 * a0c.value(t) * sigma / n
            }),
            (8, "Y9", &|_| 0.0),
            (9, "Y10", &|_| -sigma * sigma / n),
        ],
    )?;
    Ok(TransformResult {
        name: "reduce_a1",
        flow,
        reparam,
        target: Target::Gambier(target),
        target_in_t: BTreeMap::from([("a0", a0_t), ("a1", TimeFn::constant(0.0)), ("a2", a2_t)]),
        residuals,
    })
}

/// Residuals of `n = -2`, `sigma = 0` and `a0 a1 = da0/dt`.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Ks2Conditions {
    pub n_plus_2: f64,
    pub sigma: f64,
    pub a0a1_minus_da0: f64,
}

impl Ks2Conditions {
    pub fn passes(&self) -> bool {
        self.n_plus_2 <= RESIDUAL_TOL
            && self.sigma <= RESIDUAL_TOL
            && self.a0a1_minus_da0 <= RESIDUAL_TOL
    }

    fn require(&self) -> Result<(), TransformError> {
        condition("n = -2", self.n_plus_2, RESIDUAL_TOL)?;
        condition("sigma = 0", self.sigma, RESIDUAL_TOL)?;
        condition("a0*a1 = da0/dt", self.a0a1_minus_da0, RESIDUAL_TOL)
    }
}

pub fn check_ks2_conditions(spec: &GambierSpec, span: (f64, f64)) -> Ks2Conditions {
    Ks2Conditions {
        n_plus_2: (spec.n as f64 + 2.0).abs(),
        sigma: spec.sigma.abs(),
        a0a1_minus_da0: sup_on(span, |t| {
            spec.a0.value(t) * spec.a1.value(t) - spec.a0.deriv(t)
        }),
    }
}

fn check_alpha(alpha: &TimeFn, span: (f64, f64)) -> Result<(), TransformError> {
    condition("alpha(0) = 1", (alpha.value(0.0) - 1.0).abs(), ZERO_TOL)?;
    let worst = grid(span.0, span.1, CERT_GRID)
        .map(|t| alpha.value(t))
        .fold(f64::INFINITY, |m, a| {
            if a.is_nan() {
                f64::NEG_INFINITY
            } else {
                m.min(a)
            }
        });
    if !(worst > 0.0) {
        return Err(TransformError::ConditionFailed {
            condition: "alpha > 0".into(),
            residual: -worst,
        });
    }
    Ok(())
}

/// Maps a Gambier equation satisfying [`check_ks2_conditions`] to a
/// Kummer–Schwarz equation; `alpha` defaults to 1.
pub fn to_ks2(
    spec: &GambierSpec,
    alpha: Option<&TimeFn>,
    span: (f64, f64),
) -> Result<TransformResult, TransformError> {
    check_span(span)?;
    check_ks2_conditions(spec, span).require()?;
    let alpha = alpha.cloned().unwrap_or_else(|| TimeFn::constant(1.0));
    check_alpha(&alpha, span)?;
    let a00 = spec.a00();
    let a0 = spec.a0.clone();
    let delta = alpha.clone() * alpha.clone() * a00 / a0.clone();
    let gamma = alpha.clone() * alpha.derivative() * a00 / a0.clone();
    let flow = FlowElement::new(alpha.clone(), gamma.clone(), delta.clone(), span)?;
    let xi = a0.clone() / (alpha.clone() * a00);
    let reparam = build_monotone(&xi, span)?;
    let omega = ks2_frequency(spec, &alpha, &gamma, &delta);
    let c0 = -a00 * a00 / 4.0;
    let om = omega.clone();
    let residuals = scheme_residuals(
        spec,
        &flow,
        span,
        &[
            (1, "Y2", &|_| 1.5),
            (2, "Y3", &|_| 0.0),
            (3, "Y4", &|_| 0.0),
            (5, "Y6", &|_| -2.0 * c0),
            (6, "Y7", &|_| 0.0),
            (7, "Y8", &|t| 2.0 * om.value(t)),
        ],
    )?;
    Ok(TransformResult {
        name: "to_ks2",
        flow,
        target: Target::KS2(KS2Spec {
            c0,
            omega: pull(&reparam, &omega),
        }),
        reparam,
        target_in_t: BTreeMap::from([("omega", omega)]),
        residuals,
    })
}

/// `omega = -(delta^2 / (2 alpha^2)) (2 a2 + gamma a0'/(a0 delta) - gamma^2/(2 delta^2)
/// - gamma'/delta + gamma delta'/delta^2)`.
fn ks2_frequency(spec: &GambierSpec, alpha: &TimeFn, gamma: &TimeFn, delta: &TimeFn) -> TimeFn {
    let a0 = &spec.a0;
    let d2 = delta.clone() * delta.clone();
    let inner = spec.a2.clone() * 2.0
        + gamma.clone() * a0.derivative() / (a0.clone() * delta.clone())
        - gamma.clone() * gamma.clone() / (d2.clone() * 2.0)
        - gamma.derivative() / delta.clone()
        + gamma.clone() * delta.derivative() / d2.clone();
    -(d2 / (alpha.clone() * alpha.clone() * 2.0) * inner)
}

/// `x = 1/y^2`: Kummer–Schwarz to Milne–Pinney with `kcoef = -c0`.
pub fn ks2_to_mp(ks2: &KS2Spec) -> Result<MPSpec, TransformError> {
    Ok(MPSpec::new(ks2.omega.clone(), -ks2.c0)?)
}

/// `(x, v) -> (x^(-1/2), -v x^(-3/2) / 2)`.
pub fn ks2_state_to_mp(state: (f64, f64)) -> Result<(f64, f64), TransformError> {
    let (x, v) = state;
    if !(x > 0.0) {
        return Err(TransformError::Domain(format!("x = {x} must be positive")));
    }
    let y = x.powf(-0.5);
    Ok((y, -0.5 * v * y * y * y))
}

/// `(y, y') -> (y^-2, -2 y' / y^3)`.
pub fn mp_state_to_ks2(state: (f64, f64)) -> Result<(f64, f64), TransformError> {
    let (y, p) = state;
    if !(y > 0.0) {
        return Err(TransformError::Domain(format!("y = {y} must be positive")));
    }
    Ok((1.0 / (y * y), -2.0 * p / (y * y * y)))
}

/// Maps a Gambier equation with `n = 1`, `a0(0) = -1`, `sigma = 0` and
/// `a0 < 0` to the second-order Riccati form
/// `x'' = -(3 x x' + x^3) + g x + h (x^2 + x')`; `alpha` defaults to 1.
///
/// `g` is the `Y8` (that is `x d/dv`) coefficient and `h` the common
/// coefficient of `Y4` and `Y7`, both divided by `xi`.
pub fn to_second_riccati(
    spec: &GambierSpec,
    alpha: Option<&TimeFn>,
    span: (f64, f64),
) -> Result<TransformResult, TransformError> {
    check_span(span)?;
    condition("n = 1", (spec.n as f64 - 1.0).abs(), 0.0)?;
    condition("a0(0) = -1", (spec.a00() + 1.0).abs(), 0.0)?;
    condition("sigma = 0", spec.sigma.abs(), 0.0)?;
    let worst = grid(span.0, span.1, CERT_GRID)
        .map(|t| spec.a0.value(t))
        .fold(f64::NEG_INFINITY, f64::max);
    if !(worst < 0.0) {
        return Err(TransformError::ConditionFailed {
            condition: "a0 < 0".into(),
            residual: worst,
        });
    }
    let alpha = alpha.cloned().unwrap_or_else(|| TimeFn::constant(1.0));
    check_alpha(&alpha, span)?;
    let a0 = spec.a0.clone();
    let a1 = spec.a1.clone();
    let da = alpha.derivative();
    let delta = -(alpha.clone() * alpha.clone() / a0.clone());
    let gamma = delta.clone() * da.clone() / alpha.clone();
    let flow = FlowElement::new(alpha.clone(), gamma, delta, span)?;
    let xi = -(a0.clone() / alpha.clone());
    let reparam = build_monotone(&xi, span)?;
    // coefficients of Y1, Y4 and Y8 after the flow
    let c1 = xi;
    let c4 = a1.clone() - a0.derivative() / a0.clone() + da.clone() * 3.0 / alpha.clone();
    let c8 = -(spec.a2.clone() * alpha.clone() / a0.clone())
        + a1 * da.clone() / a0.clone()
        + da.clone() * da.clone() * 2.0 / (a0.clone() * alpha.clone())
        - da.derivative() / a0;
    let g = c8 / c1.clone();
    let h = c4 / c1;
    let (gc, hc) = (g.clone(), h.clone());
    let residuals = scheme_residuals(
        spec,
        &flow,
        span,
        &[
            (1, "Y2", &|_| 0.0),
            (2, "Y3", &|_| -3.0),
            (3, "Y4", &|t| hc.value(t)),
            (5, "Y6", &|_| -1.0),
            (6, "Y7", &|t| hc.value(t)),
            (7, "Y8", &|t| gc.value(t)),
            (8, "Y9", &|_| 0.0),
        ],
    )?;
    Ok(TransformResult {
        name: "to_second_riccati",
        flow,
        target: Target::SecondRiccati(SecondRiccatiSpec {
            f: TimeFn::constant(0.0),
            g: pull(&reparam, &g),
            h: pull(&reparam, &h),
        }),
        reparam,
        target_in_t: BTreeMap::from([("f", TimeFn::constant(0.0)), ("g", g), ("h", h)]),
        residuals,
    })
}

/// Integrates the source from `(x0, v0)` on `[0, t_end]` and the target from
/// the mapped initial state, and returns the sup-norm gap between the mapped
/// source and the target trajectory on `tau` samples.
pub fn transport_gap(
    res: &TransformResult,
    source: &GambierSpec,
    state0: (f64, f64),
    t_end: f64,
    samples: usize,
    cfg: &crate::odeint::IntegratorConfig,
) -> Result<f64, TransformError> {
    let src = source
        .integrate(0.0, &[state0.0, state0.1], t_end, cfg)
        .map_err(|e| TransformError::Domain(e.to_string()))?;
    if !src.completed() {
        return Err(TransformError::Domain(format!(
            "source stopped at t = {}",
            src.t_end()
        )));
    }
    let (tau0, s0) = res.map_state(0.0, state0);
    let tau_end = res.reparam.forward(t_end);
    let tgt = res
        .target
        .model()
        .integrate(tau0, &[s0.0, s0.1], tau_end, cfg)
        .map_err(|e| TransformError::Domain(e.to_string()))?;
    if !tgt.completed() {
        return Err(TransformError::Domain(format!(
            "target stopped at tau = {}",
            tgt.t_end()
        )));
    }
    let mut gap: f64 = 0.0;
    for t in grid(0.0, t_end, samples) {
        let s = src.eval(t).expect("covered");
        let (tau, m) = res.map_state(t, (s[0], s[1]));
        let d = tgt
            .eval(tau)
            .ok_or_else(|| TransformError::Domain(format!("tau = {tau} not covered")))?;
        gap = gap.max((m.0 - d[0]).abs()).max((m.1 - d[1]).abs());
    }
    Ok(gap)
}
