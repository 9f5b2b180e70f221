//! Closed-form solution formulas built from particular solutions: the
//! Riccati superposition rule, Milne–Pinney solutions from oscillators or
//! Riccati solutions, the resulting general solution of Gambier equations
//! with `n = -2`, and the mixed rule for second-order Riccati systems.
//!
//! Every formula comes with a second-order jet, so residuals of the
//! governing equations are computed without numerical differentiation.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::jet::Jet2;
use crate::models::{
    gambier_accel, GambierSpec, LinearThirdOrder, MPSpec, Oscillator, RiccatiSpec,
    SecondRiccatiSpec,
};
use crate::odeint::{OdeError, Trajectory};
use crate::tfun::{grid, Expr, OdeSystem, TfunError, TimeFn, CERT_GRID};
use crate::transforms::{to_second_riccati, Target, TransformError, TransformResult};

/// Threshold below which denominators, gaps and determinants count as zero.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SuperposeError {
    #[error("denominator vanishes ({value:e}) at {at}")]
    DegenerateDenominator { at: f64, value: f64 },
    #[error("radicand is negative ({value:e}) at {at}")]
    NegativeRadicand { at: f64, value: f64 },
    #[error("Wronskian drifts by {0:e}")]
    WronskianDrift(f64),
    #[error("particular solutions {pair:?} come within {gap:e} of each other at {at}")]
    DegenerateSolutions {
        pair: (usize, usize),
        at: f64,
        gap: f64,
    },
    #[error("particular solutions are dependent (determinant {0:e})")]
    DependentSolutions(f64),
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Tfun(#[from] TfunError),
    #[error(transparent)]
    Ode(#[from] OdeError),
}

type JetFn = dyn Fn(f64) -> Jet2 + Send + Sync;

/// A scalar solution given by a formula, with value, first and second
/// derivative at every point of `span`.
#[derive(Clone)]
pub struct FormulaSolution {
    pub name: &'static str,
    pub span: (f64, f64),
    jet: Arc<JetFn>,
}

impl fmt::Debug for FormulaSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FormulaSolution")
            .field("name", &self.name)
            .field("span", &self.span)
            .finish()
    }
}

impl FormulaSolution {
    pub fn new(
        name: &'static str,
        span: (f64, f64),
        jet: impl Fn(f64) -> Jet2 + Send + Sync + 'static,
    ) -> Self {
        FormulaSolution {
            name,
            span,
            jet: Arc::new(jet),
        }
    }

    pub fn jet(&self, s: f64) -> Jet2 {
        (self.jet)(s)
    }

    pub fn value(&self, s: f64) -> f64 {
        self.jet(s).v
    }

    pub fn derivative(&self, s: f64) -> f64 {
        self.jet(s).d1
    }

    /// Sup of `|residual(s, jet)|` over `n` equispaced points; NaN counts as
    /// infinite.
    pub fn sup_residual(&self, n: usize, residual: impl Fn(f64, Jet2) -> f64) -> f64 {
        grid(self.span.0, self.span.1, n)
            .map(|s| residual(s, self.jet(s)).abs())
            .fold(
                0.0,
                |m, r| if r.is_nan() { f64::INFINITY } else { m.max(r) },
            )
    }

    /// CSV with columns `s,value,derivative` on `n` equispaced points.
    pub fn to_csv(&self, names: [&str; 3], n: usize) -> String {
        let mut out = format!("{},{},{}\n", names[0], names[1], names[2]);
        for s in grid(self.span.0, self.span.1, n) {
            let j = self.jet(s);
            out.push_str(&format!("{},{},{}\n", s, j.v, j.d1));
        }
        out
    }
}

fn state_at(traj: &Trajectory, s: f64) -> Vec<f64> {
    traj.eval(s).unwrap_or_else(|| vec![f64::NAN; traj.dim()])
}

fn common_span(trajs: &[&Trajectory]) -> Result<(f64, f64), SuperposeError> {
    let a = trajs
        .iter()
        .map(|t| t.t_start())
        .fold(f64::NEG_INFINITY, f64::max);
    let b = trajs
        .iter()
        .map(|t| t.t_end())
        .fold(f64::INFINITY, f64::min);
    if !(a < b) {
        return Err(SuperposeError::Domain(format!(
            "trajectories share no interval ([{a}, {b}])"
        )));
    }
    Ok((a, b))
}

// Riccati superposition

/// `[u1 (u2 - u3) - k u2 (u3 - u1)] / [(u2 - u3) - k (u3 - u1)]`.
pub fn riccati_sr(u1: f64, u2: f64, u3: f64, k: f64) -> Result<f64, SuperposeError> {
    let den = (u2 - u3) - k * (u3 - u1);
    if !(den.abs() > DEGENERACY_TOL * (1.0 + k.abs())) {
        return Err(SuperposeError::DegenerateDenominator {
            at: f64::NAN,
            value: den,
        });
    }
    Ok((u1 * (u2 - u3) - k * u2 * (u3 - u1)) / den)
}

/// The constant `k` for which [`riccati_sr`] returns `u`.
pub fn riccati_sr_constant(u1: f64, u2: f64, u3: f64, u: f64) -> Result<f64, SuperposeError> {
    let den = (u2 - u) * (u3 - u1);
    if !(den.abs() > DEGENERACY_TOL) {
        return Err(SuperposeError::DegenerateDenominator {
            at: f64::NAN,
            value: den,
        });
    }
    Ok((u1 - u) * (u2 - u3) / den)
}

/// [`riccati_sr`] applied pointwise to three solution trajectories.
pub fn riccati_sr_at(sols: [&Trajectory; 3], k: f64, t: f64) -> Result<f64, SuperposeError> {
    let u = sols.map(|tr| state_at(tr, t)[0]);
    riccati_sr(u[0], u[1], u[2], k).map_err(|e| match e {
        SuperposeError::DegenerateDenominator { value, .. } => {
            SuperposeError::DegenerateDenominator { at: t, value }
        }
        e => e,
    })
}

/// Jet of a solution of `x' = b1 + b2 x + b3 x^2` from its value.
fn riccati_jet(r: &RiccatiSpec, s: f64, x: f64) -> Jet2 {
    let (b1, b2, b3) = (r.b1.value(s), r.b2.value(s), r.b3.value(s));
    let d1 = b1 + b2 * x + b3 * x * x;
    let d2 = r.b1.deriv(s) + r.b2.deriv(s) * x + r.b3.deriv(s) * x * x + (b2 + 2.0 * b3 * x) * d1;
    Jet2::new(x, d1, d2)
}

/// Sup of `|x' - (b1 + b2 x + b3 x^2)|`.
pub fn riccati_residual(sol: &FormulaSolution, r: &RiccatiSpec, n: usize) -> f64 {
    sol.sup_residual(n, |s, j| {
        let (b1, b2, b3) = (r.b1.value(s), r.b2.value(s), r.b3.value(s));
        j.d1 - (b1 + b2 * j.v + b3 * j.v * j.v)
    })
}

/// Riccati superposition as a [`FormulaSolution`] on the common span.
pub fn riccati_sr_solution(
    r: &RiccatiSpec,
    sols: [&Trajectory; 3],
    k: f64,
) -> Result<FormulaSolution, SuperposeError> {
    let span = common_span(&sols)?;
    for t in grid(span.0, span.1, CERT_GRID) {
        riccati_sr_at(sols, k, t)?;
    }
    let r = r.clone();
    let sols: [Trajectory; 3] = sols.map(|t| t.clone());
    Ok(FormulaSolution::new("riccati_sr", span, move |s| {
        let j = sols
            .clone()
            .map(|tr| riccati_jet(&r, s, state_at(&tr, s)[0]));
        let [u1, u2, u3] = j;
        let kc = Jet2::constant(k);
        (u1 * (u2 - u3) - kc * u2 * (u3 - u1)) / ((u2 - u3) - kc * (u3 - u1))
    }))
}

// Milne–Pinney

fn oscillator_jet(osc: &Oscillator, traj: &Trajectory, s: f64) -> Jet2 {
    let st = state_at(traj, s);
    Jet2::new(st[0], st[1], -osc.omega.value(s) * st[0])
}

/// `z1 z2' - z1' z2` at `s`.
pub fn wronskian(z1: &Trajectory, z2: &Trajectory, s: f64) -> f64 {
    let (a, b) = (state_at(z1, s), state_at(z2, s));
    a[0] * b[1] - a[1] * b[0]
}

/// Sup over the common span of `|W(s) - W(s0)|`.
pub fn wronskian_drift(z1: &Trajectory, z2: &Trajectory) -> Result<f64, SuperposeError> {
    let span = common_span(&[z1, z2])?;
    let w0 = wronskian(z1, z2, span.0);
    Ok(grid(span.0, span.1, CERT_GRID)
        .map(|s| (wronskian(z1, z2, s) - w0).abs())
        .fold(0.0, f64::max))
}

/// Sup of `|y'' + omega y + kcoef / y^3|`.
pub fn mp_residual(sol: &FormulaSolution, mp: &MPSpec, n: usize) -> f64 {
    sol.sup_residual(n, |s, j| {
        j.d2 + mp.omega.value(s) * j.v + mp.kcoef / j.v.powi(3)
    })
}

fn positive_on_grid(span: (f64, f64), f: impl Fn(f64) -> f64) -> Result<(), SuperposeError> {
    for s in grid(span.0, span.1, CERT_GRID) {
        let v = f(s);
        if !(v > 0.0) {
            return Err(SuperposeError::NegativeRadicand { at: s, value: v });
        }
    }
    Ok(())
}

/// `y = sqrt(k1 z1^2 + k2 z2^2 + 2 C z1 z2)`, `C = sign sqrt(k1 k2 + a00^2/(4 W^2))`,
/// for solutions `z1`, `z2` of `z'' = -omega z`.
pub fn mp_from_oscillators(
    osc: &Oscillator,
    z1: &Trajectory,
    z2: &Trajectory,
    k1: f64,
    k2: f64,
    sign: f64,
    a00: f64,
) -> Result<FormulaSolution, SuperposeError> {
    let span = common_span(&[z1, z2])?;
    let w = wronskian(z1, z2, span.0);
    if !(w.abs() > DEGENERACY_TOL) {
        return Err(SuperposeError::DependentSolutions(w));
    }
    let drift = wronskian_drift(z1, z2)?;
    if !(drift <= DEGENERACY_TOL * w.abs().max(1.0)) {
        return Err(SuperposeError::WronskianDrift(drift));
    }
    let c2 = k1 * k2 + a00 * a00 / (4.0 * w * w);
    if !(c2 >= 0.0) {
        return Err(SuperposeError::NegativeRadicand {
            at: f64::NAN,
            value: c2,
        });
    }
    let c = sign.signum() * c2.sqrt();
    let quad = move |a: Jet2, b: Jet2| a * a * k1 + b * b * k2 + a * b * (2.0 * c);
    let (osc, z1, z2) = (osc.clone(), z1.clone(), z2.clone());
    positive_on_grid(span, |s| {
        quad(oscillator_jet(&osc, &z1, s), oscillator_jet(&osc, &z2, s)).v
    })?;
    Ok(FormulaSolution::new(
        "mp_from_oscillators",
        span,
        move |s| quad(oscillator_jet(&osc, &z1, s), oscillator_jet(&osc, &z2, s)).sqrt(),
    ))
}

/// `y^2 = {[k1 (x1 - x2) - k2 (x1 - x3)]^2 - a00^2 (x2 - x3)^2 / 4}
/// / {(k2 - k1)(x2 - x3)(x2 - x1)(x1 - x3)}` for three solutions of
/// `x' = -omega - x^2`, given as the Riccati spec `r`.
pub fn mp_from_riccati(
    r: &RiccatiSpec,
    sols: [&Trajectory; 3],
    k1: f64,
    k2: f64,
    a00: f64,
) -> Result<FormulaSolution, SuperposeError> {
    mp_from_riccati_with(r, sols, k1, k2, a00, 2)
}

/// Variant with `(x2 - x3)^power` in the numerator; `power = 1` is the
/// literal printed radicand, kept to show that it does not solve the
/// equation.
pub fn mp_from_riccati_with(
    r: &RiccatiSpec,
    sols: [&Trajectory; 3],
    k1: f64,
    k2: f64,
    a00: f64,
    power: i32,
) -> Result<FormulaSolution, SuperposeError> {
    if !((k1 - k2).abs() > DEGENERACY_TOL) {
        return Err(SuperposeError::DegenerateDenominator {
            at: f64::NAN,
            value: k2 - k1,
        });
    }
    let span = common_span(&sols)?;
    for s in grid(span.0, span.1, CERT_GRID) {
        let x = sols.map(|t| state_at(t, s)[0]);
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let gap = (x[i] - x[j]).abs();
            if !(gap >= DEGENERACY_TOL) {
                return Err(SuperposeError::DegenerateSolutions {
                    pair: (i + 1, j + 1),
                    at: s,
                    gap,
                });
            }
        }
    }
    let r = r.clone();
    let sols: [Trajectory; 3] = sols.map(|t| t.clone());
    let q = a00 * a00 / 4.0;
    let radicand = move |s: f64| {
        let [x1, x2, x3] = sols
            .clone()
            .map(|tr| riccati_jet(&r, s, state_at(&tr, s)[0]));
        let lin = (x1 - x2) * k1 - (x1 - x3) * k2;
        let num = lin * lin - (x2 - x3).powi(power) * q;
        num / ((x2 - x3) * (x2 - x1) * (x1 - x3) * (k2 - k1))
    };
    let rad = radicand.clone();
    positive_on_grid(span, |s| rad(s).v)?;
    Ok(FormulaSolution::new("mp_from_riccati", span, move |s| {
        radicand(s).sqrt()
    }))
}

// Gambier equations through Kummer–Schwarz

/// Sup of the residual of the Gambier equation, relative to the size of
/// the right-hand side.
pub fn gambier_residual(sol: &FormulaSolution, spec: &GambierSpec, n: usize) -> f64 {
    sol.sup_residual(n, |t, j| {
        let b = spec.jet(t).b_coeffs();
        let acc = gambier_accel(&b, j.v, j.d1);
        (j.d2 - acc) / acc.abs().max(1.0)
    })
}

/// `x(t) = 1 / (alpha(t) y(tau(t))^2)` where `y` is the Milne–Pinney
/// solution built from oscillators `z1`, `z2` of the Kummer–Schwarz target
/// of `tr` (an output of `to_ks2`).
pub fn gambier_general_solution(
    spec: &GambierSpec,
    tr: &TransformResult,
    z1: &Trajectory,
    z2: &Trajectory,
    k1: f64,
    k2: f64,
    sign: f64,
) -> Result<FormulaSolution, SuperposeError> {
    let Target::KS2(ks2) = &tr.target else {
        return Err(SuperposeError::Domain(format!(
            "{} does not produce a Kummer–Schwarz equation",
            tr.name
        )));
    };
    let osc = Oscillator {
        omega: ks2.omega.clone(),
    };
    let y = mp_from_oscillators(&osc, z1, z2, k1, k2, sign, spec.a00())?;
    let (t0, t1) = tr.flow.span();
    let (lo, hi) = (tr.reparam.forward(t0), tr.reparam.forward(t1));
    let (ylo, yhi) = y.span;
    let tol = 1e-12 * (1.0 + hi.abs());
    if lo < ylo - tol || hi > yhi + tol {
        return Err(SuperposeError::Domain(format!(
            "oscillators cover [{ylo}, {yhi}] but tau ranges over [{lo}, {hi}]"
        )));
    }
    let alpha = tr.flow.alpha.clone();
    let dalpha = alpha.derivative();
    let reparam = tr.reparam.clone();
    Ok(FormulaSolution::new(
        "gambier_general_solution",
        (t0, t1),
        move |t| {
            let tau = reparam.forward(t).clamp(ylo, yhi);
            let xi = reparam.xi();
            let yj = y.jet(tau).reparam(Jet2::new(tau, xi.value(t), xi.deriv(t)));
            let a = Jet2::new(alpha.value(t), dalpha.value(t), dalpha.deriv(t));
            (a * yj * yj).recip()
        },
    ))
}

// Second-order Riccati systems

/// Sup of `|x'' + 3 x x' + x^3 - f - g x - h (x^2 + x')|`.
pub fn second_riccati_residual(sol: &FormulaSolution, sr: &SecondRiccatiSpec, n: usize) -> f64 {
    sol.sup_residual(n, |s, j| {
        let (x, v) = (j.v, j.d1);
        j.d2 + 3.0 * x * v + x * x * x
            - sr.f.value(s)
            - sr.g.value(s) * x
            - sr.h.value(s) * (x * x + v)
    })
}

/// `x = sum l_i v_i / sum l_i y_i` for three solutions `(y_i, v_i, a_i)` of
/// `y' = v, v' = a, a' = c a`; solves `x'' = -(3 x x' + x^3) + c (x^2 + x')`.
pub fn mixed_sr(
    lin: &LinearThirdOrder,
    sols: [&Trajectory; 3],
    lambdas: [f64; 3],
) -> Result<FormulaSolution, SuperposeError> {
    if lambdas.iter().all(|l| *l == 0.0) {
        return Err(SuperposeError::Domain("lambdas must not all vanish".into()));
    }
    let span = common_span(&sols)?;
    let m = sols.map(|t| state_at(t, span.0));
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if !(det.abs() >= DEGENERACY_TOL) {
        return Err(SuperposeError::DependentSolutions(det));
    }
    let c = lin.c.clone();
    let sols: [Trajectory; 3] = sols.map(|t| t.clone());
    let parts = move |s: f64| {
        let mut acc = [0.0; 3];
        for (tr, l) in sols.iter().zip(lambdas) {
            let st = state_at(tr, s);
            for k in 0..3 {
                acc[k] += l * st[k];
            }
        }
        acc
    };
    let p = parts.clone();
    for s in grid(span.0, span.1, CERT_GRID) {
        let d = p(s)[0];
        if !(d.abs() >= DEGENERACY_TOL) {
            return Err(SuperposeError::DegenerateDenominator { at: s, value: d });
        }
    }
    Ok(FormulaSolution::new("mixed_sr", span, move |s| {
        let [y, v, a] = parts(s);
        let den = Jet2::new(y, v, a);
        let num = Jet2::new(v, a, c.value(s) * a);
        num / den
    }))
}

// Exact solutions for n = 1

/// `(-a0 exp(-int a1))^(1/3)`, the solution with `alpha(0) = 1` of
/// `a1 = a0'/a0 - 3 alpha'/alpha`. It removes the `x^2 + x'` coefficient of
/// the second-order Riccati form.
pub fn easy_equ_alpha(spec: &GambierSpec, span: (f64, f64)) -> Result<TimeFn, SuperposeError> {
    let int_a1 = crate::tfun::integral_fn(&spec.a1, span.1)?;
    Ok((-(spec.a0.clone()) * (-int_a1).exp()).powr(1, 3))
}

/// Sup of `|3 (log alpha)' - (log(-a0))' + a1|`.
pub fn easy_equ_residual(spec: &GambierSpec, alpha: &TimeFn, span: (f64, f64)) -> f64 {
    grid(span.0, span.1, CERT_GRID)
        .map(|t| {
            (3.0 * alpha.deriv(t) / alpha.value(t) - spec.a0.deriv(t) / spec.a0.value(t)
                + spec.a1.value(t))
            .abs()
        })
        .fold(
            0.0,
            |m, r| if r.is_nan() { f64::INFINITY } else { m.max(r) },
        )
}

/// `alpha = 1/u` with `u'' = a1 u' + a2 u`, `u(0) = 1`, `u'(0) = 0`; it
/// removes the `x` coefficient of the second-order Riccati form.
pub fn linear_coefficient_alpha(
    spec: &GambierSpec,
    span: (f64, f64),
) -> Result<TimeFn, SuperposeError> {
    let (u, p) = (Expr::slot(0), Expr::slot(1));
    let rhs = vec![
        p.clone(),
        Expr::add(
            Expr::mul(spec.a1.expr().clone(), p),
            Expr::mul(spec.a2.expr().clone(), u),
        ),
    ];
    let sys = OdeSystem::solve(rhs, &[1.0, 0.0], 0.0, span.1, &Default::default())?;
    Ok(sys.component(0).recip())
}

/// General solution of a Gambier equation with `n = 1`, `a0(0) = -1`,
/// `sigma = 0`, `a0 < 0`: with `alpha` from [`linear_coefficient_alpha`] the
/// second-order Riccati form is `x'' = -(3 x x' + x^3) + h (x^2 + x')`,
/// solved by `x = Y'/Y` with `Y = l1 + l2 tau + l3 int int exp(int h)`.
#[derive(Clone)]
pub struct ExactN1 {
    pub transform: TransformResult,
    /// `(int_0 h, int_0 exp(int_0 h), int_0 int_0 exp(int_0 h))` in `tau`.
    kernel: Arc<OdeSystem>,
    h: TimeFn,
}

impl fmt::Debug for ExactN1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExactN1")
            .field("transform", &self.transform.name)
            .finish()
    }
}

/// Residual of the `x`-coefficient allowed for the exact construction.
pub const LINEAR_COEFFICIENT_TOL: f64 = 1e-8;

pub fn exact_gambier_n1(spec: &GambierSpec, span: (f64, f64)) -> Result<ExactN1, SuperposeError> {
    let alpha = linear_coefficient_alpha(spec, span)?;
    let transform = to_second_riccati(spec, Some(&alpha), span)?;
    let Target::SecondRiccati(sr) = &transform.target else {
        unreachable!("to_second_riccati yields a second-order Riccati target")
    };
    let g = &transform.target_in_t["g"];
    let worst = grid(span.0, span.1, CERT_GRID)
        .map(|t| g.value(t).abs())
        .fold(0.0, f64::max);
    if !(worst <= LINEAR_COEFFICIENT_TOL) {
        return Err(TransformError::Residual {
            name: "x coefficient".into(),
            value: worst,
        }
        .into());
    }
    let h = sr.h.clone();
    let (_, tau_end) = transform.reparam.tau_range();
    let rhs = vec![h.expr().clone(), Expr::exp(Expr::slot(0)), Expr::slot(1)];
    let kernel = OdeSystem::solve(rhs, &[0.0, 0.0, 0.0], 0.0, tau_end, &Default::default())?;
    Ok(ExactN1 {
        transform,
        kernel,
        h,
    })
}

impl ExactN1 {
    /// Constants `(l1, l2, l3)` matching `x(0) = x0`, `x'(0) = v0`.
    pub fn matched_constants(&self, x0: f64, v0: f64) -> [f64; 3] {
        let (_, (xb, vb)) = self.transform.map_state(0.0, (x0, v0));
        [1.0, xb, vb + xb * xb]
    }

    /// The solution in `tau`, `xbar = (l2 + l3 V) / (l1 + l2 tau + l3 Y)`.
    pub fn solution_in_tau(&self, l: [f64; 3]) -> FormulaSolution {
        let (k, h) = (self.kernel.clone(), self.h.clone());
        FormulaSolution::new(
            "exact_n1_tau",
            self.transform.reparam.tau_range(),
            move |tau| {
                let a = k.eval_component(tau, 0).exp();
                let (v, y) = (k.eval_component(tau, 1), k.eval_component(tau, 2));
                let num = Jet2::new(l[1] + l[2] * v, l[2] * a, l[2] * h.value(tau) * a);
                let den = Jet2::new(l[0] + l[1] * tau + l[2] * y, l[1] + l[2] * v, l[2] * a);
                num / den
            },
        )
    }

    /// `x(t) = xbar(tau(t)) / alpha(t)`.
    pub fn solution(&self, l: [f64; 3]) -> FormulaSolution {
        let xb = self.solution_in_tau(l);
        let (lo, hi) = xb.span;
        let reparam = self.transform.reparam.clone();
        let alpha = self.transform.flow.alpha.clone();
        let dalpha = alpha.derivative();
        FormulaSolution::new("exact_gambier_n1", self.transform.flow.span(), move |t| {
            let tau = reparam.forward(t).clamp(lo, hi);
            let xi = reparam.xi();
            let j = xb
                .jet(tau)
                .reparam(Jet2::new(tau, xi.value(t), xi.deriv(t)));
            let a = Jet2::new(alpha.value(t), dalpha.value(t), dalpha.deriv(t));
            j / a
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::OdeModel;
    use crate::odeint::IntegratorConfig;
    use crate::transforms::to_ks2;

    fn tf(s: &str) -> TimeFn {
        TimeFn::parse(s).unwrap()
    }

    fn cfg() -> IntegratorConfig {
        IntegratorConfig::default()
    }

    fn tan_riccati() -> RiccatiSpec {
        RiccatiSpec {
            b1: tf("1"),
            b2: tf("0"),
            b3: tf("1"),
        }
    }

    #[test]
    fn riccati_sr_examples() {
        assert_eq!(riccati_sr(0.3, 1.0, 2.0, 0.0).unwrap(), 0.3);
        assert!((riccati_sr(0.0, 1.0, 2.0, 1.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            riccati_sr(0.0, 1.0, 1.0, 0.0),
            Err(SuperposeError::DegenerateDenominator { .. })
        ));
        let k = riccati_sr_constant(0.1, 0.5, -0.4, 0.25).unwrap();
        assert!((riccati_sr(0.1, 0.5, -0.4, k).unwrap() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn riccati_sr_reconstructs_a_fourth_solution() {
        let r = tan_riccati();
        let inits = [-0.5, 0.0, 0.3, 0.7];
        let tr: Vec<Trajectory> = inits
            .iter()
            .map(|&x| r.integrate(0.0, &[x], 0.6, &cfg()).unwrap())
            .collect();
        let k = riccati_sr_constant(inits[0], inits[1], inits[2], inits[3]).unwrap();
        let sol = riccati_sr_solution(&r, [&tr[0], &tr[1], &tr[2]], k).unwrap();
        for t in grid(0.0, 0.6, 61) {
            let exact = (t + 0.7f64.atan()).tan();
            assert!((sol.value(t) - exact).abs() < 1e-8, "t = {t}");
            assert!((sol.value(t) - tr[3].eval_component(t, 0)).abs() < 1e-8);
        }
        assert!(riccati_residual(&sol, &r, 101) < 1e-8);
        // relabelling the particular solutions with the matching constant gives the same curve
        let k2 = riccati_sr_constant(inits[2], inits[0], inits[1], inits[3]).unwrap();
        let again = riccati_sr_solution(&r, [&tr[2], &tr[0], &tr[1]], k2).unwrap();
        for t in grid(0.0, 0.6, 31) {
            assert!((again.value(t) - sol.value(t)).abs() < 1e-9);
        }
    }

    fn cos_sin(osc: &Oscillator, end: f64) -> (Trajectory, Trajectory) {
        (
            osc.integrate(0.0, &[1.0, 0.0], end, &cfg()).unwrap(),
            osc.integrate(0.0, &[0.0, 1.0], end, &cfg()).unwrap(),
        )
    }

    #[test]
    fn mp_from_constant_frequency_oscillators() {
        let osc = Oscillator { omega: tf("1") };
        let (z1, z2) = cos_sin(&osc, 1.0);
        assert!(wronskian_drift(&z1, &z2).unwrap() < 1e-9);
        let mp = MPSpec::new(tf("1"), 0.25).unwrap();
        // k1 k2 - C^2 < 0, so the quadratic form is indefinite and each
        // constant set is admissible only on part of a period
        for (k1, k2, sign) in [(1.0, 1.0, 1.0), (2.0, 0.5, 1.0), (0.7, 1.3, 1.0)] {
            let y = mp_from_oscillators(&osc, &z1, &z2, k1, k2, sign, 1.0).unwrap();
            assert!(mp_residual(&y, &mp, 301) < 1e-8, "{k1} {k2} {sign}");
        }
        let (long1, long2) = cos_sin(&osc, 3.0);
        let y = mp_from_oscillators(&osc, &long1, &long2, 1.0, 1.0, 1.0, 1.0);
        assert!(matches!(y, Err(SuperposeError::NegativeRadicand { .. })));
        // k2 = 0: C = sign |a00| / (2 W)
        let y = mp_from_oscillators(&osc, &z1, &z2, 1.0, 0.0, 1.0, 1.0).unwrap();
        let s: f64 = 0.4;
        assert!((y.value(s).powi(2) - (s.cos().powi(2) + s.cos() * s.sin())).abs() < 1e-9);
    }

    #[test]
    fn mp_from_varying_frequency() {
        let osc = Oscillator {
            omega: tf("1 + t/2"),
        };
        let (z1, z2) = cos_sin(&osc, 1.0);
        let mp = MPSpec::new(tf("1 + t/2"), 0.5625).unwrap();
        let y = mp_from_oscillators(&osc, &z1, &z2, 1.2, 0.9, 1.0, 1.5).unwrap();
        assert!(mp_residual(&y, &mp, 201) < 1e-7);
    }

    #[test]
    fn mp_from_three_riccati_solutions() {
        let omega = tf("1 + t/3");
        let r = RiccatiSpec {
            b1: -omega.clone(),
            b2: tf("0"),
            b3: tf("-1"),
        };
        let tr: Vec<Trajectory> = [0.2, 0.9, 1.5]
            .iter()
            .map(|&x| r.integrate(0.0, &[x], 1.0, &cfg()).unwrap())
            .collect();
        let sols = [&tr[0], &tr[1], &tr[2]];
        let mp = MPSpec::new(omega, 0.25).unwrap();
        let y = mp_from_riccati(&r, sols, 0.5, 0.8, 1.0).unwrap();
        assert!(mp_residual(&y, &mp, 201) < 1e-7);
        let swapped = mp_from_riccati(&r, sols, 0.8, 0.5, 1.0).unwrap();
        assert!(mp_residual(&swapped, &mp, 201) < 1e-7);
        assert!((swapped.value(0.5) - y.value(0.5)).abs() > 1e-3);
        // the radicand with an unsquared (x2 - x3) does not solve the equation
        let literal = mp_from_riccati_with(&r, sols, 0.5, 0.8, 1.0, 1).unwrap();
        assert!(mp_residual(&literal, &mp, 201) > 1e-3);
        let same = [&tr[0], &tr[1], &tr[1]];
        assert!(matches!(
            mp_from_riccati(&r, same, 0.5, 0.8, 1.0),
            Err(SuperposeError::DegenerateSolutions { pair: (2, 3), .. })
        ));
    }

    #[test]
    fn gambier_general_solution_matches_integration() {
        let spec = GambierSpec::parse("0.5*exp(sin(t))", "cos(t)", "1 + t", 0.0, -2).unwrap();
        let span = (0.0, 1.0);
        let tr = to_ks2(&spec, Some(&tf("exp(t/3)")), span).unwrap();
        let Target::KS2(ks2) = &tr.target else {
            panic!()
        };
        let osc = Oscillator {
            omega: ks2.omega.clone(),
        };
        let tau_end = tr.reparam.forward(1.0);
        let (z1, z2) = cos_sin(&osc, tau_end);
        let x = gambier_general_solution(&spec, &tr, &z1, &z2, 2.0, 1.5, 1.0).unwrap();
        assert!(gambier_residual(&x, &spec, 201) < 1e-7);
        let direct = spec
            .integrate(0.0, &[x.value(0.0), x.derivative(0.0)], 1.0, &cfg())
            .unwrap();
        assert!(direct.completed());
        for t in grid(0.0, 1.0, 51) {
            assert!(
                (direct.eval_component(t, 0) - x.value(t)).abs() < 1e-7,
                "t = {t}"
            );
        }
    }

    #[test]
    fn general_solution_with_unit_alpha_is_inverse_square() {
        let spec = GambierSpec::parse("1", "0", "-1", 0.0, -2).unwrap();
        let tr = to_ks2(&spec, None, (0.0, 1.0)).unwrap();
        let osc = Oscillator { omega: tf("1") };
        let (z1, z2) = cos_sin(&osc, 1.0);
        let x = gambier_general_solution(&spec, &tr, &z1, &z2, 1.0, 1.0, 1.0).unwrap();
        let y = mp_from_oscillators(&osc, &z1, &z2, 1.0, 1.0, 1.0, 1.0).unwrap();
        for t in grid(0.0, 1.0, 11) {
            assert!((x.value(t) * y.value(t).powi(2) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mixed_sr_with_polynomial_basis() {
        let lin = LinearThirdOrder { c: tf("0") };
        let basis: Vec<Trajectory> = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
            .iter()
            .map(|s| lin.integrate(0.0, s, 1.0, &cfg()).unwrap())
            .collect();
        let sols = [&basis[0], &basis[1], &basis[2]];
        let l = [1.0, 0.5, 2.0];
        let x = mixed_sr(&lin, sols, l).unwrap();
        let sr = SecondRiccatiSpec {
            f: tf("0"),
            g: tf("0"),
            h: tf("0"),
        };
        assert!(second_riccati_residual(&x, &sr, 201) < 1e-8);
        for s in grid(0.0, 1.0, 21) {
            let exact = (l[1] + l[2] * s) / (l[0] + l[1] * s + l[2] * s * s / 2.0);
            assert!((x.value(s) - exact).abs() < 1e-10);
        }
        let fixed = mixed_sr(&lin, sols, [1.0, 0.0, 0.0]).unwrap();
        assert_eq!(fixed.value(0.7), 0.0);
        assert!(matches!(
            mixed_sr(&lin, [&basis[0], &basis[0], &basis[2]], l),
            Err(SuperposeError::DependentSolutions(_))
        ));
    }

    #[test]
    fn mixed_sr_matches_integration() {
        let lin = LinearThirdOrder { c: tf("sin(3*t)") };
        let basis: Vec<Trajectory> = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
            .iter()
            .map(|s| lin.integrate(0.0, s, 1.0, &cfg()).unwrap())
            .collect();
        let x = mixed_sr(&lin, [&basis[0], &basis[1], &basis[2]], [1.0, 0.3, 0.8]).unwrap();
        let sr = SecondRiccatiSpec {
            f: tf("0"),
            g: tf("0"),
            h: tf("sin(3*t)"),
        };
        assert!(second_riccati_residual(&x, &sr, 201) < 1e-8);
        let direct = sr
            .integrate(0.0, &[x.value(0.0), x.derivative(0.0)], 1.0, &cfg())
            .unwrap();
        for s in grid(0.0, 1.0, 51) {
            assert!((direct.eval_component(s, 0) - x.value(s)).abs() < 1e-8);
        }
    }

    #[test]
    fn exact_n1_trivial_coefficients() {
        let spec = GambierSpec::parse("-1", "0", "0", 0.0, 1).unwrap();
        let ex = exact_gambier_n1(&spec, (0.0, 1.0)).unwrap();
        let (c1, c2) = (0.4, 1.3);
        let x = ex.solution([c2, c1, 1.0]);
        for t in grid(0.0, 1.0, 21) {
            let exact = (t + c1) / (t * t / 2.0 + c1 * t + c2);
            assert!((x.value(t) - exact).abs() < 1e-10, "t = {t}");
        }
        assert!(gambier_residual(&x, &spec, 101) < 1e-8);
    }

    #[test]
    fn exact_n1_matches_integration() {
        let spec = GambierSpec::parse("-exp(t/2)", "sin(t)", "0.5 + t", 0.0, 1).unwrap();
        let ex = exact_gambier_n1(&spec, (0.0, 1.0)).unwrap();
        let (x0, v0) = (0.6, -0.2);
        let x = ex.solution(ex.matched_constants(x0, v0));
        assert!((x.value(0.0) - x0).abs() < 1e-12);
        assert!((x.derivative(0.0) - v0).abs() < 1e-10);
        assert!(gambier_residual(&x, &spec, 201) < 1e-7);
        let direct = spec.integrate(0.0, &[x0, v0], 1.0, &cfg()).unwrap();
        for t in grid(0.0, 1.0, 51) {
            assert!(
                (direct.eval_component(t, 0) - x.value(t)).abs() < 1e-7,
                "t = {t}"
            );
        }
    }

    #[test]
    fn easy_equation_alpha_removes_the_other_coefficient() {
        let spec = GambierSpec::parse("-exp(t/2)", "sin(t)", "0.5 + t", 0.0, 1).unwrap();
        let span = (0.0, 1.0);
        let alpha = easy_equ_alpha(&spec, span).unwrap();
        assert!((alpha.value(0.0) - 1.0).abs() < 1e-15);
        assert!(easy_equ_residual(&spec, &alpha, span) < 1e-10);
        let tr = to_second_riccati(&spec, Some(&alpha), span).unwrap();
        let (h, g) = (&tr.target_in_t["h"], &tr.target_in_t["g"]);
        assert!(grid(0.0, 1.0, 101).all(|t| h.value(t).abs() < 1e-9));
        assert!(grid(0.0, 1.0, 101).any(|t| g.value(t).abs() > 0.1));
        // feeding the remaining coefficient into the quotient formula does not
        // reproduce the Gambier flow
        let Target::SecondRiccati(sr) = &tr.target else {
            panic!()
        };
        let (_, tau_end) = tr.reparam.tau_range();
        let lin = LinearThirdOrder { c: sr.g.clone() };
        let basis: Vec<Trajectory> = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
            .iter()
            .map(|s| lin.integrate(0.0, s, tau_end, &cfg()).unwrap())
            .collect();
        let (x0, v0) = (0.6, -0.2);
        let (_, (xb, vb)) = tr.map_state(0.0, (x0, v0));
        let xbar = mixed_sr(
            &lin,
            [&basis[0], &basis[1], &basis[2]],
            [1.0, xb, vb + xb * xb],
        )
        .unwrap();
        assert!(second_riccati_residual(&xbar, sr, 101) > 1e-3);
    }
}
