//! Equation families as data plus first-order right-hand sides.
//!
//! State conventions: Gambier and Kummer–Schwarz `(x, v)`, Milne–Pinney
//! `(y, dy/dtau)`, Riccati `(x)`, second-order Riccati `(x, v)`, the linear
//! third-order system `(y, v_y, a_y)` and the oscillator `(z, dz/dtau)`.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::odeint::{integrate, DomainViolation, IntegratorConfig, OdeError, Trajectory};
use crate::symvf::{rationalize, y, VectorField};
use crate::tfun::{ParseError, TimeFn};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("in field `{field}`: {source}")]
    Parse {
        field: &'static str,
        source: ParseError,
    },
    #[error("malformed job: {0}")]
    Json(String),
}

fn parse_field(field: &'static str, src: &str) -> Result<TimeFn, ModelError> {
    TimeFn::parse(src).map_err(|source| ModelError::Parse { field, source })
}

#[derive(Clone, Debug)]
pub struct GambierSpec {
    pub a0: TimeFn,
    pub a1: TimeFn,
    pub a2: TimeFn,
    pub sigma: f64,
    pub n: i64,
}

/// Arithmetic shared by the floating-point and exact coefficient formulas.
pub trait Scalar:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_int(k: i64) -> Self;
}

impl Scalar for f64 {
    fn from_int(k: i64) -> Self {
        k as f64
    }
}

impl Scalar for BigRational {
    fn from_int(k: i64) -> Self {
        BigRational::from_integer(k.into())
    }
}

impl Scalar for TimeFn {
    fn from_int(k: i64) -> Self {
        TimeFn::constant(k as f64)
    }
}

/// Coefficient data of a Gambier equation at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GambierJet<T = f64> {
    pub a0: T,
    pub a0_dot: T,
    pub a1: T,
    pub a2: T,
    pub sigma: T,
    pub n: T,
}

impl GambierSpec {
    pub fn new(a0: TimeFn, a1: TimeFn, a2: TimeFn, sigma: f64, n: i64) -> Result<Self, ModelError> {
        if n == 0 {
            return Err(ModelError::Invalid("n must be non-zero".into()));
        }
        let a00 = a0.value(0.0);
        if !a00.is_finite() || a00 == 0.0 {
            return Err(ModelError::Invalid(format!(
                "a0(0) must be finite and non-zero, got {a00}"
            )));
        }
        if !sigma.is_finite() {
            return Err(ModelError::Invalid("sigma must be finite".into()));
        }
        Ok(GambierSpec {
            a0,
            a1,
            a2,
            sigma,
            n,
        })
    }

    pub fn parse(a0: &str, a1: &str, a2: &str, sigma: f64, n: i64) -> Result<Self, ModelError> {
        GambierSpec::new(
            parse_field("a0", a0)?,
            parse_field("a1", a1)?,
            parse_field("a2", a2)?,
            sigma,
            n,
        )
    }

    pub fn a00(&self) -> f64 {
        self.a0.value(0.0)
    }

    pub fn jet(&self, t: f64) -> GambierJet {
        GambierJet {
            a0: self.a0.value(t),
            a0_dot: self.a0.deriv(t),
            a1: self.a1.value(t),
            a2: self.a2.value(t),
            sigma: self.sigma,
            n: self.n as f64,
        }
    }

    pub fn to_json(&self) -> GambierJson {
        GambierJson {
            a0: self.a0.to_string(),
            a1: self.a1.to_string(),
            a2: self.a2.to_string(),
            sigma: self.sigma,
            n: self.n,
        }
    }
}

impl<T: Scalar> GambierJet<T> {
    /// `(b1, ..., b10)`.
    pub fn b_coeffs(&self) -> [T; 10] {
        let GambierJet {
            a0,
            a0_dot,
            a1,
            a2,
            sigma,
            n,
        } = self.clone();
        let k = T::from_int;
        [
            k(1),
            (n.clone() - k(1)) / n.clone(),
            a0.clone() * (n.clone() + k(2)) / n.clone(),
            a1.clone(),
            -(sigma.clone() * (n.clone() - k(2)) / n.clone()),
            -(a0.clone() * a0.clone() / n.clone()),
            a0_dot - a0.clone() * a1.clone(),
            a2 * n.clone() - k(2) * a0 * sigma.clone() / n.clone(),
            -(a1 * sigma.clone()),
            -(sigma.clone() * sigma / n),
        ]
    }
}

impl GambierJet<f64> {
    /// Continued-fraction rationalisation of every entry.
    pub fn rationalized(&self) -> GambierJet<BigRational> {
        let r = |x: f64| rationalize(x, RATIONALIZE_TOL);
        GambierJet {
            a0: r(self.a0),
            a0_dot: r(self.a0_dot),
            a1: r(self.a1),
            a2: r(self.a2),
            sigma: r(self.sigma),
            n: r(self.n),
        }
    }
}

/// `(b1, ..., b10)` at time `t`.
pub fn gambier_b_coeffs(spec: &GambierSpec, t: f64) -> [f64; 10] {
    spec.jet(t).b_coeffs()
}

/// Relative accuracy of the rationalisation used for exact decompositions.
pub const RATIONALIZE_TOL: f64 = 1e-12;

/// `sum b_k Y_k` at time `t` with coefficients rationalised by continued
/// fractions.
pub fn gambier_field_at(spec: &GambierSpec, t: f64) -> VectorField {
    let b = gambier_b_coeffs(spec, t);
    let coefs: Vec<BigRational> = b.iter().map(|&c| rationalize(c, RATIONALIZE_TOL)).collect();
    field_from_coeffs(&coefs)
}

/// `sum c_k Y_k` for `k = 1..coefs.len()`.
pub fn field_from_coeffs(coefs: &[BigRational]) -> VectorField {
    coefs
        .iter()
        .enumerate()
        .fold(VectorField::zero(2), |acc, (k, c)| {
            &acc + &y(k as u8 + 1).scale(c)
        })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GambierJson {
    pub a0: String,
    #[serde(default = "zero_expr")]
    pub a1: String,
    #[serde(default = "zero_expr")]
    pub a2: String,
    #[serde(default)]
    pub sigma: f64,
    pub n: i64,
}

fn zero_expr() -> String {
    "0".into()
}

impl GambierJson {
    pub fn build(&self) -> Result<GambierSpec, ModelError> {
        GambierSpec::parse(&self.a0, &self.a1, &self.a2, self.sigma, self.n)
    }
}

#[derive(Clone, Debug)]
pub struct KS2Spec {
    pub c0: f64,
    pub omega: TimeFn,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct KS2Json {
    pub c0: f64,
    pub omega: String,
}

impl KS2Json {
    pub fn build(&self) -> Result<KS2Spec, ModelError> {
        Ok(KS2Spec {
            c0: self.c0,
            omega: parse_field("omega", &self.omega)?,
        })
    }
}

#[derive(Clone, Debug)]
pub struct MPSpec {
    pub omega: TimeFn,
    pub kcoef: f64,
}

impl MPSpec {
    pub fn new(omega: TimeFn, kcoef: f64) -> Result<Self, ModelError> {
        if !(kcoef >= 0.0) {
            return Err(ModelError::Invalid(format!(
                "kcoef must be non-negative, got {kcoef}"
            )));
        }
        Ok(MPSpec { omega, kcoef })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MPJson {
    pub omega: String,
    pub kcoef: f64,
}

impl MPJson {
    pub fn build(&self) -> Result<MPSpec, ModelError> {
        MPSpec::new(parse_field("omega", &self.omega)?, self.kcoef)
    }
}

/// `dx/dt = b1 + b2 x + b3 x^2`.
#[derive(Clone, Debug)]
pub struct RiccatiSpec {
    pub b1: TimeFn,
    pub b2: TimeFn,
    pub b3: TimeFn,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RiccatiJson {
    pub b1: String,
    pub b2: String,
    pub b3: String,
}

impl RiccatiJson {
    pub fn build(&self) -> Result<RiccatiSpec, ModelError> {
        Ok(RiccatiSpec {
            b1: parse_field("b1", &self.b1)?,
            b2: parse_field("b2", &self.b2)?,
            b3: parse_field("b3", &self.b3)?,
        })
    }
}

/// `x'' = -(3 x x' + x^3) + f + g x + h (x^2 + x')`.
#[derive(Clone, Debug)]
pub struct SecondRiccatiSpec {
    pub f: TimeFn,
    pub g: TimeFn,
    pub h: TimeFn,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SecondRiccatiJson {
    pub f: String,
    pub g: String,
    pub h: String,
}

impl SecondRiccatiJson {
    pub fn build(&self) -> Result<SecondRiccatiSpec, ModelError> {
        Ok(SecondRiccatiSpec {
            f: parse_field("f", &self.f)?,
            g: parse_field("g", &self.g)?,
            h: parse_field("h", &self.h)?,
        })
    }
}

/// `y' = v_y, v_y' = a_y, a_y' = c a_y`.
#[derive(Clone, Debug)]
pub struct LinearThirdOrder {
    pub c: TimeFn,
}

/// `z'' = -omega z`.
#[derive(Clone, Debug)]
pub struct Oscillator {
    pub omega: TimeFn,
}

/// A first-order system with a fixed state layout.
pub trait OdeModel: Sync {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), DomainViolation>;
    fn state_names(&self) -> Vec<&'static str>;

    /// Coordinates protected by the singularity guard.
    fn guard(&self) -> Vec<usize> {
        Vec::new()
    }

    fn integrate(
        &self,
        t0: f64,
        y0: &[f64],
        t1: f64,
        cfg: &IntegratorConfig,
    ) -> Result<Trajectory, OdeError> {
        if y0.len() != self.dim() {
            return Err(OdeError::InvalidInput(format!(
                "state has {} components, model expects {}",
                y0.len(),
                self.dim()
            )));
        }
        let mut cfg = cfg.clone();
        for g in self.guard() {
            if !cfg.guard.contains(&g) {
                cfg.guard.push(g);
            }
        }
        integrate(
            &|t, y: &[f64], dy: &mut [f64]| self.rhs(t, y, dy),
            t0,
            y0,
            t1,
            &cfg,
        )
    }

    /// Derivative as a fresh vector.
    fn eval(&self, t: f64, y: &[f64]) -> Result<Vec<f64>, DomainViolation> {
        let mut dy = vec![0.0; self.dim()];
        self.rhs(t, y, &mut dy)?;
        Ok(dy)
    }
}

fn finite(t: f64, dy: &[f64]) -> Result<(), DomainViolation> {
    if dy.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(DomainViolation(format!("non-finite derivative at t = {t}")))
    }
}

fn nonzero_x(x: f64) -> Result<(), DomainViolation> {
    if x == 0.0 || !x.is_finite() {
        Err(DomainViolation(format!(
            "x = {x} is outside the punctured domain"
        )))
    } else {
        Ok(())
    }
}

/// `dv/dt` of the Gambier system given the coefficient vector.
pub fn gambier_accel(b: &[f64; 10], x: f64, v: f64) -> f64 {
    b[1] * v * v / x
        + b[2] * x * v
        + b[3] * v
        + b[4] * v / x
        + b[5] * x * x * x
        + b[6] * x * x
        + b[7] * x
        + b[8]
        + b[9] / x
}

impl OdeModel for GambierSpec {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), DomainViolation> {
        let (x, v) = (y[0], y[1]);
        nonzero_x(x)?;
        let b = gambier_b_coeffs(self, t);
        dy[0] = v;
        dy[1] = gambier_accel(&b, x, v);
        finite(t, dy)
    }

    fn state_names(&self) -> Vec<&'static str> {
        vec!["x", "v"]
    }

    fn guard(&self) -> Vec<usize> {
        vec![0]
    }
}

impl OdeModel for KS2Spec {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), DomainViolation> {
        let (x, v) = (y[0], y[1]);
        nonzero_x(x)?;
        dy[0] = v;
        dy[1] = 1.5 * v * v / x - 2.0 * self.c0 * x * x * x + 2.0 * self.omega.value(t) * x;
        finite(t, dy)
    }

    fn state_names(&self) -> Vec<&'static str> {
        vec!["x", "v"]
    }

    fn guard(&self) -> Vec<usize> {
        vec![0]
    }
}

impl OdeModel for MPSpec {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), DomainViolation> {
        let (q, p) = (y[0], y[1]);
        if !(q > 0.0) {
            return Err(DomainViolation(format!("y = {q} must be positive")));
        }
        dy[0] = p;
        dy[1] = -self.omega.value(t) * q - self.kcoef / (q * q * q);
        finite(t, dy)
    }

    fn state_names(&self) -> Vec<&'static str> {
        vec!["y", "dy"]
    }

    fn guard(&self) -> Vec<usize> {
        vec![0]
    }
}

impl OdeModel for RiccatiSpec {
    fn dim(&self) -> usize {
        1
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), DomainViolation> {
        let x = y[0];
        dy[0] = self.b1.value(t) + self.b2.value(t) * x + self.b3.value(t) * x * x;
        finite(t, dy)
    }

    fn state_names(&self) -> Vec<&'static str> {
        vec!["x"]
    }
}

impl OdeModel for SecondRiccatiSpec {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), DomainViolation> {
        let (x, v) = (y[0], y[1]);
        dy[0] = v;
        dy[1] = -(3.0 * x * v + x * x * x)
            + self.f.value(t)
            + self.g.value(t) * x
            + self.h.value(t) * (x * x + v);
        finite(t, dy)
    }

    fn state_names(&self) -> Vec<&'static str> {
        vec!["x", "v"]
    }
}

impl OdeModel for LinearThirdOrder {
    fn dim(&self) -> usize {
        3
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), DomainViolation> {
        dy[0] = y[1];
        dy[1] = y[2];
        dy[2] = self.c.value(t) * y[2];
        finite(t, dy)
    }

    fn state_names(&self) -> Vec<&'static str> {
        vec!["y", "vy", "ay"]
    }
}

impl OdeModel for Oscillator {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), DomainViolation> {
        dy[0] = y[1];
        dy[1] = -self.omega.value(t) * y[0];
        finite(t, dy)
    }

    fn state_names(&self) -> Vec<&'static str> {
        vec!["z", "dz"]
    }
}

/// Any of the model families, for generic consumers such as the CLI.
#[derive(Clone, Debug)]
pub enum Model {
    Gambier(GambierSpec),
    KS2(KS2Spec),
    MP(MPSpec),
    Riccati(RiccatiSpec),
    SecondRiccati(SecondRiccatiSpec),
}

impl Model {
    fn inner(&self) -> &dyn OdeModel {
        match self {
            Model::Gambier(m) => m,
            Model::KS2(m) => m,
            Model::MP(m) => m,
            Model::Riccati(m) => m,
            Model::SecondRiccati(m) => m,
        }
    }
}

impl OdeModel for Model {
    fn dim(&self) -> usize {
        self.inner().dim()
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), DomainViolation> {
        self.inner().rhs(t, y, dy)
    }

    fn state_names(&self) -> Vec<&'static str> {
        self.inner().state_names()
    }

    fn guard(&self) -> Vec<usize> {
        self.inner().guard()
    }
}

/// Tagged JSON form of [`Model`].
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelJson {
    Gambier(GambierJson),
    Ks2(KS2Json),
    MilnePinney(MPJson),
    Riccati(RiccatiJson),
    SecondRiccati(SecondRiccatiJson),
}

impl ModelJson {
    pub fn build(&self) -> Result<Model, ModelError> {
        Ok(match self {
            ModelJson::Gambier(j) => Model::Gambier(j.build()?),
            ModelJson::Ks2(j) => Model::KS2(j.build()?),
            ModelJson::MilnePinney(j) => Model::MP(j.build()?),
            ModelJson::Riccati(j) => Model::Riccati(j.build()?),
            ModelJson::SecondRiccati(j) => Model::SecondRiccati(j.build()?),
        })
    }
}

/// The derivative of any model at `(t, state)`.
pub fn rhs(model: &dyn OdeModel, t: f64, state: &[f64]) -> Result<Vec<f64>, DomainViolation> {
    model.eval(t, state)
}
