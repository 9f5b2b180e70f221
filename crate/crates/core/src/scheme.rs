//! Scheme certification and the lower-triangular flow group acting on
//! Gambier fields.
//!
//! A flow element is the time-dependent matrix `M = [[alpha, 0], [gamma, delta]]`
//! acting by `(x, v) -> (alpha x, gamma x + delta v)`. Its pushforward of a
//! field `X` is `M X(M^-1 p) + M' M^-1 p`.

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::models::{field_from_coeffs, GambierJet, GambierSpec, Scalar, RATIONALIZE_TOL};
use crate::symvf::{
    abel_pair, basis_by_name, coords_in_span, is_independent, ks2_algebra, lie_bracket,
    rationalize, LaurentPoly, UnknownBasis, VectorField,
};
use crate::tfun::{grid, TimeFn, CERT_GRID};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemeError {
    #[error("generators of `{0}` are linearly dependent")]
    Dependent(String),
    #[error("generators of `{0}` live on spaces of different dimension")]
    Arity(String),
    #[error(transparent)]
    UnknownBasis(#[from] UnknownBasis),
    #[error("invalid flow: {0}")]
    InvalidFlow(String),
    #[error("flow matrix is singular at t = {0}")]
    Singular(f64),
}

/// A named finite-dimensional space of vector fields with independent
/// generators.
#[derive(Clone, Debug)]
pub struct VFSpace {
    name: String,
    labels: Vec<String>,
    gens: Vec<VectorField>,
}

impl VFSpace {
    pub fn new(
        name: &str,
        labels: Vec<String>,
        gens: Vec<VectorField>,
    ) -> Result<Self, SchemeError> {
        assert_eq!(labels.len(), gens.len(), "one label per generator");
        if let Some(g) = gens.first() {
            if gens.iter().any(|h| h.nvars() != g.nvars()) {
                return Err(SchemeError::Arity(name.into()));
            }
        }
        if !is_independent(&gens) {
            return Err(SchemeError::Dependent(name.into()));
        }
        Ok(VFSpace {
            name: name.into(),
            labels,
            gens,
        })
    }

    /// Generators given by basis names; `+` joins names into a sum, as in
    /// `"Z1+Z5"`.
    pub fn from_names(name: &str, names: &[&str]) -> Result<Self, SchemeError> {
        let mut gens = Vec::with_capacity(names.len());
        for n in names {
            let mut parts = n.split('+').map(|p| basis_by_name(p.trim()));
            let first = parts.next().expect("split yields at least one part")?;
            gens.push(parts.try_fold(first, |acc, p| p.map(|p| &acc + &p))?);
        }
        VFSpace::new(name, names.iter().map(|s| s.to_string()).collect(), gens)
    }

    fn named(name: &str, names: &[&str]) -> Self {
        VFSpace::from_names(name, names).expect("built-in space is valid")
    }

    pub fn v_g() -> Self {
        let names: Vec<String> = (1..=11).map(|i| format!("Y{i}")).collect();
        VFSpace::named("V_G", &names.iter().map(String::as_str).collect::<Vec<_>>())
    }

    pub fn v_g_extended() -> Self {
        let names: Vec<String> = (1..=17).map(|i| format!("Y{i}")).collect();
        VFSpace::named(
            "V'_G",
            &names.iter().map(String::as_str).collect::<Vec<_>>(),
        )
    }

    pub fn w_g() -> Self {
        VFSpace::named("W_G", &["Y4", "Y8", "Y11"])
    }

    /// The Kummer–Schwarz algebra for the constant `c0`.
    pub fn ks2(c0: &BigRational) -> Self {
        let labels = ["X1", "X2", "X3"].map(String::from).to_vec();
        VFSpace::new("V_0 (KS2)", labels, ks2_algebra(c0).to_vec())
            .expect("KS2 generators are independent")
    }

    pub fn sl3() -> Self {
        VFSpace::named(
            "V_0 (sl3)",
            &["X1", "X2", "X3", "X4", "X5", "X6", "X7", "X8"],
        )
    }

    pub fn v1() -> Self {
        VFSpace::named("V_1", &["Z1", "Z3", "Z1+Z5", "Z6"])
    }

    pub fn abel_w() -> Self {
        let labels = ["d/dx", "x d/dx"].map(String::from).to_vec();
        VFSpace::new("W_Abel", labels, abel_pair().0).expect("Abel generators are independent")
    }

    pub fn abel_v() -> Self {
        let labels = ["d/dx", "x d/dx", "x^2 d/dx", "x^3 d/dx"]
            .map(String::from)
            .to_vec();
        VFSpace::new("V_Abel", labels, abel_pair().1).expect("Abel generators are independent")
    }

    /// Built-in spaces by short name.
    pub fn preset(name: &str) -> Option<Self> {
        Some(match name {
            "V_G" | "VG" => VFSpace::v_g(),
            "V'_G" | "VG'" | "VG_ext" => VFSpace::v_g_extended(),
            "W_G" | "WG" => VFSpace::w_g(),
            "sl3" => VFSpace::sl3(),
            "V_1" | "V1" => VFSpace::v1(),
            "W_Abel" => VFSpace::abel_w(),
            "V_Abel" => VFSpace::abel_v(),
            _ => return None,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn generators(&self) -> &[VectorField] {
        &self.gens
    }

    pub fn dim(&self) -> usize {
        self.gens.len()
    }

    pub fn contains(&self, f: &VectorField) -> bool {
        f.nvars() == self.gens.first().map_or(f.nvars(), VectorField::nvars)
            && coords_in_span(f, &self.gens).is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Witness {
    /// Generator labels: one for a membership failure, two for a bracket.
    pub pair: Vec<String>,
    /// The offending field.
    pub field: String,
    /// The space it failed to decompose in.
    pub not_in: String,
}

impl Witness {
    /// `[A,B]` or `A`.
    pub fn label(&self) -> String {
        match self.pair.as_slice() {
            [a, b] => format!("[{a},{b}]"),
            other => other.join(","),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConditionVerdict {
    pub condition: &'static str,
    pub holds: bool,
    pub witnesses: Vec<Witness>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckReport {
    pub w: String,
    pub v: String,
    pub passed: bool,
    pub conditions: Vec<ConditionVerdict>,
}

impl CheckReport {
    pub fn condition(&self, name: &str) -> Option<&ConditionVerdict> {
        self.conditions.iter().find(|c| c.condition == name)
    }
}

pub const W_IN_V: &str = "W subset V";
pub const W_CLOSED: &str = "[W,W] subset W";
pub const W_NORMALISES_V: &str = "[W,V] subset V";

/// Checks `W ⊆ V`, `[W,W] ⊆ W` and `[W,V] ⊆ V` exactly, listing every
/// failing generator or generator pair.
pub fn check_scheme(w: &VFSpace, v: &VFSpace) -> CheckReport {
    let mut in_v = Vec::new();
    for (l, g) in w.labels.iter().zip(&w.gens) {
        if !v.contains(g) {
            in_v.push(Witness {
                pair: vec![l.clone()],
                field: g.to_string(),
                not_in: v.name.clone(),
            });
        }
    }
    let bracket_failures = |other: &VFSpace, target: &VFSpace, skip_symmetric: bool| {
        let mut out = Vec::new();
        for (i, (li, gi)) in w.labels.iter().zip(&w.gens).enumerate() {
            for (j, (lj, gj)) in other.labels.iter().zip(&other.gens).enumerate() {
                if skip_symmetric && j <= i {
                    continue;
                }
                let b = lie_bracket(gi, gj);
                if !b.is_zero() && !target.contains(&b) {
                    out.push(Witness {
                        pair: vec![li.clone(), lj.clone()],
                        field: b.to_string(),
                        not_in: target.name.clone(),
                    });
                }
            }
        }
        out
    };
    let closed = bracket_failures(w, w, true);
    let normalises = bracket_failures(v, v, false);
    let conditions = vec![
        ConditionVerdict {
            condition: W_IN_V,
            holds: in_v.is_empty(),
            witnesses: in_v,
        },
        ConditionVerdict {
            condition: W_CLOSED,
            holds: closed.is_empty(),
            witnesses: closed,
        },
        ConditionVerdict {
            condition: W_NORMALISES_V,
            holds: normalises.is_empty(),
            witnesses: normalises,
        },
    ];
    CheckReport {
        w: w.name.clone(),
        v: v.name.clone(),
        passed: conditions.iter().all(|c| c.holds),
        conditions,
    }
}

/// Values and first derivatives of `(alpha, gamma, delta)` at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowJet<T = f64> {
    pub alpha: T,
    pub gamma: T,
    pub delta: T,
    pub alpha_dot: T,
    pub gamma_dot: T,
    pub delta_dot: T,
}

impl FlowJet<f64> {
    pub fn rationalized(&self) -> FlowJet<BigRational> {
        let r = |x: f64| rationalize(x, RATIONALIZE_TOL);
        FlowJet {
            alpha: r(self.alpha),
            gamma: r(self.gamma),
            delta: r(self.delta),
            alpha_dot: r(self.alpha_dot),
            gamma_dot: r(self.gamma_dot),
            delta_dot: r(self.delta_dot),
        }
    }
}

/// An element of the flow group on `[0, T]`.
#[derive(Clone, Debug)]
pub struct FlowElement {
    pub alpha: TimeFn,
    pub gamma: TimeFn,
    pub delta: TimeFn,
    span: (f64, f64),
}

const INIT_TOL: f64 = 1e-12;

impl FlowElement {
    /// Checks `alpha(0) = delta(0) = 1` and positivity of `alpha`, `delta`
    /// on the certification grid. `gamma(0)` is not forced to vanish, since
    /// the a1-removing and Kummer–Schwarz flows generally start with
    /// `gamma(0) != 0`; see [`FlowElement::is_normalized`].
    pub fn new(
        alpha: TimeFn,
        gamma: TimeFn,
        delta: TimeFn,
        span: (f64, f64),
    ) -> Result<Self, SchemeError> {
        let (a, b) = span;
        if !(a <= 0.0 && b >= 0.0 && a < b && a.is_finite() && b.is_finite()) {
            return Err(SchemeError::InvalidFlow(format!(
                "span [{a}, {b}] must contain 0"
            )));
        }
        let (a0, d0) = (alpha.value(0.0), delta.value(0.0));
        if (a0 - 1.0).abs() > INIT_TOL || (d0 - 1.0).abs() > INIT_TOL {
            return Err(SchemeError::InvalidFlow(format!(
                "initial values must be alpha = 1, delta = 1; got {a0}, {d0}"
            )));
        }
        for t in grid(a, b, CERT_GRID) {
            let (at, gt, dt) = (alpha.value(t), gamma.value(t), delta.value(t));
            if !(at > 0.0 && dt > 0.0 && gt.is_finite() && at.is_finite() && dt.is_finite()) {
                return Err(SchemeError::InvalidFlow(format!(
                    "alpha and delta must stay positive: alpha({t}) = {at}, delta({t}) = {dt}, gamma({t}) = {gt}"
                )));
            }
        }
        Ok(FlowElement {
            alpha,
            gamma,
            delta,
            span,
        })
    }

    pub fn identity(span: (f64, f64)) -> Self {
        FlowElement::new(
            TimeFn::constant(1.0),
            TimeFn::constant(0.0),
            TimeFn::constant(1.0),
            span,
        )
        .expect("identity is a valid flow")
    }

    /// Whether `M(0)` is the identity, i.e. also `gamma(0) = 0`.
    pub fn is_normalized(&self) -> bool {
        self.gamma.value(0.0).abs() <= INIT_TOL
    }

    pub fn span(&self) -> (f64, f64) {
        self.span
    }

    pub fn jet(&self, t: f64) -> FlowJet {
        FlowJet {
            alpha: self.alpha.value(t),
            gamma: self.gamma.value(t),
            delta: self.delta.value(t),
            alpha_dot: self.alpha.deriv(t),
            gamma_dot: self.gamma.deriv(t),
            delta_dot: self.delta.deriv(t),
        }
    }

    /// Pointwise matrix inverse.
    pub fn inverse(&self) -> FlowElement {
        let gamma = -(self.gamma.clone() / (self.alpha.clone() * self.delta.clone()));
        FlowElement {
            alpha: self.alpha.recip(),
            gamma,
            delta: self.delta.recip(),
            span: self.span,
        }
    }

    /// `(x, v) -> (alpha x, gamma x + delta v)` at time `t`.
    pub fn apply(&self, t: f64, state: (f64, f64)) -> (f64, f64) {
        let j = self.jet(t);
        (j.alpha * state.0, j.gamma * state.0 + j.delta * state.1)
    }

    /// Sampled `(t, alpha, gamma, delta)` rows for reports.
    pub fn sample(&self, n: usize) -> Vec<[f64; 4]> {
        grid(self.span.0, self.span.1, n)
            .map(|t| {
                [
                    t,
                    self.alpha.value(t),
                    self.gamma.value(t),
                    self.delta.value(t),
                ]
            })
            .collect()
    }
}

/// `(x, v) -> (alpha x, gamma x + delta v)`.
pub fn apply_flow(g: &FlowElement, t: f64, state: (f64, f64)) -> (f64, f64) {
    g.apply(t, state)
}

/// Pointwise product `g h`: apply `h` first, then `g`.
pub fn compose_flows(g: &FlowElement, h: &FlowElement) -> FlowElement {
    let span = (g.span.0.max(h.span.0), g.span.1.min(h.span.1));
    FlowElement {
        alpha: g.alpha.clone() * h.alpha.clone(),
        gamma: g.gamma.clone() * h.alpha.clone() + g.delta.clone() * h.gamma.clone(),
        delta: g.delta.clone() * h.delta.clone(),
        span,
    }
}

/// Coefficients `(c1, ..., c11)` of the pushed-forward Gambier field in
/// the basis `Y1..Y11`.
pub fn new_coefficients<T: Scalar>(c: &GambierJet<T>, g: &FlowJet<T>) -> [T; 11] {
    let k = T::from_int;
    let GambierJet {
        a0,
        a0_dot,
        a1,
        a2,
        sigma,
        n,
    } = c.clone();
    let FlowJet {
        alpha: al,
        gamma: ga,
        delta: de,
        alpha_dot: al_d,
        gamma_dot: ga_d,
        delta_dot: de_d,
    } = g.clone();
    let two_minus_n = k(2) - n.clone();
    let n_plus_2 = n.clone() + k(2);
    let b8_inner = n.clone() * a2
        - k(2) * sigma.clone() * a0.clone() / n.clone()
        - ga.clone() * a1.clone() / de.clone()
        - ga.clone() * ga.clone() / (n.clone() * de.clone() * de.clone())
        - ga.clone() * de_d.clone() / (de.clone() * de.clone())
        + ga_d / de.clone();
    [
        al.clone() / de.clone(),
        (n.clone() - k(1)) / n.clone() * al.clone() / de.clone(),
        a0.clone() * n_plus_2.clone() / (n.clone() * al.clone()),
        a1.clone()
            + de_d / de.clone()
            + two_minus_n.clone() * ga.clone() / (n.clone() * de.clone()),
        two_minus_n.clone() * sigma.clone() * al.clone() / n.clone(),
        -(a0.clone() * a0.clone() * de.clone()
            / (n.clone() * al.clone() * al.clone() * al.clone())),
        (de.clone() * a0_dot
            - a0.clone() * a1.clone() * de.clone()
            - n_plus_2 / n.clone() * a0 * ga.clone())
            / (al.clone() * al.clone()),
        de.clone() / al.clone() * b8_inner,
        -(sigma.clone() * (a1 * de.clone() + two_minus_n * ga.clone() / n.clone())),
        -(sigma.clone() * sigma * al.clone() * de.clone() / n),
        al_d / al - ga / de,
    ]
}

/// Closed-form pushforward coefficients `(c1, ..., c11)` at time `t`.
pub fn pushforward_coeffs(spec: &GambierSpec, g: &FlowElement, t: f64) -> [f64; 11] {
    new_coefficients(&spec.jet(t), &g.jet(t))
}

/// Substitutes `x -> sx x`, `v -> cx x + cv v` in a plane polynomial.
fn substitute(
    p: &LaurentPoly,
    sx: &BigRational,
    cx: &BigRational,
    cv: &BigRational,
) -> LaurentPoly {
    let lin =
        &LaurentPoly::plane_term(cx.clone(), 1, 0) + &LaurentPoly::plane_term(cv.clone(), 0, 1);
    let mut out = LaurentPoly::zero(2);
    for (m, c) in p.terms() {
        let (i, j) = (m.exps()[0], m.exps()[1]);
        assert!(j >= 0, "negative powers of v are outside the field class");
        let head = LaurentPoly::plane_term(c * sx.pow(i), i, 0);
        out = &out + &(&head * &lin.pow(j as u32));
    }
    out
}

/// Exact pushforward of a plane field by the flow jet
/// `M = [[alpha, 0], [gamma, delta]]`: `M X(M^-1 p) + M' M^-1 p`.
pub fn conjugate(
    field: &VectorField,
    g: &FlowJet<BigRational>,
) -> Result<VectorField, SchemeError> {
    assert_eq!(field.nvars(), 2, "conjugation acts on plane fields");
    if g.alpha.is_zero() || g.delta.is_zero() {
        return Err(SchemeError::Singular(f64::NAN));
    }
    // M^-1 (x, v) = (x / alpha, -gamma x / (alpha delta) + v / delta)
    let sx = BigRational::one() / &g.alpha;
    let cx = -(&g.gamma / (&g.alpha * &g.delta));
    let cv = BigRational::one() / &g.delta;
    let px = substitute(field.px(), &sx, &cx, &cv);
    let pv = substitute(field.pv(), &sx, &cx, &cv);
    let mx = px.scale(&g.alpha);
    let mv = &px.scale(&g.gamma) + &pv.scale(&g.delta);
    // M' M^-1 (x, v)
    let dx = LaurentPoly::plane_term(&g.alpha_dot * &sx, 1, 0);
    let dv = &LaurentPoly::plane_term(&g.gamma_dot * &sx + &g.delta_dot * &cx, 1, 0)
        + &LaurentPoly::plane_term(&g.delta_dot * &cv, 0, 1);
    Ok(VectorField::plane(&mx + &dx, &mv + &dv))
}

/// Field-level pushforward of the Gambier field at time `t`: coefficient and
/// flow data are rationalised and the conjugation is done exactly.
pub fn pushforward_field_numeric(
    spec: &GambierSpec,
    g: &FlowElement,
    t: f64,
) -> Result<VectorField, SchemeError> {
    let j = g.jet(t);
    if !(j.alpha != 0.0 && j.delta != 0.0) {
        return Err(SchemeError::Singular(t));
    }
    let b: Vec<BigRational> = spec
        .jet(t)
        .b_coeffs()
        .iter()
        .map(|&c| rationalize(c, RATIONALIZE_TOL))
        .collect();
    conjugate(&field_from_coeffs(&b), &j.rationalized()).map_err(|_| SchemeError::Singular(t))
}

/// Exact pushforward for rational coefficient and flow data.
pub fn pushforward_exact(
    c: &GambierJet<BigRational>,
    g: &FlowJet<BigRational>,
) -> Result<VectorField, SchemeError> {
    conjugate(&field_from_coeffs(&c.b_coeffs()), g)
}
