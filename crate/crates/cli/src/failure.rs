//! Error classification into exit codes.

use std::fmt;

use qls_core::invariants::InvariantError;
use qls_core::models::ModelError;
use qls_core::odeint::OdeError;
use qls_core::scheme::SchemeError;
use qls_core::superpose::SuperposeError;
use qls_core::tfun::{ParseError, TfunError};
use qls_core::transforms::TransformError;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    /// A mathematical precondition of the requested operation fails.
    Precondition,
    /// The job file or an expression in it is malformed.
    Input,
    /// The numerics failed: step underflow, singular formulas, drift.
    Numeric,
}

impl Kind {
    pub fn exit_code(self) -> u8 {
        match self {
            Kind::Precondition => 1,
            Kind::Input => 2,
            Kind::Numeric => 3,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Failure {
    pub kind: Kind,
    pub message: String,
}

impl Failure {
    pub fn input(msg: impl fmt::Display) -> Self {
        Failure {
            kind: Kind::Input,
            message: msg.to_string(),
        }
    }

    pub fn precondition(msg: impl fmt::Display) -> Self {
        Failure {
            kind: Kind::Precondition,
            message: msg.to_string(),
        }
    }

    pub fn numeric(msg: impl fmt::Display) -> Self {
        Failure {
            kind: Kind::Numeric,
            message: msg.to_string(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ParseError> for Failure {
    fn from(e: ParseError) -> Self {
        Failure::input(e)
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::input(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::input(format!("malformed job: {e}"))
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::input(e)
    }
}

impl From<OdeError> for Failure {
    fn from(e: OdeError) -> Self {
        match e {
            OdeError::InvalidInput(_) => Failure::input(e),
            _ => Failure::numeric(e),
        }
    }
}

impl From<TfunError> for Failure {
    fn from(e: TfunError) -> Self {
        match e {
            TfunError::Parse(p) => p.into(),
            TfunError::NonMonotone { .. } => Failure::precondition(e),
            TfunError::InvalidSpan(_) => Failure::input(e),
            TfunError::Integrator(o) => o.into(),
            TfunError::Incomplete { .. } => Failure::numeric(e),
        }
    }
}

impl From<SchemeError> for Failure {
    fn from(e: SchemeError) -> Self {
        match e {
            SchemeError::Singular(_) => Failure::numeric(e),
            SchemeError::InvalidFlow(_) => Failure::precondition(e),
            _ => Failure::input(e),
        }
    }
}

impl From<TransformError> for Failure {
    fn from(e: TransformError) -> Self {
        match e {
            TransformError::Unreducible(_) | TransformError::ConditionFailed { .. } => {
                Failure::precondition(e)
            }
            TransformError::Tfun(t) => t.into(),
            TransformError::Scheme(s) => s.into(),
            TransformError::Model(m) => m.into(),
            TransformError::Residual { .. } | TransformError::Domain(_) => Failure::numeric(e),
        }
    }
}

impl From<InvariantError> for Failure {
    fn from(e: InvariantError) -> Self {
        match e {
            InvariantError::ConditionFailed { .. } => Failure::precondition(e),
            InvariantError::Tfun(t) => t.into(),
            InvariantError::Scheme(s) => s.into(),
            InvariantError::Domain { .. } => Failure::numeric(e),
        }
    }
}

impl From<SuperposeError> for Failure {
    fn from(e: SuperposeError) -> Self {
        match e {
            SuperposeError::Transform(t) => t.into(),
            SuperposeError::Tfun(t) => t.into(),
            SuperposeError::Ode(o) => o.into(),
            SuperposeError::Domain(_) => Failure::precondition(e),
            _ => Failure::numeric(e),
        }
    }
}
