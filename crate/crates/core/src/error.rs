use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Position in a text input, 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("attribute `{0}` is not in the record domain")]
    MissingAttribute(String),

    #[error("cannot compare {left} with {right}")]
    TypeMismatch { left: String, right: String },

    #[error("predicate `{0}` cannot be evaluated directly")]
    Unevaluable(String),

    #[error("cannot rename `{from}` to `{to}`: {reason}")]
    BadRename {
        from: String,
        to: String,
        reason: String,
    },

    #[error("domain mismatch: {left:?} vs {right:?}")]
    DomainMismatch {
        left: Vec<String>,
        right: Vec<String>,
    },

    #[error("unbound relation variable `{0}`")]
    UnboundVariable(String),

    #[error("functional dependencies are not in tree form: {0}")]
    NotTreeForm(String),

    #[error("functional dependency {fd} violated by rows {witness}")]
    FdViolation { fd: String, witness: String },

    #[error("delta inserts and deletes the same row {0}")]
    Overlap(String),

    #[error("delta is not minimal: {0}")]
    NotMinimal(String),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("type error in rule {rule}: {detail}")]
    TypeError { rule: &'static str, detail: String },

    #[error("unsupported lens variant `{0}`")]
    UnsupportedVariant(String),

    #[error("schema violation ({constraint}): {detail}")]
    SchemaViolation {
        constraint: &'static str,
        detail: String,
    },

    #[error("unknown table `{0}`")]
    UnknownTable(String),

    #[error("predicate constructor `{0}` has no SQL rendering")]
    Unrenderable(String),

    #[error("two inserted rows share key {0}")]
    KeyCollision(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: Location, message: String },

    #[error("SQL error: {0}")]
    Sql(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            location: Location { line, column },
            message: message.into(),
        }
    }

    pub(crate) fn domain_mismatch(left: &[String], right: &[String]) -> Self {
        Error::DomainMismatch {
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    pub(crate) fn schema(constraint: &'static str, detail: impl Into<String>) -> Self {
        Error::SchemaViolation {
            constraint,
            detail: detail.into(),
        }
    }

    pub(crate) fn type_error(rule: &'static str, detail: impl Into<String>) -> Self {
        Error::TypeError {
            rule,
            detail: detail.into(),
        }
    }
}
