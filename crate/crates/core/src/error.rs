use std::path::PathBuf;

use thiserror::Error;

use crate::judgement::InconsistencyReport;
use crate::model::{ClusterId, ElementRef, ValidationReport};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing weight for element {0}")]
    MissingWeight(ElementRef),

    #[error("weight {weight} for element {element} is not a positive finite number")]
    InvalidWeight { element: ElementRef, weight: f64 },

    #[error("invalid clustering `{name}`: {report}")]
    InvalidClustering {
        name: String,
        report: ValidationReport,
    },

    #[error("item universes differ: {0}")]
    ItemUniverseMismatch(String),

    #[error("baseline and experiment memberships differ in separate-assignment mode: {0}")]
    MembershipMismatch(String),

    #[error("clusterings cover different element universes: {0}")]
    UniverseMismatch(String),

    #[error("unknown element {0}")]
    UnknownElement(ElementRef),

    #[error("element {0} has no ideal class")]
    MissingIdealClass(ElementRef),

    #[error("baseline and experiment share no items")]
    EmptyIntersection,

    #[error("no historical epochs given")]
    NoEpochs,

    #[error("duplicate epoch label `{0}`")]
    DuplicateEpochLabel(String),

    #[error("element {element} does not belong to epoch `{epoch}`")]
    EpochMismatch { element: ElementRef, epoch: String },

    #[error("element {element} has kind {found}, expected {expected}")]
    WrongElementKind {
        element: ElementRef,
        expected: &'static str,
        found: &'static str,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("every element has zero jaccard distance; nothing to sample")]
    NothingToSample,

    #[error("pair ({0}, {1}) was not part of the sampled pair set")]
    UnknownPair(ElementRef, ElementRef),

    #[error("judgements are inconsistent: {0}")]
    InconsistentJudgements(InconsistencyReport),

    #[error("no judged pairs remain after discarding uncertain verdicts")]
    InsufficientCoverage,

    #[error("id permutation is not a bijection on the assigned ids: {0}")]
    NotABijection(String),

    #[error("cluster id {0} is not assigned")]
    UnknownClusterId(ClusterId),
}

impl Error {
    /// Stable machine-readable name, used in CLI diagnostics and the C API.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MissingWeight(_) => "MissingWeight",
            Error::InvalidWeight { .. } => "InvalidWeight",
            Error::InvalidClustering { .. } => "InvalidClustering",
            Error::ItemUniverseMismatch(_) => "ItemUniverseMismatch",
            Error::MembershipMismatch(_) => "MembershipMismatch",
            Error::UniverseMismatch(_) => "UniverseMismatch",
            Error::UnknownElement(_) => "UnknownElement",
            Error::MissingIdealClass(_) => "MissingIdealClass",
            Error::EmptyIntersection => "EmptyIntersection",
            Error::NoEpochs => "NoEpochs",
            Error::DuplicateEpochLabel(_) => "DuplicateEpochLabel",
            Error::EpochMismatch { .. } => "EpochMismatch",
            Error::WrongElementKind { .. } => "WrongElementKind",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Parse { .. } => "ParseError",
            Error::Io { .. } => "IoError",
            Error::NothingToSample => "NothingToSample",
            Error::UnknownPair(..) => "UnknownPair",
            Error::InconsistentJudgements(_) => "InconsistentJudgements",
            Error::InsufficientCoverage => "InsufficientCoverage",
            Error::NotABijection(_) => "NotABijection",
            Error::UnknownClusterId(_) => "UnknownClusterId",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
