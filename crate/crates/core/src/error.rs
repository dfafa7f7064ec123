//! Error type shared by all analysis stages.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    #[error("syntax error at offset {pos}: expected {expected}")]
    Syntax { pos: usize, expected: String },
    #[error("unknown coordinate `{0}`")]
    UnknownCoordinate(String),
    #[error("denominator is identically zero")]
    ZeroDenominator,
    #[error("pole at sample point")]
    PoleAtPoint,
    #[error("sampling exhausted: {0} consecutive rejections")]
    SamplingExhausted(u32),
    #[error("rank instability: {0}")]
    RankInstability(String),
    #[error("projection is not a submersion")]
    NotASubmersion,
    #[error("transversality fails: C + ker Tpi is a proper subbundle of TP")]
    TransversalityFails,
    #[error("vertical part C^pi does not have constant rank on samples")]
    VerticalPartNotConstantRank,
    #[error("vertical part C^pi is not involutive")]
    VerticalPartNotInvolutive,
    #[error("singular point: {0}")]
    SingularPoint(String),
    #[error("no global rational parametrization: {0}")]
    NoGlobalParametrization(String),
    #[error("singular frame: {0}")]
    SingularFrame(String),
    #[error("structure violation in `{check}` witnessed at {witness}")]
    StructureViolation { check: String, witness: String },
    #[error("correspondence mismatch: {0}")]
    CorrespondenceMismatch(String),
    #[error("diffeomorphism is not an internal symmetry")]
    NotInternal,
    #[error("jet is not a member of the Pfaffian symmetry groupoid")]
    NotInGCpi,
    #[error("map is not a section of the projection")]
    NotASection,
    #[error("map is not a coordinate projection: {0}")]
    NotAProjection(String),
    #[error("embedding rank drops below the parameter chart dimension")]
    EmbeddingRankDrop,
    #[error("invalid action specification: {0}")]
    SpecInvalid(String),
    #[error("chart mismatch: {0}")]
    ChartMismatch(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}
