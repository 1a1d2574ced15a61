use thiserror::Error;

/// Error type shared by every module in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed text input (OBJ, label files, PGM headers, JSON lines).
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Structurally invalid mesh data (indices out of range, repeated
    /// vertex within a face).
    #[error("invalid mesh structure: {0}")]
    Structure(String),

    #[error("unsupported face with {vertex_count} vertices at line {line} (triangles only)")]
    UnsupportedFace { line: usize, vertex_count: usize },

    /// Topology that hole filling cannot handle (non-edge-manifold input).
    #[error("unsupported topology: {0}")]
    UnsupportedTopology(String),

    /// An operation required a closed, consistently oriented mesh.
    #[error("open or inconsistently oriented mesh: {0}")]
    OpenMesh(String),

    #[error("invalid transform: {0}")]
    InvalidTransform(String),

    #[error("mesh exceeds voxelization bounds: {0}")]
    Bounds(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    /// A scalar argument outside its valid domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("voxel grid kind mismatch: expected {expected}, found {found}")]
    KindMismatch { expected: String, found: String },

    #[error("missing part: {0}")]
    MissingPart(String),

    #[error("unknown segment id {0}")]
    UnknownSegment(usize),

    /// Mismatched tensor/mask/joint-set shapes between paired inputs.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Prediction ids that have no matching annotation (or vice versa).
    #[error("id mismatch: {0}")]
    IdMismatch(String),

    /// Malformed binary or structured file content.
    #[error("format error: {0}")]
    Format(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
