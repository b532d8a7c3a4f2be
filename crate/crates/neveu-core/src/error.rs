use thiserror::Error;

/// Errors surfaced by the numerical layers of the toolkit.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("quadrature tolerance not achieved: requested {requested:.3e}, achieved {achieved:.3e}")]
    Tolerance { requested: f64, achieved: f64 },

    #[error("divergent integral: {integral}")]
    Divergent { integral: String },

    #[error("evaluation outside function domain: {0}")]
    Domain(String),

    #[error("certificate refused: {reason} (witness u = {witness:?})")]
    CertRefused { reason: String, witness: Option<f64> },

    #[error("certificate mismatch: {0}")]
    CertMismatch(String),

    #[error("regularity condition failed for {tag}: witness (u, z) = ({u:.6e}, {z:.6e})")]
    Regularity { tag: String, u: f64, z: f64 },

    #[error("unbounded supremum for {0}")]
    Unbounded(String),

    #[error("grid point {index} failed: {source}")]
    GridPoint {
        index: usize,
        #[source]
        source: Box<CoreError>,
    },

    #[error("configuration hash mismatch at row {row}: estimate {estimate} vs bound {bound}")]
    HashMismatch {
        row: usize,
        estimate: String,
        bound: String,
    },

    #[error("unknown test function tag: {0}")]
    UnknownTag(String),

    #[error("simulation error: {0}")]
    Sim(String),
}
