use thiserror::Error;

pub type Result<T> = std::result::Result<T, RomError>;

#[derive(Debug, Error)]
pub enum RomError {
    #[error("geometry has no interior cells at this resolution")]
    NoInterior,

    #[error("cut cell {cell} is not connected to any interior cell")]
    IsolatedCutComponent { cell: usize },

    #[error("incompressible limit: poisson ratio must be below 0.5, got {0}")]
    IncompressibleLimit(f64),

    #[error("invalid material parameters: {0}")]
    InvalidMaterial(String),

    #[error("deformation is not bijective: det J = {det:e} in cell {cell}")]
    NotBijective { cell: usize, det: f64 },

    #[error("cut cell {0} has no quadrature")]
    MissingQuadrature(usize),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate sampling: {0}")]
    DegenerateSampling(String),

    #[error("supremizer enrichment insufficient: smallest singular value {sigma_min:e}")]
    EnrichmentInsufficient { sigma_min: f64 },

    #[error("reduced system of cluster pair ({j}, {k}) is singular (condition estimate {cond:e})")]
    SingularReduced { j: usize, k: usize, cond: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("model was built from a different configuration (expected hash {expected}, found {found})")]
    ConfigMismatch { expected: String, found: String },

    #[error("snapshot store: {0}")]
    Store(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("at parameter {mu:?}: {source}")]
    AtParameter {
        mu: Vec<f64>,
        #[source]
        source: Box<RomError>,
    },
}

impl RomError {
    pub fn at(mu: &[f64], source: RomError) -> Self {
        RomError::AtParameter { mu: mu.to_vec(), source: Box::new(source) }
    }

    /// True for errors that stem from user input rather than numerics.
    pub fn is_config_error(&self) -> bool {
        match self {
            RomError::Config(_) | RomError::ConfigMismatch { .. } | RomError::Io(_) | RomError::Store(_) => true,
            RomError::AtParameter { source, .. } => source.is_config_error(),
            _ => false,
        }
    }
}
