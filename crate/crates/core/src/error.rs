use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("map returned {value:?} outside the state box at x = {x:?}, y = {y:?}")]
    RangeViolation {
        x: Vec<f64>,
        y: Vec<f64>,
        value: Vec<f64>,
    },

    #[error("radius {radius} exceeds the space diameter {diameter} but {requested} elements were requested")]
    DegenerateRadius {
        radius: f64,
        diameter: f64,
        requested: usize,
    },

    #[error("cover intersection graph has {components} components; radius too small for the sample density")]
    DisconnectedCover { components: usize },

    #[error("graph is disconnected ({components} components)")]
    DisconnectedGraph { components: usize },

    #[error("no marked cells: the fixed-point set is empty at this tolerance")]
    NoComponent,

    #[error("rectangle union is empty")]
    EmptyUnion,

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("oracle scan found no component with full parameter projection")]
    OracleNoComponent,

    #[error("no Lipschitz estimate available; call estimate_lipschitz first")]
    MissingLipschitz,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("expression error at byte {pos}: {msg}")]
    Expr { pos: usize, msg: String },

    #[error("config line {line}, field `{field}`: {msg}")]
    Config {
        line: usize,
        field: String,
        msg: String,
    },

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::Iteration {
            iteration,
            source: Box::new(self),
        }
    }

    /// The innermost error, unwrapping iteration context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Iteration { source, .. } => source.root(),
            other => other,
        }
    }
}
