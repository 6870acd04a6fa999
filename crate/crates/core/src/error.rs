use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("taut-cable model requires r > 0, got r = {0}")]
    NonPositiveRadius(f64),

    #[error("elevation is vertical (alpha = pi/2); {0}")]
    VerticalElevation(&'static str),

    #[error("equilibrium thrust undefined: alpha + theta = {0} is +-pi/2")]
    ThrustUndefined(f64),

    #[error("setpoint (r = {r}, alpha = {alpha}, theta = {theta}) is not attainable for eps = {eps}")]
    NotAttainable { r: f64, alpha: f64, theta: f64, eps: f64 },

    #[error("outer loop requires lambda1 < T_bar/m, got lambda1 = {lambda1} >= {limit}")]
    SaturationTooLarge { lambda1: f64, limit: f64 },

    #[error("small-gain condition fails: gamma_in * gamma_out = {0} >= 1")]
    SmallGainViolated(f64),

    #[error("invariant ball infeasible: {0}")]
    InfeasibleBall(String),

    #[error("waypoint plan exceeded {0} waypoints without reaching the start")]
    PlanDiverged(usize),

    #[error("non-finite state after step at t = {0}")]
    Divergence(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid value for `{key}`: {msg}")]
    Validation { key: String, msg: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn validation(key: &str, msg: impl Into<String>) -> Self {
        Error::Validation {
            key: key.to_string(),
            msg: msg.into(),
        }
    }
}
