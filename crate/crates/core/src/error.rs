use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown vertex id {0}")]
    UnknownVertex(usize),
    #[error("unknown subdomain id {0}")]
    UnknownSubdomain(usize),
    #[error("unknown edge id {0}")]
    UnknownEdge(usize),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("mesh generation failed: {0}")]
    Mesh(String),
    #[error("subdomain {subdomain} is not adjacent to edge {edge}")]
    NotIncident { subdomain: usize, edge: usize },
    #[error("missing coefficient {name} at {location}")]
    MissingCoefficient {
        name: &'static str,
        location: String,
    },
    #[error("flux Jacobian is degenerate at a zero gradient (p = {p}, regularization = 0)")]
    DegenerateFlux { p: f64 },
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("Newton did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("line search failed at Newton iteration {iteration} (residual {residual:.3e})")]
    LineSearchFailed { iteration: usize, residual: f64 },
    #[error("step failed at t = {time}: {source}")]
    StepFailed {
        time: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
    #[error("model assumptions violated: {0}")]
    Assumptions(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("expression error: {0}")]
    Expression(String),
    #[error("configuration invalid:\n{}", format_issues(.0))]
    Config(Vec<crate::config::ConfigIssue>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_issues(issues: &[crate::config::ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}
