//! Reaction-diffusion on a polygonal domain partitioned by an embedded metric
//! graph: P1 finite elements on subdomains and edges, ODEs at vertices.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod assembly;
pub mod config;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod mesh;
pub mod model;
pub mod output;
pub mod sparse;
pub mod timestepper;

pub use analysis::{
    diagnostics, extinction_exponents, extinction_fit_series, Diagnostics, ExtinctionExponents,
    ExtinctionFit,
};
pub use assembly::{DiscreteState, Problem};
pub use config::{Prepared, RunConfig, VertexLimitConfig};
pub use error::{Error, Result};
pub use geometry::{PartitionedDomain, Point};
pub use mesh::{mesh_domain, mesh_domain_with, Discretization, MeshKind};
pub use model::{check_assumptions, CouplingCoefficients, FluxLaw, ModelSpec, ReactionLaw};
pub use timestepper::{run, run_with, Scheme, SolverConfig, SolverStats, TimeSeries};
