//! Curvature flows of rotationally symmetric convex hypersurfaces driven by
//! homogeneous symmetric speeds: speed catalog and curvature algebra, a
//! meridian-curve discretization, an explicit solver with rescaling
//! continuation, invariant audits, and the ancient ovaloid construction.

pub mod algebra;
pub mod monitors;
pub mod ovaloid;
pub mod profile;
pub mod record;
pub mod solver;
pub mod speeds;

pub use monitors::{audit, AuditReport, AuditTolerances};
pub use profile::{GeneratingCurve, ShapeMetrics};
pub use record::{Checkpoint, RunRecord};
pub use solver::{run, RunOptions};
pub use speeds::{CurvatureVector, SpeedKind, SpeedSpec};

/// Any error raised by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Speed(#[from] speeds::SpeedError),
    #[error(transparent)]
    Algebra(#[from] algebra::AlgebraError),
    #[error(transparent)]
    Profile(#[from] profile::ProfileError),
    #[error(transparent)]
    Record(#[from] record::RecordError),
    #[error(transparent)]
    Solver(#[from] solver::SolverError),
    #[error(transparent)]
    Audit(#[from] monitors::AuditError),
    #[error(transparent)]
    Ovaloid(#[from] ovaloid::OvaloidError),
}
