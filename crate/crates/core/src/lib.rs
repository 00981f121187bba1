//! Graph-based security analysis for DC power-system state estimation.
//!
//! The library models a power network and its meter placements, builds the
//! DC measurement Jacobian, runs weighted-least-squares estimation with
//! residual-based bad data detection, decides (sub)network observability via
//! edge-measured Steiner trees, plans minimum-cost meter protection (exact
//! branch-and-bound and a tree-pruning heuristic), and synthesizes
//! minimum-cost undetectable injection attacks via minimum S-T cuts.
//!
//! Numeric kernels are generic over the scalar type through [`Scalar`];
//! the crate root exports f64 aliases for the common case.

pub mod attack;
pub mod error;
pub mod estimator;
pub mod jacobian;
pub mod linalg;
pub mod maxflow;
pub(crate) mod matching;
pub mod model;
pub mod observability;
pub mod parse;
pub mod protection;
pub mod scalar;
pub(crate) mod simplex;

pub use error::{Error, ErrorClass, Result};
pub use scalar::Scalar;

/// Scalar type used by the CLI and the shipped fixtures.
pub type DefaultScalar = f64;

/// Diagnostic: solve a protection model's root relaxation and report pivots.
pub fn debug_root_lp(model: &protection::ArborescenceModel<f64>) -> String {
    let mut s = simplex::Simplex::from_tableau(&model.tableau, &model.lp.lower, &model.lp.upper);
    let out = s.solve();
    format!("{:?} pivots={} ncols={} nrows={}",
        match out {
            simplex::LpOutcome::Optimal { objective, .. } => format!("opt {objective:.4}"),
            other => format!("{other:?}"),
        },
        s.pivot_count(), model.lp.ncols, model.lp.rows.len())
}

pub type Network = model::PowerNetwork<DefaultScalar>;
pub type Meters = model::MeterSet<DefaultScalar>;
pub type Jacobian = jacobian::JacobianMatrix<DefaultScalar>;
pub type Measurements = estimator::MeasurementVector<DefaultScalar>;
pub type State = estimator::StateVector<DefaultScalar>;
