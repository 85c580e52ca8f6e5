//! Numerical laboratory for killed Markov processes on grids.
//!
//! The crate discretizes the generator of a process absorbed outside an open
//! region, computes the principal eigentriple of its killed Feynman-Kac
//! semigroup (log spectral radius, quasi-stationary measure, right
//! eigenfunction), estimates the associated spectral gap, and builds the
//! large-deviation rate function of conditioned occupation measures by
//! Legendre transform. A Monte Carlo layer samples killed trajectories of the
//! same processes so every spectral quantity can be cross-validated against
//! simulation.
//!
//! Three process classes are built in: overdamped Langevin diffusions,
//! kinetic (underdamped) Langevin dynamics on position-velocity grids, and
//! elliptic SDEs driven by rotationally invariant alpha-stable noise.
//!
//! Data-parallel inner loops (path ensembles, row-parallel matvecs) run on
//! rayon when the default `parallel` feature is enabled and fall back to
//! sequential execution without it. Results are bitwise identical for any
//! worker count: reductions are block-structured in fixed index order and
//! every path owns a counter-derived RNG stream.

pub mod field;
pub mod grid;
pub mod io;
pub mod ldp;
pub mod model;
pub(crate) mod par;
pub mod simulate;
pub mod spectral;

pub use field::{DriftMode, PotentialField, ScalarField, WeightForm, WeightFunction};
pub use grid::{DomainSpec, Grid, GridSpec, Region};
pub use model::{build_generator, GridOperator, ProcessSpec};
pub use spectral::EigenTriple;

/// Configures the global worker pool and returns the effective thread count.
///
/// With the `parallel` feature this installs a rayon pool of `n` threads the
/// first time it is called (later calls keep the existing pool). Without the
/// feature it always reports 1. Outputs do not depend on the value; only
/// wall-clock time does.
pub fn configure_threads(n: Option<usize>) -> usize {
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = n {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
        1
    }
}
