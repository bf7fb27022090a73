//! Adequacy assessment of coherent systems by critical-state identification.
//!
//! A system of `n` two-state components is coherent when failing more
//! components never restores service. Its loss-of-load probability (LOLP) is
//! the mass of all failure states, and every failure state contains some
//! *critical* state: a failure whose strict subsets are all normal.
//!
//! [`csilp`] finds the critical states level by level. It splits the boolean
//! lattice of states into intervals ([`partition`]) whose masses give
//! monotone lower and upper LOLP bounds. Usually only a small fraction of the
//! states have to be checked by the [`Evaluator`], which is typically a DC
//! optimal power flow ([`dcopf`]). State enumeration, Monte Carlo and
//! brute-force baselines live in [`baselines`].
//!
//! ```
//! use lattice_reliability::{bundled, Criteria, Csilp};
//!
//! let sys = bundled("sys5").unwrap();
//! let run = Csilp::new(sys.evaluator(), &sys.reliability)
//!     .criteria(Criteria::complete())
//!     .run()
//!     .unwrap();
//! assert_eq!(run.evaluations, 12);
//! assert!((run.lolp() - 0.11791).abs() < 1e-12);
//! ```

pub mod baselines;
pub mod cli;
pub mod corpus;
pub mod csilp;
pub mod dcopf;
pub mod evaluator;
pub mod lp;
pub mod partition;
pub mod report;
pub mod state;
pub mod system;

pub use baselines::{
    brute_force_oracle, enumerate_assess, monte_carlo_assess, McsRun, McsSettings, OracleResult,
    SeRun,
};
pub use csilp::{Bounds, Criteria, CriticalRecord, Csilp, CsilpError, CsilpRun, StopReason};
pub use dcopf::{DcOpfEvaluator, NetworkModel};
pub use evaluator::{
    CriticalSet, CutsetOracle, Evaluation, Evaluator, EvaluatorError, ThresholdOracle,
};
pub use partition::{partition_by_level1, partition_by_level2, ColumnOrder, PartitionResult};
pub use report::{OutputFormat, Report};
pub use state::{ComponentId, ComponentReliability, Lattice, StateStatus, SystemState};
pub use system::{bundled, load_system, resolve_system, System};
