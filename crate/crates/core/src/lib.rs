//! First-order optimizers and a seeded benchmark harness.
//!
//! - [`math`]: the `f64` parameter vector.
//! - [`optim`]: ten update rules behind [`optim::Optimizer`].
//! - [`problems`]: differentiable objectives, synthetic and IDX data,
//!   minibatching, finite-difference gradient checks.
//! - [`harness`]: training runs, schedules, traces, comparisons.
//! - [`cli`]: config parsing and CSV output for the `gradkit` binary.
//!
//! ```
//! use gradkit::harness::{run, ProblemSpec, RunConfig};
//! use gradkit::optim::Algorithm;
//!
//! let mut config = RunConfig::new(Algorithm::Nadam, ProblemSpec::Rosenbrock);
//! config.epochs = 200;
//! let trace = run(&config)?;
//! assert!(trace.final_loss < trace.records[0].loss);
//! # Ok::<(), gradkit::harness::HarnessError>(())
//! ```

pub mod cli;
pub mod harness;
pub mod math;
pub mod optim;
pub mod problems;
