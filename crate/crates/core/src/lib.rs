//! Language-guided reward relabeling for two-level hierarchical soft actor-critic.
//!
//! An instruction is translated into stationary reward parameters; these
//! relabel the higher-level replay at sample time, hindsight relabeling
//! densifies the resulting sparse reward, and both levels train with SAC.

pub mod env;
pub mod error;
pub mod eval;
pub mod learner;
pub mod replay;
pub mod trainer;
pub mod translator;

pub use env::{Action, Env, EnvConfig, EnvKind, EnvState, Goal};
pub use error::{Error, Result};
pub use replay::{HigherTrajectory, PrimitiveTransition, SubgoalTransition};
pub use translator::RewardParams;
