//! MAP inference in pairwise graphical models by dual block-coordinate ascent.
//!
//! Three edge-wise update rules are provided (uniform, MPLP and the
//! handshake-based MPLP++), together with a matching-based edge schedule
//! that lets the updates of one round run in parallel without locks.

pub mod cli;
pub mod dual;
pub mod engine;
pub mod error;
pub mod generate;
pub mod io;
pub mod model;
pub mod schedule;
pub mod updates;

pub use dual::{dual_value, is_block_optimal, restricted_dual, tolerance_factor};
pub use engine::{solve, Mode, SolveConfig, SolveTrace};
pub use error::{ModelError, ParseError};
pub use model::{brute_force_map, energy, init_reparam, GraphicalModel, Labeling, ReparamState, Table};
pub use schedule::{compute_schedule, EdgeSchedule};
pub use updates::{apply_update, Rule};
