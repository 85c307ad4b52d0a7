//! Online min-cost bipartite matching with delays on the line, with exact
//! rational arithmetic throughout.

pub mod arith;
pub mod engine;
pub mod harness;
pub mod instance;
pub mod io;
mod kdtree;
pub mod netcost;
pub mod oracles;
pub mod num;
pub mod slack;

pub use arith::{Arith, Exact, Lattice};
pub use engine::{run, run_with, EngineError, EngineOptions, EngineState, EngineView, Observer, Trace, TraceEvent};
pub use instance::{
    solution_cost, ta_distance, Agent, CostBreakdown, Instance, InstanceError, MatchRecord, RequestId, Role,
    ServerId, Solution, SolutionError,
};
pub use netcost::{AugPath, Gamma, Matching, PathKind, Vertex};
pub use num::{Extended, Q};
pub use slack::{CostTable, DualStore, MinPath, SearchWorkspace, ServerScan, SlackGraph};
