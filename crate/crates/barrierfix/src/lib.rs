//! Automatic barrier placement repair for MiniKernel GPU kernels.
//!
//! The pipeline: parse a kernel, instrument every interesting program point
//! with a guarded barrier, then run a solver/verifier loop that searches for
//! the cheapest guard assignment under which the kernel is free of data races
//! and barrier divergence. Enabled instrumented guards become inserted
//! barriers; disabled programmer guards become removed barriers.

pub mod constraints;
pub mod instrument;
pub mod minikernel;
pub mod oracle;
pub mod repair;
pub mod summary;

pub use constraints::{
    generate_clause, greedy_mhs, solve, solve_wpms, write_wdimacs, Clause, ClauseError, Constraint,
    Polarity, Solution, SolveResult, SolverError, Strategy,
};
pub use instrument::{
    apply_solution, barrier_weight, instrument, ApplyError, BarrierVariable, InstrumentError,
    InstrumentedKernel, WeightConfig,
};
pub use minikernel::{
    parse, pretty_print, structurally_equal, AssignTarget, BarrierLevel, BarrierOrigin,
    BarrierVarId, BinOp, Expr, ExprKind, Kernel, LaunchConfig, Param, ParamKind, ParseError,
    SourceLoc, Stmt, UnOp,
};
pub use oracle::{
    classify, verify, verify_kernel, AccessInfo, AccessKind, OracleConfig, RepairEligibility,
    ThreadId, Verdict, Verifier, VerifyError, WitnessEvent,
};
pub use repair::{
    progress_check, repair, CannotRepairReason, Change, ChangeAction, IterationRecord,
    RepairConfig, RepairOutcome, RepairRun, RepairStats,
};
pub use summary::{validate_summary_json, write_summary, SummaryFile};
