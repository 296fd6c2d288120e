//! The repair loop: alternately propose a barrier assignment (solver) and
//! check it (verifier), accumulating one clause per counterexample until the
//! kernel verifies, the constraints become unsatisfiable, or a budget runs
//! out.
//!
//! Iteration 1 always tests the all-false assignment (no candidate barriers,
//! programmer barriers removed), so kernels that are safe without any barrier
//! finish in one round and kernels whose programmer barriers are unnecessary
//! get them removed for free.

use std::time::{Duration, Instant};

use crate::constraints::{
    generate_clause, solve, solve_wpms, Clause, ClauseError, Constraint, Solution, SolveResult,
    Strategy,
};
use crate::instrument::{
    apply_solution, instrument, BarrierVariable, InstrumentError, InstrumentedKernel, WeightConfig,
};
use crate::minikernel::{BarrierLevel, BarrierOrigin, Kernel, SourceLoc};
use crate::oracle::{classify, OracleConfig, RepairEligibility, Verdict, Verifier, VerifyError};

#[derive(Debug, Clone, PartialEq)]
pub struct RepairConfig {
    pub strategy: Strategy,
    pub weights: WeightConfig,
    pub oracle: OracleConfig,
    /// Maximum number of solve/verify rounds before giving up.
    pub max_iterations: u32,
    /// Optional wall-clock bound for the whole loop.
    pub wall_timeout: Option<Duration>,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig {
            strategy: Strategy::default(),
            weights: WeightConfig::default(),
            oracle: OracleConfig::default(),
            max_iterations: 1000,
            wall_timeout: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CannotRepairReason {
    /// The accumulated clauses admit no assignment.
    UnsatConstraints,
    /// A counterexample implicated no toggleable barrier.
    EmptyWitness,
    /// The verifier reported a fault barriers cannot fix, a resource limit
    /// was hit, or the loop stopped making progress.
    NonRepairable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChangeAction {
    AddBarrier,
    RemoveBarrier,
}

/// One edit the repair makes relative to the original kernel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Change {
    pub action: ChangeAction,
    pub level: BarrierLevel,
    pub loc: SourceLoc,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RepairOutcome {
    /// A safe assignment was found. `changes` is empty when the kernel was
    /// already safe as written.
    Repaired {
        solution: Solution,
        kernel: Kernel,
        changes: Vec<Change>,
    },
    CannotRepair(CannotRepairReason),
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepairStats {
    pub iterations: u32,
    pub verifier_calls: u32,
    pub solver_calls: u32,
    /// Weight of the adopted solution (None unless repaired).
    pub total_weight: Option<u64>,
    pub strategy: Strategy,
}

/// One solve/verify round, for diagnostics and trace dumps.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub solution: Solution,
    pub verdict: Verdict,
    /// The clause this round contributed (None for safe rounds, empty
    /// witnesses, and unrepairable faults).
    pub clause: Option<Clause>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairRun {
    pub outcome: RepairOutcome,
    pub stats: RepairStats,
    /// The final accumulated constraint.
    pub constraint: Constraint,
    pub history: Vec<IterationRecord>,
    pub instrumented: InstrumentedKernel,
}

/// True when `clause` is new to `constraint`. A repeated clause means the
/// previous round's counterexample was not eliminated — the loop is stuck.
pub fn progress_check(constraint: &Constraint, clause: &Clause) -> bool {
    !constraint.contains(clause)
}

fn compute_changes(vars: &[BarrierVariable], sol: &Solution) -> Vec<Change> {
    vars.iter()
        .filter_map(|v| match (v.origin, sol.get(v.id)) {
            (BarrierOrigin::Instrumented, true) => Some(Change {
                action: ChangeAction::AddBarrier,
                level: v.level,
                loc: v.loc,
            }),
            (BarrierOrigin::Programmer, false) => Some(Change {
                action: ChangeAction::RemoveBarrier,
                level: v.level,
                loc: v.loc,
            }),
            _ => None,
        })
        .collect()
}

/// Runs the full repair loop on a plain (uninstrumented) kernel.
pub fn repair(kernel: &Kernel, cfg: &RepairConfig) -> Result<RepairRun, InstrumentError> {
    let ik = instrument(kernel, &cfg.weights)?;
    let weights: Vec<u64> = ik.vars.iter().map(|v| v.weight).collect();
    let start = Instant::now();
    let mut constraint = Constraint::new();
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut stats = RepairStats {
        iterations: 0,
        verifier_calls: 0,
        solver_calls: 0,
        total_weight: None,
        strategy: cfg.strategy,
    };

    let verifier = match Verifier::new(&ik, &cfg.oracle) {
        Ok(v) => v,
        Err(VerifyError::ResourceLimit(msg)) => {
            return Ok(RepairRun {
                outcome: RepairOutcome::CannotRepair(CannotRepairReason::NonRepairable(msg)),
                stats,
                constraint,
                history,
                instrumented: ik,
            });
        }
    };

    let outcome = loop {
        if stats.iterations >= cfg.max_iterations {
            break RepairOutcome::Timeout;
        }
        if let Some(limit) = cfg.wall_timeout {
            if start.elapsed() >= limit {
                break RepairOutcome::Timeout;
            }
        }
        stats.iterations += 1;

        let (result, calls) = match solve(&constraint, &weights, cfg.strategy) {
            Ok(r) => r,
            Err(e) => {
                break RepairOutcome::CannotRepair(CannotRepairReason::NonRepairable(
                    e.to_string(),
                ));
            }
        };
        stats.solver_calls += calls;
        let sol = match result {
            SolveResult::Sat(sol) => sol,
            SolveResult::Unsat => {
                break RepairOutcome::CannotRepair(CannotRepairReason::UnsatConstraints);
            }
        };

        stats.verifier_calls += 1;
        let verdict = verifier.verify(&sol);
        match classify(&verdict) {
            RepairEligibility::Safe => {
                history.push(IterationRecord {
                    solution: sol.clone(),
                    verdict,
                    clause: None,
                });
                let mut best = sol;
                // The greedy strategy may stop at a heavier-than-necessary
                // solution: run the exact solver once and adopt its result if
                // it is strictly lighter and still verifies.
                if cfg.strategy == Strategy::Mhs && !constraint.is_empty() {
                    stats.solver_calls += 1;
                    if let SolveResult::Sat(candidate) = solve_wpms(&constraint, &weights) {
                        if candidate.total_weight < best.total_weight {
                            stats.verifier_calls += 1;
                            let verdict = verifier.verify(&candidate);
                            let safe = matches!(verdict, Verdict::Safe);
                            history.push(IterationRecord {
                                solution: candidate.clone(),
                                verdict,
                                clause: None,
                            });
                            if safe {
                                best = candidate;
                            }
                        }
                    }
                }
                let repaired =
                    apply_solution(&ik, &best).expect("solvers produce total assignments");
                let changes = compute_changes(&ik.vars, &best);
                stats.total_weight = Some(best.total_weight);
                break RepairOutcome::Repaired {
                    solution: best,
                    kernel: repaired,
                    changes,
                };
            }
            RepairEligibility::NotRepairable => {
                let msg = match &verdict {
                    Verdict::Other(m) => m.clone(),
                    _ => unreachable!("only Other classifies as NotRepairable"),
                };
                history.push(IterationRecord {
                    solution: sol,
                    verdict,
                    clause: None,
                });
                break RepairOutcome::CannotRepair(CannotRepairReason::NonRepairable(msg));
            }
            RepairEligibility::Repairable => match generate_clause(&verdict) {
                Ok(clause) => {
                    debug_assert!(
                        !clause.satisfied_by(&sol.assignment),
                        "a counterexample clause must be falsified by the solution that produced it"
                    );
                    let fresh = progress_check(&constraint, &clause);
                    constraint.add(clause.clone());
                    history.push(IterationRecord {
                        solution: sol,
                        verdict,
                        clause: Some(clause),
                    });
                    if !fresh {
                        break RepairOutcome::CannotRepair(CannotRepairReason::NonRepairable(
                            "repair loop made no progress (the same counterexample clause came back)"
                                .to_string(),
                        ));
                    }
                }
                Err(ClauseError::EmptyWitness) => {
                    history.push(IterationRecord {
                        solution: sol,
                        verdict,
                        clause: None,
                    });
                    break RepairOutcome::CannotRepair(CannotRepairReason::EmptyWitness);
                }
                Err(ClauseError::NoClause(_)) => {
                    unreachable!("Race/Divergence verdicts always induce a clause or EmptyWitness")
                }
            },
        }
    };

    Ok(RepairRun {
        outcome,
        stats,
        constraint,
        history,
        instrumented: ik,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minikernel::{parse, BarrierVarId};

    fn run(src: &str) -> RepairRun {
        run_with(src, &RepairConfig::default())
    }

    fn run_with(src: &str, cfg: &RepairConfig) -> RepairRun {
        let kernel = parse("test.mk", src).expect("parse");
        repair(&kernel, cfg).expect("instrument")
    }

    const RACE_SRC: &str = "\
kernel addNeighbor(shared int A[]) {
  x = A[tid + 1];
  A[tid] = x;
}
";

    #[test]
    fn repairs_read_write_race_with_one_cheap_barrier() {
        let run = run(RACE_SRC);
        match &run.outcome {
            RepairOutcome::Repaired {
                solution, changes, ..
            } => {
                assert_eq!(solution.total_weight, 1);
                assert_eq!(
                    changes,
                    &vec![Change {
                        action: ChangeAction::AddBarrier,
                        level: BarrierLevel::Block,
                        loc: SourceLoc::new(3, 3),
                    }]
                );
            }
            other => panic!("expected a repair, got {other:?}"),
        }
        assert_eq!(run.stats.iterations, 2);
        assert_eq!(run.stats.verifier_calls, 2);
        // Two greedy solves plus the final exact minimality check.
        assert_eq!(run.stats.solver_calls, 3);
        assert_eq!(run.stats.total_weight, Some(1));
        assert_eq!(run.history.len(), 2);
        assert!(run.history[0].clause.is_some());
        assert!(run.history[1].clause.is_none());
    }

    #[test]
    fn exact_strategy_reaches_the_same_repair() {
        let cfg = RepairConfig {
            strategy: Strategy::MaxSat,
            ..RepairConfig::default()
        };
        let run = run_with(RACE_SRC, &cfg);
        match &run.outcome {
            RepairOutcome::Repaired {
                solution, changes, ..
            } => {
                assert_eq!(solution.total_weight, 1);
                assert_eq!(changes.len(), 1);
            }
            other => panic!("expected a repair, got {other:?}"),
        }
        // No extra minimality pass for the exact strategy.
        assert_eq!(run.stats.solver_calls, 2);
        assert_eq!(run.stats.strategy, Strategy::MaxSat);
    }

    #[test]
    fn removes_unnecessary_programmer_barrier_in_one_round() {
        let src = "\
kernel separate(shared int A[]) {
  A[tid] = 1;
  barrier;
  A[tid] = 2;
}
";
        let run = run(src);
        match &run.outcome {
            RepairOutcome::Repaired { changes, .. } => {
                assert_eq!(
                    changes,
                    &vec![Change {
                        action: ChangeAction::RemoveBarrier,
                        level: BarrierLevel::Block,
                        loc: SourceLoc::new(3, 3),
                    }]
                );
            }
            other => panic!("expected a repair, got {other:?}"),
        }
        assert_eq!(run.stats.iterations, 1);
        assert_eq!(run.stats.solver_calls, 1, "no minimality pass needed");
    }

    #[test]
    fn keeps_a_necessary_programmer_barrier_with_no_changes() {
        let src = "\
kernel addNeighbor(shared int A[]) {
  x = A[tid + 1];
  barrier;
  A[tid] = x;
}
";
        let run = run(src);
        match &run.outcome {
            RepairOutcome::Repaired {
                solution, changes, ..
            } => {
                assert!(changes.is_empty(), "kernel is already safe as written");
                // The kept barrier is the programmer one (guard b3).
                assert_eq!(
                    solution.enabled().collect::<Vec<_>>(),
                    vec![BarrierVarId(3)]
                );
            }
            other => panic!("expected a repair, got {other:?}"),
        }
        assert_eq!(run.stats.iterations, 2);
    }

    #[test]
    fn safe_kernel_needs_one_iteration_and_no_changes() {
        let src = "\
kernel fill(shared int A[], int n) {
  A[tid] = tid * n;
}
";
        let run = run(src);
        match &run.outcome {
            RepairOutcome::Repaired {
                solution, changes, ..
            } => {
                assert!(changes.is_empty());
                assert_eq!(solution.total_weight, 0);
            }
            other => panic!("expected a repair, got {other:?}"),
        }
        assert_eq!(run.stats.iterations, 1);
        assert_eq!(run.stats.verifier_calls, 1);
        assert_eq!(run.stats.solver_calls, 1);
    }

    #[test]
    fn race_in_divergent_branch_is_unrepairable() {
        let src = "\
kernel gated(shared int A[]) {
  if (tid < 2) {
    x = A[tid + 1];
    A[tid] = x;
  }
}
";
        let run = run(src);
        assert_eq!(
            run.outcome,
            RepairOutcome::CannotRepair(CannotRepairReason::UnsatConstraints)
        );
        // Rounds: race, divergence (block), divergence (grid), unsat.
        assert_eq!(run.stats.iterations, 4);
        // The final constraint mixes positive and negative clauses over the
        // same variables.
        let polarities: Vec<_> = run.constraint.iter().map(|c| c.polarity()).collect();
        assert!(polarities.contains(&Some(crate::constraints::Polarity::Pos)));
        assert!(polarities.contains(&Some(crate::constraints::Polarity::Neg)));
    }

    #[test]
    fn same_statement_collision_reports_empty_witness() {
        let src = "\
kernel collide(shared int A[]) {
  A[0] = tid;
}
";
        let run = run(src);
        assert_eq!(
            run.outcome,
            RepairOutcome::CannotRepair(CannotRepairReason::EmptyWitness)
        );
        assert_eq!(run.stats.iterations, 1);
    }

    #[test]
    fn assertion_failure_is_not_repairable() {
        let src = "\
kernel bad(shared int A[]) {
  A[tid] = tid;
  assert(A[tid] == tid + 1);
}
";
        let run = run(src);
        match &run.outcome {
            RepairOutcome::CannotRepair(CannotRepairReason::NonRepairable(msg)) => {
                assert!(msg.contains("assertion failed"), "message: {msg}");
            }
            other => panic!("expected NonRepairable, got {other:?}"),
        }
    }

    #[test]
    fn iteration_budget_triggers_timeout() {
        let cfg = RepairConfig {
            max_iterations: 1,
            ..RepairConfig::default()
        };
        let run = run_with(RACE_SRC, &cfg);
        assert_eq!(run.outcome, RepairOutcome::Timeout);
        assert_eq!(run.stats.iterations, 1);
    }

    #[test]
    fn wall_clock_budget_triggers_timeout() {
        let cfg = RepairConfig {
            wall_timeout: Some(Duration::ZERO),
            ..RepairConfig::default()
        };
        let run = run_with(RACE_SRC, &cfg);
        assert_eq!(run.outcome, RepairOutcome::Timeout);
        assert_eq!(run.stats.iterations, 0);
    }

    #[test]
    fn instrumenting_twice_is_rejected() {
        let src = "\
kernel pre(shared int A[]) {
  barrier when b1;
  A[tid] = tid;
}
";
        let kernel = parse("test.mk", src).unwrap();
        assert!(matches!(
            repair(&kernel, &RepairConfig::default()),
            Err(InstrumentError::AlreadyInstrumented)
        ));
    }

    #[test]
    fn history_clauses_are_monotone_fresh_and_falsified() {
        let src = "\
kernel gated(shared int A[]) {
  if (tid < 2) {
    x = A[tid + 1];
    A[tid] = x;
  }
}
";
        let run = run(src);
        let mut seen = Vec::new();
        for record in &run.history {
            if let Some(clause) = &record.clause {
                assert!(clause.is_monotone(), "generated clauses are monotone");
                assert!(
                    !clause.satisfied_by(&record.solution.assignment),
                    "each clause must rule out the solution that produced it"
                );
                assert!(!seen.contains(clause), "clauses never repeat");
                seen.push(clause.clone());
            }
        }
        assert!(!seen.is_empty());
    }

    #[test]
    fn grid_barrier_repairs_cross_block_race() {
        let src = "\
kernel interBlock(shared int A[]) launch(2, 2) {
  gid = bid * bdim + tid;
  x = A[gid + 1];
  A[gid] = x;
}
";
        let run = run(src);
        match &run.outcome {
            RepairOutcome::Repaired {
                solution, changes, ..
            } => {
                assert_eq!(solution.total_weight, 13);
                assert_eq!(
                    changes,
                    &vec![Change {
                        action: ChangeAction::AddBarrier,
                        level: BarrierLevel::Grid,
                        loc: SourceLoc::new(4, 3),
                    }]
                );
            }
            other => panic!("expected a grid repair, got {other:?}"),
        }
    }

    #[test]
    fn grid_disabled_makes_cross_block_race_an_empty_witness() {
        let src = "\
kernel interBlock(shared int A[]) launch(2, 2) {
  gid = bid * bdim + tid;
  x = A[gid + 1];
  A[gid] = x;
}
";
        let cfg = RepairConfig {
            weights: WeightConfig {
                grid_enabled: false,
                ..WeightConfig::default()
            },
            ..RepairConfig::default()
        };
        let run = run_with(src, &cfg);
        assert_eq!(
            run.outcome,
            RepairOutcome::CannotRepair(CannotRepairReason::EmptyWitness)
        );
    }

    #[test]
    fn nested_loops_pay_depth_scaled_weights() {
        let src = "\
kernel nested(shared int A[]) {
  i = 0;
  while (i < 2) unroll 2 {
    j = 0;
    while (j < 2) unroll 2 {
      A[tid] = j;
      x = A[tid + 1];
      j = j + 1;
    }
    i = i + 1;
  }
}
";
        let run = run(src);
        match &run.outcome {
            RepairOutcome::Repaired {
                solution, changes, ..
            } => {
                assert_eq!(
                    solution.total_weight, 200,
                    "two block barriers at loop depth 2"
                );
                assert_eq!(changes.len(), 2);
                assert!(changes.iter().all(
                    |c| c.action == ChangeAction::AddBarrier && c.level == BarrierLevel::Block
                ));
            }
            other => panic!("expected a repair, got {other:?}"),
        }
    }
}
