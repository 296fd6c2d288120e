//! Barrier instrumentation.
//!
//! Rewrites a kernel so that every program point where a synchronization
//! barrier could help carries a *guarded* barrier `barrier when bN;` whose
//! guard variable `bN` a solver can later switch on or off. Existing
//! programmer barriers are (optionally) guarded too, so the solver may remove
//! them. Each guard variable gets a weight expressing how expensive enabling
//! the barrier would be at runtime.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::constraints::Solution;
use crate::minikernel::{
    AssignTarget, BarrierLevel, BarrierOrigin, BarrierVarId, Expr, Kernel, ParamKind, SourceLoc,
    Stmt,
};

/// Loop depths beyond this cap no longer increase barrier weight.
pub const LOOP_DEPTH_CAP: u32 = 6;

/// Weight parameters and feature toggles for instrumentation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightConfig {
    /// Additive penalty for grid-level barriers.
    pub grid_weight: u64,
    /// Multiplicative penalty base per loop-nesting level.
    pub loop_weight: u64,
    /// When false, no grid-level candidate barriers are inserted.
    pub grid_enabled: bool,
    /// When false, existing programmer barriers are left untouched (they can
    /// then never be removed by a repair).
    pub inspect_existing: bool,
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig {
            grid_weight: 12,
            loop_weight: 10,
            grid_enabled: true,
            inspect_existing: true,
        }
    }
}

/// Cost of enabling a barrier of `level` at loop-nesting depth `loop_depth`:
/// `loop_weight ^ depth`, plus `grid_weight` for grid-level barriers.
pub fn barrier_weight(cfg: &WeightConfig, level: BarrierLevel, loop_depth: u32) -> u64 {
    let depth = loop_depth.min(LOOP_DEPTH_CAP);
    let base = cfg.loop_weight.saturating_pow(depth);
    match level {
        BarrierLevel::Block => base,
        BarrierLevel::Grid => cfg.grid_weight.saturating_add(base),
    }
}

/// One guard variable introduced by instrumentation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BarrierVariable {
    pub id: BarrierVarId,
    /// Location of the statement the barrier precedes (for inserted
    /// candidates) or of the barrier itself (for guarded programmer barriers).
    pub loc: SourceLoc,
    pub level: BarrierLevel,
    pub origin: BarrierOrigin,
    pub loop_depth: u32,
    pub weight: u64,
}

/// A kernel whose barriers are all guarded by solver-controlled variables.
#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentedKernel {
    /// The rewritten kernel; every barrier with a guard corresponds to an
    /// entry in `vars`.
    pub kernel: Kernel,
    /// Guard variables in source order; `vars[i].id == BarrierVarId(i + 1)`.
    pub vars: Vec<BarrierVariable>,
    /// The kernel as parsed, before instrumentation.
    pub source: Kernel,
}

impl InstrumentedKernel {
    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn var(&self, id: BarrierVarId) -> Option<&BarrierVariable> {
        let idx = (id.0 as usize).checked_sub(1)?;
        self.vars.get(idx)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum InstrumentError {
    #[error("kernel already contains guarded barriers (`barrier when bN`); refusing to instrument twice")]
    AlreadyInstrumented,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ApplyError {
    #[error("solution assigns {got} of {expected} barrier variables")]
    MissingAssignment { expected: usize, got: usize },
}

/// Inserts guarded candidate barriers and guards existing programmer
/// barriers.
///
/// Candidate barriers (block-level, plus grid-level when enabled) go:
/// - before every statement that reads or writes a shared array,
/// - before every `if` statement,
/// - at every loop head (before the first statement of a `while` body),
/// - before the first statement inlined from a shared-array-touching helper
///   call.
///
/// Insertions at the same program point are merged (at most one block-level
/// and one grid-level candidate per point). Guard variables are numbered
/// `b1..bm` in source order, block before grid at the same point.
pub fn instrument(
    kernel: &Kernel,
    cfg: &WeightConfig,
) -> Result<InstrumentedKernel, InstrumentError> {
    if has_guarded_barrier(&kernel.body) {
        return Err(InstrumentError::AlreadyInstrumented);
    }
    let shared: BTreeSet<String> = kernel
        .params
        .iter()
        .filter(|p| p.kind == ParamKind::SharedArray)
        .map(|p| p.name.clone())
        .collect();
    let call_sites: BTreeSet<SourceLoc> = kernel.call_sites.iter().copied().collect();
    let mut inst = Instrumenter {
        cfg,
        shared,
        call_sites,
        vars: Vec::new(),
    };
    let body = inst.instrument_block(&kernel.body, 0, false);
    let mut instrumented = kernel.clone();
    instrumented.body = body;
    Ok(InstrumentedKernel {
        kernel: instrumented,
        vars: inst.vars,
        source: kernel.clone(),
    })
}

fn has_guarded_barrier(stmts: &[Stmt]) -> bool {
    stmts.iter().any(|s| match s {
        Stmt::Barrier { guard, .. } => guard.is_some(),
        Stmt::If {
            then_branch,
            else_branch,
            ..
        } => has_guarded_barrier(then_branch) || has_guarded_barrier(else_branch),
        Stmt::While { body, .. } => has_guarded_barrier(body),
        _ => false,
    })
}

struct Instrumenter<'a> {
    cfg: &'a WeightConfig,
    shared: BTreeSet<String>,
    call_sites: BTreeSet<SourceLoc>,
    vars: Vec<BarrierVariable>,
}

impl Instrumenter<'_> {
    fn fresh(
        &mut self,
        loc: SourceLoc,
        level: BarrierLevel,
        origin: BarrierOrigin,
        depth: u32,
    ) -> BarrierVarId {
        let id = BarrierVarId(self.vars.len() as u32 + 1);
        self.vars.push(BarrierVariable {
            id,
            loc,
            level,
            origin,
            loop_depth: depth,
            weight: barrier_weight(self.cfg, level, depth),
        });
        id
    }

    /// Emits the merged block(+grid) candidate pair for one program point.
    fn push_candidates(&mut self, out: &mut Vec<Stmt>, loc: SourceLoc, depth: u32) {
        let guard = self.fresh(loc, BarrierLevel::Block, BarrierOrigin::Instrumented, depth);
        out.push(Stmt::Barrier {
            level: BarrierLevel::Block,
            origin: BarrierOrigin::Instrumented,
            guard: Some(guard),
            loc,
        });
        if self.cfg.grid_enabled {
            let guard = self.fresh(loc, BarrierLevel::Grid, BarrierOrigin::Instrumented, depth);
            out.push(Stmt::Barrier {
                level: BarrierLevel::Grid,
                origin: BarrierOrigin::Instrumented,
                guard: Some(guard),
                loc,
            });
        }
    }

    fn instrument_block(&mut self, stmts: &[Stmt], depth: u32, loop_head: bool) -> Vec<Stmt> {
        let mut out = Vec::new();
        for (i, stmt) in stmts.iter().enumerate() {
            let at_head = loop_head && i == 0;
            if at_head || self.needs_candidate(stmt) || self.call_sites.contains(&stmt.loc()) {
                self.push_candidates(&mut out, stmt.loc(), depth);
            }
            match stmt {
                Stmt::Barrier {
                    level,
                    origin: _,
                    guard: _,
                    loc,
                } => {
                    if self.cfg.inspect_existing {
                        let guard = self.fresh(*loc, *level, BarrierOrigin::Programmer, depth);
                        out.push(Stmt::Barrier {
                            level: *level,
                            origin: BarrierOrigin::Programmer,
                            guard: Some(guard),
                            loc: *loc,
                        });
                    } else {
                        out.push(stmt.clone());
                    }
                }
                Stmt::If {
                    cond,
                    then_branch,
                    else_branch,
                    loc,
                } => {
                    let then_branch = self.instrument_block(then_branch, depth, false);
                    let else_branch = self.instrument_block(else_branch, depth, false);
                    out.push(Stmt::If {
                        cond: cond.clone(),
                        then_branch,
                        else_branch,
                        loc: *loc,
                    });
                }
                Stmt::While {
                    cond,
                    body,
                    unroll_hint,
                    loc,
                } => {
                    let body = self.instrument_block(body, depth + 1, !body.is_empty());
                    out.push(Stmt::While {
                        cond: cond.clone(),
                        body,
                        unroll_hint: *unroll_hint,
                        loc: *loc,
                    });
                }
                other => out.push(other.clone()),
            }
        }
        out
    }

    fn needs_candidate(&self, stmt: &Stmt) -> bool {
        match stmt {
            Stmt::Assign { target, value, .. } => {
                let target_shared = match target {
                    AssignTarget::Var(_) => false,
                    AssignTarget::Elem(name, idx) => {
                        self.shared.contains(name) || self.expr_touches(idx)
                    }
                };
                target_shared || self.expr_touches(value)
            }
            // A barrier before every branch point lets repairs synchronize
            // right where control flow may diverge.
            Stmt::If { .. } => true,
            Stmt::While { cond, .. } => self.expr_touches(cond),
            Stmt::Assert { cond, .. } => self.expr_touches(cond),
            Stmt::Barrier { .. } | Stmt::Call { .. } => false,
        }
    }

    fn expr_touches(&self, expr: &Expr) -> bool {
        let mut arrays = Vec::new();
        expr.collect_indexed_arrays(&mut arrays);
        arrays.iter().any(|a| self.shared.contains(a))
    }
}

/// Materializes a solver assignment: guarded barriers with a true guard
/// become plain barriers, those with a false guard are removed, unguarded
/// barriers stay. The result is a plain kernel ready to print.
pub fn apply_solution(ik: &InstrumentedKernel, sol: &Solution) -> Result<Kernel, ApplyError> {
    if sol.assignment.len() != ik.vars.len() {
        return Err(ApplyError::MissingAssignment {
            expected: ik.vars.len(),
            got: sol.assignment.len(),
        });
    }
    let mut kernel = ik.kernel.clone();
    kernel.body = apply_block(&ik.kernel.body, sol);
    kernel.call_sites = ik.source.call_sites.clone();
    Ok(kernel)
}

fn apply_block(stmts: &[Stmt], sol: &Solution) -> Vec<Stmt> {
    let mut out = Vec::new();
    for stmt in stmts {
        match stmt {
            Stmt::Barrier {
                level,
                origin,
                guard: Some(id),
                loc,
            } => {
                if sol.get(*id) {
                    out.push(Stmt::Barrier {
                        level: *level,
                        origin: *origin,
                        guard: None,
                        loc: *loc,
                    });
                }
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                loc,
            } => out.push(Stmt::If {
                cond: cond.clone(),
                then_branch: apply_block(then_branch, sol),
                else_branch: apply_block(else_branch, sol),
                loc: *loc,
            }),
            Stmt::While {
                cond,
                body,
                unroll_hint,
                loc,
            } => out.push(Stmt::While {
                cond: cond.clone(),
                body: apply_block(body, sol),
                unroll_hint: *unroll_hint,
                loc: *loc,
            }),
            other => out.push(other.clone()),
        }
    }
    out
}
