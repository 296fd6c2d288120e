//! The verification oracle: a bounded two-thread race and divergence checker.
//!
//! The oracle executes every thread of the launch once, independently, under
//! an isolated view of shared memory (each thread reads back only its own
//! writes; unwritten cells are 0). Because barriers never change
//! thread-local execution, the resulting per-thread event traces are
//! independent of which barriers are enabled — so they are computed once per
//! kernel and reused across all candidate solutions.
//!
//! For a given solution the checker then examines every ordered thread pair:
//! first for barrier divergence (the threads' sequences of enabled barriers
//! disagree), then for data races (conflicting shared accesses in the same
//! barrier epoch). Verdicts carry the witness data the repair loop needs to
//! build clauses.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::constraints::Solution;
use crate::instrument::InstrumentedKernel;
use crate::minikernel::{
    AssignTarget, BarrierLevel, BarrierVarId, BinOp, Expr, ExprKind, Kernel, LaunchConfig,
    ParamKind, SourceLoc, Stmt, UnOp,
};

/// Analysis limits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleConfig {
    /// Iteration bound for `while` loops without an explicit `unroll` hint.
    pub default_unroll: u32,
    /// Maximum number of statement executions per thread.
    pub step_budget: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            default_unroll: 2,
            step_budget: 100_000,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum VerifyError {
    #[error("analysis resource limit exceeded: {0}")]
    ResourceLimit(String),
}

/// A thread's coordinates in the launch grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ThreadId {
    pub block: u32,
    pub thread: u32,
}

impl ThreadId {
    pub fn new(block: u32, thread: u32) -> Self {
        ThreadId { block, thread }
    }
}

impl fmt::Display for ThreadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{}.t{}", self.block, self.thread)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessKind {
    Read,
    Write,
}

impl fmt::Display for AccessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AccessKind::Read => write!(f, "read"),
            AccessKind::Write => write!(f, "write"),
        }
    }
}

/// One shared-memory access in a race witness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessInfo {
    pub array: String,
    pub index: i64,
    pub kind: AccessKind,
    pub loc: SourceLoc,
    pub thread: ThreadId,
}

/// Outcome of verifying one kernel under one barrier assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Safe,
    /// Two conflicting shared accesses without a separating barrier.
    /// `disabled_on_path` lists the currently-disabled guard variables whose
    /// barrier, if enabled, would separate the two accesses.
    Race {
        access1: Option<AccessInfo>,
        access2: Option<AccessInfo>,
        disabled_on_path: BTreeSet<BarrierVarId>,
    },
    /// Two threads disagree on the sequence of barriers they reach.
    /// `enabled_at_fault` lists the currently-enabled guard variables
    /// implicated in the disagreement; `at` is the guard of the first
    /// unmatched barrier (None when it is an unguarded programmer barrier).
    Divergence {
        at: Option<BarrierVarId>,
        enabled_at_fault: BTreeSet<BarrierVarId>,
        threads: (ThreadId, ThreadId),
    },
    /// A failure barriers cannot repair (assertion violation, division by
    /// zero).
    Other(String),
}

/// Coarse classification of a verdict for the repair loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepairEligibility {
    /// Nothing to do.
    Safe,
    /// Race or divergence: a clause can (potentially) be derived.
    Repairable,
    /// A fault that toggling barriers cannot fix.
    NotRepairable,
}

pub fn classify(verdict: &Verdict) -> RepairEligibility {
    match verdict {
        Verdict::Safe => RepairEligibility::Safe,
        Verdict::Race { .. } | Verdict::Divergence { .. } => RepairEligibility::Repairable,
        Verdict::Other(_) => RepairEligibility::NotRepairable,
    }
}

/// One entry of a thread's execution trace, for diagnostics dumps.
#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct WitnessEvent {
    pub thread: String,
    pub seq: usize,
    pub action: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub array: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guard: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<String>,
    pub line: u32,
    pub col: u32,
}

// ---------------------------------------------------------------------------
// Lowered program representation.
// ---------------------------------------------------------------------------

/// Statement form executed by the oracle: loops carry resolved bounds and
/// every barrier statement carries a dense site ordinal.
enum LStmt {
    Assign {
        target: LTarget,
        value: Expr,
        loc: SourceLoc,
    },
    Barrier {
        site: usize,
    },
    If {
        cond: Expr,
        then_branch: Vec<LStmt>,
        else_branch: Vec<LStmt>,
    },
    While {
        cond: Expr,
        body: Vec<LStmt>,
        bound: u32,
    },
    Assert {
        cond: Expr,
        loc: SourceLoc,
    },
}

enum LTarget {
    Var(String),
    Elem(String, Expr),
}

#[derive(Debug, Clone)]
struct SiteInfo {
    level: BarrierLevel,
    guard: Option<BarrierVarId>,
    loc: SourceLoc,
}

struct Lowered {
    body: Vec<LStmt>,
    sites: Vec<SiteInfo>,
    site_of_var: BTreeMap<BarrierVarId, usize>,
}

fn lower(kernel: &Kernel, default_unroll: u32) -> Lowered {
    let mut lowered = Lowered {
        body: Vec::new(),
        sites: Vec::new(),
        site_of_var: BTreeMap::new(),
    };
    lowered.body = lower_block(
        &kernel.body,
        default_unroll,
        &mut lowered.sites,
        &mut lowered.site_of_var,
    );
    lowered
}

fn lower_block(
    stmts: &[Stmt],
    default_unroll: u32,
    sites: &mut Vec<SiteInfo>,
    site_of_var: &mut BTreeMap<BarrierVarId, usize>,
) -> Vec<LStmt> {
    let mut out = Vec::new();
    for stmt in stmts {
        match stmt {
            Stmt::Assign { target, value, loc } => {
                let target = match target {
                    AssignTarget::Var(name) => LTarget::Var(name.clone()),
                    AssignTarget::Elem(name, idx) => LTarget::Elem(name.clone(), idx.clone()),
                };
                out.push(LStmt::Assign {
                    target,
                    value: value.clone(),
                    loc: *loc,
                });
            }
            Stmt::Barrier {
                level, guard, loc, ..
            } => {
                let site = sites.len();
                sites.push(SiteInfo {
                    level: *level,
                    guard: *guard,
                    loc: *loc,
                });
                if let Some(g) = guard {
                    site_of_var.insert(*g, site);
                }
                out.push(LStmt::Barrier { site });
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => out.push(LStmt::If {
                cond: cond.clone(),
                then_branch: lower_block(then_branch, default_unroll, sites, site_of_var),
                else_branch: lower_block(else_branch, default_unroll, sites, site_of_var),
            }),
            Stmt::While {
                cond,
                body,
                unroll_hint,
                ..
            } => out.push(LStmt::While {
                cond: cond.clone(),
                body: lower_block(body, default_unroll, sites, site_of_var),
                bound: unroll_hint.unwrap_or(default_unroll),
            }),
            Stmt::Call { .. } => {
                unreachable!("helper calls are inlined during parsing")
            }
            Stmt::Assert { cond, loc } => out.push(LStmt::Assert {
                cond: cond.clone(),
                loc: *loc,
            }),
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Thread execution.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Event {
    Access {
        array: String,
        index: i64,
        kind: AccessKind,
        loc: SourceLoc,
    },
    Barrier {
        site: usize,
    },
}

#[derive(Debug, Clone)]
struct ThreadTrace {
    events: Vec<Event>,
    fault: Option<String>,
}

enum ExecStop {
    Fault(String),
    Budget,
}

struct Exec<'a> {
    kinds: &'a BTreeMap<String, ParamKind>,
    budget: u64,
    steps: u64,
    locals: HashMap<String, i64>,
    arrays: HashMap<String, HashMap<i64, i64>>,
    events: Vec<Event>,
}

impl Exec<'_> {
    fn step(&mut self) -> Result<(), ExecStop> {
        self.steps += 1;
        if self.steps > self.budget {
            Err(ExecStop::Budget)
        } else {
            Ok(())
        }
    }

    fn exec_block(&mut self, stmts: &[LStmt]) -> Result<(), ExecStop> {
        for stmt in stmts {
            self.exec_stmt(stmt)?;
        }
        Ok(())
    }

    fn exec_stmt(&mut self, stmt: &LStmt) -> Result<(), ExecStop> {
        self.step()?;
        match stmt {
            LStmt::Assign { target, value, loc } => match target {
                LTarget::Var(name) => {
                    let v = self.eval(value)?;
                    self.locals.insert(name.clone(), v);
                }
                LTarget::Elem(name, idx) => {
                    let i = self.eval(idx)?;
                    let v = self.eval(value)?;
                    if self.kinds.get(name) == Some(&ParamKind::SharedArray) {
                        self.events.push(Event::Access {
                            array: name.clone(),
                            index: i,
                            kind: AccessKind::Write,
                            loc: *loc,
                        });
                    }
                    self.arrays.entry(name.clone()).or_default().insert(i, v);
                }
            },
            LStmt::Barrier { site } => {
                self.events.push(Event::Barrier { site: *site });
            }
            LStmt::If {
                cond,
                then_branch,
                else_branch,
            } => {
                if self.eval(cond)? != 0 {
                    self.exec_block(then_branch)?;
                } else {
                    self.exec_block(else_branch)?;
                }
            }
            LStmt::While { cond, body, bound } => {
                // Bounded unwinding: at most `bound` iterations are explored.
                for _ in 0..*bound {
                    self.step()?;
                    if self.eval(cond)? == 0 {
                        break;
                    }
                    self.exec_block(body)?;
                }
            }
            LStmt::Assert { cond, loc } => {
                if self.eval(cond)? == 0 {
                    return Err(ExecStop::Fault(format!("assertion failed at {loc}")));
                }
            }
        }
        Ok(())
    }

    fn eval(&mut self, expr: &Expr) -> Result<i64, ExecStop> {
        Ok(match &expr.kind {
            ExprKind::IntLit(v) => *v,
            ExprKind::Var(name) => self.locals.get(name).copied().unwrap_or(0),
            ExprKind::Index(name, idx) => {
                let i = self.eval(idx)?;
                if self.kinds.get(name) == Some(&ParamKind::SharedArray) {
                    self.events.push(Event::Access {
                        array: name.clone(),
                        index: i,
                        kind: AccessKind::Read,
                        loc: expr.loc,
                    });
                }
                self.arrays
                    .get(name)
                    .and_then(|a| a.get(&i))
                    .copied()
                    .unwrap_or(0)
            }
            ExprKind::Unary(op, e) => {
                let v = self.eval(e)?;
                match op {
                    UnOp::Neg => v.wrapping_neg(),
                    UnOp::Not => (v == 0) as i64,
                }
            }
            ExprKind::Binary(op, l, r) => {
                // && and || short-circuit; everything else evaluates both
                // sides left to right.
                match op {
                    BinOp::And => {
                        let lv = self.eval(l)?;
                        if lv == 0 {
                            return Ok(0);
                        }
                        return Ok((self.eval(r)? != 0) as i64);
                    }
                    BinOp::Or => {
                        let lv = self.eval(l)?;
                        if lv != 0 {
                            return Ok(1);
                        }
                        return Ok((self.eval(r)? != 0) as i64);
                    }
                    _ => {}
                }
                let lv = self.eval(l)?;
                let rv = self.eval(r)?;
                match op {
                    BinOp::Add => lv.wrapping_add(rv),
                    BinOp::Sub => lv.wrapping_sub(rv),
                    BinOp::Mul => lv.wrapping_mul(rv),
                    BinOp::Div => {
                        if rv == 0 {
                            return Err(ExecStop::Fault(format!(
                                "division by zero at {}",
                                expr.loc
                            )));
                        }
                        lv.wrapping_div(rv)
                    }
                    BinOp::Mod => {
                        if rv == 0 {
                            return Err(ExecStop::Fault(format!("modulo by zero at {}", expr.loc)));
                        }
                        lv.wrapping_rem(rv)
                    }
                    BinOp::Eq => (lv == rv) as i64,
                    BinOp::Ne => (lv != rv) as i64,
                    BinOp::Lt => (lv < rv) as i64,
                    BinOp::Le => (lv <= rv) as i64,
                    BinOp::Gt => (lv > rv) as i64,
                    BinOp::Ge => (lv >= rv) as i64,
                    BinOp::And | BinOp::Or => unreachable!("handled above"),
                }
            }
        })
    }
}

// ---------------------------------------------------------------------------
// The verifier.
// ---------------------------------------------------------------------------

/// Bounded verifier for an instrumented kernel. Construction executes all
/// threads once; [`Verifier::verify`] is then cheap and can be called for
/// many solutions.
pub struct Verifier {
    vars: Vec<crate::instrument::BarrierVariable>,
    sites: Vec<SiteInfo>,
    site_of_var: BTreeMap<BarrierVarId, usize>,
    launch: LaunchConfig,
    traces: Vec<ThreadTrace>,
}

impl Verifier {
    pub fn new(ik: &InstrumentedKernel, cfg: &OracleConfig) -> Result<Verifier, VerifyError> {
        let lowered = lower(&ik.kernel, cfg.default_unroll);
        let kinds: BTreeMap<String, ParamKind> = ik
            .kernel
            .params
            .iter()
            .map(|p| (p.name.clone(), p.kind))
            .collect();
        let launch = ik.kernel.launch;
        let mut traces = Vec::new();
        for g in 0..launch.total_threads() {
            let tid = thread_of(launch, g);
            let mut locals = HashMap::new();
            locals.insert("tid".to_string(), tid.thread as i64);
            locals.insert("bid".to_string(), tid.block as i64);
            locals.insert("bdim".to_string(), launch.threads_per_block as i64);
            locals.insert("gdim".to_string(), launch.blocks as i64);
            let mut exec = Exec {
                kinds: &kinds,
                budget: cfg.step_budget,
                steps: 0,
                locals,
                arrays: HashMap::new(),
                events: Vec::new(),
            };
            let fault = match exec.exec_block(&lowered.body) {
                Ok(()) => None,
                Err(ExecStop::Fault(msg)) => Some(msg),
                Err(ExecStop::Budget) => {
                    return Err(VerifyError::ResourceLimit(format!(
                        "thread {tid} exceeded the step budget of {}",
                        cfg.step_budget
                    )));
                }
            };
            traces.push(ThreadTrace {
                events: exec.events,
                fault,
            });
        }
        Ok(Verifier {
            vars: ik.vars.clone(),
            sites: lowered.sites,
            site_of_var: lowered.site_of_var,
            launch,
            traces,
        })
    }

    pub fn launch(&self) -> LaunchConfig {
        self.launch
    }

    pub fn thread_ids(&self) -> Vec<ThreadId> {
        (0..self.launch.total_threads())
            .map(|g| thread_of(self.launch, g))
            .collect()
    }

    /// Checks the kernel under `sol`. Deterministic: thread pairs are
    /// examined in ascending global order and the first fault wins.
    pub fn verify(&self, sol: &Solution) -> Verdict {
        for (g, trace) in self.traces.iter().enumerate() {
            if let Some(msg) = &trace.fault {
                let tid = thread_of(self.launch, g as u32);
                return Verdict::Other(format!("thread {tid}: {msg}"));
            }
        }
        let n = self.traces.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let ti = thread_of(self.launch, i as u32);
                let tj = thread_of(self.launch, j as u32);
                let same_block = ti.block == tj.block;
                if let Some(v) = self.check_divergence(i, j, ti, tj, same_block, sol) {
                    return v;
                }
                if let Some(v) = self.check_race(i, j, ti, tj, same_block, sol) {
                    return v;
                }
            }
        }
        Verdict::Safe
    }

    fn site_enabled(&self, site: usize, sol: &Solution) -> bool {
        self.sites[site].guard.is_none_or(|g| sol.get(g))
    }

    fn site_syncs_pair(&self, site: usize, same_block: bool) -> bool {
        match self.sites[site].level {
            BarrierLevel::Grid => true,
            BarrierLevel::Block => same_block,
        }
    }

    /// The sequence of enabled barrier sites this thread passes that are
    /// relevant to a pair (block barriers only synchronize same-block pairs).
    fn sync_sequence(&self, t: usize, same_block: bool, sol: &Solution) -> Vec<usize> {
        self.traces[t]
            .events
            .iter()
            .filter_map(|e| match e {
                Event::Barrier { site }
                    if self.site_enabled(*site, sol) && self.site_syncs_pair(*site, same_block) =>
                {
                    Some(*site)
                }
                _ => None,
            })
            .collect()
    }

    fn check_divergence(
        &self,
        i: usize,
        j: usize,
        ti: ThreadId,
        tj: ThreadId,
        same_block: bool,
        sol: &Solution,
    ) -> Option<Verdict> {
        let s1 = self.sync_sequence(i, same_block, sol);
        let s2 = self.sync_sequence(j, same_block, sol);
        if s1 == s2 {
            return None;
        }
        let k = s1
            .iter()
            .zip(&s2)
            .position(|(a, b)| a != b)
            .unwrap_or_else(|| s1.len().min(s2.len()));
        // Prefer sites the two threads pass a different number of times —
        // those pinpoint the cause; fall back to every enabled barrier from
        // the first mismatch on.
        let mut count1: BTreeMap<usize, usize> = BTreeMap::new();
        let mut count2: BTreeMap<usize, usize> = BTreeMap::new();
        for &s in &s1 {
            *count1.entry(s).or_insert(0) += 1;
        }
        for &s in &s2 {
            *count2.entry(s).or_insert(0) += 1;
        }
        let all_sites: BTreeSet<usize> = count1.keys().chain(count2.keys()).copied().collect();
        let mut enabled_at_fault: BTreeSet<BarrierVarId> = all_sites
            .iter()
            .filter(|s| count1.get(s).unwrap_or(&0) != count2.get(s).unwrap_or(&0))
            .filter_map(|s| self.sites[*s].guard)
            .collect();
        if enabled_at_fault.is_empty() {
            enabled_at_fault = s1[k..]
                .iter()
                .chain(&s2[k..])
                .filter_map(|s| self.sites[*s].guard)
                .collect();
        }
        let at = s1
            .get(k)
            .or_else(|| s2.get(k))
            .and_then(|s| self.sites[*s].guard);
        Some(Verdict::Divergence {
            at,
            enabled_at_fault,
            threads: (ti, tj),
        })
    }

    /// Shared accesses of a thread annotated with their position in the trace
    /// and their barrier epoch relative to this pair.
    fn epoch_accesses<'s>(
        &'s self,
        t: usize,
        same_block: bool,
        sol: &Solution,
    ) -> Vec<(usize, u64, &'s str, i64, AccessKind, SourceLoc)> {
        let mut epoch = 0u64;
        let mut out = Vec::new();
        for (pos, event) in self.traces[t].events.iter().enumerate() {
            match event {
                Event::Barrier { site } => {
                    if self.site_enabled(*site, sol) && self.site_syncs_pair(*site, same_block) {
                        epoch += 1;
                    }
                }
                Event::Access {
                    array,
                    index,
                    kind,
                    loc,
                } => out.push((pos, epoch, array.as_str(), *index, *kind, *loc)),
            }
        }
        out
    }

    fn check_race(
        &self,
        i: usize,
        j: usize,
        ti: ThreadId,
        tj: ThreadId,
        same_block: bool,
        sol: &Solution,
    ) -> Option<Verdict> {
        let acc1 = self.epoch_accesses(i, same_block, sol);
        let acc2 = self.epoch_accesses(j, same_block, sol);
        for &(pos1, epoch1, array1, index1, kind1, loc1) in &acc1 {
            for &(pos2, epoch2, array2, index2, kind2, loc2) in &acc2 {
                let conflicting = array1 == array2
                    && index1 == index2
                    && (kind1 == AccessKind::Write || kind2 == AccessKind::Write)
                    && epoch1 == epoch2;
                if !conflicting {
                    continue;
                }
                let disabled_on_path = self.disabled_on_path(i, j, pos1, pos2, same_block, sol);
                return Some(Verdict::Race {
                    access1: Some(AccessInfo {
                        array: array1.to_string(),
                        index: index1,
                        kind: kind1,
                        loc: loc1,
                        thread: ti,
                    }),
                    access2: Some(AccessInfo {
                        array: array2.to_string(),
                        index: index2,
                        kind: kind2,
                        loc: loc2,
                        thread: tj,
                    }),
                    disabled_on_path,
                });
            }
        }
        None
    }

    /// Disabled guard variables whose barrier would separate the two racing
    /// accesses: enabling the barrier must change the relative epoch of the
    /// accesses, i.e. the two threads pass its site a different number of
    /// times before their respective access.
    fn disabled_on_path(
        &self,
        i: usize,
        j: usize,
        pos1: usize,
        pos2: usize,
        same_block: bool,
        sol: &Solution,
    ) -> BTreeSet<BarrierVarId> {
        let mut result = BTreeSet::new();
        for var in &self.vars {
            if sol.get(var.id) {
                continue;
            }
            let syncs = match var.level {
                BarrierLevel::Grid => true,
                BarrierLevel::Block => same_block,
            };
            if !syncs {
                continue;
            }
            let Some(&site) = self.site_of_var.get(&var.id) else {
                continue;
            };
            let c1 = self.count_site_before(i, site, pos1);
            let c2 = self.count_site_before(j, site, pos2);
            if c1 != c2 {
                result.insert(var.id);
            }
        }
        result
    }

    fn count_site_before(&self, t: usize, site: usize, pos: usize) -> usize {
        self.traces[t].events[..pos]
            .iter()
            .filter(|e| matches!(e, Event::Barrier { site: s } if *s == site))
            .count()
    }

    /// The full event trace of one thread under `sol`, for diagnostics dumps.
    pub fn trace_events(&self, thread: ThreadId, sol: &Solution) -> Vec<WitnessEvent> {
        let g = thread.block * self.launch.threads_per_block + thread.thread;
        let Some(trace) = self.traces.get(g as usize) else {
            return Vec::new();
        };
        trace
            .events
            .iter()
            .enumerate()
            .map(|(seq, event)| match event {
                Event::Access {
                    array,
                    index,
                    kind,
                    loc,
                } => WitnessEvent {
                    thread: thread.to_string(),
                    seq,
                    action: kind.to_string(),
                    array: Some(array.clone()),
                    index: Some(*index),
                    guard: None,
                    level: None,
                    line: loc.line,
                    col: loc.col,
                },
                Event::Barrier { site } => {
                    let info = &self.sites[*site];
                    WitnessEvent {
                        thread: thread.to_string(),
                        seq,
                        action: if self.site_enabled(*site, sol) {
                            "barrier".to_string()
                        } else {
                            "barrier_disabled".to_string()
                        },
                        array: None,
                        index: None,
                        guard: info.guard.map(|g| g.to_string()),
                        level: Some(
                            match info.level {
                                BarrierLevel::Block => "block",
                                BarrierLevel::Grid => "grid",
                            }
                            .to_string(),
                        ),
                        line: info.loc.line,
                        col: info.loc.col,
                    }
                }
            })
            .collect()
    }
}

fn thread_of(launch: LaunchConfig, global: u32) -> ThreadId {
    ThreadId {
        block: global / launch.threads_per_block,
        thread: global % launch.threads_per_block,
    }
}

/// One-shot verification of an instrumented kernel under a solution.
pub fn verify(
    ik: &InstrumentedKernel,
    sol: &Solution,
    cfg: &OracleConfig,
) -> Result<Verdict, VerifyError> {
    Ok(Verifier::new(ik, cfg)?.verify(sol))
}

/// Verifies a plain kernel as-is (all barriers unconditional).
pub fn verify_kernel(kernel: &Kernel, cfg: &OracleConfig) -> Result<Verdict, VerifyError> {
    let ik = InstrumentedKernel {
        kernel: kernel.clone(),
        vars: Vec::new(),
        source: kernel.clone(),
    };
    verify(&ik, &Solution::all_false(0), cfg)
}
