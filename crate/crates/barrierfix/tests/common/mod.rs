//! Independent brute-force checker used to cross-validate the verifier.
//!
//! Unlike the verifier, which analyses one solution-independent trace per
//! thread, this checker actually *runs* the kernel against a single true
//! shared store and enumerates every interleaving of shared-memory accesses
//! (with memoization over global states). It reports:
//!
//! - `Race`: some reachable state has two conflicting shared accesses pending
//!   in different threads (the classic co-enabledness characterization),
//! - `Divergence`: some reachable state deadlocks at barriers (a barrier can
//!   only release once *every* thread of its scope waits at that same
//!   occurrence; a thread that finished or waits elsewhere blocks it forever),
//! - `Fault`: an assertion fails or a division/modulo by zero occurs in some
//!   execution,
//! - `Safe`: none of the above in any interleaving.
//!
//! Loops are statically unrolled to their hint (or the given default), and
//! every statement is split so it performs at most one shared access; local
//! computation commutes with everything (each thread owns its locals), and
//! barrier arrivals commute with all other actions, so both are applied
//! eagerly without branching the schedule. Class precedence when different
//! schedules exhibit different phenomena is Race, then Fault, then
//! Divergence; the corpus kernels are built so at most one phenomenon is
//! reachable per (kernel, solution) pair.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use barrierfix::{
    AssignTarget, BarrierLevel, BinOp, Expr, ExprKind, Kernel, ParamKind, SourceLoc, Stmt, UnOp,
    Verdict,
};

/// Outcome classes shared between the verifier and this checker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimClass {
    Safe,
    Race,
    Divergence,
    Fault,
}

/// Maps a verifier verdict onto the class lattice used for comparison.
pub fn verdict_class(v: &Verdict) -> SimClass {
    match v {
        Verdict::Safe => SimClass::Safe,
        Verdict::Race { .. } => SimClass::Race,
        Verdict::Divergence { .. } => SimClass::Divergence,
        Verdict::Other(_) => SimClass::Fault,
    }
}

// ---------------------------------------------------------------------------
// Flattened program representation
// ---------------------------------------------------------------------------

/// Assignment destination that never touches shared memory.
#[derive(Debug, Clone)]
enum LTarget {
    Var(String),
    /// Element of a per-thread (private) array.
    PrivElem(String, Expr),
}

/// One flattened statement. Expressions inside `Local`, `If`, `Assert`, and
/// the `index`/`value` positions contain no shared-array reads; those have
/// been hoisted into dedicated `ReadShared` steps.
#[derive(Debug, Clone)]
enum FStmt {
    Local {
        target: LTarget,
        value: Expr,
    },
    ReadShared {
        array: String,
        index: Expr,
        dst: String,
    },
    WriteShared {
        array: String,
        index: Expr,
        value: Expr,
    },
    Barrier {
        site: usize,
    },
    If {
        cond: Expr,
        then_b: usize,
        else_b: usize,
    },
    Assert {
        cond: Expr,
    },
}

struct Flat {
    blocks: Vec<Vec<FStmt>>,
    entry: usize,
    /// site id -> barrier scope.
    site_levels: Vec<BarrierLevel>,
}

struct Flattener {
    shared: BTreeSet<String>,
    blocks: Vec<Vec<FStmt>>,
    site_levels: Vec<BarrierLevel>,
    next_tmp: u32,
    default_unroll: u32,
}

fn no_loc() -> SourceLoc {
    SourceLoc::new(0, 0)
}

impl Flattener {
    fn flatten(kernel: &Kernel, default_unroll: u32) -> Flat {
        let mut f = Flattener {
            shared: kernel
                .shared_arrays()
                .into_iter()
                .map(str::to_string)
                .collect(),
            blocks: Vec::new(),
            site_levels: Vec::new(),
            next_tmp: 0,
            default_unroll,
        };
        let entry = f.flatten_block(&kernel.body);
        Flat {
            blocks: f.blocks,
            entry,
            site_levels: f.site_levels,
        }
    }

    fn push_block(&mut self, stmts: Vec<FStmt>) -> usize {
        self.blocks.push(stmts);
        self.blocks.len() - 1
    }

    fn flatten_block(&mut self, stmts: &[Stmt]) -> usize {
        let mut out = Vec::new();
        for s in stmts {
            self.flatten_stmt(&mut out, s);
        }
        self.push_block(out)
    }

    fn fresh(&mut self) -> String {
        let n = self.next_tmp;
        self.next_tmp += 1;
        // `$` cannot appear in source identifiers, so temps never collide.
        format!("${n}")
    }

    fn flatten_stmt(&mut self, out: &mut Vec<FStmt>, s: &Stmt) {
        match s {
            Stmt::Assign { target, value, .. } => match target {
                AssignTarget::Var(name) => {
                    let v = self.hoist(out, value);
                    out.push(FStmt::Local {
                        target: LTarget::Var(name.clone()),
                        value: v,
                    });
                }
                AssignTarget::Elem(array, index) => {
                    // Index evaluates before the value, matching the verifier.
                    let ix = self.hoist(out, index);
                    let v = self.hoist(out, value);
                    if self.shared.contains(array.as_str()) {
                        out.push(FStmt::WriteShared {
                            array: array.clone(),
                            index: ix,
                            value: v,
                        });
                    } else {
                        out.push(FStmt::Local {
                            target: LTarget::PrivElem(array.clone(), ix),
                            value: v,
                        });
                    }
                }
            },
            Stmt::Barrier { level, guard, .. } => {
                assert!(
                    guard.is_none(),
                    "the interleaving checker only accepts plain kernels; \
                     apply a solution before simulating"
                );
                let site = self.site_levels.len();
                self.site_levels.push(*level);
                out.push(FStmt::Barrier { site });
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                let c = self.hoist(out, cond);
                let then_b = self.flatten_block(then_branch);
                let else_b = self.flatten_block(else_branch);
                out.push(FStmt::If {
                    cond: c,
                    then_b,
                    else_b,
                });
            }
            Stmt::While {
                cond,
                body,
                unroll_hint,
                ..
            } => {
                let k = unroll_hint.unwrap_or(self.default_unroll);
                self.flatten_while(out, cond, body, k);
            }
            Stmt::Assert { cond, .. } => {
                let c = self.hoist(out, cond);
                out.push(FStmt::Assert { cond: c });
            }
            Stmt::Call { .. } => unreachable!("helper calls are inlined by the parser"),
        }
    }

    /// `while (c) { body }` bounded at `k` iterations becomes `k` nested
    /// `if (c) { body; if (c) { ... } }` blocks, so every unrolled barrier
    /// occurrence gets its own site id and conditions are re-evaluated (and
    /// their shared reads re-issued) on each iteration.
    fn flatten_while(&mut self, out: &mut Vec<FStmt>, cond: &Expr, body: &[Stmt], k: u32) {
        if k == 0 {
            return;
        }
        let c = self.hoist(out, cond);
        let mut inner = Vec::new();
        for s in body {
            self.flatten_stmt(&mut inner, s);
        }
        self.flatten_while(&mut inner, cond, body, k - 1);
        let then_b = self.push_block(inner);
        let else_b = self.push_block(Vec::new());
        out.push(FStmt::If {
            cond: c,
            then_b,
            else_b,
        });
    }

    /// Rewrites `e`, emitting a `ReadShared` step for every shared-array read
    /// and replacing it with a fresh temp. Short-circuit operands that read
    /// shared memory keep their conditionality by lowering into an `If`.
    fn hoist(&mut self, out: &mut Vec<FStmt>, e: &Expr) -> Expr {
        let kind = match &e.kind {
            ExprKind::IntLit(v) => ExprKind::IntLit(*v),
            ExprKind::Var(n) => ExprKind::Var(n.clone()),
            ExprKind::Index(name, idx) => {
                let ix = self.hoist(out, idx);
                if self.shared.contains(name.as_str()) {
                    let tmp = self.fresh();
                    out.push(FStmt::ReadShared {
                        array: name.clone(),
                        index: ix,
                        dst: tmp.clone(),
                    });
                    ExprKind::Var(tmp)
                } else {
                    ExprKind::Index(name.clone(), Box::new(ix))
                }
            }
            ExprKind::Unary(op, a) => ExprKind::Unary(*op, Box::new(self.hoist(out, a))),
            ExprKind::Binary(op @ (BinOp::And | BinOp::Or), l, r)
                if reads_shared(r, &self.shared) =>
            {
                let lv = self.hoist(out, l);
                let tmp = self.fresh();
                let lbool = Expr::new(
                    ExprKind::Binary(
                        BinOp::Ne,
                        Box::new(lv),
                        Box::new(Expr::new(ExprKind::IntLit(0), no_loc())),
                    ),
                    no_loc(),
                );
                out.push(FStmt::Local {
                    target: LTarget::Var(tmp.clone()),
                    value: lbool,
                });
                let mut inner = Vec::new();
                let rv = self.hoist(&mut inner, r);
                let rbool = Expr::new(
                    ExprKind::Binary(
                        BinOp::Ne,
                        Box::new(rv),
                        Box::new(Expr::new(ExprKind::IntLit(0), no_loc())),
                    ),
                    no_loc(),
                );
                inner.push(FStmt::Local {
                    target: LTarget::Var(tmp.clone()),
                    value: rbool,
                });
                let then_b = self.push_block(inner);
                let else_b = self.push_block(Vec::new());
                let tmp_var = Expr::new(ExprKind::Var(tmp.clone()), no_loc());
                let guard = match op {
                    BinOp::And => tmp_var,
                    _ => Expr::new(ExprKind::Unary(UnOp::Not, Box::new(tmp_var)), no_loc()),
                };
                out.push(FStmt::If {
                    cond: guard,
                    then_b,
                    else_b,
                });
                ExprKind::Var(tmp)
            }
            ExprKind::Binary(op, l, r) => {
                let lv = self.hoist(out, l);
                let rv = self.hoist(out, r);
                ExprKind::Binary(*op, Box::new(lv), Box::new(rv))
            }
        };
        Expr::new(kind, e.loc)
    }
}

fn reads_shared(e: &Expr, shared: &BTreeSet<String>) -> bool {
    let mut arrays = Vec::new();
    e.collect_indexed_arrays(&mut arrays);
    arrays.iter().any(|a| shared.contains(a))
}

// ---------------------------------------------------------------------------
// Interpreter state
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Thread {
    /// Stack of (block id, statement index); empty means finished.
    pc: Vec<(usize, usize)>,
    locals: BTreeMap<String, i64>,
    /// Per-thread private arrays, zero-defaulted.
    arrays: BTreeMap<String, BTreeMap<i64, i64>>,
    /// Site the thread is parked at, if any.
    waiting: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct State {
    threads: Vec<Thread>,
    /// The one true shared store; unwritten cells read as 0.
    shared: BTreeMap<String, BTreeMap<i64, i64>>,
}

/// Assertion failure or arithmetic fault; aborts the execution it occurs in.
struct SimFault;

fn eval(e: &Expr, th: &Thread) -> Result<i64, SimFault> {
    Ok(match &e.kind {
        ExprKind::IntLit(v) => *v,
        ExprKind::Var(n) => *th.locals.get(n).unwrap_or(&0),
        ExprKind::Index(name, idx) => {
            let ix = eval(idx, th)?;
            th.arrays
                .get(name)
                .and_then(|m| m.get(&ix))
                .copied()
                .unwrap_or(0)
        }
        ExprKind::Unary(UnOp::Neg, a) => eval(a, th)?.wrapping_neg(),
        ExprKind::Unary(UnOp::Not, a) => (eval(a, th)? == 0) as i64,
        ExprKind::Binary(op, l, r) => {
            if matches!(op, BinOp::And | BinOp::Or) {
                let lv = eval(l, th)? != 0;
                return Ok(match op {
                    BinOp::And => {
                        if lv {
                            (eval(r, th)? != 0) as i64
                        } else {
                            0
                        }
                    }
                    _ => {
                        if lv {
                            1
                        } else {
                            (eval(r, th)? != 0) as i64
                        }
                    }
                });
            }
            let lv = eval(l, th)?;
            let rv = eval(r, th)?;
            match op {
                BinOp::Add => lv.wrapping_add(rv),
                BinOp::Sub => lv.wrapping_sub(rv),
                BinOp::Mul => lv.wrapping_mul(rv),
                BinOp::Div => {
                    if rv == 0 {
                        return Err(SimFault);
                    }
                    lv.wrapping_div(rv)
                }
                BinOp::Mod => {
                    if rv == 0 {
                        return Err(SimFault);
                    }
                    lv.wrapping_rem(rv)
                }
                BinOp::Eq => (lv == rv) as i64,
                BinOp::Ne => (lv != rv) as i64,
                BinOp::Lt => (lv < rv) as i64,
                BinOp::Le => (lv <= rv) as i64,
                BinOp::Gt => (lv > rv) as i64,
                BinOp::Ge => (lv >= rv) as i64,
                BinOp::And | BinOp::Or => unreachable!(),
            }
        }
    })
}

/// Runs a thread's invisible actions (local assignments, branches, asserts,
/// frame pops) until it parks at a barrier, reaches a pending shared access,
/// or finishes. Barrier arrivals commute with every other action, so parking
/// eagerly here never hides an interleaving.
fn collapse(flat: &Flat, th: &mut Thread) -> Result<(), SimFault> {
    if th.waiting.is_some() {
        return Ok(());
    }
    loop {
        // Pop exhausted frames.
        while let Some(&(b, i)) = th.pc.last() {
            if i >= flat.blocks[b].len() {
                th.pc.pop();
            } else {
                break;
            }
        }
        let Some(&(b, i)) = th.pc.last() else {
            return Ok(()); // finished
        };
        match &flat.blocks[b][i] {
            FStmt::Local { target, value } => {
                let v = eval(value, th)?;
                match target {
                    LTarget::Var(n) => {
                        th.locals.insert(n.clone(), v);
                    }
                    LTarget::PrivElem(arr, idx) => {
                        let ix = eval(idx, th)?;
                        th.arrays.entry(arr.clone()).or_default().insert(ix, v);
                    }
                }
                th.pc.last_mut().unwrap().1 += 1;
            }
            FStmt::If {
                cond,
                then_b,
                else_b,
            } => {
                let c = eval(cond, th)?;
                let target = if c != 0 { *then_b } else { *else_b };
                th.pc.last_mut().unwrap().1 += 1;
                th.pc.push((target, 0));
            }
            FStmt::Assert { cond } => {
                if eval(cond, th)? == 0 {
                    return Err(SimFault);
                }
                th.pc.last_mut().unwrap().1 += 1;
            }
            FStmt::Barrier { site } => {
                th.waiting = Some(*site);
                th.pc.last_mut().unwrap().1 += 1;
                return Ok(());
            }
            FStmt::ReadShared { .. } | FStmt::WriteShared { .. } => return Ok(()),
        }
    }
}

/// A barrier occurrence releases only when **every** thread of its scope
/// (the block for `barrier`, the whole grid for `gridbarrier`) is parked at
/// that same occurrence. A thread that finished, parked elsewhere, or is
/// still running blocks the release — exactly the situations the verifier
/// reports as divergence when they persist.
fn apply_releases(flat: &Flat, state: &mut State, block_of: &[u32]) -> Result<(), SimFault> {
    loop {
        let sites: BTreeSet<usize> = state.threads.iter().filter_map(|t| t.waiting).collect();
        let mut released: Vec<usize> = Vec::new();
        for site in sites {
            match flat.site_levels[site] {
                BarrierLevel::Grid => {
                    if state.threads.iter().all(|t| t.waiting == Some(site)) {
                        released.extend(0..state.threads.len());
                    }
                }
                BarrierLevel::Block => {
                    let groups: BTreeSet<u32> = state
                        .threads
                        .iter()
                        .enumerate()
                        .filter(|(_, t)| t.waiting == Some(site))
                        .map(|(i, _)| block_of[i])
                        .collect();
                    for g in groups {
                        let members: Vec<usize> = (0..state.threads.len())
                            .filter(|&i| block_of[i] == g)
                            .collect();
                        if members
                            .iter()
                            .all(|&i| state.threads[i].waiting == Some(site))
                        {
                            released.extend(members);
                        }
                    }
                }
            }
        }
        if released.is_empty() {
            return Ok(());
        }
        for t in released {
            state.threads[t].waiting = None;
            collapse(flat, &mut state.threads[t])?;
        }
    }
}

/// A shared access about to execute: `(array, index value, is_write)`.
type PendingAccess = (String, i64, bool);

/// The pending shared access of a thread, if it is stopped at one.
/// Index evaluation uses only locals, so the value is deterministic here.
fn pending(flat: &Flat, th: &Thread) -> Option<Result<PendingAccess, SimFault>> {
    if th.waiting.is_some() {
        return None;
    }
    let &(b, i) = th.pc.last()?;
    match &flat.blocks[b][i] {
        FStmt::ReadShared { array, index, .. } => {
            Some(eval(index, th).map(|ix| (array.clone(), ix, false)))
        }
        FStmt::WriteShared { array, index, .. } => {
            Some(eval(index, th).map(|ix| (array.clone(), ix, true)))
        }
        _ => None,
    }
}

/// Executes the pending shared access of thread `t`, then collapses it.
fn exec_access(flat: &Flat, state: &mut State, t: usize) -> Result<(), SimFault> {
    let &(b, i) = state.threads[t]
        .pc
        .last()
        .expect("thread has a pending access");
    match flat.blocks[b][i].clone() {
        FStmt::ReadShared { array, index, dst } => {
            let ix = eval(&index, &state.threads[t])?;
            let v = state
                .shared
                .get(&array)
                .and_then(|m| m.get(&ix))
                .copied()
                .unwrap_or(0);
            let th = &mut state.threads[t];
            th.locals.insert(dst, v);
            th.pc.last_mut().unwrap().1 += 1;
            collapse(flat, th)?;
        }
        FStmt::WriteShared {
            array,
            index,
            value,
        } => {
            let ix = eval(&index, &state.threads[t])?;
            let v = eval(&value, &state.threads[t])?;
            state.shared.entry(array).or_default().insert(ix, v);
            let th = &mut state.threads[t];
            th.pc.last_mut().unwrap().1 += 1;
            collapse(flat, th)?;
        }
        _ => unreachable!("exec_access called on a non-access statement"),
    }
    Ok(())
}

/// Explores every interleaving of `kernel` (which must carry no barrier
/// guards) and classifies it. Panics if more than `max_states` distinct
/// global states are visited, so an undersized budget fails loudly instead
/// of passing unsoundly.
pub fn simulate(kernel: &Kernel, default_unroll: u32, max_states: usize) -> SimClass {
    let flat = Flattener::flatten(kernel, default_unroll);
    let launch = kernel.launch;
    let mut threads = Vec::new();
    let mut block_of = Vec::new();
    for b in 0..launch.blocks {
        for t in 0..launch.threads_per_block {
            let mut locals = BTreeMap::new();
            locals.insert("tid".to_string(), t as i64);
            locals.insert("bid".to_string(), b as i64);
            locals.insert("bdim".to_string(), launch.threads_per_block as i64);
            locals.insert("gdim".to_string(), launch.blocks as i64);
            for p in &kernel.params {
                if p.kind == ParamKind::Scalar {
                    locals.insert(p.name.clone(), 0);
                }
            }
            threads.push(Thread {
                pc: vec![(flat.entry, 0)],
                locals,
                arrays: BTreeMap::new(),
                waiting: None,
            });
            block_of.push(b);
        }
    }

    let mut fault = false;
    let mut divergence = false;

    let mut init = State {
        threads,
        shared: BTreeMap::new(),
    };
    let mut stack: Vec<State> = Vec::new();
    let ok = init
        .threads
        .iter_mut()
        .try_for_each(|t| collapse(&flat, t).map(|_| ()))
        .and_then(|_| apply_releases(&flat, &mut init, &block_of));
    match ok {
        Ok(()) => stack.push(init),
        Err(SimFault) => fault = true,
    }

    let mut visited: HashSet<State> = HashSet::new();
    while let Some(state) = stack.pop() {
        if !visited.insert(state.clone()) {
            continue;
        }
        assert!(
            visited.len() <= max_states,
            "interleaving exploration exceeded the {max_states}-state budget"
        );

        // Collect each runnable thread's pending access.
        let mut pend: Vec<(usize, Option<PendingAccess>)> = Vec::new();
        for (t, th) in state.threads.iter().enumerate() {
            match pending(&flat, th) {
                Some(Ok(acc)) => pend.push((t, Some(acc))),
                // The index faults; executing this access faults too, so it
                // cannot participate in a race.
                Some(Err(SimFault)) => pend.push((t, None)),
                None => {}
            }
        }

        // Race: two conflicting accesses pending at once.
        for (i, (_, a)) in pend.iter().enumerate() {
            for (_, b) in pend.iter().skip(i + 1) {
                if let (Some((arr_a, ix_a, w_a)), Some((arr_b, ix_b, w_b))) = (a, b) {
                    if arr_a == arr_b && ix_a == ix_b && (*w_a || *w_b) {
                        return SimClass::Race;
                    }
                }
            }
        }

        if pend.is_empty() {
            // No runnable thread: either everyone finished or the remaining
            // waiters can never be released — a barrier deadlock.
            if state.threads.iter().any(|t| t.waiting.is_some()) {
                divergence = true;
            }
            continue;
        }

        for (t, _) in pend {
            let mut next = state.clone();
            let ok = exec_access(&flat, &mut next, t)
                .and_then(|_| apply_releases(&flat, &mut next, &block_of));
            match ok {
                Ok(()) => stack.push(next),
                Err(SimFault) => fault = true,
            }
        }
    }

    if fault {
        SimClass::Fault
    } else if divergence {
        SimClass::Divergence
    } else {
        SimClass::Safe
    }
}
