//! Repair constraints and the two solvers that optimize over them.
//!
//! Every verifier counterexample is turned into a clause over barrier guard
//! variables: a data race yields a *positive* clause (enable at least one of
//! the barriers that would separate the racing accesses), barrier divergence
//! yields a *negative* clause (disable at least one of the barriers involved
//! in the divergence). A candidate repair is an assignment satisfying all
//! clauses; we search for one of minimum total weight, either greedily
//! (weighted minimal hitting set with an exact fallback) or exactly (weighted
//! partial MaxSAT by branch and bound).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::minikernel::BarrierVarId;
use crate::oracle::Verdict;

/// Literal polarity inside a clause.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Polarity {
    Pos,
    Neg,
}

/// A disjunction of literals over barrier guard variables.
///
/// Satisfied when some variable in `pos` is true or some variable in `neg` is
/// false. Clauses produced by [`generate_clause`] are single-polarity
/// (monotone); mixed clauses are still representable for the MaxSAT solver.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Clause {
    pub pos: BTreeSet<BarrierVarId>,
    pub neg: BTreeSet<BarrierVarId>,
}

impl Clause {
    pub fn positive(vars: impl IntoIterator<Item = BarrierVarId>) -> Self {
        Clause {
            pos: vars.into_iter().collect(),
            neg: BTreeSet::new(),
        }
    }

    pub fn negative(vars: impl IntoIterator<Item = BarrierVarId>) -> Self {
        Clause {
            pos: BTreeSet::new(),
            neg: vars.into_iter().collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty() && self.neg.is_empty()
    }

    /// True when all literals share one polarity (and the clause is
    /// non-empty).
    pub fn is_monotone(&self) -> bool {
        self.pos.is_empty() != self.neg.is_empty()
    }

    pub fn polarity(&self) -> Option<Polarity> {
        match (self.pos.is_empty(), self.neg.is_empty()) {
            (false, true) => Some(Polarity::Pos),
            (true, false) => Some(Polarity::Neg),
            _ => None,
        }
    }

    /// Evaluates the clause under a total assignment (`assignment[i]` is the
    /// value of variable `b(i+1)`; missing entries read as false).
    pub fn satisfied_by(&self, assignment: &[bool]) -> bool {
        let value = |v: &BarrierVarId| assignment.get(v.0 as usize - 1).copied().unwrap_or(false);
        self.pos.iter().any(&value) || self.neg.iter().any(|v| !value(v))
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.pos.iter().map(|v| v.to_string()).collect();
        parts.extend(self.neg.iter().map(|v| format!("!{v}")));
        write!(f, "({})", parts.join(" | "))
    }
}

/// A growing, duplicate-free set of clauses (conjunction).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Constraint {
    clauses: Vec<Clause>,
    dedup: BTreeSet<Clause>,
}

impl Constraint {
    pub fn new() -> Self {
        Constraint::default()
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    /// Adds a clause; returns false when an identical clause is already
    /// present (the constraint is unchanged).
    pub fn add(&mut self, clause: Clause) -> bool {
        if self.dedup.contains(&clause) {
            return false;
        }
        self.dedup.insert(clause.clone());
        self.clauses.push(clause);
        true
    }

    pub fn contains(&self, clause: &Clause) -> bool {
        self.dedup.contains(clause)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Clause> {
        self.clauses.iter()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn satisfied_by(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|c| c.satisfied_by(assignment))
    }
}

/// A total assignment to the guard variables plus its cost.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Solution {
    /// `assignment[i]` is the value of variable `b(i+1)`.
    pub assignment: Vec<bool>,
    /// Sum of the weights of all enabled (true) variables.
    pub total_weight: u64,
}

impl Solution {
    pub fn all_false(num_vars: usize) -> Self {
        Solution {
            assignment: vec![false; num_vars],
            total_weight: 0,
        }
    }

    pub fn from_enabled(enabled: impl IntoIterator<Item = BarrierVarId>, weights: &[u64]) -> Self {
        let mut assignment = vec![false; weights.len()];
        for v in enabled {
            let idx = v.0 as usize - 1;
            if idx < assignment.len() {
                assignment[idx] = true;
            }
        }
        let total_weight = assignment
            .iter()
            .zip(weights)
            .filter(|(on, _)| **on)
            .fold(0u64, |acc, (_, w)| acc.saturating_add(*w));
        Solution {
            assignment,
            total_weight,
        }
    }

    /// Value of a variable; out-of-range ids read as false.
    pub fn get(&self, id: BarrierVarId) -> bool {
        id.0.checked_sub(1)
            .and_then(|i| self.assignment.get(i as usize).copied())
            .unwrap_or(false)
    }

    /// Ids of enabled variables in ascending order.
    pub fn enabled(&self) -> impl Iterator<Item = BarrierVarId> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, on)| **on)
            .map(|(i, _)| BarrierVarId(i as u32 + 1))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveResult {
    Sat(Solution),
    Unsat,
}

/// Which solver drives the repair loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    /// Greedy weighted minimal hitting set with exact fallback.
    #[default]
    Mhs,
    /// Exact weighted partial MaxSAT on every iteration.
    MaxSat,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Mhs => write!(f, "mhs"),
            Strategy::MaxSat => write!(f, "maxsat"),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ClauseError {
    #[error("error witness names no barrier variables; the fault cannot be repaired by toggling barriers")]
    EmptyWitness,
    #[error("verdict `{0}` does not induce a repair clause")]
    NoClause(String),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SolverError {
    #[error("greedy hitting-set solver requires single-polarity clauses; got {0}")]
    NonMonotoneInput(String),
}

/// Derives the repair clause demanded by a counterexample.
///
/// - Race: at least one barrier that would separate the two accesses must be
///   enabled (positive clause over `disabled_on_path`).
/// - Divergence: at least one barrier involved in the divergence must be
///   disabled (negative clause over `enabled_at_fault`).
pub fn generate_clause(verdict: &Verdict) -> Result<Clause, ClauseError> {
    match verdict {
        Verdict::Race {
            disabled_on_path, ..
        } => {
            if disabled_on_path.is_empty() {
                Err(ClauseError::EmptyWitness)
            } else {
                Ok(Clause::positive(disabled_on_path.iter().copied()))
            }
        }
        Verdict::Divergence {
            enabled_at_fault, ..
        } => {
            if enabled_at_fault.is_empty() {
                Err(ClauseError::EmptyWitness)
            } else {
                Ok(Clause::negative(enabled_at_fault.iter().copied()))
            }
        }
        Verdict::Safe => Err(ClauseError::NoClause("safe".to_string())),
        Verdict::Other(_) => Err(ClauseError::NoClause("other".to_string())),
    }
}

fn weight_of(weights: &[u64], v: BarrierVarId) -> u64 {
    v.0.checked_sub(1)
        .and_then(|i| weights.get(i as usize).copied())
        .unwrap_or(u64::MAX)
}

/// Solves `constraint` with the requested strategy. Returns the result and
/// the number of solver invocations performed (2 when the greedy strategy
/// fell back to the exact solver).
pub fn solve(
    constraint: &Constraint,
    weights: &[u64],
    strategy: Strategy,
) -> Result<(SolveResult, u32), SolverError> {
    match strategy {
        Strategy::MaxSat => Ok((solve_wpms(constraint, weights), 1)),
        Strategy::Mhs => match greedy_mhs(constraint, weights)? {
            SolveResult::Sat(sol) => Ok((SolveResult::Sat(sol), 1)),
            // The greedy candidate clashed with negative clauses (or positive
            // cover is impossible): let the exact solver decide.
            SolveResult::Unsat => Ok((solve_wpms(constraint, weights), 2)),
        },
    }
}

/// Greedy weighted hitting set over the positive clauses, then a minimality
/// prune; negative clauses only *check* the candidate. Returns `Unsat` when
/// the candidate violates a negative clause — that is a "greedy failed"
/// signal, not a proof of unsatisfiability.
pub fn greedy_mhs(constraint: &Constraint, weights: &[u64]) -> Result<SolveResult, SolverError> {
    let mut pos_clauses: Vec<&BTreeSet<BarrierVarId>> = Vec::new();
    let mut neg_clauses: Vec<&BTreeSet<BarrierVarId>> = Vec::new();
    for c in constraint.iter() {
        match c.polarity() {
            Some(Polarity::Pos) => pos_clauses.push(&c.pos),
            Some(Polarity::Neg) => neg_clauses.push(&c.neg),
            None if c.is_empty() => return Ok(SolveResult::Unsat),
            None => {
                return Err(SolverError::NonMonotoneInput(format!(
                    "clause mixes positive and negative literals: {c}"
                )));
            }
        }
    }

    // Greedy cover: repeatedly pick the variable with the best
    // weight-per-covered-clause ratio (ties broken toward the smaller id).
    let mut chosen: BTreeSet<BarrierVarId> = BTreeSet::new();
    let mut uncovered: Vec<&BTreeSet<BarrierVarId>> = pos_clauses.clone();
    while !uncovered.is_empty() {
        let mut coverage: BTreeMap<BarrierVarId, u64> = BTreeMap::new();
        for clause in &uncovered {
            for &v in *clause {
                *coverage.entry(v).or_insert(0) += 1;
            }
        }
        let mut best: Option<(BarrierVarId, u64, u64)> = None;
        for (&v, &cov) in &coverage {
            let w = weight_of(weights, v);
            best = match best {
                None => Some((v, w, cov)),
                Some((bv, bw, bc)) => {
                    if (w as u128) * (bc as u128) < (bw as u128) * (cov as u128) {
                        Some((v, w, cov))
                    } else {
                        Some((bv, bw, bc))
                    }
                }
            };
        }
        let (v, _, _) = best.expect("uncovered clauses are non-empty");
        chosen.insert(v);
        uncovered.retain(|clause| !clause.contains(&v));
    }

    // Prune: drop any variable whose removal keeps all positive clauses
    // covered, trying the heaviest (then highest-id) first.
    let mut order: Vec<BarrierVarId> = chosen.iter().copied().collect();
    order.sort_by(|a, b| {
        let wa = weight_of(weights, *a);
        let wb = weight_of(weights, *b);
        wb.cmp(&wa).then(b.cmp(a))
    });
    for v in order {
        let covered_without = pos_clauses
            .iter()
            .all(|clause| clause.iter().any(|u| *u != v && chosen.contains(u)));
        if covered_without {
            chosen.remove(&v);
        }
    }

    for clause in &neg_clauses {
        if clause.iter().all(|v| chosen.contains(v)) {
            return Ok(SolveResult::Unsat);
        }
    }

    Ok(SolveResult::Sat(Solution::from_enabled(
        chosen.iter().copied(),
        weights,
    )))
}

/// Exact weighted partial MaxSAT: all clauses are hard, the soft goal is to
/// minimize the total weight of enabled variables. Branch and bound with unit
/// propagation; among minimum-weight models the lexicographically smallest
/// assignment (variables in id order, false < true) is returned.
pub fn solve_wpms(constraint: &Constraint, weights: &[u64]) -> SolveResult {
    if constraint.iter().any(|c| c.is_empty()) {
        return SolveResult::Unsat;
    }
    let mut search = Search {
        clauses: constraint.clauses(),
        weights,
        assign: vec![None; weights.len()],
        best: None,
    };
    search.dfs();
    match search.best {
        Some((total_weight, assignment)) => SolveResult::Sat(Solution {
            assignment,
            total_weight,
        }),
        None => SolveResult::Unsat,
    }
}

struct Search<'a> {
    clauses: &'a [Clause],
    weights: &'a [u64],
    assign: Vec<Option<bool>>,
    best: Option<(u64, Vec<bool>)>,
}

impl Search<'_> {
    fn current_weight(&self) -> u64 {
        self.assign
            .iter()
            .enumerate()
            .filter(|(_, v)| **v == Some(true))
            .fold(0u64, |acc, (i, _)| acc.saturating_add(self.weights[i]))
    }

    fn dfs(&mut self) {
        let mut trail: Vec<usize> = Vec::new();
        if self.propagate(&mut trail) {
            let weight = self.current_weight();
            let within_bound = match &self.best {
                Some((best_weight, _)) => weight < *best_weight,
                None => true,
            };
            if within_bound {
                match self.assign.iter().position(|v| v.is_none()) {
                    Some(idx) => {
                        for value in [false, true] {
                            self.assign[idx] = Some(value);
                            self.dfs();
                            self.assign[idx] = None;
                        }
                    }
                    None => {
                        let model: Vec<bool> =
                            self.assign.iter().map(|v| v.unwrap_or(false)).collect();
                        self.best = Some((weight, model));
                    }
                }
            }
        }
        for idx in trail {
            self.assign[idx] = None;
        }
    }

    /// Unit propagation to fixpoint; false on conflict. Assignments made here
    /// are recorded on `trail` for the caller to undo.
    fn propagate(&mut self, trail: &mut Vec<usize>) -> bool {
        loop {
            let mut progress = false;
            for ci in 0..self.clauses.len() {
                let mut satisfied = false;
                let mut unassigned: Option<(usize, bool)> = None;
                let mut unassigned_count = 0usize;
                for &v in &self.clauses[ci].pos {
                    let idx = v.0 as usize - 1;
                    match self.assign.get(idx).copied().flatten() {
                        Some(true) => satisfied = true,
                        Some(false) => {}
                        None => {
                            unassigned_count += 1;
                            unassigned = Some((idx, true));
                        }
                    }
                }
                for &v in &self.clauses[ci].neg {
                    let idx = v.0 as usize - 1;
                    match self.assign.get(idx).copied().flatten() {
                        Some(false) => satisfied = true,
                        Some(true) => {}
                        None => {
                            unassigned_count += 1;
                            unassigned = Some((idx, false));
                        }
                    }
                }
                if satisfied {
                    continue;
                }
                match (unassigned_count, unassigned) {
                    (0, _) => return false,
                    (1, Some((idx, value))) => {
                        self.assign[idx] = Some(value);
                        trail.push(idx);
                        progress = true;
                    }
                    _ => {}
                }
            }
            if !progress {
                return true;
            }
        }
    }
}

/// Renders the constraint as a weighted partial MaxSAT instance in WDIMACS
/// (`wcnf`) text form: every repair clause is hard (weight `top`), and each
/// variable contributes a soft unit clause preferring it off.
pub fn write_wdimacs(constraint: &Constraint, weights: &[u64]) -> String {
    let num_vars = weights.len();
    let top = weights
        .iter()
        .fold(0u64, |acc, w| acc.saturating_add(*w))
        .saturating_add(1);
    let mut out = String::new();
    out.push_str(&format!(
        "p wcnf {num_vars} {} {top}\n",
        constraint.len() + num_vars
    ));
    for clause in constraint.iter() {
        let mut lits: Vec<String> = clause.pos.iter().map(|v| v.0.to_string()).collect();
        lits.extend(clause.neg.iter().map(|v| format!("-{}", v.0)));
        out.push_str(&format!("{top} {} 0\n", lits.join(" ")));
    }
    for (i, w) in weights.iter().enumerate() {
        out.push_str(&format!("{w} -{} 0\n", i + 1));
    }
    out
}
