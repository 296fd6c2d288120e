//! AST types for MiniKernel kernels.

use std::fmt;

/// Line/column position in the kernel source file (both 1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SourceLoc {
    pub line: u32,
    pub col: u32,
}

impl SourceLoc {
    pub fn new(line: u32, col: u32) -> Self {
        SourceLoc { line, col }
    }
}

impl fmt::Display for SourceLoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// Identifier of a barrier guard variable (`b1`, `b2`, ... in guard syntax).
/// Ids are dense and 1-based in instrumented kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BarrierVarId(pub u32);

impl fmt::Display for BarrierVarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{}", self.0)
    }
}

/// Synchronization scope of a barrier statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BarrierLevel {
    /// Synchronizes the threads of one block (`barrier;`).
    Block,
    /// Synchronizes every thread in the launch grid (`gridbarrier;`).
    Grid,
}

/// Whether a barrier was written by the programmer or inserted by the
/// instrumenter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BarrierOrigin {
    Programmer,
    Instrumented,
}

/// Grid dimensions a kernel is verified against. Desk-scale by design: the
/// verifier enumerates every thread, so both dimensions are capped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LaunchConfig {
    pub blocks: u32,
    pub threads_per_block: u32,
}

/// Default per-dimension cap on launch sizes.
pub const LAUNCH_CAP: u32 = 8;

/// Launch grid used when a kernel has no `launch(...)` clause and no flags
/// override it.
pub const DEFAULT_LAUNCH: LaunchConfig = LaunchConfig {
    blocks: 1,
    threads_per_block: 4,
};

impl LaunchConfig {
    /// Validates against the default cap: each dimension in `1..=8` and at
    /// least two threads in total.
    pub fn new(blocks: u32, threads_per_block: u32) -> Result<Self, String> {
        Self::with_cap(blocks, threads_per_block, LAUNCH_CAP)
    }

    pub fn with_cap(blocks: u32, threads_per_block: u32, cap: u32) -> Result<Self, String> {
        if blocks < 1 || threads_per_block < 1 {
            return Err("launch dimensions must be at least 1".to_string());
        }
        if blocks > cap || threads_per_block > cap {
            return Err(format!("launch dimensions must not exceed {cap}"));
        }
        if blocks * threads_per_block < 2 {
            return Err("launch must contain at least two threads".to_string());
        }
        Ok(LaunchConfig {
            blocks,
            threads_per_block,
        })
    }

    pub fn total_threads(&self) -> u32 {
        self.blocks * self.threads_per_block
    }
}

impl Default for LaunchConfig {
    fn default() -> Self {
        DEFAULT_LAUNCH
    }
}

/// Kind of a kernel parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// `shared int A[]` — one array visible to every thread.
    SharedArray,
    /// `int A[]` — a per-thread array; accesses never race.
    PrivateArray,
    /// `int n` — a scalar (bound to 0 by the verifier).
    Scalar,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub kind: ParamKind,
    pub loc: SourceLoc,
}

/// Builtin thread-coordinate identifiers.
pub const BUILTINS: [&str; 4] = ["tid", "bid", "bdim", "gdim"];

pub fn is_builtin(name: &str) -> bool {
    BUILTINS.contains(&name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub loc: SourceLoc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    IntLit(i64),
    /// A local, scalar parameter, or builtin.
    Var(String),
    /// `A[e]` — array element read.
    Index(String, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn new(kind: ExprKind, loc: SourceLoc) -> Self {
        Expr { kind, loc }
    }

    /// True iff the expression reads an element of `array`.
    pub fn reads_array(&self, array: &str) -> bool {
        match &self.kind {
            ExprKind::IntLit(_) | ExprKind::Var(_) => false,
            ExprKind::Index(name, idx) => name == array || idx.reads_array(array),
            ExprKind::Unary(_, e) => e.reads_array(array),
            ExprKind::Binary(_, l, r) => l.reads_array(array) || r.reads_array(array),
        }
    }

    /// Collects the names of all arrays read anywhere in the expression.
    pub fn collect_indexed_arrays(&self, out: &mut Vec<String>) {
        match &self.kind {
            ExprKind::IntLit(_) | ExprKind::Var(_) => {}
            ExprKind::Index(name, idx) => {
                out.push(name.clone());
                idx.collect_indexed_arrays(out);
            }
            ExprKind::Unary(_, e) => e.collect_indexed_arrays(out),
            ExprKind::Binary(_, l, r) => {
                l.collect_indexed_arrays(out);
                r.collect_indexed_arrays(out);
            }
        }
    }
}

/// Assignment destination: a local variable or an array element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssignTarget {
    Var(String),
    Elem(String, Expr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Assign {
        target: AssignTarget,
        value: Expr,
        loc: SourceLoc,
    },
    Barrier {
        level: BarrierLevel,
        origin: BarrierOrigin,
        /// Populated only in instrumented kernels (`barrier when b3;`).
        guard: Option<BarrierVarId>,
        loc: SourceLoc,
    },
    If {
        cond: Expr,
        then_branch: Vec<Stmt>,
        else_branch: Vec<Stmt>,
        loc: SourceLoc,
    },
    While {
        cond: Expr,
        body: Vec<Stmt>,
        /// `while (c) unroll N { ... }`; `None` means the verifier default.
        unroll_hint: Option<u32>,
        loc: SourceLoc,
    },
    /// Helper invocation. Exists only transiently inside the parser; calls
    /// are inlined before `parse` returns.
    Call {
        callee: String,
        args: Vec<Expr>,
        loc: SourceLoc,
    },
    Assert {
        cond: Expr,
        loc: SourceLoc,
    },
}

impl Stmt {
    pub fn loc(&self) -> SourceLoc {
        match self {
            Stmt::Assign { loc, .. }
            | Stmt::Barrier { loc, .. }
            | Stmt::If { loc, .. }
            | Stmt::While { loc, .. }
            | Stmt::Call { loc, .. }
            | Stmt::Assert { loc, .. } => *loc,
        }
    }

    pub fn set_loc(&mut self, new: SourceLoc) {
        match self {
            Stmt::Assign { loc, .. }
            | Stmt::Barrier { loc, .. }
            | Stmt::If { loc, .. }
            | Stmt::While { loc, .. }
            | Stmt::Call { loc, .. }
            | Stmt::Assert { loc, .. } => *loc = new,
        }
    }
}

/// A parsed kernel. Helper `fn` definitions are already inlined and
/// same-array read/write assignments already split by the parser.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Kernel {
    pub name: String,
    pub params: Vec<Param>,
    pub body: Vec<Stmt>,
    pub launch: LaunchConfig,
    /// Source file name, used in diagnostics and summaries.
    pub file: String,
    /// Locations of the first statement of each inlined call that touches a
    /// shared array; the instrumenter places a guard at these boundaries.
    pub call_sites: Vec<SourceLoc>,
}

impl Kernel {
    pub fn param(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn shared_arrays(&self) -> Vec<&str> {
        self.params
            .iter()
            .filter(|p| p.kind == ParamKind::SharedArray)
            .map(|p| p.name.as_str())
            .collect()
    }
}

/// Structural equality for round-trip checks: compares everything the
/// concrete syntax represents, ignoring source locations, barrier origins,
/// and parser bookkeeping (call-site markers).
pub fn structurally_equal(a: &Kernel, b: &Kernel) -> bool {
    a.name == b.name
        && a.launch == b.launch
        && a.params.len() == b.params.len()
        && a.params
            .iter()
            .zip(&b.params)
            .all(|(x, y)| x.name == y.name && x.kind == y.kind)
        && blocks_equal(&a.body, &b.body)
}

fn blocks_equal(a: &[Stmt], b: &[Stmt]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| stmts_equal(x, y))
}

fn stmts_equal(a: &Stmt, b: &Stmt) -> bool {
    match (a, b) {
        (
            Stmt::Assign {
                target: t1,
                value: v1,
                ..
            },
            Stmt::Assign {
                target: t2,
                value: v2,
                ..
            },
        ) => targets_equal(t1, t2) && exprs_equal(v1, v2),
        (
            Stmt::Barrier {
                level: l1,
                guard: g1,
                ..
            },
            Stmt::Barrier {
                level: l2,
                guard: g2,
                ..
            },
        ) => l1 == l2 && g1 == g2,
        (
            Stmt::If {
                cond: c1,
                then_branch: t1,
                else_branch: e1,
                ..
            },
            Stmt::If {
                cond: c2,
                then_branch: t2,
                else_branch: e2,
                ..
            },
        ) => exprs_equal(c1, c2) && blocks_equal(t1, t2) && blocks_equal(e1, e2),
        (
            Stmt::While {
                cond: c1,
                body: b1,
                unroll_hint: u1,
                ..
            },
            Stmt::While {
                cond: c2,
                body: b2,
                unroll_hint: u2,
                ..
            },
        ) => exprs_equal(c1, c2) && u1 == u2 && blocks_equal(b1, b2),
        (
            Stmt::Call {
                callee: f1,
                args: a1,
                ..
            },
            Stmt::Call {
                callee: f2,
                args: a2,
                ..
            },
        ) => f1 == f2 && a1.len() == a2.len() && a1.iter().zip(a2).all(|(x, y)| exprs_equal(x, y)),
        (Stmt::Assert { cond: c1, .. }, Stmt::Assert { cond: c2, .. }) => exprs_equal(c1, c2),
        _ => false,
    }
}

fn targets_equal(a: &AssignTarget, b: &AssignTarget) -> bool {
    match (a, b) {
        (AssignTarget::Var(x), AssignTarget::Var(y)) => x == y,
        (AssignTarget::Elem(x, i), AssignTarget::Elem(y, j)) => x == y && exprs_equal(i, j),
        _ => false,
    }
}

fn exprs_equal(a: &Expr, b: &Expr) -> bool {
    match (&a.kind, &b.kind) {
        (ExprKind::IntLit(x), ExprKind::IntLit(y)) => x == y,
        (ExprKind::Var(x), ExprKind::Var(y)) => x == y,
        (ExprKind::Index(x, i), ExprKind::Index(y, j)) => x == y && exprs_equal(i, j),
        (ExprKind::Unary(o1, e1), ExprKind::Unary(o2, e2)) => o1 == o2 && exprs_equal(e1, e2),
        (ExprKind::Binary(o1, l1, r1), ExprKind::Binary(o2, l2, r2)) => {
            o1 == o2 && exprs_equal(l1, l2) && exprs_equal(r1, r2)
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minikernel::parse;

    #[test]
    fn locations_and_guards_display_compactly() {
        assert_eq!(SourceLoc::new(3, 14).to_string(), "3:14");
        assert_eq!(BarrierVarId(7).to_string(), "b7");
        assert!(SourceLoc::new(2, 9) < SourceLoc::new(3, 1));
        assert!(SourceLoc::new(3, 1) < SourceLoc::new(3, 2));
    }

    #[test]
    fn launch_configs_are_capped_and_count_threads() {
        assert_eq!(LaunchConfig::default(), DEFAULT_LAUNCH);
        assert_eq!(LaunchConfig::default().total_threads(), 4);
        assert_eq!(LaunchConfig::new(2, 3).unwrap().total_threads(), 6);
        assert!(LaunchConfig::new(0, 4).is_err());
        assert!(LaunchConfig::new(4, 0).is_err());
        assert!(LaunchConfig::new(9, 1).is_err());
        assert!(LaunchConfig::new(1, 9).is_err());
        assert!(LaunchConfig::new(1, 1).is_err());
        assert!(LaunchConfig::new(1, 2).is_ok());
        // A custom cap loosens the limit but keeps the two-thread minimum.
        assert!(LaunchConfig::with_cap(16, 1, 16).is_ok());
        assert!(LaunchConfig::with_cap(1, 1, 16).is_err());
    }

    #[test]
    fn builtins_are_exactly_the_four_thread_indices() {
        for name in ["tid", "bid", "bdim", "gdim"] {
            assert!(is_builtin(name), "{name} should be a builtin");
        }
        assert!(!is_builtin("A"));
        assert!(!is_builtin("n"));
        assert!(!is_builtin("t0"));
    }

    #[test]
    fn structural_equality_ignores_locations_and_barrier_origin() {
        let a = parse(
            "a.mk",
            "kernel k(shared int A[]) {\n  barrier;\n  A[tid] = 1;\n}\n",
        )
        .unwrap();
        // Same program, different layout (hence different locations).
        let b = parse(
            "b.mk",
            "\n\nkernel k(shared int A[])\n{\n      barrier;\n      A[tid]    = 1;\n}\n",
        )
        .unwrap();
        assert!(structurally_equal(&a, &b));

        let mut c = a.clone();
        if let Stmt::Barrier { origin, .. } = &mut c.body[0] {
            *origin = BarrierOrigin::Instrumented;
        }
        assert!(structurally_equal(&a, &c), "origin must not matter");

        let d = parse(
            "d.mk",
            "kernel k(shared int A[]) {\n  barrier;\n  A[tid] = 2;\n}\n",
        )
        .unwrap();
        assert!(!structurally_equal(&a, &d), "different constants differ");

        let e = parse(
            "e.mk",
            "kernel k(shared int A[]) launch(2, 2) {\n  barrier;\n  A[tid] = 1;\n}\n",
        )
        .unwrap();
        assert!(!structurally_equal(&a, &e), "launch config matters");

        let f = parse(
            "f.mk",
            "kernel k(shared int A[]) {\n  gridbarrier;\n  A[tid] = 1;\n}\n",
        )
        .unwrap();
        assert!(!structurally_equal(&a, &f), "barrier level matters");
    }

    #[test]
    fn expressions_report_the_arrays_they_read() {
        let k = parse(
            "t.mk",
            "kernel k(shared int A[], int B[]) {\n  x = A[tid] + B[tid + A[0]];\n  A[x] = 0;\n}\n",
        )
        .unwrap();
        let Stmt::Assign { value, .. } = &k.body[0] else {
            panic!("expected assignment");
        };
        assert!(value.reads_array("A"));
        assert!(value.reads_array("B"));
        assert!(!value.reads_array("C"));
        let mut arrays = Vec::new();
        value.collect_indexed_arrays(&mut arrays);
        arrays.sort();
        arrays.dedup();
        assert_eq!(arrays, vec!["A".to_string(), "B".to_string()]);
    }
}
