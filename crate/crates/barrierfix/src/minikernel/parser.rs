//! Recursive-descent parser for MiniKernel.
//!
//! Beyond building the AST this performs three source-to-source rewrites so
//! that downstream passes see a simplified program:
//! - helper `fn` calls are inlined at the call site (macro-style, one level),
//! - assignments that both read and write one shared array are split into a
//!   temporary read followed by the write,
//! - statement locations are kept strictly increasing inside each block.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use thiserror::Error;

use super::ast::{
    is_builtin, AssignTarget, BarrierLevel, BarrierOrigin, BarrierVarId, Expr, ExprKind, Kernel,
    LaunchConfig, Param, ParamKind, SourceLoc, Stmt, UnOp,
};
use super::lexer::{lex, Tok, Token};

/// Maximum accepted per-loop unroll annotation.
const UNROLL_CAP: u32 = 64;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("{file}:{line}:{col}: syntax error: {message}")]
    Syntax {
        file: String,
        line: u32,
        col: u32,
        message: String,
    },
    #[error("{file}:{line}:{col}: semantic error: {message}")]
    Semantic {
        file: String,
        line: u32,
        col: u32,
        message: String,
    },
}

impl ParseError {
    fn syntax(file: &str, loc: SourceLoc, message: impl Into<String>) -> Self {
        ParseError::Syntax {
            file: file.to_string(),
            line: loc.line,
            col: loc.col,
            message: message.into(),
        }
    }

    fn semantic(file: &str, loc: SourceLoc, message: impl Into<String>) -> Self {
        ParseError::Semantic {
            file: file.to_string(),
            line: loc.line,
            col: loc.col,
            message: message.into(),
        }
    }
}

struct FnDef {
    params: Vec<String>,
    body: Vec<Stmt>,
}

/// Parses one kernel (optionally preceded by helper `fn` definitions) from
/// `src`. `file` is used in diagnostics and the resulting [`Kernel`].
pub fn parse(file: &str, src: &str) -> Result<Kernel, ParseError> {
    let tokens = lex(file, src)?;
    let used_names: HashSet<String> = tokens
        .iter()
        .filter_map(|t| match &t.tok {
            Tok::Ident(name) => Some(name.clone()),
            _ => None,
        })
        .collect();
    let mut parser = Parser {
        file,
        tokens,
        pos: 0,
    };
    let mut fns: BTreeMap<String, FnDef> = BTreeMap::new();
    while parser.peek() == &Tok::Fn {
        let (name, def, loc) = parser.fn_def()?;
        if fns.contains_key(&name) {
            return Err(ParseError::semantic(
                file,
                loc,
                format!("helper `{name}` defined twice"),
            ));
        }
        fns.insert(name, def);
    }
    let mut kernel = parser.kernel_def()?;
    parser.expect(Tok::Eof, "end of file")?;

    // Helper bodies may not invoke other helpers (inlining is single-level).
    for def in fns.values() {
        if let Some(loc) = first_call_loc(&def.body) {
            return Err(ParseError::semantic(
                file,
                loc,
                "helper functions may not call other helpers",
            ));
        }
    }

    let shared: BTreeSet<String> = kernel
        .params
        .iter()
        .filter(|p| p.kind == ParamKind::SharedArray)
        .map(|p| p.name.clone())
        .collect();
    let mut ctx = Ctx {
        file,
        fns: &fns,
        shared: &shared,
        used: used_names,
        temp_counter: 0,
        call_sites: Vec::new(),
    };
    kernel.body = transform_block(&mut ctx, std::mem::take(&mut kernel.body))?;
    kernel.call_sites = ctx.call_sites;

    check_kernel(file, &kernel)?;
    Ok(kernel)
}

fn first_call_loc(stmts: &[Stmt]) -> Option<SourceLoc> {
    for s in stmts {
        match s {
            Stmt::Call { loc, .. } => return Some(*loc),
            Stmt::If {
                then_branch,
                else_branch,
                ..
            } => {
                if let Some(l) = first_call_loc(then_branch).or_else(|| first_call_loc(else_branch))
                {
                    return Some(l);
                }
            }
            Stmt::While { body, .. } => {
                if let Some(l) = first_call_loc(body) {
                    return Some(l);
                }
            }
            _ => {}
        }
    }
    None
}

struct Parser<'a> {
    file: &'a str,
    tokens: Vec<Token>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_loc(&self) -> SourceLoc {
        self.tokens[self.pos].loc
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: Tok) -> bool {
        if self.peek() == &tok {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Token, ParseError> {
        if self.peek() == &tok {
            Ok(self.advance())
        } else {
            Err(ParseError::syntax(
                self.file,
                self.peek_loc(),
                format!("expected {what}, found {:?}", self.peek()),
            ))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, SourceLoc), ParseError> {
        let loc = self.peek_loc();
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.advance();
                Ok((name, loc))
            }
            other => Err(ParseError::syntax(
                self.file,
                loc,
                format!("expected {what}, found {other:?}"),
            )),
        }
    }

    fn int_lit(&mut self, what: &str) -> Result<(i64, SourceLoc), ParseError> {
        let loc = self.peek_loc();
        match *self.peek() {
            Tok::IntLit(v) => {
                self.advance();
                Ok((v, loc))
            }
            ref other => Err(ParseError::syntax(
                self.file,
                loc,
                format!("expected {what}, found {other:?}"),
            )),
        }
    }

    fn fn_def(&mut self) -> Result<(String, FnDef, SourceLoc), ParseError> {
        self.expect(Tok::Fn, "`fn`")?;
        let (name, loc) = self.ident("helper name")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut params = Vec::new();
        if self.peek() != &Tok::RParen {
            loop {
                let (p, ploc) = self.ident("parameter name")?;
                if params.contains(&p) {
                    return Err(ParseError::semantic(
                        self.file,
                        ploc,
                        format!("duplicate parameter `{p}`"),
                    ));
                }
                params.push(p);
                if !self.eat(Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        let body = self.block()?;
        Ok((name, FnDef { params, body }, loc))
    }

    fn kernel_def(&mut self) -> Result<Kernel, ParseError> {
        self.expect(Tok::Kernel, "`kernel`")?;
        let (name, _) = self.ident("kernel name")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut params: Vec<Param> = Vec::new();
        if self.peek() != &Tok::RParen {
            loop {
                let p = self.kernel_param()?;
                if params.iter().any(|q| q.name == p.name) {
                    return Err(ParseError::semantic(
                        self.file,
                        p.loc,
                        format!("duplicate parameter `{}`", p.name),
                    ));
                }
                params.push(p);
                if !self.eat(Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        let launch = if self.peek() == &Tok::Launch {
            let loc = self.peek_loc();
            self.advance();
            self.expect(Tok::LParen, "`(`")?;
            let (blocks, _) = self.int_lit("block count")?;
            self.expect(Tok::Comma, "`,`")?;
            let (threads, _) = self.int_lit("thread count")?;
            self.expect(Tok::RParen, "`)`")?;
            if !(0..=u32::MAX as i64).contains(&blocks) || !(0..=u32::MAX as i64).contains(&threads)
            {
                return Err(ParseError::semantic(self.file, loc, "invalid launch size"));
            }
            LaunchConfig::new(blocks as u32, threads as u32)
                .map_err(|m| ParseError::semantic(self.file, loc, m))?
        } else {
            LaunchConfig::default()
        };
        let body = self.block()?;
        Ok(Kernel {
            name,
            params,
            body,
            launch,
            file: self.file.to_string(),
            call_sites: Vec::new(),
        })
    }

    fn kernel_param(&mut self) -> Result<Param, ParseError> {
        let loc = self.peek_loc();
        let shared = self.eat(Tok::Shared);
        self.expect(Tok::Int, "`int`")?;
        let (name, _) = self.ident("parameter name")?;
        let is_array = if self.eat(Tok::LBracket) {
            self.expect(Tok::RBracket, "`]`")?;
            true
        } else {
            false
        };
        let kind = match (shared, is_array) {
            (true, true) => ParamKind::SharedArray,
            (false, true) => ParamKind::PrivateArray,
            (false, false) => ParamKind::Scalar,
            (true, false) => {
                return Err(ParseError::semantic(
                    self.file,
                    loc,
                    "`shared` parameters must be arrays (`shared int A[]`)",
                ));
            }
        };
        Ok(Param { name, kind, loc })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut stmts = Vec::new();
        while self.peek() != &Tok::RBrace {
            if self.peek() == &Tok::Eof {
                return Err(ParseError::syntax(
                    self.file,
                    self.peek_loc(),
                    "unexpected end of file inside block",
                ));
            }
            stmts.push(self.stmt()?);
        }
        self.expect(Tok::RBrace, "`}`")?;
        Ok(stmts)
    }

    fn barrier_guard(&mut self) -> Result<Option<BarrierVarId>, ParseError> {
        if !self.eat(Tok::When) {
            return Ok(None);
        }
        let (name, loc) = self.ident("guard variable (`b<N>`)")?;
        let id = name
            .strip_prefix('b')
            .and_then(|digits| digits.parse::<u32>().ok())
            .filter(|&n| n >= 1);
        match id {
            Some(n) => Ok(Some(BarrierVarId(n))),
            None => Err(ParseError::syntax(
                self.file,
                loc,
                format!("invalid guard variable `{name}`; expected `b<N>` with N >= 1"),
            )),
        }
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let loc = self.peek_loc();
        match self.peek().clone() {
            Tok::Barrier => {
                self.advance();
                let guard = self.barrier_guard()?;
                self.expect(Tok::Semi, "`;`")?;
                Ok(Stmt::Barrier {
                    level: BarrierLevel::Block,
                    origin: BarrierOrigin::Programmer,
                    guard,
                    loc,
                })
            }
            Tok::GridBarrier => {
                self.advance();
                let guard = self.barrier_guard()?;
                self.expect(Tok::Semi, "`;`")?;
                Ok(Stmt::Barrier {
                    level: BarrierLevel::Grid,
                    origin: BarrierOrigin::Programmer,
                    guard,
                    loc,
                })
            }
            Tok::If => {
                self.advance();
                self.expect(Tok::LParen, "`(`")?;
                let cond = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                let then_branch = self.block()?;
                let else_branch = if self.eat(Tok::Else) {
                    self.block()?
                } else {
                    Vec::new()
                };
                Ok(Stmt::If {
                    cond,
                    then_branch,
                    else_branch,
                    loc,
                })
            }
            Tok::While => {
                self.advance();
                self.expect(Tok::LParen, "`(`")?;
                let cond = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                let unroll_hint = if self.eat(Tok::Unroll) {
                    let (n, nloc) = self.int_lit("unroll factor")?;
                    if !(1..=UNROLL_CAP as i64).contains(&n) {
                        return Err(ParseError::semantic(
                            self.file,
                            nloc,
                            format!("unroll factor must be in 1..={UNROLL_CAP}"),
                        ));
                    }
                    Some(n as u32)
                } else {
                    None
                };
                let body = self.block()?;
                Ok(Stmt::While {
                    cond,
                    body,
                    unroll_hint,
                    loc,
                })
            }
            Tok::Assert => {
                self.advance();
                self.expect(Tok::LParen, "`(`")?;
                let cond = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                self.expect(Tok::Semi, "`;`")?;
                Ok(Stmt::Assert { cond, loc })
            }
            Tok::Ident(name) => {
                self.advance();
                match self.peek().clone() {
                    Tok::LParen => {
                        self.advance();
                        let mut args = Vec::new();
                        if self.peek() != &Tok::RParen {
                            loop {
                                args.push(self.expr()?);
                                if !self.eat(Tok::Comma) {
                                    break;
                                }
                            }
                        }
                        self.expect(Tok::RParen, "`)`")?;
                        self.expect(Tok::Semi, "`;`")?;
                        Ok(Stmt::Call {
                            callee: name,
                            args,
                            loc,
                        })
                    }
                    Tok::LBracket => {
                        self.advance();
                        let idx = self.expr()?;
                        self.expect(Tok::RBracket, "`]`")?;
                        self.expect(Tok::Assign, "`=`")?;
                        let value = self.expr()?;
                        self.expect(Tok::Semi, "`;`")?;
                        Ok(Stmt::Assign {
                            target: AssignTarget::Elem(name, idx),
                            value,
                            loc,
                        })
                    }
                    Tok::Assign => {
                        self.advance();
                        let value = self.expr()?;
                        self.expect(Tok::Semi, "`;`")?;
                        Ok(Stmt::Assign {
                            target: AssignTarget::Var(name),
                            value,
                            loc,
                        })
                    }
                    other => Err(ParseError::syntax(
                        self.file,
                        self.peek_loc(),
                        format!("expected `=`, `[`, or `(` after identifier, found {other:?}"),
                    )),
                }
            }
            other => Err(ParseError::syntax(
                self.file,
                loc,
                format!("expected a statement, found {other:?}"),
            )),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.and_expr()?;
        while self.peek() == &Tok::OrOr {
            let loc = lhs.loc;
            self.advance();
            let rhs = self.and_expr()?;
            lhs = Expr::new(
                ExprKind::Binary(super::ast::BinOp::Or, Box::new(lhs), Box::new(rhs)),
                loc,
            );
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.eq_expr()?;
        while self.peek() == &Tok::AndAnd {
            let loc = lhs.loc;
            self.advance();
            let rhs = self.eq_expr()?;
            lhs = Expr::new(
                ExprKind::Binary(super::ast::BinOp::And, Box::new(lhs), Box::new(rhs)),
                loc,
            );
        }
        Ok(lhs)
    }

    fn eq_expr(&mut self) -> Result<Expr, ParseError> {
        use super::ast::BinOp;
        let mut lhs = self.rel_expr()?;
        loop {
            let op = match self.peek() {
                Tok::EqEq => BinOp::Eq,
                Tok::NotEq => BinOp::Ne,
                _ => break,
            };
            let loc = lhs.loc;
            self.advance();
            let rhs = self.rel_expr()?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), loc);
        }
        Ok(lhs)
    }

    fn rel_expr(&mut self) -> Result<Expr, ParseError> {
        use super::ast::BinOp;
        let mut lhs = self.add_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Lt => BinOp::Lt,
                Tok::Le => BinOp::Le,
                Tok::Gt => BinOp::Gt,
                Tok::Ge => BinOp::Ge,
                _ => break,
            };
            let loc = lhs.loc;
            self.advance();
            let rhs = self.add_expr()?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), loc);
        }
        Ok(lhs)
    }

    fn add_expr(&mut self) -> Result<Expr, ParseError> {
        use super::ast::BinOp;
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            let loc = lhs.loc;
            self.advance();
            let rhs = self.mul_expr()?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), loc);
        }
        Ok(lhs)
    }

    fn mul_expr(&mut self) -> Result<Expr, ParseError> {
        use super::ast::BinOp;
        let mut lhs = self.unary_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Percent => BinOp::Mod,
                _ => break,
            };
            let loc = lhs.loc;
            self.advance();
            let rhs = self.unary_expr()?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), loc);
        }
        Ok(lhs)
    }

    fn unary_expr(&mut self) -> Result<Expr, ParseError> {
        let loc = self.peek_loc();
        match self.peek() {
            Tok::Minus => {
                self.advance();
                let e = self.unary_expr()?;
                Ok(Expr::new(ExprKind::Unary(UnOp::Neg, Box::new(e)), loc))
            }
            Tok::Not => {
                self.advance();
                let e = self.unary_expr()?;
                Ok(Expr::new(ExprKind::Unary(UnOp::Not, Box::new(e)), loc))
            }
            _ => self.primary_expr(),
        }
    }

    fn primary_expr(&mut self) -> Result<Expr, ParseError> {
        let loc = self.peek_loc();
        match self.peek().clone() {
            Tok::IntLit(v) => {
                self.advance();
                Ok(Expr::new(ExprKind::IntLit(v), loc))
            }
            Tok::Ident(name) => {
                self.advance();
                if self.eat(Tok::LBracket) {
                    let idx = self.expr()?;
                    self.expect(Tok::RBracket, "`]`")?;
                    Ok(Expr::new(ExprKind::Index(name, Box::new(idx)), loc))
                } else {
                    Ok(Expr::new(ExprKind::Var(name), loc))
                }
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            other => Err(ParseError::syntax(
                self.file,
                loc,
                format!("expected an expression, found {other:?}"),
            )),
        }
    }
}

// ---------------------------------------------------------------------------
// Post-parse rewrites: inlining, splitting, location normalization.
// ---------------------------------------------------------------------------

struct Ctx<'a> {
    file: &'a str,
    fns: &'a BTreeMap<String, FnDef>,
    shared: &'a BTreeSet<String>,
    used: HashSet<String>,
    temp_counter: u32,
    call_sites: Vec<SourceLoc>,
}

impl Ctx<'_> {
    fn fresh_temp(&mut self) -> String {
        loop {
            let name = format!("t{}", self.temp_counter);
            self.temp_counter += 1;
            if !self.used.contains(&name) && !is_builtin(&name) {
                self.used.insert(name.clone());
                return name;
            }
        }
    }
}

fn transform_block(ctx: &mut Ctx, stmts: Vec<Stmt>) -> Result<Vec<Stmt>, ParseError> {
    let mut out: Vec<Stmt> = Vec::new();
    let mut last: Option<SourceLoc> = None;
    for stmt in stmts {
        match stmt {
            Stmt::Call { callee, args, loc } => {
                let def = ctx.fns.get(&callee).ok_or_else(|| {
                    ParseError::semantic(ctx.file, loc, format!("unknown helper `{callee}`"))
                })?;
                if def.params.len() != args.len() {
                    return Err(ParseError::semantic(
                        ctx.file,
                        loc,
                        format!(
                            "helper `{callee}` expects {} argument(s), got {}",
                            def.params.len(),
                            args.len()
                        ),
                    ));
                }
                let map: BTreeMap<String, Expr> = def.params.iter().cloned().zip(args).collect();
                let mut splice = Vec::with_capacity(def.body.len());
                for s in &def.body {
                    splice.push(subst_stmt(ctx.file, s, &map, loc)?);
                }
                let mut counter = 0u32;
                for s in &mut splice {
                    relocate_stmt(s, loc, &mut counter);
                }
                let involves_shared = splice.iter().any(|s| stmt_touches_shared(s, ctx.shared));
                let before = out.len();
                for s in splice {
                    push_processed(ctx, &mut out, &mut last, s)?;
                }
                if involves_shared && out.len() > before {
                    ctx.call_sites.push(out[before].loc());
                }
            }
            other => push_processed(ctx, &mut out, &mut last, other)?,
        }
    }
    Ok(out)
}

fn push_processed(
    ctx: &mut Ctx,
    out: &mut Vec<Stmt>,
    last: &mut Option<SourceLoc>,
    stmt: Stmt,
) -> Result<(), ParseError> {
    match stmt {
        Stmt::If {
            cond,
            then_branch,
            else_branch,
            loc,
        } => {
            let then_branch = transform_block(ctx, then_branch)?;
            let else_branch = transform_block(ctx, else_branch)?;
            push_with_loc(
                out,
                last,
                Stmt::If {
                    cond,
                    then_branch,
                    else_branch,
                    loc,
                },
            );
        }
        Stmt::While {
            cond,
            body,
            unroll_hint,
            loc,
        } => {
            let body = transform_block(ctx, body)?;
            push_with_loc(
                out,
                last,
                Stmt::While {
                    cond,
                    body,
                    unroll_hint,
                    loc,
                },
            );
        }
        Stmt::Assign {
            target: AssignTarget::Elem(array, idx),
            value,
            loc,
        } if ctx.shared.contains(&array)
            && (idx.reads_array(&array) || value.reads_array(&array)) =>
        {
            for s in split_assign(ctx, array, idx, value, loc) {
                push_with_loc(out, last, s);
            }
        }
        other => push_with_loc(out, last, other),
    }
    Ok(())
}

/// Appends `stmt`, bumping its column if needed so locations within the block
/// stay strictly increasing (splices and splits can stack statements on one
/// source position).
fn push_with_loc(out: &mut Vec<Stmt>, last: &mut Option<SourceLoc>, mut stmt: Stmt) {
    if let Some(prev) = *last {
        if stmt.loc() <= prev {
            stmt.set_loc(SourceLoc::new(prev.line, prev.col + 1));
        }
    }
    *last = Some(stmt.loc());
    out.push(stmt);
}

/// Rewrites `A[idx] = value` where `idx`/`value` read shared array `A` into
/// temporary reads followed by a write that no longer reads `A`.
fn split_assign(
    ctx: &mut Ctx,
    array: String,
    mut idx: Expr,
    mut value: Expr,
    loc: SourceLoc,
) -> Vec<Stmt> {
    let mut reads: Vec<Stmt> = Vec::new();
    let mut next = loc;
    loop {
        let hoisted = if idx.reads_array(&array) {
            hoist_innermost_read(&mut idx, &array, ctx, next)
        } else if value.reads_array(&array) {
            hoist_innermost_read(&mut value, &array, ctx, next)
        } else {
            break;
        };
        reads.push(hoisted);
        next = SourceLoc::new(next.line, next.col + 1);
    }
    reads.push(Stmt::Assign {
        target: AssignTarget::Elem(array, idx),
        value,
        loc: next,
    });
    reads
}

/// Finds the first `array[...]` read in `expr` whose own index is free of
/// `array` reads, replaces it with a fresh temporary, and returns the
/// assignment that computes the temporary.
fn hoist_innermost_read(expr: &mut Expr, array: &str, ctx: &mut Ctx, loc: SourceLoc) -> Stmt {
    let temp = ctx.fresh_temp();
    let read =
        take_innermost_read(expr, array, &temp).expect("caller checked that expr reads the array");
    Stmt::Assign {
        target: AssignTarget::Var(temp),
        value: read,
        loc,
    }
}

fn take_innermost_read(expr: &mut Expr, array: &str, temp: &str) -> Option<Expr> {
    match &mut expr.kind {
        ExprKind::IntLit(_) | ExprKind::Var(_) => None,
        ExprKind::Index(name, idx) => {
            if let Some(found) = take_innermost_read(idx, array, temp) {
                return Some(found);
            }
            if name == array {
                let read = expr.clone();
                expr.kind = ExprKind::Var(temp.to_string());
                Some(read)
            } else {
                None
            }
        }
        ExprKind::Unary(_, e) => take_innermost_read(e, array, temp),
        ExprKind::Binary(_, l, r) => {
            take_innermost_read(l, array, temp).or_else(|| take_innermost_read(r, array, temp))
        }
    }
}

fn subst_stmt(
    file: &str,
    stmt: &Stmt,
    map: &BTreeMap<String, Expr>,
    call_loc: SourceLoc,
) -> Result<Stmt, ParseError> {
    // Arguments substituted into positions that name an array (or an
    // assignment destination) must themselves be plain identifiers.
    let subst_name = |name: &str, what: &str| -> Result<String, ParseError> {
        match map.get(name) {
            None => Ok(name.to_string()),
            Some(Expr {
                kind: ExprKind::Var(arg),
                ..
            }) => Ok(arg.clone()),
            Some(_) => Err(ParseError::semantic(
                file,
                call_loc,
                format!("argument for {what} `{name}` must be a plain identifier"),
            )),
        }
    };
    Ok(match stmt {
        Stmt::Assign { target, value, loc } => {
            let target = match target {
                AssignTarget::Var(name) => {
                    AssignTarget::Var(subst_name(name, "assigned parameter")?)
                }
                AssignTarget::Elem(name, idx) => AssignTarget::Elem(
                    subst_name(name, "array parameter")?,
                    subst_expr(file, idx, map, call_loc)?,
                ),
            };
            Stmt::Assign {
                target,
                value: subst_expr(file, value, map, call_loc)?,
                loc: *loc,
            }
        }
        Stmt::Barrier {
            level,
            origin,
            guard,
            loc,
        } => Stmt::Barrier {
            level: *level,
            origin: *origin,
            guard: *guard,
            loc: *loc,
        },
        Stmt::If {
            cond,
            then_branch,
            else_branch,
            loc,
        } => Stmt::If {
            cond: subst_expr(file, cond, map, call_loc)?,
            then_branch: subst_block(file, then_branch, map, call_loc)?,
            else_branch: subst_block(file, else_branch, map, call_loc)?,
            loc: *loc,
        },
        Stmt::While {
            cond,
            body,
            unroll_hint,
            loc,
        } => Stmt::While {
            cond: subst_expr(file, cond, map, call_loc)?,
            body: subst_block(file, body, map, call_loc)?,
            unroll_hint: *unroll_hint,
            loc: *loc,
        },
        Stmt::Call { loc, .. } => {
            // Unreachable: helper bodies were checked to be call-free.
            return Err(ParseError::semantic(
                file,
                *loc,
                "helper functions may not call other helpers",
            ));
        }
        Stmt::Assert { cond, loc } => Stmt::Assert {
            cond: subst_expr(file, cond, map, call_loc)?,
            loc: *loc,
        },
    })
}

fn subst_block(
    file: &str,
    stmts: &[Stmt],
    map: &BTreeMap<String, Expr>,
    call_loc: SourceLoc,
) -> Result<Vec<Stmt>, ParseError> {
    stmts
        .iter()
        .map(|s| subst_stmt(file, s, map, call_loc))
        .collect()
}

fn subst_expr(
    file: &str,
    expr: &Expr,
    map: &BTreeMap<String, Expr>,
    call_loc: SourceLoc,
) -> Result<Expr, ParseError> {
    Ok(match &expr.kind {
        ExprKind::IntLit(_) => expr.clone(),
        ExprKind::Var(name) => match map.get(name) {
            Some(arg) => arg.clone(),
            None => expr.clone(),
        },
        ExprKind::Index(name, idx) => {
            let base = match map.get(name) {
                None => name.clone(),
                Some(Expr {
                    kind: ExprKind::Var(arg),
                    ..
                }) => arg.clone(),
                Some(_) => {
                    return Err(ParseError::semantic(
                        file,
                        call_loc,
                        format!("argument for array parameter `{name}` must be a plain identifier"),
                    ));
                }
            };
            Expr::new(
                ExprKind::Index(base, Box::new(subst_expr(file, idx, map, call_loc)?)),
                expr.loc,
            )
        }
        ExprKind::Unary(op, e) => Expr::new(
            ExprKind::Unary(*op, Box::new(subst_expr(file, e, map, call_loc)?)),
            expr.loc,
        ),
        ExprKind::Binary(op, l, r) => Expr::new(
            ExprKind::Binary(
                *op,
                Box::new(subst_expr(file, l, map, call_loc)?),
                Box::new(subst_expr(file, r, map, call_loc)?),
            ),
            expr.loc,
        ),
    })
}

/// Moves an inlined statement tree to the call site: every statement gets the
/// call line with consecutive columns (pre-order), so summaries point at the
/// invocation.
fn relocate_stmt(stmt: &mut Stmt, call_loc: SourceLoc, counter: &mut u32) {
    let new = SourceLoc::new(call_loc.line, call_loc.col + *counter);
    *counter += 1;
    stmt.set_loc(new);
    let fix_expr = |e: &mut Expr| set_expr_locs(e, new);
    match stmt {
        Stmt::Assign { target, value, .. } => {
            if let AssignTarget::Elem(_, idx) = target {
                fix_expr(idx);
            }
            fix_expr(value);
        }
        Stmt::Barrier { .. } => {}
        Stmt::If {
            cond,
            then_branch,
            else_branch,
            ..
        } => {
            fix_expr(cond);
            for s in then_branch.iter_mut().chain(else_branch.iter_mut()) {
                relocate_stmt(s, call_loc, counter);
            }
        }
        Stmt::While { cond, body, .. } => {
            fix_expr(cond);
            for s in body.iter_mut() {
                relocate_stmt(s, call_loc, counter);
            }
        }
        Stmt::Call { args, .. } => {
            for a in args.iter_mut() {
                fix_expr(a);
            }
        }
        Stmt::Assert { cond, .. } => fix_expr(cond),
    }
}

fn set_expr_locs(expr: &mut Expr, loc: SourceLoc) {
    expr.loc = loc;
    match &mut expr.kind {
        ExprKind::IntLit(_) | ExprKind::Var(_) => {}
        ExprKind::Index(_, idx) => set_expr_locs(idx, loc),
        ExprKind::Unary(_, e) => set_expr_locs(e, loc),
        ExprKind::Binary(_, l, r) => {
            set_expr_locs(l, loc);
            set_expr_locs(r, loc);
        }
    }
}

fn stmt_touches_shared(stmt: &Stmt, shared: &BTreeSet<String>) -> bool {
    let expr_touches = |e: &Expr| {
        let mut arrays = Vec::new();
        e.collect_indexed_arrays(&mut arrays);
        arrays.iter().any(|a| shared.contains(a))
    };
    match stmt {
        Stmt::Assign { target, value, .. } => {
            let target_touches = match target {
                AssignTarget::Var(_) => false,
                AssignTarget::Elem(name, idx) => shared.contains(name) || expr_touches(idx),
            };
            target_touches || expr_touches(value)
        }
        Stmt::Barrier { .. } => false,
        Stmt::If {
            cond,
            then_branch,
            else_branch,
            ..
        } => {
            expr_touches(cond)
                || then_branch.iter().any(|s| stmt_touches_shared(s, shared))
                || else_branch.iter().any(|s| stmt_touches_shared(s, shared))
        }
        Stmt::While { cond, body, .. } => {
            expr_touches(cond) || body.iter().any(|s| stmt_touches_shared(s, shared))
        }
        Stmt::Call { args, .. } => args.iter().any(expr_touches),
        Stmt::Assert { cond, .. } => expr_touches(cond),
    }
}

// ---------------------------------------------------------------------------
// Semantic checks.
// ---------------------------------------------------------------------------

fn check_kernel(file: &str, kernel: &Kernel) -> Result<(), ParseError> {
    let mut declared: BTreeSet<String> = BTreeSet::new();
    check_block(file, kernel, &kernel.body, &mut declared)
}

fn check_block(
    file: &str,
    kernel: &Kernel,
    stmts: &[Stmt],
    declared: &mut BTreeSet<String>,
) -> Result<(), ParseError> {
    for stmt in stmts {
        match stmt {
            Stmt::Assign { target, value, loc } => {
                check_expr(file, kernel, value, declared)?;
                match target {
                    AssignTarget::Var(name) => {
                        if is_builtin(name) {
                            return Err(ParseError::semantic(
                                file,
                                *loc,
                                format!("cannot assign to builtin `{name}`"),
                            ));
                        }
                        if kernel.param(name).is_some() {
                            return Err(ParseError::semantic(
                                file,
                                *loc,
                                format!("cannot assign to parameter `{name}`"),
                            ));
                        }
                        declared.insert(name.clone());
                    }
                    AssignTarget::Elem(name, idx) => {
                        check_expr(file, kernel, idx, declared)?;
                        match kernel.param(name).map(|p| p.kind) {
                            Some(ParamKind::SharedArray) | Some(ParamKind::PrivateArray) => {}
                            Some(ParamKind::Scalar) => {
                                return Err(ParseError::semantic(
                                    file,
                                    *loc,
                                    format!("`{name}` is a scalar, not an array"),
                                ));
                            }
                            None => {
                                return Err(ParseError::semantic(
                                    file,
                                    *loc,
                                    format!("`{name}` is not an array parameter"),
                                ));
                            }
                        }
                    }
                }
            }
            Stmt::Barrier { .. } => {}
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                check_expr(file, kernel, cond, declared)?;
                check_block(file, kernel, then_branch, declared)?;
                check_block(file, kernel, else_branch, declared)?;
            }
            Stmt::While { cond, body, .. } => {
                check_expr(file, kernel, cond, declared)?;
                check_block(file, kernel, body, declared)?;
            }
            Stmt::Call { loc, .. } => {
                return Err(ParseError::semantic(
                    file,
                    *loc,
                    "internal error: unresolved call after inlining",
                ));
            }
            Stmt::Assert { cond, .. } => check_expr(file, kernel, cond, declared)?,
        }
    }
    Ok(())
}

fn check_expr(
    file: &str,
    kernel: &Kernel,
    expr: &Expr,
    declared: &BTreeSet<String>,
) -> Result<(), ParseError> {
    match &expr.kind {
        ExprKind::IntLit(_) => Ok(()),
        ExprKind::Var(name) => {
            if is_builtin(name) || declared.contains(name) {
                return Ok(());
            }
            match kernel.param(name).map(|p| p.kind) {
                Some(ParamKind::Scalar) => Ok(()),
                Some(_) => Err(ParseError::semantic(
                    file,
                    expr.loc,
                    format!("array `{name}` used without an index"),
                )),
                None => Err(ParseError::semantic(
                    file,
                    expr.loc,
                    format!("undeclared identifier `{name}`"),
                )),
            }
        }
        ExprKind::Index(name, idx) => {
            match kernel.param(name).map(|p| p.kind) {
                Some(ParamKind::SharedArray) | Some(ParamKind::PrivateArray) => {}
                Some(ParamKind::Scalar) => {
                    return Err(ParseError::semantic(
                        file,
                        expr.loc,
                        format!("`{name}` is a scalar, not an array"),
                    ));
                }
                None => {
                    return Err(ParseError::semantic(
                        file,
                        expr.loc,
                        format!("`{name}` is not an array parameter"),
                    ));
                }
            }
            check_expr(file, kernel, idx, declared)
        }
        ExprKind::Unary(_, e) => check_expr(file, kernel, e, declared),
        ExprKind::Binary(_, l, r) => {
            check_expr(file, kernel, l, declared)?;
            check_expr(file, kernel, r, declared)
        }
    }
}
