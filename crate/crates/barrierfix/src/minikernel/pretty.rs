//! Canonical MiniKernel pretty printer.
//!
//! Output re-parses to a structurally equal kernel: two-space indentation,
//! one statement per line, an explicit `launch(...)` clause, and minimal
//! parentheses (only where precedence requires them).

use super::ast::{
    AssignTarget, BarrierLevel, BinOp, Expr, ExprKind, Kernel, Param, ParamKind, Stmt, UnOp,
};

/// Renders `kernel` as MiniKernel source text (with a trailing newline).
pub fn pretty_print(kernel: &Kernel) -> String {
    let mut out = String::new();
    let params: Vec<String> = kernel.params.iter().map(param_text).collect();
    out.push_str(&format!(
        "kernel {}({}) launch({}, {}) {{\n",
        kernel.name,
        params.join(", "),
        kernel.launch.blocks,
        kernel.launch.threads_per_block
    ));
    print_block(&mut out, &kernel.body, 1);
    out.push_str("}\n");
    out
}

fn param_text(param: &Param) -> String {
    match param.kind {
        ParamKind::SharedArray => format!("shared int {}[]", param.name),
        ParamKind::PrivateArray => format!("int {}[]", param.name),
        ParamKind::Scalar => format!("int {}", param.name),
    }
}

fn print_block(out: &mut String, stmts: &[Stmt], depth: usize) {
    for stmt in stmts {
        print_stmt(out, stmt, depth);
    }
}

fn print_stmt(out: &mut String, stmt: &Stmt, depth: usize) {
    let pad = "  ".repeat(depth);
    match stmt {
        Stmt::Assign { target, value, .. } => {
            let lhs = match target {
                AssignTarget::Var(name) => name.clone(),
                AssignTarget::Elem(name, idx) => format!("{name}[{}]", expr_text(idx)),
            };
            out.push_str(&format!("{pad}{lhs} = {};\n", expr_text(value)));
        }
        Stmt::Barrier { level, guard, .. } => {
            let word = match level {
                BarrierLevel::Block => "barrier",
                BarrierLevel::Grid => "gridbarrier",
            };
            match guard {
                Some(id) => out.push_str(&format!("{pad}{word} when {id};\n")),
                None => out.push_str(&format!("{pad}{word};\n")),
            }
        }
        Stmt::If {
            cond,
            then_branch,
            else_branch,
            ..
        } => {
            out.push_str(&format!("{pad}if ({}) {{\n", expr_text(cond)));
            print_block(out, then_branch, depth + 1);
            if else_branch.is_empty() {
                out.push_str(&format!("{pad}}}\n"));
            } else {
                out.push_str(&format!("{pad}}} else {{\n"));
                print_block(out, else_branch, depth + 1);
                out.push_str(&format!("{pad}}}\n"));
            }
        }
        Stmt::While {
            cond,
            body,
            unroll_hint,
            ..
        } => {
            match unroll_hint {
                Some(n) => {
                    out.push_str(&format!("{pad}while ({}) unroll {n} {{\n", expr_text(cond)))
                }
                None => out.push_str(&format!("{pad}while ({}) {{\n", expr_text(cond))),
            }
            print_block(out, body, depth + 1);
            out.push_str(&format!("{pad}}}\n"));
        }
        Stmt::Call { callee, args, .. } => {
            let args: Vec<String> = args.iter().map(expr_text).collect();
            out.push_str(&format!("{pad}{callee}({});\n", args.join(", ")));
        }
        Stmt::Assert { cond, .. } => {
            out.push_str(&format!("{pad}assert({});\n", expr_text(cond)));
        }
    }
}

fn bin_op_text(op: BinOp) -> &'static str {
    match op {
        BinOp::Add => "+",
        BinOp::Sub => "-",
        BinOp::Mul => "*",
        BinOp::Div => "/",
        BinOp::Mod => "%",
        BinOp::Eq => "==",
        BinOp::Ne => "!=",
        BinOp::Lt => "<",
        BinOp::Le => "<=",
        BinOp::Gt => ">",
        BinOp::Ge => ">=",
        BinOp::And => "&&",
        BinOp::Or => "||",
    }
}

fn precedence(op: BinOp) -> u8 {
    match op {
        BinOp::Or => 1,
        BinOp::And => 2,
        BinOp::Eq | BinOp::Ne => 3,
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
        BinOp::Add | BinOp::Sub => 5,
        BinOp::Mul | BinOp::Div | BinOp::Mod => 6,
    }
}

const UNARY_PREC: u8 = 7;
const ATOM_PREC: u8 = 8;

fn expr_prec(expr: &Expr) -> u8 {
    match &expr.kind {
        ExprKind::IntLit(_) | ExprKind::Var(_) | ExprKind::Index(..) => ATOM_PREC,
        ExprKind::Unary(..) => UNARY_PREC,
        ExprKind::Binary(op, ..) => precedence(*op),
    }
}

fn expr_text(expr: &Expr) -> String {
    match &expr.kind {
        ExprKind::IntLit(v) => v.to_string(),
        ExprKind::Var(name) => name.clone(),
        ExprKind::Index(name, idx) => format!("{name}[{}]", expr_text(idx)),
        ExprKind::Unary(op, e) => {
            let sym = match op {
                UnOp::Neg => "-",
                UnOp::Not => "!",
            };
            if expr_prec(e) < UNARY_PREC {
                format!("{sym}({})", expr_text(e))
            } else {
                format!("{sym}{}", expr_text(e))
            }
        }
        ExprKind::Binary(op, l, r) => {
            let prec = precedence(*op);
            // Binary operators are left-associative: the left child may share
            // this precedence without parentheses, the right child may not.
            let lhs = if expr_prec(l) < prec {
                format!("({})", expr_text(l))
            } else {
                expr_text(l)
            };
            let rhs = if expr_prec(r) <= prec {
                format!("({})", expr_text(r))
            } else {
                expr_text(r)
            };
            format!("{lhs} {} {rhs}", bin_op_text(*op))
        }
    }
}
