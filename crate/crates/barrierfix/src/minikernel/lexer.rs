//! Tokenizer for MiniKernel source text.

use super::ast::SourceLoc;
use super::parser::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    IntLit(i64),
    // Keywords.
    Kernel,
    Fn,
    Shared,
    Int,
    Barrier,
    GridBarrier,
    When,
    If,
    Else,
    While,
    Unroll,
    Assert,
    Launch,
    // Punctuation and operators.
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Semi,
    Comma,
    Assign,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    AndAnd,
    OrOr,
    Not,
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub loc: SourceLoc,
}

pub fn lex(file: &str, src: &str) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    let mut chars = src.chars().peekable();
    let mut line: u32 = 1;
    let mut col: u32 = 1;

    macro_rules! bump {
        () => {{
            let c = chars.next();
            if let Some(ch) = c {
                if ch == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
            }
            c
        }};
    }

    loop {
        let loc = SourceLoc::new(line, col);
        let c = match chars.peek().copied() {
            Some(c) => c,
            None => {
                tokens.push(Token { tok: Tok::Eof, loc });
                return Ok(tokens);
            }
        };
        if c.is_whitespace() {
            bump!();
            continue;
        }
        // Line comments: `// ...`.
        if c == '/' {
            let mut ahead = chars.clone();
            ahead.next();
            if ahead.peek() == Some(&'/') {
                while let Some(&ch) = chars.peek() {
                    if ch == '\n' {
                        break;
                    }
                    bump!();
                }
                continue;
            }
        }
        if c.is_ascii_digit() {
            let mut text = String::new();
            while let Some(&ch) = chars.peek() {
                if ch.is_ascii_digit() {
                    text.push(ch);
                    bump!();
                } else {
                    break;
                }
            }
            let value: i64 = text.parse().map_err(|_| ParseError::Syntax {
                file: file.to_string(),
                line: loc.line,
                col: loc.col,
                message: format!("integer literal `{text}` out of range"),
            })?;
            tokens.push(Token {
                tok: Tok::IntLit(value),
                loc,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut text = String::new();
            while let Some(&ch) = chars.peek() {
                if ch.is_ascii_alphanumeric() || ch == '_' {
                    text.push(ch);
                    bump!();
                } else {
                    break;
                }
            }
            let tok = match text.as_str() {
                "kernel" => Tok::Kernel,
                "fn" => Tok::Fn,
                "shared" => Tok::Shared,
                "int" => Tok::Int,
                "barrier" => Tok::Barrier,
                "gridbarrier" => Tok::GridBarrier,
                "when" => Tok::When,
                "if" => Tok::If,
                "else" => Tok::Else,
                "while" => Tok::While,
                "unroll" => Tok::Unroll,
                "assert" => Tok::Assert,
                "launch" => Tok::Launch,
                _ => Tok::Ident(text),
            };
            tokens.push(Token { tok, loc });
            continue;
        }
        bump!();
        let two = |next: char, chars: &mut std::iter::Peekable<std::str::Chars>| {
            chars.peek() == Some(&next)
        };
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ';' => Tok::Semi,
            ',' => Tok::Comma,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '%' => Tok::Percent,
            '=' => {
                if two('=', &mut chars) {
                    bump!();
                    Tok::EqEq
                } else {
                    Tok::Assign
                }
            }
            '!' => {
                if two('=', &mut chars) {
                    bump!();
                    Tok::NotEq
                } else {
                    Tok::Not
                }
            }
            '<' => {
                if two('=', &mut chars) {
                    bump!();
                    Tok::Le
                } else {
                    Tok::Lt
                }
            }
            '>' => {
                if two('=', &mut chars) {
                    bump!();
                    Tok::Ge
                } else {
                    Tok::Gt
                }
            }
            '&' => {
                if two('&', &mut chars) {
                    bump!();
                    Tok::AndAnd
                } else {
                    return Err(ParseError::Syntax {
                        file: file.to_string(),
                        line: loc.line,
                        col: loc.col,
                        message: "expected `&&`".to_string(),
                    });
                }
            }
            '|' => {
                if two('|', &mut chars) {
                    bump!();
                    Tok::OrOr
                } else {
                    return Err(ParseError::Syntax {
                        file: file.to_string(),
                        line: loc.line,
                        col: loc.col,
                        message: "expected `||`".to_string(),
                    });
                }
            }
            other => {
                return Err(ParseError::Syntax {
                    file: file.to_string(),
                    line: loc.line,
                    col: loc.col,
                    message: format!("unexpected character `{other}`"),
                });
            }
        };
        tokens.push(Token { tok, loc });
    }
}
