//! Scalar-field expressions over chart coordinates.
//!
//! Grammar (whitespace insensitive, `^` right-associative):
//!
//! ```text
//! expr  := term  (('+'|'-') term)*
//! term  := unary (('*'|'/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | 'pi' | variable | function '(' expr ')' | '(' expr ')'
//! ```
//!
//! Variables are the chart coordinates `u`, `v` plus the ambient coordinates
//! `x`, `y`, `z` where the manifold defines them (the sphere does, the flat
//! catalog rectangles do not). Evaluation is IEEE double precision; any
//! non-finite intermediate is reported as a domain error instead of leaking
//! into the geometry.

use crate::error::{MyersError, Result};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    U,
    V,
    X,
    Y,
    Z,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::U => "u",
            Var::V => "v",
            Var::X => "x",
            Var::Y => "y",
            Var::Z => "z",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Cosh,
    Sinh,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Cosh => "cosh",
            Func::Sinh => "sinh",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "cosh" => Func::Cosh,
            "sinh" => Func::Sinh,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    /// Non-negative literal; negative values are spelled with unary minus.
    Num(f64),
    Pi,
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Variable bindings for evaluation. `u`, `v` are always present; the
/// ambient slots are filled by the manifold when it defines them.
#[derive(Debug, Clone, Copy)]
pub struct Env {
    pub u: f64,
    pub v: f64,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub z: Option<f64>,
}

impl Env {
    pub fn chart(u: f64, v: f64) -> Env {
        Env {
            u,
            v,
            x: None,
            y: None,
            z: None,
        }
    }

    fn get(&self, var: Var) -> Result<f64> {
        let slot = match var {
            Var::U => Some(self.u),
            Var::V => Some(self.v),
            Var::X => self.x,
            Var::Y => self.y,
            Var::Z => self.z,
        };
        slot.ok_or_else(|| MyersError::UnavailableVariable {
            name: var.name().to_string(),
            manifold: "<evaluation environment>".to_string(),
        })
    }
}

fn apply_func(f: Func, a: f64) -> Result<f64> {
    let val = match f {
        Func::Sin => a.sin(),
        Func::Cos => a.cos(),
        Func::Tan => a.tan(),
        Func::Exp => a.exp(),
        Func::Log => {
            if a <= 0.0 {
                return Err(MyersError::Domain { op: "log", arg: a });
            }
            a.ln()
        }
        Func::Sqrt => {
            if a < 0.0 {
                return Err(MyersError::Domain { op: "sqrt", arg: a });
            }
            a.sqrt()
        }
        Func::Abs => a.abs(),
        Func::Cosh => a.cosh(),
        Func::Sinh => a.sinh(),
    };
    if val.is_finite() {
        Ok(val)
    } else {
        Err(MyersError::Domain {
            op: f.name(),
            arg: a,
        })
    }
}

fn apply_bin(op: BinOp, l: f64, r: f64) -> Result<f64> {
    let val = match op {
        BinOp::Add => l + r,
        BinOp::Sub => l - r,
        BinOp::Mul => l * r,
        BinOp::Div => l / r,
        BinOp::Pow => l.powf(r),
    };
    if val.is_finite() {
        Ok(val)
    } else {
        let op = match op {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        };
        Err(MyersError::Domain { op, arg: r })
    }
}

impl Expr {
    pub fn eval(&self, env: &Env) -> Result<f64> {
        match self {
            Expr::Num(x) => Ok(*x),
            Expr::Pi => Ok(std::f64::consts::PI),
            Expr::Var(v) => env.get(*v),
            Expr::Neg(e) => Ok(-e.eval(env)?),
            Expr::Bin(op, l, r) => apply_bin(*op, l.eval(env)?, r.eval(env)?),
            Expr::Call(f, a) => apply_func(*f, a.eval(env)?),
        }
    }

    pub fn variables(&self, out: &mut Vec<Var>) {
        match self {
            Expr::Num(_) | Expr::Pi => {}
            Expr::Var(v) => {
                if !out.contains(v) {
                    out.push(*v);
                }
            }
            Expr::Neg(e) => e.variables(out),
            Expr::Bin(_, l, r) => {
                l.variables(out);
                r.variables(out);
            }
            Expr::Call(_, a) => a.variables(out),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Bin(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }
}

// ---------------------------------------------------------------------------
// Printing. `parse(print(e)) == e` structurally for any parser-produced tree.
// ---------------------------------------------------------------------------

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => write!(f, "{x}"),
            Expr::Pi => write!(f, "pi"),
            Expr::Var(v) => write!(f, "{}", v.name()),
            Expr::Neg(e) => {
                // unary minus binds tighter than * and + but looser than ^
                if e.precedence() >= 3 {
                    write!(f, "-{e}")
                } else {
                    write!(f, "-({e})")
                }
            }
            Expr::Bin(op, l, r) => {
                let (sym, prec) = match op {
                    BinOp::Add => ("+", 1),
                    BinOp::Sub => ("-", 1),
                    BinOp::Mul => ("*", 2),
                    BinOp::Div => ("/", 2),
                    BinOp::Pow => ("^", 4),
                };
                if *op == BinOp::Pow {
                    // left operand of ^ must be an atom; right is unary-level
                    if l.precedence() >= 5 {
                        write!(f, "{l}")?;
                    } else {
                        write!(f, "({l})")?;
                    }
                    write!(f, "{sym}")?;
                    if r.precedence() >= 3 {
                        write!(f, "{r}")
                    } else {
                        write!(f, "({r})")
                    }
                } else {
                    if l.precedence() >= prec {
                        write!(f, "{l}")?;
                    } else {
                        write!(f, "({l})")?;
                    }
                    write!(f, "{sym}")?;
                    // left-associative: same-precedence right child needs parens
                    if r.precedence() > prec {
                        write!(f, "{r}")
                    } else {
                        write!(f, "({r})")
                    }
                }
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

// ---------------------------------------------------------------------------
// Tokenizer + recursive-descent parser
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(x) => format!("number `{x}`"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next_token(&mut self) -> Result<(Tok, usize)> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((Tok::Eof, start));
        }
        let c = self.src[self.pos];
        let single = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = single {
            self.pos += 1;
            return Ok((t, start));
        }
        if c.is_ascii_digit() || c == b'.' {
            let mut end = self.pos;
            let mut seen_exp = false;
            while end < self.src.len() {
                let b = self.src[end];
                if b.is_ascii_digit() || b == b'.' {
                    end += 1;
                } else if (b == b'e' || b == b'E') && !seen_exp {
                    // exponent only if followed by digits or a signed digit
                    let mut j = end + 1;
                    if j < self.src.len() && (self.src[j] == b'+' || self.src[j] == b'-') {
                        j += 1;
                    }
                    if j < self.src.len() && self.src[j].is_ascii_digit() {
                        seen_exp = true;
                        end = j;
                    } else {
                        break;
                    }
                } else {
                    break;
                }
            }
            let text = std::str::from_utf8(&self.src[self.pos..end]).unwrap();
            let value: f64 = text.parse().map_err(|_| MyersError::Syntax {
                offset: start,
                expected: "a numeric literal".into(),
                found: format!("`{text}`"),
            })?;
            self.pos = end;
            return Ok((Tok::Num(value), start));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let mut end = self.pos;
            while end < self.src.len()
                && (self.src[end].is_ascii_alphanumeric() || self.src[end] == b'_')
            {
                end += 1;
            }
            let text = std::str::from_utf8(&self.src[self.pos..end]).unwrap().to_string();
            self.pos = end;
            return Ok((Tok::Ident(text), start));
        }
        Err(MyersError::Syntax {
            offset: start,
            expected: "a number, identifier, operator, or parenthesis".into(),
            found: format!("`{}`", c as char),
        })
    }
}

const MAX_NESTING: usize = 200;

struct Parser {
    toks: Vec<(Tok, usize)>,
    idx: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &(Tok, usize) {
        &self.toks[self.idx]
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.idx].clone();
        if self.idx + 1 < self.toks.len() {
            self.idx += 1;
        }
        t
    }

    fn expect(&mut self, want: &Tok, expected: &str) -> Result<()> {
        let (t, off) = self.peek().clone();
        if &t == want {
            self.bump();
            Ok(())
        } else {
            Err(MyersError::Syntax {
                offset: off,
                expected: expected.into(),
                found: t.describe(),
            })
        }
    }

    fn enter(&mut self) -> Result<()> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            let (_, off) = *self.peek();
            return Err(MyersError::Syntax {
                offset: off,
                expected: format!("nesting no deeper than {MAX_NESTING}"),
                found: "deeper nesting".into(),
            });
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr> {
        self.enter()?;
        let out = self.expr_inner();
        self.depth -= 1;
        out
    }

    fn expr_inner(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().0 {
                Tok::Plus => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::Bin(BinOp::Add, Box::new(lhs), Box::new(rhs));
                }
                Tok::Minus => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::Bin(BinOp::Sub, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek().0 {
                Tok::Star => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = Expr::Bin(BinOp::Mul, Box::new(lhs), Box::new(rhs));
                }
                Tok::Slash => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = Expr::Bin(BinOp::Div, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        self.enter()?;
        let out = if self.peek().0 == Tok::Minus {
            self.bump();
            self.unary().map(|inner| Expr::Neg(Box::new(inner)))
        } else {
            self.power()
        };
        self.depth -= 1;
        out
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek().0 == Tok::Caret {
            self.bump();
            // right-associative; exponent may carry a unary minus
            let exponent = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let (t, off) = self.bump();
        match t {
            Tok::Num(x) => Ok(Expr::Num(x)),
            Tok::Ident(name) => {
                if name == "pi" {
                    return Ok(Expr::Pi);
                }
                if let Some(f) = Func::from_name(&name) {
                    self.expect(&Tok::LParen, "`(` after function name")?;
                    let arg = self.expr()?;
                    self.expect(&Tok::RParen, "`)` closing the function argument")?;
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                match name.as_str() {
                    "u" => Ok(Expr::Var(Var::U)),
                    "v" => Ok(Expr::Var(Var::V)),
                    "x" => Ok(Expr::Var(Var::X)),
                    "y" => Ok(Expr::Var(Var::Y)),
                    "z" => Ok(Expr::Var(Var::Z)),
                    _ => Err(MyersError::UnknownIdentifier { name, offset: off }),
                }
            }
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(inner)
            }
            other => Err(MyersError::Syntax {
                offset: off,
                expected: "a number, variable, function call, or `(`".into(),
                found: other.describe(),
            }),
        }
    }
}

/// A parsed scalar field over chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarFieldExpr {
    pub ast: Expr,
}

impl ScalarFieldExpr {
    pub fn parse(source: &str) -> Result<ScalarFieldExpr> {
        let mut lexer = Lexer {
            src: source.as_bytes(),
            pos: 0,
        };
        let mut toks = Vec::new();
        loop {
            let (t, off) = lexer.next_token()?;
            let eof = t == Tok::Eof;
            toks.push((t, off));
            if eof {
                break;
            }
        }
        let mut parser = Parser { toks, idx: 0, depth: 0 };
        let ast = parser.expr()?;
        let (trailing, off) = parser.peek().clone();
        if trailing != Tok::Eof {
            return Err(MyersError::Syntax {
                offset: off,
                expected: "end of input or an operator".into(),
                found: trailing.describe(),
            });
        }
        Ok(ScalarFieldExpr { ast })
    }

    pub fn eval(&self, env: &Env) -> Result<f64> {
        self.ast.eval(env)
    }

    /// Plain two-coordinate evaluation with no ambient bindings.
    pub fn eval_uv(&self, u: f64, v: f64) -> Result<f64> {
        self.eval(&Env::chart(u, v))
    }

    pub fn print(&self) -> String {
        self.ast.to_string()
    }

    pub fn variables(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.ast.variables(&mut out);
        out
    }

    pub fn is_zero_literal(&self) -> bool {
        matches!(self.ast, Expr::Num(x) if x == 0.0)
    }

    pub fn compile(&self) -> Program {
        let mut code = Vec::new();
        compile_into(&self.ast, &mut code);
        Program { code }
    }
}

// ---------------------------------------------------------------------------
// Compiled stack program for the hot loops (same op semantics as `eval`).
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub enum Instr {
    Push(f64),
    Load(Var),
    Neg,
    Bin(BinOp),
    Call(Func),
}

#[derive(Debug, Clone)]
pub struct Program {
    code: Vec<Instr>,
}

fn compile_into(e: &Expr, out: &mut Vec<Instr>) {
    match e {
        Expr::Num(x) => out.push(Instr::Push(*x)),
        Expr::Pi => out.push(Instr::Push(std::f64::consts::PI)),
        Expr::Var(v) => out.push(Instr::Load(*v)),
        Expr::Neg(inner) => {
            compile_into(inner, out);
            out.push(Instr::Neg);
        }
        Expr::Bin(op, l, r) => {
            compile_into(l, out);
            compile_into(r, out);
            out.push(Instr::Bin(*op));
        }
        Expr::Call(f, a) => {
            compile_into(a, out);
            out.push(Instr::Call(*f));
        }
    }
}

impl Program {
    pub fn eval(&self, env: &Env) -> Result<f64> {
        // the parser caps nesting at MAX_NESTING, which bounds this depth
        let mut stack = [0.0f64; MAX_NESTING + 8];
        let mut top = 0usize;
        for instr in &self.code {
            match instr {
                Instr::Push(x) => {
                    stack[top] = *x;
                    top += 1;
                }
                Instr::Load(v) => {
                    stack[top] = env.get(*v)?;
                    top += 1;
                }
                Instr::Neg => stack[top - 1] = -stack[top - 1],
                Instr::Bin(op) => {
                    let r = stack[top - 1];
                    let l = stack[top - 2];
                    stack[top - 2] = apply_bin(*op, l, r)?;
                    top -= 1;
                }
                Instr::Call(f) => {
                    stack[top - 1] = apply_func(*f, stack[top - 1])?;
                }
            }
        }
        Ok(stack[0])
    }
}
