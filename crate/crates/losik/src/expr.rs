//! Expression DSL for scalar functions and vector fields on coordinate
//! charts.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr   := term { ("+"|"-") term } ;
//! term   := factor { ("*"|"/") factor } ;
//! factor := unary [ "^" intlit ] ;
//! unary  := [ "-" ] primary ;
//! primary:= number | ident | "(" expr ")" | func "(" args ")" ;
//! func   := "sin"|"cos"|"exp"|"ln"|"sqrt"|"pow" ;
//! ident  := "y" digits | "r" | "r2" | "pi" ;
//! ```
//!
//! `r2` is the everywhere-smooth `sum (y^i)^2`; `r = sqrt(r2)` is smooth
//! away from the origin only. `^` takes integer literal exponents;
//! `pow(x, c)` takes a real literal exponent and a positive base.

use std::fmt;

use crate::error::{Error, Result};
use crate::taylor::TaylorValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

/// Abstract syntax tree of the DSL. Variables are stored zero-based
/// (`Var(0)` is `y1`).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    R,
    R2,
    Pi,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    PowInt(Box<Expr>, i32),
    PowReal(Box<Expr>, f64),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }
    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }
    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Bin(BinOp::Add, Box::new(a), Box::new(b))
    }
    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Bin(BinOp::Sub, Box::new(a), Box::new(b))
    }
    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Bin(BinOp::Mul, Box::new(a), Box::new(b))
    }
    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::Bin(BinOp::Div, Box::new(a), Box::new(b))
    }
    pub fn neg(a: Expr) -> Expr {
        Expr::Neg(Box::new(a))
    }
    pub fn powi(a: Expr, k: i32) -> Expr {
        Expr::PowInt(Box::new(a), k)
    }

    /// True if the tree mentions the non-smooth symbol `r`.
    pub fn uses_r(&self) -> bool {
        match self {
            Expr::R => true,
            Expr::Num(_) | Expr::Var(_) | Expr::R2 | Expr::Pi => false,
            Expr::Neg(a) | Expr::PowInt(a, _) | Expr::PowReal(a, _) | Expr::Call(_, a) => {
                a.uses_r()
            }
            Expr::Bin(_, a, b) => a.uses_r() || b.uses_r(),
        }
    }

    /// Largest variable index used, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Var(i) => Some(*i),
            Expr::Num(_) | Expr::R | Expr::R2 | Expr::Pi => None,
            Expr::Neg(a) | Expr::PowInt(a, _) | Expr::PowReal(a, _) | Expr::Call(_, a) => {
                a.max_var()
            }
            Expr::Bin(_, a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, None) => x,
                (None, y) => y,
            },
        }
    }
}

// ---------------------------------------------------------------------------
// lexer
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
    Comma,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                toks.push((Tok::Plus, i));
                i += 1;
            }
            '-' => {
                toks.push((Tok::Minus, i));
                i += 1;
            }
            '*' => {
                toks.push((Tok::Star, i));
                i += 1;
            }
            '/' => {
                toks.push((Tok::Slash, i));
                i += 1;
            }
            '^' => {
                toks.push((Tok::Caret, i));
                i += 1;
            }
            '(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            ')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            ',' => {
                toks.push((Tok::Comma, i));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // exponent part
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| Error::SyntaxError {
                    pos: start,
                    expected: format!("number (got `{text}`)"),
                })?;
                toks.push((Tok::Num(v), start));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push((Tok::Ident(src[start..i].to_string()), start));
            }
            _ => {
                return Err(Error::SyntaxError {
                    pos: i,
                    expected: format!("token (got `{c}`)"),
                })
            }
        }
    }
    Ok(toks)
}

// ---------------------------------------------------------------------------
// parser
// ---------------------------------------------------------------------------

struct Parser<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    src_len: usize,
    n: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|(_, p)| *p)
            .unwrap_or(self.src_len)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        let pos = self.here();
        match self.bump() {
            Some(t) if t == tok => Ok(()),
            _ => Err(Error::SyntaxError {
                pos,
                expected: what.to_string(),
            }),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::add(lhs, rhs);
                }
                Some(Tok::Minus) => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::sub(lhs, rhs);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    let rhs = self.factor()?;
                    lhs = Expr::mul(lhs, rhs);
                }
                Some(Tok::Slash) => {
                    self.bump();
                    let rhs = self.factor()?;
                    lhs = Expr::div(lhs, rhs);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.unary()?;
        if self.peek() == Some(&Tok::Caret) {
            self.bump();
            let pos = self.here();
            let mut sign = 1i32;
            if self.peek() == Some(&Tok::Minus) {
                self.bump();
                sign = -1;
            }
            match self.bump() {
                Some(Tok::Num(v)) if v.fract() == 0.0 => {
                    Ok(Expr::powi(base, sign * v as i32))
                }
                _ => Err(Error::SyntaxError {
                    pos,
                    expected: "integer literal exponent".to_string(),
                }),
            }
        } else {
            Ok(base)
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(&Tok::Minus) {
            self.bump();
            let p = self.primary()?;
            Ok(Expr::neg(p))
        } else {
            self.primary()
        }
    }

    fn primary(&mut self) -> Result<Expr> {
        let pos = self.here();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Expr::Num(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => self.ident_or_call(name, pos),
            _ => Err(Error::SyntaxError {
                pos,
                expected: "number, identifier, `(` or function call".to_string(),
            }),
        }
    }

    fn ident_or_call(&mut self, name: String, pos: usize) -> Result<Expr> {
        let func = match name.as_str() {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "ln" => Some(Func::Ln),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        };
        if let Some(f) = func {
            self.expect(Tok::LParen, "`(` after function name")?;
            let arg = self.expr()?;
            if self.peek() == Some(&Tok::Comma) {
                return Err(Error::ArityError(format!("{name} takes one argument")));
            }
            self.expect(Tok::RParen, "`)`")?;
            return Ok(Expr::Call(f, Box::new(arg)));
        }
        if name == "pow" {
            self.expect(Tok::LParen, "`(` after pow")?;
            let base = self.expr()?;
            self.expect(Tok::Comma, "`,` (pow takes two arguments)")?;
            let epos = self.here();
            let mut sign = 1.0;
            if self.peek() == Some(&Tok::Minus) {
                self.bump();
                sign = -1.0;
            }
            let p = match self.bump() {
                Some(Tok::Num(v)) => v,
                _ => {
                    return Err(Error::SyntaxError {
                        pos: epos,
                        expected: "real literal exponent".to_string(),
                    })
                }
            };
            self.expect(Tok::RParen, "`)`")?;
            return Ok(Expr::PowReal(Box::new(base), sign * p));
        }
        match name.as_str() {
            "r" => Ok(Expr::R),
            "r2" => Ok(Expr::R2),
            "pi" => Ok(Expr::Pi),
            _ => {
                if let Some(digits) = name.strip_prefix('y') {
                    if let Ok(idx) = digits.parse::<usize>() {
                        if idx >= 1 && idx <= self.n {
                            return Ok(Expr::Var(idx - 1));
                        }
                        return Err(Error::UnknownIdentifier { name, pos });
                    }
                }
                Err(Error::UnknownIdentifier { name, pos })
            }
        }
    }
}

/// Parse a single expression against chart dimension `n`.
pub fn parse(src: &str, n: usize) -> Result<Expr> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        src_len: src.len(),
        n,
    };
    let e = p.expr()?;
    if p.pos != toks.len() {
        return Err(Error::SyntaxError {
            pos: p.here(),
            expected: "end of input".to_string(),
        });
    }
    Ok(e)
}

/// Split a comma-separated component list at top-level commas (commas inside
/// `pow(...)` do not split) and parse each piece.
pub fn parse_components(src: &str, n: usize) -> Result<Vec<Expr>> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (i, c) in src.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                parts.push(&src[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&src[start..]);
    parts.iter().map(|p| parse(p, n)).collect()
}

// ---------------------------------------------------------------------------
// pretty printer
// ---------------------------------------------------------------------------

fn level(e: &Expr) -> u8 {
    match e {
        Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Expr::PowInt(..) | Expr::Neg(..) => 3,
        _ => 4,
    }
}

fn fmt_child(e: &Expr, min_level: u8, strict: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let l = level(e);
    if l < min_level || (strict && l == min_level) {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(i) => write!(f, "y{}", i + 1),
            Expr::R => write!(f, "r"),
            Expr::R2 => write!(f, "r2"),
            Expr::Pi => write!(f, "pi"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                // unary applies to a primary
                fmt_child(a, 4, false, f)
            }
            Expr::Bin(op, a, b) => {
                let (sym, lvl) = match op {
                    BinOp::Add => ("+", 1),
                    BinOp::Sub => ("-", 1),
                    BinOp::Mul => ("*", 2),
                    BinOp::Div => ("/", 2),
                };
                fmt_child(a, lvl, false, f)?;
                write!(f, " {sym} ")?;
                fmt_child(b, lvl, true, f)
            }
            Expr::PowInt(a, k) => {
                // the base is a unary; anything at binary level needs parens
                match a.as_ref() {
                    Expr::Neg(_) => write!(f, "{a}")?,
                    _ => fmt_child(a, 4, false, f)?,
                }
                if *k < 0 {
                    write!(f, "^-{}", -k)
                } else {
                    write!(f, "^{k}")
                }
            }
            Expr::PowReal(a, p) => write!(f, "pow({a}, {p})"),
            Expr::Call(func, a) => {
                let name = match func {
                    Func::Sin => "sin",
                    Func::Cos => "cos",
                    Func::Exp => "exp",
                    Func::Ln => "ln",
                    Func::Sqrt => "sqrt",
                };
                write!(f, "{name}({a})")
            }
        }
    }
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

/// Evaluation environment: chart coordinate values sharing a Taylor context,
/// with optional overrides for the radial symbols (used by radial profiles
/// that are functions of `r` or `r2` alone).
pub struct Env<'a> {
    pub vars: &'a [TaylorValue],
    pub r2_override: Option<&'a TaylorValue>,
    pub r_override: Option<&'a TaylorValue>,
}

impl<'a> Env<'a> {
    pub fn vars(vars: &'a [TaylorValue]) -> Env<'a> {
        Env {
            vars,
            r2_override: None,
            r_override: None,
        }
    }

    fn context(&self) -> Result<(usize, usize)> {
        if let Some(v) = self.vars.first() {
            return Ok((v.num_vars(), v.order()));
        }
        if let Some(v) = self.r2_override.or(self.r_override) {
            return Ok((v.num_vars(), v.order()));
        }
        Err(Error::InvalidInput("empty evaluation environment".into()))
    }

    fn r2(&self) -> Result<TaylorValue> {
        if let Some(v) = self.r2_override {
            return Ok(v.clone());
        }
        if let Some(rv) = self.r_override {
            return Ok(rv * rv);
        }
        if self.vars.is_empty() {
            return Err(Error::InvalidInput(
                "r2 needs chart variables or an override".into(),
            ));
        }
        let (m, k) = self.context()?;
        let mut acc = TaylorValue::zero(m, k);
        for v in self.vars {
            acc = &acc + &(v * v);
        }
        Ok(acc)
    }

    fn r(&self) -> Result<TaylorValue> {
        if let Some(v) = self.r_override {
            return Ok(v.clone());
        }
        let r2 = self.r2()?;
        if r2.order() >= 1 && r2.value() == 0.0 {
            return Err(Error::DomainError(
                "r is not differentiable at the origin".into(),
            ));
        }
        r2.sqrt()
    }
}

/// Evaluate an expression over a Taylor context.
pub fn eval(e: &Expr, env: &Env<'_>) -> Result<TaylorValue> {
    let (m, k) = env.context()?;
    match e {
        Expr::Num(v) => Ok(TaylorValue::constant(m, k, *v)),
        Expr::Pi => Ok(TaylorValue::constant(m, k, std::f64::consts::PI)),
        Expr::Var(i) => env
            .vars
            .get(*i)
            .cloned()
            .ok_or_else(|| Error::DimensionMismatch(format!("variable y{}", i + 1))),
        Expr::R => env.r(),
        Expr::R2 => env.r2(),
        Expr::Neg(a) => Ok(-&eval(a, env)?),
        Expr::Bin(op, a, b) => {
            let va = eval(a, env)?;
            let vb = eval(b, env)?;
            match op {
                BinOp::Add => Ok(&va + &vb),
                BinOp::Sub => Ok(&va - &vb),
                BinOp::Mul => Ok(&va * &vb),
                BinOp::Div => va.try_div(&vb),
            }
        }
        Expr::PowInt(a, kk) => eval(a, env)?.powi(*kk),
        Expr::PowReal(a, p) => eval(a, env)?.powf(*p),
        Expr::Call(func, a) => {
            let v = eval(a, env)?;
            match func {
                Func::Sin => Ok(v.sin()),
                Func::Cos => Ok(v.cos()),
                Func::Exp => Ok(v.exp()),
                Func::Ln => v.ln(),
                Func::Sqrt => v.sqrt(),
            }
        }
    }
}

/// Taylor expansion of `e` at `center` to the given order; the constant
/// coefficient is the plain value.
pub fn eval_taylor(e: &Expr, center: &[f64], order: usize) -> Result<TaylorValue> {
    let n = center.len();
    let coords: Vec<TaylorValue> = (0..n)
        .map(|i| {
            let mut lin = vec![0.0; n];
            if order >= 1 {
                lin[i] = 1.0;
            }
            TaylorValue::affine(n, order, center[i], &lin)
        })
        .collect();
    eval(e, &Env::vars(&coords))
}

/// Plain numeric evaluation.
pub fn eval_plain(e: &Expr, point: &[f64]) -> Result<f64> {
    Ok(eval_taylor(e, point, 0)?.value())
}

// ---------------------------------------------------------------------------
// field and diffeomorphism specs
// ---------------------------------------------------------------------------

/// A vector field on a chart: `n` component expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldSpec {
    pub n: usize,
    pub components: Vec<Expr>,
}

impl VectorFieldSpec {
    pub fn new(n: usize, components: Vec<Expr>) -> Result<VectorFieldSpec> {
        if components.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "expected {n} components, got {}",
                components.len()
            )));
        }
        for c in &components {
            if let Some(i) = c.max_var() {
                if i >= n {
                    return Err(Error::DimensionMismatch(format!(
                        "component uses y{} but the chart dimension is {n}",
                        i + 1
                    )));
                }
            }
        }
        Ok(VectorFieldSpec { n, components })
    }

    pub fn parse(src: &str, n: usize) -> Result<VectorFieldSpec> {
        VectorFieldSpec::new(n, parse_components(src, n)?)
    }
}

/// A local diffeomorphism given by component expressions; the Jacobian is
/// checked where it is used.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffeoSpec {
    pub n: usize,
    pub components: Vec<Expr>,
}

impl DiffeoSpec {
    pub fn new(n: usize, components: Vec<Expr>) -> Result<DiffeoSpec> {
        if components.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "expected {n} components, got {}",
                components.len()
            )));
        }
        Ok(DiffeoSpec { n, components })
    }

    pub fn parse(src: &str, n: usize) -> Result<DiffeoSpec> {
        DiffeoSpec::new(n, parse_components(src, n)?)
    }

    pub fn identity(n: usize) -> DiffeoSpec {
        DiffeoSpec {
            n,
            components: (0..n).map(Expr::var).collect(),
        }
    }

    pub fn eval_point(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.components
            .iter()
            .map(|c| eval_plain(c, p))
            .collect()
    }
}
