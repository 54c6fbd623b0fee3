//! Recursive descent parser for the formula language.
//!
//! ```text
//! phi  ::= term | "!" phi | phi "&&" phi | phi "||" phi | phi "->" phi
//!        | "F[" t "," t "](" phi ")" | "G[" t "," t "](" phi ")" | phi "U[" t "," t "]" phi
//!        | "(" phi ")" | "true" | "false"
//! term ::= expr cmp expr          cmp ::= "<" | "<=" | ">" | ">="
//! expr ::= expr ("+" | "-") expr | expr "*" expr | "-" expr | "abs(" expr ")"
//!        | number | signal | parameter | "(" expr ")"
//! t    ::= number | parameter | "-" t
//! ```
//!
//! Binding, loosest first: `->` (right associative), `||`, `&&`, `U`, then
//! the prefix operators `!`, `F`, `G`.

use super::ast::{Bound, Expr, Formula, Interval, Node, ParamDecl, ParameterizedFormula};
use super::FormulaError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    LBracket,
    RBracket,
    LParen,
    RParen,
    Comma,
    Bang,
    AndAnd,
    OrOr,
    Arrow,
    Plus,
    Minus,
    Star,
    Lt,
    Le,
    Gt,
    Ge,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, FormulaError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let mut push = |tok, len: usize, i: &mut usize, col: &mut usize| {
            out.push(Token {
                tok,
                line: l0,
                column: c0,
            });
            *i += len;
            *col += len;
        };
        let next = chars.get(i + 1).copied();
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '[' => push(Tok::LBracket, 1, &mut i, &mut col),
            ']' => push(Tok::RBracket, 1, &mut i, &mut col),
            '(' => push(Tok::LParen, 1, &mut i, &mut col),
            ')' => push(Tok::RParen, 1, &mut i, &mut col),
            ',' => push(Tok::Comma, 1, &mut i, &mut col),
            '+' => push(Tok::Plus, 1, &mut i, &mut col),
            '*' => push(Tok::Star, 1, &mut i, &mut col),
            '!' => push(Tok::Bang, 1, &mut i, &mut col),
            '-' if next == Some('>') => push(Tok::Arrow, 2, &mut i, &mut col),
            '-' => push(Tok::Minus, 1, &mut i, &mut col),
            '&' if next == Some('&') => push(Tok::AndAnd, 2, &mut i, &mut col),
            '|' if next == Some('|') => push(Tok::OrOr, 2, &mut i, &mut col),
            '<' if next == Some('=') => push(Tok::Le, 2, &mut i, &mut col),
            '<' => push(Tok::Lt, 1, &mut i, &mut col),
            '>' if next == Some('=') => push(Tok::Ge, 2, &mut i, &mut col),
            '>' => push(Tok::Gt, 1, &mut i, &mut col),
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                    j += 1;
                }
                if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                    let mut k = j + 1;
                    if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].is_ascii_digit() {
                        while k < chars.len() && chars[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let s: String = chars[start..j].iter().collect();
                let v: f64 = s.parse().map_err(|_| FormulaError::Syntax {
                    line: l0,
                    column: c0,
                    message: format!("invalid number {s:?}"),
                })?;
                push(Tok::Num(v), j - start, &mut i, &mut col);
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                let mut j = i;
                while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                let s: String = chars[start..j].iter().collect();
                push(Tok::Ident(s), j - start, &mut i, &mut col);
            }
            other => {
                return Err(FormulaError::Syntax {
                    line,
                    column: col,
                    message: format!("unexpected character {other:?}"),
                })
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

#[derive(Default, Clone, Copy)]
struct Roles {
    used: bool,
    lower: bool,
    upper: bool,
}

struct Parser<'a, T> {
    toks: Vec<Token>,
    pos: usize,
    signature: &'a [String],
    params: &'a [ParamDecl<T>],
    roles: Vec<Roles>,
}

type PResult<T> = Result<T, (usize, FormulaError)>;

impl<'a, T: Scalar> Parser<'a, T> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn fail<R>(&self, message: impl Into<String>) -> PResult<R> {
        let t = &self.toks[self.pos];
        Err((
            self.pos,
            FormulaError::Syntax {
                line: t.line,
                column: t.column,
                message: message.into(),
            },
        ))
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<()> {
        if *self.peek() == tok {
            self.pos += 1;
            Ok(())
        } else {
            self.fail(format!("expected {what}, found {}", describe(self.peek())))
        }
    }

    fn implies(&mut self) -> PResult<Node<T>> {
        let lhs = self.or()?;
        if *self.peek() == Tok::Arrow {
            self.pos += 1;
            let rhs = self.implies()?;
            return Ok(Node::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> PResult<Node<T>> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::OrOr {
            self.pos += 1;
            let rhs = self.and()?;
            lhs = Node::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> PResult<Node<T>> {
        let mut lhs = self.until()?;
        while *self.peek() == Tok::AndAnd {
            self.pos += 1;
            let rhs = self.until()?;
            lhs = Node::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn is_temporal(&self, name: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == name) && *self.peek_at(1) == Tok::LBracket
    }

    fn until(&mut self) -> PResult<Node<T>> {
        let mut lhs = self.unary()?;
        while self.is_temporal("U") {
            self.pos += 1;
            let interval = self.interval()?;
            let rhs = self.unary()?;
            lhs = Node::until(interval, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Node<T>> {
        if *self.peek() == Tok::Bang {
            self.pos += 1;
            return Ok(Node::not(self.unary()?));
        }
        for (name, globally) in [("F", false), ("G", true)] {
            if self.is_temporal(name) {
                self.pos += 1;
                let interval = self.interval()?;
                self.expect(Tok::LParen, "'(' after interval")?;
                let body = self.implies()?;
                self.expect(Tok::RParen, "')'")?;
                return Ok(if globally {
                    Node::globally(interval, body)
                } else {
                    Node::finally(interval, body)
                });
            }
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Node<T>> {
        match self.peek() {
            Tok::Ident(s) if s == "true" => {
                self.pos += 1;
                return Ok(Node::tt());
            }
            Tok::Ident(s) if s == "false" => {
                self.pos += 1;
                return Ok(Node::ff());
            }
            _ => {}
        }
        let start = self.pos;
        let roles = self.roles.clone();
        let term_err = match self.term() {
            Ok(node) => return Ok(node),
            Err(e) => e,
        };
        // a leading '(' may open a parenthesized formula instead of an expression
        if self.toks[start].tok != Tok::LParen {
            return Err(term_err);
        }
        self.pos = start + 1;
        self.roles = roles;
        let inner = self.implies().and_then(|node| {
            self.expect(Tok::RParen, "')'")?;
            Ok(node)
        });
        inner.map_err(|e| if e.0 >= term_err.0 { e } else { term_err })
    }

    fn term(&mut self) -> PResult<Node<T>> {
        let lhs = self.expr()?;
        let cmp = self.peek().clone();
        if !matches!(cmp, Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge) {
            return self.fail(format!("expected comparison, found {}", describe(&cmp)));
        }
        self.pos += 1;
        let rhs = self.expr()?;
        // normalize to `f > 0`; non-strict comparisons are treated as strict
        let f = match cmp {
            Tok::Gt | Tok::Ge => difference(lhs, rhs),
            _ => difference(rhs, lhs),
        };
        Ok(Node::atom(f))
    }

    fn expr(&mut self) -> PResult<Expr<T>> {
        let mut lhs = self.product()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.product()?));
                }
                Tok::Minus => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.product()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn product(&mut self) -> PResult<Expr<T>> {
        let mut lhs = self.factor()?;
        while *self.peek() == Tok::Star {
            self.pos += 1;
            lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> PResult<Expr<T>> {
        match self.peek().clone() {
            Tok::Minus => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.factor()?)))
            }
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::Const(T::lit(v)))
            }
            Tok::LParen => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) if name == "abs" && *self.peek_at(1) == Tok::LParen => {
                self.pos += 2;
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(Expr::Abs(Box::new(e)))
            }
            Tok::Ident(name) => {
                if let Some(i) = self.signature.iter().position(|s| *s == name) {
                    self.pos += 1;
                    Ok(Expr::Signal(i))
                } else if let Some(i) = self.params.iter().position(|p| p.name == name) {
                    self.pos += 1;
                    self.roles[i].used = true;
                    Ok(Expr::Param(i))
                } else {
                    let t = &self.toks[self.pos];
                    Err((
                        self.pos,
                        FormulaError::UndeclaredSignal {
                            name,
                            line: t.line,
                            column: t.column,
                        },
                    ))
                }
            }
            other => self.fail(format!("expected expression, found {}", describe(&other))),
        }
    }

    fn interval(&mut self) -> PResult<Interval<T>> {
        self.expect(Tok::LBracket, "'['")?;
        let lo = self.bound(true)?;
        self.expect(Tok::Comma, "','")?;
        let hi = self.bound(false)?;
        self.expect(Tok::RBracket, "']'")?;
        if let (Bound::Param { index: a, .. }, Bound::Param { index: b, .. }) = (lo, hi) {
            if a == b {
                return Err((self.pos, FormulaError::AmbiguousBound(self.params[a].name.clone())));
            }
        }
        Ok(Interval { lo, hi })
    }

    fn bound(&mut self, lower: bool) -> PResult<Bound<T>> {
        let mut negated = false;
        while *self.peek() == Tok::Minus {
            self.pos += 1;
            negated = !negated;
        }
        match self.peek().clone() {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Bound::Lit(T::lit(if negated { -v } else { v })))
            }
            Tok::Ident(name) if name == "inf" => {
                self.pos += 1;
                let v = T::infinity();
                Ok(Bound::Lit(if negated { -v } else { v }))
            }
            Tok::Ident(name) => match self.params.iter().position(|p| p.name == name) {
                Some(index) => {
                    self.pos += 1;
                    let r = &mut self.roles[index];
                    r.used = true;
                    if lower {
                        r.lower = true;
                    } else {
                        r.upper = true;
                    }
                    Ok(Bound::Param { index, negated })
                }
                None => self.fail(format!("interval bound {name:?} is not a declared parameter")),
            },
            other => self.fail(format!("expected interval bound, found {}", describe(&other))),
        }
    }
}

fn difference<T: Scalar>(lhs: Expr<T>, rhs: Expr<T>) -> Expr<T> {
    match rhs {
        Expr::Const(c) if c == T::zero() => lhs,
        rhs => Expr::Sub(Box::new(lhs), Box::new(rhs)),
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("{s:?}"),
        Tok::Eof => "end of input".into(),
        other => format!("{other:?}"),
    }
}

/// Parses `text` against the declared signal names and parameters.
///
/// Only declared parameters may appear; each must be used. A parameter may
/// not serve as both a lower and an upper interval bound.
pub fn parse_formula<T: Scalar>(
    text: &str,
    signature: &[impl AsRef<str>],
    params: &[ParamDecl<T>],
) -> Result<ParameterizedFormula<T>, FormulaError> {
    let signature: Vec<String> = signature.iter().map(|s| s.as_ref().to_owned()).collect();
    let mut seen: Vec<&str> = Vec::new();
    for name in signature
        .iter()
        .map(String::as_str)
        .chain(params.iter().map(|p| p.name.as_str()))
    {
        if seen.contains(&name) || is_reserved(name) {
            return Err(FormulaError::DuplicateName(name.to_owned()));
        }
        seen.push(name);
    }
    for p in params {
        if !(p.lo <= p.hi) || !p.lo.is_finite() || !p.hi.is_finite() {
            return Err(FormulaError::InvalidBracket {
                name: p.name.clone(),
                lo: p.lo.to_string(),
                hi: p.hi.to_string(),
            });
        }
    }

    let toks = lex(text)?;
    let mut parser = Parser {
        toks,
        pos: 0,
        signature: &signature,
        params,
        roles: vec![Roles::default(); params.len()],
    };
    let root = parser.implies().map_err(|(_, e)| e)?;
    if *parser.peek() != Tok::Eof {
        let e = parser
            .fail::<()>(format!("unexpected {}", describe(parser.peek())))
            .unwrap_err();
        return Err(e.1);
    }
    for (p, r) in params.iter().zip(&parser.roles) {
        if r.lower && r.upper {
            return Err(FormulaError::AmbiguousBound(p.name.clone()));
        }
        if !r.used {
            return Err(FormulaError::UnusedParameter(p.name.clone()));
        }
    }
    Ok(ParameterizedFormula {
        formula: Formula::new(root, signature),
        params: params.to_vec(),
    })
}

fn is_reserved(name: &str) -> bool {
    matches!(name, "abs" | "true" | "false" | "inf")
}
