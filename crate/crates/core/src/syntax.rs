//! Shared lexer and formula grammar for policies, queries and raw systems.
//!
//! Formula syntax, loosest binding first:
//!
//! ```text
//! f ::= forall v. f | exists v. f
//!     | g -> f                      (right associative)
//!     | g <-> g
//! g ::= g '|' h | h
//! h ::= h '&' u | u
//! u ::= '~' u | K_<agent> u | AX u | AF u | AG u | EX u | EF u | EG u
//!     | A(f U f) | E(f U f) | A(f R f) | E(f R f)
//!     | true | false | atom | '(' f ')'
//! atom ::= name | name '(' arg, ... ')' | name '[' agent ']' '(' atom ')'
//! ```
//!
//! `true false forall exists A E U R AX AF AG EX EF EG` and identifiers
//! starting with `K_` are reserved.

use crate::error::SyntaxError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Number(u64),
    LParen,
    RParen,
    LBrack,
    RBrack,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Dot,
    Amp,
    Pipe,
    Tilde,
    Arrow,
    LArrow,
    Iff,
    Plus,
    Minus,
    Slash,
    Eq,
    Eof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub fn lex(src: &str, line: usize, col0: usize) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = col0 + i;
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let (tok, len) = if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_' || chars[j] == '\'') {
                j += 1;
            }
            (Tok::Ident(chars[start..j].iter().collect()), j - start)
        } else if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let text: String = chars[i..j].iter().collect();
            let n = text
                .parse()
                .map_err(|_| SyntaxError::new(line, col, "number out of range"))?;
            (Tok::Number(n), j - i)
        } else {
            let next = chars.get(i + 1).copied();
            let next2 = chars.get(i + 2).copied();
            match c {
                '(' => (Tok::LParen, 1),
                ')' => (Tok::RParen, 1),
                '[' => (Tok::LBrack, 1),
                ']' => (Tok::RBrack, 1),
                '{' => (Tok::LBrace, 1),
                '}' => (Tok::RBrace, 1),
                ',' => (Tok::Comma, 1),
                ':' => (Tok::Colon, 1),
                '.' => (Tok::Dot, 1),
                '&' => (Tok::Amp, 1),
                '|' => (Tok::Pipe, 1),
                '~' => (Tok::Tilde, 1),
                '+' => (Tok::Plus, 1),
                '/' => (Tok::Slash, 1),
                '=' => (Tok::Eq, 1),
                '-' if next == Some('>') => (Tok::Arrow, 2),
                '-' => (Tok::Minus, 1),
                '<' if next == Some('-') && next2 == Some('>') => (Tok::Iff, 3),
                '<' if next == Some('-') => (Tok::LArrow, 2),
                other => return Err(SyntaxError::new(line, col, format!("unexpected character '{other}'"))),
            }
        };
        out.push(Token { tok, line, col });
        i += len;
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col: col0 + chars.len(),
    });
    Ok(out)
}

/// Cursor over a token list.
pub struct Cursor {
    toks: Vec<Token>,
    pos: usize,
}

impl Cursor {
    pub fn new(toks: Vec<Token>) -> Self {
        Cursor { toks, pos: 0 }
    }

    pub fn from_str(src: &str, line: usize) -> Result<Self, SyntaxError> {
        Ok(Cursor::new(lex(src, line, 1)?))
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    pub fn here(&self) -> &Token {
        &self.toks[self.pos]
    }

    pub fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn error(&self, msg: impl Into<String>) -> SyntaxError {
        let t = self.here();
        SyntaxError::new(t.line, t.col, msg)
    }

    pub fn expect(&mut self, t: &Tok, what: &str) -> Result<(), SyntaxError> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.error(format!("expected {what}, found {}", describe(self.peek()))))
        }
    }

    pub fn ident(&mut self, what: &str) -> Result<String, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => Err(self.error(format!("expected {what}, found {}", describe(&other)))),
        }
    }

    pub fn at_end(&self) -> bool {
        *self.peek() == Tok::Eof
    }

    pub fn expect_end(&self) -> Result<(), SyntaxError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.error(format!("unexpected {}", describe(self.peek()))))
        }
    }
}

pub fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("'{s}'"),
        Tok::Number(n) => format!("'{n}'"),
        Tok::Eof => "end of input".into(),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::LBrack => "'['".into(),
        Tok::RBrack => "']'".into(),
        Tok::LBrace => "'{'".into(),
        Tok::RBrace => "'}'".into(),
        Tok::Comma => "','".into(),
        Tok::Colon => "':'".into(),
        Tok::Dot => "'.'".into(),
        Tok::Amp => "'&'".into(),
        Tok::Pipe => "'|'".into(),
        Tok::Tilde => "'~'".into(),
        Tok::Arrow => "'->'".into(),
        Tok::LArrow => "'<-'".into(),
        Tok::Iff => "'<->'".into(),
        Tok::Plus => "'+'".into(),
        Tok::Minus => "'-'".into(),
        Tok::Slash => "'/'".into(),
        Tok::Eq => "'='".into(),
    }
}

const RESERVED: &[&str] = &[
    "true", "false", "forall", "exists", "A", "E", "U", "R", "AX", "AF", "AG", "EX", "EF", "EG",
];

pub fn is_reserved(name: &str) -> bool {
    RESERVED.contains(&name) || name.starts_with("K_")
}

/// An atom as written: `name`, `name(args)` or `name[agent](atom)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomSyntax {
    pub line: usize,
    pub col: usize,
    pub name: String,
    pub index: Option<String>,
    pub args: Vec<Arg>,
    pub has_parens: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arg {
    Name(String),
    Atom(AtomSyntax),
}

impl std::fmt::Display for AtomSyntax {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name)?;
        if let Some(ix) = &self.index {
            write!(f, "[{ix}]")?;
        }
        if self.has_parens {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                match a {
                    Arg::Name(n) => f.write_str(n)?,
                    Arg::Atom(at) => write!(f, "{at}")?,
                }
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Formula as written, before names are resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Surface {
    True,
    False,
    Atom(AtomSyntax),
    Not(Box<Surface>),
    And(Box<Surface>, Box<Surface>),
    Or(Box<Surface>, Box<Surface>),
    Implies(Box<Surface>, Box<Surface>),
    Iff(Box<Surface>, Box<Surface>),
    Forall(String, Box<Surface>),
    Exists(String, Box<Surface>),
    K(String, Box<Surface>),
    Unary(TemporalOp, Box<Surface>),
    Until(PathQ, Box<Surface>, Box<Surface>),
    Release(PathQ, Box<Surface>, Box<Surface>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemporalOp {
    AX,
    AF,
    AG,
    EX,
    EF,
    EG,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathQ {
    A,
    E,
}

impl Surface {
    pub fn is_propositional(&self) -> bool {
        match self {
            Surface::True | Surface::False | Surface::Atom(_) => true,
            Surface::Not(a) | Surface::Forall(_, a) | Surface::Exists(_, a) => a.is_propositional(),
            Surface::And(a, b) | Surface::Or(a, b) | Surface::Implies(a, b) | Surface::Iff(a, b) => {
                a.is_propositional() && b.is_propositional()
            }
            _ => false,
        }
    }
}

pub fn parse_formula(c: &mut Cursor) -> Result<Surface, SyntaxError> {
    if let Tok::Ident(kw) = c.peek().clone() {
        if kw == "forall" || kw == "exists" {
            c.bump();
            let v = c.ident("quantified variable")?;
            if is_reserved(&v) {
                return Err(c.error(format!("'{v}' is reserved")));
            }
            c.expect(&Tok::Dot, "'.' after quantified variable")?;
            let body = parse_formula(c)?;
            return Ok(if kw == "forall" {
                Surface::Forall(v, Box::new(body))
            } else {
                Surface::Exists(v, Box::new(body))
            });
        }
    }
    let lhs = parse_or(c)?;
    if c.eat(&Tok::Arrow) {
        let rhs = parse_formula(c)?;
        return Ok(Surface::Implies(Box::new(lhs), Box::new(rhs)));
    }
    if c.eat(&Tok::Iff) {
        let rhs = parse_or(c)?;
        return Ok(Surface::Iff(Box::new(lhs), Box::new(rhs)));
    }
    Ok(lhs)
}

fn parse_or(c: &mut Cursor) -> Result<Surface, SyntaxError> {
    let mut lhs = parse_and(c)?;
    while c.eat(&Tok::Pipe) {
        let rhs = parse_and(c)?;
        lhs = Surface::Or(Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn parse_and(c: &mut Cursor) -> Result<Surface, SyntaxError> {
    let mut lhs = parse_unary(c)?;
    while c.eat(&Tok::Amp) {
        let rhs = parse_unary(c)?;
        lhs = Surface::And(Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn parse_unary(c: &mut Cursor) -> Result<Surface, SyntaxError> {
    match c.peek().clone() {
        Tok::Tilde => {
            c.bump();
            Ok(Surface::Not(Box::new(parse_unary(c)?)))
        }
        Tok::LParen => {
            c.bump();
            let f = parse_formula(c)?;
            c.expect(&Tok::RParen, "')'")?;
            Ok(f)
        }
        Tok::Ident(name) => {
            let op = match name.as_str() {
                "AX" => Some(TemporalOp::AX),
                "AF" => Some(TemporalOp::AF),
                "AG" => Some(TemporalOp::AG),
                "EX" => Some(TemporalOp::EX),
                "EF" => Some(TemporalOp::EF),
                "EG" => Some(TemporalOp::EG),
                _ => None,
            };
            if let Some(op) = op {
                c.bump();
                return Ok(Surface::Unary(op, Box::new(parse_unary(c)?)));
            }
            if let Some(agent) = name.strip_prefix("K_") {
                if agent.is_empty() {
                    return Err(c.error("missing agent after 'K_'"));
                }
                c.bump();
                return Ok(Surface::K(agent.to_string(), Box::new(parse_unary(c)?)));
            }
            match name.as_str() {
                "true" => {
                    c.bump();
                    Ok(Surface::True)
                }
                "false" => {
                    c.bump();
                    Ok(Surface::False)
                }
                "A" | "E" => {
                    c.bump();
                    let q = if name == "A" { PathQ::A } else { PathQ::E };
                    c.expect(&Tok::LParen, "'(' after path quantifier")?;
                    let lhs = parse_formula(c)?;
                    let kind = c.ident("'U' or 'R'")?;
                    let rhs = parse_formula(c)?;
                    c.expect(&Tok::RParen, "')'")?;
                    match kind.as_str() {
                        "U" => Ok(Surface::Until(q, Box::new(lhs), Box::new(rhs))),
                        "R" => Ok(Surface::Release(q, Box::new(lhs), Box::new(rhs))),
                        _ => Err(c.error(format!("expected 'U' or 'R', found '{kind}'"))),
                    }
                }
                _ if is_reserved(&name) => Err(c.error(format!("unexpected keyword '{name}'"))),
                _ => Ok(Surface::Atom(parse_atom(c)?)),
            }
        }
        other => Err(c.error(format!("expected a formula, found {}", describe(&other)))),
    }
}

pub fn parse_atom(c: &mut Cursor) -> Result<AtomSyntax, SyntaxError> {
    let (line, col) = (c.here().line, c.here().col);
    let name = c.ident("atom")?;
    if is_reserved(&name) {
        return Err(c.error(format!("'{name}' is reserved")));
    }
    let mut index = None;
    if c.eat(&Tok::LBrack) {
        index = Some(c.ident("agent name")?);
        c.expect(&Tok::RBrack, "']'")?;
    }
    let mut args = Vec::new();
    let mut has_parens = false;
    if c.eat(&Tok::LParen) {
        has_parens = true;
        if !c.eat(&Tok::RParen) {
            loop {
                let is_nested = matches!(c.peek_at(1), Tok::LParen | Tok::LBrack);
                if is_nested {
                    args.push(Arg::Atom(parse_atom(c)?));
                } else {
                    args.push(Arg::Name(c.ident("argument")?));
                }
                if c.eat(&Tok::Comma) {
                    continue;
                }
                c.expect(&Tok::RParen, "',' or ')'")?;
                break;
            }
        }
    }
    Ok(AtomSyntax {
        line,
        col,
        name,
        index,
        args,
        has_parens,
    })
}
