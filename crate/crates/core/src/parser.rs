//! Concrete syntax for `.sexp` shape-expression files.
//!
//! ```text
//! shape A = lin(a1, b1, d1);
//! shape B = exp(a2, b2, c2, d2);
//! expr = (A . B)* . A | A;
//! constraint = a1 == 0 && b1 in (4, 10) && d1 in (6, 10) && b2 == a1*d1 + b1;
//! epsilon = 1e-3;   # optional
//! ```
//!
//! Regex precedence: `*`/`+` > `.` > `|`. Constraint precedence:
//! `^` > unary `-` > `*` > `+`/`-` > comparisons > `&&` > `||`.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::ast::{
    ArithExpr, AtomicShapeDecl, CmpOp, Constraint, Regex, ShapeExpr, ShapeKind,
};
use crate::param_space::bind_parameters;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("{line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("undeclared atom `{0}`")]
    UndeclaredAtom(String),
    #[error("shape `{0}` declared twice")]
    DuplicateShape(String),
    #[error("duplicate parameter `{param}` in shape `{shape}`")]
    DuplicateParameter { shape: String, param: String },
    #[error("shape `{shape}`: {kind} takes {expected} parameters, got {got}")]
    WrongArity {
        shape: String,
        kind: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("nullable star argument in `{0}`")]
    NullableStar(String),
    #[error("unknown parameter `{0}` in constraint")]
    UnknownParameter(String),
    #[error("unbounded parameter `{0}`: add an `in (lo, hi)` clause or pin it")]
    UnboundedParameter(String),
    #[error("missing `{0}` statement")]
    Missing(&'static str),
    #[error("`{0}` given twice")]
    Repeated(&'static str),
    #[error("invalid epsilon {0}; must be > 0")]
    InvalidEpsilon(f64),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOLS: [&str; 19] = [
    "&&", "||", "<=", ">=", "==", "<", ">", "=", ";", "(", ")", ",", ".", "|", "*", "+", "-",
    "^", "!",
];

fn lex(text: &str) -> Result<Vec<Token>, SpecError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, message: String| SpecError::Syntax { line, col, message };
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: start_line,
                col: start_col,
            });
            continue;
        }
        // A '.' starts a number only when a digit follows; otherwise it is concatenation.
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            let value: f64 = s
                .parse()
                .map_err(|_| err(start_line, start_col, format!("malformed number `{s}`")))?;
            out.push(Token {
                tok: Tok::Num(value),
                line: start_line,
                col: start_col,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        let Some(sym) = SYMBOLS.iter().find(|s| rest.starts_with(**s)) else {
            return Err(err(line, col, format!("unexpected character `{c}`")));
        };
        i += sym.len();
        col += sym.len();
        out.push(Token {
            tok: Tok::Sym(sym),
            line: start_line,
            col: start_col,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

const RESERVED: [&str; 8] = ["shape", "expr", "constraint", "epsilon", "eps", "in", "true", "exp"];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, SpecError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let idx = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[idx].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        let t = &self.toks[self.pos];
        Err(SpecError::Syntax {
            line: t.line,
            col: t.col,
            message: message.into(),
        })
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Num(x) => format!("number {x}"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.error(format!("expected `{s}`, found {}", self.describe()))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            _ => self.error(format!("expected identifier, found {}", self.describe())),
        }
    }

    fn signed_number(&mut self) -> PResult<f64> {
        let negative = self.eat_sym("-");
        match self.bump() {
            Tok::Num(x) => Ok(if negative { -x } else { x }),
            _ => {
                self.pos -= 1;
                self.error(format!("expected number, found {}", self.describe()))
            }
        }
    }

    // ---- regex ----

    fn regex(&mut self) -> PResult<Regex> {
        let mut left = self.regex_concat()?;
        while self.eat_sym("|") {
            let right = self.regex_concat()?;
            left = Regex::union(left, right);
        }
        Ok(left)
    }

    fn regex_concat(&mut self) -> PResult<Regex> {
        let mut left = self.regex_postfix()?;
        while self.eat_sym(".") {
            let right = self.regex_postfix()?;
            left = Regex::concat(left, right);
        }
        Ok(left)
    }

    fn regex_postfix(&mut self) -> PResult<Regex> {
        let mut inner = self.regex_primary()?;
        loop {
            if self.eat_sym("*") {
                inner = Regex::star(inner);
            } else if self.eat_sym("+") {
                inner = Regex::plus(inner);
            } else {
                return Ok(inner);
            }
        }
    }

    fn regex_primary(&mut self) -> PResult<Regex> {
        if self.eat_sym("(") {
            let r = self.regex()?;
            self.expect_sym(")")?;
            return Ok(r);
        }
        if self.is_keyword("eps") {
            self.bump();
            return Ok(Regex::Epsilon);
        }
        Ok(Regex::Atom(self.ident()?))
    }

    // ---- constraints ----

    fn constraint(&mut self) -> PResult<Constraint> {
        let mut left = self.conjunction()?;
        while self.eat_sym("||") {
            let right = self.conjunction()?;
            left = Constraint::or(left, right);
        }
        Ok(left)
    }

    fn conjunction(&mut self) -> PResult<Constraint> {
        let mut left = self.clause()?;
        while self.eat_sym("&&") {
            let right = self.clause()?;
            left = Constraint::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn clause(&mut self) -> PResult<Constraint> {
        if self.is_keyword("true") {
            self.bump();
            return Ok(Constraint::True);
        }
        // `(` may open a parenthesised constraint or an arithmetic operand.
        // Try the constraint reading first and fall back if what follows the
        // closing parenthesis shows it was arithmetic.
        if self.is_sym("(") {
            let save = self.pos;
            self.bump();
            if let Ok(c) = self.constraint() {
                if self.eat_sym(")") && !self.continues_arith_or_cmp() {
                    return Ok(c);
                }
            }
            self.pos = save;
        }
        if let (Tok::Ident(p), Tok::Ident(kw)) = (self.peek().clone(), self.peek_at(1).clone()) {
            if kw == "in" && !RESERVED.contains(&p.as_str()) {
                self.bump();
                self.bump();
                self.expect_sym("(")?;
                let lo = self.signed_number()?;
                self.expect_sym(",")?;
                let hi = self.signed_number()?;
                self.expect_sym(")")?;
                return Ok(Constraint::In { param: p, lo, hi });
            }
        }
        let lhs = self.arith()?;
        let op = match self.peek() {
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym(">") => CmpOp::Gt,
            Tok::Sym(">=") => CmpOp::Ge,
            Tok::Sym("==") => CmpOp::Eq,
            _ => return self.error(format!("expected comparison, found {}", self.describe())),
        };
        self.bump();
        let rhs = self.arith()?;
        Ok(Constraint::Cmp { op, lhs, rhs })
    }

    fn continues_arith_or_cmp(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Sym("<" | "<=" | ">" | ">=" | "==" | "+" | "-" | "*" | "^")
        )
    }

    fn arith(&mut self) -> PResult<ArithExpr> {
        let mut left = self.term()?;
        loop {
            if self.eat_sym("+") {
                left = ArithExpr::add(left, self.term()?);
            } else if self.eat_sym("-") {
                left = ArithExpr::sub(left, self.term()?);
            } else {
                return Ok(left);
            }
        }
    }

    fn term(&mut self) -> PResult<ArithExpr> {
        let mut left = self.unary()?;
        while self.eat_sym("*") {
            left = ArithExpr::mul(left, self.unary()?);
        }
        Ok(left)
    }

    fn unary(&mut self) -> PResult<ArithExpr> {
        if self.is_sym("-") {
            // `-3` is a literal unless an exponent follows.
            if let Tok::Num(x) = *self.peek_at(1) {
                if !matches!(self.peek_at(2), Tok::Sym("^")) {
                    self.bump();
                    self.bump();
                    return Ok(ArithExpr::Num(-x));
                }
            }
            self.bump();
            return Ok(ArithExpr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> PResult<ArithExpr> {
        let mut base = self.primary()?;
        while self.eat_sym("^") {
            let paren = self.eat_sym("(");
            let negative = self.eat_sym("-");
            let k = match self.bump() {
                Tok::Num(x) if x.fract() == 0.0 && x.abs() <= i32::MAX as f64 => x as i32,
                _ => {
                    self.pos -= 1;
                    return self.error("exponent must be an integer literal");
                }
            };
            if paren {
                self.expect_sym(")")?;
            }
            base = ArithExpr::pow(base, if negative { -k } else { k });
        }
        Ok(base)
    }

    fn primary(&mut self) -> PResult<ArithExpr> {
        match self.peek().clone() {
            Tok::Num(x) => {
                self.bump();
                Ok(ArithExpr::Num(x))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.arith()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(s) if s == "exp" => {
                self.bump();
                self.expect_sym("(")?;
                let e = self.arith()?;
                self.expect_sym(")")?;
                Ok(ArithExpr::exp(e))
            }
            Tok::Ident(_) => Ok(ArithExpr::Param(self.ident()?)),
            _ => self.error(format!("expected expression, found {}", self.describe())),
        }
    }

    // ---- statements ----

    fn shape_decl(&mut self) -> PResult<AtomicShapeDecl> {
        self.bump(); // `shape`
        let name = self.ident()?;
        self.expect_sym("=")?;
        let kind = match self.peek().clone() {
            Tok::Ident(k) => match ShapeKind::from_keyword(&k) {
                Some(kind) => {
                    self.bump();
                    kind
                }
                None => return self.error(format!("unknown shape kind `{k}`; use lin, exp or sin")),
            },
            _ => return self.error(format!("expected shape kind, found {}", self.describe())),
        };
        self.expect_sym("(")?;
        let mut params = vec![self.ident()?];
        while self.eat_sym(",") {
            params.push(self.ident()?);
        }
        self.expect_sym(")")?;
        self.expect_sym(";")?;
        Ok(AtomicShapeDecl { name, kind, params })
    }
}

/// Parses and validates a shape-expression file.
pub fn parse_spec(text: &str) -> Result<ShapeExpr, SpecError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let mut decls: Vec<AtomicShapeDecl> = Vec::new();
    let mut regex = None;
    let mut constraint = None;
    let mut epsilon = None;
    while *p.peek() != Tok::Eof {
        match p.peek().clone() {
            Tok::Ident(kw) if kw == "shape" => decls.push(p.shape_decl()?),
            Tok::Ident(kw) if kw == "expr" => {
                if regex.is_some() {
                    return Err(SpecError::Repeated("expr"));
                }
                p.bump();
                p.expect_sym("=")?;
                regex = Some(p.regex()?);
                p.expect_sym(";")?;
            }
            Tok::Ident(kw) if kw == "constraint" => {
                if constraint.is_some() {
                    return Err(SpecError::Repeated("constraint"));
                }
                p.bump();
                p.expect_sym("=")?;
                constraint = Some(p.constraint()?);
                p.expect_sym(";")?;
            }
            Tok::Ident(kw) if kw == "epsilon" => {
                if epsilon.is_some() {
                    return Err(SpecError::Repeated("epsilon"));
                }
                p.bump();
                p.expect_sym("=")?;
                epsilon = Some(p.signed_number()?);
                p.expect_sym(";")?;
            }
            _ => {
                return p.error(format!(
                    "expected `shape`, `expr`, `constraint` or `epsilon`, found {}",
                    p.describe()
                ))
            }
        }
    }
    let expr = ShapeExpr {
        decls,
        regex: regex.ok_or(SpecError::Missing("expr"))?,
        constraint: constraint.unwrap_or(Constraint::True),
        epsilon,
    };
    validate(&expr)?;
    Ok(expr)
}

/// Checks the static invariants of a shape expression.
pub fn validate(e: &ShapeExpr) -> Result<(), SpecError> {
    let mut names = BTreeSet::new();
    for d in &e.decls {
        if !names.insert(d.name.as_str()) {
            return Err(SpecError::DuplicateShape(d.name.clone()));
        }
        if d.params.len() != d.kind.arity() {
            return Err(SpecError::WrongArity {
                shape: d.name.clone(),
                kind: d.kind.keyword(),
                expected: d.kind.arity(),
                got: d.params.len(),
            });
        }
        let mut seen = BTreeSet::new();
        for param in &d.params {
            if !seen.insert(param) {
                return Err(SpecError::DuplicateParameter {
                    shape: d.name.clone(),
                    param: param.clone(),
                });
            }
        }
    }
    for atom in e.regex.alphabet() {
        if !names.contains(atom.as_str()) {
            return Err(SpecError::UndeclaredAtom(atom));
        }
    }
    if let Some(star) = e.regex.find_nullable_star() {
        return Err(SpecError::NullableStar(star.to_string()));
    }
    if let Some(eps) = e.epsilon {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(SpecError::InvalidEpsilon(eps));
        }
    }
    let params = e.parameters();
    let declared: BTreeSet<&str> = params.iter().map(String::as_str).collect();
    let mut used = BTreeSet::new();
    e.constraint.collect_params(&mut used);
    if let Some(unknown) = used.iter().find(|p| !declared.contains(p.as_str())) {
        return Err(SpecError::UnknownParameter(unknown.clone()));
    }
    for (name, binding) in bind_parameters(&e.constraint, &params) {
        if binding.is_none() {
            return Err(SpecError::UnboundedParameter(name));
        }
    }
    Ok(())
}
