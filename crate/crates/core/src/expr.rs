//! Parsing of tensor statements and symmetry declarations.
//!
//! Statements are sums of products of tensor accesses with implicit
//! summation over every variable that does not index the output:
//!
//! ```text
//! stmt    := access '=' product ('+' product)*
//! product := access ('*' access)*
//! access  := NAME '[' var (',' var)* ']'
//! ```
//!
//! Symmetry declarations list the parts of each symmetric input, e.g.
//! `A: {i,j}{k}; B: {j,k}`. Undeclared dimensions are singletons and
//! undeclared tensors are non-symmetric.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Span};
use crate::symmetry::{IndexVar, TensorSignature};

#[derive(Debug, Clone)]
pub struct Access {
    pub tensor: String,
    pub vars: Vec<IndexVar>,
    pub span: Span,
}

impl Access {
    pub fn new(tensor: impl Into<String>, vars: Vec<IndexVar>) -> Self {
        Access {
            tensor: tensor.into(),
            vars,
            span: Span { line: 0, column: 0 },
        }
    }
}

// Spans are diagnostics only.
impl PartialEq for Access {
    fn eq(&self, other: &Self) -> bool {
        self.tensor == other.tensor && self.vars == other.vars
    }
}

impl Eq for Access {}

impl fmt::Display for Access {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[", self.tensor)?;
        for (n, v) in self.vars.iter().enumerate() {
            if n > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str("]")
    }
}

/// One product of accesses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub factors: Vec<Access>,
}

impl Term {
    /// Variables of this term in first-appearance order.
    pub fn vars(&self) -> Vec<IndexVar> {
        let mut out = Vec::new();
        for a in &self.factors {
            push_new(&mut out, &a.vars);
        }
        out
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, a) in self.factors.iter().enumerate() {
            if n > 0 {
                f.write_str(" * ")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorStatement {
    pub output: Access,
    pub terms: Vec<Term>,
}

impl TensorStatement {
    /// Every variable in first-appearance order; this is the iteration order.
    pub fn vars(&self) -> Vec<IndexVar> {
        let mut out = self.output.vars.clone();
        for t in &self.terms {
            push_new(&mut out, &t.vars());
        }
        out
    }

    pub fn input_accesses(&self) -> impl Iterator<Item = &Access> {
        self.terms.iter().flat_map(|t| t.factors.iter())
    }

    /// Names of the input tensors in statement order, without repeats.
    pub fn input_tensors(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for a in self.input_accesses() {
            if !out.contains(&a.tensor) {
                out.push(a.tensor.clone());
            }
        }
        out
    }

    /// The first access of `tensor`, which fixes its dimension names.
    pub fn first_access(&self, tensor: &str) -> Option<&Access> {
        self.input_accesses().find(|a| a.tensor == tensor)
    }

    /// Variables of `term` that are summed over.
    pub fn reduction_vars(&self, term: usize) -> Vec<IndexVar> {
        self.terms[term]
            .vars()
            .into_iter()
            .filter(|v| !self.output.vars.contains(v))
            .collect()
    }
}

impl fmt::Display for TensorStatement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = ", self.output)?;
        for (n, t) in self.terms.iter().enumerate() {
            if n > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

fn push_new(out: &mut Vec<IndexVar>, vars: &[IndexVar]) {
    for v in vars {
        if !out.contains(v) {
            out.push(v.clone());
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Equals,
    Plus,
    Star,
    Colon,
    Semi,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Equals => f.write_str("`=`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Span)>> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1, 1);
    while let Some(&c) = chars.peek() {
        let span = Span { line, column };
        if c == '\n' {
            chars.next();
            line += 1;
            column = 1;
            continue;
        }
        if c.is_whitespace() {
            chars.next();
            column += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut name = String::new();
            while let Some(&c) = chars.peek() {
                if !(c.is_ascii_alphanumeric() || c == '_') {
                    break;
                }
                name.push(c);
                chars.next();
                column += 1;
            }
            out.push((Tok::Ident(name), span));
            continue;
        }
        let tok = match c {
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            ',' => Tok::Comma,
            '=' => Tok::Equals,
            '+' => Tok::Plus,
            '*' => Tok::Star,
            ':' => Tok::Colon,
            ';' => Tok::Semi,
            other => {
                return Err(Error::Syntax {
                    span,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        chars.next();
        column += 1;
        out.push((tok, span));
    }
    out.push((Tok::Eof, Span { line, column }));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Self> {
        Ok(Parser {
            toks: lex(text)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> Error {
        Error::Syntax {
            span: self.span(),
            message: format!("expected {wanted}, found {}", self.peek()),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<Span> {
        if *self.peek() == tok {
            Ok(self.bump().1)
        } else {
            Err(self.unexpected(&tok.to_string()))
        }
    }

    fn name(&mut self, what: &str) -> Result<(String, Span)> {
        match self.peek() {
            Tok::Ident(_) => match self.bump() {
                (Tok::Ident(s), span) => Ok((s, span)),
                _ => unreachable!(),
            },
            _ => Err(self.unexpected(what)),
        }
    }

    fn var(&mut self) -> Result<(IndexVar, Span)> {
        let (name, span) = self.name("an index variable")?;
        let ok = name.starts_with(|c: char| c.is_ascii_lowercase() || c == '_')
            && name
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
        if !ok {
            return Err(Error::Syntax {
                span,
                message: format!("index variable `{name}` must be a lowercase token"),
            });
        }
        Ok((IndexVar::new(name), span))
    }

    fn access(&mut self) -> Result<Access> {
        let (tensor, span) = self.name("a tensor name")?;
        self.expect(Tok::LBracket)?;
        let mut vars: Vec<IndexVar> = Vec::new();
        loop {
            let (v, vspan) = self.var()?;
            if vars.contains(&v) {
                return Err(Error::RepeatedIndex {
                    tensor,
                    var: v.to_string(),
                    span: vspan,
                });
            }
            vars.push(v);
            match self.peek() {
                Tok::Comma => {
                    self.bump();
                }
                Tok::RBracket => {
                    self.bump();
                    break;
                }
                _ => return Err(self.unexpected("`,` or `]`")),
            }
        }
        Ok(Access { tensor, vars, span })
    }

    fn product(&mut self) -> Result<Term> {
        let mut factors = vec![self.access()?];
        while *self.peek() == Tok::Star {
            self.bump();
            factors.push(self.access()?);
        }
        Ok(Term { factors })
    }
}

/// Parses and validates a statement.
pub fn parse_statement(text: &str) -> Result<TensorStatement> {
    let mut p = Parser::new(text)?;
    let output = p.access()?;
    p.expect(Tok::Equals)?;
    let mut terms = vec![p.product()?];
    loop {
        match p.peek() {
            Tok::Plus => {
                p.bump();
                terms.push(p.product()?);
            }
            Tok::Eof => break,
            _ => return Err(p.unexpected("`*`, `+` or end of input")),
        }
    }
    let stmt = TensorStatement { output, terms };
    validate(&stmt)?;
    Ok(stmt)
}

fn validate(stmt: &TensorStatement) -> Result<()> {
    for (n, term) in stmt.terms.iter().enumerate() {
        let tv = term.vars();
        if let Some(v) = stmt.output.vars.iter().find(|v| !tv.contains(v)) {
            return Err(Error::OutputVarMissing {
                var: v.to_string(),
                term: n + 1,
            });
        }
    }
    let mut arity: BTreeMap<&str, usize> = BTreeMap::new();
    for a in stmt.input_accesses() {
        if a.tensor == stmt.output.tensor {
            return Err(Error::OutputReadBack(a.tensor.clone()));
        }
        let expected = *arity.entry(&a.tensor).or_insert(a.vars.len());
        if expected != a.vars.len() {
            return Err(Error::ArityMismatch {
                tensor: a.tensor.clone(),
                expected,
                found: a.vars.len(),
            });
        }
    }
    Ok(())
}

/// Parses symmetry declarations into a signature for every input tensor
/// of `stmt`, in statement order. Extents are left unset.
pub fn parse_symmetries(text: &str, stmt: &TensorStatement) -> Result<Vec<TensorSignature>> {
    let mut declared: BTreeMap<String, Vec<Vec<IndexVar>>> = BTreeMap::new();
    let mut p = Parser::new(text)?;
    loop {
        match p.peek() {
            Tok::Eof => break,
            Tok::Semi => {
                p.bump();
                continue;
            }
            _ => {}
        }
        let (tensor, span) = p.name("a tensor name")?;
        let access = stmt
            .first_access(&tensor)
            .ok_or_else(|| Error::UnknownTensor(tensor.clone()))?;
        if declared.contains_key(&tensor) {
            return Err(Error::Syntax {
                span,
                message: format!("symmetry of `{tensor}` declared twice"),
            });
        }
        p.expect(Tok::Colon)?;
        let mut parts = Vec::new();
        while *p.peek() == Tok::LBrace {
            p.bump();
            let mut part = Vec::new();
            loop {
                let (v, _) = p.var()?;
                if !access.vars.contains(&v) {
                    return Err(Error::NotAnIndex {
                        tensor,
                        var: v.to_string(),
                    });
                }
                part.push(v);
                match p.peek() {
                    Tok::Comma => {
                        p.bump();
                    }
                    Tok::RBrace => {
                        p.bump();
                        break;
                    }
                    _ => return Err(p.unexpected("`,` or `}`")),
                }
            }
            parts.push(part);
        }
        if parts.is_empty() {
            return Err(p.unexpected("`{`"));
        }
        match p.peek() {
            Tok::Semi | Tok::Eof => {}
            _ => return Err(p.unexpected("`;`, `{` or end of input")),
        }
        declared.insert(tensor, parts);
    }
    stmt.input_tensors()
        .into_iter()
        .map(|name| {
            let vars = stmt.first_access(&name).unwrap().vars.clone();
            let parts = declared.remove(&name).unwrap_or_default();
            TensorSignature::new(name, vars, None, parts)
        })
        .collect()
}

/// JSON problem description: statement, symmetries and per-variable extents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub expr: String,
    #[serde(default)]
    pub symmetries: String,
    #[serde(default)]
    pub extents: BTreeMap<String, usize>,
}

/// A parsed statement with sized signatures for all of its inputs.
#[derive(Debug, Clone)]
pub struct Problem {
    pub stmt: TensorStatement,
    pub inputs: Vec<TensorSignature>,
    pub extents: BTreeMap<IndexVar, usize>,
}

impl Problem {
    pub fn new(expr: &str, symmetries: &str, extents: &BTreeMap<String, usize>) -> Result<Self> {
        let stmt = parse_statement(expr)?;
        let sigs = parse_symmetries(symmetries, &stmt)?;
        let extents = extents
            .iter()
            .map(|(k, &v)| (IndexVar::new(k.clone()), v))
            .collect::<BTreeMap<_, _>>();
        for v in stmt.vars() {
            if !extents.contains_key(&v) {
                return Err(Error::MissingExtent(v.to_string()));
            }
        }
        let inputs = sigs
            .into_iter()
            .map(|sig| {
                let sizes = sig.index_vars.iter().map(|v| extents[v]).collect();
                sig.with_extents(sizes)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Problem {
            stmt,
            inputs,
            extents,
        })
    }

    pub fn from_spec(spec: &ProblemSpec) -> Result<Self> {
        Self::new(&spec.expr, &spec.symmetries, &spec.extents)
    }

    /// Convenience for fixtures: every variable gets the same extent.
    pub fn uniform(expr: &str, symmetries: &str, extent: usize) -> Result<Self> {
        let stmt = parse_statement(expr)?;
        let extents = stmt
            .vars()
            .into_iter()
            .map(|v| (v.as_str().to_string(), extent))
            .collect();
        Self::new(expr, symmetries, &extents)
    }
}
