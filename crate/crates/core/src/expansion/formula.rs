//! Quantifier-free formulas in one free variable `x`.
//!
//! Grammar (whitespace insensitive):
//!
//! ```text
//! formula := and ('|' and)*
//! and     := unary ('&' unary)*
//! unary   := '!' unary | atom | '(' formula ')'
//! atom    := REL '(' term ',' term ')' | term ('<' | '<=' | '=') term
//! term    := prim ('^' prim)*
//! prim    := 'x' | IDENT | '(' term ')'
//! ```
//!
//! Meet terms are flattened into their set of generators.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use super::Structure;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Gen {
    X,
    Param(String),
}

/// A meet of generators.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term(pub BTreeSet<Gen>);

impl Term {
    pub fn x() -> Self {
        Term([Gen::X].into())
    }

    pub fn param(p: &str) -> Self {
        Term([Gen::Param(p.to_string())].into())
    }

    pub fn meet(&self, other: &Term) -> Term {
        Term(self.0.union(&other.0).cloned().collect())
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self
            .0
            .iter()
            .map(|g| match g {
                Gen::X => "x",
                Gen::Param(p) => p.as_str(),
            })
            .collect();
        f.write_str(&parts.join(" ^ "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Lt(Term, Term),
    Le(Term, Term),
    Eq(Term, Term),
    Rel(String, Term, Term),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    Atom(Atom),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn not(a: Formula) -> Formula {
        Formula::Not(Box::new(a))
    }

    fn prec(&self) -> u8 {
        match self {
            Formula::Or(..) => 1,
            Formula::And(..) => 2,
            Formula::Not(_) | Formula::Atom(_) => 3,
        }
    }

    /// Parameter names mentioned anywhere.
    pub fn params(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit_terms(&mut |t| {
            for g in &t.0 {
                if let Gen::Param(p) = g {
                    out.insert(p.clone());
                }
            }
        });
        out
    }

    pub fn relations(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit_atoms(&mut |a| {
            if let Atom::Rel(r, _, _) = a {
                out.insert(r.clone());
            }
        });
        out
    }

    fn visit_atoms(&self, f: &mut impl FnMut(&Atom)) {
        match self {
            Formula::Atom(a) => f(a),
            Formula::Not(a) => a.visit_atoms(f),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.visit_atoms(f);
                b.visit_atoms(f);
            }
        }
    }

    fn visit_terms(&self, f: &mut impl FnMut(&Term)) {
        self.visit_atoms(&mut |a| match a {
            Atom::Lt(s, t) | Atom::Le(s, t) | Atom::Eq(s, t) | Atom::Rel(_, s, t) => {
                f(s);
                f(t);
            }
        });
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Lt(a, b) => write!(f, "{a} < {b}"),
            Atom::Le(a, b) => write!(f, "{a} <= {b}"),
            Atom::Eq(a, b) => write!(f, "{a} = {b}"),
            Atom::Rel(r, a, b) => write!(f, "{r}({a}, {b})"),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn side(f: &mut fmt::Formatter<'_>, x: &Formula, min: u8) -> fmt::Result {
            if x.prec() < min {
                write!(f, "({x})")
            } else {
                write!(f, "{x}")
            }
        }
        match self {
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Not(a) => {
                f.write_str("!")?;
                side(f, a, 3)
            }
            Formula::And(a, b) => {
                side(f, a, 2)?;
                f.write_str(" & ")?;
                side(f, b, 3)
            }
            Formula::Or(a, b) => {
                side(f, a, 1)?;
                f.write_str(" | ")?;
                side(f, b, 2)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    Comma,
    Meet,
    Lt,
    Le,
    Eq,
    Not,
    And,
    Or,
    End,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, FormulaError> {
    let b = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            '^' => Tok::Meet,
            '=' => Tok::Eq,
            '!' => Tok::Not,
            '&' => Tok::And,
            '|' => Tok::Or,
            '<' if b.get(i + 1) == Some(&b'=') => {
                i += 1;
                Tok::Le
            }
            '<' => Tok::Lt,
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i + 1 < b.len()
                    && ((b[i + 1] as char).is_ascii_alphanumeric() || b[i + 1] == b'_' || b[i + 1] == b'.')
                {
                    i += 1;
                }
                Tok::Ident(src[start..=i].to_string())
            }
            _ => {
                return Err(FormulaError::Syntax {
                    pos: i,
                    msg: format!("unexpected character `{c}`"),
                })
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

type PResult<T> = Result<T, FormulaError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn err<T>(&self, msg: &str) -> PResult<T> {
        Err(FormulaError::Syntax {
            pos: self.toks[self.pos].1,
            msg: msg.to_string(),
        })
    }

    fn expect(&mut self, t: Tok, what: &str) -> PResult<()> {
        if *self.peek() == t {
            self.pos += 1;
            Ok(())
        } else {
            self.err(&format!("expected {what}"))
        }
    }

    fn formula(&mut self) -> PResult<Formula> {
        let mut f = self.and()?;
        while *self.peek() == Tok::Or {
            self.pos += 1;
            f = Formula::or(f, self.and()?);
        }
        Ok(f)
    }

    fn and(&mut self) -> PResult<Formula> {
        let mut f = self.unary()?;
        while *self.peek() == Tok::And {
            self.pos += 1;
            f = Formula::and(f, self.unary()?);
        }
        Ok(f)
    }

    fn unary(&mut self) -> PResult<Formula> {
        if *self.peek() == Tok::Not {
            self.pos += 1;
            return Ok(Formula::not(self.unary()?));
        }
        let save = self.pos;
        match self.atom() {
            Ok(a) => Ok(Formula::Atom(a)),
            Err(atom_err) => {
                self.pos = save;
                if *self.peek() != Tok::LParen {
                    return Err(atom_err);
                }
                self.pos += 1;
                match self.formula() {
                    Ok(f) => {
                        self.expect(Tok::RParen, "`)`")?;
                        Ok(f)
                    }
                    // report whichever attempt got further
                    Err(e) => Err(further(e, atom_err)),
                }
            }
        }
    }

    fn atom(&mut self) -> PResult<Atom> {
        if let Tok::Ident(name) = self.peek().clone() {
            if self.toks[self.pos + 1].0 == Tok::LParen && name != "x" {
                let save = self.pos;
                self.pos += 2;
                let rel = (|| {
                    let a = self.term()?;
                    self.expect(Tok::Comma, "`,`")?;
                    let b = self.term()?;
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(Atom::Rel(name.clone(), a, b))
                })();
                if rel.is_ok() {
                    return rel;
                }
                self.pos = save;
                return rel;
            }
        }
        let a = self.term()?;
        let op = self.peek().clone();
        if !matches!(op, Tok::Lt | Tok::Le | Tok::Eq) {
            return self.err("expected `<`, `<=` or `=`");
        }
        self.pos += 1;
        let b = self.term()?;
        Ok(match op {
            Tok::Lt => Atom::Lt(a, b),
            Tok::Le => Atom::Le(a, b),
            _ => Atom::Eq(a, b),
        })
    }

    fn term(&mut self) -> PResult<Term> {
        let mut t = self.prim()?;
        while *self.peek() == Tok::Meet {
            self.pos += 1;
            t = t.meet(&self.prim()?);
        }
        Ok(t)
    }

    fn prim(&mut self) -> PResult<Term> {
        match self.peek().clone() {
            Tok::Ident(n) => {
                self.pos += 1;
                Ok(if n == "x" { Term::x() } else { Term::param(&n) })
            }
            Tok::LParen => {
                self.pos += 1;
                let t = self.term()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(t)
            }
            _ => self.err("expected a term"),
        }
    }
}

fn further(a: FormulaError, b: FormulaError) -> FormulaError {
    match (&a, &b) {
        (FormulaError::Syntax { pos: pa, .. }, FormulaError::Syntax { pos: pb, .. }) if pb > pa => b,
        _ => a,
    }
}

pub fn parse_formula(src: &str) -> Result<Formula, FormulaError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
    };
    let f = p.formula()?;
    if *p.peek() != Tok::End {
        return p.err("unexpected trailing input");
    }
    Ok(f)
}

fn term_value(s: &Structure, t: &Term, a: usize) -> Result<usize, FormulaError> {
    let mut v: Option<usize> = None;
    for g in &t.0 {
        let n = match g {
            Gen::X => a,
            Gen::Param(p) => s
                .tree
                .idx(p)
                .map_err(|_| FormulaError::UnknownParam(p.clone()))?,
        };
        v = Some(match v {
            None => n,
            Some(m) => s.tree.meet_idx(m, n),
        });
    }
    Ok(v.expect("terms are nonempty"))
}

/// Evaluates `f` with `x` interpreted as node `a`.
pub fn eval_formula(s: &Structure, f: &Formula, a: usize) -> Result<bool, FormulaError> {
    Ok(match f {
        Formula::Atom(at) => match at {
            Atom::Lt(l, r) => {
                let (l, r) = (term_value(s, l, a)?, term_value(s, r, a)?);
                s.tree.lt(l, r)
            }
            Atom::Le(l, r) => s.tree.leq(term_value(s, l, a)?, term_value(s, r, a)?),
            Atom::Eq(l, r) => term_value(s, l, a)? == term_value(s, r, a)?,
            Atom::Rel(rel, l, r) => {
                if s.sig().get(rel).is_none() {
                    return Err(FormulaError::UnknownRelation(rel.clone()));
                }
                s.holds(rel, term_value(s, l, a)?, term_value(s, r, a)?)
            }
        },
        Formula::Not(g) => !eval_formula(s, g, a)?,
        Formula::And(g, h) => eval_formula(s, g, a)? && eval_formula(s, h, a)?,
        Formula::Or(g, h) => eval_formula(s, g, a)? || eval_formula(s, h, a)?,
    })
}

/// Checks that every parameter and relation of `f` exists in `s`.
pub fn check_formula(s: &Structure, f: &Formula) -> Result<(), FormulaError> {
    if let Some(p) = f.params().into_iter().find(|p| !s.tree.contains(p)) {
        return Err(FormulaError::UnknownParam(p));
    }
    if let Some(r) = f.relations().into_iter().find(|r| s.sig().get(r).is_none()) {
        return Err(FormulaError::UnknownRelation(r));
    }
    Ok(())
}

/// A random formula over the given parameters and relations.
pub fn random_formula<R: Rng>(rng: &mut R, params: &[String], rels: &[String], depth: u32) -> Formula {
    let term = |rng: &mut R| -> Term {
        let mut t = if params.is_empty() || rng.gen_bool(0.6) {
            Term::x()
        } else {
            Term::param(params.choose(rng).unwrap())
        };
        while !params.is_empty() && rng.gen_bool(0.35) {
            t = t.meet(&Term::param(params.choose(rng).unwrap()));
        }
        t
    };
    if depth == 0 || rng.gen_bool(0.4) {
        let (a, b) = (term(rng), term(rng));
        let k = rng.gen_range(0..if rels.is_empty() { 3 } else { 5 });
        return Formula::Atom(match k {
            0 => Atom::Lt(a, b),
            1 => Atom::Le(a, b),
            2 => Atom::Eq(a, b),
            _ => Atom::Rel(rels.choose(rng).unwrap().clone(), a, b),
        });
    }
    match rng.gen_range(0..3) {
        0 => Formula::not(random_formula(rng, params, rels, depth - 1)),
        1 => Formula::and(
            random_formula(rng, params, rels, depth - 1),
            random_formula(rng, params, rels, depth - 1),
        ),
        _ => Formula::or(
            random_formula(rng, params, rels, depth - 1),
            random_formula(rng, params, rels, depth - 1),
        ),
    }
}
