//! Modal formula syntax trees, the ASCII parser/printer, and
//! subformula-set machinery.
//!
//! Grammar (precedence `unary > & > | > -> > <->`, binary operators
//! right-associative):
//!
//! ```text
//! phi ::= ident | "bot" | "top" | "~" phi | phi "&" phi | phi "|" phi
//!       | phi "->" phi | phi "<->" phi | "dia" phi | "box" phi
//!       | "dia^" nat phi | "box^" nat phi
//!       | "dia<=" nat phi | "box<=" nat phi | "(" phi ")"
//! ```
//!
//! The indexed forms are abbreviations and are expanded into primitives
//! during parsing: `dia^k` is `k` nested diamonds, `box<=k phi` is
//! `phi & box phi & ... & box^k phi`, and the index `0` yields the operand
//! unchanged.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Formula {
    Var(String),
    Bot,
    Top,
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Imp(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Dia(Box<Formula>),
    Box(Box<Formula>),
}

impl Formula {
    pub fn var(name: impl Into<String>) -> Formula {
        Formula::Var(name.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn imp(a: Formula, b: Formula) -> Formula {
        Formula::Imp(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    pub fn dia(f: Formula) -> Formula {
        Formula::Dia(Box::new(f))
    }

    pub fn boxed(f: Formula) -> Formula {
        Formula::Box(Box::new(f))
    }

    /// `dia^k phi`; `k = 0` is `phi` itself.
    pub fn dia_pow(k: u32, f: Formula) -> Formula {
        (0..k).fold(f, |acc, _| Formula::dia(acc))
    }

    /// `box^k phi`; `k = 0` is `phi` itself.
    pub fn box_pow(k: u32, f: Formula) -> Formula {
        (0..k).fold(f, |acc, _| Formula::boxed(acc))
    }

    /// `phi & box phi & ... & box^k phi`, right-nested; `k = 0` is `phi`.
    pub fn box_le(k: u32, f: Formula) -> Formula {
        let mut acc = Formula::box_pow(k, f.clone());
        for i in (0..k).rev() {
            acc = Formula::and(Formula::box_pow(i, f.clone()), acc);
        }
        acc
    }

    /// `phi | dia phi | ... | dia^k phi`, right-nested; `k = 0` is `phi`.
    pub fn dia_le(k: u32, f: Formula) -> Formula {
        let mut acc = Formula::dia_pow(k, f.clone());
        for i in (0..k).rev() {
            acc = Formula::or(Formula::dia_pow(i, f.clone()), acc);
        }
        acc
    }

    pub fn parse(text: &str) -> Result<Formula> {
        Parser::new(text)?.parse_complete()
    }

    /// Rewrite every box as its diamond abbreviation `~dia~`. The
    /// filtration constructions read their formula sets in the
    /// diamond-only fragment: the closed domain collects the arguments of
    /// diamonds, so a primitive box must decompose through a diamond for
    /// the value-preservation argument to apply.
    pub fn eliminate_box(&self) -> Formula {
        match self {
            Formula::Var(_) | Formula::Bot | Formula::Top => self.clone(),
            Formula::Not(a) => Formula::not(a.eliminate_box()),
            Formula::And(a, b) => Formula::and(a.eliminate_box(), b.eliminate_box()),
            Formula::Or(a, b) => Formula::or(a.eliminate_box(), b.eliminate_box()),
            Formula::Imp(a, b) => Formula::imp(a.eliminate_box(), b.eliminate_box()),
            Formula::Iff(a, b) => Formula::iff(a.eliminate_box(), b.eliminate_box()),
            Formula::Dia(a) => Formula::dia(a.eliminate_box()),
            Formula::Box(a) => Formula::not(Formula::dia(Formula::not(a.eliminate_box()))),
        }
    }

    /// Immediate subterms, left to right.
    pub fn subterms(&self) -> Vec<&Formula> {
        match self {
            Formula::Var(_) | Formula::Bot | Formula::Top => vec![],
            Formula::Not(a) | Formula::Dia(a) | Formula::Box(a) => vec![a],
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Imp(a, b) | Formula::Iff(a, b) => {
                vec![a, b]
            }
        }
    }

    /// Variable names occurring in the formula.
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        if let Formula::Var(name) = self {
            out.insert(name.clone());
        }
        for sub in self.subterms() {
            sub.collect_vars(out);
        }
    }

    fn prec(&self) -> u8 {
        match self {
            Formula::Iff(..) => 1,
            Formula::Imp(..) => 2,
            Formula::Or(..) => 3,
            Formula::And(..) => 4,
            Formula::Not(..) | Formula::Dia(..) | Formula::Box(..) => 5,
            Formula::Var(_) | Formula::Bot | Formula::Top => 6,
        }
    }

    fn fmt_prec(&self, min: u8, out: &mut String) {
        let prec = self.prec();
        if prec < min {
            out.push('(');
            self.fmt_prec(0, out);
            out.push(')');
            return;
        }
        match self {
            Formula::Var(name) => out.push_str(name),
            Formula::Bot => out.push_str("bot"),
            Formula::Top => out.push_str("top"),
            Formula::Not(a) => {
                out.push('~');
                a.fmt_prec(5, out);
            }
            Formula::Dia(a) => {
                out.push_str("dia ");
                a.fmt_prec(5, out);
            }
            Formula::Box(a) => {
                out.push_str("box ");
                a.fmt_prec(5, out);
            }
            Formula::And(a, b) => {
                a.fmt_prec(prec + 1, out);
                out.push_str(" & ");
                b.fmt_prec(prec, out);
            }
            Formula::Or(a, b) => {
                a.fmt_prec(prec + 1, out);
                out.push_str(" | ");
                b.fmt_prec(prec, out);
            }
            Formula::Imp(a, b) => {
                a.fmt_prec(prec + 1, out);
                out.push_str(" -> ");
                b.fmt_prec(prec, out);
            }
            Formula::Iff(a, b) => {
                a.fmt_prec(prec + 1, out);
                out.push_str(" <-> ");
                b.fmt_prec(prec, out);
            }
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        self.fmt_prec(0, &mut out);
        f.write_str(&out)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Bot,
    Top,
    Dia,
    Box,
    DiaPow(u32),
    BoxPow(u32),
    DiaLe(u32),
    BoxLe(u32),
    Not,
    And,
    Or,
    Imp,
    Iff,
    LPar,
    RPar,
}

struct Parser {
    /// Tokens with their 1-based byte offsets.
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end_offset: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

impl Parser {
    fn new(text: &str) -> Result<Parser> {
        let bytes: Vec<char> = text.chars().collect();
        let mut toks = Vec::new();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            let here = i + 1;
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            let tok = match c {
                '(' => {
                    i += 1;
                    Tok::LPar
                }
                ')' => {
                    i += 1;
                    Tok::RPar
                }
                '~' => {
                    i += 1;
                    Tok::Not
                }
                '&' => {
                    i += 1;
                    Tok::And
                }
                '|' => {
                    i += 1;
                    Tok::Or
                }
                '-' => {
                    if bytes.get(i + 1) == Some(&'>') {
                        i += 2;
                        Tok::Imp
                    } else {
                        return Err(Error::Parse {
                            offset: here,
                            message: "expected '->'".into(),
                        });
                    }
                }
                '<' => {
                    if bytes.get(i + 1) == Some(&'-') && bytes.get(i + 2) == Some(&'>') {
                        i += 3;
                        Tok::Iff
                    } else {
                        return Err(Error::Parse {
                            offset: here,
                            message: "expected '<->'".into(),
                        });
                    }
                }
                c if is_ident_start(c) => {
                    let start = i;
                    while i < bytes.len() && is_ident_char(bytes[i]) {
                        i += 1;
                    }
                    let word: String = bytes[start..i].iter().collect();
                    match word.as_str() {
                        "bot" => Tok::Bot,
                        "top" => Tok::Top,
                        "dia" | "box" => {
                            let modal_dia = word == "dia";
                            if bytes.get(i) == Some(&'^') {
                                i += 1;
                                let k = Self::lex_nat(&bytes, &mut i)?;
                                if modal_dia {
                                    Tok::DiaPow(k)
                                } else {
                                    Tok::BoxPow(k)
                                }
                            } else if bytes.get(i) == Some(&'<') && bytes.get(i + 1) == Some(&'=') {
                                i += 2;
                                let k = Self::lex_nat(&bytes, &mut i)?;
                                if modal_dia {
                                    Tok::DiaLe(k)
                                } else {
                                    Tok::BoxLe(k)
                                }
                            } else if modal_dia {
                                Tok::Dia
                            } else {
                                Tok::Box
                            }
                        }
                        _ => Tok::Ident(word),
                    }
                }
                other => {
                    return Err(Error::Parse {
                        offset: here,
                        message: format!("unexpected character '{other}'"),
                    });
                }
            };
            toks.push((tok, here));
        }
        Ok(Parser {
            toks,
            pos: 0,
            end_offset: bytes.len() + 1,
        })
    }

    fn lex_nat(bytes: &[char], i: &mut usize) -> Result<u32> {
        let start = *i;
        while *i < bytes.len() && bytes[*i].is_ascii_digit() {
            *i += 1;
        }
        if *i == start {
            return Err(Error::Parse {
                offset: start + 1,
                message: "expected a number".into(),
            });
        }
        let digits: String = bytes[start..*i].iter().collect();
        digits.parse().map_err(|_| Error::Parse {
            offset: start + 1,
            message: "index out of range".into(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|&(_, o)| o)
            .unwrap_or(self.end_offset)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn parse_complete(mut self) -> Result<Formula> {
        let f = self.parse_iff()?;
        if self.pos < self.toks.len() {
            return Err(Error::Parse {
                offset: self.here(),
                message: "unexpected trailing input".into(),
            });
        }
        Ok(f)
    }

    fn parse_iff(&mut self) -> Result<Formula> {
        let lhs = self.parse_imp()?;
        if self.peek() == Some(&Tok::Iff) {
            self.bump();
            let rhs = self.parse_iff()?;
            Ok(Formula::iff(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn parse_imp(&mut self) -> Result<Formula> {
        let lhs = self.parse_or()?;
        if self.peek() == Some(&Tok::Imp) {
            self.bump();
            let rhs = self.parse_imp()?;
            Ok(Formula::imp(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn parse_or(&mut self) -> Result<Formula> {
        let lhs = self.parse_and()?;
        if self.peek() == Some(&Tok::Or) {
            self.bump();
            let rhs = self.parse_or()?;
            Ok(Formula::or(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn parse_and(&mut self) -> Result<Formula> {
        let lhs = self.parse_unary()?;
        if self.peek() == Some(&Tok::And) {
            self.bump();
            let rhs = self.parse_and()?;
            Ok(Formula::and(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn parse_unary(&mut self) -> Result<Formula> {
        let offset = self.here();
        match self.bump() {
            Some(Tok::Not) => Ok(Formula::not(self.parse_unary()?)),
            Some(Tok::Dia) => Ok(Formula::dia(self.parse_unary()?)),
            Some(Tok::Box) => Ok(Formula::boxed(self.parse_unary()?)),
            Some(Tok::DiaPow(k)) => Ok(Formula::dia_pow(k, self.parse_unary()?)),
            Some(Tok::BoxPow(k)) => Ok(Formula::box_pow(k, self.parse_unary()?)),
            Some(Tok::DiaLe(k)) => Ok(Formula::dia_le(k, self.parse_unary()?)),
            Some(Tok::BoxLe(k)) => Ok(Formula::box_le(k, self.parse_unary()?)),
            Some(Tok::Ident(name)) => Ok(Formula::Var(name)),
            Some(Tok::Bot) => Ok(Formula::Bot),
            Some(Tok::Top) => Ok(Formula::Top),
            Some(Tok::LPar) => {
                let inner = self.parse_iff()?;
                match self.bump() {
                    Some(Tok::RPar) => Ok(inner),
                    _ => Err(Error::Parse {
                        offset: self.here(),
                        message: "expected ')'".into(),
                    }),
                }
            }
            _ => Err(Error::Parse {
                offset,
                message: "expected a formula".into(),
            }),
        }
    }
}

/// An ordered, duplicate-free set of formulas. Iteration order is the
/// lexicographic order of the canonical rendering, so it is stable across
/// runs and machines.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct FormulaSet {
    items: BTreeMap<String, Formula>,
}

impl FormulaSet {
    pub fn new() -> FormulaSet {
        FormulaSet::default()
    }

    pub fn insert(&mut self, f: Formula) {
        self.items.insert(f.to_string(), f);
    }

    pub fn contains(&self, f: &Formula) -> bool {
        self.items.contains_key(&f.to_string())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Formula> {
        self.items.values()
    }

    pub fn union(&self, other: &FormulaSet) -> FormulaSet {
        let mut out = self.clone();
        for f in other.iter() {
            out.insert(f.clone());
        }
        out
    }

    pub fn is_subset(&self, other: &FormulaSet) -> bool {
        self.items.keys().all(|k| other.items.contains_key(k))
    }

    /// All variable names occurring in the member formulas.
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for f in self.iter() {
            f.collect_vars(&mut out);
        }
        out
    }

    /// Smallest superset closed under taking immediate subterms.
    pub fn subformula_closure(&self) -> FormulaSet {
        let mut out = FormulaSet::new();
        let mut work: Vec<Formula> = self.iter().cloned().collect();
        while let Some(f) = work.pop() {
            if out.contains(&f) {
                continue;
            }
            for sub in f.subterms() {
                work.push(sub.clone());
            }
            out.insert(f);
        }
        out
    }

    pub fn is_subformula_closed(&self) -> bool {
        self.iter()
            .all(|f| f.subterms().into_iter().all(|sub| self.contains(sub)))
    }

    /// `Sub(self ∪ {dia^m phi : phi ∈ self})`, the extended set used by the
    /// pre-transitive filtration. Requires `self` subformula-closed and
    /// `m >= 1`.
    pub fn theta_prime(&self, m: u32) -> Result<FormulaSet> {
        if m < 1 {
            return Err(Error::precondition("theta_prime requires m >= 1"));
        }
        if !self.is_subformula_closed() {
            return Err(Error::precondition(
                "theta_prime requires a subformula-closed set",
            ));
        }
        let mut extended = self.clone();
        for f in self.iter() {
            extended.insert(Formula::dia_pow(m, f.clone()));
        }
        Ok(extended.subformula_closure())
    }
}

impl FromIterator<Formula> for FormulaSet {
    fn from_iter<T: IntoIterator<Item = Formula>>(iter: T) -> Self {
        let mut out = FormulaSet::new();
        for f in iter {
            out.insert(f);
        }
        out
    }
}
