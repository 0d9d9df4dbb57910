//! Stable canonical rules and (m-)stable canonical formulas, with validity
//! deciders that go through the semantic characterizations instead of
//! brute-force valuation search.
//!
//! The rule associated to an algebra uses one variable per element, named
//! `p_<bitmask>`. Its premises pin down the Boolean structure (joins and
//! complements), one-directional stability of the diamond, and the
//! converse diamond direction on the designated domain; the conclusions
//! list every non-unit element. The formula renderings guard the rule with
//! `box<=m` on both sides.

use std::fmt;

use crate::algebra::{Element, ModalAlgebra};
use crate::error::{Error, Result};
use crate::formula::{Formula, FormulaSet};
use crate::frame::Frame;
use crate::morphism;
use crate::SearchBudget;

/// A multi-conclusion rule: premises over conclusions.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Rule {
    pub premises: FormulaSet,
    pub conclusions: FormulaSet,
}

impl Rule {
    pub fn new(premises: FormulaSet, conclusions: FormulaSet) -> Rule {
        Rule {
            premises,
            conclusions,
        }
    }

    /// Parse `"gamma1 ; gamma2 / delta1 ; delta2"`. Either side may be
    /// empty.
    pub fn parse(text: &str) -> Result<Rule> {
        let (prem, conc) = text.split_once('/').ok_or_else(|| {
            Error::invalid("a rule needs a '/' separating premises from conclusions")
        })?;
        let parse_side = |side: &str| -> Result<FormulaSet> {
            side.split(';')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(Formula::parse)
                .collect()
        };
        Ok(Rule::new(parse_side(prem)?, parse_side(conc)?))
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = |s: &FormulaSet| {
            s.iter()
                .map(|f| f.to_string())
                .collect::<Vec<_>>()
                .join(" ; ")
        };
        write!(f, "{} / {}", side(&self.premises), side(&self.conclusions))
    }
}

/// Which rendering a `(algebra, domain)` pair is used for.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CanonicalKind {
    /// The stable canonical rule.
    Rule,
    /// The stable canonical formula with `box<=m` guards.
    Gamma(u32),
    /// The m-stable canonical formula: the domain clauses range over all
    /// diamond powers up to `m`.
    GammaPlus(u32),
}

impl CanonicalKind {
    pub fn m(&self) -> Option<u32> {
        match self {
            CanonicalKind::Rule => None,
            CanonicalKind::Gamma(m) | CanonicalKind::GammaPlus(m) => Some(*m),
        }
    }
}

/// An algebra with a designated domain and a rendering kind. The formula
/// kinds require the algebra to be subdirectly irreducible and
/// pre-transitive at the kind's level.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CanonicalSpec {
    algebra: ModalAlgebra,
    domain: Vec<Element>,
    kind: CanonicalKind,
}

impl CanonicalSpec {
    pub fn new(algebra: ModalAlgebra, domain: Vec<Element>, kind: CanonicalKind) -> Result<Self> {
        let mut domain = domain;
        for d in &domain {
            if d.width() != algebra.atom_count() as u32 {
                return Err(Error::WidthMismatch {
                    expected: algebra.atom_count() as u32,
                    found: d.width(),
                });
            }
        }
        domain.sort_unstable();
        domain.dedup();
        if let Some(m) = kind.m() {
            if m < 1 {
                return Err(Error::precondition("formula kinds require m >= 1"));
            }
            if !algebra.is_si() {
                return Err(Error::precondition(
                    "formula kinds require a subdirectly irreducible algebra",
                ));
            }
            if !algebra.is_pretransitive(m) {
                return Err(Error::precondition(format!(
                    "formula kinds require the algebra to validate dia^{} p -> dia p",
                    m + 1
                )));
            }
        }
        Ok(CanonicalSpec {
            algebra,
            domain,
            kind,
        })
    }

    pub fn algebra(&self) -> &ModalAlgebra {
        &self.algebra
    }

    pub fn domain(&self) -> &[Element] {
        &self.domain
    }

    pub fn kind(&self) -> CanonicalKind {
        self.kind
    }

    /// The stable canonical rule of the underlying pair.
    pub fn rule(&self) -> Rule {
        scr_from_algebra(&self.algebra, &self.domain)
    }
}

fn element_var(e: Element) -> Formula {
    Formula::var(format!("p_{}", e.bits()))
}

fn scr_premises(a: &ModalAlgebra, domain: &[Element], levels: u32) -> FormulaSet {
    let mut gamma = FormulaSet::new();
    for x in a.elements() {
        for y in a.elements() {
            gamma.insert(Formula::iff(
                element_var(a.join(x, y)),
                Formula::or(element_var(x), element_var(y)),
            ));
        }
        gamma.insert(Formula::iff(
            element_var(a.not(x)),
            Formula::not(element_var(x)),
        ));
        gamma.insert(Formula::imp(
            Formula::dia(element_var(x)),
            element_var(a.dia(x)),
        ));
    }
    for &d in domain {
        for k in 1..=levels {
            gamma.insert(Formula::imp(
                element_var(a.dia_pow(k, d)),
                Formula::dia_pow(k, element_var(d)),
            ));
        }
    }
    gamma
}

fn scr_conclusions(a: &ModalAlgebra) -> FormulaSet {
    a.elements()
        .filter(|&x| x != a.top())
        .map(element_var)
        .collect()
}

/// The stable canonical rule of a finite modal algebra and a domain of
/// designated elements.
pub fn scr_from_algebra(a: &ModalAlgebra, domain: &[Element]) -> Rule {
    Rule::new(scr_premises(a, domain, 1), scr_conclusions(a))
}

/// The stable canonical rule of a finite frame and a set of designated
/// point sets, in the frame presentation with one variable per point.
pub fn scr_from_frame(frame: &Frame, domains: &[u64]) -> Rule {
    let n = frame.point_count();
    let var = |x: usize| Formula::var(format!("p_{}", frame.labels()[x]));
    let mut gamma = FormulaSet::new();
    if n > 0 {
        let mut everywhere = var(n - 1);
        for x in (0..n - 1).rev() {
            everywhere = Formula::or(var(x), everywhere);
        }
        gamma.insert(everywhere);
    }
    for x in 0..n {
        for y in 0..n {
            if x != y {
                gamma.insert(Formula::imp(var(x), Formula::not(var(y))));
            }
            if !frame.has_edge(x, y) {
                gamma.insert(Formula::imp(var(x), Formula::not(Formula::dia(var(y)))));
            }
        }
    }
    for &d in domains {
        for x in 0..n {
            if frame.successors(x) & d == 0 {
                continue;
            }
            let members: Vec<usize> = (0..n).filter(|&y| d >> y & 1 == 1).collect();
            let mut body = Formula::dia(var(*members.last().expect("nonempty domain")));
            for &y in members.iter().rev().skip(1) {
                body = Formula::or(Formula::dia(var(y)), body);
            }
            gamma.insert(Formula::imp(var(x), body));
        }
    }
    let delta: FormulaSet = (0..n).map(|x| Formula::not(var(x))).collect();
    Rule::new(gamma, delta)
}

fn fold_and(set: &FormulaSet) -> Formula {
    let mut items: Vec<Formula> = set.iter().cloned().collect();
    let mut acc = items.pop().expect("nonempty conjunction");
    while let Some(f) = items.pop() {
        acc = Formula::and(f, acc);
    }
    acc
}

fn fold_or(items: Vec<Formula>) -> Formula {
    let mut items = items;
    let mut acc = items.pop().expect("nonempty disjunction");
    while let Some(f) = items.pop() {
        acc = Formula::or(f, acc);
    }
    acc
}

/// Render the formula of a `Gamma(m)` or `GammaPlus(m)` spec:
/// `box<=m (/\ Gamma) -> \/ { box<=m delta }`.
pub fn render_formula(spec: &CanonicalSpec) -> Result<Formula> {
    let m = spec
        .kind
        .m()
        .ok_or_else(|| Error::precondition("render_formula requires a formula kind"))?;
    let levels = match spec.kind {
        CanonicalKind::GammaPlus(m) => m,
        _ => 1,
    };
    let gamma = scr_premises(&spec.algebra, &spec.domain, levels);
    let delta = scr_conclusions(&spec.algebra);
    let antecedent = Formula::box_le(m, fold_and(&gamma));
    let consequent = fold_or(
        delta
            .iter()
            .map(|d| Formula::box_le(m, d.clone()))
            .collect(),
    );
    Ok(Formula::imp(antecedent, consequent))
}

/// Whether `b` refutes the stable canonical rule of the spec, decided via
/// stable-embedding search.
pub fn refutes_rule(b: &ModalAlgebra, spec: &CanonicalSpec, budget: &SearchBudget) -> Result<bool> {
    if spec.kind != CanonicalKind::Rule {
        return Err(Error::precondition("refutes_rule requires kind Rule"));
    }
    Ok(morphism::find_stable_embedding(&spec.algebra, b, &spec.domain, 1, budget)?.is_some())
}

/// Whether `b` refutes the rendered formula of the spec, decided via
/// stable-embedding search into subdirectly irreducible images. `b` must
/// validate the pre-transitivity axiom of the spec's level.
pub fn refutes_formula(
    b: &ModalAlgebra,
    spec: &CanonicalSpec,
    budget: &SearchBudget,
) -> Result<bool> {
    let m = spec
        .kind
        .m()
        .ok_or_else(|| Error::precondition("refutes_formula requires a formula kind"))?;
    if !b.is_pretransitive(m) {
        return Err(Error::precondition(format!(
            "refutes_formula requires the algebra to validate dia^{} p -> dia p",
            m + 1
        )));
    }
    let level = match spec.kind {
        CanonicalKind::GammaPlus(m) => m,
        _ => 1,
    };
    morphism::embeds_into_si_image(&spec.algebra, &spec.domain, b, level, budget)
}
