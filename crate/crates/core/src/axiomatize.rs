//! Bounded refutation patterns: given a rule or formula and a base logic,
//! enumerate the finite algebras and domains whose stable canonical
//! rules/formulas jointly axiomatize the target over the base, restricted
//! to algebras with at most `atom_bound` atoms, and verify the equivalence
//! over a bounded class.
//!
//! Candidate generation goes through labelled frames and dualization so
//! that base-logic filtering is a cheap relation check. Each refuting
//! (algebra, valuation) pair is closed under the base's filtration and the
//! resulting (algebra, domain) pairs are deduplicated up to isomorphism
//! carrying the domain onto the domain. Completeness holds relative to the
//! bound; the enumerated patterns grow monotonically with it.

use std::thread;

use crate::algebra::{Element, ModalAlgebra, Valuation};
use crate::error::{Error, Result};
use crate::filtration::{gabbay_filtration, least_filtration};
use crate::formula::{Formula, FormulaSet};
use crate::frame::{frame_from_code, frames_up_to_iso, Frame};
use crate::rules::{refutes_formula, refutes_rule, CanonicalKind, CanonicalSpec, Rule};
use crate::SearchBudget;

/// The base logic patterns are computed over.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BaseLogic {
    K,
    /// `K + dia^{m+1} p -> dia p`; level 1 is K4.
    Pretransitive(u32),
}

impl BaseLogic {
    pub fn admits_frame(&self, frame: &Frame) -> bool {
        match self {
            BaseLogic::K => true,
            BaseLogic::Pretransitive(m) => frame.is_pretransitive(*m),
        }
    }

    pub fn level(&self) -> Option<u32> {
        match self {
            BaseLogic::K => None,
            BaseLogic::Pretransitive(m) => Some(*m),
        }
    }

    /// Parse `"k"` or `"k4m1:M"`.
    pub fn parse(text: &str) -> Result<BaseLogic> {
        let lowered = text.to_ascii_lowercase();
        if lowered == "k" {
            return Ok(BaseLogic::K);
        }
        if let Some(m) = lowered.strip_prefix("k4m1:") {
            let m: u32 = m
                .parse()
                .map_err(|_| Error::invalid(format!("bad base level in '{text}'")))?;
            if m < 1 {
                return Err(Error::invalid("base level must be at least 1"));
            }
            return Ok(BaseLogic::Pretransitive(m));
        }
        Err(Error::invalid(format!(
            "unknown base '{text}' (expected 'k' or 'k4m1:M')"
        )))
    }
}

impl std::fmt::Display for BaseLogic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BaseLogic::K => write!(f, "k"),
            BaseLogic::Pretransitive(m) => write!(f, "k4m1:{m}"),
        }
    }
}

/// What is being axiomatized.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Target {
    Rule(Rule),
    Formula(Formula),
}

impl Target {
    pub fn formulas(&self) -> FormulaSet {
        match self {
            Target::Rule(rule) => rule.premises.union(&rule.conclusions),
            Target::Formula(f) => [f.clone()].into_iter().collect(),
        }
    }

    /// The target with every box rewritten as its diamond abbreviation;
    /// semantically identical, and the form the filtration closure needs.
    pub fn eliminate_box(&self) -> Target {
        match self {
            Target::Rule(rule) => Target::Rule(Rule::new(
                rule.premises.iter().map(Formula::eliminate_box).collect(),
                rule.conclusions
                    .iter()
                    .map(Formula::eliminate_box)
                    .collect(),
            )),
            Target::Formula(f) => Target::Formula(f.eliminate_box()),
        }
    }

    /// Whether the valuation refutes the target on the algebra.
    pub fn refuted_by(&self, a: &ModalAlgebra, v: &Valuation) -> Result<bool> {
        match self {
            Target::Rule(rule) => {
                for gamma in rule.premises.iter() {
                    if a.eval(v, gamma)? != a.top() {
                        return Ok(false);
                    }
                }
                for delta in rule.conclusions.iter() {
                    if a.eval(v, delta)? == a.top() {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Target::Formula(f) => Ok(a.eval(v, f)? != a.top()),
        }
    }

    /// Brute-force validity on an algebra.
    pub fn validates(&self, a: &ModalAlgebra, budget: &SearchBudget) -> Result<bool> {
        match self {
            Target::Rule(rule) => a.validates_rule(rule, budget),
            Target::Formula(f) => a.validates_formula(f, budget),
        }
    }
}

/// One member of a refutation pattern: a filtration-closed algebra, its
/// closed domain, and the valuation that witnessed the refutation.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PatternEntry {
    pub algebra: ModalAlgebra,
    pub domain: Vec<Element>,
    pub valuation: Valuation,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RefutationPattern {
    pub entries: Vec<PatternEntry>,
    pub base: BaseLogic,
    pub atom_bound: usize,
    /// True when the entries are meant as formulas over subdirectly
    /// irreducible algebras rather than rules.
    pub formula_variant: bool,
}

impl RefutationPattern {
    /// The spec of entry `i` under the pattern's reading.
    pub fn entry_spec(&self, i: usize) -> Result<CanonicalSpec> {
        let entry = &self.entries[i];
        let kind = if self.formula_variant {
            CanonicalKind::Gamma(self.base.level().expect("formula variant has a level"))
        } else {
            CanonicalKind::Rule
        };
        CanonicalSpec::new(entry.algebra.clone(), entry.domain.clone(), kind)
    }
}

type KeyedEntry = (Vec<u64>, PatternEntry);

fn pattern_work_units(atom_bound: usize, var_count: usize) -> u64 {
    let mut total: u64 = 0;
    for n in 1..=atom_bound {
        let frames = 1u64.checked_shl((n * n) as u32).unwrap_or(u64::MAX);
        let vals = 1u64.checked_shl((n * var_count) as u32).unwrap_or(u64::MAX);
        total = total.saturating_add(frames.saturating_mul(vals));
    }
    total
}

/// Enumerate the bounded refutation pattern of a target over a base. The
/// enumeration is split across `threads` workers (0 means all available
/// parallelism); results are merged in enumeration order, so the outcome
/// does not depend on the thread count.
pub fn refutation_patterns(
    target: &Target,
    base: BaseLogic,
    atom_bound: usize,
    budget: &SearchBudget,
    threads: usize,
) -> Result<RefutationPattern> {
    if atom_bound == 0 {
        return Err(Error::precondition("atom_bound must be positive"));
    }
    if atom_bound > 5 {
        return Err(Error::precondition(
            "atom_bound above 5 is outside the supported desk scale",
        ));
    }
    let target = &target.eliminate_box();
    let theta = target.formulas().subformula_closure();
    let theta_prime = match base {
        BaseLogic::K => theta.clone(),
        BaseLogic::Pretransitive(m) => theta.theta_prime(m)?,
    };
    let vars: Vec<String> = theta_prime.vars().into_iter().collect();
    let needed = pattern_work_units(atom_bound, vars.len());
    if needed > budget.max_valuations {
        return Err(Error::BudgetExceeded {
            what: "enumerating refutation-pattern candidates".into(),
            needed,
            budget: budget.max_valuations,
        });
    }
    let formula_variant =
        matches!(target, Target::Formula(_)) && matches!(base, BaseLogic::Pretransitive(_));

    let threads = if threads == 0 {
        thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    } else {
        threads
    };

    let mut merged: Vec<KeyedEntry> = Vec::new();
    for n in 1..=atom_bound {
        let labels: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        let count = 1u64 << (n * n);
        let chunk = count.div_ceil(threads as u64);
        let results: Result<Vec<Vec<KeyedEntry>>> = thread::scope(|scope| {
            let mut handles = Vec::new();
            for t in 0..threads as u64 {
                let start = t * chunk;
                let end = (start + chunk).min(count);
                let labels = labels.clone();
                let theta = &theta;
                let theta_prime = &theta_prime;
                let vars = &vars;
                handles.push(scope.spawn(move || {
                    collect_range(
                        target,
                        base,
                        formula_variant,
                        labels,
                        n,
                        start,
                        end,
                        theta,
                        theta_prime,
                        vars,
                    )
                }));
            }
            handles
                .into_iter()
                .map(|h| h.join().expect("pattern worker panicked"))
                .collect()
        });
        for chunk_result in results? {
            merged.extend(chunk_result);
        }
    }

    // Deduplicate up to isomorphism-with-domain, keeping the first
    // representative in enumeration order, then sort by canonical key.
    let mut entries: Vec<KeyedEntry> = Vec::new();
    for (key, entry) in merged {
        if !entries.iter().any(|(k, _)| *k == key) {
            entries.push((key, entry));
        }
    }
    entries.sort_by(|(k1, _), (k2, _)| k1.cmp(k2));
    Ok(RefutationPattern {
        entries: entries.into_iter().map(|(_, e)| e).collect(),
        base,
        atom_bound,
        formula_variant,
    })
}

#[allow(clippy::too_many_arguments)]
fn collect_range(
    target: &Target,
    base: BaseLogic,
    formula_variant: bool,
    labels: Vec<String>,
    n: usize,
    start: u64,
    end: u64,
    theta: &FormulaSet,
    theta_prime: &FormulaSet,
    vars: &[String],
) -> Result<Vec<KeyedEntry>> {
    let mut out = Vec::new();
    for code in start..end {
        let frame = frame_from_code(labels.clone(), code, n);
        if !base.admits_frame(&frame) {
            continue;
        }
        let a = frame.dual_algebra();
        let limit = 1u64 << (n * vars.len());
        for assignment in 0..limit {
            let v: Valuation = vars
                .iter()
                .enumerate()
                .map(|(i, name)| {
                    let bits = (assignment >> (i * n)) & ((1u64 << n) - 1);
                    (name.clone(), a.element(bits))
                })
                .collect();
            if !target.refuted_by(&a, &v)? {
                continue;
            }
            let filt = match base {
                BaseLogic::K => least_filtration(&a, &v, theta, theta_prime)?,
                BaseLogic::Pretransitive(m) => gabbay_filtration(&a, &v, theta, m)?,
            };
            if formula_variant && !filt.algebra.is_si() {
                continue;
            }
            let mut key = vec![filt.algebra.atom_count() as u64];
            key.extend(filt.algebra.canonical_key_with_domain(&filt.domain));
            out.push((
                key,
                PatternEntry {
                    algebra: filt.algebra,
                    domain: filt.domain,
                    valuation: filt.valuation,
                },
            ));
        }
    }
    Ok(out)
}

/// A bounded-class counterexample to pattern equivalence.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Discrepancy {
    pub algebra: ModalAlgebra,
    pub validates_target: bool,
    pub validates_pattern: bool,
}

/// Exhaustively check, over all base-validating algebras with at most
/// `test_atom_bound` atoms (subdirectly irreducible only, for the formula
/// variant), that the target and the pattern members are validated by the
/// same algebras. Returns the first discrepancy in canonical enumeration
/// order, or `None` when the bounded classes agree.
pub fn verify_equivalence(
    target: &Target,
    pattern: &RefutationPattern,
    base: BaseLogic,
    test_atom_bound: usize,
    budget: &SearchBudget,
) -> Result<Option<Discrepancy>> {
    let specs: Vec<CanonicalSpec> = (0..pattern.entries.len())
        .map(|i| pattern.entry_spec(i))
        .collect::<Result<_>>()?;
    for n in 1..=test_atom_bound {
        for frame in frames_up_to_iso(n, |f| base.admits_frame(f)) {
            let b = frame.dual_algebra();
            if pattern.formula_variant && !b.is_si() {
                continue;
            }
            let validates_target = target.validates(&b, budget)?;
            let mut validates_pattern = true;
            for spec in &specs {
                let refuted = if pattern.formula_variant {
                    refutes_formula(&b, spec, budget)?
                } else {
                    refutes_rule(&b, spec, budget)?
                };
                if refuted {
                    validates_pattern = false;
                    break;
                }
            }
            if validates_target != validates_pattern {
                return Ok(Some(Discrepancy {
                    algebra: b,
                    validates_target,
                    validates_pattern,
                }));
            }
        }
    }
    Ok(None)
}
