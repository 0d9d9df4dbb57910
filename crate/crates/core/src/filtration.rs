//! Definable filtration constructions on finite modal algebras: least,
//! greatest, Lemmon, and the pre-transitive construction that iterates the
//! least filtration diamond, plus a verifier for the definable-filtration
//! contract.
//!
//! All four constructions share the same carrier: the Boolean subalgebra
//! of `A` generated by the values of `theta_prime` under the valuation,
//! represented by the partition of `A`'s atoms into cells. They differ
//! only in the diamond placed on that subalgebra.

use std::fmt;

use crate::algebra::{Element, ModalAlgebra, Partition, Valuation};
use crate::error::{Error, Result};
use crate::formula::{Formula, FormulaSet};

/// Cell-count cap for the pre-transitive construction, whose join is
/// truncated at `2^cells` iterations.
const MAX_FILTRATION_CELLS: usize = 16;

/// The result of a filtration: the subalgebra as a partition of the
/// original atoms, the new diamond packaged as a standalone algebra whose
/// atoms are the cells, the transported valuation, and the closed domain.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Filtration {
    /// Cells of the subalgebra, as elements of the original algebra.
    pub cells: Partition,
    /// The filtrated algebra; atom `i` is `cells[i]`.
    pub algebra: ModalAlgebra,
    /// The valuation on the filtrated algebra.
    pub valuation: Valuation,
    /// `{ V(phi) : dia phi in theta }`, as elements of the filtrated
    /// algebra, sorted and deduplicated.
    pub domain: Vec<Element>,
    pub theta: FormulaSet,
    pub theta_prime: FormulaSet,
}

impl Filtration {
    /// The inclusion of a filtrated element back into the original
    /// algebra: the union of its cells.
    pub fn embed(&self, a: Element) -> Result<Element> {
        if a.width() != self.cells.cells.len() as u32 {
            return Err(Error::WidthMismatch {
                expected: self.cells.cells.len() as u32,
                found: a.width(),
            });
        }
        let width = self.cells.cells.first().map(|c| c.width()).unwrap_or(0);
        let mut bits = 0u64;
        for (i, cell) in self.cells.cells.iter().enumerate() {
            if a.contains_atom(i) {
                bits |= cell.bits();
            }
        }
        Ok(Element::from_raw(bits, width))
    }
}

struct Carrier<'a> {
    a: &'a ModalAlgebra,
    cells: Vec<Element>,
}

impl Carrier<'_> {
    /// The least subalgebra element above `x`: the union of the cells
    /// meeting `x`.
    fn cover(&self, x: Element) -> u64 {
        let mut bits = 0u64;
        for (i, cell) in self.cells.iter().enumerate() {
            if cell.bits() & x.bits() != 0 {
                bits |= 1 << i;
            }
        }
        bits
    }

    /// The cell mask of an element that is a union of cells.
    fn restrict(&self, x: Element) -> u64 {
        let mut bits = 0u64;
        let mut seen = 0u64;
        for (i, cell) in self.cells.iter().enumerate() {
            if self.a.leq(*cell, x) {
                bits |= 1 << i;
                seen |= cell.bits();
            }
        }
        assert_eq!(seen, x.bits(), "element is not a union of cells");
        bits
    }

    fn cell_label(&self, i: usize) -> String {
        let names: Vec<&str> = self.cells[i]
            .atoms()
            .map(|k| self.a.labels()[k].as_str())
            .collect();
        names.join("_")
    }
}

fn check_closed(theta: &FormulaSet, what: &str) -> Result<()> {
    if !theta.is_subformula_closed() {
        return Err(Error::precondition(format!(
            "{what} must be subformula-closed"
        )));
    }
    Ok(())
}

/// Shared setup: evaluate the generators, build the cell partition, the
/// closed domain, and the transported valuation.
fn carrier<'a>(
    a: &'a ModalAlgebra,
    v: &Valuation,
    theta: &FormulaSet,
    theta_prime: &FormulaSet,
) -> Result<(Carrier<'a>, Vec<Element>)> {
    check_closed(theta, "theta")?;
    check_closed(theta_prime, "theta_prime")?;
    if !theta.is_subset(theta_prime) {
        return Err(Error::precondition(
            "theta must be contained in theta_prime",
        ));
    }
    let gens: Vec<Element> = theta_prime
        .iter()
        .map(|f| a.eval(v, f))
        .collect::<Result<_>>()?;
    let cells = a.boolean_subalgebra(&gens).cells;
    let mut domain_a = Vec::new();
    for f in theta.iter() {
        if let Formula::Dia(inner) = f {
            domain_a.push(a.eval(v, inner)?);
        }
    }
    domain_a.sort_unstable();
    domain_a.dedup();
    Ok((Carrier { a, cells }, domain_a))
}

fn assemble(
    carrier: &Carrier<'_>,
    v: &Valuation,
    theta: &FormulaSet,
    theta_prime: &FormulaSet,
    domain_a: &[Element],
    dia_cells: Vec<u64>,
) -> Result<Filtration> {
    let labels: Vec<String> = (0..carrier.cells.len())
        .map(|i| carrier.cell_label(i))
        .collect();
    let algebra = ModalAlgebra::new(labels, dia_cells)?;
    let mut valuation = Valuation::new();
    for var in theta_prime.vars() {
        if theta_prime.contains(&Formula::var(var.clone())) {
            if let Some(value) = v.get(&var) {
                valuation.set(var, algebra.element(carrier.restrict(value)));
            }
        }
    }
    let mut domain: Vec<Element> = domain_a
        .iter()
        .map(|&d| algebra.element(carrier.restrict(d)))
        .collect();
    domain.sort_unstable();
    domain.dedup();
    Ok(Filtration {
        cells: Partition {
            cells: carrier.cells.clone(),
        },
        algebra,
        valuation,
        domain,
        theta: theta.clone(),
        theta_prime: theta_prime.clone(),
    })
}

/// The joins of subsets of the domain, including the empty join.
fn domain_join_closure(a: &ModalAlgebra, domain: &[Element]) -> Vec<Element> {
    let mut out = vec![a.bot()];
    for &d in domain {
        let mut extended: Vec<Element> = out.iter().map(|&x| a.join(x, d)).collect();
        out.append(&mut extended);
        out.sort_unstable();
        out.dedup();
    }
    out
}

/// The least filtration: the new diamond of a cell is the least
/// subalgebra element above its original diamond.
pub fn least_filtration(
    a: &ModalAlgebra,
    v: &Valuation,
    theta: &FormulaSet,
    theta_prime: &FormulaSet,
) -> Result<Filtration> {
    let (carrier, domain_a) = carrier(a, v, theta, theta_prime)?;
    let dia_cells = (0..carrier.cells.len())
        .map(|i| carrier.cover(a.dia(carrier.cells[i])))
        .collect();
    assemble(&carrier, v, theta, theta_prime, &domain_a, dia_cells)
}

/// The greatest filtration: the meet of `dia b` over the join-closure
/// members `b` above the argument. The empty meet is 1.
pub fn greatest_filtration(
    a: &ModalAlgebra,
    v: &Valuation,
    theta: &FormulaSet,
    theta_prime: &FormulaSet,
) -> Result<Filtration> {
    let (carrier, domain_a) = carrier(a, v, theta, theta_prime)?;
    let join_closure = domain_join_closure(a, &domain_a);
    let dia_cells = (0..carrier.cells.len())
        .map(|i| {
            let cell = carrier.cells[i];
            let mut acc = a.top();
            for &b in &join_closure {
                if a.leq(cell, b) {
                    acc = a.meet(acc, a.dia(b));
                }
            }
            carrier.restrict(acc)
        })
        .collect();
    assemble(&carrier, v, theta, theta_prime, &domain_a, dia_cells)
}

/// The Lemmon filtration: like the greatest, but a join-closure member `b`
/// qualifies when `dia a <= dia b` and `dia<=1 a <= dia<=1 b`.
pub fn lemmon_filtration(
    a: &ModalAlgebra,
    v: &Valuation,
    theta: &FormulaSet,
    theta_prime: &FormulaSet,
) -> Result<Filtration> {
    let (carrier, domain_a) = carrier(a, v, theta, theta_prime)?;
    let join_closure = domain_join_closure(a, &domain_a);
    let dia_cells = (0..carrier.cells.len())
        .map(|i| {
            let cell = carrier.cells[i];
            let mut acc = a.top();
            for &b in &join_closure {
                if a.leq(a.dia(cell), a.dia(b)) && a.leq(a.dia_le(1, cell), a.dia_le(1, b)) {
                    acc = a.meet(acc, a.dia(b));
                }
            }
            carrier.restrict(acc)
        })
        .collect();
    assemble(&carrier, v, theta, theta_prime, &domain_a, dia_cells)
}

/// The definable filtration for `dia^{m+1} p -> dia p`: extend `theta` to
/// `theta_prime(theta, m)`, take the least filtration diamond `dia_0` on
/// the generated subalgebra, and put `dia_1 a = \/ { dia_0^{km+1} a }`,
/// truncated at `k <= 2^cells` iterations, which covers the full join.
/// Requires the input algebra to validate the axiom.
pub fn gabbay_filtration(
    a: &ModalAlgebra,
    v: &Valuation,
    theta: &FormulaSet,
    m: u32,
) -> Result<Filtration> {
    if !a.is_pretransitive(m) {
        return Err(Error::precondition(format!(
            "input algebra does not validate dia^{} p -> dia p",
            m + 1
        )));
    }
    let theta_prime = theta.theta_prime(m)?;
    let (carrier, domain_a) = carrier(a, v, theta, &theta_prime)?;
    if carrier.cells.len() > MAX_FILTRATION_CELLS {
        return Err(Error::BudgetExceeded {
            what: "iterating the filtration diamond".into(),
            needed: carrier.cells.len() as u64,
            budget: MAX_FILTRATION_CELLS as u64,
        });
    }
    let least: Vec<u64> = (0..carrier.cells.len())
        .map(|i| carrier.cover(a.dia(carrier.cells[i])))
        .collect();
    let truncation = 1u64 << carrier.cells.len();
    let dia_cells = (0..carrier.cells.len())
        .map(|i| iterated_diamond(&least, 1 << i, m, truncation))
        .collect();
    assemble(&carrier, v, theta, &theta_prime, &domain_a, dia_cells)
}

/// `\/ { dia_0^{km+1} x : 0 <= k <= truncation }` over cell masks.
fn iterated_diamond(least: &[u64], x: u64, m: u32, truncation: u64) -> u64 {
    let apply = |mask: u64| -> u64 {
        let mut out = 0u64;
        for (i, &entry) in least.iter().enumerate() {
            if mask >> i & 1 == 1 {
                out |= entry;
            }
        }
        out
    };
    let mut current = apply(x);
    let mut acc = current;
    for _ in 0..truncation {
        for _ in 0..m {
            current = apply(current);
        }
        acc |= current;
    }
    acc
}

/// Exposed for the truncation-soundness check: the pre-transitive diamond
/// of a single cell with an explicit truncation bound.
pub fn gabbay_diamond_truncated(
    a: &ModalAlgebra,
    v: &Valuation,
    theta: &FormulaSet,
    m: u32,
    cell_index: usize,
    truncation: u64,
) -> Result<u64> {
    let theta_prime = theta.theta_prime(m)?;
    let (carrier, _) = carrier(a, v, theta, &theta_prime)?;
    let least: Vec<u64> = (0..carrier.cells.len())
        .map(|i| carrier.cover(a.dia(carrier.cells[i])))
        .collect();
    Ok(iterated_diamond(&least, 1 << cell_index, m, truncation))
}

/// A violated condition of the definable-filtration contract.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum FiltrationFault {
    /// The cells differ from the Boolean subalgebra generated by the
    /// valuation image of `theta_prime`.
    SubalgebraMismatch,
    /// The transported valuation disagrees with the original on a
    /// variable of `theta_prime`, or is nonzero outside it.
    ValuationMismatch { var: String },
    /// The recorded closed domain differs from `{V(phi) : dia phi in
    /// theta}`.
    DomainMismatch,
    /// The inclusion fails stability (or the new diamond fails
    /// normality) on a cell.
    NotStable { cell: usize },
    /// The level-`k` closed domain condition fails on a domain element.
    CdcFailure { domain_index: usize, k: u32 },
    /// The filtration lemma fails: a `theta` formula changes value.
    LemmaFailure { formula: String },
}

impl fmt::Display for FiltrationFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FiltrationFault::SubalgebraMismatch => {
                write!(
                    f,
                    "cells are not the subalgebra generated by V[theta_prime]"
                )
            }
            FiltrationFault::ValuationMismatch { var } => {
                write!(f, "transported valuation disagrees on '{var}'")
            }
            FiltrationFault::DomainMismatch => write!(f, "closed domain set is wrong"),
            FiltrationFault::NotStable { cell } => {
                write!(f, "inclusion is not stable/normal on cell {cell}")
            }
            FiltrationFault::CdcFailure { domain_index, k } => {
                write!(
                    f,
                    "closed domain condition fails at level {k} on domain element {domain_index}"
                )
            }
            FiltrationFault::LemmaFailure { formula } => {
                write!(f, "filtration lemma fails on '{formula}'")
            }
        }
    }
}

/// Check every condition of the definable-filtration contract at the
/// given closed-domain level, returning all violations.
pub fn verify_definable_filtration(
    a: &ModalAlgebra,
    v: &Valuation,
    theta: &FormulaSet,
    theta_prime: &FormulaSet,
    result: &Filtration,
    level: u32,
) -> Result<Vec<FiltrationFault>> {
    let mut faults = Vec::new();
    let (carrier, domain_a) = carrier(a, v, theta, theta_prime)?;
    let fp = &result.algebra;

    if carrier.cells != result.cells.cells {
        faults.push(FiltrationFault::SubalgebraMismatch);
        return Ok(faults);
    }

    // Valuation agreement on theta_prime variables, zero outside.
    for var in theta_prime.vars() {
        if theta_prime.contains(&Formula::var(var.clone())) {
            let original = v.get(&var).unwrap_or_else(|| a.bot());
            let transported = result.valuation.get(&var).unwrap_or_else(|| fp.bot());
            if result.embed(transported)? != original {
                faults.push(FiltrationFault::ValuationMismatch { var });
            }
        }
    }
    for (var, &value) in result.valuation.iter() {
        if !theta_prime.contains(&Formula::var(var.clone())) && value != fp.bot() {
            faults.push(FiltrationFault::ValuationMismatch { var: var.clone() });
        }
    }

    // Domain agreement.
    let expected_domain: Vec<Element> = {
        let mut out: Vec<Element> = domain_a
            .iter()
            .map(|&d| fp.element(carrier.restrict(d)))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    };
    if expected_domain != result.domain {
        faults.push(FiltrationFault::DomainMismatch);
    }

    // Stability of the inclusion on every cell: dia_A(cell) must lie below
    // the embedded new diamond of the cell.
    for i in 0..carrier.cells.len() {
        let original = a.dia(carrier.cells[i]);
        let filtrated = result.embed(fp.dia(fp.atom(i)))?;
        if !a.leq(original, filtrated) {
            faults.push(FiltrationFault::NotStable { cell: i });
        }
    }

    // Level-CDC: the inclusion must commute with the first `level` diamond
    // powers on the domain.
    for (domain_index, &d) in expected_domain.iter().enumerate() {
        for k in 1..=level {
            let inside = result.embed(fp.dia_pow(k, d))?;
            let outside = a.dia_pow(k, result.embed(d)?);
            if inside != outside {
                faults.push(FiltrationFault::CdcFailure { domain_index, k });
            }
        }
    }

    // Filtration lemma: every theta formula keeps its value.
    for f in theta.iter() {
        let original = a.eval(v, f)?;
        let filtrated = result.embed(fp.eval(&result.valuation, f)?)?;
        if original != filtrated {
            faults.push(FiltrationFault::LemmaFailure {
                formula: f.to_string(),
            });
        }
    }

    Ok(faults)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Frame;

    fn chain4() -> ModalAlgebra {
        Frame::chain(4).dual_algebra()
    }

    fn theta_p_diap() -> FormulaSet {
        let set: FormulaSet = [Formula::parse("dia p").unwrap()].into_iter().collect();
        set.subformula_closure()
    }

    fn valuation_p_is_d(a: &ModalAlgebra) -> Valuation {
        let mut v = Valuation::new();
        v.set("p", a.element_from_labels(&["d"]).unwrap());
        v
    }

    #[test]
    fn identity_filtration_when_generators_are_atoms() {
        let a = chain4();
        let mut v = Valuation::new();
        v.set("p1", a.atom(0));
        v.set("p2", a.atom(1));
        v.set("p3", a.atom(2));
        let theta: FormulaSet = ["p1", "p2", "p3"]
            .into_iter()
            .map(|s| Formula::parse(s).unwrap())
            .collect();
        let filt = least_filtration(&a, &v, &theta, &theta).unwrap();
        assert_eq!(filt.algebra.atom_count(), 4);
        for i in 0..4 {
            assert_eq!(
                filt.embed(filt.algebra.dia(filt.algebra.atom(i))).unwrap(),
                a.dia(filt.embed(filt.algebra.atom(i)).unwrap())
            );
        }
    }

    #[test]
    fn least_filtration_on_the_chain() {
        let a = chain4();
        let theta = theta_p_diap();
        let v = valuation_p_is_d(&a);
        let filt = least_filtration(&a, &v, &theta, &theta).unwrap();
        let expected_cells = vec![
            a.element_from_labels(&["a", "b"]).unwrap(),
            a.element_from_labels(&["c"]).unwrap(),
            a.element_from_labels(&["d"]).unwrap(),
        ];
        assert_eq!(filt.cells.cells, expected_cells);
        let fp = &filt.algebra;
        let by_label = |l: &str| fp.atom(fp.label_index(l).unwrap());
        assert_eq!(fp.dia(by_label("d")), by_label("c"));
        assert_eq!(fp.dia(by_label("c")), by_label("a_b"));
        assert_eq!(fp.dia(by_label("a_b")), by_label("a_b"));
    }

    #[test]
    fn trivial_valuation_collapses_to_two_elements() {
        let a = chain4();
        let theta: FormulaSet = [Formula::var("p")].into_iter().collect();
        let filt = least_filtration(&a, &Valuation::new(), &theta, &theta).unwrap();
        assert_eq!(filt.algebra.atom_count(), 1);
        let top = filt.algebra.top();
        // dia 1 != 0 in the chain, so the collapsed diamond of 1 is 1.
        assert_eq!(filt.algebra.dia(top), top);
    }

    #[test]
    fn greatest_filtration_conventions() {
        let a = chain4();
        // No diamond formula in theta, so D is empty and every nonzero
        // diamond is the empty meet, which is 1.
        let theta: FormulaSet = [Formula::var("p")].into_iter().collect();
        let v = valuation_p_is_d(&a);
        let filt = greatest_filtration(&a, &v, &theta, &theta).unwrap();
        assert!(filt.domain.is_empty());
        let fp = &filt.algebra;
        for i in 0..fp.atom_count() {
            assert_eq!(fp.dia(fp.atom(i)), fp.top());
        }
        assert_eq!(fp.dia(fp.bot()), fp.bot());
    }

    #[test]
    fn least_below_greatest_on_the_chain() {
        let a = chain4();
        let theta = theta_p_diap();
        let v = valuation_p_is_d(&a);
        let least = least_filtration(&a, &v, &theta, &theta).unwrap();
        let greatest = greatest_filtration(&a, &v, &theta, &theta).unwrap();
        assert_eq!(least.cells, greatest.cells);
        let fp = &least.algebra;
        for i in 0..fp.atom_count() {
            assert!(fp.leq(fp.dia(fp.atom(i)), greatest.algebra.dia(fp.atom(i))));
        }
    }

    #[test]
    fn lemmon_empty_domain_uses_the_empty_meet() {
        let a = chain4();
        let theta: FormulaSet = [Formula::var("p")].into_iter().collect();
        let v = valuation_p_is_d(&a);
        let filt = lemmon_filtration(&a, &v, &theta, &theta).unwrap();
        assert!(filt.domain.is_empty());
        let fp = &filt.algebra;
        // The only join-closure member is 0, which qualifies for no
        // nonzero cell, so every cell gets the empty meet: 1.
        for i in 0..fp.atom_count() {
            assert_eq!(fp.dia(fp.atom(i)), fp.top());
        }
        assert_eq!(fp.dia(fp.bot()), fp.bot());
    }

    #[test]
    fn lemmon_matches_original_diamond_on_domain_members() {
        let a = chain4();
        let theta = theta_p_diap();
        let v = valuation_p_is_d(&a);
        let filt = lemmon_filtration(&a, &v, &theta, &theta).unwrap();
        for &d in &filt.domain {
            assert_eq!(
                filt.embed(filt.algebra.dia(d)).unwrap(),
                a.dia(filt.embed(d).unwrap())
            );
        }
    }

    #[test]
    fn all_constructions_verify_at_level_one() {
        let a = chain4();
        let theta = theta_p_diap();
        let v = valuation_p_is_d(&a);
        for build in [least_filtration, greatest_filtration, lemmon_filtration] {
            let filt = build(&a, &v, &theta, &theta).unwrap();
            let faults = verify_definable_filtration(&a, &v, &theta, &theta, &filt, 1).unwrap();
            assert!(faults.is_empty(), "{faults:?}");
        }
    }

    #[test]
    fn pretransitive_filtration_on_the_chain() {
        let a = chain4();
        let theta = theta_p_diap();
        let v = valuation_p_is_d(&a);
        let filt = gabbay_filtration(&a, &v, &theta, 3).unwrap();
        // theta_prime separates every point, so the carrier is A itself
        // and the new diamond still validates dia^4 x <= dia x.
        assert_eq!(filt.algebra.atom_count(), 4);
        assert!(filt.algebra.is_pretransitive(3));
        let faults =
            verify_definable_filtration(&a, &v, &theta, &filt.theta_prime.clone(), &filt, 3)
                .unwrap();
        assert!(faults.is_empty(), "{faults:?}");
    }

    #[test]
    fn pretransitive_filtration_requires_the_axiom() {
        let cycle = Frame::new(vec!["x".into(), "y".into()], &[(0, 1), (1, 0)])
            .unwrap()
            .dual_algebra();
        let theta: FormulaSet = [Formula::var("p")].into_iter().collect();
        assert!(gabbay_filtration(&cycle, &Valuation::new(), &theta, 1).is_err());
    }

    #[test]
    fn empty_theta_gives_degenerate_filtration() {
        let a = chain4();
        let theta = FormulaSet::new();
        let filt = gabbay_filtration(&a, &Valuation::new(), &theta, 3).unwrap();
        assert_eq!(filt.algebra.atom_count(), 1);
        assert!(filt.domain.is_empty());
        let faults = verify_definable_filtration(
            &a,
            &Valuation::new(),
            &theta,
            &filt.theta_prime.clone(),
            &filt,
            3,
        )
        .unwrap();
        assert!(faults.is_empty(), "{faults:?}");
    }

    #[test]
    fn truncation_is_sound() {
        let a = chain4();
        let theta = theta_p_diap();
        let v = valuation_p_is_d(&a);
        let filt = gabbay_filtration(&a, &v, &theta, 3).unwrap();
        let cells = filt.cells.cells.len();
        let k = 1u64 << cells;
        for i in 0..cells {
            let once = gabbay_diamond_truncated(&a, &v, &theta, 3, i, k).unwrap();
            let twice = gabbay_diamond_truncated(&a, &v, &theta, 3, i, 2 * k).unwrap();
            assert_eq!(once, twice);
        }
    }

    #[test]
    fn tampered_diamond_is_reported() {
        let a = chain4();
        let theta = theta_p_diap();
        let v = valuation_p_is_d(&a);
        let filt = least_filtration(&a, &v, &theta, &theta).unwrap();
        // Zero out a diamond entry: stability breaks.
        let mut bad_dia: Vec<u64> = (0..filt.algebra.atom_count())
            .map(|i| filt.algebra.dia(filt.algebra.atom(i)).bits())
            .collect();
        let tampered_cell = filt
            .algebra
            .label_index("c")
            .expect("the chain filtration has a 'c' cell");
        bad_dia[tampered_cell] = 0;
        let tampered = Filtration {
            algebra: ModalAlgebra::new(filt.algebra.labels().to_vec(), bad_dia).unwrap(),
            ..filt.clone()
        };
        let faults = verify_definable_filtration(&a, &v, &theta, &theta, &tampered, 1).unwrap();
        assert!(faults
            .iter()
            .any(|f| matches!(f, FiltrationFault::NotStable { .. })));
    }
}
