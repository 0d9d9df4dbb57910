//! Finite modal algebras as powerset Boolean algebras over a set of atoms,
//! with the diamond specified atom-wise.
//!
//! Elements are bit vectors of width `atom_count`; the diamond of an
//! arbitrary element is the join of the per-atom diamonds over the atoms
//! below it, so `dia 0 = 0` and `dia (a | b) = dia a | dia b` hold by
//! construction. The box is derived as `~dia~` and never stored.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formula::Formula;
use crate::rules::Rule;
use crate::SearchBudget;

pub const MAX_ATOMS: usize = 32;

/// An element of a finite modal algebra: a subset of the atoms.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Element {
    bits: u64,
    width: u32,
}

impl Element {
    pub(crate) fn from_raw(bits: u64, width: u32) -> Element {
        Element { bits, width }
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn contains_atom(&self, atom: usize) -> bool {
        self.bits >> atom & 1 == 1
    }

    /// Indices of the atoms below this element, ascending.
    pub fn atoms(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.width as usize).filter(|&i| self.contains_atom(i))
    }

    pub fn count_atoms(&self) -> u32 {
        self.bits.count_ones()
    }

    fn check_width(&self, expected: u32) -> Result<()> {
        if self.width != expected {
            return Err(Error::WidthMismatch {
                expected,
                found: self.width,
            });
        }
        Ok(())
    }
}

impl fmt::Debug for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Element({:#b}/{})", self.bits, self.width)
    }
}

/// A finite modal algebra: the powerset of `labels` with an additive
/// diamond given by its value on each atom.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ModalAlgebra {
    labels: Vec<String>,
    dia_atom: Vec<Element>,
}

/// A valuation: a finite map from variable names to elements. Unmapped
/// variables denote the bottom element.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Valuation {
    map: BTreeMap<String, Element>,
}

impl Valuation {
    pub fn new() -> Valuation {
        Valuation::default()
    }

    pub fn set(&mut self, var: impl Into<String>, value: Element) {
        self.map.insert(var.into(), value);
    }

    pub fn get(&self, var: &str) -> Option<Element> {
        self.map.get(var).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Element)> {
        self.map.iter()
    }
}

impl FromIterator<(String, Element)> for Valuation {
    fn from_iter<T: IntoIterator<Item = (String, Element)>>(iter: T) -> Self {
        Valuation {
            map: iter.into_iter().collect(),
        }
    }
}

/// A box filter, represented by its generator `e` with `e <= box e`;
/// the filter is the up-set of `e`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct BoxFilter {
    pub generator: Element,
}

/// A partition of the atoms of an algebra into cells, each cell an
/// element. Cells are ordered by their smallest atom.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Partition {
    pub cells: Vec<Element>,
}

/// The surjection `a -> a /\ e` from an algebra onto its quotient by a box
/// filter, expressed on the bit-vector representations.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct QuotientMap {
    source_width: u32,
    /// Atom indices of the source that survive in the quotient, ascending.
    kept: Vec<usize>,
}

impl QuotientMap {
    pub fn apply(&self, a: Element) -> Result<Element> {
        a.check_width(self.source_width)?;
        let mut bits = 0u64;
        for (j, &i) in self.kept.iter().enumerate() {
            if a.contains_atom(i) {
                bits |= 1 << j;
            }
        }
        Ok(Element {
            bits,
            width: self.kept.len() as u32,
        })
    }

    pub fn kept_atoms(&self) -> &[usize] {
        &self.kept
    }
}

#[derive(Serialize, Deserialize)]
struct AlgebraJson {
    atoms: Vec<String>,
    diamond: BTreeMap<String, Vec<String>>,
}

impl ModalAlgebra {
    /// Build an algebra from atom labels and the per-atom diamond bit masks.
    pub fn new(labels: Vec<String>, dia_atom_bits: Vec<u64>) -> Result<ModalAlgebra> {
        let n = labels.len();
        if n > MAX_ATOMS {
            return Err(Error::invalid(format!("too many atoms: {n} > {MAX_ATOMS}")));
        }
        if dia_atom_bits.len() != n {
            return Err(Error::invalid(
                "diamond table length differs from atom count",
            ));
        }
        let mask = Self::mask(n);
        for &bits in &dia_atom_bits {
            if bits & !mask != 0 {
                return Err(Error::invalid("diamond entry uses atoms out of range"));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::invalid(format!("duplicate atom label '{label}'")));
            }
        }
        let width = n as u32;
        let dia_atom = dia_atom_bits
            .into_iter()
            .map(|bits| Element { bits, width })
            .collect();
        Ok(ModalAlgebra { labels, dia_atom })
    }

    fn mask(n: usize) -> u64 {
        if n == 0 {
            0
        } else {
            u64::MAX >> (64 - n)
        }
    }

    pub fn atom_count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    fn width(&self) -> u32 {
        self.labels.len() as u32
    }

    pub fn bot(&self) -> Element {
        Element {
            bits: 0,
            width: self.width(),
        }
    }

    pub fn top(&self) -> Element {
        Element {
            bits: Self::mask(self.atom_count()),
            width: self.width(),
        }
    }

    pub fn atom(&self, i: usize) -> Element {
        assert!(i < self.atom_count(), "atom index out of range");
        Element {
            bits: 1 << i,
            width: self.width(),
        }
    }

    /// The element with the given bit pattern.
    pub fn element(&self, bits: u64) -> Element {
        assert_eq!(
            bits & !Self::mask(self.atom_count()),
            0,
            "bits out of range"
        );
        Element {
            bits,
            width: self.width(),
        }
    }

    /// All `2^n` elements, ascending by bit pattern.
    pub fn elements(&self) -> impl Iterator<Item = Element> + '_ {
        let width = self.width();
        (0..=Self::mask(self.atom_count())).map(move |bits| Element { bits, width })
    }

    pub fn meet(&self, a: Element, b: Element) -> Element {
        self.element(a.bits & b.bits)
    }

    pub fn join(&self, a: Element, b: Element) -> Element {
        self.element(a.bits | b.bits)
    }

    pub fn not(&self, a: Element) -> Element {
        self.element(!a.bits & Self::mask(self.atom_count()))
    }

    pub fn leq(&self, a: Element, b: Element) -> bool {
        a.bits & !b.bits == 0
    }

    pub fn dia(&self, a: Element) -> Element {
        let mut bits = 0u64;
        for i in a.atoms() {
            bits |= self.dia_atom[i].bits;
        }
        self.element(bits)
    }

    pub fn box_(&self, a: Element) -> Element {
        self.not(self.dia(self.not(a)))
    }

    pub fn dia_pow(&self, k: u32, a: Element) -> Element {
        (0..k).fold(a, |acc, _| self.dia(acc))
    }

    pub fn box_pow(&self, k: u32, a: Element) -> Element {
        (0..k).fold(a, |acc, _| self.box_(acc))
    }

    /// `a /\ box a /\ ... /\ box^n a`.
    pub fn box_le(&self, n: u32, a: Element) -> Element {
        let mut acc = a;
        let mut pow = a;
        for _ in 0..n {
            pow = self.box_(pow);
            acc = self.meet(acc, pow);
        }
        acc
    }

    /// `a | dia a | ... | dia^n a`.
    pub fn dia_le(&self, n: u32, a: Element) -> Element {
        let mut acc = a;
        let mut pow = a;
        for _ in 0..n {
            pow = self.dia(pow);
            acc = self.join(acc, pow);
        }
        acc
    }

    /// The stabilized value of the descending chain `box_le(n, a)`; the
    /// least element of the form `box_le(n, a)`, reached in at most
    /// `atom_count` proper steps.
    pub fn box_le_fix(&self, a: Element) -> Element {
        let mut t = a;
        loop {
            let next = self.meet(a, self.box_(t));
            if next == t {
                return t;
            }
            t = next;
        }
    }

    /// Homomorphic extension of the valuation.
    pub fn eval(&self, v: &Valuation, f: &Formula) -> Result<Element> {
        Ok(match f {
            Formula::Var(name) => match v.get(name) {
                Some(e) => {
                    e.check_width(self.width())?;
                    e
                }
                None => self.bot(),
            },
            Formula::Bot => self.bot(),
            Formula::Top => self.top(),
            Formula::Not(a) => self.not(self.eval(v, a)?),
            Formula::And(a, b) => {
                let ea = self.eval(v, a)?;
                if ea == self.bot() {
                    ea
                } else {
                    self.meet(ea, self.eval(v, b)?)
                }
            }
            Formula::Or(a, b) => {
                let ea = self.eval(v, a)?;
                if ea == self.top() {
                    ea
                } else {
                    self.join(ea, self.eval(v, b)?)
                }
            }
            Formula::Imp(a, b) => {
                let ea = self.eval(v, a)?;
                if ea == self.bot() {
                    self.top()
                } else {
                    self.join(self.not(ea), self.eval(v, b)?)
                }
            }
            Formula::Iff(a, b) => {
                let ea = self.eval(v, a)?;
                let eb = self.eval(v, b)?;
                self.not(self.element(ea.bits ^ eb.bits))
            }
            Formula::Dia(a) => self.dia(self.eval(v, a)?),
            Formula::Box(a) => self.box_(self.eval(v, a)?),
        })
    }

    fn check_valuation_budget(&self, var_count: usize, budget: &SearchBudget) -> Result<()> {
        let bits_per_var = self.atom_count() as u64;
        let total_bits = bits_per_var * var_count as u64;
        let needed = if total_bits >= 63 {
            u64::MAX
        } else {
            1u64 << total_bits
        };
        if needed > budget.max_valuations {
            return Err(Error::BudgetExceeded {
                what: format!(
                    "enumerating valuations of {} variable(s) over a {}-atom algebra",
                    var_count,
                    self.atom_count()
                ),
                needed,
                budget: budget.max_valuations,
            });
        }
        Ok(())
    }

    fn for_each_valuation<F>(&self, vars: &[String], mut body: F) -> Result<Option<Valuation>>
    where
        F: FnMut(&Valuation) -> Result<bool>,
    {
        let width = self.width();
        let limit = Self::mask(self.atom_count());
        let mut counters = vec![0u64; vars.len()];
        loop {
            let v: Valuation = vars
                .iter()
                .zip(&counters)
                .map(|(name, &bits)| (name.clone(), Element { bits, width }))
                .collect();
            if body(&v)? {
                return Ok(Some(v));
            }
            let mut i = 0;
            loop {
                if i == counters.len() {
                    return Ok(None);
                }
                if counters[i] == limit {
                    counters[i] = 0;
                    i += 1;
                } else {
                    counters[i] += 1;
                    break;
                }
            }
        }
    }

    /// A valuation witnessing failure of the formula, if one exists within
    /// the budget.
    pub fn find_countervaluation(
        &self,
        f: &Formula,
        budget: &SearchBudget,
    ) -> Result<Option<Valuation>> {
        let vars: Vec<String> = f.vars().into_iter().collect();
        self.check_valuation_budget(vars.len(), budget)?;
        let top = self.top();
        self.for_each_valuation(&vars, |v| Ok(self.eval(v, f)? != top))
    }

    /// Exhaustive validity of a formula over all valuations of its
    /// variables.
    pub fn validates_formula(&self, f: &Formula, budget: &SearchBudget) -> Result<bool> {
        Ok(self.find_countervaluation(f, budget)?.is_none())
    }

    /// A valuation making all premises equal 1 and every conclusion differ
    /// from 1, if one exists within the budget.
    pub fn find_rule_countervaluation(
        &self,
        rule: &Rule,
        budget: &SearchBudget,
    ) -> Result<Option<Valuation>> {
        let vars: Vec<String> = rule
            .premises
            .vars()
            .union(&rule.conclusions.vars())
            .cloned()
            .collect();
        self.check_valuation_budget(vars.len(), budget)?;
        let top = self.top();
        self.for_each_valuation(&vars, |v| {
            for gamma in rule.premises.iter() {
                if self.eval(v, gamma)? != top {
                    return Ok(false);
                }
            }
            for delta in rule.conclusions.iter() {
                if self.eval(v, delta)? == top {
                    return Ok(false);
                }
            }
            Ok(true)
        })
    }

    /// Exhaustive validity of a multi-conclusion rule.
    pub fn validates_rule(&self, rule: &Rule, budget: &SearchBudget) -> Result<bool> {
        Ok(self.find_rule_countervaluation(rule, budget)?.is_none())
    }

    /// Whether `dia^{m+1} a <= dia a` for every element, i.e. the algebra
    /// validates `dia^{m+1} p -> dia p`. By additivity it suffices to check
    /// the atoms. `m >= 1` is assumed.
    pub fn is_pretransitive(&self, m: u32) -> bool {
        (0..self.atom_count()).all(|i| {
            let a = self.atom(i);
            self.leq(self.dia_pow(m + 1, a), self.dia(a))
        })
    }

    /// The least opremum candidate: the join over all atoms `u` of the
    /// stabilized box tower of the coatom above `u`. Every opremum lies
    /// between this element and 1.
    fn opremum_floor(&self) -> Element {
        let mut acc = self.bot();
        for u in 0..self.atom_count() {
            let coatom = self.not(self.atom(u));
            acc = self.join(acc, self.box_le_fix(coatom));
        }
        acc
    }

    /// An opremum: an element `c != 1` such that for every `a != 1` some
    /// `box_le(n, a)` lies below `c`. When several exist, the result is the
    /// largest under the numeric order on bit vectors (the complement of
    /// the first atom outside the least opremum).
    pub fn opremum(&self) -> Option<Element> {
        if self.atom_count() == 0 {
            return None;
        }
        let floor = self.opremum_floor();
        if floor == self.top() {
            return None;
        }
        let missing = (0..self.atom_count()).find(|&u| !floor.contains_atom(u))?;
        Some(self.not(self.atom(missing)))
    }

    /// Subdirect irreducibility, decided via opremum existence.
    pub fn is_si(&self) -> bool {
        self.opremum().is_some()
    }

    /// All box filters, ascending by generator bit pattern.
    pub fn box_filters(&self) -> Vec<BoxFilter> {
        self.elements()
            .filter(|&e| self.leq(e, self.box_(e)))
            .map(|generator| BoxFilter { generator })
            .collect()
    }

    /// Quotient by a box filter: the algebra on the atoms below the
    /// generator `e`, with `dia'(x) = dia(x) /\ e`, together with the
    /// surjection `a -> a /\ e`.
    pub fn quotient(&self, filter: &BoxFilter) -> (ModalAlgebra, QuotientMap) {
        let e = filter.generator;
        let kept: Vec<usize> = e.atoms().collect();
        let map = QuotientMap {
            source_width: self.width(),
            kept: kept.clone(),
        };
        let labels = kept.iter().map(|&i| self.labels[i].clone()).collect();
        let dia_bits = kept
            .iter()
            .map(|&i| {
                let restricted = self.meet(self.dia_atom[i], e);
                map.apply(restricted).expect("width checked").bits
            })
            .collect();
        let algebra = ModalAlgebra::new(labels, dia_bits).expect("quotient is well-formed");
        (algebra, map)
    }

    /// All quotients by box filters whose quotient algebra is subdirectly
    /// irreducible, deduplicated up to isomorphism. Ascending generator
    /// order; the first representative of each isomorphism class is kept.
    pub fn si_quotients(&self) -> Vec<(ModalAlgebra, QuotientMap)> {
        let mut out: Vec<(ModalAlgebra, QuotientMap)> = Vec::new();
        for filter in self.box_filters() {
            let (q, map) = self.quotient(&filter);
            if !q.is_si() {
                continue;
            }
            if out.iter().any(|(seen, _)| seen.is_isomorphic_to(&q)) {
                continue;
            }
            out.push((q, map));
        }
        out
    }

    /// The quotient by a box filter maximal among those containing
    /// `box_le(m, a)` and excluding `b`. Requires the algebra to validate
    /// `dia^{m+1} p -> dia p` and `box_le(m, a)` to not lie below `b`. The
    /// result is subdirectly irreducible, sends `box_le(m, a)` to 1, and
    /// sends `b` to a non-unit.
    pub fn si_witness_quotient(
        &self,
        a: Element,
        b: Element,
        m: u32,
    ) -> Result<(ModalAlgebra, QuotientMap)> {
        a.check_width(self.width())?;
        b.check_width(self.width())?;
        if !self.is_pretransitive(m) {
            return Err(Error::precondition(format!(
                "algebra does not validate dia^{} p -> dia p",
                m + 1
            )));
        }
        let g = self.box_le(m, a);
        if self.leq(g, b) {
            return Err(Error::precondition(
                "box_le(m, a) lies below b; no separating quotient exists",
            ));
        }
        // Maximal filter = minimal generator. Generators must be box
        // stable, lie below g (so the filter contains it), and not lie
        // below b (so the filter excludes it).
        let candidates: Vec<Element> = self
            .elements()
            .filter(|&e| self.leq(e, self.box_(e)) && self.leq(e, g) && !self.leq(e, b))
            .collect();
        let minimal = candidates
            .iter()
            .find(|&&e| !candidates.iter().any(|&e2| e2 != e && self.leq(e2, e)))
            .copied()
            .expect("box_le(m, a) itself is a candidate");
        let (q, map) = self.quotient(&BoxFilter { generator: minimal });
        debug_assert!(q.is_si());
        Ok((q, map))
    }

    /// The Boolean subalgebra generated by the given elements, represented
    /// by the partition of the atoms into the nonempty Boolean combinations
    /// of the generators. Cells are ordered by their smallest atom.
    pub fn boolean_subalgebra(&self, gens: &[Element]) -> Partition {
        let mut cells: Vec<(Vec<bool>, u64)> = Vec::new();
        for i in 0..self.atom_count() {
            let sig: Vec<bool> = gens.iter().map(|g| g.contains_atom(i)).collect();
            match cells.iter_mut().find(|(s, _)| *s == sig) {
                Some((_, bits)) => *bits |= 1 << i,
                None => cells.push((sig, 1 << i)),
            }
        }
        Partition {
            cells: cells
                .into_iter()
                .map(|(_, bits)| self.element(bits))
                .collect(),
        }
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut current: Vec<usize> = (0..n).collect();
        fn heap(k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if k <= 1 {
                out.push(current.clone());
                return;
            }
            for i in 0..k {
                heap(k - 1, current, out);
                if k.is_multiple_of(2) {
                    current.swap(i, k - 1);
                } else {
                    current.swap(0, k - 1);
                }
            }
        }
        heap(n, &mut current, &mut out);
        if n == 0 {
            out.push(Vec::new());
        }
        out
    }

    fn permute_bits(bits: u64, perm: &[usize]) -> u64 {
        let mut out = 0u64;
        for (i, &pi) in perm.iter().enumerate() {
            if bits >> i & 1 == 1 {
                out |= 1 << pi;
            }
        }
        out
    }

    /// Isomorphism up to relabeling of atoms, decided by exhaustive
    /// permutation search. Intended for desk-scale atom counts.
    pub fn is_isomorphic_to(&self, other: &ModalAlgebra) -> bool {
        if self.atom_count() != other.atom_count() {
            return false;
        }
        Self::permutations(self.atom_count())
            .into_iter()
            .any(|perm| {
                (0..self.atom_count()).all(|i| {
                    Self::permute_bits(self.dia_atom[i].bits, &perm) == other.dia_atom[perm[i]].bits
                })
            })
    }

    /// A canonical key for the pair (algebra, set of designated elements):
    /// the minimum over atom permutations of the relabeled diamond table
    /// followed by the sorted relabeled domain. Two pairs get equal keys
    /// exactly when some isomorphism carries one domain onto the other.
    pub fn canonical_key_with_domain(&self, domain: &[Element]) -> Vec<u64> {
        let n = self.atom_count();
        let mut best: Option<Vec<u64>> = None;
        for perm in Self::permutations(n) {
            let mut key = vec![0u64; n];
            for i in 0..n {
                key[perm[i]] = Self::permute_bits(self.dia_atom[i].bits, &perm);
            }
            let mut dom: Vec<u64> = domain
                .iter()
                .map(|d| Self::permute_bits(d.bits, &perm))
                .collect();
            dom.sort_unstable();
            dom.dedup();
            key.extend(dom);
            if best.as_ref().is_none_or(|b| key < *b) {
                best = Some(key);
            }
        }
        best.unwrap_or_default()
    }

    /// Serialize to the algebra JSON schema. Elements appear as
    /// lexicographically sorted atom-label lists.
    pub fn to_json(&self) -> serde_json::Value {
        let diamond: BTreeMap<String, Vec<String>> = self
            .labels
            .iter()
            .enumerate()
            .map(|(i, label)| (label.clone(), self.element_to_labels(self.dia_atom[i])))
            .collect();
        serde_json::to_value(AlgebraJson {
            atoms: self.labels.clone(),
            diamond,
        })
        .expect("algebra serialization cannot fail")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<ModalAlgebra> {
        let parsed: AlgebraJson = serde_json::from_value(value.clone())
            .map_err(|e| Error::invalid(format!("algebra JSON: {e}")))?;
        let n = parsed.atoms.len();
        let stub = ModalAlgebra::new(parsed.atoms, vec![0u64; n])?;
        let mut dia_bits = vec![0u64; n];
        for (label, targets) in &parsed.diamond {
            let i = stub
                .label_index(label)
                .ok_or_else(|| Error::invalid(format!("diamond key '{label}' is not an atom")))?;
            dia_bits[i] = stub.element_from_labels(targets)?.bits;
        }
        ModalAlgebra::new(stub.labels, dia_bits)
    }

    pub fn element_to_labels(&self, e: Element) -> Vec<String> {
        let mut out: Vec<String> = e.atoms().map(|i| self.labels[i].clone()).collect();
        out.sort();
        out
    }

    pub fn element_from_labels<S: AsRef<str>>(&self, labels: &[S]) -> Result<Element> {
        let mut bits = 0u64;
        for label in labels {
            let i = self
                .label_index(label.as_ref())
                .ok_or_else(|| Error::invalid(format!("unknown atom '{}'", label.as_ref())))?;
            bits |= 1 << i;
        }
        Ok(self.element(bits))
    }
}
