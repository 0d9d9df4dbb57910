//! Search for stable embeddings between finite modal algebras, subject to
//! a closed domain condition of a given level.
//!
//! Embeddings are enumerated through their dual presentation: a surjection
//! of the atoms of the codomain onto the atoms of the domain. This makes
//! the Boolean-embedding constraints automatic and turns stability into a
//! pairwise condition on the dual relations, which the backtracking search
//! prunes on as soon as a pair of atoms is assigned.

use crate::algebra::{Element, ModalAlgebra};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::SearchBudget;

/// A stable embedding `h: A -> B` presented by the dual surjection of
/// atoms, together with the checked closed-domain level and domain.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct StableEmbedding {
    /// `sigma: atoms(B) -> atoms(A)`.
    pub atom_map: Vec<usize>,
    /// 0 means no closed domain condition was required.
    pub level: u32,
    /// The domain the condition was checked for, as elements of `A`.
    pub domain: Vec<Element>,
    src_atoms: u32,
    dst_atoms: u32,
}

impl StableEmbedding {
    /// The induced element map `h(a)`: the union of the fibers over the
    /// atoms below `a`.
    pub fn element_map(&self, a: Element) -> Result<Element> {
        if a.width() != self.src_atoms {
            return Err(Error::WidthMismatch {
                expected: self.src_atoms,
                found: a.width(),
            });
        }
        let mut bits = 0u64;
        for (x, &sx) in self.atom_map.iter().enumerate() {
            if a.contains_atom(sx) {
                bits |= 1 << x;
            }
        }
        Ok(Element::from_raw(bits, self.dst_atoms))
    }
}

struct Search<'a> {
    rel_a: Vec<u64>,
    rel_b: Vec<u64>,
    pow_a: Vec<Vec<u64>>,
    pow_b: Vec<Vec<u64>>,
    domains: Vec<u64>,
    level: u32,
    n_a: usize,
    n_b: usize,
    sigma: Vec<usize>,
    covered: Vec<u32>,
    steps: u64,
    budget: &'a SearchBudget,
}

impl Search<'_> {
    fn run(&mut self) -> Result<Option<Vec<usize>>> {
        self.assign(0)
    }

    fn assign(&mut self, x: usize) -> Result<Option<Vec<usize>>> {
        if x == self.n_b {
            if self.covered.iter().all(|&c| c > 0) && self.cdc_holds() {
                return Ok(Some(self.sigma.clone()));
            }
            return Ok(None);
        }
        // Every missing target still needs a preimage among the remaining
        // positions.
        let uncovered = self.covered.iter().filter(|&&c| c == 0).count();
        if uncovered > self.n_b - x {
            return Ok(None);
        }
        for u in 0..self.n_a {
            self.steps += 1;
            if self.steps > self.budget.max_surjections {
                return Err(Error::BudgetExceeded {
                    what: "searching for a stable embedding".into(),
                    needed: self.steps,
                    budget: self.budget.max_surjections,
                });
            }
            if !self.stable_with_prefix(x, u) {
                continue;
            }
            self.sigma.push(u);
            self.covered[u] += 1;
            let found = self.assign(x + 1)?;
            self.covered[u] -= 1;
            self.sigma.pop();
            if found.is_some() {
                return Ok(found);
            }
        }
        Ok(None)
    }

    /// Stability is `x R_B y  =>  sigma(x) R_A sigma(y)`, checked against
    /// all previously assigned positions and the self loop.
    fn stable_with_prefix(&self, x: usize, u: usize) -> bool {
        if self.rel_b[x] >> x & 1 == 1 && self.rel_a[u] >> u & 1 != 1 {
            return false;
        }
        for (y, &sy) in self.sigma.iter().enumerate() {
            if self.rel_b[x] >> y & 1 == 1 && self.rel_a[u] >> sy & 1 != 1 {
                return false;
            }
            if self.rel_b[y] >> x & 1 == 1 && self.rel_a[sy] >> u & 1 != 1 {
                return false;
            }
        }
        true
    }

    fn cdc_holds(&self) -> bool {
        for k in 1..=self.level {
            let pa = &self.pow_a[k as usize];
            let pb = &self.pow_b[k as usize];
            for &d in &self.domains {
                let mut fiber = 0u64;
                for (x, &sx) in self.sigma.iter().enumerate() {
                    if d >> sx & 1 == 1 {
                        fiber |= 1 << x;
                    }
                }
                for (x, &sx) in self.sigma.iter().enumerate() {
                    if pa[sx] & d != 0 && pb[x] & fiber == 0 {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Search for a stable embedding `A -> B` satisfying the level-`level`
/// closed domain condition for every element of `domain`. Level 0 asks for
/// stability only. The search is exhaustive over atom surjections in
/// lexicographic order, so the returned witness is the least one.
pub fn find_stable_embedding(
    a: &ModalAlgebra,
    b: &ModalAlgebra,
    domain: &[Element],
    level: u32,
    budget: &SearchBudget,
) -> Result<Option<StableEmbedding>> {
    for d in domain {
        if d.width() != a.atom_count() as u32 {
            return Err(Error::WidthMismatch {
                expected: a.atom_count() as u32,
                found: d.width(),
            });
        }
    }
    let n_a = a.atom_count();
    let n_b = b.atom_count();
    if n_a > n_b {
        return Ok(None);
    }
    let frame_a = Frame::from_algebra(a);
    let frame_b = Frame::from_algebra(b);
    let pow_a: Vec<Vec<u64>> = (0..=level).map(|k| frame_a.relation_power(k)).collect();
    let pow_b: Vec<Vec<u64>> = (0..=level).map(|k| frame_b.relation_power(k)).collect();
    let mut search = Search {
        rel_a: frame_a.rows().to_vec(),
        rel_b: frame_b.rows().to_vec(),
        pow_a,
        pow_b,
        domains: domain.iter().map(|d| d.bits()).collect(),
        level,
        n_a,
        n_b,
        sigma: Vec::with_capacity(n_b),
        covered: vec![0; n_a],
        steps: 0,
        budget,
    };
    Ok(search.run()?.map(|atom_map| StableEmbedding {
        atom_map,
        level,
        domain: domain.to_vec(),
        src_atoms: n_a as u32,
        dst_atoms: n_b as u32,
    }))
}

/// Whether some subdirectly irreducible homomorphic image of `b` admits a
/// stable embedding from `a` with the level-`level` condition for
/// `domain`.
pub fn embeds_into_si_image(
    a: &ModalAlgebra,
    domain: &[Element],
    b: &ModalAlgebra,
    level: u32,
    budget: &SearchBudget,
) -> Result<bool> {
    for (image, _) in b.si_quotients() {
        if find_stable_embedding(a, &image, domain, level, budget)?.is_some() {
            return Ok(true);
        }
    }
    Ok(false)
}
