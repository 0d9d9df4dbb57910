//! Finite Kripke frames, relation powers, the finite frame/algebra
//! duality, and the frame-side stability and closed-domain predicates.
//!
//! Points are identified with the atoms of the dual algebra: point sets
//! are bit masks with point order equal to declaration order.

use serde::{Deserialize, Serialize};

use crate::algebra::ModalAlgebra;
use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Frame {
    labels: Vec<String>,
    /// Row `x` holds the successor set of point `x`.
    rel: Vec<u64>,
}

/// A total map between the point sets of two frames, by point index.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PointMap {
    pub map: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct FrameJson {
    points: Vec<String>,
    edges: Vec<(String, String)>,
}

impl Frame {
    pub fn new(labels: Vec<String>, edges: &[(usize, usize)]) -> Result<Frame> {
        let n = labels.len();
        if n > crate::algebra::MAX_ATOMS {
            return Err(Error::invalid(format!("too many points: {n}")));
        }
        let mut seen = std::collections::BTreeSet::new();
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::invalid(format!("duplicate point label '{label}'")));
            }
        }
        let mut rel = vec![0u64; n];
        for &(x, y) in edges {
            if x >= n || y >= n {
                return Err(Error::invalid("edge endpoint out of range"));
            }
            rel[x] |= 1 << y;
        }
        Ok(Frame { labels, rel })
    }

    pub fn from_rows(labels: Vec<String>, rel: Vec<u64>) -> Result<Frame> {
        let n = labels.len();
        if rel.len() != n {
            return Err(Error::invalid(
                "relation row count differs from point count",
            ));
        }
        let mask = if n == 0 { 0 } else { u64::MAX >> (64 - n) };
        if rel.iter().any(|&row| row & !mask != 0) {
            return Err(Error::invalid("relation row uses points out of range"));
        }
        let mut edges = Vec::new();
        for (x, &row) in rel.iter().enumerate() {
            for y in 0..n {
                if row >> y & 1 == 1 {
                    edges.push((x, y));
                }
            }
        }
        Frame::new(labels, &edges)
    }

    /// The irreflexive chain `a -> b -> c -> ...` on `n` points, labelled
    /// alphabetically while the alphabet lasts.
    pub fn chain(n: usize) -> Frame {
        let labels = (0..n)
            .map(|i| {
                if n <= 26 {
                    ((b'a' + i as u8) as char).to_string()
                } else {
                    format!("x{i}")
                }
            })
            .collect();
        let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
        Frame::new(labels, &edges).expect("chain is well-formed")
    }

    pub fn point_count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Successor set of point `x` as a bit mask.
    pub fn successors(&self, x: usize) -> u64 {
        self.rel[x]
    }

    pub fn rows(&self) -> &[u64] {
        &self.rel
    }

    pub fn has_edge(&self, x: usize, y: usize) -> bool {
        self.rel[x] >> y & 1 == 1
    }

    /// A point set from labels, as a bit mask.
    pub fn point_set<S: AsRef<str>>(&self, labels: &[S]) -> Result<u64> {
        let mut bits = 0u64;
        for label in labels {
            let i = self
                .label_index(label.as_ref())
                .ok_or_else(|| Error::invalid(format!("unknown point '{}'", label.as_ref())))?;
            bits |= 1 << i;
        }
        Ok(bits)
    }

    pub fn point_set_to_labels(&self, bits: u64) -> Vec<String> {
        let mut out: Vec<String> = (0..self.point_count())
            .filter(|&i| bits >> i & 1 == 1)
            .map(|i| self.labels[i].clone())
            .collect();
        out.sort();
        out
    }

    /// Rows of the boolean matrix power `R^k`; `k = 0` is the identity.
    pub fn relation_power(&self, k: u32) -> Vec<u64> {
        let n = self.point_count();
        let mut acc: Vec<u64> = (0..n).map(|x| 1 << x).collect();
        for _ in 0..k {
            acc = compose(&acc, &self.rel, n);
        }
        acc
    }

    /// Whether `R^{m+1}` is contained in `R`.
    pub fn is_pretransitive(&self, m: u32) -> bool {
        let pow = self.relation_power(m + 1);
        pow.iter().zip(&self.rel).all(|(&p, &r)| p & !r == 0)
    }

    /// The dual algebra: atoms are the points and `dia(atom_y)` is the
    /// preimage `R^{-1}[{y}]`.
    pub fn dual_algebra(&self) -> ModalAlgebra {
        let n = self.point_count();
        let dia_bits: Vec<u64> = (0..n)
            .map(|y| {
                let mut bits = 0u64;
                for x in 0..n {
                    if self.has_edge(x, y) {
                        bits |= 1 << x;
                    }
                }
                bits
            })
            .collect();
        ModalAlgebra::new(self.labels.clone(), dia_bits).expect("dual is well-formed")
    }

    /// The dual frame of a finite modal algebra: points are the atoms and
    /// `x R y` iff `atom_x <= dia(atom_y)`.
    pub fn from_algebra(a: &ModalAlgebra) -> Frame {
        let n = a.atom_count();
        let rel: Vec<u64> = (0..n)
            .map(|x| {
                let mut row = 0u64;
                for y in 0..n {
                    if a.leq(a.atom(x), a.dia(a.atom(y))) {
                        row |= 1 << y;
                    }
                }
                row
            })
            .collect();
        Frame::from_rows(a.labels().to_vec(), rel).expect("dual frame is well-formed")
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut edges = Vec::new();
        for x in 0..self.point_count() {
            for y in 0..self.point_count() {
                if self.has_edge(x, y) {
                    edges.push((self.labels[x].clone(), self.labels[y].clone()));
                }
            }
        }
        serde_json::to_value(FrameJson {
            points: self.labels.clone(),
            edges,
        })
        .expect("frame serialization cannot fail")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Frame> {
        let parsed: FrameJson = serde_json::from_value(value.clone())
            .map_err(|e| Error::invalid(format!("frame JSON: {e}")))?;
        let stub = Frame::new(parsed.points, &[])?;
        let mut edges = Vec::new();
        for (src, dst) in &parsed.edges {
            let x = stub
                .label_index(src)
                .ok_or_else(|| Error::invalid(format!("unknown edge source '{src}'")))?;
            let y = stub
                .label_index(dst)
                .ok_or_else(|| Error::invalid(format!("unknown edge target '{dst}'")))?;
            edges.push((x, y));
        }
        Frame::new(stub.labels, &edges)
    }

    /// Encode the relation as a single word, row-major. Requires
    /// `n * n <= 64`.
    pub fn relation_code(&self) -> u64 {
        let n = self.point_count();
        assert!(n * n <= 64, "relation code needs n*n <= 64");
        let mut code = 0u64;
        for (x, &row) in self.rel.iter().enumerate() {
            code |= row << (x * n);
        }
        code
    }

    /// The minimal relation code over all relabelings; equal codes mean
    /// isomorphic frames.
    pub fn canonical_code(&self) -> u64 {
        let n = self.point_count();
        let code = self.relation_code();
        let mut best = code;
        permute_each(n, |perm| {
            let candidate = apply_perm(code, perm, n);
            if candidate < best {
                best = candidate;
            }
        });
        best
    }

    pub fn is_isomorphic_to(&self, other: &Frame) -> bool {
        self.point_count() == other.point_count() && self.canonical_code() == other.canonical_code()
    }
}

fn compose(r: &[u64], s: &[u64], n: usize) -> Vec<u64> {
    (0..n)
        .map(|x| {
            let mut row = 0u64;
            for (y, &target_row) in s.iter().enumerate().take(n) {
                if r[x] >> y & 1 == 1 {
                    row |= target_row;
                }
            }
            row
        })
        .collect()
}

fn apply_perm(code: u64, perm: &[usize], n: usize) -> u64 {
    let mut out = 0u64;
    for x in 0..n {
        for y in 0..n {
            if code >> (x * n + y) & 1 == 1 {
                out |= 1 << (perm[x] * n + perm[y]);
            }
        }
    }
    out
}

fn permute_each(n: usize, mut body: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (0..n).collect();
    fn heap(k: usize, perm: &mut Vec<usize>, body: &mut impl FnMut(&[usize])) {
        if k <= 1 {
            body(perm);
            return;
        }
        for i in 0..k {
            heap(k - 1, perm, body);
            if k.is_multiple_of(2) {
                perm.swap(i, k - 1);
            } else {
                perm.swap(0, k - 1);
            }
        }
    }
    if n == 0 {
        body(&perm);
    } else {
        heap(n, &mut perm, &mut body);
    }
}

/// All frames on `n` labelled points `x0..x{n-1}`, ascending by relation
/// code.
pub fn enumerate_frames(n: usize) -> impl Iterator<Item = Frame> {
    assert!(n * n <= 40, "labelled enumeration limited to n <= 6");
    let labels: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    let count: u64 = 1u64 << (n * n);
    (0..count).map(move |code| frame_from_code(labels.clone(), code, n))
}

pub(crate) fn frame_from_code(labels: Vec<String>, code: u64, n: usize) -> Frame {
    let mask = if n == 0 { 0 } else { u64::MAX >> (64 - n) };
    let rel: Vec<u64> = (0..n).map(|x| (code >> (x * n)) & mask).collect();
    Frame::from_rows(labels, rel).expect("code is well-formed")
}

/// Representatives of the isomorphism classes of frames on `n` points
/// satisfying the predicate, ascending by canonical relation code. The
/// predicate is applied to every labelled frame, so it must be
/// isomorphism-invariant for the result to cover every class.
pub fn frames_up_to_iso(n: usize, mut pred: impl FnMut(&Frame) -> bool) -> Vec<Frame> {
    let labels: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    let mask = if n == 0 { 0 } else { u64::MAX >> (64 - n) };
    frames_up_to_iso_by_rows(n, |code| {
        let rel: Vec<u64> = (0..n).map(|x| (code >> (x * n)) & mask).collect();
        let frame = Frame {
            labels: labels.clone(),
            rel,
        };
        pred(&frame)
    })
}

/// Rows-level variant of [`frames_up_to_iso`] that avoids building a
/// `Frame` per candidate; the predicate receives the row-major relation
/// code. Used for the larger exhaustive sweeps.
pub fn frames_up_to_iso_by_rows(n: usize, mut pred: impl FnMut(u64) -> bool) -> Vec<Frame> {
    assert!(n * n <= 40, "labelled enumeration limited to n <= 6");
    let labels: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    let perms = all_permutations(n);
    let mut codes = std::collections::BTreeSet::new();
    let count: u64 = 1u64 << (n * n);
    for code in 0..count {
        if !pred(code) {
            continue;
        }
        let mut best = code;
        for perm in &perms {
            let candidate = apply_perm(code, perm, n);
            if candidate < best {
                best = candidate;
            }
        }
        codes.insert(best);
    }
    codes
        .into_iter()
        .map(|code| frame_from_code(labels.clone(), code, n))
        .collect()
}

/// Pretransitivity `R^{m+1} ⊆ R` evaluated directly on a relation code.
pub fn code_is_pretransitive(code: u64, n: usize, m: u32) -> bool {
    debug_assert!(n <= 6);
    let mask = if n == 0 { 0 } else { u64::MAX >> (64 - n) };
    let mut rel = [0u64; 6];
    for (x, row) in rel.iter_mut().enumerate().take(n) {
        *row = (code >> (x * n)) & mask;
    }
    let mut pow = rel;
    for _ in 0..m {
        let mut next = [0u64; 6];
        for (x, out) in next.iter_mut().enumerate().take(n) {
            let mut row = 0u64;
            for (y, &rel_row) in rel.iter().enumerate().take(n) {
                if pow[x] >> y & 1 == 1 {
                    row |= rel_row;
                }
            }
            *out = row;
        }
        pow = next;
    }
    (0..n).all(|x| pow[x] & !rel[x] == 0)
}

fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    permute_each(n, |perm| out.push(perm.to_vec()));
    out
}

impl PointMap {
    pub fn new(map: Vec<usize>) -> PointMap {
        PointMap { map }
    }

    pub fn identity(n: usize) -> PointMap {
        PointMap {
            map: (0..n).collect(),
        }
    }

    pub fn apply(&self, x: usize) -> usize {
        self.map[x]
    }

    /// Image of a source point set.
    pub fn image(&self, set: u64) -> u64 {
        let mut out = 0u64;
        for (x, &fx) in self.map.iter().enumerate() {
            if set >> x & 1 == 1 {
                out |= 1 << fx;
            }
        }
        out
    }

    pub fn is_surjective(&self, target_points: usize) -> bool {
        let mut covered = 0u64;
        for &fx in &self.map {
            covered |= 1 << fx;
        }
        covered.count_ones() as usize == target_points
    }

    fn check_total(&self, src: &Frame, dst: &Frame) -> Result<()> {
        if self.map.len() != src.point_count() {
            return Err(Error::invalid("map length differs from source point count"));
        }
        if self.map.iter().any(|&fx| fx >= dst.point_count()) {
            return Err(Error::invalid("map target out of range"));
        }
        Ok(())
    }

    /// `x R y` implies `f(x) Q f(y)`.
    pub fn is_stable(&self, src: &Frame, dst: &Frame) -> Result<bool> {
        self.check_total(src, dst)?;
        for x in 0..src.point_count() {
            for y in 0..src.point_count() {
                if src.has_edge(x, y) && !dst.has_edge(self.map[x], self.map[y]) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// The closed domain condition for a target point set `d`:
    /// `Q[f(x)] ∩ d != ∅` implies `f(R[x]) ∩ d != ∅` for every source
    /// point `x`.
    pub fn satisfies_cdc(&self, src: &Frame, dst: &Frame, d: u64) -> Result<bool> {
        self.satisfies_m_cdc(src, dst, d, 1)
    }

    /// The m-step closed domain condition: for all `1 <= k <= m`,
    /// `Q^k[f(x)] ∩ d != ∅` implies `f(R^k[x]) ∩ d != ∅`.
    pub fn satisfies_m_cdc(&self, src: &Frame, dst: &Frame, d: u64, m: u32) -> Result<bool> {
        self.check_total(src, dst)?;
        for k in 1..=m {
            let src_pow = src.relation_power(k);
            let dst_pow = dst.relation_power(k);
            for x in 0..src.point_count() {
                if dst_pow[self.map[x]] & d != 0 && self.image(src_pow[x]) & d == 0 {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// The five-point frame with a length-3 spine and one extra child of
    /// the root.
    pub(crate) fn frame_y() -> Frame {
        Frame::new(
            vec![
                "y0".into(),
                "y1".into(),
                "y2".into(),
                "y3".into(),
                "y4".into(),
            ],
            &[(0, 1), (1, 2), (2, 3), (0, 4)],
        )
        .unwrap()
    }

    /// The six-point variant whose extra branch has length two.
    pub(crate) fn frame_y_prime() -> Frame {
        Frame::new(
            vec![
                "z0".into(),
                "z1".into(),
                "z2".into(),
                "z3".into(),
                "z4".into(),
                "z5".into(),
            ],
            &[(0, 1), (1, 2), (2, 3), (0, 4), (4, 5)],
        )
        .unwrap()
    }

    /// The unique stable surjection from frame Y onto the 4-chain.
    pub(crate) fn y_onto_chain() -> PointMap {
        PointMap::new(vec![0, 1, 2, 3, 1])
    }

    /// The unique stable surjection from frame Y' onto the 4-chain.
    pub(crate) fn y_prime_onto_chain() -> PointMap {
        PointMap::new(vec![0, 1, 2, 3, 1, 2])
    }

    #[test]
    fn dual_of_chain_has_preimage_diamonds() {
        let a = Frame::chain(4).dual_algebra();
        assert_eq!(
            a.element_to_labels(a.dia(a.element_from_labels(&["b"]).unwrap())),
            vec!["a"]
        );
        assert_eq!(
            a.element_to_labels(a.dia(a.element_from_labels(&["c"]).unwrap())),
            vec!["b"]
        );
        assert_eq!(
            a.element_to_labels(a.dia(a.element_from_labels(&["d"]).unwrap())),
            vec!["c"]
        );
        assert_eq!(a.dia(a.element_from_labels(&["a"]).unwrap()), a.bot());
    }

    #[test]
    fn dual_of_reflexive_point() {
        let f = Frame::new(vec!["w".into()], &[(0, 0)]).unwrap();
        let a = f.dual_algebra();
        assert_eq!(a.dia(a.top()), a.top());
    }

    #[test]
    fn dual_roundtrip_is_identity() {
        for n in 0..=4 {
            for frame in enumerate_frames(n) {
                assert_eq!(Frame::from_algebra(&frame.dual_algebra()), frame);
            }
        }
    }

    #[test]
    fn relation_power_on_chain() {
        let f = Frame::chain(4);
        assert!(f.is_pretransitive(3));
        assert_eq!(f.relation_power(4), vec![0, 0, 0, 0]);
        let id = f.relation_power(0);
        assert_eq!(id, vec![0b0001, 0b0010, 0b0100, 0b1000]);
    }

    #[test]
    fn two_cycle_is_not_transitive() {
        let f = Frame::new(vec!["x".into(), "y".into()], &[(0, 1), (1, 0)]).unwrap();
        assert!(!f.is_pretransitive(1));
        assert_eq!(f.relation_power(2), vec![0b01, 0b10]);
    }

    #[test]
    fn stable_surjections_of_the_closing_example() {
        let x = Frame::chain(4);
        let y = frame_y();
        let y_prime = frame_y_prime();
        let d = x.point_set(&["d"]).unwrap();

        let f = y_onto_chain();
        assert!(f.is_stable(&y, &x).unwrap());
        assert!(f.is_surjective(4));
        assert!(f.satisfies_cdc(&y, &x, d).unwrap());

        let g = y_prime_onto_chain();
        assert!(g.is_stable(&y_prime, &x).unwrap());
        assert!(g.is_surjective(4));
        assert!(!g.satisfies_cdc(&y_prime, &x, d).unwrap());
    }

    #[test]
    fn identity_map_satisfies_everything() {
        let f = frame_y();
        let id = PointMap::identity(f.point_count());
        assert!(id.is_stable(&f, &f).unwrap());
        for d in 0..(1u64 << f.point_count()) {
            for m in 1..=3 {
                assert!(id.satisfies_m_cdc(&f, &f, d, m).unwrap());
            }
        }
    }

    #[test]
    fn canonical_codes_identify_isomorphic_frames() {
        let a = Frame::new(vec!["x".into(), "y".into()], &[(0, 1)]).unwrap();
        let b = Frame::new(vec!["u".into(), "v".into()], &[(1, 0)]).unwrap();
        assert!(a.is_isomorphic_to(&b));
        let c = Frame::new(vec!["u".into(), "v".into()], &[(0, 0)]).unwrap();
        assert!(!a.is_isomorphic_to(&c));
    }

    #[test]
    fn iso_class_counts_for_small_sizes() {
        assert_eq!(frames_up_to_iso(1, |_| true).len(), 2);
        assert_eq!(frames_up_to_iso(2, |_| true).len(), 10);
        assert_eq!(frames_up_to_iso(3, |_| true).len(), 104);
    }

    #[test]
    fn json_roundtrip() {
        let f = frame_y();
        assert_eq!(Frame::from_json(&f.to_json()).unwrap(), f);
    }
}
