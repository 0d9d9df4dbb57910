//! Cross-module invariants checked against independent oracles: a direct
//! Kripke-semantics evaluator for the duality transport, brute-force map
//! enumeration for the embedding search, and the box-filter lattice for
//! subdirect irreducibility.

use stablecanon::algebra::{Element, Valuation};
use stablecanon::formula::Formula;
use stablecanon::frame::{enumerate_frames, frames_up_to_iso, Frame, PointMap};
use stablecanon::morphism::find_stable_embedding;
use stablecanon::SearchBudget;

fn budget() -> SearchBudget {
    SearchBudget::default()
}

/// Direct Kripke satisfaction: the truth set of a formula in a frame
/// model, computed point by point with explicit successor quantifiers.
fn kripke_truth_set(frame: &Frame, v: &[(String, u64)], f: &Formula) -> u64 {
    let lookup = |name: &str| {
        v.iter()
            .find(|(n, _)| n == name)
            .map(|&(_, bits)| bits)
            .unwrap_or(0)
    };
    let n = frame.point_count();
    let full = if n == 0 { 0 } else { u64::MAX >> (64 - n) };
    match f {
        Formula::Var(name) => lookup(name),
        Formula::Bot => 0,
        Formula::Top => full,
        Formula::Not(a) => !kripke_truth_set(frame, v, a) & full,
        Formula::And(a, b) => kripke_truth_set(frame, v, a) & kripke_truth_set(frame, v, b),
        Formula::Or(a, b) => kripke_truth_set(frame, v, a) | kripke_truth_set(frame, v, b),
        Formula::Imp(a, b) => {
            (!kripke_truth_set(frame, v, a) & full) | kripke_truth_set(frame, v, b)
        }
        Formula::Iff(a, b) => {
            let ta = kripke_truth_set(frame, v, a);
            let tb = kripke_truth_set(frame, v, b);
            !(ta ^ tb) & full
        }
        Formula::Dia(a) => {
            let ta = kripke_truth_set(frame, v, a);
            (0..n)
                .filter(|&x| frame.successors(x) & ta != 0)
                .fold(0, |acc, x| acc | 1 << x)
        }
        Formula::Box(a) => {
            let ta = kripke_truth_set(frame, v, a);
            (0..n)
                .filter(|&x| frame.successors(x) & !ta == 0)
                .fold(0, |acc, x| acc | 1 << x)
        }
    }
}

fn test_formulas() -> Vec<Formula> {
    [
        "p",
        "dia p",
        "box p",
        "dia dia p -> dia p",
        "box (p -> q) -> (box p -> box q)",
        "dia (p & q) <-> ~box ~(p & q)",
        "dia^3 p | box<=2 q",
        "p -> dia p",
    ]
    .into_iter()
    .map(|s| Formula::parse(s).unwrap())
    .collect()
}

#[test]
fn duality_transports_truth_sets() {
    for n in 0..=4 {
        for frame in frames_up_to_iso(n, |_| true) {
            let a = frame.dual_algebra();
            for f in test_formulas() {
                for p_bits in [0u64, 1 & a.top().bits(), a.top().bits()] {
                    let q_bits = a.top().bits() ^ p_bits;
                    let mut v = Valuation::new();
                    v.set("p", a.element(p_bits));
                    v.set("q", a.element(q_bits));
                    let algebra_side = a.eval(&v, &f).unwrap().bits();
                    let frame_side =
                        kripke_truth_set(&frame, &[("p".into(), p_bits), ("q".into(), q_bits)], &f);
                    assert_eq!(algebra_side, frame_side, "formula {f} on {n}-point frame");
                }
            }
        }
    }
}

#[test]
fn pretransitivity_agrees_with_validity_of_the_axiom() {
    for n in 1..=4 {
        for frame in frames_up_to_iso(n, |_| true) {
            let a = frame.dual_algebra();
            for m in 1..=3 {
                let axiom = Formula::parse(&format!("dia^{} p -> dia p", m + 1)).unwrap();
                assert_eq!(
                    a.validates_formula(&axiom, &budget()).unwrap(),
                    a.is_pretransitive(m),
                );
                assert_eq!(a.is_pretransitive(m), frame.is_pretransitive(m));
            }
        }
    }
}

/// Brute-force enumeration of stable surjections with the frame-side
/// m-step closed domain condition; the independent route to the
/// embedding search.
fn frame_side_surjection_exists(src: &Frame, dst: &Frame, domains: &[u64], level: u32) -> bool {
    let n_src = src.point_count();
    let n_dst = dst.point_count();
    if n_dst > n_src {
        return false;
    }
    if n_src == 0 {
        return n_dst == 0;
    }
    let mut map = vec![0usize; n_src];
    loop {
        let candidate = PointMap::new(map.clone());
        if candidate.is_surjective(n_dst) && candidate.is_stable(src, dst).unwrap() {
            let mut ok = true;
            for &d in domains {
                if !candidate.satisfies_m_cdc(src, dst, d, level).unwrap() {
                    ok = false;
                    break;
                }
            }
            if ok {
                return true;
            }
        }
        let mut i = 0;
        loop {
            if i == n_src {
                return false;
            }
            if map[i] + 1 == n_dst {
                map[i] = 0;
                i += 1;
            } else {
                map[i] += 1;
                break;
            }
        }
    }
}

#[test]
fn embedding_search_agrees_with_frame_side_enumeration() {
    let small: Vec<Frame> = (1..=2)
        .flat_map(|n| frames_up_to_iso(n, |_| true))
        .collect();
    let hosts: Vec<Frame> = (1..=3)
        .flat_map(|n| frames_up_to_iso(n, |_| true))
        .collect();
    for fa in &small {
        let a = fa.dual_algebra();
        for fb in &hosts {
            let b = fb.dual_algebra();
            for domain_bits in 0..(1u64 << fa.point_count()) {
                let domain = vec![a.element(domain_bits)];
                for level in 0..=2u32 {
                    let found = find_stable_embedding(&a, &b, &domain, level, &budget())
                        .unwrap()
                        .is_some();
                    let oracle = frame_side_surjection_exists(fb, fa, &[domain_bits], level);
                    assert_eq!(found, oracle, "A={fa:?} B={fb:?} d={domain_bits} k={level}");
                }
            }
        }
    }
}

#[test]
fn witness_level_is_monotone() {
    let small: Vec<Frame> = (1..=2)
        .flat_map(|n| frames_up_to_iso(n, |_| true))
        .collect();
    let hosts: Vec<Frame> = (1..=3)
        .flat_map(|n| frames_up_to_iso(n, |_| true))
        .collect();
    for fa in &small {
        let a = fa.dual_algebra();
        for fb in &hosts {
            let b = fb.dual_algebra();
            let domain: Vec<Element> = a.elements().collect();
            let mut exists = Vec::new();
            for level in 0..=3u32 {
                exists.push(
                    find_stable_embedding(&a, &b, &domain, level, &budget())
                        .unwrap()
                        .is_some(),
                );
            }
            for k in 1..exists.len() {
                // A witness at a higher level is a witness at every lower one.
                assert!(!exists[k] || exists[k - 1]);
            }
        }
    }
}

#[test]
fn stable_subalgebras_of_si_algebras_are_si() {
    let frames: Vec<Frame> = (1..=3)
        .flat_map(|n| frames_up_to_iso(n, |_| true))
        .collect();
    for fa in &frames {
        let a = fa.dual_algebra();
        for fb in &frames {
            let b = fb.dual_algebra();
            if !b.is_si() {
                continue;
            }
            if find_stable_embedding(&a, &b, &[], 0, &budget())
                .unwrap()
                .is_some()
            {
                assert!(a.is_si(), "stable subalgebra {fa:?} of s.i. {fb:?}");
            }
        }
    }
}

#[test]
fn m_cdc_is_dual_on_both_sides() {
    // For every stable surjective point map, the frame-side m-CDC holds
    // exactly when the dual Boolean embedding satisfies the algebra-side
    // inequality h(dia^k d) <= dia^k h(d).
    let frames: Vec<Frame> = (1..=3)
        .flat_map(|n| frames_up_to_iso(n, |_| true))
        .collect();
    for fa in &frames {
        for fb in &frames {
            if fb.point_count() > fa.point_count() {
                continue;
            }
            let a = fb.dual_algebra();
            let b = fa.dual_algebra();
            let n_src = fa.point_count();
            let n_dst = fb.point_count();
            let total = (n_dst as u64).pow(n_src as u32);
            for encoded in 0..total {
                let mut rest = encoded;
                let map: Vec<usize> = (0..n_src)
                    .map(|_| {
                        let v = (rest % n_dst as u64) as usize;
                        rest /= n_dst as u64;
                        v
                    })
                    .collect();
                let pm = PointMap::new(map.clone());
                if !pm.is_surjective(n_dst) || !pm.is_stable(fa, fb).unwrap() {
                    continue;
                }
                for d_bits in 0..(1u64 << n_dst) {
                    for m in 1..=2u32 {
                        let frame_side = pm.satisfies_m_cdc(fa, fb, d_bits, m).unwrap();
                        let d = a.element(d_bits);
                        let algebra_side = (1..=m).all(|k| {
                            let lhs = apply_sigma(&map, a.dia_pow(k, d), n_src);
                            let rhs = b.dia_pow(k, b.element(apply_sigma(&map, d, n_src)));
                            b.leq(b.element(lhs), rhs)
                        });
                        assert_eq!(frame_side, algebra_side);
                    }
                }
            }
        }
    }
}

fn apply_sigma(map: &[usize], target_elem: Element, n_src: usize) -> u64 {
    let mut bits = 0u64;
    for (x, &sx) in map.iter().enumerate().take(n_src) {
        if target_elem.contains_atom(sx) {
            bits |= 1 << x;
        }
    }
    bits
}

#[test]
fn p_morphisms_commute_with_diamond_under_duality() {
    // Stable + CDC for the full powerset is a p-morphism; its dual
    // commutes with the diamond exactly.
    let frames: Vec<Frame> = (1..=3)
        .flat_map(|n| frames_up_to_iso(n, |_| true))
        .collect();
    for fa in &frames {
        for fb in &frames {
            if fb.point_count() > fa.point_count() {
                continue;
            }
            let n_src = fa.point_count();
            let n_dst = fb.point_count();
            let all_subsets: Vec<u64> = (0..(1u64 << n_dst)).collect();
            let total = (n_dst as u64).pow(n_src as u32);
            for encoded in 0..total {
                let mut rest = encoded;
                let map: Vec<usize> = (0..n_src)
                    .map(|_| {
                        let v = (rest % n_dst as u64) as usize;
                        rest /= n_dst as u64;
                        v
                    })
                    .collect();
                let pm = PointMap::new(map.clone());
                if !pm.is_stable(fa, fb).unwrap() {
                    continue;
                }
                let full_cdc = all_subsets
                    .iter()
                    .all(|&d| pm.satisfies_cdc(fa, fb, d).unwrap());
                if !full_cdc {
                    continue;
                }
                let a = fb.dual_algebra();
                let b = fa.dual_algebra();
                for d_bits in &all_subsets {
                    let d = a.element(*d_bits);
                    let lhs = apply_sigma(&map, a.dia(d), n_src);
                    let rhs = b.dia(b.element(apply_sigma(&map, d, n_src)));
                    assert_eq!(b.element(lhs), rhs);
                }
            }
        }
    }
}

#[test]
fn eval_respects_boolean_laws() {
    // De Morgan, distributivity, and double negation composed through
    // eval, spot-checked over pseudo-random valuations on small frames.
    let frames = [Frame::chain(4), Frame::chain(1)];
    let phi = Formula::parse("dia p -> q").unwrap();
    let psi = Formula::parse("box (p | q)").unwrap();
    for frame in frames {
        let a = frame.dual_algebra();
        let mut seed = 0x2545f491u64;
        for _ in 0..32 {
            seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let mut v = Valuation::new();
            v.set("p", a.element(seed >> 7 & a.top().bits()));
            v.set("q", a.element(seed >> 23 & a.top().bits()));
            let ep = a.eval(&v, &phi).unwrap();
            let eq = a.eval(&v, &psi).unwrap();
            let de_morgan = Formula::parse("~(dia p -> q) <-> ~~~(dia p -> q)").unwrap();
            assert_eq!(a.eval(&v, &de_morgan).unwrap(), a.top());
            let and = a.eval(&v, &Formula::and(phi.clone(), psi.clone())).unwrap();
            assert_eq!(and, a.meet(ep, eq));
            let nand = a
                .eval(&v, &Formula::not(Formula::and(phi.clone(), psi.clone())))
                .unwrap();
            assert_eq!(nand, a.join(a.not(ep), a.not(eq)));
            let distributed = a
                .eval(
                    &v,
                    &Formula::and(phi.clone(), Formula::or(psi.clone(), phi.clone())),
                )
                .unwrap();
            assert_eq!(distributed, a.join(a.meet(ep, eq), a.meet(ep, ep)));
        }
    }
}

#[test]
fn lemmon_filtration_preserves_transitivity() {
    use stablecanon::filtration::lemmon_filtration;
    use stablecanon::formula::FormulaSet;
    let thetas: Vec<FormulaSet> = ["p", "dia p", "dia dia p", "p & dia p"]
        .into_iter()
        .map(|s| {
            let set: FormulaSet = [Formula::parse(s).unwrap()].into_iter().collect();
            set.subformula_closure()
        })
        .collect();
    for n in 1..=4 {
        for frame in frames_up_to_iso(n, |f| f.is_pretransitive(1)) {
            let a = frame.dual_algebra();
            for p_bits in 0..=a.top().bits() {
                let mut v = Valuation::new();
                v.set("p", a.element(p_bits));
                for theta in &thetas {
                    let filt = lemmon_filtration(&a, &v, theta, theta).unwrap();
                    assert!(
                        filt.algebra.is_pretransitive(1),
                        "transitivity lost: {frame:?} theta={theta:?}"
                    );
                }
            }
        }
    }
}

#[test]
fn si_quotient_list_is_complete_up_to_iso() {
    for n in 1..=3 {
        for frame in frames_up_to_iso(n, |_| true) {
            let a = frame.dual_algebra();
            let listed = a.si_quotients();
            for filter in a.box_filters() {
                let (q, _) = a.quotient(&filter);
                if q.is_si() {
                    assert!(listed.iter().any(|(seen, _)| seen.is_isomorphic_to(&q)));
                }
            }
        }
    }
}

#[test]
fn pattern_soundness_holds_at_mismatched_bounds() {
    // The soundness half of the equivalence does not depend on the
    // enumeration bound: any algebra refuting a pattern member refutes
    // the target, even when tested beyond the pattern's bound.
    use stablecanon::axiomatize::{refutation_patterns, BaseLogic, Target};
    use stablecanon::rules::refutes_rule;
    let target = Target::Formula(Formula::parse("dia p -> p").unwrap());
    let pattern = refutation_patterns(&target, BaseLogic::K, 2, &budget(), 1).unwrap();
    for n in 1..=3 {
        for frame in frames_up_to_iso(n, |_| true) {
            let b = frame.dual_algebra();
            let refutes_some = (0..pattern.entries.len()).any(|i| {
                let spec = pattern.entry_spec(i).unwrap();
                refutes_rule(&b, &spec, &budget()).unwrap()
            });
            if refutes_some {
                assert!(
                    !target.validates(&b, &budget()).unwrap(),
                    "soundness violated on {frame:?}"
                );
            }
        }
    }
}

#[test]
fn dual_roundtrip_up_to_six_points() {
    for n in 0..=6 {
        if n <= 4 {
            for frame in enumerate_frames(n) {
                assert_eq!(Frame::from_algebra(&frame.dual_algebra()), frame);
            }
        } else {
            // Spot coverage at five and six points: structured frames.
            let chain = Frame::chain(n);
            assert_eq!(Frame::from_algebra(&chain.dual_algebra()), chain);
            let labels: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
            let edges: Vec<(usize, usize)> =
                (0..n).flat_map(|x| (0..n).map(move |y| (x, y))).collect();
            let cluster = Frame::new(labels, &edges).unwrap();
            assert_eq!(Frame::from_algebra(&cluster.dual_algebra()), cluster);
        }
    }
}
