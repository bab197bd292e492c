//! Property tests over randomly structured inputs: operator arithmetic
//! laws, ring laws, link-product algebra, the comb splitting identity, and
//! conditional-process validity.

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use procmat::basis::{expand, reconstruct, HsBasis};
use procmat::comb::{random_comb, CombSampler, Node, NodeSeq};
use procmat::mpm::{random_mpm, Scenario};
use procmat::process::{
    born_probability, conditional_pm, identity_cj, link_product, random_instrument,
    trace_product, DualPairing,
};
use procmat::ring::RingElement;
use procmat::{LabeledOperator, Role, Subsystem, SystemLayout};

fn layout_of_dims(dims: &[usize]) -> SystemLayout {
    SystemLayout::new(
        dims.iter()
            .enumerate()
            .map(|(k, &d)| Subsystem::new(format!("S{k}"), d, Role::Input))
            .collect(),
    )
    .unwrap()
}

fn random_operator(layout: &SystemLayout, seed: u64) -> LabeledOperator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = layout.total_dim();
    let entries = DMatrix::from_fn(d, d, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    LabeledOperator::new(layout.clone(), entries).unwrap()
}

fn random_hermitian(layout: &SystemLayout, seed: u64) -> LabeledOperator {
    let m = random_operator(layout, seed);
    m.add(&m.adjoint()).unwrap().scale(Complex64::new(0.5, 0.0))
}

fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(2usize..=4, 1..=3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partial_trace_is_linear_and_order_independent(
        dims in dims_strategy(),
        seed in any::<u64>(),
    ) {
        let layout = layout_of_dims(&dims);
        let a = random_operator(&layout, seed);
        let b = random_operator(&layout, seed.wrapping_add(1));
        let sum = a.add(&b).unwrap();
        let first = layout.subsystems()[0].label.clone();
        let lhs = sum.partial_trace(&[&first]).unwrap();
        let rhs = a
            .partial_trace(&[&first])
            .unwrap()
            .add(&b.partial_trace(&[&first]).unwrap())
            .unwrap();
        prop_assert!(lhs.distance(&rhs).unwrap() < 1e-12);

        if dims.len() >= 2 {
            let second = layout.subsystems()[1].label.clone();
            let xy = a
                .partial_trace(&[&first]).unwrap()
                .partial_trace(&[&second]).unwrap();
            let yx = a
                .partial_trace(&[&second]).unwrap()
                .partial_trace(&[&first]).unwrap();
            prop_assert!(xy.distance(&yx).unwrap() < 1e-12);
            let joint = a.partial_trace(&[&second, &first]).unwrap();
            prop_assert!(xy.distance(&joint).unwrap() < 1e-12);
        }
    }

    #[test]
    fn hs_inner_is_conjugate_symmetric(
        dims in dims_strategy(),
        seed in any::<u64>(),
    ) {
        let layout = layout_of_dims(&dims);
        let a = random_operator(&layout, seed);
        let b = random_operator(&layout, seed.wrapping_add(7));
        let ab = a.hs_inner(&b).unwrap();
        let ba = b.hs_inner(&a).unwrap();
        prop_assert!((ab - ba.conj()).norm() < 1e-10);
        let aa = a.hs_inner(&a).unwrap();
        prop_assert!(aa.im.abs() < 1e-10 && aa.re >= 0.0);
    }

    #[test]
    fn tensor_then_trace_recovers_first_factor(
        da in 2usize..=4,
        db in 2usize..=4,
        seed in any::<u64>(),
    ) {
        let la = SystemLayout::new(vec![Subsystem::new("P", da, Role::Input)]).unwrap();
        let lb = SystemLayout::new(vec![Subsystem::new("Q", db, Role::Input)]).unwrap();
        let a = random_hermitian(&la, seed);
        let b = random_hermitian(&lb, seed.wrapping_add(3));
        let t = a.tensor(&b).unwrap();
        let back = t.partial_trace(&["Q"]).unwrap();
        let want = a.scale(b.trace());
        prop_assert!(back.distance(&want).unwrap() < 1e-12);
    }

    #[test]
    fn expansion_roundtrip_and_parseval(
        dims in prop::collection::vec(2usize..=3, 1..=3),
        seed in any::<u64>(),
    ) {
        let layout = layout_of_dims(&dims);
        let basis = HsBasis::default_for(&layout).unwrap();
        let m = random_hermitian(&layout, seed);
        let e = expand(&m, &basis).unwrap();
        let back = reconstruct(&e, &basis).unwrap();
        prop_assert!(back.distance(&m).unwrap() < 1e-10);
        let d = layout.total_dim() as f64;
        let sum: f64 = e.coeffs().values().map(|v| v.norm_sqr()).sum();
        let norm = m.hs_inner(&m).unwrap().re;
        prop_assert!((d * sum - norm).abs() < 1e-8 * norm.max(1.0));
    }

    #[test]
    fn ring_laws_and_keep_set_algebra(picks in prop::collection::vec(0u8..64, 2..6)) {
        // random idempotents built as products of one-tooth projectors over
        // a fixed six-label pool
        let labels = ["U", "V", "W", "X", "Y", "Z"];
        let one_tooth = |a: usize, b: usize| {
            RingElement::one()
                .sub(&RingElement::monomial([labels[b]]))
                .add(&RingElement::monomial([labels[a], labels[b]]))
        };
        let mut elements = Vec::new();
        for &p in &picks {
            let a = (p % 6) as usize;
            let b = ((p / 6) % 6) as usize;
            if a != b {
                elements.push(one_tooth(a, b));
            }
        }
        prop_assume!(elements.len() >= 2);
        let p = elements[0].clone();
        let q = elements[1].clone();
        prop_assert_eq!(p.mul(&q), q.mul(&p));
        prop_assert!(p.mul(&q).is_idempotent());

        let layout = SystemLayout::new(
            labels.iter().map(|l| Subsystem::new(*l, 2, Role::Input)).collect(),
        ).unwrap();
        let basis = HsBasis::default_for(&layout).unwrap();
        let kp = p.to_keep_set(&basis).unwrap();
        let kq = q.to_keep_set(&basis).unwrap();
        let union = procmat::ring::proj_union(&p, &q).unwrap();
        let inter = procmat::ring::proj_intersect(&p, &q).unwrap();
        prop_assert_eq!(union.to_keep_set(&basis).unwrap(), kp.union(&kq).unwrap());
        prop_assert_eq!(inter.to_keep_set(&basis).unwrap(), kp.intersect(&kq).unwrap());
    }

    #[test]
    fn apply_respects_ring_operations(
        seed in any::<u64>(),
        subset_a in 0u8..16,
        subset_b in 0u8..16,
    ) {
        let labels = ["P", "Q", "R", "S"];
        let pick = |bits: u8| -> Vec<String> {
            labels
                .iter()
                .enumerate()
                .filter(|(k, _)| bits & (1 << k) != 0)
                .map(|(_, l)| l.to_string())
                .collect()
        };
        let a = RingElement::monomial(pick(subset_a))
            .add(&RingElement::one().scale(num_rational_half()));
        let b = RingElement::monomial(pick(subset_b)).sub(&RingElement::one());
        let layout = SystemLayout::new(
            labels.iter().map(|l| Subsystem::new(*l, 2, Role::Input)).collect(),
        ).unwrap();
        let m = random_operator(&layout, seed);
        let lhs = a.mul(&b).apply(&m).unwrap();
        let rhs = a.apply(&b.apply(&m).unwrap()).unwrap();
        prop_assert!(lhs.distance(&rhs).unwrap() < 1e-10);
        let lhs = a.add(&b).apply(&m).unwrap();
        let rhs = a.apply(&m).unwrap().add(&b.apply(&m).unwrap()).unwrap();
        prop_assert!(lhs.distance(&rhs).unwrap() < 1e-10);
    }

    #[test]
    fn link_with_trivial_pairing_is_tensor(seed in any::<u64>()) {
        let sa = NodeSeq::new("A", vec![Node::qubit("A0", "A1")]).unwrap();
        let sb = NodeSeq::new("B", vec![Node::qubit("B0", "B1")]).unwrap();
        let a = random_comb(&sa, CombSampler::Perturbation, seed).unwrap();
        let b = random_comb(&sb, CombSampler::Perturbation, seed.wrapping_add(1)).unwrap();
        let linked = link_product(&a, &b, &DualPairing::empty()).unwrap();
        prop_assert!(linked.distance(&a.tensor(&b).unwrap()).unwrap() < 1e-12);
    }
}

fn num_rational_half() -> num_rational::Rational64 {
    num_rational::Rational64::new(1, 2)
}

/// The splitting identity: composing two 1-combs over a memory wire and
/// pairing with a process gives the same statistics as pairing the product
/// of the 1-combs with the side-channel-extended process.
#[test]
fn splitting_identity_over_memory_wires() {
    let party = NodeSeq::new(
        "A",
        vec![Node::qubit("A0", "A1"), Node::qubit("A2", "A3")],
    )
    .unwrap();
    let s = Scenario::new(vec![party]).unwrap();
    let first = NodeSeq::new(
        "first",
        vec![Node::new(
            vec![Subsystem::new("A0", 2, Role::Input)],
            vec![
                Subsystem::new("A1", 2, Role::DualOutput),
                Subsystem::new("L1", 2, Role::DualOutput),
            ],
        )],
    )
    .unwrap();
    let second = NodeSeq::new(
        "second",
        vec![Node::new(
            vec![
                Subsystem::new("A2", 2, Role::Input),
                Subsystem::new("L2", 2, Role::Input),
            ],
            vec![Subsystem::new("A3", 2, Role::DualOutput)],
        )],
    )
    .unwrap();
    for seed in 0..20u64 {
        let w = random_mpm(&s, seed).unwrap();
        let m1 = random_comb(&first, CombSampler::Network, 100 + seed).unwrap();
        let m2 = random_comb(&second, CombSampler::Network, 200 + seed).unwrap();

        // sequential composition into a 2-comb over the node systems
        let composed = link_product(&m2, &m1, &DualPairing::single("L2", "L1")).unwrap();
        let lhs = born_probability(&w, &[&composed]).unwrap();

        // the same statistics from the extended process
        let id = identity_cj(
            Subsystem::new("L2", 2, Role::Input),
            Subsystem::new("L1", 2, Role::DualOutput),
        )
        .unwrap();
        let w_ext = w.tensor(&id).unwrap();
        let product = m2.tensor(&m1).unwrap();
        let rhs = trace_product(&w_ext, &product).unwrap();
        assert!(
            (lhs - rhs.re).abs() < 1e-9 && rhs.im.abs() < 1e-9,
            "seed {seed}: {lhs} vs {rhs}"
        );
        // the composition is itself a valid two-tooth comb
        let verdict =
            procmat::comb::validate_comb_trace(&composed, &s.parties[0], 1e-9).unwrap();
        assert!(verdict.valid, "seed {seed}: {verdict:?}");
    }
}

/// Conditioning on a first-node operation leaves a valid process on the
/// remaining nodes: for arbitrary processes when the operation is
/// deterministic, and for every branch of an instrument when the process
/// admits that node first in a causal unravelling (here: single-party
/// combs, and products of one with an unordered partner).
#[test]
fn conditional_processes_stay_valid_for_first_node_operations() {
    let first = NodeSeq::new(
        "first",
        vec![Node::new(
            vec![Subsystem::new("A0", 2, Role::Input)],
            vec![
                Subsystem::new("A1", 2, Role::DualOutput),
                Subsystem::new("L1", 2, Role::DualOutput),
            ],
        )],
    )
    .unwrap();

    // arbitrary bipartite processes, deterministic first operation
    let s = procmat::catalog::activatable_scenario();
    let remaining = procmat::catalog::activated_scenario();
    for k in 0..30u64 {
        let w = random_mpm(&s, 300 + k).unwrap();
        let (w_ext, _) =
            procmat::process::extend_with_side_channels(&w, &s, &[vec![2], vec![]]).unwrap();
        let op = random_comb(&first, CombSampler::Network, 400 + k).unwrap();
        conditional_pm(&w_ext, &op, &["A0", "A1", "L1"], &remaining, 1e-8)
            .unwrap_or_else(|e| panic!("deterministic op {k}: {e}"));
    }

    // single-party two-node processes (combs), every branch of random
    // instruments
    let sa = Scenario::new(vec![NodeSeq::new(
        "A",
        vec![Node::qubit("A0", "A1"), Node::qubit("A2", "A3")],
    )
    .unwrap()])
    .unwrap();
    let remaining_a = Scenario::new(vec![NodeSeq::new(
        "A",
        vec![Node::new(
            vec![
                Subsystem::new("A2", 2, Role::Input),
                Subsystem::new("L2", 2, Role::Input),
            ],
            vec![Subsystem::new("A3", 2, Role::DualOutput)],
        )],
    )
    .unwrap()])
    .unwrap();
    let mut checked = 0usize;
    for k in 0..100u64 {
        let w = random_mpm(&sa, 500 + k).unwrap();
        let (w_ext, _) =
            procmat::process::extend_with_side_channels(&w, &sa, &[vec![2]]).unwrap();
        let n_outcomes = 2 + (k % 2) as usize;
        let instrument = random_instrument(&first, n_outcomes, 600 + k).unwrap();
        for (_, branch) in &instrument.branches {
            match conditional_pm(&w_ext, branch, &["A0", "A1", "L1"], &remaining_a, 1e-8) {
                Ok(_) => checked += 1,
                Err(procmat::Error::ZeroProbability) => {}
                Err(e) => panic!("instrument {k}: {e}"),
            }
        }
    }
    assert!(checked >= 200, "only {checked} branches checked");
}

/// Outcome distributions of random instruments against random processes are
/// nonnegative and normalised.
#[test]
fn instrument_outcomes_normalise_against_random_processes() {
    let s = Scenario::new(vec![
        NodeSeq::qubit_chain("A", 1),
        NodeSeq::qubit_chain("B", 1),
    ])
    .unwrap();
    for k in 0..30u64 {
        let w = random_mpm(&s, 700 + k).unwrap();
        let ia = random_instrument(&s.parties[0], 2 + (k % 3) as usize, 800 + k).unwrap();
        let ib = random_instrument(&s.parties[1], 2, 900 + k).unwrap();
        let mut total = 0.0;
        for (_, ba) in &ia.branches {
            for (_, bb) in &ib.branches {
                let p = born_probability(&w, &[ba, bb]).unwrap();
                assert!(p >= -1e-9, "run {k}: negative probability {p}");
                total += p;
            }
        }
        assert!((total - 1.0).abs() < 1e-9, "run {k}: total {total}");
    }
}

/// Link products over disjoint pairings associate and commute up to factor
/// order.
#[test]
fn link_product_algebra() {
    let mk = |in_l: &str, out_l: &str, seed| {
        let seq = NodeSeq::new("t", vec![Node::qubit(in_l, out_l)]).unwrap();
        random_comb(&seq, CombSampler::Network, seed).unwrap()
    };
    for seed in 0..10u64 {
        let a = mk("A0", "A1", seed);
        let b = mk("B0", "B1", seed + 50);
        let c = mk("C0", "C1", seed + 100);
        let p_ab = DualPairing::single("A1", "B0");
        let p_bc = DualPairing::single("B1", "C0");
        let left = link_product(&link_product(&a, &b, &p_ab).unwrap(), &c, &p_bc).unwrap();
        let right = link_product(&a, &link_product(&b, &c, &p_bc).unwrap(), &p_ab).unwrap();
        assert!(left.distance(&right).unwrap() < 1e-10, "seed {seed}");
        let ab = link_product(&a, &b, &p_ab).unwrap();
        let ba = link_product(&b, &a, &DualPairing::single("B0", "A1")).unwrap();
        assert!(ab.distance(&ba).unwrap() < 1e-10, "seed {seed}");
    }
}
