//! Concrete processes for the side-channel activation example, built from
//! their Pauli-string coefficients.
//!
//! The starting point is a three-node process shared by a two-node party A
//! and a single-node party B. As a standard process over its nodes it is
//! compatible with the fixed order `A2 < B < A1`, hence causally orderable;
//! treated as a multi-round process with `A1 < A2` and an identity side
//! channel between A's nodes, conditioning on a forwarding operation at A's
//! first node leaves a bipartite process that violates a causal inequality.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::basis::{reconstruct, HsBasis, HsExpansion, MultiIndex};
use crate::comb::{Node, NodeSeq};
use crate::error::Result;
use crate::mpm::Scenario;
use crate::operator::{LabeledOperator, Role, Subsystem};

const X: usize = 1;
const Z: usize = 3;

fn from_pauli_terms(
    scenario: &Scenario,
    terms: &[(Vec<usize>, f64)],
) -> Result<LabeledOperator> {
    let layout = scenario.layout()?;
    let basis = HsBasis::default_for(&layout)?;
    let mut coeffs = BTreeMap::new();
    for (idx, v) in terms {
        coeffs.insert(MultiIndex(idx.clone()), Complex64::new(*v, 0.0));
    }
    reconstruct(&HsExpansion::new(layout, coeffs), &basis)
}

/// Scenario of the activatable process: party A with nodes `(A0,A1)` then
/// `(A2,A3)`, party B with node `(B0,B1)`, all qubits.
pub fn activatable_scenario() -> Scenario {
    Scenario::new(vec![
        NodeSeq::new(
            "A",
            vec![Node::qubit("A0", "A1"), Node::qubit("A2", "A3")],
        )
        .unwrap(),
        NodeSeq::new("B", vec![Node::qubit("B0", "B1")]).unwrap(),
    ])
    .unwrap()
}

/// The activatable process on `[A0,A1,A2,A3,B0,B1]`:
/// `(1/8)(1 + (x^A0 z^A2 z^A3 z^B0 + z^A0 z^A2 z^B1)/sqrt(2))`.
pub fn activatable_process() -> LabeledOperator {
    let s = activatable_scenario();
    let c = 1.0 / (8.0 * 2.0f64.sqrt());
    from_pauli_terms(
        &s,
        &[
            (vec![0, 0, 0, 0, 0, 0], 0.125),
            (vec![X, 0, Z, Z, Z, 0], c),
            (vec![Z, 0, Z, 0, 0, Z], c),
        ],
    )
    .expect("fixed construction")
}

/// Scenario after forwarding through the side channel: party A holds one
/// node with composite input `A2 (x) L2` and output `A3`; party B is
/// unchanged.
pub fn activated_scenario() -> Scenario {
    Scenario::new(vec![
        NodeSeq::new(
            "A",
            vec![Node::new(
                vec![
                    Subsystem::new("A2", 2, Role::Input),
                    Subsystem::new("L2", 2, Role::Input),
                ],
                vec![Subsystem::new("A3", 2, Role::DualOutput)],
            )],
        )
        .unwrap(),
        NodeSeq::new("B", vec![Node::qubit("B0", "B1")]).unwrap(),
    ])
    .unwrap()
}

/// The conditional process after the forwarding operation, on
/// `[A2,L2,A3,B0,B1]`:
/// `(1/8)(1 + (z^A2 z^A3 x^L2 z^B0 + z^A2 z^L2 z^B1)/sqrt(2))`.
pub fn activated_process() -> LabeledOperator {
    let s = activated_scenario();
    let c = 1.0 / (8.0 * 2.0f64.sqrt());
    // layout order A2, L2, A3, B0, B1
    from_pauli_terms(
        &s,
        &[
            (vec![0, 0, 0, 0, 0], 0.125),
            (vec![Z, X, Z, Z, 0], c),
            (vec![Z, Z, 0, 0, Z], c),
        ],
    )
    .expect("fixed construction")
}

/// Scenario of the extracted bipartite process: A holds `(L2, A3)`, B holds
/// `(B0, B1)`.
pub fn ocb_scenario() -> Scenario {
    Scenario::new(vec![
        NodeSeq::new(
            "A",
            vec![Node::new(
                vec![Subsystem::new("L2", 2, Role::Input)],
                vec![Subsystem::new("A3", 2, Role::DualOutput)],
            )],
        )
        .unwrap(),
        NodeSeq::new("B", vec![Node::qubit("B0", "B1")]).unwrap(),
    ])
    .unwrap()
}

/// The OCB process matrix extracted by the `z`-measurement "+" branch, on
/// `[L2,A3,B0,B1]`:
/// `(1/4)(1 + (z^A3 x^L2 z^B0 + z^L2 z^B1)/sqrt(2))`.
pub fn ocb_process() -> LabeledOperator {
    let s = ocb_scenario();
    let c = 1.0 / (4.0 * 2.0f64.sqrt());
    // layout order L2, A3, B0, B1
    from_pauli_terms(
        &s,
        &[
            (vec![0, 0, 0, 0], 0.25),
            (vec![X, Z, Z, 0], c),
            (vec![Z, 0, 0, Z], c),
        ],
    )
    .expect("fixed construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpm::validate_mpm;
    use crate::ring::RingElement;

    #[test]
    fn activatable_process_shape() {
        let w = activatable_process();
        assert_eq!(w.dim(), 64);
        assert!((w.trace() - Complex64::new(8.0, 0.0)).norm() < 1e-12);
        assert!(w.is_psd(1e-9).unwrap());
    }

    #[test]
    fn activatable_process_is_valid_multi_round() {
        let v = validate_mpm(&activatable_process(), &activatable_scenario(), 1e-9).unwrap();
        assert!(v.valid, "{v:?}");
    }

    #[test]
    fn activated_process_shape() {
        let w = activated_process();
        assert_eq!(w.dim(), 32);
        assert!((w.trace() - Complex64::new(4.0, 0.0)).norm() < 1e-12);
        assert!(w.is_psd(1e-9).unwrap());
        let v = validate_mpm(&w, &activated_scenario(), 1e-9).unwrap();
        assert!(v.valid, "{v:?}");
    }

    #[test]
    fn ocb_process_is_valid_pm() {
        let w = ocb_process();
        assert_eq!(w.dim(), 16);
        assert!((w.trace() - Complex64::new(4.0, 0.0)).norm() < 1e-12);
        let v = validate_mpm(&w, &ocb_scenario(), 1e-9).unwrap();
        assert!(v.valid, "{v:?}");
    }

    #[test]
    fn simplified_projective_identity() {
        // W = A3[W] + B1[W] - D[W], the reduced form of the quasiorthogonal
        // condition for this particular operator
        let w = activatable_process();
        let a3 = RingElement::monomial(["A3"]).apply(&w).unwrap();
        let b1 = RingElement::monomial(["B1"]).apply(&w).unwrap();
        let d = RingElement::full_depolarizer(w.layout()).apply(&w).unwrap();
        let rhs = a3.add(&b1).unwrap().sub(&d).unwrap();
        assert!(w.distance(&rhs).unwrap() < 1e-13);
    }

    #[test]
    fn depolarized_cross_terms_collapse_to_unit() {
        // every monomial containing both an A-output and B1, or A2*A3, or
        // B0*B1, sends the operator to 1/8
        let w = activatable_process();
        let eighth = LabeledOperator::identity(w.layout().clone())
            .scale(Complex64::new(0.125, 0.0));
        for labels in [
            vec!["A3", "B1"],
            vec!["B0", "B1"],
            vec!["A2", "A3"],
            vec!["A0", "A1", "A2", "A3", "B0", "B1"],
        ] {
            let got = RingElement::monomial(labels.clone()).apply(&w).unwrap();
            assert!(
                got.distance(&eighth).unwrap() < 1e-13,
                "monomial {labels:?}"
            );
        }
    }
}
