//! Deterministic quantum comb validity, in both the trace-telescope form and
//! the projective form, plus random comb generation for property tests.
//!
//! A comb over teeth `(in_1, out_1) ... (in_n, out_n)` is characterised
//! either by the telescoping marginals
//! `Tr_{out_j}[M^(j)] = 1^{in_j} (x) M^(j-1)` down to
//! `Tr_{out_1}[M^(1)] = 1^{in_1}`, or equivalently by positivity, the fixed
//! trace `prod d_in`, and invariance under the recursive projector
//! `P_n = 1 - out_n + in_n*out_n * P_{n-1}`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::basis::{HsBasis, MultiIndex};
use crate::error::{Error, Result};
use crate::operator::{LabeledOperator, Role, Subsystem, SystemLayout};
use crate::process::{cj_from_kraus, link_product, DualPairing};
use crate::ring::RingElement;
use crate::verdict::Verdict;

/// One tooth of a comb: the systems an agent receives and the duals of the
/// systems it sends back. Either side may be composite (e.g. after a
/// side-channel extension) or trivial (dimension-1 ends of an embedding).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub ins: Vec<Subsystem>,
    pub outs: Vec<Subsystem>,
}

impl Node {
    pub fn new(mut ins: Vec<Subsystem>, mut outs: Vec<Subsystem>) -> Self {
        for s in &mut ins {
            s.role = Role::Input;
        }
        for s in &mut outs {
            s.role = Role::DualOutput;
        }
        Node { ins, outs }
    }

    /// Single-qubit-in, single-qubit-out node.
    pub fn qubit(in_label: impl Into<String>, out_label: impl Into<String>) -> Self {
        Node::new(
            vec![Subsystem::input(in_label)],
            vec![Subsystem::dual_output(out_label)],
        )
    }

    pub fn in_labels(&self) -> impl Iterator<Item = &str> {
        self.ins.iter().map(|s| s.label.as_str())
    }

    pub fn out_labels(&self) -> impl Iterator<Item = &str> {
        self.outs.iter().map(|s| s.label.as_str())
    }

    pub fn d_in(&self) -> usize {
        self.ins.iter().map(|s| s.dim).product()
    }

    pub fn d_out(&self) -> usize {
        self.outs.iter().map(|s| s.dim).product()
    }

    pub fn subsystems(&self) -> impl Iterator<Item = &Subsystem> {
        self.ins.iter().chain(self.outs.iter())
    }
}

/// An ordered sequence of nodes belonging to one party.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeSeq {
    pub party: String,
    pub nodes: Vec<Node>,
}

impl NodeSeq {
    pub fn new(party: impl Into<String>, nodes: Vec<Node>) -> Result<Self> {
        let seq = NodeSeq {
            party: party.into(),
            nodes,
        };
        seq.layout()?; // rejects duplicate labels
        Ok(seq)
    }

    /// `n` qubit teeth labeled `X0,X1,...,X{2n-1}` for party `X`.
    pub fn qubit_chain(party: &str, n: usize) -> Self {
        let nodes = (0..n)
            .map(|k| Node::qubit(format!("{party}{}", 2 * k), format!("{party}{}", 2 * k + 1)))
            .collect();
        NodeSeq {
            party: party.to_string(),
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Layout in temporal order: `in_1, out_1, in_2, out_2, ...`.
    pub fn layout(&self) -> Result<SystemLayout> {
        SystemLayout::new(
            self.nodes
                .iter()
                .flat_map(|n| n.subsystems().cloned())
                .collect(),
        )
    }

    pub fn d_in(&self) -> usize {
        self.nodes.iter().map(Node::d_in).product()
    }

    pub fn d_out(&self) -> usize {
        self.nodes.iter().map(Node::d_out).product()
    }

    /// Append another party's nodes after this one's, e.g. to form the
    /// comb of a fixed ordering `A < B`.
    pub fn concat(&self, other: &NodeSeq) -> Result<NodeSeq> {
        let mut nodes = self.nodes.clone();
        nodes.extend(other.nodes.iter().cloned());
        NodeSeq::new(format!("{}<{}", self.party, other.party), nodes)
    }
}

/// Projector onto the validity subspace of deterministic combs over `seq`,
/// built by the recursion `P_n = 1 - out_n + in_n*out_n * P_{n-1}` with
/// `P_0 = 1`.
pub fn comb_projector(seq: &NodeSeq) -> RingElement {
    let mut p = RingElement::one();
    for node in &seq.nodes {
        let dep_out = RingElement::monomial(node.out_labels());
        let dep_in_out = RingElement::monomial(node.in_labels().chain(node.out_labels()));
        p = RingElement::one().sub(&dep_out).add(&dep_in_out.mul(&p));
    }
    p
}

/// The unravelled formulation of the same projector:
/// `1 - out_n (1 - in_n (... (1 - out_1 (1 - in_1)) ...))`.
/// Canonically equal to [`comb_projector`].
pub fn comb_projector_unravelled(seq: &NodeSeq) -> RingElement {
    let mut t = RingElement::one();
    for node in &seq.nodes {
        for group in [
            node.in_labels().collect::<Vec<_>>(),
            node.out_labels().collect::<Vec<_>>(),
        ] {
            t = RingElement::one().sub(&RingElement::monomial(group).mul(&t));
        }
    }
    t
}

fn check_layout_matches(m: &LabeledOperator, seq: &NodeSeq) -> Result<()> {
    let want = seq.layout()?;
    if m.layout().len() != want.len() {
        return Err(Error::LayoutMismatch(format!(
            "operator has {} subsystems, node sequence has {}",
            m.layout().len(),
            want.len()
        )));
    }
    for s in want.subsystems() {
        match m.layout().get(&s.label) {
            None => return Err(Error::LayoutMismatch(format!("missing `{}`", s.label))),
            Some(t) if t.dim != s.dim => {
                return Err(Error::LayoutMismatch(format!(
                    "`{}` has dim {}, expected {}",
                    s.label, t.dim, s.dim
                )))
            }
            _ => {}
        }
    }
    Ok(())
}

fn temporal(m: &LabeledOperator, seq: &NodeSeq) -> Result<LabeledOperator> {
    let want = seq.layout()?;
    let labels: Vec<&str> = want.labels().collect();
    m.reorder(&labels)
}

fn record_shared_checks(m: &LabeledOperator, seq: &NodeSeq, tol: f64, v: &mut Verdict) {
    v.record("hermiticity", m.hermiticity_residual(), tol);
    let positivity = match m.min_eigenvalue(f64::INFINITY) {
        Ok(min) => (-min).max(0.0),
        Err(_) => f64::INFINITY,
    };
    v.record("positivity", positivity, tol);
    let d_in = seq.d_in() as f64;
    let norm_residual = (m.trace() - Complex64::new(d_in, 0.0)).norm() / d_in.max(1.0);
    v.record("normalization", norm_residual, tol);
}

/// Comb validity through the telescoping marginal conditions.
pub fn validate_comb_trace(m: &LabeledOperator, seq: &NodeSeq, tol: f64) -> Result<Verdict> {
    check_layout_matches(m, seq)?;
    let mut v = Verdict::new();
    record_shared_checks(m, seq, tol, &mut v);

    let mut current = temporal(m, seq)?;
    for j in (1..=seq.len()).rev() {
        let node = &seq.nodes[j - 1];
        let outs: Vec<&str> = node.out_labels().collect();
        let ins: Vec<&str> = node.in_labels().collect();
        let lhs = current.partial_trace(&outs)?;
        let rhs = if j > 1 {
            let prev = lhs
                .partial_trace(&ins)?
                .scale(Complex64::new(1.0 / node.d_in() as f64, 0.0));
            let id_in = LabeledOperator::identity(SystemLayout::new(node.ins.clone())?);
            let out = id_in.tensor(&prev)?;
            current = prev;
            out
        } else {
            LabeledOperator::identity(SystemLayout::new(node.ins.clone())?)
        };
        v.record(format!("marginal_{j}"), lhs.distance(&rhs)?, tol);
    }
    Ok(v)
}

/// Comb validity through the projective conditions: positivity, invariance
/// under [`comb_projector`], and the trace `prod d_in`.
pub fn validate_comb_projective(m: &LabeledOperator, seq: &NodeSeq, tol: f64) -> Result<Verdict> {
    check_layout_matches(m, seq)?;
    let mut v = Verdict::new();
    record_shared_checks(m, seq, tol, &mut v);
    let projected = comb_projector(seq).apply(m)?;
    v.record("projective", m.distance(&projected)?, tol);
    Ok(v)
}

/// How [`random_comb`] builds its sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CombSampler {
    /// Identity plus a small random combination of keep-set basis elements,
    /// rejection-sampled for positivity.
    Perturbation,
    /// Link-product chain of Haar-random isometry channels with memory side
    /// channels; the final memory is traced out.
    Network,
}

/// `1/d_out` times identity plus keep-set-supported terms; lands in the comb
/// subspace by construction.
fn perturbation_operator(
    basis: &HsBasis,
    m0: f64,
    terms: &[(MultiIndex, f64)],
) -> Result<LabeledOperator> {
    let mut acc =
        LabeledOperator::identity(basis.layout().clone()).scale(Complex64::new(m0, 0.0));
    for (idx, c) in terms {
        let sigma = basis.element(idx)?;
        acc = acc.add(&sigma.scale(Complex64::new(*c, 0.0)))?;
    }
    Ok(acc)
}

/// Draw a deterministic comb over `seq`; the output passes both validators
/// at tolerance 1e-9.
pub fn random_comb(seq: &NodeSeq, sampler: CombSampler, seed: u64) -> Result<LabeledOperator> {
    match sampler {
        CombSampler::Perturbation => random_comb_perturbation(seq, seed),
        CombSampler::Network => random_comb_network(seq, seed),
    }
}

fn random_comb_perturbation(seq: &NodeSeq, seed: u64) -> Result<LabeledOperator> {
    let layout = seq.layout()?;
    let basis = HsBasis::default_for(&layout)?;
    let keep = comb_projector(seq).to_keep_set(&basis)?;
    let ranges = basis.index_ranges();
    let m0 = 1.0 / seq.d_out() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut envelope = m0;
    let mut attempts = 0usize;
    loop {
        let n_terms = rng.gen_range(1..=3);
        let mut terms: Vec<(MultiIndex, f64)> = Vec::with_capacity(n_terms);
        while terms.len() < n_terms {
            let idx = MultiIndex(ranges.iter().map(|&r| rng.gen_range(0..r)).collect());
            if idx.is_zero() || !keep.contains(&idx) || terms.iter().any(|(i, _)| *i == idx) {
                continue;
            }
            let c = rng.gen_range(-envelope..=envelope);
            terms.push((idx, c));
        }
        let candidate = perturbation_operator(&basis, m0, &terms)?;
        if candidate.is_psd(1e-9)? {
            return Ok(candidate);
        }
        attempts += 1;
        if attempts % 200 == 0 {
            envelope *= 0.5;
        }
    }
}

/// Haar-random isometry as the thin Q factor of a complex Ginibre matrix.
fn haar_isometry(d_out: usize, d_in: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    assert!(d_in <= d_out);
    let g = DMatrix::from_fn(d_out, d_in, |_, _| {
        Complex64::new(rng.sample(rand_distr_standard()), rng.sample(rand_distr_standard()))
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d_in {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj.conj() / rjj.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..d_out {
            q[(i, j)] *= phase;
        }
    }
    q
}

// rand 0.8 has StandardNormal in rand_distr; a Box-Muller keeps the
// dependency list short and the distribution is only used for genericity.
fn rand_distr_standard() -> impl rand::distributions::Distribution<f64> {
    struct BoxMuller;
    impl rand::distributions::Distribution<f64> for BoxMuller {
        fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
            let u: f64 = rng.gen_range(f64::EPSILON..1.0);
            let v: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            (-2.0 * u.ln()).sqrt() * v.cos()
        }
    }
    BoxMuller
}

fn random_comb_network(seq: &NodeSeq, seed: u64) -> Result<LabeledOperator> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = seq.len();
    if n == 0 {
        return Ok(LabeledOperator::new(
            SystemLayout::new(vec![])?,
            DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)),
        )?);
    }
    let mut chain: Option<LabeledOperator> = None;
    let mut mem_dim = 1usize;
    for (k, node) in seq.nodes.iter().enumerate() {
        let last = k + 1 == n;
        let mut ins: Vec<Subsystem> = Vec::new();
        if k > 0 {
            ins.push(Subsystem::new(format!("~m{k}i"), mem_dim, Role::Ancilla));
        }
        ins.extend(node.ins.iter().cloned());
        let d_in_tooth = mem_dim * node.d_in();

        let next_mem = mem_dim * node.d_in();
        let mut outs: Vec<Subsystem> = node.outs.clone();
        if last {
            outs.push(Subsystem::new("~junk", next_mem, Role::Ancilla));
        } else {
            outs.push(Subsystem::new(
                format!("~m{}o", k + 1),
                next_mem,
                Role::Ancilla,
            ));
        }
        let d_out_tooth: usize = outs.iter().map(|s| s.dim).product();

        let v = haar_isometry(d_out_tooth, d_in_tooth, &mut rng);
        let cj = cj_from_kraus(ins, outs, &[v])?;
        chain = Some(match chain {
            None => cj,
            Some(m) => {
                let pairing =
                    DualPairing::new(vec![(format!("~m{k}o"), format!("~m{k}i"))]);
                link_product(&m, &cj, &pairing)?
            }
        });
        mem_dim = next_mem;
    }
    let comb = chain.expect("n > 0");
    let comb = comb.partial_trace(&["~junk"])?;
    temporal(&comb, seq)
}

/// Build the node sequence of the comb a process with a definite node order
/// corresponds to: the process is a channel from node outputs to node
/// inputs, so it becomes an (n+1)-tooth comb with trivial first input and
/// last output, each tooth bridging consecutive nodes.
pub fn process_comb_seq(
    nodes_in_order: &[Node],
    trivial_in: &str,
    trivial_out: &str,
) -> Result<NodeSeq> {
    let mut teeth = Vec::with_capacity(nodes_in_order.len() + 1);
    let trivial = |label: &str| vec![Subsystem::new(label, 1, Role::Ancilla)];
    for k in 0..=nodes_in_order.len() {
        let ins = if k == 0 {
            trivial(trivial_in)
        } else {
            nodes_in_order[k - 1].outs.clone()
        };
        let outs = if k == nodes_in_order.len() {
            trivial(trivial_out)
        } else {
            nodes_in_order[k].ins.clone()
        };
        teeth.push(Node { ins, outs });
    }
    NodeSeq::new("process", teeth)
}

/// Tensor dimension-1 factors onto an operator so it matches an embedding
/// produced by [`process_comb_seq`].
pub fn embed_trivial_ends(
    m: &LabeledOperator,
    trivial_in: &str,
    trivial_out: &str,
) -> Result<LabeledOperator> {
    m.tensor(&LabeledOperator::trivial(trivial_in, Role::Ancilla))?
        .tensor(&LabeledOperator::trivial(trivial_out, Role::Ancilla))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::expand;

    fn max_mixed_comb(seq: &NodeSeq) -> LabeledOperator {
        let layout = seq.layout().unwrap();
        LabeledOperator::identity(layout).scale(Complex64::new(1.0 / seq.d_out() as f64, 0.0))
    }

    #[test]
    fn projector_strings() {
        assert_eq!(
            comb_projector(&NodeSeq::qubit_chain("X", 0)).to_string(),
            "1"
        );
        assert_eq!(
            comb_projector(&NodeSeq::qubit_chain("X", 1)).to_string(),
            "1 - X1 + X0*X1"
        );
        assert_eq!(
            comb_projector(&NodeSeq::qubit_chain("A", 2)).to_string(),
            "1 - A3 + A2*A3 - A1*A2*A3 + A0*A1*A2*A3"
        );
    }

    #[test]
    fn unravelled_matches_recursion() {
        for n in 0..=4 {
            let seq = NodeSeq::qubit_chain("X", n);
            assert_eq!(
                comb_projector(&seq),
                comb_projector_unravelled(&seq),
                "n = {n}"
            );
        }
    }

    #[test]
    fn projectors_idempotent_and_self_adjoint() {
        for n in 1..=4 {
            let seq = NodeSeq::qubit_chain("X", n);
            let p = comb_projector(&seq);
            assert!(p.is_idempotent());
            if n <= 2 {
                assert!(p.is_self_adjoint_projector(&seq.layout().unwrap()));
            }
        }
    }

    #[test]
    fn max_mixed_network_is_valid() {
        for n in 1..=2 {
            let seq = NodeSeq::qubit_chain("X", n);
            let m = max_mixed_comb(&seq);
            assert!(validate_comb_trace(&m, &seq, 1e-9).unwrap().valid);
            assert!(validate_comb_projective(&m, &seq, 1e-9).unwrap().valid);
        }
    }

    #[test]
    fn one_comb_marginal_is_identity() {
        let seq = NodeSeq::qubit_chain("X", 1);
        let m = random_comb(&seq, CombSampler::Perturbation, 3).unwrap();
        let marg = m.partial_trace(&["X1"]).unwrap();
        let id = LabeledOperator::identity(marg.layout().clone());
        assert!(marg.distance(&id).unwrap() < 1e-10);
    }

    #[test]
    fn wrong_trace_fails_normalization() {
        let seq = NodeSeq::qubit_chain("X", 1);
        let m = max_mixed_comb(&seq).scale(Complex64::new(1.5, 0.0));
        let v = validate_comb_trace(&m, &seq, 1e-9).unwrap();
        assert!(!v.valid);
        assert!(!v.check("normalization").unwrap().pass);
        let v = validate_comb_projective(&m, &seq, 1e-9).unwrap();
        assert!(!v.check("normalization").unwrap().pass);
    }

    #[test]
    fn layout_mismatch_rejected() {
        let seq = NodeSeq::qubit_chain("X", 1);
        let other = LabeledOperator::identity(
            SystemLayout::new(vec![Subsystem::input("Y0"), Subsystem::dual_output("Y1")]).unwrap(),
        );
        assert!(matches!(
            validate_comb_trace(&other, &seq, 1e-9),
            Err(Error::LayoutMismatch(_))
        ));
    }

    #[test]
    fn perturbation_sampler_outputs_valid_combs() {
        for n in 1..=2 {
            let seq = NodeSeq::qubit_chain("X", n);
            for seed in 0..5 {
                let m = random_comb(&seq, CombSampler::Perturbation, seed).unwrap();
                let vt = validate_comb_trace(&m, &seq, 1e-9).unwrap();
                let vp = validate_comb_projective(&m, &seq, 1e-9).unwrap();
                assert!(vt.valid, "trace verdict n={n} seed={seed}: {vt:?}");
                assert!(vp.valid, "projective verdict n={n} seed={seed}: {vp:?}");
            }
        }
    }

    #[test]
    fn network_sampler_outputs_valid_combs() {
        for n in 1..=2 {
            let seq = NodeSeq::qubit_chain("X", n);
            for seed in 0..3 {
                let m = random_comb(&seq, CombSampler::Network, seed).unwrap();
                // ancilla fully traced out: layout is exactly the node systems
                assert_eq!(m.layout().len(), 2 * n);
                let vt = validate_comb_trace(&m, &seq, 1e-9).unwrap();
                let vp = validate_comb_projective(&m, &seq, 1e-9).unwrap();
                assert!(vt.valid, "trace verdict n={n} seed={seed}: {vt:?}");
                assert!(vp.valid, "projective verdict n={n} seed={seed}: {vp:?}");
            }
        }
    }

    #[test]
    fn zero_perturbation_is_max_mixed() {
        let seq = NodeSeq::qubit_chain("X", 1);
        let basis = HsBasis::default_for(&seq.layout().unwrap()).unwrap();
        let m = perturbation_operator(&basis, 1.0 / seq.d_out() as f64, &[]).unwrap();
        assert!(m.distance(&max_mixed_comb(&seq)).unwrap() < 1e-15);
    }

    #[test]
    fn telescoping_yields_smaller_comb() {
        let seq = NodeSeq::qubit_chain("X", 2);
        let m = random_comb(&seq, CombSampler::Network, 11).unwrap();
        let sub = m
            .partial_trace(&["X3", "X2"])
            .unwrap()
            .scale(Complex64::new(0.5, 0.0));
        let seq1 = NodeSeq::qubit_chain("X", 1);
        assert!(validate_comb_trace(&sub, &seq1, 1e-9).unwrap().valid);
    }

    #[test]
    fn validators_agree_on_random_hermitian_inputs() {
        let seq = NodeSeq::qubit_chain("X", 2);
        let layout = seq.layout().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for k in 0..50 {
            let d = layout.total_dim();
            let g = DMatrix::from_fn(d, d, |_, _| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let h = (&g + g.adjoint()).map(|z| z * Complex64::new(0.5, 0.0));
            let m = LabeledOperator::new(layout.clone(), h).unwrap();
            let vt = validate_comb_trace(&m, &seq, 1e-9).unwrap();
            let vp = validate_comb_projective(&m, &seq, 1e-9).unwrap();
            assert_eq!(vt.valid, vp.valid, "sample {k}");
        }
    }

    #[test]
    fn comb_from_expansion_restricted_to_keep_set() {
        // the projective validator accepts exactly the keep-set span
        let seq = NodeSeq::qubit_chain("X", 1);
        let layout = seq.layout().unwrap();
        let basis = HsBasis::default_for(&layout).unwrap();
        let m = random_comb(&seq, CombSampler::Network, 5).unwrap();
        let m = temporal(&m, &seq).unwrap();
        let keep = comb_projector(&seq).to_keep_set(&basis).unwrap();
        let e = expand(&m, &basis).unwrap();
        for (idx, v) in e.coeffs() {
            if !keep.contains(idx) {
                assert!(v.norm() < 1e-10, "index {idx:?} outside keep-set");
            }
        }
    }

    #[test]
    fn process_comb_embedding_shape() {
        let a1 = Node::qubit("A0", "A1");
        let b = Node::qubit("B0", "B1");
        let seq = process_comb_seq(&[a1.clone(), b.clone()], "~t0", "~t1").unwrap();
        assert_eq!(seq.len(), 3);
        assert_eq!(seq.d_in(), 1 * 2 * 2); // trivial, A1, B1
        // a maximally mixed PM embeds to a valid process comb for any order;
        // its trace d_out = 4 equals the embedded comb's d_in
        let pm = max_mixed_comb(&NodeSeq::new("p", vec![a1, b]).unwrap());
        let embedded = embed_trivial_ends(&pm, "~t0", "~t1").unwrap();
        let v = validate_comb_trace(&embedded, &seq, 1e-9).unwrap();
        assert!(v.valid, "{v:?}");
    }
}
