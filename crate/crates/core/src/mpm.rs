//! Multi-round process matrix validity, linear-extension enumeration, and
//! the identity between the quasiorthogonal projector and the union of
//! fixed-order comb projectors.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{HsBasis, MultiIndex};
use crate::comb::{comb_projector, Node, NodeSeq};
use crate::error::{Error, Result};
use crate::operator::{LabeledOperator, SystemLayout};
use crate::ring::{proj_union, RingElement};
use crate::verdict::Verdict;

const MAX_EXTENSION_NODES: usize = 10;
const MAX_THEOREM2_NODES: usize = 6;

/// A set of parties, each holding an ordered node sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub parties: Vec<NodeSeq>,
}

impl Scenario {
    pub fn new(parties: Vec<NodeSeq>) -> Result<Self> {
        if parties.is_empty() {
            return Err(Error::InvalidProcess("scenario with no parties".into()));
        }
        let s = Scenario { parties };
        s.layout()?; // global label uniqueness
        Ok(s)
    }

    /// Layout with parties in order and each party's systems in temporal
    /// order.
    pub fn layout(&self) -> Result<SystemLayout> {
        SystemLayout::new(
            self.parties
                .iter()
                .flat_map(|p| p.nodes.iter().flat_map(|n| n.subsystems().cloned()))
                .collect(),
        )
    }

    pub fn d_in(&self) -> Result<usize> {
        Ok(self.parties.iter().map(NodeSeq::d_in).product())
    }

    pub fn d_out(&self) -> Result<usize> {
        Ok(self.parties.iter().map(NodeSeq::d_out).product())
    }

    pub fn total_nodes(&self) -> usize {
        self.parties.iter().map(NodeSeq::len).sum()
    }

    pub fn party(&self, label: &str) -> Option<&NodeSeq> {
        self.parties.iter().find(|p| p.party == label)
    }

    /// Display name of a node: the party label alone for single-node
    /// parties, otherwise the party label with the 1-based node position.
    pub fn node_name(&self, party_idx: usize, node_idx: usize) -> String {
        let p = &self.parties[party_idx];
        if p.len() == 1 {
            p.party.clone()
        } else {
            format!("{}{}", p.party, node_idx + 1)
        }
    }

    /// Find a node by display name; `A2` also resolves for single-node
    /// parties named `A2`.
    pub fn find_node(&self, name: &str) -> Option<(usize, usize)> {
        for (pi, _) in self.parties.iter().enumerate() {
            for ni in 0..self.parties[pi].len() {
                if self.node_name(pi, ni) == name {
                    return Some((pi, ni));
                }
            }
        }
        None
    }

    pub fn node(&self, party_idx: usize, node_idx: usize) -> &Node {
        &self.parties[party_idx].nodes[node_idx]
    }

    /// The same nodes with every node its own (single-node) party.
    pub fn atomized(&self) -> Result<Scenario> {
        let mut parties = Vec::with_capacity(self.total_nodes());
        for (pi, p) in self.parties.iter().enumerate() {
            for (ni, node) in p.nodes.iter().enumerate() {
                parties.push(NodeSeq::new(self.node_name(pi, ni), vec![node.clone()])?);
            }
        }
        Scenario::new(parties)
    }
}

/// Projector onto the span of tensor products of per-party deterministic
/// combs: the ring product of the parties' comb projectors.
pub fn affine_comb_projector(s: &Scenario) -> RingElement {
    let mut p = RingElement::one();
    for party in &s.parties {
        p = p.mul(&comb_projector(party));
    }
    p
}

/// The quasiorthogonal projector `1 - P + D` characterising the validity
/// subspace of multi-round process matrices.
pub fn mpm_projector(s: &Scenario) -> RingElement {
    let p = affine_comb_projector(s);
    let d = RingElement::monomial(
        s.parties
            .iter()
            .flat_map(|p| p.nodes.iter().flat_map(|n| n.subsystems()))
            .map(|sub| sub.label.clone()),
    );
    RingElement::one().sub(&p).add(&d)
}

/// Validity of a multi-round process matrix: positivity, invariance under
/// the quasiorthogonal projector, and trace equal to the scenario's output
/// dimension.
pub fn validate_mpm(w: &LabeledOperator, s: &Scenario, tol: f64) -> Result<Verdict> {
    let want = s.layout()?;
    if w.layout().len() != want.len() {
        return Err(Error::LayoutMismatch(format!(
            "operator has {} subsystems, scenario has {}",
            w.layout().len(),
            want.len()
        )));
    }
    for sub in want.subsystems() {
        match w.layout().get(&sub.label) {
            None => return Err(Error::LayoutMismatch(format!("missing `{}`", sub.label))),
            Some(t) if t.dim != sub.dim => {
                return Err(Error::LayoutMismatch(format!(
                    "`{}` has dim {}, expected {}",
                    sub.label, t.dim, sub.dim
                )))
            }
            _ => {}
        }
    }
    let mut v = Verdict::new();
    v.record("hermiticity", w.hermiticity_residual(), tol);
    let positivity = match w.min_eigenvalue(f64::INFINITY) {
        Ok(min) => (-min).max(0.0),
        Err(_) => f64::INFINITY,
    };
    v.record("positivity", positivity, tol);
    let projected = mpm_projector(s).apply(w)?;
    v.record("projective", w.distance(&projected)?, tol);
    let d_out = s.d_out()? as f64;
    let norm_residual = (w.trace() - Complex64::new(d_out, 0.0)).norm() / d_out.max(1.0);
    v.record("normalization", norm_residual, tol);
    Ok(v)
}

/// A total order over all nodes of a scenario, compatible with each party's
/// local order. Entries are `(party index, node index)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearExtension {
    pub order: Vec<(usize, usize)>,
}

impl LinearExtension {
    pub fn describe(&self, s: &Scenario) -> String {
        self.order
            .iter()
            .map(|&(p, n)| s.node_name(p, n))
            .collect::<Vec<_>>()
            .join(" < ")
    }
}

/// All total orders of the scenario's nodes that restrict to each party's
/// local order, enumerated lexicographically by party choice at each step.
pub fn linear_extensions(s: &Scenario) -> Result<Vec<LinearExtension>> {
    let total = s.total_nodes();
    if total > MAX_EXTENSION_NODES {
        return Err(Error::TooManyNodes {
            got: total,
            limit: MAX_EXTENSION_NODES,
        });
    }
    let mut out = Vec::new();
    let mut counters = vec![0usize; s.parties.len()];
    let mut current = Vec::with_capacity(total);
    fn recurse(
        s: &Scenario,
        counters: &mut Vec<usize>,
        current: &mut Vec<(usize, usize)>,
        out: &mut Vec<LinearExtension>,
        total: usize,
    ) {
        if current.len() == total {
            out.push(LinearExtension {
                order: current.clone(),
            });
            return;
        }
        for p in 0..s.parties.len() {
            if counters[p] < s.parties[p].len() {
                current.push((p, counters[p]));
                counters[p] += 1;
                recurse(s, counters, current, out, total);
                counters[p] -= 1;
                current.pop();
            }
        }
    }
    recurse(s, &mut counters, &mut current, &mut out, total);
    Ok(out)
}

/// The comb node sequence obtained by chaining all nodes in the order of a
/// linear extension.
pub fn chain_seq(s: &Scenario, ext: &LinearExtension) -> Result<NodeSeq> {
    let nodes = ext
        .order
        .iter()
        .map(|&(p, n)| s.node(p, n).clone())
        .collect();
    NodeSeq::new(ext.describe(s), nodes)
}

/// Outcome of checking that the union of the quasiorthogonal projectors of
/// all compatible chain combs equals the scenario's quasiorthogonal
/// projector, symbolically.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Theorem2Report {
    pub extensions: Vec<String>,
    pub union_form: String,
    pub quasiorthogonal_form: String,
    pub holds: bool,
}

pub fn theorem2_check(s: &Scenario) -> Result<Theorem2Report> {
    let total = s.total_nodes();
    if total > MAX_THEOREM2_NODES {
        return Err(Error::TooManyNodes {
            got: total,
            limit: MAX_THEOREM2_NODES,
        });
    }
    let d = RingElement::full_depolarizer(&s.layout()?);
    let exts = linear_extensions(s)?;
    let mut union: Option<RingElement> = None;
    let mut names = Vec::with_capacity(exts.len());
    for ext in &exts {
        names.push(ext.describe(s));
        let p_chain = comb_projector(&chain_seq(s, ext)?);
        let quasi = RingElement::one().sub(&p_chain).add(&d);
        union = Some(match union {
            None => quasi,
            Some(u) => proj_union(&u, &quasi)?,
        });
    }
    let union = union.expect("at least one extension");
    let quasi = mpm_projector(s);
    Ok(Theorem2Report {
        extensions: names,
        union_form: union.to_string(),
        quasiorthogonal_form: quasi.to_string(),
        holds: union == quasi,
    })
}

/// The comb projector of the chain `A < B` computed two ways: (a) by running
/// the recursion through all of B's teeth after A's, and (b) by the closed
/// decomposition `1^A (x) P^B - (1^A - P^A) (x) D^B`. Both are returned;
/// they agree canonically.
pub fn lemma2_decomposition(
    seq_a: &NodeSeq,
    seq_b: &NodeSeq,
) -> Result<(RingElement, RingElement)> {
    let chained = comb_projector(&seq_a.concat(seq_b)?);
    let p_a = comb_projector(seq_a);
    let p_b = comb_projector(seq_b);
    let d_b = RingElement::monomial(
        seq_b
            .nodes
            .iter()
            .flat_map(|n| n.subsystems())
            .map(|s| s.label.clone()),
    );
    let closed = p_b.sub(&RingElement::one().sub(&p_a).mul(&d_b));
    Ok((chained, closed))
}

/// Draw a valid multi-round process matrix: the maximally mixed process plus
/// a random keep-set-supported traceless perturbation, rejection-sampled for
/// positivity.
pub fn random_mpm(s: &Scenario, seed: u64) -> Result<LabeledOperator> {
    let layout = s.layout()?;
    let basis = HsBasis::default_for(&layout)?;
    let keep = mpm_projector(s).to_keep_set(&basis)?;
    let ranges = basis.index_ranges();
    let w0 = 1.0 / s.d_in()? as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut envelope = w0;
    let mut attempts = 0usize;
    loop {
        let n_terms = rng.gen_range(1..=3);
        let mut acc = LabeledOperator::identity(layout.clone()).scale(Complex64::new(w0, 0.0));
        let mut picked: Vec<MultiIndex> = Vec::with_capacity(n_terms);
        while picked.len() < n_terms {
            let idx = MultiIndex(ranges.iter().map(|&r| rng.gen_range(0..r)).collect());
            if idx.is_zero() || !keep.contains(&idx) || picked.contains(&idx) {
                continue;
            }
            let c = rng.gen_range(-envelope..=envelope);
            acc = acc.add(&basis.element(&idx)?.scale(Complex64::new(c, 0.0)))?;
            picked.push(idx);
        }
        if acc.is_psd(1e-9)? {
            return Ok(acc);
        }
        attempts += 1;
        if attempts % 200 == 0 {
            envelope *= 0.5;
        }
    }
}
