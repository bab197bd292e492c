//! Process composition: the link product, the generalized Born rule,
//! instruments, side-channel extension, and conditional process matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::comb::{validate_comb_trace, NodeSeq};
use crate::error::{Error, Result};
use crate::mpm::{validate_mpm, Scenario};
use crate::operator::{base_offsets, LabeledOperator, Role, Subsystem, SystemLayout};
use crate::verdict::Verdict;

/// Pairs each contracted label of the left operand with its dual partner in
/// the right operand.
#[derive(Clone, Debug, Default)]
pub struct DualPairing {
    pairs: Vec<(String, String)>,
}

impl DualPairing {
    pub fn new(pairs: Vec<(String, String)>) -> Self {
        DualPairing { pairs }
    }

    pub fn single(a: impl Into<String>, b: impl Into<String>) -> Self {
        DualPairing {
            pairs: vec![(a.into(), b.into())],
        }
    }

    /// The trivial pairing: the link product degenerates to the tensor
    /// product.
    pub fn empty() -> Self {
        DualPairing { pairs: Vec::new() }
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }
}

/// Link product of two CJ operators: trace over each dual pair `(B, B*)`
/// of `(m (x) n)(1 (x) Id^{BB*})` with `Id^{BB*} = sum_{ij} |ii><jj|`.
/// The result lives on the unpaired labels of `m` followed by those of `n`.
pub fn link_product(
    m: &LabeledOperator,
    n: &LabeledOperator,
    pairing: &DualPairing,
) -> Result<LabeledOperator> {
    let mut m_pair_pos = Vec::with_capacity(pairing.pairs().len());
    let mut n_pair_pos = Vec::with_capacity(pairing.pairs().len());
    for (a, b) in pairing.pairs() {
        let pa = m
            .layout()
            .position(a)
            .ok_or_else(|| Error::PairingMismatch(format!("`{a}` not in left operand")))?;
        let pb = n
            .layout()
            .position(b)
            .ok_or_else(|| Error::PairingMismatch(format!("`{b}` not in right operand")))?;
        let da = m.layout().subsystems()[pa].dim;
        let db = n.layout().subsystems()[pb].dim;
        if da != db {
            return Err(Error::PairingMismatch(format!(
                "`{a}` has dim {da}, `{b}` has dim {db}"
            )));
        }
        if m_pair_pos.contains(&pa) {
            return Err(Error::PairingMismatch(format!("`{a}` paired twice")));
        }
        if n_pair_pos.contains(&pb) {
            return Err(Error::PairingMismatch(format!("`{b}` paired twice")));
        }
        m_pair_pos.push(pa);
        n_pair_pos.push(pb);
    }
    let m_unpaired: Vec<usize> = (0..m.layout().len())
        .filter(|p| !m_pair_pos.contains(p))
        .collect();
    let n_unpaired: Vec<usize> = (0..n.layout().len())
        .filter(|p| !n_pair_pos.contains(p))
        .collect();

    let layout = SystemLayout::new(
        m_unpaired
            .iter()
            .map(|&p| m.layout().subsystems()[p].clone())
            .chain(
                n_unpaired
                    .iter()
                    .map(|&p| n.layout().subsystems()[p].clone()),
            )
            .collect(),
    )?;

    let mu = base_offsets(m.layout(), &m_unpaired);
    let mp = base_offsets(m.layout(), &m_pair_pos);
    let nu = base_offsets(n.layout(), &n_unpaired);
    let np = base_offsets(n.layout(), &n_pair_pos);

    let du_m = mu.len();
    let du_n = nu.len();
    let dp = mp.len();
    debug_assert_eq!(dp, np.len());

    let d = du_m * du_n;
    let mut out = DMatrix::zeros(d, d);
    let me = m.entries();
    let ne = n.entries();
    for (im, &bm) in mu.iter().enumerate() {
        for (jm, &bm2) in mu.iter().enumerate() {
            for (in_, &bn) in nu.iter().enumerate() {
                for (jn, &bn2) in nu.iter().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (pi, &bp_m) in mp.iter().enumerate() {
                        let bp_n = np[pi];
                        for (qi, &bq_m) in mp.iter().enumerate() {
                            let bq_n = np[qi];
                            acc += me[(bm + bp_m, bm2 + bq_m)] * ne[(bn + bp_n, bn2 + bq_n)];
                        }
                    }
                    out[(im * du_n + in_, jm * du_n + jn)] = acc;
                }
            }
        }
    }
    LabeledOperator::new(layout, out)
}

/// `Tr[a b]` for operators on the same label set, reordering `b` if its
/// factor order differs.
pub fn trace_product(a: &LabeledOperator, b: &LabeledOperator) -> Result<Complex64> {
    let labels: Vec<&str> = a.layout().labels().collect();
    let b = b.reorder(&labels)?;
    if b.layout() != a.layout() {
        return Err(Error::LayoutMismatch(
            "operators live on different spaces".to_string(),
        ));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    let d = a.dim();
    for i in 0..d {
        for j in 0..d {
            acc += a.entries()[(i, j)] * b.entries()[(j, i)];
        }
    }
    Ok(acc)
}

/// CJ operator of the identity channel between two equal-dimension systems:
/// `sum_{ij} |ii><jj|` on the layout `[a, b]`. The transposed CJ operator
/// used for side channels is the same matrix.
pub fn identity_cj(a: Subsystem, b: Subsystem) -> Result<LabeledOperator> {
    if a.dim != b.dim {
        return Err(Error::PairingMismatch(format!(
            "`{}` has dim {}, `{}` has dim {}",
            a.label, a.dim, b.label, b.dim
        )));
    }
    let d = a.dim;
    let layout = SystemLayout::new(vec![a, b])?;
    let mut entries = DMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            entries[(i * d + i, j * d + j)] = Complex64::new(1.0, 0.0);
        }
    }
    LabeledOperator::new(layout, entries)
}

/// CJ operator of the CP map with the given Kraus operators, on the layout
/// `[ins..., outs...]` with the output factors holding the dual copy.
pub fn cj_from_kraus(
    ins: Vec<Subsystem>,
    outs: Vec<Subsystem>,
    kraus: &[DMatrix<Complex64>],
) -> Result<LabeledOperator> {
    let d_in: usize = ins.iter().map(|s| s.dim).product();
    let d_out: usize = outs.iter().map(|s| s.dim).product();
    for k in kraus {
        if k.nrows() != d_out || k.ncols() != d_in {
            return Err(Error::BadShape {
                expected: d_out,
                rows: k.nrows(),
                cols: k.ncols(),
            });
        }
    }
    // T on (out, in): sum_K (K (x) 1)|Phi><Phi|(K (x) 1)^dag
    let mut t = DMatrix::zeros(d_out * d_in, d_out * d_in);
    for k in kraus {
        let mut v = DMatrix::zeros(d_out * d_in, 1);
        for o in 0..d_out {
            for i in 0..d_in {
                v[(o * d_in + i, 0)] = k[(o, i)];
            }
        }
        t += &v * v.adjoint();
    }
    let out_layout: Vec<Subsystem> = outs.iter().cloned().chain(ins.iter().cloned()).collect();
    let t_op = LabeledOperator::new(SystemLayout::new(out_layout)?, t)?;
    let want: Vec<String> = ins
        .iter()
        .chain(outs.iter())
        .map(|s| s.label.clone())
        .collect();
    let want_refs: Vec<&str> = want.iter().map(String::as_str).collect();
    t_op.transpose().reorder(&want_refs)
}

/// Generalized Born rule: `Tr[w (branch_1 (x) branch_2 (x) ...)]`, taking
/// the real part (the imaginary residual vanishes for Hermitian inputs).
pub fn born_probability(w: &LabeledOperator, branches: &[&LabeledOperator]) -> Result<f64> {
    let mut prod: Option<LabeledOperator> = None;
    for b in branches {
        prod = Some(match prod {
            None => (*b).clone(),
            Some(p) => p.tensor(b)?,
        });
    }
    let prod = prod.ok_or_else(|| Error::LayoutMismatch("no branches given".to_string()))?;
    Ok(trace_product(w, &prod)?.re)
}

/// A quantum instrument over a node sequence: PSD branches summing to a
/// deterministic comb.
#[derive(Clone, Debug)]
pub struct Instrument {
    pub seq: NodeSeq,
    pub branches: Vec<(String, LabeledOperator)>,
}

impl Instrument {
    pub fn new(seq: NodeSeq, branches: Vec<(String, LabeledOperator)>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::InvalidProcess("instrument with no branches".into()));
        }
        Ok(Instrument { seq, branches })
    }

    pub fn total(&self) -> Result<LabeledOperator> {
        let mut acc = self.branches[0].1.clone();
        for (_, b) in &self.branches[1..] {
            let labels: Vec<&str> = acc.layout().labels().collect();
            acc = acc.add(&b.reorder(&labels)?)?;
        }
        Ok(acc)
    }

    /// Every branch PSD and the branch sum a deterministic comb.
    pub fn validate(&self, tol: f64) -> Result<Verdict> {
        let mut v = Verdict::new();
        for (name, b) in &self.branches {
            let residual = match b.min_eigenvalue(tol) {
                Ok(min) => (-min).max(0.0),
                Err(_) => f64::INFINITY,
            };
            v.record(format!("branch_{name}_psd"), residual, tol);
        }
        let total = self.total()?;
        let comb = validate_comb_trace(&total, &self.seq, tol)?;
        for c in comb.checks {
            v.record(format!("sum_{}", c.name), c.residual, tol);
        }
        Ok(v)
    }
}

/// Split a random deterministic comb into `n_outcomes` PSD branches through
/// a random projective resolution of the identity.
pub fn random_instrument(seq: &NodeSeq, n_outcomes: usize, seed: u64) -> Result<Instrument> {
    let total = crate::comb::random_comb(seq, crate::comb::CombSampler::Network, seed)?;
    let d = total.dim();
    if n_outcomes == 0 || n_outcomes > d {
        return Err(Error::TooLarge(format!(
            "cannot split a dim-{d} comb into {n_outcomes} projective branches"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e3779b9));
    let g = DMatrix::from_fn(d, d, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let h = (&g + g.adjoint()).map(|z| z * Complex64::new(0.5, 0.0));
    let eig = h.symmetric_eigen();
    let sqrt = total.sqrt_psd(1e-9)?;
    let mut branches = Vec::with_capacity(n_outcomes);
    for outcome in 0..n_outcomes {
        let mut q = DMatrix::zeros(d, d);
        for col in (outcome..d).step_by(n_outcomes) {
            let u = eig.eigenvectors.column(col);
            q += &u * u.adjoint();
        }
        let q_op = LabeledOperator::new(total.layout().clone(), q)?;
        let branch = sqrt.matmul(&q_op)?.matmul(&sqrt)?;
        branches.push((outcome.to_string(), branch));
    }
    Instrument::new(seq.clone(), branches)
}

/// Tensor a transposed identity-channel CJ onto each intra-party gap,
/// turning an n-node process into one whose parties can causally forward
/// systems between their consecutive nodes. Gap systems are labeled `L1,
/// L2, ...` in order of creation; the scenario's nodes are enlarged
/// accordingly.
pub fn extend_with_side_channels(
    w: &LabeledOperator,
    s: &Scenario,
    gap_dims: &[Vec<usize>],
) -> Result<(LabeledOperator, Scenario)> {
    if gap_dims.len() != s.parties.len() {
        return Err(Error::BadDimension(format!(
            "{} gap-dimension lists for {} parties",
            gap_dims.len(),
            s.parties.len()
        )));
    }
    let mut extended = w.clone();
    let mut new_parties = Vec::with_capacity(s.parties.len());
    let mut counter = 0usize;
    for (party, dims) in s.parties.iter().zip(gap_dims) {
        let gaps = party.len().saturating_sub(1);
        if dims.len() != gaps {
            return Err(Error::BadDimension(format!(
                "party `{}` has {} gaps, got {} dims",
                party.party,
                gaps,
                dims.len()
            )));
        }
        let mut nodes = party.nodes.clone();
        for (gap, &dl) in dims.iter().enumerate() {
            let out_label = format!("L{}", counter + 1);
            let in_label = format!("L{}", counter + 2);
            counter += 2;
            for l in [&out_label, &in_label] {
                if extended.layout().contains(l) {
                    return Err(Error::LabelCollision(l.clone()));
                }
            }
            let out_sub = Subsystem::new(&out_label, dl, Role::DualOutput);
            let in_sub = Subsystem::new(&in_label, dl, Role::Input);
            extended = extended.tensor(&identity_cj(out_sub.clone(), in_sub.clone())?)?;
            nodes[gap].outs.push(out_sub);
            nodes[gap + 1].ins.push(in_sub);
        }
        new_parties.push(NodeSeq::new(party.party.clone(), nodes)?);
    }
    Ok((extended, Scenario::new(new_parties)?))
}

/// Condition a process on an operation applied at some party's first node:
/// `c Tr_consumed[(first_op (x) 1) w]`, with `c` fixed so that the result
/// carries the remaining scenario's output dimension as its trace. The
/// result must be a valid process on the remaining nodes; conditioning on a
/// non-first node generally is not, and then `PostSelectionDetected` is
/// returned.
pub fn conditional_pm(
    w: &LabeledOperator,
    first_op: &LabeledOperator,
    consumed: &[&str],
    remaining: &Scenario,
    tol: f64,
) -> Result<LabeledOperator> {
    for l in first_op.layout().labels() {
        if !consumed.contains(&l) {
            return Err(Error::LayoutMismatch(format!(
                "operation acts on `{l}` which is not consumed"
            )));
        }
    }
    for l in consumed {
        if !w.layout().contains(l) {
            return Err(Error::UnknownSubsystem(l.to_string()));
        }
    }
    let rest: Vec<Subsystem> = w
        .layout()
        .subsystems()
        .iter()
        .filter(|s| {
            !first_op.layout().contains(&s.label) && consumed.contains(&s.label.as_str())
        })
        .cloned()
        .collect();
    let mut op = first_op.clone();
    if !rest.is_empty() {
        op = op.tensor(&LabeledOperator::identity(SystemLayout::new(rest)?))?;
    }
    // contract the consumed block directly:
    // raw[u,v] = sum_{s,s'} op[s,s'] w[(s',u),(s,v)]
    let consumed_pos: Vec<usize> = consumed
        .iter()
        .map(|l| w.layout().position(l).expect("checked above"))
        .collect();
    let kept_pos: Vec<usize> = (0..w.layout().len())
        .filter(|p| !consumed_pos.contains(p))
        .collect();
    let consumed_in_w_order: Vec<&str> = w
        .layout()
        .subsystems()
        .iter()
        .filter(|s| consumed.contains(&s.label.as_str()))
        .map(|s| s.label.as_str())
        .collect();
    let op = op.reorder(&consumed_in_w_order)?;
    let kept_layout = SystemLayout::new(
        kept_pos
            .iter()
            .map(|&p| w.layout().subsystems()[p].clone())
            .collect(),
    )?;
    let sb = base_offsets(w.layout(), &{
        let mut sorted = consumed_pos.clone();
        sorted.sort_unstable();
        sorted
    });
    let ub = base_offsets(w.layout(), &kept_pos);
    let du = ub.len();
    let mut raw_entries = DMatrix::zeros(du, du);
    let we = w.entries();
    let oe = op.entries();
    for (s, &bs) in sb.iter().enumerate() {
        for (s2, &bs2) in sb.iter().enumerate() {
            let o = oe[(s, s2)];
            if o == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (u, &bu) in ub.iter().enumerate() {
                for (v, &bv) in ub.iter().enumerate() {
                    raw_entries[(u, v)] += o * we[(bs2 + bu, bs + bv)];
                }
            }
        }
    }
    let raw = LabeledOperator::new(kept_layout, raw_entries)?;

    let target = remaining.d_out()? as f64;
    let tr = raw.trace();
    if tr.norm() < 1e-12 {
        return Err(Error::ZeroProbability);
    }
    let result = raw.scale(Complex64::new(target, 0.0) / tr);
    let verdict = validate_mpm(&result, remaining, tol)?;
    if !verdict.valid {
        let failed: Vec<&str> = verdict
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        return Err(Error::PostSelectionDetected(format!(
            "conditional operator fails {} on the remaining nodes",
            failed.join(", ")
        )));
    }
    Ok(result)
}
