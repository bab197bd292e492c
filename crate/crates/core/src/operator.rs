//! Dense operator arithmetic on labeled tensor-product spaces.
//!
//! Every operator carries a [`SystemLayout`]: an ordered list of labeled
//! finite-dimensional subsystems. The matrix is stored in the product basis
//! of the layout, row-major over factor indices with the last subsystem
//! varying fastest.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// How a subsystem enters a process: as a node input, as the dual of a node
/// output, or as an ancillary system (link-product memory, game registers).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Input,
    DualOutput,
    Ancilla,
}

/// A labeled tensor factor with its dimension and role tag.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subsystem {
    pub label: String,
    pub dim: usize,
    pub role: Role,
}

impl Subsystem {
    pub fn new(label: impl Into<String>, dim: usize, role: Role) -> Self {
        Subsystem {
            label: label.into(),
            dim,
            role,
        }
    }

    /// Qubit input system.
    pub fn input(label: impl Into<String>) -> Self {
        Self::new(label, 2, Role::Input)
    }

    /// Qubit dual-output system.
    pub fn dual_output(label: impl Into<String>) -> Self {
        Self::new(label, 2, Role::DualOutput)
    }
}

/// Ordered list of subsystems fixing the tensor-factor order of all
/// operators defined on it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SystemLayout {
    subsystems: Vec<Subsystem>,
}

impl SystemLayout {
    pub fn new(subsystems: Vec<Subsystem>) -> Result<Self> {
        for (i, s) in subsystems.iter().enumerate() {
            if s.dim == 0 {
                return Err(Error::BadDimension(format!(
                    "subsystem `{}` has dimension 0",
                    s.label
                )));
            }
            if subsystems[..i].iter().any(|t| t.label == s.label) {
                return Err(Error::LabelCollision(s.label.clone()));
            }
        }
        Ok(SystemLayout { subsystems })
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn len(&self) -> usize {
        self.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.subsystems.iter().map(|s| s.dim).product()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.subsystems.iter().map(|s| s.label.as_str())
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.subsystems.iter().position(|s| s.label == label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.position(label).is_some()
    }

    pub fn get(&self, label: &str) -> Option<&Subsystem> {
        self.subsystems.iter().find(|s| s.label == label)
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        self.get(label)
            .map(|s| s.dim)
            .ok_or_else(|| Error::UnknownSubsystem(label.to_string()))
    }

    /// Product of the dimensions of all `Input`-tagged subsystems.
    pub fn d_in(&self) -> usize {
        self.subsystems
            .iter()
            .filter(|s| s.role == Role::Input)
            .map(|s| s.dim)
            .product()
    }

    /// Product of the dimensions of all `DualOutput`-tagged subsystems.
    pub fn d_out(&self) -> usize {
        self.subsystems
            .iter()
            .filter(|s| s.role == Role::DualOutput)
            .map(|s| s.dim)
            .product()
    }

    /// Concatenate two layouts; labels must stay unique.
    pub fn concat(&self, other: &SystemLayout) -> Result<SystemLayout> {
        let mut subsystems = self.subsystems.clone();
        subsystems.extend(other.subsystems.iter().cloned());
        SystemLayout::new(subsystems)
    }

    /// Row-major strides: `strides[k]` is the product of dims of subsystems
    /// after position `k`.
    pub fn strides(&self) -> Vec<usize> {
        let n = self.subsystems.len();
        let mut strides = vec![1usize; n];
        for k in (0..n.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.subsystems[k + 1].dim;
        }
        strides
    }

    fn positions_of(&self, labels: &[&str]) -> Result<Vec<usize>> {
        labels
            .iter()
            .map(|l| {
                self.position(l)
                    .ok_or_else(|| Error::UnknownSubsystem(l.to_string()))
            })
            .collect()
    }
}

/// Decompose the flat indices of the positions listed in `positions` into a
/// lookup table: for each flat sub-index over those positions, the
/// contribution to the full flat index.
pub(crate) fn base_offsets(layout: &SystemLayout, positions: &[usize]) -> Vec<usize> {
    let strides = layout.strides();
    let dims: Vec<usize> = positions
        .iter()
        .map(|&p| layout.subsystems()[p].dim)
        .collect();
    let total: usize = dims.iter().product();
    let mut out = vec![0usize; total];
    for (flat, slot) in out.iter_mut().enumerate() {
        let mut rem = flat;
        let mut acc = 0usize;
        // row-major over `positions` order, last varying fastest
        for k in (0..positions.len()).rev() {
            let c = rem % dims[k];
            rem /= dims[k];
            acc += c * strides[positions[k]];
        }
        *slot = acc;
    }
    out
}

/// A dense complex square matrix over a [`SystemLayout`].
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledOperator {
    layout: SystemLayout,
    entries: DMatrix<Complex64>,
}

impl LabeledOperator {
    pub fn new(layout: SystemLayout, entries: DMatrix<Complex64>) -> Result<Self> {
        let d = layout.total_dim();
        if entries.nrows() != d || entries.ncols() != d {
            return Err(Error::BadShape {
                expected: d,
                rows: entries.nrows(),
                cols: entries.ncols(),
            });
        }
        Ok(LabeledOperator { layout, entries })
    }

    pub fn zeros(layout: SystemLayout) -> Self {
        let d = layout.total_dim();
        LabeledOperator {
            layout,
            entries: DMatrix::zeros(d, d),
        }
    }

    pub fn identity(layout: SystemLayout) -> Self {
        let d = layout.total_dim();
        LabeledOperator {
            layout,
            entries: DMatrix::identity(d, d),
        }
    }

    /// 1x1 operator holding the scalar 1 on a dim-1 subsystem; the trivial
    /// system of comb embeddings.
    pub fn trivial(label: impl Into<String>, role: Role) -> Self {
        let layout = SystemLayout::new(vec![Subsystem::new(label, 1, role)])
            .expect("single subsystem cannot collide");
        LabeledOperator {
            layout,
            entries: DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)),
        }
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Kronecker product in concatenated factor order.
    pub fn tensor(&self, other: &LabeledOperator) -> Result<LabeledOperator> {
        let layout = self.layout.concat(&other.layout)?;
        let entries = self.entries.kronecker(&other.entries);
        Ok(LabeledOperator { layout, entries })
    }

    /// Trace out the given subsystems; remaining factors keep their order.
    pub fn partial_trace(&self, over: &[&str]) -> Result<LabeledOperator> {
        let traced = self.layout.positions_of(over)?;
        let mut is_traced = vec![false; self.layout.len()];
        for &p in &traced {
            is_traced[p] = true;
        }
        let kept: Vec<usize> = (0..self.layout.len()).filter(|k| !is_traced[*k]).collect();

        let kept_layout = SystemLayout::new(
            kept.iter()
                .map(|&k| self.layout.subsystems()[k].clone())
                .collect(),
        )?;
        let kept_base = base_offsets(&self.layout, &kept);
        let traced_base = base_offsets(&self.layout, &traced);

        let dk = kept_layout.total_dim();
        let mut out = DMatrix::zeros(dk, dk);
        for (i, &bi) in kept_base.iter().enumerate() {
            for (j, &bj) in kept_base.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for &bt in &traced_base {
                    acc += self.entries[(bi + bt, bj + bt)];
                }
                out[(i, j)] = acc;
            }
        }
        Ok(LabeledOperator {
            layout: kept_layout,
            entries: out,
        })
    }

    /// Replace the given subsystems by the maximally mixed state while
    /// keeping the rest: `m -> (1/d_S) 1_S (x) Tr_S[m]`, reordered back to
    /// this operator's layout. This is the depolarizing conditional
    /// expectation realised by a single ring monomial.
    pub fn conditional_expectation(&self, labels: &[&str]) -> Result<LabeledOperator> {
        if labels.is_empty() {
            return Ok(self.clone());
        }
        let positions = self.layout.positions_of(labels)?;
        let mut is_target = vec![false; self.layout.len()];
        for &p in &positions {
            is_target[p] = true;
        }
        let kept: Vec<usize> = (0..self.layout.len()).filter(|k| !is_target[*k]).collect();
        let kept_base = base_offsets(&self.layout, &kept);
        let target_base = base_offsets(&self.layout, &positions);
        let d_s: usize = positions
            .iter()
            .map(|&p| self.layout.subsystems()[p].dim)
            .product();

        let pt = self.partial_trace(labels)?;
        let inv = Complex64::new(1.0 / d_s as f64, 0.0);
        let d = self.dim();
        let mut out = DMatrix::zeros(d, d);
        for (i, &bi) in kept_base.iter().enumerate() {
            for (j, &bj) in kept_base.iter().enumerate() {
                let v = pt.entries[(i, j)] * inv;
                if v != Complex64::new(0.0, 0.0) {
                    for &bt in &target_base {
                        out[(bi + bt, bj + bt)] = v;
                    }
                }
            }
        }
        Ok(LabeledOperator {
            layout: self.layout.clone(),
            entries: out,
        })
    }

    /// Hilbert-Schmidt inner product `Tr[a^dag b]`; conjugate-linear in
    /// `self`.
    pub fn hs_inner(&self, other: &LabeledOperator) -> Result<Complex64> {
        self.check_same_layout(other)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..self.entries.ncols() {
            for i in 0..self.entries.nrows() {
                acc += self.entries[(i, j)].conj() * other.entries[(i, j)];
            }
        }
        Ok(acc)
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.diagonal().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `||m - m^dag||_F / max(1, ||m||_F)`.
    pub fn hermiticity_residual(&self) -> f64 {
        let diff = &self.entries - self.entries.adjoint();
        let num = diff.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        num / self.frobenius_norm().max(1.0)
    }

    /// Smallest eigenvalue; requires Hermiticity within `tol`.
    pub fn min_eigenvalue(&self, tol: f64) -> Result<f64> {
        let residual = self.hermiticity_residual();
        if residual > tol {
            return Err(Error::NotHermitian { residual });
        }
        // symmetrize so the eigensolver sees an exactly Hermitian matrix
        let h = (&self.entries + self.entries.adjoint()).scale(0.5);
        let eig = h.symmetric_eigen();
        Ok(eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min))
    }

    /// True iff the smallest eigenvalue is `>= -tol`.
    pub fn is_psd(&self, tol: f64) -> Result<bool> {
        Ok(self.min_eigenvalue(tol)? >= -tol)
    }

    /// Matrix square root of a PSD operator, clamping tiny negative
    /// eigenvalues to zero.
    pub fn sqrt_psd(&self, tol: f64) -> Result<LabeledOperator> {
        let min = self.min_eigenvalue(tol)?;
        if min < -tol {
            return Err(Error::InvalidProcess(format!(
                "matrix square root of a non-PSD operator (min eigenvalue {min:.3e})"
            )));
        }
        let h = (&self.entries + self.entries.adjoint()).scale(0.5);
        let eig = h.symmetric_eigen();
        let d = self.dim();
        let mut s = DMatrix::zeros(d, d);
        for k in 0..d {
            s[(k, k)] = Complex64::new(eig.eigenvalues[k].max(0.0).sqrt(), 0.0);
        }
        let entries = &eig.eigenvectors * s * eig.eigenvectors.adjoint();
        Ok(LabeledOperator {
            layout: self.layout.clone(),
            entries,
        })
    }

    /// Permute tensor factors into the given label order.
    pub fn reorder(&self, labels: &[&str]) -> Result<LabeledOperator> {
        if labels.len() != self.layout.len() {
            return Err(Error::LayoutMismatch(format!(
                "reorder lists {} labels, layout has {}",
                labels.len(),
                self.layout.len()
            )));
        }
        let positions = self.layout.positions_of(labels)?;
        {
            let mut seen = vec![false; positions.len()];
            for &p in &positions {
                if seen[p] {
                    return Err(Error::LabelCollision(
                        self.layout.subsystems()[p].label.clone(),
                    ));
                }
                seen[p] = true;
            }
        }
        if positions.iter().enumerate().all(|(k, &p)| k == p) {
            return Ok(self.clone());
        }
        let new_layout = SystemLayout::new(
            positions
                .iter()
                .map(|&p| self.layout.subsystems()[p].clone())
                .collect(),
        )?;
        let old_strides = self.layout.strides();
        let new_dims: Vec<usize> = new_layout.subsystems().iter().map(|s| s.dim).collect();
        let d = self.dim();
        // old flat index corresponding to each new flat index
        let mut old_of_new = vec![0usize; d];
        for (new_flat, slot) in old_of_new.iter_mut().enumerate() {
            let mut rem = new_flat;
            let mut acc = 0usize;
            for k in (0..new_dims.len()).rev() {
                let c = rem % new_dims[k];
                rem /= new_dims[k];
                acc += c * old_strides[positions[k]];
            }
            *slot = acc;
        }
        let mut out = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                out[(i, j)] = self.entries[(old_of_new[i], old_of_new[j])];
            }
        }
        Ok(LabeledOperator {
            layout: new_layout,
            entries: out,
        })
    }

    /// Reorder `other` to this operator's label order and return the
    /// relative Frobenius distance `||a - b|| / max(1, ||a||)`.
    pub fn distance(&self, other: &LabeledOperator) -> Result<f64> {
        let labels: Vec<&str> = self.layout.labels().collect();
        let aligned = other.reorder(&labels)?;
        if aligned.layout != self.layout {
            return Err(Error::LayoutMismatch(
                "subsystem dimensions differ".to_string(),
            ));
        }
        let diff = &self.entries - aligned.entries;
        let num = diff.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        Ok(num / self.frobenius_norm().max(1.0))
    }

    /// Remove dim-1 factors (the trivial ends of comb embeddings).
    pub fn drop_trivial(&self) -> LabeledOperator {
        let kept: Vec<usize> = (0..self.layout.len())
            .filter(|&k| self.layout.subsystems()[k].dim > 1)
            .collect();
        if kept.len() == self.layout.len() {
            return self.clone();
        }
        let layout = SystemLayout::new(
            kept.iter()
                .map(|&k| self.layout.subsystems()[k].clone())
                .collect(),
        )
        .expect("kept labels stay unique");
        LabeledOperator {
            layout,
            entries: self.entries.clone(),
        }
    }

    pub fn scale(&self, c: Complex64) -> LabeledOperator {
        LabeledOperator {
            layout: self.layout.clone(),
            entries: self.entries.scale_complex(c),
        }
    }

    pub fn adjoint(&self) -> LabeledOperator {
        LabeledOperator {
            layout: self.layout.clone(),
            entries: self.entries.adjoint(),
        }
    }

    /// Global transpose in the product basis of the layout.
    pub fn transpose(&self) -> LabeledOperator {
        LabeledOperator {
            layout: self.layout.clone(),
            entries: self.entries.transpose(),
        }
    }

    /// Matrix product; both operands must share the layout.
    pub fn matmul(&self, other: &LabeledOperator) -> Result<LabeledOperator> {
        self.check_same_layout(other)?;
        Ok(LabeledOperator {
            layout: self.layout.clone(),
            entries: &self.entries * &other.entries,
        })
    }

    pub fn add(&self, other: &LabeledOperator) -> Result<LabeledOperator> {
        self.check_same_layout(other)?;
        Ok(LabeledOperator {
            layout: self.layout.clone(),
            entries: &self.entries + &other.entries,
        })
    }

    pub fn sub(&self, other: &LabeledOperator) -> Result<LabeledOperator> {
        self.check_same_layout(other)?;
        Ok(LabeledOperator {
            layout: self.layout.clone(),
            entries: &self.entries - &other.entries,
        })
    }

    fn check_same_layout(&self, other: &LabeledOperator) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch(format!(
                "[{}] vs [{}]",
                self.layout.labels().collect::<Vec<_>>().join(","),
                other.layout.labels().collect::<Vec<_>>().join(","),
            )));
        }
        Ok(())
    }
}

trait ScaleComplex {
    fn scale_complex(&self, c: Complex64) -> DMatrix<Complex64>;
}

impl ScaleComplex for DMatrix<Complex64> {
    fn scale_complex(&self, c: Complex64) -> DMatrix<Complex64> {
        self.map(|z| z * c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qubit_layout(labels: &[&str]) -> SystemLayout {
        SystemLayout::new(
            labels
                .iter()
                .map(|l| Subsystem::new(*l, 2, Role::Input))
                .collect(),
        )
        .unwrap()
    }

    pub(crate) fn random_operator(layout: &SystemLayout, seed: u64) -> LabeledOperator {
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

    #[test]
    fn tensor_of_identities_is_identity() {
        let a = LabeledOperator::identity(
            SystemLayout::new(vec![Subsystem::new("X", 2, Role::Input)]).unwrap(),
        );
        let b = LabeledOperator::identity(
            SystemLayout::new(vec![Subsystem::new("Y", 3, Role::Input)]).unwrap(),
        );
        let t = a.tensor(&b).unwrap();
        assert_eq!(t.dim(), 6);
        assert_eq!(t.entries(), &DMatrix::identity(6, 6));
    }

    #[test]
    fn tensor_rejects_label_collision() {
        let a = LabeledOperator::identity(qubit_layout(&["X"]));
        let b = LabeledOperator::identity(qubit_layout(&["X"]));
        assert!(matches!(a.tensor(&b), Err(Error::LabelCollision(_))));
    }

    #[test]
    fn pauli_zz_diagonal() {
        let z = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(-1.0, 0.0),
        ]));
        let a = LabeledOperator::new(qubit_layout(&["A0"]), z.clone()).unwrap();
        let b = LabeledOperator::new(qubit_layout(&["B0"]), z).unwrap();
        let t = a.tensor(&b).unwrap();
        let expect = [1.0, -1.0, -1.0, 1.0];
        for (k, &e) in expect.iter().enumerate() {
            assert_eq!(t.entries()[(k, k)], Complex64::new(e, 0.0));
        }
    }

    #[test]
    fn tensor_trace_factorises() {
        let layout_a = qubit_layout(&["P"]);
        let layout_b = SystemLayout::new(vec![Subsystem::new("Q", 3, Role::Input)]).unwrap();
        let rho = random_hermitian(&layout_a, 7);
        let one = LabeledOperator::identity(layout_b);
        let t = rho.tensor(&one).unwrap();
        let got = t.trace();
        let want = rho.trace() * Complex64::new(3.0, 0.0);
        assert!((got - want).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_identity() {
        let m = LabeledOperator::identity(qubit_layout(&["X", "Y"]));
        let r = m.partial_trace(&["Y"]).unwrap();
        assert_eq!(r.dim(), 2);
        assert!((r.entries()[(0, 0)] - Complex64::new(2.0, 0.0)).norm() < 1e-15);
        assert!((r.entries()[(1, 1)] - Complex64::new(2.0, 0.0)).norm() < 1e-15);
        assert!(r.entries()[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn partial_trace_unknown_label() {
        let m = LabeledOperator::identity(qubit_layout(&["X"]));
        assert!(matches!(
            m.partial_trace(&["Z"]),
            Err(Error::UnknownSubsystem(_))
        ));
    }

    #[test]
    fn partial_trace_of_tensor_scales_first_factor() {
        let la = qubit_layout(&["A"]);
        let lb = SystemLayout::new(vec![Subsystem::new("B", 3, Role::Input)]).unwrap();
        let a = random_hermitian(&la, 1);
        let b = random_hermitian(&lb, 2);
        let t = a.tensor(&b).unwrap();
        let r = t.partial_trace(&["B"]).unwrap();
        let want = a.scale(b.trace());
        assert!(r.distance(&want).unwrap() < 1e-12);
    }

    #[test]
    fn partial_trace_matches_bruteforce_index_sum() {
        // three factors of dims 2,3,2; trace the middle one by explicit sums
        let layout = SystemLayout::new(vec![
            Subsystem::new("U", 2, Role::Input),
            Subsystem::new("V", 3, Role::Input),
            Subsystem::new("W", 2, Role::Input),
        ])
        .unwrap();
        let m = random_operator(&layout, 42);
        let r = m.partial_trace(&["V"]).unwrap();
        for u in 0..2 {
            for w in 0..2 {
                for u2 in 0..2 {
                    for w2 in 0..2 {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for v in 0..3 {
                            let row = u * 6 + v * 2 + w;
                            let col = u2 * 6 + v * 2 + w2;
                            acc += m.entries()[(row, col)];
                        }
                        let got = r.entries()[(u * 2 + w, u2 * 2 + w2)];
                        assert!((got - acc).norm() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn partial_trace_order_independent() {
        let layout = qubit_layout(&["X", "Y", "Z"]);
        let m = random_operator(&layout, 3);
        let a = m
            .partial_trace(&["X"])
            .unwrap()
            .partial_trace(&["Y"])
            .unwrap();
        let b = m
            .partial_trace(&["Y"])
            .unwrap()
            .partial_trace(&["X"])
            .unwrap();
        assert!(a.distance(&b).unwrap() < 1e-14);
        let c = m.partial_trace(&["Y", "X"]).unwrap();
        assert!(a.distance(&c).unwrap() < 1e-14);
    }

    #[test]
    fn hs_inner_identity() {
        let m = LabeledOperator::identity(qubit_layout(&["X", "Y"]));
        assert!((m.hs_inner(&m).unwrap() - Complex64::new(4.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn hs_inner_matches_elementwise_sum() {
        let layout = qubit_layout(&["X", "Y"]);
        let a = random_operator(&layout, 10);
        let b = random_operator(&layout, 11);
        let mut want = Complex64::new(0.0, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                want += a.entries()[(i, j)].conj() * b.entries()[(i, j)];
            }
        }
        assert!((a.hs_inner(&b).unwrap() - want).norm() < 1e-13);
        // conjugate symmetry
        let ba = b.hs_inner(&a).unwrap();
        assert!((a.hs_inner(&b).unwrap() - ba.conj()).norm() < 1e-13);
    }

    #[test]
    fn is_psd_detects_negative_eigenvalue() {
        let layout = SystemLayout::new(vec![Subsystem::new("X", 2, Role::Input)]).unwrap();
        let m = LabeledOperator::new(
            layout.clone(),
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(-0.1, 0.0),
            ])),
        )
        .unwrap();
        assert!(!m.is_psd(1e-9).unwrap());
        let id = LabeledOperator::identity(layout).scale(Complex64::new(0.5, 0.0));
        assert!(id.is_psd(1e-9).unwrap());
    }

    #[test]
    fn is_psd_rejects_non_hermitian() {
        let layout = qubit_layout(&["X"]);
        let m = random_operator(&layout, 5);
        assert!(matches!(m.is_psd(1e-9), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn trace_of_identity() {
        let layout = qubit_layout(&["X", "Y", "Z"]);
        let m = LabeledOperator::identity(layout);
        assert!((m.trace() - Complex64::new(8.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn reorder_roundtrip() {
        let layout = SystemLayout::new(vec![
            Subsystem::new("U", 2, Role::Input),
            Subsystem::new("V", 3, Role::DualOutput),
            Subsystem::new("W", 2, Role::Input),
        ])
        .unwrap();
        let m = random_operator(&layout, 9);
        let p = m.reorder(&["W", "U", "V"]).unwrap();
        assert_eq!(
            p.layout().labels().collect::<Vec<_>>(),
            vec!["W", "U", "V"]
        );
        let back = p.reorder(&["U", "V", "W"]).unwrap();
        assert!(back.distance(&m).unwrap() < 1e-14);
        // trace invariant under factor permutation
        assert!((p.trace() - m.trace()).norm() < 1e-13);
    }

    #[test]
    fn reorder_is_tensor_swap() {
        let la = qubit_layout(&["A"]);
        let lb = SystemLayout::new(vec![Subsystem::new("B", 3, Role::Input)]).unwrap();
        let a = random_hermitian(&la, 21);
        let b = random_hermitian(&lb, 22);
        let ab = a.tensor(&b).unwrap();
        let ba = b.tensor(&a).unwrap();
        assert!(ab.reorder(&["B", "A"]).unwrap().distance(&ba).unwrap() < 1e-13);
    }

    #[test]
    fn conditional_expectation_depolarizes() {
        let layout = qubit_layout(&["X", "Y"]);
        let m = random_hermitian(&layout, 13);
        let r = m.conditional_expectation(&["X"]).unwrap();
        // expected: 1^X/2 (x) Tr_X m
        let pt = m.partial_trace(&["X"]).unwrap();
        let idx = LabeledOperator::identity(qubit_layout(&["X"])).scale(Complex64::new(0.5, 0.0));
        let want = idx.tensor(&pt).unwrap();
        assert!(r.distance(&want).unwrap() < 1e-13);
        // trace preserved
        assert!((r.trace() - m.trace()).norm() < 1e-12);
    }

    #[test]
    fn sqrt_psd_squares_back() {
        let layout = qubit_layout(&["X", "Y"]);
        let h = random_hermitian(&layout, 33);
        let psd = h.matmul(&h).unwrap(); // h^2 is PSD
        let s = psd.sqrt_psd(1e-9).unwrap();
        let back = s.matmul(&s).unwrap();
        assert!(back.distance(&psd).unwrap() < 1e-10);
    }
}
