//! Hilbert-Schmidt product bases and multi-index expansion of operators.
//!
//! Each subsystem of dimension `d` gets `d^2` Hermitian basis elements with
//! element 0 the identity, all others traceless, and `Tr[s_i s_j] = d d_ij`.
//! Qubits get the Pauli basis {1, x, y, z}; higher dimensions a rescaled
//! Gell-Mann-type construction with the same four properties.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::{LabeledOperator, SystemLayout};

const MAX_SUBSYSTEM_DIM: usize = 64;

/// One basis index per subsystem, each in `[0, d_k^2)`. The all-zeros index
/// names the identity element.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&i| i == 0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Product basis over a layout; element lists are per subsystem in layout
/// order.
#[derive(Clone, Debug)]
pub struct HsBasis {
    layout: SystemLayout,
    elements: Vec<Vec<DMatrix<Complex64>>>,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Gell-Mann-type Hermitian basis for one subsystem, rescaled so that
/// `Tr[s_i s_j] = d d_ij`. For d = 2 this is exactly {1, x, y, z}.
fn single_system_basis(d: usize) -> Result<Vec<DMatrix<Complex64>>> {
    if d == 0 || d > MAX_SUBSYSTEM_DIM {
        return Err(Error::UnsupportedDimension(d));
    }
    let mut out = Vec::with_capacity(d * d);
    out.push(DMatrix::identity(d, d));
    if d == 1 {
        return Ok(out);
    }
    let scale = (d as f64 / 2.0).sqrt();
    for j in 0..d {
        for k in (j + 1)..d {
            let mut sym = DMatrix::zeros(d, d);
            sym[(j, k)] = c(scale, 0.0);
            sym[(k, j)] = c(scale, 0.0);
            out.push(sym);
            let mut asym = DMatrix::zeros(d, d);
            asym[(j, k)] = c(0.0, -scale);
            asym[(k, j)] = c(0.0, scale);
            out.push(asym);
        }
    }
    for l in 1..d {
        let norm = (2.0 / (l as f64 * (l + 1) as f64)).sqrt() * scale;
        let mut diag = DMatrix::zeros(d, d);
        for j in 0..l {
            diag[(j, j)] = c(norm, 0.0);
        }
        diag[(l, l)] = c(-(l as f64) * norm, 0.0);
        out.push(diag);
    }
    Ok(out)
}

impl HsBasis {
    /// The default product basis for a layout.
    pub fn default_for(layout: &SystemLayout) -> Result<HsBasis> {
        let elements = layout
            .subsystems()
            .iter()
            .map(|s| single_system_basis(s.dim))
            .collect::<Result<Vec<_>>>()?;
        Ok(HsBasis {
            layout: layout.clone(),
            elements,
        })
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    /// Basis elements of the `k`-th subsystem.
    pub fn elements_for(&self, k: usize) -> &[DMatrix<Complex64>] {
        &self.elements[k]
    }

    /// Per-subsystem index ranges `d_k^2`.
    pub fn index_ranges(&self) -> Vec<usize> {
        self.elements.iter().map(|e| e.len()).collect()
    }

    /// Number of multi-indices, i.e. the dimension of the operator space.
    pub fn index_count(&self) -> usize {
        self.elements.iter().map(|e| e.len()).product()
    }

    fn check_index(&self, idx: &MultiIndex) -> Result<()> {
        if idx.len() != self.elements.len() {
            return Err(Error::BadIndex(format!(
                "multi-index has {} components, layout has {} subsystems",
                idx.len(),
                self.elements.len()
            )));
        }
        for (k, &i) in idx.0.iter().enumerate() {
            if i >= self.elements[k].len() {
                return Err(Error::BadIndex(format!(
                    "component {k} is {i}, range is [0, {})",
                    self.elements[k].len()
                )));
            }
        }
        Ok(())
    }

    /// Materialize the product element `s_i` as a labeled operator.
    pub fn element(&self, idx: &MultiIndex) -> Result<LabeledOperator> {
        self.check_index(idx)?;
        let mut m = DMatrix::from_element(1, 1, c(1.0, 0.0));
        for (k, &i) in idx.0.iter().enumerate() {
            m = m.kronecker(&self.elements[k][i]);
        }
        LabeledOperator::new(self.layout.clone(), m)
    }

    /// Iterate all multi-indices in row-major order (last subsystem fastest).
    pub fn all_indices(&self) -> impl Iterator<Item = MultiIndex> + '_ {
        let ranges = self.index_ranges();
        let total = self.index_count();
        (0..total).map(move |flat| {
            let mut rem = flat;
            let mut idx = vec![0usize; ranges.len()];
            for k in (0..ranges.len()).rev() {
                idx[k] = rem % ranges[k];
                rem /= ranges[k];
            }
            MultiIndex(idx)
        })
    }
}

/// Sparse coefficient map of an operator in a product basis.
#[derive(Clone, Debug, PartialEq)]
pub struct HsExpansion {
    layout: SystemLayout,
    coeffs: BTreeMap<MultiIndex, Complex64>,
}

impl HsExpansion {
    pub fn new(layout: SystemLayout, coeffs: BTreeMap<MultiIndex, Complex64>) -> Self {
        HsExpansion { layout, coeffs }
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn coeffs(&self) -> &BTreeMap<MultiIndex, Complex64> {
        &self.coeffs
    }

    pub fn get(&self, idx: &MultiIndex) -> Complex64 {
        self.coeffs.get(idx).copied().unwrap_or(c(0.0, 0.0))
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Drop coefficients with modulus `<= cutoff`.
    pub fn prune(mut self, cutoff: f64) -> Self {
        self.coeffs.retain(|_, v| v.norm() > cutoff);
        self
    }
}

/// Contract one tensor factor of `block` with every basis element of that
/// factor, recursing over the remaining factors.
fn expand_rec(
    elems: &[Vec<DMatrix<Complex64>>],
    block: &DMatrix<Complex64>,
    prefix: &mut Vec<usize>,
    out: &mut BTreeMap<MultiIndex, Complex64>,
) {
    if elems.is_empty() {
        let v = block[(0, 0)];
        if v != c(0.0, 0.0) {
            out.insert(MultiIndex(prefix.clone()), v);
        }
        return;
    }
    let basis = &elems[0];
    let d: usize = (basis.len() as f64).sqrt().round() as usize;
    let dsub = block.nrows() / d;
    for (i, sigma) in basis.iter().enumerate() {
        // B_i = sum_{a,b} sigma[b,a] * block_{a,b}
        let mut sub = DMatrix::zeros(dsub, dsub);
        for a in 0..d {
            for b in 0..d {
                let w = sigma[(b, a)];
                if w == c(0.0, 0.0) {
                    continue;
                }
                for r in 0..dsub {
                    for cc in 0..dsub {
                        sub[(r, cc)] += w * block[(a * dsub + r, b * dsub + cc)];
                    }
                }
            }
        }
        prefix.push(i);
        expand_rec(&elems[1..], &sub, prefix, out);
        prefix.pop();
    }
}

/// Coefficients `c_i = Tr[s_i m] / d`; exact zeros are dropped, everything
/// else is kept.
pub fn expand(m: &LabeledOperator, basis: &HsBasis) -> Result<HsExpansion> {
    if m.layout() != basis.layout() {
        return Err(Error::LayoutMismatch(
            "operator and basis layouts differ".to_string(),
        ));
    }
    let mut coeffs = BTreeMap::new();
    let mut prefix = Vec::new();
    expand_rec(&basis.elements, m.entries(), &mut prefix, &mut coeffs);
    let d = m.dim() as f64;
    let inv = c(1.0 / d, 0.0);
    for v in coeffs.values_mut() {
        *v *= inv;
    }
    Ok(HsExpansion {
        layout: m.layout().clone(),
        coeffs,
    })
}

/// Sum the stored coefficients against their product-basis elements.
pub fn reconstruct(e: &HsExpansion, basis: &HsBasis) -> Result<LabeledOperator> {
    if e.layout() != basis.layout() {
        return Err(Error::LayoutMismatch(
            "expansion and basis layouts differ".to_string(),
        ));
    }
    let mut acc = LabeledOperator::zeros(e.layout().clone());
    for (idx, v) in e.coeffs() {
        let sigma = basis.element(idx)?;
        acc = acc.add(&sigma.scale(*v))?;
    }
    Ok(acc)
}
