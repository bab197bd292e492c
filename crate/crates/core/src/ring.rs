//! The commutative ring of depolarizing superoperators.
//!
//! A [`RingElement`] is a formal polynomial in commuting idempotent
//! generators, one per subsystem label: the generator `X` acts on operators
//! as `m -> (1/d_X) 1_X (x) Tr_X[m]`. Monomials are label *sets* (the
//! generators square to themselves) and coefficients are exact rationals, so
//! idempotency checks are exact. Idempotent elements are projectors; their
//! diagonal action on a Hilbert-Schmidt product basis is captured by a
//! [`KeepSet`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::basis::{HsBasis, MultiIndex};
use crate::error::{Error, Result};
use crate::operator::{LabeledOperator, SystemLayout};

pub type Monomial = BTreeSet<String>;

/// Formal polynomial over commuting idempotent depolarizer generators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RingElement {
    terms: BTreeMap<Monomial, Rational64>,
}

impl RingElement {
    pub fn zero() -> Self {
        RingElement {
            terms: BTreeMap::new(),
        }
    }

    /// The multiplicative unit `1`, i.e. the identity superoperator.
    pub fn one() -> Self {
        Self::monomial(Vec::<String>::new())
    }

    /// Single monomial with coefficient 1.
    pub fn monomial<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mono: Monomial = labels.into_iter().map(Into::into).collect();
        let mut terms = BTreeMap::new();
        terms.insert(mono, Rational64::one());
        RingElement { terms }
    }

    /// Depolarizer over the given labels, validated against a layout.
    pub fn dep(layout: &SystemLayout, labels: &[&str]) -> Result<Self> {
        for l in labels {
            if !layout.contains(l) {
                return Err(Error::UnknownSubsystem(l.to_string()));
            }
        }
        Ok(Self::monomial(labels.iter().map(|l| l.to_string())))
    }

    /// The absorbing element `D`: depolarizer over every subsystem of the
    /// layout, projecting onto the span of the unit matrix.
    pub fn full_depolarizer(layout: &SystemLayout) -> Self {
        Self::monomial(layout.labels().map(str::to_string))
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, Rational64> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// All labels mentioned by any monomial.
    pub fn labels(&self) -> BTreeSet<&str> {
        self.terms
            .keys()
            .flat_map(|m| m.iter().map(String::as_str))
            .collect()
    }

    pub fn coefficient_sum(&self) -> Rational64 {
        self.terms.values().sum()
    }

    // zero-sum entries are dropped by `canonicalize`
    fn insert_term(terms: &mut BTreeMap<Monomial, Rational64>, mono: Monomial, coeff: Rational64) {
        if coeff.is_zero() {
            return;
        }
        *terms.entry(mono).or_insert_with(Rational64::zero) += coeff;
    }

    fn canonicalize(mut self) -> Self {
        self.terms.retain(|_, c| !c.is_zero());
        self
    }

    pub fn add(&self, other: &RingElement) -> RingElement {
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            Self::insert_term(&mut terms, m.clone(), *c);
        }
        RingElement { terms }.canonicalize()
    }

    pub fn sub(&self, other: &RingElement) -> RingElement {
        self.add(&other.scale(-Rational64::one()))
    }

    pub fn scale(&self, q: Rational64) -> RingElement {
        if q.is_zero() {
            return RingElement::zero();
        }
        RingElement {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * q)).collect(),
        }
    }

    /// Ring product: bilinear, monomial product is label-set union.
    pub fn mul(&self, other: &RingElement) -> RingElement {
        let mut terms = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let mono: Monomial = ma.union(mb).cloned().collect();
                Self::insert_term(&mut terms, mono, ca * cb);
            }
        }
        RingElement { terms }.canonicalize()
    }

    /// Symbolic idempotency: `r * r == r`.
    pub fn is_idempotent(&self) -> bool {
        self.mul(self) == *self
    }

    /// Replace a generator by the unit (valid when the labeled subsystem has
    /// dimension 1, where the depolarizer is the identity map).
    pub fn substitute_unit(&self, label: &str) -> RingElement {
        let mut terms = BTreeMap::new();
        for (m, c) in &self.terms {
            let mut mono = m.clone();
            mono.remove(label);
            Self::insert_term(&mut terms, mono, *c);
        }
        RingElement { terms }.canonicalize()
    }

    /// Apply the superoperator to an operator: each monomial becomes a
    /// depolarizing conditional expectation, summed with its coefficient.
    pub fn apply(&self, m: &LabeledOperator) -> Result<LabeledOperator> {
        for l in self.labels() {
            if !m.layout().contains(l) {
                return Err(Error::UnknownSubsystem(l.to_string()));
            }
        }
        let mut acc = LabeledOperator::zeros(m.layout().clone());
        for (mono, coeff) in &self.terms {
            let labels: Vec<&str> = mono.iter().map(String::as_str).collect();
            let term = m.conditional_expectation(&labels)?;
            let c = *coeff.numer() as f64 / *coeff.denom() as f64;
            acc = acc.add(&term.scale(num_complex::Complex64::new(c, 0.0)))?;
        }
        Ok(acc)
    }

    /// Eigenvalue of the element on any basis element whose zero-index
    /// subsystems are exactly the positions flagged in `zero_positions`.
    fn eigenvalue_on_pattern(
        &self,
        layout: &SystemLayout,
        zero_positions: &[bool],
    ) -> Result<Rational64> {
        let mut acc = Rational64::zero();
        'term: for (mono, coeff) in &self.terms {
            for l in mono {
                let p = layout
                    .position(l)
                    .ok_or_else(|| Error::UnknownSubsystem(l.clone()))?;
                if !zero_positions[p] {
                    continue 'term;
                }
            }
            acc += coeff;
        }
        Ok(acc)
    }

    /// Diagonal keep-set of an idempotent element over a basis: the set of
    /// multi-indices whose basis elements the projector fixes (everything
    /// else is annihilated).
    pub fn to_keep_set(&self, basis: &HsBasis) -> Result<KeepSet> {
        if !self.is_idempotent() {
            return Err(Error::NotAProjector(format!("{self}")));
        }
        let layout = basis.layout();
        let n = layout.len();
        if n > 24 {
            return Err(Error::TooLarge(format!(
                "keep-set table over {n} subsystems"
            )));
        }
        let mut keep = vec![false; 1usize << n];
        let mut pattern = vec![false; n];
        for bits in 0..(1usize << n) {
            for (k, slot) in pattern.iter_mut().enumerate() {
                *slot = bits & (1 << k) != 0;
            }
            let ev = self.eigenvalue_on_pattern(layout, &pattern)?;
            keep[bits] = if ev.is_one() {
                true
            } else if ev.is_zero() {
                false
            } else {
                return Err(Error::NotAProjector(format!(
                    "eigenvalue {ev} on a basis element"
                )));
            };
        }
        Ok(KeepSet {
            layout: layout.clone(),
            index_ranges: basis.index_ranges(),
            keep_by_pattern: keep,
        })
    }

    /// True iff symbolically idempotent and self-adjoint against a randomized
    /// battery of Hilbert-Schmidt pairings on the layout.
    pub fn is_self_adjoint_projector(&self, layout: &SystemLayout) -> bool {
        if !self.is_idempotent() {
            return false;
        }
        for l in self.labels() {
            if !layout.contains(l) {
                return false;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f_ad01);
        let d = layout.total_dim();
        for _ in 0..20 {
            let a = random_operator(layout, &mut rng);
            let b = random_operator(layout, &mut rng);
            let ra = match self.apply(&a) {
                Ok(x) => x,
                Err(_) => return false,
            };
            let rb = match self.apply(&b) {
                Ok(x) => x,
                Err(_) => return false,
            };
            let lhs = match a.hs_inner(&rb) {
                Ok(x) => x,
                Err(_) => return false,
            };
            let rhs = match ra.hs_inner(&b) {
                Ok(x) => x,
                Err(_) => return false,
            };
            if (lhs - rhs).norm() > 1e-9 * (d as f64) {
                return false;
            }
        }
        true
    }
}

fn random_operator(layout: &SystemLayout, rng: &mut ChaCha8Rng) -> LabeledOperator {
    let d = layout.total_dim();
    let entries = nalgebra::DMatrix::from_fn(d, d, |_, _| {
        num_complex::Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    LabeledOperator::new(layout.clone(), entries).expect("square by construction")
}

/// Union of two commuting projectors: `a + b - a*b`, projecting onto the
/// span of the union of their subspaces.
pub fn proj_union(a: &RingElement, b: &RingElement) -> Result<RingElement> {
    check_projector(a)?;
    check_projector(b)?;
    Ok(a.add(b).sub(&a.mul(b)))
}

/// Intersection of two commuting projectors: their product.
pub fn proj_intersect(a: &RingElement, b: &RingElement) -> Result<RingElement> {
    check_projector(a)?;
    check_projector(b)?;
    Ok(a.mul(b))
}

fn check_projector(r: &RingElement) -> Result<()> {
    if !r.is_idempotent() {
        return Err(Error::NotAProjector(format!("{r}")));
    }
    Ok(())
}

/// Keep-set of a projector: a predicate over Hilbert-Schmidt multi-indices.
/// Membership depends only on which components of the index are zero, so the
/// table is stored per zero-pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct KeepSet {
    layout: SystemLayout,
    index_ranges: Vec<usize>,
    // bit k of the table position is set iff index component k is zero
    keep_by_pattern: Vec<bool>,
}

impl KeepSet {
    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn contains(&self, idx: &MultiIndex) -> bool {
        debug_assert_eq!(idx.len(), self.layout.len());
        let mut bits = 0usize;
        for (k, &i) in idx.0.iter().enumerate() {
            if i == 0 {
                bits |= 1 << k;
            }
        }
        self.keep_by_pattern[bits]
    }

    pub fn contains_zero(&self) -> bool {
        self.keep_by_pattern[(1usize << self.layout.len()) - 1]
    }

    /// Number of multi-indices in the whole space.
    pub fn total(&self) -> u128 {
        self.index_ranges.iter().map(|&r| r as u128).product()
    }

    /// Number of kept multi-indices.
    pub fn count(&self) -> u128 {
        let n = self.layout.len();
        let mut acc = 0u128;
        for (bits, &kept) in self.keep_by_pattern.iter().enumerate() {
            if !kept {
                continue;
            }
            let mut combos = 1u128;
            for k in 0..n {
                if bits & (1 << k) == 0 {
                    combos *= (self.index_ranges[k] - 1) as u128;
                }
            }
            acc += combos;
        }
        acc
    }

    fn check_compatible(&self, other: &KeepSet) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch(
                "keep-sets over different layouts".to_string(),
            ));
        }
        Ok(())
    }

    pub fn union(&self, other: &KeepSet) -> Result<KeepSet> {
        self.check_compatible(other)?;
        let keep = self
            .keep_by_pattern
            .iter()
            .zip(&other.keep_by_pattern)
            .map(|(&a, &b)| a || b)
            .collect();
        Ok(KeepSet {
            layout: self.layout.clone(),
            index_ranges: self.index_ranges.clone(),
            keep_by_pattern: keep,
        })
    }

    pub fn intersect(&self, other: &KeepSet) -> Result<KeepSet> {
        self.check_compatible(other)?;
        let keep = self
            .keep_by_pattern
            .iter()
            .zip(&other.keep_by_pattern)
            .map(|(&a, &b)| a && b)
            .collect();
        Ok(KeepSet {
            layout: self.layout.clone(),
            index_ranges: self.index_ranges.clone(),
            keep_by_pattern: keep,
        })
    }
}

impl fmt::Display for RingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut ordered: Vec<(&Monomial, &Rational64)> = self.terms.iter().collect();
        ordered.sort_by_key(|(m, _)| (m.len(), (*m).clone()));
        for (k, (mono, coeff)) in ordered.into_iter().enumerate() {
            let neg = coeff.is_negative();
            let mag = coeff.abs();
            if k == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let coeff_str = if mag.denom() == &1 {
                mag.numer().to_string()
            } else {
                format!("{}/{}", mag.numer(), mag.denom())
            };
            if mono.is_empty() {
                write!(f, "{coeff_str}")?;
            } else {
                let labels = mono.iter().cloned().collect::<Vec<_>>().join("*");
                if mag.is_one() {
                    write!(f, "{labels}")?;
                } else {
                    write!(f, "{coeff_str}*{labels}")?;
                }
            }
        }
        Ok(())
    }
}

impl FromStr for RingElement {
    type Err = Error;

    /// Parse the canonical text form, e.g.
    /// `1 - A3 + A2*A3 - A1*A2*A3 + A0*A1*A2*A3` or `1/2*X0 + 1/2*X1`.
    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(Error::Parse("empty ring expression".to_string()));
        }
        if compact == "0" {
            return Ok(RingElement::zero());
        }
        let mut terms = BTreeMap::new();
        let mut rest = compact.as_str();
        let mut sign = Rational64::one();
        if let Some(r) = rest.strip_prefix('-') {
            sign = -sign;
            rest = r;
        } else if let Some(r) = rest.strip_prefix('+') {
            rest = r;
        }
        while !rest.is_empty() {
            let end = rest
                .char_indices()
                .position(|(_, c)| c == '+' || c == '-')
                .unwrap_or(rest.len());
            let term = &rest[..end];
            if term.is_empty() {
                return Err(Error::Parse(format!("dangling sign in `{s}`")));
            }
            let (mono, coeff) = parse_term(term)?;
            RingElement::insert_term(&mut terms, mono, sign * coeff);
            if end == rest.len() {
                break;
            }
            sign = if rest.as_bytes()[end] == b'-' {
                -Rational64::one()
            } else {
                Rational64::one()
            };
            rest = &rest[end + 1..];
            if rest.is_empty() {
                return Err(Error::Parse(format!("dangling sign in `{s}`")));
            }
        }
        Ok(RingElement { terms }.canonicalize())
    }
}

fn parse_term(term: &str) -> Result<(Monomial, Rational64)> {
    let mut coeff = Rational64::one();
    let mut mono = Monomial::new();
    let mut saw_coeff = false;
    for piece in term.split('*') {
        if piece.is_empty() {
            return Err(Error::Parse(format!("empty factor in `{term}`")));
        }
        if piece.chars().next().unwrap().is_ascii_digit() {
            if saw_coeff {
                return Err(Error::Parse(format!(
                    "multiple numeric factors in `{term}`"
                )));
            }
            saw_coeff = true;
            coeff = parse_rational(piece)?;
        } else if piece
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
        {
            if !mono.insert(piece.to_string()) {
                // X*X = X, tolerated on input
            }
        } else {
            return Err(Error::Parse(format!("bad label `{piece}`")));
        }
    }
    Ok((mono, coeff))
}

fn parse_rational(s: &str) -> Result<Rational64> {
    let parse_i64 =
        |t: &str| -> Result<i64> { t.parse().map_err(|_| Error::Parse(format!("number `{t}`"))) };
    match s.split_once('/') {
        Some((p, q)) => {
            let denom = parse_i64(q)?;
            if denom == 0 {
                return Err(Error::Parse("division by zero".to_string()));
            }
            Ok(Rational64::new(parse_i64(p)?, denom))
        }
        None => Ok(Rational64::from_integer(parse_i64(s)?)),
    }
}
