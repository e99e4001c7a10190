//! Truncated multivariate Taylor series ("jets").
//!
//! A [`TaylorJet`] stores the Taylor coefficients `∂^α f / α!` of a function of
//! `num_vars` variables, for every multi-index `α` of degree at most `order`.
//! Coefficients live in a dense vector indexed by the graded-lexicographic
//! rank of the multi-index, so the coefficients of degree `≤ m` always form a
//! prefix. Multiplication is a plain truncated Cauchy product driven by a
//! precomputed product table shared by all jets with the same variable count.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Upper bound on the number of variables (exponents are packed 8 bits each
/// into a `u128` key).
pub const MAX_VARS: usize = 16;

/// Upper bound on the truncation order.
pub const MAX_ORDER: usize = 64;

const BITS: u32 = 8;

/// Exponent vector of a monomial.
///
/// Multi-indices are totally ordered by degree first and then
/// lexicographically with the first variable dominant, so for two variables
/// the order reads `1, x0, x1, x0², x0·x1, x1², …`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    exponents: Vec<u32>,
    degree: usize,
}

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        let degree = exponents.iter().map(|&e| e as usize).sum();
        Self { exponents, degree }
    }

    pub fn zero(num_vars: usize) -> Self {
        Self::new(vec![0; num_vars])
    }

    /// The multi-index `e_var`.
    pub fn unit(num_vars: usize, var: usize) -> Self {
        let mut e = vec![0; num_vars];
        e[var] = 1;
        Self::new(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_vars(&self) -> usize {
        self.exponents.len()
    }

    /// `α! = Π α_i!`
    pub fn factorial(&self) -> f64 {
        self.exponents
            .iter()
            .map(|&e| (1..=e).map(f64::from).product::<f64>())
            .product()
    }

    fn key(&self) -> u128 {
        pack(&self.exponents)
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree
            .cmp(&other.degree)
            .then_with(|| other.exponents.cmp(&self.exponents))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn pack(exponents: &[u32]) -> u128 {
    exponents
        .iter()
        .enumerate()
        .fold(0u128, |acc, (v, &e)| acc | ((e as u128) << (BITS * v as u32)))
}

fn unit_key(var: usize) -> u128 {
    1u128 << (BITS * var as u32)
}

/// `C(n, k)` as usize.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of monomials of degree `≤ order` in `num_vars` variables.
pub fn monomial_count(num_vars: usize, order: usize) -> usize {
    binomial(num_vars + order, order)
}

/// Index tables for one variable count, valid for every order `≤ max_order`.
struct Basis {
    num_vars: usize,
    max_order: usize,
    monomials: Vec<MultiIndex>,
    lookup: HashMap<u128, u32>,
    /// `degree_start[d]` is the rank of the first monomial of degree `d`;
    /// `degree_start[max_order + 1]` is the total count.
    degree_start: Vec<usize>,
    /// `(i, j, k)` with `m_i · m_j = m_k`, sorted by the degree of `m_k`.
    products: Vec<[u32; 3]>,
    /// `products_end[d]`: number of triples whose product has degree `≤ d`.
    products_end: Vec<usize>,
    /// `raise[v][i]`: rank of `m_i · x_v`, for monomials of degree `< max_order`.
    raise: Vec<Vec<u32>>,
    /// `first_var[i]`, `lower_first[i]`: first variable present in `m_i` and
    /// the rank of `m_i / x_first` (both unused for the constant monomial).
    first_var: Vec<u32>,
    lower_first: Vec<u32>,
}

impl Basis {
    fn build(num_vars: usize, max_order: usize) -> Self {
        let mut monomials = Vec::with_capacity(monomial_count(num_vars, max_order));
        let mut degree_start = Vec::with_capacity(max_order + 2);
        for d in 0..=max_order {
            degree_start.push(monomials.len());
            let mut current = vec![0u32; num_vars];
            compositions(d as u32, 0, &mut current, &mut monomials);
        }
        degree_start.push(monomials.len());

        let lookup: HashMap<u128, u32> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.key(), i as u32))
            .collect();
        let keys: Vec<u128> = monomials.iter().map(MultiIndex::key).collect();

        let mut products = Vec::new();
        let mut products_end = Vec::with_capacity(max_order + 1);
        for d in 0..=max_order {
            for i in 0..degree_start[d + 1] {
                let di = monomials[i].degree;
                for j in degree_start[d - di]..degree_start[d - di + 1] {
                    let k = lookup[&(keys[i] + keys[j])];
                    products.push([i as u32, j as u32, k]);
                }
            }
            products_end.push(products.len());
        }

        let below_top = degree_start[max_order];
        let raise = (0..num_vars)
            .map(|v| {
                (0..below_top)
                    .map(|i| lookup[&(keys[i] + unit_key(v))])
                    .collect()
            })
            .collect();

        let mut first_var = vec![0u32; monomials.len()];
        let mut lower_first = vec![0u32; monomials.len()];
        for (i, m) in monomials.iter().enumerate().skip(1) {
            let v = m.exponents.iter().position(|&e| e > 0).unwrap();
            first_var[i] = v as u32;
            lower_first[i] = lookup[&(keys[i] - unit_key(v))];
        }

        Self {
            num_vars,
            max_order,
            monomials,
            lookup,
            degree_start,
            products,
            products_end,
            raise,
            first_var,
            lower_first,
        }
    }

    fn len(&self, order: usize) -> usize {
        self.degree_start[order + 1]
    }

    fn index_of(&self, key: u128) -> Option<usize> {
        self.lookup.get(&key).map(|&i| i as usize)
    }
}

/// Emits all exponent vectors of total degree `remaining` in lexicographically
/// descending order.
fn compositions(remaining: u32, var: usize, current: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    let last = current.len() - 1;
    if var == last {
        current[var] = remaining;
        out.push(MultiIndex::new(current.clone()));
        return;
    }
    for e in (0..=remaining).rev() {
        current[var] = e;
        compositions(remaining - e, var + 1, current, out);
    }
    current[var] = 0;
}

fn basis(num_vars: usize, order: usize) -> Arc<Basis> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Basis>>>> = OnceLock::new();
    let mut cache = CACHE
        .get_or_init(Default::default)
        .lock()
        .unwrap_or_else(|poisoned| poisoned.into_inner());
    if let Some(b) = cache.get(&num_vars) {
        if b.max_order >= order {
            return Arc::clone(b);
        }
    }
    let b = Arc::new(Basis::build(num_vars, order));
    cache.insert(num_vars, Arc::clone(&b));
    b
}

fn validate_shape(num_vars: usize, order: usize) -> Result<()> {
    if num_vars == 0 || num_vars > MAX_VARS {
        return Err(Error::InvalidInput(format!(
            "jet variable count {num_vars} outside 1..={MAX_VARS}"
        )));
    }
    if order > MAX_ORDER {
        return Err(Error::InvalidInput(format!(
            "jet order {order} exceeds {MAX_ORDER}"
        )));
    }
    Ok(())
}

/// Number of Newton steps used by series division and square root.
pub fn newton_steps(order: usize) -> usize {
    let mut bits = 0;
    while (1usize << bits) < order + 1 {
        bits += 1;
    }
    bits + 1
}

/// A truncated multivariate Taylor series.
#[derive(Clone)]
pub struct TaylorJet {
    basis: Arc<Basis>,
    order: usize,
    coeffs: Vec<f64>,
}

impl TaylorJet {
    /// The zero jet. Panics on a shape outside the supported range.
    pub fn zero(num_vars: usize, order: usize) -> Self {
        validate_shape(num_vars, order).expect("jet shape");
        let basis = basis(num_vars, order);
        let coeffs = vec![0.0; basis.len(order)];
        Self {
            basis,
            order,
            coeffs,
        }
    }

    pub fn constant(value: f64, num_vars: usize, order: usize) -> Self {
        let mut jet = Self::zero(num_vars, order);
        jet.coeffs[0] = value;
        jet
    }

    /// The coordinate function `z_var` expanded at `z_var = value`.
    pub fn variable(value: f64, var: usize, num_vars: usize, order: usize) -> Result<Self> {
        validate_shape(num_vars, order)?;
        if var >= num_vars {
            return Err(Error::InvalidInput(format!(
                "variable index {var} out of range for {num_vars} variables"
            )));
        }
        let mut jet = Self::constant(value, num_vars, order);
        if order >= 1 {
            jet.coeffs[1 + var] = 1.0;
        }
        Ok(jet)
    }

    /// Builds a jet from a dense coefficient vector in graded-lex order.
    pub fn from_coeffs(num_vars: usize, order: usize, coeffs: Vec<f64>) -> Result<Self> {
        validate_shape(num_vars, order)?;
        let basis = basis(num_vars, order);
        if coeffs.len() != basis.len(order) {
            return Err(Error::InvalidInput(format!(
                "expected {} coefficients, got {}",
                basis.len(order),
                coeffs.len()
            )));
        }
        Ok(Self {
            basis,
            order,
            coeffs,
        })
    }

    /// Builds a jet from sparse `(multi-index, coefficient)` terms; terms of
    /// degree above `order` are dropped.
    pub fn from_terms(num_vars: usize, order: usize, terms: &[(MultiIndex, f64)]) -> Result<Self> {
        let mut jet = Self::zero_checked(num_vars, order)?;
        for (alpha, c) in terms {
            if alpha.num_vars() != num_vars {
                return Err(Error::InvalidInput(format!(
                    "multi-index has {} entries, jet has {num_vars} variables",
                    alpha.num_vars()
                )));
            }
            if alpha.degree() <= order {
                let i = jet.basis.index_of(alpha.key()).expect("monomial in basis");
                jet.coeffs[i] += c;
            }
        }
        Ok(jet)
    }

    fn zero_checked(num_vars: usize, order: usize) -> Result<Self> {
        validate_shape(num_vars, order)?;
        Ok(Self::zero(num_vars, order))
    }

    fn with_coeffs(&self, order: usize, coeffs: Vec<f64>) -> Self {
        Self {
            basis: Arc::clone(&self.basis),
            order,
            coeffs,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.basis.num_vars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Dense coefficients in graded-lex order.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficients of degree `≤ degree` (a prefix of [`Self::coeffs`]).
    pub fn coeffs_upto(&self, degree: usize) -> &[f64] {
        &self.coeffs[..self.basis.len(degree.min(self.order))]
    }

    /// Value at the expansion point.
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Coefficient of `z^α`; zero for degrees beyond the truncation order.
    pub fn coeff(&self, exponents: &[u32]) -> f64 {
        let alpha = MultiIndex::new(exponents.to_vec());
        if alpha.num_vars() != self.num_vars() || alpha.degree() > self.order {
            return 0.0;
        }
        self.coeffs[self.basis.index_of(alpha.key()).expect("monomial in basis")]
    }

    /// The partial derivative `∂^α f` at the expansion point.
    pub fn derivative(&self, exponents: &[u32]) -> f64 {
        self.coeff(exponents) * MultiIndex::new(exponents.to_vec()).factorial()
    }

    /// `(multi-index, coefficient)` pairs in graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> + '_ {
        self.basis.monomials.iter().zip(self.coeffs.iter().copied())
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Largest coefficientwise difference; panics on incompatible jets.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.assert_compatible(other);
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn is_compatible(&self, other: &Self) -> bool {
        self.num_vars() == other.num_vars() && self.order == other.order
    }

    fn assert_compatible(&self, other: &Self) {
        assert!(
            self.is_compatible(other),
            "incompatible jets: ({} vars, order {}) vs ({} vars, order {})",
            self.num_vars(),
            self.order,
            other.num_vars(),
            other.order
        );
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.is_compatible(other) {
            Ok(())
        } else {
            Err(Error::Incompatible(format!(
                "({} vars, order {}) vs ({} vars, order {})",
                self.num_vars(),
                self.order,
                other.num_vars(),
                other.order
            )))
        }
    }

    /// Drops every coefficient above `order`. Panics if `order` exceeds the
    /// current order.
    pub fn truncate(&self, order: usize) -> Self {
        assert!(order <= self.order, "cannot truncate order {} to {order}", self.order);
        self.with_coeffs(order, self.coeffs[..self.basis.len(order)].to_vec())
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.with_coeffs(self.order, self.coeffs.iter().map(|c| c * factor).collect())
    }

    pub fn add_scalar(&self, value: f64) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += value;
        out
    }

    /// Same jet with its constant term replaced.
    pub fn with_value(&self, value: f64) -> Self {
        let mut out = self.clone();
        out.coeffs[0] = value;
        out
    }

    /// `self + factor · other`, in place.
    pub fn axpy(&mut self, factor: f64, other: &Self) {
        self.assert_compatible(other);
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += factor * b;
        }
    }

    fn mul_raw(&self, other: &Self) -> Vec<f64> {
        let end = self.basis.products_end[self.order];
        let (a, b) = (&self.coeffs, &other.coeffs);
        let mut out = vec![0.0; a.len()];
        for &[i, j, k] in &self.basis.products[..end] {
            out[k as usize] += a[i as usize] * b[j as usize];
        }
        out
    }

    /// Series reciprocal by Newton iteration `r ← r·(2 − b·r)`.
    pub fn recip(&self) -> Result<Self> {
        let b0 = self.value();
        if b0 == 0.0 || !b0.is_finite() {
            return Err(Error::SingularDivision(b0));
        }
        let mut r = Self::constant(1.0 / b0, self.num_vars(), self.order);
        for _ in 0..newton_steps(self.order) {
            let correction = (self * &r).scale(-1.0).add_scalar(2.0);
            r = &r * &correction;
        }
        Ok(r)
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self * &other.recip()?)
    }

    /// Series square root through the inverse square root Newton iteration
    /// `q ← q·(3 − a·q²)/2`, returning `a·q`.
    pub fn sqrt(&self) -> Result<Self> {
        let a0 = self.value();
        if a0 <= 0.0 || !a0.is_finite() {
            return Err(Error::Domain(format!(
                "square root of a jet with constant term {a0:e}"
            )));
        }
        let mut q = Self::constant(1.0 / a0.sqrt(), self.num_vars(), self.order);
        for _ in 0..newton_steps(self.order) {
            let aq2 = &(self * &q) * &q;
            q = (&q * &aq2.scale(-1.0).add_scalar(3.0)).scale(0.5);
        }
        Ok(self * &q)
    }

    pub fn exp(&self) -> Self {
        let a0 = self.value();
        let h = self.with_value(0.0);
        let mut acc = Self::constant(1.0, self.num_vars(), self.order);
        for m in (1..=self.order).rev() {
            acc = (&h * &acc).scale(1.0 / m as f64).add_scalar(1.0);
        }
        acc.scale(a0.exp())
    }

    /// Same series viewed at a higher order, with zero coefficients above the
    /// current one.
    pub fn extend(&self, order: usize) -> Self {
        if order <= self.order {
            return self.truncate(order);
        }
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(monomial_count(self.num_vars(), order), 0.0);
        Self::from_coeffs(self.num_vars(), order, coeffs).expect("length matches")
    }

    /// `self^p` for a small non-negative integer power.
    pub fn powi(&self, p: u32) -> Self {
        let mut acc = Self::constant(1.0, self.num_vars(), self.order);
        for _ in 0..p {
            acc = &acc * self;
        }
        acc
    }

    /// `∂/∂z_var`; the result has order reduced by one.
    pub fn partial(&self, var: usize) -> Result<Self> {
        if var >= self.num_vars() {
            return Err(Error::InvalidInput(format!(
                "partial derivative index {var} out of range for {} variables",
                self.num_vars()
            )));
        }
        if self.order == 0 {
            return Err(Error::budget("partial derivative", 1, 0));
        }
        let order = self.order - 1;
        let raise = &self.basis.raise[var];
        let coeffs = (0..self.basis.len(order))
            .map(|i| {
                let up = raise[i] as usize;
                let e = self.basis.monomials[up].exponents[var];
                e as f64 * self.coeffs[up]
            })
            .collect();
        Ok(self.with_coeffs(order, coeffs))
    }

    /// Directional derivative `Σ v_i ∂f/∂z_i`.
    pub fn directional(&self, direction: &[f64]) -> Result<Self> {
        if direction.len() != self.num_vars() {
            return Err(Error::InvalidInput(format!(
                "direction has {} entries, jet has {} variables",
                direction.len(),
                self.num_vars()
            )));
        }
        if self.order == 0 {
            return Err(Error::budget("directional derivative", 1, 0));
        }
        let mut out = Self::zero(self.num_vars(), self.order - 1);
        for (v, &c) in direction.iter().enumerate() {
            if c != 0.0 {
                out.axpy(c, &self.partial(v)?);
            }
        }
        Ok(out)
    }

    /// Fixes the first `count` variables at their expansion point, returning a
    /// jet in the remaining variables.
    pub fn restrict_leading(&self, count: usize) -> Result<Self> {
        if count >= self.num_vars() {
            return Err(Error::InvalidInput(format!(
                "cannot freeze {count} of {} variables",
                self.num_vars()
            )));
        }
        let rest = self.num_vars() - count;
        let target = basis(rest, self.order);
        let shift = BITS * count as u32;
        let coeffs = target.monomials[..target.len(self.order)]
            .iter()
            .map(|m| {
                let i = self
                    .basis
                    .index_of(m.key() << shift)
                    .expect("monomial in basis");
                self.coeffs[i]
            })
            .collect();
        Ok(Self {
            basis: target,
            order: self.order,
            coeffs,
        })
    }

    /// Truncated composition `self(inner_1, …, inner_m)` where `self` is
    /// expanded at `center` and each inner jet starts at the matching center
    /// coordinate.
    pub fn compose(&self, center: &[f64], inner: &[TaylorJet]) -> Result<Self> {
        let m = self.num_vars();
        if center.len() != m || inner.len() != m {
            return Err(Error::InvalidInput(format!(
                "outer jet has {m} variables; got {} center coordinates and {} inner jets",
                center.len(),
                inner.len()
            )));
        }
        let (p, inner_order) = (inner[0].num_vars(), inner[0].order);
        if inner.iter().any(|j| j.num_vars() != p || j.order != inner_order) {
            return Err(Error::Incompatible(
                "inner jets must share variable count and order".into(),
            ));
        }
        for (slot, (jet, &c)) in inner.iter().zip(center).enumerate() {
            if (jet.value() - c).abs() > 1e-12 * c.abs().max(1.0) {
                return Err(Error::CompositionPoint {
                    slot,
                    expected: c,
                    found: jet.value(),
                });
            }
        }
        let order = self.order.min(inner_order);
        let deltas: Vec<TaylorJet> = inner
            .iter()
            .map(|j| j.truncate(order).with_value(0.0))
            .collect();

        let count = self.basis.len(order);
        let mut result = Self::constant(self.coeffs[0], p, order);
        let mut powers: Vec<TaylorJet> = Vec::with_capacity(count);
        powers.push(Self::constant(1.0, p, order));
        for i in 1..count {
            let v = self.basis.first_var[i] as usize;
            let prev = self.basis.lower_first[i] as usize;
            let pw = &powers[prev] * &deltas[v];
            if self.coeffs[i] != 0.0 {
                result.axpy(self.coeffs[i], &pw);
            }
            powers.push(pw);
        }
        Ok(result)
    }

    /// Evaluates the truncated polynomial at displacement `dz` from the
    /// expansion point.
    pub fn eval(&self, dz: &[f64]) -> f64 {
        assert_eq!(dz.len(), self.num_vars(), "displacement dimension");
        let mut monomial = vec![1.0; self.len()];
        let mut total = self.coeffs[0];
        for i in 1..self.len() {
            let v = self.basis.first_var[i] as usize;
            monomial[i] = monomial[self.basis.lower_first[i] as usize] * dz[v];
            total += self.coeffs[i] * monomial[i];
        }
        total
    }
}

impl PartialEq for TaylorJet {
    fn eq(&self, other: &Self) -> bool {
        self.is_compatible(other) && self.coeffs == other.coeffs
    }
}

impl fmt::Debug for TaylorJet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TaylorJet")
            .field("num_vars", &self.num_vars())
            .field("order", &self.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl Add for &TaylorJet {
    type Output = TaylorJet;
    fn add(self, rhs: &TaylorJet) -> TaylorJet {
        self.assert_compatible(rhs);
        let coeffs = self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect();
        self.with_coeffs(self.order, coeffs)
    }
}

impl Sub for &TaylorJet {
    type Output = TaylorJet;
    fn sub(self, rhs: &TaylorJet) -> TaylorJet {
        self.assert_compatible(rhs);
        let coeffs = self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect();
        self.with_coeffs(self.order, coeffs)
    }
}

impl Mul for &TaylorJet {
    type Output = TaylorJet;
    fn mul(self, rhs: &TaylorJet) -> TaylorJet {
        self.assert_compatible(rhs);
        self.with_coeffs(self.order, self.mul_raw(rhs))
    }
}

impl Neg for &TaylorJet {
    type Output = TaylorJet;
    fn neg(self) -> TaylorJet {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for TaylorJet {
            type Output = TaylorJet;
            fn $m(self, rhs: TaylorJet) -> TaylorJet {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&TaylorJet> for TaylorJet {
            type Output = TaylorJet;
            fn $m(self, rhs: &TaylorJet) -> TaylorJet {
                (&self).$m(rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

/// What [`jet_seed`] produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedKind {
    Constant,
    Variable,
}

/// Constant or coordinate jet. `var_index` is ignored for constants.
pub fn jet_seed(
    kind: SeedKind,
    value: f64,
    var_index: usize,
    num_vars: usize,
    order: usize,
) -> Result<TaylorJet> {
    match kind {
        SeedKind::Constant => {
            validate_shape(num_vars, order)?;
            Ok(TaylorJet::constant(value, num_vars, order))
        }
        SeedKind::Variable => TaylorJet::variable(value, var_index, num_vars, order),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Checked binary arithmetic on compatible jets.
pub fn jet_arith(op: ArithOp, a: &TaylorJet, b: &TaylorJet) -> Result<TaylorJet> {
    a.check_compatible(b)?;
    Ok(match op {
        ArithOp::Add => a + b,
        ArithOp::Sub => a - b,
        ArithOp::Mul => a * b,
        ArithOp::Div => a.div(b)?,
    })
}

pub fn jet_sqrt(a: &TaylorJet) -> Result<TaylorJet> {
    a.sqrt()
}

pub fn jet_compose(outer: &TaylorJet, center: &[f64], inner: &[TaylorJet]) -> Result<TaylorJet> {
    outer.compose(center, inner)
}

pub fn jet_partial(a: &TaylorJet, var_index: usize) -> Result<TaylorJet> {
    a.partial(var_index)
}
