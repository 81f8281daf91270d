//! Finite-dimensional operators, density matrices and Liouvillian superoperators.
//!
//! Every operator carries the ordered list of subsystem dimensions it acts on.
//! Composite spaces use the Kronecker ordering of that list, so slot 0 is the
//! most significant factor.
//!
//! Superoperators act on column-stacked operators: `vec(X)[i + d*j] = X[i, j]`,
//! which gives `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra as na;
use ndarray::{linalg::kron, Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Tolerance on the largest element of `ρ − ρ†`.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Tolerance on `|Tr ρ − 1|`.
pub const TRACE_TOL: f64 = 1e-8;
/// Smallest admissible eigenvalue is `-POSITIVITY_TOL`.
pub const POSITIVITY_TOL: f64 = 1e-8;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Ordered list of subsystem dimensions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HilbertSpace {
    dims: Vec<usize>,
}

impl HilbertSpace {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidSpace("empty dimension list".into()));
        }
        if let Some(bad) = dims.iter().find(|&&d| d == 0) {
            return Err(Error::InvalidSpace(format!("subsystem dimension {bad}")));
        }
        Ok(Self { dims })
    }

    pub fn single(dim: usize) -> Result<Self> {
        Self::new(vec![dim])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Total dimension, the product of all subsystem dimensions.
    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn tensor(&self, other: &HilbertSpace) -> HilbertSpace {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        HilbertSpace { dims }
    }
}

impl fmt::Display for HilbertSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "[{}]", parts.join("x"))
    }
}

/// Dense complex operator on a [`HilbertSpace`].
///
/// Arithmetic through `+`, `-`, `*` requires both operands to live on the same
/// space and panics otherwise, the same way `ndarray` panics on shape
/// mismatches. The fallible operations of this module return [`Error`].
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    space: HilbertSpace,
    elements: Array2<C64>,
}

impl OperatorMatrix {
    pub fn new(space: HilbertSpace, elements: Array2<C64>) -> Result<Self> {
        let d = space.dim();
        let (r, c) = elements.dim();
        if r != c {
            return Err(Error::DimensionMismatch { expected: r, found: c });
        }
        if r != d {
            return Err(Error::DimensionMismatch { expected: d, found: r });
        }
        Ok(Self { space, elements })
    }

    /// Operator on a single unstructured space of the matrix' size.
    pub fn from_elements(elements: Array2<C64>) -> Result<Self> {
        let space = HilbertSpace::single(elements.nrows())?;
        Self::new(space, elements)
    }

    pub fn from_real(space: HilbertSpace, elements: &[f64]) -> Result<Self> {
        let d = space.dim();
        if elements.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, found: elements.len() });
        }
        let data = Array2::from_shape_fn((d, d), |(i, j)| C64::new(elements[i * d + j], 0.0));
        Self::new(space, data)
    }

    pub fn identity(space: &HilbertSpace) -> Self {
        let d = space.dim();
        Self { space: space.clone(), elements: Array2::from_diag_elem(d, ONE) }
    }

    pub fn zeros(space: &HilbertSpace) -> Self {
        let d = space.dim();
        Self { space: space.clone(), elements: Array2::zeros((d, d)) }
    }

    pub fn diagonal(space: &HilbertSpace, diag: &[C64]) -> Result<Self> {
        let d = space.dim();
        if diag.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: diag.len() });
        }
        let mut m = Array2::zeros((d, d));
        for (k, &v) in diag.iter().enumerate() {
            m[[k, k]] = v;
        }
        Ok(Self { space: space.clone(), elements: m })
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    pub fn elements(&self) -> &Array2<C64> {
        &self.elements
    }

    pub fn into_elements(self) -> Array2<C64> {
        self.elements
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.elements[[i, j]]
    }

    pub fn adjoint(&self) -> Self {
        Self { space: self.space.clone(), elements: self.elements.t().mapv(|z| z.conj()) }
    }

    pub fn trace(&self) -> C64 {
        self.elements.diag().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.elements.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Largest element of `self − self†`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                let diff = self.elements[[i, j]] - self.elements[[j, i]].conj();
                worst = worst.max(diff.norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { space: self.space.clone(), elements: &self.elements * s }
    }

    /// Tensor product; the result lives on the concatenated space.
    pub fn kron(&self, other: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix {
            space: self.space.tensor(&other.space),
            elements: kron(&self.elements, &other.elements),
        }
    }

    pub fn commutator(&self, other: &OperatorMatrix) -> OperatorMatrix {
        self * other - other * self
    }

    pub fn anticommutator(&self, other: &OperatorMatrix) -> OperatorMatrix {
        self * other + other * self
    }

    pub fn try_mul(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        check_same(&self.space, &other.space)?;
        Ok(self * other)
    }

    /// Maximum elementwise distance to `other`.
    pub fn max_diff(&self, other: &OperatorMatrix) -> f64 {
        assert_same(&self.space, &other.space);
        self.elements.iter().zip(other.elements.iter()).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    /// Same elements, reinterpreted on a space of equal total dimension.
    pub fn with_space(self, space: HilbertSpace) -> Result<Self> {
        Self::new(space, self.elements)
    }

    pub(crate) fn from_parts_unchecked(space: HilbertSpace, elements: Array2<C64>) -> Self {
        debug_assert_eq!(space.dim(), elements.nrows());
        Self { space, elements }
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_hermitian_eigenvalue(&self) -> f64 {
        // nalgebra's QR sweeps can return -inf on nearly pure states whose
        // remaining entries are zero or subnormal; dropping entries below
        // 1e-20 of the scale and shifting the diagonal away from zero keeps
        // them finite at a cost of ~1e-16 in the result
        let scale = self.max_abs();
        let floor = 1e-20 * scale;
        let n = self.dim();
        let m = na::DMatrix::from_fn(n, n, |i, j| {
            let z = 0.5 * (self.elements[[i, j]] + self.elements[[j, i]].conj());
            let z = if z.norm() < floor { C64::new(0.0, 0.0) } else { z };
            if i == j {
                z + scale
            } else {
                z
            }
        });
        let eig = na::SymmetricEigen::new(m);
        eig.eigenvalues.iter().map(|&e| e - scale).fold(f64::INFINITY, f64::min)
    }
}

fn check_same(a: &HilbertSpace, b: &HilbertSpace) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    Ok(())
}

fn assert_same(a: &HilbertSpace, b: &HilbertSpace) {
    assert!(a == b, "operator spaces differ: {a} vs {b}");
}

impl Mul for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_same(&self.space, &rhs.space);
        OperatorMatrix { space: self.space.clone(), elements: self.elements.dot(&rhs.elements) }
    }
}

impl Add for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn add(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_same(&self.space, &rhs.space);
        OperatorMatrix { space: self.space.clone(), elements: &self.elements + &rhs.elements }
    }
}

impl Sub for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn sub(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_same(&self.space, &rhs.space);
        OperatorMatrix { space: self.space.clone(), elements: &self.elements - &rhs.elements }
    }
}

impl Add for OperatorMatrix {
    type Output = OperatorMatrix;
    fn add(self, rhs: OperatorMatrix) -> OperatorMatrix {
        &self + &rhs
    }
}

impl Sub for OperatorMatrix {
    type Output = OperatorMatrix;
    fn sub(self, rhs: OperatorMatrix) -> OperatorMatrix {
        &self - &rhs
    }
}

impl AddAssign<&OperatorMatrix> for OperatorMatrix {
    fn add_assign(&mut self, rhs: &OperatorMatrix) {
        assert_same(&self.space, &rhs.space);
        self.elements += &rhs.elements;
    }
}

impl Mul<C64> for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, s: C64) -> OperatorMatrix {
        self.scale(s)
    }
}

impl Mul<f64> for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, s: f64) -> OperatorMatrix {
        self.scale(C64::new(s, 0.0))
    }
}

impl Mul<C64> for OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, s: C64) -> OperatorMatrix {
        self.scale(s)
    }
}

impl Mul<f64> for OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, s: f64) -> OperatorMatrix {
        self.scale(C64::new(s, 0.0))
    }
}

impl Neg for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn neg(self) -> OperatorMatrix {
        self.scale(-ONE)
    }
}

/// A validated density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(OperatorMatrix);

impl DensityMatrix {
    /// Validates at the nominal tolerances.
    pub fn new(op: OperatorMatrix) -> Result<Self> {
        Self::with_tolerance_scale(op, 1.0)
    }

    /// Validates with every tolerance multiplied by `scale`.
    pub fn with_tolerance_scale(op: OperatorMatrix, scale: f64) -> Result<Self> {
        check_density(&op, scale)?;
        Ok(Self(op))
    }

    /// `|ψ⟩⟨ψ|` for the normalized amplitude vector.
    pub fn pure(space: &HilbertSpace, amplitudes: &[C64]) -> Result<Self> {
        let d = space.dim();
        if amplitudes.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: amplitudes.len() });
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::NotDensityMatrix("zero state vector".into()));
        }
        let psi: Vec<C64> = amplitudes.iter().map(|a| a / norm).collect();
        let m = Array2::from_shape_fn((d, d), |(i, j)| psi[i] * psi[j].conj());
        Self::new(OperatorMatrix::from_parts_unchecked(space.clone(), m))
    }

    /// Projector on the computational basis state with flat index `index`.
    pub fn basis(space: &HilbertSpace, index: usize) -> Result<Self> {
        let d = space.dim();
        if index >= d {
            return Err(Error::IndexOutOfRange { index, dim: d });
        }
        let mut amps = vec![ZERO; d];
        amps[index] = ONE;
        Self::pure(space, &amps)
    }

    /// Product state from per-subsystem basis indices.
    pub fn product_basis(space: &HilbertSpace, levels: &[usize]) -> Result<Self> {
        let dims = space.dims();
        if levels.len() != dims.len() {
            return Err(Error::DimensionMismatch { expected: dims.len(), found: levels.len() });
        }
        let mut index = 0;
        for (&l, &d) in levels.iter().zip(dims) {
            if l >= d {
                return Err(Error::IndexOutOfRange { index: l, dim: d });
            }
            index = index * d + l;
        }
        Self::basis(space, index)
    }

    pub fn operator(&self) -> &OperatorMatrix {
        &self.0
    }

    pub fn into_operator(self) -> OperatorMatrix {
        self.0
    }

    pub fn space(&self) -> &HilbertSpace {
        self.0.space()
    }
}

impl AsRef<OperatorMatrix> for DensityMatrix {
    fn as_ref(&self) -> &OperatorMatrix {
        &self.0
    }
}

fn check_density(op: &OperatorMatrix, scale: f64) -> Result<()> {
    let herm = op.hermiticity_error();
    if herm > HERMITICITY_TOL * scale {
        return Err(Error::NotDensityMatrix(format!("hermiticity error {herm:e}")));
    }
    let tr = op.trace();
    if (tr - ONE).norm() > TRACE_TOL * scale {
        return Err(Error::NotDensityMatrix(format!("trace {tr}")));
    }
    let min_ev = op.min_hermitian_eigenvalue();
    if min_ev < -POSITIVITY_TOL * scale {
        return Err(Error::NotDensityMatrix(format!("eigenvalue {min_ev:e}")));
    }
    Ok(())
}

/// Column-stacked vectorization.
pub fn vectorize(op: &OperatorMatrix) -> Array1<C64> {
    // column-major iteration of a row-major array: walk the transpose
    op.elements.t().iter().cloned().collect()
}

pub fn unvectorize(space: &HilbertSpace, v: &Array1<C64>) -> Result<OperatorMatrix> {
    let d = space.dim();
    if v.len() != d * d {
        return Err(Error::DimensionMismatch { expected: d * d, found: v.len() });
    }
    let m = Array2::from_shape_fn((d, d), |(i, j)| v[i + d * j]);
    Ok(OperatorMatrix::from_parts_unchecked(space.clone(), m))
}

/// Dense `d² × d²` matrix acting on column-stacked operators.
#[derive(Clone, Debug, PartialEq)]
pub struct Superoperator {
    space: HilbertSpace,
    elements: Array2<C64>,
}

impl Superoperator {
    pub fn zeros(space: &HilbertSpace) -> Self {
        let n = space.dim() * space.dim();
        Self { space: space.clone(), elements: Array2::zeros((n, n)) }
    }

    /// `X ↦ left · X · right`.
    pub fn sandwich(left: &OperatorMatrix, right: &OperatorMatrix) -> Result<Self> {
        check_same(left.space(), right.space())?;
        Ok(Self { space: left.space.clone(), elements: kron(&right.elements.t(), &left.elements) })
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn elements(&self) -> &Array2<C64> {
        &self.elements
    }

    pub fn apply(&self, op: &OperatorMatrix) -> Result<OperatorMatrix> {
        check_same(&self.space, op.space())?;
        let v = self.elements.dot(&vectorize(op));
        unvectorize(&self.space, &v)
    }

    pub fn max_abs(&self) -> f64 {
        self.elements.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Largest element of `vec(I)† L`; zero for trace-preserving generators.
    pub fn trace_residual(&self) -> f64 {
        let d = self.space.dim();
        let n = d * d;
        let mut worst: f64 = 0.0;
        for col in 0..n {
            let mut s = ZERO;
            for k in 0..d {
                s += self.elements[[k + d * k, col]];
            }
            worst = worst.max(s.norm());
        }
        worst
    }

    fn accumulate(&mut self, other: &Superoperator, weight: C64) {
        self.elements.scaled_add(weight, &other.elements);
    }
}

impl Add for &Superoperator {
    type Output = Superoperator;
    fn add(self, rhs: &Superoperator) -> Superoperator {
        assert_same(&self.space, &rhs.space);
        Superoperator { space: self.space.clone(), elements: &self.elements + &rhs.elements }
    }
}

/// Truncated Fock-space annihilation operator on `n_max + 1` levels.
pub fn build_annihilation(n_max: usize) -> Result<OperatorMatrix> {
    if n_max == 0 {
        return Err(Error::ZeroTruncation);
    }
    let d = n_max + 1;
    let mut m = Array2::zeros((d, d));
    for n in 1..d {
        m[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
    }
    Ok(OperatorMatrix::from_parts_unchecked(HilbertSpace::single(d)?, m))
}

/// `|i⟩⟨j|` on a `d`-level space (zero-based levels).
pub fn build_transition(d: usize, i: usize, j: usize) -> Result<OperatorMatrix> {
    let space = HilbertSpace::single(d)?;
    for idx in [i, j] {
        if idx >= d {
            return Err(Error::IndexOutOfRange { index: idx, dim: d });
        }
    }
    let mut m = Array2::zeros((d, d));
    m[[i, j]] = ONE;
    Ok(OperatorMatrix::from_parts_unchecked(space, m))
}

/// Places `op` on subsystem `slot` of `space`, identity elsewhere.
pub fn embed(op: &OperatorMatrix, slot: usize, space: &HilbertSpace) -> Result<OperatorMatrix> {
    let dims = space.dims();
    if slot >= dims.len() {
        return Err(Error::IndexOutOfRange { index: slot, dim: dims.len() });
    }
    if op.dim() != dims[slot] {
        return Err(Error::DimensionMismatch { expected: dims[slot], found: op.dim() });
    }
    let before: usize = dims[..slot].iter().product();
    let after: usize = dims[slot + 1..].iter().product();
    let left = Array2::from_diag_elem(before, ONE);
    let right = Array2::from_diag_elem(after, ONE);
    let m = kron(&kron(&left, &op.elements), &right);
    Ok(OperatorMatrix::from_parts_unchecked(space.clone(), m))
}

/// Reduced operator on subsystem `slot`, tracing out every other factor.
pub fn partial_trace(op: &OperatorMatrix, slot: usize) -> Result<OperatorMatrix> {
    let dims = op.space().dims();
    if slot >= dims.len() {
        return Err(Error::IndexOutOfRange { index: slot, dim: dims.len() });
    }
    let before: usize = dims[..slot].iter().product();
    let keep = dims[slot];
    let after: usize = dims[slot + 1..].iter().product();
    let mut out = Array2::zeros((keep, keep));
    for i in 0..keep {
        for j in 0..keep {
            let mut s = ZERO;
            for b in 0..before {
                for a in 0..after {
                    let r = (b * keep + i) * after + a;
                    let c = (b * keep + j) * after + a;
                    s += op.elements[[r, c]];
                }
            }
            out[[i, j]] = s;
        }
    }
    OperatorMatrix::new(HilbertSpace::single(keep)?, out)
}

/// `ρ ↦ AρA† − ½{A†A, ρ}`.
pub fn dissipator(a: &OperatorMatrix) -> Superoperator {
    let space = a.space();
    let id = OperatorMatrix::identity(space);
    let ada = &a.adjoint() * a;
    let mut out = Superoperator::sandwich(a, &a.adjoint()).expect("same space");
    let left = Superoperator::sandwich(&ada, &id).expect("same space");
    let right = Superoperator::sandwich(&id, &ada).expect("same space");
    out.accumulate(&left, C64::new(-0.5, 0.0));
    out.accumulate(&right, C64::new(-0.5, 0.0));
    out
}

/// `−i[H, ·] + Σ rate·D[A]` as one superoperator.
pub fn liouvillian(h: &OperatorMatrix, jumps: &[(OperatorMatrix, f64)]) -> Result<Superoperator> {
    let space = h.space();
    let id = OperatorMatrix::identity(space);
    let mut out = Superoperator::sandwich(h, &id)?;
    out.elements.mapv_inplace(|z| z * -I);
    let right = Superoperator::sandwich(&id, h)?;
    out.accumulate(&right, I);
    for (a, rate) in jumps {
        if *rate < 0.0 || !rate.is_finite() {
            return Err(Error::NegativeRate(*rate));
        }
        check_same(space, a.space())?;
        if *rate == 0.0 {
            continue;
        }
        out.accumulate(&dissipator(a), C64::new(*rate, 0.0));
    }
    Ok(out)
}

/// `Tr(op ρ)`.
pub fn expectation(op: &OperatorMatrix, rho: &DensityMatrix) -> Result<C64> {
    trace_product(op, rho.operator())
}

/// `Tr(a b)` without forming the product.
pub fn trace_product(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<C64> {
    check_same(a.space(), b.space())?;
    let d = a.dim();
    let mut s = ZERO;
    for i in 0..d {
        for j in 0..d {
            s += a.elements[[i, j]] * b.elements[[j, i]];
        }
    }
    Ok(s)
}

pub(crate) fn to_nalgebra(m: &Array2<C64>) -> na::DMatrix<C64> {
    let (r, c) = m.dim();
    na::DMatrix::from_fn(r, c, |i, j| m[[i, j]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{rngs::StdRng, Rng, SeedableRng};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn random_op(rng: &mut StdRng, space: &HilbertSpace) -> OperatorMatrix {
        let d = space.dim();
        let m = Array2::from_shape_fn((d, d), |_| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        OperatorMatrix::new(space.clone(), m).unwrap()
    }

    fn random_hermitian(rng: &mut StdRng, space: &HilbertSpace) -> OperatorMatrix {
        let a = random_op(rng, space);
        (&a + &a.adjoint()) * 0.5
    }

    fn sigma() -> OperatorMatrix {
        build_transition(2, 0, 1).unwrap()
    }

    #[test]
    fn space_rejects_empty_and_zero() {
        assert!(HilbertSpace::new(vec![]).is_err());
        assert!(HilbertSpace::new(vec![3, 0]).is_err());
        assert_eq!(HilbertSpace::new(vec![3, 2, 2]).unwrap().dim(), 12);
    }

    #[test]
    fn annihilation_lowest_truncation() {
        let a = build_annihilation(1).unwrap();
        assert_eq!(a.dim(), 2);
        assert_eq!(a.get(0, 1), c(1.0));
        assert_eq!(a.max_abs(), 1.0);
        assert_eq!(build_annihilation(0), Err(Error::ZeroTruncation));
    }

    #[test]
    fn annihilation_entries_and_truncated_commutator() {
        let a = build_annihilation(2).unwrap();
        assert_eq!(a.get(0, 1), c(1.0));
        assert_eq!(a.get(1, 2), c(2f64.sqrt()));
        let comm = a.commutator(&a.adjoint());
        let expected = OperatorMatrix::diagonal(a.space(), &[c(1.0), c(1.0), c(-2.0)]).unwrap();
        assert!(comm.max_diff(&expected) < 1e-14);
    }

    #[test]
    fn transitions() {
        let s = sigma();
        assert_eq!(s.get(0, 1), c(1.0));
        let s23 = build_transition(3, 1, 2).unwrap();
        assert_eq!(s23.get(1, 2), c(1.0));
        assert_eq!(s23.max_abs(), 1.0);
        let s13 = build_transition(3, 0, 2).unwrap();
        let p3 = &s13.adjoint() * &s13;
        assert!(p3.max_diff(&build_transition(3, 2, 2).unwrap()) == 0.0);
        assert!(matches!(build_transition(3, 3, 0), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn embed_identity_and_kron_layout() {
        let space = HilbertSpace::new(vec![3, 2]).unwrap();
        let id2 = OperatorMatrix::identity(&HilbertSpace::single(2).unwrap());
        for slot in 0..2 {
            let dim = space.dims()[slot];
            let id = OperatorMatrix::identity(&HilbertSpace::single(dim).unwrap());
            let e = embed(&id, slot, &space).unwrap();
            assert_eq!(e.max_diff(&OperatorMatrix::identity(&space)), 0.0);
        }
        let e = embed(&sigma(), 1, &space).unwrap();
        // I3 ⊗ σ: σ block on the diagonal
        for b in 0..3 {
            assert_eq!(e.get(2 * b, 2 * b + 1), c(1.0));
        }
        assert_eq!(e.elements().iter().filter(|z| z.norm() > 0.0).count(), 3);
        assert!(embed(&id2, 0, &space).is_err());
    }

    #[test]
    fn disjoint_factors_commute() {
        let space = HilbertSpace::new(vec![3, 2]).unwrap();
        let a = embed(&build_annihilation(2).unwrap(), 0, &space).unwrap();
        let s = embed(&sigma(), 1, &space).unwrap();
        assert_eq!(a.commutator(&s).max_abs(), 0.0);
    }

    #[test]
    fn embed_is_homomorphism() {
        let mut rng = StdRng::seed_from_u64(7);
        let space = HilbertSpace::new(vec![2, 3]).unwrap();
        for _ in 0..20 {
            for slot in 0..2 {
                let sub = HilbertSpace::single(space.dims()[slot]).unwrap();
                let a = random_op(&mut rng, &sub);
                let b = random_op(&mut rng, &sub);
                let lhs = embed(&(&a * &b), slot, &space).unwrap();
                let rhs = &embed(&a, slot, &space).unwrap() * &embed(&b, slot, &space).unwrap();
                assert!(lhs.max_diff(&rhs) < 1e-13);
            }
        }
    }

    #[test]
    fn vectorization_is_column_stacking() {
        let m = OperatorMatrix::from_real(HilbertSpace::single(2).unwrap(), &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let v = vectorize(&m);
        let got: Vec<f64> = v.iter().map(|z| z.re).collect();
        assert_eq!(got, vec![1.0, 3.0, 2.0, 4.0]);
        assert_eq!(unvectorize(m.space(), &v).unwrap(), m);
    }

    #[test]
    fn sandwich_matches_products() {
        let mut rng = StdRng::seed_from_u64(3);
        let space = HilbertSpace::new(vec![3]).unwrap();
        let (a, b, x) =
            (random_op(&mut rng, &space), random_op(&mut rng, &space), random_op(&mut rng, &space));
        let s = Superoperator::sandwich(&a, &b).unwrap();
        let direct = &(&a * &x) * &b;
        assert!(s.apply(&x).unwrap().max_diff(&direct) < 1e-13);
    }

    #[test]
    fn dissipator_of_identity_vanishes() {
        let id = OperatorMatrix::identity(&HilbertSpace::single(3).unwrap());
        assert!(dissipator(&id).max_abs() < 1e-15);
    }

    #[test]
    fn dissipator_pure_decay() {
        let rho = DensityMatrix::basis(&HilbertSpace::single(2).unwrap(), 1).unwrap();
        let out = dissipator(&sigma()).apply(rho.operator()).unwrap();
        let expected = OperatorMatrix::diagonal(rho.space(), &[c(1.0), c(-1.0)]).unwrap();
        assert!(out.max_diff(&expected) < 1e-15);
    }

    #[test]
    fn dissipator_matches_direct_formula_and_is_traceless() {
        let mut rng = StdRng::seed_from_u64(11);
        let space = HilbertSpace::new(vec![2, 2]).unwrap();
        for _ in 0..100 {
            let a = random_op(&mut rng, &space);
            let rho = random_hermitian(&mut rng, &space);
            let out = dissipator(&a).apply(&rho).unwrap();
            let ad = a.adjoint();
            let direct = &(&(&a * &rho) * &ad) - &((&ad * &a).anticommutator(&rho) * 0.5);
            assert!(out.max_diff(&direct) < 1e-12);
            assert!(out.trace().norm() < 1e-12);
        }
    }

    #[test]
    fn empty_liouvillian_is_zero() {
        let space = HilbertSpace::single(3).unwrap();
        let l = liouvillian(&OperatorMatrix::zeros(&space), &[]).unwrap();
        assert_eq!(l.max_abs(), 0.0);
    }

    #[test]
    fn liouvillian_rejects_negative_rate() {
        let space = HilbertSpace::single(2).unwrap();
        let r = liouvillian(&OperatorMatrix::zeros(&space), &[(sigma(), -1.0)]);
        assert_eq!(r, Err(Error::NegativeRate(-1.0)));
    }

    #[test]
    fn qubit_decay_spectrum() {
        let gamma = 0.7;
        let space = HilbertSpace::single(2).unwrap();
        let l = liouvillian(&OperatorMatrix::zeros(&space), &[(sigma(), gamma)]).unwrap();
        let schur = na::Schur::new(to_nalgebra(l.elements()));
        let mut ev: Vec<C64> = schur.eigenvalues().unwrap().iter().cloned().collect();
        ev.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap());
        let expected = [0.0, -gamma / 2.0, -gamma / 2.0, -gamma];
        for (got, want) in ev.iter().zip(expected) {
            assert_abs_diff_eq!(got.re, want, epsilon = 1e-12);
            assert_abs_diff_eq!(got.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn liouvillian_preserves_trace_and_hermiticity() {
        let mut rng = StdRng::seed_from_u64(5);
        let space = HilbertSpace::new(vec![3, 2]).unwrap();
        for _ in 0..10 {
            let h = random_hermitian(&mut rng, &space);
            let jumps: Vec<(OperatorMatrix, f64)> =
                (0..3).map(|_| (random_op(&mut rng, &space), rng.random_range(0.0..2.0))).collect();
            let l = liouvillian(&h, &jumps).unwrap();
            assert!(l.trace_residual() < 1e-10);
            let rho = random_hermitian(&mut rng, &space);
            assert!(l.apply(&rho).unwrap().hermiticity_error() < 1e-12);
        }
    }

    #[test]
    fn expectation_values() {
        let space = HilbertSpace::single(2).unwrap();
        let ground = DensityMatrix::basis(&space, 0).unwrap();
        let id = OperatorMatrix::identity(&space);
        assert_abs_diff_eq!(expectation(&id, &ground).unwrap().re, 1.0);
        let sz = OperatorMatrix::diagonal(&space, &[c(-1.0), c(1.0)]).unwrap();
        assert_abs_diff_eq!(expectation(&sz, &ground).unwrap().re, -1.0);
    }

    #[test]
    fn photon_number_matches_direct_sum() {
        let n_max = 12;
        let a = build_annihilation(n_max).unwrap();
        let alpha: f64 = 1.3;
        // Gaussian-populated amplitudes
        let amps: Vec<C64> =
            (0..=n_max).map(|n| c((-(n as f64 - alpha * alpha).powi(2) / 4.0).exp())).collect();
        let rho = DensityMatrix::pure(a.space(), &amps).unwrap();
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        let direct: f64 = amps.iter().enumerate().map(|(n, z)| n as f64 * z.norm_sqr() / norm).sum();
        let got = expectation(&(&a.adjoint() * &a), &rho).unwrap();
        assert_abs_diff_eq!(got.re, direct, epsilon = 1e-13);
    }

    #[test]
    fn density_validation() {
        let space = HilbertSpace::single(2).unwrap();
        let bad = OperatorMatrix::diagonal(&space, &[c(1.1), c(-0.1)]).unwrap();
        assert!(DensityMatrix::new(bad).is_err());
        let unnormalized = OperatorMatrix::diagonal(&space, &[c(0.5), c(0.4)]).unwrap();
        assert!(DensityMatrix::new(unnormalized).is_err());
        let mixed = OperatorMatrix::diagonal(&space, &[c(0.5), c(0.5)]).unwrap();
        assert!(DensityMatrix::new(mixed).is_ok());
    }

    #[test]
    fn partial_trace_of_product() {
        let space = HilbertSpace::new(vec![3, 2]).unwrap();
        let rho = DensityMatrix::product_basis(&space, &[2, 1]).unwrap();
        let atom = partial_trace(rho.operator(), 1).unwrap();
        assert_eq!(atom.get(1, 1), c(1.0));
        let cav = partial_trace(rho.operator(), 0).unwrap();
        assert_eq!(cav.get(2, 2), c(1.0));
        assert_abs_diff_eq!(cav.trace().re, 1.0);
    }
}
