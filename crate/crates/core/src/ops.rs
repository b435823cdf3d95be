//! Dense operator helpers shared by the physics modules.
//!
//! Qubit 0 is the most significant tensor factor: basis index `x` has bit
//! `(x >> (n - 1 - i)) & 1` for qubit `i`, and bit value 0 is the
//! `σ^z = +1` eigenstate.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type Op = DMatrix<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn sigma_x() -> Op {
    Op::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)])
}

pub fn sigma_y() -> Op {
    Op::from_row_slice(2, 2, &[c(0.0), -I, I, c(0.0)])
}

pub fn sigma_z() -> Op {
    Op::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)])
}

/// Bit of qubit `i` in basis index `x` for an `n`-qubit register.
#[inline]
pub fn bit(x: usize, i: usize, n: usize) -> usize {
    (x >> (n - 1 - i)) & 1
}

/// `σ^z` eigenvalue (+1 for bit 0, −1 for bit 1).
#[inline]
pub fn spin(x: usize, i: usize, n: usize) -> f64 {
    if bit(x, i, n) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `σ_i^z` embedded in an `n`-qubit register.
pub fn sigma_z_on(i: usize, n: usize) -> Op {
    let d = 1usize << n;
    Op::from_diagonal(&nalgebra::DVector::from_fn(d, |x, _| c(spin(x, i, n))))
}

/// The default longitudinal coupling set `{σ_i^z}`.
pub fn sigma_z_couplings(n: usize) -> Vec<Op> {
    (0..n).map(|i| sigma_z_on(i, n)).collect()
}

pub fn dagger(m: &Op) -> Op {
    m.adjoint()
}

pub fn commutator(a: &Op, b: &Op) -> Op {
    a * b - b * a
}

pub fn anticommutator(a: &Op, b: &Op) -> Op {
    a * b + b * a
}

pub fn trace(m: &Op) -> C64 {
    m.trace()
}

pub fn max_abs(m: &Op) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Largest entry of `m − m†`.
pub fn hermiticity_defect(m: &Op) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitian_part(m: &Op) -> Op {
    (m + m.adjoint()) * c(0.5)
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &Op) -> Vec<f64> {
    let h = hermitian_part(m);
    let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_eigenvalue(m: &Op) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)].re;
    }
    hermitian_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// Trace norm `‖m‖₁ = Σ|λ|` of a Hermitian operator.
pub fn trace_norm(m: &Op) -> f64 {
    hermitian_eigenvalues(m).iter().map(|x| x.abs()).sum()
}

/// `‖a − b‖₁` for Hermitian `a`, `b`.
pub fn trace_distance(a: &Op, b: &Op) -> f64 {
    trace_norm(&(a - b))
}

/// Frobenius norm.
pub fn frobenius(m: &Op) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Change to the basis whose columns are `v`: `v† m v`.
pub fn to_basis(m: &Op, v: &Op) -> Op {
    v.adjoint() * m * v
}

/// Inverse of [`to_basis`]: `v m v†`.
pub fn from_basis(m: &Op, v: &Op) -> Op {
    v * m * v.adjoint()
}

/// Column-stacking vectorization.
pub fn vec_of(m: &Op) -> nalgebra::DVector<C64> {
    nalgebra::DVector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &nalgebra::DVector<C64>, d: usize) -> Op {
    Op::from_column_slice(d, d, v.as_slice())
}

/// Kronecker product.
pub fn kron(a: &Op, b: &Op) -> Op {
    a.kronecker(b)
}
