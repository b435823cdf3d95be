//! Transverse-field Ising problems and their transformations.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::ops::{bit, c, hermiticity_defect, max_abs, spin, Op};

/// Largest register for which dense matrices are built.
pub const MAX_DENSE_QUBITS: usize = 14;

/// Hardware programming ranges used by [`IsingProblem::hardware_warnings`].
pub const MAX_ABS_FIELD: f64 = 4.0;
pub const MAX_ABS_COUPLER: f64 = 1.0;

/// `H_Z = Σ h_i σ_i^z + Σ_{i<j} J_ij σ_i^z σ_j^z` with energy scale `γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingProblem {
    h: Vec<f64>,
    couplers: BTreeMap<(usize, usize), f64>,
    gamma: f64,
}

impl IsingProblem {
    /// Builds a problem on `h.len()` qubits. Coupler keys are normalized to
    /// `i < j`; self-couplings, out-of-range indices and repeated pairs are
    /// rejected.
    pub fn new(h: Vec<f64>, couplers: impl IntoIterator<Item = ((usize, usize), f64)>, gamma: f64) -> Result<Self> {
        let n = h.len();
        if n == 0 {
            return Err(Error::Problem("problem has no qubits".into()));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Problem(format!("energy scale gamma = {gamma} outside (0, 1]")));
        }
        if let Some(x) = h.iter().find(|x| !x.is_finite()) {
            return Err(Error::Problem(format!("non-finite field {x}")));
        }
        let mut map = BTreeMap::new();
        for ((i, j), v) in couplers {
            if i == j {
                return Err(Error::Problem(format!("self-coupling on qubit {i}")));
            }
            if i >= n || j >= n {
                return Err(Error::Problem(format!("coupler ({i}, {j}) out of range for {n} qubits")));
            }
            if !v.is_finite() {
                return Err(Error::Problem(format!("non-finite coupler ({i}, {j})")));
            }
            if map.insert((i.min(j), i.max(j)), v).is_some() {
                return Err(Error::Problem(format!("coupler ({i}, {j}) given twice")));
            }
        }
        Ok(Self { h, couplers: map, gamma })
    }

    /// Problem with no fields or couplers.
    pub fn empty(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n], [], 1.0)
    }

    /// Open chain with uniform coupling `j` and the given fields.
    pub fn chain(h: Vec<f64>, j: f64) -> Result<Self> {
        let n = h.len();
        Self::new(h, (0..n.saturating_sub(1)).map(|i| ((i, i + 1), j)), 1.0)
    }

    pub fn n(&self) -> usize {
        self.h.len()
    }

    pub fn dim(&self) -> usize {
        1 << self.n()
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Problem(format!("energy scale gamma = {gamma} outside (0, 1]")));
        }
        self.gamma = gamma;
        Ok(self)
    }

    /// Couplers as `((i, j), J_ij)` with `i < j`, sorted.
    pub fn couplers(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.couplers.iter().map(|(&k, &v)| (k, v))
    }

    pub fn coupler(&self, i: usize, j: usize) -> f64 {
        self.couplers.get(&(i.min(j), i.max(j))).copied().unwrap_or(0.0)
    }

    /// Fields or couplers outside the hardware programming range.
    pub fn hardware_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, &x) in self.h.iter().enumerate() {
            if x.abs() > MAX_ABS_FIELD {
                out.push(format!("|h_{i}| = {} exceeds {MAX_ABS_FIELD}", x.abs()));
            }
        }
        for ((i, j), v) in self.couplers() {
            if v.abs() > MAX_ABS_COUPLER {
                out.push(format!("|J_{i}{j}| = {} exceeds {MAX_ABS_COUPLER}", v.abs()));
            }
        }
        out
    }

    /// `H_Z` evaluated on the basis state `x` (no `γ`).
    pub fn energy(&self, x: usize) -> f64 {
        let n = self.n();
        let fields: f64 = self.h.iter().enumerate().map(|(i, h)| h * spin(x, i, n)).sum();
        let pairs: f64 = self.couplers().map(|((i, j), v)| v * spin(x, i, n) * spin(x, j, n)).sum();
        fields + pairs
    }

    /// Diagonal of `H_Z` in the computational basis.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|x| self.energy(x)).collect()
    }

    /// Basis states minimizing `H_Z`, within `tol` of the minimum.
    pub fn ground_states(&self, tol: f64) -> Vec<usize> {
        let diag = self.diagonal();
        let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
        (0..diag.len()).filter(|&x| diag[x] - min <= tol).collect()
    }

    /// Bits of basis state `x`, qubit 0 first.
    pub fn bits_of(&self, x: usize) -> Vec<u8> {
        let n = self.n();
        (0..n).map(|i| bit(x, i, n) as u8).collect()
    }

    fn check_dense(&self) -> Result<()> {
        if self.n() > MAX_DENSE_QUBITS {
            return Err(Error::TooLarge(self.n()));
        }
        Ok(())
    }
}

/// Number of differing bits between two basis states.
pub fn hamming_distance(x: usize, y: usize) -> u32 {
    (x ^ y).count_ones()
}

/// Dense Hermitian Hamiltonian in rad/ns.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix(Op);

impl HamiltonianMatrix {
    /// Wraps `m` after checking Hermiticity to `1e-12` relative.
    pub fn new(m: Op) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension { expected: m.nrows(), got: m.ncols() });
        }
        let scale = max_abs(&m).max(1.0);
        let defect = hermiticity_defect(&m);
        if defect > 1e-12 * scale {
            return Err(Error::Precondition(format!("Hamiltonian is not Hermitian (defect {defect:e})")));
        }
        Ok(Self(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_op(&self) -> &Op {
        &self.0
    }

    pub fn into_op(self) -> Op {
        self.0
    }
}

/// `H_S = (A/2) H_X + γ (B/2) H_Z` with `H_X = −Σ σ_i^x`.
pub fn hamiltonian_at(problem: &IsingProblem, a: f64, b: f64) -> Result<HamiltonianMatrix> {
    if !(a >= 0.0 && b >= 0.0) {
        return Err(Error::Domain(format!("schedule envelopes must be non-negative (A = {a}, B = {b})")));
    }
    problem.check_dense()?;
    let n = problem.n();
    let d = problem.dim();
    let zscale = problem.gamma() * b / 2.0;
    let diag = DVector::from_iterator(d, problem.diagonal().into_iter().map(|e| c(zscale * e)));
    let mut m = Op::from_diagonal(&diag);
    let off = c(-a / 2.0);
    if a != 0.0 {
        for x in 0..d {
            for i in 0..n {
                m[(x ^ (1 << (n - 1 - i)), x)] += off;
            }
        }
    }
    Ok(HamiltonianMatrix(m))
}

/// Ferromagnetic crosstalk: `h_i → h_i − χ Σ_{k≠i} J_ik h_k`,
/// `J_ij → J_ij + χ Σ_{k≠i,j} J_ik J_jk`.
pub fn apply_crosstalk(problem: &IsingProblem, chi: f64) -> Result<IsingProblem> {
    if !(chi >= 0.0) {
        return Err(Error::Domain(format!("crosstalk chi = {chi} must be non-negative")));
    }
    let n = problem.n();
    let mut neighbors: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for ((i, j), v) in problem.couplers() {
        neighbors[i].push((j, v));
        neighbors[j].push((i, v));
    }
    let h = (0..n)
        .map(|i| problem.h[i] - chi * neighbors[i].iter().map(|&(k, v)| v * problem.h[k]).sum::<f64>())
        .collect();
    let mut couplers = problem.couplers.clone();
    if chi != 0.0 {
        for (i, adj) in neighbors.iter().enumerate() {
            for j in i + 1..n {
                let extra: f64 = adj
                    .iter()
                    .filter(|&&(k, _)| k != j)
                    .map(|&(k, v)| v * problem.coupler(j, k))
                    .sum();
                if extra != 0.0 {
                    *couplers.entry((i, j)).or_insert(0.0) += chi * extra;
                }
            }
        }
    }
    Ok(IsingProblem { h, couplers, gamma: problem.gamma })
}

/// Spin-reversal transform: `h_i → g_i h_i`, `J_ij → g_i g_j J_ij`.
pub fn gauge_transform(problem: &IsingProblem, g: &[i8]) -> Result<IsingProblem> {
    if g.len() != problem.n() {
        return Err(Error::Dimension { expected: problem.n(), got: g.len() });
    }
    if g.iter().any(|&x| x != 1 && x != -1) {
        return Err(Error::Domain("gauge entries must be +1 or -1".into()));
    }
    let gf = |i: usize| g[i] as f64;
    Ok(IsingProblem {
        h: problem.h.iter().enumerate().map(|(i, &x)| gf(i) * x).collect(),
        couplers: problem.couplers().map(|((i, j), v)| ((i, j), gf(i) * gf(j) * v)).collect(),
        gamma: problem.gamma,
    })
}

/// Adds independent Gaussian noise to every field and every programmed
/// coupler. Fields are drawn first in qubit order, then couplers in
/// sorted key order.
pub fn sample_ice(problem: &IsingProblem, sigma_h: f64, sigma_j: f64, seed: u64) -> Result<IsingProblem> {
    if !(sigma_h >= 0.0 && sigma_j >= 0.0) {
        return Err(Error::Domain("noise standard deviations must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nh = Normal::new(0.0, sigma_h).map_err(|e| Error::Domain(e.to_string()))?;
    let nj = Normal::new(0.0, sigma_j).map_err(|e| Error::Domain(e.to_string()))?;
    let h = problem.h.iter().map(|&x| x + nh.sample(&mut rng)).collect();
    let couplers = problem.couplers().map(|(k, v)| (k, v + nj.sample(&mut rng))).collect();
    Ok(IsingProblem { h, couplers, gamma: problem.gamma })
}

/// Repetition code with `m` data copies and one penalty qubit per logical
/// qubit. Logical qubit `i` owns physical qubits `i(m+1) .. i(m+1)+m`, the
/// last of which is the penalty qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QacCode {
    m: usize,
    lambda: f64,
}

impl QacCode {
    pub fn new(m: usize, lambda: f64) -> Result<Self> {
        if m.is_multiple_of(2) {
            return Err(Error::Domain(format!("repetition count m = {m} must be odd")));
        }
        if !(lambda >= 0.0) {
            return Err(Error::Domain(format!("penalty strength {lambda} must be non-negative")));
        }
        Ok(Self { m, lambda })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Physical index of copy `l` (0-based) of logical qubit `i`.
    pub fn data_qubit(&self, i: usize, l: usize) -> usize {
        i * (self.m + 1) + l
    }

    pub fn penalty_qubit(&self, i: usize) -> usize {
        i * (self.m + 1) + self.m
    }

    /// `(data qubits, penalty qubit)` for each of `n` logical qubits.
    pub fn index_map(&self, n: usize) -> Vec<(Vec<usize>, usize)> {
        (0..n)
            .map(|i| ((0..self.m).map(|l| self.data_qubit(i, l)).collect(), self.penalty_qubit(i)))
            .collect()
    }
}

impl Default for QacCode {
    fn default() -> Self {
        Self { m: 3, lambda: 0.0 }
    }
}

/// Encoded problem `H̄_Z + λ H_P` on `n(m+1)` qubits.
pub fn qac_encode(problem: &IsingProblem, code: &QacCode) -> Result<IsingProblem> {
    let n = problem.n();
    let m = code.m();
    let mut h = vec![0.0; n * (m + 1)];
    let mut couplers = Vec::new();
    for i in 0..n {
        for l in 0..m {
            h[code.data_qubit(i, l)] = problem.h[i];
            if code.lambda() != 0.0 {
                couplers.push(((code.data_qubit(i, l), code.penalty_qubit(i)), -code.lambda()));
            }
        }
    }
    for ((i, j), v) in problem.couplers() {
        for l in 0..m {
            couplers.push(((code.data_qubit(i, l), code.data_qubit(j, l)), v));
        }
    }
    IsingProblem::new(h, couplers, problem.gamma())
}

/// Majority vote over the data copies of each logical qubit.
pub fn decode_majority(bits: &[u8], code: &QacCode) -> Result<Vec<u8>> {
    let block = code.m() + 1;
    if bits.is_empty() || !bits.len().is_multiple_of(block) {
        return Err(Error::Dimension { expected: block * (bits.len() / block).max(1), got: bits.len() });
    }
    Ok(bits
        .chunks(block)
        .map(|chunk| {
            let ones = chunk[..code.m()].iter().filter(|&&b| b != 0).count();
            u8::from(2 * ones > code.m())
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::hermitian_eigenvalues;

    fn diag_of(h: &HamiltonianMatrix) -> Vec<f64> {
        (0..h.dim()).map(|i| h.as_op()[(i, i)].re).collect()
    }

    #[test]
    fn hamiltonian_examples() {
        let p = IsingProblem::new(vec![1.0], [], 1.0).unwrap();
        let h = hamiltonian_at(&p, 0.0, 2.0).unwrap();
        assert_eq!(diag_of(&h), vec![1.0, -1.0]);
        assert_eq!(h.as_op()[(0, 1)], c(0.0));

        let p = IsingProblem::new(vec![0.0], [], 1.0).unwrap();
        let h = hamiltonian_at(&p, 2.0, 0.0).unwrap();
        assert_eq!(h.as_op()[(0, 1)], c(-1.0));
        assert_eq!(h.as_op()[(1, 0)], c(-1.0));
        assert_eq!(diag_of(&h), vec![0.0, 0.0]);

        let p = IsingProblem::new(vec![0.0, 0.0], [((0, 1), -1.0)], 1.0).unwrap();
        let h = hamiltonian_at(&p, 0.0, 2.0).unwrap();
        assert_eq!(diag_of(&h), vec![-1.0, 1.0, 1.0, -1.0]);
    }

    #[test]
    fn gamma_scales_only_the_problem_term() {
        let p = IsingProblem::new(vec![1.0], [], 0.5).unwrap();
        let h = hamiltonian_at(&p, 2.0, 2.0).unwrap();
        assert_eq!(diag_of(&h), vec![0.5, -0.5]);
        assert_eq!(h.as_op()[(0, 1)], c(-1.0));
    }

    #[test]
    fn dense_guard() {
        let p = IsingProblem::empty(MAX_DENSE_QUBITS + 1).unwrap();
        assert!(matches!(hamiltonian_at(&p, 1.0, 1.0), Err(Error::TooLarge(_))));
        assert!(hamiltonian_at(&IsingProblem::empty(1).unwrap(), -1.0, 0.0).is_err());
    }

    #[test]
    fn problem_validation() {
        assert!(IsingProblem::new(vec![0.0; 2], [((1, 1), 1.0)], 1.0).is_err());
        assert!(IsingProblem::new(vec![0.0; 2], [((0, 2), 1.0)], 1.0).is_err());
        assert!(IsingProblem::new(vec![0.0; 2], [((0, 1), 1.0), ((1, 0), 1.0)], 1.0).is_err());
        assert!(IsingProblem::new(vec![0.0; 2], [], 0.0).is_err());
        let p = IsingProblem::new(vec![5.0, 0.0], [((1, 0), -2.0)], 1.0).unwrap();
        assert_eq!(p.coupler(0, 1), -2.0);
        assert_eq!(p.hardware_warnings().len(), 2);
    }

    #[test]
    fn crosstalk_examples() {
        let p = IsingProblem::new(vec![1.0, 0.0], [((0, 1), -1.0)], 1.0).unwrap();
        assert_eq!(apply_crosstalk(&p, 0.0).unwrap(), p);
        let q = apply_crosstalk(&p, 0.02).unwrap();
        assert_eq!(q.h(), &[1.0, 0.02]);
        assert_eq!(q.coupler(0, 1), -1.0);
        assert_eq!(q.couplers().count(), 1);

        let chain = IsingProblem::chain(vec![0.0; 3], -1.0).unwrap();
        let q = apply_crosstalk(&chain, 0.02).unwrap();
        assert!((q.coupler(0, 2) - 0.02).abs() < 1e-15);
        assert_eq!(q.coupler(0, 1), -1.0);
        assert_eq!(q.coupler(1, 2), -1.0);
        assert_eq!(q.h(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn gauge_examples() {
        let p = IsingProblem::new(vec![1.0], [], 1.0).unwrap();
        assert_eq!(gauge_transform(&p, &[1]).unwrap(), p);
        assert_eq!(gauge_transform(&p, &[-1]).unwrap().h(), &[-1.0]);
        assert!(gauge_transform(&p, &[1, 1]).is_err());
        assert!(gauge_transform(&p, &[0]).is_err());
    }

    #[test]
    fn gauge_preserves_spectrum() {
        let p = IsingProblem::new(vec![0.3, -0.7, 0.1], [((0, 1), -0.4), ((1, 2), 0.9), ((0, 2), 0.25)], 0.8).unwrap();
        let q = gauge_transform(&p, &[-1, 1, -1]).unwrap();
        for (a, b) in [(1.0, 0.5), (0.3, 2.0), (0.0, 1.0)] {
            let e1 = hermitian_eigenvalues(hamiltonian_at(&p, a, b).unwrap().as_op());
            let e2 = hermitian_eigenvalues(hamiltonian_at(&q, a, b).unwrap().as_op());
            for (x, y) in e1.iter().zip(&e2) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ice_examples() {
        let p = IsingProblem::new(vec![0.5, -0.5], [((0, 1), -1.0)], 1.0).unwrap();
        assert_eq!(sample_ice(&p, 0.0, 0.0, 7).unwrap(), p);
        assert_eq!(sample_ice(&p, 0.1, 0.1, 7).unwrap(), sample_ice(&p, 0.1, 0.1, 7).unwrap());
        assert_ne!(sample_ice(&p, 0.1, 0.1, 7).unwrap(), sample_ice(&p, 0.1, 0.1, 8).unwrap());

        let sigma = 0.05;
        let draws: Vec<f64> = (0..10_000).map(|s| sample_ice(&p, sigma, 0.0, s).unwrap().h()[0]).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        assert!((var.sqrt() / sigma - 1.0).abs() < 0.05);
    }

    #[test]
    fn qac_examples() {
        let code = QacCode::new(3, 0.1).unwrap();
        let p = IsingProblem::new(vec![1.0], [], 1.0).unwrap();
        let q = qac_encode(&p, &code).unwrap();
        assert_eq!(q.n(), 4);
        assert_eq!(q.h(), &[1.0, 1.0, 1.0, 0.0]);
        let cs: Vec<_> = q.couplers().collect();
        assert_eq!(cs, vec![((0, 3), -0.1), ((1, 3), -0.1), ((2, 3), -0.1)]);

        let q = qac_encode(&p, &QacCode::new(3, 0.0).unwrap()).unwrap();
        assert_eq!(q.couplers().count(), 0);

        let p = IsingProblem::new(vec![0.0, 0.0], [((0, 1), -1.0)], 1.0).unwrap();
        let q = qac_encode(&p, &code).unwrap();
        for l in 0..3 {
            assert_eq!(q.coupler(l, 4 + l), -1.0);
        }
        assert!(QacCode::new(2, 0.1).is_err());
    }

    #[test]
    fn majority_examples() {
        let code = QacCode::default();
        assert_eq!(decode_majority(&[1, 1, 1, 0], &code).unwrap(), vec![1]);
        assert_eq!(decode_majority(&[1, 1, 0, 1], &code).unwrap(), vec![1]);
        assert_eq!(decode_majority(&[0, 1, 0, 1], &code).unwrap(), vec![0]);
        assert!(decode_majority(&[0, 1, 0], &code).is_err());
    }

    #[test]
    fn ground_states_and_hamming() {
        let p = IsingProblem::chain(vec![0.0; 3], -1.0).unwrap();
        assert_eq!(p.ground_states(1e-12), vec![0, 7]);
        assert_eq!(hamming_distance(0, 7), 3);
        assert_eq!(p.bits_of(6), vec![1, 1, 0]);
    }
}
