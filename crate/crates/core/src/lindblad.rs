//! Davies generator of the adiabatic master equation, Pauli transition
//! rates and the freezing point.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{hamiltonian_at, HamiltonianMatrix, IsingProblem};
use crate::ops::{c, hermiticity_defect, kron, max_abs, Op, C64, I};
use crate::schedule::PhysicalSchedule;
use crate::spectral::{eigensystem, EigenSystem, DEFAULT_GROUPING_TOL};

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;

/// Default Lamb-shift cutoff, rad/ns.
pub const DEFAULT_LAMB_CUTOFF: f64 = 8.0 * PI;

/// Jump-operator matrix elements below this magnitude are dropped.
const ENTRY_CUTOFF: f64 = 1e-14;

/// `β = ħ / (k_B T)` in ns for a temperature in mK.
pub fn beta_from_millikelvin(t_mk: f64) -> f64 {
    HBAR / (K_B * t_mk * 1e-3) * 1e9
}

/// Rate function of a bath. Implementations must satisfy the KMS relation
/// `γ(−ω) = e^{−βω} γ(ω)` for the Gibbs state to be stationary.
pub trait Bath: Send + Sync {
    fn beta(&self) -> f64;
    fn gamma(&self, omega: f64) -> f64;
    /// Lamb-shift function `S(ω)`, or `None` when the shift is disabled.
    fn lamb_shift(&self, omega: f64) -> Option<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LambShift {
    #[default]
    Off,
    /// Exponential cutoff `e^{−|ω|/ω_c}` on the rate function, `ω_c` in rad/ns.
    On { cutoff: f64 },
}

/// Ohmic bath `γ(ω) = 2π η₀g² ω / (1 − e^{−βω})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathSpec {
    coupling: f64,
    beta: f64,
    temperature_mk: Option<f64>,
    lamb: LambShift,
}

impl BathSpec {
    /// `coupling` is the dimensionless product `η₀g²`.
    pub fn from_millikelvin(coupling: f64, t_mk: f64) -> Result<Self> {
        if !(t_mk > 0.0 && t_mk.is_finite()) {
            return Err(Error::Domain(format!("temperature {t_mk} mK must be positive")));
        }
        let mut b = Self::from_beta(coupling, beta_from_millikelvin(t_mk))?;
        b.temperature_mk = Some(t_mk);
        Ok(b)
    }

    /// Bath at inverse temperature `beta` in the time unit of the rates.
    pub fn from_beta(coupling: f64, beta: f64) -> Result<Self> {
        if !(coupling > 0.0 && coupling.is_finite()) {
            return Err(Error::Domain(format!("bath coupling {coupling} must be positive")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Domain(format!("inverse temperature {beta} must be positive")));
        }
        Ok(Self { coupling, beta, temperature_mk: None, lamb: LambShift::Off })
    }

    pub fn with_lamb_shift(mut self, lamb: LambShift) -> Result<Self> {
        if let LambShift::On { cutoff } = lamb {
            if !(cutoff > 0.0 && cutoff.is_finite()) {
                return Err(Error::Domain(format!("Lamb-shift cutoff {cutoff} must be positive")));
            }
        }
        self.lamb = lamb;
        Ok(self)
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn temperature_mk(&self) -> Option<f64> {
        self.temperature_mk
    }

    pub fn lamb(&self) -> LambShift {
        self.lamb
    }
}

impl Bath for BathSpec {
    fn beta(&self) -> f64 {
        self.beta
    }

    fn gamma(&self, omega: f64) -> f64 {
        gamma_ohmic(self, omega)
    }

    fn lamb_shift(&self, omega: f64) -> Option<f64> {
        match self.lamb {
            LambShift::Off => None,
            LambShift::On { cutoff } => Some(lamb_shift_ohmic(self, cutoff, omega)),
        }
    }
}

/// Ohmic rate in rad/ns, with the continuous limit `2π η₀g²/β` at `ω = 0`.
pub fn gamma_ohmic(bath: &BathSpec, omega: f64) -> f64 {
    let pref = 2.0 * PI * bath.coupling;
    let x = bath.beta * omega.abs();
    if x == 0.0 {
        return pref / bath.beta;
    }
    // ω / (1 − e^{−βω}) for ω > 0 and |ω| e^{−β|ω|} / (1 − e^{−β|ω|}) for ω < 0
    let up = omega.abs() / -(-x).exp_m1();
    if omega > 0.0 {
        pref * up
    } else {
        pref * up * (-x).exp()
    }
}

/// Principal-value Lamb-shift function with exponential cutoff:
/// `S(ω) = P∫ γ(ω') e^{−|ω'|/ω_c} / (ω − ω') dω'`, evaluated as
/// `∫₀^∞ [f(ω−u) − f(ω+u)] / u du`.
pub fn lamb_shift_ohmic(bath: &BathSpec, cutoff: f64, omega: f64) -> f64 {
    let f = |x: f64| gamma_ohmic(bath, x) * (-x.abs() / cutoff).exp();
    let g = |u: f64| {
        if u == 0.0 {
            0.0
        } else {
            (f(omega - u) - f(omega + u)) / u
        }
    };
    let scale = 2.0 * PI * bath.coupling * cutoff.max(1.0 / bath.beta);
    let tol = 1e-12 * scale;
    let mut total = 0.0;
    let mut lo = 0.0;
    let knee = omega.abs();
    if knee > 0.0 {
        total += quadrature::integrate(g, 0.0, knee, tol).integral;
        lo = knee;
    }
    let width = 2.0 * cutoff.max(1.0 / bath.beta);
    for _ in 0..40 {
        total += quadrature::integrate(g, lo, lo + width, tol).integral;
        lo += width;
    }
    total
}

struct Channel {
    rate: f64,
    /// `(a, b, ⟨a|A|b⟩)` sorted by row.
    entries: Vec<(usize, usize, C64)>,
    dense: Option<Op>,
}

/// Davies generator at one schedule point, stored in the eigenbasis of
/// `H_S`.
pub struct DaviesGenerator {
    eig: EigenSystem,
    beta: f64,
    coupling_eig: Vec<Op>,
    channels: Vec<Channel>,
    /// `Σ γ(ω) A(ω)†A(ω)` in the eigenbasis.
    k: Op,
    /// `H_LS` in the eigenbasis.
    lamb: Option<Op>,
}

/// Accumulates `w · M†M` into `acc` for entries sorted by row.
fn add_gram(acc: &mut Op, entries: &[(usize, usize, C64)], w: f64) {
    let mut start = 0;
    while start < entries.len() {
        let row = entries[start].0;
        let end = start + entries[start..].iter().take_while(|e| e.0 == row).count();
        for &(_, b, x) in &entries[start..end] {
            for &(_, e, y) in &entries[start..end] {
                acc[(b, e)] += x.conj() * y * w;
            }
        }
        start = end;
    }
}

impl DaviesGenerator {
    /// Builds `A_i(ω) = Σ_{E_b−E_a=ω} Π_a A_i Π_b` for every coupling and
    /// Bohr group, with independent rates `γ(ω)`.
    pub fn new(eig: EigenSystem, couplings: &[Op], bath: &dyn Bath) -> Result<Self> {
        let d = eig.dim();
        let mut coupling_eig = Vec::with_capacity(couplings.len());
        for a in couplings {
            if a.nrows() != d || a.ncols() != d {
                return Err(Error::Dimension { expected: d, got: a.nrows() });
            }
            if hermiticity_defect(a) > 1e-12 * max_abs(a).max(1.0) {
                return Err(Error::Precondition("coupling operators must be Hermitian".into()));
            }
            coupling_eig.push(eig.vectors().adjoint() * a * eig.vectors());
        }
        let mut channels = Vec::new();
        let mut k = Op::zeros(d, d);
        let mut lamb = bath.lamb_shift(0.0).map(|_| Op::zeros(d, d));
        let dense_threshold = 4 * d * d * d;
        for group in eig.bohr_groups() {
            let rate = bath.gamma(group.omega);
            let shift = bath.lamb_shift(group.omega);
            for ai in &coupling_eig {
                let scale = ENTRY_CUTOFF * max_abs(ai).max(1.0);
                let mut entries: Vec<(usize, usize, C64)> = group
                    .pairs
                    .iter()
                    .map(|&(a, b)| (a, b, ai[(a, b)]))
                    .filter(|e| e.2.norm() > scale)
                    .collect();
                if entries.is_empty() {
                    continue;
                }
                entries.sort_by_key(|e| (e.0, e.1));
                add_gram(&mut k, &entries, rate);
                if let (Some(l), Some(s)) = (lamb.as_mut(), shift) {
                    add_gram(l, &entries, s);
                }
                let dense = (entries.len() * entries.len() > dense_threshold).then(|| {
                    let mut m = Op::zeros(d, d);
                    for &(a, b, x) in &entries {
                        m[(a, b)] = x;
                    }
                    m
                });
                if rate != 0.0 {
                    channels.push(Channel { rate, entries, dense });
                }
            }
        }
        Ok(Self { eig, beta: bath.beta(), coupling_eig, channels, k, lamb })
    }

    pub fn eigensystem(&self) -> &EigenSystem {
        &self.eig
    }

    pub fn dim(&self) -> usize {
        self.eig.dim()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Couplings `V† A_i V` in the eigenbasis.
    pub fn couplings_eigenbasis(&self) -> &[Op] {
        &self.coupling_eig
    }

    /// Lamb-shift Hamiltonian in the computational basis.
    pub fn lamb_shift_hamiltonian(&self) -> Option<Op> {
        self.lamb.as_ref().map(|l| self.eig.vectors() * l * self.eig.vectors().adjoint())
    }

    /// Jump operators `(ω, A_i(ω))` for coupling `i` in the computational
    /// basis, one per Bohr group with non-vanishing entries.
    pub fn jump_operators(&self, i: usize) -> Vec<(f64, Op)> {
        let d = self.dim();
        let v = self.eig.vectors();
        let ai = &self.coupling_eig[i];
        self.eig
            .bohr_groups()
            .iter()
            .filter_map(|g| {
                let mut m = Op::zeros(d, d);
                let mut any = false;
                for &(a, b) in &g.pairs {
                    if ai[(a, b)].norm() > 0.0 {
                        m[(a, b)] = ai[(a, b)];
                        any = true;
                    }
                }
                any.then(|| (g.omega, v * m * v.adjoint()))
            })
            .collect()
    }

    /// Dissipator in the eigenbasis.
    pub fn dissipator_eigen(&self, rho: &Op) -> Op {
        let d = self.dim();
        let mut out = (&self.k * rho + rho * &self.k) * c(-0.5);
        for ch in &self.channels {
            if let Some(m) = &ch.dense {
                out += m * rho * m.adjoint() * c(ch.rate);
                continue;
            }
            for &(a, b, x) in &ch.entries {
                let xr = x * ch.rate;
                for &(cc, e, y) in &ch.entries {
                    out[(a, cc)] += xr * rho[(b, e)] * y.conj();
                }
            }
        }
        debug_assert_eq!(out.nrows(), d);
        out
    }

    /// `L̃(ρ̃) = −i[E + H_LS, ρ̃] + D̃(ρ̃)` with everything in the eigenbasis.
    pub fn apply_eigen(&self, rho: &Op) -> Op {
        let d = self.dim();
        let e = self.eig.energies();
        let mut out = self.dissipator_eigen(rho);
        for j in 0..d {
            for i in 0..d {
                out[(i, j)] += -I * (e[i] - e[j]) * rho[(i, j)];
            }
        }
        if let Some(l) = &self.lamb {
            out += (l * rho - rho * l) * (-I);
        }
        out
    }

    /// Dissipator in the computational basis.
    pub fn dissipator(&self, rho: &Op) -> Op {
        let v = self.eig.vectors();
        v * self.dissipator_eigen(&(v.adjoint() * rho * v)) * v.adjoint()
    }

    /// Full generator in the computational basis.
    pub fn apply(&self, rho: &Op) -> Op {
        let v = self.eig.vectors();
        v * self.apply_eigen(&(v.adjoint() * rho * v)) * v.adjoint()
    }

    /// Matrix of `L̃` acting on column-stacked eigenbasis operators.
    pub fn superoperator_eigen(&self) -> Op {
        let d = self.dim();
        let id = Op::identity(d, d);
        let mut heff = Op::from_diagonal(&nalgebra::DVector::from_iterator(
            d,
            self.eig.energies().iter().map(|&x| c(x)),
        ));
        if let Some(l) = &self.lamb {
            heff += l;
        }
        let mut s = (kron(&id, &heff) - kron(&heff.transpose(), &id)) * (-I);
        s -= (kron(&id, &self.k) + kron(&self.k.transpose(), &id)) * c(0.5);
        for ch in &self.channels {
            for &(a, b, x) in &ch.entries {
                let xr = x * ch.rate;
                for &(cc, e, y) in &ch.entries {
                    s[(a + cc * d, b + e * d)] += xr * y.conj();
                }
            }
        }
        s
    }

    /// Matrix of `L` acting on column-stacked computational-basis operators.
    pub fn superoperator(&self) -> Op {
        let v = self.eig.vectors();
        let w = kron(&v.conjugate(), v);
        &w * self.superoperator_eigen() * w.adjoint()
    }
}

/// Builds the Davies generator of `h` with couplings `couplings`.
pub fn davies_generator(h: &HamiltonianMatrix, couplings: &[Op], bath: &dyn Bath) -> Result<DaviesGenerator> {
    DaviesGenerator::new(eigensystem(h, DEFAULT_GROUPING_TOL)?, couplings, bath)
}

/// `−i[H + H_LS, ρ] + D(ρ)` for a density matrix `ρ` in the computational
/// basis. `h` must be the Hamiltonian the generator was built from.
pub fn liouvillian_apply(gen: &DaviesGenerator, h: &HamiltonianMatrix, rho: &Op) -> Result<Op> {
    let d = gen.dim();
    if h.dim() != d || rho.nrows() != d || rho.ncols() != d {
        return Err(Error::Dimension { expected: d, got: rho.nrows() });
    }
    let herm = hermiticity_defect(rho);
    if herm > 1e-10 {
        return Err(Error::Precondition(format!("density matrix is not Hermitian (defect {herm:e})")));
    }
    let tr = rho.trace();
    if (tr - c(1.0)).norm() > 1e-9 {
        return Err(Error::Precondition(format!("density matrix trace {tr} is not 1")));
    }
    let hm = h.as_op();
    let mut out = (hm * rho - rho * hm) * (-I) + gen.dissipator(rho);
    if let Some(l) = gen.lamb_shift_hamiltonian() {
        out += (&l * rho - rho * &l) * (-I);
    }
    Ok(out)
}

/// Pauli transition rates `W_mn` (rate from level `n` to level `m`) in
/// rad/ns.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    pub w: DMatrix<f64>,
    pub energies: Vec<f64>,
    pub beta: f64,
    /// Distinct levels in one degeneracy group; their entries are zero.
    pub degenerate_pairs: Vec<(usize, usize)>,
}

impl RateMatrix {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Generator `Q = W − diag(Σ_m W_mn)` of `ṗ = Q p`.
    pub fn generator(&self) -> DMatrix<f64> {
        let mut q = self.w.clone();
        for n in 0..self.dim() {
            let out: f64 = self.w.column(n).sum();
            q[(n, n)] -= out;
        }
        q
    }

    /// Largest `|W_nm e^{−βE_m} − W_mn e^{−βE_n}|` relative to the larger
    /// of the two terms.
    pub fn detailed_balance_defect(&self) -> f64 {
        let e0 = self.energies.first().copied().unwrap_or(0.0);
        let bz: Vec<f64> = self.energies.iter().map(|e| (-self.beta * (e - e0)).exp()).collect();
        let mut worst = 0.0_f64;
        for m in 0..self.dim() {
            for n in 0..m {
                let x = self.w[(n, m)] * bz[m];
                let y = self.w[(m, n)] * bz[n];
                let scale = x.abs().max(y.abs());
                if scale > 0.0 {
                    worst = worst.max((x - y).abs() / scale);
                }
            }
        }
        worst
    }
}

/// `Σ_i |⟨m|A_i|n⟩|²` for couplings given in the eigenbasis.
fn coupling_weights(coupling_eig: &[Op]) -> DMatrix<f64> {
    let d = coupling_eig.first().map_or(0, Op::nrows);
    let mut s = DMatrix::zeros(d, d);
    for a in coupling_eig {
        s += a.map(|z| z.norm_sqr());
    }
    s
}

fn rates_from_weights(eig: &EigenSystem, weights: &DMatrix<f64>, bath: &dyn Bath) -> RateMatrix {
    let d = eig.dim();
    let e = eig.energies();
    let mut w = DMatrix::zeros(d, d);
    let mut degenerate_pairs = Vec::new();
    for n in 0..d {
        for m in 0..d {
            if m == n {
                continue;
            }
            if eig.degenerate(m, n) {
                degenerate_pairs.push((m, n));
                continue;
            }
            w[(m, n)] = bath.gamma(e[n] - e[m]) * weights[(m, n)];
        }
    }
    RateMatrix { w, energies: e.to_vec(), beta: bath.beta(), degenerate_pairs }
}

/// `W_mn = Σ_i γ(E_n − E_m) |⟨m|σ_i^z|n⟩|²` from a generator.
pub fn rate_matrix(gen: &DaviesGenerator, bath: &dyn Bath) -> RateMatrix {
    rates_from_weights(&gen.eig, &coupling_weights(&gen.coupling_eig), bath)
}

/// Same as [`rate_matrix`] without building the full generator.
pub fn pauli_rates(eig: &EigenSystem, couplings: &[Op], bath: &dyn Bath) -> RateMatrix {
    let v = eig.vectors();
    let in_eig: Vec<Op> = couplings.iter().map(|a| v.adjoint() * a * v).collect();
    rates_from_weights(eig, &coupling_weights(&in_eig), bath)
}

/// `W_0n` for `n = 1..=n_a` with the `σ^z` couplings of an `n`-qubit
/// register. Levels degenerate with the ground state contribute zero.
pub fn ground_rates(eig: &EigenSystem, n_qubits: usize, n_a: usize, bath: &dyn Bath) -> Vec<f64> {
    let v = eig.vectors();
    let d = eig.dim();
    let e = eig.energies();
    (1..=n_a.min(d - 1))
        .map(|n| {
            if eig.degenerate(0, n) {
                return 0.0;
            }
            let weight: f64 = (0..n_qubits)
                .map(|i| {
                    let z: C64 = (0..d)
                        .map(|x| v[(x, 0)].conj() * v[(x, n)] * crate::ops::spin(x, i, n_qubits))
                        .sum();
                    z.norm_sqr()
                })
                .sum();
            bath.gamma(e[n] - e[0]) * weight
        })
        .collect()
}

/// Rates `W_0n(s)` on a grid of schedule points.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCurves {
    pub grid: Vec<f64>,
    /// `rates[i][n − 1]` is `W_0n` at `grid[i]`.
    pub rates: Vec<Vec<f64>>,
}

impl RateCurves {
    /// CSV with header `s,W_01,W_02,...,threshold`.
    pub fn write_csv<W: Write>(&self, mut w: W, threshold: f64) -> Result<()> {
        let n = self.rates.first().map_or(0, Vec::len);
        let cols: Vec<String> = (1..=n).map(|k| format!("W_0{k}")).collect();
        writeln!(w, "s,{},threshold", cols.join(","))?;
        for (s, row) in self.grid.iter().zip(&self.rates) {
            let vals: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{s},{},{threshold}", vals.join(","))?;
        }
        Ok(())
    }
}

fn max_ground_rate(problem: &IsingProblem, physical: &PhysicalSchedule, bath: &dyn Bath, n_a: usize, s: f64) -> Result<f64> {
    let (a, b) = physical.eval(s)?;
    let eig = eigensystem(&hamiltonian_at(problem, a, b)?, DEFAULT_GROUPING_TOL)?;
    Ok(ground_rates(&eig, problem.n(), n_a, bath).into_iter().fold(0.0, f64::max))
}

pub fn rate_curves(
    problem: &IsingProblem,
    physical: &PhysicalSchedule,
    bath: &dyn Bath,
    n_a: usize,
    grid: &[f64],
) -> Result<RateCurves> {
    let rates = grid
        .par_iter()
        .map(|&s| {
            let (a, b) = physical.eval(s)?;
            let eig = eigensystem(&hamiltonian_at(problem, a, b)?, DEFAULT_GROUPING_TOL)?;
            Ok(ground_rates(&eig, problem.n(), n_a, bath))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RateCurves { grid: grid.to_vec(), rates })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Freezing {
    /// Freezing point `s_0`.
    At(f64),
    /// Rates stay above `1/t_f` up to `s = 1`.
    NeverFreezes,
}

/// Number of intervals of the scan grid used by [`freezing_point`].
pub const FREEZE_SCAN_INTERVALS: usize = 200;

/// Smallest `s` beyond which `max_{1≤n≤n_A} W_0n(s) < 1/t_f` holds on the
/// scan grid, bisection-refined to `1e-4`.
pub fn freezing_point(
    problem: &IsingProblem,
    physical: &PhysicalSchedule,
    bath: &dyn Bath,
    t_f: f64,
    n_a: usize,
) -> Result<Freezing> {
    if !(t_f > 0.0) {
        return Err(Error::Domain(format!("t_f = {t_f} must be positive")));
    }
    if n_a == 0 {
        return Err(Error::Domain("n_A must be at least 1".into()));
    }
    let threshold = 1.0 / t_f;
    let grid: Vec<f64> = (0..=FREEZE_SCAN_INTERVALS).map(|j| j as f64 / FREEZE_SCAN_INTERVALS as f64).collect();
    let above = grid
        .par_iter()
        .map(|&s| Ok(max_ground_rate(problem, physical, bath, n_a, s)? >= threshold))
        .collect::<Result<Vec<bool>>>()?;
    let Some(last) = above.iter().rposition(|&x| x) else {
        return Ok(Freezing::At(0.0));
    };
    if last == grid.len() - 1 {
        return Ok(Freezing::NeverFreezes);
    }
    let (mut lo, mut hi) = (grid[last], grid[last + 1]);
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if max_ground_rate(problem, physical, bath, n_a, mid)? >= threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Freezing::At(0.5 * (lo + hi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::{sigma_x, sigma_z, trace_norm};

    fn unit_bath() -> BathSpec {
        BathSpec::from_beta(1.0, 1.0).unwrap()
    }

    #[test]
    fn beta_at_13_5_mk() {
        assert!((beta_from_millikelvin(13.5) - 0.565_80).abs() < 1e-5);
    }

    #[test]
    fn gamma_limit_and_kms() {
        let b = BathSpec::from_beta(0.3, 2.0).unwrap();
        assert!((gamma_ohmic(&b, 0.0) - 2.0 * PI * 0.3 / 2.0).abs() < 1e-15);
        assert!((gamma_ohmic(&b, 1e-9) - gamma_ohmic(&b, 0.0)).abs() < 1e-8);
        let u = unit_bath();
        let lhs = gamma_ohmic(&u, -1.0);
        let rhs = (-1.0_f64).exp() * gamma_ohmic(&u, 1.0);
        assert!((lhs - rhs).abs() <= 1e-15 * rhs);
    }

    #[test]
    fn commuting_case_has_only_zero_frequency() {
        let h = HamiltonianMatrix::new(sigma_z()).unwrap();
        let gen = davies_generator(&h, &[sigma_z()], &unit_bath()).unwrap();
        let jumps = gen.jump_operators(0);
        assert_eq!(jumps.len(), 1);
        assert_eq!(jumps[0].0, 0.0);
        assert!(max_abs(&(&jumps[0].1 - sigma_z())) < 1e-15);
    }

    #[test]
    fn transverse_case_jump_operator() {
        let h = HamiltonianMatrix::new(-sigma_x()).unwrap();
        let gen = davies_generator(&h, &[sigma_z()], &unit_bath()).unwrap();
        let jumps = gen.jump_operators(0);
        let (_, down) = jumps.iter().find(|j| (j.0 - 2.0).abs() < 1e-12).unwrap();
        // |−⟩⟨+|-type: maps the excited |−⟩ onto the ground |+⟩ with unit weight
        assert!((trace_norm(&(down.adjoint() * down)) - 1.0).abs() < 1e-12);
        let plus = nalgebra::DVector::from_vec(vec![c(1.0), c(1.0)]) / c(2f64.sqrt());
        let minus = nalgebra::DVector::from_vec(vec![c(1.0), c(-1.0)]) / c(2f64.sqrt());
        let amp = (plus.adjoint() * down * &minus)[(0, 0)];
        assert!((amp.norm() - 1.0).abs() < 1e-12);
        let sum: Op = jumps.iter().map(|j| j.1.clone()).fold(Op::zeros(2, 2), |a, b| a + b);
        assert!(max_abs(&(sum - sigma_z())) < 1e-14);
    }

    #[test]
    fn two_level_relaxation_rate() {
        let h = HamiltonianMatrix::new(-sigma_x()).unwrap();
        let bath = unit_bath();
        let gen = davies_generator(&h, &[sigma_z()], &bath).unwrap();
        // eigenbasis population dynamics: ṗ_1 = −(γ(2) + γ(−2)) (p_1 − p_1^eq)
        let rho = Op::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.3), c(0.7)]));
        let out = gen.apply_eigen(&rho);
        let g2 = gamma_ohmic(&bath, 2.0) + gamma_ohmic(&bath, -2.0);
        let p1_eq = 1.0 / (1.0 + 2f64.exp());
        let expected = -g2 * (0.7 - p1_eq);
        assert!((out[(1, 1)].re - expected).abs() < 1e-12, "{} vs {expected}", out[(1, 1)].re);
    }

    #[test]
    fn superoperator_matches_apply() {
        let p = IsingProblem::new(vec![0.2, -0.5], [((0, 1), 0.7)], 1.0).unwrap();
        let h = hamiltonian_at(&p, 1.1, 0.9).unwrap();
        let bath = BathSpec::from_beta(0.05, 0.8).unwrap().with_lamb_shift(LambShift::On { cutoff: 5.0 }).unwrap();
        let gen = davies_generator(&h, &crate::ops::sigma_z_couplings(2), &bath).unwrap();
        let rho = Op::from_fn(4, 4, |i, j| C64::new((i + 2 * j) as f64 * 0.1, (i as f64 - j as f64) * 0.05));
        let rho = (&rho + rho.adjoint()) * c(0.5);
        let direct = gen.apply(&rho);
        let via = crate::ops::unvec(&(gen.superoperator() * crate::ops::vec_of(&rho)), 4);
        assert!(max_abs(&(direct - via)) < 1e-12);
    }

    #[test]
    fn lamb_shift_integral_against_midpoint_rule() {
        // independent check of the principal value on a fine symmetric grid
        let bath = BathSpec::from_beta(0.01, 0.5).unwrap();
        let wc = 4.0;
        let omega = 1.3;
        let f = |x: f64| gamma_ohmic(&bath, x) * (-x.abs() / wc).exp();
        let h = 1e-4;
        let mut sum = 0.0;
        let mut u = h / 2.0;
        while u < 200.0 {
            sum += (f(omega - u) - f(omega + u)) / u * h;
            u += h;
        }
        let s = lamb_shift_ohmic(&bath, wc, omega);
        assert!((s - sum).abs() < 1e-6 * sum.abs().max(1e-3), "{s} vs {sum}");
    }

    #[test]
    fn rate_matrix_commuting_is_zero() {
        let p = IsingProblem::new(vec![0.1, 0.35, -0.6], [((0, 1), 0.4)], 1.0).unwrap();
        let h = hamiltonian_at(&p, 0.0, 2.0).unwrap();
        let gen = davies_generator(&h, &crate::ops::sigma_z_couplings(3), &unit_bath()).unwrap();
        let w = rate_matrix(&gen, &unit_bath());
        assert!(w.w.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn ground_rates_match_full_matrix() {
        let p = IsingProblem::new(vec![0.1, 0.35, -0.6], [((0, 1), 0.4), ((1, 2), -0.8)], 1.0).unwrap();
        let bath = BathSpec::from_millikelvin(1e-3, 13.5).unwrap();
        let eig = eigensystem(&hamiltonian_at(&p, 3.0, 8.0).unwrap(), 1e-8).unwrap();
        let full = pauli_rates(&eig, &crate::ops::sigma_z_couplings(3), &bath);
        let some = ground_rates(&eig, 3, 4, &bath);
        for n in 1..=4 {
            assert!((full.w[(0, n)] - some[n - 1]).abs() <= 1e-12 * full.w[(0, n)].abs().max(1e-30));
        }
        assert!(full.detailed_balance_defect() < 1e-12);
    }

    #[test]
    fn never_freezes_under_constant_transverse_field() {
        let p = IsingProblem::new(vec![0.5], [], 1.0).unwrap();
        let table = PhysicalSchedule::from_fn(3, |_| (10.0, 10.0)).unwrap();
        let bath = BathSpec::from_beta(1.0, 1.0).unwrap();
        assert_eq!(freezing_point(&p, &table, &bath, 1e3, 1).unwrap(), Freezing::NeverFreezes);
    }

    #[test]
    fn liouvillian_precondition() {
        let h = HamiltonianMatrix::new(-sigma_x()).unwrap();
        let gen = davies_generator(&h, &[sigma_z()], &unit_bath()).unwrap();
        assert!(liouvillian_apply(&gen, &h, &Op::identity(2, 2)).is_err());
        assert!(liouvillian_apply(&gen, &h, &(sigma_x() * I + Op::identity(2, 2) * c(0.5))).is_err());
    }
}
