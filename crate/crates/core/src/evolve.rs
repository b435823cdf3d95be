//! Master-equation integration along an anneal, ramp stage and readout.
//!
//! The state obeys `dρ/dτ = t_f L(τ) ρ` with `L` the Davies generator of
//! the instantaneous Hamiltonian. Small registers use an L-stable singly
//! diagonally implicit Runge–Kutta scheme on the vectorized generator, which
//! stays accurate when `t_f ‖L‖` is huge. Larger registers use an adaptive Dormand–Prince
//! 5(4) scheme. The populations-only path evolves the Pauli master equation
//! in the instantaneous eigenbasis with levels followed by energy order.

use std::io::Write;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::lindblad::{pauli_rates, Bath, DaviesGenerator};
use crate::model::{hamiltonian_at, HamiltonianMatrix, IsingProblem};
use crate::ops::{c, hermitian_eigenvalues, hermitian_part, hermiticity_defect, sigma_z_couplings, unvec, vec_of, Op, C64};
use crate::schedule::AnnealProtocol;
use crate::spectral::{eigensystem, EigenSystem, DEFAULT_GROUPING_TOL};

/// Minimum eigenvalue below which integration aborts.
pub const POSITIVITY_ABORT: f64 = -1e-6;

/// Largest dimension integrated with the implicit scheme under
/// [`Integrator::Auto`].
pub const IMPLICIT_MAX_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    Computational,
    /// Instantaneous eigenbasis at the stored `τ`.
    Eigen,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    pub matrix: Op,
    pub basis: Basis,
}

impl DensityState {
    /// Checks trace, Hermiticity and positivity against the state
    /// invariants.
    pub fn new(matrix: Op, basis: Basis) -> Result<Self> {
        let tr = (matrix.trace() - c(1.0)).norm();
        if tr > 1e-9 {
            return Err(Error::Precondition(format!("trace defect {tr:e}")));
        }
        let herm = hermiticity_defect(&matrix);
        if herm > 1e-10 {
            return Err(Error::Precondition(format!("Hermiticity defect {herm:e}")));
        }
        let min = hermitian_eigenvalues(&matrix)[0];
        if min < -1e-8 {
            return Err(Error::Precondition(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { matrix, basis })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).collect()
    }

    /// Diagonal part only (computational-basis readout).
    pub fn dephased(&self) -> Self {
        let diag = DVector::from_iterator(self.dim(), self.diagonal().into_iter().map(c));
        Self { matrix: Op::from_diagonal(&diag), basis: self.basis }
    }
}

/// `e^{−βH}/Z` built from the spectrum with the ground energy shifted to 0.
pub fn gibbs_state(h: &HamiltonianMatrix, beta: f64) -> Result<DensityState> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("beta = {beta} must be positive")));
    }
    let eig = eigensystem(h, DEFAULT_GROUPING_TOL)?;
    Ok(DensityState { matrix: gibbs_from_eigen(&eig, beta), basis: Basis::Computational })
}

fn gibbs_weights(energies: &[f64], beta: f64) -> Vec<f64> {
    let e0 = energies[0];
    let w: Vec<f64> = energies.iter().map(|e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

fn gibbs_from_eigen(eig: &EigenSystem, beta: f64) -> Op {
    let p = gibbs_weights(eig.energies(), beta);
    from_populations(eig, &p)
}

fn from_populations(eig: &EigenSystem, p: &[f64]) -> Op {
    let v = eig.vectors();
    let d = eig.dim();
    let scaled = Op::from_fn(d, d, |i, j| v[(i, j)] * p[j]);
    scaled * v.adjoint()
}

/// A time-dependent Hamiltonian `H(τ)` with its system–bath couplings.
pub trait HamiltonianPath: Sync {
    fn dim(&self) -> usize;
    fn hamiltonian(&self, tau: f64) -> Result<HamiltonianMatrix>;
    fn couplings(&self) -> &[Op];
    /// Time unit `t_f` in ns: `dρ/dτ = t_f L(τ) ρ`.
    fn time_unit(&self) -> f64;
    /// Schedule coordinate reported alongside `τ`.
    fn s_at(&self, tau: f64) -> Result<f64>;
    /// End of the anneal proper; the ramp occupies `[ramp_start, tau_end]`.
    fn ramp_start(&self) -> f64;
    fn tau_end(&self) -> f64;
    /// Points where `H(τ)` may have a kink. Integration restarts at each.
    fn knots(&self) -> Vec<f64>;
}

/// Ising problem driven by an anneal protocol, with `σ^z` couplings.
pub struct AnnealPath<'a> {
    problem: &'a IsingProblem,
    protocol: &'a AnnealProtocol,
    couplings: Vec<Op>,
}

impl<'a> AnnealPath<'a> {
    pub fn new(problem: &'a IsingProblem, protocol: &'a AnnealProtocol) -> Result<Self> {
        if problem.n() > crate::model::MAX_DENSE_QUBITS {
            return Err(Error::TooLarge(problem.n()));
        }
        Ok(Self { problem, protocol, couplings: sigma_z_couplings(problem.n()) })
    }

    pub fn problem(&self) -> &IsingProblem {
        self.problem
    }

    pub fn protocol(&self) -> &AnnealProtocol {
        self.protocol
    }
}

impl HamiltonianPath for AnnealPath<'_> {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn hamiltonian(&self, tau: f64) -> Result<HamiltonianMatrix> {
        let s = self.protocol.s_at(tau)?;
        let (a, b) = self.protocol.physical.eval(s)?;
        hamiltonian_at(self.problem, a, b)
    }

    fn couplings(&self) -> &[Op] {
        &self.couplings
    }

    fn time_unit(&self) -> f64 {
        self.protocol.t_f()
    }

    fn s_at(&self, tau: f64) -> Result<f64> {
        self.protocol.s_at(tau)
    }

    fn ramp_start(&self) -> f64 {
        self.protocol.control.ramp_start()
    }

    fn tau_end(&self) -> f64 {
        self.protocol.control.tau_end()
    }

    fn knots(&self) -> Vec<f64> {
        self.protocol.control.knots()
    }
}

type HamiltonianFn = dyn Fn(f64) -> Op + Send + Sync;

/// Arbitrary `H(τ)` on `τ ∈ [0, 1]` given as a closure, without ramp.
pub struct FnPath {
    dim: usize,
    h: Box<HamiltonianFn>,
    couplings: Vec<Op>,
    t_f: f64,
    knots: Vec<f64>,
}

impl FnPath {
    pub fn new(dim: usize, h: impl Fn(f64) -> Op + Send + Sync + 'static, couplings: Vec<Op>, t_f: f64) -> Result<Self> {
        if !(t_f > 0.0) {
            return Err(Error::Domain(format!("t_f = {t_f} must be positive")));
        }
        Ok(Self { dim, h: Box::new(h), couplings, t_f, knots: vec![0.0, 1.0] })
    }

    /// Adds interior kink positions.
    pub fn with_knots(mut self, interior: &[f64]) -> Self {
        self.knots = std::iter::once(0.0)
            .chain(interior.iter().copied().filter(|&k| k > 0.0 && k < 1.0))
            .chain(std::iter::once(1.0))
            .collect();
        self
    }
}

impl HamiltonianPath for FnPath {
    fn dim(&self) -> usize {
        self.dim
    }

    fn hamiltonian(&self, tau: f64) -> Result<HamiltonianMatrix> {
        if !(-1e-12..=1.0 + 1e-12).contains(&tau) {
            return Err(Error::Domain(format!("tau = {tau} outside [0, 1]")));
        }
        HamiltonianMatrix::new((self.h)(tau.clamp(0.0, 1.0)))
    }

    fn couplings(&self) -> &[Op] {
        &self.couplings
    }

    fn time_unit(&self) -> f64 {
        self.t_f
    }

    fn s_at(&self, tau: f64) -> Result<f64> {
        Ok(tau)
    }

    fn ramp_start(&self) -> f64 {
        1.0
    }

    fn tau_end(&self) -> f64 {
        1.0
    }

    fn knots(&self) -> Vec<f64> {
        self.knots.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    FullAme,
    PauliPopulations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    /// SDIRK for dimensions up to [`IMPLICIT_MAX_DIM`], Dormand–Prince above.
    #[default]
    Auto,
    Sdirk,
    DormandPrince,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub method: Method,
    pub integrator: Integrator,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Largest step in `τ`.
    pub max_step: f64,
    pub max_steps: usize,
    pub track_levels: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            method: Method::FullAme,
            integrator: Integrator::Auto,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: 0.05,
            max_steps: 2_000_000,
            track_levels: 4,
        }
    }
}

impl EvolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::Domain("tolerances must be positive".into()));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::Domain("max_step must be positive".into()));
        }
        Ok(())
    }

    /// Same options with both tolerances scaled by `factor`.
    pub fn scaled_tolerances(mut self, factor: f64) -> Self {
        self.rel_tol *= factor;
        self.abs_tol *= factor;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub tau: f64,
    pub s: f64,
    /// Populations of the lowest tracked instantaneous levels.
    pub populations: Vec<f64>,
    /// Population of the instantaneous ground level.
    pub p_gs: f64,
    pub trace_defect: f64,
    pub hermiticity_defect: f64,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub final_state: DensityState,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn max_trace_defect(&self) -> f64 {
        self.points.iter().map(|p| p.trace_defect).fold(0.0, f64::max)
    }

    pub fn max_hermiticity_defect(&self) -> f64 {
        self.points.iter().map(|p| p.hermiticity_defect).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.points.iter().map(|p| p.min_eigenvalue).fold(f64::INFINITY, f64::min)
    }

    /// CSV with header `tau,s,P_GS,pop0,pop1,...,trace_defect`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let levels = self.points.first().map_or(0, |p| p.populations.len());
        let cols: Vec<String> = (0..levels).map(|k| format!("pop{k}")).collect();
        writeln!(w, "tau,s,P_GS,{},trace_defect", cols.join(","))?;
        for p in &self.points {
            let pops: Vec<String> = p.populations.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{},{},{},{},{}", p.tau, p.s, p.p_gs, pops.join(","), p.trace_defect)?;
        }
        Ok(())
    }
}

fn segment_bounds(path: &dyn HamiltonianPath, t0: f64, t1: f64) -> Vec<f64> {
    let mut b = vec![t0];
    b.extend(path.knots().into_iter().filter(|&k| k > t0 + 1e-14 && k < t1 - 1e-14));
    b.push(t1);
    b
}

#[derive(Default)]
struct Stats {
    accepted: usize,
    rejected: usize,
}

fn error_norm(x: &DVector<C64>, x_new: &DVector<C64>, diff: &DVector<C64>, opts: &EvolveOptions) -> f64 {
    (0..x.len())
        .map(|i| diff[i].norm() / (opts.abs_tol + opts.rel_tol * x[i].norm().max(x_new[i].norm())))
        .fold(0.0, f64::max)
}

fn check_step(h: f64, tau: f64, stats: &Stats, opts: &EvolveOptions) -> Result<()> {
    if h < 1e-14 * tau.abs().max(1.0) {
        return Err(Error::StepUnderflow { tau });
    }
    if stats.accepted + stats.rejected >= opts.max_steps {
        return Err(Error::TooManySteps { steps: stats.accepted + stats.rejected, tau });
    }
    Ok(())
}

const SD_GAMMA: f64 = 0.25;
const SD_C: [f64; 5] = [0.25, 0.75, 11.0 / 20.0, 0.5, 1.0];
const SD_A: [[f64; 4]; 5] = [
    [0.0; 4],
    [0.5, 0.0, 0.0, 0.0],
    [17.0 / 50.0, -1.0 / 25.0, 0.0, 0.0],
    [371.0 / 1360.0, -137.0 / 2720.0, 15.0 / 544.0, 0.0],
    [25.0 / 24.0, -49.0 / 48.0, 125.0 / 16.0, -85.0 / 12.0],
];
/// Difference between the fourth-order weights (the last row, stiffly
/// accurate) and the embedded third-order weights.
const SD_E: [f64; 5] = [25.0 / 24.0 - 59.0 / 48.0, -49.0 / 48.0 + 17.0 / 96.0, 125.0 / 16.0 - 225.0 / 32.0, 0.0, 0.25];

/// L-stable, stiffly accurate SDIRK of order 4 (embedded order 3) for the
/// linear system `ẋ = M(τ) x`. The error estimate is filtered through
/// `(I − hγM)^{-1}` so stiff components do not force tiny steps.
fn sdirk<F, A>(generator: F, x: &mut DVector<C64>, t0: f64, t1: f64, opts: &EvolveOptions, stats: &mut Stats, mut accept: A) -> Result<()>
where
    F: Fn(f64) -> Result<Op>,
    A: FnMut(f64, &DVector<C64>) -> Result<()>,
{
    let n = x.len();
    let id = Op::identity(n, n);
    let mut t = t0;
    let mut h = (t1 - t0).min(opts.max_step).min(1e-3);
    while t < t1 {
        let last = t + h >= t1 - 1e-14 * t1.abs().max(1.0);
        if last {
            h = t1 - t;
        }
        let mut ks: Vec<DVector<C64>> = Vec::with_capacity(5);
        let mut final_lu = None;
        for i in 0..5 {
            let m = generator(t + SD_C[i] * h)?;
            let mut y = x.clone();
            for (j, kj) in ks.iter().enumerate() {
                y.axpy(c(h * SD_A[i][j]), kj, c(1.0));
            }
            let lu = (&id - &m * c(h * SD_GAMMA)).lu();
            let k = lu
                .solve(&(&m * &y))
                .ok_or_else(|| Error::Precondition(format!("singular stage matrix at tau = {t}")))?;
            ks.push(k);
            if i == 4 {
                final_lu = Some(lu);
            }
        }
        let mut x_new = x.clone();
        for (j, kj) in ks.iter().enumerate() {
            let w = if j < 4 { SD_A[4][j] } else { SD_GAMMA };
            x_new.axpy(c(h * w), kj, c(1.0));
        }
        let raw = ks.iter().zip(SD_E.iter()).fold(DVector::zeros(n), |acc: DVector<C64>, (k, &e)| acc + k * c(h * e));
        let filtered = final_lu.and_then(|lu| lu.solve(&raw)).unwrap_or(raw);
        let err = error_norm(x, &x_new, &filtered, opts);
        if err <= 1.0 && x_new.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            *x = x_new;
            t = if last { t1 } else { t + h };
            stats.accepted += 1;
            accept(t, x)?;
        } else {
            stats.rejected += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.25)).clamp(0.2, 5.0) };
        h = (h * if err.is_finite() { factor } else { 0.2 }).min(opts.max_step);
        check_step(h, t, stats, opts)?;
    }
    Ok(())
}

const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Dormand–Prince 5(4) integration of `ẋ = f(τ, x)` with FSAL.
fn dormand_prince<F, A>(f: F, x: &mut DVector<C64>, t0: f64, t1: f64, opts: &EvolveOptions, stats: &mut Stats, mut accept: A) -> Result<()>
where
    F: Fn(f64, &DVector<C64>) -> Result<DVector<C64>>,
    A: FnMut(f64, &DVector<C64>) -> Result<()>,
{
    let mut t = t0;
    let mut k1 = f(t, x)?;
    let scale = x.norm().max(1e-300);
    let mut h = (0.01 * scale / k1.norm().max(1e-300)).min(opts.max_step).min(t1 - t0);
    while t < t1 {
        let last = t + h >= t1 - 1e-14 * t1.abs().max(1.0);
        if last {
            h = t1 - t;
        }
        let mut k: Vec<DVector<C64>> = Vec::with_capacity(7);
        k.push(k1.clone());
        for stage in 1..7 {
            let mut y = x.clone();
            for (j, kj) in k.iter().enumerate() {
                let a = DP_A[stage][j];
                if a != 0.0 {
                    y.axpy(c(h * a), kj, c(1.0));
                }
            }
            if stage == 6 {
                let err_vec = k.iter().zip(DP_E.iter()).fold(DVector::zeros(x.len()), |acc: DVector<C64>, (kj, &e)| acc + kj * c(h * e));
                let k7 = f(t + h, &y)?;
                let err_vec = err_vec + &k7 * c(h * DP_E[6]);
                let err = error_norm(x, &y, &err_vec, opts);
                if err <= 1.0 && y.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                    *x = y;
                    t = if last { t1 } else { t + h };
                    k1 = k7;
                    stats.accepted += 1;
                    accept(t, x)?;
                } else {
                    stats.rejected += 1;
                }
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h = (h * if err.is_finite() { factor } else { 0.2 }).min(opts.max_step);
                break;
            }
            k.push(f(t + DP_C[stage] * h, &y)?);
        }
        check_step(h, t, stats, opts)?;
    }
    Ok(())
}

struct Recorder<'a> {
    path: &'a dyn HamiltonianPath,
    levels: usize,
    points: Vec<TrajectoryPoint>,
}

impl Recorder<'_> {
    fn record(&mut self, tau: f64, rho: &Op) -> Result<()> {
        let d = rho.nrows();
        let trace_defect = (rho.trace() - c(1.0)).norm();
        let herm = hermiticity_defect(rho);
        let min_eigenvalue = hermitian_eigenvalues(rho)[0];
        if min_eigenvalue < POSITIVITY_ABORT {
            return Err(Error::Positivity { tau, min_eigenvalue });
        }
        let eig = eigensystem(&self.path.hamiltonian(tau)?, DEFAULT_GROUPING_TOL)?;
        let v = eig.vectors();
        let pop = |n: usize| -> f64 {
            let col = v.column(n);
            (col.adjoint() * rho * col)[(0, 0)].re
        };
        let populations: Vec<f64> = (0..self.levels.min(d)).map(pop).collect();
        let p_gs = eig.degeneracy_groups()[0].clone().map(pop).sum();
        self.points.push(TrajectoryPoint {
            tau,
            s: self.path.s_at(tau)?,
            populations,
            p_gs,
            trace_defect,
            hermiticity_defect: herm,
            min_eigenvalue,
        });
        Ok(())
    }
}

fn use_implicit(d: usize, opts: &EvolveOptions) -> bool {
    match opts.integrator {
        Integrator::Auto => d <= IMPLICIT_MAX_DIM,
        Integrator::Sdirk => true,
        Integrator::DormandPrince => false,
    }
}

/// Integrates the full master equation from `state` over `[t0, t1]`.
fn integrate_full(
    path: &dyn HamiltonianPath,
    bath: &dyn Bath,
    opts: &EvolveOptions,
    state: &DensityState,
    t0: f64,
    t1: f64,
) -> Result<Trajectory> {
    let d = path.dim();
    let t_f = path.time_unit();
    let generator = |tau: f64| -> Result<DaviesGenerator> {
        DaviesGenerator::new(eigensystem(&path.hamiltonian(tau)?, DEFAULT_GROUPING_TOL)?, path.couplings(), bath)
    };
    let mut rec = Recorder { path, levels: opts.track_levels, points: Vec::new() };
    rec.record(t0, &state.matrix)?;
    let mut x = vec_of(&state.matrix);
    let mut stats = Stats::default();
    let bounds = segment_bounds(path, t0, t1);
    for w in bounds.windows(2) {
        let accept = |tau: f64, x: &DVector<C64>| rec.record(tau, &unvec(x, d));
        if use_implicit(d, opts) {
            let m = |tau: f64| Ok(generator(tau)?.superoperator() * c(t_f));
            sdirk(m, &mut x, w[0], w[1], opts, &mut stats, accept)?;
        } else {
            let f = |tau: f64, x: &DVector<C64>| Ok(vec_of(&generator(tau)?.apply(&unvec(x, d))) * c(t_f));
            dormand_prince(f, &mut x, w[0], w[1], opts, &mut stats, accept)?;
        }
        // Round-off accumulates an anti-Hermitian part; drop it between segments.
        x = vec_of(&hermitian_part(&unvec(&x, d)));
    }
    Ok(Trajectory {
        points: rec.points,
        final_state: DensityState { matrix: unvec(&x, d), basis: Basis::Computational },
        accepted_steps: stats.accepted,
        rejected_steps: stats.rejected,
    })
}

/// Populations-only integration of the Pauli master equation.
fn integrate_pauli(
    path: &dyn HamiltonianPath,
    bath: &dyn Bath,
    opts: &EvolveOptions,
    state: &DensityState,
    t0: f64,
    t1: f64,
) -> Result<Trajectory> {
    let d = path.dim();
    let t_f = path.time_unit();
    let eig0 = eigensystem(&path.hamiltonian(t0)?, DEFAULT_GROUPING_TOL)?;
    let v0 = eig0.vectors();
    let rho0 = v0.adjoint() * &state.matrix * v0;
    let mut x = DVector::from_iterator(d, (0..d).map(|n| c(rho0[(n, n)].re)));
    let mut stats = Stats::default();
    let mut points = Vec::new();
    let record = |tau: f64, x: &DVector<C64>, points: &mut Vec<TrajectoryPoint>| -> Result<()> {
        let p: Vec<f64> = x.iter().map(|z| z.re).collect();
        let min = p.iter().copied().fold(f64::INFINITY, f64::min);
        if min < POSITIVITY_ABORT {
            return Err(Error::Positivity { tau, min_eigenvalue: min });
        }
        points.push(TrajectoryPoint {
            tau,
            s: path.s_at(tau)?,
            populations: p.iter().take(opts.track_levels).copied().collect(),
            p_gs: p[0],
            trace_defect: (p.iter().sum::<f64>() - 1.0).abs(),
            hermiticity_defect: 0.0,
            min_eigenvalue: min,
        });
        Ok(())
    };
    record(t0, &x, &mut points)?;
    let q = |tau: f64| -> Result<Op> {
        let eig = eigensystem(&path.hamiltonian(tau)?, DEFAULT_GROUPING_TOL)?;
        Ok(pauli_rates(&eig, path.couplings(), bath).generator().map(|r| c(r * t_f)))
    };
    for w in segment_bounds(path, t0, t1).windows(2) {
        sdirk(q, &mut x, w[0], w[1], opts, &mut stats, |tau, x| record(tau, x, &mut points))?;
    }
    let eig1 = eigensystem(&path.hamiltonian(t1)?, DEFAULT_GROUPING_TOL)?;
    let p: Vec<f64> = x.iter().map(|z| z.re).collect();
    Ok(Trajectory {
        points,
        final_state: DensityState { matrix: from_populations(&eig1, &p), basis: Basis::Computational },
        accepted_steps: stats.accepted,
        rejected_steps: stats.rejected,
    })
}

/// Integrates from `state` at `t0` to `t1` with the selected method.
pub fn integrate(
    path: &dyn HamiltonianPath,
    bath: &dyn Bath,
    opts: &EvolveOptions,
    state: &DensityState,
    t0: f64,
    t1: f64,
) -> Result<Trajectory> {
    opts.validate()?;
    if state.dim() != path.dim() {
        return Err(Error::Dimension { expected: path.dim(), got: state.dim() });
    }
    if !(t1 > t0) {
        return Err(Error::Domain(format!("empty integration interval [{t0}, {t1}]")));
    }
    match opts.method {
        Method::FullAme => integrate_full(path, bath, opts, state, t0, t1),
        Method::PauliPopulations => integrate_pauli(path, bath, opts, state, t0, t1),
    }
}

/// Evolves from the Gibbs state at `τ = 0` to the start of the ramp.
pub fn evolve_path(path: &dyn HamiltonianPath, bath: &dyn Bath, opts: &EvolveOptions) -> Result<Trajectory> {
    let rho0 = gibbs_state(&path.hamiltonian(0.0)?, bath.beta())?;
    integrate(path, bath, opts, &rho0, 0.0, path.ramp_start())
}

/// [`evolve_path`] for an Ising problem under an anneal protocol.
pub fn evolve_ame(problem: &IsingProblem, protocol: &AnnealProtocol, bath: &dyn Bath, opts: &EvolveOptions) -> Result<Trajectory> {
    evolve_path(&AnnealPath::new(problem, protocol)?, bath, opts)
}

/// Evolves `state` through the ramp segment and dephases it in the
/// computational basis. Without a ramp only the dephasing is applied.
pub fn ramp_path(path: &dyn HamiltonianPath, bath: &dyn Bath, opts: &EvolveOptions, state: &DensityState) -> Result<DensityState> {
    let (t0, t1) = (path.ramp_start(), path.tau_end());
    if t1 - t0 <= 0.0 {
        return Ok(state.dephased());
    }
    Ok(integrate(path, bath, opts, state, t0, t1)?.final_state.dephased())
}

pub fn ramp_stage(
    state: &DensityState,
    problem: &IsingProblem,
    protocol: &AnnealProtocol,
    bath: &dyn Bath,
    opts: &EvolveOptions,
) -> Result<DensityState> {
    ramp_path(&AnnealPath::new(problem, protocol)?, bath, opts, state)
}

/// Ground-state probability of a computational-basis state with respect
/// to `H_Z`, plus the populations of the distinct `H_Z` levels in
/// ascending energy.
#[derive(Debug, Clone, PartialEq)]
pub struct Readout {
    pub p_gs: f64,
    pub level_populations: Vec<f64>,
}

pub fn ground_state_prob(state: &DensityState, problem: &IsingProblem) -> Result<Readout> {
    if state.basis != Basis::Computational {
        return Err(Error::Precondition("readout needs a computational-basis state".into()));
    }
    if state.dim() != problem.dim() {
        return Err(Error::Dimension { expected: problem.dim(), got: state.dim() });
    }
    let diag = problem.diagonal();
    let scale = diag.iter().fold(1.0_f64, |m, e| m.max(e.abs()));
    let tol = 1e-9 * scale;
    let mut order: Vec<usize> = (0..diag.len()).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]));
    let mut level_populations = Vec::new();
    let mut start = f64::NEG_INFINITY;
    for &x in &order {
        let p = state.matrix[(x, x)].re;
        if diag[x] - start > tol {
            start = diag[x];
            level_populations.push(p);
        } else {
            *level_populations.last_mut().unwrap() += p;
        }
    }
    Ok(Readout { p_gs: level_populations[0], level_populations })
}

/// `D_GS = |P_GS − P*_GS|`.
pub fn adiabatic_error(p_gs: f64, p_gs_ref: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_gs) || !(0.0..=1.0).contains(&p_gs_ref) {
        return Err(Error::Domain(format!("probabilities must lie in [0, 1] ({p_gs}, {p_gs_ref})")));
    }
    Ok((p_gs - p_gs_ref).abs())
}

/// Result of one full anneal: evolution, ramp, readout.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealOutcome {
    pub p_gs: f64,
    /// Ground-state probability of the ramped Gibbs state at the end of
    /// the anneal proper.
    pub p_gs_ref: f64,
    pub trajectory: Trajectory,
}

/// Runs the anneal, the ramp and the readout, and the same ramp applied to
/// the Gibbs state at the ramp start for the reference probability.
pub fn run_anneal(problem: &IsingProblem, protocol: &AnnealProtocol, bath: &dyn Bath, opts: &EvolveOptions) -> Result<AnnealOutcome> {
    let path = AnnealPath::new(problem, protocol)?;
    let trajectory = evolve_path(&path, bath, opts)?;
    let ramped = ramp_path(&path, bath, opts, &trajectory.final_state)?;
    let p_gs = ground_state_prob(&ramped, problem)?.p_gs;
    let sigma = gibbs_state(&path.hamiltonian(path.ramp_start())?, bath.beta())?;
    let reference = ramp_path(&path, bath, opts, &sigma)?;
    let p_gs_ref = ground_state_prob(&reference, problem)?.p_gs;
    Ok(AnnealOutcome { p_gs: p_gs.clamp(0.0, 1.0), p_gs_ref: p_gs_ref.clamp(0.0, 1.0), trajectory })
}

/// Integrated-control-error averaging: `samples` noisy copies of `problem`
/// drawn with seeds `seed, seed + 1, ...`. Returns the mean `(P_GS, P*_GS)`.
pub fn run_anneal_ice(
    problem: &IsingProblem,
    protocol: &AnnealProtocol,
    bath: &dyn Bath,
    opts: &EvolveOptions,
    ice: IceNoise,
    seed: u64,
) -> Result<(f64, f64)> {
    if ice.samples == 0 {
        return Err(Error::Domain("ICE sample count must be positive".into()));
    }
    if ice.sigma_h == 0.0 && ice.sigma_j == 0.0 {
        let out = run_anneal(problem, protocol, bath, opts)?;
        return Ok((out.p_gs, out.p_gs_ref));
    }
    let mut acc = (0.0, 0.0);
    for k in 0..ice.samples {
        let noisy = crate::model::sample_ice(problem, ice.sigma_h, ice.sigma_j, seed.wrapping_add(k as u64))?;
        let out = run_anneal(&noisy, protocol, bath, opts)?;
        acc.0 += out.p_gs;
        acc.1 += out.p_gs_ref;
    }
    Ok((acc.0 / ice.samples as f64, acc.1 / ice.samples as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IceNoise {
    pub sigma_h: f64,
    pub sigma_j: f64,
    pub samples: usize,
}

impl Default for IceNoise {
    fn default() -> Self {
        Self { sigma_h: 0.0, sigma_j: 0.0, samples: 1 }
    }
}
