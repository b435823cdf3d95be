//! Self-check suites: adiabatic-error exponents of single-qubit reference
//! problems, perturbative freezing rates, and structural properties of the
//! Davies generator.
//!
//! Suites never fail with an error. Numerical failures become failed checks.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::{ols, theoretical_eta, Regime};
use crate::error::{Error, Result};
use crate::evolve::{evolve_ame, evolve_path, gibbs_state, ground_state_prob, EvolveOptions, FnPath};
use crate::lindblad::{davies_generator, ground_rates, liouvillian_apply, rate_matrix, Bath, BathSpec, Freezing, LambShift};
use crate::model::{apply_crosstalk, hamiltonian_at, hamming_distance, HamiltonianMatrix, IsingProblem};
use crate::ops::{c, max_abs, sigma_x, sigma_y, sigma_z, sigma_z_couplings, trace_norm, Op, C64};
use crate::schedule::{beta_control, AnnealProtocol, ControlSchedule, PhysicalSchedule};
use crate::spectral::{eigensystem, gap_profile, min_gap, EigenSystem, DEFAULT_GROUPING_TOL};

/// Bath coupling `η₀g²` used by the hardware-scale checks.
pub const HARDWARE_COUPLING: f64 = 5.0e-4;
/// Operating temperature of the hardware-scale checks, mK.
pub const HARDWARE_TEMPERATURE_MK: f64 = 13.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    AppB,
    AppC,
    AppD,
    Props,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::AppB, Suite::AppC, Suite::AppD, Suite::Props];

    pub fn name(self) -> &'static str {
        match self {
            Suite::AppB => "appB",
            Suite::AppC => "appC",
            Suite::AppD => "appD",
            Suite::Props => "props",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Domain(format!("unknown suite `{s}` (expected appB, appC, appD or props)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }

    fn from_result(name: impl Into<String>, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Self::new(name, passed, detail),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "suite {}: {}", self.suite.name(), if self.passed() { "PASS" } else { "FAIL" })?;
        for c in &self.checks {
            writeln!(f, "  {c}")?;
        }
        Ok(())
    }
}

pub fn run_suite(suite: Suite) -> SuiteReport {
    let checks = match suite {
        Suite::AppB => app_b(),
        Suite::AppC => app_c(),
        Suite::AppD => app_d(),
        Suite::Props => props(),
    };
    SuiteReport { suite, checks }
}

fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let n = ((hi - lo) * per_decade as f64).round() as usize;
    (0..=n).map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / n as f64)).collect()
}

/// `H(τ) = −½(1 − β_k(τ)) σ^x − ½ β_k(τ) σ^z`: the gap of the Liouvillian
/// closes at `τ = 1` because the end Hamiltonian commutes with the `σ^z`
/// coupling.
pub fn gapless_end_hamiltonian(k: u32, tau: f64) -> Op {
    let b = beta_control(k, tau.clamp(0.0, 1.0)).unwrap_or(1.0);
    sigma_x() * c(-0.5 * (1.0 - b)) + sigma_z() * c(-0.5 * b)
}

/// `σ^y + (τ−1)^{k+1} X + (τ−1)^{k+2} Y`, with `X` and `Y` chosen so that
/// `H(0) = σ^x`, `H(½) = σ^z` and `H(1) = σ^y`.
pub fn gap_in_middle_hamiltonian(k: u32, tau: f64) -> Op {
    let k = k as i32;
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    let (p1, p2) = (2f64.powi(k + 2), 2f64.powi(k + 1));
    let x = (sigma_x() - sigma_z() * c(p1) + sigma_y() * c(p1 - 1.0)) * c(sign);
    let y = (sigma_x() - sigma_z() * c(p2) + sigma_y() * c(p2 - 1.0)) * c(2.0 * sign);
    sigma_y() + x * c((tau - 1.0).powi(k + 1)) + y * c((tau - 1.0).powi(k + 2))
}

/// `s(τ) = (2(2β_k((1+τ)/2) − 1) − 1)²`, with `k` vanishing derivatives at
/// `τ = 1` where `s = 1`. At `τ = 0` it equals `(1 − 2^{1−k})²`, and it
/// vanishes quadratically at `τ = 1 − 2·4^{−1/(k+1)}`.
pub fn interpolation_schedule(k: u32, tau: f64) -> f64 {
    let b = beta_control(k, (0.5 * (1.0 + tau)).clamp(0.0, 1.0)).unwrap_or(1.0);
    (2.0 * (2.0 * b - 1.0) - 1.0).powi(2)
}

/// `s(τ) σ^x + (1 − s(τ)) σ^z` with [`interpolation_schedule`].
pub fn interpolation_hamiltonian(k: u32, tau: f64) -> Op {
    let s = interpolation_schedule(k, tau);
    sigma_x() * c(s) + sigma_z() * c(1.0 - s)
}

/// `‖ρ(1) − σ(1)‖₁` after evolving the Gibbs state of `H(0)` with a `σ^z`
/// coupled Ohmic bath, `σ(1)` being the Gibbs state of `H(1)`.
pub fn single_qubit_distance(
    h: impl Fn(f64) -> Op + Send + Sync + Clone + 'static,
    t_f: f64,
    bath: &BathSpec,
    opts: &EvolveOptions,
) -> Result<f64> {
    let path = FnPath::new(2, h.clone(), vec![sigma_z()], t_f)?;
    let tr = evolve_path(&path, bath, opts)?;
    let sigma = gibbs_state(&HamiltonianMatrix::new(h(1.0))?, bath.beta())?;
    Ok(trace_norm(&(&tr.final_state.matrix - &sigma.matrix)))
}

fn single_qubit_bath() -> BathSpec {
    BathSpec::from_beta(1.0, 1.0).expect("unit bath is valid")
}

fn exponent_check(name: String, t_f: &[f64], distances: Result<Vec<f64>>, expected: f64, tol: f64) -> Check {
    Check::from_result(
        name,
        distances.map(|d| {
            let xs: Vec<f64> = t_f.iter().map(|t| t.log10()).collect();
            let ys: Vec<f64> = d.iter().map(|x| x.log10()).collect();
            let eta = -ols(&xs, &ys).0;
            let passed = (eta - expected).abs() <= tol;
            (
                passed,
                format!(
                    "eta = {eta:.4}, expected {expected:.4} ± {tol}, t_f in [{:.0e}, {:.0e}]",
                    t_f[0],
                    t_f[t_f.len() - 1]
                ),
            )
        }),
    )
}

/// Gapless-end exponents `(k+1)/(2k+3)` for `k = 0..=3`.
pub fn app_b() -> Vec<Check> {
    let bath = single_qubit_bath();
    let opts = EvolveOptions { rel_tol: 1e-10, abs_tol: 1e-12, ..Default::default() };
    let t_f = log_grid(4.0, 6.0, 2);
    (0..4u32)
        .into_par_iter()
        .map(|k| {
            let d: Result<Vec<f64>> = t_f
                .par_iter()
                .map(|&t| single_qubit_distance(move |tau| gapless_end_hamiltonian(k, tau), t, &bath, &opts))
                .collect();
            let expected = theoretical_eta(k, 2.0, Regime::GaplessAtEnd).expect("alpha is positive");
            exponent_check(format!("gapless end, k = {k}"), &t_f, d, expected, 0.03)
        })
        .collect()
}

/// Gap closing mid-anneal with boundary cancellation at the end: exponent
/// `k+1` for both reference families.
pub fn app_c() -> Vec<Check> {
    let bath = single_qubit_bath();
    let opts = EvolveOptions { rel_tol: 1e-12, abs_tol: 1e-14, ..Default::default() };
    let t_f = log_grid(1.0, 3.0, 2);
    let cases: Vec<(u32, bool)> = (0..3u32).flat_map(|k| [(k, false), (k, true)]).collect();
    cases
        .into_par_iter()
        .map(|(k, interp)| {
            let d: Result<Vec<f64>> = t_f
                .par_iter()
                .map(|&t| {
                    if interp {
                        single_qubit_distance(move |tau| interpolation_hamiltonian(k, tau), t, &bath, &opts)
                    } else {
                        single_qubit_distance(move |tau| gap_in_middle_hamiltonian(k, tau), t, &bath, &opts)
                    }
                })
                .collect();
            let expected = theoretical_eta(k, 2.0, Regime::GaplessInMiddle).expect("alpha is positive");
            let tol = if k < 2 { 0.1 } else { 0.2 };
            let family = if interp { "x-z interpolation" } else { "x-z-y path" };
            exponent_check(format!("gap in middle ({family}), k = {k}"), &t_f, d, expected, tol)
        })
        .collect()
}

/// Four-spin ferromagnetic chain with small distinct fields, the reference
/// for the perturbative rate check.
pub fn perturbative_chain() -> IsingProblem {
    IsingProblem::chain(vec![-0.05, -0.11, -0.13, -0.17], -1.0).expect("valid chain")
}

/// Smallest Hamming distance between the computational states supporting
/// levels `a` and `b` (or their degeneracy groups) of a diagonal
/// Hamiltonian.
pub fn level_hamming_distance(eig: &EigenSystem, a: usize, b: usize) -> u32 {
    let support = |level: usize| -> Vec<usize> {
        let group = eig.degeneracy_groups()[eig.group_of(level)].clone();
        let v = eig.vectors();
        (0..eig.dim()).filter(|&x| group.clone().any(|l| v[(x, l)].norm_sqr() > 1e-12)).collect()
    };
    let (sa, sb) = (support(a), support(b));
    sa.iter().flat_map(|&x| sb.iter().map(move |&y| hamming_distance(x, y))).min().unwrap_or(0)
}

/// `W_0n ∝ A^{2 HD(0,n)}` for the three lowest excited levels of
/// [`perturbative_chain`] with `A = 30(1−s)`, `B = 10`.
pub fn app_d() -> Vec<Check> {
    const B: f64 = 10.0;
    let problem = perturbative_chain();
    let n = problem.n();
    let run = || -> Result<Vec<Check>> {
        let bath = BathSpec::from_millikelvin(HARDWARE_COUPLING, HARDWARE_TEMPERATURE_MK)?;
        let classical = eigensystem(&hamiltonian_at(&problem, 0.0, B)?, DEFAULT_GROUPING_TOL)?;
        let s_grid: Vec<f64> = log_grid(-2.5, -1.0, 2).iter().map(|a| 1.0 - a / 30.0).collect();
        let rates: Vec<(f64, Vec<f64>)> = s_grid
            .iter()
            .map(|&s| {
                let a = 30.0 * (1.0 - s);
                let eig = eigensystem(&hamiltonian_at(&problem, a, B)?, DEFAULT_GROUPING_TOL)?;
                Ok((a, ground_rates(&eig, n, 3, &bath)))
            })
            .collect::<Result<_>>()?;
        let xs: Vec<f64> = rates.iter().map(|(a, _)| a.log10()).collect();
        Ok((1..=3)
            .map(|level| {
                let hd = level_hamming_distance(&classical, 0, level);
                let ys: Vec<f64> = rates.iter().map(|(_, w)| w[level - 1].log10()).collect();
                let slope = ols(&xs, &ys).0;
                let ratio = slope / (2.0 * f64::from(hd));
                Check::new(
                    format!("W_0{level} slope vs A"),
                    ys.iter().all(|y| y.is_finite()) && (0.95..=1.05).contains(&ratio),
                    format!("slope = {slope:.4}, HD = {hd}, slope/(2 HD) = {ratio:.4}"),
                )
            })
            .collect())
    };
    run().unwrap_or_else(|e| vec![Check::new("perturbative rates", false, format!("error: {e}"))])
}

fn random_problem(rng: &mut ChaCha8Rng, n: usize) -> Result<IsingProblem> {
    let h: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let couplers: Vec<((usize, usize), f64)> =
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|ij| (ij, rng.random_range(-1.0..1.0))).collect();
    IsingProblem::new(h, couplers, 1.0)
}

/// Linear envelopes `A = 30(1−s)`, `B = 30 s`.
pub fn linear_envelopes() -> PhysicalSchedule {
    PhysicalSchedule::from_fn(101, |s| (30.0 * (1.0 - s), 30.0 * s)).expect("linear envelopes are valid")
}

fn hardware_bath(lamb: bool) -> Result<BathSpec> {
    let bath = BathSpec::from_millikelvin(HARDWARE_COUPLING, HARDWARE_TEMPERATURE_MK)?;
    if lamb {
        bath.with_lamb_shift(LambShift::On { cutoff: crate::lindblad::DEFAULT_LAMB_CUTOFF })
    } else {
        Ok(bath)
    }
}

/// Kernel of the generator at `A = 0`: every computational projector is
/// stationary and the kernel has dimension at least `2^n`.
fn kernel_check(n: usize, seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let problem = random_problem(&mut rng, n)?;
    let h = hamiltonian_at(&problem, 0.0, 20.0)?;
    let bath = hardware_bath(n == 3)?;
    let gen = davies_generator(&h, &sigma_z_couplings(n), &bath)?;
    let d = problem.dim();
    let mut residual = 0.0f64;
    for x in 0..d {
        let mut p = Op::zeros(d, d);
        p[(x, x)] = c(1.0);
        residual = residual.max(max_abs(&liouvillian_apply(&gen, &h, &p)?));
    }
    let sv = gen.superoperator().singular_values();
    let scale = sv.max().max(1.0);
    let kernel = sv.iter().filter(|&&x| x <= 1e-10 * scale).count();
    Ok((
        residual <= 1e-10 && kernel >= d,
        format!("n = {n}: max |L(P_x)| = {residual:.2e}, kernel dimension {kernel} (need ≥ {d})"),
    ))
}

struct GibbsStats {
    stationarity: f64,
    kms: f64,
    balance: f64,
    trace: f64,
}

fn gibbs_instance(seed: u64) -> Result<GibbsStats> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 1 + (seed % 3) as usize;
    let problem = random_problem(&mut rng, n)?;
    let physical = linear_envelopes();
    let bath = hardware_bath(seed % 2 == 1)?;
    let couplings = sigma_z_couplings(n);
    let mut stats = GibbsStats { stationarity: 0.0, kms: 0.0, balance: 0.0, trace: 0.0 };
    for s in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let (a, b) = physical.eval(s)?;
        let h = hamiltonian_at(&problem, a, b)?;
        let gen = davies_generator(&h, &couplings, &bath)?;
        let sigma = gibbs_state(&h, bath.beta())?;
        stats.stationarity = stats.stationarity.max(trace_norm(&liouvillian_apply(&gen, &h, &sigma.matrix)?));

        for g in gen.eigensystem().bohr_groups() {
            let w = g.omega;
            if w > 0.0 {
                let lhs = bath.gamma(-w);
                let rhs = (-bath.beta() * w).exp() * bath.gamma(w);
                let scale = lhs.abs().max(rhs.abs());
                if scale > 0.0 {
                    stats.kms = stats.kms.max((lhs - rhs).abs() / scale);
                }
            }
        }
        stats.balance = stats.balance.max(rate_matrix(&gen, &bath).detailed_balance_defect());

        // Tr L(E_xy) for every matrix unit: the trace row of the superoperator.
        let d = h.dim();
        let sup = gen.superoperator();
        let worst = (0..d * d)
            .map(|col| (0..d).map(|a| sup[(a + a * d, col)]).sum::<C64>().norm())
            .fold(0.0, f64::max);
        stats.trace = stats.trace.max(worst);
    }
    Ok(stats)
}

/// Trajectory of a two-spin anneal: per-step trace, Hermiticity and
/// positivity, and agreement of the final ground-state population when the
/// tolerances are halved.
fn trajectory_checks() -> Vec<Check> {
    let run = || -> Result<Vec<Check>> {
        let problem = IsingProblem::chain(vec![-0.3, 0.2], -0.8)?;
        let bath = hardware_bath(false)?;
        let protocol = AnnealProtocol::new(linear_envelopes(), ControlSchedule::beta(1), 20.0)?;
        let opts = EvolveOptions::default();
        let coarse = evolve_ame(&problem, &protocol, &bath, &opts)?;
        let fine = evolve_ame(&problem, &protocol, &bath, &opts.scaled_tolerances(0.5))?;
        let p0 = ground_state_prob(&coarse.final_state, &problem)?.p_gs;
        let p1 = ground_state_prob(&fine.final_state, &problem)?.p_gs;
        let (tr, herm, min) = (coarse.max_trace_defect(), coarse.max_hermiticity_defect(), coarse.min_eigenvalue());
        let delta = (p0 - p1).abs();
        Ok(vec![
            Check::new(
                "trajectory integrity",
                tr <= 1e-8 && herm <= 1e-9 && min >= -1e-7,
                format!(
                    "{} accepted steps: max trace defect {tr:.1e}, max Hermiticity defect {herm:.1e}, min eigenvalue {min:.1e}",
                    coarse.accepted_steps
                ),
            ),
            Check::new(
                "tolerance halving",
                delta <= 100.0 * opts.rel_tol,
                format!("P_GS = {p0:.10} vs {p1:.10} (|Δ| = {delta:.1e}, limit {:.0e})", 100.0 * opts.rel_tol),
            ),
        ])
    };
    run().unwrap_or_else(|e| vec![Check::new("trajectory integrity", false, format!("error: {e}"))])
}

/// Structural properties of the generator on random small registers.
pub fn props() -> Vec<Check> {
    let mut checks: Vec<Check> =
        (1..=3usize).into_par_iter().map(|n| Check::from_result("computational-basis kernel at A = 0", kernel_check(n, 40 + n as u64))).collect();

    let stats: Vec<Result<GibbsStats>> = (0..20u64).into_par_iter().map(gibbs_instance).collect();
    match stats.into_iter().collect::<Result<Vec<_>>>() {
        Ok(all) => {
            let worst = |f: fn(&GibbsStats) -> f64| all.iter().map(f).fold(0.0, f64::max);
            let (st, kms, bal, tr) = (worst(|s| s.stationarity), worst(|s| s.kms), worst(|s| s.balance), worst(|s| s.trace));
            checks.push(Check::new("Gibbs stationarity", st <= 1e-8, format!("max ‖L(σ)‖₁ = {st:.2e} over 20 instances × 5 points")));
            checks.push(Check::new("KMS relation", kms <= 1e-10, format!("max relative defect {kms:.2e}")));
            checks.push(Check::new("detailed balance", bal <= 1e-9, format!("max relative defect {bal:.2e}")));
            checks.push(Check::new("trace annihilation", tr <= 1e-12, format!("max |Tr L(E_xy)| = {tr:.2e}")));
        }
        Err(e) => checks.push(Check::new("Gibbs property suite", false, format!("error: {e}"))),
    }
    checks.extend(trajectory_checks());
    checks
}

/// Spectral gap minimum, freezing point and thermal ground-state weight of
/// an annealing problem. Informational: the inputs are not exact.
#[derive(Debug, Clone, PartialEq)]
pub struct GadgetReport {
    pub s_star: f64,
    pub min_gap: f64,
    pub freezing: Freezing,
    pub gibbs_p_gs: f64,
}

pub fn gadget_report(
    problem: &IsingProblem,
    physical: &PhysicalSchedule,
    chi: f64,
    t_f: f64,
    s_gibbs: f64,
) -> Result<GadgetReport> {
    let problem = apply_crosstalk(problem, chi)?;
    let bath = hardware_bath(false)?;
    let grid: Vec<f64> = (0..=400).map(|i| i as f64 / 400.0).collect();
    let profile = gap_profile(&problem, physical, 1, &grid)?;
    let (s_star, gap) = min_gap(&profile)?;
    let freezing = crate::lindblad::freezing_point(&problem, physical, &bath, t_f, 3)?;
    let (a, b) = physical.eval(s_gibbs)?;
    let sigma = gibbs_state(&hamiltonian_at(&problem, a, b)?, bath.beta())?;
    let gibbs_p_gs = ground_state_prob(&sigma, &problem)?.p_gs;
    Ok(GadgetReport { s_star, min_gap: gap, freezing, gibbs_p_gs })
}
