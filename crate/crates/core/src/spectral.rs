//! Instantaneous eigensystems, degeneracy and Bohr-frequency grouping, gap
//! curves.

use std::io::Write;
use std::ops::Range;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{hamiltonian_at, HamiltonianMatrix, IsingProblem};
use crate::ops::{c, Op, C64};
use crate::schedule::PhysicalSchedule;

/// Default absolute tolerance (rad/ns) for degeneracy and Bohr grouping.
pub const DEFAULT_GROUPING_TOL: f64 = 1e-8;

/// Level pairs `(a, b)` sharing one Bohr frequency `ω ≈ E_b − E_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct BohrGroup {
    pub omega: f64,
    pub pairs: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct EigenSystem {
    energies: Vec<f64>,
    vectors: Op,
    degeneracy: Vec<Range<usize>>,
    level_group: Vec<usize>,
    bohr: Vec<BohrGroup>,
    tol: f64,
}

impl EigenSystem {
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Eigenvectors as columns, ordered like [`energies`](Self::energies).
    pub fn vectors(&self) -> &Op {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Degeneracy groups as contiguous level ranges.
    pub fn degeneracy_groups(&self) -> &[Range<usize>] {
        &self.degeneracy
    }

    /// Index of the degeneracy group containing level `a`.
    pub fn group_of(&self, a: usize) -> usize {
        self.level_group[a]
    }

    pub fn degenerate(&self, a: usize, b: usize) -> bool {
        self.level_group[a] == self.level_group[b]
    }

    /// Bohr groups ordered by `ω`: negative frequencies, zero, positive.
    pub fn bohr_groups(&self) -> &[BohrGroup] {
        &self.bohr
    }

    /// `max |(E_b − E_a) − ω|` over all grouped pairs.
    pub fn bohr_closure(&self) -> f64 {
        self.bohr
            .iter()
            .flat_map(|g| g.pairs.iter().map(move |&(a, b)| (self.energies[b] - self.energies[a] - g.omega).abs()))
            .fold(0.0, f64::max)
    }

    /// `Δ_{n,n+1}` for the lowest `levels` gaps.
    pub fn gaps(&self, levels: usize) -> Vec<f64> {
        self.energies.windows(2).take(levels).map(|w| (w[1] - w[0]).max(0.0)).collect()
    }

    /// `V diag(E) V†`.
    pub fn reconstruct(&self) -> Op {
        let d = self.dim();
        let scaled = Op::from_fn(d, d, |i, j| self.vectors[(i, j)] * self.energies[j]);
        scaled * self.vectors.adjoint()
    }
}

fn sorted_eigen(h: &Op) -> Result<(Vec<f64>, Op)> {
    let d = h.nrows();
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Eigen("Hamiltonian has non-finite entries".into()));
    }
    let (values, vectors): (Vec<f64>, Op) = if h.iter().all(|z| z.im == 0.0) {
        let real = DMatrix::<f64>::from_fn(d, d, |i, j| h[(i, j)].re);
        let eig = SymmetricEigen::try_new(real, f64::EPSILON, 100_000)
            .ok_or_else(|| Error::Eigen("symmetric eigensolver did not converge".into()))?;
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors.map(c))
    } else {
        let eig = SymmetricEigen::try_new(h.clone(), f64::EPSILON, 100_000)
            .ok_or_else(|| Error::Eigen("Hermitian eigensolver did not converge".into()))?;
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let energies = order.iter().map(|&k| values[k]).collect();
    let vectors = Op::from_fn(d, d, |i, j| vectors[(i, order[j])]);
    Ok((energies, vectors))
}

/// Ascending eigenvalues only.
pub fn energies(h: &HamiltonianMatrix) -> Result<Vec<f64>> {
    Ok(sorted_eigen(h.as_op())?.0)
}

/// Span rule: a new cluster starts when a value exceeds the first value of
/// the current cluster by more than `tol`.
fn cluster_sorted(values: &[f64], tol: f64) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] - values[start] > tol {
            out.push(start..i);
            start = i;
        }
    }
    out
}

/// Full decomposition of `h` with degeneracy and Bohr grouping at absolute
/// tolerance `tol`.
pub fn eigensystem(h: &HamiltonianMatrix, tol: f64) -> Result<EigenSystem> {
    if !(tol >= 0.0) {
        return Err(Error::Domain(format!("grouping tolerance {tol} must be non-negative")));
    }
    let (energies, vectors) = sorted_eigen(h.as_op())?;
    let d = energies.len();
    let degeneracy = cluster_sorted(&energies, tol);
    let mut level_group = vec![0; d];
    for (g, r) in degeneracy.iter().enumerate() {
        for a in r.clone() {
            level_group[a] = g;
        }
    }
    let means: Vec<f64> = degeneracy
        .iter()
        .map(|r| energies[r.clone()].iter().sum::<f64>() / r.len() as f64)
        .collect();

    // Positive frequencies between distinct degeneracy groups.
    let ng = degeneracy.len();
    let mut diffs: Vec<(f64, usize, usize)> = Vec::with_capacity(ng * ng.saturating_sub(1) / 2);
    for ga in 0..ng {
        for gb in ga + 1..ng {
            diffs.push((means[gb] - means[ga], ga, gb));
        }
    }
    diffs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let values: Vec<f64> = diffs.iter().map(|x| x.0).collect();

    let pairs_of = |ga: usize, gb: usize| {
        let (ra, rb) = (degeneracy[ga].clone(), degeneracy[gb].clone());
        ra.flat_map(move |a| rb.clone().map(move |b| (a, b)))
    };

    let mut positive = Vec::new();
    for r in cluster_sorted(&values, tol) {
        let members = &diffs[r];
        let omega = members.iter().map(|m| m.0).sum::<f64>() / members.len() as f64;
        let pairs: Vec<(usize, usize)> = members.iter().flat_map(|&(_, ga, gb)| pairs_of(ga, gb)).collect();
        positive.push(BohrGroup { omega, pairs });
    }

    let zero = BohrGroup { omega: 0.0, pairs: (0..ng).flat_map(|g| pairs_of(g, g)).collect() };
    let mut bohr: Vec<BohrGroup> = positive
        .iter()
        .rev()
        .map(|g| BohrGroup { omega: -g.omega, pairs: g.pairs.iter().map(|&(a, b)| (b, a)).collect() })
        .collect();
    bohr.push(zero);
    bohr.extend(positive);

    Ok(EigenSystem { energies, vectors, degeneracy, level_group, bohr, tol })
}

/// Gap curves `Δ_{n,n+1}(s)` on a grid of schedule points.
#[derive(Debug, Clone, PartialEq)]
pub struct GapProfile {
    pub grid: Vec<f64>,
    /// `gaps[i][n]` is `Δ_{n,n+1}` at `grid[i]`.
    pub gaps: Vec<Vec<f64>>,
}

impl GapProfile {
    pub fn levels(&self) -> usize {
        self.gaps.first().map_or(0, Vec::len)
    }

    /// CSV with header `s,gap01,gap12,...`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let cols: Vec<String> = (0..self.levels()).map(|n| format!("gap{}{}", n, n + 1)).collect();
        writeln!(w, "s,{}", cols.join(","))?;
        for (s, row) in self.grid.iter().zip(&self.gaps) {
            let vals: Vec<String> = row.iter().map(|g| g.to_string()).collect();
            writeln!(w, "{s},{}", vals.join(","))?;
        }
        Ok(())
    }
}

/// Evaluates the lowest `levels` gaps of `H_S(s)` along `grid`. Grid points
/// are processed in parallel; the output keeps grid order.
pub fn gap_profile(
    problem: &IsingProblem,
    physical: &PhysicalSchedule,
    levels: usize,
    grid: &[f64],
) -> Result<GapProfile> {
    if grid.iter().any(|s| !(0.0..=1.0).contains(s)) {
        return Err(Error::Domain("gap grid must lie in [0, 1]".into()));
    }
    let levels = levels.min(problem.dim() - 1);
    let gaps = grid
        .par_iter()
        .map(|&s| {
            let (a, b) = physical.eval(s)?;
            let e = energies(&hamiltonian_at(problem, a, b)?)?;
            Ok(e.windows(2).take(levels).map(|w| (w[1] - w[0]).max(0.0)).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(GapProfile { grid: grid.to_vec(), gaps })
}

/// Location and size of the minimum of `Δ_{01}`, refined by a parabola
/// through the grid minimum and its neighbours.
pub fn min_gap(profile: &GapProfile) -> Result<(f64, f64)> {
    if profile.grid.is_empty() || profile.levels() == 0 {
        return Err(Error::Domain("empty gap profile".into()));
    }
    let g: Vec<f64> = profile.gaps.iter().map(|row| row[0]).collect();
    let x = &profile.grid;
    let i = (0..g.len()).min_by(|&a, &b| g[a].total_cmp(&g[b])).unwrap();
    if i == 0 || i + 1 == g.len() {
        return Ok((x[i], g[i]));
    }
    let (x0, x1, x2) = (x[i - 1], x[i], x[i + 1]);
    let (y0, y1, y2) = (g[i - 1], g[i], g[i + 1]);
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curv = (d12 - d01) / (x2 - x0);
    if !(curv > 0.0) {
        return Ok((x1, y1));
    }
    // y = y1 + d (x − x1) + curv (x − x1)^2 with d the derivative at x1
    let d = d01 + curv * (x1 - x0);
    let xv = (x1 - d / (2.0 * curv)).clamp(x0, x2);
    let yv = y1 + d * (xv - x1) + curv * (xv - x1).powi(2);
    Ok((xv, yv.min(y1)))
}

/// Points where the maximal overlap between an eigenvector and its
/// counterpart at the previous grid point drops below `threshold`:
/// `(s, level, overlap)`.
pub fn continuity_warnings(
    problem: &IsingProblem,
    physical: &PhysicalSchedule,
    levels: usize,
    grid: &[f64],
    threshold: f64,
) -> Result<Vec<(f64, usize, f64)>> {
    let systems = grid
        .par_iter()
        .map(|&s| {
            let (a, b) = physical.eval(s)?;
            sorted_eigen(hamiltonian_at(problem, a, b)?.as_op())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for k in 1..systems.len() {
        let overlap = systems[k - 1].1.adjoint() * &systems[k].1;
        for n in 0..levels.min(overlap.ncols()) {
            let best = (0..overlap.nrows()).map(|m| overlap[(m, n)].norm()).fold(0.0, f64::max);
            if best < threshold {
                out.push((grid[k], n, best));
            }
        }
    }
    Ok(out)
}

/// Entries `⟨a|O|b⟩` in the eigenbasis of `eig`.
pub fn in_eigenbasis(eig: &EigenSystem, o: &Op) -> Op {
    eig.vectors().adjoint() * o * eig.vectors()
}

/// Overlap `|⟨ψ_a|x⟩|²` of eigenvector `a` with computational state `x`.
pub fn basis_weight(eig: &EigenSystem, a: usize, x: usize) -> f64 {
    let z: C64 = eig.vectors()[(x, a)];
    z.norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::{max_abs, sigma_x, sigma_z};
    use crate::schedule::ScheduleSample;

    fn wrap(m: Op) -> HamiltonianMatrix {
        HamiltonianMatrix::new(m).unwrap()
    }

    #[test]
    fn diagonal_two_level() {
        let e = eigensystem(&wrap(sigma_z()), 1e-8).unwrap();
        assert_eq!(e.energies(), &[-1.0, 1.0]);
        let positive: Vec<_> = e.bohr_groups().iter().filter(|g| g.omega > 0.0).collect();
        assert_eq!(positive.len(), 1);
        assert_eq!(positive[0].omega, 2.0);
        assert_eq!(positive[0].pairs, vec![(0, 1)]);
    }

    #[test]
    fn transverse_two_level() {
        let e = eigensystem(&wrap(-sigma_x()), 1e-8).unwrap();
        assert!((e.energies()[0] + 1.0).abs() < 1e-14 && (e.energies()[1] - 1.0).abs() < 1e-14);
        let v = e.vectors();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v[(0, 0)].norm() - r).abs() < 1e-14 && (v[(1, 0)].norm() - r).abs() < 1e-14);
        assert!((v[(0, 0)] - v[(1, 0)]).norm() < 1e-14);
        assert!((v[(0, 1)] + v[(1, 1)]).norm() < 1e-14);
    }

    #[test]
    fn degenerate_chain() {
        let p = IsingProblem::chain(vec![0.0, 0.0], -1.0).unwrap();
        let e = eigensystem(&hamiltonian_at(&p, 0.0, 2.0).unwrap(), 1e-8).unwrap();
        assert_eq!(e.energies(), &[-1.0, -1.0, 1.0, 1.0]);
        assert_eq!(e.degeneracy_groups(), &[0..2, 2..4]);
        let zero = e.bohr_groups().iter().find(|g| g.omega == 0.0).unwrap();
        assert_eq!(zero.pairs.len(), 8);
    }

    #[test]
    fn bohr_groups_partition_all_pairs() {
        let p = IsingProblem::new(vec![0.3, -0.2, 0.1], [((0, 1), 0.5), ((1, 2), -0.7)], 1.0).unwrap();
        for (a, b) in [(0.0, 1.0), (1.0, 1.0), (2.0, 0.0)] {
            let e = eigensystem(&hamiltonian_at(&p, a, b).unwrap(), 1e-8).unwrap();
            let d = e.dim();
            let mut seen = vec![0; d * d];
            for g in e.bohr_groups() {
                for &(x, y) in &g.pairs {
                    seen[x * d + y] += 1;
                }
            }
            assert!(seen.iter().all(|&k| k == 1));
            assert!(e.bohr_closure() <= 1e-8);
            for g in e.bohr_groups() {
                let mirror = e.bohr_groups().iter().find(|h| h.omega == -g.omega).unwrap();
                assert_eq!(mirror.pairs.len(), g.pairs.len());
            }
        }
    }

    #[test]
    fn reconstruction() {
        let p = IsingProblem::new(vec![0.3, -0.2, 0.1], [((0, 2), 0.5)], 0.7).unwrap();
        let h = hamiltonian_at(&p, 1.3, 2.1).unwrap();
        let e = eigensystem(&h, 1e-8).unwrap();
        assert!(max_abs(&(e.reconstruct() - h.as_op())) < 1e-12);
        let gram = e.vectors().adjoint() * e.vectors();
        assert!(max_abs(&(gram - Op::identity(8, 8))) < 1e-12);
    }

    fn linear_table() -> PhysicalSchedule {
        PhysicalSchedule::with_interpolation(
            vec![ScheduleSample { s: 0.0, a: 2.0, b: 0.0 }, ScheduleSample { s: 1.0, a: 0.0, b: 2.0 }],
            crate::schedule::Interpolation::Linear,
        )
        .unwrap()
    }

    #[test]
    fn single_qubit_gap_profile() {
        let p = IsingProblem::new(vec![1.0], [], 1.0).unwrap();
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let prof = gap_profile(&p, &linear_table(), 1, &grid).unwrap();
        for (s, row) in grid.iter().zip(&prof.gaps) {
            let exact = 2.0 * (s * s + (1.0 - s) * (1.0 - s)).sqrt();
            assert!((row[0] - exact).abs() < 1e-12);
        }
        let grid: Vec<f64> = (0..=37).map(|i| i as f64 / 37.0).collect();
        let (s, g) = min_gap(&gap_profile(&p, &linear_table(), 1, &grid).unwrap()).unwrap();
        assert!((s - 0.5).abs() < 1e-3, "{s}");
        assert!((g - 2f64.sqrt()).abs() < 1e-4, "{g}");
    }

    #[test]
    fn transverse_field_gap_at_start() {
        let p = IsingProblem::new(vec![0.4, -0.9, 0.2], [((0, 1), -1.0), ((1, 2), 0.6)], 1.0).unwrap();
        let prof = gap_profile(&p, &linear_table(), 3, &[0.0]).unwrap();
        assert!((prof.gaps[0][0] - 2.0).abs() < 1e-12);
        assert!(prof.gaps[0][1].abs() < 1e-12);
    }

    #[test]
    fn monotone_gap_minimum_at_endpoint() {
        let prof = GapProfile { grid: vec![0.0, 0.5, 1.0], gaps: vec![vec![3.0], vec![2.0], vec![1.0]] };
        assert_eq!(min_gap(&prof).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn gap_csv_header() {
        let prof = GapProfile { grid: vec![0.0], gaps: vec![vec![1.0, 2.0]] };
        let mut buf = Vec::new();
        prof.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "s,gap01,gap12\n0,1,2\n");
    }
}
