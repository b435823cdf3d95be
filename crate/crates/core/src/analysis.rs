//! Scaling fits of ground-state probability against anneal time.
//!
//! The nonlinear model is `P(t_f) = plateau + C / t_f^η`. Internally the
//! fit works in `x = t_ref / t_f` with `t_ref` the geometric mean of the
//! fitted anneal times, which keeps `x^η` well scaled for any `η`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Starting exponents for the multi-start simplex search.
pub const ETA_STARTS: [f64; 5] = [0.2, 0.5, 1.0, 2.0, 3.0];
/// Minimum number of points accepted by [`fit_power_law`].
pub const MIN_FIT_POINTS: usize = 4;

const ETA_BOUND: f64 = 50.0;
const SIMPLEX_TOL: f64 = 1e-13;
const SIMPLEX_MAX_ITER: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingPoint {
    pub t_f: f64,
    pub p_gs: f64,
    /// Variance of `p_gs`; `None` when unknown.
    pub variance: Option<f64>,
}

/// Ground-state probabilities at strictly increasing anneal times, with
/// optional raw replicates per time for bootstrapping.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSeries {
    points: Vec<ScalingPoint>,
    replicates: Option<Vec<Vec<f64>>>,
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain(format!("probability {p} outside [0, 1]")))
    }
}

impl ScalingSeries {
    pub fn new(points: Vec<ScalingPoint>) -> Result<Self> {
        for w in points.windows(2) {
            if !(w[1].t_f > w[0].t_f) {
                return Err(Error::Domain(format!("anneal times must increase strictly ({} then {})", w[0].t_f, w[1].t_f)));
            }
        }
        for p in &points {
            if !(p.t_f > 0.0 && p.t_f.is_finite()) {
                return Err(Error::Domain(format!("anneal time {} must be positive", p.t_f)));
            }
            check_probability(p.p_gs)?;
            if let Some(v) = p.variance {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::Domain(format!("variance {v} must be non-negative")));
                }
            }
        }
        Ok(Self { points, replicates: None })
    }

    /// Series without variances.
    pub fn from_values(t_f: &[f64], p_gs: &[f64]) -> Result<Self> {
        if t_f.len() != p_gs.len() {
            return Err(Error::Dimension { expected: t_f.len(), got: p_gs.len() });
        }
        Self::new(t_f.iter().zip(p_gs).map(|(&t_f, &p_gs)| ScalingPoint { t_f, p_gs, variance: None }).collect())
    }

    /// Series whose points are replicate means, with the variance of each
    /// mean as its weight. The replicates are kept for [`bootstrap_fit`].
    pub fn from_replicates(t_f: &[f64], replicates: Vec<Vec<f64>>) -> Result<Self> {
        if t_f.len() != replicates.len() {
            return Err(Error::Dimension { expected: t_f.len(), got: replicates.len() });
        }
        let mut points = Vec::with_capacity(t_f.len());
        for (&t, reps) in t_f.iter().zip(&replicates) {
            if reps.len() < 2 {
                return Err(Error::Precondition(format!("t_f = {t} has {} replicates, need at least 2", reps.len())));
            }
            for &p in reps {
                check_probability(p)?;
            }
            let (mean, variance) = mean_and_variance_of_mean(reps);
            points.push(ScalingPoint { t_f: t, p_gs: mean, variance: Some(variance) });
        }
        let mut series = Self::new(points)?;
        series.replicates = Some(replicates);
        Ok(series)
    }

    pub fn points(&self) -> &[ScalingPoint] {
        &self.points
    }

    pub fn replicates(&self) -> Option<&[Vec<f64>]> {
        self.replicates.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same data with every anneal time multiplied by `factor`.
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        let mut s = Self::new(self.points.iter().map(|p| ScalingPoint { t_f: p.t_f * factor, ..*p }).collect())?;
        s.replicates = self.replicates.clone();
        Ok(s)
    }
}

fn mean_and_variance_of_mean(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, var / m)
}

/// Indices of the points taken into a fit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask(Vec<usize>);

impl Mask {
    pub fn all(n: usize) -> Self {
        Self((0..n).collect())
    }

    /// Sorted, deduplicated index set.
    pub fn from_indices(indices: impl IntoIterator<Item = usize>) -> Self {
        let mut v: Vec<usize> = indices.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }

    /// All of `0..n` except `dropped`.
    pub fn excluding(n: usize, dropped: &[usize]) -> Self {
        Self((0..n).filter(|i| !dropped.contains(i)).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn select<'a>(&self, series: &'a ScalingSeries) -> Result<Vec<&'a ScalingPoint>> {
        self.0
            .iter()
            .map(|&i| {
                series
                    .points
                    .get(i)
                    .ok_or_else(|| Error::Domain(format!("mask index {i} out of range for {} points", series.len())))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitParams {
    pub eta: f64,
    pub c: f64,
    pub plateau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: FitParams,
    /// Half-widths of the 90% bootstrap intervals.
    pub ci90: Option<FitParams>,
    pub points_used: Vec<usize>,
    pub chi2: f64,
    /// False when the simplex search hit its iteration limit.
    pub converged: bool,
    /// False when the data carry no decay, so `η` and `C` are arbitrary.
    pub identifiable: bool,
    pub n_boot: usize,
    /// Bootstrap resamples whose fit did not converge.
    pub dropped: usize,
}

impl FitResult {
    pub fn eta(&self) -> f64 {
        self.params.eta
    }

    pub fn c(&self) -> f64 {
        self.params.c
    }

    pub fn plateau(&self) -> f64 {
        self.params.plateau
    }

    pub const CSV_HEADER: &'static str = "eta,eta_ci90,C,C_ci90,plateau,plateau_ci90,n_boot,points_used";

    /// One CSV row; interval columns are empty without a bootstrap.
    pub fn csv_row(&self) -> String {
        let ci = |f: fn(&FitParams) -> f64| self.ci90.as_ref().map(|c| format!("{}", f(c))).unwrap_or_default();
        let used: Vec<String> = self.points_used.iter().map(usize::to_string).collect();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.params.eta,
            ci(|p| p.eta),
            self.params.c,
            ci(|p| p.c),
            self.params.plateau,
            ci(|p| p.plateau),
            self.n_boot,
            used.join(";")
        )
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        writeln!(w, "{}", self.csv_row())?;
        Ok(())
    }
}

impl std::fmt::Display for FitResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let pm = |v: f64, ci: Option<f64>| match ci {
            Some(c) => format!("{v:.6} ± {c:.6}"),
            None => format!("{v:.6}"),
        };
        let ci = self.ci90.as_ref();
        writeln!(f, "eta     = {}", pm(self.params.eta, ci.map(|c| c.eta)))?;
        writeln!(f, "C       = {}", pm(self.params.c, ci.map(|c| c.c)))?;
        writeln!(f, "plateau = {}", pm(self.params.plateau, ci.map(|c| c.plateau)))?;
        writeln!(f, "points  = {:?}", self.points_used)?;
        if self.n_boot > 0 {
            writeln!(f, "n_boot  = {} ({} dropped)", self.n_boot, self.dropped)?;
        }
        if !self.converged {
            writeln!(f, "warning: fit did not converge; best candidate shown")?;
        }
        if !self.identifiable {
            writeln!(f, "warning: no decay in the data; eta and C are not identifiable")?;
        }
        Ok(())
    }
}

/// Weighted data in the scaled variable `x = t_ref / t_f`.
struct FitData {
    x: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    t_ref: f64,
}

impl FitData {
    fn new(points: &[&ScalingPoint]) -> Self {
        let t_ref = (points.iter().map(|p| p.t_f.ln()).sum::<f64>() / points.len() as f64).exp();
        let weighted = points.iter().all(|p| p.variance.is_some_and(|v| v > 0.0));
        Self {
            x: points.iter().map(|p| t_ref / p.t_f).collect(),
            y: points.iter().map(|p| p.p_gs).collect(),
            w: points.iter().map(|p| if weighted { 1.0 / p.variance.unwrap_or(1.0) } else { 1.0 }).collect(),
            t_ref,
        }
    }

    /// Best `(plateau, C_scaled, χ²)` for a fixed exponent, with the
    /// plateau confined to `[0, 1]`.
    fn project(&self, eta: f64) -> (f64, f64, f64) {
        let f: Vec<f64> = self.x.iter().map(|x| x.powf(eta)).collect();
        let (mut sw, mut swf, mut swff, mut swy, mut swfy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for ((&fi, &yi), &wi) in f.iter().zip(&self.y).zip(&self.w) {
            sw += wi;
            swf += wi * fi;
            swff += wi * fi * fi;
            swy += wi * yi;
            swfy += wi * fi * yi;
        }
        let det = sw * swff - swf * swf;
        let (mut p, mut c) = if det > 1e-14 * sw * swff {
            ((swff * swy - swf * swfy) / det, (sw * swfy - swf * swy) / det)
        } else {
            (swy / sw, 0.0)
        };
        if !(0.0..=1.0).contains(&p) {
            p = p.clamp(0.0, 1.0);
            c = if swff > 0.0 { (swfy - p * swf) / swff } else { 0.0 };
        }
        let chi2 = f.iter().zip(&self.y).zip(&self.w).map(|((&fi, &yi), &wi)| wi * (yi - p - c * fi).powi(2)).sum();
        (p, c, chi2)
    }

    fn objective(&self, eta: f64) -> f64 {
        if eta.abs() > ETA_BOUND {
            return f64::INFINITY;
        }
        let chi2 = self.project(eta).2;
        if chi2.is_finite() {
            chi2
        } else {
            f64::INFINITY
        }
    }
}

struct SimplexOutcome {
    x: f64,
    fx: f64,
    converged: bool,
}

/// Nelder–Mead on one variable.
fn nelder_mead_1d(f: impl Fn(f64) -> f64, x0: f64, step: f64) -> SimplexOutcome {
    let mut s = [(x0, f(x0)), (x0 + step, f(x0 + step))];
    for _ in 0..SIMPLEX_MAX_ITER {
        s.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (s[0], s[1]);
        let scale = best.0.abs().max(1.0);
        if (worst.0 - best.0).abs() <= SIMPLEX_TOL * scale {
            return SimplexOutcome { x: best.0, fx: best.1, converged: true };
        }
        let reflect = best.0 + (best.0 - worst.0);
        let fr = f(reflect);
        s[1] = if fr < best.1 {
            let expand = best.0 + 2.0 * (best.0 - worst.0);
            let fe = f(expand);
            if fe < fr {
                (expand, fe)
            } else {
                (reflect, fr)
            }
        } else {
            let contract = if fr < worst.1 { best.0 + 0.5 * (reflect - best.0) } else { best.0 + 0.5 * (worst.0 - best.0) };
            let fc = f(contract);
            if fc < worst.1.min(fr) {
                (contract, fc)
            } else {
                // Shrinking a one-dimensional simplex toward the best vertex
                // is the same contraction with a fresh evaluation.
                let shrink = best.0 + 0.5 * (worst.0 - best.0);
                (shrink, f(shrink))
            }
        };
    }
    s.sort_by(|a, b| a.1.total_cmp(&b.1));
    SimplexOutcome { x: s[0].0, fx: s[0].1, converged: false }
}

fn fit_data(data: &FitData, points_used: Vec<usize>) -> Result<FitResult> {
    let best = ETA_STARTS
        .iter()
        .map(|&eta0| nelder_mead_1d(|e| data.objective(e), eta0, 0.1 * eta0.max(0.1)))
        .filter(|o| o.fx.is_finite())
        .min_by(|a, b| a.fx.total_cmp(&b.fx).then(b.converged.cmp(&a.converged)))
        .ok_or_else(|| Error::Fit("objective is not finite for any starting exponent".into()))?;
    let (plateau, c_scaled, chi2) = data.project(best.x);
    let fmin = data.x.iter().map(|x| x.powf(best.x)).fold(f64::INFINITY, f64::min);
    let fmax = data.x.iter().map(|x| x.powf(best.x)).fold(f64::NEG_INFINITY, f64::max);
    let y_scale = data.y.iter().fold(0.0f64, |m, y| m.max(y.abs())).max(f64::MIN_POSITIVE);
    let identifiable = (c_scaled * (fmax - fmin)).abs() > 1e-10 * y_scale;
    Ok(FitResult {
        params: FitParams { eta: best.x, c: c_scaled * data.t_ref.powf(best.x), plateau },
        ci90: None,
        points_used,
        chi2,
        converged: best.converged,
        identifiable,
        n_boot: 0,
        dropped: 0,
    })
}

/// Weighted nonlinear least squares of `plateau + C / t_f^η` on the masked
/// points. Variances are used as weights only when every masked point has a
/// positive one.
pub fn fit_power_law(series: &ScalingSeries, mask: &Mask) -> Result<FitResult> {
    let pts = mask.select(series)?;
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::Precondition(format!("fit needs at least {MIN_FIT_POINTS} points, mask has {}", pts.len())));
    }
    fit_data(&FitData::new(&pts), mask.indices().to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearRefit {
    pub eta: f64,
    /// Intercept of `log10 |P − plateau|` at `log10 t_f = 0`.
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
}

/// Ordinary least squares of `log10 |P − plateau|` against `log10 t_f`,
/// slope `−η`.
pub fn refit_linear(series: &ScalingSeries, plateau: f64, mask: &Mask) -> Result<LinearRefit> {
    let pts = mask.select(series)?;
    if pts.len() < 2 {
        return Err(Error::Precondition(format!("linear refit needs at least 2 points, mask has {}", pts.len())));
    }
    let mut xs = Vec::with_capacity(pts.len());
    let mut ys = Vec::with_capacity(pts.len());
    for p in pts {
        let r = (p.p_gs - plateau).abs();
        if r == 0.0 {
            return Err(Error::Precondition(format!("residual vanishes at t_f = {}", p.t_f)));
        }
        xs.push(p.t_f.log10());
        ys.push(r.log10());
    }
    let (slope, intercept, stderr) = ols(&xs, &ys);
    Ok(LinearRefit { eta: -slope, intercept, stderr })
}

/// Slope, intercept and slope standard error of a straight-line fit.
pub fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if xs.len() > 2 {
        let ssr: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, intercept, stderr)
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Parameter medians and 90%-interval half-widths over fits of resampled
/// replicates. Resample `b` draws from a ChaCha8 stream `b` seeded with
/// `seed`, so results do not depend on thread scheduling.
pub fn bootstrap_fit(series: &ScalingSeries, mask: &Mask, n_boot: usize, seed: u64) -> Result<FitResult> {
    if n_boot < 2 {
        return Err(Error::Precondition(format!("bootstrap needs at least 2 resamples, got {n_boot}")));
    }
    let replicates = series
        .replicates()
        .ok_or_else(|| Error::Precondition("bootstrap needs replicate data".into()))?;
    let selected: Vec<(&ScalingPoint, &Vec<f64>)> =
        mask.select(series)?.into_iter().zip(mask.indices().iter().map(|&i| &replicates[i])).collect();
    if selected.len() < MIN_FIT_POINTS {
        return Err(Error::Precondition(format!("fit needs at least {MIN_FIT_POINTS} points, mask has {}", selected.len())));
    }

    let fits: Vec<Option<FitParams>> = (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let points: Vec<ScalingPoint> = selected
                .iter()
                .map(|(p, reps)| {
                    let draw: Vec<f64> = (0..reps.len()).map(|_| reps[rng.random_range(0..reps.len())]).collect();
                    let (mean, variance) = mean_and_variance_of_mean(&draw);
                    ScalingPoint { t_f: p.t_f, p_gs: mean, variance: Some(variance) }
                })
                .collect();
            let refs: Vec<&ScalingPoint> = points.iter().collect();
            fit_data(&FitData::new(&refs), Vec::new()).ok().filter(|f| f.converged).map(|f| f.params)
        })
        .collect();

    let ok: Vec<FitParams> = fits.iter().flatten().copied().collect();
    if ok.is_empty() {
        return Err(Error::Fit(format!("all {n_boot} bootstrap fits failed")));
    }
    let summarize = |get: fn(&FitParams) -> f64| {
        let mut v: Vec<f64> = ok.iter().map(get).collect();
        v.sort_by(f64::total_cmp);
        (quantile(&v, 0.5), 0.5 * (quantile(&v, 0.95) - quantile(&v, 0.05)))
    };
    let (eta, eta_ci) = summarize(|p| p.eta);
    let (c, c_ci) = summarize(|p| p.c);
    let (plateau, plateau_ci) = summarize(|p| p.plateau);
    let full = fit_power_law(series, mask)?;
    Ok(FitResult {
        params: FitParams { eta, c, plateau },
        ci90: Some(FitParams { eta: eta_ci, c: c_ci, plateau: plateau_ci }),
        n_boot,
        dropped: n_boot - ok.len(),
        ..full
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Gapped,
    GaplessAtEnd,
    GaplessInMiddle,
}

/// Predicted adiabatic-error exponent for a schedule with `k` vanishing
/// derivatives at the end and Liouvillian gap exponent `alpha`.
pub fn theoretical_eta(k: u32, alpha: f64, regime: Regime) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!("gap exponent {alpha} must be positive")));
    }
    let k1 = f64::from(k) + 1.0;
    Ok(match regime {
        Regime::Gapped | Regime::GaplessInMiddle => k1,
        Regime::GaplessAtEnd => k1 / (alpha * k1 + 1.0),
    })
}

/// Number of tries needed to see the ground state at least once with the
/// given confidence.
pub fn nts(p_gs: f64, confidence: f64) -> Result<f64> {
    if !(p_gs > 0.0 && p_gs < 1.0) {
        return Err(Error::Domain(format!("ground-state probability {p_gs} must lie in (0, 1)")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Domain(format!("confidence {confidence} must lie in (0, 1)")));
    }
    Ok((-confidence).ln_1p() / (-p_gs).ln_1p())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn synthetic(n: usize) -> ScalingSeries {
        let t: Vec<f64> = (0..n).map(|i| 10f64.powf(1.0 + 2.0 * i as f64 / (n - 1) as f64)).collect();
        let p: Vec<f64> = t.iter().map(|t| 0.9 + 0.05 * t.powf(-0.5)).collect();
        ScalingSeries::from_values(&t, &p).unwrap()
    }

    #[test]
    fn recovers_noiseless_power_law() {
        let s = synthetic(8);
        let f = fit_power_law(&s, &Mask::all(8)).unwrap();
        assert!(f.converged && f.identifiable);
        assert!((f.plateau() - 0.9).abs() < 1e-4);
        assert!((f.c() - 0.05).abs() < 1e-4);
        assert!((f.eta() - 0.5).abs() < 1e-4);
    }

    #[test]
    fn constant_series_is_flagged() {
        let t = [1.0, 10.0, 100.0, 1000.0, 1e4];
        let s = ScalingSeries::from_values(&t, &[0.7; 5]).unwrap();
        let f = fit_power_law(&s, &Mask::all(5)).unwrap();
        assert!((f.plateau() - 0.7).abs() < 1e-12);
        assert!(f.c().abs() < 1e-12);
        assert!(f.eta().is_finite());
        assert!(!f.identifiable);
    }

    #[test]
    fn fit_needs_four_points() {
        let s = synthetic(8);
        assert!(fit_power_law(&s, &Mask::from_indices([0, 1, 2])).is_err());
        assert!(fit_power_law(&s, &Mask::from_indices([0, 9, 2, 3])).is_err());
    }

    #[test]
    fn linear_refit_identities() {
        let s = synthetic(6);
        let r = refit_linear(&s, 0.9, &Mask::all(6)).unwrap();
        assert_relative_eq!(r.eta, 0.5, epsilon = 1e-12);
        assert_relative_eq!(10f64.powf(r.intercept), 0.05, epsilon = 1e-12);

        let biased = refit_linear(&s, 0.91, &Mask::all(6)).unwrap();
        assert!(biased.eta < 0.5);

        let two = refit_linear(&s, 0.9, &Mask::from_indices([1, 4])).unwrap();
        assert_eq!(two.stderr, 0.0);
        assert_relative_eq!(two.eta, 0.5, epsilon = 1e-12);

        let flat = ScalingSeries::from_values(&[1.0, 2.0], &[0.9, 0.8]).unwrap();
        assert!(refit_linear(&flat, 0.9, &Mask::all(2)).is_err());
    }

    #[test]
    fn theoretical_exponents() {
        assert_relative_eq!(theoretical_eta(0, 2.0, Regime::GaplessAtEnd).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(theoretical_eta(3, 2.0, Regime::GaplessAtEnd).unwrap(), 4.0 / 9.0, epsilon = 1e-15);
        assert_eq!(theoretical_eta(2, 2.0, Regime::Gapped).unwrap(), 3.0);
        assert_eq!(theoretical_eta(1, 4.0, Regime::GaplessInMiddle).unwrap(), 2.0);
        assert!(theoretical_eta(1, 0.0, Regime::Gapped).is_err());
    }

    #[test]
    fn nts_values() {
        assert_eq!(nts(0.9, 0.9).unwrap(), 1.0);
        assert_relative_eq!(nts(0.5, 0.9).unwrap(), 0.1f64.ln() / 0.5f64.ln(), epsilon = 1e-14);
        assert_relative_eq!(nts(0.5, 0.9).unwrap(), std::f64::consts::LOG2_10, epsilon = 1e-12);
        assert!(nts(0.0, 0.9).is_err());
        assert!(nts(1.0, 0.9).is_err());
    }

    #[test]
    fn bootstrap_zero_spread_and_determinism() {
        let t = [10.0, 30.0, 100.0, 300.0, 1000.0];
        let reps: Vec<Vec<f64>> = t.iter().map(|t: &f64| vec![0.9 + 0.05 * t.powf(-0.5); 4]).collect();
        let s = ScalingSeries::from_replicates(&t, reps).unwrap();
        let f = bootstrap_fit(&s, &Mask::all(5), 20, 7).unwrap();
        let ci = f.ci90.unwrap();
        assert_eq!((ci.eta, ci.c, ci.plateau), (0.0, 0.0, 0.0));
        assert_eq!(f.n_boot, 20);
        assert!(bootstrap_fit(&s, &Mask::all(5), 1, 7).is_err());
    }

    #[test]
    fn csv_row_layout() {
        let f = fit_power_law(&synthetic(5), &Mask::excluding(5, &[0])).unwrap();
        let row = f.csv_row();
        assert_eq!(row.split(',').count(), 8);
        assert!(row.ends_with(",0,1;2;3;4"));
    }
}
