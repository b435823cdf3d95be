//! Control schedules `s(τ)` and physical schedules `A(s)`, `B(s)`.
//!
//! A [`ControlSchedule`] is a piecewise-linear map from normalized time `τ`
//! to the schedule coordinate `s`. The normalization time unit is stored on
//! the [`AnnealProtocol`]; when the schedule carries a terminal ramp its last
//! segment occupies `τ ∈ [τ_end − δ, τ_end]` with `δ = t_r / t_f`.

use std::io::Write;

use crate::error::{Error, Result};

/// Consecutive knots closer than this in `τ` are rejected.
pub const KNOT_COLLISION_TOL: f64 = 1e-12;

/// Default separation point of the piecewise beta construction.
pub const DEFAULT_S_C: f64 = 0.9;

/// Point budget of the hardware piecewise-linear schedule.
pub const HARDWARE_MAX_POINTS: usize = 12;

const RANGE_SLACK: f64 = 1e-12;

/// `β_k(τ) = 1 − (1 − τ)^{k+1}`, the regularized incomplete beta function
/// `B_τ(1, k+1) / B_1(1, k+1)`. It has exactly `k` vanishing derivatives at
/// `τ = 1`.
pub fn beta_control(k: u32, tau: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Domain(format!("beta_control: tau = {tau} outside [0, 1]")));
    }
    Ok(1.0 - (1.0 - tau).powi(k as i32 + 1))
}

/// Inverse of [`beta_control`]: `τ = 1 − (1 − s)^{1/(k+1)}`.
pub fn inverse_beta(k: u32, s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("inverse_beta: s = {s} outside [0, 1]")));
    }
    if k == 0 {
        return Ok(s);
    }
    Ok(1.0 - (1.0 - s).powf(1.0 / (k as f64 + 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleKind {
    Linear,
    /// Exact beta schedule, evaluated in closed form.
    Beta { k: u32 },
    /// Hardware-style piecewise approximation of a beta schedule terminated
    /// at `s_bc`.
    PiecewiseBeta { k: u32, s_c: f64, s_bc: f64 },
    /// Linear segment of `t0`, pause of `tp` at `s_bc`, then the ramp.
    PauseRamp { s_bc: f64, t0: f64, tp: f64 },
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    points: Vec<(f64, f64)>,
    kind: ScheduleKind,
    ramp_fraction: f64,
}

impl ControlSchedule {
    /// Validates the invariants: starts at `(0, 0)`, `τ` strictly increasing,
    /// `s` non-decreasing within `[0, 1]`. The last point has `s = 1` unless
    /// the schedule has no ramp, in which case readout is an instantaneous
    /// quench from wherever the schedule stops.
    pub fn new(points: Vec<(f64, f64)>, kind: ScheduleKind, ramp_fraction: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Schedule("need at least two points".into()));
        }
        if points[0] != (0.0, 0.0) {
            return Err(Error::Schedule(format!("first point must be (0, 0), got {:?}", points[0])));
        }
        for w in points.windows(2) {
            let ((t0, s0), (t1, s1)) = (w[0], w[1]);
            if !(t1 - t0 > KNOT_COLLISION_TOL) {
                return Err(Error::Schedule(format!("tau knots collide or decrease: {t0} -> {t1}")));
            }
            if s1 < s0 {
                return Err(Error::Schedule(format!("s decreases: {s0} -> {s1}")));
            }
        }
        if points.iter().any(|&(t, s)| !t.is_finite() || !(0.0..=1.0).contains(&s)) {
            return Err(Error::Schedule("s values must lie in [0, 1]".into()));
        }
        if !(ramp_fraction >= 0.0) {
            return Err(Error::Schedule(format!("negative ramp fraction {ramp_fraction}")));
        }
        let (t_last, s_last) = *points.last().unwrap();
        if ramp_fraction > 0.0 {
            if s_last != 1.0 {
                return Err(Error::Schedule("a ramped schedule must end at s = 1".into()));
            }
            let t_prev = points[points.len() - 2].0;
            if ((t_last - t_prev) - ramp_fraction).abs() > 1e-9 * t_last.max(1.0) {
                return Err(Error::Schedule("ramp fraction does not match the last segment".into()));
            }
        } else if matches!(kind, ScheduleKind::Linear | ScheduleKind::Beta { .. } | ScheduleKind::Custom)
            && s_last != 1.0
        {
            return Err(Error::Schedule("schedule must end at s = 1".into()));
        }
        Ok(Self { points, kind, ramp_fraction })
    }

    /// `s(τ) = τ` on `[0, 1]`.
    pub fn linear() -> Self {
        Self { points: vec![(0.0, 0.0), (1.0, 1.0)], kind: ScheduleKind::Linear, ramp_fraction: 0.0 }
    }

    /// Exact `β_k` schedule. The stored points are a 65-knot sampling used
    /// only for export; evaluation uses the closed form.
    pub fn beta(k: u32) -> Self {
        let points = (0..=64)
            .map(|j| {
                let t = j as f64 / 64.0;
                (t, 1.0 - (1.0 - t).powi(k as i32 + 1))
            })
            .collect();
        Self { points, kind: ScheduleKind::Beta { k }, ramp_fraction: 0.0 }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn ramp_fraction(&self) -> f64 {
        self.ramp_fraction
    }

    pub fn tau_end(&self) -> f64 {
        self.points.last().unwrap().0
    }

    /// `τ` at which the ramp starts (equal to [`tau_end`](Self::tau_end)
    /// when there is no ramp).
    pub fn ramp_start(&self) -> f64 {
        if self.ramp_fraction > 0.0 {
            self.points[self.points.len() - 2].0
        } else {
            self.tau_end()
        }
    }

    /// `s` reached at the end of the non-ramp part of the schedule.
    pub fn s_at_ramp_start(&self) -> f64 {
        if self.ramp_fraction > 0.0 {
            self.points[self.points.len() - 2].1
        } else {
            self.points.last().unwrap().1
        }
    }

    /// Knot positions where `ds/dτ` may jump.
    pub fn knots(&self) -> Vec<f64> {
        match self.kind {
            ScheduleKind::Linear | ScheduleKind::Beta { .. } => vec![0.0, self.tau_end()],
            _ => self.points.iter().map(|p| p.0).collect(),
        }
    }

    pub fn check_hardware(&self, max_points: usize) -> Result<()> {
        if self.points.len() > max_points {
            return Err(Error::Schedule(format!(
                "{} points exceed the hardware limit of {max_points}",
                self.points.len()
            )));
        }
        Ok(())
    }

    pub fn eval(&self, tau: f64) -> Result<f64> {
        let end = self.tau_end();
        if !(tau >= -RANGE_SLACK && tau <= end + RANGE_SLACK) {
            return Err(Error::Domain(format!("tau = {tau} outside [0, {end}]")));
        }
        let tau = tau.clamp(0.0, end);
        match self.kind {
            ScheduleKind::Linear => return Ok(tau),
            ScheduleKind::Beta { k } => return beta_control(k, tau),
            _ => {}
        }
        let idx = self.points.partition_point(|p| p.0 <= tau);
        if idx == 0 {
            return Ok(self.points[0].1);
        }
        if idx >= self.points.len() {
            return Ok(self.points.last().unwrap().1);
        }
        let (t0, s0) = self.points[idx - 1];
        let (t1, s1) = self.points[idx];
        Ok(s0 + (s1 - s0) * (tau - t0) / (t1 - t0))
    }

    /// CSV with header `tau,s`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "tau,s")?;
        for &(t, s) in &self.points {
            writeln!(w, "{t},{s}")?;
        }
        Ok(())
    }
}

/// Twelve-point piecewise-linear approximation of `β_k` terminated at `s_bc`
/// and followed by a ramp of duration `t_r` to `s = 1`.
///
/// Knots 0..=10: `(0,0)`; four linear partitions of `[0, s_c]`; `s_c`; four
/// halvings of the distance to 1; `(1,1)`. Every `τ_j = τ*(s_j)` with `τ*`
/// the inverse beta schedule, then `s_j → s_bc s_j`. Knot 11 is
/// `(1 + t_r/t_f, 1)`; it is omitted when `t_r = 0`.
pub fn build_piecewise(
    k: u32,
    s_c: f64,
    s_bc: f64,
    t_f: f64,
    t_r: f64,
    hardware_max_points: usize,
) -> Result<ControlSchedule> {
    if !(s_c > 0.0 && s_c < 1.0) {
        return Err(Error::Domain(format!("s_c = {s_c} outside (0, 1)")));
    }
    if !(s_bc > 0.0 && s_bc <= 1.0) {
        return Err(Error::Domain(format!("s_bc = {s_bc} outside (0, 1]")));
    }
    if !(t_f > 0.0) || !(t_r >= 0.0) {
        return Err(Error::Domain(format!("need t_f > 0 and t_r >= 0 (t_f = {t_f}, t_r = {t_r})")));
    }
    let mut s_base = Vec::with_capacity(11);
    s_base.push(0.0);
    for j in 1..=4 {
        s_base.push(j as f64 * s_c / 5.0);
    }
    s_base.push(s_c);
    let mut s = s_c;
    for _ in 6..=9 {
        s = 1.0 - (1.0 - s) / 2.0;
        s_base.push(s);
    }
    s_base.push(1.0);

    let mut points = Vec::with_capacity(12);
    for &sj in &s_base {
        points.push((inverse_beta(k, sj)?, s_bc * sj));
    }
    let delta = t_r / t_f;
    if delta > 0.0 {
        points.push((points[10].0 + delta, 1.0));
    }
    if points.len() > hardware_max_points {
        return Err(Error::Schedule(format!(
            "piecewise construction needs {} points but the hardware allows {hardware_max_points}",
            points.len()
        )));
    }
    ControlSchedule::new(points, ScheduleKind::PiecewiseBeta { k, s_c, s_bc }, delta)
}

/// Total duration `t_a = t0 + tp + tr` of a pause-ramp protocol.
pub fn pause_ramp_duration(t0: f64, tp: f64, tr: f64) -> f64 {
    t0 + tp + tr
}

/// Pause-ramp schedule normalized by `t_a = t0 + tp + tr`: linear to `s_bc`
/// over `t0`, hold for `tp`, ramp to 1 over `tr`. Zero-length segments are
/// dropped.
pub fn pause_ramp_schedule(s_bc: f64, t0: f64, tp: f64, tr: f64) -> Result<ControlSchedule> {
    if !(s_bc > 0.0 && s_bc < 1.0) {
        return Err(Error::Domain(format!("s_bc = {s_bc} outside (0, 1)")));
    }
    if !(t0 > 0.0) || !(tp >= 0.0) || !(tr >= 0.0) {
        return Err(Error::Domain("need t0 > 0, tp >= 0, tr >= 0".into()));
    }
    if tp == 0.0 && tr == 0.0 {
        return Err(Error::Domain("pause and ramp cannot both be empty".into()));
    }
    let ta = pause_ramp_duration(t0, tp, tr);
    let mut points = vec![(0.0, 0.0), (t0 / ta, s_bc)];
    if tp > 0.0 {
        let t2 = if tr > 0.0 { (t0 + tp) / ta } else { 1.0 };
        points.push((t2, s_bc));
    }
    if tr > 0.0 {
        points.push((1.0, 1.0));
    }
    ControlSchedule::new(points, ScheduleKind::PauseRamp { s_bc, t0, tp }, tr / ta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleSample {
    pub s: f64,
    /// Transverse envelope, rad/ns.
    pub a: f64,
    /// Longitudinal envelope, rad/ns.
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    /// Fritsch–Carlson monotone piecewise cubic.
    #[default]
    MonotoneCubic,
    Linear,
}

/// Tabulated physical schedules `A(s)`, `B(s)` in rad/ns.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalSchedule {
    s: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    slope_a: Vec<f64>,
    slope_b: Vec<f64>,
    interpolation: Interpolation,
}

impl PhysicalSchedule {
    pub fn new(samples: Vec<ScheduleSample>) -> Result<Self> {
        Self::with_interpolation(samples, Interpolation::default())
    }

    pub fn with_interpolation(samples: Vec<ScheduleSample>, interpolation: Interpolation) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Schedule("physical schedule needs at least two rows".into()));
        }
        if samples[0].s != 0.0 || samples.last().unwrap().s != 1.0 {
            return Err(Error::Schedule("physical schedule must span s = 0 to s = 1".into()));
        }
        if samples.windows(2).any(|w| !(w[1].s > w[0].s)) {
            return Err(Error::Schedule("physical schedule s values must be strictly increasing".into()));
        }
        if samples.iter().any(|r| !(r.a >= 0.0 && r.b >= 0.0 && r.a.is_finite() && r.b.is_finite())) {
            return Err(Error::Schedule("A and B must be finite and non-negative".into()));
        }
        let s: Vec<f64> = samples.iter().map(|r| r.s).collect();
        let a: Vec<f64> = samples.iter().map(|r| r.a).collect();
        let b: Vec<f64> = samples.iter().map(|r| r.b).collect();
        let slope_a = fritsch_carlson_slopes(&s, &a);
        let slope_b = fritsch_carlson_slopes(&s, &b);
        Ok(Self { s, a, b, slope_a, slope_b, interpolation })
    }

    /// Samples `f(s) -> (A, B)` on `rows` evenly spaced points.
    pub fn from_fn(rows: usize, f: impl Fn(f64) -> (f64, f64)) -> Result<Self> {
        let rows = rows.max(2);
        let samples = (0..rows)
            .map(|j| {
                let s = j as f64 / (rows - 1) as f64;
                let (a, b) = f(s);
                ScheduleSample { s, a, b }
            })
            .collect();
        Self::new(samples)
    }

    /// A synthetic table shaped like a D-Wave 2000Q schedule: `A` falls
    /// from 30 rad/ns to ~0 by `s ≈ 0.7`, `B` rises to 60 rad/ns.
    /// Not hardware data.
    pub fn synthetic_dw() -> Self {
        let tail = (-9.2_f64).exp();
        Self::from_fn(101, |s| {
            let a = 30.0 * (((-9.2 * s * s).exp() - tail) / (1.0 - tail)).max(0.0);
            let b = 0.3 + 59.7 * s.powf(1.15);
            (a, b)
        })
        .expect("synthetic table is valid")
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn set_interpolation(&mut self, interpolation: Interpolation) {
        self.interpolation = interpolation;
    }

    pub fn samples(&self) -> impl Iterator<Item = ScheduleSample> + '_ {
        (0..self.s.len()).map(|i| ScheduleSample { s: self.s[i], a: self.a[i], b: self.b[i] })
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// Monotonicity wobbles in the table (`A` should not increase, `B`
    /// should not decrease). Reported, not rejected.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for i in 1..self.s.len() {
            if self.a[i] > self.a[i - 1] {
                out.push(format!("A increases between s = {} and s = {}", self.s[i - 1], self.s[i]));
            }
            if self.b[i] < self.b[i - 1] {
                out.push(format!("B decreases between s = {} and s = {}", self.s[i - 1], self.s[i]));
            }
        }
        out
    }

    /// `(A(s), B(s))` in rad/ns.
    pub fn eval(&self, s: f64) -> Result<(f64, f64)> {
        if !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&s) {
            return Err(Error::Domain(format!("s = {s} outside [0, 1]")));
        }
        let s = s.clamp(0.0, 1.0);
        let k = (self.s.partition_point(|&x| x <= s)).clamp(1, self.s.len() - 1) - 1;
        let (x0, x1) = (self.s[k], self.s[k + 1]);
        let h = x1 - x0;
        let t = (s - x0) / h;
        let value = |y: &[f64], m: &[f64]| match self.interpolation {
            Interpolation::Linear => y[k] + (y[k + 1] - y[k]) * t,
            Interpolation::MonotoneCubic => {
                let t2 = t * t;
                let t3 = t2 * t;
                (2.0 * t3 - 3.0 * t2 + 1.0) * y[k]
                    + (t3 - 2.0 * t2 + t) * h * m[k]
                    + (-2.0 * t3 + 3.0 * t2) * y[k + 1]
                    + (t3 - t2) * h * m[k + 1]
            }
        };
        Ok((value(&self.a, &self.slope_a).max(0.0), value(&self.b, &self.slope_b).max(0.0)))
    }

    /// CSV with header `s,A_rad_per_ns,B_rad_per_ns`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "s,A_rad_per_ns,B_rad_per_ns")?;
        for r in self.samples() {
            writeln!(w, "{},{},{}", r.s, r.a, r.b)?;
        }
        Ok(())
    }
}

fn fritsch_carlson_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / (x[k + 1] - x[k])).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut m = vec![0.0; n];
    m[0] = delta[0];
    m[n - 1] = delta[n - 2];
    for k in 1..n - 1 {
        m[k] = if delta[k - 1] * delta[k] <= 0.0 { 0.0 } else { 0.5 * (delta[k - 1] + delta[k]) };
    }
    for k in 0..n - 1 {
        if delta[k] == 0.0 {
            m[k] = 0.0;
            m[k + 1] = 0.0;
            continue;
        }
        let alpha = m[k] / delta[k];
        let beta = m[k + 1] / delta[k];
        if alpha < 0.0 {
            m[k] = 0.0;
        }
        if beta < 0.0 {
            m[k + 1] = 0.0;
        }
        let r = alpha * alpha + beta * beta;
        if r > 9.0 {
            let t = 3.0 / r.sqrt();
            m[k] = t * alpha * delta[k];
            m[k + 1] = t * beta * delta[k];
        }
    }
    m
}

/// Physical schedule, control schedule and time unit of one anneal.
///
/// `t_f` is the time that normalizes `τ`: physical time is `t = τ t_f`, and
/// the total duration is `t_f τ_end` (`t_f + t_r` for a ramped schedule).
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealProtocol {
    pub physical: PhysicalSchedule,
    pub control: ControlSchedule,
    t_f: f64,
}

impl AnnealProtocol {
    pub fn new(physical: PhysicalSchedule, control: ControlSchedule, t_f: f64) -> Result<Self> {
        if !(t_f > 0.0 && t_f.is_finite()) {
            return Err(Error::Domain(format!("t_f = {t_f} must be positive")));
        }
        Ok(Self { physical, control, t_f })
    }

    /// Anneal time in ns.
    pub fn t_f(&self) -> f64 {
        self.t_f
    }

    /// Ramp duration in ns.
    pub fn t_r(&self) -> f64 {
        self.control.ramp_fraction() * self.t_f
    }

    /// Total duration in ns.
    pub fn duration(&self) -> f64 {
        self.t_f * self.control.tau_end()
    }

    /// `s(τ)`.
    pub fn s_at(&self, tau: f64) -> Result<f64> {
        self.control.eval(tau)
    }

    /// `(s, A, B)` at physical time `t` (ns).
    pub fn eval(&self, t: f64) -> Result<(f64, f64, f64)> {
        let total = self.duration();
        if !(t >= -RANGE_SLACK * total && t <= total * (1.0 + RANGE_SLACK)) {
            return Err(Error::Domain(format!("t = {t} ns outside [0, {total}]")));
        }
        let s = self.control.eval(t / self.t_f)?;
        let (a, b) = self.physical.eval(s)?;
        Ok((s, a, b))
    }
}

/// `eval_protocol(p, t) -> (s, A, B)`.
pub fn eval_protocol(p: &AnnealProtocol, t: f64) -> Result<(f64, f64, f64)> {
    p.eval(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_row_table() -> PhysicalSchedule {
        PhysicalSchedule::new(vec![
            ScheduleSample { s: 0.0, a: 10.0, b: 0.0 },
            ScheduleSample { s: 1.0, a: 0.0, b: 10.0 },
        ])
        .unwrap()
    }

    #[test]
    fn beta_control_examples() {
        assert_eq!(beta_control(0, 0.5).unwrap(), 0.5);
        assert_eq!(beta_control(1, 0.5).unwrap(), 0.75);
        assert_eq!(beta_control(3, 1.0).unwrap(), 1.0);
        assert!(beta_control(1, 1.5).is_err());
        assert!(beta_control(1, -0.1).is_err());
    }

    #[test]
    fn beta_flat_at_end() {
        // one-sided backward differences at τ = 1 of order j ≤ k vanish
        let k = 3;
        let h = 1e-3;
        let f = |t: f64| beta_control(k, t).unwrap();
        let d1 = (f(1.0) - f(1.0 - h)) / h;
        let d2 = (f(1.0) - 2.0 * f(1.0 - h) + f(1.0 - 2.0 * h)) / (h * h);
        let d3 = (f(1.0) - 3.0 * f(1.0 - h) + 3.0 * f(1.0 - 2.0 * h) - f(1.0 - 3.0 * h)) / (h * h * h);
        assert!(d1.abs() < 1e-8, "{d1}");
        assert!(d2.abs() < 1e-4, "{d2}");
        assert!(d3.abs() < 0.1, "{d3}");
        // k = 0 keeps a unit slope
        assert_abs_diff_eq!((beta_control(0, 1.0).unwrap() - beta_control(0, 1.0 - h).unwrap()) / h, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn inverse_beta_examples() {
        assert_abs_diff_eq!(inverse_beta(1, 0.75).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(inverse_beta(1, 0.9).unwrap(), 1.0 - 0.1_f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(inverse_beta(1, 0.9).unwrap(), 0.683772, epsilon = 1e-6);
        assert_eq!(inverse_beta(0, 0.3).unwrap(), 0.3);
        assert!(inverse_beta(2, 1.01).is_err());
    }

    #[test]
    fn piecewise_golden_k1() {
        let sched = build_piecewise(1, 0.9, 1.0, 1.0, 0.0, 12).unwrap();
        let expected_s = [0.0, 0.18, 0.36, 0.54, 0.72, 0.9, 0.95, 0.975, 0.9875, 0.99375, 1.0];
        assert_eq!(sched.points().len(), 11);
        for (p, s) in sched.points().iter().zip(expected_s) {
            assert_abs_diff_eq!(p.1, s, epsilon = 1e-12);
            assert_abs_diff_eq!(p.0, 1.0 - (1.0 - s).sqrt(), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(sched.points()[5].0, 0.683772, epsilon = 1e-6);
    }

    #[test]
    fn piecewise_k0_is_identity() {
        let sched = build_piecewise(0, 0.9, 1.0, 1.0, 0.0, 12).unwrap();
        for &(t, s) in sched.points() {
            assert_abs_diff_eq!(t, s, epsilon = 1e-15);
        }
    }

    #[test]
    fn piecewise_rescaled_with_ramp() {
        let base = build_piecewise(1, 0.9, 1.0, 1e5, 0.0, 12).unwrap();
        let sched = build_piecewise(1, 0.9, 0.5, 1e5, 1e3, 12).unwrap();
        assert_eq!(sched.points().len(), 12);
        for (p, q) in sched.points()[..11].iter().zip(base.points()) {
            assert_abs_diff_eq!(p.1, 0.5 * q.1, epsilon = 1e-15);
            assert_eq!(p.0, q.0);
        }
        let last = sched.points()[11];
        assert_abs_diff_eq!(last.0, sched.points()[10].0 + 0.01, epsilon = 1e-15);
        assert_eq!(last.1, 1.0);
        assert_abs_diff_eq!(sched.ramp_fraction(), 0.01, epsilon = 1e-15);
        assert_eq!(sched.ramp_start(), 1.0);
        assert_eq!(sched.s_at_ramp_start(), 0.5);
    }

    #[test]
    fn piecewise_errors() {
        assert!(build_piecewise(1, 0.9, 0.5, 1.0, 1.0, 11).is_err());
        assert!(build_piecewise(1, 1.2, 0.5, 1.0, 0.0, 12).is_err());
        assert!(build_piecewise(1, 0.9, 0.0, 1.0, 0.0, 12).is_err());
        // ramp of 1e-13 relative to t_f collides with τ_10
        assert!(build_piecewise(1, 0.9, 0.5, 1.0, 1e-13, 12).is_err());
    }

    #[test]
    fn pause_ramp_examples() {
        let s = pause_ramp_schedule(0.5, 1000.0, 8000.0, 1000.0).unwrap();
        let taus: Vec<f64> = s.points().iter().map(|p| p.0).collect();
        for (t, e) in taus.iter().zip([0.0, 0.1, 0.9, 1.0]) {
            assert_abs_diff_eq!(*t, e, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(s.ramp_fraction(), 0.1, epsilon = 1e-15);

        let s = pause_ramp_schedule(0.46, 5000.0, 14000.0, 1000.0).unwrap();
        let taus: Vec<f64> = s.points().iter().map(|p| p.0).collect();
        for (t, e) in taus.iter().zip([0.0, 0.25, 0.95, 1.0]) {
            assert_abs_diff_eq!(*t, e, epsilon = 1e-15);
        }

        let s = pause_ramp_schedule(0.5, 1000.0, 0.0, 1000.0).unwrap();
        assert_eq!(s.points().len(), 3);
        assert!(pause_ramp_schedule(0.5, 1000.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn eval_protocol_examples() {
        let p = AnnealProtocol::new(two_row_table(), ControlSchedule::linear(), 100.0).unwrap();
        assert_eq!(eval_protocol(&p, 0.0).unwrap(), (0.0, 10.0, 0.0));
        let (s, a, b) = eval_protocol(&p, 50.0).unwrap();
        assert_abs_diff_eq!(s, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(a, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b, 5.0, epsilon = 1e-12);
        assert!(eval_protocol(&p, 101.0).is_err());

        let p = AnnealProtocol::new(two_row_table(), ControlSchedule::beta(1), 100.0).unwrap();
        let (s, a, b) = eval_protocol(&p, 50.0).unwrap();
        assert_abs_diff_eq!(s, 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(a, 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(b, 7.5, epsilon = 1e-12);
    }

    #[test]
    fn monotone_cubic_does_not_overshoot() {
        let table = PhysicalSchedule::new(vec![
            ScheduleSample { s: 0.0, a: 30.0, b: 0.0 },
            ScheduleSample { s: 0.3, a: 29.0, b: 1.0 },
            ScheduleSample { s: 0.5, a: 1.0, b: 20.0 },
            ScheduleSample { s: 0.6, a: 0.0, b: 21.0 },
            ScheduleSample { s: 1.0, a: 0.0, b: 60.0 },
        ])
        .unwrap();
        let mut prev = table.eval(0.0).unwrap();
        for j in 1..=1000 {
            let cur = table.eval(j as f64 / 1000.0).unwrap();
            assert!(cur.0 <= prev.0 + 1e-12 && cur.1 >= prev.1 - 1e-12);
            prev = cur;
        }
        // flat tail stays exactly zero
        assert_eq!(table.eval(0.8).unwrap().0, 0.0);
    }

    #[test]
    fn physical_schedule_validation() {
        let bad = vec![ScheduleSample { s: 0.0, a: 1.0, b: 0.0 }, ScheduleSample { s: 0.9, a: 0.0, b: 1.0 }];
        assert!(PhysicalSchedule::new(bad).is_err());
        let wobble = PhysicalSchedule::new(vec![
            ScheduleSample { s: 0.0, a: 1.0, b: 0.0 },
            ScheduleSample { s: 0.5, a: 1.1, b: 0.5 },
            ScheduleSample { s: 1.0, a: 0.0, b: 1.0 },
        ])
        .unwrap();
        assert_eq!(wobble.warnings().len(), 1);
        let synth = PhysicalSchedule::synthetic_dw();
        assert!(synth.warnings().is_empty());
        let (a0, b0) = synth.eval(0.0).unwrap();
        let (a1, b1) = synth.eval(1.0).unwrap();
        assert_abs_diff_eq!(a0, 30.0, epsilon = 1e-9);
        assert!(a1.abs() < 1e-9 && (b1 - 60.0).abs() < 1e-9 && b0 < 1.0);
        assert!(synth.eval(0.7).unwrap().0 < 0.02 * a0);
    }
}
