use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use bcanneal::analysis::{bootstrap_fit, fit_power_law, FitResult, Mask, ScalingSeries, MIN_FIT_POINTS};
use bcanneal::evolve::{adiabatic_error, run_anneal, run_anneal_ice, IceNoise};
use bcanneal::io::{csv_header_comment, load_physical_schedule, read_problem};
use bcanneal::lindblad::{freezing_point, rate_curves, BathSpec, Freezing, LambShift};
use bcanneal::model::{apply_crosstalk, IsingProblem};
use bcanneal::schedule::{build_piecewise, AnnealProtocol, ControlSchedule, PhysicalSchedule};
use bcanneal::spectral::{gap_profile, min_gap};
use bcanneal::verify::{run_suite, Suite};
use rayon::prelude::*;

use crate::config::{single, Config, ProtocolKind, BUILTIN_SYNTHETIC};
use crate::error::CliError;

pub const SWEEP_HEADER: &str = "t_f_ns,k,s_BC,P_GS,P_GS_ref,D_GS,seed,status";

/// Resolved configuration plus its hash, shared by all subcommands.
pub struct Context {
    pub config: Config,
    hash: String,
}

fn grid(points: usize) -> Result<Vec<f64>, CliError> {
    if points < 2 {
        return Err(CliError::Config(format!("a grid needs at least 2 points, got {points}")));
    }
    Ok((0..points).map(|i| i as f64 / (points - 1) as f64).collect())
}

fn warn_all(warnings: Vec<String>) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

impl Context {
    pub fn new(config: Config) -> Result<Self, CliError> {
        config.validate()?;
        let hash = config.hash();
        Ok(Self { config, hash })
    }

    /// Opens `name` in the output directory and writes the header comment.
    /// The resolved configuration is saved next to it as `config.toml`.
    fn create_csv(&self, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
        let dir = &self.config.output.dir;
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.toml"), self.config.to_toml())?;
        let path = dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "{}", csv_header_comment(env!("CARGO_PKG_VERSION"), &self.hash))?;
        Ok((path, w))
    }

    fn finish(path: &Path, mut w: BufWriter<File>) -> Result<(), CliError> {
        w.flush()?;
        eprintln!("wrote {}", path.display());
        Ok(())
    }

    fn problem(&self) -> Result<IsingProblem, CliError> {
        let problem = read_problem(self.config.problem_path()?).map_err(CliError::input)?;
        warn_all(problem.hardware_warnings());
        if self.config.problem.chi > 0.0 {
            Ok(apply_crosstalk(&problem, self.config.problem.chi)?)
        } else {
            Ok(problem)
        }
    }

    fn physical(&self) -> Result<PhysicalSchedule, CliError> {
        let name = &self.config.schedule.physical;
        let physical = if name == BUILTIN_SYNTHETIC {
            PhysicalSchedule::synthetic_dw()
        } else {
            load_physical_schedule(Path::new(name)).map_err(CliError::input)?
        };
        warn_all(physical.warnings());
        Ok(physical)
    }

    fn bath(&self) -> Result<BathSpec, CliError> {
        let b = &self.config.bath;
        let lamb = if b.lamb_shift { LambShift::On { cutoff: b.lamb_cutoff } } else { LambShift::Off };
        BathSpec::from_millikelvin(b.coupling, b.temperature_mk)
            .and_then(|bath| bath.with_lamb_shift(lamb))
            .map_err(CliError::input)
    }

    fn control(&self, k: u32, s_bc: f64, t_f: f64) -> Result<ControlSchedule, CliError> {
        let s = &self.config.schedule;
        match s.kind {
            ProtocolKind::Piecewise => build_piecewise(k, s.s_c, s_bc, t_f, s.t_r, s.max_points).map_err(CliError::input),
            ProtocolKind::Beta => Ok(ControlSchedule::beta(k)),
            ProtocolKind::Linear => Ok(ControlSchedule::linear()),
        }
    }

    fn protocol(&self, physical: &PhysicalSchedule, k: u32, s_bc: f64, t_f: f64) -> Result<AnnealProtocol, CliError> {
        Ok(AnnealProtocol::new(physical.clone(), self.control(k, s_bc, t_f)?, t_f)?)
    }
}

pub fn spectrum(ctx: &Context, levels: usize, points: usize) -> Result<(), CliError> {
    let problem = ctx.problem()?;
    let physical = ctx.physical()?;
    let profile = gap_profile(&problem, &physical, levels, &grid(points)?)?;
    let (s_star, gap) = min_gap(&profile)?;
    let (path, mut w) = ctx.create_csv("gaps.csv")?;
    profile.write_csv(&mut w)?;
    Context::finish(&path, w)?;
    println!("minimum gap {gap:.6} rad/ns at s* = {s_star:.4}");
    Ok(())
}

pub fn schedule_build(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let k = single(&cfg.k_values(), "k")?;
    let s_bc = single(&cfg.s_bc_values(), "s_BC")?;
    let t_f = match cfg.sweep.t_f.as_slice() {
        [] if cfg.schedule.t_r == 0.0 => 1.0,
        list => single(list, "anneal time")?,
    };
    let control = ctx.control(k, s_bc, t_f)?;
    let (path, mut w) = ctx.create_csv("schedule.csv")?;
    control.write_csv(&mut w)?;
    Context::finish(&path, w)?;
    println!("{} knots, ramp fraction {}", control.points().len(), control.ramp_fraction());
    Ok(())
}

pub fn rates(ctx: &Context, n_a: usize, points: usize) -> Result<(), CliError> {
    let t_f = single(ctx.config.t_f_values()?, "anneal time")?;
    let problem = ctx.problem()?;
    let physical = ctx.physical()?;
    let bath = ctx.bath()?;
    let curves = rate_curves(&problem, &physical, &bath, n_a, &grid(points)?)?;
    let (path, mut w) = ctx.create_csv("rates.csv")?;
    curves.write_csv(&mut w, 1.0 / t_f)?;
    Context::finish(&path, w)
}

pub fn freeze(ctx: &Context, n_a: usize) -> Result<(), CliError> {
    let t_fs = ctx.config.t_f_values()?;
    let problem = ctx.problem()?;
    let physical = ctx.physical()?;
    let bath = ctx.bath()?;
    let (path, mut w) = ctx.create_csv("freeze.csv")?;
    writeln!(w, "t_f_ns,s0")?;
    for &t_f in t_fs {
        let s0 = match freezing_point(&problem, &physical, &bath, t_f, n_a)? {
            Freezing::At(s) => s.to_string(),
            Freezing::NeverFreezes => "never".to_string(),
        };
        println!("t_f = {t_f} ns: s0 = {s0}");
        writeln!(w, "{t_f},{s0}")?;
    }
    Context::finish(&path, w)
}

pub fn evolve(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let t_f = single(cfg.t_f_values()?, "anneal time")?;
    let k = single(&cfg.k_values(), "k")?;
    let s_bc = single(&cfg.s_bc_values(), "s_BC")?;
    let problem = ctx.problem()?;
    let physical = ctx.physical()?;
    let protocol = ctx.protocol(&physical, k, s_bc, t_f)?;
    let out = run_anneal(&problem, &protocol, &ctx.bath()?, &cfg.evolve.options())?;
    let d_gs = adiabatic_error(out.p_gs, out.p_gs_ref)?;
    let (path, mut w) = ctx.create_csv("trajectory.csv")?;
    out.trajectory.write_csv(&mut w)?;
    Context::finish(&path, w)?;
    let tr = &out.trajectory;
    println!("P_GS = {}, P_GS_ref = {}, D_GS = {d_gs}", out.p_gs, out.p_gs_ref);
    println!(
        "{} accepted / {} rejected steps, max trace defect {:.2e}, min eigenvalue {:.2e}",
        tr.accepted_steps,
        tr.rejected_steps,
        tr.max_trace_defect(),
        tr.min_eigenvalue()
    );
    Ok(())
}

/// One sweep row: parameters plus `(P_GS, P*_GS)` or the failure message.
struct SweepRow {
    t_f: f64,
    k: u32,
    s_bc: f64,
    outcome: Result<(f64, f64), String>,
}

impl SweepRow {
    fn csv(&self, seed: u64) -> String {
        let (t_f, k, s_bc) = (self.t_f, self.k, self.s_bc);
        match &self.outcome {
            Ok((p, p_ref)) => format!("{t_f},{k},{s_bc},{p},{p_ref},{},{seed},ok", (p - p_ref).abs()),
            Err(msg) => format!("{t_f},{k},{s_bc},,,,{seed},failed: {}", msg.replace([',', '\n'], ";")),
        }
    }
}

/// Fits of one `(k, s_BC)` group, keyed by the printed parameter values.
struct GroupFit {
    k: String,
    s_bc: String,
    fit: FitResult,
}

fn write_fits(ctx: &Context, fits: &[GroupFit]) -> Result<(), CliError> {
    let (path, mut w) = ctx.create_csv("fit.csv")?;
    writeln!(w, "k,s_BC,{}", FitResult::CSV_HEADER)?;
    for g in fits {
        writeln!(w, "{},{},{}", g.k, g.s_bc, g.fit.csv_row())?;
    }
    Context::finish(&path, w)
}

/// Fits `series` under the configured mask, or returns a notice explaining
/// why the fit was skipped.
fn fit_group(ctx: &Context, series: &ScalingSeries) -> Result<Result<FitResult, String>, CliError> {
    let fit_cfg = &ctx.config.fit;
    let mask = Mask::excluding(series.len(), &fit_cfg.drop);
    if mask.len() < MIN_FIT_POINTS {
        return Ok(Err(format!("fit skipped: {} usable points, at least {MIN_FIT_POINTS} needed", mask.len())));
    }
    let fit = if fit_cfg.n_boot > 0 && series.replicates().is_some() {
        bootstrap_fit(series, &mask, fit_cfg.n_boot, ctx.config.output.seed)?
    } else {
        fit_power_law(series, &mask)?
    };
    Ok(Ok(fit))
}

fn report_fits(ctx: &Context, groups: Vec<(String, String, ScalingSeries)>) -> Result<(), CliError> {
    let mut fits = Vec::new();
    for (k, s_bc, series) in groups {
        match fit_group(ctx, &series)? {
            Ok(fit) => {
                println!("k = {k}, s_BC = {s_bc}: {fit}");
                fits.push(GroupFit { k, s_bc, fit });
            }
            Err(notice) => println!("k = {k}, s_BC = {s_bc}: {notice}"),
        }
    }
    if fits.is_empty() {
        return Ok(());
    }
    write_fits(ctx, &fits)
}

pub fn sweep(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let t_fs = cfg.t_f_values()?;
    let problem = ctx.problem()?;
    let physical = ctx.physical()?;
    let bath = ctx.bath()?;
    let opts = cfg.evolve.options();
    let ice = IceNoise { sigma_h: cfg.sweep.ice_sigma_h, sigma_j: cfg.sweep.ice_sigma_j, samples: cfg.sweep.ice_samples };
    let seed = cfg.output.seed;

    let params: Vec<(u32, f64, f64)> = cfg
        .k_values()
        .into_iter()
        .flat_map(|k| cfg.s_bc_values().into_iter().flat_map(move |s| t_fs.iter().map(move |&t| (k, s, t))))
        .collect();
    let rows: Vec<SweepRow> = params
        .par_iter()
        .map(|&(k, s_bc, t_f)| {
            let outcome = ctx
                .protocol(&physical, k, s_bc, t_f)
                .and_then(|protocol| Ok(run_anneal_ice(&problem, &protocol, &bath, &opts, ice, seed)?))
                .map_err(|e| e.to_string());
            SweepRow { t_f, k, s_bc, outcome }
        })
        .collect();

    let (path, mut w) = ctx.create_csv("sweep.csv")?;
    writeln!(w, "{SWEEP_HEADER}")?;
    for row in &rows {
        writeln!(w, "{}", row.csv(seed))?;
    }
    Context::finish(&path, w)?;

    let mut groups = Vec::new();
    for chunk in rows.chunks(t_fs.len()) {
        let ok: Vec<(f64, f64)> = chunk.iter().filter_map(|r| r.outcome.as_ref().ok().map(|&(p, _)| (r.t_f, p))).collect();
        let (t, p): (Vec<f64>, Vec<f64>) = ok.into_iter().unzip();
        let label = (chunk[0].k.to_string(), chunk[0].s_bc.to_string());
        if t.len() < MIN_FIT_POINTS {
            println!("k = {}, s_BC = {}: fit skipped: {} points, at least {MIN_FIT_POINTS} needed", label.0, label.1, t.len());
            continue;
        }
        groups.push((label.0, label.1, ScalingSeries::from_values(&t, &p)?));
    }
    report_fits(ctx, groups)?;

    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    if failed > 0 {
        return Err(CliError::Numerical(format!("{failed} of {} sweep points failed (see sweep.csv)", rows.len())));
    }
    Ok(())
}

/// Points of one `(k, s_BC)` group read from a sweep CSV, in file order.
type Group = ((String, String), Vec<(f64, f64)>);

fn read_sweep_csv(path: &Path) -> Result<Vec<Group>, CliError> {
    let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let t_col = column("t_f_ns").ok_or_else(|| bad("missing column t_f_ns".into()))?;
    let p_col = column("P_GS").ok_or_else(|| bad("missing column P_GS".into()))?;
    let (k_col, s_col, status_col) = (column("k"), column("s_BC"), column("status"));

    let mut groups: Vec<Group> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if status_col.and_then(|c| rec.get(c)).is_some_and(|s| s != "ok") {
            continue;
        }
        let number = |c: usize| rec.get(c).and_then(|x| x.parse::<f64>().ok());
        let (Some(t), Some(p)) = (number(t_col), number(p_col)) else {
            return Err(bad(format!("record {}: bad t_f_ns or P_GS", i + 1)));
        };
        let text = |c: Option<usize>| c.and_then(|c| rec.get(c)).unwrap_or("").to_string();
        let key = (text(k_col), text(s_col));
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, pts)) => pts.push((t, p)),
            None => groups.push((key, vec![(t, p)])),
        }
    }
    Ok(groups)
}

/// Builds a series from `(t_f, P_GS)` pairs. Repeated anneal times become
/// replicates; every time must then be repeated.
fn series_from_points(mut pts: Vec<(f64, f64)>) -> Result<ScalingSeries, CliError> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut times: Vec<f64> = Vec::new();
    let mut reps: Vec<Vec<f64>> = Vec::new();
    for (t, p) in pts {
        if times.last() == Some(&t) {
            reps.last_mut().expect("times and reps grow together").push(p);
        } else {
            times.push(t);
            reps.push(vec![p]);
        }
    }
    if reps.iter().all(|r| r.len() == 1) {
        let p: Vec<f64> = reps.into_iter().map(|r| r[0]).collect();
        Ok(ScalingSeries::from_values(&times, &p)?)
    } else if reps.iter().all(|r| r.len() >= 2) {
        Ok(ScalingSeries::from_replicates(&times, reps)?)
    } else {
        Err(CliError::Config("some anneal times have replicates and some do not".into()))
    }
}

pub fn fit(ctx: &Context, input: &Path) -> Result<(), CliError> {
    let groups = read_sweep_csv(input)?;
    if groups.is_empty() {
        return Err(CliError::Config(format!("{}: no usable rows", input.display())));
    }
    if ctx.config.fit.n_boot > 0 && groups.iter().all(|(_, pts)| pts.windows(2).all(|w| w[0].0 != w[1].0)) {
        eprintln!("notice: no repeated anneal times, bootstrap disabled");
    }
    let series = groups
        .into_iter()
        .map(|((k, s), pts)| Ok((k, s, series_from_points(pts)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    report_fits(ctx, series)
}

pub fn verify(names: &[String]) -> Result<(), CliError> {
    let suites: Vec<Suite> = if names.is_empty() {
        Suite::ALL.to_vec()
    } else {
        names.iter().map(|n| n.parse::<Suite>().map_err(CliError::input)).collect::<Result<_, _>>()?
    };
    let mut failed = Vec::new();
    for suite in suites {
        let report = run_suite(suite);
        print!("{report}");
        if !report.passed() {
            failed.push(suite.name());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(format!("suites {} failed", failed.join(", "))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_times_become_replicates() {
        let pts: Vec<(f64, f64)> = (0..5).flat_map(|i| [(10.0 * (i + 1) as f64, 0.5), (10.0 * (i + 1) as f64, 0.6)]).collect();
        let s = series_from_points(pts).unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s.replicates().unwrap()[0], vec![0.5, 0.6]);
    }

    #[test]
    fn mixed_replicate_counts_are_rejected() {
        let pts = vec![(1.0, 0.5), (1.0, 0.6), (2.0, 0.7)];
        assert!(matches!(series_from_points(pts), Err(CliError::Config(_))));
    }

    #[test]
    fn failed_rows_keep_the_column_count() {
        let row = SweepRow { t_f: 10.0, k: 1, s_bc: 0.5, outcome: Err("a, b\nc".into()) };
        let line = row.csv(7);
        assert_eq!(line.split(',').count(), SWEEP_HEADER.split(',').count());
        assert!(line.ends_with("failed: a; b;c"));
    }

    #[test]
    fn grid_needs_two_points() {
        assert!(grid(1).is_err());
        assert_eq!(grid(3).unwrap(), vec![0.0, 0.5, 1.0]);
    }
}
