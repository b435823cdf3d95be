//! Experiment configuration.
//!
//! Values are resolved in three layers: built-in defaults, then the TOML
//! file given by `--config`, then command-line flags. Relative paths inside
//! the file are taken relative to the file's directory; paths given as flags
//! are taken relative to the working directory.

use std::fs;
use std::path::{Path, PathBuf};

use bcanneal::evolve::{EvolveOptions, Integrator, Method};
use bcanneal::lindblad::DEFAULT_LAMB_CUTOFF;
use bcanneal::schedule::HARDWARE_MAX_POINTS;
use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Name of the bundled physical schedule table.
pub const BUILTIN_SYNTHETIC: &str = "builtin:synthetic-dw";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub problem: ProblemSection,
    pub schedule: ScheduleSection,
    pub bath: BathSection,
    pub sweep: SweepSection,
    pub evolve: EvolveSection,
    pub fit: FitSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Ferromagnetic crosstalk strength applied after loading.
    pub chi: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    /// Piecewise-linear beta schedule stopped at `s_bc`, then ramped.
    #[default]
    Piecewise,
    /// Exact beta schedule to `s = 1`.
    Beta,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    /// Path to an `s,A_rad_per_ns,B_rad_per_ns` table or [`BUILTIN_SYNTHETIC`].
    pub physical: String,
    pub kind: ProtocolKind,
    pub k: u32,
    pub s_c: f64,
    pub s_bc: f64,
    /// Ramp duration in ns.
    pub t_r: f64,
    pub max_points: usize,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            physical: BUILTIN_SYNTHETIC.into(),
            kind: ProtocolKind::Piecewise,
            k: 1,
            s_c: 0.9,
            s_bc: 1.0,
            t_r: 0.0,
            max_points: HARDWARE_MAX_POINTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BathSection {
    /// Dimensionless `η₀g²`.
    pub coupling: f64,
    pub temperature_mk: f64,
    pub lamb_shift: bool,
    /// Cutoff of the Lamb-shift integral in rad/ns.
    pub lamb_cutoff: f64,
}

impl Default for BathSection {
    fn default() -> Self {
        Self { coupling: 5e-4, temperature_mk: 13.5, lamb_shift: false, lamb_cutoff: DEFAULT_LAMB_CUTOFF }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Anneal times in ns.
    pub t_f: Vec<f64>,
    /// Falls back to `schedule.k` when empty.
    pub k: Vec<u32>,
    /// Falls back to `schedule.s_bc` when empty.
    pub s_bc: Vec<f64>,
    pub ice_sigma_h: f64,
    pub ice_sigma_j: f64,
    pub ice_samples: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { t_f: Vec::new(), k: Vec::new(), s_bc: Vec::new(), ice_sigma_h: 0.0, ice_sigma_j: 0.0, ice_samples: 1 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    #[default]
    Full,
    Pauli,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveSection {
    pub method: MethodName,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
    /// Instantaneous levels recorded in trajectories.
    pub levels: usize,
}

impl Default for EvolveSection {
    fn default() -> Self {
        let d = EvolveOptions::default();
        Self {
            method: MethodName::Full,
            rel_tol: d.rel_tol,
            abs_tol: d.abs_tol,
            max_step: d.max_step,
            max_steps: d.max_steps,
            levels: d.track_levels,
        }
    }
}

impl EvolveSection {
    pub fn options(&self) -> EvolveOptions {
        EvolveOptions {
            method: match self.method {
                MethodName::Full => Method::FullAme,
                MethodName::Pauli => Method::PauliPopulations,
            },
            integrator: Integrator::Auto,
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            max_steps: self.max_steps,
            track_levels: self.levels,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    /// Indices (in ascending `t_f` order) excluded from the fit.
    pub drop: Vec<usize>,
    /// Bootstrap resamples; `0` disables the bootstrap.
    pub n_boot: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), seed: 0, jobs: None }
    }
}

/// Flags shared by every subcommand. Each one overrides the matching
/// configuration value.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Ising problem file.
    #[arg(long, global = true, value_name = "PATH")]
    pub problem: Option<PathBuf>,
    /// Physical schedule table, or `builtin:synthetic-dw`.
    #[arg(long, global = true, value_name = "PATH")]
    pub schedule: Option<String>,
    /// Anneal times in ns, comma separated.
    #[arg(long = "tf", global = true, value_delimiter = ',', value_name = "LIST")]
    pub t_f: Option<Vec<f64>>,
    /// Boundary-cancellation orders, comma separated.
    #[arg(long, global = true, value_delimiter = ',', value_name = "LIST")]
    pub k: Option<Vec<u32>>,
    /// Stopping points `s_BC`, comma separated.
    #[arg(long = "sbc", global = true, value_delimiter = ',', value_name = "LIST")]
    pub s_bc: Option<Vec<f64>>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a configuration file and resolves its relative paths against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(p) = &cfg.problem.path {
            cfg.problem.path = Some(resolve(base, p));
        }
        if cfg.schedule.physical != BUILTIN_SYNTHETIC {
            cfg.schedule.physical = resolve(base, Path::new(&cfg.schedule.physical)).to_string_lossy().into_owned();
        }
        cfg.output.dir = resolve(base, &cfg.output.dir);
        Ok(cfg)
    }

    /// Defaults, then the `--config` file, then the remaining flags.
    pub fn resolve(flags: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match &flags.config {
            Some(path) => Self::load(path)?,
            None => Self::default(),
        };
        cfg.apply(flags);
        Ok(cfg)
    }

    pub fn apply(&mut self, flags: &Overrides) {
        if let Some(p) = &flags.problem {
            self.problem.path = Some(p.clone());
        }
        if let Some(s) = &flags.schedule {
            self.schedule.physical = s.clone();
        }
        if let Some(t) = &flags.t_f {
            self.sweep.t_f = t.clone();
        }
        if let Some(k) = &flags.k {
            self.sweep.k = k.clone();
        }
        if let Some(s) = &flags.s_bc {
            self.sweep.s_bc = s.clone();
        }
        if let Some(seed) = flags.seed {
            self.output.seed = seed;
        }
        if let Some(jobs) = flags.jobs {
            self.output.jobs = Some(jobs);
        }
        if let Some(out) = &flags.out {
            self.output.dir = out.clone();
        }
    }

    /// Hex SHA-256 of the resolved configuration serialized as TOML. The
    /// output directory and the pool size do not affect results and are
    /// left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.dir = PathBuf::new();
        c.output.jobs = None;
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }

    pub fn k_values(&self) -> Vec<u32> {
        if self.sweep.k.is_empty() {
            vec![self.schedule.k]
        } else {
            self.sweep.k.clone()
        }
    }

    pub fn s_bc_values(&self) -> Vec<f64> {
        if self.sweep.s_bc.is_empty() {
            vec![self.schedule.s_bc]
        } else {
            self.sweep.s_bc.clone()
        }
    }

    /// Checks value ranges and that every referenced file exists.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if let Some(p) = &self.problem.path {
            if !p.is_file() {
                return bad(format!("problem file {} does not exist", p.display()));
            }
        }
        if self.schedule.physical != BUILTIN_SYNTHETIC && !Path::new(&self.schedule.physical).is_file() {
            return bad(format!("schedule table {} does not exist", self.schedule.physical));
        }
        if !(self.problem.chi >= 0.0) {
            return bad(format!("problem.chi = {} must be non-negative", self.problem.chi));
        }
        let s = &self.schedule;
        if !(s.s_c > 0.0 && s.s_c < 1.0) {
            return bad(format!("schedule.s_c = {} must lie in (0, 1)", s.s_c));
        }
        if !(s.t_r >= 0.0 && s.t_r.is_finite()) {
            return bad(format!("schedule.t_r = {} must be non-negative", s.t_r));
        }
        if let Some(t) = self.sweep.t_f.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return bad(format!("anneal time {t} must be positive"));
        }
        if let Some(x) = self.s_bc_values().iter().find(|x| !(**x > 0.0 && **x <= 1.0)) {
            return bad(format!("s_BC = {x} must lie in (0, 1]"));
        }
        if s.kind != ProtocolKind::Piecewise && self.s_bc_values().iter().any(|&x| x != 1.0) {
            return bad("s_BC < 1 needs schedule.kind = \"piecewise\"".into());
        }
        let b = &self.bath;
        if !(b.coupling > 0.0 && b.temperature_mk > 0.0 && b.lamb_cutoff > 0.0) {
            return bad("bath coupling, temperature and Lamb cutoff must be positive".into());
        }
        let sw = &self.sweep;
        if !(sw.ice_sigma_h >= 0.0 && sw.ice_sigma_j >= 0.0) || sw.ice_samples == 0 {
            return bad("ICE widths must be non-negative and ice_samples at least 1".into());
        }
        let e = &self.evolve;
        if !(e.rel_tol > 0.0 && e.abs_tol > 0.0 && e.max_step > 0.0) || e.max_steps == 0 {
            return bad("evolve tolerances, max_step and max_steps must be positive".into());
        }
        if self.output.jobs == Some(0) {
            return bad("jobs must be at least 1".into());
        }
        Ok(())
    }

    /// Anneal times for commands that need at least one.
    pub fn t_f_values(&self) -> Result<&[f64], CliError> {
        if self.sweep.t_f.is_empty() {
            Err(CliError::Config("the list of anneal times is empty (set sweep.t_f or --tf)".into()))
        } else {
            Ok(&self.sweep.t_f)
        }
    }

    pub fn problem_path(&self) -> Result<&Path, CliError> {
        self.problem.path.as_deref().ok_or_else(|| CliError::Config("no problem file (set problem.path or --problem)".into()))
    }
}

/// The single element of a list, for commands that run one configuration.
pub fn single<T: Copy + std::fmt::Display>(values: &[T], what: &str) -> Result<T, CliError> {
    match values {
        [x] => Ok(*x),
        [] => Err(CliError::Config(format!("no value for {what}"))),
        _ => Err(CliError::Config(format!("this command takes a single {what}, got {}", values.len()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = Config::default();
        assert_eq!(Config::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(Config::from_toml("[bath]\ntemperature = 12\n"), Err(CliError::Config(_))));
    }

    #[test]
    fn flags_override_file_values() {
        let mut cfg = Config::from_toml("[sweep]\nt_f = [10.0, 20.0]\n[output]\nseed = 3\n").unwrap();
        cfg.apply(&Overrides { t_f: Some(vec![5.0]), ..Overrides::default() });
        assert_eq!(cfg.sweep.t_f, vec![5.0]);
        assert_eq!(cfg.output.seed, 3);
    }

    #[test]
    fn hash_tracks_resolved_values() {
        let a = Config::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.output.dir = PathBuf::from("elsewhere");
        b.output.jobs = Some(3);
        assert_eq!(a.hash(), b.hash());
        b.output.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn sweep_lists_fall_back_to_schedule_values() {
        let cfg = Config::from_toml("[schedule]\nk = 2\ns_bc = 0.5\n").unwrap();
        assert_eq!(cfg.k_values(), vec![2]);
        assert_eq!(cfg.s_bc_values(), vec![0.5]);
    }

    #[test]
    fn empty_anneal_times_are_a_config_error() {
        assert!(matches!(Config::default().t_f_values(), Err(CliError::Config(_))));
    }

    #[test]
    fn stopping_point_needs_piecewise_kind() {
        let cfg = Config::from_toml("[schedule]\nkind = \"beta\"\ns_bc = 0.6\n").unwrap();
        assert!(cfg.validate().is_err());
    }
}
