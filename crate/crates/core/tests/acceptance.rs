//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any gating criterion fails. The gadget line is reported but
//! never gates, because the gadget fields and the schedule table are
//! reconstructions.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use bcanneal::analysis::{
    bootstrap_fit, fit_power_law, nts, theoretical_eta, Mask, Regime, ScalingSeries,
};
use bcanneal::io::read_problem;
use bcanneal::lindblad::Freezing;
use bcanneal::schedule::{build_piecewise, PhysicalSchedule};
use bcanneal::verify::{gadget_report, run_suite, Check, Suite};

struct Criterion {
    name: &'static str,
    gating: bool,
    passed: bool,
    detail: String,
}

fn from_checks(name: &'static str, checks: &[&Check]) -> Criterion {
    let detail = checks.iter().map(|c| format!("{}: {}", c.name, c.detail)).collect::<Vec<_>>().join("; ");
    Criterion { name, gating: true, passed: !checks.is_empty() && checks.iter().all(|c| c.passed), detail }
}

fn suite_criterion(name: &'static str, suite: Suite) -> Criterion {
    let report = run_suite(suite);
    let checks: Vec<&Check> = report.checks.iter().collect();
    from_checks(name, &checks)
}

fn schedule_golden() -> Criterion {
    let mut notes = Vec::new();
    let mut passed = true;
    match build_piecewise(1, 0.9, 1.0, 1e5, 0.0, 12) {
        Ok(sched) => {
            // Hand-derived knots: s_j on the partition, τ_j = 1 − √(1 − s_j).
            let s: [f64; 11] = [0.0, 0.18, 0.36, 0.54, 0.72, 0.9, 0.95, 0.975, 0.9875, 0.99375, 1.0];
            let pts = sched.points();
            let worst = pts
                .iter()
                .zip(s)
                .map(|(p, s)| (p.0 - (1.0 - (1.0 - s).sqrt())).abs().max((p.1 - s).abs()))
                .fold(0.0, f64::max);
            let tau5 = (pts[5].0 - (1.0 - 0.1f64.sqrt())).abs();
            passed &= pts.len() == 11 && worst <= 1e-12 && tau5 <= 1e-12;
            notes.push(format!("11 knots, max deviation {worst:.1e}, |τ_5 − (1 − √0.1)| = {tau5:.1e}"));
        }
        Err(e) => {
            passed = false;
            notes.push(format!("error: {e}"));
        }
    }
    let (t_f, t_r) = (1e5, 1e3);
    match (build_piecewise(1, 0.9, 1.0, t_f, 0.0, 12), build_piecewise(1, 0.9, 1.0, t_f, t_r, 12)) {
        (Ok(base), Ok(ramp)) => {
            let p = ramp.points();
            let tail = p[11];
            let ok = p.len() == 12 && p[..11] == *base.points() && (tail.0 - (p[10].0 + t_r / t_f)).abs() <= 1e-12 && tail.1 == 1.0;
            passed &= ok;
            notes.push(format!("ramp knot ({:.6}, {})", tail.0, tail.1));
        }
        _ => passed = false,
    }
    Criterion { name: "piecewise schedule golden knots", gating: true, passed, detail: notes.join("; ") }
}

fn fit_recovery() -> Criterion {
    let mut notes = Vec::new();
    let mut passed = true;
    let t: Vec<f64> = (0..8).map(|i| 10f64.powf(1.0 + 2.0 * i as f64 / 7.0)).collect();
    let p: Vec<f64> = t.iter().map(|t| 0.9 + 0.05 * t.powf(-0.5)).collect();
    match ScalingSeries::from_values(&t, &p).and_then(|s| fit_power_law(&s, &Mask::all(8))) {
        Ok(f) => {
            let dev = (f.plateau() - 0.9).abs().max((f.c() - 0.05).abs()).max((f.eta() - 0.5).abs());
            passed &= dev <= 1e-4;
            notes.push(format!("(plateau, C, eta) = ({:.6}, {:.6}, {:.6}), max deviation {dev:.1e}", f.plateau(), f.c(), f.eta()));
        }
        Err(e) => {
            passed = false;
            notes.push(format!("fit error: {e}"));
        }
    }

    let reps: Vec<Vec<f64>> =
        t.iter().enumerate().map(|(i, t)| (0..6).map(|r| 0.9 + 0.05 * t.powf(-0.5) + 1e-4 * ((i * 7 + r * 3) % 5) as f64).collect()).collect();
    let boot = ScalingSeries::from_replicates(&t, reps)
        .and_then(|s| Ok((bootstrap_fit(&s, &Mask::all(8), 100, 42)?, bootstrap_fit(&s, &Mask::all(8), 100, 42)?)));
    match boot {
        Ok((a, b)) => {
            passed &= a == b;
            notes.push(format!("bootstrap seed 42 reproducible: {}", a == b));
        }
        Err(e) => {
            passed = false;
            notes.push(format!("bootstrap error: {e}"));
        }
    }

    let e0 = theoretical_eta(0, 2.0, Regime::GaplessAtEnd).unwrap_or(f64::NAN);
    let e3 = theoretical_eta(3, 2.0, Regime::GaplessAtEnd).unwrap_or(f64::NAN);
    passed &= (e0 - 1.0 / 3.0).abs() < 1e-15 && (e3 - 4.0 / 9.0).abs() < 1e-15;
    notes.push(format!("theoretical eta (0,2) = {e0:.6}, (3,2) = {e3:.6}"));
    Criterion { name: "fit recovery, bootstrap determinism, theoretical exponents", gating: true, passed, detail: notes.join("; ") }
}

fn nts_criterion() -> Criterion {
    let at_09 = nts(0.9, 0.9);
    let grid: Vec<f64> = (1..1000).map(|i| i as f64 / 1000.0).collect();
    let values: Result<Vec<f64>, _> = grid.iter().map(|&p| nts(p, 0.9)).collect();
    let (exact, monotone) = match (&at_09, &values) {
        (Ok(v), Ok(vals)) => (*v == 1.0, vals.windows(2).all(|w| w[1] < w[0])),
        _ => (false, false),
    };
    Criterion {
        name: "NTS",
        gating: true,
        passed: exact && monotone,
        detail: format!("nts(0.9) = {:?}, strictly decreasing on 999-point grid: {monotone}", at_09.ok()),
    }
}

fn gadget_criterion() -> Criterion {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/fm_gadget.txt");
    let detail = read_problem(&path)
        .and_then(|p| gadget_report(&p, &PhysicalSchedule::synthetic_dw(), 0.02, 1e6, 0.5))
        .map(|r| {
            let s0 = match r.freezing {
                Freezing::At(s) => format!("{s:.3}"),
                Freezing::NeverFreezes => "never".into(),
            };
            let ok_star = (r.s_star - 0.43).abs() <= 0.02;
            let ok_s0 = matches!(r.freezing, Freezing::At(s) if (s - 0.51).abs() <= 0.02);
            let ok_p = (r.gibbs_p_gs - 0.9690).abs() <= 0.005;
            (
                ok_star && ok_s0 && ok_p,
                format!(
                    "s* = {:.3} (target 0.43), s0 = {s0} (target 0.51), Gibbs P_GS(0.50) = {:.4} (target 0.9690); reconstructed gadget and synthetic table",
                    r.s_star, r.gibbs_p_gs
                ),
            )
        });
    match detail {
        Ok((passed, detail)) => Criterion { name: "FM gadget gap, freeze-out and Gibbs weight", gating: false, passed, detail },
        Err(e) => Criterion { name: "FM gadget gap, freeze-out and Gibbs weight", gating: false, passed: false, detail: format!("error: {e}") },
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let props = run_suite(Suite::Props);
    let pick = |prefixes: &[&str]| -> Vec<&Check> {
        props.checks.iter().filter(|c| prefixes.iter().any(|p| c.name.starts_with(p))).collect()
    };
    let criteria = vec![
        suite_criterion("gapless-end exponents (k = 0..3)", Suite::AppB),
        suite_criterion("gap-in-middle exponents, both families", Suite::AppC),
        suite_criterion("perturbative rates W_0n ∝ A^(2 HD)", Suite::AppD),
        from_checks("zero-transverse-field kernel", &pick(&["computational-basis kernel"])),
        from_checks(
            "Davies/Gibbs property suite",
            &pick(&["Gibbs stationarity", "KMS relation", "detailed balance", "trace annihilation"]),
        ),
        from_checks("trajectory integrity", &pick(&["trajectory integrity", "tolerance halving"])),
        schedule_golden(),
        fit_recovery(),
        nts_criterion(),
        gadget_criterion(),
    ];

    println!("acceptance criteria");
    for c in &criteria {
        let tag = match (c.passed, c.gating) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "INFO",
        };
        let kind = if c.gating { "" } else { " (non-gating)" };
        println!("[{tag}] {}{kind}: {}", c.name, c.detail);
    }
    let failed = criteria.iter().filter(|c| c.gating && !c.passed).count();
    let gating = criteria.iter().filter(|c| c.gating).count();
    println!("{} of {gating} gating criteria passed in {:.1?}", gating - failed, start.elapsed());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
