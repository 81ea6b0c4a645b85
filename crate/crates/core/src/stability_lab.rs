//! The stability theorem run as a procedure: check its hypotheses on a
//! computed solution, measure decay, and flag any contradiction.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::cauchy_solver::{mild_residual, resolvent_family, solve_forced, Scenario};
use crate::dd_resolvent::{default_eta_sequence, ergodic_mean_signal, ErgodicDiagnostic};
use crate::error::{Error, Result};
use crate::operator_spectrum::{
    ergodic_mean_operator, ergodic_mean_operator_below, sigma_set, BoundaryPoint, BoundaryReason, BoundarySpectrum,
};
use crate::signal::SampledSignal;
use crate::weighted_space::{decay_profile, weight, DecayReport, Verdict, DEFAULT_WINDOW_COUNT};

/// Ergodic data at one boundary point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErgodicEntry {
    pub xi: f64,
    pub reason: BoundaryReason,
    /// `eta R(eta + i xi) u` in the weighted space of the solution.
    pub signal: ErgodicDiagnostic,
    /// `eta R_alpha(eta + i xi, A) x0`.
    pub operator: ErgodicDiagnostic,
    /// The operator-level limit along `-eta + i xi`, when admissible.
    pub operator_below: Option<ErgodicDiagnostic>,
    pub below_note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub boundary_spectrum: BoundarySpectrum,
    pub countable: bool,
    pub forcing_in_c0n: Verdict,
    pub ergodic_results: Vec<ErgodicEntry>,
    pub hypotheses_hold: bool,
    /// One line per failed hypothesis.
    pub failures: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayVerdict {
    pub report: HypothesisReport,
    pub decay: DecayReport,
    /// False only when the hypotheses hold and the solution visibly does not decay.
    pub consistent_with_theorem: bool,
}

fn describe(limit: f64) -> String {
    if limit.is_infinite() {
        "divergent".into()
    } else {
        format!("{limit:.4}")
    }
}

/// Boundary spectrum, decay of the forcing, and ergodic limits at every
/// boundary point (signal level on `u`, operator level on `x0`).
pub fn check_hypotheses(sc: &Scenario, u: &SampledSignal) -> Result<HypothesisReport> {
    let n = sc.degree;
    let tol = sc.tol.ergodic;
    let boundary_spectrum = sigma_set(&sc.operator, sc.alpha);
    let countable = boundary_spectrum.len() <= sc.operator.dim() + 1;
    let mut failures = Vec::new();
    let mut warnings = Vec::new();
    if !countable {
        failures.push(format!("boundary spectrum has {} points", boundary_spectrum.len()));
    }
    let forcing = sc.forcing_signal()?;
    let forcing_in_c0n = decay_profile(&forcing, n, DEFAULT_WINDOW_COUNT, sc.tol.decay)?.verdict;
    if forcing_in_c0n != Verdict::Decayed {
        failures.push(format!(
            "forcing not shown to vanish at infinity in weight {n} ({forcing_in_c0n:?})"
        ));
    }
    let etas = default_eta_sequence();
    let mut ergodic_results = Vec::with_capacity(boundary_spectrum.len());
    for &BoundaryPoint { xi, reason } in &boundary_spectrum.points {
        let (_, signal) = ergodic_mean_signal(u, n, xi, &etas)?;
        let (_, operator) = ergodic_mean_operator(&sc.operator, sc.alpha, xi, &sc.x0, &etas)?;
        let (operator_below, below_note) = match ergodic_mean_operator_below(&sc.operator, sc.alpha, xi, &sc.x0, &etas)
        {
            Ok((_, d)) => (Some(d), None),
            Err(Error::BranchCutViolation { .. }) => (
                None,
                Some("approach from below runs along the branch cut; rejected".to_string()),
            ),
            Err(e) => (None, Some(format!("approach from below failed: {e}"))),
        };
        for (what, d) in [("signal", &signal), ("operator", &operator)] {
            let l = d.extrapolated_limit;
            if !(l < tol) {
                let kind = if l.is_infinite() { "divergent" } else { "nonzero" };
                failures.push(format!(
                    "{kind} {what}-level ergodic mean at xi = {xi} (limit {})",
                    describe(l)
                ));
            }
        }
        let differ = |a: f64, b: f64| {
            if a.is_infinite() || b.is_infinite() {
                a.is_infinite() != b.is_infinite()
            } else {
                (a - b).abs() > tol
            }
        };
        if differ(signal.extrapolated_limit, operator.extrapolated_limit) {
            warnings.push(format!(
                "signal-level and operator-level ergodic limits differ at xi = {xi}: {} vs {}",
                describe(signal.extrapolated_limit),
                describe(operator.extrapolated_limit)
            ));
        }
        if let Some(b) = &operator_below {
            if differ(b.extrapolated_limit, operator.extrapolated_limit) {
                warnings.push(format!(
                    "operator-level limits from above and below differ at xi = {xi}: {} vs {}",
                    describe(operator.extrapolated_limit),
                    describe(b.extrapolated_limit)
                ));
            }
        }
        ergodic_results.push(ErgodicEntry {
            xi,
            reason,
            signal,
            operator,
            operator_below,
            below_note,
        });
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(HypothesisReport {
        boundary_spectrum,
        countable,
        forcing_in_c0n,
        ergodic_results,
        hypotheses_hold: failures.is_empty(),
        failures,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Runtimes {
    pub solve_s: f64,
    pub hypotheses_s: f64,
    pub decay_s: f64,
    pub total_s: f64,
}

/// Empirical check of `sup_t |S_alpha(t)| / (1+t)^n < inf` on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WellPosedness {
    pub sup_first_half: f64,
    pub sup_second_half: f64,
    /// The second-half sup does not exceed twice the first-half sup.
    pub bounded: bool,
}

/// Everything produced by one scenario run.
#[derive(Debug, Clone)]
pub struct LabRun {
    pub solution: SampledSignal,
    pub residual: f64,
    pub verdict: DecayVerdict,
    pub well_posedness: Option<WellPosedness>,
    pub runtimes: Runtimes,
}

pub fn well_posedness(sc: &Scenario) -> Result<Option<WellPosedness>> {
    if !sc.operator.is_diagonalizable() {
        return Ok(None);
    }
    let samples = 200usize;
    let t_max = sc.grid.t_max;
    let mut first = 0.0f64;
    let mut second = 0.0f64;
    for k in 0..=samples {
        let t = t_max * k as f64 / samples as f64;
        let s = resolvent_family(&sc.operator, sc.alpha, t)?;
        let r = s.svd(false, false).singular_values.max() / weight(t, sc.degree);
        if 2 * k <= samples {
            first = first.max(r);
        } else {
            second = second.max(r);
        }
    }
    Ok(Some(WellPosedness {
        sup_first_half: first,
        sup_second_half: second,
        bounded: second <= 2.0 * first,
    }))
}

/// Solve, check hypotheses, measure decay.
pub fn run_pipeline(sc: &Scenario) -> Result<LabRun> {
    let start = Instant::now();
    let solution = solve_forced(sc)?;
    let residual = mild_residual(&solution, sc)?;
    if residual > sc.tol.residual {
        return Err(Error::ResidualTooLarge {
            residual,
            tolerance: sc.tol.residual,
        });
    }
    let solve_s = start.elapsed().as_secs_f64();
    let t = Instant::now();
    let report = check_hypotheses(sc, &solution)?;
    let hypotheses_s = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let decay = decay_profile(&solution, sc.degree, DEFAULT_WINDOW_COUNT, sc.tol.decay)?;
    let decay_s = t.elapsed().as_secs_f64();
    let consistent_with_theorem = !(report.hypotheses_hold && decay.verdict == Verdict::NotDecayed);
    let well_posedness = well_posedness(sc)?;
    if let Some(w) = &well_posedness {
        if !w.bounded {
            log::warn!(
                "|S_alpha(t)|/(1+t)^{} grows over the grid ({:.3e} -> {:.3e})",
                sc.degree,
                w.sup_first_half,
                w.sup_second_half
            );
        }
    }
    for f in &report.failures {
        log::info!("hypothesis failed: {f}");
    }
    Ok(LabRun {
        solution,
        residual,
        verdict: DecayVerdict {
            report,
            decay,
            consistent_with_theorem,
        },
        well_posedness,
        runtimes: Runtimes {
            solve_s,
            hypotheses_s,
            decay_s,
            total_s: start.elapsed().as_secs_f64(),
        },
    })
}

pub fn verify_decay(sc: &Scenario) -> Result<DecayVerdict> {
    run_pipeline(sc).map(|r| r.verdict)
}

#[derive(Serialize)]
struct ReportJson<'a> {
    hypotheses_hold: bool,
    boundary_spectrum: &'a [BoundaryPoint],
    ergodic_limits: &'a [ErgodicEntry],
    decay_verdict: Verdict,
    tail_estimate: f64,
    residual: f64,
    runtimes: Runtimes,
}

/// The `report.json` document of a run.
pub fn report_json(run: &LabRun) -> Result<String> {
    let v = &run.verdict;
    let doc = ReportJson {
        hypotheses_hold: v.report.hypotheses_hold,
        boundary_spectrum: &v.report.boundary_spectrum.points,
        ergodic_limits: &v.report.ergodic_results,
        decay_verdict: v.decay.verdict,
        tail_estimate: v.decay.tail_estimate,
        residual: run.residual,
        runtimes: run.runtimes,
    };
    serde_json::to_string_pretty(&doc).map_err(|e| Error::Io(e.to_string()))
}

/// `xi,reason` rows.
pub fn spectrum_csv(bs: &BoundarySpectrum) -> String {
    let mut s = String::from("xi,reason\n");
    for p in &bs.points {
        s.push_str(&format!("{:.16e},{:?}\n", p.xi, p.reason));
    }
    s
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(dir.join(name)).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

/// Runs the scenario and writes `u.csv`, `spectrum.csv` and `report.json`.
pub fn write_outputs(run: &LabRun, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let mut csv = Vec::new();
    run.solution.write_csv(&mut csv)?;
    write_atomic(out_dir, "u.csv", &csv)?;
    write_atomic(
        out_dir,
        "spectrum.csv",
        spectrum_csv(&run.verdict.report.boundary_spectrum).as_bytes(),
    )?;
    write_atomic(out_dir, "report.json", report_json(run)?.as_bytes())?;
    Ok(())
}

/// Exit status of a run: 0 when consistent with the theorem, 2 on a
/// falsification trigger, 1 on any error (reported on standard error).
pub fn run_scenario(config_path: &Path, out_dir: &Path) -> i32 {
    let result = Scenario::from_path(config_path)
        .and_then(|sc| run_pipeline(&sc))
        .and_then(|run| write_outputs(&run, out_dir).map(|_| run));
    match result {
        Ok(run) if run.verdict.consistent_with_theorem => 0,
        Ok(_) => {
            eprintln!(
                "{}: hypotheses hold but the solution does not decay",
                config_path.display()
            );
            2
        }
        Err(e) => {
            eprintln!("{}: {e}", config_path.display());
            1
        }
    }
}
