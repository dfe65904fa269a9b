//! One function per subcommand. Each returns its output files in memory;
//! nothing touches the file system until the whole run has succeeded.

use std::fmt::Write as _;

use autores_core::analysis::{self, fidelity, fit_threshold, map_csv, threshold_map, Engine, SCurve};
use autores_core::quantum::{self, collect_runs, steady_transmission, TrajectoryOptions, TrajectorySolver};
use autores_core::rng::job_rng;
use autores_core::semiclassical::{classical_nonlinearity, integrate_coupled_with, sample_initial};
use autores_core::spectrum::{self, crossings_csv, find_avoided_crossings, lambda_curve, track_branches, AvoidedCrossing};
use autores_core::{QubitState, SystemParams};
use rayon::prelude::*;

use crate::config::{Command, CrossingFilter, ProbeConfig, RunConfig};
use crate::error::CliError;
use crate::output::{header, OutputSet};

/// Files produced by a run plus a human-readable summary.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: OutputSet,
    pub summary: Vec<String>,
    /// Some sweep points failed; their rows carry the error text.
    pub partial: bool,
}

const PROXY_NOTE: &str = "|1> modeled as one quantum in the qubit oscillator, |alpha_q(0)|^2 = 1, on top of vacuum noise";
const DISTINGUISHABLE_NOTE: &str = "captured and uncaptured responses treated as perfectly distinguishable";

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.validate(cmd)?;
    match cmd {
        Command::Spectrum => cmd_spectrum(cfg),
        Command::Nonlinearity => cmd_nonlinearity(cfg),
        Command::Chirp => cmd_chirp(cfg),
        Command::Scurve => cmd_scurve(cfg),
        Command::Fidelity => cmd_fidelity(cfg),
        Command::ThresholdMap => cmd_threshold_map(cfg),
    }
}

fn qubit_note(q: QubitState) -> (&'static str, String) {
    match q {
        QubitState::Ground => ("qubit_init", "0".into()),
        QubitState::Excited => ("qubit_init", format!("1 ({PROXY_NOTE})")),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".into(), |x| x.to_string())
}

fn quote(msg: &str) -> String {
    format!("\"{}\"", msg.replace('"', "'"))
}

/// Avoided crossings of the requested manifolds, ordered by detuning.
fn crossings(cfg: &RunConfig, grid: &[f64]) -> Result<Vec<AvoidedCrossing>, CliError> {
    let a = &cfg.analysis;
    let set = track_branches(&cfg.system, grid, a.max_excitation)?;
    let mut out: Vec<AvoidedCrossing> = a.manifolds.iter().flat_map(|&m| find_avoided_crossings(&set, m)).collect();
    if a.crossing_filter == CrossingFilter::Ground {
        out.retain(|c| c.pair.0.q == 0 || c.pair.1.q == 0);
    }
    out.sort_by(|x, y| x.detuning_at_min.total_cmp(&y.detuning_at_min));
    Ok(out)
}

fn cmd_spectrum(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let grid = cfg.sweep.values();
    let set = track_branches(&cfg.system, &grid, cfg.analysis.max_excitation)?;
    let found = crossings(cfg, &grid)?;
    let mut out = Outcome::default();
    let head = header(Command::Spectrum, cfg, &[]);
    out.files.add("branches.csv", head.clone(), &set.to_csv());
    out.files.add("crossings.csv", head, &crossings_csv(&found));
    if !set.ambiguous.is_empty() {
        out.summary.push(format!("{} grid points needed relabeling against an earlier anchor", set.ambiguous.len()));
    }
    for c in &found {
        out.summary.push(format!(
            "manifold {}: {}–{} at Δ = {:.4} GHz, gap {:.4} GHz",
            c.manifold, c.pair.0, c.pair.1, c.detuning_at_min, c.gap
        ));
    }
    if found.is_empty() {
        out.summary.push("no avoided crossings in the requested manifolds".into());
    }
    Ok(out)
}

/// λ from the pump-induced shift of the weak-probe resonance. The shift of
/// the |0,0⟩→|0,1⟩ line with n̄ pump photons is −4λn̄ (cross-phase); n̄ is
/// the photon number the pump actually sustains.
fn probe_lambda(p: &SystemParams, pr: &ProbeConfig) -> autores_core::Result<f64> {
    let small = SystemParams {
        n_levels: pr.n_levels,
        n_photons: pr.n_photons,
        ..p.clone()
    };
    let center = small.cavity_freq + spectrum::dispersive_shift(&small, 0)?;
    let freqs = analysis::linspace(center - pr.span, center + pr.span, pr.points);
    let pump = center + pr.pump_offset;
    let bare = steady_transmission(&small, &freqs, pr.probe_amp, pump, 0.0)?;
    let pumped = steady_transmission(&small, &freqs, pr.probe_amp, pump, pr.nbar)?;
    Ok(-(pumped.resonance - bare.resonance) / (4.0 * pumped.pump_nbar))
}

fn cmd_nonlinearity(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let a = &cfg.analysis;
    let dets = cfg.sweep.values();
    let spectral = lambda_curve(&cfg.system, &dets, a.n_fit);
    let classical: Vec<Option<autores_core::Result<f64>>> = dets
        .par_iter()
        .map(|&d| a.classical.then(|| classical_nonlinearity(&cfg.system_at(d))))
        .collect();
    let probe: Vec<Option<autores_core::Result<f64>>> = dets
        .par_iter()
        .map(|&d| a.probe.as_ref().map(|pr| probe_lambda(&cfg.system_at(d), pr)))
        .collect();

    let mut out = Outcome::default();
    let mut body = String::from("detuning_ghz,lambda_spectral_ghz,omega_ghz,fit_residual_ghz,lambda_classical_ghz,lambda_probe_ghz,status\n");
    for (i, d) in dets.iter().enumerate() {
        let mut errors = Vec::new();
        let (lam, omega, resid) = match &spectral[i] {
            Ok(e) => (Some(e.lambda), Some(e.omega), Some(e.fit_residual)),
            Err(e) => {
                errors.push(format!("spectral: {e}"));
                (None, None, None)
            }
        };
        let mut take = |r: &Option<autores_core::Result<f64>>, tag: &str| match r {
            Some(Ok(v)) => Some(*v),
            Some(Err(e)) => {
                errors.push(format!("{tag}: {e}"));
                None
            }
            None => None,
        };
        let cl = take(&classical[i], "classical");
        let pr = take(&probe[i], "probe");
        let status = if errors.is_empty() {
            "ok".to_string()
        } else {
            out.partial = true;
            quote(&errors.join("; "))
        };
        let _ = writeln!(
            body,
            "{d},{},{},{},{},{},{status}",
            fmt_opt(lam),
            fmt_opt(omega),
            fmt_opt(resid),
            fmt_opt(cl),
            fmt_opt(pr)
        );
    }
    out.files.add("nonlinearity.csv", header(Command::Nonlinearity, cfg, &[]), &body);
    out.summary.push(format!("{} detunings, n_fit = {}", dets.len(), a.n_fit));
    Ok(out)
}

/// Photon number, field magnitude and drive frequency of one transient.
struct Transient {
    times: Vec<f64>,
    photons: Vec<f64>,
    field: Vec<f64>,
}

fn classical_transient(cfg: &RunConfig, pulse: &autores_core::ChirpPulse, q: QubitState, stream: u64) -> autores_core::Result<Transient> {
    let mut rng = job_rng(cfg.ensemble.seed0, stream);
    let init = sample_initial(&mut rng, q, cfg.sampling());
    let states = integrate_coupled_with(&cfg.system, pulse, &init, cfg.analysis.sample_dt, &cfg.integrator())?;
    Ok(Transient {
        times: states.iter().map(|s| s.time).collect(),
        photons: states.iter().map(|s| s.photons()).collect(),
        field: states.iter().map(|s| s.alpha_c.norm()).collect(),
    })
}

fn cmd_chirp(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let n = cfg.ensemble.n_runs;
    let dt = cfg.analysis.sample_dt;
    let mut out = Outcome::default();
    for q in cfg.analysis.qubit.states() {
        let mut body = String::from("amplitude_ghz,time_ns,drive_freq_ghz,single_photons,single_field,mean_photons\n");
        for amp in cfg.sweep.values() {
            let pulse = cfg.pulse.with_amplitude(amp);
            let runs: Vec<Transient> = match cfg.engine.kind {
                Engine::Semiclassical => {
                    let runs: Vec<_> = (0..n as u64).into_par_iter().map(|i| classical_transient(cfg, &pulse, q, i)).collect();
                    collect_runs(runs)?
                }
                Engine::Quantum => {
                    let solver = TrajectorySolver::new(&cfg.system, &pulse, TrajectoryOptions::default())?;
                    let runs = quantum::trajectory_ensemble(&solver, q, n, cfg.ensemble.seed0, dt);
                    collect_runs(runs)?
                        .into_iter()
                        .map(|(r, _)| Transient {
                            times: r.times,
                            photons: r.mean_n,
                            field: r.field_mag,
                        })
                        .collect()
                }
            };
            let single = &runs[0];
            let len = runs.iter().map(|r| r.times.len()).min().unwrap_or(0);
            let mean: Vec<f64> = (0..len).map(|k| runs.iter().map(|r| r.photons[k]).sum::<f64>() / runs.len() as f64).collect();
            for k in 0..len {
                let t = single.times[k];
                let _ = writeln!(
                    body,
                    "{amp},{t},{},{},{},{}",
                    pulse.freq(t),
                    single.photons[k],
                    single.field[k],
                    mean[k]
                );
            }
            out.summary.push(format!(
                "qubit {q}, amplitude {amp} GHz: final photons single {:.4e}, mean {:.4e} over {} runs",
                single.photons[len - 1],
                mean[len - 1],
                runs.len()
            ));
        }
        let name = format!("chirp_q{}.csv", q.index());
        out.files.add(&name, header(Command::Chirp, cfg, &[qubit_note(q)]), &body);
    }
    Ok(out)
}

/// `qubit,v_half_ghz,width_ghz,fit_residual,status`.
fn thresholds_csv(curves: &[SCurve]) -> (String, Vec<String>) {
    let mut body = String::from("qubit,v_half_ghz,width_ghz,fit_residual,status\n");
    let mut lines = Vec::new();
    for c in curves {
        match fit_threshold(c) {
            Ok(r) => {
                let _ = writeln!(body, "{},{},{},{},ok", c.qubit_init, r.v_half, r.width, r.fit_residual);
                lines.push(format!(
                    "qubit {}: V_1/2 = {:.5} GHz, width {:.5} GHz",
                    c.qubit_init, r.v_half, r.width
                ));
            }
            Err(e) => {
                let _ = writeln!(body, "{},nan,nan,nan,{}", c.qubit_init, quote(&e.to_string()));
                lines.push(format!("qubit {}: no threshold ({e})", c.qubit_init));
            }
        }
    }
    (body, lines)
}

fn curves(cfg: &RunConfig, states: &[QubitState]) -> Result<Vec<SCurve>, CliError> {
    let amps = cfg.sweep.values();
    let spec = cfg.ensemble_spec();
    states
        .iter()
        .map(|&q| analysis::scurve(&cfg.system, &cfg.pulse, &amps, q, &spec).map_err(CliError::from))
        .collect()
}

fn add_curves(out: &mut Outcome, cmd: Command, cfg: &RunConfig, curves: &[SCurve]) {
    for c in curves {
        let name = format!("scurve_q{}.csv", c.qubit_init.index());
        out.files.add(&name, header(cmd, cfg, &[qubit_note(c.qubit_init)]), &c.to_csv());
    }
    let (body, lines) = thresholds_csv(curves);
    out.files.add("thresholds.csv", header(cmd, cfg, &[]), &body);
    out.summary.extend(lines);
}

fn cmd_scurve(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let curves = curves(cfg, &cfg.analysis.qubit.states())?;
    let mut out = Outcome::default();
    add_curves(&mut out, Command::Scurve, cfg, &curves);
    Ok(out)
}

fn cmd_fidelity(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let curves = curves(cfg, &[QubitState::Ground, QubitState::Excited])?;
    let a = &cfg.analysis;
    let rep = fidelity(&curves[0], &curves[1], a.t1_ns, a.capture_time)?;
    let mut out = Outcome::default();
    add_curves(&mut out, Command::Fidelity, cfg, &curves);
    let body = format!(
        "f_raw,v_opt_ghz,f_t1_corrected,capture_time_ns,survival,t1_ns\n{},{},{},{},{},{}\n",
        rep.f_raw, rep.v_opt, rep.f_t1_corrected, rep.capture_time_used, rep.survival, a.t1_ns
    );
    let notes = [
        ("qubit_init", format!("0 and 1 ({PROXY_NOTE})")),
        ("assumption", DISTINGUISHABLE_NOTE.to_string()),
    ];
    out.files.add("fidelity.csv", header(Command::Fidelity, cfg, &notes), &body);
    out.summary.push(format!(
        "f_raw = {:.3} at V = {:.5} GHz; T1-corrected {:.3} (capture time {:.1} ns, survival {:.3})",
        rep.f_raw, rep.v_opt, rep.f_t1_corrected, rep.capture_time_used, rep.survival
    ));
    Ok(out)
}

/// Detuning grid for locating crossings to flag: the sweep range, finely
/// sampled, widened a little so edge crossings are not missed.
fn flag_grid(cfg: &RunConfig) -> Vec<f64> {
    let (lo, hi) = (cfg.sweep.start, cfg.sweep.stop);
    let pad = (0.05 * (hi - lo)).max(cfg.analysis.flag_window).max(0.01);
    analysis::linspace(lo - pad, hi + pad, 241)
}

fn cmd_threshold_map(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let dets = cfg.sweep.values();
    let crossing_dets: Vec<f64> = crossings(cfg, &flag_grid(cfg))?.iter().map(|c| c.detuning_at_min).collect();
    let spec = cfg.ensemble_spec();
    let mut out = Outcome::default();
    for q in cfg.analysis.qubit.states() {
        let points = threshold_map(
            &cfg.system,
            &dets,
            &cfg.pulse,
            q,
            &spec,
            &cfg.analysis.grid,
            &crossing_dets,
            cfg.analysis.flag_window,
        );
        let failed = points.iter().filter(|p| p.result.is_err()).count();
        out.partial |= failed > 0;
        let mut curves_body =
            String::from("detuning_ghz,amplitude_ghz,captured_fraction,stderr,n_runs,median_capture_ns\n");
        for pt in &points {
            if let Some(c) = &pt.curve {
                for k in 0..c.amplitudes.len() {
                    let _ = writeln!(
                        curves_body,
                        "{},{},{},{},{},{}",
                        pt.detuning,
                        c.amplitudes[k],
                        c.probs[k],
                        c.stderrs[k],
                        c.counts[k],
                        fmt_opt(c.median_capture_times[k])
                    );
                }
            }
        }
        let head = header(Command::ThresholdMap, cfg, &[qubit_note(q)]);
        out.files.add(&format!("map_q{}.csv", q.index()), head.clone(), &map_csv(&points));
        out.files.add(&format!("map_scurves_q{}.csv", q.index()), head, &curves_body);
        out.summary.push(format!(
            "qubit {q}: {} of {} detunings fitted",
            points.len() - failed,
            points.len()
        ));
    }
    Ok(out)
}

