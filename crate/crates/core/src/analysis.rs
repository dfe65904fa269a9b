//! S-curves, logistic threshold fits, readout fidelity, ac Stark
//! calibration and detuning maps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::SystemParams;
use crate::pulse::ChirpPulse;
use crate::quantum::{collect_runs, CaptureEstimate, TrajectoryOptions, TrajectorySolver};
use crate::semiclassical::{self, ar_capture_stream, locked_photons, CaptureOptions, ClassicalOptions, Sampling};
use crate::spectrum;
use crate::{QubitState, TWO_PI};

/// Capture probability versus drive amplitude at one detuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SCurve {
    /// Drive strengths (GHz), strictly increasing.
    pub amplitudes: Vec<f64>,
    pub probs: Vec<f64>,
    pub stderrs: Vec<f64>,
    /// Runs behind each probability.
    pub counts: Vec<usize>,
    /// Median capture time (ns) among captured runs, if any.
    pub median_capture_times: Vec<Option<f64>>,
    pub qubit_init: QubitState,
    pub detuning: f64,
    /// |chirp rate| (GHz/ns).
    pub rate: f64,
    pub seed0: u64,
}

impl SCurve {
    /// Build from raw counts; capture times per point may be empty.
    #[allow(clippy::too_many_arguments)]
    pub fn from_counts(
        amplitudes: Vec<f64>,
        captured: &[usize],
        counts: Vec<usize>,
        capture_times: Vec<Vec<f64>>,
        qubit_init: QubitState,
        detuning: f64,
        rate: f64,
        seed0: u64,
    ) -> Self {
        let est: Vec<CaptureEstimate> = captured.iter().zip(&counts).map(|(c, n)| CaptureEstimate::from_counts(*c, *n)).collect();
        Self {
            amplitudes,
            probs: est.iter().map(|e| e.p).collect(),
            stderrs: est.iter().map(|e| e.stderr).collect(),
            counts,
            median_capture_times: capture_times.into_iter().map(median).collect(),
            qubit_init,
            detuning,
            rate,
            seed0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.amplitudes.len();
        if n == 0 {
            return Err(invalid("amplitudes", "empty S-curve"));
        }
        if self.probs.len() != n || self.stderrs.len() != n || self.counts.len() != n || self.median_capture_times.len() != n {
            return Err(invalid("probs", "S-curve columns have unequal lengths"));
        }
        if self.amplitudes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("amplitudes", "must be strictly increasing"));
        }
        if self.probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(invalid("probs", "probabilities must lie in [0, 1]"));
        }
        Ok(())
    }

    /// `amplitude_ghz,rate_ghz_per_ns,captured_fraction,stderr,n_runs,seed0,median_capture_ns`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("amplitude_ghz,rate_ghz_per_ns,captured_fraction,stderr,n_runs,seed0,median_capture_ns\n");
        for i in 0..self.amplitudes.len() {
            let t = self.median_capture_times[i].map_or_else(|| "nan".to_string(), |v| v.to_string());
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                self.amplitudes[i], self.rate, self.probs[i], self.stderrs[i], self.counts[i], self.seed0, t
            ));
        }
        s
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Logistic threshold fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    /// Amplitude at P = 1/2 (GHz).
    pub v_half: f64,
    /// 10–90% span (GHz).
    pub width: f64,
    /// RMS deviation of the data from the fitted curve.
    pub fit_residual: f64,
}

/// ln 81: ratio of the logistic 10–90% span to its scale parameter.
pub const LOGISTIC_10_90: f64 = 4.394_449_154_672_439;

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binomial log-likelihood of `P = σ(b0 + b1 v)`.
fn log_likelihood(v: &[f64], p: &[f64], n: &[f64], b0: f64, b1: f64) -> f64 {
    let mut ll = 0.0;
    for i in 0..v.len() {
        let z = b0 + b1 * v[i];
        // log σ(z) and log(1 − σ(z)) without overflow.
        let log_p = -(1.0 + (-z).exp()).ln();
        let log_q = -(1.0 + z.exp()).ln();
        let lp = if z < -30.0 { z } else { log_p };
        let lq = if z > 30.0 { -z } else { log_q };
        ll += n[i] * (p[i] * lp + (1.0 - p[i]) * lq);
    }
    ll
}

/// Weighted (binomial maximum-likelihood) logistic fit
/// `P(V) = 1/(1 + exp(−(V − v_half)/w))`, width `w·ln 81`.
///
/// A perfectly separated step has no finite maximum-likelihood slope; it
/// is reported at the midpoint of the separating interval with that
/// interval as the width (the grid resolution).
pub fn fit_threshold(curve: &SCurve) -> Result<ThresholdResult> {
    curve.validate()?;
    let min_p = curve.probs.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_p = curve.probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(min_p < 0.1 && max_p > 0.9) {
        return Err(Error::SpanNotCovered { min_p, max_p });
    }
    let v = &curve.amplitudes;
    let p = &curve.probs;
    let n: Vec<f64> = curve.counts.iter().map(|c| (*c).max(1) as f64).collect();
    let (lo, hi) = (v[0], v[v.len() - 1]);

    if let Some((a, b)) = separation(v, p) {
        return Ok(ThresholdResult {
            v_half: 0.5 * (a + b),
            width: b - a,
            fit_residual: 0.0,
        });
    }

    // Start from the first crossing of 1/2 and a slope spanning the
    // transition region; rescale to unit amplitudes for conditioning.
    let scale = hi - lo;
    let x: Vec<f64> = v.iter().map(|a| (a - lo) / scale).collect();
    let i_half = p.iter().position(|q| *q >= 0.5).unwrap_or(0);
    let x_half = x[i_half];
    let mut b1 = 10.0;
    let mut b0 = -b1 * x_half;
    let mut ll = log_likelihood(&x, p, &n, b0, b1);
    let mut converged = false;
    for _ in 0..200 {
        // Newton step on the concave log-likelihood.
        let (mut g0, mut g1, mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..x.len() {
            let m = logistic(b0 + b1 * x[i]);
            let r = n[i] * (p[i] - m);
            let w = n[i] * m * (1.0 - m);
            g0 += r;
            g1 += r * x[i];
            h00 += w;
            h01 += w * x[i];
            h11 += w * x[i] * x[i];
        }
        let det = h00 * h11 - h01 * h01;
        if !(det > 0.0) {
            break;
        }
        let d0 = (h11 * g0 - h01 * g1) / det;
        let d1 = (h00 * g1 - h01 * g0) / det;
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let (c0, c1) = (b0 + t * d0, b1 + t * d1);
            let l = log_likelihood(&x, p, &n, c0, c1);
            if l >= ll - 1e-12 * ll.abs() {
                b0 = c0;
                b1 = c1;
                ll = l;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved || (d0.abs() + d1.abs()) * t < 1e-12 * (b0.abs() + b1.abs()) {
            converged = true;
            break;
        }
    }
    if !converged || !(b1 > 0.0) {
        return Err(Error::Fit(format!("logistic fit did not converge (slope {b1})")));
    }
    let w = scale / b1;
    let v_half = lo - b0 / b1 * scale;
    if !(v_half >= lo && v_half <= hi) {
        return Err(Error::Fit(format!("v_half {v_half} outside sampled range [{lo}, {hi}]")));
    }
    let rms = (v.iter().zip(p).map(|(a, q)| (q - logistic((a - v_half) / w)).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
    Ok(ThresholdResult {
        v_half,
        width: w * LOGISTIC_10_90,
        fit_residual: rms,
    })
}

/// `(a, b)` if every point at or below `a` has P = 0 and every point from
/// `b` on has P = 1, with `a`, `b` adjacent grid amplitudes.
fn separation(v: &[f64], p: &[f64]) -> Option<(f64, f64)> {
    if p.iter().any(|q| *q != 0.0 && *q != 1.0) {
        return None;
    }
    let first_one = p.iter().position(|q| *q == 1.0)?;
    if first_one == 0 || p[first_one..].iter().any(|q| *q != 1.0) {
        return None;
    }
    Some((v[first_one - 1], v[first_one]))
}

/// Discrimination between the two qubit states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    /// max_V |P₁(V) − P₀(V)|.
    pub f_raw: f64,
    /// Amplitude of maximum separation (smallest on ties).
    pub v_opt: f64,
    /// Separation with the excited-state decay before capture divided out.
    pub f_t1_corrected: f64,
    /// ns.
    pub capture_time_used: f64,
    /// exp(−capture_time_used / T1).
    pub survival: f64,
}

/// Fidelity with the T1 correction taken from `t1_ns`. The capture time
/// defaults to the median capture time, at `v_opt`, of whichever state
/// captures more often there.
pub fn fidelity(s0: &SCurve, s1: &SCurve, t1_ns: f64, capture_time: Option<f64>) -> Result<FidelityReport> {
    s0.validate()?;
    s1.validate()?;
    if s0.amplitudes != s1.amplitudes {
        return Err(Error::GridMismatch("amplitude grids differ".into()));
    }
    if s0.detuning != s1.detuning {
        return Err(Error::GridMismatch(format!("detunings differ ({} vs {})", s0.detuning, s1.detuning)));
    }
    if !(t1_ns > 0.0) {
        return Err(invalid("t1", "must be positive"));
    }
    let mut best = 0usize;
    let mut f_raw = -1.0;
    for i in 0..s0.amplitudes.len() {
        let d = (s1.probs[i] - s0.probs[i]).abs();
        if d > f_raw {
            f_raw = d;
            best = i;
        }
    }
    let capturing = if s1.probs[best] >= s0.probs[best] { s1 } else { s0 };
    let t_cap = match capture_time {
        Some(t) => t,
        None => capturing.median_capture_times[best]
            .or_else(|| s1.median_capture_times[best])
            .or_else(|| s0.median_capture_times[best])
            .unwrap_or(0.0),
    };
    let survival = (-t_cap / t1_ns).exp();
    Ok(FidelityReport {
        f_raw,
        v_opt: s0.amplitudes[best],
        f_t1_corrected: (f_raw / survival).min(1.0),
        capture_time_used: t_cap,
        survival,
    })
}

/// Mean photon number of a linear cavity driven off resonance by `δ`
/// (GHz) with strength `pump_amp` (GHz). Requires |δ| > 5κ.
pub fn stark_calibration(p: &SystemParams, pump_detuning: f64, pump_amp: f64) -> Result<f64> {
    check_far_detuned(p, pump_detuning)?;
    stark_calibration_unchecked(p, pump_detuning, pump_amp)
}

/// [`stark_calibration`] without the far-detuning guard, e.g. for δ = 0.
pub fn stark_calibration_unchecked(p: &SystemParams, pump_detuning: f64, pump_amp: f64) -> Result<f64> {
    if !(pump_amp >= 0.0) {
        return Err(invalid("pump_amp", "must be non-negative"));
    }
    let f = 0.5 * TWO_PI * pump_amp;
    let d = TWO_PI * pump_detuning;
    let k = 0.5 * TWO_PI * p.kappa;
    Ok(f * f / (d * d + k * k))
}

/// Inverse of [`stark_calibration`]: drive strength (GHz) giving `nbar`.
pub fn pump_amplitude_for_nbar(p: &SystemParams, pump_detuning: f64, nbar: f64) -> Result<f64> {
    check_far_detuned(p, pump_detuning)?;
    if !(nbar >= 0.0) {
        return Err(invalid("pump_nbar", "must be non-negative"));
    }
    let d = TWO_PI * pump_detuning;
    let k = 0.5 * TWO_PI * p.kappa;
    Ok(2.0 * (nbar * (d * d + k * k)).sqrt() / TWO_PI)
}

fn check_far_detuned(p: &SystemParams, pump_detuning: f64) -> Result<()> {
    if !(pump_detuning.abs() > 5.0 * p.kappa) {
        return Err(invalid(
            "pump_detuning",
            format!("|δ| = {} GHz must exceed 5κ = {} GHz", pump_detuning.abs(), 5.0 * p.kappa),
        ));
    }
    Ok(())
}

/// Qubit ac Stark shift 2χ·n̄ (GHz), with χ half the difference of the
/// state-dependent cavity pulls.
pub fn qubit_stark_shift(p: &SystemParams, nbar: f64) -> Result<f64> {
    let chi = 0.5 * (spectrum::dispersive_shift(p, 1)? - spectrum::dispersive_shift(p, 0)?);
    Ok(2.0 * chi * nbar)
}

/// Simulation engine for stochastic S-curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Quantum,
    Semiclassical,
}

impl std::str::FromStr for Engine {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "quantum" => Ok(Engine::Quantum),
            "semiclassical" => Ok(Engine::Semiclassical),
            other => Err(format!("unknown engine `{other}` (expected quantum or semiclassical)")),
        }
    }
}

impl std::fmt::Display for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Engine::Quantum => "quantum",
            Engine::Semiclassical => "semiclassical",
        })
    }
}

/// Ensemble settings shared by every point of an S-curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    pub engine: Engine,
    pub n_runs: usize,
    pub seed0: u64,
    pub sampling: Sampling,
    pub cut_fraction: f64,
    pub integrator: ClassicalOptions,
}

impl EnsembleSpec {
    pub fn semiclassical(n_runs: usize, seed0: u64) -> Self {
        Self {
            engine: Engine::Semiclassical,
            n_runs,
            seed0,
            sampling: Sampling::default(),
            cut_fraction: 0.5,
            integrator: ClassicalOptions::default(),
        }
    }
}

/// Capture fraction at each amplitude. Every amplitude reuses the streams
/// `0..n_runs` of `seed0`, so neighbouring points (and the two qubit
/// states) see identical initial noise.
pub fn scurve(p: &SystemParams, pulse: &ChirpPulse, amplitudes: &[f64], qubit: QubitState, spec: &EnsembleSpec) -> Result<SCurve> {
    p.validate()?;
    pulse.validate()?;
    if amplitudes.is_empty() {
        return Err(invalid("amplitudes", "must not be empty"));
    }
    let cut = spec.cut_fraction * locked_photons(p, pulse)?;
    let n = spec.n_runs;
    let (captured, counts, times) = match spec.engine {
        Engine::Semiclassical => {
            let opts = CaptureOptions {
                qubit,
                sampling: spec.sampling,
                cut_fraction: spec.cut_fraction,
                integrator: spec.integrator,
            };
            let jobs: Vec<(usize, u64)> = (0..amplitudes.len()).flat_map(|a| (0..n as u64).map(move |i| (a, i))).collect();
            let results: Vec<_> = jobs
                .par_iter()
                .map(|&(a, i)| ar_capture_stream(p, &pulse.with_amplitude(amplitudes[a]), &opts, spec.seed0, i))
                .collect();
            let mut it = results.into_iter();
            let mut captured = Vec::new();
            let mut counts = Vec::new();
            let mut times = Vec::new();
            for _ in amplitudes {
                let ok = collect_runs(it.by_ref().take(n).collect())?;
                captured.push(ok.iter().filter(|r| r.captured).count());
                counts.push(ok.len());
                times.push(ok.iter().filter_map(|r| r.capture_time).collect());
            }
            (captured, counts, times)
        }
        Engine::Quantum => {
            let mut captured = Vec::new();
            let mut counts = Vec::new();
            let mut times = Vec::new();
            for &amp in amplitudes {
                let pl = pulse.with_amplitude(amp);
                let solver = TrajectorySolver::new(p, &pl, TrajectoryOptions::default())?;
                let sample_dt = pl.duration / 200.0;
                let runs = crate::quantum::trajectory_ensemble(&solver, qubit, n, spec.seed0, sample_dt);
                let ok = collect_runs(runs)?;
                let mut t_caps = Vec::new();
                let mut c = 0;
                for (rec, _) in &ok {
                    if rec.final_mean_n() > cut {
                        c += 1;
                        // First sample after which ⟨n⟩ stays above the cut.
                        let mut since = None;
                        for (t, m) in rec.times.iter().zip(&rec.mean_n) {
                            if *m > cut {
                                since.get_or_insert(*t);
                            } else {
                                since = None;
                            }
                        }
                        t_caps.extend(since);
                    }
                }
                captured.push(c);
                counts.push(ok.len());
                times.push(t_caps);
            }
            (captured, counts, times)
        }
    };
    Ok(SCurve::from_counts(
        amplitudes.to_vec(),
        &captured,
        counts,
        times,
        qubit,
        p.detuning,
        pulse.rate().abs(),
        spec.seed0,
    ))
}

/// `n` amplitudes spaced evenly over `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Amplitude grid for a threshold map point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeGrid {
    /// The same amplitudes at every detuning.
    Fixed(Vec<f64>),
    /// `points` amplitudes over `center·(1 ± rel_span)`, centred on the
    /// noiseless ground-state threshold at that detuning; the span doubles
    /// (up to `retries` times) while the curve misses P < 0.1 or P > 0.9.
    Auto { points: usize, rel_span: f64, retries: usize },
}

/// One detuning of a threshold map.
#[derive(Debug, Clone, PartialEq)]
pub struct MapPoint {
    pub detuning: f64,
    pub curve: Option<SCurve>,
    pub result: std::result::Result<ThresholdResult, String>,
    /// Within the flag window of a known avoided crossing.
    pub near_crossing: bool,
}

/// S-curve and threshold at each detuning. Failures are recorded per point
/// and the map continues.
#[allow(clippy::too_many_arguments)]
pub fn threshold_map(
    base: &SystemParams,
    detunings: &[f64],
    pulse: &ChirpPulse,
    qubit: QubitState,
    spec: &EnsembleSpec,
    grid: &AmplitudeGrid,
    crossings: &[f64],
    flag_window: f64,
) -> Vec<MapPoint> {
    detunings
        .iter()
        .map(|&d| {
            let p = SystemParams {
                detuning: d,
                ..base.clone()
            };
            let near_crossing = crossings.iter().any(|c| (c - d).abs() <= flag_window);
            let (curve, result) = match map_point(&p, pulse, qubit, spec, grid) {
                Ok((c, r)) => (Some(c), r.map_err(|e| e.to_string())),
                Err(e) => (None, Err(e.to_string())),
            };
            MapPoint {
                detuning: d,
                curve,
                result,
                near_crossing,
            }
        })
        .collect()
}

/// Amplitude grid used for `p` under `grid`, before any widening.
pub fn amplitude_grid(p: &SystemParams, pulse: &ChirpPulse, grid: &AmplitudeGrid, attempt: usize) -> Result<Vec<f64>> {
    match grid {
        AmplitudeGrid::Fixed(v) => Ok(v.clone()),
        AmplitudeGrid::Auto { points, rel_span, .. } => {
            let center = semiclassical::deterministic_threshold(p, pulse, 1e-3, &ClassicalOptions::default())?;
            let span = (rel_span * f64::powi(2.0, attempt as i32)).min(0.95);
            Ok(linspace(center * (1.0 - span), center * (1.0 + span), *points))
        }
    }
}

fn map_point(p: &SystemParams, pulse: &ChirpPulse, qubit: QubitState, spec: &EnsembleSpec, grid: &AmplitudeGrid) -> Result<(SCurve, Result<ThresholdResult>)> {
    let retries = match grid {
        AmplitudeGrid::Fixed(_) => 0,
        AmplitudeGrid::Auto { retries, .. } => *retries,
    };
    let mut attempt = 0;
    loop {
        let amps = amplitude_grid(p, pulse, grid, attempt)?;
        let curve = scurve(p, pulse, &amps, qubit, spec)?;
        let fit = fit_threshold(&curve);
        if matches!(fit, Err(Error::SpanNotCovered { .. })) && attempt < retries {
            attempt += 1;
            continue;
        }
        return Ok((curve, fit));
    }
}

/// `detuning_ghz,v_half_ghz,width_ghz,fit_residual,near_crossing,status`.
pub fn map_csv(points: &[MapPoint]) -> String {
    let mut s = String::from("detuning_ghz,v_half_ghz,width_ghz,fit_residual,near_crossing,status\n");
    for pt in points {
        match &pt.result {
            Ok(r) => s.push_str(&format!(
                "{},{},{},{},{},ok\n",
                pt.detuning, r.v_half, r.width, r.fit_residual, pt.near_crossing
            )),
            Err(e) => s.push_str(&format!(
                "{},nan,nan,nan,{},\"{}\"\n",
                pt.detuning,
                pt.near_crossing,
                e.replace('"', "'")
            )),
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(amps: Vec<f64>, probs: Vec<f64>, n: usize) -> SCurve {
        let k = amps.len();
        SCurve {
            stderrs: probs.iter().map(|p| (p * (1.0 - p) / n as f64).sqrt()).collect(),
            probs,
            counts: vec![n; k],
            median_capture_times: vec![None; k],
            amplitudes: amps,
            qubit_init: QubitState::Ground,
            detuning: 0.0,
            rate: 0.0,
            seed0: 0,
        }
    }

    #[test]
    fn perfect_step_reports_grid_floor() {
        let amps = linspace(0.5, 1.5, 11);
        let probs = amps.iter().map(|a| if *a > 1.01 { 1.0 } else { 0.0 }).collect();
        let r = fit_threshold(&synthetic(amps, probs, 100)).unwrap();
        assert!((r.v_half - 1.05).abs() < 1e-12);
        assert!((r.width - 0.1).abs() < 1e-12);
    }

    #[test]
    fn exact_logistic_is_recovered() {
        let amps = linspace(0.8, 1.2, 21);
        let probs = amps.iter().map(|a| logistic((a - 1.0) / 0.05)).collect();
        let r = fit_threshold(&synthetic(amps, probs, 1000)).unwrap();
        assert!((r.v_half - 1.0).abs() < 1e-9, "{r:?}");
        assert!((r.width - 0.05 * LOGISTIC_10_90).abs() < 1e-9);
        assert!(r.fit_residual < 1e-9);
    }

    #[test]
    fn narrow_span_is_rejected() {
        let c = synthetic(vec![1.0, 2.0], vec![0.2, 0.8], 10);
        assert!(matches!(fit_threshold(&c), Err(Error::SpanNotCovered { .. })));
    }

    #[test]
    fn fidelity_picks_smallest_amplitude_on_ties() {
        let a = synthetic(vec![1.0, 2.0, 3.0], vec![0.0, 0.0, 1.0], 10);
        let b = synthetic(vec![1.0, 2.0, 3.0], vec![1.0, 1.0, 1.0], 10);
        let r = fidelity(&a, &b, 1000.0, Some(200.0)).unwrap();
        assert_eq!(r.f_raw, 1.0);
        assert_eq!(r.v_opt, 1.0);
        assert!((r.survival - (-0.2f64).exp()).abs() < 1e-15);
        assert_eq!(r.f_t1_corrected, 1.0);
    }

    #[test]
    fn stark_limits() {
        let p = SystemParams::device(2.64);
        assert_eq!(stark_calibration(&p, 0.01, 0.0).unwrap(), 0.0);
        assert!(stark_calibration(&p, 1e-4, 1e-3).is_err());
        let on = stark_calibration_unchecked(&p, 0.0, 1e-3).unwrap();
        assert!((on - (1e-3 / p.kappa).powi(2)).abs() < 1e-12 * on);
        let amp = pump_amplitude_for_nbar(&p, 0.01, 10.0).unwrap();
        assert!((stark_calibration(&p, 0.01, amp).unwrap() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(Vec::new()), None);
    }
}
