//! Coupled classical oscillators: the cavity and the qubit treated as Kerr
//! and Duffing modes, integrated in the frame rotating with the drive.
//!
//! Quantum noise enters only through the initial conditions (truncated
//! Wigner sampling of the vacuum); thresholds use noiseless starts.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::SystemParams;
use crate::ode::{Dopri5, Tolerance};
use crate::pulse::ChirpPulse;
use crate::rng::{job_rng, JobRng};
use crate::{QubitState, TWO_PI};

/// Amplitude beyond which a run is treated as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e4;

/// Standard deviation of each vacuum quadrature (variance 1/4).
pub const VACUUM_QUADRATURE_STD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalState {
    /// Cavity amplitude (√photons).
    pub alpha_c: Complex64,
    /// Qubit-oscillator amplitude (√quanta).
    pub alpha_q: Complex64,
    /// ns.
    pub time: f64,
}

impl ClassicalState {
    pub fn vacuum() -> Self {
        Self {
            alpha_c: Complex64::default(),
            alpha_q: Complex64::default(),
            time: 0.0,
        }
    }

    pub fn photons(&self) -> f64 {
        self.alpha_c.norm_sqr()
    }
}

/// Outcome of one chirped run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaptureResult {
    pub captured: bool,
    /// |α_c|² at the end of the pulse.
    pub final_n: f64,
    /// First time after which |α_c|² stays above the capture cut.
    pub capture_time: Option<f64>,
    pub seed: u64,
    /// Stream index within the ensemble keyed by `seed`.
    pub stream: u64,
}

/// Equations of motion with every rate already in angular units (1/ns).
#[derive(Debug, Clone, Copy)]
pub struct ClassicalModel {
    cavity: f64,
    qubit: f64,
    /// 2K, multiplying |α_c|² α_c.
    kerr2: f64,
    /// 2D with D = −E_C/2, multiplying |α_q|² α_q.
    duffing2: f64,
    g: f64,
    kappa: f64,
    gamma1: f64,
}

impl ClassicalModel {
    pub fn new(p: &SystemParams) -> Self {
        Self {
            cavity: TWO_PI * p.cavity_freq,
            qubit: TWO_PI * p.qubit_freq(),
            kerr2: 2.0 * TWO_PI * p.kerr,
            duffing2: 2.0 * TWO_PI * (-0.5 * p.ec),
            g: TWO_PI * p.g01,
            kappa: TWO_PI * p.kappa,
            gamma1: TWO_PI * p.gamma1,
        }
    }

    /// Time derivative for drive frequency `freq` (GHz) and strength
    /// `drive` (GHz), which enters as `drive/2` on the cavity.
    #[inline]
    pub fn rhs(&self, freq: f64, drive: f64, y: &[Complex64], dy: &mut [Complex64]) {
        let w = TWO_PI * freq;
        let (c, q) = (y[0], y[1]);
        let force = 0.5 * TWO_PI * drive;
        let dc = (self.cavity - w + self.kerr2 * c.norm_sqr()) * c + self.g * q + force;
        let dq = (self.qubit - w + self.duffing2 * q.norm_sqr()) * q + self.g * c;
        let mi = Complex64::new(0.0, -1.0);
        dy[0] = mi * dc - 0.5 * self.kappa * c;
        dy[1] = mi * dq - 0.5 * self.gamma1 * q;
    }
}

/// Integrator settings for the classical engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalOptions {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for ClassicalOptions {
    fn default() -> Self {
        Self { rtol: 1e-6, atol: 1e-8 }
    }
}

impl ClassicalOptions {
    fn tolerance(&self) -> Tolerance {
        Tolerance {
            rtol: self.rtol,
            atol: self.atol,
        }
    }
}

/// Integrate from `init` to the end of the pulse, calling `observer` after
/// every accepted step. Returns the final state.
fn run<O>(p: &SystemParams, pulse: &ChirpPulse, init: &ClassicalState, opts: &ClassicalOptions, mut observer: O) -> Result<ClassicalState>
where
    O: FnMut(f64, &[Complex64]),
{
    let model = ClassicalModel::new(p);
    let mut f = |t: f64, y: &[Complex64], dy: &mut [Complex64]| model.rhs(pulse.freq(t), pulse.drive(t), y, dy);
    let mut y = [init.alpha_c, init.alpha_q];
    let mut ode = Dopri5::new(2, opts.tolerance(), 0.01);
    ode.h_max = 1.0;
    ode.integrate(&mut f, init.time, pulse.duration, &mut y, |t, y| {
        let mag2 = y[0].norm_sqr().max(y[1].norm_sqr());
        if !(mag2 <= DIVERGENCE_LIMIT * DIVERGENCE_LIMIT) {
            return Err(Error::Divergence {
                time: t,
                magnitude: mag2.sqrt(),
            });
        }
        observer(t, y);
        Ok(())
    })?;
    Ok(ClassicalState {
        alpha_c: y[0],
        alpha_q: y[1],
        time: pulse.duration,
    })
}

/// Integrate the coupled oscillators over the pulse, sampling every
/// `sample_dt` ns (the first sample is `init`, the last the pulse end).
pub fn integrate_coupled(p: &SystemParams, pulse: &ChirpPulse, init: &ClassicalState, sample_dt: f64) -> Result<Vec<ClassicalState>> {
    integrate_coupled_with(p, pulse, init, sample_dt, &ClassicalOptions::default())
}

pub fn integrate_coupled_with(
    p: &SystemParams,
    pulse: &ChirpPulse,
    init: &ClassicalState,
    sample_dt: f64,
    opts: &ClassicalOptions,
) -> Result<Vec<ClassicalState>> {
    p.validate()?;
    pulse.validate()?;
    if !(sample_dt > 0.0) {
        return Err(invalid("sample_dt", "must be positive"));
    }
    let model = ClassicalModel::new(p);
    let mut f = |t: f64, y: &[Complex64], dy: &mut [Complex64]| model.rhs(pulse.freq(t), pulse.drive(t), y, dy);
    let mut y = [init.alpha_c, init.alpha_q];
    let mut ode = Dopri5::new(2, opts.tolerance(), 0.01);
    ode.h_max = 1.0;
    let mut out = vec![*init];
    let mut t = init.time;
    let mut k = 1usize;
    while t < pulse.duration {
        let next = (init.time + k as f64 * sample_dt).min(pulse.duration);
        ode.integrate(&mut f, t, next, &mut y, |tt, y| {
            let mag2 = y[0].norm_sqr().max(y[1].norm_sqr());
            if !(mag2 <= DIVERGENCE_LIMIT * DIVERGENCE_LIMIT) {
                return Err(Error::Divergence {
                    time: tt,
                    magnitude: mag2.sqrt(),
                });
            }
            Ok(())
        })?;
        t = next;
        k += 1;
        out.push(ClassicalState {
            alpha_c: y[0],
            alpha_q: y[1],
            time: t,
        });
    }
    Ok(out)
}

/// Single-run dump: `time_ns,re_alpha_c,im_alpha_c,re_alpha_q,im_alpha_q`.
pub fn states_csv(states: &[ClassicalState]) -> String {
    let mut s = String::from("time_ns,re_alpha_c,im_alpha_c,re_alpha_q,im_alpha_q\n");
    for st in states {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            st.time, st.alpha_c.re, st.alpha_c.im, st.alpha_q.re, st.alpha_q.im
        ));
    }
    s
}

/// How initial conditions are drawn for a stochastic run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    /// Draw the cavity mode from the vacuum Wigner distribution.
    pub cavity_noise: bool,
    /// Draw the qubit mode from the vacuum Wigner distribution.
    pub qubit_noise: bool,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            cavity_noise: true,
            qubit_noise: true,
        }
    }
}

impl Sampling {
    pub const NOISELESS: Sampling = Sampling {
        cavity_noise: false,
        qubit_noise: false,
    };
}

fn gaussian_pair(rng: &mut JobRng, normal: &Normal<f64>) -> Complex64 {
    Complex64::new(normal.sample(rng), normal.sample(rng))
}

/// Draw an initial state. Four quadrature draws are always consumed (then a
/// phase for the excited proxy), so runs with equal `(seed, stream)` share
/// their noise across qubit states and sampling choices.
pub fn sample_initial(rng: &mut JobRng, qubit: QubitState, sampling: Sampling) -> ClassicalState {
    let normal = Normal::new(0.0, VACUUM_QUADRATURE_STD).expect("positive std");
    let c = gaussian_pair(rng, &normal);
    let q = gaussian_pair(rng, &normal);
    let phase: f64 = rng.random::<f64>() * TWO_PI;
    let mut alpha_q = if sampling.qubit_noise { q } else { Complex64::default() };
    if qubit == QubitState::Excited {
        // One quantum in the qubit oscillator, at a random phase.
        alpha_q += Complex64::from_polar(1.0, phase);
    }
    ClassicalState {
        alpha_c: if sampling.cavity_noise { c } else { Complex64::default() },
        alpha_q,
        time: 0.0,
    }
}

/// Vacuum Wigner draw for both modes.
pub fn sample_vacuum(seed: u64) -> ClassicalState {
    sample_initial(&mut job_rng(seed, 0), QubitState::Ground, Sampling::default())
}

/// Photon number on the locked orbit at the end of the pulse,
/// `(f_end − ω_r)/(2K)`.
pub fn locked_photons(p: &SystemParams, pulse: &ChirpPulse) -> Result<f64> {
    let n = (pulse.f_stop - p.cavity_freq) / (2.0 * p.kerr);
    if !(n.is_finite() && n > 0.0) {
        return Err(invalid(
            "pulse",
            "the chirp must end on the side of the cavity line where the Kerr shift locks (below for K < 0)",
        ));
    }
    Ok(n)
}

/// Options for chirped capture runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaptureOptions {
    pub qubit: QubitState,
    pub sampling: Sampling,
    /// Capture cut as a fraction of the final locked photon number.
    pub cut_fraction: f64,
    pub integrator: ClassicalOptions,
}

impl Default for CaptureOptions {
    fn default() -> Self {
        Self {
            qubit: QubitState::Ground,
            sampling: Sampling::default(),
            cut_fraction: 0.5,
            integrator: ClassicalOptions::default(),
        }
    }
}

/// Run from a given initial state and classify the outcome.
pub fn capture_from(p: &SystemParams, pulse: &ChirpPulse, init: &ClassicalState, opts: &CaptureOptions) -> Result<(bool, f64, Option<f64>)> {
    let cut = opts.cut_fraction * locked_photons(p, pulse)?;
    let mut above_since = if init.photons() > cut { Some(init.time) } else { None };
    let end = run(p, pulse, init, &opts.integrator, |t, y| {
        if y[0].norm_sqr() > cut {
            if above_since.is_none() {
                above_since = Some(t);
            }
        } else {
            above_since = None;
        }
    })?;
    let final_n = end.photons();
    let captured = final_n > cut;
    Ok((captured, final_n, if captured { above_since } else { None }))
}

/// One stochastic run drawn from stream `stream` of ensemble `seed`.
pub fn ar_capture_stream(p: &SystemParams, pulse: &ChirpPulse, opts: &CaptureOptions, seed: u64, stream: u64) -> Result<CaptureResult> {
    let init = sample_initial(&mut job_rng(seed, stream), opts.qubit, opts.sampling);
    let (captured, final_n, capture_time) = capture_from(p, pulse, &init, opts)?;
    Ok(CaptureResult {
        captured,
        final_n,
        capture_time,
        seed,
        stream,
    })
}

/// Vacuum-sampled run with the qubit in its ground state.
pub fn ar_capture(p: &SystemParams, pulse: &ChirpPulse, seed: u64) -> Result<CaptureResult> {
    p.validate()?;
    pulse.validate()?;
    ar_capture_stream(p, pulse, &CaptureOptions::default(), seed, 0)
}

/// Runs `0..n_runs` of ensemble `seed0`, in stream order.
pub fn capture_ensemble(p: &SystemParams, pulse: &ChirpPulse, opts: &CaptureOptions, n_runs: usize, seed0: u64) -> Vec<Result<CaptureResult>> {
    (0..n_runs as u64)
        .into_par_iter()
        .map(|i| ar_capture_stream(p, pulse, opts, seed0, i))
        .collect()
}

/// Frequency (GHz) of the nonlinear normal mode that continues the
/// cavity-like linear mode, at cavity occupation `n`: the undriven,
/// undamped stationary orbit, which is where the weakly damped response
/// peaks. Solved by Newton for `(ω, α_q)` with real amplitudes.
fn backbone_frequency(m: &ClassicalModel, n: f64) -> Result<f64> {
    let c = n.sqrt();
    let mut w = TWO_PI * cavity_like_mode(m);
    let mut q = -m.g * c / (m.qubit - w);
    for _ in 0..100 {
        let f1 = (m.cavity - w + m.kerr2 * n) * c + m.g * q;
        let f2 = (m.qubit - w + m.duffing2 * q * q) * q + m.g * c;
        // Jacobian with respect to (w, q).
        let (j11, j12) = (-c, m.g);
        let (j21, j22) = (-q, m.qubit - w + 3.0 * m.duffing2 * q * q);
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 {
            break;
        }
        let dw = -(j22 * f1 - j12 * f2) / det;
        let dq = -(j11 * f2 - j21 * f1) / det;
        w += dw;
        q += dq;
        if dw.abs() <= 1e-15 * w.abs() && dq.abs() <= 1e-14 * q.abs().max(1e-300) {
            return Ok(w / TWO_PI);
        }
    }
    Err(Error::NotConverged(format!("classical normal mode at n = {n}")))
}

/// Dressed frequency (GHz) of the cavity-like normal mode, no damping.
fn cavity_like_mode(m: &ClassicalModel) -> f64 {
    let mean = 0.5 * (m.cavity + m.qubit);
    let half = 0.5 * (m.cavity - m.qubit);
    let split = (half * half + m.g * m.g).sqrt();
    let w = if m.cavity >= m.qubit { mean + split } else { mean - split };
    w / TWO_PI
}

/// Cavity occupations at which the normal-mode frequency is sampled; small
/// enough that the pull is linear.
const PULL_PHOTONS: [f64; 4] = [1e-3, 2e-3, 3e-3, 4e-3];

/// Small-amplitude frequency pull of the coupled pair, in the `λ` sign
/// convention (positive softens): the resonance sits at `ω − 2λ n`.
pub fn classical_nonlinearity(p: &SystemParams) -> Result<f64> {
    p.validate()?;
    if p.detuning == 0.0 {
        return Err(invalid("detuning", "must be nonzero"));
    }
    let m = ClassicalModel::new(p);
    let fs = PULL_PHOTONS.iter().map(|&n| backbone_frequency(&m, n)).collect::<Result<Vec<_>>>()?;
    let (slope, _) = linear_fit(&PULL_PHOTONS, &fs).ok_or_else(|| Error::Fit("degenerate photon numbers in frequency-pull fit".into()))?;
    Ok(-0.5 * slope)
}

/// Least-squares `y = slope·x + intercept`.
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Deterministic thresholds over a set of chirp rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdScan {
    /// `(|rate| GHz/ns, V_c GHz)`.
    pub table: Vec<(f64, f64)>,
    /// Fitted exponent of `V_c ∝ |rate|^exponent`.
    pub exponent: f64,
}

/// Smallest amplitude (GHz) that captures from a noiseless vacuum start,
/// located by bisection to relative precision `rel_tol`.
pub fn deterministic_threshold(p: &SystemParams, pulse: &ChirpPulse, rel_tol: f64, integrator: &ClassicalOptions) -> Result<f64> {
    let opts = CaptureOptions {
        sampling: Sampling::NOISELESS,
        integrator: *integrator,
        ..CaptureOptions::default()
    };
    let captures = |amp: f64| -> Result<bool> { Ok(capture_from(p, &pulse.with_amplitude(amp), &ClassicalState::vacuum(), &opts)?.0) };
    let mut lo = 0.0;
    let mut hi = 4.0 * p.kappa;
    let mut expansions = 0;
    while !captures(hi)? {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 30 {
            return Err(Error::NotBracketed(format!("no capture up to amplitude {hi} GHz")));
        }
    }
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if captures(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Threshold amplitude for each chirp rate (same sweep endpoints as
/// `template`), and the power-law exponent fitted on log–log axes.
pub fn classical_threshold(p: &SystemParams, template: &ChirpPulse, chirp_rates: &[f64]) -> Result<ThresholdScan> {
    p.validate()?;
    template.validate()?;
    if chirp_rates.len() < 4 {
        return Err(invalid("chirp_rates", "need at least 4 rates"));
    }
    let (min, max) = chirp_rates
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(r.abs()), b.max(r.abs())));
    if !(min > 0.0) || max < 10.0 * min * (1.0 - 1e-9) {
        return Err(invalid("chirp_rates", "rates must be nonzero and span at least one decade"));
    }
    let results: Vec<Result<f64>> = chirp_rates
        .par_iter()
        .map(|&r| deterministic_threshold(p, &template.with_rate(r), 1e-4, &ClassicalOptions::default()))
        .collect();
    let mut table = Vec::with_capacity(chirp_rates.len());
    for (r, v) in chirp_rates.iter().zip(results) {
        table.push((r.abs(), v?));
    }
    let lx: Vec<f64> = table.iter().map(|(r, _)| r.ln()).collect();
    let ly: Vec<f64> = table.iter().map(|(_, v)| v.ln()).collect();
    let (exponent, _) = linear_fit(&lx, &ly).ok_or_else(|| Error::Fit("degenerate rates".into()))?;
    Ok(ThresholdScan { table, exponent })
}
