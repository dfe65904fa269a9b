//! Monte Carlo wavefunction trajectories in the frame rotating with the
//! instantaneous drive frequency, and weak-probe transmission around a
//! pumped steady state.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{self, Coupling, OperatorMatrix, SystemParams};
use crate::ode::{Dopri5, Tolerance};
use crate::pulse::ChirpPulse;
use crate::rng::{job_rng, JobRng};
use crate::semiclassical::locked_photons;
use crate::{QubitState, TWO_PI};

/// Compressed sparse rows, enough for matrix–vector products.
#[derive(Debug, Clone)]
struct Sparse {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl Sparse {
    fn from_dense(m: &DMatrix<Complex64>) -> Self {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != Complex64::default() {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { row_ptr, cols, vals }
    }

    /// `out += scale · M x`.
    #[inline]
    fn mul_add(&self, scale: Complex64, x: &[Complex64], out: &mut [Complex64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::default();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *o += scale * acc;
        }
    }

    fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|v| *v = Complex64::default());
        self.mul_add(Complex64::from(1.0), x, out);
    }
}

/// One stochastic realisation, sampled on a regular grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    /// ⟨a†a⟩.
    pub mean_n: Vec<f64>,
    /// |⟨a⟩|.
    pub field_mag: Vec<f64>,
    /// Population outside the transmon ground state.
    pub qubit_pop: Vec<f64>,
    /// `(time ns, channel index into collapse_operators)`.
    pub jumps: Vec<(f64, usize)>,
    pub seed: u64,
    pub stream: u64,
}

impl TrajectoryRecord {
    /// `time_ns,mean_n,field_mag,qubit_pop`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("time_ns,mean_n,field_mag,qubit_pop\n");
        for i in 0..self.times.len() {
            s.push_str(&format!("{},{},{},{}\n", self.times[i], self.mean_n[i], self.field_mag[i], self.qubit_pop[i]));
        }
        s
    }

    pub fn final_mean_n(&self) -> f64 {
        *self.mean_n.last().unwrap_or(&0.0)
    }
}

/// Integrator and monitoring settings for trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest tolerated population of the top Fock level.
    pub truncation_limit: f64,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            truncation_limit: 1e-4,
        }
    }
}

/// Precomputed operators for trajectories of one system and pulse; shared
/// read-only between worker threads.
pub struct TrajectorySolver {
    params: SystemParams,
    pulse: ChirpPulse,
    opts: TrajectoryOptions,
    /// −i·H_RWA − ½ Σ L†L, angular units.
    drift: Sparse,
    /// Total excitation number (diagonal).
    excitation: Vec<f64>,
    /// a† + a.
    drive: Sparse,
    jumps: Vec<Sparse>,
    photon: Vec<f64>,
    ground: Vec<bool>,
    top_fock: Vec<bool>,
}

impl TrajectorySolver {
    pub fn new(p: &SystemParams, pulse: &ChirpPulse, opts: TrajectoryOptions) -> Result<Self> {
        p.validate()?;
        pulse.validate()?;
        let rwa = SystemParams {
            coupling: Coupling::Rwa,
            ..p.clone()
        };
        let h = model::build_hamiltonian(&rwa)?;
        let collapse = model::collapse_operators(p);
        let dim = p.dim();
        let mut drift = h.into_matrix() * Complex64::new(0.0, -TWO_PI);
        for c in &collapse {
            let l = c.operator.matrix();
            drift -= l.adjoint() * l * Complex64::from(0.5);
        }
        let excitation = (0..dim).map(|i| {
            let (q, n) = p.label(i);
            (q + n) as f64
        });
        Ok(Self {
            params: p.clone(),
            pulse: pulse.clone(),
            opts,
            drift: Sparse::from_dense(&drift),
            excitation: excitation.collect(),
            drive: Sparse::from_dense(model::drive_operator(p).matrix()),
            jumps: collapse.iter().map(|c| Sparse::from_dense(c.operator.matrix())).collect(),
            photon: (0..dim).map(|i| p.label(i).1 as f64).collect(),
            ground: (0..dim).map(|i| p.label(i).0 == 0).collect(),
            top_fock: (0..dim).map(|i| p.label(i).1 == p.n_photons - 1).collect(),
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.photon.len()
    }

    fn rhs(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        self.drift.apply(y, dy);
        let w = Complex64::new(0.0, TWO_PI * self.pulse.freq(t));
        for i in 0..y.len() {
            dy[i] += w * self.excitation[i] * y[i];
        }
        let d = self.pulse.drive(t);
        if d != 0.0 {
            self.drive.mul_add(Complex64::new(0.0, -0.5 * TWO_PI * d), y, dy);
        }
    }

    fn norm_sqr(y: &[Complex64]) -> f64 {
        y.iter().map(|v| v.norm_sqr()).sum()
    }

    /// `(⟨a†a⟩, |⟨a⟩|, excited population, top-Fock population)` of the
    /// normalised state.
    fn observe(&self, y: &[Complex64]) -> (f64, f64, f64, f64) {
        let norm = Self::norm_sqr(y);
        let nc = self.params.n_photons;
        let mut mean_n = 0.0;
        let mut ground = 0.0;
        let mut top = 0.0;
        let mut field = Complex64::default();
        for i in 0..y.len() {
            let pop = y[i].norm_sqr();
            mean_n += self.photon[i] * pop;
            if self.ground[i] {
                ground += pop;
            }
            if self.top_fock[i] {
                top += pop;
            }
            if i % nc != 0 {
                field += y[i - 1].conj() * self.photon[i].sqrt() * y[i];
            }
        }
        (mean_n / norm, field.norm() / norm, 1.0 - ground / norm, top / norm)
    }

    fn initial_state(&self, init: QubitState) -> Vec<Complex64> {
        let mut y = vec![Complex64::default(); self.dim()];
        y[self.params.index(init.index(), 0)] = Complex64::from(1.0);
        y
    }

    /// Apply a quantum jump chosen with probability ∝ ‖L_k ψ‖²; returns the
    /// channel and leaves the normalised post-jump state in `y`.
    fn jump(&self, rng: &mut JobRng, y: &mut [Complex64], scratch: &mut [Complex64]) -> usize {
        let mut weights = Vec::with_capacity(self.jumps.len());
        for l in &self.jumps {
            l.apply(y, scratch);
            weights.push(Self::norm_sqr(scratch));
        }
        let total: f64 = weights.iter().sum();
        let mut pick = rng.random::<f64>() * total;
        let mut channel = weights.len() - 1;
        for (k, w) in weights.iter().enumerate() {
            if pick < *w {
                channel = k;
                break;
            }
            pick -= w;
        }
        self.jumps[channel].apply(y, scratch);
        let norm = Self::norm_sqr(scratch).sqrt();
        for (a, b) in y.iter_mut().zip(scratch.iter()) {
            *a = *b / norm;
        }
        channel
    }

    /// Evolve one trajectory; returns the record and the normalised final
    /// state.
    pub fn run(&self, init: QubitState, seed: u64, stream: u64, sample_dt: f64) -> Result<(TrajectoryRecord, Vec<Complex64>)> {
        if !(sample_dt > 0.0) {
            return Err(invalid("sample_dt", "must be positive"));
        }
        let mut rng = job_rng(seed, stream);
        let tol = Tolerance {
            rtol: self.opts.rtol,
            atol: self.opts.atol,
        };
        let mut y = self.initial_state(init);
        let mut scratch = vec![Complex64::default(); y.len()];
        let mut ode = Dopri5::new(y.len(), tol, 1e-3);
        let mut f = |t: f64, y: &[Complex64], dy: &mut [Complex64]| self.rhs(t, y, dy);
        let mut threshold: f64 = rng.random();
        let mut rec = TrajectoryRecord {
            times: Vec::new(),
            mean_n: Vec::new(),
            field_mag: Vec::new(),
            qubit_pop: Vec::new(),
            jumps: Vec::new(),
            seed,
            stream,
        };
        let record = |rec: &mut TrajectoryRecord, t: f64, y: &[Complex64]| {
            let (n, a, q, _) = self.observe(y);
            rec.times.push(t);
            rec.mean_n.push(n);
            rec.field_mag.push(a);
            rec.qubit_pop.push(q);
        };
        let end = self.pulse.duration;
        let mut t = 0.0;
        record(&mut rec, t, &y);
        let mut k = 1usize;
        while t < end {
            let target = (k as f64 * sample_dt).min(end);
            while t < target {
                let mut h = ode.h;
                let last = t + h >= target;
                if last {
                    h = target - t;
                }
                if h < 1e-12 * t.abs().max(1.0) {
                    return Err(Error::StepUnderflow { time: t });
                }
                let err = ode.try_step(&mut f, t, &y, h);
                if !(err <= 1.0) {
                    ode.h = if err.is_finite() { h * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0) } else { 0.2 * h };
                    continue;
                }
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                let norm_new = Self::norm_sqr(ode.y_new());
                if norm_new > threshold {
                    ode.accept(&mut y);
                    t = if last { target } else { t + h };
                    ode.h = if last { ode.h.max(h * grow) } else { h * grow };
                } else {
                    // Locate the norm crossing inside the step (Illinois
                    // regula falsi on the monotone norm decay).
                    let norm_old = Self::norm_sqr(&y);
                    let (mut a, mut ga) = (0.0, norm_old - threshold);
                    let (mut b, mut gb) = (h, norm_new - threshold);
                    let mut side = 0i8;
                    let mut hs = h;
                    for _ in 0..100 {
                        hs = (a * gb - b * ga) / (gb - ga);
                        ode.try_step(&mut f, t, &y, hs);
                        let g = Self::norm_sqr(ode.y_new()) - threshold;
                        if g.abs() <= 1e-12 || (b - a) <= 1e-14 * h {
                            break;
                        }
                        if g > 0.0 {
                            a = hs;
                            ga = g;
                            if side == 1 {
                                gb *= 0.5;
                            }
                            side = 1;
                        } else {
                            b = hs;
                            gb = g;
                            if side == -1 {
                                ga *= 0.5;
                            }
                            side = -1;
                        }
                    }
                    ode.accept(&mut y);
                    t += hs;
                    let channel = self.jump(&mut rng, &mut y, &mut scratch);
                    ode.invalidate();
                    rec.jumps.push((t, channel));
                    threshold = rng.random();
                }
                let (_, _, _, top) = self.observe(&y);
                if top > self.opts.truncation_limit {
                    return Err(Error::Truncation { time: t, population: top });
                }
            }
            record(&mut rec, t, &y);
            k += 1;
        }
        let norm = Self::norm_sqr(&y).sqrt();
        y.iter_mut().for_each(|v| *v /= norm);
        Ok((rec, y))
    }
}

/// One trajectory from `|init, 0⟩` with observables every `sample_dt` ns.
pub fn evolve_trajectory(p: &SystemParams, pulse: &ChirpPulse, init: QubitState, seed: u64, sample_dt: f64) -> Result<TrajectoryRecord> {
    let solver = TrajectorySolver::new(p, pulse, TrajectoryOptions::default())?;
    Ok(solver.run(init, seed, 0, sample_dt)?.0)
}

/// Runs `0..n` of ensemble `seed0`, in stream order.
pub fn trajectory_ensemble(solver: &TrajectorySolver, init: QubitState, n: usize, seed0: u64, sample_dt: f64) -> Vec<Result<(TrajectoryRecord, Vec<Complex64>)>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| solver.run(init, seed0, i, sample_dt))
        .collect()
}

/// Capture fraction and its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaptureEstimate {
    pub p: f64,
    pub stderr: f64,
    pub n: usize,
}

impl CaptureEstimate {
    pub fn from_counts(captured: usize, n: usize) -> Self {
        let p = if n == 0 { 0.0 } else { captured as f64 / n as f64 };
        let stderr = if n == 0 { 0.0 } else { (p * (1.0 - p) / n as f64).sqrt() };
        Self { p, stderr, n }
    }
}

/// Largest fraction of runs that may abort before an ensemble is rejected.
pub const MAX_ABORT_FRACTION: f64 = 0.01;

/// Keep successful runs in order; reject the ensemble if more than 1% failed.
pub fn collect_runs<T>(runs: Vec<Result<T>>) -> Result<Vec<T>> {
    let total = runs.len();
    let mut ok = Vec::with_capacity(total);
    let mut failed = 0;
    let mut first = None;
    for r in runs {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                failed += 1;
                first.get_or_insert(e);
            }
        }
    }
    if let Some(first) = first {
        if failed as f64 > MAX_ABORT_FRACTION * total as f64 {
            return Err(Error::TooManyAborts {
                failed,
                total,
                first: Box::new(first),
            });
        }
    }
    Ok(ok)
}

/// Fraction of trajectories ending with ⟨a†a⟩ above half the locked-orbit
/// photon number at the final chirp frequency.
pub fn capture_probability_quantum(p: &SystemParams, pulse: &ChirpPulse, init: QubitState, n_traj: usize, seed0: u64) -> Result<CaptureEstimate> {
    let cut = 0.5 * locked_photons(p, pulse)?;
    let solver = TrajectorySolver::new(p, pulse, TrajectoryOptions::default())?;
    let runs = trajectory_ensemble(&solver, init, n_traj, seed0, pulse.duration);
    let ok = collect_runs(runs)?;
    let captured = ok.iter().filter(|(r, _)| r.final_mean_n() > cut).count();
    Ok(CaptureEstimate::from_counts(captured, ok.len()))
}

/// Vectorised Lindblad generator (column stacking) for `H` in GHz and
/// jump operators carrying √(angular rate).
pub fn liouvillian(h: &OperatorMatrix, collapse: &[model::CollapseOperator]) -> DMatrix<Complex64> {
    let d = h.dim();
    let id = DMatrix::<Complex64>::identity(d, d);
    let hm = h.matrix() * Complex64::from(TWO_PI);
    let mi = Complex64::new(0.0, -1.0);
    let mut l = (id.kronecker(&hm) - hm.transpose().kronecker(&id)) * mi;
    for c in collapse {
        let a = c.operator.matrix();
        let ada = a.adjoint() * a;
        l += a.conjugate().kronecker(a);
        l -= id.kronecker(&ada) * Complex64::from(0.5);
        l -= ada.transpose().kronecker(&id) * Complex64::from(0.5);
    }
    l
}

/// Upper-Hessenberg form `L = Q H Q†` allowing O(n²) shifted solves.
struct ShiftedSolver {
    q: DMatrix<Complex64>,
    h: DMatrix<Complex64>,
}

impl ShiftedSolver {
    fn new(l: DMatrix<Complex64>) -> Self {
        let (q, h) = l.hessenberg().unpack();
        Self { q, h }
    }

    /// Solve `(L + σ) x = b`.
    fn solve(&self, sigma: Complex64, b: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        let n = self.h.nrows();
        let mut m = self.h.clone();
        for i in 0..n {
            m[(i, i)] += sigma;
        }
        let mut rhs = self.q.adjoint() * b;
        // Gaussian elimination with partial pivoting; only the
        // subdiagonal needs eliminating.
        for k in 0..n.saturating_sub(1) {
            if m[(k + 1, k)].norm() > m[(k, k)].norm() {
                m.swap_rows(k, k + 1);
                rhs.swap_rows(k, k + 1);
            }
            let piv = m[(k, k)];
            if piv == Complex64::default() {
                continue;
            }
            let factor = m[(k + 1, k)] / piv;
            if factor != Complex64::default() {
                for j in k..n {
                    let v = m[(k, j)];
                    m[(k + 1, j)] -= factor * v;
                }
                let v = rhs[k];
                rhs[k + 1] -= factor * v;
            }
        }
        let scale = m.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut x = DVector::<Complex64>::zeros(n);
        for i in (0..n).rev() {
            let mut acc = rhs[i];
            for j in i + 1..n {
                acc -= m[(i, j)] * x[j];
            }
            let piv = if m[(i, i)].norm() <= 1e-300 { Complex64::from(1e-16 * scale) } else { m[(i, i)] };
            x[i] = acc / piv;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotConverged("singular shifted Liouvillian".into()));
        }
        Ok(&self.q * x)
    }
}

/// Largest Hilbert-space dimension for the dense Liouvillian solves.
pub const MAX_LIOUVILLE_DIM: usize = 50;

/// Weak-probe transmission around a pumped steady state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionCurve {
    pub freqs: Vec<f64>,
    /// |⟨a⟩| at the probe frequency.
    pub magnitudes: Vec<f64>,
    /// ⟨a†a⟩ in the pumped steady state.
    pub pump_nbar: f64,
    /// Peak frequency (GHz), parabola-refined around the grid maximum.
    pub resonance: f64,
}

impl TransmissionCurve {
    /// `probe_freq_ghz,magnitude`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("probe_freq_ghz,magnitude\n");
        for (f, m) in self.freqs.iter().zip(&self.magnitudes) {
            s.push_str(&format!("{f},{m}\n"));
        }
        s
    }
}

/// Probe response of the system while a tone at `pump_freq` holds about
/// `pump_nbar` photons, calibrated as a linear resonator at the dressed
/// |0,0⟩→|0,1⟩ line (the achieved value is reported back). Each probe frequency is
/// solved in linear response about the pump-frame steady state, i.e. the
/// long-time limit of pump + weak probe, demodulated at the probe.
pub fn steady_transmission(p: &SystemParams, probe_freqs: &[f64], probe_amp: f64, pump_freq: f64, pump_nbar: f64) -> Result<TransmissionCurve> {
    p.validate()?;
    if probe_freqs.is_empty() {
        return Err(invalid("probe_freqs", "must not be empty"));
    }
    if !(probe_amp > 0.0) {
        return Err(invalid("probe_amp", "must be positive"));
    }
    if !(pump_nbar >= 0.0) {
        return Err(invalid("pump_nbar", "must be non-negative"));
    }
    let rwa = SystemParams {
        coupling: Coupling::Rwa,
        ..p.clone()
    };
    let pump_amp = if pump_nbar == 0.0 {
        0.0
    } else {
        let line = p.cavity_freq + crate::spectrum::dispersive_shift(&rwa, 0)?;
        crate::analysis::pump_amplitude_for_nbar(p, pump_freq - line, pump_nbar)?
    };
    let dim = p.dim();
    if dim > MAX_LIOUVILLE_DIM {
        return Err(Error::DimensionTooLarge {
            dim,
            max: MAX_LIOUVILLE_DIM,
        });
    }
    // Pump frame: H − ω_p N + (ε_p/2)(a + a†).
    let mut h = model::build_hamiltonian(&rwa)?.into_matrix();
    let n_exc = model::excitation_operator(p).into_matrix();
    h -= n_exc * Complex64::from(pump_freq);
    h += model::drive_operator(p).into_matrix() * Complex64::from(0.5 * pump_amp);
    let h = OperatorMatrix::new(h);
    let collapse = model::collapse_operators(p);
    let solver = ShiftedSolver::new(liouvillian(&h, &collapse));

    // Null vector of L by shifted inverse iteration, normalised to unit trace.
    let trace_of = |v: &DVector<Complex64>| (0..dim).map(|i| v[i * dim + i]).sum::<Complex64>();
    let mut v = DVector::<Complex64>::zeros(dim * dim);
    for i in 0..dim {
        v[i * dim + i] = Complex64::from(1.0 / dim as f64);
    }
    let scale = TWO_PI * (p.kappa + p.gamma1).max(1e-9);
    for _ in 0..4 {
        v = solver.solve(Complex64::from(-1e-9 * scale), &v)?;
        let tr = trace_of(&v);
        v /= tr;
    }
    let rho = DMatrix::from_column_slice(dim, dim, v.as_slice());
    let rho = (&rho + rho.adjoint()) * Complex64::from(0.5);
    let a = model::annihilation(p).into_matrix();
    let ad = a.adjoint();
    let pump_n = (&ad * &a * &rho).trace().re;

    // Source term i(ε/2)[a†, ρ_ss].
    let comm = &ad * &rho - &rho * &ad;
    let src = DVector::from_column_slice((comm * Complex64::new(0.0, 0.5 * TWO_PI * probe_amp)).as_slice());
    let mut magnitudes = Vec::with_capacity(probe_freqs.len());
    for &f in probe_freqs {
        let nu = TWO_PI * (f - pump_freq);
        let x = solver.solve(Complex64::new(0.0, nu), &src)?;
        let rp = DMatrix::from_column_slice(dim, dim, x.as_slice());
        magnitudes.push((&a * rp).trace().norm());
    }
    let resonance = refine_peak(probe_freqs, &magnitudes);
    Ok(TransmissionCurve {
        freqs: probe_freqs.to_vec(),
        magnitudes,
        pump_nbar: pump_n,
        resonance,
    })
}

/// Grid argmax refined by a parabola through its neighbours.
fn refine_peak(x: &[f64], y: &[f64]) -> f64 {
    let i = y
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > y[best] { i } else { best });
    if i == 0 || i + 1 == y.len() {
        return x[i];
    }
    let (x0, x1, x2) = (x[i - 1], x[i], x[i + 1]);
    let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
    let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
    let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
    let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
    if a >= 0.0 {
        return x1;
    }
    (-b / (2.0 * a)).clamp(x0, x2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SystemParams {
        SystemParams {
            n_levels: 2,
            n_photons: 3,
            ..SystemParams::device(-0.5)
        }
    }

    #[test]
    fn undriven_vacuum_stays_empty() {
        let p = tiny();
        let rec = evolve_trajectory(&p, &ChirpPulse::fixed(5.3, 100.0, 0.0), QubitState::Ground, 1, 10.0).unwrap();
        assert_eq!(rec.times.len(), 11);
        assert!(rec.mean_n.iter().all(|n| *n < 1e-12));
        assert!(rec.jumps.is_empty());
    }

    #[test]
    fn trajectories_are_reproducible() {
        let p = SystemParams {
            kappa: 0.02,
            n_photons: 8,
            ..tiny()
        };
        let pulse = ChirpPulse::fixed(p.cavity_freq, 200.0, 0.01);
        let a = evolve_trajectory(&p, &pulse, QubitState::Excited, 9, 5.0).unwrap();
        let b = evolve_trajectory(&p, &pulse, QubitState::Excited, 9, 5.0).unwrap();
        assert_eq!(a, b);
        assert!(!a.jumps.is_empty());
    }

    #[test]
    fn truncation_is_detected() {
        let p = SystemParams { n_photons: 3, ..tiny() };
        let pulse = ChirpPulse::fixed(p.cavity_freq, 200.0, 0.05);
        let err = evolve_trajectory(&p, &pulse, QubitState::Ground, 1, 10.0).unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }), "{err}");
    }

    #[test]
    fn peak_refinement_recovers_parabola_vertex() {
        let x: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 - (v - 0.437) * (v - 0.437)).collect();
        assert!((refine_peak(&x, &y) - 0.437).abs() < 1e-12);
    }

    #[test]
    fn bare_cavity_lorentzian() {
        let p = SystemParams {
            g01: 0.0,
            kerr: 0.0,
            n_levels: 2,
            n_photons: 4,
            ..SystemParams::device(1.0)
        };
        let k = p.kappa;
        let freqs: Vec<f64> = (-20..=20).map(|i| p.cavity_freq + i as f64 * 0.1 * k).collect();
        let curve = steady_transmission(&p, &freqs, 1e-6, p.cavity_freq, 0.0).unwrap();
        assert!((curve.resonance - p.cavity_freq).abs() < 1e-9);
        for (f, m) in freqs.iter().zip(&curve.magnitudes) {
            let d = TWO_PI * (f - p.cavity_freq);
            let want = 0.5e-6 * TWO_PI / (d * d + (0.5 * TWO_PI * k).powi(2)).sqrt();
            assert!((m / want - 1.0).abs() < 1e-6, "{f}: {m} vs {want}");
        }
    }
}
