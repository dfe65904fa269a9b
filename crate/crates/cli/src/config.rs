//! Run configuration: one TOML file per run, validated before any compute.

use std::path::PathBuf;

use autores_core::analysis::{AmplitudeGrid, Engine, EnsembleSpec};
use autores_core::semiclassical::{self, ClassicalOptions, Sampling};
use autores_core::{ChirpPulse, Error as CoreError, QubitState, SystemParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemParams,
    pub pulse: ChirpPulse,
    pub sweep: Sweep,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    /// Not part of the recorded configuration: it never changes the data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

/// Swept parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Qubit detuning Δ/2π (GHz), overriding `system.detuning`.
    Detuning,
    /// Drive amplitude (GHz), overriding `pulse.amplitude`.
    Amplitude,
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Axis::Detuning => "detuning",
            Axis::Amplitude => "amplitude",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: Axis,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        autores_core::analysis::linspace(self.start, self.stop, self.steps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConfig {
    pub kind: Engine,
    pub rtol: f64,
    pub atol: f64,
    /// Vacuum Wigner noise on the cavity amplitude.
    pub cavity_noise: bool,
    /// Vacuum Wigner noise on the qubit-oscillator amplitude.
    pub qubit_noise: bool,
    /// Capture cut as a fraction of the locked photon number at pulse end.
    pub cut_fraction: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        let tol = ClassicalOptions::default();
        let sampling = Sampling::default();
        Self {
            kind: Engine::Semiclassical,
            rtol: tol.rtol,
            atol: tol.atol,
            cavity_noise: sampling.cavity_noise,
            qubit_noise: sampling.qubit_noise,
            cut_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub n_runs: usize,
    pub seed0: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self { n_runs: 400, seed0: 0 }
    }
}

/// Which initial qubit states a command simulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QubitChoice {
    Ground,
    Excited,
    Both,
}

impl QubitChoice {
    pub fn states(self) -> Vec<QubitState> {
        match self {
            QubitChoice::Ground => vec![QubitState::Ground],
            QubitChoice::Excited => vec![QubitState::Excited],
            QubitChoice::Both => vec![QubitState::Ground, QubitState::Excited],
        }
    }
}

/// Which avoided crossings the spectrum command reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingFilter {
    /// Every anticrossing between adjacent branches.
    All,
    /// Only anticrossings involving a ground-qubit branch `|0, n⟩`.
    Ground,
}

/// Weak-probe transmission settings for the dynamical λ estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub n_levels: usize,
    pub n_photons: usize,
    /// Pump photon number for the shifted lineshape.
    pub nbar: f64,
    /// Pump frequency minus the dressed cavity frequency (GHz).
    pub pump_offset: f64,
    /// Probe scan half-width around the cavity (GHz).
    pub span: f64,
    pub points: usize,
    pub probe_amp: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            n_levels: 2,
            n_photons: 10,
            nbar: 0.4,
            pump_offset: 0.02,
            span: 0.006,
            points: 121,
            probe_amp: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub qubit: QubitChoice,
    /// Excitation manifolds scanned for avoided crossings.
    pub manifolds: Vec<usize>,
    pub crossing_filter: CrossingFilter,
    /// Highest `q + n` tracked by the spectrum command.
    pub max_excitation: usize,
    /// Ground-ladder levels `|0, 0..=n_fit⟩` used for the λ fit.
    pub n_fit: usize,
    /// Compute the classical pull coefficient alongside the spectral one.
    pub classical: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeConfig>,
    /// Qubit energy relaxation time for the fidelity correction (ns).
    pub t1_ns: f64,
    /// Override of the ensemble-median capture time (ns).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capture_time: Option<f64>,
    /// Sampling interval of transient records (ns).
    pub sample_dt: f64,
    pub grid: AmplitudeGrid,
    /// Map points within this distance of an avoided crossing are flagged (GHz).
    pub flag_window: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            qubit: QubitChoice::Both,
            manifolds: vec![4, 5],
            crossing_filter: CrossingFilter::All,
            max_excitation: 6,
            n_fit: autores_core::spectrum::DEFAULT_N_FIT,
            classical: true,
            probe: None,
            t1_ns: 1000.0,
            capture_time: None,
            sample_dt: 1.0,
            grid: AmplitudeGrid::Auto {
                points: 21,
                rel_span: 0.3,
                retries: 2,
            },
            flag_window: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

/// Subcommands, for validation of command-specific constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Nonlinearity,
    Chirp,
    Scurve,
    Fidelity,
    ThresholdMap,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Nonlinearity => "nonlinearity",
            Command::Chirp => "chirp",
            Command::Scurve => "scurve",
            Command::Fidelity => "fidelity",
            Command::ThresholdMap => "threshold-map",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [
            Command::Spectrum,
            Command::Nonlinearity,
            Command::Chirp,
            Command::Scurve,
            Command::Fidelity,
            Command::ThresholdMap,
        ]
        .into_iter()
        .find(|c| c.name() == s)
    }

    fn axis(self) -> Axis {
        match self {
            Command::Spectrum | Command::Nonlinearity | Command::ThresholdMap => Axis::Detuning,
            Command::Chirp | Command::Scurve | Command::Fidelity => Axis::Amplitude,
        }
    }

    fn needs_capture(self) -> bool {
        matches!(self, Command::Chirp | Command::Scurve | Command::Fidelity | Command::ThresholdMap)
    }
}

fn bad(path: impl Into<String>, reason: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.into(),
        reason: reason.into(),
    }
}

/// Re-home a core validation error under a config section.
fn core_field(section: &str, e: CoreError) -> CliError {
    match e {
        CoreError::InvalidParameter { field, reason } => bad(format!("{section}.{field}"), reason),
        CoreError::LadderInversion { .. } => bad(format!("{section}.n_levels"), e.to_string()),
        CoreError::DimensionTooLarge { .. } => bad(format!("{section}.n_photons"), e.to_string()),
        other => bad(section, other.to_string()),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| bad("<config>", e.message().to_string() + &span_hint(text, e.span())))
    }

    /// Canonical TOML form, as recorded in output headers.
    pub fn to_toml(&self) -> String {
        let recorded = RunConfig {
            output: None,
            ..self.clone()
        };
        toml::to_string(&recorded).expect("configuration is always representable as TOML")
    }

    /// Parameters at one point of a detuning sweep.
    pub fn system_at(&self, detuning: f64) -> SystemParams {
        SystemParams {
            detuning,
            ..self.system.clone()
        }
    }

    pub fn sampling(&self) -> Sampling {
        Sampling {
            cavity_noise: self.engine.cavity_noise,
            qubit_noise: self.engine.qubit_noise,
        }
    }

    pub fn integrator(&self) -> ClassicalOptions {
        ClassicalOptions {
            rtol: self.engine.rtol,
            atol: self.engine.atol,
        }
    }

    pub fn ensemble_spec(&self) -> EnsembleSpec {
        EnsembleSpec {
            engine: self.engine.kind,
            n_runs: self.ensemble.n_runs,
            seed0: self.ensemble.seed0,
            sampling: self.sampling(),
            cut_fraction: self.engine.cut_fraction,
            integrator: self.integrator(),
        }
    }

    /// Fail fast on anything inconsistent, naming the offending field.
    pub fn validate(&self, cmd: Command) -> Result<(), CliError> {
        self.system.validate().map_err(|e| core_field("system", e))?;
        self.pulse.validate().map_err(|e| core_field("pulse", e))?;

        let s = &self.sweep;
        if s.parameter != cmd.axis() {
            return Err(bad(
                "sweep.parameter",
                format!("`{}` sweeps {}, not {}", cmd.name(), cmd.axis(), s.parameter),
            ));
        }
        if !(s.start.is_finite() && s.stop.is_finite()) {
            return Err(bad("sweep.start", "sweep bounds must be finite"));
        }
        if s.steps == 0 {
            return Err(bad("sweep.steps", "must be at least 1"));
        }
        if s.steps > 1 && !(s.stop > s.start) {
            return Err(bad("sweep.stop", "must exceed sweep.start"));
        }
        if s.parameter == Axis::Amplitude && s.start < 0.0 {
            return Err(bad("sweep.start", "amplitudes must be non-negative"));
        }
        for d in self.sweep_points_detuning() {
            self.system_at(d).validate().map_err(|e| core_field("sweep", e))?;
        }

        let e = &self.engine;
        if !(e.rtol > 0.0 && e.rtol < 1.0) {
            return Err(bad("engine.rtol", "must lie in (0, 1)"));
        }
        if !(e.atol > 0.0) {
            return Err(bad("engine.atol", "must be positive"));
        }
        if !(e.cut_fraction > 0.0 && e.cut_fraction < 1.0) {
            return Err(bad("engine.cut_fraction", "must lie in (0, 1)"));
        }
        if self.ensemble.n_runs == 0 {
            return Err(bad("ensemble.n_runs", "must be at least 1"));
        }

        let a = &self.analysis;
        if a.n_fit < 2 {
            return Err(bad("analysis.n_fit", "need at least 2 for a quadratic fit"));
        }
        if matches!(cmd, Command::Nonlinearity) && a.n_fit >= self.system.n_photons {
            return Err(bad(
                "analysis.n_fit",
                format!("must be below system.n_photons = {}", self.system.n_photons),
            ));
        }
        if let Some(m) = a.manifolds.iter().find(|m| **m > a.max_excitation) {
            return Err(bad(
                "analysis.manifolds",
                format!("manifold {m} exceeds analysis.max_excitation = {}", a.max_excitation),
            ));
        }
        if !(a.t1_ns > 0.0) {
            return Err(bad("analysis.t1_ns", "must be positive"));
        }
        if let Some(t) = a.capture_time {
            if !(t >= 0.0) {
                return Err(bad("analysis.capture_time", "must be non-negative"));
            }
        }
        if !(a.sample_dt > 0.0) {
            return Err(bad("analysis.sample_dt", "must be positive"));
        }
        if !(a.flag_window >= 0.0) {
            return Err(bad("analysis.flag_window", "must be non-negative"));
        }
        match &a.grid {
            AmplitudeGrid::Fixed(v) => {
                if v.is_empty() || v.iter().any(|x| !(*x >= 0.0)) {
                    return Err(bad("analysis.grid.fixed", "need non-negative amplitudes"));
                }
            }
            AmplitudeGrid::Auto { points, rel_span, .. } => {
                if *points < 3 {
                    return Err(bad("analysis.grid.auto.points", "need at least 3"));
                }
                if !(*rel_span > 0.0 && *rel_span < 1.0) {
                    return Err(bad("analysis.grid.auto.rel_span", "must lie in (0, 1)"));
                }
            }
        }
        if let Some(pr) = &a.probe {
            if pr.n_levels < 2 || pr.n_photons < 3 {
                return Err(bad("analysis.probe.n_photons", "need n_levels ≥ 2 and n_photons ≥ 3"));
            }
            if pr.n_levels * pr.n_photons > autores_core::quantum::MAX_LIOUVILLE_DIM {
                return Err(bad(
                    "analysis.probe.n_photons",
                    format!("n_levels·n_photons must not exceed {}", autores_core::quantum::MAX_LIOUVILLE_DIM),
                ));
            }
            if !(pr.nbar > 0.0) {
                return Err(bad("analysis.probe.nbar", "must be positive"));
            }
            if !(pr.pump_offset.abs() > 5.0 * self.system.kappa) {
                return Err(bad("analysis.probe.pump_offset", "pump must sit more than 5κ from the cavity"));
            }
            if !(pr.span > 0.0) || pr.points < 5 || !(pr.probe_amp > 0.0) {
                return Err(bad("analysis.probe", "need span > 0, points ≥ 5 and probe_amp > 0"));
            }
        }

        if cmd.needs_capture() {
            for d in self.sweep_points_detuning() {
                semiclassical::locked_photons(&self.system_at(d), &self.pulse).map_err(|e| core_field("pulse", e))?;
            }
        }
        Ok(())
    }

    /// Detunings visited by the run (a single one for amplitude sweeps).
    fn sweep_points_detuning(&self) -> Vec<f64> {
        match self.sweep.parameter {
            Axis::Detuning => self.sweep.values(),
            Axis::Amplitude => vec![self.system.detuning],
        }
    }
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(r) => {
            let line = text[..r.start.min(text.len())].matches('\n').count() + 1;
            format!(" (line {line})")
        }
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[system]
cavity_freq = 5.3445
kerr = -6e-5
ej = 100.0
ec = 0.28
g01 = 0.118
detuning = 0.59
n_levels = 7
n_photons = 8
kappa = 5.938e-4
gamma1 = 1.5915e-4

[pulse]
f_start = 5.54
f_stop = 5.14
duration = 500.0
amplitude = 0.0

[sweep]
parameter = "amplitude"
start = 0.05
stop = 0.25
steps = 5
"#;

    #[test]
    fn defaults_fill_optional_sections() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.ensemble, EnsembleConfig::default());
        assert_eq!(c.engine.kind, Engine::Semiclassical);
        c.validate(Command::Scurve).unwrap();
    }

    #[test]
    fn canonical_form_round_trips() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        let again = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.to_toml(), again.to_toml());
    }

    #[test]
    fn wrong_axis_names_the_field() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        match c.validate(Command::Spectrum) {
            Err(CliError::Config { path, .. }) => assert_eq!(path, "sweep.parameter"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn physics_errors_carry_section_paths() {
        let text = MINIMAL.replace("kappa = 5.938e-4", "kappa = -1.0");
        let c = RunConfig::from_toml(&text).unwrap();
        match c.validate(Command::Scurve) {
            Err(CliError::Config { path, .. }) => assert_eq!(path, "system.kappa"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("[pulse]", "[pulse]\nphase = 1.0");
        assert!(matches!(RunConfig::from_toml(&text), Err(CliError::Config { .. })));
    }
}
