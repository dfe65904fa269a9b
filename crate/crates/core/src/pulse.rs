//! Linearly chirped drive.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Envelope {
    #[default]
    Rectangular,
    /// Raised-cosine turn-on and turn-off, each `ramp` ns long.
    RaisedCosine { ramp: f64 },
}

/// Drive whose frequency sweeps linearly from `f_start` to `f_stop` (GHz)
/// over `duration` ns. `amplitude` (GHz) multiplies `(a† + a)/2` in the
/// frame rotating with the drive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChirpPulse {
    pub f_start: f64,
    pub f_stop: f64,
    pub duration: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub envelope: Envelope,
}

impl ChirpPulse {
    /// 5.54 → 5.14 GHz in 500 ns, rectangular.
    pub fn readout(amplitude: f64) -> Self {
        Self {
            f_start: 5.54,
            f_stop: 5.14,
            duration: 500.0,
            amplitude,
            envelope: Envelope::Rectangular,
        }
    }

    /// Constant tone at `freq` for `duration` ns.
    pub fn fixed(freq: f64, duration: f64, amplitude: f64) -> Self {
        Self {
            f_start: freq,
            f_stop: freq,
            duration,
            amplitude,
            envelope: Envelope::Rectangular,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("f_start", self.f_start),
            ("f_stop", self.f_stop),
            ("duration", self.duration),
            ("amplitude", self.amplitude),
        ] {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        if self.duration <= 0.0 {
            return Err(invalid("duration", "must be positive"));
        }
        if self.amplitude < 0.0 {
            return Err(invalid("amplitude", "must be non-negative"));
        }
        if let Envelope::RaisedCosine { ramp } = self.envelope {
            if !(ramp > 0.0 && 2.0 * ramp <= self.duration) {
                return Err(invalid("envelope", "ramp must be positive and at most half the duration"));
            }
        }
        Ok(())
    }

    pub fn is_chirped(&self) -> bool {
        self.f_start != self.f_stop
    }

    /// Sweep rate (GHz/ns); negative for downward chirps.
    pub fn rate(&self) -> f64 {
        (self.f_stop - self.f_start) / self.duration
    }

    /// Instantaneous frequency (GHz).
    pub fn freq(&self, t: f64) -> f64 {
        self.f_start + (self.f_stop - self.f_start) * t / self.duration
    }

    /// Envelope factor in [0, 1].
    pub fn envelope_at(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.duration {
            return 0.0;
        }
        match self.envelope {
            Envelope::Rectangular => 1.0,
            Envelope::RaisedCosine { ramp } => {
                let edge = t.min(self.duration - t);
                if edge >= ramp {
                    1.0
                } else {
                    0.5 * (1.0 - (std::f64::consts::PI * edge / ramp).cos())
                }
            }
        }
    }

    /// Drive strength (GHz) at time `t`.
    pub fn drive(&self, t: f64) -> f64 {
        self.amplitude * self.envelope_at(t)
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        Self {
            amplitude,
            ..self.clone()
        }
    }

    /// Same sweep endpoints traversed at `|rate|` GHz/ns.
    pub fn with_rate(&self, rate: f64) -> Self {
        Self {
            duration: (self.f_stop - self.f_start).abs() / rate.abs(),
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_sweep() {
        let p = ChirpPulse::readout(0.1);
        assert_eq!(p.freq(0.0), 5.54);
        assert!((p.freq(500.0) - 5.14).abs() < 1e-12);
        assert!((p.freq(250.0) - 5.34).abs() < 1e-12);
        assert!((p.rate() + 8e-4).abs() < 1e-15);
        assert!((p.with_rate(4e-3).duration - 100.0).abs() < 1e-9);
    }

    #[test]
    fn raised_cosine_edges() {
        let p = ChirpPulse {
            envelope: Envelope::RaisedCosine { ramp: 20.0 },
            ..ChirpPulse::readout(1.0)
        };
        assert_eq!(p.envelope_at(0.0), 0.0);
        assert!((p.envelope_at(10.0) - 0.5).abs() < 1e-12);
        assert_eq!(p.envelope_at(250.0), 1.0);
        assert!(p.envelope_at(500.0).abs() < 1e-12);
        assert!(p.validate().is_ok());
        let bad = ChirpPulse {
            envelope: Envelope::RaisedCosine { ramp: 300.0 },
            ..p
        };
        assert!(bad.validate().is_err());
    }
}
