//! Hilbert space, Hamiltonian, drive and collapse operators for a nonlinear
//! cavity coupled to a multilevel transmon modeled as a Duffing ladder.
//!
//! The tensor ordering is transmon ⊗ cavity, so the basis state `|q, n⟩`
//! lives at index `q * n_photons + n`. All frequencies are ordinary
//! frequencies in GHz; angular conversion happens only inside integrators.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::TWO_PI;

/// Largest Hilbert-space dimension built by [`build_hamiltonian`].
pub const DEFAULT_MAX_DIM: usize = 2048;

/// Form of the qubit–cavity coupling term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// Full `|i⟩⟨j| (a† + a)` coupling, including counter-rotating terms.
    Full,
    /// Rotating-wave coupling `|i⟩⟨i+1| a† + h.c.`; conserves the total
    /// excitation number.
    #[default]
    Rwa,
}

/// Physical constants of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// Bare cavity frequency ω_r/2π (GHz).
    pub cavity_freq: f64,
    /// Kerr coefficient K/2π (GHz); negative softens the cavity.
    pub kerr: f64,
    /// Transmon Josephson energy (GHz).
    pub ej: f64,
    /// Transmon charging energy (GHz); sets the anharmonicity −E_C.
    pub ec: f64,
    /// Qubit–cavity coupling g/2π (GHz).
    pub g01: f64,
    /// Qubit 0→1 frequency minus cavity frequency (GHz).
    pub detuning: f64,
    /// Number of transmon levels kept.
    pub n_levels: usize,
    /// Cavity Fock-space truncation.
    pub n_photons: usize,
    /// Cavity energy decay rate κ/2π (GHz).
    pub kappa: f64,
    /// Qubit decay rate 1/(2π T1) (GHz).
    pub gamma1: f64,
    #[serde(default)]
    pub coupling: Coupling,
}

/// Cavity linewidth κ/2π from the loaded quality factor.
pub fn kappa_from_q(cavity_freq: f64, quality: f64) -> f64 {
    cavity_freq / quality
}

/// Qubit decay rate γ1/2π (GHz) for an energy relaxation time in ns.
pub fn gamma1_from_t1(t1_ns: f64) -> f64 {
    1.0 / (TWO_PI * t1_ns)
}

impl SystemParams {
    /// Measured device: ω_r/2π = 5.3445 GHz, K/2π = −60 kHz, E_J = 100 GHz,
    /// E_C = 280 MHz, g/2π = 118 MHz, Q = 9000, T1 = 1 μs.
    pub fn device(detuning: f64) -> Self {
        Self {
            cavity_freq: 5.3445,
            kerr: -60e-6,
            ej: 100.0,
            ec: 0.28,
            g01: 0.118,
            detuning,
            n_levels: 7,
            n_photons: 8,
            kappa: kappa_from_q(5.3445, 9000.0),
            gamma1: gamma1_from_t1(1000.0),
            coupling: Coupling::Rwa,
        }
    }

    pub fn dim(&self) -> usize {
        self.n_levels * self.n_photons
    }

    /// Qubit 0→1 frequency (GHz).
    pub fn qubit_freq(&self) -> f64 {
        self.cavity_freq + self.detuning
    }

    /// Basis index of `|q, n⟩`.
    pub fn index(&self, q: usize, n: usize) -> usize {
        q * self.n_photons + n
    }

    /// Inverse of [`SystemParams::index`].
    pub fn label(&self, idx: usize) -> (usize, usize) {
        (idx / self.n_photons, idx % self.n_photons)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("cavity_freq", self.cavity_freq),
            ("kerr", self.kerr),
            ("ej", self.ej),
            ("ec", self.ec),
            ("g01", self.g01),
            ("detuning", self.detuning),
            ("kappa", self.kappa),
            ("gamma1", self.gamma1),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(invalid(name, format!("must be finite, got {v}")));
            }
        }
        if self.cavity_freq <= 0.0 {
            return Err(invalid("cavity_freq", "must be positive"));
        }
        if self.n_levels < 2 {
            return Err(invalid("n_levels", "need at least 2 transmon levels"));
        }
        if self.n_photons < 2 {
            return Err(invalid("n_photons", "need at least 2 Fock states"));
        }
        if self.kappa <= 0.0 {
            return Err(invalid("kappa", "must be positive"));
        }
        if self.gamma1 < 0.0 {
            return Err(invalid("gamma1", "must be non-negative"));
        }
        if self.g01 < 0.0 {
            return Err(invalid("g01", "must be non-negative"));
        }
        if self.ec <= 0.0 {
            return Err(invalid("ec", "must be positive"));
        }
        if self.ej <= self.ec {
            return Err(invalid("ej", "transmon regime requires ej > ec"));
        }
        transmon_levels(self.ej, self.ec, self.n_levels)?;
        qubit_levels(self)?;
        Ok(())
    }
}

/// Dense complex operator on the transmon ⊗ cavity space.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix(DMatrix<Complex64>);

impl OperatorMatrix {
    pub fn new(m: DMatrix<Complex64>) -> Self {
        assert!(m.is_square(), "operators must be square");
        Self(m)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    /// Largest entry of |H − H†|.
    pub fn hermiticity_deviation(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, z| m.max(z.norm()))
    }

    /// Hermitian to within `rel_tol` of the largest entry.
    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        self.hermiticity_deviation() <= rel_tol * self.max_abs().max(f64::MIN_POSITIVE)
    }
}

impl std::ops::Index<(usize, usize)> for OperatorMatrix {
    type Output = Complex64;
    fn index(&self, idx: (usize, usize)) -> &Complex64 {
        &self.0[idx]
    }
}

/// Duffing transmon ladder referenced to ε_0 = 0:
/// ε_i = i(√(8 E_J E_C) − E_C) − (E_C/2) i (i − 1).
pub fn transmon_levels(ej: f64, ec: f64, n_levels: usize) -> Result<Vec<f64>> {
    if !(ej > ec && ec > 0.0) {
        return Err(invalid("ej", "requires ej > ec > 0"));
    }
    let plasma = (8.0 * ej * ec).sqrt() - ec;
    duffing_ladder(plasma, ec, n_levels)
}

/// Duffing ladder with the 0→1 frequency pinned to `cavity_freq + detuning`,
/// anharmonicity −E_C.
pub fn qubit_levels(p: &SystemParams) -> Result<Vec<f64>> {
    duffing_ladder(p.qubit_freq(), p.ec, p.n_levels)
}

fn duffing_ladder(f01: f64, ec: f64, n_levels: usize) -> Result<Vec<f64>> {
    let levels: Vec<f64> = (0..n_levels)
        .map(|i| {
            let i = i as f64;
            i * f01 - 0.5 * ec * i * (i - 1.0)
        })
        .collect();
    if let Some(level) = levels.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::LadderInversion {
            level: level + 1,
            max_levels: level + 1,
        });
    }
    Ok(levels)
}

/// Nearest-neighbour coupling matrix g_{i,i+1} = g01 √(i+1).
pub fn coupling_matrix(g01: f64, n_levels: usize) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(n_levels, n_levels);
    for i in 0..n_levels.saturating_sub(1) {
        let v = g01 * ((i + 1) as f64).sqrt();
        g[(i, i + 1)] = v;
        g[(i + 1, i)] = v;
    }
    g
}

/// Generalized Jaynes–Cummings–Kerr Hamiltonian (GHz) with the default
/// dimension limit.
pub fn build_hamiltonian(p: &SystemParams) -> Result<OperatorMatrix> {
    build_hamiltonian_limited(p, DEFAULT_MAX_DIM)
}

pub fn build_hamiltonian_limited(p: &SystemParams, max_dim: usize) -> Result<OperatorMatrix> {
    p.validate()?;
    let dim = p.dim();
    if dim > max_dim {
        return Err(Error::DimensionTooLarge { dim, max: max_dim });
    }
    let eps = qubit_levels(p)?;
    let g = coupling_matrix(p.g01, p.n_levels);
    let nc = p.n_photons;
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    for q in 0..p.n_levels {
        for n in 0..nc {
            let nf = n as f64;
            h[(p.index(q, n), p.index(q, n))] =
                Complex64::from(eps[q] + p.cavity_freq * nf + p.kerr * nf * (nf - 1.0));
        }
    }
    for q in 0..p.n_levels.saturating_sub(1) {
        let gq = g[(q, q + 1)];
        if gq == 0.0 {
            continue;
        }
        for n in 0..nc - 1 {
            let amp = gq * ((n + 1) as f64).sqrt();
            // |q, n+1⟩⟨q+1, n|: qubit down, photon up, and its conjugate.
            let (a, b) = (p.index(q, n + 1), p.index(q + 1, n));
            h[(a, b)] += amp;
            h[(b, a)] += amp;
            if p.coupling == Coupling::Full {
                // |q+1, n+1⟩⟨q, n|: counter-rotating pair.
                let (c, d) = (p.index(q + 1, n + 1), p.index(q, n));
                h[(c, d)] += amp;
                h[(d, c)] += amp;
            }
        }
    }
    Ok(OperatorMatrix(h))
}

fn cavity_op(p: &SystemParams, f: impl Fn(usize, usize) -> f64) -> OperatorMatrix {
    let dim = p.dim();
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for q in 0..p.n_levels {
        for r in 0..p.n_photons {
            for c in 0..p.n_photons {
                let v = f(r, c);
                if v != 0.0 {
                    m[(p.index(q, r), p.index(q, c))] = Complex64::from(v);
                }
            }
        }
    }
    OperatorMatrix(m)
}

fn transmon_op(p: &SystemParams, f: impl Fn(usize, usize) -> f64) -> OperatorMatrix {
    let dim = p.dim();
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for r in 0..p.n_levels {
        for c in 0..p.n_levels {
            let v = f(r, c);
            if v != 0.0 {
                for n in 0..p.n_photons {
                    m[(p.index(r, n), p.index(c, n))] = Complex64::from(v);
                }
            }
        }
    }
    OperatorMatrix(m)
}

/// Cavity annihilation operator 1 ⊗ a.
pub fn annihilation(p: &SystemParams) -> OperatorMatrix {
    cavity_op(p, |r, c| if c == r + 1 { (c as f64).sqrt() } else { 0.0 })
}

/// Photon number 1 ⊗ a†a.
pub fn photon_number(p: &SystemParams) -> OperatorMatrix {
    cavity_op(p, |r, c| if r == c { r as f64 } else { 0.0 })
}

/// Drive coupling 1 ⊗ (a† + a).
pub fn drive_operator(p: &SystemParams) -> OperatorMatrix {
    cavity_op(p, |r, c| {
        if c == r + 1 {
            (c as f64).sqrt()
        } else if r == c + 1 {
            (r as f64).sqrt()
        } else {
            0.0
        }
    })
}

/// Transmon lowering operator Σ √(i+1) |i⟩⟨i+1| ⊗ 1.
pub fn transmon_lowering(p: &SystemParams) -> OperatorMatrix {
    transmon_op(p, |r, c| if c == r + 1 { (c as f64).sqrt() } else { 0.0 })
}

/// Projector onto the excited transmon manifold (q ≥ 1).
pub fn excited_projector(p: &SystemParams) -> OperatorMatrix {
    transmon_op(p, |r, c| if r == c && r >= 1 { 1.0 } else { 0.0 })
}

/// Total excitation number Σ i |i⟩⟨i| ⊗ 1 + 1 ⊗ a†a.
pub fn excitation_operator(p: &SystemParams) -> OperatorMatrix {
    let dim = p.dim();
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for idx in 0..dim {
        let (q, n) = p.label(idx);
        m[(idx, idx)] = Complex64::from((q + n) as f64);
    }
    OperatorMatrix(m)
}

/// A jump channel: `operator` already carries the factor √rate.
#[derive(Debug, Clone)]
pub struct CollapseOperator {
    pub name: &'static str,
    /// Angular rate (1/ns).
    pub rate: f64,
    pub operator: OperatorMatrix,
}

/// Cavity decay `√κ a` and, when γ1 > 0, transmon decay `√γ1 b`, with
/// angular rates 2π × (GHz rate).
pub fn collapse_operators(p: &SystemParams) -> Vec<CollapseOperator> {
    let mut out = Vec::with_capacity(2);
    let kappa = TWO_PI * p.kappa;
    let mut a = annihilation(p).into_matrix();
    a *= Complex64::from(kappa.sqrt());
    out.push(CollapseOperator {
        name: "cavity",
        rate: kappa,
        operator: OperatorMatrix(a),
    });
    if p.gamma1 > 0.0 {
        let gamma = TWO_PI * p.gamma1;
        let mut b = transmon_lowering(p).into_matrix();
        b *= Complex64::from(gamma.sqrt());
        out.push(CollapseOperator {
            name: "qubit",
            rate: gamma,
            operator: OperatorMatrix(b),
        });
    }
    out
}
