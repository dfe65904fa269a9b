//! Dressed spectrum of the coupled system: diagonalization, adiabatic branch
//! labels over a detuning sweep, avoided crossings and the effective
//! anharmonic ladder.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::{build_hamiltonian, Coupling, OperatorMatrix, SystemParams};

/// Eigenvalues ascending with matching eigenvector columns.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

/// Relative Hermiticity tolerance accepted by [`eigenspectrum`].
const HERMITIAN_TOL: f64 = 1e-10;

pub fn eigenspectrum(h: &OperatorMatrix) -> Result<Eigensystem> {
    let deviation = h.hermiticity_deviation();
    if deviation > HERMITIAN_TOL * h.max_abs().max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(hermitian_eigen(h.matrix().clone()))
}

fn hermitian_eigen(m: DMatrix<Complex64>) -> Eigensystem {
    let n = m.nrows();
    if n == 1 {
        return Eigensystem {
            values: vec![m[(0, 0)].re],
            vectors: DMatrix::identity(1, 1),
        };
    }
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Eigensystem { values, vectors }
}

/// Bare-state label `|q, n⟩`: transmon level and photon number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label {
    pub q: usize,
    pub n: usize,
}

impl Label {
    pub fn new(q: usize, n: usize) -> Self {
        Self { q, n }
    }

    pub fn excitations(&self) -> usize {
        self.q + self.n
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "q{}n{}", self.q, self.n)
    }
}

/// One adiabatically continued eigenlevel.
#[derive(Debug, Clone)]
pub struct Branch {
    pub label: Label,
    /// Energy (GHz) at each detuning of the owning [`BranchSet`].
    pub energies: Vec<f64>,
    /// Population of the bare state `|q, n⟩` at each detuning.
    pub overlap_trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BranchSet {
    pub detunings: Vec<f64>,
    pub branches: Vec<Branch>,
    /// Grid indices where two continuation candidates were within 1e-3.
    pub ambiguous: Vec<usize>,
}

impl BranchSet {
    pub fn branch(&self, label: Label) -> Option<&Branch> {
        self.branches.iter().find(|b| b.label == label)
    }

    pub fn manifold(&self, m: usize) -> impl Iterator<Item = &Branch> {
        self.branches.iter().filter(move |b| b.label.excitations() == m)
    }

    /// CSV table `detuning_ghz,label_q,label_n,energy_ghz`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("detuning_ghz,label_q,label_n,energy_ghz\n");
        for (i, d) in self.detunings.iter().enumerate() {
            for b in &self.branches {
                let _ = writeln!(s, "{},{},{},{}", d, b.label.q, b.label.n, b.energies[i]);
            }
        }
        s
    }
}

/// Basis indices spanning the `m`-excitation manifold, ordered by q.
fn manifold_indices(p: &SystemParams, m: usize) -> Vec<usize> {
    (0..p.n_levels)
        .filter(|&q| q <= m && m - q < p.n_photons)
        .map(|q| p.index(q, m - q))
        .collect()
}

fn submatrix(h: &DMatrix<Complex64>, idx: &[usize]) -> DMatrix<Complex64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| h[(idx[r], idx[c])])
}

/// A diagonalizable block: either one excitation manifold (RWA) or the whole
/// space, with the bare labels of its basis vectors.
struct Block {
    basis: Vec<usize>,
    labels: Vec<Label>,
}

fn blocks(p: &SystemParams, max_excitation: usize) -> Vec<Block> {
    match p.coupling {
        Coupling::Rwa => (0..=max_excitation)
            .map(|m| {
                let basis = manifold_indices(p, m);
                let labels = basis
                    .iter()
                    .map(|&i| {
                        let (q, n) = p.label(i);
                        Label::new(q, n)
                    })
                    .collect();
                Block { basis, labels }
            })
            .collect(),
        Coupling::Full => {
            let basis: Vec<usize> = (0..p.dim()).collect();
            let labels = basis
                .iter()
                .map(|&i| {
                    let (q, n) = p.label(i);
                    Label::new(q, n)
                })
                .collect();
            vec![Block { basis, labels }]
        }
    }
}

fn block_eigen(p: &SystemParams, block: &Block) -> Result<Eigensystem> {
    let h = build_hamiltonian(p)?;
    Ok(hermitian_eigen(submatrix(h.matrix(), &block.basis)))
}

const MIN_OVERLAP: f64 = 0.5;
const AMBIGUITY: f64 = 1e-3;
/// Smallest parameter step the continuation refines to. Anticrossings much
/// narrower than this are stepped over diabatically, keeping bare character.
const MIN_REFINE_STEP: f64 = 1e-4;

/// Result of continuing a set of tracked eigenvectors to a new parameter.
struct Continued {
    eig: Eigensystem,
    /// `perm[i]` is the eigenvector column now carrying tracked state `i`.
    perm: Vec<usize>,
    ambiguous: bool,
}

fn overlaps(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<f64> {
    (a.adjoint() * b).map(|z| z.norm())
}

/// Maximum-overlap assignment, strongest matches first.
fn assign(ov: &DMatrix<f64>) -> (Vec<usize>, f64, bool) {
    let n = ov.nrows();
    let mut rows: Vec<(usize, f64)> = (0..n).map(|i| (i, ov.row(i).max())).collect();
    rows.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut used = vec![false; n];
    let mut perm = vec![0; n];
    let mut worst = f64::INFINITY;
    let mut ambiguous = false;
    for (i, _) in rows {
        let mut best = (usize::MAX, -1.0);
        let mut second = -1.0;
        for j in 0..n {
            if used[j] {
                continue;
            }
            let v = ov[(i, j)];
            if v > best.1 {
                second = best.1;
                best = (j, v);
            } else if v > second {
                second = v;
            }
        }
        if second >= 0.0 && best.1 - second < AMBIGUITY {
            ambiguous = true;
        }
        used[best.0] = true;
        perm[i] = best.0;
        worst = worst.min(best.1);
    }
    (perm, worst, ambiguous)
}

/// Follow `prev` (columns = tracked states at parameter `s0`) to `s1`,
/// bisecting the step whenever some state keeps less than half its overlap.
fn continue_to<F>(eig_at: &F, s0: f64, prev: &DMatrix<Complex64>, s1: f64) -> Result<Continued>
where
    F: Fn(f64) -> Result<Eigensystem>,
{
    let eig = eig_at(s1)?;
    let (perm, worst, ambiguous) = assign(&overlaps(prev, &eig.vectors));
    if worst >= MIN_OVERLAP || (s1 - s0).abs() < 2.0 * MIN_REFINE_STEP {
        return Ok(Continued { eig, perm, ambiguous });
    }
    let mid = 0.5 * (s0 + s1);
    let half = continue_to(eig_at, s0, prev, mid)?;
    let tracked = reorder(&half.eig.vectors, &half.perm);
    let mut rest = continue_to(eig_at, mid, &tracked, s1)?;
    rest.ambiguous |= half.ambiguous;
    Ok(rest)
}

fn reorder(vectors: &DMatrix<Complex64>, perm: &[usize]) -> DMatrix<Complex64> {
    DMatrix::from_fn(vectors.nrows(), perm.len(), |r, c| vectors[(r, perm[c])])
}

/// Label dressed levels over a detuning grid by maximum-overlap continuation.
///
/// Labels are seeded at the grid edge farthest from resonance by ramping the
/// coupling up from zero, where every eigenvector is a bare state, and are
/// then carried across the grid. Only levels with `q + n ≤ max_excitation`
/// are returned.
pub fn track_branches(p: &SystemParams, detuning_grid: &[f64], max_excitation: usize) -> Result<BranchSet> {
    p.validate()?;
    if detuning_grid.is_empty() {
        return Err(invalid("detuning_grid", "empty grid"));
    }
    if detuning_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("detuning_grid", "must be strictly increasing"));
    }
    if max_excitation >= p.n_photons {
        return Err(invalid(
            "max_excitation",
            format!("manifold {max_excitation} is truncated; need n_photons > {max_excitation}"),
        ));
    }
    let npts = detuning_grid.len();
    let seed_last = detuning_grid[npts - 1].abs() >= detuning_grid[0].abs();
    let order: Vec<usize> = if seed_last {
        (0..npts).rev().collect()
    } else {
        (0..npts).collect()
    };

    let per_block: Vec<Result<(Vec<Branch>, Vec<usize>)>> = blocks(p, max_excitation)
        .par_iter()
        .map(|block| track_block(p, block, detuning_grid, &order, max_excitation))
        .collect();

    let mut branches = Vec::new();
    let mut ambiguous = Vec::new();
    for r in per_block {
        let (b, a) = r?;
        branches.extend(b);
        ambiguous.extend(a);
    }
    branches.sort_by_key(|b| (b.label.excitations(), b.label.q));
    ambiguous.sort_unstable();
    ambiguous.dedup();
    Ok(BranchSet {
        detunings: detuning_grid.to_vec(),
        branches,
        ambiguous,
    })
}

fn track_block(
    p: &SystemParams,
    block: &Block,
    grid: &[f64],
    order: &[usize],
    max_excitation: usize,
) -> Result<(Vec<Branch>, Vec<usize>)> {
    let dim = block.basis.len();
    let npts = grid.len();
    let seed_delta = grid[order[0]];

    // Ramp the coupling 0 → g01 at the seed detuning. Tracked state i starts
    // as bare basis vector i.
    let at_seed = |frac: f64| {
        let q = SystemParams {
            detuning: seed_delta,
            g01: p.g01 * frac,
            ..p.clone()
        };
        block_eigen(&q, block)
    };
    let mut tracked: DMatrix<Complex64> = DMatrix::identity(dim, dim);
    let ramp_steps = 16;
    let bare = at_seed(0.0)?;
    let (perm, _, _) = assign(&overlaps(&tracked, &bare.vectors));
    tracked = reorder(&bare.vectors, &perm);
    let mut energies_now: Vec<f64> = perm.iter().map(|&j| bare.values[j]).collect();
    for k in 1..=ramp_steps {
        let s0 = (k - 1) as f64 / ramp_steps as f64;
        let s1 = k as f64 / ramp_steps as f64;
        let c = continue_to(&at_seed, s0, &tracked, s1)?;
        tracked = reorder(&c.eig.vectors, &c.perm);
        energies_now = c.perm.iter().map(|&j| c.eig.values[j]).collect();
    }

    let at_delta = |d: f64| {
        let q = SystemParams {
            detuning: d,
            ..p.clone()
        };
        block_eigen(&q, block)
    };

    let mut energies = vec![vec![0.0; npts]; dim];
    let mut fidelity = vec![vec![0.0; npts]; dim];
    let mut ambiguous = Vec::new();
    let record = |energies: &mut Vec<Vec<f64>>, fidelity: &mut Vec<Vec<f64>>, gi: usize, e: &[f64], v: &DMatrix<Complex64>| {
        for i in 0..dim {
            energies[i][gi] = e[i];
            fidelity[i][gi] = v[(i, i)].norm_sqr().min(1.0);
        }
    };
    record(&mut energies, &mut fidelity, order[0], &energies_now, &tracked);
    // Last unambiguous set: leaving a point where levels were degenerate,
    // match against it instead of the arbitrary mixtures at that point.
    let mut anchor = tracked.clone();
    let mut after_ambiguous = false;
    for w in order.windows(2) {
        let (from, to) = (w[0], w[1]);
        let mut c = continue_to(&at_delta, grid[from], &tracked, grid[to])?;
        if after_ambiguous {
            let (perm, _, amb) = assign(&overlaps(&anchor, &c.eig.vectors));
            if !amb {
                c.perm = perm;
                c.ambiguous = false;
            }
        }
        if c.ambiguous {
            ambiguous.push(to);
        }
        after_ambiguous = c.ambiguous;
        tracked = reorder(&c.eig.vectors, &c.perm);
        if !c.ambiguous {
            anchor = tracked.clone();
        }
        energies_now = c.perm.iter().map(|&j| c.eig.values[j]).collect();
        record(&mut energies, &mut fidelity, to, &energies_now, &tracked);
    }

    let branches = (0..dim)
        .filter(|&i| block.labels[i].excitations() <= max_excitation)
        .map(|i| Branch {
            label: block.labels[i],
            energies: std::mem::take(&mut energies[i]),
            overlap_trace: std::mem::take(&mut fidelity[i]),
        })
        .collect();
    Ok((branches, ambiguous))
}

/// Minimum of the energy gap between two dressed branches of one manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct AvoidedCrossing {
    pub detuning_at_min: f64,
    pub gap: f64,
    pub pair: (Label, Label),
    pub manifold: usize,
}

/// Gaps below this are treated as exact crossings (GHz).
const MIN_GAP: f64 = 1e-9;

/// Local minima of the gap between energetically adjacent branches of the
/// `manifold`-excitation family.
///
/// The squared gap of an isolated two-level anticrossing is exactly
/// quadratic in detuning, so the minimum is refined with a parabola through
/// the squared gaps at the three grid points around each discrete minimum.
/// Pairs whose labeled energies swap order across the minimum are true
/// crossings and are skipped.
pub fn find_avoided_crossings(set: &BranchSet, manifold: usize) -> Vec<AvoidedCrossing> {
    let fam: Vec<&Branch> = set.manifold(manifold).collect();
    let npts = set.detunings.len();
    if fam.len() < 2 || npts < 3 {
        return Vec::new();
    }
    let sorted_at = |i: usize| -> Vec<usize> {
        let mut idx: Vec<usize> = (0..fam.len()).collect();
        idx.sort_by(|&a, &b| fam[a].energies[i].total_cmp(&fam[b].energies[i]));
        idx
    };
    let orders: Vec<Vec<usize>> = (0..npts).map(sorted_at).collect();
    let mut out = Vec::new();
    for k in 0..fam.len() - 1 {
        let gap = |i: usize| fam[orders[i][k + 1]].energies[i] - fam[orders[i][k]].energies[i];
        for i in 1..npts - 1 {
            let (gl, g0, gr) = (gap(i - 1), gap(i), gap(i + 1));
            if !(g0 < gl && g0 <= gr) {
                continue;
            }
            let (a, b) = (orders[i][k], orders[i][k + 1]);
            let signed = |j: usize| fam[b].energies[j] - fam[a].energies[j];
            if signed(i - 1) * signed(i + 1) < 0.0 || signed(i - 1) <= 0.0 || signed(i + 1) <= 0.0 {
                continue;
            }
            let xs = [set.detunings[i - 1], set.detunings[i], set.detunings[i + 1]];
            let ys = [signed(i - 1).powi(2), signed(i).powi(2), signed(i + 1).powi(2)];
            let (x_min, y_min) = parabola_min(xs, ys).unwrap_or((xs[1], ys[1]));
            let gap_min = y_min.max(0.0).sqrt();
            if gap_min <= MIN_GAP {
                continue;
            }
            let (la, lb) = (fam[a].label, fam[b].label);
            out.push(AvoidedCrossing {
                detuning_at_min: x_min,
                gap: gap_min,
                pair: if la <= lb { (la, lb) } else { (lb, la) },
                manifold,
            });
        }
    }
    out.sort_by(|a, b| a.detuning_at_min.total_cmp(&b.detuning_at_min));
    out
}

/// Vertex of the parabola through three points, clamped to their span.
fn parabola_min(xs: [f64; 3], ys: [f64; 3]) -> Option<(f64, f64)> {
    let [x0, x1, x2] = xs;
    let [y0, y1, y2] = ys;
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if !(a > 0.0) {
        return None;
    }
    let b = d01 - a * (x0 + x1);
    let x = (-b / (2.0 * a)).clamp(x0, x2);
    let y = y0 + d01 * (x - x0) + a * (x - x0) * (x - x1);
    Some((x, y))
}

/// CSV table `pair,detuning_at_min_ghz,gap_ghz`.
pub fn crossings_csv(crossings: &[AvoidedCrossing]) -> String {
    let mut s = String::from("pair,detuning_at_min_ghz,gap_ghz\n");
    for c in crossings {
        let _ = writeln!(s, "{}-{},{},{}", c.pair.0, c.pair.1, c.detuning_at_min, c.gap);
    }
    s
}

/// Coefficients of `E_n = ε + ω n − λ n²` fitted to the ground-qubit ladder.
/// Positive λ softens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveParams {
    pub eps: f64,
    pub omega: f64,
    pub lambda: f64,
    /// Root-mean-square residual of the fit (GHz).
    pub fit_residual: f64,
}

/// Photon levels 0..=4 enter the default fit.
pub const DEFAULT_N_FIT: usize = 4;

/// Least-squares fit of `E_n = ε + ω n − λ n²` to `energies[n]`.
pub fn fit_ladder(energies: &[f64]) -> Result<EffectiveParams> {
    let m = energies.len();
    if m < 3 {
        return Err(Error::Fit(format!("need at least 3 levels, got {m}")));
    }
    // Centering n keeps the normal equations well conditioned.
    let c = (m - 1) as f64 / 2.0;
    let design = DMatrix::from_fn(m, 3, |r, col| {
        let x = r as f64 - c;
        match col {
            0 => 1.0,
            1 => x,
            _ => -x * x,
        }
    });
    let rhs = DVector::from_column_slice(energies);
    let svd = design.clone().svd(true, true);
    let sol = svd
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::Fit(e.to_string()))?;
    let (a0, a1, lam) = (sol[0], sol[1], sol[2]);
    // Undo the shift n → n − c.
    let omega = a1 + 2.0 * lam * c;
    let eps = a0 - a1 * c - lam * c * c;
    let resid = &design * &sol - rhs;
    Ok(EffectiveParams {
        eps,
        omega,
        lambda: lam,
        fit_residual: (resid.norm_squared() / m as f64).sqrt(),
    })
}

/// Energy of the dressed level with the largest `|q, n⟩` population.
///
/// This is the character label of the dressed state: it coincides with the
/// adiabatic branch away from anticrossings and jumps across narrow ones,
/// the way a weak spectroscopic probe follows the bare transition.
pub fn dressed_energy(p: &SystemParams, label: Label) -> Result<f64> {
    Ok(dressed_energies(p, &[label])?[0])
}

fn dressed_energies(p: &SystemParams, labels: &[Label]) -> Result<Vec<f64>> {
    let h = build_hamiltonian(p)?;
    let full = match p.coupling {
        Coupling::Full => Some(hermitian_eigen(h.matrix().clone())),
        Coupling::Rwa => None,
    };
    labels
        .iter()
        .map(|&label| {
            if label.q >= p.n_levels || label.n >= p.n_photons {
                return Err(invalid("n_photons", format!("level {label} outside the truncated space")));
            }
            let target = p.index(label.q, label.n);
            let (basis, eig) = match &full {
                Some(e) => ((0..p.dim()).collect::<Vec<_>>(), e.clone()),
                None => {
                    let basis = manifold_indices(p, label.excitations());
                    let eig = hermitian_eigen(submatrix(h.matrix(), &basis));
                    (basis, eig)
                }
            };
            let row = basis.iter().position(|&b| b == target).expect("label in its manifold");
            let weights: Vec<f64> = (0..basis.len()).map(|c| eig.vectors[(row, c)].norm_sqr()).collect();
            let mut idx: Vec<usize> = (0..weights.len()).collect();
            idx.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]));
            if idx.len() > 1 && weights[idx[0]] - weights[idx[1]] < AMBIGUITY {
                return Err(Error::Labeling {
                    detuning: p.detuning,
                    reason: format!(
                        "{label} shared equally between two dressed states ({:.4} vs {:.4})",
                        weights[idx[0]], weights[idx[1]]
                    ),
                });
            }
            Ok(eig.values[idx[0]])
        })
        .collect()
}

/// Effective ladder parameters from the ground-qubit levels `|0, n⟩`,
/// n = 0..=n_fit.
pub fn effective_params(p: &SystemParams, n_fit: usize) -> Result<EffectiveParams> {
    if n_fit < 2 {
        return Err(invalid("n_fit", "need n_fit ≥ 2 for a quadratic fit"));
    }
    if n_fit >= p.n_photons {
        return Err(invalid(
            "n_photons",
            format!("n_fit = {n_fit} requires n_photons > {n_fit}"),
        ));
    }
    let labels: Vec<Label> = (0..=n_fit).map(|n| Label::new(0, n)).collect();
    fit_ladder(&dressed_energies(p, &labels)?)
}

/// λ(Δ) over a detuning grid, evaluated in parallel.
pub fn lambda_curve(p: &SystemParams, detunings: &[f64], n_fit: usize) -> Vec<Result<EffectiveParams>> {
    detunings
        .par_iter()
        .map(|&d| {
            effective_params(
                &SystemParams {
                    detuning: d,
                    ..p.clone()
                },
                n_fit,
            )
        })
        .collect()
}

/// Qubit-state-dependent pull χ_q = E(q,1) − E(q,0) − ω_r (GHz).
pub fn dispersive_shift(p: &SystemParams, qubit_state: usize) -> Result<f64> {
    if qubit_state > 1 {
        return Err(invalid("qubit_state", "must be 0 or 1"));
    }
    let e = dressed_energies(p, &[Label::new(qubit_state, 0), Label::new(qubit_state, 1)])?;
    Ok(e[1] - e[0] - p.cavity_freq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn jc(detuning: f64, g: f64) -> SystemParams {
        SystemParams {
            kerr: 0.0,
            g01: g,
            n_levels: 2,
            n_photons: 8,
            ..SystemParams::device(detuning)
        }
    }

    #[test]
    fn one_by_one() {
        let h = OperatorMatrix::new(DMatrix::from_element(1, 1, Complex64::new(2.5, 0.0)));
        let e = eigenspectrum(&h).unwrap();
        assert_eq!(e.values, vec![2.5]);
        assert_eq!(e.vectors[(0, 0)], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = DMatrix::<Complex64>::zeros(2, 2);
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(matches!(
            eigenspectrum(&OperatorMatrix::new(m)),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn eigenvectors_orthonormal() {
        let p = SystemParams {
            n_levels: 4,
            n_photons: 6,
            coupling: Coupling::Full,
            ..SystemParams::device(0.3)
        };
        let e = eigenspectrum(&build_hamiltonian(&p).unwrap()).unwrap();
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let gram = e.vectors.adjoint() * &e.vectors;
        for r in 0..gram.nrows() {
            for c in 0..gram.ncols() {
                let expect = if r == c { 1.0 } else { 0.0 };
                assert!((gram[(r, c)] - Complex64::from(expect)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn decoupled_spectrum_is_analytic() {
        let p = SystemParams {
            g01: 0.0,
            n_levels: 3,
            n_photons: 5,
            ..SystemParams::device(-0.7)
        };
        let e = eigenspectrum(&build_hamiltonian(&p).unwrap()).unwrap();
        let eps = crate::model::qubit_levels(&p).unwrap();
        let mut expect: Vec<f64> = (0..3)
            .flat_map(|q| {
                let eps = eps[q];
                (0..5).map(move |n| {
                    let n = n as f64;
                    eps + 5.3445 * n - 6e-5 * n * (n - 1.0)
                })
            })
            .collect();
        expect.sort_by(f64::total_cmp);
        for (a, b) in e.values.iter().zip(&expect) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn weak_coupling_keeps_bare_labels() {
        let p = SystemParams {
            g01: 1e-6,
            n_levels: 3,
            n_photons: 6,
            ..SystemParams::device(0.0)
        };
        let grid: Vec<f64> = (0..41).map(|i| -1.0 + 0.05 * i as f64).collect();
        let set = track_branches(&p, &grid, 4).unwrap();
        for b in &set.branches {
            for (i, d) in grid.iter().enumerate() {
                let q = SystemParams {
                    detuning: *d,
                    g01: 0.0,
                    ..p.clone()
                };
                let eps = crate::model::qubit_levels(&q).unwrap();
                let n = b.label.n as f64;
                let bare = eps[b.label.q] + q.cavity_freq * n + q.kerr * n * (n - 1.0);
                // Within a few couplings of the bare level, even on resonance.
                assert_abs_diff_eq!(b.energies[i], bare, epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn labels_partition_the_spectrum() {
        let p = SystemParams {
            n_photons: 7,
            ..SystemParams::device(0.0)
        };
        let grid: Vec<f64> = (0..61).map(|i| 0.3 + 0.01 * i as f64).collect();
        let set = track_branches(&p, &grid, 5).unwrap();
        for (i, d) in grid.iter().enumerate() {
            let q = SystemParams {
                detuning: *d,
                ..p.clone()
            };
            let h = build_hamiltonian(&q).unwrap();
            for m in 0..=5 {
                let basis = manifold_indices(&q, m);
                let raw = hermitian_eigen(submatrix(h.matrix(), &basis)).values;
                let mut labeled: Vec<f64> = set.manifold(m).map(|b| b.energies[i]).collect();
                labeled.sort_by(f64::total_cmp);
                assert_eq!(raw.len(), labeled.len());
                for (a, b) in raw.iter().zip(&labeled) {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-12);
                }
            }
        }
        for b in &set.branches {
            assert!(b.overlap_trace.iter().all(|&f| (0.0..=1.0).contains(&f)));
        }
    }

    #[test]
    fn jc_manifold_splitting_on_resonance() {
        let g = 0.118;
        for n in 1..=5usize {
            let p = jc(0.0, g);
            let eig = hermitian_eigen(submatrix(
                build_hamiltonian(&p).unwrap().matrix(),
                &manifold_indices(&p, n),
            ));
            assert_abs_diff_eq!(eig.values[1] - eig.values[0], 2.0 * g * (n as f64).sqrt(), epsilon = 1e-10);
        }
    }

    #[test]
    fn jc_crossing_gap_matches_closed_form() {
        let g = 0.118;
        let grid: Vec<f64> = (0..81).map(|i| -0.4 + 0.01 * i as f64 + 0.0037).collect();
        let set = track_branches(&jc(0.0, g), &grid, 5).unwrap();
        for n in 1..=5usize {
            let c = find_avoided_crossings(&set, n);
            assert_eq!(c.len(), 1, "manifold {n}: {c:?}");
            assert_abs_diff_eq!(c[0].gap, 2.0 * g * (n as f64).sqrt(), epsilon = 1e-8);
            assert_abs_diff_eq!(c[0].detuning_at_min, 0.0, epsilon = 1e-8);
            assert_eq!(c[0].pair, (Label::new(0, n), Label::new(1, n - 1)));
        }
    }

    #[test]
    fn decoupled_has_no_avoided_crossings() {
        let p = SystemParams {
            g01: 0.0,
            n_photons: 7,
            ..SystemParams::device(0.0)
        };
        let grid: Vec<f64> = (0..121).map(|i| -0.3 + 0.01 * i as f64).collect();
        let set = track_branches(&p, &grid, 5).unwrap();
        for m in 0..=5 {
            assert!(find_avoided_crossings(&set, m).is_empty());
        }
    }

    #[test]
    fn weak_coupling_gap_shrinks() {
        let g = 1e-3;
        let grid: Vec<f64> = (0..201).map(|i| -0.01 + 1e-4 * i as f64 + 3e-6).collect();
        let set = track_branches(&jc(0.0, g), &grid, 3).unwrap();
        let c = find_avoided_crossings(&set, 3);
        assert_eq!(c.len(), 1);
        assert!(c[0].gap < 4e-3);
        assert_abs_diff_eq!(c[0].gap, 2.0 * g * 3f64.sqrt(), epsilon = 1e-8);
    }

    #[test]
    fn ladder_fit_recovers_synthetic() {
        let (eps, omega, lambda) = (0.3, 5.3, 2.5e-4);
        let e: Vec<f64> = (0..6)
            .map(|n| {
                let n = n as f64;
                eps + omega * n - lambda * n * n
            })
            .collect();
        let f = fit_ladder(&e).unwrap();
        assert_abs_diff_eq!(f.eps, eps, epsilon = 1e-10);
        assert_abs_diff_eq!(f.omega, omega, epsilon = 1e-10);
        assert_abs_diff_eq!(f.lambda, lambda, epsilon = 1e-10);
        assert!(f.fit_residual < 1e-12);
    }

    #[test]
    fn bare_kerr_ladder() {
        let p = SystemParams {
            g01: 0.0,
            ..SystemParams::device(-1.0)
        };
        let f = effective_params(&p, DEFAULT_N_FIT).unwrap();
        assert_abs_diff_eq!(f.lambda, 6.0e-5, epsilon = 1e-12);
        // E_n = ω_r n + K n(n−1) ⇒ ω = ω_r − K.
        assert_abs_diff_eq!(f.omega, 5.3445 + 6e-5, epsilon = 1e-10);
    }

    #[test]
    fn dispersive_pull_matches_perturbation_theory() {
        let g = 0.118;
        for delta in [-2.64, 2.64, -1.5] {
            let p = jc(delta, g);
            let chi0 = dispersive_shift(&p, 0).unwrap();
            // Second order: |0,1⟩ couples only to |1,0⟩, pulled by −g²/Δ.
            let oracle = -g * g / delta;
            assert!((chi0 - oracle).abs() < 0.01 * oracle.abs(), "{chi0} vs {oracle}");
        }
        assert_abs_diff_eq!(dispersive_shift(&jc(-2.64, g), 0).unwrap(), 5.27e-3, epsilon = 5e-5);
        assert_eq!(dispersive_shift(&jc(1.0, 0.0), 0).unwrap(), 0.0);
    }
}
