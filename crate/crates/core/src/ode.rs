//! Adaptive Dormand–Prince 5(4) integrator for complex state vectors.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Stepper state. `k[0]` is reused across accepted steps (first same as last).
pub struct Dopri5 {
    tol: Tolerance,
    k: [Vec<Complex64>; 7],
    stage: Vec<Complex64>,
    y_new: Vec<Complex64>,
    fsal: bool,
    /// Step size proposed for the next attempt.
    pub h: f64,
    pub h_max: f64,
    pub steps: usize,
}

impl Dopri5 {
    pub fn new(dim: usize, tol: Tolerance, h0: f64) -> Self {
        Self {
            tol,
            k: std::array::from_fn(|_| vec![Complex64::default(); dim]),
            stage: vec![Complex64::default(); dim],
            y_new: vec![Complex64::default(); dim],
            fsal: false,
            h: h0,
            h_max: f64::INFINITY,
            steps: 0,
        }
    }

    /// Forget the cached derivative; call after modifying the state by hand.
    pub fn invalidate(&mut self) {
        self.fsal = false;
    }

    pub fn y_new(&self) -> &[Complex64] {
        &self.y_new
    }

    /// Attempt a step of size `h` from `(t, y)`. The candidate is left in
    /// [`Dopri5::y_new`]; the return value is the scaled error norm
    /// (≤ 1 means acceptable).
    pub fn try_step<F>(&mut self, f: &mut F, t: f64, y: &[Complex64], h: f64) -> f64
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        let n = y.len();
        if !self.fsal {
            f(t, y, &mut self.k[0]);
            self.fsal = true;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = Complex64::default();
                for (j, a) in A[s].iter().enumerate().take(s) {
                    if *a != 0.0 {
                        acc += self.k[j][i] * *a;
                    }
                }
                self.stage[i] = y[i] + acc * h;
            }
            let (head, tail) = self.k.split_at_mut(s);
            let _ = head;
            f(t + C[s] * h, &self.stage, &mut tail[0]);
        }
        // Stage 7 was evaluated at the fifth-order solution.
        self.y_new.copy_from_slice(&self.stage);
        let mut sum = 0.0;
        for i in 0..n {
            let mut err = Complex64::default();
            for (s, e) in E.iter().enumerate() {
                if *e != 0.0 {
                    err += self.k[s][i] * *e;
                }
            }
            // Moduli via norm_sqr: `hypot` dominates small systems otherwise.
            let scale = self.tol.atol + self.tol.rtol * y[i].norm_sqr().max(self.y_new[i].norm_sqr()).sqrt();
            sum += (err * h).norm_sqr() / (scale * scale);
        }
        (sum / n.max(1) as f64).sqrt()
    }

    /// Commit the last candidate: copies it into `y` and recycles the final
    /// stage as the next first stage.
    pub fn accept(&mut self, y: &mut [Complex64]) {
        y.copy_from_slice(&self.y_new);
        self.k.swap(0, 6);
        self.steps += 1;
    }

    fn next_h(h: f64, err: f64) -> f64 {
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h * factor
    }

    /// Integrate from `t0` to `t1`, calling `observer(t, y)` after every
    /// accepted step. An observer error aborts the integration.
    pub fn integrate<F, O>(&mut self, f: &mut F, t0: f64, t1: f64, y: &mut [Complex64], mut observer: O) -> Result<()>
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
        O: FnMut(f64, &[Complex64]) -> Result<()>,
    {
        let mut t = t0;
        while t < t1 {
            let h_floor = 1e-12 * t.abs().max(1.0);
            let mut h = self.h.min(self.h_max);
            let last = t + h >= t1;
            if last {
                h = t1 - t;
            }
            let err = self.try_step(f, t, y, h);
            if !err.is_finite() {
                self.h = h * 0.2;
                if self.h < h_floor {
                    return Err(Error::StepUnderflow { time: t });
                }
                continue;
            }
            if err <= 1.0 {
                self.accept(y);
                t = if last { t1 } else { t + h };
                observer(t, y)?;
                // Do not let a short final step shrink the proposal.
                let proposed = Self::next_h(h, err);
                self.h = if last { self.h.max(proposed) } else { proposed };
            } else {
                self.h = Self::next_h(h, err).min(h);
                if self.h < h_floor {
                    return Err(Error::StepUnderflow { time: t });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotating_phase_is_exact() {
        // y' = −i ω y ⇒ y(t) = e^{−iωt}.
        let w = 3.0;
        let mut f = |_t: f64, y: &[Complex64], dy: &mut [Complex64]| {
            dy[0] = Complex64::new(0.0, -w) * y[0];
        };
        let mut y = vec![Complex64::new(1.0, 0.0)];
        let mut ode = Dopri5::new(1, Tolerance::default(), 0.01);
        ode.integrate(&mut f, 0.0, 10.0, &mut y, |_, _| Ok(())).unwrap();
        let exact = Complex64::new(0.0, -w * 10.0).exp();
        assert!((y[0] - exact).norm() < 1e-7, "{:?}", y[0]);
    }

    #[test]
    fn at_least_fifth_order() {
        // y' = −y², y(0) = 1 ⇒ 1/(1+t); fixed steps, halving h should cut
        // the global error by at least 2⁵.
        let mut f = |_t: f64, y: &[Complex64], dy: &mut [Complex64]| {
            dy[0] = -y[0] * y[0];
        };
        let mut err = |n: usize| {
            let mut ode = Dopri5::new(1, Tolerance::default(), 0.0);
            let mut y = vec![Complex64::new(1.0, 0.0)];
            let h = 2.0 / n as f64;
            for i in 0..n {
                let y0 = y.clone();
                ode.try_step(&mut f, i as f64 * h, &y0, h);
                ode.accept(&mut y);
            }
            (y[0].re - 1.0 / 3.0).abs()
        };
        let ratio = err(20) / err(40);
        assert!(ratio > 28.0 && ratio < 80.0, "ratio {ratio}");
    }
}
