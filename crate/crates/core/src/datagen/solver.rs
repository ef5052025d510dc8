use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::ir::PdeCoefficients;

/// Space-time grid of generated data on `[0, 1] x [-1, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_x: usize,
    pub n_t: usize,
    pub dt_data: f64,
    pub dt_solver: f64,
    /// Snapshots with a larger sup norm are rejected.
    pub max_abs: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n_x: 256, n_t: 101, dt_data: 0.01, dt_solver: 4e-4, max_abs: 10.0 }
    }
}

impl GridConfig {
    /// `x_j = -1 + 2 j / n_x`.
    pub fn x(&self, j: usize) -> f64 {
        -1.0 + 2.0 * j as f64 / self.n_x as f64
    }

    pub fn t(&self, i: usize) -> f64 {
        i as f64 * self.dt_data
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_x).map(|j| self.x(j)).collect()
    }

    /// Solver steps between snapshots.
    pub fn substeps(&self) -> usize {
        (self.dt_data / self.dt_solver).round().max(1.0) as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, thiserror::Error)]
pub enum Rejected {
    #[error("non-finite state at solver step {step}")]
    NonFinite { step: usize },
    #[error("sup norm {max_abs} exceeds the bound at snapshot {snapshot}")]
    TooLarge { snapshot: usize, max_abs: f64 },
}

/// Fourier pseudo-spectral solver for
/// `u_t + f0(u) + f1(u)_x - nu u_xx = 0` on a periodic grid.
///
/// The linear part `c01 u + c11 u_x - nu u_xx` is integrated exactly per
/// mode; the rest goes through fourth-order Runge-Kutta in the
/// integrating-factor frame (Lawson). Products are formed on a 3/2-padded
/// grid and the Nyquist mode is kept at zero.
pub struct SpectralSolver {
    n: usize,
    m: usize,
    fwd_n: Arc<dyn Fft<f64>>,
    inv_n: Arc<dyn Fft<f64>>,
    fwd_m: Arc<dyn Fft<f64>>,
    inv_m: Arc<dyn Fft<f64>>,
    /// `pi * m'` per FFT bin, 0 at Nyquist.
    k: Vec<f64>,
}

impl SpectralSolver {
    /// # Panics
    ///
    /// If `n_x` is odd or below 4.
    pub fn new(n_x: usize) -> Self {
        assert!(n_x >= 4 && n_x % 2 == 0, "grid size must be even");
        let m = 3 * n_x / 2;
        let mut planner = FftPlanner::new();
        let half = n_x / 2;
        let k = (0..n_x)
            .map(|b| match b {
                b if b < half => std::f64::consts::PI * b as f64,
                b if b == half => 0.0,
                b => std::f64::consts::PI * (b as f64 - n_x as f64),
            })
            .collect();
        Self {
            n: n_x,
            m,
            fwd_n: planner.plan_fft_forward(n_x),
            inv_n: planner.plan_fft_inverse(n_x),
            fwd_m: planner.plan_fft_forward(m),
            inv_m: planner.plan_fft_inverse(m),
            k,
        }
    }

    /// Mode amplitudes `FFT(u) / n` with the Nyquist bin cleared.
    pub fn to_modes(&self, u: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd_n.process(&mut buf);
        let s = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|c| *c *= s);
        buf[self.n / 2] = Complex64::new(0.0, 0.0);
        buf
    }

    pub fn to_grid(&self, modes: &[Complex64]) -> Vec<f64> {
        let mut buf = modes.to_vec();
        self.inv_n.process(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }

    /// Nonlinear right-hand side `-(c00 + c02 u^2 + c03 u^3) - d/dx(c12 u^2 + c13 u^3)`.
    fn nonlinear(&self, c: &PdeCoefficients, modes: &[Complex64], out: &mut [Complex64], pad: &mut Vec<Complex64>) {
        let (n, m, half) = (self.n, self.m, self.n / 2);
        pad.clear();
        pad.resize(m, Complex64::new(0.0, 0.0));
        for b in 0..half {
            pad[b] = modes[b];
        }
        for b in half + 1..n {
            pad[b + m - n] = modes[b];
        }
        self.inv_m.process(pad);
        let has_flux = c.c[1][2] != 0.0 || c.c[1][3] != 0.0;
        // Reaction terms in the real part, flux in the imaginary part, so one
        // forward transform serves both (both are real on the grid).
        for z in pad.iter_mut() {
            let u = z.re;
            let u2 = u * u;
            let u3 = u2 * u;
            let f0 = c.c[0][0] + c.c[0][2] * u2 + c.c[0][3] * u3;
            let f1 = if has_flux { c.c[1][2] * u2 + c.c[1][3] * u3 } else { 0.0 };
            *z = Complex64::new(f0, f1);
        }
        self.fwd_m.process(pad);
        let s = 1.0 / m as f64;
        for b in 0..n {
            let src = match b {
                b if b < half => b,
                b if b == half => {
                    out[b] = Complex64::new(0.0, 0.0);
                    continue;
                }
                b => b + m - n,
            };
            // Split the packed transform into the spectra of the two real
            // signals.
            let p = pad[src];
            let q = pad[(m - src) % m].conj();
            let f0 = (p + q) * 0.5 * s;
            let f1 = (p - q) * Complex64::new(0.0, -0.5) * s;
            out[b] = -f0 - Complex64::new(0.0, self.k[b]) * f1;
        }
    }

    /// Snapshots `u(t_i, x_j)`, row-major `[n_t, n_x]`, starting from `g`.
    pub fn solve(&self, c: &PdeCoefficients, g: &[f64], grid: &GridConfig) -> Result<Vec<f64>, Rejected> {
        assert_eq!(g.len(), self.n);
        let n = self.n;
        let dt = grid.dt_solver;
        let lin: Vec<Complex64> = self.k.iter().map(|&k| Complex64::new(-c.c[0][1] - c.nu * k * k, -c.c[1][1] * k)).collect();
        let e1: Vec<Complex64> = lin.iter().map(|&l| (l * dt).exp()).collect();
        let e2: Vec<Complex64> = lin.iter().map(|&l| (l * (dt / 2.0)).exp()).collect();

        let mut out = Vec::with_capacity(grid.n_t * n);
        out.extend_from_slice(g);
        let mut u = self.to_modes(g);
        let zero = Complex64::new(0.0, 0.0);
        let (mut a, mut b, mut cc, mut d) = (vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n]);
        let mut stage = vec![zero; n];
        let mut pad = Vec::with_capacity(self.m);
        let sub = grid.substeps();
        let mut step = 0;
        for snap in 1..grid.n_t {
            for _ in 0..sub {
                step += 1;
                self.nonlinear(c, &u, &mut a, &mut pad);
                for i in 0..n {
                    stage[i] = e2[i] * (u[i] + a[i] * (dt / 2.0));
                }
                self.nonlinear(c, &stage, &mut b, &mut pad);
                for i in 0..n {
                    stage[i] = e2[i] * u[i] + b[i] * (dt / 2.0);
                }
                self.nonlinear(c, &stage, &mut cc, &mut pad);
                for i in 0..n {
                    stage[i] = e1[i] * u[i] + e2[i] * cc[i] * dt;
                }
                self.nonlinear(c, &stage, &mut d, &mut pad);
                let mut finite = true;
                for i in 0..n {
                    u[i] = e1[i] * u[i] + (e1[i] * a[i] + e2[i] * (b[i] + cc[i]) * 2.0 + d[i]) * (dt / 6.0);
                    finite &= u[i].re.is_finite() && u[i].im.is_finite();
                }
                if !finite {
                    return Err(Rejected::NonFinite { step });
                }
            }
            let row = self.to_grid(&u);
            let max_abs = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if !(max_abs <= grid.max_abs) {
                return Err(Rejected::TooLarge { snapshot: snap, max_abs });
            }
            out.extend_from_slice(&row);
        }
        Ok(out)
    }
}

/// One-shot [`SpectralSolver::solve`].
pub fn solve_pde(c: &PdeCoefficients, g: &[f64], grid: &GridConfig) -> Result<Vec<f64>, Rejected> {
    SpectralSolver::new(grid.n_x).solve(c, g, grid)
}
