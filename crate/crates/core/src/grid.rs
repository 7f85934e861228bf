//! Uniform position lattice and its conjugate momentum lattice.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Smallest admissible lattice.
pub const MIN_POINTS: usize = 64;

/// Uniform 1-D lattice `x_j = x_min + j*dx`, `j = 0..n`, with momentum nodes
/// `p_k = k*dp` in discrete-transform order (non-negative frequencies first).
///
/// Cloning is cheap: transform plans are shared.
#[derive(Clone)]
pub struct Grid {
    n: usize,
    x_min: f64,
    dx: f64,
    fourier: Arc<Fourier>,
}

struct Fourier {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    // dx/sqrt(2pi) * exp(-i p_k x_min)
    forward_twiddle: Vec<Complex64>,
    // dp/sqrt(2pi) * exp(+i p_k x_min)
    inverse_twiddle: Vec<Complex64>,
}

impl Grid {
    /// Grid of `n` nodes centered on the origin covering `x_extent`.
    pub fn new(n: usize, x_extent: f64) -> Result<Self> {
        if n < MIN_POINTS || !n.is_power_of_two() {
            return Err(Error::GridSize(n));
        }
        if !(x_extent.is_finite() && x_extent > 0.0) {
            return Err(Error::GridExtent(x_extent));
        }
        let dx = x_extent / n as f64;
        let x_min = -0.5 * x_extent;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let dp = 2.0 * PI / x_extent;
        let norm = (2.0 * PI).sqrt();
        let (forward_twiddle, inverse_twiddle) = (0..n)
            .map(|k| {
                let p = momentum_of(k, n, dp);
                let phase = Complex64::from_polar(1.0, -p * x_min);
                (phase * (dx / norm), phase.conj() * (dp / norm))
            })
            .unzip();
        Ok(Self {
            n,
            x_min,
            dx,
            fourier: Arc::new(Fourier { forward, inverse, forward_twiddle, inverse_twiddle }),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dp(&self) -> f64 {
        2.0 * PI / (self.n as f64 * self.dx)
    }

    pub fn extent(&self) -> f64 {
        self.n as f64 * self.dx
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx
    }

    /// Momentum of node `k` in transform order.
    pub fn p(&self, k: usize) -> f64 {
        momentum_of(k, self.n, self.dp())
    }

    pub fn positions(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n).map(|j| self.x(j))
    }

    pub fn momenta(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n).map(|k| self.p(k))
    }

    /// Largest representable |p|, i.e. `pi/dx`.
    pub fn p_max(&self) -> f64 {
        PI / self.dx
    }

    /// Index of the momentum node closest to `p`.
    pub fn nearest_momentum_index(&self, p: f64) -> usize {
        let dp = self.dp();
        let k = (p / dp).round() as i64;
        k.rem_euclid(self.n as i64) as usize
    }

    /// Position amplitudes to momentum amplitudes, unitary with respect to
    /// the `dx` and `dp` quadrature weights.
    pub fn forward(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.n);
        self.fourier.forward.process(data);
        for (v, w) in data.iter_mut().zip(&self.fourier.forward_twiddle) {
            *v *= w;
        }
    }

    /// Inverse of [`Grid::forward`].
    pub fn inverse(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.n);
        for (v, w) in data.iter_mut().zip(&self.fourier.inverse_twiddle) {
            *v *= w;
        }
        self.fourier.inverse.process(data);
    }

    /// True when both grids describe the same lattice.
    pub fn same_lattice(&self, other: &Grid) -> bool {
        Arc::ptr_eq(&self.fourier, &other.fourier)
            || (self.n == other.n && self.x_min == other.x_min && self.dx == other.dx)
    }
}

fn momentum_of(k: usize, n: usize, dp: f64) -> f64 {
    if k < n / 2 {
        k as f64 * dp
    } else {
        (k as f64 - n as f64) * dp
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.same_lattice(other)
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("x_min", &self.x_min)
            .field("dx", &self.dx)
            .finish()
    }
}

/// Free-function form of [`Grid::new`].
pub fn make_grid(n: usize, x_extent: f64) -> Result<Grid> {
    Grid::new(n, x_extent)
}
