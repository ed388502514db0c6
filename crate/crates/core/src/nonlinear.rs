//! Cubic nonlinear term and quartic energy of the truncated field, by exact
//! convolution.
//!
//! Two interchangeable paths compute the same quantities:
//!
//! * a direct O(N^2) mode-sum over a dense convolution box, used for small
//!   lattices;
//! * a padded spectral transform, used for large lattices. The grid holds at
//!   least 4 * n_max + 1 points per axis, so every aliased image of the
//!   cubic product (degree 3 n_max) lands outside the retained band and the
//!   quartic grid sum is exact.
//!
//! Both give the retained Fourier coefficients of |psi|^2 psi and the exact
//! integral of |psi|^4 over the torus.

use crate::lattice::ModeLattice;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Direct-path size threshold; above it the spectral path wins.
const DIRECT_LIMIT: usize = 48;

pub struct NonlinearKernel {
    volume: f64,
    method: Method,
}

enum Method {
    Direct(DirectConv),
    Spectral(SpectralConv),
}

impl NonlinearKernel {
    pub fn new(lattice: &ModeLattice) -> Self {
        if lattice.len() <= DIRECT_LIMIT {
            Self::direct(lattice)
        } else {
            Self::spectral(lattice)
        }
    }

    pub fn direct(lattice: &ModeLattice) -> Self {
        Self {
            volume: lattice.box_length().powi(lattice.dimension() as i32),
            method: Method::Direct(DirectConv::new(lattice)),
        }
    }

    pub fn spectral(lattice: &ModeLattice) -> Self {
        Self {
            volume: lattice.box_length().powi(lattice.dimension() as i32),
            method: Method::Spectral(SpectralConv::new(lattice)),
        }
    }

    /// Retained Fourier coefficients of |psi|^2 psi:
    /// T_n = sum_{n1 + n2 - n3 = n} a_{n1} a_{n2} conj(a_{n3}).
    pub fn cubic(&mut self, amplitudes: &[Complex64], out: &mut [Complex64]) {
        match &mut self.method {
            Method::Direct(d) => d.cubic(amplitudes, out),
            Method::Spectral(s) => s.cubic(amplitudes, out),
        }
    }

    /// Exact integral of |psi|^4 over the torus.
    pub fn quartic_integral(&mut self, amplitudes: &[Complex64]) -> f64 {
        let raw = match &mut self.method {
            Method::Direct(d) => d.quartic(amplitudes),
            Method::Spectral(s) => s.quartic(amplitudes),
        };
        self.volume * raw
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }
}

// ---------------------------------------------------------------------------
// Direct mode sums
// ---------------------------------------------------------------------------

struct DirectConv {
    n_modes: usize,
    // Mixed-radix encoding of each mode's components, chosen so that
    // enc(n_i) + enc(n_j) is exactly the flat index of n_i + n_j in the
    // convolution box of half-width 2 * axis_max.
    enc: Vec<usize>,
    conv: Vec<Complex64>, // pair convolution c_m = sum_{n1+n2=m} a_{n1} a_{n2}
}

impl DirectConv {
    fn new(lattice: &ModeLattice) -> Self {
        let a = lattice.max_component();
        let side = (4 * a + 1) as usize;
        let dims = lattice.dimension();
        let enc = lattice
            .modes_raw()
            .iter()
            .map(|n| {
                let mut idx = 0usize;
                for d in 0..dims {
                    idx = idx * side + (n[d] + a) as usize;
                }
                idx
            })
            .collect();
        Self {
            n_modes: lattice.len(),
            enc,
            conv: vec![Complex64::default(); side.pow(dims as u32)],
        }
    }

    fn fill_pair_convolution(&mut self, a: &[Complex64]) {
        self.conv.fill(Complex64::default());
        for i in 0..self.n_modes {
            let ai = a[i];
            self.conv[2 * self.enc[i]] += ai * ai;
            for j in (i + 1)..self.n_modes {
                self.conv[self.enc[i] + self.enc[j]] += 2.0 * ai * a[j];
            }
        }
    }

    fn cubic(&mut self, a: &[Complex64], out: &mut [Complex64]) {
        self.fill_pair_convolution(a);
        for (n, slot) in out.iter_mut().enumerate() {
            let mut t = Complex64::default();
            for j in 0..self.n_modes {
                t += self.conv[self.enc[n] + self.enc[j]] * a[j].conj();
            }
            *slot = t;
        }
    }

    fn quartic(&mut self, a: &[Complex64]) -> f64 {
        self.fill_pair_convolution(a);
        self.conv.iter().map(|c| c.norm_sqr()).sum()
    }
}

// ---------------------------------------------------------------------------
// Padded spectral transforms
// ---------------------------------------------------------------------------

struct SpectralConv {
    dims: usize,
    m: usize,
    // Flat grid index of each retained mode (components wrapped mod m).
    slots: Vec<usize>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    grid: Vec<Complex64>,
    line: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl SpectralConv {
    fn new(lattice: &ModeLattice) -> Self {
        let a = lattice.max_component();
        let m = next_smooth((4 * a + 1) as usize);
        let dims = lattice.dimension();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        let slots = lattice
            .modes_raw()
            .iter()
            .map(|n| {
                let mut idx = 0usize;
                for d in 0..dims {
                    let w = n[d].rem_euclid(m as i64) as usize;
                    idx = idx * m + w;
                }
                idx
            })
            .collect();
        Self {
            dims,
            m,
            slots,
            fwd,
            inv,
            grid: vec![Complex64::default(); m.pow(dims as u32)],
            line: vec![Complex64::default(); m],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    /// In-place FFT along every axis of the row-major m^dims grid.
    fn transform(&mut self, inverse: bool) {
        let m = self.m;
        let fft = if inverse {
            self.inv.clone()
        } else {
            self.fwd.clone()
        };
        for axis in 0..self.dims {
            let inner: usize = m.pow((self.dims - 1 - axis) as u32);
            let outer: usize = m.pow(axis as u32);
            if inner == 1 {
                for chunk in self.grid.chunks_exact_mut(m) {
                    fft.process_with_scratch(chunk, &mut self.scratch);
                }
            } else {
                for o in 0..outer {
                    for i in 0..inner {
                        let base = o * m * inner + i;
                        for j in 0..m {
                            self.line[j] = self.grid[base + j * inner];
                        }
                        fft.process_with_scratch(&mut self.line, &mut self.scratch);
                        for j in 0..m {
                            self.grid[base + j * inner] = self.line[j];
                        }
                    }
                }
            }
        }
    }

    /// Synthesize psi on the padded grid (unnormalized inverse transform).
    fn synthesize(&mut self, a: &[Complex64]) {
        self.grid.fill(Complex64::default());
        for (&slot, &amp) in self.slots.iter().zip(a) {
            self.grid[slot] = amp;
        }
        self.transform(true);
    }

    fn cubic(&mut self, a: &[Complex64], out: &mut [Complex64]) {
        self.synthesize(a);
        for v in &mut self.grid {
            *v = *v * v.norm_sqr();
        }
        self.transform(false);
        let norm = 1.0 / self.grid.len() as f64;
        for (slot_out, &slot) in out.iter_mut().zip(&self.slots) {
            *slot_out = self.grid[slot] * norm;
        }
    }

    fn quartic(&mut self, a: &[Complex64]) -> f64 {
        self.synthesize(a);
        let sum: f64 = self.grid.iter().map(|v| {
            let r = v.norm_sqr();
            r * r
        }).sum();
        sum / self.grid.len() as f64
    }
}

/// Smallest integer >= n whose prime factors are all in {2, 3, 5}.
fn next_smooth(n: usize) -> usize {
    let mut candidate = n.max(2);
    'outer: loop {
        let mut rem = candidate;
        for p in [2usize, 3, 5] {
            while rem % p == 0 {
                rem /= p;
            }
        }
        if rem == 1 {
            return candidate;
        }
        candidate += 1;
        continue 'outer;
    }
}
