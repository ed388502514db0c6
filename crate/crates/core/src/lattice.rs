//! Truncated Fourier mode set on the D-torus and amplitude-cap profiles.
//!
//! Modes are the integer vectors n with ||n|| < eta_c, listed in
//! lexicographic order so that serialized states and per-mode RNG streams
//! are reproducible. Each mode carries its wavenumber k_n = 2 pi n / L and
//! an amplitude cap alpha_n drawn from a [`CapProfile`].

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// k value beyond which the Langmuir cap vanishes.
pub const LANGMUIR_CUTOFF: f64 = 0.577_350_269_189_625_8; // 1/sqrt(3)

/// Amplitude cap alpha(k) as a function of the wavenumber modulus.
#[derive(Debug, Clone)]
pub enum CapProfile {
    /// alpha(k) = alpha0 * (1 - k/k_max) for k < k_max, else 0.
    Linear { alpha0: f64, k_max: f64 },
    /// alpha(k)^2 = c^2 [1 + 2 sqrt(3) k - (8/3^{3/4}) sqrt(k) - k^2] / k^2
    /// for k < 1/sqrt(3), else 0. Normalized so k^2 alpha(k)^2 -> c^2 as
    /// k -> 0.
    Langmuir { c: f64 },
    /// alpha(k) = c * zeta(k) / k for k < k_max, else 0, with zeta a
    /// tabulated decreasing shape (linear interpolation between knots),
    /// zeta(0) = 1, zeta(k_max) = 0.
    Generic {
        c: f64,
        k_max: f64,
        zeta: Vec<(f64, f64)>,
    },
    /// Direct (k_norm, alpha) table, matched to the nearest entry within a
    /// relative tolerance; unmatched k maps to 0.
    PerMode { entries: Vec<(f64, f64)> },
}

impl CapProfile {
    pub fn validated(self) -> Result<Self> {
        match &self {
            CapProfile::Linear { alpha0, k_max } => {
                if !(*alpha0 > 0.0 && *k_max > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "linear cap requires alpha0 > 0 and k_max > 0, got ({alpha0}, {k_max})"
                    )));
                }
            }
            CapProfile::Langmuir { c } => {
                if !(*c > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "langmuir cap requires c > 0, got {c}"
                    )));
                }
            }
            CapProfile::Generic { c, k_max, zeta } => {
                if !(*c > 0.0 && *k_max > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "generic cap requires c > 0 and k_max > 0, got ({c}, {k_max})"
                    )));
                }
                if zeta.len() < 2 {
                    return Err(Error::InvalidConfig(
                        "generic cap needs at least two zeta knots".into(),
                    ));
                }
                let first = zeta[0];
                let last = zeta[zeta.len() - 1];
                if first.0.abs() > 1e-12 || (first.1 - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidConfig(
                        "zeta table must start at (0, 1)".into(),
                    ));
                }
                if (last.0 - k_max).abs() > 1e-9 * k_max.max(1.0) || last.1.abs() > 1e-9 {
                    return Err(Error::InvalidConfig(
                        "zeta table must end at (k_max, 0)".into(),
                    ));
                }
                for w in zeta.windows(2) {
                    if w[1].0 <= w[0].0 {
                        return Err(Error::InvalidConfig(
                            "zeta knots must be strictly increasing in k".into(),
                        ));
                    }
                    if w[1].1 > w[0].1 + 1e-12 {
                        return Err(Error::InvalidConfig(
                            "zeta values must be non-increasing".into(),
                        ));
                    }
                }
                for &(k, z) in &zeta[..zeta.len() - 1] {
                    if k > 0.0 && z <= 0.0 {
                        return Err(Error::InvalidConfig(
                            "zeta must stay positive below k_max".into(),
                        ));
                    }
                }
            }
            CapProfile::PerMode { entries } => {
                for w in entries.windows(2) {
                    if w[1].0 <= w[0].0 {
                        return Err(Error::InvalidConfig(
                            "per-mode cap table must be sorted by k with unique entries".into(),
                        ));
                    }
                }
                if entries.iter().any(|&(k, a)| k < 0.0 || a < 0.0) {
                    return Err(Error::InvalidConfig(
                        "per-mode cap table entries must be non-negative".into(),
                    ));
                }
            }
        }
        Ok(self)
    }

    /// alpha(k). Total on k >= 0: exactly 0 at and beyond the cutoff, and
    /// +inf at k = 0 for the 1/k profiles (see `pin_zero_mode`).
    pub fn value(&self, k: f64) -> f64 {
        debug_assert!(k >= 0.0);
        match self {
            CapProfile::Linear { alpha0, k_max } => {
                if k < *k_max {
                    alpha0 * (1.0 - k / k_max)
                } else {
                    0.0
                }
            }
            CapProfile::Langmuir { c } => {
                if k >= LANGMUIR_CUTOFF {
                    0.0
                } else if k == 0.0 {
                    f64::INFINITY
                } else {
                    let num = langmuir_numerator(k).max(0.0);
                    c * num.sqrt() / k
                }
            }
            CapProfile::Generic { c, k_max, zeta } => {
                if k >= *k_max {
                    0.0
                } else if k == 0.0 {
                    f64::INFINITY
                } else {
                    c * interp_linear(zeta, k) / k
                }
            }
            CapProfile::PerMode { entries } => {
                let tol = 1e-9 * k.max(1.0);
                entries
                    .iter()
                    .find(|&&(kn, _)| (kn - k).abs() <= tol)
                    .map_or(0.0, |&(_, a)| a)
            }
        }
    }

    /// Smallest k at and beyond which alpha(k) = 0.
    pub fn cutoff(&self) -> f64 {
        match self {
            CapProfile::Linear { k_max, .. } | CapProfile::Generic { k_max, .. } => *k_max,
            CapProfile::Langmuir { .. } => LANGMUIR_CUTOFF,
            CapProfile::PerMode { entries } => entries
                .iter()
                .filter(|&&(_, a)| a > 0.0)
                .map(|&(k, _)| k)
                .fold(0.0, f64::max),
        }
    }

    /// Interior points where alpha(k) is continuous but not smooth;
    /// used as quadrature split points.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            CapProfile::Generic { zeta, .. } => {
                zeta[1..zeta.len() - 1].iter().map(|&(k, _)| k).collect()
            }
            _ => Vec::new(),
        }
    }
}

/// The bracketed Langmuir shape; has a simple zero at k = 1/sqrt(3).
pub fn langmuir_numerator(k: f64) -> f64 {
    1.0 + 2.0 * 3.0_f64.sqrt() * k - (8.0 / 3.0_f64.powf(0.75)) * k.sqrt() - k * k
}

fn interp_linear(table: &[(f64, f64)], k: f64) -> f64 {
    match table.binary_search_by(|&(kn, _)| kn.total_cmp(&k)) {
        Ok(i) => table[i].1,
        Err(0) => table[0].1,
        Err(i) if i == table.len() => table[table.len() - 1].1,
        Err(i) => {
            let (k0, z0) = table[i - 1];
            let (k1, z1) = table[i];
            z0 + (z1 - z0) * (k - k0) / (k1 - k0)
        }
    }
}

/// Options for [`ModeLattice::build`].
#[derive(Debug, Clone)]
pub struct LatticeOptions {
    /// Force a_0 = 0 by setting the zero-mode cap to 0. Required for the
    /// 1/k cap profiles, whose cap diverges at k = 0.
    pub pin_zero_mode: bool,
    /// Refuse to build lattices with more modes than this.
    pub mode_limit: usize,
}

impl Default for LatticeOptions {
    fn default() -> Self {
        Self {
            pin_zero_mode: false,
            mode_limit: 1 << 20,
        }
    }
}

/// The finite set of retained Fourier modes with wavenumbers and caps.
#[derive(Debug, Clone)]
pub struct ModeLattice {
    dimension: usize,
    box_length: f64,
    eta_c: f64,
    pinned_zero: bool,
    modes: Vec<[i64; 3]>,
    knorms: Vec<f64>,
    caps: Vec<f64>,
    // Dense lookup over the bounding box for O(1) mode-vector -> index.
    axis_max: i64,
    box_index: Vec<u32>,
}

const NO_MODE: u32 = u32::MAX;

impl ModeLattice {
    /// Enumerate all n with ||n|| < eta_c, assign wavenumbers 2 pi n / L and
    /// caps alpha(||k_n||).
    pub fn build(
        dimension: usize,
        eta_c: f64,
        box_length: f64,
        profile: &CapProfile,
        opts: &LatticeOptions,
    ) -> Result<Self> {
        if !(1..=3).contains(&dimension) {
            return Err(Error::InvalidConfig(format!(
                "dimension must be 1, 2 or 3, got {dimension}"
            )));
        }
        if !(eta_c > 0.0) || !eta_c.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "eta_c must be positive and finite, got {eta_c}"
            )));
        }
        if !(box_length > 0.0) || !box_length.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "box length must be positive and finite, got {box_length}"
            )));
        }

        let axis_max = (eta_c.ceil() as i64 - 1).max(0);
        let side = 2 * axis_max + 1;
        let box_cells = (side as u128).pow(dimension as u32);
        if box_cells > 64 * opts.mode_limit as u128 {
            return Err(Error::ModeLimit {
                count: box_cells as usize,
                limit: opts.mode_limit,
            });
        }

        let eta_sq = eta_c * eta_c;
        let mut modes: Vec<[i64; 3]> = Vec::new();
        let axis = |d: usize| -> std::ops::RangeInclusive<i64> {
            if d < dimension {
                -axis_max..=axis_max
            } else {
                0..=0
            }
        };
        // Nested loops emit lexicographic order directly.
        for n0 in axis(0) {
            for n1 in axis(1) {
                for n2 in axis(2) {
                    let norm_sq = (n0 * n0 + n1 * n1 + n2 * n2) as f64;
                    if norm_sq < eta_sq {
                        modes.push([n0, n1, n2]);
                        if modes.len() > opts.mode_limit {
                            return Err(Error::ModeLimit {
                                count: modes.len(),
                                limit: opts.mode_limit,
                            });
                        }
                    }
                }
            }
        }

        let two_pi_over_l = 2.0 * PI / box_length;
        let knorms: Vec<f64> = modes
            .iter()
            .map(|n| {
                let norm_sq = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]) as f64;
                two_pi_over_l * norm_sq.sqrt()
            })
            .collect();

        let mut caps = Vec::with_capacity(modes.len());
        for (n, &k) in modes.iter().zip(&knorms) {
            let is_zero = n.iter().all(|&c| c == 0);
            let a = if is_zero && opts.pin_zero_mode {
                0.0
            } else {
                profile.value(k)
            };
            if !a.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "cap diverges at mode {:?} (k = {k}); enable pin_zero_mode for 1/k profiles",
                    &n[..dimension]
                )));
            }
            caps.push(a);
        }

        let lattice = Self {
            dimension,
            box_length,
            eta_c,
            pinned_zero: opts.pin_zero_mode,
            axis_max,
            box_index: build_box_index(&modes, axis_max, dimension),
            modes,
            knorms,
            caps,
        };
        lattice.check_cap_monotonicity()?;
        Ok(lattice)
    }

    /// Caps must be non-increasing in ||n||; the pinned zero mode is exempt.
    fn check_cap_monotonicity(&self) -> Result<()> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.knorms[a].total_cmp(&self.knorms[b]));
        let mut prev: Option<f64> = None;
        for &i in &order {
            if self.pinned_zero && self.modes[i] == [0, 0, 0] {
                continue;
            }
            if let Some(p) = prev {
                if self.caps[i] > p + 1e-12 * p.abs().max(1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "caps increase with ||n|| near k = {}: {} -> {}",
                        self.knorms[i], p, self.caps[i]
                    )));
                }
            }
            prev = Some(self.caps[i]);
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn eta_c(&self) -> f64 {
        self.eta_c
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Integer components of mode `i` (length = dimension).
    pub fn mode(&self, i: usize) -> &[i64] {
        &self.modes[i][..self.dimension]
    }

    pub fn modes_raw(&self) -> &[[i64; 3]] {
        &self.modes
    }

    /// ||k_n|| for mode `i`.
    pub fn knorm(&self, i: usize) -> f64 {
        self.knorms[i]
    }

    pub fn knorms(&self) -> &[f64] {
        &self.knorms
    }

    /// Amplitude cap alpha_n for mode `i`.
    pub fn cap(&self, i: usize) -> f64 {
        self.caps[i]
    }

    pub fn caps(&self) -> &[f64] {
        &self.caps
    }

    pub fn pinned_zero(&self) -> bool {
        self.pinned_zero
    }

    /// Largest |n_i| over all modes and axes.
    pub fn max_component(&self) -> i64 {
        self.axis_max
    }

    /// Index of the mode with components `n`, if retained.
    pub fn index_of(&self, n: [i64; 3]) -> Option<usize> {
        for d in 0..3 {
            if n[d].abs() > self.axis_max {
                return None;
            }
        }
        let side = 2 * self.axis_max + 1;
        let mut idx: i64 = 0;
        for d in 0..self.dimension {
            idx = idx * side + (n[d] + self.axis_max);
        }
        match self.box_index[idx as usize] {
            NO_MODE => None,
            i => Some(i as usize),
        }
    }
}

fn build_box_index(modes: &[[i64; 3]], axis_max: i64, dimension: usize) -> Vec<u32> {
    let side = 2 * axis_max + 1;
    let cells = (side as usize).pow(dimension as u32);
    let mut table = vec![NO_MODE; cells];
    for (i, n) in modes.iter().enumerate() {
        let mut idx: i64 = 0;
        for d in 0..dimension {
            idx = idx * side + (n[d] + axis_max);
        }
        table[idx as usize] = i as u32;
    }
    table
}
