//! Stationary-state estimation: radial histograms in the reference 5e-3 binning,
//! moments with batch-means errors, automatic burn-in, total-variation
//! comparison, and a Metropolis oracle for the reflecting-case Gibbs
//! measure.

use crate::dynamics::{
    run_trajectory, BoundaryPolicy, EventLog, FieldState, ModelParams, Observer, RunSeed,
};
use crate::error::{Error, Result};
use crate::exec;
use crate::lattice::ModeLattice;
use crate::nonlinear::NonlinearKernel;
use crate::stats::batch_means_se;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

/// Histogram bin width in beta^{1/2} |a_n| units; all stationary
/// distributions are reported on this grid.
pub const BIN_WIDTH: f64 = 5e-3;

/// Number of equal time segments used for burn-in detection and batch means.
const SEGMENTS: usize = 64;

/// Coarse bin count for the burn-in total-variation check; coarse bins keep
/// the check's statistical noise well under the 0.02 acceptance threshold
/// at realistic budgets.
const BURNIN_BINS: usize = 25;

/// Normalized radial histogram of beta^{1/2} |a_n| for one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeHistogram {
    pub bin_width: f64,
    /// Mass per bin; sums to 1 (within 1e-12) unless the mode saw no samples.
    pub masses: Vec<f64>,
}

impl ModeHistogram {
    /// Total mass strictly below `s` (in beta^{1/2}|a| units), counting the
    /// bin containing `s` proportionally by its left edge.
    pub fn mass_below(&self, s: f64) -> f64 {
        let full_bins = (s / self.bin_width).floor() as usize;
        self.masses.iter().take(full_bins).sum()
    }

    pub fn peak_mass(&self) -> f64 {
        self.masses.iter().copied().fold(0.0, f64::max)
    }
}

/// Stationary histograms and moments with burn-in metadata.
#[derive(Debug, Clone)]
pub struct StationaryEstimate {
    pub histograms: Vec<ModeHistogram>,
    /// <|a_n|^2> per mode (unscaled field units).
    pub mean_sq: Vec<f64>,
    /// <|a_n|^4> per mode.
    pub mean_quart: Vec<f64>,
    /// Batch-means standard error of `mean_sq`.
    pub se_mean_sq: Vec<f64>,
    /// Post-burn-in samples per mode.
    pub samples: u64,
    /// Discarded initial time span (time units for SDE runs, sweeps for the
    /// Metropolis oracle).
    pub burn_in_time: f64,
    /// Integrator step used; 0 for the Metropolis oracle.
    pub dt: f64,
}

/// Total-variation distance between the binned distributions of one mode.
pub fn tv_distance(a: &StationaryEstimate, b: &StationaryEstimate, mode: usize) -> Result<f64> {
    if mode >= a.histograms.len() || mode >= b.histograms.len() {
        return Err(Error::BinningMismatch(format!(
            "mode {mode} out of range ({} vs {} histograms)",
            a.histograms.len(),
            b.histograms.len()
        )));
    }
    tv_between(&a.histograms[mode], &b.histograms[mode])
}

pub fn tv_between(a: &ModeHistogram, b: &ModeHistogram) -> Result<f64> {
    if (a.bin_width - b.bin_width).abs() > 1e-12 * a.bin_width.max(b.bin_width) {
        return Err(Error::BinningMismatch(format!(
            "bin widths differ: {} vs {}",
            a.bin_width, b.bin_width
        )));
    }
    if a.masses.len() != b.masses.len() {
        return Err(Error::BinningMismatch(format!(
            "bin counts differ: {} vs {}",
            a.masses.len(),
            b.masses.len()
        )));
    }
    Ok(0.5
        * a.masses
            .iter()
            .zip(&b.masses)
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>())
}

/// Initial condition for stationary sampling runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    Zero,
    /// Every mode at `fraction` of its cap, real phase.
    NearCap(f64),
}

/// Sampling budget: `total_steps` integrator steps split evenly over
/// `trajectories` independent trajectories, observed every `stride` steps.
#[derive(Debug, Clone, Copy)]
pub struct SamplingPlan {
    pub total_steps: u64,
    pub stride: u64,
    pub trajectories: u32,
    pub initial: InitialCondition,
}

impl SamplingPlan {
    pub fn new(total_steps: u64, stride: u64, trajectories: u32) -> Self {
        Self {
            total_steps,
            stride,
            trajectories,
            initial: InitialCondition::Zero,
        }
    }

    pub fn with_initial(mut self, initial: InitialCondition) -> Self {
        self.initial = initial;
        self
    }

    fn validate(&self) -> Result<(u64, u64)> {
        if self.trajectories == 0 || self.stride == 0 {
            return Err(Error::InvalidConfig(
                "sampling plan needs at least one trajectory and stride >= 1".into(),
            ));
        }
        let steps_per_traj = self.total_steps / u64::from(self.trajectories);
        let samples_per_traj = steps_per_traj / self.stride;
        if samples_per_traj < 4 * SEGMENTS as u64 {
            return Err(Error::InvalidConfig(format!(
                "budget too small: {} samples per trajectory, need at least {}",
                samples_per_traj,
                4 * SEGMENTS
            )));
        }
        Ok((steps_per_traj, samples_per_traj))
    }
}

// ---------------------------------------------------------------------------
// Segment accumulator
// ---------------------------------------------------------------------------

/// Histogram and moment sums over equal time segments. Segments make the
/// burn-in doubling check and batch-means errors possible without storing
/// raw samples; merging across trajectories is plain summation.
#[derive(Debug, Clone)]
struct SegmentAccumulator {
    n_modes: usize,
    beta_sqrt: f64,
    /// Per-mode fine bin count (reference binning).
    n_bins: Vec<usize>,
    bin_offset: Vec<usize>,
    /// Supports in s = beta^{1/2}|a| units.
    support: Vec<f64>,
    /// [segment][flattened fine bins]
    counts: Vec<Vec<f64>>,
    /// [segment][mode bins x BURNIN_BINS] coarse counts for the burn-in TV.
    coarse: Vec<Vec<f64>>,
    sum_sq: Vec<Vec<f64>>,
    sum_quart: Vec<Vec<f64>>,
    seg_samples: Vec<u64>,
    total_planned: u64,
    seen: u64,
}

impl SegmentAccumulator {
    fn new(lattice: &ModeLattice, beta: f64, total_planned: u64) -> Self {
        let beta_sqrt = beta.sqrt();
        let n_modes = lattice.len();
        let mut n_bins = Vec::with_capacity(n_modes);
        let mut support = Vec::with_capacity(n_modes);
        for &alpha in lattice.caps() {
            let s_max = beta_sqrt * alpha;
            support.push(s_max);
            n_bins.push(((s_max / BIN_WIDTH).ceil() as usize).max(1));
        }
        let mut bin_offset = Vec::with_capacity(n_modes);
        let mut acc = 0usize;
        for &b in &n_bins {
            bin_offset.push(acc);
            acc += b;
        }
        Self {
            n_modes,
            beta_sqrt,
            n_bins,
            bin_offset,
            support,
            counts: vec![vec![0.0; acc]; SEGMENTS],
            coarse: vec![vec![0.0; n_modes * BURNIN_BINS]; SEGMENTS],
            sum_sq: vec![vec![0.0; n_modes]; SEGMENTS],
            sum_quart: vec![vec![0.0; n_modes]; SEGMENTS],
            seg_samples: vec![0; SEGMENTS],
            total_planned: total_planned.max(1),
            seen: 0,
        }
    }

    fn segment_of(&self, sample_idx: u64) -> usize {
        ((sample_idx * SEGMENTS as u64) / self.total_planned).min(SEGMENTS as u64 - 1) as usize
    }

    fn push(&mut self, amplitudes: &[Complex64]) {
        let seg = self.segment_of(self.seen);
        self.seen += 1;
        self.seg_samples[seg] += 1;
        for (mode, a) in amplitudes.iter().enumerate() {
            let r = a.norm();
            let s = self.beta_sqrt * r;
            let nb = self.n_bins[mode];
            let bin = ((s / BIN_WIDTH) as usize).min(nb - 1);
            self.counts[seg][self.bin_offset[mode] + bin] += 1.0;
            let sup = self.support[mode].max(f64::MIN_POSITIVE);
            let cbin = ((s / sup * BURNIN_BINS as f64) as usize).min(BURNIN_BINS - 1);
            self.coarse[seg][mode * BURNIN_BINS + cbin] += 1.0;
            let r2 = r * r;
            self.sum_sq[seg][mode] += r2;
            self.sum_quart[seg][mode] += r2 * r2;
        }
    }

    fn merge(&mut self, other: &SegmentAccumulator) {
        for s in 0..SEGMENTS {
            for (a, b) in self.counts[s].iter_mut().zip(&other.counts[s]) {
                *a += b;
            }
            for (a, b) in self.coarse[s].iter_mut().zip(&other.coarse[s]) {
                *a += b;
            }
            for (a, b) in self.sum_sq[s].iter_mut().zip(&other.sum_sq[s]) {
                *a += b;
            }
            for (a, b) in self.sum_quart[s].iter_mut().zip(&other.sum_quart[s]) {
                *a += b;
            }
            self.seg_samples[s] += other.seg_samples[s];
        }
        self.seen += other.seen;
    }

    /// Coarse per-mode histogram over a segment range, normalized.
    fn coarse_window(&self, from: usize, to: usize, mode: usize) -> Vec<f64> {
        let mut h = vec![0.0; BURNIN_BINS];
        for s in from..to {
            for b in 0..BURNIN_BINS {
                h[b] += self.coarse[s][mode * BURNIN_BINS + b];
            }
        }
        let total: f64 = h.iter().sum();
        if total > 0.0 {
            for v in &mut h {
                *v /= total;
            }
        }
        h
    }

    /// Doubling-window burn-in rule: accept the earliest t0 (in segments)
    /// for which the windows [t0, 2 t0) and [2 t0, 4 t0) agree within TV
    /// 0.02 on every mode.
    fn burn_in_segments(&self) -> Result<usize> {
        let mut j = 1usize;
        while 4 * j <= SEGMENTS {
            let mut worst: f64 = 0.0;
            for mode in 0..self.n_modes {
                let w1 = self.coarse_window(j, 2 * j, mode);
                let w2 = self.coarse_window(2 * j, 4 * j, mode);
                let tv = 0.5
                    * w1.iter()
                        .zip(&w2)
                        .map(|(p, q)| (p - q).abs())
                        .sum::<f64>();
                worst = worst.max(tv);
            }
            if worst < 0.02 {
                return Ok(j);
            }
            j *= 2;
        }
        Err(Error::NonStationary(format!(
            "doubling windows never agreed within TV 0.02 over {SEGMENTS} segments; \
             increase the sampling budget"
        )))
    }

    fn assemble(&self, burn_segments: usize, burn_in_time: f64, dt: f64) -> StationaryEstimate {
        let kept = burn_segments..SEGMENTS;
        let mut histograms = Vec::with_capacity(self.n_modes);
        let mut mean_sq = Vec::with_capacity(self.n_modes);
        let mut mean_quart = Vec::with_capacity(self.n_modes);
        let mut se_mean_sq = Vec::with_capacity(self.n_modes);
        let samples: u64 = self.seg_samples[kept.clone()].iter().sum();

        for mode in 0..self.n_modes {
            let nb = self.n_bins[mode];
            let off = self.bin_offset[mode];
            let mut masses = vec![0.0; nb];
            for s in kept.clone() {
                for b in 0..nb {
                    masses[b] += self.counts[s][off + b];
                }
            }
            let total: f64 = masses.iter().sum();
            if total > 0.0 {
                for v in &mut masses {
                    *v /= total;
                }
            }
            histograms.push(ModeHistogram {
                bin_width: BIN_WIDTH,
                masses,
            });

            let mut sq = 0.0;
            let mut quart = 0.0;
            let mut batch_means = Vec::new();
            for s in kept.clone() {
                sq += self.sum_sq[s][mode];
                quart += self.sum_quart[s][mode];
                if self.seg_samples[s] > 0 {
                    batch_means.push(self.sum_sq[s][mode] / self.seg_samples[s] as f64);
                }
            }
            let n = samples.max(1) as f64;
            mean_sq.push(sq / n);
            mean_quart.push(quart / n);
            se_mean_sq.push(batch_means_se(&batch_means));
        }

        StationaryEstimate {
            histograms,
            mean_sq,
            mean_quart,
            se_mean_sq,
            samples,
            burn_in_time,
            dt,
        }
    }
}

impl Observer for SegmentAccumulator {
    fn record(&mut self, _time: f64, state: &FieldState, _events: &EventLog) {
        self.push(&state.amplitudes);
    }
}

// ---------------------------------------------------------------------------
// SDE estimation
// ---------------------------------------------------------------------------

/// Run Langevin trajectories, discard an automatically determined burn-in,
/// and accumulate stationary histograms and moments. Also returns the merged
/// boundary-event log (burn-in included).
pub fn estimate_stationary(
    params: &ModelParams,
    lattice: &ModeLattice,
    dt: f64,
    seed: u64,
    plan: &SamplingPlan,
) -> Result<(StationaryEstimate, EventLog)> {
    estimate_impl(params, lattice, dt, seed, plan, false)
}

/// Single-threaded twin of [`estimate_stationary`]; same output, used by the
/// benchmark suite to compare against the rayon path.
pub fn estimate_stationary_seq(
    params: &ModelParams,
    lattice: &ModeLattice,
    dt: f64,
    seed: u64,
    plan: &SamplingPlan,
) -> Result<(StationaryEstimate, EventLog)> {
    estimate_impl(params, lattice, dt, seed, plan, true)
}

fn estimate_impl(
    params: &ModelParams,
    lattice: &ModeLattice,
    dt: f64,
    seed: u64,
    plan: &SamplingPlan,
    force_seq: bool,
) -> Result<(StationaryEstimate, EventLog)> {
    let (steps_per_traj, samples_per_traj) = plan.validate()?;
    let initial = match plan.initial {
        InitialCondition::Zero => FieldState::zero(lattice),
        InitialCondition::NearCap(f) => FieldState::near_cap(lattice, f),
    };

    let worker = |t: usize| -> Result<(SegmentAccumulator, EventLog)> {
        let mut acc = SegmentAccumulator::new(lattice, params.beta, samples_per_traj);
        let (_, events) = {
            let mut observers: Vec<&mut dyn Observer> = vec![&mut acc];
            run_trajectory(
                &initial,
                params,
                lattice,
                dt,
                steps_per_traj,
                RunSeed::with_stream(seed, t as u64),
                plan.stride,
                &mut observers,
            )?
        };
        Ok((acc, events))
    };

    let results = if force_seq {
        exec::map_indexed_seq(plan.trajectories as usize, worker)
    } else {
        exec::map_indexed(plan.trajectories as usize, worker)
    };

    let mut merged: Option<SegmentAccumulator> = None;
    let mut events = EventLog::new(lattice.len());
    for r in results {
        let (acc, ev) = r?;
        events.merge(&ev);
        match &mut merged {
            None => merged = Some(acc),
            Some(m) => m.merge(&acc),
        }
    }
    let merged = merged.expect("at least one trajectory");

    let burn_segments = merged.burn_in_segments()?;
    let traj_time = steps_per_traj as f64 * dt;
    let burn_in_time = traj_time * burn_segments as f64 / SEGMENTS as f64;
    Ok((merged.assemble(burn_segments, burn_in_time, dt), events))
}

// ---------------------------------------------------------------------------
// Metropolis oracle for the reflecting-case Gibbs measure
// ---------------------------------------------------------------------------

/// Random-walk Metropolis sampler of the Gibbs density
/// exp(-beta [H(a) + mu N(a)]) restricted to the cap polydisc. Proposal
/// scales are auto-tuned per mode to a 20-40% acceptance window; tuning
/// landing outside [0.05, 0.8] is an error.
pub fn gibbs_oracle(
    params: &ModelParams,
    lattice: &ModeLattice,
    seed: u64,
    n_samples: u64,
) -> Result<StationaryEstimate> {
    if params.policy != BoundaryPolicy::Reflect {
        return Err(Error::InvalidConfig(
            "the Gibbs oracle applies to the reflecting policy only".into(),
        ));
    }
    if n_samples < 1000 {
        return Err(Error::InvalidConfig(
            "the Gibbs oracle needs at least 1000 samples".into(),
        ));
    }

    // Fixed chain split keeps results independent of thread count.
    let chains = ((n_samples / 50_000).max(1) as usize).min(8);
    let per_chain = n_samples / chains as u64;

    let results = exec::map_indexed(chains, |c| -> Result<SegmentAccumulator> {
        let mut rng = RunSeed::with_stream(seed, c as u64).rng();
        let mut chain = MetropolisChain::new(params, lattice);
        chain.tune(&mut rng)?;
        chain.burn(per_chain / 10, &mut rng);
        let mut acc = SegmentAccumulator::new(lattice, params.beta, per_chain);
        for _ in 0..per_chain {
            chain.sweep(&mut rng);
            acc.push(&chain.amplitudes);
        }
        Ok(acc)
    });

    let mut merged: Option<SegmentAccumulator> = None;
    for r in results {
        let acc = r?;
        match &mut merged {
            None => merged = Some(acc),
            Some(m) => m.merge(&acc),
        }
    }
    let merged = merged.expect("at least one chain");
    // MCMC samples start in equilibrium after the explicit burn phase, so no
    // further segments are dropped here.
    Ok(merged.assemble(0, (per_chain / 10) as f64, 0.0))
}

struct MetropolisChain<'a> {
    params: &'a ModelParams,
    lattice: &'a ModeLattice,
    kernel: NonlinearKernel,
    amplitudes: Vec<Complex64>,
    scales: Vec<f64>,
    energy: f64,
}

impl<'a> MetropolisChain<'a> {
    fn new(params: &'a ModelParams, lattice: &'a ModeLattice) -> Self {
        params.check_against(lattice).expect("validated by caller");
        let scales = lattice
            .caps()
            .iter()
            .zip(lattice.knorms())
            .map(|(&alpha, &k)| {
                let stiff = 0.5 * params.beta * (k * k + 0.5 * params.mu);
                let width = if stiff > 0.0 {
                    (0.5 / stiff).sqrt()
                } else {
                    f64::INFINITY
                };
                (alpha / 3.0).min(width).max(1e-6 * alpha.max(1.0))
            })
            .collect();
        let mut chain = Self {
            params,
            lattice,
            kernel: NonlinearKernel::new(lattice),
            amplitudes: vec![Complex64::default(); lattice.len()],
            scales,
            energy: 0.0,
        };
        chain.energy = chain.total_energy();
        chain
    }

    fn total_energy(&mut self) -> f64 {
        let mut kinetic_mass = 0.0;
        for (i, a) in self.amplitudes.iter().enumerate() {
            let k = self.lattice.knorm(i);
            kinetic_mass += (0.5 * k * k + 0.25 * self.params.mu) * a.norm_sqr();
        }
        if self.params.lambda == 0.0 {
            kinetic_mass
        } else {
            kinetic_mass + 0.25 * self.params.lambda * self.kernel.quartic_integral(&self.amplitudes)
        }
    }

    /// One sweep: a proposal per unfrozen mode. Returns accepted count.
    fn sweep<R: Rng>(&mut self, rng: &mut R) -> u32 {
        let mut accepted = 0;
        for i in 0..self.amplitudes.len() {
            let alpha = self.lattice.cap(i);
            if alpha == 0.0 {
                continue;
            }
            let old = self.amplitudes[i];
            let proposal = old
                + self.scales[i]
                    * Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            if proposal.norm() >= alpha {
                continue; // outside the polydisc: zero target density
            }
            self.amplitudes[i] = proposal;
            let new_energy = self.total_energy();
            let log_ratio = -self.params.beta * (new_energy - self.energy);
            if log_ratio >= 0.0 || rng.gen::<f64>().ln() < log_ratio {
                self.energy = new_energy;
                accepted += 1;
            } else {
                self.amplitudes[i] = old;
            }
        }
        accepted
    }

    /// Scale tuning toward 20-40% acceptance, mode-aggregated.
    fn tune<R: Rng>(&mut self, rng: &mut R) -> Result<()> {
        let mut rate = 0.0;
        for _round in 0..40 {
            let sweeps = 60u32;
            let mut acc = 0u32;
            let mut proposals = 0u32;
            for _ in 0..sweeps {
                acc += self.sweep(rng);
                proposals += self
                    .lattice
                    .caps()
                    .iter()
                    .filter(|&&a| a > 0.0)
                    .count() as u32;
            }
            rate = f64::from(acc) / f64::from(proposals.max(1));
            if rate < 0.20 {
                for s in &mut self.scales {
                    *s *= 0.8;
                }
            } else if rate > 0.40 {
                for s in &mut self.scales {
                    *s *= 1.2;
                }
            } else {
                return Ok(());
            }
        }
        if (0.05..=0.8).contains(&rate) {
            Ok(())
        } else {
            Err(Error::TuningFailed(rate))
        }
    }

    fn burn<R: Rng>(&mut self, sweeps: u64, rng: &mut R) {
        for _ in 0..sweeps {
            self.sweep(rng);
        }
    }
}

// ---------------------------------------------------------------------------
// Closed-form references (reflecting, lambda = 0)
// ---------------------------------------------------------------------------

/// Closed-form results for a single capped mode with Gaussian weight
/// exp(-h |a|^2) reflected at |a| = alpha. These are the factorized
/// (lambda = 0) marginals used to validate both the SDE sampler and the
/// Metropolis oracle.
pub mod reference {
    use super::{ModeHistogram, BIN_WIDTH};
    use crate::dynamics::BoundaryPolicy;
    use crate::meanfield::psi;

    /// <|a|^2> of the reflected truncated Gaussian, h in field units.
    pub fn reflect_mean_sq(h: f64, alpha: f64) -> f64 {
        alpha * alpha * psi(BoundaryPolicy::Reflect, alpha * alpha * h)
    }

    /// <|a|^2> of the wave-breaking stationary measure at stiffness h.
    pub fn wavebreak_mean_sq(h: f64, alpha: f64) -> f64 {
        alpha * alpha * psi(BoundaryPolicy::WaveBreak, alpha * alpha * h)
    }

    /// Exact bin masses of beta^{1/2}|a| under the reflected truncated
    /// Gaussian, in the reference binning. `stiff_s` is the stiffness in
    /// s = beta^{1/2}|a| units: (k^2 + mu/2)/2.
    pub fn reflect_histogram(stiff_s: f64, s_max: f64) -> ModeHistogram {
        let n_bins = ((s_max / BIN_WIDTH).ceil() as usize).max(1);
        let cdf = |s: f64| -> f64 {
            if stiff_s.abs() < 1e-14 {
                (s * s) / (s_max * s_max)
            } else {
                (-stiff_s * s * s).exp_m1() / (-stiff_s * s_max * s_max).exp_m1()
            }
        };
        let mut masses = Vec::with_capacity(n_bins);
        for b in 0..n_bins {
            let l = b as f64 * BIN_WIDTH;
            let r = ((b + 1) as f64 * BIN_WIDTH).min(s_max);
            masses.push(cdf(r) - cdf(l));
        }
        ModeHistogram {
            bin_width: BIN_WIDTH,
            masses,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{CapProfile, LatticeOptions};

    fn single_mode_lattice(alpha: f64) -> ModeLattice {
        let cap = CapProfile::Linear {
            alpha0: alpha,
            k_max: 1e12,
        };
        ModeLattice::build(1, 1.0, 1.0, &cap, &LatticeOptions::default()).unwrap()
    }

    fn hist(masses: Vec<f64>) -> ModeHistogram {
        ModeHistogram {
            bin_width: BIN_WIDTH,
            masses,
        }
    }

    fn wrap(h: ModeHistogram) -> StationaryEstimate {
        StationaryEstimate {
            histograms: vec![h],
            mean_sq: vec![0.0],
            mean_quart: vec![0.0],
            se_mean_sq: vec![0.0],
            samples: 0,
            burn_in_time: 0.0,
            dt: 0.0,
        }
    }

    #[test]
    fn tv_identical_is_zero() {
        let a = wrap(hist(vec![0.5, 0.5]));
        let b = wrap(hist(vec![0.5, 0.5]));
        assert_eq!(tv_distance(&a, &b, 0).unwrap(), 0.0);
    }

    #[test]
    fn tv_disjoint_is_one() {
        let a = wrap(hist(vec![1.0, 0.0]));
        let b = wrap(hist(vec![0.0, 1.0]));
        assert_eq!(tv_distance(&a, &b, 0).unwrap(), 1.0);
    }

    #[test]
    fn tv_direct_arithmetic() {
        let a = wrap(hist(vec![0.5, 0.5, 0.0]));
        let b = wrap(hist(vec![0.25, 0.25, 0.5]));
        assert_eq!(tv_distance(&a, &b, 0).unwrap(), 0.5);
    }

    #[test]
    fn tv_binning_mismatch_is_error() {
        let a = wrap(hist(vec![1.0]));
        let b = wrap(hist(vec![0.5, 0.5]));
        assert!(tv_distance(&a, &b, 0).is_err());
    }

    #[test]
    fn sde_matches_truncated_gaussian_moment() {
        // lambda = 0, single mode, Reflect: <|a|^2> within 3 standard errors
        // of the closed form (1/h)[1 - z e^-z / (1 - e^-z)].
        let lat = single_mode_lattice(1.0);
        let params =
            ModelParams::uniform(0.0, 1.0, 1.0, 10.0, BoundaryPolicy::Reflect, &lat).unwrap();
        let plan = SamplingPlan::new(2_000_000, 5, 4);
        let (est, events) = estimate_stationary(&params, &lat, 1e-4, 421, &plan).unwrap();
        let h = 0.5 * params.beta * 0.5 * params.mu; // k = 0
        let expected = reference::reflect_mean_sq(h, 1.0);
        let dev = (est.mean_sq[0] - expected).abs();
        assert!(
            dev <= 3.0 * est.se_mean_sq[0].max(1e-6),
            "moment {} vs {} (se {})",
            est.mean_sq[0],
            expected,
            est.se_mean_sq[0]
        );
        assert_eq!(events.total_breaks(), 0);
        // histogram mass sums to 1 and stays within support
        let total: f64 = est.histograms[0].masses.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sde_histogram_matches_truncated_gaussian_shape() {
        // Long-run single-mode radial histogram within TV 0.03 of the
        // r exp(-h r^2) density.
        let lat = single_mode_lattice(1.0);
        let params =
            ModelParams::uniform(0.0, 1.0, 1.0, 10.0, BoundaryPolicy::Reflect, &lat).unwrap();
        let plan = SamplingPlan::new(4_000_000, 5, 4);
        let (est, _) = estimate_stationary(&params, &lat, 1e-4, 77, &plan).unwrap();
        let analytic = reference::reflect_histogram(0.25, 1.0); // (0 + 0.5)/2
        let tv = tv_between(&est.histograms[0], &analytic).unwrap();
        assert!(tv < 0.03, "TV = {tv}");
    }

    #[test]
    fn wavebreak_low_stiffness_moment_quarter_cap_squared() {
        // k = 0, mu -> 0: stationary density prop to r ln(alpha/r),
        // <|a|^2> -> alpha^2 / 4. The discrete-time break trigger carries an
        // O(sqrt(dt)) boundary bias (~ the per-step noise kick over alpha),
        // so the tolerance is the ~2% bias bound at this dt plus noise.
        let alpha = 1.0;
        let lat = single_mode_lattice(alpha);
        let params =
            ModelParams::uniform(0.0, 1.0, 1e-6, 10.0, BoundaryPolicy::WaveBreak, &lat).unwrap();
        let plan = SamplingPlan::new(20_000_000, 5, 4);
        let (est, events) = estimate_stationary(&params, &lat, 2e-5, 5150, &plan).unwrap();
        let expected = alpha * alpha / 4.0;
        let rel = (est.mean_sq[0] - expected).abs() / expected;
        assert!(
            rel < 0.035,
            "moment {} vs {expected} (rel {rel}, se {})",
            est.mean_sq[0],
            est.se_mean_sq[0]
        );
        assert!(events.total_breaks() > 0);
        assert_eq!(events.reflects.iter().sum::<u64>(), 0);
    }

    #[test]
    fn wavebreak_histogram_vanishes_at_cap() {
        // dt small enough that the single-step boundary layer (~noise kick)
        // stays narrow against the 5e-3 binning.
        let lat = single_mode_lattice(0.5);
        let params =
            ModelParams::uniform(0.0, 1.0, 1.0, 10.0, BoundaryPolicy::WaveBreak, &lat).unwrap();
        let plan = SamplingPlan::new(4_000_000, 5, 4);
        let (est, _) = estimate_stationary(&params, &lat, 1e-5, 99, &plan).unwrap();
        let h = &est.histograms[0];
        let peak = h.peak_mass();
        let last = *h.masses.last().unwrap();
        assert!(
            last < 0.1 * peak,
            "final bin {last} vs peak {peak} (absorbing boundary)"
        );
    }

    #[test]
    fn gibbs_oracle_matches_factorized_marginals() {
        // lambda = 0: product measure; per-mode marginals match the
        // truncated Gaussian closed form within TV 0.02.
        let cap = CapProfile::PerMode {
            entries: vec![(0.0, 1.0), (2.0 * std::f64::consts::PI, 0.5)],
        };
        let lat = ModeLattice::build(1, 1.5, 1.0, &cap, &LatticeOptions::default()).unwrap();
        let params =
            ModelParams::uniform(0.0, 1.0, 1.0, 10.0, BoundaryPolicy::Reflect, &lat).unwrap();
        let est = gibbs_oracle(&params, &lat, 1234, 400_000).unwrap();
        for mode in 0..lat.len() {
            let k = lat.knorm(mode);
            let stiff_s = 0.5 * (k * k + 0.5); // beta = 1, mu = 1
            let analytic = reference::reflect_histogram(stiff_s, lat.cap(mode));
            let tv = tv_between(&est.histograms[mode], &analytic).unwrap();
            assert!(tv < 0.02, "mode {mode}: TV = {tv}");
        }
    }

    #[test]
    fn gibbs_oracle_beta_scaling() {
        // Quadrupling beta halves the RMS radius in the unbounded limit.
        let lat = single_mode_lattice(50.0);
        let p1 = ModelParams::uniform(0.0, 1.0, 1.0, 10.0, BoundaryPolicy::Reflect, &lat).unwrap();
        let p4 = ModelParams::uniform(0.0, 4.0, 1.0, 10.0, BoundaryPolicy::Reflect, &lat).unwrap();
        let e1 = gibbs_oracle(&p1, &lat, 7, 200_000).unwrap();
        let e4 = gibbs_oracle(&p4, &lat, 8, 200_000).unwrap();
        let ratio = (e1.mean_sq[0] / e4.mean_sq[0]).sqrt();
        assert!((ratio - 2.0).abs() < 0.05, "RMS ratio {ratio}");
    }

    #[test]
    fn gibbs_oracle_rejects_wavebreak_policy() {
        let lat = single_mode_lattice(1.0);
        let params =
            ModelParams::uniform(0.0, 1.0, 1.0, 10.0, BoundaryPolicy::WaveBreak, &lat).unwrap();
        assert!(gibbs_oracle(&params, &lat, 1, 10_000).is_err());
    }

    #[test]
    fn burn_in_doubling_is_robust() {
        // Doubling the burn-in moves every reported moment by less than one
        // standard error.
        let lat = single_mode_lattice(1.0);
        let params =
            ModelParams::uniform(0.0, 1.0, 1.0, 10.0, BoundaryPolicy::Reflect, &lat).unwrap();
        let plan = SamplingPlan::new(2_000_000, 5, 4);
        let (steps_per_traj, samples_per_traj) = plan.validate().unwrap();
        let mut merged: Option<SegmentAccumulator> = None;
        for t in 0..plan.trajectories {
            let mut acc = SegmentAccumulator::new(&lat, params.beta, samples_per_traj);
            let mut observers: Vec<&mut dyn Observer> = vec![&mut acc];
            run_trajectory(
                &FieldState::zero(&lat),
                &params,
                &lat,
                1e-4,
                steps_per_traj,
                RunSeed::with_stream(31, u64::from(t)),
                plan.stride,
                &mut observers,
            )
            .unwrap();
            drop(observers);
            match &mut merged {
                None => merged = Some(acc),
                Some(m) => m.merge(&acc),
            }
        }
        let merged = merged.unwrap();
        let j = merged.burn_in_segments().unwrap();
        let base = merged.assemble(j, 0.0, 1e-4);
        let doubled = merged.assemble(2 * j, 0.0, 1e-4);
        for mode in 0..lat.len() {
            let delta = (base.mean_sq[mode] - doubled.mean_sq[mode]).abs();
            assert!(
                delta < base.se_mean_sq[mode],
                "mode {mode}: burn-in doubling moved the moment by {delta} \
                 (se {})",
                base.se_mean_sq[mode]
            );
        }
    }

    #[test]
    fn event_rate_vanishes_for_weak_coupling_large_cap() {
        // Under WaveBreak the absorbed-mass rate is strictly positive in the
        // focusing regime and negligible for lambda = 0 with a generous cap.
        let lat = single_mode_lattice(6.0);
        let weak =
            ModelParams::uniform(0.0, 1.0, 4.0, 10.0, BoundaryPolicy::WaveBreak, &lat).unwrap();
        let (_, ev_weak) = run_trajectory(
            &FieldState::zero(&lat),
            &weak,
            &lat,
            1e-4,
            200_000,
            RunSeed::new(3),
            u64::MAX,
            &mut [],
        )
        .unwrap();
        assert_eq!(ev_weak.total_breaks(), 0, "no breaks expected at lambda=0");

        let lat_small = single_mode_lattice(1.0);
        let strong =
            ModelParams::uniform(-5.0, 1.0, 1.0, 10.0, BoundaryPolicy::WaveBreak, &lat_small)
                .unwrap();
        let (_, ev_strong) = run_trajectory(
            &FieldState::zero(&lat_small),
            &strong,
            &lat_small,
            1e-4,
            200_000,
            RunSeed::new(4),
            u64::MAX,
            &mut [],
        )
        .unwrap();
        assert!(ev_strong.total_absorbed() > 0.0);
        assert!(ev_strong.total_breaks() > 0);
    }
}
