//! Langevin dynamics of the capped mode amplitudes: energies, gradients,
//! stochastic integration and boundary events.
//!
//! Each mode n carries an independent complex Ornstein-Uhlenbeck bath
//! (damping nu_n, inverse temperature beta) on top of the Hamiltonian
//! rotation. When |a_n| hits its cap alpha_n the amplitude is either
//! mirrored back (`Reflect`) or reset to zero (`WaveBreak`), and the event
//! log keeps per-mode counts plus the mass absorbed by resets.

use crate::error::{Error, Result};
use crate::lattice::ModeLattice;
use crate::nonlinear::NonlinearKernel;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Boundary rule applied when an amplitude reaches its cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryPolicy {
    /// Specular mirror in the radius: r -> 2 alpha - r at fixed phase.
    Reflect,
    /// Reset to zero ("wave-breaking"), with reinjection at the origin.
    WaveBreak,
}

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    /// Plain Euler-Maruyama on the full drift.
    EulerMaruyama,
    /// Strang splitting: half nonlinear kick (implicit midpoint), exact
    /// one-step law for the linear rotation + Ornstein-Uhlenbeck part,
    /// half nonlinear kick. With nu = 0 and no noise this is symplectic;
    /// the quadratic mass invariant is conserved to solver precision and
    /// the energy error is a bounded O(dt^2) fluctuation.
    SplitStep,
}

/// Physical parameters of the model. The nonlinearity exponent is fixed at
/// p = 4; every other value is rejected when constructing the parameters.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub lambda: f64,
    pub beta: f64,
    pub mu: f64,
    pub nu: Vec<f64>,
    pub policy: BoundaryPolicy,
    pub scheme: Integrator,
    p: u32,
}

impl ModelParams {
    pub fn new(
        p: u32,
        lambda: f64,
        beta: f64,
        mu: f64,
        nu: Vec<f64>,
        policy: BoundaryPolicy,
    ) -> Result<Self> {
        if p != 4 {
            return Err(Error::InvalidConfig(format!(
                "nonlinearity exponent p = {p} is not supported; only p = 4"
            )));
        }
        if !(beta > 0.0) {
            return Err(Error::InvalidConfig(format!("beta must be > 0, got {beta}")));
        }
        if nu.is_empty() || nu.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidConfig(
                "every mode needs a positive damping nu_n".into(),
            ));
        }
        Ok(Self {
            lambda,
            beta,
            mu,
            nu,
            policy,
            scheme: Integrator::SplitStep,
            p,
        })
    }

    /// Same damping on every mode of `lattice`.
    pub fn uniform(
        lambda: f64,
        beta: f64,
        mu: f64,
        nu: f64,
        policy: BoundaryPolicy,
        lattice: &ModeLattice,
    ) -> Result<Self> {
        Self::new(4, lambda, beta, mu, vec![nu; lattice.len()], policy)
    }

    pub fn with_scheme(mut self, scheme: Integrator) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn exponent(&self) -> u32 {
        self.p
    }

    pub(crate) fn check_against(&self, lattice: &ModeLattice) -> Result<()> {
        if self.nu.len() != lattice.len() {
            return Err(Error::InvalidConfig(format!(
                "nu has {} entries but the lattice has {} modes",
                self.nu.len(),
                lattice.len()
            )));
        }
        Ok(())
    }
}

/// Complex amplitudes of all modes at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub amplitudes: Vec<Complex64>,
    pub time: f64,
}

impl FieldState {
    pub fn zero(lattice: &ModeLattice) -> Self {
        Self {
            amplitudes: vec![Complex64::default(); lattice.len()],
            time: 0.0,
        }
    }

    /// All modes at `fraction` of their cap, real phase. Used as the
    /// "extreme" initial condition in convergence experiments.
    pub fn near_cap(lattice: &ModeLattice, fraction: f64) -> Self {
        Self {
            amplitudes: lattice
                .caps()
                .iter()
                .map(|&a| Complex64::new(fraction * a, 0.0))
                .collect(),
            time: 0.0,
        }
    }

    pub fn conforms(&self, lattice: &ModeLattice) -> Result<()> {
        if self.amplitudes.len() != lattice.len() {
            return Err(Error::InvalidConfig(format!(
                "state has {} amplitudes but the lattice has {} modes",
                self.amplitudes.len(),
                lattice.len()
            )));
        }
        Ok(())
    }
}

/// Per-mode boundary event counters and absorbed mass.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub reflects: Vec<u64>,
    pub breaks: Vec<u64>,
    /// Sum over resets of |a_n|^2 right before the reset.
    pub absorbed_mass: Vec<f64>,
}

impl EventLog {
    pub fn new(n_modes: usize) -> Self {
        Self {
            reflects: vec![0; n_modes],
            breaks: vec![0; n_modes],
            absorbed_mass: vec![0.0; n_modes],
        }
    }

    pub fn merge(&mut self, other: &EventLog) {
        for (a, b) in self.reflects.iter_mut().zip(&other.reflects) {
            *a += b;
        }
        for (a, b) in self.breaks.iter_mut().zip(&other.breaks) {
            *a += b;
        }
        for (a, b) in self.absorbed_mass.iter_mut().zip(&other.absorbed_mass) {
            *a += b;
        }
    }

    pub fn total_breaks(&self) -> u64 {
        self.breaks.iter().sum()
    }

    pub fn total_absorbed(&self) -> f64 {
        self.absorbed_mass.iter().sum()
    }
}

/// Truncated Hamiltonian: (1/2) sum k^2 |a|^2 + (lambda/4) int |psi|^4 dx.
pub fn hamiltonian(state: &FieldState, params: &ModelParams, lattice: &ModeLattice) -> f64 {
    let mut kernel = NonlinearKernel::new(lattice);
    hamiltonian_with(state, params, lattice, &mut kernel)
}

pub(crate) fn hamiltonian_with(
    state: &FieldState,
    params: &ModelParams,
    lattice: &ModeLattice,
    kernel: &mut NonlinearKernel,
) -> f64 {
    let kinetic: f64 = state
        .amplitudes
        .iter()
        .zip(lattice.knorms())
        .map(|(a, &k)| 0.5 * k * k * a.norm_sqr())
        .sum();
    if params.lambda == 0.0 {
        return kinetic;
    }
    kinetic + 0.25 * params.lambda * kernel.quartic_integral(&state.amplitudes)
}

/// Truncated mass (1/4) sum |a_n|^2.
pub fn mass(state: &FieldState) -> f64 {
    0.25 * state.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>()
}

/// Exact gradient of `hamiltonian` with respect to (Re a_n, Im a_n), packed
/// as the real and imaginary parts of one complex number per mode:
/// grad_n = k_n^2 a_n + lambda V T_n, with T the cubic convolution.
pub fn energy_gradient(
    state: &FieldState,
    params: &ModelParams,
    lattice: &ModeLattice,
) -> Vec<Complex64> {
    let mut kernel = NonlinearKernel::new(lattice);
    let mut out = vec![Complex64::default(); lattice.len()];
    energy_gradient_with(state, params, lattice, &mut kernel, &mut out);
    out
}

pub(crate) fn energy_gradient_with(
    state: &FieldState,
    params: &ModelParams,
    lattice: &ModeLattice,
    kernel: &mut NonlinearKernel,
    out: &mut [Complex64],
) {
    if params.lambda != 0.0 {
        kernel.cubic(&state.amplitudes, out);
        let lv = params.lambda * kernel.volume();
        for ((g, a), &k) in out
            .iter_mut()
            .zip(&state.amplitudes)
            .zip(lattice.knorms())
        {
            *g = k * k * a + lv * *g;
        }
    } else {
        for ((g, a), &k) in out
            .iter_mut()
            .zip(&state.amplitudes)
            .zip(lattice.knorms())
        {
            *g = k * k * a;
        }
    }
}

/// Deterministic part of the Langevin equations, one complex pair per mode:
/// drift_n = -i grad_n - nu_n (grad_n + (mu/2) a_n).
pub fn drift(state: &FieldState, params: &ModelParams, lattice: &ModeLattice) -> Vec<Complex64> {
    let grad = energy_gradient(state, params, lattice);
    grad.iter()
        .zip(&state.amplitudes)
        .zip(&params.nu)
        .map(|((g, a), &nu)| {
            Complex64::new(0.0, -1.0) * g - nu * (g + 0.5 * params.mu * a)
        })
        .collect()
}

/// Deterministic seed material for one trajectory: a master seed plus a
/// stream index, mapped onto independent counter-mode RNG streams.
#[derive(Debug, Clone, Copy)]
pub struct RunSeed {
    pub master: u64,
    pub stream: u64,
}

impl RunSeed {
    pub fn new(master: u64) -> Self {
        Self { master, stream: 0 }
    }

    pub fn with_stream(master: u64, stream: u64) -> Self {
        Self { master, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.stream);
        rng
    }
}

/// Anything that samples a running trajectory at the observer stride.
pub trait Observer {
    fn record(&mut self, time: f64, state: &FieldState, events: &EventLog);
}

/// Collects (time, mode, re, im, |a|) rows for the trajectory trace CSV.
#[derive(Debug, Default, Clone)]
pub struct TraceObserver {
    pub rows: Vec<TraceRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub time: f64,
    pub mode: usize,
    pub re: f64,
    pub im: f64,
    pub abs: f64,
}

impl Observer for TraceObserver {
    fn record(&mut self, time: f64, state: &FieldState, _events: &EventLog) {
        for (mode, a) in state.amplitudes.iter().enumerate() {
            self.rows.push(TraceRow {
                time,
                mode,
                re: a.re,
                im: a.im,
                abs: a.norm(),
            });
        }
    }
}

/// Reusable stepper holding per-mode constants and scratch buffers.
pub struct Stepper<'a> {
    params: &'a ModelParams,
    lattice: &'a ModeLattice,
    dt: f64,
    kernel: NonlinearKernel,
    // exact one-step linear map e^{-(i k^2 + gamma) dt}
    linear_decay: Vec<Complex64>,
    // per-component noise std of the exact OU step
    ou_std: Vec<f64>,
    // Euler-Maruyama noise amplitude sqrt(2 nu / beta) sqrt(dt)
    em_std: Vec<f64>,
    frozen: Vec<bool>,
    grad: Vec<Complex64>,
    kick_mid: Vec<Complex64>,
    kick_t: Vec<Complex64>,
}

impl<'a> Stepper<'a> {
    /// Builds the stepper and performs the configuration-time step-size
    /// check: the per-step noise kick sqrt(2 nu dt / beta) must stay below
    /// alpha_n / 10 for every capped mode.
    pub fn new(params: &'a ModelParams, lattice: &'a ModeLattice, dt: f64) -> Result<Self> {
        params.check_against(lattice)?;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {dt}")));
        }
        for (i, (&nu, &alpha)) in params.nu.iter().zip(lattice.caps()).enumerate() {
            if alpha == 0.0 {
                continue;
            }
            let kick = (2.0 * nu * dt / params.beta).sqrt();
            if kick >= alpha / 10.0 {
                return Err(Error::StepTooLarge(format!(
                    "noise kick {kick:.3e} per step exceeds alpha/10 = {:.3e} for mode {i}; \
                     reduce dt below {:.3e}",
                    alpha / 10.0,
                    params.beta * alpha * alpha / (200.0 * nu)
                )));
            }
        }

        let n = lattice.len();
        let mut linear_decay = Vec::with_capacity(n);
        let mut ou_std = Vec::with_capacity(n);
        let mut em_std = Vec::with_capacity(n);
        for (i, &nu) in params.nu.iter().enumerate() {
            let k2 = lattice.knorm(i) * lattice.knorm(i);
            let gamma = nu * (k2 + 0.5 * params.mu);
            let phase = Complex64::from_polar(1.0, -k2 * dt);
            linear_decay.push((-gamma * dt).exp() * phase);
            // Var(eta) per component = (nu/beta) (1 - e^{-2 gamma dt}) / gamma
            let gd = gamma * dt;
            let shape = if gd.abs() < 1e-8 {
                2.0 * dt * (1.0 - gd)
            } else {
                -(-2.0 * gd).exp_m1() / gamma
            };
            ou_std.push((nu / params.beta * shape).max(0.0).sqrt());
            em_std.push((2.0 * nu * dt / params.beta).sqrt());
        }

        Ok(Self {
            params,
            lattice,
            dt,
            kernel: NonlinearKernel::new(lattice),
            linear_decay,
            ou_std,
            em_std,
            frozen: lattice.caps().iter().map(|&a| a == 0.0).collect(),
            grad: vec![Complex64::default(); n],
            kick_mid: vec![Complex64::default(); n],
            kick_t: vec![Complex64::default(); n],
        })
    }

    pub fn step<R: Rng>(
        &mut self,
        state: &mut FieldState,
        events: &mut EventLog,
        rng: &mut R,
    ) -> Result<()> {
        match self.params.scheme {
            Integrator::EulerMaruyama => self.step_euler_maruyama(state, rng),
            Integrator::SplitStep => self.step_split(state, rng),
        }
        state.time += self.dt;
        self.apply_boundaries(state, events)
    }

    fn step_euler_maruyama<R: Rng>(&mut self, state: &mut FieldState, rng: &mut R) {
        energy_gradient_with(state, self.params, self.lattice, &mut self.kernel, &mut self.grad);
        let dt = self.dt;
        let mu = self.params.mu;
        for i in 0..state.amplitudes.len() {
            if self.frozen[i] {
                state.amplitudes[i] = Complex64::default();
                continue;
            }
            let a = state.amplitudes[i];
            let g = self.grad[i];
            let nu = self.params.nu[i];
            let drift = Complex64::new(0.0, -1.0) * g - nu * (g + 0.5 * mu * a);
            let xi = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            state.amplitudes[i] = a + drift * dt + self.em_std[i] * xi;
        }
    }

    fn step_split<R: Rng>(&mut self, state: &mut FieldState, rng: &mut R) {
        let half = 0.5 * self.dt;
        self.quartic_kick(&mut state.amplitudes, half);
        // Exact rotation + OU on the linear part.
        for i in 0..state.amplitudes.len() {
            if self.frozen[i] {
                state.amplitudes[i] = Complex64::default();
                continue;
            }
            let xi = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            state.amplitudes[i] = self.linear_decay[i] * state.amplitudes[i] + self.ou_std[i] * xi;
        }
        self.quartic_kick(&mut state.amplitudes, half);
    }

    /// Implicit-midpoint solve of da/dt = -(i + nu_n) lambda V T_n(a) over tau.
    fn quartic_kick(&mut self, amplitudes: &mut [Complex64], tau: f64) {
        if self.params.lambda == 0.0 {
            return;
        }
        let lv = self.params.lambda * self.kernel.volume();
        let scale: f64 = amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
            .max(1e-12);

        self.kick_mid.copy_from_slice(amplitudes);
        for _ in 0..12 {
            self.kernel.cubic(&self.kick_mid, &mut self.kick_t);
            let mut delta: f64 = 0.0;
            for i in 0..amplitudes.len() {
                let f = -(Complex64::new(0.0, 1.0) + self.params.nu[i]) * lv * self.kick_t[i];
                let next = if self.frozen[i] {
                    Complex64::default()
                } else {
                    amplitudes[i] + 0.5 * tau * f
                };
                delta = delta.max((next - self.kick_mid[i]).norm());
                self.kick_mid[i] = next;
            }
            if delta <= 1e-14 * scale {
                break;
            }
        }
        for (a, &mid) in amplitudes.iter_mut().zip(&self.kick_mid) {
            *a = 2.0 * mid - *a;
        }
    }

    fn apply_boundaries(&self, state: &mut FieldState, events: &mut EventLog) -> Result<()> {
        for (i, a) in state.amplitudes.iter_mut().enumerate() {
            let alpha = self.lattice.cap(i);
            if alpha == 0.0 {
                *a = Complex64::default();
                continue;
            }
            let r = a.norm();
            match self.params.policy {
                BoundaryPolicy::Reflect => {
                    if r > alpha {
                        let mirrored = 2.0 * alpha - r;
                        if mirrored < 0.0 {
                            return Err(Error::StepTooLarge(format!(
                                "mode {i} overshot to |a| = {r:.6} > 2 alpha = {:.6}; \
                                 reduce dt",
                                2.0 * alpha
                            )));
                        }
                        *a *= mirrored / r;
                        events.reflects[i] += 1;
                    }
                }
                BoundaryPolicy::WaveBreak => {
                    if r >= alpha {
                        events.breaks[i] += 1;
                        events.absorbed_mass[i] += r * r;
                        *a = Complex64::default();
                    }
                }
            }
        }
        Ok(())
    }
}

/// One stochastic step (scheme taken from `params`), returning the new
/// state. Hot loops should hold a [`Stepper`] or use [`run_trajectory`]
/// instead of paying the setup cost per call.
pub fn step<R: Rng>(
    state: &FieldState,
    params: &ModelParams,
    lattice: &ModeLattice,
    dt: f64,
    rng: &mut R,
) -> Result<(FieldState, EventLog)> {
    state.conforms(lattice)?;
    let mut stepper = Stepper::new(params, lattice, dt)?;
    let mut next = state.clone();
    let mut events = EventLog::new(lattice.len());
    stepper.step(&mut next, &mut events, rng)?;
    Ok((next, events))
}

/// Integrate `n_steps` from `initial`, sampling observers every `stride`
/// steps. Fully reproducible: identical (seed, dt, n_steps, initial) give
/// bit-identical output.
pub fn run_trajectory(
    initial: &FieldState,
    params: &ModelParams,
    lattice: &ModeLattice,
    dt: f64,
    n_steps: u64,
    seed: RunSeed,
    stride: u64,
    observers: &mut [&mut dyn Observer],
) -> Result<(FieldState, EventLog)> {
    initial.conforms(lattice)?;
    for (i, (a, &alpha)) in initial.amplitudes.iter().zip(lattice.caps()).enumerate() {
        if a.norm() > alpha {
            return Err(Error::InvalidConfig(format!(
                "initial amplitude of mode {i} exceeds its cap: {} > {alpha}",
                a.norm()
            )));
        }
    }
    let stride = stride.max(1);
    let mut stepper = Stepper::new(params, lattice, dt)?;
    let mut rng = seed.rng();
    let mut state = initial.clone();
    let mut events = EventLog::new(lattice.len());
    for step_idx in 1..=n_steps {
        stepper.step(&mut state, &mut events, &mut rng)?;
        if step_idx % stride == 0 {
            for obs in observers.iter_mut() {
                obs.record(state.time, &state, &events);
            }
        }
    }
    Ok((state, events))
}
