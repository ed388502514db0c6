//! The five subcommands: describe, simulate, meanfield, scan, infrared.

use crate::config::Config;
use crate::Globals;
use snlse_core::csvio;
use snlse_core::dynamics::{BoundaryPolicy, ModelParams};
use snlse_core::error::{Error, Result};
use snlse_core::estat::{estimate_stationary, gibbs_oracle, tv_distance, InitialCondition, SamplingPlan};
use snlse_core::lattice::{CapProfile, LatticeOptions, ModeLattice};
use snlse_core::meanfield::{
    infrared_probe, solve_self_consistency, transition_scan, IrVerdict, MeanFieldConfig,
};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

// ---------------------------------------------------------------------------
// Section readers
// ---------------------------------------------------------------------------

struct LatticeSpec {
    dimension: usize,
    eta_c: f64,
    box_length: f64,
    pin_zero_mode: bool,
    mode_limit: Option<u64>,
}

fn read_lattice(cfg: &mut Config) -> Option<LatticeSpec> {
    let dimension = cfg.require_u64("lattice", "dimension")? as usize;
    let eta_c = cfg.require_f64("lattice", "eta_c")?;
    let box_length = cfg.optional_f64("lattice", "box_length").unwrap_or(1.0);
    let pin_zero_mode = cfg.optional_bool("lattice", "pin_zero_mode").unwrap_or(false);
    let mode_limit = cfg.optional_u64("lattice", "mode_limit");
    Some(LatticeSpec {
        dimension,
        eta_c,
        box_length,
        pin_zero_mode,
        mode_limit,
    })
}

fn read_cap(cfg: &mut Config, box_length: f64) -> Option<CapProfile> {
    let kind = cfg.require("cap", "kind")?;
    match kind.as_str() {
        "linear" => {
            let alpha0 = cfg.require_f64("cap", "alpha0")?;
            let k_max = cfg.require_f64("cap", "k_max")?;
            Some(CapProfile::Linear { alpha0, k_max })
        }
        "langmuir" => {
            let c = cfg.require_f64("cap", "c")?;
            Some(CapProfile::Langmuir { c })
        }
        "generic" => {
            let c = cfg.require_f64("cap", "c")?;
            let k_max = cfg.require_f64("cap", "k_max")?;
            let raw = cfg.require("cap", "zeta")?;
            let mut zeta = Vec::new();
            for piece in raw.split(',') {
                let Some((k, z)) = piece.split_once(':') else {
                    cfg.error(format!("[cap] zeta: expected k:value pairs, got {piece:?}"));
                    return None;
                };
                match (k.trim().parse::<f64>(), z.trim().parse::<f64>()) {
                    (Ok(k), Ok(z)) => zeta.push((k, z)),
                    _ => {
                        cfg.error(format!("[cap] zeta: bad pair {piece:?}"));
                        return None;
                    }
                }
            }
            Some(CapProfile::Generic { c, k_max, zeta })
        }
        "table" => {
            // shell.<n^2> = alpha, keyed by the squared integer norm
            let mut entries = Vec::new();
            for (suffix, value) in cfg.prefixed("cap", "shell") {
                let Ok(norm_sq) = suffix.parse::<u64>() else {
                    cfg.error(format!("[cap] shell.{suffix}: shell must be an integer ||n||^2"));
                    continue;
                };
                let Ok(alpha) = value.parse::<f64>() else {
                    cfg.error(format!("[cap] shell.{suffix}: not a number: {value:?}"));
                    continue;
                };
                let k = 2.0 * PI * (norm_sq as f64).sqrt() / box_length;
                entries.push((k, alpha));
            }
            if entries.is_empty() {
                cfg.error("[cap] table kind needs at least one shell.<n^2> entry");
                return None;
            }
            entries.sort_by(|a, b| a.0.total_cmp(&b.0));
            Some(CapProfile::PerMode { entries })
        }
        other => {
            cfg.error(format!(
                "[cap] kind: expected linear, langmuir, generic or table, got {other:?}"
            ));
            None
        }
    }
}

fn build_lattice(cfg: &mut Config) -> Option<(ModeLattice, CapProfile)> {
    let spec = read_lattice(cfg)?;
    let cap = read_cap(cfg, spec.box_length)?;
    if cfg.has_errors() {
        return None;
    }
    let cap = match cap.validated() {
        Ok(c) => c,
        Err(e) => {
            cfg.error(e.to_string());
            return None;
        }
    };
    let mut opts = LatticeOptions {
        pin_zero_mode: spec.pin_zero_mode,
        ..Default::default()
    };
    if let Some(limit) = spec.mode_limit {
        opts.mode_limit = limit as usize;
    }
    match ModeLattice::build(spec.dimension, spec.eta_c, spec.box_length, &cap, &opts) {
        Ok(l) => Some((l, cap)),
        Err(e) => {
            cfg.error(e.to_string());
            None
        }
    }
}

fn read_params(cfg: &mut Config, lattice: &ModeLattice) -> Option<ModelParams> {
    let lambda = cfg.require_f64("params", "lambda")?;
    let beta = cfg.require_f64("params", "beta")?;
    let mu = cfg.require_f64("params", "mu")?;
    let nu = cfg.require_f64("params", "nu")?;
    let policy = cfg.policy("params")?;
    let scheme = cfg.scheme("params")?;
    match ModelParams::uniform(lambda, beta, mu, nu, policy, lattice) {
        Ok(p) => Some(p.with_scheme(scheme)),
        Err(e) => {
            cfg.error(e.to_string());
            None
        }
    }
}

struct RunSpec {
    dt: f64,
    plan: SamplingPlan,
    seed: u64,
    oracle_samples: u64,
    trace_samples: Option<u64>,
}

fn read_run(cfg: &mut Config) -> Option<RunSpec> {
    let dt = cfg.require_f64("run", "dt")?;
    let total_steps = cfg.require_u64("run", "total_steps")?;
    let stride = cfg.require_u64("run", "stride")?;
    let trajectories = cfg.require_u64("run", "trajectories")? as u32;
    let seed = cfg.require_u64("run", "seed")?;
    let oracle_samples = cfg.optional_u64("run", "oracle_samples").unwrap_or(1_000_000);
    let trace_samples = cfg.optional_u64("run", "trace_samples");
    let initial = match cfg.optional("run", "initial").as_deref() {
        None | Some("zero") => InitialCondition::Zero,
        Some("near-cap") => {
            let f = cfg.optional_f64("run", "near_cap_fraction").unwrap_or(0.99);
            InitialCondition::NearCap(f)
        }
        Some(other) => {
            cfg.error(format!(
                "[run] initial: expected zero or near-cap, got {other:?}"
            ));
            return None;
        }
    };
    Some(RunSpec {
        dt,
        plan: SamplingPlan::new(total_steps, stride, trajectories).with_initial(initial),
        seed,
        oracle_samples,
        trace_samples,
    })
}

fn read_meanfield(cfg: &mut Config) -> Option<MeanFieldConfig> {
    let dimension = cfg.require_u64("meanfield", "dimension")? as usize;
    let m = cfg.require_f64("meanfield", "m")?;
    let coupling = cfg.require_f64("meanfield", "coupling")?;
    let beta_v = cfg.require_f64("meanfield", "beta_v")?;
    let policy = cfg.policy("meanfield")?;
    let cap = read_cap(cfg, 1.0)?;
    let mut mf = MeanFieldConfig::new(dimension, m, coupling, beta_v, cap, policy);
    if let Some(q) = cfg.optional_f64("meanfield", "q") {
        mf.q = q;
    }
    if let Some(kappa) = cfg.optional_f64("meanfield", "infrared_cutoff") {
        mf.infrared_cutoff = kappa;
    }
    if let Some(tol) = cfg.optional_f64("meanfield", "quad_rel_tol") {
        mf.quad_rel_tol = tol;
    }
    if let Some(tol) = cfg.optional_f64("meanfield", "root_xtol") {
        mf.root_xtol = tol;
    }
    if let Some(n) = cfg.optional_u64("meanfield", "scan_points") {
        mf.scan_points = n as usize;
    }
    match mf.validated() {
        Ok(c) => Some(c),
        Err(e) => {
            cfg.error(e.to_string());
            None
        }
    }
}

// ---------------------------------------------------------------------------
// Output plumbing
// ---------------------------------------------------------------------------

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

/// Every run artifact records the resolved configuration and code version.
fn write_run_record(dir: &Path, command: &str, globals: &Globals, cfg_text: &str) -> Result<()> {
    let mut rec = String::new();
    let _ = writeln!(rec, "command: snlse {command}");
    let _ = writeln!(rec, "version: {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(rec, "seed_override: {:?}", globals.seed);
    let _ = writeln!(rec, "threads: {:?}", globals.threads);
    let _ = writeln!(rec, "emit_plot_data: {}", globals.emit_plot_data);
    let _ = writeln!(rec, "with_oracle: {}", globals.with_oracle);
    let _ = writeln!(rec, "--- config ---");
    rec.push_str(cfg_text);
    write_file(dir, "run_config.txt", &rec)?;
    Ok(())
}

fn require_out(globals: &Globals) -> Result<&Path> {
    globals
        .out
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig("this command needs --out DIR".into()))
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

pub fn cmd_describe(mut cfg: Config, globals: &Globals) -> Result<()> {
    // describe works on full simulation configs; the dynamics sections are
    // accepted but not read.
    cfg.allow_sections(&["params", "run"]);
    let built = build_lattice(&mut cfg);
    cfg_finish(cfg, built, &["lattice", "cap", "params", "run"], globals, |(lattice, _cap), text, globals| {
        let table = csvio::write_lattice_table(&lattice);
        println!(
            "{} modes, D = {}, eta_c = {}, L = {}",
            lattice.len(),
            lattice.dimension(),
            lattice.eta_c(),
            lattice.box_length()
        );
        print!("{table}");
        if let Some(out) = globals.out.as_deref() {
            write_file(out, "lattice.csv", &table)?;
            write_run_record(out, "describe", globals, text)?;
        }
        Ok(())
    })
}

pub fn cmd_simulate(mut cfg: Config, globals: &Globals) -> Result<()> {
    let built = (|| {
        let (lattice, cap) = build_lattice(&mut cfg)?;
        let params = read_params(&mut cfg, &lattice)?;
        let run = read_run(&mut cfg)?;
        Some((lattice, cap, params, run))
    })();
    cfg_finish(
        cfg,
        built,
        &["lattice", "cap", "params", "run"],
        globals,
        |(lattice, _cap, params, mut run), text, globals| {
            let out = require_out(globals)?;
            if globals.with_oracle && params.policy != BoundaryPolicy::Reflect {
                return Err(Error::InvalidConfig(
                    "--with-oracle needs policy = reflect (the Gibbs oracle is an \
                     equilibrium reference)"
                        .into(),
                ));
            }
            if let Some(seed) = globals.seed {
                run.seed = seed;
            }

            let (est, events) = estimate_stationary(&params, &lattice, run.dt, run.seed, &run.plan)?;
            let oracle = if globals.with_oracle {
                Some(gibbs_oracle(
                    &params,
                    &lattice,
                    run.seed ^ 0x6f72_6163_6c65,
                    run.oracle_samples,
                )?)
            } else {
                None
            };

            write_run_record(out, "simulate", globals, text)?;
            for (i, hist) in est.histograms.iter().enumerate() {
                write_file(out, &format!("hist_mode_{i}.csv"), &csvio::write_histogram(hist))?;
            }
            write_file(out, "events.csv", &csvio::write_event_log(&events))?;

            if let Some(n) = run.trace_samples {
                // stride-sampled single-trajectory trace of the first stream
                use snlse_core::dynamics::{run_trajectory, FieldState, Observer, RunSeed, TraceObserver};
                let initial = FieldState::zero(&lattice);
                let mut trace = TraceObserver::default();
                {
                    let mut obs: Vec<&mut dyn Observer> = vec![&mut trace];
                    run_trajectory(
                        &initial,
                        &params,
                        &lattice,
                        run.dt,
                        n * run.plan.stride,
                        RunSeed::with_stream(run.seed, 0),
                        run.plan.stride,
                        &mut obs,
                    )?;
                }
                write_file(out, "trace.csv", &csvio::write_trace(&trace.rows))?;
            }

            let mut summary = String::new();
            let _ = writeln!(summary, "samples: {}", est.samples);
            let _ = writeln!(summary, "burn_in_time: {}", est.burn_in_time);
            let _ = writeln!(summary, "dt: {}", est.dt);
            for i in 0..lattice.len() {
                let _ = writeln!(
                    summary,
                    "mode {i}: mean_sq = {} +- {}, reflects = {}, breaks = {}, absorbed = {}",
                    est.mean_sq[i],
                    est.se_mean_sq[i],
                    events.reflects[i],
                    events.breaks[i],
                    events.absorbed_mass[i]
                );
            }
            if let Some(oracle) = &oracle {
                for (i, o_hist) in oracle.histograms.iter().enumerate() {
                    write_file(
                        out,
                        &format!("oracle_mode_{i}.csv"),
                        &csvio::write_histogram(o_hist),
                    )?;
                    let tv = tv_distance(&est, oracle, i)?;
                    let _ = writeln!(summary, "mode {i}: oracle TV = {tv}");
                    if globals.emit_plot_data {
                        write_file(
                            out,
                            &format!("paired_mode_{i}.csv"),
                            &csvio::write_paired_histogram(&est.histograms[i], o_hist)?,
                        )?;
                    }
                }
            }
            write_file(out, "summary.txt", &summary)?;
            print!("{summary}");
            Ok(())
        },
    )
}

pub fn cmd_meanfield(mut cfg: Config, globals: &Globals) -> Result<()> {
    let built = read_meanfield(&mut cfg);
    cfg_finish(cfg, built, &["meanfield", "cap"], globals, |mf, text, globals| {
        let out = require_out(globals)?;
        let set = solve_self_consistency(&mf)?;
        write_run_record(out, "meanfield", globals, text)?;
        write_file(out, "branches.csv", &csvio::write_branch_set(&set))?;
        let mut summary = String::new();
        let _ = writeln!(summary, "coupling: {}", set.coupling);
        let _ = writeln!(summary, "branches: {}", set.branches.len());
        for b in &set.branches {
            let _ = writeln!(
                summary,
                "x = {}, observable = {}, {}{}",
                b.x,
                b.observable,
                if b.stable { "stable" } else { "unstable" },
                if b.selected { ", selected" } else { "" }
            );
        }
        write_file(out, "summary.txt", &summary)?;
        print!("{summary}");
        Ok(())
    })
}

fn read_scan_grid(cfg: &mut Config) -> Option<Vec<f64>> {
    if let Some(raw) = cfg.optional("scan", "g_list") {
        let mut grid = Vec::new();
        for piece in raw.split(',') {
            match piece.trim().parse::<f64>() {
                Ok(v) => grid.push(v),
                Err(_) => {
                    cfg.error(format!("[scan] g_list: bad value {piece:?}"));
                    return None;
                }
            }
        }
        return Some(grid);
    }
    let lo = cfg.require_f64("scan", "g_min")?;
    let hi = cfg.require_f64("scan", "g_max")?;
    let steps = cfg.require_u64("scan", "g_steps")?;
    if steps < 2 || hi <= lo {
        cfg.error("[scan]: need g_min < g_max and g_steps >= 2");
        return None;
    }
    Some(
        (0..steps)
            .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
            .collect(),
    )
}

pub fn cmd_scan(mut cfg: Config, globals: &Globals) -> Result<()> {
    let built = (|| {
        let mf = read_meanfield(&mut cfg)?;
        let grid = read_scan_grid(&mut cfg)?;
        Some((mf, grid))
    })();
    cfg_finish(
        cfg,
        built,
        &["meanfield", "cap", "scan"],
        globals,
        |(mf, grid), text, globals| {
            let out = require_out(globals)?;
            let scan = transition_scan(&mf, &grid)?;
            write_run_record(out, "scan", globals, text)?;
            write_file(out, "scan.csv", &csvio::write_scan(&scan.rows))?;
            let mut summary = String::new();
            let _ = writeln!(summary, "rows: {}", scan.rows.len());
            match &scan.transition {
                Some(t) => {
                    let _ = writeln!(
                        summary,
                        "transition: g_star = {} (width {}), observable {} -> {}",
                        t.g_star, t.width, t.observable_low, t.observable_high
                    );
                }
                None => {
                    let _ = writeln!(summary, "transition: no transition detected");
                }
            }
            write_file(out, "summary.txt", &summary)?;
            print!("{summary}");
            Ok(())
        },
    )
}

pub fn cmd_infrared(mut cfg: Config, globals: &Globals) -> Result<()> {
    let built = (|| {
        let mf = read_meanfield(&mut cfg)?;
        let x = cfg.require_f64("infrared", "x")?;
        let raw = cfg.require("infrared", "kappa_list")?;
        let mut kappas = Vec::new();
        for piece in raw.split(',') {
            match piece.trim().parse::<f64>() {
                Ok(v) => kappas.push(v),
                Err(_) => {
                    cfg.error(format!("[infrared] kappa_list: bad value {piece:?}"));
                    return None;
                }
            }
        }
        Some((mf, x, kappas))
    })();
    cfg_finish(
        cfg,
        built,
        &["meanfield", "cap", "infrared"],
        globals,
        |(mf, x, kappas), text, globals| {
            let out = require_out(globals)?;
            let report = infrared_probe(&mf, x, &kappas)?;
            write_run_record(out, "infrared", globals, text)?;
            write_file(out, "infrared.csv", &csvio::write_infrared_table(&report.table))?;
            let mut summary = String::new();
            let _ = writeln!(
                summary,
                "verdict: {}",
                match report.verdict {
                    IrVerdict::Convergent => "convergent",
                    IrVerdict::Divergent => "divergent",
                }
            );
            if let Some(fit) = &report.fit {
                let _ = writeln!(
                    summary,
                    "growth fit: model {} slope {} intercept {} r_squared {}",
                    fit.model, fit.fit.slope, fit.fit.intercept, fit.fit.r_squared
                );
            }
            write_file(out, "summary.txt", &summary)?;
            print!("{summary}");
            Ok(())
        },
    )
}

/// Run `body` only when section reading produced a value, but always check
/// the configuration for leftover or invalid keys first so that every
/// offending key is reported.
fn cfg_finish<T>(
    cfg: Config,
    built: Option<T>,
    sections: &[&str],
    globals: &Globals,
    body: impl FnOnce(T, &str, &Globals) -> Result<()>,
) -> Result<()> {
    let text = cfg.raw_text().to_string();
    cfg.finish(sections)?;
    let value = built.expect("section readers succeed when finish() passes");
    body(value, &text, globals)
}
