//! Plain-text table formats shared by the CLI and external tooling, with
//! parsers so every emitted file re-reads into the structure that produced
//! it. Floats are written with the shortest round-trip representation, so
//! a parse-back is bit-exact.

use crate::dynamics::{EventLog, TraceRow};
use crate::error::{Error, Result};
use crate::estat::ModeHistogram;
use crate::lattice::ModeLattice;
use crate::meanfield::{BranchSet, ScanRow};

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("line {line}: bad float {field:?}")))
}

fn parse_u64(field: &str, line: usize) -> Result<u64> {
    field
        .trim()
        .parse::<u64>()
        .map_err(|_| Error::Parse(format!("line {line}: bad integer {field:?}")))
}

fn split_expect(line: &str, n: usize, lineno: usize) -> Result<Vec<&str>> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != n {
        return Err(Error::Parse(format!(
            "line {lineno}: expected {n} fields, found {}",
            fields.len()
        )));
    }
    Ok(fields)
}

// ---------------------------------------------------------------------------
// Lattice description table
// ---------------------------------------------------------------------------

/// One row per mode: n-components, ||k_n||, alpha_n.
pub fn write_lattice_table(lattice: &ModeLattice) -> String {
    let dim = lattice.dimension();
    let mut out = String::new();
    for d in 0..dim {
        out.push_str(&format!("n_{d},"));
    }
    out.push_str("k_norm,alpha\n");
    for i in 0..lattice.len() {
        for &c in lattice.mode(i) {
            out.push_str(&format!("{c},"));
        }
        out.push_str(&format!("{},{}\n", lattice.knorm(i), lattice.cap(i)));
    }
    out
}

/// Parsed lattice rows: (mode components, k_norm, alpha).
pub fn parse_lattice_table(text: &str) -> Result<Vec<(Vec<i64>, f64, f64)>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse("empty lattice table".into()))?;
    let dim = header.split(',').filter(|f| f.starts_with("n_")).count();
    if dim == 0 {
        return Err(Error::Parse("lattice header carries no n_ columns".into()));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_expect(line, dim + 2, lineno + 1)?;
        let comps = fields[..dim]
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<i64>()
                    .map_err(|_| Error::Parse(format!("line {}: bad component {f:?}", lineno + 1)))
            })
            .collect::<Result<Vec<i64>>>()?;
        rows.push((
            comps,
            parse_f64(fields[dim], lineno + 1)?,
            parse_f64(fields[dim + 1], lineno + 1)?,
        ));
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Trajectory trace and event log
// ---------------------------------------------------------------------------

pub fn write_trace(rows: &[TraceRow]) -> String {
    let mut out = String::from("time,mode,re,im,abs\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.time, r.mode, r.re, r.im, r.abs));
    }
    out
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceRow>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f = split_expect(line, 5, lineno + 1)?;
        rows.push(TraceRow {
            time: parse_f64(f[0], lineno + 1)?,
            mode: parse_u64(f[1], lineno + 1)? as usize,
            re: parse_f64(f[2], lineno + 1)?,
            im: parse_f64(f[3], lineno + 1)?,
            abs: parse_f64(f[4], lineno + 1)?,
        });
    }
    Ok(rows)
}

pub fn write_event_log(events: &EventLog) -> String {
    let mut out = String::from("mode,reflect_count,break_count,absorbed_mass\n");
    for i in 0..events.reflects.len() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            i, events.reflects[i], events.breaks[i], events.absorbed_mass[i]
        ));
    }
    out
}

pub fn parse_event_log(text: &str) -> Result<EventLog> {
    let mut reflects = Vec::new();
    let mut breaks = Vec::new();
    let mut absorbed = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f = split_expect(line, 4, lineno + 1)?;
        let mode = parse_u64(f[0], lineno + 1)? as usize;
        if mode != reflects.len() {
            return Err(Error::Parse(format!(
                "line {}: modes out of order (expected {}, got {mode})",
                lineno + 1,
                reflects.len()
            )));
        }
        reflects.push(parse_u64(f[1], lineno + 1)?);
        breaks.push(parse_u64(f[2], lineno + 1)?);
        absorbed.push(parse_f64(f[3], lineno + 1)?);
    }
    Ok(EventLog {
        reflects,
        breaks,
        absorbed_mass: absorbed,
    })
}

// ---------------------------------------------------------------------------
// Histograms
// ---------------------------------------------------------------------------

pub fn write_histogram(hist: &ModeHistogram) -> String {
    let mut out = String::from("bin_left,bin_right,mass\n");
    for (b, &mass) in hist.masses.iter().enumerate() {
        let l = b as f64 * hist.bin_width;
        let r = (b + 1) as f64 * hist.bin_width;
        out.push_str(&format!("{l},{r},{mass}\n"));
    }
    out
}

/// Paired simulation/oracle columns for external plotting.
pub fn write_paired_histogram(sim: &ModeHistogram, oracle: &ModeHistogram) -> Result<String> {
    if sim.masses.len() != oracle.masses.len()
        || (sim.bin_width - oracle.bin_width).abs() > 1e-12 * sim.bin_width
    {
        return Err(Error::BinningMismatch(
            "paired histogram output needs identical binning".into(),
        ));
    }
    let mut out = String::from("bin_left,bin_right,sim_mass,oracle_mass\n");
    for (b, (&s, &o)) in sim.masses.iter().zip(&oracle.masses).enumerate() {
        let l = b as f64 * sim.bin_width;
        let r = (b + 1) as f64 * sim.bin_width;
        out.push_str(&format!("{l},{r},{s},{o}\n"));
    }
    Ok(out)
}

pub fn parse_histogram(text: &str) -> Result<ModeHistogram> {
    let mut masses = Vec::new();
    let mut width = None;
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f = split_expect(line, 3, lineno + 1)?;
        let l = parse_f64(f[0], lineno + 1)?;
        let r = parse_f64(f[1], lineno + 1)?;
        if width.is_none() {
            width = Some(r - l);
        }
        masses.push(parse_f64(f[2], lineno + 1)?);
    }
    Ok(ModeHistogram {
        bin_width: width.ok_or_else(|| Error::Parse("empty histogram".into()))?,
        masses,
    })
}

// ---------------------------------------------------------------------------
// Branch sets and coupling scans
// ---------------------------------------------------------------------------

const BRANCH_HEADER: &str = "g,x,observable,stability,free_energy,selected\n";

fn push_branch_rows(out: &mut String, set: &BranchSet) {
    for b in &set.branches {
        let free = b.free_energy.map_or(String::new(), |f| f.to_string());
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            set.coupling,
            b.x,
            b.observable,
            if b.stable { "stable" } else { "unstable" },
            free,
            if b.selected { 1 } else { 0 }
        ));
    }
}

pub fn write_branch_set(set: &BranchSet) -> String {
    let mut out = String::from(BRANCH_HEADER);
    push_branch_rows(&mut out, set);
    out
}

pub fn write_scan(rows: &[ScanRow]) -> String {
    let mut out = String::from(BRANCH_HEADER);
    for row in rows {
        push_branch_rows(&mut out, &row.branches);
    }
    out
}

/// Parsed branch rows: (g, x, observable, stable, free_energy, selected).
pub type BranchRow = (f64, f64, f64, bool, Option<f64>, bool);

pub fn parse_branch_rows(text: &str) -> Result<Vec<BranchRow>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f = split_expect(line, 6, lineno + 1)?;
        let stable = match f[3].trim() {
            "stable" => true,
            "unstable" => false,
            other => {
                return Err(Error::Parse(format!(
                    "line {}: bad stability tag {other:?}",
                    lineno + 1
                )))
            }
        };
        let free = if f[4].trim().is_empty() {
            None
        } else {
            Some(parse_f64(f[4], lineno + 1)?)
        };
        rows.push((
            parse_f64(f[0], lineno + 1)?,
            parse_f64(f[1], lineno + 1)?,
            parse_f64(f[2], lineno + 1)?,
            stable,
            free,
            parse_u64(f[5], lineno + 1)? != 0,
        ));
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Infrared probe table
// ---------------------------------------------------------------------------

pub fn write_infrared_table(table: &[(f64, f64)]) -> String {
    let mut out = String::from("kappa,f_value\n");
    for &(k, v) in table {
        out.push_str(&format!("{k},{v}\n"));
    }
    out
}

pub fn parse_infrared_table(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f = split_expect(line, 2, lineno + 1)?;
        rows.push((parse_f64(f[0], lineno + 1)?, parse_f64(f[1], lineno + 1)?));
    }
    Ok(rows)
}
