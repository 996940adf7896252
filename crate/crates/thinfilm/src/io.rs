//! Plain-text output: per-step trajectory CSV, restartable snapshots, and
//! ladder reports. All floats are written with `Display`, which for f64
//! produces the shortest string that parses back to the same bits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::continuation::ContinuationReport;
use crate::error::{Error, Result};
use crate::spectral::{CosineField, GridSpec};
use crate::stepper::Trajectory;

pub const CSV_MAGIC: &str = "# thinfilm trajectory 1";
pub const SNAPSHOT_MAGIC: &str = "thinfilm-snapshot 1";

const CSV_HEADER: &str = "t,mass,energy,entropy_G,entropy_Geps,H_eps,dissipation_cum,\
min_u,max_u,tau,picard_iters,monitors_ok";

/// Render a trajectory as CSV, one row per accepted state (including the
/// initial one).
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::new();
    out.push_str(CSV_MAGIC);
    out.push('\n');
    out.push_str(CSV_HEADER);
    out.push('\n');
    let mut cum_diss = 0.0;
    for (i, state) in traj.states.iter().enumerate() {
        let (tau, iters, ok, snap) = if i == 0 {
            let snap = crate::functionals::DiagnosticSnapshot::measure(
                traj.times[0],
                state,
                &traj.model,
                0.0,
            );
            (0.0, 0u32, true, snap)
        } else {
            let r = &traj.reports[i - 1];
            cum_diss += r.snapshot.dissipation_increment;
            (r.tau_used, r.picard_iters, r.monitors_ok(), r.snapshot.clone())
        };
        let entropy_g = snap
            .entropy_g
            .map(|v| v.to_string())
            .unwrap_or_else(|| "nan".to_string());
        let (min_u, max_u) = state.min_max();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            traj.times[i],
            snap.mass,
            snap.energy,
            entropy_g,
            snap.entropy_geps,
            snap.h_eps,
            cum_diss,
            min_u,
            max_u,
            tau,
            iters,
            ok as u8,
        )
        .expect("writing to String cannot fail");
    }
    out
}

pub fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    fs::write(path, trajectory_csv(traj))?;
    Ok(())
}

/// One parsed CSV row.
#[derive(Clone, Debug)]
pub struct CsvRow {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub entropy_g: f64,
    pub entropy_geps: f64,
    pub h_eps: f64,
    pub dissipation_cum: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub tau: f64,
    pub picard_iters: u32,
    pub monitors_ok: bool,
}

pub fn parse_trajectory_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_MAGIC) {
        return Err(Error::Snapshot("missing trajectory CSV magic line".into()));
    }
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Snapshot("unexpected trajectory CSV header".into()));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(Error::Snapshot(format!(
                "row {} has {} fields, expected 12",
                lineno + 3,
                fields.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .map_err(|e| Error::Snapshot(format!("row {}: {e}", lineno + 3)))
        };
        rows.push(CsvRow {
            t: num(0)?,
            mass: num(1)?,
            energy: num(2)?,
            entropy_g: num(3)?,
            entropy_geps: num(4)?,
            h_eps: num(5)?,
            dissipation_cum: num(6)?,
            min_u: num(7)?,
            max_u: num(8)?,
            tau: num(9)?,
            picard_iters: fields[10]
                .parse()
                .map_err(|e| Error::Snapshot(format!("row {}: {e}", lineno + 3)))?,
            monitors_ok: fields[11] == "1",
        });
    }
    Ok(rows)
}

/// Restartable state: grid shape, model parameters, time, coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub n_modes: usize,
    pub n_quad: usize,
    pub n: f64,
    pub eps: f64,
    pub cap_m: f64,
    pub anchor: f64,
    pub t: f64,
    pub coeffs: Vec<f64>,
}

impl Snapshot {
    pub fn of(traj: &Trajectory) -> Snapshot {
        Snapshot {
            n_modes: traj.grid.n_modes(),
            n_quad: traj.grid.n_quad(),
            n: traj.model.n(),
            eps: traj.model.eps(),
            cap_m: traj.model.cap_m(),
            anchor: traj.model.anchor(),
            t: traj.final_time(),
            coeffs: traj.final_state().coeffs().to_vec(),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(SNAPSHOT_MAGIC);
        out.push('\n');
        writeln!(out, "n_modes {}", self.n_modes).unwrap();
        writeln!(out, "n_quad {}", self.n_quad).unwrap();
        writeln!(out, "n {}", self.n).unwrap();
        writeln!(out, "eps {}", self.eps).unwrap();
        writeln!(out, "cap_m {}", self.cap_m).unwrap();
        writeln!(out, "anchor {}", self.anchor).unwrap();
        writeln!(out, "t {}", self.t).unwrap();
        for c in &self.coeffs {
            writeln!(out, "{c}").unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Snapshot> {
        let mut lines = text.lines();
        if lines.next() != Some(SNAPSHOT_MAGIC) {
            return Err(Error::Snapshot("missing snapshot magic line".into()));
        }
        let mut keyed = |key: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Snapshot(format!("missing field {key}")))?;
            let (k, v) = line
                .split_once(' ')
                .ok_or_else(|| Error::Snapshot(format!("malformed field line {line:?}")))?;
            if k != key {
                return Err(Error::Snapshot(format!("expected field {key}, got {k}")));
            }
            Ok(v.to_string())
        };
        let n_modes: usize = keyed("n_modes")?
            .parse()
            .map_err(|e| Error::Snapshot(format!("n_modes: {e}")))?;
        let n_quad: usize = keyed("n_quad")?
            .parse()
            .map_err(|e| Error::Snapshot(format!("n_quad: {e}")))?;
        let parse_f = |s: String, key: &str| -> Result<f64> {
            s.parse()
                .map_err(|e| Error::Snapshot(format!("{key}: {e}")))
        };
        let n = parse_f(keyed("n")?, "n")?;
        let eps = parse_f(keyed("eps")?, "eps")?;
        let cap_m = parse_f(keyed("cap_m")?, "cap_m")?;
        let anchor = parse_f(keyed("anchor")?, "anchor")?;
        let t = parse_f(keyed("t")?, "t")?;
        let mut coeffs = Vec::with_capacity(n_modes + 1);
        for line in lines {
            if line.is_empty() {
                continue;
            }
            coeffs.push(
                line.parse::<f64>()
                    .map_err(|e| Error::Snapshot(format!("coefficient: {e}")))?,
            );
        }
        if coeffs.len() != n_modes + 1 {
            return Err(Error::Snapshot(format!(
                "expected {} coefficients, got {}",
                n_modes + 1,
                coeffs.len()
            )));
        }
        Ok(Snapshot {
            n_modes,
            n_quad,
            n,
            eps,
            cap_m,
            anchor,
            t,
            coeffs,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Snapshot> {
        Snapshot::parse(&fs::read_to_string(path)?)
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::with_quad(self.n_modes, self.n_quad)
    }

    pub fn field(&self) -> Result<CosineField> {
        CosineField::from_coeffs(self.coeffs.clone(), self.grid()?)
    }
}

/// Render a continuation ladder report as a small human-readable table.
pub fn sweep_report(report: &ContinuationReport, parameter_name: &str) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{parameter_name:>12} {:>12} {:>12} {:>12} {:>12} {:>8}",
        "min_u", "max_u", "cauchy_l2", "cauchy_sup", "status"
    )
    .unwrap();
    for (i, run) in report.per_run.iter().enumerate() {
        let (dl2, dsup) = if i == 0 {
            ("-".to_string(), "-".to_string())
        } else {
            (
                format!("{:.3e}", report.cauchy_l2[i - 1]),
                format!("{:.3e}", report.cauchy_uniform[i - 1]),
            )
        };
        let status = if run.aborted {
            "aborted"
        } else if run.monitors_ok {
            "ok"
        } else {
            "monitor"
        };
        writeln!(
            out,
            "{:>12.3e} {:>12.4e} {:>12.4e} {dl2:>12} {dsup:>12} {status:>8}",
            run.parameter, run.min_u, run.max_u
        )
        .unwrap();
    }
    writeln!(out, "holder quotient: {:.6e}", report.holder_quotient).unwrap();
    out
}
