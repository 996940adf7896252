//! Experiment protocols around the degenerate limit: the eps-continuation
//! ladder, delta-lifted initial data, positivity-set flux statistics, the
//! space-time Hoelder quotient, and the weak-form residual diagnostic.

use crate::error::{Error, Result};
use crate::mobility::MobilityModel;
use crate::spectral::{apply_i, dx, dxx, BasisTable, CosineField};
use crate::stepper::{self, RunConfig, Trajectory};

/// Summary of one ladder run.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub parameter: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub final_field: CosineField,
    pub monitors_ok: bool,
    pub aborted: bool,
}

/// Ladder outcome: per-run summaries plus Cauchy distances between
/// consecutive runs sampled at shared checkpoint times.
#[derive(Debug)]
pub struct ContinuationReport {
    pub parameter_ladder: Vec<f64>,
    pub per_run: Vec<RunSummary>,
    pub cauchy_l2: Vec<f64>,
    pub cauchy_uniform: Vec<f64>,
    pub holder_quotient: f64,
    pub partial: bool,
    pub trajectories: Vec<Trajectory>,
}

fn validate_ladder(ladder: &[f64]) -> Result<()> {
    if ladder.is_empty() {
        return Err(Error::InvalidLadder);
    }
    for w in ladder.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::InvalidLadder);
        }
    }
    if ladder.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidLadder);
    }
    Ok(())
}

fn l2_distance(a: &CosineField, b: &CosineField) -> f64 {
    a.coeffs()
        .iter()
        .zip(b.coeffs())
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

fn uniform_distance(a: &CosineField, b: &CosineField) -> f64 {
    let va = a.samples();
    let vb = b.samples();
    va.iter()
        .zip(&vb)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max)
}

fn summarize(parameter: f64, traj: &Trajectory) -> RunSummary {
    let mut min_u = f64::INFINITY;
    let mut max_u = f64::NEG_INFINITY;
    for s in &traj.states {
        let (lo, hi) = s.min_max();
        min_u = min_u.min(lo);
        max_u = max_u.max(hi);
    }
    RunSummary {
        parameter,
        min_u,
        max_u,
        final_field: traj.final_state().clone(),
        monitors_ok: traj.monitors_all_ok(),
        aborted: traj.aborted.is_some(),
    }
}

fn report_from_runs(
    ladder: Vec<f64>,
    trajectories: Vec<Trajectory>,
) -> ContinuationReport {
    let per_run: Vec<RunSummary> = ladder
        .iter()
        .zip(&trajectories)
        .map(|(p, t)| summarize(*p, t))
        .collect();
    // checkpoint times: the first (coarsest) run's accepted step times,
    // other runs sampled by previous-step hold
    let checkpoints: Vec<f64> = trajectories[0].times.clone();
    let mut cauchy_l2 = Vec::new();
    let mut cauchy_uniform = Vec::new();
    for pair in trajectories.windows(2) {
        let mut sup_l2: f64 = 0.0;
        let mut sup_inf: f64 = 0.0;
        for &t in &checkpoints {
            let a = pair[0].state_at(t);
            let b = pair[1].state_at(t);
            sup_l2 = sup_l2.max(l2_distance(a, b));
            sup_inf = sup_inf.max(uniform_distance(a, b));
        }
        cauchy_l2.push(sup_l2);
        cauchy_uniform.push(sup_inf);
    }
    let holder_quotient = trajectories
        .last()
        .map(holder_diagnostic)
        .unwrap_or(0.0);
    let partial = per_run.iter().any(|r| r.aborted);
    ContinuationReport {
        parameter_ladder: ladder,
        per_run,
        cauchy_l2,
        cauchy_uniform,
        holder_quotient,
        partial,
        trajectories,
    }
}

/// Run the stepper once per regularization parameter on identical time
/// grids and compare consecutive solutions.
pub fn eps_sweep(config: &RunConfig, eps_ladder: &[f64]) -> Result<ContinuationReport> {
    validate_ladder(eps_ladder)?;
    let mut trajectories = Vec::with_capacity(eps_ladder.len());
    for &eps in eps_ladder {
        let mut c = config.clone();
        c.eps = eps;
        trajectories.push(stepper::run(&c)?);
    }
    Ok(report_from_runs(eps_ladder.to_vec(), trajectories))
}

/// Run the stepper on `u_0 + delta` for each delta in the ladder.
///
/// Requires non-negative base data; the mass of each run exceeds the base
/// mass by exactly delta.
pub fn delta_lift(config: &RunConfig, delta_ladder: &[f64]) -> Result<ContinuationReport> {
    validate_ladder(delta_ladder)?;
    let base_field = config.initial.realize(config.grid)?;
    let (lo, hi) = base_field.min_max();
    // allow small negative excursions from spectral projection ringing
    if lo < -1e-2 * hi.abs().max(1.0) {
        return Err(Error::InvalidInitial(format!(
            "delta lift requires u_0 >= 0, got min {lo}"
        )));
    }
    let mut trajectories = Vec::with_capacity(delta_ladder.len());
    for &delta in delta_ladder {
        let mut c = config.clone();
        c.initial = config.initial.lifted(delta);
        trajectories.push(stepper::run(&c)?);
    }
    Ok(report_from_runs(delta_ladder.to_vec(), trajectories))
}

/// L^2(Q) flux statistics split by the positivity threshold.
#[derive(Clone, Copy, Debug)]
pub struct FluxStats {
    pub threshold: f64,
    /// L^2 norm of the flux over grid-time points with `u <= threshold`.
    pub low_l2: f64,
    /// L^2 norm over points with `u > 2 threshold`.
    pub high_l2: f64,
    pub low_fraction: f64,
}

/// Partition the space-time grid by `u <= eta` vs `u > 2 eta` and report
/// the flux L^2 mass on each part.
pub fn positivity_set_flux(traj: &Trajectory, threshold: f64) -> Result<FluxStats> {
    if !(threshold > 0.0) {
        return Err(Error::Config(format!(
            "threshold must be > 0, got {threshold}"
        )));
    }
    let q = traj.grid.n_quad() as f64;
    let mut low = 0.0;
    let mut high = 0.0;
    let mut low_count = 0usize;
    let mut total = 0usize;
    for (i, report) in traj.reports.iter().enumerate() {
        let tau = report.tau_used;
        let state = &traj.states[i]; // Rothe interpolant value on the interval
        let u = state.samples();
        let fx = stepper::flux(state, &traj.model);
        for (uj, fj) in u.iter().zip(&fx) {
            let cell = tau * fj * fj / q;
            total += 1;
            if *uj <= threshold {
                low += cell;
                low_count += 1;
            } else if *uj > 2.0 * threshold {
                high += cell;
            }
        }
    }
    Ok(FluxStats {
        threshold,
        low_l2: low.sqrt(),
        high_l2: high.sqrt(),
        low_fraction: if total > 0 {
            low_count as f64 / total as f64
        } else {
            0.0
        },
    })
}

/// Discrete C^{1/2,1/8} modulus: the maximum over sampled space-time pairs
/// of `|du| / (|dx|^{1/2} + |dt|^{1/8})`.
pub fn holder_diagnostic(traj: &Trajectory) -> f64 {
    // cap the sample cloud to keep the pair loop at desk scale
    let max_times = 16;
    let max_points = 32;
    let t_stride = (traj.states.len() / max_times).max(1);
    let x_stride = (traj.grid.n_quad() / max_points).max(1);

    let mut cloud: Vec<(f64, f64, f64)> = Vec::new();
    for (i, state) in traj.states.iter().enumerate().step_by(t_stride) {
        let t = traj.times[i];
        let samples = state.samples();
        for j in (0..traj.grid.n_quad()).step_by(x_stride) {
            cloud.push((t, traj.grid.node(j), samples[j]));
        }
    }
    let mut quotient: f64 = 0.0;
    for (i, &(t1, x1, u1)) in cloud.iter().enumerate() {
        for &(t2, x2, u2) in cloud.iter().skip(i + 1) {
            let denom = (x1 - x2).abs().sqrt() + (t1 - t2).abs().powf(0.125);
            if denom < 1e-12 {
                continue;
            }
            quotient = quotient.max((u1 - u2).abs() / denom);
        }
    }
    quotient
}

/// Space-time residual of the twice-integrated weak form against the test
/// function `phi(t, x) = (1 - t/T)^2 phi_mode(x)` (which has `phi_x = 0`
/// at the endpoints). Decays first-order in tau on consistent runs.
pub fn weak_residual(traj: &Trajectory, mode: usize) -> f64 {
    let t_end = traj.final_time();
    let theta = |t: f64| {
        let s = 1.0 - t / t_end;
        s * s
    };
    // exact antiderivative of theta for the interval averages
    let theta_int = |t: f64| {
        let s = 1.0 - t / t_end;
        -t_end * s * s * s / 3.0
    };

    let grid = traj.grid;
    let table = BasisTable::new(grid);
    let q = grid.n_quad() as f64;
    let phi = table.cos_row(mode).to_vec();
    let phi_xx: Vec<f64> = phi
        .iter()
        .map(|p| -crate::spectral::eigenvalue(mode) * p)
        .collect();
    let phi_x: Vec<f64> = (0..grid.n_quad())
        .map(|j| {
            -(mode as f64 * std::f64::consts::PI)
                * crate::spectral::sine_basis_fn(mode, grid.node(j))
        })
        .collect();

    let mut residual = 0.0;
    // initial-data term: int u_0 phi(0, x) dx = c_mode(u_0) * theta(0)
    residual += traj.states[0].coeffs()[mode] * theta(0.0);

    for i in 0..traj.reports.len() {
        let t0 = traj.times[i];
        let t1 = traj.times[i + 1];
        let state = &traj.states[i];

        // iint u phi_t: u is the held state, theta difference is exact
        residual += state.coeffs()[mode] * (theta(t1) - theta(t0));

        // spatial terms, weighted by the exact integral of theta
        let u = state.samples();
        let w_field = {
            let uxx = dxx(state);
            let iu = apply_i(state);
            let a = table.field_samples(&uxx);
            let b = table.field_samples(&iu);
            a.iter().zip(&b).map(|(p, r)| p - r).collect::<Vec<f64>>()
        };
        let ux = table.sine_samples(&dx(state));
        let mut spatial = 0.0;
        for j in 0..grid.n_quad() {
            let f = traj.model.f_eps(u[j]);
            let fp = traj.model.f_eps_prime(u[j]);
            spatial += -f * w_field[j] * phi_xx[j] - fp * ux[j] * w_field[j] * phi_x[j];
        }
        spatial /= q;
        residual += spatial * (theta_int(t1) - theta_int(t0));
    }
    residual.abs()
}

/// Low-set flux rate check: `low_l2(eta) <= factor * C * f(eta)^{1/2}` with
/// C calibrated at the coarsest threshold.
pub fn low_set_rate_ok(stats: &[FluxStats], model: &MobilityModel, factor: f64) -> bool {
    if stats.len() < 2 {
        return true;
    }
    let norm = |s: &FluxStats| s.low_l2 / s.threshold.powf(model.n() / 2.0);
    let reference = norm(&stats[0]).max(1e-300);
    stats.iter().all(|s| norm(s) <= factor * reference)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::InitialCondition;
    use crate::spectral::GridSpec;
    use crate::stepper::{CapPolicy, PicardSettings};

    fn config(initial: InitialCondition, t_end: f64) -> RunConfig {
        RunConfig {
            grid: GridSpec::new(32).unwrap(),
            n: 3.0,
            eps: 1e-3,
            cap: CapPolicy::Auto,
            anchor: 1.0,
            tau0: Some(1e-2),
            t_end,
            picard: PicardSettings::default(),
            estim_slack: 1e-6,
            monitor_slack: 5e-2,
            adaptive: true,
            tau_floor: None,
            initial,
            out_csv: None,
            out_snapshot: None,
        }
    }

    #[test]
    fn ladder_validation() {
        let c = config(InitialCondition::Constant { level: 1.0 }, 0.05);
        assert!(eps_sweep(&c, &[]).is_err());
        assert!(eps_sweep(&c, &[1e-2, 1e-1]).is_err());
        assert!(eps_sweep(&c, &[1e-1, 1e-1]).is_err());
        assert!(eps_sweep(&c, &[1e-1, -1.0]).is_err());
    }

    #[test]
    fn constant_data_gives_zero_distances() {
        let c = config(InitialCondition::Constant { level: 1.0 }, 0.05);
        let report = eps_sweep(&c, &[1e-1, 1e-2, 1e-3]).unwrap();
        assert!(!report.partial);
        for d in &report.cauchy_l2 {
            assert!(*d < 1e-14);
        }
        for d in &report.cauchy_uniform {
            assert!(*d < 1e-13);
        }
        assert!(report.holder_quotient < 1e-10);
    }

    #[test]
    fn delta_lift_flat_run_and_mass_offset() {
        let c = config(InitialCondition::Constant { level: 0.0 }, 0.05);
        // constant level 0 is allowed as base data; the lift makes it positive
        let report = delta_lift(&c, &[0.1]).unwrap();
        let traj = &report.trajectories[0];
        for s in &traj.states {
            assert!((s.eval(0.4) - 0.1).abs() < 1e-12);
        }
        assert_eq!(traj.initial().mass(), 0.1);
    }

    #[test]
    fn delta_lift_mass_offset_every_checkpoint() {
        let base = InitialCondition::Bump {
            center: 0.5,
            width: 0.2,
            height: 0.5,
        };
        let c = config(base, 0.02);
        let report = delta_lift(&c, &[0.25, 0.125]).unwrap();
        let base_mass = c.initial.realize(c.grid).unwrap().mass();
        for (run, &delta) in report.trajectories.iter().zip(&report.parameter_ladder) {
            for s in &run.states {
                assert!((s.mass() - base_mass - delta).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn delta_lift_entropy_blowup_rate() {
        // compact bump with 2 < n: entropy of the lift diverges as delta -> 0
        let grid = GridSpec::new(64).unwrap();
        let base = InitialCondition::Bump {
            center: 0.5,
            width: 0.2,
            height: 1.0,
        };
        let model = MobilityModel::new(2.5, 0.0, 100.0, 1.0).unwrap();
        let mut prev = 0.0;
        for &delta in &[1e-1, 1e-2, 1e-3] {
            let f = base.lifted(delta).realize(grid).unwrap();
            // clip tiny projection ringing so the G-quadrature stays defined
            let vals: Vec<f64> = f.samples().iter().map(|v| v.max(delta * 0.5)).collect();
            let ent: f64 = vals
                .iter()
                .map(|&v| model.entropy_g(v).unwrap())
                .sum::<f64>()
                / vals.len() as f64;
            assert!(ent.is_finite());
            assert!(ent > prev, "entropy must grow as delta shrinks");
            prev = ent;
        }
    }

    #[test]
    fn positivity_split_on_strictly_positive_run() {
        let c = config(InitialCondition::Constant { level: 1.0 }, 0.05);
        let traj = stepper::run(&c).unwrap();
        let stats = positivity_set_flux(&traj, 0.1).unwrap();
        assert_eq!(stats.low_l2, 0.0);
        assert_eq!(stats.low_fraction, 0.0);
    }

    #[test]
    fn low_set_norm_monotone_in_threshold() {
        let c = config(
            InitialCondition::Bump {
                center: 0.5,
                width: 0.25,
                height: 1.0,
            },
            0.01,
        );
        let traj = stepper::run(&c).unwrap();
        let a = positivity_set_flux(&traj, 1e-1).unwrap();
        let b = positivity_set_flux(&traj, 1e-2).unwrap();
        let d = positivity_set_flux(&traj, 1e-3).unwrap();
        assert!(b.low_l2 <= a.low_l2 + 1e-15);
        assert!(d.low_l2 <= b.low_l2 + 1e-15);
    }

    #[test]
    fn holder_quotient_zero_on_constant() {
        let c = config(InitialCondition::Constant { level: 2.0 }, 0.05);
        let traj = stepper::run(&c).unwrap();
        assert!(holder_diagnostic(&traj) < 1e-10);
    }

    #[test]
    fn weak_residual_vanishes_on_constant_run() {
        let c = config(InitialCondition::Constant { level: 1.0 }, 0.05);
        let traj = stepper::run(&c).unwrap();
        for mode in 1..=3 {
            assert!(weak_residual(&traj, mode) < 1e-12);
        }
    }
}
