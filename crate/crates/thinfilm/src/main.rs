//! Command-line front end: run the solver, continuation sweeps, lifted-data
//! ladders, the built-in verification battery, and snapshot restarts.
//!
//! Exit codes: 0 on success, 1 on usage/configuration errors, 2 when a run
//! finishes but an a-priori monitor failed, 3 when a run aborts (time-step
//! underflow).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thinfilm::config::{parse_config, InitialCondition};
use thinfilm::continuation::{self, ContinuationReport};
use thinfilm::error::Result;
use thinfilm::functionals::{self, Seminorms};
use thinfilm::io::{self, Snapshot};
use thinfilm::mobility::MobilityModel;
use thinfilm::spectral::{self, apply_i, CosineField, GridSpec};
use thinfilm::stepper::{self, RunConfig, Trajectory};

#[derive(Parser)]
#[command(name = "thinfilm", version, about = "thin-film equation with nonlocal repulsion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOverrides {
    /// Mobility regularization parameter (overrides the config file)
    #[arg(long)]
    eps: Option<f64>,
    /// Initial time step (overrides the config file)
    #[arg(long)]
    tau0: Option<f64>,
    /// Final time (overrides the config file)
    #[arg(long = "t-end")]
    t_end: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory from a config file
    Solve {
        config: PathBuf,
        #[command(flatten)]
        overrides: CommonOverrides,
        /// Trajectory CSV destination (overrides [output].csv)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Final-state snapshot destination (overrides [output].snapshot)
        #[arg(long = "out-snapshot")]
        out_snapshot: Option<PathBuf>,
    },
    /// Run the regularization ladder eps_1 > eps_2 > ... and report Cauchy distances
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        overrides: CommonOverrides,
        /// Comma-separated decreasing ladder, e.g. 1e-1,1e-2,1e-3
        #[arg(long = "eps-ladder", default_value = "1e-1,1e-2,1e-3,1e-4")]
        eps_ladder: String,
        /// Report destination (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the lifted-data ladder u_0 + delta_1, u_0 + delta_2, ...
    Lift {
        config: PathBuf,
        #[command(flatten)]
        overrides: CommonOverrides,
        /// Comma-separated decreasing ladder of lifts
        #[arg(long = "delta-ladder", default_value = "1e-1,1e-2,1e-3")]
        delta_ladder: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in identity and inequality battery
    Verify {
        /// Number of random fields per check
        #[arg(long, default_value_t = 200)]
        fields: usize,
        /// RNG seed
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Continue a run from a snapshot file
    Extend {
        snapshot: PathBuf,
        /// Additional simulated time
        #[arg(long = "t-end", default_value_t = 1.0)]
        t_end: f64,
        #[arg(long)]
        tau0: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "out-snapshot")]
        out_snapshot: Option<PathBuf>,
    },
}

fn apply_overrides(config: &mut RunConfig, overrides: &CommonOverrides) {
    if let Some(eps) = overrides.eps {
        config.eps = eps;
    }
    if let Some(tau0) = overrides.tau0 {
        config.tau0 = Some(tau0);
    }
    if let Some(t_end) = overrides.t_end {
        config.t_end = t_end;
    }
}

fn parse_ladder(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| thinfilm::Error::Config(format!("ladder entry {s:?}: {e}")))
        })
        .collect()
}

/// 0 = clean, 2 = monitor violation, 3 = aborted.
fn trajectory_exit(traj: &Trajectory) -> u8 {
    if let Some(reason) = &traj.aborted {
        eprintln!("run aborted: {reason}");
        return 3;
    }
    if !traj.monitors_all_ok() {
        eprintln!("run finished with monitor violations (see CSV monitors_ok column)");
        return 2;
    }
    0
}

fn write_outputs(
    traj: &Trajectory,
    csv: Option<&PathBuf>,
    snapshot: Option<&PathBuf>,
) -> Result<()> {
    if let Some(path) = csv {
        io::write_trajectory_csv(traj, path)?;
        println!("trajectory CSV: {}", path.display());
    }
    if let Some(path) = snapshot {
        Snapshot::of(traj).write(path)?;
        println!("snapshot: {}", path.display());
    }
    Ok(())
}

fn print_run_summary(traj: &Trajectory) {
    let last = traj.final_state();
    let (lo, hi) = last.min_max();
    println!(
        "t = {:.6}, steps = {}, mass = {:.12}, energy = {:.6e}, range = [{:.4e}, {:.4e}]",
        traj.final_time(),
        traj.reports.len(),
        last.mass(),
        functionals::energy(last),
        lo,
        hi
    );
}

fn cmd_solve(
    config_path: &PathBuf,
    overrides: &CommonOverrides,
    out: Option<PathBuf>,
    out_snapshot: Option<PathBuf>,
) -> Result<u8> {
    let mut config = parse_config(config_path)?;
    apply_overrides(&mut config, overrides);
    let traj = stepper::run(&config)?;
    print_run_summary(&traj);
    let csv = out.or(config.out_csv.clone());
    let snap = out_snapshot.or(config.out_snapshot.clone());
    write_outputs(&traj, csv.as_ref(), snap.as_ref())?;
    Ok(trajectory_exit(&traj))
}

fn report_exit(report: &ContinuationReport) -> u8 {
    if report.per_run.iter().any(|r| r.aborted) {
        3
    } else if report.per_run.iter().any(|r| !r.monitors_ok) {
        2
    } else {
        0
    }
}

fn cmd_ladder(
    config_path: &PathBuf,
    overrides: &CommonOverrides,
    ladder_text: &str,
    out: Option<PathBuf>,
    lift: bool,
) -> Result<u8> {
    let mut config = parse_config(config_path)?;
    apply_overrides(&mut config, overrides);
    let ladder = parse_ladder(ladder_text)?;
    let (report, name) = if lift {
        (continuation::delta_lift(&config, &ladder)?, "delta")
    } else {
        (continuation::eps_sweep(&config, &ladder)?, "eps")
    };
    let table = io::sweep_report(&report, name);
    match out {
        Some(path) => {
            std::fs::write(&path, &table)?;
            println!("report: {}", path.display());
        }
        None => print!("{table}"),
    }
    Ok(report_exit(&report))
}

fn cmd_extend(
    snapshot_path: &PathBuf,
    t_end: f64,
    tau0: Option<f64>,
    out: Option<PathBuf>,
    out_snapshot: Option<PathBuf>,
) -> Result<u8> {
    let snap = Snapshot::read(snapshot_path)?;
    let config = RunConfig {
        grid: snap.grid()?,
        n: snap.n,
        eps: snap.eps,
        cap: stepper::CapPolicy::Fixed(snap.cap_m),
        anchor: snap.anchor,
        tau0,
        t_end,
        picard: Default::default(),
        estim_slack: 1e-6,
        monitor_slack: 5e-2,
        adaptive: true,
        tau_floor: None,
        initial: InitialCondition::Coefficients(snap.coeffs.clone()),
        out_csv: None,
        out_snapshot: None,
    };
    let mut traj = stepper::run(&config)?;
    // report absolute times so the extension glues onto the original run
    for t in &mut traj.times {
        *t += snap.t;
    }
    print_run_summary(&traj);
    write_outputs(&traj, out.as_ref(), out_snapshot.as_ref())?;
    Ok(trajectory_exit(&traj))
}

struct Battery {
    failures: u32,
}

impl Battery {
    fn check(&mut self, name: &str, ok: bool, detail: String) {
        if ok {
            println!("PASS  {name}  ({detail})");
        } else {
            self.failures += 1;
            println!("FAIL  {name}  ({detail})");
        }
    }
}

fn random_field(grid: GridSpec, rng: &mut impl Rng) -> CosineField {
    let coeffs: Vec<f64> = (0..=grid.n_modes())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    CosineField::from_coeffs(coeffs, grid).expect("length matches grid")
}

fn cmd_verify(fields: usize, seed: u64) -> Result<u8> {
    let grid = GridSpec::new(64)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut battery = Battery { failures: 0 };

    let mut involution_err: f64 = 0.0;
    let mut energy_identity_err: f64 = 0.0;
    let mut nash_bad = 0usize;
    let mut h1_bad = 0usize;
    let mut interp_bad = 0usize;
    for _ in 0..fields {
        let u = random_field(grid, &mut rng);
        let twice = apply_i(&apply_i(&u));
        let lap = spectral::dxx(&u);
        let err = twice
            .coeffs()
            .iter()
            .zip(lap.coeffs())
            .enumerate()
            .map(|(k, (a, b))| (a + b).abs() / spectral::eigenvalue(k).max(1.0))
            .fold(0.0, f64::max);
        involution_err = involution_err.max(err);

        let s = Seminorms::of(&u);
        let via_quad = {
            let ux = spectral::dx(&u);
            let q = grid.n_quad() as f64;
            let table_free: f64 = (0..grid.n_quad())
                .map(|j| {
                    let x = grid.node(j);
                    let v = ux
                        .coeffs()
                        .iter()
                        .enumerate()
                        .map(|(i, c)| c * spectral::sine_basis_fn(i + 1, x))
                        .sum::<f64>();
                    v * v
                })
                .sum::<f64>()
                / q;
            table_free
        };
        energy_identity_err =
            energy_identity_err.max((via_quad - s.one).abs() / s.one.max(1.0));

        if !functionals::check_nash(&u).holds {
            nash_bad += 1;
        }
        if !functionals::check_h1_bound(&u, 8.0, 2.0 * functionals::nash_constant()).holds {
            h1_bad += 1;
        }
        if !functionals::check_interpolation(&u).holds {
            interp_bad += 1;
        }
    }
    battery.check(
        "involution I(I(u)) = -u_xx",
        involution_err < 1e-12,
        format!("max err {involution_err:.3e}"),
    );
    battery.check(
        "H^1 semi-norm vs quadrature",
        energy_identity_err < 1e-10,
        format!("max err {energy_identity_err:.3e}"),
    );
    battery.check("Nash-type bound", nash_bad == 0, format!("{nash_bad} violations"));
    battery.check(
        "entropy/energy pairing bound",
        h1_bad == 0,
        format!("{h1_bad} violations"),
    );
    battery.check(
        "H^{3/2} interpolation",
        interp_bad == 0,
        format!("{interp_bad} violations"),
    );

    // constant-mobility frequency response of one implicit step
    let tau = 0.1;
    let u = CosineField::mode(1, 1.0, grid)?;
    let model = MobilityModel::new(3.0, 1.0, 1.0 + 1e-9, 1.0 + 1e-10)?;
    let table = spectral::BasisTable::new(grid);
    let outcome = stepper::solve_step(&u, tau, &model, &Default::default(), &table)?;
    let got = outcome.field.coeffs()[1];
    let pi = std::f64::consts::PI;
    let want = (1.0 + tau * pi.powi(3)) / (1.0 + tau * pi.powi(4));
    battery.check(
        "unit-mobility step frequency response",
        (got - want).abs() < 1e-8,
        format!("mode 1 factor {got:.6} vs {want:.6}"),
    );

    // exact mass conservation over a short nonlinear run
    let config = RunConfig {
        grid,
        n: 3.0,
        eps: 1e-3,
        cap: stepper::CapPolicy::Auto,
        anchor: 1.0,
        tau0: Some(1e-2),
        t_end: 0.1,
        picard: Default::default(),
        estim_slack: 1e-6,
        monitor_slack: 5e-2,
        adaptive: true,
        tau_floor: None,
        initial: InitialCondition::CosineMix {
            base: 1.0,
            modes: vec![(1, 0.5)],
        },
        out_csv: None,
        out_snapshot: None,
    };
    let traj = stepper::run(&config)?;
    let mass_exact = traj
        .states
        .iter()
        .all(|s| s.coeffs()[0] == traj.initial().coeffs()[0]);
    battery.check(
        "bit-exact mass conservation",
        mass_exact,
        format!("{} steps", traj.reports.len()),
    );
    battery.check(
        "a-priori monitors on nonlinear run",
        traj.monitors_all_ok() && traj.aborted.is_none(),
        format!("final t {:.3}", traj.final_time()),
    );

    if battery.failures == 0 {
        println!("all checks passed");
        Ok(0)
    } else {
        println!("{} check(s) failed", battery.failures);
        Ok(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve {
            config,
            overrides,
            out,
            out_snapshot,
        } => cmd_solve(config, overrides, out.clone(), out_snapshot.clone()),
        Command::Sweep {
            config,
            overrides,
            eps_ladder,
            out,
        } => cmd_ladder(config, overrides, eps_ladder, out.clone(), false),
        Command::Lift {
            config,
            overrides,
            delta_ladder,
            out,
        } => cmd_ladder(config, overrides, delta_ladder, out.clone(), true),
        Command::Verify { fields, seed } => cmd_verify(*fields, *seed),
        Command::Extend {
            snapshot,
            t_end,
            tau0,
            out,
            out_snapshot,
        } => cmd_extend(snapshot, *t_end, *tau0, out.clone(), out_snapshot.clone()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
