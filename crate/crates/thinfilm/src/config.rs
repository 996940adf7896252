//! Run configuration: structured text files (TOML sections) parsed into
//! `stepper::RunConfig`, plus the initial-condition library.
//!
//! Unknown keys are rejected; omitted keys take documented defaults
//! (N = 128, n = 3, eps = 1e-3, t_end = 1, tau0 = 1e-2).

use crate::error::{Error, Result};
use crate::spectral::{analyze, CosineField, GridSpec};
use crate::stepper::{CapPolicy, PicardSettings, RunConfig};
use serde::Deserialize;
use std::path::{Path, PathBuf};

/// Initial data in H^1 with Neumann-compatible structure.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialCondition {
    Constant {
        level: f64,
    },
    /// `base + sum amplitude_i phi_{mode_i}`.
    CosineMix {
        base: f64,
        modes: Vec<(usize, f64)>,
    },
    /// C^1 compact-support quartic `height (1 - ((x-center)/width)^2)^2`
    /// inside `|x - center| < width`, zero outside.
    Bump {
        center: f64,
        width: f64,
        height: f64,
    },
    /// `base + delta`, the entropy-finite lift of possibly degenerate data.
    Lifted {
        base: Box<InitialCondition>,
        delta: f64,
    },
    /// Raw cosine coefficients, e.g. restored from a snapshot.
    Coefficients(Vec<f64>),
}

impl InitialCondition {
    pub fn realize(&self, grid: GridSpec) -> Result<CosineField> {
        match self {
            Self::Constant { level } => {
                if *level < 0.0 {
                    return Err(Error::InvalidInitial(format!(
                        "constant level must be >= 0, got {level}"
                    )));
                }
                Ok(CosineField::constant(*level, grid))
            }
            Self::CosineMix { base, modes } => {
                let mut coeffs = vec![0.0; grid.n_modes() + 1];
                coeffs[0] = *base;
                for (k, amp) in modes {
                    if *k == 0 || *k > grid.n_modes() {
                        return Err(Error::InvalidInitial(format!(
                            "mode {k} outside 1..={}",
                            grid.n_modes()
                        )));
                    }
                    coeffs[*k] += amp;
                }
                CosineField::from_coeffs(coeffs, grid)
            }
            Self::Bump {
                center,
                width,
                height,
            } => {
                if !(*height > 0.0) {
                    return Err(Error::InvalidInitial(format!(
                        "bump height must be > 0, got {height}"
                    )));
                }
                if !(*width > 0.0) || center - width < 0.0 || center + width > 1.0 {
                    return Err(Error::InvalidInitial(format!(
                        "bump support [{} - {width}, {} + {width}] must lie inside (0,1)",
                        center, center
                    )));
                }
                let values: Vec<f64> = grid
                    .nodes()
                    .map(|x| {
                        let s = (x - center) / width;
                        if s.abs() < 1.0 {
                            let w = 1.0 - s * s;
                            height * w * w
                        } else {
                            0.0
                        }
                    })
                    .collect();
                analyze(&values, grid)
            }
            Self::Lifted { base, delta } => {
                if !(*delta > 0.0) {
                    return Err(Error::InvalidInitial(format!(
                        "lift delta must be > 0, got {delta}"
                    )));
                }
                let f = base.realize(grid)?;
                let mut coeffs = f.coeffs().to_vec();
                coeffs[0] += delta;
                CosineField::from_coeffs(coeffs, grid)
            }
            Self::Coefficients(coeffs) => CosineField::from_coeffs(coeffs.clone(), grid),
        }
    }

    /// Same initial condition lifted by delta.
    pub fn lifted(&self, delta: f64) -> Self {
        Self::Lifted {
            base: Box::new(self.clone()),
            delta,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    grid: Option<GridSection>,
    mobility: Option<MobilitySection>,
    time: Option<TimeSection>,
    picard: Option<PicardSection>,
    monitor: Option<MonitorSection>,
    initial: Option<InitialSection>,
    output: Option<OutputSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    n_modes: Option<usize>,
    n_quad: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MobilitySection {
    n: Option<f64>,
    eps: Option<f64>,
    cap_m: Option<f64>,
    anchor: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimeSection {
    tau0: Option<f64>,
    t_end: Option<f64>,
    tau_floor: Option<f64>,
    adaptive: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PicardSection {
    enabled: Option<bool>,
    max_iters: Option<u32>,
    tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MonitorSection {
    estim_slack: Option<f64>,
    monitor_slack: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialSection {
    kind: String,
    level: Option<f64>,
    base: Option<f64>,
    modes: Option<Vec<(usize, f64)>>,
    center: Option<f64>,
    width: Option<f64>,
    height: Option<f64>,
    delta: Option<f64>,
    base_kind: Option<Box<InitialSection>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    csv: Option<PathBuf>,
    snapshot: Option<PathBuf>,
}

impl InitialSection {
    fn build(&self) -> Result<InitialCondition> {
        match self.kind.as_str() {
            "constant" => Ok(InitialCondition::Constant {
                level: self.level.unwrap_or(1.0),
            }),
            "cosine_mix" => Ok(InitialCondition::CosineMix {
                base: self.base.unwrap_or(0.0),
                modes: self.modes.clone().unwrap_or_default(),
            }),
            "bump" => Ok(InitialCondition::Bump {
                center: self.center.unwrap_or(0.5),
                width: self.width.unwrap_or(0.25),
                height: self.height.unwrap_or(1.0),
            }),
            "lifted" => {
                let base = self
                    .base_kind
                    .as_ref()
                    .ok_or_else(|| Error::Config("lifted requires [initial.base_kind]".into()))?
                    .build()?;
                let delta = self
                    .delta
                    .ok_or_else(|| Error::Config("lifted requires delta".into()))?;
                Ok(InitialCondition::Lifted {
                    base: Box::new(base),
                    delta,
                })
            }
            other => Err(Error::Config(format!(
                "unknown initial kind `{other}` (expected constant | cosine_mix | bump | lifted)"
            ))),
        }
    }
}

/// Parse a configuration file into a run configuration.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Config(format!("cannot read {}: {e}", path.display()))
    })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let file: FileConfig =
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;

    let gs = file.grid.unwrap_or_default();
    let n_modes = gs.n_modes.unwrap_or(128);
    let grid = match gs.n_quad {
        Some(q) => GridSpec::with_quad(n_modes, q)?,
        None => GridSpec::new(n_modes)?,
    };

    let ms = file.mobility.unwrap_or_default();
    let n = ms.n.unwrap_or(3.0);
    let eps = ms.eps.unwrap_or(1e-3);
    let cap = match ms.cap_m {
        Some(m) => {
            if m <= eps {
                return Err(Error::Config(format!(
                    "eps < M required (eps = {eps}, M = {m})"
                )));
            }
            CapPolicy::Fixed(m)
        }
        None => CapPolicy::Auto,
    };

    let ts = file.time.unwrap_or_default();
    let ps = file.picard.unwrap_or_default();
    let mons = file.monitor.unwrap_or_default();
    let initial = match file.initial {
        Some(s) => s.build()?,
        None => InitialCondition::Constant { level: 1.0 },
    };
    let out = file.output.unwrap_or_default();

    let config = RunConfig {
        grid,
        n,
        eps,
        cap,
        anchor: ms.anchor.unwrap_or(1.0),
        tau0: ts.tau0,
        t_end: ts.t_end.unwrap_or(1.0),
        picard: PicardSettings {
            enabled: ps.enabled.unwrap_or(false),
            max_iters: ps.max_iters.unwrap_or(25),
            tol: ps.tol.unwrap_or(1e-9),
        },
        estim_slack: mons.estim_slack.unwrap_or(1e-6),
        monitor_slack: mons.monitor_slack.unwrap_or(5e-2),
        adaptive: ts.adaptive.unwrap_or(true),
        tau_floor: ts.tau_floor,
        initial,
        out_csv: out.csv,
        out_snapshot: out.snapshot,
    };
    config.validate()?;
    Ok(config)
}
