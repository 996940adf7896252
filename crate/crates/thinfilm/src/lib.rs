//! Solver and verification toolkit for a fourth-order thin-film equation
//! with a nonlocal destabilizing term,
//!
//! ```text
//!     u_t + ( f(u) (u_xx - I(u))_x )_x = 0        on (0, 1),
//! ```
//!
//! with no-flux boundary conditions. `I` is the Dirichlet-to-Neumann map of
//! the harmonic extension to the half plane, diagonal in the Neumann cosine
//! basis, and `f(u) = u^n` is the degenerate mobility (regularized and
//! capped for computation).
//!
//! The crate provides the spectral discretization ([`spectral`]), the
//! mobility and entropy machinery ([`mobility`]), conserved/dissipated
//! functionals and inequality checkers ([`functionals`]), the implicit
//! time stepper with a-priori monitors ([`stepper`]), continuation and
//! verification experiments ([`continuation`]), plain-text I/O ([`io`]),
//! and run configuration ([`config`]).

pub mod config;
pub mod continuation;
pub mod error;
pub mod functionals;
pub mod io;
pub mod mobility;
pub mod spectral;
pub mod stepper;

pub use config::{parse_config, InitialCondition};
pub use error::{Error, Result};
pub use mobility::MobilityModel;
pub use spectral::{CosineField, GridSpec};
pub use stepper::{RunConfig, Trajectory};
