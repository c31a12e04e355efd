//! Transition curves and periodic solutions of the Mathieu equation
//! `u'' + (delta + eps cos t) u = 0` on the line, and of its four
//! tridiagonal generalizations on the infinite Sierpinski gasket.
//!
//! Layout:
//! - [`trirec`]: infinite tridiagonal operators, truncation, Sturm bisection,
//!   backward recursion and truncation-error estimates.
//! - [`linemde`]: the line matrices A/B/C/D and the period-2N*pi classes.
//! - [`floquet`]: monodromy integration and stability classification.
//! - [`sgspec`]: gasket geometry and spectral decimation.
//! - [`fracmde`]: the fractal coefficient systems.
//! - [`fitkit`]: damped Gauss-Newton curve fitting.
//! - [`shell`]: command line front end and exporters.

pub mod error;
pub mod fitkit;
pub mod floquet;
pub mod fracmde;
pub mod linemde;
pub mod sgspec;
pub mod shell;
pub mod trirec;

pub use error::{Error, Result};
