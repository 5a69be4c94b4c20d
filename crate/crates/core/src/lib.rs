//! Numerical toolkit for the stability of random extremes.
//!
//! The crate revolves around probability generating functions (PGFs) of
//! positive-integer counts and what happens to a distribution when one takes
//! the max or min of a random number of iid draws:
//!
//! - [`pgf`] — parametric PGF families (geometric, Harris, Shaked,
//!   mixtures, perturbations, compositions) with evaluation, inversion,
//!   composition and power-series coefficient extraction;
//! - [`checks`] — residuals of the involution, inverse-closure and
//!   semigroup functional equations that characterize which counting laws
//!   preserve distribution type under random extremes;
//! - [`dist`] — distribution objects (Pareto type III, exponential,
//!   uniform, Marshall-Olkin and Harris extensions, PGF transforms,
//!   empirical samples) with cdf/survival/quantile/sampling;
//! - [`extremes`] — max-/min-stability checking with affine fitting,
//!   extreme-transform composition and parameter-update checks;
//! - [`montecarlo`] — an independent simulation oracle with
//!   Kolmogorov-Smirnov agreement metrics;
//! - [`explore`] — a multi-start derivative-free search for PGFs solving
//!   the involution and semigroup equations simultaneously, reporting
//!   whether minimizers collapse to the geometric family.
//!
//! ```
//! use nstab_core::{PgfSpec, DistSpec};
//! use nstab_core::extremes::{check_max_stability, StabilityKind};
//!
//! let q = PgfSpec::geometric(0.25)?;
//! let pareto = DistSpec::pareto_iii(2.0)?;
//! let report = check_max_stability(&q, &pareto, 1e-6)?;
//! assert!(report.passed);
//! assert!((report.map.scale - 0.5).abs() < 1e-6); // b = p^(1/alpha)
//! assert_eq!(report.kind, StabilityKind::Max);
//! # Ok::<(), nstab_core::Error>(())
//! ```

pub mod checks;
pub mod dist;
pub mod error;
pub mod explore;
pub mod extremes;
pub mod montecarlo;
pub mod optim;
pub mod pgf;
pub mod solve;

pub use dist::{AffineMap, DistSpec};
pub use error::{Error, Result};
pub use pgf::{CoefficientExtraction, Family, PgfSpec, PgfValidity};
