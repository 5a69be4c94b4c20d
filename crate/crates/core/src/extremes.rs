//! Max- and min-stability of distributions under random extremes.
//!
//! A distribution `F` is max-stable with respect to a counting law with
//! PGF `Q` when `Q(F(x)) = F(a + bx)` for some shift `a` and scale
//! `b > 0`; min-stability reads `Q(S(a + bx)) = S(x)` on survival
//! functions, with the affine map inside the survival on the left. The
//! fitter recovers `(a, b)` from quantile matching and verifies the
//! identity on a fine grid; failure is established against a brute-force
//! affine scan in the tests.

use serde::{Deserialize, Serialize};

use crate::dist::{AffineMap, DistSpec};
use crate::error::{Error, Result};
use crate::pgf::PgfSpec;
use crate::solve::golden_min_log;

/// Default pass threshold on cdf residuals.
pub const DEFAULT_STABILITY_THRESHOLD: f64 = 1e-6;

/// Quantile levels for the affine fit grid.
const FIT_LEVELS: usize = 19;
/// Verification grid size spanning the 0.01..0.99 quantile range.
const VERIFY_POINTS: usize = 201;

/// Which extreme a transform or stability check refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityKind {
    Max,
    Min,
}

/// Outcome of a stability check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub kind: StabilityKind,
    #[serde(flatten)]
    pub map: AffineMap,
    pub max_residual: f64,
    pub passed: bool,
    pub grid: Vec<f64>,
}

/// Distribution of the max of `N` iid draws from `f`, `N` having PGF `q`.
pub fn nmax_transform(q: &PgfSpec, f: &DistSpec) -> DistSpec {
    DistSpec::pgf_max_transform(q.clone(), f.clone())
}

/// Distribution of the min of `N` iid draws from `f`.
pub fn nmin_transform(q: &PgfSpec, f: &DistSpec) -> DistSpec {
    DistSpec::pgf_min_transform(q.clone(), f.clone())
}

/// Fit grid: quantiles of `target` at levels 0.05, 0.10, ..., 0.95.
pub fn default_fit_grid(target: &DistSpec) -> Result<Vec<f64>> {
    (1..=FIT_LEVELS)
        .map(|i| target.quantile(i as f64 * 0.05, 1e-12))
        .collect()
}

fn verification_grid(target: &DistSpec) -> Result<Vec<f64>> {
    let lo = target.quantile(0.01, 1e-12)?;
    let hi = target.quantile(0.99, 1e-12)?;
    Ok((0..VERIFY_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (VERIFY_POINTS - 1) as f64)
        .collect())
}

/// Least-squares affine fit of `cdf(source, x) = cdf(target, a + b x)`.
///
/// Builds `y_i = quantile(target, cdf(source, x_i))` over the grid, fits
/// `y = a + b x` by normal equations, and reports the sup-norm cdf
/// residual of the fitted identity over a finer verification grid.
pub fn fit_affine(
    target: &DistSpec,
    source: &DistSpec,
    x_grid: &[f64],
) -> Result<(AffineMap, f64)> {
    if x_grid.len() < 3 {
        return Err(Error::Domain("affine fit needs at least 3 grid points".into()));
    }
    let mut ys = Vec::with_capacity(x_grid.len());
    for &x in x_grid {
        let level = source.cdf(x).clamp(1e-12, 1.0 - 1e-12);
        ys.push(target.quantile(level, 1e-12)?);
    }
    let n = x_grid.len() as f64;
    let xm = x_grid.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in x_grid.iter().zip(&ys) {
        sxx += (x - xm) * (x - xm);
        sxy += (x - xm) * (y - ym);
    }
    if sxx / n < 1e-12 {
        return Err(Error::DegenerateFit(format!("grid x-variance {:.3e} too small", sxx / n)));
    }
    let scale = sxy / sxx;
    if scale <= 0.0 {
        return Err(Error::DegenerateFit(format!("non-positive slope {scale}")));
    }
    let map = AffineMap::new(ym - scale * xm, scale)?;
    let mut residual = 0.0f64;
    for x in verification_grid(target)? {
        residual = residual.max((source.cdf(x) - target.cdf(map.apply(x))).abs());
    }
    Ok((map, residual))
}

fn stability_report(
    kind: StabilityKind,
    target: &DistSpec,
    source: &DistSpec,
    threshold: f64,
) -> Result<StabilityReport> {
    let grid = default_fit_grid(target)?;
    match fit_affine(target, source, &grid) {
        Ok((map, max_residual)) => Ok(StabilityReport {
            kind,
            map,
            max_residual,
            passed: max_residual <= threshold,
            grid,
        }),
        // a degenerate fit is a verdict, not a crash
        Err(Error::DegenerateFit(_)) => Ok(StabilityReport {
            kind,
            map: AffineMap::identity(),
            max_residual: f64::INFINITY,
            passed: false,
            grid,
        }),
        Err(e) => Err(e),
    }
}

/// Checks `Q(F(x)) = F(a + bx)` by fitting the affine map.
pub fn check_max_stability(q: &PgfSpec, f: &DistSpec, threshold: f64) -> Result<StabilityReport> {
    let g = nmax_transform(q, f);
    stability_report(StabilityKind::Max, f, &g, threshold)
}

/// Checks `Q(S(a + bx)) = S(x)` in the orientation written, which is
/// equivalent to `cdf(F, x) = cdf(G, a + bx)` for the min transform `G`.
pub fn check_min_stability(q: &PgfSpec, f: &DistSpec, threshold: f64) -> Result<StabilityReport> {
    let g = nmin_transform(q, f);
    stability_report(StabilityKind::Min, &g, f, threshold)
}

/// For a PGF solving the involution equation, max- and min-stability are
/// equivalent: returns true when both checks agree (both pass or both
/// fail). Callers must hand in a PGF that actually solves the involution
/// equation; anything else is a precondition error, not a `false`.
pub fn stability_equivalence(q: &PgfSpec, f: &DistSpec, threshold: f64) -> Result<bool> {
    let involution = crate::checks::self_inverse_residual(q, &crate::checks::default_s_grid())?;
    if involution.max_residual > 1e-9 {
        return Err(Error::Precondition(format!(
            "{q} does not solve the involution equation (residual {:.3e})",
            involution.max_residual
        )));
    }
    let max = check_max_stability(q, f, threshold)?;
    let min = check_min_stability(q, f, threshold)?;
    Ok(max.passed == min.passed)
}

/// One step of an extreme-transform pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtremeStep {
    pub kind: StabilityKind,
    pub pgf: PgfSpec,
}

/// Folds max/min transforms over `f` in order.
pub fn compose_extremes(f: &DistSpec, steps: &[ExtremeStep]) -> Result<DistSpec> {
    if steps.is_empty() {
        return Err(Error::Domain("extreme composition needs at least one step".into()));
    }
    Ok(steps.iter().fold(f.clone(), |acc, step| match step.kind {
        StabilityKind::Max => nmax_transform(&step.pgf, &acc),
        StabilityKind::Min => nmin_transform(&step.pgf, &acc),
    }))
}

/// Result of fitting the fractional-linear survival structure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MoStructureFit {
    pub lambda: f64,
    pub max_residual: f64,
    pub converged: bool,
}

/// Finds `lambda` minimizing
/// `max_x |survival(G, x) - lambda S(x) / (1 - (1 - lambda) S(x))|`,
/// i.e. the best Marshall-Olkin representation of `G` over the base
/// survival `S`. Golden-section over `log(lambda)` on `[1e-2, 1e2]`.
pub fn mo_structure_fit(g: &DistSpec, f: &DistSpec, x_grid: &[f64]) -> Result<MoStructureFit> {
    if x_grid.is_empty() {
        return Err(Error::Domain("structure fit grid must be nonempty".into()));
    }
    let g_surv: Vec<f64> = x_grid.iter().map(|&x| g.survival(x)).collect();
    let f_surv: Vec<f64> = x_grid.iter().map(|&x| f.survival(x)).collect();
    let objective = |lambda: f64| -> f64 {
        g_surv
            .iter()
            .zip(&f_surv)
            .map(|(&gs, &fs)| (gs - lambda * fs / (1.0 - (1.0 - lambda) * fs)).abs())
            .fold(0.0, f64::max)
    };
    let best = golden_min_log(objective, 1e-2, 1e2);
    Ok(MoStructureFit { lambda: best.x, max_residual: best.value, converged: best.value.is_finite() })
}

/// Parameter-update check for the Harris-extended families: applying a
/// Harris(v, j) extreme to the Harris(u, j)-extended distribution lands
/// exactly on the Harris(uv, j)-extended one. Returns the sup distance
/// over the base quantile range.
pub fn proposition_check(
    kind: StabilityKind,
    base: &DistSpec,
    u: f64,
    j: u32,
    v: f64,
) -> Result<f64> {
    if !(u >= 1.0 && v >= 1.0) {
        return Err(Error::Domain(format!("harris parameters must be >= 1, got u={u}, v={v}")));
    }
    let step = PgfSpec::harris(v, j)?;
    let grid = verification_grid(base)?;
    let worst = match kind {
        StabilityKind::Min => {
            let extended = DistSpec::harris_min_extended(base.clone(), u, j)?;
            let transformed = nmin_transform(&step, &extended);
            let updated = DistSpec::harris_min_extended(base.clone(), u * v, j)?;
            grid.iter()
                .map(|&x| (transformed.survival(x) - updated.survival(x)).abs())
                .fold(0.0, f64::max)
        }
        StabilityKind::Max => {
            let extended = DistSpec::harris_max_extended(base.clone(), u, j)?;
            let transformed = nmax_transform(&step, &extended);
            let updated = DistSpec::harris_max_extended(base.clone(), u * v, j)?;
            grid.iter()
                .map(|&x| (transformed.cdf(x) - updated.cdf(x)).abs())
                .fold(0.0, f64::max)
        }
    };
    Ok(worst)
}
