//! Residuals of the functional equations that govern stability of random
//! extremes.
//!
//! Three equations matter, each quantified over a parametric family
//! `Q_u`:
//!
//! - involution: `1 - Q_u(1-s) = Q_u^{-1}(s)`, equivalently the
//!   inversion-free self-inverse form `Q_u(1 - Q_u(1-s)) = s`;
//! - inverse closure: `Q_u^{-1} = Q_lambda` for some `lambda > 0`;
//! - semigroup: `Q_u(Q_v(s)) = Q_{uv}(s)`.
//!
//! The geometric family satisfies all three. The Harris family satisfies
//! the semigroup and inverse-closure equations but not the involution;
//! the Shaked family satisfies the involution but not the semigroup.
//! Residual reports make those facts quantitative on explicit grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pgf::PgfSpec;
use crate::solve::golden_min_log;

/// Which functional equation a [`ResidualReport`] measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    Involution,
    SelfInverse,
    InverseClosure,
    Semigroup,
}

/// A residual evaluation point: a bare `s`, or a `(u, v, s)` triple for
/// the semigroup equation. Serializes as a flat array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", try_from = "Vec<f64>")]
pub enum GridPoint {
    S(f64),
    Uvs(f64, f64, f64),
}

impl From<GridPoint> for Vec<f64> {
    fn from(p: GridPoint) -> Self {
        match p {
            GridPoint::S(s) => vec![s],
            GridPoint::Uvs(u, v, s) => vec![u, v, s],
        }
    }
}

impl TryFrom<Vec<f64>> for GridPoint {
    type Error = String;
    fn try_from(v: Vec<f64>) -> std::result::Result<Self, String> {
        match v.as_slice() {
            [s] => Ok(GridPoint::S(*s)),
            [u, v, s] => Ok(GridPoint::Uvs(*u, *v, *s)),
            other => Err(format!("grid point must have 1 or 3 coordinates, got {}", other.len())),
        }
    }
}

/// Per-grid-point absolute residuals of one functional equation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualReport {
    pub equation: Equation,
    pub max_residual: f64,
    pub argmax: GridPoint,
    pub grid: Vec<GridPoint>,
    pub residuals: Vec<f64>,
}

impl ResidualReport {
    fn new(equation: Equation, grid: Vec<GridPoint>, residuals: Vec<f64>) -> Result<Self> {
        if grid.is_empty() || grid.len() != residuals.len() {
            return Err(Error::Domain("residual grid must be nonempty and aligned".into()));
        }
        let (mut max_residual, mut argmax) = (f64::NEG_INFINITY, grid[0]);
        for (point, &r) in grid.iter().zip(&residuals) {
            if r > max_residual {
                max_residual = r;
                argmax = *point;
            }
        }
        Ok(Self { equation, max_residual, argmax, grid, residuals })
    }

    /// One row per grid point; scalar grids get `s,residual` columns,
    /// semigroup grids get `u,v,s,residual`.
    pub fn to_csv(&self) -> String {
        let triple = matches!(self.grid.first(), Some(GridPoint::Uvs(..)));
        let mut out = String::from(if triple { "u,v,s,residual\n" } else { "s,residual\n" });
        for (point, r) in self.grid.iter().zip(&self.residuals) {
            match point {
                GridPoint::S(s) => out.push_str(&format!("{s},{r}\n")),
                GridPoint::Uvs(u, v, s) => out.push_str(&format!("{u},{v},{s},{r}\n")),
            }
        }
        out
    }
}

/// The default evaluation grid: 99 equispaced interior points
/// `{0.01, 0.02, ..., 0.99}`. The endpoints are forced by normalization
/// and carry no information.
pub fn default_s_grid() -> Vec<f64> {
    (1..100).map(|i| i as f64 / 100.0).collect()
}

/// 33 Chebyshev-spaced interior points, used by the conjecture explorer.
pub fn chebyshev_s_grid(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| 0.5 + 0.5 * (std::f64::consts::PI * (2 * i - 1) as f64 / (2 * n) as f64).cos())
        .collect()
}

fn check_interior(s_grid: &[f64]) -> Result<()> {
    if s_grid.is_empty() {
        return Err(Error::Domain("s grid must be nonempty".into()));
    }
    for &s in s_grid {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Domain(format!("grid points must lie strictly inside (0, 1), got {s}")));
        }
    }
    Ok(())
}

/// Residual of the involution equation, `|1 - Q(1-s) - Q^{-1}(s)|`.
pub fn involution_residual(spec: &PgfSpec, s_grid: &[f64], tol: f64) -> Result<ResidualReport> {
    check_interior(s_grid)?;
    let mut residuals = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let lhs = 1.0 - spec.eval(1.0 - s)?;
        let rhs = spec.invert(s, tol)?;
        residuals.push((lhs - rhs).abs());
    }
    ResidualReport::new(
        Equation::Involution,
        s_grid.iter().map(|&s| GridPoint::S(s)).collect(),
        residuals,
    )
}

/// Residual of the inversion-free self-inverse form,
/// `|Q(1 - Q(1-s)) - s|`. Algebraically equivalent to the involution
/// equation but needs no root finding.
pub fn self_inverse_residual(spec: &PgfSpec, s_grid: &[f64]) -> Result<ResidualReport> {
    check_interior(s_grid)?;
    let mut residuals = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let inner = 1.0 - spec.eval(1.0 - s)?;
        residuals.push((spec.eval(inner)? - s).abs());
    }
    ResidualReport::new(
        Equation::SelfInverse,
        s_grid.iter().map(|&s| GridPoint::S(s)).collect(),
        residuals,
    )
}

/// A one-parameter PGF family `u -> Q_u`, the object the inverse-closure
/// and semigroup equations quantify over. Members may be formal.
pub trait PgfFamily {
    fn name(&self) -> &str;
    fn member(&self, u: f64) -> Result<PgfSpec>;
}

/// `Q_p(s) = p s / (1 - (1-p) s)`, `p > 0`.
pub struct GeometricFamily;

impl PgfFamily for GeometricFamily {
    fn name(&self) -> &str {
        "geometric"
    }
    fn member(&self, u: f64) -> Result<PgfSpec> {
        PgfSpec::geometric_formal(u)
    }
}

/// `Q_u(s) = s / (u - (u-1) s^j)^(1/j)` with the power index `j` fixed.
pub struct HarrisFamily {
    pub j: f64,
}

impl PgfFamily for HarrisFamily {
    fn name(&self) -> &str {
        "harris"
    }
    fn member(&self, u: f64) -> Result<PgfSpec> {
        PgfSpec::harris_formal(u, self.j)
    }
}

/// `Q_m(s) = 1 - (1 - s^m)^(1/m)` with `m` playing the compounding role.
pub struct ShakedFamily;

impl PgfFamily for ShakedFamily {
    fn name(&self) -> &str {
        "shaked"
    }
    fn member(&self, u: f64) -> Result<PgfSpec> {
        PgfSpec::shaked_formal(u)
    }
}

/// Residual of the semigroup equation over a grid of `(u, v)` pairs and
/// inner arguments: `|Q_u(Q_v(s)) - Q_{uv}(s)|`.
pub fn semigroup_residual<F: PgfFamily + ?Sized>(
    family: &F,
    uv_grid: &[(f64, f64)],
    s_grid: &[f64],
) -> Result<ResidualReport> {
    check_interior(s_grid)?;
    if uv_grid.is_empty() {
        return Err(Error::Domain("uv grid must be nonempty".into()));
    }
    let mut grid = Vec::with_capacity(uv_grid.len() * s_grid.len());
    let mut residuals = Vec::with_capacity(grid.capacity());
    for &(u, v) in uv_grid {
        let outer = family.member(u)?;
        let inner = family.member(v)?;
        let product = family.member(u * v)?;
        for &s in s_grid {
            let nested = outer.eval(inner.eval(s)?)?;
            let direct = product.eval(s)?;
            grid.push(GridPoint::Uvs(u, v, s));
            residuals.push((nested - direct).abs());
        }
    }
    ResidualReport::new(Equation::Semigroup, grid, residuals)
}

/// Result of fitting the inverse-closure equation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InverseClosureFit {
    pub lambda: f64,
    pub converged: bool,
    pub report: ResidualReport,
}

/// Finds the family member closest to `Q_u^{-1}` in sup norm:
/// minimizes `max_s |Q_u^{-1}(s) - Q_lambda(s)|` over `lambda` in the
/// given box by golden-section on `log(lambda)` after a coarse scan.
///
/// Reports the best `lambda` found; uniqueness is not asserted.
pub fn inverse_closure_fit<F: PgfFamily + ?Sized>(
    family: &F,
    u: f64,
    s_grid: &[f64],
    lambda_box: (f64, f64),
) -> Result<InverseClosureFit> {
    check_interior(s_grid)?;
    let (lo, hi) = lambda_box;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Domain(format!("lambda box must satisfy 0 < lo < hi, got ({lo}, {hi})")));
    }
    let base = family.member(u)?;
    let inverted: Vec<f64> = s_grid
        .iter()
        .map(|&s| base.invert(s, 1e-13))
        .collect::<Result<_>>()?;
    let objective = |lambda: f64| -> f64 {
        match family.member(lambda) {
            Ok(member) => s_grid
                .iter()
                .zip(&inverted)
                .map(|(&s, &inv)| match member.eval(s) {
                    Ok(q) => (inv - q).abs(),
                    Err(_) => f64::INFINITY,
                })
                .fold(0.0, f64::max),
            Err(_) => f64::INFINITY,
        }
    };
    let best = golden_min_log(objective, lo, hi);
    let member = family.member(best.x)?;
    let mut residuals = Vec::with_capacity(s_grid.len());
    for (&s, &inv) in s_grid.iter().zip(&inverted) {
        residuals.push((inv - member.eval(s)?).abs());
    }
    let report = ResidualReport::new(
        Equation::InverseClosure,
        s_grid.iter().map(|&s| GridPoint::S(s)).collect(),
        residuals,
    )?;
    Ok(InverseClosureFit { lambda: best.x, converged: best.value.is_finite(), report })
}

/// Residual of the inverse-closure equation at a *given* `lambda`,
/// `|Q_u^{-1}(s) - Q_lambda(s)|`, with the inverse computed by bisection
/// so the two sides never share a closed form.
pub fn inverse_closure_residual_at<F: PgfFamily + ?Sized>(
    family: &F,
    u: f64,
    lambda: f64,
    s_grid: &[f64],
    tol: f64,
) -> Result<ResidualReport> {
    check_interior(s_grid)?;
    let base = family.member(u)?;
    let candidate = family.member(lambda)?;
    let mut residuals = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let inv = base.invert_bisect(s, tol)?;
        residuals.push((inv - candidate.eval(s)?).abs());
    }
    ResidualReport::new(
        Equation::InverseClosure,
        s_grid.iter().map(|&s| GridPoint::S(s)).collect(),
        residuals,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn geometric_involution_residual_vanishes() {
        let q = PgfSpec::geometric(0.5).unwrap();
        let report = involution_residual(&q, &[0.3], 1e-13).unwrap();
        // both sides equal 6/13
        assert!(report.max_residual < 1e-12, "{}", report.max_residual);
        let full = involution_residual(&q, &default_s_grid(), 1e-13).unwrap();
        assert!(full.max_residual < 1e-12);
    }

    #[test]
    fn shaked_satisfies_the_involution() {
        for m in [2, 3] {
            let q = PgfSpec::shaked(m).unwrap();
            let report = involution_residual(&q, &default_s_grid(), 1e-13).unwrap();
            assert!(report.max_residual <= 1e-10, "m={m}: {}", report.max_residual);
        }
    }

    #[test]
    fn harris_involution_witness() {
        let q = PgfSpec::harris(2.0, 2).unwrap();
        let report = involution_residual(&q, &[0.5], 1e-13).unwrap();
        // |1 - 0.5/sqrt(1.75) - sqrt(0.4)|
        assert_abs_diff_eq!(report.max_residual, 0.010_420_005_042_903, epsilon = 1e-9);
        assert!(report.max_residual > 0.009 && report.max_residual < 0.012);
    }

    #[test]
    fn self_inverse_matches_involution_classification() {
        let grid = default_s_grid();
        for (spec, solves) in [
            (PgfSpec::geometric(0.3).unwrap(), true),
            (PgfSpec::geometric(0.7).unwrap(), true),
            (PgfSpec::shaked(2).unwrap(), true),
            (PgfSpec::shaked(3).unwrap(), true),
            (PgfSpec::harris(2.0, 2).unwrap(), false),
            (PgfSpec::harris(3.0, 2).unwrap(), false),
        ] {
            let inv = involution_residual(&spec, &grid, 1e-13).unwrap().max_residual;
            let selfinv = self_inverse_residual(&spec, &grid).unwrap().max_residual;
            // the two forms vanish together
            assert_eq!(inv <= 1e-9, selfinv <= 1e-7, "{spec}: inv={inv}, selfinv={selfinv}");
            assert_eq!(inv <= 1e-9, solves, "{spec}");
        }
    }

    #[test]
    fn harris_self_inverse_witness_exceeds_half_percent() {
        let q = PgfSpec::harris(2.0, 2).unwrap();
        let report = self_inverse_residual(&q, &[0.5]).unwrap();
        assert!(report.max_residual > 0.005, "{}", report.max_residual);
    }

    #[test]
    fn geometric_semigroup_residual_vanishes() {
        let pairs: Vec<(f64, f64)> = [0.3, 0.5, 0.7]
            .iter()
            .flat_map(|&p| [0.3, 0.5, 0.7].iter().map(move |&q| (p, q)))
            .collect();
        let report = semigroup_residual(&GeometricFamily, &pairs, &default_s_grid()).unwrap();
        assert!(report.max_residual <= 1e-12, "{}", report.max_residual);
        // hand value: Q_0.5(Q_0.5(0.5)) = Q_0.5(1/3) = 0.2 = Q_0.25(0.5)
        let member = GeometricFamily.member(0.25).unwrap();
        assert_abs_diff_eq!(member.eval(0.5).unwrap(), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn harris_semigroup_residual_vanishes() {
        let family = HarrisFamily { j: 2.0 };
        let pairs = [(2.0, 3.0), (3.0, 2.0), (2.0, 2.0), (3.0, 3.0)];
        let report = semigroup_residual(&family, &pairs, &default_s_grid()).unwrap();
        assert!(report.max_residual <= 1e-12, "{}", report.max_residual);
    }

    #[test]
    fn shaked_semigroup_witness() {
        let report = semigroup_residual(&ShakedFamily, &[(2.0, 2.0)], &[0.6]).unwrap();
        assert!(
            report.max_residual > 0.012 && report.max_residual < 0.016,
            "{}",
            report.max_residual
        );
    }

    #[test]
    fn geometric_inverse_closure_finds_reciprocal() {
        let fit = inverse_closure_fit(&GeometricFamily, 0.5, &default_s_grid(), (1e-2, 1e2)).unwrap();
        assert!(fit.converged);
        assert!((fit.lambda - 2.0).abs() < 1e-4, "lambda = {}", fit.lambda);
        assert!(fit.report.max_residual <= 1e-9, "{}", fit.report.max_residual);
    }

    #[test]
    fn harris_inverse_closure_finds_reciprocal() {
        let family = HarrisFamily { j: 2.0 };
        let fit = inverse_closure_fit(&family, 2.0, &default_s_grid(), (1e-2, 1e2)).unwrap();
        assert!((fit.lambda - 0.5).abs() < 1e-4, "lambda = {}", fit.lambda);
        assert!(fit.report.max_residual <= 1e-9, "{}", fit.report.max_residual);
    }

    #[test]
    fn shaked_family_is_not_closed_under_inversion() {
        // brute-force scan over the box is the oracle: the best member
        // stays bounded away from the inverse (true minimum ~8.3e-3)
        let grid = default_s_grid();
        let base = ShakedFamily.member(2.0).unwrap();
        let inverted: Vec<f64> = grid.iter().map(|&s| base.invert(s, 1e-12).unwrap()).collect();
        let mut scan_min = f64::INFINITY;
        for i in 0..=2000 {
            let lambda = 0.1 * 100.0f64.powf(i as f64 / 2000.0);
            let member = ShakedFamily.member(lambda).unwrap();
            let worst = grid
                .iter()
                .zip(&inverted)
                .map(|(&s, &inv)| (inv - member.eval(s).unwrap()).abs())
                .fold(0.0, f64::max);
            scan_min = scan_min.min(worst);
        }
        assert!(scan_min > 0.005, "scan min = {scan_min}");
        let fit = inverse_closure_fit(&ShakedFamily, 2.0, &grid, (0.1, 10.0)).unwrap();
        assert!(fit.report.max_residual > 0.005, "{}", fit.report.max_residual);
        // the fit may land anywhere in the flat basin; it cannot beat the
        // scan floor by more than the scan's own resolution
        assert!(fit.report.max_residual <= scan_min + 1e-4);
    }

    #[test]
    fn fixed_lambda_residual_uses_independent_route() {
        let report =
            inverse_closure_residual_at(&GeometricFamily, 0.5, 2.0, &default_s_grid(), 1e-14)
                .unwrap();
        assert!(report.max_residual <= 1e-12, "{}", report.max_residual);
    }

    #[test]
    fn semigroup_families_contain_the_identity_member() {
        let harris = HarrisFamily { j: 3.0 };
        let families: [&dyn PgfFamily; 2] = [&GeometricFamily, &harris];
        for family in families {
            let member = family.member(1.0).unwrap();
            for i in 0..=20 {
                let s = i as f64 / 20.0;
                assert_abs_diff_eq!(member.eval(s).unwrap(), s, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn report_invariants_hold() {
        let q = PgfSpec::harris(2.0, 2).unwrap();
        let report = involution_residual(&q, &default_s_grid(), 1e-12).unwrap();
        let max = report.residuals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(report.max_residual, max);
        assert!(report.residuals.iter().all(|&r| r >= 0.0));
        assert_eq!(report.grid.len(), report.residuals.len());
    }

    #[test]
    fn report_serialization_shapes() {
        let q = PgfSpec::geometric(0.5).unwrap();
        let report = involution_residual(&q, &[0.3, 0.7], 1e-12).unwrap();
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["equation"], "involution");
        assert_eq!(json["grid"][0], serde_json::json!([0.3]));
        assert!(json["argmax"].is_array());
        let csv = report.to_csv();
        assert!(csv.starts_with("s,residual\n"));
        assert_eq!(csv.lines().count(), 3);

        let semi = semigroup_residual(&GeometricFamily, &[(0.5, 0.5)], &[0.5]).unwrap();
        let csv = semi.to_csv();
        assert!(csv.starts_with("u,v,s,residual\n"));
    }
}
