//! Probability generating functions over a handful of parametric families,
//! with evaluation, monotone inversion, composition, power-series coefficient
//! extraction and numeric validity checks.
//!
//! Every family here generates laws on {1, 2, ...}, so `Q(0) = 0`,
//! `Q(1) = 1` and `Q(s) <= s` on the unit interval for proper members.
//! Parameter values outside the proper range (for instance a geometric
//! member with `p > 1`, which arises as the functional inverse of the
//! member `1/p`) are supported as *formal* members: the closed form is
//! evaluated as written and validity is something to be checked, never
//! assumed.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fmt;

use crate::error::{Error, Result};
use crate::solve::bisect_increasing;

/// Default contour radius for coefficient extraction.
pub const DEFAULT_COEF_RADIUS: f64 = 0.9;
/// Absolute tolerance below which an extracted coefficient counts as negative.
/// Matches the quadrature error floor at the default radius and sample budget.
pub const EPS_COEF: f64 = 1e-7;
/// Default bracket-width tolerance for inversion.
pub const DEFAULT_INVERT_TOL: f64 = 1e-12;

/// The parametric family a [`PgfSpec`] belongs to.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `p s / (1 - (1-p) s)`; proper for `0 < p <= 1`.
    Geometric { p: f64 },
    /// `s / (u - (u-1) s^j)^(1/j)`; proper for `u >= 1` and integer `j >= 1`.
    Harris { u: f64, j: f64 },
    /// `1 - (1 - s^m)^(1/m)`; proper for integer `m >= 1`.
    Shaked { m: f64 },
    /// Convex combination `w Q_a(s) + (1-w) Q_b(s)`.
    Mixture {
        weight: f64,
        components: Box<(PgfSpec, PgfSpec)>,
    },
    /// Geometric member plus the cubic perturbation `s (1-s) (c1 + c2 s)`,
    /// which preserves `Q(0) = 0` and `Q(1) = 1`.
    MobiusPerturbed { p: f64, c1: f64, c2: f64 },
    /// Functional composition; `stages[0]` is applied first.
    Composite { stages: Vec<PgfSpec> },
}

/// A member of a PGF family, possibly formal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPgf", into = "RawPgf")]
pub struct PgfSpec {
    family: Family,
    explorer: bool,
}

impl PgfSpec {
    /// Geometric member, proper domain `0 < p <= 1`.
    pub fn geometric(p: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::Domain(format!("geometric p must be in (0, 1], got {p}")));
        }
        Ok(Self { family: Family::Geometric { p }, explorer: false })
    }

    /// Geometric member with any `p > 0`. Members with `p > 1` are formal:
    /// they are the functional inverses of the members `1/p`.
    pub fn geometric_formal(p: f64) -> Result<Self> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::Domain(format!("geometric p must be positive, got {p}")));
        }
        Ok(Self { family: Family::Geometric { p }, explorer: true })
    }

    /// Harris member, proper domain `u >= 1`, integer `j >= 1`.
    pub fn harris(u: f64, j: u32) -> Result<Self> {
        if !(u >= 1.0 && u.is_finite()) {
            return Err(Error::Domain(format!("harris u must be >= 1, got {u}")));
        }
        if j < 1 {
            return Err(Error::Domain("harris j must be >= 1".into()));
        }
        Ok(Self { family: Family::Harris { u, j: f64::from(j) }, explorer: false })
    }

    /// Harris member with any `u > 0` and real `j > 0`.
    pub fn harris_formal(u: f64, j: f64) -> Result<Self> {
        if !(u > 0.0 && u.is_finite()) {
            return Err(Error::Domain(format!("harris u must be positive, got {u}")));
        }
        if !(j > 0.0 && j.is_finite()) {
            return Err(Error::Domain(format!("harris j must be positive, got {j}")));
        }
        Ok(Self { family: Family::Harris { u, j }, explorer: true })
    }

    /// Shaked member, proper domain integer `m >= 1`.
    pub fn shaked(m: u32) -> Result<Self> {
        if m < 1 {
            return Err(Error::Domain("shaked m must be >= 1".into()));
        }
        Ok(Self { family: Family::Shaked { m: f64::from(m) }, explorer: false })
    }

    /// Shaked member with any real `m > 0`.
    pub fn shaked_formal(m: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::Domain(format!("shaked m must be positive, got {m}")));
        }
        Ok(Self { family: Family::Shaked { m }, explorer: true })
    }

    /// Convex mixture of two members.
    pub fn mixture(weight: f64, first: PgfSpec, second: PgfSpec) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::Domain(format!("mixture weight must be in [0, 1], got {weight}")));
        }
        let explorer = first.explorer || second.explorer;
        Ok(Self {
            family: Family::Mixture { weight, components: Box::new((first, second)) },
            explorer,
        })
    }

    /// Geometric member perturbed by `s (1-s) (c1 + c2 s)`.
    pub fn mobius_perturbed(p: f64, c1: f64, c2: f64) -> Result<Self> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::Domain(format!("mobius p must be positive, got {p}")));
        }
        if c1.abs() > 0.5 || c2.abs() > 0.5 {
            return Err(Error::Domain(format!(
                "perturbation coefficients must satisfy |c| <= 0.5, got ({c1}, {c2})"
            )));
        }
        Ok(Self { family: Family::MobiusPerturbed { p, c1, c2 }, explorer: p > 1.0 })
    }

    /// Composition pipeline; `stages[0]` is applied first.
    pub fn composite(stages: Vec<PgfSpec>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::Domain("composite needs at least one stage".into()));
        }
        let explorer = stages.iter().any(|s| s.explorer);
        Ok(Self { family: Family::Composite { stages }, explorer })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// True when the spec was built through a relaxed-domain constructor.
    pub fn is_explorer(&self) -> bool {
        self.explorer
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            Family::Geometric { .. } => "geometric",
            Family::Harris { .. } => "harris",
            Family::Shaked { .. } => "shaked",
            Family::Mixture { .. } => "mixture",
            Family::MobiusPerturbed { .. } => "mobius_perturbed",
            Family::Composite { .. } => "composite",
        }
    }

    /// Evaluates `Q(s)` for `s` in `[0, 1]`.
    pub fn eval(&self, s: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Domain(format!("pgf argument must be in [0, 1], got {s}")));
        }
        Ok(self.eval_unchecked(s))
    }

    /// Evaluation without the argument check. Outputs are clamped to
    /// `[0, 1]` so that fp noise at the endpoints cannot push a nested
    /// stage out of the domain of a fractional power.
    ///
    /// The endpoints are pinned: every representable member, formal ones
    /// included, satisfies `Q(0) = 0` and `Q(1) = 1` identically, and
    /// pinning keeps that exact through compositions whose stages (the
    /// Shaked root in particular) would otherwise amplify a one-ulp inner
    /// error to ~1e-8.
    fn eval_unchecked(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 0.0;
        }
        if s == 1.0 {
            return 1.0;
        }
        let value = match &self.family {
            Family::Geometric { p } => p * s / (1.0 - (1.0 - p) * s),
            Family::Harris { u, j } => s / (u - (u - 1.0) * s.powf(*j)).powf(1.0 / j),
            Family::Shaked { m } => 1.0 - (1.0 - s.powf(*m)).powf(1.0 / m),
            Family::Mixture { weight, components } => {
                weight * components.0.eval_unchecked(s)
                    + (1.0 - weight) * components.1.eval_unchecked(s)
            }
            Family::MobiusPerturbed { p, c1, c2 } => {
                p * s / (1.0 - (1.0 - p) * s) + s * (1.0 - s) * (c1 + c2 * s)
            }
            Family::Composite { stages } => {
                stages.iter().fold(s, |acc, q| q.eval_unchecked(acc))
            }
        };
        value.clamp(0.0, 1.0)
    }

    /// Evaluates the closed form at a complex argument (principal branches).
    /// Used by coefficient extraction; no clamping is applied.
    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        match &self.family {
            Family::Geometric { p } => p * z / (1.0 - (1.0 - p) * z),
            Family::Harris { u, j } => {
                z * (u - (u - 1.0) * z.powf(*j)).powf(-1.0 / j)
            }
            Family::Shaked { m } => 1.0 - (1.0 - z.powf(*m)).powf(1.0 / m),
            Family::Mixture { weight, components } => {
                *weight * components.0.eval_complex(z)
                    + (1.0 - weight) * components.1.eval_complex(z)
            }
            Family::MobiusPerturbed { p, c1, c2 } => {
                p * z / (1.0 - (1.0 - p) * z) + z * (1.0 - z) * (c1 + c2 * z)
            }
            Family::Composite { stages } => {
                stages.iter().fold(z, |acc, q| q.eval_complex(acc))
            }
        }
    }

    /// Solves `Q(s) = t` on `[0, 1]`.
    ///
    /// Geometric, Harris and Shaked members invert in closed form (the
    /// geometric and Harris inverses are again members of the same family,
    /// with parameter `1/p` resp. `1/u`); everything else falls back to
    /// bisection, which converges unconditionally because `Q` is increasing.
    pub fn invert(&self, t: f64, tol: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("pgf inverse argument must be in [0, 1], got {t}")));
        }
        match &self.family {
            Family::Geometric { p } => Ok((t / (p + (1.0 - p) * t)).clamp(0.0, 1.0)),
            Family::Harris { u, j } => {
                let tj = t.powf(*j);
                Ok((t * u.powf(1.0 / j) / (1.0 + (u - 1.0) * tj).powf(1.0 / j)).clamp(0.0, 1.0))
            }
            Family::Shaked { m } => {
                Ok((1.0 - (1.0 - t).powf(*m)).powf(1.0 / m).clamp(0.0, 1.0))
            }
            _ => self.invert_bisect(t, tol),
        }
    }

    /// Solves `Q(s) = t` by bisection regardless of family. Cross-validates
    /// the closed-form inverses.
    pub fn invert_bisect(&self, t: f64, tol: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("pgf inverse argument must be in [0, 1], got {t}")));
        }
        bisect_increasing(|s| self.eval_unchecked(s), 0.0, 1.0, t, tol)
    }

    /// Returns `self ∘ inner` (inner applied first).
    ///
    /// Compositions stay symbolic except for the two families that are
    /// closed under compounding: two geometric members multiply their
    /// parameters, and two Harris members with the same power index
    /// multiply theirs.
    pub fn compose(&self, inner: &PgfSpec) -> PgfSpec {
        match (&self.family, &inner.family) {
            (Family::Geometric { p }, Family::Geometric { p: q }) => {
                let prod = p * q;
                PgfSpec {
                    family: Family::Geometric { p: prod },
                    explorer: self.explorer || inner.explorer || prod > 1.0,
                }
            }
            (Family::Harris { u, j }, Family::Harris { u: v, j: jv }) if j == jv => PgfSpec {
                family: Family::Harris { u: u * v, j: *j },
                explorer: self.explorer || inner.explorer,
            },
            _ => PgfSpec {
                explorer: self.explorer || inner.explorer,
                family: Family::Composite { stages: vec![inner.clone(), self.clone()] },
            },
        }
    }

    /// Extracts `P(N = n)` for `n = 1..=n_max` by trapezoidal quadrature of
    /// the circle-contour coefficient integral at the given radius.
    ///
    /// The sample count is `8 * n_max` rounded up to a power of two, with a
    /// floor of 256. The floor keeps aliasing below the roundoff
    /// amplification of `radius^(-n)` even for series whose tails decay
    /// polynomially or barely at all (the Shaked family, formal geometric
    /// members with a pole near the contour).
    pub fn coefficients(&self, n_max: usize, radius: f64) -> Result<CoefficientExtraction> {
        if n_max < 1 {
            return Err(Error::Domain("n_max must be >= 1".into()));
        }
        if !(radius > 0.0 && radius < 1.0) {
            return Err(Error::Domain(format!("radius must be in (0, 1), got {radius}")));
        }
        let samples = (8 * n_max).next_power_of_two().max(256);
        let evals: Vec<Complex64> = (0..samples)
            .map(|k| self.eval_complex(Complex64::from_polar(radius, TAU * k as f64 / samples as f64)))
            .collect();
        let twiddle: Vec<Complex64> = (0..samples)
            .map(|k| Complex64::from_polar(1.0, -TAU * k as f64 / samples as f64))
            .collect();
        let mut coefficients = Vec::with_capacity(n_max);
        for n in 1..=n_max {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, q) in evals.iter().enumerate() {
                acc += q * twiddle[(k * n) % samples];
            }
            coefficients.push(acc.re / (samples as f64 * radius.powi(n as i32)));
        }
        let total: f64 = coefficients.iter().sum();
        let min_coefficient = coefficients.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(CoefficientExtraction { coefficients, tail_mass: 1.0 - total, min_coefficient })
    }

    /// Numeric validity report: origin and normalization values, grid
    /// monotonicity, coefficient nonnegativity and tail mass.
    ///
    /// Invalidity is an outcome, not an error; formal members are expected
    /// to fail some of these checks. Normalization holds structurally for
    /// every representable member, so the decisive checks are monotonicity
    /// and the coefficient signs (a formal geometric member, for instance,
    /// is increasing and normalized and only its series betrays it).
    pub fn validate(&self, n_max: usize, tol: f64) -> Result<PgfValidity> {
        if !(tol > 0.0) {
            return Err(Error::Domain(format!("validation tol must be > 0, got {tol}")));
        }
        let at_origin = self.eval_unchecked(0.0);
        let at_one = self.eval_unchecked(1.0);
        let mut monotone_ok = true;
        let grid = 201;
        let mut prev = at_origin;
        for i in 1..grid {
            let s = i as f64 / (grid - 1) as f64;
            let q = self.eval_unchecked(s);
            if q < prev - tol {
                monotone_ok = false;
                break;
            }
            prev = q;
        }
        let extraction = self.coefficients(n_max, DEFAULT_COEF_RADIUS)?;
        let coefficients_ok = extraction.min_coefficient >= -EPS_COEF;
        let origin_ok = at_origin.abs() <= tol;
        let normalization_ok = (at_one - 1.0).abs() <= tol;
        Ok(PgfValidity {
            origin_ok,
            normalization_ok,
            monotone_ok,
            coefficients_ok,
            min_coefficient: extraction.min_coefficient,
            tail_mass: extraction.tail_mass,
            is_valid: origin_ok && normalization_ok && monotone_ok && coefficients_ok,
        })
    }
}

impl fmt::Display for PgfSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::Geometric { p } => write!(f, "geometric(p={p})"),
            Family::Harris { u, j } => write!(f, "harris(u={u}, j={j})"),
            Family::Shaked { m } => write!(f, "shaked(m={m})"),
            Family::Mixture { weight, components } => {
                write!(f, "mixture(w={weight}; {}; {})", components.0, components.1)
            }
            Family::MobiusPerturbed { p, c1, c2 } => {
                write!(f, "mobius_perturbed(p={p}, c1={c1}, c2={c2})")
            }
            Family::Composite { stages } => {
                write!(f, "composite(")?;
                for (i, q) in stages.iter().enumerate() {
                    if i > 0 {
                        write!(f, " -> ")?;
                    }
                    write!(f, "{q}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Power-series coefficients of a PGF plus the unaccounted tail mass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientExtraction {
    /// `P(N = n)` approximations, index 0 holding `n = 1`.
    pub coefficients: Vec<f64>,
    /// `1 - sum(coefficients)`.
    pub tail_mass: f64,
    pub min_coefficient: f64,
}

impl CoefficientExtraction {
    /// First coefficient dipping below `-eps`, as `(n, value)`, if any.
    /// A hit signals an invalid PGF or a too-small extraction radius.
    pub fn negative_coefficient(&self, eps: f64) -> Option<(usize, f64)> {
        self.coefficients
            .iter()
            .enumerate()
            .find(|(_, &c)| c < -eps)
            .map(|(i, &c)| (i + 1, c))
    }
}

/// Outcome of [`PgfSpec::validate`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PgfValidity {
    pub origin_ok: bool,
    pub normalization_ok: bool,
    pub monotone_ok: bool,
    pub coefficients_ok: bool,
    pub min_coefficient: f64,
    pub tail_mass: f64,
    pub is_valid: bool,
}

/// Wire format: `{"family": ..., "params": [...], "children": [...]}`.
#[derive(Serialize, Deserialize)]
struct RawPgf {
    family: String,
    #[serde(default)]
    params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    children: Vec<RawPgf>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    explorer_mode: bool,
}

impl From<PgfSpec> for RawPgf {
    fn from(spec: PgfSpec) -> Self {
        let explorer_mode = spec.explorer;
        match spec.family {
            Family::Geometric { p } => RawPgf {
                family: "geometric".into(),
                params: vec![p],
                children: vec![],
                explorer_mode,
            },
            Family::Harris { u, j } => RawPgf {
                family: "harris".into(),
                params: vec![u, j],
                children: vec![],
                explorer_mode,
            },
            Family::Shaked { m } => RawPgf {
                family: "shaked".into(),
                params: vec![m],
                children: vec![],
                explorer_mode,
            },
            Family::Mixture { weight, components } => RawPgf {
                family: "mixture".into(),
                params: vec![weight],
                children: vec![components.0.into(), components.1.into()],
                explorer_mode,
            },
            Family::MobiusPerturbed { p, c1, c2 } => RawPgf {
                family: "mobius_perturbed".into(),
                params: vec![p, c1, c2],
                children: vec![],
                explorer_mode,
            },
            Family::Composite { stages } => RawPgf {
                family: "composite".into(),
                params: vec![],
                children: stages.into_iter().map(Into::into).collect(),
                explorer_mode,
            },
        }
    }
}

impl TryFrom<RawPgf> for PgfSpec {
    type Error = String;

    fn try_from(raw: RawPgf) -> std::result::Result<Self, String> {
        let want = |n: usize| -> std::result::Result<(), String> {
            if raw.params.len() == n {
                Ok(())
            } else {
                Err(format!("family '{}' expects {} params, got {}", raw.family, n, raw.params.len()))
            }
        };
        let spec = match raw.family.as_str() {
            "geometric" => {
                want(1)?;
                if raw.explorer_mode {
                    PgfSpec::geometric_formal(raw.params[0])
                } else {
                    PgfSpec::geometric(raw.params[0])
                }
            }
            "harris" => {
                want(2)?;
                let (u, j) = (raw.params[0], raw.params[1]);
                if raw.explorer_mode {
                    PgfSpec::harris_formal(u, j)
                } else {
                    if j.fract() != 0.0 || !(1.0..=u32::MAX as f64).contains(&j) {
                        return Err(format!(
                            "harris j must be a positive integer outside explorer mode, got {j}"
                        ));
                    }
                    PgfSpec::harris(u, j as u32)
                }
            }
            "shaked" => {
                want(1)?;
                let m = raw.params[0];
                if raw.explorer_mode {
                    PgfSpec::shaked_formal(m)
                } else {
                    if m.fract() != 0.0 || !(1.0..=u32::MAX as f64).contains(&m) {
                        return Err(format!(
                            "shaked m must be a positive integer outside explorer mode, got {m}"
                        ));
                    }
                    PgfSpec::shaked(m as u32)
                }
            }
            "mixture" => {
                want(1)?;
                if raw.children.len() != 2 {
                    return Err(format!("mixture expects 2 children, got {}", raw.children.len()));
                }
                let mut kids = raw.children.into_iter();
                let first = PgfSpec::try_from(kids.next().unwrap())?;
                let second = PgfSpec::try_from(kids.next().unwrap())?;
                PgfSpec::mixture(raw.params[0], first, second)
            }
            "mobius_perturbed" => {
                want(3)?;
                PgfSpec::mobius_perturbed(raw.params[0], raw.params[1], raw.params[2])
            }
            "composite" => {
                let stages = raw
                    .children
                    .into_iter()
                    .map(PgfSpec::try_from)
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                PgfSpec::composite(stages)
            }
            other => return Err(format!("unknown pgf family '{other}'")),
        };
        spec.map_err(|e| e.to_string())
    }
}
