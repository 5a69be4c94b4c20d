//! Numerical search for PGF families satisfying the involution and
//! semigroup equations simultaneously.
//!
//! Within every built-in family the geometric members are the only known
//! simultaneous solutions, and the searches here report how close each
//! family's minimizer gets to that locus. The output is explicitly
//! labeled: a finite search over parametric families is evidence for the
//! uniqueness of the geometric solution, never a proof.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checks::{self, PgfFamily};
use crate::error::{Error, Result};
use crate::optim::{latin_hypercube, nelder_mead, SimplexOptions};
use crate::pgf::{PgfSpec, DEFAULT_COEF_RADIUS, EPS_COEF};

/// Label stamped on every explorer result.
pub const EVIDENCE_LABEL: &str =
    "numerical evidence over the searched parameter box only; not a proof";

/// Coefficient horizon for the validity penalty.
const VALIDITY_N_MAX: usize = 64;

/// Reference compounding parameter at which the involution residual and
/// the validity penalty are probed.
const INVOLUTION_U_REF: f64 = 2.0;

/// Compounding parameter used for the validity probe when the proper
/// side of a family sits below 1 (geometric convention).
const VALIDITY_U_PROPER: f64 = 0.5;

/// A searchable PGF family: shape parameters live in a box, and each
/// shape choice induces a one-parameter compounding family `u -> Q_u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFamily", into = "RawFamily")]
pub enum FamilyHandle {
    /// Harris closed form with real shape `k`; `k = 1` is the geometric
    /// family in Moebius form, `s / (u - (u-1) s)`.
    HarrisContinuous { k_box: (f64, f64) },
    /// `alpha Q^geo_u + (1 - alpha) Q^shaked_u`; `alpha = 1` is geometric.
    GeoShakedMixture { alpha_box: (f64, f64) },
    /// Geometric member plus the cubic perturbation `s(1-s)(c1 + c2 s)`;
    /// the geometric locus is the plane `c1 = c2 = 0` at any `p`.
    MobiusPerturbed { p_box: (f64, f64), c_box: (f64, f64) },
}

impl FamilyHandle {
    pub fn harris_continuous() -> Self {
        Self::HarrisContinuous { k_box: (1.0, 3.0) }
    }

    pub fn geo_shaked_mixture() -> Self {
        Self::GeoShakedMixture { alpha_box: (0.0, 1.0) }
    }

    pub fn mobius_perturbed() -> Self {
        Self::MobiusPerturbed { p_box: (0.1, 0.9), c_box: (-0.5, 0.5) }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::HarrisContinuous { .. } => "harris_continuous",
            Self::GeoShakedMixture { .. } => "geo_shaked_mixture",
            Self::MobiusPerturbed { .. } => "mobius_perturbed",
        }
    }

    pub fn parameter_names(&self) -> Vec<&'static str> {
        match self {
            Self::HarrisContinuous { .. } => vec!["k"],
            Self::GeoShakedMixture { .. } => vec!["alpha"],
            Self::MobiusPerturbed { .. } => vec!["p", "c1", "c2"],
        }
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        match self {
            Self::HarrisContinuous { k_box } => vec![*k_box],
            Self::GeoShakedMixture { alpha_box } => vec![*alpha_box],
            Self::MobiusPerturbed { p_box, c_box } => vec![*p_box, *c_box, *c_box],
        }
    }

    fn validate_bounds(&self) -> Result<()> {
        for &(lo, hi) in &self.bounds() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Domain(format!("bad parameter box ({lo}, {hi})")));
            }
        }
        let ok = match self {
            Self::HarrisContinuous { k_box } => k_box.0 >= 1.0,
            Self::GeoShakedMixture { alpha_box } => alpha_box.0 >= 0.0 && alpha_box.1 <= 1.0,
            Self::MobiusPerturbed { p_box, c_box } => {
                p_box.0 > 0.0 && p_box.1 <= 1.0 && c_box.0 >= -0.5 && c_box.1 <= 0.5
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("box out of range for family {}", self.name())))
        }
    }

    /// The compounding member `Q_u` at the given shape parameters.
    pub fn member(&self, shape: &[f64], u: f64) -> Result<PgfSpec> {
        match self {
            Self::HarrisContinuous { .. } => PgfSpec::harris_formal(u, shape[0]),
            Self::GeoShakedMixture { .. } => PgfSpec::mixture(
                shape[0].clamp(0.0, 1.0),
                PgfSpec::geometric_formal(u)?,
                PgfSpec::shaked_formal(u)?,
            ),
            Self::MobiusPerturbed { .. } => PgfSpec::mobius_perturbed(u, shape[1], shape[2]),
        }
    }

    /// The member whose involution residual is probed.
    fn involution_member(&self, shape: &[f64]) -> Result<PgfSpec> {
        match self {
            Self::MobiusPerturbed { .. } => self.member(shape, shape[0]),
            _ => self.member(shape, INVOLUTION_U_REF),
        }
    }

    /// The member whose coefficients are probed for validity; sits on the
    /// proper side of the parameter range for each family.
    fn validity_member(&self, shape: &[f64]) -> Result<PgfSpec> {
        match self {
            Self::HarrisContinuous { .. } => self.member(shape, INVOLUTION_U_REF),
            Self::GeoShakedMixture { .. } => self.member(shape, VALIDITY_U_PROPER),
            Self::MobiusPerturbed { .. } => self.member(shape, shape[0]),
        }
    }

    /// Box-normalized distance from the geometric locus, maximized over
    /// the shape coordinates that have to vanish (or saturate) for the
    /// member to be geometric.
    pub fn geometric_distance(&self, shape: &[f64]) -> f64 {
        match self {
            Self::HarrisContinuous { k_box } => (shape[0] - 1.0).abs() / (k_box.1 - k_box.0),
            Self::GeoShakedMixture { alpha_box } => {
                (shape[0] - 1.0).abs() / (alpha_box.1 - alpha_box.0)
            }
            Self::MobiusPerturbed { c_box, .. } => {
                let width = c_box.1 - c_box.0;
                (shape[1].abs() / width).max(shape[2].abs() / width)
            }
        }
    }
}

struct ShapedFamily<'a> {
    handle: &'a FamilyHandle,
    shape: &'a [f64],
}

impl PgfFamily for ShapedFamily<'_> {
    fn name(&self) -> &str {
        self.handle.name()
    }
    fn member(&self, u: f64) -> Result<PgfSpec> {
        self.handle.member(self.shape, u)
    }
}

/// The three residual components at one shape point.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ResidualBreakdown {
    pub involution: f64,
    pub semigroup: f64,
    pub validity_penalty: f64,
}

impl ResidualBreakdown {
    pub fn total(&self) -> f64 {
        self.involution + self.semigroup + self.validity_penalty
    }
}

/// Grids the joint residual is evaluated on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExploreGrids {
    pub s_grid: Vec<f64>,
    pub uv_grid: Vec<(f64, f64)>,
}

impl Default for ExploreGrids {
    fn default() -> Self {
        Self {
            s_grid: checks::chebyshev_s_grid(33),
            uv_grid: vec![(0.5, 0.5), (0.5, 2.0), (2.0, 2.0), (1.5, 3.0)],
        }
    }
}

impl ExploreGrids {
    /// Same span at twice the density, for soundness re-checks.
    pub fn denser(&self) -> Self {
        Self { s_grid: checks::chebyshev_s_grid(2 * self.s_grid.len()), uv_grid: self.uv_grid.clone() }
    }
}

/// Sum of the involution residual at the designated member, the semigroup
/// residual over the `(u, v)` grid, and the validity penalty (total mass
/// of extracted coefficients below `-eps`). Zero iff both equations hold
/// on the grids and the probe member looks like a proper PGF.
pub fn joint_residual(
    family: &FamilyHandle,
    shape: &[f64],
    grids: &ExploreGrids,
) -> Result<(f64, ResidualBreakdown)> {
    if shape.len() != family.bounds().len() {
        return Err(Error::Domain(format!(
            "family {} expects {} parameters, got {}",
            family.name(),
            family.bounds().len(),
            shape.len()
        )));
    }
    let involution =
        checks::self_inverse_residual(&family.involution_member(shape)?, &grids.s_grid)?
            .max_residual;
    let shaped = ShapedFamily { handle: family, shape };
    let semigroup =
        checks::semigroup_residual(&shaped, &grids.uv_grid, &grids.s_grid)?.max_residual;
    let extraction = family
        .validity_member(shape)?
        .coefficients(VALIDITY_N_MAX, DEFAULT_COEF_RADIUS)?;
    let validity_penalty: f64 = extraction
        .coefficients
        .iter()
        .filter(|&&c| c < -EPS_COEF)
        .map(|c| c.abs())
        .sum();
    let breakdown = ResidualBreakdown { involution, semigroup, validity_penalty };
    Ok((breakdown.total(), breakdown))
}

/// Search configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExploreOptions {
    pub n_starts: usize,
    pub max_iterations: usize,
    pub value_tolerance: f64,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        Self { n_starts: 20, max_iterations: 400, value_tolerance: 1e-10 }
    }
}

/// One multi-start descent, summarized.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StartSummary {
    pub start: Vec<f64>,
    pub best: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// A single objective evaluation along some start's descent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TracePoint {
    pub start_index: usize,
    pub params: Vec<f64>,
    pub residual: f64,
}

/// Outcome of [`explore`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExploreResult {
    pub family: String,
    pub parameter_names: Vec<String>,
    pub best_params: Vec<f64>,
    pub joint_residual: f64,
    pub breakdown: ResidualBreakdown,
    /// Box-normalized distance of the minimizer from the geometric locus.
    pub geometric_distance: f64,
    pub n_converged: usize,
    pub starts: Vec<StartSummary>,
    pub trace: Vec<TracePoint>,
    /// What this result does and does not establish.
    pub interpretation: String,
}

impl ExploreResult {
    /// Trace as `param1,...,residual` CSV rows.
    pub fn trace_to_csv(&self) -> String {
        let mut out = String::from("start_index,");
        out.push_str(&self.parameter_names.join(","));
        out.push_str(",residual\n");
        for point in &self.trace {
            out.push_str(&point.start_index.to_string());
            for p in &point.params {
                out.push_str(&format!(",{p}"));
            }
            out.push_str(&format!(",{}\n", point.residual));
        }
        out
    }
}

/// Multi-start downhill-simplex minimization of the joint residual over
/// the family's shape box. Starts are Latin-hypercube samples; the
/// reported minimizer is the best over converged starts (ties broken by
/// lexicographic parameters), with the breakdown recomputed at the end.
pub fn explore(family: &FamilyHandle, options: &ExploreOptions, seed: u64) -> Result<ExploreResult> {
    family.validate_bounds()?;
    if options.n_starts < 1 {
        return Err(Error::Domain("explorer needs at least one start".into()));
    }
    let grids = ExploreGrids::default();
    let bounds = family.bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start_points = latin_hypercube(&bounds, options.n_starts, &mut rng);

    let objective = |shape: &[f64]| -> f64 {
        joint_residual(family, shape, &grids).map(|(total, _)| total).unwrap_or(f64::INFINITY)
    };

    let simplex_options = SimplexOptions {
        max_iterations: options.max_iterations,
        value_tolerance: options.value_tolerance,
    };
    let mut starts = Vec::with_capacity(options.n_starts);
    let mut trace = Vec::new();
    for (index, start) in start_points.iter().enumerate() {
        let run = nelder_mead(objective, start, &bounds, simplex_options);
        for (params, residual) in &run.trace {
            trace.push(TracePoint { start_index: index, params: params.clone(), residual: *residual });
        }
        starts.push(StartSummary {
            start: start.clone(),
            best: run.best,
            value: run.value,
            converged: run.converged,
            iterations: run.iterations,
        });
    }

    let pick = |pool: &[StartSummary]| -> Option<(Vec<f64>, f64)> {
        pool.iter()
            .map(|s| (s.best.clone(), s.value))
            .min_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.partial_cmp(&b.0).unwrap()))
    };
    let converged: Vec<StartSummary> = starts.iter().filter(|s| s.converged).cloned().collect();
    let n_converged = converged.len();
    let (best_params, _) = pick(&converged)
        .or_else(|| pick(&starts))
        .ok_or_else(|| Error::Convergence("no starts produced a finite value".into()))?;

    let (joint, breakdown) = joint_residual(family, &best_params, &grids)?;
    let geometric_distance = family.geometric_distance(&best_params);
    let interpretation = format!(
        "{EVIDENCE_LABEL}; best {} member sits at box-normalized distance {:.4} \
         from the geometric locus with joint residual {:.3e}",
        family.name(),
        geometric_distance,
        joint
    );
    Ok(ExploreResult {
        family: family.name().to_string(),
        parameter_names: family.parameter_names().iter().map(|s| s.to_string()).collect(),
        best_params,
        joint_residual: joint,
        breakdown,
        geometric_distance,
        n_converged,
        starts,
        trace,
        interpretation,
    })
}

/// Wire format: `{"name": ..., "box": [[lo, hi], ...]}`.
#[derive(Serialize, Deserialize)]
struct RawFamily {
    name: String,
    #[serde(default, rename = "box")]
    parameter_box: Vec<[f64; 2]>,
}

impl From<FamilyHandle> for RawFamily {
    fn from(handle: FamilyHandle) -> Self {
        RawFamily {
            name: handle.name().into(),
            parameter_box: handle.bounds().iter().map(|&(lo, hi)| [lo, hi]).collect(),
        }
    }
}

impl TryFrom<RawFamily> for FamilyHandle {
    type Error = String;

    fn try_from(raw: RawFamily) -> std::result::Result<Self, String> {
        let mut handle = match raw.name.as_str() {
            "harris_continuous" => FamilyHandle::harris_continuous(),
            "geo_shaked_mixture" => FamilyHandle::geo_shaked_mixture(),
            "mobius_perturbed" => FamilyHandle::mobius_perturbed(),
            other => return Err(format!("unknown explorer family '{other}'")),
        };
        if !raw.parameter_box.is_empty() {
            let expected = handle.bounds().len();
            if raw.parameter_box.len() != expected {
                return Err(format!(
                    "family '{}' expects {} box entries, got {}",
                    raw.name,
                    expected,
                    raw.parameter_box.len()
                ));
            }
            handle = match (&handle, raw.parameter_box.as_slice()) {
                (FamilyHandle::HarrisContinuous { .. }, [k]) => {
                    FamilyHandle::HarrisContinuous { k_box: (k[0], k[1]) }
                }
                (FamilyHandle::GeoShakedMixture { .. }, [a]) => {
                    FamilyHandle::GeoShakedMixture { alpha_box: (a[0], a[1]) }
                }
                (FamilyHandle::MobiusPerturbed { .. }, [p, c1, c2]) => {
                    if c1 != c2 {
                        return Err("perturbation coefficient boxes must match".into());
                    }
                    FamilyHandle::MobiusPerturbed { p_box: (p[0], p[1]), c_box: (c1[0], c1[1]) }
                }
                _ => unreachable!("box arity checked above"),
            };
        }
        handle.validate_bounds().map_err(|e| e.to_string())?;
        Ok(handle)
    }
}
