//! Distribution objects: a few closed-form base laws, the Marshall-Olkin
//! survival transform, Harris-extended min/max families, generic PGF
//! extreme transforms and empirical samples.
//!
//! Min-type kinds compute the survival function natively and define the
//! cdf as its complement; max-type kinds do the reverse. That makes
//! `cdf + survival = 1` hold to the last bit by construction.

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pgf::PgfSpec;

/// Default bracket tolerance handed to inner PGF inversions.
pub const DEFAULT_QUANTILE_TOL: f64 = 1e-12;

/// The change of argument `x -> a + b x` with `b > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    #[serde(rename = "a")]
    pub shift: f64,
    #[serde(rename = "b")]
    pub scale: f64,
}

impl AffineMap {
    pub fn new(shift: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite() && shift.is_finite()) {
            return Err(Error::Domain(format!("affine map needs finite shift and scale > 0, got ({shift}, {scale})")));
        }
        Ok(Self { shift, scale })
    }

    pub fn identity() -> Self {
        Self { shift: 0.0, scale: 1.0 }
    }

    pub fn apply(&self, x: f64) -> f64 {
        self.shift + self.scale * x
    }
}

/// A distribution on the real line described by cdf/survival/quantile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDist", into = "RawDist")]
pub enum DistSpec {
    /// Survival `1 / (1 + x^alpha)` on `x >= 0`.
    ParetoIII { alpha: f64 },
    /// Survival `exp(-rate x)` on `x >= 0`.
    Exponential { rate: f64 },
    /// Uniform on the unit interval.
    Uniform01,
    /// Survival `a S(x) / (1 - (1-a) S(x))` over the base survival `S`.
    MarshallOlkin { a: f64, base: Box<DistSpec> },
    /// Min of a Harris(u, j) number of iid copies of the base.
    HarrisMin { u: f64, j: u32, base: Box<DistSpec> },
    /// Max of a Harris(u, j) number of iid copies of the base.
    HarrisMax { u: f64, j: u32, base: Box<DistSpec> },
    /// Max of `N` iid copies of the base, `N` having the given PGF:
    /// cdf `Q(F(x))`.
    PgfMax { pgf: PgfSpec, base: Box<DistSpec> },
    /// Min of `N` iid copies of the base: survival `Q(S(x))`.
    PgfMin { pgf: PgfSpec, base: Box<DistSpec> },
    /// Step function over a sorted sample.
    Empirical { samples: Vec<f64> },
}

fn harris_pgf(u: f64, j: u32) -> PgfSpec {
    PgfSpec::harris(u, j).expect("harris parameters validated at construction")
}

impl DistSpec {
    pub fn pareto_iii(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Domain(format!("pareto alpha must be > 0, got {alpha}")));
        }
        Ok(Self::ParetoIII { alpha })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::Domain(format!("exponential rate must be > 0, got {rate}")));
        }
        Ok(Self::Exponential { rate })
    }

    pub fn uniform01() -> Self {
        Self::Uniform01
    }

    pub fn marshall_olkin(base: DistSpec, a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Domain(format!("marshall-olkin parameter must be > 0, got {a}")));
        }
        Ok(Self::MarshallOlkin { a, base: Box::new(base) })
    }

    pub fn harris_min_extended(base: DistSpec, u: f64, j: u32) -> Result<Self> {
        PgfSpec::harris(u, j)?;
        Ok(Self::HarrisMin { u, j, base: Box::new(base) })
    }

    pub fn harris_max_extended(base: DistSpec, u: f64, j: u32) -> Result<Self> {
        PgfSpec::harris(u, j)?;
        Ok(Self::HarrisMax { u, j, base: Box::new(base) })
    }

    pub fn pgf_max_transform(pgf: PgfSpec, base: DistSpec) -> Self {
        Self::PgfMax { pgf, base: Box::new(base) }
    }

    pub fn pgf_min_transform(pgf: PgfSpec, base: DistSpec) -> Self {
        Self::PgfMin { pgf, base: Box::new(base) }
    }

    pub fn empirical(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Domain("empirical sample must be nonempty".into()));
        }
        if samples.iter().any(|v| v.is_nan()) {
            return Err(Error::Domain("empirical sample contains NaN".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self::Empirical { samples })
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::ParetoIII { .. } | Self::Exponential { .. } => 1.0 - self.survival(x),
            Self::Uniform01 => x.clamp(0.0, 1.0),
            Self::MarshallOlkin { .. } | Self::HarrisMin { .. } | Self::PgfMin { .. } => {
                1.0 - self.survival(x)
            }
            Self::HarrisMax { u, j, base } => {
                pgf_of(&harris_pgf(*u, *j), base.cdf(x))
            }
            Self::PgfMax { pgf, base } => pgf_of(pgf, base.cdf(x)),
            Self::Empirical { samples } => {
                samples.partition_point(|v| *v <= x) as f64 / samples.len() as f64
            }
        }
    }

    /// `P(X > x)`.
    pub fn survival(&self, x: f64) -> f64 {
        match self {
            Self::ParetoIII { alpha } => {
                if x <= 0.0 {
                    1.0
                } else {
                    1.0 / (1.0 + x.powf(*alpha))
                }
            }
            Self::Exponential { rate } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-rate * x).exp()
                }
            }
            Self::MarshallOlkin { a, base } => {
                let s = base.survival(x);
                a * s / (1.0 - (1.0 - a) * s)
            }
            Self::HarrisMin { u, j, base } => {
                pgf_of(&harris_pgf(*u, *j), base.survival(x))
            }
            Self::PgfMin { pgf, base } => pgf_of(pgf, base.survival(x)),
            Self::Uniform01
            | Self::HarrisMax { .. }
            | Self::PgfMax { .. }
            | Self::Empirical { .. } => 1.0 - self.cdf(x),
        }
    }

    /// Solves `cdf(x) = q` for interior `q`. Transform kinds reduce in
    /// closed form through the base quantile, with any root finding
    /// confined to the monotone PGF inversion.
    pub fn quantile(&self, q: f64, tol: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Domain(format!("quantile level must be in (0, 1), got {q}")));
        }
        match self {
            Self::ParetoIII { alpha } => Ok((q / (1.0 - q)).powf(1.0 / alpha)),
            Self::Exponential { rate } => Ok(-(-q).ln_1p() / rate),
            Self::Uniform01 => Ok(q),
            Self::MarshallOlkin { a, base } => {
                // target survival t solves t = aS/(1-(1-a)S) for the base S
                let t = 1.0 - q;
                let s_base = t / (a + (1.0 - a) * t);
                base.quantile(1.0 - s_base, tol)
            }
            Self::HarrisMin { u, j, base } => {
                let s_base = harris_pgf(*u, *j).invert(1.0 - q, tol)?;
                base.quantile(1.0 - s_base, tol)
            }
            Self::HarrisMax { u, j, base } => {
                base.quantile(harris_pgf(*u, *j).invert(q, tol)?, tol)
            }
            Self::PgfMax { pgf, base } => base.quantile(pgf.invert(q, tol)?, tol),
            Self::PgfMin { pgf, base } => {
                let s_base = pgf.invert(1.0 - q, tol)?;
                base.quantile(1.0 - s_base, tol)
            }
            Self::Empirical { samples } => {
                let n = samples.len();
                let idx = ((q * n as f64).ceil() as usize).clamp(1, n);
                Ok(samples[idx - 1])
            }
        }
    }

    /// Inverse-transform sampling with a seeded ChaCha8 stream; identical
    /// `(dist, n, seed)` triples give identical output.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        if n < 1 {
            return Err(Error::Domain("sample size must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let u: f64 = rng.sample(Open01);
                self.quantile(u, DEFAULT_QUANTILE_TOL)
            })
            .collect()
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::ParetoIII { .. } => "pareto_iii",
            Self::Exponential { .. } => "exponential",
            Self::Uniform01 => "uniform01",
            Self::MarshallOlkin { .. } => "marshall_olkin",
            Self::HarrisMin { .. } => "harris_min",
            Self::HarrisMax { .. } => "harris_max",
            Self::PgfMax { .. } => "pgf_max",
            Self::PgfMin { .. } => "pgf_min",
            Self::Empirical { .. } => "empirical",
        }
    }
}

/// PGF evaluation on a probability that is guaranteed in `[0, 1]` up to
/// fp noise.
fn pgf_of(pgf: &PgfSpec, p: f64) -> f64 {
    pgf.eval(p.clamp(0.0, 1.0)).expect("clamped argument is in domain")
}

/// Wire format mirroring the PGF convention:
/// `{"kind": ..., "params": [...], "base": {...}, "pgf": {...}}`.
#[derive(Serialize, Deserialize)]
struct RawDist {
    kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base: Option<Box<RawDist>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pgf: Option<PgfSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    samples: Option<Vec<f64>>,
}

impl From<DistSpec> for RawDist {
    fn from(dist: DistSpec) -> Self {
        let raw = |kind: &str, params: Vec<f64>, base: Option<DistSpec>, pgf: Option<PgfSpec>| RawDist {
            kind: kind.into(),
            params,
            base: base.map(|b| Box::new(b.into())),
            pgf,
            samples: None,
        };
        match dist {
            DistSpec::ParetoIII { alpha } => raw("pareto_iii", vec![alpha], None, None),
            DistSpec::Exponential { rate } => raw("exponential", vec![rate], None, None),
            DistSpec::Uniform01 => raw("uniform01", vec![], None, None),
            DistSpec::MarshallOlkin { a, base } => raw("marshall_olkin", vec![a], Some(*base), None),
            DistSpec::HarrisMin { u, j, base } => {
                raw("harris_min", vec![u, f64::from(j)], Some(*base), None)
            }
            DistSpec::HarrisMax { u, j, base } => {
                raw("harris_max", vec![u, f64::from(j)], Some(*base), None)
            }
            DistSpec::PgfMax { pgf, base } => raw("pgf_max", vec![], Some(*base), Some(pgf)),
            DistSpec::PgfMin { pgf, base } => raw("pgf_min", vec![], Some(*base), Some(pgf)),
            DistSpec::Empirical { samples } => RawDist {
                kind: "empirical".into(),
                params: vec![],
                base: None,
                pgf: None,
                samples: Some(samples),
            },
        }
    }
}

impl TryFrom<RawDist> for DistSpec {
    type Error = String;

    fn try_from(raw: RawDist) -> std::result::Result<Self, String> {
        let want = |n: usize| -> std::result::Result<(), String> {
            if raw.params.len() == n {
                Ok(())
            } else {
                Err(format!("kind '{}' expects {} params, got {}", raw.kind, n, raw.params.len()))
            }
        };
        let take_base = |raw_base: Option<Box<RawDist>>| -> std::result::Result<DistSpec, String> {
            raw_base
                .ok_or_else(|| "transform kinds need a 'base' distribution".to_string())
                .and_then(|b| DistSpec::try_from(*b))
        };
        let int_param = |value: f64, what: &str| -> std::result::Result<u32, String> {
            if value.fract() == 0.0 && (1.0..=u32::MAX as f64).contains(&value) {
                Ok(value as u32)
            } else {
                Err(format!("{what} must be a positive integer, got {value}"))
            }
        };
        let built = match raw.kind.as_str() {
            "pareto_iii" => {
                want(1)?;
                DistSpec::pareto_iii(raw.params[0])
            }
            "exponential" => {
                want(1)?;
                DistSpec::exponential(raw.params[0])
            }
            "uniform01" => Ok(DistSpec::uniform01()),
            "marshall_olkin" => {
                want(1)?;
                let base = take_base(raw.base)?;
                DistSpec::marshall_olkin(base, raw.params[0])
            }
            "harris_min" => {
                want(2)?;
                let base = take_base(raw.base)?;
                DistSpec::harris_min_extended(base, raw.params[0], int_param(raw.params[1], "harris j")?)
            }
            "harris_max" => {
                want(2)?;
                let base = take_base(raw.base)?;
                DistSpec::harris_max_extended(base, raw.params[0], int_param(raw.params[1], "harris j")?)
            }
            "pgf_max" => {
                let base = take_base(raw.base)?;
                let pgf = raw.pgf.ok_or("pgf transform kinds need a 'pgf' field")?;
                Ok(DistSpec::pgf_max_transform(pgf, base))
            }
            "pgf_min" => {
                let base = take_base(raw.base)?;
                let pgf = raw.pgf.ok_or("pgf transform kinds need a 'pgf' field")?;
                Ok(DistSpec::pgf_min_transform(pgf, base))
            }
            "empirical" => {
                let samples = raw.samples.ok_or("empirical kind needs a 'samples' field")?;
                DistSpec::empirical(samples)
            }
            other => return Err(format!("unknown distribution kind '{other}'")),
        };
        built.map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn zoo() -> Vec<DistSpec> {
        let pareto = DistSpec::pareto_iii(2.0).unwrap();
        let expo = DistSpec::exponential(1.0).unwrap();
        let geo = PgfSpec::geometric(0.5).unwrap();
        vec![
            pareto.clone(),
            expo.clone(),
            DistSpec::uniform01(),
            DistSpec::marshall_olkin(expo.clone(), 2.0).unwrap(),
            DistSpec::harris_min_extended(DistSpec::uniform01(), 2.0, 2).unwrap(),
            DistSpec::harris_max_extended(DistSpec::uniform01(), 2.0, 2).unwrap(),
            DistSpec::pgf_max_transform(geo.clone(), pareto),
            DistSpec::pgf_min_transform(geo, expo),
        ]
    }

    #[test]
    fn pareto_hand_values() {
        let p = DistSpec::pareto_iii(2.0).unwrap();
        assert_abs_diff_eq!(p.cdf(1.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.quantile(0.5, 1e-12).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.quantile(0.2, 1e-12).unwrap(), 0.5, epsilon = 1e-12);
        assert_eq!(p.cdf(-1.0), 0.0);
    }

    #[test]
    fn uniform_quantile_is_identity() {
        let u = DistSpec::uniform01();
        assert_abs_diff_eq!(u.quantile(0.73, 1e-12).unwrap(), 0.73, epsilon = 1e-15);
    }

    #[test]
    fn harris_max_extension_matches_pgf_value() {
        let d = DistSpec::harris_max_extended(DistSpec::uniform01(), 2.0, 2).unwrap();
        assert_abs_diff_eq!(d.cdf(0.5), 0.5 / 1.75f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn harris_min_extension_matches_pgf_value() {
        let d = DistSpec::harris_min_extended(DistSpec::uniform01(), 2.0, 2).unwrap();
        assert_abs_diff_eq!(d.survival(0.5), 0.5 / 1.75f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn marshall_olkin_hand_value() {
        let d = DistSpec::marshall_olkin(DistSpec::exponential(1.0).unwrap(), 2.0).unwrap();
        let x = 2.0f64.ln();
        assert_abs_diff_eq!(d.survival(x), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.cdf(x), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn marshall_olkin_with_unit_parameter_is_identity() {
        let base = DistSpec::pareto_iii(2.0).unwrap();
        let d = DistSpec::marshall_olkin(base.clone(), 1.0).unwrap();
        for i in 0..50 {
            let x = i as f64 * 0.1;
            assert_abs_diff_eq!(d.survival(x), base.survival(x), epsilon = 1e-15);
        }
    }

    #[test]
    fn geometric_min_transform_hand_value() {
        // survival 2/3 at x = 1/3 under the uniform base
        let d = DistSpec::pgf_min_transform(
            PgfSpec::geometric(0.25).unwrap(),
            DistSpec::uniform01(),
        );
        assert_abs_diff_eq!(d.survival(1.0 / 3.0), 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn marshall_olkin_composition_multiplies_parameters() {
        let base = DistSpec::pareto_iii(2.0).unwrap();
        for (a, b) in [(0.5, 0.5), (0.5, 2.0), (2.0, 3.0), (3.0, 0.5)] {
            let nested =
                DistSpec::marshall_olkin(DistSpec::marshall_olkin(base.clone(), a).unwrap(), b)
                    .unwrap();
            let direct = DistSpec::marshall_olkin(base.clone(), a * b).unwrap();
            for i in 0..=200 {
                let x = base.quantile(0.005 + 0.99 * i as f64 / 200.0, 1e-12).unwrap();
                assert!(
                    (nested.survival(x) - direct.survival(x)).abs() <= 1e-12,
                    "a={a}, b={b}, x={x}"
                );
            }
        }
    }

    #[test]
    fn survival_complements_cdf_everywhere() {
        for d in zoo() {
            for i in 0..=200 {
                let x = -0.5 + 3.0 * i as f64 / 200.0;
                assert!(
                    (d.cdf(x) + d.survival(x) - 1.0).abs() <= 1e-14,
                    "{}: x={x}",
                    d.kind_name()
                );
            }
        }
    }

    #[test]
    fn quantile_inverts_cdf_on_the_interior() {
        for d in zoo() {
            for i in 1..20 {
                let q = i as f64 / 20.0;
                let x = d.quantile(q, 1e-12).unwrap();
                assert!((d.cdf(x) - q).abs() <= 1e-8, "{}: q={q}, x={x}", d.kind_name());
            }
        }
    }

    #[test]
    fn max_transform_lowers_the_cdf() {
        let q = PgfSpec::geometric(0.5).unwrap();
        let base = DistSpec::pareto_iii(2.0).unwrap();
        let d = DistSpec::pgf_max_transform(q.clone(), base.clone());
        let dual = DistSpec::pgf_min_transform(q, base.clone());
        for i in 0..=100 {
            let x = 0.05 * i as f64;
            assert!(d.cdf(x) <= base.cdf(x) + 1e-15);
            assert!(dual.survival(x) <= base.survival(x) + 1e-15);
        }
    }

    #[test]
    fn empirical_step_function() {
        let d = DistSpec::empirical(vec![3.0, 1.0, 2.0]).unwrap();
        assert_eq!(d.cdf(0.5), 0.0);
        assert_abs_diff_eq!(d.cdf(1.0), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.cdf(2.5), 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(d.cdf(3.0), 1.0);
        assert_abs_diff_eq!(d.quantile(0.5, 1e-12).unwrap(), 2.0, epsilon = 1e-15);
        assert!(DistSpec::empirical(vec![]).is_err());
        assert!(DistSpec::empirical(vec![f64::NAN]).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_calibrated() {
        let u = DistSpec::uniform01();
        let a = u.sample(100_000, 7).unwrap();
        let b = u.sample(100_000, 7).unwrap();
        assert_eq!(a, b);
        let mean: f64 = a.iter().sum::<f64>() / a.len() as f64;
        assert!((mean - 0.5).abs() < 0.005, "mean = {mean}");

        let p = DistSpec::pareto_iii(2.0).unwrap();
        let xs = p.sample(100_000, 11).unwrap();
        let below_one = xs.iter().filter(|&&x| x <= 1.0).count() as f64 / xs.len() as f64;
        assert!((below_one - 0.5).abs() < 0.006, "ecdf(1) = {below_one}");
    }

    #[test]
    fn quantile_rejects_boundary_levels() {
        let d = DistSpec::uniform01();
        assert!(d.quantile(0.0, 1e-12).is_err());
        assert!(d.quantile(1.0, 1e-12).is_err());
    }

    #[test]
    fn json_wire_format_roundtrips() {
        let d = DistSpec::harris_min_extended(DistSpec::uniform01(), 2.0, 2).unwrap();
        let json = serde_json::to_value(&d).unwrap();
        assert_eq!(json["kind"], "harris_min");
        assert_eq!(json["params"], serde_json::json!([2.0, 2.0]));
        assert_eq!(json["base"]["kind"], "uniform01");
        let back: DistSpec = serde_json::from_value(json).unwrap();
        assert_eq!(back, d);

        let transformed = DistSpec::pgf_max_transform(
            PgfSpec::geometric(0.25).unwrap(),
            DistSpec::pareto_iii(2.0).unwrap(),
        );
        let json = serde_json::to_value(&transformed).unwrap();
        assert_eq!(json["pgf"]["family"], "geometric");
        let back: DistSpec = serde_json::from_value(json).unwrap();
        assert_eq!(back, transformed);

        assert!(serde_json::from_str::<DistSpec>(r#"{"kind":"pareto_iii","params":[-1.0]}"#).is_err());
    }
}
