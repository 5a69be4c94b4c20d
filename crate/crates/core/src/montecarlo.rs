//! Independent simulation oracle: sample the count `N` from a PGF, form
//! empirical extremes of `N` iid draws, and measure agreement with the
//! analytic transforms by Kolmogorov-Smirnov distance.
//!
//! Reproducibility contract: the uniform generator is ChaCha8 (algorithm
//! id reported in [`RNG_ALGORITHM`]); every trial runs on its own stream
//! derived from the trial index, so a parallel executor would reproduce
//! the sequential output exactly.

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::DistSpec;
use crate::error::{Error, Result};
use crate::extremes::StabilityKind;
use crate::pgf::{Family, PgfSpec};

/// Published identifier of the uniform generator.
pub const RNG_ALGORITHM: &str = "chacha8";

/// Tail mass a truncated count sampler is allowed to leave behind.
pub const TRUNCATION_TAIL_LIMIT: f64 = 1e-6;

/// Above this count the extreme of `N` uniforms is drawn in one shot as
/// `V^(1/N)` instead of looping over `N` draws. Both routes are exact in
/// distribution (the quantile transform is monotone, so the max of
/// transformed uniforms is the transform of the max), but the one-shot
/// route keeps heavy-tailed counting laws affordable at any `N`.
const EXTREME_LOOP_MAX: u64 = 4096;

/// Monte Carlo run description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub trials: usize,
    pub seed: u64,
    pub pgf: PgfSpec,
    pub dist: DistSpec,
    pub kind: StabilityKind,
    #[serde(default = "default_truncation")]
    pub n_truncation: usize,
    #[serde(default = "default_ks_alpha")]
    pub ks_alpha: f64,
    /// Explicit KS pass tolerance; when absent, derived from `ks_alpha`
    /// and the trial budget (2.3x the asymptotic quantile).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_tolerance: Option<f64>,
}

fn default_truncation() -> usize {
    512
}

fn default_ks_alpha() -> f64 {
    0.01
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::Domain("trials must be >= 1".into()));
        }
        if self.n_truncation < 1 {
            return Err(Error::Domain("n_truncation must be >= 1".into()));
        }
        if !(self.ks_alpha > 0.0 && self.ks_alpha < 1.0) {
            return Err(Error::Domain(format!("ks_alpha must be in (0, 1), got {}", self.ks_alpha)));
        }
        Ok(())
    }

    /// The KS tolerance this run is judged against.
    pub fn resolved_ks_tolerance(&self) -> f64 {
        self.ks_tolerance
            .unwrap_or_else(|| 2.3 * ks_asymptotic_quantile(self.ks_alpha) / (self.trials as f64).sqrt())
    }
}

/// The `c(alpha)` in the asymptotic KS acceptance bound `c(alpha)/sqrt(n)`.
pub fn ks_asymptotic_quantile(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

/// Draws counts for the law with the given PGF.
///
/// The geometric family inverts its cdf in closed form. Harris counts use
/// the decomposition `N = 1 + j M` with `M` negative binomial (shape
/// `1/j`, success `1/u`), sampled by sequential pmf inversion. Shaked
/// counts use `N = m K` where `P(K > k)` has a closed product form,
/// inverted with a cached head table plus a log-gamma binary search for
/// the polynomial tail. Everything else falls back to inverse cdf over
/// the truncated, renormalized coefficient extraction.
pub fn sample_count(pgf: &PgfSpec, seed: u64, n: usize) -> Result<Vec<u64>> {
    if n < 1 {
        return Err(Error::Domain("sample size must be >= 1".into()));
    }
    let sampler = CountSampler::prepare(pgf, default_truncation())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| sampler.draw(&mut rng)).collect())
}

/// Prepared count sampler; building one may extract coefficients once.
pub enum CountSampler {
    Geometric { p: f64 },
    Harris { u: f64, j: u64 },
    Shaked { m: u64, head: SibuyaHead },
    Mixture { weight: f64, first: Box<CountSampler>, second: Box<CountSampler> },
    /// Compound sum: draw the stage count from `outer`, then sum that many
    /// draws of `inner`.
    Compound { inner: Box<CountSampler>, outer: Box<CountSampler> },
    Truncated { cumulative: Vec<f64> },
}

/// Cumulative head of the Shaked count factor `K` with survival
/// `P(K > k) = prod_{i<=k} (1 - gamma/i)`, `gamma = 1/m`.
pub struct SibuyaHead {
    gamma: f64,
    cumulative: Vec<f64>,
}

impl SibuyaHead {
    const HEAD: usize = 64;

    fn new(gamma: f64) -> Self {
        let mut cumulative = Vec::with_capacity(Self::HEAD);
        let mut survival = 1.0;
        for k in 1..=Self::HEAD {
            survival *= 1.0 - gamma / k as f64;
            cumulative.push(1.0 - survival);
        }
        Self { gamma, cumulative }
    }

    fn survival(&self, k: f64) -> f64 {
        // Gamma(k + 1 - gamma) / (Gamma(1 - gamma) Gamma(k + 1))
        (libm::lgamma(k + 1.0 - self.gamma) - libm::lgamma(1.0 - self.gamma) - libm::lgamma(k + 1.0))
            .exp()
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.sample(Open01);
        match self.cumulative.partition_point(|&c| c < u) {
            idx if idx < self.cumulative.len() => (idx + 1) as u64,
            _ => {
                // tail: binary-search the closed-form survival for the
                // smallest k with P(K > k) <= 1 - u
                let target = 1.0 - u;
                let mut hi = (Self::HEAD * 2) as u64;
                // beyond 2^62 the survival is ~1e-10 and f64 inversion is
                // meaningless anyway; saturate there
                while self.survival(hi as f64) > target && hi < (1 << 62) {
                    hi *= 2;
                }
                let mut lo = hi / 2;
                while hi - lo > 1 {
                    let mid = lo + (hi - lo) / 2;
                    if self.survival(mid as f64) > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
        }
    }
}

impl CountSampler {
    pub fn prepare(pgf: &PgfSpec, n_truncation: usize) -> Result<Self> {
        Ok(match pgf.family() {
            Family::Geometric { p } if *p > 0.0 && *p <= 1.0 => Self::Geometric { p: *p },
            Family::Harris { u, j } if *u >= 1.0 && j.fract() == 0.0 && *j >= 1.0 => {
                Self::Harris { u: *u, j: *j as u64 }
            }
            Family::Shaked { m } if m.fract() == 0.0 && *m >= 1.0 => {
                Self::Shaked { m: *m as u64, head: SibuyaHead::new(1.0 / *m) }
            }
            Family::Mixture { weight, components } => Self::Mixture {
                weight: *weight,
                first: Box::new(Self::prepare(&components.0, n_truncation)?),
                second: Box::new(Self::prepare(&components.1, n_truncation)?),
            },
            Family::Composite { stages } => {
                let mut iter = stages.iter();
                let first = Self::prepare(iter.next().expect("composite is nonempty"), n_truncation)?;
                iter.try_fold(first, |inner, stage| {
                    Ok(Self::Compound {
                        inner: Box::new(inner),
                        outer: Box::new(Self::prepare(stage, n_truncation)?),
                    })
                })?
            }
            _ => Self::prepare_truncated(pgf, n_truncation)?,
        })
    }

    /// Inverse cdf over the truncated extracted pmf, renormalized. Refuses
    /// to proceed when the unaccounted tail exceeds the configured limit.
    ///
    /// Extraction runs at radius 0.99, not the library default 0.9: the
    /// sampler needs absolute pmf accuracy out to `n_truncation`, and the
    /// roundoff amplification `radius^(-n)` at n = 512 only stays harmless
    /// with the contour close to the unit circle.
    pub fn prepare_truncated(pgf: &PgfSpec, n_truncation: usize) -> Result<Self> {
        let extraction = pgf.coefficients(n_truncation, 0.99)?;
        if extraction.tail_mass.abs() > TRUNCATION_TAIL_LIMIT {
            return Err(Error::Truncation {
                tail_mass: extraction.tail_mass,
                limit: TRUNCATION_TAIL_LIMIT,
                n_truncation,
            });
        }
        let total: f64 = extraction.coefficients.iter().map(|c| c.max(0.0)).sum();
        let mut acc = 0.0;
        let cumulative = extraction
            .coefficients
            .iter()
            .map(|c| {
                acc += c.max(0.0) / total;
                acc
            })
            .collect();
        Ok(Self::Truncated { cumulative })
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> u64 {
        match self {
            Self::Geometric { p } => {
                if *p == 1.0 {
                    return 1;
                }
                let v: f64 = rng.sample(Open01);
                // P(N = n) = p (1-p)^(n-1) on {1, 2, ...}
                let n = (v.ln() / (1.0 - p).ln()).ceil();
                if n < 1.0 {
                    1
                } else {
                    n as u64
                }
            }
            Self::Harris { u, j } => 1 + j * negative_binomial(rng, 1.0 / *j as f64, 1.0 / u),
            Self::Shaked { m, head } => m.saturating_mul(head.draw(rng)),
            Self::Mixture { weight, first, second } => {
                let v: f64 = rng.sample(Open01);
                if v < *weight {
                    first.draw(rng)
                } else {
                    second.draw(rng)
                }
            }
            Self::Compound { inner, outer } => {
                let stages = outer.draw(rng);
                (0..stages).map(|_| inner.draw(rng)).sum()
            }
            Self::Truncated { cumulative } => {
                let v: f64 = rng.sample(Open01);
                (cumulative.partition_point(|&c| c < v) + 1).min(cumulative.len()) as u64
            }
        }
    }
}

/// Negative binomial on {0, 1, 2, ...} with real shape `r` and success
/// probability `pi`, by sequential inversion of the pmf recurrence
/// `P(M = m+1) = P(M = m) (r + m) (1 - pi) / (m + 1)`.
fn negative_binomial<R: Rng>(rng: &mut R, r: f64, pi: f64) -> u64 {
    let v: f64 = rng.sample(Open01);
    let mut pmf = pi.powf(r);
    let mut cdf = pmf;
    let mut m = 0u64;
    while cdf < v && m < 1 << 32 {
        pmf *= (r + m as f64) * (1.0 - pi) / (m as f64 + 1.0);
        cdf += pmf;
        m += 1;
    }
    m
}

/// Runs the simulation: per trial draws `N`, then the max or min of `N`
/// iid inverse-transform draws from the configured distribution. Returns
/// the sorted sample as an empirical distribution.
pub fn simulate_extreme(config: &SimConfig) -> Result<DistSpec> {
    config.validate()?;
    let sampler = CountSampler::prepare(&config.pgf, config.n_truncation)?;
    let mut values = Vec::with_capacity(config.trials);
    for trial in 0..config.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(trial as u64);
        let n = sampler.draw(&mut rng);
        let u_extreme = extreme_uniform(&mut rng, n, config.kind);
        values.push(config.dist.quantile(u_extreme, 1e-12)?);
    }
    DistSpec::empirical(values)
}

/// The max (resp. min) of `n` iid uniforms, drawn literally for small `n`
/// and through the exact one-shot power transform for large `n`.
fn extreme_uniform<R: Rng>(rng: &mut R, n: u64, kind: StabilityKind) -> f64 {
    debug_assert!(n >= 1);
    if n <= EXTREME_LOOP_MAX {
        let mut extreme: f64 = rng.sample(Open01);
        for _ in 1..n {
            let u: f64 = rng.sample(Open01);
            extreme = match kind {
                StabilityKind::Max => extreme.max(u),
                StabilityKind::Min => extreme.min(u),
            };
        }
        extreme
    } else {
        let v: f64 = rng.sample(Open01);
        let root = (v.ln() / n as f64).exp();
        match kind {
            StabilityKind::Max => root,
            StabilityKind::Min => 1.0 - root,
        }
        .clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
    }
}

/// Two-sided Kolmogorov-Smirnov distance between an empirical sample and
/// a theoretical distribution.
pub fn ks_distance(empirical: &DistSpec, theoretical: &DistSpec) -> Result<f64> {
    let DistSpec::Empirical { samples } = empirical else {
        return Err(Error::Domain("ks_distance needs an empirical first argument".into()));
    };
    let n = samples.len() as f64;
    let mut worst = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let f = theoretical.cdf(x);
        worst = worst.max((f - i as f64 / n).abs());
        worst = worst.max(((i + 1) as f64 / n - f).abs());
    }
    Ok(worst)
}

/// The analytic transform a simulation is expected to agree with.
pub fn analytic_transform(config: &SimConfig) -> DistSpec {
    match config.kind {
        StabilityKind::Max => DistSpec::pgf_max_transform(config.pgf.clone(), config.dist.clone()),
        StabilityKind::Min => DistSpec::pgf_min_transform(config.pgf.clone(), config.dist.clone()),
    }
}
