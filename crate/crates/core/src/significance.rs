//! Null distributions, empirical p-values, variance estimation, and the
//! false-positive calibration experiment.
//!
//! Three ways of building a null ensemble are supported:
//!
//! * random permutation of each field (destroys spatial structure),
//! * fresh draws from a known spectral generator (only for synthetic grids),
//! * constant-Moran's-I resampling (see [`crate::resample`]).
//!
//! With cross-pair pooling, `N_p` resamples of x and `N_p` of y yield the
//! `N_p (N_p - 1) / 2` statistics `stat(x_i, y_j)` for `i < j`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{build_grid_queen, row_normalize, SpatialWeights};
use crate::moran::{check_len, moran_of, Field};
use crate::resample::{self, constant_copies, ResampleConfig};
use crate::rng;
use crate::stats::StatKind;
use crate::summary::{quantile_sorted, Summary};
use crate::synth::{generate_field, SynthConfig};

/// How null resamples are produced.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "kebab-case"))]
pub enum NullMethod {
    RandomPermutation,
    /// Draw new `rows x cols` fields with the generating spectral exponents.
    KnownGenerator {
        beta_x: f64,
        beta_y: f64,
        rows: usize,
        cols: usize,
    },
    ConstantI,
}

impl NullMethod {
    pub fn kind(&self) -> MethodKind {
        match self {
            NullMethod::RandomPermutation => MethodKind::RandomPermutation,
            NullMethod::KnownGenerator { .. } => MethodKind::KnownGenerator,
            NullMethod::ConstantI => MethodKind::ConstantI,
        }
    }
}

/// [`NullMethod`] without its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum MethodKind {
    RandomPermutation,
    KnownGenerator,
    ConstantI,
}

impl MethodKind {
    pub const ALL: [MethodKind; 3] = [
        MethodKind::RandomPermutation,
        MethodKind::KnownGenerator,
        MethodKind::ConstantI,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::RandomPermutation => "perm",
            MethodKind::KnownGenerator => "generator",
            MethodKind::ConstantI => "constant-i",
        }
    }

    fn stream_tag(self) -> u64 {
        match self {
            MethodKind::RandomPermutation => 101,
            MethodKind::KnownGenerator => 102,
            MethodKind::ConstantI => 103,
        }
    }

    /// Instantiates the method for fields synthesized with the given
    /// exponents on a `rows x cols` grid.
    pub fn for_synthetic(self, beta_x: f64, beta_y: f64, rows: usize, cols: usize) -> NullMethod {
        match self {
            MethodKind::RandomPermutation => NullMethod::RandomPermutation,
            MethodKind::KnownGenerator => NullMethod::KnownGenerator {
                beta_x,
                beta_y,
                rows,
                cols,
            },
            MethodKind::ConstantI => NullMethod::ConstantI,
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perm" | "permutation" | "random-permutation" => Ok(MethodKind::RandomPermutation),
            "generator" | "known-generator" => Ok(MethodKind::KnownGenerator),
            "constant-i" | "constant_i" | "constanti" => Ok(MethodKind::ConstantI),
            other => Err(Error::invalid(format!("unknown null method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Tail {
    /// Extremeness measured as distance from the null mean.
    #[default]
    TwoSided,
    Greater,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Pairing {
    /// All `(x_i, y_j)` with `i < j`.
    #[default]
    CrossPairs,
    /// `(x_i, y_i)`.
    Matched,
}

impl Pairing {
    pub fn value_count(self, n_samples: usize) -> usize {
        match self {
            Pairing::CrossPairs => n_samples * n_samples.saturating_sub(1) / 2,
            Pairing::Matched => n_samples,
        }
    }

    fn pairs(self, n_samples: usize) -> impl Iterator<Item = (usize, usize)> {
        let cross = matches!(self, Pairing::CrossPairs);
        (0..n_samples).flat_map(move |i| {
            let js = if cross { (i + 1)..n_samples } else { i..(i + 1) };
            js.map(move |j| (i, j))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SignificanceConfig {
    /// Resamples per field (`N_p`).
    pub n_samples: usize,
    pub method: NullMethod,
    pub stat: StatKind,
    pub tail: Tail,
    pub pairing: Pairing,
    pub resample: ResampleConfig,
    pub seed: u64,
}

impl SignificanceConfig {
    pub fn new(method: NullMethod, stat: StatKind) -> Self {
        Self {
            n_samples: 100,
            method,
            stat,
            tail: Tail::TwoSided,
            pairing: Pairing::CrossPairs,
            resample: ResampleConfig::default(),
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(Error::invalid("n_samples must be at least 2"));
        }
        self.resample.validate()
    }
}

/// Resampled copies of both fields.
#[derive(Debug, Clone, PartialEq)]
pub struct NullEnsemble {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    /// Constant-I resamples that missed the tolerance.
    pub non_converged: usize,
}

#[derive(Debug, Clone, Copy)]
enum Side {
    X,
    Y,
}

fn resample_one(
    values: &[f64],
    weights: &SpatialWeights,
    method: &NullMethod,
    side: Side,
    n_samples: usize,
    resample_config: &ResampleConfig,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, usize)> {
    let side_tag = match side {
        Side::X => 0,
        Side::Y => 1,
    };
    let seed = rng::derive_seed(seed, &[side_tag]);
    if let Some(copies) = constant_copies(values, n_samples) {
        return Ok((copies, 0));
    }
    match *method {
        NullMethod::RandomPermutation => Ok((
            (0..n_samples)
                .map(|k| resample::permuted(values, &mut rng::derived_rng(seed, &[k as u64])))
                .collect(),
            0,
        )),
        NullMethod::KnownGenerator {
            beta_x,
            beta_y,
            rows,
            cols,
        } => {
            check_len(rows * cols, values.len())?;
            let beta = match side {
                Side::X => beta_x,
                Side::Y => beta_y,
            };
            let fields = crate::exec::try_map_indexed(n_samples, |k| {
                let cfg = SynthConfig::new(rows, cols, beta, rng::derive_seed(seed, &[k as u64]));
                generate_field(&cfg).map(Field::into_values)
            })?;
            Ok((fields, 0))
        }
        NullMethod::ConstantI => {
            let field = Field::new(values.to_vec())?;
            let outcomes =
                resample::generate_ensemble(&field, weights, n_samples, &resample_config.with_seed(seed))?;
            let misses = outcomes.iter().filter(|o| !o.converged).count();
            Ok((outcomes.into_iter().map(|o| o.values.into_values()).collect(), misses))
        }
    }
}

/// Draws `n_samples` null resamples of each field.
pub fn null_ensemble(
    x: &Field,
    y: &Field,
    weights: &SpatialWeights,
    method: &NullMethod,
    n_samples: usize,
    resample_config: &ResampleConfig,
    seed: u64,
) -> Result<NullEnsemble> {
    x.check_len(weights)?;
    y.check_len(weights)?;
    let (xs, mx) = resample_one(x.values(), weights, method, Side::X, n_samples, resample_config, seed)?;
    let (ys, my) = resample_one(y.values(), weights, method, Side::Y, n_samples, resample_config, seed)?;
    Ok(NullEnsemble {
        x: xs,
        y: ys,
        non_converged: mx + my,
    })
}

/// Statistic values over the pairs of an ensemble.
pub fn null_values(stat: StatKind, pairing: Pairing, ensemble: &NullEnsemble) -> Result<Vec<f64>> {
    let n = ensemble.x.len().min(ensemble.y.len());
    let xs = ensemble.x.iter().map(|v| stat.prepare(v)).collect::<Result<Vec<_>>>()?;
    let ys = ensemble.y.iter().map(|v| stat.prepare(v)).collect::<Result<Vec<_>>>()?;
    pairing.pairs(n).map(|(i, j)| xs[i].evaluate(&ys[j])).collect()
}

/// Null distribution of `config.stat` for the pair `(x, y)`.
pub fn null_distribution(
    x: &Field,
    y: &Field,
    weights: &SpatialWeights,
    config: &SignificanceConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    let ensemble = null_ensemble(x, y, weights, &config.method, config.n_samples, &config.resample, config.seed)?;
    null_values(config.stat, config.pairing, &ensemble)
}

/// Add-one smoothed empirical p-value, `(1 + #extreme) / (1 + #null)`.
pub fn empirical_p_value(observed: f64, null: &[f64], tail: Tail) -> Result<f64> {
    if null.len() < 2 {
        return Err(Error::TooFewNullValues(null.len()));
    }
    let extreme = match tail {
        Tail::Greater => null.iter().filter(|&&v| v >= observed).count(),
        Tail::TwoSided => {
            let center = crate::numeric::sum(null.iter().copied()) / null.len() as f64;
            let dist = libm::fabs(observed - center);
            null.iter().filter(|&&v| libm::fabs(v - center) >= dist).count()
        }
    };
    Ok((1 + extreme) as f64 / (1 + null.len()) as f64)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TestReport {
    pub stat: StatKind,
    pub method: NullMethod,
    pub tail: Tail,
    pub pairing: Pairing,
    pub n_samples: usize,
    pub observed_stat: f64,
    pub p_value: f64,
    pub null_sample_count: usize,
    pub null_summary: Summary,
    pub moran_x: Option<f64>,
    pub moran_y: Option<f64>,
    pub non_converged: usize,
}

/// Compares the observed statistic against the configured null.
pub fn estimate_pvalue(
    x: &Field,
    y: &Field,
    weights: &SpatialWeights,
    config: &SignificanceConfig,
) -> Result<TestReport> {
    config.validate()?;
    let observed = config.stat.compute(x.values(), y.values())?;
    let ensemble = null_ensemble(x, y, weights, &config.method, config.n_samples, &config.resample, config.seed)?;
    let null = null_values(config.stat, config.pairing, &ensemble)?;
    let p_value = empirical_p_value(observed, &null, config.tail)?;
    Ok(TestReport {
        stat: config.stat,
        method: config.method,
        tail: config.tail,
        pairing: config.pairing,
        n_samples: config.n_samples,
        observed_stat: observed,
        p_value,
        null_sample_count: null.len(),
        null_summary: Summary::from_values(&null).ok_or(Error::TooFewNullValues(0))?,
        moran_x: moran_of(x.values(), weights).ok(),
        moran_y: moran_of(y.values(), weights).ok(),
        non_converged: ensemble.non_converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VarianceReport {
    pub method: NullMethod,
    pub pairing: Pairing,
    pub n_samples: usize,
    /// Mean of `numerator_i / denominator_i` on the observed data.
    pub observed_mean_ratio: f64,
    pub resampled: Summary,
    pub non_converged: usize,
}

/// Distribution of the site-mean ratio `mean_i(num_i / den_i)` when both
/// fields are resampled independently under the configured null.
pub fn estimate_variance(
    numerator: &Field,
    denominator: &Field,
    weights: &SpatialWeights,
    config: &SignificanceConfig,
) -> Result<VarianceReport> {
    config.validate()?;
    check_len(numerator.len(), denominator.len())?;
    if let Some(i) = denominator.values().iter().position(|&v| v <= 0.0) {
        return Err(Error::NonPositiveDenominator(i));
    }
    let mean_ratio = |num: &[f64], den: &[f64]| {
        crate::numeric::sum(num.iter().zip(den).map(|(a, b)| a / b)) / num.len() as f64
    };
    let ensemble = null_ensemble(
        numerator,
        denominator,
        weights,
        &config.method,
        config.n_samples,
        &config.resample,
        config.seed,
    )?;
    let values: Vec<f64> = config
        .pairing
        .pairs(config.n_samples)
        .map(|(i, j)| mean_ratio(&ensemble.x[i], &ensemble.y[j]))
        .collect();
    Ok(VarianceReport {
        method: config.method,
        pairing: config.pairing,
        n_samples: config.n_samples,
        observed_mean_ratio: mean_ratio(numerator.values(), denominator.values()),
        resampled: Summary::from_values(&values).ok_or(Error::TooFewNullValues(0))?,
        non_converged: ensemble.non_converged,
    })
}

/// Nominal levels reported by default.
pub const DEFAULT_ALPHAS: [f64; 11] = [0.001, 0.005, 0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5];

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CalibrationConfig {
    pub methods: Vec<MethodKind>,
    pub stats: Vec<StatKind>,
    pub n_samples: usize,
    pub tail: Tail,
    pub pairing: Pairing,
    pub resample: ResampleConfig,
    pub alphas: Vec<f64>,
    /// Bootstrap resamples of the per-trial p-values.
    pub bootstrap: usize,
    /// Central coverage of the bootstrap band.
    pub band: f64,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            methods: MethodKind::ALL.to_vec(),
            stats: vec![StatKind::Pearson],
            n_samples: 50,
            tail: Tail::TwoSided,
            pairing: Pairing::CrossPairs,
            resample: ResampleConfig::default(),
            alphas: DEFAULT_ALPHAS.to_vec(),
            bootstrap: 1000,
            band: 0.95,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CalibrationPoint {
    pub alpha: f64,
    /// Fraction of trials with `p <= alpha`.
    pub observed_rate: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CalibrationCurve {
    pub method: MethodKind,
    pub stat: StatKind,
    pub points: Vec<CalibrationPoint>,
    pub p_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CalibrationReport {
    pub beta_x: f64,
    pub beta_y: f64,
    pub rows: usize,
    pub cols: usize,
    pub trials: usize,
    pub n_samples: usize,
    pub tail: Tail,
    pub pairing: Pairing,
    pub epsilon: f64,
    pub band: f64,
    pub curves: Vec<CalibrationCurve>,
    pub non_converged: usize,
}

impl CalibrationReport {
    pub fn curve(&self, method: MethodKind, stat: StatKind) -> Option<&CalibrationCurve> {
        self.curves.iter().find(|c| c.method == method && c.stat == stat)
    }

    /// Observed false-positive rate at `alpha` (computed from the stored
    /// p-values, so any level can be queried).
    pub fn rate(&self, method: MethodKind, stat: StatKind, alpha: f64) -> Option<f64> {
        self.curve(method, stat).map(|c| rejection_rate(&c.p_values, alpha))
    }
}

fn rejection_rate(p_values: &[f64], alpha: f64) -> f64 {
    p_values.iter().filter(|&&p| p <= alpha).count() as f64 / p_values.len() as f64
}

/// Per-trial p-values, indexed `[method][stat]`.
fn calibration_trial(
    beta_x: f64,
    beta_y: f64,
    (rows, cols): (usize, usize),
    weights: &SpatialWeights,
    config: &CalibrationConfig,
    trial: usize,
) -> Result<(Vec<Vec<f64>>, usize)> {
    let trial_seed = rng::derive_seed(config.seed, &[trial as u64]);
    let x = generate_field(&SynthConfig::new(rows, cols, beta_x, rng::derive_seed(trial_seed, &[0])))?;
    let y = generate_field(&SynthConfig::new(rows, cols, beta_y, rng::derive_seed(trial_seed, &[1])))?;
    let observed = config
        .stats
        .iter()
        .map(|s| s.compute(x.values(), y.values()))
        .collect::<Result<Vec<_>>>()?;
    let mut misses = 0;
    let mut p = Vec::with_capacity(config.methods.len());
    for &kind in &config.methods {
        let method = kind.for_synthetic(beta_x, beta_y, rows, cols);
        let seed = rng::derive_seed(trial_seed, &[kind.stream_tag()]);
        let ensemble = null_ensemble(&x, &y, weights, &method, config.n_samples, &config.resample, seed)?;
        misses += ensemble.non_converged;
        let per_stat = config
            .stats
            .iter()
            .zip(&observed)
            .map(|(&s, &obs)| {
                let null = null_values(s, config.pairing, &ensemble)?;
                empirical_p_value(obs, &null, config.tail)
            })
            .collect::<Result<Vec<_>>>()?;
        p.push(per_stat);
    }
    Ok((p, misses))
}

/// Observed versus nominal false-positive rates on independent synthetic
/// field pairs.
pub fn calibrate(
    beta_x: f64,
    beta_y: f64,
    trials: usize,
    grid: (usize, usize),
    config: &CalibrationConfig,
) -> Result<CalibrationReport> {
    if trials < 50 {
        return Err(Error::invalid("calibration needs at least 50 trials"));
    }
    if config.n_samples < 2 {
        return Err(Error::invalid("n_samples must be at least 2"));
    }
    if config.methods.is_empty() || config.stats.is_empty() {
        return Err(Error::invalid("calibration needs at least one method and one statistic"));
    }
    if config.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::invalid("alphas must lie in [0, 1]"));
    }
    if !(config.band > 0.0 && config.band < 1.0) {
        return Err(Error::invalid("band must lie in (0, 1)"));
    }
    config.resample.validate()?;
    SynthConfig::new(grid.0, grid.1, beta_x, 0).validate()?;
    SynthConfig::new(grid.0, grid.1, beta_y, 0).validate()?;
    let weights = row_normalize(&build_grid_queen(grid.0, grid.1)?)?;

    let per_trial = crate::exec::try_map_indexed(trials, |t| {
        calibration_trial(beta_x, beta_y, grid, &weights, config, t)
    })?;
    let non_converged = per_trial.iter().map(|(_, m)| m).sum();

    let mut alphas = config.alphas.clone();
    alphas.sort_by(f64::total_cmp);
    let mut curves = Vec::new();
    for (mi, &method) in config.methods.iter().enumerate() {
        for (si, &stat) in config.stats.iter().enumerate() {
            let p_values: Vec<f64> = per_trial.iter().map(|(p, _)| p[mi][si]).collect();
            let bands = bootstrap_bands(
                &p_values,
                &alphas,
                config.bootstrap,
                config.band,
                rng::derive_seed(config.seed, &[u64::MAX, mi as u64, si as u64]),
            );
            let points = alphas
                .iter()
                .zip(bands)
                .map(|(&alpha, (lower, upper))| {
                    let rate = rejection_rate(&p_values, alpha);
                    CalibrationPoint {
                        alpha,
                        observed_rate: rate,
                        lower: lower.min(rate),
                        upper: upper.max(rate),
                    }
                })
                .collect();
            curves.push(CalibrationCurve {
                method,
                stat,
                points,
                p_values,
            });
        }
    }
    Ok(CalibrationReport {
        beta_x,
        beta_y,
        rows: grid.0,
        cols: grid.1,
        trials,
        n_samples: config.n_samples,
        tail: config.tail,
        pairing: config.pairing,
        epsilon: config.resample.epsilon,
        band: config.band,
        curves,
        non_converged,
    })
}

/// Percentile bands of the rejection rate at each alpha, from bootstrap
/// resamples of the trial p-values. The same resamples are used for every
/// alpha, so the band edges are monotone in alpha.
fn bootstrap_bands(p_values: &[f64], alphas: &[f64], resamples: usize, band: f64, seed: u64) -> Vec<(f64, f64)> {
    if resamples == 0 {
        return alphas.iter().map(|&a| (rejection_rate(p_values, a), rejection_rate(p_values, a))).collect();
    }
    let n = p_values.len();
    let mut rng = rng::rng_from(seed);
    let mut rates = vec![Vec::with_capacity(resamples); alphas.len()];
    let mut draw = vec![0.0; n];
    for _ in 0..resamples {
        for d in draw.iter_mut() {
            *d = p_values[rng.random_range(0..n)];
        }
        for (k, &alpha) in alphas.iter().enumerate() {
            rates[k].push(rejection_rate(&draw, alpha));
        }
    }
    let lo_q = 0.5 * (1.0 - band);
    let hi_q = 1.0 - lo_q;
    rates
        .into_iter()
        .map(|mut r| {
            r.sort_by(f64::total_cmp);
            (quantile_sorted(&r, lo_q), quantile_sorted(&r, hi_q))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(r: usize, c: usize) -> SpatialWeights {
        row_normalize(&build_grid_queen(r, c).unwrap()).unwrap()
    }

    fn synth(r: usize, c: usize, beta: f64, seed: u64) -> Field {
        generate_field(&SynthConfig::new(r, c, beta, seed)).unwrap()
    }

    #[test]
    fn cross_pair_counts() {
        assert_eq!(Pairing::CrossPairs.value_count(100), 4950);
        assert_eq!(Pairing::CrossPairs.pairs(100).count(), 4950);
        assert_eq!(Pairing::CrossPairs.pairs(2).collect::<Vec<_>>(), vec![(0, 1)]);
        assert_eq!(Pairing::Matched.pairs(3).count(), 3);

        let w = grid(5, 5);
        let (x, y) = (synth(5, 5, 1.0, 1), synth(5, 5, 1.0, 2));
        let mut config = SignificanceConfig::new(NullMethod::RandomPermutation, StatKind::Pearson);
        config.n_samples = 2;
        assert_eq!(null_distribution(&x, &y, &w, &config).unwrap().len(), 1);
        config.n_samples = 12;
        config.pairing = Pairing::Matched;
        assert_eq!(null_distribution(&x, &y, &w, &config).unwrap().len(), 12);
    }

    #[test]
    fn smoothing_floor() {
        let null: Vec<f64> = (0..4950).map(|k| k as f64 * 1e-4 - 0.2).collect();
        let p = empirical_p_value(10.0, &null, Tail::Greater).unwrap();
        assert_eq!(p, 1.0 / 4951.0);
        let p = empirical_p_value(10.0, &null, Tail::TwoSided).unwrap();
        assert_eq!(p, 1.0 / 4951.0);
        assert_eq!(empirical_p_value(-10.0, &null, Tail::Greater).unwrap(), 1.0);
        assert_eq!(empirical_p_value(0.0, &[1.0], Tail::Greater), Err(Error::TooFewNullValues(1)));
    }

    #[test]
    fn self_correlation_hits_floor() {
        let w = grid(8, 8);
        let x = synth(8, 8, 1.0, 3);
        let mut config = SignificanceConfig::new(NullMethod::RandomPermutation, StatKind::Pearson);
        config.n_samples = 30;
        let report = estimate_pvalue(&x, &x, &w, &config).unwrap();
        assert_eq!(report.null_sample_count, 435);
        assert_eq!(report.p_value, 1.0 / 436.0);
        assert!((report.observed_stat - 1.0).abs() < 1e-12);
    }

    #[test]
    fn generator_method_checks_grid() {
        let w = grid(5, 5);
        let (x, y) = (synth(5, 5, 1.0, 1), synth(5, 5, 1.0, 2));
        let method = NullMethod::KnownGenerator {
            beta_x: 1.0,
            beta_y: 1.0,
            rows: 4,
            cols: 4,
        };
        let config = SignificanceConfig::new(method, StatKind::Pearson);
        assert!(matches!(
            estimate_pvalue(&x, &y, &w, &config),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn variance_edge_cases() {
        let w = grid(4, 4);
        let num = Field::new(vec![3.0; 16]).unwrap();
        let den = Field::new(vec![1.5; 16]).unwrap();
        for method in [NullMethod::RandomPermutation, NullMethod::ConstantI] {
            let mut config = SignificanceConfig::new(method, StatKind::Pearson);
            config.n_samples = 5;
            let r = estimate_variance(&num, &den, &w, &config).unwrap();
            assert_eq!(r.resampled.sd, 0.0);
            assert_eq!(r.resampled.mean, 2.0);
        }
        let mut bad = den.values().to_vec();
        bad[7] = 0.0;
        let bad = Field::new(bad).unwrap();
        let config = SignificanceConfig::new(NullMethod::RandomPermutation, StatKind::Pearson);
        assert_eq!(
            estimate_variance(&num, &bad, &w, &config),
            Err(Error::NonPositiveDenominator(7))
        );
    }

    #[test]
    fn variance_deterministic() {
        let w = grid(6, 6);
        let num = synth(6, 6, 1.0, 4).values().iter().map(|v| v + 10.0).collect();
        let den = synth(6, 6, 1.0, 5).values().iter().map(|v| v + 10.0).collect();
        let (num, den) = (Field::new(num).unwrap(), Field::new(den).unwrap());
        let mut config = SignificanceConfig::new(NullMethod::ConstantI, StatKind::Pearson);
        config.n_samples = 6;
        let a = estimate_variance(&num, &den, &w, &config).unwrap();
        let b = estimate_variance(&num, &den, &w, &config).unwrap();
        assert_eq!(a, b);
        assert!(a.resampled.sd > 0.0);
    }

    #[test]
    fn calibration_report_shape() {
        let config = CalibrationConfig {
            n_samples: 6,
            stats: vec![StatKind::Pearson, StatKind::Kendall],
            bootstrap: 200,
            ..Default::default()
        };
        let report = calibrate(0.5, 0.5, 50, (6, 6), &config).unwrap();
        assert_eq!(report.curves.len(), 6);
        for curve in &report.curves {
            assert_eq!(curve.p_values.len(), 50);
            assert!(curve.p_values.iter().all(|&p| p > 0.0 && p <= 1.0));
            for pair in curve.points.windows(2) {
                assert!(pair[1].observed_rate >= pair[0].observed_rate);
                assert!(pair[1].lower >= pair[0].lower - 1e-12);
            }
            for pt in &curve.points {
                assert!((0.0..=1.0).contains(&pt.observed_rate));
                assert!(pt.lower <= pt.observed_rate && pt.observed_rate <= pt.upper);
            }
        }
        assert!(calibrate(0.5, 0.5, 49, (6, 6), &config).is_err());
    }
}
