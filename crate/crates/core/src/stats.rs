//! Association statistics between two equal-length samples and the
//! classical t-test for a Pearson correlation.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::moran::is_constant;
use crate::numeric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum StatKind {
    Pearson,
    Spearman,
    /// Kendall's tau-b.
    Kendall,
    /// Two-sample Kolmogorov-Smirnov distance.
    Ks,
}

impl StatKind {
    pub const ALL: [StatKind; 4] = [StatKind::Pearson, StatKind::Spearman, StatKind::Kendall, StatKind::Ks];

    pub fn name(self) -> &'static str {
        match self {
            StatKind::Pearson => "pearson",
            StatKind::Spearman => "spearman",
            StatKind::Kendall => "kendall",
            StatKind::Ks => "ks",
        }
    }

    pub fn compute(self, x: &[f64], y: &[f64]) -> Result<f64> {
        match self {
            StatKind::Pearson => pearson(x, y),
            StatKind::Spearman => spearman(x, y),
            StatKind::Kendall => kendall(x, y),
            StatKind::Ks => ks_statistic(x, y),
        }
    }

    /// Precomputes the per-sample part of the statistic so that many pairs
    /// can be evaluated cheaply with [`PreparedSample::evaluate`].
    pub fn prepare(self, x: &[f64]) -> Result<PreparedSample> {
        let data = match self {
            StatKind::Pearson => standardize(x)?,
            StatKind::Spearman => {
                if is_constant(x) {
                    return Err(Error::ZeroVariance);
                }
                standardize(&average_ranks(x))?
            }
            StatKind::Kendall => {
                if is_constant(x) {
                    return Err(Error::ZeroVariance);
                }
                x.to_vec()
            }
            StatKind::Ks => {
                if x.is_empty() {
                    return Err(Error::invalid("empty sample"));
                }
                crate::summary::sorted(x)
            }
        };
        Ok(PreparedSample { kind: self, data })
    }
}

impl fmt::Display for StatKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StatKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pearson" => Ok(StatKind::Pearson),
            "spearman" => Ok(StatKind::Spearman),
            "kendall" => Ok(StatKind::Kendall),
            "ks" => Ok(StatKind::Ks),
            other => Err(Error::invalid(alloc::format!("unknown statistic `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PreparedSample {
    kind: StatKind,
    data: Vec<f64>,
}

impl PreparedSample {
    pub fn kind(&self) -> StatKind {
        self.kind
    }

    /// Statistic between `self` (as x) and `other` (as y).
    pub fn evaluate(&self, other: &PreparedSample) -> Result<f64> {
        if self.kind != other.kind {
            return Err(Error::invalid("prepared samples of different statistics"));
        }
        if self.kind != StatKind::Ks && self.data.len() != other.data.len() {
            return Err(Error::LengthMismatch {
                expected: self.data.len(),
                actual: other.data.len(),
            });
        }
        Ok(match self.kind {
            StatKind::Pearson | StatKind::Spearman => {
                let r: f64 = self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum();
                r.clamp(-1.0, 1.0)
            }
            StatKind::Kendall => kendall(&self.data, &other.data)?,
            StatKind::Ks => ks_sorted(&self.data, &other.data),
        })
    }
}

/// Centers and scales to unit Euclidean norm.
fn standardize(x: &[f64]) -> Result<Vec<f64>> {
    if is_constant(x) {
        return Err(Error::ZeroVariance);
    }
    let mean = numeric::sum(x.iter().copied()) / x.len() as f64;
    let z: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let norm = libm::sqrt(numeric::sum(z.iter().map(|v| v * v)));
    Ok(z.into_iter().map(|v| v / norm).collect())
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::invalid("correlation needs at least 3 observations"));
    }
    if let Some(i) = x.iter().chain(y).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i % x.len()));
    }
    if is_constant(x) || is_constant(y) {
        return Err(Error::ZeroVariance);
    }
    Ok(())
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mx = numeric::sum(x.iter().copied()) / n;
    let my = numeric::sum(y.iter().copied()) / n;
    let sxy = numeric::sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let sxx = numeric::sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let syy = numeric::sum(y.iter().map(|b| (b - my) * (b - my)));
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// 1-based ranks, ties receive the average of the ranks they span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Sum of `t (t - 1) / 2` over runs of equal values in sorted data.
fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sorts `v` ascending and returns the number of strictly inverted pairs.
fn sort_counting_inversions(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = {
        let (left, right) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        sort_counting_inversions(left, bl) + sort_counting_inversions(right, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            count += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    count
}

/// Kendall's tau-b in O(n log n) (Knight's algorithm).
pub fn kendall(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len() as u64;
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));

    let n0 = n * (n - 1) / 2;
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let xy: Vec<(f64, f64)> = order.iter().map(|&i| (x[i], y[i])).collect();
    let n1 = tied_pairs(&xs);
    let n3 = tied_pairs(&xy);

    let mut ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; ys.len()];
    let swaps = sort_counting_inversions(&mut ys, &mut buf);
    let n2 = tied_pairs(&ys);

    let numerator = n0 as f64 - n1 as f64 - n2 as f64 + n3 as f64 - 2.0 * swaps as f64;
    let denominator = libm::sqrt((n0 - n1) as f64 * (n0 - n2) as f64);
    Ok((numerator / denominator).clamp(-1.0, 1.0))
}

fn ks_sorted(x: &[f64], y: &[f64]) -> f64 {
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut best: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        best = best.max(libm::fabs(i as f64 / nx - j as f64 / ny));
    }
    best
}

/// `sup_s |F_x(s) - F_y(s)|` between the empirical distribution functions.
pub fn ks_statistic(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::invalid("Kolmogorov-Smirnov needs nonempty samples"));
    }
    if let Some(i) = x.iter().chain(y).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let x = crate::summary::sorted(x);
    let y = crate::summary::sorted(y);
    Ok(ks_sorted(&x, &y))
}

/// Two-sided p-value of a Pearson correlation `r` over `n` observations
/// under the bivariate-normal independence model (t with `n - 2` degrees
/// of freedom).
pub fn naive_t_pvalue(r: f64, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::invalid("t-test needs at least 3 observations"));
    }
    if !r.is_finite() || libm::fabs(r) > 1.0 {
        return Err(Error::invalid("correlation must lie in [-1, 1]"));
    }
    if libm::fabs(r) == 1.0 {
        return Ok(0.0);
    }
    let df = (n - 2) as f64;
    let t = r * libm::sqrt(df / (1.0 - r * r));
    Ok(numeric::student_t_two_sided(t, df))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn random_pair(n: usize, seed: u64, levels: Option<i32>) -> (Vec<f64>, Vec<f64>) {
        let mut rng = rng::rng_from(seed);
        let mut draw = || match levels {
            Some(k) => rng.random_range(0..k) as f64,
            None => rng.random_range(-1.0..1.0),
        };
        let x: Vec<f64> = (0..n).map(|_| draw()).collect();
        let y: Vec<f64> = (0..n).map(|_| draw()).collect();
        (x, y)
    }

    /// Quadratic concordant/discordant count for tau-b.
    fn kendall_brute(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let (mut c, mut d, mut tx, mut ty) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for i in 0..n {
            for j in (i + 1)..n {
                let sx = (x[i] - x[j]).signum() * ((x[i] != x[j]) as i32 as f64);
                let sy = (y[i] - y[j]).signum() * ((y[i] != y[j]) as i32 as f64);
                if sx == 0.0 && sy == 0.0 {
                } else if sx == 0.0 {
                    tx += 1.0;
                } else if sy == 0.0 {
                    ty += 1.0;
                } else if sx == sy {
                    c += 1.0;
                } else {
                    d += 1.0;
                }
            }
        }
        (c - d) / ((c + d + tx) * (c + d + ty)).sqrt()
    }

    fn spearman_brute(x: &[f64], y: &[f64]) -> f64 {
        let rank = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .map(|a| {
                    let less = v.iter().filter(|b| *b < a).count() as f64;
                    let eq = v.iter().filter(|b| *b == a).count() as f64;
                    less + (eq + 1.0) / 2.0
                })
                .collect()
        };
        let (rx, ry) = (rank(x), rank(y));
        let n = x.len() as f64;
        let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
        let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
        let syy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
        sxy / (sxx * syy).sqrt()
    }

    #[test]
    fn pearson_trivial_cases() {
        let x = [1.0, 4.0, 2.0, 8.0, 5.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&x, &[2.0; 5]), Err(Error::ZeroVariance));
        assert!(pearson(&[1.0, 2.0], &[2.0, 1.0]).is_err());
    }

    #[test]
    fn spearman_cases() {
        let x = [0.3, -1.2, 2.5, 0.9, 1.7, -0.4];
        let ex: Vec<f64> = x.iter().map(|v| libm::exp(*v)).collect();
        assert!((spearman(&x, &ex).unwrap() - 1.0).abs() < 1e-15);
        let mut rev = x.to_vec();
        rev.sort_by(|a, b| b.total_cmp(a));
        let mut asc = x.to_vec();
        asc.sort_by(f64::total_cmp);
        assert!((spearman(&asc, &rev).unwrap() + 1.0).abs() < 1e-15);
        for seed in 0..20 {
            let (x, y) = random_pair(10, seed, if seed % 2 == 0 { Some(4) } else { None });
            if is_constant(&x) || is_constant(&y) {
                continue;
            }
            assert!((spearman(&x, &y).unwrap() - spearman_brute(&x, &y)).abs() < 1e-12);
        }
    }

    #[test]
    fn kendall_cases() {
        assert_eq!(kendall(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(kendall(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        for seed in 0..50 {
            let (x, y) = random_pair(12, seed, Some(4));
            if is_constant(&x) || is_constant(&y) {
                continue;
            }
            let fast = kendall(&x, &y).unwrap();
            assert!((fast - kendall_brute(&x, &y)).abs() < 1e-12, "seed {seed}");
        }
        let (x, y) = random_pair(300, 1, None);
        assert!((kendall(&x, &y).unwrap() - kendall_brute(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn ks_cases() {
        let x = [0.5, 1.5, 2.5];
        assert_eq!(ks_statistic(&x, &x).unwrap(), 0.0);
        assert_eq!(ks_statistic(&x, &[10.0, 11.0]).unwrap(), 1.0);

        // Oracle: evaluate both EDFs at every sample point.
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [1.5, 2.5];
        let edf = |s: &[f64], t: f64| s.iter().filter(|v| **v <= t).count() as f64 / s.len() as f64;
        let oracle = a
            .iter()
            .chain(&b)
            .map(|&t| (edf(&a, t) - edf(&b, t)).abs())
            .fold(0.0, f64::max);
        assert_eq!(oracle, 0.5);
        assert_eq!(ks_statistic(&a, &b).unwrap(), oracle);
        assert!(ks_statistic(&[], &b).is_err());
    }

    #[test]
    fn prepared_samples_agree_with_direct_statistics() {
        for seed in 0..10 {
            let (x, y) = random_pair(40, seed, if seed < 5 { Some(6) } else { None });
            for kind in StatKind::ALL {
                let direct = kind.compute(&x, &y).unwrap();
                let prepared = kind.prepare(&x).unwrap().evaluate(&kind.prepare(&y).unwrap()).unwrap();
                assert!((direct - prepared).abs() < 1e-12, "{kind} seed {seed}");
            }
        }
    }

    #[test]
    fn t_pvalue_trivial_cases() {
        assert_eq!(naive_t_pvalue(0.0, 30).unwrap(), 1.0);
        assert_eq!(naive_t_pvalue(1.0, 30).unwrap(), 0.0);
        assert_eq!(naive_t_pvalue(-1.0, 30).unwrap(), 0.0);
        assert!(naive_t_pvalue(0.3, 2).is_err());
    }

    #[test]
    fn t_pvalue_monotone() {
        let mut prev = 1.1;
        for k in 0..20 {
            let p = naive_t_pvalue(k as f64 * 0.045, 25).unwrap();
            assert!(p < prev);
            prev = p;
        }
        let mut prev = 1.1;
        for n in 4..60 {
            let p = naive_t_pvalue(0.3, n).unwrap();
            assert!(p < prev);
            prev = p;
        }
    }
}
