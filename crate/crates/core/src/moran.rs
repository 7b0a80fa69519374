//! Moran's I, spatial lags, and the incremental state used by the resampler.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::SpatialWeights;
use crate::numeric::{self, CompensatedSum};
use crate::stats;

/// One finite value per spatial site.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    values: Vec<f64>,
    name: Option<String>,
}

impl Field {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { values, name: None })
    }

    pub fn named(values: Vec<f64>, name: impl Into<String>) -> Result<Self> {
        let mut f = Self::new(values)?;
        f.name = Some(name.into());
        Ok(f)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        is_constant(&self.values)
    }

    pub(crate) fn check_len(&self, weights: &SpatialWeights) -> Result<()> {
        check_len(weights.n_sites(), self.len())
    }
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::LengthMismatch { expected, actual });
    }
    Ok(())
}

pub(crate) fn is_constant(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LagSide {
    /// `out_i = sum_j w_ij x_j`
    Left,
    /// `out_j = sum_i x_i w_ij`
    Right,
}

pub fn spatial_lag(field: &Field, weights: &SpatialWeights, side: LagSide) -> Result<Vec<f64>> {
    field.check_len(weights)?;
    Ok(lag_of(field.values(), weights, side))
}

pub(crate) fn lag_of(values: &[f64], weights: &SpatialWeights, side: LagSide) -> Vec<f64> {
    (0..values.len())
        .map(|i| {
            let (idx, w) = match side {
                LagSide::Left => weights.row(i),
                LagSide::Right => weights.column(i),
            };
            idx.iter().zip(w).map(|(&j, &w)| w * values[j]).sum()
        })
        .collect()
}

/// Global Moran's I, `(N/|W|) sum_ij w_ij z_i z_j / sum_i z_i^2`.
///
/// Evaluated as `sum_i z_i zl_i` with `zl` the left lag of the centered
/// values, so the cost is linear in the number of edges.
pub fn moran_i(field: &Field, weights: &SpatialWeights) -> Result<f64> {
    field.check_len(weights)?;
    moran_of(field.values(), weights)
}

pub(crate) fn moran_of(values: &[f64], weights: &SpatialWeights) -> Result<f64> {
    if is_constant(values) {
        return Err(Error::ZeroVariance);
    }
    let n = values.len() as f64;
    let mean = numeric::sum(values.iter().copied()) / n;
    let z: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let zl = lag_of(&z, weights, LagSide::Left);
    let num = numeric::sum(z.iter().zip(&zl).map(|(a, b)| a * b));
    let ss = numeric::sum(z.iter().map(|v| v * v));
    Ok(n / weights.total_weight() * num / ss)
}

/// Moran's I as the scaled correlation between a field and its left lag.
///
/// Equal to [`moran_i`] for row-normalized weights without isolated sites.
pub fn moran_via_lag(field: &Field, weights: &SpatialWeights) -> Result<f64> {
    field.check_len(weights)?;
    if field.is_constant() {
        return Err(Error::ZeroVariance);
    }
    let x = field.values();
    let xl = lag_of(x, weights, LagSide::Left);
    if is_constant(&xl) {
        return Err(Error::DegenerateLag);
    }
    let r = stats::pearson(x, &xl)?;
    let ss = |v: &[f64]| {
        let m = numeric::sum(v.iter().copied()) / v.len() as f64;
        numeric::sum(v.iter().map(|a| (a - m) * (a - m)))
    };
    Ok(libm::sqrt(ss(&xl) / ss(x)) * r)
}

/// Incremental bookkeeping for O(degree) Moran's I updates.
///
/// Values are stored as offsets from a fixed anchor (the field mean at build
/// time) together with their left and right lags. Under swaps the mean never
/// moves, so the offsets are exactly the centered values. Under replacements
/// the mean drifts by `d/N` per move; the drift is carried as a scalar
/// instead of rewriting every entry, which keeps lag updates local.
#[derive(Debug, Clone)]
pub struct LagState {
    anchor: f64,
    offsets: Vec<f64>,
    lag_left: Vec<f64>,
    lag_right: Vec<f64>,
    sum: CompensatedSum,
    sum_squares: CompensatedSum,
    cross: CompensatedSum,
    sum_lags: CompensatedSum,
    scale: f64,
    total_weight: f64,
    variance_floor: f64,
    resync_interval: usize,
    updates_since_resync: usize,
}

/// Change of Moran's I (and its parts) for replacing one value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplaceDelta {
    pub moran: f64,
    /// `d = new - old`
    pub value: f64,
    pub mean: f64,
    /// Change of `sum_ij w_ij z_i z_j`.
    pub numerator: f64,
    /// Change of `sum_i z_i^2`.
    pub sum_squares: f64,
}

pub fn build_lag_state(field: &Field, weights: &SpatialWeights) -> Result<LagState> {
    LagState::new(field, weights)
}

impl LagState {
    pub fn new(field: &Field, weights: &SpatialWeights) -> Result<Self> {
        field.check_len(weights)?;
        Self::from_values(field.values(), weights)
    }

    pub(crate) fn from_values(values: &[f64], weights: &SpatialWeights) -> Result<Self> {
        if is_constant(values) {
            return Err(Error::ZeroVariance);
        }
        let n = values.len();
        let anchor = numeric::sum(values.iter().copied()) / n as f64;
        let mut state = LagState {
            anchor,
            offsets: values.iter().map(|v| v - anchor).collect(),
            lag_left: vec![0.0; n],
            lag_right: vec![0.0; n],
            sum: CompensatedSum::new(),
            sum_squares: CompensatedSum::new(),
            cross: CompensatedSum::new(),
            sum_lags: CompensatedSum::new(),
            scale: n as f64 / weights.total_weight(),
            total_weight: weights.total_weight(),
            variance_floor: 0.0,
            resync_interval: 10 * n,
            updates_since_resync: 0,
        };
        state.resync(weights);
        state.variance_floor = 1e-12 * state.sum_squares();
        Ok(state)
    }

    /// Recomputes lags and running sums from the stored values.
    pub fn resync(&mut self, weights: &SpatialWeights) {
        self.lag_left = lag_of(&self.offsets, weights, LagSide::Left);
        self.lag_right = lag_of(&self.offsets, weights, LagSide::Right);
        self.sum = self.offsets.iter().copied().collect();
        self.sum_squares = self.offsets.iter().map(|v| v * v).collect();
        self.cross = self
            .offsets
            .iter()
            .zip(&self.lag_left)
            .map(|(a, b)| a * b)
            .collect();
        self.sum_lags = self
            .lag_left
            .iter()
            .zip(&self.lag_right)
            .map(|(a, b)| a + b)
            .collect();
        self.updates_since_resync = 0;
    }

    /// Number of accepted updates between automatic rebuilds (default `10 N`).
    pub fn set_resync_interval(&mut self, interval: usize) {
        self.resync_interval = interval.max(1);
    }

    pub fn resync_interval(&self) -> usize {
        self.resync_interval
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    fn n(&self) -> f64 {
        self.offsets.len() as f64
    }

    /// Mean drift relative to the anchor.
    fn shift(&self) -> f64 {
        self.sum.value() / self.n()
    }

    pub fn mean(&self) -> f64 {
        self.anchor + self.shift()
    }

    pub fn value(&self, i: usize) -> f64 {
        self.anchor + self.offsets[i]
    }

    pub fn values(&self) -> Vec<f64> {
        self.offsets.iter().map(|v| self.anchor + v).collect()
    }

    /// `z_i = x_i - mean`.
    pub fn centered(&self) -> Vec<f64> {
        let shift = self.shift();
        self.offsets.iter().map(|v| v - shift).collect()
    }

    /// Left lag of the centered values.
    pub fn lag_left(&self, weights: &SpatialWeights) -> Vec<f64> {
        let shift = self.shift();
        (0..self.len())
            .map(|i| self.lag_left[i] - shift * weights.row_sum(i))
            .collect()
    }

    /// Right lag of the centered values.
    pub fn lag_right(&self, weights: &SpatialWeights) -> Vec<f64> {
        let shift = self.shift();
        (0..self.len())
            .map(|j| self.lag_right[j] - shift * weights.col_sum(j))
            .collect()
    }

    /// `SS = sum_i z_i^2`.
    pub fn sum_squares(&self) -> f64 {
        let s = self.sum.value();
        self.sum_squares.value() - s * s / self.n()
    }

    /// `sum_i z_i zl_i`, the numerator of Moran's I.
    pub fn lag_cross_sum(&self) -> f64 {
        let shift = self.shift();
        self.cross.value() - shift * self.sum_lags.value() + shift * shift * self.total_weight
    }

    /// `sum_j (xl_j + xr_j)` of the centered values.
    pub fn sum_lags(&self) -> f64 {
        self.sum_lags.value() - 2.0 * self.shift() * self.total_weight
    }

    pub fn moran(&self) -> f64 {
        self.scale * self.lag_cross_sum() / self.sum_squares()
    }

    fn check_site(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            return Err(Error::SiteOutOfRange {
                index: i,
                n_sites: self.len(),
            });
        }
        Ok(())
    }

    /// Returns `(delta cross, delta sum_lags)` for exchanging the values at
    /// `a` and `b`.
    fn swap_parts(&self, weights: &SpatialWeights, a: usize, b: usize) -> (f64, f64) {
        let diff = self.offsets[a] - self.offsets[b];
        let coupling = weights.weight(a, b) + weights.weight(b, a);
        let d_cross = diff
            * (self.lag_right[b] - self.lag_right[a] + self.lag_left[b] - self.lag_left[a]
                - diff * coupling);
        let d_lags = diff
            * (weights.row_sum(b) + weights.col_sum(b) - weights.row_sum(a) - weights.col_sum(a));
        (d_cross, d_lags)
    }

    /// Exact change in Moran's I if the values at `a` and `b` were exchanged.
    pub fn swap_delta(&self, weights: &SpatialWeights, a: usize, b: usize) -> Result<f64> {
        self.check_site(a)?;
        self.check_site(b)?;
        if a == b {
            return Err(Error::SameSite(a));
        }
        Ok(self.swap_delta_unchecked(weights, a, b))
    }

    pub(crate) fn swap_delta_unchecked(&self, weights: &SpatialWeights, a: usize, b: usize) -> f64 {
        let (d_cross, d_lags) = self.swap_parts(weights, a, b);
        // Mean and SS are invariant under permutation.
        self.scale * (d_cross - self.shift() * d_lags) / self.sum_squares()
    }

    /// Exchanges the values at `a` and `b`, updating lags at their
    /// neighbours only.
    pub fn apply_swap(&mut self, weights: &SpatialWeights, a: usize, b: usize) -> Result<()> {
        self.check_site(a)?;
        self.check_site(b)?;
        if a == b {
            return Err(Error::SameSite(a));
        }
        self.apply_swap_unchecked(weights, a, b);
        Ok(())
    }

    pub(crate) fn apply_swap_unchecked(&mut self, weights: &SpatialWeights, a: usize, b: usize) {
        let (d_cross, d_lags) = self.swap_parts(weights, a, b);
        let diff = self.offsets[a] - self.offsets[b];
        self.offsets.swap(a, b);
        // Site a loses `diff`, site b gains it.
        self.shift_site(weights, a, -diff);
        self.shift_site(weights, b, diff);
        self.cross.add(d_cross);
        self.sum_lags.add(d_lags);
        self.count_update(weights);
    }

    /// Propagates a change of `d` at site `a` into the neighbouring lags.
    fn shift_site(&mut self, weights: &SpatialWeights, a: usize, d: f64) {
        let (sources, w_in) = weights.column(a);
        for (&i, &w) in sources.iter().zip(w_in) {
            self.lag_left[i] += w * d;
        }
        let (targets, w_out) = weights.row(a);
        for (&j, &w) in targets.iter().zip(w_out) {
            self.lag_right[j] += w * d;
        }
    }

    fn count_update(&mut self, weights: &SpatialWeights) {
        self.updates_since_resync += 1;
        if self.updates_since_resync >= self.resync_interval {
            self.resync(weights);
        }
    }

    /// Exact change in Moran's I if the value at `a` became `new_value`,
    /// including the shift of the mean and of `SS`.
    ///
    /// Fails with [`Error::ZeroVariance`] if the result would be constant.
    pub fn replace_delta(&self, weights: &SpatialWeights, a: usize, new_value: f64) -> Result<ReplaceDelta> {
        self.check_site(a)?;
        if !new_value.is_finite() {
            return Err(Error::NonFinite(a));
        }
        self.replace_parts(weights, a, new_value).map(|(delta, _)| delta)
    }

    /// Returns the delta and the new raw accumulator values
    /// `(sum, sum_squares, cross, sum_lags)`.
    fn replace_parts(
        &self,
        weights: &SpatialWeights,
        a: usize,
        new_value: f64,
    ) -> Result<(ReplaceDelta, [f64; 4])> {
        let n = self.n();
        let new_offset = new_value - self.anchor;
        let d = new_offset - self.offsets[a];

        let sum = self.sum.value() + d;
        let sum_squares = self.sum_squares.value() + d * (2.0 * self.offsets[a] + d);
        let cross = self.cross.value() + d * (self.lag_left[a] + self.lag_right[a]);
        let sum_lags = self.sum_lags.value() + d * (weights.row_sum(a) + weights.col_sum(a));

        let shift = sum / n;
        let ss_new = sum_squares - sum * shift;
        if ss_new <= self.variance_floor {
            return Err(Error::ZeroVariance);
        }
        let num_new = cross - shift * sum_lags + shift * shift * self.total_weight;
        let ss_old = self.sum_squares();
        let num_old = self.lag_cross_sum();
        let moran_new = self.scale * num_new / ss_new;
        Ok((
            ReplaceDelta {
                moran: moran_new - self.scale * num_old / ss_old,
                value: d,
                mean: d / n,
                numerator: num_new - num_old,
                sum_squares: ss_new - ss_old,
            },
            [sum, sum_squares, cross, sum_lags],
        ))
    }

    /// Replaces the value at `a` by `new_value`.
    pub fn apply_replace(
        &mut self,
        weights: &SpatialWeights,
        a: usize,
        new_value: f64,
    ) -> Result<ReplaceDelta> {
        self.check_site(a)?;
        if !new_value.is_finite() {
            return Err(Error::NonFinite(a));
        }
        let (delta, _) = self.replace_parts(weights, a, new_value)?;
        let d = delta.value;
        self.sum.add(d);
        self.sum_squares.add(d * (2.0 * self.offsets[a] + d));
        self.cross.add(d * (self.lag_left[a] + self.lag_right[a]));
        self.sum_lags.add(d * (weights.row_sum(a) + weights.col_sum(a)));
        self.offsets[a] = new_value - self.anchor;
        self.shift_site(weights, a, d);
        self.count_update(weights);
        Ok(delta)
    }

    /// Largest absolute difference between the stored lags and lags
    /// recomputed from the stored values.
    pub fn lag_drift(&self, weights: &SpatialWeights) -> f64 {
        let left = lag_of(&self.offsets, weights, LagSide::Left);
        let right = lag_of(&self.offsets, weights, LagSide::Right);
        left.iter()
            .zip(&self.lag_left)
            .chain(right.iter().zip(&self.lag_right))
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max)
    }
}
