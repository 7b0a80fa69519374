//! Random fields with a power-law spectral density `S(f) ~ f^-beta`.
//!
//! Fourier amplitudes `f^(-beta/2)` with uniform random phases are paired
//! under Hermitian symmetry so that the inverse transform is real. The
//! transform is a direct separable DFT, cheap at the grid sizes used for
//! calibration (a 40x40 grid costs about 1.3e5 complex multiply-adds).

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{build_grid_queen, row_normalize};
use crate::moran::{moran_of, Field};
use crate::numeric;
use crate::rng;
use crate::summary::Summary;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SynthConfig {
    pub rows: usize,
    pub cols: usize,
    /// Spectral exponent; 0 is white noise.
    pub beta: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(rows: usize, cols: usize, beta: f64, seed: u64) -> Self {
        Self { rows, cols, beta, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || self.rows * self.cols < 4 {
            return Err(Error::invalid("synthetic grid needs at least 4 cells"));
        }
        if !self.beta.is_finite() || self.beta < 0.0 {
            return Err(Error::invalid("beta must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Frequency index mapped to `[-n/2, n/2)`.
fn signed_frequency(k: usize, n: usize) -> f64 {
    if 2 * k < n {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

fn twiddles(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|m| {
            let angle = TAU * m as f64 / n as f64;
            Complex64::new(libm::cos(angle), libm::sin(angle))
        })
        .collect()
}

/// Synthesizes a standardized field (mean 0, population variance 1) in
/// row-major order.
pub fn generate_field(config: &SynthConfig) -> Result<Field> {
    generate_with_residue(config).map(|(field, _)| field)
}

/// As [`generate_field`], also returning the largest imaginary part of the
/// inverse transform in standardized units.
pub fn generate_with_residue(config: &SynthConfig) -> Result<(Field, f64)> {
    config.validate()?;
    let (rows, cols) = (config.rows, config.cols);
    let n = rows * cols;
    let mut rng = rng::rng_from(config.seed);

    let mut coef = vec![Complex64::new(0.0, 0.0); n];
    for kr in 0..rows {
        for kc in 0..cols {
            let idx = kr * cols + kc;
            let partner = ((rows - kr) % rows) * cols + (cols - kc) % cols;
            if partner < idx {
                continue;
            }
            let fx = signed_frequency(kr, rows);
            let fy = signed_frequency(kc, cols);
            let f = libm::sqrt(fx * fx + fy * fy);
            if f == 0.0 {
                continue;
            }
            let amp = libm::pow(f, -0.5 * config.beta);
            let phase = TAU * rng.random::<f64>();
            if partner == idx {
                coef[idx] = Complex64::new(amp * libm::cos(phase), 0.0);
            } else {
                let c = Complex64::new(amp * libm::cos(phase), amp * libm::sin(phase));
                coef[idx] = c;
                coef[partner] = c.conj();
            }
        }
    }

    // Inverse DFT along columns of the coefficient grid, then along rows.
    let tw_cols = twiddles(cols);
    let tw_rows = twiddles(rows);
    let mut partial = vec![Complex64::new(0.0, 0.0); n];
    for kr in 0..rows {
        let src = &coef[kr * cols..(kr + 1) * cols];
        for c in 0..cols {
            let mut acc = Complex64::new(0.0, 0.0);
            for (kc, v) in src.iter().enumerate() {
                acc += v * tw_cols[(kc * c) % cols];
            }
            partial[kr * cols + c] = acc;
        }
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for r in 0..rows {
        for kr in 0..rows {
            let t = tw_rows[(kr * r) % rows];
            for c in 0..cols {
                out[r * cols + c] += partial[kr * cols + c] * t;
            }
        }
    }

    let re: Vec<f64> = out.iter().map(|z| z.re).collect();
    let mean = numeric::sum(re.iter().copied()) / n as f64;
    let var = numeric::sum(re.iter().map(|v| (v - mean) * (v - mean))) / n as f64;
    if var <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let sd = libm::sqrt(var);
    let residue = out.iter().map(|z| libm::fabs(z.im)).fold(0.0, f64::max) / sd;
    let values = re.into_iter().map(|v| (v - mean) / sd).collect();
    Ok((Field::new(values)?, residue))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BetaCurveRow {
    pub beta: f64,
    pub moran: Summary,
}

/// Distribution of Moran's I (queen weights) over `trials` synthetic fields
/// for each spectral exponent.
pub fn moran_beta_curve(
    betas: &[f64],
    trials: usize,
    rows: usize,
    cols: usize,
    seed: u64,
) -> Result<Vec<BetaCurveRow>> {
    if trials < 2 {
        return Err(Error::invalid("need at least 2 trials per beta"));
    }
    let weights = row_normalize(&build_grid_queen(rows, cols)?)?;
    betas
        .iter()
        .enumerate()
        .map(|(bi, &beta)| {
            let values = crate::exec::try_map_indexed(trials, |t| {
                let cfg = SynthConfig::new(rows, cols, beta, rng::derive_seed(seed, &[bi as u64, t as u64]));
                moran_of(generate_field(&cfg)?.values(), &weights)
            })?;
            Ok(BetaCurveRow {
                beta,
                moran: Summary::from_values(&values).expect("trials >= 2"),
            })
        })
        .collect()
}
