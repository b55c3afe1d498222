//! Burnt-area scoring: binary cross-entropy, mean squared error, relative
//! RMSE, global SSIM and PSNR between a true burnt mask and a predicted
//! real field.
//!
//! Accumulations run sequentially in row-major order.

use serde::{Deserialize, Serialize};

use crate::raster::{BurntMask, Field};
use crate::{Error, Result, Scalar};

/// Probability clamp applied before taking logarithms in [`bce`].
pub const BCE_EPSILON: f64 = 1e-7;

/// Dynamic range assumed for binary and probability fields.
pub const SSIM_RANGE: f64 = 1.0;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport<T> {
    pub bce: T,
    /// Per-pixel mean squared error (dimensionless).
    pub mse: T,
    /// Sum of squared errors times the pixel area, km².
    pub mse_km2: T,
    pub rrmse: T,
    pub ssim: T,
    /// `+inf` when `mse == 0`.
    pub psnr: T,
}

fn check<T: Scalar>(truth: &BurntMask, pred: &Field<T>) -> Result<()> {
    if truth.spec().dims() != pred.dims() {
        return Err(Error::DimensionMismatch {
            expected: truth.spec().dims(),
            actual: pred.dims(),
        });
    }
    Ok(())
}

#[inline]
fn indicator<T: Scalar>(b: bool) -> T {
    if b {
        T::one()
    } else {
        T::zero()
    }
}

/// Mean binary cross-entropy with predictions clamped to `[ε, 1-ε]`.
pub fn bce<T: Scalar>(truth: &BurntMask, pred: &Field<T>) -> Result<T> {
    check(truth, pred)?;
    let eps = T::of(BCE_EPSILON);
    let hi = T::one() - eps;
    let mut acc = T::zero();
    for (&t, &p) in truth.cells().iter().zip(pred.as_slice()) {
        let p = p.max(eps).min(hi);
        acc += if t { p.ln() } else { (T::one() - p).ln() };
    }
    Ok(-acc / T::of(truth.spec().len() as f64))
}

pub fn mse<T: Scalar>(truth: &BurntMask, pred: &Field<T>) -> Result<T> {
    check(truth, pred)?;
    Ok(sum_sq_err(truth, pred) / T::of(truth.spec().len() as f64))
}

fn sum_sq_err<T: Scalar>(truth: &BurntMask, pred: &Field<T>) -> T {
    let mut acc = T::zero();
    for (&t, &p) in truth.cells().iter().zip(pred.as_slice()) {
        let d = indicator::<T>(t) - p;
        acc += d * d;
    }
    acc
}

/// `sqrt(MSE / Σ p²)`: the mean squared error normalised by the
/// unnormalised energy of the *prediction*. The asymmetry is intentional.
pub fn rrmse<T: Scalar>(truth: &BurntMask, pred: &Field<T>) -> Result<T> {
    let mse = mse(truth, pred)?;
    let mut energy = T::zero();
    for &p in pred.as_slice() {
        energy += p * p;
    }
    if energy <= T::zero() {
        return Err(Error::ZeroPredictionEnergy);
    }
    Ok((mse / energy).sqrt())
}

/// Single-window SSIM over whole-image statistics with population variance
/// and covariance, `c1 = (0.01 L)²`, `c2 = (0.03 L)²`, `L = 1`.
///
/// The luminance term uses the product `2 μx μy`.
pub fn ssim<T: Scalar>(x: &Field<T>, y: &Field<T>) -> Result<T> {
    if x.dims() != y.dims() {
        return Err(Error::DimensionMismatch {
            expected: x.dims(),
            actual: y.dims(),
        });
    }
    let n = T::of(x.as_slice().len() as f64);
    let mut sx = T::zero();
    let mut sy = T::zero();
    for (&a, &b) in x.as_slice().iter().zip(y.as_slice()) {
        sx += a;
        sy += b;
    }
    let (mx, my) = (sx / n, sy / n);
    let mut vx = T::zero();
    let mut vy = T::zero();
    let mut cxy = T::zero();
    for (&a, &b) in x.as_slice().iter().zip(y.as_slice()) {
        let (da, db) = (a - mx, b - my);
        vx += da * da;
        vy += db * db;
        cxy += da * db;
    }
    let (vx, vy, cxy) = (vx / n, vy / n, cxy / n);
    let c1 = T::of((SSIM_K1 * SSIM_RANGE).powi(2));
    let c2 = T::of((SSIM_K2 * SSIM_RANGE).powi(2));
    let two = T::of(2.0);
    let num = (two * mx * my + c1) * (two * cxy + c2);
    let den = (mx * mx + my * my + c1) * (vx + vy + c2);
    Ok(num / den)
}

/// `10 log10(Max(truth)² / MSE)`; `+inf` when the prediction is exact.
pub fn psnr<T: Scalar>(truth: &BurntMask, pred: &Field<T>) -> Result<T> {
    let mse = mse(truth, pred)?;
    if truth.is_empty_mask() {
        return Err(Error::EmptyTruth);
    }
    Ok(psnr_from_mse(T::one(), mse))
}

/// PSNR for a known peak value.
pub fn psnr_from_mse<T: Scalar>(peak: T, mse: T) -> T {
    if mse == T::zero() {
        return T::infinity();
    }
    T::of(10.0) * (peak * peak / mse).log10()
}

/// All five scores for one prediction.
pub fn evaluate<T: Scalar>(truth: &BurntMask, pred: &Field<T>) -> Result<MetricReport<T>> {
    let mse = mse(truth, pred)?;
    let mse_km2 = sum_sq_err(truth, pred) * T::of(truth.spec().pixel_area);
    Ok(MetricReport {
        bce: bce(truth, pred)?,
        mse,
        mse_km2,
        rrmse: rrmse(truth, pred)?,
        ssim: ssim(&truth.to_field(), pred)?,
        psnr: psnr(truth, pred)?,
    })
}
