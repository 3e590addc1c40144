//! Mardia-kurtosis algebra for sums of independent zero-mean random vectors
//! and the MGGD moment-matching fit.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SpdFactor};
use crate::mggd::{self, MggdParams};

/// Smallest eigenvalue ratio accepted for the covariance of a sum.
pub const SUM_CONDITION_TOL: f64 = 1e-12;

/// Covariance and Mardia excess kurtosis of a zero-mean random vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentSummary {
    covariance: DMatrix<f64>,
    kurtosis: f64,
}

impl MomentSummary {
    pub fn new(covariance: DMatrix<f64>, kurtosis: f64) -> Result<Self> {
        SpdFactor::new(&covariance)?;
        let m = covariance.nrows() as f64;
        if !kurtosis.is_finite() || kurtosis < -m * (m + 2.0) {
            return Err(Error::invalid(
                "kurtosis",
                format!("{kurtosis} is below the infimum {}", -m * (m + 2.0)),
            ));
        }
        Ok(Self {
            covariance,
            kurtosis,
        })
    }

    pub fn of_mggd(params: &MggdParams) -> Self {
        Self {
            covariance: params.covariance(),
            kurtosis: params.mardia_kurtosis(),
        }
    }

    /// Sample second moment and plug-in Mardia kurtosis of the rows of
    /// `samples`, taken about zero.
    pub fn from_samples(samples: &DMatrix<f64>) -> Result<Self> {
        let (n, m) = samples.shape();
        if m == 0 || n <= m {
            return Err(Error::NotEnoughData(format!("{n} samples for dimension {m}")));
        }
        let cov = linalg::symmetrize(&(samples.transpose() * samples / n as f64));
        let f = SpdFactor::new(&cov)?;
        let mut row = vec![0.0; m];
        let mut acc = 0.0;
        for r in samples.row_iter() {
            for (v, x) in row.iter_mut().zip(r.iter()) {
                *v = *x;
            }
            let q = f.quad_form(&row);
            acc += q * q;
        }
        let mf = m as f64;
        let kurtosis = (acc / n as f64 - mf * (mf + 2.0)).max(-mf * (mf + 2.0));
        Self::new(cov, kurtosis)
    }

    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn kurtosis(&self) -> f64 {
        self.kurtosis
    }
}

/// Moment summary of an elliptical source together with its fourth-moment
/// ratio deviation `λ = E[V₁⁴]/E[V₁²V₂²] − 3` of the standardized generator.
#[derive(Debug, Clone)]
pub struct EllipticalSummary {
    pub moments: MomentSummary,
    pub lambda: f64,
}

impl EllipticalSummary {
    /// MGGD (and Gaussian) sources have `λ = 0`.
    pub fn of_mggd(params: &MggdParams) -> Self {
        Self {
            moments: MomentSummary::of_mggd(params),
            lambda: 0.0,
        }
    }

    pub fn gaussian(covariance: DMatrix<f64>) -> Result<Self> {
        Ok(Self {
            moments: MomentSummary::new(covariance, 0.0)?,
            lambda: 0.0,
        })
    }
}

fn check_dims(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != b.nrows() || !a.is_square() || !b.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            actual: b.nrows(),
        });
    }
    Ok(())
}

/// `Δ_AB = Σ_A^{1/2} Σ_B⁻¹ Σ_A^{1/2}` with the symmetric square root.
pub fn delta(sigma_a: &DMatrix<f64>, sigma_b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_dims(sigma_a, sigma_b)?;
    SpdFactor::new(sigma_a)?;
    let fb = SpdFactor::new(sigma_b)?;
    linalg::ensure_well_conditioned(sigma_b, SUM_CONDITION_TOL)?;
    let root = linalg::sym_sqrt(sigma_a);
    let inner = fb.inverse();
    Ok(linalg::symmetrize(&(&root * inner * &root)))
}

fn rho_of_delta(d: &DMatrix<f64>) -> f64 {
    let fro2 = d.iter().map(|v| v * v).sum::<f64>();
    let tr = d.trace();
    2.0 * fro2 + tr * tr
}

/// `ρ_AB = 2‖Δ_AB‖_F² + (tr Δ_AB)²`, the value of `E[(XᵀΣ_B⁻¹X)²]` for a
/// Gaussian `X ~ N(0, Σ_A)`.
pub fn rho(sigma_a: &DMatrix<f64>, sigma_b: &DMatrix<f64>) -> Result<f64> {
    Ok(rho_of_delta(&delta(sigma_a, sigma_b)?))
}

/// Distribution-free kurtosis of `Z = X + Y` for independent zero-mean `X, Y`.
///
/// `fourth_x` and `fourth_y` are `E[(XᵀΣ_Z⁻¹X)²]` and `E[(YᵀΣ_Z⁻¹Y)²]` with
/// `Σ_Z = Σ_X + Σ_Y`.
pub fn kurtosis_of_sum_general(
    sigma_x: &DMatrix<f64>,
    fourth_x: f64,
    sigma_y: &DMatrix<f64>,
    fourth_y: f64,
) -> Result<f64> {
    check_dims(sigma_x, sigma_y)?;
    let sigma_z = sigma_x + sigma_y;
    Ok(fourth_x - rho(sigma_x, &sigma_z)? + fourth_y - rho(sigma_y, &sigma_z)?)
}

/// `E[(XᵀΣ_Z⁻¹X)²]` for an elliptical `X` with the given summary.
pub fn elliptical_fourth_moment(x: &EllipticalSummary, sigma_z: &DMatrix<f64>) -> Result<f64> {
    let m = x.moments.dim() as f64;
    let denom = m * (m + 2.0 + x.lambda);
    if !(m + 2.0 + x.lambda > 0.0) {
        return Err(Error::invalid(
            "lambda",
            format!("M + 2 + λ must be positive, got λ = {}", x.lambda),
        ));
    }
    let d = delta(x.moments.covariance(), sigma_z)?;
    let diag_sq = d.diagonal().iter().map(|v| v * v).sum::<f64>();
    Ok((rho_of_delta(&d) + x.lambda * diag_sq) * (x.moments.kurtosis() + m * (m + 2.0)) / denom)
}

/// Kurtosis of the sum of two independent elliptical vectors.
pub fn kurtosis_of_sum_elliptical(x: &EllipticalSummary, y: &EllipticalSummary) -> Result<f64> {
    check_dims(x.moments.covariance(), y.moments.covariance())?;
    let sigma_z = x.moments.covariance() + y.moments.covariance();
    let fx = elliptical_fourth_moment(x, &sigma_z)?;
    let fy = elliptical_fourth_moment(y, &sigma_z)?;
    Ok(fx - rho(x.moments.covariance(), &sigma_z)? + fy - rho(y.moments.covariance(), &sigma_z)?)
}

/// Moment summary of `z·X + N` with `X ~ params` and `N ~ N(0, σ²I)`.
pub fn sum_with_white_gaussian(
    params: &MggdParams,
    z_scale: f64,
    noise_var: f64,
) -> Result<MomentSummary> {
    if !(z_scale >= 0.0) || !z_scale.is_finite() {
        return Err(Error::invalid("z_scale", format!("must be non-negative, got {z_scale}")));
    }
    if !(noise_var >= 0.0) || !noise_var.is_finite() {
        return Err(Error::invalid("noise_var", format!("must be non-negative, got {noise_var}")));
    }
    if z_scale == 0.0 && noise_var == 0.0 {
        return Err(Error::invalid("noise_var", "signal and noise are both zero"));
    }
    let m = params.dim();
    let noise = DMatrix::identity(m, m) * noise_var;
    if z_scale == 0.0 {
        return MomentSummary::new(noise, 0.0);
    }
    let sigma_x = params.covariance() * (z_scale * z_scale);
    let sigma_z = &sigma_x + noise;
    let gx = params.mardia_kurtosis();
    let mf = m as f64;
    let kurtosis = if gx == 0.0 {
        0.0
    } else {
        gx * rho(&sigma_x, &sigma_z)? / (mf * (mf + 2.0))
    };
    MomentSummary::new(sigma_z, kurtosis)
}

/// Kurtosis of `z·X + N(0, σ²I)` for an MGGD `X`.
pub fn kurtosis_mggd_plus_white_gaussian(
    params: &MggdParams,
    z_scale: f64,
    noise_var: f64,
) -> Result<f64> {
    Ok(sum_with_white_gaussian(params, z_scale, noise_var)?.kurtosis())
}

/// MGGD fitted to a moment summary.
#[derive(Debug, Clone, Serialize)]
pub struct MomentFit {
    pub params: MggdParams,
    pub clamped: bool,
}

/// Matches covariance and Mardia kurtosis with an MGGD.
pub fn fit_mggd_by_moments(target: &MomentSummary) -> Result<MomentFit> {
    let m = target.dim();
    let shape = mggd::shape_from_kurtosis(m, target.kurtosis())?;
    let params = MggdParams::from_covariance(shape.shape, target.covariance())?;
    Ok(MomentFit {
        params,
        clamped: shape.clamped,
    })
}
