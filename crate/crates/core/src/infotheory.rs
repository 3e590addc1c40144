//! Entropy and mutual-information bounds for the GGSM channel model, the
//! moment-matched approximation, and VIF aggregation.
//!
//! Conditioned on the mixing value `z`, a reference block is
//! `E = zU + N` with `U ~ MGGD(0, α, C_U)` and `N ~ N(0, σ_n² I)`; the distorted
//! block is `F = gzU + V + N'`, which has the same form with signal scale `gz`
//! and noise variance `σ_v² + σ_n²`. All quantities are in nats.

use std::f64::consts::{E, PI};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kurtosis;
use crate::linalg;
use crate::mggd::{self, MggdParams};
use crate::pipeline::SubbandId;

/// Version of the serialized [`QualityReport`] layout.
pub const SCHEMA_VERSION: u32 = 1;

const TWO_PI_E: f64 = 2.0 * PI * E;

/// Per-block distortion channel `D = gC + V` observed through neural noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub gain: f64,
    pub distortion_noise_var: f64,
    pub neural_noise_var: f64,
}

impl ChannelParams {
    pub fn new(gain: f64, distortion_noise_var: f64, neural_noise_var: f64) -> Result<Self> {
        let c = Self {
            gain,
            distortion_noise_var,
            neural_noise_var,
        };
        c.validate()?;
        Ok(c)
    }

    /// Undistorted channel (`g = 1`, `σ_v² = 0`).
    pub fn identity(neural_noise_var: f64) -> Result<Self> {
        Self::new(1.0, 0.0, neural_noise_var)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gain.is_finite() {
            return Err(Error::invalid("gain", "must be finite"));
        }
        if !(self.distortion_noise_var >= 0.0) || !self.distortion_noise_var.is_finite() {
            return Err(Error::invalid(
                "distortion_noise_var",
                format!("must be non-negative, got {}", self.distortion_noise_var),
            ));
        }
        if !(self.neural_noise_var > 0.0) || !self.neural_noise_var.is_finite() {
            return Err(Error::invalid(
                "neural_noise_var",
                format!("must be positive, got {}", self.neural_noise_var),
            ));
        }
        Ok(())
    }

    pub fn total_noise_var(&self) -> f64 {
        self.distortion_noise_var + self.neural_noise_var
    }
}

/// Lower and (when the Fisher information is finite) upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiInterval {
    pub lower: f64,
    pub upper: Option<f64>,
}

/// Bounds plus the moment-matched approximation of one mutual information.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiBound {
    pub lower: f64,
    pub upper: Option<f64>,
    pub approx: f64,
}

impl MiBound {
    /// Whether `lower ≤ approx ≤ upper` up to a relative slack.
    pub fn approx_within(&self, rel_tol: f64) -> bool {
        let slack = |v: f64| rel_tol * v.abs().max(1.0);
        let lo_ok = self.approx >= self.lower - slack(self.lower);
        let hi_ok = self.upper.is_none_or(|u| self.approx <= u + slack(u));
        lo_ok && hi_ok
    }
}

fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Entropy-power lower bound on `h(X + Y)` for independent `X`, `Y`.
pub fn epi_lower_bound(h_x: f64, h_y: f64, dim: usize) -> f64 {
    let m = dim as f64;
    let a = 2.0 * h_x / m;
    let b = 2.0 * h_y / m;
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let lo = a.min(b);
    0.5 * m * (hi + (lo - hi).exp().ln_1p())
}

/// Upper bound on `h(X + N)` for `N ~ N(μ, σ²I)`:
/// `h(X) + (M/2) log(1 + σ² tr J(X) / M)`.
pub fn gaussian_noise_upper_bound(
    h_x: f64,
    fim_trace: Option<f64>,
    noise_var: f64,
    dim: usize,
) -> Result<f64> {
    let tr = fim_trace.ok_or(Error::InfiniteFisherInformation)?;
    if !tr.is_finite() {
        return Err(Error::InfiniteFisherInformation);
    }
    if !(noise_var >= 0.0) {
        return Err(Error::invalid("noise_var", format!("must be non-negative, got {noise_var}")));
    }
    let m = dim as f64;
    Ok(h_x + 0.5 * m * (noise_var * tr / m).ln_1p())
}

/// Bounds on `I(C; aU + N)` for `N ~ N(0, s²I)` given `h(U)` and `tr J(U)`.
pub fn gaussian_channel_bounds(
    u_entropy: f64,
    fim_trace: Option<f64>,
    signal_scale: f64,
    noise_var: f64,
    dim: usize,
) -> Result<MiInterval> {
    if !(noise_var > 0.0) || !noise_var.is_finite() {
        return Err(Error::invalid("noise_var", format!("must be positive, got {noise_var}")));
    }
    let m = dim as f64;
    let a2 = signal_scale * signal_scale;
    let lower = if a2 == 0.0 {
        0.0
    } else {
        0.5 * m * softplus(a2.ln() - (TWO_PI_E * noise_var).ln() + 2.0 * u_entropy / m)
    };
    let upper = fim_trace
        .filter(|t| t.is_finite())
        .map(|tr| u_entropy + 0.5 * m * (a2 / (TWO_PI_E * noise_var) + tr / (TWO_PI_E * m)).ln());
    Ok(MiInterval { lower, upper })
}

/// Bounds on the reference-channel information `I(C; E | z)`.
pub fn mi_reference_bounds(
    u_entropy: f64,
    fim_trace: Option<f64>,
    z: f64,
    channel: &ChannelParams,
    dim: usize,
) -> Result<MiInterval> {
    channel.validate()?;
    check_z(z)?;
    gaussian_channel_bounds(u_entropy, fim_trace, z, channel.neural_noise_var, dim)
}

/// Bounds on the distorted-channel information `I(C; F | z)`.
pub fn mi_distorted_bounds(
    u_entropy: f64,
    fim_trace: Option<f64>,
    z: f64,
    channel: &ChannelParams,
    dim: usize,
) -> Result<MiInterval> {
    channel.validate()?;
    check_z(z)?;
    gaussian_channel_bounds(
        u_entropy,
        fim_trace,
        channel.gain.abs() * z,
        channel.total_noise_var(),
        dim,
    )
}

fn check_z(z: f64) -> Result<()> {
    if !(z >= 0.0) || !z.is_finite() {
        return Err(Error::invalid("z", format!("must be non-negative, got {z}")));
    }
    Ok(())
}

/// Moment-matched approximation of a mutual information.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MiApprox {
    pub value: f64,
    /// Shape of the MGGD matched to the noisy observation.
    pub matched_shape: f64,
    pub clamped: bool,
}

/// Approximates `I(C; gzU + N)` with `N ~ N(0, σ²I)` by replacing the noisy
/// observation with the MGGD sharing its covariance and Mardia kurtosis.
pub fn mi_approx_moment_matched(
    u_params: &MggdParams,
    z: f64,
    gain: f64,
    total_noise_var: f64,
) -> Result<MiApprox> {
    check_z(z)?;
    if !(total_noise_var > 0.0) || !total_noise_var.is_finite() {
        return Err(Error::invalid(
            "total_noise_var",
            format!("must be positive, got {total_noise_var}"),
        ));
    }
    let a = gain.abs() * z;
    if a == 0.0 {
        return Ok(MiApprox {
            value: 0.0,
            matched_shape: 1.0,
            clamped: false,
        });
    }
    let sum = kurtosis::sum_with_white_gaussian(u_params, a, total_noise_var)?;
    let fit = kurtosis::fit_mggd_by_moments(&sum)?;
    let m = u_params.dim() as f64;
    Ok(MiApprox {
        value: fit.params.entropy() - 0.5 * m * (TWO_PI_E * total_noise_var).ln(),
        matched_shape: fit.params.shape(),
        clamped: fit.clamped,
    })
}

/// Per-subband quantities that every block of the subband shares, with the
/// covariance of `U` held in its eigenbasis.
///
/// Since `Σ_U` and `σ²I` commute, `Δ` of the moment-matched sum has
/// eigenvalues `a²λ_k / (a²λ_k + σ²)` and all per-block work reduces to
/// scalar sums over the spectrum.
#[derive(Debug, Clone)]
pub struct SpectralModel {
    dim: usize,
    eigenvalues: Vec<f64>,
    u_kurtosis: f64,
    u_entropy: f64,
    fim_trace: Option<f64>,
}

impl SpectralModel {
    pub fn new(u_params: &MggdParams) -> Self {
        Self {
            dim: u_params.dim(),
            eigenvalues: linalg::eigenvalues(&u_params.covariance()).iter().copied().collect(),
            u_kurtosis: u_params.mardia_kurtosis(),
            u_entropy: u_params.entropy(),
            fim_trace: u_params.fisher_trace(),
        }
    }

    pub fn approx(&self, signal_scale: f64, noise_var: f64) -> Result<MiApprox> {
        let a2 = signal_scale * signal_scale;
        if a2 == 0.0 {
            return Ok(MiApprox {
                value: 0.0,
                matched_shape: 1.0,
                clamped: false,
            });
        }
        let m = self.dim as f64;
        let mut tr = 0.0;
        let mut fro2 = 0.0;
        let mut log_det = 0.0;
        for &l in &self.eigenvalues {
            let total = a2 * l + noise_var;
            let d = a2 * l / total;
            tr += d;
            fro2 += d * d;
            log_det += total.ln();
        }
        let kurt = if self.u_kurtosis == 0.0 {
            0.0
        } else {
            self.u_kurtosis * (2.0 * fro2 + tr * tr) / (m * (m + 2.0))
        };
        let fit = mggd::shape_from_kurtosis(self.dim, kurt)?;
        let beta = fit.shape;
        let log_det_scatter = log_det - m * mggd::covariance_factor(self.dim, beta).ln();
        let entropy = m / (2.0 * beta) - mggd::log_normalizer_unit(self.dim, beta) + 0.5 * log_det_scatter;
        Ok(MiApprox {
            value: entropy - 0.5 * m * (TWO_PI_E * noise_var).ln(),
            matched_shape: beta,
            clamped: fit.clamped,
        })
    }

    pub fn bound(&self, signal_scale: f64, noise_var: f64) -> Result<MiBound> {
        let iv = gaussian_channel_bounds(
            self.u_entropy,
            self.fim_trace,
            signal_scale,
            noise_var,
            self.dim,
        )?;
        let ap = self.approx(signal_scale, noise_var)?;
        Ok(MiBound {
            lower: iv.lower,
            upper: iv.upper,
            approx: ap.value,
        })
    }
}

/// One block's conditioning value and channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockInput {
    pub z: f64,
    pub channel: ChannelParams,
}

/// All blocks of one subband with the fitted source distribution of `U`.
#[derive(Debug, Clone)]
pub struct SubbandInput {
    pub id: SubbandId,
    pub u_params: MggdParams,
    pub blocks: Vec<BlockInput>,
}

/// Sums of per-block mutual informations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiSums {
    pub lower: f64,
    pub upper: Option<f64>,
    pub approx: f64,
}

impl MiSums {
    fn zero() -> Self {
        Self {
            lower: 0.0,
            upper: Some(0.0),
            approx: 0.0,
        }
    }

    fn add(&mut self, b: &MiBound) {
        self.lower += b.lower;
        self.approx += b.approx;
        self.upper = match (self.upper, b.upper) {
            (Some(s), Some(u)) => Some(s + u),
            _ => None,
        };
    }

    fn merge(&mut self, o: &MiSums) {
        self.lower += o.lower;
        self.approx += o.approx;
        self.upper = match (self.upper, o.upper) {
            (Some(s), Some(u)) => Some(s + u),
            _ => None,
        };
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubbandReport {
    pub id: SubbandId,
    pub n_blocks: usize,
    pub shape: f64,
    /// Sums over blocks of `I(C; F | z)`.
    pub numerator: MiSums,
    /// Sums over blocks of `I(C; E | z)`.
    pub denominator: MiSums,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub schema_version: u32,
    pub per_subband: Vec<SubbandReport>,
    pub vif_lower: f64,
    /// Absent when some subband has infinite Fisher information.
    pub vif_upper: Option<f64>,
    pub vif_approx: f64,
    /// Blocks whose approximation fell outside its own bounds.
    pub approx_outside_bounds: usize,
}

const CONTAINMENT_TOL: f64 = 1e-9;

/// Evaluates bounds and approximations for every block and forms the VIF
/// ratios. Subbands are processed in the given order and blocks in their
/// stored order, so the sums do not depend on the worker count.
pub fn vif_aggregate(subbands: &[SubbandInput]) -> Result<QualityReport> {
    let mut per_subband = Vec::with_capacity(subbands.len());
    let mut num = MiSums::zero();
    let mut den = MiSums::zero();
    let mut outside = 0usize;
    for sb in subbands {
        let model = SpectralModel::new(&sb.u_params);
        let per_block: Vec<Result<(MiBound, MiBound)>> = sb
            .blocks
            .par_iter()
            .map(|b| {
                b.channel.validate()?;
                check_z(b.z)?;
                let reference = model.bound(b.z, b.channel.neural_noise_var)?;
                let distorted = model.bound(b.channel.gain.abs() * b.z, b.channel.total_noise_var())?;
                Ok((distorted, reference))
            })
            .collect();
        let mut sb_num = MiSums::zero();
        let mut sb_den = MiSums::zero();
        for (i, r) in per_block.into_iter().enumerate() {
            let (d, e) = r?;
            for (label, b) in [("distorted", &d), ("reference", &e)] {
                if !b.approx_within(CONTAINMENT_TOL) {
                    outside += 1;
                    log::warn!(
                        "subband {:?} block {i}: {label} approximation {} outside [{}, {:?}]",
                        sb.id,
                        b.approx,
                        b.lower,
                        b.upper
                    );
                }
            }
            sb_num.add(&d);
            sb_den.add(&e);
        }
        num.merge(&sb_num);
        den.merge(&sb_den);
        per_subband.push(SubbandReport {
            id: sb.id,
            n_blocks: sb.blocks.len(),
            shape: sb.u_params.shape(),
            numerator: sb_num,
            denominator: sb_den,
        });
    }
    if !(den.lower > 0.0) || !(den.approx > 0.0) {
        return Err(Error::DegenerateReference(
            "reference information is zero; no block has a positive mixing value".into(),
        ));
    }
    let vif_lower = match den.upper {
        Some(u) => num.lower / u,
        None => 0.0,
    };
    let vif_upper = num.upper.map(|u| u / den.lower);
    Ok(QualityReport {
        schema_version: SCHEMA_VERSION,
        per_subband,
        vif_lower,
        vif_upper,
        vif_approx: num.approx / den.approx,
        approx_outside_bounds: outside,
    })
}

/// Gaussian-channel mutual information `½ log det(I + a² Σ / σ²)`.
pub fn gaussian_channel_mi(covariance: &DMatrix<f64>, signal_scale: f64, noise_var: f64) -> f64 {
    let a2 = signal_scale * signal_scale;
    linalg::eigenvalues(covariance)
        .iter()
        .map(|l| 0.5 * (a2 * l / noise_var).ln_1p())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spd(seed: u64, m: usize) -> DMatrix<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(m, m) * 0.2
    }

    fn sid(scale: usize) -> SubbandId {
        SubbandId {
            scale,
            orientation: 0,
        }
    }

    #[test]
    fn epi_examples() {
        let h = 0.5 * TWO_PI_E.ln();
        assert_abs_diff_eq!(epi_lower_bound(h, h, 1), 0.5 * (4.0 * PI * E).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(epi_lower_bound(1.3, f64::NEG_INFINITY, 2), 1.3, epsilon = 1e-12);
        // large entropies do not overflow
        assert!(epi_lower_bound(800.0, 790.0, 1).is_finite());
    }

    #[test]
    fn upper_bound_examples() {
        assert_abs_diff_eq!(gaussian_noise_upper_bound(1.7, Some(3.0), 0.0, 2).unwrap(), 1.7);
        let h = 0.5 * TWO_PI_E.ln();
        let b = gaussian_noise_upper_bound(h, Some(1.0), 1.0, 1).unwrap();
        assert_abs_diff_eq!(b, 0.5 * (2.0 * TWO_PI_E).ln(), epsilon = 1e-12);
        assert_eq!(
            gaussian_noise_upper_bound(h, None, 1.0, 1).unwrap_err(),
            Error::InfiniteFisherInformation
        );
    }

    #[test]
    fn reference_bounds_examples() {
        let p = MggdParams::isotropic(3, 0.6).unwrap();
        let ch = ChannelParams::identity(0.1).unwrap();
        let b = mi_reference_bounds(p.entropy(), p.fisher_trace(), 0.0, &ch, 3).unwrap();
        assert_eq!(b.lower, 0.0);

        let g = MggdParams::isotropic(4, 1.0).unwrap();
        for &z in &[0.3, 1.0, 4.0] {
            let b = mi_reference_bounds(g.entropy(), g.fisher_trace(), z, &ch, 4).unwrap();
            let exact = 2.0 * (z * z / 0.1f64).ln_1p();
            assert_abs_diff_eq!(b.lower, exact, epsilon = 1e-9);
            assert_abs_diff_eq!(b.upper.unwrap(), exact, epsilon = 1e-9);
        }
        assert!(ChannelParams::new(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn distorted_bounds_examples() {
        let p = MggdParams::new(0.7, spd(1, 3)).unwrap();
        let (h, t) = (p.entropy(), p.fisher_trace());
        let ch = ChannelParams::identity(0.2).unwrap();
        assert_eq!(
            mi_distorted_bounds(h, t, 1.3, &ch, 3).unwrap(),
            mi_reference_bounds(h, t, 1.3, &ch, 3).unwrap()
        );
        let ch0 = ChannelParams::new(0.0, 0.3, 0.2).unwrap();
        assert_eq!(mi_distorted_bounds(h, t, 1.3, &ch0, 3).unwrap().lower, 0.0);
    }

    #[test]
    fn bounds_ordered_and_nonnegative() {
        for &a in &[0.3, 0.6, 1.0, 1.7, 3.0] {
            for m in [1usize, 2, 5, 9] {
                let p = MggdParams::new(a, spd(m as u64, m)).unwrap();
                for &z in &[0.0, 0.1, 1.0, 10.0] {
                    for &s in &[0.01, 0.5, 3.0] {
                        let b = gaussian_channel_bounds(p.entropy(), p.fisher_trace(), z, s, m).unwrap();
                        assert!(b.lower >= 0.0);
                        if let Some(u) = b.upper {
                            assert!(b.lower <= u + 1e-12, "α={a} M={m} z={z} s={s}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn infinite_fim_leaves_upper_absent() {
        let p = MggdParams::isotropic(1, 0.2).unwrap();
        let b = gaussian_channel_bounds(p.entropy(), p.fisher_trace(), 1.0, 0.1, 1).unwrap();
        assert!(b.upper.is_none());
    }

    #[test]
    fn approx_gaussian_is_exact() {
        let p = MggdParams::isotropic(3, 1.0).unwrap();
        let a = mi_approx_moment_matched(&p, 1.5, 0.8, 0.3).unwrap();
        assert_abs_diff_eq!(a.value, 1.5 * (1.44 / 0.3f64).ln_1p(), epsilon = 1e-12);
        let c = spd(3, 4);
        let p = MggdParams::new(1.0, c.clone()).unwrap();
        let a = mi_approx_moment_matched(&p, 0.7, 1.0, 0.5).unwrap();
        assert_abs_diff_eq!(a.value, gaussian_channel_mi(&c, 0.7, 0.5), epsilon = 1e-10);
    }

    #[test]
    fn approx_within_reference_bounds() {
        let p = MggdParams::isotropic(2, 0.5).unwrap();
        let ch = ChannelParams::identity(0.25).unwrap();
        let b = mi_reference_bounds(p.entropy(), p.fisher_trace(), 1.0, &ch, 2).unwrap();
        let a = mi_approx_moment_matched(&p, 1.0, 1.0, 0.25).unwrap().value;
        assert!(b.lower <= a && a <= b.upper.unwrap(), "{b:?} {a}");
    }

    #[test]
    fn spectral_route_matches_matrix_route() {
        for &alpha in &[0.4, 0.8, 1.0, 2.2] {
            let p = MggdParams::new(alpha, spd(11, 4)).unwrap();
            let s = SpectralModel::new(&p);
            for &(a, n) in &[(0.2, 0.1), (1.0, 1.0), (3.0, 0.05)] {
                let fast = s.approx(a, n).unwrap();
                let slow = mi_approx_moment_matched(&p, a, 1.0, n).unwrap();
                assert_abs_diff_eq!(fast.value, slow.value, epsilon = 1e-9);
            }
        }
    }

    fn synthetic_subbands(alpha: f64, gain: f64, sv: f64) -> Vec<SubbandInput> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        (0..3)
            .map(|k| {
                let u = MggdParams::from_covariance(alpha, &spd(k as u64 + 20, 4)).unwrap();
                let blocks = (0..200)
                    .map(|_| BlockInput {
                        z: rng.random_range(0.0..3.0),
                        channel: ChannelParams::new(gain, sv, 0.1).unwrap(),
                    })
                    .collect();
                SubbandInput {
                    id: sid(k),
                    u_params: u,
                    blocks,
                }
            })
            .collect()
    }

    #[test]
    fn vif_identity_and_zero_gain() {
        let r = vif_aggregate(&synthetic_subbands(0.7, 1.0, 0.0)).unwrap();
        assert_eq!(r.vif_approx, 1.0);
        assert!(r.vif_lower <= 1.0 && 1.0 <= r.vif_upper.unwrap());
        let r = vif_aggregate(&synthetic_subbands(0.7, 0.0, 0.2)).unwrap();
        assert_eq!(r.vif_approx, 0.0);
        assert_eq!(r.vif_lower, 0.0);
    }

    #[test]
    fn vif_sandwich_synthetic() {
        let r = vif_aggregate(&synthetic_subbands(0.8, 0.9, 0.1)).unwrap();
        assert_eq!(r.approx_outside_bounds, 0);
        assert!(r.vif_lower <= r.vif_approx && r.vif_approx <= r.vif_upper.unwrap(), "{r:?}");
    }

    #[test]
    fn vif_gaussian_collapse_isotropic() {
        let mut sbs = synthetic_subbands(1.0, 0.6, 0.3);
        for sb in &mut sbs {
            sb.u_params = MggdParams::isotropic(4, 1.0).unwrap().scaled(1.7).unwrap();
        }
        let r = vif_aggregate(&sbs).unwrap();
        assert_abs_diff_eq!(r.vif_lower, r.vif_approx, epsilon = 1e-9);
        assert_abs_diff_eq!(r.vif_upper.unwrap(), r.vif_approx, epsilon = 1e-9);
        // classic closed form
        let (mut num, mut den) = (0.0, 0.0);
        for sb in &sbs {
            for b in &sb.blocks {
                num += gaussian_channel_mi(sb.u_params.scatter(), b.channel.gain * b.z, b.channel.total_noise_var());
                den += gaussian_channel_mi(sb.u_params.scatter(), b.z, b.channel.neural_noise_var);
            }
        }
        assert_abs_diff_eq!(r.vif_approx, num / den, epsilon = 1e-9);
    }

    #[test]
    fn vif_monotone_in_distortion() {
        let mut prev = f64::INFINITY;
        for i in 0..8 {
            let r = vif_aggregate(&synthetic_subbands(0.7, 0.8, 0.05 * i as f64)).unwrap();
            assert!(r.vif_approx <= prev);
            prev = r.vif_approx;
        }
        let mut prev = -1.0;
        for i in 0..=10 {
            let r = vif_aggregate(&synthetic_subbands(0.7, 0.1 * i as f64, 0.1)).unwrap();
            assert!(r.vif_approx >= prev);
            prev = r.vif_approx;
        }
    }

    #[test]
    fn vif_upper_absent_with_infinite_fim() {
        let sb = SubbandInput {
            id: sid(0),
            u_params: MggdParams::isotropic(1, 0.2).unwrap(),
            blocks: vec![BlockInput {
                z: 1.0,
                channel: ChannelParams::identity(0.1).unwrap(),
            }],
        };
        let r = vif_aggregate(&[sb]).unwrap();
        assert!(r.vif_upper.is_none());
        assert_eq!(r.vif_lower, 0.0);
    }

    #[test]
    fn vif_degenerate_reference() {
        let mut sbs = synthetic_subbands(0.7, 1.0, 0.0);
        for sb in &mut sbs {
            for b in &mut sb.blocks {
                b.z = 0.0;
            }
        }
        assert!(matches!(vif_aggregate(&sbs), Err(Error::DegenerateReference(_))));
    }
}
