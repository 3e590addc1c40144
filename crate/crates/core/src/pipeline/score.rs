use serde::{Deserialize, Serialize};

use super::blocks::{vectorize, SubbandField, SubbandId};
use super::estimate::{estimate_alpha, fit_channel, fit_gsm, AlphaEstimate, ChannelFit, SubbandModel};
use super::plane::Plane;
use super::pyramid::{check_size, decompose};
use crate::error::{Error, Result};
use crate::infotheory::{vif_aggregate, BlockInput, QualityReport, SubbandInput};

/// How the shape of `U` is chosen per subband.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    Fixed(f64),
    Estimate,
}

/// Neural noise variance, either relative to the mean coefficient variance of
/// each subband or absolute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeuralNoise {
    Relative(f64),
    Absolute(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub levels: usize,
    pub block_side: usize,
    pub alpha: AlphaMode,
    pub neural_noise: NeuralNoise,
    /// Blocks per channel window.
    pub window: usize,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            levels: 4,
            block_side: 3,
            alpha: AlphaMode::Fixed(1.0),
            neural_noise: NeuralNoise::Relative(0.1),
            window: 16,
        }
    }
}

impl ScoreConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::invalid("levels", "must be positive"));
        }
        if self.block_side == 0 {
            return Err(Error::invalid("block_side", "must be positive"));
        }
        if self.window == 0 {
            return Err(Error::invalid("window", "must be positive"));
        }
        if let AlphaMode::Fixed(a) = self.alpha {
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::invalid("alpha", format!("must be positive, got {a}")));
            }
        }
        let v = match self.neural_noise {
            NeuralNoise::Relative(v) | NeuralNoise::Absolute(v) => v,
        };
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::invalid("sigma_n", format!("must be positive, got {v}")));
        }
        Ok(())
    }
}

/// Everything estimated for one subband of an image pair.
#[derive(Debug, Clone)]
pub struct FittedSubband {
    pub reference: SubbandField,
    pub distorted: SubbandField,
    pub model: SubbandModel,
    pub channel: ChannelFit,
    pub neural_noise_var: f64,
    pub alpha_estimate: Option<AlphaEstimate>,
}

impl FittedSubband {
    pub fn id(&self) -> SubbandId {
        self.reference.id
    }

    pub fn to_input(&self) -> Result<SubbandInput> {
        let blocks = self
            .model
            .z_sq
            .iter()
            .enumerate()
            .map(|(i, &z2)| BlockInput {
                z: z2.sqrt(),
                channel: self.channel.for_block(i),
            })
            .collect();
        Ok(SubbandInput {
            id: self.id(),
            u_params: self.model.u_params()?,
            blocks,
        })
    }
}

/// Subbands whose mean coefficient energy is below this fraction of the mean
/// pixel energy are treated as empty.
const DEGENERATE_ENERGY: f64 = 1e-20;

/// Decomposes both images and fits the source and channel models of every
/// bandpass subband (finest scale first).
pub fn fit_pair(reference: &Plane, distorted: &Plane, cfg: &ScoreConfig) -> Result<Vec<FittedSubband>> {
    cfg.validate()?;
    if reference.width() != distorted.width() || reference.height() != distorted.height() {
        return Err(Error::SizeMismatch(
            reference.width(),
            reference.height(),
            distorted.width(),
            distorted.height(),
        ));
    }
    check_size(reference.width(), reference.height(), cfg.levels, cfg.block_side)?;
    let rp = decompose(reference, cfg.levels)?;
    let dp = decompose(distorted, cfg.levels)?;
    let b = cfg.block_side;
    let floor = DEGENERATE_ENERGY * reference.energy() / reference.data().len() as f64;
    rp.bands
        .iter()
        .zip(&dp.bands)
        .enumerate()
        .map(|(scale, (rb, db))| {
            let id = SubbandId {
                scale,
                orientation: 0,
            };
            let rf = vectorize(rb, id, b, b);
            let df = vectorize(db, id, b, b);
            let mut model = fit_gsm(&rf)?;
            if model.covariance_estimate.trace() / (model.dim() as f64) <= floor {
                return Err(Error::DegenerateReference(format!(
                    "reference subband {scale} carries no signal energy"
                )));
            }
            let alpha_estimate = match cfg.alpha {
                AlphaMode::Fixed(a) => {
                    model = model.with_shape(a)?;
                    None
                }
                AlphaMode::Estimate => {
                    let est = estimate_alpha(&rf, &model, cfg.window)?;
                    model = model.with_shape(est.alpha)?;
                    Some(est)
                }
            };
            let neural_noise_var = match cfg.neural_noise {
                NeuralNoise::Relative(r) => r * model.covariance_estimate.trace() / model.dim() as f64,
                NeuralNoise::Absolute(v) => v,
            };
            let channel = fit_channel(&rf, &df, cfg.window, neural_noise_var)?;
            Ok(FittedSubband {
                reference: rf,
                distorted: df,
                model,
                channel,
                neural_noise_var,
                alpha_estimate,
            })
        })
        .collect()
}

/// Full-reference score of `distorted` against `reference`.
pub fn score_pair(reference: &Plane, distorted: &Plane, cfg: &ScoreConfig) -> Result<QualityReport> {
    let fitted = fit_pair(reference, distorted, cfg)?;
    let inputs = fitted.iter().map(FittedSubband::to_input).collect::<Result<Vec<_>>>()?;
    vif_aggregate(&inputs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(w: usize, h: usize, phase: f64) -> Plane {
        Plane::from_fn(w, h, |x, y| {
            let (x, y) = (x as f64, y as f64);
            0.5 + 0.2 * (0.31 * x + phase).sin() * (0.17 * y).cos() + 0.1 * (0.05 * x * y + 0.7 * y).sin()
        })
    }

    #[test]
    fn identity_pair_scores_one() {
        let img = textured(96, 96, 0.0);
        let r = score_pair(&img, &img, &ScoreConfig::default()).unwrap();
        assert!((r.vif_approx - 1.0).abs() < 1e-6, "{}", r.vif_approx);
        assert!(r.vif_lower <= r.vif_approx && r.vif_approx <= r.vif_upper.unwrap());
        assert_eq!(r.per_subband.len(), 4);
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = textured(96, 96, 0.0);
        let b = textured(96, 95, 0.0);
        assert!(matches!(score_pair(&a, &b, &ScoreConfig::default()), Err(Error::SizeMismatch(..))));
        let small = textured(40, 40, 0.0);
        assert!(matches!(
            score_pair(&small, &small, &ScoreConfig::default()),
            Err(Error::ImageTooSmall { .. })
        ));
        let flat = Plane::from_fn(96, 96, |_, _| 0.3);
        assert!(matches!(
            score_pair(&flat, &flat, &ScoreConfig::default()),
            Err(Error::DegenerateReference(_))
        ));
        let cfg = ScoreConfig {
            alpha: AlphaMode::Fixed(0.0),
            ..ScoreConfig::default()
        };
        assert!(score_pair(&a, &a, &cfg).is_err());
    }
}
