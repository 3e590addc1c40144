//! Estimators for the per-subband source model and per-window channel.

use nalgebra::DMatrix;
use serde::Serialize;

use super::blocks::SubbandField;
use crate::error::{Error, Result};
use crate::infotheory::ChannelParams;
use crate::linalg::{self, SpdFactor};
use crate::mggd::{self, MggdParams, SHAPE_BRACKET};

const MAX_CONDITION: f64 = 1e12;
const CONDITIONING_LOAD: f64 = 1e-10;
const MIN_CHANNEL_VAR: f64 = 1e-10;
/// Floor on `σ_v²` as a fraction of the window's reference variance.
const REL_NOISE_FLOOR: f64 = 1e-10;

/// Fitted GSM/GGSM source model of one subband.
#[derive(Debug, Clone)]
pub struct SubbandModel {
    /// Second-moment matrix of `U` under the convention `E[Z²] = 1`.
    pub covariance_estimate: DMatrix<f64>,
    /// Scatter matrix for the current shape.
    pub scatter_estimate: DMatrix<f64>,
    /// Per-block `ẑᵢ² = Cᵢᵀ Σ̂⁻¹ Cᵢ / M`.
    pub z_sq: Vec<f64>,
    pub alpha: f64,
    factor: SpdFactor,
}

impl SubbandModel {
    pub fn dim(&self) -> usize {
        self.covariance_estimate.nrows()
    }

    /// Same covariance, new shape; the scatter is rescaled accordingly.
    pub fn with_shape(mut self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::invalid("alpha", format!("must be positive, got {alpha}")));
        }
        self.alpha = alpha;
        self.scatter_estimate = mggd::covariance_to_scatter(&self.covariance_estimate, alpha, self.dim());
        Ok(self)
    }

    pub fn u_params(&self) -> Result<MggdParams> {
        MggdParams::new(self.alpha, self.scatter_estimate.clone())
    }

    /// `Cᵀ Σ̂⁻¹ C`.
    pub fn quad_form(&self, block: &[f64]) -> f64 {
        self.factor.quad_form(block)
    }
}

/// Fits `Σ̂_U = (1/N) Σ CᵢCᵢᵀ` and per-block `ẑᵢ²` with `α = 1`.
pub fn fit_gsm(field: &SubbandField) -> Result<SubbandModel> {
    let m = field.dim();
    let n = field.n_blocks();
    if n <= m {
        return Err(Error::NotEnoughData(format!(
            "subband {:?} has {n} blocks for dimension {m}",
            field.id
        )));
    }
    let mut cov = DMatrix::<f64>::zeros(m, m);
    for b in field.iter() {
        for i in 0..m {
            for j in 0..=i {
                cov[(i, j)] += b[i] * b[j];
            }
        }
    }
    for i in 0..m {
        for j in 0..=i {
            let v = cov[(i, j)] / n as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let tr = cov.trace();
    if !(tr > 0.0) || !tr.is_finite() {
        return Err(Error::DegenerateReference(format!(
            "subband {:?} has no energy",
            field.id
        )));
    }
    let ev = linalg::eigenvalues(&cov);
    let (min, max) = (ev.min(), ev.max());
    if !(min > 0.0) || max / min > MAX_CONDITION {
        let load = CONDITIONING_LOAD * tr / m as f64;
        for i in 0..m {
            cov[(i, i)] += load;
        }
    }
    let factor = SpdFactor::new(&cov)?;
    let z_sq = field.iter().map(|b| factor.quad_form(b) / m as f64).collect();
    Ok(SubbandModel {
        scatter_estimate: cov.clone(),
        covariance_estimate: cov,
        z_sq,
        alpha: 1.0,
        factor,
    })
}

/// Partition of the block grid into square tiles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Windows {
    pub tile_side: usize,
    /// Window index of each block, in block order.
    pub of_block: Vec<usize>,
    pub count: usize,
}

impl Windows {
    /// Tiles of `⌈√window⌉ × ⌈√window⌉` blocks; partial tiles at the right and
    /// bottom edges are kept.
    pub fn new(grid: (usize, usize), window: usize) -> Self {
        let tile_side = ((window.max(1) as f64).sqrt().ceil() as usize).max(1);
        let (cols, rows) = grid;
        let tiles_x = cols.div_ceil(tile_side);
        let tiles_y = rows.div_ceil(tile_side);
        let mut of_block = Vec::with_capacity(cols * rows);
        for by in 0..rows {
            for bx in 0..cols {
                of_block.push((by / tile_side) * tiles_x + bx / tile_side);
            }
        }
        Self {
            tile_side,
            of_block,
            count: tiles_x * tiles_y,
        }
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count];
        for (i, &w) in self.of_block.iter().enumerate() {
            out[w].push(i);
        }
        out
    }
}

/// Shape estimate with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaEstimate {
    pub alpha: f64,
    /// Estimated Mardia excess kurtosis of `U`.
    pub kurtosis: f64,
    pub usable_blocks: usize,
    pub clamped: bool,
    /// Always true: the estimator relies on the mixing field being roughly
    /// constant within a window.
    pub experimental: bool,
}

/// Estimates the MGGD shape of `U` for one subband.
///
/// Within a window the mixing value is treated as constant, so
/// `qᵢ = CᵢᵀΣ̂⁻¹Cᵢ` is `z_w²` times an MGGD quadratic form. Per window, the
/// unbiased estimates `Σq²/n` of `z_w⁴E[q_U²]` and `Σ_{i≠j} qᵢqⱼ / (n(n−1))` of
/// `z_w⁴E[q_U]²` are pooled across windows and their ratio gives
/// `E[q²]/E[q]²`, from which the Mardia kurtosis follows.
pub fn estimate_alpha(field: &SubbandField, model: &SubbandModel, window: usize) -> Result<AlphaEstimate> {
    let m = field.dim();
    let mf = m as f64;
    let mut sorted = model.z_sq.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median = sorted.get(sorted.len() / 2).copied().unwrap_or(0.0);
    let threshold = 1e-8 * median;
    let usable: Vec<bool> = model.z_sq.iter().map(|&z| z >= threshold && z > 0.0).collect();
    let n_usable = usable.iter().filter(|&&u| u).count();
    if n_usable < 10 * m {
        return Err(Error::NotEnoughData(format!(
            "{n_usable} usable blocks, need at least {}",
            10 * m
        )));
    }
    let windows = Windows::new(field.grid, window);
    let mut fourth = 0.0;
    let mut cross = 0.0;
    for members in windows.members() {
        let qs: Vec<f64> = members
            .iter()
            .filter(|&&i| usable[i])
            .map(|&i| model.z_sq[i] * mf)
            .collect();
        let n = qs.len();
        if n < 2 {
            continue;
        }
        let s1: f64 = qs.iter().sum();
        let s2: f64 = qs.iter().map(|q| q * q).sum();
        let nf = n as f64;
        fourth += s2 / nf;
        cross += (s1 * s1 - s2) / (nf * (nf - 1.0));
    }
    if !(cross > 0.0) {
        return Err(Error::NotEnoughData("no window with two usable blocks".into()));
    }
    let kurtosis = mf * mf * fourth / cross - mf * (mf + 2.0);
    let fit = if kurtosis <= -mf * (mf + 2.0) {
        mggd::ShapeFit {
            shape: SHAPE_BRACKET.1,
            clamped: true,
        }
    } else {
        mggd::shape_from_kurtosis(m, kurtosis)?
    };
    Ok(AlphaEstimate {
        alpha: fit.shape,
        kurtosis,
        usable_blocks: n_usable,
        clamped: fit.clamped,
        experimental: true,
    })
}

/// Channel estimates for one subband: one parameter set per window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelFit {
    pub windows: Windows,
    pub per_window: Vec<ChannelParams>,
}

impl ChannelFit {
    pub fn for_block(&self, i: usize) -> ChannelParams {
        self.per_window[self.windows.of_block[i]]
    }
}

/// Per-window gain `g = Cov(C, D)/Var(C)` (clamped at zero) and distortion
/// noise `σ_v² = Var(D) − g·Cov(C, D)` (floored at 1e-10·Var(C)).
pub fn fit_channel(
    reference: &SubbandField,
    distorted: &SubbandField,
    window: usize,
    neural_noise_var: f64,
) -> Result<ChannelFit> {
    if reference.grid != distorted.grid || reference.block_side != distorted.block_side {
        return Err(Error::invalid(
            "distorted",
            format!(
                "block geometry {:?}/{} differs from reference {:?}/{}",
                distorted.grid, distorted.block_side, reference.grid, reference.block_side
            ),
        ));
    }
    let windows = Windows::new(reference.grid, window);
    let per_window = windows
        .members()
        .iter()
        .map(|members| {
            let (g, sv) = window_channel(reference, distorted, members);
            ChannelParams::new(g, sv, neural_noise_var)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChannelFit {
        windows,
        per_window,
    })
}

fn window_channel(reference: &SubbandField, distorted: &SubbandField, members: &[usize]) -> (f64, f64) {
    let count = (members.len() * reference.dim()) as f64;
    if count == 0.0 {
        return (0.0, MIN_CHANNEL_VAR);
    }
    let (mut sc, mut sd) = (0.0, 0.0);
    for &i in members {
        sc += reference.block(i).iter().sum::<f64>();
        sd += distorted.block(i).iter().sum::<f64>();
    }
    let (mc, md) = (sc / count, sd / count);
    let (mut vc, mut vd, mut cv) = (0.0, 0.0, 0.0);
    for &i in members {
        for (c, d) in reference.block(i).iter().zip(distorted.block(i)) {
            let (c, d) = (c - mc, d - md);
            vc += c * c;
            vd += d * d;
            cv += c * d;
        }
    }
    let (vc, vd, cv) = (vc / count, vd / count, cv / count);
    let g = if vc < MIN_CHANNEL_VAR { 0.0 } else { (cv / vc).max(0.0) };
    let sv = (vd - g * cv).max(REL_NOISE_FLOOR * vc);
    (g, sv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::blocks::SubbandId;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, StandardNormal};

    const ID: SubbandId = SubbandId {
        scale: 0,
        orientation: 0,
    };

    fn field(grid: (usize, usize), side: usize, blocks: Vec<f64>) -> SubbandField {
        SubbandField::from_blocks(ID, side, side, grid, blocks)
    }

    fn ar_cov(m: usize, r: f64) -> DMatrix<f64> {
        DMatrix::from_fn(m, m, |i, j| r.powi((i as i32 - j as i32).abs()))
    }

    #[test]
    fn zero_block_has_zero_z() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut data: Vec<f64> = (0..40 * 4).map(|_| StandardNormal.sample(&mut rng)).collect();
        for v in &mut data[0..4] {
            *v = 0.0;
        }
        let m = fit_gsm(&field((40, 1), 2, data)).unwrap();
        assert_eq!(m.z_sq[0], 0.0);
        let mean = m.z_sq.iter().sum::<f64>() / 40.0;
        // Σ ẑ² / N = tr(Σ̂⁻¹ Σ̂)/M = 1 exactly
        assert_abs_diff_eq!(mean, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn too_few_blocks() {
        let f = field((4, 1), 2, vec![1.0; 16]);
        assert!(matches!(fit_gsm(&f), Err(Error::NotEnoughData(_))));
    }

    #[test]
    fn zero_energy_is_degenerate() {
        let f = field((20, 1), 2, vec![0.0; 80]);
        assert!(matches!(fit_gsm(&f), Err(Error::DegenerateReference(_))));
    }

    #[test]
    fn rank_deficient_is_conditioned() {
        // all blocks proportional to one vector
        let mut data = Vec::new();
        for i in 0..30 {
            let s = (i as f64 - 14.5) * 0.1;
            data.extend_from_slice(&[s, 2.0 * s, -s, 0.5 * s]);
        }
        let m = fit_gsm(&field((30, 1), 2, data)).unwrap();
        assert!(m.z_sq.iter().all(|z| z.is_finite()));
    }

    #[test]
    fn recovers_gsm_covariance() {
        let m = 9;
        let c = ar_cov(m, 0.6);
        let p = MggdParams::new(1.0, c.clone()).unwrap();
        let n = 100_000;
        let u = p.sample(n, 3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        // E[Z²] = 1 with Z² uniform on [0.2, 1.8]
        let mut data = Vec::with_capacity(n * m);
        for i in 0..n {
            let z = rng.random_range(0.2f64..1.8).sqrt();
            for j in 0..m {
                data.push(z * u[(i, j)]);
            }
        }
        let model = fit_gsm(&field((n, 1), 3, data)).unwrap();
        let rel = (&model.covariance_estimate - &c).norm() / c.norm();
        assert!(rel < 0.02, "relative error {rel}");
        let mean = model.z_sq.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.01);
    }

    /// Blocks with a mixing value that is constant on 4×4 tiles of the grid.
    fn ggsm_field(alpha: f64, grid: (usize, usize), seed: u64, z_law: impl Fn(&mut rand_chacha::ChaCha8Rng) -> f64) -> SubbandField {
        let m = 9;
        let p = MggdParams::from_covariance(alpha, &ar_cov(m, 0.5)).unwrap();
        let n = grid.0 * grid.1;
        let u = p.sample(n, seed);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed + 100);
        let tiles = Windows::new(grid, 16);
        let zs: Vec<f64> = (0..tiles.count).map(|_| z_law(&mut rng)).collect();
        let mut data = Vec::with_capacity(n * m);
        for i in 0..n {
            let z = zs[tiles.of_block[i]];
            for j in 0..m {
                data.push(z * u[(i, j)]);
            }
        }
        SubbandField::from_blocks(ID, 3, 3, grid, data)
    }

    #[test]
    fn alpha_recovered_from_ggsm() {
        for (alpha, seed) in [(1.0, 10), (0.6, 11), (1.5, 12)] {
            let f = ggsm_field(alpha, (400, 250), seed, |r| r.random_range(0.3f64..2.0));
            let model = fit_gsm(&f).unwrap();
            let est = estimate_alpha(&f, &model, 16).unwrap();
            assert!((est.alpha - alpha).abs() < 0.1, "α={alpha}: {est:?}");
            assert!(est.experimental);
        }
    }

    #[test]
    fn alpha_constant_z_is_gaussian() {
        let f = ggsm_field(1.0, (300, 100), 21, |_| 1.0);
        let model = fit_gsm(&f).unwrap();
        let est = estimate_alpha(&f, &model, 16).unwrap();
        assert!((est.alpha - 1.0).abs() < 0.1, "{est:?}");
    }

    #[test]
    fn alpha_needs_enough_blocks() {
        let f = ggsm_field(1.0, (8, 8), 3, |_| 1.0);
        let model = fit_gsm(&f).unwrap();
        assert!(matches!(estimate_alpha(&f, &model, 16), Err(Error::NotEnoughData(_))));
    }

    #[test]
    fn windows_tile_grid() {
        let w = Windows::new((10, 5), 16);
        assert_eq!(w.tile_side, 4);
        assert_eq!(w.count, 3 * 2);
        assert_eq!(w.of_block[0], 0);
        assert_eq!(w.of_block[4], 1);
        assert_eq!(w.of_block[9], 2);
        assert_eq!(w.of_block[4 * 10], 3);
        let w = Windows::new((3, 3), 1);
        assert_eq!(w.count, 9);
    }

    fn gaussian_field(n_blocks: usize, m: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n_blocks * m).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn channel_identity() {
        let c = field((40, 40), 3, gaussian_field(1600, 9, 1));
        let fit = fit_channel(&c, &c, 16, 0.1).unwrap();
        for ch in &fit.per_window {
            assert_eq!(ch.gain, 1.0);
            assert!(ch.distortion_noise_var <= 1e-9, "{}", ch.distortion_noise_var);
        }
        let tiny: Vec<f64> = gaussian_field(1600, 9, 1).iter().map(|v| 1e-3 * v).collect();
        let c = field((40, 40), 3, tiny);
        for ch in &fit_channel(&c, &c, 16, 1e-7).unwrap().per_window {
            assert!(ch.distortion_noise_var <= 1e-15);
        }
    }

    #[test]
    fn channel_recovers_gain_and_noise() {
        let grid = (100, 100);
        let c = gaussian_field(10_000, 9, 2);
        let noise = gaussian_field(10_000, 9, 3);
        let d: Vec<f64> = c.iter().zip(&noise).map(|(c, n)| 0.5 * c + 0.1f64.sqrt() * n).collect();
        let cf = field(grid, 3, c);
        let df = field(grid, 3, d);
        // a single window spanning every block
        let fit = fit_channel(&cf, &df, 10_000, 0.1).unwrap();
        assert_eq!(fit.per_window.len(), 1);
        let ch = fit.per_window[0];
        assert!((ch.gain - 0.5).abs() < 0.02, "{ch:?}");
        assert!((ch.distortion_noise_var - 0.1).abs() < 0.01, "{ch:?}");
    }

    #[test]
    fn channel_uncorrelated() {
        let grid = (100, 100);
        let c = field(grid, 3, gaussian_field(10_000, 9, 5));
        let d_raw = gaussian_field(10_000, 9, 6);
        let var_d = d_raw.iter().map(|v| v * v).sum::<f64>() / d_raw.len() as f64;
        let d = field(grid, 3, d_raw);
        let ch = fit_channel(&c, &d, 10_000, 0.1).unwrap().per_window[0];
        assert!(ch.gain < 0.02);
        assert!((ch.distortion_noise_var - var_d).abs() < 0.02);
    }

    #[test]
    fn channel_zero_reference() {
        let c = field((10, 10), 3, vec![0.0; 900]);
        let d = field((10, 10), 3, gaussian_field(100, 9, 7));
        let fit = fit_channel(&c, &d, 16, 0.1).unwrap();
        assert!(fit.per_window.iter().all(|ch| ch.gain == 0.0));
    }

    #[test]
    fn channel_misaligned() {
        let c = field((10, 10), 3, vec![0.0; 900]);
        let d = field((10, 9), 3, vec![0.0; 810]);
        assert!(fit_channel(&c, &d, 16, 0.1).is_err());
    }
}
