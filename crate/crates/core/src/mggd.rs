//! Zero-mean multivariate generalized Gaussian distribution
//!
//! The density is
//!
//! ```text
//! f(u) = α Γ(M/2) / (π^{M/2} Γ(M/(2α)) 2^{M/(2α)}) · det(C)^{-1/2} · exp(-½ (uᵀC⁻¹u)^α)
//! ```
//!
//! with scatter matrix `C` and shape `α`; `α = 1` is the Gaussian `N(0, C)`.
//! All normalizer arithmetic goes through log-gamma.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::{self, SpdFactor};
use crate::stream::{self, CHUNK};

const LN_PI: f64 = 1.144_729_885_849_400_2;

/// Shape bracket searched by [`shape_from_kurtosis`].
pub const SHAPE_BRACKET: (f64, f64) = (0.05, 10.0);

/// Parameters of `MGGD(0, α, C)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "MggdParamsRepr", into = "MggdParamsRepr")]
pub struct MggdParams {
    shape: f64,
    scatter: DMatrix<f64>,
    factor: SpdFactor,
}

#[derive(Serialize, Deserialize)]
struct MggdParamsRepr {
    dim: usize,
    shape: f64,
    scatter: Vec<Vec<f64>>,
}

impl TryFrom<MggdParamsRepr> for MggdParams {
    type Error = Error;

    fn try_from(r: MggdParamsRepr) -> Result<Self> {
        let scatter = linalg::from_rows(&r.scatter)?;
        if scatter.nrows() != r.dim {
            return Err(Error::DimensionMismatch {
                expected: r.dim,
                actual: scatter.nrows(),
            });
        }
        MggdParams::new(r.shape, scatter)
    }
}

impl From<MggdParams> for MggdParamsRepr {
    fn from(p: MggdParams) -> Self {
        MggdParamsRepr {
            dim: p.dim(),
            shape: p.shape,
            scatter: linalg::to_rows(&p.scatter),
        }
    }
}

impl MggdParams {
    pub fn new(shape: f64, scatter: DMatrix<f64>) -> Result<Self> {
        if !(shape > 0.0) || !shape.is_finite() {
            return Err(Error::invalid("shape", format!("must be positive, got {shape}")));
        }
        if scatter.nrows() == 0 {
            return Err(Error::invalid("scatter", "dimension must be at least 1"));
        }
        let factor = SpdFactor::new(&scatter)?;
        Ok(Self {
            shape,
            scatter,
            factor,
        })
    }

    /// `MGGD(0, α, I_M)`.
    pub fn isotropic(dim: usize, shape: f64) -> Result<Self> {
        Self::new(shape, DMatrix::identity(dim, dim))
    }

    /// Builds the distribution whose covariance matrix is `covariance`.
    pub fn from_covariance(shape: f64, covariance: &DMatrix<f64>) -> Result<Self> {
        let dim = covariance.nrows();
        if !(shape > 0.0) {
            return Err(Error::invalid("shape", format!("must be positive, got {shape}")));
        }
        Self::new(shape, covariance_to_scatter(covariance, shape, dim))
    }

    pub fn dim(&self) -> usize {
        self.scatter.nrows()
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn scatter(&self) -> &DMatrix<f64> {
        &self.scatter
    }

    pub(crate) fn factor(&self) -> &SpdFactor {
        &self.factor
    }

    /// Same shape, scatter multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.shape, &self.scatter * s)
    }

    /// Mahalanobis quadratic form `uᵀ C⁻¹ u`.
    pub fn quad_form(&self, point: &[f64]) -> f64 {
        self.factor.quad_form(point)
    }

    /// Log-density in nats.
    pub fn log_pdf(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: point.len(),
            });
        }
        Ok(self.log_pdf_unchecked(point))
    }

    pub(crate) fn log_pdf_unchecked(&self, point: &[f64]) -> f64 {
        let q = self.quad_form(point);
        self.log_normalizer() - 0.5 * q.powf(self.shape)
    }

    /// Log of the full normalizing constant, including `det(C)^{-1/2}`.
    pub fn log_normalizer(&self) -> f64 {
        log_normalizer_unit(self.dim(), self.shape) - 0.5 * self.factor.log_det()
    }

    /// Differential entropy in nats.
    pub fn entropy(&self) -> f64 {
        let m = self.dim() as f64;
        m / (2.0 * self.shape) - log_normalizer_unit(self.dim(), self.shape)
            + 0.5 * self.factor.log_det()
    }

    /// Fisher information matrix under translation.
    pub fn fisher_information(&self) -> FisherInfo {
        match fisher_coefficient(self.dim(), self.shape) {
            Some(c) => {
                let matrix = self.factor.inverse() * c;
                FisherInfo {
                    finite: true,
                    matrix: Some(matrix),
                }
            }
            None => FisherInfo {
                finite: false,
                matrix: None,
            },
        }
    }

    /// Trace of the Fisher information, `None` when it is infinite.
    pub fn fisher_trace(&self) -> Option<f64> {
        fisher_coefficient(self.dim(), self.shape).map(|c| c * self.factor.inverse().trace())
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        scatter_to_covariance(&self.scatter, self.shape)
    }

    /// Mardia kurtosis of this distribution (independent of the scatter).
    pub fn mardia_kurtosis(&self) -> f64 {
        mardia_kurtosis_closed_form(self.dim(), self.shape)
    }

    /// Draws `n` samples as an `n × M` matrix, deterministically from `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> DMatrix<f64> {
        let m = self.dim();
        let sampler = Sampler::new(self);
        let chunks = stream::map_chunks(n, |c, len| {
            let mut buf = vec![0.0; len * m];
            sampler.fill_chunk(seed, c as u64, &mut buf);
            buf
        });
        let mut out = DMatrix::zeros(n, m);
        for (c, buf) in chunks.iter().enumerate() {
            for (r, row) in buf.chunks_exact(m).enumerate() {
                for (j, v) in row.iter().enumerate() {
                    out[(c * CHUNK + r, j)] = *v;
                }
            }
        }
        out
    }
}

/// Fisher information under translation; populated only when finite.
#[derive(Debug, Clone, Serialize)]
pub struct FisherInfo {
    pub finite: bool,
    pub matrix: Option<DMatrix<f64>>,
}

impl FisherInfo {
    pub fn trace(&self) -> Option<f64> {
        self.matrix.as_ref().map(|m| m.trace())
    }
}

/// Radial/direction sampler for a fixed parameter set.
///
/// `s = ½(uᵀC⁻¹u)^α` is `Gamma(M/(2α), 1)`, so the squared Mahalanobis radius
/// is `r² = t^{1/α}` with `t ~ Gamma(M/(2α), scale 2)`.
pub(crate) struct Sampler {
    dim: usize,
    shape: f64,
    lower: DMatrix<f64>,
    radial: Gamma<f64>,
}

impl Sampler {
    pub(crate) fn new(params: &MggdParams) -> Self {
        let m = params.dim() as f64;
        Self {
            dim: params.dim(),
            shape: params.shape,
            lower: params.factor.lower(),
            radial: Gamma::new(m / (2.0 * params.shape), 2.0).expect("valid gamma parameters"),
        }
    }

    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let m = self.dim;
        let mut dir = [0.0f64; 64];
        let mut heap;
        let dir: &mut [f64] = if m <= 64 {
            &mut dir[..m]
        } else {
            heap = vec![0.0; m];
            &mut heap
        };
        let norm = loop {
            let mut s = 0.0;
            for d in dir.iter_mut() {
                *d = StandardNormal.sample(rng);
                s += *d * *d;
            }
            if s > 0.0 {
                break s.sqrt();
            }
        };
        let t: f64 = self.radial.sample(rng);
        let r = t.powf(0.5 / self.shape);
        let scale = r / norm;
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += self.lower[(i, j)] * dir[j];
            }
            *o = acc * scale;
        }
    }

    pub(crate) fn fill_chunk(&self, seed: u64, chunk: u64, out: &mut [f64]) {
        let mut rng = stream::substream(seed, chunk);
        for row in out.chunks_exact_mut(self.dim) {
            self.draw(&mut rng, row);
        }
    }
}

/// Log normalizer with unit scatter: `log[α Γ(M/2) / (π^{M/2} Γ(M/(2α)) 2^{M/(2α)})]`.
pub fn log_normalizer_unit(dim: usize, shape: f64) -> f64 {
    let m = dim as f64;
    let k = m / (2.0 * shape);
    shape.ln() + ln_gamma(m / 2.0) - 0.5 * m * LN_PI - ln_gamma(k) - k * std::f64::consts::LN_2
}

/// Whether the Fisher information is finite: `α > 1/2 − M/4`.
pub fn fisher_is_finite(dim: usize, shape: f64) -> bool {
    shape > 0.5 - dim as f64 / 4.0
}

/// Scalar `c` such that `J(U) = c · C⁻¹`, or `None` when infinite.
pub fn fisher_coefficient(dim: usize, shape: f64) -> Option<f64> {
    if !fisher_is_finite(dim, shape) {
        return None;
    }
    if shape == 1.0 {
        return Some(1.0);
    }
    let m = dim as f64;
    let ln = (2.0 - 1.0 / shape) * std::f64::consts::LN_2 + 2.0 * shape.ln()
        + ln_gamma(2.0 + (m - 2.0) / (2.0 * shape))
        - m.ln()
        - ln_gamma(m / (2.0 * shape));
    Some(ln.exp())
}

/// `c(α, M)` with covariance `= c · scatter`.
pub fn covariance_factor(dim: usize, shape: f64) -> f64 {
    if shape == 1.0 {
        return 1.0;
    }
    let m = dim as f64;
    let ln = std::f64::consts::LN_2 / shape + ln_gamma((m + 2.0) / (2.0 * shape))
        - m.ln()
        - ln_gamma(m / (2.0 * shape));
    ln.exp()
}

pub fn scatter_to_covariance(scatter: &DMatrix<f64>, shape: f64) -> DMatrix<f64> {
    scatter * covariance_factor(scatter.nrows(), shape)
}

pub fn covariance_to_scatter(covariance: &DMatrix<f64>, shape: f64, dim: usize) -> DMatrix<f64> {
    covariance / covariance_factor(dim, shape)
}

/// Mardia excess kurtosis of an MGGD:
/// `M² Γ((M+4)/(2α)) Γ(M/(2α)) / Γ((M+2)/(2α))² − M(M+2)`.
pub fn mardia_kurtosis_closed_form(dim: usize, shape: f64) -> f64 {
    let m = dim as f64;
    if shape == 1.0 {
        return 0.0;
    }
    let two_a = 2.0 * shape;
    let ln_ratio =
        ln_gamma((m + 4.0) / two_a) + ln_gamma(m / two_a) - 2.0 * ln_gamma((m + 2.0) / two_a);
    m * m * ln_ratio.exp() - m * (m + 2.0)
}

/// Result of inverting the kurtosis curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeFit {
    pub shape: f64,
    /// Target was outside the attainable range and the shape was pinned to a
    /// bracket endpoint.
    pub clamped: bool,
}

/// Finds `α` in [`SHAPE_BRACKET`] with `mardia_kurtosis_closed_form(M, α) = target`.
///
/// The kurtosis is strictly decreasing in `α`, so plain bisection is used.
pub fn shape_from_kurtosis(dim: usize, target: f64) -> Result<ShapeFit> {
    let m = dim as f64;
    if dim == 0 {
        return Err(Error::invalid("dim", "must be at least 1"));
    }
    if !target.is_finite() || target <= -m * (m + 2.0) {
        return Err(Error::invalid(
            "target_kurtosis",
            format!("{target} is not above the infimum {}", -m * (m + 2.0)),
        ));
    }
    if target == 0.0 {
        return Ok(ShapeFit {
            shape: 1.0,
            clamped: false,
        });
    }
    let (mut lo, mut hi) = SHAPE_BRACKET;
    if target >= mardia_kurtosis_closed_form(dim, lo) {
        log::warn!("kurtosis {target} above attainable range for M={dim}; clamping shape to {lo}");
        return Ok(ShapeFit {
            shape: lo,
            clamped: true,
        });
    }
    if target <= mardia_kurtosis_closed_form(dim, hi) {
        log::warn!("kurtosis {target} below attainable range for M={dim}; clamping shape to {hi}");
        return Ok(ShapeFit {
            shape: hi,
            clamped: true,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mardia_kurtosis_closed_form(dim, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ShapeFit {
        shape: 0.5 * (lo + hi),
        clamped: false,
    })
}
