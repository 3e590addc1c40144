//! Monte Carlo estimators used as ground truth for the closed forms.
//!
//! Every estimator is a pure function of `(parameters, n, seed)`: samples are
//! drawn in fixed-size chunks, each from its own ChaCha stream, and partial
//! results are merged in chunk order.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SpdFactor;
use crate::mggd::{MggdParams, Sampler};
use crate::stream::{self, CHUNK};

/// Minimum sample count for [`mc_entropy`] and [`mc_fim_trace`].
pub const MIN_ENTROPY_SAMPLES: usize = 10_000;
/// Minimum outer sample count for [`mc_mutual_information`].
pub const MIN_MI_SAMPLES: usize = 100_000;
/// Default (and minimum) inner sample count for [`mc_mutual_information`].
pub const MI_INNER_SAMPLES: usize = 1_000;
/// Margin above the finite-Fisher boundary inside which [`mc_fim_trace`] refuses.
pub const FIM_REFUSAL_MARGIN: f64 = 0.05;
pub const BOOTSTRAP_RESAMPLES: usize = 200;

const SEED_MIX: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl OracleEstimate {
    /// `|value − reference| / std_error`.
    pub fn z_score(&self, reference: f64) -> f64 {
        let d = (self.value - reference).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }

    pub fn agrees_with(&self, reference: f64, n_se: f64) -> bool {
        self.z_score(reference) <= n_se
    }
}

/// Streaming mean and sum of squared deviations (Chan et al. merge).
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub(crate) fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    pub(crate) fn merge(&mut self, o: &Moments) {
        if o.n == 0.0 {
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n / n;
        self.m2 += o.m2 + d * d * self.n * o.n / n;
        self.n = n;
    }

    /// Standard error of the mean; equals the jackknife standard error.
    pub(crate) fn std_error(&self) -> f64 {
        (self.m2 / (self.n - 1.0) / self.n).sqrt()
    }

    fn estimate(&self, seed: u64) -> OracleEstimate {
        OracleEstimate {
            value: self.mean,
            std_error: self.std_error(),
            n_samples: self.n as usize,
            seed,
        }
    }
}

fn merged(parts: Vec<Moments>) -> Moments {
    let mut acc = Moments::default();
    for p in &parts {
        acc.merge(p);
    }
    acc
}

/// Maps every sample of an MGGD stream to a scalar and returns its mean.
fn mggd_mean<F>(params: &MggdParams, n: usize, seed: u64, f: F) -> Moments
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let m = params.dim();
    let sampler = Sampler::new(params);
    merged(stream::map_chunks(n, |c, len| {
        let mut buf = vec![0.0; len * m];
        sampler.fill_chunk(seed, c as u64, &mut buf);
        let mut acc = Moments::default();
        for row in buf.chunks_exact(m) {
            acc.push(f(row));
        }
        acc
    }))
}

/// Resubstitution entropy estimate `−(1/n) Σ log f(Xᵢ)`.
pub fn mc_entropy(params: &MggdParams, n: usize, seed: u64) -> Result<OracleEstimate> {
    if n < MIN_ENTROPY_SAMPLES {
        return Err(Error::invalid("n", format!("need at least {MIN_ENTROPY_SAMPLES} samples")));
    }
    Ok(mggd_mean(params, n, seed, |x| -params.log_pdf_unchecked(x)).estimate(seed))
}

fn check_fim_margin(params: &MggdParams) -> Result<()> {
    let bound = 0.5 - params.dim() as f64 / 4.0 + FIM_REFUSAL_MARGIN;
    if params.shape() <= bound {
        return Err(Error::invalid(
            "shape",
            format!("{} is within the refusal margin (needs > {bound})", params.shape()),
        ));
    }
    Ok(())
}

/// Score `∇ log f(u) = −α (uᵀC⁻¹u)^{α−1} C⁻¹u`.
fn score(params: &MggdParams, inv: &DMatrix<f64>, u: &[f64], out: &mut [f64]) {
    let m = u.len();
    let mut q = 0.0;
    for i in 0..m {
        let mut acc = 0.0;
        for j in 0..m {
            acc += inv[(i, j)] * u[j];
        }
        out[i] = acc;
        q += u[i] * acc;
    }
    let c = -params.shape() * q.powf(params.shape() - 1.0);
    for o in out.iter_mut() {
        *o *= c;
    }
}

/// Monte Carlo mean of `‖∇ log f(X)‖²`, i.e. `tr J`.
pub fn mc_fim_trace(params: &MggdParams, n: usize, seed: u64) -> Result<OracleEstimate> {
    check_fim_margin(params)?;
    if n < MIN_ENTROPY_SAMPLES {
        return Err(Error::invalid("n", format!("need at least {MIN_ENTROPY_SAMPLES} samples")));
    }
    let inv = params.factor().inverse();
    let m = params.dim();
    Ok(mggd_mean(params, n, seed, |x| {
        let mut s = vec![0.0; m];
        score(params, &inv, x, &mut s);
        s.iter().map(|v| v * v).sum()
    })
    .estimate(seed))
}

/// Entry-wise Monte Carlo estimate of `J = E[s sᵀ]` with standard errors.
pub fn mc_fim_matrix(params: &MggdParams, n: usize, seed: u64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_fim_margin(params)?;
    let m = params.dim();
    let inv = params.factor().inverse();
    let sampler = Sampler::new(params);
    let parts = stream::map_chunks(n, |c, len| {
        let mut buf = vec![0.0; len * m];
        sampler.fill_chunk(seed, c as u64, &mut buf);
        let mut acc = vec![Moments::default(); m * m];
        let mut s = vec![0.0; m];
        for row in buf.chunks_exact(m) {
            score(params, &inv, row, &mut s);
            for i in 0..m {
                for j in 0..m {
                    acc[i * m + j].push(s[i] * s[j]);
                }
            }
        }
        acc
    });
    let mut acc = vec![Moments::default(); m * m];
    for p in &parts {
        for (a, b) in acc.iter_mut().zip(p) {
            a.merge(b);
        }
    }
    let mean = DMatrix::from_fn(m, m, |i, j| acc[i * m + j].mean);
    let se = DMatrix::from_fn(m, m, |i, j| acc[i * m + j].std_error());
    Ok((mean, se))
}

fn check_kurtosis_samples(n: usize, m: usize) -> Result<()> {
    if n <= 10 * m * m {
        return Err(Error::invalid(
            "samples",
            format!("need more than {} rows for dimension {m}", 10 * m * m),
        ));
    }
    Ok(())
}

fn second_moment_rows(samples: &DMatrix<f64>, idx: impl Iterator<Item = usize>) -> DMatrix<f64> {
    let m = samples.ncols();
    let mut s = DMatrix::<f64>::zeros(m, m);
    let mut count = 0.0;
    for r in idx {
        count += 1.0;
        for i in 0..m {
            let xi = samples[(r, i)];
            for j in 0..=i {
                s[(i, j)] += xi * samples[(r, j)];
            }
        }
    }
    for i in 0..m {
        for j in 0..=i {
            s[(i, j)] /= count;
            s[(j, i)] = s[(i, j)];
        }
    }
    s
}

fn plug_in_kurtosis(samples: &DMatrix<f64>, idx: &[usize]) -> Result<f64> {
    let m = samples.ncols();
    let s = second_moment_rows(samples, idx.iter().copied());
    let f = SpdFactor::new(&s)?;
    let mut row = vec![0.0; m];
    let mut acc = 0.0;
    for &r in idx {
        for (j, v) in row.iter_mut().enumerate() {
            *v = samples[(r, j)];
        }
        let q = f.quad_form(&row);
        acc += q * q;
    }
    let mf = m as f64;
    Ok(acc / idx.len() as f64 - mf * (mf + 2.0))
}

/// Plug-in Mardia kurtosis of zero-mean samples (rows) with a bootstrap
/// standard error over [`BOOTSTRAP_RESAMPLES`] resamples drawn from `seed`.
pub fn mc_mardia_kurtosis(samples: &DMatrix<f64>, seed: u64) -> Result<OracleEstimate> {
    let (n, m) = samples.shape();
    check_kurtosis_samples(n, m)?;
    let all: Vec<usize> = (0..n).collect();
    let value = plug_in_kurtosis(samples, &all)?;
    let mut rng = stream::substream(seed, 0);
    let mut boot = Moments::default();
    let mut idx = vec![0usize; n];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for v in idx.iter_mut() {
            *v = rng.random_range(0..n);
        }
        boot.push(plug_in_kurtosis(samples, &idx)?);
    }
    Ok(OracleEstimate {
        value,
        std_error: (boot.m2 / (boot.n - 1.0)).sqrt(),
        n_samples: n,
        seed,
    })
}

/// Plug-in Mardia kurtosis over a regenerable sample stream, without holding
/// the samples in memory.
///
/// `fill(chunk, out)` must write chunk `chunk` (row-major, `out.len() / dim`
/// rows) deterministically. The standard error uses the empirical influence
/// function of the estimator, `q² − 2 xᵀ T x`, with
/// `T = S⁻¹ (mean of q·xxᵀ) S⁻¹`, which accounts for the estimated
/// covariance `S`.
pub fn mc_mardia_kurtosis_stream<F>(dim: usize, n: usize, seed: u64, fill: F) -> Result<OracleEstimate>
where
    F: Fn(u64, &mut [f64]) + Sync,
{
    check_kurtosis_samples(n, dim)?;
    let m = dim;
    let chunk = |c: usize, len: usize| {
        let mut buf = vec![0.0; len * m];
        fill(c as u64, &mut buf);
        buf
    };
    // pass 1: second moments
    let parts = stream::map_chunks(n, |c, len| {
        let buf = chunk(c, len);
        let mut s = DMatrix::<f64>::zeros(m, m);
        for x in buf.chunks_exact(m) {
            for i in 0..m {
                for j in 0..=i {
                    s[(i, j)] += x[i] * x[j];
                }
            }
        }
        s
    });
    let mut s = DMatrix::<f64>::zeros(m, m);
    for p in &parts {
        s += p;
    }
    for i in 0..m {
        for j in 0..=i {
            s[(i, j)] /= n as f64;
            s[(j, i)] = s[(i, j)];
        }
    }
    let f = SpdFactor::new(&s)?;
    let inv = f.inverse();
    let quad = |mat: &DMatrix<f64>, x: &[f64]| {
        let mut q = 0.0;
        for i in 0..m {
            let mut acc = 0.0;
            for j in 0..m {
                acc += mat[(i, j)] * x[j];
            }
            q += x[i] * acc;
        }
        q
    };
    // pass 2: E[q²] and E[q xxᵀ]
    let parts = stream::map_chunks(n, |c, len| {
        let buf = chunk(c, len);
        let mut q2 = 0.0;
        let mut w = DMatrix::<f64>::zeros(m, m);
        for x in buf.chunks_exact(m) {
            let q = quad(&inv, x);
            q2 += q * q;
            for i in 0..m {
                for j in 0..=i {
                    w[(i, j)] += q * x[i] * x[j];
                }
            }
        }
        (q2, w)
    });
    let mut beta = 0.0;
    let mut w = DMatrix::<f64>::zeros(m, m);
    for (q2, p) in &parts {
        beta += q2;
        w += p;
    }
    beta /= n as f64;
    for i in 0..m {
        for j in 0..=i {
            w[(i, j)] /= n as f64;
            w[(j, i)] = w[(i, j)];
        }
    }
    let t = &inv * w * &inv;
    // pass 3: variance of the influence function
    let infl = merged(stream::map_chunks(n, |c, len| {
        let buf = chunk(c, len);
        let mut acc = Moments::default();
        for x in buf.chunks_exact(m) {
            let q = quad(&inv, x);
            acc.push(q * q - 2.0 * quad(&t, x));
        }
        acc
    }));
    let mf = m as f64;
    Ok(OracleEstimate {
        value: beta - mf * (mf + 2.0),
        std_error: (infl.m2 / (infl.n - 1.0) / infl.n).sqrt(),
        n_samples: n,
        seed,
    })
}

/// Streaming kurtosis estimate of MGGD samples.
pub fn mc_mggd_kurtosis(params: &MggdParams, n: usize, seed: u64) -> Result<OracleEstimate> {
    let sampler = Sampler::new(params);
    mc_mardia_kurtosis_stream(params.dim(), n, seed, |c, out| sampler.fill_chunk(seed, c, out))
}

/// Streaming kurtosis estimate of `X + Y` for independent MGGD `X`, `Y`.
pub fn mc_sum_kurtosis(x: &MggdParams, y: &MggdParams, n: usize, seed: u64) -> Result<OracleEstimate> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            actual: y.dim(),
        });
    }
    let sx = Sampler::new(x);
    let sy = Sampler::new(y);
    let seed_y = seed ^ SEED_MIX;
    mc_mardia_kurtosis_stream(x.dim(), n, seed, |c, out| {
        sx.fill_chunk(seed, c, out);
        let mut other = vec![0.0; out.len()];
        sy.fill_chunk(seed_y, c, &mut other);
        for (o, v) in out.iter_mut().zip(other) {
            *o += v;
        }
    })
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (-(a - b).abs()).exp().ln_1p()
}

/// Nested Monte Carlo estimate of `I(C; F | z) = h(F) − h(N)` for
/// `F = g·z·U + N`, `N ~ N(0, σ²I)`, with [`MI_INNER_SAMPLES`] inner samples.
///
/// Averages `log φ_σ(Nᵢ) − log f_F(Fᵢ)` over draws `Fᵢ = aUᵢ + Nᵢ`, whose
/// mean is `h(F) − h(N)`; pairing each `Fᵢ` with its own noise draw cancels
/// most of the outer variance. At zero gain the estimate is exactly zero.
pub fn mc_mutual_information(
    u_params: &MggdParams,
    z: f64,
    gain: f64,
    noise_var: f64,
    n: usize,
    seed: u64,
) -> Result<OracleEstimate> {
    mc_mutual_information_with(u_params, z, gain, noise_var, n, MI_INNER_SAMPLES, seed)
}

/// [`mc_mutual_information`] with an explicit inner sample size.
///
/// The inner density `f_F(f) = E_U[φ_σ(f − aU)]` is averaged with a two-way
/// mixture of proposals (half of the draws from the prior of `U`, half from
/// the Gaussian likelihood `N(f/a, (σ/a)²I)`) weighted by the balance
/// heuristic, which keeps every weight bounded whatever the signal-to-noise
/// ratio. Inner draws are fresh for every outer sample, so the reported
/// standard error covers both levels.
pub fn mc_mutual_information_with(
    u_params: &MggdParams,
    z: f64,
    gain: f64,
    noise_var: f64,
    n: usize,
    inner: usize,
    seed: u64,
) -> Result<OracleEstimate> {
    if n < MIN_MI_SAMPLES {
        return Err(Error::invalid("n", format!("need at least {MIN_MI_SAMPLES} samples")));
    }
    if inner < MI_INNER_SAMPLES {
        return Err(Error::invalid("inner", format!("need at least {MI_INNER_SAMPLES} inner samples")));
    }
    if !(noise_var > 0.0) {
        return Err(Error::invalid("noise_var", "must be positive"));
    }
    if !(z >= 0.0) {
        return Err(Error::invalid("z", "must be non-negative"));
    }
    let m = u_params.dim();
    let mf = m as f64;
    let a = gain.abs() * z;
    let sigma = noise_var.sqrt();
    let log_phi_norm = -0.5 * mf * (2.0 * PI * noise_var).ln();
    let log_phi = move |r2: f64| log_phi_norm - 0.5 * r2 / noise_var;
    let sampler = Sampler::new(u_params);
    let half = inner / 2;
    let ln_a = a.ln();
    let ln_k = (2 * half) as f64;
    let ln_k = ln_k.ln();
    let parts = stream::map_chunks(n, |c, len| {
        let mut rng = stream::substream(seed, c as u64);
        let mut acc = Moments::default();
        let mut u0 = vec![0.0; m];
        let mut f = vec![0.0; m];
        let mut u = vec![0.0; m];
        let mut terms = Vec::with_capacity(2 * half);
        for _ in 0..len {
            sampler.draw(&mut rng, &mut u0);
            let mut n2 = 0.0;
            for i in 0..m {
                let e: f64 = StandardNormal.sample(&mut rng);
                f[i] = a * u0[i] + sigma * e;
                n2 += noise_var * e * e;
            }
            if a == 0.0 {
                // F = N: both log-densities coincide
                acc.push(0.0);
                continue;
            }
            terms.clear();
            let term = |u: &[f64]| {
                let l1 = u_params.log_pdf_unchecked(u);
                let r2: f64 = f.iter().zip(u).map(|(fi, ui)| (fi - a * ui).powi(2)).sum();
                let l2 = mf * ln_a + log_phi(r2);
                std::f64::consts::LN_2 + l1 + l2 - mf * ln_a - log_add_exp(l1, l2)
            };
            for _ in 0..half {
                sampler.draw(&mut rng, &mut u);
                terms.push(term(&u));
            }
            for _ in 0..half {
                for i in 0..m {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    u[i] = (f[i] + sigma * e) / a;
                }
                terms.push(term(&u));
            }
            let hi = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = hi + terms.iter().map(|t| (t - hi).exp()).sum::<f64>().ln();
            acc.push(log_phi(n2) - (lse - ln_k));
        }
        acc
    });
    let acc = merged(parts);
    Ok(OracleEstimate {
        value: acc.mean,
        std_error: acc.std_error(),
        n_samples: n,
        seed,
    })
}

/// Rows of an `n × M` sample matrix in chunk-sized pieces; used by tests that
/// need both in-memory and streaming access to the same draws.
pub fn mggd_chunk(params: &MggdParams, seed: u64, chunk: u64) -> Vec<f64> {
    let mut out = vec![0.0; CHUNK * params.dim()];
    Sampler::new(params).fill_chunk(seed, chunk, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::E;

    #[test]
    fn entropy_oracle_gaussian() {
        let p = MggdParams::isotropic(1, 1.0).unwrap();
        let e = mc_entropy(&p, 200_000, 1).unwrap();
        assert!(e.agrees_with(0.5 * (2.0 * PI * E).ln(), 3.0), "{e:?}");
        assert!(mc_entropy(&p, 100, 1).is_err());
    }

    #[test]
    fn entropy_oracle_se_scales() {
        let p = MggdParams::isotropic(2, 0.7).unwrap();
        let a = mc_entropy(&p, 100_000, 2).unwrap();
        let b = mc_entropy(&p, 400_000, 2).unwrap();
        let ratio = a.std_error / b.std_error;
        assert!((ratio - 2.0).abs() < 0.6, "{ratio}");
    }

    #[test]
    fn entropy_oracle_reproducible() {
        let p = MggdParams::isotropic(3, 0.6).unwrap();
        assert_eq!(mc_entropy(&p, 50_000, 9).unwrap(), mc_entropy(&p, 50_000, 9).unwrap());
    }

    #[test]
    fn fim_oracle_trivial() {
        let p = MggdParams::isotropic(3, 1.0).unwrap();
        let e = mc_fim_trace(&p, 200_000, 3).unwrap();
        assert!(e.agrees_with(3.0, 3.0), "{e:?}");
        let p = MggdParams::isotropic(1, 0.5).unwrap();
        let e = mc_fim_trace(&p, 200_000, 4).unwrap();
        assert!(e.agrees_with(0.25, 3.0), "{e:?}");
    }

    #[test]
    fn fim_oracle_refuses_near_boundary() {
        let p = MggdParams::isotropic(1, 0.29).unwrap();
        assert!(mc_fim_trace(&p, 100_000, 1).is_err());
        let p = MggdParams::isotropic(1, 0.31).unwrap();
        assert!(mc_fim_trace(&p, 100_000, 1).is_ok());
    }

    #[test]
    fn kurtosis_oracle_trivial() {
        let g = MggdParams::isotropic(3, 1.0).unwrap();
        let e = mc_mggd_kurtosis(&g, 500_000, 5).unwrap();
        assert!(e.agrees_with(0.0, 3.0), "{e:?}");
        let l = MggdParams::isotropic(1, 0.5).unwrap();
        let e = mc_mggd_kurtosis(&l, 2_000_000, 6).unwrap();
        assert!(e.agrees_with(3.0, 3.0), "{e:?}");
    }

    #[test]
    fn bootstrap_and_influence_standard_errors_agree() {
        let p = MggdParams::new(0.7, DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 2.0])).unwrap();
        let n = 2 * CHUNK;
        let samples = p.sample(n, 8);
        let boot = mc_mardia_kurtosis(&samples, 1).unwrap();
        let streamed = mc_mggd_kurtosis(&p, n, 8).unwrap();
        assert_abs_diff_eq!(boot.value, streamed.value, epsilon = 1e-9);
        let r = boot.std_error / streamed.std_error;
        assert!((0.75..1.33).contains(&r), "bootstrap {} vs influence {}", boot.std_error, streamed.std_error);
    }

    #[test]
    fn kurtosis_needs_samples() {
        let s = DMatrix::<f64>::zeros(30, 2);
        assert!(mc_mardia_kurtosis(&s, 0).is_err());
    }

    #[test]
    fn mi_oracle_gaussian_channel() {
        let p = MggdParams::isotropic(2, 1.0).unwrap();
        let e = mc_mutual_information(&p, 1.0, 0.8, 0.3, 100_000, 7).unwrap();
        let exact = (0.64 / 0.3f64).ln_1p();
        assert!(e.agrees_with(exact, 3.0), "{e:?} vs {exact}");
    }

    #[test]
    fn mi_oracle_zero_gain() {
        let p = MggdParams::isotropic(2, 0.6).unwrap();
        let e = mc_mutual_information(&p, 1.0, 0.0, 0.3, 100_000, 7).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(e.agrees_with(0.0, 1.0));
    }

    #[test]
    fn mi_oracle_argument_checks() {
        let p = MggdParams::isotropic(2, 0.6).unwrap();
        assert!(mc_mutual_information(&p, 1.0, 1.0, 0.3, 1000, 7).is_err());
        assert!(mc_mutual_information(&p, 1.0, 1.0, 0.0, 100_000, 7).is_err());
        assert!(mc_mutual_information_with(&p, 1.0, 1.0, 0.1, 100_000, 10, 7).is_err());
    }
}
