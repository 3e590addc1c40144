use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, Context};
use ggsm_vif::infotheory::{self, ChannelParams, MiBound, SCHEMA_VERSION};
use ggsm_vif::kurtosis::{self, MomentSummary};
use ggsm_vif::mggd::MggdParams;
use ggsm_vif::pipeline::{self, AlphaMode};
use ggsm_vif::verify::{self, VerifyConfig};
use ggsm_vif::{linalg, oracle, QualityReport};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::{self, Config, Format};
use crate::{BoundsArgs, FitArgs, ScoreArgs, SimulateArgs, VerifyArgs};

pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

type CmdResult = Result<(), Failure>;

fn bad_input(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 2,
        error: e.into(),
    }
}

fn internal(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 1,
        error: e.into(),
    }
}

fn emit(out: Option<&Path>, body: &[u8]) -> CmdResult {
    match out {
        Some(p) => fs::write(p, body)
            .with_context(|| format!("cannot write {}", p.display()))
            .map_err(internal),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(body).and_then(|_| so.flush()).map_err(internal)
        }
    }
}

fn json<T: Serialize>(v: &T) -> Result<Vec<u8>, Failure> {
    let mut s = serde_json::to_vec_pretty(v).map_err(internal)?;
    s.push(b'\n');
    Ok(s)
}

#[derive(Serialize)]
struct ScoreOutput<'a> {
    #[serde(flatten)]
    report: &'a QualityReport,
    config: &'a Config,
}

fn resolve_config(a: &ScoreArgs) -> anyhow::Result<Config> {
    let mut c = Config::default();
    if let Some(p) = &a.config {
        c.apply_file(p)?;
    }
    if let Some(v) = a.levels {
        c.score.levels = v;
    }
    if let Some(v) = a.block_side {
        c.score.block_side = v;
    }
    if let Some(v) = a.alpha {
        c.score.alpha = AlphaMode::Fixed(v);
    }
    if a.estimate_alpha {
        c.score.alpha = AlphaMode::Estimate;
    }
    if let Some(s) = &a.sigma_n {
        c.score.neural_noise = config::parse_sigma_n(s)?;
    }
    if let Some(v) = a.window {
        c.score.window = v;
    }
    if let Some(v) = a.seed {
        c.seed = v;
    }
    if let Some(f) = a.format {
        c.format = f;
    }
    c.score.validate()?;
    Ok(c)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn score_csv(r: &QualityReport) -> Result<Vec<u8>, Failure> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    let rec = |w: &mut csv::Writer<Vec<u8>>, row: Vec<String>| w.write_record(row).map_err(internal);
    rec(
        &mut w,
        [
            "scale", "orientation", "n_blocks", "shape", "num_lower", "num_approx", "num_upper", "den_lower",
            "den_approx", "den_upper",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
    )?;
    for s in &r.per_subband {
        rec(
            &mut w,
            vec![
                s.id.scale.to_string(),
                s.id.orientation.to_string(),
                s.n_blocks.to_string(),
                s.shape.to_string(),
                s.numerator.lower.to_string(),
                s.numerator.approx.to_string(),
                opt(s.numerator.upper),
                s.denominator.lower.to_string(),
                s.denominator.approx.to_string(),
                opt(s.denominator.upper),
            ],
        )?;
    }
    rec(&mut w, vec![])?;
    rec(&mut w, vec!["vif_lower".into(), "vif_approx".into(), "vif_upper".into()])?;
    rec(
        &mut w,
        vec![r.vif_lower.to_string(), r.vif_approx.to_string(), opt(r.vif_upper)],
    )?;
    w.into_inner().map_err(|e| internal(anyhow!("{e}")))
}

pub fn score(a: ScoreArgs) -> CmdResult {
    let cfg = resolve_config(&a).map_err(bad_input)?;
    let reference = pipeline::load_luma(&a.reference).map_err(bad_input)?;
    let distorted = pipeline::load_luma(&a.distorted).map_err(bad_input)?;
    let report = pipeline::score_pair(&reference, &distorted, &cfg.score).map_err(bad_input)?;
    if report.approx_outside_bounds > 0 {
        log::warn!("{} block approximations fell outside their bounds", report.approx_outside_bounds);
    }
    let body = match cfg.format {
        Format::Json => json(&ScoreOutput {
            report: &report,
            config: &cfg,
        })?,
        Format::Csv => score_csv(&report)?,
    };
    emit(a.out.as_deref(), &body)
}

fn parse_matrix(s: &str, dim: usize) -> anyhow::Result<DMatrix<f64>> {
    let rows = s
        .split(';')
        .map(|r| {
            r.split(',')
                .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad number {v:?}")))
                .collect::<anyhow::Result<Vec<_>>>()
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let m = linalg::from_rows(&rows)?;
    if m.nrows() != dim {
        return Err(anyhow!("scatter is {}×{} but dim is {dim}", m.nrows(), m.ncols()));
    }
    Ok(m)
}

#[derive(Serialize)]
struct ChannelReport {
    lower: f64,
    upper: Option<f64>,
    approx: f64,
    matched_shape: f64,
    clamped: bool,
}

fn channel_report(u: &MggdParams, scale: f64, noise: f64) -> anyhow::Result<ChannelReport> {
    let b = infotheory::gaussian_channel_bounds(u.entropy(), u.fisher_trace(), scale, noise, u.dim())?;
    let ap = infotheory::mi_approx_moment_matched(u, scale, 1.0, noise)?;
    Ok(ChannelReport {
        lower: b.lower,
        upper: b.upper,
        approx: ap.value,
        matched_shape: ap.matched_shape,
        clamped: ap.clamped,
    })
}

#[derive(Serialize)]
struct BoundsOutput {
    schema_version: u32,
    params: MggdParams,
    entropy: f64,
    fisher_trace: Option<f64>,
    mardia_kurtosis: f64,
    covariance: Vec<Vec<f64>>,
    channel: ChannelParams,
    z: f64,
    reference: ChannelReport,
    distorted: ChannelReport,
}

pub fn bounds(a: BoundsArgs) -> CmdResult {
    let run = || -> anyhow::Result<BoundsOutput> {
        let scatter = match &a.scatter {
            Some(s) => parse_matrix(s, a.dim)?,
            None => DMatrix::identity(a.dim, a.dim),
        };
        let u = MggdParams::new(a.alpha, scatter)?;
        let ch = ChannelParams::new(a.gain, a.sigma_v2, a.sigma_n2)?;
        if !(a.z >= 0.0) || !a.z.is_finite() {
            return Err(anyhow!("z must be non-negative"));
        }
        Ok(BoundsOutput {
            schema_version: SCHEMA_VERSION,
            entropy: u.entropy(),
            fisher_trace: u.fisher_trace(),
            mardia_kurtosis: u.mardia_kurtosis(),
            covariance: linalg::to_rows(&u.covariance()),
            reference: channel_report(&u, a.z, ch.neural_noise_var)?,
            distorted: channel_report(&u, ch.gain.abs() * a.z, ch.total_noise_var())?,
            params: u,
            channel: ch,
            z: a.z,
        })
    };
    let out = run().map_err(bad_input)?;
    emit(a.out.as_deref(), &json(&out)?)
}

/// Reads a `dim=M` headed CSV into an `N × M` matrix.
pub fn read_samples(path: &Path) -> anyhow::Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut records = rdr.records();
    let header = records.next().ok_or_else(|| anyhow!("empty file"))??;
    let dim: usize = header
        .get(0)
        .and_then(|h| h.strip_prefix("dim="))
        .ok_or_else(|| anyhow!("first row must be dim=M"))?
        .trim()
        .parse()
        .context("bad dimension in header")?;
    if dim == 0 {
        return Err(anyhow!("dimension must be positive"));
    }
    let mut data = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != dim {
            return Err(anyhow!("row {} has {} fields, expected {dim}", i + 2, rec.len()));
        }
        for v in rec.iter() {
            let x: f64 = v.parse().with_context(|| format!("row {}: bad number {v:?}", i + 2))?;
            if !x.is_finite() {
                return Err(anyhow!("row {}: non-finite value", i + 2));
            }
            data.push(x);
        }
    }
    Ok(DMatrix::from_row_slice(data.len() / dim, dim, &data))
}

#[derive(Serialize)]
struct FitOutput {
    schema_version: u32,
    n_samples: usize,
    params: MggdParams,
    clamped: bool,
    sample_kurtosis: f64,
}

pub fn fit_mggd(a: FitArgs) -> CmdResult {
    let run = || -> anyhow::Result<FitOutput> {
        let samples = read_samples(&a.data)?;
        let moments = MomentSummary::from_samples(&samples)?;
        let fit = kurtosis::fit_mggd_by_moments(&moments)?;
        Ok(FitOutput {
            schema_version: SCHEMA_VERSION,
            n_samples: samples.nrows(),
            params: fit.params,
            clamped: fit.clamped,
            sample_kurtosis: moments.kurtosis(),
        })
    };
    let out = run().map_err(bad_input)?;
    emit(a.out.as_deref(), &json(&out)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZLaw {
    Const(f64),
    Uniform(f64, f64),
    LogNormal(f64, f64),
}

pub fn parse_z_law(s: &str) -> anyhow::Result<ZLaw> {
    let (kind, rest) = s.split_once(':').ok_or_else(|| anyhow!("z law must look like kind:params"))?;
    let nums = rest
        .split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad number {v:?}")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let law = match (kind, nums.as_slice()) {
        ("const", &[z]) if z >= 0.0 => ZLaw::Const(z),
        ("uniform", &[lo, hi]) if 0.0 <= lo && lo < hi => ZLaw::Uniform(lo, hi),
        ("lognormal", &[mu, sd]) if sd > 0.0 => ZLaw::LogNormal(mu, sd),
        _ => return Err(anyhow!("unsupported z law {s:?}")),
    };
    Ok(law)
}

fn draw_z(law: ZLaw, n: usize, seed: u64) -> Vec<f64> {
    use rand::Rng;
    use rand_distr::{Distribution, LogNormal};
    let mut rng = ggsm_vif::stream::substream(seed, u64::MAX);
    (0..n)
        .map(|_| match law {
            ZLaw::Const(z) => z,
            ZLaw::Uniform(lo, hi) => rng.random_range(lo..hi),
            ZLaw::LogNormal(mu, sd) => LogNormal::new(mu, sd).expect("checked").sample(&mut rng),
        })
        .collect()
}

pub fn simulate(a: SimulateArgs) -> CmdResult {
    let setup = || -> anyhow::Result<(MggdParams, ChannelParams, ZLaw)> {
        if a.dim == 0 {
            return Err(anyhow!("dim must be positive"));
        }
        if !(a.rho.abs() < 1.0) {
            return Err(anyhow!("rho must lie in (-1, 1)"));
        }
        let scatter = DMatrix::from_fn(a.dim, a.dim, |i, j| a.rho.powi((i as i32 - j as i32).abs()));
        let u = MggdParams::new(a.alpha, scatter)?;
        let ch = ChannelParams::new(a.gain, a.sigma_v2, a.sigma_n2)?;
        if a.mc_samples < oracle::MIN_MI_SAMPLES || a.inner < oracle::MI_INNER_SAMPLES {
            return Err(anyhow!(
                "need --mc-samples ≥ {} and --inner ≥ {}",
                oracle::MIN_MI_SAMPLES,
                oracle::MI_INNER_SAMPLES
            ));
        }
        Ok((u, ch, parse_z_law(&a.z_law)?))
    };
    let (u, ch, law) = setup().map_err(bad_input)?;
    let zs = draw_z(law, a.n, a.seed);
    let h = u.entropy();
    let tr = u.fisher_trace();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["block", "I_l", "I_approx", "I_u", "I_mc", "I_mc_se", "z"])
        .map_err(internal)?;
    for (i, &z) in zs.iter().enumerate() {
        let b = infotheory::mi_distorted_bounds(h, tr, z, &ch, u.dim()).map_err(bad_input)?;
        let ap = infotheory::mi_approx_moment_matched(&u, z, ch.gain, ch.total_noise_var()).map_err(bad_input)?;
        let mc = oracle::mc_mutual_information_with(
            &u,
            z,
            ch.gain,
            ch.total_noise_var(),
            a.mc_samples,
            a.inner,
            a.seed.wrapping_add(i as u64),
        )
        .map_err(internal)?;
        let bound = MiBound {
            lower: b.lower,
            upper: b.upper,
            approx: ap.value,
        };
        if !bound.approx_within(1e-9) {
            log::warn!("block {i}: approximation {} outside [{}, {:?}]", ap.value, b.lower, b.upper);
        }
        w.write_record([
            i.to_string(),
            b.lower.to_string(),
            ap.value.to_string(),
            opt(b.upper),
            mc.value.to_string(),
            mc.std_error.to_string(),
            z.to_string(),
        ])
        .map_err(internal)?;
    }
    let body = w.into_inner().map_err(|e| internal(anyhow!("{e}")))?;
    emit(a.out.as_deref(), &body)
}

pub fn verify(a: VerifyArgs) -> CmdResult {
    let mut cfg = VerifyConfig {
        quick: a.quick,
        ..VerifyConfig::default()
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let only = if a.only.is_empty() {
        verify::CRITERIA.to_vec()
    } else {
        if let Some(bad) = a.only.iter().find(|c| !verify::CRITERIA.contains(c)) {
            return Err(bad_input(anyhow!("unknown criterion {bad}")));
        }
        a.only.clone()
    };
    let report = verify::run_selected(&cfg, &only, |c| {
        eprintln!("{}", c.summary());
        for p in c.failures() {
            eprintln!(
                "    failed: {} (expected {}, observed {}, tolerance {})",
                p.label, p.expected, p.observed, p.tolerance
            );
        }
    })
    .map_err(internal)?;
    emit(a.out.as_deref(), &json(&report)?)?;
    if report.passed {
        Ok(())
    } else {
        Err(internal(anyhow!("verification failed")))
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z_laws() {
        assert_eq!(parse_z_law("const:2").unwrap(), ZLaw::Const(2.0));
        assert_eq!(parse_z_law("uniform:0.5,2").unwrap(), ZLaw::Uniform(0.5, 2.0));
        assert_eq!(parse_z_law("lognormal:0,0.5").unwrap(), ZLaw::LogNormal(0.0, 0.5));
        assert!(parse_z_law("uniform:2,1").is_err());
        assert!(parse_z_law("gamma:1").is_err());
        assert!(parse_z_law("const").is_err());
        let z = draw_z(ZLaw::Uniform(1.0, 2.0), 100, 3);
        assert!(z.iter().all(|v| (1.0..2.0).contains(v)));
        assert_eq!(z, draw_z(ZLaw::Uniform(1.0, 2.0), 100, 3));
    }

    #[test]
    fn matrix_parsing() {
        let m = parse_matrix("1,0.2;0.2,2", 2).unwrap();
        assert_eq!(m[(1, 1)], 2.0);
        assert!(parse_matrix("1,0.2;0.2,2", 3).is_err());
        assert!(parse_matrix("1,x;0.2,2", 2).is_err());
    }
}
