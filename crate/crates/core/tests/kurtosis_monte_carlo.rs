use ggsm_vif::kurtosis::{self, EllipticalSummary};
use ggsm_vif::mggd::MggdParams;
use ggsm_vif::oracle;
use ggsm_vif::stream::CHUNK;
use ggsm_vif::verify::random_spd;
use nalgebra::DMatrix;

#[test]
fn rho_is_gaussian_fourth_moment() {
    let m = 3;
    let sa = random_spd(m, 50);
    let sb = random_spd(m, 51);
    let rho = kurtosis::rho(&sa, &sb).unwrap();
    let x = MggdParams::new(1.0, sa).unwrap();
    let bi = sb.try_inverse().unwrap();
    let n_chunks = 10_000_000 / CHUNK + 1;
    let (mut s1, mut s2, mut n) = (0.0, 0.0, 0.0);
    for c in 0..n_chunks {
        let buf = oracle::mggd_chunk(&x, 52, c as u64);
        for r in buf.chunks_exact(m) {
            let mut q = 0.0;
            for i in 0..m {
                for j in 0..m {
                    q += r[i] * bi[(i, j)] * r[j];
                }
            }
            s1 += q * q;
            s2 += q.powi(4);
            n += 1.0;
        }
    }
    let mean = s1 / n;
    let se = ((s2 / n - mean * mean) / (n - 1.0)).sqrt();
    assert!((mean - rho).abs() <= 3.0 * se, "{mean} ± {se} vs {rho}");
}

#[test]
fn laplace_like_plus_gaussian() {
    let x = MggdParams::from_covariance(0.5, &DMatrix::identity(2, 2)).unwrap();
    let y = MggdParams::isotropic(2, 1.0).unwrap();
    let closed = kurtosis::kurtosis_of_sum_elliptical(&EllipticalSummary::of_mggd(&x), &EllipticalSummary::of_mggd(&y))
        .unwrap();
    let e = oracle::mc_sum_kurtosis(&x, &y, 10_000_000, 53).unwrap();
    assert!(e.agrees_with(closed, 3.0), "{e:?} vs {closed}");
}

#[test]
fn two_mggds() {
    let x = MggdParams::from_covariance(0.6, &DMatrix::identity(2, 2)).unwrap();
    let y = MggdParams::from_covariance(1.5, &(DMatrix::identity(2, 2) * 2.0)).unwrap();
    let closed = kurtosis::kurtosis_of_sum_elliptical(&EllipticalSummary::of_mggd(&x), &EllipticalSummary::of_mggd(&y))
        .unwrap();
    let e = oracle::mc_sum_kurtosis(&x, &y, 10_000_000, 54).unwrap();
    assert!(e.agrees_with(closed, 3.0), "{e:?} vs {closed}");
}

#[test]
fn mggd_plus_white_noise() {
    let u = MggdParams::isotropic(2, 0.5).unwrap();
    let closed = kurtosis::kurtosis_mggd_plus_white_gaussian(&u, 1.0, 1.0).unwrap();
    let noise = MggdParams::isotropic(2, 1.0).unwrap();
    let e = oracle::mc_sum_kurtosis(&u, &noise, 10_000_000, 55).unwrap();
    assert!(e.agrees_with(closed, 3.0), "{e:?} vs {closed}");
}

#[test]
fn vanishing_noise_keeps_kurtosis() {
    let x = MggdParams::new(0.6, random_spd(3, 56)).unwrap();
    let g = kurtosis::kurtosis_of_sum_elliptical(
        &EllipticalSummary::of_mggd(&x),
        &EllipticalSummary::gaussian(DMatrix::identity(3, 3) * 1e-12).unwrap(),
    )
    .unwrap();
    assert!((g - x.mardia_kurtosis()).abs() < 1e-6);
}
