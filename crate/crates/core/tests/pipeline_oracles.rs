use ggsm_vif::pipeline::{self, blur, decompose, Plane, ScoreConfig, KERNEL};

/// Dense 2D convolution with the outer-product kernel and zero padding.
fn conv2(src: &[f64], n: usize, gain: f64) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for y in 0..n {
        for x in 0..n {
            let mut acc = 0.0;
            for a in 0..5 {
                for b in 0..5 {
                    let (yy, xx) = (y as isize + a as isize - 2, x as isize + b as isize - 2);
                    if yy >= 0 && xx >= 0 && (yy as usize) < n && (xx as usize) < n {
                        acc += KERNEL[a] * KERNEL[b] * src[yy as usize * n + xx as usize];
                    }
                }
            }
            out[y * n + x] = gain * acc;
        }
    }
    out
}

fn down(src: &[f64], n: usize) -> Vec<f64> {
    let h = n / 2;
    let mut out = vec![0.0; h * h];
    for y in 0..h {
        for x in 0..h {
            out[y * h + x] = src[2 * y * n + 2 * x];
        }
    }
    out
}

fn up(src: &[f64], h: usize) -> Vec<f64> {
    let n = 2 * h;
    let mut out = vec![0.0; n * n];
    for y in 0..h {
        for x in 0..h {
            out[2 * y * n + 2 * x] = src[y * h + x];
        }
    }
    out
}

#[test]
fn impulse_bands_match_dense_filters() {
    let n = 256;
    let levels = 4;
    let mut img = vec![0.0; n * n];
    img[128 * n + 128] = 1.0;
    let pyr = decompose(&Plane::new(n, n, img.clone()).unwrap(), levels).unwrap();
    let mut g = img;
    let mut size = n;
    for k in 0..levels {
        let next = down(&conv2(&g, size, 1.0), size);
        let back = conv2(&up(&next, size / 2), size, 4.0);
        let band: Vec<f64> = g.iter().zip(&back).map(|(a, b)| a - b).collect();
        let got = &pyr.bands[k];
        let e_dense: f64 = band.iter().map(|v| v * v).sum();
        assert!((got.energy() - e_dense).abs() <= 1e-10 * e_dense, "scale {k}: {} vs {e_dense}", got.energy());
        let diff = got.data().iter().zip(&band).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "scale {k}: max difference {diff}");
        g = next;
        size /= 2;
    }
    let diff = pyr.residual.data().iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-12);
}

fn textured(w: usize, h: usize) -> Plane {
    Plane::from_fn(w, h, |x, y| {
        let (x, y) = (x as f64, y as f64);
        let v = 0.5 + 0.15 * (0.9 * x).sin() * (0.7 * y + 0.3).cos() + 0.1 * (0.13 * x * y).sin()
            + 0.05 * ((x * 12.9898 + y * 78.233).sin() * 43758.5453).fract();
        v.clamp(0.0, 1.0)
    })
}

#[test]
fn blur_loses_information() {
    let img = textured(128, 128);
    let r = pipeline::score_pair(&img, &blur(&blur(&img)), &ScoreConfig::default()).unwrap();
    assert!(r.vif_approx > 0.0 && r.vif_approx < 1.0, "{}", r.vif_approx);
    assert!(r.vif_lower <= r.vif_approx && r.vif_approx <= r.vif_upper.unwrap());
}
