//! Laplacian pyramid with the 5-tap binomial kernel `(1, 4, 6, 4, 1)/16`.
//!
//! Borders use whole-sample symmetric reflection (`x[-1] = x[1]`). Band `k` is
//! `G_k − expand(G_{k+1})`, so collapsing is exact up to roundoff.

use super::plane::Plane;
use crate::error::{Error, Result};

pub const KERNEL: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut j = i.rem_euclid(period);
    if j >= n {
        j = period - j;
    }
    j as usize
}

/// Blur then keep even samples, independently along rows and columns.
pub fn reduce(src: &Plane) -> Plane {
    let (w, h) = (src.width(), src.height());
    let (w2, h2) = (w.div_ceil(2), h.div_ceil(2));
    let mut tmp = Plane::zeros(w2, h);
    for y in 0..h {
        for x2 in 0..w2 {
            let c = (2 * x2) as isize;
            let mut acc = 0.0;
            for (t, k) in KERNEL.iter().enumerate() {
                acc += k * src.get(reflect(c + t as isize - 2, w), y);
            }
            tmp.set(x2, y, acc);
        }
    }
    let mut out = Plane::zeros(w2, h2);
    for y2 in 0..h2 {
        let c = (2 * y2) as isize;
        for x2 in 0..w2 {
            let mut acc = 0.0;
            for (t, k) in KERNEL.iter().enumerate() {
                acc += k * tmp.get(x2, reflect(c + t as isize - 2, h));
            }
            out.set(x2, y2, acc);
        }
    }
    out
}

/// Zero-insertion upsampling to `width × height` followed by the kernel scaled
/// by 2 along each axis.
pub fn expand(src: &Plane, width: usize, height: usize) -> Plane {
    // value at fine position p: 2 Σ_t k[t] · up[p + t − 2], where up is nonzero
    // only at even positions
    let sample_row = |p: usize, n: usize, get: &dyn Fn(usize) -> f64| -> f64 {
        let mut acc = 0.0;
        for (t, k) in KERNEL.iter().enumerate() {
            let q = reflect(p as isize + t as isize - 2, n);
            if q % 2 == 0 {
                acc += k * get(q / 2);
            }
        }
        2.0 * acc
    };
    let mut tmp = Plane::zeros(width, src.height());
    for y in 0..src.height() {
        for x in 0..width {
            tmp.set(x, y, sample_row(x, width, &|i| src.get(i, y)));
        }
    }
    let mut out = Plane::zeros(width, height);
    for y in 0..height {
        for x in 0..width {
            out.set(x, y, sample_row(y, height, &|i| tmp.get(x, i)));
        }
    }
    out
}

/// Bandpass levels plus the final lowpass residual.
#[derive(Debug, Clone)]
pub struct LaplacianPyramid {
    pub bands: Vec<Plane>,
    pub residual: Plane,
}

impl LaplacianPyramid {
    pub fn collapse(&self) -> Plane {
        let mut cur = self.residual.clone();
        for band in self.bands.iter().rev() {
            let up = expand(&cur, band.width(), band.height());
            let data = band.data().iter().zip(up.data()).map(|(b, u)| b + u).collect();
            cur = Plane::new(band.width(), band.height(), data).expect("matching sizes");
        }
        cur
    }
}

/// Requires both image sides to be at least `2^levels · block_side`.
pub fn check_size(width: usize, height: usize, levels: usize, block_side: usize) -> Result<()> {
    let need = (1usize << levels.min(30)) * block_side;
    if levels == 0 || width < need || height < need || width < 2 || height < 2 {
        return Err(Error::ImageTooSmall {
            width,
            height,
            levels,
            block_side,
        });
    }
    Ok(())
}

/// Decomposes `image` into `levels` bandpass planes (finest first).
pub fn decompose(image: &Plane, levels: usize) -> Result<LaplacianPyramid> {
    check_size(image.width(), image.height(), levels, 1)?;
    let mut bands = Vec::with_capacity(levels);
    let mut cur = image.clone();
    for _ in 0..levels {
        let low = reduce(&cur);
        let up = expand(&low, cur.width(), cur.height());
        let data = cur.data().iter().zip(up.data()).map(|(c, u)| c - u).collect();
        bands.push(Plane::new(cur.width(), cur.height(), data)?);
        cur = low;
    }
    Ok(LaplacianPyramid {
        bands,
        residual: cur,
    })
}

/// Separable blur with the binomial kernel (no subsampling).
pub fn blur(src: &Plane) -> Plane {
    let (w, h) = (src.width(), src.height());
    let mut tmp = Plane::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (t, k) in KERNEL.iter().enumerate() {
                acc += k * src.get(reflect(x as isize + t as isize - 2, w), y);
            }
            tmp.set(x, y, acc);
        }
    }
    let mut out = Plane::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (t, k) in KERNEL.iter().enumerate() {
                acc += k * tmp.get(x, reflect(y as isize + t as isize - 2, h));
            }
            out.set(x, y, acc);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(w: usize, h: usize) -> Plane {
        Plane::from_fn(w, h, |x, y| {
            let (x, y) = (x as f64, y as f64);
            0.5 + 0.3 * (0.37 * x + 0.11 * y * y).sin() * (0.05 * x * y).cos()
        })
    }

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect(-1, 5), 1);
        assert_eq!(reflect(-2, 5), 2);
        assert_eq!(reflect(5, 5), 3);
        assert_eq!(reflect(6, 5), 2);
        assert_eq!(reflect(3, 1), 0);
    }

    #[test]
    fn constant_image_has_zero_bands() {
        let img = Plane::from_fn(37, 29, |_, _| 0.42);
        let p = decompose(&img, 3).unwrap();
        for b in &p.bands {
            assert!(b.data().iter().all(|v| v.abs() < 1e-14));
        }
    }

    #[test]
    fn collapse_reconstructs() {
        for (w, h) in [(64, 64), (61, 47), (33, 80)] {
            let img = textured(w, h);
            let p = decompose(&img, 4).unwrap();
            let back = p.collapse();
            let err = img
                .data()
                .iter()
                .zip(back.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-10, "{w}x{h}: {err}");
        }
    }

    #[test]
    fn band_sizes() {
        let p = decompose(&textured(61, 47), 3).unwrap();
        let sizes: Vec<_> = p.bands.iter().map(|b| (b.width(), b.height())).collect();
        assert_eq!(sizes, vec![(61, 47), (31, 24), (16, 12)]);
        assert_eq!((p.residual.width(), p.residual.height()), (8, 6));
    }

    #[test]
    fn too_small() {
        assert!(decompose(&Plane::zeros(1, 8), 1).is_err());
        assert!(check_size(47, 60, 4, 3).is_err());
        assert!(check_size(48, 48, 4, 3).is_ok());
    }
}
