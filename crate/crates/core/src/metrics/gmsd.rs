//! Gradient magnitude similarity deviation.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::video_io::LumaPlane;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmsdConfig {
    /// Stability constant for the similarity ratio (8-bit range).
    pub c: f64,
    /// Apply the 2x2 averaging prefilter and decimate before the gradients.
    pub downsample: bool,
}

impl Default for GmsdConfig {
    fn default() -> Self {
        GmsdConfig {
            c: 170.0,
            downsample: true,
        }
    }
}

/// 2x2 averaging anchored at the top-left sample, zero beyond the border,
/// then every second row and column.
fn average_decimate(img: &[f64], w: usize, h: usize) -> (Vec<f64>, usize, usize) {
    let at = |x: usize, y: usize| if x < w && y < h { img[y * w + x] } else { 0.0 };
    let (ow, oh) = (w.div_ceil(2), h.div_ceil(2));
    let mut out = Vec::with_capacity(ow * oh);
    for y in 0..oh {
        for x in 0..ow {
            let (sx, sy) = (2 * x, 2 * y);
            out.push(0.25 * (at(sx, sy) + at(sx + 1, sy) + at(sx, sy + 1) + at(sx + 1, sy + 1)));
        }
    }
    (out, ow, oh)
}

/// Prewitt gradient magnitude with zero padding, same-size output.
fn gradient_magnitude(img: &[f64], w: usize, h: usize) -> Vec<f64> {
    let at = |x: isize, y: isize| {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            img[y as usize * w + x as usize]
        }
    };
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut gx = 0.0;
            let mut gy = 0.0;
            for t in -1..=1 {
                gx += at(x - 1, y + t) - at(x + 1, y + t);
                gy += at(x + t, y - 1) - at(x + t, y + 1);
            }
            gx /= 3.0;
            gy /= 3.0;
            out.push((gx * gx + gy * gy).sqrt());
        }
    }
    out
}

/// Population standard deviation of the gradient-magnitude-similarity map.
/// Lower is better; identical inputs give 0.
pub fn gmsd_frame(reference: &LumaPlane, distorted: &LumaPlane) -> Result<f64> {
    gmsd_frame_with(reference, distorted, &GmsdConfig::default())
}

pub fn gmsd_frame_with(reference: &LumaPlane, distorted: &LumaPlane, cfg: &GmsdConfig) -> Result<f64> {
    reference.check_same_size(distorted)?;
    let (mut a, mut w, mut h) = (reference.to_f64(), reference.width(), reference.height());
    let mut b = distorted.to_f64();
    if cfg.downsample {
        let (na, nw, nh) = average_decimate(&a, w, h);
        b = average_decimate(&b, w, h).0;
        a = na;
        w = nw;
        h = nh;
    }
    let ga = gradient_magnitude(&a, w, h);
    let gb = gradient_magnitude(&b, w, h);
    let gms: Vec<f64> = ga
        .iter()
        .zip(&gb)
        .map(|(x, y)| (2.0 * x * y + cfg.c) / (x * x + y * y + cfg.c))
        .collect();
    let n = gms.len() as f64;
    let mean = gms.iter().sum::<f64>() / n;
    let var = gms.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_is_zero() {
        let a = LumaPlane::from_fn(33, 20, |x, y| ((x * 7 + y * 13) % 256) as u8);
        assert!(gmsd_frame(&a, &a).unwrap().abs() < 1e-12);
    }

    #[test]
    fn symmetric_and_positive() {
        let a = LumaPlane::from_fn(32, 32, |x, y| ((x * 9 + y * 5) % 256) as u8);
        let b = LumaPlane::from_fn(32, 32, |x, y| ((x * 3 + y * 11 + 40) % 256) as u8);
        let ab = gmsd_frame(&a, &b).unwrap();
        let ba = gmsd_frame(&b, &a).unwrap();
        assert!(ab > 0.0);
        assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn odd_sizes_pad_with_zero() {
        let img = vec![4.0; 9];
        let (d, w, h) = average_decimate(&img, 3, 3);
        assert_eq!((w, h), (2, 2));
        assert_eq!(d, vec![4.0, 2.0, 2.0, 1.0]);
    }
}
