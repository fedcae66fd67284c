//! Structural similarity on luma, single- and multi-scale.
//!
//! Local statistics use an 11x11 Gaussian window (sigma 1.5) evaluated over
//! the valid region only, so an `w x h` plane produces a `(w-10) x (h-10)` map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::video_io::LumaPlane;

pub const WINDOW: usize = 11;
pub const SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
const PEAK: f64 = 255.0;

pub const MSSSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

fn c1() -> f64 {
    (K1 * PEAK).powi(2)
}

fn c2() -> f64 {
    (K2 * PEAK).powi(2)
}

pub fn gaussian_window() -> [f64; WINDOW] {
    let mut w = [0.0; WINDOW];
    let half = (WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SIGMA * SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Separable valid-region filtering of a `w x h` image.
fn filter_valid(img: &[f64], w: usize, h: usize, k: &[f64; WINDOW]) -> Vec<f64> {
    let ow = w - WINDOW + 1;
    let oh = h - WINDOW + 1;
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        let row = &img[y * w..(y + 1) * w];
        for x in 0..ow {
            let mut acc = 0.0;
            for (t, kv) in k.iter().enumerate() {
                acc += kv * row[x + t];
            }
            tmp[y * ow + x] = acc;
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for (t, kv) in k.iter().enumerate() {
            let src = &tmp[(y + t) * ow..(y + t + 1) * ow];
            let dst = &mut out[y * ow..(y + 1) * ow];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += kv * s;
            }
        }
    }
    out
}

/// Mean SSIM and mean contrast-structure term of two same-size images.
pub(crate) fn ssim_and_cs(a: &[f64], b: &[f64], w: usize, h: usize) -> (f64, f64) {
    let k = gaussian_window();
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let mu_a = filter_valid(a, w, h, &k);
    let mu_b = filter_valid(b, w, h, &k);
    let e_aa = filter_valid(&aa, w, h, &k);
    let e_bb = filter_valid(&bb, w, h, &k);
    let e_ab = filter_valid(&ab, w, h, &k);
    let (c1, c2) = (c1(), c2());
    let mut ssim_sum = 0.0;
    let mut cs_sum = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = e_aa[i] - ma * ma;
        let var_b = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        let cs = (2.0 * cov + c2) / (var_a + var_b + c2);
        let l = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        ssim_sum += l * cs;
        cs_sum += cs;
    }
    let n = mu_a.len() as f64;
    (ssim_sum / n, cs_sum / n)
}

fn check_min_side(p: &LumaPlane, min_side: usize) -> Result<()> {
    if p.width().min(p.height()) < min_side {
        return Err(Error::FrameTooSmall {
            width: p.width(),
            height: p.height(),
            min_side,
        });
    }
    Ok(())
}

/// Mean SSIM over the valid region.
pub fn ssim_frame(reference: &LumaPlane, distorted: &LumaPlane) -> Result<f64> {
    reference.check_same_size(distorted)?;
    check_min_side(reference, WINDOW)?;
    let (s, _) = ssim_and_cs(
        &reference.to_f64(),
        &distorted.to_f64(),
        reference.width(),
        reference.height(),
    );
    Ok(s)
}

/// 2x2 block mean followed by decimation; odd trailing rows/columns drop.
pub(crate) fn downsample(img: &[f64], w: usize, h: usize) -> (Vec<f64>, usize, usize) {
    let (ow, oh) = (w / 2, h / 2);
    let mut out = Vec::with_capacity(ow * oh);
    for y in 0..oh {
        for x in 0..ow {
            let i = 2 * y * w + 2 * x;
            out.push(0.25 * (img[i] + img[i + 1] + img[i + w] + img[i + w + 1]));
        }
    }
    (out, ow, oh)
}

/// Per-scale exponents; the scale count is the number of weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsSsimConfig {
    pub weights: Vec<f64>,
}

impl Default for MsSsimConfig {
    fn default() -> Self {
        MsSsimConfig {
            weights: MSSSIM_WEIGHTS.to_vec(),
        }
    }
}

impl MsSsimConfig {
    pub fn scales(&self) -> usize {
        self.weights.len()
    }

    pub fn min_side(&self) -> usize {
        WINDOW << (self.scales().max(1) - 1)
    }

    /// The largest prefix of the default exponents that fits a `w x h`
    /// frame, renormalized to sum to one.
    pub fn fitting(width: usize, height: usize) -> Result<Self> {
        let side = width.min(height);
        let mut scales = MSSSIM_WEIGHTS.len();
        while scales > 0 && side < WINDOW << (scales - 1) {
            scales -= 1;
        }
        if scales == 0 {
            return Err(Error::FrameTooSmall {
                width,
                height,
                min_side: WINDOW,
            });
        }
        let prefix = &MSSSIM_WEIGHTS[..scales];
        let total: f64 = prefix.iter().sum();
        Ok(MsSsimConfig {
            weights: prefix.iter().map(|w| w / total).collect(),
        })
    }
}

/// Multi-scale SSIM: contrast-structure terms at every scale but the
/// coarsest, full SSIM at the coarsest. Negative terms clamp to zero.
pub fn msssim_frame(reference: &LumaPlane, distorted: &LumaPlane) -> Result<f64> {
    msssim_frame_with(reference, distorted, &MsSsimConfig::default())
}

pub fn msssim_frame_with(reference: &LumaPlane, distorted: &LumaPlane, cfg: &MsSsimConfig) -> Result<f64> {
    reference.check_same_size(distorted)?;
    if cfg.weights.is_empty() {
        return Err(Error::InvalidParameter("MS-SSIM needs at least one scale".into()));
    }
    check_min_side(reference, cfg.min_side())?;
    let (mut w, mut h) = (reference.width(), reference.height());
    let mut a = reference.to_f64();
    let mut b = distorted.to_f64();
    let mut product = 1.0;
    let last = cfg.scales() - 1;
    for (s, &weight) in cfg.weights.iter().enumerate() {
        let (ssim, cs) = ssim_and_cs(&a, &b, w, h);
        let term = if s == last { ssim } else { cs };
        product *= term.max(0.0).powf(weight);
        if s < last {
            let (na, nw, nh) = downsample(&a, w, h);
            let (nb, _, _) = downsample(&b, w, h);
            a = na;
            b = nb;
            w = nw;
            h = nh;
        }
    }
    Ok(product)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_plane(rng: &mut ChaCha8Rng, w: usize, h: usize) -> LumaPlane {
        LumaPlane::from_fn(w, h, |_, _| rng.random())
    }

    #[test]
    fn window_normalized() {
        let k = gaussian_window();
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((k[0] - k[10]).abs() < 1e-18);
    }

    #[test]
    fn identical_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_plane(&mut rng, 40, 33);
        assert!((ssim_frame(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        let big = random_plane(&mut rng, 180, 176);
        assert!((msssim_frame(&big, &big).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn too_small() {
        let a = LumaPlane::filled(10, 40, 3);
        assert!(matches!(ssim_frame(&a, &a), Err(Error::FrameTooSmall { .. })));
        let b = LumaPlane::filled(176, 144, 3);
        assert!(matches!(msssim_frame(&b, &b), Err(Error::FrameTooSmall { min_side: 176, .. })));
    }

    #[test]
    fn single_scale_reduces_to_ssim() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_plane(&mut rng, 48, 40);
        let b = random_plane(&mut rng, 48, 40);
        let cfg = MsSsimConfig { weights: vec![1.0] };
        let ms = msssim_frame_with(&a, &b, &cfg).unwrap();
        let s = ssim_frame(&a, &b).unwrap();
        // random noise can push SSIM negative; the clamp then applies
        assert!((ms - s.max(0.0)).abs() < 1e-9);
    }

    #[test]
    fn fitting_scales() {
        assert_eq!(MsSsimConfig::fitting(176, 176).unwrap().scales(), 5);
        assert_eq!(MsSsimConfig::fitting(176, 144).unwrap().scales(), 4);
        assert_eq!(MsSsimConfig::fitting(64, 64).unwrap().scales(), 3);
        assert_eq!(MsSsimConfig::fitting(16, 16).unwrap().scales(), 1);
        assert!(MsSsimConfig::fitting(10, 16).is_err());
        let c = MsSsimConfig::fitting(64, 64).unwrap();
        assert!((c.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn downsample_block_mean() {
        let img: Vec<f64> = (0..15).map(f64::from).collect();
        let (d, w, h) = downsample(&img, 5, 3);
        assert_eq!((w, h), (2, 1));
        assert_eq!(d, vec![3.0, 5.0]);
    }
}
