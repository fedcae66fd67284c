use crate::error::Result;
use crate::video_io::LumaPlane;

/// Value reported for identical planes.
pub const PSNR_CAP_DB: f64 = 100.0;

pub fn mse(reference: &LumaPlane, distorted: &LumaPlane) -> Result<f64> {
    reference.check_same_size(distorted)?;
    let sum: u64 = reference
        .data()
        .iter()
        .zip(distorted.data())
        .map(|(&a, &b)| {
            let d = i64::from(a) - i64::from(b);
            (d * d) as u64
        })
        .sum();
    Ok(sum as f64 / reference.data().len() as f64)
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * (255.0f64 * 255.0 / mse).log10()).min(PSNR_CAP_DB)
}

/// Peak signal-to-noise ratio in dB, capped at [`PSNR_CAP_DB`].
pub fn psnr_frame(reference: &LumaPlane, distorted: &LumaPlane) -> Result<f64> {
    Ok(psnr_from_mse(mse(reference, distorted)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        let z = LumaPlane::filled(16, 16, 0);
        let w = LumaPlane::filled(16, 16, 255);
        let one = LumaPlane::filled(16, 16, 1);
        assert_eq!(psnr_frame(&z, &z).unwrap(), 100.0);
        assert!(psnr_frame(&z, &w).unwrap().abs() < 1e-12);
        let expected = 20.0 * 255f64.log10();
        assert!((psnr_frame(&z, &one).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 48.1308).abs() < 1e-4);
    }

    #[test]
    fn mismatch() {
        let a = LumaPlane::filled(16, 16, 0);
        let b = LumaPlane::filled(16, 17, 0);
        assert!(psnr_frame(&a, &b).is_err());
    }

    #[test]
    fn strictly_decreasing_in_mse() {
        let mut prev = f64::INFINITY;
        for k in 1..2000 {
            let v = psnr_from_mse(k as f64 * 0.05);
            assert!(v < prev);
            prev = v;
        }
    }
}
