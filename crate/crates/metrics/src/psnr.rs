use ispforge_tensor::Tensor;

use crate::{check_shapes, MetricError};

/// PSNR is capped here so identical images report a finite number.
pub const PSNR_CAP_DB: f64 = 100.0;

/// dB mapping for unit dynamic range: 10·log10(1/mse), capped at 100.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB)
}

/// Peak signal-to-noise ratio over [0,1] images; MSE accumulates in f64.
pub fn psnr(pred: &Tensor, target: &Tensor) -> Result<f64, MetricError> {
    check_shapes("psnr", pred, target)?;
    let mut acc = 0.0f64;
    for (p, t) in pred.data().iter().zip(target.data()) {
        let d = *p as f64 - *t as f64;
        acc += d * d;
    }
    Ok(psnr_from_mse(acc / pred.data().len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ispforge_tensor::Shape;

    #[test]
    fn db_mapping_is_exact_at_mse_hundredth() {
        assert!((psnr_from_mse(0.01) - 20.0).abs() < 1e-9);
        assert_eq!(psnr_from_mse(0.0), 100.0);
        assert_eq!(psnr_from_mse(1e-12), 100.0);
    }

    #[test]
    fn uniform_difference_of_a_tenth_is_twenty_db() {
        let target = Tensor::filled(Shape::new(1, 3, 8, 8), 0.3);
        let pred = Tensor::filled(Shape::new(1, 3, 8, 8), 0.4);
        let db = psnr(&pred, &target).unwrap();
        assert!((db - 20.0).abs() < 1e-5, "got {db}");
    }

    #[test]
    fn identical_images_hit_the_cap() {
        let t = Tensor::filled(Shape::new(1, 1, 4, 4), 0.77);
        assert_eq!(psnr(&t, &t).unwrap(), 100.0);
    }

    #[test]
    fn monotone_in_noise_amplitude() {
        let target = Tensor::filled(Shape::new(1, 1, 8, 8), 0.5);
        let mut last = f64::INFINITY;
        for amp in [0.01f32, 0.05, 0.1] {
            let pred = target.map(|v| v + amp);
            let db = psnr(&pred, &target).unwrap();
            assert!(db < last, "psnr must strictly decrease with noise");
            last = db;
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = Tensor::zeros(Shape::new(1, 1, 4, 4));
        let b = Tensor::zeros(Shape::new(1, 1, 4, 5));
        assert!(psnr(&a, &b).is_err());
    }
}
