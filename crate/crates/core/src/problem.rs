//! Seeded test problems: a phantom or image sampled by a partial 2D DCT
//! with Gaussian noise at a prescribed SNR.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::{add_noise_to_target, shepp_logan};
use crate::dictionary::Dictionary;
use crate::error::{check_len, Error, Result};
use crate::operators::{DctShape, LinearMap};

#[derive(Debug, Clone)]
pub struct Instance {
    pub a: LinearMap,
    pub w: Dictionary,
    /// Ground truth, column-major for images.
    pub truth: Vec<f64>,
    /// Noiseless measurements `A·truth`.
    pub clean: Vec<f64>,
    pub b: Vec<f64>,
}

/// Number of measurements for a sampling ratio, at least one.
pub fn measurement_count(n: usize, ratio: f64) -> Result<usize> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::Parameter {
            name: "ratio",
            reason: format!("sampling ratio must lie in (0, 1], got {ratio}"),
        });
    }
    Ok(((n as f64 * ratio).round() as usize).clamp(1, n))
}

/// `p × p` image measured by `m` rows of the 2D DCT (seeded) under iTV.
/// `noise_db = ∞` leaves the measurements clean.
pub fn itv_image(image: Vec<f64>, p: usize, m: usize, noise_db: f64, seed: u64) -> Result<Instance> {
    check_len("itv_image", p * p, image.len())?;
    let a = LinearMap::partial_dct(DctShape::Square(p), m, seed)?;
    let w = Dictionary::itv(p)?;
    let clean = a.apply(&image)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let b = add_noise_to_target(&clean, noise_db, &mut rng)?;
    Ok(Instance {
        a,
        w,
        truth: image,
        clean,
        b,
    })
}

pub fn itv_phantom(p: usize, m: usize, noise_db: f64, seed: u64) -> Result<Instance> {
    itv_image(shepp_logan(p)?, p, m, noise_db, seed)
}

/// A sparse-gradient 1D signal measured by a partial DCT, analysed by the
/// complex Gabor-like frame with every DFT frequency at four window
/// positions, so that the analysis operator is injective. `n ≤ 64`.
pub fn l1_analysis_tiny(n: usize, m: usize, noise_db: f64, seed: u64) -> Result<Instance> {
    let a = LinearMap::partial_dct(DctShape::Line(n), m, seed)?;
    let w = Dictionary::gabor_like(n, 4, n)?;
    let truth: Vec<f64> = (0..n)
        .map(|k| {
            let t = k as f64 / n as f64;
            (2.0 * std::f64::consts::PI * 2.0 * t).cos() + if t > 0.5 { 0.5 } else { 0.0 }
        })
        .collect();
    let clean = a.apply(&truth)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let b = add_noise_to_target(&clean, noise_db, &mut rng)?;
    Ok(Instance {
        a,
        w,
        truth,
        clean,
        b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::snr;

    #[test]
    fn phantom_instance_shapes_and_noise() {
        let inst = itv_phantom(16, 64, 20.0, 3).unwrap();
        assert_eq!(inst.a.m(), 64);
        assert_eq!(inst.truth.len(), 256);
        assert!((snr(&inst.clean, &inst.b).unwrap().value() - 20.0).abs() < 0.01);
        let again = itv_phantom(16, 64, 20.0, 3).unwrap();
        assert_eq!(inst.b, again.b);
        let clean = itv_phantom(16, 64, f64::INFINITY, 3).unwrap();
        assert_eq!(clean.b, clean.clean);
    }

    #[test]
    fn measurement_counts() {
        assert_eq!(measurement_count(4096, 0.25).unwrap(), 1024);
        assert_eq!(measurement_count(10, 1e-6).unwrap(), 1);
        assert!(measurement_count(10, 0.0).is_err());
        assert!(measurement_count(10, 1.5).is_err());
    }

    #[test]
    fn tiny_analysis_instance() {
        let inst = l1_analysis_tiny(32, 16, 30.0, 1).unwrap();
        assert_eq!(inst.w.n(), 32);
        assert!(!inst.w.is_real());
        let (re, im) = inst.w.to_dense_split();
        let gram = &re * re.transpose() + &im * im.transpose();
        assert!(gram.symmetric_eigenvalues().min() > 1e-6);
    }
}
