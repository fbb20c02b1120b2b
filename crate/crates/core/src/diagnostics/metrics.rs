use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_len, Error, Result};
use crate::linalg::norm2;

/// Quality of a reconstruction in decibels. Identical inputs have no finite
/// ratio and are reported as `Exact`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decibels {
    Finite(f64),
    Exact,
}

impl Decibels {
    /// `+∞` for `Exact`.
    pub fn value(self) -> f64 {
        match self {
            Decibels::Finite(v) => v,
            Decibels::Exact => f64::INFINITY,
        }
    }
}

/// `10·log10(peak² / MSE)`
pub fn psnr(reference: &[f64], candidate: &[f64], peak: f64) -> Result<Decibels> {
    check_len("psnr", reference.len(), candidate.len())?;
    if !(peak > 0.0) {
        return Err(Error::Parameter {
            name: "peak",
            reason: format!("must be positive, got {peak}"),
        });
    }
    if reference.is_empty() {
        return Err(Error::UndefinedRatio("psnr of empty images".into()));
    }
    let sse: f64 = reference
        .iter()
        .zip(candidate)
        .map(|(r, c)| (r - c) * (r - c))
        .sum();
    if sse == 0.0 {
        return Ok(Decibels::Exact);
    }
    let mse = sse / reference.len() as f64;
    Ok(Decibels::Finite(10.0 * (peak * peak / mse).log10()))
}

/// `20·log10(‖reference‖ / ‖candidate − reference‖)`
pub fn snr(reference: &[f64], candidate: &[f64]) -> Result<Decibels> {
    check_len("snr", reference.len(), candidate.len())?;
    let signal = norm2(reference);
    if signal == 0.0 {
        return Err(Error::UndefinedRatio("snr of a zero reference".into()));
    }
    let err: f64 = reference
        .iter()
        .zip(candidate)
        .map(|(r, c)| (r - c) * (r - c))
        .sum::<f64>()
        .sqrt();
    if err == 0.0 {
        return Ok(Decibels::Exact);
    }
    Ok(Decibels::Finite(20.0 * (signal / err).log10()))
}

/// `‖candidate − reference‖ / ‖reference‖`
pub fn relative_error(reference: &[f64], candidate: &[f64]) -> Result<f64> {
    check_len("relative_error", reference.len(), candidate.len())?;
    let r = norm2(reference);
    if r == 0.0 {
        return Err(Error::UndefinedRatio("relative error against zero".into()));
    }
    let d: f64 = reference
        .iter()
        .zip(candidate)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(d / r)
}

/// Adds Gaussian noise rescaled so that the SNR of the result against
/// `clean` is exactly `target_db`. An infinite target returns `clean`.
pub fn add_noise_to_target<R: Rng + ?Sized>(
    clean: &[f64],
    target_db: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if target_db.is_nan() || target_db == f64::NEG_INFINITY {
        return Err(Error::Parameter {
            name: "target_db",
            reason: format!("must be finite or +inf, got {target_db}"),
        });
    }
    let signal = norm2(clean);
    if signal == 0.0 {
        return Err(Error::UndefinedRatio("noise target for a zero signal".into()));
    }
    if target_db == f64::INFINITY {
        return Ok(clean.to_vec());
    }
    let noise: Vec<f64> = (0..clean.len()).map(|_| rng.sample(StandardNormal)).collect();
    let wanted = signal / 10f64.powf(target_db / 20.0);
    let scale = wanted / norm2(&noise);
    Ok(clean.iter().zip(&noise).map(|(c, e)| c + scale * e).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn psnr_examples() {
        let reference = vec![0.5; 16];
        let candidate: Vec<f64> = reference.iter().map(|v| v + 0.1).collect();
        assert!((psnr(&reference, &candidate, 1.0).unwrap().value() - 20.0).abs() < 1e-10);
        let big = vec![0.2; 4096];
        let big_c: Vec<f64> = big.iter().map(|v| v - 0.1).collect();
        assert!((psnr(&big, &big_c, 1.0).unwrap().value() - 20.0).abs() < 1e-10);
        assert_eq!(psnr(&reference, &reference, 1.0).unwrap(), Decibels::Exact);
        assert!(psnr(&reference, &reference[1..], 1.0).is_err());
        assert!(psnr(&reference, &reference, 0.0).is_err());
    }

    #[test]
    fn snr_examples() {
        let x = [3.0, 4.0];
        let y = [3.0, 4.5];
        assert!((snr(&x, &y).unwrap().value() - 20.0).abs() < 1e-12);
        assert!(snr(&[0.0, 0.0], &y).is_err());
    }

    #[test]
    fn noise_hits_target_exactly_and_is_seeded() {
        let clean: Vec<f64> = (0..257).map(|i| (i as f64 * 0.37).sin()).collect();
        for target in [-3.0, 0.0, 20.0, 45.5] {
            let b = add_noise_to_target(&clean, target, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
            let got = snr(&clean, &b).unwrap().value();
            assert!((got - target).abs() < 0.01, "{got} vs {target}");
            let again =
                add_noise_to_target(&clean, target, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
            assert_eq!(b, again);
        }
        let b = add_noise_to_target(&clean, f64::INFINITY, &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap();
        assert_eq!(b, clean);
        assert!(matches!(
            add_noise_to_target(&[0.0; 3], 20.0, &mut ChaCha8Rng::seed_from_u64(1)),
            Err(Error::UndefinedRatio(_))
        ));
    }
}
