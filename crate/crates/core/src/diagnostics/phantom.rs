use crate::error::{Error, Result};

/// One ellipse: intensity, semi-axes `(a, b)`, centre `(x0, y0)` and
/// rotation in degrees, on the square `[−1, 1]²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub intensity: f64,
    pub a: f64,
    pub b: f64,
    pub x0: f64,
    pub y0: f64,
    pub phi: f64,
}

const fn e(intensity: f64, a: f64, b: f64, x0: f64, y0: f64, phi: f64) -> Ellipse {
    Ellipse {
        intensity,
        a,
        b,
        x0,
        y0,
        phi,
    }
}

/// The ten ellipses of the contrast-enhanced Shepp-Logan head phantom.
pub const SHEPP_LOGAN: [Ellipse; 10] = [
    e(1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    e(-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    e(-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    e(-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    e(0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    e(0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    e(0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    e(0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    e(0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    e(0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

/// Samples the sum of `ellipses` at pixel centres of a `p × p` grid and
/// clips to `[0, 1]`. Column-major: pixel `(i, j)` (row, column) is at
/// `i + p·j`; row 0 is the top of the image.
pub fn rasterize(p: usize, ellipses: &[Ellipse]) -> Vec<f64> {
    let coord = |k: usize| {
        if p == 1 {
            0.0
        } else {
            (2.0 * k as f64 - (p - 1) as f64) / (p - 1) as f64
        }
    };
    let mut img = vec![0.0; p * p];
    for j in 0..p {
        let x = coord(j);
        for i in 0..p {
            let y = -coord(i);
            let mut v = 0.0;
            for el in ellipses {
                let (s, c) = el.phi.to_radians().sin_cos();
                let (dx, dy) = (x - el.x0, y - el.y0);
                let u = (dx * c + dy * s) / el.a;
                let w = (-dx * s + dy * c) / el.b;
                if u * u + w * w <= 1.0 {
                    v += el.intensity;
                }
            }
            img[i + p * j] = v.clamp(0.0, 1.0);
        }
    }
    img
}

/// The Shepp-Logan phantom at `p × p`, `p ≥ 16`.
pub fn shepp_logan(p: usize) -> Result<Vec<f64>> {
    if p < 16 {
        return Err(Error::Parameter {
            name: "p",
            reason: format!("phantom side must be at least 16, got {p}"),
        });
    }
    Ok(rasterize(p, &SHEPP_LOGAN))
}
