//! Additive and isometric log-ratio maps between the open 2-simplex and the plane.

use crate::error::{Error, Result};
use crate::simplex::Composition;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogRatio {
    Alr,
    Ilr,
}

fn interior_parts(s: &Composition) -> Result<[f64; 3]> {
    if s.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, actual: s.dim() });
    }
    let parts = [s.coords()[0], s.coords()[1], s.last()];
    if parts.iter().any(|&v| v <= 0.0) {
        return Err(Error::BoundaryPoint);
    }
    Ok(parts)
}

/// Maps an interior composition to the plane.
pub fn log_ratio_forward(kind: LogRatio, s: &Composition) -> Result<[f64; 2]> {
    let [s1, s2, s3] = interior_parts(s)?;
    Ok(match kind {
        LogRatio::Alr => [(s1 / s3).ln(), (s2 / s3).ln()],
        LogRatio::Ilr => [
            std::f64::consts::FRAC_1_SQRT_2 * (s1 / s2).ln(),
            (s1 * s2 / (s3 * s3)).ln() / 6f64.sqrt(),
        ],
    })
}

/// Inverse map: a softmax of the recovered log-parts.
pub fn log_ratio_inverse(kind: LogRatio, z: [f64; 2]) -> Composition {
    let logs = match kind {
        LogRatio::Alr => [z[0], z[1], 0.0],
        LogRatio::Ilr => {
            let sum = 6f64.sqrt() * z[1];
            let diff = 2f64.sqrt() * z[0];
            [(sum + diff) / 2.0, (sum - diff) / 2.0, 0.0]
        }
    };
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e = logs.map(|l| (l - max).exp());
    let total: f64 = e.iter().sum();
    Composition::from_coords_unchecked(vec![e[0] / total, e[1] / total])
}

/// `|det d T(s) / d s|`: `1/(s1 s2 s3)` for alr, `1/(sqrt(3) s1 s2 s3)` for ilr.
pub fn log_ratio_jacobian(kind: LogRatio, s: &Composition) -> Result<f64> {
    let [s1, s2, s3] = interior_parts(s)?;
    let base = 1.0 / (s1 * s2 * s3);
    Ok(match kind {
        LogRatio::Alr => base,
        LogRatio::Ilr => base / 3f64.sqrt(),
    })
}
