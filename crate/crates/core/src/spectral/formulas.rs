//! Per-pixel vegetation index formulas.
//!
//! Each function returns `None` where the formula's denominator is zero so
//! that callers can write nodata instead of failing the whole plot.

/// `(NIR - R) / (NIR + R)`
#[inline]
pub fn ndvi(nir: f64, red: f64) -> Option<f64> {
    let den = nir + red;
    (den != 0.0).then(|| (nir - red) / den)
}

/// `(1 + L)(NIR - R) / (NIR + R + L)`
#[inline]
pub fn savi(nir: f64, red: f64, l: f64) -> Option<f64> {
    let den = nir + red + l;
    (den != 0.0).then(|| (1.0 + l) * (nir - red) / den)
}

/// Kernel NDVI. With `sigma = None` the length scale is `0.5 (NIR + R)`,
/// which reduces to `tanh(NDVI^2)`; otherwise `tanh(((NIR - R) / 2 sigma)^2)`.
#[inline]
pub fn kndvi(nir: f64, red: f64, sigma: Option<f64>) -> Option<f64> {
    match sigma {
        None => ndvi(nir, red).map(|v| (v * v).tanh()),
        Some(s) if s > 0.0 => {
            let k = (nir - red) / (2.0 * s);
            Some((k * k).tanh())
        }
        Some(_) => None,
    }
}

/// `NIR * NDVI`
#[inline]
pub fn nirv(nir: f64, red: f64) -> Option<f64> {
    ndvi(nir, red).map(|v| nir * v)
}

/// `(R - G) / NIR` for multispectral bands, or `(R680 - R500) / R750` when
/// fed the hyperspectral reflectances.
#[inline]
pub fn psri(red: f64, blue_or_green: f64, nir: f64) -> Option<f64> {
    (nir != 0.0).then(|| (red - blue_or_green) / nir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_values() {
        assert!((ndvi(0.5, 0.1).unwrap() - 0.4 / 0.6).abs() < 1e-15);
        assert!((savi(0.5, 0.1, 0.5).unwrap() - 0.545454545454545).abs() < 1e-12);
        assert!((psri(0.2, 0.1, 0.5).unwrap() - 0.2).abs() < 1e-15);
        assert!((psri(0.3, 0.1, 0.4).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn symmetric_bands_give_zero() {
        assert_eq!(ndvi(0.3, 0.3), Some(0.0));
        assert_eq!(kndvi(0.3, 0.3, None), Some(0.0));
        assert_eq!(nirv(0.3, 0.3), Some(0.0));
    }

    #[test]
    fn zero_denominators() {
        assert_eq!(ndvi(0.0, 0.0), None);
        assert_eq!(kndvi(0.0, 0.0, None), None);
        assert_eq!(psri(0.1, 0.1, 0.0), None);
        assert_eq!(kndvi(0.4, 0.1, Some(0.0)), None);
    }

    #[test]
    fn tunable_sigma_matches_simplified_form() {
        let (nir, red) = (0.45, 0.08);
        let sigma = 0.5 * (nir + red);
        let a = kndvi(nir, red, Some(sigma)).unwrap();
        let b = kndvi(nir, red, None).unwrap();
        assert!((a - b).abs() < 1e-15);
    }
}
