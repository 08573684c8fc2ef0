//! Orthonormal DCT-II along image columns (the mel axis) and its inverse.

use super::FeatureImage;

/// DCT-II applied down each column: X[k] = a_k * sum_n x[n] *
/// cos(pi*(2n+1)*k / 2N), with a_0 = sqrt(1/N) and a_k = sqrt(2/N).
/// The output has the same shape as the input.
pub fn dct2_columns(img: &FeatureImage) -> FeatureImage {
    let n = img.rows;
    let mut out = FeatureImage::new(n, img.cols, img.kind);
    out.normalized = img.normalized;
    let a0 = (1.0 / n as f64).sqrt();
    let ak = (2.0 / n as f64).sqrt();
    for c in 0..img.cols {
        for k in 0..n {
            let mut acc = 0.0;
            for r in 0..n {
                acc += img.at(r, c)
                    * (std::f64::consts::PI * (2 * r + 1) as f64 * k as f64 / (2 * n) as f64).cos();
            }
            out.set(k, c, if k == 0 { a0 } else { ak } * acc);
        }
    }
    out
}

/// Inverse of [`dct2_columns`] (DCT-III with matching normalization).
pub fn idct2_columns(img: &FeatureImage) -> FeatureImage {
    let n = img.rows;
    let mut out = FeatureImage::new(n, img.cols, img.kind);
    out.normalized = img.normalized;
    let a0 = (1.0 / n as f64).sqrt();
    let ak = (2.0 / n as f64).sqrt();
    for c in 0..img.cols {
        for r in 0..n {
            let mut acc = a0 * img.at(0, c);
            for k in 1..n {
                acc += ak
                    * img.at(k, c)
                    * (std::f64::consts::PI * (2 * r + 1) as f64 * k as f64 / (2 * n) as f64).cos();
            }
            out.set(r, c, acc);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureKind;

    fn random_image(rows: usize, cols: usize, seed: u64) -> FeatureImage {
        let mut rng = crate::rng::SplitMix64::new(seed);
        FeatureImage {
            values: (0..rows * cols).map(|_| rng.uniform(-5.0, 5.0)).collect(),
            rows,
            cols,
            kind: FeatureKind::LogMel,
            normalized: false,
        }
    }

    #[test]
    fn round_trip_recovers_input() {
        let img = random_image(64, 16, 3);
        let back = idct2_columns(&dct2_columns(&img));
        for (a, b) in back.values.iter().zip(&img.values) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn transform_is_orthonormal() {
        // Parseval: column energy is preserved.
        let img = random_image(32, 4, 9);
        let coeffs = dct2_columns(&img);
        for c in 0..img.cols {
            let e_in: f64 = (0..img.rows).map(|r| img.at(r, c).powi(2)).sum();
            let e_out: f64 = (0..img.rows).map(|r| coeffs.at(r, c).powi(2)).sum();
            assert!((e_in - e_out).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_column_concentrates_in_dc() {
        let n = 20;
        let img = FeatureImage {
            values: vec![2.5; n],
            rows: n,
            cols: 1,
            kind: FeatureKind::LogMel,
            normalized: false,
        };
        let coeffs = dct2_columns(&img);
        assert!((coeffs.at(0, 0) - 2.5 * (n as f64).sqrt()).abs() < 1e-12);
        for k in 1..n {
            assert!(coeffs.at(k, 0).abs() < 1e-12);
        }
    }
}
