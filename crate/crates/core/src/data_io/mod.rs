//! Data ingestion and preparation: dense matrix files, PGM/PPM rasters and
//! patch extraction, preprocessing, permuted sample streams, and synthetic
//! planted-dictionary data.

mod image;
mod matrix;
mod stream;
mod synth;

pub use image::{extract_patches, load_raster, parse_raster, PatchSpec, Raster};
pub use matrix::{load_matrix, parse_matrix, save_matrix, save_matrix_text};
pub use stream::{IndexCycle, PermutedCycle};
pub use synth::synth_planted;

use ndarray::Array2;

use crate::float::Float;

/// Per-column preprocessing: subtract the column mean, then scale to unit
/// l2 norm. Zero columns are left untouched by the normalization.
pub fn preprocess<F: Float>(x: &mut Array2<F>, center: bool, normalize: bool) {
    let m = x.nrows();
    if m == 0 {
        return;
    }
    for mut col in x.columns_mut() {
        if center {
            let mean = col.iter().copied().sum::<F>() / F::cast(m);
            col.mapv_inplace(|v| v - mean);
        }
        if normalize {
            let norm = col.iter().map(|&v| v * v).sum::<F>().sqrt();
            if norm > F::zero() {
                col.mapv_inplace(|v| v / norm);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn centering_zeroes_constant_column() {
        let mut x = array![[1.0], [1.0]];
        preprocess(&mut x, true, true);
        // Centered to zero; the zero-norm guard skips normalization.
        assert_eq!(x, array![[0.0], [0.0]]);
    }

    #[test]
    fn normalize_only() {
        let mut x = array![[3.0f64], [4.0]];
        preprocess(&mut x, false, true);
        assert!((x[[0, 0]] - 0.6).abs() < 1e-15);
        assert!((x[[1, 0]] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn output_norms_are_zero_or_one() {
        let mut x = array![
            [0.3f64, 0.0, -2.0],
            [1.7, 0.0, 0.5],
            [-0.4, 0.0, 1.1],
            [0.9, 0.0, -0.2]
        ];
        preprocess(&mut x, true, true);
        for col in x.columns() {
            let norm: f64 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm.abs() < 1e-12 || (norm - 1.0).abs() < 1e-12);
        }
    }
}
