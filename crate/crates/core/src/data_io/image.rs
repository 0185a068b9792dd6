//! Binary PGM (P5) and PPM (P6) rasters and random patch extraction.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::float::Float;

/// A decoded raster with samples scaled to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    /// 1 for grayscale, 3 for color.
    pub channels: usize,
    /// Interleaved row-major samples.
    pub samples: Vec<f64>,
}

/// Patch geometry; a patch flattens to `edge * edge * channels` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchSpec {
    pub edge: usize,
    pub stride: usize,
    pub channels: usize,
}

impl PatchSpec {
    pub fn new(edge: usize, stride: usize, channels: usize) -> Self {
        PatchSpec {
            edge,
            stride,
            channels,
        }
    }

    /// Signal dimension of one flattened patch.
    pub fn m(&self) -> usize {
        self.edge * self.edge * self.channels
    }
}

/// Loads a binary P5/P6 raster.
pub fn load_raster(path: &Path) -> Result<Raster> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_raster(bytes.as_slice())
}

/// Decodes a binary P5/P6 raster from raw bytes.
pub fn parse_raster(bytes: &[u8]) -> Result<Raster> {
    let mut pos = 0usize;
    let magic = next_token(bytes, &mut pos)
        .ok_or_else(|| Error::format("raster header", "missing magic number"))?;
    let channels = match magic.as_str() {
        "P5" => 1,
        "P6" => 3,
        other => {
            return Err(Error::format(
                "raster header",
                format!("unsupported magic number {other:?}"),
            ))
        }
    };
    let mut dims = [0usize; 3];
    for d in dims.iter_mut() {
        let tok = next_token(bytes, &mut pos)
            .ok_or_else(|| Error::format("raster header", "truncated header"))?;
        *d = tok
            .parse()
            .map_err(|_| Error::format("raster header", format!("bad header field {tok:?}")))?;
    }
    let [width, height, maxval] = dims;
    if width == 0 || height == 0 {
        return Err(Error::format("raster header", "zero dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::format("raster header", "maxval out of range"));
    }
    // Exactly one whitespace byte separates the header from the payload.
    let bytes_per = if maxval > 255 { 2 } else { 1 };
    let count = width * height * channels;
    let payload = &bytes[pos..];
    if payload.len() < count * bytes_per {
        return Err(Error::format("raster payload", "truncated payload"));
    }
    let scale = 1.0 / maxval as f64;
    let samples: Vec<f64> = if bytes_per == 1 {
        payload[..count].iter().map(|&b| b as f64 * scale).collect()
    } else {
        payload[..2 * count]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 * scale)
            .collect()
    };
    Ok(Raster {
        width,
        height,
        channels,
        samples,
    })
}

/// Reads one whitespace-delimited header token, skipping `#` comments, and
/// leaves `pos` one byte past the token's trailing delimiter.
fn next_token(bytes: &[u8], pos: &mut usize) -> Option<String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let end = *pos;
    if *pos < bytes.len() {
        *pos += 1; // consume the single delimiter
    }
    if start == end {
        None
    } else {
        std::str::from_utf8(&bytes[start..end])
            .ok()
            .map(|s| s.to_string())
    }
}

/// Extracts up to `max_count` patches at positions drawn uniformly without
/// replacement from the stride grid, flattened channel-major (all of
/// channel 0, then channel 1, ...). One column per patch.
pub fn extract_patches<F: Float>(
    image: &Raster,
    spec: &PatchSpec,
    max_count: usize,
    rng_seed: u64,
) -> Result<Array2<F>> {
    if spec.edge == 0 || spec.stride == 0 {
        return Err(Error::InvalidConfig(
            "patch edge and stride must be positive".into(),
        ));
    }
    if spec.channels != image.channels {
        return Err(Error::DimensionMismatch {
            context: "patch channels",
            expected: image.channels,
            got: spec.channels,
        });
    }
    if image.width < spec.edge || image.height < spec.edge {
        return Err(Error::InvalidConfig(format!(
            "image {}x{} smaller than patch edge {}",
            image.width, image.height, spec.edge
        )));
    }

    let mut positions: Vec<(usize, usize)> = Vec::new();
    let mut y = 0;
    while y + spec.edge <= image.height {
        let mut x = 0;
        while x + spec.edge <= image.width {
            positions.push((x, y));
            x += spec.stride;
        }
        y += spec.stride;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    positions.shuffle(&mut rng);
    positions.truncate(max_count);

    let m = spec.m();
    let mut out = Array2::<F>::zeros((m, positions.len()));
    for (col, &(x0, y0)) in positions.iter().enumerate() {
        let mut r = 0;
        for ch in 0..spec.channels {
            for dy in 0..spec.edge {
                for dx in 0..spec.edge {
                    let idx = ((y0 + dy) * image.width + (x0 + dx)) * image.channels + ch;
                    out[[r, col]] = F::cast(image.samples[idx]);
                    r += 1;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_pgm(w: usize, h: usize) -> Vec<u8> {
        let mut bytes = format!("P5\n# test\n{w} {h}\n255\n").into_bytes();
        for i in 0..w * h {
            bytes.push((i % 251) as u8);
        }
        bytes
    }

    #[test]
    fn parses_p5_with_comment() {
        let img = parse_raster(&tiny_pgm(4, 3)).unwrap();
        assert_eq!((img.width, img.height, img.channels), (4, 3, 1));
        assert_eq!(img.samples.len(), 12);
        assert!((img.samples[1] - 1.0 / 255.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_unknown_magic() {
        assert!(parse_raster(b"P3\n1 1\n255\n0").is_err());
    }

    #[test]
    fn rejects_truncated_payload() {
        let mut bytes = tiny_pgm(4, 4);
        bytes.truncate(bytes.len() - 3);
        assert!(parse_raster(&bytes).is_err());
    }

    #[test]
    fn full_image_patch_is_identity() {
        let img = parse_raster(&tiny_pgm(8, 8)).unwrap();
        let patches: Array2<f64> =
            extract_patches(&img, &PatchSpec::new(8, 1, 1), 10, 0).unwrap();
        assert_eq!(patches.dim(), (64, 1));
        for (i, v) in patches.column(0).iter().enumerate() {
            assert!((v - img.samples[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn position_grid_bound() {
        let img = parse_raster(&tiny_pgm(16, 16)).unwrap();
        let patches: Array2<f64> =
            extract_patches(&img, &PatchSpec::new(8, 1, 1), usize::MAX, 1).unwrap();
        assert_eq!(patches.ncols(), 81);
    }

    #[test]
    fn extraction_is_deterministic() {
        let img = parse_raster(&tiny_pgm(12, 12)).unwrap();
        let a: Array2<f64> = extract_patches(&img, &PatchSpec::new(4, 2, 1), 5, 7).unwrap();
        let b: Array2<f64> = extract_patches(&img, &PatchSpec::new(4, 2, 1), 5, 7).unwrap();
        assert_eq!(a, b);
    }
}
