//! Magnitude image output: raw little-endian `f32` with a `.meta` sidecar, and
//! an 8-bit binary PGM preview.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::image::ComplexImage;

/// Files produced by [`write_image`].
#[derive(Clone, Debug)]
pub struct ImageFiles {
    pub raw: PathBuf,
    pub meta: PathBuf,
    pub pgm: PathBuf,
}

/// Writes `stem.f32`, `stem.meta` and `stem.pgm`. The PGM scales the magnitude
/// linearly so its maximum maps to 255; an all-zero image stays black.
pub fn write_image(image: &ComplexImage, stem: &Path) -> Result<ImageFiles> {
    let files = ImageFiles {
        raw: stem.with_extension("f32"),
        meta: stem.with_extension("meta"),
        pgm: stem.with_extension("pgm"),
    };
    let shape = image.shape();
    let mags = image.magnitudes();
    let min = mags.iter().copied().fold(f64::INFINITY, f64::min);
    let max = mags.iter().copied().fold(0.0, f64::max);
    let min = if min.is_finite() { min } else { 0.0 };

    let raw: Vec<u8> = mags.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
    fs::write(&files.raw, raw).map_err(|e| Error::io(&files.raw, e))?;

    let meta = format!(
        "rows = {}\ncols = {}\nchannels = {}\ndtype = f32le\nmin = {min}\nmax = {max}\n",
        shape.rows, shape.cols, shape.channels
    );
    fs::write(&files.meta, meta).map_err(|e| Error::io(&files.meta, e))?;

    let mut pgm = format!("P5\n{} {}\n255\n", shape.cols * shape.channels, shape.rows).into_bytes();
    pgm.extend(mags.iter().map(|&v| {
        if max > 0.0 {
            (255.0 * v / max).round().clamp(0.0, 255.0) as u8
        } else {
            0
        }
    }));
    fs::write(&files.pgm, pgm).map_err(|e| Error::io(&files.pgm, e))?;
    Ok(files)
}

/// Reads a raw little-endian `f32` file back.
pub fn read_raw(path: &Path) -> Result<Vec<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Config(format!(
            "{}: length {} is not a multiple of 4",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Pixel bytes of a binary PGM written by [`write_image`].
pub fn read_pgm_pixels(path: &Path) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    // header is three newline-terminated lines
    let mut newlines = 0;
    for (i, b) in bytes.iter().enumerate() {
        if *b == b'\n' {
            newlines += 1;
            if newlines == 3 {
                return Ok(bytes[i + 1..].to_vec());
            }
        }
    }
    Err(Error::Config(format!("{}: truncated PGM header", path.display())))
}
