//! Training data: image I/O, the codec proxy, and 35x35 tiling.

mod codec;
mod io;
mod synth;

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tensor::{Plane, Tensor};

pub use codec::{degrade, BLOCK};
pub use io::{
    encode_pgm, load_plane, load_yuv420_frame, parse_pgm, parse_raw, save_plane, save_yuv420,
    split_yuv420, yuv420_frame_count, yuv420_frame_size, PlaneFormat, YuvFrame,
};
pub use synth::synthetic_image;

/// Side length of a training sample.
pub const TILE: usize = 35;

/// The four quality levels used for per-QP models.
pub const TRAINING_QPS: [i32; 4] = [22, 27, 32, 37];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub struct QualityLevel(u8);

impl QualityLevel {
    pub fn new(qp: i32) -> Result<Self> {
        if (0..=51).contains(&qp) {
            Ok(QualityLevel(qp as u8))
        } else {
            Err(Error::InvalidQp(qp))
        }
    }

    pub fn qp(self) -> i32 {
        i32::from(self.0)
    }

    /// Quantizer step `2^((qp - 4) / 6)`.
    pub fn qstep(self) -> f64 {
        2f64.powf((self.qp() - 4) as f64 / 6.0)
    }
}

impl TryFrom<i32> for QualityLevel {
    type Error = Error;

    fn try_from(qp: i32) -> Result<Self> {
        QualityLevel::new(qp)
    }
}

impl From<QualityLevel> for i32 {
    fn from(q: QualityLevel) -> i32 {
        q.qp()
    }
}

impl fmt::Display for QualityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A co-located (degraded, original) tile pair.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePair {
    pub degraded: Tensor,
    pub original: Tensor,
    pub source: String,
    /// Pixel offset of the tile's top-left corner.
    pub x: usize,
    pub y: usize,
}

/// Non-overlapping `TILE x TILE` tiles in row-major order; partial tiles at
/// the right and bottom edges are dropped.
pub fn tile_pairs(original: &Plane, degraded: &Plane, source: &str) -> Result<Vec<SamplePair>> {
    if original.width() != degraded.width() || original.height() != degraded.height() {
        return Err(Error::InvalidDimensions(format!(
            "original is {}x{}, degraded is {}x{}",
            original.width(),
            original.height(),
            degraded.width(),
            degraded.height()
        )));
    }
    let (cols, rows) = (original.width() / TILE, original.height() / TILE);
    let mut out = Vec::with_capacity(cols * rows);
    for ty in 0..rows {
        for tx in 0..cols {
            let (x, y) = (tx * TILE, ty * TILE);
            out.push(SamplePair {
                degraded: degraded.crop(x, y, TILE, TILE)?.to_tensor(),
                original: original.crop(x, y, TILE, TILE)?.to_tensor(),
                source: source.to_owned(),
                x,
                y,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub width: usize,
    pub height: usize,
    pub tiles: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub qp: QualityLevel,
    pub tile_size: usize,
    pub files: Vec<ManifestEntry>,
    pub total_tiles: usize,
    /// SHA-256 over every source name, original plane, and degraded plane.
    pub checksum: String,
}

#[derive(Clone, Debug)]
pub struct Corpus {
    pub samples: Vec<SamplePair>,
    pub manifest: CorpusManifest,
}

/// Degrades and tiles each named image. Output order follows the input
/// order, whatever the degree of parallelism.
pub fn build_corpus_from_planes(images: &[(String, Plane)], q: QualityLevel) -> Result<Corpus> {
    if images.is_empty() {
        return Err(Error::EmptyDataset("no images".into()));
    }
    let per_image: Vec<(Plane, Vec<SamplePair>)> = images
        .par_iter()
        .map(|(name, original)| {
            let degraded = degrade(original, q);
            let tiles = tile_pairs(original, &degraded, name)?;
            Ok((degraded, tiles))
        })
        .collect::<Result<_>>()?;

    let mut hasher = Sha256::new();
    let mut files = Vec::with_capacity(images.len());
    let mut samples = Vec::new();
    for ((name, original), (degraded, tiles)) in images.iter().zip(per_image) {
        hasher.update(name.as_bytes());
        hasher.update([0u8]);
        hasher.update((original.width() as u32).to_le_bytes());
        hasher.update((original.height() as u32).to_le_bytes());
        hasher.update(original.samples());
        hasher.update(degraded.samples());
        files.push(ManifestEntry {
            file: name.clone(),
            width: original.width(),
            height: original.height(),
            tiles: tiles.len(),
        });
        samples.extend(tiles);
    }
    let checksum = hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    Ok(Corpus {
        manifest: CorpusManifest {
            qp: q,
            tile_size: TILE,
            total_tiles: samples.len(),
            files,
            checksum,
        },
        samples,
    })
}

/// Lists `*.pgm` files in `dir`, sorted by file name.
pub fn list_images(dir: impl AsRef<Path>) -> Result<Vec<std::path::PathBuf>> {
    let dir = dir.as_ref();
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
        })
        .collect();
    paths.sort();
    Ok(paths)
}

/// Loads every PGM in `image_dir` and builds the tiled corpus at quality `q`.
pub fn build_corpus(image_dir: impl AsRef<Path>, q: QualityLevel) -> Result<Corpus> {
    let dir = image_dir.as_ref();
    let paths = list_images(dir)?;
    if paths.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no .pgm images in {}",
            dir.display()
        )));
    }
    let images = paths
        .iter()
        .map(|p| {
            let name = p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok((name, load_plane(p, PlaneFormat::Pgm)?))
        })
        .collect::<Result<Vec<_>>>()?;
    build_corpus_from_planes(&images, q)
}
