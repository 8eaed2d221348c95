//! UBC patch-dataset directory layout.
//!
//! A dataset directory holds `patchesNNNN.bmp` mosaics of 1024×1024 pixels,
//! each a 16×16 grid of 64×64 patches read row-major, and an `info.txt` whose
//! line `i` starts with the 3D point id of patch `i`. Patch ids run
//! row-major across mosaics in filename order. The final mosaic may be only
//! partly filled; `info.txt` decides how many patches exist.
//!
//! Pair files (`m50_*.txt`) hold six integers per line:
//! `id1 point1 unused id2 point2 unused`.

use std::collections::BTreeMap;
use std::path::Path;

use crate::dataio::bmp::decode_gray_bmp;
use crate::dataio::preprocess::{preprocess, PreprocessConfig};
use crate::dataio::{Dataset, PairIndex};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const PATCH_SIDE: usize = 64;
pub const MOSAIC_SIDE: usize = 1024;
pub const PATCHES_PER_ROW: usize = MOSAIC_SIDE / PATCH_SIDE;
pub const PATCHES_PER_MOSAIC: usize = PATCHES_PER_ROW * PATCHES_PER_ROW;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patch {
    /// 64×64 row-major grayscale.
    pub pixels: Vec<u8>,
    pub patch_id: usize,
    pub point3d_id: u64,
}

fn read_info(path: &Path) -> Result<Vec<u64>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::Format(format!("{}: missing info.txt (expected one line per patch)", path.display()))
        } else {
            Error::io(path, e)
        }
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            line.split_whitespace()
                .next()
                .and_then(|t| t.parse::<u64>().ok())
                .ok_or_else(|| {
                    Error::Format(format!(
                        "{}:{}: expected a 3D point id as the first integer",
                        path.display(),
                        n + 1
                    ))
                })
        })
        .collect()
}

fn mosaic_files(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if name.starts_with("patches") && name.to_ascii_lowercase().ends_with(".bmp") {
            files.push(entry.path());
        }
    }
    files.sort();
    Ok(files)
}

pub fn load_ubc_patches(dir: &Path) -> Result<Vec<Patch>> {
    let point_ids = read_info(&dir.join("info.txt"))?;
    let files = mosaic_files(dir)?;
    let capacity = files.len() * PATCHES_PER_MOSAIC;
    if point_ids.len() > capacity || point_ids.len() + PATCHES_PER_MOSAIC <= capacity {
        return Err(Error::Format(format!(
            "{}: info.txt lists {} patches but {} mosaic(s) hold between {} and {}",
            dir.display(),
            point_ids.len(),
            files.len(),
            capacity.saturating_sub(PATCHES_PER_MOSAIC) + 1,
            capacity
        )));
    }
    let mut patches = Vec::with_capacity(point_ids.len());
    'files: for file in &files {
        let bytes = std::fs::read(file).map_err(|e| Error::io(file, e))?;
        let img = decode_gray_bmp(&bytes)
            .map_err(|e| Error::Format(format!("{}: {e}", file.display())))?;
        if img.width != MOSAIC_SIDE || img.height != MOSAIC_SIDE {
            return Err(Error::Format(format!(
                "{}: mosaic is {}x{}, expected {MOSAIC_SIDE}x{MOSAIC_SIDE}",
                file.display(),
                img.width,
                img.height
            )));
        }
        for cell in 0..PATCHES_PER_MOSAIC {
            let patch_id = patches.len();
            if patch_id == point_ids.len() {
                break 'files;
            }
            let (gy, gx) = (cell / PATCHES_PER_ROW, cell % PATCHES_PER_ROW);
            let mut pixels = Vec::with_capacity(PATCH_SIDE * PATCH_SIDE);
            for y in 0..PATCH_SIDE {
                let start = (gy * PATCH_SIDE + y) * MOSAIC_SIDE + gx * PATCH_SIDE;
                pixels.extend_from_slice(&img.pixels[start..start + PATCH_SIDE]);
            }
            patches.push(Patch {
                pixels,
                patch_id,
                point3d_id: point_ids[patch_id],
            });
        }
    }
    Ok(patches)
}

pub fn parse_pair_lines(text: &str, n_patches: usize, source: &str) -> Result<Vec<PairIndex>> {
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<u64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Format(format!("{source}:{}: non-integer field", n + 1)))?;
        if fields.len() != 6 {
            return Err(Error::Format(format!(
                "{source}:{}: expected 6 integers, found {}",
                n + 1,
                fields.len()
            )));
        }
        let (a, pa, b, pb) = (fields[0] as usize, fields[1], fields[3] as usize, fields[4]);
        if a >= n_patches || b >= n_patches {
            return Err(Error::Format(format!(
                "{source}:{}: patch id out of range ({a}, {b}; {n_patches} patches loaded)",
                n + 1
            )));
        }
        pairs.push(PairIndex::new(a, b, pa == pb));
    }
    Ok(pairs)
}

pub fn load_pair_file(path: &Path, n_patches: usize) -> Result<Vec<PairIndex>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pair_lines(&text, n_patches, &path.display().to_string())
}

/// Preprocesses the patches referenced by `pairs` into a [`Dataset`].
///
/// Vectors are stored in ascending patch-id order and pair indices are
/// remapped accordingly.
pub fn build_dataset<T: Scalar>(
    patches: &[Patch],
    pairs: &[PairIndex],
    cfg: &PreprocessConfig,
) -> Result<Dataset<T>> {
    let mut index: BTreeMap<usize, usize> = pairs.iter().flat_map(|p| [(p.a, 0), (p.b, 0)]).collect();
    for (slot, v) in index.values_mut().enumerate() {
        *v = slot;
    }
    let mut vectors = Vec::with_capacity(index.len() * cfg.target_side * cfg.target_side);
    for &id in index.keys() {
        let patch = patches
            .get(id)
            .ok_or_else(|| Error::Input(format!("pair references missing patch {id}")))?;
        vectors.extend(preprocess::<T>(patch, cfg));
    }
    let remapped = pairs
        .iter()
        .map(|p| PairIndex::new(index[&p.a], index[&p.b], p.is_match))
        .collect();
    Dataset::new(cfg.target_side * cfg.target_side, vectors, remapped)
}
