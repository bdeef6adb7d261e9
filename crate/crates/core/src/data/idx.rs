use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use super::SequenceDataset;
use crate::error::{Error, Result};
use crate::ndcore::Matrix;

pub const MNIST_CLASSES: usize = 10;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::parse(offset, format!("truncated header reading {what}")))
}

/// Parses an IDX image file (`rows x cols` per sample) and its label file.
/// Pixels are scaled to `[0, 1]` by `/255`.
pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<SequenceDataset> {
    let magic = be_u32(images, 0, "image magic")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::parse(0, format!("bad image magic 0x{magic:08x}")));
    }
    let count = be_u32(images, 4, "image count")? as usize;
    let rows = be_u32(images, 8, "row count")? as usize;
    let cols = be_u32(images, 12, "column count")? as usize;

    let magic = be_u32(labels, 0, "label magic")?;
    if magic != LABEL_MAGIC {
        return Err(Error::parse(0, format!("bad label magic 0x{magic:08x}")));
    }
    let label_count = be_u32(labels, 4, "label count")? as usize;
    if label_count != count {
        return Err(Error::parse(4, format!("label count {label_count} does not match image count {count}")));
    }

    let pixels = rows * cols;
    let need = 16 + count * pixels;
    if images.len() < need {
        return Err(Error::parse(images.len(), format!("truncated image payload: need {need} bytes")));
    }
    if labels.len() < 8 + count {
        return Err(Error::parse(labels.len(), format!("truncated label payload: need {} bytes", 8 + count)));
    }

    let mut inputs = Vec::with_capacity(count);
    let mut ys = Vec::with_capacity(count);
    for i in 0..count {
        let start = 16 + i * pixels;
        let data = images[start..start + pixels].iter().map(|&b| b as f64 / 255.0).collect();
        inputs.push(Matrix::from_vec(rows, cols, data)?);
        let label = labels[8 + i] as usize;
        if label >= MNIST_CLASSES {
            return Err(Error::parse(8 + i, format!("label {label} is not a digit")));
        }
        ys.push(label);
    }
    Ok(SequenceDataset {
        inputs,
        labels: ys,
        steps: rows,
        dim: cols,
        classes: MNIST_CLASSES,
    })
}

/// Reads a file, transparently decompressing gzip content.
pub fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..]).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn find(dir: &Path, stem: &str) -> Result<std::path::PathBuf> {
    for name in [stem.to_string(), format!("{stem}.gz")] {
        let p = dir.join(name);
        if p.is_file() {
            return Ok(p);
        }
    }
    Err(Error::Io(std::io::Error::new(
        std::io::ErrorKind::NotFound,
        format!("{} not found in {}", stem, dir.display()),
    )))
}

/// Loads the `train` (`train-*`) or `test` (`t10k-*`) split from a directory
/// holding the standard MNIST file names, optionally gzipped.
pub fn load_mnist_split(dir: &Path, train: bool) -> Result<SequenceDataset> {
    let prefix = if train { "train" } else { "t10k" };
    let images = read_maybe_gzip(&find(dir, &format!("{prefix}-images-idx3-ubyte"))?)?;
    let labels = read_maybe_gzip(&find(dir, &format!("{prefix}-labels-idx1-ubyte"))?)?;
    parse_idx(&images, &labels)
}
