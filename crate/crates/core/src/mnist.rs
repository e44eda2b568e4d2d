//! MNIST in the IDX format: big-endian headers, raw unsigned bytes.

use std::path::{Path, PathBuf};

use crate::error::{HlopError, Result};
use crate::numeric::Matrix;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Environment variable naming the directory that holds the IDX files.
pub const DATA_DIR_ENV: &str = "HLOP_DATA_DIR";

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// Images as rows of `[0, 1]` pixel intensities (`byte / 255`) with labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub images: Matrix,
    pub labels: Vec<usize>,
    pub height: usize,
    pub width: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Mean and standard deviation over every pixel of every image.
    pub fn pixel_stats(&self) -> (f64, f64) {
        let v = self.images.as_slice();
        let n = v.len().max(1) as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n;
        (mean, var.sqrt())
    }

    /// Pixels mapped to `(p − mean) / std`.
    pub fn standardized(&self, mean: f64, std: f64) -> Result<Dataset> {
        if !(std > 0.0 && std.is_finite() && mean.is_finite()) {
            return Err(HlopError::InvalidArgument(format!("standardize: bad statistics mean={mean}, std={std}")));
        }
        let mut out = self.clone();
        out.images.map_inplace(|p| (p - mean) / std);
        Ok(out)
    }

    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            images: self.images.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            height: self.height,
            width: self.width,
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => HlopError::MissingData(path.to_path_buf()),
        _ => HlopError::Io(e),
    })
}

fn header(bytes: &[u8], path: &Path, magic: u32, words: usize) -> Result<Vec<u32>> {
    let need = 4 * words;
    if bytes.len() < need {
        return Err(HlopError::IdxTruncated { path: path.to_path_buf(), found: bytes.len(), expected: need });
    }
    let fields: Vec<u32> = bytes[..need].chunks_exact(4).map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]])).collect();
    if fields[0] != magic {
        return Err(HlopError::IdxMagic { path: path.to_path_buf(), found: fields[0], expected: magic });
    }
    Ok(fields)
}

fn payload<'a>(bytes: &'a [u8], path: &Path, offset: usize, len: usize) -> Result<&'a [u8]> {
    if bytes.len() < offset + len {
        return Err(HlopError::IdxTruncated { path: path.to_path_buf(), found: bytes.len(), expected: offset + len });
    }
    Ok(&bytes[offset..offset + len])
}

pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let img = read(images_path)?;
    let h = header(&img, images_path, IMAGE_MAGIC, 4)?;
    let (count, height, width) = (h[1] as usize, h[2] as usize, h[3] as usize);
    let pixels = payload(&img, images_path, 16, count * height * width)?;

    let lab = read(labels_path)?;
    let h = header(&lab, labels_path, LABEL_MAGIC, 2)?;
    let label_count = h[1] as usize;
    if label_count != count {
        return Err(HlopError::IdxCountMismatch { images: count, labels: label_count });
    }
    let labels: Vec<usize> = payload(&lab, labels_path, 8, count)?.iter().map(|&b| b as usize).collect();

    let data = pixels.iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok(Dataset { images: Matrix::from_vec(count, height * width, data)?, labels, height, width })
}

/// `config` override, then `HLOP_DATA_DIR`, then `data/mnist`.
pub fn resolve_data_dir(configured: Option<&Path>) -> PathBuf {
    configured
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data/mnist"))
}

/// Train and test splits from one directory.
pub fn load_mnist_dir(dir: &Path) -> Result<(Dataset, Dataset)> {
    let train = load_mnist_idx(&dir.join(TRAIN_IMAGES), &dir.join(TRAIN_LABELS))?;
    let test = load_mnist_idx(&dir.join(TEST_IMAGES), &dir.join(TEST_LABELS))?;
    Ok((train, test))
}

/// Serializes a dataset back to IDX bytes (images, labels); intensities are
/// rounded to the nearest byte.
pub fn to_idx_bytes(data: &Dataset) -> (Vec<u8>, Vec<u8>) {
    let mut img = Vec::with_capacity(16 + data.images.as_slice().len());
    for v in [IMAGE_MAGIC, data.len() as u32, data.height as u32, data.width as u32] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    img.extend(data.images.as_slice().iter().map(|&p| (p * 255.0).round().clamp(0.0, 255.0) as u8));
    let mut lab = Vec::with_capacity(8 + data.len());
    for v in [LABEL_MAGIC, data.len() as u32] {
        lab.extend_from_slice(&v.to_be_bytes());
    }
    lab.extend(data.labels.iter().map(|&l| l as u8));
    (img, lab)
}
