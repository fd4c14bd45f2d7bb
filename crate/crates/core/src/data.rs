//! Labelled datasets: MNIST IDX ingestion and small synthetic sets.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use rand_distr::{Distribution, Normal};

use crate::rng;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad IDX magic 0x{found:08x}, expected 0x{expected:08x}")]
    BadMagic { found: u32, expected: u32 },
    #[error("IDX payload truncated: need {needed} bytes, have {have}")]
    Truncated { needed: usize, have: usize },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: u8, classes: usize },
}

/// Row-major inputs (`len × width`, values in `[0, 1]` for images) with
/// integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<f32>,
    pub labels: Vec<u8>,
    pub width: usize,
    pub classes: usize,
}

impl Dataset {
    pub fn new(inputs: Vec<f32>, labels: Vec<u8>, width: usize, classes: usize) -> Result<Self, DataError> {
        let images = inputs.len().checked_div(width).unwrap_or(0);
        if images != labels.len() || images * width != inputs.len() {
            return Err(DataError::CountMismatch {
                images,
                labels: labels.len(),
            });
        }
        if let Some(&label) = labels.iter().find(|&&l| l as usize >= classes) {
            return Err(DataError::LabelOutOfRange { label, classes });
        }
        Ok(Dataset {
            inputs,
            labels,
            width,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f32] {
        &self.inputs[i * self.width..(i + 1) * self.width]
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut inputs = Vec::with_capacity(indices.len() * self.width);
        for &i in indices {
            inputs.extend_from_slice(self.input(i));
        }
        Dataset {
            inputs,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            width: self.width,
            classes: self.classes,
        }
    }

    /// Copies the rows `indices` into caller buffers (for minibatches).
    pub fn gather(&self, indices: &[usize], inputs: &mut Vec<f32>, labels: &mut Vec<u8>) {
        inputs.clear();
        labels.clear();
        for &i in indices {
            inputs.extend_from_slice(self.input(i));
            labels.push(self.labels[i]);
        }
    }

    pub fn first(&self, count: usize) -> Dataset {
        let idx: Vec<usize> = (0..count.min(self.len())).collect();
        self.subset(&idx)
    }
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>, DataError> {
    let io = |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    };
    let raw = fs::read(path).map_err(io)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out).map_err(io)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32, DataError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(DataError::Truncated {
            needed: at + 4,
            have: bytes.len(),
        })
}

/// Parses an IDX3 image file: returns `(count, rows·cols, pixels / 255)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<f32>), DataError> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(DataError::BadMagic {
            found: magic,
            expected: IDX_IMAGES_MAGIC,
        });
    }
    let count = be_u32(bytes, 4)? as usize;
    let width = be_u32(bytes, 8)? as usize * be_u32(bytes, 12)? as usize;
    let payload = &bytes[16..];
    let needed = count * width;
    if payload.len() < needed {
        return Err(DataError::Truncated {
            needed: 16 + needed,
            have: bytes.len(),
        });
    }
    let pixels = payload[..needed].iter().map(|&p| p as f32 / 255.0).collect();
    Ok((count, width, pixels))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, DataError> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(DataError::BadMagic {
            found: magic,
            expected: IDX_LABELS_MAGIC,
        });
    }
    let count = be_u32(bytes, 4)? as usize;
    bytes.get(8..8 + count).map(<[u8]>::to_vec).ok_or(DataError::Truncated {
        needed: 8 + count,
        have: bytes.len(),
    })
}

/// Loads an image/label IDX pair; either file may be gzip-compressed.
pub fn load_idx_pair(images: &Path, labels: &Path) -> Result<Dataset, DataError> {
    let (count, width, pixels) = parse_idx_images(&read_maybe_gz(images)?)?;
    let labels = parse_idx_labels(&read_maybe_gz(labels)?)?;
    if labels.len() != count {
        return Err(DataError::CountMismatch {
            images: count,
            labels: labels.len(),
        });
    }
    Dataset::new(pixels, labels, width, 10)
}

fn find_idx(dir: &Path, stem: &str) -> PathBuf {
    let gz = dir.join(format!("{stem}.gz"));
    if gz.exists() {
        gz
    } else {
        dir.join(stem)
    }
}

/// Loads `train-*` and `t10k-*` IDX files (plain or `.gz`) from a directory.
pub fn load_mnist_dir(dir: &Path) -> Result<(Dataset, Dataset), DataError> {
    let train = load_idx_pair(
        &find_idx(dir, "train-images-idx3-ubyte"),
        &find_idx(dir, "train-labels-idx1-ubyte"),
    )?;
    let test = load_idx_pair(
        &find_idx(dir, "t10k-images-idx3-ubyte"),
        &find_idx(dir, "t10k-labels-idx1-ubyte"),
    )?;
    Ok((train, test))
}

/// The 5000-image MNIST subset shipped with the crate (4000 train / 1000
/// test, class-balanced).
pub fn bundled_mnist_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join("mnist5k")
}

/// Isotropic Gaussian blobs, one per class, centred on scaled unit vectors.
pub fn gaussian_blobs(per_class: usize, classes: usize, width: usize, separation: f32, seed: u64) -> Dataset {
    let mut r = rng::stream(seed, &[0xb10b]);
    let noise = Normal::new(0.0f32, 1.0).expect("unit normal");
    let mut inputs = Vec::with_capacity(per_class * classes * width);
    let mut labels = Vec::with_capacity(per_class * classes);
    for i in 0..per_class * classes {
        let c = i % classes;
        for j in 0..width {
            let centre = if j % classes == c { separation } else { 0.0 };
            inputs.push(centre + noise.sample(&mut r));
        }
        labels.push(c as u8);
    }
    Dataset {
        inputs,
        labels,
        width,
        classes,
    }
}
