//! MNIST ingestion in the big-endian IDX layout.

use ndarray::Array2;
use std::io::Read;
use std::path::{Path, PathBuf};

pub const IMAGE_MAGIC: u32 = 2051;
pub const LABEL_MAGIC: u32 = 2049;
pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
pub const NUM_CLASSES: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad magic number {found} (expected {expected})")]
    WrongMagic { path: PathBuf, expected: u32, found: u32 },
    #[error("{path}: truncated file")]
    Truncated { path: PathBuf },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("{path}: unexpected image shape {rows}x{cols} (expected 28x28)")]
    BadShape { path: PathBuf, rows: usize, cols: usize },
    #[error("{path}: label {label} out of range")]
    BadLabel { path: PathBuf, label: u8 },
    #[error("dataset is empty")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Immutable labeled image set; pixels normalized to [0, 1].
#[derive(Debug, Clone)]
pub struct Dataset {
    pub images: Array2<f64>,
    pub labels: Vec<u8>,
    pub split: Split,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// First `n` samples, used for ADC calibration batches.
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            images: self.images.slice(ndarray::s![..n, ..]).to_owned(),
            labels: self.labels[..n].to_vec(),
            split: self.split,
        }
    }
}

fn read_u32_be(reader: &mut impl Read, path: &Path) -> Result<u32, DataError> {
    let mut buf = [0u8; 4];
    reader.read_exact(&mut buf).map_err(|_| DataError::Truncated {
        path: path.to_path_buf(),
    })?;
    Ok(u32::from_be_bytes(buf))
}

/// Parse an IDX image/label file pair into a normalized dataset.
pub fn load_mnist_idx(
    images_path: &Path,
    labels_path: &Path,
    split: Split,
) -> Result<Dataset, DataError> {
    let open = |path: &Path| {
        std::fs::File::open(path)
            .map(std::io::BufReader::new)
            .map_err(|source| DataError::Io {
                path: path.to_path_buf(),
                source,
            })
    };

    let mut img = open(images_path)?;
    let magic = read_u32_be(&mut img, images_path)?;
    if magic != IMAGE_MAGIC {
        return Err(DataError::WrongMagic {
            path: images_path.to_path_buf(),
            expected: IMAGE_MAGIC,
            found: magic,
        });
    }
    let n_images = read_u32_be(&mut img, images_path)? as usize;
    let rows = read_u32_be(&mut img, images_path)? as usize;
    let cols = read_u32_be(&mut img, images_path)? as usize;
    if rows != IMAGE_SIDE || cols != IMAGE_SIDE {
        return Err(DataError::BadShape {
            path: images_path.to_path_buf(),
            rows,
            cols,
        });
    }
    let mut pixel_bytes = vec![0u8; n_images * IMAGE_PIXELS];
    img.read_exact(&mut pixel_bytes).map_err(|_| DataError::Truncated {
        path: images_path.to_path_buf(),
    })?;

    let mut lbl = open(labels_path)?;
    let magic = read_u32_be(&mut lbl, labels_path)?;
    if magic != LABEL_MAGIC {
        return Err(DataError::WrongMagic {
            path: labels_path.to_path_buf(),
            expected: LABEL_MAGIC,
            found: magic,
        });
    }
    let n_labels = read_u32_be(&mut lbl, labels_path)? as usize;
    if n_labels != n_images {
        return Err(DataError::CountMismatch {
            images: n_images,
            labels: n_labels,
        });
    }
    let mut labels = vec![0u8; n_labels];
    lbl.read_exact(&mut labels).map_err(|_| DataError::Truncated {
        path: labels_path.to_path_buf(),
    })?;
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= NUM_CLASSES) {
        return Err(DataError::BadLabel {
            path: labels_path.to_path_buf(),
            label: bad,
        });
    }
    if n_images == 0 {
        return Err(DataError::Empty);
    }

    let images = Array2::from_shape_vec(
        (n_images, IMAGE_PIXELS),
        pixel_bytes.iter().map(|&b| b as f64 / 255.0).collect(),
    )
    .expect("shape checked above");

    Ok(Dataset { images, labels, split })
}

/// Canonical file names inside an MNIST directory.
pub fn mnist_paths(dir: &Path) -> [(PathBuf, PathBuf, Split); 2] {
    [
        (
            dir.join("train-images-idx3-ubyte"),
            dir.join("train-labels-idx1-ubyte"),
            Split::Train,
        ),
        (
            dir.join("t10k-images-idx3-ubyte"),
            dir.join("t10k-labels-idx1-ubyte"),
            Split::Test,
        ),
    ]
}

/// Load the train and test splits from a directory laid out with the
/// canonical MNIST file names.
pub fn load_mnist_dir(dir: &Path) -> Result<(Dataset, Dataset), DataError> {
    let [(ti, tl, ts), (vi, vl, vs)] = mnist_paths(dir);
    Ok((
        load_mnist_idx(&ti, &tl, ts)?,
        load_mnist_idx(&vi, &vl, vs)?,
    ))
}
