//! Synthetic datasets and IDX ingestion.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::Batch;
use crate::rng::{normal, seeded};

/// Blob centre of class 0; class 1 sits at the negated point.
pub const LOGREG2D_CENTER: [f64; 2] = [1.2, 0.4];
pub const LOGREG2D_SD: f64 = 0.8;

/// Two Gaussian blobs at `+-LOGREG2D_CENTER`, linearly separable by a line
/// through the origin: points closer than `margin` to the line normal to the
/// centre direction, or on the wrong side of it, are redrawn.
pub fn logreg2d_synthetic(n: usize, margin: f64, seed: u64) -> Result<Batch> {
    if n < 2 || !(margin >= 0.0) {
        return Err(Error::Config(format!("logreg2d needs n >= 2 and margin >= 0 (got {n}, {margin})")));
    }
    let [cx, cy] = LOGREG2D_CENTER;
    let norm = cx.hypot(cy);
    let mut rng = seeded(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % 2;
        let sign = if y == 0 { 1.0 } else { -1.0 };
        loop {
            let x = [sign * cx + LOGREG2D_SD * normal(&mut rng), sign * cy + LOGREG2D_SD * normal(&mut rng)];
            if sign * (x[0] * cx + x[1] * cy) / norm >= margin {
                rows.push(x.to_vec());
                break;
            }
        }
        labels.push(y);
    }
    Batch::from_rows(&rows, labels, 2)
}

/// Two interleaving half circles with isotropic Gaussian noise.
pub fn two_moons(n: usize, noise: f64, seed: u64) -> Result<Batch> {
    if n < 2 || !(noise >= 0.0) {
        return Err(Error::Config(format!("two_moons needs n >= 2 and noise >= 0 (got {n}, {noise})")));
    }
    let mut rng = seeded(seed);
    let n_outer = n / 2;
    let n_inner = n - n_outer;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n_outer {
        let t = std::f64::consts::PI * i as f64 / (n_outer.max(2) - 1) as f64;
        rows.push(vec![t.cos(), t.sin()]);
        labels.push(0);
    }
    for i in 0..n_inner {
        let t = std::f64::consts::PI * i as f64 / (n_inner.max(2) - 1) as f64;
        rows.push(vec![1.0 - t.cos(), 0.5 - t.sin()]);
        labels.push(1);
    }
    for r in rows.iter_mut() {
        r[0] += noise * normal(&mut rng);
        r[1] += noise * normal(&mut rng);
    }
    // Interleave the classes so that prefixes and minibatches are balanced.
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let rows: Vec<Vec<f64>> = order.iter().map(|&i| rows[i].clone()).collect();
    let labels: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
    Batch::from_rows(&rows, labels, 2)
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Images as rows scaled to `[0, 1]` and their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxDataset {
    pub images: DMatrix<f64>,
    pub labels: Vec<usize>,
    pub rows: usize,
    pub cols: usize,
}

impl IdxDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Keep examples with label below `num_classes` and wrap them as a batch.
    pub fn to_batch(&self, num_classes: usize) -> Result<Batch> {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] < num_classes).collect();
        let inputs = self.images.select_rows(&keep);
        Batch::new(inputs, keep.iter().map(|&i| self.labels[i]).collect(), num_classes)
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    File::open(path)?.read_to_end(&mut raw)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..]).read_to_end(&mut out)?;
        return Ok(out);
    }
    Ok(raw)
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Parse {
            offset,
            msg: format!("header needs {} bytes, file has {}", offset + 4, bytes.len()),
        })
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let magic = be_u32(bytes, 0)?;
    if magic != expected {
        return Err(Error::Parse {
            offset: 0,
            msg: format!("magic {magic:#010x}, expected {expected:#010x}"),
        });
    }
    Ok(())
}

fn check_payload(bytes: &[u8], header: usize, len: usize) -> Result<()> {
    if bytes.len() != header + len {
        return Err(Error::Parse {
            offset: header,
            msg: format!("payload expected {len} bytes, found {}", bytes.len().saturating_sub(header)),
        });
    }
    Ok(())
}

/// Parse IDX image and label buffers.
pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<IdxDataset> {
    check_magic(images, IDX_IMAGES_MAGIC)?;
    let n = be_u32(images, 4)? as usize;
    let rows = be_u32(images, 8)? as usize;
    let cols = be_u32(images, 12)? as usize;
    check_payload(images, 16, n * rows * cols)?;
    check_magic(labels, IDX_LABELS_MAGIC)?;
    let n_labels = be_u32(labels, 4)? as usize;
    if n_labels != n {
        return Err(Error::Parse {
            offset: 4,
            msg: format!("{n_labels} labels for {n} images"),
        });
    }
    check_payload(labels, 8, n)?;
    let pixels = rows * cols;
    let images = DMatrix::from_fn(n, pixels, |i, j| images[16 + i * pixels + j] as f64 / 255.0);
    Ok(IdxDataset {
        images,
        labels: labels[8..].iter().map(|&b| b as usize).collect(),
        rows,
        cols,
    })
}

/// Read an IDX image/label pair; gzip-compressed files are detected by their magic bytes.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<IdxDataset> {
    parse_idx(&read_bytes(images_path.as_ref())?, &read_bytes(labels_path.as_ref())?)
}

/// Serialize to IDX buffers; pixel values are rounded to bytes.
pub fn encode_idx(data: &IdxDataset) -> (Vec<u8>, Vec<u8>) {
    let n = data.len();
    let mut images = Vec::with_capacity(16 + data.images.len());
    for x in [IDX_IMAGES_MAGIC, n as u32, data.rows as u32, data.cols as u32] {
        images.extend_from_slice(&x.to_be_bytes());
    }
    for i in 0..n {
        images.extend(data.images.row(i).iter().map(|&p| (p * 255.0).round().clamp(0.0, 255.0) as u8));
    }
    let mut labels = Vec::with_capacity(8 + n);
    labels.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    labels.extend_from_slice(&(n as u32).to_be_bytes());
    labels.extend(data.labels.iter().map(|&l| l as u8));
    (images, labels)
}
