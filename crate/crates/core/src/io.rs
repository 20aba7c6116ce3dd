//! Dataset containers and loaders.
//!
//! Two on-disk formats are supported:
//!
//! * IDX (the MNIST distribution format): big-endian magic
//!   `0x00 0x00 <type> <ndims>`, big-endian `u32` dimensions, then unsigned
//!   bytes. Images are scaled to `[0, 1]` and stacked along the last mode.
//! * The `TCLS` dense container: magic `TCLS`, `u16` version (1), `u16`
//!   order, `order × u64` shape, row-major `f64` payload, then an optional
//!   label block `LBLS`, `u64` count, `count × u64` labels. All integers and
//!   floats are little-endian.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::cluster::seeded_orthonormal;
use crate::error::{Error, Result};
use crate::tensor::{stack_last_mode, DenseTensor};

pub const TCLS_MAGIC: &[u8; 4] = b"TCLS";
pub const TCLS_VERSION: u16 = 1;
const LABEL_MAGIC: &[u8; 4] = b"LBLS";

/// Samples stacked along the last mode, with optional ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub tensor: DenseTensor,
    pub labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, tensor: DenseTensor, labels: Option<Vec<usize>>) -> Result<Self> {
        let m = tensor.shape()[tensor.order() - 1];
        if let Some(l) = &labels {
            if l.len() != m {
                return Err(Error::DimensionMismatch {
                    op: "dataset labels",
                    expected: m,
                    got: l.len(),
                });
            }
        }
        Ok(Self {
            name: name.into(),
            tensor,
            labels,
        })
    }

    pub fn num_samples(&self) -> usize {
        self.tensor.shape()[self.tensor.order() - 1]
    }

    /// Keeps the samples at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        let slices = indices
            .iter()
            .map(|&i| self.tensor.last_mode_slice(i))
            .collect::<Result<Vec<_>>>()?;
        let mut tensor = stack_last_mode(&slices)?;
        if self.tensor.order() == 1 {
            tensor = DenseTensor::new(vec![indices.len()], tensor.into_data())?;
        }
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        Dataset::new(self.name.clone(), tensor, labels)
    }

    /// Seeded subsample: restrict to `classes` (all when `None`) and keep at
    /// most `per_class` samples of each, in original order.
    pub fn subsample(
        &self,
        classes: Option<&[usize]>,
        per_class: Option<usize>,
        seed: u64,
    ) -> Result<Dataset> {
        let labels = self.labels.as_ref().ok_or_else(|| {
            Error::InvalidConfig("class subsampling requires labels".into())
        })?;
        let mut by_class: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for (i, &l) in labels.iter().enumerate() {
            if classes.is_none_or(|c| c.contains(&l)) {
                by_class.entry(l).or_default().push(i);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keep = Vec::new();
        for (_, mut idx) in by_class {
            if let Some(n) = per_class {
                if idx.len() > n {
                    idx.shuffle(&mut rng);
                    idx.truncate(n);
                }
            }
            keep.extend(idx);
        }
        keep.sort_unstable();
        if keep.is_empty() {
            return Err(Error::Empty("subsample"));
        }
        self.select(&keep)
    }
}

fn format_err(format: &'static str, reason: impl Into<String>) -> Error {
    Error::Format {
        format,
        reason: reason.into(),
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    format: &'static str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(format_err(
                self.format,
                format!("truncated: needed {n} bytes at offset {}", self.pos),
            ));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

fn parse_idx(bytes: &[u8]) -> Result<(Vec<usize>, &[u8])> {
    let mut r = Reader {
        buf: bytes,
        pos: 0,
        format: "IDX",
    };
    let magic = r.array::<4>()?;
    if magic[0] != 0 || magic[1] != 0 {
        return Err(format_err("IDX", "bad magic"));
    }
    if magic[2] != 0x08 {
        return Err(format_err(
            "IDX",
            format!("unsupported element type 0x{:02x} (expected unsigned byte)", magic[2]),
        ));
    }
    let ndims = magic[3] as usize;
    if ndims == 0 {
        return Err(format_err("IDX", "zero dimensions"));
    }
    let dims = (0..ndims)
        .map(|_| r.array::<4>().map(|b| u32::from_be_bytes(b) as usize))
        .collect::<Result<Vec<_>>>()?;
    let len: usize = dims.iter().product();
    let data = r.take(len)?;
    if r.remaining() != 0 {
        return Err(format_err("IDX", format!("{} trailing bytes", r.remaining())));
    }
    Ok((dims, data))
}

/// Loads an IDX image file and its label file as an `rows × cols × M` tensor.
pub fn load_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let img_bytes = fs::read(images)?;
    let lbl_bytes = fs::read(labels)?;
    idx_from_bytes(&img_bytes, &lbl_bytes, &images.display().to_string())
}

/// In-memory counterpart of [`load_idx`].
pub fn idx_from_bytes(images: &[u8], labels: &[u8], name: &str) -> Result<Dataset> {
    let (dims, pixels) = parse_idx(images)?;
    if dims.len() != 3 {
        return Err(format_err(
            "IDX",
            format!("image file must have 3 dimensions, found {}", dims.len()),
        ));
    }
    let (ldims, lbytes) = parse_idx(labels)?;
    if ldims.len() != 1 {
        return Err(format_err("IDX", "label file must have 1 dimension"));
    }
    let (m, rows, cols) = (dims[0], dims[1], dims[2]);
    if ldims[0] != m {
        return Err(format_err(
            "IDX",
            format!("{m} images but {} labels", ldims[0]),
        ));
    }
    if m == 0 || rows == 0 || cols == 0 {
        return Err(format_err("IDX", "empty image set"));
    }
    let per = rows * cols;
    let tensor = DenseTensor::from_fn(vec![rows, cols, m], |idx| {
        f64::from(pixels[idx[2] * per + idx[0] * cols + idx[1]]) / 255.0
    })?;
    let labels = lbytes.iter().map(|&b| b as usize).collect();
    Dataset::new(name, tensor, Some(labels))
}

/// Encodes `count × rows × cols` images and their labels as IDX byte streams.
pub fn idx_to_bytes(images: &[Vec<u8>], rows: usize, cols: usize, labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
    let mut img = vec![0, 0, 0x08, 3];
    for d in [images.len(), rows, cols] {
        img.extend_from_slice(&(d as u32).to_be_bytes());
    }
    for im in images {
        img.extend_from_slice(im);
    }
    let mut lbl = vec![0, 0, 0x08, 1];
    lbl.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    lbl.extend_from_slice(labels);
    (img, lbl)
}

/// Serializes a dataset in the `TCLS` container.
pub fn dense_to_bytes(ds: &Dataset) -> Vec<u8> {
    let t = &ds.tensor;
    let mut out = Vec::with_capacity(8 + 8 * t.order() + 8 * t.len());
    out.extend_from_slice(TCLS_MAGIC);
    out.extend_from_slice(&TCLS_VERSION.to_le_bytes());
    out.extend_from_slice(&(t.order() as u16).to_le_bytes());
    for &d in t.shape() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &x in t.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    if let Some(labels) = &ds.labels {
        out.extend_from_slice(LABEL_MAGIC);
        out.extend_from_slice(&(labels.len() as u64).to_le_bytes());
        for &l in labels {
            out.extend_from_slice(&(l as u64).to_le_bytes());
        }
    }
    out
}

/// Parses a `TCLS` container.
pub fn dense_from_bytes(bytes: &[u8], name: &str) -> Result<Dataset> {
    let mut r = Reader {
        buf: bytes,
        pos: 0,
        format: "TCLS",
    };
    if &r.array::<4>()? != TCLS_MAGIC {
        return Err(format_err("TCLS", "bad magic"));
    }
    let version = u16::from_le_bytes(r.array()?);
    if version != TCLS_VERSION {
        return Err(format_err("TCLS", format!("unsupported version {version}")));
    }
    let order = u16::from_le_bytes(r.array()?) as usize;
    if order == 0 {
        return Err(format_err("TCLS", "empty shape"));
    }
    let shape = (0..order)
        .map(|_| r.array::<8>().map(|b| u64::from_le_bytes(b) as usize))
        .collect::<Result<Vec<_>>>()?;
    if shape.contains(&0) {
        return Err(format_err("TCLS", format!("zero extent in shape {shape:?}")));
    }
    let len = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .filter(|&n| n.checked_mul(8).is_some_and(|b| b <= r.remaining()))
        .ok_or_else(|| format_err("TCLS", format!("payload shorter than shape {shape:?} requires")))?;
    let data = (0..len)
        .map(|_| r.array::<8>().map(f64::from_le_bytes))
        .collect::<Result<Vec<_>>>()?;
    let labels = if r.remaining() == 0 {
        None
    } else {
        if &r.array::<4>()? != LABEL_MAGIC {
            return Err(format_err("TCLS", "unexpected bytes after payload"));
        }
        let count = u64::from_le_bytes(r.array()?) as usize;
        if count != shape[order - 1] {
            return Err(format_err(
                "TCLS",
                format!("{count} labels for {} samples", shape[order - 1]),
            ));
        }
        let labels = (0..count)
            .map(|_| r.array::<8>().map(|b| u64::from_le_bytes(b) as usize))
            .collect::<Result<Vec<_>>>()?;
        if r.remaining() != 0 {
            return Err(format_err("TCLS", "trailing bytes after labels"));
        }
        Some(labels)
    };
    Dataset::new(name, DenseTensor::new(shape, data)?, labels)
}

pub fn save_dense(path: &Path, ds: &Dataset) -> Result<()> {
    fs::write(path, dense_to_bytes(ds))?;
    Ok(())
}

pub fn load_dense(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    dense_from_bytes(&bytes, &name)
}

/// Parameters of [`synth_clusters`].
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthSpec {
    pub k: usize,
    pub per_cluster: usize,
    pub slice_shape: Vec<usize>,
    /// Standard deviation of the per-entry Gaussian noise.
    pub sigma: f64,
    /// Minimum pairwise Frobenius distance between centroids.
    pub separation: f64,
    pub seed: u64,
}

pub const SYNTH_MAX_ATTEMPTS: usize = 1000;

/// Random centroid with multilinear rank at most 3 and Frobenius norm `scale`.
fn low_rank_centroid(shape: &[usize], scale: f64, rng: &mut ChaCha8Rng) -> Result<DenseTensor> {
    let ranks: Vec<usize> = shape.iter().map(|&i| i.min(3)).collect();
    let mut core = DenseTensor::from_fn(ranks.clone(), |_| StandardNormal.sample(rng))?;
    for (mode, (&i, &r)) in shape.iter().zip(&ranks).enumerate() {
        let u = seeded_orthonormal(i, r, rng.random());
        core = core.mode_n_product(&u, mode)?;
    }
    let norm = core.frob_norm();
    Ok(core.scale(scale / norm.max(1e-300)))
}

/// Generates `K` well-separated low-rank centroids and `per_cluster` noisy
/// copies of each, stacked along a new last mode in cluster order.
///
/// Returns the dataset and the centroids.
pub fn synth_clusters(spec: &SynthSpec) -> Result<(Dataset, Vec<DenseTensor>)> {
    if spec.k == 0 || spec.per_cluster == 0 {
        return Err(Error::InvalidConfig("k and per_cluster must be >= 1".into()));
    }
    if !(spec.sigma >= 0.0) || !(spec.separation >= 0.0) || !spec.sigma.is_finite() {
        return Err(Error::InvalidConfig("sigma and separation must be >= 0".into()));
    }
    if spec.slice_shape.is_empty() || spec.slice_shape.contains(&0) {
        return Err(Error::InvalidShape(spec.slice_shape.clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // Norm chosen so that independent centroids sit about √2·scale apart.
    let scale = spec.separation.max(1.0);
    let mut centroids: Vec<DenseTensor> = Vec::with_capacity(spec.k);
    let mut attempts = 0;
    while centroids.len() < spec.k {
        if attempts == SYNTH_MAX_ATTEMPTS {
            return Err(Error::InfeasibleSeparation {
                k: spec.k,
                separation: spec.separation,
                attempts,
            });
        }
        attempts += 1;
        let c = low_rank_centroid(&spec.slice_shape, scale, &mut rng)?;
        let far_enough = centroids
            .iter()
            .all(|o| o.sub(&c).map(|d| d.frob_norm() >= spec.separation).unwrap_or(false));
        if far_enough {
            centroids.push(c);
        }
    }
    let noise = Normal::new(0.0, spec.sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut slices = Vec::with_capacity(spec.k * spec.per_cluster);
    let mut labels = Vec::with_capacity(spec.k * spec.per_cluster);
    for (k, c) in centroids.iter().enumerate() {
        for _ in 0..spec.per_cluster {
            let data = c
                .data()
                .iter()
                .map(|&v| {
                    if spec.sigma == 0.0 {
                        v
                    } else {
                        v + noise.sample(&mut rng)
                    }
                })
                .collect();
            slices.push(DenseTensor::new(c.shape().to_vec(), data)?);
            labels.push(k);
        }
    }
    let ds = Dataset::new("synthetic", stack_last_mode(&slices)?, Some(labels))?;
    Ok((ds, centroids))
}
