// Digits 0, 1 and 2 from MNIST, 100 images each, core 12×12.
//
// Reads the IDX files from `TCLUSTER_MNIST_DIR`; without it a tiny in-memory
// IDX pair stands in so the loader path still runs.

use std::error::Error;
use std::path::PathBuf;

use tensor_cluster::io::{idx_from_bytes, idx_to_bytes, load_idx, Dataset};
use tensor_cluster::metrics::{accuracy, nmi};
use tensor_cluster::{fit, ClusterConfig};

fn load() -> Result<(Dataset, Vec<usize>), Box<dyn Error>> {
    if let Some(dir) = std::env::var_os("TCLUSTER_MNIST_DIR").map(PathBuf::from) {
        let ds = load_idx(
            &dir.join("train-images-idx3-ubyte"),
            &dir.join("train-labels-idx1-ubyte"),
        )?;
        return Ok((ds, vec![12, 12]));
    }
    println!("TCLUSTER_MNIST_DIR not set; using a synthetic 8x8 stand-in");
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for i in 0..60u8 {
        let class = i % 3;
        let img: Vec<u8> = (0..64u8)
            .map(|p| {
                let on = match class {
                    0 => p % 8 < 3,
                    1 => p / 8 < 3,
                    _ => (p % 8 + p / 8) % 4 == 0,
                };
                if on { 200 + (i % 50) } else { i % 7 }
            })
            .collect();
        images.push(img);
        labels.push(class);
    }
    let (img, lbl) = idx_to_bytes(&images, 8, 8, &labels);
    Ok((idx_from_bytes(&img, &lbl, "stand-in")?, vec![4, 4]))
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let (full, core) = load()?;
    let ds = full.subsample(Some(&[0, 1, 2]), Some(100), 0)?;
    let truth = ds.labels.clone().unwrap_or_default();
    let res = fit(&ds.tensor, &ClusterConfig::new(3).with_core_dims(core))?;
    println!(
        "{} images: AC {:.4}, NMI {:.4}",
        truth.len(),
        accuracy(&truth, &res.labels)?,
        nmi(&truth, &res.labels)?
    );
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
