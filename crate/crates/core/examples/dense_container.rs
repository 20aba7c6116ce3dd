// Saving and loading datasets in the TCLS container, plus seeded subsampling.

use std::error::Error;

use tensor_cluster::io::{dense_from_bytes, dense_to_bytes, synth_clusters, SynthSpec};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let spec = SynthSpec {
        k: 2,
        per_cluster: 5,
        slice_shape: vec![3, 4],
        sigma: 0.1,
        separation: 1.0,
        seed: 0,
    };
    let (ds, _) = synth_clusters(&spec)?;
    let bytes = dense_to_bytes(&ds);
    println!("{} samples encoded in {} bytes", ds.num_samples(), bytes.len());

    let back = dense_from_bytes(&bytes, "copy")?;
    assert_eq!(back.tensor, ds.tensor);
    assert_eq!(back.labels, ds.labels);

    let sub = ds.subsample(Some(&[1]), Some(3), 9)?;
    println!("subsample shape {:?}, labels {:?}", sub.tensor.shape(), sub.labels);
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
