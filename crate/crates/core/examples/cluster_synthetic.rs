// Full pipeline on generated data: fit, score and inspect the centroids.

use std::error::Error;

use tensor_cluster::io::{synth_clusters, SynthSpec};
use tensor_cluster::metrics::{accuracy, nmi};
use tensor_cluster::{fit, ClusterConfig};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let spec = SynthSpec {
        k: 3,
        per_cluster: 30,
        slice_shape: vec![8, 8],
        sigma: 0.5,
        separation: 10.0,
        seed: 3,
    };
    let (ds, centers) = synth_clusters(&spec)?;
    let truth = ds.labels.clone().unwrap_or_default();

    let cfg = ClusterConfig::new(3).with_core_dims(vec![4, 4]).with_seed(3);
    let res = fit(&ds.tensor, &cfg)?;
    println!(
        "AC {:.3}  NMI {:.3}  after {} outer iterations",
        accuracy(&truth, &res.labels)?,
        nmi(&truth, &res.labels)?,
        res.diagnostics.len()
    );
    if let (Some(first), Some(last)) = (res.factors.error_trace.first(), res.factors.error_trace.last()) {
        println!("model error {first:.4} -> {last:.4}");
    }
    for (k, c) in res.centroids.iter().enumerate() {
        let nearest = centers
            .iter()
            .map(|t| c.sub(t).map(|d| d.frob_norm()))
            .collect::<Result<Vec<_>, _>>()?;
        println!("centroid {k}: distances to generating centers {nearest:.2?}");
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
