// The three initializations side by side on one dataset.

use std::error::Error;

use tensor_cluster::cluster::{hooi, hosvd_ii_fits};
use tensor_cluster::io::{synth_clusters, SynthSpec};
use tensor_cluster::metrics::accuracy;
use tensor_cluster::{fit, ClusterConfig, InitStrategy};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let spec = SynthSpec {
        k: 4,
        per_cluster: 12,
        slice_shape: vec![10, 6],
        sigma: 0.2,
        separation: 3.0,
        seed: 11,
    };
    let (ds, _) = synth_clusters(&spec)?;
    let truth = ds.labels.clone().unwrap_or_default();

    let h = hooi(&ds.tensor, &[3, 3, 4])?;
    println!("HOOI fit per sweep: {:.4?}", h.fits);
    println!("shared-factor fit per sweep: {:.4?}", hosvd_ii_fits(&ds.tensor, &[3, 3])?);

    for init in [InitStrategy::Random, InitStrategy::HosvdI, InitStrategy::HosvdII] {
        let cfg = ClusterConfig::new(4).with_core_dims(vec![3, 3]).with_init(init).with_seed(2);
        let res = fit(&ds.tensor, &cfg)?;
        println!(
            "{init:?}: AC {:.3}, final model error {:.4}",
            accuracy(&truth, &res.labels)?,
            res.factors.error_trace.last().copied().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
