// Riemannian trust-region on the membership objective of a small matrix
// with two obvious row groups.

use std::error::Error;

use tensor_cluster::cluster::kmeans;
use tensor_cluster::manifold::{random_point, Multinomial};
use tensor_cluster::objective::ObjectiveInstance;
use tensor_cluster::rtr::{solve, TrustRegionConfig};
use tensor_cluster::Matrix;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let b = Matrix::from_fn(8, 3, |i, j| {
        let base = if i < 4 { [3.0, 0.0, 1.0] } else { [-1.0, 2.0, 0.0] };
        base[j] + 0.01 * ((i * 7 + j * 3) % 5) as f64
    });
    let objective = ObjectiveInstance::new(b)?;
    let cfg = TrustRegionConfig::for_shape(8, 2).with_max_outer(200);
    let (u, stats) = solve(&Multinomial, &objective, random_point(8, 2, 1), &cfg)?;

    println!(
        "{:?} after {} iterations ({} inner), cost {:.6}, ‖grad‖ {:.1e}",
        stats.termination,
        stats.outer_iterations,
        stats.inner_iterations,
        stats.final_cost(),
        stats.final_grad_norm()
    );
    println!("membership:{}", u.matrix());
    println!("k-means on rows: {:?}", kmeans(u.matrix(), 2, 0)?);
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
