// Tangent projection, Fisher metric and retraction on row-stochastic matrices.

use std::error::Error;

use tensor_cluster::manifold::{metric, project, random_point, retract};
use tensor_cluster::Matrix;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let u = random_point(4, 3, 7);
    println!("point:{}", u.matrix());

    let z = Matrix::from_fn(4, 3, |i, j| (i as f64 - j as f64) * 0.3);
    let xi = project(&u, &z)?;
    let row_sums: Vec<String> = xi.matrix().row_iter().map(|r| format!("{:.1e}", r.sum())).collect();
    println!("projected row sums: {}", row_sums.join(" "));
    println!("‖ξ‖² under the Fisher metric: {:.6}", metric(&u, &xi, &xi)?);

    for t in [0.0, 0.5, 5.0, 500.0] {
        let v = retract(&u, &xi, t)?;
        let worst = v
            .matrix()
            .row_iter()
            .map(|r| (r.sum() - 1.0).abs())
            .fold(0.0, f64::max);
        println!("t = {t:>5}: row-sum error {worst:.1e}, labels {:?}", v.argmax_rows());
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
