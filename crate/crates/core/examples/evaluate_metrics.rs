// Accuracy under the best label matching, NMI, and the assignment solver.

use std::error::Error;

use tensor_cluster::metrics::{accuracy, kuhn_munkres, nmi};
use tensor_cluster::Matrix;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let truth = [0, 0, 1, 1, 2, 2];
    let pred = [1, 1, 0, 2, 2, 2];
    println!("AC  = {:.4}", accuracy(&truth, &pred)?);
    println!("NMI = {:.4}", nmi(&truth, &pred)?);

    let cost = Matrix::from_row_slice(3, 3, &[4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0]);
    let a = kuhn_munkres(&cost)?;
    println!("assignment {:?} with cost {}", a.row_to_col, a.cost);
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
