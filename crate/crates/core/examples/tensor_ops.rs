// Mode products, unfoldings and the Kronecker identity that links them.

use std::error::Error;

use tensor_cluster::tensor::{kron, stack_last_mode};
use tensor_cluster::{DenseTensor, Matrix};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let x = DenseTensor::from_fn(vec![2, 2, 2], |idx| (idx[0] * 4 + idx[1] * 2 + idx[2] + 1) as f64)?;
    println!("mode-1 unfolding of 1..8:\n{}", x.matricize(0)?);

    let u = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
    let summed = x.mode_n_product(&u, 0)?;
    println!("summing mode 1 gives shape {:?}", summed.shape());

    // X ×₁ A ×₂ B unfolded on mode 3 equals X_(3) (B ⊗ A)ᵀ.
    let a = Matrix::from_fn(3, 2, |i, j| (i + 2 * j) as f64 * 0.5);
    let b = Matrix::from_fn(2, 2, |i, j| if i == j { 2.0 } else { -1.0 });
    let y = x.multi_mode_project(&[(0, &a), (1, &b)])?;
    let lhs = y.matricize(2)?;
    let rhs = x.matricize(2)? * kron(&b, &a).transpose();
    let gap = (lhs - rhs).abs().max();
    println!("unfolding identity gap: {gap:e}");
    assert!(gap < 1e-12);

    let slices = [x.last_mode_slice(0)?, x.last_mode_slice(1)?];
    assert_eq!(stack_last_mode(&slices)?, x);
    println!("‖X‖ = {:.4}", x.frob_norm());
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
