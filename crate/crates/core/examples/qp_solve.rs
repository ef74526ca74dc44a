//! Solves a small inequality-constrained QP with the active-set solver and
//! checks it against brute-force enumeration of active sets.

use nalgebra::{DMatrix, DVector};
use quadpcac::qp::{solve, QpProblem};
use quadpcac::verify::enumerate_active_sets;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // min ½‖w‖² − w₁ − 2w₂ − w₃  s.t.  w₁ + w₂ + w₃ ≤ 1,  w ≥ 0,  w₂ ≤ 0.6
    let h = DMatrix::identity(3, 3);
    let c = DVector::from_vec(vec![-1.0, -2.0, -1.0]);
    let g = DMatrix::from_row_slice(
        5,
        3,
        &[1.0, 1.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0],
    );
    let b = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0, 0.6]);
    let problem = QpProblem::new(h, c, g, b);

    let sol = solve(&problem)?;
    println!("status {:?} after {} iterations", sol.status, sol.iterations);
    println!("w = {:.6}", sol.w.transpose());
    println!("active rows {:?}, duals {:.4}", sol.active_set, sol.duals.transpose());
    println!("KKT residual {:.2e}", sol.kkt_residual);
    if let Some(reference) = enumerate_active_sets(&problem) {
        println!("enumeration objective gap {:.2e}", (reference.objective - sol.objective).abs());
    }
    Ok(())
}
