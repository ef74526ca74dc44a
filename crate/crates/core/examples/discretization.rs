//! Hover linearization, its exact zero-order hold, and the twelve input
//! parameters that identification has to recover.

use quadpcac::linear_model::{build_continuous, controllability_rank, LinearHoverModel};
use quadpcac::verify::check_discretization;
use quadpcac::VehicleParams;

fn main() {
    let params = VehicleParams::reference_quadrotor();
    let ts = 0.1;
    let (a, b) = build_continuous(&params);
    let model = LinearHoverModel::new(&params, ts);

    println!("controllability rank: {}", controllability_rank(&a, &b));
    println!("ZOH vs quadrature, max abs: {:.2e}", check_discretization(&params, ts));
    println!("true theta:");
    for (i, v) in model.true_theta().0.iter().enumerate() {
        println!("  th{:<2} = {v:.6e}", i + 1);
    }
    println!("Ad:\n{:.4}", model.ad);
}
