//! Open-loop response of the nonlinear plant to a brief torque pulse about
//! the second body axis, followed by hover thrust and zero torque.

use nalgebra::Vector3;
use quadpcac::dynamics::{integrate_step, Input4, State12, VehicleParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = VehicleParams::reference_quadrotor();
    let hover = Input4::hover(&params);
    let pulse = Input4::new(params.hover_thrust(), Vector3::new(0.0, 0.02, 0.0));

    let mut x = State12::zeros();
    println!("{:>5} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}", "t", "p1", "p2", "p3", "psi", "phi", "theta");
    for k in 0..20 {
        let u = if k < 2 { pulse } else { hover };
        x = integrate_step(&x, &u, &params, 0.1)?;
        let (p, xi) = (x.p(), x.xi());
        println!(
            "{:5.1} {:9.4} {:9.4} {:9.4} {:9.4} {:9.4} {:9.4}",
            0.1 * (k + 1) as f64,
            p[0],
            p[1],
            p[2],
            xi[0],
            xi[1],
            xi[2]
        );
    }
    Ok(())
}
