//! Drives the controller directly against the discrete linear model, without
//! the scenario machinery: a 1 m climb with a shorter horizon. Inputs are
//! deviations from hover thrust, applied one sample after they are computed.

use quadpcac::linear_model::LinearHoverModel;
use quadpcac::{PcacConfig, PcacController, Vector12, VehicleParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = VehicleParams::reference_quadrotor();
    let model = LinearHoverModel::new(&params, 0.1);
    let mut config = PcacConfig::reference(params.hover_thrust());
    config.horizon = 6;
    let horizon = config.horizon;
    let mut ctrl = PcacController::new(config, model.ad)?;

    let mut target = Vector12::zeros();
    target[2] = 1.0;
    let refs = vec![target; horizon];
    let theta = model.true_theta();
    let mut y = Vector12::zeros();
    for k in 0..40 {
        let u_held = ctrl.state().u_current;
        let out = ctrl.compute_control(&y, &refs, &theta)?;
        y = model.ad * y + model.bd * u_held;
        if k % 5 == 4 {
            println!("t = {:.1} s  p3 = {:.4}  thrust = {:.3} N", 0.1 * (k + 1) as f64, y[2], out.applied.thrust());
        }
    }
    Ok(())
}
