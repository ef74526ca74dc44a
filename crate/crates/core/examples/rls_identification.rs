//! Open-loop identification of the input parameters from random excitation
//! of the discrete hover model. The mass halves at step 60.

use nalgebra::Vector4;
use quadpcac::linear_model::{assemble_bd, LinearHoverModel, ThetaVec};
use quadpcac::rls::{RlsState, VrfConfig};
use quadpcac::{Vector12, VehicleParams};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = VehicleParams::reference_quadrotor();
    let ts = 0.1;
    let before = LinearHoverModel::new(&params, ts);
    let after = LinearHoverModel::new(&params.with_mass(0.5 * params.mass), ts);

    let vrf = VrfConfig::new(0.99, 5, 25)?.with_significance(0.05)?;
    let mut rls = RlsState::with_scaled_identity(ThetaVec::broadcast(1e-3), 1e6, &vrf)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    let mut y = Vector12::zeros();
    let mut lambda_min = 1.0_f64;
    for k in 0..120 {
        let truth = if k < 60 { &before } else { &after };
        let u = Vector4::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let y_next = truth.ad * y + assemble_bd(&truth.true_theta()) * u;
        let info = rls.step(&y_next, &y, &u, &truth.ad, &vrf)?;
        y = y_next;
        lambda_min = lambda_min.min(info.lambda);
        if k % 10 == 9 {
            let err = (rls.theta.0 - truth.true_theta().0).amax();
            println!("k = {:3}  min lambda = {lambda_min:.3}  max |theta error| = {err:.3e}", k + 1);
            lambda_min = 1.0;
        }
    }
    Ok(())
}
