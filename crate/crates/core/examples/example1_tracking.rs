//! Periodic trajectory tracking from a broadcast initial estimate.
//!
//! `cargo run --release --example example1_tracking -- 1e3` writes the trace
//! and plots to `out/`.

use std::path::Path;

use quadpcac::sim::{emit_outputs, run_scenario, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let theta_bar: f64 = std::env::args().nth(1).map_or(Ok(1e-3), |a| a.parse())?;
    let scenario = Scenario::example1(theta_bar);
    let trace = run_scenario(&scenario)?;

    let rms = trace.rms_tracking_error(15.0, 30.0);
    println!("RMS tracking error on [15, 30] s: [{:.3}, {:.3}, {:.3}] m", rms[0], rms[1], rms[2]);
    let last = trace.records.last().expect("nonempty");
    println!("final torque-channel estimates: {:.4?}", &last.theta.0.as_slice()[9..]);
    for path in emit_outputs(&trace, &scenario, Path::new("out"), true)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
