//! Abrupt mass change at t = 10 s and the forgetting response it triggers.
//!
//! `cargo run --release --example example2_mass_change -- 0.2`

use std::path::Path;

use quadpcac::sim::{emit_outputs, run_scenario, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gamma: f64 = std::env::args().nth(1).map_or(Ok(0.2), |a| a.parse())?;
    let scenario = Scenario::example2(gamma);
    let trace = run_scenario(&scenario)?;

    for (label, start, end) in [("before", 5.0, 9.5), ("at the change", 9.5, 11.5), ("after", 16.0, 25.0)] {
        let lambda = trace.window(start, end).map(|r| r.lambda).fold(1.0, f64::min);
        let rms = trace.rms_tracking_error(start, end);
        println!(
            "{label:>14} [{start}, {end}] s: min lambda {lambda:.3}, RMS [{:.3}, {:.3}, {:.3}] m",
            rms[0], rms[1], rms[2]
        );
    }
    for path in emit_outputs(&trace, &scenario, Path::new("out"), true)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
