//! Sweeps the mass ratio of the shipped mass-change scenario in parallel.

use quadpcac::sim::sweep;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/example2.toml"))?;
    let values: Vec<String> = ["0.8", "0.6", "0.4", "0.2"].map(String::from).to_vec();
    for (value, result) in sweep(&base, "events.0.mass_scale", &values) {
        match result {
            Ok((_, trace)) => {
                let rms = trace.rms_tracking_error(16.0, 25.0);
                let lambda = trace.records.iter().map(|r| r.lambda).fold(1.0, f64::min);
                println!("gamma {value}: min lambda {lambda:.3}, RMS [{:.3}, {:.3}, {:.3}] m", rms[0], rms[1], rms[2]);
            }
            Err(e) => println!("gamma {value}: {e}"),
        }
    }
    Ok(())
}
