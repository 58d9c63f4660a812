//! Small reproducible Monte Carlo sweep over grid size and iteration count.

use doa_refine::sim::{monte_carlo, SweepConfig};

fn main() -> doa_refine::Result<()> {
    let config = SweepConfig::from_json(
        r#"{"grid_sizes": [100, 1000], "iters": [0, 10, 30], "snr_db": [10, 20], "trials": 20, "seed": 1}"#,
    )?;
    let result = monte_carlo(&config)?;
    println!("{:<6} {:>5} {:>4} {:>10} {:>12}", "snr", "grid", "T", "median deg", "median ms");
    for c in &result.summary {
        println!(
            "{:<6} {:>5} {:>4} {:>10.3} {:>12.3}",
            c.snr_db,
            c.grid_size,
            c.iters,
            c.median_error_deg,
            c.median_runtime_s * 1e3
        );
    }
    Ok(())
}
