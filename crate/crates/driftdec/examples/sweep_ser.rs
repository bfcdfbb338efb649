//! Small Monte Carlo sweep: symbol error rate vs. channel noise with
//! Wilson 95% intervals.
//!
//! Run with: cargo run --example sweep_ser

use driftdec::sim::{run_sweep, sweep_csv, EngineChoice, RunConfig, SimContext};

fn main() -> driftdec::Result<()> {
    let cfg = RunConfig {
        msg_len: 30,
        word_len: 8,
        alphabet: 16,
        frames: 40,
        seed: 11,
        engine: EngineChoice::Parallel,
        ..RunConfig::default()
    };
    let ctx = SimContext::prepare(cfg)?;
    let table = run_sweep(&ctx, &[0.001, 0.01, 0.03])?;
    print!("{}", sweep_csv(&table));
    for point in &table {
        println!(
            "p = {:<5}: SER {:.2e} in [{:.2e}, {:.2e}] ({} rejections)",
            point.p, point.ser, point.ser_lo, point.ser_hi, point.rejections
        );
    }
    Ok(())
}
