//! Channel model basics: pass bits through the channel, look at the drift
//! distribution, and size a state space from an exclusion probability.
//!
//! Run with: cargo run --example channel_basics

use driftdec::channel::{compute_state_limits, drift_pmf, setup_rng, transmit, ChannelParams};
use driftdec::bits;

fn main() -> driftdec::Result<()> {
    let params = ChannelParams::new(0.05, 0.05, 0.01)?;
    let mut rng = setup_rng(42);

    let input = bits::from_str("1011001110001101").expect("literal bits");
    println!("input    : {}", bits::to_string(&input));
    for _ in 0..3 {
        let received = transmit(&input, &params, &mut rng);
        println!(
            "received : {} (drift {:+})",
            bits::to_string(&received),
            received.len() as i64 - input.len() as i64
        );
    }

    let t = 100;
    let pmf = drift_pmf(t, &params, params.insertion_k_max())?;
    let (lo, hi) = pmf.support();
    println!("\ndrift after {t} bits: support [{lo}, {hi}], total mass {:.12}", pmf.total_mass());
    for m in -6..=6 {
        println!("  P(S = {m:+}) = {:.3e}", pmf.prob(m));
    }

    for pr in [1e-4, 1e-8, 1e-12] {
        let b = compute_state_limits(t, &params, pr)?;
        println!("exclusion {pr:>5.0e}: drift bounds [{}, {}] ({} states)", b.m_minus(), b.m_plus(), b.size());
    }
    Ok(())
}
