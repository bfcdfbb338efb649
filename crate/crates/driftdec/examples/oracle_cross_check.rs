//! Cross-check the optimized lattice and decoder against the brute-force
//! enumeration oracles.
//!
//! Run with: cargo run --example oracle_cross_check

use driftdec::channel::ChannelParams;
use driftdec::lattice::receiver;
use driftdec::oracle::receiver_bruteforce;
use driftdec::sim::oracle_check;

fn main() -> driftdec::Result<()> {
    // A single case in detail: the lattice recursion and the explicit
    // event-sequence enumeration must agree.
    let params = ChannelParams::new(0.1, 0.1, 0.0)?;
    let (x, y) = ([0u8], [0u8]);
    let fast = receiver(&y, &x, &params);
    let slow = receiver_bruteforce(&y, &x, &params, 40)?;
    println!("R(y=0 | x=0) lattice = {fast:.15}, enumeration = {slow:.15}");

    // The full built-in suite (also available as `driftdec oracle-check`).
    let report = oracle_check(0)?;
    println!(
        "receiver: {} cases, max relative error {:.3e}",
        report.receiver_cases, report.receiver_max_rel_err
    );
    println!(
        "posterior: {} cases, max absolute error {:.3e}",
        report.posterior_cases, report.posterior_max_abs_err
    );
    println!("pass: {}", report.pass);
    Ok(())
}
