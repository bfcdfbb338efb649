//! Execution planning against a device model: mode choice, tile sizes,
//! occupancy and usage.
//!
//! Run with: cargo run --example plan_device

use driftdec::channel::{ChannelParams, StateSpace};
use driftdec::decoder::StorageMode;
use driftdec::numeric::Precision;
use driftdec::planner::{
    choose_mode, estimate_memory, occupancy, plan_tiles, usage, DeviceModel, Phase, RealWidths,
};

fn main() -> driftdec::Result<()> {
    let dev = DeviceModel::parse(&std::fs::read_to_string("devices/sample-gpu.txt")?)?;
    println!("device: {} SMs, warp {}, {} KiB shared/SM", dev.n_sm, dev.warp_size, dev.shared_mem_per_sm / 1024);

    let params = ChannelParams::new(1e-3, 1e-3, 0.0)?;
    let (msg_len, word_len, alphabet) = (210, 10, 32);
    let space = StateSpace::for_code(word_len, msg_len * word_len, &params, 1e-10)?;

    let global = estimate_memory(msg_len, alphabet, &space, StorageMode::Global, Precision::Double, 4);
    let mode = choose_mode(global.total, dev.memory_budget);
    println!("global storage needs {} MiB -> {mode:?} mode", global.total >> 20);

    let plan = plan_tiles(&dev, msg_len, word_len, alphabet, &space, mode, RealWidths::default(), 4)?;
    println!(
        "gamma tile {}x{} (grid {}x{}), alpha/beta tile {}x{} (grid {}), posterior tile {} (grid {})",
        plan.bx_gamma,
        plan.by_gamma,
        plan.msg_len,
        plan.gy_gamma,
        plan.bx_alpha_beta,
        plan.by_alpha_beta,
        plan.gx_alpha_beta,
        plan.bx_posterior,
        plan.gy_posterior
    );
    for phase in [Phase::Gamma, Phase::AlphaBeta, Phase::Posterior] {
        println!(
            "  {phase:?}: {} B shared memory per tile, occupancy {:.2}",
            plan.shared_mem(phase),
            occupancy(&plan, &dev, phase)
        );
    }
    println!(
        "usage: gamma {:.2}, alpha/beta (concurrent halves) {:.2}",
        usage(plan.msg_len * plan.gy_gamma, dev.n_sm, 1.0),
        usage(plan.gx_alpha_beta, dev.n_sm, 0.5)
    );
    println!("worker pool: {} workers", plan.worker_count);
    Ok(())
}
