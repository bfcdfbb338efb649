//! Global vs. reduced-memory local storage: bitwise-identical posteriors,
//! very different gamma footprints.
//!
//! Run with: cargo run --example local_vs_global

use driftdec::channel::{frame_rng, setup_rng, transmit, ChannelParams, StateSpace};
use driftdec::codebook::{Codebook, Message};
use driftdec::decoder::{decode_global, decode_local, DecodeOptions, Engine, Priors, StorageMode};
use driftdec::numeric::Precision;
use driftdec::planner::estimate_memory;

fn main() -> driftdec::Result<()> {
    let params = ChannelParams::new(0.01, 0.01, 0.0)?;
    let (msg_len, word_len, alphabet) = (60, 8, 16);
    let cb = Codebook::random(msg_len, word_len, alphabet, &mut setup_rng(3))?;
    let space = StateSpace::for_code(word_len, cb.frame_len(), &params, 1e-10)?;

    for mode in [StorageMode::Global, StorageMode::Local] {
        let est = estimate_memory(msg_len, alphabet, &space, mode, Precision::Double, 4);
        println!("{mode:?}: gamma {} KiB, total {} KiB", est.gamma / 1024, est.total / 1024);
    }

    let mut rng = frame_rng(3, 0);
    let msg = Message::random(msg_len, alphabet, &mut rng);
    let frame = cb.encode(&msg)?;
    let received = loop {
        let r = transmit(&frame, &params, &mut rng);
        if space.frame.contains(r.len() as i64 - frame.len() as i64) {
            break r;
        }
    };

    let priors = Priors::uniform(msg_len, alphabet);
    let opts = DecodeOptions { engine: Engine::Parallel { workers: 4 }, ..DecodeOptions::default() };
    let g = decode_global(&received, &cb, &priors, &space, &params, opts)?;
    let l = decode_local(&received, &cb, &priors, &space, &params, opts)?;

    let identical = (0..msg_len).all(|i| g.posteriors.row(i) == l.posteriors.row(i));
    println!("posteriors bitwise identical: {identical}");
    println!("global kept {} gamma slabs; local ring ended with {}", g.store.gamma.len(), l.store.gamma.len());
    println!(
        "gamma recomputation cost: global {:?}, local {:?} (computed twice per index)",
        g.timings.gamma, l.timings.gamma
    );
    Ok(())
}
