//! End-to-end round trip: random codebook, encode, noisy channel, MAP
//! decode, posterior inspection.
//!
//! Run with: cargo run --example encode_decode

use driftdec::channel::{frame_rng, setup_rng, transmit, ChannelParams, StateSpace};
use driftdec::codebook::{Codebook, Message};
use driftdec::decoder::{decode, DecodeOptions, Priors};

fn main() -> driftdec::Result<()> {
    let params = ChannelParams::new(0.004, 0.004, 0.001)?;
    let (msg_len, word_len, alphabet) = (40, 8, 16);

    let cb = Codebook::random(msg_len, word_len, alphabet, &mut setup_rng(7))?;
    let space = StateSpace::for_code(word_len, cb.frame_len(), &params, 1e-10)?;
    println!(
        "code: N={msg_len}, n={word_len}, q={alphabet}; frame {} bits; drift states M_n={}, M_tau={}",
        cb.frame_len(),
        space.symbol.size(),
        space.frame.size()
    );

    let mut rng = frame_rng(7, 0);
    let msg = Message::random(msg_len, alphabet, &mut rng);
    let frame = cb.encode(&msg)?;
    let received = loop {
        let r = transmit(&frame, &params, &mut rng);
        if space.frame.contains(r.len() as i64 - frame.len() as i64) {
            break r;
        }
    };
    println!("sent {} bits, received {} (end drift {:+})", frame.len(), received.len(), received.len() as i64 - frame.len() as i64);

    let priors = Priors::uniform(msg_len, alphabet);
    let out = decode(&received, &cb, &priors, &space, &params, DecodeOptions::default())?;
    let decided = out.posteriors.decide();
    let errors = decided.iter().zip(&msg.symbols).filter(|(a, b)| a != b).count();
    println!("symbol errors: {errors}/{msg_len}");
    println!("first five positions (sent -> decoded, posterior):");
    for i in 0..5 {
        println!(
            "  {}: {:2} -> {:2}  P = {:.6}",
            i,
            msg.symbols[i],
            decided[i],
            out.posteriors.row(i)[decided[i]]
        );
    }
    println!(
        "phase times: gamma {:?}, alpha/beta {:?}, posterior {:?}",
        out.timings.gamma, out.timings.alpha_beta, out.timings.posterior
    );
    Ok(())
}
