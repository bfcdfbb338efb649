//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line (run with `--nocapture` to see them).  Criterion 8
//! (parallel speedup) is report-only and never fails the suite.

use driftdec::bits::Bit;
use driftdec::channel::{frame_rng, setup_rng, transmit, ChannelParams, DriftBounds, StateSpace};
use driftdec::codebook::{Codebook, Message};
use driftdec::decoder::{
    decode, DecodeOptions, Engine, Posteriors, Priors, StorageMode,
};
use driftdec::lattice::{lattice_batch, receiver};
use driftdec::numeric::Precision;
use driftdec::oracle::{posterior_bruteforce, receiver_bruteforce};
use driftdec::planner::{estimate_memory, plan_tiles, validate_plan, DeviceModel, RealWidths};
use driftdec::sim::{bench, run_frames, run_sweep, EngineChoice, RunConfig, SimContext};

fn report(criterion: u32, pass: bool, detail: &str) {
    println!("acceptance criterion {criterion}: {} — {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn bits_of(v: u32, len: usize) -> Vec<Bit> {
    (0..len).map(|k| ((v >> (len - 1 - k)) & 1) as Bit).collect()
}

/// Criterion 1: lattice receiver vs. event-enumeration oracle, double to
/// relative 1e-12 and single to 1e-6, over all (x, y) with n <= 4,
/// |y| <= 8 on the 3x3 (pi, pd) grid with ps in {0, 0.1}.
#[test]
fn criterion_1_receiver_oracle_equivalence() {
    let mut max_double = 0.0f64;
    let mut max_single = 0.0f64;
    let mut cases = 0u64;
    for &pi in &[0.0, 0.05, 0.2] {
        for &pd in &[0.0, 0.05, 0.2] {
            for &ps in &[0.0, 0.1] {
                let params = ChannelParams::new(pi, pd, ps).unwrap();
                for n in 1..=4usize {
                    for xv in 0..(1u32 << n) {
                        let x = bits_of(xv, n);
                        for mu in 0..=8usize {
                            let bounds =
                                DriftBounds::new((mu as i64 - n as i64).min(0), (mu as i64 - n as i64).max(0))
                                    .unwrap();
                            for yv in 0..(1u32 << mu) {
                                let y = bits_of(yv, mu);
                                let slow = receiver_bruteforce(&y, &x, &params, 48).unwrap();
                                let fast = receiver(&y, &x, &params);
                                let single = lattice_batch(&x, &y, bounds, &params, false, Precision::Single)
                                    .unwrap()
                                    .value(mu as i64 - n as i64);
                                if slow > 0.0 {
                                    max_double = max_double.max((fast - slow).abs() / slow);
                                    max_single = max_single.max((single - slow).abs() / slow);
                                } else {
                                    assert_eq!(fast, 0.0, "nonzero lattice value for impossible y");
                                }
                                cases += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    report(
        1,
        max_double < 1e-12 && max_single < 1e-6,
        &format!("{cases} cases, max rel err double {max_double:.2e}, single {max_single:.2e}"),
    );
}

/// Criterion 2: decoder posteriors vs. exhaustive Bayes to absolute 1e-9
/// on >= 50 randomized small instances (N <= 3, n <= 3, q <= 4, drift
/// bounds +-2).
#[test]
fn criterion_2_posterior_oracle_equivalence() {
    let bounds = DriftBounds::new(-2, 2).unwrap();
    let space = StateSpace::new(bounds, bounds).unwrap();
    // Unbanded, double lattice: the banded corridor truncates trajectory
    // mass far above the 1e-9 comparison scale.
    let opts = DecodeOptions { banded: false, lattice_precision: Precision::Double, ..DecodeOptions::default() };
    let mut max_abs = 0.0f64;
    let mut instances = 0u64;
    let mut rng = setup_rng(2024);
    for &p in &[0.003, 0.006, 0.009] {
        for &ps in &[0.0, 0.01] {
            let params = ChannelParams::new(p, p, ps).unwrap();
            for case in 0..10u64 {
                let msg_len = 1 + (case as usize % 3);
                let word_len = 2 + (case as usize % 2);
                let alphabet = 2 + 2 * (case as usize % 2);
                let cb = Codebook::random(msg_len, word_len, alphabet, &mut rng).unwrap();
                let msg = Message::random(msg_len, alphabet, &mut rng);
                let frame = cb.encode(&msg).unwrap();
                let mut crng = frame_rng(900 + case, instances);
                // Accept only zero end drift: the +-2 bounds then leave two
                // units of headroom at every boundary, keeping the
                // trajectory mass the decoder truncates far below the
                // comparison scale (a 1e-9 match is impossible when the
                // exact posterior weights paths the bounds exclude).
                let received = loop {
                    let r = transmit(&frame, &params, &mut crng);
                    if r.len() == frame.len() {
                        break r;
                    }
                };
                let priors = Priors::uniform(msg_len, alphabet);
                let fast = decode(&received, &cb, &priors, &space, &params, opts).unwrap().posteriors;
                let slow: Posteriors = posterior_bruteforce(&received, &cb, &priors, &params, 48).unwrap();
                for i in 0..msg_len {
                    for d in 0..alphabet {
                        max_abs = max_abs.max((fast.row(i)[d] - slow.row(i)[d]).abs());
                    }
                }
                instances += 1;
            }
        }
    }
    report(2, instances >= 50 && max_abs < 1e-9, &format!("{instances} instances, max abs err {max_abs:.2e}"));
}

fn moderate_context(engine: EngineChoice, workers: usize) -> SimContext {
    let cfg = RunConfig {
        msg_len: 210,
        word_len: 10,
        alphabet: 32,
        pi: 1e-3,
        pd: 1e-3,
        ps: 0.0,
        seed: 33,
        engine,
        workers,
        ..RunConfig::default()
    };
    SimContext::prepare(cfg).unwrap()
}

/// Criterion 3: global/local x serial/parallel(1, 2, 8) bitwise-identical
/// posteriors on 20 seeded frames at the moderate operating point
/// (N=210, n=10, q=32, pi=pd=1e-3).
#[test]
fn criterion_3_schedule_engine_equivalence() {
    let ctx = moderate_context(EngineChoice::Serial, 0);
    let tau = ctx.cb.frame_len() as i64;
    let mut frames_checked = 0u64;
    for frame_index in 0..20u64 {
        let mut rng = frame_rng(ctx.cfg.seed, frame_index);
        let msg = Message::random(ctx.cb.msg_len(), ctx.cb.alphabet(), &mut rng);
        let encoded = ctx.cb.encode(&msg).unwrap();
        let received = loop {
            let r = transmit(&encoded, &ctx.params, &mut rng);
            if ctx.space.frame.contains(r.len() as i64 - tau) {
                break r;
            }
        };
        let base = DecodeOptions::default();
        let reference = decode(&received, &ctx.cb, &ctx.priors, &ctx.space, &ctx.params, base)
            .unwrap()
            .posteriors;
        let mut variants = vec![DecodeOptions { storage: StorageMode::Local, ..base }];
        for workers in [1usize, 2, 8] {
            variants.push(DecodeOptions { engine: Engine::Parallel { workers }, ..base });
            variants.push(DecodeOptions {
                storage: StorageMode::Local,
                engine: Engine::Parallel { workers },
                ..base
            });
        }
        for (k, opts) in variants.iter().enumerate() {
            let out = decode(&received, &ctx.cb, &ctx.priors, &ctx.space, &ctx.params, *opts)
                .unwrap()
                .posteriors;
            assert_eq!(out, reference, "frame {frame_index}, variant {k} not bitwise identical");
        }
        frames_checked += 1;
    }
    report(3, frames_checked == 20, &format!("{frames_checked} frames x 7 schedule/engine variants bitwise identical"));
}

/// Criterion 4: posterior rows sum to 1 +- 1e-9 at the moderate operating
/// point; with normalization disabled on a small instance, the
/// alpha-beta product sum is constant over i to relative 1e-10.
#[test]
fn criterion_4_normalization_and_lambda() {
    let ctx = moderate_context(EngineChoice::Serial, 0);
    let trial_frames = run_frames(&ctx, 2).unwrap();
    assert_eq!(trial_frames.len(), 2);
    let mut rng = frame_rng(ctx.cfg.seed, 0);
    let msg = Message::random(ctx.cb.msg_len(), ctx.cb.alphabet(), &mut rng);
    let encoded = ctx.cb.encode(&msg).unwrap();
    let received = loop {
        let r = transmit(&encoded, &ctx.params, &mut rng);
        if ctx.space.frame.contains(r.len() as i64 - encoded.len() as i64) {
            break r;
        }
    };
    let out = decode(&received, &ctx.cb, &ctx.priors, &ctx.space, &ctx.params, DecodeOptions::default()).unwrap();
    let mut max_row_dev = 0.0f64;
    for i in 0..ctx.cb.msg_len() {
        let sum: f64 = out.posteriors.row(i).iter().sum();
        max_row_dev = max_row_dev.max((sum - 1.0).abs());
    }

    // Lambda constancy, unnormalized, small instance.
    let params = ChannelParams::new(0.02, 0.02, 0.01).unwrap();
    let bounds = DriftBounds::new(-3, 3).unwrap();
    let space = StateSpace::new(bounds, bounds).unwrap();
    let mut srng = setup_rng(5);
    let cb = Codebook::random(4, 3, 4, &mut srng).unwrap();
    let frame = cb.encode(&Message::random(4, 4, &mut srng)).unwrap();
    let mut crng = frame_rng(5, 0);
    let received = loop {
        let r = transmit(&frame, &params, &mut crng);
        if space.frame.contains(r.len() as i64 - frame.len() as i64) {
            break r;
        }
    };
    let opts = DecodeOptions {
        normalize: false,
        banded: false,
        lattice_precision: Precision::Double,
        ..DecodeOptions::default()
    };
    let priors = Priors::uniform(4, 4);
    let small = decode(&received, &cb, &priors, &space, &params, opts).unwrap();
    let lambda: Vec<f64> = (0..=4)
        .map(|i| small.store.alpha_row(i).iter().zip(small.store.beta_row(i)).map(|(a, b)| a * b).sum())
        .collect();
    let max_lambda_dev =
        lambda[1..].iter().map(|&l| (l - lambda[0]).abs() / lambda[0].abs()).fold(0.0f64, f64::max);

    report(
        4,
        max_row_dev < 1e-9 && max_lambda_dev < 1e-10,
        &format!("max |sum(L_i) - 1| = {max_row_dev:.2e}, max lambda rel dev = {max_lambda_dev:.2e}"),
    );
}

/// Criterion 5: memory closed forms exact; local/global gamma ratio S/N;
/// the large local-mode example lands in [0.5, 2] GiB across
/// pr in [1e-12, 1e-6].
#[test]
fn criterion_5_memory_model() {
    let sp = StateSpace::new(DriftBounds::new(0, 0).unwrap(), DriftBounds::new(0, 0).unwrap()).unwrap();
    let est = estimate_memory(2, 2, &sp, StorageMode::Global, Precision::Double, 4);
    let forms_exact = est.gamma == 32 && est.alpha == 24 && est.beta == 24 && est.posterior == 32;

    let sp = StateSpace::new(DriftBounds::new(-2, 2).unwrap(), DriftBounds::new(-7, 7).unwrap()).unwrap();
    let g = estimate_memory(30, 16, &sp, StorageMode::Global, Precision::Double, 4);
    let l = estimate_memory(30, 16, &sp, StorageMode::Local, Precision::Double, 4);
    let ratio_exact = l.gamma * 30 == g.gamma * 4;

    let params = ChannelParams::new(0.1, 0.1, 0.0).unwrap();
    let mut example_ok = true;
    let mut gib_range = (f64::INFINITY, 0.0f64);
    for pr in [1e-12, 1e-9, 1e-6] {
        let sp = StateSpace::for_code(20, 840 * 20, &params, pr).unwrap();
        let est = estimate_memory(840, 1024, &sp, StorageMode::Local, Precision::Double, 4);
        let gib = est.total as f64 / (1u64 << 30) as f64;
        gib_range = (gib_range.0.min(gib), gib_range.1.max(gib));
        example_ok &= (0.5..=2.0).contains(&gib);
    }
    report(
        5,
        forms_exact && ratio_exact && example_ok,
        &format!(
            "closed forms exact, gamma ratio S/N exact, large example {:.2}..{:.2} GiB",
            gib_range.0, gib_range.1
        ),
    );
}

/// Criterion 6: 1000+ randomized device/dimension draws all validate
/// (caps, warp rule, grid floors); the hand-derived plan for
/// (q=32, M_tau=31, nSM=14) is reproduced exactly.
#[test]
fn criterion_6_planner_conformance() {
    use rand::Rng;
    let mut rng = setup_rng(606);
    let mut feasible = 0u64;
    let mut draws = 0u64;
    while feasible < 1000 {
        draws += 1;
        let warp = [8u64, 16, 32, 64][rng.gen_range(0..4)];
        let dev = DeviceModel::new(
            rng.gen_range(1..=32u64),
            warp,
            warp * rng.gen_range(1..=32u64),
            rng.gen_range(2048..=98304u64),
            rng.gen_range(8192..=131072u64),
            rng.gen_range(1..=32u64),
            rng.gen_range(8..=64u64),
            1 << 30,
        )
        .unwrap();
        let q = 1usize << rng.gen_range(1..=10u32);
        let n = rng.gen_range(2..=24usize);
        let sym = DriftBounds::new(-rng.gen_range(0..=4i64), rng.gen_range(0..=4i64)).unwrap();
        let frame =
            DriftBounds::new(sym.m_minus() - rng.gen_range(0..=200i64), sym.m_plus() + rng.gen_range(0..=200i64))
                .unwrap();
        let sp = StateSpace::new(sym, frame).unwrap();
        let mode = if rng.gen() { StorageMode::Global } else { StorageMode::Local };
        let msg_len = rng.gen_range(1..=840usize);
        if let Ok(plan) = plan_tiles(&dev, msg_len, n, q, &sp, mode, RealWidths::default(), 4) {
            validate_plan(&plan, &dev).unwrap_or_else(|e| panic!("draw {draws}: invalid plan {plan:?}: {e}"));
            feasible += 1;
        }
    }

    let dev = DeviceModel::new(14, 32, 1024, 49152, 32768, 8, 48, 1 << 30).unwrap();
    let sp = StateSpace::new(DriftBounds::new(-1, 1).unwrap(), DriftBounds::new(-15, 15).unwrap()).unwrap();
    let plan = plan_tiles(&dev, 210, 10, 32, &sp, StorageMode::Global, RealWidths::default(), 4).unwrap();
    let hand_ok = plan.bx_gamma == 32
        && plan.by_gamma == 31
        && plan.gy_gamma == 1
        && plan.bx_alpha_beta == 32
        && plan.by_alpha_beta == 1
        && plan.gx_alpha_beta == 31
        && plan.bx_posterior == 32
        && plan.gy_posterior == 1;
    report(6, hand_ok, &format!("{feasible} random plans validated ({draws} draws); hand-derived plan reproduced"));
}

/// Criterion 7: seeded sweep at N=210, n=10, q=32 over >= 1e5 decoded
/// symbols per point: SER(1e-2) strictly exceeds SER(1e-3) with
/// non-overlapping Wilson 95% intervals.
#[test]
fn criterion_7_statistical_sanity() {
    let cfg = RunConfig {
        msg_len: 210,
        word_len: 10,
        alphabet: 32,
        seed: 77,
        frames: 480, // 480 * 210 = 100800 symbols per point
        engine: EngineChoice::Parallel,
        ..RunConfig::default()
    };
    let ctx = SimContext::prepare(cfg).unwrap();
    let table = run_sweep(&ctx, &[1e-3, 1e-2]).unwrap();
    let (lo, hi) = (&table[0], &table[1]);
    let ok = hi.ser > lo.ser && hi.ser_lo > lo.ser_hi && lo.symbols >= 100_000 && hi.symbols >= 100_000;
    report(
        7,
        ok,
        &format!(
            "SER {:.3e} [{:.3e}, {:.3e}] at p=1e-3 vs {:.3e} [{:.3e}, {:.3e}] at p=1e-2 over {} symbols each",
            lo.ser, lo.ser_lo, lo.ser_hi, hi.ser, hi.ser_lo, hi.ser_hi, lo.symbols
        ),
    );
}

/// Criterion 8 (report-only): parallel decode throughput vs. serial at the
/// moderate operating point.  Reported, never gating: the target (>= 2x)
/// assumes a >= 4-core host.
#[test]
fn criterion_8_parallel_speedup_report() {
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let cfg = RunConfig {
        msg_len: 210,
        word_len: 10,
        alphabet: 32,
        seed: 88,
        frames: 8,
        engine: EngineChoice::Parallel,
        ..RunConfig::default()
    };
    let ctx = SimContext::prepare(cfg).unwrap();
    let r = bench(&ctx).unwrap();
    let met = r.speedup >= 2.0;
    println!(
        "acceptance criterion 8: {} (report-only) — speedup {:.2}x on {cores} cores ({} workers), serial {:.1} bit/s, parallel {:.1} bit/s",
        if met { "PASS" } else { "INFO" },
        r.speedup,
        r.workers,
        r.throughput_serial,
        r.throughput_parallel
    );
}
