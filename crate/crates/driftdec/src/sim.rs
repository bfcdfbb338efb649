//! Monte Carlo simulation, benchmarking and reporting.
//!
//! Configuration is a line-oriented `key = value` file with `#` comments.
//! Frames are embarrassingly parallel: each frame draws from its own
//! counter-derived random stream, so results are identical across engines
//! and worker counts, and aggregation merges by frame index.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

use crate::channel::{frame_rng, setup_rng, transmit, ChannelParams, StateSpace};
use crate::codebook::{Codebook, Message};
use crate::decoder::{decode, DecodeOptions, Engine, Posteriors, Priors, StorageMode};
use crate::numeric::Precision;
use crate::planner::{
    choose_mode, cost_model, estimate_memory, occupancy, plan_tiles, usage, DeviceModel, ExecutionPlan,
    MemoryEstimate, Phase, RealWidths,
};
use crate::{Error, Result};

/// Exact per-trial CSV schema.
pub const TRIAL_CSV_HEADER: &str = "frame,sym_errors,frame_error,rho,end_drift,t_gamma,t_alphabeta,t_L,t_overhead";

/// Budget assumed for automatic mode choice when no device file supplies
/// one.
pub const DEFAULT_MEMORY_BUDGET: u64 = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ModeChoice {
    Auto,
    Global,
    Local,
}

impl std::str::FromStr for ModeChoice {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "auto" => Ok(ModeChoice::Auto),
            "global" => Ok(ModeChoice::Global),
            "local" => Ok(ModeChoice::Local),
            other => Err(format!("unknown mode {other:?} (expected auto, global or local)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum EngineChoice {
    Serial,
    Parallel,
}

impl std::str::FromStr for EngineChoice {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "serial" => Ok(EngineChoice::Serial),
            "parallel" => Ok(EngineChoice::Parallel),
            other => Err(format!("unknown engine {other:?} (expected serial or parallel)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format {other:?} (expected csv or json)")),
        }
    }
}

/// One simulation/benchmark configuration.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RunConfig {
    pub msg_len: usize,
    pub word_len: usize,
    pub alphabet: usize,
    pub codebook_path: Option<PathBuf>,
    pub pi: f64,
    pub pd: f64,
    pub ps: f64,
    /// State-space exclusion probability.
    pub pr: f64,
    pub seed: u64,
    pub frames: usize,
    pub mode: ModeChoice,
    pub engine: EngineChoice,
    /// 0 means "use all host parallelism".
    pub workers: usize,
    pub lattice_precision: Precision,
    pub fba_precision: Precision,
    pub banded: bool,
    pub pipeline_depth: usize,
    pub device_path: Option<PathBuf>,
    pub format: OutputFormat,
    /// Optional sweep over `p := pi = pd` values; empty means a single
    /// point at the configured channel.
    pub sweep: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            msg_len: 210,
            word_len: 10,
            alphabet: 32,
            codebook_path: None,
            pi: 1e-3,
            pd: 1e-3,
            ps: 0.0,
            pr: 1e-10,
            seed: 0,
            frames: 100,
            mode: ModeChoice::Auto,
            engine: EngineChoice::Serial,
            workers: 0,
            lattice_precision: Precision::Single,
            fba_precision: Precision::Double,
            banded: true,
            pipeline_depth: 4,
            device_path: None,
            format: OutputFormat::Csv,
            sweep: Vec::new(),
        }
    }
}

impl RunConfig {
    /// Parse `key = value` text over the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("config line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| Error::Config(format!("config line {}: bad {what} {value:?}", lineno + 1));
            match key {
                "N" => cfg.msg_len = value.parse().map_err(|_| bad("N"))?,
                "n" => cfg.word_len = value.parse().map_err(|_| bad("n"))?,
                "q" => cfg.alphabet = value.parse().map_err(|_| bad("q"))?,
                "codebook" => cfg.codebook_path = Some(PathBuf::from(value)),
                "pi" => cfg.pi = value.parse().map_err(|_| bad("pi"))?,
                "pd" => cfg.pd = value.parse().map_err(|_| bad("pd"))?,
                "ps" => cfg.ps = value.parse().map_err(|_| bad("ps"))?,
                "pr" => cfg.pr = value.parse().map_err(|_| bad("pr"))?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad("seed"))?,
                "frames" => cfg.frames = value.parse().map_err(|_| bad("frames"))?,
                "mode" => cfg.mode = value.parse().map_err(Error::Config)?,
                "engine" => cfg.engine = value.parse().map_err(Error::Config)?,
                "workers" => cfg.workers = value.parse().map_err(|_| bad("workers"))?,
                "lattice_precision" => cfg.lattice_precision = value.parse().map_err(Error::Config)?,
                "fba_precision" => cfg.fba_precision = value.parse().map_err(Error::Config)?,
                "banded" => cfg.banded = value.parse().map_err(|_| bad("banded"))?,
                "pipeline_depth" => cfg.pipeline_depth = value.parse().map_err(|_| bad("pipeline_depth"))?,
                "device" => cfg.device_path = Some(PathBuf::from(value)),
                "format" => cfg.format = value.parse().map_err(Error::Config)?,
                "sweep" => {
                    cfg.sweep = value
                        .split(',')
                        .map(|v| v.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad("sweep"))?;
                }
                other => return Err(Error::Config(format!("config line {}: unknown key {other:?}", lineno + 1))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.channel()?.require_usable().map_err(|e| Error::Config(e.to_string()))?;
        if self.frames == 0 {
            return Err(Error::Config("frames must be positive".into()));
        }
        if self.pipeline_depth == 0 {
            return Err(Error::Config("pipeline_depth must be positive".into()));
        }
        for &p in &self.sweep {
            ChannelParams::new(p, p, self.ps)
                .and_then(|c| c.require_usable())
                .map_err(|e| Error::Config(format!("sweep point {p}: {e}")))?;
        }
        Ok(())
    }

    pub fn channel(&self) -> Result<ChannelParams> {
        ChannelParams::new(self.pi, self.pd, self.ps)
    }
}

/// Everything prepared once per configuration: channel, code, state space,
/// decode options, and (when a device model is given) the execution plan.
#[derive(Debug)]
pub struct SimContext {
    pub cfg: RunConfig,
    pub params: ChannelParams,
    pub cb: Codebook,
    pub space: StateSpace,
    pub priors: Priors,
    pub opts: DecodeOptions,
    pub device: Option<DeviceModel>,
    pub plan: Option<ExecutionPlan>,
    pub memory: MemoryEstimate,
}

impl SimContext {
    pub fn prepare(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let params = cfg.channel()?;
        let cb = match &cfg.codebook_path {
            Some(path) => Codebook::parse(&std::fs::read_to_string(path)?)?,
            None => {
                // Setup stream: codebook generation only, so frame streams
                // are unaffected by it.
                let mut rng = setup_rng(cfg.seed);
                Codebook::random(cfg.msg_len, cfg.word_len, cfg.alphabet, &mut rng)?
            }
        };
        let space = StateSpace::for_code(cb.word_len(), cb.frame_len(), &params, cfg.pr)?;
        let device = match &cfg.device_path {
            Some(path) => Some(DeviceModel::parse(&std::fs::read_to_string(path)?)?),
            None => None,
        };
        let budget = device.as_ref().map_or(DEFAULT_MEMORY_BUDGET, |d| d.memory_budget);
        let global_total =
            estimate_memory(cb.msg_len(), cb.alphabet(), &space, StorageMode::Global, Precision::Double, cfg.pipeline_depth)
                .total;
        let storage = match cfg.mode {
            ModeChoice::Global => StorageMode::Global,
            ModeChoice::Local => StorageMode::Local,
            ModeChoice::Auto => choose_mode(global_total, budget),
        };
        let memory =
            estimate_memory(cb.msg_len(), cb.alphabet(), &space, storage, Precision::Double, cfg.pipeline_depth);
        let widths = RealWidths { lattice: cfg.lattice_precision, fba: cfg.fba_precision };
        let plan = match &device {
            Some(dev) => Some(plan_tiles(
                dev,
                cb.msg_len(),
                cb.word_len(),
                cb.alphabet(),
                &space,
                storage,
                widths,
                cfg.pipeline_depth,
            )?),
            None => None,
        };
        let workers = if cfg.workers > 0 {
            cfg.workers
        } else {
            plan.as_ref()
                .map(|p| p.worker_count as usize)
                .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        };
        let engine = match cfg.engine {
            EngineChoice::Serial => Engine::Serial,
            EngineChoice::Parallel => Engine::Parallel { workers },
        };
        let opts = DecodeOptions {
            storage,
            engine,
            normalize: true,
            banded: cfg.banded,
            lattice_precision: cfg.lattice_precision,
            fba_precision: cfg.fba_precision,
            pipeline_depth: cfg.pipeline_depth,
        };
        let priors = Priors::uniform(cb.msg_len(), cb.alphabet());
        Ok(Self { cfg, params, cb, space, priors, opts, device, plan, memory })
    }

    /// Same context with a different channel (sweeps re-derive the state
    /// space; the codebook is kept since it comes from the setup stream).
    fn with_channel(&self, params: ChannelParams) -> Result<Self> {
        let space = StateSpace::for_code(self.cb.word_len(), self.cb.frame_len(), &params, self.cfg.pr)?;
        Ok(Self {
            cfg: self.cfg.clone(),
            params,
            cb: self.cb.clone(),
            space,
            priors: self.priors.clone(),
            opts: self.opts,
            device: self.device.clone(),
            plan: self.plan.clone(),
            memory: self.memory,
        })
    }
}

/// Outcome of decoding one frame.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TrialResult {
    pub frame_index: u64,
    pub sym_errors: usize,
    pub frame_error: bool,
    pub rho: usize,
    pub end_drift: i64,
    pub t_gamma: f64,
    pub t_alpha_beta: f64,
    pub t_posterior: f64,
    pub t_overhead: f64,
    pub rejections: usize,
}

/// Simulate and decode one frame on its own random stream.  Channel
/// realizations whose end drift falls outside the frame state space are
/// resampled and counted; they never reach the decoder.
pub fn run_trial(ctx: &SimContext, frame_index: u64) -> Result<TrialResult> {
    let t0 = Instant::now();
    let mut rng = frame_rng(ctx.cfg.seed, frame_index);
    let tau = ctx.cb.frame_len() as i64;
    let mut rejections = 0usize;
    let (msg, received) = loop {
        let msg = Message::random(ctx.cb.msg_len(), ctx.cb.alphabet(), &mut rng);
        let frame = ctx.cb.encode(&msg)?;
        let received = transmit(&frame, &ctx.params, &mut rng);
        if ctx.space.frame.contains(received.len() as i64 - tau) {
            break (msg, received);
        }
        rejections += 1;
    };
    let out = decode(&received, &ctx.cb, &ctx.priors, &ctx.space, &ctx.params, ctx.opts)?;
    let decided = out.posteriors.decide();
    let sym_errors = decided.iter().zip(&msg.symbols).filter(|(a, b)| a != b).count();
    let total = t0.elapsed().as_secs_f64();
    let (tg, tab, tl) = (
        out.timings.gamma.as_secs_f64(),
        out.timings.alpha_beta.as_secs_f64(),
        out.timings.posterior.as_secs_f64(),
    );
    Ok(TrialResult {
        frame_index,
        sym_errors,
        frame_error: sym_errors > 0,
        rho: received.len(),
        end_drift: received.len() as i64 - tau,
        t_gamma: tg,
        t_alpha_beta: tab,
        t_posterior: tl,
        t_overhead: (total - tg - tab - tl).max(0.0),
        rejections,
    })
}

/// Run a batch of frames.  On the parallel engine the frames themselves
/// run concurrently (each decode serial); results are merged in frame
/// order either way.
pub fn run_frames(ctx: &SimContext, frames: usize) -> Result<Vec<TrialResult>> {
    match ctx.opts.engine {
        Engine::Serial => (0..frames as u64).map(|i| run_trial(ctx, i)).collect(),
        Engine::Parallel { workers } => {
            // Frame-level parallelism beats intra-decode parallelism for
            // throughput; per-frame decodes stay serial.
            let serial_ctx = SimContext { opts: DecodeOptions { engine: Engine::Serial, ..ctx.opts }, ..ctx.clone_shallow() };
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
            pool.install(|| (0..frames as u64).into_par_iter().map(|i| run_trial(&serial_ctx, i)).collect())
        }
    }
}

impl SimContext {
    fn clone_shallow(&self) -> Self {
        Self {
            cfg: self.cfg.clone(),
            params: self.params,
            cb: self.cb.clone(),
            space: self.space,
            priors: self.priors.clone(),
            opts: self.opts,
            device: self.device.clone(),
            plan: self.plan.clone(),
            memory: self.memory,
        }
    }
}

/// Render trials in the stable CSV schema.
pub fn trials_csv(trials: &[TrialResult]) -> String {
    let mut out = String::from(TRIAL_CSV_HEADER);
    out.push('\n');
    for t in trials {
        out.push_str(&format!(
            "{},{},{},{},{},{:.9},{:.9},{:.9},{:.9}\n",
            t.frame_index,
            t.sym_errors,
            u8::from(t.frame_error),
            t.rho,
            t.end_drift,
            t.t_gamma,
            t.t_alpha_beta,
            t.t_posterior,
            t.t_overhead
        ));
    }
    out
}

/// Wilson 95% score interval for `errors` successes in `trials` draws.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054f64;
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Aggregated statistics for one channel point of a sweep.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepPoint {
    pub p: f64,
    pub pi: f64,
    pub pd: f64,
    pub ps: f64,
    pub frames: u64,
    pub symbols: u64,
    pub sym_errors: u64,
    pub frame_errors: u64,
    pub rejections: u64,
    pub ser: f64,
    pub ser_lo: f64,
    pub ser_hi: f64,
    pub fer: f64,
    pub fer_lo: f64,
    pub fer_hi: f64,
}

/// Sweep over `p := pi = pd` points (configured `ps` kept), aggregating
/// symbol and frame error rates with Wilson intervals.
pub fn run_sweep(ctx: &SimContext, points: &[f64]) -> Result<Vec<SweepPoint>> {
    let mut table = Vec::with_capacity(points.len());
    for &p in points {
        let params = ChannelParams::new(p, p, ctx.cfg.ps)?;
        params.require_usable()?;
        let pctx = ctx.with_channel(params)?;
        let trials = run_frames(&pctx, ctx.cfg.frames)?;
        let frames = trials.len() as u64;
        let symbols = frames * ctx.cb.msg_len() as u64;
        let sym_errors: u64 = trials.iter().map(|t| t.sym_errors as u64).sum();
        let frame_errors: u64 = trials.iter().filter(|t| t.frame_error).count() as u64;
        let rejections: u64 = trials.iter().map(|t| t.rejections as u64).sum();
        let (ser_lo, ser_hi) = wilson_interval(sym_errors, symbols);
        let (fer_lo, fer_hi) = wilson_interval(frame_errors, frames);
        table.push(SweepPoint {
            p,
            pi: p,
            pd: p,
            ps: ctx.cfg.ps,
            frames,
            symbols,
            sym_errors,
            frame_errors,
            rejections,
            ser: sym_errors as f64 / symbols as f64,
            ser_lo,
            ser_hi,
            fer: frame_errors as f64 / frames as f64,
            fer_lo,
            fer_hi,
        });
    }
    Ok(table)
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out =
        String::from("p,frames,symbols,sym_errors,ser,ser_lo,ser_hi,frame_errors,fer,fer_lo,fer_hi,rejections\n");
    for s in points {
        out.push_str(&format!(
            "{},{},{},{},{:.6e},{:.6e},{:.6e},{},{:.6e},{:.6e},{:.6e},{}\n",
            s.p, s.frames, s.symbols, s.sym_errors, s.ser, s.ser_lo, s.ser_hi, s.frame_errors, s.fer, s.fer_lo,
            s.fer_hi, s.rejections
        ));
    }
    out
}

/// Raw and normalized per-phase benchmark figures.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BenchReport {
    pub frames: u64,
    /// Mean wall seconds per frame per phase: gamma, alpha+beta, L,
    /// overhead.
    pub t_gamma: f64,
    pub t_alpha_beta: f64,
    pub t_posterior: f64,
    pub t_overhead: f64,
    pub gamma_share: f64,
    /// Phase times divided by abstract work units.
    pub normalized_gamma: f64,
    pub normalized_alpha_beta: f64,
    pub normalized_posterior: f64,
    /// Decoded information bits per second, `N log2(q) / decode time`.
    pub throughput_serial: f64,
    pub throughput_parallel: f64,
    pub speedup: f64,
    pub workers: u64,
}

/// Time serial and parallel runs of the configured workload and normalize
/// phase times by the planner's cost model.
pub fn bench(ctx: &SimContext) -> Result<BenchReport> {
    let frames = ctx.cfg.frames;
    let bits_per_frame = ctx.cb.msg_len() as f64 * (ctx.cb.alphabet() as f64).log2();

    let serial_ctx =
        SimContext { opts: DecodeOptions { engine: Engine::Serial, ..ctx.opts }, ..ctx.clone_shallow() };
    let t0 = Instant::now();
    let trials = run_frames(&serial_ctx, frames)?;
    let serial_wall = t0.elapsed().as_secs_f64();

    let workers = match ctx.opts.engine {
        Engine::Parallel { workers } => workers,
        Engine::Serial => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let par_ctx = SimContext {
        opts: DecodeOptions { engine: Engine::Parallel { workers }, ..ctx.opts },
        ..ctx.clone_shallow()
    };
    let t1 = Instant::now();
    run_frames(&par_ctx, frames)?;
    let parallel_wall = t1.elapsed().as_secs_f64();

    let nf = frames as f64;
    let tg: f64 = trials.iter().map(|t| t.t_gamma).sum::<f64>() / nf;
    let tab: f64 = trials.iter().map(|t| t.t_alpha_beta).sum::<f64>() / nf;
    let tl: f64 = trials.iter().map(|t| t.t_posterior).sum::<f64>() / nf;
    let tov: f64 = trials.iter().map(|t| t.t_overhead).sum::<f64>() / nf;
    let cm = cost_model(ctx.cb.msg_len(), ctx.cb.word_len(), ctx.cb.alphabet(), &ctx.space);
    let total = (tg + tab + tl + tov).max(f64::MIN_POSITIVE);
    Ok(BenchReport {
        frames: frames as u64,
        t_gamma: tg,
        t_alpha_beta: tab,
        t_posterior: tl,
        t_overhead: tov,
        gamma_share: tg / total,
        normalized_gamma: tg / cm.gamma,
        normalized_alpha_beta: tab / cm.alpha_beta,
        normalized_posterior: tl / cm.posterior,
        throughput_serial: bits_per_frame * nf / serial_wall,
        throughput_parallel: bits_per_frame * nf / parallel_wall,
        speedup: serial_wall / parallel_wall,
        workers: workers as u64,
    })
}

/// Machine-readable planning summary.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PlanReport {
    pub mode: StorageMode,
    pub state_space: StateSpace,
    pub memory: MemoryEstimate,
    pub plan: ExecutionPlan,
    pub occupancy_gamma: f64,
    pub occupancy_alpha_beta: f64,
    pub occupancy_posterior: f64,
    pub usage_gamma: f64,
    pub usage_alpha_beta: f64,
    pub cost: crate::planner::CostModel,
}

/// Plan against the configured device model (required for this report).
pub fn plan_report(ctx: &SimContext) -> Result<PlanReport> {
    let dev = ctx
        .device
        .as_ref()
        .ok_or_else(|| Error::Config("plan report requires a device file (key `device`)".into()))?;
    let plan =
        ctx.plan.clone().ok_or_else(|| Error::Config("plan report requires a device file (key `device`)".into()))?;
    // Alpha and beta run concurrently in global mode and split the device.
    let ab_share = match plan.mode {
        StorageMode::Global => 0.5,
        StorageMode::Local => 1.0,
    };
    let gamma_grid = match plan.mode {
        StorageMode::Global => plan.msg_len * plan.gy_gamma,
        StorageMode::Local => plan.pipeline_depth * plan.gy_gamma,
    };
    Ok(PlanReport {
        mode: plan.mode,
        state_space: ctx.space,
        memory: ctx.memory,
        occupancy_gamma: occupancy(&plan, dev, Phase::Gamma),
        occupancy_alpha_beta: occupancy(&plan, dev, Phase::AlphaBeta),
        occupancy_posterior: occupancy(&plan, dev, Phase::Posterior),
        usage_gamma: usage(gamma_grid, dev.n_sm, 1.0),
        usage_alpha_beta: usage(plan.gx_alpha_beta, dev.n_sm, ab_share),
        cost: cost_model(ctx.cb.msg_len(), ctx.cb.word_len(), ctx.cb.alphabet(), &ctx.space),
        plan,
    })
}

/// Summary of the built-in oracle cross-checks.
#[derive(Debug, Clone, serde::Serialize)]
pub struct OracleReport {
    pub receiver_cases: u64,
    pub receiver_max_rel_err: f64,
    pub posterior_cases: u64,
    pub posterior_max_abs_err: f64,
    pub pass: bool,
}

/// Cross-check the lattice receiver and the forward-backward posteriors
/// against the brute-force oracles on a small seeded suite.
pub fn oracle_check(seed: u64) -> Result<OracleReport> {
    use crate::lattice::receiver;
    use crate::oracle::{posterior_bruteforce, receiver_bruteforce};
    use rand::Rng;

    let mut receiver_cases = 0u64;
    let mut max_rel = 0.0f64;
    for &(pi, pd) in &[(0.0, 0.0), (0.05, 0.05), (0.2, 0.05), (0.05, 0.2)] {
        for &ps in &[0.0, 0.1] {
            let params = ChannelParams::new(pi, pd, ps)?;
            for n in 1..=3usize {
                for xv in 0..(1u32 << n) {
                    let x: Vec<u8> = (0..n).map(|k| ((xv >> (n - 1 - k)) & 1) as u8).collect();
                    for len in 0..=(n + 2) {
                        for yv in 0..(1u32 << len) {
                            let y: Vec<u8> = (0..len).map(|k| ((yv >> (len - 1 - k)) & 1) as u8).collect();
                            let fast = receiver(&y, &x, &params);
                            let slow = receiver_bruteforce(&y, &x, &params, 40)?;
                            if slow > 0.0 {
                                max_rel = max_rel.max((fast - slow).abs() / slow);
                            }
                            receiver_cases += 1;
                        }
                    }
                }
            }
        }
    }

    let mut posterior_cases = 0u64;
    let mut max_abs = 0.0f64;
    let params = ChannelParams::new(0.01, 0.01, 0.01)?;
    // +-3 with zero accepted end drift keeps the truncated trajectory mass
    // well under the 1e-9 scale for any seed.
    let bounds = crate::channel::DriftBounds::new(-3, 3)?;
    let space = StateSpace::new(bounds, bounds)?;
    let opts = DecodeOptions {
        banded: false,
        lattice_precision: Precision::Double,
        ..DecodeOptions::default()
    };
    let mut rng = setup_rng(seed);
    for case in 0..10u64 {
        let cb = Codebook::random(3, 3, 4, &mut rng)?;
        let msg = Message::random(3, 4, &mut rng);
        let frame = cb.encode(&msg)?;
        let mut chan_rng = frame_rng(seed, case);
        // Accept only zero end drift: the +-2 bounds then leave headroom at
        // every boundary, so the trajectory mass the decoder truncates stays
        // far below the 1e-9 comparison scale.
        let received = loop {
            let r = transmit(&frame, &params, &mut chan_rng);
            if r.len() == frame.len() {
                break r;
            }
        };
        let priors = Priors::uniform(3, 4);
        let fast = decode(&received, &cb, &priors, &space, &params, opts)?.posteriors;
        let slow: Posteriors = posterior_bruteforce(&received, &cb, &priors, &params, 40)?;
        for i in 0..3 {
            for d in 0..4 {
                max_abs = max_abs.max((fast.row(i)[d] - slow.row(i)[d]).abs());
            }
        }
        posterior_cases += 1;
        // keep rng state advancing even on unlikely retry loops
        let _: u32 = rng.gen();
    }

    Ok(OracleReport {
        receiver_cases,
        receiver_max_rel_err: max_rel,
        posterior_cases,
        posterior_max_abs_err: max_abs,
        pass: max_rel < 1e-12 && max_abs < 1e-9,
    })
}
