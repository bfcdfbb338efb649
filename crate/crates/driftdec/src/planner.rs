//! Run-time execution planning against an abstract device model.
//!
//! The planner mirrors a GPU launch-configuration calculator: tile (block)
//! sizes are chosen at run time as the largest warp multiples that fit the
//! device's thread, shared-memory and register caps, subject to grid-size
//! floors that keep every worker group busy.  The emitted plan drives the
//! host worker-pool engine, where tiles map to task granules; the decision
//! logic is the same either way.
//!
//! Per-phase tile shapes and shared-memory footprints:
//!
//! * gamma: block `(Bx, By)` over (symbol, initial drift), grid `(N, Gy)`,
//!   shared memory `(n + m_plus + 1) * Bx * By` lattice-width reals;
//! * alpha/beta: block `(Bx, By)`, grid `Gx = ceil(M_tau / By)`, shared
//!   memory `(q + M_tau) * By` doubles;
//! * posterior: block `Bx` over symbols, grid `Gy = ceil(q / Bx)`, shared
//!   memory `2 * M_tau` doubles.

use std::collections::HashMap;

use crate::channel::StateSpace;
use crate::decoder::StorageMode;
use crate::numeric::Precision;
use crate::{Error, Result};

pub const DEVICE_KEYS: [&str; 8] = [
    "nSM",
    "warpSize",
    "maxThreadsPerBlock",
    "sharedMemPerSM",
    "regsPerSM",
    "maxResidentBlocks",
    "maxWarpsPerSM",
    "memoryBudget",
];

/// Default per-thread register pressure assumed for every phase; an input,
/// not a measurement (compiler-specific).
pub const DEFAULT_REGS_PER_THREAD: u64 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Phase {
    Gamma,
    AlphaBeta,
    Posterior,
}

/// Abstract device: worker-group count and per-group resource caps.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DeviceModel {
    pub n_sm: u64,
    pub warp_size: u64,
    pub max_threads_per_block: u64,
    pub shared_mem_per_sm: u64,
    pub regs_per_sm: u64,
    pub max_resident_blocks: u64,
    pub max_warps_per_sm: u64,
    pub memory_budget: u64,
    /// Per-phase register pressure (input, defaults to 32 everywhere).
    pub regs_per_thread: [u64; 3],
}

impl DeviceModel {
    pub fn new(
        n_sm: u64,
        warp_size: u64,
        max_threads_per_block: u64,
        shared_mem_per_sm: u64,
        regs_per_sm: u64,
        max_resident_blocks: u64,
        max_warps_per_sm: u64,
        memory_budget: u64,
    ) -> Result<Self> {
        let dev = Self {
            n_sm,
            warp_size,
            max_threads_per_block,
            shared_mem_per_sm,
            regs_per_sm,
            max_resident_blocks,
            max_warps_per_sm,
            memory_budget,
            regs_per_thread: [DEFAULT_REGS_PER_THREAD; 3],
        };
        dev.validate()?;
        Ok(dev)
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            ("nSM", self.n_sm),
            ("warpSize", self.warp_size),
            ("maxThreadsPerBlock", self.max_threads_per_block),
            ("sharedMemPerSM", self.shared_mem_per_sm),
            ("regsPerSM", self.regs_per_sm),
            ("maxResidentBlocks", self.max_resident_blocks),
            ("maxWarpsPerSM", self.max_warps_per_sm),
            ("memoryBudget", self.memory_budget),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(Error::Config(format!("device field {name} must be positive")));
            }
        }
        if self.max_threads_per_block % self.warp_size != 0 {
            return Err(Error::Config(format!(
                "warpSize {} must divide maxThreadsPerBlock {}",
                self.warp_size, self.max_threads_per_block
            )));
        }
        Ok(())
    }

    pub fn regs_per_thread(&self, phase: Phase) -> u64 {
        self.regs_per_thread[phase as usize]
    }

    /// Parse the `key = value` device file; all eight keys required, no
    /// others allowed.  Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values: HashMap<&str, u64> = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("device file line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            let slot = DEVICE_KEYS
                .iter()
                .find(|&&k| k == key)
                .ok_or_else(|| Error::Config(format!("device file line {}: unknown key {key:?}", lineno + 1)))?;
            let parsed: u64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("device file line {}: bad value {:?}", lineno + 1, value.trim())))?;
            if values.insert(slot, parsed).is_some() {
                return Err(Error::Config(format!("device file: duplicate key {key:?}")));
            }
        }
        for key in DEVICE_KEYS {
            if !values.contains_key(key) {
                return Err(Error::Config(format!("device file: missing key {key:?}")));
            }
        }
        Self::new(
            values["nSM"],
            values["warpSize"],
            values["maxThreadsPerBlock"],
            values["sharedMemPerSM"],
            values["regsPerSM"],
            values["maxResidentBlocks"],
            values["maxWarpsPerSM"],
            values["memoryBudget"],
        )
    }
}

/// Floating-point widths the planner assumes for storage and tiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct RealWidths {
    /// Lattice/gamma tile entries.
    pub lattice: Precision,
    /// Alpha, beta and posterior entries.
    pub fba: Precision,
}

impl Default for RealWidths {
    fn default() -> Self {
        Self { lattice: Precision::Single, fba: Precision::Double }
    }
}

/// Chosen tiles, grids and mode for one decoding problem.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ExecutionPlan {
    pub mode: StorageMode,
    pub msg_len: u64,
    pub alphabet: u64,
    pub m_tau: u64,
    pub bx_gamma: u64,
    pub by_gamma: u64,
    pub gy_gamma: u64,
    pub bx_alpha_beta: u64,
    pub by_alpha_beta: u64,
    pub gx_alpha_beta: u64,
    pub bx_posterior: u64,
    pub gy_posterior: u64,
    pub shared_mem: [u64; 3],
    pub pipeline_depth: u64,
    pub worker_count: u64,
}

impl ExecutionPlan {
    pub fn tile_threads(&self, phase: Phase) -> u64 {
        match phase {
            Phase::Gamma => self.bx_gamma * self.by_gamma,
            Phase::AlphaBeta => self.bx_alpha_beta * self.by_alpha_beta,
            Phase::Posterior => self.bx_posterior,
        }
    }

    pub fn shared_mem(&self, phase: Phase) -> u64 {
        self.shared_mem[phase as usize]
    }
}

/// Per-metric memory footprint in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct MemoryEstimate {
    pub gamma: u64,
    pub alpha: u64,
    pub beta: u64,
    pub posterior: u64,
    pub total: u64,
}

/// Closed-form metric storage: gamma is `N` (global) or `S` (local) slabs
/// of `M_tau x M_n x q`; alpha and beta are `(N+1) x M_tau`; the posterior
/// is `N x q`.  All entries `width` bytes.
pub fn estimate_memory(
    msg_len: usize,
    alphabet: usize,
    space: &StateSpace,
    mode: StorageMode,
    width: Precision,
    pipeline_depth: usize,
) -> MemoryEstimate {
    let w = width.bytes();
    let n_msg = msg_len as u64;
    let q = alphabet as u64;
    let m_tau = space.frame.size() as u64;
    let m_n = space.symbol.size() as u64;
    let slabs = match mode {
        StorageMode::Global => n_msg,
        StorageMode::Local => (pipeline_depth as u64).min(n_msg),
    };
    let gamma = w * slabs * m_tau * m_n * q;
    let alpha = w * (n_msg + 1) * m_tau;
    let posterior = w * n_msg * q;
    MemoryEstimate { gamma, alpha, beta: alpha, posterior, total: gamma + 2 * alpha + posterior }
}

/// Global storage when it fits the budget, local otherwise.
pub fn choose_mode(global_total_bytes: u64, budget: u64) -> StorageMode {
    if global_total_bytes <= budget {
        StorageMode::Global
    } else {
        StorageMode::Local
    }
}

/// Shared memory one tile of the given shape needs, in bytes.
pub fn shared_mem_required(
    phase: Phase,
    bx: u64,
    by: u64,
    word_len: usize,
    m_plus: i64,
    alphabet: usize,
    m_tau: usize,
    widths: RealWidths,
) -> u64 {
    match phase {
        Phase::Gamma => (word_len as u64 + m_plus as u64 + 1) * bx * by * widths.lattice.bytes(),
        Phase::AlphaBeta => (alphabet as u64 + m_tau as u64) * by * widths.fba.bytes(),
        Phase::Posterior => 2 * m_tau as u64 * widths.fba.bytes(),
    }
}

/// Tile-side candidates along one dimension: the dimension itself when it
/// is below a warp, otherwise warp multiples, with 1 as the last resort.
fn tile_candidates(dim: u64, dev: &DeviceModel) -> Vec<u64> {
    let mut c = Vec::new();
    let top = dim.min(dev.max_threads_per_block);
    let mut w = (top / dev.warp_size) * dev.warp_size;
    if dim < dev.warp_size {
        c.push(dim);
    }
    while w >= dev.warp_size {
        c.push(w);
        w -= dev.warp_size;
    }
    if !c.contains(&1) {
        c.push(1);
    }
    c.sort_unstable_by(|a, b| b.cmp(a));
    c.dedup();
    c
}

fn div_ceil(a: u64, b: u64) -> u64 {
    (a + b - 1) / b
}

/// Minimum grid sizes that keep the worker groups busy, per mode.  In
/// global mode the alpha and beta kernels run concurrently and split the
/// device; in local mode the gamma pipeline overlaps `S = 4` streams.
fn grid_floors(mode: StorageMode, n_sm: u64) -> (u64, u64) {
    match mode {
        StorageMode::Global => (n_sm, div_ceil(n_sm, 2)),
        StorageMode::Local => (div_ceil(n_sm, 4), n_sm),
    }
}

/// Select tile and grid sizes.
///
/// Per dimension, the largest candidate satisfying the thread, shared
/// memory and register caps *and* the grid floor wins; when no candidate
/// reaches the floor, the smallest cap-satisfying candidate wins (grid
/// size is preferred over tile size).
#[allow(clippy::too_many_arguments)]
pub fn plan_tiles(
    dev: &DeviceModel,
    msg_len: usize,
    word_len: usize,
    alphabet: usize,
    space: &StateSpace,
    mode: StorageMode,
    widths: RealWidths,
    pipeline_depth: usize,
) -> Result<ExecutionPlan> {
    let q = alphabet as u64;
    let m_tau = space.frame.size() as u64;
    let m_plus = space.symbol.m_plus();
    let (gy_floor, gx_floor) = grid_floors(mode, dev.n_sm);

    let caps_ok = |phase: Phase, bx: u64, by: u64| -> bool {
        let threads = bx * by;
        threads <= dev.max_threads_per_block
            && shared_mem_required(phase, bx, by, word_len, m_plus, alphabet, m_tau as usize, widths)
                <= dev.shared_mem_per_sm
            && dev.regs_per_thread(phase) * threads <= dev.regs_per_sm
    };

    // Largest candidate passing the caps; the cap predicates are monotone
    // in tile size, so the passing set is downward closed.
    let pick = |phase: Phase, dim: u64, other: u64, fix_x: bool| -> Option<u64> {
        tile_candidates(dim, dev)
            .into_iter()
            .find(|&c| if fix_x { caps_ok(phase, c, other) } else { caps_ok(phase, other, c) })
    };
    // Largest candidate passing caps and reaching the grid floor; floors
    // relax as the tile shrinks, so this set is downward closed too.  When
    // the floor is unattainable, fall back to the smallest tile to
    // maximize the grid.
    let pick_with_floor = |phase: Phase, dim: u64, bx: u64, floor_ok: &dyn Fn(u64) -> bool| -> Option<u64> {
        let passing: Vec<u64> =
            tile_candidates(dim, dev).into_iter().filter(|&c| caps_ok(phase, bx, c)).collect();
        passing.iter().copied().find(|&c| floor_ok(div_ceil(dim, c))).or(passing.last().copied())
    };

    let bx_gamma = pick(Phase::Gamma, q, 1, true)
        .ok_or_else(|| Error::PlanInfeasible("gamma tile exceeds shared memory even at a single lane".into()))?;
    let gamma_floor = |gy: u64| match mode {
        StorageMode::Global => msg_len as u64 * gy >= gy_floor,
        StorageMode::Local => gy >= gy_floor,
    };
    let by_gamma = pick_with_floor(Phase::Gamma, m_tau, bx_gamma, &gamma_floor)
        .ok_or_else(|| Error::PlanInfeasible("gamma tile rows do not fit device caps".into()))?;
    let gy_gamma = div_ceil(m_tau, by_gamma);

    let bx_ab = pick(Phase::AlphaBeta, q, 1, true)
        .ok_or_else(|| Error::PlanInfeasible("alpha/beta tile exceeds device caps".into()))?;
    let by_ab = pick_with_floor(Phase::AlphaBeta, m_tau, bx_ab, &|gx| gx >= gx_floor)
        .ok_or_else(|| Error::PlanInfeasible("alpha/beta tile rows do not fit device caps".into()))?;
    let gx_ab = div_ceil(m_tau, by_ab);

    let bx_l = pick(Phase::Posterior, q, 1, true)
        .ok_or_else(|| Error::PlanInfeasible("posterior tile exceeds shared memory".into()))?;
    let gy_l = div_ceil(q, bx_l);

    let host = std::thread::available_parallelism().map(|n| n.get() as u64).unwrap_or(1);
    Ok(ExecutionPlan {
        mode,
        msg_len: msg_len as u64,
        alphabet: q,
        m_tau,
        bx_gamma,
        by_gamma,
        gy_gamma,
        bx_alpha_beta: bx_ab,
        by_alpha_beta: by_ab,
        gx_alpha_beta: gx_ab,
        bx_posterior: bx_l,
        gy_posterior: gy_l,
        shared_mem: [
            shared_mem_required(Phase::Gamma, bx_gamma, by_gamma, word_len, m_plus, alphabet, m_tau as usize, widths),
            shared_mem_required(Phase::AlphaBeta, bx_ab, by_ab, word_len, m_plus, alphabet, m_tau as usize, widths),
            shared_mem_required(Phase::Posterior, bx_l, 1, word_len, m_plus, alphabet, m_tau as usize, widths),
        ],
        pipeline_depth: pipeline_depth as u64,
        worker_count: (dev.n_sm * dev.max_resident_blocks).min(host),
    })
}

/// Re-check an emitted plan against every device cap and grid floor.
pub fn validate_plan(plan: &ExecutionPlan, dev: &DeviceModel) -> Result<()> {
    let (gy_floor, gx_floor) = grid_floors(plan.mode, dev.n_sm);
    for phase in [Phase::Gamma, Phase::AlphaBeta, Phase::Posterior] {
        let threads = plan.tile_threads(phase);
        if threads > dev.max_threads_per_block {
            return Err(Error::PlanInfeasible(format!("{phase:?}: {threads} threads exceed block cap")));
        }
        if plan.shared_mem(phase) > dev.shared_mem_per_sm {
            return Err(Error::PlanInfeasible(format!("{phase:?}: shared memory over cap")));
        }
        if dev.regs_per_thread(phase) * threads > dev.regs_per_sm {
            return Err(Error::PlanInfeasible(format!("{phase:?}: register file over cap")));
        }
    }
    // Warp-multiple rule: tile rows/lanes are warp multiples, the full
    // dimension when it is sub-warp, or the 1-lane fallback.
    let warpish = |v: u64, dim: u64| v == 1 || v % dev.warp_size == 0 || (v == dim && dim < dev.warp_size);
    for (v, dim) in [
        (plan.bx_gamma, plan.alphabet),
        (plan.by_gamma, plan.m_tau),
        (plan.bx_alpha_beta, plan.alphabet),
        (plan.by_alpha_beta, plan.m_tau),
        (plan.bx_posterior, plan.alphabet),
    ] {
        if !warpish(v, dim) {
            return Err(Error::PlanInfeasible(format!("tile side {v} violates the warp-multiple rule")));
        }
    }
    let gamma_grid_ok = match plan.mode {
        StorageMode::Global => plan.msg_len * plan.gy_gamma >= gy_floor,
        StorageMode::Local => plan.gy_gamma >= gy_floor,
    };
    // Floors are best-effort: they may be unattainable (e.g. M_tau rows
    // fewer than the floor), in which case the tile must be minimal.
    if !gamma_grid_ok && plan.by_gamma != 1 {
        return Err(Error::PlanInfeasible("gamma grid floor missed with a shrinkable tile".into()));
    }
    if plan.gx_alpha_beta < gx_floor && plan.by_alpha_beta != 1 {
        return Err(Error::PlanInfeasible("alpha/beta grid floor missed with a shrinkable tile".into()));
    }
    Ok(())
}

/// Occupancy: resident tiles per worker group bounded by block, shared
/// memory and register caps; active warps over the device warp cap.
pub fn occupancy(plan: &ExecutionPlan, dev: &DeviceModel, phase: Phase) -> f64 {
    let threads = plan.tile_threads(phase).max(1);
    let shm = plan.shared_mem(phase);
    let by_shm = if shm == 0 { u64::MAX } else { dev.shared_mem_per_sm / shm };
    let by_regs = dev.regs_per_sm / (dev.regs_per_thread(phase) * threads).max(1);
    let resident = dev.max_resident_blocks.min(by_shm).min(by_regs);
    let warps_per_tile = div_ceil(threads, dev.warp_size);
    ((resident * warps_per_tile) as f64 / dev.max_warps_per_sm as f64).min(1.0)
}

/// Usage under the wave model: the fraction of worker groups busy when the
/// grid executes in full waves of `nSM * concurrent_share` groups.
pub fn usage(grid_size: u64, n_sm: u64, concurrent_share: f64) -> f64 {
    if grid_size == 0 {
        return 0.0;
    }
    let share = n_sm as f64 * concurrent_share;
    let waves = (grid_size as f64 / share).ceil();
    grid_size as f64 / (waves * share)
}

/// Abstract per-phase work units, used to normalize measured times.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CostModel {
    pub gamma_per_thread: f64,
    pub gamma: f64,
    pub alpha_beta: f64,
    pub posterior: f64,
}

/// Per-thread gamma cost is the banded lattice area `n * M_n` minus the
/// corner cut by the lower corridor bound; totals scale by the number of
/// (position, symbol, state) triples.
pub fn cost_model(msg_len: usize, word_len: usize, alphabet: usize, space: &StateSpace) -> CostModel {
    let m_n = space.symbol.size() as f64;
    let m_minus = space.symbol.m_minus() as f64;
    let gamma_per_thread = word_len as f64 * m_n - m_minus * (m_minus - 1.0) / 2.0;
    let triples = (msg_len * alphabet) as f64 * space.frame.size() as f64;
    CostModel {
        gamma_per_thread,
        gamma: triples * gamma_per_thread,
        alpha_beta: triples * m_n,
        posterior: triples * m_n,
    }
}
