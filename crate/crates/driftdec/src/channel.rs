//! BSID channel model: parameters, channel simulation, exact drift
//! distribution and state-space limit selection.
//!
//! Per input bit the channel repeats one of three events: insertion with
//! probability `pi` (a uniformly random bit is emitted and the same input
//! bit is considered again), deletion with probability `pd` (the input bit
//! is discarded), or transmission with probability `pt = 1 - pi - pd`
//! (the input bit is emitted, flipped with probability `ps`).  The *drift*
//! after `t` input bits is the number of received bits minus `t`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::bits::Bit;
use crate::numeric::pairwise_sum;
use crate::{Error, Result};

/// Values below this are dropped from the drift pmf support; the dropped
/// mass is accounted to the truncation loss.
const PMF_TRIM: f64 = 1e-300;

/// BSID channel event probabilities.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ChannelParams {
    pi: f64,
    pd: f64,
    ps: f64,
    pt: f64,
}

impl ChannelParams {
    /// `pt` is derived as `1 - pi - pd`.  A channel with `pt == 0` can be
    /// constructed (it is a legitimate all-delete/insert channel for
    /// simulation) but is rejected by decoder-facing configuration.
    pub fn new(pi: f64, pd: f64, ps: f64) -> Result<Self> {
        for (name, v) in [("pi", pi), ("pd", pd), ("ps", ps)] {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if pi + pd > 1.0 {
            return Err(Error::InvalidParams(format!("pi + pd = {} exceeds 1", pi + pd)));
        }
        Ok(Self { pi, pd, ps, pt: 1.0 - pi - pd })
    }

    pub fn pi(&self) -> f64 {
        self.pi
    }
    pub fn pd(&self) -> f64 {
        self.pd
    }
    pub fn ps(&self) -> f64 {
        self.ps
    }
    pub fn pt(&self) -> f64 {
        self.pt
    }

    /// A usable channel for decoding must transmit with nonzero probability.
    pub fn require_usable(&self) -> Result<()> {
        if self.pt <= 0.0 {
            return Err(Error::InvalidParams("pi + pd = 1 leaves pt = 0; channel cannot transmit".into()));
        }
        Ok(())
    }

    /// Smallest `k` with `pi^k < 1e-15`, capped at 64.  Beyond this many
    /// insertions per bit the geometric tail is negligible at double
    /// precision.
    pub fn insertion_k_max(&self) -> usize {
        if self.pi == 0.0 {
            return 1;
        }
        let mut p = 1.0;
        for k in 0..64 {
            if p < 1e-15 {
                return k;
            }
            p *= self.pi;
        }
        64
    }
}

/// Diagonal transmission weight: probability that bit `y` is received when
/// `x` is transmitted (not inserted or deleted).
pub fn q_metric(y: Bit, x: Bit, params: &ChannelParams) -> f64 {
    debug_assert!(y <= 1 && x <= 1);
    if y == x {
        params.pt() * (1.0 - params.ps())
    } else {
        params.pt() * params.ps()
    }
}

/// Inclusive drift interval `[m_minus, m_plus]` for a transmitted segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct DriftBounds {
    m_minus: i64,
    m_plus: i64,
}

impl DriftBounds {
    pub fn new(m_minus: i64, m_plus: i64) -> Result<Self> {
        if m_minus > 0 || m_plus < 0 {
            return Err(Error::InvalidParams(format!(
                "drift bounds [{m_minus}, {m_plus}] must contain 0"
            )));
        }
        Ok(Self { m_minus, m_plus })
    }

    pub fn m_minus(&self) -> i64 {
        self.m_minus
    }
    pub fn m_plus(&self) -> i64 {
        self.m_plus
    }

    /// Number of states `M = m_plus - m_minus + 1`.
    pub fn size(&self) -> usize {
        (self.m_plus - self.m_minus + 1) as usize
    }

    pub fn contains(&self, m: i64) -> bool {
        (self.m_minus..=self.m_plus).contains(&m)
    }

    /// Array index for drift `m`; caller must check `contains` first.
    pub fn index_of(&self, m: i64) -> usize {
        debug_assert!(self.contains(m));
        (m - self.m_minus) as usize
    }

    pub fn drift_at(&self, idx: usize) -> i64 {
        self.m_minus + idx as i64
    }

    pub fn iter(&self) -> impl Iterator<Item = i64> {
        self.m_minus..=self.m_plus
    }
}

/// Drift bounds at the two scales the decoder works with: per `n`-bit
/// codeword and per `tau`-bit frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct StateSpace {
    pub symbol: DriftBounds,
    pub frame: DriftBounds,
}

impl StateSpace {
    pub fn new(symbol: DriftBounds, frame: DriftBounds) -> Result<Self> {
        if frame.m_minus > symbol.m_minus || frame.m_plus < symbol.m_plus {
            return Err(Error::InvalidParams(format!(
                "frame bounds [{}, {}] must cover symbol bounds [{}, {}]",
                frame.m_minus, frame.m_plus, symbol.m_minus, symbol.m_plus
            )));
        }
        Ok(Self { symbol, frame })
    }

    /// Derive both scales from the channel via the exclusion probability.
    ///
    /// `pr` budgets the whole trajectory: the decoder tracks the drift at
    /// every symbol boundary, so the per-boundary allowance is `pr` split
    /// over the `N + 1` boundaries (union bound).  The frame-scale bounds
    /// come from the widest boundary (the frame end).
    pub fn for_code(word_len: usize, frame_len: usize, params: &ChannelParams, pr: f64) -> Result<Self> {
        let boundaries = (frame_len / word_len.max(1) + 1) as f64;
        let pr = pr / boundaries;
        let symbol = compute_state_limits(word_len, params, pr)?;
        let frame = compute_state_limits(frame_len, params, pr)?;
        // Coverage at frame scale can be narrower than at symbol scale for
        // short frames; widen to preserve the containment invariant.
        let frame = DriftBounds::new(frame.m_minus.min(symbol.m_minus), frame.m_plus.max(symbol.m_plus))?;
        Self::new(symbol, frame)
    }
}

/// Exact drift distribution after `t` input bits.
#[derive(Debug, Clone)]
pub struct DriftPmf {
    offset: i64,
    probs: Vec<f64>,
    truncation_loss: f64,
}

impl DriftPmf {
    pub(crate) fn from_parts(offset: i64, probs: Vec<f64>, truncation_loss: f64) -> Self {
        Self { offset, probs, truncation_loss }
    }

    pub fn prob(&self, m: i64) -> f64 {
        let idx = m - self.offset;
        if idx < 0 || idx as usize >= self.probs.len() {
            0.0
        } else {
            self.probs[idx as usize]
        }
    }

    /// Inclusive support interval.
    pub fn support(&self) -> (i64, i64) {
        (self.offset, self.offset + self.probs.len() as i64 - 1)
    }

    pub fn total_mass(&self) -> f64 {
        pairwise_sum(&self.probs)
    }

    pub fn truncation_loss(&self) -> f64 {
        self.truncation_loss
    }

    pub fn mass_in(&self, lo: i64, hi: i64) -> f64 {
        let (slo, shi) = self.support();
        let lo = lo.max(slo);
        let hi = hi.min(shi);
        if lo > hi {
            return 0.0;
        }
        let a = (lo - self.offset) as usize;
        let b = (hi - self.offset) as usize;
        pairwise_sum(&self.probs[a..=b])
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.probs.iter().enumerate().map(|(i, &p)| (self.offset + i as i64, p))
    }
}

/// Exact drift pmf by dynamic programming over input bits.
///
/// Per bit, the drift changes by `k - 1` with probability `pi^k * pd`
/// (k insertions then a deletion) and by `k` with probability `pi^k * pt`
/// (k insertions then a transmission), for `k = 0..=k_max`.
pub fn drift_pmf(t: usize, params: &ChannelParams, k_max: usize) -> Result<DriftPmf> {
    // Per-bit step kernel over drift changes [-1, k_max].
    let mut kernel = vec![0.0f64; k_max + 2];
    let mut pik = 1.0;
    for k in 0..=k_max {
        kernel[k] += pik * params.pd(); // k insertions, then delete: change k - 1
        kernel[k + 1] += pik * params.pt(); // k insertions, then transmit: change k
        pik *= params.pi();
    }
    // kernel[j] is the probability of drift change j - 1.

    let mut offset = 0i64;
    let mut probs = vec![1.0f64];
    let mut trimmed = 0.0f64;
    for _ in 0..t {
        let mut next = vec![0.0f64; probs.len() + k_max + 1];
        for (i, &p) in probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (j, &kp) in kernel.iter().enumerate() {
                if kp != 0.0 {
                    next[i + j] += p * kp;
                }
            }
        }
        offset -= 1;
        // Trim the vanishing tails so long frames stay tractable.
        let lo = next.iter().position(|&p| p >= PMF_TRIM);
        match lo {
            None => {
                trimmed += next.iter().sum::<f64>();
                probs = vec![0.0];
                // keep offset meaningful; all mass lost to trimming
            }
            Some(lo) => {
                let hi = next.iter().rposition(|&p| p >= PMF_TRIM).unwrap();
                trimmed += next[..lo].iter().sum::<f64>() + next[hi + 1..].iter().sum::<f64>();
                offset += lo as i64;
                probs = next[lo..=hi].to_vec();
            }
        }
    }
    let total = pairwise_sum(&probs);
    let truncation_loss = (1.0 - total).max(0.0).max(trimmed);
    Ok(DriftPmf { offset, probs, truncation_loss })
}

/// Smallest drift interval containing 0 whose complement has probability
/// below `pr`, grown outward from 0 one endpoint at a time.  At each step
/// the side with more excluded mass is extended; on a tie the positive
/// side is extended.
pub fn compute_state_limits(t: usize, params: &ChannelParams, pr: f64) -> Result<DriftBounds> {
    if !(0.0 < pr && pr < 1.0) {
        return Err(Error::InvalidParams(format!("exclusion probability {pr} outside (0, 1)")));
    }
    let pmf = drift_pmf(t, params, params.insertion_k_max())?;
    if pmf.truncation_loss() >= pr {
        return Err(Error::InvalidParams(format!(
            "pmf truncation loss {} >= exclusion probability {pr}",
            pmf.truncation_loss()
        )));
    }
    let (slo, shi) = pmf.support();
    let mut lo = 0i64;
    let mut hi = 0i64;
    let mut left = pmf.mass_in(slo, -1);
    let mut right = pmf.mass_in(1, shi);
    while left + right >= pr {
        if left > right && lo > slo {
            lo -= 1;
            left -= pmf.prob(lo);
        } else {
            hi += 1;
            right -= pmf.prob(hi);
        }
    }
    DriftBounds::new(lo, hi)
}

/// Pass a bit sequence through the channel.  The literal per-time-step
/// event loop: insertion (emit random bit, stay), deletion (advance), or
/// transmission (emit, flip with probability `ps`, advance).
pub fn transmit<R: Rng + ?Sized>(input: &[Bit], params: &ChannelParams, rng: &mut R) -> Vec<Bit> {
    let mut out = Vec::with_capacity(input.len() + input.len() / 8 + 4);
    for &bit in input {
        loop {
            let u: f64 = rng.gen();
            if u < params.pi() {
                out.push(rng.gen_range(0..2u8));
            } else if u < params.pi() + params.pd() {
                break;
            } else {
                let flipped = rng.gen::<f64>() < params.ps();
                out.push(if flipped { bit ^ 1 } else { bit });
                break;
            }
        }
    }
    out
}

/// Independent per-frame random stream, reproducible regardless of the
/// order frames are executed in.
pub fn frame_rng(master_seed: u64, frame_index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    // Stream 0 is reserved for setup (codebook generation).
    rng.set_stream(frame_index.wrapping_add(1));
    rng
}

/// Setup stream (codebook generation and similar one-off draws).
pub fn setup_rng(master_seed: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(0);
    rng
}
