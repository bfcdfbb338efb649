//! Independent brute-force oracles.
//!
//! Each oracle recomputes a quantity the optimized code produces, by direct
//! enumeration over channel trajectories or messages, sharing no code with
//! the lattice or the forward-backward engine.  They are exponential-time
//! and guarded against oversized inputs; use them only for validation.

use std::collections::HashMap;

use crate::bits::Bit;
use crate::channel::{ChannelParams, DriftPmf};
use crate::codebook::Codebook;
use crate::decoder::{Posteriors, Priors};
use crate::{Error, Result};

const MAX_ORACLE_WORD: usize = 12;
const MAX_ORACLE_WINDOW: usize = 24;
const MAX_ORACLE_MESSAGES: f64 = 1e6;
const MAX_ORACLE_DRIFT_T: usize = 6;

/// `R(y|x)` by direct recursion over channel events, no lattice, no
/// memoization: per transmitted bit, enumerate `k = 0..=k_max` insertions
/// (each inserted bit must match the next received bit, weight `pi/2`)
/// followed by either a deletion or a transmission.
pub fn receiver_bruteforce(y: &[Bit], x: &[Bit], params: &ChannelParams, k_max: usize) -> Result<f64> {
    if x.len() > MAX_ORACLE_WORD || y.len() > MAX_ORACLE_WINDOW {
        return Err(Error::OracleGuard(format!(
            "receiver oracle limited to x <= {MAX_ORACLE_WORD}, y <= {MAX_ORACLE_WINDOW} bits (got {}, {})",
            x.len(),
            y.len()
        )));
    }
    Ok(events(y, x, 0, 0, params, k_max))
}

fn events(y: &[Bit], x: &[Bit], i: usize, j: usize, params: &ChannelParams, k_max: usize) -> f64 {
    if i == x.len() {
        return if j == y.len() { 1.0 } else { 0.0 };
    }
    let half_pi = params.pi() * 0.5;
    let mut total = 0.0;
    let mut weight = 1.0;
    for k in 0..=k_max {
        let jk = j + k;
        // After k (matching) insertions: delete, or transmit.
        total += weight * params.pd() * events(y, x, i + 1, jk, params, k_max);
        if jk < y.len() {
            let flip = if y[jk] == x[i] { 1.0 - params.ps() } else { params.ps() };
            total += weight * params.pt() * flip * events(y, x, i + 1, jk + 1, params, k_max);
            // A further insertion is only possible if it matches y.
            weight *= half_pi;
            if weight == 0.0 {
                break;
            }
        } else {
            break;
        }
    }
    total
}

/// Exact symbol posteriors by enumerating all `q^N` messages and applying
/// Bayes' rule with the brute-force receiver on whole frames.
pub fn posterior_bruteforce(
    received: &[Bit],
    cb: &Codebook,
    priors: &Priors,
    params: &ChannelParams,
    k_max: usize,
) -> Result<Posteriors> {
    let n_sym = cb.msg_len();
    let q = cb.alphabet();
    if (q as f64).powi(n_sym as i32) > MAX_ORACLE_MESSAGES {
        return Err(Error::OracleGuard(format!("posterior oracle limited to q^N <= {MAX_ORACLE_MESSAGES:.0}")));
    }
    if priors.msg_len() != n_sym || priors.alphabet() != q {
        return Err(Error::DimensionMismatch("priors do not match codebook".into()));
    }
    let mut l = vec![0.0f64; n_sym * q];
    let mut symbols = vec![0usize; n_sym];
    loop {
        let frame: Vec<Bit> = symbols.iter().enumerate().flat_map(|(i, &d)| cb.word_bits(i, d)).collect();
        let mut weight = receiver_bruteforce(received, &frame, params, k_max)?;
        for (i, &d) in symbols.iter().enumerate() {
            weight *= priors.get(i, d);
        }
        for (i, &d) in symbols.iter().enumerate() {
            l[i * q + d] += weight;
        }
        // Odometer over messages.
        let mut pos = n_sym;
        while pos > 0 {
            symbols[pos - 1] += 1;
            if symbols[pos - 1] < q {
                break;
            }
            symbols[pos - 1] = 0;
            pos -= 1;
        }
        if pos == 0 {
            break;
        }
    }
    for row in l.chunks_mut(q) {
        let sum: f64 = row.iter().sum();
        if sum <= 0.0 {
            return Err(Error::DecoderUnderflow(usize::MAX));
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Ok(Posteriors::from_rows(n_sym, q, l))
}

/// Drift distribution after `t` bits by enumerating event sequences,
/// independent of the dynamic-programming convolution.
pub fn drift_bruteforce(t: usize, params: &ChannelParams, k_max: usize) -> Result<DriftPmf> {
    if t > MAX_ORACLE_DRIFT_T {
        return Err(Error::OracleGuard(format!("drift oracle limited to t <= {MAX_ORACLE_DRIFT_T}")));
    }
    let mut mass: HashMap<i64, f64> = HashMap::new();
    let mut stack = vec![(0usize, 0i64, 1.0f64)];
    while let Some((bit, drift, w)) = stack.pop() {
        if bit == t {
            *mass.entry(drift).or_insert(0.0) += w;
            continue;
        }
        let mut pik = 1.0;
        for k in 0..=k_max as i64 {
            stack.push((bit + 1, drift + k - 1, w * pik * params.pd()));
            stack.push((bit + 1, drift + k, w * pik * params.pt()));
            pik *= params.pi();
            if pik == 0.0 {
                break;
            }
        }
    }
    let lo = *mass.keys().min().unwrap();
    let hi = *mass.keys().max().unwrap();
    let probs: Vec<f64> = (lo..=hi).map(|m| mass.get(&m).copied().unwrap_or(0.0)).collect();
    let total: f64 = probs.iter().sum();
    Ok(DriftPmf::from_parts(lo, probs, (1.0 - total).max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{drift_pmf, setup_rng, transmit};
    use crate::codebook::CodebookMode;
    use crate::lattice::receiver;

    fn p(pi: f64, pd: f64, ps: f64) -> ChannelParams {
        ChannelParams::new(pi, pd, ps).unwrap()
    }

    #[test]
    fn oracle_guards_trip() {
        let c = p(0.1, 0.1, 0.0);
        assert!(receiver_bruteforce(&[0; 30], &[0; 13], &c, 3).is_err());
        assert!(drift_bruteforce(7, &c, 3).is_err());
    }

    #[test]
    fn receiver_oracle_hand_values() {
        // Same cases the lattice tests pin down, via a different route.
        let c = p(0.1, 0.1, 0.0);
        assert!((receiver_bruteforce(&[0], &[0], &c, 8).unwrap() - 0.805).abs() < 1e-12);
        assert!((receiver_bruteforce(&[], &[0], &c, 8).unwrap() - 0.1).abs() < 1e-15);
        let expect = 0.1 * 0.05 * 0.05 + 0.8 * 0.05;
        assert!((receiver_bruteforce(&[0, 0], &[0], &c, 8).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn receiver_oracle_total_mass() {
        // Summing R over all received sequences of length <= n + k_max*n
        // bounded support: with matching-insertion convention, sum over y
        // of R(y|x) = [(pd + pt)(1 - (pi/2)*2) ...] -- verify numerically
        // against 1 minus the truncated insertion tail instead.
        let c = p(0.1, 0.15, 0.3);
        let x = [1, 0, 1];
        let k_max = 20;
        let mut total = 0.0;
        let max_len = x.len() + 9;
        for len in 0..=max_len {
            for yv in 0..(1u64 << len) {
                let y: Vec<Bit> = (0..len).map(|k| ((yv >> (len - 1 - k)) & 1) as Bit).collect();
                total += receiver_bruteforce(&y, &x, &c, k_max).unwrap();
            }
        }
        // Remaining mass is the probability of 10 or more insertions,
        // on the order of binom(12, 2) * pi^10.
        assert!((total - 1.0).abs() < 1e-7, "total {total}");
    }

    #[test]
    fn lattice_agrees_with_receiver_oracle() {
        let mut rng = setup_rng(13);
        for &(pi, pd, ps) in &[(0.05, 0.05, 0.02), (0.1, 0.0, 0.1), (0.0, 0.2, 0.3)] {
            let c = p(pi, pd, ps);
            for _ in 0..20 {
                let x: Vec<Bit> = (0..6).map(|_| rand::Rng::gen_range(&mut rng, 0..2u8)).collect();
                let y = transmit(&x, &c, &mut rng);
                if y.len() > MAX_ORACLE_WINDOW {
                    continue;
                }
                let fast = receiver(&y, &x, &c);
                let slow = receiver_bruteforce(&y, &x, &c, 40).unwrap();
                assert!((fast - slow).abs() <= 1e-12 * slow.max(1e-30), "pi={pi} pd={pd}: {fast} vs {slow}");
            }
        }
    }

    #[test]
    fn drift_oracle_matches_dp() {
        for &(pi, pd) in &[(0.1, 0.1), (0.2, 0.05), (0.0, 0.3)] {
            let c = p(pi, pd, 0.0);
            let k_max = 12;
            for t in 1..=4usize {
                let slow = drift_bruteforce(t, &c, k_max).unwrap();
                let fast = drift_pmf(t, &c, k_max).unwrap();
                let (lo, hi) = slow.support();
                for m in lo..=hi {
                    assert!((slow.prob(m) - fast.prob(m)).abs() < 1e-12, "t={t} m={m}");
                }
            }
        }
    }

    #[test]
    fn posterior_oracle_uniform_on_symmetric_code() {
        // Two complementary codewords, empty received frame, pd-only noise:
        // both messages equally likely.
        let cb = Codebook::from_words(1, 2, 2, CodebookMode::Varying, vec![0b00, 0b11]).unwrap();
        let c = p(0.0, 0.5, 0.0);
        let post = posterior_bruteforce(&[], &cb, &Priors::uniform(1, 2), &c, 4).unwrap();
        assert!((post.row(0)[0] - 0.5).abs() < 1e-15);
    }
}
