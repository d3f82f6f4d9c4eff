use std::collections::BTreeMap;

use super::{BinKey, Ensemble, EnsembleState, Trajectory};
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapRecord {
    /// `state.step` at the time of the exchange: the number of completed
    /// Langevin steps.
    pub step: u64,
    pub time: f64,
    pub bin: BinKey,
    /// Id of the trajectory that moved from A to B.
    pub a_id: u64,
    /// Id of the trajectory that moved from B to A.
    pub b_id: u64,
    /// Mean speed of the bin, the eligibility threshold.
    pub threshold: f64,
    pub speed_a: f64,
    pub speed_b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExchangeOptions {
    /// Flip the spin of every trajectory that changes sub-ensemble.
    pub superposition_mode: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeOutcome {
    pub swaps: Vec<SwapRecord>,
    /// `Σ_bins |mean speed A − mean speed B|` over bins holding both.
    pub gap_before: f64,
    pub gap_after: f64,
}

#[derive(Clone, Copy)]
struct Member {
    index: usize,
    id: u64,
    speed: f64,
}

struct BinResult {
    swaps: Vec<(Member, Member)>,
    threshold: f64,
    gap_before: f64,
    gap_after: f64,
}

fn exchange_bin(a: &[Member], b: &[Member]) -> BinResult {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut sum_a: f64 = a.iter().map(|m| m.speed).sum();
    let mut sum_b: f64 = b.iter().map(|m| m.speed).sum();
    let threshold = (sum_a + sum_b) / (na + nb);
    if a.is_empty() || b.is_empty() {
        return BinResult {
            swaps: Vec::new(),
            threshold,
            gap_before: 0.0,
            gap_after: 0.0,
        };
    }
    let mut delta = sum_a / na - sum_b / nb;
    let gap_before = delta.abs();
    let k = 1.0 / na + 1.0 / nb;

    // Scan order: fastest A first, slowest B first, higher id first on ties.
    let mut ca: Vec<Member> = a.iter().copied().filter(|m| m.speed > threshold).collect();
    ca.sort_by(|x, y| y.speed.total_cmp(&x.speed).then(y.id.cmp(&x.id)));
    let mut cb: Vec<Member> = b.iter().copied().filter(|m| m.speed < threshold).collect();
    cb.sort_by(|x, y| x.speed.total_cmp(&y.speed).then(y.id.cmp(&x.id)));

    let mut swaps = Vec::new();
    while !ca.is_empty() && !cb.is_empty() {
        // For each A candidate the best partner has speed closest to
        // speed_a − delta/k; ties go to the earlier entry in scan order.
        let mut best: Option<(f64, usize, usize)> = None;
        for (i, ma) in ca.iter().enumerate() {
            let target = ma.speed - delta / k;
            let pos = cb.partition_point(|m| m.speed < target);
            let mut consider = |j: usize| {
                let v = (delta - k * (ma.speed - cb[j].speed)).abs();
                if best.is_none_or(|(bv, bi, bj)| v < bv || (v == bv && (i, j) < (bi, bj))) {
                    best = Some((v, i, j));
                }
            };
            if pos < cb.len() {
                consider(pos);
            }
            if pos > 0 {
                let s = cb[pos - 1].speed;
                consider(cb.partition_point(|m| m.speed < s));
            }
        }
        let (value, i, j) = best.expect("both candidate lists are nonempty");
        if !(value < delta.abs()) {
            break;
        }
        let ma = ca.remove(i);
        let mb = cb.remove(j);
        sum_a += mb.speed - ma.speed;
        sum_b += ma.speed - mb.speed;
        delta = sum_a / na - sum_b / nb;
        swaps.push((ma, mb));
    }
    BinResult {
        swaps,
        threshold,
        gap_before,
        gap_after: delta.abs(),
    }
}

/// Exchanges sub-ensemble labels inside each spatial bin so that the mean
/// speeds of A and B approach each other.
///
/// Within a bin, A members faster than the bin's mean speed are candidates to
/// move to B and B members slower than it to move to A. Pairs are swapped
/// greedily, each time taking the pair that brings the difference of the mean
/// speeds closest to zero, and only while that strictly shrinks it. Bins never
/// interact.
///
/// `perceived_speed(index, trajectory)` is the speed the procedure sees; pass
/// the true speed for undisturbed runs.
pub fn exchange_procedure<S>(
    state: &mut EnsembleState,
    opts: ExchangeOptions,
    exec: Execution,
    perceived_speed: S,
) -> ExchangeOutcome
where
    S: Fn(usize, &Trajectory) -> f64 + Sync + Send,
{
    let mut groups: BTreeMap<BinKey, (Vec<Member>, Vec<Member>)> = BTreeMap::new();
    for (index, t) in state.trajectories().iter().enumerate() {
        let m = Member {
            index,
            id: t.id,
            speed: perceived_speed(index, t),
        };
        let g = groups.entry(state.bins.key(&t.position)).or_default();
        match t.ensemble {
            Ensemble::A => g.0.push(m),
            Ensemble::B => g.1.push(m),
        }
    }
    let groups: Vec<_> = groups.into_iter().collect();
    let results = par::map(exec, &groups, |(_, (a, b))| exchange_bin(a, b));

    let (step, time) = (state.step, state.time);
    let trajectories = state.trajectories_mut();
    let mut out = ExchangeOutcome {
        swaps: Vec::new(),
        gap_before: 0.0,
        gap_after: 0.0,
    };
    for ((bin, _), r) in groups.iter().zip(results) {
        out.gap_before += r.gap_before;
        out.gap_after += r.gap_after;
        for (ma, mb) in r.swaps {
            for idx in [ma.index, mb.index] {
                let t = &mut trajectories[idx];
                t.ensemble = t.ensemble.other();
                if opts.superposition_mode {
                    t.spin = t.spin.flipped();
                }
            }
            out.swaps.push(SwapRecord {
                step,
                time,
                bin: *bin,
                a_id: ma.id,
                b_id: mb.id,
                threshold: r.threshold,
                speed_a: ma.speed,
                speed_b: mb.speed,
            });
        }
    }
    out
}
