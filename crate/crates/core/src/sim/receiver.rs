use serde::{Deserialize, Serialize};

use super::stats::{ks_exponential, Estimate, KsOutcome, RatioBatches};
use super::{PacketEvent, SimConfig};
use crate::error::{Error, Result};
use crate::loss_model::ChannelParams;

/// Per-annulus counters of one or more replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusBatches {
    pub r_lo: f64,
    pub r_hi: f64,
    /// Packets emitted from the annulus inside the window.
    pub emitted: u64,
    /// Successes per second per square metre.
    pub rate: RatioBatches,
    /// Successes per accepted packet.
    pub reception: RatioBatches,
}

/// Statistics of the observed window `[0, duration)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// Successful receptions per admissible arrival.
    pub pi: RatioBatches,
    /// Accepted per admissible arrival.
    pub p_free: RatioBatches,
    pub annuli: Vec<AnnulusBatches>,
    /// Idle time `T(0)` seen by each accepted packet (s).
    pub idle_gaps: Vec<f64>,
    pub packets: u64,
    pub admissible: u64,
    pub accepted: u64,
    pub successes: u64,
    /// Observed time summed over replications (s).
    pub observed: f64,
}

/// Received-packet rate of one annulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusRate {
    pub r_lo: f64,
    pub r_hi: f64,
    /// Packets per second per square metre; absent when nothing was emitted there.
    pub rho: Option<Estimate>,
    /// Success fraction of accepted packets; absent without accepted packets.
    pub reception: Option<Estimate>,
    pub accepted: f64,
    pub successes: f64,
}

impl SimResult {
    pub fn pi_hat(&self) -> Option<Estimate> {
        self.pi.estimate()
    }

    pub fn p_free_hat(&self) -> Option<Estimate> {
        self.p_free.estimate()
    }

    pub fn rho_hat(&self) -> Vec<AnnulusRate> {
        self.annuli
            .iter()
            .map(|a| AnnulusRate {
                r_lo: a.r_lo,
                r_hi: a.r_hi,
                rho: if a.emitted == 0 { None } else { a.rate.estimate() },
                reception: a.reception.estimate(),
                accepted: a.reception.denominator(),
                successes: a.reception.numerator(),
            })
            .collect()
    }

    /// Pools an independent replication into this one.
    pub fn merge(&mut self, other: &SimResult) -> Result<()> {
        if self.annuli.len() != other.annuli.len()
            || self
                .annuli
                .iter()
                .zip(&other.annuli)
                .any(|(a, b)| a.r_lo != b.r_lo || a.r_hi != b.r_hi)
        {
            return Err(Error::InvalidParameter("cannot merge different annulus grids".into()));
        }
        self.pi.merge(&other.pi);
        self.p_free.merge(&other.p_free);
        for (a, b) in self.annuli.iter_mut().zip(&other.annuli) {
            a.emitted += b.emitted;
            a.rate.merge(&b.rate);
            a.reception.merge(&b.reception);
        }
        self.idle_gaps.extend_from_slice(&other.idle_gaps);
        self.idle_gaps.sort_by(f64::total_cmp);
        self.packets += other.packets;
        self.admissible += other.admissible;
        self.accepted += other.accepted;
        self.successes += other.successes;
        self.observed += other.observed;
        Ok(())
    }
}

fn batch_of(t: f64, cfg: &SimConfig) -> Option<usize> {
    if !(0.0..cfg.duration).contains(&t) {
        return None;
    }
    Some(((t / cfg.duration * cfg.batches as f64) as usize).min(cfg.batches - 1))
}

/// Time-averaged power over `[t_n, t_n + B)` of every packet except `n`
/// overlapping it, as `(all, admissible only)`. Scans the neighbours of `n`
/// in the time-ordered stream.
fn window_interference(events: &[PacketEvent], n: usize, b: f64) -> (f64, f64) {
    let t = events[n].t;
    let (mut all, mut adm) = (0.0, 0.0);
    let mut add = |e: &PacketEvent| {
        let overlap = b - (e.t - t).abs();
        if overlap > 0.0 {
            let p = e.received() * overlap / b;
            all += p;
            if e.admissible {
                adm += p;
            }
        }
    };
    for e in events[..n].iter().rev() {
        if t - e.t >= b {
            break;
        }
        add(e);
    }
    for e in &events[n + 1..] {
        if e.t - t >= b {
            break;
        }
        add(e);
    }
    (all, adm)
}

/// Recomputes the interference of packet `n` by scanning every event.
pub fn brute_force_interference(events: &[PacketEvent], n: usize, b: f64) -> (f64, f64) {
    let t = events[n].t;
    let (mut all, mut adm) = (0.0, 0.0);
    for (j, e) in events.iter().enumerate() {
        if j == n {
            continue;
        }
        let overlap = (b - (e.t - t).abs()).max(0.0);
        let p = e.received() * overlap / b;
        all += p;
        if e.admissible {
            adm += p;
        }
    }
    (all, adm)
}

/// Runs the receiver over a time-ordered stream, filling in acceptance,
/// interference and success, and summarizes the observed window.
///
/// An admissible packet arriving at an idle receiver is accepted and keeps it
/// busy for `B`; a packet arriving exactly when a reception ends finds it
/// idle. Every other packet only interferes. An accepted packet is decoded
/// when `h P >= gamma (W + I)` with `I` the time-averaged power of all other
/// packets during its reception.
pub fn run_loss_system(
    events: &mut [PacketEvent],
    ch: &ChannelParams,
    cfg: &SimConfig,
) -> Result<SimResult> {
    ch.validate()?;
    cfg.validate(ch.b)?;
    if events.windows(2).any(|w| w[1].t < w[0].t) {
        return Err(Error::InvalidParameter("events must be time-ordered".into()));
    }
    let b = ch.b;
    let mut busy_until = f64::NEG_INFINITY;
    let mut last_start = f64::NEG_INFINITY;
    let mut idle_gaps = Vec::new();
    for e in events.iter_mut() {
        e.accepted = false;
        e.success = false;
        e.interference = 0.0;
        e.interference_admissible = 0.0;
        if e.admissible && e.t >= busy_until {
            assert!(e.t >= last_start + b, "receiver accepted overlapping packets");
            if busy_until.is_finite() && (0.0..cfg.duration).contains(&e.t) {
                idle_gaps.push(e.t - busy_until);
            }
            e.accepted = true;
            last_start = e.t;
            busy_until = e.t + b;
        }
    }
    for n in 0..events.len() {
        if !events[n].accepted {
            continue;
        }
        let (all, adm) = window_interference(events, n, b);
        let e = &mut events[n];
        e.interference = all;
        e.interference_admissible = adm;
        e.success = e.received() >= ch.gamma * (ch.noise_w + all);
    }
    let mut result = summarize(events, cfg);
    result.idle_gaps = idle_gaps;
    Ok(result)
}

fn summarize(events: &[PacketEvent], cfg: &SimConfig) -> SimResult {
    let k = cfg.batches;
    let bins = cfg.annulus_bins;
    let width = cfg.domain_radius / bins as f64;
    let batch_len = cfg.duration / k as f64;
    let mut annuli: Vec<AnnulusBatches> = (0..bins)
        .map(|i| {
            let (r_lo, r_hi) = (i as f64 * width, (i + 1) as f64 * width);
            let area = std::f64::consts::PI * (r_hi * r_hi - r_lo * r_lo);
            let mut rate = RatioBatches::with_batches(k);
            for batch in 0..k {
                rate.add(batch, 0.0, batch_len * area);
            }
            AnnulusBatches {
                r_lo,
                r_hi,
                emitted: 0,
                rate,
                reception: RatioBatches::with_batches(k),
            }
        })
        .collect();
    let mut pi = RatioBatches::with_batches(k);
    let mut p_free = RatioBatches::with_batches(k);
    let (mut packets, mut admissible, mut accepted, mut successes) = (0, 0, 0, 0);
    for e in events {
        let Some(batch) = batch_of(e.t, cfg) else { continue };
        packets += 1;
        let success = if e.success { 1.0 } else { 0.0 };
        if e.admissible {
            admissible += 1;
            pi.add(batch, success, 1.0);
            p_free.add(batch, if e.accepted { 1.0 } else { 0.0 }, 1.0);
        }
        accepted += e.accepted as u64;
        successes += e.success as u64;
        if let Some(r) = e.r {
            let i = ((r / width) as usize).min(bins - 1);
            let a = &mut annuli[i];
            a.emitted += 1;
            a.rate.add(batch, success, 0.0);
            if e.accepted {
                a.reception.add(batch, success, 1.0);
            }
        }
    }
    SimResult {
        pi,
        p_free,
        annuli,
        idle_gaps: Vec::new(),
        packets,
        admissible,
        accepted,
        successes,
        observed: cfg.duration,
    }
}

/// Per-annulus received-packet rate of a processed stream.
pub fn estimate_rho(events: &[PacketEvent], cfg: &SimConfig) -> Vec<AnnulusRate> {
    summarize(events, cfg).rho_hat()
}

/// Which interferers enter the conditional Laplace estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceScope {
    /// Admissible packets only; compares with `L_1 L_2`.
    Admissible,
    /// Every packet; compares with `L_1 L_2 L_JB`.
    All,
}

/// Per-batch sums of `exp(-xi I)` over accepted packets of the window.
pub fn conditional_laplace_batches(
    events: &[PacketEvent],
    cfg: &SimConfig,
    xi: f64,
    scope: InterferenceScope,
) -> RatioBatches {
    let mut out = RatioBatches::with_batches(cfg.batches);
    for e in events.iter().filter(|e| e.accepted) {
        let Some(batch) = batch_of(e.t, cfg) else { continue };
        let i = match scope {
            InterferenceScope::Admissible => e.interference_admissible,
            InterferenceScope::All => e.interference,
        };
        let v = if xi == 0.0 { 1.0 } else { (-xi * i).exp() };
        out.add(batch, v, 1.0);
    }
    out
}

/// Empirical Laplace transform of the interference seen by accepted packets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceEstimate {
    pub estimate: Option<Estimate>,
    /// Set when fewer than 1000 accepted packets contributed.
    pub low_sample: bool,
}

pub fn estimate_conditional_laplace(
    events: &[PacketEvent],
    cfg: &SimConfig,
    xi: f64,
    scope: InterferenceScope,
) -> LaplaceEstimate {
    laplace_from_batches(&conditional_laplace_batches(events, cfg, xi, scope))
}

pub fn laplace_from_batches(batches: &RatioBatches) -> LaplaceEstimate {
    LaplaceEstimate {
        estimate: batches.estimate(),
        low_sample: batches.denominator() < 1000.0,
    }
}

/// Idle times `T(0)` seen by accepted packets of the window, tested against
/// `Exp(lambda)`.
pub fn idle_gap_test(events: &[PacketEvent], b: f64, cfg: &SimConfig, lambda: f64) -> KsOutcome {
    let mut gaps = Vec::new();
    let mut busy_until = f64::NEG_INFINITY;
    for e in events.iter().filter(|e| e.accepted) {
        if busy_until.is_finite() && (0.0..cfg.duration).contains(&e.t) {
            gaps.push(e.t - busy_until);
        }
        busy_until = e.t + b;
    }
    ks_exponential(&gaps, lambda)
}
