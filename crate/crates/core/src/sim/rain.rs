use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use super::{PacketEvent, SimConfig};
use crate::error::{Error, Result};
use crate::geometry::SpatialDensity;
use crate::loss_model::{ExternalInterference, Network, Policy, PowerDistribution};

/// Simulated interval: warmup, observed window, and one packet duration of
/// tail so packets near the end see all their interferers.
fn horizon(cfg: &SimConfig, b: f64) -> (f64, f64) {
    (-cfg.warmup, cfg.duration + b)
}

fn poisson_times<R: Rng>(rng: &mut R, rate: f64, start: f64, end: f64) -> impl Iterator<Item = f64> + '_ {
    let mut t = start;
    std::iter::from_fn(move || {
        if rate <= 0.0 {
            return None;
        }
        let gap: f64 = Exp1.sample(rng);
        t += gap / rate;
        (t < end).then_some(t)
    })
}

fn pick(cumulative: &[f64], u: f64) -> usize {
    cumulative
        .partition_point(|&c| c <= u)
        .min(cumulative.len() - 1)
}

/// Marked Poisson rain with intensity `Lambda_s(dx) x lambda_e dt` restricted
/// to the simulation disk: locations, fading and admission marks.
pub fn generate_rain(cfg: &SimConfig, net: &Network, policy: &Policy) -> Result<Vec<PacketEvent>> {
    let (density, ch, pathloss) = (&net.density, &net.channel, &net.pathloss);
    cfg.validate(ch.b)?;
    net.validate()?;
    policy.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (start, end) = horizon(cfg, ch.b);
    let domain = density.truncated(cfg.domain_radius);

    // rings of a radial density or individual sites, drawn by mass
    enum Source {
        Rings(Vec<(f64, f64)>),
        Sites(Vec<(f64, f64, u32)>),
    }
    let (weights, source) = match &domain {
        SpatialDensity::Radial { profile } => {
            let mut w = Vec::new();
            let mut rings = Vec::new();
            for (edge, &v) in profile.edges.windows(2).zip(&profile.values) {
                w.push(v * PI * (edge[1] * edge[1] - edge[0] * edge[0]));
                rings.push((edge[0], edge[1]));
            }
            (w, Source::Rings(rings))
        }
        SpatialDensity::Atomic { sites } => (
            sites.iter().map(|s| s.weight as f64).collect(),
            Source::Sites(
                sites
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (s.radius(), s.y.atan2(s.x), i as u32))
                    .collect(),
            ),
        ),
    };
    let total: f64 = weights.iter().sum();
    if total == 0.0 || ch.lambda_e == 0.0 {
        return Ok(Vec::new());
    }
    let mut acc = 0.0;
    let cumulative: Vec<f64> = weights
        .iter()
        .map(|w| {
            acc += w / total;
            acc
        })
        .collect();

    let rate = ch.lambda_e * total;
    let times: Vec<f64> = poisson_times(&mut rng, rate, start, end).collect();
    let mut events = Vec::with_capacity(times.len());
    for t in times {
        let k = pick(&cumulative, rng.random());
        let (r, angle, site) = match &source {
            Source::Rings(rings) => {
                let (a, b) = rings[k];
                let u: f64 = rng.random();
                let r = (a * a + u * (b * b - a * a)).sqrt();
                (r, rng.random::<f64>() * 2.0 * PI, None)
            }
            Source::Sites(sites) => {
                let (r, angle, i) = sites[k];
                (r, angle, Some(i))
            }
        };
        let h: f64 = Exp1.sample(&mut rng);
        let d = policy.admission(r);
        let admissible = d >= 1.0 || (d > 0.0 && rng.random::<f64>() < d);
        let mut ev = PacketEvent::arrival(t, ch.p_bar * pathloss.gain(r), h, admissible);
        ev.r = Some(r);
        ev.angle = angle;
        ev.site = site;
        events.push(ev);
    }
    Ok(events)
}

fn power_stream<R: Rng>(
    rng: &mut R,
    rate: f64,
    powers: &PowerDistribution,
    admissible: bool,
    start: f64,
    end: f64,
) -> Vec<PacketEvent> {
    let mut acc = 0.0;
    let cumulative: Vec<f64> = powers
        .atoms
        .iter()
        .map(|a| {
            acc += a.1;
            acc
        })
        .collect();
    let times: Vec<f64> = poisson_times(rng, rate, start, end).collect();
    times
        .into_iter()
        .map(|t| {
            let k = pick(&cumulative, rng.random::<f64>() * acc);
            let h: f64 = Exp1.sample(rng);
            PacketEvent::arrival(t, powers.atoms[k].0, h, admissible)
        })
        .collect()
}

/// Admissible Poisson arrivals of rate `lambda` with mean received powers drawn
/// from `powers`, plus an optional stream of non-admissible interferers.
pub fn generate_generic(
    cfg: &SimConfig,
    powers: &PowerDistribution,
    lambda: f64,
    b: f64,
    external: Option<&ExternalInterference>,
) -> Result<Vec<PacketEvent>> {
    cfg.validate(b)?;
    powers.validate()?;
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter("lambda must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (start, end) = horizon(cfg, b);
    let mut events = power_stream(&mut rng, lambda, powers, true, start, end);
    if let Some(ext) = external {
        ext.powers.validate()?;
        let jam = power_stream(&mut rng, ext.rate, &ext.powers, false, start, end);
        events.extend(jam);
        events.sort_by(|a, b| a.t.total_cmp(&b.t));
    }
    Ok(events)
}

/// Admissible arrivals at the given instants (unit power, unit fading); for
/// constructed scenarios and negative controls.
pub fn generate_schedule(times: &[f64]) -> Vec<PacketEvent> {
    let mut events: Vec<PacketEvent> = times
        .iter()
        .map(|&t| PacketEvent::arrival(t, 1.0, 1.0, true))
        .collect();
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    events
}
