//! Admission policies: naive, weighted max-min fair, water-filling and the
//! coverage-optimal deterministic disk, with their radius solvers.
//!
//! Max-min and water-filling are built from a reception bound (lower or
//! upper) rather than from the exact `p_rec`, which makes them explicit. Built
//! from the lower bound they carry a guarantee on the exact model: the
//! achieved density (max-min) or throughput (water-filling) is at least the
//! value computed from the bound. The upper-bound variants give the matching
//! "no policy can do better" levels.

use std::cell::RefCell;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{SpatialDensity, WeightFunction};
use crate::loss_model::{p_free, BoundKind, Network, Policy, RadialTable};
use crate::quadrature::integrate_pieces;

/// Segments of the tabulated max-min admission function.
pub const MAXMIN_TABLE_SEGMENTS: usize = 4096;
const ARGMAX_SCAN_POINTS: usize = 512;
const WATERFILL_SCAN_POINTS: usize = 256;
const WATERFILL_QUANTILES: usize = 1024;
const WATERFILL_CELLS: usize = 4096;

/// Default inner edge of the sensing domain for radius searches (m).
pub const DEFAULT_R_MIN: f64 = 0.1;

fn next_up(x: f64) -> f64 {
    if x == 0.0 {
        f64::MIN_POSITIVE
    } else {
        f64::from_bits(x.to_bits() + 1)
    }
}

/// Largest `x` in `[lo, hi]` with `ok(x)`, assuming `ok(lo)` holds and `ok`
/// flips at most once.
fn bisect_largest<F: FnMut(f64) -> Result<bool>>(
    mut lo: f64,
    mut hi: f64,
    rel_tol: f64,
    mut ok: F,
) -> Result<f64> {
    while hi - lo > rel_tol * hi.abs().max(f64::MIN_POSITIVE) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Golden-section maximization of a unimodal `f` on `[a, b]`.
fn golden_max<F: FnMut(f64) -> Result<f64>>(
    mut a: f64,
    mut b: f64,
    rel_tol: f64,
    mut f: F,
) -> Result<(f64, f64)> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > rel_tol * b.abs().max(1e-300) {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}

/// Radius of the noise-limited disk `{P L(x) / W >= gamma}`.
pub fn naive_radius(net: &Network) -> Result<f64> {
    let ch = &net.channel;
    if ch.noise_w == 0.0 {
        return Err(Error::NaiveRadiusUndefined);
    }
    Ok(net.pathloss.radius_for_gain(ch.gamma * ch.noise_w / ch.p_bar))
}

/// Admit everything inside the noise-limited disk.
pub fn naive_policy(net: &Network) -> Result<Policy> {
    Ok(Policy::Indicator { radius: naive_radius(net)? })
}

fn require_density(net: &Network, radius: f64) -> Result<()> {
    match &net.density {
        SpatialDensity::Atomic { .. } => Err(Error::MaxMinUndefined(
            "the sensor measure has no density".into(),
        )),
        SpatialDensity::Radial { profile } => {
            let gap = profile
                .edges
                .windows(2)
                .zip(&profile.values)
                .any(|(w, &v)| w[0] < radius && v == 0.0);
            if gap || radius > profile.outer() {
                Err(Error::MaxMinUndefined(format!(
                    "sensor density vanishes inside the disk of radius {radius}"
                )))
            } else {
                Ok(())
            }
        }
    }
}

fn domain_breaks(net: &Network, weights: &WeightFunction, radius: f64) -> Vec<f64> {
    let mut b: Vec<f64> = net
        .density
        .breakpoints()
        .into_iter()
        .chain(weights.breakpoints().iter().copied())
        .filter(|&x| x > 0.0 && x < radius)
        .collect();
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// Constants of the max-min construction on a disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxMinLevel {
    /// `M = max D / (lambda_s p_b)` over the disk.
    pub m_const: f64,
    /// `I = int D / p_b dx` over the disk.
    pub i_const: f64,
    /// Location of the maximum defining `M`.
    pub argmax: f64,
}

impl MaxMinLevel {
    /// `1 / (B I + M / lambda_e)`, so that the achieved density is `D(x)` times it.
    pub fn scale(&self, lambda_e: f64, b: f64) -> f64 {
        if lambda_e == 0.0 {
            return 0.0;
        }
        lambda_e / (lambda_e * b * self.i_const + self.m_const)
    }
}

/// `M` and `I` of the max-min policy on `B(0, radius)`.
pub fn maxmin_level(
    net: &Network,
    weights: &WeightFunction,
    radius: f64,
    kind: BoundKind,
) -> Result<MaxMinLevel> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter(format!("domain radius must be positive, got {radius}")));
    }
    weights.validate()?;
    require_density(net, radius)?;
    let score = |r: f64| -> Result<f64> {
        let pb = net.bound_at_radius(r, kind)?;
        Ok(weights.value(r) / (net.density.intensity(r) * pb))
    };

    let breaks = domain_breaks(net, weights, radius);
    let mut grid: Vec<f64> = (0..ARGMAX_SCAN_POINTS)
        .map(|k| radius * k as f64 / (ARGMAX_SCAN_POINTS - 1) as f64)
        .chain(breaks.iter().copied())
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let values = grid.iter().map(|&r| score(r)).collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v >= values[best] {
            best = k;
        }
    }
    let (mut argmax, mut m) = (grid[best], values[best]);
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    if hi > lo {
        let (r, v) = golden_max(lo, hi, 1e-10, score)?;
        if v > m {
            argmax = r;
            m = v;
        }
    }
    if !m.is_finite() {
        return Err(Error::MaxMinUndefined(format!(
            "reception bound vanishes inside the disk of radius {radius}"
        )));
    }

    let area_failure = RefCell::new(None);
    let i_const = 2.0
        * PI
        * integrate_pieces(
            |r| match net.bound_at_radius(r, kind) {
                Ok(pb) => weights.value(r) / pb * r,
                Err(e) => {
                    area_failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            },
            0.0,
            radius,
            &breaks,
            &net.quad,
        )?;
    if let Some(e) = area_failure.into_inner() {
        return Err(e);
    }
    if !i_const.is_finite() {
        return Err(Error::MaxMinUndefined("weighted area integral diverges".into()));
    }
    Ok(MaxMinLevel { m_const: m, i_const, argmax })
}

/// Max-min fair policy with its constants.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxMinSolution {
    pub policy: Policy,
    pub m_const: f64,
    pub i_const: f64,
    pub argmax: f64,
    pub radius: f64,
    pub bound_kind: BoundKind,
    pub weights: WeightFunction,
    scale: f64,
}

impl MaxMinSolution {
    /// Guaranteed density `D(x) / (B I + M / lambda_e)`.
    pub fn rho_achieved(&self, r: f64) -> f64 {
        if r > self.radius {
            return 0.0;
        }
        self.weights.value(r) * self.scale
    }

    /// `1 / (B I + M / lambda_e)`.
    pub fn scale(&self) -> f64 {
        self.scale
    }
}

/// `d(x) = D(x) / (M lambda_s(x) p_b(x))` on `B(0, radius)`, tabulated.
pub fn maxmin_policy(
    net: &Network,
    weights: &WeightFunction,
    radius: f64,
    kind: BoundKind,
) -> Result<MaxMinSolution> {
    let level = maxmin_level(net, weights, radius, kind)?;
    let d = |r: f64| -> Result<f64> {
        let pb = net.bound_at_radius(r, kind)?;
        Ok((weights.value(r) / (level.m_const * net.density.intensity(r) * pb)).min(1.0))
    };
    let breaks = domain_breaks(net, weights, radius);
    let mut knots: Vec<f64> = (0..=MAXMIN_TABLE_SEGMENTS)
        .map(|k| radius * k as f64 / MAXMIN_TABLE_SEGMENTS as f64)
        .chain(breaks.iter().copied())
        .chain(std::iter::once(level.argmax))
        .collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();

    let mut radii = Vec::with_capacity(knots.len() + 2 * breaks.len());
    let mut values = Vec::with_capacity(radii.capacity());
    for &r in &knots {
        radii.push(r);
        values.push(if r == level.argmax { 1.0 } else { d(r)? });
        if breaks.contains(&r) {
            // right limit across a jump of D or lambda_s
            radii.push(r);
            values.push(d(next_up(r))?);
        }
    }
    let policy = Policy::Tabulated { table: RadialTable { radii, values } };
    policy.validate()?;
    Ok(MaxMinSolution {
        policy,
        m_const: level.m_const,
        i_const: level.i_const,
        argmax: level.argmax,
        radius,
        bound_kind: kind,
        weights: weights.clone(),
        scale: level.scale(net.channel.lambda_e, net.channel.b),
    })
}

/// Uniform max-min level `1 / (B I + M / lambda_e)` reachable on `B(0, radius)`
/// with constant weights.
pub fn maxmin_uniform_level(net: &Network, radius: f64, kind: BoundKind) -> Result<f64> {
    let level = maxmin_level(net, &WeightFunction::constant(1.0), radius, kind)?;
    Ok(level.scale(net.channel.lambda_e, net.channel.b))
}

/// Largest disk on which the max-min policy still guarantees the uniform
/// density `target` (packets / (s m^2)).
pub fn maxmin_max_radius(net: &Network, target: f64, kind: BoundKind, r_min: f64) -> Result<f64> {
    if !(target > 0.0) {
        return Err(Error::InvalidParameter("target density must be positive".into()));
    }
    let hi = net.density.support_radius();
    if !(r_min > 0.0 && r_min < hi) {
        return Err(Error::InvalidParameter(format!(
            "r_min must lie in (0, {hi}), got {r_min}"
        )));
    }
    if maxmin_uniform_level(net, r_min, kind)? < target {
        return Err(Error::Infeasible(format!(
            "target density {target} unreachable at any radius"
        )));
    }
    if maxmin_uniform_level(net, hi, kind)? >= target {
        return Ok(hi);
    }
    bisect_largest(r_min, hi, 1e-9, |r| Ok(maxmin_uniform_level(net, r, kind)? >= target))
}

/// Density at the rim of the deterministic disk policy `1(|x| <= radius)`.
pub fn cod_rim_density(net: &Network, radius: f64) -> Result<f64> {
    let pol = Policy::Indicator { radius };
    Ok(net.rho(radius, &pol)?.rho)
}

/// Coverage-optimal deterministic policy: the largest disk whose rim still
/// receives `target` under the exact model.
pub fn cod_policy(net: &Network, target: f64, r_min: f64) -> Result<(Policy, f64)> {
    if !(target > 0.0) {
        return Err(Error::InvalidParameter("target density must be positive".into()));
    }
    let mut hi = net.density.support_radius();
    if let Ok(r0) = naive_radius(net) {
        hi = hi.min(r0);
    }
    if !(r_min > 0.0 && r_min < hi) {
        return Err(Error::InvalidParameter(format!(
            "r_min must lie in (0, {hi}), got {r_min}"
        )));
    }
    if cod_rim_density(net, r_min)? < target {
        return Err(Error::Infeasible(format!(
            "target density {target} unreachable at any radius"
        )));
    }
    let radius = if cod_rim_density(net, hi)? >= target {
        hi
    } else {
        bisect_largest(r_min, hi, 1e-11, |r| Ok(cod_rim_density(net, r)? >= target))?
    };
    Ok((Policy::Indicator { radius }, radius))
}

/// Throughput of the indicator policy of a union of annuli, from a bound.
#[derive(Debug, Clone, Copy)]
struct RegionTerms {
    /// `lambda_e int lambda_s p_b / D dx`
    numerator: f64,
    /// `int lambda_s dx`
    mass: f64,
}

impl RegionTerms {
    fn value(&self, lambda_e: f64, b: f64) -> f64 {
        self.numerator / (1.0 + lambda_e * b * self.mass)
    }
}

fn region_terms(
    net: &Network,
    weights: &WeightFunction,
    intervals: &[(f64, f64)],
    kind: BoundKind,
) -> Result<RegionTerms> {
    let mut breaks = net.density.breakpoints();
    breaks.extend_from_slice(weights.breakpoints());
    let mut numerator = 0.0;
    let mut mass = 0.0;
    let failure = RefCell::new(None);
    for &(lo, hi) in intervals {
        if hi <= lo {
            continue;
        }
        numerator += net.density.radial_integral_within(
            |r| match net.bound_at_radius(r, kind) {
                Ok(pb) => pb / weights.value(r),
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            },
            lo,
            hi,
            &breaks,
            &net.quad,
        )?;
        mass += net.density.mass_within(hi) - net.density.mass_within(lo);
    }
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(RegionTerms { numerator: net.channel.lambda_e * numerator, mass })
}

/// Bound-based throughput of admitting exactly the annuli `intervals`.
pub fn region_throughput(
    net: &Network,
    weights: &WeightFunction,
    intervals: &[(f64, f64)],
    kind: BoundKind,
) -> Result<f64> {
    let t = region_terms(net, weights, intervals, kind)?;
    Ok(t.value(net.channel.lambda_e, net.channel.b))
}

/// Throughput-optimal level-set policy.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillSolution {
    /// Score threshold `theta*`; the region is where `p_b / D` exceeds it.
    pub theta_star: f64,
    /// Admission region as annuli `lo < r <= hi`.
    pub region: Vec<(f64, f64)>,
    /// Optimal bound-based weighted throughput.
    pub u_star: f64,
    pub bound_kind: BoundKind,
    /// Whether the score was radially non-increasing, giving a disk.
    pub disk: bool,
}

impl WaterfillSolution {
    pub fn policy(&self) -> Policy {
        Policy::Region { intervals: self.region.clone() }
    }

    /// Outer radius of the admission region.
    pub fn radius(&self) -> f64 {
        self.region.iter().map(|r| r.1).fold(0.0, f64::max)
    }
}

/// Water-filling policy on `B(0, radius)`: admit where the score `p_b / D`
/// is above the threshold maximizing the bound-based throughput.
///
/// Admitting a sensor at `x` adds `p_b(x) / D(x)` to the numerator of the
/// throughput and one sensor to the collision term of its denominator, so the
/// optimal region is a level set of `p_b / D` over the sensor locations. For a
/// homogeneous density this is the same set as the level set of
/// `lambda_s p_b / D`.
pub fn waterfill_policy(
    net: &Network,
    weights: &WeightFunction,
    radius: f64,
    kind: BoundKind,
) -> Result<WaterfillSolution> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter(format!("domain radius must be positive, got {radius}")));
    }
    weights.validate()?;
    let score = |r: f64| -> Result<f64> { Ok(net.bound_at_radius(r, kind)? / weights.value(r)) };
    let cells: Vec<f64> = (0..=WATERFILL_CELLS)
        .map(|k| radius * k as f64 / WATERFILL_CELLS as f64)
        .collect();
    let mids: Vec<f64> = cells.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let scores = mids.iter().map(|&r| score(r)).collect::<Result<Vec<_>>>()?;
    let populated: Vec<bool> = mids.iter().map(|&r| net.density.intensity(r) > 0.0).collect();
    let monotone = scores.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));

    if monotone {
        let u = |r: f64| region_throughput(net, weights, &[(0.0, r)], kind);
        let grid: Vec<f64> = (0..=WATERFILL_SCAN_POINTS)
            .map(|k| radius * k as f64 / WATERFILL_SCAN_POINTS as f64)
            .collect();
        let values = grid.iter().map(|&r| u(r)).collect::<Result<Vec<_>>>()?;
        let mut best = 0;
        for (k, &v) in values.iter().enumerate() {
            if v >= values[best] {
                best = k;
            }
        }
        let (mut r_star, mut u_star) = (grid[best], values[best]);
        let lo = grid[best.saturating_sub(1)];
        let hi = grid[(best + 1).min(grid.len() - 1)];
        if hi > lo && u_star > 0.0 {
            let (r, v) = golden_max(lo, hi, 1e-9, u)?;
            if v > u_star {
                r_star = r;
                u_star = v;
            }
        }
        let region = if r_star > 0.0 { vec![(0.0, r_star)] } else { Vec::new() };
        let theta_star = if r_star > 0.0 { score(r_star)? } else { scores[0] };
        return Ok(WaterfillSolution {
            theta_star,
            region,
            u_star,
            bound_kind: kind,
            disk: true,
        });
    }

    // level sets of a non-monotone score: sweep thresholds over its quantiles
    let mut sorted: Vec<f64> = scores
        .iter()
        .zip(&populated)
        .filter(|p| *p.1)
        .map(|p| *p.0)
        .collect();
    if sorted.is_empty() {
        return Ok(WaterfillSolution {
            theta_star: 0.0,
            region: Vec::new(),
            u_star: 0.0,
            bound_kind: kind,
            disk: false,
        });
    }
    sorted.sort_by(f64::total_cmp);
    let mut thetas: Vec<f64> = (0..WATERFILL_QUANTILES)
        .map(|q| sorted[q * (sorted.len() - 1) / (WATERFILL_QUANTILES - 1)])
        .collect();
    thetas.dedup();
    let mut best: Option<(f64, Vec<(f64, f64)>, f64)> = None;
    // below the smallest score the whole disk is admitted
    let candidates = std::iter::once(f64::NEG_INFINITY).chain(thetas);
    for theta in candidates {
        let mut region: Vec<(f64, f64)> = Vec::new();
        for (k, &s) in scores.iter().enumerate() {
            if s > theta && populated[k] {
                match region.last_mut() {
                    Some(last) if last.1 == cells[k] => last.1 = cells[k + 1],
                    _ => region.push((cells[k], cells[k + 1])),
                }
            }
        }
        let u = region_throughput(net, weights, &region, kind)?;
        if best.as_ref().is_none_or(|(_, _, bu)| u > *bu) {
            best = Some((theta, region, u));
        }
    }
    let (theta, region, u_star) = best.expect("at least one threshold is tried");
    let theta_star = if theta.is_finite() { theta } else { sorted[0] };
    Ok(WaterfillSolution {
        theta_star,
        region,
        u_star,
        bound_kind: kind,
        disk: false,
    })
}

/// Weighted throughput `U = int rho / D dx` over the disk with its bound variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Throughput {
    pub exact: f64,
    pub lower: f64,
    pub upper: f64,
}

/// `U`, `U_lower` and `U_upper` of `policy` over `B(0, radius)`.
pub fn total_throughput(
    net: &Network,
    policy: &Policy,
    weights: &WeightFunction,
    radius: f64,
) -> Result<Throughput> {
    let lambda = net.lambda_admissible(policy)?;
    let pf = p_free(lambda, net.channel.b);
    let base = |r: f64| {
        net.channel.lambda_e * net.density.intensity(r) * policy.admission(r) * pf
            / weights.value(r)
    };
    let mut breaks = policy.discontinuities();
    breaks.extend(net.density.breakpoints());
    breaks.extend_from_slice(weights.breakpoints());
    let failure = RefCell::new(None);
    let integral = |f: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
        let v = integrate_pieces(
            |r| {
                let w = base(r);
                if w == 0.0 {
                    return 0.0;
                }
                match f(r) {
                    Ok(p) => w * p * r,
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        0.0
                    }
                }
            },
            0.0,
            radius,
            &breaks,
            &net.quad,
        )?;
        Ok(2.0 * PI * v)
    };
    let exact = integral(&|r| net.p_rec_with_lambda(r, policy, lambda))?;
    let lower = integral(&|r| net.bound_at_radius(r, BoundKind::Lower))?;
    let upper = integral(&|r| net.bound_at_radius(r, BoundKind::Upper))?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(Throughput { exact, lower, upper })
}

/// Characteristic radii of the policies at a uniform target density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyRadii {
    pub naive: Option<f64>,
    pub maxmin_lower: f64,
    pub maxmin_upper: f64,
    pub cod: f64,
}

pub fn policy_radii(net: &Network, target: f64, r_min: f64) -> Result<PolicyRadii> {
    Ok(PolicyRadii {
        naive: naive_radius(net).ok(),
        maxmin_lower: maxmin_max_radius(net, target, BoundKind::Lower, r_min)?,
        maxmin_upper: maxmin_max_radius(net, target, BoundKind::Upper, r_min)?,
        cod: cod_policy(net, target, r_min)?.1,
    })
}
