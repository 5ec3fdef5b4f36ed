//! Cheapest mix of transmit-only sensors and cluster-heads meeting a minimum
//! information density.
//!
//! Cluster-heads sit on a triangular grid; each one receives the sensors of
//! its own cell, approximated by the disk of radius `R_max(lambda_c)`, under a
//! max-min policy built from the lower reception bound. A cluster-head also
//! senses by itself and delivers `lambda_e` packets per second reliably.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{SpatialDensity, WeightFunction};
use crate::loss_model::{p_free, BoundKind, Network, Policy};
use crate::policies::{maxmin_policy, maxmin_uniform_level, naive_radius};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Prices and the density requirement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParams {
    /// Price of a transmit-only sensor.
    pub c_s: f64,
    /// Price of a cluster-head.
    pub c_c: f64,
    /// Required information density (packets / (s m^2)).
    pub target_d: f64,
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_s > 0.0 && self.c_s.is_finite()) {
            return Err(Error::InvalidParameter("c_s must be positive".into()));
        }
        if !(self.c_c >= self.c_s && self.c_c.is_finite()) {
            return Err(Error::InvalidParameter("c_c must be at least c_s".into()));
        }
        if !(self.target_d > 0.0 && self.target_d.is_finite()) {
            return Err(Error::InvalidParameter("target_d must be positive".into()));
        }
        Ok(())
    }
}

/// Largest distance to the nearest cluster-head, `4 / sqrt(3 sqrt(3) lambda_c)`.
pub fn r_max(lambda_c: f64) -> f64 {
    4.0 / (lambda_c * 3.0 * SQRT3).sqrt()
}

/// Inverse of [`r_max`]: `16 / (3 sqrt(3) R^2)`.
pub fn lambda_c_for_radius(radius: f64) -> f64 {
    16.0 / (3.0 * SQRT3 * radius * radius)
}

/// Grid density written as `4 / (R^2 3 sqrt(3))`. It is a quarter of the
/// inverse of [`r_max`] and is kept only for comparison.
pub fn grid_density_from_radius(radius: f64) -> f64 {
    4.0 / (radius * radius * 3.0 * SQRT3)
}

/// Grid density written as `4 / (L^2 sqrt(3))` with `L` a grid length.
pub fn grid_density_from_spacing(spacing: f64) -> f64 {
    4.0 / (spacing * spacing * SQRT3)
}

/// Policy a cluster-head applies in its cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellPolicy {
    /// Max-min fair policy from the lower bound.
    MaxMin,
    /// Admit every sensor inside the noise-limited disk, which usually
    /// extends far beyond the cell.
    Naive,
}

fn cell_network(template: &Network, lambda_s: f64, radius: f64) -> Network {
    template.with_density(SpatialDensity::uniform(lambda_s, radius))
}

/// Density guaranteed everywhere in a cell of radius `radius` by the sensors.
pub fn cell_level(template: &Network, lambda_s: f64, radius: f64, policy: CellPolicy) -> Result<f64> {
    if lambda_s == 0.0 {
        return Ok(0.0);
    }
    match policy {
        CellPolicy::MaxMin => match maxmin_uniform_level(
            &cell_network(template, lambda_s, radius),
            radius,
            BoundKind::Lower,
        ) {
            Err(Error::MaxMinUndefined(_)) => Ok(0.0),
            other => other,
        },
        CellPolicy::Naive => {
            // the head admits its whole noise-limited disk, not only its cell
            let r0 = naive_radius(template)?;
            if r0 < radius {
                return Ok(0.0);
            }
            let net = cell_network(template, lambda_s, r0);
            let ch = &net.channel;
            let lambda = ch.lambda_e * lambda_s * std::f64::consts::PI * r0 * r0;
            let rim = net.bound_at_radius(radius, BoundKind::Lower)?;
            Ok(ch.lambda_e * lambda_s * p_free(lambda, ch.b) * rim)
        }
    }
}

/// Smallest cluster-head density meeting `target_d` with sensor density `lambda_s`.
pub fn required_lambda_c(
    template: &Network,
    lambda_s: f64,
    cost: &CostParams,
    policy: CellPolicy,
) -> Result<f64> {
    let lambda_e = template.channel.lambda_e;
    if !(lambda_e > 0.0) {
        return Err(Error::Infeasible("cluster-heads without traffic deliver nothing".into()));
    }
    if !(lambda_s >= 0.0) {
        return Err(Error::InvalidParameter("lambda_s must be non-negative".into()));
    }
    let target = cost.target_d;
    let heads_only = target / lambda_e;
    if lambda_s == 0.0 {
        return Ok(heads_only);
    }
    let ok = |lc: f64| -> Result<bool> {
        Ok(lambda_e * lc + cell_level(template, lambda_s, r_max(lc), policy)? >= target)
    };
    let (mut lo, mut hi) = (0.0f64, heads_only);
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSample {
    pub lambda_s: f64,
    pub lambda_c: f64,
    pub cost_per_area: f64,
}

/// Constitution and cost of the network along a sensor-density grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostCurve {
    pub policy: CellPolicy,
    pub samples: Vec<CostSample>,
    /// Index of the cheapest sample.
    pub optimum: usize,
    /// Cost of a network of cluster-heads only, `C_c target_d / lambda_e`.
    pub baseline: f64,
    /// `baseline / optimum cost`.
    pub gain: f64,
}

impl CostCurve {
    pub fn optimum_sample(&self) -> &CostSample {
        &self.samples[self.optimum]
    }

    /// Gain against the heads-only baseline when a head costs `ratio` sensors.
    pub fn gain_at_ratio(&self, ratio: f64, target_d: f64, lambda_e: f64) -> f64 {
        let baseline = ratio * target_d / lambda_e;
        let best = self
            .samples
            .iter()
            .map(|s| s.lambda_s + ratio * s.lambda_c)
            .fold(f64::INFINITY, f64::min);
        baseline / best
    }
}

/// Cost of every grid point, in grid order.
pub fn cost_sweep(
    template: &Network,
    lambda_s_grid: &[f64],
    cost: &CostParams,
    policy: CellPolicy,
) -> Result<CostCurve> {
    cost.validate()?;
    if lambda_s_grid.is_empty() {
        return Err(Error::InvalidParameter("empty sensor density grid".into()));
    }
    let results: Vec<Result<f64>> = lambda_s_grid
        .par_iter()
        .map(|&ls| required_lambda_c(template, ls, cost, policy))
        .collect();
    let mut samples = Vec::with_capacity(results.len());
    let mut first_err = None;
    for (&lambda_s, r) in lambda_s_grid.iter().zip(results) {
        match r {
            Ok(lambda_c) => samples.push(CostSample {
                lambda_s,
                lambda_c,
                cost_per_area: lambda_s * cost.c_s + lambda_c * cost.c_c,
            }),
            Err(e) if e.is_infeasible() => {
                first_err.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    if samples.is_empty() {
        return Err(first_err.unwrap_or_else(|| Error::Infeasible("no feasible grid point".into())));
    }
    let mut optimum = 0;
    for (k, s) in samples.iter().enumerate() {
        if s.cost_per_area < samples[optimum].cost_per_area {
            optimum = k;
        }
    }
    let baseline = cost.c_c * cost.target_d / template.channel.lambda_e;
    let gain = baseline / samples[optimum].cost_per_area;
    Ok(CostCurve { policy, samples, optimum, baseline, gain })
}

/// Lowest density delivered in a cell, re-evaluated under the exact model: the
/// cluster-head's own sensing plus the minimum of `rho` over the cell's
/// radii, sampled at `points` locations including the rim.
pub fn certify(template: &Network, sample: &CostSample, points: usize) -> Result<f64> {
    let own = template.channel.lambda_e * sample.lambda_c;
    if sample.lambda_s == 0.0 {
        return Ok(own);
    }
    let radius = r_max(sample.lambda_c);
    let net = cell_network(template, sample.lambda_s, radius);
    let sol = maxmin_policy(&net, &WeightFunction::constant(1.0), radius, BoundKind::Lower)?;
    let policy: &Policy = &sol.policy;
    let lambda = net.lambda_admissible(policy)?;
    let mut worst = f64::INFINITY;
    for k in 1..=points.max(1) {
        let r = radius * k as f64 / points.max(1) as f64;
        worst = worst.min(net.rho_with_lambda(r, policy, lambda)?.rho);
    }
    Ok(own + worst)
}

/// Gains of the max-min and naive networks over a price-ratio grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainPoint {
    pub ratio: f64,
    pub gain: f64,
    pub gain_naive: f64,
}

pub fn gain_curve(
    maxmin: &CostCurve,
    naive: &CostCurve,
    ratios: &[f64],
    target_d: f64,
    lambda_e: f64,
) -> Vec<GainPoint> {
    ratios
        .iter()
        .map(|&ratio| GainPoint {
            ratio,
            gain: maxmin.gain_at_ratio(ratio, target_d, lambda_e),
            gain_naive: naive.gain_at_ratio(ratio, target_d, lambda_e),
        })
        .collect()
}
