//! Path loss, radial sensor densities and the radial integrals every
//! analytical quantity is built from.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_pieces, QuadConfig};

/// Distance attenuation `L(r) = kappa * r^(-eta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLoss {
    pub kappa: f64,
    pub eta: f64,
}

impl PathLoss {
    pub fn new(kappa: f64, eta: f64) -> Result<Self> {
        let pl = Self { kappa, eta };
        pl.validate()?;
        Ok(pl)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidParameter("kappa must be positive".into()));
        }
        // eta <= 2 makes the interference integrals diverge on unbounded supports
        if !(self.eta > 2.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter("eta must exceed 2".into()));
        }
        Ok(())
    }

    pub fn attenuation(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!(
                "attenuation needs a positive distance, got {r}"
            )));
        }
        Ok(self.gain(r))
    }

    /// Unchecked `kappa * r^(-eta)`; infinite at `r = 0`.
    #[inline]
    pub fn gain(&self, r: f64) -> f64 {
        self.kappa * r.powf(-self.eta)
    }

    /// Distance at which the attenuation equals `gain`.
    pub fn radius_for_gain(&self, gain: f64) -> f64 {
        (self.kappa / gain).powf(1.0 / self.eta)
    }
}

/// `phi(u) = 1 - log(1 + u) / u`, extended by continuity with `phi(0) = 0`.
pub fn phi(u: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(Error::Domain(format!("phi needs u >= 0, got {u}")));
    }
    Ok(phi_kernel(u))
}

/// Unchecked [`phi`] for hot loops; `u` must be non-negative.
#[inline]
pub fn phi_kernel(u: f64) -> f64 {
    if u < 1e-4 {
        u * (0.5 - u * (1.0 / 3.0 - u * (0.25 - u * 0.2)))
    } else if u.is_finite() {
        1.0 - u.ln_1p() / u
    } else {
        1.0
    }
}

/// `1 - log(1 + u t) / u` for `t` in `[0, 1]`, written as
/// `(1 - t) + t * phi(u t)` so that it stays accurate for small `u`.
#[inline]
pub fn one_minus_log_kernel(u: f64, t: f64) -> f64 {
    (1.0 - t) + t * phi_kernel(u * t)
}

/// Piecewise-constant radial profile. Piece `i` covers `(edges[i], edges[i+1]]`
/// (the first piece also contains `edges[0]`); values at a breakpoint come from
/// the left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialStep {
    pub edges: Vec<f64>,
    pub values: Vec<f64>,
}

impl RadialStep {
    pub fn constant(value: f64, radius: f64) -> Self {
        Self {
            edges: vec![0.0, radius],
            values: vec![value],
        }
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        if self.edges.len() != self.values.len() + 1 || self.values.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "{what}: need one more edge than values"
            )));
        }
        if self.edges[0] != 0.0 {
            return Err(Error::InvalidParameter(format!("{what}: edges must start at 0")));
        }
        if self.edges.windows(2).any(|w| !(w[1] > w[0])) || !self.outer().is_finite() {
            return Err(Error::InvalidParameter(format!(
                "{what}: edges must be finite and strictly increasing"
            )));
        }
        if self.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "{what}: values must be finite and non-negative"
            )));
        }
        Ok(())
    }

    pub fn outer(&self) -> f64 {
        *self.edges.last().expect("validated step has edges")
    }

    /// Value at `r`; zero beyond the outer edge.
    pub fn value(&self, r: f64) -> f64 {
        if r < 0.0 || r > self.outer() {
            return 0.0;
        }
        // first edge >= r closes the piece that holds r
        let idx = self.edges[1..].partition_point(|&e| e < r);
        self.values[idx.min(self.values.len() - 1)]
    }

    /// Value at `r`, holding the last piece constant beyond the outer edge.
    pub fn value_extended(&self, r: f64) -> f64 {
        if r > self.outer() {
            *self.values.last().expect("validated step has values")
        } else {
            self.value(r)
        }
    }

    pub fn interior_breaks(&self) -> &[f64] {
        &self.edges[1..self.edges.len() - 1]
    }

    fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.edges
            .windows(2)
            .zip(&self.values)
            .map(|(w, &v)| (w[0], w[1], v))
    }
}

/// A point sensor location with multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Site {
    pub x: f64,
    pub y: f64,
    pub weight: u32,
}

impl Site {
    pub fn radius(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Mean number of sensors per area element around the receiver at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpatialDensity {
    /// Sensors per m^2 as a function of radius, compactly supported.
    Radial { profile: RadialStep },
    /// Fixed emitters.
    Atomic { sites: Vec<Site> },
}

impl SpatialDensity {
    /// Homogeneous density on the disk of radius `radius`.
    pub fn uniform(lambda_s: f64, radius: f64) -> Self {
        SpatialDensity::Radial {
            profile: RadialStep::constant(lambda_s, radius),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SpatialDensity::Radial { profile } => profile.validate("density"),
            SpatialDensity::Atomic { sites } => {
                if sites.is_empty() {
                    return Err(Error::InvalidParameter("atomic density needs sites".into()));
                }
                for s in sites {
                    if s.weight < 1 {
                        return Err(Error::InvalidParameter("site weights must be >= 1".into()));
                    }
                    if !(s.radius() > 0.0 && s.radius().is_finite()) {
                        return Err(Error::InvalidParameter(
                            "sites must lie at a positive finite distance from the receiver".into(),
                        ));
                    }
                }
                Ok(())
            }
        }
    }

    /// `lambda_s(r)`; zero for atomic measures, which have no density.
    pub fn intensity(&self, r: f64) -> f64 {
        match self {
            SpatialDensity::Radial { profile } => profile.value(r),
            SpatialDensity::Atomic { .. } => 0.0,
        }
    }

    pub fn support_radius(&self) -> f64 {
        match self {
            SpatialDensity::Radial { profile } => profile.outer(),
            SpatialDensity::Atomic { sites } => {
                sites.iter().map(Site::radius).fold(0.0, f64::max)
            }
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            SpatialDensity::Radial { profile } => profile.interior_breaks().to_vec(),
            SpatialDensity::Atomic { .. } => Vec::new(),
        }
    }

    /// The same density cut off beyond `radius`.
    pub fn truncated(&self, radius: f64) -> Self {
        match self {
            SpatialDensity::Radial { profile } => {
                let mut edges = vec![0.0];
                let mut values = Vec::new();
                for (a, b, v) in profile.pieces() {
                    if a >= radius {
                        break;
                    }
                    edges.push(b.min(radius));
                    values.push(v);
                }
                SpatialDensity::Radial {
                    profile: RadialStep { edges, values },
                }
            }
            SpatialDensity::Atomic { sites } => SpatialDensity::Atomic {
                sites: sites.iter().copied().filter(|s| s.radius() <= radius).collect(),
            },
        }
    }

    /// Total sensor count `Lambda_s(B(0, radius))`.
    pub fn mass_within(&self, radius: f64) -> f64 {
        match self {
            SpatialDensity::Radial { profile } => profile
                .pieces()
                .filter(|&(a, _, _)| a < radius)
                .map(|(a, b, v)| v * PI * (b.min(radius).powi(2) - a * a))
                .sum(),
            SpatialDensity::Atomic { sites } => sites
                .iter()
                .filter(|s| s.radius() <= radius)
                .map(|s| s.weight as f64)
                .sum(),
        }
    }

    /// `integral of f(|x|) Lambda_s(dx)` over the whole support.
    pub fn radial_integral<F: Fn(f64) -> f64>(&self, f: F, cfg: &QuadConfig) -> Result<f64> {
        self.radial_integral_within(f, 0.0, f64::INFINITY, &[], cfg)
    }

    /// `integral of f(|x|) Lambda_s(dx)` over the annulus `lo < |x| <= hi`.
    ///
    /// Radial measures use `2 pi * integral f(r) lambda_s(r) r dr`, split at the
    /// density breakpoints and at `breaks` (discontinuities or sharp features of
    /// `f`). `f` is never sampled at `r = 0`. Atomic measures sum exactly.
    pub fn radial_integral_within<F: Fn(f64) -> f64>(
        &self,
        f: F,
        lo: f64,
        hi: f64,
        breaks: &[f64],
        cfg: &QuadConfig,
    ) -> Result<f64> {
        match self {
            SpatialDensity::Radial { profile } => {
                let mut total = 0.0;
                for (a, b, v) in profile.pieces() {
                    let (a, b) = (a.max(lo), b.min(hi));
                    if v == 0.0 || b <= a {
                        continue;
                    }
                    total += 2.0 * PI * v * integrate_pieces(|r| f(r) * r, a, b, breaks, cfg)?;
                }
                Ok(total)
            }
            SpatialDensity::Atomic { sites } => Ok(sites
                .iter()
                .filter(|s| {
                    let r = s.radius();
                    r > lo && r <= hi
                })
                .map(|s| s.weight as f64 * f(s.radius()))
                .sum()),
        }
    }
}

/// Strictly positive per-location weights `D(r)` of the fairness and
/// throughput objectives; the last piece extends beyond its outer edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightFunction {
    pub profile: RadialStep,
}

impl WeightFunction {
    pub fn constant(value: f64) -> Self {
        Self {
            profile: RadialStep::constant(value, 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.profile.validate("weights")?;
        if self.profile.values.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidParameter("weights must be strictly positive".into()));
        }
        Ok(())
    }

    pub fn value(&self, r: f64) -> f64 {
        self.profile.value_extended(r)
    }

    pub fn breakpoints(&self) -> &[f64] {
        self.profile.interior_breaks()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CANON: PathLoss = PathLoss {
        kappa: 3.162_277_660_168_379_5e-6,
        eta: 3.3,
    };

    #[test]
    fn attenuation_examples() {
        assert!((CANON.attenuation(1.0).unwrap() - 10f64.powf(-5.5)).abs() < 1e-20);
        let unit = PathLoss::new(1.0, 2.5).unwrap();
        assert_eq!(unit.attenuation(1.0).unwrap(), 1.0);
        // 10^-5.5 * 20^-3.3 evaluated as 10^(-5.5 - 3.3 log10 20)
        let oracle = 10f64.powf(-5.5 - 3.3 * 20f64.log10());
        let v = CANON.attenuation(20.0).unwrap();
        assert!((v - oracle).abs() < 1e-14 * oracle);
        assert!((v - 1.617e-10).abs() < 1e-12);
    }

    #[test]
    fn attenuation_rejects_receiver_location() {
        assert!(matches!(CANON.attenuation(0.0), Err(Error::Domain(_))));
        assert!(matches!(CANON.attenuation(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn path_loss_invariants() {
        assert!(PathLoss::new(0.0, 3.0).is_err());
        assert!(PathLoss::new(1.0, 2.0).is_err());
        assert!(PathLoss::new(1.0, 2.0001).is_ok());
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi(0.0).unwrap(), 0.0);
        assert!((phi(1.0).unwrap() - (1.0 - 2f64.ln())).abs() < 1e-15);
        // u/2 - u^2/3 + u^3/4 at u = 1e-6
        let u = 1e-6;
        let series = u / 2.0 - u * u / 3.0 + u * u * u / 4.0;
        assert!((phi(u).unwrap() - series).abs() < 1e-20);
        assert!(matches!(phi(-1e-3), Err(Error::Domain(_))));
        assert_eq!(phi(f64::INFINITY).unwrap(), 1.0);
    }

    #[test]
    fn phi_series_matches_log_form() {
        // series oracle to many terms vs direct log form
        let mut u: f64 = 1e-8;
        while u <= 1e-3 {
            let series: f64 = (1..40)
                .map(|k| {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    sign * u.powi(k) / (k as f64 + 1.0)
                })
                .sum();
            assert!((phi_kernel(u) - series).abs() < 1e-12, "u={u}");
            assert!((1.0 - u.ln_1p() / u - series).abs() < 1e-12, "u={u}");
            u *= 1.7;
        }
    }

    #[test]
    fn one_minus_log_kernel_matches_definition() {
        for &u in &[1e-9f64, 1e-3, 0.5, 3.0, 1e6] {
            for &t in &[0.0, 0.1, 0.5, 1.0] {
                let direct = if u * t == 0.0 { 1.0 - t } else { 1.0 - (u * t).ln_1p() / u };
                assert!((one_minus_log_kernel(u, t) - direct).abs() < 1e-12, "u={u} t={t}");
            }
        }
        assert_eq!(one_minus_log_kernel(f64::INFINITY, 0.5), 1.0);
    }

    #[test]
    fn step_takes_left_value_at_breakpoint() {
        let s = RadialStep {
            edges: vec![0.0, 1.0, 2.0],
            values: vec![3.0, 5.0],
        };
        assert_eq!(s.value(0.0), 3.0);
        assert_eq!(s.value(1.0), 3.0);
        assert_eq!(s.value(1.0 + 1e-12), 5.0);
        assert_eq!(s.value(2.0), 5.0);
        assert_eq!(s.value(2.5), 0.0);
        assert_eq!(s.value_extended(2.5), 5.0);
    }

    #[test]
    fn radial_integral_examples() {
        let cfg = QuadConfig::default();
        let d = SpatialDensity::uniform(10.0, 50.0);
        let area = d.radial_integral(|_| 1.0, &cfg).unwrap();
        assert!((area - 10.0 * PI * 2500.0).abs() < 1e-9 * area);
        assert!((area - 78_539.8).abs() < 0.1);

        let atoms = SpatialDensity::Atomic {
            sites: vec![
                Site { x: 1.0, y: 0.0, weight: 1 },
                Site { x: 0.0, y: 2.0, weight: 1 },
                Site { x: -3.0, y: 0.5, weight: 1 },
            ],
        };
        assert_eq!(atoms.radial_integral(|_| 1.0, &cfg).unwrap(), 3.0);
        assert_eq!(atoms.mass_within(2.0), 2.0);
    }

    #[test]
    fn radial_integral_against_dense_trapezoid() {
        // f = phi(L(r)) on the canonical density; brute-force trapezoid with
        // 10^6 panels, Richardson-extrapolated against the 5 * 10^5 panel sum
        let cfg = QuadConfig::default();
        let d = SpatialDensity::uniform(10.0, 50.0);
        let f = |r: f64| phi_kernel(CANON.gain(r));
        let v = d.radial_integral(f, &cfg).unwrap();
        let trap = |n: usize| {
            let h = 50.0 / n as f64;
            let g = |r: f64| if r == 0.0 { 0.0 } else { f(r) * r };
            let mut sum = 0.5 * (g(0.0) + g(50.0));
            for i in 1..n {
                sum += g(i as f64 * h);
            }
            2.0 * PI * 10.0 * sum * h
        };
        let (coarse, fine) = (trap(500_000), trap(1_000_000));
        let oracle = fine + (fine - coarse) / 3.0;
        assert!((v - oracle).abs() < 1e-9 * oracle, "{v} vs {oracle}");
    }

    #[test]
    fn truncation_and_mass() {
        let d = SpatialDensity::Radial {
            profile: RadialStep {
                edges: vec![0.0, 10.0, 30.0],
                values: vec![2.0, 1.0],
            },
        };
        d.validate().unwrap();
        let t = d.truncated(20.0);
        assert_eq!(t.support_radius(), 20.0);
        let expect = 2.0 * PI * 100.0 + PI * (400.0 - 100.0);
        assert!((t.mass_within(100.0) - expect).abs() < 1e-9);
        assert!((d.mass_within(20.0) - expect).abs() < 1e-9);
    }

    #[test]
    fn density_validation() {
        let bad = SpatialDensity::Radial {
            profile: RadialStep { edges: vec![0.0, 1.0], values: vec![-1.0] },
        };
        assert!(bad.validate().is_err());
        let at_origin = SpatialDensity::Atomic {
            sites: vec![Site { x: 0.0, y: 0.0, weight: 1 }],
        };
        assert!(at_origin.validate().is_err());
        let zero_weight = SpatialDensity::Atomic {
            sites: vec![Site { x: 1.0, y: 0.0, weight: 0 }],
        };
        assert!(zero_weight.validate().is_err());
    }

    #[test]
    fn tolerance_halving_is_stable() {
        let d = SpatialDensity::uniform(10.0, 50.0);
        let f = |r: f64| phi_kernel((20.0 / r).powf(3.3));
        let coarse_cfg = QuadConfig::default().with_rel_tol(1e-7);
        let coarse = d.radial_integral(f, &coarse_cfg).unwrap();
        let fine = d.radial_integral(f, &coarse_cfg.with_rel_tol(5e-8)).unwrap();
        assert!((coarse - fine).abs() < 1e-7 * fine.abs());
    }

    proptest! {
        #[test]
        fn attenuation_strictly_decreasing(r1 in 1e-3f64..1e3, dr in 1e-6f64..1e3) {
            let r2 = r1 + dr;
            prop_assert!(CANON.gain(r1) > CANON.gain(r2));
        }

        #[test]
        fn phi_monotone_and_bounded(u1 in 0.0f64..1e9, du in 0.0f64..1e9) {
            let a = phi_kernel(u1);
            let b = phi_kernel(u1 + du);
            prop_assert!(a <= b + 1e-16);
            prop_assert!((0.0..1.0).contains(&a));
        }

        #[test]
        fn radial_integral_is_linear(a in -5.0f64..5.0, b in -5.0f64..5.0, r0 in 1.0f64..40.0) {
            let cfg = QuadConfig::default();
            let d = SpatialDensity::uniform(10.0, 50.0);
            let f = |r: f64| phi_kernel((r0 / r).powf(3.3));
            let g = |r: f64| (-r / 10.0).exp();
            let lhs = d.radial_integral(|r| a * f(r) + b * g(r), &cfg).unwrap();
            let rhs = a * d.radial_integral(f, &cfg).unwrap() + b * d.radial_integral(g, &cfg).unwrap();
            let scale = (a.abs() + b.abs()) * 1e5;
            prop_assert!((lhs - rhs).abs() <= 1e-9 * scale.max(lhs.abs()));
        }
    }
}
