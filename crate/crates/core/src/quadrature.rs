//! One-dimensional quadrature: globally adaptive Gauss-Kronrod (7/15) panels
//! and a fixed 64-point Gauss-Legendre rule on the unit interval.

use std::collections::BinaryHeap;
use std::cmp::Ordering;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances for adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-13,
            max_panels: 4000,
        }
    }
}

impl QuadConfig {
    pub fn with_rel_tol(self, rel_tol: f64) -> Self {
        Self { rel_tol, ..self }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod_panel<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Panel {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (j, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    Panel { lo, hi, value, error }
}

/// Integrates `f` over `[lo, hi]` by repeatedly bisecting the panel with the
/// largest error estimate. The integrand is only sampled at interior points.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, cfg: &QuadConfig) -> Result<f64> {
    if hi == lo {
        return Ok(0.0);
    }
    if !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(Error::Domain(format!("invalid integration range [{lo}, {hi}]")));
    }
    let first = kronrod_panel(&f, lo, hi);
    let mut total = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut panels = 1;
    loop {
        let tolerance = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        if !total.is_finite() {
            return Err(Error::Quadrature { lo, hi, error: f64::INFINITY, tolerance, panels });
        }
        if error <= tolerance {
            return Ok(total);
        }
        if panels >= cfg.max_panels {
            return Err(Error::Quadrature { lo, hi, error, tolerance, panels });
        }
        let worst = heap.pop().expect("heap holds every live panel");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // panel collapsed to adjacent floats; nothing more to gain
            return Err(Error::Quadrature { lo, hi, error, tolerance, panels });
        }
        let left = kronrod_panel(&f, worst.lo, mid);
        let right = kronrod_panel(&f, mid, worst.hi);
        total += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        panels += 1;
        // re-sum occasionally so cancellation in the running totals cannot drift
        if panels % 64 == 0 {
            total = heap.iter().map(|p| p.value).sum();
            error = heap.iter().map(|p| p.error).sum();
        }
    }
}

/// Integrates over consecutive sub-intervals split at `breaks` (points outside
/// `(lo, hi)` are ignored). Use at known discontinuities of the integrand.
pub fn integrate_pieces<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    cfg: &QuadConfig,
) -> Result<f64> {
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&b| b > lo && b < hi).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    let mut a = lo;
    for b in cuts.into_iter().chain(std::iter::once(hi)) {
        total += integrate(&f, a, b, cfg)?;
        a = b;
    }
    Ok(total)
}

/// Nodes and weights of the 64-point Gauss-Legendre rule mapped to `[0, 1]`.
pub fn gauss_legendre_unit() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        gauss_legendre(64)
            .into_iter()
            .map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .collect()
    })
}

/// Gauss-Legendre nodes on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut rule = Vec::with_capacity(n);
    let nf = n as f64;
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        rule.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

/// Integrates `f` over `[0, 1]` with the fixed 64-point rule.
pub fn gauss_legendre_01<F: FnMut(f64) -> f64>(mut f: F) -> f64 {
    gauss_legendre_unit().iter().map(|&(t, w)| w * f(t)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| 3.0 * x * x, 0.0, 2.0, &QuadConfig::default()).unwrap();
        assert!((v - 8.0).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_needs_subdivision() {
        let cfg = QuadConfig::default();
        let v = integrate(|x: f64| (50.0 * x).sin(), 0.0, 3.0, &cfg).unwrap();
        let exact = (1.0 - (150.0f64).cos()) / 50.0;
        assert!((v - exact).abs() < 1e-10 * exact.abs().max(1.0));
    }

    #[test]
    fn endpoint_singularity_is_never_sampled() {
        // 1/sqrt(x) is integrable; the rule must not evaluate x = 0
        let v = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, &QuadConfig::default()).unwrap();
        assert!((v - 2.0).abs() < 1e-8);
    }

    #[test]
    fn non_integrable_reports_diagnostic() {
        let cfg = QuadConfig { max_panels: 200, ..QuadConfig::default() };
        let err = integrate(|x: f64| 1.0 / x, 0.0, 1.0, &cfg).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }), "{err}");
    }

    #[test]
    fn pieces_handle_a_jump() {
        let step = |x: f64| if x <= 0.3 { 1.0 } else { 0.0 };
        let v = integrate_pieces(step, 0.0, 1.0, &[0.3, 5.0], &QuadConfig::default()).unwrap();
        assert!((v - 0.3).abs() < 1e-14);
    }

    #[test]
    fn legendre_rule_integrates_high_degree() {
        let rule = gauss_legendre_unit();
        assert_eq!(rule.len(), 64);
        let wsum: f64 = rule.iter().map(|r| r.1).sum();
        assert!((wsum - 1.0).abs() < 1e-14);
        let v = gauss_legendre_01(|t| t.powi(100));
        assert!((v - 1.0 / 101.0).abs() < 1e-14);
        let e = gauss_legendre_01(f64::exp);
        assert!((e - (std::f64::consts::E - 1.0)).abs() < 1e-14);
    }
}
