//! Closed forms of the Erlang M/D/1/1 loss system with interference.
//!
//! A packet accepted by an idle receiver is received correctly when its
//! faded power beats `gamma` times the noise plus the interference averaged
//! over its duration. With Rayleigh fading that probability factorizes into
//! Laplace transforms of the noise `L_W`, of admissible packets arriving
//! during the reception `L_1`, of admissible packets already in the air when
//! it started `L_2`, and of non-admissible packets `L_JB`. Two entry points
//! exist: a generic one driven by a discrete received-power distribution and
//! a spatial one driven by a sensor density, a path loss and an admission
//! policy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{one_minus_log_kernel, phi_kernel, PathLoss, SpatialDensity};
use crate::quadrature::{gauss_legendre_01, QuadConfig};

/// Radio and traffic parameters shared by every sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    /// Emitted power (W).
    pub p_bar: f64,
    /// Constant noise power (W).
    pub noise_w: f64,
    /// SINR threshold.
    pub gamma: f64,
    /// Packet duration (s).
    pub b: f64,
    /// Packet emission rate per sensor (1/s).
    pub lambda_e: f64,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParameter(msg.to_string()))
            }
        };
        check(self.p_bar > 0.0 && self.p_bar.is_finite(), "p_bar must be positive")?;
        check(self.gamma > 0.0 && self.gamma.is_finite(), "gamma must be positive")?;
        check(self.b > 0.0 && self.b.is_finite(), "b must be positive")?;
        check(self.noise_w >= 0.0 && self.noise_w.is_finite(), "noise_w must be non-negative")?;
        check(self.lambda_e >= 0.0 && self.lambda_e.is_finite(), "lambda_e must be non-negative")
    }
}

/// Piecewise-linear radial function on sorted knots, zero outside the knot
/// range. A repeated radius encodes a jump; the first of the repeated knots
/// holds the value at the jump itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialTable {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

impl RadialTable {
    pub fn validate(&self) -> Result<()> {
        if self.radii.is_empty() || self.radii.len() != self.values.len() {
            return Err(Error::InvalidParameter(
                "table needs matching, non-empty radii and values".into(),
            ));
        }
        if self.radii.windows(2).any(|w| !(w[1] >= w[0])) || self.radii[0] < 0.0 {
            return Err(Error::InvalidParameter("table radii must be sorted and >= 0".into()));
        }
        Ok(())
    }

    pub fn eval(&self, r: f64) -> f64 {
        let n = self.radii.len();
        if r < self.radii[0] || r > self.radii[n - 1] {
            return 0.0;
        }
        let i = self.radii.partition_point(|&x| x < r);
        if self.radii[i] == r {
            return self.values[i];
        }
        let (r0, r1) = (self.radii[i - 1], self.radii[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        v0 + (v1 - v0) * (r - r0) / (r1 - r0)
    }

    /// Radii where the function jumps, including the drop to zero past the end.
    pub fn discontinuities(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .radii
            .windows(2)
            .filter(|w| w[0] == w[1])
            .map(|w| w[0])
            .collect();
        out.push(self.radii[self.radii.len() - 1]);
        out.dedup();
        out
    }
}

/// Spatial admission probability `d(r)` applied by an idle receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Policy {
    /// Same probability everywhere.
    Constant { value: f64 },
    /// Admit every packet from `|x| <= radius`.
    Indicator { radius: f64 },
    /// Admit packets from a union of annuli `lo < |x| <= hi`.
    Region { intervals: Vec<(f64, f64)> },
    /// Piecewise-linear admission probability.
    Tabulated { table: RadialTable },
}

impl Policy {
    pub fn admit_all() -> Self {
        Policy::Constant { value: 1.0 }
    }

    pub fn reject_all() -> Self {
        Policy::Constant { value: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        match self {
            Policy::Constant { value } if !in_unit(*value) => Err(Error::InvalidParameter(
                "admission probability must lie in [0, 1]".into(),
            )),
            Policy::Indicator { radius } if !(*radius >= 0.0) => {
                Err(Error::InvalidParameter("indicator radius must be >= 0".into()))
            }
            Policy::Region { intervals } if intervals.iter().any(|&(a, b)| !(0.0 <= a && a <= b)) => {
                Err(Error::InvalidParameter("region intervals must satisfy 0 <= lo <= hi".into()))
            }
            Policy::Tabulated { table } => {
                table.validate()?;
                if table.values.iter().any(|&v| !in_unit(v)) {
                    return Err(Error::InvalidParameter(
                        "admission probability must lie in [0, 1]".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `d(r)`.
    pub fn admission(&self, r: f64) -> f64 {
        match self {
            Policy::Constant { value } => *value,
            Policy::Indicator { radius } => {
                if r <= *radius {
                    1.0
                } else {
                    0.0
                }
            }
            Policy::Region { intervals } => {
                let inside = intervals
                    .iter()
                    .any(|&(lo, hi)| r <= hi && (r > lo || (r == 0.0 && lo == 0.0)));
                if inside {
                    1.0
                } else {
                    0.0
                }
            }
            Policy::Tabulated { table } => table.eval(r),
        }
    }

    pub fn discontinuities(&self) -> Vec<f64> {
        match self {
            Policy::Constant { .. } => Vec::new(),
            Policy::Indicator { radius } => vec![*radius],
            Policy::Region { intervals } => intervals.iter().flat_map(|&(a, b)| [a, b]).collect(),
            Policy::Tabulated { table } => table.discontinuities(),
        }
    }
}

/// `P(X(-0) = 0) = 1 / (1 + lambda B)`: the chance an arrival finds the receiver idle.
pub fn p_free(lambda: f64, b: f64) -> f64 {
    1.0 / (1.0 + lambda * b)
}

/// Discrete law of the mean received power of a packet (non-spatial form).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerDistribution {
    /// `(power W, probability)` atoms.
    pub atoms: Vec<(f64, f64)>,
}

impl PowerDistribution {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let d = Self { atoms };
        d.validate()?;
        Ok(d)
    }

    pub fn single(power: f64) -> Self {
        Self { atoms: vec![(power, 1.0)] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.atoms.is_empty() {
            return Err(Error::InvalidParameter("power distribution needs atoms".into()));
        }
        if self.atoms.iter().any(|&(p, q)| !(p > 0.0 && q > 0.0 && p.is_finite())) {
            return Err(Error::InvalidParameter(
                "power atoms need positive power and probability".into(),
            ));
        }
        let total: f64 = self.atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "power probabilities sum to {total}, not 1"
            )));
        }
        Ok(())
    }

    fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.atoms.iter().map(|&(p, q)| q * f(p)).sum()
    }
}

/// Independent Poisson stream of packets that interfere but are never received.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalInterference {
    pub rate: f64,
    pub powers: PowerDistribution,
}

fn laplace_l2_from<G: Fn(f64) -> Result<f64>>(lambda_b: f64, exponent_at: G) -> Result<f64> {
    // exp(-lambda B) + lambda B * int_0^1 exp(-exponent(t)) dt
    let mut first_err = None;
    let integral = gauss_legendre_01(|t| match exponent_at(t) {
        Ok(e) => (-e).exp(),
        Err(err) => {
            first_err.get_or_insert(err);
            0.0
        }
    });
    match first_err {
        Some(err) => Err(err),
        None => Ok((-lambda_b).exp() + lambda_b * integral),
    }
}

/// Generic `L_1(xi)` for admissible arrivals of rate `lambda` with power law `powers`.
pub fn generic_l1(xi: f64, lambda: f64, b: f64, powers: &PowerDistribution) -> f64 {
    (-lambda * b * powers.expect(|p| phi_kernel(xi * p))).exp()
}

/// Generic `L_2(xi)`.
pub fn generic_l2(xi: f64, lambda: f64, b: f64, powers: &PowerDistribution) -> f64 {
    let lb = lambda * b;
    laplace_l2_from(lb, |t| Ok(lb * powers.expect(|p| one_minus_log_kernel(xi * p, t))))
        .expect("generic transform has no quadrature")
}

/// Generic `L_JB(xi)` of an external interference stream.
pub fn generic_ljb(xi: f64, b: f64, external: &ExternalInterference) -> f64 {
    (-2.0 * external.rate * b * external.powers.expect(|p| phi_kernel(xi * p))).exp()
}

/// Fraction of all arrivals that are accepted and decoded (non-spatial form):
/// `1/(1+lambda B) * E[L_W L_1 L_2 L_JB]` taken at `xi = gamma / P_0`.
pub fn erlang_pi(
    powers: &PowerDistribution,
    lambda: f64,
    ch: &ChannelParams,
    external: Option<&ExternalInterference>,
) -> Result<f64> {
    powers.validate()?;
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter("lambda must be non-negative".into()));
    }
    let mut total = 0.0;
    for &(p0, q) in &powers.atoms {
        let xi = ch.gamma / p0;
        let mut term = (-xi * ch.noise_w).exp()
            * generic_l1(xi, lambda, ch.b, powers)
            * generic_l2(xi, lambda, ch.b, powers);
        if let Some(ext) = external {
            term *= generic_ljb(xi, ch.b, ext);
        }
        total += q * term;
    }
    Ok(p_free(lambda, ch.b) * total)
}

/// Values of the four transforms at one `xi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transforms {
    pub l_w: f64,
    pub l1: f64,
    pub l2: f64,
    pub l_jb: f64,
}

impl Transforms {
    pub fn product(&self) -> f64 {
        self.l_w * self.l1 * self.l2 * self.l_jb
    }
}

/// Lower and upper reception bounds at one location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecBounds {
    pub lower: f64,
    pub upper: f64,
}

/// Exact information density with its two bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoValue {
    pub rho: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Sampled reception profile along the radius.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceptionCurve {
    pub radii: Vec<f64>,
    pub p_rec: Vec<f64>,
    pub p_rec_lower: Vec<f64>,
    pub p_rec_upper: Vec<f64>,
    pub rho: Vec<f64>,
    pub p_free: f64,
}

/// One receiver at the origin fed by a Poisson rain of packets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Network {
    pub pathloss: PathLoss,
    pub density: SpatialDensity,
    pub channel: ChannelParams,
    #[serde(default)]
    pub quad: QuadConfig,
}

impl Network {
    pub fn new(pathloss: PathLoss, density: SpatialDensity, channel: ChannelParams) -> Result<Self> {
        let net = Self { pathloss, density, channel, quad: QuadConfig::default() };
        net.validate()?;
        Ok(net)
    }

    pub fn with_quad(mut self, quad: QuadConfig) -> Self {
        self.quad = quad;
        self
    }

    pub fn with_density(&self, density: SpatialDensity) -> Self {
        Self { density, ..self.clone() }
    }

    pub fn with_channel(&self, channel: ChannelParams) -> Self {
        Self { channel, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        self.pathloss.validate()?;
        self.density.validate()?;
        self.channel.validate()
    }

    /// `gamma_x = gamma / (P L(r))`, which tends to 0 at the receiver.
    pub fn gamma_x(&self, r: f64) -> f64 {
        self.channel.gamma * r.powf(self.pathloss.eta) / (self.channel.p_bar * self.pathloss.kappa)
    }

    fn gamma_x_checked(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!(
                "reception is undefined at the receiver location (r = {r})"
            )));
        }
        Ok(self.gamma_x(r))
    }

    fn check_xi(xi: f64) -> Result<()> {
        if !(xi >= 0.0) {
            return Err(Error::Domain(format!("Laplace argument must be >= 0, got {xi}")));
        }
        Ok(())
    }

    /// Mean received power from distance `s` times `xi`.
    #[inline]
    fn scaled_power(&self, xi: f64, s: f64) -> f64 {
        xi * self.channel.p_bar * self.pathloss.gain(s)
    }

    // Breakpoints of d plus the radius where xi * P * L(s) = 1, near which the
    // kernel changes from ~1 to ~0.
    fn breaks(&self, xi: f64, policy: &Policy) -> Vec<f64> {
        let mut b = policy.discontinuities();
        if xi > 0.0 {
            b.push(self.pathloss.radius_for_gain(1.0 / (xi * self.channel.p_bar)));
        }
        b
    }

    fn integral<F: Fn(f64) -> f64>(&self, f: F, breaks: &[f64]) -> Result<f64> {
        self.density
            .radial_integral_within(f, 0.0, f64::INFINITY, breaks, &self.quad)
    }

    /// Rate of admissible packets `lambda = lambda_e * int d dLambda_s`.
    pub fn lambda_admissible(&self, policy: &Policy) -> Result<f64> {
        if self.channel.lambda_e == 0.0 {
            return Ok(0.0);
        }
        let mass = self.integral(|r| policy.admission(r), &policy.discontinuities())?;
        Ok(self.channel.lambda_e * mass)
    }

    /// `int d(x) phi(xi P L(x)) Lambda_s(dx)`.
    fn admitted_phi(&self, xi: f64, policy: &Policy, breaks: &[f64]) -> Result<f64> {
        self.integral(|s| policy.admission(s) * phi_kernel(self.scaled_power(xi, s)), breaks)
    }

    fn rejected_phi(&self, xi: f64, policy: &Policy, breaks: &[f64]) -> Result<f64> {
        self.integral(
            |s| (1.0 - policy.admission(s)) * phi_kernel(self.scaled_power(xi, s)),
            breaks,
        )
    }

    pub fn laplace_w(&self, xi: f64) -> Result<f64> {
        Self::check_xi(xi)?;
        Ok((-xi * self.channel.noise_w).exp())
    }

    pub fn laplace_l1(&self, xi: f64, policy: &Policy) -> Result<f64> {
        Self::check_xi(xi)?;
        let lb = self.channel.lambda_e * self.channel.b;
        if xi == 0.0 || lb == 0.0 {
            return Ok(1.0);
        }
        let breaks = self.breaks(xi, policy);
        Ok((-lb * self.admitted_phi(xi, policy, &breaks)?).exp())
    }

    pub fn laplace_l2(&self, xi: f64, policy: &Policy) -> Result<f64> {
        Self::check_xi(xi)?;
        let lambda = self.lambda_admissible(policy)?;
        self.l2_with_lambda(xi, policy, lambda)
    }

    fn l2_with_lambda(&self, xi: f64, policy: &Policy, lambda: f64) -> Result<f64> {
        let lb_e = self.channel.lambda_e * self.channel.b;
        let lb = lambda * self.channel.b;
        if xi == 0.0 || lb == 0.0 {
            return Ok(1.0);
        }
        let breaks = self.breaks(xi, policy);
        laplace_l2_from(lb, |t| {
            let inner = self.integral(
                |s| policy.admission(s) * phi_kernel(self.scaled_power(xi, s) * t),
                &breaks,
            )?;
            Ok((1.0 - t) * lb + lb_e * t * inner)
        })
    }

    pub fn laplace_ljb(&self, xi: f64, policy: &Policy) -> Result<f64> {
        Self::check_xi(xi)?;
        let lb = self.channel.lambda_e * self.channel.b;
        if xi == 0.0 || lb == 0.0 {
            return Ok(1.0);
        }
        let breaks = self.breaks(xi, policy);
        Ok((-2.0 * lb * self.rejected_phi(xi, policy, &breaks)?).exp())
    }

    /// Policy-free kernel of the bounds, `exp(-lambda_e B int phi dLambda_s)`.
    pub fn laplace_call(&self, xi: f64) -> Result<f64> {
        Self::check_xi(xi)?;
        let lb = self.channel.lambda_e * self.channel.b;
        if xi == 0.0 || lb == 0.0 {
            return Ok(1.0);
        }
        let all = Policy::admit_all();
        let breaks = self.breaks(xi, &all);
        Ok((-lb * self.admitted_phi(xi, &all, &breaks)?).exp())
    }

    /// All four transforms at `xi` under `policy`.
    pub fn transforms(&self, xi: f64, policy: &Policy) -> Result<Transforms> {
        let lambda = self.lambda_admissible(policy)?;
        self.transforms_with_lambda(xi, policy, lambda)
    }

    fn transforms_with_lambda(&self, xi: f64, policy: &Policy, lambda: f64) -> Result<Transforms> {
        Ok(Transforms {
            l_w: self.laplace_w(xi)?,
            l1: self.laplace_l1(xi, policy)?,
            l2: self.l2_with_lambda(xi, policy, lambda)?,
            l_jb: self.laplace_ljb(xi, policy)?,
        })
    }

    /// Probability that a packet from distance `r`, once accepted, is decoded.
    pub fn p_rec(&self, r: f64, policy: &Policy) -> Result<f64> {
        let xi = self.gamma_x_checked(r)?;
        Ok(self.transforms(xi, policy)?.product())
    }

    /// `p_rec` when the admissible rate is already known.
    pub fn p_rec_with_lambda(&self, r: f64, policy: &Policy, lambda: f64) -> Result<f64> {
        let xi = self.gamma_x_checked(r)?;
        Ok(self.transforms_with_lambda(xi, policy, lambda)?.product())
    }

    /// Policy-independent bounds `L_W L^2 <= p_rec <= L_W L`.
    pub fn p_rec_bounds(&self, r: f64) -> Result<RecBounds> {
        let xi = self.gamma_x_checked(r)?;
        self.bounds_at(xi)
    }

    /// Bounds evaluated at a Laplace argument; `xi = 0` is the receiver limit.
    pub fn bounds_at(&self, xi: f64) -> Result<RecBounds> {
        let lw = self.laplace_w(xi)?;
        let l = self.laplace_call(xi)?;
        Ok(RecBounds { lower: lw * l * l, upper: lw * l })
    }

    /// Bound-based `p_rec` at radius `r >= 0` (the limit 1 at `r = 0`).
    pub fn bound_at_radius(&self, r: f64, kind: BoundKind) -> Result<f64> {
        let b = self.bounds_at(self.gamma_x(r))?;
        Ok(match kind {
            BoundKind::Lower => b.lower,
            BoundKind::Upper => b.upper,
        })
    }

    /// Density of received information at distance `r` and its two bounds.
    pub fn rho(&self, r: f64, policy: &Policy) -> Result<RhoValue> {
        let lambda = self.lambda_admissible(policy)?;
        self.rho_with_lambda(r, policy, lambda)
    }

    pub fn rho_with_lambda(&self, r: f64, policy: &Policy, lambda: f64) -> Result<RhoValue> {
        let xi = self.gamma_x_checked(r)?;
        let base = self.channel.lambda_e
            * self.density.intensity(r)
            * policy.admission(r)
            * p_free(lambda, self.channel.b);
        if base == 0.0 {
            return Ok(RhoValue { rho: 0.0, lower: 0.0, upper: 0.0 });
        }
        let exact = self.transforms_with_lambda(xi, policy, lambda)?.product();
        let bounds = self.bounds_at(xi)?;
        Ok(RhoValue {
            rho: base * exact,
            lower: base * bounds.lower,
            upper: base * bounds.upper,
        })
    }

    pub fn reception_curve(&self, radii: &[f64], policy: &Policy) -> Result<ReceptionCurve> {
        let lambda = self.lambda_admissible(policy)?;
        let mut curve = ReceptionCurve {
            radii: radii.to_vec(),
            p_rec: Vec::with_capacity(radii.len()),
            p_rec_lower: Vec::with_capacity(radii.len()),
            p_rec_upper: Vec::with_capacity(radii.len()),
            rho: Vec::with_capacity(radii.len()),
            p_free: p_free(lambda, self.channel.b),
        };
        for &r in radii {
            let xi = self.gamma_x_checked(r)?;
            let exact = self.transforms_with_lambda(xi, policy, lambda)?.product();
            let bounds = self.bounds_at(xi)?;
            curve.p_rec.push(exact);
            curve.p_rec_lower.push(bounds.lower);
            curve.p_rec_upper.push(bounds.upper);
            curve.rho.push(
                self.channel.lambda_e
                    * self.density.intensity(r)
                    * policy.admission(r)
                    * curve.p_free
                    * exact,
            );
        }
        Ok(curve)
    }
}

/// Which bound on `p_rec` a bound-based construction uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Lower,
    Upper,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Site;
    use crate::quadrature::integrate;
    use proptest::prelude::*;

    fn canonical() -> Network {
        Network::new(
            PathLoss::new(10f64.powf(-5.5), 3.3).unwrap(),
            SpatialDensity::uniform(10.0, 50.0),
            ChannelParams {
                p_bar: 1e-3,
                noise_w: 1e-16,
                gamma: 1.0,
                b: 1e-3,
                lambda_e: 0.125,
            },
        )
        .unwrap()
    }

    #[test]
    fn lambda_admissible_examples() {
        let net = canonical();
        assert_eq!(net.lambda_admissible(&Policy::reject_all()).unwrap(), 0.0);
        let all = net.lambda_admissible(&Policy::admit_all()).unwrap();
        // 0.125 * 10 * pi * 2500
        assert!((all - 9817.477_042_468_104).abs() < 1e-6);

        let single = net.with_density(SpatialDensity::Atomic {
            sites: vec![Site { x: 3.0, y: 4.0, weight: 1 }],
        });
        let single = single.with_channel(ChannelParams { lambda_e: 2.0, ..single.channel });
        let lam = single.lambda_admissible(&Policy::Indicator { radius: 6.0 }).unwrap();
        assert_eq!(lam, 2.0);
    }

    #[test]
    fn p_free_examples() {
        assert_eq!(p_free(0.0, 1e-3), 1.0);
        assert_eq!(p_free(2.0, 0.5), 0.5);
        // 1 / (1 + 1.2272) rounds to 0.4490
        assert!((p_free(9817.5, 1.25e-4) - 0.4490).abs() < 5e-5);
    }

    #[test]
    fn transforms_are_one_at_zero_and_without_traffic() {
        let net = canonical();
        let pol = Policy::Indicator { radius: 20.0 };
        assert_eq!(net.laplace_l1(0.0, &pol).unwrap(), 1.0);
        assert_eq!(net.laplace_l2(0.0, &pol).unwrap(), 1.0);
        assert_eq!(net.laplace_ljb(0.0, &pol).unwrap(), 1.0);
        assert_eq!(net.laplace_call(0.0).unwrap(), 1.0);
        assert_eq!(net.laplace_w(0.0).unwrap(), 1.0);

        let quiet = net.with_channel(ChannelParams { lambda_e: 0.0, ..net.channel });
        let xi = quiet.gamma_x(20.0);
        assert_eq!(quiet.laplace_l1(xi, &pol).unwrap(), 1.0);
        assert_eq!(quiet.laplace_l2(xi, &pol).unwrap(), 1.0);
        assert_eq!(quiet.laplace_ljb(xi, &pol).unwrap(), 1.0);
        assert_eq!(quiet.laplace_call(xi).unwrap(), 1.0);
    }

    #[test]
    fn l2_outer_integral_telescopes_at_tiny_xi() {
        // as xi -> 0 the inner integral becomes lambda/lambda_e * t
        let net = canonical();
        let pol = Policy::Indicator { radius: 20.0 };
        let v = net.laplace_l2(1e-30, &pol).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn laplace_w_examples() {
        let net = canonical();
        let noiseless = net.with_channel(ChannelParams { noise_w: 0.0, ..net.channel });
        assert_eq!(noiseless.laplace_w(1e20).unwrap(), 1.0);
        let xi = 2f64.ln() / net.channel.noise_w;
        assert!((net.laplace_w(xi).unwrap() - 0.5).abs() < 1e-15);
        assert!(net.laplace_w(-1.0).is_err());
    }

    #[test]
    fn call_equals_l1_under_full_admission() {
        let net = canonical();
        for r in [1.0, 5.0, 20.0, 45.0] {
            let xi = net.gamma_x(r);
            let a = net.laplace_call(xi).unwrap();
            let b = net.laplace_l1(xi, &Policy::admit_all()).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ljb_is_one_when_everything_is_admitted() {
        let net = canonical();
        let xi = net.gamma_x(10.0);
        assert_eq!(net.laplace_ljb(xi, &Policy::admit_all()).unwrap(), 1.0);
    }

    #[test]
    fn l2_matches_brute_force_outer_integral() {
        // adaptive outer integral instead of the 64-point rule
        let net = canonical();
        let pol = Policy::Indicator { radius: 20.0 };
        let xi = net.gamma_x(20.0);
        let lambda = net.lambda_admissible(&pol).unwrap();
        let lb = lambda * net.channel.b;
        let lbe = net.channel.lambda_e * net.channel.b;
        let outer = integrate(
            |t| {
                let inner = net
                    .density
                    .radial_integral_within(
                        |s| {
                            pol.admission(s)
                                * (1.0 - (xi * net.channel.p_bar * net.pathloss.gain(s) * t).ln_1p()
                                    / (xi * net.channel.p_bar * net.pathloss.gain(s)))
                        },
                        0.0,
                        f64::INFINITY,
                        &[20.0],
                        &net.quad,
                    )
                    .unwrap();
                (-lbe * inner).exp()
            },
            0.0,
            1.0,
            &QuadConfig::default().with_rel_tol(1e-10),
        )
        .unwrap();
        let oracle = (-lb).exp() + lb * outer;
        let v = net.laplace_l2(xi, &pol).unwrap();
        assert!((v - oracle).abs() < 1e-9, "{v} vs {oracle}");
    }

    #[test]
    fn p_rec_limits() {
        let net = canonical();
        let quiet = net.with_channel(ChannelParams { lambda_e: 0.0, noise_w: 0.0, ..net.channel });
        assert_eq!(quiet.p_rec(30.0, &Policy::admit_all()).unwrap(), 1.0);
        let far = net.p_rec(5000.0, &Policy::Indicator { radius: 20.0 }).unwrap();
        assert!(far < 1e-12);
        assert!(net.p_rec(0.0, &Policy::admit_all()).is_err());
    }

    #[test]
    fn bounds_examples() {
        let net = canonical();
        let quiet = net.with_channel(ChannelParams { lambda_e: 0.0, ..net.channel });
        let b = quiet.p_rec_bounds(100.0).unwrap();
        let lw = quiet.laplace_w(quiet.gamma_x(100.0)).unwrap();
        assert_eq!(b.lower, lw);
        assert_eq!(b.upper, lw);

        for r in [2.0, 10.0, 20.0, 40.0] {
            let b = net.p_rec_bounds(r).unwrap();
            let lw = net.laplace_w(net.gamma_x(r)).unwrap();
            assert!((b.lower - b.upper * b.upper / lw).abs() < 1e-12);
        }

        let naive = Policy::Indicator { radius: 187.5 };
        for pol in [naive, Policy::Indicator { radius: 10.0 }, Policy::Indicator { radius: 30.0 }] {
            let b = net.p_rec_bounds(20.0).unwrap();
            let p = net.p_rec(20.0, &pol).unwrap();
            assert!(b.lower <= p + 1e-12 && p <= b.upper + 1e-12, "{b:?} {p}");
        }
    }

    #[test]
    fn l2_dominates_l1() {
        let net = canonical();
        let pol = Policy::Indicator { radius: 25.0 };
        let mut xi = 1e3;
        while xi < 1e16 {
            let l1 = net.laplace_l1(xi, &pol).unwrap();
            let l2 = net.laplace_l2(xi, &pol).unwrap();
            assert!(l2 >= l1 - 1e-12, "xi={xi}: {l2} < {l1}");
            xi *= 4.0;
        }
    }

    #[test]
    fn rho_examples() {
        let net = canonical();
        let zero = net.rho(5.0, &Policy::reject_all()).unwrap();
        assert_eq!(zero.rho, 0.0);

        let single = net.with_density(SpatialDensity::Atomic {
            sites: vec![Site { x: 2.0, y: 0.0, weight: 1 }],
        });
        let single = single.with_channel(ChannelParams { noise_w: 0.0, ..single.channel });
        let pol = Policy::Indicator { radius: 3.0 };
        let lambda = single.lambda_admissible(&pol).unwrap();
        // an atom has no density; the per-sensor rate is lambda_e * p_free * p_rec
        let p = single.p_rec(2.0, &pol).unwrap();
        // one emitter is its own only interferer
        let per_sensor = single.channel.lambda_e * p_free(lambda, single.channel.b) * p;
        assert!(per_sensor > 0.0 && per_sensor <= single.channel.lambda_e);
    }

    #[test]
    fn reception_curve_is_ordered() {
        let net = canonical();
        let radii: Vec<f64> = (1..=20).map(|i| i as f64 * 2.0).collect();
        let c = net.reception_curve(&radii, &Policy::Indicator { radius: 20.0 }).unwrap();
        for i in 0..radii.len() {
            assert!(c.p_rec_lower[i] <= c.p_rec[i] && c.p_rec[i] <= c.p_rec_upper[i]);
            if i > 0 {
                assert!(c.p_rec[i] <= c.p_rec[i - 1]);
            }
        }
    }

    #[test]
    fn erlang_pi_examples() {
        let ch = ChannelParams { p_bar: 1.0, noise_w: 0.0, gamma: 1.0, b: 1.0, lambda_e: 0.0 };
        let one = PowerDistribution::single(1.0);
        assert_eq!(erlang_pi(&one, 0.0, &ch, None).unwrap(), 1.0);
        let tiny_gamma = ChannelParams { gamma: 1e-14, ..ch };
        let v = erlang_pi(&one, 1.0, &tiny_gamma, None).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn external_interference_only_hurts() {
        let ch = ChannelParams { p_bar: 1.0, noise_w: 0.1, gamma: 1.0, b: 1.0, lambda_e: 0.0 };
        let powers = PowerDistribution::new(vec![(1.0, 0.3), (5.0, 0.7)]).unwrap();
        let ext = ExternalInterference { rate: 0.2, powers: PowerDistribution::single(0.5) };
        let with = erlang_pi(&powers, 0.1, &ch, Some(&ext)).unwrap();
        let without = erlang_pi(&powers, 0.1, &ch, None).unwrap();
        assert!(with < without);
    }

    #[test]
    fn power_distribution_validation() {
        assert!(PowerDistribution::new(vec![(1.0, 0.5), (2.0, 0.4)]).is_err());
        assert!(PowerDistribution::new(vec![(0.0, 1.0)]).is_err());
        assert!(PowerDistribution::new(vec![]).is_err());
    }

    #[test]
    fn table_eval_handles_jumps() {
        let t = RadialTable {
            radii: vec![0.0, 1.0, 1.0, 2.0],
            values: vec![0.0, 1.0, 0.5, 0.5],
        };
        assert_eq!(t.eval(0.5), 0.5);
        assert_eq!(t.eval(1.0), 1.0);
        assert_eq!(t.eval(1.5), 0.5);
        assert_eq!(t.eval(2.5), 0.0);
        assert_eq!(t.discontinuities(), vec![1.0, 2.0]);
    }

    #[test]
    fn policy_validation() {
        assert!(Policy::Constant { value: 1.5 }.validate().is_err());
        assert!(Policy::Indicator { radius: -1.0 }.validate().is_err());
        assert!(Policy::Region { intervals: vec![(3.0, 2.0)] }.validate().is_err());
        let region = Policy::Region { intervals: vec![(0.0, 1.0), (2.0, 3.0)] };
        assert_eq!(region.admission(0.0), 1.0);
        assert_eq!(region.admission(1.5), 0.0);
        assert_eq!(region.admission(2.0), 0.0);
        assert_eq!(region.admission(3.0), 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn transforms_non_increasing_in_xi(r in 1.0f64..40.0, scale in 1.01f64..10.0) {
            let net = canonical();
            let pol = Policy::Indicator { radius: 15.0 };
            let a = net.gamma_x(r);
            let b = a * scale;
            prop_assert!(net.laplace_l1(b, &pol).unwrap() <= net.laplace_l1(a, &pol).unwrap() + 1e-12);
            prop_assert!(net.laplace_l2(b, &pol).unwrap() <= net.laplace_l2(a, &pol).unwrap() + 1e-12);
            prop_assert!(net.laplace_ljb(b, &pol).unwrap() <= net.laplace_ljb(a, &pol).unwrap() + 1e-12);
            prop_assert!(net.laplace_call(b).unwrap() <= net.laplace_call(a).unwrap() + 1e-12);
        }

        #[test]
        fn bounds_are_policy_free_and_sandwich(r in 0.5f64..45.0, radius in 0.0f64..60.0) {
            let net = canonical();
            let pol = Policy::Indicator { radius };
            let b = net.p_rec_bounds(r).unwrap();
            let p = net.p_rec(r, &pol).unwrap();
            prop_assert!(b.lower - p <= 1e-8 && p - b.upper <= 1e-8);
            let rv1 = net.rho(r, &pol).unwrap();
            let rv2 = net.rho(r, &Policy::Indicator { radius: radius + 1.0 }).unwrap();
            // bounds differ between policies only through lambda d p_free
            if rv1.rho > 0.0 && rv2.rho > 0.0 {
                let k1 = rv1.lower / rv1.upper;
                let k2 = rv2.lower / rv2.upper;
                prop_assert!((k1 - k2).abs() < 1e-12);
            }
        }
    }
}
