use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use erlang_rain::cost::{self, CellPolicy};
use erlang_rain::policies;
use erlang_rain::quadrature::gauss_legendre_01;
use erlang_rain::sim::{self, InterferenceScope, RatioBatches, SimResult};
use erlang_rain::{p_free, Network, Policy, SpatialDensity};
use rayon::prelude::*;

use crate::config::{PolicyKind, Scenario};
use crate::error::CliError;

/// Admission policy built from the `[policy]` section with its characteristic radius.
pub struct BuiltPolicy {
    pub policy: Policy,
    pub radius: f64,
    /// Conventional name of the radius in reports.
    pub label: &'static str,
}

pub fn build_policy(scenario: &Scenario, net: &Network) -> Result<BuiltPolicy, CliError> {
    let section = &scenario.policy;
    let built = match section.kind {
        PolicyKind::Naive => BuiltPolicy {
            policy: policies::naive_policy(net)?,
            radius: policies::naive_radius(net)?,
            label: "R_0",
        },
        PolicyKind::Maxmin => {
            let radius = match section.radius {
                Some(r) => r,
                None => policies::maxmin_max_radius(net, section.target, section.bound, section.r_min)?,
            };
            let sol = policies::maxmin_policy(net, &scenario.weights, radius, section.bound)?;
            BuiltPolicy { policy: sol.policy, radius, label: "R_maxm" }
        }
        PolicyKind::Waterfill => {
            let domain = section.radius.unwrap_or_else(|| net.density.support_radius());
            let sol = policies::waterfill_policy(net, &scenario.weights, domain, section.bound)?;
            BuiltPolicy { radius: sol.radius(), policy: sol.policy(), label: "R*" }
        }
        PolicyKind::Cod => {
            let (policy, radius) = policies::cod_policy(net, section.target, section.r_min)?;
            BuiltPolicy { policy, radius, label: "R_COD" }
        }
    };
    Ok(built)
}

fn output_path(scenario: &Scenario, name: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&scenario.outputs).map_err(|e| CliError::io(&scenario.outputs, e))?;
    Ok(scenario.outputs.join(name))
}

fn write_csv(path: &Path, scenario: &Scenario, header: &str, rows: &[Vec<f64>]) -> Result<(), CliError> {
    let io = |e| CliError::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "{}", scenario.manifest()).map_err(io)?;
    writeln!(out, "{header}").map_err(io)?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// `prec.csv`: exact reception probability and its bounds along the radius grid.
pub fn prec(scenario: &Scenario) -> Result<Vec<PathBuf>, CliError> {
    let net = scenario.network()?;
    let built = build_policy(scenario, &net)?;
    let curve = net.reception_curve(&scenario.grid.radii(), &built.policy)?;
    let rows: Vec<Vec<f64>> = (0..curve.radii.len())
        .map(|i| vec![curve.radii[i], curve.p_rec[i], curve.p_rec_lower[i], curve.p_rec_upper[i]])
        .collect();
    let path = output_path(scenario, "prec.csv")?;
    write_csv(&path, scenario, "r,p_rec,p_rec_lower,p_rec_upper", &rows)?;
    Ok(vec![path])
}

/// Policy function and density profile of the configured policy; prints its radius.
pub fn policy(scenario: &Scenario) -> Result<Vec<PathBuf>, CliError> {
    let net = scenario.network()?;
    let built = build_policy(scenario, &net)?;
    let radii = scenario.grid.radii();
    let lambda = net.lambda_admissible(&built.policy)?;
    let d_rows: Vec<Vec<f64>> = radii.iter().map(|&r| vec![r, built.policy.admission(r)]).collect();
    let rho_rows = radii
        .par_iter()
        .map(|&r| {
            let v = net.rho_with_lambda(r, &built.policy, lambda)?;
            Ok(vec![r, v.rho, v.lower, v.upper])
        })
        .collect::<Result<Vec<_>, erlang_rain::Error>>()?;
    let kind = scenario.policy.kind.name();
    let d_path = output_path(scenario, &format!("policy_{kind}_d.csv"))?;
    write_csv(&d_path, scenario, "r,d", &d_rows)?;
    let rho_path = output_path(scenario, &format!("policy_{kind}_rho.csv"))?;
    write_csv(&rho_path, scenario, "r,rho,rho_lower,rho_upper", &rho_rows)?;
    println!("{} = {}", built.label, built.radius);
    Ok(vec![d_path, rho_path])
}

/// Cost sweeps under both cell policies and the gain curve.
pub fn cost(scenario: &Scenario) -> Result<Vec<PathBuf>, CliError> {
    let net = scenario.network()?;
    let params = scenario.cost.params();
    let grid = &scenario.cost.lambda_s;
    let maxmin = cost::cost_sweep(&net, grid, &params, CellPolicy::MaxMin)?;
    let naive = cost::cost_sweep(&net, grid, &params, CellPolicy::Naive)?;
    let gains = cost::gain_curve(&maxmin, &naive, &scenario.cost.ratios, params.target_d, net.channel.lambda_e);

    let sweep_rows = |c: &cost::CostCurve| -> Vec<Vec<f64>> {
        c.samples.iter().map(|s| vec![s.lambda_s, s.lambda_c, s.cost_per_area]).collect()
    };
    let sweep = output_path(scenario, "cost_sweep.csv")?;
    write_csv(&sweep, scenario, "lambda_s,lambda_c,cost", &sweep_rows(&maxmin))?;
    let sweep_naive = output_path(scenario, "cost_sweep_naive.csv")?;
    write_csv(&sweep_naive, scenario, "lambda_s,lambda_c,cost", &sweep_rows(&naive))?;
    let gain_rows: Vec<Vec<f64>> = gains.iter().map(|g| vec![g.ratio, g.gain, g.gain_naive]).collect();
    let gain = output_path(scenario, "cost_gain.csv")?;
    write_csv(&gain, scenario, "ratio,gain,gain_naive", &gain_rows)?;

    let opt = maxmin.optimum_sample();
    println!(
        "optimum lambda_s = {}, lambda_c = {}, cost = {}, gain = {}",
        opt.lambda_s, opt.lambda_c, opt.cost_per_area, maxmin.gain
    );
    Ok(vec![sweep, sweep_naive, gain])
}

/// `trace.csv`: every packet of the first replication.
pub fn trace(scenario: &Scenario) -> Result<Vec<PathBuf>, CliError> {
    let net = scenario.network()?;
    let built = build_policy(scenario, &net)?;
    let cfg = scenario.sim.config();
    let mut events = sim::generate_rain(&cfg, &net, &built.policy)?;
    sim::run_loss_system(&mut events, &net.channel, &cfg)?;
    let path = output_path(scenario, "trace.csv")?;
    let io = |e| CliError::io(&path, e);
    let mut out = BufWriter::new(File::create(&path).map_err(io)?);
    writeln!(out, "{}", scenario.manifest()).map_err(io)?;
    sim::write_trace(&events, &mut out).map_err(io)?;
    out.flush().map_err(io)?;
    Ok(vec![path])
}

/// One simulated-versus-analytic comparison.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub simulated: Option<(f64, f64)>,
    pub expected: f64,
    pub z: Option<f64>,
    pub pass: bool,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        match (self.simulated, self.z) {
            (Some((v, se)), Some(z)) => write!(
                f,
                "{verdict} {}: simulated {v:.6} +/- {se:.6}, analytic {:.6}, z = {z:+.2}",
                self.name, self.expected
            ),
            (Some((v, _)), None) => write!(
                f,
                "{verdict} {}: statistic {v:.5}, critical value {:.5}",
                self.name, self.expected
            ),
            _ => write!(f, "{verdict} {}: no data", self.name),
        }
    }
}

fn ratio_check(name: String, est: Option<sim::Estimate>, expected: f64) -> Check {
    match est {
        Some(e) if e.se.is_finite() => {
            let z = e.z_score(expected);
            Check { name, simulated: Some((e.value, e.se)), expected, z: Some(z), pass: z.abs() <= 3.0 }
        }
        _ => Check { name, simulated: None, expected, z: None, pass: true },
    }
}

/// Mean reception probability of the packets accepted from `[lo, hi)`.
fn bin_reception(net: &Network, policy: &Policy, lambda: f64, lo: f64, hi: f64) -> erlang_rain::Result<f64> {
    match &net.density {
        SpatialDensity::Atomic { sites } => {
            let (mut num, mut den) = (0.0, 0.0);
            for s in sites {
                let r = s.radius();
                let w = s.weight as f64 * policy.admission(r);
                if (lo..hi).contains(&r) && w > 0.0 {
                    num += w * net.p_rec_with_lambda(r, policy, lambda)?;
                    den += w;
                }
            }
            Ok(if den > 0.0 { num / den } else { f64::NAN })
        }
        SpatialDensity::Radial { .. } => {
            let mut cuts = vec![lo];
            cuts.extend(
                policy
                    .discontinuities()
                    .into_iter()
                    .chain(net.density.breakpoints())
                    .filter(|&c| c > lo && c < hi),
            );
            cuts.push(hi);
            cuts.sort_by(f64::total_cmp);
            let (mut num, mut den) = (0.0, 0.0);
            let mut failure = None;
            for w in cuts.windows(2) {
                let (a, b) = (w[0], w[1]);
                let mid = 0.5 * (a + b);
                if b <= a || net.density.intensity(mid) == 0.0 {
                    continue;
                }
                let weight = |r: f64| net.density.intensity(mid) * policy.admission(r) * r;
                num += (b - a)
                    * gauss_legendre_01(|t| {
                        let r = a + t * (b - a);
                        match net.p_rec_with_lambda(r, policy, lambda) {
                            Ok(p) => p * weight(r),
                            Err(e) => {
                                failure.get_or_insert(e);
                                0.0
                            }
                        }
                    });
                den += (b - a) * gauss_legendre_01(|t| weight(a + t * (b - a)));
            }
            if let Some(e) = failure {
                return Err(e);
            }
            Ok(if den > 0.0 { num / den } else { f64::NAN })
        }
    }
}

/// Simulates `replications` independent runs and compares them with the
/// closed forms. With `self_test` the analytic side uses a fourfold SINR
/// threshold and is expected to fail.
pub fn validate(scenario: &Scenario, self_test: bool) -> Result<Vec<Check>, CliError> {
    let full = scenario.network()?;
    let built = build_policy(scenario, &full)?;
    let cfg = scenario.sim.config();
    let net = full.with_density(full.density.truncated(cfg.domain_radius));
    let policy = &built.policy;

    let runs = (0..scenario.sim.replications)
        .into_par_iter()
        .map(|k| {
            let rep = cfg.replication(k);
            let mut events = sim::generate_rain(&rep, &net, policy)?;
            let result = sim::run_loss_system(&mut events, &net.channel, &rep)?;
            let laplace = |scope| -> Vec<RatioBatches> {
                laplace_points(&net, &cfg)
                    .iter()
                    .map(|&(_, xi)| sim::conditional_laplace_batches(&events, &rep, xi, scope))
                    .collect()
            };
            let adm = laplace(InterferenceScope::Admissible);
            let all = laplace(InterferenceScope::All);
            Ok((result, adm, all))
        })
        .collect::<erlang_rain::Result<Vec<(SimResult, Vec<RatioBatches>, Vec<RatioBatches>)>>>()?;

    let mut merged = runs[0].0.clone();
    let mut adm = runs[0].1.clone();
    let mut all = runs[0].2.clone();
    for (res, a, b) in &runs[1..] {
        merged.merge(res)?;
        for (x, y) in adm.iter_mut().zip(a) {
            x.merge(y);
        }
        for (x, y) in all.iter_mut().zip(b) {
            x.merge(y);
        }
    }

    let analytic = if self_test {
        let mut ch = net.channel;
        ch.gamma *= 4.0;
        net.with_channel(ch)
    } else {
        net.clone()
    };
    let lambda = analytic.lambda_admissible(policy)?;
    let mut checks = vec![ratio_check("p_free".into(), merged.p_free_hat(), p_free(lambda, net.channel.b))];

    for a in merged.rho_hat() {
        if a.accepted < 200.0 {
            continue;
        }
        let expected = bin_reception(&analytic, policy, lambda, a.r_lo, a.r_hi)?;
        checks.push(ratio_check(format!("p_rec on [{}, {})", a.r_lo, a.r_hi), a.reception, expected));
    }

    for (k, &(r, xi)) in laplace_points(&net, &cfg).iter().enumerate() {
        let tr = analytic.transforms(xi, policy)?;
        let ea = sim::laplace_from_batches(&adm[k]);
        let eb = sim::laplace_from_batches(&all[k]);
        if !ea.low_sample {
            checks.push(ratio_check(format!("L1 L2 at gamma_x({r})"), ea.estimate, tr.l1 * tr.l2));
        }
        if !eb.low_sample {
            checks.push(ratio_check(
                format!("L1 L2 L_JB at gamma_x({r})"),
                eb.estimate,
                tr.l1 * tr.l2 * tr.l_jb,
            ));
        }
    }

    if !merged.idle_gaps.is_empty() {
        let ks = sim::ks_exponential(&merged.idle_gaps, lambda);
        checks.push(Check {
            name: format!("idle gaps ~ Exp(lambda) over {} samples", ks.n),
            simulated: Some((ks.statistic, 0.0)),
            expected: ks.critical,
            z: None,
            pass: ks.passes(),
        });
    }
    Ok(checks)
}

/// Radii, as fractions of the simulated disk, whose `gamma_x` are the probe points.
fn laplace_points(net: &Network, cfg: &sim::SimConfig) -> Vec<(f64, f64)> {
    [0.04, 0.1, 0.2, 0.4, 0.8]
        .iter()
        .map(|f| {
            let r = f * cfg.domain_radius;
            (r, net.gamma_x(r))
        })
        .collect()
}

/// Formats the report and turns failures into an error naming them.
pub fn validation_outcome(checks: &[Check]) -> Result<(), CliError> {
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(failed.join("; ")))
    }
}
