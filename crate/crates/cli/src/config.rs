//! Scenario files: TOML with one section per model component.
//!
//! Values are layered as built-in profile, then the file, then `--set`
//! overrides, then command-line flags and the `ERLANG_RAIN_SEED` variable.

use std::path::{Path, PathBuf};

use erlang_rain::cost::CostParams;
use erlang_rain::{
    BoundKind, ChannelParams, Network, PathLoss, SimConfig, SpatialDensity, WeightFunction,
};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::CliError;

pub const SEED_ENV: &str = "ERLANG_RAIN_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// The single-receiver scenario with 10 sensors per m^2 on a 50 m disk.
    Canonical,
    /// The canonical geometry without traffic.
    Quiet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Naive,
    Maxmin,
    Waterfill,
    Cod,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Naive => "naive",
            PolicyKind::Maxmin => "maxmin",
            PolicyKind::Waterfill => "waterfill",
            PolicyKind::Cod => "cod",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    pub kind: PolicyKind,
    /// Uniform density the radius solvers must deliver.
    pub target: f64,
    /// Bound the max-min and water-filling constructions rely on.
    pub bound: BoundKind,
    /// Fixed domain radius for max-min and water-filling; solved for when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Smallest radius the solvers consider.
    pub r_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub duration: f64,
    pub warmup: f64,
    pub domain_radius: f64,
    pub seed: u64,
    pub annulus_bins: usize,
    pub batches: usize,
    pub replications: u64,
}

impl SimSection {
    pub fn config(&self) -> SimConfig {
        SimConfig {
            duration: self.duration,
            warmup: self.warmup,
            domain_radius: self.domain_radius,
            seed: self.seed,
            annulus_bins: self.annulus_bins,
            batches: self.batches,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    pub c_s: f64,
    pub c_c: f64,
    pub target_d: f64,
    /// Sensor densities of the sweep.
    pub lambda_s: Vec<f64>,
    /// Cluster-head to sensor price ratios of the gain curve.
    pub ratios: Vec<f64>,
}

impl CostSection {
    pub fn params(&self) -> CostParams {
        CostParams { c_s: self.c_s, c_c: self.c_c, target_d: self.target_d }
    }
}

/// Evenly spaced radii for the sampled profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
}

impl GridSection {
    pub fn radii(&self) -> Vec<f64> {
        let step = (self.r_max - self.r_min) / (self.points - 1) as f64;
        (0..self.points).map(|k| self.r_min + k as f64 * step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub profile: Profile,
    /// Directory receiving the CSV files.
    pub outputs: PathBuf,
    pub channel: ChannelParams,
    pub pathloss: PathLoss,
    pub density: SpatialDensity,
    pub weights: WeightFunction,
    pub policy: PolicySection,
    pub sim: SimSection,
    pub cost: CostSection,
    pub grid: GridSection,
}

impl Scenario {
    pub fn from_profile(profile: Profile) -> Self {
        // without traffic no density target is reachable, so only the naive policy exists
        let (lambda_e, kind) = match profile {
            Profile::Canonical => (0.125, PolicyKind::Maxmin),
            Profile::Quiet => (0.0, PolicyKind::Naive),
        };
        Scenario {
            profile,
            outputs: PathBuf::from("out"),
            channel: ChannelParams { p_bar: 1e-3, noise_w: 1e-16, gamma: 1.0, b: 1e-3, lambda_e },
            pathloss: PathLoss { kappa: 10f64.powf(-5.5), eta: 3.3 },
            density: SpatialDensity::uniform(10.0, 50.0),
            weights: WeightFunction::constant(0.75),
            policy: PolicySection {
                kind,
                target: 0.75,
                bound: BoundKind::Lower,
                radius: None,
                r_min: erlang_rain::policies::DEFAULT_R_MIN,
            },
            sim: SimSection {
                duration: 10.5,
                warmup: 0.02,
                domain_radius: 50.0,
                seed: 1,
                annulus_bins: 50,
                batches: 20,
                replications: 8,
            },
            cost: CostSection {
                c_s: 1.0,
                c_c: 100.0,
                target_d: 0.75,
                lambda_s: (0..=40).map(|k| 0.5 * k as f64).collect(),
                ratios: vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0],
            },
            grid: GridSection { r_min: 0.1, r_max: 50.0, points: 200 },
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let model = |r: erlang_rain::Result<()>| r.map_err(|e| CliError::Config(e.to_string()));
        model(self.channel.validate())?;
        model(self.pathloss.validate())?;
        model(self.density.validate())?;
        model(self.weights.validate())?;
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(CliError::Config(msg.to_string()))
            }
        };
        let p = &self.policy;
        check(p.target > 0.0 && p.target.is_finite(), "policy.target must be positive")?;
        check(p.r_min > 0.0 && p.r_min.is_finite(), "policy.r_min must be positive")?;
        if let Some(r) = p.radius {
            check(r > p.r_min && r.is_finite(), "policy.radius must exceed policy.r_min")?;
            check(
                r <= self.density.support_radius(),
                "policy.radius must lie within the support of the density",
            )?;
        }
        model(self.sim.config().validate(self.channel.b))?;
        check(self.sim.replications >= 1, "sim.replications must be >= 1")?;
        model(self.cost.params().validate())?;
        check(
            !self.cost.lambda_s.is_empty() && self.cost.lambda_s.iter().all(|&l| l >= 0.0 && l.is_finite()),
            "cost.lambda_s must be a non-empty list of non-negative densities",
        )?;
        check(
            self.cost.ratios.iter().all(|&r| r > 0.0 && r.is_finite()),
            "cost.ratios must be positive",
        )?;
        let g = &self.grid;
        check(g.r_min > 0.0 && g.r_max > g.r_min && g.r_max.is_finite(), "need 0 < grid.r_min < grid.r_max")?;
        check(g.points >= 2, "grid.points must be >= 2")?;
        Ok(())
    }

    pub fn network(&self) -> Result<Network, CliError> {
        Ok(Network::new(self.pathloss, self.density.clone(), self.channel)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    /// Single-line description of the run written at the top of every output.
    pub fn manifest(&self) -> String {
        #[derive(Serialize)]
        struct Manifest<'a> {
            seed: u64,
            config: &'a Scenario,
        }
        let json = serde_json::to_string(&Manifest { seed: self.sim.seed, config: self })
            .expect("scenario serializes to JSON");
        format!("# {json}")
    }
}

/// Command-line overrides applied after the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    /// `dotted.key=value` assignments; values use TOML syntax, bare words are strings.
    pub sets: Vec<String>,
    pub profile: Option<Profile>,
    pub outputs: Option<PathBuf>,
    pub seed: Option<u64>,
    pub replications: Option<u64>,
    pub policy_kind: Option<PolicyKind>,
}

fn parse_set(assignment: &str) -> Result<(Vec<String>, Value), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("expected KEY=VALUE, got `{assignment}`")))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("malformed key `{key}`")));
    }
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    };
    Ok((path, value))
}

fn set_path(table: &mut Table, path: &[String], value: Value) -> Result<(), CliError> {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut cur = table;
    for key in parents {
        let entry = cur.entry(key.clone()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Usage(format!("`{key}` is not a section")))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

/// Sections whose `kind` selects a variant with its own set of keys.
const TAGGED_SECTIONS: &[&str] = &["density"];

/// Recursive merge; a tagged section switching its `kind` replaces the base wholesale.
fn merge(base: &mut Table, over: Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(o)) => {
                let same_kind = !TAGGED_SECTIONS.contains(&key.as_str())
                    || match (b.get("kind"), o.get("kind")) {
                        (Some(x), Some(y)) => x == y,
                        _ => true,
                    };
                if same_kind {
                    merge(b, o);
                } else {
                    *b = o;
                }
            }
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

fn parse_file(path: &Path) -> Result<Table, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.parse::<Table>()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn profile_of(table: &Table) -> Result<Option<Profile>, CliError> {
    match table.get("profile") {
        None => Ok(None),
        Some(v) => v
            .clone()
            .try_into()
            .map(Some)
            .map_err(|e| CliError::Config(format!("profile: {e}"))),
    }
}

/// Builds the validated scenario from an optional file and overrides.
pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<Scenario, CliError> {
    let file_table = match file {
        Some(path) => parse_file(path)?,
        None => Table::new(),
    };
    let mut set_table = Table::new();
    for s in &overrides.sets {
        let (path, value) = parse_set(s)?;
        set_path(&mut set_table, &path, value)?;
    }
    let profile = match overrides.profile {
        Some(p) => p,
        None => match profile_of(&set_table)? {
            Some(p) => p,
            None => profile_of(&file_table)?.unwrap_or(Profile::Canonical),
        },
    };
    let mut table = Table::try_from(Scenario::from_profile(profile))
        .expect("profile serializes to a table");
    merge(&mut table, file_table);
    merge(&mut table, set_table);
    table.insert("profile".into(), Value::try_from(profile).expect("profile name"));
    let mut scenario: Scenario = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string().trim().to_string()))?;

    if let Some(dir) = &overrides.outputs {
        scenario.outputs = dir.clone();
    }
    if let Ok(seed) = std::env::var(SEED_ENV) {
        scenario.sim.seed = seed
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{SEED_ENV} must be an unsigned integer, got `{seed}`")))?;
    }
    if let Some(seed) = overrides.seed {
        scenario.sim.seed = seed;
    }
    if let Some(n) = overrides.replications {
        scenario.sim.replications = n;
    }
    if let Some(kind) = overrides.policy_kind {
        scenario.policy.kind = kind;
    }
    scenario.validate()?;
    Ok(scenario)
}

/// Loads a scenario file without command-line overrides.
pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    resolve(Some(path), &Overrides::default())
}
