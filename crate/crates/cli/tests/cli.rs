use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use erlang_rain_cli::{load_scenario, Profile, Scenario};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_erlang-rain"));
    cmd.env_remove("ERLANG_RAIN_SEED");
    cmd
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).arg("--outputs").arg(dir).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

/// Manifest line, header and numeric rows of an output CSV.
fn read_csv(path: &Path) -> (String, String, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let manifest = lines.next().unwrap().to_string();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (manifest, header, rows)
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn profile_name_alone_expands_to_canonical() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "s.toml", "profile = \"canonical\"\n");
    assert_eq!(load_scenario(&p).unwrap(), Scenario::from_profile(Profile::Canonical));
}

#[test]
fn negative_gamma_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "s.toml", "profile = \"canonical\"\n[channel]\ngamma = -1.0\n");
    let err = load_scenario(&p).unwrap_err();
    assert!(err.to_string().contains("gamma must be positive"), "{err}");
    assert_eq!(err.exit_code(), 1);

    let out = run(&["prec", "--config", p.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma must be positive"));
}

#[test]
fn load_serialize_load_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "s.toml",
        "profile = \"canonical\"\n[policy]\nkind = \"waterfill\"\nradius = 30.0\n\
         [density]\nkind = \"radial\"\nprofile = { edges = [0.0, 10.0, 40.0], values = [20.0, 5.0] }\n",
    );
    let first = load_scenario(&p).unwrap();
    assert_eq!(first.policy.radius, Some(30.0));
    let again = write(dir.path(), "again.toml", &first.to_toml());
    assert_eq!(load_scenario(&again).unwrap(), first);
}

#[test]
fn unknown_keys_and_syntax_errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "typo.toml", "[channel]\ngama = 2.0\n");
    let err = load_scenario(&p).unwrap_err().to_string();
    assert!(err.contains("gama"), "{err}");

    let p = write(dir.path(), "broken.toml", "[channel]\ngamma = = 2\n");
    let err = load_scenario(&p).unwrap_err().to_string();
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn config_layers_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "s.toml", "[sim]\nseed = 5\n[channel]\ngamma = 2.0\n");
    let show = |extra: &[&str], env: Option<&str>| -> Scenario {
        let mut cmd = bin();
        cmd.args(["config", "--config", p.to_str().unwrap()]).args(extra);
        if let Some(s) = env {
            cmd.env("ERLANG_RAIN_SEED", s);
        }
        let out = cmd.output().unwrap();
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        toml::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap()
    };
    let s = show(&[], None);
    assert_eq!((s.sim.seed, s.channel.gamma), (5, 2.0));
    assert_eq!(s.channel.lambda_e, 0.125);
    let s = show(&["--set", "channel.gamma=3", "--set", "policy.kind=cod"], None);
    assert_eq!(s.channel.gamma, 3.0);
    assert_eq!(s.policy.kind.name(), "cod");
    assert_eq!(show(&[], Some("77")).sim.seed, 77);
    assert_eq!(show(&["--seed", "9"], Some("77")).sim.seed, 9);
    assert_eq!(show(&["--profile", "quiet"], None).channel.lambda_e, 0.0);
}

#[test]
fn prec_rows_are_ordered_and_carry_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["prec", "--set", "grid.points=40"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (manifest, header, rows) = read_csv(&dir.path().join("prec.csv"));
    assert!(manifest.starts_with("# {"));
    let json: serde_json::Value = serde_json::from_str(&manifest[2..]).unwrap();
    assert_eq!(json["seed"], 1);
    assert_eq!(json["config"]["channel"]["gamma"], 1.0);
    assert_eq!(header, "r,p_rec,p_rec_lower,p_rec_upper");
    assert_eq!(rows.len(), 40);
    for r in &rows {
        assert!(r[2] <= r[1] + 1e-8 && r[1] <= r[3] + 1e-8, "{r:?}");
    }
    // near the receiver only noise matters and it is negligible
    assert!(rows[0][1] > 0.999);
}

#[test]
fn policy_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let radius = |kind: &str| -> f64 {
        let out = run(&["policy", "--kind", kind, "--set", "grid.points=60"], dir.path());
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let line = String::from_utf8(out.stdout).unwrap();
        line.trim().rsplit(' ').next().unwrap().parse().unwrap()
    };
    let r0 = radius("naive");
    let s = Scenario::from_profile(Profile::Canonical);
    let closed = (s.channel.p_bar * s.pathloss.kappa / (s.channel.gamma * s.channel.noise_w))
        .powf(1.0 / s.pathloss.eta);
    assert!((r0 - closed).abs() < 1e-9 * closed);

    let r_maxm = radius("maxmin");
    let (_, header, rows) = read_csv(&dir.path().join("policy_maxmin_rho.csv"));
    assert_eq!(header, "r,rho,rho_lower,rho_upper");
    let inside: Vec<f64> = rows.iter().filter(|r| r[0] <= r_maxm).map(|r| r[2] / 0.75).collect();
    let level = inside[0];
    assert!(inside.iter().all(|v| (v / level - 1.0).abs() < 1e-6));
    let (_, header, d) = read_csv(&dir.path().join("policy_maxmin_d.csv"));
    assert_eq!(header, "r,d");
    assert!(d.iter().all(|r| (0.0..=1.0).contains(&r[1])));

    assert!(radius("waterfill") > r_maxm);
    assert!(radius("cod") >= r_maxm);
}

#[test]
fn cost_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["cost", "--set", "cost.lambda_s=[0, 2, 5, 9, 14]"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (_, header, sweep) = read_csv(&dir.path().join("cost_sweep.csv"));
    assert_eq!(header, "lambda_s,lambda_c,cost");
    assert_eq!(sweep.len(), 5);
    assert!(sweep.windows(2).all(|w| w[1][1] <= w[0][1]));
    let (_, header, gain) = read_csv(&dir.path().join("cost_gain.csv"));
    assert_eq!(header, "ratio,gain,gain_naive");
    assert!((gain[0][1] - 1.0).abs() < 1e-9);
    assert!(gain.windows(2).all(|w| w[1][1] >= w[0][1]));
    assert!(gain.iter().all(|g| g[2] <= g[1]));
}

#[test]
fn validation_passes_and_its_negative_control_fails() {
    let dir = tempfile::tempdir().unwrap();
    let ok = run(&["validate", "--replications", "4"], dir.path());
    let report = String::from_utf8_lossy(&ok.stdout);
    assert_eq!(code(&ok), 0, "{report}");
    assert!(report.lines().count() > 5 && report.lines().all(|l| l.starts_with("PASS")));

    let bad = run(&["validate", "--replications", "4", "--self-test"], dir.path());
    assert_eq!(code(&bad), 3);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("p_rec"));

    let quiet = run(&["validate", "--profile", "quiet"], dir.path());
    assert_eq!(code(&quiet), 0, "{}", String::from_utf8_lossy(&quiet.stderr));
}

#[test]
fn traces_reproduce_from_the_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["trace", "--set", "sim.duration=0.5"];
    assert_eq!(code(&run(&args, a.path())), 0);
    assert_eq!(code(&run(&args, b.path())), 0);
    // the manifests differ only by the output directory
    let body = |p: &Path| {
        let text = fs::read_to_string(p.join("trace.csv")).unwrap();
        text.split_once('\n').unwrap().1.to_string()
    };
    let text = body(a.path());
    assert_eq!(text, body(b.path()));
    assert!(text.starts_with("t,r,h,admissible,accepted,interference,success\n"));
    assert!(text.lines().count() > 1000);

    let out = bin()
        .args(args)
        .arg("--outputs")
        .arg(b.path())
        .env("ERLANG_RAIN_SEED", "2")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert_ne!(body(b.path()), text);
    let other = fs::read_to_string(b.path().join("trace.csv")).unwrap();
    assert!(other.starts_with("# {\"seed\":2,"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["bogus"], dir.path())), 1);
    assert_eq!(code(&run(&["prec", "--set", "grid.points=x"], dir.path())), 1);
    let out = run(&["policy", "--kind", "cod", "--set", "policy.target=100"], dir.path());
    assert_eq!(code(&out), 2);
    assert_eq!(code(&bin().arg("--help").output().unwrap()), 0);
}
