use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use framesim::io::VERSION;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_framesim"))
}

fn tiny() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/tiny.toml")
}

fn run(scenario: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .args(["--scenario", scenario, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .env("FRAMESIM_THREADS", "2")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Header comment, column line and the numeric rows of a table.
fn table(dir: &Path, name: &str) -> (String, Vec<String>, Vec<Vec<String>>) {
    let text = read(dir, name);
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let columns = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, columns, rows)
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&read(dir, "summary.json")).unwrap()
}

fn check_header(line: &str, hash: &str) {
    assert_eq!(line, format!("# framesim {VERSION} config_hash={hash}"));
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn tiny_text() -> String {
    std::fs::read_to_string(tiny()).unwrap()
}

#[test]
fn oracle_outputs_and_headers() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("oracle", &tiny(), dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = summary(dir.path());
    let hash = s["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert_eq!(s["version"], VERSION);
    assert_eq!(s["scenario"], "oracle");
    let (h, cols, rows) = table(dir.path(), "oracle.csv");
    check_header(&h, hash);
    assert_eq!(cols, ["n_over_ncrit", "chi_over_chi0", "j_over_j0", "cumulative_xi", "cumulative_ratio", "transfer_amplitude"]);
    assert_eq!(rows.len(), 121);
    let (h, cols, _) = table(dir.path(), "tradeoff.csv");
    check_header(&h, hash);
    assert_eq!(cols, ["n_crit", "ringup_ratio", "transfer_ratio"]);
    for row in rows {
        for x in row {
            x.parse::<f64>().unwrap();
        }
    }
}

#[test]
fn transfer_writes_every_artifact_and_reruns_identically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let oa = run("transfer", &tiny(), a.path(), &[]);
    assert!(oa.status.success(), "{}", stderr(&oa));
    assert!(String::from_utf8_lossy(&oa.stdout).contains("mech_fidelity"));
    let ob = run("transfer", &tiny(), b.path(), &[]);
    assert!(ob.status.success());
    let files = ["trajectory.csv", "observables.csv", "summary.json", "wigner_mech.csv", "wigner_cavity_switch.csv"];
    for f in files {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f} differs between runs");
    }

    let s = summary(a.path());
    let hash = s["config_hash"].as_str().unwrap();
    let f = s["results"]["mech_fidelity"].as_f64().unwrap();
    assert!((0.0..=1.0 + 1e-9).contains(&f));
    assert_eq!(s["config"]["truncation"]["n_cav"], 6);
    assert!(s.get("runtime").is_none());

    let (h, cols, rows) = table(a.path(), "trajectory.csv");
    check_header(&h, hash);
    assert_eq!(cols, ["t_ns", "re_dalpha", "im_dalpha", "re_dbeta", "im_dbeta", "re_alpha", "im_alpha", "re_beta", "im_beta"]);
    assert_eq!(rows.len(), 16 + 200);
    let (h, cols, rows) = table(a.path(), "observables.csv");
    check_header(&h, hash);
    assert_eq!(cols, ["t_ns", "n_cav_centered", "n_mech_centered", "squeeze_ratio", "delta_phi", "fidelity"]);
    assert!(rows.iter().all(|r| r.len() == 6));

    let text = read(a.path(), "wigner_mech.csv");
    let lines: Vec<&str> = text.lines().collect();
    check_header(lines[0], hash);
    assert_eq!(lines.len(), 3 + 11);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 11));
}

#[test]
fn overrides_change_the_hash() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run("oracle", &tiny(), a.path(), &[]).status.success());
    assert!(run("oracle", &tiny(), b.path(), &["--tau-ns", "0.5", "--ncav-dim", "7", "--nmech-dim", "3"]).status.success());
    let (sa, sb) = (summary(a.path()), summary(b.path()));
    assert_ne!(sa["config_hash"], sb["config_hash"]);
    assert_eq!(sb["config"]["stepper"]["tau"].as_f64(), Some(0.5e-9));
    assert_eq!(sb["config"]["truncation"]["n_mech"], 3);
}

#[test]
fn json_config_matches_toml() {
    let dir = tempfile::tempdir().unwrap();
    let value: toml::Value = toml::from_str(&tiny_text()).unwrap();
    let cfg = write(dir.path(), "tiny.json", &serde_json::to_string(&value).unwrap());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run("oracle", &tiny(), &a, &[]).status.success());
    let o = run("oracle", &cfg, &b, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read(&a, "oracle.csv"), read(&b, "oracle.csv"));
}

#[test]
fn sweep_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = run("sweep", &tiny(), &a, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = bin().args(["--scenario", "sweep", "--config"]).arg(tiny()).arg("--out").arg(&b).env("FRAMESIM_THREADS", "1").output().unwrap();
    assert!(o.status.success());
    assert_eq!(read(&a, "sweep.csv"), read(&b, "sweep.csv"));
    let (_, cols, rows) = table(&a, "sweep.csv");
    assert_eq!(cols, ["index", "kappa_hz", "gamma_hz", "e1_hz", "variant", "mech_fidelity", "g_om_hz", "error"]);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][1].parse::<f64>().unwrap(), 1e5);
    assert_eq!(rows[0][4], "jc");
}

#[test]
fn benchmark_and_small_experiments() {
    let dir = tempfile::tempdir().unwrap();
    let out = |s: &str| dir.path().join(s);

    let o = run("benchmark", &tiny(), &out("bench"), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, cols, rows) = table(&out("bench"), "benchmark.csv");
    assert_eq!(cols, ["e_c_hz", "tau_ns", "n_cav_dim", "u", "r_eps", "r_disp"]);
    assert_eq!(rows.len(), 2);
    let u: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(u[0] < u[1]);

    let o = run("displaced-jc", &tiny(), &out("djc"), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, cols, rows) = table(&out("djc"), "deformation.csv");
    assert_eq!(cols[0], "init");
    assert_eq!(rows.len(), 9);
    assert!(["zero", "one", "plus"].iter().all(|s| out("djc").join(format!("wigner_displaced_{s}.csv")).exists()));

    let o = run("driven-jc", &tiny(), &out("driven"), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = summary(&out("driven"));
    assert_eq!(s["results"]["reached"], true);
    assert!(s["results"]["branch_squeeze"]["ratio"].as_f64().unwrap() >= 1.0);

    let o = run("forced-jc", &tiny(), &out("forced"), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, cols, rows) = table(&out("forced"), "forced_jc.csv");
    assert_eq!(cols, ["t_ns", "squeeze_ratio", "theory_ratio"]);
    assert_eq!(rows.len(), 5);
}

#[test]
fn missing_model_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[wigner]\nextent = 2.0\n");
    let o = run("oracle", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing field `model`"), "{}", stderr(&o));
}

#[test]
fn missing_config_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("oracle", &dir.path().join("nope.toml"), &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn transfer_without_drive_segments_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = tiny_text();
    let cut = text.find("[[model.drive_segments]]").unwrap();
    let rest = &text[text.find("[truncation]").unwrap()..];
    let cfg = write(dir.path(), "c.toml", &format!("{}{}", &text[..cut], rest));
    let o = run("transfer", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("model.drive_segments"), "{}", stderr(&o));
}

#[test]
fn invalid_values_and_unknown_keys_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "neg.toml", &tiny_text().replace("kappa_hz = 0.0", "kappa_hz = -5.0"));
    let o = run("oracle", &cfg, &dir.path().join("a"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("model.kappa_hz"), "{}", stderr(&o));

    let cfg = write(dir.path(), "extra.toml", &format!("{}\n[oracle]\nbogus = 1\n", tiny_text()));
    let o = run("oracle", &cfg, &dir.path().join("b"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus"), "{}", stderr(&o));

    let o = bin().args(["--scenario", "nonsense", "--config", "x", "--out", "y"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_guard_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &tiny_text().replace("leakage_limit = 2e-2", "leakage_limit = 1e-30"));
    let o = run("driven-jc", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("leakage"), "{}", stderr(&o));
}

#[test]
fn shipped_configs_load() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["full.toml", "scaled.toml", "tiny.toml"] {
        let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
        let o = run("oracle", &cfg, &dir.path().join(name), &[]);
        assert!(o.status.success(), "{name}: {}", stderr(&o));
    }
}
