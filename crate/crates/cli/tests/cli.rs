use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn varboot(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_varboot"));
    cmd.args(args).env_remove("VAR_BOOT_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = varboot(args, &[]);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> serde_json::Value {
    serde_json::from_str(&ok(args)).unwrap()
}

fn simulate(dir: &Path, name: &str, n: &str) -> String {
    let p = dir.join(name).to_string_lossy().into_owned();
    ok(&["simulate", "--preset", "tgarch-high", "--dist", "t6", "--n", n, "--seed", "5", "--csv", &p]);
    p
}

#[test]
fn zeta_prints_gaussian_value() {
    let out = ok(&["zeta", "--dist", "normal", "--alpha", "0.05"]);
    assert!(out.contains("zeta=3.11"), "{out}");
    let v = json(&["zeta", "--dist", "normal,t6", "--alpha", "0.01,0.05", "--json"]);
    assert_eq!(v["results"].as_array().unwrap().len(), 4);
}

#[test]
fn envelope_layout() {
    let dir = tempfile::tempdir().unwrap();
    let path = simulate(dir.path(), "r.csv", "400");
    let text = ok(&["fit", "--input", &path, "--family", "tgarch", "--asymptotic"]);
    let keys: Vec<usize> = ["\"config\"", "\"results\"", "\"failures\"", "\"version\"", "\"seed\""]
        .iter()
        .map(|k| text.find(k).unwrap_or_else(|| panic!("missing {k}")))
        .collect();
    assert!(keys.windows(2).all(|w| w[0] < w[1]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["results"]["params"].as_array().unwrap().len(), 4);
    assert!(v["results"]["asymptotic"]["interval"]["lo"].as_f64().unwrap() < v["results"]["var_hat"].as_f64().unwrap());
    assert_eq!(v["config"]["family"], "tgarch");
}

#[test]
fn fit_then_recursive_bootstrap() {
    let dir = tempfile::tempdir().unwrap();
    let path = simulate(dir.path(), "r.csv", "500");
    let fit = json(&["fit", "--input", &path, "--family", "tgarch"]);
    let v = json(&["bootstrap", "--input", &path, "--family", "tgarch", "--design", "recursive", "--b", "99", "--seed", "3"]);
    assert_eq!(v["config"]["bootstrap"]["design"], "recursive");
    assert_eq!(v["seed"], 3);
    assert_eq!(v["results"]["fit"]["var_hat"], fit["results"]["var_hat"]);
    let rt = &v["results"]["intervals"]["rt"];
    assert!(rt["lo"].as_f64().unwrap() < rt["hi"].as_f64().unwrap());
}

#[test]
fn runs_are_byte_identical_across_thread_counts() {
    let args = ["mc", "--preset", "garch-high", "--n", "300", "--s", "4", "--b", "59", "--seed", "7", "--records"];
    let a = varboot(&args, &[("VAR_BOOT_THREADS", "1")]);
    let b = varboot(&args, &[("VAR_BOOT_THREADS", "3")]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let dir = tempfile::tempdir().unwrap();
    let path = simulate(dir.path(), "r.csv", "300");
    let args = ["bootstrap", "--input", path.as_str(), "--b", "79", "--seed", "1"];
    assert_eq!(varboot(&args, &[("VAR_BOOT_THREADS", "1")]).stdout, varboot(&args, &[("VAR_BOOT_THREADS", "2")]).stdout);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let toml = dir.path().join("mc.toml");
    fs::write(&toml, "n = 250\ns = 2\nb = 59\nseed = 9\ndist = \"normal\"\n\n[fit]\nrestarts = 2\n").unwrap();
    let cfg = toml.to_string_lossy();
    let v = json(&["mc", "--config", &cfg, "--s", "3"]);
    assert_eq!(v["config"]["s_sims"], 3);
    assert_eq!(v["config"]["n"], 250);
    assert_eq!(v["config"]["fit_config"]["restarts"], 2);
    assert_eq!(v["config"]["dist"]["kind"], "standard-normal");

    let js = dir.path().join("zeta.json");
    fs::write(&js, r#"{"dist": ["t8"], "alpha": [0.05], "json": true}"#).unwrap();
    let v = json(&["zeta", "--config", &js.to_string_lossy()]);
    assert_eq!(v["results"][0]["dist"]["nu"], 8);
}

#[test]
fn error_categories() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "nn = 3\n").unwrap();
    assert_eq!(varboot(&["mc", "--config", &bad.to_string_lossy()], &[]).status.code(), Some(3));
    assert_eq!(varboot(&["mc", "--bogus"], &[]).status.code(), Some(2));
    assert_eq!(varboot(&["fit", "--input", "/nonexistent/x.csv"], &[]).status.code(), Some(4));
    assert_eq!(varboot(&["fit"], &[]).status.code(), Some(3));
    assert_eq!(varboot(&["zeta", "--dist", "t3"], &[]).status.code(), Some(2));
    let csv = dir.path().join("p.csv");
    fs::write(&csv, "date,close\n2020-01-01,1\n2020-01-01,2\n").unwrap();
    let out = varboot(&["fit", "--prices", "--input", &csv.to_string_lossy()], &[]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("duplicate"));
}

#[test]
fn rolling_on_prices() {
    let dir = tempfile::tempdir().unwrap();
    let returns = simulate(dir.path(), "r.csv", "320");
    let text = fs::read_to_string(&returns).unwrap();
    let mut price = 100.0f64;
    let mut csv = String::from("date,close\n2000-00000,100\n");
    for line in text.lines().skip(1) {
        let (d, r) = line.split_once(',').unwrap();
        price *= (r.parse::<f64>().unwrap() / 100.0).exp();
        csv.push_str(&format!("2000-{d},{price}\n"));
    }
    let prices = dir.path().join("p.csv");
    fs::write(&prices, csv).unwrap();
    let table = dir.path().join("w.csv");
    let v = json(&[
        "rolling", "--input", &prices.to_string_lossy(), "--window", "300", "--steps", "3", "--b", "59", "--seed", "2",
        "--csv", &table.to_string_lossy(),
    ]);
    let recs = v["results"].as_array().unwrap();
    assert_eq!(recs.len(), 3);
    assert!(recs.iter().all(|r| r["failure"].is_null() && r["asy_lo"].is_number()));
    assert_eq!(fs::read_to_string(&table).unwrap().lines().count(), 4);
}
