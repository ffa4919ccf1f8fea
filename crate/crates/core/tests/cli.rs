use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use odegcn::data::{load_populations, write_series, TimeSeriesTable, Timestamps};
use serde_json::Value;

fn odegcn(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_odegcn"));
    cmd.args(args).arg("--out").arg(out);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().unwrap()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL_RD: &str = "[synth]\nn = 6\nhorizon = 300\n[train]\nmax_epochs = 15\n";

#[test]
fn synth_is_byte_identical_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", SMALL_RD);
    for d in ["a", "b"] {
        ok(&odegcn(&["synth", "--seed", "7"], Some(&cfg), &tmp.path().join(d)));
    }
    for f in ["series.csv", "edges.csv", "truth.json"] {
        let a = std::fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn invalid_topology_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "[synth]\ntopology = \"star\"\n");
    let out = tmp.path().join("o");
    let o = odegcn(&["synth"], Some(&cfg), &out);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert_eq!(err.trim().lines().count(), 1, "{err}");
    assert!(!out.exists());
}

#[test]
fn sir_episodes_conserve_population() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "model = \"sir\"\n[synth]\nn = 5\nhorizon = 25\nepisodes = 3\n");
    let out = tmp.path().join("o");
    ok(&odegcn(&["synth"], Some(&cfg), &out));
    let pop = load_populations(out.join("population.csv")).unwrap();
    let mut rdr = csv::Reader::from_path(out.join("compartments.csv")).unwrap();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let i: usize = rec[2].parse().unwrap();
        let total: f64 = (3..6).map(|k| rec[k].parse::<f64>().unwrap()).sum();
        assert!((total - pop[i]).abs() <= 1e-9 * pop[i]);
        rows += 1;
    }
    assert_eq!(rows, 3 * 25 * 5);
}

#[test]
fn maml_with_zero_iterations_changes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &format!("{SMALL_RD}[maml]\niterations = 0\n"));
    let data = tmp.path().join("data");
    ok(&odegcn(&["synth"], Some(&cfg), &data));
    let snap = data.join("resolved_config.toml");
    ok(&odegcn(&["train"], Some(&snap), &tmp.path().join("plain")));
    ok(&odegcn(&["train", "--maml"], Some(&snap), &tmp.path().join("maml")));
    let a = std::fs::read(tmp.path().join("plain/checkpoint.json")).unwrap();
    let b = std::fs::read(tmp.path().join("maml/checkpoint.json")).unwrap();
    assert_eq!(a, b);
    let h = std::fs::read_to_string(tmp.path().join("plain/history.csv")).unwrap();
    assert!(h.starts_with("epoch,train_loss,val_loss\n"));
}

#[test]
fn missing_series_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "[data]\nseries = \"no/such/series.csv\"\nedges = \"e.csv\"\n");
    let o = odegcn(&["train"], Some(&cfg), &tmp.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no/such/series.csv"));
}

#[test]
fn true_parameters_score_zero_on_noiseless_data() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", SMALL_RD);
    let data = tmp.path().join("data");
    ok(&odegcn(&["synth"], Some(&cfg), &data));
    let snap = std::fs::read_to_string(data.join("resolved_config.toml")).unwrap();
    let mut table: toml::Table = snap.parse().unwrap();
    let truth = data.join("truth.json").to_str().unwrap().to_string();
    table["data"].as_table_mut().unwrap().insert("checkpoint".into(), truth.into());
    table["eval"].as_table_mut().unwrap().insert("regime".into(), "all".into());
    let eval_cfg = write_config(tmp.path(), "eval.toml", &table.to_string());
    let out = tmp.path().join("eval");
    ok(&odegcn(&["eval"], Some(&eval_cfg), &out));
    let m = json(out.join("metrics.json"));
    assert!(m["mae"].as_f64().unwrap() < 1e-9);
    assert!(m["mae"].as_f64().unwrap() <= m["rmse"].as_f64().unwrap());
    assert!(m["config_hash"].as_str().unwrap().len() == 16);
}

#[test]
fn all_zero_column_is_only_dropped() {
    let tmp = tempfile::tempdir().unwrap();
    let n = 3;
    let rows: Vec<Vec<f64>> = (0..200)
        .map(|t| vec![50.0 + (t as f64 * 0.3).sin(), 0.0, 40.0 + (t as f64 * 0.2).cos()])
        .collect();
    let stamps = (0..rows.len() as i64).map(|k| k * 300).collect();
    let table = TimeSeriesTable::fully_observed(Timestamps::Epoch(stamps), rows).unwrap();
    write_series(tmp.path().join("s.csv"), &table).unwrap();
    std::fs::write(tmp.path().join("e.csv"), "src,dst\n0,1\n1,2\n").unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &format!(
            "[data]\nseries = {:?}\nedges = {:?}\n[train]\nmax_epochs = 3\n",
            tmp.path().join("s.csv").to_str().unwrap(),
            tmp.path().join("e.csv").to_str().unwrap()
        ),
    );
    let out = tmp.path().join("o");
    ok(&odegcn(&["train"], Some(&cfg), &out));
    ok(&odegcn(&["eval"], Some(&out.join("resolved_config.toml")), &out));
    let m = json(out.join("metrics.json"));
    let pairs = m["pairs"].as_u64().unwrap();
    assert_eq!(m["dropped"].as_u64().unwrap(), pairs);
    assert_eq!(m["count"].as_u64().unwrap(), pairs * (n - 1));
}

#[test]
fn corrupted_gradient_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "[gradcheck]\ninstances = 4\ncorrupt_coordinate = 0\n");
    let out = tmp.path().join("o");
    let o = odegcn(&["gradcheck"], Some(&cfg), &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
    let r = json(out.join("gradcheck.json"));
    assert_eq!(r["passed"], Value::Bool(false));
    assert_eq!(r["families"][0]["worst_coordinate"], Value::from(0));
}

#[test]
fn single_vertex_gradcheck_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "[gradcheck]\ninstances = 10\nmax_n = 1\n");
    let o = odegcn(&["gradcheck"], Some(&cfg), &tmp.path().join("o"));
    ok(&o);
}

const SMALL_LAB: &str = "[theory]\nseeds = 2\n[theory.source]\nn = 5\nhorizon = 241\n[theory.target]\nn = 5\n[theory.train]\nmax_epochs = 20\n[theory.sample_size]\nn = 5\nsizes = [100, 400]\nseeds = 1\ntest_size = 200\n[theory.sample_size.train]\nmax_epochs = 20\n";

#[test]
fn theory_lab_identical_domains_have_no_discrepancy() {
    let tmp = tempfile::tempdir().unwrap();
    let body = SMALL_LAB.replace("[theory.target]\nn = 5\n", "[theory.target]\nn = 5\ng_pattern = \"symmetric-periodic\"\ng_amplitude = 1.0\n");
    let cfg = write_config(tmp.path(), "c.toml", &body);
    let out = tmp.path().join("o");
    let o = odegcn(&["theory-lab"], Some(&cfg), &out);
    assert!(o.status.code() != Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(out.join("disc_report.json"));
    assert!(r["mae"]["h1"]["disc"].as_f64().unwrap() < 1e-12);
    assert!(r["mae"]["h2"]["disc"].as_f64().unwrap() < 1e-12);
    let curves = std::fs::read_to_string(out.join("curves.csv")).unwrap();
    assert!(curves.starts_with("time,model,mae\n"));
}

#[test]
fn theory_lab_refuses_skewed_source() {
    let tmp = tempfile::tempdir().unwrap();
    let body = SMALL_LAB.replace("horizon = 241\n", "horizon = 241\ng_period = 964.0\nnoise_sd = 0.0\n");
    let cfg = write_config(tmp.path(), "c.toml", &body);
    let out = tmp.path().join("o");
    let o = odegcn(&["theory-lab"], Some(&cfg), &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not symmetric"));
    assert!(!out.join("disc_report.json").exists());
}

#[test]
fn snapshot_reproduces_training() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", SMALL_RD);
    let data = tmp.path().join("data");
    ok(&odegcn(&["synth", "--seed", "3"], Some(&cfg), &data));
    let first = tmp.path().join("first");
    ok(&odegcn(&["train", "--loss", "mse"], Some(&data.join("resolved_config.toml")), &first));
    let second = tmp.path().join("second");
    ok(&odegcn(&["train"], Some(&first.join("resolved_config.toml")), &second));
    for f in ["checkpoint.json", "history.csv"] {
        assert_eq!(std::fs::read(first.join(f)).unwrap(), std::fs::read(second.join(f)).unwrap(), "{f}");
    }
    let a = json(first.join("train_report.json"));
    let b = json(second.join("train_report.json"));
    assert_eq!(a["config_hash"], b["config_hash"]);
    assert_eq!(a["loss_kind"], Value::from("mse"));
}
