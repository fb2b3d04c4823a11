use std::fs;

use mixsing::cli::{main_with_args, EXIT_CONFIG, EXIT_OK};
use tempfile::TempDir;

fn run(args: &[&str]) -> i32 {
    let mut full = vec!["mixsing"];
    full.extend_from_slice(args);
    main_with_args(full)
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

fn json(p: &str) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn formulas_exit_codes() {
    assert_eq!(run(&["formulas", "--N", "3", "--r", "1", "--gamma", "0.5", "--json"]), EXIT_OK);
    assert_eq!(run(&["formulas", "--N", "3", "--r", "1", "--gamma", "0"]), EXIT_CONFIG);
    assert_eq!(run(&["formulas", "--N", "5", "--gamma", "1"]), EXIT_CONFIG);
}

#[test]
fn usage_errors() {
    assert_eq!(run(&["frobnicate"]), EXIT_CONFIG);
    assert_eq!(run(&["solve", "--m", "abc"]), EXIT_CONFIG);
    assert_eq!(run(&["--help"]), EXIT_OK);
    assert_eq!(run(&["solve", "--weight", "nonsense:3", "--m", "7"]), EXIT_CONFIG);
    assert_eq!(run(&["solve", "--s", "1.5", "--m", "7"]), EXIT_CONFIG);
    assert_eq!(run(&["solve", "--m", "7", "--schedule", "4,2"]), EXIT_CONFIG);
    assert_eq!(run(&["solve", "--m", "7", "--config", "/nonexistent/cfg.toml"]), EXIT_CONFIG);
}

#[test]
fn solve_writes_report_and_profile_deterministically() {
    let dir = TempDir::new().unwrap();
    let (a, b, prof) = (path(&dir, "a.json"), path(&dir, "b.json"), path(&dir, "p.csv"));
    let base = ["solve", "--m", "11", "--gamma", "1", "--weight", "deltapow:0.5"];
    let mut args = base.to_vec();
    args.extend(["--out-json", &a, "--out-profile", &prof]);
    assert_eq!(run(&args), EXIT_OK);
    let mut args = base.to_vec();
    args.extend(["--out-json", &b]);
    assert_eq!(run(&args), EXIT_OK);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let v = json(&a);
    assert_eq!(v["flag"], "CONVERGED");
    assert_eq!(v["problem"]["resolution"], 11);
    let text = fs::read_to_string(&prof).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,x1,x2,delta,value"));
    assert!(lines.count() >= 5);
}

#[test]
fn config_file_with_flag_override() {
    let dir = TempDir::new().unwrap();
    let cfg = path(&dir, "c.toml");
    fs::write(&cfg, "[problem]\nN = 2\nm = 9\ngamma = 0.5\nweight = \"deltapow:0.25\"\n").unwrap();
    let out = path(&dir, "o.json");
    assert_eq!(run(&["solve", "--config", &cfg, "--m", "7", "--out-json", &out]), EXIT_OK);
    let v = json(&out);
    assert_eq!(v["problem"]["resolution"], 7);
    assert_eq!(v["problem"]["gamma"], 0.5);

    fs::write(&cfg, "[problem]\nbogus = 1\n").unwrap();
    assert_eq!(run(&["solve", "--config", &cfg]), EXIT_CONFIG);
}

#[test]
fn weight_file() {
    let dir = TempDir::new().unwrap();
    let wf = path(&dir, "w.txt");
    let mut text = String::from("2 5\n");
    for k in 0..25 {
        text.push_str(&format!("{}\n", 1.0 + k as f64 / 25.0));
    }
    fs::write(&wf, &text).unwrap();
    let out = path(&dir, "o.json");
    let weight = format!("file:{wf}");
    assert_eq!(run(&["solve", "--m", "5", "--weight", &weight, "--r", "2", "--out-json", &out]), EXIT_OK);
    assert_eq!(json(&out)["flag"], "CONVERGED");
    assert_eq!(run(&["solve", "--m", "7", "--weight", &weight, "--out-json", &out]), EXIT_CONFIG);
}

#[test]
fn nonexistence_is_a_result() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "o.json");
    assert_eq!(run(&["solve", "--m", "5", "--weight", "deltapow:2.5", "--out-json", &out]), EXIT_OK);
    assert_eq!(json(&out)["flag"], "NONEXISTENT");
}

#[test]
fn sweep_csv() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "s.csv");
    let args = ["sweep", "--gammas", "1", "--zetas", "0.5,2.2", "--ladder", "7", "--out", &out];
    assert_eq!(run(&args), EXIT_OK);
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("N,m,s,gamma,zeta_or_r,kappa_pred,kappa_fit,stderr,r2,flag"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].ends_with("NONEXISTENT"));
}

#[test]
fn eigen_and_green() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "e.json");
    assert_eq!(run(&["eigen", "--m", "9", "--out-json", &out]), EXIT_OK);
    let v = json(&out);
    assert!(v["lambda"].as_f64().unwrap() > 2.0 * std::f64::consts::PI.powi(2));

    let g = path(&dir, "g.json");
    let csv = path(&dir, "g.csv");
    assert_eq!(run(&["green", "--N", "2", "--m", "11", "--out-json", &g, "--out-csv", &csv]), EXIT_OK);
    assert!(json(&g).is_object());
    assert!(fs::read_to_string(&csv).unwrap().lines().count() > 1);
    assert_eq!(run(&["green", "--N", "2", "--m", "11", "--sources", "100000", "--out-json", &g]), EXIT_CONFIG);
}

#[test]
fn verify_single_criterion() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "v.json");
    assert_eq!(run(&["verify", "--quick", "--only", "13", "--out-json", &out]), EXIT_OK);
    let v = json(&out);
    assert_eq!(v["passed"], true);
    assert_eq!(v["quick"], true);
    let rows = v["criteria"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["id"], 13);
    assert_eq!(rows[0]["passed"], true);
    assert_eq!(run(&["verify", "--only", "14"]), EXIT_CONFIG);
}
