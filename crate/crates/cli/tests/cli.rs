use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dpg-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

fn dpg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpg"))
        .args(args)
        .env_remove("DPG_THREADS")
        .output()
        .unwrap()
}

fn rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let body = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, body)
}

const EUROPEAN: &str = r#"{
    "contract": {"type": "european", "right": "put", "strike": 100},
    "market": {"rate": 0.05, "vol": 0.3, "spot": 100, "maturity": 1},
    "discretization": {"formulation": "primal", "n_elements": 64, "n_steps": 40},
    "greeks": ["delta", "gamma"],
    "converge": {"axis": "space", "levels": 3}
}"#;

#[test]
fn malformed_config_exits_one_without_output() {
    let dir = scratch("malformed");
    let cfg = write_config(&dir, "{ \"contract\": ");
    let out = dir.join("out");
    let o = dpg(&["price", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());

    let cfg = write_config(&dir, &EUROPEAN.replace("\"vol\": 0.3", "\"vol\": -0.3"));
    let o = dpg(&["price", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("market.vol"));
    assert!(!out.exists());
}

#[test]
fn bad_arguments_exit_one() {
    assert_eq!(dpg(&["price"]).status.code(), Some(1));
    assert_eq!(dpg(&["frobnicate", "--config", "x"]).status.code(), Some(1));
    assert_eq!(dpg(&["--help"]).status.code(), Some(0));

    let dir = scratch("threads");
    let cfg = write_config(&dir, EUROPEAN);
    let o = Command::new(env!("CARGO_BIN_EXE_dpg"))
        .args(["price", "--config", cfg.to_str().unwrap()])
        .env("DPG_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = dpg(&["price", "--config", cfg.to_str().unwrap(), "--threads", "0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn command_mismatch_is_a_config_error() {
    let dir = scratch("mismatch");
    let text = EUROPEAN.replacen('{', "{\"command\": \"surface\",", 1);
    let cfg = write_config(&dir, &text);
    assert_eq!(dpg(&["price", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(dpg(&["surface", "--config", cfg.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn numerical_failure_exits_two_without_output() {
    let dir = scratch("numerical");
    let text = r#"{
        "contract": {"type": "american", "strike": 100,
                     "lcp": {"solver": "psor", "max_iterations": 1}},
        "market": {"rate": 0.05, "vol": 0.15, "spot": 100, "maturity": 1},
        "discretization": {"n_elements": 200, "n_steps": 10}
    }"#;
    let cfg = write_config(&dir, text);
    let out = dir.join("out");
    let o = dpg(&["price", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.join("price.csv").exists());
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let dir = scratch("stable");
    let cfg = write_config(&dir, EUROPEAN);
    let mut files = Vec::new();
    for (k, threads) in ["1", "2"].iter().enumerate() {
        let out = dir.join(format!("run{k}"));
        let o = dpg(&[
            "price",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert_eq!(o.status.code(), Some(0));
        files.push(std::fs::read(out.join("price.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let before = std::fs::read(&cfg).unwrap();
    assert_eq!(before, EUROPEAN.as_bytes());
}

#[test]
fn price_row_has_requested_greeks() {
    let dir = scratch("price");
    let cfg = write_config(&dir, EUROPEAN);
    let o = dpg(&["price", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let (header, body) = rows(&dir.join("price.csv"));
    assert_eq!(body.len(), 1);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let price: f64 = body[0][col("price")].parse().unwrap();
    let delta: f64 = body[0][col("delta")].parse().unwrap();
    assert!((price - 9.3).abs() < 0.5, "{price}");
    assert!((-1.0..0.0).contains(&delta));
    assert!(header.contains(&"gamma".to_string()));
    assert!(!header.contains(&"vega".to_string()));
    // 17 significant digits
    let mantissa = body[0][col("price")].split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17);
}

#[test]
fn converge_orders_match_error_columns() {
    let dir = scratch("converge");
    let cfg = write_config(&dir, EUROPEAN);
    let o = dpg(&["converge", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let (header, body) = rows(&dir.join("converge.csv"));
    assert_eq!(body.len(), 3);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    for metric in ["l2", "linf"] {
        let e: Vec<f64> = body
            .iter()
            .map(|r| r[col(&format!("{metric}_error"))].parse().unwrap())
            .collect();
        assert!(body[0][col(&format!("{metric}_order"))].is_empty());
        for k in 1..e.len() {
            let order: f64 = body[k][col(&format!("{metric}_order"))].parse().unwrap();
            assert!((order - (e[k - 1] / e[k]).log2()).abs() < 1e-12);
        }
    }
    let n: Vec<usize> = body.iter().map(|r| r[col("n_elements")].parse().unwrap()).collect();
    assert_eq!(n, [64, 128, 256]);
}

#[test]
fn surface_has_one_row_per_node_and_level() {
    let dir = scratch("surface");
    let cfg = write_config(&dir, EUROPEAN);
    let o = dpg(&["surface", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let (header, body) = rows(&dir.join("surface.csv"));
    assert_eq!(header, ["tau", "x", "u"]);
    // the strike-aligned mesh may carry one element more than requested
    let first: Vec<&String> = body.iter().take_while(|r| r[0] == body[0][0]).map(|r| &r[1]).collect();
    let n_nodes = first.len();
    assert!(n_nodes == 65 || n_nodes == 66, "{n_nodes}");
    assert_eq!(body.len(), n_nodes * 41);
    for level in body.chunks(n_nodes) {
        assert!(level.iter().all(|r| r[0] == level[0][0]));
        assert_eq!(level.iter().map(|r| &r[1]).collect::<Vec<_>>(), first);
    }
}

#[test]
fn json_mirrors_csv() {
    let dir = scratch("json");
    let cfg = write_config(&dir, EUROPEAN);
    for format in ["csv", "json"] {
        let o = dpg(&[
            "greeks", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap(),
            "--format", format,
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    let (header, body) = rows(&dir.join("greeks.csv"));
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("greeks.json")).unwrap()).unwrap();
    let json = json.as_array().unwrap();
    assert_eq!(json.len(), body.len());
    for (obj, row) in json.iter().zip(&body) {
        let keys: Vec<&String> = obj.as_object().unwrap().keys().collect();
        assert_eq!(keys, header.iter().collect::<Vec<_>>());
        for (h, cell) in header.iter().zip(row) {
            let csv_value: f64 = cell.parse().unwrap();
            assert_eq!(obj[h].as_f64().unwrap(), csv_value);
        }
    }
}

#[test]
fn stdout_when_no_directory_is_given() {
    let dir = scratch("stdout");
    let cfg = write_config(&dir, EUROPEAN);
    let o = dpg(&["price", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("method,spot,strike"));
    assert_eq!(text.lines().count(), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("price:"));
}

#[test]
fn asian_table_compare_emits_every_cell() {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/asian_compare.json");
    let dir = scratch("asian");
    let o = dpg(&["compare", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let (header, body) = rows(&dir.join("compare.csv"));
    assert_eq!(body.len(), 12);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let mut within = 0;
    for r in &body {
        let dpg: f64 = r[col("dpg_price")].parse().unwrap();
        let reference: f64 = r[col("oracle_price")].parse().unwrap();
        let dev: f64 = r[col("deviation")].parse().unwrap();
        assert_eq!(r[col("oracle")], "reference");
        assert!((dev - (dpg - reference)).abs() <= 1e-12 * reference.abs());
        assert_eq!(r[col("within_tolerance")] == "true", dev.abs() <= 0.01);
        within += usize::from(dev.abs() <= 0.01);
    }
    // the higher-volatility cells meet the tolerance
    assert!(within >= 5, "{within}");
}

#[test]
fn european_compare_uses_the_closed_form() {
    let dir = scratch("compare");
    let text = EUROPEAN.replacen(
        "\"converge\"",
        "\"compare\": {\"vols\": [0.2, 0.3], \"strikes\": [90, 110]}, \"converge\"",
        1,
    );
    let cfg = write_config(&dir, &text);
    let o = dpg(&["compare", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, body) = rows(&dir.join("compare.csv"));
    assert_eq!(body.len(), 4);
    assert!(!header.contains(&"within_tolerance".to_string()));
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    for r in &body {
        assert_eq!(r[col("oracle")], "closed_form");
        let dev: f64 = r[col("deviation")].parse().unwrap();
        assert!(dev.abs() < 0.5);
    }
}
