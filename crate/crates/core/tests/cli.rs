use std::process::{Command, Output};

fn chromaperc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chromaperc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn single_edge_passes() {
    let o = chromaperc(&["verify", "--case", "single_edge", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("thm1_bc,1,0,1,1,8,<=,true"), "{}", rows[1]);
    assert!(rows[2].starts_with("thm1_ad,1,1,4,1,8,>=,true"), "{}", rows[2]);
}

#[test]
fn hk_ground_size_13_is_a_config_error() {
    let o = chromaperc(&["verify", "--case", "hk", "--ground-size", "13"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_without_sizes_is_a_config_error() {
    let o = chromaperc(&["sweep", "--family", "tri_site"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_alpha_grid_is_a_config_error() {
    let o = chromaperc(&[
        "sweep", "--family", "tri_site", "--sizes", "4,6", "--alpha-start", "0.2", "--alpha-stop", "0.4",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fuzzed_verify_passes_in_json() {
    let o = chromaperc(&["verify", "--case", "thm1_ad", "--batches", "20", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 20);
    assert!(lines.iter().all(|v| v["holds"] == true));
    assert!(lines[0]["lhs"]["num"].is_string());
}

#[test]
fn exact_rhombus_crossing_reports_duality() {
    let o = chromaperc(&[
        "crossing", "--lattice", "rhombus", "--size", "3", "--pattern", "bc", "--exact", "--format", "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["duality"]["violations"], 0);
    assert_eq!(v["duality"]["configurations"], 512);
}

#[test]
fn seed_comes_from_the_environment() {
    let args = ["crossing", "--lattice", "rectangle", "--size", "5", "--pattern", "ad", "--trials", "2000", "--format", "csv"];
    let run = |seed: &str| {
        Command::new(env!("CARGO_BIN_EXE_chromaperc"))
            .args(args)
            .env("CHROMAPERC_SEED", seed)
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(run("11"), run("11"));
    assert_ne!(run("11"), run("12"));
    let flag = chromaperc(&[&args[..], &["--seed", "11"]].concat());
    assert_eq!(flag.stdout, run("11"));
}

#[test]
fn manifest_is_written_next_to_output() {
    let dir = std::env::temp_dir().join(format!("chromaperc-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("majority.csv");
    let o = chromaperc(&[
        "majority", "--m", "1", "--trials", "1000", "--format", "csv", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("experiment_id,lattice,size,pattern,N,seed,p_hat,stderr\n"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("majority.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 1);
    assert!(manifest["version"].is_string());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn sweep_writes_svg_and_alpha_report() {
    let dir = std::env::temp_dir().join(format!("chromaperc-svg-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let svg = dir.join("curves.svg");
    let o = chromaperc(&[
        "sweep", "--family", "tri_site", "--sizes", "4,8", "--alpha-steps", "5", "--trials", "200",
        "--format", "json", "--svg-out", svg.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["curves"].as_array().unwrap().len(), 10);
    assert_eq!(v["alpha_c"][0]["family"], "tri_site");
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<polyline"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn lattice_dump_is_json() {
    let o = chromaperc(&["lattice", "--geometry", "rectangle", "--size", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["num_vertices"], 6);
    assert_eq!(v["num_elements"], 7);
}
