use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sectorcast::dataset::write_csv;
use sectorcast::regress::{fit_spec, FittedModel, ModelSpec, TermId};
use sectorcast::synth;
use sectorcast::ScalerParams;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sectorcast"));
    c.env_remove("SECTORCAST_OUT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_index(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let path = dir.join("index.csv");
    write_csv(&synth::index_dataset(n, 0.05, seed), fs::File::create(&path).unwrap()).unwrap();
    path
}

const COMPANY_HEADER: &str = "ticker,week_start,beta,fcf_per_share,pb_ratio,pe_ratio,peg_ratio,div_yield\n";
const MACRO_HEADER: &str = "week_start,interest_rate,ics,psr,gdp,wcp\n";

#[test]
fn ingest_two_tickers() {
    let dir = tempfile::tempdir().unwrap();
    let companies = dir.path().join("companies.csv");
    let macro_csv = dir.path().join("macro.csv");
    fs::write(
        &companies,
        format!("{COMPANY_HEADER}AAA,2017-01-06,1,2,3,4,5,6\nBBB,2017-01-06,3,4,5,6,7,8\nAAA,2017-01-13,1,1,1,1,1,1\n"),
    )
    .unwrap();
    fs::write(&macro_csv, format!("{MACRO_HEADER}2017-01-06,2.5,98,7,19000,880\n2017-01-13,2.6,97,7.1,19010,890\n")).unwrap();
    let out = dir.path().join("out");
    let o = run(&["ingest", "--companies", s(&companies), "--macro", s(&macro_csv), "--out", s(&out), "--quiet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let data = sectorcast::dataset::load_csv(out.join("dataset.csv")).unwrap();
    assert_eq!(data.len(), 2);
    assert_eq!(&data.rows()[0].indicators[..6], &[2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
    assert_eq!(data.rows()[1].wcp, 890.0);
}

#[test]
fn malformed_company_file_exits_2_naming_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let companies = dir.path().join("companies.csv");
    let macro_csv = dir.path().join("macro.csv");
    fs::write(&companies, format!("{COMPANY_HEADER}AAA,2017-01-06,1,2,3,4,5,6\nAAA,2017-01-13,1,x,3,4,5,6\n")).unwrap();
    fs::write(&macro_csv, MACRO_HEADER).unwrap();
    let o = run(&["ingest", "--companies", s(&companies), "--macro", s(&macro_csv), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 2") && err.contains("fcf_per_share"), "{err}");
}

#[test]
fn full_command_chain() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_index(dir.path(), 156, 31);
    let out = dir.path().join("out");
    let o = run(&["fit", "--input", s(&input), "--out", s(&out), "--quiet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "model.json",
        "elimination.json",
        "diagnostics.json",
        "screening.json",
        "qq_residuals.csv",
        "residuals_vs_fitted.csv",
        "qq_wcp.csv",
        "qq_wcp_transformed.csv",
    ] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let model = json(out.join("model.json"));
    assert_eq!(model["schema_version"], 1);
    assert_eq!(model["config"]["seed"], 20170106);
    let terms: Vec<String> = serde_json::from_value(model["terms"].clone()).unwrap();
    for t in ["X3", "X5", "X10", "X5:X7"] {
        assert!(terms.contains(&t.to_string()), "{t} not in {terms:?}");
    }
    let elim = json(out.join("elimination.json"));
    assert_eq!(elim["command"], "fit");

    let model_path = out.join("model.json");
    // predict: 100 rows in, 100 rows out, same order
    let rows = dir.path().join("rows.csv");
    write_csv(&synth::index_dataset(100, 0.05, 77), fs::File::create(&rows).unwrap()).unwrap();
    let o = run(&["predict", "--model", s(&model_path), "--rows", s(&rows), "--out", s(&out), "--quiet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let preds = fs::read_to_string(out.join("predictions.csv")).unwrap();
    let lines: Vec<&str> = preds.lines().collect();
    assert_eq!(lines[0], "row,week_start,wcp_t,wcp,observed_wcp");
    assert_eq!(lines.len(), 101);
    assert!(lines[1].starts_with("1,2017-01-06,") && lines[100].starts_with("100,"));

    let o = run(&["diagnose", "--model", s(&model_path), "--out", s(&out), "--quiet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(out.join("diagnostics.json"))["command"], "diagnose");

    let o = run(&["validate", "--model", s(&model_path), "--input", s(&input), "--cv-repeats", "2", "--out", s(&out), "--quiet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(out.join("validation.json"));
    assert_eq!(v["config"]["cv_repeats"], 2);
    assert_eq!(v["result"]["price"]["n"], 31);
    assert!(v["result"]["price"]["mape_percent"].as_f64().unwrap() < 5.0);

    let o = run(&["rank", "--model", s(&model_path), "--input", s(&input), "--out", s(&out), "--quiet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(out.join("ranking.json"));
    assert_eq!(r["result"]["method"], "partial_ss");
    assert_eq!(r["result"]["entries"][0]["term"], "X10");
}

#[test]
fn fit_is_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_index(dir.path(), 120, 5);
    let out = dir.path().join("out");
    let args = ["fit", "--input", s(&input), "--out", s(&out), "--quiet"];
    assert!(run(&args).status.success());
    let a = fs::read(out.join("model.json")).unwrap();
    let seq: Vec<&str> = args.iter().copied().chain(["--sequential", "false"]).collect();
    assert!(run(&seq).status.success());
    assert_eq!(a, fs::read(out.join("model.json")).unwrap());
}

#[test]
fn published_prediction_of_zero_row() {
    let dir = tempfile::tempdir().unwrap();
    let rows = dir.path().join("rows.csv");
    fs::write(&rows, "beta,fcf_per_share,pb_ratio,pe_ratio,peg_ratio,div_yield,interest_rate,ics,psr,gdp\n0,0,0,0,0,0,0,0,0,0\n").unwrap();
    let o = run(&["predict", "--published", "--rows", s(&rows), "--out", s(dir.path()), "--quiet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("predictions.csv")).unwrap();
    let fields: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(fields[2].parse::<f64>().unwrap(), 0.0732);
    assert!((fields[3].parse::<f64>().unwrap() - 1179.0381122573563).abs() < 1e-9);
}

#[test]
fn pairs_metrics_match_table3() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/table3.csv"));
    let o = run(&["validate", "--pairs", s(pairs), "--out", s(dir.path())]);
    assert!(o.status.success());
    let m = json(dir.path().join("pair_metrics.json"));
    assert!((m["result"]["rmse"].as_f64().unwrap() - 21.035005665160476).abs() < 1e-9);
    assert!((m["result"]["mape_percent"].as_f64().unwrap() - 1.2858683190011089).abs() < 1e-9);
    assert!(String::from_utf8_lossy(&o.stdout).contains("RMSE = 21.0350"));
}

fn write_model(dir: &Path, spec: ModelSpec, data: &sectorcast::TrainingSet) -> PathBuf {
    let est = fit_spec(data, &spec).unwrap();
    let model = FittedModel::from_estimate(spec, est, ScalerParams::identity(), synth::price_transform());
    let path = dir.join("model.json");
    fs::write(&path, serde_json::to_string(&model.to_document("fitted", None)).unwrap()).unwrap();
    path
}

#[test]
fn single_term_rank_is_100_percent() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth::training_set(50, 0.2, 3, |z| z[4]);
    let model = write_model(dir.path(), ModelSpec::new([TermId::Main(5)]).unwrap(), &data);
    let o = run(&["rank", "--model", s(&model), "--attribution", "coef_share", "--out", s(dir.path()), "--quiet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(dir.path().join("ranking.json"));
    assert_eq!(r["result"]["entries"][0]["contribution"], 100.0);
}

#[test]
fn exact_fit_diagnostics_export_near_zero_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth::training_set(40, 0.0, 8, |z| 0.5 + z[0] + 1e-9 * z[3].sin());
    let model = write_model(dir.path(), ModelSpec::new([TermId::Main(1)]).unwrap(), &data);
    let o = run(&["diagnose", "--model", s(&model), "--out", s(dir.path()), "--quiet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("residuals_vs_fitted.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let residual: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(residual.abs() < 1e-8);
    }
}

#[test]
fn config_file_flags_and_env_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    let pairs = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/table3.csv");
    fs::write(&cfg, format!("# comment\npairs = {pairs}\ncv-k = 7   # trailing\nalpha = 0.01\nseed = 42\n")).unwrap();
    let env_out = dir.path().join("env_out");
    let o = bin()
        .args(["validate", "--config", s(&cfg), "--alpha", "0.02", "--quiet"])
        .env("SECTORCAST_OUT", &env_out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(env_out.join("pair_metrics.json"));
    assert_eq!(m["config"]["cv_k"], 7);
    assert_eq!(m["config"]["alpha"], 0.02);
    assert_eq!(m["config"]["seed"], 42);
    assert_eq!(m["config"]["cv_seed"], 42);

    let flag_out = dir.path().join("flag_out");
    let o = bin()
        .args(["validate", "--config", s(&cfg), "--out", s(&flag_out), "--quiet"])
        .env("SECTORCAST_OUT", &env_out)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(flag_out.join("pair_metrics.json").exists());
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    fs::write(&cfg, "alpha = 0.05\nbogus = 1\n").unwrap();
    let o = run(&["fit", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    let o = run(&["fit", "--alpha", "1.5", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn too_small_dataset_fails_with_stage_name() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_index(dir.path(), 20, 1);
    let o = run(&["fit", "--input", s(&input), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("load") && err.contains("too small"), "{err}");
}

#[test]
fn rank_deficient_data_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // X2 an exact affine copy of X1 makes the full interaction design singular.
    let data = synth::index_dataset(156, 0.05, 9);
    let rows = data
        .rows()
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.indicators[1] = 3.0 * r.indicators[0] + 1.0;
            r
        })
        .collect();
    let data = sectorcast::Dataset::from_rows(rows, "collinear").unwrap();
    let input = dir.path().join("collinear.csv");
    write_csv(&data, fs::File::create(&input).unwrap()).unwrap();
    let o = run(&["fit", "--input", s(&input), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("full-fit"));
}
