//! The binary end to end: exit codes, output placement, and CSV values that
//! match direct library calls bit for bit.

use std::path::Path;
use std::process::Command;

use slm_bounds::bounds::theorem_bound;
use slm_bounds::model::gaussian_matrix;
use slm_bounds::{simulate, BoundConfig, Estimator, MeanFunction, SimulationSpec, SparseLinearModel, SparseVector};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_slm-bounds"));
    c.env_remove(slm_bounds_cli::OUT_DIR_ENV);
    c
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn records(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

const GENERAL: &str = r#"{
    "model": "gaussian 3x5 seed 11",
    "sigma2": 0.8,
    "sparsity": 1,
    "x0": [{"values": [1.3], "indices": [4]}, {"values": [0, 0, 0, 0, 0]}],
    "estimators": [{"kind": "ml_slm"}],
    "simulation": {"trials": 5000, "seed": 9}
}"#;

#[test]
fn general_h_bound_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.json", GENERAL);
    let out = dir.path().join("bound.csv");
    let st = bin().args(["bound", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(st.success());

    let model = SparseLinearModel::new(gaussian_matrix(3, 5, 11), 0.8, 1).unwrap();
    let gammas: Vec<_> = (0..5).map(MeanFunction::unbiased).collect();
    let recs = records(&out);
    for (id, x) in [("1", SparseVector::from_pairs(5, &[(3, 1.3)]).unwrap()), ("2", SparseVector::zeros(5))] {
        let tb = theorem_bound(&model, &gammas, &x, &BoundConfig::default()).unwrap();
        let mine: Vec<_> = recs.iter().filter(|r| &r[0] == id).collect();
        // general H has no closed-form row
        assert_eq!(mine.len(), 6);
        for (k, c) in tb.components.iter().enumerate() {
            assert_eq!(mine[k][2].parse::<f64>().unwrap(), c.value);
            let support: Vec<usize> = mine[k][3].split(' ').map(|s| s.parse().unwrap()).collect();
            assert_eq!(support, c.ingredients.support.one_based());
        }
        assert_eq!(mine[5][2].parse::<f64>().unwrap(), tb.total);
    }
}

#[test]
fn general_h_simulation_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.json", GENERAL);
    let out = dir.path().join("sim.csv");
    let st = bin().args(["simulate", "--threads", "3", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(st.success());

    let model = SparseLinearModel::new(gaussian_matrix(3, 5, 11), 0.8, 1).unwrap();
    let x = vec![0.0, 0.0, 0.0, 1.3, 0.0];
    let est = Estimator::ml_slm(&model, 1_000_000).unwrap();
    let lib = simulate(&SimulationSpec::new(model, x.into(), est, 5000, 9)).unwrap();
    let r = &records(&out)[0];
    assert_eq!(&r[0], "ml_slm");
    assert_eq!(r[4].parse::<f64>().unwrap(), lib.total_variance);
    assert_eq!(r[5].parse::<f64>().unwrap(), lib.se_total_variance);
    assert_eq!(r[6].parse::<f64>().unwrap(), lib.mse);
    assert_eq!(r[8].parse::<f64>().unwrap(), lib.bias_norm());
    // no induced-mean bound is available off the SSNM
    assert_eq!(&r[9], "");
}

#[test]
fn overrides_and_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.json", GENERAL);
    let target = dir.path().join("redirected");
    let st = bin()
        .env(slm_bounds_cli::OUT_DIR_ENV, &target)
        .args(["simulate", "--seed", "5", "--trials", "1000", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg("elsewhere/sim.csv")
        .status()
        .unwrap();
    assert!(st.success());
    let recs = records(&target.join("sim.csv"));
    assert_eq!((&recs[0][2], &recs[0][3]), ("1000", "5"));
}

#[test]
fn csv_goes_to_stdout_without_a_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.json", GENERAL);
    let out = bin().args(["spark", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "rows,cols,sparsity,spark_exceeds\n3,5,1,true\n");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |text: &str, cmd: &str| {
        let cfg = write(dir.path(), "c.json", text);
        bin()
            .arg(cmd)
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path().join("o.csv"))
            .status()
            .unwrap()
            .code()
    };
    assert_eq!(code(r#"{"model": "identity 4", "sparsity": 1, "oops": 1}"#, "bound"), Some(2));
    assert_eq!(code("not json", "bound"), Some(2));
    assert_eq!(
        code(
            r#"{"model": "identity 12", "sparsity": 4, "x0": {"values": [1], "indices": [1]}, "bound": {"budget": 10}}"#,
            "bound"
        ),
        Some(4)
    );
    assert_eq!(
        code(
            r#"{"model": "identity 3", "sparsity": 1, "x0": {"values": [1], "indices": [1]},
                "oracle": {"per_axis": [201], "strict": true}}"#,
            "oracle"
        ),
        Some(3)
    );
    // partial results are still written
    assert_eq!(records(&dir.path().join("o.csv")).len(), 1);
    assert_eq!(
        code(r#"{"model": "identity 3", "sparsity": 1, "x0": {"values": [1], "indices": [1]}}"#, "oracle"),
        Some(0)
    );
    let missing = bin().args(["bound", "--config", "/nonexistent/cfg.json"]).status().unwrap();
    assert_eq!(missing.code(), Some(1));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"model": "identity 5", "sparsity": 1, "x0": {"values": [2.0], "indices": [1]},
            "estimators": [{"kind": "ml_ssnm"}, {"kind": "ht", "threshold": 3}, {"kind": "lmvu"}],
            "simulation": {"trials": 20000, "seed": 3}}"#,
    );
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        assert!(bin()
            .args(["simulate", "--threads", threads, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap()
            .success());
        std::fs::read(out).unwrap()
    };
    let a = run("a.csv", "1");
    assert_eq!(a, run("b.csv", "1"));
    assert_eq!(a, run("c.csv", "8"));
    assert!(!a.contains(&b'\r'));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "json") {
            slm_bounds_cli::ExperimentConfig::from_path(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            seen += 1;
        }
    }
    assert!(seen >= 4);
}
