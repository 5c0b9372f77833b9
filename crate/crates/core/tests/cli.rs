use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nfgt::game::{Game, GameFile};
use nfgt::model::{Model, ModelConfig, Task};
use nfgt::training::{GameSpec, TrainConfig};

fn nfgt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nfgt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn sample_is_reproducible_and_records_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for path in [&a, &b] {
        let out = nfgt(&[
            "sample",
            "--family",
            "disc",
            "--T",
            "16",
            "--Z",
            "1",
            "--seed",
            "7",
            "--out",
            p(path),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stderr).contains("\"seed\":7"));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let file: GameFile = serde_json::from_str(&fs::read_to_string(&a).unwrap()).unwrap();
    let prov = file.provenance.clone().unwrap();
    assert_eq!(
        (prov.seed, prov.tool_version.as_str()),
        (7, env!("CARGO_PKG_VERSION"))
    );
    assert_eq!(file.into_game().unwrap().actions(), &[16, 16]);
}

#[test]
fn sample_families_and_masks() {
    let dir = tempfile::tempdir().unwrap();
    let named = dir.path().join("n.json");
    let out = nfgt(&[
        "sample",
        "--family",
        "named",
        "--name",
        "matching_pennies",
        "--out",
        p(&named),
    ]);
    assert_eq!(code(&out), 0);
    let masked = dir.path().join("m.json");
    let out = nfgt(&[
        "sample",
        "--family",
        "invariant",
        "--N",
        "3",
        "--T",
        "2",
        "--p-observe",
        "0.5",
        "--seed",
        "1",
        "--out",
        p(&masked),
    ]);
    assert_eq!(code(&out), 0);
    let game = Game::from_json(&fs::read_to_string(&masked).unwrap()).unwrap();
    assert_eq!(game.actions(), &[2, 2, 2]);
    assert!(game.mask().is_some());
    let out = nfgt(&[
        "sample",
        "--family",
        "named",
        "--name",
        "chess",
        "--out",
        p(&named),
    ]);
    assert_eq!(code(&out), 4);
    let out = nfgt(&["sample", "--family", "named", "--out", p(&named)]);
    assert_eq!(code(&out), 4);
}

#[test]
fn unknown_flags_and_bad_values_are_usage_errors() {
    assert_eq!(
        code(&nfgt(&[
            "sample", "--family", "disc", "--out", "x", "--bogus"
        ])),
        2
    );
    assert_eq!(code(&nfgt(&["check", "--precision", "16"])), 2);
    assert_eq!(code(&nfgt(&["frobnicate"])), 2);
    assert_eq!(code(&nfgt(&["--version"])), 0);
}

#[test]
fn missing_files_and_schema_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.json");
    assert_eq!(
        code(&nfgt(&[
            "solve",
            "--game",
            p(&missing),
            "--checkpoint",
            p(&missing)
        ])),
        3
    );
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"num_players\": 2}").unwrap();
    let ckpt = dir.path().join("m.nfgt");
    Model::<f32>::new(ModelConfig::new(8, 1, 1, 2).unwrap(), Task::Ne, 0)
        .unwrap()
        .save(&ckpt, 0)
        .unwrap();
    assert_eq!(
        code(&nfgt(&[
            "solve",
            "--game",
            p(&bad),
            "--checkpoint",
            p(&ckpt)
        ])),
        4
    );
    fs::write(&bad, "not a checkpoint").unwrap();
    let game = dir.path().join("g.json");
    assert_eq!(
        code(&nfgt(&[
            "sample",
            "--family",
            "invariant",
            "--out",
            p(&game)
        ])),
        0
    );
    assert_eq!(
        code(&nfgt(&[
            "solve",
            "--game",
            p(&game),
            "--checkpoint",
            p(&bad)
        ])),
        4
    );
    assert_eq!(
        code(&nfgt(&[
            "train",
            "--config",
            p(&game),
            "--out",
            p(dir.path())
        ])),
        4
    );
}

#[test]
fn solve_and_eval_check_the_task() {
    let dir = tempfile::tempdir().unwrap();
    let game = dir.path().join("g.json");
    assert_eq!(
        code(&nfgt(&[
            "sample",
            "--family",
            "invariant",
            "--T",
            "3",
            "--seed",
            "2",
            "--out",
            p(&game)
        ])),
        0
    );
    let ne = dir.path().join("ne.nfgt");
    let recon = dir.path().join("recon.nfgt");
    let config = ModelConfig::new(8, 1, 1, 2).unwrap();
    Model::<f32>::new(config, Task::Ne, 1)
        .unwrap()
        .save(&ne, 1)
        .unwrap();
    Model::<f32>::new(config, Task::Recon, 1)
        .unwrap()
        .save(&recon, 1)
        .unwrap();

    let out = nfgt(&["solve", "--game", p(&game), "--checkpoint", p(&ne)]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["profile"].as_array().unwrap().len(), 2);
    assert!(v["ne_gap"].as_f64().unwrap() >= 0.0);
    assert_eq!(
        code(&nfgt(&[
            "solve",
            "--game",
            p(&game),
            "--checkpoint",
            p(&recon)
        ])),
        5
    );

    let out = nfgt(&[
        "eval",
        "--checkpoint",
        p(&recon),
        "--games",
        p(dir.path()),
        "--task",
        "recon",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["games"], 1);
    assert_eq!(
        code(&nfgt(&[
            "eval",
            "--checkpoint",
            p(&recon),
            "--games",
            p(&game),
            "--task",
            "ne"
        ])),
        5
    );
}

#[test]
fn train_writes_artifacts_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = TrainConfig::new(
        Task::Ne,
        GameSpec::invariant(vec![2, 2]),
        ModelConfig::new(8, 1, 1, 2).unwrap(),
    );
    config.steps = 4;
    config.batch_size = 4;
    config.eval_every = 2;
    config.eval_games = 8;
    let path = dir.path().join("config.json");
    fs::write(&path, config.to_json()).unwrap();
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = nfgt(&[
            "train",
            "--config",
            p(&path),
            "--seed",
            "5",
            "--out",
            p(&out_dir),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        out_dir
    };
    let (a, b) = (run("a"), run("b"));
    let csv = fs::read_to_string(a.join("metrics.csv")).unwrap();
    assert_eq!(csv, fs::read_to_string(b.join("metrics.csv")).unwrap());
    assert!(csv.starts_with("step,train_loss,eval_metric,seconds\n2,"));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("run.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 5);
    assert_eq!(meta["tool_version"], env!("CARGO_PKG_VERSION"));
    let (header, _) = Model::<f32>::load(a.join("model.nfgt")).unwrap();
    assert_eq!(header.seed, 5);
    assert_eq!(
        fs::read(a.join("model.nfgt")).unwrap(),
        fs::read(b.join("model.nfgt")).unwrap()
    );
}

#[test]
fn baseline_reports_unobserved_error() {
    let dir = tempfile::tempdir().unwrap();
    let game = dir.path().join("d.json");
    assert_eq!(
        code(&nfgt(&[
            "sample",
            "--family",
            "disc",
            "--T",
            "8",
            "--seed",
            "3",
            "--out",
            p(&game)
        ])),
        0
    );
    let ratings = dir.path().join("r.json");
    let out = nfgt(&[
        "baseline",
        "--method",
        "melo",
        "--game",
        p(&game),
        "--mask-seed",
        "4",
        "--p-observe",
        "0.5",
        "--out",
        p(&ratings),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert!(v["unobserved_mse"].as_f64().unwrap() >= 0.0);
    let saved: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&ratings).unwrap()).unwrap();
    assert_eq!(saved["ratings"].as_array().unwrap().len(), 8);
    assert_eq!(saved["cycles"].as_array().unwrap().len(), 8);
    assert_eq!(saved["seed"], 4);
    let out = nfgt(&[
        "baseline",
        "--method",
        "elo",
        "--game",
        p(&game),
        "--mask-seed",
        "4",
        "--p-observe",
        "0",
    ]);
    assert_eq!(code(&out), 4);
}

#[test]
fn check_passes_on_a_fresh_build() {
    let out = nfgt(&["check", "--precision", "32", "--cases", "50"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("equivariance"));
}
