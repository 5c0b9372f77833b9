use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use nfgt::baselines::{fit_elo, fit_melo, prediction_mse};
use nfgt::checks::{equivariance_suite, gradient_suite, random_models};
use nfgt::engine::{Precision, Real};
use nfgt::game::{build_named_game, sample_mask, Game, GameFile, NamedFamily, Provenance};
use nfgt::model::{read_checkpoint, Model, ModelConfig, Task};
use nfgt::oracles::ne_gap;
use nfgt::training::{
    evaluate, model_input, train_with_progress, write_metrics_csv, GameSpec, Metrics, Sampler,
    TrainConfig,
};

use super::{
    BaselineArgs, CheckArgs, CheckFailed, EvalArgs, Family, Method, SampleArgs, SolveArgs,
    TrainArgs,
};

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn echo(command: &str, resolved: serde_json::Value) {
    eprintln!(
        "{}",
        json!({ "command": command, "tool_version": VERSION, "resolved": resolved })
    );
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_game(path: &Path) -> Result<Game> {
    let text = read_text(path)?;
    let file: GameFile =
        serde_json::from_str(&text).with_context(|| format!("parsing game {}", path.display()))?;
    file.into_game()
        .with_context(|| format!("validating game {}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn load_model(path: &Path) -> Result<(u64, Model<f64>)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let (header, model) = read_checkpoint::<f64>(&mut bytes.as_slice())
        .with_context(|| format!("loading {}", path.display()))?;
    Ok((header.seed, model))
}

pub(super) fn sample(a: SampleArgs) -> Result<()> {
    let (game, family) = match a.family {
        Family::Invariant => {
            let spec = GameSpec {
                sampler: Sampler::Invariant,
                num_players: a.n,
                actions: vec![a.t; a.n],
                latent_dim: None,
                p_observe: a.p_observe,
            };
            spec.validate()?;
            (spec.sample(a.seed)?, "invariant".to_string())
        }
        Family::Disc => {
            let spec = GameSpec::disc(a.t, a.z, a.p_observe);
            spec.validate()?;
            (spec.sample(a.seed)?, "disc".to_string())
        }
        Family::Named => {
            let Some(name) = a.name.as_deref() else {
                bail!(nfgt::Error::Invalid {
                    field: "name",
                    detail: "--family named needs --name".into()
                })
            };
            let game = build_named_game(name.parse::<NamedFamily>()?);
            let game = if a.p_observe < 1.0 {
                let mask = sample_mask(a.seed, game.actions(), a.p_observe)?;
                game.with_mask(Some(mask))?
            } else {
                game
            };
            (game, name.to_string())
        }
    };
    echo(
        "sample",
        json!({ "family": family, "N": game.num_players(), "T": game.actions(), "Z": a.z, "p_observe": a.p_observe, "seed": a.seed, "out": a.out }),
    );
    let file = GameFile::from_game(
        &game,
        Some(Provenance {
            tool_version: VERSION.into(),
            seed: a.seed,
            family: Some(family),
        }),
    );
    write_json(&a.out, &file)
}

pub(super) fn solve(a: SolveArgs) -> Result<()> {
    let game = read_game(&a.game)?;
    let (seed, model) = load_model(&a.checkpoint)?;
    echo(
        "solve",
        json!({ "game": a.game, "checkpoint": a.checkpoint, "seed": seed }),
    );
    if model.task() != Task::Ne {
        return Err(nfgt::Error::TaskMismatch {
            expected: Task::Ne.to_string(),
            found: model.task().to_string(),
        }
        .into());
    }
    let input = model_input(Task::Ne, &game)?;
    let profile = model.solve(&[&input])?.remove(0);
    let gap = ne_gap(&game, &profile)?;
    println!(
        "{}",
        json!({ "profile": profile.probs, "ne_gap": gap.ne_gap, "per_player_gaps": gap.per_player_gaps })
    );
    Ok(())
}

pub(super) fn train(a: TrainArgs) -> Result<()> {
    let mut config = TrainConfig::from_json(&read_text(&a.config)?)
        .with_context(|| format!("parsing config {}", a.config.display()))?;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    config.validate()?;
    echo("train", json!({ "config": config, "out": a.out }));
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let outcome = train_with_progress(&config, &mut |m: &Metrics| {
        eprintln!(
            "step {} train_loss {:.6} eval_metric {:.6}",
            m.step, m.train_loss, m.eval_metric
        );
    })?;
    let mut csv = BufWriter::new(fs::File::create(a.out.join("metrics.csv"))?);
    write_metrics_csv(&mut csv, &outcome.metrics)?;
    outcome.model.save(a.out.join("model.nfgt"), config.seed)?;
    write_json(
        &a.out.join("run.json"),
        &json!({ "tool_version": VERSION, "seed": config.seed, "config": config, "skipped_steps": outcome.skipped_steps }),
    )?;
    let last = outcome.metrics.last().map_or(f64::NAN, |m| m.eval_metric);
    println!(
        "{}",
        json!({ "task": config.task, "steps": config.steps, "eval_metric": last, "out": a.out })
    );
    Ok(())
}

fn collect_games(paths: &[PathBuf]) -> Result<Vec<Game>> {
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(path)
                .with_context(|| format!("listing {}", path.display()))?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            entries.retain(|p| p.extension().is_some_and(|e| e == "json"));
            entries.sort();
            files.extend(entries);
        } else {
            files.push(path.clone());
        }
    }
    files.iter().map(|p| read_game(p)).collect()
}

pub(super) fn eval(a: EvalArgs) -> Result<()> {
    let (seed, model) = load_model(&a.checkpoint)?;
    echo(
        "eval",
        json!({ "checkpoint": a.checkpoint, "games": a.games, "task": a.task, "seed": seed }),
    );
    if model.task() != a.task {
        return Err(nfgt::Error::TaskMismatch {
            expected: a.task.to_string(),
            found: model.task().to_string(),
        }
        .into());
    }
    let games = collect_games(&a.games)?;
    let metric = evaluate(&model, &games)?;
    if let Some(out) = &a.out {
        let mut csv = BufWriter::new(
            fs::File::create(out).with_context(|| format!("creating {}", out.display()))?,
        );
        write_metrics_csv(
            &mut csv,
            &[Metrics {
                step: 0,
                train_loss: f64::NAN,
                eval_metric: metric,
                seconds: 0.0,
            }],
        )?;
    }
    println!(
        "{}",
        json!({ "task": a.task, "games": games.len(), "eval_metric": metric })
    );
    Ok(())
}

#[derive(Serialize)]
struct RatingsFile<'a> {
    tool_version: &'a str,
    seed: u64,
    game: &'a Path,
    method: &'a str,
    ratings: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    cycles: Option<&'a [Vec<f64>]>,
}

pub(super) fn baseline(a: BaselineArgs) -> Result<()> {
    let game = read_game(&a.game)?;
    let t = game.num_actions(0);
    let mask = match a.mask_seed {
        Some(seed) => sample_mask(seed, game.actions(), a.p_observe)?,
        None => game
            .mask()
            .map_or_else(|| vec![true; game.num_joint()], <[bool]>::to_vec),
    };
    let method = match a.method {
        Method::Elo => "elo",
        Method::Melo => "melo",
    };
    echo(
        "baseline",
        json!({ "method": method, "game": a.game, "mask_seed": a.mask_seed, "p_observe": a.p_observe, "components": a.components, "seed": a.seed }),
    );
    let hidden: Vec<bool> = mask.iter().map(|&m| !m).collect();
    let observed = mask.iter().filter(|&&m| m).count();
    // Truth is only known for hidden entries when the file itself is complete.
    let score = |predict: &dyn Fn(usize, usize) -> nfgt::Result<f64>| -> Result<Option<f64>> {
        if !game.is_complete() || !hidden.contains(&true) {
            return Ok(None);
        }
        Ok(Some(prediction_mse(&game, &hidden, predict)?))
    };
    let constant = score(&|_, _| Ok(0.5))?;
    let seed = a.mask_seed.unwrap_or(a.seed);
    let (unobserved, file) = match a.method {
        Method::Elo => {
            let r = fit_elo(&game, &mask)?;
            let mse = score(&|i, j| r.predict(i, j))?;
            (
                mse,
                serde_json::to_value(RatingsFile {
                    tool_version: VERSION,
                    seed,
                    game: &a.game,
                    method,
                    ratings: &r.ratings,
                    cycles: None,
                })?,
            )
        }
        Method::Melo => {
            let m = fit_melo(&game, &mask, a.components, a.seed)?;
            let mse = score(&|i, j| m.predict(i, j))?;
            let file = RatingsFile {
                tool_version: VERSION,
                seed,
                game: &a.game,
                method,
                ratings: &m.ratings,
                cycles: Some(&m.cycles),
            };
            (mse, serde_json::to_value(file)?)
        }
    };
    if let Some(out) = &a.out {
        write_json(out, &file)?;
    }
    println!(
        "{}",
        json!({ "method": method, "actions": t, "observed": observed, "unobserved_mse": unobserved, "constant_mse": constant })
    );
    Ok(())
}

fn equivariance<F: Real>(cases: usize, seed: u64) -> Result<nfgt::checks::SuiteReport> {
    let config = ModelConfig::new(16, 2, 1, 4)?;
    Ok(equivariance_suite(
        &random_models::<F>(config, seed)?,
        cases,
        seed,
    )?)
}

pub(super) fn check(a: CheckArgs) -> Result<()> {
    echo(
        "check",
        json!({ "precision": a.precision, "cases": a.cases, "seed": a.seed }),
    );
    let eq = if a.precision == Precision::F32 {
        equivariance::<f32>(a.cases, a.seed)?
    } else {
        equivariance::<f64>(a.cases, a.seed)?
    };
    println!(
        "equivariance: {} cases, max error {:.3e}, tolerance {:.0e}: {}",
        eq.cases,
        eq.max_error,
        eq.tolerance,
        verdict(eq.passed())
    );
    // Central differences carry about 1e-10 of roundoff, so coordinates are
    // compared with that absolute allowance on top of the relative bound.
    let mut grads_ok = true;
    for case in gradient_suite(0..2)? {
        let ok = case
            .pairs
            .iter()
            .all(|&(x, n)| (x - n).abs() <= 1e-4 * x.abs().max(n.abs()) + 1e-9);
        grads_ok &= ok;
        println!(
            "gradient {}{} seed {}: max rel {:.2e}, max abs {:.2e}: {}",
            case.task,
            if case.masked { " (masked)" } else { "" },
            case.seed,
            case.max_rel_error,
            case.max_abs_error,
            verdict(ok)
        );
    }
    if !eq.passed() || !grads_ok {
        return Err(CheckFailed("property suite violated".into()).into());
    }
    Ok(())
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAILED"
    }
}
