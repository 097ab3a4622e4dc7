use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use semnav::a3c::{TrainTask, Trainer};
use semnav::evalharness::{self, Agent, ComparisonTable, EvalTask};
use semnav::featurizer;
use semnav::gridscene::{Pose, SceneSpec};
use semnav::observation::SceneTable;
use semnav::policynet::{NetworkParams, Variant};
use semnav::semantics::{self, AutoencoderConfig, SentenceEncoder};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::plot;

pub const MANIFEST: &str = "manifest.txt";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const REWARD_LOG_FILE: &str = "rewards.csv";
pub const TARGETS_FILE: &str = "targets.txt";

fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::from(e).context(path.display())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_at(path))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(io_at(path))
}

pub fn vocabulary_path(encoder: &Path) -> PathBuf {
    encoder.with_extension("vocab")
}

pub struct GenScenes {
    pub count_per_type: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn gen_scenes(a: &GenScenes) -> Result<(), CliError> {
    let inv = evalharness::Inventory { per_type: a.count_per_type, width: a.width, height: a.height, seed: a.seed };
    if inv.per_type == 0 {
        return Err(CliError::config("count-per-type must be at least 1"));
    }
    let scenes = inv.generate()?;
    fs::create_dir_all(&a.out).map_err(io_at(&a.out))?;
    let mut manifest = String::new();
    for s in &scenes {
        write_file(&a.out.join(format!("{}.json", s.id)), &(s.to_json() + "\n"))?;
        manifest.push_str(&s.id);
        manifest.push('\n');
    }
    write_file(&a.out.join(MANIFEST), &manifest)?;
    println!("wrote {} scenes to {}", scenes.len(), a.out.display());
    Ok(())
}

/// Scenes listed in `dir/manifest.txt`, in manifest order.
pub fn load_scenes(dir: &Path) -> Result<Vec<SceneSpec>, CliError> {
    let manifest = dir.join(MANIFEST);
    let text = fs::read_to_string(&manifest).map_err(io_at(&manifest))?;
    let scenes = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|id| {
            let path = dir.join(format!("{id}.json"));
            let body = fs::read_to_string(&path).map_err(io_at(&path))?;
            SceneSpec::from_json(&body).map_err(|e| CliError::from(e).context(path.display()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if scenes.is_empty() {
        return Err(CliError::config(format!("{}: no scenes listed", manifest.display())));
    }
    Ok(scenes)
}

pub struct BuildSemantics {
    pub scenes: PathBuf,
    pub dim: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn build_semantics(a: &BuildSemantics, cfg: &RunConfig) -> Result<(), CliError> {
    let scenes = load_scenes(&a.scenes)?;
    let corpus = semantics::build_corpus_with(&scenes, &cfg.perception().view)?;
    println!("corpus: {} sentences, {} vocabulary tokens", corpus.sentences.len(), corpus.vocabulary.len());
    let enc = semantics::train_autoencoder(
        &corpus,
        &AutoencoderConfig { dim: a.dim, epochs: a.epochs, lr: a.lr, seed: a.seed },
    )?;
    if let Some(loss) = enc.loss_history.last() {
        println!("final reconstruction loss {loss:.6}");
    }
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_at(parent))?;
    }
    let mut w = create(&a.out)?;
    enc.write_checkpoint(&mut w).and_then(|_| w.flush()).map_err(io_at(&a.out))?;
    let vocab = vocabulary_path(&a.out);
    let mut w = create(&vocab)?;
    semantics::write_vocabulary(enc.vocabulary(), &mut w).and_then(|_| w.flush()).map_err(io_at(&vocab))?;
    println!("wrote {} and {}", a.out.display(), vocab.display());
    Ok(())
}

pub fn load_encoder(path: &Path) -> Result<SentenceEncoder, CliError> {
    let vocab_path = vocabulary_path(path);
    let vocab = File::open(&vocab_path)
        .and_then(|f| semantics::read_vocabulary(BufReader::new(f)))
        .map_err(io_at(&vocab_path))?;
    let mut r = BufReader::new(File::open(path).map_err(io_at(path))?);
    SentenceEncoder::read_checkpoint(&mut r, vocab).map_err(|e| CliError::from(e).context(path.display()))
}

fn encoder_for(variant: Variant, cfg: &RunConfig) -> Result<Option<SentenceEncoder>, CliError> {
    match (variant, &cfg.semantics.encoder) {
        (Variant::Sn, _) => Ok(None),
        (Variant::Ssn, Some(p)) => load_encoder(p).map(Some),
        (Variant::Ssn, None) => Err(CliError::config(
            "variant ssn requires a sentence encoder (--encoder or semantics.encoder)",
        )),
    }
}

fn tables(
    scenes: &[SceneSpec],
    idx: impl IntoIterator<Item = usize>,
    cfg: &RunConfig,
    encoder: Option<&SentenceEncoder>,
) -> Vec<(usize, Arc<SceneTable>)> {
    let perception = cfg.perception();
    idx.into_iter()
        .map(|i| (i, Arc::new(SceneTable::build(Arc::new(scenes[i].clone()), &perception, encoder))))
        .collect()
}

pub fn train(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let tc = cfg.train_config();
    tc.validate()?;
    let scenes = load_scenes(&cfg.scenes.dir)?;
    let encoder = encoder_for(tc.variant, cfg)?;
    let held = if cfg.train.exclude_held_out { evalharness::held_instances(&scenes) } else { Vec::new() };
    let idx: Vec<usize> = (0..scenes.len()).filter(|i| !held.contains(i)).collect();
    if idx.is_empty() {
        return Err(CliError::config("no training scenes left after holding out"));
    }
    let chosen: Vec<SceneSpec> = idx.iter().map(|&i| scenes[i].clone()).collect();
    let plan = cfg.target_plan();
    let targets = evalharness::training_targets(&chosen, tc.target_mode, plan.per_scene, plan.seed, &plan.perception)?;
    let tasks: Vec<TrainTask> = tables(&scenes, idx.iter().copied(), cfg, encoder.as_ref())
        .into_iter()
        .zip(&targets)
        .map(|((_, table), t)| TrainTask { table, targets: t.clone() })
        .collect();

    fs::create_dir_all(out).map_err(io_at(out))?;
    let log_path = out.join(REWARD_LOG_FILE);
    let log = create(&log_path)?;
    let outcome = Trainer::new(tc, tasks).log_to(Box::new(log)).run()?;

    let ckpt = out.join(CHECKPOINT_FILE);
    let mut w = create(&ckpt)?;
    outcome.params.write_checkpoint(&mut w).and_then(|_| w.flush()).map_err(io_at(&ckpt))?;
    let mut listing = String::new();
    for (s, ts) in chosen.iter().zip(&targets) {
        for (k, p) in ts.iter().enumerate() {
            listing.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", s.id, k, p.x, p.y, p.heading.letter()));
        }
    }
    write_file(&out.join(TARGETS_FILE), &listing)?;

    let tail = &outcome.log[outcome.log.len() - outcome.log.len() / 10..];
    let rate = if tail.is_empty() {
        0.0
    } else {
        100.0 * tail.iter().filter(|r| r.success).count() as f64 / tail.len() as f64
    };
    println!(
        "trained {} for {} frames ({} updates, {} episodes, last-10% success {:.1}%)",
        cfg.variant(),
        outcome.frames,
        outcome.updates,
        outcome.log.len(),
        rate
    );
    println!("wrote {} and {}", ckpt.display(), log_path.display());
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<NetworkParams, CliError> {
    let mut r = BufReader::new(File::open(path).map_err(io_at(path))?);
    NetworkParams::read_checkpoint(&mut r).map_err(|e| CliError::from(e).context(path.display()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalTaskKind {
    T1,
    T2,
}

pub enum EvalAgent {
    Checkpoint(PathBuf),
    Random,
    Oracle,
}

pub fn eval(cfg: &RunConfig, task: EvalTaskKind, agent: &EvalAgent, out: &Path) -> Result<(), CliError> {
    let scenes = load_scenes(&cfg.scenes.dir)?;
    let plan = cfg.target_plan();
    let targets: Vec<(usize, Vec<Pose>)> = match task {
        EvalTaskKind::T1 => evalharness::t1_eval_targets(&scenes, &plan)?,
        EvalTaskKind::T2 => evalharness::t2_eval_targets(&scenes, &plan)?,
    };
    let ec = cfg.eval_config();
    let params = match agent {
        EvalAgent::Checkpoint(p) => Some(load_checkpoint(p)?),
        _ => None,
    };
    let encoder = match &params {
        Some(p) => {
            if p.dims.feature != cfg.perception.feature_dim {
                return Err(CliError::config(format!(
                    "checkpoint feature dim {} does not match perception.feature_dim {}",
                    p.dims.feature, cfg.perception.feature_dim
                )));
            }
            let enc = encoder_for(p.variant, cfg)?;
            if let Some(e) = &enc {
                let width = semantics::frame_width(e.dim());
                if width != p.dims.semantic {
                    return Err(CliError::config(format!(
                        "checkpoint semantic dim {} does not match encoder frame width {} (sentence dim {})",
                        p.dims.semantic,
                        width,
                        e.dim()
                    )));
                }
            }
            enc
        }
        None => None,
    };
    let eval_tasks: Vec<EvalTask> = tables(&scenes, targets.iter().map(|(i, _)| *i), cfg, encoder.as_ref())
        .into_iter()
        .zip(&targets)
        .map(|((_, table), (_, t))| EvalTask { table, targets: t.clone() })
        .collect();
    let (agent, name) = match (agent, &params) {
        (EvalAgent::Random, _) => (Agent::Random, "Random".to_owned()),
        (EvalAgent::Oracle, _) => (Agent::Oracle, "Oracle".to_owned()),
        (EvalAgent::Checkpoint(_), Some(p)) => (Agent::Network(p), p.variant.to_string().to_uppercase()),
        (EvalAgent::Checkpoint(_), None) => unreachable!("checkpoint loaded above"),
    };
    let report = evalharness::evaluate(agent, &name, &eval_tasks, &ec)?;
    let table = ComparisonTable {
        task: match task {
            EvalTaskKind::T1 => "T1: unseen targets, seen scenes".into(),
            EvalTaskKind::T2 => "T2: unseen scenes".into(),
        },
        reports: vec![report],
        eval_scenes: targets.iter().map(|(i, _)| scenes[*i].id.clone()).collect(),
    };
    write_table(&table, out, "report")
}

fn write_table(table: &ComparisonTable, out: &Path, stem: &str) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(io_at(out))?;
    write_file(&out.join(format!("{stem}.csv")), &table.to_csv())?;
    let text = table.to_text();
    write_file(&out.join(format!("{stem}.txt")), &text)?;
    let json = serde_json::to_string_pretty(table).expect("reports serialize");
    write_file(&out.join(format!("{stem}.json")), &(json + "\n"))?;
    print!("{text}");
    println!("evaluation scenes: {}", table.eval_scenes.join(", "));
    Ok(())
}

pub fn experiment(cfg: &RunConfig, task: EvalTaskKind, out: &Path) -> Result<(), CliError> {
    let ec = cfg.experiment()?;
    let outcome = match task {
        EvalTaskKind::T1 => evalharness::run_t1(&ec)?,
        EvalTaskKind::T2 => evalharness::run_t2(&ec)?,
    };
    if !outcome.held_out.is_empty() {
        println!("held-out scenes: {}", outcome.held_out.join(", "));
    }
    write_table(&outcome.table, out, "table")?;
    for (model, params) in &outcome.trained {
        let path = out.join(format!("{}.ckpt", model.name().to_lowercase()));
        let mut w = create(&path)?;
        params.write_checkpoint(&mut w).and_then(|_| w.flush()).map_err(io_at(&path))?;
    }
    Ok(())
}

pub fn plot(log: &Path, out: &Path, window: usize) -> Result<(), CliError> {
    let text = fs::read_to_string(log).map_err(io_at(log))?;
    let records = plot::parse_log(&text).map_err(|e| e.context(log.display()))?;
    let series = plot::moving_average(&records, window);
    let title = format!("episode return, moving average over {window} episodes");
    write_file(out, &plot::render_svg(&series, &title))?;
    println!("wrote {} ({} series, {} episodes)", out.display(), series.len(), records.len());
    Ok(())
}

pub fn dump_annotations(cfg: &RunConfig, scenes_dir: &Path, out: &Path) -> Result<(), CliError> {
    let scenes = load_scenes(scenes_dir)?;
    let view = cfg.perception().view;
    let mut w = create(out)?;
    let mut lines = 0usize;
    for s in &scenes {
        for p in s.valid_poses() {
            let anns = featurizer::annotate_with(s, p, &view);
            writeln!(w, "{}", featurizer::annotation_line(s, p, &anns)).map_err(io_at(out))?;
            lines += 1;
        }
    }
    w.flush().map_err(io_at(out))?;
    println!("wrote {lines} lines to {}", out.display());
    Ok(())
}
