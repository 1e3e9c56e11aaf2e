//! Training, evaluation and user-count sweeps with the two reference
//! policies scored on the same worlds.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::baseline::{kmeans_place, random_policy};
use crate::config::ScenarioConfig;
use crate::env::{reset, step};
use crate::error::{Error, Result};
use crate::learner::checkpoint::Checkpoint;
use crate::learner::trainer::{TraceRow, Trainer};
use crate::metrics::{
    compute_metrics, read_metrics, MetricsRecord, MetricsWriter, PolicyTag, StepMetrics, TailAverage, CSV_HEADER,
};
use crate::reward::{compute_raw, scalarize, NormalizerState};
use crate::rng::{stream, Purpose};
use crate::scenario::phase_for_episode;

pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFIG_FILE: &str = "config.toml";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const TRACE_FILE: &str = "trace.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const PLOT_SCRIPT: &str = "plot_metrics.py";

const PLOT_SOURCE: &str = include_str!("../assets/plot_metrics.py");

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Episodes to walk along the schedule; defaults to the schedule total.
    pub episodes: Option<u64>,
    pub trace: bool,
    /// Resume point for training, weights for evaluation.
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub records: Vec<MetricsRecord>,
}

impl RunSummary {
    pub fn of(&self, tag: PolicyTag) -> Vec<&MetricsRecord> {
        self.records.iter().filter(|r| r.policy == tag).collect()
    }
}

fn prepare_dir(out: &Path, cfg: &ScenarioConfig) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    cfg.save(&out.join(CONFIG_FILE))?;
    let script = out.join(PLOT_SCRIPT);
    std::fs::write(&script, PLOT_SOURCE).map_err(|e| Error::io(&script, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

/// K-means placement held for the whole episode. Rewards are scored with a
/// frozen copy of the learner's normalizer.
pub fn kmeans_episode(cfg: &ScenarioConfig, episode: u64, norm: &NormalizerState) -> Result<(StepMetrics, f64)> {
    let (world, _) = reset(cfg, episode, &mut stream(cfg.seed, Purpose::Environment, episode))?;
    let sol = kmeans_place(&world, cfg, &mut stream(cfg.seed, Purpose::Baseline, episode))?;
    let placed = world.with_uavs(sol.uav_pos, cfg);
    let m = compute_metrics(&placed.links, cfg.world.n_uavs, cfg);
    let raw = compute_raw(&placed.links, &placed, cfg);
    let r = scalarize(&norm.normalize(&raw), false, &cfg.reward);
    Ok((m, r * cfg.env.horizon_steps as f64))
}

/// Uniform random moves from the same initial layout as the learner.
pub fn random_episode(cfg: &ScenarioConfig, episode: u64, norm: &NormalizerState) -> Result<(StepMetrics, f64)> {
    let (mut world, _) = reset(cfg, episode, &mut stream(cfg.seed, Purpose::Environment, episode))?;
    let mut rng = stream(cfg.seed, Purpose::RandomControl, episode);
    let n = cfg.world.n_uavs;
    let mut tail = TailAverage::new(cfg.env.horizon_steps, cfg.experiment.metrics_tail_fraction);
    let mut total = 0.0;
    for t in 0..cfg.env.horizon_steps {
        let out = step(&mut world, &random_policy(n, &mut rng), cfg)?;
        let z = norm.normalize(&out.rewards[0]);
        total += out.rewards.iter().map(|r| scalarize(&z, r.collided, &cfg.reward)).sum::<f64>() / n as f64;
        tail.record(t, compute_metrics(&world.links, n, cfg));
        if out.done {
            break;
        }
    }
    Ok((tail.mean(), total))
}

fn baseline_rows(trainer: &mut Trainer, episode: u64, norm: &NormalizerState) -> Result<[MetricsRecord; 2]> {
    let cfg = trainer.cfg.clone();
    let phase = phase_for_episode(&cfg, episode);
    let (km, km_r) = kmeans_episode(&cfg, episode, norm)?;
    let km_var = trainer.record_total(PolicyTag::Kmeans, km_r);
    let (rd, rd_r) = random_episode(&cfg, episode, norm)?;
    let rd_var = trainer.record_total(PolicyTag::Random, rd_r);
    Ok([
        MetricsRecord::new(episode, phase, PolicyTag::Kmeans, km, km_r, km_var),
        MetricsRecord::new(episode, phase, PolicyTag::Random, rd, rd_r, rd_var),
    ])
}

fn checkpoint_due(cfg: &ScenarioConfig, finished: u64, total: u64) -> bool {
    let next = finished + 1;
    next == total
        || (cfg.learner.checkpoint_every > 0 && next % cfg.learner.checkpoint_every == 0)
        || phase_for_episode(cfg, next) != phase_for_episode(cfg, finished)
}

fn write_trace(w: &mut csv::Writer<BufWriter<File>>, rows: &[TraceRow]) -> Result<()> {
    for r in rows {
        w.serialize(r)?;
    }
    Ok(())
}

/// Trains, writing `metrics.csv`, a config snapshot, the plot script and
/// checkpoints into `out`. With `opts.checkpoint` the run resumes from it and
/// rows already written for later episodes are dropped.
pub fn run_train(cfg: &ScenarioConfig, out: &Path, opts: &RunOptions) -> Result<RunSummary> {
    prepare_dir(out, cfg)?;
    let total = opts.episodes.unwrap_or_else(|| cfg.total_episodes());
    let metrics_path = out.join(METRICS_FILE);

    let (mut trainer, mut records) = match &opts.checkpoint {
        Some(ck) => {
            let trainer = Trainer::from_checkpoint(cfg, Checkpoint::load(ck)?)?;
            let kept = match File::open(&metrics_path) {
                Ok(f) => read_metrics(f)?.into_iter().filter(|r| r.episode < trainer.next_episode).collect(),
                Err(_) => Vec::new(),
            };
            (trainer, kept)
        }
        None => (Trainer::new(cfg)?, Vec::new()),
    };

    let mut writer = MetricsWriter::new(create(&metrics_path)?)?;
    for r in &records {
        writer.write(r)?;
    }
    let mut trace = if opts.trace {
        let resume = opts.checkpoint.is_some() && out.join(TRACE_FILE).exists();
        let f = std::fs::OpenOptions::new()
            .create(true)
            .append(resume)
            .write(true)
            .truncate(!resume)
            .open(out.join(TRACE_FILE))
            .map_err(|e| Error::io(out.join(TRACE_FILE), e))?;
        Some(csv::WriterBuilder::new().has_headers(!resume).from_writer(BufWriter::new(f)))
    } else {
        None
    };

    while trainer.next_episode < total {
        let mut rows = Vec::new();
        let rep = trainer.train_episode(opts.trace.then_some(&mut rows))?;
        let ep = rep.episode;
        let gm = MetricsRecord::new(ep, rep.phase, PolicyTag::Gmappo, rep.metrics, rep.total_reward, rep.reward_variance);
        let [km, rd] = baseline_rows(&mut trainer, ep, &rep.normalizer_before)?;
        for r in [gm, km, rd] {
            writer.write(&r)?;
            records.push(r);
        }
        if let Some(w) = trace.as_mut() {
            write_trace(w, &rows)?;
        }
        if checkpoint_due(cfg, ep, total) {
            writer.flush()?;
            trainer.checkpoint().save(&out.join(CHECKPOINT_FILE))?;
        }
    }
    writer.flush()?;
    if let Some(mut w) = trace {
        w.flush().map_err(|e| Error::io(out.join(TRACE_FILE), e))?;
    }
    Ok(RunSummary { out_dir: out.to_path_buf(), records })
}

/// Greedy rollouts of a trained checkpoint next to both references.
pub fn run_eval(cfg: &ScenarioConfig, out: &Path, opts: &RunOptions) -> Result<RunSummary> {
    let ck_path = opts
        .checkpoint
        .clone()
        .ok_or_else(|| Error::InvalidArgument("evaluation needs a checkpoint".into()))?;
    let mut trainer = Trainer::from_checkpoint(cfg, Checkpoint::load(&ck_path)?)?;
    prepare_dir(out, cfg)?;
    trainer.reward_history = Default::default();
    let norm = trainer.normalizer.clone();
    let total = opts.episodes.unwrap_or_else(|| cfg.total_episodes());

    let mut writer = MetricsWriter::new(create(&out.join(METRICS_FILE))?)?;
    let mut trace = if opts.trace {
        Some(csv::Writer::from_writer(create(&out.join(TRACE_FILE))?))
    } else {
        None
    };
    let mut records = Vec::new();
    for ep in 0..total {
        let mut rows = Vec::new();
        let (m, r) = trainer.evaluate_episode(ep, opts.trace.then_some(&mut rows))?;
        let var = trainer.record_total(PolicyTag::Gmappo, r);
        let gm = MetricsRecord::new(ep, phase_for_episode(cfg, ep), PolicyTag::Gmappo, m, r, var);
        let [km, rd] = baseline_rows(&mut trainer, ep, &norm)?;
        for rec in [gm, km, rd] {
            writer.write(&rec)?;
            records.push(rec);
        }
        if let Some(w) = trace.as_mut() {
            write_trace(w, &rows)?;
        }
    }
    writer.flush()?;
    if let Some(mut w) = trace {
        w.flush().map_err(|e| Error::io(out.join(TRACE_FILE), e))?;
    }
    Ok(RunSummary { out_dir: out.to_path_buf(), records })
}

/// Repeats training for every user count in `experiment.sweep_users`, each
/// in `out/users_<M>`, and concatenates the results into `sweep.csv` with a
/// `# users = M` line before each section.
pub fn run_sweep(cfg: &ScenarioConfig, out: &Path, opts: &RunOptions) -> Result<Vec<(usize, RunSummary)>> {
    prepare_dir(out, cfg)?;
    let mut results = Vec::new();
    let mut combined = create(&out.join(SWEEP_FILE))?;
    writeln!(combined, "{}", CSV_HEADER.join(",")).map_err(|e| Error::io(out.join(SWEEP_FILE), e))?;
    for &m in &cfg.experiment.sweep_users {
        let mut c = cfg.clone();
        c.world.users.set_all(m);
        c.validate()?;
        let sub = out.join(format!("users_{m}"));
        let sub_opts = RunOptions { checkpoint: None, ..opts.clone() };
        let summary = run_train(&c, &sub, &sub_opts)?;
        writeln!(combined, "# users = {m}").map_err(|e| Error::io(out.join(SWEEP_FILE), e))?;
        {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut combined);
            for r in &summary.records {
                w.serialize(r)?;
            }
            w.flush().map_err(|e| Error::io(out.join(SWEEP_FILE), e))?;
        }
        results.push((m, summary));
    }
    combined.flush().map_err(|e| Error::io(out.join(SWEEP_FILE), e))?;
    Ok(results)
}

/// Splits a sweep file into its `# users = M` sections.
pub fn read_sweep(text: &str) -> Result<Vec<(usize, Vec<MetricsRecord>)>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let mut sections: Vec<(usize, String)> = Vec::new();
    for line in lines {
        if let Some(m) = line.strip_prefix("# users = ") {
            let m = m.trim().parse().map_err(|_| Error::InvalidArgument(format!("bad sweep tag {line:?}")))?;
            sections.push((m, format!("{header}\n")));
        } else if let Some((_, body)) = sections.last_mut() {
            body.push_str(line);
            body.push('\n');
        } else if !line.trim().is_empty() {
            return Err(Error::InvalidArgument("sweep rows before the first section tag".into()));
        }
    }
    sections
        .into_iter()
        .map(|(m, body)| Ok((m, read_metrics(body.as_bytes())?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Phase, PhaseSpan};

    fn tiny() -> ScenarioConfig {
        let mut c = ScenarioConfig::default();
        c.world.n_uavs = 2;
        c.world.users.set_all(10);
        c.env.horizon_steps = 10;
        c.learner.checkpoint_every = 2;
        c.scenario.schedule = vec![
            PhaseSpan { phase: Phase::Urban, episodes: 2 },
            PhaseSpan { phase: Phase::Rural, episodes: 1 },
        ];
        c.experiment.sweep_users = vec![4, 6];
        c
    }

    #[test]
    fn train_writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny();
        let s = run_train(&cfg, dir.path(), &RunOptions { trace: true, ..Default::default() }).unwrap();
        assert_eq!(s.records.len(), 9);
        for tag in PolicyTag::ALL {
            assert_eq!(s.of(tag).len(), 3);
        }
        for f in [METRICS_FILE, CONFIG_FILE, CHECKPOINT_FILE, TRACE_FILE, PLOT_SCRIPT] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let back = read_metrics(File::open(dir.path().join(METRICS_FILE)).unwrap()).unwrap();
        assert_eq!(back, s.records);
        assert_eq!(back[6].phase, Phase::Rural);
        let snap = ScenarioConfig::load(&dir.path().join(CONFIG_FILE)).unwrap();
        assert_eq!(snap, cfg);
    }

    #[test]
    fn episodes_flag_limits_run() {
        let dir = tempfile::tempdir().unwrap();
        let s = run_train(&tiny(), dir.path(), &RunOptions { episodes: Some(1), ..Default::default() }).unwrap();
        assert_eq!(s.records.len(), 3);
    }

    #[test]
    fn eval_requires_and_reuses_checkpoint() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny();
        assert!(run_eval(&cfg, dir.path(), &RunOptions::default()).is_err());
        run_train(&cfg, &dir.path().join("t"), &RunOptions::default()).unwrap();
        let opts = RunOptions { checkpoint: Some(dir.path().join("t").join(CHECKPOINT_FILE)), ..Default::default() };
        run_eval(&cfg, &dir.path().join("a"), &opts).unwrap();
        run_eval(&cfg, &dir.path().join("b"), &opts).unwrap();
        let a = std::fs::read(dir.path().join("a").join(METRICS_FILE)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(METRICS_FILE)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_sections() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny();
        let res = run_sweep(&cfg, dir.path(), &RunOptions { episodes: Some(1), ..Default::default() }).unwrap();
        assert_eq!(res.len(), 2);
        let text = std::fs::read_to_string(dir.path().join(SWEEP_FILE)).unwrap();
        let sections = read_sweep(&text).unwrap();
        assert_eq!(sections.iter().map(|s| s.0).collect::<Vec<_>>(), vec![4, 6]);
        assert!(sections.iter().all(|s| s.1.len() == 3));
        assert!(dir.path().join("users_6").join(METRICS_FILE).exists());
    }

    #[test]
    fn kmeans_and_random_share_the_world() {
        let cfg = tiny();
        let norm = NormalizerState::new(&cfg.reward);
        let a = kmeans_episode(&cfg, 1, &norm).unwrap();
        assert_eq!(a, kmeans_episode(&cfg, 1, &norm).unwrap());
        let b = random_episode(&cfg, 1, &norm).unwrap();
        assert_eq!(b, random_episode(&cfg, 1, &norm).unwrap());
    }
}
