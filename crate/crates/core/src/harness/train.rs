//! Training loop: exploration episodes, replay, one update per step.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{Experiment, TrainingParams};
use super::eval::GreedyPolicy;
use crate::cycle::DriveCycle;
use crate::env::{episode, EmsEnv, RewardParams};
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::rl::{DdpgAgent, DdpgConfig, PerBuffer, Transition};
use crate::vehicle::VehicleParams;

/// One line of the JSON-lines training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    /// Undiscounted return of the exploring rollout.
    #[serde(rename = "return")]
    pub ret: f64,
    pub total_energy_kwh: f64,
    pub final_soc: f64,
    pub speed_miss_steps: usize,
    /// Same quantities for a greedy rollout after the episode's updates.
    pub eval_return: f64,
    pub eval_total_energy_kwh: f64,
    pub eval_speed_miss_steps: usize,
    pub noise_sigma: f64,
    pub updates: u64,
    pub mean_critic_loss: f64,
    pub mean_actor_loss: f64,
}

/// Everything the loop needs; [`Experiment`] converts into this.
#[derive(Debug, Clone)]
pub struct TrainSetup {
    pub vehicle: VehicleParams,
    pub cycle: DriveCycle,
    pub reward: RewardParams,
    pub agent: DdpgConfig,
    pub training: TrainingParams,
    pub episodes: usize,
    pub seed: u64,
}

impl From<&Experiment> for TrainSetup {
    fn from(e: &Experiment) -> Self {
        TrainSetup {
            vehicle: e.vehicle.clone(),
            cycle: e.train_cycle.clone(),
            reward: e.config.reward,
            agent: e.config.agent.clone(),
            training: e.config.training,
            episodes: e.config.episodes,
            seed: e.config.seed,
        }
    }
}

/// Checkpoint metadata the harness relies on when evaluating later.
pub fn checkpoint_meta(setup: &TrainSetup) -> serde_json::Value {
    serde_json::json!({
        "vehicle": setup.vehicle,
        "reward": setup.reward,
        "train_cycle": setup.cycle.name(),
        "seed": setup.seed,
    })
}

/// Runs the whole schedule, calling `on_episode` after each finished episode.
/// A divergence aborts before `on_episode` sees the failing episode.
pub fn train_loop(setup: &TrainSetup, exec: Exec, mut on_episode: impl FnMut(&EpisodeLog, &DdpgAgent) -> Result<()>) -> Result<DdpgAgent> {
    let mut agent = DdpgAgent::new(setup.agent.clone(), setup.seed)?.with_exec(exec);
    let cfg = agent.config.clone();
    let mut buffer = PerBuffer::new(cfg.buffer_capacity, cfg.per_alpha, cfg.per_epsilon)?;
    let mut env = EmsEnv::new(setup.vehicle.clone(), setup.cycle.clone(), setup.reward)?;
    let steps = env.episode_len();
    let learning_episodes = setup.episodes.saturating_sub(setup.training.warmup_episodes);
    let planned = (learning_episodes * steps * setup.training.updates_per_step).max(1) as f64;
    let mut done_updates = 0usize;

    for ep in 1..=setup.episodes {
        let learning = ep > setup.training.warmup_episodes;
        let mut obs = env.reset();
        let mut ret = 0.0;
        let (mut critic_loss, mut actor_loss, mut n_updates) = (0.0, 0.0, 0usize);
        while !env.is_done() {
            let state = obs.normalized();
            let action = agent.act_explore(&state);
            let step = env.step(action)?;
            ret += step.reward;
            buffer.insert(Transition {
                state,
                action,
                reward: step.reward,
                next_state: step.obs.normalized(),
                done: step.done,
            });
            obs = step.obs;
            if learning && buffer.len() >= cfg.batch_size {
                for _ in 0..setup.training.updates_per_step {
                    let beta = cfg.per_beta(done_updates as f64 / planned);
                    let batch = buffer.sample(cfg.batch_size, beta, agent.rng_mut())?;
                    let stats = agent.update(&batch.transitions, &batch.weights).map_err(|e| match e {
                        Error::Divergence(m) => Error::Divergence(format!("episode {ep}: {m}")),
                        other => other,
                    })?;
                    buffer.update(&batch.indices, &stats.td_errors)?;
                    critic_loss += stats.critic_loss;
                    actor_loss += stats.actor_loss;
                    n_updates += 1;
                    done_updates += 1;
                }
            }
        }
        let trace = env.trace();
        agent.end_episode();
        let greedy = episode(&mut env, &mut GreedyPolicy(&agent));
        let denom = n_updates.max(1) as f64;
        let log = EpisodeLog {
            episode: ep,
            ret,
            total_energy_kwh: trace.totals.total_energy_kwh,
            final_soc: trace.totals.final_soc,
            speed_miss_steps: trace.totals.speed_miss_steps,
            eval_return: greedy.ret,
            eval_total_energy_kwh: greedy.trace.totals.total_energy_kwh,
            eval_speed_miss_steps: greedy.trace.totals.speed_miss_steps,
            noise_sigma: agent.noise_sigma,
            updates: agent.updates(),
            mean_critic_loss: critic_loss / denom,
            mean_actor_loss: actor_loss / denom,
        };
        on_episode(&log, &agent)?;
    }
    Ok(agent)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub agent: DdpgAgent,
    pub log: Vec<EpisodeLog>,
    pub log_path: PathBuf,
    pub checkpoint: PathBuf,
}

pub fn log_path(out: &Path) -> PathBuf {
    out.join("train_log.jsonl")
}

pub fn checkpoint_path(out: &Path, episode: usize) -> PathBuf {
    out.join("checkpoints").join(format!("episode_{episode:03}.json"))
}

pub fn latest_checkpoint_path(out: &Path) -> PathBuf {
    out.join("checkpoint.json")
}

fn append_line(path: &Path, line: &str) -> Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(|e| Error::io(path, e))?;
    writeln!(f, "{line}").map_err(|e| Error::io(path, e))
}

/// Trains and writes the log and per-episode checkpoints under the
/// experiment's output directory. The log is started fresh; on divergence a
/// final `{"event": "divergence", ...}` line is appended and the checkpoints
/// of completed episodes are left in place.
pub fn cmd_train(exp: &Experiment, exec: Exec) -> Result<TrainOutcome> {
    let out = &exp.output_dir;
    let ckpt_dir = out.join("checkpoints");
    fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(&ckpt_dir, e))?;
    let log_file = log_path(out);
    fs::write(&log_file, "").map_err(|e| Error::io(&log_file, e))?;
    let setup = TrainSetup::from(exp);
    let meta = checkpoint_meta(&setup);
    let mut log = Vec::new();
    let result = train_loop(&setup, exec, |entry, agent| {
        append_line(&log_file, &serde_json::to_string(entry)?)?;
        let ckpt = agent.to_checkpoint(entry.episode, meta.clone());
        ckpt.save(checkpoint_path(out, entry.episode))?;
        ckpt.save(latest_checkpoint_path(out))?;
        log.push(entry.clone());
        Ok(())
    });
    match result {
        Ok(agent) => Ok(TrainOutcome {
            agent,
            log,
            log_path: log_file,
            checkpoint: latest_checkpoint_path(out),
        }),
        Err(e @ Error::Divergence(_)) => {
            let line = serde_json::json!({
                "event": "divergence",
                "episode": log.len() + 1,
                "message": e.to_string(),
            });
            append_line(&log_file, &line.to_string())?;
            Err(e)
        }
        Err(e) => Err(e),
    }
}
