//! DDPG with a Monte Carlo dropout critic, prioritised replay weights and JSON
//! checkpoints.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::nn::{Activation, Mlp};
use super::per::Transition;
use crate::error::{Error, Result};
use crate::par::{self, Exec};

pub const OBS_DIM: usize = 4;
pub const CHECKPOINT_FORMAT: &str = "emslab-ddpg";
pub const CHECKPOINT_VERSION: u32 = 1;
/// Minibatch rows per gradient work unit. Fixed so the summation order, and
/// therefore every bit of the result, does not depend on the thread count.
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdpgConfig {
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    /// Critic dropout rate, applied in front of every critic layer.
    pub dropout: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub per_alpha: f64,
    pub per_beta_start: f64,
    pub per_beta_end: f64,
    pub per_epsilon: f64,
    pub noise_sigma: f64,
    /// Multiplier applied to `noise_sigma` after every episode.
    pub noise_decay: f64,
    /// Dropout passes averaged for the target Q value.
    pub mc_passes: usize,
    /// Rewards are multiplied by this before entering the TD target, which
    /// keeps Q values near unit scale for the linear critic head.
    pub reward_scale: f64,
    /// Half-width of the uniform init of both output layers.
    pub final_layer_init: f64,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        DdpgConfig {
            actor_hidden: vec![100, 100],
            critic_hidden: vec![100, 100, 50],
            dropout: 0.1,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            gamma: 0.99,
            tau: 0.005,
            batch_size: 64,
            buffer_capacity: 1 << 17,
            per_alpha: 0.6,
            per_beta_start: 0.4,
            per_beta_end: 1.0,
            per_epsilon: 1e-3,
            noise_sigma: 0.3,
            noise_decay: 0.95,
            mc_passes: 4,
            reward_scale: 0.01,
            final_layer_init: 3e-3,
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| if ok { Ok(()) } else { Err(Error::Validation(format!("agent.{what}"))) };
        check(!self.actor_hidden.is_empty() && !self.actor_hidden.contains(&0), "actor_hidden must be non-empty positive sizes")?;
        check(!self.critic_hidden.is_empty() && !self.critic_hidden.contains(&0), "critic_hidden must be non-empty positive sizes")?;
        check((0.0..1.0).contains(&self.dropout), "dropout must be in [0, 1)")?;
        check(self.actor_lr > 0.0 && self.critic_lr > 0.0, "learning rates must be > 0")?;
        check((0.0..1.0).contains(&self.gamma), "gamma must be in [0, 1)")?;
        check(self.tau > 0.0 && self.tau <= 1.0, "tau must be in (0, 1]")?;
        check(self.batch_size >= 1, "batch_size must be >= 1")?;
        check(self.buffer_capacity.is_power_of_two(), "buffer_capacity must be a power of two")?;
        check(self.per_alpha >= 0.0, "per_alpha must be >= 0")?;
        check(self.per_beta_start >= 0.0 && self.per_beta_end >= 0.0, "per_beta must be >= 0")?;
        check(self.per_epsilon > 0.0, "per_epsilon must be > 0")?;
        check(self.noise_sigma >= 0.0, "noise_sigma must be >= 0")?;
        check(self.noise_decay > 0.0 && self.noise_decay <= 1.0, "noise_decay must be in (0, 1]")?;
        check(self.mc_passes >= 1, "mc_passes must be >= 1")?;
        check(self.reward_scale > 0.0 && self.reward_scale.is_finite(), "reward_scale must be > 0")?;
        check(self.final_layer_init > 0.0, "final_layer_init must be > 0")?;
        Ok(())
    }

    pub fn actor_sizes(&self) -> Vec<usize> {
        let mut s = vec![OBS_DIM];
        s.extend(&self.actor_hidden);
        s.push(1);
        s
    }

    pub fn critic_sizes(&self) -> Vec<usize> {
        let mut s = vec![OBS_DIM + 1];
        s.extend(&self.critic_hidden);
        s.push(1);
        s
    }

    /// PER importance exponent at `progress` in [0, 1] of training.
    pub fn per_beta(&self, progress: f64) -> f64 {
        let p = progress.clamp(0.0, 1.0);
        self.per_beta_start + (self.per_beta_end - self.per_beta_start) * p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub td_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdpgAgent {
    pub config: DdpgConfig,
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
    pub noise_sigma: f64,
    rng: ChaCha8Rng,
    updates: u64,
    exec: Exec,
}

/// Derives an independent seed from `base` and a stream index.
pub fn mix_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn critic_input(s: &[f64; OBS_DIM], a: f64) -> [f64; OBS_DIM + 1] {
    [s[0], s[1], s[2], s[3], a]
}

fn squash(y: f64) -> f64 {
    0.5 * (y + 1.0)
}

impl DdpgAgent {
    pub fn new(config: DdpgConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor = Mlp::init(&config.actor_sizes(), Activation::Tanh, Activation::Tanh, 0.0, config.final_layer_init, &mut rng)?;
        let critic = Mlp::init(
            &config.critic_sizes(),
            Activation::Tanh,
            Activation::Linear,
            config.dropout,
            config.final_layer_init,
            &mut rng,
        )?;
        Ok(DdpgAgent {
            actor_opt: Adam::new(actor.params().len(), config.actor_lr),
            critic_opt: Adam::new(critic.params().len(), config.critic_lr),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            noise_sigma: config.noise_sigma,
            config,
            rng,
            updates: 0,
            exec: Exec::default(),
        })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn set_exec(&mut self, exec: Exec) {
        self.exec = exec;
    }

    pub fn exec(&self) -> Exec {
        self.exec
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Deterministic policy output in [0, 1] (dropout off).
    pub fn greedy(&self, obs: &[f64; OBS_DIM]) -> f64 {
        let y = self.actor.forward(obs, None).expect("actor input is OBS_DIM")[0];
        squash(y).clamp(0.0, 1.0)
    }

    /// Greedy action, plus `N(0, noise_sigma)` from `rng` when exploring,
    /// clamped to [0, 1].
    pub fn act<R: Rng>(&self, obs: &[f64; OBS_DIM], explore: bool, rng: &mut R) -> f64 {
        let a = self.greedy(obs);
        if !explore || self.noise_sigma == 0.0 {
            return a;
        }
        let n: f64 = rng.sample(StandardNormal);
        (a + self.noise_sigma * n).clamp(0.0, 1.0)
    }

    /// Exploring action drawn with the agent's own RNG.
    pub fn act_explore(&mut self, obs: &[f64; OBS_DIM]) -> f64 {
        let mut rng = self.rng.clone();
        let a = self.act(obs, true, &mut rng);
        self.rng = rng;
        a
    }

    pub fn end_episode(&mut self) {
        self.noise_sigma *= self.config.noise_decay;
    }

    /// Online critic value, dropout on when a seed is given.
    pub fn q_value(&self, s: &[f64; OBS_DIM], a: f64, dropout_seed: Option<u64>) -> f64 {
        self.critic.forward(&critic_input(s, a), dropout_seed).expect("critic input is OBS_DIM + 1")[0]
    }

    /// Target-network value of `s`, averaged over `passes` dropout passes.
    pub fn target_value(&self, s: &[f64; OBS_DIM], seed: u64, passes: usize) -> f64 {
        let a = squash(self.target_actor.forward(s, None).expect("actor input is OBS_DIM")[0]).clamp(0.0, 1.0);
        let x = critic_input(s, a);
        let dropout_on = self.target_critic.dropout() > 0.0;
        let sum: f64 = (0..passes)
            .map(|p| {
                let seed = dropout_on.then(|| mix_seed(seed, p as u64));
                self.target_critic.forward(&x, seed).expect("critic input is OBS_DIM + 1")[0]
            })
            .sum();
        sum / passes as f64
    }

    /// `y = scale * r + gamma * (1 - done) * mean_p Q'(s', mu'(s'))`.
    pub fn td_target(&self, t: &Transition, seed: u64) -> f64 {
        let r = self.config.reward_scale * t.reward;
        if t.done {
            return r;
        }
        r + self.config.gamma * self.target_value(&t.next_state, seed, self.config.mc_passes)
    }

    /// One full step: critic, actor, then target networks.
    pub fn update(&mut self, batch: &[Transition], is_weights: &[f64]) -> Result<UpdateStats> {
        let seed = self.rng.random::<u64>();
        let (critic_loss, td_errors) = self.train_critic(batch, is_weights, seed)?;
        let states: Vec<[f64; OBS_DIM]> = batch.iter().map(|t| t.state).collect();
        let actor_loss = self.train_actor(&states)?;
        self.soft_update_targets();
        self.updates += 1;
        Ok(UpdateStats {
            critic_loss,
            actor_loss,
            td_errors,
        })
    }

    /// Importance-weighted squared TD error step. Returns the loss and
    /// per-item `|TD error|` (in scaled reward units).
    pub fn train_critic(&mut self, batch: &[Transition], is_weights: &[f64], seed: u64) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::Usage("empty training batch".into()));
        }
        if is_weights.len() != batch.len() {
            return Err(Error::Shape(format!("{} weights for {} transitions", is_weights.len(), batch.len())));
        }
        let n = batch.len() as f64;
        let chunks = batch.len().div_ceil(GRAD_CHUNK);
        let parts = par::map_range(self.exec, chunks, |c| {
            let mut grads = vec![0.0; self.critic.params().len()];
            let mut loss = 0.0;
            let mut tds = Vec::with_capacity(GRAD_CHUNK);
            for i in c * GRAD_CHUNK..((c + 1) * GRAD_CHUNK).min(batch.len()) {
                let t = &batch[i];
                let y = self.td_target(t, mix_seed(seed, 2 * i as u64));
                let drop_seed = (self.critic.dropout() > 0.0).then(|| mix_seed(seed, 2 * i as u64 + 1));
                let cache = self.critic.forward_cached(&critic_input(&t.state, t.action), drop_seed)?;
                let delta = y - cache.output()[0];
                let w = is_weights[i];
                loss += w * delta * delta / n;
                self.critic.backward(&cache, &[-2.0 * w * delta / n], &mut grads)?;
                tds.push(delta.abs());
            }
            Ok::<_, Error>((grads, loss, tds))
        });
        let mut grads = vec![0.0; self.critic.params().len()];
        let mut loss = 0.0;
        let mut td_errors = Vec::with_capacity(batch.len());
        for part in parts {
            let (g, l, tds): (Vec<f64>, f64, Vec<f64>) = part?;
            for (a, b) in grads.iter_mut().zip(&g) {
                *a += b;
            }
            loss += l;
            td_errors.extend(tds);
        }
        if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence(format!("critic loss {loss} after {} updates", self.updates)));
        }
        self.critic_opt.step(self.critic.params_mut(), &grads)?;
        if !self.critic.is_finite() {
            return Err(Error::Divergence("critic parameters became non-finite".into()));
        }
        Ok((loss, td_errors))
    }

    /// Deterministic policy gradient step maximising `Q(s, mu(s))`, with the
    /// critic evaluated dropout-off. Returns `-mean Q`.
    pub fn train_actor(&mut self, states: &[[f64; OBS_DIM]]) -> Result<f64> {
        if states.is_empty() {
            return Err(Error::Usage("empty training batch".into()));
        }
        let n = states.len() as f64;
        let chunks = states.len().div_ceil(GRAD_CHUNK);
        let parts = par::map_range(self.exec, chunks, |c| {
            let mut grads = vec![0.0; self.actor.params().len()];
            let mut scratch = vec![0.0; self.critic.params().len()];
            let mut loss = 0.0;
            for s in &states[c * GRAD_CHUNK..((c + 1) * GRAD_CHUNK).min(states.len())] {
                let a_cache = self.actor.forward_cached(s, None)?;
                let y = a_cache.output()[0];
                let c_cache = self.critic.forward_cached(&critic_input(s, squash(y)), None)?;
                loss -= c_cache.output()[0] / n;
                let d_input = self.critic.backward(&c_cache, &[-1.0 / n], &mut scratch)?;
                self.actor.backward(&a_cache, &[0.5 * d_input[OBS_DIM]], &mut grads)?;
            }
            Ok::<_, Error>((grads, loss))
        });
        let mut grads = vec![0.0; self.actor.params().len()];
        let mut loss = 0.0;
        for part in parts {
            let (g, l): (Vec<f64>, f64) = part?;
            for (a, b) in grads.iter_mut().zip(&g) {
                *a += b;
            }
            loss += l;
        }
        if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence(format!("actor loss {loss} after {} updates", self.updates)));
        }
        self.actor_opt.step(self.actor.params_mut(), &grads)?;
        if !self.actor.is_finite() {
            return Err(Error::Divergence("actor parameters became non-finite".into()));
        }
        Ok(loss)
    }

    pub fn soft_update_targets(&mut self) {
        let tau = self.config.tau;
        self.target_actor.soft_update_from(&self.actor, tau).expect("target shares actor shape");
        self.target_critic.soft_update_from(&self.critic, tau).expect("target shares critic shape");
    }

    pub fn to_checkpoint(&self, episode: usize, meta: serde_json::Value) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            episode,
            config: self.config.clone(),
            actor: self.actor.clone(),
            critic: self.critic.clone(),
            target_actor: self.target_actor.clone(),
            target_critic: self.target_critic.clone(),
            actor_opt: self.actor_opt.clone(),
            critic_opt: self.critic_opt.clone(),
            noise_sigma: self.noise_sigma,
            rng: self.rng.clone(),
            updates: self.updates,
            meta,
        }
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        ckpt.validate()?;
        Ok(DdpgAgent {
            config: ckpt.config,
            actor: ckpt.actor,
            critic: ckpt.critic,
            target_actor: ckpt.target_actor,
            target_critic: ckpt.target_critic,
            actor_opt: ckpt.actor_opt,
            critic_opt: ckpt.critic_opt,
            noise_sigma: ckpt.noise_sigma,
            rng: ckpt.rng,
            updates: ckpt.updates,
            exec: Exec::default(),
        })
    }
}

/// Everything needed to resume training or evaluate a policy. `meta` carries
/// caller data (the harness stores the vehicle and reward settings there).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub episode: usize,
    pub config: DdpgConfig,
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
    pub noise_sigma: f64,
    pub rng: ChaCha8Rng,
    pub updates: u64,
    #[serde(default)]
    pub meta: serde_json::Value,
}

impl Checkpoint {
    /// Checks the header and that every network and optimiser matches the
    /// shapes implied by the stored config.
    pub fn validate(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Schema {
                field: "format".into(),
                msg: format!("expected `{CHECKPOINT_FORMAT}`, found `{}`", self.format),
            });
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Schema {
                field: "version".into(),
                msg: format!("unsupported checkpoint version {}", self.version),
            });
        }
        self.config.validate()?;
        let nets = [
            ("actor", &self.actor, self.config.actor_sizes()),
            ("target_actor", &self.target_actor, self.config.actor_sizes()),
            ("critic", &self.critic, self.config.critic_sizes()),
            ("target_critic", &self.target_critic, self.config.critic_sizes()),
        ];
        for (name, net, want) in nets {
            if net.sizes() != want.as_slice() {
                return Err(Error::Shape(format!("{name} has layers {:?}, config implies {want:?}", net.sizes())));
            }
        }
        if !self.actor.same_shape(&self.target_actor) || !self.critic.same_shape(&self.target_critic) {
            return Err(Error::Shape("target networks differ from online networks".into()));
        }
        for (name, opt, n) in [
            ("actor_opt", &self.actor_opt, self.actor.params().len()),
            ("critic_opt", &self.critic_opt, self.critic.params().len()),
        ] {
            if opt.m.len() != n || opt.v.len() != n {
                return Err(Error::Shape(format!("{name} holds {} moments for {n} parameters", opt.m.len())));
            }
        }
        Ok(())
    }

    /// Rejects a checkpoint whose architecture differs from `expected`.
    pub fn check_architecture(&self, expected: &DdpgConfig) -> Result<()> {
        if self.config.actor_sizes() != expected.actor_sizes() || self.config.critic_sizes() != expected.critic_sizes() {
            return Err(Error::Shape(format!(
                "checkpoint networks actor {:?} / critic {:?} do not match expected actor {:?} / critic {:?}",
                self.config.actor_sizes(),
                self.config.critic_sizes(),
                expected.actor_sizes(),
                expected.critic_sizes()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("checkpoint serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            if msg.starts_with("shape error") {
                Error::Shape(msg)
            } else {
                Error::Serde(msg)
            }
        })?;
        ckpt.validate()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        // Write then rename so an interrupted save never clobbers the last
        // good checkpoint.
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_json()).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> DdpgConfig {
        DdpgConfig {
            actor_hidden: vec![16],
            critic_hidden: vec![16, 8],
            batch_size: 8,
            buffer_capacity: 64,
            ..DdpgConfig::default()
        }
    }

    fn transition(reward: f64, done: bool) -> Transition {
        Transition {
            state: [0.6, 0.2, 0.1, 0.2],
            action: 0.3,
            reward,
            next_state: [0.59, 0.25, 0.0, 0.25],
            done,
        }
    }

    #[test]
    fn greedy_is_deterministic_and_bounded() {
        let agent = DdpgAgent::new(DdpgConfig::default(), 1).unwrap();
        let obs = [0.7, 0.3, -0.1, 0.28];
        assert_eq!(agent.greedy(&obs), agent.greedy(&obs));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut quiet = agent.clone();
        quiet.noise_sigma = 0.0;
        assert_eq!(quiet.act(&obs, true, &mut rng), agent.greedy(&obs));
        for _ in 0..1000 {
            let a = agent.act(&obs, true, &mut rng);
            assert!((0.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn terminal_target_ignores_next_state() {
        let agent = DdpgAgent::new(small_config(), 2).unwrap();
        let mut t = transition(-5.0, true);
        let y = agent.td_target(&t, 9);
        assert_eq!(y, -5.0 * agent.config.reward_scale);
        t.next_state = [0.1, 0.9, 0.9, 0.9];
        assert_eq!(agent.td_target(&t, 9), y);
    }

    #[test]
    fn tau_one_copies_online() {
        let mut cfg = small_config();
        cfg.tau = 1.0;
        let mut agent = DdpgAgent::new(cfg, 3).unwrap();
        let batch = vec![transition(-1.0, false); 8];
        agent.update(&batch, &[1.0; 8]).unwrap();
        assert_eq!(agent.target_actor.params(), agent.actor.params());
        assert_eq!(agent.target_critic.params(), agent.critic.params());
    }

    #[test]
    fn soft_update_contracts_by_one_minus_tau() {
        let mut agent = DdpgAgent::new(small_config(), 4).unwrap();
        let batch = vec![transition(-1.0, false); 8];
        for _ in 0..3 {
            let seed = agent.rng.random();
            agent.train_critic(&batch, &[1.0; 8], seed).unwrap();
        }
        let dist = |a: &Mlp, b: &Mlp| a.params().iter().zip(b.params()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let before = dist(&agent.target_critic, &agent.critic);
        assert!(before > 0.0);
        agent.soft_update_targets();
        let after = dist(&agent.target_critic, &agent.critic);
        assert!((after - (1.0 - agent.config.tau) * before).abs() <= 1e-12 * before);
    }

    #[test]
    fn critic_regresses_to_reward_with_zero_gamma() {
        let mut cfg = small_config();
        cfg.gamma = 0.0;
        cfg.dropout = 0.0;
        cfg.reward_scale = 1.0;
        let mut agent = DdpgAgent::new(cfg, 5).unwrap();
        let t = transition(0.75, false);
        for k in 0..3000 {
            agent.train_critic(std::slice::from_ref(&t), &[1.0], k).unwrap();
        }
        let q = agent.q_value(&t.state, t.action, None);
        assert!((q - 0.75).abs() < 1e-3, "q = {q}");
    }

    #[test]
    fn non_finite_reward_is_divergence() {
        let mut agent = DdpgAgent::new(small_config(), 6).unwrap();
        let before = agent.clone();
        let batch = vec![transition(f64::NAN, false); 8];
        let err = agent.update(&batch, &[1.0; 8]).unwrap_err();
        assert!(matches!(err, Error::Divergence(_)));
        assert_eq!(agent.critic, before.critic);
    }

    #[test]
    fn sequential_and_parallel_updates_match() {
        let batch: Vec<_> = (0..20).map(|i| transition(-(i as f64), i % 7 == 0)).collect();
        let w: Vec<f64> = (0..20).map(|i| 0.5 + i as f64 / 40.0).collect();
        let mut a = DdpgAgent::new(small_config(), 7).unwrap().with_exec(Exec::Sequential);
        let mut b = DdpgAgent::new(small_config(), 7).unwrap().with_exec(Exec::Parallel);
        for _ in 0..3 {
            assert_eq!(a.update(&batch, &w).unwrap(), b.update(&batch, &w).unwrap());
        }
        assert_eq!(a.actor, b.actor);
        assert_eq!(a.critic, b.critic);
    }

    #[test]
    fn checkpoint_round_trip_and_shape_rejection() {
        let mut agent = DdpgAgent::new(small_config(), 8).unwrap();
        agent.update(&vec![transition(-2.0, false); 8], &[1.0; 8]).unwrap();
        let ckpt = agent.to_checkpoint(3, serde_json::json!({"note": "x"}));
        let back = Checkpoint::from_json(&ckpt.to_json()).unwrap();
        assert_eq!(back, ckpt);
        let mut restored = DdpgAgent::from_checkpoint(back).unwrap();
        let batch = vec![transition(-1.0, false); 8];
        assert_eq!(agent.update(&batch, &[1.0; 8]).unwrap(), restored.update(&batch, &[1.0; 8]).unwrap());

        let mut v: serde_json::Value = serde_json::from_str(&ckpt.to_json()).unwrap();
        v["config"]["actor_hidden"] = serde_json::json!([32]);
        assert!(matches!(Checkpoint::from_json(&v.to_string()), Err(Error::Shape(_))));

        let mut v: serde_json::Value = serde_json::from_str(&ckpt.to_json()).unwrap();
        v["critic"]["params"].as_array_mut().unwrap().push(serde_json::json!(0.0));
        assert!(matches!(Checkpoint::from_json(&v.to_string()), Err(Error::Shape(_))));

        assert!(matches!(ckpt.check_architecture(&DdpgConfig::default()), Err(Error::Shape(_))));
    }
}
