//! Reset/step environment over one drive cycle.
//!
//! The observation before step `k` (moving from sample `k` to `k + 1`) is
//! `{soc, s_cycle = speed[k+1], a_cycle = (speed[k+1] - speed[k]) / dt,
//! s_achieved}`. After the last step there is no next target, so the terminal
//! observation repeats the final target speed with zero acceleration.

use serde::{Deserialize, Serialize};

use crate::cycle::DriveCycle;
use crate::error::{Error, Result};
use crate::rl::{Transition, OBS_DIM};
use crate::sim::{self, SimState, StepContext, StepResult, Strategy, Trace};
use crate::vehicle::VehicleParams;

/// Speeds are divided by this before reaching the networks (m/s).
pub const SPEED_NORM: f64 = 40.0;
/// Accelerations are divided by this before reaching the networks (m/s²).
pub const ACCEL_NORM: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardParams {
    /// Weight per kW of source power.
    pub alpha1: f64,
    /// Penalty for a step that misses the speed trace.
    pub alpha2: f64,
    /// Penalty for a step ending more than `beta` below `soc_ref`.
    pub alpha3: f64,
    pub beta: f64,
    pub soc_ref: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams {
            alpha1: 1.5,
            alpha2: 10.0,
            alpha3: 0.1,
            beta: 0.15,
            soc_ref: 0.65,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha1 >= 0.0 && self.alpha2 >= 0.0 && self.alpha3 >= 0.0) {
            return Err(Error::Validation("reward alphas must be >= 0".into()));
        }
        if !(self.beta > 0.0) {
            return Err(Error::Validation("reward.beta must be > 0".into()));
        }
        if !(self.soc_ref > 0.0 && self.soc_ref < 1.0) {
            return Err(Error::Validation("reward.soc_ref must be in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn soc_deficit(&self, soc: f64) -> bool {
        self.soc_ref - soc > self.beta
    }

    /// `-alpha1 * p_achieved - alpha2 * [miss] - alpha3 * [soc deficit]`,
    /// judged on the state after the step.
    pub fn reward(&self, r: &StepResult) -> f64 {
        -self.alpha1 * r.p_achieved_kw
            - self.alpha2 * f64::from(u8::from(r.speed_miss))
            - self.alpha3 * f64::from(u8::from(self.soc_deficit(r.soc)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvObs {
    pub soc: f64,
    pub s_cycle: f64,
    pub a_cycle: f64,
    pub s_achieved: f64,
}

impl EnvObs {
    pub fn from_context(ctx: &StepContext<'_>) -> Self {
        EnvObs {
            soc: ctx.state.soc,
            s_cycle: ctx.v_target,
            a_cycle: ctx.a_cycle,
            s_achieved: ctx.state.v_achieved,
        }
    }

    /// Network input: SOC as-is, speeds over [`SPEED_NORM`], acceleration
    /// over [`ACCEL_NORM`].
    pub fn normalized(&self) -> [f64; OBS_DIM] {
        [self.soc, self.s_cycle / SPEED_NORM, self.a_cycle / ACCEL_NORM, self.s_achieved / SPEED_NORM]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub obs: EnvObs,
    pub reward: f64,
    pub done: bool,
    pub info: StepResult,
}

#[derive(Debug, Clone)]
pub struct EmsEnv {
    vehicle: VehicleParams,
    cycle: DriveCycle,
    reward: RewardParams,
    state: SimState,
    steps: Vec<StepResult>,
}

impl EmsEnv {
    pub fn new(vehicle: VehicleParams, cycle: DriveCycle, reward: RewardParams) -> Result<Self> {
        vehicle.validate()?;
        reward.validate()?;
        if cycle.len() < 2 {
            return Err(Error::Validation("cycle needs at least two samples".into()));
        }
        let state = SimState::initial(&vehicle);
        Ok(EmsEnv {
            vehicle,
            cycle,
            reward,
            state,
            steps: Vec::new(),
        })
    }

    pub fn vehicle(&self) -> &VehicleParams {
        &self.vehicle
    }

    pub fn cycle(&self) -> &DriveCycle {
        &self.cycle
    }

    pub fn reward_params(&self) -> &RewardParams {
        &self.reward
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    /// Steps per episode, `len(cycle) - 1`.
    pub fn episode_len(&self) -> usize {
        self.cycle.len() - 1
    }

    pub fn is_done(&self) -> bool {
        self.state.step_index >= self.episode_len()
    }

    pub fn reset(&mut self) -> EnvObs {
        self.state = SimState::initial(&self.vehicle);
        self.steps.clear();
        self.observe()
    }

    /// Context for the next step, or `None` once the episode is over.
    pub fn context(&self) -> Option<StepContext<'_>> {
        (!self.is_done()).then(|| StepContext::for_cycle_step(&self.state, &self.vehicle, &self.cycle, self.state.step_index + 1))
    }

    pub fn observe(&self) -> EnvObs {
        match self.context() {
            Some(ctx) => EnvObs::from_context(&ctx),
            None => EnvObs {
                soc: self.state.soc,
                s_cycle: self.cycle.speed()[self.cycle.len() - 1],
                a_cycle: 0.0,
                s_achieved: self.state.v_achieved,
            },
        }
    }

    pub fn step(&mut self, action: f64) -> Result<EnvStep> {
        if self.is_done() {
            return Err(Error::Usage("step called after the episode finished; call reset".into()));
        }
        if !(0.0..=1.0).contains(&action) {
            return Err(Error::Argument(format!("action {action} outside [0, 1]")));
        }
        let i = self.state.step_index + 1;
        let (next, info) = sim::step(&self.state, &self.vehicle, self.cycle.speed()[i], self.cycle.grade()[i], self.cycle.dt(), action);
        self.state = next;
        self.steps.push(info);
        Ok(EnvStep {
            obs: self.observe(),
            reward: self.reward.reward(&info),
            done: self.is_done(),
            info,
        })
    }

    /// Trace of the steps taken since the last reset.
    pub fn trace(&self) -> Trace {
        Trace::from_steps(&self.vehicle, &self.cycle, &self.state, self.steps.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub transitions: Vec<Transition>,
    pub rewards: Vec<f64>,
    /// Undiscounted sum of rewards.
    pub ret: f64,
    pub trace: Trace,
}

/// Rolls one full cycle from reset. Any [`Strategy`] works as the policy,
/// since the observation is a function of the step context.
pub fn episode(env: &mut EmsEnv, policy: &mut dyn Strategy) -> Episode {
    let mut obs = env.reset();
    let mut transitions = Vec::with_capacity(env.episode_len());
    let mut rewards = Vec::with_capacity(env.episode_len());
    while let Some(ctx) = env.context() {
        let action = policy.split(&ctx);
        let action = if action.is_nan() { 0.0 } else { action.clamp(0.0, 1.0) };
        let step = env.step(action).expect("episode not finished");
        transitions.push(Transition {
            state: obs.normalized(),
            action,
            reward: step.reward,
            next_state: step.obs.normalized(),
            done: step.done,
        });
        rewards.push(step.reward);
        obs = step.obs;
    }
    Episode {
        ret: rewards.iter().sum(),
        transitions,
        rewards,
        trace: env.trace(),
    }
}
