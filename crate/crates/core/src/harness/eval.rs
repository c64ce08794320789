//! Greedy evaluation of a checkpoint or the rule-based baseline.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cycle::DriveCycle;
use crate::env::{episode, EmsEnv, EnvObs, RewardParams};
use crate::error::{Error, Result};
use crate::rl::{Checkpoint, DdpgAgent};
use crate::sim::{RuleBased, StepContext, Strategy, Trace, TraceTotals};
use crate::vehicle::VehicleParams;

/// Deterministic actor output as a split strategy.
pub struct GreedyPolicy<'a>(pub &'a DdpgAgent);

impl Strategy for GreedyPolicy<'_> {
    fn split(&mut self, ctx: &StepContext<'_>) -> f64 {
        self.0.greedy(&EnvObs::from_context(ctx).normalized())
    }
}

pub const RL: &str = "rl";
pub const RULE_BASED: &str = "rule-based";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub strategy: String,
    #[serde(flatten)]
    pub totals: TraceTotals,
    #[serde(rename = "return")]
    pub ret: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub summary: EvalSummary,
    pub trace: Trace,
}

impl Evaluation {
    pub fn summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.summary).expect("summary serialises");
        s.push('\n');
        s
    }

    /// Writes `<stem>.csv` (the trace) and `<stem>.json` (the summary).
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join(format!("{stem}.csv"));
        std::fs::write(&csv, self.trace.to_csv()).map_err(|e| Error::io(&csv, e))?;
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&json, self.summary_json()).map_err(|e| Error::io(&json, e))
    }
}

pub fn evaluate(strategy_name: &str, policy: &mut dyn Strategy, vehicle: &VehicleParams, cycle: &DriveCycle, reward: RewardParams) -> Result<Evaluation> {
    let mut env = EmsEnv::new(vehicle.clone(), cycle.clone(), reward)?;
    let ep = episode(&mut env, policy);
    Ok(Evaluation {
        summary: EvalSummary {
            strategy: strategy_name.to_string(),
            totals: ep.trace.totals.clone(),
            ret: ep.ret,
        },
        trace: ep.trace,
    })
}

pub fn evaluate_agent(agent: &DdpgAgent, vehicle: &VehicleParams, cycle: &DriveCycle, reward: RewardParams) -> Result<Evaluation> {
    evaluate(RL, &mut GreedyPolicy(agent), vehicle, cycle, reward)
}

/// Rule-based baseline with its threshold at the reward's `soc_ref`.
pub fn evaluate_rule_based(vehicle: &VehicleParams, cycle: &DriveCycle, reward: RewardParams) -> Result<Evaluation> {
    evaluate(RULE_BASED, &mut RuleBased { soc_ref: reward.soc_ref }, vehicle, cycle, reward)
}

/// A loaded checkpoint with the training-time settings stored alongside it.
#[derive(Debug, Clone)]
pub struct LoadedPolicy {
    pub agent: DdpgAgent,
    pub vehicle: Option<VehicleParams>,
    pub reward: RewardParams,
}

pub fn load_policy(path: impl AsRef<Path>) -> Result<LoadedPolicy> {
    let ckpt = Checkpoint::load(path)?;
    let vehicle = match ckpt.meta.get("vehicle") {
        Some(v) => Some(VehicleParams::deserialize(v).map_err(|e| Error::Schema {
            field: "meta.vehicle".into(),
            msg: e.to_string(),
        })?),
        None => None,
    };
    let reward = match ckpt.meta.get("reward") {
        Some(r) => RewardParams::deserialize(r).map_err(|e| Error::Schema {
            field: "meta.reward".into(),
            msg: e.to_string(),
        })?,
        None => RewardParams::default(),
    };
    Ok(LoadedPolicy {
        agent: DdpgAgent::from_checkpoint(ckpt)?,
        vehicle,
        reward,
    })
}
