//! Transfer tests: a policy and the rule-based baseline over many cycles.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::eval::{evaluate_agent, evaluate_rule_based, Evaluation, RL, RULE_BASED};
use crate::cycle::DriveCycle;
use crate::env::RewardParams;
use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::rl::DdpgAgent;
use crate::vehicle::VehicleParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub strategy: String,
    pub vehicle: String,
    pub cycle: String,
    pub total_energy_kwh: f64,
    pub fuel_kwh: f64,
    pub battery_kwh: f64,
    pub speed_miss_steps: usize,
    pub final_soc: f64,
    #[serde(rename = "return")]
    pub ret: f64,
}

impl ResultRow {
    pub fn from_evaluation(e: &Evaluation) -> Self {
        let t = &e.summary.totals;
        ResultRow {
            strategy: e.summary.strategy.clone(),
            vehicle: t.vehicle.clone(),
            cycle: t.cycle.clone(),
            total_energy_kwh: t.total_energy_kwh,
            fuel_kwh: t.fuel_kwh,
            battery_kwh: t.battery_kwh,
            speed_miss_steps: t.speed_miss_steps,
            final_soc: t.final_soc,
            ret: e.summary.ret,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn get(&self, strategy: &str, cycle: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.strategy == strategy && r.cycle == cycle)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).expect("in-memory csv write");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let rows = rdr
            .deserialize()
            .enumerate()
            .map(|(i, r)| r.map_err(|e| Error::Parse { line: i + 2, msg: e.to_string() }))
            .collect::<Result<Vec<ResultRow>>>()?;
        Ok(ResultTable { rows })
    }

    /// Cycles down the side, one column group per strategy with a column per
    /// vehicle. Energy cells are kWh; `*` marks runs that missed the speed
    /// trace, with counts in the second block.
    pub fn to_text(&self) -> String {
        let mut cycles: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !cycles.contains(&r.cycle.as_str()) {
                cycles.push(&r.cycle);
            }
        }
        let vehicles: Vec<&str> = {
            let mut seen = Vec::new();
            for r in &self.rows {
                if !seen.contains(&r.vehicle.as_str()) {
                    seen.push(r.vehicle.as_str());
                }
            }
            seen
        };
        let strategies: Vec<&str> = [RULE_BASED, RL]
            .into_iter()
            .filter(|s| self.rows.iter().any(|r| r.strategy == *s))
            .chain(
                self.rows
                    .iter()
                    .map(|r| r.strategy.as_str())
                    .filter(|s| *s != RULE_BASED && *s != RL)
                    .collect::<BTreeSet<_>>(),
            )
            .collect();
        let cw = cycles.iter().map(|c| c.len()).max().unwrap_or(5).max(5);
        let vw = vehicles.iter().map(|v| v.len()).max().unwrap_or(0).max(9);

        let mut out = String::new();
        let block = |out: &mut String, title: &str, cell: &dyn Fn(&ResultRow) -> String| {
            let _ = writeln!(out, "{title}");
            let _ = write!(out, "{:cw$}", "");
            for s in &strategies {
                let label = if *s == RL { "RL-based" } else { s };
                let _ = write!(out, " | {:width$}", label, width = vehicles.len() * (vw + 1) - 1);
            }
            out.push('\n');
            let _ = write!(out, "{:cw$}", "Cycle");
            for _ in &strategies {
                out.push_str(" |");
                for v in &vehicles {
                    let _ = write!(out, " {v:>vw$}");
                }
            }
            out.push('\n');
            for c in &cycles {
                let _ = write!(out, "{c:cw$}");
                for s in &strategies {
                    out.push_str(" |");
                    for v in &vehicles {
                        let text = self
                            .rows
                            .iter()
                            .find(|r| r.cycle == *c && r.strategy == *s && r.vehicle == *v)
                            .map(cell)
                            .unwrap_or_else(|| "-".into());
                        let _ = write!(out, " {text:>vw$}");
                    }
                }
                out.push('\n');
            }
        };
        block(&mut out, "Energy consumption (kWh)", &|r| {
            let mark = if r.speed_miss_steps > 0 { "*" } else { "" };
            format!("{:.2}{mark}", r.total_energy_kwh)
        });
        out.push('\n');
        block(&mut out, "Speed-miss steps", &|r| r.speed_miss_steps.to_string());
        if self.rows.iter().any(|r| r.speed_miss_steps > 0) {
            out.push_str("\n* speed trace not followed on every step\n");
        }
        out
    }
}

/// Evaluates `agent` and the rule-based baseline on every cycle (in
/// parallel across cycles). Rows come out cycle by cycle, rule-based first.
pub fn transfer(agent: &DdpgAgent, vehicle: &VehicleParams, cycles: &[DriveCycle], reward: RewardParams, exec: Exec) -> Result<ResultTable> {
    let per_cycle = par::map(exec, cycles, |c| -> Result<[ResultRow; 2]> {
        let rb = evaluate_rule_based(vehicle, c, reward)?;
        let rl = evaluate_agent(agent, vehicle, c, reward)?;
        Ok([ResultRow::from_evaluation(&rb), ResultRow::from_evaluation(&rl)])
    });
    let mut rows = Vec::with_capacity(2 * cycles.len());
    for pair in per_cycle {
        rows.extend(pair?);
    }
    Ok(ResultTable { rows })
}
