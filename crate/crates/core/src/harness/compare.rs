//! Plot-ready alignment of exported traces.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::sim::TraceTotals;

/// A trace CSV read back together with its JSON sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedTrace {
    pub label: String,
    pub totals: TraceTotals,
    pub t: Vec<f64>,
    pub v_target: Vec<f64>,
    pub v_achieved: Vec<f64>,
    pub soc: Vec<f64>,
    pub fuel_kwh_cum: Vec<f64>,
}

#[derive(Deserialize)]
struct Row {
    t: f64,
    v_target: f64,
    v_achieved: f64,
    #[allow(dead_code)]
    p_req: f64,
    #[allow(dead_code)]
    p_ice: f64,
    #[allow(dead_code)]
    p_batt: f64,
    soc: f64,
    fuel_kwh_cum: f64,
}

impl LoadedTrace {
    pub fn parse(label: &str, csv_text: &str, totals_json: &str) -> Result<Self> {
        let totals: TraceTotals = serde_json::from_str(totals_json)?;
        let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
        let mut tr = LoadedTrace {
            label: label.to_string(),
            totals,
            t: Vec::new(),
            v_target: Vec::new(),
            v_achieved: Vec::new(),
            soc: Vec::new(),
            fuel_kwh_cum: Vec::new(),
        };
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| Error::Parse { line: i + 2, msg: e.to_string() })?;
            tr.t.push(row.t);
            tr.v_target.push(row.v_target);
            tr.v_achieved.push(row.v_achieved);
            tr.soc.push(row.soc);
            tr.fuel_kwh_cum.push(row.fuel_kwh_cum);
        }
        Ok(tr)
    }

    /// Reads `<path>` and the `.json` sidecar next to it. The label defaults
    /// to the file stem.
    pub fn load(path: impl AsRef<Path>, label: Option<&str>) -> Result<Self> {
        let path = path.as_ref();
        let csv_text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let side = path.with_extension("json");
        let json = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
        Self::parse(label.unwrap_or(stem), &csv_text, &json)
    }

    /// Fuel plus net battery energy used up to each row (kWh).
    pub fn cumulative_energy(&self) -> Vec<f64> {
        let t = &self.totals;
        self.fuel_kwh_cum
            .iter()
            .zip(&self.soc)
            .map(|(f, s)| f + (t.soc_initial - s) * t.capacity_kwh)
            .collect()
    }

    /// `v_target - v_achieved` per row.
    pub fn speed_difference(&self) -> Vec<f64> {
        self.v_target.iter().zip(&self.v_achieved).map(|(a, b)| a - b).collect()
    }
}

/// One CSV with `t, v_target`, then `energy_kwh_<label>` and
/// `speed_diff_<label>` for every trace. Traces must come from the same cycle.
pub fn compare_plotdata(traces: &[LoadedTrace]) -> Result<String> {
    let first = traces.first().ok_or_else(|| Error::Argument("compare needs at least one trace".into()))?;
    for tr in &traces[1..] {
        if tr.totals.cycle != first.totals.cycle || tr.t != first.t || tr.v_target != first.v_target {
            return Err(Error::Argument(format!(
                "traces `{}` ({}) and `{}` ({}) are not from the same cycle",
                first.label, first.totals.cycle, tr.label, tr.totals.cycle
            )));
        }
    }
    let mut labels: Vec<&str> = Vec::new();
    for tr in traces {
        if labels.contains(&tr.label.as_str()) {
            return Err(Error::Argument(format!("duplicate trace label `{}`", tr.label)));
        }
        labels.push(&tr.label);
    }
    let energy: Vec<Vec<f64>> = traces.iter().map(LoadedTrace::cumulative_energy).collect();
    let diff: Vec<Vec<f64>> = traces.iter().map(LoadedTrace::speed_difference).collect();

    let mut out = String::from("t,v_target");
    for l in &labels {
        let _ = write!(out, ",energy_kwh_{l}");
    }
    for l in &labels {
        let _ = write!(out, ",speed_diff_{l}");
    }
    out.push('\n');
    for i in 0..first.t.len() {
        let _ = write!(out, "{},{}", first.t[i], first.v_target[i]);
        for e in &energy {
            let _ = write!(out, ",{}", e[i]);
        }
        for d in &diff {
            let _ = write!(out, ",{}", d[i]);
        }
        out.push('\n');
    }
    Ok(out)
}
