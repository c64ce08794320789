//! Drive cycles: loading, validation, resampling, statistics and the
//! synthetic cycle generator.
//!
//! Cycles are stored on a uniform time grid. Acceleration is never stored;
//! it is always derived from consecutive speeds.
//!
//! CSV format: header `time_s,speed_mps[,grade]`, one sample per row. The
//! grade column is optional and defaults to 0.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on |grade| accepted in a cycle.
pub const MAX_ABS_GRADE: f64 = 0.3;
/// Speeds below this count as idling in [`CycleStats::idle_fraction`].
pub const IDLE_SPEED: f64 = 0.1;
/// Zero-speed gap inserted between concatenated cycles, in seconds.
pub const CONCAT_BRIDGE_S: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveCycle {
    name: String,
    dt: f64,
    speed: Vec<f64>,
    grade: Vec<f64>,
}

impl DriveCycle {
    /// Builds a validated cycle. `speed[0]` must be zero.
    pub fn new(name: impl Into<String>, dt: f64, speed: Vec<f64>, grade: Vec<f64>) -> Result<Self> {
        let c = DriveCycle {
            name: name.into(),
            dt,
            speed,
            grade,
        };
        c.validate(true)?;
        Ok(c)
    }

    /// Like [`DriveCycle::new`] but allows a non-zero starting speed. Useful
    /// for analysing cycle segments; the simulator always starts from rest.
    pub fn new_relaxed(name: impl Into<String>, dt: f64, speed: Vec<f64>, grade: Vec<f64>) -> Result<Self> {
        let c = DriveCycle {
            name: name.into(),
            dt,
            speed,
            grade,
        };
        c.validate(false)?;
        Ok(c)
    }

    /// Flat cycle (grade 0 everywhere).
    pub fn flat(name: impl Into<String>, dt: f64, speed: Vec<f64>) -> Result<Self> {
        let grade = vec![0.0; speed.len()];
        Self::new(name, dt, speed, grade)
    }

    fn validate(&self, require_rest_start: bool) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Validation(format!("dt must be positive, got {}", self.dt)));
        }
        if self.speed.len() != self.grade.len() {
            return Err(Error::Validation(format!(
                "speed and grade lengths differ ({} vs {})",
                self.speed.len(),
                self.grade.len()
            )));
        }
        if self.speed.len() < 2 {
            return Err(Error::Validation("a cycle needs at least two samples".into()));
        }
        for (i, &v) in self.speed.iter().enumerate() {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("speed[{i}] = {v} is negative or not finite")));
            }
        }
        for (i, &g) in self.grade.iter().enumerate() {
            if !(g.abs() < MAX_ABS_GRADE) {
                return Err(Error::Validation(format!("grade[{i}] = {g} outside (-0.3, 0.3)")));
            }
        }
        if require_rest_start && self.speed[0] != 0.0 {
            return Err(Error::Validation(format!("speed[0] must be 0, got {}", self.speed[0])));
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn speed(&self) -> &[f64] {
        &self.speed
    }

    pub fn grade(&self) -> &[f64] {
        &self.grade
    }

    pub fn len(&self) -> usize {
        self.speed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speed.is_empty()
    }

    pub fn duration(&self) -> f64 {
        (self.len() - 1) as f64 * self.dt
    }

    /// Time of sample `i`.
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// Target acceleration for the step ending at sample `i` (`i >= 1`).
    pub fn accel(&self, i: usize) -> f64 {
        (self.speed[i] - self.speed[i - 1]) / self.dt
    }

    /// Canonical CSV text. `load_cycle` of this output gives back an equal
    /// cycle, and re-saving it reproduces the same bytes.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 16 + 32);
        out.push_str("time_s,speed_mps,grade\n");
        for i in 0..self.len() {
            out.push_str(&format!("{},{},{}\n", self.time(i), self.speed[i], self.grade[i]));
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// A cycle as read from disk, before the uniform-grid check.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCycle {
    pub name: String,
    pub time: Vec<f64>,
    pub speed: Vec<f64>,
    pub grade: Vec<f64>,
}

impl RawCycle {
    /// Interpolates onto a uniform grid starting at the first timestamp.
    pub fn to_uniform(&self, dt: f64) -> Result<DriveCycle> {
        if !(dt > 0.0) {
            return Err(Error::Argument(format!("dt must be positive, got {dt}")));
        }
        let t0 = self.time[0];
        let span = self.time[self.time.len() - 1] - t0;
        let n = (span / dt + 1e-9).floor() as usize + 1;
        let mut speed = Vec::with_capacity(n);
        let mut grade = Vec::with_capacity(n);
        let mut seg = 0;
        for j in 0..n {
            let t = t0 + j as f64 * dt;
            while seg + 2 < self.time.len() && self.time[seg + 1] <= t {
                seg += 1;
            }
            let (ta, tb) = (self.time[seg], self.time[seg + 1]);
            let w = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
            speed.push(lerp(self.speed[seg], self.speed[seg + 1], w));
            grade.push(lerp(self.grade[seg], self.grade[seg + 1], w));
        }
        DriveCycle::new(self.name.clone(), dt, speed, grade)
    }
}

fn lerp(a: f64, b: f64, w: f64) -> f64 {
    if w == 0.0 {
        a
    } else if w == 1.0 {
        b
    } else {
        a + (b - a) * w
    }
}

/// Parses cycle CSV text without requiring a uniform grid. Timestamps must be
/// strictly increasing and speeds non-negative.
pub fn parse_cycle_raw(text: &str, name: &str) -> Result<RawCycle> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(t_col), Some(v_col)) = (col("time_s"), col("speed_mps")) else {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header `time_s,speed_mps[,grade]`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    };
    let g_col = col("grade");

    let mut raw = RawCycle {
        name: name.to_string(),
        time: Vec::new(),
        speed: Vec::new(),
        grade: Vec::new(),
    };
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |idx: usize, what: &str| -> Result<f64> {
            let s = rec.get(idx).ok_or_else(|| Error::Parse {
                line,
                msg: format!("missing {what}"),
            })?;
            s.parse::<f64>().map_err(|_| Error::Parse {
                line,
                msg: format!("invalid {what} `{s}`"),
            })
        };
        let t = field(t_col, "time_s")?;
        let v = field(v_col, "speed_mps")?;
        let g = match g_col {
            Some(idx) => field(idx, "grade")?,
            None => 0.0,
        };
        if !t.is_finite() || !v.is_finite() || !g.is_finite() {
            return Err(Error::Parse {
                line,
                msg: "non-finite value".into(),
            });
        }
        if v < 0.0 {
            return Err(Error::Validation(format!("negative speed {v} at line {line}")));
        }
        if let Some(&prev) = raw.time.last() {
            if t <= prev {
                return Err(Error::Validation(format!("non-monotonic time at line {line} ({t} after {prev})")));
            }
        }
        raw.time.push(t);
        raw.speed.push(v);
        raw.grade.push(g);
    }
    if raw.time.len() < 2 {
        return Err(Error::Validation("a cycle needs at least two samples".into()));
    }
    Ok(raw)
}

/// Parses cycle CSV text and requires a uniform grid.
pub fn parse_cycle(text: &str, name: &str) -> Result<DriveCycle> {
    let raw = parse_cycle_raw(text, name)?;
    let dt = raw.time[1] - raw.time[0];
    for (i, w) in raw.time.windows(2).enumerate() {
        let step = w[1] - w[0];
        if (step - dt).abs() > 1e-6 * dt {
            return Err(Error::Validation(format!(
                "non-uniform timestamps (step {step} at sample {} vs {dt}); load raw and resample",
                i + 1
            )));
        }
    }
    DriveCycle::new(raw.name, dt, raw.speed, raw.grade)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "cycle".into())
}

pub fn load_cycle(path: impl AsRef<Path>) -> Result<DriveCycle> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cycle(&text, &stem(path))
}

/// Loads a cycle that may have non-uniform timestamps; follow with
/// [`RawCycle::to_uniform`].
pub fn load_cycle_raw(path: impl AsRef<Path>) -> Result<RawCycle> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cycle_raw(&text, &stem(path))
}

/// Linear interpolation onto a grid of spacing `dt_new`. The grid starts at
/// t = 0 and stops at the last point not past the original end time, so the
/// end point is kept whenever the duration is a multiple of `dt_new`.
pub fn resample(cycle: &DriveCycle, dt_new: f64) -> Result<DriveCycle> {
    if !(dt_new > 0.0 && dt_new.is_finite()) {
        return Err(Error::Argument(format!("dt_new must be positive, got {dt_new}")));
    }
    if dt_new == cycle.dt {
        return Ok(cycle.clone());
    }
    let n_old = cycle.len();
    let n = (cycle.duration() / dt_new + 1e-9).floor() as usize + 1;
    let ratio = dt_new / cycle.dt;
    let mut speed = Vec::with_capacity(n);
    let mut grade = Vec::with_capacity(n);
    for j in 0..n {
        let x = j as f64 * ratio;
        let mut i = x.floor() as usize;
        let mut w = x - i as f64;
        // Snap to the nearest knot when rounding puts us a hair off it.
        if w > 1.0 - 1e-9 {
            i += 1;
            w = 0.0;
        } else if w < 1e-9 {
            w = 0.0;
        }
        if i >= n_old - 1 {
            speed.push(cycle.speed[n_old - 1]);
            grade.push(cycle.grade[n_old - 1]);
        } else {
            speed.push(lerp(cycle.speed[i], cycle.speed[i + 1], w).max(0.0));
            grade.push(lerp(cycle.grade[i], cycle.grade[i + 1], w));
        }
    }
    DriveCycle::new_relaxed(cycle.name.clone(), dt_new, speed, grade)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleStats {
    pub duration_s: f64,
    pub distance_m: f64,
    pub mean_speed: f64,
    pub max_speed: f64,
    pub max_accel: f64,
    pub idle_fraction: f64,
}

/// Summary statistics. Distance is the rectangle sum `Σ speed[i]·dt`,
/// `mean_speed` the sample mean and `idle_fraction` the share of samples
/// below [`IDLE_SPEED`].
pub fn cycle_stats(cycle: &DriveCycle) -> CycleStats {
    let n = cycle.len() as f64;
    let sum: f64 = cycle.speed.iter().sum();
    let max_speed = cycle.speed.iter().copied().fold(0.0, f64::max);
    let max_accel = (1..cycle.len()).map(|i| cycle.accel(i)).fold(f64::NEG_INFINITY, f64::max);
    let idle = cycle.speed.iter().filter(|&&v| v < IDLE_SPEED).count() as f64;
    CycleStats {
        duration_s: cycle.duration(),
        distance_m: sum * cycle.dt,
        mean_speed: sum / n,
        max_speed,
        max_accel,
        idle_fraction: idle / n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenMode {
    Noise,
    Concat,
    Crop,
}

impl std::str::FromStr for GenMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noise" => Ok(GenMode::Noise),
            "concat" => Ok(GenMode::Concat),
            "crop" => Ok(GenMode::Crop),
            other => Err(Error::Argument(format!("unknown generator mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub sources: Vec<String>,
    pub mode: GenMode,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub crop_window: Option<[f64; 2]>,
    #[serde(default)]
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn noise(source: impl Into<String>, sigma: f64, seed: u64) -> Self {
        GeneratorSpec {
            sources: vec![source.into()],
            mode: GenMode::Noise,
            noise_sigma: sigma,
            crop_window: None,
            seed,
        }
    }

    pub fn concat(sources: impl IntoIterator<Item = impl Into<String>>) -> Self {
        GeneratorSpec {
            sources: sources.into_iter().map(Into::into).collect(),
            mode: GenMode::Concat,
            noise_sigma: 0.0,
            crop_window: None,
            seed: 0,
        }
    }

    pub fn crop(source: impl Into<String>, start_s: f64, end_s: f64) -> Self {
        GeneratorSpec {
            sources: vec![source.into()],
            mode: GenMode::Crop,
            noise_sigma: 0.0,
            crop_window: Some([start_s, end_s]),
            seed: 0,
        }
    }
}

/// Builds a synthetic cycle from library cycles.
///
/// * `noise`: adds seeded zero-mean Gaussian noise to the speeds of the single
///   source, clamps at zero and forces `speed[0] = 0`.
/// * `concat`: joins the sources end to end with a [`CONCAT_BRIDGE_S`] gap at
///   zero speed between the end of one and the start of the next.
/// * `crop`: cuts `crop_window` out of the single source and prepends a rest
///   sample when the window starts while moving.
pub fn generate_cycle(spec: &GeneratorSpec, library: &BTreeMap<String, DriveCycle>) -> Result<DriveCycle> {
    if spec.sources.is_empty() {
        return Err(Error::Validation("generator needs at least one source".into()));
    }
    let sources = spec
        .sources
        .iter()
        .map(|s| library.get(s).ok_or_else(|| Error::Lookup(format!("unknown cycle `{s}`"))))
        .collect::<Result<Vec<_>>>()?;
    let single = || -> Result<&DriveCycle> {
        match sources.as_slice() {
            [one] => Ok(one),
            _ => Err(Error::Validation(format!("{:?} mode takes exactly one source", spec.mode))),
        }
    };

    match spec.mode {
        GenMode::Noise => {
            let src = single()?;
            if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
                return Err(Error::Validation(format!("noise_sigma must be >= 0, got {}", spec.noise_sigma)));
            }
            let mut speed = src.speed.clone();
            if spec.noise_sigma > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                let normal = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Validation(e.to_string()))?;
                for v in speed.iter_mut() {
                    *v = (*v + normal.sample(&mut rng)).max(0.0);
                }
            }
            speed[0] = 0.0;
            let name = format!("{}+noise{}s{}", src.name, spec.noise_sigma, spec.seed);
            DriveCycle::new(name, src.dt, speed, src.grade.clone())
        }
        GenMode::Concat => {
            let dt = sources[0].dt;
            if let Some(bad) = sources.iter().find(|c| (c.dt - dt).abs() > 1e-12 * dt) {
                return Err(Error::Validation(format!(
                    "cannot concatenate `{}` (dt {}) with dt {dt}",
                    bad.name, bad.dt
                )));
            }
            let gap = ((CONCAT_BRIDGE_S / dt).round() as usize).saturating_sub(1);
            let mut speed = Vec::new();
            let mut grade = Vec::new();
            for (k, c) in sources.iter().enumerate() {
                if k > 0 {
                    speed.extend(std::iter::repeat_n(0.0, gap));
                    grade.extend(std::iter::repeat_n(0.0, gap));
                }
                speed.extend_from_slice(&c.speed);
                grade.extend_from_slice(&c.grade);
            }
            let name = sources.iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join("+");
            DriveCycle::new(name, dt, speed, grade)
        }
        GenMode::Crop => {
            let src = single()?;
            let [start, end] = spec
                .crop_window
                .ok_or_else(|| Error::Validation("crop mode needs crop_window".into()))?;
            if !(start >= 0.0 && end > start && end <= src.duration() + 1e-9) {
                return Err(Error::Validation(format!(
                    "crop window [{start}, {end}] not inside [0, {}]",
                    src.duration()
                )));
            }
            let i0 = (start / src.dt).round() as usize;
            let i1 = ((end / src.dt).round() as usize).min(src.len() - 1);
            if i1 <= i0 {
                return Err(Error::Validation("crop window shorter than one step".into()));
            }
            let mut speed = src.speed[i0..=i1].to_vec();
            let mut grade = src.grade[i0..=i1].to_vec();
            if speed[0] > 0.0 {
                speed.insert(0, 0.0);
                grade.insert(0, grade[0]);
            }
            let name = format!("{}[{start}-{end}]", src.name);
            DriveCycle::new(name, src.dt, speed, grade)
        }
    }
}
