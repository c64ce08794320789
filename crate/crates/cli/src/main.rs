use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use emslab::cycle::{cycle_stats, generate_cycle, GeneratorSpec};
use emslab::env::RewardParams;
use emslab::harness::{self, compare_plotdata, load_experiment, load_policy, resolve_cycle, resolve_vehicle, LoadedTrace};
use emslab::par::Exec;
use emslab::{Error, Result};

#[derive(Parser)]
#[command(name = "emslab", version, about = "HEV energy-management experiments: simulate, train, evaluate, transfer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect or synthesise drive cycles.
    #[command(subcommand)]
    Cycle(CycleCmd),
    /// Train a DDPG agent from an experiment config.
    Train(TrainArgs),
    /// Greedy evaluation of a checkpoint (or the rule-based baseline) on one cycle.
    Eval(EvalArgs),
    /// Evaluate a checkpoint and the rule-based baseline across several cycles.
    Transfer(TransferArgs),
    /// Align exported traces into one plot-ready CSV.
    Compare(CompareArgs),
}

#[derive(Subcommand)]
enum CycleCmd {
    /// Print summary statistics as JSON.
    Stats {
        /// Cycle CSV or `bundled:<name>`.
        file: String,
    },
    /// Generate a synthetic cycle from bundled or on-disk cycles.
    Gen(GenArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Source cycles (CSV paths or `bundled:<name>`), comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    sources: Vec<String>,
    /// Noise standard deviation in m/s (noise mode).
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    /// Crop window start in seconds.
    #[arg(long)]
    start: Option<f64>,
    /// Crop window end in seconds.
    #[arg(long)]
    end: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Noise,
    Concat,
    Crop,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(short = 'c', long = "config")]
    config: PathBuf,
    /// Overrides the seed in the config file.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    exec: ExecArgs,
}

#[derive(Args)]
struct ExecArgs {
    /// Run the data-parallel loops on one thread.
    #[arg(long)]
    sequential: bool,
}

impl ExecArgs {
    fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::default()
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Rl,
    RuleBased,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint JSON. Optional for `--strategy rule-based`.
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// Vehicle TOML or `bundled:<name>`; defaults to the checkpoint's vehicle.
    #[arg(long)]
    vehicle: Option<String>,
    #[arg(long)]
    cycle: String,
    #[arg(long, value_enum, default_value = "rl")]
    strategy: StrategyArg,
    /// Output directory for `<stem>.csv` and `<stem>.json`.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// File stem; defaults to `<strategy>_<cycle>`.
    #[arg(long)]
    stem: Option<String>,
}

#[derive(Args)]
struct TransferArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    cycles: Vec<String>,
    #[arg(long)]
    vehicle: Option<String>,
    /// Output directory for `results.csv` and `results.txt`.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[command(flatten)]
    exec: ExecArgs,
}

#[derive(Args)]
struct CompareArgs {
    /// Trace CSVs written by `eval`, each with its `.json` sidecar.
    #[arg(long, value_delimiter = ',', required = true)]
    traces: Vec<PathBuf>,
    /// Column labels, one per trace; defaults to the file stems.
    #[arg(long, value_delimiter = ',')]
    labels: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Cycle(CycleCmd::Stats { file }) => {
            let cycle = resolve_cycle(&file, Path::new("."))?;
            println!("{}", serde_json::to_string_pretty(&cycle_stats(&cycle))?);
            Ok(())
        }
        Command::Cycle(CycleCmd::Gen(a)) => cycle_gen(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Transfer(a) => transfer(a),
        Command::Compare(a) => compare(a),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn cycle_gen(a: GenArgs) -> Result<()> {
    let mut library = BTreeMap::new();
    for s in &a.sources {
        library.insert(s.clone(), resolve_cycle(s, Path::new("."))?);
    }
    let spec = match a.mode {
        ModeArg::Noise => GeneratorSpec::noise(a.sources[0].clone(), a.sigma, a.seed),
        ModeArg::Concat => GeneratorSpec {
            seed: a.seed,
            ..GeneratorSpec::concat(a.sources.clone())
        },
        ModeArg::Crop => {
            let (Some(start), Some(end)) = (a.start, a.end) else {
                return Err(Error::Argument("crop mode needs --start and --end".into()));
            };
            GeneratorSpec {
                seed: a.seed,
                ..GeneratorSpec::crop(a.sources[0].clone(), start, end)
            }
        }
    };
    // Extra sources are kept so that single-source modes reject them.
    let spec = GeneratorSpec { sources: a.sources, ..spec };
    let name = a.out.file_stem().and_then(|s| s.to_str()).unwrap_or("generated");
    let cycle = generate_cycle(&spec, &library)?.with_name(name);
    write(&a.out, &cycle.to_csv())?;
    println!("{}", serde_json::to_string_pretty(&cycle_stats(&cycle))?);
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let exp = load_experiment(&a.config, a.seed)?;
    let outcome = harness::cmd_train(&exp, a.exec.exec())?;
    for entry in &outcome.log {
        println!(
            "episode {:>3}  return {:>12.2}  energy {:>8.4} kWh  misses {:>4}  | greedy return {:>12.2}  energy {:>8.4} kWh  misses {:>4}",
            entry.episode,
            entry.ret,
            entry.total_energy_kwh,
            entry.speed_miss_steps,
            entry.eval_return,
            entry.eval_total_energy_kwh,
            entry.eval_speed_miss_steps
        );
    }
    if !exp.eval_cycles.is_empty() {
        let table = harness::transfer(&outcome.agent, &exp.vehicle, &exp.eval_cycles, exp.config.reward, a.exec.exec())?;
        write(&exp.output_dir.join("results.csv"), &table.to_csv())?;
        write(&exp.output_dir.join("results.txt"), &table.to_text())?;
        print!("\n{}", table.to_text());
    }
    println!("checkpoint: {}", outcome.checkpoint.display());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let base = Path::new(".");
    let cycle = resolve_cycle(&a.cycle, base)?;
    let policy = a.ckpt.as_ref().map(load_policy).transpose()?;
    let vehicle = match (&a.vehicle, policy.as_ref().and_then(|p| p.vehicle.clone())) {
        (Some(v), _) => resolve_vehicle(v, base)?,
        (None, Some(v)) => v,
        (None, None) => return Err(Error::Argument("no --vehicle given and the checkpoint records none".into())),
    };
    let reward = policy.as_ref().map_or(RewardParams::default(), |p| p.reward);
    let evaluation = match a.strategy {
        StrategyArg::Rl => {
            let p = policy.as_ref().ok_or_else(|| Error::Argument("--ckpt is required for the rl strategy".into()))?;
            harness::evaluate_agent(&p.agent, &vehicle, &cycle, reward)?
        }
        StrategyArg::RuleBased => harness::evaluate_rule_based(&vehicle, &cycle, reward)?,
    };
    let stem = a.stem.unwrap_or_else(|| format!("{}_{}", evaluation.summary.strategy, cycle.name()));
    evaluation.write(&a.out, &stem)?;
    print!("{}", evaluation.summary_json());
    Ok(())
}

fn transfer(a: TransferArgs) -> Result<()> {
    let base = Path::new(".");
    let policy = load_policy(&a.ckpt)?;
    let vehicle = match (&a.vehicle, policy.vehicle) {
        (Some(v), _) => resolve_vehicle(v, base)?,
        (None, Some(v)) => v,
        (None, None) => return Err(Error::Argument("no --vehicle given and the checkpoint records none".into())),
    };
    let cycles = a.cycles.iter().map(|c| resolve_cycle(c, base)).collect::<Result<Vec<_>>>()?;
    let table = harness::transfer(&policy.agent, &vehicle, &cycles, policy.reward, a.exec.exec())?;
    write(&a.out.join("results.csv"), &table.to_csv())?;
    write(&a.out.join("results.txt"), &table.to_text())?;
    print!("{}", table.to_text());
    Ok(())
}

fn compare(a: CompareArgs) -> Result<()> {
    if !a.labels.is_empty() && a.labels.len() != a.traces.len() {
        return Err(Error::Argument(format!("{} labels for {} traces", a.labels.len(), a.traces.len())));
    }
    let traces = a
        .traces
        .iter()
        .enumerate()
        .map(|(i, p)| LoadedTrace::load(p, a.labels.get(i).map(String::as_str)))
        .collect::<Result<Vec<_>>>()?;
    write(&a.out, &compare_plotdata(&traces)?)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emslab(args: &[&str]) -> Result<()> {
        let cli = Cli::try_parse_from(std::iter::once("emslab").chain(args.iter().copied())).expect("arguments parse");
        run(cli.command)
    }

    fn p(path: &Path) -> &str {
        path.to_str().unwrap()
    }

    fn write_experiment(dir: &Path) -> PathBuf {
        let cfg = r#"
vehicle_path = "bundled:prius_prime"
train_cycle = "short.csv"
eval_cycles = ["short.csv", "bundled:hwfet"]
episodes = 1
seed = 4
output_dir = "run"

[agent]
actor_hidden = [16, 16]
critic_hidden = [16, 16, 8]
batch_size = 8
buffer_capacity = 256
"#;
        let out = dir.join("short.csv");
        emslab(&["cycle", "gen", "--mode", "crop", "--sources", "bundled:udds", "--start", "0", "--end", "40", "--out", p(&out)]).unwrap();
        let path = dir.join("exp.toml");
        std::fs::write(&path, cfg).unwrap();
        path
    }

    #[test]
    fn cycle_gen_is_seeded_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let gen = |seed: &str, out: &str| {
            emslab(&["cycle", "gen", "--mode", "noise", "--sources", "bundled:nedc", "--seed", seed, "--out", p(&d.join(out))]).unwrap();
            std::fs::read(d.join(out)).unwrap()
        };
        let a = gen("3", "a.csv");
        assert_eq!(a, gen("3", "b.csv"));
        assert_ne!(a, gen("4", "c.csv"));
        assert!(String::from_utf8(a).unwrap().starts_with("time_s,speed_mps,grade\n"));

        let joined = d.join("joined.csv");
        emslab(&["cycle", "gen", "--mode", "concat", "--sources", "bundled:nedc,bundled:hwfet", "--out", p(&joined)]).unwrap();
        let c = resolve_cycle(p(&joined), d).unwrap();
        let parts = resolve_cycle("bundled:nedc", d).unwrap().duration() + resolve_cycle("bundled:hwfet", d).unwrap().duration();
        assert!(c.duration() > parts, "idle bridge between the sources");
        emslab(&["cycle", "stats", p(&joined)]).unwrap();
    }

    #[test]
    fn cycle_gen_rejects_bad_requests() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("x.csv");
        let no_window = emslab(&["cycle", "gen", "--mode", "crop", "--sources", "bundled:udds", "--out", p(&out)]).unwrap_err();
        assert_eq!((no_window.category(), no_window.exit_code()), ("argument", 5));
        let extra = emslab(&["cycle", "gen", "--mode", "noise", "--sources", "bundled:udds,bundled:us06", "--out", p(&out)]).unwrap_err();
        assert_eq!(extra.exit_code(), 5);
        let unknown = emslab(&["cycle", "stats", "bundled:nope"]).unwrap_err();
        assert_eq!(unknown.category(), "lookup");
        assert!(!out.exists());
    }

    #[test]
    fn train_eval_transfer_compare() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let cfg = write_experiment(d);
        emslab(&["train", "-c", p(&cfg), "--sequential"]).unwrap();
        let ckpt = d.join("run/checkpoint.json");
        assert!(ckpt.exists() && d.join("run/train_log.jsonl").exists());
        let results = std::fs::read_to_string(d.join("run/results.csv")).unwrap();
        assert_eq!(results.lines().count(), 5);

        let ev = d.join("ev");
        let short = d.join("short.csv");
        emslab(&["eval", "--ckpt", p(&ckpt), "--cycle", p(&short), "--out", p(&ev)]).unwrap();
        emslab(&["eval", "--vehicle", "bundled:prius_prime", "--cycle", p(&short), "--strategy", "rule-based", "--out", p(&ev), "--stem", "rb"]).unwrap();
        let rl_csv = ev.join("rl_short.csv");
        assert!(rl_csv.exists() && ev.join("rl_short.json").exists() && ev.join("rb.json").exists());

        let tr = d.join("tr");
        emslab(&["transfer", "--ckpt", p(&ckpt), "--cycles", &format!("{},bundled:us06", p(&short)), "--out", p(&tr)]).unwrap();
        let table = std::fs::read_to_string(tr.join("results.txt")).unwrap();
        assert!(table.contains("us06") && table.contains("rule-based"));

        let out = d.join("cmp.csv");
        emslab(&["compare", "--traces", &format!("{},{}", p(&rl_csv), p(&ev.join("rb.csv"))), "--labels", "rl,rb", "--out", p(&out)]).unwrap();
        let header = std::fs::read_to_string(&out).unwrap().lines().next().unwrap().to_string();
        assert_eq!(header, "t,v_target,energy_kwh_rl,energy_kwh_rb,speed_diff_rl,speed_diff_rb");
        let labels = emslab(&["compare", "--traces", p(&rl_csv), "--labels", "a,b", "--out", p(&out)]).unwrap_err();
        assert_eq!(labels.category(), "argument");
    }

    #[test]
    fn error_categories_and_exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let missing = emslab(&["eval", "--ckpt", p(&d.join("none.json")), "--cycle", "bundled:udds"]).unwrap_err();
        assert_eq!((missing.category(), missing.exit_code()), ("io", 3));

        let bad = d.join("bad.csv");
        std::fs::write(&bad, "time_s,speed_mps,grade\n0,0,0\n1,oops,0\n").unwrap();
        let parse = emslab(&["cycle", "stats", p(&bad)]).unwrap_err();
        assert_eq!(parse.exit_code(), 4);
        assert!(parse.to_string().contains('3'), "{parse}");

        let no_vehicle = emslab(&["eval", "--strategy", "rule-based", "--cycle", "bundled:udds"]).unwrap_err();
        assert_eq!(no_vehicle.category(), "argument");

        let cfg = write_experiment(d);
        emslab(&["train", "-c", p(&cfg)]).unwrap();
        let ckpt = d.join("run/checkpoint.json");
        let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&ckpt).unwrap()).unwrap();
        v["critic"]["params"].as_array_mut().unwrap().pop();
        std::fs::write(&ckpt, v.to_string()).unwrap();
        let shape = emslab(&["eval", "--ckpt", p(&ckpt), "--cycle", "bundled:udds"]).unwrap_err();
        assert_eq!((shape.category(), shape.exit_code()), ("shape", 6));

        assert!(Cli::try_parse_from(["emslab", "eval", "--ckpt", "x.json"]).is_err());
        assert!(Cli::try_parse_from(["emslab", "cycle", "gen", "--mode", "shuffle", "--sources", "a", "--out", "b"]).is_err());
    }
}
