//! Train, evaluate, transfer and compare through the library entry points.

use std::path::Path;

use emslab::cycle::DriveCycle;
use emslab::env::RewardParams;
use emslab::harness::{self, compare_plotdata, load_experiment, load_policy, EpisodeLog, LoadedTrace, ResultTable};
use emslab::par::Exec;
use emslab::sim::{run_cycle, RuleBased};
use emslab::{bundled, Error};

fn write_config(dir: &Path, episodes: usize) -> std::path::PathBuf {
    let cycle = DriveCycle::flat("short", 1.0, vec![0.0, 3.0, 7.0, 11.0, 14.0, 15.0, 15.0, 13.0, 9.0, 5.0, 2.0, 0.0, 0.0, 4.0, 8.0, 8.0, 5.0, 0.0]).unwrap();
    cycle.save(dir.join("short.csv")).unwrap();
    let cfg = format!(
        r#"
vehicle_path = "bundled:prius_prime"
train_cycle = "short.csv"
eval_cycles = ["short.csv", "bundled:hwfet"]
episodes = {episodes}
seed = 21
output_dir = "run"

[agent]
actor_hidden = [16, 16]
critic_hidden = [16, 16, 8]
batch_size = 8
buffer_capacity = 256
"#
    );
    let path = dir.join("exp.toml");
    std::fs::write(&path, cfg).unwrap();
    path
}

fn read_log(path: &Path) -> Vec<EpisodeLog> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn one_episode_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let exp = load_experiment(write_config(dir.path(), 1), None).unwrap();
    let out = harness::cmd_train(&exp, Exec::Sequential).unwrap();
    assert_eq!(read_log(&out.log_path).len(), 1);
    assert!(dir.path().join("run/checkpoints/episode_001.json").exists());

    let policy = load_policy(&out.checkpoint).unwrap();
    assert_eq!(policy.agent.clone().with_exec(Exec::Sequential), out.agent);
    let vehicle = policy.vehicle.clone().unwrap();
    let a = harness::evaluate_agent(&policy.agent, &vehicle, &exp.train_cycle, policy.reward).unwrap();
    let b = harness::evaluate_agent(&policy.agent, &vehicle, &exp.train_cycle, policy.reward).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.trace.steps.len(), exp.train_cycle.len() - 1);
}

#[test]
fn same_seed_same_log_and_checkpoint_bytes() {
    let run = |exec| {
        let dir = tempfile::tempdir().unwrap();
        let exp = load_experiment(write_config(dir.path(), 3), None).unwrap();
        let out = harness::cmd_train(&exp, exec).unwrap();
        (std::fs::read(&out.log_path).unwrap(), std::fs::read(&out.checkpoint).unwrap())
    };
    let a = run(Exec::Sequential);
    assert_eq!(a, run(Exec::Sequential));
    assert_eq!(a, run(Exec::Parallel));
}

#[test]
fn seed_override_changes_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), 2);
    let base = harness::cmd_train(&load_experiment(&path, None).unwrap(), Exec::Sequential).unwrap();
    let other = harness::cmd_train(&load_experiment(&path, Some(99)).unwrap(), Exec::Sequential).unwrap();
    assert_ne!(base.log, other.log);
}

#[test]
fn rule_based_evaluation_is_run_cycle() {
    let v = bundled::vehicle("chevy_volt").unwrap();
    let c = bundled::cycle("udds").unwrap();
    let e = harness::evaluate_rule_based(&v, &c, RewardParams::default()).unwrap();
    assert_eq!(e.trace, run_cycle(&v, &c, &mut RuleBased::default()));
}

#[test]
fn transfer_table_shape_and_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let exp = load_experiment(write_config(dir.path(), 1), None).unwrap();
    let out = harness::cmd_train(&exp, Exec::Sequential).unwrap();
    let cycles: Vec<DriveCycle> = ["udds", "us06", "nedc"].iter().map(|n| bundled::cycle(n).unwrap()).collect();
    let t1 = harness::transfer(&out.agent, &exp.vehicle, &cycles, exp.config.reward, Exec::Parallel).unwrap();
    let t2 = harness::transfer(&out.agent, &exp.vehicle, &cycles, exp.config.reward, Exec::Sequential).unwrap();
    assert_eq!(t1.rows.len(), 6);
    assert_eq!(t1, t2);
    for c in ["udds", "us06", "nedc"] {
        let rb = t1.get("rule-based", c).unwrap();
        let direct = run_cycle(&exp.vehicle, &bundled::cycle(c).unwrap(), &mut RuleBased::default());
        assert_eq!(rb.total_energy_kwh, direct.totals.total_energy_kwh);
        assert!(t1.get("rl", c).is_some());
    }
    assert_eq!(ResultTable::from_csv(&t1.to_csv()).unwrap(), t1);
    let text = t1.to_text();
    assert!(text.contains("rule-based") && text.contains("RL-based") && text.contains("us06"));
}

#[test]
fn compare_aligns_traces_and_rejects_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let v = bundled::vehicle("prius_prime").unwrap();
    let c = bundled::cycle("nedc").unwrap();
    let e = harness::evaluate_rule_based(&v, &c, RewardParams::default()).unwrap();
    e.write(dir.path(), "a").unwrap();
    e.write(dir.path(), "b").unwrap();
    let a = LoadedTrace::load(dir.path().join("a.csv"), None).unwrap();
    let b = LoadedTrace::load(dir.path().join("b.csv"), None).unwrap();

    let out = compare_plotdata(&[a.clone(), b]).unwrap();
    let mut rdr = csv::Reader::from_reader(out.as_bytes());
    let header = rdr.headers().unwrap().clone();
    assert_eq!(header.iter().collect::<Vec<_>>(), ["t", "v_target", "energy_kwh_a", "energy_kwh_b", "speed_diff_a", "speed_diff_b"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), c.len() - 1);
    for r in &rows {
        assert_eq!(r[4].parse::<f64>().unwrap(), 0.0);
    }
    let last: f64 = rows.last().unwrap()[2].parse().unwrap();
    let total = e.summary.totals.total_energy_kwh;
    assert!((last - total).abs() <= 1e-9 * total);

    let other = harness::evaluate_rule_based(&v, &bundled::cycle("udds").unwrap(), RewardParams::default()).unwrap();
    other.write(dir.path(), "c").unwrap();
    let c_trace = LoadedTrace::load(dir.path().join("c.csv"), None).unwrap();
    assert!(matches!(compare_plotdata(&[a, c_trace]), Err(Error::Argument(_))));
}
