//! On-disk formats: cycle CSV, vehicle TOML, trace CSV plus JSON sidecar.

use emslab::cycle::{cycle_stats, load_cycle};
use emslab::sim::{run_cycle, RuleBased, TraceTotals};
use emslab::vehicle::load_vehicle;
use emslab::bundled;

#[test]
fn bundled_cycles_survive_a_disk_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for name in bundled::cycle_names() {
        let c = bundled::cycle(name).unwrap();
        let path = dir.path().join(format!("{name}.csv"));
        c.save(&path).unwrap();
        let back = load_cycle(&path).unwrap();
        assert_eq!(back.speed(), c.speed());
        assert_eq!(back.grade(), c.grade());
        assert_eq!(back.name(), name);
        let s = cycle_stats(&back);
        let dist: f64 = back.speed().iter().map(|v| v * back.dt()).sum();
        assert!((s.distance_m - dist).abs() <= 1e-9 * dist);
        assert!((0.0..=1.0).contains(&s.idle_fraction));
    }
}

#[test]
fn vehicle_file_loads_like_the_bundled_copy() {
    let dir = tempfile::tempdir().unwrap();
    for name in bundled::vehicle_names() {
        let path = dir.path().join(format!("{name}.toml"));
        std::fs::write(&path, bundled::vehicle_toml(name).unwrap()).unwrap();
        assert_eq!(load_vehicle(&path).unwrap(), bundled::vehicle(name).unwrap());
    }
}

#[test]
fn trace_export_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let v = bundled::vehicle("bmw_i3_rex").unwrap();
    let c = bundled::cycle("hwfet").unwrap();
    let t = run_cycle(&v, &c, &mut RuleBased::default());
    t.export(dir.path(), "hw").unwrap();

    let csv_text = std::fs::read_to_string(dir.path().join("hw.csv")).unwrap();
    let mut lines = csv_text.lines();
    assert_eq!(lines.next().unwrap(), "t,v_target,v_achieved,p_req,p_ice,p_batt,soc,fuel_kwh_cum");
    assert_eq!(lines.count(), c.len() - 1);

    let totals: TraceTotals = serde_json::from_str(&std::fs::read_to_string(dir.path().join("hw.json")).unwrap()).unwrap();
    assert_eq!(totals, t.totals);
    let identity = totals.fuel_kwh + (totals.soc_initial - totals.final_soc) * totals.capacity_kwh;
    assert!((totals.total_energy_kwh - identity).abs() <= 1e-9 * totals.total_energy_kwh);
}
