use std::fs;

use chaplygin::gamma::energy_report;
use chaplygin::flow::EosSpec;
use chaplygin::harness::initial::make_initial_data;
use chaplygin::harness::io::{
    load_checkpoint, read_norms_csv, read_sweep_file, save_checkpoint, write_norms_csv, GridInfo, Manifest, SweepCsvWriter,
    CHECKPOINT_MAGIC, NORMS_HEADER, SWEEP_HEADER,
};
use chaplygin::harness::{fit_powerlaw, run_scenario, run_sweep, Preset, ScenarioConfig, SweepParam, SweepRecord};

fn record(v: f64, t: Option<f64>) -> SweepRecord {
    SweepRecord {
        param_name: SweepParam::Eps,
        param_value: v,
        t_break: t,
        reason: if t.is_some() { "vacuum".into() } else { "no_breakdown_in_window".into() },
        measured_eps: v * 1.001,
        measured_delta: 0.0,
        wall_time_s: 0.0,
    }
}

#[test]
fn sweep_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let records = vec![record(0.4, Some(6.25)), record(0.2, None), record(0.1, Some(100.0))];
    let mut w = SweepCsvWriter::create(&path).unwrap();
    for r in &records {
        w.write(r).unwrap();
    }
    drop(w);
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), SWEEP_HEADER.join(","));
    assert_eq!(lines.next().unwrap(), "eps,0.4,6.25,vacuum,0.4004,0,0");
    assert!(lines.next().unwrap().starts_with("eps,0.2,none,no_breakdown_in_window,"));
    assert_eq!(read_sweep_file(&path).unwrap(), records);
}

#[test]
fn fit_recovers_exponents() {
    let inv: Vec<_> = [0.04, 0.02, 0.01].iter().map(|&d| record(d, Some(0.5 / d))).collect();
    assert!((fit_powerlaw(&inv).unwrap().slope + 1.0).abs() < 1e-12);
    let sq: Vec<_> = [0.4, 0.28, 0.2, 0.14].iter().map(|&e| record(e, Some(1.0 / (e * e)))).collect();
    let f = fit_powerlaw(&sq).unwrap();
    assert!((f.slope + 2.0).abs() < 1e-12 && f.points == 4);
    assert!(fit_powerlaw(&[]).is_err());
}

#[test]
fn norms_table_round_trip() {
    let mut cfg = Preset::Smoke.config();
    cfg.data.delta_target = 0.01;
    let data = make_initial_data(&cfg).unwrap();
    let report = energy_report(&data.state, &cfg.eos, 2).unwrap();
    let mut buf = Vec::new();
    write_norms_csv(&mut buf, &[report.clone(), report.clone()]).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(text.lines().next().unwrap(), NORMS_HEADER.join(","));
    let rows = read_norms_csv(buf.as_slice()).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], report.t);
    assert_eq!(rows[0][1], report.energy[0]);
    assert_eq!(rows[0][14], report.ghost_flux);
}

#[test]
fn checkpoint_layout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.chk");
    let mut cfg = Preset::Smoke.config();
    cfg.grid.n = 32;
    let state = make_initial_data(&cfg).unwrap().state;
    save_checkpoint(&path, &state).unwrap();
    let bytes = fs::read(&path).unwrap();
    assert_eq!(bytes.len(), 5 + 4 + 8 + 8 + 3 * 8 * 32 * 32);
    assert_eq!(&bytes[..5], CHECKPOINT_MAGIC);
    assert_eq!(u32::from_le_bytes(bytes[5..9].try_into().unwrap()), 32);
    assert_eq!(f64::from_le_bytes(bytes[9..17].try_into().unwrap()), 8.0);
    assert_eq!(f64::from_le_bytes(bytes[17..25].try_into().unwrap()), 0.0);
    // u₁ at (i, j) = (3, 5)
    let at = 25 + 8 * 32 * 32 + 8 * (5 * 32 + 3);
    assert_eq!(f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()), state.u.c1.at(3, 5));
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back.sigma.values(), state.sigma.values());
    assert_eq!(back.u.c2.values(), state.u.c2.values());
}

#[test]
fn scenario_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = Preset::Smoke.config();
    cfg.diagnostics.checkpoint_every = Some(0.5);
    let out = run_scenario(&cfg, "smoke", Some(dir.path())).unwrap();
    assert!((out.summary.t_end - 1.0).abs() < 1e-12);
    let norms = fs::read(dir.path().join("smoke_norms.csv")).unwrap();
    assert_eq!(read_norms_csv(norms.as_slice()).unwrap().len(), out.run.reports.len());
    let mut chk: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".chk"))
        .collect();
    chk.sort();
    assert_eq!(chk, ["smoke_t00000.5000.chk", "smoke_t00001.0000.chk"]);
    let last = load_checkpoint(&dir.path().join(&chk[1])).unwrap();
    assert!((last.t - 1.0).abs() < 1e-12);

    let manifest = Manifest {
        tool: "chaplygin".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        grid: GridInfo::from(&cfg.grid().unwrap()),
        seed: cfg.seed,
        started_at: "2026-01-01T00:00:00.000Z".into(),
        finished_at: "2026-01-01T00:00:01.000Z".into(),
        runs: vec![out.summary.clone()],
    };
    let path = dir.path().join("manifest.json");
    manifest.write(&path).unwrap();
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(json["grid"]["n"], 64);
    assert_eq!(json["runs"][0]["label"], "smoke");
    let back = Manifest::read(&path).unwrap();
    assert_eq!(back.runs[0].steps, out.summary.steps);
    assert_eq!(back.config, cfg);
}

#[test]
fn sweep_reports_in_input_order() {
    let cfg = Preset::Smoke.config();
    let mut seen = Vec::new();
    let runs = run_sweep(&cfg, SweepParam::Delta, &[0.02, 0.015, 0.01], 2, None, |r| {
        seen.push(r.record.param_value);
        Ok(())
    })
    .unwrap();
    assert_eq!(seen, [0.02, 0.015, 0.01]);
    for r in &runs {
        assert!((r.record.measured_delta - r.record.param_value).abs() <= 0.01 * r.record.param_value, "{:?}", r.record);
        assert_eq!(r.record.wall_time_s, 0.0);
    }
}

#[test]
fn presets_meet_targets_on_full_grid() {
    for p in [Preset::ChaplyginDelta, Preset::PolytropicEps] {
        let cfg = p.config();
        let d = make_initial_data(&cfg).unwrap();
        assert!((d.measured.eps - cfg.data.eps_target).abs() <= 0.01 * cfg.data.eps_target, "{}: {:?}", p.name(), d.measured);
        if cfg.data.delta_target > 0.0 {
            assert!((d.measured.delta - cfg.data.delta_target).abs() <= 0.01 * cfg.data.delta_target);
            assert!(d.measured.delta <= 1.05 * cfg.data.eps_target.powf(8.0 / 7.0));
        } else {
            assert_eq!(d.measured.delta, 0.0);
        }
    }
}

#[test]
fn overrides_and_regime_guard() {
    let cfg = ScenarioConfig::preset_with_overrides(Preset::ChaplyginDelta, "[data]\ndelta_target = 0.02\n").unwrap();
    assert_eq!(cfg.data.delta_target, 0.02);
    assert_eq!(cfg.grid.n, 512);
    assert_eq!(cfg.eos, EosSpec::chaplygin());
    // δ may not exceed ε
    assert!(ScenarioConfig::preset_with_overrides(Preset::ChaplyginDelta, "[data]\ndelta_target = 0.2\n").is_err());
    let text = cfg.to_toml_string();
    assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), cfg);
}
