use starris_bench::config::Scheme;
use starris_bench::plan::{Pipeline, RunPlan, SeedSetup};
use starris_bench::plot::{plot, reward_series, sweep_series, Figure};
use starris_bench::records::{self, episodes_to_reach, summarize, ResultRecord, CSV_COLUMNS};
use starris_bench::run::sweep;
use starris_bench::{BenchError, ExperimentConfig};

use starris_core::model::{EhModel, Side, SurfaceMode};

const MANIFEST: &str = env!("CARGO_MANIFEST_DIR");

fn repo_config(name: &str) -> std::path::PathBuf {
    std::path::Path::new(MANIFEST).join("../../configs").join(name)
}

#[test]
fn presets_round_trip_through_toml() {
    for full in [false, true] {
        let c = ExperimentConfig::preset(full);
        c.validate().unwrap();
        let back = ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
    }
}

#[test]
fn shipped_configs_equal_the_presets() {
    assert_eq!(ExperimentConfig::load(&repo_config("desk.toml")).unwrap(), ExperimentConfig::desk());
    assert_eq!(ExperimentConfig::load(&repo_config("full.toml")).unwrap(), ExperimentConfig::table_one());
}

#[test]
fn table_constants_are_required() {
    let text = ExperimentConfig::desk().to_toml_string();
    for key in ["p_i_max_dbm", "zeta", "delta2_dbm"] {
        let cut: String = text.lines().filter(|l| !l.starts_with(&format!("{key} ="))).map(|l| format!("{l}\n")).collect();
        match ExperimentConfig::from_toml_str(&cut) {
            Err(BenchError::Config(m)) => assert!(m.contains(key), "{m}"),
            other => panic!("missing {key} accepted: {other:?}"),
        }
    }
    let cut: String = text.lines().filter(|l| !l.starts_with("m_sat =")).map(|l| format!("{l}\n")).collect();
    assert!(matches!(ExperimentConfig::from_toml_str(&cut), Err(BenchError::Config(m)) if m.contains("m_sat")));
}

#[test]
fn unknown_keys_are_rejected() {
    let text = ExperimentConfig::desk().to_toml_string().replace("[eh]\n", "[eh]\nefficiency = 0.3\n");
    assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(BenchError::Config(_))));
    let c = ExperimentConfig::desk();
    assert!(matches!(c.with_overrides(&["system.nonsense=1"]), Err(BenchError::Config(_))));
    assert!(matches!(c.with_overrides(&["no_equals_sign"]), Err(BenchError::Config(_))));
    assert!(matches!(c.with_value("agent.not_there", 1.0), Err(BenchError::Config(_))));
}

#[test]
fn overrides_reach_nested_keys() {
    let c = ExperimentConfig::desk()
        .with_overrides(&["system.e_min_w=2.5e-15", "system.a_max=2", "agent.hidden=[8, 8]", "scheme=\"baseline4\""])
        .unwrap();
    assert_eq!(c.system.e_min_w, 2.5e-15);
    assert_eq!(c.system.a_max, 2.0);
    assert_eq!(c.agent.hidden, vec![8, 8]);
    assert_eq!(c.scheme, Scheme::Baseline4);
    let v = ExperimentConfig::desk().with_value("system.gamma_min", 2.0).unwrap();
    assert_eq!(v.system.gamma_min, 2.0);
    let e = ExperimentConfig::desk().with_value("episodes", 7.0).unwrap();
    assert_eq!(e.episodes, 7);
    assert!(ExperimentConfig::desk().with_value("episodes", 7.5).is_err());
}

#[test]
fn invalid_values_are_configuration_errors() {
    let c = ExperimentConfig::desk();
    for o in ["eh.mu=1.5", "convex.baseline_rho=1.0", "seeds=[]", "version=2", "convex.margin=-0.1", "agent.init_log_std=5.0"] {
        let e = c.with_overrides(&[o]).unwrap_err();
        assert_eq!(e.exit_code(), 2, "{o}: {e}");
    }
}

fn differing_fields(a: &RunPlan, b: &RunPlan) -> Vec<String> {
    let (a, b) = (serde_json::to_value(a).unwrap(), serde_json::to_value(b).unwrap());
    let (a, b) = (a.as_object().unwrap(), b.as_object().unwrap());
    a.keys().filter(|k| a[*k] != b[*k]).cloned().collect()
}

#[test]
fn each_baseline_changes_exactly_one_thing() {
    let c = ExperimentConfig::desk();
    let base = RunPlan::new(Scheme::Scheme2, &c);
    assert_eq!(base.pipeline, Pipeline::MetaAdapt);
    let expect = [
        (Scheme::Scheme1, "pipeline"),
        (Scheme::Baseline1, "eh"),
        (Scheme::Baseline2, "fixed_rho"),
        (Scheme::Baseline3, "random_phases"),
        (Scheme::Baseline4, "surface"),
    ];
    for (s, field) in expect {
        assert_eq!(differing_fields(&base, &RunPlan::new(s, &c)), vec![field.to_string()], "{s}");
    }
    assert_eq!(RunPlan::new(Scheme::Baseline1, &c).eh, EhModel::Linear { efficiency: c.eh.mu });
    assert_eq!(RunPlan::new(Scheme::Baseline2, &c).fixed_rho, Some(0.5));
    assert_eq!(RunPlan::new(Scheme::Baseline4, &c).surface, SurfaceMode::Passive);
}

#[test]
fn seed_setup_is_deterministic_and_keeps_tasks_apart() {
    let c = ExperimentConfig::desk();
    let a = SeedSetup::new(&c, 4);
    assert_eq!(a, SeedSetup::new(&c, 4));
    assert_ne!(a, SeedSetup::new(&c, 5));
    assert_eq!(a.meta_tasks.len(), c.meta.tasks);
    assert!(a.meta_tasks.iter().all(|t| t.placement_seed != a.eval_task.placement_seed));
    assert_eq!(a.phases.0.len(), c.system.m_elements);
    assert!(a.phases.0.iter().chain(&a.phases.1).all(|p| (0.0..std::f64::consts::TAU).contains(p)));
}

fn rec(scheme: &str, seed: u64, episode: usize, reward: f64) -> ResultRecord {
    ResultRecord {
        scheme: scheme.into(),
        sweep_param: String::new(),
        sweep_value: None,
        seed,
        episode,
        mean_reward: reward,
        mean_ee_bits_per_hz_per_watt: 2.0 * reward,
        violation_rate: 0.25,
        wallclock_s: 1.5,
    }
}

#[test]
fn one_record_gives_header_and_one_row() {
    let csv = records::to_csv(&[rec("scheme1", 3, 0, 0.5)]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], CSV_COLUMNS.join(","));
    assert_eq!(lines[1], "scheme1,,,3,0,0.5,1.0,0.25,1.5");
}

#[test]
fn csv_and_json_round_trip_byte_stably() {
    let mut rs: Vec<ResultRecord> = (0..5).map(|e| rec("scheme2", 1, e, 0.1 * e as f64 + 1.0 / 3.0)).collect();
    rs[2].sweep_param = "system.e_min_w".into();
    rs[2].sweep_value = Some(2.5e-15);
    let csv = records::to_csv(&rs);
    assert_eq!(records::from_csv(&csv).unwrap(), rs);
    assert_eq!(records::to_csv(&records::from_csv(&csv).unwrap()), csv);
    let json = records::to_json(&rs);
    assert_eq!(records::from_json(&json).unwrap(), rs);
    assert_eq!(records::to_json(&records::from_json(&json).unwrap()), json);
    let tampered = json.replacen("\"seed\": 1", "\"seed\": 9", 1);
    assert!(matches!(records::from_json(&tampered), Err(BenchError::Input(_))));
    assert!(records::from_csv("a,b\n1,2\n").is_err());
}

#[test]
fn digest_ignores_wallclock_only() {
    let a = vec![rec("scheme1", 0, 0, 1.0)];
    let mut b = a.clone();
    b[0].wallclock_s = 99.0;
    assert_eq!(records::digest(&a), records::digest(&b));
    b[0].mean_reward = 1.0 + 1e-12;
    assert_ne!(records::digest(&a), records::digest(&b));
}

#[test]
fn files_round_trip_by_extension() {
    let dir = tempfile::tempdir().unwrap();
    let rs = vec![rec("baseline3", 2, 0, -0.5), rec("baseline3", 2, 1, 0.5)];
    starris_bench::run::write_records(dir.path(), "r", &rs).unwrap();
    assert_eq!(records::load(&dir.path().join("r.csv")).unwrap(), rs);
    assert_eq!(records::load(&dir.path().join("r.json")).unwrap(), rs);
    assert!(matches!(records::load(&dir.path().join("missing.csv")), Err(BenchError::Io(_))));
}

#[test]
fn empty_sweep_runs_nothing() {
    let c = ExperimentConfig::desk();
    assert!(sweep(&c, &[Scheme::Scheme1], "system.e_min_w", &[], Some(1)).unwrap().is_empty());
    assert!(sweep(&c, &[Scheme::Scheme1], "system.bogus", &[1.0], Some(1)).is_err());
}

#[test]
fn summaries_use_the_first_and_last_tenth() {
    let rs: Vec<ResultRecord> = (0..20).map(|e| rec("scheme1", 0, e, e as f64)).collect();
    let s = summarize(&rs);
    assert_eq!(s.len(), 1);
    assert_eq!(s[0].episodes, 20);
    assert_eq!(s[0].first_reward, 0.5);
    assert_eq!(s[0].final_reward, 18.5);
    assert_eq!(s[0].final_ee, 37.0);
    assert_eq!(s[0].final_violation_rate, 0.25);
}

#[test]
fn reach_counts_episodes_of_the_trailing_window() {
    let r = [0.0, 1.0, 2.0, 3.0, 4.0];
    assert_eq!(episodes_to_reach(&r, 2.0, 1), Some(3));
    assert_eq!(episodes_to_reach(&r, 2.0, 3), Some(4));
    assert_eq!(episodes_to_reach(&r, 10.0, 1), None);
    assert_eq!(episodes_to_reach(&r, 0.0, 9), None);
}

#[test]
fn reward_and_sweep_series_are_labelled_per_scheme() {
    let mut rs: Vec<ResultRecord> = Vec::new();
    for s in ["scheme2", "scheme1"] {
        for seed in 0..2 {
            rs.extend((0..4).map(|e| rec(s, seed, e, e as f64 + seed as f64)));
        }
    }
    let series = reward_series(&rs, 1);
    assert_eq!(series.iter().map(|s| s.label.as_str()).collect::<Vec<_>>(), ["Proposed Scheme 1", "Proposed Scheme 2"]);
    assert_eq!(series[0].points, vec![(0.0, 0.5), (1.0, 1.5), (2.0, 2.5), (3.0, 3.5)]);

    let mut sw = Vec::new();
    for (i, v) in [1e-15, 5e-15].into_iter().enumerate() {
        for mut r in rs.clone() {
            r.sweep_param = "system.e_min_w".into();
            r.sweep_value = Some(v);
            r.mean_ee_bits_per_hz_per_watt += i as f64;
            sw.push(r);
        }
    }
    let ss = sweep_series(&sw);
    assert_eq!(ss.len(), 2);
    // final tenth of 4 episodes is the last one: EE 2·(3 + seed), median over seeds 7
    assert_eq!(ss[0].points, vec![(1e-15, 7.0), (5e-15, 8.0)]);
}

#[test]
fn plots_are_written_with_one_series_per_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let rs: Vec<ResultRecord> =
        ["scheme1", "baseline4"].iter().flat_map(|s| (0..12).map(move |e| rec(s, 0, e, (e as f64).sqrt()))).collect();
    let path = dir.path().join("fig/reward.png");
    let series = plot(&rs, Figure::Reward, &path).unwrap();
    assert_eq!(series.len(), 2);
    assert!(series.iter().any(|s| s.label == "Baseline 4 (passive)"));
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[1..4], b"PNG");
    assert!(matches!(plot(&[], Figure::Reward, &path), Err(BenchError::Input(_))));
}

fn short() -> ExperimentConfig {
    ExperimentConfig::desk()
        .with_overrides(&["episodes=3", "episode_len=3", "meta.episodes=1", "agent.batch_size=4", "agent.hidden=[8, 8]"])
        .unwrap()
}

#[test]
fn baselines_apply_their_modification_during_training() {
    let c = short();
    let b2 = starris_bench::run::run_seed(&c, Scheme::Baseline2, 1).unwrap();
    for r in b2.log.records.iter().chain(&b2.meta_log.as_ref().unwrap().records) {
        assert!(r.rho.iter().all(|&p| p == 0.5), "episode {}: {:?}", r.episode, r.rho);
    }
    let b3 = starris_bench::run::run_seed(&c, Scheme::Baseline3, 1).unwrap();
    let setup = SeedSetup::new(&c, 1);
    for r in &b3.log.records {
        let s = r.carried_surface.as_ref().unwrap();
        assert_eq!((s.phi(Side::R), s.phi(Side::T)), (&setup.phases.0[..], &setup.phases.1[..]));
    }
    let b4 = starris_bench::run::run_seed(&c, Scheme::Baseline4, 1).unwrap();
    for r in &b4.log.records {
        assert!(r.carried_surface.as_ref().unwrap().gain().iter().all(|&g| g == 1.0));
    }
    // the proposed scheme optimises ρ and moves the phases
    let s2 = starris_bench::run::run_seed(&c, Scheme::Scheme2, 1).unwrap();
    assert!(s2.log.records.iter().any(|r| r.rho.iter().any(|&p| p != 0.5)));
    assert!(s2.log.records.iter().any(|r| r.carried_surface.as_ref().unwrap().phi(Side::R) != &setup.phases.0[..]));
    assert!(s2.meta_log.is_some() && s2.meta_checkpoint.is_some());
    let s1 = starris_bench::run::run_seed(&c, Scheme::Scheme1, 1).unwrap();
    assert!(s1.meta_log.is_none());
}
