//! Golden-file regression for the named scenarios. The metrics of the first
//! verified run of each scenario are frozen in `tests/golden/scenarios.txt`;
//! intentional behavior changes must regenerate it with
//! `LD3_UPDATE_GOLDEN=1 cargo test --test golden`.

use std::fmt::Write as _;

use ld3::harness::{run_scenario, AttackConfig, ScenarioConfig};
use ld3::sensors::SpoofDirection;

fn scenarios() -> Vec<(&'static str, ScenarioConfig)> {
    let benign = ScenarioConfig {
        seed: 42,
        ..ScenarioConfig::default()
    };
    let attacked = ScenarioConfig {
        seed: 42,
        attack: Some(AttackConfig {
            d: 2.0,
            f: 2.0,
            direction: SpoofDirection::Left,
            start_time: 10.0,
        }),
        ..ScenarioConfig::default()
    };
    let stealthy = ScenarioConfig {
        seed: 42,
        attack: Some(AttackConfig {
            d: 0.405,
            f: 1.0,
            direction: SpoofDirection::Right,
            start_time: 10.0,
        }),
        ..ScenarioConfig::default()
    };
    vec![
        ("benign-default", benign),
        ("attacked-aggressive", attacked),
        ("attacked-stealthy", stealthy),
    ]
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.9}"))
        .unwrap_or_else(|| "none".into())
}

fn render() -> String {
    let mut out = String::new();
    for (name, cfg) in scenarios() {
        let res = run_scenario(&cfg).expect("golden scenario runs");
        let _ = writeln!(
            out,
            "{name} alarmed={} alarm_time={} max_true_dev={:.9} final_speed={:.9} \
             final_dev={:.9} max_delta={:.9} rows={}",
            res.alarmed,
            fmt_opt(res.alarm_time),
            res.max_true_lateral_dev,
            res.final_speed,
            res.final_lateral_dev,
            res.max_delta,
            res.rows.len(),
        );
    }
    out
}

#[test]
fn named_scenarios_match_goldens() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/scenarios.txt");
    let current = render();
    if std::env::var_os("LD3_UPDATE_GOLDEN").is_some() {
        std::fs::write(path, &current).expect("write golden");
        eprintln!("golden file regenerated");
        return;
    }
    let frozen = std::fs::read_to_string(path).expect(
        "golden file missing; run LD3_UPDATE_GOLDEN=1 cargo test --test golden to create it",
    );
    assert_eq!(
        current, frozen,
        "scenario metrics drifted from the frozen goldens; \
         if intentional, regenerate with LD3_UPDATE_GOLDEN=1"
    );
}
