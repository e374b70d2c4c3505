mod common;

use common::{fixture_with, scratch, snapshot};
use stackgame::export::{export_poa, export_report, export_study};
use stackgame::study::{run_study, PoAScenario, StudyCaches, StudyOptions};
use stackgame_core::{FollowerBehavior, GameConfig, PoALayer, Problem, StackelbergClass};

fn small() -> Problem {
    fixture_with(|s| s.horizon = 12)
}

fn opts() -> StudyOptions {
    StudyOptions {
        starts: 2,
        ..StudyOptions::default()
    }
}

#[test]
fn study_directory_has_four_classes_and_the_poa_table() {
    let p = small();
    let study = run_study(&p, &GameConfig::default(), &opts()).unwrap();
    let classes: Vec<_> = study.reports.iter().map(|r| r.class).collect();
    assert_eq!(classes, StackelbergClass::ALL.to_vec());
    assert_eq!(study.poa.len(), 4);
    let layers: Vec<_> = study.poa.iter().map(|r| r.poa.layer).collect();
    assert_eq!(layers, [PoALayer::Leader, PoALayer::Leader, PoALayer::Follower, PoALayer::Follower]);
    for (row, scenario) in study.poa.iter().zip(PoAScenario::ALL) {
        assert_eq!(row.cross_classes, scenario.classes());
        assert!(row.poa.ratio >= 1.0 - 1e-9);
    }

    let dir = scratch("layout");
    export_study(&p, &study, dir.path()).unwrap();
    let files: Vec<String> = snapshot(dir.path()).into_iter().map(|(f, _)| f.display().to_string()).collect();
    for class in ["I", "II", "III", "IV"] {
        for name in ["report.json", "summary.txt", "leaders.csv", "followers.csv", "states.csv"] {
            assert!(files.contains(&format!("class_{class}/{name}")), "class_{class}/{name} in {files:?}");
        }
        for f in &p.network.followers {
            assert!(files.contains(&format!("class_{class}/inputs_{f}.csv")));
        }
        for s in &p.network.designed_states {
            assert!(files.contains(&format!("class_{class}/tank_{s}.csv")));
        }
    }
    for name in ["poa.json", "poa.csv", "poa.txt", "study.json", "tables.txt"] {
        assert!(files.contains(&name.to_string()), "{name}");
    }
    let tables = std::fs::read_to_string(dir.path().join("tables.txt")).unwrap();
    assert!(tables.contains("Leader costs by class") && tables.contains("Prices of anarchy"));
}

#[test]
fn trajectory_files_are_long_and_exact() {
    let p = small();
    let study = run_study(&p, &GameConfig::default(), &opts()).unwrap();
    let r = &study.reports[1];
    let dir = scratch("trajectories");
    export_report(&p, r, dir.path()).unwrap();
    let read = |name: &str| {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        text.lines().map(|l| l.split(',').map(str::to_string).collect::<Vec<_>>()).collect::<Vec<_>>()
    };

    let states = read("states.csv");
    assert_eq!(states[0], ["k", "state", "value"]);
    assert_eq!(states.len() - 1, (p.scenario.horizon + 1) * p.network.n_x);
    for row in &states[1..] {
        let (k, s): (usize, usize) = (row[0].parse().unwrap(), row[1].parse().unwrap());
        assert_eq!(row[2].parse::<f64>().unwrap().to_bits(), r.trajectories.states[k][s].to_bits());
    }
    for (i, f) in p.network.followers.iter().enumerate() {
        let inputs = read(&format!("inputs_{f}.csv"));
        assert_eq!(inputs[0], ["k", "input", "value"]);
        assert_eq!(inputs.len() - 1, p.scenario.horizon * p.network.n_u(i));
        for row in &inputs[1..] {
            let (k, c): (usize, usize) = (row[0].parse().unwrap(), row[1].parse().unwrap());
            assert_eq!(row[2].parse::<f64>().unwrap(), r.trajectories.inputs[i][k][c]);
        }
    }
    let xmax = p.state_upper_bound(&r.profile).unwrap();
    for &s in &p.network.designed_states {
        let tank = read(&format!("tank_{s}.csv"));
        assert_eq!(tank[0], ["k", "volume", "x_max"]);
        assert_eq!(tank.len() - 1, p.scenario.horizon + 1);
        for row in &tank[1..] {
            let volume: f64 = row[1].parse().unwrap();
            assert_eq!(row[2].parse::<f64>().unwrap(), xmax[s]);
            assert!(volume <= xmax[s] + 1e-6);
        }
    }
}

#[test]
fn empty_trajectories_give_header_only_files() {
    let p = small();
    let study = run_study(&p, &GameConfig::default(), &opts()).unwrap();
    let mut r = study.reports[0].clone();
    for u in &mut r.trajectories.inputs {
        u.clear();
    }
    r.trajectories.states.clear();
    let dir = scratch("empty");
    export_report(&p, &r, dir.path()).unwrap();
    let mut names = vec!["states.csv".to_string()];
    names.extend(p.network.followers.iter().map(|f| format!("inputs_{f}.csv")));
    names.extend(p.network.designed_states.iter().map(|s| format!("tank_{s}.csv")));
    for name in names {
        let text = std::fs::read_to_string(dir.path().join(&name)).unwrap();
        assert_eq!(text.lines().count(), 1, "{name}: {text}");
        assert!(text.starts_with("k,"));
    }
}

#[test]
fn re_export_is_byte_identical() {
    let p = small();
    let study = run_study(&p, &GameConfig::default(), &opts()).unwrap();
    let (a, b) = (scratch("first"), scratch("second"));
    export_study(&p, &study, a.path()).unwrap();
    export_study(&p, &study, b.path()).unwrap();
    assert_eq!(snapshot(a.path()), snapshot(b.path()));
    let again = run_study(&p, &GameConfig::default(), &opts()).unwrap();
    let c = scratch("third");
    export_study(&p, &again, c.path()).unwrap();
    assert_eq!(snapshot(a.path()), snapshot(c.path()));
}

#[test]
fn job_count_does_not_change_results() {
    let p = small();
    let one = run_study(&p, &GameConfig::default(), &opts()).unwrap();
    let many = run_study(&p, &GameConfig::default(), &StudyOptions { jobs: 4, ..opts() }).unwrap();
    assert_eq!(serde_json::to_string(&one).unwrap(), serde_json::to_string(&many).unwrap());
}

#[test]
fn resumed_study_matches_a_fresh_one() {
    let p = small();
    let cfg = GameConfig::default();
    let spill = scratch("spill");
    let with_spill = StudyOptions {
        spill_dir: Some(spill.path().to_path_buf()),
        ..opts()
    };
    let fresh = run_study(&p, &cfg, &with_spill).unwrap();
    assert!(spill.path().join("cache_cooperative.csv").exists());
    assert!(spill.path().join("cache_noncooperative.csv").exists());
    let resumed = run_study(&p, &cfg, &StudyOptions { resume: true, ..with_spill.clone() }).unwrap();
    assert_eq!(serde_json::to_string(&fresh).unwrap(), serde_json::to_string(&resumed).unwrap());

    let caches = StudyCaches::new(&p, &cfg);
    caches.fill(&[FollowerBehavior::Cooperative], &StudyOptions { resume: true, ..with_spill }).unwrap();
    assert_eq!(caches.cooperative.evaluations(), 0);
}

#[test]
fn poa_files_follow_the_rows() {
    let p = small();
    let study = run_study(&p, &GameConfig::default(), &opts()).unwrap();
    let dir = scratch("poa");
    export_poa(&study.poa, dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("poa.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("layer,context,poa,"));
    let back: Vec<stackgame::study::PoARow> =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("poa.json")).unwrap()).unwrap();
    assert_eq!(back, study.poa);
}
