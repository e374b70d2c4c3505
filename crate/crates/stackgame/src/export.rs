//! Report files. CSVs start with a `k` (step) or id column; text files are
//! fixed-width summaries of the same numbers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use stackgame_core::{EquilibriumReport, FollowerBehavior, LeaderBehavior, Multiplicity, PoALayer, Problem};

use crate::error::{Error, Result};
use crate::study::{PoARow, StudyResult};
use crate::table::{self, file_stem, num};

fn behavior_tag(l: LeaderBehavior, f: FollowerBehavior) -> String {
    let t = |c: bool| if c { "C" } else { "NC" };
    format!(
        "{}/{}",
        t(l == LeaderBehavior::Cooperative),
        t(f == FollowerBehavior::Cooperative)
    )
}

fn json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::parse(path, e.to_string()))?;
    table::write_text(path, &(text + "\n"))
}

/// Directory name of a class report inside a study directory.
pub fn class_dir(report: &EquilibriumReport) -> String {
    format!("class_{}", report.class)
}

/// Writes one class report into `dir`: `report.json`, `summary.txt`,
/// `leaders.csv`, `followers.csv`, `states.csv`, one `inputs_<follower>.csv`
/// per follower and one `tank_<state>.csv` per designed state with its
/// scaled upper bound. Input and state CSVs are long: `k, input, value` and
/// `k, state, value`.
pub fn export_report(problem: &Problem, report: &EquilibriumReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let net = &problem.network;
    let design = &problem.design;
    let tr = &report.trajectories;

    let p = dir.join("report.json");
    json(&p, report)?;
    written.push(p);

    let p = dir.join("summary.txt");
    table::write_text(&p, &summary(problem, report))?;
    written.push(p);

    let p = dir.join("leaders.csv");
    let rows: Vec<Vec<String>> = (0..design.n_leaders())
        .map(|j| {
            vec![
                j.to_string(),
                design.leaders[j].clone(),
                num(report.profile[j]),
                num(report.leader_costs[j]),
            ]
        })
        .collect();
    table::write_csv(&p, &["leader".into(), "name".into(), "action".into(), "cost".into()], &rows)?;
    written.push(p);

    let p = dir.join("followers.csv");
    let rows: Vec<Vec<String>> = (0..net.n_followers())
        .map(|i| vec![i.to_string(), net.followers[i].clone(), num(report.follower_costs[i])])
        .collect();
    table::write_csv(&p, &["follower".into(), "name".into(), "cost".into()], &rows)?;
    written.push(p);

    for (i, name) in net.followers.iter().enumerate() {
        let p = dir.join(format!("inputs_{}.csv", file_stem(name)));
        table::write_csv(&p, &["k".into(), "input".into(), "value".into()], &long_rows(&tr.inputs[i]))?;
        written.push(p);
    }

    let p = dir.join("states.csv");
    table::write_csv(&p, &["k".into(), "state".into(), "value".into()], &long_rows(&tr.states))?;
    written.push(p);

    let xmax = problem.state_upper_bound(&report.profile)?;
    for &s in &net.designed_states {
        let p = dir.join(format!("tank_{s}.csv"));
        let rows: Vec<Vec<String>> = tr
            .states
            .iter()
            .enumerate()
            .map(|(k, x)| vec![k.to_string(), num(x[s]), num(xmax[s])])
            .collect();
        table::write_csv(&p, &["k".into(), "volume".into(), "x_max".into()], &rows)?;
        written.push(p);
    }
    Ok(written)
}

/// One `(k, index, value)` row per entry of a step-major series.
fn long_rows(series: &[Vec<f64>]) -> Vec<Vec<String>> {
    series
        .iter()
        .enumerate()
        .flat_map(|(k, row)| row.iter().enumerate().map(move |(c, &v)| vec![k.to_string(), c.to_string(), num(v)]))
        .collect()
}

fn summary(problem: &Problem, r: &EquilibriumReport) -> String {
    let design = &problem.design;
    let net = &problem.network;
    let mut s = String::new();
    let _ = writeln!(s, "class {} ({} leaders/followers)", r.class, behavior_tag(r.leader_behavior, r.follower_behavior));
    let _ = writeln!(s, "profile {:?}", r.profile);
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<12} {:>8} {:>18}", "leader", "action", "J");
    for j in 0..design.n_leaders() {
        let _ = writeln!(s, "{:<12} {:>8} {:>18.4}", design.leaders[j], r.profile[j], r.leader_costs[j]);
    }
    let _ = writeln!(s, "{:<12} {:>8} {:>18.4}", "total", "", r.total_leader_cost);
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<12} {:>18}", "follower", "V");
    for i in 0..net.n_followers() {
        let _ = writeln!(s, "{:<12} {:>18.4}", net.followers[i], r.follower_costs[i]);
    }
    let _ = writeln!(s, "{:<12} {:>18.4}", "total", r.total_follower_cost);
    let _ = writeln!(s);
    let lc = &r.leader_cert;
    let _ = writeln!(
        s,
        "leader certificate: {:?}, converged {}, max gain {:e} (eps {:e}), rounds {}, profiles visited {}{}",
        lc.termination,
        lc.converged,
        lc.max_gain,
        lc.epsilon,
        lc.rounds,
        lc.visited_profiles,
        if lc.fallback { ", enumeration fallback" } else { "" }
    );
    let fc = &r.follower_cert;
    let _ = writeln!(
        s,
        "follower certificate: converged {}, max relative gain {:e} (eps {:e}), sweeps {}, QP solves {}",
        fc.converged, fc.max_gain, fc.epsilon, fc.sweeps, fc.solves
    );
    s
}

fn multiplicity(m: Multiplicity) -> String {
    match m {
        Multiplicity::Exhaustive => "exhaustive".into(),
        Multiplicity::Unexplored => "single start".into(),
        Multiplicity::MultiStart { starts } => format!("{} starts", starts + 1),
    }
}

fn layer(l: PoALayer) -> &'static str {
    match l {
        PoALayer::Leader => "leader",
        PoALayer::Follower => "follower",
    }
}

/// Writes `poa.json`, `poa.csv` and `poa.txt`.
pub fn export_poa(rows: &[PoARow], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let p = dir.join("poa.json");
    json(&p, &rows)?;
    written.push(p);

    let p = dir.join("poa.csv");
    let header: Vec<String> = [
        "layer",
        "context",
        "poa",
        "numerator",
        "denominator",
        "numerator_profile",
        "denominator_profile",
        "equilibria",
        "exploration",
        "cross_class_ratio",
        "cross_classes",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let profile = |a: &[f64]| a.iter().map(|&v| num(v)).collect::<Vec<_>>().join(" ");
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                layer(r.poa.layer).into(),
                r.poa.context.clone(),
                num(r.poa.ratio),
                num(r.poa.numerator),
                num(r.poa.denominator),
                profile(&r.poa.numerator_profile),
                profile(&r.poa.denominator_profile),
                r.poa.equilibria.to_string(),
                multiplicity(r.poa.multiplicity),
                num(r.cross_class_ratio),
                format!("{}/{}", r.cross_classes.0, r.cross_classes.1),
            ]
        })
        .collect();
    table::write_csv(&p, &header, &body)?;
    written.push(p);

    let p = dir.join("poa.txt");
    table::write_text(&p, &poa_text(rows))?;
    written.push(p);
    Ok(written)
}

fn poa_text(rows: &[PoARow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<9} {:<44} {:>10} {:>12} {:>10} {:>11}",
        "layer", "held fixed", "PoA", "cross-class", "classes", "equilibria"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<9} {:<44} {:>10.6} {:>12.6} {:>10} {:>11}",
            layer(r.poa.layer),
            r.poa.context,
            r.poa.ratio,
            r.cross_class_ratio,
            format!("{}/{}", r.cross_classes.0, r.cross_classes.1),
            format!("{} ({})", r.poa.equilibria, multiplicity(r.poa.multiplicity)),
        );
    }
    s
}

/// Cost tables for all classes plus the price-of-anarchy table.
pub fn tables_text(problem: &Problem, study: &StudyResult) -> String {
    let design = &problem.design;
    let net = &problem.network;
    let mut s = String::new();
    let _ = writeln!(s, "Leader costs by class");
    let _ = write!(s, "{:<6} {:<6} {:<28}", "class", "L/F", "profile");
    for l in &design.leaders {
        let _ = write!(s, " {:>16}", l);
    }
    let _ = writeln!(s, " {:>16}", "total");
    for r in &study.reports {
        let _ = write!(
            s,
            "{:<6} {:<6} {:<28}",
            r.class.tag(),
            behavior_tag(r.leader_behavior, r.follower_behavior),
            format!("{:?}", r.profile)
        );
        for c in &r.leader_costs {
            let _ = write!(s, " {:>16.4}", c);
        }
        let _ = writeln!(s, " {:>16.4}", r.total_leader_cost);
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "Follower costs by class");
    let _ = write!(s, "{:<6} {:<6}", "class", "L/F");
    for f in &net.followers {
        let _ = write!(s, " {:>14}", f);
    }
    let _ = writeln!(s, " {:>14}", "total");
    for r in &study.reports {
        let _ = write!(s, "{:<6} {:<6}", r.class.tag(), behavior_tag(r.leader_behavior, r.follower_behavior));
        for c in &r.follower_costs {
            let _ = write!(s, " {:>14.4}", c);
        }
        let _ = writeln!(s, " {:>14.4}", r.total_follower_cost);
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "Prices of anarchy");
    s.push_str(&poa_text(&study.poa));
    s
}

/// Writes a full study: one directory per class, the PoA files, `study.json`
/// and `tables.txt`.
pub fn export_study(problem: &Problem, study: &StudyResult, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for r in &study.reports {
        written.extend(export_report(problem, r, &dir.join(class_dir(r)))?);
    }
    written.extend(export_poa(&study.poa, dir)?);
    let p = dir.join("study.json");
    json(&p, study)?;
    written.push(p);
    let p = dir.join("tables.txt");
    table::write_text(&p, &tables_text(problem, study))?;
    written.push(p);
    Ok(written)
}
