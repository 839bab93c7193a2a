//! Tab-separated result tables and the JSON model snapshot.
//!
//! Every file starts with a `# cogmap-<kind> v<N>` line.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::model::Pose;
use crate::planner::EfeFieldRow;
use crate::roomworld::{Room, RoomWorldSpec};

use super::batch::{BatchRecord, Stats, SummaryRow};
use super::metrics::{dump_transition_plot, TransitionRow};
use super::{Controller, RunResult};

pub const TABLE_VERSION: u32 = 1;

fn header(kind: &str) -> String {
    format!("# cogmap-{kind} v{TABLE_VERSION}\n")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

fn room(r: Option<Room>) -> String {
    opt(r)
}

fn poses(path: &[Pose]) -> String {
    path.iter()
        .map(Pose::to_string)
        .collect::<Vec<_>>()
        .join(";")
}

pub fn trace_table(result: &RunResult) -> String {
    let mut s = header("trace");
    let controller = match result.controller {
        Controller::ExpectedFreeEnergy => "agent",
        Controller::Random => "random",
    };
    writeln!(
        s,
        "# env={} seed={} controller={} start={} start_color={}",
        result.env, result.seed, controller, result.start_room, result.start_color
    )
    .unwrap();
    s.push_str("step\taction\tmoved\troom\tcolor\tobs\tpose\tstate\tconfidence\tlost\tvfe\taccuracy\tnum_states\tcount_mass\n");
    for r in &result.trace {
        writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.step,
            r.action,
            r.moved as u8,
            r.room,
            r.color,
            r.observation.0,
            r.pose,
            r.state.0,
            r.confidence,
            r.lost as u8,
            r.vfe,
            r.accuracy,
            r.num_states,
            r.count_mass
        )
        .unwrap();
    }
    s
}

pub fn transition_table(rows: &[TransitionRow]) -> String {
    let mut s = header("transitions");
    s.push_str("from_state\tfrom_pose\tfrom_room\taction\tto_state\tto_pose\tto_room\tprobability\tfeasible\n");
    for r in rows {
        writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.from_state.0,
            r.from_pose,
            room(r.from_room),
            r.action,
            r.to_state.0,
            r.to_pose,
            room(r.to_room),
            r.probability,
            r.feasible as u8
        )
        .unwrap();
    }
    s
}

pub fn efe_table(fields: &[(usize, Vec<EfeFieldRow>)]) -> String {
    let mut s = header("efe-field");
    s.push_str("step\tpolicy\tposes\tefe\n");
    for (step, rows) in fields {
        for r in rows {
            let policy: String = r.actions.iter().map(|a| a.code()).collect();
            writeln!(s, "{step}\t{policy}\t{}\t{}", poses(&r.poses), r.efe).unwrap();
        }
    }
    s
}

fn stats_cells(s: Option<Stats>) -> String {
    match s {
        Some(st) => format!("{}\t{}\t{}\t{}", st.median, st.mean, st.min, st.max),
        None => "-\t-\t-\t-".to_string(),
    }
}

pub fn summary_table(rows: &[SummaryRow]) -> String {
    let mut s = header("summary");
    s.push_str("env\tmethod\truns\tfailures\tdiscovery_median\tdiscovery_mean\tdiscovery_min\tdiscovery_max\tcomplete_median\tcomplete_mean\tcomplete_min\tcomplete_max\n");
    for r in rows {
        writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.env,
            r.method,
            r.runs,
            r.failures,
            stats_cells(r.discovery),
            stats_cells(r.complete)
        )
        .unwrap();
    }
    s
}

pub fn runs_table(records: &[BatchRecord]) -> String {
    let mut s = header("runs");
    s.push_str("env\tmethod\tseed\tstart\tsteps_to_discovery\tsteps_to_complete\tfinal_accuracy\n");
    for r in records {
        let acc = if r.final_accuracy.is_nan() {
            "-".to_string()
        } else {
            r.final_accuracy.to_string()
        };
        writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.env,
            r.method,
            r.seed,
            r.start_room,
            opt(r.steps_to_discovery),
            opt(r.steps_to_complete),
            acc
        )
        .unwrap();
    }
    s
}

/// Writes `trace.tsv`, `snapshot.json`, `transitions.tsv` and, when
/// recorded, `efe_field.tsv` into `dir`.
pub fn write_run(dir: &Path, spec: &RoomWorldSpec, result: &RunResult) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("trace.tsv"), trace_table(result))?;
    fs::write(dir.join("snapshot.json"), result.snapshot.to_json())?;
    let rows = dump_transition_plot(&result.snapshot, spec, result.frame());
    fs::write(dir.join("transitions.tsv"), transition_table(&rows))?;
    if !result.efe_fields.is_empty() {
        fs::write(dir.join("efe_field.tsv"), efe_table(&result.efe_fields))?;
    }
    Ok(())
}

pub fn write_batch(dir: &Path, records: &[BatchRecord], summary: &[SummaryRow]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("summary.tsv"), summary_table(summary))?;
    fs::write(dir.join("runs.tsv"), runs_table(records))
}
