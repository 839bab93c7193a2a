use std::fmt;

use crate::roomworld::{Room, RoomWorldSpec};

use super::{oracle_steps, run_episode_on, Controller, RunConfig, RunError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Agent,
    Random,
    Oracle,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Agent => "agent",
            Method::Random => "random",
            Method::Oracle => "oracle",
        })
    }
}

/// One run of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchRecord {
    pub env: String,
    pub method: Method,
    pub seed: u64,
    pub start_room: Room,
    pub steps_to_discovery: Option<usize>,
    pub steps_to_complete: Option<usize>,
    pub final_accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub median: f64,
    pub mean: f64,
    pub min: usize,
    pub max: usize,
}

impl Stats {
    /// `None` when there are no values.
    pub fn of(values: &[usize]) -> Option<Stats> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_unstable();
        let n = v.len();
        let median = if n % 2 == 1 {
            v[n / 2] as f64
        } else {
            (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
        };
        Some(Stats {
            median,
            mean: v.iter().sum::<usize>() as f64 / n as f64,
            min: v[0],
            max: v[n - 1],
        })
    }
}

/// Per `(env, method)` aggregate over successful runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub env: String,
    pub method: Method,
    pub runs: usize,
    /// Runs that never completed within the step budget.
    pub failures: usize,
    pub discovery: Option<Stats>,
    pub complete: Option<Stats>,
}

/// Median where a missing value (a failed run) ranks above every number.
/// Returns `None` when the median itself is a failure.
pub fn median_with_failures(values: &[Option<usize>]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = values
        .iter()
        .map(|x| x.map_or(f64::INFINITY, |s| s as f64))
        .collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let m = if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    };
    m.is_finite().then_some(m)
}

fn run_seed(
    env: &str,
    spec: &RoomWorldSpec,
    base: &RunConfig,
    seed: u64,
) -> Result<Vec<BatchRecord>, RunError> {
    let mut cfg = base.with_seed(seed);
    cfg.env = env.to_string();
    cfg.dump_efe = false;
    cfg.output_dir = None;

    let mut out = Vec::with_capacity(3);
    let mut start = None;
    for (method, controller) in [
        (Method::Agent, Controller::ExpectedFreeEnergy),
        (Method::Random, Controller::Random),
    ] {
        cfg.controller = controller;
        let r = run_episode_on(spec, &cfg)?;
        start = Some(r.start_room);
        out.push(BatchRecord {
            env: env.to_string(),
            method,
            seed,
            start_room: r.start_room,
            steps_to_discovery: r.steps_to_discovery,
            steps_to_complete: r.steps_to_complete,
            final_accuracy: r.final_accuracy,
        });
    }
    let start = start.expect("two runs above");
    let oracle = oracle_steps(spec, start).ok();
    out.push(BatchRecord {
        env: env.to_string(),
        method: Method::Oracle,
        seed,
        start_room: start,
        steps_to_discovery: oracle,
        steps_to_complete: None,
        final_accuracy: f64::NAN,
    });
    Ok(out)
}

/// Runs the agent, the random baseline and the oracle on seeds
/// `0..n_seeds` of every environment. Records come back ordered by
/// `(env, seed, method)` regardless of scheduling.
pub fn batch(
    envs: &[String],
    base: &RunConfig,
    n_seeds: usize,
) -> Result<(Vec<BatchRecord>, Vec<SummaryRow>), RunError> {
    if n_seeds == 0 {
        return Err(RunError::Invalid("at least one seed is required".into()));
    }
    let specs = envs
        .iter()
        .map(|e| RoomWorldSpec::load(e).map(|s| (e.clone(), s)))
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(usize, u64)> = (0..specs.len())
        .flat_map(|i| (0..n_seeds as u64).map(move |s| (i, s)))
        .collect();
    let run = |&(i, seed): &(usize, u64)| {
        let (env, spec) = &specs[i];
        run_seed(env, spec, base, seed)
    };

    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        jobs.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = jobs.iter().map(run).collect();

    let records: Vec<BatchRecord> = results
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok((records.clone(), summarize(&records)))
}

pub fn summarize(records: &[BatchRecord]) -> Vec<SummaryRow> {
    let mut envs: Vec<&str> = Vec::new();
    for r in records {
        if !envs.contains(&r.env.as_str()) {
            envs.push(&r.env);
        }
    }
    let keys = envs.into_iter().flat_map(|env| {
        [Method::Agent, Method::Random, Method::Oracle]
            .into_iter()
            .filter(move |&m| records.iter().any(|r| r.env == env && r.method == m))
            .map(move |m| (env.to_string(), m))
    });
    keys.map(|(env, method)| {
        let group: Vec<&BatchRecord> = records
            .iter()
            .filter(|r| r.env == env && r.method == method)
            .collect();
        let discovery: Vec<usize> = group.iter().filter_map(|r| r.steps_to_discovery).collect();
        let complete: Vec<usize> = group.iter().filter_map(|r| r.steps_to_complete).collect();
        let failures = match method {
            Method::Oracle => group.len() - discovery.len(),
            _ => group.len() - complete.len(),
        };
        SummaryRow {
            env,
            method,
            runs: group.len(),
            failures,
            discovery: Stats::of(&discovery),
            complete: Stats::of(&complete),
        }
    })
    .collect()
}
