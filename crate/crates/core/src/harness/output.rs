use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::run::{ExperimentResult, IterationRecord};
use crate::error::{Error, Result};

pub const RECORDS_HEADER: [&str; 7] = [
    "method",
    "trial",
    "iteration",
    "proposed_theta",
    "observed_cost",
    "incumbent_cost",
    "wall_time",
];

fn join_theta(theta: &[f64]) -> String {
    theta.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

fn parse<T: std::str::FromStr>(field: &str, what: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("cannot parse {what} from {field:?}")))
}

pub fn write_records<W: Write>(out: W, records: &[IterationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORDS_HEADER)?;
    for r in records {
        w.write_record([
            r.method.clone(),
            r.trial.to_string(),
            r.iteration.to_string(),
            join_theta(&r.proposed_theta),
            r.observed_cost.to_string(),
            r.incumbent_cost.to_string(),
            r.wall_time.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<IterationRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    if rdr.headers()?.iter().ne(RECORDS_HEADER) {
        return Err(Error::InvalidArgument("records.csv has an unexpected header".into()));
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let theta = if row[3].is_empty() {
            Vec::new()
        } else {
            row[3].split(';').map(|v| parse(v, "theta")).collect::<Result<_>>()?
        };
        out.push(IterationRecord {
            method: row[0].to_string(),
            trial: parse(&row[1], "trial")?,
            iteration: parse(&row[2], "iteration")?,
            proposed_theta: theta,
            observed_cost: parse(&row[4], "observed cost")?,
            incumbent_cost: parse(&row[5], "incumbent cost")?,
            wall_time: parse(&row[6], "wall time")?,
        });
    }
    Ok(out)
}

/// `(method label, trial)` pairs that failed.
pub type InvalidTrials = HashSet<(String, usize)>;

pub fn write_failures<W: Write>(out: W, results: &[ExperimentResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "trial", "iteration", "message"])?;
    for res in results {
        for o in &res.outcomes {
            if let Some(f) = &o.failure {
                w.write_record([
                    res.label(),
                    o.trial.to_string(),
                    f.iteration.to_string(),
                    f.message.clone(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_failures<R: Read>(input: R) -> Result<InvalidTrials> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = HashSet::new();
    for row in rdr.records() {
        let row = row?;
        out.insert((row[0].to_string(), parse(&row[1], "trial")?));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub method: String,
    pub iteration: usize,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    /// Full label, e.g. `MBMF(F=10)`.
    pub label: String,
    pub method: String,
    /// The value of F or K, empty for methods without one.
    pub param: String,
    pub mean: f64,
    pub std: f64,
    pub n_valid_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Aggregate {
    pub curves: Vec<CurvePoint>,
    pub summary: Vec<SummaryRow>,
}

impl Aggregate {
    pub fn row(&self, label: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.label == label)
    }
}

/// Mean and sample standard deviation; a single sample has std 0.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Splits `MBMF(F=10)` into `("MBMF", "10")`.
pub fn split_label(label: &str) -> (String, String) {
    match label.split_once('(') {
        Some((m, rest)) => {
            let inner = rest.trim_end_matches(')');
            let value = inner.split_once('=').map_or(inner, |(_, v)| v);
            (m.to_string(), value.to_string())
        }
        None => (label.to_string(), String::new()),
    }
}

/// Incumbent learning curves and final-cost table over the valid trials.
/// Methods keep their order of first appearance.
pub fn aggregate(records: &[IterationRecord], invalid: &InvalidTrials) -> Aggregate {
    let mut order: Vec<&str> = Vec::new();
    // label -> trial -> iteration -> incumbent after that iteration
    let mut by_label: BTreeMap<&str, BTreeMap<usize, BTreeMap<usize, f64>>> = BTreeMap::new();
    for r in records {
        if invalid.contains(&(r.method.clone(), r.trial)) {
            continue;
        }
        if !order.contains(&r.method.as_str()) {
            order.push(&r.method);
        }
        by_label
            .entry(&r.method)
            .or_default()
            .entry(r.trial)
            .or_default()
            .insert(r.iteration, r.incumbent_cost);
    }
    let mut agg = Aggregate::default();
    for label in order {
        let trials = &by_label[label];
        let mut per_iter: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for iters in trials.values() {
            for (&i, &c) in iters {
                per_iter.entry(i).or_default().push(c);
            }
        }
        for (iteration, xs) in per_iter {
            let (mean, std) = mean_std(&xs);
            agg.curves.push(CurvePoint {
                method: label.to_string(),
                iteration,
                mean,
                std,
                n: xs.len(),
            });
        }
        let finals: Vec<f64> = trials
            .values()
            .filter_map(|m| m.values().next_back().copied())
            .collect();
        let (mean, std) = mean_std(&finals);
        let (method, param) = split_label(label);
        agg.summary.push(SummaryRow {
            label: label.to_string(),
            method,
            param,
            mean,
            std,
            n_valid_trials: finals.len(),
        });
    }
    agg
}

pub fn write_summary<W: Write>(out: W, summary: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "F/K", "mean", "std", "n_valid_trials"])?;
    for r in summary {
        w.write_record([
            r.method.clone(),
            r.param.clone(),
            r.mean.to_string(),
            r.std.to_string(),
            r.n_valid_trials.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_curves<W: Write>(out: W, curves: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "iteration", "mean", "std", "n"])?;
    for c in curves {
        w.write_record([
            c.method.clone(),
            c.iteration.to_string(),
            c.mean.to_string(),
            c.std.to_string(),
            c.n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// File-name-safe form of a label: `MBMF(F=10)` becomes `MBMF_F10`.
pub fn label_slug(label: &str) -> String {
    label
        .chars()
        .filter_map(|c| match c {
            '(' | '+' => Some('_'),
            ')' | '=' => None,
            c => Some(c),
        })
        .collect()
}

/// All records of the results, ordered by (result order, trial, iteration).
pub fn collect_records(results: &[ExperimentResult]) -> Vec<IterationRecord> {
    results
        .iter()
        .flat_map(|r| r.outcomes.iter().flat_map(|o| o.records.iter().cloned()))
        .collect()
}

pub fn invalid_trials(results: &[ExperimentResult]) -> InvalidTrials {
    results
        .iter()
        .flat_map(|r| {
            r.outcomes
                .iter()
                .filter(|o| !o.is_valid())
                .map(move |o| (r.label(), o.trial))
        })
        .collect()
}

/// Writes `records.csv`, `summary.csv`, `curves.csv`, `failures.csv` and
/// `trajectories/<label>_<trial>.csv` under `dir`.
pub fn write_outputs(dir: &Path, results: &[ExperimentResult]) -> Result<Aggregate> {
    fs::create_dir_all(dir.join("trajectories"))?;
    let records = collect_records(results);
    write_records(fs::File::create(dir.join("records.csv"))?, &records)?;
    write_failures(fs::File::create(dir.join("failures.csv"))?, results)?;
    let agg = aggregate(&records, &invalid_trials(results));
    write_summary(fs::File::create(dir.join("summary.csv"))?, &agg.summary)?;
    write_curves(fs::File::create(dir.join("curves.csv"))?, &agg.curves)?;
    for res in results {
        for o in &res.outcomes {
            if let Some(traj) = &o.best_trajectory {
                let name = format!("{}_{}.csv", label_slug(&res.label()), o.trial);
                traj.write_csv(&res.config.env, fs::File::create(dir.join("trajectories").join(name))?)?;
            }
        }
    }
    Ok(agg)
}

/// Recomputes the aggregate from a directory written by [`write_outputs`].
pub fn aggregate_dir(dir: &Path) -> Result<Aggregate> {
    let records = read_records(fs::File::open(dir.join("records.csv"))?)?;
    let failures = dir.join("failures.csv");
    let invalid = if failures.exists() {
        read_failures(fs::File::open(failures)?)?
    } else {
        InvalidTrials::new()
    };
    Ok(aggregate(&records, &invalid))
}
