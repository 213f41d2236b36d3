//! Batch trial execution and CSV emission.
//!
//! Each trial owns its oracle and RNG stream. The seed depends on the master
//! seed, the algorithm, `(N, d, profile)` and the trial index but not on the
//! swept parameter, so every parameter value sees the same instances.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::atpe::atpe;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::harness::config::{Algorithm, DesignChoice, ExperimentConfig};
use crate::harness::stats::{mean, quantile};
use crate::ogm::{ogm_recover_with_design, SolverParams};
use crate::oracle::{BuiltinProfile, SleeveOracle};
use crate::retrieval::{
    full_design, measure, reconstruct_from_full, reconstruct_from_reduced, reduced_design,
    MeasurementDesign,
};
use crate::rng::{derive_seed, seeded, SeededRng};
use crate::subspace::{hs_distance, random_rotation_within, random_subspace};

pub const TRIALS_HEADER: &str = "algorithm,N,d,profile,param,trial,hs_error,queries,iterations,wall_ms";
pub const AGGREGATE_HEADER: &str = "algorithm,N,d,profile,param,trials,mean_error,p95_error";

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub algorithm: String,
    pub n: usize,
    pub d: usize,
    /// Profile name, or the design name for retrieval rows.
    pub profile: String,
    /// `h` for atpe, `M` for ogm, number of measurements for retrieval.
    pub param: f64,
    pub trial: usize,
    pub hs_error: f64,
    pub queries: u64,
    pub iterations: usize,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub algorithm: String,
    pub n: usize,
    pub d: usize,
    pub profile: String,
    pub param: f64,
    pub trials: usize,
    pub mean_error: f64,
    pub p95_error: f64,
}

impl TrialRow {
    fn same_cell(&self, other: &TrialRow) -> bool {
        self.algorithm == other.algorithm
            && self.n == other.n
            && self.d == other.d
            && self.profile == other.profile
            && self.param.to_bits() == other.param.to_bits()
    }
}

#[derive(Debug, Clone, Copy)]
struct Job {
    n: usize,
    d: usize,
    profile: usize,
    param: f64,
    trial: usize,
}

fn jobs(cfg: &ExperimentConfig) -> Vec<Job> {
    let profile_count = match cfg.algorithm {
        Algorithm::Retrieval => 1,
        _ => cfg.profiles.len(),
    };
    let mut out = Vec::new();
    for &n in &cfg.n_list {
        for &d in &cfg.d_list {
            for profile in 0..profile_count {
                for param in cfg.param_grid() {
                    for trial in 0..cfg.trials {
                        out.push(Job {
                            n,
                            d,
                            profile,
                            param,
                            trial,
                        });
                    }
                }
            }
        }
    }
    out
}

fn trial_rng(cfg: &ExperimentConfig, job: &Job) -> SeededRng {
    seeded(derive_seed(
        cfg.seed,
        &[
            cfg.algorithm.index(),
            job.n as u64,
            job.d as u64,
            job.profile as u64,
            job.trial as u64,
        ],
    ))
}

fn design_for(choice: DesignChoice, n: usize, d: usize, rng: &mut SeededRng) -> Result<MeasurementDesign> {
    match choice {
        DesignChoice::Full => Ok(full_design(n)),
        DesignChoice::Reduced => reduced_design(n, d, rng),
    }
}

fn run_job(cfg: &ExperimentConfig, job: &Job) -> Result<TrialRow> {
    let mut rng = trial_rng(cfg, job);
    let (profile, param, hs_error, queries, iterations, wall_ms) = match cfg.algorithm {
        Algorithm::Atpe => {
            let profile: BuiltinProfile = cfg.profiles[job.profile];
            let mut oracle = SleeveOracle::random(job.n, job.n - job.d, profile, &mut rng)?;
            let r = atpe(&mut oracle, job.d, job.param, &mut rng)?;
            (profile.name().to_string(), job.param, r.hs_error, r.queries, r.iterations, r.wall_ms)
        }
        Algorithm::Ogm => {
            let profile: BuiltinProfile = cfg.profiles[job.profile];
            let mut oracle = SleeveOracle::random(job.n, job.d, profile, &mut rng)?;
            let init = random_rotation_within(oracle.hidden(), cfg.init_angle, &mut rng)?;
            let design = design_for(cfg.design, job.n, job.d, &mut rng)?;
            let r = ogm_recover_with_design(
                &mut oracle,
                job.d,
                job.param as usize,
                design,
                &init,
                &SolverParams::default(),
                &mut rng,
            )?;
            (profile.name().to_string(), job.param, r.hs_error, r.queries, r.iterations, r.wall_ms)
        }
        Algorithm::Retrieval => {
            let started = std::time::Instant::now();
            let p = random_subspace(job.d, job.n, &mut rng)?.projection_matrix();
            let design = design_for(cfg.design, job.n, job.d, &mut rng)?;
            let m = measure(&p, &design)?;
            let back = match cfg.design {
                DesignChoice::Full => reconstruct_from_full(&m, job.n)?,
                DesignChoice::Reduced => reconstruct_from_reduced(&m, &design, job.n, job.d)?,
            };
            let err = hs_distance(&back, &p)?;
            let len = design.len();
            let ms = started.elapsed().as_millis() as u64;
            (cfg.design.name().to_string(), len as f64, err, len as u64, 0, ms)
        }
    };
    Ok(TrialRow {
        algorithm: cfg.algorithm.name().to_string(),
        n: job.n,
        d: job.d,
        profile,
        param,
        trial: job.trial,
        hs_error,
        queries,
        iterations,
        wall_ms: if cfg.record_timing { wall_ms } else { 0 },
    })
}

/// Runs every `(cell, trial)` of the config. Rows come back ordered by cell,
/// then trial, whatever the execution strategy.
pub fn run_trials(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<TrialRow>> {
    cfg.validate()?;
    let jobs = jobs(cfg);
    exec.map_indexed(jobs.len(), |i| run_job(cfg, &jobs[i]))
        .into_iter()
        .collect()
}

/// Mean and 95th-percentile error per cell, in first-appearance order.
pub fn aggregate(rows: &[TrialRow]) -> Vec<AggregateRow> {
    let mut out: Vec<AggregateRow> = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let mut end = start + 1;
        while end < rows.len() && rows[end].same_cell(&rows[start]) {
            end += 1;
        }
        let errors: Vec<f64> = rows[start..end].iter().map(|r| r.hs_error).collect();
        let first = &rows[start];
        out.push(AggregateRow {
            algorithm: first.algorithm.clone(),
            n: first.n,
            d: first.d,
            profile: first.profile.clone(),
            param: first.param,
            trials: errors.len(),
            mean_error: mean(&errors),
            p95_error: quantile(&errors, 0.95),
        });
        start = end;
    }
    out
}

pub fn trials_csv(rows: &[TrialRow]) -> String {
    let mut s = String::from(TRIALS_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{:e},{},{},{}",
            r.algorithm, r.n, r.d, r.profile, r.param, r.trial, r.hs_error, r.queries, r.iterations, r.wall_ms
        );
    }
    s
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut s = String::from(AGGREGATE_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{:e},{:e}",
            r.algorithm, r.n, r.d, r.profile, r.param, r.trials, r.mean_error, r.p95_error
        );
    }
    s
}

fn fields(line: &str, lineno: usize, expected: usize) -> Result<Vec<&str>> {
    let f: Vec<&str> = line.split(',').map(str::trim).collect();
    if f.len() != expected {
        return Err(Error::Csv {
            line: lineno,
            msg: format!("expected {expected} fields, found {}", f.len()),
        });
    }
    Ok(f)
}

fn field<T: std::str::FromStr>(value: &str, name: &str, lineno: usize) -> Result<T> {
    value.parse::<T>().map_err(|_| Error::Csv {
        line: lineno,
        msg: format!("invalid {name} '{value}'"),
    })
}

/// Splits off and checks the header; returns numbered data lines.
fn data_lines<'a>(text: &'a str, header: &str) -> Result<Vec<(usize, &'a str)>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let Some((_, first)) = lines.find(|(_, l)| !l.trim().is_empty()) else {
        return Err(Error::Csv {
            line: 1,
            msg: "empty file".into(),
        });
    };
    if first.trim() != header {
        return Err(Error::Csv {
            line: 1,
            msg: format!("unexpected header '{}'", first.trim()),
        });
    }
    let rows: Vec<(usize, &str)> = lines.filter(|(_, l)| !l.trim().is_empty()).collect();
    if rows.is_empty() {
        return Err(Error::Csv {
            line: 2,
            msg: "no data rows".into(),
        });
    }
    Ok(rows)
}

pub fn parse_trials_csv(text: &str) -> Result<Vec<TrialRow>> {
    data_lines(text, TRIALS_HEADER)?
        .into_iter()
        .map(|(no, line)| {
            let f = fields(line, no, 10)?;
            Ok(TrialRow {
                algorithm: f[0].to_string(),
                n: field(f[1], "N", no)?,
                d: field(f[2], "d", no)?,
                profile: f[3].to_string(),
                param: field(f[4], "param", no)?,
                trial: field(f[5], "trial", no)?,
                hs_error: field(f[6], "hs_error", no)?,
                queries: field(f[7], "queries", no)?,
                iterations: field(f[8], "iterations", no)?,
                wall_ms: field(f[9], "wall_ms", no)?,
            })
        })
        .collect()
}

pub fn parse_aggregate_csv(text: &str) -> Result<Vec<AggregateRow>> {
    data_lines(text, AGGREGATE_HEADER)?
        .into_iter()
        .map(|(no, line)| {
            let f = fields(line, no, 8)?;
            Ok(AggregateRow {
                algorithm: f[0].to_string(),
                n: field(f[1], "N", no)?,
                d: field(f[2], "d", no)?,
                profile: f[3].to_string(),
                param: field(f[4], "param", no)?,
                trials: field(f[5], "trials", no)?,
                mean_error: field(f[6], "mean_error", no)?,
                p95_error: field(f[7], "p95_error", no)?,
            })
        })
        .collect()
}

/// Paths written by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub trials_csv: PathBuf,
    pub aggregate_csv: PathBuf,
    pub rows: Vec<TrialRow>,
    pub aggregates: Vec<AggregateRow>,
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Runs the config and writes `trials.csv` and `aggregate.csv` into
/// `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, exec: Execution) -> Result<ExperimentOutput> {
    let rows = run_trials(cfg, exec)?;
    let aggregates = aggregate(&rows);
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let trials_path = cfg.out_dir.join("trials.csv");
    let aggregate_path = cfg.out_dir.join("aggregate.csv");
    write(&trials_path, &trials_csv(&rows))?;
    write(&aggregate_path, &aggregate_csv(&aggregates))?;
    Ok(ExperimentOutput {
        trials_csv: trials_path,
        aggregate_csv: aggregate_path,
        rows,
        aggregates,
    })
}
