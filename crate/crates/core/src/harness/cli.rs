//! Command-line front end.

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::atpe::{atpe, recover_profile_after_atpe};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::harness::config::{parse_angle, DesignChoice, ExperimentConfig};
use crate::harness::experiment::run_experiment;
use crate::harness::plot::emit_plots;
use crate::ogm::{ogm_recover_with_design, SolverParams};
use crate::oracle::{BuiltinProfile, SleeveOracle};
use crate::retrieval::{
    check_injectivity_pair, full_design, measure, reconstruct_from_full, reconstruct_from_reduced,
    reduced_design,
};
use crate::rng::seeded;
use crate::subspace::{hs_distance, random_rotation_within, random_subspace};

#[derive(Debug, Parser)]
#[command(
    name = "linsleeve",
    version,
    about = "Recover linear-sleeve functions g(dist(x, L)^2) from point queries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tangent-plane estimation of the core L on a random instance.
    RecoverAtpe(AtpeArgs),
    /// Grassmannian optimization for P = L^perp on a random instance.
    RecoverOgm(OgmArgs),
    /// Projection-retrieval round trip and injectivity probe.
    Retrieval(RetrievalArgs),
    /// Run a batch experiment from a config file and write CSVs.
    Experiment(ExperimentArgs),
    /// Render SVG plots from a trials or aggregate CSV.
    Plot(PlotArgs),
}

fn profile_arg(s: &str) -> std::result::Result<BuiltinProfile, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn design_arg(s: &str) -> std::result::Result<DesignChoice, String> {
    s.parse()
}

#[derive(Debug, Args)]
struct AtpeArgs {
    /// Ambient dimension N.
    #[arg(long = "n")]
    n: usize,
    /// Dimension of the core subspace L (1 <= d < N).
    #[arg(long = "d")]
    d: usize,
    /// Sleeve profile: identity, tanh or sin5.
    #[arg(long, default_value = "tanh", value_parser = profile_arg)]
    profile: BuiltinProfile,
    /// Divided-difference step, in (0, 1).
    #[arg(long = "h", default_value_t = 1e-3)]
    h: f64,
    /// Also recover the profile from this many ray samples and report its
    /// sup error on [0, 1].
    #[arg(long = "m-samples")]
    m_samples: Option<usize>,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct OgmArgs {
    /// Ambient dimension N.
    #[arg(long = "n")]
    n: usize,
    /// Dimension of P = L^perp (1 <= d < N).
    #[arg(long = "d")]
    d: usize,
    /// Sleeve profile: identity, tanh or sin5.
    #[arg(long, default_value = "tanh", value_parser = profile_arg)]
    profile: BuiltinProfile,
    /// Number of profile samples M along the chosen direction.
    #[arg(long = "m-samples", default_value_t = 64)]
    m_samples: usize,
    /// Rotation angle bounding the start subspace, in radians or as
    /// a multiple of pi (e.g. pi/3).
    #[arg(long = "init-angle", default_value = "pi/3", value_parser = parse_angle)]
    init_angle: f64,
    /// Measurement design for the objective: full or reduced.
    #[arg(long, default_value = "full", value_parser = design_arg)]
    design: DesignChoice,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct RetrievalArgs {
    /// Ambient dimension N.
    #[arg(long = "n")]
    n: usize,
    /// Rank d of the projection (1 <= d <= N; reduced design needs d < N).
    #[arg(long = "d")]
    d: usize,
    /// Measurement design: full or reduced.
    #[arg(long, default_value = "reduced", value_parser = design_arg)]
    design: DesignChoice,
    /// Number of random unequal pairs for the injectivity probe.
    #[arg(long, default_value_t = 1000)]
    probes: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// Experiment config file (key = value lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides out_dir from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run trials on the calling thread only.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Trials or aggregate CSV written by `experiment`.
    csv: PathBuf,
    /// Output directory for the SVG files.
    #[arg(long, default_value = "plots")]
    out: PathBuf,
}

fn recover_atpe(a: &AtpeArgs, out: &mut dyn Write) -> Result<()> {
    if a.d == 0 || a.d >= a.n {
        return Err(Error::InvalidDimension(format!("d = {} with N = {}", a.d, a.n)));
    }
    let mut rng = seeded(a.seed);
    let mut oracle = SleeveOracle::random(a.n, a.n - a.d, a.profile, &mut rng)?;
    let report = atpe(&mut oracle, a.d, a.h, &mut rng)?;
    let _ = writeln!(out, "hs_error: {:e}", report.hs_error);
    let _ = writeln!(out, "queries: {}", report.queries);
    if let Some(m) = a.m_samples {
        let core = report.estimate.to_subspace()?;
        let before = oracle.query_count();
        let g = recover_profile_after_atpe(&mut oracle, &core, m, a.h, &mut rng)?;
        let sup = (0..=1000)
            .map(|i| {
                let s = i as f64 / 1000.0;
                (g.eval(s) - a.profile.value(s)).abs()
            })
            .fold(0.0, f64::max);
        let _ = writeln!(out, "profile_error: {sup:e}");
        let _ = writeln!(out, "profile_queries: {}", oracle.query_count() - before);
    }
    Ok(())
}

fn recover_ogm(a: &OgmArgs, out: &mut dyn Write) -> Result<()> {
    if a.d == 0 || a.d >= a.n {
        return Err(Error::InvalidDimension(format!("d = {} with N = {}", a.d, a.n)));
    }
    let mut rng = seeded(a.seed);
    let mut oracle = SleeveOracle::random(a.n, a.d, a.profile, &mut rng)?;
    let init = random_rotation_within(oracle.hidden(), a.init_angle, &mut rng)?;
    let design = match a.design {
        DesignChoice::Full => full_design(a.n),
        DesignChoice::Reduced => reduced_design(a.n, a.d, &mut rng)?,
    };
    let init_error = init.hs_distance(oracle.hidden())?;
    let report = ogm_recover_with_design(
        &mut oracle,
        a.d,
        a.m_samples,
        design,
        &init,
        &SolverParams::default(),
        &mut rng,
    )?;
    let _ = writeln!(out, "init_error: {init_error:e}");
    let _ = writeln!(out, "hs_error: {:e}", report.hs_error);
    let _ = writeln!(out, "queries: {}", report.queries);
    let _ = writeln!(out, "iterations: {}", report.iterations);
    let _ = writeln!(out, "stalled: {}", report.stalled);
    Ok(())
}

fn retrieval(a: &RetrievalArgs, out: &mut dyn Write) -> Result<()> {
    if a.d == 0 || a.d > a.n {
        return Err(Error::InvalidDimension(format!("d = {} with N = {}", a.d, a.n)));
    }
    let mut rng = seeded(a.seed);
    let p = random_subspace(a.d, a.n, &mut rng)?.projection_matrix();
    let design = match a.design {
        DesignChoice::Full => full_design(a.n),
        DesignChoice::Reduced => reduced_design(a.n, a.d, &mut rng)?,
    };
    let m = measure(&p, &design)?;
    let back = match a.design {
        DesignChoice::Full => reconstruct_from_full(&m, a.n)?,
        DesignChoice::Reduced => reconstruct_from_reduced(&m, &design, a.n, a.d)?,
    };
    let _ = writeln!(out, "design: {}", a.design);
    let _ = writeln!(out, "measurements: {}", design.len());
    let _ = writeln!(out, "round_trip_error: {:e}", hs_distance(&back, &p)?);

    let mut collisions = 0;
    for _ in 0..a.probes {
        let h = random_subspace(a.d, a.n, &mut rng)?.projection_matrix();
        if check_injectivity_pair(&design, &p, &h)? {
            collisions += 1;
        }
    }
    let _ = writeln!(out, "injectivity_collisions: {collisions}/{}", a.probes);
    Ok(())
}

fn experiment(a: &ExperimentArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(dir) = &a.out {
        cfg.out_dir = dir.clone();
    }
    let exec = if a.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let result = run_experiment(&cfg, exec)?;
    let _ = writeln!(out, "trials: {}", result.rows.len());
    let _ = writeln!(out, "wrote {}", result.trials_csv.display());
    let _ = writeln!(out, "wrote {}", result.aggregate_csv.display());
    Ok(())
}

fn plot(a: &PlotArgs, out: &mut dyn Write) -> Result<()> {
    for path in emit_plots(&a.csv, &a.out)? {
        let _ = writeln!(out, "wrote {}", path.display());
    }
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { source, .. } if source.kind() == io::ErrorKind::NotFound => 2,
        _ => 1,
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code: 0 on success, 2 for usage errors and
/// missing input files, 1 for other failures.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    let result = match &cli.command {
        Command::RecoverAtpe(a) => recover_atpe(a, out),
        Command::RecoverOgm(a) => recover_ogm(a, out),
        Command::Retrieval(a) => retrieval(a, out),
        Command::Experiment(a) => experiment(a, out),
        Command::Plot(a) => plot(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// [`run`] against the process's stdout and stderr.
pub fn cli_entry<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    run(args, &mut stdout.lock(), &mut stderr.lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("linsleeve").chain(args.iter().copied());
        let code = run(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    fn value(out: &str, key: &str) -> f64 {
        out.lines()
            .find_map(|l| l.strip_prefix(&format!("{key}: ")))
            .unwrap_or_else(|| panic!("no {key} in {out}"))
            .split('/')
            .next()
            .unwrap()
            .parse()
            .unwrap()
    }

    #[test]
    fn recover_atpe_prints_error_and_queries() {
        let (code, out, _) = call(&["recover-atpe", "--n", "10", "--d", "1", "--profile", "tanh", "--h", "1e-3", "--seed", "7"]);
        assert_eq!(code, 0);
        assert!(value(&out, "hs_error") < 1e-2);
        assert_eq!(value(&out, "queries"), 63.0);
    }

    #[test]
    fn retrieval_reduced_round_trip() {
        let (code, out, _) = call(&["retrieval", "--n", "8", "--d", "3", "--design", "reduced", "--seed", "1"]);
        assert_eq!(code, 0, "{out}");
        assert!(value(&out, "round_trip_error") < 1e-8);
        assert_eq!(value(&out, "injectivity_collisions"), 0.0);
    }

    #[test]
    fn missing_config_exits_two() {
        let (code, _, err) = call(&["experiment", "--config", "missing.cfg"]);
        assert_eq!(code, 2);
        assert!(err.contains("missing.cfg") && err.to_lowercase().contains("no such file"), "{err}");
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(call(&["frobnicate"]).0, 2);
        assert_eq!(call(&["recover-atpe", "--n", "10", "--d", "1", "--bogus"]).0, 2);
        assert_eq!(call(&["recover-ogm", "--n", "10", "--d", "1", "--init-angle", "tau"]).0, 2);
    }

    #[test]
    fn runtime_errors_exit_one() {
        let (code, _, err) = call(&["recover-atpe", "--n", "5", "--d", "5"]);
        assert_eq!(code, 1);
        assert!(err.starts_with("error:"));
    }

    #[test]
    fn help_lists_every_flag() {
        let (code, out, _) = call(&["recover-ogm", "--help"]);
        assert_eq!(code, 0);
        for flag in ["--n", "--d", "--profile", "--m-samples", "--init-angle", "--design", "--seed"] {
            assert!(out.contains(flag), "{flag} missing from help");
        }
        let (_, out, _) = call(&["recover-atpe", "--help"]);
        assert!(out.contains("--h "));
        let (_, out, _) = call(&["experiment", "--help"]);
        assert!(out.contains("--config") && out.contains("--out"));
    }
}
