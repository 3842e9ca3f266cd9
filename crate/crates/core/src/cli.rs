//! Command line front end. Every subcommand writes CSV preceded by a `#`
//! header echoing its resolved configuration.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::cv::kfold_cv;
use crate::dataset::{fmt_f64, Dataset};
use crate::dgp::{Dgp, DgpId};
use crate::error::{Error, Result};
use crate::harness::{run_experiment_with_workers, write_experiment_csv, ExperimentConfig};
use crate::model::{parse_columns, ModelSpec};
use crate::num::RngStream;
use crate::optimism::{debiased_risk_with, BandwidthChoice, KappaRule};
use crate::oracle::{mc_risk, McRiskOptions};
use crate::qr::{fit, SolverOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "qrisk", version, about = "Predictive risk estimation for linear quantile regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a linear quantile regression and print its coefficients.
    Fit(FitArgs),
    /// In-sample, optimism and de-biased risk of one model.
    Risk(RiskArgs),
    /// K-fold cross-validated risk of one model.
    Cv(CvArgs),
    /// Monte Carlo predictive risk and optimism under a known DGP.
    Oracle(OracleArgs),
    /// Draw a data set from one of the simulation designs.
    Simulate(SimulateArgs),
    /// Run a replicated experiment from a config file.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Quantile level in (0, 1).
    #[arg(long)]
    tau: f64,
    /// 1-based predictor columns, e.g. `1,2,3` or `1-4,7`.
    #[arg(long, default_value = "")]
    cols: String,
    /// Include an intercept column.
    #[arg(long)]
    intercept: bool,
}

impl ModelArgs {
    fn model(&self) -> Result<ModelSpec> {
        ModelSpec::new(parse_columns(&self.cols)?, self.intercept)
    }
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// CSV with header y,z1,...,zd.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Snap the interior-point solution to a nearby basic solution.
    #[arg(long)]
    polish: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct RiskArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Fixed kernel half-width; the rule of thumb is used when omitted.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Residual scale rule for the rule-of-thumb bandwidth: sd, sd-iqr134, se.
    #[arg(long, default_value = "sd")]
    kappa: KappaRule,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct CvArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long)]
    dgp: DgpId,
    /// Number of predictors drawn; at least 4 and at least the largest column.
    #[arg(long)]
    p: Option<usize>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    /// Fresh evaluation points per replication.
    #[arg(long, default_value_t = 5)]
    eval: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    dgp: DgpId,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    p: usize,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// `key = value` config file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Overrides the config's `out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_USAGE
            }
        }
    }
}

fn dispatch(command: Command, stdout: &mut dyn Write) -> Result<()> {
    match command {
        Command::Fit(a) => with_output(a.out.out.as_deref(), stdout, |w| cmd_fit(&a, w)),
        Command::Risk(a) => with_output(a.out.out.as_deref(), stdout, |w| cmd_risk(&a, w)),
        Command::Cv(a) => with_output(a.out.out.as_deref(), stdout, |w| cmd_cv(&a, w)),
        Command::Oracle(a) => with_output(a.out.out.as_deref(), stdout, |w| cmd_oracle(&a, w)),
        Command::Simulate(a) => with_output(a.out.out.as_deref(), stdout, |w| cmd_simulate(&a, w)),
        Command::Experiment(a) => cmd_experiment(&a, stdout),
    }
}

/// Output goes to memory first so a failing command leaves no partial file.
fn with_output(
    path: Option<&Path>,
    stdout: &mut dyn Write,
    body: impl FnOnce(&mut Vec<u8>) -> Result<()>,
) -> Result<()> {
    let mut buf = Vec::new();
    body(&mut buf)?;
    match path {
        Some(p) if p != Path::new("-") => {
            let mut f = BufWriter::new(File::create(p)?);
            f.write_all(&buf)?;
            f.flush()?;
        }
        _ => {
            stdout.write_all(&buf)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn header(w: &mut dyn Write, command: &str, entries: &[(&str, String)]) -> io::Result<()> {
    writeln!(w, "# qrisk {command}")?;
    for (k, v) in entries {
        writeln!(w, "# {k} = {v}")?;
    }
    Ok(())
}

fn load(path: &Path) -> Result<Dataset> {
    let f = File::open(path).map_err(|e| Error::InvalidInput(format!("cannot open {}: {e}", path.display())))?;
    Dataset::read_csv(BufReader::new(f))
}

fn model_entries(m: &ModelArgs, model: &ModelSpec) -> Vec<(&'static str, String)> {
    vec![("tau", fmt_f64(m.tau)), ("model", model.to_string())]
}

fn cmd_fit(a: &FitArgs, w: &mut Vec<u8>) -> Result<()> {
    let data = load(&a.data)?;
    let model = a.model.model()?;
    let opts = SolverOptions { polish: a.polish, ..Default::default() };
    let f = fit(&data, &model, a.model.tau, &opts)?;
    let mut entries = vec![("data", a.data.display().to_string()), ("n", data.n().to_string())];
    entries.extend(model_entries(&a.model, &model));
    entries.push(("polish", a.polish.to_string()));
    header(w, "fit", &entries)?;
    writeln!(w, "name,value")?;
    for (name, v) in model.column_names().iter().zip(&f.theta) {
        writeln!(w, "{name},{}", fmt_f64(*v))?;
    }
    writeln!(w, "objective,{}", fmt_f64(f.objective))?;
    writeln!(w, "duality_gap,{}", fmt_f64(f.duality_gap))?;
    writeln!(w, "iterations,{}", f.iterations)?;
    Ok(())
}

fn cmd_risk(a: &RiskArgs, w: &mut Vec<u8>) -> Result<()> {
    let data = load(&a.data)?;
    let model = a.model.model()?;
    let f = fit(&data, &model, a.model.tau, &SolverOptions::default())?;
    let choice = match a.bandwidth {
        Some(h) => BandwidthChoice::Fixed(h),
        None => BandwidthChoice::Powell { kappa: a.kappa, scale: 1.0 },
    };
    let r = debiased_risk_with(&data, &model, &f, &choice)?;
    let mut entries = vec![("data", a.data.display().to_string()), ("n", data.n().to_string())];
    entries.extend(model_entries(&a.model, &model));
    entries.push(("bandwidth", a.bandwidth.map(fmt_f64).unwrap_or_else(|| "rule".into())));
    entries.push(("kappa", a.kappa.to_string()));
    header(w, "risk", &entries)?;
    writeln!(w, "tau,model,h,in_sample,b_hat,pr_debiased,d0_min_eig")?;
    writeln!(
        w,
        "{},{},{},{},{},{},{}",
        fmt_f64(r.tau),
        r.model,
        fmt_f64(r.bandwidth),
        fmt_f64(r.in_sample),
        fmt_f64(r.b_hat),
        fmt_f64(r.pr_debiased),
        fmt_f64(r.d0_min_eig)
    )?;
    Ok(())
}

fn cmd_cv(a: &CvArgs, w: &mut Vec<u8>) -> Result<()> {
    let data = load(&a.data)?;
    let model = a.model.model()?;
    let cv = kfold_cv(&data, &model, a.model.tau, a.k, a.seed)?;
    let mut entries = vec![("data", a.data.display().to_string()), ("n", data.n().to_string())];
    entries.extend(model_entries(&a.model, &model));
    entries.push(("k", a.k.to_string()));
    entries.push(("seed", a.seed.to_string()));
    header(w, "cv", &entries)?;
    writeln!(w, "tau,model,k,cv_risk,in_sample,cv_optimism")?;
    writeln!(
        w,
        "{},{},{},{},{},{}",
        fmt_f64(a.model.tau),
        model,
        cv.k,
        fmt_f64(cv.cv_risk),
        fmt_f64(cv.in_sample),
        fmt_f64(cv.cv_optimism)
    )?;
    Ok(())
}

fn cmd_oracle(a: &OracleArgs, w: &mut Vec<u8>) -> Result<()> {
    let model = a.model.model()?;
    let p = a.p.unwrap_or_else(|| model.indices().last().copied().unwrap_or(0).max(4));
    let dgp = Dgp::new(a.dgp, p)?;
    model.check_dimension(p)?;
    let opts = McRiskOptions { reps: a.reps, eval_samples: a.eval, seed: a.seed };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start {} workers: {e}", a.workers)))?;
    let o = pool.install(|| mc_risk(&dgp, &model, a.model.tau, a.n, &opts))?;
    let mut entries = vec![("dgp", a.dgp.to_string()), ("p", p.to_string()), ("n", a.n.to_string())];
    entries.extend(model_entries(&a.model, &model));
    entries.push(("reps", a.reps.to_string()));
    entries.push(("eval", a.eval.to_string()));
    entries.push(("seed", a.seed.to_string()));
    header(w, "oracle", &entries)?;
    writeln!(w, "tau,model,n,reps,pr,pr_se,optimism,optimism_se,in_sample")?;
    writeln!(
        w,
        "{},{},{},{},{},{},{},{},{}",
        fmt_f64(a.model.tau),
        model,
        a.n,
        o.reps,
        fmt_f64(o.pr),
        fmt_f64(o.pr_se),
        fmt_f64(o.optimism),
        fmt_f64(o.optimism_se),
        fmt_f64(o.in_sample)
    )?;
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs, w: &mut Vec<u8>) -> Result<()> {
    let dgp = Dgp::new(a.dgp, a.p)?;
    let data = dgp.sample(a.n, &RngStream::new(a.seed, 0))?;
    header(
        w,
        "simulate",
        &[("dgp", a.dgp.to_string()), ("n", a.n.to_string()), ("p", a.p.to_string()), ("seed", a.seed.to_string())],
    )?;
    data.write_csv(w)
}

fn cmd_experiment(a: &ExperimentArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut cfg = ExperimentConfig::from_file(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &a.out {
        cfg.out = out.clone();
    }
    let output = run_experiment_with_workers(&cfg, a.workers)?;
    let mut buf = Vec::new();
    write_experiment_csv(&cfg, &output, &mut buf)?;
    // Rows aggregated before a failure are still written.
    let out = cfg.out.clone();
    with_output(Some(&out), stdout, |w| {
        w.extend_from_slice(&buf);
        Ok(())
    })?;
    match output.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
