#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use covprior::casestudies::{
    gauss_stdmean, marginalization, multinomial, multinormal, neyman_scott, stein, CaseStudyError,
};
use covprior::fixture::{self, Fixture};
use covprior::geometry::{fisher_information, models, LogDensityModel};
use covprior::oracle::{IntegrationSpec, RNG_VERSION};
use num_rational::Ratio;
use output::{Cell, OutTable, Output};
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use thiserror::Error;

/// Directory used for output files when `--output` is not given.
const OUTPUT_DIR_VAR: &str = "COVPRIOR_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "covprior",
    version,
    about = "Covariant priors, evidences and the classic prior paradoxes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    format: Format,
    /// Output file; defaults to $COVPRIOR_OUTPUT_DIR/<subcommand>.<format>, else stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Seed for Monte-Carlo checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Relative tolerance for quadrature checks.
    #[arg(long, default_value_t = 1e-9, global = true)]
    rel_tol: f64,
    /// Omit the timestamp so identical runs give identical bytes.
    #[arg(long, global = true)]
    deterministic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelName {
    GaussianLocation,
    Gaussian,
    Exponential,
    Bernoulli,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fisher information and Jeffreys density of a built-in model.
    Fisher {
        #[arg(long, value_enum)]
        model: ModelName,
        /// Parameter point, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        alpha: Vec<f64>,
        /// Known σ of the location model.
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Sweep for one-parameter models, `min:max:count` or `log:min:max:count`.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Evidences of standardized data under the μ and λ = μ/σ parameterizations.
    GaussStdmean {
        #[arg(long, default_value_t = 2)]
        n_min: usize,
        #[arg(long, default_value_t = 25)]
        n_max: usize,
        /// Add 2-D quadrature columns next to the closed forms.
        #[arg(long)]
        with_oracle: bool,
    },
    /// Means of m measurands with a shared unknown variance.
    Multinormal {
        #[arg(long, default_value_t = 12)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        pooled_s2: f64,
        /// Sample means; defaults to zeros.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        xbar: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        q: usize,
        /// Lower bound of σ, as an exact ratio such as 1/1000.
        #[arg(long, default_value = "1/1000")]
        sigma0: Ratio<i64>,
        /// Volume of the μ region, as an exact ratio.
        #[arg(long, default_value = "1000000")]
        v_mu: Ratio<i64>,
    },
    /// Posterior over the number of multinomial cells.
    Multinomial {
        #[arg(long, value_delimiter = ',', required = true)]
        counts: Vec<u64>,
        #[arg(long, default_value_t = 100)]
        m_max: usize,
        /// Draws for a Monte-Carlo check of the smallest model's evidence; 0 skips it.
        #[arg(long, default_value_t = 0)]
        mc_draws: usize,
    },
    /// Stein's paradox: hyper-averaged moments of the means.
    Stein {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x: Vec<f64>,
    },
    /// Neyman–Scott: averaging the variance models over ζ₀.
    NeymanScott {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        s2: f64,
        #[arg(long, default_value = "0.01:8:400")]
        zeta0_grid: String,
    },
    /// Marginalization paradox: posterior moments of ζ.
    Marginalization {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        s2: f64,
    },
    /// Re-run every entry of an oracle fixture file.
    Verify { path: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Fisher { .. } => "fisher",
            Command::GaussStdmean { .. } => "gauss-stdmean",
            Command::Multinormal { .. } => "multinormal",
            Command::Multinomial { .. } => "multinomial",
            Command::Stein { .. } => "stein",
            Command::NeymanScott { .. } => "neyman-scott",
            Command::Marginalization { .. } => "marginalization",
            Command::Verify { .. } => "verify",
        }
    }
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    /// Verification ran but some entries failed.
    #[error("{0} fixture entries failed")]
    Failed(usize),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Numerical(_) => "numerical",
            CliError::Io(_) => "io",
            CliError::Failed(_) => "verification",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

impl From<CaseStudyError> for CliError {
    fn from(e: CaseStudyError) -> Self {
        match e {
            CaseStudyError::Domain(_) | CaseStudyError::MomentUndefined { .. } | CaseStudyError::Infeasible(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    message: String,
    exit_code: u8,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report_error(&CliError::Usage(e.to_string().trim_end().to_string())),
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report_error(&e),
    }
}

fn report_error(e: &CliError) -> ExitCode {
    let rec = ErrorRecord {
        error: e.kind(),
        message: e.to_string(),
        exit_code: e.exit_code(),
    };
    eprintln!("{}", serde_json::to_string(&rec).unwrap_or_else(|_| e.to_string()));
    ExitCode::from(e.exit_code())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let c = &cli.common;
    if !(c.rel_tol > 0.0) {
        return Err(CliError::Usage(format!(
            "--rel-tol must be positive (got {})",
            c.rel_tol
        )));
    }
    let spec = IntegrationSpec::quadrature(c.rel_tol);
    let meta = metadata(cli);
    let mut failures = 0;
    let out = match &cli.command {
        Command::Fisher {
            model,
            alpha,
            sigma,
            grid,
        } => fisher(meta, *model, alpha, *sigma, grid.as_deref(), &spec)?,
        Command::GaussStdmean {
            n_min,
            n_max,
            with_oracle,
        } => {
            let report = gauss_stdmean::gauss_stdmean_report(*n_min, *n_max)?;
            let mut out = Output::from_report(meta, &report);
            if *with_oracle {
                add_gauss_oracle(&mut out, *n_min, *n_max, &spec)?;
            }
            out
        }
        Command::Multinormal {
            m,
            n,
            pooled_s2,
            xbar,
            q,
            sigma0,
            v_mu,
        } => {
            let xbar = if xbar.is_empty() { vec![0.0; *m] } else { xbar.clone() };
            let input = multinormal::MultinormalInput {
                m: *m,
                n: *n,
                pooled_s2: *pooled_s2,
                xbar,
                q: *q,
                sigma0: *sigma0,
                v_mu: *v_mu,
            };
            Output::from_report(meta, &multinormal::multinormal_summary(&input)?)
        }
        Command::Multinomial {
            counts,
            m_max,
            mc_draws,
        } => {
            let input = multinomial::MultinomialInput {
                counts: counts.clone(),
                m_max: *m_max,
            };
            input.validate()?;
            let mut report = multinomial::multinomial_report(&input)?;
            if *mc_draws > 0 {
                let m = input.m_min();
                let mc = multinomial::evidence_by_monte_carlo(counts, m, *mc_draws, c.seed.unwrap_or(0))?;
                report.scalar("mc_evidence_at_m_min", mc.value);
                report.scalar("mc_std_error", mc.error);
                report.scalar(
                    "closed_evidence_at_m_min",
                    multinomial::ln_evidence::<f64>(counts, m)?.exp(),
                );
            }
            Output::from_report(meta, &report)
        }
        Command::Stein { x } => {
            let input = stein::SteinInput::new(x.clone())?;
            Output::from_report(meta, &stein::stein_report(&input)?)
        }
        Command::NeymanScott { m, s2, zeta0_grid } => {
            let grid = parse_grid(zeta0_grid)?;
            let input = neyman_scott::NeymanScottInput::new(*m, *s2);
            Output::from_report(meta, &neyman_scott::neyman_scott_report(&input, &grid)?)
        }
        Command::Marginalization { m, s2 } => {
            Output::from_report(meta, &marginalization::marginalization_report(*m, *s2)?)
        }
        Command::Verify { path } => {
            let (out, failed) = verify(meta, path)?;
            failures = failed;
            out
        }
    };
    emit(cli, &out)?;
    if failures > 0 {
        return Err(CliError::Failed(failures));
    }
    Ok(())
}

fn metadata(cli: &Cli) -> Vec<(String, String)> {
    let c = &cli.common;
    let mut m = vec![
        ("program".to_string(), "covprior".to_string()),
        ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("subcommand".to_string(), cli.command.name().to_string()),
        (
            "seed".to_string(),
            c.seed.map(|s| s.to_string()).unwrap_or_else(|| "none".into()),
        ),
        ("rng".to_string(), RNG_VERSION.to_string()),
        ("rel_tol".to_string(), format!("{:e}", c.rel_tol)),
        ("fixture_version".to_string(), fixture::FIXTURE_VERSION.to_string()),
    ];
    if !c.deterministic {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        m.push(("timestamp_unix".to_string(), secs.to_string()));
    }
    m
}

fn emit(cli: &Cli, out: &Output) -> Result<(), CliError> {
    let c = &cli.common;
    let path = match (&c.output, std::env::var_os(OUTPUT_DIR_VAR)) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(dir)) => Some(PathBuf::from(dir).join(format!("{}.{}", cli.command.name(), c.format.ext()))),
        (None, None) => None,
    };
    let mut w: Box<dyn Write> = match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    };
    match c.format {
        Format::Csv => output::write_csv(out, &mut *w)?,
        Format::Json => output::write_json(out, &mut *w)?,
    }
    w.flush()?;
    Ok(())
}

/// `min:max:count`, or `log:min:max:count` for geometric spacing.
fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("bad grid '{s}'; expected min:max:count or log:min:max:count"));
    let (log, body) = match s.strip_prefix("log:") {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let parts: Vec<&str> = body.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if count < 2 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() || (log && !(lo > 0.0)) {
        return Err(bad());
    }
    let step = |i: usize| i as f64 / (count - 1) as f64;
    Ok((0..count)
        .map(|i| match i {
            0 => lo,
            _ if i == count - 1 => hi,
            _ if log => (lo.ln() + (hi.ln() - lo.ln()) * step(i)).exp(),
            _ => lo + (hi - lo) * step(i),
        })
        .collect())
}

fn build_model(name: ModelName, sigma: f64) -> Result<LogDensityModel<f64>, CliError> {
    let m = match name {
        ModelName::GaussianLocation => models::gaussian_location(sigma),
        ModelName::Gaussian => models::gaussian(),
        ModelName::Exponential => models::exponential_rate(),
        ModelName::Bernoulli => models::bernoulli(),
    };
    m.map_err(|e| CliError::Usage(e.to_string()))
}

fn fisher(
    meta: Vec<(String, String)>,
    name: ModelName,
    alpha: &[f64],
    sigma: f64,
    grid: Option<&str>,
    spec: &IntegrationSpec<f64>,
) -> Result<Output, CliError> {
    let model = build_model(name, sigma)?;
    let dim = model.param_dim();
    let numerical = |e: covprior::geometry::GeometryError| CliError::Numerical(e.to_string());
    let mut tables = Vec::new();
    if !alpha.is_empty() {
        if alpha.len() != dim {
            return Err(CliError::Usage(format!(
                "--alpha needs {dim} values for this model, got {}",
                alpha.len()
            )));
        }
        if !model.support().contains(alpha) {
            return Err(CliError::Usage(format!(
                "--alpha {alpha:?} is outside the parameter support"
            )));
        }
        let j = fisher_information(&model, alpha, spec).map_err(numerical)?;
        let mut t = OutTable::new("fisher", &["row", "col", "value"]);
        for r in 0..dim {
            for c in 0..dim {
                t.push(vec![(r as f64).into(), (c as f64).into(), j.matrix[(r, c)].into()]);
            }
        }
        let mut s = OutTable::new("scalars", &["name", "value"]);
        s.push(vec!["ln_jeffreys".into(), j.half_log_det().map_err(numerical)?.into()]);
        s.push(vec!["error".into(), j.error.into()]);
        tables.push(s);
        tables.push(t);
    }
    if let Some(g) = grid {
        if dim != 1 {
            return Err(CliError::Usage("--grid needs a one-parameter model".into()));
        }
        let mut t = OutTable::new("jeffreys", &["alpha", "fisher", "ln_jeffreys"]);
        for a in parse_grid(g)? {
            if !model.support().contains(&[a]) {
                return Err(CliError::Usage(format!(
                    "grid point {a} is outside the parameter support"
                )));
            }
            let j = fisher_information(&model, &[a], spec).map_err(numerical)?;
            let v = j.matrix[(0, 0)];
            t.push(vec![a.into(), v.into(), (0.5 * v.ln()).into()]);
        }
        tables.push(t);
    }
    if tables.is_empty() {
        return Err(CliError::Usage("fisher needs --alpha or --grid".into()));
    }
    Ok(Output { metadata: meta, tables })
}

fn add_gauss_oracle(out: &mut Output, n_min: usize, n_max: usize, spec: &IntegrationSpec<f64>) -> Result<(), CliError> {
    let mut cols = Vec::new();
    for n in n_min..=n_max {
        let z1 = gauss_stdmean::evidence_mu_by_quadrature(n, spec)?;
        let z2 = gauss_stdmean::evidence_lambda_by_quadrature(n, spec)?;
        cols.push((z1.ln_value.exp(), z2.ln_value.exp()));
    }
    let t = out
        .table_mut("evidence")
        .ok_or_else(|| CliError::Numerical("evidence table missing".into()))?;
    t.columns.push("z_mu_quadrature".into());
    t.columns.push("z_lambda_quadrature".into());
    for (row, (a, b)) in t.rows.iter_mut().zip(cols) {
        row.push(Cell::Num(a));
        row.push(Cell::Num(b));
    }
    Ok(())
}

fn verify(mut meta: Vec<(String, String)>, path: &PathBuf) -> Result<(Output, usize), CliError> {
    let text = std::fs::read_to_string(path)?;
    let fx = Fixture::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let report = fixture::verify(&fx);
    for w in &report.warnings {
        eprintln!("{}", serde_json::json!({ "warning": w }));
    }
    meta.push(("fixture".into(), path.display().to_string()));
    meta.push(("entries".into(), report.outcomes.len().to_string()));
    meta.push(("failures".into(), report.failures().to_string()));
    let mut t = OutTable::new(
        "verify",
        &[
            "line",
            "name",
            "expected",
            "actual",
            "deviation",
            "tolerance",
            "status",
            "message",
        ],
    );
    for o in &report.outcomes {
        let num = |v: Option<f64>| v.map(Cell::Num).unwrap_or_else(|| Cell::Text(String::new()));
        t.push(vec![
            (o.line as f64).into(),
            o.name.as_str().into(),
            o.expected.into(),
            num(o.actual),
            num(o.deviation),
            o.tolerance.into(),
            if o.pass { "pass" } else { "fail" }.into(),
            o.message.clone().unwrap_or_default().into(),
        ]);
    }
    Ok((
        Output {
            metadata: meta,
            tables: vec![t],
        },
        report.failures(),
    ))
}
