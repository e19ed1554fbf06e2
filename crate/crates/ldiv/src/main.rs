use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ldiv::cli::{
    generate_synthetic, run_job, write_microdata_csv, Algorithm, JobConfig, SynthParams,
};
use ldiv::error::{Error, Result};
use ldiv::gadget::{build_reduction, ReductionInstance};

/// Anonymize tabular microdata into l-diverse suppressed tables.
#[derive(Parser)]
#[command(name = "ldiv", version, about, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    #[command(flatten)]
    job: JobArgs,
}

#[derive(Args)]
struct JobArgs {
    /// Input CSV file, or a directory of CSV files for batch mode.
    #[arg(long)]
    input: Option<PathBuf>,

    /// Output CSV path (a directory in batch mode).
    #[arg(long)]
    output: Option<PathBuf>,

    /// Report path (a directory in batch mode); the report is always printed.
    #[arg(long)]
    report: Option<PathBuf>,

    /// Comma-separated QI column names.
    #[arg(long, value_delimiter = ',')]
    qi: Vec<String>,

    /// Sensitive attribute column name.
    #[arg(long)]
    sa: Option<String>,

    /// Diversity parameter, at least 2.
    #[arg(long)]
    l: Option<u32>,

    /// Algorithm: tp, tp_plus, hilbert or matching.
    #[arg(long, default_value = "tp")]
    algo: String,

    /// Seed recorded in the job configuration.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Declared domain for a column, as "column=v1|v2|...". Repeatable.
    #[arg(long = "domain")]
    domains: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic microdata with a skewed SA distribution.
    Gen(GenArgs),
    /// Emit a matching-based hard instance as CSV.
    Gadget(GadgetArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Number of rows.
    #[arg(long)]
    rows: usize,

    /// Comma-separated QI domain sizes, one per column.
    #[arg(long, value_delimiter = ',')]
    domains: Vec<usize>,

    /// Number of distinct SA values.
    #[arg(long = "sa-values")]
    sa_values: usize,

    /// Zipf skew exponent of the SA distribution (0 = uniform).
    #[arg(long, default_value_t = 0.0)]
    skew: f64,

    /// Diversity parameter the table is repaired towards.
    #[arg(long)]
    l: u32,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct GadgetArgs {
    /// Dimension size n; omit to emit the built-in 6-point demo instance.
    #[arg(long)]
    n: Option<usize>,

    /// Number of points (columns), at least n.
    #[arg(long)]
    d: Option<usize>,

    /// Number of distinct SA values, in [3, 3n].
    #[arg(long)]
    m: Option<usize>,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long)]
    output: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Some(Command::Gen(args)) => run_gen(args),
        Some(Command::Gadget(args)) => run_gadget(args),
        None => run_anonymize(cli.job),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn parse_domains(raw: &[String]) -> Result<Vec<(String, Vec<String>)>> {
    raw.iter()
        .map(|spec| {
            let (col, values) = spec.split_once('=').ok_or_else(|| {
                Error::Config(format!("bad --domain {spec:?}, expected column=v1|v2"))
            })?;
            Ok((
                col.to_string(),
                values.split('|').map(str::to_string).collect(),
            ))
        })
        .collect()
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::Config(format!("missing required flag --{flag}")))
}

fn run_anonymize(args: JobArgs) -> Result<()> {
    let input = require(args.input, "input")?;
    let output = require(args.output, "output")?;
    let sa = require(args.sa, "sa")?;
    let l = require(args.l, "l")?;
    if args.qi.is_empty() {
        return Err(Error::Config("missing required flag --qi".into()));
    }
    let algorithm: Algorithm = args.algo.parse()?;
    let declared = parse_domains(&args.domains)?;

    let mut jobs: Vec<JobConfig> = Vec::new();
    if input.is_dir() {
        std::fs::create_dir_all(&output)?;
        if let Some(report_dir) = &args.report {
            std::fs::create_dir_all(report_dir)?;
        }
        let mut entries: Vec<PathBuf> = std::fs::read_dir(&input)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
            .collect();
        entries.sort();
        if entries.is_empty() {
            return Err(Error::Config(format!(
                "no CSV files in {}",
                input.display()
            )));
        }
        for path in entries {
            let name = path.file_name().unwrap().to_owned();
            let mut config = JobConfig::new(
                path.clone(),
                output.join(&name),
                args.qi.clone(),
                sa.clone(),
                l,
                algorithm,
            );
            config.report = args.report.as_ref().map(|dir| {
                let mut report_name = name.clone();
                report_name.push(".report");
                dir.join(report_name)
            });
            config.declared_domains = declared.clone();
            config.seed = args.seed;
            jobs.push(config);
        }
    } else {
        let mut config = JobConfig::new(input, output, args.qi, sa, l, algorithm);
        config.report = args.report;
        config.declared_domains = declared;
        config.seed = args.seed;
        jobs.push(config);
    }

    for config in &jobs {
        let report = run_job(config)?;
        if jobs.len() > 1 {
            println!("# {}", config.input.display());
        }
        print!("{}", report.to_text());
    }
    Ok(())
}

fn run_gen(args: GenArgs) -> Result<()> {
    let params = SynthParams {
        rows: args.rows,
        qi_domain_sizes: args.domains,
        sa_values: args.sa_values,
        skew: args.skew,
        l: args.l,
        seed: args.seed,
    };
    let table = generate_synthetic(&params)?;
    write_microdata_csv(&table, &args.output)?;
    println!(
        "wrote {} rows x {} QI attributes ({} SA values) to {}",
        table.n(),
        table.d(),
        table.m(),
        args.output.display()
    );
    Ok(())
}

fn run_gadget(args: GadgetArgs) -> Result<()> {
    let instance = match args.n {
        None => ReductionInstance::demo(),
        Some(n) => {
            let d = require(args.d, "d")?;
            let m = require(args.m, "m")?;
            ReductionInstance::random(n, d, m, args.seed)?.0
        }
    };
    let table = build_reduction(&instance)?;
    write_microdata_csv(&table, &args.output)?;
    println!(
        "wrote gadget table: {} rows, {} columns, m = {} to {}",
        table.n(),
        table.d(),
        instance.m,
        args.output.display()
    );
    Ok(())
}
