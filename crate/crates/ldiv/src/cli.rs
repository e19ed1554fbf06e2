//! Batch interface: CSV ingestion, job configuration and execution, report
//! emission, and a seeded synthetic-microdata generator.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baseline::{hilbert_partition, tp_plus};
use crate::error::{Error, Result};
use crate::metrics::{count_stars, count_suppressed, kl_divergence, materialize, SuppressedTable};
use crate::model::{group_by_qi, MicrodataTable, RowId, TableBuilder};
use crate::optimal::{optimal_two_diverse, DEFAULT_STAR_CAP, DEFAULT_TUPLE_CAP};
use crate::tp::{run_tp, TIE_BREAK_POLICY};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Tp,
    TpPlus,
    Hilbert,
    Matching,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Tp => "tp",
            Algorithm::TpPlus => "tp_plus",
            Algorithm::Hilbert => "hilbert",
            Algorithm::Matching => "matching",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tp" => Ok(Algorithm::Tp),
            "tp_plus" | "tp+" => Ok(Algorithm::TpPlus),
            "hilbert" => Ok(Algorithm::Hilbert),
            "matching" => Ok(Algorithm::Matching),
            other => Err(Error::Config(format!(
                "unknown algorithm {other:?}; expected tp, tp_plus, hilbert or matching"
            ))),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Column selection and validation options for CSV ingestion.
#[derive(Debug, Clone)]
pub struct LoadSpec {
    pub qi_columns: Vec<String>,
    pub sa_column: String,
    pub l: u32,
    pub declared_domains: Vec<(String, Vec<String>)>,
}

/// One anonymization job.
#[derive(Debug, Clone)]
pub struct JobConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    pub report: Option<PathBuf>,
    pub qi_columns: Vec<String>,
    pub sa_column: String,
    pub l: u32,
    pub algorithm: Algorithm,
    pub declared_domains: Vec<(String, Vec<String>)>,
    pub seed: u64,
    /// Size caps for the brute-force oracles, when tooling runs them.
    pub tuple_cap: usize,
    pub star_cap: usize,
}

impl JobConfig {
    pub fn new(
        input: PathBuf,
        output: PathBuf,
        qi: Vec<String>,
        sa: String,
        l: u32,
        algorithm: Algorithm,
    ) -> Self {
        JobConfig {
            input,
            output,
            report: None,
            qi_columns: qi,
            sa_column: sa,
            l,
            algorithm,
            declared_domains: Vec::new(),
            seed: 0,
            tuple_cap: DEFAULT_TUPLE_CAP,
            star_cap: DEFAULT_STAR_CAP,
        }
    }

    fn load_spec(&self) -> LoadSpec {
        LoadSpec {
            qi_columns: self.qi_columns.clone(),
            sa_column: self.sa_column.clone(),
            l: self.l,
            declared_domains: self.declared_domains.clone(),
        }
    }
}

/// Key/value run summary; field names are stable and documented in the README.
#[derive(Debug, Clone)]
pub struct Report {
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub s: usize,
    pub l: u32,
    pub algorithm: Algorithm,
    pub terminal_phase: Option<u8>,
    pub stars: u64,
    pub suppressed_tuples: u64,
    pub residue_size: u64,
    pub kl_divergence: f64,
    pub wall_time_ms: f64,
    pub tie_break_policy: &'static str,
}

impl Report {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        line("n", self.n.to_string());
        line("d", self.d.to_string());
        line("m", self.m.to_string());
        line("s", self.s.to_string());
        line("l", self.l.to_string());
        line("algorithm", format!("\"{}\"", self.algorithm));
        if let Some(phase) = self.terminal_phase {
            line("terminal_phase", phase.to_string());
        }
        line("stars", self.stars.to_string());
        line("suppressed_tuples", self.suppressed_tuples.to_string());
        line("residue_size", self.residue_size.to_string());
        line("kl_divergence", format!("{:.12}", self.kl_divergence));
        line("wall_time_ms", format!("{:.3}", self.wall_time_ms));
        line("tie_break_policy", format!("\"{}\"", self.tie_break_policy));
        out
    }
}

/// Load a CSV file into a microdata table, re-encoding SA labels densely and
/// validating global l-eligibility.
pub fn load_csv(path: &Path, spec: &LoadSpec) -> Result<MicrodataTable> {
    if spec.qi_columns.is_empty() {
        return Err(Error::Config("at least one QI column is required".into()));
    }
    if spec.qi_columns.iter().any(|c| c == &spec.sa_column) {
        return Err(Error::Config(format!(
            "SA column {:?} also listed as a QI column",
            spec.sa_column
        )));
    }
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Config(format!(
            "{}: empty input file",
            path.display()
        )));
    }
    let col_index = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::Config(format!("column {name:?} not found in {}", path.display()))
        })
    };
    let qi_idx: Vec<usize> = spec
        .qi_columns
        .iter()
        .map(|c| col_index(c))
        .collect::<Result<_>>()?;
    let sa_idx = col_index(&spec.sa_column)?;

    let mut builder = TableBuilder::new(&spec.qi_columns, &spec.sa_column);
    for (name, values) in &spec.declared_domains {
        builder.declare_qi_domain(name, values)?;
    }
    let mut count = 0usize;
    for record in reader.records() {
        let record = record?;
        let qi: Vec<&str> = qi_idx
            .iter()
            .map(|&i| record.get(i).unwrap_or_default())
            .collect();
        let sa = record.get(sa_idx).unwrap_or_default();
        builder.push_row(&qi, sa)?;
        count += 1;
    }
    if count == 0 {
        return Err(Error::Config(format!("{}: no data rows", path.display())));
    }
    let table = builder.finish()?;
    table.check_l_eligible(spec.l)?;
    Ok(table)
}

pub fn microdata_csv_string(table: &MicrodataTable) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = table
        .schema
        .qi_attrs
        .iter()
        .map(|a| a.name.as_str())
        .collect();
    header.push(&table.schema.sa_attr.name);
    w.write_record(&header)?;
    for row in &table.rows {
        let mut rec: Vec<&str> = row
            .qi
            .iter()
            .enumerate()
            .map(|(i, &v)| table.schema.qi_attrs[i].label(v))
            .collect();
        rec.push(table.schema.sa_label(row.sa));
        w.write_record(&rec)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Config(e.to_string()))?)
        .map_err(|e| Error::Config(e.to_string()))
}

pub fn write_microdata_csv(table: &MicrodataTable, path: &Path) -> Result<()> {
    std::fs::write(path, microdata_csv_string(table)?)?;
    Ok(())
}

/// Render the suppressed table; starred cells become the literal `*`.
pub fn suppressed_csv_string(st: &SuppressedTable) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = st.schema.qi_attrs.iter().map(|a| a.name.as_str()).collect();
    header.push(&st.schema.sa_attr.name);
    w.write_record(&header)?;
    for row in &st.rows {
        let mut rec: Vec<&str> = Vec::with_capacity(row.cells.len() + 1);
        for (i, cell) in row.cells.iter().enumerate() {
            rec.push(match cell {
                crate::metrics::Cell::Value(v) => st.schema.qi_attrs[i].label(*v),
                crate::metrics::Cell::Star => "*",
            });
        }
        rec.push(st.schema.sa_label(row.sa));
        w.write_record(&rec)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Config(e.to_string()))?)
        .map_err(|e| Error::Config(e.to_string()))
}

pub fn write_suppressed_csv(st: &SuppressedTable, path: &Path) -> Result<()> {
    std::fs::write(path, suppressed_csv_string(st)?)?;
    Ok(())
}

/// Execute one job: load, anonymize, write the suppressed CSV, write the
/// report (when a path is configured) and return it.
pub fn run_job(config: &JobConfig) -> Result<Report> {
    let table = load_csv(&config.input, &config.load_spec())?;
    let s = group_by_qi(&table).s();

    let started = Instant::now();
    let (partition, terminal_phase, residue_size): (Vec<Vec<RowId>>, Option<u8>, u64) =
        match config.algorithm {
            Algorithm::Tp => {
                let out = run_tp(&table, config.l)?;
                let residue = out.report.residue_size;
                (out.partition(), Some(out.report.terminal_phase), residue)
            }
            Algorithm::TpPlus => {
                let out = tp_plus(&table, config.l)?;
                let residue = out.report.residue_size;
                (out.partition, Some(out.report.terminal_phase), residue)
            }
            Algorithm::Hilbert => (hilbert_partition(&table, config.l)?, None, 0),
            Algorithm::Matching => {
                if table.m() != 2 {
                    return Err(Error::Config(format!(
                        "algorithm \"matching\" needs exactly 2 SA values, input has {}",
                        table.m()
                    )));
                }
                if config.l != 2 {
                    return Err(Error::Config(
                        "algorithm \"matching\" requires l = 2".into(),
                    ));
                }
                (optimal_two_diverse(&table)?.partition(), None, 0)
            }
        };
    let wall_time_ms = started.elapsed().as_secs_f64() * 1000.0;

    let st = materialize(&table, &partition)?;
    let report = Report {
        n: table.n(),
        d: table.d(),
        m: table.m(),
        s,
        l: config.l,
        algorithm: config.algorithm,
        terminal_phase,
        stars: count_stars(&st),
        suppressed_tuples: count_suppressed(&st),
        residue_size,
        kl_divergence: kl_divergence(&table, &st)?,
        wall_time_ms,
        tie_break_policy: TIE_BREAK_POLICY,
    };
    write_suppressed_csv(&st, &config.output)?;
    if let Some(report_path) = &config.report {
        std::fs::write(report_path, report.to_text())?;
    }
    Ok(report)
}

/// Parameters for the synthetic generator. QI values are uniform per column;
/// SA values follow a Zipf-like distribution with the given skew exponent and
/// are repaired round-robin until the table is globally l-eligible.
#[derive(Debug, Clone)]
pub struct SynthParams {
    pub rows: usize,
    pub qi_domain_sizes: Vec<usize>,
    pub sa_values: usize,
    pub skew: f64,
    pub l: u32,
    pub seed: u64,
}

pub fn generate_synthetic(p: &SynthParams) -> Result<MicrodataTable> {
    let n = p.rows;
    let m = p.sa_values;
    let l = p.l;
    if n == 0 || m == 0 || p.qi_domain_sizes.is_empty() || p.qi_domain_sizes.contains(&0) {
        return Err(Error::Config(
            "generator parameters must be positive".into(),
        ));
    }
    if l < 2 {
        return Err(Error::Config("l must be at least 2".into()));
    }
    if (m as u64) < l as u64 {
        return Err(Error::Config(format!("need m >= l, got m = {m}, l = {l}")));
    }
    let cap = n as u64 / l as u64;
    let balanced_max = n.div_ceil(m) as u64;
    if n < l as usize || balanced_max > cap {
        return Err(Error::Config(format!(
            "infeasible: {n} rows over {m} SA values cannot be {l}-eligible"
        )));
    }
    if p.skew < 0.0 {
        return Err(Error::Config("skew must be non-negative".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let weights: Vec<f64> = (1..=m)
        .map(|rank| 1.0 / (rank as f64).powf(p.skew))
        .collect();
    let dist = WeightedIndex::new(&weights).map_err(|e| Error::Config(e.to_string()))?;

    let mut qi_rows: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut sa: Vec<usize> = Vec::with_capacity(n);
    for _ in 0..n {
        qi_rows.push(
            p.qi_domain_sizes
                .iter()
                .map(|&k| rng.gen_range(0..k))
                .collect(),
        );
        sa.push(dist.sample(&mut rng));
    }

    // Repair: move rows off the most frequent SA value, cycling the target
    // through the under-cap values, until the pillar fits under n / l.
    let mut by_value: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (i, &v) in sa.iter().enumerate() {
        by_value[v].push(i);
    }
    let mut target = 0usize;
    loop {
        let pillar = (0..m)
            .max_by_key(|&v| (by_value[v].len(), std::cmp::Reverse(v)))
            .unwrap();
        if by_value[pillar].len() as u64 <= cap {
            break;
        }
        let mut hops = 0;
        while target == pillar || by_value[target].len() as u64 >= cap {
            target = (target + 1) % m;
            hops += 1;
            if hops > m {
                return Err(Error::Invariant("SA repair found no target value".into()));
            }
        }
        let row = by_value[pillar].pop().unwrap();
        sa[row] = target;
        by_value[target].push(row);
        target = (target + 1) % m;
    }

    let names: Vec<String> = (1..=p.qi_domain_sizes.len())
        .map(|i| format!("q{i}"))
        .collect();
    let mut b = TableBuilder::new(&names, "sa");
    for (i, &size) in p.qi_domain_sizes.iter().enumerate() {
        let domain: Vec<String> = (0..size).map(|v| format!("v{v}")).collect();
        b.declare_qi_domain(&names[i], &domain)?;
    }
    for (qi, &v) in qi_rows.iter().zip(&sa) {
        let labels: Vec<String> = qi.iter().map(|&x| format!("v{x}")).collect();
        b.push_row(&labels, &format!("s{}", v + 1))?;
    }
    let table = b.finish()?;
    debug_assert!(table.check_l_eligible(l).is_ok());
    Ok(table)
}
