//! `citescope` command line: `env`, `factors`, `validate`.
//!
//! Settings come from flags, then an optional TOML config file (`--config`),
//! then defaults. The output directory additionally falls back to the
//! `CITESCOPE_OUT` environment variable.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use thiserror::Error;

use crate::environment::{
    build_environment, cn_values, Direction, EnvironmentError, DEFAULT_THRESHOLD,
};
use crate::export::{self, ExportError, Layout, MapStyle};
use crate::factors::{
    ComponentCount, FactorError, FactorModel, FactorOptions, DEFAULT_DISPLAY_CUTOFF,
};
use crate::ingest::{self, IngestError, JournalMeta, MatrixFormat};
use crate::simgraph::{
    build_graph, similarity_matrix, DiagonalPolicy, SimilarityError, DEFAULT_SUPPRESSION,
};

pub const OUT_ENV: &str = "CITESCOPE_OUT";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Environment(#[from] EnvironmentError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Factors(#[from] FactorError),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error("cannot write to standard output: {0}")]
    Stdout(#[from] std::io::Error),
}

impl CliError {
    /// 2 for bad input or configuration, 1 for failures writing results.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Export(ExportError::Io { .. }) | CliError::Stdout(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "citescope", version, about = "Map journal citation environments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the cited or citing environment of a seed journal and emit maps.
    Env(RunArgs),
    /// Varimax-rotated principal components of citing patterns.
    Factors(RunArgs),
    /// Report structural issues in a citation matrix.
    Validate(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormatArg {
    Auto,
    Dense,
    Edges,
}

impl FromStr for MatrixFormatArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(Self::Auto),
            "dense" | "dense-csv" => Ok(Self::Dense),
            "edges" | "edge-list" | "edge-list-csv" => Ok(Self::Edges),
            other => Err(format!("unknown matrix format {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutputFormat {
    Pajek,
    GraphMl,
    Dot,
    Svg,
    Report,
    Loadings,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pajek" | "net" => Ok(Self::Pajek),
            "graphml" => Ok(Self::GraphMl),
            "dot" => Ok(Self::Dot),
            "svg" => Ok(Self::Svg),
            "report" => Ok(Self::Report),
            "loadings" => Ok(Self::Loadings),
            other => Err(format!(
                "unknown format {other:?} (expected pajek, graphml, dot, svg, report, loadings)"
            )),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pajek => "pajek",
            Self::GraphMl => "graphml",
            Self::Dot => "dot",
            Self::Svg => "svg",
            Self::Report => "report",
            Self::Loadings => "loadings",
        })
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML file with the same keys as the long flags (flags win).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// auto, dense or edges.
    #[arg(long)]
    pub matrix_format: Option<MatrixFormatArg>,
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<String>,
    /// cited or citing.
    #[arg(long)]
    pub direction: Option<Direction>,
    /// Inclusion threshold as a fraction of the seed's total (default 0.01).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Minimum cosine for an edge (default 0.2).
    #[arg(long)]
    pub suppress: Option<f64>,
    /// include-self-cites or zero-diagonal.
    #[arg(long)]
    pub diagonal: Option<DiagonalPolicy>,
    /// Number of components, or "kaiser".
    #[arg(long)]
    pub components: Option<ComponentCount>,
    /// Loadings below this magnitude are left blank (default 0.1).
    #[arg(long)]
    pub cutoff: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated subset of pajek,graphml,dot,svg,report,loadings.
    #[arg(long, value_delimiter = ',')]
    pub formats: Option<Vec<OutputFormat>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    matrix: Option<PathBuf>,
    matrix_format: Option<String>,
    meta: Option<PathBuf>,
    seed: Option<String>,
    direction: Option<String>,
    threshold: Option<f64>,
    suppress: Option<f64>,
    diagonal: Option<String>,
    components: Option<ComponentsValue>,
    cutoff: Option<f64>,
    out: Option<PathBuf>,
    formats: Option<FormatsValue>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ComponentsValue {
    Number(i64),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum FormatsValue {
    List(Vec<String>),
    Text(String),
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub matrix_path: PathBuf,
    pub matrix_format: MatrixFormatArg,
    pub metadata_path: Option<PathBuf>,
    pub seed: Option<String>,
    pub direction: Direction,
    pub threshold_fraction: f64,
    pub suppression_threshold: f64,
    pub diagonal_policy: DiagonalPolicy,
    pub components: ComponentCount,
    pub display_cutoff: f64,
    pub output_dir: PathBuf,
    pub formats: Vec<OutputFormat>,
}

fn parse_field<T: FromStr<Err = String>>(key: &str, value: Option<String>) -> Result<Option<T>, CliError> {
    value
        .map(|v| v.parse::<T>().map_err(|e| CliError::Config(format!("config {key}: {e}"))))
        .transpose()
}

impl RunConfig {
    /// Merge flags over the config file over defaults. `env_out` is the
    /// value of `CITESCOPE_OUT`, passed in to keep this function pure.
    pub fn resolve(
        args: &RunArgs,
        default_direction: Direction,
        default_formats: &[OutputFormat],
        env_out: Option<PathBuf>,
    ) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Config(format!("cannot read config {}: {e}", path.display()))
                })?;
                toml::from_str::<FileConfig>(&text).map_err(|e| {
                    CliError::Config(format!("config {}: {}", path.display(), e.message()))
                })?
            }
            None => FileConfig::default(),
        };

        let file_components = match file.components {
            None => None,
            Some(ComponentsValue::Number(n)) => Some(
                n.to_string()
                    .parse::<ComponentCount>()
                    .map_err(|e| CliError::Config(format!("config components: {e}")))?,
            ),
            Some(ComponentsValue::Text(s)) => parse_field("components", Some(s))?,
        };
        let file_formats = match file.formats {
            None => None,
            Some(FormatsValue::List(v)) => Some(v),
            Some(FormatsValue::Text(s)) => Some(s.split(',').map(str::to_string).collect()),
        }
        .map(|v| {
            v.iter()
                .map(|s| s.parse::<OutputFormat>().map_err(CliError::Config))
                .collect::<Result<Vec<_>, _>>()
        })
        .transpose()?;

        let matrix_path = args
            .matrix
            .clone()
            .or(file.matrix)
            .ok_or_else(|| CliError::Config("no matrix given (--matrix)".into()))?;
        let config = RunConfig {
            matrix_path,
            matrix_format: args
                .matrix_format
                .or(parse_field("matrix_format", file.matrix_format)?)
                .unwrap_or(MatrixFormatArg::Auto),
            metadata_path: args.meta.clone().or(file.meta),
            seed: args.seed.clone().or(file.seed),
            direction: args
                .direction
                .or(parse_field("direction", file.direction)?)
                .unwrap_or(default_direction),
            threshold_fraction: args.threshold.or(file.threshold).unwrap_or(DEFAULT_THRESHOLD),
            suppression_threshold: args.suppress.or(file.suppress).unwrap_or(DEFAULT_SUPPRESSION),
            diagonal_policy: args
                .diagonal
                .or(parse_field("diagonal", file.diagonal)?)
                .unwrap_or_default(),
            components: args
                .components
                .or(file_components)
                .unwrap_or(ComponentCount::Kaiser),
            display_cutoff: args.cutoff.or(file.cutoff).unwrap_or(DEFAULT_DISPLAY_CUTOFF),
            output_dir: args
                .out
                .clone()
                .or(file.out)
                .or(env_out)
                .unwrap_or_else(|| PathBuf::from(".")),
            formats: args
                .formats
                .clone()
                .or(file_formats)
                .unwrap_or_else(|| default_formats.to_vec()),
        };
        config.check()?;
        Ok(config)
    }

    fn check(&self) -> Result<(), CliError> {
        for (name, v) in [
            ("threshold", self.threshold_fraction),
            ("suppress", self.suppression_threshold),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(CliError::Config(format!("{name} {v} outside [0, 1)")));
            }
        }
        if self.display_cutoff.is_nan() || self.display_cutoff < 0.0 {
            return Err(CliError::Config(format!("cutoff {} is negative", self.display_cutoff)));
        }
        Ok(())
    }

    fn require_seed(&self) -> Result<&str, CliError> {
        self.seed
            .as_deref()
            .ok_or_else(|| CliError::Config("no seed journal given (--seed)".into()))
    }

    fn output(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }
}

pub const ENV_DEFAULT_FORMATS: &[OutputFormat] = &[
    OutputFormat::Pajek,
    OutputFormat::GraphMl,
    OutputFormat::Dot,
    OutputFormat::Svg,
    OutputFormat::Report,
];
pub const FACTORS_DEFAULT_FORMATS: &[OutputFormat] = &[OutputFormat::Loadings];

fn load_matrix(config: &RunConfig) -> Result<ingest::CitationMatrix, CliError> {
    let text = std::fs::read_to_string(&config.matrix_path).map_err(|source| IngestError::Io {
        path: config.matrix_path.display().to_string(),
        source,
    })?;
    let format = match config.matrix_format {
        MatrixFormatArg::Auto => ingest::detect_format(&text),
        MatrixFormatArg::Dense => MatrixFormat::DenseCsv,
        MatrixFormatArg::Edges => MatrixFormat::EdgeListCsv,
    };
    Ok(ingest::parse_matrix_str(&text, format)?)
}

fn load_meta(config: &RunConfig) -> Result<Vec<JournalMeta>, CliError> {
    match &config.metadata_path {
        Some(p) => Ok(ingest::parse_metadata(p)?),
        None => Ok(Vec::new()),
    }
}

/// Stage every output, then rename them all; nothing is renamed unless
/// every file was staged.
fn write_all(outputs: Vec<(PathBuf, String)>) -> Result<Vec<PathBuf>, CliError> {
    let mut staged = Vec::with_capacity(outputs.len());
    for (path, contents) in &outputs {
        staged.push(export::stage(path, contents.as_bytes())?);
    }
    let mut written = Vec::with_capacity(staged.len());
    for s in staged {
        written.push(s.path().to_path_buf());
        s.commit()?;
    }
    Ok(written)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| {
        CliError::Export(ExportError::Io {
            path: dir.to_path_buf(),
            source,
        })
    })
}

fn fit_factors(
    env: &crate::environment::Environment,
    config: &RunConfig,
) -> Result<FactorModel, CliError> {
    let options = FactorOptions {
        components: config.components,
        ..FactorOptions::default()
    };
    Ok(FactorModel::fit(env, &options)?)
}

pub fn cmd_env(config: &RunConfig, stdout: &mut dyn Write) -> Result<Vec<PathBuf>, CliError> {
    let seed = config.require_seed()?;
    let matrix = load_matrix(config)?;
    let meta = load_meta(config)?;
    let env = build_environment(&matrix, seed, config.direction, config.threshold_fraction)?;
    let geometry = cn_values(&env)?;
    let sim = similarity_matrix(&env, config.diagonal_policy);
    let graph = build_graph(&env, &sim, &geometry, config.suppression_threshold)?;

    let wants = |f| config.formats.contains(&f);
    let model = if wants(OutputFormat::Loadings) {
        if config.direction != Direction::Citing {
            return Err(CliError::Config(
                "loadings are computed on citing patterns; use --direction citing".into(),
            ));
        }
        Some(fit_factors(&env, config)?)
    } else {
        None
    };
    let table = model.as_ref().map(|m| m.loadings_table(config.display_cutoff));

    let stem = env.direction.to_string();
    let mut outputs = Vec::new();
    for format in &config.formats {
        match format {
            OutputFormat::Pajek => outputs.push((config.output(&format!("{stem}.net")), export::render_pajek(&graph))),
            OutputFormat::GraphMl => {
                outputs.push((config.output(&format!("{stem}.graphml")), export::render_graphml(&graph)))
            }
            OutputFormat::Dot => outputs.push((config.output(&format!("{stem}.dot")), export::render_dot(&graph))),
            OutputFormat::Svg => outputs.push((
                config.output(&format!("{stem}.svg")),
                export::render_svg_map(&graph, &MapStyle::default(), &Layout::Circular)?,
            )),
            OutputFormat::Report => outputs.push((
                config.output(&format!("{stem}_report.csv")),
                export::render_report(&env, &geometry, &meta, table.as_ref()),
            )),
            OutputFormat::Loadings => {
                let t = table.as_ref().expect("fitted above");
                outputs.push((config.output("loadings.csv"), t.to_csv()));
                outputs.push((config.output("loadings.txt"), t.to_text()));
            }
        }
    }
    ensure_dir(&config.output_dir)?;
    let written = write_all(outputs)?;

    writeln!(stdout, "seed: {}", env.seed)?;
    writeln!(stdout, "direction: {}", env.direction)?;
    writeln!(stdout, "members: {}", env.len())?;
    writeln!(stdout, "grand total: {}", env.grand_total())?;
    writeln!(stdout, "edges: {}", graph.edges.len())?;
    writeln!(stdout, "top C/N values:")?;
    for row in export::report_rows(&geometry, &meta).iter().take(5) {
        writeln!(stdout, "  {:>10.6}  {}", row.cn_percent, row.journal)?;
    }
    for path in &written {
        writeln!(stdout, "wrote {}", path.display())?;
    }
    Ok(written)
}

pub fn cmd_factors(config: &RunConfig, stdout: &mut dyn Write) -> Result<Vec<PathBuf>, CliError> {
    if config.direction != Direction::Citing {
        return Err(CliError::Config(
            "factor analysis runs on citing patterns; use --direction citing".into(),
        ));
    }
    let seed = config.require_seed()?;
    let matrix = load_matrix(config)?;
    let env = build_environment(&matrix, seed, Direction::Citing, config.threshold_fraction)?;
    let model = fit_factors(&env, config)?;
    let table = model.loadings_table(config.display_cutoff);

    let mut outputs = Vec::new();
    if config.formats.contains(&OutputFormat::Loadings) {
        outputs.push((config.output("loadings.csv"), table.to_csv()));
        outputs.push((config.output("loadings.txt"), table.to_text()));
    }
    if config.formats.contains(&OutputFormat::Report) {
        let meta = load_meta(config)?;
        let geometry = cn_values(&env)?;
        outputs.push((
            config.output("citing_report.csv"),
            export::render_report(&env, &geometry, &meta, Some(&table)),
        ));
    }
    ensure_dir(&config.output_dir)?;
    let written = write_all(outputs)?;

    let eigen: Vec<String> = model
        .eigenvalues
        .iter()
        .map(|l| format!("{:.3}", if l.abs() < 5e-4 { 0.0 } else { *l }))
        .collect();
    writeln!(stdout, "variables: {}", model.variables.len())?;
    writeln!(stdout, "eigenvalues: {}", eigen.join(" "))?;
    match config.components {
        ComponentCount::Kaiser => writeln!(stdout, "components: {} (kaiser)", model.components())?,
        ComponentCount::Fixed(_) => writeln!(stdout, "components: {}", model.components())?,
    }
    writeln!(stdout, "variance explained: {:.1}%", 100.0 * model.variance_explained_total)?;
    writeln!(
        stdout,
        "iterations used: {}{}",
        model.iterations_used,
        if model.converged { "" } else { " (not converged)" }
    )?;
    write!(stdout, "{}", table.to_text())?;
    for path in &written {
        writeln!(stdout, "wrote {}", path.display())?;
    }
    Ok(written)
}

pub fn cmd_validate(config: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let matrix = load_matrix(config)?;
    let report = ingest::validate_matrix(&matrix);
    writeln!(stdout, "citing journals: {}", matrix.n_citing())?;
    writeln!(stdout, "cited journals: {}", matrix.n_cited())?;
    writeln!(stdout, "total citations: {}", matrix.total())?;
    write!(stdout, "{report}")?;
    Ok(())
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let env_out = std::env::var_os(OUT_ENV).map(PathBuf::from);
    let result = match &cli.command {
        Command::Env(a) => RunConfig::resolve(a, Direction::Cited, ENV_DEFAULT_FORMATS, env_out)
            .and_then(|c| cmd_env(&c, stdout).map(|_| ())),
        Command::Factors(a) => RunConfig::resolve(a, Direction::Citing, FACTORS_DEFAULT_FORMATS, env_out)
            .and_then(|c| cmd_factors(&c, stdout).map(|_| ())),
        Command::Validate(a) => RunConfig::resolve(a, Direction::Cited, &[], env_out)
            .and_then(|c| cmd_validate(&c, stdout)),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
