//! Command-line interface.

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use phenomapper_core::analysis::Registry;
use phenomapper_core::data::{load_csv, LoadOptions};
use phenomapper_core::document::import_subpopulation;
use phenomapper_core::selection::{select, subpopulation_rows};
use phenomapper_core::{ClusterParams, DataTable, Normalization, SelectionMode};
use serde_json::{json, Map, Value as Json};

use crate::error::ServiceError;
use crate::pipeline::{
    graph_document, merge_params, parse_filter, run_analysis, run_mapper, FilterRequest, LayoutChoice,
    LayoutRequest, MapperRequest,
};
use crate::session::{AppState, DEFAULT_MAX_UPLOAD_BYTES};

#[derive(Debug, Parser)]
#[command(name = "phenomapper", version, about = "Mapper graphs and subpopulation analysis for tabular data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Compute a mapper graph from a CSV file.
    Compute(ComputeArgs),
    /// Run an analysis module on a CSV file or an exported document.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "PHENOMAPPER_ADDR", default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Directory with the UI bundle, served for unmatched paths.
    #[arg(long, env = "PHENOMAPPER_STATIC_DIR")]
    pub static_dir: Option<PathBuf>,
    /// Directory for session persistence; sessions live in memory only when unset.
    #[arg(long, env = "PHENOMAPPER_PERSIST_DIR")]
    pub persist_dir: Option<PathBuf>,
    #[arg(long, env = "PHENOMAPPER_MAX_UPLOAD_BYTES", default_value_t = DEFAULT_MAX_UPLOAD_BYTES)]
    pub max_upload_bytes: usize,
}

#[derive(Debug, Args)]
pub struct CsvArgs {
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    /// Token read as a missing value, in addition to the empty string.
    #[arg(long, default_value = "NA")]
    pub missing: String,
    /// The first line is data, not column names.
    #[arg(long)]
    pub no_header: bool,
    /// Dataset name; defaults to the input file stem.
    #[arg(long)]
    pub name: Option<String>,
}

impl CsvArgs {
    fn options(&self) -> Result<LoadOptions, ServiceError> {
        if !self.delimiter.is_ascii() {
            return Err(ServiceError::invalid("--delimiter must be a single ASCII character", None));
        }
        Ok(LoadOptions {
            delimiter: self.delimiter as u8,
            has_header: !self.no_header,
            missing_token: self.missing.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Dot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayoutArg {
    Force,
    #[value(alias = "filter-aligned", alias = "filter_aligned")]
    Aligned,
}

#[derive(Debug, Args)]
pub struct ComputeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub csv: CsvArgs,
    /// Point-cloud columns, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub point_cols: Vec<String>,
    /// First filter as COLUMN:N:OVERLAP; overlap may be written as a percentage.
    #[arg(long, value_parser = parse_filter)]
    pub filter: FilterRequest,
    /// Optional second filter for a 2D cover.
    #[arg(long, value_parser = parse_filter)]
    pub filter2: Option<FilterRequest>,
    /// DBSCAN radius; `inf` clusters each cover element as one blob.
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub min_pts: usize,
    #[arg(long, default_value = "minmax")]
    pub norm: Normalization,
    #[arg(long, value_enum, default_value = "force")]
    pub layout: LayoutArg,
    /// Filter column for the aligned layout; defaults to the first filter.
    #[arg(long)]
    pub aligned_filter: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Force-layout iterations.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: OutputFormat,
}

impl ComputeArgs {
    pub fn request(&self) -> MapperRequest {
        MapperRequest {
            point_columns: self.point_cols.clone(),
            filters: std::iter::once(self.filter.clone()).chain(self.filter2.clone()).collect(),
            cluster: ClusterParams {
                epsilon: self.eps,
                min_pts: self.min_pts,
            },
            norm: self.norm,
            layout: LayoutRequest {
                method: match self.layout {
                    LayoutArg::Force => LayoutChoice::Force,
                    LayoutArg::Aligned => LayoutChoice::Aligned,
                },
                aligned_filter: self.aligned_filter.clone(),
                seed: self.seed,
                iterations: self.iterations,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Module name, e.g. regression, feature_selection, pca, tsne.
    pub module: String,
    /// CSV file, or a `.json` document exported by the service or `compute`.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub csv: CsvArgs,
    /// Restrict to the rows of these graph nodes (document input only).
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["mode", "seeds"])]
    pub nodes: Option<Vec<usize>>,
    /// Selection mode applied to --seeds (document input only).
    #[arg(long, requires = "seeds")]
    pub mode: Option<SelectionMode>,
    #[arg(long, value_delimiter = ',', requires = "mode")]
    pub seeds: Option<Vec<usize>>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub predictors: Option<Vec<String>>,
    #[arg(long)]
    pub no_intercept: bool,
    /// Label column, or several comma-separated columns combined into one label.
    #[arg(long, value_delimiter = ',')]
    pub label: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub columns: Option<Vec<String>>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Output dimensions for pca.
    #[arg(long)]
    pub dims: Option<usize>,
    #[arg(long)]
    pub perplexity: Option<f64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub norm: Option<Normalization>,
    /// Extra module parameters as a JSON object; flags take precedence.
    #[arg(long)]
    pub params: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl AnalyzeArgs {
    fn flag_params(&self) -> Map<String, Json> {
        let mut m = Map::new();
        let mut put = |k: &str, v: Option<Json>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        put("target", self.target.as_ref().map(|v| json!(v)));
        put("predictors", self.predictors.as_ref().map(|v| json!(v)));
        put("add_intercept", self.no_intercept.then_some(json!(false)));
        put(
            "label",
            self.label.as_ref().map(|v| match v.as_slice() {
                [one] => json!(one),
                many => json!(many),
            }),
        );
        put("features", self.features.as_ref().map(|v| json!(v)));
        put("columns", self.columns.as_ref().map(|v| json!(v)));
        put("k", self.k.map(|v| json!(v)));
        put("out_dims", self.dims.map(|v| json!(v)));
        put("perplexity", self.perplexity.map(|v| json!(v)));
        put("iterations", self.iters.map(|v| json!(v)));
        put("seed", self.seed.map(|v| json!(v)));
        put("lambda", self.lambda.map(|v| json!(v)));
        put("epochs", self.epochs.map(|v| json!(v)));
        put("normalization", self.norm.map(|v| json!(v)));
        m
    }

    fn selection(&self) -> Option<(SelectionMode, Vec<usize>)> {
        match (&self.nodes, self.mode, &self.seeds) {
            (Some(ids), _, _) => Some((SelectionMode::Nodes, ids.clone())),
            (None, Some(mode), Some(seeds)) => Some((mode, seeds.clone())),
            _ => None,
        }
    }
}

fn dataset_name(csv: &CsvArgs, input: &Path) -> String {
    csv.name.clone().unwrap_or_else(|| {
        input
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("dataset")
            .to_string()
    })
}

fn read_input(path: &Path) -> Result<Vec<u8>, ServiceError> {
    fs::read(path).map_err(|e| ServiceError::invalid(format!("cannot read {}: {e}", path.display()), None))
}

pub fn load_table(csv: &CsvArgs, input: &Path) -> Result<DataTable, ServiceError> {
    let bytes = read_input(input)?;
    load_csv(&dataset_name(csv, input), bytes.as_slice(), &csv.options()?).map_err(ServiceError::Upload)
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<(), ServiceError> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| ServiceError::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| ServiceError::Io(e.to_string()))
        }
    }
}

/// Output bytes of `compute`.
pub fn compute(args: &ComputeArgs) -> Result<Vec<u8>, ServiceError> {
    let table = load_table(&args.csv, &args.input)?;
    let g = run_mapper(&table, &args.request())?;
    Ok(match args.format {
        OutputFormat::Json => graph_document(&table, &g)?.to_json(),
        OutputFormat::Dot => g.graph.to_dot().into_bytes(),
    })
}

/// Result JSON of `analyze`.
pub fn analyze(args: &AnalyzeArgs) -> Result<Json, ServiceError> {
    let is_document = args.input.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let table = if is_document {
        let imported = import_subpopulation(&read_input(&args.input)?)?;
        match args.selection() {
            None => imported.table,
            Some((mode, seeds)) => {
                let sel = select(&imported.graph, mode, &seeds)?;
                let rows = subpopulation_rows(&sel, &imported.graph)?;
                imported.table.subset(&rows)?
            }
        }
    } else {
        if args.selection().is_some() {
            return Err(ServiceError::invalid(
                "--nodes, --mode and --seeds need a graph document as --input",
                None,
            ));
        }
        load_table(&args.csv, &args.input)?
    };
    let base = args
        .params
        .as_deref()
        .map(|p| serde_json::from_str(p).map_err(|e| ServiceError::invalid(format!("--params: {e}"), None)))
        .transpose()?;
    let params = merge_params(base, args.flag_params())?;
    run_analysis(&Registry::with_defaults(), &table, &args.module, params)
}

pub fn run(cli: Cli) -> Result<(), ServiceError> {
    match cli.command {
        Command::Serve(args) => {
            let state = AppState::new(Registry::with_defaults(), args.persist_dir, args.max_upload_bytes);
            let restored = state.restore()?;
            if restored > 0 {
                tracing::info!(restored, "restored persisted sessions");
            }
            let runtime = tokio::runtime::Runtime::new().map_err(|e| ServiceError::Internal(e.to_string()))?;
            runtime.block_on(crate::api::serve(Arc::new(state), args.addr, args.static_dir))
        }
        Command::Compute(args) => {
            let bytes = compute(&args)?;
            write_output(args.out.as_deref(), &bytes)
        }
        Command::Analyze(args) => {
            let result = analyze(&args)?;
            let mut bytes = serde_json::to_vec_pretty(&result).map_err(|e| ServiceError::Internal(e.to_string()))?;
            bytes.push(b'\n');
            write_output(args.out.as_deref(), &bytes)
        }
    }
}
