//! `ssom`: command-line driver for the partitioning pipeline.
//!
//! Each subcommand writes its outputs plus a `config.json` describing the run
//! into `--out`. Failures print a single line `ssom: error[<kind>]: <message>`
//! to stderr and exit with the code listed in [`ExitKind`].

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ssom::classify::{
    classify_probability, select_edge_cases, train_embedding, train_linear, EmbeddingParams,
    LinearParams, SavedModel,
};
use ssom::evaluate::{
    c2_similarity, cluster_variance, holdout_evaluation, HoldoutPlan, SubsampleMode,
};
use ssom::export::{
    atomic_write, clusters_to_csv, export_geojson, exposure_to_csv, field_from_csv, field_to_csv,
    partition_from_csv, partition_to_csv, reports_to_csv,
};
use ssom::exposure::cohort_exposure;
use ssom::grid::{bin_posts, user_centric_field, GridField, Precision};
use ssom::ingest::{
    bin_traces, format_posts, generate_synthetic, load_boundary, load_posts, load_trace_points,
    GeoPost, PostFormat, SyntheticSpec,
};
use ssom::partition::{
    check_contiguity, polygon_partition, run_ssom_traced, run_traditional_som, ClusterSize,
    SomParams, SsomParams, WeightSpace, WinnerRule, DEFAULT_TIE_TOLERANCE,
};
use ssom::{Error, Label, Partition};

#[derive(Parser, Debug)]
#[command(
    name = "ssom",
    version,
    about = "Contiguous hotspot partitioning of geotagged labeled posts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "stage", rename_all = "kebab-case")]
enum Command {
    /// Generate a planted-region post corpus and its ground-truth partition.
    Synth(SynthArgs),
    /// Train a text classifier and optionally label another post file.
    Classify(ClassifyArgs),
    /// Bin labeled posts into a grid field table.
    Grid(GridArgs),
    /// Partition a field into regions.
    Partition(PartitionArgs),
    /// Holdout robustness (MSPE and c2) and within-cluster variance.
    Evaluate(EvaluateArgs),
    /// Visit-weighted exposure differences between two partitions.
    Exposure(ExposureArgs),
    /// Write a partition as GeoJSON.
    ExportGeo(ExportGeoArgs),
}

#[derive(Args, Debug, Serialize)]
struct SynthArgs {
    #[arg(long, default_value_t = 60)]
    rows: usize,
    #[arg(long, default_value_t = 60)]
    cols: usize,
    #[arg(long, default_value_t = 2)]
    block_rows: usize,
    #[arg(long, default_value_t = 2)]
    block_cols: usize,
    /// One proportion per block, row-major.
    #[arg(long, value_delimiter = ',', default_value = "0.02,0.10,0.30,0.50")]
    proportions: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    posts_per_cell: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ModelKind {
    Embedding,
    Linear,
}

#[derive(Args, Debug, Serialize)]
struct ClassifyArgs {
    /// Labeled training posts (`.csv` or tab-separated records).
    #[arg(long)]
    posts: PathBuf,
    /// Posts to label with the trained model.
    #[arg(long)]
    apply: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModelKind::Embedding)]
    model: ModelKind,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Share of applied posts reported as edge cases for review.
    #[arg(long, default_value_t = 0.05)]
    edge_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct GridArgs {
    #[arg(long)]
    posts: PathBuf,
    #[arg(long)]
    boundary: Option<PathBuf>,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(1..=7))]
    precision: u8,
    /// Count distinct users instead of posts.
    #[arg(long)]
    user_centric: bool,
    #[arg(long)]
    out: PathBuf,
}

/// Where a stage gets its field: a field table, or posts binned on the fly.
#[derive(Args, Debug, Serialize)]
struct FieldInput {
    /// Field table written by `grid`.
    #[arg(long, conflicts_with = "posts")]
    field: Option<PathBuf>,
    #[arg(long, required_unless_present = "field")]
    posts: Option<PathBuf>,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(1..=7))]
    precision: u8,
}

#[derive(Args, Debug, Serialize)]
struct SsomArgs {
    #[arg(long, default_value_t = 3)]
    tau: u32,
    #[arg(long, default_value_t = 50)]
    cycles: u32,
    #[arg(long, default_value_t = 0.1)]
    eta0: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `lexicographic` or `literal-eq1`.
    #[arg(long, default_value = "lexicographic")]
    winner_rule: WinnerRule,
    /// `counts-scaled` or `proportions`.
    #[arg(long, default_value = "counts-scaled")]
    weight_space: WeightSpace,
    /// `whole` or `window`.
    #[arg(long, default_value = "whole")]
    cluster_size: ClusterSize,
    #[arg(long, default_value_t = DEFAULT_TIE_TOLERANCE)]
    tie_tolerance: f64,
}

impl SsomArgs {
    fn params(&self) -> SsomParams {
        SsomParams {
            tau: self.tau,
            t_max: self.cycles,
            eta0: self.eta0,
            seed: self.seed,
            winner_rule: self.winner_rule,
            weight_space: self.weight_space,
            cluster_size: self.cluster_size,
            tie_tolerance: self.tie_tolerance,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Method {
    Ssom,
    Som,
    Polygon,
}

#[derive(Args, Debug, Serialize)]
struct PartitionArgs {
    #[command(flatten)]
    input: FieldInput,
    /// Polygons: required for `polygon`, otherwise used to clip binned posts.
    #[arg(long)]
    boundary: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Method::Ssom)]
    method: Method,
    #[command(flatten)]
    ssom: SsomArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum HoldoutKindArg {
    Cells,
    Posts,
}

#[derive(Args, Debug, Serialize)]
struct EvaluateArgs {
    #[command(flatten)]
    input: FieldInput,
    #[arg(long)]
    boundary: Option<PathBuf>,
    #[command(flatten)]
    ssom: SsomArgs,
    /// Holdout fractions.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.25,0.5,0.75")]
    holdout: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, value_enum, default_value_t = HoldoutKindArg::Cells)]
    kind: HoldoutKindArg,
    /// Partition table to score for within-cluster variance (and c2 against `--truth`).
    #[arg(long)]
    partition: Option<PathBuf>,
    /// Reference partition table, e.g. the `truth.csv` from `synth`.
    #[arg(long, requires = "partition")]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct ExposureArgs {
    /// Trace points: `person_id,lat,lon,timestamp`.
    #[arg(long)]
    traces: PathBuf,
    /// Field table both partitions cover.
    #[arg(long)]
    field: PathBuf,
    /// Reference partition (the denominator).
    #[arg(long)]
    partition_a: PathBuf,
    #[arg(long)]
    partition_b: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct ExportGeoArgs {
    #[arg(long)]
    partition: PathBuf,
    #[arg(long)]
    field: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Exit statuses; 2 is also what clap uses for usage errors.
#[derive(Clone, Copy, Debug)]
enum ExitKind {
    Usage = 2,
    Io = 3,
    Input = 4,
    Invariant = 5,
}

impl ExitKind {
    fn of(e: &Error) -> Self {
        match e {
            Error::Io { .. } => ExitKind::Io,
            Error::Invariant(_) | Error::CellMismatch(_) => ExitKind::Invariant,
            _ => ExitKind::Input,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ExitKind::Usage => "usage",
            ExitKind::Io => "io",
            ExitKind::Input => "input",
            ExitKind::Invariant => "invariant",
        }
    }
}

#[derive(Serialize)]
struct RunConfig<'a> {
    tool: &'static str,
    version: &'static str,
    #[serde(flatten)]
    command: &'a Command,
}

type Result<T> = std::result::Result<T, Error>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                ExitKind::Usage as u8
            } else {
                0
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = ExitKind::of(&e);
            let msg = e.to_string().replace(['\n', '\r'], " ");
            eprintln!("ssom: error[{}]: {msg}", kind.name());
            ExitCode::from(kind as u8)
        }
    }
}

fn run(cmd: &Command) -> Result<()> {
    let out = match cmd {
        Command::Synth(a) => &a.out,
        Command::Classify(a) => &a.out,
        Command::Grid(a) => &a.out,
        Command::Partition(a) => &a.out,
        Command::Evaluate(a) => &a.out,
        Command::Exposure(a) => &a.out,
        Command::ExportGeo(a) => &a.out,
    };
    fs::create_dir_all(out).map_err(|e| io_error(out, e))?;
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Classify(a) => classify(a),
        Command::Grid(a) => grid(a),
        Command::Partition(a) => partition(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Exposure(a) => exposure(a),
        Command::ExportGeo(a) => export_geo(a),
    }?;
    let config = RunConfig {
        tool: "ssom",
        version: env!("CARGO_PKG_VERSION"),
        command: cmd,
    };
    write(out, "config.json", &json(&config)?)
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    atomic_write(dir.join(name), text.as_bytes())
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn precision(d: u8) -> Result<Precision> {
    Precision::new(d)
}

fn posts_from(path: &Path) -> Result<Vec<GeoPost>> {
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => PostFormat::Delimited,
        _ => PostFormat::RecordPerLine,
    };
    load_posts(path, format)
}

fn load_field(input: &FieldInput, boundary: Option<&Path>) -> Result<GridField> {
    match (&input.field, &input.posts) {
        (Some(f), _) => field_from_csv(&read(f)?),
        (None, Some(p)) => {
            let b = boundary.map(load_boundary).transpose()?;
            bin_posts(&posts_from(p)?, precision(input.precision)?, b.as_ref())
        }
        (None, None) => Err(Error::Invalid(
            "either --field or --posts is required".into(),
        )),
    }
}

fn load_partition(path: &Path, field: &GridField) -> Result<Partition> {
    partition_from_csv(&read(path)?, field.precision(), Some(field))
}

fn synth(a: &SynthArgs) -> Result<()> {
    let spec = SyntheticSpec::blocks(
        a.rows,
        a.cols,
        a.block_rows,
        a.block_cols,
        &a.proportions,
        a.posts_per_cell,
        a.seed,
    )?;
    let (posts, truth) = generate_synthetic(&spec)?;
    write(&a.out, "posts.tsv", &format_posts(&posts))?;
    write(&a.out, "truth.csv", &partition_to_csv(&truth))
}

fn classify(a: &ClassifyArgs) -> Result<()> {
    let posts = posts_from(&a.posts)?;
    let unlabeled: Vec<String> = posts
        .iter()
        .filter(|p| p.label.is_none())
        .map(|p| p.id.clone())
        .collect();
    if !unlabeled.is_empty() {
        return Err(Error::Unlabeled(unlabeled));
    }
    let corpus: Vec<(&str, Label)> = posts
        .iter()
        .map(|p| (p.text.as_str(), p.label.expect("checked above")))
        .collect();
    let model = match a.model {
        ModelKind::Embedding => SavedModel::Embedding(train_embedding(
            &corpus,
            &EmbeddingParams {
                seed: a.seed,
                ..Default::default()
            },
        )?),
        ModelKind::Linear => SavedModel::Linear(train_linear(
            &corpus,
            &LinearParams {
                seed: a.seed,
                ..Default::default()
            },
        )?),
    };
    write(&a.out, "model.json", &(model.to_json()? + "\n"))?;
    let clf = model.as_classifier();
    let mut features = String::from("rank,ngram,score\n");
    for (i, (g, s)) in clf.top_features(50).into_iter().enumerate() {
        features.push_str(&format!("{},{},{}\n", i + 1, g, s));
    }
    write(&a.out, "features.csv", &features)?;

    if let Some(path) = &a.apply {
        if !(a.threshold > 0.0 && a.threshold < 1.0) {
            return Err(Error::Invalid(format!(
                "threshold {} outside (0, 1)",
                a.threshold
            )));
        }
        let mut target = posts_from(path)?;
        for p in &mut target {
            let prob = clf.predict(&p.text);
            p.label = Some(classify_probability(prob, a.threshold));
            p.score = Some(prob);
        }
        write(&a.out, "labeled.tsv", &format_posts(&target))?;
        let texts: Vec<&str> = target.iter().map(|p| p.text.as_str()).collect();
        let mut edges = String::from("id,probability\n");
        for e in select_edge_cases(clf, &texts, a.edge_fraction)? {
            edges.push_str(&format!("{},{}\n", target[e.index].id, e.probability));
        }
        write(&a.out, "edge_cases.csv", &edges)?;
    }
    Ok(())
}

fn grid(a: &GridArgs) -> Result<()> {
    let d = precision(a.precision)?;
    let mut posts = posts_from(&a.posts)?;
    let boundary = a.boundary.as_deref().map(load_boundary).transpose()?;
    let field = if a.user_centric {
        if let Some(b) = &boundary {
            posts.retain(|p| {
                let (lat, lon) = ssom::cell_key(p.lat, p.lon, d).center();
                b.contains(lat, lon)
            });
        }
        user_centric_field(&posts, d)?
    } else {
        bin_posts(&posts, d, boundary.as_ref())?
    };
    write(&a.out, "field.csv", &field_to_csv(&field))
}

#[derive(Serialize)]
struct PartitionSummary {
    method: String,
    cells: usize,
    clusters: usize,
    contiguous: bool,
    non_contiguous_clusters: Vec<u32>,
    mean_variance: Option<f64>,
    singletons: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    uncovered_cells: Option<usize>,
}

fn partition(a: &PartitionArgs) -> Result<()> {
    let field = load_field(&a.input, a.boundary.as_deref())?;
    let params = a.ssom.params();
    let mut uncovered = None;
    let p = match a.method {
        Method::Ssom => {
            let (p, stats) = run_ssom_traced(&field, &params)?;
            let mut trace = String::from("cycle,eta,quantization_error,clusters,moves\n");
            for s in &stats {
                trace.push_str(&format!(
                    "{},{},{},{},{}\n",
                    s.t, s.eta, s.quantization_error, s.clusters, s.moves
                ));
            }
            write(&a.out, "cycles.csv", &trace)?;
            p
        }
        Method::Som => run_traditional_som(
            &field,
            &SomParams {
                t_max: params.t_max,
                eta0: params.eta0,
                seed: params.seed,
                ..Default::default()
            },
        )?,
        Method::Polygon => {
            let path = a
                .boundary
                .as_deref()
                .ok_or_else(|| Error::Invalid("--method polygon needs --boundary".into()))?;
            let pp = polygon_partition(&field, &load_boundary(path)?)?;
            uncovered = Some(pp.uncovered);
            pp.partition
        }
    };
    let contiguity = check_contiguity(&p, params.tau);
    let variance = cluster_variance(&p, &field);
    let summary = PartitionSummary {
        method: format!("{:?}", p.method()).to_lowercase(),
        cells: p.len(),
        clusters: p.cluster_count(),
        contiguous: contiguity.ok,
        non_contiguous_clusters: contiguity.offending,
        mean_variance: variance.mean,
        singletons: variance.singletons,
        uncovered_cells: uncovered,
    };
    write(&a.out, "field.csv", &field_to_csv(&field))?;
    write(&a.out, "partition.csv", &partition_to_csv(&p))?;
    write(&a.out, "clusters.csv", &clusters_to_csv(&p))?;
    write(&a.out, "summary.json", &json(&summary)?)
}

#[derive(Serialize)]
struct EvaluateSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    variance: Option<ssom::evaluate::VarianceReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c2_vs_truth: Option<f64>,
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let field = load_field(&a.input, a.boundary.as_deref())?;
    let plan = match a.kind {
        HoldoutKindArg::Cells => HoldoutPlan::cells(&a.holdout, a.folds, a.ssom.seed),
        HoldoutKindArg::Posts => HoldoutPlan::posts(
            &a.holdout,
            SubsampleMode::RatioPreserving,
            a.folds,
            a.ssom.seed,
        ),
    };
    plan.validate()?;
    let report = holdout_evaluation(&field, &a.ssom.params(), &plan)?;
    write(&a.out, "mspe.csv", &reports_to_csv(&report.mspe))?;
    write(&a.out, "c2.csv", &reports_to_csv(&report.c2))?;

    let mut summary = EvaluateSummary {
        variance: None,
        c2_vs_truth: None,
    };
    if let Some(path) = &a.partition {
        let p = load_partition(path, &field)?;
        summary.variance = Some(cluster_variance(&p, &field));
        if let Some(t) = &a.truth {
            summary.c2_vs_truth = Some(c2_similarity(&p, &load_partition(t, &field)?)?);
        }
    }
    write(&a.out, "summary.json", &json(&summary)?)
}

fn exposure(a: &ExposureArgs) -> Result<()> {
    let field = field_from_csv(&read(&a.field)?)?;
    let pa = load_partition(&a.partition_a, &field)?;
    let pb = load_partition(&a.partition_b, &field)?;
    let traces = bin_traces(&load_trace_points(&a.traces)?, field.precision());
    let report = cohort_exposure(&traces, &pa, &pb, &field)?;
    write(&a.out, "exposure.csv", &exposure_to_csv(&report))?;
    write(&a.out, "exposure.json", &json(&report)?)
}

fn export_geo(a: &ExportGeoArgs) -> Result<()> {
    let field = field_from_csv(&read(&a.field)?)?;
    let p = load_partition(&a.partition, &field)?;
    export_geojson(&p, &field, a.out.join("clusters.geojson"))
}
