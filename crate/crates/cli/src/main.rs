mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use simspace::augment::{augment_dataset, png, AugmentSpec};
use simspace::eval::{run_study, RmseMode, StudyInputs};
use simspace::io;
use simspace::mapping::{triangulate, LinearMap, RidgeOptions, RidgeSolver};
use simspace::mds::{dimension_scan, InitStrategy, SmacofConfig};
use simspace::svg::{bar_chart_svg, scatter_svg, ScatterOptions};
use simspace::synthetic;
use simspace::{similarity_to_dissimilarity, ConversionMode, LabeledDataset, Seed, StimulusId};

use config::StudyConfig;

#[derive(Parser, Debug)]
#[command(name = "simspace", version, about = "Similarity spaces and image-to-space regression")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "SIMSPACE_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scale a dissimilarity (or similarity) matrix into one or more spaces.
    Mds(MdsArgs),
    /// Write augmented variants of a directory of PNG stimuli.
    Augment(AugmentArgs),
    /// Fit a linear map from features to an embedding.
    Train(TrainArgs),
    /// Run the leave-one-group-out study grid.
    Eval(EvalArgs),
    /// Draw a 2-D projection of an embedding as SVG.
    Scatter(ScatterArgs),
    /// Locate a point from its distances to known stimuli.
    Triangulate(TriangulateArgs),
}

#[derive(Args, Debug)]
struct MdsArgs {
    /// Square CSV with stimulus ids as header and first column.
    #[arg(long)]
    input: PathBuf,
    /// Treat the input as similarities and convert them.
    #[arg(long)]
    similarity: bool,
    #[arg(long, default_value = "max-minus")]
    conversion: ConversionMode,
    #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    restarts: usize,
    #[arg(long, default_value_t = 300)]
    max_iter: usize,
    #[arg(long, default_value = "both")]
    init: InitStrategy,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AugmentArgs {
    /// Directory of `<stimulus>.png` files.
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    factor: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON transform settings; missing keys keep their defaults.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    embedding: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// JSON study configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    /// One embedding CSV per space.
    #[arg(long = "embedding")]
    embeddings: Vec<PathBuf>,
    /// Generate features and spaces instead of reading them.
    #[arg(long)]
    synthetic: bool,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    standardize: bool,
    /// Divide RMSE by sqrt(dims).
    #[arg(long)]
    rmse_per_coordinate: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScatterArgs {
    #[arg(long)]
    embedding: PathBuf,
    /// Two dimension indices, e.g. `0,2`.
    #[arg(long, default_value = "0,1", value_parser = parse_axes)]
    axes: (usize, usize),
    /// Manifest CSV; the first image of each group becomes its thumbnail.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    title: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TriangulateArgs {
    #[arg(long)]
    embedding: PathBuf,
    /// `<stimulus>=<distance>`, repeated.
    #[arg(long = "anchor", value_parser = parse_anchor)]
    anchors: Vec<(String, f64)>,
    /// CSV with `id,distance` rows, as an alternative to `--anchor`.
    #[arg(long)]
    distances: Option<PathBuf>,
}

fn parse_anchor(s: &str) -> Result<(String, f64), String> {
    let (id, d) = s
        .split_once('=')
        .ok_or_else(|| format!("expected <id>=<distance>, got `{s}`"))?;
    let d = d.trim().parse::<f64>().map_err(|e| format!("`{d}`: {e}"))?;
    Ok((id.trim().to_string(), d))
}

fn parse_axes(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected two comma-separated indices, got `{s}`"))?;
    let idx = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    Ok((idx(a)?, idx(b)?))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            bail!("--jobs must be >= 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring thread pool")?;
    }
    match cli.command {
        Command::Mds(a) => mds(a),
        Command::Augment(a) => augment(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Scatter(a) => scatter(a),
        Command::Triangulate(a) => triangulate_cmd(a),
    }
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn mds(a: MdsArgs) -> anyhow::Result<()> {
    let delta = if a.similarity {
        similarity_to_dissimilarity(&io::load_similarity_matrix(&a.input)?, a.conversion)?
    } else {
        io::load_dissimilarity_matrix(&a.input)?
    };
    let cfg = SmacofConfig {
        restarts: a.restarts,
        max_iter: a.max_iter,
        init: a.init,
        seed: Seed(a.seed),
        ..Default::default()
    };
    let (curve, embeddings) = dimension_scan(&delta, &a.dims, &cfg)?;
    for w in curve.warnings() {
        eprintln!("warning: {w}");
    }
    create_dir(&a.out)?;
    for e in &embeddings {
        io::write_embedding(e, a.out.join(format!("embedding_{}d.csv", e.dims())))?;
    }
    write(&a.out.join("stress.csv"), &curve.to_csv())?;
    print!("{}", curve.to_csv());
    Ok(())
}

fn augment(a: AugmentArgs) -> anyhow::Result<()> {
    let spec = match &a.spec {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<AugmentSpec>(&text)
                .with_context(|| format!("parsing {}", p.display()))?
        }
        None => AugmentSpec::default(),
    };
    let originals = png::load_image_dir(&a.images)?;
    let ds = augment_dataset(&originals, a.factor, &spec, Seed(a.seed))?;
    let manifest = png::write_dataset(&ds, &a.out)?;
    println!(
        "{} images from {} stimuli -> {}",
        ds.items.len(),
        originals.len(),
        manifest.display()
    );
    Ok(())
}

fn train(a: TrainArgs) -> anyhow::Result<()> {
    let features = io::load_feature_table(&a.features)?;
    let embedding = io::load_embedding(&a.embedding)?;
    let data = LabeledDataset::from_embedding(features, &embedding)?;
    let opts = RidgeOptions {
        lambda: a.lambda,
        standardize: a.standardize,
    };
    opts.validate()?;
    let solver = RidgeSolver::new(data.features().features(), None, opts.standardize)?;
    let map: LinearMap = solver.solve(&data.target_matrix(), opts.lambda)?;
    map.write(&a.out)?;
    let fitted = map.predict_rows(data.features().features())?;
    let pred: Vec<Vec<f64>> = fitted.row_iter().map(|r| r.iter().copied().collect()).collect();
    let truth: Vec<Vec<f64>> = (0..data.len()).map(|i| data.target_of_item(i).to_vec()).collect();
    println!(
        "train rmse {:.6} over {} items -> {}",
        simspace::eval::rmse(&pred, &truth)?,
        data.len(),
        a.out.display()
    );
    Ok(())
}

fn eval(a: EvalArgs) -> anyhow::Result<()> {
    let mut cfg = match &a.config {
        Some(p) => StudyConfig::load(p)?,
        None => StudyConfig::default(),
    };
    if a.features.is_some() {
        cfg.features = a.features.clone();
    }
    if !a.embeddings.is_empty() {
        cfg.embeddings = a.embeddings.clone();
    }
    if a.synthetic && cfg.synthetic.is_none() {
        cfg.synthetic = Some(Default::default());
    }
    cfg.runs = a.runs.or(cfg.runs);
    cfg.seed = a.seed.or(cfg.seed);
    if a.lambda.is_some() || a.standardize {
        let mut ridge = cfg.ridge.unwrap_or_default();
        if let Some(l) = a.lambda {
            ridge.lambda = l;
        }
        ridge.standardize |= a.standardize;
        cfg.ridge = Some(ridge);
    }
    if a.rmse_per_coordinate {
        cfg.rmse_mode = Some(RmseMode::PerCoordinate);
    }
    if a.out.is_some() {
        cfg.out = a.out.clone();
    }
    let settings = cfg.settings();

    let inputs = match (&cfg.synthetic, &cfg.features) {
        (Some(_), Some(_)) => bail!("choose either synthetic data or a features file"),
        (Some(s), None) => {
            let study = synthetic::generate(&s.to_config(settings.seed.derive("synthetic")))?;
            if let Some(out) = &cfg.out {
                create_dir(out)?;
                write(&out.join("stress.csv"), &study.stress.to_csv())?;
            }
            study.inputs
        }
        (None, Some(f)) => {
            if cfg.embeddings.is_empty() {
                bail!("no embeddings given");
            }
            let mut embeddings = cfg
                .embeddings
                .iter()
                .map(io::load_embedding)
                .collect::<Result<Vec<_>, _>>()?;
            embeddings.sort_by_key(|e| e.dims());
            StudyInputs {
                features: io::load_feature_table(f)?,
                embeddings,
            }
        }
        (None, None) => bail!("missing input: pass --features and --embedding, or --synthetic"),
    };

    let report = run_study(&inputs, &settings)?;
    print!("{}", report.to_table());
    if let Some(out) = &cfg.out {
        create_dir(out)?;
        write(&out.join("report.csv"), &report.to_csv())?;
        for &d in &report.dims {
            write(&out.join(format!("bars_{d}d.svg")), &bar_chart_svg(&report, d)?)?;
        }
    }
    Ok(())
}

fn scatter(a: ScatterArgs) -> anyhow::Result<()> {
    let embedding = io::load_embedding(&a.embedding)?;
    let mut thumbnails = BTreeMap::new();
    if let Some(m) = &a.manifest {
        let base = m.parent().unwrap_or(Path::new(""));
        for entry in io::load_manifest(m)? {
            thumbnails
                .entry(entry.group_id)
                .or_insert_with(|| base.join(&entry.file_path).to_string_lossy().into_owned());
        }
    }
    let svg = scatter_svg(
        &embedding,
        &ScatterOptions {
            axes: a.axes,
            thumbnails,
            title: a.title,
        },
    )?;
    write(&a.out, &svg)
}

fn read_distances(path: &Path) -> anyhow::Result<Vec<(String, f64)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (n == 0 && line.starts_with("id,")) {
            continue;
        }
        let anchor = parse_anchor(&line.replacen(',', "=", 1))
            .map_err(|e| anyhow::anyhow!("{}:{}: {e}", path.display(), n + 1))?;
        out.push(anchor);
    }
    Ok(out)
}

fn triangulate_cmd(a: TriangulateArgs) -> anyhow::Result<()> {
    let embedding = io::load_embedding(&a.embedding)?;
    let mut anchors = a.anchors;
    if let Some(p) = &a.distances {
        anchors.extend(read_distances(p)?);
    }
    let mut points = Vec::with_capacity(anchors.len());
    let mut dist = Vec::with_capacity(anchors.len());
    for (id, d) in &anchors {
        let id = StimulusId::new(id.as_str())?;
        let p = embedding
            .point_of(id.as_str())
            .ok_or_else(|| simspace::Error::UnknownGroup(id.to_string()))?;
        points.push(p);
        dist.push(*d);
    }
    let x = triangulate(&points, &dist)?;
    let header: Vec<String> = (0..x.len()).map(|c| format!("dim_{c}")).collect();
    println!("{}", header.join(","));
    let row: Vec<String> = x.iter().map(|v| io::fmt_f64(*v)).collect();
    println!("{}", row.join(","));
    Ok(())
}
