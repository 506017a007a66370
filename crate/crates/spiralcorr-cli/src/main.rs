//! Command-line front end for the spiralcorr library. Subcommands map 1:1
//! onto library calls; all file formats are defined by the library.
//!
//! Exit codes: 0 success, 2 usage, 3 i/o or parse failure, 4 validation or
//! contract violation, 5 numeric failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spiralcorr::eval::{
    evaluate, read_correspondences, robustness_sweep, write_correspondences, RadiusGrid, SweepError,
};
use spiralcorr::features::{
    load_descriptors, parse_feature_table, raw_features, read_vfeat, serialize_batch, write_vfeat,
    FeatureError, FeatureMatrix, RawFeatureKind,
};
use spiralcorr::mesh::{load_mesh, load_mesh_lenient, HalfEdgeMesh, MeshError};
use spiralcorr::model::{
    build_network, count_params, infer, load_checkpoint, save_checkpoint, train, DatasetItem,
    ModelError, NetworkKind, NetworkSpec, TrainConfig,
};
use spiralcorr::nn::{
    cross_entropy, grad_check, jitter_blocks, set_threads, softmax_cross_entropy_backward,
    AdamConfig, Mode,
};
use spiralcorr::rng::derive_rng;
use spiralcorr::spiral::{random_start, spiral_by_ring, spiral_fixed, PAD_VERTEX};
use spiralcorr::VertexId;

const EXIT_IO: u8 = 3;
const EXIT_VALIDATION: u8 = 4;
const EXIT_NUMERIC: u8 = 5;

#[derive(Parser)]
#[command(
    name = "spiralcorr",
    about = "Spiral mesh-neighborhood serialization and correspondence networks",
    version,
    max_term_width = 100
)]
struct Cli {
    /// Worker threads (1 = bit-reproducible single-threaded mode)
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a mesh for manifold violations; prints one line per finding
    ValidateMesh {
        /// OBJ or PLY mesh file
        mesh: PathBuf,
    },
    /// Print every vertex's spiral as `v_idx: id id …` (padding as -1)
    SpiralDump(SpiralDumpArgs),
    /// Descriptor file utilities
    #[command(subcommand)]
    Features(FeaturesCommand),
    /// Train a correspondence network from a key=value config file
    Train {
        /// flat key=value config (see --help of the config keys in README)
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a trained model on a mesh and write `source target` lines
    Infer(InferArgs),
    /// Score predictions against ground truth on the target mesh
    Eval(EvalArgs),
    /// Repeated inference under varying spiral-start seeds
    Sweep(SweepArgs),
    /// Print the exact trainable-parameter count of an architecture
    ParamCount(ParamCountArgs),
    /// Verify analytic gradients against central finite differences
    GradCheck(GradCheckArgs),
}

#[derive(Args)]
struct SpiralDumpArgs {
    /// OBJ or PLY mesh file
    #[arg(long)]
    mesh: PathBuf,
    /// enumerate all rings up to this ring count
    #[arg(long, conflicts_with = "n")]
    k: Option<usize>,
    /// fixed sequence length (pads exhausted disks with -1)
    #[arg(long)]
    n: Option<usize>,
    /// seed for the per-vertex random start choice
    #[arg(long)]
    seed: u64,
}

#[derive(Subcommand)]
enum FeaturesCommand {
    /// Convert a whitespace table (one row per vertex) to a VFEAT1 file
    Convert {
        /// input text table
        #[arg(long)]
        input: PathBuf,
        /// output .vfeat path
        #[arg(long)]
        output: PathBuf,
        /// descriptor name stored in the header
        #[arg(long, default_value = "descriptor")]
        name: String,
    },
    /// Print the header of a VFEAT1 file
    Info { input: PathBuf },
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    mesh: PathBuf,
    /// VFEAT1 descriptors; omit to derive raw features from the mesh
    #[arg(long)]
    features: Option<PathBuf>,
    /// raw feature kind when --features is omitted
    #[arg(long, default_value = "position")]
    raw: String,
    #[arg(long)]
    seed: u64,
    /// output predictions file (`source target` per line)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// predictions file
    #[arg(long)]
    pred: PathBuf,
    /// ground-truth file, same format
    #[arg(long)]
    gt: PathBuf,
    /// target mesh the labels refer to
    #[arg(long)]
    mesh: PathBuf,
    /// radius grid as start:stop:step
    #[arg(long, default_value = "0:0.25:0.0025")]
    radii: String,
    /// output CSV path (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long, default_value = "position")]
    raw: String,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    runs: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "0:0.25:0.0025")]
    radii: String,
    /// output CSV (radius,mean,min,max); stdout if omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ParamCountArgs {
    /// architecture: lstm or fcs
    #[arg(long)]
    net: String,
    /// descriptor dimension D' fed to the first layer
    #[arg(long, default_value_t = 544)]
    input_dim: usize,
    /// template vertex count (output classes)
    #[arg(long, default_value_t = 6890)]
    classes: usize,
    /// sequence length (required for fcs)
    #[arg(long, default_value_t = 20)]
    seq_len: usize,
    /// also print the per-layer breakdown
    #[arg(long)]
    layers: bool,
}

#[derive(Args)]
struct GradCheckArgs {
    /// architecture: lstm or fcs
    #[arg(long, default_value = "lstm")]
    net: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// relative-error tolerance
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    set_threads(cli.threads);
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

struct CmdError {
    code: u8,
    message: String,
}

impl CmdError {
    fn new(code: u8, message: impl Into<String>) -> CmdError {
        CmdError {
            code,
            message: message.into(),
        }
    }
}

impl From<MeshError> for CmdError {
    fn from(err: MeshError) -> CmdError {
        let code = match &err {
            MeshError::Io { .. } | MeshError::Parse { .. } => EXIT_IO,
            MeshError::NonTriangleFace { .. }
            | MeshError::IndexOutOfRange { .. }
            | MeshError::InvalidMesh(_)
            | MeshError::NotAdjacent { .. }
            | MeshError::IsolatedVertex(_) => EXIT_VALIDATION,
        };
        CmdError::new(code, err.to_string())
    }
}

impl From<FeatureError> for CmdError {
    fn from(err: FeatureError) -> CmdError {
        let code = match &err {
            FeatureError::Io { .. } | FeatureError::Header(_) => EXIT_IO,
            FeatureError::VertexCountMismatch { .. } => EXIT_VALIDATION,
            FeatureError::NonFinite { .. } | FeatureError::Degenerate(_) => EXIT_NUMERIC,
        };
        CmdError::new(code, err.to_string())
    }
}

impl From<ModelError> for CmdError {
    fn from(err: ModelError) -> CmdError {
        let code = match &err {
            ModelError::NonFiniteLoss { .. } | ModelError::Adam(_) => EXIT_NUMERIC,
            ModelError::Feature(e) => return CmdError::from_feature_ref(e),
            _ => EXIT_VALIDATION,
        };
        CmdError::new(code, err.to_string())
    }
}

impl CmdError {
    fn from_feature_ref(err: &FeatureError) -> CmdError {
        let code = match err {
            FeatureError::Io { .. } | FeatureError::Header(_) => EXIT_IO,
            FeatureError::VertexCountMismatch { .. } => EXIT_VALIDATION,
            FeatureError::NonFinite { .. } | FeatureError::Degenerate(_) => EXIT_NUMERIC,
        };
        CmdError::new(code, err.to_string())
    }
}

impl From<spiralcorr::eval::EvalError> for CmdError {
    fn from(err: spiralcorr::eval::EvalError) -> CmdError {
        use spiralcorr::eval::EvalError;
        let code = match &err {
            EvalError::Io { .. } | EvalError::BadFile { .. } => EXIT_IO,
            _ => EXIT_VALIDATION,
        };
        CmdError::new(code, err.to_string())
    }
}

impl From<spiralcorr::model::CheckpointError> for CmdError {
    fn from(err: spiralcorr::model::CheckpointError) -> CmdError {
        CmdError::new(EXIT_IO, err.to_string())
    }
}

impl From<std::io::Error> for CmdError {
    fn from(err: std::io::Error) -> CmdError {
        CmdError::new(EXIT_IO, err.to_string())
    }
}

fn write_or_print(out: &Option<PathBuf>, text: &str) -> Result<(), CmdError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(CmdError::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_net(token: &str) -> Result<NetworkKind, CmdError> {
    NetworkKind::parse(token)
        .ok_or_else(|| CmdError::new(EXIT_VALIDATION, format!("unknown network '{token}'")))
}

fn load_features_or_raw(
    mesh: &HalfEdgeMesh,
    features: &Option<PathBuf>,
    raw: &str,
) -> Result<FeatureMatrix, CmdError> {
    match features {
        Some(path) => Ok(load_descriptors(path, mesh)?),
        None => {
            let kind = RawFeatureKind::parse(raw).ok_or_else(|| {
                CmdError::new(EXIT_VALIDATION, format!("unknown raw feature kind '{raw}'"))
            })?;
            Ok(raw_features(mesh, kind)?)
        }
    }
}

fn parse_radii(spec: &str) -> Result<Vec<f64>, CmdError> {
    RadiusGrid::parse(spec).map(|g| g.radii()).ok_or_else(|| {
        CmdError::new(
            EXIT_VALIDATION,
            format!("bad radius grid '{spec}' (expected start:stop:step)"),
        )
    })
}

fn run(command: Command) -> Result<(), CmdError> {
    match command {
        Command::ValidateMesh { mesh } => {
            let mesh = load_mesh_lenient(&mesh)?;
            let report = mesh.validate();
            print!("{report}");
            if report.is_clean() {
                println!("ok\t-\tmesh passes manifold validation");
                Ok(())
            } else {
                Err(CmdError::new(
                    EXIT_VALIDATION,
                    format!("{} violation(s) found", report.violations.len()),
                ))
            }
        }
        Command::SpiralDump(args) => spiral_dump(args),
        Command::Features(cmd) => features_cmd(cmd),
        Command::Train { config } => train_cmd(&config),
        Command::Infer(args) => infer_cmd(args),
        Command::Eval(args) => {
            let mesh = load_mesh(&args.mesh)?;
            let pred = read_correspondences(&args.pred)?;
            let gt = read_correspondences(&args.gt)?;
            let radii = parse_radii(&args.radii)?;
            let curve = evaluate(&pred, &gt, &mesh, &radii)?;
            write_or_print(&args.out, &curve.to_csv())
        }
        Command::Sweep(args) => sweep_cmd(args),
        Command::ParamCount(args) => {
            let kind = parse_net(&args.net)?;
            let spec = match kind {
                NetworkKind::LstmNet => {
                    NetworkSpec::lstm_net(args.input_dim, args.seq_len.max(1), args.classes)
                }
                NetworkKind::FcsNet => {
                    NetworkSpec::fcs_net(args.input_dim, args.seq_len, args.classes)
                }
            };
            let network = build_network(spec, &mut derive_rng(0, &[0]));
            if args.layers {
                for (name, count) in network.layer_param_counts() {
                    println!("{name}\t{count}");
                }
            }
            println!("{}", count_params(&network));
            Ok(())
        }
        Command::GradCheck(args) => grad_check_cmd(args),
    }
}

fn spiral_dump(args: SpiralDumpArgs) -> Result<(), CmdError> {
    let mesh = load_mesh(&args.mesh)?;
    let mut lines = String::new();
    for v in 0..mesh.vertex_count() {
        let mut rng =
            spiralcorr::rng::vertex_rng(args.seed, spiralcorr::features::START_DRAW_TAG, v);
        let start = random_start(&mesh, VertexId(v), &mut rng)?;
        let ids: Vec<String> = match (args.k, args.n) {
            (Some(k), None) => spiral_by_ring(&mesh, VertexId(v), k, start)?
                .vertices
                .iter()
                .map(|w| w.0.to_string())
                .collect(),
            (None, Some(n)) => spiral_fixed(&mesh, VertexId(v), n, start)?
                .vertices
                .iter()
                .map(|w| {
                    if *w == PAD_VERTEX {
                        "-1".to_string()
                    } else {
                        w.0.to_string()
                    }
                })
                .collect(),
            _ => return Err(CmdError::new(2, "exactly one of --k or --n must be given")),
        };
        lines.push_str(&format!("{v}: {}\n", ids.join(" ")));
    }
    print!("{lines}");
    Ok(())
}

fn features_cmd(cmd: FeaturesCommand) -> Result<(), CmdError> {
    match cmd {
        FeaturesCommand::Convert {
            input,
            output,
            name,
        } => {
            let text = std::fs::read_to_string(&input)?;
            let matrix = parse_feature_table(&text, &name)?;
            write_vfeat(&output, &matrix)?;
            println!(
                "wrote {} ({} vertices x {} dims)",
                output.display(),
                matrix.vertex_count(),
                matrix.dim()
            );
            Ok(())
        }
        FeaturesCommand::Info { input } => {
            let matrix = read_vfeat(&input)?;
            println!(
                "{} {} {}",
                matrix.vertex_count(),
                matrix.dim(),
                matrix.descriptor_name
            );
            Ok(())
        }
    }
}

/// Flat key=value training config. Lists are comma-separated. Keys:
/// net, epochs, seed, lr, beta1, beta2, epsilon, n, augment, normalize,
/// dropout, widths, classes, meshes, features (paths or raw:<kind>),
/// labels (paths or `identity`), val_meshes, val_features, val_labels, out.
struct ConfigFile {
    map: std::collections::HashMap<String, String>,
}

impl ConfigFile {
    fn load(path: &Path) -> Result<ConfigFile, CmdError> {
        let text = std::fs::read_to_string(path)?;
        let mut map = std::collections::HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| {
                CmdError::new(EXIT_IO, format!("config line {} lacks '='", idx + 1))
            })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(ConfigFile { map })
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, CmdError> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                CmdError::new(EXIT_VALIDATION, format!("bad value for '{key}': '{v}'"))
            }),
        }
    }

    fn require(&self, key: &str) -> Result<&str, CmdError> {
        self.map
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| CmdError::new(EXIT_VALIDATION, format!("config key '{key}' missing")))
    }

    fn list(&self, key: &str) -> Vec<String> {
        self.map
            .get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            })
            .unwrap_or_default()
    }
}

fn load_dataset(
    mesh_paths: &[String],
    feature_spec: &[String],
    label_spec: &[String],
) -> Result<Vec<DatasetItem>, CmdError> {
    let mut items = Vec::new();
    for (i, mesh_path) in mesh_paths.iter().enumerate() {
        let mesh = load_mesh(Path::new(mesh_path))?;
        let features = match feature_spec.get(i.min(feature_spec.len().saturating_sub(1))) {
            Some(spec) if spec.starts_with("raw:") => {
                let kind = RawFeatureKind::parse(&spec[4..]).ok_or_else(|| {
                    CmdError::new(EXIT_VALIDATION, format!("unknown raw kind in '{spec}'"))
                })?;
                raw_features(&mesh, kind)?
            }
            Some(path) => load_descriptors(Path::new(path), &mesh)?,
            None => {
                return Err(CmdError::new(
                    EXIT_VALIDATION,
                    "features list shorter than meshes list",
                ))
            }
        };
        let labels = match label_spec.get(i.min(label_spec.len().saturating_sub(1))) {
            Some(spec) if spec == "identity" => (0..mesh.vertex_count()).collect(),
            Some(path) => read_correspondences(Path::new(path))?,
            None => {
                return Err(CmdError::new(
                    EXIT_VALIDATION,
                    "labels list shorter than meshes list",
                ))
            }
        };
        items.push(DatasetItem {
            mesh,
            features,
            labels,
        });
    }
    Ok(items)
}

fn train_cmd(config_path: &Path) -> Result<(), CmdError> {
    let cfg = ConfigFile::load(config_path)?;
    let kind = parse_net(cfg.require("net")?)?;
    let seq_len: usize = cfg.get("n", 20)?;
    let augment: u8 = cfg.get("augment", 0)?;
    let augment = augment != 0;
    let normalize: u8 = cfg.get("normalize", 0)?;

    let train_items = load_dataset(
        &cfg.list("meshes"),
        &cfg.list("features"),
        &cfg.list("labels"),
    )?;
    if train_items.is_empty() {
        return Err(CmdError::new(
            EXIT_VALIDATION,
            "config lists no training meshes",
        ));
    }
    let val_items = load_dataset(
        &cfg.list("val_meshes"),
        &cfg.list("val_features"),
        &cfg.list("val_labels"),
    )?;

    let base_dim = train_items[0].features.dim();
    let input_dim = base_dim + if augment { 2 } else { 0 };
    let classes: usize = match cfg.map.get("classes") {
        Some(v) => v
            .parse()
            .map_err(|_| CmdError::new(EXIT_VALIDATION, "bad 'classes'"))?,
        None => train_items
            .iter()
            .flat_map(|i| i.labels.iter())
            .max()
            .map(|&m| m + 1)
            .unwrap_or(0),
    };

    let mut spec = match kind {
        NetworkKind::LstmNet => NetworkSpec::lstm_net(input_dim, seq_len, classes),
        NetworkKind::FcsNet => NetworkSpec::fcs_net(input_dim, seq_len, classes),
    };
    if let Some(widths) = cfg.map.get("widths") {
        let parts: Result<Vec<usize>, _> = widths.split(',').map(|t| t.trim().parse()).collect();
        let parts = parts.map_err(|_| CmdError::new(EXIT_VALIDATION, "bad 'widths' list"))?;
        if parts.len() != 5 {
            return Err(CmdError::new(EXIT_VALIDATION, "'widths' must list 5 sizes"));
        }
        spec = spec.with_widths([parts[0], parts[1], parts[2], parts[3], parts[4]]);
    }
    spec = spec.with_dropout(cfg.get("dropout", 0.3)?);

    let train_config = TrainConfig {
        epochs: cfg.get("epochs", 100)?,
        seed: cfg.get("seed", 0)?,
        adam: AdamConfig {
            lr: cfg.get("lr", 0.001)?,
            beta1: cfg.get("beta1", 0.9)?,
            beta2: cfg.get("beta2", 0.999)?,
            epsilon: cfg.get("epsilon", 1e-8)?,
        },
        augment,
        normalize: normalize != 0,
    };

    let result = train(spec, &train_items, &val_items, &train_config)?;
    for stats in &result.history {
        if stats.epoch % 10 == 0 || stats.epoch + 1 == result.history.len() {
            println!(
                "epoch {}\ttrain_loss {:.6}\tval_loss {:.6}\tval_acc {:.4}",
                stats.epoch, stats.train_loss, stats.val_loss, stats.val_accuracy
            );
        }
    }
    let out = PathBuf::from(cfg.require("out")?);
    save_checkpoint(&out, &result.checkpoint)?;
    println!(
        "saved {} (best epoch {}, val score {:.6})",
        out.display(),
        result.checkpoint.meta.epoch,
        result.checkpoint.meta.val_score
    );
    Ok(())
}

fn infer_cmd(args: InferArgs) -> Result<(), CmdError> {
    let mesh = load_mesh(&args.mesh)?;
    let checkpoint = load_checkpoint(&args.checkpoint)?;
    let features = load_features_or_raw(&mesh, &args.features, &args.raw)?;
    let prediction = infer(&checkpoint, &mesh, &features, args.seed, false)?;
    write_correspondences(&args.out, &prediction.targets)?;
    println!(
        "wrote {} ({} vertices)",
        args.out.display(),
        prediction.targets.len()
    );
    Ok(())
}

fn sweep_cmd(args: SweepArgs) -> Result<(), CmdError> {
    let mesh = load_mesh(&args.mesh)?;
    let checkpoint = load_checkpoint(&args.checkpoint)?;
    let features = load_features_or_raw(&mesh, &args.features, &args.raw)?;
    let gt = read_correspondences(&args.gt)?;
    let radii = parse_radii(&args.radii)?;
    let (_, spread) = robustness_sweep(
        &checkpoint,
        &mesh,
        &features,
        &gt,
        args.runs,
        args.seed,
        &radii,
    )
    .map_err(|e| match e {
        SweepError::Predict(m) => CmdError::from(m),
        SweepError::Eval(e) => CmdError::from(e),
    })?;
    eprintln!("max spread across runs: {}", spread.max_spread());
    write_or_print(&args.out, &spread.to_csv())
}

fn grad_check_cmd(args: GradCheckArgs) -> Result<(), CmdError> {
    use spiralcorr::mesh::primitives;

    let kind = parse_net(&args.net)?;
    let mesh = primitives::triangulated_grid(5, 2);
    let classes = mesh.vertex_count();
    let spec = match kind {
        NetworkKind::LstmNet => NetworkSpec::lstm_net(3, 6, classes).with_widths([4, 5, 6, 7, 8]),
        NetworkKind::FcsNet => NetworkSpec::fcs_net(3, 6, classes).with_widths([4, 5, 6, 7, 8]),
    }
    .with_dropout(0.0);
    let features = raw_features(&mesh, RawFeatureKind::Position)?;
    let batch = serialize_batch(&mesh, &features, 6, args.seed, false)?;
    let targets: Vec<usize> = (0..classes).collect();

    let mut network = build_network(spec, &mut derive_rng(args.seed, &[1]));
    // biases off zero: a pre-activation on the ReLU kink has no central
    // difference
    jitter_blocks(&mut network, &mut derive_rng(args.seed, &[3]), 0.3);
    let mut eval_rng = derive_rng(args.seed, &[2]);
    let (probs, cache) = network.forward(&batch, Mode::Eval, &mut eval_rng);
    let d_logits = softmax_cross_entropy_backward(&probs, &targets);
    let grads = network.backward(&batch, &cache, &d_logits);

    let report = grad_check(
        &mut network,
        |net| {
            let mut rng = derive_rng(0, &[0]);
            let (p, _) = net.forward(&batch, Mode::Eval, &mut rng);
            cross_entropy(&p, &targets)
        },
        &grads.blocks(),
        1e-6,
        Some(40),
    );
    println!("{report}");
    if report.passes(args.tolerance) {
        println!("gradient check passed at tolerance {}", args.tolerance);
        Ok(())
    } else {
        Err(CmdError::new(
            EXIT_NUMERIC,
            format!(
                "gradient check failed: max rel err {} exceeds {}",
                report.max_rel_error(),
                args.tolerance
            ),
        ))
    }
}
