//! `scenegraph` — generate floorplan datasets, train edge classifiers, run
//! detection, and refine the result.
//!
//! Exit codes: 0 on success, 2 on usage or input errors, 3 when numerics
//! fail (non-finite training loss, singular refinement system). Set
//! `SCENEGRAPH_LOG={error|info|debug}` for progress logging on stderr.

use std::fs;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result, bail};
use clap::{Parser, Subcommand, ValueEnum};
use log::{debug, info};

use scenegraph_cli::schema::{
    self, CheckpointFileV1, LayoutFileV1, LoadedModel, PredictionFileV1, RefinedFileV1,
    RefinedPlaneRecord, RoomRecord, WallRecord, mode_label, read_checkpoint_file,
    read_layout_file, read_prediction_file, write_json_file,
};
use scenegraph_cli::svg::render_svg;
use scenegraph_core::RelationType;
use scenegraph_core::cluster::{RoomCluster, WallPair};
use scenegraph_core::evalkit::{DetectionReport, score_rooms, score_walls};
use scenegraph_core::factors::{FactorError, RefineConfig};
use scenegraph_core::neural::{
    DEFAULT_HIDDEN_DIM, EdgeClassifierModel, NeuralError, TrainConfig, train,
};
use scenegraph_core::pipeline::{
    DetectionMode, RelationModel, ScenePipeline, build_factor_graph,
};
use scenegraph_core::proxgraph::{
    DEFAULT_K, ProximityGraph, apply_normalize, build_graph, fit_normalize, label_from_layout,
};
use scenegraph_core::synthgen::{GenConfig, Layout, generate_layout};

#[derive(Parser)]
#[command(name = "scenegraph", version, about = "Plane-based scene graph toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate labeled synthetic layouts into a directory.
    GenDataset {
        /// Output directory, created if missing.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Number of layouts to write.
        #[arg(long, value_name = "N")]
        count: usize,
        /// Base seed; layout i uses seed + i.
        #[arg(long, value_name = "S", default_value_t = 0)]
        seed: u64,
        /// Room count range "A..B", both ends inclusive.
        #[arg(long, value_name = "A..B", value_parser = parse_room_range)]
        rooms: Option<RangeInclusive<usize>>,
        /// Probability of inserting a corridor between room rows.
        #[arg(long, value_name = "P")]
        corridor_prob: Option<f64>,
    },
    /// Train an edge classifier on a layout directory.
    Train {
        /// Directory of layout_*.json files.
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        /// Which relation the model classifies.
        #[arg(long, value_enum)]
        relation: RelationArg,
        /// Training epochs.
        #[arg(long, value_name = "E")]
        epochs: Option<usize>,
        /// Training seed (also initializes parameters).
        #[arg(long, value_name = "S")]
        seed: Option<u64>,
        /// Embedding width of the encoder and decoder.
        #[arg(long, value_name = "H")]
        hidden_dim: Option<usize>,
        /// Adam learning rate.
        #[arg(long, value_name = "LR")]
        learning_rate: Option<f64>,
        /// Checkpoint file to write.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Detect rooms and walls in one layout using trained models.
    Infer {
        /// Model checkpoints; pass twice, one per relation, either order.
        #[arg(long = "model", value_name = "FILE")]
        model: Vec<PathBuf>,
        /// Layout file with the measured planes.
        #[arg(long, value_name = "FILE")]
        layout: PathBuf,
        /// Room grouping threshold profile.
        #[arg(long, value_enum, default_value_t = ModeArg::Conservative)]
        mode: ModeArg,
        /// Prediction file to write.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Score a prediction against ground truth.
    Eval {
        /// Prediction file from `infer`.
        #[arg(long, value_name = "FILE")]
        pred: PathBuf,
        /// Ground-truth layout file.
        #[arg(long, value_name = "FILE")]
        gt: PathBuf,
        /// Optional JSON report output.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Render a layout (and optionally a prediction) as SVG.
    Plot {
        #[arg(long, value_name = "FILE")]
        layout: PathBuf,
        #[arg(long, value_name = "FILE")]
        pred: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Refine detected nodes and planes over the factor graph.
    Refine {
        /// Prediction file from `infer`.
        #[arg(long, value_name = "FILE")]
        pred: PathBuf,
        /// Layout file with the measured planes.
        #[arg(long, value_name = "FILE")]
        layout: PathBuf,
        /// Refined scene file to write.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RelationArg {
    Room,
    Wall,
}

impl From<RelationArg> for RelationType {
    fn from(arg: RelationArg) -> Self {
        match arg {
            RelationArg::Room => RelationType::SameRoom,
            RelationArg::Wall => RelationType::SameWall,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Conservative,
    Greedy,
}

impl From<ModeArg> for DetectionMode {
    fn from(arg: ModeArg) -> Self {
        match arg {
            ModeArg::Conservative => DetectionMode::Conservative,
            ModeArg::Greedy => DetectionMode::Greedy,
        }
    }
}

fn parse_room_range(text: &str) -> Result<RangeInclusive<usize>, String> {
    let (lo, hi) = text
        .split_once("..")
        .ok_or_else(|| format!("expected A..B, found {text}"))?;
    let hi = hi.strip_prefix('=').unwrap_or(hi);
    let lo: usize = lo.trim().parse().map_err(|_| format!("bad lower bound in {text}"))?;
    let hi: usize = hi.trim().parse().map_err(|_| format!("bad upper bound in {text}"))?;
    if lo == 0 || hi < lo {
        return Err(format!("room range must satisfy 1 <= A <= B, found {text}"));
    }
    Ok(lo..=hi)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SCENEGRAPH_LOG", "error"))
        .init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(failure_code(&err))
        }
    }
}

/// 3 for numeric failures, 2 for everything else (usage, input, schema).
fn failure_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if matches!(
            cause.downcast_ref::<NeuralError>(),
            Some(NeuralError::NonFinite { .. })
        ) {
            return 3;
        }
        if matches!(
            cause.downcast_ref::<FactorError>(),
            Some(FactorError::SingularSystem { .. })
        ) {
            return 3;
        }
    }
    2
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenDataset {
            out,
            count,
            seed,
            rooms,
            corridor_prob,
        } => cmd_gen_dataset(&out, count, seed, rooms, corridor_prob),
        Command::Train {
            data,
            relation,
            epochs,
            seed,
            hidden_dim,
            learning_rate,
            out,
        } => cmd_train(
            &data,
            relation.into(),
            epochs,
            seed,
            hidden_dim,
            learning_rate,
            &out,
        ),
        Command::Infer {
            model,
            layout,
            mode,
            out,
        } => cmd_infer(&model, &layout, mode.into(), &out),
        Command::Eval { pred, gt, out } => cmd_eval(&pred, &gt, out.as_deref()),
        Command::Plot { layout, pred, out } => cmd_plot(&layout, pred.as_deref(), &out),
        Command::Refine { pred, layout, out } => cmd_refine(&pred, &layout, &out),
    }
}

fn cmd_gen_dataset(
    out: &Path,
    count: usize,
    seed: u64,
    rooms: Option<RangeInclusive<usize>>,
    corridor_prob: Option<f64>,
) -> Result<()> {
    fs::create_dir_all(out)
        .with_context(|| format!("cannot create output directory {}", out.display()))?;
    let base = GenConfig::default();
    for index in 0..count {
        let config = GenConfig {
            seed: seed + index as u64,
            n_rooms: rooms.clone().unwrap_or_else(|| base.n_rooms.clone()),
            corridor_prob: corridor_prob.unwrap_or(base.corridor_prob),
            ..base.clone()
        };
        let layout = generate_layout(&config)?;
        let path = out.join(format!("layout_{index:05}.json"));
        write_json_file(&path, &LayoutFileV1::from_layout(&layout))?;
        debug!("wrote {}", path.display());
    }
    println!("wrote {count} layouts to {}", out.display());
    Ok(())
}

/// Loads every `layout_*.json` under `data` in filename order.
fn load_layout_dir(data: &Path) -> Result<Vec<Layout>> {
    let entries = fs::read_dir(data)
        .with_context(|| format!("cannot read data directory {}", data.display()))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|path| {
            path.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("layout_") && n.ends_with(".json"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no layout_*.json files in {}", data.display());
    }
    files
        .iter()
        .map(|path| Ok(read_layout_file(path)?))
        .collect()
}

fn labeled_graph(layout: &Layout, relation: RelationType) -> Result<ProximityGraph> {
    let mut graph = build_graph(&layout.planes, DEFAULT_K)?;
    label_from_layout(&mut graph, layout, relation);
    Ok(graph)
}

fn format_ratio(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.3}"),
        None => "-".to_owned(),
    }
}

fn cmd_train(
    data: &Path,
    relation: RelationType,
    epochs: Option<usize>,
    seed: Option<u64>,
    hidden_dim: Option<usize>,
    learning_rate: Option<f64>,
    out: &Path,
) -> Result<()> {
    let layouts = load_layout_dir(data)?;
    let graphs: Vec<ProximityGraph> = layouts
        .iter()
        .map(|layout| labeled_graph(layout, relation))
        .collect::<Result<_>>()?;

    let heldout_len = if graphs.len() >= 2 {
        (graphs.len() / 10).max(1)
    } else {
        0
    };
    let split = graphs.len() - heldout_len;
    let stats = fit_normalize(&graphs[..split]);
    let normalized: Vec<ProximityGraph> =
        graphs.iter().map(|g| apply_normalize(g, &stats)).collect();
    info!(
        "training {relation} on {} layouts, holding out {heldout_len}",
        split
    );

    let mut config = TrainConfig::for_relation(relation);
    if let Some(epochs) = epochs {
        config.epochs = epochs;
    }
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(learning_rate) = learning_rate {
        config.learning_rate = learning_rate;
    }
    let hidden = hidden_dim.unwrap_or(DEFAULT_HIDDEN_DIM);

    let mut model = EdgeClassifierModel::new(relation, hidden, config.seed);
    let report = train(&mut model, &normalized[..split], &normalized[split..], &config)?;
    for epoch in &report.epochs {
        println!(
            "epoch {:>3}  loss {:.6}  heldout P {} R {}",
            epoch.epoch,
            epoch.mean_loss,
            format_ratio(epoch.heldout_precision),
            format_ratio(epoch.heldout_recall),
        );
    }

    let checkpoint = CheckpointFileV1::from_model(&model, &stats, &config, config.seed);
    write_json_file(out, &checkpoint)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn load_model_pair(paths: &[PathBuf]) -> Result<(LoadedModel, LoadedModel)> {
    if paths.len() != 2 {
        bail!("pass --model twice: one room checkpoint and one wall checkpoint");
    }
    let first = read_checkpoint_file(&paths[0])?;
    let second = read_checkpoint_file(&paths[1])?;
    match (first.model.relation, second.model.relation) {
        (RelationType::SameRoom, RelationType::SameWall) => Ok((first, second)),
        (RelationType::SameWall, RelationType::SameRoom) => Ok((second, first)),
        (a, b) => bail!("need one model per relation, got {a} and {b}"),
    }
}

fn cmd_infer(models: &[PathBuf], layout: &Path, mode: DetectionMode, out: &Path) -> Result<()> {
    let (room, wall) = load_model_pair(models)?;
    let layout = read_layout_file(layout)?;
    let pipeline = ScenePipeline::new(
        RelationModel {
            model: room.model,
            stats: room.stats,
        },
        RelationModel {
            model: wall.model,
            stats: wall.stats,
        },
    )?;
    let detection = pipeline.detect(&layout.planes, mode)?;
    println!(
        "detected {} rooms and {} walls ({})",
        detection.rooms.len(),
        detection.walls.len(),
        mode_label(mode),
    );
    write_json_file(out, &PredictionFileV1::from_detection(&detection, mode))?;
    Ok(())
}

fn report_line(report: &DetectionReport) -> String {
    format!(
        "{:<10} precision {}  recall {}  tp {:.2}  fp {:.2}  fn {:.2}",
        report.relation.to_string(),
        format_ratio(report.precision),
        format_ratio(report.recall),
        report.true_positives,
        report.false_positives,
        report.false_negatives,
    )
}

fn cmd_eval(pred: &Path, gt: &Path, out: Option<&Path>) -> Result<()> {
    let (_, detection) = read_prediction_file(pred)?;
    let layout = read_layout_file(gt)?;
    let rooms: Vec<RoomCluster> = detection
        .rooms
        .iter()
        .map(|room| RoomCluster {
            plane_ids: room.plane_ids.clone(),
        })
        .collect();
    let walls: Vec<WallPair> = detection
        .walls
        .iter()
        .map(|wall| WallPair {
            plane_ids: wall.plane_ids.clone(),
            probability: wall.probability,
        })
        .collect();
    let room_report = score_rooms(&rooms, &layout);
    let wall_report = score_walls(&walls, &layout);
    println!("{}", report_line(&room_report));
    println!("{}", report_line(&wall_report));
    if let Some(path) = out {
        write_json_file(path, &serde_json::json!({
            "rooms": room_report,
            "walls": wall_report,
        }))?;
    }
    Ok(())
}

fn cmd_plot(layout: &Path, pred: Option<&Path>, out: &Path) -> Result<()> {
    let layout = read_layout_file(layout)?;
    let detection = match pred {
        Some(path) => Some(read_prediction_file(path)?.1),
        None => None,
    };
    let svg = render_svg(&layout, detection.as_ref());
    fs::write(out, svg).with_context(|| format!("cannot write {}", out.display()))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn refined_file(
    build: &scenegraph_core::pipeline::FactorGraphBuild,
    report: &scenegraph_core::factors::RefineReport,
) -> RefinedFileV1 {
    let graph = &build.graph;
    let mut rooms = Vec::new();
    for node in graph.rooms4() {
        rooms.push(RoomRecord {
            id: format!("room_{:02}", rooms.len()),
            center: [node.center.x, node.center.y],
            plane_ids: node.plane_ids.iter().map(|id| id.as_str().to_owned()).collect(),
        });
    }
    for node in graph.rooms2() {
        rooms.push(RoomRecord {
            id: format!("room_{:02}", rooms.len()),
            center: [node.center.x, node.center.y],
            plane_ids: node.plane_ids.iter().map(|id| id.as_str().to_owned()).collect(),
        });
    }
    let walls = graph
        .walls()
        .enumerate()
        .map(|(i, node)| WallRecord {
            id: format!("wall_{i:02}"),
            center: [node.center.x, node.center.y],
            plane_ids: [
                node.plane_ids[0].as_str().to_owned(),
                node.plane_ids[1].as_str().to_owned(),
            ],
        })
        .collect();
    RefinedFileV1 {
        format_version: schema::FORMAT_VERSION,
        initial_cost: report.initial_cost,
        final_cost: report.final_cost,
        iterations: report.iterations,
        converged: report.converged,
        skipped_rooms: build.skipped_rooms,
        skipped_walls: build.skipped_walls,
        planes: graph
            .planes()
            .map(|(id, var)| {
                let normal = var.normal();
                RefinedPlaneRecord {
                    id: id.as_str().to_owned(),
                    normal: [normal.x, normal.y],
                    d: var.d,
                }
            })
            .collect(),
        rooms,
        walls,
    }
}

fn cmd_refine(pred: &Path, layout: &Path, out: &Path) -> Result<()> {
    let (_, detection) = read_prediction_file(pred)?;
    let layout = read_layout_file(layout)?;
    let mut build = build_factor_graph(&layout.planes, &detection)?;
    if build.skipped_rooms + build.skipped_walls > 0 {
        info!(
            "skipped {} rooms and {} walls with degenerate geometry",
            build.skipped_rooms, build.skipped_walls
        );
    }
    let report = build.graph.refine(&RefineConfig::default())?;
    println!(
        "initial cost {:.6e}\nfinal cost   {:.6e}\n{} iterations, converged: {}",
        report.initial_cost, report.final_cost, report.iterations, report.converged,
    );
    write_json_file(out, &refined_file(&build, &report))?;
    Ok(())
}
