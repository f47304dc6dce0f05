//! End-to-end tests of the `scenegraph` binary: every subcommand, exit
//! codes, and output formats, all on small synthetic inputs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use scenegraph_cli::schema::{
    CheckpointFileV1, DetectedWallRecord, LayoutFileV1, PredEdgeRecord, PredictionFileV1,
    RefinedFileV1, RoomRecord, read_json_file, read_layout_file, write_json_file,
};
use scenegraph_core::factors::room_center;
use scenegraph_core::synthgen::EdgeLabel;
use tempfile::TempDir;

fn scenegraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scenegraph"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn assert_exit(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        stdout_of(output),
        String::from_utf8_lossy(&output.stderr),
    );
}

fn path_str(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Generates a small dataset and returns the layout paths in order.
fn small_dataset(dir: &Path, count: usize, extra: &[&str]) -> Vec<PathBuf> {
    let count_s = count.to_string();
    let mut args = vec![
        "gen-dataset",
        "--out",
        path_str(dir),
        "--count",
        &count_s,
        "--seed",
        "1",
    ];
    args.extend_from_slice(extra);
    assert_exit(&scenegraph(&args), 0);
    (0..count)
        .map(|i| dir.join(format!("layout_{i:05}.json")))
        .collect()
}

/// Builds a prediction file that reproduces the layout's ground truth.
fn perfect_prediction(layout_path: &Path, pred_path: &Path) {
    let layout = read_layout_file(layout_path).unwrap();
    let center_of = |ids: &[scenegraph_core::geometry::PlaneId]| {
        let c = room_center(ids, &layout.planes).unwrap();
        [c.x, c.y]
    };
    let rooms = layout
        .rooms
        .iter()
        .map(|room| RoomRecord {
            id: room.id.clone(),
            center: center_of(&room.plane_ids),
            plane_ids: room.plane_ids.iter().map(|id| id.as_str().to_owned()).collect(),
        })
        .collect();
    let walls = layout
        .walls
        .iter()
        .map(|wall| DetectedWallRecord {
            id: wall.id.clone(),
            center: center_of(&wall.plane_ids),
            plane_ids: [
                wall.plane_ids[0].as_str().to_owned(),
                wall.plane_ids[1].as_str().to_owned(),
            ],
            probability: 1.0,
        })
        .collect();
    let edges = |label: EdgeLabel| -> Vec<PredEdgeRecord> {
        layout
            .gt_edges
            .iter()
            .filter(|e| e.label == label)
            .map(|e| PredEdgeRecord {
                src: e.src.as_str().to_owned(),
                dst: e.dst.as_str().to_owned(),
                probability: 1.0,
            })
            .collect()
    };
    let file = PredictionFileV1 {
        format_version: 1,
        mode: "conservative".to_owned(),
        rooms,
        walls,
        room_edges: edges(EdgeLabel::SameRoom),
        wall_edges: edges(EdgeLabel::SameWall),
    };
    write_json_file(pred_path, &file).unwrap();
}

/// Trains a deliberately tiny model just to produce a valid checkpoint.
fn tiny_checkpoint(data: &Path, relation: &str, out: &Path) {
    let output = scenegraph(&[
        "train",
        "--data",
        path_str(data),
        "--relation",
        relation,
        "--epochs",
        "1",
        "--hidden-dim",
        "4",
        "--out",
        path_str(out),
    ]);
    assert_exit(&output, 0);
}

#[test]
fn gen_dataset_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let files_a = small_dataset(&a, 3, &[]);
    let files_b = small_dataset(&b, 3, &[]);
    for (fa, fb) in files_a.iter().zip(&files_b) {
        let bytes_a = std::fs::read(fa).unwrap();
        let bytes_b = std::fs::read(fb).unwrap();
        assert!(!bytes_a.is_empty());
        assert_eq!(bytes_a, bytes_b, "{} differs", fa.display());
    }
}

#[test]
fn gen_dataset_rejects_an_unwritable_path() {
    let tmp = TempDir::new().unwrap();
    let blocker = tmp.path().join("blocker");
    std::fs::write(&blocker, "not a directory").unwrap();
    let out = blocker.join("nested");
    let output = scenegraph(&[
        "gen-dataset",
        "--out",
        path_str(&out),
        "--count",
        "1",
        "--seed",
        "0",
    ]);
    assert_exit(&output, 2);
}

#[test]
fn unknown_flags_exit_with_usage_error() {
    let output = scenegraph(&["gen-dataset", "--nonsense"]);
    assert_exit(&output, 2);
}

#[test]
fn train_smoke_run_writes_a_loadable_checkpoint() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    small_dataset(&data, 3, &[]);
    let out = tmp.path().join("room.json");
    let output = scenegraph(&[
        "train",
        "--data",
        path_str(&data),
        "--relation",
        "room",
        "--epochs",
        "1",
        "--hidden-dim",
        "4",
        "--out",
        path_str(&out),
    ]);
    assert_exit(&output, 0);
    assert!(stdout_of(&output).contains("epoch   0"));
    let checkpoint: CheckpointFileV1 = read_json_file(&out).unwrap();
    let loaded = checkpoint.to_model().unwrap();
    assert_eq!(loaded.model.hidden_dim, 4);
    assert_eq!(loaded.train_config.epochs, 1);
}

#[test]
fn train_without_data_exits_2() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("model.json");
    let output = scenegraph(&[
        "train",
        "--data",
        path_str(&tmp.path().join("missing")),
        "--relation",
        "wall",
        "--out",
        path_str(&out),
    ]);
    assert_exit(&output, 2);
}

#[test]
fn infer_writes_a_parseable_prediction() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    let layouts = small_dataset(&data, 3, &[]);
    let room = tmp.path().join("room.json");
    let wall = tmp.path().join("wall.json");
    tiny_checkpoint(&data, "room", &room);
    tiny_checkpoint(&data, "wall", &wall);
    let pred = tmp.path().join("pred.json");
    let output = scenegraph(&[
        "infer",
        "--model",
        path_str(&wall),
        "--model",
        path_str(&room),
        "--layout",
        path_str(&layouts[0]),
        "--mode",
        "greedy",
        "--out",
        path_str(&pred),
    ]);
    assert_exit(&output, 0);
    let file: PredictionFileV1 = read_json_file(&pred).unwrap();
    assert_eq!(file.mode, "greedy");
    let detection = file.to_detection().unwrap();
    assert_eq!(detection.room_edges.len(), detection.wall_edges.len());
    assert!(!detection.room_edges.is_empty());
}

#[test]
fn infer_with_two_room_models_exits_2() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    let layouts = small_dataset(&data, 3, &[]);
    let room = tmp.path().join("room.json");
    tiny_checkpoint(&data, "room", &room);
    let output = scenegraph(&[
        "infer",
        "--model",
        path_str(&room),
        "--model",
        path_str(&room),
        "--layout",
        path_str(&layouts[0]),
        "--out",
        path_str(&tmp.path().join("pred.json")),
    ]);
    assert_exit(&output, 2);
}

#[test]
fn infer_on_an_empty_layout_writes_an_empty_prediction() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    small_dataset(&data, 3, &[]);
    let room = tmp.path().join("room.json");
    let wall = tmp.path().join("wall.json");
    tiny_checkpoint(&data, "room", &room);
    tiny_checkpoint(&data, "wall", &wall);
    let empty = tmp.path().join("empty.json");
    write_json_file(
        &empty,
        &LayoutFileV1 {
            format_version: 1,
            planes: vec![],
            rooms: vec![],
            walls: vec![],
            gt_edges: vec![],
        },
    )
    .unwrap();
    let pred = tmp.path().join("pred.json");
    let output = scenegraph(&[
        "infer",
        "--model",
        path_str(&room),
        "--model",
        path_str(&wall),
        "--layout",
        path_str(&empty),
        "--out",
        path_str(&pred),
    ]);
    assert_exit(&output, 0);
    let file: PredictionFileV1 = read_json_file(&pred).unwrap();
    let detection = file.to_detection().unwrap();
    assert!(detection.rooms.is_empty());
    assert!(detection.walls.is_empty());
}

#[test]
fn eval_of_a_perfect_prediction_prints_ones() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    let layouts = small_dataset(&data, 1, &[]);
    let pred = tmp.path().join("pred.json");
    perfect_prediction(&layouts[0], &pred);
    let output = scenegraph(&[
        "eval",
        "--pred",
        path_str(&pred),
        "--gt",
        path_str(&layouts[0]),
    ]);
    assert_exit(&output, 0);
    let stdout = stdout_of(&output);
    assert!(stdout.contains("same_room"), "{stdout}");
    assert!(stdout.contains("same_wall"), "{stdout}");
    assert_eq!(stdout.matches("1.000").count(), 4, "{stdout}");
}

#[test]
fn plot_of_a_four_room_layout_renders_16_segments() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    let layouts = small_dataset(&data, 1, &["--rooms", "4..4", "--corridor-prob", "0"]);
    let fig = tmp.path().join("fig.svg");
    let output = scenegraph(&[
        "plot",
        "--layout",
        path_str(&layouts[0]),
        "--out",
        path_str(&fig),
    ]);
    assert_exit(&output, 0);
    let svg = std::fs::read_to_string(&fig).unwrap();
    assert!(svg.matches("<line").count() >= 16);
}

#[test]
fn refine_on_ground_truth_reaches_machine_zero() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    let layouts = small_dataset(&data, 1, &[]);
    let pred = tmp.path().join("pred.json");
    perfect_prediction(&layouts[0], &pred);
    let refined = tmp.path().join("refined.json");
    let output = scenegraph(&[
        "refine",
        "--pred",
        path_str(&pred),
        "--layout",
        path_str(&layouts[0]),
        "--out",
        path_str(&refined),
    ]);
    assert_exit(&output, 0);
    assert!(stdout_of(&output).contains("final cost"));
    let file: RefinedFileV1 = read_json_file(&refined).unwrap();
    assert!(file.final_cost < 1e-12, "final cost {}", file.final_cost);
    assert!(file.converged);
    assert_eq!(file.skipped_rooms, 0);
    assert!(!file.planes.is_empty());
    assert!(!file.rooms.is_empty());
}

#[test]
fn schema_violations_exit_2_with_a_pointer() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    let layouts = small_dataset(&data, 1, &[]);
    let mut file: LayoutFileV1 = read_json_file(&layouts[0]).unwrap();
    file.planes[0].width += 1.0;
    let broken = tmp.path().join("broken.json");
    write_json_file(&broken, &file).unwrap();
    let fig = tmp.path().join("fig.svg");
    let output = scenegraph(&["plot", "--layout", path_str(&broken), "--out", path_str(&fig)]);
    assert_exit(&output, 2);
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("/planes/0/width"), "{stderr}");
}
