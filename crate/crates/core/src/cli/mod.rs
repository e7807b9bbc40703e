//! The `tsg` command line: `synth`, `fuse`, `build`, `dump`.

mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

pub use config::{merge, resolve_params, CliConfig};

use crate::error::{Error, Result};
use crate::fusion::fuse_all;
use crate::graph::{self, PointLabel, QuerySpec, SceneGraph, TaskFile, TaskParams, TaskSpec};
use crate::ingest::{self, load_camera, load_frames, synth_scene, write_frames, SceneSpec};
use crate::places::{brushfire, morph_smooth, pgm, OccupancyGrid, PlaceGraph};
use crate::prompt::{object_prompt, QueryKind};

/// Exit code for success.
pub const EXIT_OK: i32 = 0;

#[derive(Debug, Parser)]
#[command(name = "tsg", version, about = "Task-driven terrain-aware scene graphs")]
pub struct Cli {
    /// Parameter file (TOML, or JSON)
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene: frames, map, ground truth, and a matching task file
    Synth(SynthArgs),
    /// Fuse frame segment embeddings onto a global map
    Fuse(FuseArgs),
    /// Project a fused cloud onto a task and export the scene graph
    Build(BuildArgs),
    /// Write a debug artifact of an exported graph
    Dump(DumpArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scene spec (JSON); the built-in T layout when omitted
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Embedding dimension, overriding the spec
    #[arg(long)]
    pub dim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    pub frames: PathBuf,
    pub map: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub match_radius: Option<f64>,
    #[arg(long)]
    pub interior_erosion: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    pub cloud: PathBuf,
    pub task: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Inline embeddings in the export
    #[arg(long)]
    pub embed: bool,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Prompt bank used when the task file names none
    #[arg(long)]
    pub prompt_bank: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamFlags,
}

#[derive(Debug, Default, Args)]
pub struct ParamFlags {
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub min_pts: Option<usize>,
    #[arg(long)]
    pub resolution: Option<f64>,
    #[arg(long)]
    pub morph_radius: Option<usize>,
    #[arg(long)]
    pub min_clearance: Option<f64>,
    #[arg(long)]
    pub spur_length: Option<usize>,
    #[arg(long)]
    pub deviation_threshold: Option<f64>,
    #[arg(long)]
    pub max_edge_length: Option<usize>,
    #[arg(long)]
    pub max_refine_iterations: Option<usize>,
}

impl ParamFlags {
    fn overlay(&self) -> Value {
        let mut dbscan = Map::new();
        put(&mut dbscan, "eps", self.eps);
        put(&mut dbscan, "min_pts", self.min_pts);
        let mut places = Map::new();
        put(&mut places, "resolution", self.resolution);
        put(&mut places, "morph_radius", self.morph_radius);
        put(&mut places, "min_clearance", self.min_clearance);
        put(&mut places, "spur_length", self.spur_length);
        put(&mut places, "deviation_threshold", self.deviation_threshold);
        put(&mut places, "max_edge_length", self.max_edge_length);
        put(&mut places, "max_refine_iterations", self.max_refine_iterations);
        json!({"dbscan": dbscan, "places": places})
    }
}

fn put<T: Into<Value>>(m: &mut Map<String, Value>, key: &str, v: Option<T>) {
    if let Some(v) = v {
        m.insert(key.to_string(), v.into());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Artifact {
    /// Smoothed occupancy grid (PGM)
    Grid,
    /// Distance map scaled to 0-255 (PGM)
    Distance,
    /// Skeleton cells, nodes brightest (PGM)
    Skeleton,
    /// Place graphs and object attachments (Graphviz DOT)
    GraphDot,
    /// Top view of layer-1 labels (PGM)
    Labels,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    pub graph: PathBuf,
    #[arg(value_enum)]
    pub what: Artifact,
    #[arg(long)]
    pub out: PathBuf,
    /// Terrain to dump; the first place graph when omitted (all terrains for graph-dot)
    #[arg(long)]
    pub terrain: Option<String>,
}

/// Parses arguments, runs the command, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => CliConfig::load(p)?,
        None => CliConfig::default(),
    };
    match &cli.command {
        Command::Synth(a) => cmd_synth(a, &config),
        Command::Fuse(a) => cmd_fuse(a, &config),
        Command::Build(a) => cmd_build(a, &config),
        Command::Dump(a) => cmd_dump(a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| Error::json(path.display().to_string(), e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Task file matching a scene spec: every terrain label and object class once, in spec order.
pub fn task_for_scene(spec: &SceneSpec) -> Result<TaskFile> {
    let mut queries: Vec<QuerySpec> = Vec::new();
    for t in &spec.terrain {
        if queries.iter().any(|q| q.text == t.label) {
            continue;
        }
        queries.push(QuerySpec {
            text: t.label.clone(),
            kind: QueryKind::Terrain,
            threshold: None,
            embedding: t.embedding.clone(),
        });
    }
    for o in &spec.objects {
        let text = object_prompt(&o.class);
        if queries.iter().any(|q| q.text == text) {
            continue;
        }
        queries.push(QuerySpec {
            text,
            kind: QueryKind::Object,
            threshold: None,
            embedding: o.embedding.clone(),
        });
    }
    Ok(TaskFile {
        task: "synthetic scene".into(),
        timestamp: spec.trajectory.len() as f64 * spec.frame_interval,
        queries,
        prompt_bank: None,
        params: TaskParams::default(),
    })
}

pub fn cmd_synth(a: &SynthArgs, config: &CliConfig) -> Result<()> {
    let mut spec = match &a.spec {
        Some(p) => SceneSpec::load(p)?,
        None => SceneSpec::t_layout(),
    };
    if let Some(dim) = a.dim.or(config.dim) {
        spec.dim = dim;
        spec.validate()?;
    }
    let scene = synth_scene(&spec, a.seed)?;
    create_dir(&a.out)?;
    let n = write_frames(a.out.join("frames"), &scene.camera, &scene.frames)?;
    ingest::save_cloud(&scene.map(), a.out.join("map.mspc"))?;
    ingest::save_cloud(&scene.ground_truth, a.out.join("ground_truth.mspc"))?;
    write_json(&a.out.join("objects.json"), &scene.objects)?;
    write_json(&a.out.join("spec.json"), &spec)?;
    write_json(&a.out.join("task.json"), &task_for_scene(&spec)?)?;
    println!(
        "synth: {n} frames, {} map points, {} objects -> {}",
        scene.ground_truth.len(),
        scene.objects.len(),
        a.out.display()
    );
    Ok(())
}

pub fn cmd_fuse(a: &FuseArgs, config: &CliConfig) -> Result<()> {
    let mut map = match a.dim.or(config.dim) {
        Some(d) => ingest::load_cloud_with_dim(&a.map, d)?,
        None => ingest::load_cloud(&a.map)?,
    };
    let mut flags = Map::new();
    put(&mut flags, "match_radius", a.match_radius);
    put(&mut flags, "interior_erosion", a.interior_erosion);
    let params = resolve_params(&TaskParams::default(), config, &json!({"association": flags}))?;

    let mut frames = load_frames(&a.frames)?.peekable();
    if frames.peek().is_none() {
        log::warn!("no frames in {}; map written unchanged", a.frames.display());
        eprintln!("warning: no frames in {}; map written unchanged", a.frames.display());
        return ingest::save_cloud(&map, &a.out);
    }
    let camera = load_camera(&a.frames)?;
    let total = fuse_all(&mut map, frames, &camera, &params.association, |p| {
        println!(
            "frame {:>4}  t={:.3}  scan {}  projected {}  associated {}  matched {}",
            p.index, p.timestamp, p.stats.scan_points, p.stats.projected, p.stats.associated, p.stats.matched
        );
    })?;
    let observed = map.points.iter().filter(|p| p.observations > 0).count();
    println!(
        "fused {} frames: matched {}/{} scan points; {}/{} map points observed",
        total.frames,
        total.matched,
        total.scan_points,
        observed,
        map.len()
    );
    ingest::save_cloud(&map, &a.out)
}

fn absolute(p: &Path) -> Result<PathBuf> {
    std::path::absolute(p).map_err(|e| Error::io(p, e))
}

pub fn cmd_build(a: &BuildArgs, config: &CliConfig) -> Result<()> {
    let cloud = match a.dim.or(config.dim) {
        Some(d) => ingest::load_cloud_with_dim(&a.cloud, d)?,
        None => ingest::load_cloud(&a.cloud)?,
    };
    let text = std::fs::read_to_string(&a.task).map_err(|e| Error::io(&a.task, e))?;
    let mut doc: TaskFile =
        serde_json::from_str(&text).map_err(|e| Error::json(a.task.display().to_string(), e))?;
    doc.params = resolve_params(&doc.params, config, &a.params.overlay())?;
    if doc.prompt_bank.is_none() {
        doc.prompt_bank = match (&a.prompt_bank, &config.prompt_bank) {
            (Some(p), _) | (None, Some(p)) => Some(absolute(p)?),
            (None, None) => None,
        };
    }
    let base = a.task.parent().unwrap_or(Path::new("."));
    let task = TaskSpec::from_file_doc(&doc, base, cloud.dim)?;
    let g = graph::build_scene_graph(&cloud, &task)?;
    graph::export(&g, &a.out, a.embed)?;
    print_counts(&g);
    Ok(())
}

fn print_counts(g: &SceneGraph) {
    println!("layer1 points: {}", g.layer1.len());
    println!("layer2 objects: {}", g.layer2.len());
    println!(
        "layer3 place graphs: {} (nodes {}, edges {})",
        g.layer3.len(),
        g.place_node_count(),
        g.place_edge_count()
    );
    for pg in &g.layer3 {
        println!(
            "  {}: nodes {}, edges {}, components {}, refine rounds {}{}",
            pg.terrain,
            pg.nodes.len(),
            pg.edges.len(),
            pg.components().len(),
            pg.iterations,
            if pg.converged { "" } else { " (cap reached)" }
        );
    }
    println!("layer4 regions: {}", g.layer4.len());
    println!("attachments: {}", g.attachments.len());
}

fn pick_graph<'a>(g: &'a SceneGraph, terrain: Option<&str>) -> Result<&'a PlaceGraph> {
    match terrain {
        Some(t) => g
            .place_graph(t)
            .ok_or_else(|| Error::invalid(format!("graph has no terrain {t:?}"))),
        None => g
            .layer3
            .first()
            .ok_or_else(|| Error::invalid("graph has no place graphs")),
    }
}

/// Occupancy of one terrain rebuilt from the layer-1 points it labels, smoothed as in construction.
pub fn terrain_grid(g: &SceneGraph, pg: &PlaceGraph) -> OccupancyGrid {
    let mut grid = OccupancyGrid::new(pg.terrain.clone(), pg.geometry);
    for p in &g.layer1 {
        if matches!(&p.label, PointLabel::Terrain { name } if *name == pg.terrain) {
            if let Some(c) = pg.geometry.cell_of(p.position[0], p.position[1]) {
                grid.set(c, true);
            }
        }
    }
    morph_smooth(&grid, g.task.params.places.morph_radius)
}

/// Skeleton raster of an imported place graph: node cells 255, other skeleton cells 128.
pub fn skeleton_image(pg: &PlaceGraph) -> Vec<u8> {
    let mut shade = vec![0u8; pg.geometry.len()];
    for n in &pg.nodes {
        for c in &n.region {
            shade[pg.geometry.index(c)] = 128;
        }
    }
    for n in &pg.nodes {
        shade[pg.geometry.index(&n.cell)] = 255;
    }
    pgm::encode(&pg.geometry, |c| shade[pg.geometry.index(&c)])
}

pub fn cmd_dump(a: &DumpArgs) -> Result<()> {
    let g = graph::import(&a.graph)?;
    let bytes = match a.what {
        Artifact::GraphDot => graph::to_dot(&g, a.terrain.as_deref()).into_bytes(),
        Artifact::Labels => graph::labels_image(&g, g.task.params.places.resolution),
        Artifact::Grid => pgm::grid_image(&terrain_grid(&g, pick_graph(&g, a.terrain.as_deref())?)),
        Artifact::Distance => {
            let grid = terrain_grid(&g, pick_graph(&g, a.terrain.as_deref())?);
            pgm::distance_image(&brushfire(&grid)?)
        }
        Artifact::Skeleton => skeleton_image(pick_graph(&g, a.terrain.as_deref())?),
    };
    pgm::write(&a.out, &bytes)?;
    println!("wrote {} ({} bytes)", a.out.display(), bytes.len());
    Ok(())
}
