use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mvs_core::evaluation::DEFAULT_INLIER_THRESHOLD;
use mvs_core::fusion::{
    fscore_at_threshold, load_ply, mesh_distance_metrics, sample_surface_points, save_ply, PlyFormat,
    TsdfConfig,
};
use mvs_core::pipeline::{
    evaluate_depth_dir, fuse_depth_maps, load_depth_dir, load_scene, run_depth, select_tuples_overlap,
    select_tuples_pose, synth_scene, write_depth_outputs, write_scene, OverlapTupleConfig, PipelineConfig,
    PoseTupleConfig, SynthConfig, SynthKind, TupleSelection,
};
use mvs_core::MvsError;

const EXIT_PARTIAL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "mvs",
    version,
    about = "Plane-sweep multi-view stereo and TSDF meshing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TupleMode {
    Pose,
    Overlap,
}

#[derive(Subcommand)]
enum Command {
    /// Render a procedural scene with exact poses and ground-truth depth.
    Synth {
        #[arg(long, value_parser = parse_kind)]
        kind: SynthKind,
        #[arg(long, default_value_t = 5)]
        frames: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Choose reference/source tuples for every frame of a scene.
    Tuples {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, value_enum, default_value_t = TupleMode::Pose)]
        mode: TupleMode,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_sources: Option<usize>,
    },
    /// Estimate a depth map per tuple.
    Depth {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        tuples: PathBuf,
        /// Pipeline configuration (JSON); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Integrate depth maps into a TSDF volume and extract a mesh.
    Fuse {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        depth_dir: PathBuf,
        #[arg(long, default_value_t = 0.04)]
        voxel: f64,
        #[arg(long, default_value_t = 3.5)]
        max_depth: f64,
        #[arg(long)]
        out: PathBuf,
        /// Write ASCII PLY instead of binary little-endian.
        #[arg(long)]
        ascii: bool,
    },
    /// Score predicted depth maps against the scene's ground truth.
    EvalDepth {
        #[arg(long)]
        pred_dir: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_INLIER_THRESHOLD)]
        thresh: f64,
    },
    /// Compare a predicted mesh with a reference mesh.
    EvalMesh {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Report GT->pred as completion and pred->GT as accuracy.
        #[arg(long)]
        swap_acc_comp: bool,
        #[arg(long, default_value_t = 200_000)]
        samples: usize,
        #[arg(long, default_value_t = 0.05)]
        thresh: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn parse_kind(s: &str) -> Result<SynthKind, String> {
    s.parse().map_err(|e: MvsError| e.to_string())
}

fn exit_code(e: &MvsError) -> u8 {
    match e {
        MvsError::Config(_) | MvsError::Format { .. } | MvsError::Argument(_) | MvsError::Io { .. } => {
            EXIT_CONFIG
        }
        MvsError::Domain(_) | MvsError::Data(_) | MvsError::Pipeline(_) => EXIT_PARTIAL,
    }
}

fn write_text(path: &Path, text: &str) -> mvs_core::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, source: std::io::Error) -> MvsError {
    MvsError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn run(cli: Cli) -> mvs_core::Result<u8> {
    match cli.command {
        Command::Synth {
            kind,
            frames,
            out,
            seed,
        } => {
            let rendered = synth_scene(kind, frames, seed, &SynthConfig::default())?;
            let manifest = write_scene(&rendered, &out, "scene units (synthetic)")?;
            println!("wrote {} frames to {}", manifest.frames.len(), out.display());
            Ok(0)
        }
        Command::Tuples {
            scene,
            mode,
            out,
            max_sources,
        } => {
            let scene = load_scene(&scene)?;
            let selection = match mode {
                TupleMode::Pose => {
                    let mut cfg = PoseTupleConfig::default();
                    if let Some(m) = max_sources {
                        cfg.max_sources = m;
                    }
                    select_tuples_pose(&scene.frames, &cfg)?
                }
                TupleMode::Overlap => {
                    let mut cfg = OverlapTupleConfig::default();
                    if let Some(m) = max_sources {
                        cfg.max_sources = m;
                    }
                    select_tuples_overlap(&scene.frames, &cfg)?
                }
            };
            selection.save(&out)?;
            println!(
                "{} tuples, {} references without candidates",
                selection.tuples.len(),
                selection.omitted.len()
            );
            Ok(0)
        }
        Command::Depth {
            scene,
            tuples,
            config,
            out,
        } => {
            let cfg = match config {
                Some(p) => PipelineConfig::load(&p)?,
                None => PipelineConfig::default(),
            };
            let scene = load_scene(&scene)?;
            let selection = TupleSelection::load(&tuples)?;
            let result = run_depth(&scene.frames, &selection.tuples, &cfg)?;
            write_depth_outputs(&result, &out, &cfg)?;
            let report = &result.report;
            println!(
                "{} tuples completed, {} failed",
                report.completed.len(),
                report.failed.len()
            );
            for f in &report.failed {
                eprintln!("tuple {}: {}", f.reference, f.error);
            }
            if let Some(m) = &report.metrics {
                print!("{}", m.to_table());
            }
            Ok(if report.failed.is_empty() { 0 } else { EXIT_PARTIAL })
        }
        Command::Fuse {
            scene,
            depth_dir,
            voxel,
            max_depth,
            out,
            ascii,
        } => {
            let scene = load_scene(&scene)?;
            let depths = load_depth_dir(&scene.frames, &depth_dir)?;
            if depths.is_empty() {
                return Err(MvsError::Data(format!(
                    "no <frame id>.mvsd files in {}",
                    depth_dir.display()
                )));
            }
            let cfg = TsdfConfig {
                voxel_size: voxel,
                max_fuse_depth: max_depth,
                ..TsdfConfig::default()
            };
            let (mesh, report) = fuse_depth_maps(&scene.frames, &depths, &cfg)?;
            let format = if ascii {
                PlyFormat::Ascii
            } else {
                PlyFormat::BinaryLittleEndian
            };
            save_ply(&mesh, &out, format)?;
            println!(
                "fused {} depth maps: {} blocks, {} vertices, {} triangles",
                report.integrated.len(),
                report.blocks,
                report.vertices,
                report.triangles
            );
            Ok(0)
        }
        Command::EvalDepth {
            pred_dir,
            scene,
            report,
            thresh,
        } => {
            let scene = load_scene(&scene)?;
            let metrics = evaluate_depth_dir(&scene.frames, &pred_dir, thresh)?;
            print!("{}", metrics.to_table());
            if let Some(path) = report {
                write_text(&path, &metrics.to_json())?;
            }
            Ok(0)
        }
        Command::EvalMesh {
            pred,
            gt,
            swap_acc_comp,
            samples,
            thresh,
            seed,
            report,
        } => {
            let pred = load_ply(&pred)?;
            let gt = load_ply(&gt)?;
            let mut m = mesh_distance_metrics(&pred, &gt)?;
            if swap_acc_comp {
                std::mem::swap(&mut m.accuracy, &mut m.completion);
            }
            let pred_pts = sample_surface_points(&pred, samples, seed)?;
            let gt_pts = sample_surface_points(&gt, samples, seed)?;
            let f = fscore_at_threshold(&pred_pts, &gt_pts, thresh)?;
            let doc = serde_json::json!({
                "accuracy": m.accuracy,
                "completion": m.completion,
                "chamfer": m.chamfer,
                "precision": f.precision,
                "recall": f.recall,
                "fscore": f.fscore,
                "threshold": f.threshold,
                "samples": samples,
                "swap_acc_comp": swap_acc_comp,
            });
            let text = serde_json::to_string_pretty(&doc).expect("plain numbers serialize");
            println!("{text}");
            if let Some(path) = report {
                write_text(&path, &text)?;
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
