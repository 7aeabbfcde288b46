use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use poseforge::imaging::RgbImage;
use poseforge::io::{self, export_pose, load_mesh, load_workspace, parse_camera, parse_pose_full, write_sample};
use poseforge::render::{rasterize_with, RenderOptions};
use poseforge::scene::{CameraSelect, ObjectId};
use poseforge::service::{Server, ServerConfig, PORT_ENV};
use poseforge::study::{
    inter_personal_stats, intra_personal_stats, items_csv, read_log_file, read_questionnaire_csv,
    summary_csv, sus_summary, time_csv, time_table, tlx_summary, AnnotationRecord, StudyReference, TrimScope,
    SUS_ITEMS, SUS_STANDARD_POLARITY, TLX_DIMENSIONS, TLX_NAMES,
};

#[derive(Parser)]
#[command(name = "poseforge", version, about = "6D pose annotation workbench")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Render a workspace overlay to PNG.
    Render {
        #[arg(long)]
        workspace: PathBuf,
        #[arg(long, default_value = "original")]
        camera: CameraSelect,
        #[arg(long)]
        out: PathBuf,
        /// Also write the 16-bit object mask (object index + 1, 0 = empty).
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Copy an image, camera file and meshes into a dataset as a new sample.
    ImportSample {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        id: String,
        #[arg(long)]
        image: PathBuf,
        /// camera.txt: "fx fy cx cy width height" and an optional unit line.
        #[arg(long)]
        camera: PathBuf,
        #[arg(long = "mesh", required = true)]
        meshes: Vec<PathBuf>,
        /// Ground truth as NAME=POSE_FILE, NAME being the mesh file stem.
        #[arg(long = "gt")]
        ground_truth: Vec<String>,
    },
    /// Print an object's pose from a workspace as 4x4 text.
    ExportPose {
        #[arg(long)]
        workspace: PathBuf,
        #[arg(long)]
        id: String,
    },
    /// Aggregate annotation logs or questionnaires into report tables.
    Evaluate {
        /// JSON-lines log file or a directory of them; for sus/tlx a CSV of
        /// responses.
        #[arg(long)]
        logs: PathBuf,
        /// Dataset root, needed for inter and intra.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long, default_value = "per-group")]
        trim: TrimScope,
        /// Write `<mode>.csv` and `<mode>.json` here instead of printing CSV.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Host annotation sessions on 127.0.0.1.
    Serve {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, env = PORT_ENV, default_value_t = poseforge::service::DEFAULT_PORT)]
        port: u16,
        /// Where session logs go; defaults to `<dataset>/logs`.
        #[arg(long)]
        log_dir: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Inter,
    Intra,
    Time,
    Sus,
    Tlx,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Inter => "inter",
            Mode::Intra => "intra",
            Mode::Time => "time",
            Mode::Sus => "sus",
            Mode::Tlx => "tlx",
        }
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Cmd::Render { workspace, camera, out, mask, threads } => {
            let scene = load_workspace(&workspace).with_context(|| format!("loading {}", workspace.display()))?;
            let frame = rasterize_with(&scene, camera, &RenderOptions { threads })?;
            frame.image.save_png(&out)?;
            if let Some(m) = mask {
                std::fs::write(&m, frame.mask.to_png()?)?;
            }
            log::info!("wrote {} ({} pixels covered)", out.display(), frame.mask.covered());
        }
        Cmd::ImportSample { dataset, id, image, camera, meshes, ground_truth } => {
            import_sample(&dataset, &id, &image, &camera, &meshes, &ground_truth)?;
        }
        Cmd::ExportPose { workspace, id } => {
            let scene = load_workspace(&workspace)?;
            print!("{}", export_pose(&scene.get_pose(&ObjectId::new(id))?));
        }
        Cmd::Evaluate { logs, dataset, mode, trim, out_dir } => {
            let (csv, json) = evaluate(&logs, dataset.as_deref(), mode, trim)?;
            match out_dir {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    std::fs::write(dir.join(format!("{}.csv", mode.name())), csv)?;
                    std::fs::write(dir.join(format!("{}.json", mode.name())), serde_json::to_string_pretty(&json)?)?;
                }
                None => print!("{csv}"),
            }
        }
        Cmd::Serve { dataset, port, log_dir, threads } => {
            let log_dir = log_dir.unwrap_or_else(|| dataset.join("logs"));
            let server = Server::bind(port, ServerConfig { dataset, log_dir: Some(log_dir), render: RenderOptions { threads } })?;
            log::info!("listening on {}", server.local_addr()?);
            server.serve();
        }
    }
    Ok(())
}

fn import_sample(
    dataset: &Path,
    id: &str,
    image: &Path,
    camera: &Path,
    meshes: &[PathBuf],
    ground_truth: &[String],
) -> Result<()> {
    let img = RgbImage::load_png(image)?;
    let (k, unit) = parse_camera(&std::fs::read_to_string(camera)?, &camera.display().to_string())?;
    if (img.width(), img.height()) != (k.width, k.height) {
        bail!("image is {}x{}, camera says {}x{}", img.width(), img.height(), k.width, k.height);
    }
    let mut gt = HashMap::new();
    for spec in ground_truth {
        let (name, path) = spec.split_once('=').with_context(|| format!("--gt expects NAME=FILE, got {spec:?}"))?;
        let mut pose = parse_pose_full(&std::fs::read_to_string(path)?, path)?;
        pose.translation = pose.translation * unit;
        gt.insert(name.to_owned(), pose);
    }
    // Stored in millimeters, so the written camera file carries no unit line.
    let loaded = meshes.iter().map(|p| Ok(load_mesh(p)?.scaled(unit))).collect::<Result<Vec<_>, io::DatasetError>>()?;
    for name in gt.keys() {
        if !loaded.iter().any(|m| m.id().as_str() == name) {
            bail!("--gt names {name:?}, which is not one of the meshes");
        }
    }
    let objects: Vec<_> = loaded.iter().map(|m| (m, gt.get(m.id().as_str()).copied())).collect();
    let dir = write_sample(dataset, id, &img, &k, &objects)?;
    log::info!("imported {}", dir.display());
    Ok(())
}

fn read_logs(path: &Path) -> Result<Vec<AnnotationRecord>> {
    if !path.is_dir() {
        return Ok(read_log_file(path)?);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    files.sort();
    let mut all = Vec::new();
    for f in files {
        all.extend(read_log_file(&f).with_context(|| f.display().to_string())?);
    }
    Ok(all)
}

fn evaluate(logs: &Path, dataset: Option<&Path>, mode: Mode, trim: TrimScope) -> Result<(String, serde_json::Value)> {
    let reference = || -> Result<StudyReference> {
        let root = dataset.context("--dataset is required for this mode")?;
        Ok(StudyReference::from_dataset(root)?)
    };
    Ok(match mode {
        Mode::Inter => {
            let stats = inter_personal_stats(&read_logs(logs)?, &reference()?, trim)?;
            (summary_csv(&stats, "sample")?, serde_json::to_value(&stats)?)
        }
        Mode::Intra => {
            let stats = intra_personal_stats(&read_logs(logs)?, &reference()?, trim)?;
            (summary_csv(&stats, "user")?, serde_json::to_value(&stats)?)
        }
        Mode::Time => {
            let table = time_table(&read_logs(logs)?);
            (time_csv(&table)?, serde_json::to_value(&table)?)
        }
        Mode::Sus => {
            let rows = read_questionnaire_csv(std::fs::File::open(logs)?, SUS_ITEMS)?;
            let mut responses = Vec::with_capacity(rows.len());
            for (who, vals) in &rows {
                let mut r = [0u8; SUS_ITEMS];
                for (slot, v) in r.iter_mut().zip(vals) {
                    if v.fract() != 0.0 || !(1.0..=5.0).contains(v) {
                        bail!("{who}: SUS answers are integers 1..5, got {v}");
                    }
                    *slot = *v as u8;
                }
                responses.push(r);
            }
            let stats = sus_summary(&responses, &SUS_STANDARD_POLARITY)?;
            let labels: Vec<String> = (1..=SUS_ITEMS).map(|i| format!("Q{i}")).collect();
            (items_csv(&labels, &stats)?, serde_json::to_value(&stats)?)
        }
        Mode::Tlx => {
            let rows = read_questionnaire_csv(std::fs::File::open(logs)?, TLX_DIMENSIONS)?;
            let responses: Vec<[f64; TLX_DIMENSIONS]> =
                rows.iter().map(|(_, v)| std::array::from_fn(|i| v[i])).collect();
            let stats = tlx_summary(&responses)?;
            let labels: Vec<String> = TLX_NAMES.iter().map(|s| s.to_string()).collect();
            (items_csv(&labels, &stats)?, serde_json::to_value(stats)?)
        }
    })
}
