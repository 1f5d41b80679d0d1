use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use swimset_core::augment::{AugmentPlan, Homography, Jitter};
use swimset_core::coverage::coverage_report;
use swimset_core::metrics::{evaluate, read_detections, Interpolation};
use swimset_core::sampler::{check_ranges, make_subset, SamplingPolicy, SubsetMethod, SubsetSpec};
use swimset_core::stats::{dataset_stats, estimate_workload, DatasetStats};
use swimset_core::storage::{export_darknet, export_voc, load_manifest_with, save_manifest, ClassOrder};
use swimset_core::sweep::{load_runs, run_sweep, TestPool, DEFAULT_FRACTIONS};
use swimset_core::{DatasetManifest, SwimmerClass};

use crate::config::{resolve, Config, DATA_ROOT_ENV};
use crate::error::{ServiceError, ServiceResult};
use crate::server::{serve, AppState};
use crate::store::AnnotationStore;

#[derive(Debug, Parser)]
#[command(name = "swimset", version, about = "Swimmer-detection dataset toolkit")]
pub struct Cli {
    /// TOML file with thresholds (iou_threshold, min_visible_fraction, base_stride, dive_stride, seconds_per_box).
    #[arg(long, global = true, env = "SWIMSET_CONFIG")]
    pub config: Option<PathBuf>,
    /// Directory that relative paths are resolved against.
    #[arg(long, global = true, env = DATA_ROOT_ENV)]
    pub data_root: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Darknet,
    Voc,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the annotation HTTP service.
    Serve {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Directory served under /frames; defaults to the manifest's directory.
        #[arg(long)]
        images: Option<PathBuf>,
    },
    /// Keep the frames a stride policy selects.
    Sample {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        stride: Option<u64>,
        #[arg(long)]
        dive_stride: Option<u64>,
    },
    /// Draw a seeded training subset.
    Subset {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "random")]
        method: SubsetMethod,
        #[arg(long)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Flip, warp and colour-jitter frames, carrying boxes along.
    Augment {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        flip: bool,
        /// Row-major homography: nine comma-separated values, or six for an affine map.
        #[arg(long, allow_hyphen_values = true)]
        shear: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        brightness: Option<f64>,
        /// Hue rotation in degrees.
        #[arg(long, allow_hyphen_values = true)]
        hue: Option<f64>,
        #[arg(long)]
        contrast: Option<f64>,
        /// Read frame images from here and write transformed copies to --images-out.
        #[arg(long, requires = "images_out")]
        images_in: Option<PathBuf>,
        #[arg(long, requires = "images_in")]
        images_out: Option<PathBuf>,
    },
    /// Score a detections file against a manifest.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        det: PathBuf,
        #[arg(long)]
        iou: Option<f64>,
        #[arg(long)]
        eleven_point: bool,
        #[arg(long)]
        json: bool,
    },
    /// Evaluate every (method, fraction, test pool) run and write the AP table.
    Sweep {
        /// Directory holding `<method>/<fraction>/<pool>.tsv`.
        #[arg(long)]
        runs: PathBuf,
        /// Test pool as `tag=manifest.json`; repeat for each pool.
        #[arg(long = "gt", required = true)]
        pools: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated training fractions.
        #[arg(long)]
        fractions: Option<String>,
        /// Comma-separated subset methods.
        #[arg(long)]
        methods: Option<String>,
        #[arg(long)]
        iou: Option<f64>,
    },
    /// Audit footage variety across every manifest in a directory.
    Coverage {
        #[arg(long)]
        manifests: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Write Darknet label files or VOC XML.
    Export {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        format: ExportFormat,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated class names giving Darknet indices.
        #[arg(long)]
        class_order: Option<String>,
    },
    /// Per-class annotation counts and rounded shares.
    Stats {
        #[arg(long, required_unless_present = "counts", conflicts_with = "counts")]
        manifest: Option<PathBuf>,
        /// Six comma-separated counts in race order instead of a manifest.
        #[arg(long)]
        counts: Option<String>,
    },
    /// Boxes and hours needed to annotate every frame of a race.
    Estimate {
        #[arg(long)]
        duration: f64,
        #[arg(long)]
        fps: f64,
        #[arg(long)]
        swimmers: u32,
        #[arg(long)]
        seconds_per_box: Option<f64>,
    },
}

struct Context {
    config: Config,
    data_root: Option<PathBuf>,
}

impl Context {
    fn path(&self, p: &Path) -> PathBuf {
        resolve(p, self.data_root.as_deref())
    }

    fn load(&self, p: &Path) -> ServiceResult<DatasetManifest> {
        Ok(load_manifest_with(&self.path(p), &self.config.rules())?)
    }

    fn save(&self, m: &DatasetManifest, p: &Path) -> ServiceResult<()> {
        Ok(save_manifest(m, &self.path(p))?)
    }
}

fn write_text(path: &Path, text: &str) -> ServiceResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| ServiceError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| ServiceError::io(path, e))
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> ServiceResult<Vec<T>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| ServiceError::Usage(format!("invalid {what} `{}`", s.trim())))
        })
        .collect()
}

/// Parses arguments from the process and runs the chosen command.
pub fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    match run(cli, &mut std::io::stdout().lock()) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::FAILURE
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> ServiceResult<()> {
    let config = match &cli.config {
        Some(p) => Config::load(&resolve(p, cli.data_root.as_deref()))?,
        None => Config::default(),
    };
    let ctx = Context {
        config,
        data_root: cli.data_root,
    };
    let io = |e: std::io::Error| ServiceError::io(Path::new("<stdout>"), e);
    match cli.command {
        Command::Serve {
            manifest,
            port,
            host,
            images,
        } => {
            let path = ctx.path(&manifest);
            let m = ctx.load(&manifest)?;
            let images = images
                .map(|p| ctx.path(&p))
                .or_else(|| path.parent().map(Path::to_path_buf));
            let store = AnnotationStore::new(m, Some(path), ctx.config.clone())?;
            tracing_subscriber::fmt().with_writer(std::io::stderr).init();
            let runtime = tokio::runtime::Runtime::new().map_err(|e| ServiceError::io(Path::new("runtime"), e))?;
            runtime
                .block_on(async move { serve(AppState::start(store), SocketAddr::new(host, port), images).await })
                .map_err(|e| ServiceError::io(Path::new("server"), e))?;
        }
        Command::Sample {
            manifest,
            out: dest,
            stride,
            dive_stride,
        } => {
            let mut m = ctx.load(&manifest)?;
            let policy = SamplingPolicy::new(
                stride.unwrap_or(ctx.config.base_stride),
                dive_stride.unwrap_or(ctx.config.dive_stride),
            )?;
            let mut ranges = std::collections::HashMap::new();
            for v in &m.videos {
                ranges.insert(v.video_id.clone(), check_ranges(&v.dive_ranges)?);
            }
            let before = m.frames.len();
            m.frames.retain(|f| policy.selects(f.frame_index, &ranges[&f.video_id]));
            ctx.save(&m, &dest)?;
            writeln!(out, "kept {} of {before} frames", m.frames.len()).map_err(io)?;
        }
        Command::Subset {
            manifest,
            out: dest,
            method,
            fraction,
            seed,
        } => {
            let mut m = ctx.load(&manifest)?;
            let chosen: std::collections::HashSet<String> =
                make_subset(&m.frames, &SubsetSpec::new(method, fraction, seed)?)?
                    .into_iter()
                    .collect();
            let before = m.frames.len();
            m.frames.retain(|f| chosen.contains(&f.frame_id));
            m.dataset_id = format!("{}-{method}-{fraction}-s{seed}", m.dataset_id);
            ctx.save(&m, &dest)?;
            writeln!(out, "kept {} of {before} frames", m.frames.len()).map_err(io)?;
        }
        Command::Augment {
            manifest,
            out: dest,
            flip,
            shear,
            brightness,
            hue,
            contrast,
            images_in,
            images_out,
        } => {
            let jitter = if brightness.is_some() || hue.is_some() || contrast.is_some() {
                Some(Jitter::new(
                    brightness.unwrap_or(0.0),
                    hue.unwrap_or(0.0),
                    contrast.unwrap_or(1.0),
                )?)
            } else {
                None
            };
            let plan = AugmentPlan {
                flip,
                homography: shear.as_deref().map(Homography::parse).transpose()?,
                jitter,
            };
            let mut m = ctx.load(&manifest)?;
            let rules = ctx.config.rules();
            let before = m.annotation_count();
            let mut frames = Vec::with_capacity(m.frames.len());
            for f in &m.frames {
                let lanes = m.video(&f.video_id).map(|v| v.lane_count);
                frames.push(plan.apply_frame(f, lanes, &rules)?);
            }
            if let (Some(src), Some(dst)) = (&images_in, &images_out) {
                let (src, dst) = (ctx.path(src), ctx.path(dst));
                for f in &m.frames {
                    let from = src.join(&f.image_path);
                    let img = image::open(&from).map_err(swimset_core::Error::from)?.to_rgb8();
                    let to = dst.join(&f.image_path);
                    if let Some(dir) = to.parent() {
                        std::fs::create_dir_all(dir).map_err(|e| ServiceError::io(dir, e))?;
                    }
                    plan.apply_image(&img)?.save(&to).map_err(swimset_core::Error::from)?;
                }
            }
            m.frames = frames;
            ctx.save(&m, &dest)?;
            writeln!(
                out,
                "{} frames, {} of {before} boxes kept",
                m.frames.len(),
                m.annotation_count()
            )
            .map_err(io)?;
        }
        Command::Eval {
            gt,
            det,
            iou,
            eleven_point,
            json,
        } => {
            let m = ctx.load(&gt)?;
            let dets = read_detections(&ctx.path(&det))?;
            let mut options = ctx.config.eval_options();
            if let Some(t) = iou {
                options.iou_threshold = t;
            }
            if eleven_point {
                options.interpolation = Interpolation::ElevenPoint;
            }
            let report = evaluate(&m.frames, &dets, &options)?;
            if json {
                let text = serde_json::to_string_pretty(&report).expect("report serializes");
                writeln!(out, "{text}").map_err(io)?;
            } else {
                write!(out, "{}", report.render()).map_err(io)?;
            }
        }
        Command::Sweep {
            runs,
            pools,
            out: dest,
            fractions,
            methods,
            iou,
        } => {
            let fractions = match fractions {
                Some(t) => parse_list::<f64>(&t, "fraction")?,
                None => DEFAULT_FRACTIONS.to_vec(),
            };
            let methods = match methods {
                Some(t) => parse_list::<SubsetMethod>(&t, "method")?,
                None => SubsetMethod::ALL.to_vec(),
            };
            let mut test_pools = Vec::new();
            for spec in &pools {
                let (tag, path) = spec
                    .split_once('=')
                    .ok_or_else(|| ServiceError::Usage(format!("--gt expects tag=manifest, got `{spec}`")))?;
                test_pools.push(TestPool {
                    tag: tag.to_string(),
                    frames: ctx.load(Path::new(path))?.frames,
                });
            }
            let mut options = ctx.config.eval_options();
            if let Some(t) = iou {
                options.iou_threshold = t;
            }
            let run_set = load_runs(&ctx.path(&runs), &test_pools, &fractions, &methods)?;
            let table = run_sweep(&test_pools, &fractions, &methods, &run_set, &options)?;
            write_text(&ctx.path(&dest), &table.to_csv())?;
            write!(out, "{}", table.render()).map_err(io)?;
        }
        Command::Coverage {
            manifests,
            out: dest,
            csv,
        } => {
            let dir = ctx.path(&manifests);
            let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
                .map_err(|e| ServiceError::io(&dir, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            paths.sort();
            if paths.is_empty() {
                return Err(ServiceError::Usage(format!("no .json manifests in {}", dir.display())));
            }
            let loaded = paths.iter().map(|p| ctx.load(p)).collect::<ServiceResult<Vec<_>>>()?;
            let report = coverage_report(&loaded);
            match dest {
                Some(p) => write_text(&ctx.path(&p), &report.render_text())?,
                None => write!(out, "{}", report.render_text()).map_err(io)?,
            }
            if let Some(p) = csv {
                write_text(&ctx.path(&p), &report.render_csv())?;
            }
        }
        Command::Export {
            manifest,
            format,
            out: dest,
            class_order,
        } => {
            let m = ctx.load(&manifest)?;
            let dir = ctx.path(&dest);
            std::fs::create_dir_all(&dir).map_err(|e| ServiceError::io(&dir, e))?;
            let summary = match format {
                ExportFormat::Darknet => {
                    let order = match class_order {
                        Some(t) => ClassOrder::parse(&t)?,
                        None => ClassOrder::default(),
                    };
                    export_darknet(&m, &order, &dir)?
                }
                ExportFormat::Voc => export_voc(&m, &dir)?,
            };
            writeln!(
                out,
                "wrote {} files, {} boxes",
                summary.files.len(),
                summary.annotations
            )
            .map_err(io)?;
        }
        Command::Stats { manifest, counts } => {
            let stats = match (manifest, counts) {
                (Some(p), _) => dataset_stats(&ctx.load(&p)?.frames),
                (None, Some(t)) => {
                    let v = parse_list::<u64>(&t, "count")?;
                    let arr: [u64; SwimmerClass::COUNT] = v
                        .try_into()
                        .map_err(|_| ServiceError::Usage("--counts needs exactly six values".into()))?;
                    DatasetStats::from_counts(arr)
                }
                (None, None) => unreachable!("clap requires one source"),
            };
            write!(out, "{}", stats.render()).map_err(io)?;
        }
        Command::Estimate {
            duration,
            fps,
            swimmers,
            seconds_per_box,
        } => {
            let w = estimate_workload(
                duration,
                fps,
                swimmers,
                seconds_per_box.unwrap_or(ctx.config.seconds_per_box),
            )?;
            writeln!(out, "boxes: {}", w.boxes).map_err(io)?;
            writeln!(out, "seconds: {}", w.total_seconds).map_err(io)?;
            writeln!(out, "days: {:.2}", w.total_days()).map_err(io)?;
        }
    }
    Ok(())
}
