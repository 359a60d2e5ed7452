//! `huegrip` command line.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use huegrip_core::cvforce::{calibrate_decoder, estimate};
use huegrip_core::framegen::{byte_hue_to_rgb, render, CameraImage, SceneSpec};
use huegrip_core::gesturenet::{
    evaluate, generate_synthetic, read_dataset_csv, split_by_user, train, write_curve_csv, GestureClassifier,
    MlpModel, PrototypeClassifier, SyntheticSpec, TrainConfig, UpdateMode,
};
use huegrip_core::gripsim::{SensorFrame, TargetKind, REGISTER_MAX};
use huegrip_core::huecode;
use huegrip_core::teleop::{run_catch_scenario, ScenarioScript};

use crate::config::GatewayConfig;
use crate::server;
use crate::store::SessionStore;

#[derive(Debug, Parser)]
#[command(name = "huegrip", version, about = "Color-telemetry soft gripper simulator")]
pub struct Cli {
    /// JSON or TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured session directory.
    #[arg(long, global = true)]
    pub log_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Target {
    Soft,
    Rigid,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the live loop behind a WebSocket at ws://<listen>/ws.
    Serve {
        #[arg(long)]
        listen: Option<String>,
        /// Stop after this many ticks instead of waiting for Ctrl-C.
        #[arg(long)]
        ticks: Option<u64>,
    },
    /// Run a scripted catch headlessly and persist it as a session.
    Simulate {
        /// Script JSON; the built-in catch when omitted.
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long, value_enum)]
        target: Option<Target>,
        /// Also write the step log here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the gesture network.
    Train {
        /// Training CSV; synthetic users when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Held-out CSV (with --data).
        #[arg(long)]
        heldout: Option<PathBuf>,
        #[arg(long)]
        loops: Option<u64>,
        #[arg(long)]
        lr: Option<f64>,
        /// Average updates over each pass instead of per sample.
        #[arg(long)]
        per_epoch: bool,
        /// Synthetic users held out for accuracy.
        #[arg(long, default_value_t = 4)]
        test_users: usize,
        #[arg(long, default_value = "model.json")]
        out: PathBuf,
        #[arg(long, default_value = "curve.csv")]
        curve: PathBuf,
    },
    /// Recognition-rate report.
    Eval {
        /// Trained model; the nearest-prototype rule when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Evaluation CSV; synthetic users when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 5.0)]
        spread: f64,
        #[arg(long, default_value_t = 20)]
        users: usize,
        #[arg(long, default_value = "Synthetic glove")]
        column: String,
        /// Writes to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Encode sensor rows (`fsr1..3`, `fsl1..3` columns) to LED hue and color.
    Encode { csv: PathBuf },
    /// Decode force from a PPM frame or every `.ppm` in a directory.
    Decode { path: PathBuf },
    /// Render a camera frame.
    Render {
        /// SceneSpec JSON; the configured scene when omitted.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long, conflicts_with = "register")]
        hue: Option<u8>,
        /// Encode this register value on every sensor.
        #[arg(long)]
        register: Option<u16>,
        #[arg(long)]
        noise: Option<u8>,
        #[arg(long)]
        occlusion: Option<f64>,
        /// `.ppm` or `.png`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Measure the camera-hue interval of the configured scene.
    CalibrateDecoder,
    /// Copy a session log and write its summary CSV.
    Export {
        id: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn settings(cli: &Cli) -> anyhow::Result<GatewayConfig> {
    let mut cfg = GatewayConfig::load_or_default(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.scenario.seed = seed;
    }
    if let Some(dir) = &cli.log_dir {
        cfg.log_dir = dir.clone();
    }
    Ok(cfg)
}

fn read_samples(path: &Path) -> anyhow::Result<Vec<huegrip_core::gesturenet::LabeledSample>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_dataset_csv(file).with_context(|| format!("reading {}", path.display()))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = settings(&cli)?;
    let seed = cfg.scenario.seed;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Serve { listen, ticks } => {
            let mut cfg = cfg;
            if let Some(listen) = listen {
                cfg.server.listen = listen;
            }
            let classifier = cfg.classifier()?;
            let store = SessionStore::open(&cfg.log_dir)?;
            let rt = tokio::runtime::Runtime::new()?;
            let summary = rt.block_on(async move {
                let handle = server::start(cfg, classifier, store, ticks).await?;
                println!("session {} listening on ws://{}/ws", handle.session_id(), handle.addr());
                if ticks.is_some() {
                    handle.wait().await
                } else {
                    tokio::signal::ctrl_c().await?;
                    handle.shutdown().await
                }
            })?;
            summary.write_csv(&mut out)?;
        }
        Command::Simulate { script, target, out: log_out } => {
            let mut cfg = cfg;
            if let Some(t) = target {
                cfg.scenario.target = match t {
                    Target::Soft => TargetKind::Soft,
                    Target::Rigid => TargetKind::Rigid,
                };
            }
            cfg.validate()?;
            let script = match script {
                Some(p) => serde_json::from_str::<ScenarioScript>(
                    &fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?,
                )
                .with_context(|| format!("parsing {}", p.display()))?,
                None => ScenarioScript::default_catch(),
            };
            let log = run_catch_scenario(&script, &cfg.scenario, Some(cfg.classifier()?))?;
            let store = SessionStore::open(&cfg.log_dir)?;
            let mut writer = store.create(&cfg.scenario)?;
            let id = writer.id().to_string();
            for step in &log.steps {
                writer.append(step)?;
            }
            let summary = writer.finish()?;
            if let Some(p) = log_out {
                let mut w = create(&p)?;
                log.write_jsonl(&mut w)?;
                w.flush()?;
            }
            writeln!(out, "session {id}")?;
            summary.write_csv(&mut out)?;
        }
        Command::Train {
            data,
            heldout,
            loops,
            lr,
            per_epoch,
            test_users,
            out: model_out,
            curve,
        } => {
            let (train_set, heldout_set) = match data {
                Some(p) => {
                    let held = match heldout {
                        Some(h) => read_samples(&h)?,
                        None => Vec::new(),
                    };
                    (read_samples(&p)?, held)
                }
                None => {
                    if heldout.is_some() {
                        bail!("--heldout needs --data");
                    }
                    let spec = SyntheticSpec::default();
                    let all = generate_synthetic(&spec, seed)?;
                    split_by_user(&all, &spec, test_users)
                }
            };
            let defaults = TrainConfig::default();
            let tc = TrainConfig {
                loops: loops.unwrap_or(defaults.loops),
                learning_rate: lr.unwrap_or(defaults.learning_rate),
                seed,
                update_mode: if per_epoch { UpdateMode::PerEpoch } else { UpdateMode::PerSample },
            };
            let outcome = train(&train_set, &heldout_set, &tc)?;
            for w in &outcome.warnings {
                log::warn!("{w}");
            }
            outcome.model.save(&model_out)?;
            let mut w = create(&curve)?;
            write_curve_csv(&outcome.curve, &mut w)?;
            w.flush()?;
            if let Some(last) = outcome.curve.last() {
                writeln!(
                    out,
                    "trained {} loops: accuracy {:.4}, loss {:.6}",
                    last.loop_index, last.accuracy, last.loss
                )?;
            }
        }
        Command::Eval {
            model,
            data,
            spread,
            users,
            column,
            out: report_out,
        } => {
            let classifier: Arc<dyn GestureClassifier> = match model {
                Some(p) => Arc::new(MlpModel::load(&p).with_context(|| format!("loading {}", p.display()))?),
                None => Arc::new(PrototypeClassifier),
            };
            let dataset = match data {
                Some(p) => read_samples(&p)?,
                None => generate_synthetic(
                    &SyntheticSpec {
                        users,
                        spread_deg: spread,
                        ..SyntheticSpec::default()
                    },
                    seed,
                )?,
            };
            let report = evaluate(classifier.as_ref(), &dataset)?;
            match report_out {
                Some(p) => {
                    let mut w = create(&p)?;
                    report.write_csv(&column, &mut w)?;
                    w.flush()?;
                }
                None => report.write_csv(&column, &mut out)?,
            }
        }
        Command::Encode { csv: path } => {
            let mut reader = csv::Reader::from_path(&path).with_context(|| format!("opening {}", path.display()))?;
            let headers = reader.headers()?.clone();
            let names = ["fsr1", "fsr2", "fsr3", "fsl1", "fsl2", "fsl3"];
            let cols = names
                .iter()
                .map(|n| {
                    headers
                        .iter()
                        .position(|h| h.trim() == *n)
                        .with_context(|| format!("{}: missing column {n}", path.display()))
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            writeln!(out, "hue,r,g,b")?;
            for (row, record) in reader.records().enumerate() {
                let record = record?;
                let mut regs = [0u16; 6];
                for (r, &c) in regs.iter_mut().zip(&cols) {
                    let field = record.get(c).unwrap_or("").trim();
                    *r = field
                        .parse()
                        .with_context(|| format!("row {}: register {field:?} is not an integer", row + 1))?;
                }
                let frame = SensorFrame::from_registers([regs[0], regs[1], regs[2]], [regs[3], regs[4], regs[5]]);
                let cmd = huecode::encode(&frame).with_context(|| format!("row {}", row + 1))?;
                let [r, g, b] = byte_hue_to_rgb(cmd.hue, 255, 255);
                writeln!(out, "{},{r},{g},{b}", cmd.hue)?;
            }
        }
        Command::Decode { path } => {
            let files = if path.is_dir() {
                let mut v: Vec<PathBuf> = fs::read_dir(&path)?
                    .map(|e| e.map(|e| e.path()))
                    .collect::<io::Result<_>>()?;
                v.retain(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("ppm")));
                v.sort();
                v
            } else {
                vec![path]
            };
            writeln!(out, "file,camera_hue,contour_area,force,valid")?;
            for f in files {
                let image = CameraImage::load_ppm(&f).with_context(|| format!("reading {}", f.display()))?;
                let e = estimate(&image, &cfg.scenario.decode)?;
                let hue = e.camera_hue.map_or_else(String::new, |h| h.to_string());
                writeln!(out, "{},{hue},{},{},{}", f.display(), e.contour_area, e.force, e.valid)?;
            }
        }
        Command::Render {
            scene,
            hue,
            register,
            noise,
            occlusion,
            out: image_out,
        } => {
            let mut spec = match scene {
                Some(p) => serde_json::from_str::<SceneSpec>(
                    &fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?,
                )
                .with_context(|| format!("parsing {}", p.display()))?,
                None => cfg.scenario.scene.clone(),
            };
            if let Some(h) = hue {
                spec.led_hue = h;
            }
            if let Some(r) = register {
                if r > REGISTER_MAX {
                    bail!("register {r} exceeds {REGISTER_MAX}");
                }
                spec.led_hue = huecode::encode(&SensorFrame::from_registers([r; 3], [r; 3]))?.hue;
            }
            if let Some(n) = noise {
                spec.noise_amplitude = n;
            }
            if let Some(o) = occlusion {
                spec.occlusion_factor = o;
            }
            let image = render(&spec, seed)?;
            let bytes = match image_out.extension().and_then(|e| e.to_str()) {
                Some("ppm") => image.to_ppm()?,
                Some("png") => image.to_png()?,
                _ => bail!("{}: output must end in .ppm or .png", image_out.display()),
            };
            fs::write(&image_out, bytes).with_context(|| format!("writing {}", image_out.display()))?;
        }
        Command::CalibrateDecoder => {
            let interval = calibrate_decoder(&cfg.scenario.scene)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&interval)?)?;
        }
        Command::Export { id, out: dir } => {
            let store = SessionStore::open(&cfg.log_dir)?;
            let report = store.export(&id, &dir)?;
            writeln!(out, "{}", report.log_path.display())?;
            writeln!(out, "{}", report.summary_path.display())?;
        }
    }
    out.flush()?;
    Ok(())
}
