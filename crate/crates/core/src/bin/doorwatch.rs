//! Command line front end. Every subcommand reads the same TOML config;
//! without `--config` the built-in defaults apply.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use doorwatch::description::{Group, Landmarks68};
use doorwatch::door::{DeviceConfig, DeviceSim};
use doorwatch::gateway::{Admission, FrameHints, Gateway, Ingest, ReplayOptions, ReplayReport, SystemConfig};
use doorwatch::profile::{AddImageOutcome, Demographics};
use doorwatch::recognition::{
    identify, load_faces, load_labels, split_train_test, train_backend, Backend, Confusion, UNKNOWN,
};
use doorwatch::vision::Frame;

#[derive(Parser)]
#[command(name = "doorwatch", version, about = "Home entrance monitoring gateway")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// TOML config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> anyhow::Result<SystemConfig> {
        Ok(match &self.config {
            Some(p) => SystemConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => SystemConfig::default(),
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Watch the camera directories and serve the HTTP API.
    Run {
        #[command(flatten)]
        config: ConfigArg,
        /// Overrides `api.bind`.
        #[arg(long)]
        bind: Option<String>,
        /// Directory poll period.
        #[arg(long, default_value_t = 200)]
        poll_ms: u64,
    },
    /// Feed a recorded corpus through the pipeline and report.
    Replay {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        /// Report JSON destination; a summary is printed either way.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        pace_ms: u64,
        /// Ignore the corpus item column.
        #[arg(long)]
        no_annotations: bool,
    },
    /// Enroll people: a whole corpus, or one person from images.
    Enroll {
        #[command(flatten)]
        config: ConfigArg,
        /// Directory with people.tsv and labels.tsv.
        #[arg(long, conflicts_with_all = ["name", "images"])]
        corpus: Option<PathBuf>,
        #[arg(long, requires = "group")]
        name: Option<String>,
        #[arg(long)]
        group: Option<Group>,
        #[arg(long)]
        email: Option<String>,
        #[arg(long)]
        phone: Option<String>,
        /// Add to an existing person instead of enrolling a new one.
        #[arg(long, conflicts_with = "name")]
        person: Option<String>,
        /// Capture candidates, checked by the placement guidance.
        images: Vec<PathBuf>,
    },
    /// Train a recognizer on the enrolled profiles.
    Train {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        backend: Option<Backend>,
        /// Also train the attribute classifiers from `<dir>/<attr>/{yes,no}`.
        #[arg(long)]
        attributes: Option<PathBuf>,
    },
    /// Held-out evaluation of every backend on a labeled corpus.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 0.7)]
        train_fraction: f64,
        #[arg(long, default_value_t = 2020)]
        seed: u64,
    },
    /// Run a simulated relay switch.
    SimulateDoor {
        #[arg(long, default_value_t = 7010)]
        port: u16,
        #[arg(long, default_value = "change-me")]
        secret: String,
        /// Seconds without a heartbeat before the relay drops.
        #[arg(long, default_value_t = doorwatch::door::DEFAULT_WATCHDOG_SECONDS)]
        watchdog: f64,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "doorwatch=info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Run { config, bind, poll_ms } => run(config.load()?, bind, poll_ms),
        Command::Replay {
            corpus,
            config,
            report,
            pace_ms,
            no_annotations,
        } => replay(config.load()?, &corpus, report.as_deref(), pace_ms, !no_annotations),
        Command::Enroll {
            config,
            corpus,
            name,
            group,
            email,
            phone,
            person,
            images,
        } => {
            let gw = Gateway::open(config.load()?)?;
            if let Some(dir) = corpus {
                let s = gw.import_corpus(&dir)?;
                println!("enrolled {} people, imported {} images", s.persons, s.images);
                for m in &s.missed {
                    println!("no face found in {}", m.display());
                }
                return Ok(());
            }
            let person_id = match (name, person) {
                (Some(name), _) => {
                    let p = gw.profiles().enroll(&Demographics {
                        name,
                        email,
                        phone,
                        group: group.unwrap_or(Group::Unknown),
                    })?;
                    println!("enrolled {}", p.person_id);
                    p.person_id
                }
                (None, Some(id)) => id,
                (None, None) => bail!("give --corpus, --name with --group, or --person"),
            };
            enroll_images(&gw, &person_id, &images)
        }
        Command::Train {
            config,
            backend,
            attributes,
        } => {
            let gw = Gateway::open(config.load()?)?;
            let backend = backend.unwrap_or(gw.config().recognizer.backend);
            let s = gw.train(backend)?;
            println!(
                "{} v{}: {} classes, {} faces, {} ms, threshold {:.4}",
                s.backend,
                s.version,
                s.classes.len(),
                s.metrics.samples,
                s.metrics.duration_ms,
                gw.models().latest(backend).map_or(f64::NAN, |m| m.unknown_threshold)
            );
            if let Some(dir) = attributes {
                for (attr, acc) in gw.train_attributes(&dir)? {
                    println!("{attr:<11} training accuracy {acc:.3}");
                }
            }
            Ok(())
        }
        Command::Eval {
            corpus,
            config,
            train_fraction,
            seed,
        } => eval(&config.load()?, &corpus, train_fraction, seed),
        Command::SimulateDoor {
            port,
            secret,
            watchdog,
            host,
        } => simulate_door(&DeviceConfig {
            address: format!("{host}:{port}"),
            shared_secret: secret,
            watchdog_seconds: watchdog,
        }),
    }
}

fn enroll_images(gw: &Gateway, person_id: &str, images: &[PathBuf]) -> anyhow::Result<()> {
    let mut accepted = 0;
    for path in images {
        let frame = Frame::load(path, "enroll", 0)?;
        match gw
            .profiles()
            .add_face_image(person_id, &frame, gw.detector(), &gw.config().guidance, &[])
        {
            Ok(AddImageOutcome::Accepted(r)) => {
                accepted += 1;
                println!("{}: accepted as {}", path.display(), r.image_ref);
            }
            Ok(AddImageOutcome::Rejected(m)) => println!("{}: {}", path.display(), m.text),
            Err(e) => println!("{}: {e}", path.display()),
        }
    }
    println!("{accepted} of {} images accepted for {person_id}", images.len());
    Ok(())
}

fn replay(config: SystemConfig, corpus: &Path, out: Option<&Path>, pace_ms: u64, annotations: bool) -> anyhow::Result<()> {
    let gw = Gateway::open(config)?;
    let opts = ReplayOptions {
        pace_ms,
        use_annotations: annotations,
        ..ReplayOptions::default()
    };
    let report = gw.replay(corpus, &opts)?;
    for f in &report.per_frame {
        println!(
            "{:>8} {:<12} active={:<5} got={:<8} {}",
            f.timestamp_ms,
            f.camera_id,
            f.active,
            ReplayReport::predicted_label(f),
            f.descriptions.join("; ")
        );
    }
    println!("{} frames, {} active, {} events", report.frames, report.active_frames, report.events);
    for (stage, s) in &report.stages {
        println!("{stage:<9} median {:>8.2} ms  max {:>8.2} ms", s.median_ms, s.max_ms);
    }
    println!(
        "end to end median {:.1} ms, {} sent, {} failed",
        report.end_to_end.median_ms, report.notifications_sent, report.notifications_failed
    );
    if let Some(id) = &report.identification {
        println!("identification: {} scored, {} gated, macro F {:.3}", id.scored, id.gated, id.macro_f);
    }
    if let Some(path) = out {
        std::fs::write(path, serde_json::to_vec_pretty(&report)?)?;
    }
    Ok(())
}

fn eval(config: &SystemConfig, corpus: &Path, fraction: f64, seed: u64) -> anyhow::Result<()> {
    let entries = load_labels(corpus)?;
    let (train, test) = split_train_test(&entries, |e| &e.person_id, fraction, seed);
    let detector = doorwatch::vision::FaceDetector::new(doorwatch::vision::CascadeModel::bundled_frontal_face(), config.scan);
    let cfg = &config.recognizer.train;
    let (train_faces, _) = load_faces(corpus, &train, &detector, cfg.lbp.face_size)?;
    let (test_faces, missed) = load_faces(corpus, &test, &detector, cfg.lbp.face_size)?;
    println!("{} train / {} test faces ({} test images without a face)", train_faces.len(), test_faces.len(), missed.len());
    for backend in Backend::ALL {
        let t = Instant::now();
        let snap = train_backend(backend, &train_faces, cfg, "eval")?;
        let secs = t.elapsed().as_secs_f64();
        let (mut closed, mut open) = (Confusion::new(), Confusion::new());
        for f in &test_faces {
            closed.add(&f.label, &identify(&f.face, &snap, f64::NEG_INFINITY)?.label);
            open.add(&f.label, &identify(&f.face, &snap, snap.unknown_threshold)?.label);
        }
        for m in &missed {
            closed.add(&m.person_id, UNKNOWN);
            open.add(&m.person_id, UNKNOWN);
        }
        println!(
            "{backend:<11} F {:.3} (with unknown threshold {:.3})  trained in {secs:.1}s",
            closed.macro_f(),
            open.macro_f()
        );
    }
    Ok(())
}

fn simulate_door(config: &DeviceConfig) -> anyhow::Result<()> {
    let sim = DeviceSim::spawn(config)?;
    println!("relay switch listening on {}", sim.addr());
    let stop = ctrl_c_flag()?;
    let mut last = None;
    while !stop.load(Ordering::SeqCst) {
        let relay = sim.relay();
        if last != Some(relay) {
            println!("relay {}", relay.as_str());
            last = Some(relay);
        }
        std::thread::sleep(Duration::from_millis(50));
    }
    sim.shutdown();
    Ok(())
}

fn ctrl_c_flag() -> anyhow::Result<Arc<AtomicBool>> {
    let flag = Arc::new(AtomicBool::new(false));
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build()?;
    let f = flag.clone();
    std::thread::spawn(move || {
        rt.block_on(async {
            let _ = tokio::signal::ctrl_c().await;
        });
        f.store(true, Ordering::SeqCst);
    });
    Ok(flag)
}

fn wall_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

/// Picks up PNGs appearing in a camera's directory, in name order.
fn watch_camera(ingest: &Ingest, camera: &str, dir: &Path, seen: &mut HashSet<PathBuf>, last_ts: &mut u64) {
    let Ok(read) = std::fs::read_dir(dir) else { return };
    let mut fresh: Vec<PathBuf> = read
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "png") && !seen.contains(p))
        .collect();
    fresh.sort();
    for path in fresh {
        let ts = wall_ms().max(*last_ts);
        match Frame::load(&path, camera, ts) {
            Ok(frame) => {
                let lm = path.with_extension("lm");
                let landmarks = lm.exists().then(|| Landmarks68::load(&lm).ok()).flatten();
                let hints = FrameHints {
                    landmarks,
                    origin: Some(Instant::now()),
                };
                if ingest.submit(frame, hints) != Admission::Paused {
                    *last_ts = ts;
                    seen.insert(path);
                }
            }
            // possibly still being written; retry next poll
            Err(e) => tracing::debug!(path = %path.display(), error = %e, "frame not readable yet"),
        }
    }
}

fn run(config: SystemConfig, bind: Option<String>, poll_ms: u64) -> anyhow::Result<()> {
    let bind = bind.unwrap_or_else(|| config.api.bind.clone());
    let gw = Arc::new(Gateway::open(config)?);
    let ingest = Arc::new(Ingest::spawn(gw.clone()));
    let stop = Arc::new(AtomicBool::new(false));
    let mut threads = Vec::new();
    for cam in gw.config().cameras.iter().filter(|c| !c.source.is_empty()) {
        let (ingest, stop) = (ingest.clone(), stop.clone());
        let (id, dir) = (cam.id.clone(), gw.config().data_dir.join(&cam.source));
        tracing::info!(camera = %id, dir = %dir.display(), "watching");
        threads.push(std::thread::spawn(move || {
            let (mut seen, mut last) = (HashSet::new(), 0);
            while !stop.load(Ordering::SeqCst) {
                watch_camera(&ingest, &id, &dir, &mut seen, &mut last);
                std::thread::sleep(Duration::from_millis(poll_ms));
            }
        }));
    }
    {
        let (gw, stop) = (gw.clone(), stop.clone());
        threads.push(std::thread::spawn(move || {
            while !stop.load(Ordering::SeqCst) {
                gw.tick_door();
                std::thread::sleep(Duration::from_millis(100));
            }
        }));
    }

    let rt = tokio::runtime::Runtime::new()?;
    let served = rt.block_on(doorwatch::gateway::api::serve(gw.clone(), &bind, async {
        let _ = tokio::signal::ctrl_c().await;
    }));
    stop.store(true, Ordering::SeqCst);
    for t in threads {
        let _ = t.join();
    }
    if let Ok(ingest) = Arc::try_unwrap(ingest) {
        ingest.shutdown();
    }
    gw.notify_queue().wait_idle(Duration::from_secs(5));
    served?;
    Ok(())
}
