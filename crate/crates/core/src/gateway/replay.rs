use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{FrameHints, Gateway, GatewayError, StageTimes};
use crate::description::{AnnotatedItems, Item, Landmarks68, ThreatLevel};
use crate::recognition::{ClassScores, Confusion, UNKNOWN};
use crate::vision::Frame;

/// One row of `frames.tsv`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayFrame {
    pub timestamp_ms: u64,
    pub camera_id: String,
    pub image: PathBuf,
    /// Person id, `UNKNOWN` for a stranger, `None` when nobody is there or
    /// the column is absent.
    pub truth: Option<String>,
    pub items: Vec<Item>,
    /// `<image stem>.lm` next to the image, when present.
    pub landmarks: Option<PathBuf>,
}

const HEADER: [&str; 3] = ["timestamp_ms", "camera_id", "image"];

/// Reads `<dir>/frames.tsv`: `timestamp_ms camera_id image [truth] [items]`.
/// A directory with no files at all is an empty corpus.
pub fn load_replay_corpus(dir: impl AsRef<Path>) -> Result<Vec<ReplayFrame>, GatewayError> {
    let dir = dir.as_ref();
    let index = dir.join("frames.tsv");
    if !index.exists() {
        let empty = std::fs::read_dir(dir)
            .map_err(|e| GatewayError::Corpus(format!("{}: {e}", dir.display())))?
            .next()
            .is_none();
        return if empty {
            Ok(Vec::new())
        } else {
            Err(GatewayError::Corpus(format!("{} has no frames.tsv", dir.display())))
        };
    }
    let text = std::fs::read_to_string(&index)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split('\t').map(str::trim).collect();
    if header.len() < 3 || header[..3] != HEADER {
        return Err(GatewayError::Corpus(format!("unexpected frames.tsv header {header:?}")));
    }
    let col = |name: &str| header.iter().position(|h| *h == name);
    let (truth_col, items_col) = (col("truth"), col("items"));
    let mut out = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = |m: String| GatewayError::Corpus(format!("frames.tsv line {}: {m}", n + 2));
        let cells: Vec<&str> = line.split('\t').map(str::trim).collect();
        if cells.len() != header.len() {
            return Err(bad(format!("{} columns, expected {}", cells.len(), header.len())));
        }
        let timestamp_ms = cells[0].parse().map_err(|_| bad(format!("timestamp {:?}", cells[0])))?;
        let image = dir.join(cells[2]);
        if !image.exists() {
            return Err(bad(format!("missing image {}", cells[2])));
        }
        let truth = truth_col.map(|c| cells[c]).and_then(|t| match t {
            "" | "-" => None,
            "unknown" | UNKNOWN => Some(UNKNOWN.to_string()),
            pid => Some(pid.to_string()),
        });
        let items = match items_col {
            Some(c) => AnnotatedItems::parse_cell(cells[c]).map_err(|e| bad(e.to_string()))?,
            None => Vec::new(),
        };
        let lm = image.with_extension("lm");
        out.push(ReplayFrame {
            timestamp_ms,
            camera_id: cells[1].to_string(),
            landmarks: lm.exists().then_some(lm),
            image,
            truth,
            items,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayOptions {
    /// Sleep between frames.
    pub pace_ms: u64,
    /// Use the corpus item column instead of the configured item detector.
    pub use_annotations: bool,
    /// How long to wait for queued notifications at the end.
    pub notify_wait_ms: u64,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        ReplayOptions {
            pace_ms: 0,
            use_annotations: true,
            notify_wait_ms: 10_000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub max_ms: f64,
}

impl LatencyStats {
    pub fn of(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut v = samples.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
        LatencyStats {
            count: n,
            mean_ms: v.iter().sum::<f64>() / n as f64,
            median_ms: median,
            max_ms: v[n - 1],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredFrame {
    pub timestamp_ms: u64,
    pub camera_id: String,
    pub image: PathBuf,
    pub active: bool,
    pub truth: Option<String>,
    /// Person id or `UNKNOWN` per event.
    pub predicted: Vec<String>,
    pub threats: Vec<ThreatLevel>,
    pub descriptions: Vec<String>,
    pub times: StageTimes,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentificationScore {
    /// Active frames with a ground-truth person.
    pub scored: usize,
    /// Frames with a ground-truth person that the change test skipped.
    pub gated: usize,
    pub confusion: Confusion,
    pub per_class: Vec<ClassScores>,
    pub macro_f: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub frames: usize,
    pub active_frames: usize,
    pub events: usize,
    pub stages: BTreeMap<String, LatencyStats>,
    /// Frame arrival to transport acceptance, over accepted notifications.
    pub end_to_end: LatencyStats,
    pub notifications_sent: usize,
    pub notifications_failed: usize,
    pub identification: Option<IdentificationScore>,
    pub per_frame: Vec<ScoredFrame>,
}

impl ReplayReport {
    /// The label an active frame is scored with: the first event's person,
    /// or `UNKNOWN` when nobody was recognized or nothing was detected.
    pub fn predicted_label(f: &ScoredFrame) -> &str {
        f.predicted.first().map(String::as_str).unwrap_or(UNKNOWN)
    }
}

impl Gateway {
    /// Feeds a recorded corpus through `process_frame` in file order.
    pub fn replay(&self, dir: impl AsRef<Path>, opts: &ReplayOptions) -> Result<ReplayReport, GatewayError> {
        let frames = load_replay_corpus(dir)?;
        if opts.use_annotations && frames.iter().any(|f| !f.items.is_empty()) {
            let mut ann = AnnotatedItems::new();
            for f in &frames {
                ann.insert(f.camera_id.clone(), f.timestamp_ms, f.items.iter().copied());
            }
            self.set_item_detector(Arc::new(ann));
        }
        let mut report = ReplayReport {
            frames: frames.len(),
            ..Default::default()
        };
        let mut event_ids = HashSet::new();
        let mut stage: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for (k, rf) in frames.iter().enumerate() {
            if k > 0 && opts.pace_ms > 0 {
                std::thread::sleep(Duration::from_millis(opts.pace_ms));
            }
            let origin = Instant::now();
            let frame = Frame::load(&rf.image, rf.camera_id.clone(), rf.timestamp_ms)?;
            let landmarks = match &rf.landmarks {
                Some(p) => Some(Landmarks68::load(p)?),
                None => None,
            };
            let out = self.process_frame(
                &frame,
                &FrameHints {
                    landmarks,
                    origin: Some(origin),
                },
            )?;
            stage.entry("change").or_default().push(out.times.change_ms);
            stage.entry("total").or_default().push(out.times.total_ms);
            if out.active {
                report.active_frames += 1;
                for (name, v) in [
                    ("detect", out.times.detect_ms),
                    ("identify", out.times.identify_ms),
                    ("describe", out.times.describe_ms),
                    ("persist", out.times.persist_ms),
                ] {
                    stage.entry(name).or_default().push(v);
                }
            }
            report.events += out.events.len();
            event_ids.extend(out.events.iter().map(|e| e.event_id.clone()));
            report.per_frame.push(ScoredFrame {
                timestamp_ms: rf.timestamp_ms,
                camera_id: rf.camera_id.clone(),
                image: rf.image.clone(),
                active: out.active,
                truth: rf.truth.clone(),
                predicted: out
                    .events
                    .iter()
                    .map(|e| e.person_id.clone().unwrap_or_else(|| UNKNOWN.to_string()))
                    .collect(),
                threats: out.events.iter().map(|e| e.threat).collect(),
                descriptions: out.events.iter().map(|e| e.description.clone()).collect(),
                times: out.times,
            });
        }
        report.stages = stage.into_iter().map(|(k, v)| (k.to_string(), LatencyStats::of(&v))).collect();

        if !event_ids.is_empty() {
            self.notify.wait_idle(Duration::from_millis(opts.notify_wait_ms));
        }
        let mut e2e = Vec::new();
        for r in self.notify.records().into_iter().filter(|r| event_ids.contains(&r.event_id)) {
            if r.result.accepted {
                report.notifications_sent += 1;
                e2e.push(r.end_to_end_ms);
            } else {
                report.notifications_failed += 1;
            }
        }
        report.end_to_end = LatencyStats::of(&e2e);

        let mut confusion = Confusion::new();
        let mut gated = 0;
        for f in report.per_frame.iter().filter(|f| f.truth.is_some()) {
            if !f.active {
                gated += 1;
                continue;
            }
            confusion.add(f.truth.as_deref().unwrap_or(UNKNOWN), ReplayReport::predicted_label(f));
        }
        if confusion.total() > 0 {
            report.identification = Some(IdentificationScore {
                scored: confusion.total(),
                gated,
                per_class: confusion.per_class(),
                macro_f: confusion.macro_f(),
                accuracy: confusion.accuracy(),
                confusion,
            });
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latency_stats() {
        let s = LatencyStats::of(&[3.0, 1.0, 2.0, 10.0]);
        assert_eq!(s.median_ms, 2.5);
        assert_eq!(s.max_ms, 10.0);
        assert_eq!(LatencyStats::of(&[]).count, 0);
    }

    #[test]
    fn bundled_corpus_parses() {
        let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/assets/replay");
        let frames = load_replay_corpus(dir).unwrap();
        assert_eq!(frames.len(), 10);
        assert_eq!(frames[3].truth.as_deref(), Some(UNKNOWN));
        assert_eq!(frames[3].items, vec![Item::Gun]);
        assert!(frames[4].landmarks.is_some());
        assert!(frames[0].truth.is_none());
    }

    #[test]
    fn empty_and_malformed() {
        let d = tempfile::tempdir().unwrap();
        assert!(load_replay_corpus(d.path()).unwrap().is_empty());
        std::fs::write(d.path().join("x.png"), b"").unwrap();
        assert!(load_replay_corpus(d.path()).is_err());
        std::fs::write(d.path().join("frames.tsv"), "ts\tcam\n").unwrap();
        assert!(load_replay_corpus(d.path()).is_err());
        std::fs::write(d.path().join("frames.tsv"), "timestamp_ms\tcamera_id\timage\nabc\tc\tx.png\n").unwrap();
        assert!(load_replay_corpus(d.path()).is_err());
    }
}
