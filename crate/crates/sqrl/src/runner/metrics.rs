use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SqrlError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Pretrain,
    /// Masked rollouts collected for the safety critic during pre-training.
    SafetyRollout,
    Finetune,
    Evaluate,
}

/// One row per finished episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub phase: Phase,
    pub episode: usize,
    pub global_step: usize,
    #[serde(rename = "return")]
    pub episode_return: f64,
    pub length: usize,
    pub failed: bool,
    pub cumulative_failures: usize,
    pub trailing_failure_rate: f64,
    pub alpha: f64,
    pub nu: f64,
    /// Mean safety-critic value over the episode's state-action pairs.
    pub mean_qsafe: f64,
    pub seed: u64,
    /// Steps in this episode where no candidate cleared the threshold.
    pub fallbacks: usize,
    /// Non-fallback masked actions whose re-checked score was not below
    /// the threshold. Always expected to be zero.
    pub mask_violations: usize,
}

/// Accumulates per-episode statistics for one phase.
#[derive(Clone, Debug)]
pub struct EpisodeTracker {
    phase: Phase,
    seed: u64,
    window: usize,
    recent: VecDeque<bool>,
    episode: usize,
    cumulative_failures: usize,
    ret: f64,
    length: usize,
    fallbacks: usize,
    violations: usize,
}

impl EpisodeTracker {
    pub fn new(phase: Phase, seed: u64, window: usize) -> Self {
        Self {
            phase,
            seed,
            window: window.max(1),
            recent: VecDeque::new(),
            episode: 0,
            cumulative_failures: 0,
            ret: 0.0,
            length: 0,
            fallbacks: 0,
            violations: 0,
        }
    }

    pub fn step(&mut self, reward: f64, fallback: bool, violation: bool) {
        self.ret += reward;
        self.length += 1;
        self.fallbacks += fallback as usize;
        self.violations += violation as usize;
    }

    pub fn cumulative_failures(&self) -> usize {
        self.cumulative_failures
    }

    pub fn episodes(&self) -> usize {
        self.episode
    }

    pub fn trailing_failure_rate(&self) -> f64 {
        if self.recent.is_empty() {
            0.0
        } else {
            self.recent.iter().filter(|&&f| f).count() as f64 / self.recent.len() as f64
        }
    }

    /// Close the current episode and produce its record.
    pub fn finish(&mut self, failed: bool, global_step: usize, alpha: f64, nu: f64, mean_qsafe: f64) -> MetricsRecord {
        self.cumulative_failures += failed as usize;
        self.recent.push_back(failed);
        if self.recent.len() > self.window {
            self.recent.pop_front();
        }
        let rec = MetricsRecord {
            phase: self.phase,
            episode: self.episode,
            global_step,
            episode_return: self.ret,
            length: self.length,
            failed,
            cumulative_failures: self.cumulative_failures,
            trailing_failure_rate: self.trailing_failure_rate(),
            alpha,
            nu,
            mean_qsafe,
            seed: self.seed,
            fallbacks: self.fallbacks,
            mask_violations: self.violations,
        };
        self.episode += 1;
        self.ret = 0.0;
        self.length = 0;
        self.fallbacks = 0;
        self.violations = 0;
        rec
    }
}

/// Run manifest written next to every metrics file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub records: usize,
    pub data_file: String,
}

impl RunManifest {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        Self {
            config_hash: config_hash.into(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            records: 0,
            data_file: String::new(),
        }
    }
}

pub fn manifest_path(data: &Path) -> PathBuf {
    let mut name = data.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    data.with_file_name(name)
}

/// Check that cumulative failures never decrease within a phase.
pub fn check_monotone(records: &[MetricsRecord]) -> Result<()> {
    let mut last: BTreeMap<(u64, Phase), usize> = BTreeMap::new();
    for r in records {
        let prev = last.entry((r.seed, r.phase)).or_insert(0);
        if r.cumulative_failures < *prev {
            return Err(SqrlError::Invariant(format!(
                "cumulative failures drop from {prev} to {} at {:?} episode {}",
                r.cumulative_failures, r.phase, r.episode
            )));
        }
        *prev = r.cumulative_failures;
    }
    Ok(())
}

/// Write records as JSON lines to `path` and a manifest to
/// `<path>.manifest.json`.
pub fn emit_metrics(records: &[MetricsRecord], path: &Path, manifest: &RunManifest) -> Result<()> {
    check_monotone(records)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| SqrlError::io(dir, e))?;
    }
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    fs::write(path, &buf).map_err(|e| SqrlError::io(path, e))?;
    let mut m = manifest.clone();
    m.records = records.len();
    m.data_file = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mpath = manifest_path(path);
    let mut f = fs::File::create(&mpath).map_err(|e| SqrlError::io(&mpath, e))?;
    serde_json::to_writer_pretty(&mut f, &m)?;
    f.write_all(b"\n").map_err(|e| SqrlError::io(&mpath, e))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let f = fs::File::open(path).map_err(|e| SqrlError::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| SqrlError::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Concatenate several per-seed metrics files, ordered by seed then phase
/// then episode.
pub fn merge_metrics(inputs: &[PathBuf], output: &Path) -> Result<usize> {
    let mut all = Vec::new();
    for p in inputs {
        all.extend(read_metrics(p)?);
    }
    all.sort_by_key(|r| (r.seed, r.phase, r.episode));
    check_monotone(&all)?;
    let mut buf = Vec::new();
    for r in &all {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    fs::write(output, buf).map_err(|e| SqrlError::io(output, e))?;
    Ok(all.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_records() -> Vec<MetricsRecord> {
        let mut t = EpisodeTracker::new(Phase::Finetune, 3, 2);
        let mut out = Vec::new();
        for (i, failed) in [false, true, true, false].into_iter().enumerate() {
            t.step(-0.5, i == 2, false);
            out.push(t.finish(failed, 10 * (i + 1), 0.2, 0.1 * i as f64, 0.03));
        }
        out
    }

    #[test]
    fn tracker_window_and_counts() {
        let r = sample_records();
        assert_eq!(r.iter().map(|x| x.cumulative_failures).collect::<Vec<_>>(), vec![0, 1, 2, 2]);
        assert_eq!(r[2].trailing_failure_rate, 1.0);
        assert_eq!(r[3].trailing_failure_rate, 0.5);
        assert_eq!(r[2].fallbacks, 1);
        assert_eq!(r[3].fallbacks, 0);
    }

    #[test]
    fn emit_then_read_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let recs = sample_records();
        emit_metrics(&recs, &path, &RunManifest::new("abc", 3)).unwrap();
        assert_eq!(read_metrics(&path).unwrap(), recs);
        let m: RunManifest = serde_json::from_str(&fs::read_to_string(manifest_path(&path)).unwrap()).unwrap();
        assert_eq!(m.records, 4);
        assert_eq!(m.seed, 3);
        assert!(fs::read_to_string(&path).unwrap().contains("\"return\":"));
    }

    #[test]
    fn empty_records_still_write_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        emit_metrics(&[], &path, &RunManifest::new("h", 0)).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "");
        assert!(manifest_path(&path).exists());
    }

    #[test]
    fn decreasing_cumulative_failures_rejected() {
        let mut recs = sample_records();
        recs[3].cumulative_failures = 0;
        let dir = tempfile::tempdir().unwrap();
        let err = emit_metrics(&recs, &dir.path().join("x.jsonl"), &RunManifest::new("h", 0)).unwrap_err();
        assert!(matches!(err, SqrlError::Invariant(_)));
    }

    #[test]
    fn unwritable_path_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = emit_metrics(&sample_records(), &blocker.join("m.jsonl"), &RunManifest::new("h", 0)).unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
    }

    #[test]
    fn merge_sorts_by_seed() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = sample_records();
        a.iter_mut().for_each(|r| r.seed = 9);
        let b = sample_records();
        let (pa, pb) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
        emit_metrics(&a, &pa, &RunManifest::new("h", 9)).unwrap();
        emit_metrics(&b, &pb, &RunManifest::new("h", 3)).unwrap();
        let out = dir.path().join("all.jsonl");
        assert_eq!(merge_metrics(&[pa, pb], &out).unwrap(), 8);
        let merged = read_metrics(&out).unwrap();
        assert_eq!(merged[0].seed, 3);
        assert_eq!(merged[7].seed, 9);
    }
}
