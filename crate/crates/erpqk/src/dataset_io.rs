//! On-disk subject format and a synthetic P300 generator.
//!
//! A subject directory holds three files:
//!   - `meta.json`: UTF-8 JSON with `fs`, `n_channels`, `channel_names`, `subject_id`
//!   - `signal.bin`: little-endian 32-bit floats, channel-major (channel 0's
//!     samples contiguous, then channel 1, ...)
//!   - `events.csv`: header `sample,label`, label 1 = TARGET, 0 = NON-TARGET
//!
//! The synthetic generator plants a Gaussian evoked bump on TARGET trials in
//! unit-variance noise, so pipeline behaviour can be checked against known
//! ground truth at any signal-to-noise ratio.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dsp::{Event, Recording};
use crate::error::{Error, Result};
use crate::types::Label;

pub const META_FILE: &str = "meta.json";
pub const SIGNAL_FILE: &str = "signal.bin";
pub const EVENTS_FILE: &str = "events.csv";

/// Contents of `meta.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubjectMeta {
    pub fs: f64,
    pub n_channels: usize,
    pub channel_names: Vec<String>,
    pub subject_id: String,
}

fn load_err(path: &Path, detail: impl Into<String>) -> Error {
    Error::Load { path: path.to_path_buf(), detail: detail.into() }
}

/// Load a subject directory into a [`Recording`] (events sorted by sample).
pub fn load_subject(dir: impl AsRef<Path>) -> Result<Recording> {
    let dir = dir.as_ref();
    let meta_path = dir.join(META_FILE);
    let meta_text =
        fs::read_to_string(&meta_path).map_err(|e| load_err(&meta_path, e.to_string()))?;
    let meta: SubjectMeta =
        serde_json::from_str(&meta_text).map_err(|e| load_err(&meta_path, e.to_string()))?;
    if meta.n_channels == 0 {
        return Err(load_err(&meta_path, "n_channels must be >= 1"));
    }
    if meta.channel_names.len() != meta.n_channels {
        return Err(load_err(
            &meta_path,
            format!("{} channel names for n_channels={}", meta.channel_names.len(), meta.n_channels),
        ));
    }

    let sig_path = dir.join(SIGNAL_FILE);
    let bytes = fs::read(&sig_path).map_err(|e| load_err(&sig_path, e.to_string()))?;
    let stride = 4 * meta.n_channels;
    if bytes.len() % stride != 0 {
        return Err(load_err(
            &sig_path,
            format!("{} bytes is not a multiple of 4 * n_channels = {stride}", bytes.len()),
        ));
    }
    let n_samples = bytes.len() / stride;
    if n_samples == 0 {
        return Err(load_err(&sig_path, "empty signal"));
    }
    let mut data = DMatrix::zeros(meta.n_channels, n_samples);
    for ch in 0..meta.n_channels {
        for s in 0..n_samples {
            let off = 4 * (ch * n_samples + s);
            let v = f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
            data[(ch, s)] = v as f64;
        }
    }

    let ev_path = dir.join(EVENTS_FILE);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(&ev_path)
        .map_err(|e| load_err(&ev_path, e.to_string()))?;
    {
        let headers = reader.headers().map_err(|e| load_err(&ev_path, e.to_string()))?;
        if headers.len() != 2 || &headers[0] != "sample" || &headers[1] != "label" {
            return Err(load_err(&ev_path, format!("expected header `sample,label`, got {headers:?}")));
        }
    }
    let mut events = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| load_err(&ev_path, e.to_string()))?;
        if record.len() != 2 {
            return Err(load_err(&ev_path, format!("row {}: expected 2 fields", row + 1)));
        }
        let sample: usize = record[0]
            .trim()
            .parse()
            .map_err(|_| load_err(&ev_path, format!("row {}: bad sample `{}`", row + 1, &record[0])))?;
        let label = match record[1].trim() {
            "1" => Label::Target,
            "0" => Label::NonTarget,
            other => {
                return Err(load_err(&ev_path, format!("row {}: label must be 0 or 1, got `{other}`", row + 1)))
            }
        };
        if sample >= n_samples {
            return Err(load_err(
                &ev_path,
                format!("row {}: event at sample {sample} outside {n_samples}-sample signal", row + 1),
            ));
        }
        events.push(Event { sample, label });
    }
    events.sort_by_key(|e| e.sample);

    Recording::new(meta.fs, data, meta.channel_names, events)
}

/// Write a subject directory atomically (temp directory + rename).
///
/// An existing destination is replaced only if it looks like a subject
/// directory (contains `meta.json`); anything else is refused.
pub fn save_subject(rec: &Recording, subject_id: &str, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let parent = dir.parent().unwrap_or_else(|| Path::new("."));
    let name = dir
        .file_name()
        .ok_or_else(|| Error::Parameter(format!("bad output path {}", dir.display())))?;

    if dir.exists() && !dir.join(META_FILE).exists() {
        return Err(Error::Parameter(format!(
            "refusing to overwrite {}: not a subject directory",
            dir.display()
        )));
    }

    fs::create_dir_all(parent)?;
    let tmp: PathBuf = parent.join(format!(
        ".{}.tmp-{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    if tmp.exists() {
        fs::remove_dir_all(&tmp)?;
    }
    fs::create_dir(&tmp)?;

    let write_all = || -> Result<()> {
        let meta = SubjectMeta {
            fs: rec.fs(),
            n_channels: rec.n_channels(),
            channel_names: rec.channel_names().to_vec(),
            subject_id: subject_id.to_string(),
        };
        let meta_json = serde_json::to_string_pretty(&meta)
            .map_err(|e| Error::Parameter(e.to_string()))?;
        fs::write(tmp.join(META_FILE), meta_json)?;

        let mut bytes = Vec::with_capacity(4 * rec.n_channels() * rec.n_samples());
        for ch in 0..rec.n_channels() {
            for s in 0..rec.n_samples() {
                bytes.extend_from_slice(&(rec.data()[(ch, s)] as f32).to_le_bytes());
            }
        }
        fs::write(tmp.join(SIGNAL_FILE), bytes)?;

        let mut f = fs::File::create(tmp.join(EVENTS_FILE))?;
        writeln!(f, "sample,label")?;
        for ev in rec.events() {
            let code = match ev.label {
                Label::Target => 1,
                Label::NonTarget => 0,
            };
            writeln!(f, "{},{}", ev.sample, code)?;
        }
        f.flush()?;
        Ok(())
    };
    if let Err(e) = write_all() {
        let _ = fs::remove_dir_all(&tmp);
        return Err(e);
    }

    if dir.exists() {
        fs::remove_dir_all(dir)?;
    }
    fs::rename(&tmp, dir)?;
    Ok(())
}

/// Noise colour for the synthetic generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    White,
    Pink,
}

/// Parameters of the synthetic P300 subject generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthParams {
    pub n_channels: usize,
    pub fs: f64,
    pub n_target: usize,
    pub n_nontarget: usize,
    /// Evoked peak latency after stimulus onset, seconds.
    pub peak_latency_s: f64,
    /// Gaussian width (sigma) of the evoked bump, seconds.
    pub peak_width_s: f64,
    /// Amplitude ratio of the evoked peak to the unit noise std.
    pub snr: f64,
    /// Per-channel projection of the evoked source; `None` uses a smooth
    /// default profile with a unique maximum.
    pub mixing: Option<Vec<f64>>,
    pub noise: NoiseKind,
    /// Relative per-trial amplitude jitter (0 disables).
    pub amplitude_jitter: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n_channels: 16,
            fs: 128.0,
            n_target: 128,
            n_nontarget: 640,
            peak_latency_s: 0.3,
            peak_width_s: 0.1,
            snr: 1.0,
            mixing: None,
            noise: NoiseKind::Pink,
            amplitude_jitter: 0.0,
            seed: 0,
        }
    }
}

impl SynthParams {
    fn validate(&self) -> Result<()> {
        if self.n_channels == 0 {
            return Err(Error::Parameter("n_channels must be >= 1".into()));
        }
        if !(self.fs > 0.0) {
            return Err(Error::Parameter("fs must be positive".into()));
        }
        if self.n_target == 0 || self.n_nontarget == 0 {
            return Err(Error::Parameter("trial counts must be positive".into()));
        }
        if !(self.peak_latency_s > 0.0) {
            return Err(Error::Parameter("peak_latency_s must be positive".into()));
        }
        if !(self.peak_width_s > 0.0) {
            return Err(Error::Parameter("peak_width_s must be positive".into()));
        }
        if self.snr < 0.0 {
            return Err(Error::Parameter("snr must be >= 0".into()));
        }
        if let Some(m) = &self.mixing {
            if m.len() != self.n_channels {
                return Err(Error::Parameter(format!(
                    "mixing has {} entries for {} channels",
                    m.len(),
                    self.n_channels
                )));
            }
        }
        Ok(())
    }

    /// Default channel projection: a smooth bump peaking off-centre so the
    /// maximum channel is unique.
    pub fn default_mixing(n_channels: usize) -> Vec<f64> {
        let centre = 0.4 * (n_channels.saturating_sub(1)) as f64;
        let width = (n_channels as f64 / 4.0).max(1.0);
        (0..n_channels)
            .map(|ch| (-0.5 * ((ch as f64 - centre) / width).powi(2)).exp())
            .collect()
    }
}

/// Shape white noise to a 1/f amplitude spectrum, preserving length.
fn pink_shape(x: &mut [f64]) {
    let n = x.len();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut planner = rustfft::FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    buf[0] = Complex64::new(0.0, 0.0); // drop DC
    for (k, b) in buf.iter_mut().enumerate().skip(1) {
        let f = k.min(n - k) as f64; // two-sided spectrum
        *b *= 1.0 / f.sqrt();
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    for (v, b) in x.iter_mut().zip(&buf) {
        *v = b.re / n as f64;
    }
}

/// Generate a synthetic subject. Fully determined by `params` (incl. seed).
///
/// Noise is normalized to exactly unit sample std per channel; every TARGET
/// event adds `snr * g(t - latency) * mixing[ch]` with `g` a Gaussian bump.
/// Events are spaced widely enough that the standard analysis windows always
/// fit inside the recording.
pub fn synth_generate(params: &SynthParams) -> Result<Recording> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let n_events = params.n_target + params.n_nontarget;
    let min_spacing_s = (params.peak_latency_s + 4.0 * params.peak_width_s).max(0.8);
    let lead_s = 1.0;
    let tail_s = 1.5;

    // event schedule
    let mut onsets = Vec::with_capacity(n_events);
    let mut t = lead_s;
    for _ in 0..n_events {
        onsets.push((t * params.fs).round() as usize);
        t += min_spacing_s + 0.2 * rng.random::<f64>();
    }
    let n_samples = ((t + tail_s) * params.fs).ceil() as usize;

    // label sequence
    let mut labels = vec![Label::Target; params.n_target];
    labels.extend(std::iter::repeat_n(Label::NonTarget, params.n_nontarget));
    labels.shuffle(&mut rng);

    // unit-std noise per channel
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    let mut data = DMatrix::zeros(params.n_channels, n_samples);
    for ch in 0..params.n_channels {
        let mut row: Vec<f64> = (0..n_samples).map(|_| normal.sample(&mut rng)).collect();
        if params.noise == NoiseKind::Pink {
            pink_shape(&mut row);
        }
        let mean = row.iter().sum::<f64>() / n_samples as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n_samples as f64;
        let std = var.sqrt().max(1e-30);
        for (s, v) in row.iter().enumerate() {
            data[(ch, s)] = (v - mean) / std;
        }
    }

    // evoked bump on TARGET trials
    let mixing = params
        .mixing
        .clone()
        .unwrap_or_else(|| SynthParams::default_mixing(params.n_channels));
    let sigma = params.peak_width_s;
    let half_support = (4.0 * sigma * params.fs).ceil() as i64;
    for (onset, label) in onsets.iter().zip(&labels) {
        let amp_factor = 1.0 + params.amplitude_jitter * normal.sample(&mut rng);
        if *label != Label::Target {
            continue;
        }
        let centre = *onset as f64 / params.fs + params.peak_latency_s;
        let centre_idx = (centre * params.fs).round() as i64;
        for s in (centre_idx - half_support).max(0)..(centre_idx + half_support + 1).min(n_samples as i64) {
            let dt = s as f64 / params.fs - centre;
            let g = (-0.5 * (dt / sigma).powi(2)).exp();
            for (ch, &mix) in mixing.iter().enumerate() {
                data[(ch, s as usize)] += params.snr * amp_factor * mix * g;
            }
        }
    }

    let events: Vec<Event> = onsets
        .iter()
        .zip(&labels)
        .map(|(&sample, &label)| Event { sample, label })
        .collect();
    let channel_names = (1..=params.n_channels).map(|i| format!("ch{i:02}")).collect();

    Recording::new(params.fs, data, channel_names, events)
}
