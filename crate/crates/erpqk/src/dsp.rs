//! Temporal preprocessing: zero-phase FIR band-pass filtering and epoch
//! extraction around stimulus events.
//!
//! The band-pass is a Hamming-windowed sinc FIR applied forward and backward
//! (`filtfilt`), which squares the magnitude response and cancels the phase.
//! Epochs are cut with round-to-nearest sample boundaries on a half-open
//! window, so downstream shapes are deterministic.

use nalgebra::DMatrix;

use crate::error::{Error, EventWindowViolation, Result};
use crate::par;
use crate::types::Label;

/// A stimulus event: onset sample and trial class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub sample: usize,
    pub label: Label,
}

/// Continuous multichannel EEG plus a stimulus event list.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    fs: f64,
    /// channels x samples, microvolts.
    data: DMatrix<f64>,
    channel_names: Vec<String>,
    events: Vec<Event>,
}

impl Recording {
    pub fn new(
        fs: f64,
        data: DMatrix<f64>,
        channel_names: Vec<String>,
        events: Vec<Event>,
    ) -> Result<Self> {
        if !(fs > 0.0) {
            return Err(Error::Parameter(format!("sampling rate must be positive, got {fs}")));
        }
        if data.nrows() == 0 {
            return Err(Error::Parameter("recording needs at least one channel".into()));
        }
        if channel_names.len() != data.nrows() {
            return Err(Error::Parameter(format!(
                "{} channel names for {} channels",
                channel_names.len(),
                data.nrows()
            )));
        }
        let n = data.ncols();
        if let Some(ev) = events.iter().find(|e| e.sample >= n) {
            return Err(Error::Parameter(format!(
                "event at sample {} outside recording of {} samples",
                ev.sample, n
            )));
        }
        Ok(Recording { fs, data, channel_names, events })
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }
}

/// Linear-phase FIR band-pass kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct FirKernel {
    taps: Vec<f64>,
    lo_hz: f64,
    hi_hz: f64,
    fs: f64,
}

impl FirKernel {
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn band(&self) -> (f64, f64) {
        (self.lo_hz, self.hi_hz)
    }
}

/// Default tap count: a 4-second impulse response, forced odd.
pub fn default_n_taps(fs: f64) -> usize {
    let n = (4.0 * fs).round() as usize;
    n | 1
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
    }
}

/// Design a Hamming-windowed sinc band-pass FIR.
///
/// The taps are scaled so the gain at the band centre `(lo+hi)/2` is exactly 1.
pub fn design_bandpass(fs: f64, lo: f64, hi: f64, n_taps: usize) -> Result<FirKernel> {
    if !(fs > 0.0) {
        return Err(Error::Parameter(format!("sampling rate must be positive, got {fs}")));
    }
    if !(0.0 < lo && lo < hi && hi < fs / 2.0) {
        return Err(Error::Parameter(format!(
            "band edges must satisfy 0 < lo < hi < fs/2, got lo={lo}, hi={hi}, fs={fs}"
        )));
    }
    if n_taps < 3 || n_taps.is_multiple_of(2) {
        return Err(Error::Parameter(format!("tap count must be odd and >= 3, got {n_taps}")));
    }

    let mid = (n_taps - 1) / 2;
    let mut taps = Vec::with_capacity(n_taps);
    for k in 0..n_taps {
        let m = k as f64 - mid as f64;
        let ideal = 2.0 * hi / fs * sinc(2.0 * hi * m / fs) - 2.0 * lo / fs * sinc(2.0 * lo * m / fs);
        let w = 0.54 - 0.46 * (2.0 * std::f64::consts::PI * k as f64 / (n_taps as f64 - 1.0)).cos();
        taps.push(ideal * w);
    }

    // Unit gain at band centre. Symmetric taps make the response real after
    // removing the linear phase, so a cosine sum suffices.
    let fc = 0.5 * (lo + hi);
    let gain: f64 = taps
        .iter()
        .enumerate()
        .map(|(k, &h)| h * (2.0 * std::f64::consts::PI * fc * (k as f64 - mid as f64) / fs).cos())
        .sum();
    for h in &mut taps {
        *h /= gain;
    }

    Ok(FirKernel { taps, lo_hz: lo, hi_hz: hi, fs })
}

/// `y[i] = sum_k h[k] * x[i + k - mid]`, zero extension outside `x`.
fn convolve_same(x: &[f64], taps: &[f64]) -> Vec<f64> {
    let mid = (taps.len() - 1) / 2;
    let n = x.len();
    let mut y = vec![0.0; n];
    for (i, yi) in y.iter_mut().enumerate() {
        let k_lo = mid.saturating_sub(i);
        let k_hi = taps.len().min(n + mid - i);
        let mut acc = 0.0;
        for k in k_lo..k_hi {
            acc += taps[k] * x[i + k - mid];
        }
        *yi = acc;
    }
    y
}

/// Mirror-pad `x` by `pad` samples on each side (edge sample not repeated).
fn mirror_pad(x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n + 2 * pad);
    for i in 0..pad {
        out.push(x[pad - i]);
    }
    out.extend_from_slice(x);
    for i in 0..pad {
        out.push(x[n - 2 - i]);
    }
    out
}

fn filtfilt_channel(x: &[f64], taps: &[f64]) -> Vec<f64> {
    let pad = taps.len() - 1;
    let padded = mirror_pad(x, pad);
    let mut y = convolve_same(&padded, taps);
    y.reverse();
    let mut y = convolve_same(&y, taps);
    y.reverse();
    y[pad..pad + x.len()].to_vec()
}

/// Zero-phase filtering: each channel is filtered forward then backward.
///
/// Edge transients are absorbed by mirror padding of length `taps - 1`, which
/// exactly covers the region the two passes can contaminate. Output length
/// equals input length. Channels are independent, so the per-channel work is
/// parallelized with schedule-independent results.
pub fn filtfilt(rec: &Recording, kernel: &FirKernel) -> Result<Recording> {
    if kernel.fs != rec.fs {
        return Err(Error::Parameter(format!(
            "kernel designed at {} Hz applied to {} Hz recording",
            kernel.fs, rec.fs
        )));
    }
    let taps = kernel.taps.len();
    if rec.n_samples() <= 3 * taps {
        return Err(Error::SignalTooShort(format!(
            "need more than {} samples for a {}-tap kernel, got {}",
            3 * taps,
            taps,
            rec.n_samples()
        )));
    }

    let rows: Vec<Vec<f64>> = par::map_collect(rec.n_channels(), |ch| {
        let x: Vec<f64> = rec.data.row(ch).iter().copied().collect();
        filtfilt_channel(&x, &kernel.taps)
    });

    let mut data = DMatrix::zeros(rec.n_channels(), rec.n_samples());
    for (ch, row) in rows.iter().enumerate() {
        for (s, &v) in row.iter().enumerate() {
            data[(ch, s)] = v;
        }
    }

    Ok(Recording {
        fs: rec.fs,
        data,
        channel_names: rec.channel_names.clone(),
        events: rec.events.clone(),
    })
}

/// Trials x channels x samples tensor with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSet {
    /// One channels x samples matrix per trial.
    epochs: Vec<DMatrix<f64>>,
    labels: Vec<Label>,
    fs: f64,
    tmin_s: f64,
    tmax_s: f64,
}

impl EpochSet {
    pub fn from_parts(
        epochs: Vec<DMatrix<f64>>,
        labels: Vec<Label>,
        fs: f64,
        tmin_s: f64,
        tmax_s: f64,
    ) -> Result<Self> {
        if epochs.len() != labels.len() {
            return Err(Error::Parameter(format!(
                "{} epochs but {} labels",
                epochs.len(),
                labels.len()
            )));
        }
        let expected = epoch_len(fs, tmin_s, tmax_s)?;
        for (i, e) in epochs.iter().enumerate() {
            if e.ncols() != expected {
                return Err(Error::Parameter(format!(
                    "epoch {i} has {} samples, window implies {expected}",
                    e.ncols()
                )));
            }
        }
        if let Some(first) = epochs.first() {
            if epochs.iter().any(|e| e.nrows() != first.nrows()) {
                return Err(Error::Parameter("epochs disagree on channel count".into()));
            }
        }
        Ok(EpochSet { epochs, labels, fs, tmin_s, tmax_s })
    }

    pub fn epochs(&self) -> &[DMatrix<f64>] {
        &self.epochs
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn window(&self) -> (f64, f64) {
        (self.tmin_s, self.tmax_s)
    }

    pub fn n_trials(&self) -> usize {
        self.epochs.len()
    }

    pub fn n_channels(&self) -> usize {
        self.epochs.first().map_or(0, |e| e.nrows())
    }

    pub fn n_samples(&self) -> usize {
        self.epochs.first().map_or(0, |e| e.ncols())
    }

    /// Counts per class in [`Label::CLASS_ORDER`] order.
    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0usize; 2];
        for l in &self.labels {
            counts[l.class_index()] += 1;
        }
        counts
    }

    /// New set holding only the trials at `indices`, order preserved.
    pub fn subset(&self, indices: &[usize]) -> Result<EpochSet> {
        let mut epochs = Vec::with_capacity(indices.len());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            let e = self
                .epochs
                .get(i)
                .ok_or_else(|| Error::Parameter(format!("trial index {i} out of range")))?;
            epochs.push(e.clone());
            labels.push(self.labels[i]);
        }
        Ok(EpochSet { epochs, labels, fs: self.fs, tmin_s: self.tmin_s, tmax_s: self.tmax_s })
    }
}

/// Samples in the half-open window `[tmin, tmax)` after round-to-nearest.
fn epoch_len(fs: f64, tmin_s: f64, tmax_s: f64) -> Result<usize> {
    if !(tmin_s < tmax_s) {
        return Err(Error::Parameter(format!("window [{tmin_s}, {tmax_s}) is empty")));
    }
    let lo = (tmin_s * fs).round() as i64;
    let hi = (tmax_s * fs).round() as i64;
    if hi <= lo {
        return Err(Error::Parameter(format!(
            "window [{tmin_s}, {tmax_s}) rounds to zero samples at {fs} Hz"
        )));
    }
    Ok((hi - lo) as usize)
}

/// Cut one epoch per event: samples `[e + round(tmin*fs), e + round(tmax*fs))`.
///
/// All-or-nothing: if any window exceeds the recording bounds, the whole call
/// fails and the error lists every offending event.
pub fn extract_epochs(rec: &Recording, tmin_s: f64, tmax_s: f64) -> Result<EpochSet> {
    let len = epoch_len(rec.fs, tmin_s, tmax_s)?;
    let off_lo = (tmin_s * rec.fs).round() as i64;

    let n = rec.n_samples() as i64;
    let violations: Vec<EventWindowViolation> = rec
        .events
        .iter()
        .enumerate()
        .filter_map(|(idx, ev)| {
            let start = ev.sample as i64 + off_lo;
            let end = start + len as i64;
            if start < 0 || end > n {
                Some(EventWindowViolation { event_index: idx, onset: ev.sample, start, end })
            } else {
                None
            }
        })
        .collect();
    if !violations.is_empty() {
        return Err(Error::EpochBounds(violations));
    }

    let epochs: Vec<DMatrix<f64>> = rec
        .events
        .iter()
        .map(|ev| {
            let start = (ev.sample as i64 + off_lo) as usize;
            rec.data.columns(start, len).into_owned()
        })
        .collect();
    let labels = rec.events.iter().map(|ev| ev.label).collect();

    EpochSet::from_parts(epochs, labels, rec.fs, tmin_s, tmax_s)
}
