//! Multi-path aware receiver.
//!
//! Pipeline: energy gate ([`detect_packet`]) → preamble correlation path
//! search ([`detect_paths`]) → per-path dechirp of every payload window
//! ([`demodulate_paths`]) → amplitude-spectrum summation
//! ([`combine_paths`]) → hard decisions and LLR vectors.

use std::ops::Range;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tx::{ChirpConfig, FrameLayout, IqBuffer};
use crate::Real;

mod detect;
mod spectrum;

pub use detect::{detect_packet, detect_paths};
pub use spectrum::{
    combine_paths, dechirp_window, peak_list, soft_llr, soft_llr_combined, spectrum_to_llr, write_spectra_csv,
    Dechirper, LlrScaling, LlrVector, SymbolSpectrum, ThresholdPolicy,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RxError {
    #[error("window [{start}, {start}+{need}) exceeds buffer of {len} samples")]
    Window { start: usize, need: usize, len: usize },
    #[error("path at {start} leaves a truncated frame: needs {need} samples, buffer has {len}")]
    Truncated { start: usize, need: usize, len: usize },
    #[error("no paths to demodulate")]
    NoPaths,
    #[error("spectrum has {got} bins, expected {want}")]
    SpectrumLength { got: usize, want: usize },
    #[error("detection failed: {0}")]
    Detection(String),
}

/// A detected propagation path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathEstimate {
    /// First preamble sample of this path, oversampled grid.
    pub start_index: usize,
    /// Mean normalized preamble correlation, in `[0, 1]`.
    pub corr_mag: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombineMode {
    /// Sum the spectra of every detected path.
    #[default]
    Merge,
    /// Strongest path only.
    NoMerge,
}

impl CombineMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CombineMode::Merge => "merge",
            CombineMode::NoMerge => "nomerge",
        }
    }
}

impl std::str::FromStr for CombineMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "merge" => Ok(CombineMode::Merge),
            "nomerge" | "no-merge" | "no_merge" => Ok(CombineMode::NoMerge),
            other => Err(format!("unknown receiver mode '{other}' (merge, nomerge)")),
        }
    }
}

impl std::fmt::Display for CombineMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Detection and combination knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverConfig {
    /// Chunk energy over the quietest chunk that marks a packet.
    pub energy_factor: f64,
    /// Path peaks must reach this fraction of the strongest correlation.
    pub path_threshold: f64,
    /// Absolute floor on the mean normalized correlation of a path.
    pub corr_floor: f64,
    /// Required correlation of every SFD window relative to the path's
    /// preamble score.
    pub sfd_ratio: f64,
    /// Exclusion radius around accepted paths; `None` means `os` samples.
    pub cancellation_len: Option<usize>,
    pub max_paths: usize,
    /// Path search extends this many symbols past the gate start.
    pub search_symbols: usize,
    pub mode: CombineMode,
    pub llr_scaling: LlrScaling,
    /// Cap on `max - min` of each decoder input vector.
    pub llr_cap: Option<f64>,
    /// Keep per-path spectra in the output.
    pub keep_per_path: bool,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        ReceiverConfig {
            energy_factor: 1.5,
            path_threshold: 0.35,
            corr_floor: 0.1,
            sfd_ratio: 0.75,
            cancellation_len: None,
            max_paths: 8,
            search_symbols: 2,
            mode: CombineMode::Merge,
            llr_scaling: LlrScaling::Adaptive,
            llr_cap: Some(20.0),
            keep_per_path: false,
        }
    }
}

impl ReceiverConfig {
    pub fn with_mode(mut self, mode: CombineMode) -> Self {
        self.mode = mode;
        self
    }
}

/// Receiver result for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DemodOutput<R> {
    /// Argmax of each combined spectrum.
    pub hard_symbols: Vec<u32>,
    /// Softmax LLRs of each combined spectrum.
    pub llr_vectors: Vec<LlrVector<R>>,
    pub combined: Vec<SymbolSpectrum<R>>,
    /// Indexed `[path][symbol]`, when requested.
    pub per_path_spectra: Option<Vec<Vec<SymbolSpectrum<R>>>>,
    pub paths_used: Vec<PathEstimate>,
}

impl<R: Real> DemodOutput<R> {
    /// Decoder inputs under `scaling`, each rescaled so its spread
    /// `max - min` stays within `cap`.
    pub fn soft_inputs(&self, scaling: LlrScaling, cap: Option<f64>) -> Vec<LlrVector<R>> {
        let k = self.paths_used.len();
        self.combined
            .iter()
            .map(|s| {
                let mut l = soft_llr_combined(s, scaling, k);
                if let Some(cap) = cap {
                    cap_spread(&mut l, R::of(cap));
                }
                l
            })
            .collect()
    }
}

fn cap_spread<R: Real>(l: &mut LlrVector<R>, cap: R) {
    let hi = l.llrs.iter().copied().fold(R::neg_infinity(), R::max);
    let lo = l.llrs.iter().copied().fold(R::infinity(), R::min);
    let spread = hi - lo;
    if spread > cap {
        let k = cap / spread;
        for x in &mut l.llrs {
            *x *= k;
        }
    }
}

/// Per-path spectra of `n_payload` symbols, indexed `[path][symbol]`.
pub fn demodulate_paths<R: Real>(
    buf: &IqBuffer<R>,
    paths: &[PathEstimate],
    cfg: &ChirpConfig,
    layout: &FrameLayout,
    n_payload: usize,
) -> Result<Vec<Vec<SymbolSpectrum<R>>>, RxError> {
    let mut d = Dechirper::new(cfg);
    demodulate_with(&mut d, buf, paths, layout, n_payload)
}

fn demodulate_with<R: Real>(
    d: &mut Dechirper<R>,
    buf: &IqBuffer<R>,
    paths: &[PathEstimate],
    layout: &FrameLayout,
    n_payload: usize,
) -> Result<Vec<Vec<SymbolSpectrum<R>>>, RxError> {
    if paths.is_empty() {
        return Err(RxError::NoPaths);
    }
    let l = d.config().samples_per_symbol();
    paths
        .iter()
        .map(|p| {
            let payload_start = p.start_index + layout.n_header() * l;
            let need = payload_start + n_payload * l;
            if need > buf.len() {
                return Err(RxError::Truncated {
                    start: p.start_index,
                    need,
                    len: buf.len(),
                });
            }
            (0..n_payload)
                .map(|i| d.dechirp(&buf.samples, payload_start + i * l))
                .collect()
        })
        .collect()
}

/// Stateful receiver holding FFT plans for repeated frames.
pub struct Receiver<R: Real> {
    cfg: ChirpConfig,
    layout: FrameLayout,
    rcfg: ReceiverConfig,
    dechirper: Dechirper<R>,
    planner: FftPlanner<f64>,
}

impl<R: Real> Receiver<R> {
    pub fn new(cfg: &ChirpConfig, layout: &FrameLayout, rcfg: ReceiverConfig) -> Self {
        Receiver {
            cfg: *cfg,
            layout: *layout,
            rcfg,
            dechirper: Dechirper::new(cfg),
            planner: FftPlanner::new(),
        }
    }

    pub fn config(&self) -> &ReceiverConfig {
        &self.rcfg
    }

    /// Energy gate then path search; the whole buffer is searched when the
    /// gate finds nothing.
    pub fn find_paths(&mut self, buf: &IqBuffer<R>) -> Result<Vec<PathEstimate>, RxError> {
        let window: Option<Range<usize>> = detect_packet(buf, &self.cfg, self.rcfg.energy_factor);
        let found = detect::detect_paths_with(
            &mut self.planner,
            buf,
            window.as_ref(),
            &self.cfg,
            &self.layout,
            &self.rcfg,
        );
        match (found, window) {
            (Err(_), Some(_)) => detect::detect_paths_with(
                &mut self.planner,
                buf,
                None,
                &self.cfg,
                &self.layout,
                &self.rcfg,
            ),
            (r, _) => r,
        }
    }

    /// Full pipeline on a received buffer.
    pub fn receive(&mut self, buf: &IqBuffer<R>) -> Result<DemodOutput<R>, RxError> {
        let paths = self.find_paths(buf)?;
        self.demodulate_at(buf, &paths)
    }

    /// Demodulation with known path starts; `NoMerge` keeps only the first
    /// (strongest) entry.
    pub fn demodulate_at(
        &mut self,
        buf: &IqBuffer<R>,
        paths: &[PathEstimate],
    ) -> Result<DemodOutput<R>, RxError> {
        let used: Vec<PathEstimate> = match self.rcfg.mode {
            CombineMode::Merge => paths.to_vec(),
            CombineMode::NoMerge => paths.iter().take(1).copied().collect(),
        };
        let per_path = demodulate_with(
            &mut self.dechirper,
            buf,
            &used,
            &self.layout,
            self.layout.n_payload,
        )?;
        let n_sym = self.layout.n_payload;
        let mut combined = Vec::with_capacity(n_sym);
        for i in 0..n_sym {
            let column: Vec<SymbolSpectrum<R>> = per_path.iter().map(|p| p[i].clone()).collect();
            combined.push(combine_paths(&column)?);
        }
        let hard_symbols = combined.iter().map(|s| s.argmax() as u32).collect();
        let llr_vectors = combined.iter().map(spectrum_to_llr).collect();
        Ok(DemodOutput {
            hard_symbols,
            llr_vectors,
            combined,
            per_path_spectra: self.rcfg.keep_per_path.then_some(per_path),
            paths_used: used,
        })
    }
}
