//! Chirp symbol synthesis and frame assembly.
//!
//! Every waveform is produced by midpoint phase accumulation of an
//! instantaneous-frequency trajectory. A data symbol `s` shifts the base
//! trajectory by `s * BW / N` and wraps it back into `[-BW/2, BW/2)`.
//!
//! When the wrap point of a symbol does not fall on the symbol-rate grid
//! (quadratic sweeps at `os > 1`) the wrap is followed by a constant phase
//! step so that every `os`-th sample lines up with the critically sampled
//! symbol. The decimating receiver therefore sees exactly
//! `base[k] * exp(j 2 pi s k / N)` for both chirp kinds.

use std::f64::consts::PI;

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Real;

pub mod iqfile;
pub mod passband;

pub use passband::{from_passband, to_passband, DEFAULT_PASSBAND_RATE_HZ};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TxError {
    #[error("spreading factor {0} outside 6..=10")]
    SpreadingFactor(u32),
    #[error("oversampling factor must be at least 1")]
    Oversampling,
    #[error("bandwidth must be positive and finite, got {0}")]
    Bandwidth(f64),
    #[error("symbol {symbol} outside [0, {n})")]
    Symbol { symbol: u32, n: usize },
    #[error("payload has {got} symbols, layout expects {want}")]
    PayloadLength { got: usize, want: usize },
    #[error("frame layout needs at least 2 preamble chirps, got {0}")]
    Preamble(usize),
    #[error("passband conversion: {0}")]
    Passband(String),
}

/// Frequency sweep family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChirpKind {
    Linear,
    Quadratic,
}

impl ChirpKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ChirpKind::Linear => "linear",
            ChirpKind::Quadratic => "quadratic",
        }
    }

    /// Normalized sweep shape on `u = t / T_s` in `[0, 1)`, in units of BW.
    #[inline]
    fn sweep(self, u: f64) -> f64 {
        match self {
            ChirpKind::Linear => u,
            ChirpKind::Quadratic => u * u,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            ChirpKind::Linear => 0,
            ChirpKind::Quadratic => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ChirpKind::Linear),
            1 => Some(ChirpKind::Quadratic),
            _ => None,
        }
    }
}

impl std::str::FromStr for ChirpKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "linear" | "lin" => Ok(ChirpKind::Linear),
            "quadratic" | "quad" | "nonlinear" => Ok(ChirpKind::Quadratic),
            other => Err(format!("unknown chirp kind '{other}'")),
        }
    }
}

impl std::fmt::Display for ChirpKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
}

/// Waveform parameters shared by every symbol of a link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChirpConfig {
    pub sf: u32,
    pub bw_hz: f64,
    pub os: usize,
    pub kind: ChirpKind,
    /// Passband centre; only used by [`to_passband`].
    pub carrier_hz: f64,
}

impl Default for ChirpConfig {
    fn default() -> Self {
        ChirpConfig {
            sf: 8,
            bw_hz: 6000.0,
            os: 2,
            kind: ChirpKind::Quadratic,
            carrier_hz: 25_000.0,
        }
    }
}

impl ChirpConfig {
    pub fn new(sf: u32, os: usize, kind: ChirpKind) -> Result<Self, TxError> {
        let cfg = ChirpConfig {
            sf,
            os,
            kind,
            ..Default::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_kind(self, kind: ChirpKind) -> Self {
        ChirpConfig { kind, ..self }
    }

    pub fn validate(&self) -> Result<(), TxError> {
        if !(6..=10).contains(&self.sf) {
            return Err(TxError::SpreadingFactor(self.sf));
        }
        if self.os == 0 {
            return Err(TxError::Oversampling);
        }
        if !(self.bw_hz.is_finite() && self.bw_hz > 0.0) {
            return Err(TxError::Bandwidth(self.bw_hz));
        }
        Ok(())
    }

    /// Number of symbol values / FFT bins, `2^sf`.
    #[inline]
    pub fn n_bins(&self) -> usize {
        1 << self.sf
    }

    #[inline]
    pub fn samples_per_symbol(&self) -> usize {
        self.n_bins() * self.os
    }

    #[inline]
    pub fn sample_rate_hz(&self) -> f64 {
        self.bw_hz * self.os as f64
    }

    /// Symbol duration `2^sf / BW` in seconds.
    #[inline]
    pub fn symbol_duration_s(&self) -> f64 {
        self.n_bins() as f64 / self.bw_hz
    }

    /// Wrapped instantaneous frequency (Hz) of symbol `s` at time `t` within
    /// the symbol, `0 <= t < T_s`.
    pub fn instantaneous_frequency(&self, s: u32, t: f64) -> f64 {
        let bw = self.bw_hz;
        let u = t / self.symbol_duration_s();
        let f = bw * self.kind.sweep(u) + s as f64 * bw / self.n_bins() as f64 - bw / 2.0;
        wrap_frequency(f, bw)
    }
}

#[inline]
fn wrap_frequency(f: f64, bw: f64) -> f64 {
    (f + bw / 2.0).rem_euclid(bw) - bw / 2.0
}

/// Complex baseband samples at `sample_rate_hz`.
#[derive(Debug, Clone, PartialEq)]
pub struct IqBuffer<R> {
    pub samples: Vec<Complex<R>>,
    pub sample_rate_hz: f64,
}

impl<R: Real> IqBuffer<R> {
    pub fn new(samples: Vec<Complex<R>>, sample_rate_hz: f64) -> Self {
        IqBuffer {
            samples,
            sample_rate_hz,
        }
    }

    pub fn zeros(len: usize, sample_rate_hz: f64) -> Self {
        Self::new(vec![Complex::new(R::zero(), R::zero()); len], sample_rate_hz)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|c| c.norm_sqr().to_f64_lossy()).sum()
    }

    /// Surround the buffer with `before` and `after` zero samples.
    pub fn padded(&self, before: usize, after: usize) -> Self {
        let zero = Complex::new(R::zero(), R::zero());
        let mut samples = Vec::with_capacity(before + self.len() + after);
        samples.resize(before, zero);
        samples.extend_from_slice(&self.samples);
        samples.resize(before + self.len() + after, zero);
        Self::new(samples, self.sample_rate_hz)
    }

    pub fn extend(&mut self, other: &IqBuffer<R>) {
        self.samples.extend_from_slice(&other.samples);
    }

    pub fn cast<S: Real>(&self) -> IqBuffer<S> {
        IqBuffer::new(
            self.samples
                .iter()
                .map(|c| Complex::new(S::of(c.re.to_f64_lossy()), S::of(c.im.to_f64_lossy())))
                .collect(),
            self.sample_rate_hz,
        )
    }
}

/// Frame structure: linear preamble upchirps, linear SFD downchirps, then
/// payload symbols of the configured kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameLayout {
    pub n_preamble: usize,
    pub n_sfd: usize,
    pub n_payload: usize,
}

impl Default for FrameLayout {
    fn default() -> Self {
        FrameLayout {
            n_preamble: 8,
            n_sfd: 2,
            n_payload: 100,
        }
    }
}

impl FrameLayout {
    pub fn with_payload(n_payload: usize) -> Self {
        FrameLayout {
            n_payload,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), TxError> {
        if self.n_preamble < 2 {
            return Err(TxError::Preamble(self.n_preamble));
        }
        Ok(())
    }

    /// Symbols before the payload.
    #[inline]
    pub fn n_header(&self) -> usize {
        self.n_preamble + self.n_sfd
    }

    #[inline]
    pub fn n_symbols(&self) -> usize {
        self.n_header() + self.n_payload
    }

    pub fn frame_samples(&self, cfg: &ChirpConfig) -> usize {
        self.n_symbols() * cfg.samples_per_symbol()
    }
}

/// Phase trajectory (radians) of symbol `s`, one entry per oversampled sample.
fn symbol_phase(cfg: &ChirpConfig, kind: ChirpKind, s: u32) -> Vec<f64> {
    let n = cfg.n_bins() as f64;
    let os = cfg.os;
    let len = cfg.samples_per_symbol();
    // all frequencies below are in units of BW, time in units of 1/fs
    let dt = 1.0 / os as f64;
    let shift = s as f64 / n;
    let mut phase = Vec::with_capacity(len);
    let mut acc = 0.0f64;
    let mut wrapped = false;
    for k in 0..len {
        phase.push(acc);
        let u_mid = (k as f64 + 0.5) / len as f64;
        let mut f = kind.sweep(u_mid) + shift - 0.5;
        if f >= 0.5 {
            f -= 1.0;
            if !wrapped {
                wrapped = true;
                // realign the symbol-rate grid after the fold
                acc -= 2.0 * PI * (k % os) as f64 / os as f64;
            }
        }
        acc += 2.0 * PI * f * dt;
    }
    phase
}

fn phase_to_iq<R: Real>(phase: &[f64], conj: bool) -> Vec<Complex<R>> {
    let sign = if conj { -1.0 } else { 1.0 };
    phase
        .iter()
        .map(|&p| {
            let p = p.rem_euclid(2.0 * PI);
            Complex::new(R::of(p.cos()), R::of(sign * p.sin()))
        })
        .collect()
}

/// Unshifted chirp of `kind` sweeping `-BW/2 .. BW/2`; the downchirp is its
/// complex conjugate.
pub fn base_chirp_of<R: Real>(cfg: &ChirpConfig, kind: ChirpKind, direction: Direction) -> IqBuffer<R> {
    let phase = symbol_phase(cfg, kind, 0);
    IqBuffer::new(
        phase_to_iq(&phase, direction == Direction::Down),
        cfg.sample_rate_hz(),
    )
}

/// Base chirp of `cfg.kind`.
pub fn base_chirp<R: Real>(cfg: &ChirpConfig, direction: Direction) -> IqBuffer<R> {
    base_chirp_of(cfg, cfg.kind, direction)
}

/// One data symbol of `cfg.kind`.
pub fn modulate_symbol<R: Real>(cfg: &ChirpConfig, s: u32) -> Result<IqBuffer<R>, TxError> {
    let n = cfg.n_bins();
    if s as usize >= n {
        return Err(TxError::Symbol { symbol: s, n });
    }
    let phase = symbol_phase(cfg, cfg.kind, s);
    Ok(IqBuffer::new(phase_to_iq(&phase, false), cfg.sample_rate_hz()))
}

/// Precomputed symbol waveforms for repeated frame synthesis.
#[derive(Debug, Clone)]
pub struct SymbolBank<R> {
    cfg: ChirpConfig,
    up: Vec<Complex<R>>,
    down: Vec<Complex<R>>,
    symbols: Vec<Vec<Complex<R>>>,
}

impl<R: Real> SymbolBank<R> {
    pub fn new(cfg: &ChirpConfig) -> Result<Self, TxError> {
        cfg.validate()?;
        let up = base_chirp_of::<R>(cfg, ChirpKind::Linear, Direction::Up).samples;
        let down = base_chirp_of::<R>(cfg, ChirpKind::Linear, Direction::Down).samples;
        let symbols = (0..cfg.n_bins() as u32)
            .map(|s| phase_to_iq(&symbol_phase(cfg, cfg.kind, s), false))
            .collect();
        Ok(SymbolBank {
            cfg: *cfg,
            up,
            down,
            symbols,
        })
    }

    pub fn config(&self) -> &ChirpConfig {
        &self.cfg
    }

    pub fn symbol(&self, s: u32) -> Result<&[Complex<R>], TxError> {
        self.symbols
            .get(s as usize)
            .map(Vec::as_slice)
            .ok_or(TxError::Symbol {
                symbol: s,
                n: self.cfg.n_bins(),
            })
    }

    pub fn frame(&self, layout: &FrameLayout, payload: &[u32]) -> Result<IqBuffer<R>, TxError> {
        layout.validate()?;
        if payload.len() != layout.n_payload {
            return Err(TxError::PayloadLength {
                got: payload.len(),
                want: layout.n_payload,
            });
        }
        let mut samples = Vec::with_capacity(layout.frame_samples(&self.cfg));
        for _ in 0..layout.n_preamble {
            samples.extend_from_slice(&self.up);
        }
        for _ in 0..layout.n_sfd {
            samples.extend_from_slice(&self.down);
        }
        for &s in payload {
            samples.extend_from_slice(self.symbol(s)?);
        }
        Ok(IqBuffer::new(samples, self.cfg.sample_rate_hz()))
    }
}

/// Preamble and SFD (always linear) followed by `payload` symbols of
/// `cfg.kind`.
pub fn modulate_frame<R: Real>(
    cfg: &ChirpConfig,
    layout: &FrameLayout,
    payload: &[u32],
) -> Result<IqBuffer<R>, TxError> {
    SymbolBank::new(cfg)?.frame(layout, payload)
}
