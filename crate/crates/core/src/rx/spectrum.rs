//! Dechirp spectra, path combination, soft outputs and peak lists.

use std::io::{self, Write};
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::RxError;
use crate::tx::{base_chirp_of, ChirpConfig, Direction, IqBuffer};
use crate::Real;

/// Amplitude spectrum of one dechirped symbol window, `N` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolSpectrum<R> {
    pub amps: Vec<R>,
}

impl<R: Real> SymbolSpectrum<R> {
    pub fn new(amps: Vec<R>) -> Self {
        SymbolSpectrum { amps }
    }

    pub fn zeros(n: usize) -> Self {
        SymbolSpectrum {
            amps: vec![R::zero(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    /// Index of the largest amplitude; the lowest index wins ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &a) in self.amps.iter().enumerate() {
            if a > self.amps[best] {
                best = i;
            }
        }
        best
    }

    pub fn max(&self) -> R {
        self.amps.iter().copied().fold(R::zero(), R::max)
    }

    pub fn scaled(&self, k: R) -> Self {
        SymbolSpectrum::new(self.amps.iter().map(|&a| a * k).collect())
    }
}

/// Per-symbol log-likelihood ratios against value 0; `llrs[0] == 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrVector<R> {
    pub llrs: Vec<R>,
}

impl<R: Real> LlrVector<R> {
    pub fn zeros(q: usize) -> Self {
        LlrVector {
            llrs: vec![R::zero(); q],
        }
    }

    pub fn len(&self) -> usize {
        self.llrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.llrs.is_empty()
    }

    /// Most likely value, treating bin 0 as LLR 0.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &l) in self.llrs.iter().enumerate() {
            if l > self.llrs[best] {
                best = i;
            }
        }
        best
    }
}

/// Reusable dechirp engine: decimation, conjugate base chirp of the
/// configured kind and an `N`-point FFT.
pub struct Dechirper<R: Real> {
    cfg: ChirpConfig,
    down: Vec<Complex<R>>,
    fft: Arc<dyn Fft<R>>,
    work: Vec<Complex<R>>,
    scratch: Vec<Complex<R>>,
}

impl<R: Real> Dechirper<R> {
    pub fn new(cfg: &ChirpConfig) -> Self {
        let n = cfg.n_bins();
        let full = base_chirp_of::<R>(cfg, cfg.kind, Direction::Down).samples;
        let down = (0..n).map(|k| full[k * cfg.os]).collect();
        let fft = FftPlanner::<R>::new().plan_fft_forward(n);
        let scratch = vec![Complex::new(R::zero(), R::zero()); fft.get_inplace_scratch_len()];
        Dechirper {
            cfg: *cfg,
            down,
            fft,
            work: vec![Complex::new(R::zero(), R::zero()); n],
            scratch,
        }
    }

    pub fn config(&self) -> &ChirpConfig {
        &self.cfg
    }

    pub fn dechirp(&mut self, samples: &[Complex<R>], start: usize) -> Result<SymbolSpectrum<R>, RxError> {
        let l = self.cfg.samples_per_symbol();
        if start + l > samples.len() {
            return Err(RxError::Window {
                start,
                need: l,
                len: samples.len(),
            });
        }
        let os = self.cfg.os;
        for (k, w) in self.work.iter_mut().enumerate() {
            *w = samples[start + k * os] * self.down[k];
        }
        self.fft.process_with_scratch(&mut self.work, &mut self.scratch);
        Ok(SymbolSpectrum::new(self.work.iter().map(|c| c.norm()).collect()))
    }
}

/// One-shot dechirp of the symbol window starting at `start`.
pub fn dechirp_window<R: Real>(
    buf: &IqBuffer<R>,
    start: usize,
    cfg: &ChirpConfig,
) -> Result<SymbolSpectrum<R>, RxError> {
    Dechirper::new(cfg).dechirp(&buf.samples, start)
}

/// Element-wise sum of amplitude spectra.
pub fn combine_paths<R: Real>(spectra: &[SymbolSpectrum<R>]) -> Result<SymbolSpectrum<R>, RxError> {
    let first = spectra.first().ok_or(RxError::NoPaths)?;
    let n = first.len();
    let mut amps = vec![R::zero(); n];
    for s in spectra {
        if s.len() != n {
            return Err(RxError::SpectrumLength { got: s.len(), want: n });
        }
        for (a, &b) in amps.iter_mut().zip(&s.amps) {
            *a += b;
        }
    }
    Ok(SymbolSpectrum::new(amps))
}

/// Min-max normalized amplitudes and their sum; `None` for a flat spectrum.
fn normalized<R: Real>(spec: &SymbolSpectrum<R>) -> Option<(Vec<R>, R)> {
    let lo = spec.amps.iter().copied().fold(R::infinity(), R::min);
    let hi = spec.amps.iter().copied().fold(R::neg_infinity(), R::max);
    if !(hi > lo) {
        return None;
    }
    let span = hi - lo;
    let amp_n: Vec<R> = spec.amps.iter().map(|&a| (a - lo) / span).collect();
    let sum = amp_n.iter().copied().sum();
    Some((amp_n, sum))
}

/// Softmax LLR: `llr[j] = (amp_n(j) - amp_n(0)) / sum_k amp_n(k)` with
/// min-max normalized amplitudes `amp_n`.
pub fn spectrum_to_llr<R: Real>(spec: &SymbolSpectrum<R>) -> LlrVector<R> {
    match normalized(spec) {
        None => LlrVector::zeros(spec.len()),
        Some((amp_n, sum)) => LlrVector {
            llrs: amp_n.iter().map(|&a| (a - amp_n[0]) / sum).collect(),
        },
    }
}

/// How spectra are turned into decoder inputs.
///
/// The softmax LLR is bounded by `1 / sum amp_n`, which for a 256-bin
/// spectrum is ~100x too flat for belief propagation, so decoders are fed
/// a rescaled version with the same shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LlrScaling {
    /// [`spectrum_to_llr`] unchanged.
    Literal,
    /// `beta * (amp_n(j) - amp_n(0))`.
    Fixed(f64),
    /// `kappa * (amps[j] - amps[0])` with `kappa = 2 A / v`: the large-argument
    /// Rician log-likelihood, with peak amplitude `A` and per-bin noise
    /// variance `v` estimated from the spectrum median. Sums of several
    /// spectra are not Rician and switch to [`LlrScaling::Gaussian`] (see
    /// [`soft_llr_combined`]).
    Adaptive,
    /// `(A - m) / s^2` with median `m` and MAD-based spread `s`: a Gaussian
    /// amplitude model that stays calibrated for summed spectra.
    Gaussian,
}

impl Default for LlrScaling {
    fn default() -> Self {
        LlrScaling::Adaptive
    }
}

impl std::str::FromStr for LlrScaling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "literal" => Ok(LlrScaling::Literal),
            "adaptive" => Ok(LlrScaling::Adaptive),
            "gaussian" => Ok(LlrScaling::Gaussian),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|b| b.is_finite() && *b > 0.0)
                .map(LlrScaling::Fixed)
                .ok_or_else(|| format!("llr scaling '{other}': want literal, adaptive, gaussian or a positive number")),
        }
    }
}

impl std::fmt::Display for LlrScaling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LlrScaling::Literal => f.write_str("literal"),
            LlrScaling::Adaptive => f.write_str("adaptive"),
            LlrScaling::Gaussian => f.write_str("gaussian"),
            LlrScaling::Fixed(b) => write!(f, "{b}"),
        }
    }
}

/// Decoder input LLRs for a spectrum summed over `n_combined` paths.
pub fn soft_llr_combined<R: Real>(spec: &SymbolSpectrum<R>, scaling: LlrScaling, n_combined: usize) -> LlrVector<R> {
    match scaling {
        LlrScaling::Adaptive if n_combined > 1 => soft_llr(spec, LlrScaling::Gaussian),
        other => soft_llr(spec, other),
    }
}

/// Decoder input LLRs for one spectrum.
pub fn soft_llr<R: Real>(spec: &SymbolSpectrum<R>, scaling: LlrScaling) -> LlrVector<R> {
    match scaling {
        LlrScaling::Literal => spectrum_to_llr(spec),
        LlrScaling::Fixed(beta) => match normalized(spec) {
            None => LlrVector::zeros(spec.len()),
            Some((amp_n, _)) => {
                let beta = R::of(beta);
                LlrVector {
                    llrs: amp_n.iter().map(|&a| beta * (a - amp_n[0])).collect(),
                }
            }
        },
        LlrScaling::Gaussian => {
            let mut a: Vec<f64> = spec.amps.iter().map(|a| a.to_f64_lossy()).collect();
            let mid = a.len() / 2;
            a.select_nth_unstable_by(mid, f64::total_cmp);
            let med = a[mid];
            let mut dev: Vec<f64> = a.iter().map(|x| (x - med).abs()).collect();
            dev.select_nth_unstable_by(mid, f64::total_cmp);
            let s = 1.4826 * dev[mid];
            let peak = spec.max().to_f64_lossy();
            if !(s > 0.0) {
                return LlrVector::zeros(spec.len());
            }
            let kappa = R::of((peak - med) / (s * s));
            LlrVector {
                llrs: spec.amps.iter().map(|&a| kappa * (a - spec.amps[0])).collect(),
            }
        }
        LlrScaling::Adaptive => {
            let mut sq: Vec<f64> = spec.amps.iter().map(|a| a.to_f64_lossy().powi(2)).collect();
            let mid = sq.len() / 2;
            sq.select_nth_unstable_by(mid, f64::total_cmp);
            let var = sq[mid] / std::f64::consts::LN_2;
            let peak = spec.max().to_f64_lossy();
            if !(var > 0.0) || !(peak > 0.0) {
                return LlrVector::zeros(spec.len());
            }
            let kappa = R::of(2.0 * peak / var);
            LlrVector {
                llrs: spec.amps.iter().map(|&a| kappa * (a - spec.amps[0])).collect(),
            }
        }
    }
}

/// Peak selection threshold for [`peak_list`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdPolicy {
    /// `mean + k * stddev` of all amplitudes.
    MeanPlusSigma(f64),
    /// Fixed amplitude.
    Absolute(f64),
    /// Fraction of the spectrum maximum.
    RelativeToMax(f64),
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy::MeanPlusSigma(3.0)
    }
}

/// Bins strictly above the threshold, strongest first.
pub fn peak_list<R: Real>(spec: &SymbolSpectrum<R>, policy: ThresholdPolicy) -> Vec<(usize, R)> {
    if spec.is_empty() {
        return Vec::new();
    }
    let vals: Vec<f64> = spec.amps.iter().map(|a| a.to_f64_lossy()).collect();
    let threshold = match policy {
        ThresholdPolicy::MeanPlusSigma(k) => {
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            mean + k * var.sqrt()
        }
        ThresholdPolicy::Absolute(t) => t,
        ThresholdPolicy::RelativeToMax(r) => r * vals.iter().copied().fold(0.0, f64::max),
    };
    let mut peaks: Vec<(usize, R)> = spec
        .amps
        .iter()
        .enumerate()
        .filter(|(i, _)| vals[*i] > threshold)
        .map(|(i, &a)| (i, a))
        .collect();
    peaks.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    peaks
}

/// Writes `symbol_index,path_index,bin,amplitude` rows.
pub fn write_spectra_csv<R: Real, W: Write>(
    mut w: W,
    per_path: &[Vec<SymbolSpectrum<R>>],
) -> io::Result<()> {
    writeln!(w, "symbol_index,path_index,bin,amplitude")?;
    for (p, spectra) in per_path.iter().enumerate() {
        for (i, s) in spectra.iter().enumerate() {
            for (bin, a) in s.amps.iter().enumerate() {
                writeln!(w, "{i},{p},{bin},{:.6e}", a.to_f64_lossy())?;
            }
        }
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tx::{modulate_symbol, ChirpKind};

    fn spectrum(v: &[f64]) -> SymbolSpectrum<f64> {
        SymbolSpectrum::new(v.to_vec())
    }

    #[test]
    fn aligned_dechirp_recovers_every_symbol() {
        for kind in [ChirpKind::Linear, ChirpKind::Quadratic] {
            for os in [1, 2, 4] {
                let cfg = ChirpConfig::new(8, os, kind).unwrap();
                let mut d = Dechirper::<f64>::new(&cfg);
                for s in 0..256 {
                    let x = modulate_symbol::<f64>(&cfg, s).unwrap();
                    let spec = d.dechirp(&x.samples, 0).unwrap();
                    assert_eq!(spec.len(), 256);
                    assert_eq!(spec.argmax(), s as usize, "{kind} os={os}");
                    assert!((spec.max() - 256.0).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn window_overrun_is_an_error() {
        let cfg = ChirpConfig::default();
        let x = modulate_symbol::<f64>(&cfg, 3).unwrap();
        assert!(matches!(
            dechirp_window(&x, 1, &cfg),
            Err(RxError::Window { start: 1, .. })
        ));
    }

    #[test]
    fn combine_single_and_copies() {
        let a = spectrum(&[0.1, 3.0, 0.5, 2.0]);
        assert_eq!(combine_paths(&[a.clone()]).unwrap(), a);
        let c = combine_paths(&[a.clone(), a.clone(), a.clone()]).unwrap();
        assert_eq!(c.argmax(), 1);
        assert!(combine_paths::<f64>(&[]).is_err());
        assert!(combine_paths(&[a, spectrum(&[1.0])]).is_err());
    }

    #[test]
    fn combine_promotes_consistently_second_bin() {
        // true bin 2 is runner-up in both, but the interferers differ
        let a = spectrum(&[0.0, 1.0, 0.8, 0.0, 0.1]);
        let b = spectrum(&[0.1, 0.0, 0.8, 0.0, 1.0]);
        assert_ne!(a.argmax(), 2);
        assert_ne!(b.argmax(), 2);
        assert_eq!(combine_paths(&[a, b]).unwrap().argmax(), 2);
    }

    #[test]
    fn llr_flat_and_one_hot() {
        let flat = spectrum(&[2.0; 16]);
        assert!(spectrum_to_llr(&flat).llrs.iter().all(|&l| l == 0.0));
        let mut v = vec![0.0; 16];
        v[5] = 7.0;
        let llr = spectrum_to_llr(&spectrum(&v));
        assert_eq!(llr.llrs[5], 1.0);
        for (j, &l) in llr.llrs.iter().enumerate() {
            if j != 5 {
                assert_eq!(l, 0.0);
            }
        }
    }

    #[test]
    fn llr_direct_evaluation() {
        let amps = [1.0, 3.0, 2.0, 5.0];
        // amp_n = [0, 0.5, 0.25, 1], sum 1.75
        let want = [0.0, 0.5 / 1.75, 0.25 / 1.75, 1.0 / 1.75];
        let llr = spectrum_to_llr(&spectrum(&amps));
        for (a, b) in llr.llrs.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        // equals ln(Pr(j)/Pr(0)) with Pr(j) = exp(amp_n(j)/sum)
        let pr: Vec<f64> = [0.0, 0.5, 0.25, 1.0].iter().map(|a: &f64| (a / 1.75).exp()).collect();
        for j in 0..4 {
            assert!((llr.llrs[j] - (pr[j] / pr[0]).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn scaled_llrs_keep_the_decision() {
        let amps = [4.0, 1.0, 9.0, 2.0, 3.0, 0.5, 1.5, 2.5];
        for scaling in [LlrScaling::Literal, LlrScaling::Fixed(40.0), LlrScaling::Adaptive] {
            let llr = soft_llr(&spectrum(&amps), scaling);
            assert_eq!(llr.llrs[0], 0.0);
            assert_eq!(llr.argmax(), 2, "{scaling}");
        }
        let lit = spectrum_to_llr(&spectrum(&amps));
        let fixed = soft_llr(&spectrum(&amps), LlrScaling::Fixed(2.0));
        let (_, s) = normalized(&spectrum(&amps)).unwrap();
        for (a, b) in lit.llrs.iter().zip(&fixed.llrs) {
            assert!((a * s * 2.0 - b).abs() < 1e-12);
        }
        assert_eq!("adaptive".parse::<LlrScaling>().unwrap(), LlrScaling::Adaptive);
        assert_eq!("12.5".parse::<LlrScaling>().unwrap(), LlrScaling::Fixed(12.5));
        assert!("-1".parse::<LlrScaling>().is_err());
    }

    #[test]
    fn peak_list_cases() {
        let mut v = vec![0.0; 64];
        v[9] = 1.0;
        assert_eq!(peak_list(&spectrum(&v), ThresholdPolicy::default()), vec![(9, 1.0)]);
        assert!(peak_list(&spectrum(&[0.0; 64]), ThresholdPolicy::default()).is_empty());
        v[20] = 0.9;
        let p = peak_list(&spectrum(&v), ThresholdPolicy::RelativeToMax(0.5));
        assert_eq!(p, vec![(9, 1.0), (20, 0.9)]);
    }

    #[test]
    fn csv_dump_layout() {
        let per_path = vec![vec![spectrum(&[1.0, 2.0])], vec![spectrum(&[3.0, 4.0])]];
        let mut out = Vec::new();
        write_spectra_csv(&mut out, &per_path).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "symbol_index,path_index,bin,amplitude");
        assert_eq!(lines.len(), 5);
        assert!(lines[3].starts_with("0,1,0,3.0"));
    }
}
