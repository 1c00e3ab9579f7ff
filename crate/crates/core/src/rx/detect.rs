//! Energy gating and preamble correlation for packet and path detection.

use std::ops::Range;

use num_complex::Complex;
use rustfft::FftPlanner;

use super::{PathEstimate, ReceiverConfig, RxError};
use crate::tx::{base_chirp_of, ChirpConfig, ChirpKind, Direction, FrameLayout, IqBuffer};
use crate::Real;

/// Per-chunk energies over consecutive symbol-length chunks.
fn chunk_energies<R: Real>(buf: &IqBuffer<R>, chunk: usize) -> Vec<f64> {
    buf.samples
        .chunks_exact(chunk)
        .map(|c| c.iter().map(|v| v.norm_sqr().to_f64_lossy()).sum())
        .collect()
}

/// Coarse sample range whose symbol-length chunks carry more than
/// `energy_factor` times the quietest chunk's energy.
///
/// Returns `None` when the buffer is shorter than two chunks or no chunk
/// stands out. The quietest chunk serves as the noise floor, so the buffer
/// needs some signal-free context (the channel pads one symbol each side).
pub fn detect_packet<R: Real>(
    buf: &IqBuffer<R>,
    cfg: &ChirpConfig,
    energy_factor: f64,
) -> Option<Range<usize>> {
    let l = cfg.samples_per_symbol();
    let e = chunk_energies(buf, l);
    if e.len() < 2 {
        return None;
    }
    let floor = e.iter().copied().fold(f64::INFINITY, f64::min);
    let threshold = energy_factor * floor;
    let hot = |x: &f64| *x > threshold && *x > 0.0;
    let first = e.iter().position(hot)?;
    let last = e.iter().rposition(hot)?;
    Some(first * l..((last + 1) * l).min(buf.len()))
}

/// Sliding correlation `c[t] = sum_k x[t + k] conj(tpl[k])` for `t` in
/// `0..n_out`, via one zero-padded FFT.
fn cross_correlate(
    planner: &mut FftPlanner<f64>,
    x: &[Complex<f64>],
    templates: &[&[Complex<f64>]],
    n_out: usize,
) -> Vec<Vec<Complex<f64>>> {
    let l = templates[0].len();
    let size = (n_out + l).next_power_of_two();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut xf = vec![Complex::new(0.0, 0.0); size];
    let used = x.len().min(size);
    xf[..used].copy_from_slice(&x[..used]);
    fwd.process(&mut xf);
    templates
        .iter()
        .map(|tpl| {
            let mut tf = vec![Complex::new(0.0, 0.0); size];
            tf[..l].copy_from_slice(tpl);
            fwd.process(&mut tf);
            for (t, xv) in tf.iter_mut().zip(&xf) {
                *t = xv * t.conj();
            }
            inv.process(&mut tf);
            let scale = 1.0 / size as f64;
            tf.truncate(n_out);
            tf.iter_mut().for_each(|v| *v *= scale);
            tf
        })
        .collect()
}

/// Correlation scores for candidate frame starts.
pub(crate) struct Scores {
    /// First candidate offset.
    pub origin: usize,
    /// Mean normalized preamble correlation per offset.
    pub preamble: Vec<f64>,
    /// Weakest normalized SFD window correlation per offset.
    pub sfd: Vec<f64>,
}

pub(crate) fn correlation_scores<R: Real>(
    planner: &mut FftPlanner<f64>,
    buf: &IqBuffer<R>,
    search: Range<usize>,
    cfg: &ChirpConfig,
    layout: &FrameLayout,
) -> Scores {
    let l = cfg.samples_per_symbol();
    let n_hdr = layout.n_header();
    let n = search.len();
    let span = n + n_hdr * l;
    let x: Vec<Complex<f64>> = buf.samples[search.start..search.start + span]
        .iter()
        .map(|c| Complex::new(c.re.to_f64_lossy(), c.im.to_f64_lossy()))
        .collect();
    let mut prefix = Vec::with_capacity(span + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in &x {
        acc += v.norm_sqr();
        prefix.push(acc);
    }
    let up = base_chirp_of::<f64>(cfg, ChirpKind::Linear, Direction::Up).samples;
    let down = base_chirp_of::<f64>(cfg, ChirpKind::Linear, Direction::Down).samples;
    let n_corr = span - l + 1;
    let corr = cross_correlate(planner, &x, &[&up, &down], n_corr);
    let norm = |t: usize, c: Complex<f64>| {
        let e = prefix[t + l] - prefix[t];
        if e > 0.0 {
            (c.norm() / (e * l as f64).sqrt()).min(1.0)
        } else {
            0.0
        }
    };
    let mut preamble = vec![0.0; n];
    let mut sfd = vec![0.0; n];
    for t in 0..n {
        let mut p = 0.0;
        for i in 0..layout.n_preamble {
            let u = t + i * l;
            p += norm(u, corr[0][u]);
        }
        preamble[t] = p / layout.n_preamble as f64;
        if layout.n_sfd > 0 {
            // weakest window: a one-symbol ghost keeps only one real SFD window
            sfd[t] = (0..layout.n_sfd)
                .map(|j| {
                    let u = t + (layout.n_preamble + j) * l;
                    norm(u, corr[1][u])
                })
                .fold(f64::INFINITY, f64::min);
        }
    }
    Scores {
        origin: search.start,
        preamble,
        sfd,
    }
}

/// Candidate frame starts for the coarse window.
pub(crate) fn search_range<R: Real>(
    buf: &IqBuffer<R>,
    window: Option<&Range<usize>>,
    cfg: &ChirpConfig,
    layout: &FrameLayout,
    rcfg: &ReceiverConfig,
) -> Option<Range<usize>> {
    let l = cfg.samples_per_symbol();
    let frame = layout.frame_samples(cfg);
    if buf.len() < frame {
        return None;
    }
    let last = buf.len() - frame;
    let (lo, hi) = match window {
        Some(w) => (
            w.start.saturating_sub(l),
            w.start + rcfg.search_symbols * l,
        ),
        None => (0, last),
    };
    let hi = hi.min(last);
    (lo <= hi).then(|| lo..hi + 1)
}

/// Path starts from preamble correlation peaks.
///
/// Candidates are local maxima of the mean normalized preamble correlation
/// at or above `rcfg.path_threshold` of the global maximum and
/// `rcfg.corr_floor` absolute, whose every SFD window reaches
/// `rcfg.sfd_ratio` of their preamble score. They are accepted greedily,
/// strongest first, skipping any within the cancellation length of an
/// accepted path.
pub fn detect_paths<R: Real>(
    buf: &IqBuffer<R>,
    window: Option<&Range<usize>>,
    cfg: &ChirpConfig,
    layout: &FrameLayout,
    rcfg: &ReceiverConfig,
) -> Result<Vec<PathEstimate>, RxError> {
    let mut planner = FftPlanner::new();
    detect_paths_with(&mut planner, buf, window, cfg, layout, rcfg)
}

pub(crate) fn detect_paths_with<R: Real>(
    planner: &mut FftPlanner<f64>,
    buf: &IqBuffer<R>,
    window: Option<&Range<usize>>,
    cfg: &ChirpConfig,
    layout: &FrameLayout,
    rcfg: &ReceiverConfig,
) -> Result<Vec<PathEstimate>, RxError> {
    let search = search_range(buf, window, cfg, layout, rcfg)
        .ok_or_else(|| RxError::Detection("buffer shorter than one frame".into()))?;
    let sc = correlation_scores(planner, buf, search, cfg, layout);
    let p = &sc.preamble;
    let global = p.iter().copied().fold(0.0, f64::max);
    let threshold = (rcfg.path_threshold * global).max(rcfg.corr_floor);
    let mut cands: Vec<usize> = (0..p.len())
        .filter(|&t| {
            let left = t == 0 || p[t] >= p[t - 1];
            let right = t + 1 == p.len() || p[t] > p[t + 1];
            left && right && p[t] >= threshold
        })
        .filter(|&t| layout.n_sfd == 0 || sc.sfd[t] >= rcfg.sfd_ratio * p[t])
        .collect();
    cands.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));

    let cancel = rcfg.cancellation_len.unwrap_or(cfg.os);
    let mut paths: Vec<PathEstimate> = Vec::new();
    for t in cands {
        if paths.len() >= rcfg.max_paths {
            break;
        }
        let start = sc.origin + t;
        if paths.iter().all(|q| q.start_index.abs_diff(start) > cancel) {
            paths.push(PathEstimate {
                start_index: start,
                corr_mag: p[t],
            });
        }
    }
    if paths.is_empty() {
        return Err(RxError::Detection(format!(
            "no preamble correlation peak above {threshold:.3} (global max {global:.3})"
        )));
    }
    Ok(paths)
}
