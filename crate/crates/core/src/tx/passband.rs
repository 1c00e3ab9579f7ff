//! Real passband conversion for trace interchange.
//!
//! Both directions use exact band-limited (FFT domain) interpolation over
//! the whole buffer, so a round trip is lossless up to floating point error
//! as long as the shifted baseband band stays clear of DC and Nyquist.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex;
use rustfft::FftPlanner;

use super::{ChirpConfig, IqBuffer, TxError};
use crate::Real;

pub const DEFAULT_PASSBAND_RATE_HZ: f64 = 96_000.0;

fn ratio(cfg: &ChirpConfig, fs: f64, out_rate_hz: f64) -> Result<usize, TxError> {
    if cfg.carrier_hz < cfg.bw_hz / 2.0 {
        return Err(TxError::Passband(format!(
            "carrier {} Hz below BW/2 = {} Hz",
            cfg.carrier_hz,
            cfg.bw_hz / 2.0
        )));
    }
    if cfg.carrier_hz < fs / 2.0 || cfg.carrier_hz + fs / 2.0 >= out_rate_hz / 2.0 {
        return Err(TxError::Passband(format!(
            "band {}±{} Hz does not fit in (0, {}) Hz",
            cfg.carrier_hz,
            fs / 2.0,
            out_rate_hz / 2.0
        )));
    }
    let r = out_rate_hz / fs;
    if (r - r.round()).abs() > 1e-9 || r < 1.0 {
        return Err(TxError::Passband(format!(
            "output rate {out_rate_hz} Hz is not an integer multiple of {fs} Hz"
        )));
    }
    Ok(r.round() as usize)
}

fn carrier(n: usize, fc: f64, rate: f64) -> Complex<f64> {
    // reduce the phase argument so long buffers keep full precision
    let cycles = (fc * n as f64 / rate).fract();
    Complex::from_polar(1.0, 2.0 * PI * cycles)
}

/// Upconvert to a real passband signal sampled at `out_rate_hz`.
///
/// Output power equals the baseband power (`sqrt(2)` scaling).
pub fn to_passband<R: Real>(
    buf: &IqBuffer<R>,
    cfg: &ChirpConfig,
    out_rate_hz: f64,
) -> Result<Vec<R>, TxError> {
    let r = ratio(cfg, buf.sample_rate_hz, out_rate_hz)?;
    let l = buf.len();
    if l == 0 {
        return Ok(Vec::new());
    }
    let m = l * r;
    let mut planner = FftPlanner::<f64>::new();
    let mut spec: Vec<Complex<f64>> = buf
        .samples
        .iter()
        .map(|c| Complex::new(c.re.to_f64_lossy(), c.im.to_f64_lossy()))
        .collect();
    planner.plan_fft_forward(l).process(&mut spec);

    let mut up = vec![Complex::new(0.0, 0.0); m];
    let half = l / 2;
    for k in 0..l {
        let v = spec[k] / l as f64;
        if l % 2 == 0 && k == half {
            up[half] += v * 0.5;
            up[m - half] += v * 0.5;
        } else if k < (l + 1) / 2 {
            up[k] = v;
        } else {
            up[m - (l - k)] = v;
        }
    }
    planner.plan_fft_inverse(m).process(&mut up);

    Ok(up
        .iter()
        .enumerate()
        .map(|(n, y)| R::of(SQRT_2 * (y * carrier(n, cfg.carrier_hz, out_rate_hz)).re))
        .collect())
}

/// Quadrature downconversion, ideal low-pass and resampling back to
/// `cfg.sample_rate_hz()`.
pub fn from_passband<R: Real>(
    samples: &[R],
    cfg: &ChirpConfig,
    in_rate_hz: f64,
) -> Result<IqBuffer<R>, TxError> {
    let fs = cfg.sample_rate_hz();
    let r = ratio(cfg, fs, in_rate_hz)?;
    let m = samples.len();
    if m % r != 0 {
        return Err(TxError::Passband(format!(
            "{m} passband samples is not a multiple of the rate ratio {r}"
        )));
    }
    let l = m / r;
    if l == 0 {
        return Ok(IqBuffer::new(Vec::new(), fs));
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut z: Vec<Complex<f64>> = samples
        .iter()
        .enumerate()
        .map(|(n, &p)| carrier(n, cfg.carrier_hz, in_rate_hz).conj() * (SQRT_2 * p.to_f64_lossy()))
        .collect();
    planner.plan_fft_forward(m).process(&mut z);

    let scale = 1.0 / m as f64;
    let half = l / 2;
    let mut spec = vec![Complex::new(0.0, 0.0); l];
    for (k, slot) in spec.iter_mut().enumerate() {
        *slot = if l % 2 == 0 && k == half {
            (z[half] + z[m - half]) * scale
        } else if k < (l + 1) / 2 {
            z[k] * scale
        } else {
            z[m - (l - k)] * scale
        };
    }
    planner.plan_fft_inverse(l).process(&mut spec);
    Ok(IqBuffer::new(
        spec.iter().map(|c| Complex::new(R::of(c.re), R::of(c.im))).collect(),
        fs,
    ))
}
