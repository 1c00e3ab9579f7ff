//! Tapped-delay multipath channel with calibrated complex AWGN.
//!
//! `y[n] = sum_p h_p x[n - tau_p] + w[n]`; delays are in samples of the
//! input buffer's (oversampled) rate. Integer delays are exact shifts,
//! fractional ones use a 31-tap Hann-windowed sinc. Carrier frequency
//! offset is not modelled.
//!
//! Noise is scaled so that the mean clean output power over the signal
//! support (first to last nonzero clean sample) divided by the noise power
//! equals `snr_db`; noise covers the whole output buffer.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tx::IqBuffer;
use crate::Real;

/// Half-width of the fractional-delay kernel; 31 taps total.
pub const FRAC_DELAY_HALF_TAPS: i64 = 15;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("channel profile has no taps")]
    NoTaps,
    #[error("tap {index}: delay {delay} must be finite, non-negative and not below the previous tap")]
    Delay { index: usize, delay: f64 },
    #[error("tap {index}: gain must be finite")]
    Gain { index: usize },
    #[error("total tap power is zero")]
    ZeroPower,
    #[error("at least one path is required")]
    NoPaths,
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: line {line}, column {column}: {msg}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        msg: String,
    },
}

/// 64-bit seed; identical seed and inputs give bit-identical output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Independent child seed for sub-stream `index` (splitmix64 mixing).
    pub fn derive(self, index: u64) -> RngSeed {
        RngSeed(splitmix64(self.0 ^ splitmix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15))))
    }
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tap {
    pub delay: f64,
    #[serde(with = "gain_serde", flatten)]
    pub gain: Complex<f64>,
}

mod gain_serde {
    use num_complex::Complex;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Parts {
        gain_re: f64,
        gain_im: f64,
    }

    pub fn serialize<S: Serializer>(g: &Complex<f64>, s: S) -> Result<S::Ok, S::Error> {
        Parts {
            gain_re: g.re,
            gain_im: g.im,
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex<f64>, D::Error> {
        let p = Parts::deserialize(d)?;
        Ok(Complex::new(p.gain_re, p.gain_im))
    }
}

impl Tap {
    pub fn new(delay: f64, gain: Complex<f64>) -> Self {
        Tap { delay, gain }
    }
}

/// Multipath taps plus the target SNR; `snr_db = None` means noiseless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelProfile {
    pub taps: Vec<Tap>,
    pub snr_db: Option<f64>,
}

impl ChannelProfile {
    pub fn identity() -> Self {
        ChannelProfile {
            taps: vec![Tap::new(0.0, Complex::new(1.0, 0.0))],
            snr_db: None,
        }
    }

    pub fn with_snr(mut self, snr_db: Option<f64>) -> Self {
        self.snr_db = snr_db.filter(|s| s.is_finite());
        self
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.taps.is_empty() {
            return Err(ChannelError::NoTaps);
        }
        let mut prev = 0.0;
        for (index, t) in self.taps.iter().enumerate() {
            if !t.delay.is_finite() || t.delay < prev {
                return Err(ChannelError::Delay {
                    index,
                    delay: t.delay,
                });
            }
            if !(t.gain.re.is_finite() && t.gain.im.is_finite()) {
                return Err(ChannelError::Gain { index });
            }
            prev = t.delay;
        }
        if self.total_power() <= 0.0 {
            return Err(ChannelError::ZeroPower);
        }
        Ok(())
    }

    pub fn total_power(&self) -> f64 {
        self.taps.iter().map(|t| t.gain.norm_sqr()).sum()
    }

    pub fn max_delay(&self) -> f64 {
        self.taps.iter().map(|t| t.delay).fold(0.0, f64::max)
    }

    /// Taps whose amplitude is at least `rel` of the strongest tap.
    pub fn strong_taps(&self, rel: f64) -> usize {
        let peak = self.taps.iter().map(|t| t.gain.norm()).fold(0.0, f64::max);
        self.taps.iter().filter(|t| t.gain.norm() >= rel * peak).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serializes")
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self, ChannelError> {
        let p: ChannelProfile = serde_json::from_str(text).map_err(|e| ChannelError::Parse {
            path: origin.to_string(),
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        })?;
        p.validate().map_err(|e| ChannelError::Parse {
            path: origin.to_string(),
            line: 0,
            column: 0,
            msg: e.to_string(),
        })?;
        Ok(p)
    }
}

pub fn load_profile(path: &Path) -> Result<ChannelProfile, ChannelError> {
    let text = fs::read_to_string(path).map_err(|source| ChannelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ChannelProfile::from_json(&text, &path.display().to_string())
}

pub fn save_profile(profile: &ChannelProfile, path: &Path) -> Result<(), ChannelError> {
    fs::write(path, profile.to_json() + "\n").map_err(|source| ChannelError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Amplitude law for the secondary paths of [`random_profile_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GainModel {
    /// Amplitude uniform in `[min, max]`.
    Uniform { min: f64, max: f64 },
    /// Unit amplitude.
    Unit,
}

impl Default for GainModel {
    fn default() -> Self {
        GainModel::Uniform { min: 0.3, max: 1.0 }
    }
}

/// Random profile: a unit tap at delay 0 plus `n_paths - 1` taps with
/// integer delays uniform in `1..=max_delay_samples`, uniform phase and
/// amplitudes in `[0.3, 1.0]`.
pub fn random_profile(n_paths: usize, max_delay_samples: usize, seed: RngSeed) -> ChannelProfile {
    random_profile_with(n_paths, max_delay_samples, GainModel::default(), seed)
        .expect("n_paths >= 1")
}

pub fn random_profile_with(
    n_paths: usize,
    max_delay_samples: usize,
    model: GainModel,
    seed: RngSeed,
) -> Result<ChannelProfile, ChannelError> {
    if n_paths == 0 {
        return Err(ChannelError::NoPaths);
    }
    let mut rng = seed.rng();
    let mut taps = vec![Tap::new(0.0, Complex::new(1.0, 0.0))];
    for _ in 1..n_paths {
        let delay = rng.gen_range(1..=max_delay_samples.max(1)) as f64;
        let amp = match model {
            GainModel::Uniform { min, max } => rng.gen_range(min..=max),
            GainModel::Unit => 1.0,
        };
        let phase = rng.gen_range(0.0..2.0 * PI);
        taps.push(Tap::new(delay, Complex::from_polar(amp, phase)));
    }
    taps.sort_by(|a, b| a.delay.total_cmp(&b.delay));
    Ok(ChannelProfile { taps, snr_db: None })
}

fn frac_kernel(frac: f64) -> [f64; (2 * FRAC_DELAY_HALF_TAPS + 1) as usize] {
    let mut h = [0.0; (2 * FRAC_DELAY_HALF_TAPS + 1) as usize];
    let half = (FRAC_DELAY_HALF_TAPS + 1) as f64;
    for (i, slot) in h.iter_mut().enumerate() {
        let t = (i as i64 - FRAC_DELAY_HALF_TAPS) as f64 - frac;
        let sinc = if t == 0.0 { 1.0 } else { (PI * t).sin() / (PI * t) };
        let win = if t.abs() < half {
            0.5 * (1.0 + (PI * t / half).cos())
        } else {
            0.0
        };
        *slot = sinc * win;
    }
    h
}

/// Noiseless multipath output; length `len + ceil(max delay)`.
pub fn apply_taps<R: Real>(buf: &IqBuffer<R>, taps: &[Tap]) -> Vec<Complex<f64>> {
    let max_delay = taps.iter().map(|t| t.delay).fold(0.0, f64::max);
    let out_len = buf.len() + max_delay.ceil() as usize;
    let x: Vec<Complex<f64>> = buf
        .samples
        .iter()
        .map(|c| Complex::new(c.re.to_f64_lossy(), c.im.to_f64_lossy()))
        .collect();
    // all taps folded into one FIR over lags [-HALF, ceil(max delay) + HALF]
    let half = FRAC_DELAY_HALF_TAPS;
    let mut fir = vec![Complex::new(0.0, 0.0); out_len - buf.len() + 1 + 2 * half as usize];
    for tap in taps {
        let d_int = tap.delay.floor() as i64;
        let frac = tap.delay - tap.delay.floor();
        if frac == 0.0 {
            fir[(d_int + half) as usize] += tap.gain;
        } else {
            for (i, &hk) in frac_kernel(frac).iter().enumerate() {
                fir[(d_int + i as i64) as usize] += tap.gain * hk;
            }
        }
    }
    let mut y = vec![Complex::new(0.0, 0.0); out_len];
    for (j, &g) in fir.iter().enumerate() {
        if g == Complex::new(0.0, 0.0) {
            continue;
        }
        let lag = j as i64 - half;
        // y[n] += g * x[n - lag] for n in [0, out_len)
        let n0 = lag.max(0) as usize;
        let n1 = (x.len() as i64 + lag).min(out_len as i64);
        for n in n0..n1.max(n0 as i64) as usize {
            y[n] += g * x[(n as i64 - lag) as usize];
        }
    }
    y
}

/// Mean power over the span between the first and last nonzero sample.
pub fn support_power(samples: &[Complex<f64>]) -> f64 {
    let first = samples.iter().position(|c| c.norm_sqr() > 0.0);
    let last = samples.iter().rposition(|c| c.norm_sqr() > 0.0);
    match (first, last) {
        (Some(a), Some(b)) => {
            samples[a..=b].iter().map(|c| c.norm_sqr()).sum::<f64>() / (b - a + 1) as f64
        }
        _ => 0.0,
    }
}

/// Multipath plus AWGN at `profile.snr_db`.
pub fn apply_channel<R: Real>(
    buf: &IqBuffer<R>,
    profile: &ChannelProfile,
    seed: RngSeed,
) -> Result<IqBuffer<R>, ChannelError> {
    profile.validate()?;
    let mut y = apply_taps(buf, &profile.taps);
    if let Some(snr_db) = profile.snr_db.filter(|s| s.is_finite()) {
        add_awgn_at_snr(&mut y, snr_db, seed);
    }
    Ok(IqBuffer::new(
        y.into_iter()
            .map(|c| Complex::new(R::of(c.re), R::of(c.im)))
            .collect(),
        buf.sample_rate_hz,
    ))
}

/// AWGN at `snr_db` relative to the [`support_power`] of `samples`.
pub fn add_awgn_at_snr(samples: &mut [Complex<f64>], snr_db: f64, seed: RngSeed) {
    let noise_power = support_power(samples) / 10f64.powf(snr_db / 10.0);
    add_awgn(samples, noise_power, seed);
}

/// Complex circular Gaussian noise of total variance `noise_power` per sample.
pub fn add_awgn(samples: &mut [Complex<f64>], noise_power: f64, seed: RngSeed) {
    if noise_power <= 0.0 {
        return;
    }
    let sigma = (noise_power / 2.0).sqrt();
    let mut rng = seed.rng();
    for s in samples {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *s += Complex::new(re * sigma, im * sigma);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tx::{modulate_frame, ChirpConfig, FrameLayout};

    fn random_buf(len: usize, seed: u64) -> IqBuffer<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        IqBuffer::new(
            (0..len)
                .map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
            12_000.0,
        )
    }

    /// Dense convolution with the equivalent impulse response.
    fn dense_convolve(x: &[Complex<f64>], taps: &[Tap]) -> Vec<Complex<f64>> {
        let max_d = taps.iter().map(|t| t.delay as usize).max().unwrap();
        let mut h = vec![Complex::new(0.0, 0.0); max_d + 1];
        for t in taps {
            h[t.delay as usize] += t.gain;
        }
        let mut y = vec![Complex::new(0.0, 0.0); x.len() + max_d];
        for (n, out) in y.iter_mut().enumerate() {
            for (k, hk) in h.iter().enumerate() {
                if n >= k && n - k < x.len() {
                    *out += hk * x[n - k];
                }
            }
        }
        y
    }

    #[test]
    fn identity_channel_is_exact() {
        let x = random_buf(1000, 1);
        let y = apply_channel(&x, &ChannelProfile::identity(), RngSeed(9)).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn integer_delay_is_a_shift() {
        let x = random_buf(700, 2);
        let p = ChannelProfile {
            taps: vec![Tap::new(45.0, Complex::new(1.0, 0.0))],
            snr_db: None,
        };
        let y = apply_channel(&x, &p, RngSeed(0)).unwrap();
        assert_eq!(y.len(), 745);
        assert!(y.samples[..45].iter().all(|c| c.norm() == 0.0));
        assert_eq!(&y.samples[45..], &x.samples[..]);
    }

    #[test]
    fn sparse_taps_match_dense_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..10 {
            let x = random_buf(300, 100 + trial);
            let mut p = random_profile(rng.gen_range(1..6), 80, RngSeed(trial));
            p.snr_db = None;
            let y = apply_channel(&x, &p, RngSeed(0)).unwrap();
            let want = dense_convolve(&x.samples, &p.taps);
            let scale: f64 = want.iter().map(|c| c.norm()).fold(0.0, f64::max);
            for (a, b) in y.samples.iter().zip(&want) {
                assert!((a - b).norm() <= 1e-6 * scale);
            }
        }
    }

    #[test]
    fn two_equal_taps_superpose() {
        let cfg = ChirpConfig::default();
        let x = modulate_frame::<f64>(&cfg, &FrameLayout::with_payload(2), &[10, 200]).unwrap();
        let theta = 0.7f64;
        let p = ChannelProfile {
            taps: vec![
                Tap::new(0.0, Complex::new(1.0, 0.0)),
                Tap::new(45.0, Complex::from_polar(1.0, theta)),
            ],
            snr_db: None,
        };
        let y = apply_channel(&x, &p, RngSeed(0)).unwrap();
        let want = dense_convolve(&x.samples, &p.taps);
        for (a, b) in y.samples.iter().zip(&want) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn fractional_delay_matches_windowed_sinc_oracle() {
        let x = random_buf(200, 4);
        let d = 12.37;
        let p = ChannelProfile {
            taps: vec![Tap::new(d, Complex::new(0.5, -0.2))],
            snr_db: None,
        };
        let y = apply_channel(&x, &p, RngSeed(0)).unwrap();
        assert_eq!(y.len(), 213);
        for (n, out) in y.samples.iter().enumerate() {
            let mut want = Complex::new(0.0, 0.0);
            for (m, xm) in x.samples.iter().enumerate() {
                let j = n as i64 - m as i64 - d.floor() as i64;
                let t = n as f64 - d - m as f64;
                if j.abs() <= 15 {
                    let sinc = if t == 0.0 { 1.0 } else { (PI * t).sin() / (PI * t) };
                    let w = (PI * t / 32.0).cos().powi(2);
                    want += xm * sinc * w;
                }
            }
            want *= Complex::new(0.5, -0.2);
            assert!((out - want).norm() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn fractional_delay_of_band_limited_tone() {
        // a slow tone delayed by 3.5 samples matches the analytically delayed tone
        let f = 0.05;
        let x = IqBuffer::<f64>::new(
            (0..400)
                .map(|n| Complex::from_polar(1.0, 2.0 * PI * f * n as f64))
                .collect(),
            1.0,
        );
        let p = ChannelProfile {
            taps: vec![Tap::new(3.5, Complex::new(1.0, 0.0))],
            snr_db: None,
        };
        let y = apply_channel(&x, &p, RngSeed(0)).unwrap();
        for n in 40..360 {
            let want = Complex::from_polar(1.0, 2.0 * PI * f * (n as f64 - 3.5));
            assert!((y.samples[n] - want).norm() < 2e-3);
        }
    }

    #[test]
    fn measured_snr_matches_target() {
        let cfg = ChirpConfig::default();
        let x = modulate_frame::<f64>(&cfg, &FrameLayout::with_payload(4), &[1, 2, 3, 4]).unwrap();
        let mut p = random_profile(3, 100, RngSeed(5));
        let clean = apply_taps(&x, &p.taps);
        let ps = support_power(&clean);
        for target in [-10.0, 0.0, 7.5] {
            p.snr_db = Some(target);
            let mut acc = 0.0;
            let trials = 100;
            for t in 0..trials {
                let y = apply_channel(&x, &p, RngSeed(1000 + t)).unwrap();
                let pn: f64 = y
                    .samples
                    .iter()
                    .zip(&clean)
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>()
                    / clean.len() as f64;
                acc += pn;
            }
            let snr = 10.0 * (ps / (acc / trials as f64)).log10();
            assert!((snr - target).abs() < 0.3, "target {target} measured {snr}");
        }
    }

    #[test]
    fn seeded_noise_is_deterministic() {
        let x = random_buf(256, 6);
        let p = ChannelProfile::identity().with_snr(Some(3.0));
        let a = apply_channel(&x, &p, RngSeed(77)).unwrap();
        let b = apply_channel(&x, &p, RngSeed(77)).unwrap();
        let c = apply_channel(&x, &p, RngSeed(78)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn random_profile_contract() {
        let p = random_profile(1, 512, RngSeed(1));
        assert_eq!(p, ChannelProfile::identity());

        let p = random_profile(4, 512, RngSeed(2));
        assert_eq!(p.taps.len(), 4);
        assert_eq!(p.taps[0].delay, 0.0);
        assert_eq!(p.taps[0].gain, Complex::new(1.0, 0.0));
        for t in &p.taps[1..] {
            assert!(t.delay >= 1.0 && t.delay <= 512.0 && t.delay.fract() == 0.0);
            assert!((0.3..=1.0).contains(&t.gain.norm()));
        }
        p.validate().unwrap();
        assert_eq!(p, random_profile(4, 512, RngSeed(2)));
        assert!(random_profile_with(0, 10, GainModel::Unit, RngSeed(1)).is_err());
    }

    #[test]
    fn profile_json_round_trip() {
        let dir = std::env::temp_dir().join(format!("uwchirp-profile-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("p.json");
        let p = random_profile(5, 300, RngSeed(11)).with_snr(Some(-4.0));
        save_profile(&p, &path).unwrap();
        assert_eq!(load_profile(&path).unwrap(), p);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("gain_re") && text.contains("delay"));
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn rejects_invalid_profiles() {
        let err = ChannelProfile::from_json(r#"{"taps": [], "snr_db": 3.0}"#, "mem").unwrap_err();
        assert!(matches!(err, ChannelError::Parse { .. }), "{err}");
        let err = ChannelProfile::from_json("{\n  \"taps\": [ {\"delay\": 1.0} ]\n}", "mem")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 2"), "{err}");
        let p = ChannelProfile {
            taps: vec![],
            snr_db: None,
        };
        assert!(matches!(
            apply_channel(&random_buf(4, 0), &p, RngSeed(0)),
            Err(ChannelError::NoTaps)
        ));
        let p = ChannelProfile {
            taps: vec![
                Tap::new(5.0, Complex::new(1.0, 0.0)),
                Tap::new(2.0, Complex::new(1.0, 0.0)),
            ],
            snr_db: None,
        };
        assert!(matches!(p.validate(), Err(ChannelError::Delay { index: 1, .. })));
    }

    #[test]
    fn dominant_late_tap_is_usable() {
        let p = ChannelProfile::from_json(
            r#"{"taps": [
                {"delay": 0.0, "gain_re": 0.4, "gain_im": 0.0},
                {"delay": 17.0, "gain_re": 0.0, "gain_im": 1.0},
                {"delay": 60.0, "gain_re": -0.5, "gain_im": 0.3}
            ], "snr_db": 5.0}"#,
            "mem",
        )
        .unwrap();
        let y = apply_channel(&random_buf(64, 1), &p, RngSeed(3)).unwrap();
        assert_eq!(y.len(), 124);
        assert_eq!(p.strong_taps(0.3), 3);
    }
}
