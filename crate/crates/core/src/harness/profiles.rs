//! Stored pool-like channel profiles.
//!
//! Profiles come from an image-source model of a rectangular pool: every
//! mirror image of the transmitter up to `max_order` reflections in total
//! contributes a path with spherical spreading, per-bounce reflection loss
//! and a random scattering factor. Delays are fractional, quantized to
//! `delay_step` samples, and coincident arrivals are summed.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, LogNormal};

use super::HarnessError;
use crate::channel::{load_profile, save_profile, ChannelProfile, RngSeed, Tap};

pub const N_STORED_PROFILES: usize = 10;
pub const PROFILE_DIR_ENV: &str = "UWCHIRP_PROFILE_DIR";
/// Seed of the shipped profiles under [`PoolGeometry::default`].
pub const STORED_PROFILE_SEED: u64 = 2026;

/// Geometry and acoustics of the emulated pool.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolGeometry {
    /// Length, width, depth in metres.
    pub size_m: [f64; 3],
    /// Transducer depth below the surface.
    pub depth_m: f64,
    pub min_separation_m: f64,
    pub sound_speed_mps: f64,
    pub carrier_hz: f64,
    pub sample_rate_hz: f64,
    /// Pressure-release surface.
    pub surface_coeff: f64,
    /// Walls and floor.
    pub wall_coeff: f64,
    pub max_order: i32,
    /// Delay quantization in baseband samples.
    pub delay_step: f64,
    /// Log-normal sigma of the per-path scattering factor.
    pub scatter_sigma: f64,
    /// Taps below this fraction of the strongest are dropped.
    pub keep_rel: f64,
    pub max_taps: usize,
}

impl Default for PoolGeometry {
    fn default() -> Self {
        PoolGeometry {
            size_m: [4.6, 3.0, 1.5],
            depth_m: 0.5,
            min_separation_m: 3.0,
            sound_speed_mps: 1480.0,
            carrier_hz: 25_000.0,
            sample_rate_hz: 12_000.0,
            surface_coeff: -0.95,
            wall_coeff: 0.85,
            max_order: 8,
            delay_step: 0.25,
            scatter_sigma: 0.4,
            keep_rel: 0.1,
            max_taps: 32,
        }
    }
}

/// Image positions and bounce counts along one axis of length `a`.
fn axis_images(src: f64, a: f64, max_order: i32) -> Vec<(f64, u32, u32)> {
    // (coordinate, low-wall bounces, high-wall bounces)
    let mut out = Vec::new();
    for m in -max_order..=max_order {
        let shift = 2.0 * m as f64 * a;
        out.push((shift + src, m.unsigned_abs(), m.unsigned_abs()));
        let (lo, hi) = if m >= 1 { (m as u32 - 1, m as u32) } else { ((1 - m) as u32, (-m) as u32) };
        out.push((shift - src, lo, hi));
    }
    out
}

/// One random transducer placement and its channel.
pub fn pool_profile(geom: &PoolGeometry, seed: RngSeed) -> ChannelProfile {
    let mut rng = seed.rng();
    let [lx, ly, lz] = geom.size_m;
    let margin = 0.3;
    let (tx, rx) = loop {
        let p = |rng: &mut rand_chacha::ChaCha8Rng| {
            [rng.gen_range(margin..lx - margin), rng.gen_range(margin..ly - margin), geom.depth_m]
        };
        let (a, b) = (p(&mut rng), p(&mut rng));
        let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        if d >= geom.min_separation_m {
            break (a, b);
        }
    };
    let scatter = LogNormal::new(0.0, geom.scatter_sigma).expect("finite sigma");
    let mut arrivals: Vec<(f64, Complex<f64>)> = Vec::new();
    let xs = axis_images(tx[0], lx, geom.max_order);
    let ys = axis_images(tx[1], ly, geom.max_order);
    let zs = axis_images(tx[2], lz, geom.max_order);
    for &(x, xl, xh) in &xs {
        for &(y, yl, yh) in &ys {
            for &(z, surf, floor) in &zs {
                let order = xl + xh + yl + yh + surf + floor;
                if order > geom.max_order as u32 {
                    continue;
                }
                let d = ((x - rx[0]).powi(2) + (y - rx[1]).powi(2) + (z - rx[2]).powi(2)).sqrt();
                let loss = geom.surface_coeff.powi(surf as i32)
                    * geom.wall_coeff.powi((xl + xh + yl + yh + floor) as i32);
                let amp = loss / d * if order == 0 { 1.0 } else { scatter.sample(&mut rng) };
                let tau = d / geom.sound_speed_mps;
                let phase = -2.0 * PI * geom.carrier_hz * tau;
                arrivals.push((tau, Complex::from_polar(amp, phase)));
            }
        }
    }
    let t0 = arrivals.iter().map(|a| a.0).fold(f64::INFINITY, f64::min);
    let mut taps: Vec<Tap> = Vec::new();
    for (tau, g) in arrivals {
        let delay = ((tau - t0) * geom.sample_rate_hz / geom.delay_step).round() * geom.delay_step;
        match taps.iter_mut().find(|t| t.delay == delay) {
            Some(t) => t.gain += g,
            None => taps.push(Tap::new(delay, g)),
        }
    }
    let peak = taps.iter().map(|t| t.gain.norm()).fold(0.0, f64::max);
    taps.retain(|t| t.gain.norm() >= geom.keep_rel * peak);
    taps.sort_by(|a, b| b.gain.norm().total_cmp(&a.gain.norm()));
    taps.truncate(geom.max_taps);
    for t in &mut taps {
        t.gain /= peak;
    }
    taps.sort_by(|a, b| a.delay.total_cmp(&b.delay));
    let first = taps[0].delay;
    for t in &mut taps {
        t.delay -= first;
    }
    ChannelProfile { taps, snr_db: None }
}

fn profile_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("pos{:02}.json", i + 1))
}

/// Writes `pos01.json` … `pos10.json` into `dir`.
pub fn generate_profiles(dir: &Path, geom: &PoolGeometry, seed: RngSeed) -> Result<Vec<ChannelProfile>, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    (0..N_STORED_PROFILES)
        .map(|i| {
            let p = pool_profile(geom, seed.derive(i as u64));
            save_profile(&p, &profile_path(dir, i))?;
            Ok(p)
        })
        .collect()
}

/// `UWCHIRP_PROFILE_DIR` if set, else the profiles shipped with the crate.
pub fn default_profile_dir() -> PathBuf {
    std::env::var_os(PROFILE_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("profiles"))
}

pub fn load_profiles(dir: &Path) -> Result<Vec<ChannelProfile>, HarnessError> {
    (0..N_STORED_PROFILES)
        .map(|i| Ok(load_profile(&profile_path(dir, i))?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_axis_bounce_counts() {
        let im = axis_images(1.0, 4.0, 1);
        // m = 0: direct and the low-wall mirror at -1
        assert!(im.contains(&(1.0, 0, 0)));
        assert!(im.contains(&(-1.0, 1, 0)));
        // m = 1: 2a + src hits both walls once, 2a - src only the high wall
        assert!(im.contains(&(9.0, 1, 1)));
        assert!(im.contains(&(7.0, 0, 1)));
        // m = -1: -2a - src bounces three times
        assert!(im.contains(&(-9.0, 2, 1)));
        assert_eq!(im.len(), 6);
    }

    #[test]
    fn profiles_are_deterministic_and_normalized() {
        let g = PoolGeometry::default();
        let a = pool_profile(&g, RngSeed(5));
        assert_eq!(a, pool_profile(&g, RngSeed(5)));
        a.validate().unwrap();
        assert_eq!(a.taps[0].delay, 0.0);
        let peak = a.taps.iter().map(|t| t.gain.norm()).fold(0.0, f64::max);
        assert!((peak - 1.0).abs() < 1e-12);
        assert!(a.taps.len() > 3 && a.taps.len() <= g.max_taps);
        assert!(a.taps.iter().all(|t| (t.delay / g.delay_step).fract() == 0.0));
    }

    #[test]
    fn shipped_profiles_load() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("profiles");
        let ps = load_profiles(&dir).unwrap();
        assert_eq!(ps.len(), N_STORED_PROFILES);
        // reflections may outweigh the first arrival
        assert!(ps.iter().any(|p| p.taps[0].gain.norm() < 0.999));
        let g = PoolGeometry::default();
        for (i, p) in ps.iter().enumerate() {
            assert_eq!(*p, pool_profile(&g, RngSeed(STORED_PROFILE_SEED).derive(i as u64)), "pos{:02}", i + 1);
        }
    }
}
