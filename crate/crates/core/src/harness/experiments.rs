use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;

use super::{bit_errors, max_throughput_bps, Counts, Experiment, ExperimentSpec, HarnessError, MetricsRecord};
use crate::channel::{add_awgn_at_snr, apply_channel, apply_taps, random_profile_with, ChannelProfile, RngSeed};
use crate::codec::{symbols_to_bits, Codec, CodecConfig, Scheme};
use crate::rx::{CombineMode, Dechirper, PathEstimate, Receiver};
use crate::tx::{ChirpKind, FrameLayout, IqBuffer, SymbolBank};

/// Dispatch on `spec.experiment`; multipath runs over `profiles`.
pub fn run_experiment(
    spec: &ExperimentSpec,
    profiles: &[ChannelProfile],
) -> Result<Vec<MetricsRecord>, HarnessError> {
    match spec.experiment {
        Experiment::Collision => run_collision(spec),
        Experiment::AwgnBer => run_awgn_ber(spec),
        Experiment::Multipath => Ok(run_multipath_detailed(spec, profiles)?.aggregate),
    }
}

fn check(spec: &ExperimentSpec, want: Experiment) -> Result<(), HarnessError> {
    spec.validate()?;
    if spec.experiment != want {
        return Err(HarnessError::Spec(format!(
            "spec is for '{}', runner is '{}'",
            spec.experiment, want
        )));
    }
    Ok(())
}

fn record(
    spec: &ExperimentSpec,
    kind: ChirpKind,
    scheme: Option<Scheme>,
    mode: Option<CombineMode>,
    n_paths: usize,
    snr_db: Option<f64>,
    c: &Counts,
    max_tput: f64,
) -> MetricsRecord {
    MetricsRecord {
        experiment: spec.experiment,
        kind,
        scheme,
        mode,
        n_paths,
        snr_db,
        trials: c.pkts as usize,
        ser: c.ser(),
        raw_ber: c.raw_ber(),
        ber: c.ber(),
        per: c.per(),
        throughput_bps: (1.0 - c.per()) * max_tput,
    }
}

/// Symbol collision probability: previous + target symbol through a random
/// channel with delays within one symbol, window aligned to the first path.
pub fn run_collision(spec: &ExperimentSpec) -> Result<Vec<MetricsRecord>, HarnessError> {
    check(spec, Experiment::Collision)?;
    let mut out = Vec::new();
    for &kind in &spec.kinds {
        let cfg = spec.chirp.with_kind(kind);
        let bank = SymbolBank::<f64>::new(&cfg)?;
        let l = cfg.samples_per_symbol();
        let n = cfg.n_bins() as u32;
        for (si, &snr_db) in spec.snr_list_db.iter().enumerate() {
            for &n_paths in &spec.n_paths_list {
                // kinds share channels and data so their SERs pair up
                let point = spec.point_seed(&[si as u64, n_paths as u64]);
                let counts = (0..spec.trials)
                    .into_par_iter()
                    .map_init(
                        || Dechirper::<f64>::new(&cfg),
                        |dechirper, t| {
                            let seed = point.derive(t as u64);
                            let mut rng = seed.derive(0).rng();
                            let prev = rng.gen_range(0..n);
                            let target = rng.gen_range(0..n);
                            let mut x: Vec<Complex<f64>> = Vec::with_capacity(2 * l);
                            x.extend_from_slice(bank.symbol(prev).expect("in range"));
                            x.extend_from_slice(bank.symbol(target).expect("in range"));
                            let profile = random_profile_with(n_paths, l, spec.collision_gain, seed.derive(1))
                                .expect("n_paths >= 1")
                                .with_snr(snr_db);
                            let y = apply_channel(&IqBuffer::new(x, cfg.sample_rate_hz()), &profile, seed.derive(2))
                                .expect("valid profile");
                            let got = dechirper.dechirp(&y.samples, l).expect("window in range").argmax() as u32;
                            let raw = bit_errors(&symbols_to_bits(&[got], cfg.sf), &symbols_to_bits(&[target], cfg.sf));
                            let err = u64::from(got != target);
                            Counts {
                                sym_err: err,
                                syms: 1,
                                raw_bit_err: raw,
                                raw_bits: cfg.sf as u64,
                                bit_err: raw,
                                bits: cfg.sf as u64,
                                pkt_err: err,
                                pkts: 1,
                            }
                        },
                    )
                    .reduce(Counts::default, |a, b| a + b);
                let tput = cfg.sf as f64 / cfg.symbol_duration_s();
                out.push(record(spec, kind, None, None, n_paths, snr_db, &counts, tput));
            }
        }
    }
    Ok(out)
}

fn build_codecs(spec: &ExperimentSpec) -> Result<Vec<Codec>, HarnessError> {
    spec.schemes
        .iter()
        .map(|&s| {
            let mut c = CodecConfig::for_scheme(s);
            c.seed = spec.code_seed;
            Ok(Codec::new(&c, spec.chirp.sf)?)
        })
        .collect()
}

fn random_bits(n: usize, seed: RngSeed) -> Vec<u8> {
    let mut rng = seed.rng();
    (0..n).map(|_| rng.gen_range(0..2u8)).collect()
}

/// Error counts of one decoded packet.
fn packet_counts(codec: &Codec, info: &[u8], tx: &[u32], hard: &[u32], decoded: &[u8]) -> Counts {
    let w = codec.sf();
    let raw = bit_errors(&symbols_to_bits(hard, w), &symbols_to_bits(tx, w));
    let bit_err = bit_errors(decoded, info);
    Counts {
        sym_err: hard.iter().zip(tx).filter(|(a, b)| a != b).count() as u64,
        syms: tx.len() as u64,
        raw_bit_err: raw,
        raw_bits: (tx.len() * w as usize) as u64,
        bit_err,
        bits: info.len() as u64,
        pkt_err: u64::from(bit_err > 0),
        pkts: 1,
    }
}

/// Whole-packet loss (e.g. detection failure).
fn lost_packet(codec: &Codec) -> Counts {
    let syms = codec.n_coded_symbols() as u64;
    let w = codec.sf() as u64;
    let bits = codec.n_info_bits() as u64;
    // half the bits of an unreceived packet are wrong on average
    Counts {
        sym_err: syms,
        syms,
        raw_bit_err: syms * w / 2,
        raw_bits: syms * w,
        bit_err: bits / 2,
        bits,
        pkt_err: 1,
        pkts: 1,
    }
}

/// Coded BER under AWGN with a single path and ideal timing.
pub fn run_awgn_ber(spec: &ExperimentSpec) -> Result<Vec<MetricsRecord>, HarnessError> {
    check(spec, Experiment::AwgnBer)?;
    let codecs = build_codecs(spec)?;
    let mut out = Vec::new();
    for &kind in &spec.kinds {
        let cfg = spec.chirp.with_kind(kind);
        let bank = SymbolBank::<f64>::new(&cfg)?;
        let l = cfg.samples_per_symbol();
        for codec in &codecs {
            let layout = FrameLayout::with_payload(codec.n_coded_symbols());
            let tput = max_throughput_bps(&cfg, codec.n_info_bits(), layout.n_payload);
            let identity = ChannelProfile::identity();
            for (si, &snr_db) in spec.snr_list_db.iter().enumerate() {
                // schemes share data and noise seeds at each point
                let point = spec.point_seed(&[si as u64]);
                let profile = identity.clone().with_snr(snr_db);
                let rcfg = spec.receiver.clone().with_mode(CombineMode::Merge);
                let counts = (0..spec.trials)
                    .into_par_iter()
                    .map_init(
                        || Receiver::<f64>::new(&cfg, &layout, rcfg.clone()),
                        |rx, t| {
                            let seed = point.derive(t as u64);
                            let info = random_bits(codec.n_info_bits(), seed.derive(0));
                            let tx = codec.encode(&info).expect("info length matches");
                            let frame = bank.frame(&layout, &tx).expect("payload length matches").padded(l, l);
                            let y = apply_channel(&frame, &profile, seed.derive(1)).expect("identity profile");
                            let at = [PathEstimate {
                                start_index: l,
                                corr_mag: 1.0,
                            }];
                            let demod = rx.demodulate_at(&y, &at).expect("frame fits buffer");
                            let dec = codec
                                .decode(&demod.soft_inputs(rcfg.llr_scaling, rcfg.llr_cap))
                                .expect("llr count matches");
                            packet_counts(codec, &info, &tx, &demod.hard_symbols, &dec.info_bits)
                        },
                    )
                    .reduce(Counts::default, |a, b| a + b);
                out.push(record(spec, kind, Some(codec.scheme()), None, 1, snr_db, &counts, tput));
            }
        }
    }
    Ok(out)
}

/// Multipath results: per-point aggregates over all profiles plus the
/// per-profile breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct MultipathReport {
    /// `n_paths` is 0 in aggregate rows.
    pub aggregate: Vec<MetricsRecord>,
    /// `[profile][point]`; `n_paths` is the profile's tap count.
    pub per_profile: Vec<Vec<MetricsRecord>>,
}

/// Full-frame pipeline over stored channel profiles.
pub fn run_multipath(
    spec: &ExperimentSpec,
    profiles: &[ChannelProfile],
) -> Result<Vec<MetricsRecord>, HarnessError> {
    Ok(run_multipath_detailed(spec, profiles)?.aggregate)
}

pub fn run_multipath_detailed(
    spec: &ExperimentSpec,
    profiles: &[ChannelProfile],
) -> Result<MultipathReport, HarnessError> {
    check(spec, Experiment::Multipath)?;
    if profiles.is_empty() {
        return Err(HarnessError::Spec("multipath needs at least one profile".into()));
    }
    for p in profiles {
        p.validate()?;
    }
    let codecs = build_codecs(spec)?;
    let n_snr = spec.snr_list_db.len();
    let n_modes = spec.modes.len();
    let mut aggregate = Vec::new();
    let mut per_profile = vec![Vec::new(); profiles.len()];
    for &kind in &spec.kinds {
        let cfg = spec.chirp.with_kind(kind);
        let bank = SymbolBank::<f64>::new(&cfg)?;
        let l = cfg.samples_per_symbol();
        for codec in &codecs {
            let layout = FrameLayout::with_payload(codec.n_coded_symbols());
            let tput = max_throughput_bps(&cfg, codec.n_info_bits(), layout.n_payload);
            let mut totals = vec![Counts::default(); n_snr * n_modes];
            for (pi, profile) in profiles.iter().enumerate() {
                let point = spec.point_seed(&[pi as u64]);
                // counts indexed [snr][mode]; one clean channel output per packet
                let counts: Vec<Counts> = (0..spec.trials)
                    .into_par_iter()
                    .map_init(
                        || {
                            spec.modes
                                .iter()
                                .map(|&m| Receiver::<f64>::new(&cfg, &layout, spec.receiver.clone().with_mode(m)))
                                .collect::<Vec<_>>()
                        },
                        |rxs, t| {
                            let seed = point.derive(t as u64);
                            let info = random_bits(codec.n_info_bits(), seed.derive(0));
                            let tx = codec.encode(&info).expect("info length matches");
                            let frame = bank.frame(&layout, &tx).expect("payload length matches").padded(l, l);
                            let clean = apply_taps(&frame, &profile.taps);
                            let mut out = Vec::with_capacity(n_snr * n_modes);
                            for (si, snr_db) in spec.snr_list_db.iter().enumerate() {
                                let mut y = clean.clone();
                                if let Some(snr_db) = snr_db {
                                    add_awgn_at_snr(&mut y, *snr_db, seed.derive(1 + si as u64));
                                }
                                let y = IqBuffer::new(y, frame.sample_rate_hz);
                                // detection does not depend on the combining mode
                                let paths = rxs[0].find_paths(&y);
                                for rx in rxs.iter_mut() {
                                    let demod = paths.as_ref().ok().and_then(|p| rx.demodulate_at(&y, p).ok());
                                    out.push(match demod {
                                        Some(d) => {
                                            let dec = codec
                                                .decode(&d.soft_inputs(rx.config().llr_scaling, rx.config().llr_cap))
                                                .expect("llr count matches");
                                            packet_counts(codec, &info, &tx, &d.hard_symbols, &dec.info_bits)
                                        }
                                        None => lost_packet(codec),
                                    });
                                }
                            }
                            out
                        },
                    )
                    .reduce(
                        || vec![Counts::default(); n_snr * n_modes],
                        |a, b| a.into_iter().zip(b).map(|(x, y)| x + y).collect(),
                    );
                for (si, &snr_db) in spec.snr_list_db.iter().enumerate() {
                    for (mi, &mode) in spec.modes.iter().enumerate() {
                        let c = &counts[si * n_modes + mi];
                        totals[si * n_modes + mi] = totals[si * n_modes + mi] + *c;
                        per_profile[pi].push(record(
                            spec,
                            kind,
                            Some(codec.scheme()),
                            Some(mode),
                            profile.taps.len(),
                            snr_db,
                            c,
                            tput,
                        ));
                    }
                }
            }
            for (si, &snr_db) in spec.snr_list_db.iter().enumerate() {
                for (mi, &mode) in spec.modes.iter().enumerate() {
                    let c = &totals[si * n_modes + mi];
                    aggregate.push(record(spec, kind, Some(codec.scheme()), Some(mode), 0, snr_db, c, tput));
                }
            }
        }
    }
    Ok(MultipathReport { aggregate, per_profile })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Tap;

    fn quick(experiment: Experiment) -> ExperimentSpec {
        ExperimentSpec::new(experiment)
    }

    #[test]
    fn single_path_noiseless_collisions_never_happen() {
        let mut s = quick(Experiment::Collision);
        s.trials = 100;
        s.n_paths_list = vec![1];
        let recs = run_collision(&s).unwrap();
        assert_eq!(recs.len(), 2);
        for r in recs {
            assert_eq!(r.ser, 0.0);
            assert_eq!(r.trials, 100);
            assert_eq!(r.scheme, None);
        }
    }

    #[test]
    fn runner_rejects_wrong_spec() {
        assert!(run_collision(&quick(Experiment::AwgnBer)).is_err());
        assert!(run_multipath(&quick(Experiment::Multipath), &[]).is_err());
    }

    #[test]
    fn high_snr_awgn_is_error_free() {
        let mut s = quick(Experiment::AwgnBer);
        s.trials = 4;
        s.snr_list_db = vec![Some(10.0), None];
        for r in run_awgn_ber(&s).unwrap() {
            assert_eq!((r.ser, r.raw_ber, r.ber, r.per), (0.0, 0.0, 0.0, 0.0), "{r:?}");
            assert_eq!(r.throughput_bps, 93.75);
        }
    }

    #[test]
    fn identity_multipath_reaches_full_throughput() {
        let mut s = quick(Experiment::Multipath);
        s.trials = 3;
        s.snr_list_db = vec![Some(10.0)];
        s.schemes = vec![Scheme::NbLdpc];
        let report = run_multipath_detailed(&s, &[ChannelProfile::identity()]).unwrap();
        assert_eq!(report.aggregate.len(), 2);
        for r in &report.aggregate {
            assert_eq!(r.per, 0.0);
            assert_eq!(r.throughput_bps, 93.75);
            assert_eq!(r.n_paths, 0);
        }
        assert_eq!(report.per_profile[0][0].n_paths, 1);
    }

    #[test]
    fn undetectable_packet_counts_as_loss() {
        let mut s = quick(Experiment::Multipath);
        s.trials = 2;
        s.snr_list_db = vec![Some(-40.0)];
        s.schemes = vec![Scheme::Hamming48];
        s.modes = vec![CombineMode::Merge];
        let p = ChannelProfile {
            taps: vec![Tap::new(0.0, Complex::new(1.0, 0.0))],
            snr_db: None,
        };
        let r = &run_multipath(&s, &[p]).unwrap()[0];
        assert_eq!(r.per, 1.0);
        assert_eq!(r.throughput_bps, 0.0);
    }

    #[test]
    fn reruns_are_identical() {
        let mut s = quick(Experiment::Collision);
        s.trials = 50;
        s.n_paths_list = vec![4];
        assert_eq!(run_collision(&s).unwrap(), run_collision(&s).unwrap());
    }
}
