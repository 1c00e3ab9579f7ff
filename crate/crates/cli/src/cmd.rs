use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use serde_json::{json, Value};

use uwchirp::channel::{apply_channel, load_profile, random_profile_with, save_profile, GainModel};
use uwchirp::codec::{bits_to_symbols, symbols_to_bits, CheckRule, Codec};
use uwchirp::harness::{
    default_profile_dir, emit_csv, load_profiles, run_experiment, to_csv, Experiment, ExperimentSpec, HarnessError,
};
use uwchirp::rx::{LlrScaling, Receiver};
use uwchirp::tx::iqfile::{load_iq, save_iq, IqFileError, IqHeader};
use uwchirp::tx::modulate_frame;
use uwchirp::{
    ChannelProfile, ChirpConfig, ChirpKind, CodecConfig, CombineMode, FrameLayout, ReceiverConfig, RngSeed, Scheme,
};

use crate::args::{ChannelArgs, ChirpArgs, CodecArgs, DemodArgs, ExperimentArgs, ModulateArgs, ReceiverArgs};
use crate::CliError;

type Res<T> = Result<T, CliError>;

fn usage(msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(msg.to_string())
}

fn parse_as<T: FromStr>(flag: &str, v: &str) -> Res<T>
where
    T::Err: std::fmt::Display,
{
    v.trim().parse().map_err(|e| usage(format!("--{flag} '{v}': {e}")))
}

fn parse_list<T: FromStr>(flag: &str, v: &str) -> Res<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items: Vec<&str> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(usage(format!("--{flag} must list at least one value")));
    }
    items.into_iter().map(|s| parse_as(flag, s)).collect()
}

/// `inf` / `none` mean noiseless.
fn parse_snr(flag: &str, v: &str) -> Res<Option<f64>> {
    match v.trim().to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "none" => Ok(None),
        s => {
            let x: f64 = parse_as(flag, s)?;
            if x.is_finite() {
                Ok(Some(x))
            } else {
                Err(usage(format!("--{flag} '{v}' is not a finite SNR")))
            }
        }
    }
}

fn parse_gain(flag: &str, v: &str) -> Res<GainModel> {
    match v.trim() {
        "unit" => Ok(GainModel::Unit),
        "uniform" => Ok(GainModel::default()),
        _ => Err(usage(format!("--{flag} '{v}': expected uniform or unit"))),
    }
}

fn chirp_config(a: &ChirpArgs) -> Res<(ChirpConfig, FrameLayout)> {
    let cfg = ChirpConfig {
        sf: a.sf,
        bw_hz: a.bw,
        os: a.os,
        kind: parse_as("kind", &a.kind)?,
        carrier_hz: a.carrier,
    };
    cfg.validate().map_err(usage)?;
    let layout = FrameLayout {
        n_preamble: a.preamble,
        n_sfd: a.sfd,
        n_payload: 0,
    };
    Ok((cfg, layout))
}

fn codec_config(a: &CodecArgs, scheme: Scheme) -> Res<CodecConfig> {
    let check_rule = match a.check_rule.as_str() {
        "fft" => CheckRule::Fft,
        "naive" => CheckRule::Naive,
        other => return Err(usage(format!("--check-rule '{other}': expected fft or naive"))),
    };
    Ok(CodecConfig {
        n_info_bits: a.info_bits,
        max_iters: a.max_iters,
        seed: a.code_seed,
        exact_bit_llr: a.exact_bit_llr,
        check_rule,
        ..CodecConfig::for_scheme(scheme)
    })
}

fn build_codec(a: &CodecArgs, scheme: &str, sf: u32) -> Res<Codec> {
    let scheme: Scheme = parse_as("scheme", scheme)?;
    Codec::new(&codec_config(a, scheme)?, sf).map_err(usage)
}

fn receiver_config(a: &ReceiverArgs, mode: CombineMode) -> Res<ReceiverConfig> {
    let llr_cap = match a.llr_cap.trim() {
        "none" => None,
        v => Some(parse_as::<f64>("llr-cap", v)?),
    };
    Ok(ReceiverConfig {
        energy_factor: a.energy_factor,
        path_threshold: a.path_threshold,
        sfd_ratio: a.sfd_ratio,
        max_paths: a.max_paths,
        cancellation_len: a.cancellation_len,
        mode,
        llr_scaling: parse_as::<LlrScaling>("llr-scaling", &a.llr_scaling)?,
        llr_cap,
        ..ReceiverConfig::default()
    })
}

fn read_bits(path: &Path) -> Res<Vec<u8>> {
    let bytes = std::fs::read(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(bytes.iter().flat_map(|b| (0..8).rev().map(move |i| (b >> i) & 1)).collect())
}

/// Bits packed MSB first; the last byte is zero-padded.
fn write_bits(path: &Path, bits: &[u8]) -> Res<()> {
    let bytes: Vec<u8> = bits
        .chunks(8)
        .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (b << (7 - i))))
        .collect();
    std::fs::write(path, bytes).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Drops the zero padding a byte file adds beyond `want` bits.
fn trim_padding(mut bits: Vec<u8>, want: usize, what: &str) -> Res<Vec<u8>> {
    if bits.len() < want || bits.len() - want >= 8 {
        return Err(usage(format!("{what} has {} bits, expected {want}", bits.len())));
    }
    bits.truncate(want);
    Ok(bits)
}

fn load(path: &Path) -> Res<(IqHeader, uwchirp::IqBuffer64)> {
    load_iq::<f64>(path).map_err(|e| match e {
        IqFileError::Header(msg) => usage(format!("{}: malformed IQ header: {msg}", path.display())),
        other => usage(other),
    })
}

fn save(path: &Path, cfg: &ChirpConfig, buf: &uwchirp::IqBuffer64) -> Res<()> {
    save_iq(path, &IqHeader::for_config(cfg, buf.len()), buf).map_err(usage)
}

pub fn modulate(a: &ModulateArgs) -> Res<Option<Value>> {
    let (cfg, mut layout) = chirp_config(&a.chirp)?;
    let bits = match (&a.payload, a.random) {
        (Some(p), _) => read_bits(p)?,
        (None, Some(n)) => {
            let mut rng = RngSeed(a.common.seed).rng();
            (0..n).map(|_| rng.gen_range(0..2u8)).collect()
        }
        (None, None) => return Err(usage("one of --payload or --random is required")),
    };
    let sf = cfg.sf;
    let (symbols, scheme) = match &a.encode {
        Some(s) => {
            let codec = build_codec(&a.codec, s, sf)?;
            if bits.len() != codec.n_info_bits() {
                return Err(usage(format!(
                    "payload has {} bits, {} needs {} (--info-bits)",
                    bits.len(),
                    codec.scheme(),
                    codec.n_info_bits()
                )));
            }
            (codec.encode(&bits).map_err(usage)?, codec.scheme().to_string())
        }
        None => {
            if bits.is_empty() || bits.len() % sf as usize != 0 {
                return Err(usage(format!("payload has {} bits, not a positive multiple of sf = {sf}", bits.len())));
            }
            (bits_to_symbols(&bits, sf), "uncoded".to_string())
        }
    };
    layout.n_payload = symbols.len();
    let buf = modulate_frame::<f64>(&cfg, &layout, &symbols).map_err(usage)?;
    save(&a.out, &cfg, &buf)?;
    if let Some(p) = &a.bits_out {
        write_bits(p, &bits)?;
    }
    Ok(Some(json!({
        "command": "modulate",
        "out": a.out.display().to_string(),
        "sf": cfg.sf,
        "kind": cfg.kind.as_str(),
        "os": cfg.os,
        "bw_hz": cfg.bw_hz,
        "scheme": scheme,
        "info_bits": bits.len(),
        "payload_symbols": layout.n_payload,
        "frame_symbols": layout.n_symbols(),
        "samples": buf.len(),
        "duration_s": buf.len() as f64 / cfg.sample_rate_hz(),
    })))
}

/// Where `channel` records the realized profile for an output file.
pub fn profile_sidecar(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".profile.json");
    PathBuf::from(s)
}

pub fn channel(a: &ChannelArgs) -> Res<Option<Value>> {
    let (header, buf) = load(&a.input)?;
    let cfg = header.chirp_config();
    let seed = RngSeed(a.common.seed);
    let mut profile = match (&a.profile, a.paths) {
        (Some(p), _) => load_profile(p).map_err(usage)?,
        (None, Some(n)) => {
            let gain = a.gain.as_deref().map(|g| parse_gain("gain", g)).transpose()?.unwrap_or_default();
            let max_delay = a.max_delay.unwrap_or(cfg.samples_per_symbol());
            random_profile_with(n, max_delay, gain, seed.derive(0)).map_err(usage)?
        }
        (None, None) => {
            if a.max_delay.is_some() || a.gain.is_some() {
                return Err(usage("--max-delay and --gain need --paths"));
            }
            ChannelProfile::identity()
        }
    };
    if let Some(s) = &a.snr {
        profile.snr_db = parse_snr("snr", s)?;
    }
    let out = apply_channel(&buf, &profile, seed.derive(1)).map_err(usage)?;
    save(&a.out, &cfg, &out)?;
    let sidecar = profile_sidecar(&a.out);
    save_profile(&profile, &sidecar).map_err(usage)?;
    Ok(Some(json!({
        "command": "channel",
        "out": a.out.display().to_string(),
        "profile": sidecar.display().to_string(),
        "taps": profile.taps.len(),
        "max_delay_samples": profile.max_delay(),
        "snr_db": profile.snr_db,
        "samples": out.len(),
    })))
}

fn count_diff<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

pub fn demod(a: &DemodArgs) -> Res<Option<Value>> {
    let (header, buf) = load(&a.input)?;
    let cfg = header.chirp_config();
    let sf = cfg.sf;
    let codec = a.decode.as_deref().map(|s| build_codec(&a.codec, s, sf)).transpose()?;
    let n_payload = codec.as_ref().map_or(a.symbols.unwrap_or(100), Codec::n_coded_symbols);
    let layout = FrameLayout {
        n_preamble: a.preamble,
        n_sfd: a.sfd,
        n_payload,
    };
    layout.validate().map_err(usage)?;
    let mode: CombineMode = parse_as("mode", &a.mode)?;
    let rcfg = receiver_config(&a.receiver, mode)?;
    let mut rx = Receiver::<f64>::new(&cfg, &layout, rcfg.clone());
    let paths = rx
        .find_paths(&buf)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let out = rx
        .demodulate_at(&buf, &paths)
        .map_err(|e| CliError::Runtime(format!("demodulation failed: {e}")))?;
    let (bits, converged) = match &codec {
        Some(c) => {
            let d = c
                .decode(&out.soft_inputs(rcfg.llr_scaling, rcfg.llr_cap))
                .map_err(|e| CliError::Runtime(format!("decoding failed: {e}")))?;
            (d.info_bits, Some(d.converged))
        }
        None => (symbols_to_bits(&out.hard_symbols, sf), None),
    };
    if let Some(p) = &a.bits_out {
        write_bits(p, &bits)?;
    }
    let mut summary = json!({
        "command": "demod",
        "mode": mode.as_str(),
        "scheme": codec.as_ref().map_or("uncoded".to_string(), |c| c.scheme().to_string()),
        "paths_found": paths.len(),
        "paths_used": out.paths_used.len(),
        "path_starts": out.paths_used.iter().map(|p| p.start_index).collect::<Vec<_>>(),
        "payload_symbols": n_payload,
        "converged": converged,
        "bits": bits.len(),
    });
    if let Some(p) = &a.truth {
        let truth = trim_padding(read_bits(p)?, codec.as_ref().map_or(n_payload * sf as usize, Codec::n_info_bits), "--truth")?;
        let ref_symbols = match &codec {
            Some(c) => c.encode(&truth).map_err(usage)?,
            None => bits_to_symbols(&truth, sf),
        };
        let sym_err = count_diff(&out.hard_symbols, &ref_symbols);
        let raw_err = count_diff(&symbols_to_bits(&out.hard_symbols, sf), &symbols_to_bits(&ref_symbols, sf));
        let bit_err = count_diff(&bits, &truth);
        summary["truth"] = json!({
            "symbol_errors": sym_err,
            "ser": sym_err as f64 / n_payload as f64,
            "raw_ber": raw_err as f64 / (n_payload * sf as usize) as f64,
            "bit_errors": bit_err,
            "ber": bit_err as f64 / truth.len() as f64,
            "packet_error": bit_err > 0,
        });
    }
    Ok(Some(summary))
}

fn harness_err(e: HarnessError) -> CliError {
    match e {
        HarnessError::Spec(_) | HarnessError::Io { .. } => usage(e),
        other => CliError::Runtime(other.to_string()),
    }
}

pub fn experiment(a: &ExperimentArgs) -> Res<Option<Value>> {
    let exp: Experiment = parse_as("exp", &a.exp)?;
    let (cfg, _) = chirp_config(&a.chirp)?;
    let mut spec = ExperimentSpec::new(exp);
    if a.paper_scale {
        spec = spec.paper_scale();
    }
    if let Some(t) = a.trials {
        spec.trials = t;
    }
    spec.seed = a.common.seed;
    spec.code_seed = a.code_seed;
    spec.chirp = cfg;
    spec.receiver = receiver_config(&a.receiver, CombineMode::Merge)?;
    if let Some(v) = &a.snr {
        spec.snr_list_db = v.split(',').map(|s| parse_snr("snr", s)).collect::<Res<_>>()?;
    }
    if let Some(v) = &a.paths {
        spec.n_paths_list = parse_list("paths", v)?;
    }
    if let Some(v) = &a.kinds {
        spec.kinds = parse_list::<ChirpKind>("kinds", v)?;
    }
    if let Some(v) = &a.schemes {
        spec.schemes = parse_list("schemes", v)?;
    }
    if let Some(v) = &a.modes {
        spec.modes = parse_list("modes", v)?;
    }
    if let Some(v) = &a.collision_gain {
        spec.collision_gain = parse_gain("collision-gain", v)?;
    }
    spec.validate().map_err(harness_err)?;
    let profiles = if exp == Experiment::Multipath {
        let dir = a.profiles.clone().unwrap_or_else(default_profile_dir);
        load_profiles(&dir).map_err(harness_err)?
    } else {
        Vec::new()
    };
    let records = run_experiment(&spec, &profiles).map_err(harness_err)?;
    match &a.out {
        Some(p) => {
            emit_csv(&records, p).map_err(harness_err)?;
            Ok(Some(json!({
                "command": "experiment",
                "experiment": exp.as_str(),
                "out": p.display().to_string(),
                "records": records.len(),
                "trials": spec.trials,
                "seed": spec.seed,
            })))
        }
        None => {
            print!("{}", to_csv(&records));
            Ok(None)
        }
    }
}
