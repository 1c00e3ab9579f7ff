//! Seeded Monte-Carlo experiments and CSV metrics.
//!
//! Every trial draws its randomness from a seed derived from the spec seed,
//! the sweep point and the trial index, so results do not depend on how
//! trials are scheduled across threads. Aggregation only sums integer
//! counts.

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::channel::{ChannelError, GainModel, RngSeed};
use crate::codec::{CodecError, Scheme};
use crate::rx::{CombineMode, ReceiverConfig};
use crate::tx::{ChirpConfig, ChirpKind, TxError};

mod experiments;
pub mod profiles;

pub use experiments::{run_awgn_ber, run_collision, run_experiment, run_multipath, run_multipath_detailed, MultipathReport};
pub use profiles::{
    default_profile_dir, generate_profiles, load_profiles, pool_profile, PoolGeometry, N_STORED_PROFILES,
    PROFILE_DIR_ENV, STORED_PROFILE_SEED,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Tx(#[from] TxError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    Collision,
    AwgnBer,
    Multipath,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Collision => "collision",
            Experiment::AwgnBer => "awgn_ber",
            Experiment::Multipath => "multipath",
        }
    }

    fn tag(self) -> u64 {
        match self {
            Experiment::Collision => 1,
            Experiment::AwgnBer => 2,
            Experiment::Multipath => 3,
        }
    }
}

impl std::str::FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "collision" => Ok(Experiment::Collision),
            "awgn" | "awgn_ber" => Ok(Experiment::AwgnBer),
            "multipath" => Ok(Experiment::Multipath),
            other => Err(format!("unknown experiment '{other}' (collision, awgn, multipath)")),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One sweep definition.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub experiment: Experiment,
    /// Trials per point; packets per profile for `Multipath`.
    pub trials: usize,
    /// `None` entries run noiseless.
    pub snr_list_db: Vec<Option<f64>>,
    pub n_paths_list: Vec<usize>,
    pub kinds: Vec<ChirpKind>,
    pub schemes: Vec<Scheme>,
    pub modes: Vec<CombineMode>,
    pub seed: u64,
    /// Waveform parameters; `kind` is overridden by `kinds`.
    pub chirp: ChirpConfig,
    pub receiver: ReceiverConfig,
    /// Path amplitudes of the collision experiment's random channels.
    pub collision_gain: GainModel,
    /// Parity-check construction seed.
    pub code_seed: u64,
}

impl ExperimentSpec {
    /// Desk-scale defaults for each study.
    pub fn new(experiment: Experiment) -> Self {
        let base = ExperimentSpec {
            experiment,
            trials: 200,
            snr_list_db: vec![None],
            n_paths_list: vec![1],
            kinds: vec![ChirpKind::Quadratic],
            schemes: vec![Scheme::NbLdpc],
            modes: vec![CombineMode::Merge],
            seed: 1,
            chirp: ChirpConfig::default(),
            receiver: ReceiverConfig::default(),
            collision_gain: GainModel::Unit,
            code_seed: 1,
        };
        match experiment {
            Experiment::Collision => ExperimentSpec {
                trials: 2000,
                n_paths_list: vec![1, 2, 3, 4],
                kinds: vec![ChirpKind::Linear, ChirpKind::Quadratic],
                ..base
            },
            Experiment::AwgnBer => ExperimentSpec {
                snr_list_db: [-18.0, -17.5, -17.0, -16.5, -16.0, -15.5, -15.0, -14.5, -14.0, -13.0, -12.0, -10.0].map(Some).to_vec(),
                schemes: vec![Scheme::NbLdpc, Scheme::BinLdpc, Scheme::Hamming48],
                ..base
            },
            Experiment::Multipath => ExperimentSpec {
                trials: 20,
                snr_list_db: [-15.0, -12.5, -10.0, -7.5, -5.0, -2.5, 0.0, 5.0, 10.0].map(Some).to_vec(),
                schemes: vec![Scheme::NbLdpc, Scheme::Hamming48],
                modes: vec![CombineMode::Merge, CombineMode::NoMerge],
                ..base
            },
        }
    }

    /// Full-scale packet counts (100 per position; 1,000
    /// per AWGN point).
    pub fn paper_scale(mut self) -> Self {
        self.trials = match self.experiment {
            Experiment::Collision => 2000,
            Experiment::AwgnBer => 1000,
            Experiment::Multipath => 100,
        };
        self
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Spec(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.snr_list_db.is_empty()
            || self.n_paths_list.is_empty()
            || self.kinds.is_empty()
            || self.schemes.is_empty()
            || self.modes.is_empty()
        {
            return bad("sweep lists must be non-empty");
        }
        if self.snr_list_db.iter().flatten().any(|s| !s.is_finite()) {
            return bad("SNR values must be finite (omit for noiseless)");
        }
        if self.n_paths_list.contains(&0) {
            return bad("path counts must be at least 1");
        }
        self.chirp.validate()?;
        Ok(())
    }

    pub(crate) fn point_seed(&self, parts: &[u64]) -> RngSeed {
        parts
            .iter()
            .fold(RngSeed(self.seed).derive(self.experiment.tag()), |s, &p| s.derive(p))
    }
}

/// Aggregated metrics of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub experiment: Experiment,
    pub kind: ChirpKind,
    /// `None` for uncoded symbol experiments.
    pub scheme: Option<Scheme>,
    /// `None` when demodulation uses a single window aligned to the first
    /// path.
    pub mode: Option<CombineMode>,
    pub n_paths: usize,
    /// `None` means noiseless.
    pub snr_db: Option<f64>,
    pub trials: usize,
    pub ser: f64,
    pub raw_ber: f64,
    pub ber: f64,
    pub per: f64,
    pub throughput_bps: f64,
}

pub const CSV_HEADER: &str =
    "experiment,kind,scheme,mode,n_paths,snr_db,trials,ser,raw_ber,ber,per,throughput_bps";

/// `%.6g`-style rendering.
pub fn format_g6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        trim_zeros(&s).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mant), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

impl MetricsRecord {
    pub fn csv_row(&self) -> String {
        [
            self.experiment.as_str().to_string(),
            self.kind.as_str().to_string(),
            self.scheme.map_or("uncoded", Scheme::as_str).to_string(),
            self.mode.map_or("first_path", CombineMode::as_str).to_string(),
            self.n_paths.to_string(),
            self.snr_db.map_or("inf".to_string(), format_g6),
            self.trials.to_string(),
            format_g6(self.ser),
            format_g6(self.raw_ber),
            format_g6(self.ber),
            format_g6(self.per),
            format_g6(self.throughput_bps),
        ]
        .join(",")
    }

    pub fn from_csv_row(line: &str) -> Result<Self, String> {
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 12 {
            return Err(format!("expected 12 fields, got {}", f.len()));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| format!("'{s}': {e}"));
        Ok(MetricsRecord {
            experiment: f[0].parse()?,
            kind: f[1].parse().map_err(|e| format!("{e}"))?,
            scheme: match f[2] {
                "uncoded" => None,
                s => Some(s.parse()?),
            },
            mode: match f[3] {
                "first_path" => None,
                s => Some(s.parse()?),
            },
            n_paths: f[4].parse().map_err(|e| format!("{e}"))?,
            snr_db: match f[5] {
                "inf" => None,
                s => Some(num(s)?),
            },
            trials: f[6].parse().map_err(|e| format!("{e}"))?,
            ser: num(f[7])?,
            raw_ber: num(f[8])?,
            ber: num(f[9])?,
            per: num(f[10])?,
            throughput_bps: num(f[11])?,
        })
    }
}

pub fn to_csv(records: &[MetricsRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

pub fn emit_csv(records: &[MetricsRecord], path: &Path) -> Result<(), HarnessError> {
    fs::write(path, to_csv(records)).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse_csv(text: &str) -> Result<Vec<MetricsRecord>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == CSV_HEADER => {}
        _ => return Err("missing or unexpected header".into()),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| MetricsRecord::from_csv_row(l).map_err(|e| format!("row {}: {e}", i + 1)))
        .collect()
}

/// Optimal throughput at zero packet loss: info bits over payload airtime.
pub fn max_throughput_bps(cfg: &ChirpConfig, n_info_bits: usize, n_payload: usize) -> f64 {
    n_info_bits as f64 * cfg.bw_hz / (n_payload * cfg.n_bins()) as f64
}

/// Integer error counts, summed across trials.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct Counts {
    pub sym_err: u64,
    pub syms: u64,
    pub raw_bit_err: u64,
    pub raw_bits: u64,
    pub bit_err: u64,
    pub bits: u64,
    pub pkt_err: u64,
    pub pkts: u64,
}

impl std::ops::Add for Counts {
    type Output = Counts;

    fn add(self, o: Counts) -> Counts {
        Counts {
            sym_err: self.sym_err + o.sym_err,
            syms: self.syms + o.syms,
            raw_bit_err: self.raw_bit_err + o.raw_bit_err,
            raw_bits: self.raw_bits + o.raw_bits,
            bit_err: self.bit_err + o.bit_err,
            bits: self.bits + o.bits,
            pkt_err: self.pkt_err + o.pkt_err,
            pkts: self.pkts + o.pkts,
        }
    }
}

fn rate(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Counts {
    pub fn ser(&self) -> f64 {
        rate(self.sym_err, self.syms)
    }
    pub fn raw_ber(&self) -> f64 {
        rate(self.raw_bit_err, self.raw_bits)
    }
    pub fn ber(&self) -> f64 {
        rate(self.bit_err, self.bits)
    }
    pub fn per(&self) -> f64 {
        rate(self.pkt_err, self.pkts)
    }
}

pub(crate) fn bit_errors(a: &[u8], b: &[u8]) -> u64 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u64 + a.len().abs_diff(b.len()) as u64
}
