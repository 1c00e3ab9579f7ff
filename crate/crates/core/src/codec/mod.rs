//! Channel codes mapped onto chirp symbols.
//!
//! * NB-LDPC over GF(2^sf): one code symbol per chirp symbol, decoded by
//!   QSPA or FFT-QSPA from the combined-spectrum LLR vectors.
//! * Binary LDPC: coded bits packed `sf` per chirp symbol, decoded by
//!   sum-product from marginalized bit LLRs.
//! * Extended Hamming(8,4): coded bits packed the same way, hard decisions.
//!
//! Bits map to symbol values directly, most significant bit first.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::RngSeed;
use crate::gfield::{FieldError, FieldSpec, GfElem};
use crate::rx::LlrVector;
use crate::Real;

pub mod binldpc;
pub mod hamming;
pub mod pcm;
pub mod qspa;

pub use binldpc::{symbol_llrs_to_bit_llrs, BinaryDecoder};
pub use hamming::{hamming48_decode, hamming48_encode};
pub use pcm::{build_regular, Entry, ParityCheckMatrix, SystematicEncoder};
pub use qspa::{fft_qspa_decode, qspa_decode, walsh_hadamard, CheckRule, DecodeOutcome, QspaDecoder};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("parity-check matrix: {0}")]
    Matrix(String),
    #[error("parity-check matrix has rank {rank} < {rows}")]
    RankDeficient { rank: usize, rows: usize },
    #[error("no usable code after {attempts} construction attempts")]
    Construction { attempts: u64 },
    #[error("info length {got}, expected {want}")]
    InfoLength { got: usize, want: usize },
    #[error("{len} bits is not a multiple of the {block}-bit block")]
    BlockLength { len: usize, block: usize },
    #[error("alist line {line}: {msg}")]
    Alist { line: usize, msg: String },
    #[error("invalid codec configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    NbLdpc,
    BinLdpc,
    Hamming48,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::NbLdpc => "nb_ldpc",
            Scheme::BinLdpc => "bin_ldpc",
            Scheme::Hamming48 => "hamming48",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "nb_ldpc" | "nbldpc" => Ok(Scheme::NbLdpc),
            "bin_ldpc" | "binldpc" | "ldpc" => Ok(Scheme::BinLdpc),
            "hamming48" | "hamming" => Ok(Scheme::Hamming48),
            other => Err(format!("unknown scheme '{other}' (nb_ldpc, bin_ldpc, hamming48)")),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodecConfig {
    pub scheme: Scheme,
    /// 1/2 for both LDPC codes, 4/8 for Hamming.
    pub rate: Ratio<u32>,
    pub n_info_bits: usize,
    pub max_iters: usize,
    /// Seed for parity-check construction.
    pub seed: u64,
    /// Log-sum-exp instead of max bit marginalization (binary LDPC).
    pub exact_bit_llr: bool,
    pub check_rule: CheckRule,
}

impl Default for CodecConfig {
    fn default() -> Self {
        CodecConfig {
            scheme: Scheme::NbLdpc,
            rate: Ratio::new(1, 2),
            n_info_bits: 400,
            max_iters: 50,
            seed: 1,
            exact_bit_llr: false,
            check_rule: CheckRule::Fft,
        }
    }
}

impl CodecConfig {
    pub fn for_scheme(scheme: Scheme) -> Self {
        let rate = match scheme {
            Scheme::Hamming48 => Ratio::new_raw(4, 8),
            _ => Ratio::new(1, 2),
        };
        CodecConfig {
            scheme,
            rate,
            ..CodecConfig::default()
        }
    }

    pub fn validate(&self, sf: u32) -> Result<(), CodecError> {
        let bad = |m: String| Err(CodecError::Config(m));
        if *self.rate.numer() * 2 != *self.rate.denom() {
            return bad(format!("{} supports rate 1/2 only, got {}", self.scheme, self.rate));
        }
        if self.n_info_bits == 0 {
            return bad("n_info_bits must be positive".into());
        }
        let coded_bits = 2 * self.n_info_bits;
        match self.scheme {
            Scheme::NbLdpc => {
                if self.n_info_bits % sf as usize != 0 {
                    return bad(format!("{} info bits do not fill GF(2^{sf}) symbols", self.n_info_bits));
                }
                if (self.n_info_bits / sf as usize) % 2 != 0 {
                    return bad("the (3,6) code needs an even number of info symbols".into());
                }
            }
            Scheme::BinLdpc | Scheme::Hamming48 => {
                if coded_bits % sf as usize != 0 {
                    return bad(format!("{coded_bits} coded bits do not pack into {sf}-bit symbols"));
                }
                if self.scheme == Scheme::Hamming48 && self.n_info_bits % 4 != 0 {
                    return bad("Hamming(8,4) needs a multiple of 4 info bits".into());
                }
                if self.scheme == Scheme::BinLdpc && self.n_info_bits % 2 != 0 {
                    return bad("the (3,6) code needs an even number of info bits".into());
                }
            }
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        Ok(())
    }

    /// Chirp symbols per codeword.
    pub fn n_coded_symbols(&self, sf: u32) -> usize {
        2 * self.n_info_bits / sf as usize
    }
}

/// `bits` (0/1, MSB first) packed into `width`-bit values.
pub fn bits_to_symbols(bits: &[u8], width: u32) -> Vec<u32> {
    bits.chunks(width as usize)
        .map(|c| c.iter().fold(0u32, |acc, &b| (acc << 1) | (b & 1) as u32))
        .collect()
}

pub fn symbols_to_bits(symbols: &[u32], width: u32) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|&s| (0..width).rev().map(move |b| ((s >> b) & 1) as u8))
        .collect()
}

/// LLR magnitude given to hard decisions fed to soft decoders.
const HARD_LLR: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub info_bits: Vec<u8>,
    /// Parity satisfied (LDPC) or no uncorrectable block (Hamming).
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
enum Inner {
    Nb {
        field: FieldSpec,
        enc: SystematicEncoder,
        dec: QspaDecoder,
    },
    Bin {
        field: FieldSpec,
        enc: SystematicEncoder,
        dec: BinaryDecoder,
    },
    Hamming,
}

/// A constructed code bound to a spreading factor.
#[derive(Debug, Clone)]
pub struct Codec {
    cfg: CodecConfig,
    sf: u32,
    inner: Inner,
}

impl Codec {
    pub fn new(cfg: &CodecConfig, sf: u32) -> Result<Self, CodecError> {
        cfg.validate(sf)?;
        let inner = match cfg.scheme {
            Scheme::NbLdpc => {
                let field = FieldSpec::new(sf)?;
                let k = cfg.n_info_bits / sf as usize;
                let (h, enc) = build_regular(&field, 2 * k, k, 3, RngSeed(cfg.seed))?;
                Inner::Nb {
                    field,
                    enc,
                    dec: QspaDecoder::new(h),
                }
            }
            Scheme::BinLdpc => {
                let field = FieldSpec::new(1)?;
                let k = cfg.n_info_bits;
                let (h, enc) = build_regular(&field, 2 * k, k, 3, RngSeed(cfg.seed))?;
                Inner::Bin {
                    field,
                    enc,
                    dec: BinaryDecoder::new(h),
                }
            }
            Scheme::Hamming48 => Inner::Hamming,
        };
        Ok(Codec {
            cfg: cfg.clone(),
            sf,
            inner,
        })
    }

    pub fn config(&self) -> &CodecConfig {
        &self.cfg
    }

    /// Bits per chirp symbol.
    pub fn sf(&self) -> u32 {
        self.sf
    }

    pub fn scheme(&self) -> Scheme {
        self.cfg.scheme
    }

    pub fn n_info_bits(&self) -> usize {
        self.cfg.n_info_bits
    }

    pub fn n_coded_symbols(&self) -> usize {
        self.cfg.n_coded_symbols(self.sf)
    }

    pub fn parity_check(&self) -> Option<&ParityCheckMatrix> {
        match &self.inner {
            Inner::Nb { dec, .. } => Some(dec.matrix()),
            Inner::Bin { dec, .. } => Some(dec.matrix()),
            Inner::Hamming => None,
        }
    }

    /// Info bits to chirp symbol values.
    pub fn encode(&self, bits: &[u8]) -> Result<Vec<u32>, CodecError> {
        if bits.len() != self.cfg.n_info_bits {
            return Err(CodecError::InfoLength {
                got: bits.len(),
                want: self.cfg.n_info_bits,
            });
        }
        Ok(match &self.inner {
            Inner::Nb { field, enc, .. } => {
                let info: Vec<GfElem> = bits_to_symbols(bits, self.sf).into_iter().map(|v| GfElem(v as u16)).collect();
                enc.encode(field, &info)?.into_iter().map(|g| g.0 as u32).collect()
            }
            Inner::Bin { field, enc, .. } => {
                let info: Vec<GfElem> = bits.iter().map(|&b| GfElem(b as u16)).collect();
                let cw: Vec<u8> = enc.encode(field, &info)?.into_iter().map(|g| g.0 as u8).collect();
                bits_to_symbols(&cw, self.sf)
            }
            Inner::Hamming => bits_to_symbols(&hamming48_encode(bits)?, self.sf),
        })
    }

    /// Decode from per-symbol LLR vectors; Hamming uses their argmax.
    pub fn decode<R: Real>(&self, llrs: &[LlrVector<R>]) -> Result<Decoded, CodecError> {
        let n = self.n_coded_symbols();
        if llrs.len() != n {
            return Err(CodecError::InfoLength { got: llrs.len(), want: n });
        }
        Ok(match &self.inner {
            Inner::Nb { enc, dec, .. } => {
                let out = dec.decode(llrs, self.cfg.check_rule, self.cfg.max_iters);
                let info: Vec<u32> = enc.extract(&out.symbols).into_iter().map(|g| g.0 as u32).collect();
                Decoded {
                    info_bits: symbols_to_bits(&info, self.sf),
                    converged: out.converged,
                    iterations: out.iterations,
                }
            }
            Inner::Bin { enc, dec, .. } => {
                let bit_llr = symbol_llrs_to_bit_llrs(llrs, self.sf, self.cfg.exact_bit_llr);
                let out = dec.decode(&bit_llr, self.cfg.max_iters);
                let cw: Vec<GfElem> = out.bits.iter().map(|&b| GfElem(b as u16)).collect();
                Decoded {
                    info_bits: enc.extract(&cw).into_iter().map(|g| g.0 as u8).collect(),
                    converged: out.converged,
                    iterations: out.iterations,
                }
            }
            Inner::Hamming => {
                let hard: Vec<u32> = llrs.iter().map(|l| l.argmax() as u32).collect();
                self.decode_hard(&hard)?
            }
        })
    }

    /// Hard-decision decoding (Hamming only; LDPC schemes get one-hot LLRs).
    pub fn decode_hard(&self, symbols: &[u32]) -> Result<Decoded, CodecError> {
        match &self.inner {
            Inner::Hamming => {
                let (info_bits, bad) = hamming48_decode(&symbols_to_bits(symbols, self.sf))?;
                Ok(Decoded {
                    info_bits,
                    converged: bad == 0,
                    iterations: 1,
                })
            }
            _ => {
                let q = 1usize << self.sf;
                let llrs: Vec<LlrVector<f64>> = symbols
                    .iter()
                    .map(|&s| {
                        let mut l = vec![0.0; q];
                        l[s as usize] = HARD_LLR;
                        let b = l[0];
                        LlrVector {
                            llrs: l.iter().map(|x| x - b).collect(),
                        }
                    })
                    .collect();
                self.decode(&llrs)
            }
        }
    }
}
