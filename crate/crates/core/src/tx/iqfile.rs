//! On-disk sample formats.
//!
//! IQ files carry a 24-byte little-endian header followed by interleaved
//! `f32` (I, Q) pairs:
//!
//! | offset | size | field                       |
//! |--------|------|-----------------------------|
//! | 0      | 4    | magic `b"UWIQ"`             |
//! | 4      | 2    | version (`u16`, currently 1)|
//! | 6      | 1    | spreading factor            |
//! | 7      | 1    | chirp kind (0 lin, 1 quad)  |
//! | 8      | 2    | oversampling (`u16`)        |
//! | 10     | 2    | reserved, zero              |
//! | 12     | 4    | bandwidth in Hz (`u32`)     |
//! | 16     | 8    | sample count (`u64`)        |
//!
//! Passband files are headerless little-endian `f32` mono.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex;
use thiserror::Error;

use super::{ChirpConfig, ChirpKind, IqBuffer};
use crate::Real;

pub const MAGIC: &[u8; 4] = b"UWIQ";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 24;

#[derive(Debug, Error)]
pub enum IqFileError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("bad header: {0}")]
    Header(String),
}

/// Waveform metadata stored in an IQ header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IqHeader {
    pub version: u16,
    pub sf: u8,
    pub kind: ChirpKind,
    pub os: u16,
    pub bw_hz: u32,
    pub n_samples: u64,
}

impl IqHeader {
    pub fn for_config(cfg: &ChirpConfig, n_samples: usize) -> Self {
        IqHeader {
            version: VERSION,
            sf: cfg.sf as u8,
            kind: cfg.kind,
            os: cfg.os as u16,
            bw_hz: cfg.bw_hz.round() as u32,
            n_samples: n_samples as u64,
        }
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(MAGIC);
        b[4..6].copy_from_slice(&self.version.to_le_bytes());
        b[6] = self.sf;
        b[7] = self.kind.code();
        b[8..10].copy_from_slice(&self.os.to_le_bytes());
        b[12..16].copy_from_slice(&self.bw_hz.to_le_bytes());
        b[16..24].copy_from_slice(&self.n_samples.to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, IqFileError> {
        if b.len() < HEADER_LEN {
            return Err(IqFileError::Header(format!(
                "{} bytes, need {HEADER_LEN}",
                b.len()
            )));
        }
        if &b[0..4] != MAGIC {
            return Err(IqFileError::Header(format!("magic {:02x?}, want \"UWIQ\"", &b[0..4])));
        }
        let version = u16::from_le_bytes([b[4], b[5]]);
        if version != VERSION {
            return Err(IqFileError::Header(format!("unsupported version {version}")));
        }
        let kind = ChirpKind::from_code(b[7])
            .ok_or_else(|| IqFileError::Header(format!("unknown chirp kind code {}", b[7])))?;
        let os = u16::from_le_bytes([b[8], b[9]]);
        if os == 0 {
            return Err(IqFileError::Header("oversampling 0".into()));
        }
        Ok(IqHeader {
            version,
            sf: b[6],
            kind,
            os,
            bw_hz: u32::from_le_bytes(b[12..16].try_into().unwrap()),
            n_samples: u64::from_le_bytes(b[16..24].try_into().unwrap()),
        })
    }

    /// Chirp configuration implied by the header (default carrier).
    pub fn chirp_config(&self) -> ChirpConfig {
        ChirpConfig {
            sf: self.sf as u32,
            bw_hz: self.bw_hz as f64,
            os: self.os as usize,
            kind: self.kind,
            ..Default::default()
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> IqFileError + '_ {
    move |source| IqFileError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_iq<R: Real, W: Write>(mut w: W, header: &IqHeader, buf: &IqBuffer<R>) -> io::Result<()> {
    w.write_all(&header.to_bytes())?;
    for c in &buf.samples {
        w.write_all(&(c.re.to_f64_lossy() as f32).to_le_bytes())?;
        w.write_all(&(c.im.to_f64_lossy() as f32).to_le_bytes())?;
    }
    w.flush()
}

pub fn read_iq<R: Real, Rd: Read>(mut r: Rd) -> Result<(IqHeader, IqBuffer<R>), IqFileError> {
    let mut hb = [0u8; HEADER_LEN];
    r.read_exact(&mut hb)
        .map_err(|e| IqFileError::Header(format!("truncated header: {e}")))?;
    let header = IqHeader::from_bytes(&hb)?;
    let mut body = Vec::new();
    r.read_to_end(&mut body)
        .map_err(|e| IqFileError::Header(format!("reading samples: {e}")))?;
    let want = header.n_samples as usize * 8;
    if body.len() != want {
        return Err(IqFileError::Header(format!(
            "header declares {} samples ({want} bytes), file has {} bytes",
            header.n_samples,
            body.len()
        )));
    }
    let samples = body
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes(c[0..4].try_into().unwrap());
            let im = f32::from_le_bytes(c[4..8].try_into().unwrap());
            Complex::new(R::of(re as f64), R::of(im as f64))
        })
        .collect();
    let fs = header.bw_hz as f64 * header.os as f64;
    Ok((header, IqBuffer::new(samples, fs)))
}

pub fn save_iq<R: Real>(path: &Path, header: &IqHeader, buf: &IqBuffer<R>) -> Result<(), IqFileError> {
    let f = File::create(path).map_err(io_err(path))?;
    write_iq(BufWriter::new(f), header, buf).map_err(io_err(path))
}

pub fn load_iq<R: Real>(path: &Path) -> Result<(IqHeader, IqBuffer<R>), IqFileError> {
    let f = File::open(path).map_err(io_err(path))?;
    read_iq(BufReader::new(f))
}

pub fn save_passband<R: Real>(path: &Path, samples: &[R]) -> Result<(), IqFileError> {
    let f = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(f);
    for &s in samples {
        w.write_all(&(s.to_f64_lossy() as f32).to_le_bytes())
            .map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn load_passband<R: Real>(path: &Path) -> Result<Vec<R>, IqFileError> {
    let mut body = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut body))
        .map_err(io_err(path))?;
    if body.len() % 4 != 0 {
        return Err(IqFileError::Header(format!(
            "passband file length {} is not a multiple of 4",
            body.len()
        )));
    }
    Ok(body
        .chunks_exact(4)
        .map(|c| R::of(f32::from_le_bytes(c.try_into().unwrap()) as f64))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_24_bytes() {
        let cfg = ChirpConfig::default();
        let h = IqHeader::for_config(&cfg, 56_320);
        let b = h.to_bytes();
        assert_eq!(&b[0..4], b"UWIQ");
        assert_eq!(b[6], 8);
        assert_eq!(b[7], 1);
        assert_eq!(u16::from_le_bytes([b[8], b[9]]), 2);
        assert_eq!(u32::from_le_bytes(b[12..16].try_into().unwrap()), 6000);
        assert_eq!(u64::from_le_bytes(b[16..24].try_into().unwrap()), 56_320);
        assert_eq!(IqHeader::from_bytes(&b).unwrap(), h);
    }

    #[test]
    fn iq_round_trip_in_memory() {
        let cfg = ChirpConfig::default();
        let buf = crate::tx::modulate_symbol::<f64>(&cfg, 17).unwrap();
        let h = IqHeader::for_config(&cfg, buf.len());
        let mut bytes = Vec::new();
        write_iq(&mut bytes, &h, &buf).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 8 * buf.len());
        let (h2, back) = read_iq::<f64, _>(&bytes[..]).unwrap();
        assert_eq!(h2, h);
        for (a, b) in buf.samples.iter().zip(&back.samples) {
            assert!((a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn malformed_headers() {
        assert!(matches!(
            read_iq::<f64, _>(&b"UWIQ"[..]),
            Err(IqFileError::Header(_))
        ));
        let mut b = IqHeader::for_config(&ChirpConfig::default(), 2).to_bytes().to_vec();
        b[0] = b'X';
        assert!(read_iq::<f64, _>(&b[..]).is_err());
        let mut b = IqHeader::for_config(&ChirpConfig::default(), 2).to_bytes().to_vec();
        b.extend_from_slice(&[0u8; 8]); // only one of two declared samples
        let err = read_iq::<f64, _>(&b[..]).unwrap_err().to_string();
        assert!(err.contains("declares 2 samples"), "{err}");
    }
}
