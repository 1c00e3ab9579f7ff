//! Extended Hamming(8,4) block code, hard-decision decoding.
//!
//! Codeword layout: `d1 d2 d3 d4 p1 p2 p3 p0` with
//! `p1 = d1^d2^d4`, `p2 = d1^d3^d4`, `p3 = d2^d3^d4` and `p0` the overall
//! parity of the first seven bits.

use super::CodecError;

/// Syndrome `(p3 p2 p1)` of a flip at each of the first seven positions.
const SYNDROME_OF: [u8; 7] = [0b011, 0b101, 0b110, 0b111, 0b001, 0b010, 0b100];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockStatus {
    Clean,
    Corrected,
    /// Double error detected; info passed through uncorrected.
    Uncorrectable,
}

pub fn encode_block(d: [u8; 4]) -> [u8; 8] {
    let p1 = d[0] ^ d[1] ^ d[3];
    let p2 = d[0] ^ d[2] ^ d[3];
    let p3 = d[1] ^ d[2] ^ d[3];
    let p0 = d[0] ^ d[1] ^ d[2] ^ d[3] ^ p1 ^ p2 ^ p3;
    [d[0], d[1], d[2], d[3], p1, p2, p3, p0]
}

pub fn decode_block(c: [u8; 8]) -> ([u8; 4], BlockStatus) {
    let s = ((c[6] ^ c[1] ^ c[2] ^ c[3]) << 2) | ((c[5] ^ c[0] ^ c[2] ^ c[3]) << 1) | (c[4] ^ c[0] ^ c[1] ^ c[3]);
    let parity = c.iter().fold(0, |a, &b| a ^ b);
    let mut c = c;
    let status = match (s, parity) {
        (0, 0) => BlockStatus::Clean,
        (0, _) => BlockStatus::Corrected, // p0 itself flipped
        (_, 1) => {
            let pos = SYNDROME_OF.iter().position(|&x| x == s).expect("nonzero syndrome maps to a position");
            c[pos] ^= 1;
            BlockStatus::Corrected
        }
        _ => BlockStatus::Uncorrectable,
    };
    ([c[0], c[1], c[2], c[3]], status)
}

pub fn hamming48_encode(bits: &[u8]) -> Result<Vec<u8>, CodecError> {
    if bits.len() % 4 != 0 {
        return Err(CodecError::BlockLength { len: bits.len(), block: 4 });
    }
    Ok(bits
        .chunks_exact(4)
        .flat_map(|d| encode_block([d[0], d[1], d[2], d[3]]))
        .collect())
}

/// Decoded info bits and the number of blocks flagged uncorrectable.
pub fn hamming48_decode(bits: &[u8]) -> Result<(Vec<u8>, usize), CodecError> {
    if bits.len() % 8 != 0 {
        return Err(CodecError::BlockLength { len: bits.len(), block: 8 });
    }
    let mut out = Vec::with_capacity(bits.len() / 2);
    let mut bad = 0;
    for c in bits.chunks_exact(8) {
        let (d, st) = decode_block(c.try_into().unwrap());
        out.extend_from_slice(&d);
        bad += usize::from(st == BlockStatus::Uncorrectable);
    }
    Ok((out, bad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn info(w: u8) -> [u8; 4] {
        [(w >> 3) & 1, (w >> 2) & 1, (w >> 1) & 1, w & 1]
    }

    #[test]
    fn zero_word() {
        assert_eq!(encode_block([0; 4]), [0; 8]);
    }

    #[test]
    fn syndrome_table_matches_parity_equations() {
        for pos in 0..7 {
            let mut c = [0u8; 8];
            c[pos] = 1;
            let p1 = c[4] ^ c[0] ^ c[1] ^ c[3];
            let p2 = c[5] ^ c[0] ^ c[2] ^ c[3];
            let p3 = c[6] ^ c[1] ^ c[2] ^ c[3];
            assert_eq!(SYNDROME_OF[pos], (p3 << 2) | (p2 << 1) | p1);
        }
    }

    #[test]
    fn minimum_distance_four_and_linear() {
        let words: Vec<[u8; 8]> = (0..16).map(|w| encode_block(info(w))).collect();
        for (i, a) in words.iter().enumerate() {
            for b in &words[i + 1..] {
                let d = a.iter().zip(b).filter(|(x, y)| x != y).count();
                assert!(d >= 4);
                let sum: Vec<u8> = a.iter().zip(b).map(|(x, y)| x ^ y).collect();
                assert!(words.iter().any(|w| w[..] == sum[..]));
            }
        }
    }

    #[test]
    fn every_single_error_is_corrected() {
        for w in 0..16 {
            let c = encode_block(info(w));
            assert_eq!(decode_block(c), (info(w), BlockStatus::Clean));
            for pos in 0..8 {
                let mut r = c;
                r[pos] ^= 1;
                assert_eq!(decode_block(r), (info(w), BlockStatus::Corrected), "w={w} pos={pos}");
            }
        }
    }

    #[test]
    fn every_double_error_is_flagged() {
        for w in 0..16 {
            let c = encode_block(info(w));
            for i in 0..8 {
                for j in i + 1..8 {
                    let mut r = c;
                    r[i] ^= 1;
                    r[j] ^= 1;
                    assert_eq!(decode_block(r).1, BlockStatus::Uncorrectable);
                }
            }
        }
    }

    #[test]
    fn stream_helpers() {
        let bits = [1, 0, 1, 1, 0, 0, 0, 1];
        let cw = hamming48_encode(&bits).unwrap();
        assert_eq!(cw.len(), 16);
        assert_eq!(hamming48_decode(&cw).unwrap(), (bits.to_vec(), 0));
        assert!(hamming48_encode(&[1, 0, 1]).is_err());
        assert!(hamming48_decode(&[0; 7]).is_err());
    }
}
