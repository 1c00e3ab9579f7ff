//! Binary LDPC sum-product decoding (tanh rule) and symbol-to-bit LLR
//! marginalization.

use super::pcm::ParityCheckMatrix;
use crate::rx::LlrVector;
use crate::Real;

/// Bit LLRs are `ln P(b = 0) / P(b = 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BitDecodeOutcome {
    pub bits: Vec<u8>,
    pub converged: bool,
    pub iterations: usize,
}

/// Message clamp keeping `atanh` finite.
const TANH_CLAMP: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone)]
pub struct BinaryDecoder {
    h: ParityCheckMatrix,
    check_edges: Vec<Vec<usize>>,
    var_edges: Vec<Vec<usize>>,
}

impl BinaryDecoder {
    pub fn new(h: ParityCheckMatrix) -> Self {
        assert_eq!(h.field().q(), 2, "binary decoder needs a GF(2) matrix");
        let mut check_edges = Vec::with_capacity(h.n_checks());
        let mut var_edges = vec![Vec::new(); h.n_vars()];
        let mut e = 0;
        for row in h.rows() {
            let mut ids = Vec::with_capacity(row.len());
            for entry in row {
                ids.push(e);
                var_edges[entry.col].push(e);
                e += 1;
            }
            check_edges.push(ids);
        }
        BinaryDecoder {
            h,
            check_edges,
            var_edges,
        }
    }

    pub fn matrix(&self) -> &ParityCheckMatrix {
        &self.h
    }

    fn is_codeword(&self, bits: &[u8]) -> bool {
        self.h
            .rows()
            .iter()
            .all(|row| row.iter().fold(0u8, |acc, e| acc ^ bits[e.col]) == 0)
    }

    pub fn decode<R: Real>(&self, llr: &[R], max_iters: usize) -> BitDecodeOutcome {
        assert_eq!(llr.len(), self.h.n_vars());
        let n_edges = self.h.n_edges();
        let mut v = vec![R::zero(); n_edges];
        let mut c = vec![R::zero(); n_edges];
        for (j, edges) in self.var_edges.iter().enumerate() {
            for &e in edges {
                v[e] = llr[j];
            }
        }
        let clamp = R::of(TANH_CLAMP);
        let half = R::of(0.5);
        let two = R::of(2.0);
        let mut bits = vec![0u8; self.h.n_vars()];
        let mut t = Vec::new();
        let iters = max_iters.max(1);
        // with no evidence at all the all-zero word is a guess, not a decode
        let blind = all_zero(llr);
        for it in 1..=iters {
            for edges in &self.check_edges {
                t.clear();
                t.extend(edges.iter().map(|&e| (v[e] * half).tanh()));
                for (i, &e) in edges.iter().enumerate() {
                    let mut p = R::one();
                    for (k, &tk) in t.iter().enumerate() {
                        if k != i {
                            p *= tk;
                        }
                    }
                    let p = p.max(-clamp).min(clamp);
                    c[e] = two * p.atanh();
                }
            }
            for (j, edges) in self.var_edges.iter().enumerate() {
                let total = edges.iter().fold(llr[j], |acc, &e| acc + c[e]);
                for &e in edges {
                    v[e] = total - c[e];
                }
                bits[j] = u8::from(total < R::zero());
            }
            if !blind && self.is_codeword(&bits) {
                return BitDecodeOutcome {
                    bits,
                    converged: true,
                    iterations: it,
                };
            }
        }
        BitDecodeOutcome {
            bits,
            converged: false,
            iterations: iters,
        }
    }
}

/// Symbol LLRs (`ln P(a) / P(0)`) to per-bit LLRs, `bits_per_symbol` bits
/// per symbol, most significant first. `exact` uses log-sum-exp, otherwise
/// the max-approximation.
pub fn symbol_llrs_to_bit_llrs<R: Real>(
    llrs: &[LlrVector<R>],
    bits_per_symbol: u32,
    exact: bool,
) -> Vec<R> {
    let m = bits_per_symbol as usize;
    let mut out = Vec::with_capacity(llrs.len() * m);
    for l in llrs {
        for b in (0..m).rev() {
            let (mut zero, mut one): (Vec<R>, Vec<R>) = (Vec::new(), Vec::new());
            for (a, &x) in l.llrs.iter().enumerate() {
                if (a >> b) & 1 == 0 {
                    zero.push(x);
                } else {
                    one.push(x);
                }
            }
            let agg = |v: &[R]| -> R {
                let max = v.iter().copied().fold(R::neg_infinity(), R::max);
                if exact {
                    max + v.iter().map(|&x| (x - max).exp()).sum::<R>().ln()
                } else {
                    max
                }
            };
            out.push(agg(&zero) - agg(&one));
        }
    }
    out
}

pub(crate) fn all_zero<R: Real>(llr: &[R]) -> bool {
    llr.iter().all(|&x| x == R::zero())
}

/// Convert decoded GF(2) symbols to bits.
#[cfg(test)]
pub(crate) fn gf2_to_bits(c: &[crate::gfield::GfElem]) -> Vec<u8> {
    c.iter().map(|x| x.0 as u8).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::RngSeed;
    use crate::codec::pcm::build_regular;
    use crate::gfield::GfElem;
    use crate::gfield::FieldSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn code() -> (BinaryDecoder, crate::codec::pcm::SystematicEncoder) {
        let f = FieldSpec::new(1).unwrap();
        let (h, enc) = build_regular(&f, 800, 400, 3, RngSeed(3)).unwrap();
        (BinaryDecoder::new(h), enc)
    }

    #[test]
    fn noiseless_recovery_in_one_iteration() {
        let (dec, enc) = code();
        let f = FieldSpec::new(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let info: Vec<GfElem> = (0..400).map(|_| GfElem(rng.gen_range(0..2))).collect();
        let cw = gf2_to_bits(&enc.encode(&f, &info).unwrap());
        let llr: Vec<f64> = cw.iter().map(|&b| if b == 0 { 10.0 } else { -10.0 }).collect();
        let out = dec.decode(&llr, 50);
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.bits, cw);
    }

    #[test]
    fn corrects_bpsk_noise() {
        let (dec, enc) = code();
        let f = FieldSpec::new(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sigma: f64 = 0.6;
        let mut fixed = 0;
        for _ in 0..10 {
            let info: Vec<GfElem> = (0..400).map(|_| GfElem(rng.gen_range(0..2))).collect();
            let cw = gf2_to_bits(&enc.encode(&f, &info).unwrap());
            let llr: Vec<f64> = cw
                .iter()
                .map(|&b| {
                    let x = if b == 0 { 1.0 } else { -1.0 };
                    let n: f64 = rng.sample(StandardNormal);
                    2.0 * (x + sigma * n) / (sigma * sigma)
                })
                .collect();
            let out = dec.decode(&llr, 50);
            if out.bits == cw {
                fixed += 1;
            }
        }
        assert!(fixed >= 9, "{fixed}/10");
    }

    #[test]
    fn zero_llrs_do_not_converge() {
        let (dec, _) = code();
        let out = dec.decode(&vec![0.0f64; 800], 50);
        assert!(!out.converged);
        assert!(all_zero(&vec![0.0f64; 3]));
    }

    #[test]
    fn bit_marginalization() {
        // q = 4, symbol values 0..3 -> bits (b1 b0)
        let l = LlrVector {
            llrs: vec![0.0, -1.0, 2.0, 0.5],
        };
        let max = symbol_llrs_to_bit_llrs(&[l.clone()], 2, false);
        // msb: zero set {0, 1} -> 0; one set {2, 3} -> 2
        assert_eq!(max, vec![-2.0, 2.0 - 0.5]);
        let exact = symbol_llrs_to_bit_llrs(&[l], 2, true);
        let lse = |v: &[f64]| v.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((exact[0] - (lse(&[0.0, -1.0]) - lse(&[2.0, 0.5]))).abs() < 1e-12);
        assert!((exact[1] - (lse(&[0.0, 2.0]) - lse(&[-1.0, 0.5]))).abs() < 1e-12);
    }
}
