//! Probability-domain q-ary sum-product decoding.
//!
//! Check nodes see variables through the edge permutation `a -> h * a`;
//! in that domain a check is a sum over the additive group of GF(2^m), so
//! its messages are XOR-convolutions. [`CheckRule::Naive`] computes them
//! directly with forward/backward partial convolutions; [`CheckRule::Fft`]
//! diagonalizes them with the Walsh–Hadamard transform.

use super::pcm::ParityCheckMatrix;
use crate::gfield::GfElem;
use crate::rx::LlrVector;
use crate::Real;

/// Lower clip applied to every probability message before renormalizing.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CheckRule {
    /// `O(q^2)` XOR-convolutions; reference implementation.
    Naive,
    /// Walsh–Hadamard domain products, `O(q log q)`.
    #[default]
    Fft,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutcome {
    /// Tentative hard decision, one symbol per variable.
    pub symbols: Vec<GfElem>,
    pub converged: bool,
    /// Iterations run (at least one).
    pub iterations: usize,
}

/// In-place unnormalized Walsh–Hadamard transform; applying it twice
/// multiplies by `len`.
pub fn walsh_hadamard<R: Real>(v: &mut [R]) {
    let n = v.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for block in v.chunks_exact_mut(2 * h) {
            let (a, b) = block.split_at_mut(h);
            for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                let s = *x + *y;
                let d = *x - *y;
                *x = s;
                *y = d;
            }
        }
        h *= 2;
    }
}

/// `out[z] = sum_x a[x] b[x ^ z]`.
pub fn xor_convolve<R: Real>(a: &[R], b: &[R], out: &mut [R]) {
    for (z, o) in out.iter_mut().enumerate() {
        let mut acc = R::zero();
        for (x, &ax) in a.iter().enumerate() {
            acc += ax * b[x ^ z];
        }
        *o = acc;
    }
}

fn clip_normalize<R: Real>(v: &mut [R]) {
    let floor = R::of(PROB_FLOOR);
    let mut sum = R::zero();
    for x in v.iter_mut() {
        if !(*x > floor) {
            *x = floor;
        }
        sum += *x;
    }
    let inv = R::one() / sum;
    for x in v.iter_mut() {
        *x *= inv;
    }
}

/// Channel probabilities `p(a) ∝ exp(llr[a])`.
pub fn llr_to_probs<R: Real>(llr: &[R], out: &mut [R]) {
    let max = llr.iter().copied().fold(R::neg_infinity(), R::max);
    for (o, &l) in out.iter_mut().zip(llr) {
        *o = (l - max).exp();
    }
    clip_normalize(out);
}

/// Edge-indexed Tanner graph with precomputed coefficient permutations.
#[derive(Debug, Clone)]
pub struct QspaDecoder {
    h: ParityCheckMatrix,
    q: usize,
    /// Edge ids per check, in row order.
    check_edges: Vec<Vec<usize>>,
    /// Edge ids per variable.
    var_edges: Vec<Vec<usize>>,
    /// `perm[e][a] = coeff_e * a`.
    perm: Vec<Vec<u16>>,
}

impl QspaDecoder {
    pub fn new(h: ParityCheckMatrix) -> Self {
        let q = h.field().q();
        let mut check_edges = Vec::with_capacity(h.n_checks());
        let mut var_edges = vec![Vec::new(); h.n_vars()];
        let mut perm = Vec::with_capacity(h.n_edges());
        let mut e = 0;
        for row in h.rows() {
            let mut ids = Vec::with_capacity(row.len());
            for entry in row {
                ids.push(e);
                var_edges[entry.col].push(e);
                perm.push(h.field().mul_table_row(entry.coeff));
                e += 1;
            }
            check_edges.push(ids);
        }
        QspaDecoder {
            h,
            q,
            check_edges,
            var_edges,
            perm,
        }
    }

    pub fn matrix(&self) -> &ParityCheckMatrix {
        &self.h
    }

    /// Check-to-variable messages for all checks from variable-to-check
    /// messages `v` (edge-major, `q` values per edge, symbol domain).
    pub fn check_update<R: Real>(&self, rule: CheckRule, v: &[R], c: &mut [R]) {
        let q = self.q;
        let dmax = self.check_edges.iter().map(Vec::len).max().unwrap_or(0);
        let mut z = vec![R::zero(); dmax * q];
        let mut fwd = vec![R::zero(); dmax * q];
        let mut bwd = vec![R::zero(); dmax * q];
        let mut tmp = vec![R::zero(); q];
        for edges in &self.check_edges {
            let d = edges.len();
            // move into the h*a domain
            for (i, &e) in edges.iter().enumerate() {
                let src = &v[e * q..(e + 1) * q];
                let dst = &mut z[i * q..(i + 1) * q];
                for (a, &p) in src.iter().enumerate() {
                    dst[self.perm[e][a] as usize] = p;
                }
            }
            match rule {
                CheckRule::Fft => {
                    for i in 0..d {
                        walsh_hadamard(&mut z[i * q..(i + 1) * q]);
                    }
                    // prefix and suffix products exclude each edge without division
                    fwd[..q].iter_mut().for_each(|x| *x = R::one());
                    for i in 1..d {
                        for t in 0..q {
                            fwd[i * q + t] = fwd[(i - 1) * q + t] * z[(i - 1) * q + t];
                        }
                    }
                    bwd[(d - 1) * q..d * q].iter_mut().for_each(|x| *x = R::one());
                    for i in (0..d - 1).rev() {
                        for t in 0..q {
                            bwd[i * q + t] = bwd[(i + 1) * q + t] * z[(i + 1) * q + t];
                        }
                    }
                    for (i, &e) in edges.iter().enumerate() {
                        for t in 0..q {
                            tmp[t] = fwd[i * q + t] * bwd[i * q + t];
                        }
                        walsh_hadamard(&mut tmp);
                        self.store(e, &tmp, c);
                    }
                }
                CheckRule::Naive => {
                    // fwd[i] = z_0 * ... * z_i, bwd[i] = z_i * ... * z_{d-1}
                    fwd[..q].copy_from_slice(&z[..q]);
                    for i in 1..d {
                        let (done, rest) = fwd.split_at_mut(i * q);
                        xor_convolve(&done[(i - 1) * q..], &z[i * q..(i + 1) * q], &mut rest[..q]);
                    }
                    bwd[(d - 1) * q..d * q].copy_from_slice(&z[(d - 1) * q..d * q]);
                    for i in (0..d - 1).rev() {
                        let (head, tail) = bwd.split_at_mut((i + 1) * q);
                        xor_convolve(&z[i * q..(i + 1) * q], &tail[..q], &mut head[i * q..]);
                    }
                    for (i, &e) in edges.iter().enumerate() {
                        if i == 0 {
                            tmp.copy_from_slice(&bwd[q..2 * q]);
                        } else if i == d - 1 {
                            tmp.copy_from_slice(&fwd[(d - 2) * q..(d - 1) * q]);
                        } else {
                            xor_convolve(&fwd[(i - 1) * q..i * q], &bwd[(i + 1) * q..(i + 2) * q], &mut tmp);
                        }
                        self.store(e, &tmp, c);
                    }
                }
            }
        }
    }

    /// Back to the symbol domain, clipped and normalized.
    fn store<R: Real>(&self, e: usize, zdom: &[R], c: &mut [R]) {
        let q = self.q;
        let out = &mut c[e * q..(e + 1) * q];
        for (a, o) in out.iter_mut().enumerate() {
            *o = zdom[self.perm[e][a] as usize];
        }
        clip_normalize(out);
    }

    /// Variable-to-check messages and hard decisions from channel
    /// probabilities and incoming check messages.
    pub fn var_update<R: Real>(&self, chan: &[R], c: &[R], v: &mut [R], hard: &mut [GfElem]) {
        let q = self.q;
        let mut post = vec![R::zero(); q];
        for (j, edges) in self.var_edges.iter().enumerate() {
            let ch = &chan[j * q..(j + 1) * q];
            post.copy_from_slice(ch);
            for &e in edges {
                for (p, &m) in post.iter_mut().zip(&c[e * q..(e + 1) * q]) {
                    *p *= m;
                }
            }
            for &e in edges {
                let out = &mut v[e * q..(e + 1) * q];
                out.copy_from_slice(ch);
                for &e2 in edges.iter().filter(|&&e2| e2 != e) {
                    for (o, &m) in out.iter_mut().zip(&c[e2 * q..(e2 + 1) * q]) {
                        *o *= m;
                    }
                }
                // renormalize partial products, they underflow on long runs
                clip_normalize(out);
            }
            let mut best = 0;
            for a in 1..q {
                if post[a] > post[best] {
                    best = a;
                }
            }
            hard[j] = GfElem(best as u16);
        }
    }

    /// Initial variable-to-check messages: the channel probabilities.
    pub fn init_messages<R: Real>(&self, llrs: &[LlrVector<R>]) -> (Vec<R>, Vec<R>) {
        let q = self.q;
        let mut chan = vec![R::zero(); self.h.n_vars() * q];
        for (j, l) in llrs.iter().enumerate() {
            llr_to_probs(&l.llrs, &mut chan[j * q..(j + 1) * q]);
        }
        let mut v = vec![R::zero(); self.h.n_edges() * q];
        for (j, edges) in self.var_edges.iter().enumerate() {
            for &e in edges {
                v[e * q..(e + 1) * q].copy_from_slice(&chan[j * q..(j + 1) * q]);
            }
        }
        (chan, v)
    }

    /// Iterates until the hard decision satisfies every check or
    /// `max_iters` is reached.
    pub fn decode<R: Real>(&self, llrs: &[LlrVector<R>], rule: CheckRule, max_iters: usize) -> DecodeOutcome {
        assert_eq!(llrs.len(), self.h.n_vars(), "one LLR vector per variable");
        assert!(llrs.iter().all(|l| l.len() == self.q), "LLR vectors must have q entries");
        let (chan, mut v) = self.init_messages(llrs);
        let mut c = vec![R::zero(); v.len()];
        let mut hard = vec![GfElem::ZERO; self.h.n_vars()];
        let iters = max_iters.max(1);
        for it in 1..=iters {
            self.check_update(rule, &v, &mut c);
            self.var_update(&chan, &c, &mut v, &mut hard);
            if self.h.is_codeword(&hard) {
                return DecodeOutcome {
                    symbols: hard,
                    converged: true,
                    iterations: it,
                };
            }
        }
        DecodeOutcome {
            symbols: hard,
            converged: false,
            iterations: iters,
        }
    }
}

/// Naive-convolution QSPA.
pub fn qspa_decode<R: Real>(dec: &QspaDecoder, llrs: &[LlrVector<R>], max_iters: usize) -> DecodeOutcome {
    dec.decode(llrs, CheckRule::Naive, max_iters)
}

/// Walsh–Hadamard (FFT) QSPA.
pub fn fft_qspa_decode<R: Real>(dec: &QspaDecoder, llrs: &[LlrVector<R>], max_iters: usize) -> DecodeOutcome {
    dec.decode(llrs, CheckRule::Fft, max_iters)
}
