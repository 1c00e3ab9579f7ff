//! Sparse parity-check matrices over GF(2^m): progressive-edge-growth
//! construction, systematic encoding and alist-style text I/O.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;

use super::CodecError;
use crate::channel::RngSeed;
use crate::gfield::{FieldSpec, GfElem};

/// Nonzero entry of a parity-check row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Entry {
    pub col: usize,
    pub coeff: GfElem,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParityCheckMatrix {
    n_vars: usize,
    rows: Vec<Vec<Entry>>,
    field: FieldSpec,
}

impl ParityCheckMatrix {
    /// Validates coefficients, column bounds, duplicates and column degree ≥ 2.
    pub fn new(field: FieldSpec, n_vars: usize, rows: Vec<Vec<Entry>>) -> Result<Self, CodecError> {
        let mut col_deg = vec![0usize; n_vars];
        for (r, row) in rows.iter().enumerate() {
            let mut seen = std::collections::HashSet::new();
            for e in row {
                if e.col >= n_vars {
                    return Err(CodecError::Matrix(format!("row {r}: column {} out of range", e.col)));
                }
                if e.coeff == GfElem::ZERO || e.coeff.value() >= field.q() {
                    return Err(CodecError::Matrix(format!(
                        "row {r}, column {}: coefficient {} is not a nonzero field element",
                        e.col, e.coeff
                    )));
                }
                if !seen.insert(e.col) {
                    return Err(CodecError::Matrix(format!("row {r}: duplicate column {}", e.col)));
                }
                col_deg[e.col] += 1;
            }
        }
        if let Some(c) = col_deg.iter().position(|&d| d < 2) {
            return Err(CodecError::Matrix(format!("column {c} has degree {}", col_deg[c])));
        }
        Ok(ParityCheckMatrix { n_vars, rows, field })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_checks(&self) -> usize {
        self.rows.len()
    }

    pub fn field(&self) -> &FieldSpec {
        &self.field
    }

    pub fn rows(&self) -> &[Vec<Entry>] {
        &self.rows
    }

    pub fn n_edges(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Per column: `(row, coeff)` pairs in row order.
    pub fn columns(&self) -> Vec<Vec<(usize, GfElem)>> {
        let mut cols = vec![Vec::new(); self.n_vars];
        for (r, row) in self.rows.iter().enumerate() {
            for e in row {
                cols[e.col].push((r, e.coeff));
            }
        }
        cols
    }

    /// `true` when every check sums to zero.
    pub fn is_codeword(&self, c: &[GfElem]) -> bool {
        c.len() == self.n_vars
            && self.rows.iter().all(|row| {
                row.iter()
                    .fold(GfElem::ZERO, |acc, e| self.field.add(acc, self.field.mul(e.coeff, c[e.col])))
                    == GfElem::ZERO
            })
    }

    /// Length of the shortest cycle in the Tanner graph (`usize::MAX` if acyclic).
    pub fn girth(&self) -> usize {
        let cols = self.columns();
        let n = self.n_vars;
        let m = self.rows.len();
        let mut best = usize::MAX;
        // BFS from each variable node; nodes 0..n variables, n..n+m checks
        for root in 0..n {
            let mut dist = vec![usize::MAX; n + m];
            let mut parent = vec![usize::MAX; n + m];
            dist[root] = 0;
            let mut queue = VecDeque::from([root]);
            while let Some(u) = queue.pop_front() {
                if 2 * dist[u] >= best {
                    break;
                }
                let neigh: Vec<usize> = if u < n {
                    cols[u].iter().map(|&(r, _)| n + r).collect()
                } else {
                    self.rows[u - n].iter().map(|e| e.col).collect()
                };
                for v in neigh {
                    if v == parent[u] {
                        continue;
                    }
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        parent[v] = u;
                        queue.push_back(v);
                    } else {
                        best = best.min(dist[u] + dist[v] + 1);
                    }
                }
            }
        }
        best
    }

    /// Plain-text export. Line 1: `N M q poly`; line 2: max column and
    /// row degree; then column degrees, row degrees, one line per column
    /// of 1-based `row coeff` pairs and one line per row of `col coeff`
    /// pairs.
    pub fn to_alist(&self) -> String {
        let cols = self.columns();
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} {} {} {:#x}",
            self.n_vars,
            self.rows.len(),
            self.field.q(),
            self.field.primitive_poly()
        );
        let max_c = cols.iter().map(Vec::len).max().unwrap_or(0);
        let max_r = self.rows.iter().map(Vec::len).max().unwrap_or(0);
        let _ = writeln!(s, "{max_c} {max_r}");
        let join = |v: Vec<String>| v.join(" ");
        let _ = writeln!(s, "{}", join(cols.iter().map(|c| c.len().to_string()).collect()));
        let _ = writeln!(s, "{}", join(self.rows.iter().map(|r| r.len().to_string()).collect()));
        for c in &cols {
            let _ = writeln!(s, "{}", join(c.iter().map(|(r, g)| format!("{} {}", r + 1, g.0)).collect()));
        }
        for r in &self.rows {
            let _ = writeln!(s, "{}", join(r.iter().map(|e| format!("{} {}", e.col + 1, e.coeff.0)).collect()));
        }
        s
    }

    pub fn from_alist(text: &str) -> Result<Self, CodecError> {
        let bad = |line: usize, msg: &str| CodecError::Alist { line, msg: msg.to_string() };
        let lines: Vec<&str> = text.lines().collect();
        let nums = |i: usize| -> Result<Vec<u64>, CodecError> {
            let l = lines.get(i).ok_or_else(|| bad(i + 1, "missing line"))?;
            l.split_whitespace()
                .map(|t| {
                    let parsed = match t.strip_prefix("0x") {
                        Some(hex) => u64::from_str_radix(hex, 16),
                        None => t.parse(),
                    };
                    parsed.map_err(|_| bad(i + 1, &format!("bad number '{t}'")))
                })
                .collect()
        };
        let head = nums(0)?;
        if head.len() != 4 {
            return Err(bad(1, "expected 'N M q poly'"));
        }
        let (n, m, q, poly) = (head[0] as usize, head[1] as usize, head[2] as usize, head[3] as u32);
        if !q.is_power_of_two() || q < 2 {
            return Err(bad(1, "q must be a power of two"));
        }
        let field = FieldSpec::with_poly(q.trailing_zeros(), poly).map_err(|e| bad(1, &e.to_string()))?;
        let row_deg = nums(3)?;
        if row_deg.len() != m {
            return Err(bad(4, "row degree count differs from M"));
        }
        let first_row_line = 4 + n;
        let mut rows = Vec::with_capacity(m);
        for r in 0..m {
            let v = nums(first_row_line + r)?;
            if v.len() != 2 * row_deg[r] as usize {
                return Err(bad(first_row_line + r + 1, "entry count differs from row degree"));
            }
            let mut row = Vec::with_capacity(v.len() / 2);
            for pair in v.chunks_exact(2) {
                if pair[0] == 0 {
                    return Err(bad(first_row_line + r + 1, "indices are 1-based"));
                }
                row.push(Entry {
                    col: pair[0] as usize - 1,
                    coeff: GfElem(pair[1] as u16),
                });
            }
            rows.push(row);
        }
        let h = ParityCheckMatrix::new(field, n, rows)?;
        // the column section must agree with the rows
        let cols = h.columns();
        for (c, col) in cols.iter().enumerate() {
            let v = nums(4 + c)?;
            let want: Vec<u64> = col.iter().flat_map(|&(r, g)| [r as u64 + 1, g.0 as u64]).collect();
            if v != want {
                return Err(bad(5 + c, "column entries disagree with row entries"));
            }
        }
        Ok(h)
    }
}

/// Progressive-edge-growth Tanner graph with `dv` edges per variable and
/// at most `dc` per check. Returns `None` when the greedy growth gets stuck.
fn peg_skeleton<Rg: Rng>(n_vars: usize, n_checks: usize, dv: usize, dc: usize, rng: &mut Rg) -> Option<Vec<Vec<usize>>> {
    let mut var_adj: Vec<Vec<usize>> = vec![Vec::new(); n_vars];
    let mut chk_adj: Vec<Vec<usize>> = vec![Vec::new(); n_checks];
    let mut order: Vec<usize> = (0..n_checks).collect();
    for j in 0..n_vars {
        for _ in 0..dv {
            let eligible = |c: usize, adj: &[Vec<usize>], va: &[usize]| adj[c].len() < dc && !va.contains(&c);
            let candidates: Vec<usize> = if var_adj[j].is_empty() {
                (0..n_checks).filter(|&c| eligible(c, &chk_adj, &var_adj[j])).collect()
            } else {
                // breadth-first expansion from j until no new checks appear or
                // every eligible check has been reached
                let mut reached = vec![false; n_checks];
                let mut seen_var = vec![false; n_vars];
                seen_var[j] = true;
                let mut frontier_vars = vec![j];
                for &c in &var_adj[j] {
                    reached[c] = true;
                }
                let mut frontier_chks: Vec<usize> = var_adj[j].clone();
                loop {
                    let prev = reached.clone();
                    frontier_vars.clear();
                    for &c in &frontier_chks {
                        for &v in &chk_adj[c] {
                            if !seen_var[v] {
                                seen_var[v] = true;
                                frontier_vars.push(v);
                            }
                        }
                    }
                    let mut next = Vec::new();
                    for &v in &frontier_vars {
                        for &c in &var_adj[v] {
                            if !reached[c] {
                                reached[c] = true;
                                next.push(c);
                            }
                        }
                    }
                    let unreached: Vec<usize> = (0..n_checks)
                        .filter(|&c| !reached[c] && eligible(c, &chk_adj, &var_adj[j]))
                        .collect();
                    if next.is_empty() {
                        break unreached;
                    }
                    if unreached.is_empty() {
                        // everything eligible is reachable: take the deepest layer
                        break (0..n_checks)
                            .filter(|&c| !prev[c] && eligible(c, &chk_adj, &var_adj[j]))
                            .collect();
                    }
                    frontier_chks = next;
                }
            };
            let candidates = if candidates.is_empty() {
                (0..n_checks).filter(|&c| eligible(c, &chk_adj, &var_adj[j])).collect()
            } else {
                candidates
            };
            if candidates.is_empty() {
                return None;
            }
            let min_deg = candidates.iter().map(|&c| chk_adj[c].len()).min()?;
            order.clear();
            order.extend(candidates.into_iter().filter(|&c| chk_adj[c].len() == min_deg));
            let &c = order.choose(rng)?;
            var_adj[j].push(c);
            chk_adj[c].push(j);
        }
    }
    chk_adj.iter().all(|r| r.len() == dc).then_some(chk_adj)
}

/// Systematic encoder derived from `H` by Gauss–Jordan elimination.
#[derive(Debug, Clone, PartialEq)]
pub struct SystematicEncoder {
    /// Codeword positions carrying the information symbols, ascending.
    pub info_cols: Vec<usize>,
    /// Pivot (parity) position of each reduced row.
    pub parity_cols: Vec<usize>,
    /// `parity[r] = sum_i coef[r][i] * info[i]`.
    coef: Vec<Vec<GfElem>>,
    n_vars: usize,
}

impl SystematicEncoder {
    /// Pivot columns are searched from the right so the information
    /// symbols land in the leftmost positions when `H` allows it.
    pub fn new(h: &ParityCheckMatrix) -> Result<Self, CodecError> {
        let f = h.field();
        let n = h.n_vars();
        let m = h.n_checks();
        let mut dense: Vec<Vec<GfElem>> = h
            .rows()
            .iter()
            .map(|row| {
                let mut d = vec![GfElem::ZERO; n];
                for e in row {
                    d[e.col] = e.coeff;
                }
                d
            })
            .collect();
        let mut parity_cols = Vec::with_capacity(m);
        let mut r = 0;
        for c in (0..n).rev() {
            if r == m {
                break;
            }
            let Some(p) = (r..m).find(|&i| dense[i][c] != GfElem::ZERO) else {
                continue;
            };
            dense.swap(r, p);
            let inv = f.inv(dense[r][c]).expect("pivot is nonzero");
            if inv != GfElem::ONE {
                for v in dense[r].iter_mut() {
                    *v = f.mul(*v, inv);
                }
            }
            let pivot_row = dense[r].clone();
            for (i, row) in dense.iter_mut().enumerate() {
                if i == r || row[c] == GfElem::ZERO {
                    continue;
                }
                let k = row[c];
                for (v, &pv) in row.iter_mut().zip(&pivot_row) {
                    if pv != GfElem::ZERO {
                        *v = f.add(*v, f.mul(k, pv));
                    }
                }
            }
            parity_cols.push(c);
            r += 1;
        }
        if r < m {
            return Err(CodecError::RankDeficient { rank: r, rows: m });
        }
        let mut is_parity = vec![false; n];
        for &c in &parity_cols {
            is_parity[c] = true;
        }
        let info_cols: Vec<usize> = (0..n).filter(|&c| !is_parity[c]).collect();
        let coef = dense
            .iter()
            .map(|row| info_cols.iter().map(|&c| row[c]).collect())
            .collect();
        Ok(SystematicEncoder {
            info_cols,
            parity_cols,
            coef,
            n_vars: n,
        })
    }

    pub fn k(&self) -> usize {
        self.info_cols.len()
    }

    pub fn encode(&self, f: &FieldSpec, info: &[GfElem]) -> Result<Vec<GfElem>, CodecError> {
        if info.len() != self.k() {
            return Err(CodecError::InfoLength {
                got: info.len(),
                want: self.k(),
            });
        }
        let mut c = vec![GfElem::ZERO; self.n_vars];
        for (&col, &u) in self.info_cols.iter().zip(info) {
            c[col] = u;
        }
        for (row, &pc) in self.coef.iter().zip(&self.parity_cols) {
            c[pc] = row
                .iter()
                .zip(info)
                .fold(GfElem::ZERO, |acc, (&k, &u)| f.add(acc, f.mul(k, u)));
        }
        Ok(c)
    }

    pub fn extract(&self, codeword: &[GfElem]) -> Vec<GfElem> {
        self.info_cols.iter().map(|&c| codeword[c]).collect()
    }
}

/// Regular LDPC code: PEG skeleton of column weight `dv` and row weight
/// `n_vars * dv / n_checks`, uniform random nonzero coefficients, and a
/// systematic encoder. Seeds are retried (bounded) until the skeleton is
/// complete and full rank; among those, a construction with girth ≥ 6 is
/// preferred.
pub fn build_regular(
    field: &FieldSpec,
    n_vars: usize,
    n_checks: usize,
    dv: usize,
    seed: RngSeed,
) -> Result<(ParityCheckMatrix, SystematicEncoder), CodecError> {
    if n_checks == 0 || (n_vars * dv) % n_checks != 0 {
        return Err(CodecError::Matrix(format!(
            "{n_vars} variables of degree {dv} cannot fill {n_checks} equal-degree checks"
        )));
    }
    let dc = n_vars * dv / n_checks;
    const ATTEMPTS: u64 = 64;
    let mut fallback = None;
    for attempt in 0..ATTEMPTS {
        let mut rng = seed.derive(attempt).rng();
        let Some(skeleton) = peg_skeleton(n_vars, n_checks, dv, dc, &mut rng) else {
            continue;
        };
        let rows: Vec<Vec<Entry>> = skeleton
            .into_iter()
            .map(|mut cols| {
                cols.sort_unstable();
                cols.into_iter()
                    .map(|col| Entry {
                        col,
                        coeff: GfElem(rng.gen_range(1..field.q()) as u16),
                    })
                    .collect()
            })
            .collect();
        let h = ParityCheckMatrix::new(field.clone(), n_vars, rows)?;
        let Ok(enc) = SystematicEncoder::new(&h) else {
            continue;
        };
        if h.girth() >= 6 {
            return Ok((h, enc));
        }
        fallback.get_or_insert((h, enc));
    }
    fallback.ok_or(CodecError::Construction { attempts: ATTEMPTS })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gf(m: u32) -> FieldSpec {
        FieldSpec::new(m).unwrap()
    }

    #[test]
    fn nb_code_is_regular_deterministic_and_girth_six() {
        let f = gf(8);
        let (h, enc) = build_regular(&f, 100, 50, 3, RngSeed(1)).unwrap();
        assert!(h.rows().iter().all(|r| r.len() == 6));
        assert!(h.columns().iter().all(|c| c.len() == 3));
        assert!(h.girth() >= 6);
        assert_eq!(enc.k(), 50);
        let (h2, enc2) = build_regular(&f, 100, 50, 3, RngSeed(1)).unwrap();
        assert_eq!(h, h2);
        assert_eq!(enc, enc2);
        let (h3, _) = build_regular(&f, 100, 50, 3, RngSeed(2)).unwrap();
        assert_ne!(h, h3);
    }

    #[test]
    fn encodings_satisfy_h() {
        let f = gf(8);
        let (h, enc) = build_regular(&f, 100, 50, 3, RngSeed(7)).unwrap();
        let zero = enc.encode(&f, &vec![GfElem::ZERO; 50]).unwrap();
        assert!(zero.iter().all(|&c| c == GfElem::ZERO));
        assert!(h.is_codeword(&zero));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let info: Vec<GfElem> = (0..50).map(|_| GfElem(rng.gen_range(0..256))).collect();
            let c = enc.encode(&f, &info).unwrap();
            assert!(h.is_codeword(&c));
            assert_eq!(enc.extract(&c), info);
            let mut info2 = info.clone();
            let i = rng.gen_range(0..50);
            info2[i] = f.add(info2[i], GfElem(rng.gen_range(1..256)));
            let c2 = enc.encode(&f, &info2).unwrap();
            let dist = c.iter().zip(&c2).filter(|(a, b)| a != b).count();
            assert!(dist >= 2, "distance {dist}");
        }
        assert!(enc.encode(&f, &[GfElem::ONE; 3]).is_err());
    }

    #[test]
    fn info_sits_mostly_on_the_left() {
        let f = gf(8);
        let (_, enc) = build_regular(&f, 100, 50, 3, RngSeed(1)).unwrap();
        let left = enc.info_cols.iter().filter(|&&c| c < 50).count();
        assert!(left >= 40, "{left} of 50 info symbols in the first half");
    }

    #[test]
    fn binary_code_via_gf2() {
        let f = gf(1);
        let (h, enc) = build_regular(&f, 800, 400, 3, RngSeed(5)).unwrap();
        assert!(h.rows().iter().all(|r| r.len() == 6 && r.iter().all(|e| e.coeff == GfElem::ONE)));
        assert_eq!(enc.k(), 400);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let info: Vec<GfElem> = (0..400).map(|_| GfElem(rng.gen_range(0..2))).collect();
        assert!(h.is_codeword(&enc.encode(&f, &info).unwrap()));
    }

    #[test]
    fn rank_deficiency_is_detected() {
        let f = gf(2);
        // two identical rows
        let row = vec![
            Entry { col: 0, coeff: GfElem(1) },
            Entry { col: 1, coeff: GfElem(2) },
            Entry { col: 2, coeff: GfElem(3) },
        ];
        let h = ParityCheckMatrix::new(f, 3, vec![row.clone(), row]).unwrap();
        assert!(matches!(
            SystematicEncoder::new(&h),
            Err(CodecError::RankDeficient { rank: 1, rows: 2 })
        ));
    }

    #[test]
    fn matrix_validation() {
        let f = gf(2);
        let e = |col, c| Entry { col, coeff: GfElem(c) };
        assert!(ParityCheckMatrix::new(f.clone(), 2, vec![vec![e(0, 0), e(1, 1)], vec![e(0, 1), e(1, 1)]]).is_err());
        assert!(ParityCheckMatrix::new(f.clone(), 2, vec![vec![e(0, 1), e(0, 1)], vec![e(0, 1), e(1, 1)]]).is_err());
        // column 1 has degree 1
        assert!(ParityCheckMatrix::new(f.clone(), 2, vec![vec![e(0, 1), e(1, 1)], vec![e(0, 1)]]).is_err());
        assert!(ParityCheckMatrix::new(f, 2, vec![vec![e(0, 1), e(1, 1)], vec![e(0, 2), e(1, 3)]]).is_ok());
    }

    #[test]
    fn alist_round_trip() {
        let f = gf(8);
        let (h, _) = build_regular(&f, 100, 50, 3, RngSeed(9)).unwrap();
        let text = h.to_alist();
        assert!(text.starts_with("100 50 256 0x11d\n3 6\n"));
        assert_eq!(ParityCheckMatrix::from_alist(&text).unwrap(), h);
        let broken = text.replacen("3 6", "3 6\n", 1);
        assert!(ParityCheckMatrix::from_alist(&broken).is_err());
        let err = ParityCheckMatrix::from_alist("100 50 256\n").unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");
    }

    #[test]
    fn girth_of_small_graphs() {
        let f = gf(1);
        let e = |col| Entry { col, coeff: GfElem(1) };
        // two checks sharing two variables: a 4-cycle
        let h = ParityCheckMatrix::new(f, 2, vec![vec![e(0), e(1)], vec![e(0), e(1)]]).unwrap();
        assert_eq!(h.girth(), 4);
    }
}
