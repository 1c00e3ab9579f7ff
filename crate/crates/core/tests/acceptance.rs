//! Acceptance criteria, one test each. Every test prints a single
//! `PASS` / `FAIL` line before asserting.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uwchirp::codec::hamming::{decode_block, encode_block, BlockStatus};
use uwchirp::codec::{build_regular, symbols_to_bits, CheckRule, Codec, QspaDecoder};
use uwchirp::harness::{
    emit_csv, load_profiles, run_collision, run_experiment, run_multipath_detailed, to_csv, default_profile_dir,
    Experiment, ExperimentSpec, MetricsRecord,
};
use uwchirp::rx::{Dechirper, LlrVector, Receiver};
use uwchirp::tx::{modulate_frame, modulate_symbol};
use uwchirp::{ChirpConfig, ChirpKind, CodecConfig, CombineMode, FieldSpec, FrameLayout, GfElem, RngSeed, Scheme};

fn report(id: &str, pass: bool, detail: String) {
    println!("{} criterion {id}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id}: {detail}");
}

#[test]
fn c1_loopback_exactness() {
    let t0 = Instant::now();
    let mut failures = Vec::new();
    let mut cases = 0;
    for sf in [6, 8, 10] {
        for os in [1, 2] {
            for kind in [ChirpKind::Linear, ChirpKind::Quadratic] {
                let cfg = ChirpConfig::new(sf, os, kind).unwrap();
                let n = cfg.n_bins() as u32;
                let mut dc = Dechirper::<f64>::new(&cfg);
                for s in 0..n {
                    let sym = modulate_symbol::<f64>(&cfg, s).unwrap();
                    if dc.dechirp(&sym.samples, 0).unwrap().argmax() as u32 != s {
                        failures.push(format!("sf{sf} os{os} {kind} s={s} (window)"));
                    }
                }
                // whole frame through detection
                let payload: Vec<u32> = (0..n).collect();
                let layout = FrameLayout::with_payload(n as usize);
                let l = cfg.samples_per_symbol();
                let buf = modulate_frame::<f64>(&cfg, &layout, &payload).unwrap().padded(3 * l, 3 * l);
                let mut rx = Receiver::<f64>::new(&cfg, &layout, Default::default());
                match rx.receive(&buf) {
                    Ok(out) if out.hard_symbols == payload => {}
                    Ok(out) => {
                        let bad = out.hard_symbols.iter().zip(&payload).filter(|(a, b)| a != b).count();
                        failures.push(format!("sf{sf} os{os} {kind}: {bad} frame symbols wrong"));
                    }
                    Err(e) => failures.push(format!("sf{sf} os{os} {kind}: {e}")),
                }
                cases += 2 * n as usize;
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    report(
        "1",
        failures.is_empty() && secs < 60.0,
        format!("{cases} symbol decisions, {} failures {:?}, {secs:.1} s", failures.len(), failures.iter().take(3).collect::<Vec<_>>()),
    );
}

/// Largest dechirp bin of a window shifted by `delta` samples against an
/// isolated symbol, relative to the aligned peak.
fn misaligned_ratio(cfg: &ChirpConfig, dc: &mut Dechirper<f64>, s: u32, delta: isize) -> f64 {
    let l = cfg.samples_per_symbol();
    let sym = modulate_symbol::<f64>(cfg, s).unwrap().padded(l, l);
    let aligned = dc.dechirp(&sym.samples, l).unwrap().max();
    let shifted = dc.dechirp(&sym.samples, (l as isize + delta) as usize).unwrap().max();
    shifted / aligned
}

#[test]
fn c2_energy_scattering() {
    let t0 = Instant::now();
    let q = ChirpConfig::new(8, 2, ChirpKind::Quadratic).unwrap();
    let lin = q.with_kind(ChirpKind::Linear);
    let l = q.samples_per_symbol() as isize;
    let symbols = [0u32, 1, 64, 128, 200, 255];
    let mut dq = Dechirper::new(&q);
    let mut worst = (0.0f64, 0isize, 0u32);
    // smallest misalignment beyond which every ratio stays below 0.3
    let mut onset = 4;
    for &s in &symbols {
        for d in (4..l).flat_map(|d| [d, -d]) {
            let r = misaligned_ratio(&q, &mut dq, s, d);
            if r > worst.0 {
                worst = (r, d, s);
            }
            if r >= 0.3 {
                onset = onset.max(d.abs() + 1);
            }
        }
    }
    let mut dl = Dechirper::new(&lin);
    let mut best_lin = (0.0f64, 0isize);
    for d in (4..l).flat_map(|d| [d, -d]) {
        let r = misaligned_ratio(&lin, &mut dl, 0, d);
        if r > best_lin.0 {
            best_lin = (r, d);
        }
    }
    let quad_ok = worst.0 < 0.3;
    let lin_ok = best_lin.0 >= 0.7;
    let secs = t0.elapsed().as_secs_f64();
    report(
        "2",
        quad_ok && lin_ok && secs < 60.0,
        format!(
            "quadratic max misaligned/aligned = {:.3} at delta {} (s={}), need < 0.3 (holds from |delta| >= {}); linear best = {:.3} at delta {}, need >= 0.7; {secs:.1} s",
            worst.0, worst.1, worst.2, onset, best_lin.0, best_lin.1
        ),
    );
}

#[test]
fn c3_collision_probability() {
    let t0 = Instant::now();
    let spec = ExperimentSpec::new(Experiment::Collision);
    assert_eq!(spec.trials, 2000);
    let recs = run_collision(&spec).unwrap();
    let ser = |kind: ChirpKind, n: usize| {
        recs.iter().find(|r| r.kind == kind && r.n_paths == n).map(|r| r.ser).unwrap()
    };
    for r in &recs {
        println!("  collision {} paths={} ser={:.4}", r.kind, r.n_paths, r.ser);
    }
    let lin4 = ser(ChirpKind::Linear, 4);
    let quad4 = ser(ChirpKind::Quadratic, 4);
    let single = ser(ChirpKind::Linear, 1) + ser(ChirpKind::Quadratic, 1);
    let secs = t0.elapsed().as_secs_f64();
    report(
        "3",
        (0.05..=0.2).contains(&lin4) && quad4 <= 0.2 * lin4 && single == 0.0 && secs < 300.0,
        format!("linear SER@4 = {lin4:.4} in [0.05, 0.2]; quadratic SER@4 = {quad4:.4} <= {:.4}; single-path SER {single}; {secs:.1} s", 0.2 * lin4),
    );
}

fn by_scheme(recs: &[MetricsRecord], scheme: Scheme) -> BTreeMap<i64, &MetricsRecord> {
    recs.iter()
        .filter(|r| r.scheme == Some(scheme))
        .map(|r| ((r.snr_db.unwrap() * 100.0).round() as i64, r))
        .collect()
}

#[test]
fn c4_awgn_ordering() {
    let t0 = Instant::now();
    let spec = ExperimentSpec::new(Experiment::AwgnBer);
    assert_eq!(spec.trials, 200);
    let recs = run_experiment(&spec, &[]).unwrap();
    let nb = by_scheme(&recs, Scheme::NbLdpc);
    let bin = by_scheme(&recs, Scheme::BinLdpc);
    let ham = by_scheme(&recs, Scheme::Hamming48);
    for (k, r) in &nb {
        println!(
            "  awgn snr={:>6.2} raw={:.2e} nb={:.2e} bin={:.2e} hamming={:.2e}",
            *k as f64 / 100.0,
            r.raw_ber,
            r.ber,
            bin[k].ber,
            ham[k].ber
        );
    }
    let mut problems = Vec::new();
    // gap: Hamming at least 5x NB wherever NB is at or below 1e-3
    let mut gap_points = 0;
    for (k, r) in &nb {
        if r.ber <= 1e-3 {
            if ham[k].ber < 5.0 * r.ber {
                problems.push(format!("gap at {}", *k as f64 / 100.0));
            }
            if ham[k].ber > 0.0 {
                gap_points += 1;
            }
        }
    }
    // ordering wherever the better code is in its waterfall
    let mut ordered_points = 0;
    for (name, better, worse) in [("nb<=bin", &nb, &bin), ("bin<=hamming", &bin, &ham), ("nb<=hamming", &nb, &ham)] {
        for (k, a) in better.iter() {
            let b = worse[k];
            if a.ber >= a.raw_ber / 2.0 {
                continue;
            }
            ordered_points += 1;
            if a.ber > b.ber && !(a.ber < 1e-4 && b.ber < 1e-4) {
                problems.push(format!("{name} at {}: {:.2e} > {:.2e}", *k as f64 / 100.0, a.ber, b.ber));
            }
        }
    }
    if gap_points == 0 {
        problems.push("no point separates Hamming from NB-LDPC".into());
    }
    let secs = t0.elapsed().as_secs_f64();
    report(
        "4",
        problems.is_empty() && secs < 1200.0,
        format!("{ordered_points} waterfall comparisons, {gap_points} nonzero gap points, violations {problems:?}; {secs:.1} s"),
    );
}

#[test]
fn c5_multipath_emulation() {
    let t0 = Instant::now();
    let profiles = load_profiles(&default_profile_dir()).unwrap();
    let spec = ExperimentSpec::new(Experiment::Multipath).paper_scale();
    assert_eq!(spec.trials, 100);
    let rep = run_multipath_detailed(&spec, &profiles).unwrap();
    let pick = |recs: &[MetricsRecord], scheme: Scheme, mode: CombineMode| -> Vec<MetricsRecord> {
        recs.iter().filter(|r| r.scheme == Some(scheme) && r.mode == Some(mode)).cloned().collect()
    };
    let nb_m = pick(&rep.aggregate, Scheme::NbLdpc, CombineMode::Merge);
    let nb_n = pick(&rep.aggregate, Scheme::NbLdpc, CombineMode::NoMerge);
    let hm_m = pick(&rep.aggregate, Scheme::Hamming48, CombineMode::Merge);
    for i in 0..nb_m.len() {
        println!(
            "  multipath snr={:>6.2} nb merge per={:.3} tp={:.3} | nb nomerge per={:.3} tp={:.3} | hamming merge per={:.3} ser={:.4}",
            nb_m[i].snr_db.unwrap(),
            nb_m[i].per,
            nb_m[i].throughput_bps,
            nb_n[i].per,
            nb_n[i].throughput_bps,
            hm_m[i].per,
            hm_m[i].ser
        );
    }

    let top = nb_m.last().unwrap();
    let a = top.per == 0.0 && top.throughput_bps == 93.75;

    let ge = nb_m.iter().zip(&nb_n).all(|(m, n)| m.throughput_bps >= n.throughput_bps);
    let last = nb_m.len() - 1;
    let strict = (1..last).any(|i| nb_m[i].throughput_bps > nb_n[i].throughput_bps);
    let b = ge && strict;

    let mut c_points = 0;
    let mut c_viol = Vec::new();
    for (p, recs) in profiles.iter().zip(&rep.per_profile) {
        if p.strong_taps(0.5) < 3 {
            continue;
        }
        let nb = pick(recs, Scheme::NbLdpc, CombineMode::Merge);
        let hm = pick(recs, Scheme::Hamming48, CombineMode::Merge);
        for (x, y) in nb.iter().zip(&hm) {
            if x.per <= 0.1 {
                c_points += 1;
                if y.per < 0.9 {
                    c_viol.push((x.snr_db.unwrap(), y.per));
                }
            }
        }
    }
    let c = c_points > 0 && c_viol.is_empty();
    let secs = t0.elapsed().as_secs_f64();
    let ok = secs < 1800.0;
    println!("{} criterion 5a: NB-LDPC merge PER {} throughput {} at {} dB", if a { "PASS" } else { "FAIL" }, top.per, top.throughput_bps, top.snr_db.unwrap());
    println!("{} criterion 5b: merge >= nomerge everywhere: {ge}, strictly greater mid-SNR: {strict}", if b { "PASS" } else { "FAIL" });
    println!(
        "{} criterion 5c: {} of {c_points} (profile, SNR) points with NB PER <= 0.1 have Hamming PER < 0.9, e.g. {:?}",
        if c { "PASS" } else { "FAIL" },
        c_viol.len(),
        c_viol.iter().take(4).collect::<Vec<_>>()
    );
    report("5", a && b && c && ok, format!("a={a} b={b} c={c}; {secs:.1} s"));
}

fn random_llrs(rng: &mut ChaCha8Rng, n: usize, q: usize, scale: f64) -> Vec<LlrVector<f64>> {
    (0..n)
        .map(|_| {
            let l: Vec<f64> = (0..q).map(|_| rng.gen_range(-scale..scale)).collect();
            LlrVector { llrs: l.iter().map(|x| x - l[0]).collect() }
        })
        .collect()
}

/// A disagreement counts as a tie when both check rules still produce the
/// same messages to rounding after one update.
fn first_update_gap(dec: &QspaDecoder, llrs: &[LlrVector<f64>]) -> f64 {
    let (_, v) = dec.init_messages(llrs);
    let mut a = vec![0.0; v.len()];
    let mut b = vec![0.0; v.len()];
    dec.check_update(CheckRule::Naive, &v, &mut a);
    dec.check_update(CheckRule::Fft, &v, &mut b);
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn c6_codec_oracles() {
    let t0 = Instant::now();
    let f4 = FieldSpec::new(2).unwrap();
    let (h, _) = build_regular(&f4, 8, 4, 3, RngSeed(11)).unwrap();
    let dec = QspaDecoder::new(h);
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    let trials = 10_000;
    let mut agree = 0;
    let mut non_ties = 0;
    for _ in 0..trials {
        let llrs = random_llrs(&mut rng, 8, 4, 4.0);
        let a = dec.decode(&llrs, CheckRule::Naive, 20);
        let b = dec.decode(&llrs, CheckRule::Fft, 20);
        if a.symbols == b.symbols {
            agree += 1;
        } else if first_update_gap(&dec, &llrs) > 1e-9 {
            non_ties += 1;
        }
    }
    let agreement = agree as f64 / trials as f64;

    let mut ham_ok = 0;
    for w in 0..16u8 {
        let d = [(w >> 3) & 1, (w >> 2) & 1, (w >> 1) & 1, w & 1];
        let c = encode_block(d);
        for pos in 0..8 {
            let mut r = c;
            r[pos] ^= 1;
            if decode_block(r) == (d, BlockStatus::Corrected) {
                ham_ok += 1;
            }
        }
    }

    let mut encodes = 0;
    let mut violations = 0;
    for scheme in [Scheme::NbLdpc, Scheme::BinLdpc] {
        let codec = Codec::new(&CodecConfig::for_scheme(scheme), 8).unwrap();
        let h = codec.parity_check().unwrap();
        for _ in 0..500 {
            let bits: Vec<u8> = (0..codec.n_info_bits()).map(|_| rng.gen_range(0..2)).collect();
            let syms = codec.encode(&bits).unwrap();
            let cw: Vec<GfElem> = match scheme {
                Scheme::NbLdpc => syms.iter().map(|&s| GfElem(s as u16)).collect(),
                _ => symbols_to_bits(&syms, 8).iter().map(|&b| GfElem(b as u16)).collect(),
            };
            encodes += 1;
            violations += usize::from(!h.is_codeword(&cw));
        }
    }
    for m in [2, 4, 6, 8] {
        let field = FieldSpec::new(m).unwrap();
        let (h, enc) = build_regular(&field, 48, 24, 3, RngSeed(m as u64)).unwrap();
        for _ in 0..100 {
            let info: Vec<GfElem> = (0..enc.k()).map(|_| GfElem(rng.gen_range(0..field.q()) as u16)).collect();
            encodes += 1;
            violations += usize::from(!h.is_codeword(&enc.encode(&field, &info).unwrap()));
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    report(
        "6",
        agreement >= 0.999 && non_ties == 0 && ham_ok == 128 && violations == 0 && secs < 120.0,
        format!(
            "FFT-QSPA vs naive agreement {:.4} over {trials} ({non_ties} non-tie disagreements); Hamming {ham_ok}/128 single errors corrected; {violations} of {encodes} encodes violate H; {secs:.1} s",
            agreement
        ),
    );
}

/// Carry-less multiply reduced by `poly`.
fn poly_mul(a: u32, b: u32, m: u32, poly: u32) -> u32 {
    let mut acc = 0u32;
    for i in 0..m {
        if (b >> i) & 1 == 1 {
            acc ^= a << i;
        }
    }
    for bit in (m..2 * m).rev() {
        if (acc >> bit) & 1 == 1 {
            acc ^= poly << (bit - m);
        }
    }
    acc
}

fn axioms_hold(f: &FieldSpec, a: GfElem, b: GfElem, c: GfElem) -> bool {
    let (add, mul) = (|x, y| f.add(x, y), |x, y| f.mul(x, y));
    add(a, b) == add(b, a)
        && mul(a, b) == mul(b, a)
        && add(add(a, b), c) == add(a, add(b, c))
        && mul(mul(a, b), c) == mul(a, mul(b, c))
        && mul(a, add(b, c)) == add(mul(a, b), mul(a, c))
        && add(a, GfElem::ZERO) == a
        && mul(a, GfElem::ONE) == a
        && add(a, a) == GfElem::ZERO
        && (a == GfElem::ZERO || mul(a, f.inv(a).unwrap()) == GfElem::ONE)
}

#[test]
fn c7_field_axioms() {
    let t0 = Instant::now();
    let f16 = FieldSpec::new(4).unwrap();
    let els: Vec<GfElem> = f16.elements().collect();
    let mut bad16 = 0;
    for &a in &els {
        for &b in &els {
            for &c in &els {
                bad16 += usize::from(!axioms_hold(&f16, a, b, c));
            }
        }
    }
    let f256 = FieldSpec::new(8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let mut bad256 = 0;
    for _ in 0..100_000 {
        let mut g = || GfElem(rng.gen_range(0..256));
        let (a, b, c) = (g(), g(), g());
        bad256 += usize::from(!axioms_hold(&f256, a, b, c));
    }
    let poly = f256.primitive_poly();
    let mut table_bad = 0;
    for a in 0..256u32 {
        for b in 0..256u32 {
            let t = f256.mul(GfElem(a as u16), GfElem(b as u16)).0 as u32;
            table_bad += usize::from(t != poly_mul(a, b, 8, poly));
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    report(
        "7",
        els.len() == 16 && bad16 == 0 && bad256 == 0 && table_bad == 0 && secs < 60.0,
        format!("GF(16) {} triples failing: {bad16}; GF(256) 1e5 random triples failing: {bad256}; table vs reduction mismatches {table_bad}/65536 (poly {poly:#x}); {secs:.1} s", els.len().pow(3)),
    );
}

#[test]
fn c8_determinism() {
    let profiles: Vec<_> = load_profiles(&default_profile_dir()).unwrap().into_iter().take(2).collect();
    let mut col = ExperimentSpec::new(Experiment::Collision);
    col.trials = 300;
    let mut awgn = ExperimentSpec::new(Experiment::AwgnBer);
    awgn.trials = 8;
    awgn.snr_list_db = vec![Some(-16.0), Some(-12.0)];
    let mut mp = ExperimentSpec::new(Experiment::Multipath);
    mp.trials = 3;
    mp.snr_list_db = vec![Some(-8.0), Some(5.0)];
    let dir = std::env::temp_dir().join(format!("uwchirp-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut identical = Vec::new();
    for spec in [col, awgn, mp] {
        let paths: Vec<_> = (0..2).map(|i| dir.join(format!("{}-{i}.csv", spec.experiment))).collect();
        for p in &paths {
            emit_csv(&run_experiment(&spec, &profiles).unwrap(), p).unwrap();
        }
        let a = std::fs::read(&paths[0]).unwrap();
        let b = std::fs::read(&paths[1]).unwrap();
        let text_again = to_csv(&run_experiment(&spec, &profiles).unwrap());
        identical.push((spec.experiment, a == b && a == text_again.as_bytes() && !a.is_empty()));
    }
    std::fs::remove_dir_all(&dir).ok();
    report(
        "8",
        identical.iter().all(|x| x.1),
        format!("byte-identical reruns: {identical:?}"),
    );
}
