mod common;

use std::collections::HashMap;

use num_complex::Complex64;
use pdq::config::digit_decompose;
use pdq::engine::PlainOrigin;
use pdq::query::{atom, atom_const, evaluate, filter, Answer};
use pdq::{run_local, Aggregator, CmpOp, Engine, EncryptedColumn, PdqConfig, QuerySpec};
use rnsfhe::ckks;
use rnsfhe::{Ciphertext, PoolConfig, Rng};

use common::{context, setup, Setup};

fn decrypt_complex(s: &Setup, ct: &Ciphertext) -> Vec<Complex64> {
    let ctx = s.client.context();
    ckks::decode(ctx, &ckks::decrypt(ctx, ct, s.client.secret_key()).unwrap()).unwrap()
}

fn indicator_error(got: &[f64], want: &[bool]) -> f64 {
    want.iter().zip(got).map(|(&b, &x)| (x - b as u8 as f64).abs()).fold(0.0, f64::max)
}

#[test]
fn digit_encodings_sit_on_the_unit_circle() {
    let s = setup(100, 2);
    let cfg = s.client.config().clone();
    let col = &s.cols["a"];
    for (j, ct) in col.digits.iter().enumerate() {
        let z = decrypt_complex(&s, ct);
        for (r, &v) in s.table["a"].iter().enumerate() {
            let d = digit_decompose(v, cfg.p, cfg.k).unwrap()[j];
            let want = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_2 * d as f64);
            assert!((z[r] - want).norm() < 1e-6, "row {r} digit {j}");
            assert!((z[r].norm() - 1.0).abs() < 1e-6);
        }
        assert!(z[100..].iter().all(|x| x.norm() < 1e-6));
    }
}

#[test]
fn single_digit_predicates() {
    let s = setup(256, 3);
    let (a, b) = (&s.cols["a"], &s.cols["b"]);
    let da: Vec<u64> = s.table["a"].iter().map(|&v| v % 4).collect();
    let db: Vec<u64> = s.table["b"].iter().map(|&v| v % 4).collect();
    let eq = s.client.decrypt_slots(&s.engine.eq_from_digits(&a.digits[0], &b.digits[0]).unwrap()).unwrap();
    let lt = s.client.decrypt_slots(&s.engine.lt_from_digits(&a.digits[0], &b.digits[0]).unwrap()).unwrap();
    let want_eq: Vec<bool> = da.iter().zip(&db).map(|(x, y)| x == y).collect();
    let want_lt: Vec<bool> = da.iter().zip(&db).map(|(x, y)| x < y).collect();
    assert!(want_eq.iter().any(|&x| x) && want_lt.iter().any(|&x| x));
    assert!(indicator_error(&eq, &want_eq) < 1e-4);
    assert!(indicator_error(&lt, &want_lt) < 1e-4);
}

fn tied_setup() -> (Setup, EncryptedColumn, EncryptedColumn, Vec<u64>, Vec<u64>) {
    let mut s = setup(512, 4);
    let x = s.table["a"].clone();
    let mut rng = Rng::seed_from_u64(44);
    // equal, off by one, or unrelated
    let y: Vec<u64> = x
        .iter()
        .zip(&s.table["b"])
        .map(|(&v, &w)| match rng.below(4) {
            0 => v,
            1 => (v + 1).min(65535),
            2 => v.saturating_sub(1),
            _ => w,
        })
        .collect();
    let cx = s.client.encrypt_column("x", &x, false).unwrap();
    let cy = s.client.encrypt_column("y", &y, false).unwrap();
    (s, cx, cy, x, y)
}

#[test]
fn column_comparisons_for_every_operator() {
    let (s, cx, cy, x, y) = tied_setup();
    assert!(x.iter().zip(&y).any(|(a, b)| a == b));
    for op in [CmpOp::Lt, CmpOp::Le, CmpOp::Eq, CmpOp::Ne] {
        let got = s.client.decrypt_slots(&s.engine.compare_columns(&cx, &cy, op, true, true).unwrap()).unwrap();
        let want: Vec<bool> = x.iter().zip(&y).map(|(&a, &b)| op.holds(a, b)).collect();
        let err = indicator_error(&got, &want);
        assert!(err < 1e-3, "{op:?}: {err}");
    }
}

#[test]
fn compound_predicates_with_constants() {
    let mut s = setup(256, 5);
    let mut rng = Rng::seed_from_u64(1);
    let cases = [
        atom_const("a", CmpOp::Lt, 30000).or(atom("d", CmpOp::Eq, "e")),
        atom("b", CmpOp::Le, "c").negate(),
        atom_const("c", CmpOp::Ne, s.table["c"][7]).and(atom_const("a", CmpOp::Le, 40000)),
    ];
    for pred in cases {
        let spec = QuerySpec { predicate: pred.clone(), aggregator: Aggregator::Index };
        let r = run_local(&s.engine, &s.cols, &mut s.client, &spec, &mut rng).unwrap();
        let want = filter(&pred, &s.table, 256).unwrap();
        assert!(want.iter().any(|&b| b) && want.iter().any(|&b| !b));
        assert!(indicator_error(&r.slots, &want) < 1e-3, "{pred:?}");
        assert_eq!(r.answer, pdq::client::Decoded::Index(want));
    }
}

#[test]
fn standard_queries_match_oracle() {
    let mut s = setup(1024, 1);
    let mut rng = Rng::seed_from_u64(5);
    for q in 1..=4 {
        let spec = QuerySpec::standard(q).unwrap();
        let r = run_local(&s.engine, &s.cols, &mut s.client, &spec, &mut rng).unwrap();
        match evaluate(&spec, &s.table, 1024).unwrap() {
            Answer::Index(w) => {
                assert_eq!(r.answer, pdq::client::Decoded::Index(w.clone()));
                assert!(indicator_error(&r.slots, &w) < 1e-3);
            }
            Answer::Sum(w) => assert!((r.slots[0] - w).abs() <= 1e-3 * w, "sum {} vs {w}", r.slots[0]),
            Answer::Avg(w) => {
                let w = w.expect("rows match");
                assert!(r.flagged.is_empty());
                assert!((r.slots[0] - w).abs() <= 1e-3 * w, "avg {} vs {w}", r.slots[0]);
            }
            Answer::DivSquare(w) => {
                for (i, (wv, &x)) in w.iter().zip(&r.slots).enumerate() {
                    match wv {
                        Some(wv) => assert!((x - wv).abs() <= 1e-3 * wv, "row {i}: {x} vs {wv}"),
                        None => assert!(x.abs() < 1e-6, "row {i}: {x}"),
                    }
                }
            }
        }
    }
}

#[test]
fn empty_average_is_flagged() {
    let mut s = setup(1024, 6);
    let mut rng = Rng::seed_from_u64(6);
    // every value is at least 1
    let spec = QuerySpec { predicate: atom_const("b", CmpOp::Lt, 1), aggregator: Aggregator::Avg("a".into()) };
    assert_eq!(evaluate(&spec, &s.table, 1024).unwrap(), Answer::Avg(None));
    let r = run_local(&s.engine, &s.cols, &mut s.client, &spec, &mut rng).unwrap();
    assert_eq!(r.answer, pdq::client::Decoded::Avg { value: 0.0, empty: true });
    assert_eq!(r.flagged.len(), s.client.context().slots());
    let seen = s.client.seen().last().unwrap();
    let worst = seen.iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(worst < s.client.config().mask_min / 2.0, "masked count noise {worst:e}");
}

fn encrypt_at(s: &mut Setup, v: &[f64], level: usize) -> Ciphertext {
    let ctx = s.client.context().clone();
    let pt = ckks::encode_real(&ctx, v, ctx.default_scale(), ctx.max_level()).unwrap();
    let ct = ckks::encrypt(&ctx, &pt, s.client.public_key(), &mut Rng::seed_from_u64(level as u64)).unwrap();
    s.engine.lower(&ct, level).unwrap()
}

fn inverse_of(s: &mut Setup, x: &Ciphertext, rng: &mut Rng) -> Vec<f64> {
    let th = s.client.config().reciprocal_threshold;
    let Setup { client, engine, .. } = s;
    let mut f = |c1: Ciphertext| client.reciprocal(&c1, th).map(|(y, _)| y);
    let y = engine.inverse(x, rng, &mut f).unwrap();
    s.client.decrypt_slots(&y).unwrap()
}

#[test]
fn two_party_inverse() {
    let mut s = setup(1024, 7);
    let slots = s.client.context().slots();
    let mut rng = Rng::seed_from_u64(70);
    let mut x: Vec<f64> = (0..slots).map(|_| 1.0 + rng.below(65535) as f64).collect();
    x[0] = 4.0;
    x[1] = 1.0;
    for level in [s.client.context().max_level(), 5, 3] {
        let ct = encrypt_at(&mut s, &x, level);
        let inv = inverse_of(&mut s, &ct, &mut rng);
        assert!((inv[0] - 0.25).abs() < 1e-6);
        assert!((inv[1] - 1.0).abs() < 1e-6);
        let worst = inv.iter().zip(&x).map(|(a, b)| (a * b - 1.0).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-4, "level {level}: {worst:e}");
    }
}

#[test]
fn mask_hides_the_input() {
    let mut s = setup(64, 8);
    let slots = s.client.context().slots();
    let mut rng = Rng::seed_from_u64(80);
    let ct = encrypt_at(&mut s, &vec![1.0; slots], 6);
    inverse_of(&mut s, &ct, &mut rng);
    let seen = s.client.seen()[0].clone();
    let cfg = s.client.config();
    let neg = seen.iter().filter(|&&v| v < 0.0).count() as f64 / slots as f64;
    assert!((0.45..0.55).contains(&neg), "{neg}");
    let mags: Vec<f64> = seen.iter().map(|v| v.abs()).collect();
    assert!(mags.iter().all(|&m| m >= cfg.mask_min * 0.999 && m <= cfg.mask_max * 1.001));
    let mean = mags.iter().sum::<f64>() / slots as f64;
    assert!((mean - (cfg.mask_min + cfg.mask_max) / 2.0).abs() < 8.0, "{mean}");
    let distinct = {
        let mut m = mags.clone();
        m.sort_by(f64::total_cmp);
        m.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        m.len()
    };
    assert!(distinct > slots * 9 / 10);
}

#[test]
fn server_plaintexts_do_not_depend_on_data() {
    let mut traces = Vec::new();
    for seed in [9, 10] {
        let mut s = setup(128, seed);
        let mut rng = Rng::seed_from_u64(seed);
        for q in [3, 4] {
            run_local(&s.engine, &s.cols, &mut s.client, &QuerySpec::standard(q).unwrap(), &mut rng).unwrap();
        }
        let t = s.engine.trace();
        assert!(t.contains(&PlainOrigin::Mask) && t.contains(&PlainOrigin::Validity));
        traces.push(t);
    }
    assert_eq!(traces[0], traces[1]);
}

#[test]
fn power_bases_are_cached() {
    let mut s = setup(128, 11);
    let mut rng = Rng::seed_from_u64(11);
    let spec = QuerySpec::standard(1).unwrap();
    let first = run_local(&s.engine, &s.cols, &mut s.client, &spec, &mut rng).unwrap();
    let built = s.engine.powers_built();
    assert_eq!(built, 4 * 8);
    let second = run_local(&s.engine, &s.cols, &mut s.client, &spec, &mut rng).unwrap();
    assert_eq!(s.engine.powers_built(), built);
    assert_eq!(first.answer, second.answer);
    s.engine.invalidate("a");
    run_local(&s.engine, &s.cols, &mut s.client, &spec, &mut rng).unwrap();
    assert_eq!(s.engine.powers_built(), built + 8);
}

#[test]
fn lane_count_does_not_change_ciphertexts() {
    let cfg = PdqConfig::desk().with_rows(64);
    let values: Vec<u64> = (0..64).map(|i| i * 997 % 65536).collect();
    let other: Vec<u64> = values.iter().rev().cloned().collect();
    let mut outs = Vec::new();
    for lanes in [1, 4] {
        let ctx = rnsfhe::context::Context::new(context().params().clone(), PoolConfig::desk().with_lanes(lanes)).unwrap();
        let mut client = pdq::Client::new(ctx.clone(), cfg.clone(), 3).unwrap();
        let engine = Engine::new(ctx, client.relin_key().clone(), client.galois_keys().clone(), cfg.clone()).unwrap();
        let mut cols = HashMap::new();
        cols.insert("x".to_string(), client.encrypt_column("x", &values, true).unwrap());
        cols.insert("y".to_string(), client.encrypt_column("y", &other, true).unwrap());
        let spec = QuerySpec { predicate: atom("x", CmpOp::Le, "y"), aggregator: Aggregator::Sum("x".into()) };
        let mut inv = |_: Ciphertext| -> pdq::Result<Ciphertext> { unreachable!() };
        outs.push(engine.run(&spec, &cols, &[], &mut Rng::seed_from_u64(1), &mut inv).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
}
