use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rnsfhe::ckks::{self, encoder::SpecialFft, MulMode};
use rnsfhe::context::{Context, EncryptionParams, Profile, Scheme};
use rnsfhe::keys::{galois_keygen, keygen, pk_gen, relin_keygen};
use rnsfhe::pool::PoolConfig;
use rnsfhe::{Error, Rng as FheRng};

/// Slot `c` of real coefficients `m`: `sum_i m_i exp(i pi g_c i / n)`, `g_c = 5^c mod 2n`.
fn naive_slots(m: &[f64]) -> Vec<Complex64> {
    let n = m.len();
    let mut g = 1usize;
    (0..n / 2)
        .map(|_| {
            let z: Complex64 = m
                .iter()
                .enumerate()
                .map(|(i, &c)| Complex64::from_polar(c, PI * ((g * i) % (2 * n)) as f64 / n as f64))
                .sum();
            g = g * 5 % (2 * n);
            z
        })
        .collect()
}

fn rand_complex(rng: &mut ChaCha8Rng, k: usize) -> Vec<Complex64> {
    (0..k).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn max_norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

struct Fixture {
    ctx: Arc<Context>,
    sk: rnsfhe::SecretKey,
    pk: rnsfhe::PublicKey,
    rlk: rnsfhe::RelinKey,
    rng: FheRng,
}

fn fixture(profile: Profile) -> Fixture {
    let params = EncryptionParams::for_profile(profile, Scheme::Ckks).unwrap();
    let ctx = Context::new(params, PoolConfig::desk()).unwrap();
    let mut rng = FheRng::seed_from_u64(7);
    let sk = keygen(&ctx, &mut rng).unwrap();
    let pk = pk_gen(&ctx, &sk, &mut rng).unwrap();
    let rlk = relin_keygen(&ctx, &sk, &mut rng).unwrap();
    Fixture { ctx, sk, pk, rlk, rng }
}

#[test]
fn special_fft_matches_naive_embedding() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for log_n in 2..=9 {
        let n = 1usize << log_n;
        let m: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let fft = SpecialFft::new(n);
        let mut w: Vec<Complex64> = (0..n / 2).map(|i| Complex64::new(m[i], m[i + n / 2])).collect();
        fft.forward(&mut w);
        let want = naive_slots(&m);
        assert!(max_diff(&w, &want) < 1e-9 * n as f64, "n={n}");
        fft.inverse(&mut w);
        for i in 0..n / 2 {
            assert!((w[i].re - m[i]).abs() < 1e-9 && (w[i].im - m[i + n / 2]).abs() < 1e-9);
        }
    }
}

#[test]
fn encode_decode_round_trip_precision() {
    // n = 8192 with scale 2^30
    let params = EncryptionParams::for_profile(Profile::Desk8k, Scheme::Ckks).unwrap();
    let ctx = Context::new(params, PoolConfig::desk()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let v = rand_complex(&mut rng, ctx.slots());
    let pt = ckks::encode(&ctx, &v, 2f64.powi(30), ctx.max_level()).unwrap();
    let back = ckks::decode(&ctx, &pt).unwrap();
    let err = max_diff(&v, &back) / max_norm(&v);
    assert!(err <= 2f64.powi(-20), "relative error {err:e}");

    let zero = ckks::encode(&ctx, &[], 2f64.powi(30), 2).unwrap();
    assert!(zero.data().data().iter().all(|&x| x == 0));
    assert_eq!(ckks::decode(&ctx, &zero).unwrap().len(), ctx.slots());
}

#[test]
fn encode_rejects_out_of_range() {
    let f = fixture(Profile::Desk4k);
    let r = ckks::encode_real(&f.ctx, &[1e30], 2f64.powi(36), 1);
    assert!(matches!(r, Err(Error::EncodeRange(_))));
    let too_many = vec![Complex64::new(0.0, 0.0); f.ctx.slots() + 1];
    assert!(ckks::encode(&f.ctx, &too_many, 1.0, 1).is_err());
}

#[test]
fn encrypt_decrypt_precision_and_randomness() {
    let mut f = fixture(Profile::Desk8k);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v = rand_complex(&mut rng, f.ctx.slots());
    let scale = f.ctx.default_scale();
    let pt = ckks::encode(&f.ctx, &v, scale, f.ctx.max_level()).unwrap();
    let a = ckks::encrypt(&f.ctx, &pt, &f.pk, &mut f.rng).unwrap();
    let b = ckks::encrypt(&f.ctx, &pt, &f.pk, &mut f.rng).unwrap();
    assert_ne!(a.data(), b.data());
    let err = ckks::max_error(&f.ctx, &a, &f.sk, &v).unwrap() / max_norm(&v);
    assert!(err <= 2f64.powi(-20), "{err:e}");
    let c = ckks::encrypt_sk(&f.ctx, &pt, &f.sk, &mut f.rng).unwrap();
    assert!(ckks::max_error(&f.ctx, &c, &f.sk, &v).unwrap() <= 2f64.powi(-20));
}

#[test]
fn homomorphism_suite() {
    let mut f = fixture(Profile::Desk8k);
    let ctx = f.ctx.clone();
    let slots = ctx.slots();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let gk = galois_keygen(&ctx, &f.sk, &[1, 5], false, &mut f.rng).unwrap();
    let tol = 1e-4;
    for _ in 0..2 {
        let x = rand_complex(&mut rng, slots);
        let y = rand_complex(&mut rng, slots);
        let l = ctx.max_level();
        let s = ctx.default_scale();
        let px = ckks::encode(&ctx, &x, s, l).unwrap();
        let py = ckks::encode(&ctx, &y, s, l).unwrap();
        let cx = ckks::encrypt(&ctx, &px, &f.pk, &mut f.rng).unwrap();
        let cy = ckks::encrypt(&ctx, &py, &f.pk, &mut f.rng).unwrap();

        let check = |ct: &rnsfhe::Ciphertext, want: &[Complex64], what: &str| {
            let err = ckks::max_error(&ctx, ct, &f.sk, want).unwrap() / max_norm(want).max(1.0);
            assert!(err <= tol, "{what}: {err:e}");
        };

        let sum: Vec<_> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        check(&ckks::add(&ctx, &cx, &cy).unwrap(), &sum, "add");
        let diff: Vec<_> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        check(&ckks::sub(&ctx, &cx, &cy).unwrap(), &diff, "sub");

        let prod: Vec<_> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
        let m = ckks::multiply_relin_rescale(&ctx, &cx, &cy, &f.rlk).unwrap();
        assert_eq!(m.level(), l - 1);
        check(&m, &prod, "multiply");
        check(&ckks::multiply_plain(&ctx, &cx, &py).and_then(|c| ckks::rescale(&ctx, &c)).unwrap(), &prod, "multiply_plain");

        let sq: Vec<_> = x.iter().map(|a| a * a).collect();
        let c = ckks::relinearize(&ctx, &ckks::square(&ctx, &cx).unwrap(), &f.rlk).unwrap();
        check(&ckks::rescale(&ctx, &c).unwrap(), &sq, "square");

        let rot: Vec<_> = (0..slots).map(|i| x[(i + 5) % slots]).collect();
        check(&ckks::rotate(&ctx, &cx, 5, &gk).unwrap(), &rot, "rotate");
    }
}

#[test]
fn fused_and_unfused_are_bit_identical() {
    let mut f = fixture(Profile::Desk4k);
    let ctx = f.ctx.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let x = rand_complex(&mut rng, 8);
        let y = rand_complex(&mut rng, 8);
        let s = ctx.default_scale();
        let cx = ckks::encrypt(&ctx, &ckks::encode(&ctx, &x, s, 3).unwrap(), &f.pk, &mut f.rng).unwrap();
        let cy = ckks::encrypt(&ctx, &ckks::encode(&ctx, &y, s, 3).unwrap(), &f.pk, &mut f.rng).unwrap();
        let a = ckks::multiply(&ctx, &cx, &cy, MulMode::Fused).unwrap();
        let b = ckks::multiply(&ctx, &cx, &cy, MulMode::Unfused).unwrap();
        assert_eq!(a.data().data(), b.data().data());
        assert_eq!(a.scale(), b.scale());
    }
}

#[test]
fn square_equals_self_multiply() {
    let mut f = fixture(Profile::Desk4k);
    let ctx = f.ctx.clone();
    let x = rand_complex(&mut ChaCha8Rng::seed_from_u64(6), 16);
    let cx = ckks::encrypt(&ctx, &ckks::encode(&ctx, &x, ctx.default_scale(), 3).unwrap(), &f.pk, &mut f.rng).unwrap();
    let a = ckks::square(&ctx, &cx).unwrap();
    let b = ckks::multiply(&ctx, &cx, &cx, MulMode::Fused).unwrap();
    assert_eq!(a.data().data(), b.data().data());
}

#[test]
fn depth_chain_stays_accurate() {
    let mut f = fixture(Profile::Desk8k);
    let ctx = f.ctx.clone();
    let slots = ctx.slots();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let depth = ctx.max_level() - 1;
    let vals: Vec<Vec<f64>> = (0..=depth).map(|_| (0..slots).map(|_| rng.gen_range(0.5..1.0)).collect()).collect();
    let s = ctx.default_scale();
    let mut acc = ckks::encrypt(&ctx, &ckks::encode_real(&ctx, &vals[0], s, ctx.max_level()).unwrap(), &f.pk, &mut f.rng).unwrap();
    let mut want = vals[0].clone();
    for v in &vals[1..] {
        let pt = ckks::encode_real(&ctx, v, acc.scale(), acc.level()).unwrap();
        let c = ckks::encrypt(&ctx, &pt, &f.pk, &mut f.rng).unwrap();
        acc = ckks::multiply_relin_rescale(&ctx, &acc, &c, &f.rlk).unwrap();
        want.iter_mut().zip(v).for_each(|(w, x)| *w *= x);
    }
    assert_eq!(acc.level(), 1);
    let got = ckks::decode_real(&ctx, &ckks::decrypt(&ctx, &acc, &f.sk).unwrap()).unwrap();
    let err = want.iter().zip(&got).map(|(a, b)| ((a - b) / a).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-3, "depth {depth}: {err:e}");
}

#[test]
fn scale_and_level_errors() {
    let mut f = fixture(Profile::Desk4k);
    let ctx = f.ctx.clone();
    let s = ctx.default_scale();
    let a = ckks::encrypt(&ctx, &ckks::encode_real(&ctx, &[1.0], s, 3).unwrap(), &f.pk, &mut f.rng).unwrap();
    let b = ckks::encrypt(&ctx, &ckks::encode_real(&ctx, &[1.0], s * 2.0, 3).unwrap(), &f.pk, &mut f.rng).unwrap();
    assert!(matches!(ckks::add(&ctx, &a, &b), Err(Error::Scale(_))));
    let low = ckks::mod_drop_to(&a, 1).unwrap();
    assert!(matches!(ckks::rescale(&ctx, &low), Err(Error::Level(_))));
    assert!(matches!(ckks::add(&ctx, &a, &low), Err(Error::Level(_))));
    assert!(ckks::relinearize(&ctx, &a, &f.rlk).is_err());
}

#[test]
fn plaintext_identities() {
    let mut f = fixture(Profile::Desk4k);
    let ctx = f.ctx.clone();
    let x = rand_complex(&mut ChaCha8Rng::seed_from_u64(8), ctx.slots());
    let s = ctx.default_scale();
    let cx = ckks::encrypt(&ctx, &ckks::encode(&ctx, &x, s, 3).unwrap(), &f.pk, &mut f.rng).unwrap();
    let one = ckks::encode_constant(&ctx, Complex64::new(1.0, 0.0), s, 3).unwrap();
    let m = ckks::multiply_plain(&ctx, &cx, &one).unwrap();
    assert_eq!(m.scale(), s * s);
    assert!(ckks::max_error(&ctx, &m, &f.sk, &x).unwrap() < 1e-4);

    let z = ckks::encrypt(&ctx, &ckks::encode_real(&ctx, &[], s, 3).unwrap(), &f.pk, &mut f.rng).unwrap();
    let p = ckks::multiply_relin_rescale(&ctx, &cx, &z, &f.rlk).unwrap();
    let zeros = vec![Complex64::new(0.0, 0.0); ctx.slots()];
    assert!(ckks::max_error(&ctx, &p, &f.sk, &zeros).unwrap() < 1e-4);

    let c = ckks::add_const(&ctx, &cx, Complex64::new(0.5, -0.25)).unwrap();
    let want: Vec<_> = x.iter().map(|v| v + Complex64::new(0.5, -0.25)).collect();
    assert!(ckks::max_error(&ctx, &c, &f.sk, &want).unwrap() < 1e-4);
}

#[test]
fn rotation_and_conjugation() {
    let mut f = fixture(Profile::Desk4k);
    let ctx = f.ctx.clone();
    let slots = ctx.slots();
    let k = 3i64;
    let gk = galois_keygen(&ctx, &f.sk, &[1, k, slots as i64 - k - 1, -1], true, &mut f.rng).unwrap();
    let ramp: Vec<Complex64> = (0..slots).map(|i| Complex64::new((i % 64) as f64 / 64.0, 0.0)).collect();
    let s = ctx.default_scale();
    let c = ckks::encrypt(&ctx, &ckks::encode(&ctx, &ramp, s, 3).unwrap(), &f.pk, &mut f.rng).unwrap();

    let r1 = ckks::rotate(&ctx, &c, 1, &gk).unwrap();
    let want: Vec<_> = (0..slots).map(|i| ramp[(i + 1) % slots]).collect();
    assert!(ckks::max_error(&ctx, &r1, &f.sk, &want).unwrap() < 1e-4);

    let rl = ckks::rotate(&ctx, &c, -1, &gk).unwrap();
    let want: Vec<_> = (0..slots).map(|i| ramp[(i + slots - 1) % slots]).collect();
    assert!(ckks::max_error(&ctx, &rl, &f.sk, &want).unwrap() < 1e-4);

    // k then slots - k is the identity; compose through 1 + (slots - k - 1)
    let a = ckks::rotate(&ctx, &c, k, &gk).unwrap();
    let b = ckks::rotate(&ctx, &a, slots as i64 - k - 1, &gk).unwrap();
    let id = ckks::rotate(&ctx, &b, 1, &gk).unwrap();
    assert!(ckks::max_error(&ctx, &id, &f.sk, &ramp).unwrap() < 1e-4);

    let conj = ckks::conjugate(&ctx, &c, &gk).unwrap();
    assert!(ckks::max_error(&ctx, &conj, &f.sk, &ramp).unwrap() < 1e-4);
    let z = rand_complex(&mut ChaCha8Rng::seed_from_u64(9), slots);
    let cz = ckks::encrypt(&ctx, &ckks::encode(&ctx, &z, s, 3).unwrap(), &f.pk, &mut f.rng).unwrap();
    let want: Vec<_> = z.iter().map(|v| v.conj()).collect();
    assert!(ckks::max_error(&ctx, &ckks::conjugate(&ctx, &cz, &gk).unwrap(), &f.sk, &want).unwrap() < 1e-4);

    assert!(matches!(ckks::rotate(&ctx, &c, 2, &gk), Err(Error::MissingKey(_))));
    assert!(matches!(galois_keygen(&ctx, &f.sk, &[slots as i64], false, &mut f.rng), Err(Error::Parameter(_))));
}

#[test]
fn precise_embedding_keeps_small_slots() {
    let params = EncryptionParams::for_profile(Profile::Pdq, Scheme::Ckks).unwrap();
    let ctx = Context::new(params, PoolConfig::desk()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    // magnitudes spread log-uniformly over 2^-40 .. 2^8
    let v: Vec<f64> = (0..ctx.slots())
        .map(|_| {
            let e: f64 = rng.gen_range(-40.0..8.0);
            let s = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            s * e.exp2()
        })
        .collect();
    let worst_rel = |got: &[f64]| v.iter().zip(got).map(|(a, b)| ((a - b) / a).abs()).fold(0.0, f64::max);
    let scale = 2f64.powi(80);
    let top = ctx.max_level();

    let pt = ckks::encode_real_precise(&ctx, &v, scale, top).unwrap();
    let back = ckks::decode_real_precise(&ctx, &pt).unwrap();
    assert!(worst_rel(&back) < 1e-9, "{}", worst_rel(&back));
    // binary64 transforms lose the small slots
    let plain = ckks::decode_real(&ctx, &ckks::encode_real(&ctx, &v, scale, top).unwrap()).unwrap();
    assert!(worst_rel(&plain) > 1e-3);

    // agrees with the binary64 path on well-conditioned input
    let z = rand_complex(&mut rng, ctx.slots());
    let a = ckks::decode(&ctx, &ckks::encode_precise(&ctx, &z, 2f64.powi(40), top).unwrap()).unwrap();
    assert!(max_diff(&a, &z) < 1e-9);

    // through encryption at a large scale
    let mut frng = FheRng::seed_from_u64(42);
    let sk = keygen(&ctx, &mut frng).unwrap();
    let pk = pk_gen(&ctx, &sk, &mut frng).unwrap();
    let ct = ckks::encrypt(&ctx, &pt, &pk, &mut frng).unwrap();
    let dec = ckks::decode_real_precise(&ctx, &ckks::decrypt(&ctx, &ct, &sk).unwrap()).unwrap();
    // fresh noise is about 2^14 / 2^80 against a 2^-40 slot
    assert!(worst_rel(&dec) < 1e-6, "{}", worst_rel(&dec));
}
