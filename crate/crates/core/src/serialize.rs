//! Little-endian binary format shared by parameters, keys, ciphertexts and
//! plaintexts:
//!
//! `"CATF" | version u16 | kind u8 | scheme u8 | n u32 | L u16 | moduli u64 x L |
//! kind header | body u64 words | CRC32`
//!
//! Polynomial headers carry `flags u8 | size_poly u16 | [scale f64 (CKKS)] |
//! level u16 | domain bitmap u32`. With the compact flag, the uniform `a`
//! halves of keys are replaced by their 32-byte seed.

use std::sync::Arc;

use crate::ciphertext::{Ciphertext, Plaintext};
use crate::context::{Context, EncryptionParams, Scheme};
use crate::error::{Error, Result};
use crate::keys::{expand_uniform, GaloisKeys, KeySwitchKey, PublicKey, RelinKey, SecretKey, Seed};
use crate::math::modulus::Modulus;
use crate::math::ntt::NttPolicy;
use crate::poly::cdata::{CData, Domain};

pub const MAGIC: [u8; 4] = *b"CATF";
pub const VERSION: u16 = 1;
const FLAG_COMPACT: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Kind {
    Params = 0,
    PublicKey = 1,
    SecretKey = 2,
    RelinKey = 3,
    GaloisKey = 4,
    Ciphertext = 5,
    Plaintext = 6,
}

impl Kind {
    fn from_u8(v: u8) -> Result<Self> {
        Ok(match v {
            0 => Kind::Params,
            1 => Kind::PublicKey,
            2 => Kind::SecretKey,
            3 => Kind::RelinKey,
            4 => Kind::GaloisKey,
            5 => Kind::Ciphertext,
            6 => Kind::Plaintext,
            _ => return Err(Error::Format(format!("unknown object kind {v}"))),
        })
    }
}

#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn bytes(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(v);
    }
    fn words(&mut self, v: &[u64]) {
        self.buf.reserve(v.len() * 8);
        for &w in v {
            self.u64(w);
        }
    }
    fn finish(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.buf);
        self.u32(crc);
        self.buf
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < k {
            return Err(Error::Format(format!("truncated at byte {} (need {k} more)", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn words_into(&mut self, out: &mut [u64]) -> Result<()> {
        let raw = self.take(out.len() * 8)?;
        for (w, c) in out.iter_mut().zip(raw.chunks_exact(8)) {
            *w = u64::from_le_bytes(c.try_into().expect("8 bytes"));
        }
        Ok(())
    }
    fn done(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

fn write_preamble(w: &mut Writer, kind: Kind, scheme: Scheme, n: usize, moduli: &[u64]) {
    w.bytes(&MAGIC);
    w.u16(VERSION);
    w.u8(kind as u8);
    w.u8(scheme.code());
    w.u32(n as u32);
    w.u16(moduli.len() as u16);
    for &q in moduli {
        w.u64(q);
    }
}

struct Preamble {
    kind: Kind,
    scheme: Scheme,
    n: usize,
    moduli: Vec<u64>,
}

/// Checks magic, version and checksum; returns a reader over the payload
/// (checksum stripped) positioned after the preamble.
fn open(bytes: &[u8]) -> Result<(Preamble, Reader<'_>)> {
    if bytes.len() < 4 + 2 + 1 + 1 + 4 + 2 + 4 {
        return Err(Error::Format(format!("truncated: {} bytes", bytes.len())));
    }
    if bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let crc = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    if crc32fast::hash(body) != crc {
        return Err(Error::Checksum);
    }
    let mut r = Reader { buf: body, pos: 6 };
    let kind = Kind::from_u8(r.u8()?)?;
    let scheme = Scheme::from_code(r.u8()?)?;
    let n = r.u32()? as usize;
    let l = r.u16()? as usize;
    let moduli = (0..l).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
    Ok((Preamble { kind, scheme, n, moduli }, r))
}

fn expect_kind(p: &Preamble, kind: Kind) -> Result<()> {
    if p.kind != kind {
        return Err(Error::Format(format!("expected {kind:?}, found {:?}", p.kind)));
    }
    Ok(())
}

fn check_context(p: &Preamble, ctx: &Context) -> Result<()> {
    if p.scheme != ctx.scheme() || p.n != ctx.n() || p.moduli != ctx.params().coeff_moduli {
        return Err(Error::Format("object was written under different parameters".into()));
    }
    Ok(())
}

fn domain_bitmap(cd: &CData) -> u32 {
    cd.domains()
        .iter()
        .enumerate()
        .fold(0, |acc, (p, d)| if *d == Domain::Evaluation { acc | 1 << p } else { acc })
}

fn write_poly_header(w: &mut Writer, flags: u8, cd: &CData, scale: Option<f64>) {
    w.u8(flags);
    w.u16(cd.size_poly() as u16);
    if let Some(s) = scale {
        w.f64(s);
    }
    w.u16(cd.size_modulus() as u16);
    w.u32(domain_bitmap(cd));
}

struct PolyHeader {
    flags: u8,
    size_poly: usize,
    scale: f64,
    level: usize,
    bitmap: u32,
}

fn read_poly_header(r: &mut Reader<'_>, with_scale: bool) -> Result<PolyHeader> {
    let flags = r.u8()?;
    let size_poly = r.u16()? as usize;
    let scale = if with_scale { r.f64()? } else { 1.0 };
    let level = r.u16()? as usize;
    let bitmap = r.u32()?;
    if size_poly == 0 || size_poly > 32 {
        return Err(Error::Format(format!("size_poly {size_poly}")));
    }
    Ok(PolyHeader { flags, size_poly, scale, level, bitmap })
}

fn read_cdata(ctx: &Context, r: &mut Reader<'_>, h: &PolyHeader, max_level: usize) -> Result<CData> {
    if h.level == 0 || h.level > max_level {
        return Err(Error::Format(format!("level {} outside 1..={max_level}", h.level)));
    }
    let mut cd = CData::new_uninit(ctx.pool(), h.size_poly, h.level, ctx.n())?;
    r.words_into(cd.data_mut())?;
    let n = ctx.n();
    for (k, row) in cd.rows().enumerate() {
        let q = ctx.key_tables()[k % h.level].modulus().value();
        if row.iter().any(|&x| x >= q) {
            return Err(Error::Format(format!("residue out of range in row {k}")));
        }
    }
    debug_assert_eq!(cd.size(), h.size_poly * h.level * n);
    for p in 0..h.size_poly {
        let d = if h.bitmap >> p & 1 == 1 { Domain::Evaluation } else { Domain::Coefficient };
        cd.set_domain(p, d);
    }
    Ok(cd)
}

/// Objects that serialize under a context.
pub trait Wire: Sized {
    const KIND: Kind;
    fn write_body(&self, ctx: &Context, w: &mut Writer, compact: bool);
    fn read_body(ctx: &Arc<Context>, r: &mut Reader<'_>) -> Result<Self>;
}

pub fn serialize<T: Wire>(ctx: &Context, obj: &T) -> Vec<u8> {
    encode(ctx, obj, false)
}

/// Like [`serialize`], but keys store seeds instead of their uniform halves.
pub fn serialize_compact<T: Wire>(ctx: &Context, obj: &T) -> Vec<u8> {
    encode(ctx, obj, true)
}

fn encode<T: Wire>(ctx: &Context, obj: &T, compact: bool) -> Vec<u8> {
    let mut w = Writer::default();
    write_preamble(&mut w, T::KIND, ctx.scheme(), ctx.n(), &ctx.params().coeff_moduli);
    obj.write_body(ctx, &mut w, compact);
    w.finish()
}

pub fn deserialize<T: Wire>(ctx: &Arc<Context>, bytes: &[u8]) -> Result<T> {
    let (p, mut r) = open(bytes)?;
    expect_kind(&p, T::KIND)?;
    check_context(&p, ctx)?;
    let obj = T::read_body(ctx, &mut r)?;
    r.done()?;
    Ok(obj)
}

/// Kind recorded in a serialized object, after integrity checks.
pub fn peek_kind(bytes: &[u8]) -> Result<Kind> {
    Ok(open(bytes)?.0.kind)
}

pub fn serialize_params(params: &EncryptionParams) -> Vec<u8> {
    let mut w = Writer::default();
    write_preamble(&mut w, Kind::Params, params.scheme, params.n, &params.coeff_moduli);
    w.u64(params.special_modulus);
    w.u64(params.plain_modulus.unwrap_or(0));
    w.f64(params.default_scale.unwrap_or(f64::NAN));
    w.u8(match params.ntt_policy {
        NttPolicy::Auto => 0,
        NttPolicy::ForceBm => 1,
        NttPolicy::ForceMm => 2,
    });
    w.finish()
}

pub fn deserialize_params(bytes: &[u8]) -> Result<EncryptionParams> {
    let (p, mut r) = open(bytes)?;
    expect_kind(&p, Kind::Params)?;
    let special_modulus = r.u64()?;
    let t = r.u64()?;
    let scale = r.f64()?;
    let ntt_policy = match r.u8()? {
        0 => NttPolicy::Auto,
        1 => NttPolicy::ForceBm,
        2 => NttPolicy::ForceMm,
        v => return Err(Error::Format(format!("unknown NTT policy {v}"))),
    };
    r.done()?;
    Ok(EncryptionParams {
        scheme: p.scheme,
        n: p.n,
        coeff_moduli: p.moduli,
        special_modulus,
        plain_modulus: (t != 0).then_some(t),
        default_scale: (!scale.is_nan()).then_some(scale),
        ntt_policy,
    })
}

impl Wire for Ciphertext {
    const KIND: Kind = Kind::Ciphertext;

    fn write_body(&self, ctx: &Context, w: &mut Writer, _compact: bool) {
        let ckks = ctx.scheme() == Scheme::Ckks;
        write_poly_header(w, 0, &self.data, ckks.then_some(self.scale));
        if ctx.scheme() == Scheme::Bgv {
            w.u64(self.correction);
        }
        w.words(self.data.data());
    }

    fn read_body(ctx: &Arc<Context>, r: &mut Reader<'_>) -> Result<Self> {
        let scheme = ctx.scheme();
        let h = read_poly_header(r, scheme == Scheme::Ckks)?;
        let correction = if scheme == Scheme::Bgv { r.u64()? } else { 1 };
        let data = read_cdata(ctx, r, &h, ctx.max_level())?;
        Ok(Ciphertext::new(data, h.scale, correction, scheme))
    }
}

impl Wire for Plaintext {
    const KIND: Kind = Kind::Plaintext;

    fn write_body(&self, ctx: &Context, w: &mut Writer, _compact: bool) {
        let ckks = ctx.scheme() == Scheme::Ckks;
        write_poly_header(w, 0, &self.data, ckks.then_some(self.scale));
        w.u8(self.batched as u8);
        w.words(self.data.data());
    }

    fn read_body(ctx: &Arc<Context>, r: &mut Reader<'_>) -> Result<Self> {
        let scheme = ctx.scheme();
        let h = read_poly_header(r, scheme == Scheme::Ckks)?;
        let batched = r.u8()? != 0;
        if h.size_poly != 1 {
            return Err(Error::Format("plaintexts hold one polynomial".into()));
        }
        let data = read_cdata(ctx, r, &h, ctx.max_level())?;
        Ok(Plaintext::new(data, h.scale, scheme, batched))
    }
}

impl Wire for SecretKey {
    const KIND: Kind = Kind::SecretKey;

    fn write_body(&self, _ctx: &Context, w: &mut Writer, _compact: bool) {
        write_poly_header(w, 0, &self.eval, None);
        let packed: Vec<u8> = self.coeffs.iter().map(|&c| c as u8).collect();
        w.bytes(&packed);
        w.words(self.eval.data());
    }

    fn read_body(ctx: &Arc<Context>, r: &mut Reader<'_>) -> Result<Self> {
        let h = read_poly_header(r, false)?;
        let coeffs: Vec<i8> = r.take(ctx.n())?.iter().map(|&b| b as i8).collect();
        if coeffs.iter().any(|c| !(-1..=1).contains(c)) {
            return Err(Error::Format("secret coefficient outside {-1, 0, 1}".into()));
        }
        let eval = read_cdata(ctx, r, &h, ctx.max_level() + 1)?;
        Ok(SecretKey { coeffs, eval })
    }
}

/// Writes `(b, a)` pairs; compact form keeps only `b` and the seed.
fn write_pair(w: &mut Writer, cd: &CData, compact: bool) {
    if compact {
        w.words(cd.poly(0));
    } else {
        w.words(cd.data());
    }
}

fn read_pair(
    ctx: &Context,
    r: &mut Reader<'_>,
    h: &PolyHeader,
    seed: &Seed,
    stream: u64,
    moduli: &[Modulus],
    max_level: usize,
) -> Result<CData> {
    if h.size_poly != 2 {
        return Err(Error::Format("key pairs hold two polynomials".into()));
    }
    if h.flags & FLAG_COMPACT == 0 {
        return read_cdata(ctx, r, h, max_level);
    }
    if h.level != moduli.len() {
        return Err(Error::Format(format!("compact key with {} rows, expected {}", h.level, moduli.len())));
    }
    let n = ctx.n();
    let mut cd = CData::new_uninit(ctx.pool(), 2, h.level, n)?;
    r.words_into(cd.poly_mut(0))?;
    expand_uniform(seed, stream, moduli, n, cd.poly_mut(1));
    cd.set_all_domains(Domain::Evaluation);
    Ok(cd)
}

impl Wire for PublicKey {
    const KIND: Kind = Kind::PublicKey;

    fn write_body(&self, _ctx: &Context, w: &mut Writer, compact: bool) {
        write_poly_header(w, if compact { FLAG_COMPACT } else { 0 }, &self.data, None);
        w.bytes(&self.seed);
        write_pair(w, &self.data, compact);
    }

    fn read_body(ctx: &Arc<Context>, r: &mut Reader<'_>) -> Result<Self> {
        let h = read_poly_header(r, false)?;
        let seed: Seed = r.take(32)?.try_into().expect("32 bytes");
        let data = read_pair(ctx, r, &h, &seed, 0, ctx.moduli(), ctx.max_level())?;
        Ok(PublicKey { data, seed })
    }
}

fn write_ksk(w: &mut Writer, k: &KeySwitchKey, compact: bool) {
    w.bytes(&k.seed);
    w.u16(k.digits.len() as u16);
    for d in &k.digits {
        write_poly_header(w, if compact { FLAG_COMPACT } else { 0 }, d, None);
        write_pair(w, d, compact);
    }
}

fn read_ksk(ctx: &Context, r: &mut Reader<'_>) -> Result<KeySwitchKey> {
    let seed: Seed = r.take(32)?.try_into().expect("32 bytes");
    let count = r.u16()? as usize;
    if count > ctx.max_level() {
        return Err(Error::Format(format!("{count} digits for {} moduli", ctx.max_level())));
    }
    let moduli: Vec<Modulus> = ctx.key_tables().iter().map(|t| *t.modulus()).collect();
    let digits = (0..count)
        .map(|i| {
            let h = read_poly_header(r, false)?;
            read_pair(ctx, r, &h, &seed, i as u64, &moduli, ctx.max_level() + 1)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KeySwitchKey { digits, seed })
}

impl Wire for RelinKey {
    const KIND: Kind = Kind::RelinKey;

    fn write_body(&self, _ctx: &Context, w: &mut Writer, compact: bool) {
        write_ksk(w, &self.0, compact);
    }

    fn read_body(ctx: &Arc<Context>, r: &mut Reader<'_>) -> Result<Self> {
        Ok(RelinKey(read_ksk(ctx, r)?))
    }
}

impl Wire for GaloisKeys {
    const KIND: Kind = Kind::GaloisKey;

    fn write_body(&self, _ctx: &Context, w: &mut Writer, compact: bool) {
        w.u32(self.keys.len() as u32);
        for (&g, k) in &self.keys {
            w.u64(g);
            write_ksk(w, k, compact);
        }
    }

    fn read_body(ctx: &Arc<Context>, r: &mut Reader<'_>) -> Result<Self> {
        let count = r.u32()? as usize;
        let mut out = GaloisKeys::default();
        for _ in 0..count {
            let g = r.u64()?;
            if g % 2 == 0 || g >= 2 * ctx.n() as u64 {
                return Err(Error::Format(format!("invalid Galois element {g}")));
            }
            out.insert(g, read_ksk(ctx, r)?);
        }
        Ok(out)
    }
}
