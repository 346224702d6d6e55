//! Binary container format for parameters, keys and ciphertexts.
//!
//! Every object is wrapped as
//!
//! ```text
//! "HEVF" | version: u16 | kind: u8 | params hash: [u8; 32] | payload
//! ```
//!
//! with all integers little-endian. Polynomials are written as a form byte,
//! the limb count, the limb moduli, then `N` u64 residues per limb. Decoding
//! checks the parameter hash and every modulus against the caller's context.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::ckks::{
    Ciphertext, CkksContext, GaloisKey, GaloisKeys, KeySwitchKey, ParameterSet, PublicKey, RelinKey, SecretKey,
};
use crate::error::{Error, Result};
use crate::ring::{Form, NttTable, RnsPoly};

pub const MAGIC: [u8; 4] = *b"HEVF";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 4 + 2 + 1 + 32;

/// Object kinds below 16 belong to the scheme; protocol messages use 16 and up.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Kind {
    Params = 1,
    PublicKey = 2,
    SecretKey = 3,
    RelinKey = 4,
    GaloisKeys = 5,
    Ciphertext = 6,
}

impl Kind {
    pub fn from_u8(v: u8) -> Option<Self> {
        Some(match v {
            1 => Kind::Params,
            2 => Kind::PublicKey,
            3 => Kind::SecretKey,
            4 => Kind::RelinKey,
            5 => Kind::GaloisKeys,
            6 => Kind::Ciphertext,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Header {
    pub version: u16,
    pub kind: u8,
    pub params_hash: [u8; 32],
}

/// Appends little-endian primitives to a buffer.
#[derive(Default, Debug)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts a container with the given header.
    pub fn with_header(kind: u8, params_hash: &[u8; 32]) -> Self {
        let mut w = Self::new();
        w.bytes(&MAGIC);
        w.u16(FORMAT_VERSION);
        w.u8(kind);
        w.bytes(params_hash);
        w
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    /// u32 length prefix followed by the bytes.
    pub fn blob(&mut self, b: &[u8]) {
        self.u32(b.len() as u32);
        self.bytes(b);
    }

    pub fn string(&mut self, s: &str) {
        self.blob(s.as_bytes());
    }

    pub fn poly(&mut self, p: &RnsPoly) {
        self.u8(match p.form() {
            Form::Coefficient => 0,
            Form::Ntt => 1,
        });
        self.u32(p.limb_count() as u32);
        for q in p.moduli_values() {
            self.u64(q);
        }
        self.buf.reserve(p.limb_count() * p.degree() * 8);
        for limb in p.limbs() {
            for &c in limb {
                self.u64(c);
            }
        }
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

/// Cursor over a byte slice; every read is bounds-checked.
#[derive(Debug)]
pub struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Format(format!(
                "truncated input: needed {n} bytes at offset {}, {} left",
                self.pos,
                self.remaining()
            )));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("length checked")))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("length checked")))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("length checked")))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    pub fn array32(&mut self) -> Result<[u8; 32]> {
        Ok(self.take(32)?.try_into().expect("length checked"))
    }

    pub fn blob(&mut self) -> Result<&'a [u8]> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    pub fn string(&mut self) -> Result<String> {
        String::from_utf8(self.blob()?.to_vec()).map_err(|_| Error::Format("string is not UTF-8".into()))
    }

    /// Reads a polynomial whose moduli must equal `tables` and whose form must be `form`.
    pub fn poly(&mut self, tables: &[Arc<NttTable>], form: Form) -> Result<RnsPoly> {
        let got_form = match self.u8()? {
            0 => Form::Coefficient,
            1 => Form::Ntt,
            other => return Err(Error::Format(format!("unknown polynomial form tag {other}"))),
        };
        if got_form != form {
            return Err(Error::Format("polynomial is in the wrong domain".into()));
        }
        let count = self.u32()? as usize;
        if count != tables.len() {
            return Err(Error::Format(format!("expected {} limbs, found {count}", tables.len())));
        }
        for t in tables {
            if self.u64()? != t.modulus().value() {
                return Err(Error::Format("limb modulus does not match the parameter set".into()));
            }
        }
        let degree = tables[0].degree();
        let bytes = self.take(count * degree * 8)?;
        let limbs = bytes
            .chunks_exact(degree * 8)
            .map(|limb| {
                limb.chunks_exact(8)
                    .map(|c| u64::from_le_bytes(c.try_into().expect("chunk of 8")))
                    .collect()
            })
            .collect();
        RnsPoly::from_limbs(tables, limbs, form).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn expect_end(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::Format(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}

/// Parses and checks magic and version, returning the header.
pub fn read_header(r: &mut Reader<'_>) -> Result<Header> {
    if r.take(4)? != MAGIC {
        return Err(Error::Format("missing HEVF magic".into()));
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    Ok(Header { version, kind: r.u8()?, params_hash: r.array32()? })
}

pub fn peek_header(bytes: &[u8]) -> Result<Header> {
    read_header(&mut Reader::new(bytes))
}

/// Opens a container and checks kind and parameter hash.
pub fn open<'a>(bytes: &'a [u8], kind: u8, params_hash: &[u8; 32]) -> Result<Reader<'a>> {
    let mut r = Reader::new(bytes);
    let h = read_header(&mut r)?;
    if h.kind != kind {
        return Err(Error::Format(format!("expected object kind {kind}, found {}", h.kind)));
    }
    if &h.params_hash != params_hash {
        return Err(Error::Format("parameter-set hash mismatch".into()));
    }
    Ok(r)
}

/// Objects that live inside a container bound to a parameter set.
pub trait Encodable: Sized {
    const KIND: Kind;

    fn write_payload(&self, w: &mut Writer);

    fn read_payload(ctx: &CkksContext, r: &mut Reader<'_>) -> Result<Self>;

    fn to_bytes(&self, ctx: &CkksContext) -> Vec<u8> {
        let mut w = Writer::with_header(Self::KIND as u8, &ctx.params_hash());
        self.write_payload(&mut w);
        w.finish()
    }

    fn from_bytes(ctx: &CkksContext, bytes: &[u8]) -> Result<Self> {
        let mut r = open(bytes, Self::KIND as u8, &ctx.params_hash())?;
        let v = Self::read_payload(ctx, &mut r)?;
        r.expect_end()?;
        Ok(v)
    }
}

fn full_ext(ctx: &CkksContext) -> Result<Vec<Arc<NttTable>>> {
    ctx.extended_tables(ctx.max_level())
}

impl Encodable for Ciphertext {
    const KIND: Kind = Kind::Ciphertext;

    fn write_payload(&self, w: &mut Writer) {
        w.u32(self.level() as u32);
        w.f64(self.scale());
        w.poly(self.c0());
        w.poly(self.c1());
    }

    fn read_payload(ctx: &CkksContext, r: &mut Reader<'_>) -> Result<Self> {
        let level = r.u32()? as usize;
        let scale = r.f64()?;
        let tables = ctx.tables_at_level(level).map_err(|e| Error::Format(e.to_string()))?;
        let c0 = r.poly(tables, Form::Ntt)?;
        let c1 = r.poly(tables, Form::Ntt)?;
        Ciphertext::from_parts(ctx, c0, c1, level, scale).map_err(|e| Error::Format(e.to_string()))
    }
}

impl Encodable for SecretKey {
    const KIND: Kind = Kind::SecretKey;

    fn write_payload(&self, w: &mut Writer) {
        w.poly(self.poly());
    }

    fn read_payload(ctx: &CkksContext, r: &mut Reader<'_>) -> Result<Self> {
        let poly = r.poly(&full_ext(ctx)?, Form::Ntt)?;
        SecretKey::from_poly(ctx, poly)
    }
}

impl Encodable for PublicKey {
    const KIND: Kind = Kind::PublicKey;

    fn write_payload(&self, w: &mut Writer) {
        let (b, a) = self.parts();
        w.poly(b);
        w.poly(a);
    }

    fn read_payload(ctx: &CkksContext, r: &mut Reader<'_>) -> Result<Self> {
        let tables = ctx.tables_at_level(ctx.max_level())?;
        let b = r.poly(tables, Form::Ntt)?;
        let a = r.poly(tables, Form::Ntt)?;
        PublicKey::from_parts(ctx, b, a)
    }
}

fn write_switch_key(w: &mut Writer, key: &KeySwitchKey) {
    w.u32(key.digits().len() as u32);
    for (b, a) in key.digits() {
        w.poly(b);
        w.poly(a);
    }
}

fn read_switch_key(ctx: &CkksContext, r: &mut Reader<'_>) -> Result<KeySwitchKey> {
    let count = r.u32()? as usize;
    if count != ctx.max_level() + 1 {
        return Err(Error::Format(format!("key-switching key with {count} digits")));
    }
    let tables = full_ext(ctx)?;
    let mut digits = Vec::with_capacity(count);
    for _ in 0..count {
        let b = r.poly(&tables, Form::Ntt)?;
        let a = r.poly(&tables, Form::Ntt)?;
        digits.push((b, a));
    }
    KeySwitchKey::from_digits(ctx, digits)
}

impl Encodable for RelinKey {
    const KIND: Kind = Kind::RelinKey;

    fn write_payload(&self, w: &mut Writer) {
        write_switch_key(w, self.key());
    }

    fn read_payload(ctx: &CkksContext, r: &mut Reader<'_>) -> Result<Self> {
        Ok(RelinKey::from_key(read_switch_key(ctx, r)?))
    }
}

impl Encodable for GaloisKeys {
    const KIND: Kind = Kind::GaloisKeys;

    fn write_payload(&self, w: &mut Writer) {
        w.u32(self.len() as u32);
        for (step, key) in self.iter() {
            w.u64(step as u64);
            w.u64(key.galois_element as u64);
            write_switch_key(w, &key.key);
        }
    }

    fn read_payload(ctx: &CkksContext, r: &mut Reader<'_>) -> Result<Self> {
        let count = r.u32()? as usize;
        if count > ctx.slots() {
            return Err(Error::Format(format!("{count} Galois keys exceed the slot count")));
        }
        let mut keys = BTreeMap::new();
        for _ in 0..count {
            let step = r.u64()?;
            let element = r.u64()?;
            if step == 0 || step >= ctx.slots() as u64 {
                return Err(Error::Format(format!("invalid rotation step {step}")));
            }
            let step = step as usize;
            if element != ctx.galois_element(step) as u64 {
                return Err(Error::Format(format!("Galois element {element} does not match step {step}")));
            }
            let key = read_switch_key(ctx, r)?;
            if keys.insert(step, GaloisKey { galois_element: element as usize, key }).is_some() {
                return Err(Error::Format(format!("duplicate Galois key for step {step}")));
            }
        }
        Ok(GaloisKeys::from_keys(keys))
    }
}

/// Parameter sets carry their own hash in the header and need no context.
pub fn params_to_bytes(p: &ParameterSet) -> Vec<u8> {
    let mut w = Writer::with_header(Kind::Params as u8, &p.hash());
    w.string(&p.name);
    w.u64(p.degree as u64);
    w.u32(p.delta_bits);
    w.u32(p.security_bits);
    w.u32(p.chain_bits.len() as u32);
    for b in &p.chain_bits {
        w.u32(*b);
    }
    w.finish()
}

pub fn params_from_bytes(bytes: &[u8]) -> Result<ParameterSet> {
    let mut r = Reader::new(bytes);
    let h = read_header(&mut r)?;
    if h.kind != Kind::Params as u8 {
        return Err(Error::Format(format!("expected parameter set, found kind {}", h.kind)));
    }
    let name = r.string()?;
    let degree = r.u64()?;
    let delta_bits = r.u32()?;
    let security_bits = r.u32()?;
    let len = r.u32()? as usize;
    if len > 64 {
        return Err(Error::Format(format!("modulus chain of {len} primes")));
    }
    let chain_bits = (0..len).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    r.expect_end()?;
    let degree = usize::try_from(degree).map_err(|_| Error::Format("ring degree overflows".into()))?;
    let p = ParameterSet { name, degree, chain_bits, delta_bits, security_bits };
    if p.hash() != h.params_hash {
        return Err(Error::Format("parameter-set hash does not match contents".into()));
    }
    Ok(p)
}
