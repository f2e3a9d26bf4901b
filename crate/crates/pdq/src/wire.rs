//! Frames: `len u32 | type u8 | session u64 | payload[len]`, little endian.

use std::io::{self, Read, Write};
use std::sync::Arc;

use rnsfhe::context::Context;
use rnsfhe::serialize::{deserialize, serialize, serialize_compact, Wire};
use serde::{Deserialize, Serialize};

use crate::column::EncryptedColumn;
use crate::error::{PdqError, Result};

pub const HEADER_LEN: usize = 13;
pub const MAX_PAYLOAD: usize = 1 << 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    UploadContext = 1,
    UploadColumn = 2,
    Query = 3,
    MaskedCiphertext = 4,
    ReciprocalCiphertext = 5,
    Result = 6,
    Error = 7,
}

impl MsgType {
    pub fn from_u8(b: u8) -> Option<Self> {
        use MsgType::*;
        Some(match b {
            1 => UploadContext,
            2 => UploadColumn,
            3 => Query,
            4 => MaskedCiphertext,
            5 => ReciprocalCiphertext,
            6 => Result,
            7 => Error,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub ty: MsgType,
    pub session: u64,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(ty: MsgType, session: u64, payload: Vec<u8>) -> Self {
        Self { ty, session, payload }
    }

    pub fn error(session: u64, msg: &str) -> Self {
        Self::new(MsgType::Error, session, msg.as_bytes().to_vec())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.push(self.ty as u8);
        out.extend_from_slice(&self.session.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Parses exactly one frame.
    pub fn decode(bytes: &[u8]) -> Result<Frame> {
        if bytes.len() < HEADER_LEN {
            return Err(PdqError::Wire(format!("{} bytes is shorter than a header", bytes.len())));
        }
        let (ty, session, len) = parse_header(bytes[..HEADER_LEN].try_into().unwrap(), MAX_PAYLOAD)?;
        if bytes.len() - HEADER_LEN != len {
            return Err(PdqError::Wire(format!("length field {len} but {} payload bytes", bytes.len() - HEADER_LEN)));
        }
        Ok(Frame { ty, session, payload: bytes[HEADER_LEN..].to_vec() })
    }

    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.payload).into_owned()
    }
}

fn parse_header(h: &[u8; HEADER_LEN], max: usize) -> Result<(MsgType, u64, usize)> {
    let len = u32::from_le_bytes(h[..4].try_into().unwrap()) as usize;
    if len > max {
        return Err(PdqError::Wire(format!("frame of {len} bytes exceeds {max}")));
    }
    let ty = MsgType::from_u8(h[4]).ok_or_else(|| PdqError::Wire(format!("unknown frame type {}", h[4])))?;
    Ok((ty, u64::from_le_bytes(h[5..].try_into().unwrap()), len))
}

/// Reads one frame; `Ok(None)` on a clean end of stream. A bad header is
/// reported after its payload has been consumed, so the stream stays in
/// step; an oversized one is skipped in full.
pub fn read_frame(r: &mut impl Read) -> Result<Option<Frame>> {
    read_frame_limited(r, MAX_PAYLOAD)
}

pub fn read_frame_limited(r: &mut impl Read, max: usize) -> Result<Option<Frame>> {
    let mut h = [0u8; HEADER_LEN];
    let mut got = 0;
    while got < HEADER_LEN {
        let k = r.read(&mut h[got..])?;
        if k == 0 {
            if got == 0 {
                return Ok(None);
            }
            return Err(PdqError::Io(io::Error::new(io::ErrorKind::UnexpectedEof, "truncated header")));
        }
        got += k;
    }
    match parse_header(&h, max) {
        Ok((ty, session, len)) => {
            let mut payload = vec![0u8; len];
            r.read_exact(&mut payload)?;
            Ok(Some(Frame { ty, session, payload }))
        }
        Err(e) => {
            let len = u32::from_le_bytes(h[..4].try_into().unwrap()) as u64;
            io::copy(&mut r.take(len), &mut io::sink())?;
            Err(e)
        }
    }
}

pub fn write_frame(w: &mut impl Write, f: &Frame) -> Result<()> {
    w.write_all(&f.encode())?;
    w.flush()?;
    Ok(())
}

#[derive(Default)]
pub struct PayloadWriter {
    buf: Vec<u8>,
}

impl PayloadWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(&(b.len() as u32).to_le_bytes());
        self.buf.extend_from_slice(b);
        self
    }

    pub fn u8(&mut self, x: u8) -> &mut Self {
        self.buf.push(x);
        self
    }

    pub fn u16(&mut self, x: u16) -> &mut Self {
        self.buf.extend_from_slice(&x.to_le_bytes());
        self
    }

    pub fn json<T: Serialize>(&mut self, x: &T) -> &mut Self {
        self.bytes(&serde_json::to_vec(x).expect("serializable"))
    }

    pub fn object<T: Wire>(&mut self, ctx: &Context, x: &T) -> &mut Self {
        self.bytes(&serialize(ctx, x))
    }

    pub fn object_compact<T: Wire>(&mut self, ctx: &Context, x: &T) -> &mut Self {
        self.bytes(&serialize_compact(ctx, x))
    }

    pub fn column(&mut self, ctx: &Context, c: &EncryptedColumn) -> &mut Self {
        self.bytes(c.name.as_bytes()).u16(c.digits.len() as u16);
        for d in &c.digits {
            self.object(ctx, d);
        }
        match &c.value {
            Some(v) => self.u8(1).object(ctx, v),
            None => self.u8(0),
        }
    }

    pub fn finish(&mut self) -> Vec<u8> {
        std::mem::take(&mut self.buf)
    }
}

pub struct PayloadReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> PayloadReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < k {
            return Err(PdqError::Wire("payload truncated".into()));
        }
        let s = &self.buf[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    pub fn bytes(&mut self) -> Result<&'a [u8]> {
        let len = u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize;
        self.take(len)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn json<T: for<'de> Deserialize<'de>>(&mut self) -> Result<T> {
        serde_json::from_slice(self.bytes()?).map_err(|e| PdqError::Wire(format!("bad json: {e}")))
    }

    pub fn object<T: Wire>(&mut self, ctx: &Arc<Context>) -> Result<T> {
        Ok(deserialize(ctx, self.bytes()?)?)
    }

    pub fn column(&mut self, ctx: &Arc<Context>) -> Result<EncryptedColumn> {
        let name = String::from_utf8(self.bytes()?.to_vec()).map_err(|_| PdqError::Wire("column name is not utf-8".into()))?;
        let k = self.u16()? as usize;
        let digits = (0..k).map(|_| self.object(ctx)).collect::<Result<_>>()?;
        let value = match self.u8()? {
            0 => None,
            1 => Some(self.object(ctx)?),
            b => return Err(PdqError::Wire(format!("bad value flag {b}"))),
        };
        Ok(EncryptedColumn { name, digits, value })
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(PdqError::Wire(format!("{} trailing payload bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

/// Metadata carried by every Result frame.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultMeta {
    pub calc_ms: f64,
    pub powers_built: usize,
    pub high_water_bytes: usize,
    pub columns: usize,
    /// Addresses of the session's context and memory pool.
    pub context_id: usize,
    pub pool_id: usize,
}
