//! Client side of a session over a transport, and an in-memory shortcut
//! that skips serialization.

use std::collections::HashMap;

use rnsfhe::serialize::serialize_params;
use rnsfhe::{Ciphertext, Rng};

use crate::client::{Client, QueryResult};
use crate::column::EncryptedColumn;
use crate::engine::Engine;
use crate::error::{PdqError, Result};
use crate::query::QuerySpec;
use crate::transport::Transport;
use crate::wire::{Frame, MsgType, PayloadReader, PayloadWriter, ResultMeta};

pub struct Session<'a> {
    pub client: &'a mut Client,
    t: &'a mut dyn Transport,
    id: u64,
}

impl<'a> Session<'a> {
    pub fn new(client: &'a mut Client, t: &'a mut dyn Transport, id: u64) -> Self {
        Self { client, t, id }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    fn expect_result(&mut self) -> Result<(ResultMeta, Option<Ciphertext>)> {
        let f = self.t.recv()?.ok_or_else(|| PdqError::Protocol("server closed".into()))?;
        self.parse_result(f)
    }

    fn parse_result(&self, f: Frame) -> Result<(ResultMeta, Option<Ciphertext>)> {
        match f.ty {
            MsgType::Result => {
                let mut r = PayloadReader::new(&f.payload);
                let meta = r.json()?;
                let ct = match r.u8()? {
                    0 => None,
                    _ => Some(r.object(self.client.context())?),
                };
                r.finish()?;
                Ok((meta, ct))
            }
            MsgType::Error => Err(PdqError::Protocol(format!("server: {}", f.text()))),
            other => Err(PdqError::Protocol(format!("unexpected {other:?} from server"))),
        }
    }

    pub fn upload_context(&mut self) -> Result<ResultMeta> {
        let c = &*self.client;
        let ctx = c.context();
        let payload = PayloadWriter::new()
            .bytes(&serialize_params(ctx.params()))
            .json(c.config())
            .object_compact(ctx, c.relin_key())
            .object_compact(ctx, c.galois_keys())
            .finish();
        self.t.send(&Frame::new(MsgType::UploadContext, self.id, payload))?;
        Ok(self.expect_result()?.0)
    }

    pub fn upload_column(&mut self, col: &EncryptedColumn) -> Result<ResultMeta> {
        let payload = PayloadWriter::new().column(self.client.context(), col).finish();
        self.t.send(&Frame::new(MsgType::UploadColumn, self.id, payload))?;
        Ok(self.expect_result()?.0)
    }

    pub fn encrypt_and_upload(&mut self, name: &str, values: &[u64], with_value: bool) -> Result<ResultMeta> {
        let col = self.client.encrypt_column(name, values, with_value)?;
        self.upload_column(&col)
    }

    /// Sends a query, answers reciprocal rounds, decrypts the result.
    pub fn query(&mut self, spec: &QuerySpec) -> Result<(QueryResult, ResultMeta)> {
        let (stripped, conds) = self.client.prepare_query(spec)?;
        let ctx = self.client.context().clone();
        let mut w = PayloadWriter::new();
        w.json(&stripped).u16(conds.len() as u16);
        for c in &conds {
            w.column(&ctx, c);
        }
        self.t.send(&Frame::new(MsgType::Query, self.id, w.finish()))?;
        let threshold = self.client.threshold_for(spec);
        let mut flagged = Vec::new();
        loop {
            let f = self.t.recv()?.ok_or_else(|| PdqError::Protocol("server closed".into()))?;
            if f.ty == MsgType::MaskedCiphertext {
                let mut r = PayloadReader::new(&f.payload);
                let c1 = r.object(&ctx)?;
                r.finish()?;
                let (y, fl) = self.client.reciprocal(&c1, threshold)?;
                flagged = fl;
                let payload = PayloadWriter::new().object(&ctx, &y).finish();
                self.t.send(&Frame::new(MsgType::ReciprocalCiphertext, self.id, payload))?;
                continue;
            }
            let (meta, ct) = self.parse_result(f)?;
            let ct = ct.ok_or_else(|| PdqError::Protocol("result without ciphertext".into()))?;
            return Ok((self.client.decode_result(spec, &ct, flagged)?, meta));
        }
    }
}

/// Runs a query against an engine in the same process, with no wire.
pub fn run_local(
    engine: &Engine,
    cols: &HashMap<String, EncryptedColumn>,
    client: &mut Client,
    spec: &QuerySpec,
    rng: &mut Rng,
) -> Result<QueryResult> {
    let (stripped, conds) = client.prepare_query(spec)?;
    let threshold = client.threshold_for(spec);
    let mut flagged = Vec::new();
    let out = {
        let mut inverse = |c1: Ciphertext| -> Result<Ciphertext> {
            let (y, fl) = client.reciprocal(&c1, threshold)?;
            flagged = fl;
            Ok(y)
        };
        engine.run(&stripped, cols, &conds, rng, &mut inverse)?
    };
    client.decode_result(spec, &out, flagged)
}
