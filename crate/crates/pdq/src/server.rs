//! Session state machine. One server instance holds one session; frames
//! that do not fit the current state get an Error reply and the session
//! carries on.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use rnsfhe::context::Context;
use rnsfhe::math::ntt::NttPolicy;
use rnsfhe::serialize::deserialize_params;
use rnsfhe::{Ciphertext, GaloisKeys, PoolConfig, RelinKey, Rng};

use crate::column::EncryptedColumn;
use crate::config::PdqConfig;
use crate::engine::Engine;
use crate::error::{PdqError, Result};
use crate::query::QuerySpec;
use crate::transport::Transport;
use crate::wire::{Frame, MsgType, PayloadReader, PayloadWriter, ResultMeta};

#[derive(Clone, Debug, Default)]
pub struct ServerConfig {
    pub pool: PoolConfig,
    /// Overrides the policy carried in the uploaded parameters.
    pub ntt: Option<NttPolicy>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum State {
    AwaitContext,
    AwaitColumns,
    Ready,
}

pub struct Server {
    cfg: ServerConfig,
    state: State,
    session: u64,
    engine: Option<Engine>,
    columns: HashMap<String, EncryptedColumn>,
    rng: Rng,
    queries: usize,
}

impl Server {
    pub fn new(cfg: ServerConfig) -> Self {
        Self {
            cfg,
            state: State::AwaitContext,
            session: 0,
            engine: None,
            columns: HashMap::new(),
            rng: Rng::seed_from_u64(0),
            queries: 0,
        }
    }

    pub fn state(&self) -> State {
        self.state
    }

    pub fn queries(&self) -> usize {
        self.queries
    }

    pub fn engine(&self) -> Option<&Engine> {
        self.engine.as_ref()
    }

    /// Serves frames until the peer closes the stream.
    pub fn serve(&mut self, t: &mut dyn Transport) -> Result<()> {
        loop {
            let frame = match t.recv() {
                Ok(Some(f)) => f,
                Ok(None) => return Ok(()),
                Err(PdqError::Io(e)) => return Err(PdqError::Io(e)),
                Err(e) => {
                    t.send(&Frame::error(self.session, &e.to_string()))?;
                    continue;
                }
            };
            match self.handle(frame, t) {
                Ok(()) => {}
                Err(PdqError::Io(e)) => return Err(PdqError::Io(e)),
                Err(e) => t.send(&Frame::error(self.session, &e.to_string()))?,
            }
        }
    }

    fn ack(&self, t: &mut dyn Transport, meta: &ResultMeta) -> Result<()> {
        let payload = PayloadWriter::new().json(meta).u8(0).finish();
        t.send(&Frame::new(MsgType::Result, self.session, payload))
    }

    fn meta(&self, calc_ms: f64) -> ResultMeta {
        let e = self.engine.as_ref().expect("engine present");
        let ctx = e.context();
        ResultMeta {
            calc_ms,
            powers_built: e.powers_built(),
            high_water_bytes: ctx.pool().stats().high_water_bytes,
            columns: self.columns.len(),
            context_id: Arc::as_ptr(ctx) as usize,
            pool_id: Arc::as_ptr(ctx.pool()) as usize,
        }
    }

    fn handle(&mut self, f: Frame, t: &mut dyn Transport) -> Result<()> {
        if f.ty == MsgType::UploadContext {
            if self.state != State::AwaitContext {
                return Err(PdqError::Protocol("context already uploaded".into()));
            }
            self.load_context(&f)?;
            return self.ack(t, &self.meta(0.0));
        }
        if self.state == State::AwaitContext {
            return Err(PdqError::Protocol(format!("{:?} before context upload", f.ty)));
        }
        if f.session != self.session {
            return Err(PdqError::Protocol(format!("session {} does not match {}", f.session, self.session)));
        }
        match f.ty {
            MsgType::UploadColumn => {
                let engine = self.engine.as_ref().expect("engine present");
                let mut r = PayloadReader::new(&f.payload);
                let col = r.column(engine.context())?;
                r.finish()?;
                if col.digits.len() != engine.config().k {
                    return Err(PdqError::Protocol(format!(
                        "column {} has {} digits, expected {}",
                        col.name,
                        col.digits.len(),
                        engine.config().k
                    )));
                }
                engine.invalidate(&col.name);
                self.columns.insert(col.name.clone(), col);
                self.state = State::Ready;
                self.ack(t, &self.meta(0.0))
            }
            MsgType::Query => {
                if self.state != State::Ready {
                    return Err(PdqError::Protocol("query before any column upload".into()));
                }
                let engine = self.engine.as_ref().expect("engine present");
                let mut r = PayloadReader::new(&f.payload);
                let spec: QuerySpec = r.json()?;
                let nconds = r.u16()? as usize;
                let conds: Vec<EncryptedColumn> = (0..nconds).map(|_| r.column(engine.context())).collect::<Result<_>>()?;
                r.finish()?;
                let session = self.session;
                let ctx = engine.context().clone();
                let start = Instant::now();
                let mut paused = std::time::Duration::ZERO;
                let mut inverse = |c1: Ciphertext| -> Result<Ciphertext> {
                    let wait = Instant::now();
                    let payload = PayloadWriter::new().object(&ctx, &c1).finish();
                    t.send(&Frame::new(MsgType::MaskedCiphertext, session, payload))?;
                    let reply = t.recv()?.ok_or_else(|| PdqError::Protocol("peer closed during reciprocal".into()))?;
                    paused += wait.elapsed();
                    if reply.session != session || reply.ty != MsgType::ReciprocalCiphertext {
                        return Err(PdqError::Protocol(format!("expected reciprocal, got {:?}", reply.ty)));
                    }
                    let mut r = PayloadReader::new(&reply.payload);
                    let y = r.object(&ctx)?;
                    r.finish()?;
                    Ok(y)
                };
                let out = engine.run(&spec, &self.columns, &conds, &mut self.rng, &mut inverse)?;
                let calc_ms = (start.elapsed() - paused).as_secs_f64() * 1e3;
                self.queries += 1;
                let meta = self.meta(calc_ms);
                let payload = PayloadWriter::new().json(&meta).u8(1).object(&ctx, &out).finish();
                t.send(&Frame::new(MsgType::Result, self.session, payload))
            }
            other => Err(PdqError::Protocol(format!("unexpected {other:?} from client"))),
        }
    }

    fn load_context(&mut self, f: &Frame) -> Result<()> {
        let mut r = PayloadReader::new(&f.payload);
        let mut params = deserialize_params(r.bytes()?)?;
        if let Some(p) = self.cfg.ntt {
            params.ntt_policy = p;
        }
        let cfg: PdqConfig = r.json()?;
        let ctx = Context::new(params, self.cfg.pool)?;
        let rlk: RelinKey = r.object(&ctx)?;
        let gk: GaloisKeys = r.object(&ctx)?;
        r.finish()?;
        self.engine = Some(Engine::new(ctx, rlk, gk, cfg)?);
        self.session = f.session;
        self.rng = Rng::seed_from_u64(f.session);
        self.state = State::AwaitColumns;
        Ok(())
    }
}
