use std::io::{self, Read, Write};
use std::os::unix::net::UnixStream;
use std::sync::mpsc::{channel, Receiver, Sender};

use crate::error::Result;
use crate::wire::{read_frame_limited, write_frame, Frame, MAX_PAYLOAD};

pub trait Transport: Send {
    fn send(&mut self, f: &Frame) -> Result<()>;
    /// Writes bytes as-is, for feeding malformed input.
    fn send_raw(&mut self, bytes: &[u8]) -> Result<()>;
    fn recv(&mut self) -> Result<Option<Frame>>;
}

/// In-process byte pipe.
pub struct Pipe {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
    pending: Vec<u8>,
    pos: usize,
}

pub fn pipe_pair() -> (Pipe, Pipe) {
    let (ta, rb) = channel();
    let (tb, ra) = channel();
    (
        Pipe { tx: ta, rx: ra, pending: Vec::new(), pos: 0 },
        Pipe { tx: tb, rx: rb, pending: Vec::new(), pos: 0 },
    )
}

impl Read for Pipe {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        while self.pos == self.pending.len() {
            match self.rx.recv() {
                Ok(v) => {
                    self.pending = v;
                    self.pos = 0;
                }
                Err(_) => return Ok(0),
            }
        }
        let k = buf.len().min(self.pending.len() - self.pos);
        buf[..k].copy_from_slice(&self.pending[self.pos..self.pos + k]);
        self.pos += k;
        Ok(k)
    }
}

impl Write for Pipe {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.tx.send(buf.to_vec()).map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "peer closed"))?;
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

pub struct Framed<S> {
    stream: S,
    max: usize,
}

impl<S: Read + Write + Send> Framed<S> {
    pub fn new(stream: S) -> Self {
        Self::with_limit(stream, MAX_PAYLOAD)
    }

    /// Incoming payloads above `max` bytes are skipped and reported.
    pub fn with_limit(stream: S, max: usize) -> Self {
        Self { stream, max }
    }
}

impl<S: Read + Write + Send> Transport for Framed<S> {
    fn send(&mut self, f: &Frame) -> Result<()> {
        write_frame(&mut self.stream, f)
    }

    fn send_raw(&mut self, bytes: &[u8]) -> Result<()> {
        self.stream.write_all(bytes)?;
        Ok(self.stream.flush()?)
    }

    fn recv(&mut self) -> Result<Option<Frame>> {
        read_frame_limited(&mut self.stream, self.max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportKind {
    Inproc,
    Socket,
}

impl std::str::FromStr for TransportKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "inproc" => Ok(TransportKind::Inproc),
            "socket" => Ok(TransportKind::Socket),
            _ => Err(format!("unknown transport {s}")),
        }
    }
}

/// Two connected ends: (client, server).
pub fn connected_pair(kind: TransportKind) -> Result<(Box<dyn Transport>, Box<dyn Transport>)> {
    Ok(match kind {
        TransportKind::Inproc => {
            let (a, b) = pipe_pair();
            (Box::new(Framed::new(a)), Box::new(Framed::new(b)))
        }
        TransportKind::Socket => {
            let (a, b) = UnixStream::pair()?;
            (Box::new(Framed::new(a)), Box::new(Framed::new(b)))
        }
    })
}
