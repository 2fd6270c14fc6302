//! Framed envelopes over TCP.
//!
//! The server side is a hub: one reader thread per connection feeds a single
//! ordered queue, and writes go straight to the socket of the addressed
//! client. A connection is bound to a client id by its first envelope, which
//! must be `Register`.

use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter, ErrorKind};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::envelope::{Envelope, MsgType};
use crate::error::{Error, Result};

pub struct Link {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl Link {
    pub fn new(stream: TcpStream) -> Result<Self> {
        stream.set_nodelay(true)?;
        let reader = BufReader::new(stream.try_clone()?);
        Ok(Self {
            reader,
            writer: BufWriter::new(stream),
        })
    }

    /// Connect, retrying until `patience` runs out (the server may still be
    /// starting up).
    pub fn connect<A: ToSocketAddrs>(addr: A, patience: Duration) -> Result<Self> {
        let deadline = Instant::now() + patience;
        loop {
            match TcpStream::connect(&addr) {
                Ok(s) => return Self::new(s),
                Err(e) if Instant::now() < deadline => {
                    log::debug!("connect failed ({e}), retrying");
                    thread::sleep(Duration::from_millis(50));
                }
                Err(e) => return Err(e.into()),
            }
        }
    }

    pub fn send(&mut self, env: &Envelope) -> Result<()> {
        env.write_to(&mut self.writer)
    }

    pub fn recv(&mut self) -> Result<Envelope> {
        Envelope::read_from(&mut self.reader)
    }

    pub fn set_read_timeout(&self, t: Option<Duration>) -> Result<()> {
        self.reader.get_ref().set_read_timeout(t)?;
        Ok(())
    }
}

#[derive(Debug)]
pub enum HubEvent {
    Message(Envelope),
    Disconnected(u16),
}

type Writers = Arc<Mutex<BTreeMap<u16, BufWriter<TcpStream>>>>;

pub struct Hub {
    addr: SocketAddr,
    inbox: Receiver<HubEvent>,
    writers: Writers,
    stop: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
}

fn serve_connection(stream: TcpStream, writers: Writers, tx: Sender<HubEvent>) -> Result<()> {
    stream.set_nodelay(true)?;
    stream.set_nonblocking(false)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let first = Envelope::read_from(&mut reader)?;
    if first.msg_type != MsgType::Register {
        return Err(Error::Decode(format!("expected Register, got {:?}", first.msg_type)));
    }
    let id = first.sender;
    writers.lock().unwrap().insert(id, BufWriter::new(stream));
    if tx.send(HubEvent::Message(first)).is_err() {
        return Ok(());
    }
    loop {
        match Envelope::read_from(&mut reader) {
            Ok(env) if env.sender == id => {
                if tx.send(HubEvent::Message(env)).is_err() {
                    return Ok(());
                }
            }
            Ok(env) => log::warn!("client {id} sent an envelope claiming sender {}", env.sender),
            Err(e) => {
                log::debug!("connection for client {id} closed: {e}");
                writers.lock().unwrap().remove(&id);
                let _ = tx.send(HubEvent::Disconnected(id));
                return Ok(());
            }
        }
    }
}

impl Hub {
    pub fn bind<A: ToSocketAddrs>(addr: A) -> Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let local = listener.local_addr()?;
        listener.set_nonblocking(true)?;
        let (tx, inbox) = mpsc::channel();
        let writers: Writers = Arc::default();
        let stop = Arc::new(AtomicBool::new(false));
        let acceptor = {
            let writers = writers.clone();
            let stop = stop.clone();
            thread::spawn(move || {
                while !stop.load(Ordering::Relaxed) {
                    match listener.accept() {
                        Ok((stream, peer)) => {
                            log::debug!("accepted connection from {peer}");
                            let (writers, tx) = (writers.clone(), tx.clone());
                            thread::spawn(move || {
                                if let Err(e) = serve_connection(stream, writers, tx) {
                                    log::warn!("connection from {peer} failed: {e}");
                                }
                            });
                        }
                        Err(e) if e.kind() == ErrorKind::WouldBlock => {
                            thread::sleep(Duration::from_millis(5));
                        }
                        Err(e) => {
                            log::error!("accept failed: {e}");
                            return;
                        }
                    }
                }
            })
        };
        Ok(Self {
            addr: local,
            inbox,
            writers,
            stop,
            acceptor: Some(acceptor),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn recv_timeout(&self, timeout: Duration) -> Option<HubEvent> {
        match self.inbox.recv_timeout(timeout) {
            Ok(ev) => Some(ev),
            Err(RecvTimeoutError::Timeout) | Err(RecvTimeoutError::Disconnected) => None,
        }
    }

    pub fn connected(&self) -> Vec<u16> {
        self.writers.lock().unwrap().keys().copied().collect()
    }

    /// Write to one client. A vanished client is not an error; the protocol
    /// treats it as a dropout.
    pub fn send(&self, to: u16, env: &Envelope) -> bool {
        let mut writers = self.writers.lock().unwrap();
        let Some(w) = writers.get_mut(&to) else {
            return false;
        };
        if let Err(e) = env.write_to(w) {
            log::debug!("write to client {to} failed: {e}");
            writers.remove(&to);
            return false;
        }
        true
    }
}

impl Drop for Hub {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        for w in self.writers.lock().unwrap().values() {
            let _ = w.get_ref().shutdown(std::net::Shutdown::Both);
        }
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
    }
}
