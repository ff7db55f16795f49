//! K-worker cluster simulation with a coordinator-star topology.
//!
//! Workers own their block state exclusively. All data crossing worker
//! boundaries travels as value-copied [`Message`]s over a [`Link`], either
//! in-process channels or loopback TCP sockets. The coordinator sums
//! reduce contributions in worker-id order so results never depend on
//! arrival order.

use std::io::{BufReader, BufWriter, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ColMatrix, DenseVec};
use crate::local_solver::LocalColumns;
use crate::partition::Partition;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum MessageKind {
    ReduceContribution = 1,
    Broadcast = 2,
    Control = 3,
}

impl MessageKind {
    fn from_byte(b: u8) -> Option<Self> {
        match b {
            1 => Some(Self::ReduceContribution),
            2 => Some(Self::Broadcast),
            3 => Some(Self::Control),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub kind: MessageKind,
    pub round: u64,
    pub sender: u32,
    pub payload: Vec<f64>,
}

/// Frame header: 8-byte round, 1-byte kind, 4-byte sender, 8-byte payload
/// length (entry count). All integers little-endian.
pub const HEADER_LEN: usize = 8 + 1 + 4 + 8;

impl Message {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.payload.len());
        out.extend_from_slice(&self.round.to_le_bytes());
        out.push(self.kind as u8);
        out.extend_from_slice(&self.sender.to_le_bytes());
        out.extend_from_slice(&(self.payload.len() as u64).to_le_bytes());
        for v in &self.payload {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode<R: Read>(r: &mut R) -> std::io::Result<Self> {
        let mut head = [0u8; HEADER_LEN];
        r.read_exact(&mut head)?;
        let round = u64::from_le_bytes(head[0..8].try_into().unwrap());
        let kind = MessageKind::from_byte(head[8]).ok_or_else(|| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("bad kind {}", head[8]))
        })?;
        let sender = u32::from_le_bytes(head[9..13].try_into().unwrap());
        let len = u64::from_le_bytes(head[13..21].try_into().unwrap()) as usize;
        let mut buf = vec![0u8; 8 * len];
        r.read_exact(&mut buf)?;
        let payload = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            kind,
            round,
            sender,
            payload,
        })
    }
}

/// One end of a point-to-point connection.
pub trait Link: Send {
    fn send(&mut self, msg: Message) -> std::result::Result<(), String>;
    fn recv(&mut self) -> std::result::Result<Message, String>;
}

struct ChannelLink {
    tx: mpsc::Sender<Message>,
    rx: mpsc::Receiver<Message>,
}

impl Link for ChannelLink {
    fn send(&mut self, msg: Message) -> std::result::Result<(), String> {
        self.tx.send(msg).map_err(|e| e.to_string())
    }
    fn recv(&mut self) -> std::result::Result<Message, String> {
        self.rx.recv().map_err(|e| e.to_string())
    }
}

fn channel_pair() -> (Box<dyn Link>, Box<dyn Link>) {
    let (tx_a, rx_b) = mpsc::channel();
    let (tx_b, rx_a) = mpsc::channel();
    (
        Box::new(ChannelLink { tx: tx_a, rx: rx_a }),
        Box::new(ChannelLink { tx: tx_b, rx: rx_b }),
    )
}

struct TcpLink {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl TcpLink {
    fn new(stream: TcpStream) -> std::io::Result<Self> {
        stream.set_nodelay(true)?;
        Ok(Self {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
        })
    }
}

impl Link for TcpLink {
    fn send(&mut self, msg: Message) -> std::result::Result<(), String> {
        self.writer
            .write_all(&msg.encode())
            .and_then(|_| self.writer.flush())
            .map_err(|e| e.to_string())
    }
    fn recv(&mut self) -> std::result::Result<Message, String> {
        Message::decode(&mut self.reader).map_err(|e| e.to_string())
    }
}

fn tcp_pair() -> std::io::Result<(Box<dyn Link>, Box<dyn Link>)> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let worker_side = TcpStream::connect(addr)?;
    let (coord_side, _) = listener.accept()?;
    Ok((
        Box::new(TcpLink::new(worker_side)?),
        Box::new(TcpLink::new(coord_side)?),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Transport {
    #[default]
    InProcess,
    LoopbackSocket,
}

impl std::str::FromStr for Transport {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "in_process" => Ok(Self::InProcess),
            "loopback_socket" => Ok(Self::LoopbackSocket),
            other => Err(Error::InvalidConfig(format!("unknown transport {other:?}"))),
        }
    }
}

impl std::fmt::Display for Transport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::InProcess => "in_process",
            Self::LoopbackSocket => "loopback_socket",
        })
    }
}

/// Communication accounting. Byte counts cover payload entries only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CommStats {
    pub reduces: u64,
    pub broadcasts: u64,
    pub bytes_up: u64,
    pub bytes_down: u64,
}

impl CommStats {
    pub fn bytes_total(&self) -> u64 {
        self.bytes_up + self.bytes_down
    }
}

/// Per-worker slices of the iterate vectors, indexed like the block.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorkerState {
    pub alpha: DenseVec,
    pub z: DenseVec,
    pub y: DenseVec,
}

/// A worker: its block, its columns, its slices and its random stream.
pub struct WorkerHandle {
    id: usize,
    block: Arc<[usize]>,
    matrix: Arc<ColMatrix>,
    pub state: WorkerState,
    seed: u64,
    shared_w: Option<DenseVec>,
    link: Box<dyn Link>,
    last_sent_round: Option<u64>,
}

impl WorkerHandle {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn block(&self) -> &[usize] {
        &self.block
    }

    pub fn columns(&self) -> LocalColumns<'_> {
        LocalColumns::new(&self.matrix, &self.block)
    }

    /// Last vector delivered by a broadcast.
    pub fn shared_w(&self) -> Option<&DenseVec> {
        self.shared_w.as_ref()
    }

    /// Random stream for outer round `t`; one independent stream per
    /// `(worker, round)` pair.
    pub fn rng_for_round(&self, t: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(t);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Closed,
    Reduced,
}

/// The coordinator plus its K workers.
pub struct Cluster {
    workers: Vec<WorkerHandle>,
    coord_links: Vec<Box<dyn Link>>,
    d: usize,
    stats: CommStats,
    round: u64,
    phase: Phase,
    transport: Transport,
}

impl std::fmt::Debug for Cluster {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Cluster")
            .field("k", &self.workers.len())
            .field("d", &self.d)
            .field("stats", &self.stats)
            .field("round", &self.round)
            .field("transport", &self.transport)
            .finish()
    }
}

fn worker_seed(seed: u64, k: usize) -> u64 {
    seed ^ (k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

impl Cluster {
    /// Starts K workers, one per partition block. Worker slices start at zero.
    pub fn spawn(
        partition: &Partition,
        matrix: Arc<ColMatrix>,
        transport: Transport,
        seed: u64,
    ) -> Result<Self> {
        if matrix.cols() != partition.n() {
            return Err(Error::DimensionMismatch {
                expected: partition.n(),
                got: matrix.cols(),
            });
        }
        let k = partition.num_workers();
        let mut workers = Vec::with_capacity(k);
        let mut coord_links = Vec::with_capacity(k);
        for id in 0..k {
            let (worker_link, coord_link) = match transport {
                Transport::InProcess => channel_pair(),
                Transport::LoopbackSocket => {
                    tcp_pair().map_err(|e| Error::TransportInitFailure(e.to_string()))?
                }
            };
            let block: Arc<[usize]> = partition.block(id).into();
            let nk = block.len();
            workers.push(WorkerHandle {
                id,
                block,
                matrix: Arc::clone(&matrix),
                state: WorkerState {
                    alpha: DenseVec::zeros(nk),
                    z: DenseVec::zeros(nk),
                    y: DenseVec::zeros(nk),
                },
                seed: worker_seed(seed, id),
                shared_w: None,
                link: worker_link,
                last_sent_round: None,
            });
            coord_links.push(coord_link);
        }
        Ok(Self {
            workers,
            coord_links,
            d: matrix.rows(),
            stats: CommStats::default(),
            round: 0,
            phase: Phase::Closed,
            transport,
        })
    }

    pub fn num_workers(&self) -> usize {
        self.workers.len()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn stats(&self) -> CommStats {
        self.stats
    }

    pub fn transport(&self) -> Transport {
        self.transport
    }

    pub fn workers(&self) -> &[WorkerHandle] {
        &self.workers
    }

    /// Direct access for initialization and instrumentation; algorithm
    /// rounds go through [`Cluster::run_round`].
    pub fn workers_mut(&mut self) -> &mut [WorkerHandle] {
        &mut self.workers
    }

    /// Runs `work` on every worker concurrently and returns the results in
    /// worker order once all have finished.
    pub fn run_round<R, F>(&mut self, work: F) -> Result<Vec<R>>
    where
        R: Send,
        F: Fn(&mut WorkerHandle) -> R + Sync,
    {
        if self.workers.len() == 1 {
            return Ok(vec![work(&mut self.workers[0])]);
        }
        let work = &work;
        std::thread::scope(|s| {
            let handles: Vec<_> = self
                .workers
                .iter_mut()
                .map(|w| s.spawn(move || work(w)))
                .collect();
            handles
                .into_iter()
                .enumerate()
                .map(|(id, h)| h.join().map_err(|p| Error::WorkerPanic(id, panic_message(&p))))
                .collect()
        })
    }

    /// Sums one d-vector per worker at the coordinator. Opens a new round.
    pub fn all_reduce_sum(&mut self, contributions: Vec<DenseVec>) -> Result<DenseVec> {
        if self.phase != Phase::Closed {
            return Err(Error::RoundMismatch(format!(
                "reduce requested while round {} is still open",
                self.round
            )));
        }
        let k = self.workers.len();
        if contributions.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: contributions.len(),
            });
        }
        for c in &contributions {
            c.check_len(self.d)?;
        }
        let round = self.round + 1;
        let d = self.d;
        let received: Vec<std::result::Result<Message, String>> = std::thread::scope(|s| {
            let senders: Vec<_> = self
                .workers
                .iter_mut()
                .zip(contributions)
                .map(|(w, c)| {
                    s.spawn(move || {
                        if w.last_sent_round.is_some_and(|r| r >= round) {
                            return Err(format!("round {round} not after {:?}", w.last_sent_round));
                        }
                        w.last_sent_round = Some(round);
                        w.link.send(Message {
                            kind: MessageKind::ReduceContribution,
                            round,
                            sender: w.id as u32,
                            payload: c.into_vec(),
                        })
                    })
                })
                .collect();
            let received = self.coord_links.iter_mut().map(|l| l.recv()).collect();
            for h in senders {
                let _ = h.join();
            }
            received
        });
        let mut sum = DenseVec::zeros(d);
        for (id, msg) in received.into_iter().enumerate() {
            let msg = msg.map_err(|e| Error::WorkerLost(id, e))?;
            if msg.kind != MessageKind::ReduceContribution || msg.round != round || msg.sender as usize != id {
                return Err(Error::RoundMismatch(format!(
                    "coordinator expected contribution for round {round} from worker {id}, got {:?} round {} from {}",
                    msg.kind, msg.round, msg.sender
                )));
            }
            if msg.payload.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: msg.payload.len(),
                });
            }
            sum.axpy(1.0, &msg.payload);
        }
        self.round = round;
        self.phase = Phase::Reduced;
        self.stats.reduces += 1;
        self.stats.bytes_up += (k * d * 8) as u64;
        Ok(sum)
    }

    /// Sends a value copy of `w` to every worker. Closes the round.
    pub fn broadcast(&mut self, w: &DenseVec) -> Result<()> {
        if self.phase != Phase::Reduced {
            return Err(Error::RoundMismatch(format!(
                "broadcast without an open reduced round (round {})",
                self.round
            )));
        }
        w.check_len(self.d)?;
        let round = self.round;
        let results: Vec<std::result::Result<Message, String>> = std::thread::scope(|s| {
            let senders: Vec<_> = self
                .coord_links
                .iter_mut()
                .map(|l| {
                    let payload = w.to_vec();
                    s.spawn(move || {
                        l.send(Message {
                            kind: MessageKind::Broadcast,
                            round,
                            sender: u32::MAX,
                            payload,
                        })
                    })
                })
                .collect();
            let got = self.workers.iter_mut().map(|wk| wk.link.recv()).collect();
            for h in senders {
                let _ = h.join();
            }
            got
        });
        for (id, msg) in results.into_iter().enumerate() {
            let msg = msg.map_err(|e| Error::WorkerLost(id, e))?;
            if msg.kind != MessageKind::Broadcast || msg.round != round {
                return Err(Error::RoundMismatch(format!(
                    "worker {id} expected broadcast for round {round}, got {:?} round {}",
                    msg.kind, msg.round
                )));
            }
            self.workers[id].shared_w = Some(DenseVec::from_vec(msg.payload));
        }
        let k = self.workers.len();
        self.phase = Phase::Closed;
        self.stats.broadcasts += 1;
        self.stats.bytes_down += (k * self.d * 8) as u64;
        Ok(())
    }

    /// Assembles a global n-vector from one per-worker slice. Instrumentation
    /// only: it bypasses the links and is not counted as communication.
    pub fn gather<F>(&self, n: usize, pick: F) -> DenseVec
    where
        F: Fn(&WorkerHandle) -> &DenseVec,
    {
        let mut out = DenseVec::zeros(n);
        for w in &self.workers {
            for (&c, &v) in w.block.iter().zip(pick(w).iter()) {
                out[c] = v;
            }
        }
        out
    }
}

fn panic_message(p: &Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "unknown panic".into()
    }
}
