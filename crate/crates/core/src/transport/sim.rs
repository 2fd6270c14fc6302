//! Deterministic in-process network with a logical clock.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::envelope::{Envelope, SERVER_ID};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Server,
    Client(u16),
}

impl Node {
    pub fn of_sender(env: &Envelope) -> Self {
        if env.sender == SERVER_ID {
            Node::Server
        } else {
            Node::Client(env.sender)
        }
    }
}

/// Per-hop delay in logical ticks, optionally with seeded uniform jitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LatencyModel {
    pub per_hop: u64,
    pub jitter: u64,
    pub seed: u64,
}

impl LatencyModel {
    pub fn constant(per_hop: u64) -> Self {
        Self {
            per_hop,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub at: u64,
    pub from: Node,
    pub to: Node,
    pub envelope: Envelope,
}

struct Pending {
    at: u64,
    seq: u64,
    from: Node,
    to: Node,
    env: Envelope,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

/// Message queue ordered by (delivery time, send order). Offline clients can
/// neither send nor receive; the check happens at both ends.
pub struct Network {
    latency: LatencyModel,
    rng: ChaCha8Rng,
    now: u64,
    seq: u64,
    queue: BinaryHeap<Reverse<Pending>>,
    offline: BTreeSet<u16>,
    dropped: u64,
}

impl Network {
    pub fn new(latency: LatencyModel) -> Self {
        Self {
            latency,
            rng: ChaCha8Rng::seed_from_u64(latency.seed),
            now: 0,
            seq: 0,
            queue: BinaryHeap::new(),
            offline: BTreeSet::new(),
            dropped: 0,
        }
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn advance(&mut self, ticks: u64) {
        self.now += ticks;
    }

    pub fn is_online(&self, node: Node) -> bool {
        match node {
            Node::Server => true,
            Node::Client(c) => !self.offline.contains(&c),
        }
    }

    pub fn set_online(&mut self, client: u16, online: bool) {
        if online {
            self.offline.remove(&client);
        } else {
            self.offline.insert(client);
        }
    }

    /// Messages discarded because an endpoint was offline.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn is_idle(&self) -> bool {
        self.queue.is_empty()
    }

    fn delay(&mut self, hops: u64) -> u64 {
        let mut d = 0;
        for _ in 0..hops {
            d += self.latency.per_hop;
            if self.latency.jitter > 0 {
                d += self.rng.gen_range(0..=self.latency.jitter);
            }
        }
        d
    }

    /// Queue a message over `hops` links. Returns false when the sender is
    /// offline and nothing was queued.
    pub fn post(&mut self, from: Node, to: Node, env: Envelope, hops: u64) -> bool {
        if !self.is_online(from) {
            self.dropped += 1;
            return false;
        }
        let at = self.now + self.delay(hops);
        self.queue.push(Reverse(Pending {
            at,
            seq: self.seq,
            from,
            to,
            env,
        }));
        self.seq += 1;
        true
    }

    /// Next deliverable message, advancing the clock to its arrival time.
    pub fn next_delivery(&mut self) -> Option<Delivery> {
        while let Some(Reverse(p)) = self.queue.pop() {
            self.now = self.now.max(p.at);
            if !self.is_online(p.to) {
                self.dropped += 1;
                continue;
            }
            return Some(Delivery {
                at: p.at,
                from: p.from,
                to: p.to,
                envelope: p.env,
            });
        }
        None
    }
}

#[derive(Debug, Clone, Default)]
pub struct Schedule {
    /// Recipients of server broadcasts.
    pub clients: Vec<u16>,
    pub messages: Vec<Envelope>,
}

/// Client id -> first round in which that client is gone for good.
pub type DropPattern = BTreeMap<u16, u32>;

fn dropped_at(drops: &DropPattern, node: Node, round: u32) -> bool {
    match node {
        Node::Client(c) => drops.get(&c).is_some_and(|&r| round >= r),
        Node::Server => false,
    }
}

/// Replay a schedule through the simulated network. Client-to-client
/// envelopes take two hops through the relay; everything else takes one.
pub fn simulate_network(schedule: &Schedule, drops: &DropPattern, latency: LatencyModel) -> Vec<Delivery> {
    let mut net = Network::new(latency);
    for env in &schedule.messages {
        let from = Node::of_sender(env);
        if dropped_at(drops, from, env.round) {
            continue;
        }
        let targets: Vec<(Node, u64)> = match (from, env.receiver) {
            (Node::Server, SERVER_ID) => schedule.clients.iter().map(|&c| (Node::Client(c), 1)).collect(),
            (_, SERVER_ID) => vec![(Node::Server, 1)],
            (Node::Server, c) => vec![(Node::Client(c), 1)],
            (Node::Client(_), c) => vec![(Node::Client(c), 2)],
        };
        for (to, hops) in targets {
            if !dropped_at(drops, to, env.round) {
                net.post(from, to, env.clone(), hops);
            }
        }
        // one send per tick keeps the schedule order meaningful under latency
        net.advance(1);
    }
    let mut trace = Vec::new();
    while let Some(d) = net.next_delivery() {
        trace.push(d);
    }
    trace
}
