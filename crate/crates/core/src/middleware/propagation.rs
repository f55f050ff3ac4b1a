use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrustedMiddleware;
use crate::ontology::PrincipalKind;
use crate::trust::{Score, ScoreName};

/// A score change announced to peer instances.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScoreUpdate {
    pub principal: String,
    /// Lets a peer that has never seen the principal register it.
    pub principal_kind: PrincipalKind,
    pub score: ScoreName,
    pub value: Score,
    /// Version of the score cell at the origin.
    pub version: u64,
    pub origin: String,
}

/// Delivers update batches to a named peer and returns how many it acknowledged.
pub trait Transport: Send + Sync {
    fn deliver(&self, peer: &str, updates: &[ScoreUpdate]) -> Result<usize, String>;
}

/// Outcome of one delivery attempt to one peer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PeerReport {
    pub peer: String,
    pub acked: usize,
    pub retained: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Per-peer queues of updates not yet acknowledged.
#[derive(Debug, Default)]
pub(crate) struct Outbox {
    queues: Mutex<BTreeMap<String, Vec<ScoreUpdate>>>,
}

impl Outbox {
    pub(crate) fn add_peer(&self, peer: &str) {
        self.queues
            .lock()
            .expect("outbox lock")
            .entry(peer.to_string())
            .or_default();
    }

    pub(crate) fn enqueue(&self, updates: &[ScoreUpdate]) {
        if updates.is_empty() {
            return;
        }
        for q in self.queues.lock().expect("outbox lock").values_mut() {
            q.extend_from_slice(updates);
        }
    }

    pub(crate) fn pending(&self) -> BTreeMap<String, usize> {
        self.queues
            .lock()
            .expect("outbox lock")
            .iter()
            .map(|(p, q)| (p.clone(), q.len()))
            .collect()
    }

    /// One delivery attempt per peer with a non-empty queue. Updates that
    /// arrive during delivery stay queued for the next round.
    pub(crate) fn flush(&self, transport: &dyn Transport) -> Vec<PeerReport> {
        let batches: Vec<(String, Vec<ScoreUpdate>)> = self
            .queues
            .lock()
            .expect("outbox lock")
            .iter()
            .filter(|(_, q)| !q.is_empty())
            .map(|(p, q)| (p.clone(), q.clone()))
            .collect();
        let mut reports = Vec::with_capacity(batches.len());
        for (peer, batch) in batches {
            let result = transport.deliver(&peer, &batch);
            let mut queues = self.queues.lock().expect("outbox lock");
            let q = queues.get_mut(&peer).expect("peers are never removed");
            match result {
                Ok(_) => {
                    q.drain(..batch.len());
                    reports.push(PeerReport {
                        peer,
                        acked: batch.len(),
                        retained: q.len(),
                        error: None,
                    });
                }
                Err(e) => {
                    tracing::warn!(peer = %peer, error = %e, pending = q.len(), "score propagation failed");
                    reports.push(PeerReport {
                        peer,
                        acked: 0,
                        retained: q.len(),
                        error: Some(e),
                    });
                }
            }
        }
        reports
    }
}

impl TrustedMiddleware {
    /// One delivery round to every peer with pending updates.
    pub fn propagate_scores(&self, transport: &dyn Transport) -> Vec<PeerReport> {
        self.outbox.flush(transport)
    }

    /// Repeats delivery rounds, doubling the pause between them, until every
    /// queue is empty or `attempts` rounds have run. Returns the last round.
    pub fn propagate_with_retry(&self, transport: &dyn Transport, attempts: u32, backoff: Duration) -> Vec<PeerReport> {
        let mut pause = backoff;
        let mut last = Vec::new();
        for attempt in 0..attempts.max(1) {
            if attempt > 0 {
                std::thread::sleep(pause);
                pause = pause.saturating_mul(2);
            }
            last = self.propagate_scores(transport);
            if last.iter().all(|r| r.retained == 0) {
                break;
            }
        }
        last
    }

    /// Updates queued per peer.
    pub fn pending_updates(&self) -> BTreeMap<String, usize> {
        self.outbox.pending()
    }
}

/// Faults injected by [`LocalTransport`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chaos {
    pub seed: u64,
    /// Chance each update is delivered twice.
    pub duplicate: f64,
    /// Shuffle each batch before delivery.
    pub reorder: bool,
}

/// Delivers directly to instances in the same process.
#[derive(Default)]
pub struct LocalTransport {
    peers: BTreeMap<String, Arc<TrustedMiddleware>>,
    down: Mutex<BTreeSet<String>>,
    chaos: Option<(Chaos, Mutex<ChaCha8Rng>)>,
}

impl LocalTransport {
    pub fn new() -> Self {
        LocalTransport::default()
    }

    pub fn with_peer(mut self, name: impl Into<String>, tm: Arc<TrustedMiddleware>) -> Self {
        self.peers.insert(name.into(), tm);
        self
    }

    pub fn with_chaos(mut self, chaos: Chaos) -> Self {
        self.chaos = Some((chaos, Mutex::new(ChaCha8Rng::seed_from_u64(chaos.seed))));
        self
    }

    pub fn set_down(&self, peer: &str, down: bool) {
        let mut d = self.down.lock().expect("transport lock");
        if down {
            d.insert(peer.to_string());
        } else {
            d.remove(peer);
        }
    }
}

impl Transport for LocalTransport {
    fn deliver(&self, peer: &str, updates: &[ScoreUpdate]) -> Result<usize, String> {
        if self.down.lock().expect("transport lock").contains(peer) {
            return Err(format!("{peer} is unreachable"));
        }
        let tm = self.peers.get(peer).ok_or_else(|| format!("unknown peer {peer}"))?;
        let mut batch = updates.to_vec();
        if let Some((chaos, rng)) = &self.chaos {
            let mut rng = rng.lock().expect("transport lock");
            let dups: Vec<ScoreUpdate> = batch
                .iter()
                .filter(|_| rng.random_bool(chaos.duplicate))
                .cloned()
                .collect();
            batch.extend(dups);
            if chaos.reorder {
                batch.shuffle(&mut *rng);
            }
        }
        tm.receive_scores(&batch).map_err(|e| e.to_string())?;
        Ok(updates.len())
    }
}

/// Posts batches to `{peer}/peers/scores`.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Result<Self, String> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| e.to_string())?;
        Ok(HttpTransport { client })
    }
}

impl Transport for HttpTransport {
    fn deliver(&self, peer: &str, updates: &[ScoreUpdate]) -> Result<usize, String> {
        let url = format!("{}/peers/scores", peer.trim_end_matches('/'));
        let resp = self.client.post(&url).json(updates).send().map_err(|e| e.to_string())?;
        if !resp.status().is_success() {
            return Err(format!("{url} answered {}", resp.status()));
        }
        Ok(updates.len())
    }
}
