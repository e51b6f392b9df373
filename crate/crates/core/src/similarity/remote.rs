use std::sync::{Condvar, Mutex};
use std::time::Duration;

use super::{ScoreError, Scorer, ScorerConfigError, ScorerKind, SimilarityScore};

pub const DEFAULT_MAX_IN_FLIGHT: usize = 8;

/// Client for an external similarity service.
///
/// Each pair is one `GET <endpoint>?s1=<a>&s2=<b>` whose body is a bare
/// number in `[0, 1]`. The pair is put in lexicographic order before the
/// request so `score(a, b)` and `score(b, a)` send identical queries.
pub struct RemoteScorer {
    endpoint: url::Url,
    agent: ureq::Agent,
    gate: Gate,
}

impl std::fmt::Debug for RemoteScorer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteScorer").field("endpoint", &self.endpoint.as_str()).finish()
    }
}

struct Gate {
    cap: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

impl Gate {
    fn acquire(&self) -> GateGuard<'_> {
        let mut n = self.in_flight.lock().unwrap();
        while *n >= self.cap {
            n = self.freed.wait(n).unwrap();
        }
        *n += 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

impl RemoteScorer {
    pub fn new(endpoint: &str, max_in_flight: usize) -> Result<Self, ScorerConfigError> {
        let endpoint = url::Url::parse(endpoint)
            .map_err(|e| ScorerConfigError::BadEndpoint(endpoint.to_string(), e.to_string()))?;
        let agent: ureq::Agent =
            ureq::Agent::config_builder().timeout_global(Some(Duration::from_secs(30))).build().into();
        Ok(RemoteScorer {
            endpoint,
            agent,
            gate: Gate { cap: max_in_flight.max(1), in_flight: Mutex::new(0), freed: Condvar::new() },
        })
    }
}

impl Scorer for RemoteScorer {
    fn kind(&self) -> ScorerKind {
        ScorerKind::Remote
    }

    fn score(&self, a: &str, b: &str) -> Result<SimilarityScore, ScoreError> {
        let (first, second) = if a <= b { (a, b) } else { (b, a) };
        let mut url = self.endpoint.clone();
        url.query_pairs_mut().append_pair("s1", first).append_pair("s2", second);
        let body = {
            let _slot = self.gate.acquire();
            self.agent
                .get(url.as_str())
                .call()
                .map_err(|e| ScoreError::Transport(e.to_string()))?
                .body_mut()
                .read_to_string()
                .map_err(|e| ScoreError::Transport(e.to_string()))?
        };
        body.trim().parse::<f64>().ok().and_then(SimilarityScore::new).ok_or(ScoreError::BadReply { body })
    }
}
