use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use tabsync_core::update::EditProposal;

use crate::describe::{render_description, source_url, DEFAULT_URL_TEMPLATE};
use crate::journal::Journal;
use crate::record::{Citation, Decision, ProposalRecord, RecordFilter, Status};
use crate::stats::AcceptanceStats;
use crate::ServiceError;

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// A clock that only moves when told to.
pub struct FixedClock(Mutex<DateTime<Utc>>);

impl FixedClock {
    pub fn new(at: DateTime<Utc>) -> Self {
        FixedClock(Mutex::new(at))
    }

    pub fn set(&self, at: DateTime<Utc>) {
        *self.0.lock() = at;
    }
}

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        *self.0.lock()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page {
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub items: Vec<ProposalRecord>,
}

#[derive(Default)]
struct State {
    records: Vec<ProposalRecord>,
    index: HashMap<String, usize>,
}

/// The review queue. Reads share a lock; every mutation takes the write
/// lock, appends to the journal, and only then changes memory, so a failed
/// write leaves the record as it was.
pub struct ReviewStore {
    state: RwLock<State>,
    journal: Option<Journal>,
    clock: Arc<dyn Clock>,
    url_template: String,
}

impl ReviewStore {
    pub fn in_memory(clock: Arc<dyn Clock>) -> Self {
        ReviewStore { state: RwLock::new(State::default()), journal: None, clock, url_template: DEFAULT_URL_TEMPLATE.into() }
    }

    pub fn open(path: impl AsRef<Path>, clock: Arc<dyn Clock>) -> Result<Self, ServiceError> {
        let (journal, records) = Journal::open(path)?;
        let index = records.iter().enumerate().map(|(i, r)| (r.id().to_string(), i)).collect();
        Ok(ReviewStore {
            state: RwLock::new(State { records, index }),
            journal: Some(journal),
            clock,
            url_template: DEFAULT_URL_TEMPLATE.into(),
        })
    }

    pub fn with_url_template(mut self, template: impl Into<String>) -> Self {
        self.url_template = template.into();
        self
    }

    pub fn journal_path(&self) -> Option<&Path> {
        self.journal.as_ref().map(Journal::path)
    }

    fn persist(&self, records: &[&ProposalRecord]) -> Result<(), ServiceError> {
        match &self.journal {
            Some(j) => j.append(records),
            None => Ok(()),
        }
    }

    /// Queues proposals as pending. Ids already queued with identical
    /// content are skipped; the whole batch is refused if any id clashes.
    pub fn enqueue(&self, proposals: &[EditProposal]) -> Result<Vec<String>, ServiceError> {
        let mut state = self.state.write();
        let now = self.clock.now();
        let mut fresh: Vec<ProposalRecord> = Vec::new();
        let mut batch: HashMap<&str, &EditProposal> = HashMap::new();
        for p in proposals {
            let invalid = |reason: String| ServiceError::Invalid { id: p.id.clone(), reason };
            if p.id.trim().is_empty() {
                return Err(invalid("empty id".into()));
            }
            p.validate().map_err(invalid)?;
            let known = state.index.get(&p.id).map(|&i| &state.records[i].proposal).or_else(|| batch.get(p.id.as_str()).copied());
            match known {
                Some(k) if k == p => continue,
                Some(_) => return Err(ServiceError::Conflict(p.id.clone())),
                None => {}
            }
            batch.insert(&p.id, p);
            let url = source_url(&self.url_template, p.direction.src, &p.entity_id);
            fresh.push(ProposalRecord {
                proposal: p.clone(),
                status: Status::Pending,
                citation: None,
                reviewer: None,
                created_at: now,
                decided_at: None,
                description: render_description(p, &url)?,
                exported: false,
            });
        }
        self.persist(&fresh.iter().collect::<Vec<_>>())?;
        let ids = proposals.iter().map(|p| p.id.clone()).collect();
        for r in fresh {
            let i = state.records.len();
            state.index.insert(r.id().to_string(), i);
            state.records.push(r);
        }
        Ok(ids)
    }

    pub fn get(&self, id: &str) -> Option<ProposalRecord> {
        let state = self.state.read();
        state.index.get(id).map(|&i| state.records[i].clone())
    }

    /// Records in queue order.
    pub fn records(&self) -> Vec<ProposalRecord> {
        self.state.read().records.clone()
    }

    pub fn list(&self, filter: &RecordFilter, offset: usize, limit: usize) -> Page {
        let state = self.state.read();
        let matching: Vec<&ProposalRecord> = state.records.iter().filter(|r| filter.matches(r)).collect();
        let items = matching.iter().skip(offset).take(limit).map(|r| (*r).clone()).collect();
        Page { total: matching.len(), offset, limit, items }
    }

    /// Moves a pending record to accepted or rejected, exactly once.
    pub fn decide(
        &self,
        id: &str,
        decision: Decision,
        citation: Option<Citation>,
        reviewer: &str,
    ) -> Result<ProposalRecord, ServiceError> {
        let mut state = self.state.write();
        let i = *state.index.get(id).ok_or_else(|| ServiceError::NotFound(id.to_string()))?;
        let current = &state.records[i];
        if current.status != Status::Pending {
            return Err(ServiceError::AlreadyDecided(id.to_string()));
        }
        let citation = citation.filter(|c| !c.url.trim().is_empty());
        if decision == Decision::Accept && citation.is_none() {
            return Err(ServiceError::MissingCitation(id.to_string()));
        }
        let mut next = current.clone();
        next.status = match decision {
            Decision::Accept => Status::Accepted,
            Decision::Reject => Status::Rejected,
        };
        next.citation = citation;
        next.reviewer = Some(reviewer.to_string()).filter(|r| !r.trim().is_empty());
        next.decided_at = Some(self.clock.now());
        self.persist(&[&next])?;
        state.records[i] = next.clone();
        Ok(next)
    }

    pub fn stats(&self, filter: &RecordFilter) -> AcceptanceStats {
        let state = self.state.read();
        AcceptanceStats::from_records(state.records.iter().filter(|r| filter.matches(r)))
    }

    /// Hands accepted, not yet exported proposals to `sink` and marks them
    /// exported once the sink succeeds.
    pub fn export_accepted<F>(&self, filter: &RecordFilter, sink: F) -> Result<Vec<EditProposal>, ServiceError>
    where
        F: FnOnce(&[EditProposal]) -> std::io::Result<()>,
    {
        let mut state = self.state.write();
        let picked: Vec<usize> = (0..state.records.len())
            .filter(|&i| {
                let r = &state.records[i];
                r.status == Status::Accepted && !r.exported && filter.matches(r)
            })
            .collect();
        let proposals: Vec<EditProposal> = picked.iter().map(|&i| state.records[i].proposal.clone()).collect();
        sink(&proposals)?;
        let marked: Vec<ProposalRecord> = picked
            .iter()
            .map(|&i| ProposalRecord { exported: true, ..state.records[i].clone() })
            .collect();
        self.persist(&marked.iter().collect::<Vec<_>>())?;
        for (i, r) in picked.into_iter().zip(marked) {
            state.records[i] = r;
        }
        Ok(proposals)
    }
}
