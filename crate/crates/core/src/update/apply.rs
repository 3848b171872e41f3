use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{AlignError, Aligner};
use crate::corpus::{Infobox, Row};
use crate::scalar::Scalar;

use super::{EditProposal, EditType, Rule, RuleEngine};

#[derive(Debug, Error, PartialEq)]
pub enum ApplyError {
    #[error("proposal {id} targets {target}, not this table")]
    WrongTarget { id: String, target: String },
    #[error("proposals {first} and {second} both touch row {row}")]
    Conflict { first: String, second: String, row: usize },
    #[error("proposal {id} refers to row {row}, which no longer holds the expected content")]
    Stale { id: String, row: usize },
    #[error("proposal {id} is malformed: {reason}")]
    Invalid { id: String, reason: String },
}

/// Applies accepted proposals to a private copy of `infobox`. Value edits
/// happen in place, deletions by descending index, and added rows go to the
/// end in proposal order. Untouched rows are kept verbatim.
pub fn apply_proposals(infobox: &Infobox, proposals: &[EditProposal]) -> Result<Infobox, ApplyError> {
    let mut touched: Vec<(usize, &str)> = Vec::new();
    for p in proposals {
        if p.entity_id != infobox.entity_id || p.direction.tgt != infobox.language {
            return Err(ApplyError::WrongTarget { id: p.id.clone(), target: format!("{} {}", p.entity_id, p.direction.tgt) });
        }
        p.validate().map_err(|reason| ApplyError::Invalid { id: p.id.clone(), reason })?;
        for row in p.tgt_row.iter().chain(&p.deleted_rows) {
            if let Some((_, other)) = touched.iter().find(|(r, _)| r == row) {
                return Err(ApplyError::Conflict { first: other.to_string(), second: p.id.clone(), row: *row });
            }
            touched.push((*row, &p.id));
        }
    }

    let stale = |p: &EditProposal, row: usize| ApplyError::Stale { id: p.id.clone(), row };
    for p in proposals {
        if let Some(t) = p.tgt_row {
            let row = infobox.rows.get(t).ok_or_else(|| stale(p, t))?;
            if row.values != p.old {
                return Err(stale(p, t));
            }
        }
        if !p.deleted_rows.is_empty() {
            let mut old = Vec::new();
            for &t in &p.deleted_rows {
                old.extend(infobox.rows.get(t).ok_or_else(|| stale(p, t))?.values.iter().cloned());
            }
            if old != p.old {
                return Err(stale(p, p.deleted_rows[0]));
            }
        }
    }

    let mut rows = infobox.rows.clone();
    let invalid = |p: &EditProposal, e: crate::corpus::CorpusError| ApplyError::Invalid { id: p.id.clone(), reason: e.to_string() };
    for p in proposals {
        match (p.edit_type, p.tgt_row) {
            (EditType::ValueSubstitute, Some(t)) => {
                let raw = rows[t].raw.clone();
                rows[t] = Row { raw, ..Row::new(&rows[t].key, &p.new).map_err(|e| invalid(p, e))? };
            }
            (EditType::ValueAddition, Some(t)) => {
                let values: Vec<String> = rows[t].values.iter().chain(&p.new).cloned().collect();
                let raw = rows[t].raw.clone();
                rows[t] = Row { raw, ..Row::new(&rows[t].key, values).map_err(|e| invalid(p, e))? };
            }
            _ => {}
        }
    }
    let deleted: BTreeSet<usize> = proposals.iter().flat_map(|p| p.deleted_rows.iter().copied()).collect();
    for t in deleted.into_iter().rev() {
        rows.remove(t);
    }
    for p in proposals {
        if matches!(p.edit_type, EditType::RowAddition | EditType::RowDelete) {
            rows.push(Row::new(&p.key, &p.new).map_err(|e| invalid(p, e))?);
        }
    }
    Ok(Infobox { rows, ..infobox.clone() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncOutcome {
    pub x: Infobox,
    pub y: Infobox,
    /// Alignment rounds run, including the final one with no proposals.
    pub rounds: usize,
    pub proposals_per_round: Vec<usize>,
    pub applied: Vec<EditProposal>,
}

#[derive(Debug, Error)]
pub enum SyncError {
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Apply(#[from] ApplyError),
    #[error("no fixpoint after {rounds} rounds; proposals per round: {per_round:?}")]
    NoFixpoint { rounds: usize, per_round: Vec<usize> },
}

pub const MAX_SYNC_ROUNDS: usize = 10;

/// Aligns, proposes and applies every proposal until a round proposes
/// nothing. When two proposals of one round touch the same target row the
/// higher-priority one is applied and the other is left for the next round.
pub fn synchronize_fixpoint<T: Scalar>(
    x: &Infobox,
    y: &Infobox,
    aligner: &Aligner<'_, T>,
    engine: &RuleEngine<'_, T>,
) -> Result<SyncOutcome, SyncError> {
    let (mut x, mut y) = (x.clone(), y.clone());
    let mut per_round = Vec::new();
    let mut applied = Vec::new();
    for round in 1..=MAX_SYNC_ROUNDS {
        let alignment = aligner.align(&x, &y)?;
        let out = engine.apply(&x, &y, &alignment);
        per_round.push(out.proposals.len());
        if out.proposals.is_empty() {
            return Ok(SyncOutcome { x, y, rounds: round, proposals_per_round: per_round, applied });
        }
        // Whole-list rewrites claim their row before appends do.
        let (appends, mut ordered): (Vec<EditProposal>, Vec<EditProposal>) =
            out.proposals.into_iter().partition(|p| p.rule == Rule::R5);
        ordered.extend(appends);
        let mut taken: BTreeSet<(bool, usize)> = BTreeSet::new();
        let (to_y, to_x): (Vec<EditProposal>, Vec<EditProposal>) = ordered
            .into_iter()
            .filter(|p| {
                let side = p.direction.tgt == y.language;
                let rows: Vec<(bool, usize)> = p.tgt_row.iter().chain(&p.deleted_rows).map(|r| (side, *r)).collect();
                if rows.iter().any(|r| taken.contains(r)) {
                    return false;
                }
                taken.extend(rows);
                true
            })
            .partition(|p| p.direction.tgt == y.language);
        y = apply_proposals(&y, &to_y)?;
        x = apply_proposals(&x, &to_x)?;
        applied.extend(to_y);
        applied.extend(to_x);
    }
    Err(SyncError::NoFixpoint { rounds: MAX_SYNC_ROUNDS, per_round })
}
