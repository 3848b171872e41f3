use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tabsync_core::corpus::LanguageCode;
use tabsync_core::update::{Direction, EditProposal, Rule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pending,
    Accepted,
    Rejected,
}

impl FromStr for Status {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pending" => Ok(Status::Pending),
            "accepted" => Ok(Status::Accepted),
            "rejected" => Ok(Status::Rejected),
            other => Err(format!("unknown status `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Citation {
    pub url: String,
    #[serde(default)]
    pub note: String,
}

/// Edit families editors see on the wiki.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UpdateType {
    RowTransfer,
    ValueSubstitution,
    AppendValue,
}

impl UpdateType {
    pub const ALL: [UpdateType; 3] = [UpdateType::RowTransfer, UpdateType::ValueSubstitution, UpdateType::AppendValue];

    pub fn of(rule: Rule) -> UpdateType {
        match rule {
            Rule::R1 | Rule::R2 => UpdateType::RowTransfer,
            Rule::R5 => UpdateType::AppendValue,
            _ => UpdateType::ValueSubstitution,
        }
    }
}

impl fmt::Display for UpdateType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpdateType::RowTransfer => "Row Transfer",
            UpdateType::ValueSubstitution => "Value Substitution",
            UpdateType::AppendValue => "Append Value",
        })
    }
}

/// Which way information flows relative to English.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FlowClass {
    EnToX,
    XToY,
    XToEn,
}

impl FlowClass {
    pub const ALL: [FlowClass; 3] = [FlowClass::EnToX, FlowClass::XToY, FlowClass::XToEn];

    pub fn of(direction: Direction) -> FlowClass {
        match (direction.src, direction.tgt) {
            (LanguageCode::En, _) => FlowClass::EnToX,
            (_, LanguageCode::En) => FlowClass::XToEn,
            _ => FlowClass::XToY,
        }
    }
}

impl fmt::Display for FlowClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FlowClass::EnToX => "en->x",
            FlowClass::XToY => "x->y",
            FlowClass::XToEn => "x->en",
        })
    }
}

impl FromStr for FlowClass {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        FlowClass::ALL.into_iter().find(|c| c.to_string() == s.trim()).ok_or_else(|| format!("unknown direction class `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalRecord {
    pub proposal: EditProposal,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub citation: Option<Citation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reviewer: Option<String>,
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decided_at: Option<DateTime<Utc>>,
    pub description: String,
    #[serde(default)]
    pub exported: bool,
}

impl ProposalRecord {
    pub fn id(&self) -> &str {
        &self.proposal.id
    }

    pub fn update_type(&self) -> UpdateType {
        UpdateType::of(self.proposal.rule)
    }

    pub fn flow(&self) -> FlowClass {
        FlowClass::of(self.proposal.direction)
    }

    /// Checks the status invariants; used when replaying a journal.
    pub fn check(&self) -> Result<(), String> {
        if (self.status == Status::Pending) == self.decided_at.is_some() {
            return Err("decided_at must be set exactly when decided".into());
        }
        if self.status == Status::Accepted && self.citation.as_ref().is_none_or(|c| c.url.trim().is_empty()) {
            return Err("accepted without citation".into());
        }
        if self.exported && self.status != Status::Accepted {
            return Err("only accepted records can be exported".into());
        }
        self.proposal.validate()
    }
}

/// Selects records for listing, statistics and export. Empty fields match all.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecordFilter {
    pub status: Option<Status>,
    /// Either an exact direction (`en->hi`) or a class (`en->x`).
    pub direction: Option<String>,
    pub rule: Option<Rule>,
    pub entity: Option<String>,
}

impl RecordFilter {
    /// Fails on a direction that is neither a class nor a language pair.
    pub fn validate(&self) -> Result<(), String> {
        match &self.direction {
            Some(d) if d.parse::<FlowClass>().is_err() => d.parse::<Direction>().map(|_| ()),
            _ => Ok(()),
        }
    }

    pub fn matches(&self, r: &ProposalRecord) -> bool {
        if self.status.is_some_and(|s| s != r.status) || self.rule.is_some_and(|x| x != r.proposal.rule) {
            return false;
        }
        if self.entity.as_ref().is_some_and(|e| *e != r.proposal.entity_id) {
            return false;
        }
        match &self.direction {
            None => true,
            Some(d) => match d.parse::<FlowClass>() {
                Ok(class) => r.flow() == class,
                Err(_) => d.parse::<Direction>().is_ok_and(|d| d == r.proposal.direction),
            },
        }
    }
}
