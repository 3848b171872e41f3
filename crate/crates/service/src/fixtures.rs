//! A decided queue with the published acceptance counts: 603 decisions,
//! 466 accepted, split by edit type and by direction of flow.

use chrono::{DateTime, Duration, TimeZone, Utc};
use tabsync_core::corpus::LanguageCode;
use tabsync_core::update::{Direction, EditProposal, EditType, Evidence, Rule};

use crate::describe::{render_description, source_url, DEFAULT_URL_TEMPLATE};
use crate::record::{Citation, FlowClass, ProposalRecord, Status, UpdateType};

/// (type, total, accepted)
pub const TYPE_COUNTS: [(UpdateType, usize, usize); 3] =
    [(UpdateType::RowTransfer, 461, 368), (UpdateType::ValueSubstitution, 70, 52), (UpdateType::AppendValue, 72, 46)];

/// (direction class, total, accepted)
pub const FLOW_COUNTS: [(FlowClass, usize, usize); 3] =
    [(FlowClass::EnToX, 204, 161), (FlowClass::XToY, 216, 169), (FlowClass::XToEn, 183, 136)];

/// Spreads `counts` evenly over `n` slots so that joining two such
/// sequences gives a roughly proportional cross-table.
fn spread<T: Copy>(counts: &[(T, usize)]) -> Vec<T> {
    let mut slots: Vec<(f64, usize, T)> = Vec::new();
    for (k, &(item, n)) in counts.iter().enumerate() {
        for i in 0..n {
            slots.push(((i as f64 + 0.5) / n as f64, k, item));
        }
    }
    slots.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    slots.into_iter().map(|(_, _, item)| item).collect()
}

fn proposal(n: usize, kind: UpdateType, flow: FlowClass) -> EditProposal {
    use LanguageCode::*;
    const OTHERS: [LanguageCode; 6] = [Hi, De, Fr, Ar, Ko, Af];
    let x = OTHERS[n % OTHERS.len()];
    let y = OTHERS[(n + 1) % OTHERS.len()];
    let direction = match flow {
        FlowClass::EnToX => Direction::new(En, x),
        FlowClass::XToY => Direction::new(x, y),
        FlowClass::XToEn => Direction::new(x, En),
    };
    let rule = match kind {
        UpdateType::RowTransfer if n.is_multiple_of(10) => Rule::R2,
        UpdateType::RowTransfer => Rule::R1,
        UpdateType::AppendValue => Rule::R5,
        UpdateType::ValueSubstitution => [Rule::R3, Rule::R4, Rule::R6, Rule::R7, Rule::R8][n % 5],
    };
    let edit_type = rule.edit_type();
    let (tgt_row, deleted_rows, old) = match edit_type {
        EditType::RowAddition => (None, vec![], vec![]),
        EditType::RowDelete => (None, vec![1, 2], vec!["a".into(), "b".into()]),
        _ => (Some(0), vec![], vec![format!("old {n}")]),
    };
    let mut p = EditProposal {
        id: String::new(),
        rule,
        edit_type,
        direction,
        entity_id: format!("Entity {n}"),
        key: format!("key {n}"),
        source_key: format!("key {n}"),
        src_row: Some(0),
        tgt_row,
        deleted_rows,
        old,
        new: vec![format!("new {n}")],
        evidence: Evidence::default(),
    };
    p.id = p.content_id();
    p
}

/// Pending proposals in the published type/direction mix.
pub fn published_proposals() -> Vec<EditProposal> {
    let types = spread(&TYPE_COUNTS.map(|(t, n, _)| (t, n)));
    let flows = spread(&FLOW_COUNTS.map(|(f, n, _)| (f, n)));
    types.into_iter().zip(flows).enumerate().map(|(n, (t, f))| proposal(n, t, f)).collect()
}

/// All 603 records decided with 466 accepts, matching both marginal tables.
pub fn published_records() -> Vec<ProposalRecord> {
    let t0: DateTime<Utc> = Utc.with_ymd_and_hms(2023, 5, 1, 12, 0, 0).unwrap();
    let mut accepts_by_type = TYPE_COUNTS.map(|(_, _, a)| a);
    let mut accepts_by_flow = FLOW_COUNTS.map(|(_, _, a)| a);
    let proposals = published_proposals();
    // Accept greedily where both margins still have room; a second pass
    // fills what the first could not place.
    let mut accepted = vec![false; proposals.len()];
    for pass in 0..2 {
        for (i, p) in proposals.iter().enumerate() {
            let (t, f) = (UpdateType::of(p.rule) as usize, FlowClass::of(p.direction) as usize);
            let room = accepts_by_type[t] > 0 && accepts_by_flow[f] > 0;
            if !accepted[i] && room && (pass == 1 || i % 4 != 3) {
                accepted[i] = true;
                accepts_by_type[t] -= 1;
                accepts_by_flow[f] -= 1;
            }
        }
    }
    assert!(accepts_by_type.iter().chain(&accepts_by_flow).all(|&n| n == 0), "margins not met");
    proposals
        .into_iter()
        .zip(accepted)
        .enumerate()
        .map(|(n, (p, ok))| {
            let url = source_url(DEFAULT_URL_TEMPLATE, p.direction.src, &p.entity_id);
            ProposalRecord {
                description: render_description(&p, &url).expect("url present"),
                status: if ok { Status::Accepted } else { Status::Rejected },
                citation: ok.then(|| Citation { url: url.clone(), note: "source page".into() }),
                reviewer: Some("editor".into()),
                created_at: t0,
                decided_at: Some(t0 + Duration::minutes(n as i64)),
                exported: false,
                proposal: p,
            }
        })
        .collect()
}

/// Writes the decided records as a journal file.
pub fn write_published_journal(path: &std::path::Path) -> std::io::Result<()> {
    let mut body = String::new();
    for r in published_records() {
        body.push_str(&serde_json::to_string(&r).expect("record serializes"));
        body.push('\n');
    }
    std::fs::write(path, body)
}
