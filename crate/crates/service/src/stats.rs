use serde::{Deserialize, Serialize};

use crate::record::{FlowClass, ProposalRecord, Status, UpdateType};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub group: String,
    pub total: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub pending: usize,
    /// accepted / (accepted + rejected); null while nothing is decided.
    pub rate: Option<f64>,
}

impl StatsRow {
    fn new(group: String) -> Self {
        StatsRow { group, total: 0, accepted: 0, rejected: 0, pending: 0, rate: None }
    }

    fn add(&mut self, status: Status) {
        self.total += 1;
        match status {
            Status::Pending => self.pending += 1,
            Status::Accepted => self.accepted += 1,
            Status::Rejected => self.rejected += 1,
        }
    }

    fn finish(&mut self) {
        let decided = self.accepted + self.rejected;
        self.rate = (decided > 0).then(|| self.accepted as f64 / decided as f64);
    }

    /// The rate as a percentage with two decimals, e.g. `77.28%`.
    pub fn rate_percent(&self) -> Option<String> {
        self.rate.map(|r| format!("{:.2}%", r * 100.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceStats {
    pub by_type: Vec<StatsRow>,
    pub by_direction: Vec<StatsRow>,
    pub total: StatsRow,
}

impl AcceptanceStats {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a ProposalRecord>) -> AcceptanceStats {
        let mut by_type: Vec<StatsRow> = UpdateType::ALL.iter().map(|t| StatsRow::new(t.to_string())).collect();
        let mut by_direction: Vec<StatsRow> = FlowClass::ALL.iter().map(|c| StatsRow::new(c.to_string())).collect();
        let mut total = StatsRow::new("Total".into());
        for r in records {
            by_type[r.update_type() as usize].add(r.status);
            by_direction[r.flow() as usize].add(r.status);
            total.add(r.status);
        }
        by_type.iter_mut().chain(by_direction.iter_mut()).chain([&mut total]).for_each(StatsRow::finish);
        AcceptanceStats { by_type, by_direction, total }
    }

    /// Plain-text table in the shape editors report.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (title, rows) in [("Type", &self.by_type), ("Direction", &self.by_direction)] {
            out.push_str(&format!("{title:<20} {:>6} {:>16} {:>16} {:>8}\n", "Total", "Accept", "Reject", "Pending"));
            for row in rows.iter().chain([&self.total]) {
                let pct = |n: usize| match row.accepted + row.rejected {
                    0 => format!("{n}"),
                    d => format!("{n}({:.2}%)", n as f64 * 100.0 / d as f64),
                };
                out.push_str(&format!(
                    "{:<20} {:>6} {:>16} {:>16} {:>8}\n",
                    row.group,
                    row.total,
                    pct(row.accepted),
                    pct(row.rejected),
                    row.pending
                ));
            }
            out.push('\n');
        }
        out
    }
}
