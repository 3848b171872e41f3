use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::Row;

/// A point in time found in a row. Fields missing from the text stay `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timestamp {
    pub year: i32,
    pub month: Option<u32>,
    pub day: Option<u32>,
    /// `(segment, byte offset)`: segment `i` is value `i`, the key comes last.
    pub position: (usize, usize),
}

impl Timestamp {
    /// True when `self` is later than `other` at the precision both share.
    pub fn newer_than(&self, other: &Timestamp) -> bool {
        if self.year != other.year {
            return self.year > other.year;
        }
        match (self.month, other.month) {
            (Some(a), Some(b)) if a != b => a > b,
            (Some(_), Some(_)) => matches!((self.day, other.day), (Some(a), Some(b)) if a > b),
            _ => false,
        }
    }
}

const MONTHS: &str = "January|February|March|April|May|June|July|August|September|October|November|December|Jan|Feb|Mar|Apr|Jun|Jul|Aug|Sep|Sept|Oct|Nov|Dec";

fn month_number(name: &str) -> Option<u32> {
    let n = name.to_ascii_lowercase();
    let idx = ["jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec"].iter().position(|m| n.starts_with(m))?;
    Some(idx as u32 + 1)
}

struct Patterns {
    iso: Regex,
    day_month_year: Regex,
    month_day_year: Regex,
    month_year: Regex,
    estimate: Regex,
    year: Regex,
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| Patterns {
        iso: Regex::new(r"\b([12]\d{3})-(\d{1,2})-(\d{1,2})\b").unwrap(),
        day_month_year: Regex::new(&format!(r"(?i)\b(\d{{1,2}})\s+({MONTHS})\.?,?\s+([12]\d{{3}})\b")).unwrap(),
        month_day_year: Regex::new(&format!(r"(?i)\b({MONTHS})\.?\s+(\d{{1,2}}),?\s+([12]\d{{3}})\b")).unwrap(),
        month_year: Regex::new(&format!(r"(?i)\b({MONTHS})\.?,?\s+([12]\d{{3}})\b")).unwrap(),
        estimate: Regex::new(r"(?i)\(\s*([12]\d{3})\s*est\.?\s*\)").unwrap(),
        year: Regex::new(r"\b([12]\d{3})\b").unwrap(),
    })
}

struct Found {
    start: usize,
    end: usize,
    year: i32,
    month: Option<u32>,
    day: Option<u32>,
}

fn scan(text: &str) -> Vec<Found> {
    let p = patterns();
    let mut out = Vec::new();
    let num = |s: &str| s.parse::<u32>().ok();
    for c in p.iso.captures_iter(text) {
        let (m, d) = (num(&c[2]), num(&c[3]));
        if matches!(m, Some(1..=12)) && matches!(d, Some(1..=31)) {
            let all = c.get(0).unwrap();
            out.push(Found { start: all.start(), end: all.end(), year: c[1].parse().unwrap(), month: m, day: d });
        }
    }
    for c in p.day_month_year.captures_iter(text) {
        let all = c.get(0).unwrap();
        let d = num(&c[1]).filter(|d| (1..=31).contains(d));
        out.push(Found { start: all.start(), end: all.end(), year: c[3].parse().unwrap(), month: month_number(&c[2]), day: d });
    }
    for c in p.month_day_year.captures_iter(text) {
        let all = c.get(0).unwrap();
        let d = num(&c[2]).filter(|d| (1..=31).contains(d));
        out.push(Found { start: all.start(), end: all.end(), year: c[3].parse().unwrap(), month: month_number(&c[1]), day: d });
    }
    for c in p.month_year.captures_iter(text) {
        let all = c.get(0).unwrap();
        out.push(Found { start: all.start(), end: all.end(), year: c[2].parse().unwrap(), month: month_number(&c[1]), day: None });
    }
    for c in p.estimate.captures_iter(text) {
        let all = c.get(0).unwrap();
        out.push(Found { start: all.start(), end: all.end(), year: c[1].parse().unwrap(), month: None, day: None });
    }
    for c in p.year.captures_iter(text) {
        let all = c.get(0).unwrap();
        out.push(Found { start: all.start(), end: all.end(), year: c[1].parse().unwrap(), month: None, day: None });
    }
    // Drop matches inside a longer one so "14 June 2021" is not also "2021".
    let keep: Vec<bool> = out
        .iter()
        .map(|a| {
            !out.iter().any(|b| {
                b.start <= a.start && a.end <= b.end && (b.end - b.start > a.end - a.start || (b.end - b.start == a.end - a.start && precision(b) > precision(a)))
            })
        })
        .collect();
    out.into_iter().zip(keep).filter(|(_, k)| *k).map(|(f, _)| f).collect()
}

fn precision(f: &Found) -> u8 {
    u8::from(f.month.is_some()) + u8::from(f.day.is_some())
}

/// The latest-positioned date in the row: values are scanned in order, then
/// the key.
pub fn extract_time(row: &Row) -> Option<Timestamp> {
    let segments = row.values.iter().map(String::as_str).chain(std::iter::once(row.key.as_str()));
    let mut best: Option<Timestamp> = None;
    for (seg, text) in segments.enumerate() {
        for f in scan(text) {
            let ts = Timestamp { year: f.year, month: f.month, day: f.day, position: (seg, f.start) };
            if best.is_none_or(|b| ts.position > b.position) {
                best = Some(ts);
            }
        }
    }
    best
}

/// First number in the string, ignoring thousands separators and anything
/// after it.
pub fn parse_numeric(value: &str) -> Option<f64> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"[-+−]?(?:\d{1,3}(?:[,\u{a0}\u{202f}' ]\d{3})+|\d+)(?:\.\d+)?").unwrap()
    });
    let m = re.find(value)?;
    let cleaned: String = m
        .as_str()
        .chars()
        .filter_map(|c| match c {
            '−' => Some('-'),
            ',' | '\u{a0}' | '\u{202f}' | '\'' | ' ' => None,
            c => Some(c),
        })
        .collect();
    cleaned.parse().ok()
}
