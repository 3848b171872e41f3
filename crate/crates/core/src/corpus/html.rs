//! Extraction of an infobox table from a locally saved wiki page.

use chrono::NaiveDate;
use ego_tree::NodeRef;
use scraper::{ElementRef, Html, Node, Selector};
use thiserror::Error;

use super::{Category, Infobox, LanguageCode, Row};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HtmlError {
    #[error("no infobox table found")]
    NoInfobox,
    #[error("infobox has no key/value rows")]
    NoRows,
    #[error("missing {0}: not given and not found in the page")]
    MissingMeta(&'static str),
    #[error("invalid {field}: {message}")]
    InvalidMeta { field: &'static str, message: String },
}

/// Metadata supplied by the caller; anything left `None` is read from the
/// page (`<html lang>`, `<meta name="category">`, `<meta name="extracted_at">`,
/// `<title>`).
#[derive(Debug, Clone, Default)]
pub struct HtmlMeta {
    pub entity_id: Option<String>,
    pub language: Option<LanguageCode>,
    pub category: Option<Category>,
    pub extracted_at: Option<NaiveDate>,
}

// Elements whose content never contributes to a value: media, reference
// markers, hidden navigation.
const SKIPPED_TAGS: &[&str] = &["img", "sup", "style", "script", "figure", "audio", "video", "svg"];
const SKIPPED_CLASSES: &[&str] = &["noprint", "reference", "mw-editsection", "signature", "navbar"];
const BREAK_TAGS: &[&str] = &["li", "div", "p", "tr", "dd", "dt"];

pub fn parse_infobox_html(html: &str, meta: &HtmlMeta) -> Result<Infobox, HtmlError> {
    let doc = Html::parse_document(html);
    let table_sel = Selector::parse("table").unwrap();
    let table = doc
        .select(&table_sel)
        .find(|t| t.value().classes().any(|c| c.to_ascii_lowercase().contains("infobox")))
        .ok_or(HtmlError::NoInfobox)?;

    let mut rows = Vec::new();
    let tr_sel = Selector::parse("tr").unwrap();
    for tr in table.select(&tr_sel) {
        let cells: Vec<ElementRef> = tr.children().filter_map(ElementRef::wrap).collect();
        let key_cell = cells.iter().find(|c| c.value().name() == "th");
        let value_cell = cells.iter().find(|c| c.value().name() == "td");
        let (Some(k), Some(v)) = (key_cell, value_cell) else {
            continue;
        };
        let key = segments(*k).join(" ");
        let values = segments(*v);
        // Rows left with no text after stripping (signatures, images) are dropped.
        if let Ok(row) = Row::new(&key, &values) {
            rows.push(row.with_raw(v.html()));
        }
    }
    if rows.is_empty() {
        return Err(HtmlError::NoRows);
    }

    let head_meta = |name: &str| {
        let sel = Selector::parse(&format!("meta[name=\"{name}\"]")).unwrap();
        doc.select(&sel).next().and_then(|m| m.value().attr("content")).map(str::to_string)
    };

    let language = match meta.language {
        Some(l) => l,
        None => {
            let html_sel = Selector::parse("html").unwrap();
            let raw = doc
                .select(&html_sel)
                .next()
                .and_then(|h| h.value().attr("lang"))
                .ok_or(HtmlError::MissingMeta("language"))?;
            raw.parse().map_err(|e: super::CorpusError| HtmlError::InvalidMeta {
                field: "language",
                message: e.to_string(),
            })?
        }
    };
    let category = match meta.category {
        Some(c) => c,
        None => head_meta("category")
            .ok_or(HtmlError::MissingMeta("category"))?
            .parse()
            .map_err(|e: super::CorpusError| HtmlError::InvalidMeta { field: "category", message: e.to_string() })?,
    };
    let extracted_at = match meta.extracted_at {
        Some(d) => d,
        None => {
            let raw = head_meta("extracted_at").ok_or(HtmlError::MissingMeta("extracted_at"))?;
            NaiveDate::parse_from_str(&raw, "%Y-%m-%d")
                .map_err(|e| HtmlError::InvalidMeta { field: "extracted_at", message: e.to_string() })?
        }
    };
    let entity_id = match &meta.entity_id {
        Some(e) => e.clone(),
        None => {
            let title_sel = Selector::parse("title").unwrap();
            doc.select(&title_sel)
                .next()
                .map(|t| t.text().collect::<String>().trim().to_string())
                .filter(|t| !t.is_empty())
                .ok_or(HtmlError::MissingMeta("entity_id"))?
        }
    };

    Infobox::new(entity_id, language, category, extracted_at, rows)
        .map_err(|e| HtmlError::InvalidMeta { field: "infobox", message: e.to_string() })
}

/// Text of a cell split at line breaks and block boundaries.
fn segments(cell: ElementRef) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for child in cell.children() {
        walk(child, &mut current, &mut out);
    }
    flush(&mut current, &mut out);
    out
}

fn flush(current: &mut String, out: &mut Vec<String>) {
    let text = current.split_whitespace().collect::<Vec<_>>().join(" ");
    if !text.is_empty() {
        out.push(text);
    }
    current.clear();
}

fn walk(node: NodeRef<Node>, current: &mut String, out: &mut Vec<String>) {
    match node.value() {
        Node::Text(t) => current.push_str(t),
        Node::Element(e) => {
            let name = e.name();
            if SKIPPED_TAGS.contains(&name)
                || e.classes().any(|c| SKIPPED_CLASSES.iter().any(|s| c.eq_ignore_ascii_case(s)))
            {
                return;
            }
            if name == "br" {
                flush(current, out);
                return;
            }
            let block = BREAK_TAGS.contains(&name);
            if block {
                flush(current, out);
            }
            for child in node.children() {
                walk(child, current, out);
            }
            if block {
                flush(current, out);
            }
        }
        _ => {}
    }
}
