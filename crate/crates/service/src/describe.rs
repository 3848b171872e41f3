use tabsync_core::corpus::LanguageCode;
use tabsync_core::update::{EditProposal, EditType};

use crate::ServiceError;

pub const DEFAULT_URL_TEMPLATE: &str = "https://{lang}.wikipedia.org/wiki/{entity}";

/// Fills `{lang}` and `{entity}`; spaces in the entity become underscores.
pub fn source_url(template: &str, language: LanguageCode, entity: &str) -> String {
    template.replace("{lang}", language.as_str()).replace("{entity}", &entity.trim().replace(' ', "_"))
}

/// The note an editor reads before making the change by hand.
pub fn render_description(p: &EditProposal, source_url: &str) -> Result<String, ServiceError> {
    if source_url.trim().is_empty() {
        return Err(ServiceError::MissingUrl);
    }
    let list = |vs: &[String]| vs.join("; ");
    let mut out = format!(
        "Infobox update for {} ({} Wikipedia)\nSource page: {} ({} Wikipedia)\nChange type: {} ({}: {})\nRow key: {}\n",
        p.entity_id,
        p.direction.tgt,
        source_url.trim(),
        p.direction.src,
        p.edit_type,
        p.rule,
        p.rule.name(),
        p.key,
    );
    if p.source_key != p.key {
        out.push_str(&format!("Source row key: {}\n", p.source_key));
    }
    match p.edit_type {
        EditType::RowAddition => {}
        EditType::RowDelete => {
            let rows: Vec<String> = p.deleted_rows.iter().map(|r| r.to_string()).collect();
            out.push_str(&format!("Rows replaced: {}\nCurrent values: {}\n", rows.join(", "), list(&p.old)));
        }
        EditType::ValueSubstitute => out.push_str(&format!("Current value: {}\n", list(&p.old))),
        EditType::ValueAddition => out.push_str(&format!("Current values: {}\n", list(&p.old))),
    }
    let label = if p.edit_type == EditType::ValueAddition { "Values to append" } else { "Proposed value" };
    out.push_str(&format!("{label}: {}\n", list(&p.new)));
    out.push_str("Citation: [add a supporting reference before accepting]\n");
    Ok(out)
}
