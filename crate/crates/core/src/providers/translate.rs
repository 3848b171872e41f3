use thiserror::Error;

use crate::corpus::{Category, Infobox, LanguageCode, Row};

use super::{KeyTranslationMap, ProviderError, TranslationContext, Translator};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("row {row} of `{entity}` ({language}): {source}")]
pub struct TableTranslationError {
    pub entity: String,
    pub language: LanguageCode,
    pub row: usize,
    #[source]
    pub source: ProviderError,
}

/// Translates one row. Keys come from the vote map when translating into
/// English and an entry exists; otherwise the translator is asked, with the
/// row's values and category as context. Values are translated with the key
/// and category as context.
pub fn translate_row(
    row: &Row,
    src: LanguageCode,
    tgt: LanguageCode,
    category: Category,
    vote_map: Option<&KeyTranslationMap>,
    translator: &dyn Translator,
) -> Result<Row, ProviderError> {
    if src == tgt {
        return Ok(Row { raw: None, ..row.clone() });
    }
    let voted = if tgt.is_english() { vote_map.and_then(|m| m.lookup(src, category, &row.key)) } else { None };
    let key = match voted {
        Some(k) => k.to_string(),
        None => translator.translate(&row.key, src, tgt, &TranslationContext::for_key(&row.values, category))?,
    };
    let value_ctx = TranslationContext::for_value(&row.key, category);
    let values = row
        .values
        .iter()
        .map(|v| translator.translate(v, src, tgt, &value_ctx))
        .collect::<Result<Vec<_>, _>>()?;
    Row::new(&key, &values).map_err(|_| ProviderError::EmptyTranslation(row.text()))
}

/// Translates every row of `infobox` into `target`, preserving row order.
pub fn translate_table(
    infobox: &Infobox,
    target: LanguageCode,
    vote_map: Option<&KeyTranslationMap>,
    translator: &dyn Translator,
) -> Result<Infobox, TableTranslationError> {
    if infobox.language == target {
        return Ok(infobox.clone());
    }
    let rows = infobox
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            translate_row(r, infobox.language, target, infobox.category, vote_map, translator).map_err(|source| {
                TableTranslationError { entity: infobox.entity_id.clone(), language: infobox.language, row: i, source }
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Infobox { rows, language: target, ..infobox.clone() })
}
