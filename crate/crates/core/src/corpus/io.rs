use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, GoldAlignment, Infobox, LanguageCode};

const GOLD_DIR: &str = "gold";

/// A record that could not be parsed, with its location.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordError {
    pub file: String,
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for RecordError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}: {}", self.file, self.line, self.message)
    }
}

pub fn parse_infobox_line(line: &str) -> Result<Infobox, String> {
    let ib: Infobox = serde_json::from_str(line).map_err(|e| e.to_string())?;
    ib.validate().map_err(|e| e.to_string())?;
    Ok(ib)
}

pub fn parse_gold_line(line: &str) -> Result<GoldAlignment, String> {
    serde_json::from_str(line).map_err(|e| e.to_string())
}

/// Loads a corpus, failing if any record is malformed.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let (corpus, errors) = load_corpus_lenient(path)?;
    let count = errors.len();
    match errors.into_iter().next() {
        None => Ok(corpus),
        Some(first) => Err(CorpusError::Records { count, first: Box::new(first) }),
    }
}

/// Loads every parseable record and reports the rest.
///
/// `path` is either a single newline-delimited JSON file of infoboxes, or a
/// directory holding one sub-directory per language code plus an optional
/// `gold/` directory of alignment records.
pub fn load_corpus_lenient(path: impl AsRef<Path>) -> Result<(Corpus, Vec<RecordError>), CorpusError> {
    let path = path.as_ref();
    let mut tables = Vec::new();
    let mut gold = Vec::new();
    let mut errors = Vec::new();

    if path.is_file() {
        read_tables(path, None, &mut tables, &mut errors)?;
        return Ok((Corpus::new(tables, gold), errors));
    }
    if !path.is_dir() {
        return Err(CorpusError::Io { path: path.display().to_string(), message: "not found".into() });
    }

    for dir in sorted_entries(path)? {
        if !dir.is_dir() {
            continue;
        }
        let name = dir.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        if name == GOLD_DIR {
            for file in data_files(&dir)? {
                for (line_no, line) in read_lines(&file)? {
                    match parse_gold_line(&line) {
                        Ok(g) => gold.push(g),
                        Err(message) => errors.push(RecordError {
                            file: file.display().to_string(),
                            line: line_no,
                            message,
                        }),
                    }
                }
            }
            continue;
        }
        match name.parse::<LanguageCode>() {
            Ok(lang) => {
                for file in data_files(&dir)? {
                    read_tables(&file, Some(lang), &mut tables, &mut errors)?;
                }
            }
            Err(e) => errors.push(RecordError {
                file: dir.display().to_string(),
                line: 0,
                message: format!("directory is not a language: {e}"),
            }),
        }
    }

    let corpus = Corpus::new(tables, gold);
    let errors = check_gold_ranges(&corpus, errors);
    Ok((corpus, errors))
}

fn check_gold_ranges(corpus: &Corpus, mut errors: Vec<RecordError>) -> Vec<RecordError> {
    for g in corpus.gold() {
        let (Some(a), Some(b)) = (corpus.table(&g.entity_id, g.lang_a), corpus.table(&g.entity_id, g.lang_b)) else {
            continue;
        };
        if let Err(e) = g.validate(Some((a.len(), b.len()))) {
            errors.push(RecordError { file: GOLD_DIR.into(), line: 0, message: e.to_string() });
        }
    }
    errors
}

fn read_tables(
    file: &Path,
    expected: Option<LanguageCode>,
    tables: &mut Vec<Infobox>,
    errors: &mut Vec<RecordError>,
) -> Result<(), CorpusError> {
    for (line_no, line) in read_lines(file)? {
        let parsed = parse_infobox_line(&line).and_then(|ib| match expected {
            Some(lang) if lang != ib.language => Err(format!(
                "record `{}` has language {} but sits in directory {}",
                ib.entity_id, ib.language, lang
            )),
            _ => Ok(ib),
        });
        match parsed {
            Ok(ib) => tables.push(ib),
            Err(message) => errors.push(RecordError {
                file: file.display().to_string(),
                line: line_no,
                message,
            }),
        }
    }
    Ok(())
}

fn io_err(path: &Path, e: std::io::Error) -> CorpusError {
    CorpusError::Io { path: path.display().to_string(), message: e.to_string() }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        out.push(entry.map_err(|e| io_err(dir, e))?.path());
    }
    out.sort();
    Ok(out)
}

fn data_files(dir: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    Ok(sorted_entries(dir)?
        .into_iter()
        .filter(|p| p.is_file())
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("jsonl" | "json" | "ndjson")))
        .collect())
}

fn read_lines(file: &Path) -> Result<Vec<(usize, String)>, CorpusError> {
    let text = fs::read_to_string(file).map_err(|e| io_err(file, e))?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.to_string()))
        .collect())
}

/// Writes the corpus in the directory layout read by [`load_corpus`].
/// Returns the files written.
pub fn save_corpus(corpus: &Corpus, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, CorpusError> {
    let dir = dir.as_ref();
    let mut written = Vec::new();
    for lang in corpus.languages() {
        let lang_dir = dir.join(lang.as_str());
        fs::create_dir_all(&lang_dir).map_err(|e| io_err(&lang_dir, e))?;
        let file = lang_dir.join("tables.jsonl");
        let mut body = String::new();
        for t in corpus.tables().iter().filter(|t| t.language == lang) {
            body.push_str(&serde_json::to_string(t).expect("infobox serializes"));
            body.push('\n');
        }
        fs::write(&file, body).map_err(|e| io_err(&file, e))?;
        written.push(file);
    }
    if !corpus.gold().is_empty() {
        let gold_dir = dir.join(GOLD_DIR);
        fs::create_dir_all(&gold_dir).map_err(|e| io_err(&gold_dir, e))?;
        let file = gold_dir.join("gold.jsonl");
        let mut body = String::new();
        for g in corpus.gold() {
            body.push_str(&serde_json::to_string(g).expect("gold serializes"));
            body.push('\n');
        }
        fs::write(&file, body).map_err(|e| io_err(&file, e))?;
        written.push(file);
    }
    Ok(written)
}
