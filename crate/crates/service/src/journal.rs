use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use parking_lot::Mutex;

use crate::record::ProposalRecord;
use crate::ServiceError;

/// Append-only JSON-lines log of record states; the last line for an id wins.
pub struct Journal {
    path: PathBuf,
    file: Mutex<File>,
}

fn err(path: &Path, message: impl ToString) -> ServiceError {
    ServiceError::Journal { path: path.display().to_string(), message: message.to_string() }
}

impl Journal {
    /// Replays the journal, rewrites it with one line per record, and
    /// returns the records in first-seen order. A torn final line from an
    /// interrupted append is dropped; corruption anywhere else is an error.
    pub fn open(path: impl AsRef<Path>) -> Result<(Journal, Vec<ProposalRecord>), ServiceError> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| err(parent, e))?;
        }
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(err(&path, e)),
        };
        let mut records: Vec<ProposalRecord> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let lines: Vec<&str> = text.lines().collect();
        for (n, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: ProposalRecord = match serde_json::from_str(line) {
                Ok(r) => r,
                Err(e) if n + 1 == lines.len() && !text.ends_with('\n') => {
                    tracing::warn!(line = n + 1, error = %e, "dropping torn journal line");
                    continue;
                }
                Err(e) => return Err(err(&path, format!("line {}: {e}", n + 1))),
            };
            record.check().map_err(|e| err(&path, format!("line {}: {e}", n + 1)))?;
            match index.get(record.id()) {
                Some(&i) => records[i] = record,
                None => {
                    index.insert(record.id().to_string(), records.len());
                    records.push(record);
                }
            }
        }

        let tmp = path.with_extension("compact");
        {
            let mut out = File::create(&tmp).map_err(|e| err(&tmp, e))?;
            let mut body = String::new();
            for r in &records {
                body.push_str(&serde_json::to_string(r).expect("record serializes"));
                body.push('\n');
            }
            out.write_all(body.as_bytes()).and_then(|_| out.sync_all()).map_err(|e| err(&tmp, e))?;
        }
        fs::rename(&tmp, &path).map_err(|e| err(&path, e))?;
        let file = OpenOptions::new().append(true).open(&path).map_err(|e| err(&path, e))?;
        Ok((Journal { path, file: Mutex::new(file) }, records))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes the records as one appended block and syncs it to disk.
    pub fn append(&self, records: &[&ProposalRecord]) -> Result<(), ServiceError> {
        let mut body = String::new();
        for r in records {
            body.push_str(&serde_json::to_string(r).expect("record serializes"));
            body.push('\n');
        }
        let mut f = self.file.lock();
        f.write_all(body.as_bytes()).and_then(|_| f.sync_data()).map_err(|e| err(&self.path, e))
    }
}
