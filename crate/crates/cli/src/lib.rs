//! `tabsync`: one binary driving ingest, statistics, alignment, tuning,
//! evaluation, proposal generation, synchronization and the review service.
//!
//! Exit codes: 0 success, 1 validation failure, 2 provider failure,
//! 3 internal error.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use tabsync_core::alignment::AlignError;
use tabsync_core::corpus::{CorpusError, LanguageCode};
use tabsync_core::eval::EvalError;
use tabsync_core::providers::{ProviderError, VoteError};
use tabsync_core::update::SyncError;
use tabsync_service::ServiceError;

mod commands;
pub mod config;
pub mod manifest;

pub use config::{CliConfig, DictionaryEntry, Providers};
pub use manifest::RunManifest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_PROVIDER: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn invalid(message: impl fmt::Display) -> Self {
        CliError { code: EXIT_VALIDATION, message: message.to_string() }
    }

    pub fn provider(message: impl fmt::Display) -> Self {
        CliError { code: EXIT_PROVIDER, message: message.to_string() }
    }

    pub fn internal(message: impl fmt::Display) -> Self {
        CliError { code: EXIT_INTERNAL, message: message.to_string() }
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        Self::internal(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        Self::invalid(e)
    }
}

impl From<ProviderError> for CliError {
    fn from(e: ProviderError) -> Self {
        Self::provider(e)
    }
}

impl From<VoteError> for CliError {
    fn from(e: VoteError) -> Self {
        Self::provider(e)
    }
}

impl From<AlignError> for CliError {
    fn from(e: AlignError) -> Self {
        match e.provider_error() {
            Some(_) => Self::provider(e),
            None => Self::invalid(e),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Align(a) => a.into(),
            other => Self::invalid(other),
        }
    }
}

impl From<SyncError> for CliError {
    fn from(e: SyncError) -> Self {
        match e {
            SyncError::Align(a) => a.into(),
            other => Self::internal(other),
        }
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Journal { .. } | ServiceError::Io(_) => Self::internal(e),
            other => Self::invalid(other),
        }
    }
}

/// A `src:tgt` language pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LangPair {
    pub src: LanguageCode,
    pub tgt: LanguageCode,
}

impl std::str::FromStr for LangPair {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(':').ok_or_else(|| format!("expected LANG:LANG, got `{s}`"))?;
        let src: LanguageCode = a.trim().parse().map_err(|e: CorpusError| e.to_string())?;
        let tgt: LanguageCode = b.trim().parse().map_err(|e: CorpusError| e.to_string())?;
        if src == tgt {
            return Err(format!("pair `{s}` names the same language twice"));
        }
        Ok(LangPair { src, tgt })
    }
}

impl fmt::Display for LangPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.src, self.tgt)
    }
}

#[derive(Debug, Parser)]
#[command(name = "tabsync", version, about = "Align and synchronize multilingual infoboxes")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Corpus file or directory.
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// Language pair as SRC:TGT.
    #[arg(long, global = true)]
    pub pair: Option<LangPair>,
    /// Restrict to one entity.
    #[arg(long, global = true)]
    pub entity: Option<String>,
    /// Threshold set JSON; a missing file falls back to the defaults.
    #[arg(long, global = true)]
    pub thresholds: Option<PathBuf>,
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Stages to disable, e.g. M4,M5.
    #[arg(long, global = true)]
    pub ablate: Option<String>,
    /// Worker threads for table pairs.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Skip malformed records instead of failing.
    #[arg(long, global = true)]
    pub lenient: bool,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse saved HTML or JSON infoboxes into a corpus.
    Ingest {
        #[arg(long)]
        input: PathBuf,
    },
    /// Table counts, resource tiers, transfer and row statistics.
    Stats,
    /// Align the tables of a language pair.
    Align,
    /// Tune stage thresholds on validation gold.
    Tune,
    /// Score alignments against gold.
    Eval {
        /// Alignment JSON files (directory or file); aligns afresh when absent.
        #[arg(long)]
        predicted: Option<PathBuf>,
        #[arg(long, default_value = "language")]
        group_by: String,
    },
    /// Generate edit proposals for a language pair.
    Propose,
    /// Apply proposals until the pair reaches a fixpoint.
    Sync,
    /// Add proposals to a review journal.
    Enqueue {
        #[arg(long)]
        journal: PathBuf,
        #[arg(long)]
        proposals: PathBuf,
    },
    /// Run the review HTTP service.
    Serve {
        #[arg(long)]
        journal: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: std::net::SocketAddr,
        /// Directory of the built review UI.
        #[arg(long)]
        ui: Option<PathBuf>,
    },
    /// Print acceptance statistics from a journal or a running service.
    Report {
        #[arg(long, conflicts_with = "service")]
        journal: Option<PathBuf>,
        #[arg(long)]
        service: Option<String>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::Stats => "stats",
            Command::Align => "align",
            Command::Tune => "tune",
            Command::Eval { .. } => "eval",
            Command::Propose => "propose",
            Command::Sync => "sync",
            Command::Enqueue { .. } => "enqueue",
            Command::Serve { .. } => "serve",
            Command::Report { .. } => "report",
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. A manifest is written to the output directory for
/// every run that gets past argument parsing.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    let _ = tracing_subscriber::fmt().with_writer(std::io::stderr).with_max_level(tracing::Level::WARN).try_init();

    let recorded: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let mut manifest = RunManifest::new(cli.command.name(), recorded);
    let result = commands::dispatch(&cli, &mut manifest);
    if let Err(e) = &result {
        eprintln!("error: {e}");
        manifest.exit_code = e.code;
        manifest.error = Some(e.message.clone());
    }
    if let Err(e) = write_manifest(&cli.global.out, &manifest) {
        eprintln!("error: {e}");
        return if result.is_ok() { EXIT_INTERNAL } else { manifest.exit_code };
    }
    manifest.exit_code
}

fn write_manifest(out: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let path = out.join(manifest.file_name());
    let body = serde_json::to_string_pretty(manifest).map_err(CliError::internal)?;
    std::fs::write(&path, body + "\n").map_err(|e| CliError::io(&path, e))
}
