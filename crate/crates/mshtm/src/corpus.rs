//! Transcript ingestion and text cleaning.
//!
//! Two loaders produce a flat list of [`RawTurn`]s: a CSV reader for
//! interview transcripts (one row per speaker turn) and a JSON reader for
//! MediaSum-style dialogue records. [`filter_speakers`] then keeps the
//! requested speaker roles, cleans each turn with [`clean_text`], and groups
//! turns into per-file documents.

use std::collections::{BTreeSet, HashMap};
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("CSV header is missing configured column {column:?}")]
    MissingColumn { column: String },
    #[error("malformed CSV record on line {line}: {source}")]
    Csv {
        line: u64,
        #[source]
        source: csv::Error,
    },
    #[error("invalid JSON at byte {byte_offset} (line {line}, column {column}): {message}")]
    Json {
        byte_offset: usize,
        line: usize,
        column: usize,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeakerRole {
    Interviewer,
    Interviewee,
    Unknown,
}

/// One speaker turn as it appeared in the source file. `text` is raw: bracket
/// annotations and formatting commas are still present.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTurn {
    pub file_id: String,
    pub timestamp: String,
    pub speaker_role: SpeakerRole,
    pub text: String,
}

/// Column names and speaker-role mapping for transcript CSV files.
///
/// Speaker values are trimmed and lowercased before matching against
/// `interviewer_values` / `interviewee_values`; anything else maps to
/// [`SpeakerRole::Unknown`].
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub file_id_col: String,
    pub timestamp_col: String,
    pub speaker_col: String,
    pub text_col: String,
    pub interviewer_values: BTreeSet<String>,
    pub interviewee_values: BTreeSet<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        let set = |items: &[&str]| items.iter().map(|s| s.to_string()).collect();
        CsvSchema {
            file_id_col: "file_num".to_string(),
            timestamp_col: "time_stamp".to_string(),
            speaker_col: "speaker".to_string(),
            text_col: "text".to_string(),
            interviewer_values: set(&["q", "int", "interviewer", "question", "host"]),
            interviewee_values: set(&["a", "ans", "answer", "interviewee", "guest"]),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CleaningConfig {
    /// Remove `[...]` annotation spans such as `[INAUDIBLE]` or `[COUGHS]`.
    pub strip_bracket_annotations: bool,
    /// Join digit groups separated by commas: `3,000` becomes `3000`.
    pub join_comma_numbers: bool,
    /// Literal substrings removed from turns before whitespace normalization.
    pub extra_drop_patterns: Vec<String>,
    /// Roles kept by [`filter_speakers`].
    pub keep_roles: BTreeSet<SpeakerRole>,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        CleaningConfig {
            strip_bracket_annotations: true,
            join_comma_numbers: true,
            extra_drop_patterns: Vec::new(),
            keep_roles: [SpeakerRole::Interviewee].into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CleanTurn {
    pub timestamp: String,
    pub text: String,
}

/// All kept turns of one source file, in original order, cleaned.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanDocument {
    pub doc_id: String,
    pub turns: Vec<CleanTurn>,
}

/// Warning tallies accumulated while loading.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadStats {
    /// Records skipped because required fields were missing or malformed.
    pub records_skipped: usize,
    /// Invalid UTF-8 byte sequences replaced with U+FFFD.
    pub utf8_replacements: usize,
}

fn read_lossy(path: &Path) -> Result<(String, usize), CorpusError> {
    let bytes = std::fs::read(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(decode_lossy(&bytes))
}

/// Decodes bytes as UTF-8, replacing each invalid sequence with U+FFFD and
/// counting the replacements.
fn decode_lossy(bytes: &[u8]) -> (String, usize) {
    let mut out = String::with_capacity(bytes.len());
    let mut replacements = 0usize;
    let mut rest = bytes;
    loop {
        match std::str::from_utf8(rest) {
            Ok(s) => {
                out.push_str(s);
                break;
            }
            Err(e) => {
                let valid = e.valid_up_to();
                out.push_str(std::str::from_utf8(&rest[..valid]).unwrap());
                out.push('\u{FFFD}');
                replacements += 1;
                let skip = e.error_len().unwrap_or(rest.len() - valid);
                rest = &rest[valid + skip..];
            }
        }
    }
    (out, replacements)
}

fn role_for(speaker: &str, schema: &CsvSchema) -> SpeakerRole {
    let key = speaker.trim().to_lowercase();
    if schema.interviewer_values.contains(&key) {
        SpeakerRole::Interviewer
    } else if schema.interviewee_values.contains(&key) {
        SpeakerRole::Interviewee
    } else {
        SpeakerRole::Unknown
    }
}

/// Loads a transcript CSV with a header row. Row order is preserved.
pub fn load_transcript_csv(
    path: &Path,
    schema: &CsvSchema,
) -> Result<(Vec<RawTurn>, LoadStats), CorpusError> {
    let (content, utf8_replacements) = read_lossy(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(content.as_bytes());

    let headers = reader
        .headers()
        .map_err(|source| CorpusError::Csv { line: 1, source })?
        .clone();
    let col = |name: &str| -> Result<usize, CorpusError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CorpusError::MissingColumn {
                column: name.to_string(),
            })
    };
    let file_idx = col(&schema.file_id_col)?;
    let time_idx = col(&schema.timestamp_col)?;
    let speaker_idx = col(&schema.speaker_col)?;
    let text_idx = col(&schema.text_col)?;

    let mut turns = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|source| {
            let line = source
                .position()
                .map(|p| p.line())
                .unwrap_or(0);
            CorpusError::Csv { line, source }
        })?;
        let field = |idx: usize| record.get(idx).unwrap_or("").to_string();
        turns.push(RawTurn {
            file_id: field(file_idx),
            timestamp: field(time_idx),
            speaker_role: role_for(record.get(speaker_idx).unwrap_or(""), schema),
            text: field(text_idx),
        });
    }
    Ok((
        turns,
        LoadStats {
            records_skipped: 0,
            utf8_replacements,
        },
    ))
}

#[derive(Debug, Deserialize)]
struct MediaSumRecord {
    id: Option<String>,
    #[serde(default)]
    interview: Option<Vec<InterviewEntry>>,
    #[serde(default)]
    utt: Option<Vec<String>>,
    #[serde(default)]
    speaker: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum InterviewEntry {
    Pair { speaker: String, utterance: String },
    Bare(String),
}

fn mediasum_role(speaker: &str) -> SpeakerRole {
    let s = speaker.to_lowercase();
    if s.is_empty() {
        SpeakerRole::Unknown
    } else if s.contains("host") || s.contains("anchor") || s.contains("interviewer") {
        SpeakerRole::Interviewer
    } else {
        SpeakerRole::Interviewee
    }
}

fn json_error(content: &str, err: &serde_json::Error) -> CorpusError {
    let (line, column) = (err.line(), err.column());
    let byte_offset = content
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum::<usize>()
        + column.saturating_sub(1);
    CorpusError::Json {
        byte_offset,
        line,
        column,
        message: err.to_string(),
    }
}

/// Loads MediaSum-style dialogue records from a JSON array or from
/// newline-delimited JSON. Each record needs an `id` and either an
/// `interview` list of `{speaker, utterance}` pairs (bare strings are
/// accepted as utterances with an unknown speaker) or parallel `utt` /
/// `speaker` arrays. Records missing those fields are skipped and tallied;
/// a file that is not valid JSON is an error.
pub fn load_mediasum_json(path: &Path) -> Result<(Vec<RawTurn>, LoadStats), CorpusError> {
    let (content, utf8_replacements) = read_lossy(path)?;
    let mut stats = LoadStats {
        records_skipped: 0,
        utf8_replacements,
    };

    let values: Vec<serde_json::Value> = if content.trim_start().starts_with('[') {
        serde_json::from_str(&content).map_err(|e| json_error(&content, &e))?
    } else {
        let mut vals = Vec::new();
        let mut offset = 0usize;
        for (line_no, line) in content.split_inclusive('\n').enumerate() {
            let trimmed = line.trim();
            if !trimmed.is_empty() {
                let val: serde_json::Value =
                    serde_json::from_str(trimmed).map_err(|e| CorpusError::Json {
                        byte_offset: offset + (line.len() - line.trim_start().len()),
                        line: line_no + 1,
                        column: e.column(),
                        message: e.to_string(),
                    })?;
                vals.push(val);
            }
            offset += line.len();
        }
        vals
    };

    let mut turns = Vec::new();
    for value in values {
        let record: MediaSumRecord = match serde_json::from_value(value) {
            Ok(r) => r,
            Err(_) => {
                stats.records_skipped += 1;
                continue;
            }
        };
        let Some(id) = record.id else {
            stats.records_skipped += 1;
            continue;
        };
        if let Some(entries) = record.interview {
            for entry in entries {
                let (role, text) = match entry {
                    InterviewEntry::Pair { speaker, utterance } => {
                        (mediasum_role(&speaker), utterance)
                    }
                    InterviewEntry::Bare(text) => (SpeakerRole::Unknown, text),
                };
                turns.push(RawTurn {
                    file_id: id.clone(),
                    timestamp: String::new(),
                    speaker_role: role,
                    text,
                });
            }
        } else if let Some(utts) = record.utt {
            let speakers = record.speaker.unwrap_or_default();
            for (i, text) in utts.into_iter().enumerate() {
                let role = speakers
                    .get(i)
                    .map(|s| mediasum_role(s))
                    .unwrap_or(SpeakerRole::Unknown);
                turns.push(RawTurn {
                    file_id: id.clone(),
                    timestamp: String::new(),
                    speaker_role: role,
                    text,
                });
            }
        } else {
            stats.records_skipped += 1;
        }
    }
    Ok((turns, stats))
}

/// Removes `[...]` spans. An unclosed `[` removes everything up to the end
/// of its line.
fn strip_brackets(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c != '[' {
            out.push(c);
            continue;
        }
        let rest = &s[i + 1..];
        let line_end = rest.find('\n').unwrap_or(rest.len());
        match rest[..line_end].find(']') {
            Some(close) => {
                // Skip past the matching bracket.
                let end = i + 1 + close;
                while let Some(&(j, _)) = chars.peek() {
                    if j > end {
                        break;
                    }
                    chars.next();
                }
            }
            None => {
                // Skip to end of line, keeping the newline itself.
                let end = i + line_end;
                while let Some(&(j, _)) = chars.peek() {
                    if j > end {
                        break;
                    }
                    chars.next();
                }
            }
        }
    }
    out
}

/// Drops every comma that sits directly between two digits, repeating until
/// none remain.
fn join_comma_numbers(s: &str) -> String {
    let mut current = s.to_string();
    loop {
        let chars: Vec<char> = current.chars().collect();
        let mut out = String::with_capacity(current.len());
        let mut changed = false;
        for (i, &c) in chars.iter().enumerate() {
            let between_digits = c == ','
                && i > 0
                && i + 1 < chars.len()
                && chars[i - 1].is_ascii_digit()
                && chars[i + 1].is_ascii_digit();
            if between_digits {
                changed = true;
            } else {
                out.push(c);
            }
        }
        current = out;
        if !changed {
            return current;
        }
    }
}

/// Cleans one turn of text. Idempotent: `clean_text(clean_text(s)) ==
/// clean_text(s)` for any config.
pub fn clean_text(raw: &str, cfg: &CleaningConfig) -> String {
    let mut s = if cfg.strip_bracket_annotations {
        strip_brackets(raw)
    } else {
        raw.to_string()
    };
    for pattern in &cfg.extra_drop_patterns {
        if pattern.trim().is_empty() {
            continue;
        }
        while s.contains(pattern.as_str()) {
            s = s.replace(pattern.as_str(), "");
        }
    }
    if cfg.join_comma_numbers {
        s = join_comma_numbers(&s);
    }
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Keeps turns whose role is in `cfg.keep_roles`, cleans them, and groups
/// them by file id in order of first appearance. Files whose turns are all
/// filtered out do not appear in the output.
pub fn filter_speakers(turns: &[RawTurn], cfg: &CleaningConfig) -> Vec<CleanDocument> {
    let mut order: Vec<&str> = Vec::new();
    let mut by_file: HashMap<&str, Vec<CleanTurn>> = HashMap::new();
    for turn in turns {
        if !cfg.keep_roles.contains(&turn.speaker_role) {
            continue;
        }
        by_file
            .entry(turn.file_id.as_str())
            .or_insert_with(|| {
                order.push(turn.file_id.as_str());
                Vec::new()
            })
            .push(CleanTurn {
                timestamp: turn.timestamp.clone(),
                text: clean_text(&turn.text, cfg),
            });
    }
    order
        .into_iter()
        .map(|id| CleanDocument {
            doc_id: id.to_string(),
            turns: by_file.remove(id).unwrap(),
        })
        .collect()
}
