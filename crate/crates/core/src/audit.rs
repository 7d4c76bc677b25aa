//! Tamper-evident access log.
//!
//! Each entry stores only hashed identifiers and small integer tags. The
//! `operation_hash` covers a fixed canonical string and `chain_hash` links
//! every entry to its predecessor, so edits, reordering and deletions all
//! surface at the first affected index.

use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::escrow::LicenseHash;
use crate::keys::sha256_hex;
use crate::time::Timestamp;

pub const GENESIS: &str = "0000000000000000000000000000000000000000000000000000000000000000";
const CANONICAL_VERSION: &str = "AUD1";

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("tag map must assign 1, 2 and 3 to exactly one category each")]
    TagMapNotBijective,
    #[error("tag map: {0}")]
    TagMapParse(String),
    #[error("log line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("audit store write failed: {0}")]
    Store(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Basic,
    Confidential,
    Emergency,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Basic, Category::Confidential, Category::Emergency];

    pub fn name(self) -> &'static str {
        match self {
            Category::Basic => "basic",
            Category::Confidential => "confidential",
            Category::Emergency => "emergency",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown category `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operation {
    Read,
    Write,
    /// Security event: a record failed its digest check, or a biometric
    /// binding was refused.
    Alert,
}

impl Operation {
    pub fn tag(self) -> u8 {
        match self {
            Operation::Read => 1,
            Operation::Write => 2,
            Operation::Alert => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(Operation::Read),
            2 => Some(Operation::Write),
            3 => Some(Operation::Alert),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Operation::Read => "read",
            Operation::Write => "write",
            Operation::Alert => "alert",
        }
    }
}

/// Deployment-fixed permutation of {1,2,3} over the record categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TagMapRepr", into = "TagMapRepr")]
pub struct TagMap {
    tags: [u8; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TagMapRepr {
    basic: u8,
    confidential: u8,
    emergency: u8,
}

impl TagMap {
    pub fn new(basic: u8, confidential: u8, emergency: u8) -> Result<Self, AuditError> {
        let mut sorted = [basic, confidential, emergency];
        sorted.sort_unstable();
        if sorted != [1, 2, 3] {
            return Err(AuditError::TagMapNotBijective);
        }
        Ok(Self { tags: [basic, confidential, emergency] })
    }

    pub fn tag(&self, category: Category) -> u8 {
        self.tags[category as usize]
    }

    pub fn category(&self, tag: u8) -> Option<Category> {
        Category::ALL.into_iter().find(|&c| self.tag(c) == tag)
    }

    pub fn from_json(text: &str) -> Result<Self, AuditError> {
        serde_json::from_str(text).map_err(|e| AuditError::TagMapParse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tag map serializes")
    }
}

impl Default for TagMap {
    fn default() -> Self {
        Self { tags: [3, 1, 2] }
    }
}

impl TryFrom<TagMapRepr> for TagMap {
    type Error = AuditError;

    fn try_from(r: TagMapRepr) -> Result<Self, Self::Error> {
        TagMap::new(r.basic, r.confidential, r.emergency)
    }
}

impl From<TagMap> for TagMapRepr {
    fn from(m: TagMap) -> Self {
        TagMapRepr { basic: m.tags[0], confidential: m.tags[1], emergency: m.tags[2] }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditEntry {
    pub operation_id: u64,
    pub operation_no: u8,
    pub license_hash: String,
    pub timestamp: Timestamp,
    pub patient_hash: String,
    pub rec_type_no: u8,
    pub operation_hash: String,
    pub chain_hash: String,
}

impl AuditEntry {
    pub fn canonical(&self) -> String {
        canonical_string(
            self.operation_id,
            self.operation_no,
            &self.license_hash,
            self.timestamp,
            &self.patient_hash,
            self.rec_type_no,
        )
    }
}

fn canonical_string(id: u64, op: u8, license_hash: &str, ts: Timestamp, patient_hash: &str, rec: u8) -> String {
    format!("{CANONICAL_VERSION}|{id}|{op}|{license_hash}|{ts}|{patient_hash}|{rec}")
}

pub fn chain_link(prev_chain: &str, operation_hash: &str) -> String {
    sha256_hex(format!("{prev_chain}{operation_hash}").as_bytes())
}

/// Digest of a record's canonical bytes.
pub fn record_integrity_digest(record_bytes: &[u8]) -> String {
    sha256_hex(record_bytes)
}

fn is_hex64(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ChainStatus {
    Ok { entries: usize },
    Tampered { first_index: usize },
}

impl ChainStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, ChainStatus::Ok { .. })
    }
}

/// First index whose tags, hashes or chain link fail to recompute.
pub fn verify_chain(entries: &[AuditEntry]) -> ChainStatus {
    let mut prev = GENESIS.to_string();
    for (i, e) in entries.iter().enumerate() {
        let well_formed = Operation::from_tag(e.operation_no).is_some()
            && (1..=3).contains(&e.rec_type_no)
            && is_hex64(&e.license_hash)
            && is_hex64(&e.patient_hash)
            && is_hex64(&e.operation_hash)
            && is_hex64(&e.chain_hash);
        if !well_formed
            || sha256_hex(e.canonical().as_bytes()) != e.operation_hash
            || chain_link(&prev, &e.operation_hash) != e.chain_hash
        {
            return ChainStatus::Tampered { first_index: i };
        }
        prev.clone_from(&e.chain_hash);
    }
    ChainStatus::Ok { entries: entries.len() }
}

/// Like [`verify_chain`], and additionally requires the last chain hash to
/// equal a head published elsewhere. This catches truncation, which leaves
/// a shorter but internally consistent chain.
pub fn verify_chain_anchored(entries: &[AuditEntry], head: &str) -> ChainStatus {
    match verify_chain(entries) {
        ChainStatus::Ok { entries: n } if entries.last().map_or(GENESIS, |e| e.chain_hash.as_str()) != head => {
            ChainStatus::Tampered { first_index: n }
        }
        status => status,
    }
}

/// Verifies a serialized log directly. A line that does not parse, or does
/// not re-serialize to exactly the same bytes, counts as tampered.
pub fn verify_bytes(bytes: &[u8]) -> ChainStatus {
    match parse_strict(bytes) {
        Ok(entries) => verify_chain(&entries),
        Err(status) => status,
    }
}

/// [`verify_bytes`] with a published head; see [`verify_chain_anchored`].
pub fn verify_bytes_anchored(bytes: &[u8], head: &str) -> ChainStatus {
    match parse_strict(bytes) {
        Ok(entries) => verify_chain_anchored(&entries, head),
        Err(status) => status,
    }
}

fn parse_strict(bytes: &[u8]) -> Result<Vec<AuditEntry>, ChainStatus> {
    let body = bytes.strip_suffix(b"\n").unwrap_or(bytes);
    if body.is_empty() {
        return Ok(Vec::new());
    }
    let mut entries = Vec::new();
    for (i, line) in body.split(|&b| b == b'\n').enumerate() {
        let parsed = serde_json::from_slice::<AuditEntry>(line)
            .ok()
            .filter(|e| serde_json::to_vec(e).map(|v| v == line).unwrap_or(false));
        match parsed {
            Some(e) => entries.push(e),
            None => return Err(ChainStatus::Tampered { first_index: i }),
        }
    }
    Ok(entries)
}

/// Append-only log. Entries can be added but never changed through this API.
#[derive(Debug, Clone, Default)]
pub struct AuditLog {
    entries: Vec<AuditEntry>,
    tags: TagMap,
}

impl AuditLog {
    pub fn new(tags: TagMap) -> Self {
        Self { entries: Vec::new(), tags }
    }

    pub fn entries(&self) -> &[AuditEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn tags(&self) -> &TagMap {
        &self.tags
    }

    pub fn head(&self) -> &str {
        self.entries.last().map_or(GENESIS, |e| e.chain_hash.as_str())
    }

    fn append(&mut self, op: Operation, actor: &LicenseHash, patient_no: &str, category: Category, now: Timestamp) -> &AuditEntry {
        let operation_id = self.entries.last().map_or(1, |e| e.operation_id + 1);
        let patient_hash = sha256_hex(patient_no.as_bytes());
        let rec = self.tags.tag(category);
        let canonical = canonical_string(operation_id, op.tag(), actor.as_str(), now, &patient_hash, rec);
        let operation_hash = sha256_hex(canonical.as_bytes());
        let chain_hash = chain_link(self.head(), &operation_hash);
        self.entries.push(AuditEntry {
            operation_id,
            operation_no: op.tag(),
            license_hash: actor.as_str().to_owned(),
            timestamp: now,
            patient_hash,
            rec_type_no: rec,
            operation_hash,
            chain_hash,
        });
        self.entries.last().expect("just pushed")
    }

    /// Logs a read or write. Alerts go through [`record_alert`](Self::record_alert).
    pub fn record_access(&mut self, write: bool, actor: &LicenseHash, patient_no: &str, category: Category, now: Timestamp) -> &AuditEntry {
        let op = if write { Operation::Write } else { Operation::Read };
        self.append(op, actor, patient_no, category, now)
    }

    /// Logs a refused access, such as a biometric that did not match the
    /// claimed identity.
    pub fn record_alert(&mut self, actor: &LicenseHash, patient_no: &str, category: Category, now: Timestamp) -> &AuditEntry {
        self.append(Operation::Alert, actor, patient_no, category, now)
    }

    /// Compares a record against its stored digest, logging an alert on mismatch.
    pub fn check_integrity(
        &mut self,
        record_bytes: &[u8],
        stored_digest: &str,
        actor: &LicenseHash,
        patient_no: &str,
        now: Timestamp,
    ) -> bool {
        let intact = record_integrity_digest(record_bytes) == stored_digest;
        if !intact {
            self.append(Operation::Alert, actor, patient_no, Category::Basic, now);
        }
        intact
    }

    pub fn verify(&self) -> ChainStatus {
        verify_chain(&self.entries)
    }

    pub fn to_jsonl(&self) -> String {
        entries_to_jsonl(&self.entries)
    }

    /// Parses without verifying; call [`verify`](Self::verify) or [`verify_bytes`] separately.
    pub fn from_jsonl(text: &str, tags: TagMap) -> Result<Self, AuditError> {
        let entries = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| AuditError::Parse { line: i + 1, message: e.to_string() }))
            .collect::<Result<Vec<AuditEntry>, _>>()?;
        Ok(Self { entries, tags })
    }

    pub fn load(path: &Path, tags: TagMap) -> Result<Self, AuditError> {
        match fs::read_to_string(path) {
            Ok(text) => Self::from_jsonl(&text, tags),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Self::new(tags)),
            Err(e) => Err(e.into()),
        }
    }

    /// Appends entries past `already_written` to the file, leaving existing bytes untouched.
    pub fn append_to(&self, path: &Path, already_written: usize) -> Result<(), AuditError> {
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        file.write_all(entries_to_jsonl(&self.entries[already_written.min(self.entries.len())..]).as_bytes())?;
        file.sync_data()?;
        Ok(())
    }
}

fn entries_to_jsonl(entries: &[AuditEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).expect("entry serializes"));
        out.push('\n');
    }
    out
}

/// Interpreted form of an entry for authorized viewers.
#[derive(Debug, Clone, Serialize)]
pub struct InterpretedEntry {
    pub operation_id: u64,
    pub operation: &'static str,
    pub category: Option<Category>,
    pub timestamp: Timestamp,
    pub license_hash: String,
    pub patient_hash: String,
}

pub fn interpret(entry: &AuditEntry, tags: &TagMap) -> InterpretedEntry {
    InterpretedEntry {
        operation_id: entry.operation_id,
        operation: Operation::from_tag(entry.operation_no).map_or("unknown", Operation::name),
        category: tags.category(entry.rec_type_no),
        timestamp: entry.timestamp,
        license_hash: entry.license_hash.clone(),
        patient_hash: entry.patient_hash.clone(),
    }
}
