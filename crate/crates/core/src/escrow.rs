//! Patient-owned key custody.
//!
//! Records move through {ACTIVE, EXPIRED} × {UNENROLLED, ENROLLED}. Keys
//! only ever go ACTIVE → EXPIRED (expiry sweep or revocation) and
//! UNENROLLED → ENROLLED (biometric enrollment while active). Expired rows
//! are kept as history. A physician holds at most one ACTIVE key per patient.

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use rand::rngs::OsRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aead;
use crate::glcm::{Enrollment, KeyStatus, TimedKey};
use crate::keys::sha256_hex;
use crate::time::Timestamp;
use crate::vault::KeyChunks;

const SEALED_PREFIX: &str = "sealed:";

#[derive(Debug, Error)]
pub enum EscrowError {
    #[error("physician already holds active key {escrow_id} for this patient")]
    ActiveKeyExists { escrow_id: u64 },
    #[error("no escrow record {0}")]
    NotFound(u64),
    #[error("record {0} belongs to another patient")]
    NotOwner(u64),
    #[error("biometric identity does not match the record's physician")]
    IdentityMismatch,
    #[error("unlocked key does not match the escrowed key")]
    KeyMismatch,
    #[error("key {0} has expired")]
    KeyExpired(u64),
    #[error("key {0} is not enrolled")]
    NotEnrolled(u64),
    #[error("no active key for this patient and physician")]
    NoActiveKey,
    #[error("license hash must be 64 lowercase hex characters")]
    BadLicenseHash,
    #[error("store line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("sealed record cannot be opened with this store key")]
    Unseal,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// SHA-256 hex of a physician license number; the clear number is never kept.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LicenseHash(String);

impl LicenseHash {
    pub fn of(license_no: &str) -> Self {
        LicenseHash(sha256_hex(license_no.as_bytes()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for LicenseHash {
    type Error = EscrowError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        if s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            Ok(LicenseHash(s))
        } else {
            Err(EscrowError::BadLicenseHash)
        }
    }
}

impl From<LicenseHash> for String {
    fn from(h: LicenseHash) -> String {
        h.0
    }
}

impl fmt::Display for LicenseHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscrowRecord {
    pub escrow_id: u64,
    pub patient_no: String,
    pub key_digits: String,
    pub license_hash: LicenseHash,
    pub created_now: Timestamp,
    pub created_expired: Timestamp,
    pub hospital_id: String,
    pub key_status: KeyStatus,
    pub enrolled: Enrollment,
}

impl EscrowRecord {
    pub fn is_active(&self) -> bool {
        self.key_status == KeyStatus::Active
    }

    /// Usable for decryption at `now`: active, enrolled and not past expiry.
    pub fn usable_at(&self, now: Timestamp) -> bool {
        self.is_active() && self.enrolled == Enrollment::Enrolled && now <= self.created_expired
    }
}

/// Evidence that a physician's own fingerprint opened the vault holding
/// this key. Only obtainable from a successful vault unlock.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnrollmentProof {
    license_hash: LicenseHash,
    key_digits: String,
}

impl EnrollmentProof {
    pub fn from_unlock(license_hash: LicenseHash, unlocked: &KeyChunks) -> Self {
        Self { license_hash, key_digits: unlocked.to_digits() }
    }

    pub fn license_hash(&self) -> &LicenseHash {
        &self.license_hash
    }
}

#[derive(Debug, Clone, Default)]
pub struct EscrowStore {
    records: Vec<EscrowRecord>,
    next_id: u64,
    seal_key: Option<[u8; 32]>,
}

impl EscrowStore {
    pub fn new() -> Self {
        Self { records: Vec::new(), next_id: 1, seal_key: None }
    }

    /// A store whose serialized form carries keys encrypted under `seal_key`.
    pub fn sealed(seal_key: [u8; 32]) -> Self {
        Self { seal_key: Some(seal_key), ..Self::new() }
    }

    pub fn records(&self) -> &[EscrowRecord] {
        &self.records
    }

    pub fn get(&self, escrow_id: u64) -> Option<&EscrowRecord> {
        self.records.iter().find(|r| r.escrow_id == escrow_id)
    }

    fn get_mut(&mut self, escrow_id: u64) -> Result<&mut EscrowRecord, EscrowError> {
        self.records.iter_mut().find(|r| r.escrow_id == escrow_id).ok_or(EscrowError::NotFound(escrow_id))
    }

    pub fn query_active(&self, patient_no: &str, license_hash: &LicenseHash) -> Option<&EscrowRecord> {
        self.records
            .iter()
            .find(|r| r.is_active() && r.patient_no == patient_no && &r.license_hash == license_hash)
    }

    /// Lapsed records are swept first so a physician whose previous key ran
    /// out can receive a new one.
    pub fn deposit_key(
        &mut self,
        patient_no: &str,
        timed_key: &TimedKey,
        license_hash: &LicenseHash,
        hospital_id: &str,
        now: Timestamp,
    ) -> Result<&EscrowRecord, EscrowError> {
        self.expire_sweep(now);
        if let Some(existing) = self.query_active(patient_no, license_hash) {
            return Err(EscrowError::ActiveKeyExists { escrow_id: existing.escrow_id });
        }
        if timed_key.status_at(now) == KeyStatus::Expired {
            return Err(EscrowError::KeyExpired(0));
        }
        let record = EscrowRecord {
            escrow_id: self.next_id,
            patient_no: patient_no.to_owned(),
            key_digits: timed_key.digits.clone(),
            license_hash: license_hash.clone(),
            created_now: now,
            created_expired: timed_key.expires_at,
            hospital_id: hospital_id.to_owned(),
            key_status: KeyStatus::Active,
            enrolled: Enrollment::Unenrolled,
        };
        self.next_id += 1;
        self.records.push(record);
        Ok(self.records.last().expect("just pushed"))
    }

    pub fn enroll_key(&mut self, escrow_id: u64, proof: &EnrollmentProof, now: Timestamp) -> Result<&EscrowRecord, EscrowError> {
        let record = self.get_mut(escrow_id)?;
        if !record.is_active() || now > record.created_expired {
            return Err(EscrowError::KeyExpired(escrow_id));
        }
        if proof.license_hash != record.license_hash {
            return Err(EscrowError::IdentityMismatch);
        }
        if proof.key_digits.trim_start_matches('0') != record.key_digits.trim_start_matches('0') {
            return Err(EscrowError::KeyMismatch);
        }
        record.enrolled = Enrollment::Enrolled;
        Ok(record)
    }

    /// Expires every active record whose window closed before `now`.
    pub fn expire_sweep(&mut self, now: Timestamp) -> usize {
        let mut count = 0;
        for r in self.records.iter_mut().filter(|r| r.is_active() && r.created_expired < now) {
            r.key_status = KeyStatus::Expired;
            count += 1;
        }
        count
    }

    pub fn revoke_key(&mut self, patient_no: &str, escrow_id: u64) -> Result<&EscrowRecord, EscrowError> {
        let record = self.get_mut(escrow_id)?;
        if record.patient_no != patient_no {
            return Err(EscrowError::NotOwner(escrow_id));
        }
        record.key_status = KeyStatus::Expired;
        Ok(record)
    }

    /// The record that lets `license_hash` decrypt `patient_no`'s
    /// confidential data at `now`.
    pub fn authorize(&self, patient_no: &str, license_hash: &LicenseHash, now: Timestamp) -> Result<&EscrowRecord, EscrowError> {
        match self.query_active(patient_no, license_hash) {
            Some(r) if now > r.created_expired => Err(EscrowError::KeyExpired(r.escrow_id)),
            Some(r) if r.enrolled != Enrollment::Enrolled => Err(EscrowError::NotEnrolled(r.escrow_id)),
            Some(r) => Ok(r),
            None => {
                let lapsed = self
                    .records
                    .iter()
                    .rev()
                    .find(|r| r.patient_no == patient_no && &r.license_hash == license_hash);
                match lapsed {
                    Some(r) => Err(EscrowError::KeyExpired(r.escrow_id)),
                    None => Err(EscrowError::NoActiveKey),
                }
            }
        }
    }

    /// One JSON record per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let mut r = r.clone();
            if let Some(key) = &self.seal_key {
                let (nonce, ct) = aead::seal(key, r.key_digits.as_bytes(), &mut OsRng);
                r.key_digits = format!("{SEALED_PREFIX}{}{}", hex::encode(nonce), hex::encode(ct));
            }
            out.push_str(&serde_json::to_string(&r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str, seal_key: Option<[u8; 32]>) -> Result<Self, EscrowError> {
        let mut store = Self { seal_key, ..Self::new() };
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let mut r: EscrowRecord =
                serde_json::from_str(line).map_err(|e| EscrowError::Parse { line: i + 1, message: e.to_string() })?;
            if let Some(sealed) = r.key_digits.strip_prefix(SEALED_PREFIX) {
                let key = seal_key.as_ref().ok_or(EscrowError::Unseal)?;
                let raw = hex::decode(sealed).map_err(|_| EscrowError::Unseal)?;
                if raw.len() < aead::NONCE_BYTES {
                    return Err(EscrowError::Unseal);
                }
                let nonce: [u8; aead::NONCE_BYTES] = raw[..aead::NONCE_BYTES].try_into().expect("length checked");
                let plain = aead::open(key, &nonce, &raw[aead::NONCE_BYTES..]).ok_or(EscrowError::Unseal)?;
                r.key_digits = String::from_utf8(plain).map_err(|_| EscrowError::Unseal)?;
            }
            store.next_id = store.next_id.max(r.escrow_id + 1);
            store.records.push(r);
        }
        Ok(store)
    }

    /// Missing files load as an empty store.
    pub fn load(path: &Path, seal_key: Option<[u8; 32]>) -> Result<Self, EscrowError> {
        match fs::read_to_string(path) {
            Ok(text) => Self::from_jsonl(&text, seal_key),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Self { seal_key, ..Self::new() }),
            Err(e) => Err(e.into()),
        }
    }

    /// Rewrites the file through a temporary sibling.
    pub fn save(&self, path: &Path) -> Result<(), EscrowError> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_jsonl())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }
}
