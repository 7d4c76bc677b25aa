//! Attribute categories and view resolution for health records.
//!
//! Attributes flagged `basic` are stored in clear. Everything else lives in
//! a single AES-256-GCM block under SHA-256 of the patient's 120-bit key, so
//! a view can only reveal non-basic values once some flow has released
//! that key: escrow for a physician, decommitment for an emergency, or the
//! patient's own copy.

use std::collections::{BTreeMap, BTreeSet};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aead;
use crate::audit::{record_integrity_digest, AuditLog, Category};
use crate::commitment::{decommit, Commitment, CommitmentError, IrisCode, RejectReason};
use crate::escrow::{EscrowError, EscrowStore, LicenseHash};
use crate::keys::KeyBits;
use crate::time::Timestamp;

const DEFAULT_CATALOG: &str = include_str!("../data/catalog.json");

#[derive(Debug, Error)]
pub enum PrivacyError {
    #[error("catalog: {0}")]
    Catalog(String),
    #[error("attribute `{0}` is not in the catalog")]
    UnknownAttribute(String),
    #[error("record: {0}")]
    Record(String),
    #[error("requester may not view patient {0}'s record")]
    NotOwner(String),
    #[error("key does not decrypt this record")]
    DecryptFailure,
    #[error("record contents do not match the stored digest")]
    Tampered,
    #[error("no commitment enrolled for this patient")]
    NotEnrolled,
    #[error("biometric rejected: {0}")]
    Rejected(RejectReason),
    #[error(transparent)]
    Commitment(CommitmentError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeFlags {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section: Option<String>,
    pub basic: bool,
    pub confidential: bool,
    pub emergency: bool,
}

impl AttributeFlags {
    pub fn in_category(&self, c: Category) -> bool {
        match c {
            Category::Basic => self.basic,
            Category::Confidential => self.confidential,
            Category::Emergency => self.emergency,
        }
    }

    /// Category charged for a write to this attribute.
    pub fn primary_category(&self) -> Category {
        if self.basic {
            Category::Basic
        } else if self.confidential {
            Category::Confidential
        } else {
            Category::Emergency
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeCatalog {
    entries: BTreeMap<String, AttributeFlags>,
}

impl AttributeCatalog {
    pub fn from_json(text: &str) -> Result<Self, PrivacyError> {
        let entries: BTreeMap<String, AttributeFlags> =
            serde_json::from_str(text).map_err(|e| PrivacyError::Catalog(e.to_string()))?;
        if let Some((name, _)) = entries.iter().find(|(_, f)| !(f.basic || f.confidential || f.emergency)) {
            return Err(PrivacyError::Catalog(format!("`{name}` has no category flag set")));
        }
        Ok(Self { entries })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("catalog serializes")
    }

    pub fn get(&self, name: &str) -> Option<&AttributeFlags> {
        self.entries.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &AttributeFlags)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names_in(&self, c: Category) -> impl Iterator<Item = &str> {
        self.iter().filter(move |(_, f)| f.in_category(c)).map(|(n, _)| n)
    }
}

impl Default for AttributeCatalog {
    fn default() -> Self {
        Self::from_json(DEFAULT_CATALOG).expect("bundled catalog is valid")
    }
}

/// Record contents before protection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlainRecord {
    pub patient_no: String,
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SealedBlock {
    /// Base64.
    pub ciphertext: String,
    /// Hex.
    pub nonce: String,
    /// SHA-256 hex over the record's other fields.
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EhrRecord {
    pub patient_no: String,
    /// Basic attributes, in clear.
    pub attributes: BTreeMap<String, String>,
    pub confidential: SealedBlock,
}

#[derive(Serialize)]
struct DigestInput<'a> {
    patient_no: &'a str,
    attributes: &'a BTreeMap<String, String>,
    ciphertext: &'a str,
    nonce: &'a str,
}

fn cipher_key(key: &KeyBits) -> [u8; 32] {
    key.digest()
}

impl EhrRecord {
    /// Canonical bytes covered by the integrity digest.
    pub fn content_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&DigestInput {
            patient_no: &self.patient_no,
            attributes: &self.attributes,
            ciphertext: &self.confidential.ciphertext,
            nonce: &self.confidential.nonce,
        })
        .expect("digest input serializes")
    }

    pub fn is_intact(&self) -> bool {
        record_integrity_digest(&self.content_bytes()) == self.confidential.digest
    }

    fn reseal_digest(&mut self) {
        self.confidential.digest = record_integrity_digest(&self.content_bytes());
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PrivacyError> {
        serde_json::from_str(text).map_err(|e| PrivacyError::Record(e.to_string()))
    }

    /// The protected attributes; fails closed on any authentication error.
    pub fn decrypt(&self, key: &KeyBits) -> Result<BTreeMap<String, String>, PrivacyError> {
        let nonce: [u8; aead::NONCE_BYTES] = hex::decode(&self.confidential.nonce)
            .ok()
            .and_then(|n| n.try_into().ok())
            .ok_or(PrivacyError::DecryptFailure)?;
        let ct = STANDARD.decode(&self.confidential.ciphertext).map_err(|_| PrivacyError::DecryptFailure)?;
        let plain = aead::open(&cipher_key(key), &nonce, &ct).ok_or(PrivacyError::DecryptFailure)?;
        serde_json::from_slice(&plain).map_err(|_| PrivacyError::DecryptFailure)
    }

    fn seal_block<R: RngCore + CryptoRng>(&mut self, hidden: &BTreeMap<String, String>, key: &KeyBits, rng: &mut R) {
        let plain = serde_json::to_vec(hidden).expect("attribute map serializes");
        let (nonce, ct) = aead::seal(&cipher_key(key), &plain, rng);
        self.confidential.ciphertext = STANDARD.encode(ct);
        self.confidential.nonce = hex::encode(nonce);
        self.reseal_digest();
    }
}

/// Splits a record into clear basic attributes and an encrypted block for the rest.
pub fn encrypt_confidential<R: RngCore + CryptoRng>(
    plain: &PlainRecord,
    catalog: &AttributeCatalog,
    key: &KeyBits,
    rng: &mut R,
) -> Result<EhrRecord, PrivacyError> {
    let mut clear = BTreeMap::new();
    let mut hidden = BTreeMap::new();
    for (name, value) in &plain.attributes {
        let flags = catalog.get(name).ok_or_else(|| PrivacyError::UnknownAttribute(name.clone()))?;
        let target = if flags.basic { &mut clear } else { &mut hidden };
        target.insert(name.clone(), value.clone());
    }
    let mut record = EhrRecord {
        patient_no: plain.patient_no.clone(),
        attributes: clear,
        confidential: SealedBlock { ciphertext: String::new(), nonce: String::new(), digest: String::new() },
    };
    record.seal_block(&hidden, key, rng);
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Requester {
    Physician(LicenseHash),
    Patient(String),
}

impl Requester {
    /// Hash recorded as the actor in audit entries.
    pub fn actor_hash(&self) -> LicenseHash {
        match self {
            Requester::Physician(h) => h.clone(),
            Requester::Patient(p) => LicenseHash::of(p),
        }
    }
}

/// An authenticated requester plus whatever key material upstream flows released.
#[derive(Debug, Clone)]
pub struct AccessContext {
    pub requester: Requester,
    /// Released by escrow for a physician, or held by the patient.
    pub unlocked_key: Option<KeyBits>,
    /// Released by a successful decommitment of the patient's iris.
    pub biometric_key: Option<KeyBits>,
}

impl AccessContext {
    pub fn login(requester: Requester) -> Self {
        Self { requester, unlocked_key: None, biometric_key: None }
    }

    pub fn with_key(mut self, key: KeyBits) -> Self {
        self.unlocked_key = Some(key);
        self
    }

    pub fn with_biometric(mut self, key: KeyBits) -> Self {
        self.biometric_key = Some(key);
        self
    }

    pub fn patient_biometric_present(&self) -> bool {
        self.biometric_key.is_some()
    }
}

/// Why a requested section was withheld while the rest of the view survived.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Denial {
    KeyExpired,
    NotEnrolled,
    NoActiveKey,
    DecryptFailure,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct View {
    pub patient_no: String,
    pub attributes: BTreeMap<String, String>,
    pub sections_granted: BTreeSet<Category>,
    pub denials: BTreeMap<Category, Denial>,
}

impl View {
    fn grant(&mut self, c: Category, catalog: &AttributeCatalog, source: &BTreeMap<String, String>) {
        self.sections_granted.insert(c);
        for (name, value) in source {
            if catalog.get(name).is_some_and(|f| f.in_category(c)) {
                self.attributes.insert(name.clone(), value.clone());
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("view serializes")
    }
}

fn all_attributes(record: &EhrRecord, key: &KeyBits) -> Result<BTreeMap<String, String>, PrivacyError> {
    let mut all = record.decrypt(key)?;
    all.extend(record.attributes.iter().map(|(k, v)| (k.clone(), v.clone())));
    Ok(all)
}

fn check_integrity(record: &EhrRecord, actor: &LicenseHash, log: &mut AuditLog, now: Timestamp) -> Result<(), PrivacyError> {
    let bytes = record.content_bytes();
    if log.check_integrity(&bytes, &record.confidential.digest, actor, &record.patient_no, now) {
        Ok(())
    } else {
        Err(PrivacyError::Tampered)
    }
}

/// Resolves what `ctx` may see. One read entry is logged per granted section.
pub fn resolve_view(
    record: &EhrRecord,
    ctx: &AccessContext,
    catalog: &AttributeCatalog,
    escrow: &EscrowStore,
    log: &mut AuditLog,
    now: Timestamp,
) -> Result<View, PrivacyError> {
    let actor = ctx.requester.actor_hash();
    check_integrity(record, &actor, log, now)?;
    let mut view = View { patient_no: record.patient_no.clone(), ..View::default() };

    if let Requester::Patient(p) = &ctx.requester {
        if p != &record.patient_no {
            return Err(PrivacyError::NotOwner(record.patient_no.clone()));
        }
        view.grant(Category::Basic, catalog, &record.attributes);
        if let Some(key) = &ctx.unlocked_key {
            match all_attributes(record, key) {
                Ok(all) => {
                    view.grant(Category::Confidential, catalog, &all);
                    view.grant(Category::Emergency, catalog, &all);
                    // the owner also sees anything no category would show
                    view.attributes.extend(all);
                }
                Err(_) => {
                    view.denials.insert(Category::Confidential, Denial::DecryptFailure);
                }
            }
        }
    } else {
        view.grant(Category::Basic, catalog, &record.attributes);
        if let Some(key) = &ctx.unlocked_key {
            let authorized = match escrow.authorize(&record.patient_no, &actor, now) {
                Ok(_) => Ok(()),
                Err(EscrowError::KeyExpired(_)) => Err(Denial::KeyExpired),
                Err(EscrowError::NotEnrolled(_)) => Err(Denial::NotEnrolled),
                Err(_) => Err(Denial::NoActiveKey),
            };
            match authorized.and_then(|()| all_attributes(record, key).map_err(|_| Denial::DecryptFailure)) {
                Ok(all) => view.grant(Category::Confidential, catalog, &all),
                Err(d) => {
                    view.denials.insert(Category::Confidential, d);
                }
            }
        }
        if let Some(key) = &ctx.biometric_key {
            match all_attributes(record, key) {
                Ok(all) => view.grant(Category::Emergency, catalog, &all),
                Err(_) => {
                    view.denials.insert(Category::Emergency, Denial::DecryptFailure);
                }
            }
        }
    }

    for &c in &view.sections_granted {
        log.record_access(false, &actor, &record.patient_no, c, now);
    }
    Ok(view)
}

/// Emergency access: the patient's iris releases the key, which opens only
/// the emergency attribute set. Nothing is released on any failure.
pub fn emergency_unlock(
    record: &EhrRecord,
    iris_query: &IrisCode,
    commitment: Option<&Commitment>,
    catalog: &AttributeCatalog,
    actor: &LicenseHash,
    log: &mut AuditLog,
    now: Timestamp,
) -> Result<View, PrivacyError> {
    let commitment = commitment.ok_or(PrivacyError::NotEnrolled)?;
    check_integrity(record, actor, log, now)?;
    let key = decommit(iris_query, commitment).map_err(|e| match e {
        CommitmentError::Rejected(r) => PrivacyError::Rejected(r),
        other => PrivacyError::Commitment(other),
    })?;
    let all = all_attributes(record, &key)?;
    let mut view = View { patient_no: record.patient_no.clone(), ..View::default() };
    view.grant(Category::Emergency, catalog, &all);
    log.record_access(false, actor, &record.patient_no, Category::Emergency, now);
    Ok(view)
}

/// Sets one attribute and logs the write under the updater's identity.
/// Non-basic attributes need the key to re-seal the block.
#[allow(clippy::too_many_arguments)]
pub fn update_attribute<R: RngCore + CryptoRng>(
    record: &mut EhrRecord,
    name: &str,
    value: &str,
    key: Option<&KeyBits>,
    catalog: &AttributeCatalog,
    actor: &LicenseHash,
    log: &mut AuditLog,
    now: Timestamp,
    rng: &mut R,
) -> Result<(), PrivacyError> {
    let flags = catalog.get(name).ok_or_else(|| PrivacyError::UnknownAttribute(name.to_owned()))?;
    check_integrity(record, actor, log, now)?;
    if flags.basic {
        record.attributes.insert(name.to_owned(), value.to_owned());
        record.reseal_digest();
    } else {
        let key = key.ok_or(PrivacyError::DecryptFailure)?;
        let mut hidden = record.decrypt(key)?;
        hidden.insert(name.to_owned(), value.to_owned());
        record.seal_block(&hidden, key, rng);
    }
    log.record_access(true, actor, &record.patient_no, flags.primary_category(), now);
    Ok(())
}
