//! Scripted end-to-end run over fresh in-memory stores.
//!
//! Each step states the outcome it expects. The run stops at the first step
//! whose actual outcome differs and reports both.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use thiserror::Error;

use crate::audit::{AuditLog, Category, ChainStatus, TagMap};
use crate::commitment::{commit, CommitParams, Commitment};
use crate::escrow::{EnrollmentProof, EscrowError, EscrowStore, LicenseHash};
use crate::eval::{perturb_iris, perturb_minutiae, random_fingerprint, random_iris, NoiseModel};
use crate::glcm::{attach_validity, key_from_image, Angle, GlcmParams, GrayImage, DEFAULT_KEY_LEN, DEFAULT_LEVELS};
use crate::keys::KeyBits;
use crate::privacy::{
    emergency_unlock, encrypt_confidential, resolve_view, update_attribute, AccessContext, AttributeCatalog, Denial,
    EhrRecord, PlainRecord, PrivacyError, Requester, View,
};
use crate::time::Timestamp;
use crate::vault::{lock_vault, unlock_vault, KeyChunks, MatchParams};

pub const PATIENT: &str = "PAT:00A3";
pub const PHYSICIAN: &str = "MDCN-1001";
pub const EMERGENCY_PHYSICIAN: &str = "MDCN-2002";
pub const HOSPITAL: &str = "H-LUTH";
pub const KEY_TTL: i64 = 3_600;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("step `{step}`: expected {expected}, got {actual}")]
    Deviation { step: String, expected: String, actual: String },
    #[error("setup failed: {0}")]
    Setup(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Grant,
    Deny,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Step {
    pub name: String,
    pub at: Timestamp,
    pub outcome: Outcome,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Transcript {
    pub seed: u64,
    pub steps: Vec<Step>,
    pub audit_entries: usize,
    pub audit_chain: ChainStatus,
}

/// Final state, for callers that want to inspect or persist it.
pub struct ScenarioRun {
    pub transcript: Transcript,
    pub record: EhrRecord,
    pub store: EscrowStore,
    pub log: AuditLog,
    pub commitment: Commitment,
}

fn setup<E: std::fmt::Display>(e: E) -> ScenarioError {
    ScenarioError::Setup(e.to_string())
}

struct Script {
    steps: Vec<Step>,
}

impl Script {
    fn check(&mut self, name: &str, at: Timestamp, expected: Outcome, actual: Outcome, detail: String) -> Result<(), ScenarioError> {
        if expected != actual {
            return Err(ScenarioError::Deviation {
                step: name.to_owned(),
                expected: format!("{expected:?}"),
                actual: format!("{actual:?} ({detail})"),
            });
        }
        self.steps.push(Step { name: name.to_owned(), at, outcome: actual, detail });
        Ok(())
    }

    fn expect(&self, name: &str, ok: bool, what: &str) -> Result<(), ScenarioError> {
        if ok {
            Ok(())
        } else {
            Err(ScenarioError::Deviation { step: name.to_owned(), expected: what.to_owned(), actual: "not satisfied".into() })
        }
    }
}

fn shows(v: &View, attr: &str) -> bool {
    v.attributes.contains_key(attr)
}

fn sample_record() -> PlainRecord {
    let attributes: BTreeMap<String, String> = [
        ("Firstname", "Funmilola"),
        ("Lastname", "Davies"),
        ("Gender", "F"),
        ("Genotype", "AS"),
        ("Blood group", "O+"),
        ("HIV/AIDS", "reactive"),
        ("Hepatitis B", "non-reactive"),
        ("Diabetes", "Type 1 Diabetes"),
        ("Depressive illness", "mild, 2019"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_owned(), v.to_owned()))
    .collect();
    PlainRecord { patient_no: PATIENT.to_owned(), attributes }
}

/// A textured image whose GLCM statistics are nondegenerate.
fn patient_image(rng: &mut ChaCha20Rng) -> GrayImage {
    let (w, h) = (48, 48);
    let data: Vec<u8> = (0..w * h)
        .map(|i| {
            let (r, c) = (i / w, i % w);
            let wave = 96.0 + 64.0 * ((r as f64 / 5.0).sin() + (c as f64 / 7.0).cos());
            (wave + rng.gen_range(-24.0..24.0)).clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage::from_intensities(w, h, DEFAULT_LEVELS, &data).expect("valid image")
}

pub fn scenario_demo(seed: u64, start: Timestamp) -> Result<ScenarioRun, ScenarioError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let catalog = AttributeCatalog::default();
    let mut store = EscrowStore::new();
    let mut log = AuditLog::new(TagMap::default());
    let mut script = Script { steps: Vec::new() };
    let d1 = LicenseHash::of(PHYSICIAN);
    let d_er = LicenseHash::of(EMERGENCY_PHYSICIAN);
    let mut now = start;

    // Patient side: texture key, protected record, iris commitment.
    let params = GlcmParams::new(1, Angle::Deg0).map_err(setup)?;
    let digits = key_from_image(&patient_image(&mut rng), params, DEFAULT_KEY_LEN).map_err(setup)?;
    let timed = attach_validity(&digits, now, KEY_TTL).map_err(setup)?;
    let key = KeyBits::from_digits(&digits);
    let mut record = encrypt_confidential(&sample_record(), &catalog, &key, &mut rng).map_err(setup)?;
    let iris = random_iris(&mut rng, PATIENT.to_owned(), CommitParams::default().iris_bits());
    let commitment = commit(&iris, &key, CommitParams::default(), now).map_err(setup)?;
    let physician_fp = random_fingerprint(&mut rng);
    let insider_fp = random_fingerprint(&mut rng);

    // 1. Login only.
    let name = "basic view on login";
    let v = resolve_view(&record, &AccessContext::login(Requester::Physician(d1.clone())), &catalog, &store, &mut log, now)
        .map_err(setup)?;
    script.expect(name, shows(&v, "Genotype") && !shows(&v, "HIV/AIDS"), "Genotype shown, HIV/AIDS hidden")?;
    script.check(name, now, Outcome::Grant, Outcome::Grant, format!("{} basic attributes", v.attributes.len()))?;

    // 2. Deposit, enroll through the physician's own fingerprint, view.
    now += 60;
    let name = "key deposit and enrollment";
    let escrow_id = store.deposit_key(PATIENT, &timed, &d1, HOSPITAL, now).map_err(setup)?.escrow_id;
    let helper = lock_vault(&physician_fp, &KeyChunks::from_key(&digits).map_err(setup)?, rng.gen()).map_err(setup)?;
    let jitter = NoiseModel { xy_sigma: 1.5, theta_sigma: 3.0, ..NoiseModel::NONE };
    let live = perturb_minutiae(&physician_fp, &jitter, &mut rng).map_err(setup)?;
    let unlocked = unlock_vault(&live, &helper, MatchParams::default());
    let enrolled = unlocked
        .map_err(|e| e.to_string())
        .and_then(|chunks| {
            store.enroll_key(escrow_id, &EnrollmentProof::from_unlock(d1.clone(), &chunks), now).map_err(|e| e.to_string())
        })
        .map(|r| format!("escrow {} {:?}/{:?}", r.escrow_id, r.key_status, r.enrolled));
    let (outcome, detail) = match enrolled {
        Ok(d) => (Outcome::Grant, d),
        Err(e) => (Outcome::Deny, e),
    };
    script.check(name, now, Outcome::Grant, outcome, detail)?;

    now += 60;
    let name = "confidential view with enrolled key";
    let released = KeyBits::from_digits(&store.authorize(PATIENT, &d1, now).map_err(setup)?.key_digits);
    let ctx = AccessContext::login(Requester::Physician(d1.clone())).with_key(released);
    let v = resolve_view(&record, &ctx, &catalog, &store, &mut log, now).map_err(setup)?;
    script.expect(name, shows(&v, "HIV/AIDS") && shows(&v, "Depressive illness"), "confidential attributes shown")?;
    script.check(name, now, Outcome::Grant, Outcome::Grant, format!("sections {:?}", v.sections_granted))?;

    // 3. Insider holding the physician's login but not their finger.
    now += 60;
    let name = "insider with stolen login";
    let insider_attempt = unlock_vault(&insider_fp, &helper, MatchParams::default());
    let (outcome, detail) = match insider_attempt {
        Ok(chunks) => match store.enroll_key(escrow_id, &EnrollmentProof::from_unlock(d1.clone(), &chunks), now) {
            Ok(_) => (Outcome::Grant, "vault opened for a foreign fingerprint".to_owned()),
            Err(e) => (Outcome::Deny, e.to_string()),
        },
        Err(e) => (Outcome::Deny, e.to_string()),
    };
    if outcome == Outcome::Deny {
        log.record_alert(&d1, PATIENT, Category::Confidential, now);
    }
    script.check(name, now, Outcome::Deny, outcome, detail)?;

    let name = "insider proof under own identity";
    let own_identity = EnrollmentProof::from_unlock(LicenseHash::of("MDCN-9999"), &KeyChunks::from_key(&digits).map_err(setup)?);
    let (outcome, detail) = match store.enroll_key(escrow_id, &own_identity, now) {
        Err(EscrowError::IdentityMismatch) => (Outcome::Deny, "identity mismatch".to_owned()),
        Err(e) => (Outcome::Deny, e.to_string()),
        Ok(_) => (Outcome::Grant, "foreign identity enrolled".to_owned()),
    };
    if outcome == Outcome::Deny {
        log.record_alert(&d1, PATIENT, Category::Confidential, now);
    }
    script.check(name, now, Outcome::Deny, outcome, detail)?;

    // 4. Emergency with the patient's iris, then an impostor iris.
    now += 60;
    let name = "emergency unlock with patient iris";
    let live_iris = perturb_iris(&iris, &NoiseModel::iris(0.05), &mut rng);
    let v = emergency_unlock(&record, &live_iris, Some(&commitment), &catalog, &d_er, &mut log, now).map_err(setup)?;
    script.expect(
        name,
        shows(&v, "Blood group") && shows(&v, "HIV/AIDS") && !shows(&v, "Depressive illness"),
        "emergency set only",
    )?;
    script.check(name, now, Outcome::Grant, Outcome::Grant, format!("{} emergency attributes", v.attributes.len()))?;

    let name = "emergency unlock with impostor iris";
    let stranger = random_iris(&mut rng, "stranger".to_owned(), iris.len());
    let (outcome, detail) = match emergency_unlock(&record, &stranger, Some(&commitment), &catalog, &d_er, &mut log, now) {
        Ok(v) => (Outcome::Grant, format!("{} attributes released", v.attributes.len())),
        Err(PrivacyError::Rejected(r)) => (Outcome::Deny, r.to_string()),
        Err(e) => return Err(setup(e)),
    };
    script.check(name, now, Outcome::Deny, outcome, detail)?;

    // 5. Write with the updater's signature in the log.
    now += 60;
    let name = "diagnosis write is logged";
    let before = log.len();
    update_attribute(&mut record, "Diabetes", "Type 1 Diabetes, insulin", None, &catalog, &d1, &mut log, now, &mut rng)
        .map_err(setup)?;
    update_attribute(&mut record, "Hepatitis B", "reactive", Some(&key), &catalog, &d1, &mut log, now, &mut rng)
        .map_err(setup)?;
    let writes = log.entries()[before..].iter().filter(|e| e.operation_no == 2 && e.license_hash == d1.as_str()).count();
    script.expect(name, writes == 2 && log.verify().is_ok(), "two signed write entries and an intact chain")?;
    script.check(name, now, Outcome::Grant, Outcome::Grant, format!("{writes} write entries"))?;

    // 6. After the patient's window closes, only the basic view remains.
    now = timed.expires_at + 1;
    let name = "expired key falls back to basic view";
    store.expire_sweep(now);
    let ctx = AccessContext::login(Requester::Physician(d1.clone())).with_key(key);
    let v = resolve_view(&record, &ctx, &catalog, &store, &mut log, now).map_err(setup)?;
    let denied = v.denials.get(&Category::Confidential) == Some(&Denial::KeyExpired);
    script.expect(name, shows(&v, "Genotype") && !shows(&v, "HIV/AIDS"), "basic view unchanged")?;
    script.check(name, now, Outcome::Deny, if denied { Outcome::Deny } else { Outcome::Grant }, "key expired".into())?;

    let transcript = Transcript { seed, steps: script.steps, audit_entries: log.len(), audit_chain: log.verify() };
    Ok(ScenarioRun { transcript, record, store, log, commitment })
}
