use std::collections::{BTreeMap, HashMap};

use biokey::audit::{verify_bytes, AuditLog, Category, ChainStatus, TagMap};
use biokey::escrow::{EnrollmentProof, EscrowStore, LicenseHash};
use biokey::glcm::{attach_validity, Enrollment, KeyStatus};
use biokey::keys::KeyBits;
use biokey::privacy::{encrypt_confidential, resolve_view, AccessContext, AttributeCatalog, PlainRecord, Requester};
use biokey::vault::KeyChunks;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

const T0: i64 = 1_000_000;

#[derive(Debug, Clone)]
enum Cmd {
    Deposit { patient: u8, doctor: u8, ttl: i64 },
    Enroll { id: u64, doctor: Option<u8>, right_key: bool },
    Sweep,
    Revoke { patient: u8, id: u64 },
    Wait(i64),
}

fn cmd() -> impl Strategy<Value = Cmd> {
    prop_oneof![
        3 => (0u8..2, 0u8..3, 1i64..200).prop_map(|(patient, doctor, ttl)| Cmd::Deposit { patient, doctor, ttl }),
        2 => (1u64..12, proptest::option::of(0u8..3), any::<bool>()).prop_map(|(id, doctor, right_key)| Cmd::Enroll { id, doctor, right_key }),
        1 => Just(Cmd::Sweep),
        1 => (0u8..2, 1u64..12).prop_map(|(patient, id)| Cmd::Revoke { patient, id }),
        2 => (0i64..120).prop_map(Cmd::Wait),
    ]
}

fn lic(d: u8) -> LicenseHash {
    LicenseHash::of(&format!("LIC-{d}"))
}

proptest! {
    #[test]
    fn escrow_state_machine(cmds in proptest::collection::vec(cmd(), 1..40)) {
        let mut store = EscrowStore::new();
        let mut now = T0;
        let mut before: Vec<(KeyStatus, Enrollment)> = Vec::new();
        for c in cmds {
            match c {
                Cmd::Deposit { patient, doctor, ttl } => {
                    let key = attach_validity("123456789012345", now, ttl).unwrap();
                    let _ = store.deposit_key(&format!("P{patient}"), &key, &lic(doctor), "H", now);
                }
                Cmd::Enroll { id, doctor, right_key } => {
                    let owner = store.get(id).map(|r| r.license_hash.clone());
                    let who = doctor.map(lic).or(owner).unwrap_or_else(|| lic(0));
                    let digits = if right_key { "123456789012345" } else { "999" };
                    let proof = EnrollmentProof::from_unlock(who, &KeyChunks::from_key(digits).unwrap());
                    let _ = store.enroll_key(id, &proof, now);
                }
                Cmd::Sweep => {
                    store.expire_sweep(now);
                }
                Cmd::Revoke { patient, id } => {
                    let _ = store.revoke_key(&format!("P{patient}"), id);
                }
                Cmd::Wait(s) => now += s,
            }
            let mut active: HashMap<(String, String), usize> = HashMap::new();
            for r in store.records().iter().filter(|r| r.is_active()) {
                *active.entry((r.patient_no.clone(), r.license_hash.to_string())).or_default() += 1;
            }
            prop_assert!(active.values().all(|&n| n <= 1));
            let after: Vec<_> = store.records().iter().map(|r| (r.key_status, r.enrolled)).collect();
            prop_assert!(after.len() >= before.len());
            for (old, new) in before.iter().zip(&after) {
                prop_assert!(!(old.0 == KeyStatus::Expired && new.0 == KeyStatus::Active));
                prop_assert!(!(old.1 == Enrollment::Enrolled && new.1 == Enrollment::Unenrolled));
                // enrollment only moves while the key is active
                if old.1 == Enrollment::Unenrolled && new.1 == Enrollment::Enrolled {
                    prop_assert_eq!(old.0, KeyStatus::Active);
                }
            }
            before = after;
        }
        let text = store.to_jsonl();
        prop_assert!(!text.contains("LIC-"));
        let reloaded = EscrowStore::from_jsonl(&text, None).unwrap();
        prop_assert_eq!(reloaded.records(), store.records());
    }

    #[test]
    fn audit_log_is_deterministic_and_flip_sensitive(
        accesses in proptest::collection::vec((any::<bool>(), 0u8..4, 0u8..8, 0usize..3, 0i64..1000), 1..60),
        flip in any::<(usize, u8)>(),
    ) {
        let build = || {
            let mut log = AuditLog::new(TagMap::default());
            for &(write, who, patient, cat, dt) in &accesses {
                log.record_access(write, &lic(who), &format!("P{patient}"), Category::ALL[cat], T0 + dt);
            }
            log
        };
        let text = build().to_jsonl();
        prop_assert_eq!(&text, &build().to_jsonl());
        prop_assert_eq!(verify_bytes(text.as_bytes()), ChainStatus::Ok { entries: accesses.len() });
        let mut bytes = text.into_bytes();
        let pos = flip.0 % bytes.len();
        bytes[pos] ^= 1 << (flip.1 % 8);
        let line = bytes[..pos].iter().filter(|&&b| b == b'\n').count();
        prop_assert_eq!(verify_bytes(&bytes), ChainStatus::Tampered { first_index: line });
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sections_only_grow_with_credentials(pick in proptest::collection::vec(any::<bool>(), 40), seed in any::<u64>()) {
        let catalog = AttributeCatalog::default();
        let attributes: BTreeMap<String, String> = catalog
            .iter()
            .zip(&pick)
            .filter(|(_, &keep)| keep)
            .map(|((name, _), _)| (name.to_owned(), format!("value of {name}")))
            .collect();
        let plain = PlainRecord { patient_no: "P0".into(), attributes };
        let key = KeyBits::from_digits("123456789012345");
        let record = encrypt_confidential(&plain, &catalog, &key, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
        let doctor = lic(1);
        let mut store = EscrowStore::new();
        let timed = attach_validity("123456789012345", T0, 600).unwrap();
        let id = store.deposit_key("P0", &timed, &doctor, "H", T0).unwrap().escrow_id;
        store.enroll_key(id, &EnrollmentProof::from_unlock(doctor.clone(), &KeyChunks::from_key("123456789012345").unwrap()), T0).unwrap();

        let login = AccessContext::login(Requester::Physician(doctor));
        let mut log = AuditLog::new(TagMap::default());
        let mut resolve = |ctx: &AccessContext| {
            let before = log.len();
            let v = resolve_view(&record, ctx, &catalog, &store, &mut log, T0 + 1).unwrap();
            (log.len() - before, v)
        };
        let (n0, base) = resolve(&login);
        let (n1, with_key) = resolve(&login.clone().with_key(key));
        let (n2, with_bio) = resolve(&login.clone().with_biometric(key));
        for (n, v) in [(n0, &base), (n1, &with_key), (n2, &with_bio)] {
            prop_assert_eq!(n, v.sections_granted.len());
            prop_assert!(n >= 1);
        }
        prop_assert!(base.sections_granted.is_subset(&with_key.sections_granted));
        prop_assert!(base.sections_granted.is_subset(&with_bio.sections_granted));
        for (name, value) in &base.attributes {
            prop_assert_eq!(with_key.attributes.get(name), Some(value));
            prop_assert_eq!(with_bio.attributes.get(name), Some(value));
        }
    }
}
