//! AES-256-GCM sealing shared by the record cipher and the sealed escrow store.

use aes_gcm::aead::{Aead, KeyInit};
use aes_gcm::{Aes256Gcm, Nonce};
use rand::{CryptoRng, RngCore};

pub const NONCE_BYTES: usize = 12;

/// Encrypts under a fresh random nonce.
pub fn seal<R: RngCore + CryptoRng>(key: &[u8; 32], plaintext: &[u8], rng: &mut R) -> ([u8; NONCE_BYTES], Vec<u8>) {
    let mut nonce = [0u8; NONCE_BYTES];
    rng.fill_bytes(&mut nonce);
    let cipher = Aes256Gcm::new(key.into());
    let ct = cipher
        .encrypt(Nonce::from_slice(&nonce), plaintext)
        .expect("AES-GCM encryption of an in-memory buffer");
    (nonce, ct)
}

/// `None` on any authentication failure; no partial plaintext is returned.
pub fn open(key: &[u8; 32], nonce: &[u8; NONCE_BYTES], ciphertext: &[u8]) -> Option<Vec<u8>> {
    Aes256Gcm::new(key.into()).decrypt(Nonce::from_slice(nonce), ciphertext).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn round_trip_and_tamper() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let key = [7u8; 32];
        let (nonce, mut ct) = seal(&key, b"hello", &mut rng);
        assert_eq!(open(&key, &nonce, &ct).as_deref(), Some(&b"hello"[..]));
        let mut other = key;
        other[0] ^= 1;
        assert_eq!(open(&other, &nonce, &ct), None);
        ct[0] ^= 1;
        assert_eq!(open(&key, &nonce, &ct), None);
    }
}
