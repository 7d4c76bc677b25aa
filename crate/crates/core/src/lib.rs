pub mod aead;
pub mod audit;
pub mod commitment;
pub mod ecc;
pub mod escrow;
pub mod eval;
pub mod glcm;
pub mod keys;
pub mod par;
pub mod privacy;
pub mod scenario;
pub mod time;
pub mod vault;
