//! RNS homomorphic encryption in three layers: word arithmetic and NTTs,
//! pooled RNS polynomials with precomputed contexts, and the CKKS, BFV and
//! BGV operator surfaces on top.

pub mod batch;
pub mod bfv;
pub mod bgv;
pub mod ciphertext;
pub mod ckks;
pub mod context;
pub mod error;
pub mod keys;
pub mod math;
pub mod poly;
pub mod pool;
pub mod serialize;

pub use ciphertext::{Ciphertext, Plaintext};
pub use context::{Context, EncryptionParams, Profile, Scheme};
pub use error::{Error, Result};
pub use keys::{GaloisKeys, KeySwitchKey, PublicKey, RelinKey, SecretKey};
pub use math::sampling::Rng;
pub use pool::{PoolConfig, PoolMode};
