//! RNS-CKKS: parameters, encoding, keys and homomorphic evaluation.

mod ciphertext;
mod context;
mod encoding;
mod eval;
mod keys;
mod params;

pub use ciphertext::Ciphertext;
pub use context::CkksContext;
pub use encoding::{decode, decode_complex, encode, encode_complex, encode_constant, Plaintext};
pub use eval::{decrypt, decrypt_values, encrypt, encrypt_values, Evaluator, SCALE_TOLERANCE};
pub use keys::{
    default_rotation_steps, gen_galois_keys, gen_public_key, gen_relin_key, gen_secret_key, keygen,
    keygen_with_steps, GaloisKey, GaloisKeys, KeyBundle, KeySwitchKey, PublicKey, RelinKey, SecretKey,
};
pub use params::{max_modulus_bits, validate_params, ParameterSet, Preset, SecurityMargin, SECURITY_TABLE};
