//! Content digests: blob ids and model/config fingerprints.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Lowercase hex SHA-256 of raw bytes. Used as the content address for
/// stored sample payloads.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    hex::encode(h.finalize())
}

/// Digest of a serializable value via its canonical JSON encoding.
///
/// Struct fields serialize in declaration order, so this is deterministic
/// for the config and model types it is applied to.
pub fn json_digest<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("digest serialization cannot fail");
    sha256_hex(&json)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        // sha256("abc")
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn json_digest_is_stable() {
        #[derive(Serialize)]
        struct C {
            a: u32,
            b: f64,
        }
        let d1 = json_digest(&C { a: 1, b: 0.5 });
        let d2 = json_digest(&C { a: 1, b: 0.5 });
        let d3 = json_digest(&C { a: 2, b: 0.5 });
        assert_eq!(d1, d2);
        assert_ne!(d1, d3);
    }
}
