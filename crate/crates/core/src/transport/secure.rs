//! Client-to-client sealed blobs relayed opaquely by the server.
//!
//! Each blob is `key_id(32) | nonce(24) | eph_pk(32) | ciphertext`. The
//! sender runs an ephemeral X25519 exchange against the recipient's static
//! transport key and seals with XChaCha20-Poly1305.

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{XChaCha20Poly1305, XNonce};
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};
use x25519_dalek::{PublicKey, StaticSecret};

use crate::error::{Error, Result};

const KDF_TAG: &[u8] = b"secagg/blob/v1";
pub const KEY_ID_LEN: usize = 32;
pub const NONCE_LEN: usize = 24;
pub const EPH_LEN: usize = 32;
pub const TAG_LEN: usize = 16;
pub const BLOB_OVERHEAD: usize = KEY_ID_LEN + NONCE_LEN + EPH_LEN + TAG_LEN;

pub type KeyId = [u8; KEY_ID_LEN];

pub fn key_id(public: &[u8; 32]) -> KeyId {
    Sha256::digest(public).into()
}

#[derive(Clone)]
pub struct TransportKeypair {
    secret: StaticSecret,
    public: PublicKey,
}

impl std::fmt::Debug for TransportKeypair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransportKeypair")
            .field("public", &self.public.as_bytes())
            .finish_non_exhaustive()
    }
}

impl TransportKeypair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut bytes = [0u8; 32];
        rng.fill_bytes(&mut bytes);
        let secret = StaticSecret::from(bytes);
        let public = PublicKey::from(&secret);
        Self { secret, public }
    }

    pub fn public_bytes(&self) -> [u8; 32] {
        *self.public.as_bytes()
    }

    pub fn key_id(&self) -> KeyId {
        key_id(self.public.as_bytes())
    }
}

fn derive_key(shared: &[u8; 32], eph: &[u8; 32], recipient: &[u8; 32]) -> chacha20poly1305::Key {
    let mut h = Sha256::new();
    h.update(KDF_TAG);
    h.update(shared);
    h.update(eph);
    h.update(recipient);
    h.finalize()
}

fn aad(kid: &KeyId, eph: &[u8; 32]) -> [u8; 64] {
    let mut a = [0u8; 64];
    a[..32].copy_from_slice(kid);
    a[32..].copy_from_slice(eph);
    a
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecureBlob {
    pub key_id: KeyId,
    pub nonce: [u8; NONCE_LEN],
    pub sealed: Vec<u8>,
}

impl SecureBlob {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(KEY_ID_LEN + NONCE_LEN + self.sealed.len());
        out.extend_from_slice(&self.key_id);
        out.extend_from_slice(&self.nonce);
        out.extend_from_slice(&self.sealed);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < BLOB_OVERHEAD {
            return Err(Error::Decode(format!("blob of {} bytes is too short", bytes.len())));
        }
        Ok(Self {
            key_id: bytes[..KEY_ID_LEN].try_into().unwrap(),
            nonce: bytes[KEY_ID_LEN..KEY_ID_LEN + NONCE_LEN].try_into().unwrap(),
            sealed: bytes[KEY_ID_LEN + NONCE_LEN..].to_vec(),
        })
    }
}

pub fn secure_wrap<R: RngCore + CryptoRng>(
    plain: &[u8],
    recipient: &[u8; 32],
    rng: &mut R,
) -> Result<SecureBlob> {
    let eph = TransportKeypair::generate(rng);
    let eph_pk = eph.public_bytes();
    let shared = eph.secret.diffie_hellman(&PublicKey::from(*recipient));
    let key = derive_key(shared.as_bytes(), &eph_pk, recipient);
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let kid = key_id(recipient);
    let ct = XChaCha20Poly1305::new(&key)
        .encrypt(
            XNonce::from_slice(&nonce),
            Payload {
                msg: plain,
                aad: &aad(&kid, &eph_pk),
            },
        )
        .map_err(|_| Error::Authentication)?;
    let mut sealed = Vec::with_capacity(EPH_LEN + ct.len());
    sealed.extend_from_slice(&eph_pk);
    sealed.extend_from_slice(&ct);
    Ok(SecureBlob {
        key_id: kid,
        nonce,
        sealed,
    })
}

pub fn secure_unwrap(blob: &SecureBlob, keys: &TransportKeypair) -> Result<Vec<u8>> {
    if blob.key_id != keys.key_id() {
        return Err(Error::UnknownKey);
    }
    if blob.sealed.len() < EPH_LEN + TAG_LEN {
        return Err(Error::Authentication);
    }
    let eph_pk: [u8; 32] = blob.sealed[..EPH_LEN].try_into().unwrap();
    let shared = keys.secret.diffie_hellman(&PublicKey::from(eph_pk));
    let key = derive_key(shared.as_bytes(), &eph_pk, &keys.public_bytes());
    XChaCha20Poly1305::new(&key)
        .decrypt(
            XNonce::from_slice(&blob.nonce),
            Payload {
                msg: &blob.sealed[EPH_LEN..],
                aad: &aad(&blob.key_id, &eph_pk),
            },
        )
        .map_err(|_| Error::Authentication)
}
