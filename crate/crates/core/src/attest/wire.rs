//! Canonical binary encoding used for every hash and signature.
//!
//! Integers are big-endian, `f64` is its IEEE-754 bit pattern as a
//! big-endian `u64`, strings and variable byte strings carry a `u32`
//! length prefix, fixed-size keys, digests and signatures are written raw,
//! and sequences carry a `u32` count. Each message starts with a domain tag
//! string. See `docs/wire-format.md`.

use sha2::{Digest as _, Sha256};

pub type Digest = [u8; 32];

#[derive(Debug, Default, Clone)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn tagged(tag: &str) -> Self {
        let mut e = Self::default();
        e.str(tag);
        e
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.u64(v.to_bits())
    }

    pub fn len(&mut self, n: usize) -> &mut Self {
        self.u32(u32::try_from(n).expect("field longer than u32::MAX"))
    }

    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.len(b.len());
        self.buf.extend_from_slice(b);
        self
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.bytes(s.as_bytes())
    }

    pub fn raw(&mut self, b: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(b);
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }

    pub fn digest(&self) -> Digest {
        sha256(&self.buf)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.buf
    }
}

pub fn sha256(bytes: &[u8]) -> Digest {
    Sha256::digest(bytes).into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_big_endian_and_length_prefixed() {
        let mut e = Encoder::tagged("t");
        e.u32(1).f64(1.0).bytes(&[0xab]).raw(&[7, 7]);
        assert_eq!(
            e.finish(),
            vec![0, 0, 0, 1, b't', 0, 0, 0, 1, 0x3f, 0xf0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0xab, 7, 7]
        );
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            hex::encode(sha256(b"abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
