//! 64-bit FNV-1a, used to tie artifacts to the vocabularies they were built
//! against.

const OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
const PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Clone, Copy)]
pub struct Fnv1a(u64);

impl Default for Fnv1a {
    fn default() -> Self {
        Fnv1a(OFFSET_BASIS)
    }
}

impl Fnv1a {
    pub fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(PRIME);
        }
    }

    pub fn finish(self) -> u64 {
        self.0
    }
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = Fnv1a::default();
    h.update(bytes);
    h.finish()
}

/// Hash of an ordered list of strings: each item's UTF-8 bytes followed by a
/// `\n` terminator.
pub fn hash_list<S: AsRef<str>>(items: &[S]) -> u64 {
    let mut h = Fnv1a::default();
    for item in items {
        h.update(item.as_ref().as_bytes());
        h.update(b"\n");
    }
    h.finish()
}

pub fn to_hex(hash: u64) -> String {
    format!("{hash:016x}")
}

pub fn from_hex(s: &str) -> Option<u64> {
    u64::from_str_radix(s.trim(), 16).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_vectors() {
        // Published FNV-1a 64 test vectors.
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn list_hash_is_order_sensitive() {
        assert_ne!(hash_list(&["a", "b"]), hash_list(&["b", "a"]));
        assert_ne!(hash_list(&["ab"]), hash_list(&["a", "b"]));
        assert_eq!(from_hex(&to_hex(hash_list(&["x"]))), Some(hash_list(&["x"])));
    }
}
