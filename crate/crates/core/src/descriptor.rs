//! 256-bit binary descriptors.

use rand::Rng;

pub const DESCRIPTOR_BYTES: usize = 32;
pub const DESCRIPTOR_BITS: u32 = 256;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Descriptor(pub [u8; DESCRIPTOR_BYTES]);

impl Descriptor {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut bytes = [0u8; DESCRIPTOR_BYTES];
        rng.fill(&mut bytes[..]);
        Descriptor(bytes)
    }

    fn words(&self) -> [u64; 4] {
        let mut w = [0u64; 4];
        for (i, chunk) in self.0.chunks_exact(8).enumerate() {
            w[i] = u64::from_le_bytes(chunk.try_into().unwrap());
        }
        w
    }

    pub fn hamming(&self, other: &Descriptor) -> u32 {
        let a = self.words();
        let b = other.words();
        a.iter().zip(b.iter()).map(|(x, y)| (x ^ y).count_ones()).sum()
    }

    pub fn bit(&self, i: usize) -> bool {
        (self.0[i / 8] >> (i % 8)) & 1 == 1
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i / 8] ^= 1 << (i % 8);
    }
}

impl std::fmt::Debug for Descriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}
