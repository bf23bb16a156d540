//! MSB-first bit packing with Elias-gamma integers.

#[derive(Default, Debug)]
pub struct BitWriter {
    bytes: Vec<u8>,
    len_bits: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_bit(&mut self, bit: bool) {
        let used = (self.len_bits % 8) as u32;
        if used == 0 {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().expect("pushed above") |= 0x80 >> used;
        }
        self.len_bits += 1;
    }

    /// Low `width` bits of `value`, most significant first.
    pub fn push_bits(&mut self, value: u64, width: u32) {
        for i in (0..width).rev() {
            self.push_bit((value >> i) & 1 == 1);
        }
    }

    /// Elias-gamma code of `value >= 1`.
    pub fn push_gamma(&mut self, value: u64) {
        assert!(value >= 1, "gamma code needs a positive value");
        let width = 64 - value.leading_zeros();
        self.push_bits(0, width - 1);
        self.push_bits(value, width);
    }

    pub fn len_bits(&self) -> u64 {
        self.len_bits
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    pub fn read_bit(&mut self) -> Option<bool> {
        let byte = *self.bytes.get((self.pos / 8) as usize)?;
        let bit = byte & (0x80 >> (self.pos % 8)) != 0;
        self.pos += 1;
        Some(bit)
    }

    pub fn read_bits(&mut self, width: u32) -> Option<u64> {
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | u64::from(self.read_bit()?);
        }
        Some(v)
    }

    pub fn read_gamma(&mut self) -> Option<u64> {
        let mut zeros = 0u32;
        while !self.read_bit()? {
            zeros += 1;
            if zeros > 63 {
                return None;
            }
        }
        let rest = self.read_bits(zeros)?;
        Some((1u64 << zeros) | rest)
    }
}
