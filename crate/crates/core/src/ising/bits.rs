use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A length-`n` assignment of classical bits.
///
/// Bit `b_i` corresponds to spin `s_i = 1 - 2 b_i`, so `|0...0>` is the
/// all-`+1` spin configuration. Ordering is lexicographic starting at bit 0.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bitstring(Vec<u8>);

impl Bitstring {
    pub fn zeros(n: usize) -> Self {
        Bitstring(vec![0; n])
    }

    pub fn ones(n: usize) -> Self {
        Bitstring(vec![1; n])
    }

    /// Builds from raw bits; any nonzero byte is treated as `1`.
    pub fn from_bits<I: IntoIterator<Item = u8>>(bits: I) -> Self {
        Bitstring(bits.into_iter().map(|b| u8::from(b != 0)).collect())
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        Bitstring(bits.into_iter().map(u8::from).collect())
    }

    /// Little-endian decoding: bit `i` of `index` becomes `b_i`.
    pub fn from_index(index: u64, n: usize) -> Self {
        debug_assert!(n <= 64);
        Bitstring((0..n).map(|i| ((index >> i) & 1) as u8).collect())
    }

    /// Inverse of [`Bitstring::from_index`]. Only valid for `n <= 64`.
    pub fn to_index(&self) -> u64 {
        debug_assert!(self.0.len() <= 64);
        self.0
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | (u64::from(b) << i))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    /// Spin value `+1` or `-1` of site `i`.
    #[inline]
    pub fn spin(&self, i: usize) -> f64 {
        1.0 - 2.0 * f64::from(self.0[i])
    }

    pub fn hamming_weight(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    pub fn complement(&self) -> Self {
        Bitstring(self.0.iter().map(|b| 1 - b).collect())
    }

    pub fn xor(&self, other: &Bitstring) -> Result<Bitstring> {
        if self.len() != other.len() {
            return Err(Error::dim(self.len(), other.len()));
        }
        Ok(Bitstring(
            self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect(),
        ))
    }

    pub fn check_len(&self, n: usize) -> Result<()> {
        if self.len() == n {
            Ok(())
        } else {
            Err(Error::dim(n, self.len()))
        }
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            f.write_str(if *b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bitstring({self})")
    }
}

impl FromStr for Bitstring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::Config(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()
            .map(Bitstring)
    }
}

impl Serialize for Bitstring {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Bitstring {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A bitflip gauge `P_y = ⊗ X_i^{y_i}` together with the masks that built it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaugeMask {
    pub mask: Bitstring,
    #[serde(default)]
    pub provenance: Vec<Bitstring>,
}

impl GaugeMask {
    pub fn identity(n: usize) -> Self {
        GaugeMask {
            mask: Bitstring::zeros(n),
            provenance: Vec::new(),
        }
    }

    pub fn new(mask: Bitstring) -> Self {
        GaugeMask {
            provenance: vec![mask.clone()],
            mask,
        }
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    /// Applying `self` then `next` is the gauge `self.mask ^ next`.
    pub fn compose(&self, next: &Bitstring) -> Result<GaugeMask> {
        let mask = self.mask.xor(next)?;
        let mut provenance = self.provenance.clone();
        provenance.push(next.clone());
        Ok(GaugeMask { mask, provenance })
    }

    /// Relabels a bitstring between the gauged and ungauged frames.
    pub fn apply(&self, x: &Bitstring) -> Result<Bitstring> {
        x.xor(&self.mask)
    }
}

impl From<Bitstring> for GaugeMask {
    fn from(mask: Bitstring) -> Self {
        GaugeMask::new(mask)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        for idx in 0..32u64 {
            assert_eq!(Bitstring::from_index(idx, 5).to_index(), idx);
        }
        assert_eq!(Bitstring::from_index(1, 3).to_string(), "100");
    }

    #[test]
    fn parse_and_display() {
        let b: Bitstring = "0110".parse().unwrap();
        assert_eq!(b.hamming_weight(), 2);
        assert_eq!(b.to_string(), "0110");
        assert!("01x".parse::<Bitstring>().is_err());
    }

    #[test]
    fn xor_length_mismatch() {
        let a = Bitstring::zeros(3);
        let b = Bitstring::zeros(4);
        assert!(matches!(a.xor(&b), Err(Error::Dimension { .. })));
    }

    #[test]
    fn composition_is_xor_and_involutive() {
        let a: Bitstring = "1100".parse().unwrap();
        let b: Bitstring = "0110".parse().unwrap();
        let g = GaugeMask::identity(4).compose(&a).unwrap().compose(&b).unwrap();
        assert_eq!(g.mask, a.xor(&b).unwrap());
        assert_eq!(g.provenance.len(), 2);
        let twice = GaugeMask::new(a.clone()).compose(&a).unwrap();
        assert_eq!(twice.mask, Bitstring::zeros(4));
    }

    #[test]
    fn lexicographic_order_starts_at_bit_zero() {
        let a: Bitstring = "011".parse().unwrap();
        let b: Bitstring = "100".parse().unwrap();
        assert!(a < b);
    }
}
