use std::fmt;
use std::str::FromStr;

/// A finite binary string. `Display` renders the empty string as `ε`.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bits(pub Vec<bool>);

impl Bits {
    pub fn empty() -> Self {
        Bits(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, b: bool) {
        self.0.push(b);
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        self.0.get(i).copied()
    }

    pub fn prefix(&self, n: usize) -> Bits {
        Bits(self.0[..n.min(self.0.len())].to_vec())
    }

    pub fn extend_from(&mut self, other: &Bits) {
        self.0.extend_from_slice(&other.0);
    }

    pub fn concat(&self, other: &Bits) -> Bits {
        let mut v = self.clone();
        v.extend_from(other);
        v
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    /// Position of this string in length-lexicographic order (ε = 0, "0" = 1, "1" = 2, "00" = 3, ...).
    pub fn length_lex_index(&self) -> Option<u64> {
        if self.len() >= 63 {
            return None;
        }
        let value = self.0.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64);
        Some((1u64 << self.len()) - 1 + value)
    }

    /// Inverse of [`Bits::length_lex_index`].
    pub fn from_length_lex_index(i: u64) -> Bits {
        let len = 63 - (i + 1).leading_zeros();
        let value = i + 1 - (1u64 << len);
        Bits((0..len).rev().map(|b| (value >> b) & 1 == 1).collect())
    }

    /// Pack into bytes, most significant bit first, zero padded.
    pub fn packed(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.len().div_ceil(8)];
        for (i, b) in self.0.iter().enumerate() {
            if *b {
                out[i / 8] |= 0x80 >> (i % 8);
            }
        }
        out
    }
}

impl From<&[bool]> for Bits {
    fn from(v: &[bool]) -> Self {
        Bits(v.to_vec())
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("ε");
        }
        for b in &self.0 {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits({self})")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed bit string `{0}`")]
pub struct ParseBitsError(pub String);

impl FromStr for Bits {
    type Err = ParseBitsError;

    /// Accepts `ε`, `""`, `-`, the empty string, or a run of `0`/`1`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.is_empty() || t == "ε" || t == "\"\"" || t == "-" {
            return Ok(Bits::empty());
        }
        t.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(ParseBitsError(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_lex_order() {
        let names: Vec<String> = (0..7).map(|i| Bits::from_length_lex_index(i).to_string()).collect();
        assert_eq!(names, ["ε", "0", "1", "00", "01", "10", "11"]);
        for i in 0..200 {
            assert_eq!(Bits::from_length_lex_index(i).length_lex_index(), Some(i));
        }
    }

    #[test]
    fn parse_and_pack() {
        let b: Bits = "101".parse().unwrap();
        assert_eq!(b.0, vec![true, false, true]);
        assert_eq!(b.packed(), vec![0b1010_0000]);
        assert_eq!("ε".parse::<Bits>().unwrap(), Bits::empty());
        assert!("102".parse::<Bits>().is_err());
    }
}
