//! Binary strings and the subsequence combinatorics behind the deletion
//! channel bounds.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Largest `|x|` accepted by [`subsequence_weight_brute`].
pub const BRUTE_MAX_LEN: usize = 24;

/// A finite binary string. Index 0 is the first symbol.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct BitString {
    bits: Vec<u8>,
}

impl BitString {
    /// The empty string λ.
    pub fn empty() -> Self {
        Self { bits: Vec::new() }
    }

    /// Build from a slice of 0/1 values. Nonzero entries become 1.
    pub fn from_bits(bits: &[u8]) -> Self {
        Self { bits: bits.iter().map(|&b| u8::from(b != 0)).collect() }
    }

    /// The `len` low bits of `value`, most significant first.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= 64, "from_u64 supports at most 64 bits");
        let bits = (0..len).map(|k| ((value >> (len - 1 - k)) & 1) as u8).collect();
        Self { bits }
    }

    /// Inverse of [`BitString::from_u64`]; `None` above 64 bits.
    pub fn to_u64(&self) -> Option<u64> {
        if self.bits.len() > 64 {
            return None;
        }
        Some(self.bits.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b)))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, k: usize) -> u8 {
        self.bits[k]
    }

    pub fn push(&mut self, b: u8) {
        self.bits.push(u8::from(b != 0));
    }

    /// Hamming weight.
    pub fn weight(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    /// Bitwise complement.
    pub fn complement(&self) -> Self {
        Self { bits: self.bits.iter().map(|&b| 1 - b).collect() }
    }

    /// Substring `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self { bits: self.bits[start..end].to_vec() }
    }
}

impl From<Vec<u8>> for BitString {
    fn from(v: Vec<u8>) -> Self {
        Self::from_bits(&v)
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(Error::Domain(format!("invalid bit character '{c}' in \"{s}\""))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(Self { bits })
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// Number of index sets `S` with `|S| = |y|` and `x_S = y`.
///
/// `w_λ(x) = 1` and `w_y(x) = 0` when `|y| > |x|`. Overflow of the 64-bit
/// counter is reported instead of wrapping.
pub fn subsequence_weight(y: &BitString, x: &BitString) -> Result<u64> {
    subsequence_weight_bits(y.bits(), x.bits())
}

/// [`subsequence_weight`] on raw bit slices.
pub fn subsequence_weight_bits(y: &[u8], x: &[u8]) -> Result<u64> {
    if y.len() > x.len() {
        return Ok(0);
    }
    // dp[j] = number of ways to embed y[..j] into the prefix of x seen so far
    let mut dp = vec![0u64; y.len() + 1];
    dp[0] = 1;
    for &xb in x {
        for j in (1..=y.len()).rev() {
            if y[j - 1] == xb {
                dp[j] = dp[j]
                    .checked_add(dp[j - 1])
                    .ok_or_else(|| Error::Overflow("subsequence weight exceeds u64".into()))?;
            }
        }
    }
    Ok(dp[y.len()])
}

/// Subset-enumeration version of [`subsequence_weight`], used as a test
/// oracle.
pub fn subsequence_weight_brute(y: &BitString, x: &BitString) -> Result<u64> {
    let n = x.len();
    if n > BRUTE_MAX_LEN {
        return Err(Error::Size(format!(
            "brute-force subsequence count needs |x| <= {BRUTE_MAX_LEN}, got {n}"
        )));
    }
    let k = y.len();
    if k > n {
        return Ok(0);
    }
    if k == 0 {
        return Ok(1);
    }
    let mut count = 0u64;
    // Gosper's hack walks every k-subset of n positions
    let mut set: u64 = (1u64 << k) - 1;
    let limit = 1u64 << n;
    while set < limit {
        let mut j = 0;
        let mut ok = true;
        for pos in 0..n {
            if set >> pos & 1 == 1 {
                if x.get(pos) != y.get(j) {
                    ok = false;
                    break;
                }
                j += 1;
            }
        }
        if ok {
            count += 1;
        }
        let c = set & set.wrapping_neg();
        let r = set + c;
        set = (((r ^ set) >> 2) / c) | r;
    }
    Ok(count)
}

/// Length of the first run of `x`.
pub fn first_run_length(x: &BitString) -> Result<usize> {
    let first = *x
        .bits()
        .first()
        .ok_or_else(|| Error::Domain("first run of the empty string".into()))?;
    Ok(x.bits().iter().take_while(|&&b| b == first).count())
}

/// Number of runs (maximal constant blocks) in `x`.
pub fn run_count(x: &[u8]) -> usize {
    if x.is_empty() {
        return 0;
    }
    1 + x.windows(2).filter(|w| w[0] != w[1]).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn weights() {
        assert_eq!(subsequence_weight(&BitString::empty(), &bs("0110")).unwrap(), 1);
        assert_eq!(subsequence_weight(&bs("101"), &bs("10101")).unwrap(), 4);
        assert_eq!(subsequence_weight(&bs("11"), &bs("0")).unwrap(), 0);
        assert_eq!(subsequence_weight_brute(&bs("0"), &bs("000")).unwrap(), 3);
        assert_eq!(subsequence_weight_brute(&bs("01"), &bs("01")).unwrap(), 1);
        assert_eq!(subsequence_weight_brute(&bs("101"), &bs("10101")).unwrap(), 4);
    }

    #[test]
    fn runs() {
        assert_eq!(first_run_length(&bs("000110")).unwrap(), 3);
        assert_eq!(first_run_length(&bs("1")).unwrap(), 1);
        assert!(first_run_length(&BitString::empty()).is_err());
        assert_eq!(run_count(bs("000110").bits()), 3);
    }

    #[test]
    fn u64_roundtrip() {
        let x = BitString::from_u64(0b1011, 6);
        assert_eq!(x.to_string(), "001011");
        assert_eq!(x.to_u64(), Some(0b1011));
    }

    #[test]
    fn brute_rejects_long() {
        let x = BitString::from_bits(&[0; 25]);
        assert!(subsequence_weight_brute(&bs("0"), &x).is_err());
    }
}
