//! Colorings, color-pair subsets and XOR couplings.
//!
//! Colors are small integers: `a = 0`, `b = 1`, `c = 2`, `d = 3` and the
//! neutral color of the deformed 5-coloring is `4`. A [`ColorMask`] is a
//! bitmask over colors, so extracting `E_st` is a shift and an AND per
//! element.

use num::{BigRational, One, Signed, ToPrimitive};
use rand::RngCore;

use crate::error::{Error, Result};
use crate::rng::RandomStream;

pub const COLOR_A: u8 = 0;
pub const COLOR_B: u8 = 1;
pub const COLOR_C: u8 = 2;
pub const COLOR_D: u8 = 3;
pub const COLOR_NEUTRAL: u8 = 4;

pub const MAX_COLORS: usize = 16;

/// Probability law of a single element's color.
#[derive(Clone, Debug)]
pub struct ColorDistribution {
    weights: Vec<f64>,
    exact: Option<Vec<BigRational>>,
    // cumulative weights scaled to 2^64; color k is drawn iff
    // thresholds[k-1] <= x < thresholds[k]
    thresholds: Vec<u128>,
    uniform_bits: Option<u32>,
}

impl ColorDistribution {
    pub fn uniform(num_colors: usize) -> Result<Self> {
        check_len(num_colors)?;
        let w = BigRational::new(1.into(), num_colors.into());
        Self::from_rationals(vec![w; num_colors])
    }

    /// Exact weights; the sum must be exactly one.
    pub fn from_rationals(weights: Vec<BigRational>) -> Result<Self> {
        check_len(weights.len())?;
        if weights.iter().any(|w| w.is_negative()) {
            return Err(Error::InvalidDistribution("negative weight".into()));
        }
        let sum: BigRational = weights.iter().sum();
        if !sum.is_one() {
            return Err(Error::InvalidDistribution(format!("weights sum to {sum}, not 1")));
        }
        let float: Vec<f64> = weights.iter().map(|w| w.to_f64().unwrap_or(0.0)).collect();
        let mut dist = Self::build(float);
        let m = weights.len();
        if m.is_power_of_two() && weights.iter().all(|w| *w == weights[0]) {
            dist.uniform_bits = Some(m.trailing_zeros());
        }
        dist.exact = Some(weights);
        Ok(dist)
    }

    /// Floating weights for Monte Carlo use; the sum must be one within 1e-12.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        check_len(weights.len())?;
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidDistribution("weights must be finite and >= 0".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self::build(weights))
    }

    /// Five colors with weights `(alpha, alpha, alpha, alpha, 1 - 4 alpha)`.
    pub fn deformed(alpha: f64) -> Result<Self> {
        if !(0.0..=0.25).contains(&alpha) {
            return Err(Error::InvalidDistribution(format!(
                "alpha must lie in [0, 1/4], got {alpha}"
            )));
        }
        Self::from_weights(vec![alpha, alpha, alpha, alpha, 1.0 - 4.0 * alpha])
    }

    pub fn deformed_exact(alpha: BigRational) -> Result<Self> {
        let quarter = BigRational::new(1.into(), 4.into());
        if alpha.is_negative() || alpha > quarter {
            return Err(Error::InvalidDistribution(format!(
                "alpha must lie in [0, 1/4], got {alpha}"
            )));
        }
        let rest = BigRational::one() - &alpha * BigRational::from_integer(4.into());
        Self::from_rationals(vec![alpha.clone(), alpha.clone(), alpha.clone(), alpha, rest])
    }

    fn build(weights: Vec<f64>) -> Self {
        let scale = 18_446_744_073_709_551_616.0_f64; // 2^64
        let mut cum = 0.0;
        let mut thresholds = Vec::with_capacity(weights.len());
        for (k, w) in weights.iter().enumerate() {
            cum += w;
            let t = if k + 1 == weights.len() || cum >= 1.0 {
                1u128 << 64
            } else {
                (cum * scale) as u128
            };
            thresholds.push(t);
        }
        Self {
            weights,
            exact: None,
            thresholds,
            uniform_bits: None,
        }
    }

    pub fn num_colors(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn exact_weights(&self) -> Option<&[BigRational]> {
        self.exact.as_deref()
    }

    pub fn is_uniform(&self) -> bool {
        match &self.exact {
            Some(w) => w.iter().all(|x| *x == w[0]),
            None => self.weights.iter().all(|x| *x == self.weights[0]),
        }
    }

    #[inline]
    fn draw(&self, x: u64) -> u8 {
        let x = x as u128;
        let mut k = 0;
        while x >= self.thresholds[k] {
            k += 1;
        }
        k as u8
    }

    /// Fill `out` with i.i.d. colors. Uniform power-of-two alphabets take
    /// bits from each 64-bit draw; otherwise one draw per element.
    pub fn fill(&self, out: &mut [u8], stream: &mut RandomStream) {
        match self.uniform_bits {
            Some(bits) if bits > 0 => {
                let per_word = (64 / bits) as usize;
                let mask = (1u64 << bits) - 1;
                for chunk in out.chunks_mut(per_word) {
                    let mut w = stream.next_u64();
                    for c in chunk {
                        *c = (w & mask) as u8;
                        w >>= bits;
                    }
                }
            }
            _ => {
                for c in out.iter_mut() {
                    *c = self.draw(stream.next_u64());
                }
            }
        }
    }
}

fn check_len(m: usize) -> Result<()> {
    if !(2..=MAX_COLORS).contains(&m) {
        return Err(Error::InvalidDistribution(format!(
            "number of colors must be in 2..={MAX_COLORS}, got {m}"
        )));
    }
    Ok(())
}

/// Assignment element -> color.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coloring {
    colors: Vec<u8>,
    num_colors: u8,
}

impl Coloring {
    pub fn new(colors: Vec<u8>, num_colors: usize) -> Result<Self> {
        check_len(num_colors)?;
        if let Some(bad) = colors.iter().find(|&&c| c as usize >= num_colors) {
            return Err(Error::InvalidDistribution(format!(
                "color {bad} out of range for {num_colors} colors"
            )));
        }
        Ok(Self {
            colors,
            num_colors: num_colors as u8,
        })
    }

    pub fn colors(&self) -> &[u8] {
        &self.colors
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn num_colors(&self) -> usize {
        self.num_colors as usize
    }

    /// Two colors per byte, low nibble first.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.colors
            .chunks(2)
            .map(|p| p[0] | (p.get(1).copied().unwrap_or(0) << 4))
            .collect()
    }

    pub fn from_bytes(bytes: &[u8], len: usize, num_colors: usize) -> Result<Self> {
        if bytes.len() != len.div_ceil(2) {
            return Err(Error::GroundSizeMismatch {
                expected: len.div_ceil(2),
                actual: bytes.len(),
            });
        }
        let colors = (0..len).map(|i| (bytes[i / 2] >> (4 * (i % 2))) & 0xf).collect();
        Self::new(colors, num_colors)
    }
}

pub fn sample_coloring(
    ground_size: usize,
    dist: &ColorDistribution,
    stream: &mut RandomStream,
) -> Coloring {
    let mut colors = vec![0u8; ground_size];
    dist.fill(&mut colors, stream);
    Coloring {
        colors,
        num_colors: dist.num_colors() as u8,
    }
}

/// Nonempty proper subset of the color alphabet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ColorMask {
    bits: u16,
}

impl ColorMask {
    pub fn new(bits: u16, num_colors: usize) -> Result<Self> {
        check_len(num_colors).map_err(|e| Error::InvalidMask(e.to_string()))?;
        let full = if num_colors == 16 { u16::MAX } else { (1u16 << num_colors) - 1 };
        if bits == 0 || bits & !full != 0 || bits == full {
            return Err(Error::InvalidMask(format!(
                "mask {bits:#b} is not a nonempty proper subset of {num_colors} colors"
            )));
        }
        Ok(Self { bits })
    }

    pub fn from_colors(colors: &[u8], num_colors: usize) -> Result<Self> {
        let mut bits = 0u16;
        for &c in colors {
            if c as usize >= num_colors.min(MAX_COLORS) {
                return Err(Error::InvalidMask(format!("color {c} out of range")));
            }
            bits |= 1 << c;
        }
        Self::new(bits, num_colors)
    }

    /// Letters `a..p` name colors 0..15 and digits `1..9` name colors 0..8,
    /// so `"ab"` and `"1256"` are both accepted.
    pub fn parse(text: &str, num_colors: usize) -> Result<Self> {
        let colors = text
            .chars()
            .map(|ch| match ch {
                'a'..='p' => Ok(ch as u8 - b'a'),
                '1'..='9' => Ok(ch as u8 - b'1'),
                _ => Err(Error::InvalidMask(format!("bad color symbol {ch:?} in {text:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::from_colors(&colors, num_colors)
    }

    #[inline]
    pub fn contains(&self, color: u8) -> bool {
        (self.bits >> color) & 1 != 0
    }

    pub fn bits(&self) -> u16 {
        self.bits
    }

    pub fn overlap(&self, other: &ColorMask) -> u32 {
        (self.bits & other.bits).count_ones()
    }

    pub fn label(&self) -> String {
        (0..16u8)
            .filter(|&c| self.contains(c))
            .map(|c| (b'a' + c) as char)
            .collect()
    }
}

/// Bitset over the ground set.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ElementSubset {
    words: Vec<u64>,
    len: usize,
}

impl ElementSubset {
    pub fn empty(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn full(len: usize) -> Self {
        let mut s = Self::empty(len);
        for i in 0..len {
            s.insert(i);
        }
        s
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(len);
        for i in indices {
            s.insert(i);
        }
        s
    }

    /// Subset of a ground set of at most 64 elements given as a bitmask.
    pub fn from_mask(len: usize, mask: u64) -> Self {
        assert!(len <= 64);
        let mut s = Self::empty(len);
        if len > 0 {
            let keep = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
            s.words[0] = mask & keep;
        }
        s
    }

    pub fn to_mask(&self) -> u64 {
        assert!(self.len <= 64);
        self.words.first().copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        (self.words[i / 64] >> (i % 64)) & 1 != 0
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_subset(&self, other: &ElementSubset) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn complement(&self) -> Self {
        let mut s = Self::full(self.len);
        for (w, x) in s.words.iter_mut().zip(&self.words) {
            *w &= !x;
        }
        s
    }

    pub fn union(&self, other: &ElementSubset) -> Self {
        let words = self.words.iter().zip(&other.words).map(|(a, b)| a | b).collect();
        Self { words, len: self.len }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| self.contains(i))
    }
}

/// `E_mask`: elements whose color lies in `mask`.
pub fn pair_subset(coloring: &Coloring, mask: ColorMask) -> ElementSubset {
    let mut s = ElementSubset::empty(coloring.len());
    for (i, &c) in coloring.colors().iter().enumerate() {
        if mask.contains(c) {
            s.words[i / 64] |= 1 << (i % 64);
        }
    }
    s
}

/// Elementwise parity of membership.
pub fn xor_subset(subsets: &[ElementSubset]) -> Result<ElementSubset> {
    let first = subsets
        .first()
        .ok_or_else(|| Error::InvalidSpec("xor of an empty list".into()))?;
    let mut out = first.clone();
    for s in &subsets[1..] {
        if s.len != out.len {
            return Err(Error::GroundSizeMismatch {
                expected: out.len,
                actual: s.len,
            });
        }
        for (w, x) in out.words.iter_mut().zip(&s.words) {
            *w ^= x;
        }
    }
    Ok(out)
}

/// `k` independent uniform subsets followed by their XOR.
pub fn independent_half_percolations(
    k: usize,
    ground_size: usize,
    stream: &mut RandomStream,
) -> Result<Vec<ElementSubset>> {
    if k < 1 {
        return Err(Error::InvalidSpec("need k >= 1 independent percolations".into()));
    }
    let mut out: Vec<ElementSubset> = (0..k)
        .map(|_| {
            let mut s = ElementSubset::empty(ground_size);
            for w in s.words.iter_mut() {
                *w = stream.next_u64();
            }
            if !ground_size.is_multiple_of(64) {
                let last = s.words.len() - 1;
                s.words[last] &= (1u64 << (ground_size % 64)) - 1;
            }
            s
        })
        .collect();
    out.push(xor_subset(&out)?);
    Ok(out)
}

/// `p` as an exact rational from a small fraction, for tests and CLI defaults.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(num.into(), den.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abcd() -> Coloring {
        Coloring::new(vec![COLOR_A, COLOR_B, COLOR_C, COLOR_D], 4).unwrap()
    }

    #[test]
    fn empty_ground_gives_empty_coloring() {
        let d = ColorDistribution::uniform(4).unwrap();
        let c = sample_coloring(0, &d, &mut RandomStream::new(1, 0));
        assert!(c.is_empty());
    }

    #[test]
    fn uniform_frequencies_within_five_sigma() {
        let d = ColorDistribution::uniform(4).unwrap();
        let n = 1_000_000;
        let c = sample_coloring(n, &d, &mut RandomStream::new(3, 0));
        let mut freq = [0usize; 4];
        for &x in c.colors() {
            freq[x as usize] += 1;
        }
        for f in freq {
            let p = f as f64 / n as f64;
            assert!((p - 0.25).abs() < 0.002, "{p}");
        }
    }

    #[test]
    fn deformed_alpha_zero_is_all_neutral() {
        let d = ColorDistribution::deformed(0.0).unwrap();
        let c = sample_coloring(1000, &d, &mut RandomStream::new(5, 0));
        assert!(c.colors().iter().all(|&x| x == COLOR_NEUTRAL));
    }

    #[test]
    fn deformed_quarter_never_neutral() {
        let d = ColorDistribution::deformed(0.25).unwrap();
        let c = sample_coloring(100_000, &d, &mut RandomStream::new(5, 0));
        assert!(c.colors().iter().all(|&x| x < COLOR_NEUTRAL));
    }

    #[test]
    fn deformed_frequencies() {
        let d = ColorDistribution::deformed(0.1).unwrap();
        let n = 400_000;
        let c = sample_coloring(n, &d, &mut RandomStream::new(9, 2));
        let neutral = c.colors().iter().filter(|&&x| x == COLOR_NEUTRAL).count() as f64 / n as f64;
        assert!((neutral - 0.6).abs() < 5.0 * (0.24f64 / n as f64).sqrt());
    }

    #[test]
    fn distribution_validation() {
        assert!(ColorDistribution::from_weights(vec![0.5, 0.6]).is_err());
        assert!(ColorDistribution::from_weights(vec![-0.1, 1.1]).is_err());
        assert!(ColorDistribution::from_weights(vec![1.0]).is_err());
        assert!(ColorDistribution::deformed(0.3).is_err());
        assert!(ColorDistribution::from_rationals(vec![ratio(1, 3), ratio(1, 3)]).is_err());
        assert!(ColorDistribution::deformed_exact(ratio(1, 5)).is_ok());
        assert!(ColorDistribution::uniform(1).is_err());
    }

    #[test]
    fn pair_subset_by_definition() {
        let c = abcd();
        let ab = ColorMask::parse("ab", 4).unwrap();
        assert_eq!(pair_subset(&c, ab), ElementSubset::from_indices(4, [0, 1]));
        let a = ColorMask::parse("a", 4).unwrap();
        let b = ColorMask::parse("b", 4).unwrap();
        assert_eq!(pair_subset(&c, ab), pair_subset(&c, a).union(&pair_subset(&c, b)));
    }

    #[test]
    fn mask_validation() {
        assert!(ColorMask::parse("abcd", 4).is_err());
        assert!(ColorMask::new(0, 4).is_err());
        assert!(ColorMask::parse("ae", 4).is_err());
        assert_eq!(ColorMask::parse("1256", 8).unwrap().bits(), 0b110011);
        assert_eq!(ColorMask::parse("bc", 4).unwrap().label(), "bc");
    }

    #[test]
    fn xor_basics() {
        let s = ElementSubset::from_indices(5, [0, 3]);
        assert_eq!(xor_subset(std::slice::from_ref(&s)).unwrap(), s);
        assert!(xor_subset(&[s.clone(), s.clone()]).unwrap().is_empty());
        assert!(xor_subset(&[s, ElementSubset::empty(4)]).is_err());
        assert!(xor_subset(&[]).is_err());
    }

    #[test]
    fn xor_of_ab_ac_is_bc_for_every_small_coloring() {
        let ab = ColorMask::parse("ab", 4).unwrap();
        let ac = ColorMask::parse("ac", 4).unwrap();
        let bc = ColorMask::parse("bc", 4).unwrap();
        for code in 0..4u32.pow(5) {
            let colors = (0..5).map(|i| ((code >> (2 * i)) & 3) as u8).collect();
            let c = Coloring::new(colors, 4).unwrap();
            let x = xor_subset(&[pair_subset(&c, ab), pair_subset(&c, ac)]).unwrap();
            assert_eq!(x, pair_subset(&c, bc));
        }
    }

    #[test]
    fn k1_coupling_duplicates() {
        let v = independent_half_percolations(1, 70, &mut RandomStream::new(1, 1)).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0], v[1]);
        assert!(independent_half_percolations(0, 3, &mut RandomStream::new(1, 1)).is_err());
    }

    #[test]
    fn coupling_last_is_parity() {
        let v = independent_half_percolations(3, 100, &mut RandomStream::new(2, 1)).unwrap();
        for i in 0..100 {
            let parity = v[..3].iter().filter(|s| s.contains(i)).count() % 2 == 1;
            assert_eq!(v[3].contains(i), parity);
        }
        assert!(v.iter().all(|s| s.iter().all(|i| i < 100)));
    }

    #[test]
    fn coloring_bytes_roundtrip() {
        let c = Coloring::new(vec![0, 4, 2, 3, 1], 5).unwrap();
        let bytes = c.to_bytes();
        assert_eq!(bytes.len(), 3);
        assert_eq!(Coloring::from_bytes(&bytes, 5, 5).unwrap(), c);
        assert!(Coloring::new(vec![5], 5).is_err());
    }

    #[test]
    fn sampling_is_reproducible() {
        let d = ColorDistribution::deformed(0.2).unwrap();
        let x = sample_coloring(500, &d, &mut RandomStream::new(11, 4));
        let y = sample_coloring(500, &d, &mut RandomStream::new(11, 4));
        assert_eq!(x, y);
    }
}
