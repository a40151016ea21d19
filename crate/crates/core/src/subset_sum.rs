//! Reachable-sum bitsets for picking eviction sets.

#[derive(Clone, Debug)]
struct Bits {
    words: Vec<u64>,
    len: usize,
}

impl Bits {
    fn zero_only(len: usize) -> Self {
        let mut words = vec![0u64; len.div_ceil(64).max(1)];
        words[0] = 1;
        Bits { words, len }
    }

    #[inline]
    fn get(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    /// `self | (self << shift)`, truncated to `len` bits.
    fn or_shifted(&self, shift: usize) -> Self {
        let mut out = self.clone();
        let (ws, bs) = (shift / 64, shift % 64);
        for i in (ws..self.words.len()).rev() {
            let mut v = self.words[i - ws] << bs;
            if bs > 0 && i > ws {
                v |= self.words[i - ws - 1] >> (64 - bs);
            }
            out.words[i] |= v;
        }
        let tail = self.len % 64;
        if tail > 0 {
            let last = out.words.len() - 1;
            out.words[last] &= (1u64 << tail) - 1;
        }
        out
    }
}

/// Is there a subset of `sizes` whose sum lies in `[lo, hi]`?
pub fn exists_in_range(sizes: &[u64], lo: u64, hi: u64) -> bool {
    if lo > hi {
        return false;
    }
    if lo == 0 {
        return true;
    }
    let total: u64 = sizes.iter().sum();
    if total < lo {
        return false;
    }
    let cap = hi.min(total) as usize;
    let mut reach = Bits::zero_only(cap + 1);
    for &s in sizes {
        if (s as usize) <= cap && s > 0 {
            reach = reach.or_shifted(s as usize);
        }
    }
    (lo as usize..=cap).any(|t| reach.get(t))
}

/// Smallest achievable subset sum in `[lo, hi]` (`hi = None` means
/// unbounded) together with the lexicographically smallest index set
/// attaining it.
pub fn min_subset_in_range(sizes: &[u64], lo: u64, hi: Option<u64>) -> Option<(u64, Vec<usize>)> {
    let total: u64 = sizes.iter().sum();
    let hi = hi.unwrap_or(total).min(total);
    if lo > hi {
        return None;
    }
    let cap = hi as usize;
    // suffix[i]: sums reachable with items i..n
    let n = sizes.len();
    let mut suffix = vec![Bits::zero_only(cap + 1); n + 1];
    for i in (0..n).rev() {
        let s = sizes[i] as usize;
        suffix[i] = if s <= cap { suffix[i + 1].or_shifted(s) } else { suffix[i + 1].clone() };
    }
    let target = (lo as usize..=cap).find(|&t| suffix[0].get(t))?;
    let mut picked = Vec::new();
    let mut rest = target;
    for (i, &s) in sizes.iter().enumerate() {
        let s = s as usize;
        if s <= rest && suffix[i + 1].get(rest - s) {
            picked.push(i);
            rest -= s;
        }
    }
    debug_assert_eq!(rest, 0);
    Some((target as u64, picked))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(sizes: &[u64], lo: u64, hi: u64) -> Option<u64> {
        let n = sizes.len();
        (0u32..1 << n)
            .map(|mask| (0..n).filter(|i| mask >> i & 1 == 1).map(|i| sizes[i]).sum::<u64>())
            .filter(|&s| s >= lo && s <= hi)
            .min()
    }

    #[test]
    fn matches_enumeration() {
        let cases: &[&[u64]] = &[&[], &[3], &[1, 1, 1], &[2, 3, 7], &[5, 1, 4, 2], &[64, 1, 70, 3]];
        for sizes in cases {
            for lo in 0..12 {
                for hi in lo..90 {
                    let expect = brute(sizes, lo, hi);
                    assert_eq!(exists_in_range(sizes, lo, hi), expect.is_some(), "{sizes:?} [{lo},{hi}]");
                    let got = min_subset_in_range(sizes, lo, Some(hi));
                    assert_eq!(got.as_ref().map(|g| g.0), expect);
                    if let Some((sum, idx)) = got {
                        assert_eq!(idx.iter().map(|&i| sizes[i]).sum::<u64>(), sum);
                    }
                }
            }
        }
    }

    #[test]
    fn picks_lexicographically_first_set() {
        // {0} and {1,2} both sum to 2; {0} is lexicographically smaller
        assert_eq!(min_subset_in_range(&[2, 1, 1], 2, Some(2)), Some((2, vec![0])));
        // only later items reach 3
        assert_eq!(min_subset_in_range(&[5, 1, 2], 3, None), Some((3, vec![1, 2])));
    }

    #[test]
    fn unbounded_range() {
        assert_eq!(min_subset_in_range(&[4, 4], 5, None), Some((8, vec![0, 1])));
        assert_eq!(min_subset_in_range(&[4, 4], 9, None), None);
        assert_eq!(min_subset_in_range(&[], 0, None), Some((0, vec![])));
    }
}
