//! Factorials, binomial coefficients and the two dense index maps used for
//! probability tables: Lehmer codes for permutations and the combinatorial
//! number system for two-symbol strings with fixed counts.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Largest `n` whose factorial fits in a `u64`.
pub const MAX_FACTORIAL: usize = 20;

pub fn factorial(n: usize) -> Result<u64> {
    if n > MAX_FACTORIAL {
        return Err(Error::Capacity(format!("{n}! does not fit in 64 bits")));
    }
    Ok((1..=n as u64).product())
}

/// `C(n, k)`, zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> Result<u64> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact at every step: acc * (n - i) / (i + 1) is C(n, i + 1)
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return Err(Error::Capacity(format!("C({n}, {k}) does not fit in 64 bits")));
        }
    }
    Ok(acc as u64)
}

/// `ln(n!)`, usable far beyond [`MAX_FACTORIAL`].
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Row-cached binomial table for the hot loops, covering `C(i, j)` for `i, j <= max_n`.
#[derive(Debug, Clone)]
pub struct BinomialTable {
    max_n: usize,
    values: Vec<u64>,
}

impl BinomialTable {
    pub fn new(max_n: usize) -> Self {
        let width = max_n + 1;
        let mut values = vec![0u64; width * width];
        for i in 0..=max_n {
            values[i * width] = 1;
            for j in 1..=i {
                let above = values[(i - 1) * width + j - 1];
                let left = if j < i { values[(i - 1) * width + j] } else { 0 };
                values[i * width + j] = above.saturating_add(left);
            }
        }
        BinomialTable { max_n, values }
    }

    #[inline]
    pub fn get(&self, n: usize, k: usize) -> u64 {
        if k > n || n > self.max_n {
            return 0;
        }
        self.values[n * (self.max_n + 1) + k]
    }
}

/// Shared binomial table covering `n <= 64`.
pub fn binomials() -> &'static BinomialTable {
    static TABLE: OnceLock<BinomialTable> = OnceLock::new();
    TABLE.get_or_init(|| BinomialTable::new(64))
}

/// `0!` through `20!`.
pub const FACTORIALS: [u64; MAX_FACTORIAL + 1] = {
    let mut out = [1u64; MAX_FACTORIAL + 1];
    let mut i = 1;
    while i <= MAX_FACTORIAL {
        out[i] = out[i - 1] * i as u64;
        i += 1;
    }
    out
};

/// Lexicographic rank of a sequence of distinct keys among all orderings of
/// the same keys (the Lehmer code read in the factorial number system).
pub fn lehmer_index<T: Ord>(seq: &[T]) -> Result<u64> {
    let n = seq.len();
    let mut weight = factorial(n.saturating_sub(1))?;
    let mut index = 0u64;
    for i in 0..n {
        let smaller_later = seq[i + 1..].iter().filter(|x| **x < seq[i]).count() as u64;
        index += smaller_later * weight;
        if i + 1 < n {
            weight /= (n - 1 - i) as u64;
        }
    }
    Ok(index)
}

/// Inverse of [`lehmer_index`]: arranges `sorted` (ascending, distinct)
/// into the ordering with lexicographic rank `index`.
pub fn lehmer_decode<T: Copy>(index: u64, sorted: &[T]) -> Result<Vec<T>> {
    let n = sorted.len();
    let size = factorial(n)?;
    if index >= size {
        return Err(Error::IndexOutOfRange { index, size });
    }
    let mut pool: Vec<T> = sorted.to_vec();
    let mut out = Vec::with_capacity(n);
    let mut rest = index;
    let mut weight = size;
    for i in 0..n {
        weight /= (n - i) as u64;
        let digit = (rest / weight) as usize;
        rest %= weight;
        out.push(pool.remove(digit));
    }
    Ok(out)
}

/// Rank of a two-symbol string (`false` < `true`) among all strings with
/// the same number of `true` symbols, in lexicographic order.
///
/// `ones` positions are counted from the front; the all-`false`-first string
/// has index 0.
pub fn binary_string_index(bits: &[bool]) -> Result<u64> {
    let n = bits.len();
    let mut zeros_left = bits.iter().filter(|b| !**b).count();
    let mut index = 0u64;
    for (pos, &bit) in bits.iter().enumerate() {
        if bit {
            // strings sharing this prefix but with a zero here come first
            if zeros_left > 0 {
                index += binomial(n - pos - 1, zeros_left - 1)?;
            }
        } else {
            zeros_left -= 1;
        }
    }
    Ok(index)
}

/// Inverse of [`binary_string_index`] for strings with `zeros` falses and `ones` trues.
pub fn binary_string_decode(index: u64, zeros: usize, ones: usize) -> Result<Vec<bool>> {
    let n = zeros + ones;
    let size = binomial(n, zeros)?;
    if index >= size {
        return Err(Error::IndexOutOfRange { index, size });
    }
    let mut out = Vec::with_capacity(n);
    let mut rest = index;
    let mut zeros_left = zeros;
    for pos in 0..n {
        if zeros_left == 0 {
            out.push(true);
            continue;
        }
        let with_zero = binomial(n - pos - 1, zeros_left - 1)?;
        if rest < with_zero {
            out.push(false);
            zeros_left -= 1;
        } else {
            rest -= with_zero;
            out.push(true);
        }
    }
    Ok(out)
}

/// Rearranges `seq` into the lexicographically next ordering; returns false
/// (leaving `seq` sorted ascending) after the last one.
pub fn next_permutation<T: Ord>(seq: &mut [T]) -> bool {
    let n = seq.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && seq[i - 1] >= seq[i] {
        i -= 1;
    }
    if i == 0 {
        seq.reverse();
        return false;
    }
    let mut j = n - 1;
    while seq[j] <= seq[i - 1] {
        j -= 1;
    }
    seq.swap(i - 1, j);
    seq[i..].reverse();
    true
}
