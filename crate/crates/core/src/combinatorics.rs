//! Binomial coefficients and combination ranking.

/// `C(n, k)` as `u128`; saturates instead of overflowing.
pub fn binom(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

pub fn binom_f64(n: f64, k: u32) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc *= (n - i as f64) / (i as f64 + 1.0);
    }
    acc
}

/// The `rank`-th `k`-subset of `[0, n)` in colexicographic order, ascending.
pub fn unrank_colex(mut rank: u128, n: usize, k: usize, out: &mut Vec<u32>) {
    out.clear();
    out.resize(k, 0);
    let mut hi = n as u64;
    for slot in (0..k).rev() {
        // largest c < hi with C(c, slot + 1) <= rank
        let mut lo = slot as u64;
        let mut top = hi - 1;
        while lo < top {
            let mid = (lo + top).div_ceil(2);
            if binom(mid, slot as u64 + 1) <= rank {
                lo = mid;
            } else {
                top = mid - 1;
            }
        }
        out[slot] = lo as u32;
        rank -= binom(lo, slot as u64 + 1);
        hi = lo;
    }
}

/// Inverse of [`unrank_colex`] for an ascending subset.
pub fn rank_colex(set: &[u32]) -> u128 {
    set.iter()
        .enumerate()
        .map(|(i, &c)| binom(c as u64, i as u64 + 1))
        .sum()
}

/// Calls `f` on every ascending `k`-subset of `items`, in lexicographic order.
pub fn for_each_combination<F: FnMut(&[u32])>(items: &[u32], k: usize, mut f: F) {
    if k > items.len() {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut buf: Vec<u32> = idx.iter().map(|&i| items[i]).collect();
    loop {
        f(&buf);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + items.len() - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        if idx[i] == i + items.len() - k {
            return;
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
        for j in i..k {
            buf[j] = items[idx[j]];
        }
    }
}
