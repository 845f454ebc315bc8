//! Line-level minimal-edit diff.
//!
//! Common prefix and suffix are trimmed first; the remaining window is solved
//! with a dense LCS table when it is small and with Hirschberg's linear-space
//! recursion otherwise. Both produce a longest common subsequence, so the
//! emitted edit script is always minimal in (removed + added) lines.

use std::collections::HashMap;

/// Above this many table cells the dense solver switches to Hirschberg.
const DENSE_CELL_LIMIT: usize = 1 << 22;

/// Split page text into lines. The empty text has zero lines, so that
/// `join_lines(split_lines(t)) == t` for every `t`.
pub fn split_lines(text: &str) -> Vec<&str> {
    if text.is_empty() {
        Vec::new()
    } else {
        text.split('\n').collect()
    }
}

pub fn join_lines<S: AsRef<str>>(lines: &[S]) -> String {
    let mut out = String::new();
    for (i, line) in lines.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(line.as_ref());
    }
    out
}

/// Edit script between two line arrays.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LineEdits {
    /// Indices into the old array that are not part of the common subsequence.
    pub removed: Vec<usize>,
    /// Indices into the new array that are not part of the common subsequence.
    pub added: Vec<usize>,
}

/// Compute a minimal edit script between `old` and `new`.
pub fn diff_lines(old: &[&str], new: &[&str]) -> LineEdits {
    let pairs = lcs_pairs(old, new);
    let mut removed = Vec::with_capacity(old.len() - pairs.len());
    let mut added = Vec::with_capacity(new.len() - pairs.len());
    let (mut i, mut j) = (0, 0);
    for &(pi, pj) in pairs.iter().chain(std::iter::once(&(old.len(), new.len()))) {
        removed.extend(i..pi);
        added.extend(j..pj);
        i = pi + 1;
        j = pj + 1;
    }
    LineEdits { removed, added }
}

/// Index pairs `(i, j)` with `old[i] == new[j]` forming a longest common
/// subsequence, increasing in both coordinates.
pub fn lcs_pairs<'a>(old: &[&'a str], new: &[&'a str]) -> Vec<(usize, usize)> {
    // Intern lines so the inner loops compare integers.
    let mut table: HashMap<&'a str, u32> = HashMap::new();
    let mut intern = |s: &'a str| -> u32 {
        let next = table.len() as u32;
        *table.entry(s).or_insert(next)
    };
    let a: Vec<u32> = old.iter().map(|s| intern(s)).collect();
    let b: Vec<u32> = new.iter().map(|s| intern(s)).collect();

    let prefix = a.iter().zip(&b).take_while(|(x, y)| x == y).count();
    let suffix = a[prefix..]
        .iter()
        .rev()
        .zip(b[prefix..].iter().rev())
        .take_while(|(x, y)| x == y)
        .count();

    let mut pairs: Vec<(usize, usize)> = (0..prefix).map(|k| (k, k)).collect();
    let mid_a = &a[prefix..a.len() - suffix];
    let mid_b = &b[prefix..b.len() - suffix];
    let mut mid = Vec::new();
    solve(mid_a, mid_b, prefix, prefix, DENSE_CELL_LIMIT, &mut mid);
    pairs.extend(mid);
    let (sa, sb) = (a.len() - suffix, b.len() - suffix);
    pairs.extend((0..suffix).map(|k| (sa + k, sb + k)));
    pairs
}

fn solve(
    a: &[u32],
    b: &[u32],
    off_a: usize,
    off_b: usize,
    cell_limit: usize,
    out: &mut Vec<(usize, usize)>,
) {
    if a.is_empty() || b.is_empty() {
        return;
    }
    if (a.len() + 1).saturating_mul(b.len() + 1) <= cell_limit || a.len() == 1 {
        dense(a, b, off_a, off_b, out);
        return;
    }
    let mid = a.len() / 2;
    let forward = lcs_row(&a[..mid], b);
    let rev_a: Vec<u32> = a[mid..].iter().rev().copied().collect();
    let rev_b: Vec<u32> = b.iter().rev().copied().collect();
    let backward = lcs_row(&rev_a, &rev_b);
    let mut split = 0;
    let mut best = 0;
    for k in 0..=b.len() {
        let total = forward[k] + backward[b.len() - k];
        if total > best || k == 0 {
            best = total;
            split = k;
        }
    }
    solve(&a[..mid], &b[..split], off_a, off_b, cell_limit, out);
    solve(&a[mid..], &b[split..], off_a + mid, off_b + split, cell_limit, out);
}

/// Last row of the LCS length table of `a` against every prefix of `b`.
fn lcs_row(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut prev = vec![0u32; b.len() + 1];
    let mut cur = vec![0u32; b.len() + 1];
    for &x in a {
        for (j, &y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev
}

fn dense(a: &[u32], b: &[u32], off_a: usize, off_b: usize, out: &mut Vec<(usize, usize)>) {
    let (n, m) = (a.len(), b.len());
    let w = m + 1;
    // suffix[i][j] = LCS length of a[i..] and b[j..]
    let mut suffix = vec![0u32; (n + 1) * w];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            suffix[i * w + j] = if a[i] == b[j] {
                suffix[(i + 1) * w + j + 1] + 1
            } else {
                suffix[(i + 1) * w + j].max(suffix[i * w + j + 1])
            };
        }
    }
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if a[i] == b[j] {
            out.push((off_a + i, off_b + j));
            i += 1;
            j += 1;
        } else if suffix[(i + 1) * w + j] >= suffix[i * w + j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }
}
