use super::normalize::Normalized;

/// Character-level edit distance with a two-row table.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Normalized Levenshtein similarity, zeroed below `tau`.
pub fn score_field_anls(gt: &str, pred: &str, tau: f64) -> f64 {
    let len = gt.chars().count().max(pred.chars().count());
    if len == 0 {
        return 1.0;
    }
    let s = 1.0 - levenshtein(gt, pred) as f64 / len as f64;
    if s >= tau {
        s
    } else {
        0.0
    }
}

pub(crate) fn anls_normalized(gt: &Normalized, pred: &Normalized, tau: f64) -> f64 {
    match (gt, pred) {
        (Normalized::Empty, Normalized::Empty) => 1.0,
        (Normalized::Empty, _) | (_, Normalized::Empty) => 0.0,
        (Normalized::Text(g), Normalized::Text(p)) => score_field_anls(g, p, tau),
    }
}
