use std::collections::HashMap;

pub const PREFIX_CHARS: usize = 75;
pub const DUC_BYTE_LIMIT: usize = 75;

/// Longest whole-token prefix, joined by single spaces, of at most `limit`
/// UTF-8 bytes.
pub fn byte_cap(text: &str, limit: usize) -> String {
    let mut out = String::new();
    for token in text.split_whitespace() {
        let extra = if out.is_empty() { token.len() } else { token.len() + 1 };
        if out.len() + extra > limit {
            break;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(token);
    }
    out
}

/// First 75 characters of the raw input.
pub fn prefix_baseline(input: &str) -> String {
    input.chars().take(PREFIX_CHARS).collect()
}

/// Percentage of output tokens found in the input, clipped by multiplicity.
/// `None` for an empty output.
pub fn extractive_pct<S: AsRef<str>, T: AsRef<str>>(output: &[S], input: &[T]) -> Option<f64> {
    if output.is_empty() {
        return None;
    }
    let mut available: HashMap<&str, usize> = HashMap::new();
    for t in input {
        *available.entry(t.as_ref()).or_insert(0) += 1;
    }
    let copied = output
        .iter()
        .filter(|t| match available.get_mut(t.as_ref()) {
            Some(n) if *n > 0 => {
                *n -= 1;
                true
            }
            _ => false,
        })
        .count();
    Some(100.0 * copied as f64 / output.len() as f64)
}

/// Counts of character lengths in buckets `[k*width, (k+1)*width)`, from 0
/// up to the last non-empty bucket.
pub fn length_histogram<S: AsRef<str>>(outputs: &[S], width: usize) -> Vec<(usize, usize)> {
    let width = width.max(1);
    let mut counts: Vec<usize> = Vec::new();
    for o in outputs {
        let b = o.as_ref().chars().count() / width;
        if counts.len() <= b {
            counts.resize(b + 1, 0);
        }
        counts[b] += 1;
    }
    counts.into_iter().enumerate().map(|(k, c)| (k * width, c)).collect()
}

pub fn histogram_to_string(hist: &[(usize, usize)]) -> String {
    let mut s = String::from("bucket_start,count\n");
    for (start, count) in hist {
        s.push_str(&format!("{start},{count}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_cap_cases() {
        let sixty = "x".repeat(29) + " " + &"y".repeat(30);
        assert_eq!(byte_cap(&sixty, 75), sixty);
        let two = "a".repeat(40) + " " + &"b".repeat(40);
        assert_eq!(byte_cap(&two, 75), "a".repeat(40));
        assert_eq!(byte_cap("hello world", 0), "");
        assert_eq!(byte_cap("héllo wörld", 6), "héllo");
        for limit in 0..30 {
            assert!(byte_cap("the quick brown fox jumps", limit).len() <= limit);
        }
    }

    #[test]
    fn prefix_cuts_characters() {
        let long: String = ('a'..='z').cycle().take(100).collect();
        assert_eq!(prefix_baseline(&long), long[..75]);
        assert_eq!(prefix_baseline("short"), "short");
        let wide = "é".repeat(80);
        assert_eq!(prefix_baseline(&wide).chars().count(), 75);
    }

    #[test]
    fn extractive_cases() {
        assert_eq!(extractive_pct(&["a", "b"], &["b", "a", "c"]), Some(100.0));
        assert_eq!(extractive_pct(&["x"], &["a"]), Some(0.0));
        assert_eq!(extractive_pct(&["a", "a"], &["a"]), Some(50.0));
        assert_eq!(extractive_pct::<&str, &str>(&[], &["a"]), None);
    }

    #[test]
    fn histogram_conserves_counts() {
        let h = length_histogram(&["x".repeat(75)], 10);
        assert_eq!(h.last(), Some(&(70, 1)));
        assert_eq!(h.iter().map(|b| b.1).sum::<usize>(), 1);
        let outs = ["", "ab", "abcdefghijk", "abcdefghijkl"];
        let h = length_histogram(&outs, 5);
        assert_eq!(h, vec![(0, 2), (5, 0), (10, 2)]);
        assert!(histogram_to_string(&h).starts_with("bucket_start,count\n0,2\n"));
    }
}
