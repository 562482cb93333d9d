/// Unit-cost insert/delete/substitute edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Distance if it is at most `max`, else `None`. Skips the table when the
/// length difference alone exceeds `max`.
pub fn levenshtein_within(a: &str, b: &str, max: usize) -> Option<usize> {
    let (la, lb) = (a.chars().count(), b.chars().count());
    if la.abs_diff(lb) > max {
        return None;
    }
    let d = levenshtein(a, b);
    (d <= max).then_some(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Full-matrix recurrence, memoised top-down.
    fn oracle(a: &[char], b: &[char]) -> usize {
        fn go(a: &[char], b: &[char], i: usize, j: usize, memo: &mut Vec<Vec<Option<usize>>>) -> usize {
            if let Some(v) = memo[i][j] {
                return v;
            }
            let v = if i == 0 {
                j
            } else if j == 0 {
                i
            } else {
                let cost = usize::from(a[i - 1] != b[j - 1]);
                (go(a, b, i - 1, j, memo) + 1)
                    .min(go(a, b, i, j - 1, memo) + 1)
                    .min(go(a, b, i - 1, j - 1, memo) + cost)
            };
            memo[i][j] = Some(v);
            v
        }
        let mut memo = vec![vec![None; b.len() + 1]; a.len() + 1];
        go(a, b, a.len(), b.len(), &mut memo)
    }

    fn o(a: &str, b: &str) -> usize {
        oracle(&a.chars().collect::<Vec<_>>(), &b.chars().collect::<Vec<_>>())
    }

    #[test]
    fn named_cases() {
        assert_eq!(levenshtein("", "ABC"), 3);
        assert_eq!(levenshtein("KITTEN", "SITTING"), o("KITTEN", "SITTING"));
        assert_eq!(o("KITTEN", "SITTING"), 3);
        assert_eq!(levenshtein("JON", "JOHN"), 1);
        assert_eq!(levenshtein("JANE", "JOHN"), o("JANE", "JOHN"));
        assert_eq!(o("JANE", "JOHN"), 3);
        assert_eq!(levenshtein("MARY", "MARY"), 0);
    }

    #[test]
    fn within_bound() {
        assert_eq!(levenshtein_within("JON", "JOHN", 1), Some(1));
        assert_eq!(levenshtein_within("JANE", "JOHN", 1), None);
        assert_eq!(levenshtein_within("A", "ABCD", 2), None);
    }

    proptest! {
        #[test]
        fn matches_oracle(a in "[A-E]{0,12}", b in "[A-E]{0,12}") {
            prop_assert_eq!(levenshtein(&a, &b), o(&a, &b));
        }

        #[test]
        fn is_a_metric(a in "[A-D]{0,12}", b in "[A-D]{0,12}", c in "[A-D]{0,12}") {
            prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
            prop_assert_eq!(levenshtein(&a, &a), 0);
            prop_assert_eq!(levenshtein(&a, &b) == 0, a == b);
            prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
        }
    }
}
