//! Cyclic index helpers. Queue indices are 0-based and taken modulo `n`.
//!
//! `span(a, b, n)` is the inclusive cyclic range a, a+1, ..., b. When `a > b`
//! it wraps through n-1 back to 0, and `span(a, a, n)` is the single index a.
//! `span_excl(a, b, n)` drops the final index, so it is empty when `a == b`.
//! The full cycle starting at a is `span(a, pred(a, n), n)`.

#[inline]
pub fn succ(i: usize, n: usize) -> usize {
    if i + 1 == n {
        0
    } else {
        i + 1
    }
}

#[inline]
pub fn pred(i: usize, n: usize) -> usize {
    if i == 0 {
        n - 1
    } else {
        i - 1
    }
}

/// Number of indices in `span(a, b, n)`.
#[inline]
pub fn span_len(a: usize, b: usize, n: usize) -> usize {
    (b + n - a) % n + 1
}

pub fn span(a: usize, b: usize, n: usize) -> impl Iterator<Item = usize> + Clone {
    let len = span_len(a, b, n);
    (0..len).map(move |t| (a + t) % n)
}

pub fn span_excl(a: usize, b: usize, n: usize) -> impl Iterator<Item = usize> + Clone {
    let len = (b + n - a) % n;
    (0..len).map(move |t| (a + t) % n)
}

/// Whether `x` lies in the inclusive cyclic span a..b.
#[inline]
pub fn in_span(x: usize, a: usize, b: usize, n: usize) -> bool {
    (x + n - a) % n <= (b + n - a) % n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spans_wrap() {
        assert_eq!(span(2, 0, 3).collect::<Vec<_>>(), vec![2, 0]);
        assert_eq!(span(1, 1, 3).collect::<Vec<_>>(), vec![1]);
        assert_eq!(span(1, 0, 3).collect::<Vec<_>>(), vec![1, 2, 0]);
        assert_eq!(span_excl(1, 1, 3).count(), 0);
        assert_eq!(span_excl(2, 1, 3).collect::<Vec<_>>(), vec![2, 0]);
        assert!(in_span(0, 2, 0, 3));
        assert!(!in_span(1, 2, 0, 3));
        assert_eq!(succ(2, 3), 0);
        assert_eq!(pred(0, 3), 2);
    }
}
