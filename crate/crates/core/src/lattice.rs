//! Enumeration of multi-indices in `Z_+^d`.
//!
//! Every enumeration here is lexicographic on the count vector so that
//! tables and serialized outputs come out in a fixed order.

use crate::laws::VisitVector;

/// All `k` with `|k| = n`, lexicographic.
pub fn multi_indices_of_degree(dimension: usize, n: u32) -> Vec<VisitVector> {
    let mut out = Vec::new();
    if dimension == 0 {
        return out;
    }
    let mut current = vec![0u32; dimension];
    fill_degree(&mut current, 0, n, &mut out);
    out
}

fn fill_degree(current: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<VisitVector>) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(VisitVector::new(current.to_vec()));
        return;
    }
    for c in 0..=remaining {
        current[pos] = c;
        fill_degree(current, pos + 1, remaining - c, out);
    }
}

/// All `k` with `|k| <= order`, grouped by total degree and lexicographic
/// within each degree.
pub fn multi_indices_up_to_degree(dimension: usize, order: u32) -> Vec<VisitVector> {
    (0..=order)
        .flat_map(|n| multi_indices_of_degree(dimension, n))
        .collect()
}

/// All `k` in the box `{0..=max}^d`, lexicographic.
pub fn box_indices(dimension: usize, max: u32) -> Vec<VisitVector> {
    let side = max as usize + 1;
    let total = side.pow(dimension as u32);
    (0..total)
        .map(|mut flat| {
            let mut counts = vec![0u32; dimension];
            for slot in counts.iter_mut().rev() {
                *slot = (flat % side) as u32;
                flat /= side;
            }
            VisitVector::new(counts)
        })
        .collect()
}

/// All `m` with `0 <= m <= h` componentwise, lexicographic.
pub fn sub_indices(h: &VisitVector) -> Vec<VisitVector> {
    let mut out = vec![VisitVector::zeros(h.dimension())];
    for (axis, &limit) in h.counts().iter().enumerate() {
        let mut next = Vec::with_capacity(out.len() * (limit as usize + 1));
        for base in &out {
            for c in 0..=limit {
                let mut counts = base.counts().to_vec();
                counts[axis] = c;
                next.push(VisitVector::new(counts));
            }
        }
        out = next;
    }
    out.sort();
    out
}

/// Number of multi-indices with `|k| <= order` in dimension `d`: C(order + d, d).
pub fn count_up_to_degree(dimension: usize, order: u32) -> usize {
    let mut acc: u128 = 1;
    for i in 1..=dimension as u128 {
        acc = acc * (order as u128 + i) / i;
    }
    acc as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_slices_are_lexicographic() {
        let idx: Vec<Vec<u32>> = multi_indices_of_degree(2, 2)
            .into_iter()
            .map(|k| k.counts().to_vec())
            .collect();
        assert_eq!(idx, vec![vec![0, 2], vec![1, 1], vec![2, 0]]);
    }

    #[test]
    fn graded_count_matches_binomial() {
        for d in 1..=4 {
            for order in 0..=6 {
                assert_eq!(
                    multi_indices_up_to_degree(d, order).len(),
                    count_up_to_degree(d, order)
                );
            }
        }
    }

    #[test]
    fn box_has_side_to_the_d_points() {
        let b = box_indices(3, 2);
        assert_eq!(b.len(), 27);
        assert_eq!(b[0].counts(), &[0, 0, 0]);
        assert_eq!(b[1].counts(), &[0, 0, 1]);
        assert_eq!(b[26].counts(), &[2, 2, 2]);
    }

    #[test]
    fn sub_indices_cover_the_rectangle() {
        let h = VisitVector::new(vec![1, 2]);
        let subs = sub_indices(&h);
        assert_eq!(subs.len(), 6);
        assert!(subs.windows(2).all(|w| w[0] < w[1]));
    }
}
