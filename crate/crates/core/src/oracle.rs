//! Straightforward reference evaluators used to cross-check the optimized
//! paths. They favour obviousness over speed.

use std::collections::{BTreeMap, HashMap};

use crate::apps::{SetFamily, SimilarPair};
use crate::joinproject::OutputSet;
use crate::relation::{Relation, ValueId};

fn group_by_right(rel: &Relation) -> HashMap<ValueId, Vec<ValueId>> {
    let mut by_y: HashMap<ValueId, Vec<ValueId>> = HashMap::new();
    for &(a, b) in rel.tuples() {
        by_y.entry(b).or_default().push(a);
    }
    by_y
}

/// `(x, z) → number of shared y` for `R(x,y) ⋈ S(z,y)`.
pub fn two_path_counts(r: &Relation, s: &Relation) -> BTreeMap<(ValueId, ValueId), u32> {
    let by_y = group_by_right(s);
    let mut out = BTreeMap::new();
    for &(a, b) in r.tuples() {
        for &c in by_y.get(&b).into_iter().flatten() {
            *out.entry((a, c)).or_insert(0) += 1;
        }
    }
    out
}

/// `(x_1..x_k) → number of shared y` for a star join.
pub fn star_counts(rels: &[&Relation]) -> BTreeMap<Vec<ValueId>, u32> {
    let groups: Vec<_> = rels.iter().map(|r| group_by_right(r)).collect();
    let mut out = BTreeMap::new();
    let Some(first) = groups.first() else {
        return out;
    };
    for (b, _) in first.iter() {
        let lists: Option<Vec<&Vec<ValueId>>> = groups.iter().map(|g| g.get(b)).collect();
        let Some(lists) = lists else { continue };
        let mut partial: Vec<Vec<ValueId>> = vec![Vec::new()];
        for list in lists {
            partial = partial
                .into_iter()
                .flat_map(|p| {
                    list.iter().map(move |&a| {
                        let mut q = p.clone();
                        q.push(a);
                        q
                    })
                })
                .collect();
        }
        for t in partial {
            *out.entry(t).or_insert(0) += 1;
        }
    }
    out
}

/// Textbook triple loop in 64-bit arithmetic.
pub fn matmul(a: &[Vec<u32>], b: &[Vec<u32>]) -> Vec<Vec<u64>> {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            assert_eq!(row.len(), inner, "dimension mismatch");
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] as u64 * b[k][j] as u64).sum())
                .collect()
        })
        .collect()
}

fn overlap(a: &[ValueId], b: &[ValueId]) -> u32 {
    a.iter().filter(|x| b.binary_search(x).is_ok()).count() as u32
}

/// All pairs `a < b` sharing at least `c` elements.
pub fn ssj(family: &SetFamily, c: u32) -> Vec<SimilarPair> {
    let mut out = Vec::new();
    for a in 0..family.len() {
        for b in a + 1..family.len() {
            let n = overlap(family.set(a), family.set(b));
            if n >= c.max(1) {
                out.push(SimilarPair {
                    a: a as ValueId,
                    b: b as ValueId,
                    overlap: n,
                });
            }
        }
    }
    out
}

/// Ordered pairs `(a, b)`, `a ≠ b`, with non-empty `a ⊆ b`.
pub fn scj(family: &SetFamily) -> Vec<(ValueId, ValueId)> {
    let mut out = Vec::new();
    for a in 0..family.len() {
        let sa = family.set(a);
        if sa.is_empty() {
            continue;
        }
        for b in 0..family.len() {
            if a != b && overlap(sa, family.set(b)) as usize == sa.len() {
                out.push((a as ValueId, b as ValueId));
            }
        }
    }
    out
}

/// Tuple → count view of an output carrying counts.
pub fn counted(out: &OutputSet) -> BTreeMap<Vec<ValueId>, u32> {
    let counts = out.counts().expect("output without counts");
    out.iter().map(<[_]>::to_vec).zip(counts.iter().copied()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_path_small() {
        let r = Relation::from_pairs("r", [(0, 0), (0, 1), (1, 1)]);
        let s = Relation::from_pairs("s", [(5, 0), (5, 1)]);
        let m = two_path_counts(&r, &s);
        assert_eq!(m.get(&(0, 5)), Some(&2));
        assert_eq!(m.get(&(1, 5)), Some(&1));
        assert_eq!(m.len(), 2);
    }

    #[test]
    fn star_matches_two_path() {
        let r = Relation::from_pairs("r", [(0, 0), (1, 0), (2, 1)]);
        let s = Relation::from_pairs("s", [(3, 0), (4, 1)]);
        let star = star_counts(&[&r, &s]);
        let two: BTreeMap<Vec<u32>, u32> =
            two_path_counts(&r, &s).into_iter().map(|((a, c), n)| (vec![a, c], n)).collect();
        assert_eq!(star, two);
    }

    #[test]
    fn matmul_small() {
        let a = vec![vec![1, 2], vec![3, 4]];
        let b = vec![vec![5, 6], vec![7, 8]];
        assert_eq!(matmul(&a, &b), vec![vec![19, 22], vec![43, 50]]);
    }

    #[test]
    fn set_oracles() {
        let fam = SetFamily::from_sets(vec![vec![1, 2], vec![1, 2, 3], vec![4]]);
        assert_eq!(ssj(&fam, 2).len(), 1);
        assert_eq!(scj(&fam), vec![(0, 1)]);
    }
}
