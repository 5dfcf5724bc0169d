//! Join-project evaluation.
//!
//! [`two_path_join`] computes `π_{x,z} R(x,y) ⋈ S(z,y)`. Tuples touching a
//! light value are expanded through the indexes and deduplicated per left
//! value; tuples whose three values are all heavy are packed into 0/1
//! matrices and multiplied. The two parts count disjoint sets of witnesses,
//! so summing their counts gives the exact witness count per output pair.
//!
//! A `y` value is light when its degree is at most `Δ1` in both relations;
//! an `x` (or `z`) value is light when its degree in its own relation is at
//! most `Δ2`.
//!
//! [`star_join`] generalises this to `k ≤ 4` relations sharing `y`, with the
//! heavy part computed as `V·Wᵀ` over grouped heavy-value tuples.

use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::matmul::{multiply_counts_with, CountMatrix, KeyMap, Kernel, KernelOptions};
use crate::optimizer::{Strategy, ThresholdPlan};
use crate::relation::{semi_join_reduce, IndexedRelation, Relation, ValueId};

/// Deduplicated projection result, sorted lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputSet {
    arity: usize,
    data: Vec<ValueId>,
    counts: Option<Vec<u32>>,
}

impl OutputSet {
    pub fn empty(arity: usize) -> Self {
        OutputSet {
            arity,
            data: Vec::new(),
            counts: None,
        }
    }

    /// Build from arbitrary pairs; duplicates are merged.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (ValueId, ValueId)>) -> Self {
        let mut v: Vec<_> = pairs.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        OutputSet {
            arity: 2,
            data: v.into_iter().flat_map(|(a, b)| [a, b]).collect(),
            counts: None,
        }
    }

    /// Build from `(a, c, count)` triples sorted by `(a, c)` with no repeats.
    fn from_sorted_counted(entries: Vec<(ValueId, ValueId, u32)>, want_counts: bool) -> Self {
        let mut data = Vec::with_capacity(entries.len() * 2);
        let mut counts = Vec::with_capacity(if want_counts { entries.len() } else { 0 });
        for (a, c, n) in entries {
            data.push(a);
            data.push(c);
            if want_counts {
                counts.push(n);
            }
        }
        OutputSet {
            arity: 2,
            data,
            counts: want_counts.then_some(counts),
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        if self.arity == 0 {
            0
        } else {
            self.data.len() / self.arity
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn tuple(&self, i: usize) -> &[ValueId] {
        &self.data[i * self.arity..(i + 1) * self.arity]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[ValueId]> {
        self.data.chunks_exact(self.arity.max(1))
    }

    /// Pairs of a binary output.
    pub fn pairs(&self) -> Vec<(ValueId, ValueId)> {
        assert_eq!(self.arity, 2, "pairs() on a {}-ary output", self.arity);
        self.data.chunks_exact(2).map(|p| (p[0], p[1])).collect()
    }

    pub fn counts(&self) -> Option<&[u32]> {
        self.counts.as_deref()
    }

    pub fn position(&self, tuple: &[ValueId]) -> Option<usize> {
        let mut lo = 0;
        let mut hi = self.len();
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.tuple(mid).cmp(tuple) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    pub fn contains(&self, tuple: &[ValueId]) -> bool {
        self.position(tuple).is_some()
    }

    pub fn count_of(&self, tuple: &[ValueId]) -> Option<u32> {
        let counts = self.counts.as_ref()?;
        self.position(tuple).map(|i| counts[i])
    }

    /// Σ counts, i.e. |OUT_⋈| when counts were requested.
    pub fn total_witnesses(&self) -> Option<u64> {
        self.counts.as_ref().map(|c| c.iter().map(|&x| x as u64).sum())
    }

    pub fn without_counts(mut self) -> Self {
        self.counts = None;
        self
    }

    /// Keep entries accepted by `keep(tuple, count)`; count is 0 when absent.
    pub fn retain(&self, mut keep: impl FnMut(&[ValueId], u32) -> bool) -> OutputSet {
        let mut data = Vec::new();
        let mut counts = self.counts.as_ref().map(|_| Vec::new());
        for i in 0..self.len() {
            let n = self.counts.as_ref().map_or(0, |c| c[i]);
            if keep(self.tuple(i), n) {
                data.extend_from_slice(self.tuple(i));
                if let Some(c) = counts.as_mut() {
                    c.push(n);
                }
            }
        }
        OutputSet {
            arity: self.arity,
            data,
            counts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DedupStrategy {
    /// Counter vector over the `z` domain, reset through a touched list.
    VectorReuse,
    /// Append everything, sort, collapse runs.
    SortBased,
}

/// Default cache-size parameter for [`DedupStrategy::choose`].
pub const DEFAULT_DEDUP_CACHE_ENTRIES: usize = 1 << 16;

impl DedupStrategy {
    pub fn choose(dom_z: usize, cache_entries: usize) -> Self {
        if dom_z <= cache_entries {
            DedupStrategy::VectorReuse
        } else {
            DedupStrategy::SortBased
        }
    }
}

/// Accumulates `z` lists for one fixed left value and emits distinct `z`
/// with multiplicities. Reused across left values.
struct Deduper {
    strategy: DedupStrategy,
    counts: Vec<u32>,
    touched: Vec<ValueId>,
    buf: Vec<ValueId>,
    added: u64,
}

impl Deduper {
    fn new(strategy: DedupStrategy, dom_z: usize) -> Self {
        Deduper {
            strategy,
            counts: match strategy {
                DedupStrategy::VectorReuse => vec![0; dom_z],
                DedupStrategy::SortBased => Vec::new(),
            },
            touched: Vec::new(),
            buf: Vec::new(),
            added: 0,
        }
    }

    #[inline]
    fn add(&mut self, list: &[ValueId]) {
        self.added += list.len() as u64;
        match self.strategy {
            DedupStrategy::VectorReuse => {
                for &z in list {
                    let slot = &mut self.counts[z as usize];
                    if *slot == 0 {
                        self.touched.push(z);
                    }
                    *slot += 1;
                }
            }
            DedupStrategy::SortBased => self.buf.extend_from_slice(list),
        }
    }

    /// Emit `(z, multiplicity)` ascending and reset.
    fn drain(&mut self, mut emit: impl FnMut(ValueId, u32)) {
        match self.strategy {
            DedupStrategy::VectorReuse => {
                self.touched.sort_unstable();
                for &z in &self.touched {
                    let slot = &mut self.counts[z as usize];
                    emit(z, *slot);
                    *slot = 0;
                }
                self.touched.clear();
            }
            DedupStrategy::SortBased => {
                self.buf.sort_unstable();
                let mut i = 0;
                while i < self.buf.len() {
                    let z = self.buf[i];
                    let mut j = i + 1;
                    while j < self.buf.len() && self.buf[j] == z {
                        j += 1;
                    }
                    emit(z, (j - i) as u32);
                    i = j;
                }
                self.buf.clear();
            }
        }
    }
}

/// Union of `rev_S[b]` over `light_ys`, deduplicated and sorted.
pub fn dedup_light(light_ys: &[ValueId], s: &IndexedRelation, strategy: DedupStrategy) -> Vec<ValueId> {
    let mut d = Deduper::new(strategy, s.left_capacity());
    for &b in light_ys {
        d.add(s.rev(b));
    }
    let mut out = Vec::new();
    d.drain(|z, _| out.push(z));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JoinOptions {
    pub cores: usize,
    /// `None` picks by [`DedupStrategy::choose`].
    pub dedup: Option<DedupStrategy>,
    pub dedup_cache_entries: usize,
    /// Maximum heavy-tuple rows of a star matrix.
    pub star_row_cap: usize,
    pub kernel: Kernel,
}

impl Default for JoinOptions {
    fn default() -> Self {
        JoinOptions {
            cores: 1,
            dedup: None,
            dedup_cache_entries: DEFAULT_DEDUP_CACHE_ENTRIES,
            star_row_cap: 1 << 16,
            kernel: Kernel::default(),
        }
    }
}

impl JoinOptions {
    fn strategy_for(&self, dom_z: usize) -> DedupStrategy {
        self.dedup
            .unwrap_or_else(|| DedupStrategy::choose(dom_z, self.dedup_cache_entries))
    }

    fn kernel_options(&self) -> KernelOptions {
        KernelOptions {
            cores: self.cores,
            kernel: self.kernel,
        }
    }
}

/// Work counters from one join evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct JoinStats {
    /// Tuples enumerated by the light expansion before deduplication.
    pub light_intermediate: u64,
    pub heavy_rows: usize,
    pub heavy_inner: usize,
    pub heavy_cols: usize,
}

/// One side of a two-path partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub light: Vec<(ValueId, ValueId)>,
    pub heavy: Vec<(ValueId, ValueId)>,
    pub delta1: usize,
    pub delta2: usize,
}

struct Thresholds<'a> {
    r: &'a IndexedRelation,
    s: &'a IndexedRelation,
    d1: usize,
    d2: usize,
}

impl Thresholds<'_> {
    #[inline]
    fn light_y(&self, b: ValueId) -> bool {
        self.r.right_degree(b) <= self.d1 && self.s.right_degree(b) <= self.d1
    }

    #[inline]
    fn light_x(&self, a: ValueId) -> bool {
        self.r.left_degree(a) <= self.d2
    }

    #[inline]
    fn light_z(&self, c: ValueId) -> bool {
        self.s.left_degree(c) <= self.d2
    }
}

fn check_deltas(d1: usize, d2: usize) -> Result<()> {
    if d1 < 1 || d2 < 1 {
        return Err(Error::InvalidPlan(format!("thresholds must be >= 1, got ({d1}, {d2})")));
    }
    Ok(())
}

/// Split `R` and `S` into light and heavy tuples for thresholds `(Δ1, Δ2)`.
pub fn partition_two_path(
    r: &IndexedRelation,
    s: &IndexedRelation,
    d1: usize,
    d2: usize,
) -> Result<(Partition, Partition)> {
    check_deltas(d1, d2)?;
    let t = Thresholds { r, s, d1, d2 };
    let split = |rel: &IndexedRelation, light_left: &dyn Fn(ValueId) -> bool| {
        let (light, heavy) = rel
            .base()
            .tuples()
            .iter()
            .partition(|&&(a, b)| light_left(a) || t.light_y(b));
        Partition {
            light,
            heavy,
            delta1: d1,
            delta2: d2,
        }
    };
    Ok((split(r, &|a| t.light_x(a)), split(s, &|c| t.light_z(c))))
}

/// Make sure both relations only hold joining tuples.
fn reduced<'a>(
    r: &'a IndexedRelation,
    s: &'a IndexedRelation,
) -> (Cow<'a, IndexedRelation>, Cow<'a, IndexedRelation>) {
    if r.is_reduced_with(s) {
        (Cow::Borrowed(r), Cow::Borrowed(s))
    } else {
        let (r2, s2) = semi_join_reduce(r.base(), s.base());
        (
            Cow::Owned(IndexedRelation::build(r2)),
            Cow::Owned(IndexedRelation::build(s2)),
        )
    }
}

/// `π_{x,z} R(x,y) ⋈ S(z,y)` under the given plan.
pub fn two_path_join(
    r: &IndexedRelation,
    s: &IndexedRelation,
    plan: &ThresholdPlan,
    want_counts: bool,
) -> Result<OutputSet> {
    two_path_join_with(r, s, plan, want_counts, &JoinOptions::default())
}

pub fn two_path_join_with(
    r: &IndexedRelation,
    s: &IndexedRelation,
    plan: &ThresholdPlan,
    want_counts: bool,
    opts: &JoinOptions,
) -> Result<OutputSet> {
    two_path_join_stats(r, s, plan, want_counts, opts).map(|(out, _)| out)
}

/// As [`two_path_join_with`], also returning work counters.
pub fn two_path_join_stats(
    r: &IndexedRelation,
    s: &IndexedRelation,
    plan: &ThresholdPlan,
    want_counts: bool,
    opts: &JoinOptions,
) -> Result<(OutputSet, JoinStats)> {
    plan.validate()?;
    let (r, s) = reduced(r, s);
    match plan.strategy {
        Strategy::FullJoin => Ok(full_join_impl(&r, &s, want_counts, opts)),
        Strategy::Partitioned => partitioned_join(&r, &s, plan.delta1, plan.delta2, want_counts, opts),
    }
}

fn partitioned_join(
    r: &IndexedRelation,
    s: &IndexedRelation,
    d1: usize,
    d2: usize,
    want_counts: bool,
    opts: &JoinOptions,
) -> Result<(OutputSet, JoinStats)> {
    let t = Thresholds { r, s, d1, d2 };
    let ny = r.right_capacity().max(s.right_capacity());
    let light_y: Vec<bool> = (0..ny as ValueId).map(|b| t.light_y(b)).collect();

    // rev_S[b] restricted to light z, for heavy b only
    let mut lz_offsets = vec![0usize; ny + 1];
    let mut lz_targets = Vec::new();
    for b in 0..ny {
        if !light_y[b] {
            lz_targets.extend(s.rev(b as ValueId).iter().copied().filter(|&c| t.light_z(c)));
        }
        lz_offsets[b + 1] = lz_targets.len();
    }

    let mut stats = JoinStats::default();
    let mut dedup = Deduper::new(opts.strategy_for(s.left_capacity()), s.left_capacity());
    let mut light = Vec::new();
    for a in r.left_values() {
        let fwd = r.fwd(a);
        if t.light_x(a) {
            for &b in fwd {
                dedup.add(s.rev(b));
            }
        } else {
            for &b in fwd {
                if light_y[b as usize] {
                    dedup.add(s.rev(b));
                } else {
                    let bi = b as usize;
                    dedup.add(&lz_targets[lz_offsets[bi]..lz_offsets[bi + 1]]);
                }
            }
        }
        dedup.drain(|c, n| light.push((a, c, n)));
    }
    stats.light_intermediate = dedup.added;

    let (m1, m2) = heavy_matrices(&t, &light_y);
    stats.heavy_rows = m1.rows();
    stats.heavy_inner = m1.cols();
    stats.heavy_cols = m2.cols();
    let mut heavy = Vec::new();
    if m1.rows() > 0 && m1.cols() > 0 && m2.cols() > 0 {
        let m = multiply_counts_with(&m1, &m2, &opts.kernel_options())?;
        for i in 0..m.rows() {
            let a = m.row_keys.get(i)[0];
            for (k, &n) in m.row(i).iter().enumerate() {
                if n > 0 {
                    heavy.push((a, m.col_keys.get(k)[0], n));
                }
            }
        }
    }

    let merged = merge_counted(light, heavy);
    Ok((OutputSet::from_sorted_counted(merged, want_counts), stats))
}

/// Heavy-part matrices `M1` (heavy x × heavy y) and `M2` (heavy y × heavy z).
fn heavy_matrices(t: &Thresholds<'_>, light_y: &[bool]) -> (CountMatrix, CountMatrix) {
    let (r, s) = (t.r, t.s);
    let is_heavy_y = |b: ValueId| !light_y.get(b as usize).copied().unwrap_or(true);

    let ys: Vec<ValueId> = (0..light_y.len() as ValueId)
        .filter(|&b| {
            is_heavy_y(b)
                && r.rev(b).iter().any(|&a| !t.light_x(a))
                && s.rev(b).iter().any(|&c| !t.light_z(c))
        })
        .collect();
    let xs: Vec<ValueId> = r
        .left_values()
        .filter(|&a| !t.light_x(a) && intersects(r.fwd(a), &ys))
        .collect();
    let zs: Vec<ValueId> = s
        .left_values()
        .filter(|&c| !t.light_z(c) && intersects(s.fwd(c), &ys))
        .collect();

    let mut m1 = CountMatrix::with_keys(KeyMap::from_ids(xs.clone()), KeyMap::from_ids(ys.clone()));
    for (i, &a) in xs.iter().enumerate() {
        for j in membership(r.fwd(a), &ys) {
            m1.set(i, j, 1);
        }
    }
    let mut m2 = CountMatrix::with_keys(KeyMap::from_ids(ys.clone()), KeyMap::from_ids(zs.clone()));
    for (j, &b) in ys.iter().enumerate() {
        for k in membership(s.rev(b), &zs) {
            m2.set(j, k, 1);
        }
    }
    (m1, m2)
}

/// The heavy matrices `M1`, `M2` that the partitioned join would multiply.
pub fn two_path_heavy_matrices(
    r: &IndexedRelation,
    s: &IndexedRelation,
    d1: usize,
    d2: usize,
) -> Result<(CountMatrix, CountMatrix)> {
    check_deltas(d1, d2)?;
    let (r, s) = reduced(r, s);
    let t = Thresholds { r: &r, s: &s, d1, d2 };
    let ny = r.right_capacity().max(s.right_capacity());
    let light_y: Vec<bool> = (0..ny as ValueId).map(|b| t.light_y(b)).collect();
    Ok(heavy_matrices(&t, &light_y))
}

fn intersects(a: &[ValueId], b: &[ValueId]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

/// Positions in `keys` of the elements of `list` (both sorted).
fn membership<'a>(list: &'a [ValueId], keys: &'a [ValueId]) -> impl Iterator<Item = usize> + 'a {
    let mut i = 0;
    keys.iter().enumerate().filter_map(move |(pos, &k)| {
        while i < list.len() && list[i] < k {
            i += 1;
        }
        (i < list.len() && list[i] == k).then_some(pos)
    })
}

/// Merge two `(a, c, n)` lists sorted by `(a, c)`, summing counts of pairs
/// present in both.
fn merge_counted(
    left: Vec<(ValueId, ValueId, u32)>,
    right: Vec<(ValueId, ValueId, u32)>,
) -> Vec<(ValueId, ValueId, u32)> {
    if right.is_empty() {
        return left;
    }
    if left.is_empty() {
        return right;
    }
    let mut out = Vec::with_capacity(left.len() + right.len());
    let (mut i, mut j) = (0, 0);
    while i < left.len() && j < right.len() {
        let (l, r) = (left[i], right[j]);
        match (l.0, l.1).cmp(&(r.0, r.1)) {
            std::cmp::Ordering::Less => {
                out.push(l);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(r);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push((l.0, l.1, l.2 + r.2));
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&left[i..]);
    out.extend_from_slice(&right[j..]);
    out
}

/// Enumerate the full join through the `y` index and deduplicate; the
/// result always carries witness counts.
pub fn full_join_dedup(r: &IndexedRelation, s: &IndexedRelation) -> OutputSet {
    full_join_impl(r, s, true, &JoinOptions::default()).0
}

pub fn full_join_dedup_with(
    r: &IndexedRelation,
    s: &IndexedRelation,
    want_counts: bool,
    opts: &JoinOptions,
) -> OutputSet {
    full_join_impl(r, s, want_counts, opts).0
}

fn full_join_impl(
    r: &IndexedRelation,
    s: &IndexedRelation,
    want_counts: bool,
    opts: &JoinOptions,
) -> (OutputSet, JoinStats) {
    let mut dedup = Deduper::new(opts.strategy_for(s.left_capacity()), s.left_capacity());
    let mut out = Vec::new();
    for a in r.left_values() {
        for &b in r.fwd(a) {
            dedup.add(s.rev(b));
        }
        dedup.drain(|c, n| out.push((a, c, n)));
    }
    let stats = JoinStats {
        light_intermediate: dedup.added,
        ..JoinStats::default()
    };
    (OutputSet::from_sorted_counted(out, want_counts), stats)
}

pub const MAX_STAR_ARITY: usize = 4;

type StarKey = [ValueId; MAX_STAR_ARITY];

/// Per-relation classification for the star partition: `R_i⁻` holds tuples
/// with light `x_i`, `R_i⋄` tuples whose `y` is light in every other
/// relation, `R_i⁺` the rest.
struct StarParts<'a> {
    rels: Vec<&'a IndexedRelation>,
    d1: usize,
    d2: usize,
}

impl StarParts<'_> {
    fn diamond(&self, i: usize, b: ValueId) -> bool {
        self.rels
            .iter()
            .enumerate()
            .all(|(j, r)| j == i || r.right_degree(b) <= self.d1)
    }

    fn heavy_tuple(&self, i: usize, a: ValueId, b: ValueId) -> bool {
        self.rels[i].left_degree(a) > self.d2 && !self.diamond(i, b)
    }

    fn ny(&self) -> usize {
        self.rels.iter().map(|r| r.right_capacity()).max().unwrap_or(0)
    }

    /// Heavy left values per relation and heavy `y` columns (those with a
    /// heavy tuple in every relation).
    fn heavy_keys(&self) -> (Vec<Vec<ValueId>>, Vec<ValueId>) {
        let k = self.rels.len();
        let cols: Vec<ValueId> = (0..self.ny() as ValueId)
            .filter(|&b| (0..k).all(|i| self.rels[i].rev(b).iter().any(|&a| self.heavy_tuple(i, a, b))))
            .collect();
        let keys = (0..k)
            .map(|i| {
                self.rels[i]
                    .left_values()
                    .filter(|&a| self.rels[i].left_degree(a) > self.d2 && intersects(self.rels[i].fwd(a), &cols))
                    .collect()
            })
            .collect();
        (keys, cols)
    }

    /// Matrix whose rows are all combinations of heavy values of `group`
    /// and whose entry is 1 when every member joins with the column `y`.
    fn group_matrix(
        &self,
        group: std::ops::Range<usize>,
        keys: &[Vec<ValueId>],
        cols: &[ValueId],
        cap: usize,
    ) -> Result<CountMatrix> {
        let rows: u128 = group.clone().map(|i| keys[i].len() as u128).product();
        if rows > cap as u128 {
            return Err(Error::ResourceLimit(format!(
                "star heavy matrix needs {rows} rows (cap {cap}); raise delta2"
            )));
        }
        // per relation, per heavy value: 0/1 row over the columns
        let incidence: Vec<Vec<Vec<u32>>> = group
            .clone()
            .map(|i| {
                keys[i]
                    .iter()
                    .map(|&a| {
                        let mut row = vec![0u32; cols.len()];
                        for j in membership(self.rels[i].fwd(a), cols) {
                            row[j] = 1;
                        }
                        row
                    })
                    .collect()
            })
            .collect();

        let arity = group.len();
        let mut row_keys = KeyMap::new(arity);
        let mut data_rows: Vec<Vec<u32>> = Vec::with_capacity(rows as usize);
        let mut idx = vec![0usize; arity];
        if rows > 0 {
            'rows: loop {
                let key: Vec<ValueId> = (0..arity).map(|g| keys[group.start + g][idx[g]]).collect();
                row_keys.push(&key);
                let mut row = incidence[0][idx[0]].clone();
                for g in 1..arity {
                    for (x, &y) in row.iter_mut().zip(&incidence[g][idx[g]]) {
                        *x &= y;
                    }
                }
                data_rows.push(row);
                // odometer over the cross product, last position fastest
                let mut g = arity;
                loop {
                    if g == 0 {
                        break 'rows;
                    }
                    g -= 1;
                    idx[g] += 1;
                    if idx[g] < keys[group.start + g].len() {
                        break;
                    }
                    idx[g] = 0;
                }
            }
        }
        let mut m = CountMatrix::with_keys(row_keys, KeyMap::from_ids(cols.to_vec()));
        for (i, row) in data_rows.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if x != 0 {
                    m.set(i, j, x);
                }
            }
        }
        Ok(m)
    }
}

fn check_star(rels: &[&IndexedRelation], d1: usize, d2: usize) -> Result<()> {
    if !(2..=MAX_STAR_ARITY).contains(&rels.len()) {
        return Err(Error::StarArity(rels.len()));
    }
    check_deltas(d1, d2)
}

/// Keep only tuples whose `y` occurs in every relation.
fn reduce_star(rels: &[&IndexedRelation]) -> Vec<IndexedRelation> {
    let ny = rels.iter().map(|r| r.right_capacity()).max().unwrap_or(0);
    let keep: Vec<bool> = (0..ny as ValueId)
        .map(|b| rels.iter().all(|r| r.right_degree(b) > 0))
        .collect();
    rels.iter()
        .map(|r| {
            let base: Relation = r.base().filter(|_, b| keep[b as usize]);
            IndexedRelation::build(base)
        })
        .collect()
}

/// Matrices `V` (first ⌈k/2⌉ relations) and `W` (the rest) of the star
/// heavy part; the heavy output is `V·Wᵀ`.
pub fn star_heavy_matrices(
    rels: &[&IndexedRelation],
    d1: usize,
    d2: usize,
    row_cap: usize,
) -> Result<(CountMatrix, CountMatrix)> {
    check_star(rels, d1, d2)?;
    let owned = reduce_star(rels);
    let parts = StarParts {
        rels: owned.iter().collect(),
        d1,
        d2,
    };
    let k = rels.len();
    let g = k.div_ceil(2);
    let (keys, cols) = parts.heavy_keys();
    let v = parts.group_matrix(0..g, &keys, &cols, row_cap)?;
    let w = parts.group_matrix(g..k, &keys, &cols, row_cap)?;
    Ok((v, w))
}

/// `π_{x1..xk}(R_1 ⋈ … ⋈ R_k)` on the shared `y` column.
pub fn star_join(rels: &[&IndexedRelation], d1: usize, d2: usize, want_counts: bool) -> Result<OutputSet> {
    star_join_with(rels, d1, d2, want_counts, &JoinOptions::default())
}

pub fn star_join_with(
    rels: &[&IndexedRelation],
    d1: usize,
    d2: usize,
    want_counts: bool,
    opts: &JoinOptions,
) -> Result<OutputSet> {
    check_star(rels, d1, d2)?;
    let k = rels.len();
    let owned = reduce_star(rels);
    let parts = StarParts {
        rels: owned.iter().collect(),
        d1,
        d2,
    };

    // Light witnesses: (t, b) where some component is in R_j⁻ ∪ R_j⋄.
    // Split by the first such j so each witness is produced once.
    let mut entries: Vec<(StarKey, u32)> = Vec::new();
    let mut heavy_lists: Vec<Vec<ValueId>> = vec![Vec::new(); k];
    let mut light_lists: Vec<Vec<ValueId>> = vec![Vec::new(); k];
    for b in 0..parts.ny() as ValueId {
        if parts.rels.iter().any(|r| r.right_degree(b) == 0) {
            continue;
        }
        for i in 0..k {
            heavy_lists[i].clear();
            light_lists[i].clear();
            for &a in parts.rels[i].rev(b) {
                if parts.heavy_tuple(i, a, b) {
                    heavy_lists[i].push(a);
                } else {
                    light_lists[i].push(a);
                }
            }
        }
        for j in 0..k {
            if light_lists[j].is_empty() || (0..j).any(|i| heavy_lists[i].is_empty()) {
                continue;
            }
            let lists: Vec<&[ValueId]> = (0..k)
                .map(|i| match i.cmp(&j) {
                    std::cmp::Ordering::Less => heavy_lists[i].as_slice(),
                    std::cmp::Ordering::Equal => light_lists[i].as_slice(),
                    std::cmp::Ordering::Greater => parts.rels[i].rev(b),
                })
                .collect();
            for_each_product(&lists, |key| entries.push((key, 1)));
        }
    }

    let g = k.div_ceil(2);
    let (keys, cols) = parts.heavy_keys();
    if !cols.is_empty() && keys.iter().all(|ks| !ks.is_empty()) {
        let v = parts.group_matrix(0..g, &keys, &cols, opts.star_row_cap)?;
        let w = parts.group_matrix(g..k, &keys, &cols, opts.star_row_cap)?;
        let m = multiply_counts_with(&v, &w.transpose(), &opts.kernel_options())?;
        for i in 0..m.rows() {
            let left = m.row_keys.get(i);
            for (c, &n) in m.row(i).iter().enumerate() {
                if n > 0 {
                    let mut key = [0; MAX_STAR_ARITY];
                    key[..g].copy_from_slice(left);
                    key[g..k].copy_from_slice(m.col_keys.get(c));
                    entries.push((key, n));
                }
            }
        }
    }

    entries.sort_unstable_by_key(|e| e.0);
    let mut data = Vec::new();
    let mut counts = Vec::new();
    let mut i = 0;
    while i < entries.len() {
        let key = entries[i].0;
        let mut n = 0u32;
        while i < entries.len() && entries[i].0 == key {
            n += entries[i].1;
            i += 1;
        }
        data.extend_from_slice(&key[..k]);
        counts.push(n);
    }
    Ok(OutputSet {
        arity: k,
        data,
        counts: want_counts.then_some(counts),
    })
}

fn for_each_product(lists: &[&[ValueId]], mut f: impl FnMut(StarKey)) {
    if lists.iter().any(|l| l.is_empty()) {
        return;
    }
    let k = lists.len();
    let mut idx = [0usize; MAX_STAR_ARITY];
    loop {
        let mut key = [0; MAX_STAR_ARITY];
        for i in 0..k {
            key[i] = lists[i][idx[i]];
        }
        f(key);
        let mut pos = k;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < lists[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}
