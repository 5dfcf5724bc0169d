//! Applications of the two-path join: set similarity, set containment and
//! batched boolean set intersection.

use std::collections::VecDeque;
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::joinproject::{two_path_join_with, JoinOptions};
use crate::optimizer::{estimate_output_size, Planner};
use crate::relation::{IndexedRelation, Relation, ValueId};

/// Sets over a shared element universe; set ids are positions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SetFamily {
    sets: Vec<Vec<ValueId>>,
}

impl SetFamily {
    pub fn from_sets<I, S>(sets: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: IntoIterator<Item = ValueId>,
    {
        let sets = sets
            .into_iter()
            .map(|s| {
                let mut v: Vec<_> = s.into_iter().collect();
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect();
        SetFamily { sets }
    }

    /// Left values are set ids, right values are elements.
    pub fn from_relation(rel: &Relation) -> Self {
        let n = rel.tuples().last().map_or(0, |&(a, _)| a as usize + 1);
        let mut sets = vec![Vec::new(); n];
        for &(a, b) in rel.tuples() {
            sets[a as usize].push(b);
        }
        SetFamily { sets }
    }

    pub fn to_relation(&self) -> Relation {
        self.relation_where(|_| true)
    }

    /// Relation of the sets whose id is accepted by `keep`.
    pub fn relation_where(&self, mut keep: impl FnMut(usize) -> bool) -> Relation {
        let pairs: Vec<_> = self
            .sets
            .iter()
            .enumerate()
            .filter(|&(i, _)| keep(i))
            .flat_map(|(i, s)| s.iter().map(move |&b| (i as ValueId, b)))
            .collect();
        Relation::from_pairs("sets", pairs)
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn set(&self, id: usize) -> &[ValueId] {
        &self.sets[id]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[ValueId]> {
        self.sets.iter().map(Vec::as_slice)
    }

    /// One past the largest element.
    pub fn universe(&self) -> usize {
        self.sets
            .iter()
            .filter_map(|s| s.last())
            .map(|&b| b as usize + 1)
            .max()
            .unwrap_or(0)
    }
}

/// `lists[b]` holds the ids of the sets containing `b`, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvertedLists {
    lists: Vec<Vec<ValueId>>,
}

impl InvertedLists {
    pub fn build(family: &SetFamily) -> Self {
        Self::build_where(family, |_| true)
    }

    pub fn build_where(family: &SetFamily, mut keep: impl FnMut(usize) -> bool) -> Self {
        let mut lists = vec![Vec::new(); family.universe()];
        for (i, s) in family.iter().enumerate() {
            if keep(i) {
                for &b in s {
                    lists[b as usize].push(i as ValueId);
                }
            }
        }
        InvertedLists { lists }
    }

    pub fn from_lists(lists: Vec<Vec<ValueId>>) -> Self {
        let lists = lists
            .into_iter()
            .map(|mut l| {
                l.sort_unstable();
                l.dedup();
                l
            })
            .collect();
        InvertedLists { lists }
    }

    pub fn get(&self, b: ValueId) -> &[ValueId] {
        self.lists.get(b as usize).map_or(&[], Vec::as_slice)
    }
}

fn overlap(a: &[ValueId], b: &[ValueId]) -> u32 {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Per-node state: `(target id, shared elements so far)` ascending by id,
/// with counts saturating at `c`.
type NodeState = Vec<(ValueId, u32)>;

#[derive(Debug, Clone, Default)]
struct TrieNode {
    children: Vec<(ValueId, usize)>,
    ends: Vec<usize>,
}

/// Trie over query sets, each written in descending order of inverted-list
/// length, so that queries sharing a prefix share the merged counts.
#[derive(Debug, Clone)]
pub struct PrefixTree<'a> {
    lists: &'a InvertedLists,
    paths: Vec<Vec<ValueId>>,
    nodes: Vec<TrieNode>,
}

/// Pairs found by [`PrefixTree::evaluate`] and the list entries it touched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixResult {
    /// `(query id, target id)` with at least `c` shared elements.
    pub pairs: Vec<(ValueId, ValueId)>,
    pub ops: u64,
}

impl<'a> PrefixTree<'a> {
    pub fn build(queries: &SetFamily, lists: &'a InvertedLists) -> Self {
        let key = |b: &ValueId| (std::cmp::Reverse(lists.get(*b).len()), *b);
        let mut nodes = vec![TrieNode::default()];
        let mut paths = Vec::with_capacity(queries.len());
        for (q, set) in queries.iter().enumerate() {
            let mut path = set.to_vec();
            path.sort_unstable_by_key(key);
            let mut at = 0;
            for &b in &path {
                at = match nodes[at].children.iter().find(|&&(e, _)| e == b) {
                    Some(&(_, child)) => child,
                    None => {
                        nodes.push(TrieNode::default());
                        let child = nodes.len() - 1;
                        nodes[at].children.push((b, child));
                        child
                    }
                };
            }
            nodes[at].ends.push(q);
            paths.push(path);
        }
        for n in &mut nodes {
            n.children.sort_unstable_by_key(|(b, _)| key(b));
        }
        PrefixTree { lists, paths, nodes }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Ordered element path of query `q`.
    pub fn path(&self, q: usize) -> &[ValueId] {
        &self.paths[q]
    }

    /// Targets at the node reached by `path`, split into those with at least
    /// `c` shared elements and the rest.
    pub fn node_state(&self, path: &[ValueId], c: u32) -> Option<(Vec<ValueId>, Vec<ValueId>)> {
        let mut at = 0;
        let mut state = NodeState::new();
        for &b in path {
            at = self.nodes[at].children.iter().find(|&&(e, _)| e == b)?.1;
            state = merge_state(&state, self.lists.get(b), c);
        }
        let (o, u): (Vec<(ValueId, u32)>, Vec<_>) = state.iter().partition(|&&(_, n)| n >= c);
        Some((o.iter().map(|e| e.0).collect(), u.iter().map(|e| e.0).collect()))
    }

    /// Find all (query, target) pairs sharing at least `c` elements.
    /// Nodes up to depth `cap` are shared between queries; deeper suffixes
    /// are merged per query. `cap = 0` merges every query on its own.
    pub fn evaluate(&self, c: u32, cap: usize) -> PrefixResult {
        let mut eval = Eval {
            tree: self,
            c,
            cap,
            ops: 0,
            pairs: Vec::new(),
        };
        if cap == 0 {
            for q in 0..self.paths.len() {
                let mut state = NodeState::new();
                for &b in &self.paths[q] {
                    state = eval.merge(&state, b);
                }
                eval.emit(&[q], &state);
            }
        } else {
            eval.visit(0, &NodeState::new(), 0);
        }
        let mut pairs = eval.pairs;
        pairs.sort_unstable();
        PrefixResult { pairs, ops: eval.ops }
    }
}

fn merge_state(state: &NodeState, list: &[ValueId], c: u32) -> NodeState {
    let mut out = Vec::with_capacity(state.len() + list.len());
    let (mut i, mut j) = (0, 0);
    while i < state.len() || j < list.len() {
        if j == list.len() || (i < state.len() && state[i].0 < list[j]) {
            out.push(state[i]);
            i += 1;
        } else if i == state.len() || list[j] < state[i].0 {
            out.push((list[j], 1.min(c)));
            j += 1;
        } else {
            out.push((state[i].0, (state[i].1 + 1).min(c)));
            i += 1;
            j += 1;
        }
    }
    out
}

struct Eval<'t, 'a> {
    tree: &'t PrefixTree<'a>,
    c: u32,
    cap: usize,
    ops: u64,
    pairs: Vec<(ValueId, ValueId)>,
}

impl Eval<'_, '_> {
    fn merge(&mut self, state: &NodeState, b: ValueId) -> NodeState {
        let list = self.tree.lists.get(b);
        self.ops += list.len() as u64;
        merge_state(state, list, self.c)
    }

    /// Final targets after the last element `b`: everything already at `c`
    /// plus those one short that also appear in `L[b]`.
    fn probe(&mut self, state: &NodeState, b: ValueId) -> NodeState {
        let list = self.tree.lists.get(b);
        let near: Vec<ValueId> = state
            .iter()
            .filter(|&&(_, n)| n + 1 == self.c)
            .map(|e| e.0)
            .collect();
        self.ops += near.len().min(list.len()) as u64;
        state
            .iter()
            .filter(|&&(t, n)| n >= self.c || (n + 1 == self.c && list.binary_search(&t).is_ok()))
            .map(|&(t, _)| (t, self.c))
            .collect()
    }

    fn emit(&mut self, queries: &[usize], state: &NodeState) {
        for &q in queries {
            for &(t, n) in state {
                if n >= self.c {
                    self.pairs.push((q as ValueId, t));
                }
            }
        }
    }

    fn visit(&mut self, node: usize, state: &NodeState, depth: usize) {
        let tree = self.tree;
        self.emit(&tree.nodes[node].ends, state);
        if depth == self.cap {
            let mut below = Vec::new();
            for &(_, child) in &tree.nodes[node].children {
                collect_ends(tree, child, &mut below);
            }
            for q in below {
                let suffix = &tree.paths[q][depth..];
                let mut st = state.clone();
                for (i, &b) in suffix.iter().enumerate() {
                    st = if i + 1 == suffix.len() && self.c >= 2 {
                        self.probe(&st, b)
                    } else {
                        self.merge(&st, b)
                    };
                }
                self.emit(&[q], &st);
            }
            return;
        }
        for &(b, child) in &tree.nodes[node].children {
            let leaf = tree.nodes[child].children.is_empty();
            if leaf && self.c >= 2 {
                let st = self.probe(state, b);
                self.emit(&tree.nodes[child].ends, &st);
            } else {
                let st = self.merge(state, b);
                self.visit(child, &st, depth + 1);
            }
        }
    }
}

fn collect_ends(tree: &PrefixTree<'_>, node: usize, out: &mut Vec<usize>) {
    out.extend_from_slice(&tree.nodes[node].ends);
    for &(_, child) in &tree.nodes[node].children {
        collect_ends(tree, child, out);
    }
}

/// Two sets and their overlap, `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SimilarPair {
    pub a: ValueId,
    pub b: ValueId,
    pub overlap: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsjMethod {
    MmJoin,
    SizeAware,
    SizeAwarePp,
}

impl std::str::FromStr for SsjMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mmjoin" => Ok(SsjMethod::MmJoin),
            "sizeaware" => Ok(SsjMethod::SizeAware),
            "sizeaware++" | "sizeawarepp" => Ok(SsjMethod::SizeAwarePp),
            other => Err(Error::InvalidPlan(format!("unknown ssj method {other:?}"))),
        }
    }
}

/// Default depth up to which prefix-tree nodes are shared.
pub const DEFAULT_PREFIX_CAP: usize = 8;

/// Default cap on enumerated `c`-subsets.
pub const DEFAULT_SUBSET_CAP: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct SsjConfig {
    pub planner: Planner,
    pub join: JoinOptions,
    /// Shared prefix-tree depth; 0 disables the prefix tree.
    pub prefix_cap: usize,
    pub subset_cap: usize,
}

impl Default for SsjConfig {
    fn default() -> Self {
        SsjConfig {
            planner: Planner::default(),
            join: JoinOptions::default(),
            prefix_cap: DEFAULT_PREFIX_CAP,
            subset_cap: DEFAULT_SUBSET_CAP,
        }
    }
}

pub fn ssj(family: &SetFamily, c: u32, method: SsjMethod, cfg: &SsjConfig) -> Result<Vec<SimilarPair>> {
    match method {
        SsjMethod::MmJoin => ssj_mmjoin(family, c, cfg),
        SsjMethod::SizeAware => ssj_size_aware(family, c, cfg),
        SsjMethod::SizeAwarePp => ssj_size_aware_pp(family, c, cfg),
    }
}

/// Joined pairs `(a, b, count)` with `count ≥ c`, oriented `a < b` and
/// deduplicated.
fn mm_pairs(
    r: &IndexedRelation,
    s: &IndexedRelation,
    c: u32,
    cfg: &SsjConfig,
) -> Result<Vec<SimilarPair>> {
    let plan = cfg.planner.plan(r, s)?;
    let out = two_path_join_with(r, s, &plan, true, &cfg.join)?;
    let counts = out.counts().expect("counts requested");
    let mut pairs: Vec<SimilarPair> = out
        .iter()
        .zip(counts)
        .filter(|&(t, &n)| n >= c && t[0] != t[1])
        .map(|(t, &n)| SimilarPair {
            a: t[0].min(t[1]),
            b: t[0].max(t[1]),
            overlap: n,
        })
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    Ok(pairs)
}

/// Overlap self-join computed as a join-project with counts.
pub fn ssj_mmjoin(family: &SetFamily, c: u32, cfg: &SsjConfig) -> Result<Vec<SimilarPair>> {
    let r = IndexedRelation::build(family.to_relation());
    mm_pairs(&r, &r, c.max(1), cfg)
}

/// [`ssj_mmjoin`] ordered by overlap descending, then by pair.
pub fn ssj_ordered(family: &SetFamily, c: u32, cfg: &SsjConfig) -> Result<Vec<SimilarPair>> {
    let mut pairs = ssj_mmjoin(family, c, cfg)?;
    sort_by_overlap(&mut pairs);
    Ok(pairs)
}

pub fn sort_by_overlap(pairs: &mut [SimilarPair]) {
    pairs.sort_unstable_by(|x, y| y.overlap.cmp(&x.overlap).then((x.a, x.b).cmp(&(y.a, y.b))));
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Size boundary `x`: sets of size at most `x` are light. Chosen to
/// minimise heavy merge cost plus light `c`-subset count; ties go to the
/// smallest `x`.
pub fn get_size_boundary(family: &SetFamily, c: u32) -> usize {
    let mut sizes: Vec<usize> = family.iter().map(<[_]>::len).filter(|&l| l > 0).collect();
    sizes.sort_unstable();
    let n = sizes.len();
    let mut prefix = vec![0f64; n + 1];
    for (i, &s) in sizes.iter().enumerate() {
        prefix[i + 1] = prefix[i] + s as f64;
    }
    // Σ_r min(|r|, t)
    let merge_cost = |t: usize| {
        let k = sizes.partition_point(|&s| s <= t);
        prefix[k] + (n - k) as f64 * t as f64
    };
    let heavy_total: Vec<f64> = {
        // suffix sums of merge_cost over sets larger than a candidate
        let mut v = vec![0f64; n + 1];
        for i in (0..n).rev() {
            v[i] = v[i + 1] + merge_cost(sizes[i]);
        }
        v
    };
    let mut candidates: Vec<usize> = vec![0];
    candidates.extend(sizes.iter().copied());
    candidates.dedup();

    let mut best = (f64::INFINITY, 0);
    let mut light = 0f64;
    let mut k = 0;
    for &x in &candidates {
        while k < n && sizes[k] <= x {
            light += binomial(sizes[k], c as usize);
            k += 1;
        }
        let cost = heavy_total[k] + light;
        if cost < best.0 {
            best = (cost, x);
        }
    }
    best.1
}

fn for_each_subset(set: &[ValueId], c: usize, mut f: impl FnMut(&[ValueId])) {
    if c == 0 || c > set.len() {
        return;
    }
    let mut idx: Vec<usize> = (0..c).collect();
    let mut buf = vec![0; c];
    loop {
        for (slot, &i) in buf.iter_mut().zip(&idx) {
            *slot = set[i];
        }
        f(&buf);
        let mut i = c;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < set.len() - c + i {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..c {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Pairs among `ids` sharing a `c`-subset, with exact overlaps.
fn subset_pairs(family: &SetFamily, ids: &[usize], c: u32, cap: usize) -> Result<Vec<SimilarPair>> {
    let c = c.max(1) as usize;
    let total: f64 = ids.iter().map(|&i| binomial(family.set(i).len(), c)).sum();
    if total > cap as f64 {
        return Err(Error::ResourceLimit(format!(
            "{total:.0} c-subsets exceed the cap of {cap}"
        )));
    }
    let mut keyed: Vec<(Vec<ValueId>, ValueId)> = Vec::with_capacity(total as usize);
    for &i in ids {
        for_each_subset(family.set(i), c, |sub| keyed.push((sub.to_vec(), i as ValueId)));
    }
    keyed.sort_unstable();
    let mut cands = Vec::new();
    let mut start = 0;
    while start < keyed.len() {
        let mut end = start + 1;
        while end < keyed.len() && keyed[end].0 == keyed[start].0 {
            end += 1;
        }
        for x in start..end {
            for y in x + 1..end {
                cands.push((keyed[x].1, keyed[y].1));
            }
        }
        start = end;
    }
    cands.sort_unstable();
    cands.dedup();
    Ok(cands
        .into_iter()
        .map(|(a, b)| SimilarPair {
            a,
            b,
            overlap: overlap(family.set(a as usize), family.set(b as usize)),
        })
        .collect())
}

fn heavy_light_ids(family: &SetFamily, x: usize) -> (Vec<usize>, Vec<usize>) {
    (0..family.len())
        .filter(|&i| !family.set(i).is_empty())
        .partition(|&i| family.set(i).len() > x)
}

/// Size-aware overlap join: heavy sets merged against every set, light
/// pairs found through shared `c`-subsets (or a join-project over the light
/// sets when there are too many subsets).
pub fn ssj_size_aware(family: &SetFamily, c: u32, cfg: &SsjConfig) -> Result<Vec<SimilarPair>> {
    let c = c.max(1);
    let x = get_size_boundary(family, c);
    let (heavy, light) = heavy_light_ids(family, x);

    let mut pairs = Vec::new();
    let mut mark = vec![false; family.universe()];
    let is_heavy = |i: usize| family.set(i).len() > x;
    for &h in &heavy {
        for &b in family.set(h) {
            mark[b as usize] = true;
        }
        for (r, set) in family.iter().enumerate() {
            if r == h || (is_heavy(r) && r < h) {
                continue;
            }
            let n = set.iter().filter(|&&b| mark[b as usize]).count() as u32;
            if n >= c {
                pairs.push(SimilarPair {
                    a: h.min(r) as ValueId,
                    b: h.max(r) as ValueId,
                    overlap: n,
                });
            }
        }
        for &b in family.set(h) {
            mark[b as usize] = false;
        }
    }
    match subset_pairs(family, &light, c, cfg.subset_cap) {
        Ok(p) => pairs.extend(p),
        Err(Error::ResourceLimit(_)) => {
            let lr = IndexedRelation::build(family.relation_where(|i| !is_heavy(i)));
            pairs.extend(mm_pairs(&lr, &lr, c, cfg)?);
        }
        Err(e) => return Err(e),
    }
    pairs.sort_unstable();
    pairs.dedup();
    Ok(pairs)
}

/// Size-aware join with the heavy part and, when the light join is large,
/// the light part evaluated as join-projects (or through the prefix tree).
pub fn ssj_size_aware_pp(family: &SetFamily, c: u32, cfg: &SsjConfig) -> Result<Vec<SimilarPair>> {
    let c = c.max(1);
    let x = get_size_boundary(family, c);
    let (heavy, light) = heavy_light_ids(family, x);
    let is_heavy = |i: usize| family.set(i).len() > x;

    let mut pairs = Vec::new();
    if !heavy.is_empty() {
        let all = IndexedRelation::build(family.to_relation());
        let hv = IndexedRelation::build(family.relation_where(is_heavy));
        pairs.extend(mm_pairs(&all, &hv, c, cfg)?);
    }
    if !light.is_empty() {
        let lr = IndexedRelation::build(family.relation_where(|i| !is_heavy(i)));
        let j = lr.join_size_with(&lr);
        let n = lr.len() as u64;
        let est = estimate_output_size(lr.left_domain() as u64, lr.left_domain() as u64, j, n.max(1));
        let via_subsets = if j <= est.estimate {
            subset_pairs(family, &light, c, cfg.subset_cap).ok()
        } else {
            None
        };
        match via_subsets {
            Some(p) => pairs.extend(p),
            None if cfg.prefix_cap > 0 => {
                let queries = SetFamily::from_sets(
                    (0..family.len()).map(|i| if is_heavy(i) { Vec::new() } else { family.set(i).to_vec() }),
                );
                let lists = InvertedLists::build_where(family, |i| !is_heavy(i));
                let found = PrefixTree::build(&queries, &lists).evaluate(c, cfg.prefix_cap);
                pairs.extend(found.pairs.into_iter().filter(|&(q, t)| q < t).map(|(a, b)| SimilarPair {
                    a,
                    b,
                    overlap: overlap(family.set(a as usize), family.set(b as usize)),
                }));
            }
            None => pairs.extend(mm_pairs(&lr, &lr, c, cfg)?),
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    Ok(pairs)
}

/// Ordered pairs `(a, b)`, `a ≠ b`, with `a ⊆ b`.
pub fn scj_join_project(family: &SetFamily, cfg: &SsjConfig) -> Result<Vec<(ValueId, ValueId)>> {
    let r = IndexedRelation::build(family.to_relation());
    let plan = cfg.planner.plan(&r, &r)?;
    let out = two_path_join_with(&r, &r, &plan, true, &cfg.join)?;
    let counts = out.counts().expect("counts requested");
    Ok(out
        .iter()
        .zip(counts)
        .filter(|&(t, &n)| t[0] != t[1] && n as usize == family.set(t[0] as usize).len())
        .map(|(t, _)| (t[0], t[1]))
        .collect())
}

/// Batch size `⌈(B·N)^{3/5}⌉` for arrival rate `B` and input size `N`.
pub fn bsi_batch_size(rate: f64, n: usize) -> usize {
    ((rate * n as f64).powf(0.6) - 1e-9).ceil().max(1.0) as usize
}

/// Answer "do set `a` of `R` and set `b` of `S` intersect?" for a batch.
/// Ids without tuples yield `None`.
pub fn bsi_answer_batch(
    r: &IndexedRelation,
    s: &IndexedRelation,
    queries: &[(ValueId, ValueId)],
    planner: &Planner,
    opts: &JoinOptions,
) -> Result<Vec<Option<bool>>> {
    let mut want_a = vec![false; r.left_capacity()];
    let mut want_b = vec![false; s.left_capacity()];
    for &(a, b) in queries {
        if let Some(w) = want_a.get_mut(a as usize) {
            *w = true;
        }
        if let Some(w) = want_b.get_mut(b as usize) {
            *w = true;
        }
    }
    let rb = IndexedRelation::build(r.base().filter(|a, _| want_a[a as usize]));
    let sb = IndexedRelation::build(s.base().filter(|b, _| want_b[b as usize]));
    let plan = planner.plan(&rb, &sb)?;
    let out = two_path_join_with(&rb, &sb, &plan, false, opts)?;
    Ok(queries
        .iter()
        .map(|&(a, b)| {
            (r.left_degree(a) > 0 && s.left_degree(b) > 0).then(|| out.contains(&[a, b]))
        })
        .collect())
}

/// One line of a query workload: `a b arrival_micros`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BsiQuery {
    pub a: String,
    pub b: String,
    pub arrival_micros: u64,
}

pub fn parse_bsi_workload<R: BufRead>(src: R) -> Result<Vec<BsiQuery>> {
    let mut out = Vec::new();
    for (i, line) in src.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = |msg: &str| Error::Parse {
            line: i + 1,
            msg: msg.to_owned(),
        };
        if fields.len() != 3 {
            return Err(bad("expected `a b arrival_micros`"));
        }
        let arrival_micros = fields[2].parse().map_err(|_| bad("arrival is not an integer"))?;
        out.push(BsiQuery {
            a: fields[0].to_owned(),
            b: fields[1].to_owned(),
            arrival_micros,
        });
    }
    Ok(out)
}

/// Evenly spaced arrivals at `rate` queries per second.
pub fn uniform_arrivals(rate: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| i as f64 / rate).collect()
}

/// Batch cost `scale · N · C^{1/3}` seconds.
pub fn analytic_batch_cost(n: usize, scale: f64) -> impl Fn(usize) -> f64 {
    move |c| scale * n as f64 * (c as f64).cbrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsiReport {
    pub batch_size: usize,
    pub batches: usize,
    /// Mean of completion minus arrival, seconds.
    pub mean_delay: f64,
    pub max_delay: f64,
    /// `B·T(C)/C`: processing units needed to keep up.
    pub parallel_units: f64,
}

/// Simulate batched answering: queries are grouped in arrival order into
/// batches of `batch`, a batch is ready when its last query arrives, and
/// batches run FIFO on `machines` identical units taking `cost(size)`
/// seconds each.
pub fn bsi_simulate(
    arrivals: &[f64],
    batch: usize,
    machines: usize,
    cost: impl Fn(usize) -> f64,
) -> Result<BsiReport> {
    if batch == 0 || machines == 0 {
        return Err(Error::InvalidPlan("batch size and machines must be positive".into()));
    }
    if arrivals.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidPlan("arrivals must be non-decreasing".into()));
    }
    let mut free: VecDeque<f64> = std::iter::repeat(0.0).take(machines).collect();
    let (mut total, mut max, mut batches) = (0.0, 0.0f64, 0);
    for chunk in arrivals.chunks(batch) {
        let ready = *chunk.last().expect("non-empty chunk");
        let unit = free.pop_front().expect("machines > 0");
        let done = ready.max(unit) + cost(chunk.len());
        // keep units ordered by the time they become free
        let pos = free.partition_point(|&t| t <= done);
        free.insert(pos, done);
        for &t in chunk {
            total += done - t;
            max = max.max(done - t);
        }
        batches += 1;
    }
    let n = arrivals.len();
    let rate = match (arrivals.first(), arrivals.last()) {
        (Some(&f), Some(&l)) if l > f => (n - 1) as f64 / (l - f),
        _ => 0.0,
    };
    Ok(BsiReport {
        batch_size: batch,
        batches,
        mean_delay: if n == 0 { 0.0 } else { total / n as f64 },
        max_delay: max,
        parallel_units: rate * cost(batch) / batch as f64,
    })
}
