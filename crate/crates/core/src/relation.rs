//! Binary relations over dictionary-encoded values.
//!
//! A [`Relation`] is a deduplicated set of `(left, right)` id pairs together
//! with the dictionaries that map raw tokens to dense ids. Two relations that
//! join on their right column must share the right dictionary; use
//! [`parse_edge_list_with`] to extend an existing dictionary when loading the
//! second side.
//!
//! [`IndexedRelation`] adds forward (`left -> rights`) and reverse
//! (`right -> lefts`) CSR indexes. [`DegreeStats`] holds the sorted degree
//! vectors and prefix sums the optimizer queries by binary search.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type ValueId = u32;

/// Bidirectional map between raw tokens and dense ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dictionary {
    to_id: HashMap<String, ValueId>,
    values: Vec<String>,
}

impl Dictionary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Dictionary where id `i` maps to the token `i.to_string()`.
    pub fn identity(n: usize) -> Self {
        let mut dict = Self::new();
        for i in 0..n {
            dict.encode(&i.to_string());
        }
        dict
    }

    pub fn encode(&mut self, raw: &str) -> ValueId {
        if let Some(&id) = self.to_id.get(raw) {
            return id;
        }
        let id = self.values.len() as ValueId;
        self.values.push(raw.to_owned());
        self.to_id.insert(raw.to_owned(), id);
        id
    }

    pub fn id(&self, raw: &str) -> Option<ValueId> {
        self.to_id.get(raw).copied()
    }

    pub fn value(&self, id: ValueId) -> Option<&str> {
        self.values.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Grow an identity-style dictionary so that every id below `n` is present.
    fn ensure_identity(&mut self, n: usize) {
        while self.values.len() < n {
            let id = self.values.len();
            self.encode(&id.to_string());
        }
    }
}

/// A finalized binary relation: sorted, duplicate-free id pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub name: String,
    tuples: Vec<(ValueId, ValueId)>,
    pub left_dict: Dictionary,
    pub right_dict: Dictionary,
}

impl Relation {
    /// Build from already-encoded pairs. Dictionaries are extended with
    /// identity entries so that every id used is present.
    pub fn from_pairs<I>(name: &str, pairs: I) -> Self
    where
        I: IntoIterator<Item = (ValueId, ValueId)>,
    {
        let tuples: Vec<_> = pairs.into_iter().collect();
        let nl = tuples.iter().map(|&(a, _)| a as usize + 1).max().unwrap_or(0);
        let nr = tuples.iter().map(|&(_, b)| b as usize + 1).max().unwrap_or(0);
        Self::from_pairs_with(name, tuples, Dictionary::identity(nl), Dictionary::identity(nr))
    }

    /// Build from encoded pairs against the given dictionaries.
    pub fn from_pairs_with<I>(name: &str, pairs: I, mut left: Dictionary, mut right: Dictionary) -> Self
    where
        I: IntoIterator<Item = (ValueId, ValueId)>,
    {
        let mut tuples: Vec<_> = pairs.into_iter().collect();
        tuples.sort_unstable();
        tuples.dedup();
        if let Some(max_l) = tuples.iter().map(|&(a, _)| a as usize + 1).max() {
            left.ensure_identity(max_l);
        }
        if let Some(max_r) = tuples.iter().map(|&(_, b)| b as usize + 1).max() {
            right.ensure_identity(max_r);
        }
        Relation {
            name: name.to_owned(),
            tuples,
            left_dict: left,
            right_dict: right,
        }
    }

    pub fn tuples(&self) -> &[(ValueId, ValueId)] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Same dictionaries, different tuple set.
    pub fn with_tuples(&self, tuples: Vec<(ValueId, ValueId)>) -> Relation {
        Relation::from_pairs_with(&self.name, tuples, self.left_dict.clone(), self.right_dict.clone())
    }

    /// Keep the tuples accepted by `keep`.
    pub fn filter(&self, mut keep: impl FnMut(ValueId, ValueId) -> bool) -> Relation {
        let tuples = self.tuples.iter().copied().filter(|&(a, b)| keep(a, b)).collect();
        Relation {
            name: self.name.clone(),
            tuples,
            left_dict: self.left_dict.clone(),
            right_dict: self.right_dict.clone(),
        }
    }
}

/// Parse a whitespace-separated edge list with fresh dictionaries.
pub fn parse_edge_list<R: BufRead>(name: &str, source: R) -> Result<Relation> {
    parse_edge_list_with(name, source, Dictionary::new(), Dictionary::new())
}

/// Parse an edge list, extending the supplied dictionaries.
///
/// Blank lines and lines starting with `#` are skipped. Every other line must
/// hold exactly two tokens.
pub fn parse_edge_list_with<R: BufRead>(
    name: &str,
    source: R,
    mut left: Dictionary,
    mut right: Dictionary,
) -> Result<Relation> {
    let mut tuples = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let (a, b) = match (tokens.next(), tokens.next(), tokens.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: format!("expected two tokens, got {trimmed:?}"),
                })
            }
        };
        tuples.push((left.encode(a), right.encode(b)));
    }
    Ok(Relation::from_pairs_with(name, tuples, left, right))
}

pub fn read_edge_list(path: &Path) -> Result<Relation> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let file = std::fs::File::open(path)?;
    parse_edge_list(&name, std::io::BufReader::new(file))
}

/// Load the two sides of a join so that their right columns share ids.
pub fn read_join_pair(left: &Path, right: &Path) -> Result<(Relation, Relation)> {
    let r = read_edge_list(left)?;
    let name = right
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let file = std::fs::File::open(right)?;
    let s = parse_edge_list_with(
        &name,
        std::io::BufReader::new(file),
        Dictionary::new(),
        r.right_dict.clone(),
    )?;
    Ok((r, s))
}

/// Drop tuples whose right value does not occur in the partner relation.
pub fn semi_join_reduce(r: &Relation, s: &Relation) -> (Relation, Relation) {
    let n = r
        .tuples
        .iter()
        .chain(s.tuples.iter())
        .map(|&(_, b)| b as usize + 1)
        .max()
        .unwrap_or(0);
    let mut in_r = vec![false; n];
    let mut in_s = vec![false; n];
    for &(_, b) in &r.tuples {
        in_r[b as usize] = true;
    }
    for &(_, b) in &s.tuples {
        in_s[b as usize] = true;
    }
    (
        r.filter(|_, b| in_s[b as usize]),
        s.filter(|_, b| in_r[b as usize]),
    )
}

/// Compressed adjacency: `offsets[k]..offsets[k+1]` indexes into `targets`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Csr {
    offsets: Vec<usize>,
    targets: Vec<ValueId>,
}

impl Csr {
    /// `pairs` must be sorted by `(key, target)`.
    fn from_sorted(n: usize, pairs: impl Iterator<Item = (ValueId, ValueId)>) -> Self {
        let mut offsets = vec![0usize; n + 1];
        let mut targets = Vec::new();
        for (k, t) in pairs {
            offsets[k as usize + 1] += 1;
            targets.push(t);
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        Csr { offsets, targets }
    }

    pub fn get(&self, key: ValueId) -> &[ValueId] {
        let k = key as usize;
        if k + 1 >= self.offsets.len() {
            return &[];
        }
        &self.targets[self.offsets[k]..self.offsets[k + 1]]
    }

    pub fn degree(&self, key: ValueId) -> usize {
        let k = key as usize;
        if k + 1 >= self.offsets.len() {
            return 0;
        }
        self.offsets[k + 1] - self.offsets[k]
    }

    /// Number of key slots (including keys of degree zero).
    pub fn keys(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }
}

/// A relation with forward and reverse sorted adjacency indexes.
#[derive(Debug, Clone)]
pub struct IndexedRelation {
    base: Relation,
    fwd: Csr,
    rev: Csr,
    left_active: usize,
    right_active: usize,
}

impl IndexedRelation {
    pub fn build(base: Relation) -> Self {
        let nl = base.left_dict.len();
        let nr = base.right_dict.len();
        // tuples are sorted by (left, right)
        let fwd = Csr::from_sorted(nl, base.tuples.iter().copied());
        let mut flipped: Vec<_> = base.tuples.iter().map(|&(a, b)| (b, a)).collect();
        flipped.sort_unstable();
        let rev = Csr::from_sorted(nr, flipped.into_iter());
        let left_active = (0..nl as ValueId).filter(|&a| fwd.degree(a) > 0).count();
        let right_active = (0..nr as ValueId).filter(|&b| rev.degree(b) > 0).count();
        IndexedRelation {
            base,
            fwd,
            rev,
            left_active,
            right_active,
        }
    }

    pub fn base(&self) -> &Relation {
        &self.base
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn fwd(&self, left: ValueId) -> &[ValueId] {
        self.fwd.get(left)
    }

    pub fn rev(&self, right: ValueId) -> &[ValueId] {
        self.rev.get(right)
    }

    pub fn left_degree(&self, left: ValueId) -> usize {
        self.fwd.degree(left)
    }

    pub fn right_degree(&self, right: ValueId) -> usize {
        self.rev.degree(right)
    }

    /// Size of the left id space (dictionary length).
    pub fn left_capacity(&self) -> usize {
        self.fwd.keys()
    }

    pub fn right_capacity(&self) -> usize {
        self.rev.keys()
    }

    /// Number of left values with at least one tuple.
    pub fn left_domain(&self) -> usize {
        self.left_active
    }

    pub fn right_domain(&self) -> usize {
        self.right_active
    }

    /// Left ids that have at least one tuple, ascending.
    pub fn left_values(&self) -> impl Iterator<Item = ValueId> + '_ {
        (0..self.left_capacity() as ValueId).filter(move |&a| self.left_degree(a) > 0)
    }

    pub fn right_values(&self) -> impl Iterator<Item = ValueId> + '_ {
        (0..self.right_capacity() as ValueId).filter(move |&b| self.right_degree(b) > 0)
    }

    /// |R ⋈ S| on the shared right column: Σ_b deg_R(b)·deg_S(b).
    pub fn join_size_with(&self, other: &IndexedRelation) -> u64 {
        let n = self.right_capacity().min(other.right_capacity());
        (0..n as ValueId)
            .map(|b| self.right_degree(b) as u64 * other.right_degree(b) as u64)
            .sum()
    }

    /// True when every right value of `self` also occurs in `other` and
    /// vice versa.
    pub fn is_reduced_with(&self, other: &IndexedRelation) -> bool {
        let n = self.right_capacity().max(other.right_capacity());
        (0..n as ValueId).all(|b| (self.right_degree(b) > 0) == (other.right_degree(b) > 0))
    }

    /// Flatten the forward index back into tuples.
    pub fn tuples_from_fwd(&self) -> Vec<(ValueId, ValueId)> {
        let mut out = Vec::with_capacity(self.len());
        for a in 0..self.left_capacity() as ValueId {
            out.extend(self.fwd(a).iter().map(|&b| (a, b)));
        }
        out
    }

    pub fn tuples_from_rev(&self) -> Vec<(ValueId, ValueId)> {
        let mut out = Vec::with_capacity(self.len());
        for b in 0..self.right_capacity() as ValueId {
            out.extend(self.rev(b).iter().map(|&a| (a, b)));
        }
        out.sort_unstable();
        out
    }
}

/// Values sorted by degree with running sums of a per-value weight, so that
/// "sum of weights over values with degree ≤ δ" is one binary search.
#[derive(Debug, Clone, Default)]
struct DegreeIndex {
    degrees: Vec<usize>,
    prefix: Vec<u64>,
}

impl DegreeIndex {
    fn new(mut entries: Vec<(usize, u64)>) -> Self {
        entries.sort_unstable();
        let mut prefix = Vec::with_capacity(entries.len() + 1);
        prefix.push(0u64);
        let mut acc = 0u64;
        for &(_, w) in &entries {
            acc = acc.saturating_add(w);
            prefix.push(acc);
        }
        DegreeIndex {
            degrees: entries.into_iter().map(|(d, _)| d).collect(),
            prefix,
        }
    }

    fn upto(&self, delta: usize) -> u64 {
        let k = self.degrees.partition_point(|&d| d <= delta);
        self.prefix[k]
    }
}

/// Degree distributions of one relation plus the deduplication-effort
/// indexes used by the optimizer.
///
/// The partner relation supplies the inverted lists `L[b]` (its reverse
/// index) that a light expansion walks; for a self-join pass the same
/// relation twice.
#[derive(Debug, Clone, Default)]
pub struct DegreeStats {
    left_degrees: Vec<usize>,
    right_degrees: Vec<usize>,
    left_sum: DegreeIndex,
    right_sum: DegreeIndex,
    right_cdfx: DegreeIndex,
}

impl DegreeStats {
    pub fn build(r: &IndexedRelation, partner: &IndexedRelation) -> Self {
        let mut left_entries = Vec::new();
        for a in r.left_values() {
            let effort: u64 = r.fwd(a).iter().map(|&b| partner.right_degree(b) as u64).sum();
            left_entries.push((r.left_degree(a), effort));
        }
        let mut right_entries = Vec::new();
        let mut cdfx_entries = Vec::new();
        for b in r.right_values() {
            let d = r.right_degree(b);
            right_entries.push((d, d as u64 * partner.right_degree(b) as u64));
            cdfx_entries.push((d, d as u64));
        }
        let mut left_degrees: Vec<_> = left_entries.iter().map(|&(d, _)| d).collect();
        let mut right_degrees: Vec<_> = right_entries.iter().map(|&(d, _)| d).collect();
        left_degrees.sort_unstable();
        right_degrees.sort_unstable();
        DegreeStats {
            left_degrees,
            right_degrees,
            left_sum: DegreeIndex::new(left_entries),
            right_sum: DegreeIndex::new(right_entries),
            right_cdfx: DegreeIndex::new(cdfx_entries),
        }
    }

    /// Sorted left-column degree vector.
    pub fn left_degrees(&self) -> &[usize] {
        &self.left_degrees
    }

    pub fn right_degrees(&self) -> &[usize] {
        &self.right_degrees
    }

    pub fn left_domain(&self) -> usize {
        self.left_degrees.len()
    }

    pub fn right_domain(&self) -> usize {
        self.right_degrees.len()
    }

    /// Number of left values with degree ≤ δ.
    pub fn count_left(&self, delta: usize) -> usize {
        self.left_degrees.partition_point(|&d| d <= delta)
    }

    /// Number of right values with degree ≤ δ.
    pub fn count_right(&self, delta: usize) -> usize {
        self.right_degrees.partition_point(|&d| d <= delta)
    }

    /// Σ over right values b with deg(b) ≤ δ of |rev[b]|.
    pub fn cdfx(&self, delta: usize) -> u64 {
        self.right_cdfx.upto(delta)
    }

    /// Σ over left values a with deg(a) ≤ δ of Σ_{b ∈ fwd[a]} |L[b]|.
    pub fn sum_left(&self, delta: usize) -> u64 {
        self.left_sum.upto(delta)
    }

    /// Σ over right values b with deg(b) ≤ δ of |rev[b]|·|L[b]|; equals
    /// Σ |L[b]|² for a self-join.
    pub fn sum_right(&self, delta: usize) -> u64 {
        self.right_sum.upto(delta)
    }

    /// Number of tuples (sum of left degrees).
    pub fn num_tuples(&self) -> usize {
        self.left_degrees.iter().sum()
    }

    pub fn max_left_degree(&self) -> usize {
        self.left_degrees.last().copied().unwrap_or(0)
    }

    pub fn max_right_degree(&self) -> usize {
        self.right_degrees.last().copied().unwrap_or(0)
    }
}

/// Self-join statistics.
pub fn degree_stats(r: &IndexedRelation) -> DegreeStats {
    DegreeStats::build(r, r)
}

/// Nodes split into `num_communities` contiguous blocks; every ordered pair
/// `(u, v)` inside a block (self-pairs included) is an edge with probability
/// `intra_edge_prob`.
pub fn generate_community_graph(
    num_nodes: usize,
    num_communities: usize,
    intra_edge_prob: f64,
    seed: u64,
) -> Relation {
    assert!(num_communities >= 1, "need at least one community");
    assert!(
        intra_edge_prob > 0.0 && intra_edge_prob <= 1.0,
        "edge probability must be in (0, 1]"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tuples = Vec::new();
    for c in 0..num_communities {
        let lo = c * num_nodes / num_communities;
        let hi = (c + 1) * num_nodes / num_communities;
        for u in lo..hi {
            for v in lo..hi {
                if intra_edge_prob >= 1.0 || rng.gen::<f64>() < intra_edge_prob {
                    tuples.push((u as ValueId, v as ValueId));
                }
            }
        }
    }
    Relation::from_pairs_with(
        "community",
        tuples,
        Dictionary::identity(num_nodes),
        Dictionary::identity(num_nodes),
    )
}

/// Community graph sized to roughly `target_edges` tuples.
pub fn community_graph_with_edges(
    target_edges: usize,
    num_communities: usize,
    intra_edge_prob: f64,
    seed: u64,
) -> Relation {
    let nodes = ((target_edges as f64 * num_communities as f64 / intra_edge_prob).sqrt()).round() as usize;
    generate_community_graph(nodes.max(num_communities), num_communities, intra_edge_prob, seed)
}

/// `num_tuples` pairs drawn uniformly from `[0, left) × [0, right)`, then
/// deduplicated.
pub fn generate_uniform(left: usize, right: usize, num_tuples: usize, seed: u64) -> Relation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tuples: Vec<_> = (0..num_tuples)
        .map(|_| {
            (
                rng.gen_range(0..left.max(1)) as ValueId,
                rng.gen_range(0..right.max(1)) as ValueId,
            )
        })
        .collect();
    Relation::from_pairs_with(
        "uniform",
        tuples,
        Dictionary::identity(left),
        Dictionary::identity(right),
    )
}

/// Pairs whose right value is drawn from a power law over `[0, right)`,
/// giving a few very heavy right values.
pub fn generate_skewed(left: usize, right: usize, num_tuples: usize, exponent: f64, seed: u64) -> Relation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (1..=right.max(1)).map(|r| (r as f64).powf(-exponent)).collect();
    let total: f64 = weights.iter().sum();
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in &weights {
        acc += w / total;
        cdf.push(acc);
    }
    let tuples: Vec<_> = (0..num_tuples)
        .map(|_| {
            let u: f64 = rng.gen();
            let b = cdf.partition_point(|&c| c < u).min(right.max(1) - 1);
            (rng.gen_range(0..left.max(1)) as ValueId, b as ValueId)
        })
        .collect();
    Relation::from_pairs_with(
        "skewed",
        tuples,
        Dictionary::identity(left),
        Dictionary::identity(right),
    )
}
