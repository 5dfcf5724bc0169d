//! Exact count-matrix multiplication.
//!
//! Entries are `u32` witness counts. The kernel is a cubic `i-k-j` loop,
//! optionally tiled over `k` and `j`, with output rows split across a rayon
//! pool. Integer arithmetic over disjoint output rows makes every path
//! bit-identical regardless of tiling or thread count.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::relation::ValueId;

/// Row or column labels. Each label is `arity` consecutive ids, so star
/// queries can key a row by a tuple of heavy values.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyMap {
    arity: usize,
    flat: Vec<ValueId>,
}

impl KeyMap {
    pub fn new(arity: usize) -> Self {
        KeyMap { arity, flat: Vec::new() }
    }

    pub fn from_ids(ids: Vec<ValueId>) -> Self {
        KeyMap { arity: 1, flat: ids }
    }

    /// Unlabelled `0..n`.
    pub fn range(n: usize) -> Self {
        KeyMap::from_ids((0..n as ValueId).collect())
    }

    pub fn push(&mut self, key: &[ValueId]) {
        debug_assert_eq!(key.len(), self.arity);
        self.flat.extend_from_slice(key);
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        if self.arity == 0 {
            0
        } else {
            self.flat.len() / self.arity
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> &[ValueId] {
        &self.flat[i * self.arity..(i + 1) * self.arity]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[ValueId]> {
        self.flat.chunks_exact(self.arity.max(1))
    }
}

/// Dense row-major matrix of witness counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u32>,
    pub row_keys: KeyMap,
    pub col_keys: KeyMap,
}

impl CountMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CountMatrix {
            rows,
            cols,
            data: vec![0; rows * cols],
            row_keys: KeyMap::range(rows),
            col_keys: KeyMap::range(cols),
        }
    }

    pub fn with_keys(row_keys: KeyMap, col_keys: KeyMap) -> Self {
        let (rows, cols) = (row_keys.len(), col_keys.len());
        CountMatrix {
            rows,
            cols,
            data: vec![0; rows * cols],
            row_keys,
            col_keys,
        }
    }

    pub fn from_rows(rows: &[Vec<u32>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut m = CountMatrix::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            m.data[i * c..(i + 1) * c].copy_from_slice(row);
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CountMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    /// Square matrix with entries drawn uniformly from `0..=max_entry`.
    pub fn random(rows: usize, cols: usize, max_entry: u32, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = CountMatrix::zeros(rows, cols);
        for x in &mut m.data {
            *x = rng.gen_range(0..=max_entry);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: u32) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<u32>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn max_entry(&self) -> u32 {
        self.data.iter().copied().max().unwrap_or(0)
    }

    pub fn transpose(&self) -> CountMatrix {
        let mut t = CountMatrix::with_keys(self.col_keys.clone(), self.row_keys.clone());
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    /// Plain `i-k-j` loop.
    Naive,
    /// `k` and `j` tiled so a block of `B` stays in cache.
    Blocked { tile_k: usize, tile_j: usize },
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::Blocked {
            tile_k: 128,
            tile_j: 512,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelOptions {
    pub cores: usize,
    pub kernel: Kernel,
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions {
            cores: 1,
            kernel: Kernel::default(),
        }
    }
}

pub fn multiply_counts(a: &CountMatrix, b: &CountMatrix) -> Result<CountMatrix> {
    multiply_counts_with(a, b, &KernelOptions::default())
}

pub fn multiply_counts_with(a: &CountMatrix, b: &CountMatrix, opts: &KernelOptions) -> Result<CountMatrix> {
    if a.cols != b.rows {
        return Err(Error::DimensionMismatch {
            left_rows: a.rows,
            left_cols: a.cols,
            right_rows: b.rows,
            right_cols: b.cols,
        });
    }
    let (u, v, w) = (a.rows, a.cols, b.cols);
    let mut out = CountMatrix::with_keys(a.row_keys.clone(), b.col_keys.clone());
    if u == 0 || w == 0 || v == 0 {
        return Ok(out);
    }
    let bound = v as u128 * a.max_entry() as u128 * b.max_entry() as u128;
    if bound <= u32::MAX as u128 {
        run_rows(&mut out.data, w, opts, |rows, chunk| {
            kernel_rows(&a.data, &b.data, chunk, rows, v, w, opts.kernel)
        });
        return Ok(out);
    }

    // Wide path: accumulate in u64 and reject entries that do not fit.
    let mut wide = vec![0u64; u * w];
    run_rows(&mut wide, w, opts, |rows, chunk| {
        kernel_rows(&a.data, &b.data, chunk, rows, v, w, opts.kernel)
    });
    for (dst, &src) in out.data.iter_mut().zip(&wide) {
        *dst = u32::try_from(src).map_err(|_| Error::Overflow)?;
    }
    Ok(out)
}

fn run_rows<T, F>(out: &mut [T], w: usize, opts: &KernelOptions, f: F)
where
    T: Send,
    F: Fn(std::ops::Range<usize>, &mut [T]) + Sync,
{
    let u = out.len() / w;
    if opts.cores <= 1 || u < 2 {
        f(0..u, out);
        return;
    }
    let chunk_rows = u.div_ceil(opts.cores * 4).max(1);
    let mut job = || {
        out.par_chunks_mut(chunk_rows * w)
            .enumerate()
            .for_each(|(ci, chunk)| {
                let start = ci * chunk_rows;
                f(start..start + chunk.len() / w, chunk)
            })
    };
    match rayon::ThreadPoolBuilder::new().num_threads(opts.cores).build() {
        Ok(pool) => pool.install(job),
        Err(_) => job(),
    }
}

trait Acc: Copy + Send {
    fn mul_add(self, a: u32, b: u32) -> Self;
}

impl Acc for u32 {
    #[inline(always)]
    fn mul_add(self, a: u32, b: u32) -> Self {
        self.wrapping_add(a.wrapping_mul(b))
    }
}

impl Acc for u64 {
    #[inline(always)]
    fn mul_add(self, a: u32, b: u32) -> Self {
        self + a as u64 * b as u64
    }
}

/// Compute output rows `rows` of `A·B` into `out` (which holds exactly
/// those rows).
fn kernel_rows<T: Acc>(
    a: &[u32],
    b: &[u32],
    out: &mut [T],
    rows: std::ops::Range<usize>,
    v: usize,
    w: usize,
    kernel: Kernel,
) {
    let (tile_k, tile_j) = match kernel {
        Kernel::Naive => (v, w),
        Kernel::Blocked { tile_k, tile_j } => (tile_k.max(1), tile_j.max(1)),
    };
    let first = rows.start;
    for kk in (0..v).step_by(tile_k) {
        let k_end = (kk + tile_k).min(v);
        for jj in (0..w).step_by(tile_j) {
            let j_end = (jj + tile_j).min(w);
            for i in rows.clone() {
                let a_row = &a[i * v..(i + 1) * v];
                let local = i - first;
                let o_row = &mut out[local * w + jj..local * w + j_end];
                for (k, &x) in a_row.iter().enumerate().take(k_end).skip(kk) {
                    if x == 0 {
                        continue;
                    }
                    let b_row = &b[k * w + jj..k * w + j_end];
                    for (o, &y) in o_row.iter_mut().zip(b_row) {
                        *o = o.mul_add(x, y);
                    }
                }
            }
        }
    }
}

/// `U·V·W·β^(ω−3)` with `β = min(U, V, W)`.
pub fn theoretical_cost(u: usize, v: usize, w: usize, omega: f64) -> f64 {
    let beta = u.min(v).min(w) as f64;
    u as f64 * v as f64 * w as f64 * beta.powf(omega - 3.0)
}

/// Measured multiply times at square probe dimensions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CalibrationTable {
    entries: BTreeMap<(usize, usize), f64>,
}

#[derive(Debug, Clone)]
pub struct CalibrationConfig {
    pub probe_dims: Vec<usize>,
    pub cores: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
    /// Upper bound on the bytes held by the three probe matrices.
    pub memory_budget: usize,
}

impl Default for CalibrationConfig {
    /// Twenty probe dimensions in steps of 32 and one to five cores.
    fn default() -> Self {
        CalibrationConfig {
            probe_dims: (1..=20).map(|i| i * 32).collect(),
            cores: (1..=5).collect(),
            runs: 3,
            seed: 0x5eed,
            memory_budget: 1 << 30,
        }
    }
}

const TSV_HEADER: &str = "# mmjoin calibration v1";

impl CalibrationTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Table generated from a flat per-multiply-add cost, split evenly
    /// across cores. Useful for reproducible planning without measuring.
    pub fn modeled(nanos_per_op: f64, probe_dims: &[usize], cores: &[usize]) -> Self {
        let mut t = CalibrationTable::new();
        for &p in probe_dims {
            for &co in cores {
                let ops = (p as f64).powi(3);
                t.insert(p, co, ops * nanos_per_op / co.max(1) as f64);
            }
        }
        t
    }

    pub fn insert(&mut self, p: usize, co: usize, nanos: f64) {
        self.entries.insert((p, co), nanos);
    }

    pub fn get(&self, p: usize, co: usize) -> Option<f64> {
        self.entries.get(&(p, co)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().map(|(&(p, co), &t)| (p, co, t))
    }

    /// Force times to be nondecreasing in `p` for every core count.
    pub fn regularize(&mut self) {
        let cores: Vec<usize> = self.entries.keys().map(|&(_, co)| co).collect();
        for co in cores {
            let mut running = 0.0f64;
            for ((_, c), t) in self.entries.iter_mut() {
                if *c != co {
                    continue;
                }
                running = running.max(*t);
                *t = running;
            }
        }
    }

    /// Time for a `u×v` by `v×w` product on `co` cores, scaled by volume
    /// from the probe nearest to `(u·v·w)^(1/3)` and the nearest core count.
    pub fn estimate_runtime(&self, u: usize, v: usize, w: usize, co: usize) -> Result<f64> {
        if self.entries.is_empty() {
            return Err(Error::EmptyCalibration);
        }
        if u == 0 || v == 0 || w == 0 {
            return Ok(0.0);
        }
        let volume = u as f64 * v as f64 * w as f64;
        let side = volume.cbrt();
        let co_near = self
            .entries
            .keys()
            .map(|&(_, c)| c)
            .min_by_key(|&c| (c.abs_diff(co), c))
            .expect("non-empty");
        let (p, t) = self
            .entries
            .iter()
            .filter(|((_, c), _)| *c == co_near)
            .map(|(&(p, _), &t)| (p, t))
            .min_by(|x, y| {
                let dx = (x.0 as f64 - side).abs();
                let dy = (y.0 as f64 - side).abs();
                dx.total_cmp(&dy).then(x.0.cmp(&y.0))
            })
            .expect("non-empty");
        Ok(t * volume / (p as f64).powi(3))
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{TSV_HEADER}")?;
        for (p, co, t) in self.entries() {
            writeln!(out, "{p}\t{co}\t{}", t.round() as u64)?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(src: R) -> Result<Self> {
        let mut table = CalibrationTable::new();
        let mut saw_header = false;
        for (idx, line) in src.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if idx == 0 {
                if line != TSV_HEADER {
                    return Err(Error::Parse {
                        line: 1,
                        msg: format!("expected {TSV_HEADER:?}"),
                    });
                }
                saw_header = true;
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let parse_err = |msg: &str| Error::Parse {
                line: idx + 1,
                msg: msg.to_owned(),
            };
            if fields.len() != 3 {
                return Err(parse_err("expected `p<TAB>co<TAB>nanos`"));
            }
            let p = fields[0].parse().map_err(|_| parse_err("bad p"))?;
            let co = fields[1].parse().map_err(|_| parse_err("bad co"))?;
            let t: u64 = fields[2].parse().map_err(|_| parse_err("bad nanos"))?;
            table.insert(p, co, t as f64);
        }
        if !saw_header {
            return Err(Error::Parse {
                line: 1,
                msg: "empty calibration file".into(),
            });
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_tsv(std::io::BufWriter::new(file))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_tsv(std::io::BufReader::new(file))
    }
}

/// Time `multiply_counts` on random 0/1 square matrices at each probe
/// dimension and core count; each entry is the median of `runs` timings.
pub fn calibrate(config: &CalibrationConfig) -> Result<CalibrationTable> {
    let mut table = CalibrationTable::new();
    for &p in &config.probe_dims {
        let bytes = 3usize.saturating_mul(p).saturating_mul(p).saturating_mul(4);
        if bytes > config.memory_budget {
            return Err(Error::Calibration(format!(
                "probe dimension {p} needs {bytes} bytes, budget is {}",
                config.memory_budget
            )));
        }
        let mut probe = Vec::<u32>::new();
        probe
            .try_reserve_exact(p * p)
            .map_err(|e| Error::Calibration(format!("allocation for p={p}: {e}")))?;
        drop(probe);
        let a = CountMatrix::random(p, p, 1, config.seed ^ p as u64);
        let b = CountMatrix::random(p, p, 1, config.seed.rotate_left(17) ^ p as u64);
        for &co in &config.cores {
            let opts = KernelOptions {
                cores: co,
                kernel: Kernel::default(),
            };
            let mut samples = Vec::with_capacity(config.runs.max(1));
            for _ in 0..config.runs.max(1) {
                let start = Instant::now();
                let m = multiply_counts_with(&a, &b, &opts)?;
                std::hint::black_box(&m);
                samples.push(start.elapsed().as_nanos() as f64);
            }
            samples.sort_by(f64::total_cmp);
            table.insert(p, co, samples[samples.len() / 2]);
        }
    }
    table.regularize();
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference(a: &CountMatrix, b: &CountMatrix) -> Vec<Vec<u64>> {
        (0..a.rows())
            .map(|i| {
                (0..b.cols())
                    .map(|j| (0..a.cols()).map(|k| a.get(i, k) as u64 * b.get(k, j) as u64).sum())
                    .collect()
            })
            .collect()
    }

    #[test]
    fn example_product() {
        let m1 = CountMatrix::from_rows(&[vec![1, 0, 1], vec![1, 1, 1], vec![1, 1, 0]]);
        let m2 = CountMatrix::from_rows(&[vec![1, 1, 0], vec![1, 1, 1], vec![0, 1, 1]]);
        let m = multiply_counts(&m1, &m2).unwrap();
        assert_eq!(m.to_rows(), vec![vec![1, 2, 1], vec![2, 3, 2], vec![2, 2, 1]]);
    }

    #[test]
    fn identity_is_neutral() {
        let a = CountMatrix::random(4, 6, 5, 1);
        assert_eq!(multiply_counts(&CountMatrix::identity(4), &a).unwrap().to_rows(), a.to_rows());
    }

    #[test]
    fn small_random_matches_reference() {
        let a = CountMatrix::random(7, 5, 2, 10);
        let b = CountMatrix::random(5, 3, 2, 11);
        let m = multiply_counts(&a, &b).unwrap();
        let r = reference(&a, &b);
        for i in 0..7 {
            for j in 0..3 {
                assert_eq!(m.get(i, j) as u64, r[i][j]);
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let a = CountMatrix::zeros(2, 3);
        let b = CountMatrix::zeros(4, 2);
        assert!(matches!(multiply_counts(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn overflow_detected() {
        let mut a = CountMatrix::zeros(1, 2);
        a.set(0, 0, u32::MAX);
        a.set(0, 1, 1);
        let mut b = CountMatrix::zeros(2, 1);
        b.set(0, 0, 1);
        b.set(1, 0, 1);
        assert!(matches!(multiply_counts(&a, &b), Err(Error::Overflow)));

        // large entries whose product still fits go through the wide path
        let mut a = CountMatrix::zeros(1, 2);
        a.set(0, 0, 1 << 20);
        let mut b = CountMatrix::zeros(2, 1);
        b.set(0, 0, 1 << 11);
        b.set(1, 0, 1 << 20);
        let m = multiply_counts(&a, &b).unwrap();
        assert_eq!(m.get(0, 0), 1 << 31);
    }

    #[test]
    fn cost_formula() {
        assert_eq!(theoretical_cost(4, 4, 4, 3.0), 64.0);
        assert!((theoretical_cost(100, 10, 100, 2.0) - 10_000.0).abs() < 1e-6);
    }

    #[test]
    fn estimate_from_table() {
        let mut t = CalibrationTable::new();
        t.insert(100, 1, 1_000.0);
        t.insert(400, 1, 64_000.0);
        assert_eq!(t.estimate_runtime(100, 100, 100, 1).unwrap(), 1_000.0);
        // side 200 is nearer to 100 than to 400
        let e = t.estimate_runtime(200, 200, 200, 1).unwrap();
        assert!((e - 8_000.0).abs() < 1e-6);
        let e2 = t.estimate_runtime(110, 110, 110, 1).unwrap();
        let e4 = t.estimate_runtime(220, 220, 220, 1).unwrap();
        assert!((e4 / e2 - 8.0).abs() < 1e-9);
        assert!(CalibrationTable::new().estimate_runtime(1, 1, 1, 1).is_err());
    }

    #[test]
    fn tsv_round_trip() {
        let t = CalibrationTable::modeled(0.5, &[10, 20], &[1, 2]);
        let mut buf = Vec::new();
        t.write_tsv(&mut buf).unwrap();
        let back = CalibrationTable::read_tsv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 4);
        assert_eq!(back.get(20, 2), Some(2000.0));
        assert!(CalibrationTable::read_tsv("10\t1\t5\n".as_bytes()).is_err());
    }

    #[test]
    fn regularize_is_monotone() {
        let mut t = CalibrationTable::new();
        t.insert(10, 1, 50.0);
        t.insert(20, 1, 40.0);
        t.insert(30, 1, 90.0);
        t.regularize();
        assert_eq!(t.get(20, 1), Some(50.0));
        assert_eq!(t.get(30, 1), Some(90.0));
    }
}
