//! Threshold selection for the two-path join.
//!
//! Three pieces: an output-size estimate derived from the join size and
//! domain sizes, the closed-form thresholds that minimise the analytic cost
//! under ω = 2, and the practical optimizer that sweeps `Δ1` geometrically
//! downward and prices each candidate with the degree indexes and the
//! calibrated multiply time.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::matmul::CalibrationTable;
use crate::relation::{DegreeStats, IndexedRelation};

/// Joins whose full size is at most this multiple of the input are run as a
/// plain join followed by deduplication.
pub const FULL_JOIN_FACTOR: u64 = 20;

/// Default geometric shrink per sweep iteration (`Δ1 ← 0.95·Δ1`).
pub const DEFAULT_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    FullJoin,
    Partitioned,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::FullJoin => "fulljoin",
            Strategy::Partitioned => "partitioned",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fulljoin" => Ok(Strategy::FullJoin),
            "partitioned" => Ok(Strategy::Partitioned),
            other => Err(Error::InvalidPlan(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdPlan {
    pub strategy: Strategy,
    pub delta1: usize,
    pub delta2: usize,
    pub modeled_light_cost: f64,
    pub modeled_heavy_cost: f64,
    pub iterations: usize,
}

impl ThresholdPlan {
    pub fn partitioned(delta1: usize, delta2: usize) -> Self {
        ThresholdPlan {
            strategy: Strategy::Partitioned,
            delta1,
            delta2,
            modeled_light_cost: 0.0,
            modeled_heavy_cost: 0.0,
            iterations: 0,
        }
    }

    pub fn full_join() -> Self {
        ThresholdPlan {
            strategy: Strategy::FullJoin,
            delta1: 0,
            delta2: 0,
            modeled_light_cost: 0.0,
            modeled_heavy_cost: 0.0,
            iterations: 0,
        }
    }

    pub fn modeled_total(&self) -> f64 {
        self.modeled_light_cost + self.modeled_heavy_cost
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategy == Strategy::Partitioned && (self.delta1 < 1 || self.delta2 < 1) {
            return Err(Error::InvalidPlan(format!(
                "thresholds must be >= 1, got ({}, {})",
                self.delta1, self.delta2
            )));
        }
        Ok(())
    }

    /// `strategy Δ1 Δ2 cost_light cost_heavy iterations`, tab separated.
    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{}\t{}\t{:.0}\t{:.0}\t{}",
            self.strategy,
            self.delta1,
            self.delta2,
            self.modeled_light_cost,
            self.modeled_heavy_cost,
            self.iterations
        )
    }

    pub fn from_tsv(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim().split('\t').collect();
        if f.len() != 6 {
            return Err(Error::InvalidPlan(format!("expected 6 fields, got {}", f.len())));
        }
        let bad = |what: &str| Error::InvalidPlan(format!("bad {what}"));
        Ok(ThresholdPlan {
            strategy: f[0].parse()?,
            delta1: f[1].parse().map_err(|_| bad("delta1"))?,
            delta2: f[2].parse().map_err(|_| bad("delta2"))?,
            modeled_light_cost: f[3].parse().map_err(|_| bad("cost_light"))?,
            modeled_heavy_cost: f[4].parse().map_err(|_| bad("cost_heavy"))?,
            iterations: f[5].parse().map_err(|_| bad("iterations"))?,
        })
    }
}

/// Machine constants in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostConstants {
    /// Sequential access.
    pub t_s: f64,
    /// One small allocation.
    pub t_m: f64,
    /// Random access with insert.
    pub t_i: f64,
    pub cores: usize,
}

impl Default for CostConstants {
    fn default() -> Self {
        CostConstants {
            t_s: 0.5,
            t_m: 20.0,
            t_i: 2.0,
            cores: 1,
        }
    }
}

impl CostConstants {
    /// Micro-benchmark the three constants on this machine.
    pub fn measure(cores: usize) -> Self {
        const N: usize = 1 << 22;
        let data: Vec<u32> = (0..N as u32).collect();

        let start = Instant::now();
        let mut acc = 0u64;
        for &x in &data {
            acc = acc.wrapping_add(x as u64);
        }
        std::hint::black_box(acc);
        let t_s = start.elapsed().as_nanos() as f64 / N as f64;

        const ALLOCS: usize = 1 << 18;
        let start = Instant::now();
        for i in 0..ALLOCS {
            let b = Box::new([i as u64; 4]);
            std::hint::black_box(&b);
        }
        let t_m = start.elapsed().as_nanos() as f64 / ALLOCS as f64;

        let mut slots = vec![0u32; N];
        let mut idx = 12345usize;
        let start = Instant::now();
        for _ in 0..N {
            idx = idx.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            slots[(idx >> 20) % N] += 1;
        }
        std::hint::black_box(&slots);
        let t_i = start.elapsed().as_nanos() as f64 / N as f64;

        CostConstants {
            t_s: t_s.max(1e-3),
            t_m: t_m.max(1e-3),
            t_i: t_i.max(1e-3),
            cores: cores.max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputEstimate {
    pub lower: f64,
    pub upper: f64,
    pub estimate: u64,
}

/// Estimate |OUT| of the two-path query as the geometric mean of
/// `max{|dom x|, (|OUT_⋈|/N)²}` and `min{|dom x|·|dom z|, |OUT_⋈|}`.
pub fn estimate_output_size(dom_x: u64, dom_z: u64, out_join: u64, n: u64) -> OutputEstimate {
    let n = n.max(1) as f64;
    let ratio = out_join as f64 / n;
    let lower = (dom_x as f64).max(ratio * ratio);
    let upper = (dom_x as f64 * dom_z as f64).min(out_join as f64);
    let mut estimate = (lower * upper).sqrt().ceil();
    if upper >= 1.0 {
        estimate = estimate.clamp(1.0, upper.floor());
    }
    OutputEstimate {
        lower,
        upper,
        estimate: estimate.max(0.0) as u64,
    }
}

fn snap_ceil(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-9 * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// Minimiser of `N + N·Δ1 + |OUT|·Δ2 + N²/(Δ2·min(Δ1,Δ2))`.
pub fn closed_form_thresholds(n: u64, out_est: u64) -> (u64, u64) {
    let n_f = n.max(1) as f64;
    let out = out_est.max(1) as f64;
    let clamp = |x: f64| (x as u64).clamp(1, n.max(1));
    if out <= n_f {
        let d1 = snap_ceil(out.cbrt());
        let d2 = snap_ceil(n_f / out.powf(2.0 / 3.0));
        (clamp(d1), clamp(d2))
    } else {
        let d = snap_ceil((2.0 * n_f * n_f / (n_f + out)).cbrt());
        (clamp(d), clamp(d))
    }
}

/// The analytic objective under ω = 2.
pub fn analytic_cost(n: f64, out: f64, d1: f64, d2: f64) -> f64 {
    n + n * d1 + out * d2 + n * n / (d2 * d1.min(d2))
}

/// Geometric downward sweep of `Δ1` from `n`, with `Δ2 = n·Δ1/out_est`.
///
/// Stops at the first candidate whose total cost strictly exceeds the
/// previous one and returns the previous candidate; otherwise returns the
/// `Δ1 = 1` floor. `cost` returns `(light, heavy)`.
pub fn sweep_thresholds<F>(n: usize, out_est: f64, step: f64, mut cost: F) -> Result<ThresholdPlan>
where
    F: FnMut(usize, usize) -> Result<(f64, f64)>,
{
    if !(step > 0.0 && step < 1.0) {
        return Err(Error::InvalidPlan(format!("step must be in (0,1), got {step}")));
    }
    let n = n.max(1);
    let out_est = out_est.max(1.0);
    let delta2_for = |d1: usize| ((n as f64 * d1 as f64 / out_est).round() as usize).clamp(1, n);

    let mut best: Option<ThresholdPlan> = None;
    let mut iterations = 0usize;
    let mut real = n as f64;
    let mut last_d1 = usize::MAX;
    loop {
        let d1 = (real.round() as usize).clamp(1, n);
        if d1 != last_d1 {
            last_d1 = d1;
            let d2 = delta2_for(d1);
            let (light, heavy) = cost(d1, d2)?;
            iterations += 1;
            let candidate = ThresholdPlan {
                strategy: Strategy::Partitioned,
                delta1: d1,
                delta2: d2,
                modeled_light_cost: light,
                modeled_heavy_cost: heavy,
                iterations,
            };
            if let Some(prev) = &best {
                if candidate.modeled_total() > prev.modeled_total() {
                    let mut out = prev.clone();
                    out.iterations = iterations;
                    return Ok(out);
                }
            }
            best = Some(candidate);
        }
        if d1 == 1 {
            break;
        }
        real *= 1.0 - step;
    }
    Ok(best.expect("at least one candidate"))
}

/// Prices a `(Δ1, Δ2)` candidate from degree indexes and the calibration
/// table.
pub struct CostModel<'a> {
    pub stats_r: &'a DegreeStats,
    pub stats_s: &'a DegreeStats,
    pub dom_x: usize,
    pub consts: CostConstants,
    pub table: &'a CalibrationTable,
}

impl CostModel<'_> {
    /// Heavy value counts `(u, v, w)` at the given thresholds.
    pub fn heavy_dims(&self, d1: usize, d2: usize) -> (usize, usize, usize) {
        let u = self.dom_x.saturating_sub(self.stats_r.count_left(d2));
        let v = self.stats_s.right_domain() - self.stats_s.count_right(d1);
        let w = self.stats_s.left_domain() - self.stats_s.count_left(d2);
        (u, v, w)
    }

    pub fn light(&self, d1: usize, d2: usize) -> f64 {
        let c = &self.consts;
        let dom_x = self.dom_x as f64;
        c.t_i * self.stats_s.sum_right(d1) as f64
            + c.t_i * self.stats_r.sum_left(d2) as f64
            + c.t_m * dom_x
            + c.t_s * self.stats_s.cdfx(d1) as f64 * dom_x
    }

    pub fn heavy(&self, d1: usize, d2: usize) -> Result<f64> {
        let (u, v, w) = self.heavy_dims(d1, d2);
        let mm = self.table.estimate_runtime(u, v, w, self.consts.cores)?;
        Ok(mm + self.consts.t_m * (u as f64 * v as f64 + u as f64 * w as f64))
    }

    pub fn total(&self, d1: usize, d2: usize) -> Result<f64> {
        Ok(self.light(d1, d2) + self.heavy(d1, d2)?)
    }
}

/// Pick a strategy and thresholds for `π_{x,z} R(x,y) ⋈ S(z,y)`.
///
/// `stats_r` should be built as `DegreeStats::build(r, s)` and `stats_s` as
/// `DegreeStats::build(s, r)`.
pub fn optimize_thresholds(
    stats_r: &DegreeStats,
    stats_s: &DegreeStats,
    dom_x: usize,
    out_join: u64,
    consts: &CostConstants,
    table: &CalibrationTable,
    step: f64,
) -> Result<ThresholdPlan> {
    if table.is_empty() {
        return Err(Error::EmptyCalibration);
    }
    let n = stats_r.num_tuples().max(stats_s.num_tuples()).max(1);
    if out_join <= FULL_JOIN_FACTOR * n as u64 {
        let mut plan = ThresholdPlan::full_join();
        plan.modeled_light_cost = consts.t_i * out_join as f64;
        return Ok(plan);
    }
    let est = estimate_output_size(
        dom_x as u64,
        stats_s.left_domain() as u64,
        out_join,
        n as u64,
    );
    let model = CostModel {
        stats_r,
        stats_s,
        dom_x,
        consts: *consts,
        table,
    };
    sweep_thresholds(n, est.estimate as f64, step, |d1, d2| {
        Ok((model.light(d1, d2), model.heavy(d1, d2)?))
    })
}

/// Bundles the inputs the optimizer needs so callers can plan a join from
/// two indexed relations.
#[derive(Debug, Clone)]
pub struct Planner {
    pub consts: CostConstants,
    pub table: CalibrationTable,
    pub step: f64,
}

impl Default for Planner {
    /// Default constants and a modeled (not measured) calibration table.
    fn default() -> Self {
        let dims: Vec<usize> = (1..=20).map(|i| i * 32).collect();
        Planner {
            consts: CostConstants::default(),
            table: CalibrationTable::modeled(0.25, &dims, &[1, 2, 3, 4, 5]),
            step: DEFAULT_STEP,
        }
    }
}

impl Planner {
    pub fn new(consts: CostConstants, table: CalibrationTable) -> Self {
        Planner {
            consts,
            table,
            step: DEFAULT_STEP,
        }
    }

    pub fn plan(&self, r: &IndexedRelation, s: &IndexedRelation) -> Result<ThresholdPlan> {
        let stats_r = DegreeStats::build(r, s);
        let stats_s = DegreeStats::build(s, r);
        optimize_thresholds(
            &stats_r,
            &stats_s,
            r.left_domain(),
            r.join_size_with(s),
            &self.consts,
            &self.table,
            self.step,
        )
    }

    /// Thresholds from the closed-form solution, fed the output estimate.
    pub fn closed_form(r: &IndexedRelation, s: &IndexedRelation) -> ThresholdPlan {
        let n = r.len().max(s.len()).max(1) as u64;
        let est = estimate_output_size(
            r.left_domain() as u64,
            s.left_domain() as u64,
            r.join_size_with(s),
            n,
        );
        let (d1, d2) = closed_form_thresholds(n, est.estimate.max(1));
        ThresholdPlan::partitioned(d1 as usize, d2 as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_example() {
        let e = estimate_output_size(100, 100, 10_000, 1_000);
        assert_eq!(e.lower, 100.0);
        assert_eq!(e.upper, 10_000.0);
        assert_eq!(e.estimate, 1_000);
    }

    #[test]
    fn estimate_degenerate_exact() {
        // out_join = dom_x² and (out_join/N)² = dom_x² → lower = upper
        let e = estimate_output_size(10, 10, 100, 10);
        assert_eq!(e.lower, 100.0);
        assert_eq!(e.upper, 100.0);
        assert_eq!(e.estimate, 100);
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(closed_form_thresholds(1_000_000, 1_000), (10, 10_000));
        assert_eq!(closed_form_thresholds(10_000, 1_000_000), (6, 6));
        assert_eq!(closed_form_thresholds(1_000, 1_000), (10, 10));
    }

    #[test]
    fn plan_tsv_round_trip() {
        let mut p = ThresholdPlan::partitioned(12, 40);
        p.modeled_light_cost = 1234.0;
        p.modeled_heavy_cost = 99.0;
        p.iterations = 7;
        let line = p.to_tsv();
        assert_eq!(line, "partitioned\t12\t40\t1234\t99\t7");
        assert_eq!(ThresholdPlan::from_tsv(&line).unwrap(), p);
        assert!(ThresholdPlan::from_tsv("x\t1").is_err());
    }

    #[test]
    fn invalid_plan() {
        assert!(ThresholdPlan::partitioned(0, 3).validate().is_err());
        assert!(ThresholdPlan::full_join().validate().is_ok());
    }

    #[test]
    fn sweep_monotone_curve_hits_floor() {
        let plan = sweep_thresholds(1000, 1000.0, DEFAULT_STEP, |d1, _| Ok((d1 as f64, 0.0))).unwrap();
        assert_eq!(plan.delta1, 1);
        let bound = (1000f64.ln() / (1.0 / 0.95f64).ln()).ceil() as usize + 1;
        assert!(plan.iterations <= bound);
    }

    #[test]
    fn sweep_stops_at_first_increase() {
        // convex in log Δ1 with minimum near 100
        let plan = sweep_thresholds(10_000, 10_000.0, DEFAULT_STEP, |d1, _| {
            let x = (d1 as f64).ln() - 100f64.ln();
            Ok((x * x, 0.0))
        })
        .unwrap();
        assert!((90..=110).contains(&plan.delta1), "{plan:?}");
    }

    #[test]
    fn sweep_rejects_bad_step() {
        assert!(sweep_thresholds(10, 10.0, 0.0, |_, _| Ok((0.0, 0.0))).is_err());
        assert!(sweep_thresholds(10, 10.0, 1.0, |_, _| Ok((0.0, 0.0))).is_err());
    }

    #[test]
    fn empty_table_is_an_error() {
        let stats = DegreeStats::default();
        let err = optimize_thresholds(&stats, &stats, 0, 0, &CostConstants::default(), &CalibrationTable::new(), 0.05);
        assert!(matches!(err, Err(Error::EmptyCalibration)));
    }
}
