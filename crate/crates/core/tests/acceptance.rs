//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails or exceeds its time budget.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mmjoin_core::apps::{
    bsi_answer_batch, bsi_batch_size, bsi_simulate, analytic_batch_cost, scj_join_project,
    ssj_mmjoin, ssj_size_aware, ssj_size_aware_pp, uniform_arrivals, InvertedLists, PrefixTree,
    SetFamily, SsjConfig,
};
use mmjoin_core::joinproject::{full_join_dedup_with, two_path_heavy_matrices, JoinOptions};
use mmjoin_core::matmul::{calibrate, multiply_counts_with, CalibrationConfig, Kernel, KernelOptions};
use mmjoin_core::optimizer::CostModel;
use mmjoin_core::relation::{
    community_graph_with_edges, generate_community_graph, generate_skewed, generate_uniform,
};
use mmjoin_core::timing;
use mmjoin_core::{
    estimate_output_size, multiply_counts, optimize_thresholds, oracle, partition_two_path,
    semi_join_reduce, star_join, two_path_join, CostConstants, CountMatrix, DegreeStats,
    IndexedRelation, OutputSet, Planner, Relation, Strategy, ThresholdPlan,
};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, hi: usize) -> usize {
    let hi = hi.max(1) as f64;
    (hi.powf(rng.gen::<f64>()).round() as usize).clamp(1, hi as usize)
}

/// A random `(R, S)` pair with at most `max_n` tuples per relation.
fn random_pair(rng: &mut ChaCha8Rng, max_n: usize) -> (Relation, Relation) {
    let seed = rng.gen();
    match rng.gen_range(0..3) {
        0 => {
            let (l, r) = (rng.gen_range(2..300), rng.gen_range(2..300));
            let n = rng.gen_range(1..=max_n / 2);
            (generate_uniform(l, r, n, seed), generate_uniform(l, r, n, seed ^ 1))
        }
        1 => {
            let (l, r) = (rng.gen_range(2..300), rng.gen_range(2..100));
            let n = rng.gen_range(1..=max_n / 2);
            let e = rng.gen_range(0.6..1.6);
            (generate_skewed(l, r, n, e, seed), generate_skewed(l, r, n, e, seed ^ 1))
        }
        _ => {
            let nodes = rng.gen_range(4..=((max_n as f64).sqrt() as usize).max(5));
            let k = rng.gen_range(1..=4.min(nodes));
            let p = rng.gen_range(0.2..0.95);
            let g = generate_community_graph(nodes, k, p, seed);
            (g.clone(), g)
        }
    }
}

fn counts_of(out: &OutputSet) -> std::collections::BTreeMap<(u32, u32), u32> {
    oracle::counted(out).into_iter().map(|(t, n)| ((t[0], t[1]), n)).collect()
}

const R2: [(u32, u32); 14] = [
    (1, 6), (2, 1), (2, 2), (3, 5), (3, 3), (4, 4), (4, 1),
    (4, 6), (5, 4), (5, 5), (5, 6), (6, 4), (6, 5), (6, 2),
];
const S2: [(u32, u32); 14] = [
    (1, 6), (1, 2), (2, 6), (2, 3), (3, 3), (4, 4), (4, 5),
    (4, 1), (5, 4), (5, 5), (5, 6), (6, 2), (6, 5), (6, 6),
];

fn c1_example2() -> Outcome {
    let r = IndexedRelation::build(Relation::from_pairs("R", R2));
    let s = IndexedRelation::build(Relation::from_pairs("S", S2));
    let (pr, ps) = partition_two_path(&r, &s, 2, 2).map_err(|e| e.to_string())?;
    let mut rh = pr.heavy.clone();
    rh.sort_unstable();
    let mut sh = ps.heavy.clone();
    sh.sort_unstable();
    check(rh == [(4, 4), (4, 6), (5, 4), (5, 5), (5, 6), (6, 4), (6, 5)], || format!("R+ = {rh:?}"))?;
    check(sh == [(4, 4), (4, 5), (5, 4), (5, 5), (5, 6), (6, 5), (6, 6)], || format!("S+ = {sh:?}"))?;
    let (m1, m2) = two_path_heavy_matrices(&r, &s, 2, 2).map_err(|e| e.to_string())?;
    check(m1.to_rows() == [[1, 0, 1], [1, 1, 1], [1, 1, 0]], || format!("M1 = {:?}", m1.to_rows()))?;
    check(m2.to_rows() == [[1, 1, 0], [1, 1, 1], [0, 1, 1]], || format!("M2 = {:?}", m2.to_rows()))?;
    let m = multiply_counts(&m1, &m2).map_err(|e| e.to_string())?;
    let expected = [[1, 2, 1], [2, 3, 2], [2, 2, 3]];
    check(m.to_rows() == expected, || {
        format!(
            "partition, M1 and M2 match; M = {:?}, expected {:?} (M1 row 6 · M2 column 6 = 1)",
            m.to_rows(),
            expected
        )
    })?;
    Ok("partition, M1, M2 and M match".into())
}

fn c2_two_path_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut runs = 0;
    for inst in 0..200 {
        let (r, s) = random_pair(&mut rng, 5000);
        let (r, s) = (IndexedRelation::build(r), IndexedRelation::build(s));
        let expected: BTreeSet<(u32, u32)> = oracle::two_path_counts(r.base(), s.base()).into_keys().collect();
        let n = r.len().max(s.len());
        for _ in 0..20 {
            let plan = ThresholdPlan::partitioned(log_uniform(&mut rng, n), log_uniform(&mut rng, n));
            let out = two_path_join(&r, &s, &plan, false).map_err(|e| e.to_string())?;
            let got: BTreeSet<(u32, u32)> = out.pairs().into_iter().collect();
            check(got == expected, || format!("instance {inst} plan {plan:?}: mismatch"))?;
            runs += 1;
        }
    }
    Ok(format!("{runs} joins, 0 mismatches"))
}

fn c3_star_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for inst in 0..100 {
        let k = rng.gen_range(2..=4);
        let left = rng.gen_range(2..40);
        let right = rng.gen_range(2..30);
        let n = rng.gen_range(1..=500 / k);
        let rels: Vec<IndexedRelation> = (0..k)
            .map(|_| IndexedRelation::build(generate_skewed(left, right, n, 1.0, rng.gen())))
            .collect();
        let refs: Vec<_> = rels.iter().collect();
        let bases: Vec<_> = rels.iter().map(|r| r.base()).collect();
        let expected = oracle::star_counts(&bases);
        let d1 = log_uniform(&mut rng, n);
        let d2 = log_uniform(&mut rng, n);
        let out = star_join(&refs, d1, d2, true).map_err(|e| e.to_string())?;
        check(oracle::counted(&out) == expected, || format!("instance {inst} (k={k}, Δ=({d1},{d2}))"))?;
        if k == 2 {
            let two = two_path_join(refs[0], refs[1], &ThresholdPlan::partitioned(d1, d2), true)
                .map_err(|e| e.to_string())?;
            check(two == out, || format!("instance {inst}: k=2 differs from two-path"))?;
        }
    }
    Ok("100 instances, 0 mismatches".into())
}

fn c4_counts() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for inst in 0..100 {
        let (r, s) = random_pair(&mut rng, 5000);
        let (r, s) = (IndexedRelation::build(r), IndexedRelation::build(s));
        let n = r.len().max(s.len());
        let plan = ThresholdPlan::partitioned(log_uniform(&mut rng, n), log_uniform(&mut rng, n));
        let out = two_path_join(&r, &s, &plan, true).map_err(|e| e.to_string())?;
        check(counts_of(&out) == oracle::two_path_counts(r.base(), s.base()), || {
            format!("instance {inst}: counts differ")
        })?;
        let total = out.total_witnesses().unwrap_or(0);
        check(total == r.join_size_with(&s), || format!("instance {inst}: Σ counts {total}"))?;
    }
    Ok("100 instances, counts exact".into())
}

fn random_family(rng: &mut ChaCha8Rng) -> SetFamily {
    let sets = rng.gen_range(2..80);
    let universe = rng.gen_range(3..40);
    let max_len = rng.gen_range(1..20);
    SetFamily::from_sets((0..sets).map(|_| {
        let len = rng.gen_range(0..=max_len);
        (0..len).map(|_| rng.gen_range(0..universe)).collect::<Vec<u32>>()
    }))
}

fn c5_ssj() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = SsjConfig::default();
    for inst in 0..50 {
        let fam = random_family(&mut rng);
        for c in 1..=3 {
            let expected = oracle::ssj(&fam, c);
            let mm = ssj_mmjoin(&fam, c, &cfg).map_err(|e| e.to_string())?;
            let sa = ssj_size_aware(&fam, c, &cfg).map_err(|e| e.to_string())?;
            let pp = ssj_size_aware_pp(&fam, c, &cfg).map_err(|e| e.to_string())?;
            check(mm == expected && sa == expected && pp == expected, || {
                format!("family {inst}, c={c}: methods disagree")
            })?;
        }
    }
    let queries = SetFamily::from_sets(vec![vec![], vec![1, 2, 3], vec![1, 2, 4]]);
    let lists = InvertedLists::from_lists(vec![
        vec![],
        vec![1, 2, 3, 4],
        vec![1, 2, 3],
        vec![3, 5],
        vec![4, 6],
        vec![3, 4],
        vec![],
        vec![5],
    ]);
    let tree = PrefixTree::build(&queries, &lists);
    let (shared, plain) = (tree.evaluate(2, 8).ops, tree.evaluate(2, 0).ops);
    check(shared == 9 && plain == 18, || format!("prefix ops {shared} vs {plain}"))?;
    Ok("150 (family, c) runs agree; prefix ops 9 vs 18".into())
}

fn c6_scj() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for inst in 0..50 {
        let fam = random_family(&mut rng);
        let got = scj_join_project(&fam, &SsjConfig::default()).map_err(|e| e.to_string())?;
        check(got == oracle::scj(&fam), || format!("family {inst}: mismatch"))?;
    }
    Ok("50 families, 0 mismatches".into())
}

fn c7_estimator() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut done = 0;
    while done < 100 {
        let (r, s) = random_pair(&mut rng, 5000);
        let (r, s) = semi_join_reduce(&r, &s);
        if r.is_empty() {
            continue;
        }
        let (r, s) = (IndexedRelation::build(r), IndexedRelation::build(s));
        let out = full_join_dedup_with(&r, &s, false, &JoinOptions::default()).len() as f64;
        let out_join = r.join_size_with(&s);
        let n = r.len().max(s.len()) as u64;
        let est = estimate_output_size(r.left_domain() as u64, s.left_domain() as u64, out_join, n);
        check(est.lower <= out * (1.0 + 1e-12) && out <= est.upper, || {
            format!("instance {done}: {est:?} vs |OUT| = {out}")
        })?;
        check(out_join as f64 <= n as f64 * out.sqrt() * (1.0 + 1e-12), || {
            format!("instance {done}: OUT_join {out_join} > N·sqrt(OUT)")
        })?;
        done += 1;
    }
    Ok("100 reduced instances, 0 violations".into())
}

fn c8_optimizer() -> Outcome {
    let table = calibrate(&CalibrationConfig {
        probe_dims: (1..=8).map(|i| i * 32).collect(),
        cores: vec![1],
        runs: 3,
        ..CalibrationConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let consts = CostConstants::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0f64;
    for inst in 0..20 {
        let edges = log_uniform(&mut rng, 100_000).max(10_000);
        let k = rng.gen_range(1..=4);
        let p = rng.gen_range(0.3..0.9);
        let g = IndexedRelation::build(community_graph_with_edges(edges, k, p, rng.gen()));
        let stats = DegreeStats::build(&g, &g);
        let out_join = g.join_size_with(&g);
        let plan = optimize_thresholds(&stats, &stats, g.left_domain(), out_join, &consts, &table, 0.05)
            .map_err(|e| e.to_string())?;
        let n = g.len();
        let bound = ((n as f64).ln() / (1.0f64 / 0.95).ln()).ceil() as usize + 1;
        check(plan.iterations <= bound, || format!("instance {inst}: {} iterations > {bound}", plan.iterations))?;
        if plan.strategy == Strategy::FullJoin {
            continue;
        }
        let model = CostModel {
            stats_r: &stats,
            stats_s: &stats,
            dom_x: g.left_domain(),
            consts,
            table: &table,
        };
        let est = estimate_output_size(g.left_domain() as u64, g.left_domain() as u64, out_join, n as u64);
        let mut best = f64::INFINITY;
        for i in 0..50 {
            let d1 = ((n as f64).powf(i as f64 / 49.0).round() as usize).clamp(1, n);
            let d2 = ((n as f64 * d1 as f64 / est.estimate.max(1) as f64).round() as usize).clamp(1, n);
            best = best.min(model.total(d1, d2).map_err(|e| e.to_string())?);
        }
        let ratio = plan.modeled_total() / best;
        worst = worst.max(ratio);
        check(ratio <= 1.5, || format!("instance {inst}: plan cost {ratio:.3}× grid minimum"))?;
    }
    Ok(format!("20 instances, worst plan/grid ratio {worst:.3}"))
}

fn c9_performance() -> Outcome {
    let g = IndexedRelation::build(community_graph_with_edges(100_000, 1, 0.8, 9));
    let n = g.len() as u64;
    let out_join = g.join_size_with(&g);
    let opts = JoinOptions::default();
    let (t_full, full) = timing::measure(|| full_join_dedup_with(&g, &g, false, &opts));
    let out = full.len() as u64;
    check(out_join >= 20 * out && out_join >= 20 * n, || {
        format!("workload not join-heavy: OUT_join {out_join}, OUT {out}, N {n}")
    })?;
    let planner = Planner::default();
    let (t_mm, mm) = timing::measure(|| {
        let plan = planner.plan(&g, &g).expect("plan");
        two_path_join_with_plan(&g, &plan, &opts)
    });
    check(mm == full, || "MMJoin and full join outputs differ".into())?;
    let ratio = t_mm.as_secs_f64() / t_full.as_secs_f64();
    check(ratio <= 0.7, || {
        format!("MMJoin {t_mm:?} vs full join {t_full:?}: ratio {ratio:.3} > 0.7")
    })?;
    Ok(format!(
        "N={n}, OUT_join={out_join}, OUT={out}: MMJoin {t_mm:.2?} vs full join {t_full:.2?} (ratio {ratio:.3})"
    ))
}

fn two_path_join_with_plan(g: &IndexedRelation, plan: &ThresholdPlan, opts: &JoinOptions) -> OutputSet {
    mmjoin_core::joinproject::two_path_join_with(g, g, plan, false, opts).expect("join")
}

fn c10_bsi() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let r = IndexedRelation::build(generate_skewed(400, 300, 4000, 1.0, rng.gen()));
    let s = IndexedRelation::build(generate_uniform(400, 300, 4000, rng.gen()));
    let set = |rel: &IndexedRelation, a: u32| rel.fwd(a).iter().copied().collect::<BTreeSet<_>>();
    let queries: Vec<(u32, u32)> = (0..1000).map(|_| (rng.gen_range(0..420), rng.gen_range(0..420))).collect();
    let planner = Planner::default();
    let opts = JoinOptions::default();
    for (bi, batch) in queries.chunks(100).enumerate() {
        let got = bsi_answer_batch(&r, &s, batch, &planner, &opts).map_err(|e| e.to_string())?;
        for (&(a, b), ans) in batch.iter().zip(got) {
            let (sa, sb) = (set(&r, a), set(&s, b));
            let expected = (!sa.is_empty() && !sb.is_empty()).then(|| !sa.is_disjoint(&sb));
            check(ans == expected, || format!("batch {bi}: query ({a},{b}) gave {ans:?}"))?;
        }
    }
    let size = bsi_batch_size(1000.0, 1_000_000);
    check(size == 251_189, || format!("batch size {size}"))?;

    let arrivals = uniform_arrivals(1000.0, 20_000);
    let cost = analytic_batch_cost(1_000_000, 1e-8);
    let sizes: Vec<usize> = (0..13).map(|i| 1 << i).collect();
    let delays: Vec<f64> = sizes
        .iter()
        .map(|&c| bsi_simulate(&arrivals, c, 1, &cost).map(|r| r.mean_delay))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let (best, _) = delays
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty sweep");
    check(best > 0 && best + 1 < sizes.len(), || format!("delay minimum at the sweep edge: {delays:?}"))?;
    Ok(format!(
        "1000 queries agree; batch size {size}; delay minimum at C={} ({:.4}s)",
        sizes[best], delays[best]
    ))
}

fn c11_matmul() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for inst in 0..200 {
        let (u, v, w) = (rng.gen_range(1..=64), rng.gen_range(1..=64), rng.gen_range(1..=64));
        let a = CountMatrix::random(u, v, 5, rng.gen());
        let b = CountMatrix::random(v, w, 5, rng.gen());
        let expected = oracle::matmul(&a.to_rows(), &b.to_rows());
        let mut first: Option<Vec<u32>> = None;
        for cores in 1..=4 {
            let opts = KernelOptions {
                cores,
                kernel: Kernel::Blocked { tile_k: 16, tile_j: 32 },
            };
            let m = multiply_counts_with(&a, &b, &opts).map_err(|e| e.to_string())?;
            let got: Vec<Vec<u64>> = m.to_rows().into_iter().map(|r| r.into_iter().map(u64::from).collect()).collect();
            check(got == expected, || format!("instance {inst} ({u}×{v}×{w}), cores {cores}"))?;
            match &first {
                None => first = Some(m.data().to_vec()),
                Some(f) => check(f == m.data(), || format!("instance {inst}: cores {cores} differs"))?,
            }
        }
    }
    Ok("200 products, identical across 1-4 cores".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, fn() -> Outcome); 11] = [
        ("Example-2 reproduction", Duration::from_secs(1), c1_example2),
        ("two-path oracle equivalence", Duration::from_secs(120), c2_two_path_oracle),
        ("star oracle equivalence", Duration::from_secs(120), c3_star_oracle),
        ("count exactness", Duration::from_secs(60), c4_counts),
        ("SSJ triple agreement", Duration::from_secs(120), c5_ssj),
        ("SCJ oracle equivalence", Duration::from_secs(60), c6_scj),
        ("estimator sandwich", Duration::from_secs(60), c7_estimator),
        ("optimizer quality", Duration::from_secs(300), c8_optimizer),
        ("performance smoke", Duration::from_secs(300), c9_performance),
        ("BSI", Duration::from_secs(120), c10_bsi),
        ("matmul kernel", Duration::from_secs(60), c11_matmul),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if took <= *budget => (true, d),
            Ok(d) => (false, format!("{d}; over time budget")),
            Err(e) => (false, e),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} {name} [{took:.2?} / {budget:?}]: {detail}",
            if ok { "PASS" } else { "FAIL" },
            i + 1
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
