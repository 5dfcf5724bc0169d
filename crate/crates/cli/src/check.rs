//! `check`: compare the fast paths against the brute-force oracle.

use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, ValueEnum};

use mmjoin_core::apps::{scj_join_project, ssj, SetFamily, SsjConfig, SsjMethod};
use mmjoin_core::joinproject::{star_join_with, two_path_join_with};
use mmjoin_core::relation::generate_skewed;
use mmjoin_core::{oracle, IndexedRelation, JoinOptions, Planner, Relation, ThresholdPlan};

use crate::parse_count;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CheckQuery {
    Twopath,
    Star,
    Ssj,
    Scj,
}

#[derive(Args)]
pub struct CheckArgs {
    #[arg(value_enum)]
    query: CheckQuery,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Tuples per generated relation
    #[arg(long, value_parser = parse_count, default_value = "2000")]
    n: usize,
    /// Relations in the star query
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Overlap threshold for ssj
    #[arg(long, default_value_t = 2)]
    c: u32,
    /// Threshold pairs to try on top of the planner's choices
    #[arg(long, default_value_t = 16)]
    plans: usize,
}

fn skewed(n: usize, seed: u64) -> Relation {
    let dom = ((n as f64).sqrt() * 2.0).ceil().max(2.0) as usize;
    generate_skewed(dom, dom, n, 1.0, seed)
}

/// Geometric threshold pairs: 1, 2, 4, ... up to past `n`, crossed.
fn threshold_grid(n: usize, limit: usize) -> Vec<(usize, usize)> {
    let mut steps = vec![1usize];
    while *steps.last().unwrap() <= n {
        steps.push(steps.last().unwrap() * 2);
    }
    let mut grid: Vec<(usize, usize)> = steps.iter().flat_map(|&a| steps.iter().map(move |&b| (a, b))).collect();
    // spread the picks over the whole grid when it is larger than the limit
    if grid.len() > limit && limit > 0 {
        let stride = grid.len() as f64 / limit as f64;
        grid = (0..limit).map(|i| grid[(i as f64 * stride) as usize]).collect();
    }
    grid
}

fn mismatch(what: &str) -> ExitCode {
    eprintln!("mismatch: {what}");
    ExitCode::from(1)
}

pub fn run(a: &CheckArgs) -> Result<ExitCode> {
    println!("# seed {} n {}", a.seed, a.n);
    let opts = JoinOptions::default();
    match a.query {
        CheckQuery::Twopath => {
            let (r, s) = (skewed(a.n, a.seed), skewed(a.n, a.seed.wrapping_add(1)));
            let want: Vec<_> = oracle::two_path_counts(&r, &s).into_iter().collect();
            let (ri, si) = (IndexedRelation::build(r), IndexedRelation::build(s));
            let mut plans = vec![
                Planner::default().plan(&ri, &si)?,
                Planner::closed_form(&ri, &si),
                ThresholdPlan::full_join(),
            ];
            plans.extend(threshold_grid(a.n, a.plans).into_iter().map(|(d1, d2)| ThresholdPlan::partitioned(d1, d2)));
            for plan in &plans {
                let got = oracle::counted(&two_path_join_with(&ri, &si, plan, true, &opts)?);
                let got: Vec<_> = got.into_iter().map(|(t, c)| ((t[0], t[1]), c)).collect();
                if got != want {
                    return Ok(mismatch(&format!(
                        "twopath {} delta1={} delta2={}",
                        plan.strategy, plan.delta1, plan.delta2
                    )));
                }
            }
            println!("ok: twopath {} output pairs, {} plans", want.len(), plans.len());
        }
        CheckQuery::Star => {
            if !(2..=4).contains(&a.k) {
                anyhow::bail!("star needs 2 to 4 relations, got {}", a.k);
            }
            let per = (a.n / a.k).max(1);
            let rels: Vec<Relation> = (0..a.k as u64).map(|i| skewed(per, a.seed.wrapping_add(i))).collect();
            let refs: Vec<&Relation> = rels.iter().collect();
            let want = oracle::star_counts(&refs);
            let indexed: Vec<IndexedRelation> = rels.into_iter().map(IndexedRelation::build).collect();
            let irefs: Vec<&IndexedRelation> = indexed.iter().collect();
            let opts = JoinOptions { star_row_cap: 1 << 20, ..opts };
            let grid = threshold_grid(per, a.plans);
            for &(d1, d2) in &grid {
                let got = oracle::counted(&star_join_with(&irefs, d1, d2, true, &opts)?);
                if got != want {
                    return Ok(mismatch(&format!("star k={} delta1={d1} delta2={d2}", a.k)));
                }
            }
            println!("ok: star k={} {} output tuples, {} plans", a.k, want.len(), grid.len());
        }
        CheckQuery::Ssj | CheckQuery::Scj => {
            // many small sets over a narrow universe so containments occur
            let sets = (a.n / 3).max(1);
            let family = SetFamily::from_relation(&generate_skewed(sets, 24, a.n, 1.0, a.seed));
            let cfg = SsjConfig::default();
            if a.query == CheckQuery::Ssj {
                let want = oracle::ssj(&family, a.c);
                for method in [SsjMethod::MmJoin, SsjMethod::SizeAware, SsjMethod::SizeAwarePp] {
                    let mut got = ssj(&family, a.c, method, &cfg)?;
                    got.sort_by_key(|p| (p.a, p.b));
                    if got != want {
                        return Ok(mismatch(&format!("ssj {method:?} c={}", a.c)));
                    }
                }
                println!("ok: ssj c={} {} pairs, 3 methods", a.c, want.len());
            } else {
                let want = oracle::scj(&family);
                let mut got = scj_join_project(&family, &cfg)?;
                got.sort_unstable();
                if got != want {
                    return Ok(mismatch("scj"));
                }
                println!("ok: scj {} pairs", want.len());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
