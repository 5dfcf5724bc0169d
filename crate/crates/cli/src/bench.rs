//! `bench` and `report`: timed method runs recorded as CSV.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use mmjoin_core::apps::{scj_join_project, ssj_mmjoin, ssj_size_aware, ssj_size_aware_pp, SetFamily, SsjConfig};
use mmjoin_core::joinproject::{full_join_dedup_with, star_join_with, two_path_join_with};
use mmjoin_core::{oracle, timing, IndexedRelation, Planner, Relation, ThresholdPlan};

use crate::data;
use crate::{parse_count, DatasetKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BenchQuery {
    Twopath,
    Star,
    Ssj,
    Scj,
}

#[derive(Args)]
pub struct BenchArgs {
    #[arg(value_enum)]
    query: BenchQuery,
    #[arg(long, value_enum, default_value = "community")]
    dataset: DatasetKind,
    /// Use this edge list instead of a generated dataset
    #[arg(long)]
    input: Option<PathBuf>,
    /// Edges of the generated dataset
    #[arg(long, value_parser = parse_count, default_value = "100000")]
    n: usize,
    #[arg(long, default_value_t = 1)]
    communities: usize,
    #[arg(long, default_value_t = 0.8)]
    p: f64,
    #[arg(long, default_value_t = 1.1)]
    exponent: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Comma-separated: mmjoin, fulljoin, sizeaware, sizeaware-pp, oracle
    #[arg(long, value_delimiter = ',', default_value = "mmjoin,fulljoin")]
    methods: Vec<String>,
    /// Relations in the star query
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Overlap threshold for ssj
    #[arg(long, default_value_t = 2)]
    c: u32,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    cores: usize,
}

#[derive(Args)]
pub struct ReportArgs {
    /// CSV written by `bench --csv`
    csv: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub dataset: String,
    pub query: String,
    pub method: String,
    pub wall_nanos: u64,
    pub output_size: u64,
    pub delta1: Option<usize>,
    pub delta2: Option<usize>,
    pub strategy: String,
}

struct Ctx {
    planner: Planner,
    cfg: SsjConfig,
}

fn timed<T>(f: impl FnMut() -> T) -> (u64, T) {
    let (d, out) = timing::measure(f);
    (d.as_nanos() as u64, out)
}

fn run_method(q: BenchQuery, method: &str, rel: &Relation, a: &BenchArgs, ctx: &Ctx) -> Result<(u64, u64, Option<ThresholdPlan>)> {
    let g = IndexedRelation::build(rel.clone());
    let opts = data::join_options(a.cores, None);
    let family = || SetFamily::from_relation(rel);
    Ok(match (q, method) {
        (BenchQuery::Twopath, "mmjoin") => {
            let (t, res) = timed(|| -> Result<_> {
                let plan = ctx.planner.plan(&g, &g)?;
                let out = two_path_join_with(&g, &g, &plan, false, &opts)?;
                Ok((plan, out.len() as u64))
            });
            let (plan, out) = res?;
            (t, out, Some(plan))
        }
        (BenchQuery::Twopath, "fulljoin") => {
            let (t, out) = timed(|| full_join_dedup_with(&g, &g, false, &opts).len() as u64);
            (t, out, Some(ThresholdPlan::full_join()))
        }
        (BenchQuery::Twopath, "oracle") => {
            let (t, out) = timed(|| oracle::two_path_counts(rel, rel).len() as u64);
            (t, out, None)
        }
        (BenchQuery::Star, "mmjoin") => {
            let refs = vec![&g; a.k];
            let plan = Planner::closed_form(&g, &g);
            let opts = mmjoin_core::JoinOptions { star_row_cap: 1 << 20, ..opts };
            let (t, out) = timed(|| star_join_with(&refs, plan.delta1, plan.delta2, false, &opts).map(|o| o.len() as u64));
            (t, out?, Some(plan))
        }
        (BenchQuery::Star, "oracle") => {
            let refs = vec![rel; a.k];
            let (t, out) = timed(|| oracle::star_counts(&refs).len() as u64);
            (t, out, None)
        }
        (BenchQuery::Ssj, "mmjoin") => {
            let f = family();
            let (t, out) = timed(|| ssj_mmjoin(&f, a.c, &ctx.cfg).map(|p| p.len() as u64));
            (t, out?, None)
        }
        (BenchQuery::Ssj, "sizeaware") => {
            let f = family();
            let (t, out) = timed(|| ssj_size_aware(&f, a.c, &ctx.cfg).map(|p| p.len() as u64));
            (t, out?, None)
        }
        (BenchQuery::Ssj, "sizeaware-pp") => {
            let f = family();
            let (t, out) = timed(|| ssj_size_aware_pp(&f, a.c, &ctx.cfg).map(|p| p.len() as u64));
            (t, out?, None)
        }
        (BenchQuery::Ssj, "oracle") => {
            let f = family();
            let (t, out) = timed(|| oracle::ssj(&f, a.c).len() as u64);
            (t, out, None)
        }
        (BenchQuery::Scj, "mmjoin") => {
            let f = family();
            let (t, out) = timed(|| scj_join_project(&f, &ctx.cfg).map(|p| p.len() as u64));
            (t, out?, None)
        }
        (BenchQuery::Scj, "oracle") => {
            let f = family();
            let (t, out) = timed(|| oracle::scj(&f).len() as u64);
            (t, out, None)
        }
        (q, m) => bail!("method {m:?} is not available for {q:?}"),
    })
}

pub fn run(a: &BenchArgs) -> Result<ExitCode> {
    let (rel, dataset) = match &a.input {
        Some(p) => (data::load(p)?, p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()),
        None => (
            data::generate(a.dataset, a.n, a.communities, a.p, a.exponent, a.seed),
            data::dataset_name(a.dataset, a.n, a.seed),
        ),
    };
    println!("# seed {} dataset {} tuples {}", a.seed, dataset, rel.len());
    let query = match a.query {
        BenchQuery::Twopath => "twopath".to_owned(),
        BenchQuery::Star => format!("star-{}", a.k),
        BenchQuery::Ssj => format!("ssj-{}", a.c),
        BenchQuery::Scj => "scj".to_owned(),
    };
    let planner = data::planner(a.calibration.as_deref(), a.cores)?;
    let ctx = Ctx {
        cfg: SsjConfig {
            planner: planner.clone(),
            join: data::join_options(a.cores, None),
            ..SsjConfig::default()
        },
        planner,
    };

    let mut records = Vec::new();
    for method in &a.methods {
        let (wall_nanos, output_size, plan) = run_method(a.query, method, &rel, a, &ctx)?;
        let partitioned = plan.as_ref().filter(|p| p.strategy == mmjoin_core::Strategy::Partitioned);
        let rec = BenchRecord {
            dataset: dataset.clone(),
            query: query.clone(),
            method: method.clone(),
            wall_nanos,
            output_size,
            delta1: partitioned.map(|p| p.delta1),
            delta2: partitioned.map(|p| p.delta2),
            strategy: plan.map(|p| p.strategy.to_string()).unwrap_or_default(),
        };
        println!(
            "{} {} {}: {:.3} ms, output {}",
            rec.dataset,
            rec.query,
            rec.method,
            rec.wall_nanos as f64 / 1e6,
            rec.output_size
        );
        records.push(rec);
    }
    if let Some(path) = &a.csv {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        for r in &records {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    if let Some(first) = records.first() {
        if records.iter().any(|r| r.output_size != first.output_size) {
            eprintln!("error: output sizes differ across methods");
            return Ok(ExitCode::from(1));
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub fn report(a: &ReportArgs) -> Result<ExitCode> {
    let mut reader = csv::Reader::from_path(&a.csv).with_context(|| format!("opening {}", a.csv.display()))?;
    let records: Vec<BenchRecord> = reader
        .deserialize()
        .collect::<Result<_, _>>()
        .with_context(|| format!("parsing {}", a.csv.display()))?;
    if records.is_empty() {
        println!("no records");
        return Ok(ExitCode::SUCCESS);
    }
    let mut groups: Vec<((String, String), Vec<&BenchRecord>)> = Vec::new();
    for r in &records {
        let key = (r.dataset.clone(), r.query.clone());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    println!("{:<28} {:<10} {:<14} {:>12} {:>9}", "dataset", "query", "method", "wall_ms", "speedup");
    for ((dataset, query), rows) in &groups {
        let base = rows.iter().find(|r| r.method == "fulljoin").unwrap_or(&rows[0]);
        for r in rows {
            let speedup = base.wall_nanos.max(1) as f64 / r.wall_nanos.max(1) as f64;
            println!(
                "{:<28} {:<10} {:<14} {:>12.3} {:>9.2}",
                dataset,
                query,
                r.method,
                r.wall_nanos as f64 / 1e6,
                speedup
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}
