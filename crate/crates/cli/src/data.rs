//! Loading, planning and output helpers shared by the subcommands.

use std::cmp::Ordering;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mmjoin_core::relation::{
    community_graph_with_edges, generate_skewed, generate_uniform, parse_edge_list_with, read_edge_list,
};
use mmjoin_core::{
    CalibrationTable, CostConstants, DedupStrategy, Dictionary, IndexedRelation, JoinOptions, Planner,
    Relation, ThresholdPlan,
};

use crate::{DatasetKind, DedupArg, PlanArgs};

pub const CALIBRATION_ENV: &str = "MMJOIN_CALIBRATION";

/// Planner from an explicit table, `$MMJOIN_CALIBRATION`, or the built-in
/// modeled table.
pub fn planner(calibration: Option<&Path>, cores: usize) -> Result<Planner> {
    let path: Option<PathBuf> = calibration
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(CALIBRATION_ENV).map(PathBuf::from));
    let mut planner = match path {
        Some(p) => {
            let table = CalibrationTable::load(&p)
                .with_context(|| format!("loading calibration table {}", p.display()))?;
            Planner::new(CostConstants::default(), table)
        }
        None => Planner::default(),
    };
    planner.consts.cores = cores.max(1);
    Ok(planner)
}

pub fn join_options(cores: usize, dedup: Option<DedupArg>) -> JoinOptions {
    JoinOptions {
        cores: cores.max(1),
        dedup: dedup.map(|d| match d {
            DedupArg::Vector => DedupStrategy::VectorReuse,
            DedupArg::Sort => DedupStrategy::SortBased,
        }),
        ..JoinOptions::default()
    }
}

pub fn resolve_plan(args: &PlanArgs, r: &IndexedRelation, s: &IndexedRelation) -> Result<ThresholdPlan> {
    if args.full_join {
        return Ok(ThresholdPlan::full_join());
    }
    if let (Some(d1), Some(d2)) = (args.delta1, args.delta2) {
        return Ok(ThresholdPlan::partitioned(d1, d2));
    }
    if args.closed_form {
        return Ok(Planner::closed_form(r, s));
    }
    Ok(planner(args.calibration.as_deref(), args.cores)?.plan(r, s)?)
}

pub fn describe_plan(plan: &ThresholdPlan) -> String {
    format!(
        "# plan strategy={} delta1={} delta2={} iterations={}",
        plan.strategy, plan.delta1, plan.delta2, plan.iterations
    )
}

pub fn load(path: &Path) -> Result<Relation> {
    read_edge_list(path).with_context(|| format!("reading {}", path.display()))
}

/// Load relations whose right columns share one dictionary.
pub fn load_shared(paths: &[PathBuf]) -> Result<Vec<Relation>> {
    let mut right = Dictionary::new();
    let mut out = Vec::with_capacity(paths.len());
    for p in paths {
        let file = std::fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
        let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let rel = parse_edge_list_with(&name, io::BufReader::new(file), Dictionary::new(), right)
            .with_context(|| format!("reading {}", p.display()))?;
        right = rel.right_dict.clone();
        out.push(rel);
    }
    // earlier relations must see every id handed out later
    for rel in &mut out {
        rel.right_dict = right.clone();
    }
    Ok(out)
}

pub fn generate(kind: DatasetKind, n: usize, communities: usize, p: f64, exponent: f64, seed: u64) -> Relation {
    let dom = ((n as f64).sqrt() * 2.0).ceil().max(2.0) as usize;
    match kind {
        DatasetKind::Community => community_graph_with_edges(n, communities.max(1), p, seed),
        DatasetKind::Uniform => generate_uniform(dom, dom, n, seed),
        DatasetKind::Skewed => generate_skewed(dom, dom, n, exponent, seed),
    }
}

pub fn dataset_name(kind: DatasetKind, n: usize, seed: u64) -> String {
    let kind = match kind {
        DatasetKind::Community => "community",
        DatasetKind::Uniform => "uniform",
        DatasetKind::Skewed => "skewed",
    };
    format!("{kind}-{n}-s{seed}")
}

/// Numeric tokens sort numerically and before non-numeric ones.
pub fn raw_cmp(a: &str, b: &str) -> Ordering {
    match (a.parse::<i128>(), b.parse::<i128>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

pub fn raw_tuple_cmp(a: &[String], b: &[String]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| raw_cmp(x, y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

pub fn decode(dict: &Dictionary, id: u32) -> String {
    dict.value(id).map_or_else(|| id.to_string(), str::to_owned)
}

/// Write whitespace-joined rows to stdout.
pub fn emit(rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    for row in rows {
        if let Err(e) = writeln!(out, "{}", row.join(" ")) {
            if e.kind() == io::ErrorKind::BrokenPipe {
                return Ok(());
            }
            return Err(e.into());
        }
    }
    match out.flush() {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_aware_order() {
        let mut v = vec!["10", "b", "9", "a", "-1"];
        v.sort_by(|a, b| raw_cmp(a, b));
        assert_eq!(v, vec!["-1", "9", "10", "a", "b"]);
    }

    #[test]
    fn count_parsing() {
        assert_eq!(crate::parse_count("1e5"), Ok(100_000));
        assert_eq!(crate::parse_count("2000"), Ok(2000));
        assert!(crate::parse_count("1.5").is_err());
        assert!(crate::parse_count("x").is_err());
    }
}
