use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use mmjoin_core::apps::{
    bsi_answer_batch, bsi_batch_size, bsi_simulate, parse_bsi_workload, scj_join_project, sort_by_overlap,
    ssj, SetFamily, SsjConfig, SsjMethod,
};
use mmjoin_core::joinproject::{star_join_with, two_path_join_with, JoinOptions};
use mmjoin_core::matmul::{calibrate as run_calibration, CalibrationConfig};
use mmjoin_core::relation::read_join_pair;
use mmjoin_core::{IndexedRelation, Planner};

use crate::data::{self, decode, emit, raw_tuple_cmp};
use crate::{BsiArgs, CalibrateArgs, GenArgs, ScjArgs, SsjArgs, SsjMethodArg, StarArgs, TwopathArgs};

pub fn gen(a: &GenArgs) -> Result<ExitCode> {
    let rel = data::generate(a.kind, a.n, a.communities, a.p, a.exponent, a.seed);
    let sink: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    };
    let mut out = BufWriter::new(sink);
    writeln!(out, "# seed {} kind {:?} n {}", a.seed, a.kind, a.n)?;
    for &(x, y) in rel.tuples() {
        writeln!(out, "{x} {y}")?;
    }
    out.flush()?;
    eprintln!("seed {}: {} tuples", a.seed, rel.len());
    Ok(ExitCode::SUCCESS)
}

pub fn twopath(a: &TwopathArgs) -> Result<ExitCode> {
    let (r, s) = read_join_pair(&a.left, &a.right).context("reading input relations")?;
    let (r, s) = (IndexedRelation::build(r), IndexedRelation::build(s));
    let plan = data::resolve_plan(&a.plan, &r, &s)?;
    eprintln!("{}", data::describe_plan(&plan));
    let opts = data::join_options(a.plan.cores, a.plan.dedup);
    let out = two_path_join_with(&r, &s, &plan, a.counts, &opts)?;
    let (ld, rd) = (&r.base().left_dict, &s.base().left_dict);
    let mut rows: Vec<Vec<String>> = out
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut row = vec![decode(ld, t[0]), decode(rd, t[1])];
            if let Some(c) = out.counts() {
                row.push(c[i].to_string());
            }
            row
        })
        .collect();
    rows.sort_by(|x, y| raw_tuple_cmp(&x[..2], &y[..2]));
    emit(rows)?;
    Ok(ExitCode::SUCCESS)
}

pub fn star(a: &StarArgs) -> Result<ExitCode> {
    if !(2..=4).contains(&a.rels.len()) {
        bail!("star needs 2 to 4 relations, got {}", a.rels.len());
    }
    let rels: Vec<IndexedRelation> = data::load_shared(&a.rels)?.into_iter().map(IndexedRelation::build).collect();
    let refs: Vec<&IndexedRelation> = rels.iter().collect();
    let (d1, d2) = match (a.delta1, a.delta2) {
        (Some(d1), Some(d2)) => (d1, d2),
        _ => {
            let p = Planner::closed_form(refs[0], refs[1]);
            (p.delta1, p.delta2)
        }
    };
    eprintln!("# plan delta1={d1} delta2={d2}");
    let opts = JoinOptions {
        cores: a.cores.max(1),
        star_row_cap: a.row_cap,
        ..JoinOptions::default()
    };
    let out = star_join_with(&refs, d1, d2, a.counts, &opts)?;
    let mut rows: Vec<Vec<String>> = out
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut row: Vec<String> =
                t.iter().zip(&refs).map(|(&v, r)| decode(&r.base().left_dict, v)).collect();
            if let Some(c) = out.counts() {
                row.push(c[i].to_string());
            }
            row
        })
        .collect();
    let k = refs.len();
    rows.sort_by(|x, y| raw_tuple_cmp(&x[..k], &y[..k]));
    emit(rows)?;
    Ok(ExitCode::SUCCESS)
}

fn ssj_config(calibration: Option<&std::path::Path>, cores: usize, prefix_cap: usize) -> Result<SsjConfig> {
    Ok(SsjConfig {
        planner: data::planner(calibration, cores)?,
        join: data::join_options(cores, None),
        prefix_cap,
        ..SsjConfig::default()
    })
}

pub fn ssj_cmd(a: &SsjArgs) -> Result<ExitCode> {
    let rel = data::load(&a.input)?;
    let family = SetFamily::from_relation(&rel);
    let cfg = ssj_config(a.calibration.as_deref(), a.cores, a.prefix_cap)?;
    let method = match a.method {
        SsjMethodArg::Mmjoin => SsjMethod::MmJoin,
        SsjMethodArg::Sizeaware => SsjMethod::SizeAware,
        SsjMethodArg::SizeawarePp => SsjMethod::SizeAwarePp,
    };
    let mut pairs = ssj(&family, a.c, method, &cfg)?;
    let dict = &rel.left_dict;
    if a.ordered {
        sort_by_overlap(&mut pairs);
        emit(pairs.iter().map(|p| vec![decode(dict, p.a), decode(dict, p.b), p.overlap.to_string()]))?;
    } else {
        let mut rows: Vec<Vec<String>> = pairs
            .iter()
            .map(|p| {
                let (x, y) = (decode(dict, p.a), decode(dict, p.b));
                // keep the smaller raw value first
                let (x, y) = if data::raw_cmp(&x, &y).is_gt() { (y, x) } else { (x, y) };
                vec![x, y, p.overlap.to_string()]
            })
            .collect();
        rows.sort_by(|x, y| raw_tuple_cmp(&x[..2], &y[..2]));
        emit(rows)?;
    }
    Ok(ExitCode::SUCCESS)
}

pub fn scj(a: &ScjArgs) -> Result<ExitCode> {
    let rel = data::load(&a.input)?;
    let family = SetFamily::from_relation(&rel);
    let cfg = ssj_config(a.calibration.as_deref(), a.cores, 0)?;
    let pairs = scj_join_project(&family, &cfg)?;
    let dict = &rel.left_dict;
    let mut rows: Vec<Vec<String>> = pairs
        .iter()
        .map(|&(x, y)| vec![decode(dict, x), decode(dict, y), family.set(x as usize).len().to_string()])
        .collect();
    rows.sort_by(|x, y| raw_tuple_cmp(&x[..2], &y[..2]));
    emit(rows)?;
    Ok(ExitCode::SUCCESS)
}

pub fn bsi(a: &BsiArgs) -> Result<ExitCode> {
    let (r, s) = read_join_pair(&a.left, &a.right).context("reading input relations")?;
    let (r, s) = (IndexedRelation::build(r), IndexedRelation::build(s));
    let file = File::open(&a.workload).with_context(|| format!("opening {}", a.workload.display()))?;
    let mut workload = parse_bsi_workload(BufReader::new(file)).context("reading workload")?;
    workload.sort_by_key(|q| q.arrival_micros);
    if workload.is_empty() {
        eprintln!("no queries");
        return Ok(ExitCode::SUCCESS);
    }
    let arrivals: Vec<f64> = workload.iter().map(|q| q.arrival_micros as f64 * 1e-6).collect();
    let span = arrivals[arrivals.len() - 1] - arrivals[0];
    let rate = if span > 0.0 { (arrivals.len() - 1) as f64 / span } else { arrivals.len() as f64 };
    let n = r.len() + s.len();
    let batch = a.batch.unwrap_or_else(|| bsi_batch_size(rate, n)).max(1);

    let planner = data::planner(a.calibration.as_deref(), a.cores)?;
    let opts = data::join_options(a.cores, None);
    let ids: Vec<Option<(u32, u32)>> = workload
        .iter()
        .map(|q| Some((r.base().left_dict.id(&q.a)?, s.base().left_dict.id(&q.b)?)))
        .collect();
    let mut answers = Vec::with_capacity(ids.len());
    let mut busy = 0.0;
    for chunk in ids.chunks(batch) {
        let known: Vec<(u32, u32)> = chunk.iter().flatten().copied().collect();
        let start = Instant::now();
        let mut got = bsi_answer_batch(&r, &s, &known, &planner, &opts)?.into_iter();
        busy += start.elapsed().as_secs_f64();
        answers.extend(chunk.iter().map(|q| q.and_then(|_| got.next().flatten())));
    }
    emit(workload.iter().zip(&answers).map(|(q, ans)| {
        let v = match ans {
            Some(true) => "true",
            Some(false) => "false",
            None => "unknown",
        };
        vec![q.a.clone(), q.b.clone(), v.to_owned()]
    }))?;

    // per-batch cost model scaled from the measured batches
    let batches = answers.len().div_ceil(batch) as f64;
    let per_batch = busy / batches;
    let cost = |c: usize| per_batch * (c as f64 / batch as f64).cbrt();
    let report = bsi_simulate(&arrivals, batch, a.machines, cost)?;
    eprintln!(
        "# batch {} batches {} rate {:.1}/s mean_delay {:.6}s max_delay {:.6}s parallel_units {:.3}",
        batch, report.batches, rate, report.mean_delay, report.max_delay, report.parallel_units
    );
    if a.sweep {
        let mut c = 1;
        while c <= 2 * batch.max(1) {
            let rep = bsi_simulate(&arrivals, c, a.machines, cost)?;
            eprintln!("# sweep C={c} mean_delay {:.6}s", rep.mean_delay);
            c *= 2;
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub fn calibrate(a: &CalibrateArgs) -> Result<ExitCode> {
    if a.step == 0 || a.max_dim < a.step {
        bail!("need 0 < step <= max-dim");
    }
    let config = CalibrationConfig {
        probe_dims: (1..=a.max_dim / a.step).map(|i| i * a.step).collect(),
        cores: a.cores.clone(),
        runs: a.runs.max(1),
        seed: a.seed,
        ..CalibrationConfig::default()
    };
    eprintln!("seed {}: probing {} dimensions x {} core counts", a.seed, config.probe_dims.len(), config.cores.len());
    let table = run_calibration(&config)?;
    table.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    eprintln!("wrote {} entries to {}", table.len(), a.out.display());
    Ok(ExitCode::SUCCESS)
}
