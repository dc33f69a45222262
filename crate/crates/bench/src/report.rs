//! Result files: `results.csv`, `runs.jsonl`, per-run traces and curves.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use pdsds_core::trace::{write_jsonl, TraceHeader};

use crate::config::SolverKind;
use crate::experiment::{RunOutput, RunReport};
use crate::BenchError;

pub const RESULTS_CSV: &str = "results.csv";
pub const RUNS_JSONL: &str = "runs.jsonl";
pub const CSV_HEADER: [&str; 9] = ["solver", "n", "N", "eps", "seed", "Err", "fval", "k", "seconds"];

/// Writes the results table with one row per run.
pub fn write_csv<W: Write>(out: W, reports: &[RunReport]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in reports {
        w.write_record([
            r.solver.name().to_string(),
            r.n.to_string(),
            r.batches.to_string(),
            format!("{:e}", r.eps),
            r.seed.to_string(),
            format!("{:.12e}", r.err),
            format!("{:.12e}", r.fval),
            r.k.to_string(),
            format!("{:.6}", r.seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn stem(r: &RunReport) -> String {
    format!("{}_n{}_N{}_eps{:e}_seed{}", r.solver, r.n, r.batches, r.eps, r.seed)
}

/// Writes every output file of `runs` under `dir` and returns the paths.
pub fn write_outputs(dir: &Path, runs: &[RunOutput]) -> Result<Vec<PathBuf>, BenchError> {
    fs::create_dir_all(dir.join("traces"))?;
    let mut written = Vec::new();
    let reports: Vec<RunReport> = runs.iter().map(|r| r.report.clone()).collect();

    let csv_path = dir.join(RESULTS_CSV);
    write_csv(BufWriter::new(File::create(&csv_path)?), &reports)?;
    written.push(csv_path);

    let jsonl = dir.join(RUNS_JSONL);
    let mut w = BufWriter::new(File::create(&jsonl)?);
    for r in &reports {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    written.push(jsonl);

    for run in runs {
        let r = &run.report;
        let trace = dir.join("traces").join(format!("{}.jsonl", stem(r)));
        let header = TraceHeader {
            solver: r.solver.name().into(),
            seed: Some(r.seed),
            tol: r.eps,
            max_iters: r.k.max(1),
        };
        let mut w = BufWriter::new(File::create(&trace)?);
        write_jsonl(&mut w, &header, &run.records)?;
        w.flush()?;
        written.push(trace);

        let curve = dir.join("traces").join(format!("{}_curve.csv", stem(r)));
        let mut c = csv::Writer::from_path(&curve)?;
        c.write_record(["k", "fval"])?;
        for (k, f) in &run.curve {
            c.write_record([k.to_string(), format!("{f:.12e}")])?;
        }
        c.flush()?;
        written.push(curve);
    }
    Ok(written)
}

pub fn read_runs_jsonl(path: &Path) -> Result<Vec<RunReport>, BenchError> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Medians over seeds for one `(solver, n, N, eps)` group.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub solver: SolverKind,
    pub n: usize,
    pub batches: usize,
    pub eps: f64,
    pub runs: usize,
    pub converged: usize,
    pub err: f64,
    pub fval: f64,
    pub k: f64,
    pub seconds: f64,
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty set");
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

pub fn summarize(reports: &[RunReport]) -> Vec<Summary> {
    // eps sorts descending within a group via its negated bit pattern
    let mut groups: BTreeMap<(SolverKind, usize, usize, i64), Vec<&RunReport>> = BTreeMap::new();
    for r in reports {
        let key = (r.solver, r.n, r.batches, -(r.eps.to_bits() as i64));
        groups.entry(key).or_default().push(r);
    }
    groups
        .into_values()
        .map(|g| {
            let pick = |f: fn(&RunReport) -> f64| median(&mut g.iter().map(|r| f(r)).collect::<Vec<_>>());
            Summary {
                solver: g[0].solver,
                n: g[0].n,
                batches: g[0].batches,
                eps: g[0].eps,
                runs: g.len(),
                converged: g.iter().filter(|r| r.converged).count(),
                err: pick(|r| r.err),
                fval: pick(|r| r.fval),
                k: pick(|r| r.k as f64),
                seconds: pick(|r| r.seconds),
            }
        })
        .collect()
}

pub fn render_table(rows: &[Summary]) -> String {
    let mut s = format!(
        "{:<10} {:>6} {:>3} {:>8} {:>5} {:>12} {:>12} {:>8} {:>9}\n",
        "solver", "n", "N", "eps", "runs", "Err", "fval", "k", "seconds"
    );
    for r in rows {
        s += &format!(
            "{:<10} {:>6} {:>3} {:>8.0e} {:>2}/{:<2} {:>12.4e} {:>12.4e} {:>8.0} {:>9.3}\n",
            r.solver.name(),
            r.n,
            r.batches,
            r.eps,
            r.converged,
            r.runs,
            r.err,
            r.fval,
            r.k,
            r.seconds
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(eps: f64, seed: u64, err: f64) -> RunReport {
        RunReport {
            solver: SolverKind::Minibatch,
            n: 64,
            batches: 2,
            eps,
            seed,
            err,
            fval: 1.0,
            k: 10,
            seconds: 0.0,
            lambda: 0.1,
            converged: true,
            objective: 2.0,
            spread: 0.0,
        }
    }

    #[test]
    fn csv_header_is_exact() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[report(1e-5, 0, 0.5)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "solver,n,N,eps,seed,Err,fval,k,seconds");
        assert!(text.lines().nth(1).unwrap().starts_with("minibatch,64,2,1e-5,0,"));
    }

    #[test]
    fn medians_by_group() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        let rows = summarize(&[report(1e-6, 0, 1.0), report(1e-5, 0, 4.0), report(1e-6, 1, 3.0)]);
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[0].eps, rows[0].err), (1e-5, 4.0));
        assert_eq!((rows[1].eps, rows[1].err, rows[1].runs), (1e-6, 2.0, 2));
    }
}
