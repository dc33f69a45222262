//! Stopping rules and JSONL iteration traces.

use std::io::{BufRead, Write};

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Stops when `‖x^{k+1} − x^k‖ / ‖x^k‖ < tol` or after `max_iters` steps.
///
/// When `‖x^k‖ = 0` the absolute change is compared instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub tol: f64,
    pub max_iters: usize,
}

impl StopRule {
    pub const DEFAULT_MAX_ITERS: usize = 40_000;

    pub fn new(tol: f64, max_iters: usize) -> Self {
        Self { tol, max_iters }
    }

    pub fn is_met(&self, change: f64) -> bool {
        change < self.tol
    }
}

impl Default for StopRule {
    fn default() -> Self {
        Self::new(1e-6, Self::DEFAULT_MAX_ITERS)
    }
}

pub fn relative_change(prev: ArrayView1<f64>, next: ArrayView1<f64>) -> f64 {
    let mut diff = 0.0;
    let mut base = 0.0;
    for (a, b) in prev.iter().zip(next.iter()) {
        diff += (b - a) * (b - a);
        base += a * a;
    }
    if base == 0.0 {
        diff.sqrt()
    } else {
        (diff / base).sqrt()
    }
}

/// Per-step diagnostics. Absent fields are omitted from the JSON output.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub change: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks_updated: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_selected: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_agents: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spread: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl TraceRecord {
    pub fn at(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }
}

/// First line of every trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub solver: String,
    pub seed: Option<u64>,
    pub tol: f64,
    pub max_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Header(TraceHeader),
    Step(TraceRecord),
}

pub fn write_jsonl<W: Write>(out: &mut W, header: &TraceHeader, records: &[TraceRecord]) -> Result<()> {
    serde_json::to_writer(&mut *out, &Line::Header(header.clone()))?;
    out.write_all(b"\n")?;
    for r in records {
        serde_json::to_writer(&mut *out, &Line::Step(r.clone()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<(Option<TraceHeader>, Vec<TraceRecord>)> {
    let mut header = None;
    let mut records = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Line>(&line)? {
            Line::Header(h) => header = Some(h),
            Line::Step(r) => records.push(r),
        }
    }
    Ok((header, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn zero_iterate_uses_absolute_change() {
        assert_eq!(relative_change(array![0.0, 0.0].view(), array![3.0, 4.0].view()), 5.0);
        assert_eq!(relative_change(array![3.0, 4.0].view(), array![3.0, 4.0].view()), 0.0);
        assert!((relative_change(array![2.0].view(), array![3.0].view()) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn omitted_fields_are_absent() {
        let mut r = TraceRecord::at(3);
        r.residual = Some(0.5);
        let mut buf = Vec::new();
        let header = TraceHeader {
            solver: "km".into(),
            seed: Some(4),
            tol: 1e-6,
            max_iters: 10,
        };
        write_jsonl(&mut buf, &header, &[r]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].contains("\"type\":\"header\""));
        assert_eq!(lines[1], r#"{"type":"step","k":3,"residual":0.5}"#);
    }

    proptest! {
        #[test]
        fn jsonl_round_trip(ks in proptest::collection::vec(0usize..1000, 0..8),
                            res in proptest::option::of(-1e3f64..1e3),
                            seed in proptest::option::of(0u64..u64::MAX)) {
            let records: Vec<TraceRecord> = ks.iter().map(|&k| TraceRecord {
                k, residual: res, seed, blocks_updated: Some(vec![k % 3]), ..TraceRecord::default()
            }).collect();
            let header = TraceHeader { solver: "x".into(), seed, tol: 1e-8, max_iters: 5 };
            let mut buf = Vec::new();
            write_jsonl(&mut buf, &header, &records).unwrap();
            let (h, back) = read_jsonl(buf.as_slice()).unwrap();
            prop_assert_eq!(h, Some(header));
            prop_assert_eq!(back, records);
        }
    }
}
