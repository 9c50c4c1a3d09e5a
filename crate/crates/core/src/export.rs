//! CSV artifacts. Every writer accepts an optional provenance line that is
//! emitted first as a `#` comment.

use std::io::{Read, Write};

use crate::analysis::{DisagreementSeries, RhoEstimate, RunMetrics};
use crate::communication::ActiveSet;
use crate::error::{invalid, Error, Result};
use crate::geometry::Point;
use crate::iteration::{IterationRecord, Trace};
use crate::Scalar;

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

fn writer<W: Write>(mut out: W, comment: Option<&str>) -> Result<csv::Writer<W>> {
    if let Some(c) = comment {
        writeln!(out, "# {c}").map_err(io_err)?;
    }
    Ok(csv::WriterBuilder::new().from_writer(out))
}

fn opt<S: Scalar>(v: Option<S>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn flag(v: Option<bool>) -> String {
    match v {
        Some(b) => b.to_string(),
        None => "n/a".to_string(),
    }
}

pub fn trace_header(dim: usize) -> Vec<String> {
    let mut h = vec!["k".to_string(), "agent".to_string()];
    for prefix in ["x", "v", "d", "e"] {
        h.extend((0..dim).map(|j| format!("{prefix}_{j}")));
    }
    h.push("alpha".to_string());
    h
}

/// One row per `(k, agent)`: post-update `x`, then `v`, `d`, `e` and the
/// stepsize.
pub fn write_trace_csv<S: Scalar, W: Write>(out: W, trace: &Trace<S>, comment: Option<&str>) -> Result<()> {
    let dim = trace.initial.first().map_or(0, Point::dim);
    let mut w = writer(out, comment)?;
    w.write_record(trace_header(dim)).map_err(io_err)?;
    for r in &trace.records {
        for i in 0..r.x.len() {
            let mut row = vec![r.k.to_string(), i.to_string()];
            for p in [&r.x[i], &r.v[i], &r.d[i], &r.e[i]] {
                row.extend(p.coords().iter().map(|c| c.to_string()));
            }
            row.push(r.alpha.to_string());
            w.write_record(&row).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

/// Parses a trace written by [`write_trace_csv`]. Weight matrices and
/// activations are not part of the file, so the returned records carry
/// neither.
pub fn read_trace_csv<S: Scalar, R: Read>(input: R, num_agents: usize, dim: usize) -> Result<Vec<IterationRecord<S>>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let expected = trace_header(dim);
    let header = reader.headers().map_err(io_err)?;
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(invalid(format!("trace header does not match dimension {dim}")));
    }
    let mut records: Vec<IterationRecord<S>> = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(io_err)?;
        let bad = |what: &str| invalid(format!("trace row {}: {what}", line + 1));
        let nums: Vec<f64> = row.iter().map(|f| f.parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad("unparsable number"))?;
        let k = nums[0] as usize;
        let agent = nums[1] as usize;
        let vec = |block: usize| Point::raw(nums[2 + block * dim..2 + (block + 1) * dim].iter().map(|&c| S::of(c)).collect());
        if agent == 0 {
            if k != records.len() {
                return Err(bad("steps are not contiguous from 0"));
            }
            records.push(IterationRecord {
                k,
                x: Vec::new(),
                v: Vec::new(),
                d: Vec::new(),
                e: Vec::new(),
                weights: None,
                active: ActiveSet::default(),
                alpha: S::of(nums[2 + 4 * dim]),
            });
        }
        let rec = records.last_mut().ok_or_else(|| bad("first row is not agent 0"))?;
        if rec.k != k || rec.x.len() != agent || agent >= num_agents {
            return Err(bad("agent rows out of order"));
        }
        rec.x.push(vec(0));
        rec.v.push(vec(1));
        rec.d.push(vec(2));
        rec.e.push(vec(3));
    }
    if records.last().is_some_and(|r| r.x.len() != num_agents) {
        return Err(invalid("trace ends with an incomplete step"));
    }
    Ok(records)
}

pub fn write_metrics_csv<S: Scalar, W: Write>(out: W, metrics: &RunMetrics<S>, comment: Option<&str>) -> Result<()> {
    let mut w = writer(out, comment)?;
    w.write_record([
        "k",
        "consensus_max",
        "pairwise_max",
        "f_gap",
        "dist_y_to_X",
        "lemma1_ok",
        "lemma9_ok",
        "lemma6b_ok",
    ])
    .map_err(io_err)?;
    for r in &metrics.rows {
        w.write_record([
            r.k.to_string(),
            r.consensus_max.to_string(),
            r.pairwise_max.to_string(),
            opt(r.f_gap),
            opt(r.dist_y_to_x),
            r.verdicts.lemma1.to_string(),
            flag(r.verdicts.lemma9),
            flag(r.verdicts.lemma6b),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn write_rho_csv<S: Scalar, W: Write>(out: W, series: &[DisagreementSeries<S>], comment: Option<&str>) -> Result<()> {
    let mut w = writer(out, comment)?;
    w.write_record(["s", "k", "rho"]).map_err(io_err)?;
    for s in series {
        for (offset, v) in s.values.iter().enumerate() {
            w.write_record([s.s.to_string(), (s.s + offset).to_string(), v.to_string()]).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn write_montecarlo_csv<S: Scalar, W: Write>(out: W, estimates: &[RhoEstimate<S>], comment: Option<&str>) -> Result<()> {
    let mut w = writer(out, comment)?;
    w.write_record(["k", "s", "mean_rho", "stderr", "trials"]).map_err(io_err)?;
    for e in estimates {
        w.write_record([e.k.to_string(), e.s.to_string(), e.mean.to_string(), e.stderr.to_string(), e.trials.to_string()])
            .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::communication::{BackboneGraph, CommModel, CommParams, Topology};
    use crate::iteration::{run, RunOptions, StepSchedule};
    use crate::problems::{builtin, ProblemParams, DISTINCT_BOXES_ABS};

    #[test]
    fn trace_csv_roundtrip_preserves_values() {
        let prob = builtin::<f64>(DISTINCT_BOXES_ABS, &ProblemParams::default()).unwrap();
        let model = CommModel::new(
            BackboneGraph::topology(Topology::Ring, 3).unwrap(),
            CommParams::new(0.25, 0.5, 1.0, 1.0).unwrap(),
        )
        .unwrap();
        let trace = run(&prob, &model, &StepSchedule::HarmonicLog, 25, 4, RunOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &trace, Some("config_hash=abc")).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# config_hash=abc\nk,agent,x_0,x_1,v_0,v_1,d_0,d_1,e_0,e_1,alpha\n"));
        let back: Vec<IterationRecord<f64>> = read_trace_csv(buf.as_slice(), 3, 2).unwrap();
        assert_eq!(back.len(), 25);
        for (a, b) in back.iter().zip(&trace.records) {
            assert_eq!((&a.x, &a.v, &a.d, &a.e, a.alpha), (&b.x, &b.v, &b.d, &b.e, b.alpha));
        }
        assert!(read_trace_csv::<f64, _>(buf.as_slice(), 3, 3).is_err());
    }

    #[test]
    fn truncated_trace_rejected() {
        let csv = "k,agent,x_0,v_0,d_0,e_0,alpha\n0,0,1,1,1,0,0.1\n";
        assert!(read_trace_csv::<f64, _>(csv.as_bytes(), 2, 1).is_err());
        let gap = "k,agent,x_0,v_0,d_0,e_0,alpha\n1,0,1,1,1,0,0.1\n1,1,1,1,1,0,0.1\n";
        assert!(read_trace_csv::<f64, _>(gap.as_bytes(), 2, 1).is_err());
    }
}
