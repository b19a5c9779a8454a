//! CSV output. Comma separated, one header row, LF line endings, floats
//! in `{:.16e}` so they parse back to the same bits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::bounds::BoundBreakdown;
use crate::error::{Error, Result};
use crate::policies::RunResult;

use super::aggregate::Aggregate;
use super::run::SeedRun;

pub const AGGREGATE_HEADER: &str = "t,mean,ci_low,ci_high";
pub const RAW_HEADER: &str = "t,seed,agent,inst_regret,cum_regret";
pub const SUMMARY_HEADER: &str = "seed,policy,agents,gap,final_mean_regret,freeze_phase,communications";
pub const BOUNDS_HEADER: &str = "T,projected_linucb,constant,exploration,total,single_agent_total";

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_aggregate<W: Write>(agg: &Aggregate, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{AGGREGATE_HEADER}")?;
    for t in 0..agg.horizon() {
        writeln!(
            w,
            "{},{},{},{}",
            t + 1,
            fmt_f64(agg.mean[t]),
            fmt_f64(agg.ci_low[t]),
            fmt_f64(agg.ci_high[t])
        )?;
    }
    Ok(())
}

pub fn write_raw<W: Write>(results: &[RunResult], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{RAW_HEADER}")?;
    for r in results {
        for (agent, (inst, cum)) in r.inst_regret.iter().zip(&r.cum_regret).enumerate() {
            for (t, (x, c)) in inst.iter().zip(cum).enumerate() {
                writeln!(w, "{},{},{agent},{},{}", t + 1, r.seed_index, fmt_f64(*x), fmt_f64(*c))?;
            }
        }
    }
    Ok(())
}

pub fn write_summary<W: Write>(runs: &[SeedRun], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for s in runs {
        let r = &s.result;
        let freeze = r.freeze_phase.map(|j| j.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{freeze},{}",
            s.seed_index,
            r.policy,
            r.n_agents(),
            fmt_f64(s.gap),
            fmt_f64(r.final_mean_regret()),
            r.communications
        )?;
    }
    Ok(())
}

/// One row per horizon in `ts`.
pub fn write_bounds<W: Write>(rows: &[(u64, BoundBreakdown, f64)], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{BOUNDS_HEADER}")?;
    for (t, b, single) in rows {
        writeln!(
            w,
            "{t},{},{},{},{},{}",
            fmt_f64(b.projected_linucb),
            fmt_f64(b.constant),
            fmt_f64(b.exploration),
            fmt_f64(b.total),
            fmt_f64(*single)
        )?;
    }
    Ok(())
}

/// Create `path` and hand a buffered writer to `f`.
pub fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    f(&mut w).map_err(io)?;
    w.flush().map_err(io)
}

fn rows<'a>(text: &'a str, header: &str) -> Result<impl Iterator<Item = (usize, Vec<&'a str>)>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == header => {}
        other => return Err(Error::Parse(format!("expected header {header:?}, found {other:?}"))),
    }
    let width = header.split(',').count();
    let parsed: Vec<(usize, Vec<&str>)> = lines.enumerate().map(|(i, l)| (i + 2, l.split(',').collect())).collect();
    if let Some((line, f)) = parsed.iter().find(|(_, f)| f.len() != width) {
        return Err(Error::Parse(format!("line {line}: {} fields, expected {width}", f.len())));
    }
    Ok(parsed.into_iter())
}

fn field<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Parse(format!("line {line}: cannot parse {s:?}")))
}

/// Parse an aggregate CSV. The sample count is not stored and comes back 0.
pub fn parse_aggregate(text: &str) -> Result<Aggregate> {
    let mut agg = Aggregate {
        mean: Vec::new(),
        ci_low: Vec::new(),
        ci_high: Vec::new(),
        samples: 0,
    };
    for (line, f) in rows(text, AGGREGATE_HEADER)? {
        let t: usize = field(f[0], line)?;
        if t != agg.mean.len() + 1 {
            return Err(Error::Parse(format!("line {line}: t={t} out of sequence")));
        }
        agg.mean.push(field(f[1], line)?);
        agg.ci_low.push(field(f[2], line)?);
        agg.ci_high.push(field(f[3], line)?);
    }
    Ok(agg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawRow {
    pub t: u64,
    pub seed: u64,
    pub agent: usize,
    pub inst_regret: f64,
    pub cum_regret: f64,
}

pub fn parse_raw(text: &str) -> Result<Vec<RawRow>> {
    rows(text, RAW_HEADER)?
        .map(|(line, f)| {
            Ok(RawRow {
                t: field(f[0], line)?,
                seed: field(f[1], line)?,
                agent: field(f[2], line)?,
                inst_regret: field(f[3], line)?,
                cum_regret: field(f[4], line)?,
            })
        })
        .collect()
}
