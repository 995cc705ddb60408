//! Plain-text trace format.
//!
//! ```text
//! # oppaccess-trace v1
//! # any comment
//! 0.00731,0
//! 0.0412,2
//! # segment 1
//! 0.00083,1
//! ```
//!
//! One idle duration in decimal seconds per line, optionally followed by a
//! comma and a 0-based state index. Lines starting with `#` are comments; a
//! `# segment` comment marks a schedule boundary before the next data line.
//! Either every data line carries a state or none does.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::smmpp::IdleTrace;

pub const TRACE_HEADER: &str = "# oppaccess-trace v1";
const SEGMENT_MARK: &str = "# segment";

/// Write `trace`, with `comments` emitted as `#` lines after the header.
pub fn write_trace<W: Write>(mut w: W, trace: &IdleTrace, comments: &[String]) -> Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for c in comments {
        for line in c.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    let starts = trace.segment_starts();
    let mut next_segment = 1;
    for (i, d) in trace.durations().iter().enumerate() {
        if starts.get(next_segment) == Some(&i) {
            writeln!(w, "{SEGMENT_MARK} {next_segment}")?;
            next_segment += 1;
        }
        match trace.states() {
            Some(s) => writeln!(w, "{d},{}", s[i])?,
            None => writeln!(w, "{d}")?,
        }
    }
    w.flush()?;
    Ok(())
}

/// Parse a trace. The header line is optional so externally produced
/// files of bare durations are accepted.
pub fn read_trace<R: BufRead>(r: R) -> Result<IdleTrace> {
    let mut durations = Vec::new();
    let mut states: Vec<usize> = Vec::new();
    let mut labeled: Option<bool> = None;
    let mut starts = vec![0];
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if text.starts_with('#') {
            if text.starts_with(SEGMENT_MARK) && !durations.is_empty() && starts.last() != Some(&durations.len()) {
                starts.push(durations.len());
            }
            continue;
        }
        let mut fields = text.split(',').map(str::trim);
        let d = fields.next().unwrap_or_default();
        let d: f64 = d.parse().map_err(|_| parse_err(lineno, format!("`{d}` is not a duration")))?;
        if !(d.is_finite() && d > 0.0) {
            return Err(parse_err(lineno, format!("duration {d} is not positive")));
        }
        let state = fields
            .next()
            .map(|s| s.parse::<usize>().map_err(|_| parse_err(lineno, format!("`{s}` is not a state index"))))
            .transpose()?;
        if fields.next().is_some() {
            return Err(parse_err(lineno, "expected `duration[,state]`".into()));
        }
        match (labeled, state) {
            (None, s) => labeled = Some(s.is_some()),
            (Some(true), None) | (Some(false), Some(_)) => {
                return Err(parse_err(lineno, "state column present on some lines only".into()))
            }
            _ => {}
        }
        durations.push(d);
        if let Some(s) = state {
            states.push(s);
        }
    }
    if durations.is_empty() {
        return Err(Error::Data("trace has no data lines".into()));
    }
    // A boundary marker after the last data line has nothing to start.
    starts.retain(|s| *s < durations.len());
    IdleTrace::new(durations, labeled.unwrap_or(false).then_some(states), starts)
}

fn parse_err(line: usize, message: String) -> Error {
    Error::Parse { line, message }
}
