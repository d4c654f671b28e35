//! Trace records, their line-oriented text form, and the model-property
//! checks that every well-formed run must pass.
//!
//! A trace file doubles as an explicit schedule: the decision records (start,
//! deliver, timeout, output, crash) replay through the kernel; communicate and
//! exit records are consequences and are ignored on replay.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use super::{Decision, Info, ProcessId, RunResult};
use crate::sos::ValueId;
use crate::text::{parse_output_set, ParseError};

/// One line of a run trace. Record order is the global sequence; the rendered
/// form prefixes each line with its 1-based sequence number.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TraceRecord {
    Start { process: ProcessId },
    Communicate { process: ProcessId, info: Info },
    Deliver { recipient: ProcessId, sender: ProcessId, info: Info },
    Timeout { process: ProcessId, wait_id: u32, all_arrived: bool },
    Output { process: ProcessId, value: ValueId },
    Crash { process: ProcessId },
    Exit { process: ProcessId },
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceRecord::Start { process } => write!(f, "start {process}"),
            TraceRecord::Communicate { process, info } => {
                write!(f, "communicate {process} {info}")
            }
            TraceRecord::Deliver {
                recipient,
                sender,
                info,
            } => write!(f, "deliver {recipient} {sender} {info}"),
            TraceRecord::Timeout {
                process,
                wait_id,
                all_arrived,
            } => write!(f, "timeout {process} w{wait_id} {all_arrived}"),
            TraceRecord::Output { process, value } => write!(f, "output {process} {value}"),
            TraceRecord::Crash { process } => write!(f, "crash {process}"),
            TraceRecord::Exit { process } => write!(f, "exit {process}"),
        }
    }
}

/// Renders a trace as line-delimited records: `<seq> <kind> <fields...>`.
pub fn format_trace(trace: &[TraceRecord]) -> String {
    let mut out = String::new();
    for (i, rec) in trace.iter().enumerate() {
        out.push_str(&format!("{} {rec}\n", i + 1));
    }
    out
}

/// The scheduler decisions embedded in a trace, in order. Feeding them back as
/// an explicit schedule reproduces the run.
pub fn decisions_of(trace: &[TraceRecord]) -> Vec<Decision> {
    trace
        .iter()
        .filter_map(|rec| match rec {
            TraceRecord::Start { process } => Some(Decision::Start(*process)),
            TraceRecord::Deliver {
                recipient,
                sender,
                info,
            } => Some(Decision::Deliver {
                recipient: *recipient,
                sender: *sender,
                info: info.clone(),
            }),
            TraceRecord::Timeout {
                process,
                wait_id,
                all_arrived,
            } => Some(Decision::TimeoutResult {
                process: *process,
                wait_id: *wait_id,
                all_arrived: *all_arrived,
            }),
            TraceRecord::Output { process, .. } => Some(Decision::ReleaseOutput(*process)),
            TraceRecord::Crash { process } => Some(Decision::Crash(*process)),
            TraceRecord::Communicate { .. } | TraceRecord::Exit { .. } => None,
        })
        .collect()
}

fn parse_process(tok: &str, line: usize) -> Result<ProcessId, ParseError> {
    tok.strip_prefix('p')
        .and_then(|rest| rest.parse::<u32>().ok())
        .filter(|id| *id >= 1)
        .map(ProcessId)
        .ok_or_else(|| ParseError {
            line,
            col: 1,
            message: format!("expected a process id like p3, found '{tok}'"),
        })
}

fn parse_info(tok: &str, line: usize) -> Result<Info, ParseError> {
    let err = |message: String| ParseError {
        line,
        col: 1,
        message,
    };
    let (kind, payload) = tok
        .split_once('(')
        .and_then(|(k, rest)| rest.strip_suffix(')').map(|p| (k, p)))
        .ok_or_else(|| err(format!("malformed info '{tok}'")))?;
    match kind {
        "MOVE" => payload
            .parse::<u32>()
            .map(Info::Move)
            .map_err(|_| err(format!("bad MOVE payload '{payload}'"))),
        "OUTPUTSET" => Ok(Info::OutputSet(parse_output_set(payload)?)),
        "CHOICE" => Ok(Info::Choice(parse_output_set(payload)?)),
        "OUTPUT" => payload
            .parse::<u32>()
            .map(|v| Info::Output(ValueId(v)))
            .map_err(|_| err(format!("bad OUTPUT payload '{payload}'"))),
        other => Err(err(format!("unknown info kind '{other}'"))),
    }
}

/// Parses the text form produced by [`format_trace`]. Blank lines, `#`
/// comments, and `result` summary records are skipped, so a captured `run`
/// output replays as-is.
pub fn parse_trace(input: &str) -> Result<Vec<TraceRecord>, ParseError> {
    let mut out = Vec::new();
    for (lineno, raw) in input.lines().enumerate() {
        let line = lineno + 1;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') || text.starts_with("result ") {
            continue;
        }
        let mut tokens = text.split_whitespace();
        let first = tokens.next().unwrap();
        // A leading sequence number is optional on input.
        let kind = if first.chars().all(|c| c.is_ascii_digit()) {
            tokens.next().ok_or_else(|| ParseError {
                line,
                col: 1,
                message: "missing record kind".into(),
            })?
        } else {
            first
        };
        let mut next = |what: &str| {
            tokens.next().ok_or_else(|| ParseError {
                line,
                col: 1,
                message: format!("missing {what}"),
            })
        };
        let rec = match kind {
            "start" => TraceRecord::Start {
                process: parse_process(next("process")?, line)?,
            },
            "communicate" => TraceRecord::Communicate {
                process: parse_process(next("process")?, line)?,
                info: parse_info(next("info")?, line)?,
            },
            "deliver" => TraceRecord::Deliver {
                recipient: parse_process(next("recipient")?, line)?,
                sender: parse_process(next("sender")?, line)?,
                info: parse_info(next("info")?, line)?,
            },
            "timeout" => {
                let process = parse_process(next("process")?, line)?;
                let wait_tok = next("wait id")?;
                let wait_id = wait_tok
                    .strip_prefix('w')
                    .and_then(|rest| rest.parse::<u32>().ok())
                    .ok_or_else(|| ParseError {
                        line,
                        col: 1,
                        message: format!("expected a wait id like w0, found '{wait_tok}'"),
                    })?;
                let arrived_tok = next("outcome")?;
                let all_arrived = match arrived_tok {
                    "true" => true,
                    "false" => false,
                    other => {
                        return Err(ParseError {
                            line,
                            col: 1,
                            message: format!("expected true or false, found '{other}'"),
                        })
                    }
                };
                TraceRecord::Timeout {
                    process,
                    wait_id,
                    all_arrived,
                }
            }
            "output" => {
                let process = parse_process(next("process")?, line)?;
                let value_tok = next("value")?;
                let value = value_tok.parse::<u32>().map(ValueId).map_err(|_| ParseError {
                    line,
                    col: 1,
                    message: format!("bad output value '{value_tok}'"),
                })?;
                TraceRecord::Output { process, value }
            }
            "crash" => TraceRecord::Crash {
                process: parse_process(next("process")?, line)?,
            },
            "exit" => TraceRecord::Exit {
                process: parse_process(next("process")?, line)?,
            },
            other => {
                return Err(ParseError {
                    line,
                    col: 1,
                    message: format!("unknown record kind '{other}'"),
                })
            }
        };
        if let Some(extra) = tokens.next() {
            return Err(ParseError {
                line,
                col: 1,
                message: format!("unexpected trailing '{extra}'"),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

/// A violated communication-model property, with the offending record index.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelViolation {
    #[error("validity violated at record {seq}: {info} from {sender} was never communicated")]
    Validity {
        seq: usize,
        sender: ProcessId,
        info: Info,
    },
    #[error("integrity violated at record {seq}: duplicate delivery of {info} from {sender} to {recipient}")]
    Integrity {
        seq: usize,
        recipient: ProcessId,
        sender: ProcessId,
        info: Info,
    },
    #[error("termination closure violated: correct {missing} never observed {info} from {sender}")]
    Closure {
        missing: ProcessId,
        sender: ProcessId,
        info: Info,
    },
    #[error("crash bound violated: {crashed} crashed, bound {t}")]
    CrashBound { crashed: usize, t: u32 },
}

/// Every observation must have been communicated earlier in the trace.
pub fn check_c_validity(trace: &[TraceRecord]) -> Result<(), ModelViolation> {
    let mut communicated: BTreeSet<(ProcessId, &Info)> = BTreeSet::new();
    for (i, rec) in trace.iter().enumerate() {
        match rec {
            TraceRecord::Communicate { process, info } => {
                communicated.insert((*process, info));
            }
            TraceRecord::Deliver { sender, info, .. }
                if !communicated.contains(&(*sender, info)) =>
            {
                return Err(ModelViolation::Validity {
                    seq: i + 1,
                    sender: *sender,
                    info: info.clone(),
                });
            }
            _ => {}
        }
    }
    Ok(())
}

/// No (sender, info, recipient) triple may be delivered twice.
pub fn check_c_integrity(trace: &[TraceRecord]) -> Result<(), ModelViolation> {
    let mut seen: BTreeSet<(ProcessId, ProcessId, &Info)> = BTreeSet::new();
    for (i, rec) in trace.iter().enumerate() {
        if let TraceRecord::Deliver {
            recipient,
            sender,
            info,
        } = rec
        {
            if !seen.insert((*recipient, *sender, info)) {
                return Err(ModelViolation::Integrity {
                    seq: i + 1,
                    recipient: *recipient,
                    sender: *sender,
                    info: info.clone(),
                });
            }
        }
    }
    Ok(())
}

/// In a quiescent run, every info communicated by a correct process, and
/// every info observed by at least one correct process, must have reached
/// every correct process.
pub fn check_termination_closure(result: &RunResult) -> Result<(), ModelViolation> {
    if !result.quiescent {
        return Ok(());
    }
    let correct: Vec<ProcessId> = (1..=result.n)
        .map(ProcessId)
        .filter(|p| !result.crashed.contains(p))
        .collect();
    let mut obligatory: BTreeSet<(ProcessId, &Info)> = BTreeSet::new();
    for rec in &result.trace {
        match rec {
            TraceRecord::Communicate { process, info } if !result.crashed.contains(process) => {
                obligatory.insert((*process, info));
            }
            TraceRecord::Deliver {
                recipient,
                sender,
                info,
            } if !result.crashed.contains(recipient) => {
                obligatory.insert((*sender, info));
            }
            _ => {}
        }
    }
    let mut delivered: BTreeSet<(ProcessId, ProcessId, &Info)> = BTreeSet::new();
    for rec in &result.trace {
        if let TraceRecord::Deliver {
            recipient,
            sender,
            info,
        } = rec
        {
            delivered.insert((*recipient, *sender, info));
        }
    }
    for (sender, info) in &obligatory {
        for p in &correct {
            if !delivered.contains(&(*p, *sender, info)) {
                return Err(ModelViolation::Closure {
                    missing: *p,
                    sender: *sender,
                    info: (*info).clone(),
                });
            }
        }
    }
    Ok(())
}

/// All model properties at once: validity, integrity, closure, crash bound.
pub fn check_model_properties(result: &RunResult) -> Result<(), ModelViolation> {
    check_c_validity(&result.trace)?;
    check_c_integrity(&result.trace)?;
    check_termination_closure(result)?;
    if result.crashed.len() as u32 > result.t {
        return Err(ModelViolation::CrashBound {
            crashed: result.crashed.len(),
            t: result.t,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sos::OutputSet;

    fn sample_trace() -> Vec<TraceRecord> {
        vec![
            TraceRecord::Start {
                process: ProcessId(1),
            },
            TraceRecord::Communicate {
                process: ProcessId(1),
                info: Info::Move(2),
            },
            TraceRecord::Deliver {
                recipient: ProcessId(2),
                sender: ProcessId(1),
                info: Info::Move(2),
            },
            TraceRecord::Timeout {
                process: ProcessId(1),
                wait_id: 0,
                all_arrived: false,
            },
            TraceRecord::Communicate {
                process: ProcessId(1),
                info: Info::OutputSet(OutputSet::new([ValueId(1), ValueId(2)])),
            },
            TraceRecord::Output {
                process: ProcessId(2),
                value: ValueId(1),
            },
            TraceRecord::Crash {
                process: ProcessId(3),
            },
            TraceRecord::Exit {
                process: ProcessId(2),
            },
        ]
    }

    #[test]
    fn trace_text_round_trip() {
        let trace = sample_trace();
        let text = format_trace(&trace);
        assert_eq!(parse_trace(&text).unwrap(), trace);
        // Sequence numbers are optional on input.
        let without_seq: String = text
            .lines()
            .map(|l| l.split_once(' ').unwrap().1.to_string() + "\n")
            .collect();
        assert_eq!(parse_trace(&without_seq).unwrap(), trace);
    }

    #[test]
    fn decisions_skip_consequence_records() {
        let decisions = decisions_of(&sample_trace());
        assert_eq!(decisions.len(), 5);
        assert!(matches!(decisions[0], Decision::Start(_)));
        assert!(matches!(decisions[4], Decision::Crash(_)));
    }

    #[test]
    fn validity_catches_ghost_delivery() {
        let trace = vec![TraceRecord::Deliver {
            recipient: ProcessId(1),
            sender: ProcessId(2),
            info: Info::Move(1),
        }];
        assert!(matches!(
            check_c_validity(&trace),
            Err(ModelViolation::Validity { .. })
        ));
    }

    #[test]
    fn integrity_catches_duplicate_delivery() {
        let rec = TraceRecord::Deliver {
            recipient: ProcessId(1),
            sender: ProcessId(2),
            info: Info::Move(1),
        };
        assert!(matches!(
            check_c_integrity(&[rec.clone(), rec]),
            Err(ModelViolation::Integrity { .. })
        ));
    }

    #[test]
    fn parse_rejects_junk() {
        assert!(parse_trace("1 frobnicate p1").is_err());
        assert!(parse_trace("deliver p1 p2 MOVE(x)").is_err());
        assert!(parse_trace("timeout p1 w0 maybe").is_err());
    }
}
