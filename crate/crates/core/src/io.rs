//! File formats: grain-track CSV, event logs, initial density specs.
//!
//! Grain tracks are read one step at a time so arbitrarily long files can be
//! summarized in bounded memory.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::kinetic::DensitySpec;
use crate::sim::{EventKind, EventRecord};
use crate::track::{GrainRecord, GrainStep, GrainTrackDataset};

/// Exact header of grain-track files.
pub const GRAINTRACK_HEADER: [&str; 5] = ["step", "time", "grain_id", "sides", "area"];

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Streams grain-track rows as whole steps.
pub struct GraintrackReader<R: Read> {
    records: csv::StringRecordsIntoIter<R>,
    columns: [usize; 5],
    pending: Option<(usize, f64, GrainRecord)>,
    done: bool,
}

impl GraintrackReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, IoError> {
        Self::new(BufReader::new(File::open(path)?))
    }
}

impl<R: Read> GraintrackReader<R> {
    pub fn new(reader: R) -> Result<Self, IoError> {
        let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = csv.headers()?.clone();
        let mut columns = [0usize; 5];
        for (slot, name) in columns.iter_mut().zip(GRAINTRACK_HEADER) {
            *slot = headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| IoError::MissingColumn(name.to_string()))?;
        }
        Ok(Self {
            records: csv.into_records(),
            columns,
            pending: None,
            done: false,
        })
    }

    fn next_row(&mut self) -> Option<Result<(usize, f64, GrainRecord), IoError>> {
        let record = match self.records.next()? {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                return Some(Err(IoError::Parse {
                    line,
                    message: e.to_string(),
                }));
            }
        };
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| {
            let name = GRAINTRACK_HEADER[i];
            record.get(self.columns[i]).ok_or_else(|| IoError::Parse {
                line,
                message: format!("missing value for `{name}`"),
            })
        };
        let parse_err = |name: &str, value: &str| IoError::Parse {
            line,
            message: format!("cannot parse `{name}` from {value:?}"),
        };
        let row = (|| {
            let step_s = field(0)?;
            let step = step_s.parse::<usize>().map_err(|_| parse_err("step", step_s))?;
            let time_s = field(1)?;
            let time = time_s.parse::<f64>().map_err(|_| parse_err("time", time_s))?;
            let id_s = field(2)?;
            let id = id_s.parse::<u64>().map_err(|_| parse_err("grain_id", id_s))?;
            let sides_s = field(3)?;
            let sides = sides_s.parse::<u32>().map_err(|_| parse_err("sides", sides_s))?;
            let area_s = field(4)?;
            let area = area_s.parse::<f64>().map_err(|_| parse_err("area", area_s))?;
            Ok((step, time, GrainRecord { id, sides, area }))
        })();
        Some(row)
    }

    /// Next complete step, or `None` at end of input. Rows of one step must
    /// be contiguous and steps must increase.
    pub fn next_step(&mut self) -> Option<Result<GrainStep, IoError>> {
        if self.done {
            return None;
        }
        let (step, time, first) = match self.pending.take() {
            Some(p) => p,
            None => match self.next_row() {
                Some(Ok(row)) => row,
                Some(Err(e)) => return Some(Err(e)),
                None => {
                    self.done = true;
                    return None;
                }
            },
        };
        let mut grains = vec![first];
        loop {
            match self.next_row() {
                Some(Ok((s, t, g))) if s == step => {
                    if t != time {
                        let line = self.records.reader().position().line();
                        return Some(Err(IoError::Parse {
                            line: line.saturating_sub(1),
                            message: format!("step {step} has inconsistent times {time} and {t}"),
                        }));
                    }
                    grains.push(g);
                }
                Some(Ok((s, t, g))) => {
                    if s < step {
                        let line = self.records.reader().position().line();
                        return Some(Err(IoError::Parse {
                            line: line.saturating_sub(1),
                            message: format!("step {s} follows step {step}"),
                        }));
                    }
                    self.pending = Some((s, t, g));
                    break;
                }
                Some(Err(e)) => return Some(Err(e)),
                None => {
                    self.done = true;
                    break;
                }
            }
        }
        Some(Ok(GrainStep { step, time, grains }))
    }
}

impl<R: Read> Iterator for GraintrackReader<R> {
    type Item = Result<GrainStep, IoError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_step()
    }
}

/// Reads a whole grain-track file. The step spacing is taken from the
/// first two steps.
pub fn read_graintrack(path: impl AsRef<Path>) -> Result<GrainTrackDataset, IoError> {
    read_graintrack_from(BufReader::new(File::open(path)?))
}

pub fn read_graintrack_from(reader: impl Read) -> Result<GrainTrackDataset, IoError> {
    let steps = GraintrackReader::new(reader)?.collect::<Result<Vec<_>, _>>()?;
    let dt = match steps.as_slice() {
        [a, b, ..] => b.time - a.time,
        _ => 0.0,
    };
    Ok(GrainTrackDataset { dt, steps })
}

/// Streams grain-track rows to a writer.
pub struct GraintrackWriter<W: Write> {
    out: csv::Writer<W>,
}

impl GraintrackWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>) -> Result<Self, IoError> {
        Self::new(BufWriter::new(File::create(path)?))
    }
}

impl<W: Write> GraintrackWriter<W> {
    pub fn new(writer: W) -> Result<Self, IoError> {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        out.write_record(GRAINTRACK_HEADER)?;
        Ok(Self { out })
    }

    pub fn write_step(&mut self, step: &GrainStep) -> Result<(), IoError> {
        self.write_grains(step.step, step.time, &step.grains)
    }

    pub fn write_grains(
        &mut self,
        step: usize,
        time: f64,
        grains: &[GrainRecord],
    ) -> Result<(), IoError> {
        let (step, time) = (step.to_string(), time.to_string());
        for g in grains {
            self.out.write_record([
                step.as_str(),
                time.as_str(),
                &g.id.to_string(),
                &g.sides.to_string(),
                &g.area.to_string(),
            ])?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), IoError> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn write_graintrack(dataset: &GrainTrackDataset, path: impl AsRef<Path>) -> Result<(), IoError> {
    let mut w = GraintrackWriter::create(path)?;
    for step in &dataset.steps {
        w.write_step(step)?;
    }
    w.finish()
}

/// Event log as CSV: `time,kind,l,vanished,mutations`, with mutations
/// written as `id:from>to` separated by `;`.
pub fn write_events(events: &[EventRecord], writer: impl Write) -> Result<(), IoError> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    out.write_record(["time", "kind", "l", "vanished", "mutations"])?;
    for e in events {
        let (kind, l) = match e.kind {
            EventKind::Boundary { l } => ("boundary", l.to_string()),
            EventKind::Interior => ("interior", String::new()),
        };
        let mutations = e
            .mutations
            .iter()
            .map(|m| format!("{}:{}>{}", m.id, m.from, m.to))
            .collect::<Vec<_>>()
            .join(";");
        out.write_record([
            e.time.to_string(),
            kind.to_string(),
            l,
            e.vanished.map(|v| v.to_string()).unwrap_or_default(),
            mutations,
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_density_specs(path: impl AsRef<Path>) -> Result<Vec<DensitySpec>, IoError> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Reads a single-column (or `k,value`) CSV of nonnegative numbers, as used
/// for topology frequencies and neighbour distributions. Lines starting with
/// `#` and a non-numeric header row are skipped.
pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>, IoError> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(File::open(path)?));
    let mut out = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let Some(value) = record.iter().last() else {
            continue;
        };
        match value.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(IoError::Parse {
                    line,
                    message: format!("cannot parse number from {value:?}"),
                })
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "step,time,grain_id,sides,area\n\
        0,0,1,6,0.5\n0,0,2,5,0.25\n1,0.1,1,7,0.6\n";

    #[test]
    fn reads_steps() {
        let ds = read_graintrack_from(SAMPLE.as_bytes()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.steps[0].grains.len(), 2);
        assert_eq!(ds.steps[1].grains[0].sides, 7);
        assert!((ds.dt - 0.1).abs() < 1e-15);
    }

    #[test]
    fn columns_may_be_reordered() {
        let text = "grain_id,area,sides,time,step\n4,1.5,6,0,0\n";
        let ds = read_graintrack_from(text.as_bytes()).unwrap();
        assert_eq!(ds.steps[0].grains[0], GrainRecord { id: 4, sides: 6, area: 1.5 });
    }

    #[test]
    fn missing_column_is_named() {
        let text = "step,time,grain_id,area\n0,0,1,0.5\n";
        let err = read_graintrack_from(text.as_bytes()).unwrap_err();
        assert!(matches!(err, IoError::MissingColumn(ref c) if c == "sides"), "{err}");
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = "step,time,grain_id,sides,area\n0,0,1,6,0.5\n0,0,2,six,0.5\n";
        let err = read_graintrack_from(text.as_bytes()).unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 3, .. }), "{err}");
        assert!(err.to_string().contains("sides"));
    }

    #[test]
    fn event_csv() {
        let events = vec![EventRecord {
            time: 0.5,
            kind: EventKind::Boundary { l: 3 },
            vanished: Some(9),
            mutations: vec![crate::sim::Mutation { id: 1, from: 7, to: 6 }],
        }];
        let mut buf = Vec::new();
        write_events(&events, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "time,kind,l,vanished,mutations\n0.5,boundary,3,9,1:7>6\n");
    }
}
