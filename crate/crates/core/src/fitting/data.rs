//! Datasets of choices and response times, with CSV input and output.

use std::fmt;
use std::io;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::Choice;

/// Which of the two drift rates applies to a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StimulusClass {
    C1,
    C2,
}

impl fmt::Display for StimulusClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StimulusClass::C1 => "c1",
            StimulusClass::C2 => "c2",
        })
    }
}

impl FromStr for StimulusClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "c1" | "1" => Ok(StimulusClass::C1),
            "c2" | "2" => Ok(StimulusClass::C2),
            other => Err(format!(
                "unknown stimulus class `{other}` (expected c1 or c2)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub participant: String,
    pub stimulus_class: StimulusClass,
    pub choice: Choice,
    pub rt: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub rows: Vec<Row>,
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("expected header `participant,stimulus_class,choice,rt`, found `{0}`")]
    Header(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub const CSV_HEADER: [&str; 4] = ["participant", "stimulus_class", "choice", "rt"];

impl Dataset {
    pub fn new(rows: Vec<Row>) -> Self {
        Dataset { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn min_rt(&self) -> f64 {
        self.rows.iter().map(|r| r.rt).fold(f64::INFINITY, f64::min)
    }

    pub fn count(&self, class: StimulusClass) -> usize {
        self.rows
            .iter()
            .filter(|r| r.stimulus_class == class)
            .count()
    }

    /// Participant ids in first-seen order.
    pub fn participants(&self) -> Vec<String> {
        let mut ids: Vec<String> = Vec::new();
        for r in &self.rows {
            if !ids.contains(&r.participant) {
                ids.push(r.participant.clone());
            }
        }
        ids
    }

    /// Rows of one participant.
    pub fn participant(&self, id: &str) -> Dataset {
        Dataset::new(
            self.rows
                .iter()
                .filter(|r| r.participant == id)
                .cloned()
                .collect(),
        )
    }

    /// Read a dataset with header [`CSV_HEADER`]. Rows are numbered from 1
    /// after the header.
    pub fn read_csv<R: io::Read>(input: R) -> Result<Self, DataError> {
        let mut rd = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(input);
        let header = rd.headers()?.clone();
        if header.iter().ne(CSV_HEADER) {
            return Err(DataError::Header(
                header.iter().collect::<Vec<_>>().join(","),
            ));
        }
        let mut rows = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let row = i + 1;
            let rec = rec?;
            let err = |message: String| DataError::Row { row, message };
            let stimulus_class = rec[1].parse().map_err(err)?;
            let choice = rec[2]
                .parse::<Choice>()
                .map_err(|e| err(format!("choice: {e}")))?;
            let rt: f64 = rec[3]
                .parse()
                .map_err(|_| err(format!("rt: cannot parse `{}`", &rec[3])))?;
            if !(rt > 0.0 && rt.is_finite()) {
                return Err(err(format!("rt: must be positive and finite, got {rt}")));
            }
            rows.push(Row {
                participant: rec[0].to_string(),
                stimulus_class,
                choice,
                rt,
            });
        }
        Ok(Dataset { rows })
    }

    /// Write with shortest round-trip formatting of `rt`.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), DataError> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(CSV_HEADER)?;
        for r in &self.rows {
            wr.write_record([
                r.participant.as_str(),
                &r.stimulus_class.to_string(),
                &r.choice.to_string(),
                &format!("{:?}", r.rt),
            ])?;
        }
        wr.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}
