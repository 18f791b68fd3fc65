//! Dataset files: one JSON record per line, UTF-8, LF endings.

use crate::data::lexicon::{lexicon_sentiment, SentimentClass};
use crate::data::{PairedSample, TagSet};
use crate::error::{Error, Result};
use crate::numcore::Matrix;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    /// F×T feature matrix as rows of numbers.
    features: Vec<Vec<f64>>,
    text: String,
    tags: TagSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sentiment: Option<String>,
}

pub fn save_dataset(samples: &[PairedSample], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for s in samples {
        let rows: Vec<Vec<f64>> = (0..s.features.rows).map(|r| s.features.row(r).to_vec()).collect();
        let record = Record {
            id: s.id.clone(),
            features: rows,
            text: s.text.clone(),
            tags: s.tags,
            sentiment: Some(s.sentiment.name().to_string()),
        };
        let line = serde_json::to_string(&record)
            .map_err(|e| Error::InvalidInput(format!("serialize {}: {e}", s.id)))?;
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Parse and validate a dataset file. Malformed records carry their line
/// number; duplicate ids are rejected. A missing sentiment field falls
/// back to the lexicon proxy.
pub fn load_dataset(path: &Path) -> Result<Vec<PairedSample>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut samples = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: line_no, msg: e.to_string() })?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateId(record.id));
        }
        let rows = record.features.len();
        if rows == 0 || record.features[0].is_empty() {
            return Err(Error::Parse { line: line_no, msg: "empty feature matrix".into() });
        }
        let cols = record.features[0].len();
        if record.features.iter().any(|r| r.len() != cols) {
            return Err(Error::Parse { line: line_no, msg: "ragged feature rows".into() });
        }
        if record.text.trim().is_empty() {
            return Err(Error::Parse { line: line_no, msg: "blank text".into() });
        }
        let mut data = Vec::with_capacity(rows * cols);
        for r in &record.features {
            data.extend_from_slice(r);
        }
        let sentiment = match &record.sentiment {
            Some(name) => SentimentClass::parse(name).ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("unknown sentiment class {name}"),
            })?,
            None => lexicon_sentiment(&record.text),
        };
        let sample = PairedSample {
            id: record.id,
            features: Matrix::from_vec(rows, cols, data),
            text: record.text,
            tags: record.tags,
            sentiment,
        };
        sample.validate().map_err(|e| Error::Parse { line: line_no, msg: e.to_string() })?;
        samples.push(sample);
    }
    Ok(samples)
}
