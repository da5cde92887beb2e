//! Dialogue corpus, tone-to-hormone annotation, tokenization and batching.

mod batch;
mod corpus;
mod tokenizer;
mod tone;

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::Rng;

pub use batch::{make_batches, TokenBatch, INPUT_PREFIX};
pub use corpus::{expand_corpus, generate_seed_corpus, SEED_PER_TONE};
pub use tokenizer::{split_words, Vocab, BOS_ID, EOS_ID, PAD_ID, UNK_ID};
pub use tone::{tone_to_hormones, Hormone, HormoneVector, Tone, N_HORMONES};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{0}")]
    Contract(String),
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One annotated exchange. Serialized as `{"input", "output", "tone"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialoguePair {
    pub input: String,
    pub output: String,
    pub tone: Tone,
}

impl DialoguePair {
    pub fn new(input: impl Into<String>, output: impl Into<String>, tone: Tone) -> Result<Self, DataError> {
        let (input, output) = (input.into(), output.into());
        if input.trim().is_empty() || output.trim().is_empty() {
            return Err(DataError::Contract("dialogue input and output must be non-empty".into()));
        }
        Ok(Self { input, output, tone })
    }
}

/// Tone-stratified train/validation split.
///
/// The train side holds `round(train_fraction * N)` pairs, allotted to tones
/// by largest remainder so each tone keeps its share to within one example.
pub fn split_dataset(
    pairs: &[DialoguePair],
    train_fraction: f64,
    rng: &mut Rng,
) -> Result<(Vec<DialoguePair>, Vec<DialoguePair>), DataError> {
    if pairs.is_empty() {
        return Err(DataError::Contract("cannot split an empty dataset".into()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::Contract(format!("train fraction must lie in (0, 1), got {train_fraction}")));
    }
    let mut groups: Vec<Vec<usize>> = Tone::ALL
        .iter()
        .map(|&t| (0..pairs.len()).filter(|&i| pairs[i].tone == t).collect())
        .collect();
    let target = (train_fraction * pairs.len() as f64).round() as usize;
    let exact: Vec<f64> = groups.iter().map(|g| g.len() as f64 * train_fraction).collect();
    let mut quota: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..groups.len()).collect();
    // stable sort keeps canonical tone order among equal remainders
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.partial_cmp(&ra).expect("finite")
    });
    let mut short = target.saturating_sub(quota.iter().sum());
    for &g in order.iter().cycle().take(order.len() * 2) {
        if short == 0 {
            break;
        }
        if quota[g] < groups[g].len() {
            quota[g] += 1;
            short -= 1;
        }
    }

    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (group, &q) in groups.iter_mut().zip(&quota) {
        rng.shuffle(group);
        train.extend(group[..q].iter().map(|&i| pairs[i].clone()));
        val.extend(group[q..].iter().map(|&i| pairs[i].clone()));
    }
    rng.shuffle(&mut train);
    rng.shuffle(&mut val);
    Ok((train, val))
}

pub fn write_jsonl(path: &Path, pairs: &[DialoguePair]) -> Result<(), DataError> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for p in pairs {
        let line = serde_json::to_string(p).expect("pair serializes");
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<DialoguePair>, DataError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut pairs = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| DataError::Parse {
            path: path.display().to_string(),
            line: n + 1,
            message,
        };
        let p: DialoguePair = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        pairs.push(DialoguePair::new(p.input, p.output, p.tone).map_err(|e| parse_err(e.to_string()))?);
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(factor: usize) -> Vec<DialoguePair> {
        let mut rng = Rng::stream(42, "data");
        let seed = generate_seed_corpus(&mut rng);
        expand_corpus(&seed, factor, &mut rng).unwrap()
    }

    #[test]
    fn split_1500_is_1200_300() {
        let (train, val) = split_dataset(&corpus(10), 0.8, &mut Rng::new(42)).unwrap();
        assert_eq!((train.len(), val.len()), (1200, 300));
        for tone in Tone::ALL {
            let n = val.iter().filter(|p| p.tone == tone).count();
            assert!((59..=61).contains(&n), "{tone}: {n}");
        }
    }

    #[test]
    fn split_150_is_120_30() {
        let (train, val) = split_dataset(&corpus(1), 0.8, &mut Rng::new(42)).unwrap();
        assert_eq!((train.len(), val.len()), (120, 30));
    }

    #[test]
    fn split_uneven_groups_hits_rounded_total() {
        let mut pairs = corpus(1);
        pairs.truncate(37);
        let (train, val) = split_dataset(&pairs, 0.8, &mut Rng::new(1)).unwrap();
        assert_eq!(train.len(), (0.8f64 * 37.0).round() as usize);
        assert_eq!(train.len() + val.len(), 37);
    }

    #[test]
    fn split_is_deterministic() {
        let c = corpus(2);
        assert_eq!(split_dataset(&c, 0.8, &mut Rng::new(5)).unwrap(), split_dataset(&c, 0.8, &mut Rng::new(5)).unwrap());
    }

    #[test]
    fn split_contract_errors() {
        assert!(split_dataset(&[], 0.8, &mut Rng::new(1)).is_err());
        assert!(split_dataset(&corpus(1), 1.0, &mut Rng::new(1)).is_err());
    }

    #[test]
    fn jsonl_round_trip_and_schema() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let pairs = corpus(1);
        write_jsonl(&path, &pairs).unwrap();
        let first = std::fs::read_to_string(&path).unwrap().lines().next().unwrap().to_string();
        let v: serde_json::Value = serde_json::from_str(&first).unwrap();
        assert!(v["input"].is_string() && v["output"].is_string());
        assert!(Tone::ALL.iter().any(|t| v["tone"] == t.name()));
        assert_eq!(read_jsonl(&path).unwrap(), pairs);
    }

    #[test]
    fn empty_pair_rejected() {
        assert!(DialoguePair::new("", "x", Tone::Sad).is_err());
    }
}
