//! Dataset generation and directory layout shared by the CLI and examples.

use std::fs;
use std::path::Path;

use crate::data::{
    expand_corpus, generate_seed_corpus, read_jsonl, split_dataset, write_jsonl, DataError, DialoguePair, Tone, Vocab,
    INPUT_PREFIX,
};
use crate::tensor::Rng;

pub const TRAIN_FILE: &str = "train.jsonl";
pub const VAL_FILE: &str = "val.jsonl";
pub const VOCAB_FILE: &str = "vocab.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<DialoguePair>,
    pub val: Vec<DialoguePair>,
    pub vocab: Vocab,
}

impl Dataset {
    /// Seed corpus, expansion and stratified split, all from the "data"
    /// stream of `seed`. The vocabulary covers the whole expanded corpus and
    /// the input prefix.
    pub fn generate(seed: u64, factor: usize, train_fraction: f64) -> Result<Self, DataError> {
        let mut rng = Rng::stream(seed, "data");
        let base = generate_seed_corpus(&mut rng);
        let pairs = expand_corpus(&base, factor, &mut rng)?;
        let vocab = Vocab::build(
            pairs
                .iter()
                .flat_map(|p| [p.input.as_str(), p.output.as_str()])
                .chain([INPUT_PREFIX]),
        );
        let (train, val) = split_dataset(&pairs, train_fraction, &mut rng)?;
        Ok(Self { train, val, vocab })
    }

    pub fn write(&self, dir: &Path) -> Result<(), DataError> {
        fs::create_dir_all(dir)?;
        write_jsonl(&dir.join(TRAIN_FILE), &self.train)?;
        write_jsonl(&dir.join(VAL_FILE), &self.val)?;
        self.vocab.save(&dir.join(VOCAB_FILE))
    }

    pub fn read(dir: &Path) -> Result<Self, DataError> {
        Ok(Self {
            train: read_jsonl(&dir.join(TRAIN_FILE))?,
            val: read_jsonl(&dir.join(VAL_FILE))?,
            vocab: Vocab::load(&dir.join(VOCAB_FILE))?,
        })
    }
}

/// Examples per tone, canonical order.
pub fn tone_counts(pairs: &[DialoguePair]) -> Vec<(Tone, usize)> {
    Tone::ALL.iter().map(|&t| (t, pairs.iter().filter(|p| p.tone == t).count())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generate_write_read() {
        let ds = Dataset::generate(42, 10, 0.8).unwrap();
        assert_eq!((ds.train.len(), ds.val.len()), (1200, 300));
        let dir = tempfile::tempdir().unwrap();
        ds.write(dir.path()).unwrap();
        assert_eq!(Dataset::read(dir.path()).unwrap(), ds);
        let small = Dataset::generate(42, 1, 0.8).unwrap();
        assert_eq!((small.train.len(), small.val.len()), (120, 30));
        assert!(tone_counts(&small.val).iter().all(|&(_, n)| n == 6));
    }

    #[test]
    fn same_seed_same_bytes() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        Dataset::generate(42, 2, 0.8).unwrap().write(a.path()).unwrap();
        Dataset::generate(42, 2, 0.8).unwrap().write(b.path()).unwrap();
        for f in [TRAIN_FILE, VAL_FILE, VOCAB_FILE] {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
        }
    }
}
