use crate::tensor::Rng;

use super::{DialoguePair, Tone, Vocab, N_HORMONES};

/// Task prefix prepended to every encoder input.
pub const INPUT_PREFIX: &str = "emotional response in English: ";

/// A padded minibatch. Matrices are flat row-major.
///
/// Rows are trimmed to the longest real sequence in the batch; the dropped
/// columns would be padding in every row.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenBatch {
    pub batch_size: usize,
    pub input_len: usize,
    pub target_len: usize,
    pub input_ids: Vec<usize>,
    pub input_mask: Vec<u8>,
    pub target_ids: Vec<usize>,
    pub target_mask: Vec<u8>,
    /// `batch_size × 6`, each row the profile of that row's tone.
    pub hormone_targets: Vec<f64>,
    pub tones: Vec<Tone>,
}

impl TokenBatch {
    /// Tokenizes `pairs` into one batch, prefixing inputs with [`INPUT_PREFIX`].
    pub fn from_pairs(pairs: &[&DialoguePair], vocab: &Vocab, max_len: usize) -> Self {
        let inputs: Vec<_> = pairs
            .iter()
            .map(|p| vocab.tokenize(&format!("{INPUT_PREFIX}{}", p.input), max_len))
            .collect();
        let targets: Vec<_> = pairs.iter().map(|p| vocab.tokenize(&p.output, max_len)).collect();
        let longest = |rows: &[(Vec<usize>, Vec<u8>)]| {
            rows.iter().map(|(_, m)| m.iter().filter(|&&x| x == 1).count()).max().unwrap_or(1)
        };
        let (input_len, target_len) = (longest(&inputs), longest(&targets));
        let flatten = |rows: &[(Vec<usize>, Vec<u8>)], len: usize| {
            let ids = rows.iter().flat_map(|(i, _)| i[..len].iter().copied()).collect();
            let mask = rows.iter().flat_map(|(_, m)| m[..len].iter().copied()).collect();
            (ids, mask)
        };
        let (input_ids, input_mask) = flatten(&inputs, input_len);
        let (target_ids, target_mask) = flatten(&targets, target_len);
        Self {
            batch_size: pairs.len(),
            input_len,
            target_len,
            input_ids,
            input_mask,
            target_ids,
            target_mask,
            hormone_targets: pairs.iter().flat_map(|p| p.tone.hormones().0).collect(),
            tones: pairs.iter().map(|p| p.tone).collect(),
        }
    }

    pub fn hormone_row(&self, b: usize) -> &[f64] {
        &self.hormone_targets[b * N_HORMONES..(b + 1) * N_HORMONES]
    }
}

/// Shuffles `pairs` with `rng` and cuts them into batches; the last batch may
/// be partial.
pub fn make_batches(
    pairs: &[DialoguePair],
    batch_size: usize,
    max_len: usize,
    vocab: &Vocab,
    rng: &mut Rng,
) -> Vec<TokenBatch> {
    assert!(batch_size >= 1, "batch_size must be at least 1");
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    rng.shuffle(&mut order);
    order
        .chunks(batch_size)
        .map(|chunk| {
            let rows: Vec<&DialoguePair> = chunk.iter().map(|&i| &pairs[i]).collect();
            TokenBatch::from_pairs(&rows, vocab, max_len)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{expand_corpus, generate_seed_corpus, split_words, HormoneVector, EOS_ID, PAD_ID};

    fn setup() -> (Vec<DialoguePair>, Vocab) {
        let mut rng = Rng::new(42);
        let seed = generate_seed_corpus(&mut rng);
        let pairs = expand_corpus(&seed, 10, &mut rng).unwrap();
        let vocab = Vocab::build(
            pairs.iter().flat_map(|p| [p.input.as_str(), p.output.as_str()]).chain([INPUT_PREFIX]),
        );
        (pairs, vocab)
    }

    #[test]
    fn batch_count_and_last_partial() {
        let (pairs, vocab) = setup();
        let batches = make_batches(&pairs, 8, 32, &vocab, &mut Rng::new(1));
        assert_eq!(batches.len(), 188);
        assert!(batches[..187].iter().all(|b| b.batch_size == 8));
        assert_eq!(batches[187].batch_size, 4);
    }

    #[test]
    fn rows_carry_tone_profiles_and_prefix() {
        let (pairs, vocab) = setup();
        let prefix: Vec<usize> = split_words(INPUT_PREFIX).iter().map(|w| vocab.id(w)).collect();
        for b in make_batches(&pairs[..100], 8, 32, &vocab, &mut Rng::new(2)) {
            for r in 0..b.batch_size {
                assert_eq!(b.hormone_row(r), b.tones[r].hormones().as_slice());
                assert!(HormoneVector::new(b.hormone_row(r).try_into().unwrap()).is_some());
                let row = &b.input_ids[r * b.input_len..(r + 1) * b.input_len];
                assert_eq!(&row[..prefix.len()], prefix.as_slice());
            }
        }
    }

    #[test]
    fn masks_match_padding() {
        let (pairs, vocab) = setup();
        for b in make_batches(&pairs[..40], 8, 32, &vocab, &mut Rng::new(3)) {
            for (id, m) in b.input_ids.iter().zip(&b.input_mask).chain(b.target_ids.iter().zip(&b.target_mask)) {
                assert_eq!(*m == 0, *id == PAD_ID);
            }
            for r in 0..b.batch_size {
                let real = b.target_mask[r * b.target_len..(r + 1) * b.target_len].iter().filter(|&&m| m == 1).count();
                assert_eq!(b.target_ids[r * b.target_len + real - 1], EOS_ID);
            }
        }
    }

    #[test]
    fn shuffle_is_seeded() {
        let (pairs, vocab) = setup();
        let a = make_batches(&pairs[..50], 8, 32, &vocab, &mut Rng::new(4));
        let b = make_batches(&pairs[..50], 8, 32, &vocab, &mut Rng::new(4));
        assert_eq!(a, b);
    }
}
