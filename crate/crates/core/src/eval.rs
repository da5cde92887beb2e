//! Automatic hormone metrics: per-hormone MSE/MAE, tolerance accuracy,
//! differentiation range across tones and nearest-tone classification.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DialoguePair, Hormone, HormoneVector, Tone, Vocab};
use crate::losses::select_targets;
use crate::model::Seq2SeqModel;
use crate::tensor::{no_grad, TensorError};
use crate::train::eval_batches;

/// Default tolerance for the accuracy metric.
pub const ACCURACY_TOL: f64 = 0.15;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0}")]
    Contract(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HormoneScores {
    pub mse: f64,
    pub mae: f64,
    pub accuracy: f64,
    pub diff_range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HormoneRow {
    pub hormone: Hormone,
    #[serde(flatten)]
    pub scores: HormoneScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_hormone: Vec<HormoneRow>,
    pub average: HormoneScores,
    pub nearest_tone_accuracy: f64,
    pub n_examples: usize,
    pub tolerance: f64,
}

/// Per column of `N × k` row-major matrices: `(mse, mae, accuracy)`.
pub fn hormone_metrics(preds: &[f64], targets: &[f64], k: usize, tol: f64) -> Result<Vec<(f64, f64, f64)>, EvalError> {
    if k == 0 || preds.len() != targets.len() || preds.is_empty() || !preds.len().is_multiple_of(k) {
        return Err(EvalError::Contract(format!(
            "hormone_metrics: {} predictions vs {} targets with {k} columns",
            preds.len(),
            targets.len()
        )));
    }
    if !(tol > 0.0) {
        return Err(EvalError::Contract(format!("tolerance must be positive, got {tol}")));
    }
    let n = (preds.len() / k) as f64;
    Ok((0..k)
        .map(|j| {
            let diffs = preds.iter().zip(targets).skip(j).step_by(k).map(|(p, t)| p - t);
            let (mut se, mut ae, mut hits) = (0.0, 0.0, 0usize);
            for d in diffs {
                se += d * d;
                ae += d.abs();
                if d.abs() <= tol {
                    hits += 1;
                }
            }
            (se / n, ae / n, hits as f64 / n)
        })
        .collect())
}

/// Mean prediction per tone, in canonical tone order (`None` if absent).
pub fn per_tone_means(preds: &[f64], tones: &[Tone], k: usize) -> Vec<Option<Vec<f64>>> {
    Tone::ALL
        .iter()
        .map(|&tone| {
            let rows: Vec<&[f64]> = preds.chunks(k).zip(tones).filter(|(_, &t)| t == tone).map(|(r, _)| r).collect();
            (!rows.is_empty()).then(|| (0..k).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64).collect())
        })
        .collect()
}

/// Per hormone, max minus min over the five per-tone mean predictions.
pub fn differentiation_range(means_by_tone: &[Option<Vec<f64>>]) -> Result<Vec<f64>, EvalError> {
    let mut means = Vec::with_capacity(Tone::ALL.len());
    for (tone, m) in Tone::ALL.iter().zip(means_by_tone) {
        means.push(m.as_ref().ok_or_else(|| EvalError::Contract(format!("no examples of tone {}", tone.name())))?);
    }
    if means.len() != Tone::ALL.len() {
        return Err(EvalError::Contract("differentiation_range needs all five tones".into()));
    }
    let k = means[0].len();
    Ok((0..k)
        .map(|j| {
            let col = means.iter().map(|m| m[j]);
            col.clone().fold(f64::NEG_INFINITY, f64::max) - col.fold(f64::INFINITY, f64::min)
        })
        .collect())
}

/// Tone whose profile (restricted to `hormones`) is Euclidean-closest;
/// ties go to the earlier tone in canonical order.
pub fn nearest_tone_among(pred: &[f64], hormones: &[Hormone]) -> Tone {
    let mut best = (Tone::ALL[0], f64::INFINITY);
    for tone in Tone::ALL {
        let profile = tone.hormones();
        let d: f64 = hormones.iter().zip(pred).map(|(h, p)| (profile.get(*h) - p).powi(2)).sum();
        if d < best.1 {
            best = (tone, d);
        }
    }
    best.0
}

pub fn nearest_tone(pred: &HormoneVector) -> Tone {
    nearest_tone_among(pred.as_slice(), &Hormone::ALL)
}

/// Builds the report from `N × k` predictions for the given hormones.
pub fn evaluate_predictions(preds: &[f64], tones: &[Tone], hormones: &[Hormone], tol: f64) -> Result<EvalReport, EvalError> {
    let k = hormones.len();
    if tones.len() * k != preds.len() {
        return Err(EvalError::Contract(format!("{} tones for {} predictions", tones.len(), preds.len())));
    }
    let full: Vec<f64> = tones.iter().flat_map(|t| t.hormones().0).collect();
    let targets = select_targets(&full, hormones);
    let basic = hormone_metrics(preds, &targets, k, tol)?;
    let ranges = differentiation_range(&per_tone_means(preds, tones, k))?;
    let per_hormone: Vec<HormoneRow> = hormones
        .iter()
        .zip(basic)
        .zip(ranges)
        .map(|((&hormone, (mse, mae, accuracy)), diff_range)| HormoneRow {
            hormone,
            scores: HormoneScores { mse, mae, accuracy, diff_range },
        })
        .collect();
    let avg = |f: fn(&HormoneScores) -> f64| per_hormone.iter().map(|r| f(&r.scores)).sum::<f64>() / k as f64;
    let correct = preds.chunks(k).zip(tones).filter(|(p, &t)| nearest_tone_among(p, hormones) == t).count();
    Ok(EvalReport {
        average: HormoneScores {
            mse: avg(|s| s.mse),
            mae: avg(|s| s.mae),
            accuracy: avg(|s| s.accuracy),
            diff_range: avg(|s| s.diff_range),
        },
        per_hormone,
        nearest_tone_accuracy: correct as f64 / tones.len() as f64,
        n_examples: tones.len(),
        tolerance: tol,
    })
}

/// Hormone predictions (`N × k`) and emotional embeddings (`N × d`) for
/// every pair, in input order.
pub fn predict(model: &Seq2SeqModel, vocab: &Vocab, pairs: &[DialoguePair]) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::Contract("cannot evaluate an empty dataset".into()));
    }
    no_grad(|| {
        let (mut preds, mut embeds) = (Vec::new(), Vec::new());
        for b in eval_batches(pairs, 32, model.config.max_len, vocab) {
            let h = model.encode(&b.input_ids, &b.input_mask, b.batch_size)?;
            let (h_hat, e, _, _) = model.hormone_path(&h, &b.input_mask)?;
            preds.extend(h_hat.to_vec());
            embeds.extend(e.to_vec());
        }
        Ok((preds, embeds))
    })
}

pub fn evaluate(model: &Seq2SeqModel, vocab: &Vocab, pairs: &[DialoguePair], tol: f64) -> Result<EvalReport, EvalError> {
    let (preds, _) = predict(model, vocab, pairs)?;
    let tones: Vec<Tone> = pairs.iter().map(|p| p.tone).collect();
    evaluate_predictions(&preds, &tones, &model.hormone.hormones(), tol)
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_json(&self, path: &Path) -> Result<(), EvalError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    /// `hormone,mse,mae,accuracy,diff_range` rows plus an `Average` row.
    pub fn to_table_csv(&self) -> String {
        let mut out = String::from("hormone,mse,mae,accuracy,diff_range\n");
        let row = |name: &str, s: &HormoneScores| format!("{name},{:.6},{:.6},{:.6},{:.6}\n", s.mse, s.mae, s.accuracy, s.diff_range);
        for r in &self.per_hormone {
            out += &row(r.hormone.name(), &r.scores);
        }
        out += &row("Average", &self.average);
        out
    }

    pub fn write_table_csv(&self, path: &Path) -> Result<(), EvalError> {
        fs::write(path, self.to_table_csv())?;
        Ok(())
    }

    /// Human-readable table.
    pub fn render(&self) -> String {
        let mut s = format!("{:<12} {:>8} {:>8} {:>9} {:>10}\n", "hormone", "MSE", "MAE", "Acc", "Range");
        let line = |name: &str, x: &HormoneScores| {
            format!("{name:<12} {:>8.4} {:>8.4} {:>8.1}% {:>10.3}\n", x.mse, x.mae, 100.0 * x.accuracy, x.diff_range)
        };
        for r in &self.per_hormone {
            s += &line(r.hormone.name(), &r.scores);
        }
        s += &line("Average", &self.average);
        s += &format!("nearest-tone accuracy: {:.1}% over {} examples\n", 100.0 * self.nearest_tone_accuracy, self.n_examples);
        s
    }
}

/// `example_id,tone,<hormone columns>,e0..e{d-1}` rows.
pub fn write_embeddings_csv(
    path: &Path,
    pairs: &[DialoguePair],
    hormones: &[Hormone],
    preds: &[f64],
    embeds: &[f64],
) -> Result<(), EvalError> {
    let (k, n) = (hormones.len(), pairs.len());
    if n == 0 || preds.len() != n * k || !embeds.len().is_multiple_of(n) {
        return Err(EvalError::Contract("embedding export: row counts disagree".into()));
    }
    let d = embeds.len() / n;
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    let mut header = vec!["example_id".to_string(), "tone".to_string()];
    header.extend(hormones.iter().map(|h| h.name().to_string()));
    header.extend((0..d).map(|j| format!("e{j}")));
    writeln!(out, "{}", header.join(","))?;
    for (i, p) in pairs.iter().enumerate() {
        let mut row = vec![i.to_string(), p.tone.name().to_string()];
        row.extend(preds[i * k..(i + 1) * k].iter().map(|v| v.to_string()));
        row.extend(embeds[i * d..(i + 1) * d].iter().map(|v| v.to_string()));
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle(tones: &[Tone]) -> Vec<f64> {
        tones.iter().flat_map(|t| t.hormones().0).collect()
    }

    #[test]
    fn perfect_predictions() {
        let m = hormone_metrics(&[0.1, 0.9, 0.5, 0.3], &[0.1, 0.9, 0.5, 0.3], 2, 0.15).unwrap();
        assert!(m.iter().all(|&r| r == (0.0, 0.0, 1.0)));
    }

    #[test]
    fn tolerance_boundary_and_offset() {
        let m = hormone_metrics(&[0.80], &[0.90], 1, 0.15).unwrap();
        assert_eq!(m[0].2, 1.0);
        let t = [0.1, 0.5, 0.3, 0.7];
        let p: Vec<f64> = t.iter().map(|x| x + 0.2).collect();
        let m = hormone_metrics(&p, &t, 2, 0.15).unwrap();
        for (mse, mae, acc) in m {
            assert!((mse - 0.04).abs() < 1e-12 && (mae - 0.2).abs() < 1e-12);
            assert_eq!(acc, 0.0);
        }
        assert!(hormone_metrics(&[0.1], &[0.1, 0.2], 1, 0.15).is_err());
    }

    #[test]
    fn ranges_at_profile_values() {
        let means: Vec<Option<Vec<f64>>> = Tone::ALL.iter().map(|t| Some(t.hormones().0.to_vec())).collect();
        let r = differentiation_range(&means).unwrap();
        assert!((r[Hormone::Dopamine.index()] - 0.90).abs() < 1e-12);
        assert!((r[Hormone::Cortisol.index()] - 0.90).abs() < 1e-12);
        let flat: Vec<Option<Vec<f64>>> = Tone::ALL.iter().map(|_| Some(vec![0.4; 6])).collect();
        assert!(differentiation_range(&flat).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn missing_tone_is_error() {
        let preds = oracle(&[Tone::Sad, Tone::Sad]);
        assert!(evaluate_predictions(&preds, &[Tone::Sad, Tone::Sad], &Hormone::ALL, 0.15).is_err());
    }

    #[test]
    fn nearest_tone_cases() {
        for t in Tone::ALL {
            assert_eq!(nearest_tone(&t.hormones()), t);
        }
        let neutral = HormoneVector::new([0.5, 0.5, 0.3, 0.5, 0.3, 0.5]).unwrap();
        assert_eq!(nearest_tone(&neutral), Tone::Neutral);
        let (f, e) = (Tone::Friendly.hormones().0, Tone::Excited.hormones().0);
        let mid: Vec<f64> = f.iter().zip(&e).map(|(a, b)| (a + b) / 2.0).collect();
        let brute = Tone::ALL
            .iter()
            .map(|t| (t, t.hormones().distance(&mid)))
            .fold((Tone::Friendly, f64::INFINITY), |acc, (t, d)| if d < acc.1 { (*t, d) } else { acc });
        assert_eq!(nearest_tone_among(&mid, &Hormone::ALL), brute.0);
    }

    #[test]
    fn oracle_predictor_is_perfect() {
        let tones: Vec<Tone> = Tone::ALL.iter().cycle().take(20).copied().collect();
        let r = evaluate_predictions(&oracle(&tones), &tones, &Hormone::ALL, 0.15).unwrap();
        assert_eq!(r.nearest_tone_accuracy, 1.0);
        assert!(r.per_hormone.iter().all(|h| h.scores.accuracy == 1.0 && h.scores.mse == 0.0));
        assert!((r.per_hormone[0].scores.diff_range - 0.9).abs() < 1e-12);
    }

    #[test]
    fn permutation_invariant_and_monotone_in_tol() {
        let tones: Vec<Tone> = Tone::ALL.iter().cycle().take(10).copied().collect();
        let preds: Vec<f64> = (0..60).map(|i| ((i * 37) % 100) as f64 / 100.0).collect();
        let a = evaluate_predictions(&preds, &tones, &Hormone::ALL, 0.15).unwrap();
        let (mut rp, mut rt) = (Vec::new(), Vec::new());
        for i in (0..10).rev() {
            rp.extend_from_slice(&preds[i * 6..(i + 1) * 6]);
            rt.push(tones[i]);
        }
        let b = evaluate_predictions(&rp, &rt, &Hormone::ALL, 0.15).unwrap();
        assert_eq!(a.nearest_tone_accuracy, b.nearest_tone_accuracy);
        for (x, y) in a.per_hormone.iter().zip(&b.per_hormone) {
            assert!((x.scores.mse - y.scores.mse).abs() < 1e-12);
            assert_eq!(x.scores.accuracy, y.scores.accuracy);
        }
        let mut last = 0.0;
        for tol in [0.05, 0.1, 0.15, 0.3, 0.6] {
            let acc = evaluate_predictions(&preds, &tones, &Hormone::ALL, tol).unwrap().average.accuracy;
            assert!(acc >= last);
            last = acc;
        }
    }

    #[test]
    fn table_csv_shape() {
        let tones: Vec<Tone> = Tone::ALL.to_vec();
        let r = evaluate_predictions(&oracle(&tones), &tones, &Hormone::ALL, 0.15).unwrap();
        let csv = r.to_table_csv();
        assert_eq!(csv.lines().count(), 8);
        assert!(csv.lines().last().unwrap().starts_with("Average,"));
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["per_hormone"].as_array().unwrap().len(), 6);
        assert!(v["per_hormone"][0]["accuracy"].is_number());
    }
}
