//! Multinomial naive Bayes text classifier with add-one smoothing.
//!
//! Attachable as an opt-in message annotator; shares the tokenizer with the
//! text index. Trained models are immutable and cheap to share.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::tokenize::text_tokens;

/// Trained model: log priors plus smoothed per-class token log-likelihoods.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BayesModel {
    /// Class labels in declaration (first appearance) order.
    pub classes: Vec<String>,
    pub log_priors: Vec<f64>,
    /// Per class: token -> log P(token | class), smoothed over the union vocabulary.
    pub log_likelihoods: Vec<HashMap<String, f64>>,
    /// Per class: log probability mass assigned to a token never seen in training.
    pub log_unseen: Vec<f64>,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum TrainError {
    #[error("insufficient data: need at least two classes and one document per class")]
    InsufficientData,
}

/// Classification result: winning label plus normalized posteriors.
#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub label: String,
    pub posteriors: BTreeMap<String, f64>,
}

/// Fit a multinomial NB model over `(text, label)` pairs.
pub fn train(labeled_docs: &[(String, String)]) -> Result<BayesModel, TrainError> {
    let mut classes: Vec<String> = Vec::new();
    let mut class_of: HashMap<&str, usize> = HashMap::new();
    for (_, label) in labeled_docs {
        if !class_of.contains_key(label.as_str()) {
            class_of.insert(label, classes.len());
            classes.push(label.clone());
        }
    }
    if classes.len() < 2 {
        return Err(TrainError::InsufficientData);
    }

    let mut doc_counts = vec![0usize; classes.len()];
    let mut token_counts: Vec<HashMap<String, usize>> = vec![HashMap::new(); classes.len()];
    let mut totals = vec![0usize; classes.len()];
    let mut vocab: BTreeMap<String, ()> = BTreeMap::new();
    for (text, label) in labeled_docs {
        let c = class_of[label.as_str()];
        doc_counts[c] += 1;
        for token in text_tokens(text) {
            vocab.insert(token.clone(), ());
            *token_counts[c].entry(token).or_insert(0) += 1;
            totals[c] += 1;
        }
    }
    debug_assert!(doc_counts.iter().all(|&n| n > 0));

    let total_docs = labeled_docs.len() as f64;
    let v = vocab.len() as f64;
    let log_priors: Vec<f64> =
        doc_counts.iter().map(|&n| (n as f64 / total_docs).ln()).collect();
    let mut log_likelihoods = Vec::with_capacity(classes.len());
    let mut log_unseen = Vec::with_capacity(classes.len());
    for c in 0..classes.len() {
        let denom = totals[c] as f64 + v;
        let mut map = HashMap::with_capacity(vocab.len());
        for token in vocab.keys() {
            let count = token_counts[c].get(token).copied().unwrap_or(0) as f64;
            map.insert(token.clone(), ((count + 1.0) / denom).ln());
        }
        log_likelihoods.push(map);
        log_unseen.push((1.0 / denom).ln());
    }

    Ok(BayesModel { classes, log_priors, log_likelihoods, log_unseen })
}

impl BayesModel {
    /// Classify a text. Posteriors are computed in log space and normalized;
    /// empty text yields the priors. Tokens outside the training vocabulary
    /// contribute only their smoothing mass.
    pub fn classify(&self, text: &str) -> Classification {
        let tokens = text_tokens(text);
        let mut scores: Vec<f64> = self.log_priors.clone();
        for token in &tokens {
            for (c, score) in scores.iter_mut().enumerate() {
                *score += self.log_likelihoods[c]
                    .get(token)
                    .copied()
                    .unwrap_or(self.log_unseen[c]);
            }
        }
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let norm: f64 = weights.iter().sum();

        let mut best = 0;
        for (c, score) in scores.iter().enumerate() {
            if *score > scores[best] {
                best = c;
            }
        }
        let posteriors = self
            .classes
            .iter()
            .zip(&weights)
            .map(|(label, w)| (label.clone(), w / norm))
            .collect();
        Classification { label: self.classes[best].clone(), posteriors }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<BayesModel, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Bundled demo sentiment corpus (clearly synthetic, for the proof-of-concept
/// annotator and the CLI examples).
pub fn demo_corpus() -> Vec<(String, String)> {
    let raw = include_str!("../data/demo_sentiment.jsonl");
    raw.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).expect("demo corpus line");
            (
                v["text"].as_str().expect("text").to_string(),
                v["label"].as_str().expect("label").to_string(),
            )
        })
        .collect()
}
