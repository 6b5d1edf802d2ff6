//! Protocol conformance harness for scorer implementations.
//!
//! Sends randomized batches whose texts are full of tabs, line breaks,
//! carriage returns, unicode spaces and empty fields, then checks that every
//! pair is answered exactly once with a finite score and that replaying a
//! batch gives the same scores.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scorer::{score_pairs, ScorePair, Scorer};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConformanceConfig {
    pub pairs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ConformanceConfig {
    fn default() -> Self {
        ConformanceConfig {
            pairs: 10_000,
            batch_size: 512,
            seed: 17,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConformanceReport {
    pub pairs_sent: usize,
    pub pairs_scored: usize,
    pub batches: usize,
    /// One message per failed batch or check.
    pub errors: Vec<String>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        self.errors.is_empty() && self.pairs_scored == self.pairs_sent
    }
}

const WORDS: &[&str] = &[
    "covid", "sars-cov-2", "mask", "vaccine", "ACE2", "incubation", "µg/ml", "naïve", "R0", "#", "ñ", "的",
];
const GAPS: &[&str] = &[" ", "  ", "\t", "\n", "\r\n", "\r", "\u{00a0}", "\u{2003}", " \t ", ""];

fn adversarial_text(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(0..40);
    let mut s = String::new();
    if rng.gen_bool(0.2) {
        s.push_str(GAPS.choose(rng).expect("non-empty"));
    }
    for _ in 0..n {
        s.push_str(WORDS.choose(rng).expect("non-empty"));
        s.push_str(GAPS.choose(rng).expect("non-empty"));
    }
    s
}

/// Deterministic pseudo-random pairs with unique ids.
pub fn generate_pairs(n: usize, seed: u64) -> Vec<ScorePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let query = adversarial_text(&mut rng);
            let doc = adversarial_text(&mut rng);
            ScorePair::new(format!("c{i} d{}", rng.gen::<u32>()), query, doc)
        })
        .collect()
}

/// Runs the harness against `scorer`. Failures are collected, not raised.
pub fn run_conformance(scorer: &mut dyn Scorer, cfg: &ConformanceConfig) -> Result<ConformanceReport> {
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let pairs = generate_pairs(cfg.pairs, cfg.seed);
    let mut report = ConformanceReport {
        pairs_sent: pairs.len(),
        ..Default::default()
    };
    let mut first: Option<Vec<(String, f64)>> = None;
    for (b, batch) in pairs.chunks(cfg.batch_size).enumerate() {
        report.batches += 1;
        match score_pairs(scorer, batch) {
            Ok(scores) => {
                report.pairs_scored += scores.len();
                if first.is_none() {
                    first = Some(scores);
                }
            }
            Err(e) => report.errors.push(format!("batch {b}: {e}")),
        }
    }
    if let Some(expected) = first {
        let batch = &pairs[..expected.len()];
        match score_pairs(scorer, batch) {
            Ok(again) if again == expected => {}
            Ok(_) => report.errors.push("replaying the first batch changed its scores".into()),
            Err(e) => report.errors.push(format!("replay: {e}")),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::ScorerError;
    use crate::pipeline::scorer::{EchoScorer, InProcess};

    #[test]
    fn echo_passes() {
        let cfg = ConformanceConfig { pairs: 1000, batch_size: 97, seed: 3 };
        let report = run_conformance(&mut InProcess(EchoScorer), &cfg).unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.batches, 11);
    }

    #[test]
    fn duplicating_server_fails() {
        struct Dup;
        impl Scorer for Dup {
            fn exchange(&mut self, r: &[String]) -> std::result::Result<Vec<String>, ScorerError> {
                let mut out: Vec<String> = r.iter().map(|l| format!("{}\t0", l.split('\t').next().unwrap())).collect();
                out.push(out[0].clone());
                Ok(out)
            }
        }
        let cfg = ConformanceConfig { pairs: 50, batch_size: 10, seed: 1 };
        let report = run_conformance(&mut Dup, &cfg).unwrap();
        assert!(!report.passed());
        assert_eq!(report.errors.len(), 5);
    }

    #[test]
    fn generated_pairs_are_deterministic() {
        assert_eq!(generate_pairs(20, 9), generate_pairs(20, 9));
        assert_ne!(generate_pairs(20, 9), generate_pairs(20, 10));
    }
}
