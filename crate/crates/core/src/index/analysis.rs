use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::porter;

/// Lucene's classic English stop set.
pub const DEFAULT_STOPWORDS: [&str; 33] = [
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "if", "in", "into", "is", "it",
    "no", "not", "of", "on", "or", "such", "that", "the", "their", "then", "there", "these",
    "they", "this", "to", "was", "will", "with",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StemmerKind {
    Porter,
    None,
}

impl std::str::FromStr for StemmerKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "porter" => Ok(StemmerKind::Porter),
            "none" => Ok(StemmerKind::None),
            other => Err(crate::Error::InvalidArgument(format!("unknown stemmer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizationConfig {
    pub lowercase: bool,
    pub stemmer: StemmerKind,
    pub stopwords: BTreeSet<String>,
}

impl Default for TokenizationConfig {
    fn default() -> Self {
        TokenizationConfig {
            lowercase: true,
            stemmer: StemmerKind::Porter,
            stopwords: DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Splits on anything that is not alphanumeric, dropping empty pieces.
pub fn split_words(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty())
}

/// Split, lowercase, drop stopwords, stem.
pub fn tokenize(text: &str, cfg: &TokenizationConfig) -> Vec<String> {
    split_words(text)
        .filter_map(|w| {
            let w = if cfg.lowercase { w.to_lowercase() } else { w.to_string() };
            if cfg.stopwords.contains(&w) {
                return None;
            }
            Some(match cfg.stemmer {
                StemmerKind::Porter => porter::stem(&w),
                StemmerKind::None => w,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizes_with_stems() {
        let cfg = TokenizationConfig::default();
        assert_eq!(
            tokenize("Coronavirus-related deaths", &cfg),
            ["coronaviru", "relat", "death"]
        );
        assert!(tokenize("", &cfg).is_empty());
        assert!(tokenize("THE the", &cfg).is_empty());
    }

    #[test]
    fn stopwords_apply_after_lowercasing() {
        let cfg = TokenizationConfig {
            stemmer: StemmerKind::None,
            ..Default::default()
        };
        assert_eq!(tokenize("The  Virus, and... SARS-CoV-2", &cfg), ["virus", "sars", "cov", "2"]);
        let raw = TokenizationConfig {
            lowercase: false,
            ..cfg
        };
        assert_eq!(tokenize("The the", &raw), ["The"]);
    }

    #[test]
    fn default_stop_set_size() {
        assert_eq!(TokenizationConfig::default().stopwords.len(), 33);
    }
}
