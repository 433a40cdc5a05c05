use std::collections::HashSet;
use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};

const BUILTIN_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

/// How one text field is cleaned and cut to length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrepProfile {
    pub remove_stopwords: bool,
    /// Tokens kept per text.
    pub max_len: usize,
    pub strip_digits: bool,
    pub strip_punct: bool,
    /// Longer tokens are dropped entirely.
    pub max_word_len: usize,
}

impl PrepProfile {
    /// Product descriptions: stop words removed, cut at 300 tokens.
    pub fn description() -> Self {
        PrepProfile {
            remove_stopwords: true,
            max_len: 300,
            strip_digits: true,
            strip_punct: true,
            max_word_len: 30,
        }
    }

    /// Product titles: stop words kept, cut or padded to 57 tokens.
    pub fn title() -> Self {
        PrepProfile {
            remove_stopwords: false,
            max_len: 57,
            ..Self::description()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_len == 0 || self.max_word_len == 0 {
            return Err(Error::Invalid("max_len and max_word_len must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopWords(HashSet<String>);

impl StopWords {
    /// The English list shipped in `data/stopwords_en.txt`.
    pub fn builtin() -> &'static StopWords {
        static LIST: OnceLock<StopWords> = OnceLock::new();
        LIST.get_or_init(|| StopWords::parse(BUILTIN_STOPWORDS))
    }

    /// One word per line; `#` starts a comment line.
    pub fn parse(text: &str) -> Self {
        StopWords(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn clean_text(text: &str, profile: &PrepProfile) -> Vec<String> {
    clean_text_with(text, profile, StopWords::builtin())
}

/// Lowercases, turns stripped characters into spaces, splits on whitespace,
/// then drops stop words and over-long words before truncating to
/// `profile.max_len`.
pub fn clean_text_with(text: &str, profile: &PrepProfile, stopwords: &StopWords) -> Vec<String> {
    let lowered = text.to_lowercase();
    let spaced: String = lowered
        .chars()
        .map(|c| {
            let strip = if c.is_numeric() {
                profile.strip_digits
            } else {
                profile.strip_punct && !c.is_alphanumeric() && !c.is_whitespace()
            };
            if strip {
                ' '
            } else {
                c
            }
        })
        .collect();
    spaced
        .split_whitespace()
        .filter(|w| !(profile.remove_stopwords && stopwords.contains(w)))
        .filter(|w| w.chars().count() <= profile.max_word_len)
        .take(profile.max_len)
        .map(str::to_string)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles() {
        let d = PrepProfile::description();
        assert_eq!(d.max_len, 300);
        assert_eq!(d.max_word_len, 30);
        assert!(d.remove_stopwords && d.strip_digits && d.strip_punct);

        let t = PrepProfile::title();
        assert_eq!(t.max_len, 57);
        assert!(!t.remove_stopwords);
        assert!(t.strip_punct && t.strip_digits);
        assert_eq!(t.max_word_len, 30);
    }

    #[test]
    fn description_pipeline_by_hand() {
        let got = clean_text("The Dog's 2 BIG chew-toys!!", &PrepProfile::description());
        assert_eq!(got, ["dog", "big", "chew", "toys"]);
    }

    #[test]
    fn title_keeps_stop_words() {
        let got = clean_text("The Dog's 2 BIG chew-toys!!", &PrepProfile::title());
        assert_eq!(got, ["the", "dog", "s", "big", "chew", "toys"]);
    }

    #[test]
    fn empty_and_truncation() {
        assert!(clean_text("", &PrepProfile::description()).is_empty());
        assert!(clean_text("  \t\n ", &PrepProfile::title()).is_empty());
        let long = vec!["word"; 400].join(" ");
        assert_eq!(clean_text(&long, &PrepProfile::description()).len(), 300);
        assert_eq!(clean_text(&long, &PrepProfile::title()).len(), 57);
    }

    #[test]
    fn long_words_and_digits() {
        let thirty = "a".repeat(30);
        let thirty_one = "b".repeat(31);
        let text = format!("{thirty} {thirty_one} abc123def");
        assert_eq!(
            clean_text(&text, &PrepProfile::description()),
            [thirty.as_str(), "abc", "def"]
        );
    }

    #[test]
    fn flags_can_be_disabled() {
        let p = PrepProfile {
            strip_digits: false,
            strip_punct: false,
            ..PrepProfile::title()
        };
        assert_eq!(clean_text("Route-66 now", &p), ["route-66", "now"]);
    }

    #[test]
    fn stop_word_file_parsing() {
        let s = StopWords::parse("# comment\nThe\n\n  and \n");
        assert_eq!(s.len(), 2);
        assert!(s.contains("the") && s.contains("and"));
        assert!(StopWords::builtin().contains("the"));
        assert!(StopWords::builtin().contains("s"));
        assert_eq!(StopWords::builtin().len(), 179);
    }

    #[test]
    fn validate_rejects_zero_lengths() {
        assert!(PrepProfile { max_len: 0, ..PrepProfile::title() }.validate().is_err());
        assert!(PrepProfile { max_word_len: 0, ..PrepProfile::title() }.validate().is_err());
        assert!(PrepProfile::title().validate().is_ok());
    }
}
