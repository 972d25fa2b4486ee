//! Token sequences and their two text encodings.
//!
//! Detector inputs are sequences of token ids over a fixed alphabet
//! `0..n`. On disk they are either whitespace-separated decimal ids or a
//! JSON array; the CLI picks the format with a flag rather than sniffing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::key::MAX_DIMENSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TextFormat {
    #[default]
    Whitespace,
    Json,
}

/// A validated token sequence: every id is below the alphabet size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    tokens: Vec<u32>,
    n: usize,
}

impl TokenSequence {
    pub fn new(tokens: Vec<u32>, n: usize) -> Result<Self> {
        if n == 0 || n > MAX_DIMENSION {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: format!("alphabet size must be in 1..={MAX_DIMENSION}, got {n}"),
            });
        }
        for &t in &tokens {
            if t as usize >= n {
                return Err(Error::TokenOutOfRange { token: t, n });
            }
        }
        Ok(Self { tokens, n })
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Number of distinct token ids in the sequence.
    pub fn distinct_count(&self) -> usize {
        let mut seen = vec![false; self.n];
        let mut count = 0;
        for &t in &self.tokens {
            if !seen[t as usize] {
                seen[t as usize] = true;
                count += 1;
            }
        }
        count
    }
}

/// Parses raw text into token ids without an alphabet bound; range
/// checking happens in [`TokenSequence::new`] once n is known.
pub fn parse_tokens(input: &str, format: TextFormat) -> Result<Vec<u32>> {
    match format {
        TextFormat::Whitespace => input
            .split_whitespace()
            .map(|w| {
                w.parse::<u32>().map_err(|e| Error::Format {
                    what: "token text",
                    reason: format!("`{w}` is not a token id: {e}"),
                })
            })
            .collect(),
        TextFormat::Json => {
            serde_json::from_str::<Vec<u32>>(input).map_err(|e| Error::Format {
                what: "token text",
                reason: format!("expected a JSON array of token ids: {e}"),
            })
        }
    }
}

pub fn format_tokens(tokens: &[u32], format: TextFormat) -> String {
    match format {
        TextFormat::Whitespace => {
            let mut out = tokens
                .iter()
                .map(|t| t.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            out.push('\n');
            out
        }
        TextFormat::Json => serde_json::to_string(tokens).expect("token array serializes"),
    }
}

pub fn parse_token_sequence(input: &str, format: TextFormat, n: usize) -> Result<TokenSequence> {
    TokenSequence::new(parse_tokens(input, format)?, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whitespace_round_trip() {
        let tokens = vec![0, 5, 2, 5, 9];
        let text = format_tokens(&tokens, TextFormat::Whitespace);
        assert_eq!(parse_tokens(&text, TextFormat::Whitespace).unwrap(), tokens);
    }

    #[test]
    fn json_round_trip() {
        let tokens = vec![7, 7, 0, 1048575];
        let text = format_tokens(&tokens, TextFormat::Json);
        assert_eq!(parse_tokens(&text, TextFormat::Json).unwrap(), tokens);
    }

    #[test]
    fn whitespace_accepts_newlines_and_tabs() {
        assert_eq!(
            parse_tokens("1\n2\t3  4\r\n5", TextFormat::Whitespace).unwrap(),
            vec![1, 2, 3, 4, 5]
        );
        assert_eq!(
            parse_tokens("", TextFormat::Whitespace).unwrap(),
            Vec::<u32>::new()
        );
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_tokens("1 two 3", TextFormat::Whitespace).is_err());
        assert!(parse_tokens("-4", TextFormat::Whitespace).is_err());
        assert!(parse_tokens("[1, 2.5]", TextFormat::Json).is_err());
        assert!(parse_tokens("{\"a\":1}", TextFormat::Json).is_err());
        assert!(parse_tokens("[1,", TextFormat::Json).is_err());
    }

    #[test]
    fn sequence_validates_range() {
        assert!(TokenSequence::new(vec![0, 9], 10).is_ok());
        let err = TokenSequence::new(vec![0, 10], 10).unwrap_err();
        assert!(matches!(err, Error::TokenOutOfRange { token: 10, n: 10 }));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn distinct_count_ignores_repeats() {
        let seq = TokenSequence::new(vec![1, 1, 2, 3, 2, 1], 8).unwrap();
        assert_eq!(seq.distinct_count(), 3);
        assert_eq!(seq.len(), 6);
    }
}
