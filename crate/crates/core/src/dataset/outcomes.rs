//! Coding of the five-level self-reported financial wellbeing into the two
//! binary outcomes.

use crate::error::{Error, Result};

/// The five recognized wellbeing levels, worst to best.
pub const WELLBEING_LEVELS: [&str; 5] =
    ["not at all well", "not well", "neutral", "well", "very well"];

/// The two binary recodings of wellbeing: `high` is 1 for (very) well,
/// `low` is 1 for not (at all) well; neutral responses are 0 in both.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomePair {
    pub high: Vec<u8>,
    pub low: Vec<u8>,
}

impl OutcomePair {
    pub fn n(&self) -> usize {
        self.high.len()
    }

    pub fn target(&self, name: &str) -> Result<&[u8]> {
        match name {
            "high" => Ok(&self.high),
            "low" => Ok(&self.low),
            other => Err(Error::Lookup(format!(
                "unknown outcome target '{other}' (expected 'high' or 'low')"
            ))),
        }
    }

    pub fn subset(&self, indices: &[usize]) -> OutcomePair {
        OutcomePair {
            high: indices.iter().map(|&i| self.high[i]).collect(),
            low: indices.iter().map(|&i| self.low[i]).collect(),
        }
    }
}

/// Code raw wellbeing responses into the high/low outcome pair.
///
/// Matching is case-insensitive after trimming; any response outside the
/// five-level set is a coding error.
pub fn code_outcomes<S: AsRef<str>>(raw_wellbeing: &[S]) -> Result<OutcomePair> {
    let mut high = Vec::with_capacity(raw_wellbeing.len());
    let mut low = Vec::with_capacity(raw_wellbeing.len());
    for (i, raw) in raw_wellbeing.iter().enumerate() {
        let level = raw.as_ref().trim().to_lowercase();
        match level.as_str() {
            "well" | "very well" => {
                high.push(1);
                low.push(0);
            }
            "neutral" => {
                high.push(0);
                low.push(0);
            }
            "not well" | "not at all well" => {
                high.push(0);
                low.push(1);
            }
            other => {
                return Err(Error::Coding(format!(
                    "row {i}: unknown wellbeing level '{other}' (expected one of {})",
                    WELLBEING_LEVELS.join(", ")
                )))
            }
        }
    }
    Ok(OutcomePair { high, low })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn codes_all_five_levels() {
        let pair = code_outcomes(&WELLBEING_LEVELS).unwrap();
        assert_eq!(pair.high, vec![0, 0, 0, 1, 1]);
        assert_eq!(pair.low, vec![1, 1, 0, 0, 0]);
    }

    #[test]
    fn trims_and_ignores_case() {
        let pair = code_outcomes(&[" Very Well ", "NEUTRAL"]).unwrap();
        assert_eq!(pair.high, vec![1, 0]);
        assert_eq!(pair.low, vec![0, 0]);
    }

    #[test]
    fn unknown_level_is_coding_error() {
        let err = code_outcomes(&["well", "fantastic"]).unwrap_err();
        assert!(matches!(err, Error::Coding(_)));
        assert!(err.to_string().contains("fantastic"));
    }

    #[test]
    fn target_lookup() {
        let pair = code_outcomes(&["well"]).unwrap();
        assert_eq!(pair.target("high").unwrap(), &[1]);
        assert_eq!(pair.target("low").unwrap(), &[0]);
        assert!(pair.target("medium").is_err());
    }

    proptest! {
        #[test]
        fn high_and_low_are_mutually_exclusive(
            levels in proptest::collection::vec(0usize..5, 1..60)
        ) {
            let raw: Vec<&str> = levels.iter().map(|&i| WELLBEING_LEVELS[i]).collect();
            let pair = code_outcomes(&raw).unwrap();
            for i in 0..pair.n() {
                prop_assert_eq!(pair.high[i] * pair.low[i], 0);
                prop_assert!(pair.high[i] <= 1 && pair.low[i] <= 1);
            }
        }
    }
}
