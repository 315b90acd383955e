//! Majority vote over the trial outputs for one source row.

use std::collections::HashMap;

use serde::Serialize;

use crate::model::CellValue;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialSet {
    pub source: CellValue,
    /// One entry per trial; `None` when the trial produced no prediction.
    pub outputs: Vec<Option<CellValue>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AggregatedPrediction {
    pub source: CellValue,
    pub target: Option<CellValue>,
    /// How many trials produced the winning target (0 when absent).
    pub support: usize,
    pub trials: usize,
}

impl AggregatedPrediction {
    /// Fraction of trials that agree with the winner.
    pub fn confidence(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.support as f64 / self.trials as f64
        }
    }
}

/// Picks the most frequent present output. Ties go to the shorter string,
/// then to the lexicographically smaller one. Absent outputs never win.
pub fn aggregate(set: &TrialSet) -> AggregatedPrediction {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for out in set.outputs.iter().flatten() {
        *counts.entry(out.as_str()).or_default() += 1;
    }
    let winner = counts.into_iter().min_by(|(a, ca), (b, cb)| {
        cb.cmp(ca)
            .then_with(|| a.chars().count().cmp(&b.chars().count()))
            .then_with(|| a.cmp(b))
    });
    let (target, support) = match winner {
        Some((text, n)) => (Some(CellValue::from(text)), n),
        None => (None, 0),
    };
    AggregatedPrediction { source: set.source.clone(), target, support, trials: set.outputs.len() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(outputs: &[Option<&str>]) -> TrialSet {
        TrialSet { source: "s".into(), outputs: outputs.iter().map(|o| o.map(CellValue::from)).collect() }
    }

    #[test]
    fn strict_majority() {
        let a = aggregate(&set(&[Some("a"), Some("a"), Some("b"), Some("a"), Some("b")]));
        assert_eq!(a.target.as_ref().map(CellValue::as_str), Some("a"));
        assert_eq!((a.support, a.trials), (3, 5));
        assert!((a.confidence() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn all_absent() {
        let a = aggregate(&set(&[None, None]));
        assert_eq!(a.target, None);
        assert_eq!((a.support, a.trials), (0, 2));
    }

    #[test]
    fn tie_prefers_shorter_then_lexicographic() {
        let a = aggregate(&set(&[Some("ab"), Some("b"), Some("b"), Some("ab")]));
        assert_eq!(a.target.unwrap().as_str(), "b");
        assert_eq!(a.support, 2);
        let a = aggregate(&set(&[Some("d"), Some("c")]));
        assert_eq!(a.target.unwrap().as_str(), "c");
    }

    #[test]
    fn tie_length_counts_characters_not_bytes() {
        // "é" is two bytes but one character, so it beats "ab".
        let a = aggregate(&set(&[Some("ab"), Some("é")]));
        assert_eq!(a.target.unwrap().as_str(), "é");
    }

    #[test]
    fn absent_never_outvotes() {
        let a = aggregate(&set(&[None, None, None, Some("x")]));
        assert_eq!(a.target.unwrap().as_str(), "x");
        assert_eq!((a.support, a.trials), (1, 4));
    }

    fn outputs() -> impl Strategy<Value = Vec<Option<String>>> {
        prop::collection::vec(prop::option::of("[abc]{0,2}"), 1..12)
    }

    proptest! {
        #[test]
        fn majority_is_recovered(
            winner in "[abc]{1,2}",
            others in outputs(),
            extra in 1usize..4,
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let mut outs: Vec<Option<String>> = others.into_iter()
                .map(|o| o.filter(|s| *s != winner))
                .collect();
            let needed = outs.len() + extra;
            outs.extend(std::iter::repeat_n(Some(winner.clone()), needed));
            outs.shuffle(&mut crate::rng::Seed(seed).rng());
            let set = TrialSet { source: "q".into(), outputs: outs.into_iter().map(|o| o.map(CellValue::from)).collect() };
            let a = aggregate(&set);
            prop_assert_eq!(a.target.map(CellValue::into_string), Some(winner));
        }

        #[test]
        fn permutation_invariant(outs in outputs(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let base = TrialSet { source: "q".into(), outputs: outs.iter().cloned().map(|o| o.map(CellValue::from)).collect() };
            let mut shuffled = base.clone();
            shuffled.outputs.shuffle(&mut crate::rng::Seed(seed).rng());
            prop_assert_eq!(aggregate(&base), aggregate(&shuffled));
        }

        #[test]
        fn support_bounds(outs in outputs()) {
            let set = TrialSet { source: "q".into(), outputs: outs.iter().cloned().map(|o| o.map(CellValue::from)).collect() };
            let a = aggregate(&set);
            prop_assert_eq!(a.trials, outs.len());
            match &a.target {
                Some(_) => prop_assert!(a.support >= 1 && a.support <= a.trials),
                None => {
                    prop_assert_eq!(a.support, 0);
                    prop_assert!(outs.iter().all(Option::is_none));
                }
            }
        }
    }
}
