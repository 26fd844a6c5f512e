use std::collections::BTreeMap;

use serde::Serialize;

use super::{BioLabel, PicoCategory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CategoryCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl CategoryCounts {
    fn add(&mut self, other: CategoryCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    /// Precision/recall/F1. A ratio with a zero denominator is 1.0 when the
    /// other ratio's denominator is also zero (nothing to find, nothing
    /// claimed) and 0.0 otherwise.
    pub fn scores(&self) -> Scores {
        let claimed = self.tp + self.fp;
        let relevant = self.tp + self.fn_;
        if claimed == 0 && relevant == 0 {
            return Scores {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
            };
        }
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(self.tp, claimed);
        let recall = ratio(self.tp, relevant);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Scores { precision, recall, f1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub counts: BTreeMap<PicoCategory, CategoryCounts>,
    pub per_category: BTreeMap<PicoCategory, Scores>,
    pub micro: Scores,
}

/// Token-level evaluation. A token's category is the type of its B/I label;
/// per category, a token is a true positive when gold and prediction agree on
/// it, and micro scores pool the counts of all categories.
pub fn evaluate<G, P>(gold: &[G], predicted: &[P]) -> Result<Evaluation>
where
    G: AsRef<[BioLabel]>,
    P: AsRef<[BioLabel]>,
{
    if gold.len() != predicted.len() {
        return Err(Error::LengthMismatch(format!(
            "{} gold sequences vs {} predicted",
            gold.len(),
            predicted.len()
        )));
    }
    let mut counts: BTreeMap<PicoCategory, CategoryCounts> =
        PicoCategory::ALL.iter().map(|c| (*c, CategoryCounts::default())).collect();
    for (i, (g, p)) in gold.iter().zip(predicted).enumerate() {
        let (g, p) = (g.as_ref(), p.as_ref());
        if g.len() != p.len() {
            return Err(Error::LengthMismatch(format!(
                "sequence {i}: {} gold labels vs {} predicted",
                g.len(),
                p.len()
            )));
        }
        for (gl, pl) in g.iter().zip(p) {
            match (gl.category(), pl.category()) {
                (Some(a), Some(b)) if a == b => counts.get_mut(&a).unwrap().tp += 1,
                (a, b) => {
                    if let Some(a) = a {
                        counts.get_mut(&a).unwrap().fn_ += 1;
                    }
                    if let Some(b) = b {
                        counts.get_mut(&b).unwrap().fp += 1;
                    }
                }
            }
        }
    }
    let mut pooled = CategoryCounts::default();
    for c in counts.values() {
        pooled.add(*c);
    }
    Ok(Evaluation {
        per_category: counts.iter().map(|(k, c)| (*k, c.scores())).collect(),
        micro: pooled.scores(),
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pico::PicoCategory::*;
    use proptest::prelude::*;

    const O: BioLabel = BioLabel::O;
    const BP: BioLabel = BioLabel::B(Population);
    const IP: BioLabel = BioLabel::I(Population);
    const BO: BioLabel = BioLabel::B(Outcome);

    #[test]
    fn identical_is_perfect() {
        let gold = vec![vec![BP, IP, O, BO]];
        let e = evaluate(&gold, &gold).unwrap();
        for s in e.per_category.values().chain([&e.micro]) {
            assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn eight_of_ten_population_tokens() {
        let mut gold = vec![BP];
        gold.extend([IP; 9]);
        gold.extend([O; 2]);
        let mut pred = vec![O, O, BP];
        pred.extend([IP; 9]);
        let e = evaluate(&[gold], &[pred]).unwrap();
        let pop = e.per_category[&Population];
        assert_eq!((pop.precision, pop.recall), (0.8, 0.8));
        assert!((pop.f1 - 0.8).abs() < 1e-15);
        assert_eq!(e.counts[&Population], CategoryCounts { tp: 8, fp: 2, fn_: 2 });
    }

    #[test]
    fn no_predictions_scores_zero() {
        let e = evaluate(&[vec![BP, O]], &[vec![O, O]]).unwrap();
        assert_eq!(e.micro, Scores { precision: 0.0, recall: 0.0, f1: 0.0 });
    }

    #[test]
    fn mislabelled_category_counts_on_both_sides() {
        let e = evaluate(&[vec![BP]], &[vec![BO]]).unwrap();
        assert_eq!(e.counts[&Population], CategoryCounts { tp: 0, fp: 0, fn_: 1 });
        assert_eq!(e.counts[&Outcome], CategoryCounts { tp: 0, fp: 1, fn_: 0 });
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(evaluate(&[vec![O]], &[vec![O, O]]).is_err());
        assert!(evaluate(&[vec![O]], &Vec::<Vec<BioLabel>>::new()).is_err());
    }

    fn arb_labels(len: usize) -> impl Strategy<Value = Vec<BioLabel>> {
        prop::collection::vec(0usize..7, len).prop_map(|v| v.into_iter().map(BioLabel::from_index).collect())
    }

    proptest! {
        #[test]
        fn precision_and_recall_swap(pair in (1usize..30).prop_flat_map(|n| (arb_labels(n), arb_labels(n)))) {
            let (g, p) = pair;
            let a = evaluate(std::slice::from_ref(&g), std::slice::from_ref(&p)).unwrap();
            let b = evaluate(&[p], &[g]).unwrap();
            prop_assert_eq!(a.micro.precision, b.micro.recall);
            prop_assert_eq!(a.micro.recall, b.micro.precision);
            for c in PicoCategory::ALL {
                prop_assert_eq!(a.per_category[&c].precision, b.per_category[&c].recall);
            }
        }
    }
}
