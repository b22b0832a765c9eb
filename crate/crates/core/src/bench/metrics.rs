//! Concept-overlap scores.

use crate::error::{Error, Result};
use crate::instance::ConceptData;

/// `Σ_i w_i · min(c_i(A), c_i(Q))`.
pub fn rouge_q(counts_a: &[f64], counts_q: &[f64], w: &[f64]) -> Result<f64> {
    if counts_a.len() != counts_q.len() || counts_a.len() != w.len() {
        return Err(Error::Format(format!(
            "count vectors of length {} and {} with {} weights",
            counts_a.len(),
            counts_q.len(),
            w.len()
        )));
    }
    Ok(counts_a
        .iter()
        .zip(counts_q)
        .zip(w)
        .map(|((a, q), w)| w * a.min(*q))
        .sum())
}

/// Mean over references `R` of `rouge_q(c(Y), c(R)) / rouge_q(c(R), c(R))`.
/// References with no weighted concept mass are skipped.
pub fn vrouge(y: &[usize], references: &[Vec<usize>], cd: &ConceptData) -> Result<f64> {
    if references.is_empty() {
        return Err(Error::Config("V-ROUGE needs at least one reference".into()));
    }
    let w = cd.weights();
    let cy = cd.count_vector(y);
    let mut total = 0.0;
    let mut used = 0;
    for (r, reference) in references.iter().enumerate() {
        let cr = cd.count_vector(reference);
        let norm = rouge_q(&cr, &cr, w)?;
        if norm <= 0.0 {
            log::warn!("reference {r} carries no concepts; skipped");
            continue;
        }
        total += rouge_q(&cy, &cr, w)? / norm;
        used += 1;
    }
    if used == 0 {
        return Err(Error::Degenerate("no reference carries any concept".into()));
    }
    Ok(total / used as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rouge_examples() {
        let w = [1.0; 3];
        assert_eq!(rouge_q(&[2.0, 0.0, 1.0], &[1.0, 1.0, 1.0], &w).unwrap(), 2.0);
        assert_eq!(rouge_q(&[0.0; 3], &[1.0, 1.0, 1.0], &w).unwrap(), 0.0);
        assert_eq!(rouge_q(&[1.0, 4.0, 2.0], &[1.0, 4.0, 2.0], &w).unwrap(), 7.0);
        assert!(matches!(rouge_q(&[1.0], &[1.0, 2.0], &w), Err(Error::Format(_))));
    }

    fn data() -> ConceptData {
        // items 0..4; concept 0 on items 0,1 and concept 1 on items 2,3
        ConceptData::new(
            vec![1.0, 1.0],
            vec![vec![(0, 1)], vec![(0, 1)], vec![(1, 1)], vec![(1, 1)], vec![]],
        )
        .unwrap()
    }

    #[test]
    fn vrouge_examples() {
        let cd = data();
        assert_eq!(vrouge(&[0, 2], &[vec![0, 2]], &cd).unwrap(), 1.0);
        assert_eq!(vrouge(&[2, 3], &[vec![0, 1]], &cd).unwrap(), 0.0);
        // each reference has counts (2, 0) / (0, 2); Y has one of each
        assert_eq!(vrouge(&[0, 2], &[vec![0, 1], vec![2, 3]], &cd).unwrap(), 0.5);
        assert_eq!(vrouge(&[0], &[vec![4], vec![0]], &cd).unwrap(), 1.0);
        assert!(vrouge(&[0], &[vec![4]], &cd).is_err());
    }

    proptest! {
        #[test]
        fn rouge_is_monotone_in_the_candidate(
            a in proptest::collection::vec(0.0f64..5.0, 4),
            q in proptest::collection::vec(0.0f64..5.0, 4),
            bump in 0usize..4,
            by in 0.0f64..3.0,
        ) {
            let w = [1.0, 0.5, 2.0, 1.0];
            let mut b = a.clone();
            b[bump] += by;
            prop_assert!(rouge_q(&b, &q, &w).unwrap() >= rouge_q(&a, &q, &w).unwrap());
        }
    }
}
