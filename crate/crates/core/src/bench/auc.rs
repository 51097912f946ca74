use crate::data::Label;
use crate::error::{check_len, Error, Result};

fn class_counts(scores: &[f64], labels: &[Label]) -> Result<(usize, usize)> {
    check_len("label count", scores.len(), labels.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    let pos = labels.iter().filter(|&&y| y > 0).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("AUC needs both classes"));
    }
    Ok((pos, neg))
}

/// Area under the ROC curve by the rank-sum statistic; tied scores share
/// their average rank, so ties count one half.
pub fn auc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    let (pos, neg) = class_counts(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their mean
        let mid = (i + j) as f64 / 2.0 + 1.0;
        pos_rank_sum += mid * order[i..=j].iter().filter(|&&k| labels[k] > 0).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Quadratic pair-counting AUC, for cross-checking.
pub fn auc_pairs(scores: &[f64], labels: &[Label]) -> Result<f64> {
    let (pos, neg) = class_counts(scores, labels)?;
    let mut wins = 0.0;
    for (_, &si) in scores.iter().enumerate().filter(|(i, _)| labels[*i] > 0) {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] < 0 {
                wins += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    Ok(wins / (pos as f64 * neg as f64))
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn examples() {
        assert_eq!(auc(&[0.9, 0.1], &[1, -1]).unwrap(), 1.0);
        assert_eq!(auc(&[0.1, 0.9], &[1, -1]).unwrap(), 0.0);
        assert_eq!(auc(&[0.3; 6], &[1, -1, 1, -1, -1, 1]).unwrap(), 0.5);
    }

    #[test]
    fn errors() {
        assert!(auc(&[0.1, 0.2], &[1, 1]).is_err());
        assert!(auc(&[0.1, f64::NAN], &[1, -1]).is_err());
        assert!(auc(&[0.1], &[1, -1]).is_err());
    }

    #[test]
    fn matches_pair_counting() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..500 {
            let k = rng.gen_range(2..=50);
            let mut labels: Vec<Label> = (0..k).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect();
            labels[0] = 1;
            labels[1] = -1;
            // coarse scores so ties are common
            let scores: Vec<f64> = (0..k).map(|_| f64::from(rng.gen_range(-5..=5)) / 2.0).collect();
            let a = auc(&scores, &labels).unwrap();
            let b = auc_pairs(&scores, &labels).unwrap();
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }
}
