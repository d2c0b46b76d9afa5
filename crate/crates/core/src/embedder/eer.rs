/// Equal error rate from target (`same`) and non-target (`diff`) scores.
///
/// A trial is accepted when its score is at least the threshold. The sweep
/// visits every observed score plus +inf; where false-accept and false-reject
/// rates cross between two thresholds the EER is linearly interpolated.
pub fn compute_eer(scores_same: &[f64], scores_diff: &[f64]) -> f64 {
    assert!(!scores_same.is_empty() && !scores_diff.is_empty(), "empty score list");
    let mut thresholds: Vec<f64> = scores_same.iter().chain(scores_diff).copied().collect();
    thresholds.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    thresholds.dedup();
    thresholds.push(f64::INFINITY);
    let rates = |t: f64| {
        let far = scores_diff.iter().filter(|&&s| s >= t).count() as f64 / scores_diff.len() as f64;
        let frr = scores_same.iter().filter(|&&s| s < t).count() as f64 / scores_same.len() as f64;
        (far, frr)
    };
    let mut prev = rates(thresholds[0]);
    if prev.1 >= prev.0 {
        return prev.0;
    }
    for &t in &thresholds[1..] {
        let (far, frr) = rates(t);
        if frr >= far {
            // solve far_p + l (far - far_p) = frr_p + l (frr - frr_p)
            let (far_p, frr_p) = prev;
            let denom = (far - far_p) - (frr - frr_p);
            let l = if denom.abs() > 0.0 { (frr_p - far_p) / denom } else { 0.0 };
            return far_p + l * (far - far_p);
        }
        prev = (far, frr);
    }
    unreachable!("at +inf every trial is rejected")
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute force: scan a dense threshold grid, take the point where the two
    /// rates are closest and average them.
    fn eer_oracle(same: &[f64], diff: &[f64]) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=20_000 {
            let t = -0.5 + 2.0 * i as f64 / 20_000.0;
            let far = diff.iter().filter(|&&s| s >= t).count() as f64 / diff.len() as f64;
            let frr = same.iter().filter(|&&s| s < t).count() as f64 / same.len() as f64;
            if (far - frr).abs() < best.0 {
                best = ((far - frr).abs(), 0.5 * (far + frr));
            }
        }
        best.1
    }

    #[test]
    fn separated_scores_have_zero_eer() {
        assert_eq!(compute_eer(&[0.9, 0.8, 0.7], &[0.1, 0.2]), 0.0);
    }

    #[test]
    fn identical_distributions_give_one_half() {
        assert!((compute_eer(&[0.5], &[0.5]) - 0.5).abs() < 1e-12);
        assert!((compute_eer(&[0.1, 0.2, 0.3], &[0.1, 0.2, 0.3]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn three_by_three_example() {
        let same = [0.9, 0.8, 0.2];
        let diff = [0.7, 0.1, 0.05];
        assert!((eer_oracle(&same, &diff) - 1.0 / 3.0).abs() < 1e-12);
        assert!((compute_eer(&same, &diff) - 1.0 / 3.0).abs() < 1e-12);
    }
}
