// SPDX-License-Identifier: MIT OR Apache-2.0

//! Segmentation comparison metrics.

use crate::signal::{Segmentation, SignChange, StepModel};

/// Two-sided Hausdorff distance between two index sets.
///
/// Both empty gives `0`; exactly one empty gives `+∞`.
pub fn set_distance(a: &[usize], b: &[usize]) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return 0.0,
        (true, false) | (false, true) => return f64::INFINITY,
        _ => {}
    }
    directed_distance(a, b).max(directed_distance(b, a)) as f64
}

fn directed_distance(from: &[usize], to: &[usize]) -> usize {
    from.iter()
        .map(|&x| to.iter().map(|&y| x.abs_diff(y)).min().unwrap_or(usize::MAX))
        .max()
        .unwrap_or(0)
}

/// ε-sign-consistency of an estimate against the truth.
///
/// Holds iff every estimated change point lies strictly within `eps·n` of a
/// true one and vice versa, and every true change point has an estimated
/// change point with the same jump sign strictly within `eps·n`.
pub fn eps_sign_consistent(est: &Segmentation, truth: &StepModel, eps: f64) -> bool {
    if est.n() != truth.n() {
        return false;
    }
    changes_eps_sign_consistent(truth.n(), &est.sign_changes(), &truth.sign_changes(), eps)
}

/// [`eps_sign_consistent`] on raw signed change-point lists.
pub fn changes_eps_sign_consistent(
    n: usize,
    estimated: &[SignChange],
    truth: &[SignChange],
    eps: f64,
) -> bool {
    let radius = eps * n as f64;
    let est_positions: Vec<usize> = estimated.iter().map(|c| c.position).collect();
    let true_positions: Vec<usize> = truth.iter().map(|c| c.position).collect();
    if set_distance(&est_positions, &true_positions) >= radius {
        return false;
    }
    truth.iter().all(|t| {
        estimated
            .iter()
            .any(|e| e.sign == t.sign && (e.position.abs_diff(t.position) as f64) < radius)
    })
}

/// Estimated change points farther than `eps·n` from every true change point.
pub fn spurious_change_points(n: usize, estimated: &[usize], truth: &[usize], eps: f64) -> Vec<usize> {
    let radius = eps * n as f64;
    estimated
        .iter()
        .copied()
        .filter(|&e| truth.iter().all(|&t| (e.abs_diff(t) as f64) >= radius))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Sign;

    fn seg(n: usize, cps: &[usize], levels: &[f64]) -> Segmentation {
        Segmentation::new(n, cps.to_vec(), levels.to_vec(), 1.0).unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(set_distance(&[10, 20], &[10, 20]), 0.0);
        assert_eq!(set_distance(&[10], &[13]), 3.0);
        assert_eq!(set_distance(&[10, 20], &[10]), 10.0);
        assert_eq!(set_distance(&[10], &[10, 20]), 10.0);
    }

    #[test]
    fn distance_empty_sets() {
        assert_eq!(set_distance(&[], &[]), 0.0);
        assert_eq!(set_distance(&[], &[3]), f64::INFINITY);
        assert_eq!(set_distance(&[3], &[]), f64::INFINITY);
    }

    #[test]
    fn consistency_examples() {
        let truth = StepModel::new(4000, vec![1000, 2000], vec![1.0, 2.0, 1.0], 1.0).unwrap();
        let exact = seg(4000, &[1000, 2000], &[1.0, 2.0, 1.0]);
        assert!(eps_sign_consistent(&exact, &truth, 0.01));
        let near = seg(4000, &[1012, 1995], &[1.0, 2.0, 1.0]);
        assert!(eps_sign_consistent(&near, &truth, 0.01));
        let spurious = seg(4000, &[1012, 1995, 2700], &[1.0, 2.0, 1.0, 1.5]);
        assert!(!eps_sign_consistent(&spurious, &truth, 0.01));
    }

    #[test]
    fn consistency_requires_matching_sign() {
        let truth = StepModel::new(100, vec![50], vec![1.0, 2.0], 1.0).unwrap();
        let wrong = seg(100, &[50], &[2.0, 1.0]);
        assert!(!eps_sign_consistent(&wrong, &truth, 0.05));
        // a wrong-signed nearest point is tolerated if a right-signed one is also close
        let both = seg(100, &[49, 51], &[1.0, 0.5, 2.0]);
        assert!(eps_sign_consistent(&both, &truth, 0.05));
    }

    #[test]
    fn tiny_eps_means_exact_recovery() {
        let truth = StepModel::new(100, vec![50], vec![1.0, 2.0], 1.0).unwrap();
        assert!(eps_sign_consistent(&seg(100, &[50], &[0.0, 3.0]), &truth, 0.005));
        assert!(!eps_sign_consistent(&seg(100, &[51], &[0.0, 3.0]), &truth, 0.005));
    }

    #[test]
    fn spurious_points() {
        assert_eq!(spurious_change_points(4000, &[1012, 1995, 2700], &[1000, 2000], 0.01), vec![2700]);
        let changes = [SignChange {
            position: 3,
            sign: Sign::Up,
        }];
        assert!(changes_eps_sign_consistent(10, &changes, &changes, 0.05));
    }
}
