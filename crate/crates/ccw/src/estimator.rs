//! Weighted sample-average estimators over a cluster: the approximated
//! objective, the approximated chance probability, and the equivalent
//! integer violation-budget feasibility test.

use crate::dataset::HistoricalDataset;
use crate::weights::Cluster;

/// One chance constraint: a constraint function over (decision, outcome)
/// where values <= 0 count as satisfied, plus the allowed violation
/// probability.
pub struct ChanceConstraintSpec<'a, Z: ?Sized> {
    pub psi: Box<dyn Fn(&Z, f64) -> f64 + Sync + 'a>,
    pub alpha: f64,
}

impl<'a, Z: ?Sized> ChanceConstraintSpec<'a, Z> {
    pub fn new(psi: impl Fn(&Z, f64) -> f64 + Sync + 'a, alpha: f64) -> Self {
        assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
        Self {
            psi: Box::new(psi),
            alpha,
        }
    }
}

/// Integer violation budget `floor(k * alpha)`.
///
/// The small epsilon absorbs binary rounding of decimal alphas (e.g.
/// 3 * (1/3) = 0.9999...), so budgets at exact rational boundaries resolve
/// the way exact arithmetic would.
pub fn violation_budget(k: usize, alpha: f64) -> usize {
    ((k as f64 * alpha) + 1e-9).floor() as usize
}

/// Number of scenarios `ceil(k * (1 - alpha))` whose satisfaction certifies
/// feasibility; complements [`violation_budget`] exactly.
pub fn required_satisfied(k: usize, alpha: f64) -> usize {
    k - violation_budget(k, alpha)
}

/// Cluster average of a loss: `(1/k) * sum loss(z, y_i)` over members.
pub fn estimate_objective<Z: ?Sized>(
    cluster: &Cluster,
    dataset: &HistoricalDataset,
    loss: impl Fn(&Z, f64) -> f64,
    z: &Z,
) -> f64 {
    let sum: f64 = cluster.members().iter().map(|&i| loss(z, dataset.y(i))).sum();
    sum / cluster.k() as f64
}

/// Cluster fraction of members with `psi(z, y_i) <= 0`. A boundary value of
/// exactly zero counts as satisfied.
pub fn estimate_probability<Z: ?Sized>(
    cluster: &Cluster,
    dataset: &HistoricalDataset,
    psi: impl Fn(&Z, f64) -> f64,
    z: &Z,
) -> f64 {
    let hits = cluster
        .members()
        .iter()
        .filter(|&&i| psi(z, dataset.y(i)) <= 0.0)
        .count();
    hits as f64 / cluster.k() as f64
}

/// True iff every constraint's violation count stays within its integer
/// budget `floor(k * alpha)`. Identical to requiring
/// `estimate_probability >= 1 - alpha` for each constraint.
pub fn is_feasible<Z: ?Sized>(
    cluster: &Cluster,
    dataset: &HistoricalDataset,
    constraints: &[ChanceConstraintSpec<'_, Z>],
    z: &Z,
) -> bool {
    constraints.iter().all(|spec| {
        let violations = cluster
            .members()
            .iter()
            .filter(|&&i| (spec.psi)(z, dataset.y(i)) > 0.0)
            .count();
        violations <= violation_budget(cluster.k(), spec.alpha)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{HistoricalDataset, Sample};

    fn dataset_with_outcomes(ys: &[f64]) -> HistoricalDataset {
        let samples = ys
            .iter()
            .map(|&y| Sample {
                z1: vec![0.0],
                x: vec![0.0],
                y,
            })
            .collect();
        HistoricalDataset::new(samples).unwrap()
    }

    fn full_cluster(n: usize) -> Cluster {
        Cluster::new((0..n).collect(), n).unwrap()
    }

    #[test]
    fn constant_loss_returns_the_constant() {
        let ds = dataset_with_outcomes(&[1.0, 2.0, 3.0]);
        let c = full_cluster(3);
        let v = estimate_objective(&c, &ds, |_: &(), _| 7.5, &());
        assert_eq!(v, 7.5);
    }

    #[test]
    fn singleton_cluster_returns_single_loss() {
        let ds = dataset_with_outcomes(&[1.0, 2.0, 3.0]);
        let c = Cluster::new(vec![1], 3).unwrap();
        let v = estimate_objective(&c, &ds, |_: &(), y| y * 10.0, &());
        assert_eq!(v, 20.0);
    }

    #[test]
    fn mean_of_demands() {
        let ds = dataset_with_outcomes(&[4.0, 8.0, 10.0, 12.0, 20.0]);
        let c = full_cluster(5);
        let v = estimate_objective(&c, &ds, |_: &(), y| y, &());
        assert!((v - 10.8).abs() < 1e-12);
    }

    #[test]
    fn probability_counting() {
        let ds = dataset_with_outcomes(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let c = full_cluster(5);
        // satisfied when y <= threshold
        let p = estimate_probability(&c, &ds, |t: &f64, y| y - t, &4.0);
        assert_eq!(p, 0.8);
        let all = estimate_probability(&c, &ds, |t: &f64, y| y - t, &5.0);
        assert_eq!(all, 1.0);
        let none = estimate_probability(&c, &ds, |t: &f64, y| y - t, &0.5);
        assert_eq!(none, 0.0);
    }

    #[test]
    fn boundary_psi_zero_counts_as_satisfied() {
        let ds = dataset_with_outcomes(&[4.0]);
        let c = full_cluster(1);
        let p = estimate_probability(&c, &ds, |t: &f64, y| y - t, &4.0);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn violation_budget_examples() {
        let ds = dataset_with_outcomes(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let c = full_cluster(5);
        // one violation (y=5 > 4.5), alpha = 0.2 -> budget floor(1) = 1
        let spec = ChanceConstraintSpec::new(|t: &f64, y| y - t, 0.2);
        assert!(is_feasible(&c, &ds, &[spec], &4.5));
        // two violations, same budget -> infeasible
        let spec = ChanceConstraintSpec::new(|t: &f64, y| y - t, 0.2);
        assert!(!is_feasible(&c, &ds, &[spec], &3.5));
    }

    #[test]
    fn budget_and_probability_agree_at_fractional_alpha() {
        let ds = dataset_with_outcomes(&[1., 2., 3., 4., 5., 6., 7., 8., 9., 10.]);
        let c = full_cluster(10);
        // one violation, alpha = 0.19 -> budget floor(1.9) = 1: feasible
        let spec = ChanceConstraintSpec::new(|t: &f64, y| y - t, 0.19);
        assert!(is_feasible(&c, &ds, &[spec], &9.5));
        let p = estimate_probability(&c, &ds, |t: &f64, y| y - t, &9.5);
        assert!(p >= 1.0 - 0.19);
    }

    #[test]
    fn budget_probability_equivalence_exhaustive() {
        // violations <= floor(k a)  <=>  (k - violations)/k >= 1 - a
        for k in 1..=200usize {
            for num in 1..20usize {
                let alpha = num as f64 / 20.0;
                if alpha <= 0.0 || alpha >= 1.0 {
                    continue;
                }
                let budget = violation_budget(k, alpha);
                for violations in 0..=k {
                    let lhs = violations <= budget;
                    let rhs = (k - violations) as f64 / k as f64 >= 1.0 - alpha - 1e-12;
                    assert_eq!(lhs, rhs, "k={k} alpha={alpha} violations={violations}");
                }
            }
        }
    }

    #[test]
    fn multiple_constraints_must_all_hold() {
        let ds = dataset_with_outcomes(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let c = full_cluster(5);
        let lenient = ChanceConstraintSpec::new(|t: &f64, y| y - t - 10.0, 0.2);
        let strict = ChanceConstraintSpec::new(|t: &f64, y| y - t, 0.2);
        assert!(!is_feasible(&c, &ds, &[lenient, strict], &3.5));
    }
}
