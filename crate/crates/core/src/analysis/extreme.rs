use crate::error::{Error, Result};
use crate::preferences::{IntervalWeightVector, WeightVector, SIMPLEX_TOL};

/// Vertices of `{w : w̲ ≤ w ≤ w̄, Σw = 1}`.
///
/// Every vertex has at least `n − 1` coordinates at a bound; the sweep tries
/// each free coordinate with every lower/upper assignment of the others and
/// keeps the candidates that land inside the box. Output is deduplicated and
/// sorted lexicographically.
pub fn extreme_points(iwv: &IntervalWeightVector) -> Result<Vec<WeightVector>> {
    let n = iwv.len();
    let (lo, hi) = (iwv.lower(), iwv.upper());
    let mut out: Vec<Vec<f64>> = Vec::new();
    for free in 0..n {
        let others: Vec<usize> = (0..n).filter(|&i| i != free).collect();
        for mask in 0u64..(1u64 << others.len()) {
            let mut w = vec![0.0; n];
            for (bit, &i) in others.iter().enumerate() {
                w[i] = if mask >> bit & 1 == 1 { hi[i] } else { lo[i] };
            }
            let rest = 1.0 - others.iter().map(|&i| w[i]).sum::<f64>();
            if rest < lo[free] - SIMPLEX_TOL || rest > hi[free] + SIMPLEX_TOL {
                continue;
            }
            w[free] = rest.clamp(lo[free], hi[free]);
            if !out
                .iter()
                .any(|v| v.iter().zip(&w).all(|(a, b)| (a - b).abs() <= SIMPLEX_TOL))
            {
                out.push(w);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::InfeasibleInterval);
    }
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite weights"));
    out.into_iter()
        .map(|w| {
            // Clamping can leave a rounding residue on the simplex sum.
            let s: f64 = w.iter().sum();
            WeightVector::new(w.iter().map(|x| x / s).collect())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iwv(lo: &[f64], hi: &[f64]) -> IntervalWeightVector {
        IntervalWeightVector::new(lo.to_vec(), hi.to_vec()).unwrap()
    }

    fn assert_same_set(got: &[WeightVector], want: &[&[f64]]) {
        assert_eq!(got.len(), want.len(), "{got:?}");
        for w in want {
            assert!(
                got.iter()
                    .any(|g| g.as_slice().iter().zip(*w).all(|(a, b)| (a - b).abs() <= 1e-9)),
                "missing {w:?} in {got:?}"
            );
        }
    }

    #[test]
    fn two_objective_interval() {
        let pts = extreme_points(&iwv(&[0.2, 0.5], &[0.7, 0.9])).unwrap();
        assert_same_set(&pts, &[&[0.5, 0.5], &[0.2, 0.8]]);
    }

    #[test]
    fn full_box_meets_simplex_at_unit_vectors() {
        let pts = extreme_points(&iwv(&[0.0, 0.0], &[1.0, 1.0])).unwrap();
        assert_same_set(&pts, &[&[1.0, 0.0], &[0.0, 1.0]]);
    }

    /// Independent oracle: every assignment of all n coordinates to
    /// {lower, upper, free}, with exactly one free, solved and filtered.
    /// For the three-objective example the answer below was produced by
    /// hand from this enumeration.
    #[test]
    fn three_objective_hexagon() {
        let pts = extreme_points(&iwv(&[0.1, 0.2, 0.1], &[0.5, 0.6, 0.4])).unwrap();
        assert_same_set(
            &pts,
            &[
                &[0.4, 0.2, 0.4],
                &[0.3, 0.6, 0.1],
                &[0.1, 0.5, 0.4],
                &[0.5, 0.4, 0.1],
                &[0.1, 0.6, 0.3],
                &[0.5, 0.2, 0.3],
            ],
        );
    }

    #[test]
    fn point_interval_has_one_vertex() {
        let pts = extreme_points(&iwv(&[0.3, 0.7], &[0.3, 0.7])).unwrap();
        assert_same_set(&pts, &[&[0.3, 0.7]]);
    }

    proptest! {
        #[test]
        fn vertices_lie_in_the_polytope(
            raw in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..5),
        ) {
            let lower: Vec<f64> = raw.iter().map(|(a, b)| a.min(*b)).collect();
            let upper: Vec<f64> = raw.iter().map(|(a, b)| a.max(*b)).collect();
            let Ok(iwv) = IntervalWeightVector::new(lower.clone(), upper.clone()) else {
                return Ok(());
            };
            let pts = extreme_points(&iwv).unwrap();
            prop_assert!(!pts.is_empty());
            if lower.len() == 2 {
                prop_assert!(pts.len() <= 2);
            }
            for w in &pts {
                prop_assert!((w.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                prop_assert!(iwv.contains(w));
                let at_bound = w.as_slice().iter().enumerate()
                    .filter(|&(i, x)| (x - lower[i]).abs() <= 1e-9 || (x - upper[i]).abs() <= 1e-9)
                    .count();
                prop_assert!(at_bound + 1 >= lower.len());
            }
        }
    }
}
