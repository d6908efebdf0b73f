//! Euclidean projection onto the probability simplex.

use crate::error::{check_finite, Result};

/// Projects `v` onto `{x : x >= 0, sum x = 1}` by the sort-and-threshold rule:
/// `x_i = max(v_i - theta, 0)` with `theta` chosen so the result sums to one.
pub fn project_simplex(v: &[f64]) -> Result<Vec<f64>> {
    check_finite(v, "vector to project")?;
    let mut out = vec![0.0; v.len()];
    let mut scratch = Vec::with_capacity(v.len());
    project_into(v, &mut scratch, &mut out);
    Ok(out)
}

/// Allocation-free projection used inside optimizer loops; `v` must be finite.
pub(crate) fn project_into(v: &[f64], scratch: &mut Vec<f64>, out: &mut [f64]) {
    scratch.clear();
    scratch.extend_from_slice(v);
    scratch.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, u) in scratch.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    for (o, x) in out.iter_mut().zip(v) {
        *o = (x - theta).max(0.0);
    }
    // Remove the rounding residue so the output sums to one.
    let sum: f64 = out.iter().sum();
    if sum > 0.0 {
        out.iter_mut().for_each(|x| *x /= sum);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(project_simplex(&[0.2, 0.3, 0.5]).unwrap(), vec![0.2, 0.3, 0.5]);
        let p = project_simplex(&[0.8, 0.6]).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-12 && (p[1] - 0.4).abs() < 1e-12);
        assert_eq!(project_simplex(&[10.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert!(project_simplex(&[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn two_point_grid_agrees() {
        // Dense search of the quadratic objective along the 1-simplex.
        let v = [0.8, 0.6];
        let best = (0..=100_000)
            .map(|i| i as f64 / 100_000.0)
            .min_by(|a, b| {
                let f = |x: f64| (x - v[0]).powi(2) + (1.0 - x - v[1]).powi(2);
                f(*a).total_cmp(&f(*b))
            })
            .unwrap();
        assert!((best - 0.6).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn lands_on_simplex_and_is_nearest(v in prop::collection::vec(-5.0f64..5.0, 1..8), w in prop::collection::vec(0.0f64..1.0, 8)) {
            let p = project_simplex(&v).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|x| *x >= 0.0));
            // No other simplex point is closer to v.
            let total: f64 = w[..v.len()].iter().sum::<f64>() + 1e-12;
            let q: Vec<f64> = w[..v.len()].iter().map(|x| (x + 1e-12 / v.len() as f64) / total).collect();
            let d = |x: &[f64]| x.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            prop_assert!(d(&p) <= d(&q) + 1e-9);
        }
    }
}
