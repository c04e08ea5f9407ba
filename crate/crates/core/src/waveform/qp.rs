//! Strictly convex quadratic programs with box constraints.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct BoxQpSolution {
    pub x: DVector<f64>,
    /// -1 at the lower bound, +1 at the upper bound, 0 free.
    pub active: Vec<i8>,
    pub iterations: usize,
}

/// Minimizes ½xᵀPx + cᵀx subject to lo ≤ x ≤ hi with a primal active-set
/// method. `P` must be symmetric positive definite. Variables with lo == hi
/// stay fixed. Returns None if the iteration limit is hit.
pub fn solve_box_qp(p: &DMatrix<f64>, c: &DVector<f64>, lo: &[f64], hi: &[f64]) -> Option<BoxQpSolution> {
    let n = c.len();
    assert!(p.nrows() == n && p.ncols() == n && lo.len() == n && hi.len() == n);
    let mut x = DVector::from_fn(n, |i, _| 0.0f64.clamp(lo[i], hi[i]));
    let mut active: Vec<i8> = (0..n)
        .map(|i| {
            if lo[i] == hi[i] {
                -1
            } else {
                0
            }
        })
        .collect();
    let fixed: Vec<bool> = (0..n).map(|i| lo[i] == hi[i]).collect();
    let max_iter = 20 * n + 20;
    for it in 0..max_iter {
        let free: Vec<usize> = (0..n).filter(|&i| active[i] == 0).collect();
        let target = if free.is_empty() {
            x.clone()
        } else {
            let pf = DMatrix::from_fn(free.len(), free.len(), |a, b| p[(free[a], free[b])]);
            let mut rhs = DVector::from_fn(free.len(), |a, _| -c[free[a]]);
            for (a, &i) in free.iter().enumerate() {
                for j in 0..n {
                    if active[j] != 0 {
                        rhs[a] -= p[(i, j)] * x[j];
                    }
                }
            }
            let xf = pf.cholesky()?.solve(&rhs);
            let mut t = x.clone();
            for (a, &i) in free.iter().enumerate() {
                t[i] = xf[a];
            }
            t
        };
        // step towards the subspace minimizer, stopping at the first bound
        let mut alpha = 1.0;
        let mut blocking = None;
        for &i in &free {
            let d = target[i] - x[i];
            if target[i] < lo[i] && d < 0.0 {
                let a = (lo[i] - x[i]) / d;
                if a < alpha {
                    alpha = a;
                    blocking = Some((i, -1));
                }
            } else if target[i] > hi[i] && d > 0.0 {
                let a = (hi[i] - x[i]) / d;
                if a < alpha {
                    alpha = a;
                    blocking = Some((i, 1));
                }
            }
        }
        for &i in &free {
            x[i] += alpha.max(0.0) * (target[i] - x[i]);
        }
        if let Some((i, side)) = blocking {
            x[i] = if side < 0 { lo[i] } else { hi[i] };
            active[i] = side;
            continue;
        }
        // subspace optimum reached: release the bound with the worst multiplier
        let g = p * &x + c;
        let mut worst = None;
        let mut worst_val = 0.0;
        for i in 0..n {
            if fixed[i] || active[i] == 0 {
                continue;
            }
            // at lo the gradient must be >= 0, at hi <= 0
            let viol = if active[i] < 0 { -g[i] } else { g[i] };
            let tol = 1e-12 * (1.0 + g.amax());
            if viol > tol && viol > worst_val {
                worst_val = viol;
                worst = Some(i);
            }
        }
        match worst {
            Some(i) => active[i] = 0,
            None => return Some(BoxQpSolution { x, active, iterations: it + 1 }),
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn objective(p: &DMatrix<f64>, c: &DVector<f64>, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(p * x)) + c.dot(x)
    }

    #[test]
    fn unconstrained_minimum_when_inside() {
        let p = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let c = DVector::from_vec(vec![-1.0, 0.3]);
        let s = solve_box_qp(&p, &c, &[-10.0; 2], &[10.0; 2]).unwrap();
        let exact = p.clone().cholesky().unwrap().solve(&(-&c));
        assert!((s.x - exact).amax() < 1e-12);
        assert_eq!(s.active, vec![0, 0]);
    }

    #[test]
    fn separable_problem_clamps() {
        let p = DMatrix::identity(3, 3);
        let c = DVector::from_vec(vec![-5.0, 5.0, -0.5]);
        let s = solve_box_qp(&p, &c, &[-1.0; 3], &[1.0; 3]).unwrap();
        assert_eq!(s.x.as_slice(), &[1.0, -1.0, 0.5]);
        assert_eq!(s.active, vec![1, -1, 0]);
    }

    #[test]
    fn fixed_variables_stay_fixed() {
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.9, 0.9, 1.0]);
        let c = DVector::from_vec(vec![-1.0, -1.0]);
        let s = solve_box_qp(&p, &c, &[0.25, -5.0], &[0.25, 5.0]).unwrap();
        assert_eq!(s.x[0], 0.25);
        assert!((s.x[1] - (1.0 - 0.9 * 0.25)).abs() < 1e-12);
    }

    proptest! {
        // KKT optimality: no feasible coordinate perturbation lowers the objective
        #[test]
        fn solution_is_optimal(seed in proptest::collection::vec(-1.0f64..1.0, 36), c in proptest::collection::vec(-3.0f64..3.0, 6), b in 0.05f64..2.0) {
            let a = DMatrix::from_row_slice(6, 6, &seed);
            let p = &a * a.transpose() + DMatrix::identity(6, 6) * 0.1;
            let c = DVector::from_vec(c);
            let lo = vec![-b; 6];
            let hi = vec![b; 6];
            let s = solve_box_qp(&p, &c, &lo, &hi).unwrap();
            prop_assert!(s.x.iter().all(|v| *v >= -b && *v <= b));
            let f0 = objective(&p, &c, &s.x);
            for i in 0..6 {
                for d in [1e-4, -1e-4] {
                    let mut y = s.x.clone();
                    y[i] = (y[i] + d).clamp(-b, b);
                    prop_assert!(objective(&p, &c, &y) >= f0 - 1e-12);
                }
            }
        }
    }
}
