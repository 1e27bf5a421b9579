//! Shared test oracles, independent of the library's solver paths.

use nalgebra::{DMatrix, DVector};

/// Exhaustive vertex oracle for `min_t sum_i |y_i - (W t)_i| + sum_j w_j |t_j|`
/// at tiny scale: a basic optimal solution has j nonzero coefficients
/// interpolating at least j observations, so enumerating every
/// (coefficient-subset, observation-subset) pair of equal size and solving the
/// interpolation system visits an optimal vertex. Returns the best objective
/// found and the attaining coefficient vector.
pub fn l1_lp_oracle(w: &DMatrix<f64>, y: &DVector<f64>, pen: &DVector<f64>) -> (f64, DVector<f64>) {
    let n = w.nrows();
    let k = w.ncols();
    assert!(k <= 5 && n <= 40, "oracle is exhaustive; keep it tiny");
    let objective = |t: &DVector<f64>| -> f64 {
        let r = y - w * t;
        r.iter().map(|v| v.abs()).sum::<f64>()
            + pen.iter().zip(t.iter()).map(|(p, v)| p * v.abs()).sum::<f64>()
    };
    let mut best = (objective(&DVector::zeros(k)), DVector::zeros(k));

    // All coefficient subsets F (nonempty) and observation subsets S with
    // |S| = |F|.
    for fmask in 1u32..(1 << k) {
        let fidx: Vec<usize> = (0..k).filter(|j| fmask & (1 << j) != 0).collect();
        let m = fidx.len();
        for smask in subsets_of_size(n, m) {
            let sidx: Vec<usize> = (0..n).filter(|i| smask & (1u64 << i) != 0).collect();
            let mut a = DMatrix::zeros(m, m);
            let mut b = DVector::zeros(m);
            for (r, &i) in sidx.iter().enumerate() {
                for (c, &j) in fidx.iter().enumerate() {
                    a[(r, c)] = w[(i, j)];
                }
                b[r] = y[i];
            }
            let Some(sol) = a.lu().solve(&b) else { continue };
            if sol.iter().any(|v| !v.is_finite()) {
                continue;
            }
            let mut t = DVector::zeros(k);
            for (c, &j) in fidx.iter().enumerate() {
                t[j] = sol[c];
            }
            let obj = objective(&t);
            if obj < best.0 {
                best = (obj, t);
            }
        }
    }

    // Subgradient verification at the winning vertex: every one-sided
    // directional derivative along a coordinate must be nonnegative.
    let t = &best.1;
    let r = y - w * t;
    let kink = 1e-9 * (1.0 + y.amax());
    for j in 0..k {
        for sign in [1.0f64, -1.0] {
            let mut dd = 0.0;
            for i in 0..n {
                let wij = sign * w[(i, j)];
                if r[i].abs() <= kink {
                    dd += wij.abs();
                } else if r[i] > 0.0 {
                    dd -= wij;
                } else {
                    dd += wij;
                }
            }
            dd += if t[j] == 0.0 || (sign > 0.0) == (t[j] > 0.0) { pen[j] } else { -pen[j] };
            assert!(
                dd >= -1e-7 * (1.0 + best.0),
                "oracle vertex fails subgradient check: coord {j} sign {sign} dd {dd}"
            );
        }
    }
    best
}

/// Iterate subset bitmasks of {0..n-1} with exactly m elements.
fn subsets_of_size(n: usize, m: usize) -> Vec<u64> {
    assert!(n <= 40);
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..m).collect();
    if m == 0 || m > n {
        return out;
    }
    loop {
        let mut mask = 0u64;
        for &i in &idx {
            mask |= 1 << i;
        }
        out.push(mask);
        // next combination
        let mut pos = m;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            if idx[pos] != pos + n - m {
                break;
            }
        }
        idx[pos] += 1;
        for t in pos + 1..m {
            idx[t] = idx[t - 1] + 1;
        }
    }
}
