//! Top principal components of a small neighborhood.
//!
//! Small dimensions use cyclic Jacobi rotations on the covariance matrix; large
//! ones use power iteration with deflation on the implicit covariance
//! `X^T X / (m - 1)`, so the `dim x dim` matrix is never formed.

/// Dimensions up to this size use the dense Jacobi path.
pub const JACOBI_MAX_DIM: usize = 64;

const JACOBI_SWEEPS: usize = 100;
const POWER_MAX_ITER: usize = 2000;
const POWER_TOL: f64 = 1e-13;

/// Projects mean-centered `rows` onto their top `k` principal axes.
///
/// Each axis is sign-normalized so its largest-magnitude component is
/// positive. Axes beyond the data's dimension (or rank) project to zero.
pub fn top_components(rows: &[&[f64]], k: usize) -> Vec<Vec<f64>> {
    let m = rows.len();
    let dim = rows.first().map_or(0, |r| r.len());
    if m == 0 {
        return Vec::new();
    }
    let mut mean = vec![0.0; dim];
    for r in rows {
        for (acc, x) in mean.iter_mut().zip(r.iter()) {
            *acc += x;
        }
    }
    mean.iter_mut().for_each(|x| *x /= m as f64);
    let centered: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().zip(&mean).map(|(x, mu)| x - mu).collect()).collect();

    let axes = if dim <= JACOBI_MAX_DIM { jacobi_axes(&centered, dim, k) } else { power_axes(&centered, dim, k) };
    centered.iter().map(|row| (0..k).map(|a| axes.get(a).map_or(0.0, |axis| dot(row, axis))).collect()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize_sign(v: &mut [f64]) {
    let pivot = v.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn jacobi_axes(centered: &[Vec<f64>], dim: usize, k: usize) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; dim]; dim];
    for row in centered {
        for i in 0..dim {
            for j in i..dim {
                a[i][j] += row[i] * row[j];
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            a[i][j] = a[j][i];
        }
    }
    let (values, vectors) = jacobi_eigen(a);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    order
        .into_iter()
        .take(k)
        .map(|c| {
            let mut v: Vec<f64> = (0..dim).map(|r| vectors[r][c]).collect();
            normalize_sign(&mut v);
            v
        })
        .collect()
}

/// Eigen-decomposition of a symmetric matrix; returns (values, column eigenvectors).
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..JACOBI_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

fn power_axes(centered: &[Vec<f64>], dim: usize, k: usize) -> Vec<Vec<f64>> {
    let apply = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for row in centered {
            let s = dot(row, v);
            for (o, x) in out.iter_mut().zip(row) {
                *o += s * x;
            }
        }
        out
    };
    let total: f64 = centered.iter().map(|r| dot(r, r)).sum();
    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(k);
    for a in 0..k.min(dim) {
        // Deterministic start that is unlikely to be orthogonal to any axis.
        let mut v: Vec<f64> = (0..dim).map(|i| 1.0 + ((i * 31 + a * 17) % 97) as f64 / 97.0).collect();
        let mut found = false;
        for _ in 0..POWER_MAX_ITER {
            for axis in &axes {
                let s = dot(&v, axis);
                v.iter_mut().zip(axis).for_each(|(x, y)| *x -= s * y);
            }
            let norm = dot(&v, &v).sqrt();
            if norm <= 1e-300 {
                break;
            }
            v.iter_mut().for_each(|x| *x /= norm);
            let mut w = apply(&v);
            for axis in &axes {
                let s = dot(&w, axis);
                w.iter_mut().zip(axis).for_each(|(x, y)| *x -= s * y);
            }
            let wn = dot(&w, &w).sqrt();
            if wn <= 1e-14 * total.max(f64::MIN_POSITIVE) {
                // Remaining variance is numerically zero.
                break;
            }
            let next: Vec<f64> = w.iter().map(|x| x / wn).collect();
            let diff: f64 = next.iter().zip(&v).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            v = next;
            found = true;
            if diff < POWER_TOL {
                break;
            }
        }
        if !found {
            break;
        }
        normalize_sign(&mut v);
        axes.push(v);
    }
    axes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_diagonalizes() {
        let a = vec![vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 2.0]];
        let (vals, vecs) = jacobi_eigen(a.clone());
        for c in 0..3 {
            for r in 0..3 {
                let av: f64 = (0..3).map(|k| a[r][k] * vecs[k][c]).sum();
                assert!((av - vals[c] * vecs[r][c]).abs() < 1e-12);
            }
        }
        let trace: f64 = vals.iter().sum();
        assert!((trace - 9.0).abs() < 1e-12);
    }

    #[test]
    fn two_points_project_to_a_line() {
        let a = [0.0, 0.0, 0.0, 0.0];
        let b = [1.0, 2.0, 2.0, 0.0];
        let p = top_components(&[&a, &b], 3);
        assert!((p[0][0] - p[1][0]).abs() - 3.0 < 1e-12);
        for row in &p {
            assert!(row[1].abs() < 1e-12 && row[2].abs() < 1e-12);
        }
    }

    #[test]
    fn low_dimensional_input_is_padded() {
        let rows: Vec<[f64; 2]> = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]];
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let p = top_components(&refs, 3);
        assert!(p.iter().all(|r| r.len() == 3 && r[2] == 0.0));
    }

    #[test]
    fn sign_convention() {
        let mut v = vec![0.1, -0.9, 0.3];
        normalize_sign(&mut v);
        assert_eq!(v, vec![-0.1, 0.9, -0.3]);
    }
}
