//! Small dense complex determinants by LU with partial pivoting.

use num_complex::Complex64 as C;

/// Condition numbers above this raise the ill-conditioned flag.
pub const COND_FLAG: f64 = 1e10;

#[derive(Debug, Clone, Copy)]
pub struct DetResult {
    pub det: C,
    /// 1-norm condition number estimate (infinite when singular).
    pub cond: f64,
}

impl DetResult {
    pub fn ill_conditioned(&self) -> bool {
        !(self.cond <= COND_FLAG)
    }
}

fn lu(a: &mut [Vec<C>]) -> (Vec<usize>, C) {
    let n = a.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut det = C::new(1.0, 0.0);
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].norm().total_cmp(&a[j][k].norm())).unwrap();
        if p != k {
            a.swap(p, k);
            perm.swap(p, k);
            det = -det;
        }
        let piv = a[k][k];
        det *= piv;
        if piv.norm() == 0.0 {
            continue;
        }
        for i in k + 1..n {
            let f = a[i][k] / piv;
            a[i][k] = f;
            for j in k + 1..n {
                let akj = a[k][j];
                a[i][j] -= f * akj;
            }
        }
    }
    (perm, det)
}

pub fn det(m: &[Vec<C>]) -> C {
    let mut a = m.to_vec();
    lu(&mut a).1
}

pub fn det_real(m: &[Vec<f64>]) -> f64 {
    let c: Vec<Vec<C>> = m.iter().map(|r| r.iter().map(|&x| C::new(x, 0.0)).collect()).collect();
    det(&c).re
}

fn norm1(m: &[Vec<C>]) -> f64 {
    let n = m.len();
    (0..n).map(|j| (0..n).map(|i| m[i][j].norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Determinant together with κ₁(A) = ‖A‖₁‖A⁻¹‖₁.
pub fn det_with_condition(m: &[Vec<C>]) -> DetResult {
    let n = m.len();
    if n == 0 {
        return DetResult { det: C::new(1.0, 0.0), cond: 1.0 };
    }
    let mut a = m.to_vec();
    let (perm, d) = lu(&mut a);
    if (0..n).any(|k| a[k][k].norm() == 0.0) {
        return DetResult { det: d, cond: f64::INFINITY };
    }
    let mut inv = vec![vec![C::new(0.0, 0.0); n]; n];
    for col in 0..n {
        let mut x: Vec<C> = (0..n).map(|i| if perm[i] == col { C::new(1.0, 0.0) } else { C::new(0.0, 0.0) }).collect();
        for i in 0..n {
            for j in 0..i {
                let t = a[i][j] * x[j];
                x[i] -= t;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let t = a[i][j] * x[j];
                x[i] -= t;
            }
            x[i] /= a[i][i];
        }
        for i in 0..n {
            inv[i][col] = x[i];
        }
    }
    DetResult { det: d, cond: norm1(m) * norm1(&inv) }
}
