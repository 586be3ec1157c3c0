//! Small dense helpers: 2×2 complex matrices, Hermitian generalized
//! eigenproblems and Gauss–Legendre rules.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// 2×2 complex matrix, row-major. Serialized as 8 reals
/// `[re a11, im a11, re a12, im a12, re a21, im a21, re a22, im a22]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 8]", into = "[f64; 8]")]
pub struct Mat2(pub [[C64; 2]; 2]);

impl From<[f64; 8]> for Mat2 {
    fn from(v: [f64; 8]) -> Self {
        Mat2([
            [C64::new(v[0], v[1]), C64::new(v[2], v[3])],
            [C64::new(v[4], v[5]), C64::new(v[6], v[7])],
        ])
    }
}

impl From<Mat2> for [f64; 8] {
    fn from(m: Mat2) -> Self {
        let a = m.0;
        [a[0][0].re, a[0][0].im, a[0][1].re, a[0][1].im, a[1][0].re, a[1][0].im, a[1][1].re, a[1][1].im]
    }
}

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[ZERO, ZERO], [ZERO, ZERO]]);
    pub const IDENTITY: Mat2 = Mat2([[ONE, ZERO], [ZERO, ONE]]);

    pub fn new(a11: C64, a12: C64, a21: C64, a22: C64) -> Self {
        Mat2([[a11, a12], [a21, a22]])
    }

    pub fn real(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Mat2::new(a11.into(), a12.into(), a21.into(), a22.into())
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Mat2::real(a, 0.0, 0.0, b)
    }

    pub fn scalar(s: C64) -> Self {
        Mat2::new(s, ZERO, ZERO, s)
    }

    pub fn identity_times(s: f64) -> Self {
        Mat2::scalar(s.into())
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[i][j]
    }

    pub fn adjoint(&self) -> Self {
        let a = self.0;
        Mat2::new(a[0][0].conj(), a[1][0].conj(), a[0][1].conj(), a[1][1].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        let a = self.0;
        Mat2::new(a[0][0] * s, a[0][1] * s, a[1][0] * s, a[1][1] * s)
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(s.into())
    }

    /// Self-adjoint part `(A + A*)/2`.
    pub fn re_part(&self) -> Self {
        (*self + self.adjoint()).scale_re(0.5)
    }

    /// Skew part `(A − A*)/(2i)`, Hermitian.
    pub fn im_part(&self) -> Self {
        (*self - self.adjoint()).scale(C64::new(0.0, -0.5))
    }

    pub fn det(&self) -> C64 {
        let a = self.0;
        a[0][0] * a[1][1] - a[0][1] * a[1][0]
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d.norm() == 0.0 || !d.is_finite() {
            return None;
        }
        let a = self.0;
        Some(Mat2::new(a[1][1], -a[0][1], -a[1][0], a[0][0]).scale(d.inv()))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (*self - self.adjoint()).max_abs() <= tol
    }

    /// Scalar multiple of the identity (to `tol`).
    pub fn is_isotropic(&self, tol: f64) -> bool {
        let a = self.0;
        a[0][1].norm() <= tol && a[1][0].norm() <= tol && (a[0][0] - a[1][1]).norm() <= tol
    }

    /// Eigenvalues (ascending) of the Hermitian part of `self`; for Hermitian
    /// input these are its eigenvalues.
    pub fn hermitian_eigenvalues(&self) -> [f64; 2] {
        let h = self.re_part().0;
        let (a, d) = (h[0][0].re, h[1][1].re);
        let b = h[0][1];
        let mean = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        [mean - rad, mean + rad]
    }

    pub fn spectral_norm(&self) -> f64 {
        let g = self.adjoint() * *self;
        g.hermitian_eigenvalues()[1].max(0.0).sqrt()
    }

    /// `x* A y` for complex 2-vectors.
    pub fn form(&self, x: [C64; 2], y: [C64; 2]) -> C64 {
        let ay = self.apply(y);
        x[0].conj() * ay[0] + x[1].conj() * ay[1]
    }

    pub fn apply(&self, y: [C64; 2]) -> [C64; 2] {
        let a = self.0;
        [a[0][0] * y[0] + a[0][1] * y[1], a[1][0] * y[0] + a[1][1] * y[1]]
    }

    /// `gᵀ A h` for real vectors, the element stiffness kernel.
    pub fn real_form(&self, g: [f64; 2], h: [f64; 2]) -> C64 {
        let a = self.0;
        (a[0][0] * h[0] + a[0][1] * h[1]) * g[0] + (a[1][0] * h[0] + a[1][1] * h[1]) * g[1]
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let (a, b) = (self.0, o.0);
        Mat2::new(a[0][0] + b[0][0], a[0][1] + b[0][1], a[1][0] + b[1][0], a[1][1] + b[1][1])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        self + (-o)
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scale_re(-1.0)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let (a, b) = (self.0, o.0);
        Mat2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

/// `(H + Hᴴ)/2`
pub fn hermitian_part(h: &DMatrix<C64>) -> DMatrix<C64> {
    (h + h.adjoint()) * C64::new(0.5, 0.0)
}

/// `(H − Hᴴ)/(2i)`
pub fn skew_part(h: &DMatrix<C64>) -> DMatrix<C64> {
    (h - h.adjoint()) * C64::new(0.0, -0.5)
}

pub fn max_abs(h: &DMatrix<C64>) -> f64 {
    h.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Relative distance of `h` from Hermitian, `max|H − Hᴴ| / max|H|`.
pub fn hermitian_defect(h: &DMatrix<C64>) -> f64 {
    let scale = max_abs(h);
    if scale == 0.0 {
        return 0.0;
    }
    max_abs(&(h - h.adjoint())) / scale
}

/// Cholesky factor of a Hermitian positive definite matrix, used to reduce
/// generalized problems `H x = λ G x` to standard form.
pub struct GramFactor {
    l: DMatrix<C64>,
    identity: bool,
}

impl GramFactor {
    pub fn new(gram: &DMatrix<C64>) -> Result<Self> {
        let n = gram.nrows();
        let identity = (gram - DMatrix::<C64>::identity(n, n)).iter().all(|z| z.norm() <= 1e-13);
        let l = if identity {
            DMatrix::identity(n, n)
        } else {
            nalgebra::Cholesky::new(hermitian_part(gram))
                .ok_or_else(|| Error::NdMap("Gram matrix is not positive definite".into()))?
                .unpack()
        };
        Ok(Self { l, identity })
    }

    /// `L⁻¹ H L⁻ᴴ`, Hermitian-symmetrized.
    pub fn reduce(&self, h: &DMatrix<C64>) -> DMatrix<C64> {
        if self.identity {
            return hermitian_part(h);
        }
        let mut x = h.clone();
        self.l.solve_lower_triangular_mut(&mut x);
        let mut y = x.adjoint();
        self.l.solve_lower_triangular_mut(&mut y);
        hermitian_part(&y)
    }

    /// Maps eigenvectors of the reduced problem back: `x = L⁻ᴴ y`.
    pub fn back_transform(&self, y: &DMatrix<C64>) -> DMatrix<C64> {
        if self.identity {
            return y.clone();
        }
        let lh = self.l.adjoint();
        lh.solve_upper_triangular(y).expect("Cholesky factor is nonsingular")
    }
}

/// Ascending generalized eigenvalues of the Hermitian pencil `(H, G)`.
pub fn generalized_eigenvalues(h: &DMatrix<C64>, gram: &DMatrix<C64>) -> Result<Vec<f64>> {
    check_square(h, gram)?;
    if h.nrows() == 0 {
        return Ok(Vec::new());
    }
    let red = GramFactor::new(gram)?.reduce(h);
    let mut ev: Vec<f64> = red.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Ascending generalized eigenpairs of `(H, G)`; eigenvectors are
/// `G`-orthonormal columns.
pub fn generalized_eigen(h: &DMatrix<C64>, gram: &DMatrix<C64>) -> Result<(Vec<f64>, DMatrix<C64>)> {
    check_square(h, gram)?;
    let factor = GramFactor::new(gram)?;
    let eig = factor.reduce(h).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let sorted = DMatrix::from_fn(h.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, factor.back_transform(&sorted)))
}

fn check_square(h: &DMatrix<C64>, gram: &DMatrix<C64>) -> Result<()> {
    if h.nrows() != h.ncols() || gram.nrows() != gram.ncols() || h.nrows() != gram.nrows() {
        return Err(Error::Dimension { expected: gram.nrows(), got: h.nrows() });
    }
    Ok(())
}

/// Operator norm of the sesquilinear form `H` w.r.t. the `G`-inner product,
/// `sup |xᴴHy| / (‖x‖_G ‖y‖_G) = ‖L⁻¹ H L⁻ᴴ‖₂`.
pub fn operator_norm(h: &DMatrix<C64>, gram: &DMatrix<C64>) -> Result<f64> {
    check_square(h, gram)?;
    let factor = GramFactor::new(gram)?;
    let x = if factor.identity {
        h.clone()
    } else {
        let mut x = h.clone();
        factor.l.solve_lower_triangular_mut(&mut x);
        let mut y = x.adjoint();
        factor.l.solve_lower_triangular_mut(&mut y);
        y
    };
    Ok(x.singular_values().iter().copied().fold(0.0, f64::max))
}

pub fn cvec_norm(v: &DVector<C64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        // Newton on P_n starting from the Chebyshev-like guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(0.5 * (1.0 - x));
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn split_of_upper_triangular_sample() {
        let a = Mat2::real(1.0, 2.0, 0.0, 1.0);
        assert_eq!(a.re_part(), Mat2::real(1.0, 1.0, 1.0, 1.0));
        assert_eq!(a.im_part(), Mat2::new(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)));
    }

    #[test]
    fn eigenvalues_and_norms() {
        let [l0, l1] = Mat2::real(1.0, 1.0, 1.0, 1.0).hermitian_eigenvalues();
        assert_relative_eq!(l0, 0.0, epsilon = 1e-15);
        assert_relative_eq!(l1, 2.0, epsilon = 1e-15);
        // [[0,-i],[i,0]] has eigenvalues ±1
        let j = Mat2::new(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0));
        assert_relative_eq!(j.scale_re(0.5).spectral_norm(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(Mat2::real(0.0, 3.0, 0.0, 0.0).spectral_norm(), 3.0, epsilon = 1e-15);
        let m = Mat2::new(c(1.0, 2.0), c(-0.5, 0.3), c(0.2, 0.0), c(3.0, -1.0));
        let p = m * m.inverse().unwrap();
        assert!((p - Mat2::IDENTITY).max_abs() < 1e-14);
    }

    #[test]
    fn serde_uses_eight_reals() {
        let m = Mat2::new(c(1.0, 2.0), c(3.0, 4.0), c(5.0, 6.0), c(7.0, 8.0));
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[1.0,2.0,3.0,4.0,5.0,6.0,7.0,8.0]");
        assert_eq!(serde_json::from_str::<Mat2>(&s).unwrap(), m);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre_01(n);
            for deg in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert_relative_eq!(q, 1.0 / (deg as f64 + 1.0), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn generalized_eigen_against_diagonal_gram() {
        let g = DMatrix::from_diagonal(&DVector::from_vec(vec![c(2.0, 0.0), c(4.0, 0.0)]));
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![c(2.0, 0.0), c(-8.0, 0.0)]));
        let ev = generalized_eigenvalues(&h, &g).unwrap();
        assert_relative_eq!(ev[0], -2.0, epsilon = 1e-14);
        assert_relative_eq!(ev[1], 1.0, epsilon = 1e-14);
        let (vals, vecs) = generalized_eigen(&h, &g).unwrap();
        assert_eq!(vals.len(), 2);
        let gn = vecs.adjoint() * &g * &vecs;
        assert!((gn - DMatrix::<C64>::identity(2, 2)).iter().all(|z| z.norm() < 1e-13));
        assert_relative_eq!(operator_norm(&h, &g).unwrap(), 2.0, epsilon = 1e-13);
    }
}
