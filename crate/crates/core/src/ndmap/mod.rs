//! Discrete Neumann-to-Dirichlet operators on the mean-free currents of Γ
//! and the test operators built from them.
//!
//! Every operator is stored as the matrix `H` of a sesquilinear form in the
//! basis of [`BoundaryBasis`]: for the ND map `H[m,k] = ∫_Γ u_k ψ_m ds`, so
//! that `cᴴ H c = conj⟨f, Λf⟩` and `Λ(A*)` is represented by `Hᴴ`. Loewner
//! comparisons are generalized eigenvalue problems against the Gram matrix.

mod basis;
mod operators;

pub use basis::BoundaryBasis;
pub use operators::{
    extreme_operators, linearized_test_operators, nonlinear_test_operators, skew_quadratic_field,
    ExtremeOperators, LinearizedBase, LinearizedOperators, NonlinearOperators,
};

use nalgebra::{DMatrix, DVector};

use crate::coeff::MatrixField;
use crate::forward::{FactorizedSystem, FieldSolution};
use crate::linalg::{self, hermitian_part, skew_part};
use crate::mesh::{GammaSpec, Mesh, RegionMask};
use crate::{Error, Result, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct NDOperator {
    matrix: DMatrix<C64>,
    gram: DMatrix<C64>,
}

impl NDOperator {
    pub fn new(matrix: DMatrix<C64>, gram: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || gram.shape() != matrix.shape() {
            return Err(Error::Dimension { expected: gram.nrows(), got: matrix.nrows() });
        }
        Ok(Self { matrix, gram })
    }

    pub fn zeros(gram: &DMatrix<C64>) -> Self {
        Self { matrix: DMatrix::zeros(gram.nrows(), gram.ncols()), gram: gram.clone() }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn gram(&self) -> &DMatrix<C64> {
        &self.gram
    }

    fn with(&self, matrix: DMatrix<C64>) -> Self {
        Self { matrix, gram: self.gram.clone() }
    }

    pub fn adjoint(&self) -> Self {
        self.with(self.matrix.adjoint())
    }

    /// `(L^R, L^I)` with `L^R = (L + L*)/2`, `L^I = (L − L*)/(2i)`.
    pub fn hermitian_split(&self) -> (Self, Self) {
        (self.re(), self.with(skew_part(&self.matrix)))
    }

    pub fn re(&self) -> Self {
        self.with(hermitian_part(&self.matrix))
    }

    pub fn add(&self, other: &Self) -> Self {
        self.with(&self.matrix + &other.matrix)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.with(&self.matrix - &other.matrix)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.with(&self.matrix * C64::new(s, 0.0))
    }

    /// `⟨f, L g⟩` for basis coordinates `f`, `g`.
    pub fn pairing(&self, f: &DVector<C64>, g: &DVector<C64>) -> C64 {
        f.dotc(&(&self.matrix * g)).conj()
    }

    pub fn hermitian_defect(&self) -> f64 {
        linalg::hermitian_defect(&self.matrix)
    }

    /// Ascending eigenvalues of the Hermitian part against the Gram matrix.
    pub fn generalized_eigenvalues(&self) -> Result<Vec<f64>> {
        linalg::generalized_eigenvalues(&self.matrix, &self.gram)
    }

    pub fn operator_norm(&self) -> Result<f64> {
        linalg::operator_norm(&self.matrix, &self.gram)
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.matrix)
    }

    pub fn to_csv(&self) -> String {
        matrix_to_csv(&self.matrix)
    }

    pub fn gram_to_csv(&self) -> String {
        matrix_to_csv(&self.gram)
    }

    pub fn from_csv(matrix: &str, gram: &str) -> Result<Self> {
        Self::new(matrix_from_csv(matrix)?, matrix_from_csv(gram)?)
    }
}

/// `dimension,N` then `i,j,re,im` rows.
pub fn matrix_to_csv(m: &DMatrix<C64>) -> String {
    let mut out = format!("dimension,{}\ni,j,re,im\n", m.nrows());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            out.push_str(&format!("{i},{j},{:.11e},{:.11e}\n", z.re, z.im));
        }
    }
    out
}

pub fn matrix_from_csv(s: &str) -> Result<DMatrix<C64>> {
    let mut lines = s.lines().map(str::trim).filter(|l| !l.is_empty());
    let bad = |msg: String| Error::Parse(msg);
    let n: usize = lines
        .next()
        .and_then(|l| l.strip_prefix("dimension,"))
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| bad("missing `dimension,N` header".into()))?;
    let mut m = DMatrix::zeros(n, n);
    for line in lines {
        if line.starts_with("i,") {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(bad(format!("expected 4 fields in `{line}`")));
        }
        let idx = |k: usize| f[k].parse::<usize>().ok().filter(|&v| v < n);
        let val = |k: usize| f[k].parse::<f64>().ok();
        match (idx(0), idx(1), val(2), val(3)) {
            (Some(i), Some(j), Some(re), Some(im)) => m[(i, j)] = C64::new(re, im),
            _ => return Err(bad(format!("malformed row `{line}`"))),
        }
    }
    Ok(m)
}

/// Solutions for the basis currents, kept with a transposed real/imaginary
/// copy (`dim × n_nodes`) for the energy-form products.
#[derive(Clone, Debug)]
pub struct SolutionSet {
    solutions: Vec<FieldSolution>,
    ur: DMatrix<f64>,
    ui: DMatrix<f64>,
}

impl SolutionSet {
    pub fn new(solutions: Vec<FieldSolution>) -> Self {
        let d = solutions.len();
        let n = solutions.first().map_or(0, |s| s.values().len());
        let ur = DMatrix::from_fn(d, n, |k, i| solutions[k].values()[i].re);
        let ui = DMatrix::from_fn(d, n, |k, i| solutions[k].values()[i].im);
        Self { solutions, ur, ui }
    }

    pub fn solutions(&self) -> &[FieldSolution] {
        &self.solutions
    }

    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    /// Solution for the current with basis coordinates `c`.
    pub fn combine(&self, c: &DVector<C64>) -> FieldSolution {
        let n = self.ur.ncols();
        let values = (0..n)
            .map(|i| (0..self.len()).map(|k| c[k] * C64::new(self.ur[(k, i)], self.ui[(k, i)])).sum())
            .collect();
        let mut u = FieldSolution::new(values);
        if let Some(ex) = self.solutions.first().and_then(|s| s.excluded()) {
            u = u.with_excluded(ex.clone());
        }
        u
    }

    /// `E[m,k] = ∫_region X ∇u_k · conj(∇u_m) dx`.
    pub fn energy_form(&self, mesh: &Mesh, x: &MatrixField, region: &RegionMask) -> Result<DMatrix<C64>> {
        let d = self.len();
        if x.len() != mesh.n_triangles() || region.len() != mesh.n_triangles() {
            return Err(Error::Dimension { expected: mesh.n_triangles(), got: x.len().min(region.len()) });
        }
        let first = match self.solutions.first() {
            Some(s) => s,
            None => return Ok(DMatrix::zeros(0, 0)),
        };
        let elements: Vec<usize> = region.iter().filter(|&t| !first.is_excluded(t)).collect();
        let mut local = vec![usize::MAX; mesh.n_nodes()];
        let mut support = Vec::new();
        for &t in &elements {
            for v in mesh.triangles()[t] {
                if local[v] == usize::MAX {
                    local[v] = support.len();
                    support.push(v);
                }
            }
        }
        if support.is_empty() {
            return Ok(DMatrix::zeros(d, d));
        }
        let s = support.len();
        // Y = K_X U on the support rows, stored transposed (d × s)
        let mut yr = DMatrix::<f64>::zeros(d, s);
        let mut yi = DMatrix::<f64>::zeros(d, s);
        for &t in &elements {
            let g = mesh.hat_gradients(t);
            let tri = mesh.triangles()[t];
            let xt = x.value(t).scale_re(mesh.area(t));
            for a in 0..3 {
                let la = local[tri[a]];
                for b in 0..3 {
                    let k = xt.real_form(g[a], g[b]);
                    let (ur, ui) = (self.ur.column(tri[b]), self.ui.column(tri[b]));
                    let mut cr = yr.column_mut(la);
                    cr.axpy(k.re, &ur, 1.0);
                    cr.axpy(-k.im, &ui, 1.0);
                    let mut ci = yi.column_mut(la);
                    ci.axpy(k.re, &ui, 1.0);
                    ci.axpy(k.im, &ur, 1.0);
                }
            }
        }
        let usr = self.ur.select_columns(&support);
        let usi = self.ui.select_columns(&support);
        let (yrt, yit) = (yr.transpose(), yi.transpose());
        // conj(U_S)ᵀ Y with U = Ur + iUi, Y = Yr + iYi
        let re = &usr * &yrt + &usi * &yit;
        let im = &usr * &yit - &usi * &yrt;
        Ok(DMatrix::from_fn(d, d, |m, k| C64::new(re[(m, k)], im[(m, k)])))
    }
}

/// ND operator together with the basis solutions it was assembled from.
#[derive(Clone, Debug)]
pub struct NdData {
    pub operator: NDOperator,
    pub solutions: SolutionSet,
}

/// Solves once per basis current and projects the traces.
pub fn compute_nd(mesh: &Mesh, gamma: &GammaSpec, system: &FactorizedSystem) -> Result<NdData> {
    let basis = BoundaryBasis::new(mesh, gamma)?;
    compute_nd_in(mesh, gamma, system, &basis)
}

pub fn compute_nd_in(mesh: &Mesh, gamma: &GammaSpec, system: &FactorizedSystem, basis: &BoundaryBasis) -> Result<NdData> {
    if system.n_nodes() != mesh.n_nodes() {
        return Err(Error::Dimension { expected: mesh.n_nodes(), got: system.n_nodes() });
    }
    let loads: Vec<Vec<C64>> =
        (0..basis.dim()).map(|k| basis.basis_current(mesh, gamma, k).load(mesh, gamma)).collect();
    let solutions = system.solve_loads(&loads)?;
    let d = basis.dim();
    let mut g = DMatrix::zeros(d, d);
    for (k, u) in solutions.iter().enumerate() {
        g.set_column(k, &basis.trace_coefficients(u));
    }
    Ok(NdData { operator: NDOperator::new(g, basis.gram())?, solutions: SolutionSet::new(solutions) })
}

/// Assembles and factors `A`, then computes its ND operator.
pub fn nd_for_coefficient(mesh: &Mesh, gamma: &GammaSpec, a: &MatrixField) -> Result<NdData> {
    let system = crate::forward::assemble_and_factor(mesh, a, gamma)?;
    compute_nd(mesh, gamma, &system)
}

#[cfg(test)]
mod tests;
