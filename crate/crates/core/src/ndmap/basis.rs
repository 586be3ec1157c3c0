//! Orthonormal basis of mean-free piecewise-constant currents on Γ.

use nalgebra::{DMatrix, DVector};

use crate::forward::{BoundaryCurrent, FieldSolution};
use crate::mesh::{GammaSpec, Mesh};
use crate::{Error, Result, C64};

/// `ψ_1 … ψ_{n−1}`, piecewise constant on the `n` Γ edges, L²(Γ)-orthonormal
/// and orthogonal to constants.
///
/// Built from the Householder reflector sending `√ℓ / ‖√ℓ‖` to the first
/// axis: its remaining columns span the complement, and dividing by `√ℓ_e`
/// turns the Euclidean inner product into the boundary one.
#[derive(Clone, Debug)]
pub struct BoundaryBasis {
    /// `psi[(e, m)] = ψ_m` on edge `e`
    psi: DMatrix<f64>,
    lengths: Vec<f64>,
    edges: Vec<[usize; 2]>,
}

impl BoundaryBasis {
    pub fn new(mesh: &Mesh, gamma: &GammaSpec) -> Result<Self> {
        let n = gamma.len();
        if n < 2 {
            return Err(Error::NdMap(format!("Γ needs at least two edges, got {n}")));
        }
        let lengths: Vec<f64> = gamma.edge_indices().iter().map(|&e| mesh.edge_length(e)).collect();
        let edges = gamma.edge_indices().iter().map(|&e| mesh.boundary_edges()[e]).collect();
        let norm = lengths.iter().sum::<f64>().sqrt();
        let mut v: Vec<f64> = lengths.iter().map(|l| l.sqrt() / norm).collect();
        // s₀ > 0, so adding 1 avoids cancellation
        v[0] += 1.0;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        let psi = DMatrix::from_fn(n, n - 1, |e, m| {
            let col = m + 1;
            let h = if e == col { 1.0 } else { 0.0 } - 2.0 * v[e] * v[col] / vv;
            h / lengths[e].sqrt()
        });
        Ok(Self { psi, lengths, edges })
    }

    pub fn dim(&self) -> usize {
        self.psi.ncols()
    }

    pub fn n_edges(&self) -> usize {
        self.psi.nrows()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn psi(&self) -> &DMatrix<f64> {
        &self.psi
    }

    /// `∫_Γ ψ_m ψ_k ds`; the identity up to rounding.
    pub fn gram(&self) -> DMatrix<C64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |m, k| {
            let s: f64 = (0..self.n_edges()).map(|e| self.psi[(e, m)] * self.psi[(e, k)] * self.lengths[e]).sum();
            C64::new(s, 0.0)
        })
    }

    /// Current `Σ_k c_k ψ_k`.
    pub fn current(&self, mesh: &Mesh, gamma: &GammaSpec, coeffs: &DVector<C64>) -> Result<BoundaryCurrent> {
        if coeffs.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: coeffs.len() });
        }
        let values = (0..self.n_edges())
            .map(|e| (0..self.dim()).map(|k| coeffs[k] * self.psi[(e, k)]).sum())
            .collect();
        BoundaryCurrent::new(mesh, gamma, values)
    }

    pub fn basis_current(&self, mesh: &Mesh, gamma: &GammaSpec, k: usize) -> BoundaryCurrent {
        let values = (0..self.n_edges()).map(|e| C64::new(self.psi[(e, k)], 0.0)).collect();
        BoundaryCurrent::new(mesh, gamma, values).unwrap()
    }

    /// Coordinates `c_m = ∫_Γ f ψ_m` of the mean-free part of `f`.
    pub fn coefficients(&self, f: &BoundaryCurrent) -> Result<DVector<C64>> {
        if f.values().len() != self.n_edges() {
            return Err(Error::Dimension { expected: self.n_edges(), got: f.values().len() });
        }
        Ok(DVector::from_fn(self.dim(), |m, _| {
            (0..self.n_edges()).map(|e| f.values()[e] * (self.psi[(e, m)] * self.lengths[e])).sum()
        }))
    }

    /// L²(Γ)-projection of the trace of `u` onto the basis.
    pub fn trace_coefficients(&self, u: &FieldSolution) -> DVector<C64> {
        let v = u.values();
        let edge_mean: Vec<C64> = self.edges.iter().map(|&[a, b]| (v[a] + v[b]) * 0.5).collect();
        DVector::from_fn(self.dim(), |m, _| {
            (0..self.n_edges()).map(|e| edge_mean[e] * (self.psi[(e, m)] * self.lengths[e])).sum()
        })
    }
}
