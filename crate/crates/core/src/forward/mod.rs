//! Conforming P1 Galerkin solver for the Neumann problem
//! `−∇·(A∇u) = 0`, `ν·A∇u = f` on Γ, `0` on `∂Ω∖Γ`, normalised by
//! `∫_Γ u ds = 0`.
//!
//! The gauge is imposed by pinning one Γ node and shifting the solution to
//! zero Γ-mean afterwards. For a load `b` the multiplier formulation reads
//! `K u + λ m = b`, `mᵀu = 0` with `m_i = ∫_Γ φ_i`; since `1ᵀK = 0` it gives
//! `λ = Σb / |Γ|`, so projecting the load first and pinning reproduces it
//! exactly.

mod extreme;
pub mod ordering;
pub mod skyline;

pub use extreme::{factor_extreme, solve_extreme, ExtremeKind};

use rayon::prelude::*;

use crate::coeff::{min_re_eigenvalue, MatrixField};
use crate::linalg::Mat2;
use crate::mesh::{GammaSpec, Mesh, RegionMask};
use crate::{Error, Result, C64};
use skyline::{CsrMatrix, SkylineLu};

const NO_DOF: usize = usize::MAX;

/// Piecewise-constant current density on the Γ edges, in the order of
/// `GammaSpec::edge_indices`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryCurrent {
    values: Vec<C64>,
    lengths: Vec<f64>,
}

impl BoundaryCurrent {
    pub fn new(mesh: &Mesh, gamma: &GammaSpec, values: Vec<C64>) -> Result<Self> {
        if values.len() != gamma.len() {
            return Err(Error::Dimension { expected: gamma.len(), got: values.len() });
        }
        let lengths = gamma.edge_indices().iter().map(|&e| mesh.edge_length(e)).collect();
        Ok(Self { values, lengths })
    }

    pub fn zeros(mesh: &Mesh, gamma: &GammaSpec) -> Self {
        Self::new(mesh, gamma, vec![C64::new(0.0, 0.0); gamma.len()]).unwrap()
    }

    /// Edge averages of `f` (two-point Gauss rule on each edge).
    pub fn from_fn(mesh: &Mesh, gamma: &GammaSpec, f: impl Fn([f64; 2]) -> C64) -> Self {
        let g = 0.5 / 3f64.sqrt();
        let values = gamma
            .edge_indices()
            .iter()
            .map(|&e| {
                let [a, b] = mesh.boundary_edges()[e].map(|v| mesh.nodes()[v]);
                let at = |s: f64| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                (f(at(0.5 - g)) + f(at(0.5 + g))) * 0.5
            })
            .collect();
        Self::new(mesh, gamma, values).unwrap()
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// `∫_Γ f ds`
    pub fn integral(&self) -> C64 {
        self.values.iter().zip(&self.lengths).map(|(v, l)| v * l).sum()
    }

    pub fn arc_length(&self) -> f64 {
        self.lengths.iter().sum()
    }

    /// Subtracts the Γ-mean.
    pub fn mean_free(mut self) -> Self {
        let mean = self.integral() / self.arc_length();
        for v in &mut self.values {
            *v -= mean;
        }
        self
    }

    /// `|∫_Γ f| ≤ tol · ∫_Γ |f|`
    pub fn is_mean_free(&self, tol: f64) -> bool {
        let abs: f64 = self.values.iter().zip(&self.lengths).map(|(v, l)| v.norm() * l).sum();
        self.integral().norm() <= tol * abs
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().zip(&self.lengths).map(|(v, l)| v.norm_sqr() * l).sum::<f64>().sqrt()
    }

    pub fn add(&self, other: &Self) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Self { values, lengths: self.lengths.clone() }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { values: self.values.iter().map(|v| v * s).collect(), lengths: self.lengths.clone() }
    }

    /// Nodal load `b_i = ∫_Γ f φ_i ds`.
    pub fn load(&self, mesh: &Mesh, gamma: &GammaSpec) -> Vec<C64> {
        let mut b = vec![C64::new(0.0, 0.0); mesh.n_nodes()];
        for (k, &e) in gamma.edge_indices().iter().enumerate() {
            let half = self.values[k] * (0.5 * self.lengths[k]);
            for v in mesh.boundary_edges()[e] {
                b[v] += half;
            }
        }
        b
    }
}

/// Nodal P1 potential. `excluded` marks elements carrying no field (the
/// removed part of an insulating solve).
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSolution {
    values: Vec<C64>,
    excluded: Option<RegionMask>,
}

impl FieldSolution {
    pub fn new(values: Vec<C64>) -> Self {
        Self { values, excluded: None }
    }

    pub fn with_excluded(mut self, excluded: RegionMask) -> Self {
        self.excluded = Some(excluded);
        self
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn excluded(&self) -> Option<&RegionMask> {
        self.excluded.as_ref()
    }

    pub fn is_excluded(&self, t: usize) -> bool {
        self.excluded.as_ref().is_some_and(|m| m.contains(t))
    }

    pub fn gradient(&self, mesh: &Mesh, t: usize) -> [C64; 2] {
        let g = mesh.hat_gradients(t);
        let v = mesh.triangles()[t];
        let mut out = [C64::new(0.0, 0.0); 2];
        for a in 0..3 {
            let u = self.values[v[a]];
            out[0] += u * g[a][0];
            out[1] += u * g[a][1];
        }
        out
    }

    /// `∫_Γ f · conj(u) ds`, i.e. `⟨f, Λg⟩` when `u = u_g`.
    pub fn pairing(&self, mesh: &Mesh, gamma: &GammaSpec, f: &BoundaryCurrent) -> C64 {
        gamma
            .edge_indices()
            .iter()
            .zip(f.values().iter().zip(f.lengths()))
            .map(|(&e, (fv, l))| {
                let [a, b] = mesh.boundary_edges()[e];
                fv * (self.values[a] + self.values[b]).conj() * (0.5 * l)
            })
            .sum()
    }

    /// `∫_Γ u ds`
    pub fn gamma_integral(&self, mesh: &Mesh, gamma: &GammaSpec) -> C64 {
        gamma
            .edge_indices()
            .iter()
            .map(|&e| {
                let [a, b] = mesh.boundary_edges()[e];
                (self.values[a] + self.values[b]) * (0.5 * mesh.edge_length(e))
            })
            .sum()
    }

    pub fn sub(&self, other: &FieldSolution) -> FieldSolution {
        FieldSolution {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
            excluded: self.excluded.clone(),
        }
    }

    pub fn axpy(&mut self, s: C64, other: &FieldSolution) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
    }

    /// `node,re,im` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,re,im\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{i},{:.11e},{:.11e}\n", v.re, v.im));
        }
        out
    }
}

/// Assembled, gauged and factored stiffness matrix for one coefficient.
/// Immutable and `Sync`; solves may run concurrently.
#[derive(Clone, Debug)]
pub struct FactorizedSystem {
    n_nodes: usize,
    node_dof: Vec<usize>,
    pinned: usize,
    /// `perm[new] = dof`
    perm: Vec<usize>,
    inv: Vec<usize>,
    lu: SkylineLu,
    stiffness: CsrMatrix,
    gamma_weight: Vec<f64>,
    gamma_length: f64,
    excluded: Option<RegionMask>,
}

/// Assembles `K[i,j] = Σ_T |T| ∇φ_iᵀ A ∇φ_j` and factors the gauged system.
pub fn assemble_and_factor(mesh: &Mesh, a: &MatrixField, gamma: &GammaSpec) -> Result<FactorizedSystem> {
    check_field(mesh, a)?;
    let node_dof: Vec<usize> = (0..mesh.n_nodes()).collect();
    let active = vec![true; mesh.n_triangles()];
    FactorizedSystem::build(mesh, a, gamma, node_dof, &active, None)
}

fn check_field(mesh: &Mesh, a: &MatrixField) -> Result<()> {
    if a.len() != mesh.n_triangles() {
        return Err(Error::Dimension { expected: mesh.n_triangles(), got: a.len() });
    }
    let lo = min_re_eigenvalue(a);
    if !(lo > 0.0) {
        return Err(Error::Forward(format!("coefficient not admissible: min eigenvalue of A^R is {lo:e}")));
    }
    Ok(())
}

impl FactorizedSystem {
    fn build(
        mesh: &Mesh,
        a: &MatrixField,
        gamma: &GammaSpec,
        node_dof: Vec<usize>,
        active: &[bool],
        excluded: Option<RegionMask>,
    ) -> Result<Self> {
        let n_dofs = node_dof.iter().filter(|&&d| d != NO_DOF).map(|&d| d + 1).max().unwrap_or(0);
        if gamma.is_empty() {
            return Err(Error::EmptyGamma);
        }
        let mut pairs = Vec::new();
        for (t, tri) in mesh.triangles().iter().enumerate() {
            if !active[t] {
                continue;
            }
            for &p in tri {
                for &q in tri {
                    pairs.push((node_dof[p], node_dof[q]));
                }
            }
        }
        let mut k = CsrMatrix::from_pattern(n_dofs, pairs);
        for (t, tri) in mesh.triangles().iter().enumerate() {
            if !active[t] {
                continue;
            }
            let g = mesh.hat_gradients(t);
            let at: Mat2 = a.value(t).scale_re(mesh.area(t));
            for i in 0..3 {
                for j in 0..3 {
                    k.add(node_dof[tri[i]], node_dof[tri[j]], at.real_form(g[i], g[j]));
                }
            }
        }

        let mut gamma_weight = vec![0.0; n_dofs];
        for &e in gamma.edge_indices() {
            let half = 0.5 * mesh.edge_length(e);
            for v in mesh.boundary_edges()[e] {
                gamma_weight[node_dof[v]] += half;
            }
        }
        let gamma_length = gamma.arc_length();
        let pinned = node_dof[mesh.boundary_edges()[gamma.edge_indices()[0]][0]];

        let mut adj = vec![Vec::new(); n_dofs];
        for r in 0..n_dofs {
            if r == pinned {
                continue;
            }
            adj[r].extend(k.row(r).map(|(c, _)| c).filter(|&c| c != r && c != pinned));
        }
        let perm = ordering::reverse_cuthill_mckee(&adj);
        let mut inv = vec![0usize; n_dofs];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut gauged_pairs = Vec::with_capacity(k.nnz());
        for r in 0..n_dofs {
            for (c, _) in k.row(r) {
                if (r != pinned && c != pinned) || (r == pinned && c == pinned) {
                    gauged_pairs.push((inv[r], inv[c]));
                }
            }
        }
        let mut gauged = CsrMatrix::from_pattern(n_dofs, gauged_pairs);
        for r in 0..n_dofs {
            for (c, v) in k.row(r) {
                if r != pinned && c != pinned {
                    gauged.add(inv[r], inv[c], v);
                }
            }
        }
        gauged.add(inv[pinned], inv[pinned], C64::new(1.0, 0.0));
        let lu = SkylineLu::factor(&gauged)?;
        log::debug!("factored {n_dofs} dofs, envelope {}", lu.envelope_size());
        Ok(Self {
            n_nodes: mesh.n_nodes(),
            node_dof,
            pinned,
            perm,
            inv,
            lu,
            stiffness: k,
            gamma_weight,
            gamma_length,
            excluded,
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.perm.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Ungauged stiffness matrix on the degrees of freedom (nodes for the
    /// plain Neumann problem).
    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    fn dof_load(&self, load: &[C64]) -> Vec<C64> {
        let mut b = vec![C64::new(0.0, 0.0); self.n_dofs()];
        for (node, &v) in load.iter().enumerate() {
            let d = self.node_dof[node];
            if d != NO_DOF {
                b[d] += v;
            }
        }
        // the part of the load the multiplier absorbs
        let lambda = b.iter().sum::<C64>() / self.gamma_length;
        for (bi, w) in b.iter_mut().zip(&self.gamma_weight) {
            *bi -= lambda * w;
        }
        b
    }

    /// Solves `K u = b` for a nodal load vector, gauged to `∫_Γ u = 0`.
    pub fn solve_load(&self, load: &[C64]) -> Result<FieldSolution> {
        if load.len() != self.n_nodes {
            return Err(Error::Dimension { expected: self.n_nodes, got: load.len() });
        }
        let b = self.dof_load(load);
        let mut x = vec![C64::new(0.0, 0.0); self.n_dofs()];
        for (d, &v) in b.iter().enumerate() {
            if d != self.pinned {
                x[self.inv[d]] = v;
            }
        }
        self.lu.solve_in_place(&mut x);
        let mut u: Vec<C64> = self.perm.iter().map(|_| C64::new(0.0, 0.0)).collect();
        for (new, &d) in self.perm.iter().enumerate() {
            u[d] = x[new];
        }
        let mean = u.iter().zip(&self.gamma_weight).map(|(v, w)| v * w).sum::<C64>() / self.gamma_length;
        for v in &mut u {
            *v -= mean;
        }
        let values = self
            .node_dof
            .iter()
            .map(|&d| if d == NO_DOF { C64::new(0.0, 0.0) } else { u[d] })
            .collect();
        Ok(FieldSolution { values, excluded: self.excluded.clone() })
    }

    /// Independent solves in parallel; output order follows `loads`.
    pub fn solve_loads(&self, loads: &[Vec<C64>]) -> Result<Vec<FieldSolution>> {
        loads.par_iter().map(|b| self.solve_load(b)).collect()
    }

    pub fn solve_neumann(&self, mesh: &Mesh, gamma: &GammaSpec, f: &BoundaryCurrent) -> Result<FieldSolution> {
        if !f.is_mean_free(1e-12) {
            return Err(Error::Forward(format!(
                "boundary current is not mean-free (∫_Γ f = {:.3e})",
                f.integral().norm()
            )));
        }
        self.solve_load(&f.load(mesh, gamma))
    }

    /// `‖K u − b‖ / ‖b‖` on the degrees of freedom, `b` projected as in the
    /// solve.
    pub fn relative_residual(&self, u: &FieldSolution, load: &[C64]) -> f64 {
        let mut ud = vec![C64::new(0.0, 0.0); self.n_dofs()];
        for (node, &d) in self.node_dof.iter().enumerate() {
            if d != NO_DOF {
                ud[d] = u.values[node];
            }
        }
        let b = self.dof_load(load);
        let ku = self.stiffness.mul_vec(&ud);
        let num: f64 = ku.iter().zip(&b).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|q| q.norm_sqr()).sum::<f64>().sqrt();
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }
}

/// `∫_region M ∇u · conj(∇v) dx`, exact for P1 fields.
pub fn energy_integral(
    mesh: &Mesh,
    u: &FieldSolution,
    v: &FieldSolution,
    m: &MatrixField,
    region: &RegionMask,
) -> Result<C64> {
    let n = mesh.n_triangles();
    if u.values.len() != mesh.n_nodes() || v.values.len() != mesh.n_nodes() {
        return Err(Error::Dimension { expected: mesh.n_nodes(), got: u.values.len().min(v.values.len()) });
    }
    if m.len() != n || region.len() != n {
        return Err(Error::Dimension { expected: n, got: m.len().min(region.len()) });
    }
    Ok(region
        .iter()
        .filter(|&t| !u.is_excluded(t) && !v.is_excluded(t))
        .map(|t| m.value(t).form(v.gradient(mesh, t), u.gradient(mesh, t)) * mesh.area(t))
        .sum())
}

/// `‖∇u‖_{L²(region)}`
pub fn gradient_norm(mesh: &Mesh, u: &FieldSolution, region: &RegionMask) -> f64 {
    region
        .iter()
        .filter(|&t| !u.is_excluded(t))
        .map(|t| {
            let g = u.gradient(mesh, t);
            (g[0].norm_sqr() + g[1].norm_sqr()) * mesh.area(t)
        })
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests;
