//! Singular-kernel quadrature: the normalization constant K(n,s,p),
//! pairwise element interactions of |x-y|^{-(n+sp)}, the Gagliardo
//! seminorm, Rayleigh quotients and weak-form residuals.
//!
//! Interactions couple only elements of the active region (Omega and the
//! Dirichlet mask); the Neumann region never enters. Far element pairs use
//! fixed-order Gauss rules, touching pairs geometrically graded rules, and
//! the 1D same-element integral is analytic for piecewise-linear functions.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gamma::gamma;
use crate::geometry::{Mesh, Region, SetMask};
use crate::quad::{gauss_01, RuleSet};

/// K(n,s,p) = (1-s) sqrt(pi) Gamma((n+p)/2) / (Gamma(n/2) Gamma((p+1)/2)).
pub fn normalization_k(n: usize, s: f64, p: f64) -> Result<f64> {
    if (n != 1 && n != 2) || !(s > 0.0 && s < 1.0) || !(p > 1.0) {
        return Err(Error::InvalidParams(format!(
            "normalization_k called with n={n}, s={s}, p={p}"
        )));
    }
    let n = n as f64;
    Ok((1.0 - s) * std::f64::consts::PI.sqrt() * gamma((n + p) / 2.0)
        / (gamma(n / 2.0) * gamma((p + 1.0) / 2.0)))
}

/// Bounded positive potential sampled at mesh nodes.
#[derive(Clone, Debug)]
pub struct Potential {
    values: Vec<f64>,
    pub v1: f64,
    pub v2: f64,
}

impl Potential {
    pub fn constant(mesh: &Mesh, c: f64) -> Result<Self> {
        Potential::from_fn(mesh, |_| c)
    }

    pub fn from_fn<F: Fn([f64; 2]) -> f64>(mesh: &Mesh, f: F) -> Result<Self> {
        let values: Vec<f64> = (0..mesh.nnodes()).map(|i| f(mesh.node_pos(i))).collect();
        Potential::from_nodal(mesh, values)
    }

    pub fn from_nodal(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.nnodes() {
            return Err(Error::BadVectorLength {
                expected: mesh.nnodes(),
                got: values.len(),
            });
        }
        let mut v1 = f64::INFINITY;
        let mut v2 = f64::NEG_INFINITY;
        for c in mesh.omega_cells() {
            for n in mesh.cell_nodes(c) {
                v1 = v1.min(values[n]);
                v2 = v2.max(values[n]);
            }
        }
        if !(v1 > 0.0 && v2.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "potential must satisfy 0 < v1 <= V <= v2 < inf, got v1={v1}, v2={v2}"
            )));
        }
        Ok(Potential { values, v1, v2 })
    }

    pub fn value_at_node(&self, id: usize) -> f64 {
        self.values[id]
    }
}

/// Assembly knobs; the defaults match desk-scale problems.
#[derive(Clone, Copy, Debug)]
pub struct KernelOpts {
    /// geometric grading depth toward shared facets
    pub grading_depth: usize,
    /// hard cap on active degrees of freedom (dense storage)
    pub dof_cap: usize,
    /// cap on cached quadrature points for the general-p tables
    pub table_point_cap: usize,
}

impl Default for KernelOpts {
    fn default() -> Self {
        KernelOpts {
            grading_depth: 8,
            dof_cap: 2000,
            table_point_cap: 20_000_000,
        }
    }
}

/// Reusable Omega-Omega assembly block; the Omega interactions do not
/// depend on the Dirichlet mask, so alternating schemes recompute only
/// the mask-coupled blocks.
#[derive(Default)]
pub struct AssemblyCache {
    key: Option<(u64, u64, usize)>,
    omega_entries: Option<Vec<(u32, u32, f64)>>, // global node ids, seminorm scale (no K)
}

impl AssemblyCache {
    pub fn new() -> Self {
        AssemblyCache::default()
    }

    fn matches(&self, key: (u64, u64, usize)) -> bool {
        self.key == Some(key)
    }
}

fn mesh_key(mesh: &Mesh, s: f64, p: f64) -> (u64, u64, usize) {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut mix = |v: u64| {
        h ^= v;
        h = h.wrapping_mul(0x1000_0000_01b3);
    };
    mix(mesh.nx as u64);
    mix(mesh.ny as u64);
    mix(mesh.h.to_bits());
    mix(mesh.r.to_bits());
    mix(s.to_bits());
    (h, p.to_bits(), mesh.omega_cells().count())
}

#[inline]
fn shapes(dim: usize, r: [f64; 2]) -> [f64; 4] {
    if dim == 1 {
        [1.0 - r[0], r[0], 0.0, 0.0]
    } else {
        [
            (1.0 - r[0]) * (1.0 - r[1]),
            r[0] * (1.0 - r[1]),
            (1.0 - r[0]) * r[1],
            r[0] * r[1],
        ]
    }
}

#[inline]
fn sgn_pow(d: f64, e: f64) -> f64 {
    // |d|^e * sign(d), with 0 mapped to 0
    if d == 0.0 {
        0.0
    } else {
        d.abs().powf(e) * d.signum()
    }
}

/// One cached quadrature point of a pair table. The symmetry factor for
/// distinct pairs is folded into `w`.
struct PairEntry {
    w: f64,
    sa: [f64; 4],
    sb: [f64; 4],
}

struct PairTable {
    dofs_a: [u32; 4],
    dofs_b: [u32; 4],
    pts: Vec<PairEntry>,
}

/// Precomputed operator for one active region (Omega plus a mask).
pub struct KernelOperator {
    pub k_const: f64,
    pub s: f64,
    pub p: f64,
    dim: usize,
    h: f64,
    exponent: f64,
    mesh: Mesh,
    mask: SetMask,
    active_cells: Vec<usize>,
    coords: Vec<(i32, i32)>,
    cell_dofs: Vec<[u32; 4]>,
    nodes_per_cell: usize,
    node_of_dof: Vec<usize>,
    dof_of_node: HashMap<usize, u32>,
    constrained: Vec<bool>,
    omega_cell: Vec<bool>,
    rules: RuleSet,
    stiffness: Option<DMatrix<f64>>,
    mass: Option<DMatrix<f64>>,
    tables: Option<Vec<PairTable>>,
    same_coef: f64,
    fingerprint: u64,
}

pub fn assemble_kernel(mesh: &Mesh, mask: &SetMask, s: f64, p: f64) -> Result<KernelOperator> {
    assemble_kernel_with(mesh, mask, s, p, &KernelOpts::default(), None)
}

pub fn assemble_kernel_with(
    mesh: &Mesh,
    mask: &SetMask,
    s: f64,
    p: f64,
    opts: &KernelOpts,
    mut cache: Option<&mut AssemblyCache>,
) -> Result<KernelOperator> {
    let k_const = normalization_k(mesh.dim, s, p)?;
    let exponent = mesh.dim as f64 + s * p;

    // active cells: Omega first-class plus the mask, sorted by cell index
    let mut active_cells: Vec<usize> = mesh.omega_cells().collect();
    active_cells.extend(mask.cells());
    active_cells.sort_unstable();
    let omega_cell: Vec<bool> = active_cells
        .iter()
        .map(|&c| mesh.label(c) == Region::Omega)
        .collect();

    let coords: Vec<(i32, i32)> = active_cells
        .iter()
        .map(|&c| {
            let (i, j) = mesh.cell_coords(c);
            (i as i32, j as i32)
        })
        .collect();

    // degrees of freedom
    let mut nodes: Vec<usize> = active_cells
        .iter()
        .flat_map(|&c| mesh.cell_nodes(c))
        .collect();
    nodes.sort_unstable();
    nodes.dedup();
    if nodes.len() > opts.dof_cap {
        return Err(Error::ProblemTooLarge(format!(
            "{} active degrees of freedom exceed the cap of {}",
            nodes.len(),
            opts.dof_cap
        )));
    }
    let dof_of_node: HashMap<usize, u32> = nodes
        .iter()
        .enumerate()
        .map(|(d, &n)| (n, d as u32))
        .collect();
    let nodes_per_cell = if mesh.dim == 1 { 2 } else { 4 };
    let cell_dofs: Vec<[u32; 4]> = active_cells
        .iter()
        .map(|&c| {
            let mut d = [0u32; 4];
            for (k, n) in mesh.cell_nodes(c).into_iter().enumerate() {
                d[k] = dof_of_node[&n];
            }
            d
        })
        .collect();
    let mut constrained = vec![false; nodes.len()];
    for c in mask.cells() {
        for n in mesh.cell_nodes(c) {
            constrained[dof_of_node[&n] as usize] = true;
        }
    }

    let rules = RuleSet::new(mesh.dim, opts.grading_depth);
    // 1D same-element coefficient: for piecewise-linear u the same-cell
    // double integral is |du|^p * 2 h^{1-sp} / ((p-sp)(p+1-sp)).
    let same_coef = if mesh.dim == 1 {
        2.0 * mesh.h.powf(1.0 - s * p) / ((p - s * p) * (p + 1.0 - s * p))
    } else {
        0.0
    };

    let mut fp: u64 = mask.fingerprint();
    fp ^= s.to_bits().rotate_left(17) ^ p.to_bits().rotate_left(31) ^ mesh.h.to_bits();

    let mut op = KernelOperator {
        k_const,
        s,
        p,
        dim: mesh.dim,
        h: mesh.h,
        exponent,
        mesh: mesh.clone(),
        mask: mask.clone(),
        active_cells,
        coords,
        cell_dofs,
        nodes_per_cell,
        node_of_dof: nodes,
        dof_of_node,
        constrained,
        omega_cell,
        rules,
        stiffness: None,
        mass: None,
        tables: None,
        same_coef,
        fingerprint: fp,
    };

    if p == 2.0 {
        op.assemble_matrices(cache.as_deref_mut())?;
    } else {
        op.build_tables(opts)?;
    }
    Ok(op)
}

/// Visitor interface over every quadrature point of every active pair,
/// including the 1D analytic same-element terms (reported separately).
enum PairClass {
    Quad,
    Same1d,
}

impl KernelOperator {
    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mask(&self) -> &SetMask {
        &self.mask
    }

    pub fn ndofs(&self) -> usize {
        self.node_of_dof.len()
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.constrained[dof]
    }

    pub fn free_dofs(&self) -> Vec<usize> {
        (0..self.ndofs()).filter(|&d| !self.constrained[d]).collect()
    }

    pub fn node_of_dof(&self, dof: usize) -> usize {
        self.node_of_dof[dof]
    }

    pub fn dof_of_node(&self, node: usize) -> Option<usize> {
        self.dof_of_node.get(&node).map(|&d| d as usize)
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn stiffness(&self) -> Option<&DMatrix<f64>> {
        self.stiffness.as_ref()
    }

    pub fn mass(&self) -> Option<&DMatrix<f64>> {
        self.mass.as_ref()
    }

    /// Extends a dof vector to a nodal function over the whole mesh
    /// (zero outside the active region).
    pub fn global_nodal(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.mesh.nnodes()];
        for (d, &n) in self.node_of_dof.iter().enumerate() {
            out[n] = u[d];
        }
        out
    }

    fn check_len(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.ndofs() {
            return Err(Error::BadVectorLength {
                expected: self.ndofs(),
                got: u.len(),
            });
        }
        Ok(())
    }

    /// Runs `visit(dofs_a, sa, dofs_b, sb, w)` for every quadrature point
    /// (symmetry factor folded into w), and `visit_same(dof0, dof1)` for
    /// every 1D same-element analytic term.
    fn sweep<F, G>(&self, mut visit: F, mut visit_same: G)
    where
        F: FnMut(&[u32; 4], [f64; 4], &[u32; 4], [f64; 4], f64),
        G: FnMut(u32, u32),
    {
        let ne = self.active_cells.len();
        let hn2 = self.h.powi(2 * self.dim as i32);
        for ia in 0..ne {
            let ca = self.mesh.cell_corner(self.active_cells[ia]);
            for ib in ia..ne {
                if ia == ib {
                    match self.same_class() {
                        PairClass::Same1d => {
                            visit_same(self.cell_dofs[ia][0], self.cell_dofs[ia][1]);
                        }
                        PairClass::Quad => {
                            for pt in self.rules.same_cell_points() {
                                let (x, y) = self.phys(ca, ca, pt.xi, pt.eta);
                                let r = dist(x, y);
                                if r < 1e-14 {
                                    continue;
                                }
                                let w = pt.w * hn2 * r.powf(-self.exponent);
                                visit(
                                    &self.cell_dofs[ia],
                                    shapes(self.dim, pt.xi),
                                    &self.cell_dofs[ia],
                                    shapes(self.dim, pt.eta),
                                    w,
                                );
                            }
                        }
                    }
                    continue;
                }
                let cb = self.mesh.cell_corner(self.active_cells[ib]);
                let off = (
                    self.coords[ib].0 - self.coords[ia].0,
                    self.coords[ib].1 - self.coords[ia].1,
                );
                for pt in self.rules.pair_points(off) {
                    let (x, y) = self.phys(ca, cb, pt.xi, pt.eta);
                    let r = dist(x, y);
                    let w = 2.0 * pt.w * hn2 * r.powf(-self.exponent);
                    visit(
                        &self.cell_dofs[ia],
                        shapes(self.dim, pt.xi),
                        &self.cell_dofs[ib],
                        shapes(self.dim, pt.eta),
                        w,
                    );
                }
            }
        }
    }

    fn same_class(&self) -> PairClass {
        if self.dim == 1 {
            PairClass::Same1d
        } else {
            PairClass::Quad
        }
    }

    #[inline]
    fn phys(&self, ca: [f64; 2], cb: [f64; 2], xi: [f64; 2], eta: [f64; 2]) -> ([f64; 2], [f64; 2]) {
        (
            [ca[0] + self.h * xi[0], ca[1] + self.h * xi[1]],
            [cb[0] + self.h * eta[0], cb[1] + self.h * eta[1]],
        )
    }

    // ---------------- assembly ----------------

    fn assemble_matrices(&mut self, cache: Option<&mut AssemblyCache>) -> Result<()> {
        let nd = self.ndofs();
        let mut a = DMatrix::<f64>::zeros(nd, nd);
        let key = mesh_key(&self.mesh, self.s, self.p);

        // Omega-Omega block, cached by global node id
        let omega_pairs = self.pair_list(|oa, ob| oa && ob);
        let use_cache = cache.as_ref().map(|c| c.matches(key)).unwrap_or(false);
        let omega_entries: Vec<(u32, u32, f64)> = if use_cache {
            cache.as_ref().unwrap().omega_entries.clone().unwrap()
        } else {
            let entries = self.compute_entries_global(&omega_pairs);
            if let Some(c) = cache {
                c.key = Some(key);
                c.omega_entries = Some(entries.clone());
            }
            entries
        };
        for &(gi, gj, v) in &omega_entries {
            let i = self.dof_of_node[&(gi as usize)] as usize;
            let j = self.dof_of_node[&(gj as usize)] as usize;
            a[(i, j)] += v;
        }

        // blocks touching the mask
        let mask_pairs = self.pair_list(|oa, ob| !(oa && ob));
        let entries = self.compute_entries_global(&mask_pairs);
        for &(gi, gj, v) in &entries {
            let i = self.dof_of_node[&(gi as usize)] as usize;
            let j = self.dof_of_node[&(gj as usize)] as usize;
            a[(i, j)] += v;
        }

        a *= self.k_const;
        self.stiffness = Some(a);
        self.mass = Some(self.omega_matrix(None));
        Ok(())
    }

    fn pair_list<F: Fn(bool, bool) -> bool>(&self, keep: F) -> Vec<(u32, u32)> {
        let ne = self.active_cells.len();
        let mut pairs = Vec::new();
        for ia in 0..ne {
            for ib in ia..ne {
                if keep(self.omega_cell[ia], self.omega_cell[ib]) {
                    pairs.push((ia as u32, ib as u32));
                }
            }
        }
        pairs
    }

    /// Seminorm matrix entries (global node ids, no K factor) for the given
    /// pair list. Parallel over fixed-size chunks; each chunk emits its
    /// entries in pair order, so accumulation order is deterministic.
    fn compute_entries_global(&self, pairs: &[(u32, u32)]) -> Vec<(u32, u32, f64)> {
        let chunks: Vec<&[(u32, u32)]> = pairs.chunks(512).collect();
        let per_chunk: Vec<Vec<(u32, u32, f64)>> = chunks
            .par_iter()
            .map(|chunk| {
                let mut out = Vec::new();
                for &(ia, ib) in chunk.iter() {
                    self.pair_entries(ia as usize, ib as usize, &mut out);
                }
                out
            })
            .collect();
        per_chunk.into_iter().flatten().collect()
    }

    fn pair_entries(&self, ia: usize, ib: usize, out: &mut Vec<(u32, u32, f64)>) {
        let npc = self.nodes_per_cell;
        if ia == ib {
            if let PairClass::Same1d = self.same_class() {
                let d = self.cell_dofs[ia];
                let (n0, n1) = (
                    self.node_of_dof[d[0] as usize] as u32,
                    self.node_of_dof[d[1] as usize] as u32,
                );
                let c = self.same_coef;
                out.push((n0, n0, c));
                out.push((n1, n1, c));
                out.push((n0, n1, -c));
                out.push((n1, n0, -c));
                return;
            }
        }
        // local accumulator over the union of the two cells' nodes
        let mut union: Vec<u32> = Vec::with_capacity(2 * npc);
        for k in 0..npc {
            union.push(self.cell_dofs[ia][k]);
        }
        for k in 0..npc {
            let d = self.cell_dofs[ib][k];
            if !union.contains(&d) {
                union.push(d);
            }
        }
        let m = union.len();
        let mut acc = vec![0.0f64; m * m];
        let pos = |d: u32, union: &[u32]| union.iter().position(|&x| x == d).unwrap();
        let pa: Vec<usize> = (0..npc).map(|k| pos(self.cell_dofs[ia][k], &union)).collect();
        let pb: Vec<usize> = (0..npc).map(|k| pos(self.cell_dofs[ib][k], &union)).collect();

        let ca = self.mesh.cell_corner(self.active_cells[ia]);
        let cb = self.mesh.cell_corner(self.active_cells[ib]);
        let hn2 = self.h.powi(2 * self.dim as i32);
        let factor = if ia == ib { 1.0 } else { 2.0 };
        let pts: &[_] = if ia == ib {
            self.rules.same_cell_points()
        } else {
            let off = (
                self.coords[ib].0 - self.coords[ia].0,
                self.coords[ib].1 - self.coords[ia].1,
            );
            self.rules.pair_points(off)
        };
        let mut g = vec![0.0f64; m];
        for pt in pts {
            let (x, y) = self.phys(ca, cb, pt.xi, pt.eta);
            let r = dist(x, y);
            if r < 1e-14 {
                continue;
            }
            let w = factor * pt.w * hn2 * r.powf(-self.exponent);
            let sa = shapes(self.dim, pt.xi);
            let sb = shapes(self.dim, pt.eta);
            g.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..npc {
                g[pa[k]] += sa[k];
                g[pb[k]] -= sb[k];
            }
            for i in 0..m {
                if g[i] == 0.0 {
                    continue;
                }
                for j in 0..m {
                    acc[i * m + j] += w * g[i] * g[j];
                }
            }
        }
        for i in 0..m {
            for j in 0..m {
                let v = acc[i * m + j];
                if v != 0.0 {
                    out.push((
                        self.node_of_dof[union[i] as usize] as u32,
                        self.node_of_dof[union[j] as usize] as u32,
                        v,
                    ));
                }
            }
        }
    }

    fn build_tables(&mut self, opts: &KernelOpts) -> Result<()> {
        let ne = self.active_cells.len();
        // estimate the table size before committing memory
        let mut est = 0usize;
        for ia in 0..ne {
            for ib in ia..ne {
                if ia == ib {
                    if let PairClass::Quad = self.same_class() {
                        est += self.rules.same_cell_points().len();
                    }
                } else {
                    let off = (
                        self.coords[ib].0 - self.coords[ia].0,
                        self.coords[ib].1 - self.coords[ia].1,
                    );
                    est += self.rules.pair_points(off).len();
                }
            }
        }
        if est > opts.table_point_cap {
            return Err(Error::ProblemTooLarge(format!(
                "general-p quadrature tables need {est} points, cap is {}",
                opts.table_point_cap
            )));
        }

        let pairs = self.pair_list(|_, _| true);
        let tables: Vec<PairTable> = pairs
            .par_iter()
            .filter_map(|&(ia, ib)| self.pair_table(ia as usize, ib as usize))
            .collect();
        self.tables = Some(tables);
        Ok(())
    }

    fn pair_table(&self, ia: usize, ib: usize) -> Option<PairTable> {
        if ia == ib {
            if let PairClass::Same1d = self.same_class() {
                return None; // handled analytically
            }
        }
        let ca = self.mesh.cell_corner(self.active_cells[ia]);
        let cb = self.mesh.cell_corner(self.active_cells[ib]);
        let hn2 = self.h.powi(2 * self.dim as i32);
        let factor = if ia == ib { 1.0 } else { 2.0 };
        let pts_ref: &[_] = if ia == ib {
            self.rules.same_cell_points()
        } else {
            let off = (
                self.coords[ib].0 - self.coords[ia].0,
                self.coords[ib].1 - self.coords[ia].1,
            );
            self.rules.pair_points(off)
        };
        let mut pts = Vec::with_capacity(pts_ref.len());
        for pt in pts_ref {
            let (x, y) = self.phys(ca, cb, pt.xi, pt.eta);
            let r = dist(x, y);
            if r < 1e-14 {
                continue;
            }
            pts.push(PairEntry {
                w: factor * pt.w * hn2 * r.powf(-self.exponent),
                sa: shapes(self.dim, pt.xi),
                sb: shapes(self.dim, pt.eta),
            });
        }
        Some(PairTable {
            dofs_a: self.cell_dofs[ia],
            dofs_b: self.cell_dofs[ib],
            pts,
        })
    }

    // ---------------- evaluation ----------------

    /// Gagliardo seminorm [u]^p over the active region, by quadrature.
    pub fn seminorm(&self, u: &[f64]) -> Result<f64> {
        self.check_len(u)?;
        let p = self.p;
        let npc = self.nodes_per_cell;
        let mut acc = 0.0;
        if let Some(tables) = &self.tables {
            for t in tables {
                for e in &t.pts {
                    let mut d = 0.0;
                    for k in 0..npc {
                        d += e.sa[k] * u[t.dofs_a[k] as usize] - e.sb[k] * u[t.dofs_b[k] as usize];
                    }
                    acc += e.w * d.abs().powf(p);
                }
            }
        } else {
            self.sweep(
                |da, sa, db, sb, w| {
                    let mut d = 0.0;
                    for k in 0..npc {
                        d += sa[k] * u[da[k] as usize] - sb[k] * u[db[k] as usize];
                    }
                    acc += w * d.abs().powf(p);
                },
                |_, _| {},
            );
        }
        if self.dim == 1 {
            for dofs in &self.cell_dofs {
                let du = u[dofs[1] as usize] - u[dofs[0] as usize];
                acc += self.same_coef * du.abs().powf(p);
            }
        }
        Ok(acc)
    }

    /// Seminorm and its gradient with respect to the nodal values.
    pub fn seminorm_grad(&self, u: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_len(u)?;
        let p = self.p;
        let npc = self.nodes_per_cell;
        let mut acc = 0.0;
        let mut grad = vec![0.0; u.len()];
        let mut point = |da: &[u32; 4], sa: [f64; 4], db: &[u32; 4], sb: [f64; 4], w: f64| {
            let mut d = 0.0;
            for k in 0..npc {
                d += sa[k] * u[da[k] as usize] - sb[k] * u[db[k] as usize];
            }
            acc += w * d.abs().powf(p);
            let t = p * w * sgn_pow(d, p - 1.0);
            for k in 0..npc {
                grad[da[k] as usize] += t * sa[k];
                grad[db[k] as usize] -= t * sb[k];
            }
        };
        if let Some(tables) = &self.tables {
            for t in tables {
                for e in &t.pts {
                    point(&t.dofs_a, e.sa, &t.dofs_b, e.sb, e.w);
                }
            }
        } else {
            self.sweep(&mut point, |_, _| {});
        }
        if self.dim == 1 {
            for dofs in &self.cell_dofs {
                let du = u[dofs[1] as usize] - u[dofs[0] as usize];
                acc += self.same_coef * du.abs().powf(p);
                let t = p * self.same_coef * sgn_pow(du, p - 1.0);
                grad[dofs[1] as usize] += t;
                grad[dofs[0] as usize] -= t;
            }
        }
        Ok((acc, grad))
    }

    // ---------------- integrals over Omega ----------------

    /// ∫_Omega V(x) f(u(x)) dx with V == 1 when absent.
    pub fn omega_form<F: Fn(f64) -> f64>(&self, u: &[f64], v: Option<&Potential>, f: F) -> f64 {
        let gauss = gauss_01(6);
        let npc = self.nodes_per_cell;
        let mut acc = 0.0;
        for (ic, &c) in self.active_cells.iter().enumerate() {
            if !self.omega_cell[ic] {
                continue;
            }
            let nodes = self.mesh.cell_nodes(c);
            let vol = self.mesh.cell_volume();
            let mut point = |r: [f64; 2], w: f64| {
                let sh = shapes(self.dim, r);
                let mut uu = 0.0;
                let mut vv = 0.0;
                for k in 0..npc {
                    uu += sh[k] * u[self.cell_dofs[ic][k] as usize];
                    if let Some(pot) = v {
                        vv += sh[k] * pot.value_at_node(nodes[k]);
                    }
                }
                if v.is_none() {
                    vv = 1.0;
                }
                acc += w * vol * vv * f(uu);
            };
            if self.dim == 1 {
                for &(x, w) in gauss {
                    point([x, 0.0], w);
                }
            } else {
                for &(x, wx) in gauss {
                    for &(y, wy) in gauss {
                        point([x, y], wx * wy);
                    }
                }
            }
        }
        acc
    }

    /// Gradient form: returns the vector of ∫_Omega V g(u) φ_i dx.
    pub fn omega_form_grad<F: Fn(f64) -> f64>(
        &self,
        u: &[f64],
        v: Option<&Potential>,
        g: F,
    ) -> Vec<f64> {
        let gauss = gauss_01(6);
        let npc = self.nodes_per_cell;
        let mut out = vec![0.0; u.len()];
        for (ic, &c) in self.active_cells.iter().enumerate() {
            if !self.omega_cell[ic] {
                continue;
            }
            let nodes = self.mesh.cell_nodes(c);
            let vol = self.mesh.cell_volume();
            let mut point = |r: [f64; 2], w: f64| {
                let sh = shapes(self.dim, r);
                let mut uu = 0.0;
                let mut vv = 0.0;
                for k in 0..npc {
                    uu += sh[k] * u[self.cell_dofs[ic][k] as usize];
                    if let Some(pot) = v {
                        vv += sh[k] * pot.value_at_node(nodes[k]);
                    }
                }
                if v.is_none() {
                    vv = 1.0;
                }
                let t = w * vol * vv * g(uu);
                for k in 0..npc {
                    out[self.cell_dofs[ic][k] as usize] += t * sh[k];
                }
            };
            if self.dim == 1 {
                for &(x, w) in gauss {
                    point([x, 0.0], w);
                }
            } else {
                for &(x, wx) in gauss {
                    for &(y, wy) in gauss {
                        point([x, y], wx * wy);
                    }
                }
            }
        }
        out
    }

    /// ‖u‖^p over Omega.
    pub fn lp_norm_p(&self, u: &[f64]) -> f64 {
        let p = self.p;
        self.omega_form(u, None, |t| t.abs().powf(p))
    }

    /// Consistent mass-type matrix ∫_Omega V φ_i φ_j (V == 1 when absent).
    pub fn omega_matrix(&self, v: Option<&Potential>) -> DMatrix<f64> {
        let gauss = gauss_01(4);
        let npc = self.nodes_per_cell;
        let nd = self.ndofs();
        let mut m = DMatrix::<f64>::zeros(nd, nd);
        for (ic, &c) in self.active_cells.iter().enumerate() {
            if !self.omega_cell[ic] {
                continue;
            }
            let nodes = self.mesh.cell_nodes(c);
            let vol = self.mesh.cell_volume();
            let mut point = |r: [f64; 2], w: f64| {
                let sh = shapes(self.dim, r);
                let mut vv = 1.0;
                if let Some(pot) = v {
                    vv = 0.0;
                    for k in 0..npc {
                        vv += sh[k] * pot.value_at_node(nodes[k]);
                    }
                }
                for i in 0..npc {
                    for j in 0..npc {
                        m[(
                            self.cell_dofs[ic][i] as usize,
                            self.cell_dofs[ic][j] as usize,
                        )] += w * vol * vv * sh[i] * sh[j];
                    }
                }
            };
            if self.dim == 1 {
                for &(x, w) in gauss {
                    point([x, 0.0], w);
                }
            } else {
                for &(x, wx) in gauss {
                    for &(y, wy) in gauss {
                        point([x, y], wx * wy);
                    }
                }
            }
        }
        m
    }

    // ---------------- quotient and residual ----------------

    fn check_admissible(&self, u: &[f64]) -> Result<()> {
        self.check_len(u)?;
        for (d, &c) in self.constrained.iter().enumerate() {
            if c && u[d] != 0.0 {
                return Err(Error::ViolatesDirichlet);
            }
        }
        Ok(())
    }

    /// Rayleigh quotient (K [u]^p + ∫ V |u|^p) / ‖u‖^p_{p;Omega}.
    pub fn rayleigh(&self, u: &[f64], v: Option<&Potential>) -> Result<f64> {
        self.check_admissible(u)?;
        let den = self.lp_norm_p(u);
        if den <= 0.0 {
            return Err(Error::ZeroDenominator);
        }
        let mut num = if let Some(a) = &self.stiffness {
            let uv = nalgebra::DVector::from_column_slice(u);
            (&uv.transpose() * a * &uv)[(0, 0)]
        } else {
            self.k_const * self.seminorm(u)?
        };
        if let Some(pot) = v {
            let p = self.p;
            num += self.omega_form(u, Some(pot), |t| t.abs().powf(p));
        }
        Ok(num / den)
    }

    /// Max over free-node test functions of the normalized weak-form defect.
    pub fn weak_residual(&self, u: &[f64], lambda: f64, v: Option<&Potential>) -> Result<f64> {
        self.check_admissible(u)?;
        if self.lp_norm_p(u) <= 0.0 {
            return Err(Error::ZeroDenominator);
        }
        let p = self.p;
        // K * nonlocal form against each basis function
        let a_u: Vec<f64> = if let Some(a) = &self.stiffness {
            let uv = nalgebra::DVector::from_column_slice(u);
            (a * uv).iter().copied().collect()
        } else {
            let (_, grad) = self.seminorm_grad(u)?;
            grad.iter().map(|g| self.k_const * g / p).collect()
        };
        let v_term = match v {
            Some(pot) => self.omega_form_grad(u, Some(pot), |t| sgn_pow(t, p - 1.0)),
            None => vec![0.0; u.len()],
        };
        let m_term = self.omega_form_grad(u, None, |t| sgn_pow(t, p - 1.0));
        // test-function normalization: largest L^p norm of a free basis function
        let phi_scale = {
            let phi_p = self.basis_lp_norms_p();
            let mut best: f64 = 0.0;
            for (d, &val) in phi_p.iter().enumerate() {
                if !self.constrained[d] {
                    best = best.max(val);
                }
            }
            best.powf(1.0 / p).max(f64::MIN_POSITIVE)
        };
        let mut worst: f64 = 0.0;
        for d in 0..u.len() {
            if self.constrained[d] {
                continue;
            }
            let r = a_u[d] + v_term[d] - lambda * m_term[d];
            worst = worst.max(r.abs());
        }
        Ok(worst / phi_scale)
    }

    /// ∫_Omega φ_i^p for every dof.
    fn basis_lp_norms_p(&self) -> Vec<f64> {
        let gauss = gauss_01(6);
        let npc = self.nodes_per_cell;
        let p = self.p;
        let mut out = vec![0.0; self.ndofs()];
        for (ic, _) in self.active_cells.iter().enumerate() {
            if !self.omega_cell[ic] {
                continue;
            }
            let vol = self.mesh.cell_volume();
            let mut point = |r: [f64; 2], w: f64| {
                let sh = shapes(self.dim, r);
                for k in 0..npc {
                    out[self.cell_dofs[ic][k] as usize] += w * vol * sh[k].powf(p);
                }
            };
            if self.dim == 1 {
                for &(x, w) in gauss {
                    point([x, 0.0], w);
                }
            } else {
                for &(x, wx) in gauss {
                    for &(y, wy) in gauss {
                        point([x, y], wx * wy);
                    }
                }
            }
        }
        out
    }

    /// Quadrature value of the plain kernel interaction of two active cells.
    /// Finite for touching pairs because the graded rule resolves (and, where
    /// the continuum integral diverges, truncates) the shared-facet corner.
    pub fn pair_weight(&self, ia: usize, ib: usize) -> f64 {
        let (ia, ib) = if ia <= ib { (ia, ib) } else { (ib, ia) };
        let ca = self.mesh.cell_corner(self.active_cells[ia]);
        let cb = self.mesh.cell_corner(self.active_cells[ib]);
        let hn2 = self.h.powi(2 * self.dim as i32);
        let pts: &[_] = if ia == ib {
            self.rules.same_cell_points()
        } else {
            let off = (
                self.coords[ib].0 - self.coords[ia].0,
                self.coords[ib].1 - self.coords[ia].1,
            );
            self.rules.pair_points(off)
        };
        let mut acc = 0.0;
        for pt in pts {
            let (x, y) = self.phys(ca, cb, pt.xi, pt.eta);
            let r = dist(x, y);
            if r < 1e-14 {
                continue;
            }
            acc += pt.w * hn2 * r.powf(-self.exponent);
        }
        acc
    }

    pub fn nactive_cells(&self) -> usize {
        self.active_cells.len()
    }

    pub fn active_cell(&self, i: usize) -> usize {
        self.active_cells[i]
    }

    /// Writes the pairwise weights as CSV `(e, f, w)` triples.
    pub fn write_weights_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "e,f,w")?;
        let ne = self.active_cells.len();
        for ia in 0..ne {
            for ib in (ia + 1)..ne {
                writeln!(
                    out,
                    "{},{},{:.16e}",
                    self.active_cells[ia],
                    self.active_cells[ib],
                    self.pair_weight(ia, ib)
                )?;
            }
        }
        Ok(())
    }
}

#[inline]
fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_mesh, DomainSpec, Params, SetMask};

    fn mesh_1d(h: f64, r: f64, s: f64, p: f64) -> Mesh {
        let params = Params { n: 1, s, p, alpha: 0.5, r };
        build_mesh(&DomainSpec::Interval { a: 0.0, b: 1.0 }, &params, h).unwrap()
    }

    // ---- test-only adaptive quadrature oracle ----

    fn adaptive_simpson<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64) -> f64 {
        fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
            (b - a) / 6.0 * (f(a) + 4.0 * f((a + b) / 2.0) + f(b))
        }
        fn rec<F: Fn(f64) -> f64>(
            f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: usize,
        ) -> f64 {
            let m = (a + b) / 2.0;
            let left = simpson(f, a, m);
            let right = simpson(f, m, b);
            if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, left, tol / 2.0, depth - 1)
                    + rec(f, m, b, right, tol / 2.0, depth - 1)
            }
        }
        rec(&f, a, b, simpson(&f, a, b), tol, 40)
    }

    fn adaptive_pair<F: Fn(f64, f64) -> f64 + Copy>(
        f: F, ax: (f64, f64), ay: (f64, f64), tol: f64,
    ) -> f64 {
        adaptive_simpson(
            move |x| adaptive_simpson(move |y| f(x, y), ay.0, ay.1, tol / 10.0),
            ax.0,
            ax.1,
            tol,
        )
    }

    #[test]
    fn normalization_reference_values() {
        assert!((normalization_k(1, 0.5, 2.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((normalization_k(2, 0.25, 2.0).unwrap() - 1.5).abs() < 1e-12);
        // vanishes linearly as s -> 1
        assert!(normalization_k(1, 0.999, 2.0).unwrap() < 2e-3);
        assert!(normalization_k(1, 1.0, 2.0).is_err());
        assert!(normalization_k(3, 0.5, 2.0).is_err());
        assert!(normalization_k(1, 0.5, 1.0).is_err());
    }

    #[test]
    fn far_pair_weight_matches_adaptive() {
        let s = 0.5;
        let p = 2.0;
        let mesh = mesh_1d(0.1, 2.0, s, p);
        let mask = SetMask::empty(&mesh);
        let op = assemble_kernel(&mesh, &mask, s, p).unwrap();
        let exponent = 1.0 + s * p;
        // pick two well-separated active cells and compare with adaptive 2D
        for (ia, ib) in [(0usize, 5usize), (0, 9), (2, 8)] {
            let a = mesh.cell_corner(op.active_cell(ia))[0];
            let b = mesh.cell_corner(op.active_cell(ib))[0];
            let oracle = adaptive_pair(
                |x, y| (y - x).abs().powf(-exponent),
                (a, a + mesh.h),
                (b, b + mesh.h),
                1e-12,
            );
            let got = op.pair_weight(ia, ib);
            assert!(
                (got - oracle).abs() / oracle < 1e-8,
                "pair ({ia},{ib}): {got} vs {oracle}"
            );
        }
    }

    #[test]
    fn pair_weights_monotone_and_symmetric() {
        let mesh = mesh_1d(0.1, 2.0, 0.5, 2.0);
        let op = assemble_kernel(&mesh, &SetMask::empty(&mesh), 0.5, 2.0).unwrap();
        let mut last = f64::INFINITY;
        for ib in 1..10 {
            let w = op.pair_weight(0, ib);
            assert!(w.is_finite() && w > 0.0);
            assert!(w < last, "weight not decreasing at offset {ib}");
            assert_eq!(w, op.pair_weight(ib, 0));
            last = w;
        }
    }

    #[test]
    fn same_cell_coefficient_matches_adaptive() {
        // the analytic same-cell reduction integrates |x-y|^{p-1-sp}
        let (s, p, h) = (0.4, 2.0, 0.05);
        let oracle = adaptive_pair(
            |x: f64, y: f64| (x - y).abs().powf(p - 1.0 - s * p),
            (0.0, h),
            (0.0, h),
            1e-13,
        );
        let coef = 2.0 * h.powf(1.0 - s * p) / ((p - s * p) * (p + 1.0 - s * p));
        // coefficient multiplies |du|^p = |slope|^p h^p; oracle integrates the
        // kernel against (x-y)^2 scaled by slope^2, so divide h^p out
        assert!((coef - oracle / h.powf(p)).abs() / coef < 1e-10);
    }

    #[test]
    fn hat_seminorm_matches_brute_force() {
        let (s, p) = (0.4, 2.0);
        let mesh = mesh_1d(0.1, 2.0, s, p);
        let mask = SetMask::empty(&mesh);
        let op = assemble_kernel(&mesh, &mask, s, p).unwrap();
        // hat function peaking mid-Omega
        let hat = |x: f64| (1.0 - (x - 0.5).abs() / 0.3).max(0.0);
        let u: Vec<f64> = (0..op.ndofs())
            .map(|d| hat(mesh.node_pos(op.node_of_dof(d))[0]))
            .collect();
        let got = op.seminorm(&u).unwrap();

        // brute force: adaptive integral over every active cell pair of the
        // piecewise-linear interpolant (active region = Omega here)
        let exponent = 1.0 + s * p;
        let interp = |x: f64| {
            let i = ((x - mesh.origin[0]) / mesh.h).floor().min(mesh.nx as f64 - 1.0) as usize;
            let x0 = mesh.origin[0] + i as f64 * mesh.h;
            let t = (x - x0) / mesh.h;
            let (a, b) = (hat(x0), hat(x0 + mesh.h));
            a * (1.0 - t) + b * t
        };
        let cells: Vec<f64> = (0..op.nactive_cells())
            .map(|i| mesh.cell_corner(op.active_cell(i))[0])
            .collect();
        let mut oracle = 0.0;
        for (i, &a) in cells.iter().enumerate() {
            for &b in &cells[i..] {
                let factor = if a == b { 1.0 } else { 2.0 };
                oracle += factor
                    * adaptive_pair(
                        |x, y| {
                            let d = interp(x) - interp(y);
                            if x == y {
                                0.0
                            } else {
                                d.abs().powf(p) * (x - y).abs().powf(-exponent)
                            }
                        },
                        (a, a + mesh.h),
                        (b, b + mesh.h),
                        1e-9,
                    );
            }
        }
        assert!(
            (got - oracle).abs() / oracle < 1e-4,
            "seminorm {got} vs brute force {oracle}"
        );
    }

    #[test]
    fn seminorm_p_homogeneity() {
        let (s, p) = (0.5, 3.0);
        let mesh = mesh_1d(0.125, 1.5, s, p);
        let op = assemble_kernel(&mesh, &SetMask::empty(&mesh), s, p).unwrap();
        let u: Vec<f64> = (0..op.ndofs()).map(|d| (d as f64 * 0.7).sin()).collect();
        let cu: Vec<f64> = u.iter().map(|&v| -2.0 * v).collect();
        let base = op.seminorm(&u).unwrap();
        let scaled = op.seminorm(&cu).unwrap();
        assert!((scaled - 8.0 * base).abs() / scaled < 1e-12);
        // gradient consistency by finite differences
        let (_, grad) = op.seminorm_grad(&u).unwrap();
        let eps = 1e-6;
        for d in [0usize, 3, 7] {
            let mut up = u.clone();
            up[d] += eps;
            let mut dn = u.clone();
            dn[d] -= eps;
            let fd = (op.seminorm(&up).unwrap() - op.seminorm(&dn).unwrap()) / (2.0 * eps);
            assert!((grad[d] - fd).abs() < 1e-5 * (1.0 + fd.abs()), "dof {d}");
        }
    }

    #[test]
    fn stiffness_form_equals_seminorm() {
        let (s, p) = (0.5, 2.0);
        let mesh = mesh_1d(0.1, 2.0, s, p);
        let mask = SetMask::from_predicate(&mesh, |x| x[0] > 1.0 && x[0] < 1.5).unwrap();
        let op = assemble_kernel(&mesh, &mask, s, p).unwrap();
        let u: Vec<f64> = (0..op.ndofs()).map(|d| (d as f64 * 0.3).cos()).collect();
        let a = op.stiffness().unwrap();
        let uv = nalgebra::DVector::from_column_slice(&u);
        let quad_form = (&uv.transpose() * a * &uv)[(0, 0)];
        let sem = op.k_const * op.seminorm(&u).unwrap();
        assert!(
            (quad_form - sem).abs() / sem.abs().max(1e-30) < 1e-12,
            "{quad_form} vs {sem}"
        );
    }

    #[test]
    fn rayleigh_constant_and_scaling() {
        let mesh = mesh_1d(0.1, 2.0, 0.5, 2.0);
        let op = assemble_kernel(&mesh, &SetMask::empty(&mesh), 0.5, 2.0).unwrap();
        let ones = vec![1.0; op.ndofs()];
        // no mask, constant function: seminorm vanishes
        let r0 = op.rayleigh(&ones, None).unwrap();
        assert!(r0.abs() < 1e-10, "constant Rayleigh {r0}");
        // with V == c the quotient is exactly c
        let v = Potential::constant(&mesh, 3.5).unwrap();
        let rc = op.rayleigh(&ones, Some(&v)).unwrap();
        assert!((rc - 3.5).abs() < 1e-10);
        // scale invariance
        let u: Vec<f64> = (0..op.ndofs()).map(|d| 1.0 + (d as f64 * 0.4).sin()).collect();
        let cu: Vec<f64> = u.iter().map(|&x| 7.25 * x).collect();
        let a = op.rayleigh(&u, Some(&v)).unwrap();
        let b = op.rayleigh(&cu, Some(&v)).unwrap();
        assert!((a - b).abs() / a < 1e-12);
    }

    #[test]
    fn rayleigh_errors() {
        let mesh = mesh_1d(0.1, 2.0, 0.5, 2.0);
        let mask = SetMask::from_predicate(&mesh, |x| x[0] > 1.0 && x[0] < 1.5).unwrap();
        let op = assemble_kernel(&mesh, &mask, 0.5, 2.0).unwrap();
        let ones = vec![1.0; op.ndofs()];
        assert!(matches!(op.rayleigh(&ones, None), Err(Error::ViolatesDirichlet)));
        let zeros = vec![0.0; op.ndofs()];
        assert!(matches!(op.rayleigh(&zeros, None), Err(Error::ZeroDenominator)));
        assert!(matches!(
            op.rayleigh(&[1.0, 2.0], None),
            Err(Error::BadVectorLength { .. })
        ));
    }

    #[test]
    fn weak_residual_constant_zero() {
        let mesh = mesh_1d(0.1, 2.0, 0.5, 2.0);
        let op = assemble_kernel(&mesh, &SetMask::empty(&mesh), 0.5, 2.0).unwrap();
        let ones = vec![1.0; op.ndofs()];
        // u constant, lambda = 0, no potential: residual vanishes
        let r = op.weak_residual(&ones, 0.0, None).unwrap();
        assert!(r < 1e-10, "residual {r}");
        // with V == c, lambda = c is the exact pair
        let v = Potential::constant(&mesh, 2.0).unwrap();
        let r = op.weak_residual(&ones, 2.0, Some(&v)).unwrap();
        assert!(r < 1e-10, "residual {r}");
        // a wrong lambda must register
        let r = op.weak_residual(&ones, 2.1, Some(&v)).unwrap();
        assert!(r > 1e-4, "perturbed residual {r}");
    }

    #[test]
    fn omega_cache_reuse_is_exact() {
        let mesh = mesh_1d(0.1, 2.0, 0.5, 2.0);
        let mask1 = SetMask::from_predicate(&mesh, |x| x[0] > 1.0 && x[0] < 1.3).unwrap();
        let mask2 = SetMask::from_predicate(&mesh, |x| x[0] > 1.4 && x[0] < 1.7).unwrap();
        let opts = KernelOpts::default();
        let mut cache = AssemblyCache::new();
        let _warm = assemble_kernel_with(&mesh, &mask1, 0.5, 2.0, &opts, Some(&mut cache)).unwrap();
        let cached = assemble_kernel_with(&mesh, &mask2, 0.5, 2.0, &opts, Some(&mut cache)).unwrap();
        let fresh = assemble_kernel(&mesh, &mask2, 0.5, 2.0).unwrap();
        let (a, b) = (cached.stiffness().unwrap(), fresh.stiffness().unwrap());
        let mut worst = 0.0f64;
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                worst = worst.max((a[(i, j)] - b[(i, j)]).abs());
            }
        }
        assert!(worst == 0.0, "cache changed entries by {worst}");
    }

    #[test]
    fn mass_matrix_row_sums_give_measure() {
        let mesh = mesh_1d(0.1, 2.0, 0.5, 2.0);
        let op = assemble_kernel(&mesh, &SetMask::empty(&mesh), 0.5, 2.0).unwrap();
        let m = op.mass().unwrap();
        let total: f64 = m.iter().sum();
        assert!((total - mesh.omega_measure()).abs() < 1e-12);
        // omega_form agrees
        let ones = vec![1.0; op.ndofs()];
        assert!((op.lp_norm_p(&ones) - mesh.omega_measure()).abs() < 1e-12);
    }

    #[test]
    fn potential_validation() {
        let mesh = mesh_1d(0.1, 2.0, 0.5, 2.0);
        assert!(Potential::constant(&mesh, 0.0).is_err());
        assert!(Potential::constant(&mesh, -1.0).is_err());
        let bad_len = Potential::from_nodal(&mesh, vec![1.0; 3]);
        assert!(matches!(bad_len, Err(Error::BadVectorLength { .. })));
        // negative only outside Omega is fine
        let v = Potential::from_fn(&mesh, |x| if x[0] < -0.5 { -1.0 } else { 2.0 }).unwrap();
        assert!(v.v1 > 0.0);
    }

    #[test]
    fn dof_cap_enforced() {
        let mesh = mesh_1d(0.01, 2.0, 0.5, 2.0);
        let opts = KernelOpts { dof_cap: 10, ..KernelOpts::default() };
        let got = assemble_kernel_with(&mesh, &SetMask::empty(&mesh), 0.5, 2.0, &opts, None);
        assert!(matches!(got, Err(Error::ProblemTooLarge(_))));
    }
}
