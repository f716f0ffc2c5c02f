//! Optimization of the Dirichlet set at fixed measure: bathtub
//! rearrangement against the interaction density, alternating
//! minimization, a quasi-optimal maximization heuristic, and the decay /
//! rate / surround experiments built on top of the eigensolver.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::eigensolve::{first_eigenpair, EigenResult, SolveOpts};
use crate::error::{Error, Result};
use crate::geometry::{
    fattened_annulus, inf_distance, translated_ball, Mesh, RegionRef, SetMask,
};
use crate::kernel::{
    assemble_kernel_with, AssemblyCache, KernelOpts, Potential,
};
use crate::quad::RuleSet;

/// Mean over one candidate cell of the interaction density
/// f(y) = ∫_Omega |u(x)|^p |x - y|^{-(n+sp)} dx, for every candidate cell.
/// `u` is a global nodal vector (zero outside its support).
pub fn interaction_density(mesh: &Mesh, u: &[f64], s: f64, p: f64) -> Result<Vec<(usize, f64)>> {
    if u.len() != mesh.nnodes() {
        return Err(Error::BadVectorLength {
            expected: mesh.nnodes(),
            got: u.len(),
        });
    }
    let exponent = mesh.dim as f64 + s * p;
    let rules = RuleSet::new(mesh.dim, 8);
    let omega: Vec<usize> = mesh.omega_cells().collect();
    let candidates: Vec<usize> = mesh.candidate_cells().collect();
    let h = mesh.h;
    let hn2 = h.powi(2 * mesh.dim as i32);
    let vol = mesh.cell_volume();

    let shape_val = |cell: usize, r: [f64; 2]| -> f64 {
        let nodes = mesh.cell_nodes(cell);
        if mesh.dim == 1 {
            u[nodes[0]] * (1.0 - r[0]) + u[nodes[1]] * r[0]
        } else {
            u[nodes[0]] * (1.0 - r[0]) * (1.0 - r[1])
                + u[nodes[1]] * r[0] * (1.0 - r[1])
                + u[nodes[2]] * (1.0 - r[0]) * r[1]
                + u[nodes[3]] * r[0] * r[1]
        }
    };

    let density: Vec<(usize, f64)> = candidates
        .par_iter()
        .map(|&c| {
            let (ci, cj) = mesh.cell_coords(c);
            let cc = mesh.cell_corner(c);
            let mut acc = 0.0;
            for &e in &omega {
                let (ei, ej) = mesh.cell_coords(e);
                let ec = mesh.cell_corner(e);
                // orient the pair by cell index so the graded rules see the
                // shared facet on the correct side
                let (a, b, ac, bc, omega_first) = if e < c {
                    (
                        (ei as i32, ej as i32),
                        (ci as i32, cj as i32),
                        ec,
                        cc,
                        true,
                    )
                } else {
                    (
                        (ci as i32, cj as i32),
                        (ei as i32, ej as i32),
                        cc,
                        ec,
                        false,
                    )
                };
                let off = (b.0 - a.0, b.1 - a.1);
                for pt in rules.pair_points(off) {
                    let x = [ac[0] + h * pt.xi[0], ac[1] + h * pt.xi[1]];
                    let y = [bc[0] + h * pt.eta[0], bc[1] + h * pt.eta[1]];
                    let r = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
                    let uu = if omega_first {
                        shape_val(e, pt.xi)
                    } else {
                        shape_val(e, pt.eta)
                    };
                    acc += pt.w * hn2 * uu.abs().powf(p) * r.powf(-exponent);
                }
            }
            (c, acc / vol)
        })
        .collect();
    Ok(density)
}

/// Bathtub step: selects the measure-alpha set of candidate cells with the
/// smallest (or, for `maximize`, largest) mean interaction density. Ties
/// break toward the lowest cell index.
pub fn bathtub_rearrange(
    mesh: &Mesh,
    u: &[f64],
    s: f64,
    p: f64,
    alpha: f64,
    maximize: bool,
) -> Result<SetMask> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParams(format!("alpha must be positive, got {alpha}")));
    }
    let mut density = interaction_density(mesh, u, s, p)?;
    let k = (alpha / mesh.cell_volume()).round().max(1.0) as usize;
    if k > density.len() {
        return Err(Error::AlphaTooLarge);
    }
    density.sort_by(|a, b| {
        let ord = a.1.partial_cmp(&b.1).unwrap();
        (if maximize { ord.reverse() } else { ord }).then(a.0.cmp(&b.0))
    });
    SetMask::from_cells(mesh, density.into_iter().take(k).map(|(c, _)| c))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// the rearranged mask repeated an earlier one
    FixedPoint,
    /// eigenvalue change fell below tolerance
    Tolerance,
    /// outer iteration cap
    Cap,
}

#[derive(Clone, Debug)]
pub struct HistoryEntry {
    pub iter: usize,
    pub lambda: f64,
    pub fingerprint: u64,
}

#[derive(Debug)]
pub struct OptResult {
    pub mask: SetMask,
    pub eigen: EigenResult,
    pub history: Vec<HistoryEntry>,
    pub terminated_by: Termination,
}

#[derive(Clone, Copy, Debug)]
pub struct OptOpts {
    pub solve: SolveOpts,
    pub kernel: KernelOpts,
    pub max_outer: usize,
    pub tol: f64,
}

impl Default for OptOpts {
    fn default() -> Self {
        OptOpts {
            solve: SolveOpts::default(),
            kernel: KernelOpts::default(),
            max_outer: 100,
            tol: 1e-12,
        }
    }
}

fn solve_mask(
    mesh: &Mesh,
    mask: &SetMask,
    s: f64,
    p: f64,
    v: Option<&Potential>,
    opts: &OptOpts,
    cache: &mut AssemblyCache,
) -> Result<EigenResult> {
    let op = assemble_kernel_with(mesh, mask, s, p, &opts.kernel, Some(cache))?;
    first_eigenpair(&op, v, &opts.solve)
}

/// Alternating minimization over sets of measure alpha: eigensolve at a
/// fixed set, bathtub-rearrange at a fixed eigenfunction. The eigenvalue
/// sequence is nonincreasing; stops at a repeated mask, on tolerance, or
/// at the iteration cap.
pub fn alternating_minimize(
    mesh: &Mesh,
    s: f64,
    p: f64,
    alpha: f64,
    v: Option<&Potential>,
    opts: &OptOpts,
) -> Result<OptResult> {
    let mut cache = AssemblyCache::new();
    let mut mask = fattened_annulus(mesh, alpha)?;
    let mut seen = vec![mask.fingerprint()];
    let mut history = Vec::new();
    let mut eigen = solve_mask(mesh, &mask, s, p, v, opts, &mut cache)?;
    history.push(HistoryEntry {
        iter: 0,
        lambda: eigen.lambda,
        fingerprint: mask.fingerprint(),
    });
    let mut terminated_by = Termination::Cap;
    for iter in 1..=opts.max_outer {
        let op = assemble_kernel_with(mesh, &mask, s, p, &opts.kernel, Some(&mut cache))?;
        let u_global = op.global_nodal(&eigen.u);
        let next = bathtub_rearrange(mesh, &u_global, s, p, alpha, false)?;
        if seen.contains(&next.fingerprint()) {
            terminated_by = Termination::FixedPoint;
            break;
        }
        let next_eigen = solve_mask(mesh, &next, s, p, v, opts, &mut cache)?;
        let drop = eigen.lambda - next_eigen.lambda;
        seen.push(next.fingerprint());
        history.push(HistoryEntry {
            iter,
            lambda: next_eigen.lambda,
            fingerprint: next.fingerprint(),
        });
        mask = next;
        eigen = next_eigen;
        if drop.abs() <= opts.tol * eigen.lambda.abs().max(1.0) {
            terminated_by = Termination::Tolerance;
            break;
        }
    }
    Ok(OptResult {
        mask,
        eigen,
        history,
        terminated_by,
    })
}

/// Heuristic maximization at fixed measure. Alternates with the descending
/// bathtub order (tracking the best set seen, since ascent is not
/// guaranteed), restarts from seeded random sets, and always also scores
/// the fattened annulus.
pub fn maximize_heuristic(
    mesh: &Mesh,
    s: f64,
    p: f64,
    alpha: f64,
    v: Option<&Potential>,
    opts: &OptOpts,
    restarts: usize,
    seed: u64,
) -> Result<OptResult> {
    let mut cache = AssemblyCache::new();
    let k = (alpha / mesh.cell_volume()).round().max(1.0) as usize;
    let candidates: Vec<usize> = mesh.candidate_cells().collect();
    if k > candidates.len() {
        return Err(Error::AlphaTooLarge);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts: Vec<SetMask> = vec![fattened_annulus(mesh, alpha)?];
    for _ in 0..restarts {
        let mut cells = candidates.clone();
        cells.shuffle(&mut rng);
        starts.push(SetMask::from_cells(mesh, cells.into_iter().take(k))?);
    }

    let mut history = Vec::new();
    let mut best: Option<(SetMask, EigenResult)> = None;
    let mut iter = 0usize;
    let mut terminated_by = Termination::Cap;
    let record =
        |mask: &SetMask, eigen: EigenResult, best: &mut Option<(SetMask, EigenResult)>,
         history: &mut Vec<HistoryEntry>, iter: &mut usize| {
            history.push(HistoryEntry {
                iter: *iter,
                lambda: eigen.lambda,
                fingerprint: mask.fingerprint(),
            });
            *iter += 1;
            if best.as_ref().map(|(_, b)| eigen.lambda > b.lambda).unwrap_or(true) {
                *best = Some((mask.clone(), eigen));
            }
        };

    for start in starts {
        let mut mask = start;
        let mut seen = vec![mask.fingerprint()];
        let mut eigen = solve_mask(mesh, &mask, s, p, v, opts, &mut cache)?;
        record(&mask, eigen.clone(), &mut best, &mut history, &mut iter);
        for _ in 0..opts.max_outer {
            let op = assemble_kernel_with(mesh, &mask, s, p, &opts.kernel, Some(&mut cache))?;
            let u_global = op.global_nodal(&eigen.u);
            let next = bathtub_rearrange(mesh, &u_global, s, p, alpha, true)?;
            if seen.contains(&next.fingerprint()) {
                terminated_by = Termination::FixedPoint;
                break;
            }
            seen.push(next.fingerprint());
            eigen = solve_mask(mesh, &next, s, p, v, opts, &mut cache)?;
            mask = next;
            record(&mask, eigen.clone(), &mut best, &mut history, &mut iter);
        }
    }

    let (mask, eigen) = best.unwrap();
    Ok(OptResult {
        mask,
        eigen,
        history,
        terminated_by,
    })
}

// ---------------- experiments ----------------

#[derive(Clone, Debug)]
pub struct DecayRecord {
    pub k: f64,
    pub lambda: f64,
    pub mask_measure: f64,
}

#[derive(Debug)]
pub struct DecayResult {
    pub records: Vec<DecayRecord>,
    /// log-log least-squares slope, excluding the smallest offset
    pub slope: f64,
    /// expected slope -(n + sp)
    pub expected: f64,
}

/// Eigenvalue decay for Dirichlet balls translated to k e_1.
pub fn decay_experiment(
    mesh: &Mesh,
    s: f64,
    p: f64,
    radius: f64,
    offsets: &[f64],
    opts: &OptOpts,
) -> Result<DecayResult> {
    if offsets.len() < 3 {
        return Err(Error::InvalidParams(
            "decay experiment needs at least 3 offsets".into(),
        ));
    }
    let mut offsets = offsets.to_vec();
    offsets.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut records = Vec::new();
    for &k in &offsets {
        let mask = translated_ball(mesh, radius, k)?;
        let op = assemble_kernel_with(mesh, &mask, s, p, &opts.kernel, None)?;
        let eigen = first_eigenpair(&op, None, &opts.solve)?;
        records.push(DecayRecord {
            k,
            lambda: eigen.lambda,
            mask_measure: mask.measure(),
        });
    }
    // least squares on (ln k, ln lambda), smallest offset excluded: the
    // asymptotic regime starts once the ball is well separated
    let pts: Vec<(f64, f64)> = records[1..]
        .iter()
        .map(|r| (r.k.ln(), r.lambda.ln()))
        .collect();
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    Ok(DecayResult {
        records,
        slope,
        expected: -(mesh.dim as f64 + s * p),
    })
}

#[derive(Clone, Debug)]
pub struct RateRecord {
    pub s: f64,
    pub lambda: f64,
    /// lambda / (1 - s); bounded for Dirichlet sets separated from Omega
    pub ratio: f64,
}

/// lambda and lambda / (1 - s) across s for one fixed Dirichlet set,
/// required to be separated from Omega.
pub fn separated_rate_experiment<FM>(
    mesh: &Mesh,
    p: f64,
    s_list: &[f64],
    mask_of: FM,
    opts: &OptOpts,
) -> Result<Vec<RateRecord>>
where
    FM: Fn(&Mesh) -> Result<SetMask>,
{
    let mask = mask_of(mesh)?;
    if mask.is_empty() {
        return Err(Error::EmptyDirichletSet);
    }
    let gap = inf_distance(mesh, RegionRef::Omega, RegionRef::Mask(&mask))?;
    if gap <= 0.0 {
        return Err(Error::MaskTouchesOmega);
    }
    let mut out = Vec::new();
    for &s in s_list {
        let op = assemble_kernel_with(mesh, &mask, s, p, &opts.kernel, None)?;
        let eigen = first_eigenpair(&op, None, &opts.solve)?;
        out.push(RateRecord {
            s,
            lambda: eigen.lambda,
            ratio: eigen.lambda / (1.0 - s),
        });
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct SurroundRecord {
    pub point: [f64; 2],
    pub eps: f64,
    pub measure_in_ball: f64,
    pub covered: bool,
}

/// Measures how much of the mask lies within eps of a given point;
/// eps must exceed one cell diameter to be meaningful.
pub fn surround_diagnostic(
    mesh: &Mesh,
    mask: &SetMask,
    point: [f64; 2],
    eps: f64,
) -> Result<SurroundRecord> {
    if !(eps > mesh.cell_diameter()) {
        return Err(Error::InvalidParams(format!(
            "eps = {eps} must exceed the cell diameter {}",
            mesh.cell_diameter()
        )));
    }
    let mut measure = 0.0;
    for c in mask.cells() {
        let ctr = mesh.cell_center(c);
        let d = ((ctr[0] - point[0]).powi(2) + (ctr[1] - point[1]).powi(2)).sqrt();
        if d < eps {
            measure += mesh.cell_volume();
        }
    }
    Ok(SurroundRecord {
        point,
        eps,
        measure_in_ball: measure,
        covered: measure > 0.0,
    })
}
