//! Behavior as s -> 1: sweeps of the constrained eigenvalues across s with
//! h refined like (1 - s), next to the local 1D reference values they
//! should approach.

use crate::eigensolve::{
    first_eigenpair, local_reference, LocalBc,
};
use crate::error::{Error, Result};
use crate::geometry::{build_mesh, fattened_annulus, DomainSpec, Mesh, Params, SetMask};
use crate::kernel::{assemble_kernel_with, Potential};
use crate::shapeopt::{alternating_minimize, OptOpts};

#[derive(Clone, Debug)]
pub struct SweepRecord {
    pub s: f64,
    pub h: f64,
    /// full candidate region Dirichlet: proxy for the supremum over sets
    pub lambda_plus_proxy: f64,
    /// fattened annulus of measure alpha
    pub lambda_annulus: f64,
    /// alternating minimization at measure alpha
    pub lambda_minus_r: f64,
    /// empty Dirichlet set (nonlocal Neumann baseline, includes V if given)
    pub lambda_neumann_nonlocal: f64,
    /// local Dirichlet reference (1D domains only)
    pub local_dirichlet_ref: Option<f64>,
    /// local Neumann reference with the same potential (1D domains only)
    pub local_neumann_ref: Option<f64>,
    pub skipped: bool,
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub domain: DomainSpec,
    pub p: f64,
    pub alpha: f64,
    pub r: f64,
    /// coarsest mesh width; each s uses min(base_h, (1 - s) / 4)
    pub base_h: f64,
    pub s_list: Vec<f64>,
    pub potential: Option<f64>,
    pub local_ref_h: f64,
}

fn solve_for_mask(
    mesh: &Mesh,
    mask: &SetMask,
    s: f64,
    p: f64,
    v: Option<&Potential>,
    opts: &OptOpts,
) -> Result<f64> {
    let op = assemble_kernel_with(mesh, mask, s, p, &opts.kernel, None)?;
    Ok(first_eigenpair(&op, v, &opts.solve)?.lambda)
}

/// Runs the sweep. Entries whose refined mesh would exceed the dof cap are
/// returned with `skipped = true` and NaN values instead of failing the
/// whole sweep.
pub fn s_sweep(cfg: &SweepConfig, opts: &OptOpts) -> Result<Vec<SweepRecord>> {
    if cfg.s_list.is_empty() {
        return Err(Error::InvalidParams("empty s list".into()));
    }
    let is_1d = cfg.domain.dim() == 1;
    let local_dirichlet = if is_1d {
        Some(local_reference(cfg.p, LocalBc::Dirichlet, None, cfg.local_ref_h)?)
    } else {
        None
    };
    let local_neumann = if is_1d {
        match cfg.potential {
            Some(c) => Some(local_reference(cfg.p, LocalBc::Neumann, Some(c), cfg.local_ref_h)?),
            None => Some(0.0),
        }
    } else {
        None
    };

    let mut out = Vec::new();
    for &s in &cfg.s_list {
        let h = cfg.base_h.min((1.0 - s) / 4.0);
        let params = Params {
            n: cfg.domain.dim(),
            s,
            p: cfg.p,
            alpha: cfg.alpha,
            r: cfg.r,
        };
        let run = || -> Result<SweepRecord> {
            let mesh = build_mesh(&cfg.domain, &params, h)?;
            let v = match cfg.potential {
                Some(c) => Some(Potential::constant(&mesh, c)?),
                None => None,
            };
            let full = SetMask::full_candidate(&mesh);
            let lambda_plus_proxy = solve_for_mask(&mesh, &full, s, cfg.p, v.as_ref(), opts)?;
            let annulus = fattened_annulus(&mesh, cfg.alpha)?;
            let lambda_annulus = solve_for_mask(&mesh, &annulus, s, cfg.p, v.as_ref(), opts)?;
            let minimized =
                alternating_minimize(&mesh, s, cfg.p, cfg.alpha, v.as_ref(), opts)?;
            let empty = SetMask::empty(&mesh);
            let lambda_neumann_nonlocal =
                solve_for_mask(&mesh, &empty, s, cfg.p, v.as_ref(), opts)?;
            Ok(SweepRecord {
                s,
                h,
                lambda_plus_proxy,
                lambda_annulus,
                lambda_minus_r: minimized.eigen.lambda,
                lambda_neumann_nonlocal,
                local_dirichlet_ref: local_dirichlet,
                local_neumann_ref: local_neumann,
                skipped: false,
            })
        };
        match run() {
            Ok(rec) => out.push(rec),
            Err(Error::ProblemTooLarge(_)) => out.push(SweepRecord {
                s,
                h,
                lambda_plus_proxy: f64::NAN,
                lambda_annulus: f64::NAN,
                lambda_minus_r: f64::NAN,
                lambda_neumann_nonlocal: f64::NAN,
                local_dirichlet_ref: local_dirichlet,
                local_neumann_ref: local_neumann,
                skipped: true,
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
