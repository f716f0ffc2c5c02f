//! First eigenpairs: inverse power iteration for p = 2, projected descent
//! on the Rayleigh quotient for general p, a dense reference solver, the
//! Poincare-type lower bounds, and local (s -> 1) 1D reference problems.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{sup_distance, Mesh, RegionRef, SetMask};
use crate::kernel::{normalization_k, KernelOperator, Potential};

#[derive(Clone, Copy, Debug)]
pub struct SolveOpts {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOpts {
    fn default() -> Self {
        SolveOpts {
            tol: 1e-12,
            max_iter: 10_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenResult {
    pub lambda: f64,
    /// nodal values on the operator's dof set, ||u||_{p;Omega} = 1,
    /// Omega-average positive
    pub u: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

fn reduced_matrices(
    op: &KernelOperator,
    v: Option<&Potential>,
) -> Result<(Vec<usize>, DMatrix<f64>, DMatrix<f64>)> {
    let free = op.free_dofs();
    if free.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let a_full = op
        .stiffness()
        .expect("reduced_matrices requires the p = 2 matrices");
    let m_full = op.mass().unwrap();
    let nf = free.len();
    let mut a = DMatrix::<f64>::zeros(nf, nf);
    let mut m = DMatrix::<f64>::zeros(nf, nf);
    for (i, &di) in free.iter().enumerate() {
        for (j, &dj) in free.iter().enumerate() {
            a[(i, j)] = a_full[(di, dj)];
            m[(i, j)] = m_full[(di, dj)];
        }
    }
    if let Some(pot) = v {
        let av_full = op.omega_matrix(Some(pot));
        for (i, &di) in free.iter().enumerate() {
            for (j, &dj) in free.iter().enumerate() {
                a[(i, j)] += av_full[(di, dj)];
            }
        }
    }
    Ok((free, a, m))
}

fn finalize(
    op: &KernelOperator,
    v: Option<&Potential>,
    mut u: Vec<f64>,
    lambda: f64,
    iterations: usize,
    converged: bool,
) -> Result<EigenResult> {
    // Omega-average positive, then L^p(Omega)-normalized
    let avg = op.omega_form(&u, None, |t| t);
    if avg < 0.0 {
        u.iter_mut().for_each(|x| *x = -*x);
    }
    let norm = op.lp_norm_p(&u);
    if norm <= 0.0 {
        return Err(Error::ZeroDenominator);
    }
    let scale = norm.powf(1.0 / op.p);
    u.iter_mut().for_each(|x| *x /= scale);
    let residual = op.weak_residual(&u, lambda, v)?;
    Ok(EigenResult {
        lambda,
        u,
        iterations,
        residual,
        converged,
    })
}

/// Smallest eigenvalue and eigenfunction of the assembled operator.
pub fn first_eigenpair(
    op: &KernelOperator,
    v: Option<&Potential>,
    opts: &SolveOpts,
) -> Result<EigenResult> {
    if op.p == 2.0 {
        inverse_power(op, v, opts)
    } else {
        let init = descent_init(op, v)?;
        descent(op, v, opts, &init)
    }
}

fn inverse_power(
    op: &KernelOperator,
    v: Option<&Potential>,
    opts: &SolveOpts,
) -> Result<EigenResult> {
    let (free, a, m) = reduced_matrices(op, v)?;
    let nf = free.len();
    // shift by +1: A + M is positive definite even when A is singular
    let shifted = &a + &m;
    let chol = shifted
        .clone()
        .cholesky()
        .ok_or(Error::InvalidParams("operator is not positive definite".into()))?;
    let mut x = DVector::<f64>::from_element(nf, 1.0);
    {
        let mnorm = (x.transpose() * &m * &x)[(0, 0)].sqrt();
        x /= mnorm;
    }
    let mut lambda = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    for it in 1..=opts.max_iter {
        let y = chol.solve(&(&m * &x));
        let mnorm = (y.transpose() * &m * &y)[(0, 0)].sqrt();
        if !(mnorm > 0.0) {
            return Err(Error::ZeroDenominator);
        }
        let y = y / mnorm;
        // sign-insensitive M-norm change of the iterate; the eigenvalue
        // converges quadratically in this, so drive the vector itself down
        let d_plus = {
            let d = &y - &x;
            (d.transpose() * &m * &d)[(0, 0)].sqrt()
        };
        let d_minus = {
            let d = &y + &x;
            (d.transpose() * &m * &d)[(0, 0)].sqrt()
        };
        x = y;
        lambda = (x.transpose() * &a * &x)[(0, 0)];
        iterations = it;
        if d_plus.min(d_minus) <= opts.tol.max(1e-14) * 10.0 {
            converged = true;
            break;
        }
    }
    let mut u = vec![0.0; op.ndofs()];
    for (i, &d) in free.iter().enumerate() {
        u[d] = x[i];
    }
    finalize(op, v, u, lambda, iterations, converged)
}

/// Dense reference: full generalized symmetric eigensolve via a Cholesky
/// change of variables. Independent of the iteration above.
pub fn dense_first_eigenpair(op: &KernelOperator, v: Option<&Potential>) -> Result<EigenResult> {
    let (free, a, m) = reduced_matrices(op, v)?;
    let chol_m = m
        .clone()
        .cholesky()
        .ok_or(Error::InvalidParams("mass matrix is not positive definite".into()))?;
    let l = chol_m.l();
    // B = L^{-1} A L^{-T}, symmetric, same eigenvalues as (A, M)
    let linv_a = l
        .clone()
        .solve_lower_triangular(&a)
        .ok_or(Error::InvalidParams("singular Cholesky factor".into()))?;
    let b = l
        .clone()
        .solve_lower_triangular(&linv_a.transpose())
        .ok_or(Error::InvalidParams("singular Cholesky factor".into()))?;
    let b = (&b + &b.transpose()) * 0.5;
    let eig = b.symmetric_eigen();
    let mut best = 0usize;
    for i in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[i] < eig.eigenvalues[best] {
            best = i;
        }
    }
    let lambda = eig.eigenvalues[best];
    let w = eig.eigenvectors.column(best).into_owned();
    // back-substitute: u = L^{-T} w
    let x = l
        .transpose()
        .solve_upper_triangular(&w)
        .ok_or(Error::InvalidParams("singular Cholesky factor".into()))?;
    let mut u = vec![0.0; op.ndofs()];
    for (i, &d) in free.iter().enumerate() {
        u[d] = x[i];
    }
    finalize(op, v, u, lambda, free.len(), true)
}

/// Default start for the descent: the p = 2 eigenfunction on the same mesh
/// and mask (or the flat function when the mask is empty and V is absent).
fn descent_init(op: &KernelOperator, v: Option<&Potential>) -> Result<Vec<f64>> {
    if op.mask().is_empty() && v.is_none() {
        // the constant is exactly optimal; start there
        let free = op.free_dofs();
        if free.is_empty() {
            return Err(Error::EmptyRegion);
        }
        let mut u = vec![0.0; op.ndofs()];
        for d in free {
            u[d] = 1.0;
        }
        return Ok(u);
    }
    let op2 = crate::kernel::assemble_kernel(op.mesh(), op.mask(), op.s, 2.0)?;
    let warm = inverse_power(&op2, v, &SolveOpts::default())?;
    // both operators index dofs by the same sorted node set
    Ok(warm.u)
}

/// Projected gradient descent on the Rayleigh quotient for general p.
fn descent(
    op: &KernelOperator,
    v: Option<&Potential>,
    opts: &SolveOpts,
    init: &[f64],
) -> Result<EigenResult> {
    let p = op.p;
    let free = op.free_dofs();
    if free.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let constrained: Vec<bool> = (0..op.ndofs()).map(|d| op.is_constrained(d)).collect();

    let numer = |u: &[f64]| -> Result<f64> {
        let mut n = op.k_const * op.seminorm(u)?;
        if let Some(pot) = v {
            n += op.omega_form(u, Some(pot), |t| t.abs().powf(p));
        }
        Ok(n)
    };

    let mut u = init.to_vec();
    for (d, &c) in constrained.iter().enumerate() {
        if c {
            u[d] = 0.0;
        }
    }
    let norm = op.lp_norm_p(&u);
    if norm <= 0.0 {
        return Err(Error::ZeroDenominator);
    }
    let scale = norm.powf(1.0 / p);
    u.iter_mut().for_each(|x| *x /= scale);

    let mut lambda = numer(&u)?;
    let mut window: Vec<f64> = vec![lambda];
    let window_len = 25;
    let mut step = 1.0;
    let mut iterations = 0;
    let mut converged = false;

    for it in 1..=opts.max_iter {
        iterations = it;
        // gradient of R at the normalized point: N'(u) - lambda D'(u)
        let (sem, sem_grad) = op.seminorm_grad(&u)?;
        let mut n_val = op.k_const * sem;
        let mut grad: Vec<f64> = sem_grad.iter().map(|g| op.k_const * g).collect();
        if let Some(pot) = v {
            n_val += op.omega_form(&u, Some(pot), |t| t.abs().powf(p));
            let gv = op.omega_form_grad(&u, Some(pot), |t| sgn_pow(t, p - 1.0));
            for (g, x) in grad.iter_mut().zip(gv) {
                *g += p * x;
            }
        }
        lambda = n_val;
        let gd = op.omega_form_grad(&u, None, |t| sgn_pow(t, p - 1.0));
        for (d, g) in grad.iter_mut().enumerate() {
            *g -= lambda * p * gd[d];
            if constrained[d] {
                *g = 0.0;
            }
        }
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        if gnorm2.sqrt() <= 1e-16 * lambda.abs().max(1.0) {
            converged = true;
            break;
        }

        // Armijo backtracking on the normalized quotient
        let mut t = step;
        let mut accepted = false;
        for _ in 0..50 {
            let mut trial: Vec<f64> = u
                .iter()
                .zip(&grad)
                .map(|(&x, &g)| x - t * g)
                .collect();
            let dn = op.lp_norm_p(&trial);
            if dn > 0.0 {
                let sc = dn.powf(1.0 / p);
                trial.iter_mut().for_each(|x| *x /= sc);
                let trial_lambda = numer(&trial)?;
                if trial_lambda <= lambda - 1e-4 * t * gnorm2 {
                    u = trial;
                    lambda = trial_lambda;
                    step = (t * 2.0).min(1e3);
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        window.push(lambda);
        if window.len() > window_len {
            window.remove(0);
            let spread = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - window.iter().cloned().fold(f64::INFINITY, f64::min);
            if spread <= opts.tol * lambda.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !accepted {
            // no descent direction at line-search resolution: stationary
            converged = true;
            break;
        }
    }
    finalize(op, v, u, lambda, iterations, converged)
}

#[inline]
fn sgn_pow(d: f64, e: f64) -> f64 {
    if d == 0.0 {
        0.0
    } else {
        d.abs().powf(e) * d.signum()
    }
}

/// Best of the warm start plus `restarts` random initializations.
/// Returns the best result and the spread (max - min) of the final values.
pub fn first_eigenpair_with_restarts(
    op: &KernelOperator,
    v: Option<&Potential>,
    opts: &SolveOpts,
    restarts: usize,
    seed: u64,
) -> Result<(EigenResult, f64)> {
    if op.p == 2.0 {
        let r = inverse_power(op, v, opts)?;
        return Ok((r, 0.0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<EigenResult> = None;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let warm = descent_init(op, v)?;
    for trial in 0..=restarts {
        let init: Vec<f64> = if trial == 0 {
            warm.clone()
        } else {
            (0..op.ndofs()).map(|_| rng.random_range(-1.0..1.0)).collect()
        };
        let r = descent(op, v, opts, &init)?;
        lo = lo.min(r.lambda);
        hi = hi.max(r.lambda);
        if best.as_ref().map(|b| r.lambda < b.lambda).unwrap_or(true) {
            best = Some(r);
        }
    }
    Ok((best.unwrap(), hi - lo))
}

/// Lower bound K d^{-(n+sp)} |D| with d the sup distance between Omega
/// and the Dirichlet set.
pub fn poincare_lower_bound(mesh: &Mesh, mask: &SetMask, s: f64, p: f64) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::EmptyDirichletSet);
    }
    let k = normalization_k(mesh.dim, s, p)?;
    let d = sup_distance(mesh, RegionRef::Omega, RegionRef::Mask(mask))?;
    let exponent = mesh.dim as f64 + s * p;
    Ok(k * d.powf(-exponent) * mask.measure())
}

/// Mask-independent variant: d_R = sup |x - y| over x in Omega, |y| = R,
/// with an extra factor 1/2. Valid for any admissible set of the same
/// measure inside B_R.
pub fn poincare_lower_bound_truncated(mesh: &Mesh, alpha: f64, s: f64, p: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParams(format!("alpha must be positive, got {alpha}")));
    }
    let k = normalization_k(mesh.dim, s, p)?;
    // sup over Omega of |x| + R
    let mut xmax = 0.0f64;
    for c in mesh.omega_cells() {
        for pos in mesh.cell_corner_positions(c) {
            xmax = xmax.max((pos[0] * pos[0] + pos[1] * pos[1]).sqrt());
        }
    }
    let d_r = xmax + mesh.r;
    let exponent = mesh.dim as f64 + s * p;
    Ok(k * d_r.powf(-exponent) * alpha / 2.0)
}

// ---------------- local (s -> 1) reference problems ----------------

/// Boundary condition for the local 1D reference problem on (0, 1).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalBc {
    Dirichlet,
    Neumann,
    /// Dirichlet at x = 1, natural at x = 0
    DirichletAtOne,
    /// Dirichlet at x = 0, natural at x = 1
    DirichletAtZero,
}

/// Closed-form first eigenvalue of the local problem for p = 2, no potential.
pub fn local_closed_form(bc: LocalBc) -> f64 {
    let pi = std::f64::consts::PI;
    match bc {
        LocalBc::Dirichlet => pi * pi,
        LocalBc::Neumann => 0.0,
        LocalBc::DirichletAtOne | LocalBc::DirichletAtZero => pi * pi / 4.0,
    }
}

/// First eigenvalue of -(|u'|^{p-2} u')' + V |u|^{p-2} u on (0, 1) with the
/// given boundary condition and constant potential, by P1 finite elements.
pub fn local_reference(p: f64, bc: LocalBc, v: Option<f64>, h: f64) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidParams(format!("p must be in (1,inf), got {p}")));
    }
    if !(h > 0.0 && h < 0.5) {
        return Err(Error::InvalidParams(format!("h must be in (0, 0.5), got {h}")));
    }
    if let Some(c) = v {
        if !(c > 0.0) {
            return Err(Error::InvalidParams(format!(
                "constant potential must be positive, got {c}"
            )));
        }
    }
    let m = (1.0 / h).round() as usize;
    let h = 1.0 / m as f64;
    let keep: Vec<usize> = (0..=m)
        .filter(|&i| match bc {
            LocalBc::Dirichlet => i != 0 && i != m,
            LocalBc::Neumann => true,
            LocalBc::DirichletAtOne => i != m,
            LocalBc::DirichletAtZero => i != 0,
        })
        .collect();
    if p == 2.0 {
        local_p2(m, h, &keep, v)
    } else {
        local_descent(m, h, &keep, p, v)
    }
}

/// Tridiagonal inverse power iteration for the p = 2 local problem.
fn local_p2(m: usize, h: f64, keep: &[usize], v: Option<f64>) -> Result<f64> {
    let c = v.unwrap_or(0.0);
    let nf = keep.len();
    // A = stiffness + c * mass, M = mass, both tridiagonal on kept nodes
    // (kept nodes are contiguous, so neighbor structure is preserved)
    let lumped = |i: usize| if i == 0 || i == m { h / 2.0 } else { h };
    let mut a_diag = vec![0.0; nf];
    let mut a_off = vec![0.0; nf.saturating_sub(1)];
    let mut m_diag = vec![0.0; nf];
    let mut m_off = vec![0.0; nf.saturating_sub(1)];
    for (r, &i) in keep.iter().enumerate() {
        let consistent = if i == 0 || i == m { 2.0 * h / 6.0 } else { 4.0 * h / 6.0 };
        let _ = lumped;
        a_diag[r] = (if i == 0 || i == m { 1.0 } else { 2.0 }) / h + c * consistent;
        m_diag[r] = consistent;
        if r + 1 < nf && keep[r + 1] == i + 1 {
            a_off[r] = -1.0 / h + c * h / 6.0;
            m_off[r] = h / 6.0;
        }
    }
    // inverse power with shift +1 via Thomas factorization of A + M
    let sd: Vec<f64> = a_diag.iter().zip(&m_diag).map(|(a, m)| a + m).collect();
    let so: Vec<f64> = a_off.iter().zip(&m_off).map(|(a, m)| a + m).collect();
    let tri_solve = |rhs: &[f64]| -> Vec<f64> {
        let n = rhs.len();
        let mut cp = vec![0.0; n];
        let mut dp = vec![0.0; n];
        cp[0] = so.first().copied().unwrap_or(0.0) / sd[0];
        dp[0] = rhs[0] / sd[0];
        for i in 1..n {
            let den = sd[i] - so[i - 1] * cp[i - 1];
            cp[i] = if i < n - 1 { so[i] / den } else { 0.0 };
            dp[i] = (rhs[i] - so[i - 1] * dp[i - 1]) / den;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = dp[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = dp[i] - cp[i] * x[i + 1];
        }
        x
    };
    let tri_apply = |d: &[f64], o: &[f64], x: &[f64]| -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut y = d[i] * x[i];
                if i > 0 {
                    y += o[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += o[i] * x[i + 1];
                }
                y
            })
            .collect()
    };
    let mut x = vec![1.0 / (nf as f64).sqrt(); nf];
    let mut lambda = f64::INFINITY;
    for _ in 0..10_000 {
        let y = tri_solve(&tri_apply(&m_diag, &m_off, &x));
        let my = tri_apply(&m_diag, &m_off, &y);
        let mnorm: f64 = y.iter().zip(&my).map(|(a, b)| a * b).sum::<f64>();
        let mnorm = mnorm.sqrt();
        let y: Vec<f64> = y.iter().map(|t| t / mnorm).collect();
        // sign-insensitive vector change: the eigenvalue is quadratically
        // more accurate than the iterate, so drive the iterate down
        let dp: f64 = y.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let dm: f64 = y.iter().zip(&x).map(|(a, b)| (a + b).powi(2)).sum::<f64>().sqrt();
        x = y;
        // element-wise energy form: immune to the cancellation the row-wise
        // quadratic form suffers for near-constant iterates
        let mut energy = 0.0;
        for w in x.windows(2) {
            energy += (w[1] - w[0]).powi(2) / h;
        }
        // boundary terms of constrained nodes (value 0 outside `keep`)
        if keep[0] != 0 {
            energy += x[0].powi(2) / h;
        }
        if keep[nf - 1] != m {
            energy += x[nf - 1].powi(2) / h;
        }
        let mx = tri_apply(&m_diag, &m_off, &x);
        let xmx: f64 = x.iter().zip(&mx).map(|(a, b)| a * b).sum();
        lambda = energy + c * xmx;
        if dp.min(dm) <= 1e-13 {
            return Ok(lambda);
        }
    }
    Ok(lambda)
}

/// Descent for the general-p local quotient
/// (∫ |u'|^p + c ∫ |u|^p) / ∫ |u|^p with P1 elements.
fn local_descent(m: usize, h: f64, keep: &[usize], p: f64, v: Option<f64>) -> Result<f64> {
    let c = v.unwrap_or(0.0);
    let gauss = crate::quad::gauss_01(6);
    let kept = {
        let mut flag = vec![false; m + 1];
        for &i in keep {
            flag[i] = true;
        }
        flag
    };
    let grad_energy = |u: &[f64]| -> (f64, f64, Vec<f64>, Vec<f64>) {
        // returns (N, D, grad N, grad D)
        let mut n_val = 0.0;
        let mut d_val = 0.0;
        let mut gn = vec![0.0; m + 1];
        let mut gd = vec![0.0; m + 1];
        for e in 0..m {
            let du = (u[e + 1] - u[e]) / h;
            n_val += du.abs().powf(p) * h;
            let t = p * sgn_pow(du, p - 1.0);
            gn[e + 1] += t;
            gn[e] -= t;
            for &(x, w) in gauss {
                let uu = u[e] * (1.0 - x) + u[e + 1] * x;
                let val = uu.abs().powf(p);
                n_val += w * h * c * val;
                d_val += w * h * val;
                let t = p * sgn_pow(uu, p - 1.0) * w * h;
                gn[e] += c * t * (1.0 - x);
                gn[e + 1] += c * t * x;
                gd[e] += t * (1.0 - x);
                gd[e + 1] += t * x;
            }
        }
        (n_val, d_val, gn, gd)
    };
    let mut u: Vec<f64> = (0..=m)
        .map(|i| if kept[i] { 1.0 + (i as f64 * h * std::f64::consts::PI).sin() } else { 0.0 })
        .collect();
    let mut lambda = f64::INFINITY;
    let mut step = 1.0;
    for _ in 0..20_000 {
        let (n_val, d_val, gn, gd) = grad_energy(&u);
        if d_val <= 0.0 {
            return Err(Error::ZeroDenominator);
        }
        let lam = n_val / d_val;
        let grad: Vec<f64> = (0..=m)
            .map(|i| {
                if kept[i] {
                    (gn[i] - lam * gd[i]) / d_val
                } else {
                    0.0
                }
            })
            .collect();
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        if (lambda - lam).abs() <= 1e-11 * lam.abs().max(1.0) || gnorm2.sqrt() < 1e-14 {
            return Ok(lam);
        }
        lambda = lam;
        let mut t = step;
        let mut ok = false;
        for _ in 0..60 {
            let trial: Vec<f64> = u.iter().zip(&grad).map(|(&x, &g)| x - t * g).collect();
            let (tn, td, _, _) = grad_energy(&trial);
            if td > 0.0 && tn / td <= lam - 1e-4 * t * gnorm2 {
                u = trial;
                step = (t * 2.0).min(1e4);
                ok = true;
                break;
            }
            t *= 0.5;
        }
        if !ok {
            return Ok(lam);
        }
    }
    Ok(lambda)
}
