//! Gauss-Legendre rules and element-pair quadrature point sets.
//!
//! Pair rules are expressed in reference coordinates of the two unit cells.
//! The kernel factor is evaluated at physical points by the caller, so the
//! same rule serves any cell pair with the given integer offset. Pairs that
//! touch get geometrically graded subdivisions toward the shared facet.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_01(n: usize) -> &'static [(f64, f64)] {
    static CACHE: OnceLock<Mutex<HashMap<usize, &'static [(f64, f64)]>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry(n).or_insert_with(|| {
        let pts = compute_gauss(n)
            .into_iter()
            .map(|(x, w)| ((x + 1.0) / 2.0, w / 2.0))
            .collect::<Vec<_>>();
        Box::leak(pts.into_boxed_slice())
    })
}

/// Nodes and weights on [-1, 1] by Newton iteration on Legendre polynomials.
fn compute_gauss(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    for i in 1..=n {
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (pn, dpn) = legendre(n, x);
            let dx = pn / dpn;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dpn) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dpn * dpn);
        out.push((-x, w)); // ascending order
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// One quadrature point for a cell pair, in per-cell reference coordinates.
#[derive(Clone, Copy, Debug)]
pub struct PairPoint {
    pub xi: [f64; 2],
    pub eta: [f64; 2],
    pub w: f64,
}

/// How quadrature points are laid out along one reference axis of one cell.
#[derive(Clone, Copy)]
enum Axis {
    Gauss(usize),
    /// uniform subdivision into `k` pieces, Gauss of given order on each
    Subdiv(usize, usize),
    /// geometric grading toward 0 with given depth, Gauss order per piece
    Toward0(usize, usize),
    Toward1(usize, usize),
}

fn axis_points(a: Axis) -> Vec<(f64, f64)> {
    match a {
        Axis::Gauss(n) => gauss_01(n).to_vec(),
        Axis::Subdiv(k, n) => {
            let mut pts = Vec::new();
            for j in 0..k {
                let a = j as f64 / k as f64;
                let b = (j + 1) as f64 / k as f64;
                for &(x, w) in gauss_01(n) {
                    pts.push((a + (b - a) * x, w * (b - a)));
                }
            }
            pts
        }
        Axis::Toward0(depth, n) => axis_points(Axis::Toward1(depth, n))
            .into_iter()
            .map(|(x, w)| (1.0 - x, w))
            .collect(),
        Axis::Toward1(depth, n) => {
            // breakpoints 0, 1/2, 3/4, ..., 1 - 2^-depth, 1
            let mut breaks = vec![0.0];
            for j in 1..=depth {
                breaks.push(1.0 - 0.5f64.powi(j as i32));
            }
            breaks.push(1.0);
            let mut pts = Vec::new();
            for win in breaks.windows(2) {
                let (a, b) = (win[0], win[1]);
                for &(x, w) in gauss_01(n) {
                    pts.push((a + (b - a) * x, w * (b - a)));
                }
            }
            pts
        }
    }
}

fn tensor(dim: usize, xi_axes: &[Axis], eta_axes: &[Axis]) -> Vec<PairPoint> {
    let xi_pts: Vec<Vec<(f64, f64)>> = xi_axes.iter().map(|&a| axis_points(a)).collect();
    let eta_pts: Vec<Vec<(f64, f64)>> = eta_axes.iter().map(|&a| axis_points(a)).collect();
    let mut out = Vec::new();
    if dim == 1 {
        for &(x0, w0) in &xi_pts[0] {
            for &(y0, v0) in &eta_pts[0] {
                out.push(PairPoint {
                    xi: [x0, 0.0],
                    eta: [y0, 0.0],
                    w: w0 * v0,
                });
            }
        }
    } else {
        for &(x0, w0) in &xi_pts[0] {
            for &(x1, w1) in &xi_pts[1] {
                for &(y0, v0) in &eta_pts[0] {
                    for &(y1, v1) in &eta_pts[1] {
                        out.push(PairPoint {
                            xi: [x0, x1],
                            eta: [y0, y1],
                            w: w0 * w1 * v0 * v1,
                        });
                    }
                }
            }
        }
    }
    out
}

/// Precomputed pair rules for a mesh dimension and grading depth.
pub struct RuleSet {
    dim: usize,
    touching_1d: Vec<PairPoint>,
    near_1d: Vec<PairPoint>,
    far_1d: Vec<PairPoint>,
    same_2d: Vec<PairPoint>,
    touching_2d: HashMap<(i32, i32), Vec<PairPoint>>,
    near_2d: Vec<PairPoint>,
    far_2d: Vec<PairPoint>,
}

impl RuleSet {
    pub fn new(dim: usize, grading_depth: usize) -> Self {
        let d = grading_depth;
        let (mut touching_1d, mut near_1d, mut far_1d) = (Vec::new(), Vec::new(), Vec::new());
        let mut same_2d = Vec::new();
        let mut touching_2d = HashMap::new();
        let (mut near_2d, mut far_2d) = (Vec::new(), Vec::new());
        if dim == 1 {
            touching_1d = tensor(1, &[Axis::Toward1(d, 4)], &[Axis::Toward0(d, 4)]);
            near_1d = tensor(1, &[Axis::Subdiv(4, 6)], &[Axis::Subdiv(4, 6)]);
            far_1d = tensor(1, &[Axis::Gauss(6)], &[Axis::Gauss(6)]);
        } else {
            // Mismatched orders keep the two point clouds disjoint near the
            // diagonal; 2D is supported at smoke-test scale only.
            same_2d = tensor(
                2,
                &[Axis::Subdiv(2, 3), Axis::Subdiv(2, 3)],
                &[Axis::Subdiv(3, 3), Axis::Subdiv(3, 3)],
            );
            let td = d.min(3);
            for &(di, dj) in &[(1i32, 0i32), (0, 1), (1, 1), (-1, 1)] {
                let axis_for = |delta: i32, first: bool| match (delta, first) {
                    (1, true) => Axis::Toward1(td, 2),
                    (1, false) => Axis::Toward0(td, 2),
                    (-1, true) => Axis::Toward0(td, 2),
                    (-1, false) => Axis::Toward1(td, 2),
                    (_, true) => Axis::Gauss(3),
                    (_, false) => Axis::Gauss(4),
                };
                let pts = tensor(
                    2,
                    &[axis_for(di, true), axis_for(dj, true)],
                    &[axis_for(di, false), axis_for(dj, false)],
                );
                touching_2d.insert((di, dj), pts);
            }
            near_2d = tensor(
                2,
                &[Axis::Gauss(4), Axis::Gauss(4)],
                &[Axis::Gauss(4), Axis::Gauss(4)],
            );
            far_2d = tensor(
                2,
                &[Axis::Gauss(3), Axis::Gauss(3)],
                &[Axis::Gauss(3), Axis::Gauss(3)],
            );
        }
        RuleSet {
            dim,
            touching_1d,
            near_1d,
            far_1d,
            same_2d,
            touching_2d,
            near_2d,
            far_2d,
        }
    }

    /// Rule for a distinct cell pair with offset `off` = coords(b) - coords(a),
    /// where the pair is ordered by cell index (so off is lexicographically
    /// positive in (dj, di)).
    pub fn pair_points(&self, off: (i32, i32)) -> &[PairPoint] {
        if self.dim == 1 {
            match off.0 {
                1 => &self.touching_1d,
                2 => &self.near_1d,
                _ => &self.far_1d,
            }
        } else {
            let cheb = off.0.abs().max(off.1.abs());
            match cheb {
                1 => &self.touching_2d[&off],
                2 => &self.near_2d,
                _ => &self.far_2d,
            }
        }
    }

    /// Same-cell rule (2D only; the 1D same-cell integral is analytic).
    pub fn same_cell_points(&self) -> &[PairPoint] {
        &self.same_2d
    }
}
