//! Discretized geometry: the domain, the exterior candidate region inside
//! the truncation ball, and cell-union Dirichlet sets.
//!
//! All sets are unions of uniform grid cells, so measures are exact cell
//! multiples and the measure constraint is quantized to one cell volume.

use crate::error::{Error, Result};

/// Problem parameters shared by every computation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Params {
    /// spatial dimension, 1 or 2
    pub n: usize,
    /// fractional order, in (0, 1)
    pub s: f64,
    /// integrability exponent, in (1, inf)
    pub p: f64,
    /// prescribed Dirichlet measure
    pub alpha: f64,
    /// truncation radius for the candidate region
    pub r: f64,
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        if self.n != 1 && self.n != 2 {
            return Err(Error::InvalidParams(format!("n must be 1 or 2, got {}", self.n)));
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::InvalidParams(format!("s must be in (0,1), got {}", self.s)));
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(Error::InvalidParams(format!("p must be in (1,inf), got {}", self.p)));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidParams(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.r > 0.0) {
            return Err(Error::InvalidParams(format!("R must be positive, got {}", self.r)));
        }
        Ok(())
    }

    /// Kernel exponent n + s p.
    pub fn kernel_exponent(&self) -> f64 {
        self.n as f64 + self.s * self.p
    }
}

/// Description of the domain Omega.
#[derive(Clone, Debug)]
pub enum DomainSpec {
    /// open interval (a, b) on the line
    Interval { a: f64, b: f64 },
    /// open disk of given radius centered at the origin
    Disk { radius: f64 },
    /// simple polygon, vertices in order
    Polygon { vertices: Vec<[f64; 2]> },
}

impl DomainSpec {
    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        match self {
            DomainSpec::Interval { a, b } => x[0] > *a && x[0] < *b,
            DomainSpec::Disk { radius } => x[0] * x[0] + x[1] * x[1] < radius * radius,
            DomainSpec::Polygon { vertices } => point_in_polygon(x, vertices),
        }
    }

    /// Farthest point of Omega from the origin; used to check Omega fits in B_R.
    fn max_norm(&self) -> f64 {
        match self {
            DomainSpec::Interval { a, b } => a.abs().max(b.abs()),
            DomainSpec::Disk { radius } => *radius,
            DomainSpec::Polygon { vertices } => vertices
                .iter()
                .map(|v| (v[0] * v[0] + v[1] * v[1]).sqrt())
                .fold(0.0, f64::max),
        }
    }

    /// Lower bound on the inradius where analytically available.
    fn inradius(&self) -> Option<f64> {
        match self {
            DomainSpec::Interval { a, b } => Some((b - a) / 2.0),
            DomainSpec::Disk { radius } => Some(*radius),
            DomainSpec::Polygon { .. } => None,
        }
    }
}

fn point_in_polygon(x: [f64; 2], vs: &[[f64; 2]]) -> bool {
    // even-odd ray casting
    let mut inside = false;
    let m = vs.len();
    for i in 0..m {
        let (p, q) = (vs[i], vs[(i + 1) % m]);
        if (p[1] > x[1]) != (q[1] > x[1]) {
            let t = (x[1] - p[1]) / (q[1] - p[1]);
            if x[0] < p[0] + t * (q[0] - p[0]) {
                inside = !inside;
            }
        }
    }
    inside
}

/// Region label of a grid cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Omega,
    Candidate,
    Exterior,
}

/// Uniform grid over a box covering B_R(0), with region labels per cell.
///
/// Cells are classified by their center: inside Omega, inside B_R but not
/// Omega (candidate), or outside B_R (exterior).
#[derive(Clone, Debug)]
pub struct Mesh {
    pub dim: usize,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub origin: [f64; 2],
    pub r: f64,
    labels: Vec<Region>,
    cell_volume: f64,
    domain: DomainSpec,
}

impl Mesh {
    pub fn ncells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn label(&self, c: usize) -> Region {
        self.labels[c]
    }

    pub fn cell_coords(&self, c: usize) -> (usize, usize) {
        (c % self.nx, c / self.nx)
    }

    pub fn cell_center(&self, c: usize) -> [f64; 2] {
        let (i, j) = self.cell_coords(c);
        if self.dim == 1 {
            [self.origin[0] + (i as f64 + 0.5) * self.h, 0.0]
        } else {
            [
                self.origin[0] + (i as f64 + 0.5) * self.h,
                self.origin[1] + (j as f64 + 0.5) * self.h,
            ]
        }
    }

    /// Lower corner of a cell.
    pub fn cell_corner(&self, c: usize) -> [f64; 2] {
        let (i, j) = self.cell_coords(c);
        if self.dim == 1 {
            [self.origin[0] + i as f64 * self.h, 0.0]
        } else {
            [
                self.origin[0] + i as f64 * self.h,
                self.origin[1] + j as f64 * self.h,
            ]
        }
    }

    pub fn cell_diameter(&self) -> f64 {
        self.h * (self.dim as f64).sqrt()
    }

    pub fn omega_cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.ncells()).filter(|&c| self.labels[c] == Region::Omega)
    }

    pub fn candidate_cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.ncells()).filter(|&c| self.labels[c] == Region::Candidate)
    }

    pub fn omega_measure(&self) -> f64 {
        self.omega_cells().count() as f64 * self.cell_volume
    }

    pub fn candidate_measure(&self) -> f64 {
        self.candidate_cells().count() as f64 * self.cell_volume
    }

    // --- nodes (P1/Q1 vertices) ---

    pub fn nnodes(&self) -> usize {
        if self.dim == 1 {
            self.nx + 1
        } else {
            (self.nx + 1) * (self.ny + 1)
        }
    }

    pub fn node_pos(&self, id: usize) -> [f64; 2] {
        if self.dim == 1 {
            [self.origin[0] + id as f64 * self.h, 0.0]
        } else {
            let i = id % (self.nx + 1);
            let j = id / (self.nx + 1);
            [
                self.origin[0] + i as f64 * self.h,
                self.origin[1] + j as f64 * self.h,
            ]
        }
    }

    /// Node ids of a cell: 2 in 1D, 4 in 2D (counterclockwise from lower-left).
    pub fn cell_nodes(&self, c: usize) -> Vec<usize> {
        let (i, j) = self.cell_coords(c);
        if self.dim == 1 {
            vec![i, i + 1]
        } else {
            let w = self.nx + 1;
            vec![j * w + i, j * w + i + 1, (j + 1) * w + i, (j + 1) * w + i + 1]
        }
    }

    /// Corner positions of a cell (2 in 1D, 4 in 2D).
    pub fn cell_corner_positions(&self, c: usize) -> Vec<[f64; 2]> {
        self.cell_nodes(c).iter().map(|&n| self.node_pos(n)).collect()
    }
}

/// Builds a uniform mesh whose box covers B_R(0), labeling cells by region.
pub fn build_mesh(domain: &DomainSpec, params: &Params, h: f64) -> Result<Mesh> {
    params.validate()?;
    if !(h > 0.0) {
        return Err(Error::InvalidParams(format!("h must be positive, got {h}")));
    }
    if domain.dim() != params.n {
        return Err(Error::InconsistentGeometry(format!(
            "domain dimension {} does not match params.n = {}",
            domain.dim(),
            params.n
        )));
    }
    if domain.max_norm() >= params.r {
        return Err(Error::InconsistentGeometry(
            "Omega is not contained in B_R".into(),
        ));
    }
    if let Some(rho) = domain.inradius() {
        if h > rho {
            return Err(Error::MeshTooCoarse);
        }
    }

    let half = (params.r / h).ceil() as usize;
    let nx = 2 * half;
    let ny = if params.n == 1 { 1 } else { nx };
    let origin = if params.n == 1 {
        [-(half as f64) * h, 0.0]
    } else {
        [-(half as f64) * h, -(half as f64) * h]
    };
    let cell_volume = h.powi(params.n as i32);

    let mut mesh = Mesh {
        dim: params.n,
        h,
        nx,
        ny,
        origin,
        r: params.r,
        labels: vec![Region::Exterior; nx * ny],
        cell_volume,
        domain: domain.clone(),
    };
    for c in 0..mesh.ncells() {
        let ctr = mesh.cell_center(c);
        let label = if domain.contains(ctr) {
            Region::Omega
        } else {
            let norm2 = ctr[0] * ctr[0] + ctr[1] * ctr[1];
            if norm2 < params.r * params.r {
                Region::Candidate
            } else {
                Region::Exterior
            }
        };
        mesh.labels[c] = label;
    }
    if mesh.omega_cells().next().is_none() {
        return Err(Error::MeshTooCoarse);
    }
    Ok(mesh)
}

/// Indicator over candidate cells with cached measure.
#[derive(Clone, Debug, PartialEq)]
pub struct SetMask {
    selected: Vec<bool>,
    count: usize,
    measure: f64,
}

impl SetMask {
    pub fn empty(mesh: &Mesh) -> Self {
        SetMask {
            selected: vec![false; mesh.ncells()],
            count: 0,
            measure: 0.0,
        }
    }

    /// Selects the given cells; every cell must carry the Candidate label.
    pub fn from_cells<I: IntoIterator<Item = usize>>(mesh: &Mesh, cells: I) -> Result<Self> {
        let mut mask = SetMask::empty(mesh);
        for c in cells {
            if c >= mesh.ncells() {
                return Err(Error::OutOfRange);
            }
            if mesh.label(c) != Region::Candidate {
                return Err(Error::InconsistentGeometry(format!(
                    "cell {c} is not a candidate cell"
                )));
            }
            if !mask.selected[c] {
                mask.selected[c] = true;
                mask.count += 1;
            }
        }
        mask.measure = mask.count as f64 * mesh.cell_volume();
        Ok(mask)
    }

    /// Selects the candidate cells whose centers satisfy the predicate.
    pub fn from_predicate<F: Fn([f64; 2]) -> bool>(mesh: &Mesh, pred: F) -> Result<Self> {
        let cells: Vec<usize> = mesh
            .candidate_cells()
            .filter(|&c| pred(mesh.cell_center(c)))
            .collect();
        SetMask::from_cells(mesh, cells)
    }

    /// All candidate cells: the discrete stand-in for the full exterior in B_R.
    pub fn full_candidate(mesh: &Mesh) -> Self {
        SetMask::from_cells(mesh, mesh.candidate_cells()).expect("candidate cells are candidates")
    }

    pub fn measure(&self) -> f64 {
        self.measure
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn is_selected(&self, c: usize) -> bool {
        self.selected[c]
    }

    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.selected
            .iter()
            .enumerate()
            .filter_map(|(c, &s)| if s { Some(c) } else { None })
    }

    pub fn is_subset_of(&self, other: &SetMask) -> bool {
        self.selected
            .iter()
            .zip(&other.selected)
            .all(|(&a, &b)| !a || b)
    }

    /// FNV-1a over selected cell indices; stable across runs of one build.
    pub fn fingerprint(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for c in self.cells() {
            for byte in (c as u64).to_le_bytes() {
                hash ^= byte as u64;
                hash = hash.wrapping_mul(0x1000_0000_01b3);
            }
        }
        hash
    }
}

/// One side of a distance computation: Omega or a Dirichlet mask.
#[derive(Clone, Copy)]
pub enum RegionRef<'a> {
    Omega,
    Mask(&'a SetMask),
}

fn region_corner_nodes(mesh: &Mesh, r: RegionRef<'_>) -> Vec<usize> {
    let mut nodes: Vec<usize> = match r {
        RegionRef::Omega => mesh.omega_cells().flat_map(|c| mesh.cell_nodes(c)).collect(),
        RegionRef::Mask(m) => m.cells().flat_map(|c| mesh.cell_nodes(c)).collect(),
    };
    nodes.sort_unstable();
    nodes.dedup();
    nodes
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// sup over cell-vertex pairs of |x - y|; within one cell diameter of the
/// continuum sup distance.
pub fn sup_distance(mesh: &Mesh, a: RegionRef<'_>, b: RegionRef<'_>) -> Result<f64> {
    let na = region_corner_nodes(mesh, a);
    let nb = region_corner_nodes(mesh, b);
    if na.is_empty() || nb.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let pb: Vec<[f64; 2]> = nb.iter().map(|&n| mesh.node_pos(n)).collect();
    let mut best = 0.0f64;
    for &n in &na {
        let x = mesh.node_pos(n);
        for y in &pb {
            best = best.max(dist(x, *y));
        }
    }
    Ok(best)
}

/// inf over cell-vertex pairs of |x - y|; zero for overlapping regions.
pub fn inf_distance(mesh: &Mesh, a: RegionRef<'_>, b: RegionRef<'_>) -> Result<f64> {
    let na = region_corner_nodes(mesh, a);
    let nb = region_corner_nodes(mesh, b);
    if na.is_empty() || nb.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let pb: Vec<[f64; 2]> = nb.iter().map(|&n| mesh.node_pos(n)).collect();
    let mut best = f64::INFINITY;
    for &n in &na {
        let x = mesh.node_pos(n);
        for y in &pb {
            best = best.min(dist(x, *y));
        }
    }
    Ok(best)
}

/// Distance from a point to the nearest Omega cell corner.
pub fn distance_to_omega(mesh: &Mesh, x: [f64; 2]) -> f64 {
    let mut best = f64::INFINITY;
    for c in mesh.omega_cells() {
        for p in mesh.cell_corner_positions(c) {
            best = best.min(dist(x, p));
        }
    }
    best
}

fn cell_quota(mesh: &Mesh, alpha: f64) -> usize {
    (alpha / mesh.cell_volume()).round().max(1.0) as usize
}

/// Collar of candidate cells hugging the boundary of Omega, with measure
/// within one cell volume of alpha. Equivalent to bisecting the fattening
/// radius: cells are taken in order of distance to Omega.
pub fn fattened_annulus(mesh: &Mesh, alpha: f64) -> Result<SetMask> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParams(format!("alpha must be positive, got {alpha}")));
    }
    let mut cells: Vec<(f64, usize)> = mesh
        .candidate_cells()
        .map(|c| (distance_to_omega(mesh, mesh.cell_center(c)), c))
        .collect();
    let k = cell_quota(mesh, alpha);
    if k > cells.len() {
        return Err(Error::AlphaTooLarge);
    }
    cells.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    SetMask::from_cells(mesh, cells.into_iter().take(k).map(|(_, c)| c))
}

/// Mask of cells whose centers lie in the ball B_r(k e_1).
pub fn translated_ball(mesh: &Mesh, radius: f64, offset: f64) -> Result<SetMask> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParams(format!("radius must be positive, got {radius}")));
    }
    let center = [offset, 0.0];
    // ball must fit inside the meshed box
    let lo = mesh.origin;
    let hi = [
        mesh.origin[0] + mesh.nx as f64 * mesh.h,
        mesh.origin[1] + mesh.ny as f64 * mesh.h,
    ];
    let inside_box = if mesh.dim == 1 {
        offset - radius >= lo[0] && offset + radius <= hi[0]
    } else {
        offset - radius >= lo[0]
            && offset + radius <= hi[0]
            && -radius >= lo[1]
            && radius <= hi[1]
    };
    if !inside_box {
        return Err(Error::OutOfRange);
    }
    let mut cells = Vec::new();
    for c in 0..mesh.ncells() {
        if dist(mesh.cell_center(c), center) < radius {
            match mesh.label(c) {
                Region::Omega => return Err(Error::BallOverlapsOmega),
                Region::Exterior => return Err(Error::OutOfRange),
                Region::Candidate => cells.push(c),
            }
        }
    }
    SetMask::from_cells(mesh, cells)
}
