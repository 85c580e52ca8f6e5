//! Domains, grids, and interior indexing.
//!
//! The state space is windowed to a closed box; a `Region` predicate carves
//! the open set `D` out of it. Grids are vertex lattices: axis `k` with `m`
//! cells has `m + 1` nodes at `lo + i*h`, `h = (hi - lo)/m`. A node is
//! *interior* when it lies strictly inside the box and inside the region;
//! everything else is exterior and absorbing. Deleting exterior nodes is what
//! realizes the killed (Dirichlet) semigroup on the grid: when the boundary
//! of `D` passes through lattice nodes the discrete boundary is exact.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("domain has no interior grid node")]
    EmptyInterior,
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// Membership predicate for the open set `D` inside the simulation box.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Region {
    /// `D` is the whole open box.
    All,
    /// Open sub-box.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Open ball.
    Ball { center: Vec<f64>, radius: f64 },
}

impl Region {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::All => true,
            Region::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(&xi, (&lo, &hi))| xi > lo && xi < hi),
            Region::Ball { center, radius } => {
                let r2: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(&xi, &ci)| (xi - ci) * (xi - ci))
                    .sum();
                r2 < radius * radius
            }
        }
    }
}

/// The open set `D` and the box that windows it.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    /// Per-axis closed bounds of the simulation box.
    pub bounds: Vec<(f64, f64)>,
    /// Predicate carving `D` out of the open box.
    #[serde(default = "default_region")]
    pub region: Region,
}

fn default_region() -> Region {
    Region::All
}

impl DomainSpec {
    pub fn interval(lo: f64, hi: f64) -> Self {
        DomainSpec { bounds: vec![(lo, hi)], region: Region::All }
    }

    pub fn boxed(bounds: Vec<(f64, f64)>) -> Self {
        DomainSpec { bounds, region: Region::All }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    /// Continuous membership test for `D` (open box intersected with the
    /// region predicate).
    pub fn contains(&self, x: &[f64]) -> bool {
        debug_assert_eq!(x.len(), self.bounds.len());
        x.iter()
            .zip(&self.bounds)
            .all(|(&xi, &(lo, hi))| xi > lo && xi < hi)
            && self.region.contains(x)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if self.bounds.is_empty() {
            return Err(GridError::InvalidDomain("zero-dimensional box".into()));
        }
        for &(lo, hi) in &self.bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(GridError::InvalidDomain(format!(
                    "bad axis bounds ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }

    pub fn diameter(&self) -> f64 {
        self.bounds
            .iter()
            .map(|&(lo, hi)| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt()
    }
}

/// Lattice resolution: cells per axis.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub cells_per_axis: Vec<usize>,
}

impl GridSpec {
    pub fn new(cells_per_axis: Vec<usize>) -> Self {
        GridSpec { cells_per_axis }
    }
}

const EXTERIOR: usize = usize::MAX;

/// A realized vertex lattice over a domain, with dense indexing of the
/// interior nodes.
///
/// `interior_index` is a bijection from interior nodes onto `0..n_interior`;
/// all operator and measure vectors in this crate are aligned with it.
#[derive(Debug, Clone)]
pub struct Grid {
    pub domain: DomainSpec,
    pub cells: Vec<usize>,
    /// Per-axis node spacing `h`.
    pub spacing: Vec<f64>,
    nodes_per_axis: Vec<usize>,
    strides: Vec<usize>,
    n_nodes: usize,
    /// flat node -> dense interior index (EXTERIOR sentinel otherwise)
    interior_of_flat: Vec<usize>,
    /// dense interior index -> flat node
    flat_of_interior: Vec<usize>,
}

impl Grid {
    pub fn build(domain: &DomainSpec, spec: &GridSpec) -> Result<Grid, GridError> {
        domain.validate()?;
        let dim = domain.dim();
        if spec.cells_per_axis.len() != dim {
            return Err(GridError::InvalidGrid(format!(
                "{} axes in grid spec, {} in domain",
                spec.cells_per_axis.len(),
                dim
            )));
        }
        if spec.cells_per_axis.iter().any(|&m| m < 2) {
            return Err(GridError::InvalidGrid("need at least 2 cells per axis".into()));
        }
        let spacing: Vec<f64> = domain
            .bounds
            .iter()
            .zip(&spec.cells_per_axis)
            .map(|(&(lo, hi), &m)| (hi - lo) / m as f64)
            .collect();
        let nodes_per_axis: Vec<usize> = spec.cells_per_axis.iter().map(|&m| m + 1).collect();
        let mut strides = vec![0usize; dim];
        let mut acc = 1usize;
        for k in (0..dim).rev() {
            strides[k] = acc;
            acc *= nodes_per_axis[k];
        }
        let n_nodes = acc;

        let mut grid = Grid {
            domain: domain.clone(),
            cells: spec.cells_per_axis.clone(),
            spacing,
            nodes_per_axis,
            strides,
            n_nodes,
            interior_of_flat: vec![EXTERIOR; n_nodes],
            flat_of_interior: Vec::new(),
        };
        let mut coord = vec![0.0; dim];
        for flat in 0..n_nodes {
            grid.node_coord_into(flat, &mut coord);
            if grid.domain.contains(&coord) {
                grid.interior_of_flat[flat] = grid.flat_of_interior.len();
                grid.flat_of_interior.push(flat);
            }
        }
        if grid.flat_of_interior.is_empty() {
            return Err(GridError::EmptyInterior);
        }
        Ok(grid)
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_interior(&self) -> usize {
        self.flat_of_interior.len()
    }

    pub fn interior_index(&self, flat: usize) -> Option<usize> {
        match self.interior_of_flat[flat] {
            EXTERIOR => None,
            k => Some(k),
        }
    }

    pub fn flat_of_interior(&self, interior: usize) -> usize {
        self.flat_of_interior[interior]
    }

    pub fn multi_of_flat(&self, flat: usize, out: &mut [usize]) {
        let mut rem = flat;
        for k in 0..self.dim() {
            out[k] = rem / self.strides[k];
            rem %= self.strides[k];
        }
    }

    /// Flat index of a multi-index offset by `off`; `None` when it leaves the
    /// lattice.
    pub fn offset_flat(&self, flat: usize, off: &[i64]) -> Option<usize> {
        let mut out = 0usize;
        let mut rem = flat;
        for k in 0..self.dim() {
            let i = (rem / self.strides[k]) as i64 + off[k];
            rem %= self.strides[k];
            if i < 0 || i >= self.nodes_per_axis[k] as i64 {
                return None;
            }
            out += i as usize * self.strides[k];
        }
        Some(out)
    }

    pub fn neighbor(&self, flat: usize, axis: usize, step: i64) -> Option<usize> {
        let i = (flat / self.strides[axis]) % self.nodes_per_axis[axis];
        let j = i as i64 + step;
        if j < 0 || j >= self.nodes_per_axis[axis] as i64 {
            None
        } else {
            Some((flat as i64 + step * self.strides[axis] as i64) as usize)
        }
    }

    pub fn node_coord_into(&self, flat: usize, out: &mut [f64]) {
        let mut rem = flat;
        for k in 0..self.dim() {
            let i = rem / self.strides[k];
            rem %= self.strides[k];
            out[k] = self.domain.bounds[k].0 + i as f64 * self.spacing[k];
        }
    }

    pub fn node_coord(&self, flat: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.node_coord_into(flat, &mut out);
        out
    }

    pub fn interior_coord(&self, interior: usize) -> Vec<f64> {
        self.node_coord(self.flat_of_interior[interior])
    }

    /// Samples `f` on the interior nodes in dense order.
    pub fn sample_interior(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let mut coord = vec![0.0; self.dim()];
        self.flat_of_interior
            .iter()
            .map(|&flat| {
                self.node_coord_into(flat, &mut coord);
                f(&coord)
            })
            .collect()
    }

    /// Nearest-node bin of a continuous position (the Voronoi cell of the
    /// lattice). `None` when outside the closed box.
    pub fn bin_flat(&self, x: &[f64]) -> Option<usize> {
        let mut flat = 0usize;
        for k in 0..self.dim() {
            let (lo, hi) = self.domain.bounds[k];
            if x[k] < lo || x[k] > hi {
                return None;
            }
            let mut i = ((x[k] - lo) / self.spacing[k]).round() as i64;
            i = i.clamp(0, self.nodes_per_axis[k] as i64 - 1);
            flat += i as usize * self.strides[k];
        }
        Some(flat)
    }

    /// Nearest *interior* bin: positions binning to an exterior node (within
    /// half a spacing of the discrete boundary) report `None`.
    pub fn bin_interior(&self, x: &[f64]) -> Option<usize> {
        self.bin_flat(x).and_then(|flat| self.interior_index(flat))
    }

    /// Interior node nearest to `x`, for clamped field lookups. Searches a
    /// small neighborhood of the binned node when the bin itself is exterior.
    pub fn nearest_interior(&self, x: &[f64]) -> Option<usize> {
        if let Some(k) = self.bin_interior(x) {
            return Some(k);
        }
        let flat = self.bin_flat(x)?;
        let dim = self.dim();
        let reach = 2i64;
        let width = (2 * reach + 1) as usize;
        let mut best: Option<(f64, usize)> = None;
        let mut coord = vec![0.0; dim];
        let mut off = vec![0i64; dim];
        for combo in 0..width.pow(dim as u32) {
            let mut rem = combo;
            for o in off.iter_mut() {
                *o = (rem % width) as i64 - reach;
                rem /= width;
            }
            let Some(nb) = self.offset_flat(flat, &off) else { continue };
            let Some(interior) = self.interior_index(nb) else { continue };
            self.node_coord_into(nb, &mut coord);
            let d2: f64 = coord.iter().zip(x).map(|(&a, &b)| (a - b) * (a - b)).sum();
            if best.map_or(true, |(bd, _)| d2 < bd) {
                best = Some((d2, interior));
            }
        }
        best.map(|(_, k)| k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_grid_interior_is_strict() {
        let d = DomainSpec::interval(0.0, std::f64::consts::PI);
        let g = Grid::build(&d, &GridSpec::new(vec![400])).unwrap();
        assert_eq!(g.n_nodes(), 401);
        // Endpoints sit on the boundary of the open interval: exterior.
        assert_eq!(g.n_interior(), 399);
        assert_eq!(g.interior_index(0), None);
        assert_eq!(g.interior_index(400), None);
        assert_eq!(g.interior_index(1), Some(0));
    }

    #[test]
    fn interior_index_is_bijective() {
        let d = DomainSpec {
            bounds: vec![(-1.0, 1.0), (-1.0, 1.0)],
            region: Region::Ball { center: vec![0.0, 0.0], radius: 0.8 },
        };
        let g = Grid::build(&d, &GridSpec::new(vec![20, 20])).unwrap();
        for k in 0..g.n_interior() {
            assert_eq!(g.interior_index(g.flat_of_interior(k)), Some(k));
        }
        let count = (0..g.n_nodes()).filter(|&f| g.interior_index(f).is_some()).count();
        assert_eq!(count, g.n_interior());
    }

    #[test]
    fn empty_interior_rejected() {
        let d = DomainSpec {
            bounds: vec![(0.0, 1.0)],
            region: Region::Ball { center: vec![10.0], radius: 0.1 },
        };
        assert!(matches!(
            Grid::build(&d, &GridSpec::new(vec![10])),
            Err(GridError::EmptyInterior)
        ));
    }

    #[test]
    fn binning_rounds_to_nearest_node() {
        let d = DomainSpec::interval(0.0, 1.0);
        let g = Grid::build(&d, &GridSpec::new(vec![10])).unwrap();
        // 0.34 -> node 3 (x=0.3), interior index 2
        assert_eq!(g.bin_interior(&[0.34]), Some(2));
        // within h/2 of the left boundary bins to the exterior endpoint
        assert_eq!(g.bin_interior(&[0.01]), None);
        assert_eq!(g.bin_flat(&[2.0]), None);
    }

    #[test]
    fn coords_roundtrip() {
        let d = DomainSpec::boxed(vec![(0.0, 1.0), (2.0, 4.0)]);
        let g = Grid::build(&d, &GridSpec::new(vec![4, 8])).unwrap();
        let mut multi = [0usize; 2];
        for flat in 0..g.n_nodes() {
            g.multi_of_flat(flat, &mut multi);
            let c = g.node_coord(flat);
            assert_eq!(g.bin_flat(&c), Some(flat));
            assert!((c[0] - 0.25 * multi[0] as f64).abs() < 1e-12);
            assert!((c[1] - 2.0 - 0.25 * multi[1] as f64).abs() < 1e-12);
        }
    }
}
