//! Process specifications and discrete killed generators.
//!
//! `build_generator` assembles the generator of each example process on a
//! vertex lattice with the exterior deleted (Dirichlet absorption):
//!
//! * overdamped Langevin `c . grad + Laplacian/2`, with the gradient-drift
//!   case discretized in divergence (Gibbs-weighted) form so detailed
//!   balance holds on the grid;
//! * kinetic Langevin `v . grad_x - (grad U + gamma v) . grad_v +
//!   Laplacian_v/2` on position-velocity lattices;
//! * stable-driven SDEs `-grad U . grad +` a compensated jump integral,
//!   using the quadrature stencil from [`fractional`].
//!
//! Positivity of off-diagonals is non-negotiable (the eigen-solver needs
//! Perron structure): advection is upwinded whenever a centered difference
//! would break it, and every assembled operator is verified at build time.

pub mod fractional;
pub mod lyapunov;
mod operator;

pub use fractional::{fractional_quadrature, JumpStencil};
pub use lyapunov::{lyapunov_check, LyapunovReport};
pub use operator::{GridOperator, OperatorBuilder, OperatorError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{DriftMode, FieldError, ScalarField};
use crate::grid::{Grid, GridError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("stability index must lie in (0, 2); got {0}")]
    AlphaOutOfRange(f64),
    #[error("friction must be positive; got {0}")]
    NonPositiveFriction(f64),
    #[error("invalid process: {0}")]
    InvalidProcess(String),
}

/// One of the three example process classes. Diffusions carry unit Brownian
/// noise; the stable driver is normalized through its Levy intensity
/// `c_alpha`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessSpec {
    OverdampedLangevin {
        potential: ScalarField,
        drift: DriftMode,
    },
    KineticLangevin {
        potential: ScalarField,
        gamma: f64,
    },
    StableSde {
        potential: ScalarField,
        alpha: f64,
        /// Intensity of the Levy measure `c_alpha |z|^(-d-alpha) dz`.
        c_alpha: f64,
    },
}

impl ProcessSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            ProcessSpec::KineticLangevin { gamma, .. } if gamma <= 0.0 => {
                Err(ModelError::NonPositiveFriction(gamma))
            }
            ProcessSpec::StableSde { alpha, .. } if !(alpha > 0.0 && alpha < 2.0) => {
                Err(ModelError::AlphaOutOfRange(alpha))
            }
            ProcessSpec::StableSde { c_alpha, .. } if c_alpha <= 0.0 => Err(
                ModelError::InvalidProcess(format!("c_alpha must be positive, got {c_alpha}")),
            ),
            _ => Ok(()),
        }
    }

    /// Number of grid axes per state dimension: kinetic processes double
    /// (positions then velocities).
    pub fn phase_factor(&self) -> usize {
        match self {
            ProcessSpec::KineticLangevin { .. } => 2,
            _ => 1,
        }
    }
}

/// Assembles the killed generator of `process` on `grid`.
///
/// The returned operator acts on interior-node vectors; exterior nodes are
/// deleted, so mass reaching them is lost (rows next to the boundary sum
/// strictly negative).
pub fn build_generator(process: &ProcessSpec, grid: &Grid) -> Result<GridOperator, ModelError> {
    process.validate()?;
    match process {
        ProcessSpec::OverdampedLangevin { potential, drift } => {
            assemble_overdamped(potential, drift, grid)
        }
        ProcessSpec::KineticLangevin { potential, gamma } => {
            assemble_kinetic(potential, *gamma, grid)
        }
        ProcessSpec::StableSde { potential, alpha, c_alpha } => {
            fractional::assemble_stable(potential, *alpha, *c_alpha, grid, None)
        }
    }
}

fn assemble_overdamped(
    potential: &ScalarField,
    drift: &DriftMode,
    grid: &Grid,
) -> Result<GridOperator, ModelError> {
    let n = grid.n_interior();
    let mut b = OperatorBuilder::new(n);
    let dim = grid.dim();
    let mut x = vec![0.0; dim];
    let mut xn = vec![0.0; dim];
    let mut c = vec![0.0; dim];
    let gradient_form = matches!(drift, DriftMode::GradientOfPotential);

    for i in 0..n {
        let flat = grid.flat_of_interior(i);
        grid.node_coord_into(flat, &mut x);
        if gradient_form {
            // Divergence-form conductances exp(U_i - U_j) / (2 h^2):
            // consistent with c = -grad U and in detailed balance with the
            // Gibbs weights exp(-2U) on the lattice.
            let ui = potential.eval(&x);
            for axis in 0..dim {
                let h = grid.spacing[axis];
                for step in [-1i64, 1] {
                    let nb = grid
                        .neighbor(flat, axis, step)
                        .expect("interior node has lattice neighbors");
                    grid.node_coord_into(nb, &mut xn);
                    let w = (ui - potential.eval(&xn)).exp() / (2.0 * h * h);
                    if let Some(j) = grid.interior_index(nb) {
                        b.add(i, j, w);
                    }
                    b.add(i, i, -w);
                }
            }
        } else {
            drift.eval(potential, &x, &mut c);
            for axis in 0..dim {
                let h = grid.spacing[axis];
                let diff = 0.5 / (h * h);
                add_advected_axis(&mut b, grid, i, flat, axis, diff, c[axis]);
            }
        }
    }
    Ok(b.build()?)
}

/// Adds one axis worth of `diff * d^2/dx^2 + c * d/dx` taps for row `i`,
/// centered when that keeps both off-diagonals nonnegative, upwinded
/// otherwise.
fn add_advected_axis(
    b: &mut OperatorBuilder,
    grid: &Grid,
    i: usize,
    flat: usize,
    axis: usize,
    diff: f64,
    c: f64,
) {
    let h = grid.spacing[axis];
    let nb_plus = grid.neighbor(flat, axis, 1).expect("interior node");
    let nb_minus = grid.neighbor(flat, axis, -1).expect("interior node");
    let central_ok = diff - c.abs() / (2.0 * h) >= 0.0;
    let (w_plus, w_minus) = if central_ok {
        (diff + c / (2.0 * h), diff - c / (2.0 * h))
    } else if c > 0.0 {
        (diff + c / h, diff)
    } else {
        (diff, diff - c / h)
    };
    for (nb, w) in [(nb_plus, w_plus), (nb_minus, w_minus)] {
        if w == 0.0 {
            continue;
        }
        if let Some(j) = grid.interior_index(nb) {
            b.add(i, j, w);
        }
        b.add(i, i, -w);
    }
}

fn assemble_kinetic(
    potential: &ScalarField,
    gamma: f64,
    grid: &Grid,
) -> Result<GridOperator, ModelError> {
    let dim = grid.dim();
    if dim % 2 != 0 {
        return Err(ModelError::InvalidProcess(
            "kinetic grids need paired position/velocity axes".into(),
        ));
    }
    let dp = dim / 2;
    let n = grid.n_interior();
    let mut b = OperatorBuilder::new(n);
    let mut state = vec![0.0; dim];
    let mut grad_u = vec![0.0; dp];

    for i in 0..n {
        let flat = grid.flat_of_interior(i);
        grid.node_coord_into(flat, &mut state);
        let (x, v) = state.split_at(dp);
        potential.grad(x, &mut grad_u);
        // transport v . grad_x: pure advection, always upwinded
        for axis in 0..dp {
            add_advected_axis(&mut b, grid, i, flat, axis, 0.0, v[axis]);
        }
        // velocity axes: friction drift plus unit diffusion
        for k in 0..dp {
            let axis = dp + k;
            let h = grid.spacing[axis];
            let diff = 0.5 / (h * h);
            let drift_v = -(grad_u[k] + gamma * v[k]);
            add_advected_axis(&mut b, grid, i, flat, axis, diff, drift_v);
        }
    }
    Ok(b.build()?)
}

/// The bare `v . grad_x` advection block of the kinetic scheme, exposed for
/// scheme diagnostics (its symmetric part on smooth probes must vanish with
/// the mesh).
pub fn kinetic_transport_part(grid: &Grid) -> Result<GridOperator, ModelError> {
    let dim = grid.dim();
    if dim % 2 != 0 {
        return Err(ModelError::InvalidProcess(
            "kinetic grids need paired position/velocity axes".into(),
        ));
    }
    let dp = dim / 2;
    let n = grid.n_interior();
    let mut b = OperatorBuilder::new(n);
    let mut state = vec![0.0; dim];
    for i in 0..n {
        let flat = grid.flat_of_interior(i);
        grid.node_coord_into(flat, &mut state);
        for axis in 0..dp {
            add_advected_axis(&mut b, grid, i, flat, axis, 0.0, state[dp + axis]);
        }
    }
    Ok(b.build()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DomainSpec, GridSpec};
    use approx::assert_relative_eq;

    fn interval_brownian(cells: usize) -> (Grid, GridOperator) {
        let d = DomainSpec::interval(0.0, std::f64::consts::PI);
        let g = Grid::build(&d, &GridSpec::new(vec![cells])).unwrap();
        let p = ProcessSpec::OverdampedLangevin {
            potential: ScalarField::Zero,
            drift: DriftMode::GradientOfPotential,
        };
        let op = build_generator(&p, &g).unwrap();
        (g, op)
    }

    #[test]
    fn zero_drift_interval_is_the_forced_tridiagonal() {
        // central differences with zero drift: (1/2h^2, -1/h^2, 1/2h^2)
        let (g, op) = interval_brownian(400);
        let h = g.spacing[0];
        let off = 1.0 / (2.0 * h * h);
        let diag = -1.0 / (h * h);
        for i in 0..op.dim() {
            let (cols, vals) = op.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j == i {
                    assert_relative_eq!(v, diag, max_relative = 1e-14);
                } else {
                    assert!(j == i + 1 || j + 1 == i);
                    assert_relative_eq!(v, off, max_relative = 1e-14);
                }
            }
        }
        // interior rows conserve, boundary-adjacent rows kill
        assert_relative_eq!(op.row_sum(200), 0.0, epsilon = 1e-9 * off);
        assert!(op.row_sum(0) < -0.9 * off);
    }

    #[test]
    fn perron_structure_holds_for_all_assemblers() {
        let quartic = ScalarField::QuadraticQuartic { a: 0.5, b: 0.25 };

        let d1 = DomainSpec::interval(-1.0, 1.5);
        let g1 = Grid::build(&d1, &GridSpec::new(vec![120])).unwrap();
        let over = build_generator(
            &ProcessSpec::OverdampedLangevin {
                potential: quartic.clone(),
                drift: DriftMode::GradientOfPotential,
            },
            &g1,
        )
        .unwrap();

        let d2 = DomainSpec::boxed(vec![(0.0, 1.0), (-4.0, 4.0)]);
        let g2 = Grid::build(&d2, &GridSpec::new(vec![24, 32])).unwrap();
        let kin = build_generator(
            &ProcessSpec::KineticLangevin { potential: quartic.clone(), gamma: 1.0 },
            &g2,
        )
        .unwrap();

        let d3 = DomainSpec::interval(-1.0, 1.0);
        let g3 = Grid::build(&d3, &GridSpec::new(vec![64])).unwrap();
        let stable = build_generator(
            &ProcessSpec::StableSde { potential: quartic, alpha: 1.0, c_alpha: 0.3 },
            &g3,
        )
        .unwrap();

        for op in [&over, &kin, &stable] {
            let (min_off, max_sum) = op.perron_violations();
            assert!(min_off >= 0.0, "negative off-diagonal {min_off}");
            assert!(max_sum <= 1e-10 * op.diag_sup(), "positive row sum {max_sum}");
        }
    }

    #[test]
    fn constant_vector_decays_only_near_boundary() {
        let (_, op) = interval_brownian(64);
        let ones = vec![1.0; op.dim()];
        let mut out = vec![0.0; op.dim()];
        op.apply(&ones, &mut out);
        for (i, &v) in out.iter().enumerate() {
            assert!(v <= 1e-12, "row {i} gained mass: {v}");
            if i == 0 || i == op.dim() - 1 {
                assert!(v < 0.0, "boundary row {i} must strictly kill");
            } else {
                assert!(v.abs() < 1e-9 * op.diag_sup());
            }
        }
    }

    #[test]
    fn gradient_drift_scheme_is_second_order_consistent() {
        // L psi = c psi' + psi''/2 with c = -U'; compare on a smooth bump
        // against the analytic value at interior nodes, two resolutions.
        let u = ScalarField::QuadraticQuartic { a: 0.5, b: 0.25 };
        let psi = |x: f64| (x * 0.9).sin() * (-x * x).exp();
        let psi_d = |x: f64| {
            let e = (-x * x).exp();
            0.9 * (0.9 * x).cos() * e - 2.0 * x * (0.9 * x).sin() * e
        };
        let psi_dd = |x: f64| {
            let e = (-x * x).exp();
            let s = (0.9 * x).sin();
            let c = (0.9 * x).cos();
            e * (-0.81 * s - 1.8 * x * c - 2.0 * s - 2.0 * x * (0.9 * c - 2.0 * x * s))
        };
        let lpsi = |x: f64| -(x + x * x * x) * psi_d(x) + 0.5 * psi_dd(x);

        let mut errs = Vec::new();
        for cells in [100usize, 200] {
            let d = DomainSpec::interval(-1.0, 1.5);
            let g = Grid::build(&d, &GridSpec::new(vec![cells])).unwrap();
            let op = build_generator(
                &ProcessSpec::OverdampedLangevin {
                    potential: u.clone(),
                    drift: DriftMode::GradientOfPotential,
                },
                &g,
            )
            .unwrap();
            let f = g.sample_interior(|x| psi(x[0]));
            let mut lf = vec![0.0; f.len()];
            op.apply(&f, &mut lf);
            // skip a margin near the boundary where psi is not compactly zero
            let margin = cells / 10;
            let mut err = 0.0f64;
            for i in margin..f.len() - margin {
                let x = g.interior_coord(i)[0];
                err = err.max((lf[i] - lpsi(x)).abs());
            }
            errs.push(err);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(
            (order - 2.0).abs() < 0.4,
            "measured order {order}, errors {errs:?}"
        );
    }

    #[test]
    fn upwinding_engages_when_central_would_go_negative() {
        // steep linear drift on a coarse grid: |c| h > 1 near the edges
        let d = DomainSpec::interval(-4.0, 4.0);
        let g = Grid::build(&d, &GridSpec::new(vec![16])).unwrap();
        let op = build_generator(
            &ProcessSpec::OverdampedLangevin {
                potential: ScalarField::Zero,
                drift: DriftMode::Linear { rate: 4.0 },
            },
            &g,
        )
        .unwrap();
        let (min_off, max_sum) = op.perron_violations();
        assert!(min_off >= 0.0);
        assert!(max_sum <= 1e-12 * op.diag_sup());
    }

    #[test]
    fn kinetic_transport_symmetric_part_vanishes_linearly_on_smooth_probes() {
        // <f, T f>/<f, f> for the advection block and a smooth Dirichlet
        // probe must shrink ~ O(h); measured at two resolutions.
        let mut ratios = Vec::new();
        for cells in [16usize, 32] {
            let d = DomainSpec::boxed(vec![(0.0, 1.0), (-3.0, 3.0)]);
            let g = Grid::build(&d, &GridSpec::new(vec![cells, 3 * cells])).unwrap();
            let t = kinetic_transport_part(&g).unwrap();
            let f = g.sample_interior(|s| {
                (std::f64::consts::PI * s[0]).sin()
                    * (std::f64::consts::PI * (s[1] + 3.0) / 6.0).sin()
            });
            let num = t.quadratic_form(&f).abs();
            let den: f64 = f.iter().map(|v| v * v).sum();
            ratios.push(num / den);
        }
        let order = (ratios[0] / ratios[1]).log2();
        assert!(
            (order - 1.0).abs() < 0.35,
            "transport symmetric part decays at order {order} ({ratios:?})"
        );
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(matches!(
            ProcessSpec::StableSde {
                potential: ScalarField::Zero,
                alpha: 2.5,
                c_alpha: 1.0
            }
            .validate(),
            Err(ModelError::AlphaOutOfRange(_))
        ));
        assert!(matches!(
            ProcessSpec::KineticLangevin { potential: ScalarField::Zero, gamma: 0.0 }.validate(),
            Err(ModelError::NonPositiveFriction(_))
        ));
    }
}
