//! Scalar fields, drifts, bounded potentials, and Lyapunov weights.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Grid;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("potential must be finite on every interior node")]
    NonFinitePotential,
    #[error("weight function must be >= 1 everywhere (min found {0})")]
    WeightBelowOne(f64),
    #[error("stable weight requires 2*beta*theta < min(alpha, 1); got beta={beta}, theta={theta}, alpha={alpha}")]
    StableWeightConstraint { beta: f64, theta: f64, alpha: f64 },
}

/// Analytic scalar field, used for confining potentials `U` and for
/// Feynman-Kac twists sampled onto grids.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarField {
    Zero,
    /// `a |x|^2`
    Quadratic { a: f64 },
    /// `a |x|^2 + b |x|^4`
    QuadraticQuartic { a: f64, b: f64 },
    /// `(1 + |x|^2)^(k/2)`; smooth everywhere, `~ |x|^k` at infinity.
    SmoothedPower { k: f64 },
    /// `amplitude * sin(x_0)` on the first axis.
    Sine { amplitude: f64 },
}

impl ScalarField {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2 = || x.iter().map(|v| v * v).sum::<f64>();
        match *self {
            ScalarField::Zero => 0.0,
            ScalarField::Quadratic { a } => a * r2(),
            ScalarField::QuadraticQuartic { a, b } => {
                let r2 = r2();
                a * r2 + b * r2 * r2
            }
            ScalarField::SmoothedPower { k } => (1.0 + r2()).powf(0.5 * k),
            ScalarField::Sine { amplitude } => amplitude * x[0].sin(),
        }
    }

    pub fn grad(&self, x: &[f64], out: &mut [f64]) {
        match *self {
            ScalarField::Zero => out.fill(0.0),
            ScalarField::Quadratic { a } => {
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = 2.0 * a * xi;
                }
            }
            ScalarField::QuadraticQuartic { a, b } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let c = 2.0 * a + 4.0 * b * r2;
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = c * xi;
                }
            }
            ScalarField::SmoothedPower { k } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let c = k * (1.0 + r2).powf(0.5 * k - 1.0);
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = c * xi;
                }
            }
            ScalarField::Sine { amplitude } => {
                out.fill(0.0);
                out[0] = amplitude * x[0].cos();
            }
        }
    }
}

/// Drift of an overdamped diffusion: either the gradient flow of the
/// process potential or an explicit vector field.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftMode {
    /// `c = -grad U`; reversible w.r.t. the Gibbs measure `exp(-2U)/Z`.
    GradientOfPotential,
    /// `c(x) = -rate * x`
    Linear { rate: f64 },
    /// `c(x) = -coeff * x |x|^(power-1)`; in 1D with power 3 this is `-x^3`.
    RadialPower { coeff: f64, power: f64 },
    Zero,
}

impl DriftMode {
    /// Evaluates the drift; `potential` supplies the gradient-flow case.
    pub fn eval(&self, potential: &ScalarField, x: &[f64], out: &mut [f64]) {
        match *self {
            DriftMode::GradientOfPotential => {
                potential.grad(x, out);
                for o in out.iter_mut() {
                    *o = -*o;
                }
            }
            DriftMode::Linear { rate } => {
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = -rate * xi;
                }
            }
            DriftMode::RadialPower { coeff, power } => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let c = if r > 0.0 { -coeff * r.powf(power - 1.0) } else { 0.0 };
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = c * xi;
                }
            }
            DriftMode::Zero => out.fill(0.0),
        }
    }
}

/// A bounded measurable potential sampled on the interior nodes: the
/// Feynman-Kac twist `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    values: Vec<f64>,
    sup_norm: f64,
}

impl PotentialField {
    pub fn from_values(values: Vec<f64>) -> Result<Self, FieldError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FieldError::NonFinitePotential);
        }
        let sup_norm = values.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        Ok(PotentialField { values, sup_norm })
    }

    pub fn from_field(field: &ScalarField, grid: &Grid) -> Result<Self, FieldError> {
        Self::from_values(grid.sample_interior(|x| field.eval(x)))
    }

    pub fn zero(n: usize) -> Self {
        PotentialField { values: vec![0.0; n], sup_norm: 0.0 }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `V + c`, the Feynman-Kac shift.
    pub fn shifted(&self, c: f64) -> Self {
        PotentialField::from_values(self.values.iter().map(|v| v + c).collect())
            .expect("finite shift of finite potential")
    }

    /// Piecewise-constant evaluation along trajectories: the value at the
    /// nearest interior node. Positions in the half-spacing sliver next to
    /// the discrete boundary clamp to the closest interior node, so a
    /// constant shift of the field shifts every path integral exactly.
    pub fn eval_clamped(&self, grid: &Grid, x: &[f64]) -> f64 {
        match grid.nearest_interior(x) {
            Some(k) => self.values[k],
            None => 0.0,
        }
    }
}

/// Analytic form for Lyapunov weights.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightForm {
    One,
    /// `W = V^(1/p)` with `V(x) = 2 + (1 + |x|^2)^(beta*theta/2)`, the
    /// polynomial construction for stable drivers.
    StablePolynomial { beta: f64, theta: f64, p: f64 },
    /// `W = exp(a * max(|x| - r0, 0))`, the diffusion construction (flat
    /// near the origin, exponential growth outside).
    ExpRadial { a: f64, r0: f64 },
}

impl WeightForm {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2 = x.iter().map(|v| v * v).sum::<f64>();
        match *self {
            WeightForm::One => 1.0,
            WeightForm::StablePolynomial { beta, theta, p } => {
                (2.0 + (1.0 + r2).powf(0.5 * beta * theta)).powf(1.0 / p)
            }
            WeightForm::ExpRadial { a, r0 } => (a * (r2.sqrt() - r0).max(0.0)).exp(),
        }
    }
}

/// A Lyapunov weight `W >= 1` sampled on the interior nodes, together with
/// the parameters of its construction when it has one.
#[derive(Debug, Clone)]
pub struct WeightFunction {
    values: Vec<f64>,
    form: WeightForm,
}

impl WeightFunction {
    pub fn ones(n: usize) -> Self {
        WeightFunction { values: vec![1.0; n], form: WeightForm::One }
    }

    pub fn from_form(form: &WeightForm, grid: &Grid) -> Result<Self, FieldError> {
        let values = grid.sample_interior(|x| form.eval(x));
        let min = values.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        if !(min >= 1.0) {
            return Err(FieldError::WeightBelowOne(min));
        }
        Ok(WeightFunction { values, form: form.clone() })
    }

    /// Enforces the smallness condition on the stable construction for a
    /// given stability index.
    pub fn validate_for_alpha(&self, alpha: f64) -> Result<(), FieldError> {
        if let WeightForm::StablePolynomial { beta, theta, .. } = self.form {
            if 2.0 * beta * theta >= alpha.min(1.0) {
                return Err(FieldError::StableWeightConstraint { beta, theta, alpha });
            }
        }
        Ok(())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn form(&self) -> &WeightForm {
        &self.form
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pointwise `W^p`.
    pub fn pow(&self, p: f64) -> Vec<f64> {
        self.values.iter().map(|w| w.powf(p)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DomainSpec, GridSpec};

    #[test]
    fn gradients_match_finite_differences() {
        let fields = [
            ScalarField::Quadratic { a: 0.7 },
            ScalarField::QuadraticQuartic { a: 0.5, b: 0.25 },
            ScalarField::SmoothedPower { k: 4.0 },
            ScalarField::Sine { amplitude: 0.5 },
        ];
        let x = [0.37, -1.21];
        let h = 1e-6;
        for f in &fields {
            let mut g = [0.0; 2];
            f.grad(&x, &mut g);
            for k in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[k] += h;
                xm[k] -= h;
                let fd = (f.eval(&xp) - f.eval(&xm)) / (2.0 * h);
                assert!((fd - g[k]).abs() < 1e-6 * (1.0 + fd.abs()), "{f:?} axis {k}");
            }
        }
    }

    #[test]
    fn stable_weight_constraint_enforced() {
        let d = DomainSpec::interval(-1.0, 1.0);
        let g = Grid::build(&d, &GridSpec::new(vec![8])).unwrap();
        let w = WeightFunction::from_form(
            &WeightForm::StablePolynomial { beta: 2.0, theta: 0.1, p: 2.0 },
            &g,
        )
        .unwrap();
        assert!(w.validate_for_alpha(1.0).is_ok());
        // 2*2*0.3 = 1.2 >= min(1, 1)
        let w = WeightFunction::from_form(
            &WeightForm::StablePolynomial { beta: 2.0, theta: 0.3, p: 2.0 },
            &g,
        )
        .unwrap();
        assert!(w.validate_for_alpha(1.0).is_err());
    }

    #[test]
    fn weights_stay_above_one() {
        let d = DomainSpec::interval(-5.0, 5.0);
        let g = Grid::build(&d, &GridSpec::new(vec![64])).unwrap();
        for form in [
            WeightForm::One,
            WeightForm::ExpRadial { a: 0.8, r0: 1.0 },
            WeightForm::StablePolynomial { beta: 2.0, theta: 0.1, p: 2.0 },
        ] {
            let w = WeightFunction::from_form(&form, &g).unwrap();
            assert!(w.values().iter().all(|&v| v >= 1.0));
        }
    }

    #[test]
    fn shifted_potential_is_exact() {
        let p = PotentialField::from_values(vec![0.5, -2.0, 0.25]).unwrap();
        let q = p.shifted(1.5);
        assert_eq!(q.values(), &[2.0, -0.5, 1.75]);
        assert_eq!(p.sup_norm(), 2.0);
    }
}
