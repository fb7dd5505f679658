//! Named benchmark problems: Poisson control, heat control, and
//! convection-diffusion control.

use std::f64::consts::PI;

use crate::fem::{assemble_convection, assemble_stiffness};
use crate::kkt::{ControlProblem, TimeScheme};
use crate::mesh::Rectangle;
use crate::sparse::SparseMatrix;
use crate::{Error, Result};

/// Default run parameters attached to a named problem.
#[derive(Debug, Clone, Copy)]
pub struct ProblemDefaults {
    pub beta: f64,
    pub n_t: usize,
    pub t_f: f64,
    pub scheme: TimeScheme,
}

/// A registered problem with its reference domain and defaults.
pub struct NamedProblem {
    pub name: &'static str,
    pub problem: ControlProblem,
    pub domain: Rectangle,
    pub defaults: ProblemDefaults,
}

/// Wind fields for the convection-diffusion problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Wind {
    Zero,
    /// `w(x, y) = (2 y (1 - x^2), -2 x (1 - y^2))`, tangential on the
    /// boundary of `(-1, 1)^2`.
    Recirculating,
    Constant(f64, f64),
}

impl Wind {
    pub fn eval(&self, x: f64, y: f64) -> (f64, f64) {
        match *self {
            Wind::Zero => (0.0, 0.0),
            Wind::Recirculating => (2.0 * y * (1.0 - x * x), -2.0 * x * (1.0 - y * y)),
            Wind::Constant(wx, wy) => (wx, wy),
        }
    }
}

/// Distributed control of the Poisson equation on `(-1,1)^2`: state fixed to
/// one on the boundary, desired state `cos(pi x/2) cos(pi y/2) + 1`.
pub fn poisson_control() -> NamedProblem {
    let problem = ControlProblem {
        forward_operator: Box::new(|mesh, _state, _t| assemble_stiffness(mesh, 1.0)),
        desired_state: Box::new(|x, y, _t| (0.5 * PI * x).cos() * (0.5 * PI * y).cos() + 1.0),
        force: Box::new(|_, _, _| 0.0),
        boundary_value: Box::new(|_, _, _| 1.0),
        initial_condition: None,
        beta: 1e-4,
    };
    NamedProblem {
        name: "poisson",
        problem,
        domain: Rectangle::symmetric_unit(),
        defaults: ProblemDefaults {
            beta: 1e-4,
            n_t: 1,
            t_f: 0.0,
            scheme: TimeScheme::Stationary,
        },
    }
}

/// Distributed control of the heat equation on `(0,2)^2` over `(0, 2)` in
/// time, with homogeneous initial and boundary data; the data functions are
/// centered by the shift `(x-1, y-1)`.
pub fn heat_control() -> NamedProblem {
    let problem = ControlProblem {
        forward_operator: Box::new(|mesh, _state, _t| assemble_stiffness(mesh, 1.0)),
        desired_state: Box::new(|x, y, t| {
            t * (0.5 * PI * (x - 1.0)).cos() * (0.5 * PI * (y - 1.0)).cos()
        }),
        force: Box::new(|x, y, _t| (0.5 * PI * (x - 1.0)).cos() * (0.5 * PI * (y - 1.0)).cos()),
        boundary_value: Box::new(|_, _, _| 0.0),
        initial_condition: Some(Box::new(|_, _| 0.0)),
        beta: 1e-4,
    };
    NamedProblem {
        name: "heat",
        problem,
        domain: Rectangle::new(0.0, 2.0, 0.0, 2.0),
        defaults: ProblemDefaults {
            beta: 1e-4,
            n_t: 10,
            t_f: 2.0,
            scheme: TimeScheme::Trapezoidal,
        },
    }
}

/// Convection-diffusion control on `(-1,1)^2` with the given wind and
/// diffusivity; desired state and boundary data reuse the Poisson problem.
/// The wind and diffusivity defaults are artifact choices.
pub fn convdiff_control(wind: Wind, diffusivity: f64) -> NamedProblem {
    assert!(diffusivity > 0.0, "diffusivity must be positive");
    let problem = ControlProblem {
        forward_operator: Box::new(move |mesh, _state, _t| {
            let k = assemble_stiffness(mesh, diffusivity);
            let n = assemble_convection(mesh, &|x, y| wind.eval(x, y));
            SparseMatrix::linear_comb(1.0, &k, 1.0, &n).expect("matching shapes")
        }),
        desired_state: Box::new(|x, y, _t| (0.5 * PI * x).cos() * (0.5 * PI * y).cos() + 1.0),
        force: Box::new(|_, _, _| 0.0),
        boundary_value: Box::new(|_, _, _| 1.0),
        initial_condition: Some(Box::new(|_, _| 0.0)),
        beta: 1e-4,
    };
    NamedProblem {
        name: "convdiff",
        problem,
        domain: Rectangle::symmetric_unit(),
        defaults: ProblemDefaults {
            beta: 1e-4,
            n_t: 10,
            t_f: 2.0,
            scheme: TimeScheme::Stationary,
        },
    }
}

/// Registry lookup over the named problems.
pub fn by_name(name: &str) -> Result<NamedProblem> {
    match name {
        "poisson" => Ok(poisson_control()),
        "heat" => Ok(heat_control()),
        "convdiff" => Ok(convdiff_control(Wind::Recirculating, 0.1)),
        other => Err(Error::Config(format!(
            "unknown problem '{other}' (choices: poisson, heat, convdiff)"
        ))),
    }
}
