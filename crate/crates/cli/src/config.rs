//! JSON run configuration. Unknown keys are rejected.

use serde::Deserialize;

use pdectrl::driver::{SolveOptions, SolverOptions};
use pdectrl::kkt::TimeScheme;
use pdectrl::precond::PrecOptions;

/// A scalar or a list; `bench` sweeps lists, `solve` requires scalars.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Copy> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }

    pub fn scalar(&self) -> Option<T> {
        match self {
            OneOrMany::One(v) => Some(*v),
            OneOrMany::Many(v) if v.len() == 1 => Some(v[0]),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverCfg {
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_restart")]
    pub restart: usize,
    #[serde(default = "default_maxit")]
    pub maxit: usize,
}

fn default_rtol() -> f64 {
    1e-6
}

fn default_restart() -> usize {
    10
}

fn default_maxit() -> usize {
    500
}

impl Default for SolverCfg {
    fn default() -> Self {
        SolverCfg {
            rtol: default_rtol(),
            restart: default_restart(),
            maxit: default_maxit(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrecCfg {
    #[serde(default = "default_cheb_sweeps")]
    pub cheb_sweeps: usize,
    #[serde(default = "default_mg_cycles")]
    pub mg_cycles: usize,
    #[serde(default)]
    pub exact_inner: bool,
}

fn default_cheb_sweeps() -> usize {
    20
}

fn default_mg_cycles() -> usize {
    2
}

impl Default for PrecCfg {
    fn default() -> Self {
        PrecCfg {
            cheb_sweeps: default_cheb_sweeps(),
            mg_cycles: default_mg_cycles(),
            exact_inner: false,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputCfg {
    #[serde(default)]
    pub dir: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: String,
    pub k: OneOrMany<u32>,
    pub beta: OneOrMany<f64>,
    #[serde(default)]
    pub n_t: Option<usize>,
    #[serde(default)]
    pub scheme: Option<String>,
    #[serde(default)]
    pub solver: SolverCfg,
    #[serde(default)]
    pub prec: PrecCfg,
    #[serde(default)]
    pub output: OutputCfg,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        for &k in &self.k.values() {
            if !(1..=14).contains(&k) {
                return Err(format!("k = {k} out of the supported range 1..=14"));
            }
        }
        for &b in &self.beta.values() {
            if !(b > 0.0 && b.is_finite()) {
                return Err(format!("beta = {b} must be positive and finite"));
            }
        }
        if let Some(n_t) = self.n_t {
            if n_t < 2 {
                return Err(format!("n_t = {n_t} needs at least 2 time points"));
            }
        }
        if !(self.solver.rtol > 0.0 && self.solver.rtol < 1.0) {
            return Err(format!("solver.rtol = {} must lie in (0, 1)", self.solver.rtol));
        }
        if self.solver.restart == 0 || self.solver.maxit == 0 {
            return Err("solver.restart and solver.maxit must be positive".into());
        }
        if self.prec.cheb_sweeps == 0 || self.prec.mg_cycles == 0 {
            return Err("prec.cheb_sweeps and prec.mg_cycles must be positive".into());
        }
        if let Some(s) = &self.scheme {
            TimeScheme::parse(s).map_err(|e| e.to_string())?;
        }
        Ok(())
    }

    pub fn scheme(&self, fallback: TimeScheme) -> TimeScheme {
        match &self.scheme {
            Some(s) => TimeScheme::parse(s).expect("validated"),
            None => fallback,
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            solver: SolverOptions {
                rtol: self.solver.rtol,
                restart: self.solver.restart,
                maxit: self.solver.maxit,
                force_fgmres: false,
            },
            prec: PrecOptions {
                cheb_sweeps: self.prec.cheb_sweeps,
                mg_cycles: self.prec.mg_cycles,
                exact_inner: self.prec.exact_inner,
                ..PrecOptions::default()
            },
        }
    }
}
