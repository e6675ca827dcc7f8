//! Seeded simulation of the hidden chains, the observations and the
//! posterior processes.
//!
//! Every path owns its own ChaCha8 stream selected by the path index, so a
//! bundle is a pure function of `(params, config)` regardless of how paths
//! are scheduled across threads. Per path the draws are consumed in a fixed
//! order: for each axis a uniform (initial state) and a unit exponential
//! (jump clock), then one standard normal per axis per step.

mod diagnostics;
mod estimate;

pub use diagnostics::{coupling_decay, filter_consistency, posterior_mean, CouplingPoint, CouplingReport, FilterConsistency, MeanPoint};
pub use estimate::{evaluate_stopping_rule, measure_change_value, BoxRule, MCEstimate, StopRule, ThresholdRule};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::ProblemKind;
use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Simulate the chain and observations, filter through the explicit
    /// likelihood-ratio solution.
    DirectFilter,
    /// Euler steps of the posterior SDE driven by its own Brownian motion.
    InnovationEuler,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub scheme: Scheme,
    /// Store every `record_every`-th step in a [`PathBundle`].
    pub record_every: usize,
    /// Measure-change weights above this value are counted as heavy-tail hits.
    pub weight_cap: f64,
}

pub const DEFAULT_DT: f64 = 1e-3;
pub const TESTING_HORIZON: f64 = 50.0;
pub const DETECTION_HORIZON: f64 = 20.0;

impl SimConfig {
    pub fn new(seed: u64, n_paths: usize) -> Self {
        Self {
            dt: DEFAULT_DT,
            horizon: DETECTION_HORIZON,
            n_paths,
            seed,
            scheme: Scheme::DirectFilter,
            record_every: 1,
            weight_cap: 1e6,
        }
    }

    /// Default horizon for a problem family.
    pub fn for_kind(kind: ProblemKind, seed: u64, n_paths: usize) -> Self {
        let horizon = if kind.is_testing() { TESTING_HORIZON } else { DETECTION_HORIZON };
        Self { horizon, ..Self::new(seed, n_paths) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParams(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return Err(Error::InvalidParams(format!("horizon {} must be at least dt {}", self.horizon, self.dt)));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidParams("n_paths must be ≥ 1".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParams("record_every must be ≥ 1".into()));
        }
        if !(self.weight_cap > 0.0) {
            return Err(Error::InvalidParams("weight_cap must be > 0".into()));
        }
        Ok(())
    }

    /// Number of dt steps that fit in the horizon.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt + 1e-9).floor() as usize
    }
}

/// Law under which the observations are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    /// Hidden chains present; `dXⁱ = μᵢYⁱdt + dWⁱ`.
    Physical,
    /// Observations are standard Brownian motions.
    Reference,
}

/// Stepper for one path of the joint system. State after `k` steps refers
/// to time `k·dt`.
#[derive(Debug, Clone)]
pub struct PathStepper<'a> {
    params: &'a ModelParams,
    dt: f64,
    sqrt_dt: f64,
    measure: Measure,
    rng: ChaCha8Rng,
    steps: usize,
    jump: Vec<f64>,
    growth: Vec<f64>,
    pub x: Vec<f64>,
    pub dx: Vec<f64>,
    pub phi: Vec<f64>,
    pub pi: Vec<f64>,
}

pub(crate) fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Initial state and jump time of one axis. A chain that starts in state 1
/// has jump time 0; one that never jumps has jump time `∞`.
pub(crate) fn draw_chain(rng: &mut ChaCha8Rng, prior: f64, lambda: f64) -> f64 {
    let u: f64 = rng.random();
    let e: f64 = rng.sample(Exp1);
    if u < prior {
        0.0
    } else if lambda > 0.0 {
        e / lambda
    } else {
        f64::INFINITY
    }
}

pub(crate) fn odds(prior: f64) -> f64 {
    if prior >= 1.0 {
        f64::INFINITY
    } else {
        prior / (1.0 - prior)
    }
}

pub(crate) fn posterior(phi: f64) -> f64 {
    if phi.is_infinite() {
        1.0
    } else {
        phi / (1.0 + phi)
    }
}

/// One step of the explicit likelihood-ratio solution with the time integral
/// on the trapezoid rule.
#[inline]
pub(crate) fn phi_step(phi: f64, growth: f64, mu: f64, lambda: f64, dt: f64, dx: f64) -> f64 {
    if phi.is_infinite() {
        return phi;
    }
    let r = (growth + mu * dx).exp();
    r * phi + 0.5 * lambda * dt * (r + 1.0)
}

impl<'a> PathStepper<'a> {
    pub fn new(params: &'a ModelParams, dt: f64, measure: Measure, seed: u64, path: usize) -> Self {
        let mut rng = path_rng(seed, path);
        let n = params.n;
        let jump = (0..n).map(|i| draw_chain(&mut rng, params.prior[i], params.lambda[i])).collect();
        let growth = (0..n).map(|i| (params.lambda[i] - 0.5 * params.mu[i] * params.mu[i]) * dt).collect();
        Self {
            params,
            dt,
            sqrt_dt: dt.sqrt(),
            measure,
            rng,
            steps: 0,
            jump,
            growth,
            x: vec![0.0; n],
            dx: vec![0.0; n],
            phi: params.prior.iter().map(|&p| odds(p)).collect(),
            pi: params.prior.clone(),
        }
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Chain state of `axis` at the current time.
    pub fn y(&self, axis: usize) -> bool {
        self.time() >= self.jump[axis]
    }

    pub fn step(&mut self) {
        let p = self.params;
        let t0 = self.time();
        let t1 = (self.steps + 1) as f64 * self.dt;
        for i in 0..p.n {
            let z: f64 = self.rng.sample(StandardNormal);
            let mut dx = self.sqrt_dt * z;
            if self.measure == Measure::Physical {
                let active = (t1 - self.jump[i].max(t0)).clamp(0.0, self.dt);
                dx += p.mu[i] * active;
            }
            self.dx[i] = dx;
            self.x[i] += dx;
            self.phi[i] = phi_step(self.phi[i], self.growth[i], p.mu[i], p.lambda[i], self.dt, dx);
            self.pi[i] = posterior(self.phi[i]);
        }
        self.steps += 1;
    }
}

/// Euler stepper for the posterior SDE, clamped to `[0,1]`.
#[derive(Debug, Clone)]
pub struct InnovationStepper<'a> {
    params: &'a ModelParams,
    dt: f64,
    sqrt_dt: f64,
    rng: ChaCha8Rng,
    steps: usize,
    pub pi: Vec<f64>,
}

impl<'a> InnovationStepper<'a> {
    pub fn new(params: &'a ModelParams, dt: f64, seed: u64, path: usize) -> Self {
        let mut rng = path_rng(seed, path);
        // same draw layout as the joint simulation; the chain draws are unused
        for i in 0..params.n {
            draw_chain(&mut rng, params.prior[i], params.lambda[i]);
        }
        Self { params, dt, sqrt_dt: dt.sqrt(), rng, steps: 0, pi: params.prior.clone() }
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn step(&mut self) {
        let p = self.params;
        for i in 0..p.n {
            let z: f64 = self.rng.sample(StandardNormal);
            let x = self.pi[i];
            let next = x + p.lambda[i] * (1.0 - x) * self.dt + p.mu[i] * x * (1.0 - x) * self.sqrt_dt * z;
            self.pi[i] = next.clamp(0.0, 1.0);
        }
        self.steps += 1;
    }
}

/// Either stepper behind one interface, as selected by [`Scheme`].
pub(crate) enum AnyStepper<'a> {
    Joint(PathStepper<'a>),
    Innovation(InnovationStepper<'a>),
}

impl<'a> AnyStepper<'a> {
    pub(crate) fn new(params: &'a ModelParams, cfg: &SimConfig, path: usize) -> Self {
        match cfg.scheme {
            Scheme::DirectFilter => AnyStepper::Joint(PathStepper::new(params, cfg.dt, Measure::Physical, cfg.seed, path)),
            Scheme::InnovationEuler => AnyStepper::Innovation(InnovationStepper::new(params, cfg.dt, cfg.seed, path)),
        }
    }

    pub(crate) fn pi(&self) -> &[f64] {
        match self {
            AnyStepper::Joint(s) => &s.pi,
            AnyStepper::Innovation(s) => &s.pi,
        }
    }

    pub(crate) fn step(&mut self) {
        match self {
            AnyStepper::Joint(s) => s.step(),
            AnyStepper::Innovation(s) => s.step(),
        }
    }
}

/// Recorded trajectories. Per-path arrays are flattened as
/// `[(path·records + r)·n + axis]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathBundle {
    pub n: usize,
    pub n_paths: usize,
    pub times: Vec<f64>,
    pub seed: u64,
    pub scheme: Scheme,
    pub y: Option<Vec<u8>>,
    pub x: Option<Vec<f64>>,
    pub phi: Option<Vec<f64>>,
    pub pi: Vec<f64>,
}

impl PathBundle {
    pub fn records(&self) -> usize {
        self.times.len()
    }

    fn at(&self, path: usize, record: usize, axis: usize) -> usize {
        (path * self.records() + record) * self.n + axis
    }

    pub fn pi_at(&self, path: usize, record: usize, axis: usize) -> f64 {
        self.pi[self.at(path, record, axis)]
    }

    pub fn phi_at(&self, path: usize, record: usize, axis: usize) -> Option<f64> {
        self.phi.as_ref().map(|v| v[self.at(path, record, axis)])
    }

    pub fn x_at(&self, path: usize, record: usize, axis: usize) -> Option<f64> {
        self.x.as_ref().map(|v| v[self.at(path, record, axis)])
    }

    pub fn y_at(&self, path: usize, record: usize, axis: usize) -> Option<bool> {
        self.y.as_ref().map(|v| v[self.at(path, record, axis)] == 1)
    }

    /// Posterior samples of one axis at one record across all paths.
    pub fn pi_column(&self, record: usize, axis: usize) -> Vec<f64> {
        (0..self.n_paths).map(|p| self.pi_at(p, record, axis)).collect()
    }
}

fn record_times(cfg: &SimConfig) -> Vec<usize> {
    (0..=cfg.steps()).step_by(cfg.record_every).collect()
}

/// Simulates chains, observations and the filter for every path.
pub fn simulate_joint(p: &ModelParams, cfg: &SimConfig) -> Result<PathBundle> {
    p.ensure_valid()?;
    cfg.validate()?;
    let marks = record_times(cfg);
    let n = p.n;
    let per_path: Vec<(Vec<u8>, Vec<f64>, Vec<f64>, Vec<f64>)> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|path| {
            let mut s = PathStepper::new(p, cfg.dt, Measure::Physical, cfg.seed, path);
            let cap = marks.len() * n;
            let (mut y, mut x, mut phi, mut pi) = (Vec::with_capacity(cap), Vec::with_capacity(cap), Vec::with_capacity(cap), Vec::with_capacity(cap));
            for &m in &marks {
                while s.steps() < m {
                    s.step();
                }
                for i in 0..n {
                    y.push(s.y(i) as u8);
                    x.push(s.x[i]);
                    phi.push(s.phi[i]);
                    pi.push(s.pi[i]);
                }
            }
            (y, x, phi, pi)
        })
        .collect();
    let mut bundle = PathBundle {
        n,
        n_paths: cfg.n_paths,
        times: marks.iter().map(|&m| m as f64 * cfg.dt).collect(),
        seed: cfg.seed,
        scheme: Scheme::DirectFilter,
        y: Some(Vec::new()),
        x: Some(Vec::new()),
        phi: Some(Vec::new()),
        pi: Vec::new(),
    };
    for (y, x, phi, pi) in per_path {
        bundle.y.as_mut().unwrap().extend(y);
        bundle.x.as_mut().unwrap().extend(x);
        bundle.phi.as_mut().unwrap().extend(phi);
        bundle.pi.extend(pi);
    }
    Ok(bundle)
}

/// Simulates only the posterior, by Euler steps of its SDE.
pub fn simulate_pi_innovation(p: &ModelParams, cfg: &SimConfig) -> Result<PathBundle> {
    p.ensure_valid()?;
    cfg.validate()?;
    let marks = record_times(cfg);
    let per_path: Vec<Vec<f64>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|path| {
            let mut s = InnovationStepper::new(p, cfg.dt, cfg.seed, path);
            let mut pi = Vec::with_capacity(marks.len() * p.n);
            let mut done = 0;
            for &m in &marks {
                while done < m {
                    s.step();
                    done += 1;
                }
                pi.extend_from_slice(&s.pi);
            }
            pi
        })
        .collect();
    Ok(PathBundle {
        n: p.n,
        n_paths: cfg.n_paths,
        times: marks.iter().map(|&m| m as f64 * cfg.dt).collect(),
        seed: cfg.seed,
        scheme: Scheme::InnovationEuler,
        y: None,
        x: None,
        phi: None,
        pi: per_path.concat(),
    })
}

/// Dispatches on `cfg.scheme`.
pub fn simulate(p: &ModelParams, cfg: &SimConfig) -> Result<PathBundle> {
    match cfg.scheme {
        Scheme::DirectFilter => simulate_joint(p, cfg),
        Scheme::InnovationEuler => simulate_pi_innovation(p, cfg),
    }
}
