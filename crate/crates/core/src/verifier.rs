//! Direct numerical check of the tori produced by a [`TransformChain`].
//!
//! State vectors are laid out as `(x_1..x_n, y_1..y_n, u_1, v_1, ..., u_m, v_m)`.

use std::io::{self, Write};

use num_complex::Complex64;
use ode_solvers::dop_shared::{IntegrationError, OutputType};
use ode_solvers::{DVector, Dop853, System};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::TransformChain;
use crate::error::VerifyError;
use crate::series::{Dims, FtSeries};

/// Hamiltonian flow `x' = dH/dy, y' = -dH/dx, u' = -J dH/du`, compiled
/// for repeated evaluation.
#[derive(Clone, Debug)]
pub struct HamiltonianField {
    dims: Dims,
    k: Vec<f64>,
    pow: Vec<u32>,
    coef: Vec<Complex64>,
}

impl HamiltonianField {
    pub fn new(h: &FtSeries) -> Result<Self, VerifyError> {
        if !h.is_real() {
            return Err(VerifyError::Input("vector field needs a real-flagged Hamiltonian".into()));
        }
        let d = h.dims();
        let nv = d.n + d.normal();
        let mut k = Vec::new();
        let mut pow = Vec::new();
        let mut coef = Vec::new();
        for (idx, c) in h.terms() {
            k.extend(idx.k.iter().map(|&v| v as f64));
            pow.extend(idx.l.iter().chain(idx.p.iter()).copied());
            coef.push(c);
        }
        debug_assert_eq!(pow.len(), coef.len() * nv);
        Ok(HamiltonianField { dims: d, k, pow, coef })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn state_len(&self) -> usize {
        2 * self.dims.n + self.dims.normal()
    }

    pub fn energy(&self, z: &[f64]) -> f64 {
        let n = self.dims.n;
        let nv = n + self.dims.normal();
        let mut total = 0.0;
        for (t, c) in self.coef.iter().enumerate() {
            let k = &self.k[t * n..(t + 1) * n];
            let phase: f64 = k.iter().zip(&z[..n]).map(|(a, b)| a * b).sum();
            let mut mag = 1.0;
            for (j, &e) in self.pow[t * nv..(t + 1) * nv].iter().enumerate() {
                mag *= z[n + j].powi(e as i32);
            }
            total += (c * Complex64::from_polar(mag, phase)).re;
        }
        total
    }

    /// Gradient in state order: `(dH/dx, dH/dy, dH/du)`.
    pub fn gradient(&self, z: &[f64], g: &mut [f64]) {
        let n = self.dims.n;
        let nv = n + self.dims.normal();
        g.iter_mut().for_each(|v| *v = 0.0);
        let mut val = vec![0.0; nv];
        let mut der = vec![0.0; nv];
        let mut prefix = vec![1.0; nv + 1];
        for (t, c) in self.coef.iter().enumerate() {
            let k = &self.k[t * n..(t + 1) * n];
            let phase: f64 = k.iter().zip(&z[..n]).map(|(a, b)| a * b).sum();
            let w = c * Complex64::from_polar(1.0, phase);
            for (j, &e) in self.pow[t * nv..(t + 1) * nv].iter().enumerate() {
                let q = z[n + j];
                if e == 0 {
                    val[j] = 1.0;
                    der[j] = 0.0;
                } else {
                    let lower = q.powi(e as i32 - 1);
                    val[j] = lower * q;
                    der[j] = e as f64 * lower;
                }
                prefix[j + 1] = prefix[j] * val[j];
            }
            let full = prefix[nv];
            for i in 0..n {
                if k[i] != 0.0 {
                    g[i] += (w * Complex64::new(0.0, k[i] * full)).re;
                }
            }
            let mut suffix = 1.0;
            for j in (0..nv).rev() {
                if der[j] != 0.0 {
                    g[n + j] += w.re * prefix[j] * der[j] * suffix;
                }
                suffix *= val[j];
            }
        }
    }

    pub fn eval(&self, z: &[f64], dz: &mut [f64]) {
        let n = self.dims.n;
        let mut g = vec![0.0; z.len()];
        self.gradient(z, &mut g);
        for i in 0..n {
            dz[i] = g[n + i];
            dz[n + i] = -g[i];
        }
        for j in 0..self.dims.m {
            let gu = g[2 * n + 2 * j];
            let gv = g[2 * n + 2 * j + 1];
            dz[2 * n + 2 * j] = -gv;
            dz[2 * n + 2 * j + 1] = gu;
        }
    }
}

struct OdeSystem<'a>(&'a HamiltonianField);

impl System<f64, DVector<f64>> for OdeSystem<'_> {
    fn system(&self, _t: f64, y: &DVector<f64>, dy: &mut DVector<f64>) {
        self.0.eval(y.as_slice(), dy.as_mut_slice());
    }
}

fn solver<'a>(field: &'a HamiltonianField, z0: &[f64], t0: f64, t1: f64, dt: f64, tol: f64, out: OutputType) -> Dop853<f64, DVector<f64>, OdeSystem<'a>> {
    Dop853::from_param(
        OdeSystem(field),
        t0,
        t1,
        dt,
        DVector::from_column_slice(z0),
        tol,
        tol,
        0.9,
        0.0,
        0.333,
        6.0,
        (t1 - t0).abs(),
        0.0,
        1_000_000,
        u32::MAX,
        out,
    )
}

/// A sampled trajectory. `deviation` and `pulled_back` are filled by
/// [`verify_torus`]; plain integration leaves them empty.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub energy: Vec<f64>,
    pub deviation: Vec<f64>,
    pub pulled_back: Vec<Vec<f64>>,
    /// Time at which the integrator gave up, if it did.
    pub truncated_at: Option<f64>,
}

impl TrajectorySample {
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energy.first().copied().unwrap_or(0.0);
        self.energy.iter().fold(0.0, |acc, e| acc.max((e - e0).abs()))
    }

    pub fn write_csv<W: Write>(&self, dims: Dims, mut out: W) -> io::Result<()> {
        let mut head = vec!["t".to_string()];
        head.extend((1..=dims.n).map(|i| format!("x{i}")));
        head.extend((1..=dims.n).map(|i| format!("y{i}")));
        for j in 1..=dims.m {
            head.push(format!("u{j}"));
            head.push(format!("v{j}"));
        }
        head.push("H".into());
        head.push("deviation".into());
        writeln!(out, "{}", head.join(","))?;
        for (i, t) in self.t.iter().enumerate() {
            let mut row = vec![format!("{t:.12e}")];
            row.extend(self.states[i].iter().map(|v| format!("{v:.15e}")));
            row.push(format!("{:.15e}", self.energy[i]));
            row.push(self.deviation.get(i).map_or(String::new(), |v| format!("{v:.6e}")));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Integrates over `[0, t_end]` with dense output every `dt`.
pub fn integrate(field: &HamiltonianField, z0: &[f64], t_end: f64, dt: f64, tol: f64) -> Result<TrajectorySample, VerifyError> {
    if !(tol > 0.0) || !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(VerifyError::Input(format!("need tol > 0, dt > 0, T >= 0 (got {tol}, {dt}, {t_end})")));
    }
    if z0.len() != field.state_len() {
        return Err(VerifyError::Input(format!("state has length {}, expected {}", z0.len(), field.state_len())));
    }
    let mut sample = TrajectorySample {
        t: vec![0.0],
        states: vec![z0.to_vec()],
        energy: vec![field.energy(z0)],
        deviation: Vec::new(),
        pulled_back: Vec::new(),
        truncated_at: None,
    };
    if t_end == 0.0 {
        return Ok(sample);
    }
    let mut s = solver(field, z0, 0.0, t_end, dt, tol, OutputType::Dense);
    let res = s.integrate();
    let (ts, ys) = s.results().get();
    sample.t.clear();
    sample.states.clear();
    sample.energy.clear();
    for (t, y) in ts.iter().zip(ys) {
        sample.t.push(*t);
        sample.energy.push(field.energy(y.as_slice()));
        sample.states.push(y.as_slice().to_vec());
    }
    match res {
        Ok(_) => {}
        Err(IntegrationError::StepSizeUnderflow { x }) | Err(IntegrationError::MaxNumStepReached { x, .. }) => {
            sample.truncated_at = Some(x)
        }
        Err(IntegrationError::StiffnessDetected { x }) => sample.truncated_at = Some(x),
    }
    Ok(sample)
}

/// End point of the flow started at `z0` after time `t` (either sign).
pub fn flow(field: &HamiltonianField, z0: &[f64], t: f64, tol: f64) -> Result<Vec<f64>, VerifyError> {
    if t == 0.0 || field.coef.is_empty() {
        return Ok(z0.to_vec());
    }
    let mut s = solver(field, z0, 0.0, t, t.abs(), tol, OutputType::Sparse);
    match s.integrate() {
        Ok(_) => Ok(s.y_out().last().map(|y| y.as_slice().to_vec()).unwrap_or_else(|| z0.to_vec())),
        Err(IntegrationError::StepSizeUnderflow { x }) | Err(IntegrationError::MaxNumStepReached { x, .. }) => {
            Err(VerifyError::StepUnderflow { t: x })
        }
        Err(IntegrationError::StiffnessDetected { x }) => Err(VerifyError::StepUnderflow { t: x }),
    }
}

/// The chain as a pair of maps, each link realised by numerically flowing
/// its generator.
pub struct ChainMap {
    dims: Dims,
    links: Vec<(HamiltonianField, Vec<f64>)>,
    tol: f64,
}

impl ChainMap {
    pub fn new(chain: &TransformChain, tol: f64) -> Result<Self, VerifyError> {
        let links = chain
            .links
            .iter()
            .map(|l| Ok((HamiltonianField::new(&l.generator)?, l.y_star.clone())))
            .collect::<Result<Vec<_>, VerifyError>>()?;
        Ok(ChainMap { dims: chain.dims, links, tol })
    }

    /// `Psi(z)`: final coordinates to original ones, last link first.
    pub fn forward(&self, z: &[f64]) -> Result<Vec<f64>, VerifyError> {
        let n = self.dims.n;
        let mut w = z.to_vec();
        for (i, (f, ys)) in self.links.iter().enumerate().rev() {
            w[n..2 * n].iter_mut().zip(ys).for_each(|(a, b)| *a += b);
            w = flow(f, &w, -1.0, self.tol).map_err(|e| VerifyError::InverseChain { link: i + 1, reason: e.to_string() })?;
        }
        Ok(w)
    }

    /// `Psi^{-1}(w)`.
    pub fn inverse(&self, w: &[f64]) -> Result<Vec<f64>, VerifyError> {
        let n = self.dims.n;
        let mut z = w.to_vec();
        for (i, (f, ys)) in self.links.iter().enumerate() {
            z = flow(f, &z, 1.0, self.tol).map_err(|e| VerifyError::InverseChain { link: i + 1, reason: e.to_string() })?;
            z[n..2 * n].iter_mut().zip(ys).for_each(|(a, b)| *a -= b);
        }
        Ok(z)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub samples: usize,
    pub t_end: f64,
    pub tol: f64,
    /// Tolerance for the unit-time generator flows.
    pub chain_tol: f64,
    pub dt: f64,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { samples: 10, t_end: 100.0, tol: 1e-10, chain_tol: 1e-13, dt: 0.1, seed: 7 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeedResult {
    pub x0: Vec<f64>,
    pub max_deviation: f64,
    pub rotation: Vec<f64>,
    pub energy_drift: f64,
    pub truncated_at: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TorusVerification {
    pub max_deviation: f64,
    /// Mean over seeds.
    pub rotation_estimate: Vec<f64>,
    /// Largest spread of any rotation component across seeds.
    pub rotation_spread: f64,
    pub max_energy_drift: f64,
    pub seeds: Vec<SeedResult>,
    #[serde(skip)]
    pub trajectories: Vec<TrajectorySample>,
}

/// Least-squares slope of each angle over the second half of the track.
pub fn rotation_vector(t: &[f64], angles: &[Vec<f64>], n: usize) -> Vec<f64> {
    let t_end = t.last().copied().unwrap_or(0.0);
    let idx: Vec<usize> = (0..t.len()).filter(|&i| t[i] >= 0.5 * t_end).collect();
    if idx.len() < 2 {
        return vec![f64::NAN; n];
    }
    let cnt = idx.len() as f64;
    let tm = idx.iter().map(|&i| t[i]).sum::<f64>() / cnt;
    let stt: f64 = idx.iter().map(|&i| (t[i] - tm).powi(2)).sum();
    (0..n)
        .map(|q| {
            let xm = idx.iter().map(|&i| angles[i][q]).sum::<f64>() / cnt;
            let sxt: f64 = idx.iter().map(|&i| (t[i] - tm) * (angles[i][q] - xm)).sum();
            sxt / stt
        })
        .collect()
}

/// Seeds points on `T^n x {0} x {0}`, maps them to original coordinates,
/// integrates `h0` and pulls each sample back through the chain.
pub fn verify_torus(chain: &TransformChain, h0: &FtSeries, cfg: &VerifyConfig) -> Result<TorusVerification, VerifyError> {
    let d = chain.dims;
    if h0.dims() != d {
        return Err(VerifyError::Input("Hamiltonian and chain dimensions differ".into()));
    }
    if cfg.samples == 0 {
        return Err(VerifyError::Input("need at least one seed point".into()));
    }
    let field = HamiltonianField::new(h0)?;
    let map = ChainMap::new(chain, cfg.chain_tol)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seeds: Vec<Vec<f64>> = (0..cfg.samples)
        .map(|_| (0..d.n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect())
        .collect();
    let runs: Vec<(SeedResult, TrajectorySample)> = seeds
        .par_iter()
        .map(|x0| {
            let mut z = vec![0.0; field.state_len()];
            z[..d.n].copy_from_slice(x0);
            let start = map.forward(&z)?;
            let mut sample = integrate(&field, &start, cfg.t_end, cfg.dt, cfg.tol)?;
            for st in &sample.states {
                let back = map.inverse(st)?;
                let dev = back[d.n..].iter().fold(0.0f64, |a, v| a.max(v.abs()));
                sample.deviation.push(dev);
                sample.pulled_back.push(back);
            }
            let rotation = rotation_vector(&sample.t, &sample.pulled_back, d.n);
            let res = SeedResult {
                x0: x0.clone(),
                max_deviation: sample.deviation.iter().fold(0.0, |a: f64, v| a.max(*v)),
                rotation,
                energy_drift: sample.energy_drift(),
                truncated_at: sample.truncated_at,
            };
            Ok((res, sample))
        })
        .collect::<Result<_, VerifyError>>()?;
    let (seeds, trajectories): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let mut rotation_estimate = vec![0.0; d.n];
    for s in &seeds {
        rotation_estimate.iter_mut().zip(&s.rotation).for_each(|(a, b)| *a += b / seeds.len() as f64);
    }
    let mut rotation_spread = 0.0f64;
    for q in 0..d.n {
        let lo = seeds.iter().map(|s| s.rotation[q]).fold(f64::INFINITY, f64::min);
        let hi = seeds.iter().map(|s| s.rotation[q]).fold(f64::NEG_INFINITY, f64::max);
        rotation_spread = rotation_spread.max(hi - lo);
    }
    Ok(TorusVerification {
        max_deviation: seeds.iter().fold(0.0, |a, s| a.max(s.max_deviation)),
        rotation_estimate,
        rotation_spread,
        max_energy_drift: seeds.iter().fold(0.0, |a, s| a.max(s.energy_drift)),
        seeds,
        trajectories,
    })
}
