//! Independent verification of certificates by simulation, quadrature and
//! sampling.
//!
//! Nothing here proves anything: the audits look for counterexamples to the
//! guarantees a certificate claims, over finitely many initial states,
//! uncertainty realizations and disturbances.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{shape_err, Error, Result};
use crate::linalg::{inv_sqrt_spd, spectral_norm, Mat, Vector};
use crate::lmi::{expand_gl2pc_condition, expand_qgcc_condition, LyapunovData};
use crate::model::{CompiledClosedLoop, Controller, ModelDims, NqsModel, UncertaintySample};
use crate::synthesis::{
    audit_gl2pc_certificate, audit_qgcc_certificate, Certificate, CertificateKind, CheckResult, Gl2Spec, QgccSpec,
};

/// Norm below which a trajectory is considered to have reached the origin.
pub const EARLY_STOP_NORM: f64 = 1e-9;
/// Norm above which a trajectory is declared divergent.
pub const DIVERGENCE_NORM: f64 = 1e6;
const ENERGY_TOL: f64 = 1e-12;

/// Sampled closed-loop trajectory with row-major flat storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub n: usize,
    pub m: usize,
    pub nz: usize,
    pub nw: usize,
    pub times: Vec<f64>,
    states: Vec<f64>,
    inputs: Vec<f64>,
    outputs: Vec<f64>,
    disturbances: Vec<f64>,
    /// Time at which the state was pinned to the origin, if it was.
    pub early_stop: Option<f64>,
}

impl Trajectory {
    fn with_capacity(n: usize, m: usize, nz: usize, nw: usize, cap: usize) -> Self {
        Trajectory {
            n,
            m,
            nz,
            nw,
            times: Vec::with_capacity(cap),
            states: Vec::with_capacity(cap * n),
            inputs: Vec::with_capacity(cap * m),
            outputs: Vec::with_capacity(cap * nz),
            disturbances: Vec::with_capacity(cap * nw),
            early_stop: None,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.n..(k + 1) * self.n]
    }

    pub fn input(&self, k: usize) -> &[f64] {
        &self.inputs[k * self.m..(k + 1) * self.m]
    }

    pub fn output(&self, k: usize) -> &[f64] {
        &self.outputs[k * self.nz..(k + 1) * self.nz]
    }

    pub fn disturbance(&self, k: usize) -> &[f64] {
        &self.disturbances[k * self.nw..(k + 1) * self.nw]
    }

    pub fn final_state(&self) -> Vector {
        Vector::from_column_slice(self.state(self.len() - 1))
    }

    /// Trapezoidal integral of `f(k)` over the time grid.
    pub fn integrate(&self, f: impl Fn(usize) -> f64) -> f64 {
        let mut acc = 0.0;
        let mut prev = f(0);
        for k in 1..self.len() {
            let cur = f(k);
            acc += 0.5 * (self.times[k] - self.times[k - 1]) * (prev + cur);
            prev = cur;
        }
        acc
    }

    /// CSV with columns `t, x1…, u1…, z1…, w1…`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        for (p, count) in [("x", self.n), ("u", self.m), ("z", self.nz), ("w", self.nw)] {
            header.extend((1..=count).map(|i| format!("{p}{i}")));
        }
        wtr.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = vec![format!("{:e}", self.times[k])];
            for part in [self.state(k), self.input(k), self.output(k), self.disturbance(k)] {
                row.extend(part.iter().map(|v| format!("{v:e}")));
            }
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisturbanceKind {
    Zero,
    /// Hann-shaped pulse `a·sin²(π(t−t0)/width)·d` on `[t0, t0+width]`.
    Pulse { t0: f64, width: f64, direction: Vec<f64> },
    /// Hann-windowed sinusoid `a·sin(2πf(t−t0))·sin²(π(t−t0)/window)·d`.
    SinusoidBurst { freq: f64, t0: f64, window: f64, direction: Vec<f64> },
}

/// A square-integrable disturbance with known energy `‖w‖₂²`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisturbanceSignal {
    pub kind: DisturbanceKind,
    pub energy: f64,
    amplitude: f64,
}

fn unit_direction(d: &[f64]) -> Result<Vec<f64>> {
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::InvalidArgument("disturbance direction must be a nonzero finite vector".into()));
    }
    Ok(d.iter().map(|v| v / norm).collect())
}

/// `∫₀^W sin²(2πf s)·sin⁴(πs/W) ds` by composite Simpson.
fn burst_shape_energy(freq: f64, window: f64) -> f64 {
    let n = 20_000;
    let h = window / n as f64;
    let g = |s: f64| {
        let a = (2.0 * std::f64::consts::PI * freq * s).sin();
        let b = (std::f64::consts::PI * s / window).sin();
        a * a * b.powi(4)
    };
    let mut acc = g(0.0) + g(window);
    for i in 1..n {
        acc += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

impl DisturbanceSignal {
    pub fn zero() -> Self {
        DisturbanceSignal {
            kind: DisturbanceKind::Zero,
            energy: 0.0,
            amplitude: 0.0,
        }
    }

    pub fn pulse(t0: f64, width: f64, direction: &[f64], energy: f64) -> Result<Self> {
        if !(t0 >= 0.0 && width > 0.0 && energy >= 0.0) {
            return Err(Error::InvalidArgument("pulse needs t0 >= 0, width > 0, energy >= 0".into()));
        }
        // ∫ sin⁴ over one width is 3·width/8.
        let amplitude = (energy / (0.375 * width)).sqrt();
        Ok(DisturbanceSignal {
            kind: DisturbanceKind::Pulse {
                t0,
                width,
                direction: unit_direction(direction)?,
            },
            energy,
            amplitude,
        })
    }

    pub fn sinusoid_burst(freq: f64, t0: f64, window: f64, direction: &[f64], energy: f64) -> Result<Self> {
        if !(freq > 0.0 && t0 >= 0.0 && window > 0.0 && energy >= 0.0) {
            return Err(Error::InvalidArgument("burst needs freq > 0, t0 >= 0, window > 0, energy >= 0".into()));
        }
        let amplitude = (energy / burst_shape_energy(freq, window)).sqrt();
        Ok(DisturbanceSignal {
            kind: DisturbanceKind::SinusoidBurst {
                freq,
                t0,
                window,
                direction: unit_direction(direction)?,
            },
            energy,
            amplitude,
        })
    }

    pub fn dim(&self) -> Option<usize> {
        match &self.kind {
            DisturbanceKind::Zero => None,
            DisturbanceKind::Pulse { direction, .. } | DisturbanceKind::SinusoidBurst { direction, .. } => {
                Some(direction.len())
            }
        }
    }

    /// End of the support; the signal vanishes afterwards.
    pub fn support_end(&self) -> f64 {
        match &self.kind {
            DisturbanceKind::Zero => 0.0,
            DisturbanceKind::Pulse { t0, width, .. } => t0 + width,
            DisturbanceKind::SinusoidBurst { t0, window, .. } => t0 + window,
        }
    }

    /// Within the contract `‖w‖₂ ≤ 1`.
    pub fn in_contract(&self) -> bool {
        self.energy <= 1.0 + ENERGY_TOL
    }

    pub fn eval(&self, t: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let pi = std::f64::consts::PI;
        let (scale, direction) = match &self.kind {
            DisturbanceKind::Zero => return,
            DisturbanceKind::Pulse { t0, width, direction } => {
                let s = t - t0;
                if !(0.0..=*width).contains(&s) {
                    return;
                }
                (self.amplitude * (pi * s / width).sin().powi(2), direction)
            }
            DisturbanceKind::SinusoidBurst {
                freq,
                t0,
                window,
                direction,
            } => {
                let s = t - t0;
                if !(0.0..=*window).contains(&s) {
                    return;
                }
                (
                    self.amplitude * (2.0 * pi * freq * s).sin() * (pi * s / window).sin().powi(2),
                    direction,
                )
            }
        };
        for (o, d) in out.iter_mut().zip(direction) {
            *o = scale * d;
        }
    }
}

/// How the uncertainty evolves along a simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum UncertaintySchedule {
    Constant(UncertaintySample),
    /// Cycles through `samples`, switching every `period` seconds.
    Piecewise { samples: Vec<UncertaintySample>, period: f64 },
}

impl UncertaintySchedule {
    fn compile(&self, model: &NqsModel, k: &Controller) -> Result<(Vec<CompiledClosedLoop>, f64)> {
        match self {
            UncertaintySchedule::Constant(h) => Ok((vec![CompiledClosedLoop::new(model, k, h)?], f64::INFINITY)),
            UncertaintySchedule::Piecewise { samples, period } => {
                if samples.is_empty() || period.is_nan() || *period <= 0.0 {
                    return Err(Error::InvalidArgument("piecewise schedule needs samples and a positive period".into()));
                }
                let loops = samples
                    .iter()
                    .map(|h| CompiledClosedLoop::new(model, k, h))
                    .collect::<Result<_>>()?;
                Ok((loops, *period))
            }
        }
    }
}

/// Fixed-step classical Runge–Kutta integration of the closed loop on the
/// grid `t_k = k·dt` (the last step is shortened to land on `horizon`).
///
/// Once the disturbance has ended and `‖x‖ < 1e-9`, the state is pinned to
/// the origin and a final sample at `horizon` is appended.
pub fn simulate(
    model: &NqsModel,
    k: &Controller,
    x0: &Vector,
    w: &DisturbanceSignal,
    h: &UncertaintySchedule,
    horizon: f64,
    dt: f64,
) -> Result<Trajectory> {
    let ModelDims { n, m, nz, nw, .. } = model.dims;
    if !(dt > 0.0 && horizon >= dt && horizon.is_finite()) {
        return Err(Error::InvalidArgument("need dt > 0 and horizon >= dt".into()));
    }
    if x0.len() != n {
        return shape_err("x0 has the wrong length");
    }
    if let Some(d) = w.dim() {
        if d != nw {
            return shape_err(format!("disturbance has dimension {d}, model has nw = {nw}"));
        }
    }
    let (loops, period) = h.compile(model, k)?;
    let active = |t: f64| {
        if loops.len() == 1 {
            &loops[0]
        } else {
            &loops[((t / period).floor() as usize) % loops.len()]
        }
    };

    let steps = ((horizon / dt) - 1e-9).ceil() as usize;
    let mut traj = Trajectory::with_capacity(n, m, nz, nw, steps + 2);
    let kmat = &k.k;
    let cmat = &model.c;
    let mut wbuf = vec![0.0; nw];
    let record = |traj: &mut Trajectory, t: f64, x: &[f64], wbuf: &mut [f64]| {
        traj.times.push(t);
        traj.states.extend_from_slice(x);
        for i in 0..m {
            traj.inputs.push((0..n).map(|j| kmat[(i, j)] * x[j]).sum());
        }
        for i in 0..nz {
            traj.outputs.push((0..n).map(|j| cmat[(i, j)] * x[j]).sum());
        }
        w.eval(t, wbuf);
        traj.disturbances.extend_from_slice(wbuf);
    };

    let mut x: Vec<f64> = x0.iter().copied().collect();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut w_stage = vec![0.0; nw];
    let w_end = w.support_end();
    record(&mut traj, 0.0, &x, &mut wbuf);

    for step in 0..steps {
        let t = step as f64 * dt;
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if t >= w_end && norm < EARLY_STOP_NORM {
            traj.early_stop = Some(t);
            x.iter_mut().for_each(|v| *v = 0.0);
            record(&mut traj, horizon, &x, &mut wbuf);
            return Ok(traj);
        }
        let hstep = dt.min(horizon - t);
        let f = active(t);
        w.eval(t, &mut w_stage);
        f.eval(&x, &w_stage, &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * hstep * k1[i];
        }
        w.eval(t + 0.5 * hstep, &mut w_stage);
        let f = active(t + 0.5 * hstep);
        f.eval(&tmp, &w_stage, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * hstep * k2[i];
        }
        f.eval(&tmp, &w_stage, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + hstep * k3[i];
        }
        w.eval(t + hstep, &mut w_stage);
        active(t + hstep).eval(&tmp, &w_stage, &mut k4);
        for i in 0..n {
            x[i] += hstep / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t_next = if step + 1 == steps { horizon } else { (step + 1) as f64 * dt };
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm.is_nan() || norm > DIVERGENCE_NORM {
            return Err(Error::Diverged { time: t_next, norm });
        }
        record(&mut traj, t_next, &x, &mut wbuf);
    }
    Ok(traj)
}

/// Truncated quadratic cost with an estimate of the neglected tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct J2Estimate {
    pub value: f64,
    /// Estimated `∫_T^∞` contribution.
    pub tail: f64,
}

impl J2Estimate {
    pub fn tail_relative(&self) -> f64 {
        if self.tail == 0.0 {
            0.0
        } else {
            self.tail / self.value.max(f64::MIN_POSITIVE)
        }
    }
}

/// `∫ xᵀQx + uᵀRu dt` by the trapezoidal rule.
///
/// The tail beyond the horizon is estimated by fitting an exponential to
/// the integrand over the last quarter of the run; a pinned trajectory has
/// no tail. A warning is logged when the tail exceeds `1e-6` of the total.
pub fn compute_j2(traj: &Trajectory, q: &Mat, r: &Mat) -> Result<J2Estimate> {
    if q.shape() != (traj.n, traj.n) || r.shape() != (traj.m, traj.m) {
        return shape_err("Q or R does not match the trajectory dimensions");
    }
    if traj.disturbances.iter().any(|v| *v != 0.0) {
        return Err(Error::InvalidArgument("the quadratic cost is defined for undisturbed runs".into()));
    }
    if traj.is_empty() || traj.states.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("trajectory is empty or not finite".into()));
    }
    let quad = |m: &Mat, v: &[f64]| {
        let mut acc = 0.0;
        for i in 0..v.len() {
            for j in 0..v.len() {
                acc += v[i] * m[(i, j)] * v[j];
            }
        }
        acc
    };
    let stage = |k: usize| quad(q, traj.state(k)) + quad(r, traj.input(k));
    let value = traj.integrate(stage);
    let last = traj.len() - 1;
    let tail = if traj.early_stop.is_some() || stage(last) == 0.0 {
        0.0
    } else {
        let t_end = traj.times[last];
        let a = traj.times.partition_point(|&t| t < 0.75 * t_end).min(last.saturating_sub(1));
        let (la, lb) = (stage(a), stage(last));
        let rate = (la / lb).ln() / (t_end - traj.times[a]);
        if rate > 0.0 && rate.is_finite() {
            lb / rate
        } else {
            f64::INFINITY
        }
    };
    let est = J2Estimate { value, tail };
    if est.tail_relative() > 1e-6 {
        log::warn!("J2 tail estimate {tail:.3e} exceeds 1e-6 of the truncated cost {value:.3e}");
    }
    Ok(est)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JinfEstimate {
    /// `∫ zᵀz − wᵀw dt`.
    pub j_inf: f64,
    pub z_energy: f64,
    pub w_energy: f64,
    /// `‖z‖₂ / ‖w‖₂` when `‖w‖₂ > 0`.
    pub ratio: Option<f64>,
}

/// Disturbance-attenuation cost of a run started at the origin, by the
/// trapezoidal rule on the recorded `z` and `w`.
pub fn compute_jinf(traj: &Trajectory) -> Result<JinfEstimate> {
    if traj.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    if traj.state(0).iter().any(|v| *v != 0.0) {
        return Err(Error::InvalidArgument("the attenuation cost requires x0 = 0".into()));
    }
    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let z_energy = traj.integrate(|k| sq(traj.output(k)));
    let w_energy = traj.integrate(|k| sq(traj.disturbance(k)));
    Ok(JinfEstimate {
        j_inf: z_energy - w_energy,
        z_energy,
        w_energy,
        ratio: (w_energy > 0.0).then(|| (z_energy / w_energy).sqrt()),
    })
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Uncertainty realizations with `‖H‖ ≤ 1`: `H = 0`, `±` the canonical
/// partial isometry, then alternately random partial isometries with a
/// random sign and Gaussian matrices rescaled to a top singular value drawn
/// uniformly from `[0.9, 1]`. Sample `i` depends only on `(seed, i)`.
pub fn sample_uncertainty(dims: &ModelDims, count: usize, seed: u64) -> Vec<UncertaintySample> {
    let (nd, nh) = (dims.nd, dims.nh);
    (0..count)
        .map(|i| {
            if dims.is_certain() || i == 0 {
                return UncertaintySample::zero(dims);
            }
            let canonical = Mat::from_fn(nd, nh, |r, c| if r == c { 1.0 } else { 0.0 });
            let h = match i {
                1 => canonical,
                2 => -canonical,
                _ => {
                    let mut rng = rng_for(seed, i as u64);
                    let g = gaussian(&mut rng, nd, nh);
                    let svd = g.clone().svd(true, true);
                    let (u, vt) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
                    if i % 2 == 1 {
                        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        u * vt * sign
                    } else {
                        let top = svd.singular_values.max();
                        let target = rng.random_range(0.9..=1.0);
                        if top > 0.0 {
                            g * (target / top)
                        } else {
                            canonical * target
                        }
                    }
                }
            };
            // Guard against a last-ulp overshoot of the unit norm.
            let norm = spectral_norm(&h);
            let h = if norm > 1.0 { h / norm } else { h };
            UncertaintySample::new(h).expect("sample satisfies the norm bound")
        })
        .collect()
}

/// Both sides of `xᵀ(Ω₁MΩ₂ + Ω₂ᵀMᵀΩ₁ᵀ)x ≤ ε xᵀΩ₁Ω₁ᵀx + ε⁻¹ xᵀΩ₂ᵀΩ₂x`.
pub fn check_petersen(omega1: &Mat, omega2: &Mat, m: &Mat, eps: f64, x: &Vector) -> Result<(f64, f64)> {
    let n = x.len();
    if omega1.nrows() != n || omega1.ncols() != m.nrows() || m.ncols() != omega2.nrows() || omega2.ncols() != n {
        return shape_err("need Ω₁: n×p, M: p×q, Ω₂: q×n");
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    let norm = spectral_norm(m);
    if norm > 1.0 + 1e-12 {
        return Err(Error::InvalidArgument(format!("‖M‖ = {norm} exceeds 1")));
    }
    let a = omega1.transpose() * x;
    let b = omega2 * x;
    let lhs = 2.0 * a.dot(&(m * &b));
    let rhs = eps * a.norm_squared() + b.norm_squared() / eps;
    Ok((lhs, rhs))
}

/// Sampling configuration of the audits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditConfig {
    pub seed: u64,
    pub state_samples: usize,
    pub h_samples: usize,
    pub disturbances: usize,
    pub dt: f64,
    pub horizon: f64,
    /// Switch the uncertainty every `period` seconds instead of holding it.
    pub piecewise_period: Option<f64>,
    /// Energy given to every generated disturbance.
    pub disturbance_energy: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            seed: 0,
            state_samples: 500,
            h_samples: 20,
            disturbances: 100,
            dt: 1e-3,
            horizon: 50.0,
            piecewise_period: None,
            disturbance_energy: 1.0,
        }
    }
}

pub const REPORT_NOTE: &str = "Sampling audit: a pass means no counterexample was found among the sampled \
initial states, uncertainty realizations and disturbances. It cannot certify the guarantees for every \
admissible, possibly time-varying, uncertainty.";

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub note: &'static str,
    pub kind: CertificateKind,
    pub config: AuditConfig,
    pub checks: Vec<CheckResult>,
    /// Inputs outside the contract whose checks were exempted.
    pub out_of_contract: Vec<String>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// States in the ellipsoid `xᵀPx ≤ 1`: half on the boundary, half uniform in
/// the interior, mapped from the unit ball through `P^{-1/2}`.
pub fn sample_ellipsoid(p: &Mat, count: usize, seed: u64) -> Result<Vec<Vector>> {
    let map = inv_sqrt_spd(p)?;
    let n = p.nrows();
    Ok((0..count)
        .map(|i| {
            let mut rng = rng_for(seed, (1 << 32) + i as u64);
            let mut d = Vector::from_fn(n, |_, _| rng.sample(StandardNormal));
            while d.norm() == 0.0 {
                d = Vector::from_fn(n, |_, _| rng.sample(StandardNormal));
            }
            let r = if i % 2 == 0 {
                1.0
            } else {
                rng.random::<f64>().powf(1.0 / n as f64)
            };
            &map * (d.normalize() * r)
        })
        .collect())
}

fn schedules(model: &NqsModel, cfg: &AuditConfig) -> Vec<UncertaintySchedule> {
    let hs = sample_uncertainty(&model.dims, cfg.h_samples.max(1), cfg.seed);
    match cfg.piecewise_period {
        None => hs.into_iter().map(UncertaintySchedule::Constant).collect(),
        Some(period) => (0..hs.len())
            .map(|i| UncertaintySchedule::Piecewise {
                samples: hs[i..].iter().chain(&hs[..i]).cloned().collect(),
                period,
            })
            .collect(),
    }
}

fn min_of(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(f64::INFINITY, f64::min)
}

fn input_margin(traj: &Trajectory, u_max: &Vector) -> f64 {
    min_of((0..traj.len()).flat_map(|k| traj.input(k).iter().zip(u_max.iter()).map(|(u, b)| b - u.abs()).collect::<Vec<_>>()))
}

fn quad_form(p: &Mat, x: &[f64]) -> f64 {
    let v = Vector::from_column_slice(x);
    v.dot(&(p * &v))
}

fn prefixed(prefix: &str, checks: Vec<CheckResult>) -> Vec<CheckResult> {
    checks
        .into_iter()
        .map(|mut c| {
            c.name = format!("{prefix}.{}", c.name);
            c
        })
        .collect()
}

struct DecayRun {
    j2_margin: f64,
    j2_detail: Option<String>,
    monotone_margin: f64,
    final_norm: f64,
    input_margin: f64,
}

fn decay_run(spec: &QgccSpec, cert: &Certificate, x0: &Vector, h: &UncertaintySchedule, cfg: &AuditConfig) -> Result<DecayRun> {
    let k = cert.controller();
    let bound = x0.dot(&(&cert.p * x0));
    let mut horizon = cfg.horizon;
    let mut attempt = 0;
    loop {
        let traj = simulate(&spec.model, &k, x0, &DisturbanceSignal::zero(), h, horizon, cfg.dt)?;
        let j2 = compute_j2(&traj, &spec.q, &spec.r)?;
        if j2.tail_relative() > 1e-6 && attempt == 0 {
            attempt += 1;
            horizon *= 4.0;
            continue;
        }
        let j2_detail = (j2.tail_relative() > 1e-6).then(|| format!("tail {:.3e} not negligible after extending the horizon", j2.tail));
        let j2_margin = if j2_detail.is_some() {
            f64::NEG_INFINITY
        } else {
            1.0 - j2.value / bound
        };
        // Strict decrease of v(x) = xᵀPx up to the pinning point.
        let v: Vec<f64> = (0..traj.len()).map(|i| quad_form(&cert.p, traj.state(i))).collect();
        let stop = if traj.early_stop.is_some() { v.len() - 1 } else { v.len() };
        let monotone_margin = min_of((1..stop).map(|i| (v[i - 1] - v[i]) / v[i - 1].max(f64::MIN_POSITIVE)));
        return Ok(DecayRun {
            j2_margin,
            j2_detail,
            monotone_margin,
            final_norm: traj.final_state().norm(),
            input_margin: input_margin(&traj, &spec.bounds.u_max),
        });
    }
}

/// Sampling audit of a guaranteed-cost certificate.
///
/// Checks the pointwise Lyapunov inequality for each sampled `H` folded into
/// the plant, undisturbed simulations from every polytope vertex (decay,
/// monotone `v`, cost bound, input bounds) and the inclusion chain.
pub fn audit_qgcc(spec: &QgccSpec, cert: &Certificate, cfg: &AuditConfig) -> Result<VerificationReport> {
    if cert.kind != CertificateKind::Qgcc {
        return Err(Error::InvalidArgument("expected a guaranteed-cost certificate".into()));
    }
    let mut checks = prefixed("certificate", audit_qgcc_certificate(spec, cert)?);
    let k = cert.controller();
    let hs = sample_uncertainty(&spec.model.dims, cfg.h_samples.max(1), cfg.seed);

    // (1) Pointwise inequality for the realized plants.
    match sample_ellipsoid(&cert.p, cfg.state_samples, cfg.seed) {
        Ok(mut xs) => {
            xs.extend(spec.admissible.vertices.iter().cloned());
            let worst = hs
                .par_iter()
                .map(|h| -> Result<f64> {
                    let plant = spec.model.perturbed(h)?;
                    let data = LyapunovData { p: &cert.p, k: &k, eps1: 1.0, eps2: 1.0 };
                    let mut w = f64::INFINITY;
                    for x in &xs {
                        let val = expand_qgcc_condition(&plant, &spec.q, &spec.r, &data, x)?;
                        w = w.min(-val / x.norm_squared());
                    }
                    Ok(w)
                })
                .collect::<Result<Vec<_>>>()?;
            checks.push(CheckResult::strict(
                "lyapunov_pointwise",
                min_of(worst.into_iter()),
                xs.len() * hs.len(),
                "−(v̇ + xᵀQx + uᵀRu)/|x|² over sampled states and plants",
            ));
        }
        Err(e) => checks.push(CheckResult::strict("lyapunov_pointwise", f64::NEG_INFINITY, 0, e.to_string())),
    }

    // (2) Simulations from the vertices.
    let scheds = schedules(&spec.model, cfg);
    let jobs: Vec<(usize, usize)> = (0..spec.admissible.vertices.len())
        .flat_map(|v| (0..scheds.len()).map(move |s| (v, s)))
        .collect();
    let runs: Vec<std::result::Result<DecayRun, String>> = jobs
        .par_iter()
        .map(|&(v, s)| decay_run(spec, cert, &spec.admissible.vertices[v], &scheds[s], cfg).map_err(|e| e.to_string()))
        .collect();
    let failures: Vec<String> = runs.iter().filter_map(|r| r.as_ref().err().cloned()).collect();
    let ok: Vec<&DecayRun> = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
    let n_runs = jobs.len();
    let sim_detail = |base: &str| {
        if failures.is_empty() {
            base.to_string()
        } else {
            format!("{base}; {} runs failed: {}", failures.len(), failures[0])
        }
    };
    let fail_penalty = if failures.is_empty() { f64::INFINITY } else { f64::NEG_INFINITY };
    let j2_notes: Vec<&String> = ok.iter().filter_map(|r| r.j2_detail.as_ref()).collect();
    checks.push(CheckResult::new(
        "cost_bound",
        min_of(ok.iter().map(|r| r.j2_margin)).min(fail_penalty),
        1e-3,
        n_runs,
        match j2_notes.first() {
            Some(n) => sim_detail(&format!("J2 ≤ x0ᵀPx0·(1 + 1e-3); {n}")),
            None => sim_detail("J2 ≤ x0ᵀPx0·(1 + 1e-3)"),
        },
    ));
    checks.push(CheckResult::strict(
        "lyapunov_monotone",
        min_of(ok.iter().map(|r| r.monotone_margin)).min(fail_penalty),
        n_runs,
        sim_detail("relative per-step decrease of xᵀPx"),
    ));
    checks.push(CheckResult::new(
        "decay",
        1e-6 - ok.iter().map(|r| r.final_norm).fold(0.0, f64::max),
        0.0,
        n_runs,
        sim_detail("|x(T)| ≤ 1e-6"),
    ).with_failure_penalty(fail_penalty));
    checks.push(CheckResult::new(
        "input_bound",
        min_of(ok.iter().map(|r| r.input_margin)).min(fail_penalty),
        1e-6,
        n_runs,
        sim_detail("|u_i(t)| ≤ u_max,i + 1e-6"),
    ));

    // (3) Inclusion chain.
    checks.extend(crate::synthesis::inclusion_checks_qgcc(spec, cert));
    Ok(VerificationReport {
        note: REPORT_NOTE,
        kind: CertificateKind::Qgcc,
        config: cfg.clone(),
        checks,
        out_of_contract: Vec::new(),
    })
}

impl CheckResult {
    fn with_failure_penalty(mut self, penalty: f64) -> Self {
        if penalty == f64::NEG_INFINITY {
            self.worst_margin = penalty;
            self.passed = false;
        }
        self
    }
}

/// Disturbances used by the gain audit: alternating Hann pulses and
/// windowed sinusoid bursts with random timing and direction.
pub fn sample_disturbances(nw: usize, count: usize, energy: f64, seed: u64) -> Result<Vec<DisturbanceSignal>> {
    if nw == 0 {
        return Ok(vec![DisturbanceSignal::zero(); count.min(1)]);
    }
    (0..count)
        .map(|i| {
            let mut rng = rng_for(seed, (2 << 32) + i as u64);
            let dir: Vec<f64> = loop {
                let d: Vec<f64> = (0..nw).map(|_| rng.sample(StandardNormal)).collect();
                if d.iter().any(|v: &f64| *v != 0.0) {
                    break d;
                }
            };
            let t0 = rng.random_range(0.0..2.0);
            if i % 2 == 0 {
                DisturbanceSignal::pulse(t0, rng.random_range(0.1..3.0), &dir, energy)
            } else {
                let freq = rng.random_range(0.05..3.0);
                DisturbanceSignal::sinusoid_burst(freq, t0, rng.random_range(0.5..6.0), &dir, energy)
            }
        })
        .collect()
}

struct GainRun {
    in_contract: bool,
    max_level: f64,
    j_inf: f64,
    ratio: Option<f64>,
    input_margin: f64,
}

/// Sampling audit of an ℒ₂-gain certificate.
///
/// Checks the pointwise dissipation inequality at the maximizing `w`,
/// simulations from the origin under sampled disturbances and plants
/// (containment in the ellipsoid, `J∞ < 0`, gain below one, input bounds)
/// and `𝓔̃ ⊂ 𝒫∞`.
pub fn audit_gl2pc(spec: &Gl2Spec, cert: &Certificate, cfg: &AuditConfig) -> Result<VerificationReport> {
    if cert.kind != CertificateKind::Gl2pc {
        return Err(Error::InvalidArgument("expected an L2-gain certificate".into()));
    }
    let mut checks = prefixed("certificate", audit_gl2pc_certificate(spec, cert)?);
    let mut out_of_contract = Vec::new();
    let k = cert.controller();
    let model = &spec.model;
    let hs = sample_uncertainty(&model.dims, cfg.h_samples.max(1), cfg.seed);

    // (1) Pointwise inequality; the w-part 2xᵀPBw w − wᵀw peaks at w = BwᵀPx.
    match sample_ellipsoid(&cert.p, cfg.state_samples, cfg.seed) {
        Ok(mut xs) => {
            xs.extend(spec.polytope_inf.vertices.iter().cloned());
            let worst = hs
                .par_iter()
                .map(|h| -> Result<f64> {
                    let plant = model.perturbed(h)?;
                    let data = LyapunovData { p: &cert.p, k: &k, eps1: 1.0, eps2: 1.0 };
                    let mut worst = f64::INFINITY;
                    for x in &xs {
                        let w = plant.bw.transpose() * (&cert.p * x);
                        let val = expand_gl2pc_condition(&plant, &data, x, &w)?;
                        worst = worst.min(-val / (x.norm_squared() + w.norm_squared()));
                    }
                    Ok(worst)
                })
                .collect::<Result<Vec<_>>>()?;
            checks.push(CheckResult::strict(
                "dissipation_pointwise",
                min_of(worst.into_iter()),
                xs.len() * hs.len(),
                "−(v̇ + zᵀz − wᵀw)/(|x|² + |w|²) at the maximizing w",
            ));
        }
        Err(e) => checks.push(CheckResult::strict("dissipation_pointwise", f64::NEG_INFINITY, 0, e.to_string())),
    }

    // (2) Disturbed simulations from the origin.
    let ws = sample_disturbances(model.dims.nw, cfg.disturbances, cfg.disturbance_energy, cfg.seed)?;
    let scheds = schedules(model, cfg);
    for w in ws.iter().filter(|w| !w.in_contract()) {
        out_of_contract.push(format!("disturbance energy {} exceeds 1", w.energy));
    }
    out_of_contract.dedup();
    let jobs: Vec<(usize, usize)> = (0..ws.len())
        .flat_map(|a| (0..scheds.len()).map(move |b| (a, b)))
        .collect();
    let x0 = Vector::zeros(model.dims.n);
    let runs: Vec<std::result::Result<GainRun, String>> = jobs
        .par_iter()
        .map(|&(a, b)| {
            let w = &ws[a];
            let traj = simulate(model, &k, &x0, w, &scheds[b], cfg.horizon, cfg.dt).map_err(|e| e.to_string())?;
            let est = compute_jinf(&traj).map_err(|e| e.to_string())?;
            Ok(GainRun {
                in_contract: w.in_contract(),
                max_level: (0..traj.len()).map(|i| quad_form(&cert.p, traj.state(i))).fold(0.0, f64::max),
                j_inf: est.j_inf,
                ratio: est.ratio,
                input_margin: input_margin(&traj, &spec.bounds.u_max),
            })
        })
        .collect();
    let failures: Vec<&String> = runs.iter().filter_map(|r| r.as_ref().err()).collect();
    let ok: Vec<&GainRun> = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
    let penalty = if failures.is_empty() { f64::INFINITY } else { f64::NEG_INFINITY };
    let detail = |base: &str| match failures.first() {
        None => base.to_string(),
        Some(f) => format!("{base}; {} runs failed: {f}", failures.len()),
    };
    let contract: Vec<&&GainRun> = ok.iter().filter(|r| r.in_contract).collect();
    let forced: Vec<&&GainRun> = contract.iter().copied().filter(|r| r.ratio.is_some()).collect();
    if contract.is_empty() && failures.is_empty() {
        checks.push(CheckResult::exempt("reachable_set", "no in-contract disturbance; exempted"));
    } else {
        checks.push(CheckResult::new(
            "reachable_set",
            min_of(contract.iter().map(|r| 1.0 - r.max_level)).min(penalty),
            1e-6,
            contract.len(),
            detail("max_t xᵀPx ≤ 1 + 1e-6"),
        ));
    }
    if forced.is_empty() && failures.is_empty() {
        checks.push(CheckResult::exempt("attenuation", "no nonzero in-contract disturbance; exempted"));
        checks.push(CheckResult::exempt("gain_ratio", "no nonzero in-contract disturbance; exempted"));
    } else {
        checks.push(CheckResult::strict(
            "attenuation",
            min_of(forced.iter().map(|r| -r.j_inf)).min(penalty),
            forced.len(),
            detail("J∞ = ∫ zᵀz − wᵀw < 0"),
        ));
        checks.push(CheckResult::strict(
            "gain_ratio",
            min_of(forced.iter().map(|r| 1.0 - r.ratio.unwrap_or(f64::INFINITY))).min(penalty),
            forced.len(),
            detail("‖z‖₂/‖w‖₂ < 1"),
        ));
    }
    checks.push(CheckResult::new(
        "input_bound",
        min_of(ok.iter().map(|r| r.input_margin)).min(penalty),
        1e-6,
        ok.len(),
        detail("|u_i(t)| ≤ u_max,i + 1e-6"),
    ));

    // (3) Ellipsoid inside the polytope.
    checks.extend(crate::synthesis::inclusion_checks_gl2(spec, cert));
    Ok(VerificationReport {
        note: REPORT_NOTE,
        kind: CertificateKind::Gl2pc,
        config: cfg.clone(),
        checks,
        out_of_contract,
    })
}
