//! Kinematic-consistency screening with an interacting multiple model filter.
//!
//! Two extended Kalman filters share the state `[p_x, p_y, v, psi, psi_dot]`
//! (metres east/north of a local origin, m/s, rad counter-clockwise from east,
//! rad/s): a constant-velocity model and a constant-turn-rate-and-velocity
//! model. Each cycle mixes the model estimates through the Markov transition
//! matrix, runs predict/update per model, re-weights the mode probabilities by
//! measurement likelihood and fuses the estimates as
//!
//! ```text
//! x = sum_i mu_i x_i
//! P = sum_i mu_i [P_i + (x_i - x)(x_i - x)^T]
//! ```
//!
//! Reports whose position cannot be reached from the fused prediction
//! without exceeding the physical speed limit become [`KinematicCue`]s.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use nalgebra::{Cholesky, SMatrix, SVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ImmConfig, PipelineConfig, ProcessNoise};
use crate::geo::{geodesic_distance, project_unchecked, unproject, GeoPos, PlanarPos};
use crate::model::{AisRecord, EpochMs, Mmsi};

pub type StateVec = SVector<f64, 5>;
pub type StateCov = SMatrix<f64, 5, 5>;
type MeasVec = SVector<f64, 4>;
type MeasCov = SMatrix<f64, 4, 4>;

pub const PX: usize = 0;
pub const PY: usize = 1;
pub const V: usize = 2;
pub const PSI: usize = 3;
pub const YAW_RATE: usize = 4;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = libm::fmod(a, TAU);
    if r <= -PI {
        r += TAU;
    } else if r > PI {
        r -= TAU;
    }
    r
}

/// Converts a course over ground (degrees clockwise from north) to a planar
/// heading (radians counter-clockwise from east).
pub fn cog_to_heading(cog_deg: f64) -> f64 {
    wrap_angle(PI / 2.0 - cog_deg.to_radians())
}

fn state_diff(a: &StateVec, b: &StateVec) -> StateVec {
    let mut d = a - b;
    d[PSI] = wrap_angle(d[PSI]);
    d
}

/// Convex combination of states, averaging headings on the circle.
fn weighted_mean(states: &[StateVec; 2], w: [f64; 2]) -> StateVec {
    let reference = if w[0] >= w[1] { states[0] } else { states[1] };
    let mut out = StateVec::zeros();
    for (x, wi) in states.iter().zip(w) {
        out += state_diff(x, &reference) * wi;
    }
    out += reference;
    out[PSI] = wrap_angle(out[PSI]);
    out
}

fn spread_cov(states: &[StateVec; 2], covs: &[StateCov; 2], w: [f64; 2], mean: &StateVec) -> StateCov {
    let mut p = StateCov::zeros();
    for i in 0..2 {
        let d = state_diff(&states[i], mean);
        p += (covs[i] + d * d.transpose()) * w[i];
    }
    symmetrize(p)
}

fn symmetrize(p: StateCov) -> StateCov {
    (p + p.transpose()) * 0.5
}

/// Process noise from white longitudinal and yaw acceleration.
pub fn process_noise(x: &StateVec, dt: f64, noise: &ProcessNoise) -> StateCov {
    let (s, c) = (libm::sin(x[PSI]), libm::cos(x[PSI]));
    let half = 0.5 * dt * dt;
    let g = SMatrix::<f64, 5, 2>::new(
        half * c, 0.0, //
        half * s, 0.0, //
        dt, 0.0, //
        0.0, half, //
        0.0, dt,
    );
    let q = SMatrix::<f64, 2, 2>::new(noise.sigma_acc * noise.sigma_acc, 0.0, 0.0, noise.sigma_yaw_acc * noise.sigma_yaw_acc);
    symmetrize(g * q * g.transpose())
}

/// Constant-velocity motion: straight line at constant speed, yaw rate reset.
pub fn cv_transition(x: &StateVec, dt: f64) -> StateVec {
    let (s, c) = (libm::sin(x[PSI]), libm::cos(x[PSI]));
    StateVec::new(x[PX] + x[V] * c * dt, x[PY] + x[V] * s * dt, x[V], x[PSI], 0.0)
}

pub fn cv_jacobian(x: &StateVec, dt: f64) -> StateCov {
    let (s, c) = (libm::sin(x[PSI]), libm::cos(x[PSI]));
    let mut f = StateCov::identity();
    f[(PX, V)] = c * dt;
    f[(PX, PSI)] = -x[V] * s * dt;
    f[(PY, V)] = s * dt;
    f[(PY, PSI)] = x[V] * c * dt;
    f[(YAW_RATE, YAW_RATE)] = 0.0;
    f
}

/// Constant turn rate and velocity. Below `yaw_eps` the position follows the
/// constant-velocity update.
pub fn ctrv_transition(x: &StateVec, dt: f64, yaw_eps: f64) -> StateVec {
    let (v, psi, w) = (x[V], x[PSI], x[YAW_RATE]);
    let psi_next = psi + w * dt;
    let (px, py) = if libm::fabs(w) >= yaw_eps {
        (
            x[PX] + v / w * (libm::sin(psi_next) - libm::sin(psi)),
            x[PY] + v / w * (libm::cos(psi) - libm::cos(psi_next)),
        )
    } else {
        (x[PX] + v * libm::cos(psi) * dt, x[PY] + v * libm::sin(psi) * dt)
    };
    StateVec::new(px, py, v, wrap_angle(psi_next), w)
}

pub fn ctrv_jacobian(x: &StateVec, dt: f64, yaw_eps: f64) -> StateCov {
    let (v, psi, w) = (x[V], x[PSI], x[YAW_RATE]);
    let mut f = StateCov::identity();
    f[(PSI, YAW_RATE)] = dt;
    if libm::fabs(w) >= yaw_eps {
        let psi_next = psi + w * dt;
        let (s0, c0) = (libm::sin(psi), libm::cos(psi));
        let (s1, c1) = (libm::sin(psi_next), libm::cos(psi_next));
        f[(PX, V)] = (s1 - s0) / w;
        f[(PX, PSI)] = v / w * (c1 - c0);
        f[(PX, YAW_RATE)] = v * dt * c1 / w - v / (w * w) * (s1 - s0);
        f[(PY, V)] = (c0 - c1) / w;
        f[(PY, PSI)] = v / w * (s1 - s0);
        f[(PY, YAW_RATE)] = v * dt * s1 / w - v / (w * w) * (c0 - c1);
    } else {
        let (s, c) = (libm::sin(psi), libm::cos(psi));
        f[(PX, V)] = c * dt;
        f[(PX, PSI)] = -v * s * dt;
        f[(PY, V)] = s * dt;
        f[(PY, PSI)] = v * c * dt;
    }
    f
}

pub fn cv_predict(x: &StateVec, p: &StateCov, dt: f64, noise: &ProcessNoise) -> (StateVec, StateCov) {
    let f = cv_jacobian(x, dt);
    let q = process_noise(x, dt, noise);
    (cv_transition(x, dt), symmetrize(f * p * f.transpose() + q))
}

pub fn ctrv_predict(x: &StateVec, p: &StateCov, dt: f64, noise: &ProcessNoise, yaw_eps: f64) -> (StateVec, StateCov) {
    let f = ctrv_jacobian(x, dt, yaw_eps);
    let q = process_noise(x, dt, noise);
    (ctrv_transition(x, dt, yaw_eps), symmetrize(f * p * f.transpose() + q))
}

/// Position in the filter plane plus reported SOG and COG.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Measurement {
    pub x: f64,
    pub y: f64,
    pub sog: f64,
    pub cog_deg: f64,
}

impl Measurement {
    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.sog.is_finite() && self.cog_deg.is_finite()
    }

    fn vector(&self) -> MeasVec {
        MeasVec::new(self.x, self.y, self.sog, cog_to_heading(self.cog_deg))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Error)]
pub enum ImmError {
    #[error("non-finite measurement or time step")]
    NonFiniteInput,
    #[error("innovation covariance is not positive definite")]
    SingularInnovation,
    #[error("filter produced non-finite values")]
    Diverged,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelEstimate {
    pub x: StateVec,
    pub p: StateCov,
}

/// Filter state; index 0 of every per-model array is CV, index 1 is CTRV.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImmState {
    pub models: [ModelEstimate; 2],
    pub mu: [f64; 2],
    pub x: StateVec,
    pub p: StateCov,
    pub origin: GeoPos,
    pub last_t: EpochMs,
}

impl ImmState {
    /// Starts a filter at a report: position at the origin, speed and heading
    /// from SOG and COG, zero yaw rate.
    pub fn from_record(r: &AisRecord, cfg: &ImmConfig) -> Self {
        let x = StateVec::new(0.0, 0.0, r.sog, cog_to_heading(r.cog), 0.0);
        let sp = cfg.sigma_pos_m;
        let p = StateCov::from_diagonal(&StateVec::new(
            sp * sp,
            sp * sp,
            cfg.init_sigma_speed_mps * cfg.init_sigma_speed_mps,
            cfg.init_sigma_heading_deg.to_radians() * cfg.init_sigma_heading_deg.to_radians(),
            cfg.init_sigma_yaw_rate * cfg.init_sigma_yaw_rate,
        ));
        let est = ModelEstimate { x, p };
        ImmState { models: [est, est], mu: cfg.initial_mode_probs, x, p, origin: r.pos(), last_t: r.t }
    }

    /// Planar measurement of a report in this filter's plane.
    pub fn measure(&self, r: &AisRecord) -> Measurement {
        let q = project_unchecked(self.origin, r.pos());
        Measurement { x: q.x, y: q.y, sog: r.sog, cog_deg: r.cog }
    }

    /// Moves the projection origin, re-expressing every position estimate.
    pub fn reanchor(&mut self, origin: GeoPos) {
        let old = self.origin;
        let shift = |x: &mut StateVec| {
            let g = unproject(&PlanarPos { x: x[PX], y: x[PY], origin: old });
            let q = project_unchecked(origin, g);
            x[PX] = q.x;
            x[PY] = q.y;
        };
        for m in &mut self.models {
            shift(&mut m.x);
        }
        shift(&mut self.x);
        self.origin = origin;
    }

    /// One mixing / predict / update / fusion cycle. Returns the planar
    /// distance between the fused prediction and the measured position. On
    /// error the state is left untouched.
    pub fn step(&mut self, z: &Measurement, dt: f64, cfg: &ImmConfig) -> Result<f64, ImmError> {
        let (next, residual) = imm_step(self, z, dt, cfg)?;
        *self = next;
        Ok(residual)
    }
}

/// Functional form of [`ImmState::step`].
pub fn imm_step(s: &ImmState, z: &Measurement, dt: f64, cfg: &ImmConfig) -> Result<(ImmState, f64), ImmError> {
    if !(dt.is_finite() && dt > 0.0 && z.is_finite()) {
        return Err(ImmError::NonFiniteInput);
    }
    let pi = &cfg.transition;
    let xs = [s.models[0].x, s.models[1].x];
    let ps = [s.models[0].p, s.models[1].p];

    // Interaction.
    let cbar = [pi[0][0] * s.mu[0] + pi[1][0] * s.mu[1], pi[0][1] * s.mu[0] + pi[1][1] * s.mu[1]];
    let mut mixed = [ModelEstimate { x: xs[0], p: ps[0] }, ModelEstimate { x: xs[1], p: ps[1] }];
    for j in 0..2 {
        if cbar[j] > 0.0 {
            let w = [pi[0][j] * s.mu[0] / cbar[j], pi[1][j] * s.mu[1] / cbar[j]];
            let x0 = weighted_mean(&xs, w);
            mixed[j] = ModelEstimate { x: x0, p: spread_cov(&xs, &ps, w, &x0) };
        }
    }

    // Model-matched prediction.
    let (xp0, pp0) = cv_predict(&mixed[0].x, &mixed[0].p, dt, &cfg.cv_noise);
    let (xp1, pp1) = ctrv_predict(&mixed[1].x, &mixed[1].p, dt, &cfg.ctrv_noise, cfg.ctrv_yaw_epsilon);
    let pred_x = cbar[0] * xp0[PX] + cbar[1] * xp1[PX];
    let pred_y = cbar[0] * xp0[PY] + cbar[1] * xp1[PY];
    let residual = libm::hypot(pred_x - z.x, pred_y - z.y);

    // Update.
    let zv = z.vector();
    let r = measurement_noise(cfg);
    let (x0, p0, ll0) = ekf_update(&xp0, &pp0, &zv, &r)?;
    let (x1, p1, ll1) = ekf_update(&xp1, &pp1, &zv, &r)?;

    // Mode probabilities from log-likelihoods.
    let lw = [log_weight(cbar[0], ll0), log_weight(cbar[1], ll1)];
    let m = lw[0].max(lw[1]);
    let w = [libm::exp(lw[0] - m), libm::exp(lw[1] - m)];
    let total = w[0] + w[1];
    let mu = [w[0] / total, w[1] / total];

    // Fusion.
    let xs_new = [x0, x1];
    let x = weighted_mean(&xs_new, mu);
    let p = spread_cov(&xs_new, &[p0, p1], mu, &x);

    let next = ImmState {
        models: [ModelEstimate { x: x0, p: p0 }, ModelEstimate { x: x1, p: p1 }],
        mu,
        x,
        p,
        origin: s.origin,
        last_t: s.last_t,
    };
    let finite = next.x.iter().chain(next.p.iter()).all(|v| v.is_finite()) && mu.iter().all(|v| v.is_finite());
    if !finite || !residual.is_finite() {
        return Err(ImmError::Diverged);
    }
    Ok((next, residual))
}

fn log_weight(cbar: f64, ll: f64) -> f64 {
    if cbar > 0.0 {
        libm::log(cbar) + ll
    } else {
        f64::NEG_INFINITY
    }
}

fn measurement_noise(cfg: &ImmConfig) -> MeasCov {
    let sp = cfg.sigma_pos_m * cfg.sigma_pos_m;
    let sc = cfg.sigma_cog_deg.to_radians();
    MeasCov::from_diagonal(&MeasVec::new(sp, sp, cfg.sigma_sog_mps * cfg.sigma_sog_mps, sc * sc))
}

/// Kalman update with `H` selecting the first four states. Uses the Joseph
/// form to keep the covariance symmetric positive semi-definite. Returns the
/// Gaussian log-likelihood of the innovation.
fn ekf_update(x: &StateVec, p: &StateCov, z: &MeasVec, r: &MeasCov) -> Result<(StateVec, StateCov, f64), ImmError> {
    let mut y: MeasVec = z - x.fixed_rows::<4>(0);
    y[3] = wrap_angle(y[3]);
    let s: MeasCov = p.fixed_view::<4, 4>(0, 0) + r;
    let chol = Cholesky::new(s).ok_or(ImmError::SingularInnovation)?;
    let pht: SMatrix<f64, 5, 4> = p.fixed_view::<5, 4>(0, 0).into_owned();
    let k: SMatrix<f64, 5, 4> = chol.solve(&pht.transpose()).transpose();

    let mut xn = x + k * y;
    xn[PSI] = wrap_angle(xn[PSI]);

    let mut kh = StateCov::zeros();
    kh.fixed_view_mut::<5, 4>(0, 0).copy_from(&k);
    let a = StateCov::identity() - kh;
    let pn = symmetrize(a * p * a.transpose() + k * r * k.transpose());

    let maha = y.dot(&chol.solve(&y));
    let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| libm::log(*d)).sum::<f64>();
    let ll = -0.5 * (maha + log_det + 4.0 * LN_2PI);
    Ok((xn, pn, ll))
}

/// A report that violates physical motion feasibility.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KinematicCue {
    pub mmsi: Mmsi,
    pub t: EpochMs,
    pub pos: GeoPos,
    /// m/s
    pub implied_speed: f64,
    /// m
    pub residual_distance: f64,
    /// s
    pub dt: f64,
}

/// Walks a time-sorted track through the filter and yields cues lazily.
pub struct CueScanner<'a> {
    records: &'a [AisRecord],
    cfg: &'a PipelineConfig,
    next: usize,
    state: Option<ImmState>,
}

impl<'a> CueScanner<'a> {
    pub fn new(records: &'a [AisRecord], cfg: &'a PipelineConfig) -> Self {
        CueScanner { records, cfg, next: 0, state: None }
    }

    fn cue(&self, r: &AisRecord, residual: f64, dt: f64) -> KinematicCue {
        KinematicCue { mmsi: r.mmsi, t: r.t, pos: r.pos(), implied_speed: residual / dt, residual_distance: residual, dt }
    }
}

impl Iterator for CueScanner<'_> {
    type Item = KinematicCue;

    fn next(&mut self) -> Option<KinematicCue> {
        let imm = &self.cfg.imm;
        while self.next < self.records.len() {
            let r = &self.records[self.next];
            self.next += 1;
            let Some(state) = self.state.as_mut() else {
                self.state = Some(ImmState::from_record(r, imm));
                continue;
            };
            let dt = r.t.seconds_since(state.last_t);
            if dt <= 0.0 {
                continue;
            }
            if dt > imm.max_predict_gap_s {
                *state = ImmState::from_record(r, imm);
                if r.sog > self.cfg.v_th {
                    return Some(self.cue(r, 0.0, dt));
                }
                continue;
            }
            if geodesic_distance(state.origin, r.pos()) > imm.reanchor_distance_m {
                state.reanchor(r.pos());
            }
            let z = state.measure(r);
            match state.step(&z, dt, imm) {
                Ok(residual) => {
                    state.last_t = r.t;
                    if residual / dt > self.cfg.v_th || r.sog > self.cfg.v_th {
                        *state = ImmState::from_record(r, imm);
                        return Some(self.cue(r, residual, dt));
                    }
                }
                Err(_) => *state = ImmState::from_record(r, imm),
            }
        }
        None
    }
}

/// All kinematic cues of a time-sorted track.
pub fn extract_kinematic_cues(records: &[AisRecord], cfg: &PipelineConfig) -> Vec<KinematicCue> {
    if records.len() < 2 {
        return Vec::new();
    }
    CueScanner::new(records, cfg).collect()
}
