//! Adaptive Runge-Kutta-Fehlberg 7(8) propagation with dense output and section crossings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{vector_field, ModelId};
use crate::roots::brent;
use crate::state::{PhaseState, Vec4};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const MIN_STEP: f64 = 1e-13;
pub const MAX_STEP: f64 = 0.1;
const MAX_STEPS: usize = 5_000_000;
const TANGENCY: f64 = 1e-10;

const STAGES: usize = 13;

const C: [f64; STAGES] = [
    0.0,
    2.0 / 27.0,
    1.0 / 9.0,
    1.0 / 6.0,
    5.0 / 12.0,
    0.5,
    5.0 / 6.0,
    1.0 / 6.0,
    2.0 / 3.0,
    1.0 / 3.0,
    1.0,
    0.0,
    1.0,
];

const A: [[f64; 12]; STAGES] = [
    [0.0; 12],
    [2.0 / 27.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 36.0, 1.0 / 12.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 24.0, 0.0, 1.0 / 8.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [5.0 / 12.0, 0.0, -25.0 / 16.0, 25.0 / 16.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 20.0, 0.0, 0.0, 1.0 / 4.0, 1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [-25.0 / 108.0, 0.0, 0.0, 125.0 / 108.0, -65.0 / 27.0, 125.0 / 54.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [31.0 / 300.0, 0.0, 0.0, 0.0, 61.0 / 225.0, -2.0 / 9.0, 13.0 / 900.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [2.0, 0.0, 0.0, -53.0 / 6.0, 704.0 / 45.0, -107.0 / 9.0, 67.0 / 90.0, 3.0, 0.0, 0.0, 0.0, 0.0],
    [-91.0 / 108.0, 0.0, 0.0, 23.0 / 108.0, -976.0 / 135.0, 311.0 / 54.0, -19.0 / 60.0, 17.0 / 6.0, -1.0 / 12.0, 0.0, 0.0, 0.0],
    [2383.0 / 4100.0, 0.0, 0.0, -341.0 / 164.0, 4496.0 / 1025.0, -301.0 / 82.0, 2133.0 / 4100.0, 45.0 / 82.0, 45.0 / 164.0, 18.0 / 41.0, 0.0, 0.0],
    [3.0 / 205.0, 0.0, 0.0, 0.0, 0.0, -6.0 / 41.0, -3.0 / 205.0, -3.0 / 41.0, 3.0 / 41.0, 6.0 / 41.0, 0.0, 0.0],
    [-1777.0 / 4100.0, 0.0, 0.0, -341.0 / 164.0, 4496.0 / 1025.0, -289.0 / 82.0, 2193.0 / 4100.0, 51.0 / 82.0, 33.0 / 164.0, 12.0 / 41.0, 0.0, 1.0],
];

/// Eighth-order weights.
const B8: [f64; STAGES] = [
    0.0, 0.0, 0.0, 0.0, 0.0,
    34.0 / 105.0, 9.0 / 35.0, 9.0 / 35.0, 9.0 / 280.0, 9.0 / 280.0,
    0.0, 41.0 / 840.0, 41.0 / 840.0,
];

/// Seventh-order weights.
const B7: [f64; STAGES] = [
    41.0 / 840.0, 0.0, 0.0, 0.0, 0.0,
    34.0 / 105.0, 9.0 / 35.0, 9.0 / 35.0, 9.0 / 280.0, 9.0 / 280.0,
    41.0 / 840.0, 0.0, 0.0,
];

/// One Fehlberg step: eighth-order increment and the difference to the seventh-order one.
fn rkf78_increment(model: &ModelId, t: f64, y: &Vec4, h: f64) -> Result<(Vec4, Vec4)> {
    let mut k = [Vec4::zeros(); STAGES];
    for i in 0..STAGES {
        let mut yi = *y;
        for (j, kj) in k.iter().enumerate().take(i) {
            if A[i][j] != 0.0 {
                yi += kj * (h * A[i][j]);
            }
        }
        k[i] = vector_field(model, &PhaseState::from_vec(&yi), t + C[i] * h)?;
    }
    let mut inc = Vec4::zeros();
    let mut err = Vec4::zeros();
    for i in 0..STAGES {
        if B8[i] != 0.0 {
            inc += k[i] * (h * B8[i]);
        }
        let d = B8[i] - B7[i];
        if d != 0.0 {
            err += k[i] * (h * d);
        }
    }
    Ok((inc, err))
}

fn rkf78_step(model: &ModelId, t: f64, y: &Vec4, h: f64) -> Result<(Vec4, Vec4)> {
    let (inc, err) = rkf78_increment(model, t, y, h)?;
    Ok((y + inc, err))
}

/// Ordered samples of a solution together with what is needed to evaluate it anywhere in its span.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub model: ModelId,
    pub times: Vec<f64>,
    pub states: Vec<Vec4>,
    pub tol: f64,
    /// Physical model time = trajectory time + time_shift.
    pub time_shift: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn first(&self) -> PhaseState {
        PhaseState::from_vec(&self.states[0])
    }

    pub fn last(&self) -> PhaseState {
        PhaseState::from_vec(self.states.last().unwrap())
    }

    fn forward(&self) -> bool {
        self.end_time() >= self.start_time()
    }

    pub fn contains(&self, t: f64) -> bool {
        let (a, b) = (self.start_time(), self.end_time());
        t >= a.min(b) && t <= a.max(b)
    }

    /// Index i with t between times[i] and times[i + 1].
    fn segment(&self, t: f64) -> usize {
        let n = self.times.len();
        if n < 2 {
            return 0;
        }
        let fwd = self.forward();
        let idx = self.times.partition_point(|&s| if fwd { s <= t } else { s >= t });
        idx.saturating_sub(1).min(n - 2)
    }

    /// State at any time in the span, by a single step from the preceding sample.
    pub fn eval_vec(&self, t: f64) -> Result<Vec4> {
        if !self.contains(t) {
            return Err(Error::OutOfSpan { t, start: self.start_time(), end: self.end_time() });
        }
        let i = self.segment(t);
        let t0 = self.times[i];
        if t == t0 {
            return Ok(self.states[i]);
        }
        if i + 1 < self.times.len() && t == self.times[i + 1] {
            return Ok(self.states[i + 1]);
        }
        let (y, _) = rkf78_step(&self.model, t0 + self.time_shift, &self.states[i], t - t0)?;
        Ok(y)
    }

    pub fn eval(&self, t: f64) -> Result<PhaseState> {
        self.eval_vec(t).map(|v| PhaseState::from_vec(&v))
    }

    /// Same orbit with the time origin moved: new time = old time - shift.
    pub fn rebased(mut self, shift: f64) -> Self {
        for t in &mut self.times {
            *t -= shift;
        }
        self.time_shift += shift;
        self
    }

    /// Samples as (t, x, y, px, py) rows.
    pub fn rows(&self) -> impl Iterator<Item = [f64; 5]> + '_ {
        self.times
            .iter()
            .zip(&self.states)
            .map(|(&t, s)| [t, s[0], s[1], s[2], s[3]])
    }
}

/// Outcome of the per-step callback during propagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepControl {
    Continue,
    Stop,
}

pub fn propagate(model: &ModelId, s0: &PhaseState, t0: f64, t1: f64, tol: f64) -> Result<Trajectory> {
    propagate_until(model, s0, t0, t1, tol, |_, _, _, _| Ok(StepControl::Continue))
}

/// Propagates from t0 towards t1, calling `step` after every accepted step with
/// (t_prev, y_prev, t_new, y_new); integration ends early on `StepControl::Stop`.
pub fn propagate_until<F>(
    model: &ModelId,
    s0: &PhaseState,
    t0: f64,
    t1: f64,
    tol: f64,
    mut step: F,
) -> Result<Trajectory>
where
    F: FnMut(f64, &Vec4, f64, &Vec4) -> Result<StepControl>,
{
    if !(1e-14..=1e-6).contains(&tol) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} outside [1e-14, 1e-6]")));
    }
    if !s0.is_finite() {
        return Err(Error::InvalidParameter("non-finite initial state".into()));
    }
    let mut traj = Trajectory {
        model: *model,
        times: vec![t0],
        states: vec![s0.to_vec()],
        tol,
        time_shift: 0.0,
    };
    if t1 == t0 {
        return Ok(traj);
    }
    vector_field(model, s0, t0)?;
    let dir = (t1 - t0).signum();
    let mut t = t0;
    let mut y = s0.to_vec();
    // compensated summation of the increments
    let mut carry = Vec4::zeros();
    let mut h = 1e-2_f64.min((t1 - t0).abs());
    for _ in 0..MAX_STEPS {
        let remaining = (t1 - t).abs();
        let clipped = h >= remaining;
        let hs = if clipped { remaining } else { h };
        let attempt = rkf78_increment(model, t, &y, dir * hs);
        let (inc, err) = match attempt {
            Ok(v) => v,
            Err(Error::Singularity { .. }) if hs > MIN_STEP => {
                h = hs * 0.25;
                continue;
            }
            Err(e) => return Err(e),
        };
        let inc = inc - carry;
        let ynew = y + inc;
        let scale = y.amax().max(ynew.amax()).max(1.0);
        let en = err.amax() / (tol * scale);
        if en <= 1.0 && ynew.iter().all(|c| c.is_finite()) {
            let tnew = if clipped { t1 } else { t + dir * hs };
            traj.times.push(tnew);
            traj.states.push(ynew);
            let ctl = step(t, &y, tnew, &ynew)?;
            carry = (ynew - y) - inc;
            t = tnew;
            y = ynew;
            if clipped || ctl == StepControl::Stop {
                return Ok(traj);
            }
            let fac = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-1.0 / 8.0)).clamp(0.2, 5.0) };
            h = (hs * fac).min(MAX_STEP);
        } else {
            let fac = if en.is_finite() { (0.9 * en.powf(-1.0 / 8.0)).clamp(0.1, 0.9) } else { 0.1 };
            h = hs * fac;
            if h < MIN_STEP {
                return Err(Error::StepUnderflow { t, step: h });
            }
        }
    }
    Err(Error::NoConvergence(format!("step budget exhausted at t = {t}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Increasing,
    Decreasing,
    Any,
}

impl Direction {
    fn admits(&self, before: f64, after: f64) -> bool {
        let up = before < 0.0 && after >= 0.0;
        let down = before > 0.0 && after <= 0.0;
        match self {
            Direction::Increasing => up,
            Direction::Decreasing => down,
            Direction::Any => up || down,
        }
    }
}

/// Coordinate level set {s[coordinate] = level}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub coordinate: usize,
    pub level: f64,
    pub direction: Direction,
}

impl Section {
    pub fn y_axis_crossing() -> Self {
        Self { coordinate: 1, level: 0.0, direction: Direction::Any }
    }

    fn value(&self, v: &Vec4) -> f64 {
        v[self.coordinate] - self.level
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionEvent {
    pub time: f64,
    pub state: PhaseState,
    pub section: Section,
    pub residual: f64,
}

/// Located zero of a scalar function along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub state: PhaseState,
    pub value: f64,
}

/// All sign changes of g(t, state) along the trajectory in the traversal order,
/// refined by Brent's method on dense output. A start within the tangency band is not counted.
pub fn find_events<G>(
    traj: &Trajectory,
    mut g: G,
    direction: Direction,
    window: Option<(f64, f64)>,
) -> Result<Vec<Event>>
where
    G: FnMut(f64, &Vec4) -> Result<f64>,
{
    let mut out = Vec::new();
    if traj.len() < 2 {
        return Ok(out);
    }
    let (wlo, whi) = window.map_or((f64::NEG_INFINITY, f64::INFINITY), |(a, b)| (a.min(b), a.max(b)));
    let inside = |t: f64| t >= wlo && t <= whi;
    let mut prev_t = traj.times[0];
    let mut prev_g = g(prev_t + traj.time_shift, &traj.states[0])?;
    let mut skip = prev_g.abs() <= TANGENCY;
    for i in 1..traj.len() {
        let t = traj.times[i];
        let gi = g(t + traj.time_shift, &traj.states[i])?;
        let admitted = direction.admits(prev_g, gi);
        if admitted && !skip && (inside(prev_t) || inside(t)) {
            let root = refine(traj, &mut g, prev_t, t, prev_g, gi)?;
            if inside(root.time) {
                out.push(root);
            }
        }
        if gi.abs() > TANGENCY {
            skip = false;
        }
        prev_t = t;
        prev_g = gi;
    }
    Ok(out)
}

fn refine<G>(traj: &Trajectory, g: &mut G, ta: f64, tb: f64, ga: f64, gb: f64) -> Result<Event>
where
    G: FnMut(f64, &Vec4) -> Result<f64>,
{
    if gb == 0.0 {
        let s = traj.eval_vec(tb)?;
        return Ok(Event { time: tb, state: PhaseState::from_vec(&s), value: 0.0 });
    }
    let shift = traj.time_shift;
    let mut failure = None;
    let mut f = |t: f64| {
        if t == ta {
            return ga;
        }
        if t == tb {
            return gb;
        }
        match traj.eval_vec(t).and_then(|s| g(t + shift, &s)) {
            Ok(v) => v,
            Err(e) => {
                failure = Some(e);
                f64::NAN
            }
        }
    };
    let scale = ta.abs().max(tb.abs()).max(1.0);
    let root = brent(&mut f, ta, tb, 1e-16 * scale);
    if let Some(e) = failure {
        return Err(e);
    }
    let time = root?;
    let s = traj.eval_vec(time)?;
    let value = g(time + shift, &s)?;
    Ok(Event { time, state: PhaseState::from_vec(&s), value })
}

pub fn find_crossings(traj: &Trajectory, section: &Section, window: Option<(f64, f64)>) -> Result<Vec<SectionEvent>> {
    let events = find_events(traj, |_, v| Ok(section.value(v)), section.direction, window)?;
    Ok(events
        .into_iter()
        .map(|e| SectionEvent {
            time: e.time,
            state: e.state,
            section: *section,
            residual: e.value.abs(),
        })
        .collect())
}

/// The `which`-th (1-based) crossing of the section inside the window.
pub fn find_crossing(
    traj: &Trajectory,
    section: &Section,
    which: usize,
    window: Option<(f64, f64)>,
) -> Result<SectionEvent> {
    let all = find_crossings(traj, section, window)?;
    if which == 0 || which > all.len() {
        return Err(Error::NoCrossing { requested: which, found: all.len() });
    }
    Ok(all[which - 1])
}
