//! The characteristic triple as a simulator: skeleton paths, path states
//! `X_t` and `X_t⁻`, and the restarted path functional `L(a)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jump_law::{HazardLaw, JumpKernel};
use crate::rng::{ReplicationStreams, UniformSource};
use crate::sds::{Flow, PathFunctional, State, StateDescriptor, StateTag};

pub const DEFAULT_MAX_JUMPS: usize = 1_000_000;
/// Tolerance for additive-functional evaluation along skeletons.
pub const PATH_TOL: f64 = 1e-10;

/// A PDMP given by `(φ, Λ, Q)` plus an explosion guard.
#[derive(Clone)]
pub struct PdmpModel {
    pub name: String,
    pub flow: Arc<dyn Flow>,
    pub hazard: HazardLaw,
    pub kernel: Arc<dyn JumpKernel>,
    pub max_jumps: usize,
    pub descriptor: StateDescriptor,
}

impl fmt::Debug for PdmpModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PdmpModel")
            .field("name", &self.name)
            .field("kernel", &self.kernel)
            .field("max_jumps", &self.max_jumps)
            .field("descriptor", &self.descriptor)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathStatus {
    Completed,
    Exploded,
}

/// One jump: time `τₙ`, holding time `τₙ - τₙ₋₁` as simulated, the pre-jump
/// state `X_{τₙ}⁻` and the post-jump state `X_{τₙ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub holding: f64,
    pub pre: State,
    pub post: State,
}

/// A simulated path on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    pub x0: State,
    pub events: Vec<JumpEvent>,
    pub horizon: f64,
    pub status: PathStatus,
}

/// A flow segment of a skeleton: `start_state` followed for `length` time
/// units from `start_time`. `ends_in_jump` marks segments closed by an event.
#[derive(Debug, Clone, Copy)]
pub struct Segment<'a> {
    pub start_time: f64,
    pub start_state: &'a State,
    pub length: f64,
    pub ends_in_jump: bool,
}

impl PdmpModel {
    pub fn new(
        name: impl Into<String>,
        flow: Arc<dyn Flow>,
        hazard: HazardLaw,
        kernel: Arc<dyn JumpKernel>,
        descriptor: StateDescriptor,
    ) -> Self {
        Self {
            name: name.into(),
            flow,
            hazard,
            kernel,
            max_jumps: DEFAULT_MAX_JUMPS,
            descriptor,
        }
    }

    pub fn with_max_jumps(mut self, max_jumps: usize) -> Self {
        self.max_jumps = max_jumps;
        self
    }

    /// Simulate replication `replication` of `seed` on `[0, T]`.
    pub fn simulate_replication(
        &self,
        x0: &State,
        horizon: f64,
        seed: u64,
        replication: u64,
    ) -> Result<Skeleton> {
        let mut streams = ReplicationStreams::new(seed, replication);
        self.simulate(x0, horizon, &mut streams.holding, &mut streams.destination)
    }

    /// Simulate a skeleton on `[0, T]`. Holding times consume `holding`,
    /// destinations consume `destination`.
    pub fn simulate(
        &self,
        x0: &State,
        horizon: f64,
        holding: &mut dyn UniformSource,
        destination: &mut dyn UniformSource,
    ) -> Result<Skeleton> {
        if x0.tag != StateTag::Interior {
            return Err(Error::BadParameters(format!("initial state {x0} is not interior")));
        }
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(Error::BadParameters(format!("horizon {horizon}")));
        }
        let flow = self.flow.as_ref();
        let mut events = Vec::new();
        let mut t = 0.0;
        let mut x = x0.clone();
        let mut status = PathStatus::Completed;
        loop {
            if x.is_cemetery() {
                break;
            }
            if events.len() >= self.max_jumps {
                status = PathStatus::Exploded;
                break;
            }
            let remaining = horizon - t;
            if remaining <= 0.0 {
                break;
            }
            let u = holding.next_uniform();
            match self.hazard.sample_jump_time_within(flow, &x, u, remaining)? {
                Some(s) => {
                    let pre = flow.eval(&x, s)?;
                    let post = self.kernel.sample(&pre, destination)?;
                    let mut time = t + s;
                    if time <= t {
                        time = t.next_up();
                    }
                    let time = time.min(horizon);
                    events.push(JumpEvent {
                        time,
                        holding: s,
                        pre,
                        post: post.clone(),
                    });
                    t = time;
                    x = post;
                }
                None => {
                    let c = flow.horizon(&x);
                    if c < remaining {
                        return Err(Error::HorizonExceeded { t: remaining, horizon: c });
                    }
                    break;
                }
            }
        }
        Ok(Skeleton {
            x0: x0.clone(),
            events,
            horizon,
            status,
        })
    }
}

/// Evaluate the flow, absorbing rounding overshoots of the horizon.
pub fn eval_clamped(flow: &dyn Flow, x: &State, t: f64) -> Result<State> {
    let c = flow.horizon(x);
    if t > c && t <= c + 1e-12 * c.max(1.0) {
        return flow.eval(x, c);
    }
    flow.eval(x, t.max(0.0))
}

impl Skeleton {
    /// Largest distance between a stored pre-jump state and the flow of the
    /// previous post-jump state over the elapsed time.
    pub fn consistency_error(&self, model: &PdmpModel) -> Result<f64> {
        let mut worst: f64 = 0.0;
        let (mut t, mut x) = (0.0, &self.x0);
        for e in &self.events {
            let y = eval_clamped(model.flow.as_ref(), x, e.time - t)?;
            worst = worst.max(y.distance(&e.pre));
            t = e.time;
            x = &e.post;
        }
        Ok(worst)
    }

    pub fn jump_count(&self) -> usize {
        self.events.len()
    }

    pub fn exploded(&self) -> bool {
        self.status == PathStatus::Exploded
    }

    /// Index of the active segment at `t`: the number of events with `τₙ <= t`.
    pub fn active_index(&self, t: f64) -> usize {
        self.events.partition_point(|e| e.time <= t)
    }

    fn segment_start(&self, n: usize) -> (f64, &State) {
        if n == 0 {
            (0.0, &self.x0)
        } else {
            let e = &self.events[n - 1];
            (e.time, &e.post)
        }
    }

    /// Flow segments covering `(0, t]`. A segment closed by an event has the
    /// simulated holding time as its length.
    pub fn segments(&self, t: f64) -> Vec<Segment<'_>> {
        let n = self.active_index(t);
        let mut out = Vec::with_capacity(n + 1);
        for k in 0..n {
            let (start_time, start_state) = self.segment_start(k);
            out.push(Segment {
                start_time,
                start_state,
                length: self.events[k].holding,
                ends_in_jump: true,
            });
        }
        let (start_time, start_state) = self.segment_start(n);
        if t > start_time {
            out.push(Segment {
                start_time,
                start_state,
                length: t - start_time,
                ends_in_jump: false,
            });
        }
        out
    }

    /// `X_t`.
    pub fn path_state(&self, model: &PdmpModel, t: f64) -> Result<State> {
        let n = self.active_index(t);
        let (start, x) = self.segment_start(n);
        if t == start {
            return Ok(x.clone());
        }
        eval_clamped(model.flow.as_ref(), x, t - start)
    }

    /// `X_t⁻`: the pre-jump state at event times, `X_t` elsewhere.
    pub fn path_state_pre(&self, model: &PdmpModel, t: f64) -> Result<State> {
        if t > 0.0 {
            let n = self.active_index(t);
            if n > 0 && self.events[n - 1].time == t {
                return Ok(self.events[n - 1].pre.clone());
            }
        }
        self.path_state(model, t)
    }

    /// `L(a)_t`: `a` restarted at every jump and summed over segments.
    pub fn eval_l(&self, a: &PathFunctional, model: &PdmpModel, t: f64) -> Result<f64> {
        let flow = model.flow.as_ref();
        self.segments(t).iter().try_fold(0.0, |acc, seg| {
            let len = seg.length.min(flow.horizon(seg.start_state));
            Ok(acc + a.eval(flow, seg.start_state, len, PATH_TOL)?)
        })
    }
}

/// `L(a)_t` along a skeleton.
pub fn eval_l(a: &PathFunctional, skeleton: &Skeleton, model: &PdmpModel, t: f64) -> Result<f64> {
    skeleton.eval_l(a, model, t)
}
