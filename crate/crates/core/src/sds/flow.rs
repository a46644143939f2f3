use crate::error::{Error, Result};

use super::state::{State, StateTag};

/// A semi-dynamic system `φ`: `φ_x(0) = x`, `φ_x(s + t) = φ_{φ_x(s)}(t)`,
/// right-continuous in `t`, defined on `[0, horizon(x)]`.
///
/// Implementors supply [`Flow::advance`] for `0 < t < horizon(x)`; callers go
/// through [`Flow::eval`], which handles the endpoints and the error cases.
pub trait Flow: Send + Sync {
    /// `φ_x(t)` for `0 < t < horizon(x)`.
    fn advance(&self, x: &State, t: f64) -> State;

    /// Exit time `c(x)` of the trajectory from `x`.
    fn horizon(&self, _x: &State) -> f64 {
        f64::INFINITY
    }

    /// Left limit of the trajectory at its horizon. Must be supplied whenever
    /// the horizon is finite; the default is the cemetery.
    fn boundary_limit(&self, _x: &State) -> State {
        State::cemetery()
    }

    /// Vector field at `x`, when the flow is smooth there.
    fn velocity(&self, _x: &State) -> Option<Vec<f64>> {
        None
    }

    /// True when `φ_x(t) = x` for all `t`.
    fn is_stationary(&self, _x: &State) -> bool {
        false
    }

    fn eval(&self, x: &State, t: f64) -> Result<State> {
        if x.is_cemetery() {
            return Err(Error::CemeteryInput);
        }
        if !(t >= 0.0) {
            return Err(Error::BadParameters(format!("negative flow time {t}")));
        }
        if t == 0.0 {
            return Ok(x.clone());
        }
        let horizon = self.horizon(x);
        if t > horizon {
            Err(Error::HorizonExceeded { t, horizon })
        } else if t == horizon {
            Ok(self.boundary_limit(x))
        } else {
            Ok(self.advance(x, t))
        }
    }
}

pub fn flow_eval(flow: &dyn Flow, x: &State, t: f64) -> Result<State> {
    flow.eval(x, t)
}

/// `φ_x(t) = x`: the flow of a pure jump process.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantFlow;

impl Flow for ConstantFlow {
    fn advance(&self, x: &State, _t: f64) -> State {
        x.clone()
    }

    fn velocity(&self, x: &State) -> Option<Vec<f64>> {
        Some(vec![0.0; x.coords.len()])
    }

    fn is_stationary(&self, _x: &State) -> bool {
        true
    }
}

/// A wall `coords[coord] = level` that trajectories moving towards it hit in
/// finite time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wall {
    pub coord: usize,
    pub level: f64,
}

/// Translation flow `φ_x(t) = x + v t`, optionally stopped at a wall.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFlow {
    velocity: Vec<f64>,
    wall: Option<Wall>,
}

impl LinearFlow {
    pub fn new(velocity: impl Into<Vec<f64>>) -> Self {
        Self {
            velocity: velocity.into(),
            wall: None,
        }
    }

    pub fn with_wall(mut self, coord: usize, level: f64) -> Self {
        self.wall = Some(Wall { coord, level });
        self
    }

    pub fn wall(&self) -> Option<Wall> {
        self.wall
    }

    fn translate(&self, x: &State, t: f64) -> Vec<f64> {
        x.coords
            .iter()
            .zip(&self.velocity)
            .map(|(c, v)| c + v * t)
            .collect()
    }
}

impl Flow for LinearFlow {
    fn advance(&self, x: &State, t: f64) -> State {
        State {
            tag: StateTag::Interior,
            coords: self.translate(x, t),
            label: x.label,
        }
    }

    fn horizon(&self, x: &State) -> f64 {
        match self.wall {
            Some(Wall { coord, level }) if self.velocity[coord] > 0.0 => {
                ((level - x.coord(coord)) / self.velocity[coord]).max(0.0)
            }
            _ => f64::INFINITY,
        }
    }

    fn boundary_limit(&self, x: &State) -> State {
        let Some(wall) = self.wall else {
            return State::cemetery();
        };
        let mut coords = self.translate(x, self.horizon(x));
        coords[wall.coord] = wall.level;
        State {
            tag: StateTag::Boundary,
            coords,
            label: x.label,
        }
    }

    fn velocity(&self, _x: &State) -> Option<Vec<f64>> {
        Some(self.velocity.clone())
    }

    fn is_stationary(&self, _x: &State) -> bool {
        self.velocity.iter().all(|v| *v == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_at_zero_is_identity() {
        let flow = LinearFlow::new(vec![2.0]);
        let x = State::scalar(0.125);
        assert_eq!(flow.eval(&x, 0.0).unwrap(), x);
        assert_eq!(ConstantFlow.eval(&x, 0.0).unwrap(), x);
    }

    #[test]
    fn unit_speed_flow_on_unit_interval() {
        let flow = LinearFlow::new(vec![1.0]).with_wall(0, 1.0);
        let x = State::scalar(0.5);
        assert_eq!(flow.eval(&x, 0.25).unwrap().coords, vec![0.75]);
        assert_eq!(flow.horizon(&x), 0.5);
        let at_horizon = flow.eval(&x, 0.5).unwrap();
        assert_eq!(at_horizon.tag, StateTag::Boundary);
        assert_eq!(at_horizon.coords, vec![1.0]);
    }

    #[test]
    fn horizon_and_cemetery_errors() {
        let flow = LinearFlow::new(vec![1.0]).with_wall(0, 1.0);
        let x = State::scalar(0.5);
        assert!(matches!(
            flow.eval(&x, 0.6),
            Err(Error::HorizonExceeded { .. })
        ));
        assert_eq!(
            flow.eval(&State::cemetery(), 0.1),
            Err(Error::CemeteryInput)
        );
    }

    #[test]
    fn flows_away_from_the_wall_never_exit() {
        let flow = LinearFlow::new(vec![-1.0]).with_wall(0, 1.0);
        assert_eq!(flow.horizon(&State::scalar(0.2)), f64::INFINITY);
    }
}
