use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateTag {
    Interior,
    /// Limit of a trajectory at its horizon.
    Boundary,
    /// Isolated absorbing point; carries no coordinates.
    Cemetery,
}

/// A point of the (extended) state space: a real vector with an optional
/// discrete label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub tag: StateTag,
    pub coords: Vec<f64>,
    pub label: Option<u32>,
}

impl State {
    pub fn new(coords: impl Into<Vec<f64>>) -> Self {
        Self {
            tag: StateTag::Interior,
            coords: coords.into(),
            label: None,
        }
    }

    pub fn scalar(x: f64) -> Self {
        Self::new(vec![x])
    }

    /// Pure label state (finite-state components).
    pub fn labelled(label: u32) -> Self {
        Self {
            tag: StateTag::Interior,
            coords: Vec::new(),
            label: Some(label),
        }
    }

    pub fn cemetery() -> Self {
        Self {
            tag: StateTag::Cemetery,
            coords: Vec::new(),
            label: None,
        }
    }

    pub fn with_label(mut self, label: u32) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_tag(mut self, tag: StateTag) -> Self {
        self.tag = tag;
        self
    }

    pub fn is_cemetery(&self) -> bool {
        self.tag == StateTag::Cemetery
    }

    pub fn is_boundary(&self) -> bool {
        self.tag == StateTag::Boundary
    }

    /// Coordinate `i`, or NaN when the state has no such coordinate.
    pub fn coord(&self, i: usize) -> f64 {
        self.coords.get(i).copied().unwrap_or(f64::NAN)
    }

    /// Label index, defaulting to 0 for unlabelled states.
    pub fn label_index(&self) -> usize {
        self.label.unwrap_or(0) as usize
    }

    /// Largest coordinate-wise difference, or infinity when the states are not
    /// comparable (cemetery against a point, different labels or dimensions).
    /// Boundary points compare with interior points by coordinates.
    pub fn distance(&self, other: &State) -> f64 {
        if self.is_cemetery() != other.is_cemetery()
            || self.label != other.label
            || self.coords.len() != other.coords.len()
        {
            return f64::INFINITY;
        }
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tag {
            StateTag::Cemetery => return write!(f, "Δ"),
            StateTag::Boundary => write!(f, "∂")?,
            StateTag::Interior => {}
        }
        write!(f, "(")?;
        if let Some(label) = self.label {
            write!(f, "#{label}")?;
            if !self.coords.is_empty() {
                write!(f, "; ")?;
            }
        }
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Shape shared by all components of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateDescriptor {
    pub dim: usize,
    /// Size of the label alphabet, if states carry labels.
    pub labels: Option<u32>,
}

impl StateDescriptor {
    pub fn continuous(dim: usize) -> Self {
        Self { dim, labels: None }
    }

    pub fn finite(labels: u32) -> Self {
        Self {
            dim: 0,
            labels: Some(labels),
        }
    }

    pub fn admits(&self, x: &State) -> bool {
        if x.is_cemetery() {
            return true;
        }
        let label_ok = match (self.labels, x.label) {
            (Some(n), Some(l)) => l < n,
            (None, None) => true,
            _ => false,
        };
        label_ok && x.coords.len() == self.dim
    }
}
