//! Uniform time grid on `[0, T]`.
//!
//! Every solver, quadrature, and dataset in this crate lives on one shared
//! uniform grid. The grid owns the rounding conventions: how many steps a
//! span contains, and when a time is considered to lie exactly on a node.

use crate::error::{Error, Result};

/// Relative tolerance for deciding that a time sits exactly on a grid node.
pub const NODE_SNAP_REL: f64 = 1e-12;

/// A uniform time grid from `t_start` to `t_end` with step `dt`.
///
/// `t_start` is always 0 in practice (trajectories start at the first
/// measurement), but is kept as a field so grid arithmetic stays explicit.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    /// Build a grid over `[0, t_end]` with step `dt`.
    ///
    /// `dt` must divide the span: `n_steps = round(span/dt)` must reproduce
    /// the span to within `1e-12 · t_end`, otherwise the grid is rejected.
    pub fn new(t_end: f64, dt: f64) -> Result<Self> {
        Self::with_start(0.0, t_end, dt)
    }

    pub fn with_start(t_start: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Config(format!(
                "grid step must be positive, got {dt}"
            )));
        }
        if !(t_end > t_start) || !t_end.is_finite() || !t_start.is_finite() {
            return Err(Error::Config(format!(
                "grid needs t_end > t_start, got [{t_start}, {t_end}]"
            )));
        }
        let span = t_end - t_start;
        let n_steps = (span / dt).round() as usize;
        if n_steps == 0 || (n_steps as f64 * dt - span).abs() >= NODE_SNAP_REL * t_end.abs() {
            return Err(Error::Config(format!(
                "grid step {dt} does not divide the span [{t_start}, {t_end}]"
            )));
        }
        Ok(TimeGrid {
            t_start,
            t_end,
            dt,
            n_steps,
        })
    }

    /// Time of node `k`.
    #[inline]
    pub fn node_time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt
    }

    /// Number of nodes (`n_steps + 1`).
    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    /// Index of the node at time `t`, if `t` lies on a node within
    /// `snap_rel · dt`. Times that fall between nodes return `None`.
    pub fn node_index(&self, t: f64, snap_rel: f64) -> Option<usize> {
        let u = (t - self.t_start) / self.dt;
        let k = u.round();
        if k < 0.0 || k > self.n_steps as f64 {
            return None;
        }
        if (u - k).abs() <= snap_rel.max(NODE_SNAP_REL) {
            Some(k as usize)
        } else {
            None
        }
    }

    /// True if `t` lies inside `[t_start, t_end + 1e-12]`.
    #[inline]
    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_start && t <= self.t_end + NODE_SNAP_REL * self.t_end.abs().max(1.0)
    }
}
