use nalgebra::DVector;

use crate::error::{dim_err, Error, Result};
use crate::scalar::Real;

/// Ordered output-space waypoints ending in a goal disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Mission<T: Real> {
    pub waypoints: Vec<DVector<T>>,
    pub piece_of_waypoint: Vec<usize>,
    pub goal_center: DVector<T>,
    pub goal_radius: T,
    pub goal_piece: usize,
    pub switch_radius: T,
    cursor: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionStatus<T: Real> {
    pub target: DVector<T>,
    pub piece: usize,
    pub done: bool,
    /// Index of the active waypoint; equals the waypoint count once the goal is targeted.
    pub cursor: usize,
}

impl<T: Real> Mission<T> {
    pub fn new(
        waypoints: Vec<DVector<T>>,
        piece_of_waypoint: Vec<usize>,
        goal_center: DVector<T>,
        goal_radius: T,
        goal_piece: usize,
        switch_radius: T,
    ) -> Result<Self> {
        if waypoints.len() != piece_of_waypoint.len() {
            return Err(dim_err("Mission pieces", waypoints.len(), piece_of_waypoint.len()));
        }
        if let Some(w) = waypoints.iter().find(|w| w.len() != goal_center.len()) {
            return Err(dim_err("Mission waypoint", goal_center.len(), w.len()));
        }
        if !(goal_radius > T::zero()) || !(switch_radius > T::zero()) {
            return Err(Error::InvalidArgument("mission radii must be positive".into()));
        }
        Ok(Self {
            waypoints,
            piece_of_waypoint,
            goal_center,
            goal_radius,
            goal_piece,
            switch_radius,
            cursor: 0,
        })
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn reset(&mut self) {
        self.cursor = 0;
    }

    fn status(&self, done: bool) -> MissionStatus<T> {
        let (target, piece) = match self.waypoints.get(self.cursor) {
            Some(w) => (w.clone(), self.piece_of_waypoint[self.cursor]),
            None => (self.goal_center.clone(), self.goal_piece),
        };
        MissionStatus {
            target,
            piece,
            done,
            cursor: self.cursor,
        }
    }

    /// Current target without moving the cursor.
    pub fn current(&self) -> MissionStatus<T> {
        self.status(false)
    }

    pub fn in_goal(&self, ybar: &DVector<T>) -> bool {
        (ybar - &self.goal_center).norm() <= self.goal_radius
    }

    /// Like [`advance_mission`], but only moves on when `accept` admits the
    /// piece of the next target.
    pub fn advance_if(&mut self, ybar: &DVector<T>, accept: impl Fn(usize) -> bool) -> MissionStatus<T> {
        if self.in_goal(ybar) {
            return self.status(true);
        }
        if let Some(w) = self.waypoints.get(self.cursor) {
            if (ybar - w).norm() <= self.switch_radius {
                let next = self.piece_of_waypoint.get(self.cursor + 1).copied().unwrap_or(self.goal_piece);
                if accept(next) {
                    self.cursor += 1;
                }
            }
        }
        self.status(false)
    }
}

/// Moves to the next waypoint once `ȳ` is within the switch radius of the
/// active one; reports `done` inside the goal disk.
pub fn advance_mission<T: Real>(m: &mut Mission<T>, ybar: &DVector<T>) -> MissionStatus<T> {
    m.advance_if(ybar, |_| true)
}
