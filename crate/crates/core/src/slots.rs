//! Fixed-width time-of-day slots used to bucket call attempts.

use chrono::{NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimeSlotGrid {
    pub start_hour: u32,
    pub end_hour: u32,
    pub slot_hours: u32,
}

impl Default for TimeSlotGrid {
    fn default() -> Self {
        Self {
            start_hour: 8,
            end_hour: 22,
            slot_hours: 2,
        }
    }
}

/// Where an attempt time falls relative to the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SlotAssignment {
    Slot(usize),
    OutsideGrid,
}

impl SlotAssignment {
    pub fn slot(self) -> Option<usize> {
        match self {
            SlotAssignment::Slot(s) => Some(s),
            SlotAssignment::OutsideGrid => None,
        }
    }
}

impl TimeSlotGrid {
    pub fn validate(&self) -> Result<()> {
        if self.slot_hours == 0 || self.end_hour <= self.start_hour || self.end_hour > 24 {
            return Err(Error::Config(format!(
                "slot grid {}..{} by {}h is empty or out of range",
                self.start_hour, self.end_hour, self.slot_hours
            )));
        }
        if (self.end_hour - self.start_hour) % self.slot_hours != 0 {
            return Err(Error::Config(format!(
                "slot grid span {}h is not a multiple of {}h",
                self.end_hour - self.start_hour,
                self.slot_hours
            )));
        }
        Ok(())
    }

    pub fn n_slots(&self) -> usize {
        ((self.end_hour - self.start_hour) / self.slot_hours) as usize
    }

    /// Times in `[start_hour, end_hour)` map to `floor((hour - start) / slot_hours)`.
    pub fn assign(&self, time: NaiveTime) -> SlotAssignment {
        let hour = time.hour();
        if hour < self.start_hour || hour >= self.end_hour {
            return SlotAssignment::OutsideGrid;
        }
        SlotAssignment::Slot(((hour - self.start_hour) / self.slot_hours) as usize)
    }

    /// First second of the day covered by `slot`.
    pub fn slot_start_seconds(&self, slot: usize) -> u32 {
        (self.start_hour + slot as u32 * self.slot_hours) * 3600
    }

    pub fn slot_len_seconds(&self) -> u32 {
        self.slot_hours * 3600
    }
}

/// Free-function form of [`TimeSlotGrid::assign`].
pub fn assign_time_slot(time: NaiveTime, grid: &TimeSlotGrid) -> SlotAssignment {
    grid.assign(time)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(h: u32, m: u32, s: u32) -> NaiveTime {
        NaiveTime::from_hms_opt(h, m, s).unwrap()
    }

    #[test]
    fn default_grid_has_seven_slots() {
        let grid = TimeSlotGrid::default();
        grid.validate().unwrap();
        assert_eq!(grid.n_slots(), 7);
    }

    #[test]
    fn slot_boundaries() {
        let grid = TimeSlotGrid::default();
        assert_eq!(grid.assign(t(9, 59, 59)), SlotAssignment::Slot(0));
        assert_eq!(grid.assign(t(8, 0, 0)), SlotAssignment::Slot(0));
        assert_eq!(grid.assign(t(10, 0, 0)), SlotAssignment::Slot(1));
        assert_eq!(grid.assign(t(20, 0, 0)), SlotAssignment::Slot(6));
        assert_eq!(grid.assign(t(21, 59, 59)), SlotAssignment::Slot(6));
        assert_eq!(grid.assign(t(7, 59, 59)), SlotAssignment::OutsideGrid);
        assert_eq!(grid.assign(t(22, 0, 0)), SlotAssignment::OutsideGrid);
    }

    #[test]
    fn rejects_uneven_grid() {
        let grid = TimeSlotGrid {
            start_hour: 8,
            end_hour: 21,
            slot_hours: 2,
        };
        assert!(grid.validate().is_err());
    }
}
