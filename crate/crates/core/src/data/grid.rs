use chrono::{NaiveDate, NaiveDateTime, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The 15-minute interval grid of a service day.
///
/// Intervals are indexed 1..=T. Interval `t` covers the half-open span
/// `[start + (t-1)*len, start + t*len)`. With the standard 06:00-24:00 day
/// and 15-minute intervals, T = 72 and 06:00:00 maps to interval 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalGrid {
    /// Service start, seconds since midnight.
    pub start_sec: u32,
    /// Service end, seconds since midnight (86400 = 24:00).
    pub end_sec: u32,
    /// Interval length in seconds.
    pub interval_sec: u32,
}

impl IntervalGrid {
    pub fn new(start_sec: u32, end_sec: u32, interval_sec: u32) -> Result<Self> {
        if interval_sec == 0 || end_sec <= start_sec {
            return Err(Error::Config(format!(
                "degenerate interval grid [{start_sec}, {end_sec}) step {interval_sec}"
            )));
        }
        if (end_sec - start_sec) % interval_sec != 0 {
            return Err(Error::Config(format!(
                "service span {} s is not a whole number of {} s intervals",
                end_sec - start_sec,
                interval_sec
            )));
        }
        Ok(IntervalGrid {
            start_sec,
            end_sec,
            interval_sec,
        })
    }

    /// The standard grid: 06:00-24:00 in 15-minute intervals, T = 72.
    pub fn standard() -> Self {
        IntervalGrid {
            start_sec: 6 * 3600,
            end_sec: 24 * 3600,
            interval_sec: 15 * 60,
        }
    }

    /// Number of intervals T in a service day.
    pub fn len(&self) -> usize {
        ((self.end_sec - self.start_sec) / self.interval_sec) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// 1-based interval index of a time within service hours:
    /// `t = floor((time - start) / interval) + 1`.
    pub fn interval_of(&self, ts: NaiveDateTime) -> Result<usize> {
        let sec = ts.time().num_seconds_from_midnight();
        self.interval_of_sec(sec)
            .ok_or(Error::OutsideServiceHours(ts))
    }

    /// Same rule on raw seconds-since-midnight; `None` outside service hours.
    pub fn interval_of_sec(&self, sec: u32) -> Option<usize> {
        if sec < self.start_sec || sec >= self.end_sec {
            return None;
        }
        Some(((sec - self.start_sec) / self.interval_sec) as usize + 1)
    }

    /// Half-open span `[a, b)` of interval `t`, seconds since midnight.
    pub fn span_sec(&self, t: usize) -> (u32, u32) {
        debug_assert!(t >= 1 && t <= self.len());
        let a = self.start_sec + (t as u32 - 1) * self.interval_sec;
        (a, a + self.interval_sec)
    }

    /// Wall-clock start of interval `t` on `day`.
    pub fn interval_start(&self, day: NaiveDate, t: usize) -> NaiveDateTime {
        let (a, _) = self.span_sec(t);
        day.and_time(NaiveTime::from_num_seconds_from_midnight_opt(a, 0).unwrap())
    }

    /// Overlap in seconds between `[from, to]` (seconds since midnight) and
    /// interval `t`.
    pub fn overlap_sec(&self, t: usize, from: u32, to: u32) -> u32 {
        let (a, b) = self.span_sec(t);
        let lo = from.max(a);
        let hi = to.min(b);
        hi.saturating_sub(lo)
    }
}
