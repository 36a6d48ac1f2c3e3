use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike, Weekday};

use crate::ontology::{OntologyDocument, ShiftDef};

/// Simulated time zero: a Monday at midnight. Every tick is one minute from
/// here; no wall-clock time enters a run.
pub fn sim_epoch() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2025, 1, 6)
        .expect("valid epoch date")
        .and_hms_opt(0, 0, 0)
        .expect("valid epoch time")
}

/// Exported for consumers that format or parse run timestamps.
pub const SIM_EPOCH: &str = "2025-01-06T00:00:00";

/// Shift windows, operating days, break windows, and the weekly preventive
/// maintenance window, all derived from the snapshot. A tick is productive
/// iff it falls inside a shift on an operating day and outside breaks and
/// the PM window.
#[derive(Debug, Clone)]
pub struct FactoryCalendar {
    shifts: Vec<ShiftDef>,
    operating: Vec<Weekday>,
    /// Per shift: [start, end) of the mid-shift break.
    breaks: Vec<(u32, u32)>,
    /// PM occupies the first operating day's first shift from its start.
    pm_day: Weekday,
    pm_window: (u32, u32),
}

fn weekday_of(name: &str) -> Weekday {
    match name {
        "Mon" => Weekday::Mon,
        "Tue" => Weekday::Tue,
        "Wed" => Weekday::Wed,
        "Thu" => Weekday::Thu,
        "Fri" => Weekday::Fri,
        "Sat" => Weekday::Sat,
        "Sun" => Weekday::Sun,
        other => panic!("unknown operating day '{other}' (validated at load)"),
    }
}

impl FactoryCalendar {
    pub fn from_document(doc: &OntologyDocument) -> Self {
        let shifts = doc.shifts.clone();
        let operating: Vec<Weekday> = doc.operating_days.iter().map(|d| weekday_of(d)).collect();
        let breaks = shifts
            .iter()
            .map(|s| {
                let mid = (s.start_min + s.end_min) / 2;
                let half = doc.break_duration_min / 2;
                (mid - half, mid - half + doc.break_duration_min)
            })
            .collect();
        let first_shift = &shifts[0];
        let pm_minutes = doc.weekly_pm_hours * 60;
        let pm_window = (first_shift.start_min, (first_shift.start_min + pm_minutes).min(first_shift.end_min));
        // The first operating day in Mon..Sun order hosts the PM window.
        let week = [Weekday::Mon, Weekday::Tue, Weekday::Wed, Weekday::Thu, Weekday::Fri, Weekday::Sat, Weekday::Sun];
        let pm_day = *week
            .iter()
            .find(|d| operating.contains(d))
            .expect("at least one operating day (validated at load)");
        FactoryCalendar { shifts, operating, breaks, pm_day, pm_window }
    }

    pub fn datetime_of_tick(&self, tick: u64) -> NaiveDateTime {
        sim_epoch() + chrono::Duration::minutes(tick as i64)
    }

    pub fn timestamp_of_tick(&self, tick: u64) -> String {
        self.datetime_of_tick(tick).format("%Y-%m-%dT%H:%M:%S").to_string()
    }

    pub fn is_operating_day(&self, date: NaiveDate) -> bool {
        self.operating.contains(&date.weekday())
    }

    /// Shift covering this minute of day, if any.
    pub fn shift_at(&self, minute_of_day: u32) -> Option<&ShiftDef> {
        self.shifts
            .iter()
            .find(|s| minute_of_day >= s.start_min && minute_of_day < s.end_min)
    }

    fn in_break(&self, minute_of_day: u32) -> bool {
        self.shifts.iter().zip(&self.breaks).any(|(s, (lo, hi))| {
            minute_of_day >= s.start_min && minute_of_day < s.end_min && minute_of_day >= *lo && minute_of_day < *hi
        })
    }

    fn in_pm_window(&self, weekday: Weekday, minute_of_day: u32) -> bool {
        weekday == self.pm_day && minute_of_day >= self.pm_window.0 && minute_of_day < self.pm_window.1
    }

    pub fn is_productive_tick(&self, tick: u64) -> bool {
        let dt = self.datetime_of_tick(tick);
        let minute = dt.hour() * 60 + dt.minute();
        self.is_operating_day(dt.date())
            && self.shift_at(minute).is_some()
            && !self.in_break(minute)
            && !self.in_pm_window(dt.weekday(), minute)
    }

    /// Productive minutes in one calendar day (PM window excluded on the PM day).
    pub fn productive_minutes(&self, date: NaiveDate) -> u32 {
        if !self.is_operating_day(date) {
            return 0;
        }
        let mut total = 0;
        for (s, (blo, bhi)) in self.shifts.iter().zip(&self.breaks) {
            total += s.end_min - s.start_min;
            total -= bhi - blo;
            if date.weekday() == self.pm_day {
                // Break and PM windows may overlap; subtract only the non-break PM span.
                let pm = self.pm_window;
                let overlap_shift = pm.1.min(s.end_min).saturating_sub(pm.0.max(s.start_min));
                let overlap_break = pm.1.min(*bhi).saturating_sub(pm.0.max(*blo));
                total -= overlap_shift - overlap_break;
            }
        }
        total
    }

    pub fn operating_days_in(&self, days: u32) -> u32 {
        (0..days)
            .filter(|d| self.is_operating_day(sim_epoch().date() + chrono::Duration::days(i64::from(*d))))
            .count() as u32
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::load_builtin;

    fn cal() -> FactoryCalendar {
        FactoryCalendar::from_document(&load_builtin("aerospace").unwrap())
    }

    #[test]
    fn epoch_is_a_monday() {
        assert_eq!(sim_epoch().date().weekday(), Weekday::Mon);
    }

    #[test]
    fn weekend_is_not_productive() {
        let cal = cal();
        // Tick 5 days in (Saturday) at 10:00.
        let tick = 5 * 1440 + 10 * 60;
        assert!(!cal.is_productive_tick(tick));
    }

    #[test]
    fn pm_window_blocks_monday_morning() {
        let cal = cal();
        // Monday 06:30: inside the 4h PM window that starts with shift 1.
        assert!(!cal.is_productive_tick(6 * 60 + 30));
        // Monday 11:00: PM over, shift 1 active, outside break.
        assert!(cal.is_productive_tick(11 * 60));
        // Tuesday 06:30 is plain production time.
        assert!(cal.is_productive_tick(1440 + 6 * 60 + 30));
    }

    #[test]
    fn breaks_are_not_productive() {
        let cal = cal();
        // Tuesday shift 1 runs 06:00-14:00; its 30 min break is centered at 10:00.
        assert!(!cal.is_productive_tick(1440 + 10 * 60));
        assert!(cal.is_productive_tick(1440 + 9 * 60));
    }

    #[test]
    fn off_shift_is_not_productive() {
        let cal = cal();
        assert!(!cal.is_productive_tick(1440 + 3 * 60));
        assert!(!cal.is_productive_tick(1440 + 23 * 60));
    }

    #[test]
    fn productive_minutes_accounting() {
        let cal = cal();
        let monday = sim_epoch().date();
        let tuesday = monday + chrono::Duration::days(1);
        // Two 8h shifts minus two 30 min breaks.
        assert_eq!(cal.productive_minutes(tuesday), 2 * 480 - 2 * 30);
        // Monday also loses the 4h PM window, 15 min of which already
        // overlaps the first shift's break (PM 06:00-10:00, break 09:45-10:15).
        assert_eq!(cal.productive_minutes(monday), 2 * 480 - 2 * 30 - 240 + 15);
        let saturday = monday + chrono::Duration::days(5);
        assert_eq!(cal.productive_minutes(saturday), 0);
    }

    #[test]
    fn thirty_days_has_22_operating_days() {
        assert_eq!(cal().operating_days_in(30), 22);
    }
}
