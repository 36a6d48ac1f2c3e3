use chrono::NaiveDate;

/// Inclusive date window a period string denotes. `None` start/end filters
/// nothing: the default period is the full simulated horizon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DateWindow {
    pub start_key: String,
    pub end_key: String,
}

/// Accepted period grammars: ISO week (`2025-W03`), single day
/// (`2025-01-08`), or inclusive day range (`2025-01-06..2025-01-17`).
pub fn parse_period(text: &str) -> Result<DateWindow, String> {
    let text = text.trim();
    if let Some((year, week)) = parse_iso_week(text) {
        let start = NaiveDate::from_isoywd_opt(year, week, chrono::Weekday::Mon)
            .ok_or_else(|| format!("'{text}' is not a valid ISO week"))?;
        let end = start + chrono::Duration::days(6);
        return Ok(window(start, end));
    }
    if let Some((a, b)) = text.split_once("..") {
        let start = parse_date(a)?;
        let end = parse_date(b)?;
        if end < start {
            return Err(format!("period '{text}' ends before it starts"));
        }
        return Ok(window(start, end));
    }
    let day = parse_date(text)?;
    Ok(window(day, day))
}

fn parse_iso_week(text: &str) -> Option<(i32, u32)> {
    let (year, week) = text.split_once("-W").or_else(|| text.split_once("-w"))?;
    Some((year.parse().ok()?, week.parse().ok()?))
}

fn parse_date(text: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(text.trim(), "%Y-%m-%d")
        .map_err(|_| format!("'{}' is not a YYYY-MM-DD date", text.trim()))
}

fn window(start: NaiveDate, end: NaiveDate) -> DateWindow {
    DateWindow {
        start_key: start.format("%Y-%m-%d").to_string(),
        end_key: end.format("%Y-%m-%d").to_string(),
    }
}
