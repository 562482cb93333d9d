//! Year-month arithmetic and registry date parsing.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CalendarError {
    #[error("invalid year-month {0:?}")]
    InvalidYearMonth(String),
    #[error("invalid date {0:?}")]
    InvalidDate(String),
    #[error("invalid month window {0:?}")]
    InvalidWindow(String),
}

/// A calendar month. Ordered chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct YearMonth {
    year: i32,
    month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self, CalendarError> {
        if !(1..=12).contains(&month) {
            return Err(CalendarError::InvalidYearMonth(format!("{year}-{month}")));
        }
        Ok(Self { year, month })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u32 {
        self.month
    }

    /// Months since year 0, used for differences and offsets.
    fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    fn from_ordinal(ord: i64) -> Self {
        Self {
            year: ord.div_euclid(12) as i32,
            month: (ord.rem_euclid(12) + 1) as u32,
        }
    }

    pub fn add_months(self, n: i64) -> Self {
        Self::from_ordinal(self.ordinal() + n)
    }

    pub fn succ(self) -> Self {
        self.add_months(1)
    }

    pub fn pred(self) -> Self {
        self.add_months(-1)
    }

    /// Signed number of months from `earlier` to `self`.
    pub fn months_since(self, earlier: YearMonth) -> i64 {
        self.ordinal() - earlier.ordinal()
    }

    /// Calendar quarter, 1..=4.
    pub fn quarter(self) -> u32 {
        (self.month - 1) / 3 + 1
    }

    pub fn of_date(date: NaiveDate) -> Self {
        Self {
            year: date.year(),
            month: date.month(),
        }
    }

    pub fn first_day(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("month validated")
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = CalendarError;

    /// Accepts `YYYY-MM`, `YYYY/MM` and `MM/YYYY`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let bad = || CalendarError::InvalidYearMonth(s.to_string());
        let (a, b) = t.split_once(['-', '/']).ok_or_else(bad)?;
        let (y, m) = if a.len() == 4 { (a, b) } else { (b, a) };
        if y.len() != 4 || m.is_empty() || m.len() > 2 {
            return Err(bad());
        }
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u32 = m.parse().map_err(|_| bad())?;
        YearMonth::new(year, month).map_err(|_| bad())
    }
}

impl TryFrom<String> for YearMonth {
    type Error = CalendarError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<YearMonth> for String {
    fn from(ym: YearMonth) -> String {
        ym.to_string()
    }
}

/// Inclusive range of months.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthWindow {
    pub start: YearMonth,
    pub end: YearMonth,
}

impl MonthWindow {
    pub fn new(start: YearMonth, end: YearMonth) -> Result<Self, CalendarError> {
        if end < start {
            return Err(CalendarError::InvalidWindow(format!("{start}:{end}")));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, ym: YearMonth) -> bool {
        self.start <= ym && ym <= self.end
    }

    pub fn len(&self) -> usize {
        (self.end.months_since(self.start) + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn months(&self) -> impl Iterator<Item = YearMonth> + '_ {
        (0..self.len() as i64).map(move |i| self.start.add_months(i))
    }
}

impl fmt::Display for MonthWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start, self.end)
    }
}

impl FromStr for MonthWindow {
    type Err = CalendarError;

    /// `YYYY-MM:YYYY-MM`
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| CalendarError::InvalidWindow(s.to_string()))?;
        MonthWindow::new(a.parse()?, b.parse()?)
    }
}

/// Accepted textual date layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DateFormat {
    /// `YYYY-MM-DD`
    #[default]
    Iso,
    /// `DD/MM/YYYY`, the registry bulk product layout.
    DayMonthYear,
}

impl DateFormat {
    pub fn parse(self, raw: &str) -> Result<NaiveDate, CalendarError> {
        let fmt = match self {
            DateFormat::Iso => "%Y-%m-%d",
            DateFormat::DayMonthYear => "%d/%m/%Y",
        };
        NaiveDate::parse_from_str(raw.trim(), fmt)
            .map_err(|_| CalendarError::InvalidDate(raw.to_string()))
    }
}

impl FromStr for DateFormat {
    type Err = CalendarError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "iso" | "ymd" => Ok(DateFormat::Iso),
            "dmy" | "day-month-year" => Ok(DateFormat::DayMonthYear),
            _ => Err(CalendarError::InvalidDate(s.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_wraps_years() {
        let ym: YearMonth = "2019-11".parse().unwrap();
        assert_eq!(ym.add_months(3).to_string(), "2020-02");
        assert_eq!(ym.add_months(-11).to_string(), "2018-12");
        assert_eq!("2021-06".parse::<YearMonth>().unwrap().months_since(ym), 19);
    }

    #[test]
    fn parses_alternate_layouts() {
        assert_eq!("01/1989".parse::<YearMonth>().unwrap().to_string(), "1989-01");
        assert!("1989-13".parse::<YearMonth>().is_err());
        assert!("".parse::<YearMonth>().is_err());
    }

    #[test]
    fn impossible_calendar_date_rejected() {
        assert!(DateFormat::DayMonthYear.parse("31/02/2020").is_err());
        assert!(DateFormat::DayMonthYear.parse("29/02/2020").is_ok());
        assert!(DateFormat::Iso.parse("2020-02-31").is_err());
    }

    #[test]
    fn window_iterates_inclusive() {
        let w: MonthWindow = "2020-03:2021-06".parse().unwrap();
        assert_eq!(w.len(), 16);
        assert_eq!(w.months().last().unwrap().to_string(), "2021-06");
        assert!("2021-06:2020-03".parse::<MonthWindow>().is_err());
    }
}
