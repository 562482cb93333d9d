use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    bai_perron, chow_test_at, cusum_test_with, pettitt_test, zivot_andrews_with, BreakError, BreakResult, BreakTest, ChowModel,
    CusumKind, ZaOptions,
};
use crate::calendar::{MonthWindow, YearMonth};
use crate::ts::MonthlySeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryConfig {
    pub cusum: CusumKind,
    pub chow_candidate: YearMonth,
    pub chow_model: ChowModel,
    pub max_breaks: usize,
    pub min_segment: f64,
    pub zivot_andrews: ZaOptions,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig {
            cusum: CusumKind::default(),
            chow_candidate: YearMonth::new(2020, 3).expect("valid month"),
            chow_model: ChowModel::default(),
            max_breaks: 3,
            min_segment: 0.15,
            zivot_andrews: ZaOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryRow {
    pub series: String,
    pub test: BreakTest,
    pub outcome: Result<BreakResult, BreakError>,
}

fn run_one(test: BreakTest, series: &MonthlySeries, cfg: &BatteryConfig) -> Result<BreakResult, BreakError> {
    match test {
        BreakTest::Cusum => cusum_test_with(series, cfg.cusum),
        BreakTest::Chow => chow_test_at(series, cfg.chow_candidate, cfg.chow_model),
        BreakTest::BaiPerron => bai_perron(series, cfg.max_breaks, cfg.min_segment),
        BreakTest::Pettitt => pettitt_test(series),
        BreakTest::ZivotAndrews => zivot_andrews_with(series, &cfg.zivot_andrews),
    }
}

/// Every test on every named series. A failing test yields an error row and
/// the rest still run. Rows are ordered by series, then test.
pub fn run_battery(series: &[(String, MonthlySeries)], cfg: &BatteryConfig) -> Vec<BatteryRow> {
    let jobs: Vec<(usize, BreakTest)> = (0..series.len())
        .flat_map(|i| BreakTest::ALL.into_iter().map(move |t| (i, t)))
        .collect();
    jobs.into_par_iter()
        .map(|(i, test)| {
            let (name, s) = &series[i];
            BatteryRow {
                series: name.clone(),
                test,
                outcome: run_one(test, s, cfg),
            }
        })
        .collect()
}

/// Subtracts calendar-month means estimated over `window`.
pub fn seasonally_adjust(series: &MonthlySeries, window: MonthWindow) -> Result<MonthlySeries, BreakError> {
    let mut sums = [0.0; 12];
    let mut counts = [0usize; 12];
    for (month, v) in series.months().zip(&series.values) {
        if window.contains(month) {
            let k = month.month() as usize - 1;
            sums[k] += v;
            counts[k] += 1;
        }
    }
    if let Some(k) = counts.iter().position(|&c| c == 0) {
        return Err(BreakError::InvalidArgument(format!(
            "window {window} has no observation for calendar month {}",
            k + 1
        )));
    }
    let values = series
        .months()
        .zip(&series.values)
        .map(|(month, v)| {
            let k = month.month() as usize - 1;
            v - sums[k] / counts[k] as f64
        })
        .collect();
    Ok(MonthlySeries::new(series.start, values, series.period)?)
}

/// Each series followed by its seasonally adjusted version, named
/// `"<name> (seasonally adjusted)"`.
pub fn with_seasonal_adjustment(
    series: &[(String, MonthlySeries)],
    window: MonthWindow,
) -> Result<Vec<(String, MonthlySeries)>, BreakError> {
    let mut out = Vec::with_capacity(series.len() * 2);
    for (name, s) in series {
        out.push((name.clone(), s.clone()));
        out.push((format!("{name} (seasonally adjusted)"), seasonally_adjust(s, window)?));
    }
    Ok(out)
}

/// Columns `series, test, statistic, break_date, p_or_decision`. Several
/// break dates are joined with `;`. Error rows leave the statistic empty.
pub fn write_battery_csv<W: Write>(rows: &[BatteryRow], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["series", "test", "statistic", "break_date", "p_or_decision"])?;
    for row in rows {
        let test = row.test.name();
        match &row.outcome {
            Ok(r) => {
                let dates: Vec<String> = r.break_dates.iter().map(ToString::to_string).collect();
                let decision = match r.p_value {
                    Some(p) => format!("p={p:.6}"),
                    None if r.reject => "break".to_string(),
                    None => "no break".to_string(),
                };
                w.write_record([
                    row.series.as_str(),
                    test,
                    &format!("{:.6}", r.statistic),
                    &dates.join(";"),
                    &decision,
                ])?;
            }
            Err(e) => w.write_record([row.series.as_str(), test, "", "", &format!("error: {e}")])?,
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ym(y: i32, m: u32) -> YearMonth {
        YearMonth::new(y, m).unwrap()
    }

    #[test]
    fn one_failing_test_gives_an_error_row() {
        let y: Vec<f64> = (0..25).map(|t| if t < 14 { 1.0 } else { 4.0 } + ((t * 5) % 3) as f64).collect();
        let s = MonthlySeries::monthly(ym(2019, 1), y).unwrap();
        let rows = run_battery(&[("opened".to_string(), s)], &BatteryConfig::default());
        assert_eq!(rows.len(), 5);
        let errors: Vec<_> = rows.iter().filter(|r| r.outcome.is_err()).map(|r| r.test).collect();
        assert_eq!(errors, vec![BreakTest::ZivotAndrews]);
        let mut buf = Vec::new();
        write_battery_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.contains("opened,zivot-andrews,,,\"error: Zivot-Andrews needs at least 30"), "{text}");
    }

    #[test]
    fn adjustment_removes_monthly_means() {
        let pattern = [5.0, 1.0, 3.0, 2.0, 8.0, 9.0, 4.0, 6.0, 7.0, 0.0, 2.0, 1.0];
        let s = MonthlySeries::monthly(ym(2018, 1), (0..36).map(|t| 100.0 + pattern[t % 12]).collect()).unwrap();
        let window = MonthWindow::new(ym(2018, 1), ym(2019, 12)).unwrap();
        let adj = seasonally_adjust(&s, window).unwrap();
        assert!(adj.values.iter().all(|v| v.abs() < 1e-12));
        let short = MonthWindow::new(ym(2018, 1), ym(2018, 6)).unwrap();
        assert!(seasonally_adjust(&s, short).is_err());
        let both = with_seasonal_adjustment(&[("closed".into(), s)], window).unwrap();
        assert_eq!(both[1].0, "closed (seasonally adjusted)");
    }
}
