//! Chart-ready series tables (one row per event of a series, by year).

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{admission_rate, normalize_track, TrackStats};
use crate::records::Task;
use crate::store::{EventInfo, StoreState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    AcceptanceRate,
    Participants,
    Submissions,
    Accepted,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::AcceptanceRate => "acceptance_rate",
            Metric::Participants => "participants",
            Metric::Submissions => "submissions",
            Metric::Accepted => "accepted",
        }
    }
}

impl FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.replace('-', "_").as_str() {
            "acceptance_rate" => Ok(Metric::AcceptanceRate),
            "participants" => Ok(Metric::Participants),
            "submissions" => Ok(Metric::Submissions),
            "accepted" => Ok(Metric::Accepted),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub event: String,
    pub year: i32,
    pub value: String,
}

const OVERALL: &[&str] = &["total", "overall", "all", "main"];

/// Submitted/accepted totals of an event from its exportable counts rows.
/// An explicit overall row wins; otherwise complete track rows are summed.
fn totals(state: &StoreState, event: &EventInfo) -> Option<TrackStats> {
    let mut tracks = Vec::new();
    for r in state.records_of(&event.key) {
        if r.task != Task::Counts || !r.review_state.is_exportable() {
            continue;
        }
        let num = |c: &str| r.cell(c).and_then(|v| v.parse::<u64>().ok());
        let track = normalize_track(r.cell("track").unwrap_or(""));
        tracks.push((track, num("submitted"), num("accepted")));
    }
    if let Some((_, s, a)) = tracks.iter().find(|(t, _, _)| OVERALL.contains(&t.as_str())) {
        return TrackStats::new("overall", *s, *a).ok();
    }
    let complete: Vec<_> = tracks.iter().filter_map(|(_, s, a)| Some((s.as_ref()?, a.as_ref()?))).collect();
    if complete.is_empty() {
        return None;
    }
    let s = complete.iter().map(|(s, _)| **s).sum();
    let a = complete.iter().map(|(_, a)| **a).sum();
    TrackStats::new("overall", Some(s), Some(a)).ok()
}

/// Rows for every event of `series` that has a value for `metric`.
pub fn report(state: &StoreState, series: &str, metric: Metric) -> Vec<ReportRow> {
    let series = series.to_lowercase();
    let mut rows: Vec<ReportRow> = state
        .events
        .values()
        .filter(|e| e.series == series)
        .filter_map(|e| {
            let value = match metric {
                Metric::Participants => e.participants.map(|p| p.to_string()),
                Metric::AcceptanceRate => totals(state, e).as_ref().and_then(admission_rate).map(|d| d.to_string()),
                Metric::Submissions => totals(state, e).and_then(|t| t.submitted).map(|v| v.to_string()),
                Metric::Accepted => totals(state, e).and_then(|t| t.accepted).map(|v| v.to_string()),
            }?;
            Some(ReportRow { event: e.label.clone(), year: e.year, value })
        })
        .collect();
    rows.sort_by(|a, b| (a.year, &a.event).cmp(&(b.year, &b.event)));
    rows
}

pub fn to_csv(rows: &[ReportRow], metric: Metric) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["event", "year", metric.as_str()]).expect("in-memory write");
    for r in rows {
        w.write_record([r.event.as_str(), &r.year.to_string(), &r.value]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv of utf-8 fields")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_series_is_header_only() {
        let rows = report(&StoreState::default(), "nope", Metric::AcceptanceRate);
        assert_eq!(to_csv(&rows, Metric::AcceptanceRate), "event,year,acceptance_rate\n");
    }

    #[test]
    fn participants_from_events() {
        let mut st = StoreState::default();
        for (key, year, p) in [("iswc2023", 2023, Some(500)), ("iswc2022", 2022, Some(400)), ("iswc2021", 2021, None)] {
            st.events.insert(
                key.into(),
                EventInfo { key: key.into(), series: "iswc".into(), label: key.to_uppercase(), year, participants: p },
            );
        }
        let csv = to_csv(&report(&st, "ISWC", Metric::Participants), Metric::Participants);
        assert_eq!(csv, "event,year,participants\nISWC2022,2022,400\nISWC2023,2023,500\n");
    }
}
