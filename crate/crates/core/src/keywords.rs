//! Task keyword sets shared by the website and front-matter selectors.

use crate::records::Task;

pub fn keywords(task: Task) -> &'static [&'static str] {
    match task {
        Task::Counts => &["submission", "submitted", "accepted", "acceptance rate"],
        Task::Roles => &["organizing committee", "organisation committee", "chairs"],
        Task::PcMembers => &["program committee", "programme committee", "senior"],
        Task::Deadlines => &["important dates", "deadline", "due"],
        Task::Sponsors => &["sponsor", "supporters", "sponsored by"],
        Task::Awards => &["award", "best paper", "prize"],
        Task::Papers | Task::Authorships => &[],
    }
}

/// Case-insensitive occurrences of any task keyword in `text`.
pub fn occurrences(task: Task, text: &str) -> usize {
    let lower = text.to_lowercase();
    keywords(task).iter().map(|k| lower.matches(k).count()).sum()
}

/// Keyword occurrences per 1,000 characters of `heading` plus `body`.
pub fn score(task: Task, heading: Option<&str>, body: &str) -> f64 {
    let heading = heading.unwrap_or("");
    let chars = heading.chars().count() + body.chars().count();
    if chars == 0 {
        return 0.0;
    }
    let hits = occurrences(task, heading) + occurrences(task, body);
    hits as f64 * 1000.0 / chars as f64
}

/// Indices of items with a positive score, best first; ties keep input order.
pub fn rank_by_score(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] > 0.0).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_orders() {
        let a = score(Task::Deadlines, Some("Important Dates"), "Paper deadline: May 9");
        let b = score(Task::Deadlines, None, &format!("{} deadline", "x".repeat(500)));
        assert!(a > b && b > 0.0);
        assert_eq!(score(Task::Deadlines, None, "nothing here"), 0.0);
        assert_eq!(rank_by_score(&[0.0, 2.0, 5.0, 2.0]), [2, 1, 3]);
    }
}
