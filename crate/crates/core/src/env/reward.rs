use crate::model::ConstraintReport;

/// Constraints the convex stage owns; they never enter the reward.
pub const REWARD_EXEMPT: [usize; 3] = [5, 7, 8];

/// Violations that count against the reward.
pub fn penalised_violations(report: &ConstraintReport) -> usize {
    report.violated().into_iter().filter(|c| !REWARD_EXEMPT.contains(c)).count()
}

/// r = EE + Σ α_x·EE with α_x = −1 for each violated constraint, i.e.
/// EE·(1 − v).
pub fn compute_reward(ee: f64, report: &ConstraintReport) -> f64 {
    ee * (1.0 - penalised_violations(report) as f64)
}
