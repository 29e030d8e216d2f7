//! Group summary tables: mean and standard deviation of the pooled belief
//! for every (method, combination) row and expert group column.

use std::fmt::Write as _;

use thiserror::Error;

use crate::aggregate::{combine, summarize, AggregateError, Combination, ExpertSummary};
use crate::elicitation::{BeliefDistribution, Mode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReportError {
    #[error("group {0:?} has no sessions")]
    EmptyGroup(String),
    #[error("group {group:?}: {source}")]
    Aggregate { group: String, source: AggregateError },
}

/// Beliefs of one expert group under one elicitation method.
#[derive(Debug, Clone)]
pub struct GroupBeliefs {
    pub group: String,
    pub mode: Mode,
    pub beliefs: Vec<BeliefDistribution>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportCell {
    pub group: String,
    pub mode: Mode,
    pub combination: Combination,
    pub summary: ExpertSummary,
}

/// Pools each group by sum and by product.
pub fn build_cells(groups: &[GroupBeliefs]) -> Result<Vec<ReportCell>, ReportError> {
    let mut cells = Vec::new();
    for g in groups {
        if g.beliefs.is_empty() {
            return Err(ReportError::EmptyGroup(g.group.clone()));
        }
        for how in [Combination::Sum, Combination::Prod] {
            let pooled = combine(&g.beliefs, how)
                .map_err(|source| ReportError::Aggregate { group: g.group.clone(), source })?;
            cells.push(ReportCell { group: g.group.clone(), mode: g.mode, combination: how, summary: summarize(&pooled) });
        }
    }
    Ok(cells)
}

/// Three significant digits: 0.243, 0.0890, 1.20.
pub fn sig3(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x:.2}");
    }
    let decimals = (2 - x.abs().log10().floor() as i32).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding can carry into a new digit, e.g. 0.09996 -> 0.1000
    let reparsed: f64 = s.parse().unwrap_or(x);
    if reparsed != 0.0 && reparsed.abs().log10().floor() != x.abs().log10().floor() {
        let decimals = decimals.saturating_sub(1);
        return format!("{x:.decimals$}");
    }
    s
}

/// CSV table: one row per (method, combination), a mean and sd column per group.
///
/// Groups appear in first-seen order; missing cells are left blank.
pub fn format_table(cells: &[ReportCell]) -> String {
    let mut groups: Vec<&str> = Vec::new();
    for c in cells {
        if !groups.contains(&c.group.as_str()) {
            groups.push(&c.group);
        }
    }
    let mut out = String::from("method,combination");
    for g in &groups {
        let _ = write!(out, ",{g} mean,{g} sd");
    }
    out.push('\n');
    for mode in [Mode::Veri, Mode::Pari] {
        for how in [Combination::Sum, Combination::Prod] {
            let row: Vec<Option<&ReportCell>> = groups
                .iter()
                .map(|g| cells.iter().find(|c| c.mode == mode && c.combination == how && c.group == *g))
                .collect();
            if row.iter().all(Option::is_none) {
                continue;
            }
            let _ = write!(out, "{mode},{how}");
            for cell in row {
                match cell {
                    Some(c) => {
                        let _ = write!(out, ",{},{}", sig3(c.summary.mean), sig3(c.summary.sd));
                    }
                    None => out.push_str(",,"),
                }
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_significant_digits() {
        assert_eq!(sig3(0.243), "0.243");
        assert_eq!(sig3(0.089), "0.0890");
        assert_eq!(sig3(0.0847), "0.0847");
        assert_eq!(sig3(0.09996), "0.100");
        assert_eq!(sig3(1.2), "1.20");
        assert_eq!(sig3(123.4), "123");
        assert_eq!(sig3(0.0), "0.00");
    }
}
