//! Calendar structure shared by the scenario tree and the planning models:
//! years grouped into uniform periods, periods grouped into planning periods
//! and into stages.

use serde::{Deserialize, Serialize};

use crate::error::ScenError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeStructure {
    /// First modeled year (base year is `first_year - 1`).
    pub first_year: i32,
    /// Calendar years per period; all periods are the same length.
    pub years_per_period: usize,
    /// Number of periods.
    pub periods: usize,
    /// Planning period of each period (0-based, nondecreasing).
    pub planning_period_of: Vec<usize>,
    /// Stage of each period (0-based, nondecreasing).
    pub stage_of: Vec<usize>,
}

impl TimeStructure {
    /// Uniform layout: `periods` periods of `years_per_period` years,
    /// `periods_per_planning` periods per planning period, `stages` stages
    /// splitting the periods as evenly as possible (later stages absorb the
    /// remainder).
    pub fn uniform(
        first_year: i32,
        years_per_period: usize,
        periods: usize,
        periods_per_planning: usize,
        stages: usize,
    ) -> Result<Self, ScenError> {
        if years_per_period == 0 || periods == 0 || periods_per_planning == 0 || stages == 0 {
            return Err(ScenError::Validation("time structure sizes must be positive".into()));
        }
        if stages > periods {
            return Err(ScenError::Validation(format!(
                "{stages} stages over {periods} periods"
            )));
        }
        let planning_period_of = (0..periods).map(|t| t / periods_per_planning).collect();
        let base = periods / stages;
        let extra = periods % stages;
        let mut stage_of = Vec::with_capacity(periods);
        for s in 0..stages {
            let len = base + usize::from(s >= stages - extra);
            stage_of.extend(std::iter::repeat(s).take(len));
        }
        let ts = TimeStructure {
            first_year,
            years_per_period,
            periods,
            planning_period_of,
            stage_of,
        };
        ts.validate()?;
        Ok(ts)
    }

    pub fn validate(&self) -> Result<(), ScenError> {
        if self.planning_period_of.len() != self.periods || self.stage_of.len() != self.periods {
            return Err(ScenError::Validation("period map lengths disagree".into()));
        }
        for w in self.planning_period_of.windows(2) {
            if w[1] < w[0] || w[1] > w[0] + 1 {
                return Err(ScenError::Validation("planning periods must be contiguous".into()));
            }
        }
        for w in self.stage_of.windows(2) {
            if w[1] < w[0] || w[1] > w[0] + 1 {
                return Err(ScenError::Validation("stages must be contiguous".into()));
            }
        }
        if self.planning_period_of[0] != 0 || self.stage_of[0] != 0 {
            return Err(ScenError::Validation("maps must start at zero".into()));
        }
        Ok(())
    }

    pub fn num_years(&self) -> usize {
        self.periods * self.years_per_period
    }

    pub fn num_planning_periods(&self) -> usize {
        self.planning_period_of.last().map(|&l| l + 1).unwrap_or(0)
    }

    pub fn num_stages(&self) -> usize {
        self.stage_of.last().map(|&s| s + 1).unwrap_or(0)
    }

    /// Period containing the 1-based model year index.
    pub fn period_of_year(&self, year_index: usize) -> usize {
        debug_assert!(year_index >= 1 && year_index <= self.num_years());
        (year_index - 1) / self.years_per_period
    }

    /// 1-based model year indices covered by period `t`.
    pub fn years_of_period(&self, t: usize) -> std::ops::RangeInclusive<usize> {
        let start = t * self.years_per_period + 1;
        start..=(start + self.years_per_period - 1)
    }

    pub fn periods_of_stage(&self, stage: usize) -> Vec<usize> {
        (0..self.periods).filter(|&t| self.stage_of[t] == stage).collect()
    }

    pub fn periods_of_planning(&self, l: usize) -> Vec<usize> {
        (0..self.periods).filter(|&t| self.planning_period_of[t] == l).collect()
    }

    /// Discount weight of period `t`: the sum of annual factors
    /// `(1-gamma)^(year-1)` over the period's model years.
    pub fn discount_weight(&self, t: usize, gamma_annual: f64) -> f64 {
        self.years_of_period(t)
            .map(|y| (1.0 - gamma_annual).powi(y as i32 - 1))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_layout_partitions() {
        let ts = TimeStructure::uniform(2021, 5, 6, 1, 3).unwrap();
        assert_eq!(ts.num_years(), 30);
        assert_eq!(ts.num_planning_periods(), 6);
        assert_eq!(ts.num_stages(), 3);
        assert_eq!(ts.stage_of, vec![0, 0, 1, 1, 2, 2]);
        assert_eq!(ts.periods_of_stage(1), vec![2, 3]);
        assert_eq!(ts.years_of_period(0), 1..=5);
        assert_eq!(ts.period_of_year(6), 1);
    }

    #[test]
    fn annual_discount_weight_reduces_to_powers() {
        let ts = TimeStructure::uniform(2021, 1, 4, 2, 2).unwrap();
        let g = 0.03;
        for t in 0..4 {
            let w = ts.discount_weight(t, g);
            assert!((w - (1.0 - g).powi(t as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn uneven_stage_split_puts_remainder_late() {
        let ts = TimeStructure::uniform(2021, 1, 7, 1, 3).unwrap();
        assert_eq!(ts.stage_of, vec![0, 0, 1, 1, 2, 2, 2]);
    }
}
