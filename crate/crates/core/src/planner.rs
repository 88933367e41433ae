//! Level count `L`, per-level replication counts `N_l`, the Monte Carlo
//! baseline count `N`, and cost accounting, all from an accuracy target `ε`.
//!
//! Cost is counted in units of one sampled index contributing to one output
//! entry: a level-`l` replication costs `Mˡ + Mˡ⁻¹` units (`1` at level 0)
//! times `m·d` for matrix outputs.

use std::f64::consts::E;

use crate::analysis::complexity_constants;
use crate::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_C1: f64 = 1.0;
pub const DEFAULT_C2: f64 = 1.0;

/// Values within this relative distance of an integer are treated as that
/// integer before taking a ceiling, so `ε = 0.1` style inputs do not pick up
/// an extra level or replication from rounding.
const CEIL_SLACK: f64 = 1e-9;

/// Accuracy target and constants a plan was derived from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanTarget {
    pub epsilon: f64,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelPlan {
    base: u64,
    replications: Vec<u64>,
    target: Option<PlanTarget>,
    dimension: Option<usize>,
    n_cap_applied: bool,
}

impl LevelPlan {
    /// `L` from the plain rule, `N_l` from the replication rule.
    pub fn new(epsilon: f64, base: u64, c1: f64, c2: f64) -> Result<Self> {
        let levels = plan_levels(epsilon, base, c1)?;
        Ok(Self {
            base,
            replications: plan_replications(epsilon, base, levels, c2)?,
            target: Some(PlanTarget { epsilon, c1, c2 }),
            dimension: None,
            n_cap_applied: false,
        })
    }

    /// As [`LevelPlan::new`] with `L` raised to at least `⌈log_M n⌉`.
    pub fn capped(epsilon: f64, base: u64, c1: f64, c2: f64, n: usize) -> Result<Self> {
        let levels = plan_levels_capped(epsilon, base, c1, n)?;
        Ok(Self {
            base,
            replications: plan_replications(epsilon, base, levels, c2)?,
            target: Some(PlanTarget { epsilon, c1, c2 }),
            dimension: Some(n),
            n_cap_applied: true,
        })
    }

    /// Hand-specified `N_0, …, N_L`.
    pub fn manual(base: u64, replications: Vec<u64>) -> Result<Self> {
        check_base(base)?;
        if replications.is_empty() || replications.contains(&0) {
            return Err(Error::InvalidInput("every level needs at least one replication".into()));
        }
        let plan = Self { base, replications, target: None, dimension: None, n_cap_applied: false };
        plan.finest_sample_size()?;
        Ok(plan)
    }

    /// Restricts the plan to models of length `n`.
    pub fn for_dimension(mut self, n: usize) -> Self {
        self.dimension = Some(n);
        self
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    /// `L`.
    pub fn levels(&self) -> u32 {
        (self.replications.len() - 1) as u32
    }

    /// `N_0, …, N_L`.
    pub fn replications(&self) -> &[u64] {
        &self.replications
    }

    pub fn target(&self) -> Option<PlanTarget> {
        self.target
    }

    pub fn dimension(&self) -> Option<usize> {
        self.dimension
    }

    pub fn n_cap_applied(&self) -> bool {
        self.n_cap_applied
    }

    /// `Mˡ`.
    pub fn sample_size(&self, level: u32) -> Result<u64> {
        self.base
            .checked_pow(level)
            .filter(|&s| s <= usize::MAX as u64)
            .ok_or_else(|| Error::InvalidInput(format!("{}^{level} overflows", self.base)))
    }

    /// `M^L`.
    pub fn finest_sample_size(&self) -> Result<u64> {
        self.sample_size(self.levels())
    }
}

fn check_base(base: u64) -> Result<()> {
    if base < 2 {
        return Err(Error::InvalidInput(format!("base M must be at least 2, got {base}")));
    }
    Ok(())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0 / E) {
        return Err(Error::EpsilonOutOfRange(epsilon));
    }
    Ok(())
}

fn snap_ceil(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= CEIL_SLACK * r.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// Smallest `L ≥ 0` with `M^L ≥ x`, i.e. `max(0, ⌈ln x / ln M⌉)` without the
/// rounding hazard at exact powers.
fn ceil_log(x: f64, base: u64) -> u32 {
    if x <= 1.0 + CEIL_SLACK {
        return 0;
    }
    let m = base as f64;
    let mut level = (x.ln() / m.ln()).ceil().max(0.0) as u32;
    while level > 0 && m.powi(level as i32 - 1) >= x * (1.0 - CEIL_SLACK) {
        level -= 1;
    }
    while m.powi(level as i32) < x * (1.0 - CEIL_SLACK) {
        level += 1;
    }
    level
}

/// `L = ⌈ln(2c₁²ε⁻²) / ln M⌉`, floored at 0.
pub fn plan_levels(epsilon: f64, base: u64, c1: f64) -> Result<u32> {
    check_epsilon(epsilon)?;
    check_base(base)?;
    if !(c1 > 0.0 && c1.is_finite()) {
        return Err(Error::InvalidInput(format!("c1 must be positive, got {c1}")));
    }
    Ok(ceil_log(2.0 * c1 * c1 / (epsilon * epsilon), base))
}

/// `max(plan_levels, ⌈ln n / ln M⌉)`.
pub fn plan_levels_capped(epsilon: f64, base: u64, c1: f64, n: usize) -> Result<u32> {
    let plain = plan_levels(epsilon, base, c1)?;
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    // Exact integer search for the smallest power of M reaching n.
    let mut cap = 0u32;
    let mut power: u128 = 1;
    while power < n as u128 {
        power *= base as u128;
        cap += 1;
    }
    Ok(plain.max(cap))
}

/// `N_l = ⌈2(L+1)c₂ε⁻²M⁻ˡ⌉` for `l = 0..=L`.
pub fn plan_replications(epsilon: f64, base: u64, levels: u32, c2: f64) -> Result<Vec<u64>> {
    check_epsilon(epsilon)?;
    check_base(base)?;
    if !(c2 > 0.0 && c2.is_finite()) {
        return Err(Error::InvalidInput(format!("c2 must be positive, got {c2}")));
    }
    let top = 2.0 * (levels as f64 + 1.0) * c2 / (epsilon * epsilon);
    Ok((0..=levels)
        .map(|l| (snap_ceil(top / (base as f64).powi(l as i32)) as u64).max(1))
        .collect())
}

/// `N = ⌈2c₂ε⁻²⌉`.
pub fn plan_mc_replications(epsilon: f64, c2: f64) -> Result<u64> {
    check_epsilon(epsilon)?;
    if !(c2 > 0.0 && c2.is_finite()) {
        return Err(Error::InvalidInput(format!("c2 must be positive, got {c2}")));
    }
    Ok((snap_ceil(2.0 * c2 / (epsilon * epsilon)) as u64).max(1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostReport {
    pub mlmc_cost: u64,
    pub mc_cost: u64,
    /// `c₄ε⁻²(ln ε)²`, when the plan carries a target.
    pub bound: Option<f64>,
    /// `c₆ε⁻⁴`, when the plan carries a target.
    pub mc_bound: Option<f64>,
}

/// Cost units of one replication at `level`.
pub fn level_unit_cost(base: u64, level: u32) -> u64 {
    let fine = base.pow(level);
    if level == 0 {
        fine
    } else {
        fine + base.pow(level - 1)
    }
}

/// MLMC cost `Σ N_l(Mˡ + Mˡ⁻¹)·md` against MC cost `N·M^L·md`.
pub fn predicted_cost(plan: &LevelPlan, n_mc: u64, md: u64) -> Result<CostReport> {
    if md == 0 {
        return Err(Error::InvalidInput("md must be at least 1".into()));
    }
    let base = plan.base();
    let mlmc_cost = plan
        .replications()
        .iter()
        .enumerate()
        .map(|(l, &n)| n * level_unit_cost(base, l as u32) * md)
        .sum();
    let mc_cost = n_mc * plan.finest_sample_size()? * md;
    let (bound, mc_bound) = match plan.target() {
        Some(t) => {
            let c3 = md as f64 * (1.0 + 1.0 / base as f64);
            let k = complexity_constants(t.c1, t.c2, c3, base)?;
            let ln_eps = t.epsilon.ln();
            (
                Some(k.c4 * ln_eps * ln_eps / (t.epsilon * t.epsilon)),
                Some(k.c6 / t.epsilon.powi(4)),
            )
        }
        None => (None, None),
    };
    Ok(CostReport { mlmc_cost, mc_cost, bound, mc_bound })
}
