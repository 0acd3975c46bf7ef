use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::Epsilon;

/// The slice of the dataset a query reads.
///
/// Spends on [`Scope::Whole`] compose sequentially with everything. Parts of
/// the same `family` are pairwise disjoint, so within a family only the most
/// expensive part counts; different families compose sequentially.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Whole,
    Part { family: String, part: u64 },
}

impl Scope {
    pub fn part(family: impl Into<String>, part: u64) -> Self {
        Scope::Part {
            family: family.into(),
            part,
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Whole => f.write_str("all"),
            Scope::Part { family, part } => write!(f, "{family}-{part}"),
        }
    }
}

/// One recorded spend of `budget / share`.
///
/// Keeping the share separate lets `τ` spends of `ε/τ` compose back to exactly
/// `ε`, which a float sum of `ε/τ` does not guarantee.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spend {
    pub scope: Scope,
    pub budget: Epsilon,
    pub share: u32,
}

impl Spend {
    pub fn epsilon(&self) -> f64 {
        self.budget.value() / f64::from(self.share)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetLedger {
    total_budget: Epsilon,
    entries: Vec<Spend>,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Sequential composition of spends on one scope.
fn sequential_cost<'a>(spends: impl Iterator<Item = &'a Spend>) -> f64 {
    let mut groups: BTreeMap<(u64, u32), u64> = BTreeMap::new();
    for s in spends {
        *groups
            .entry((s.budget.value().to_bits(), s.share))
            .or_default() += 1;
    }
    groups
        .into_iter()
        .map(|((bits, share), count)| {
            let budget = f64::from_bits(bits);
            let g = gcd(count, u64::from(share));
            let (num, den) = (count / g, u64::from(share) / g);
            if den == 1 {
                budget * num as f64
            } else {
                budget * num as f64 / den as f64
            }
        })
        .sum()
}

impl BudgetLedger {
    pub fn new(total_budget: Epsilon) -> Self {
        BudgetLedger {
            total_budget,
            entries: Vec::new(),
        }
    }

    pub fn total_budget(&self) -> Epsilon {
        self.total_budget
    }

    pub fn entries(&self) -> &[Spend] {
        &self.entries
    }

    #[must_use]
    pub fn record(self, scope: Scope, eps: Epsilon) -> Self {
        self.record_share(scope, eps, 1)
    }

    /// Record a spend of `budget / share`.
    #[must_use]
    pub fn record_share(mut self, scope: Scope, budget: Epsilon, share: u32) -> Self {
        assert!(share > 0, "share must be positive");
        self.entries.push(Spend {
            scope,
            budget,
            share,
        });
        self
    }

    /// Total privacy cost of everything recorded so far.
    pub fn composed_cost(&self) -> f64 {
        let mut by_scope: BTreeMap<&Scope, Vec<&Spend>> = BTreeMap::new();
        for s in &self.entries {
            by_scope.entry(&s.scope).or_default().push(s);
        }
        let mut whole = 0.0;
        let mut families: BTreeMap<&str, f64> = BTreeMap::new();
        for (scope, spends) in by_scope {
            let cost = sequential_cost(spends.into_iter());
            match scope {
                Scope::Whole => whole += cost,
                Scope::Part { family, .. } => {
                    let worst = families.entry(family.as_str()).or_insert(0.0);
                    *worst = worst.max(cost);
                }
            }
        }
        whole + families.values().sum::<f64>()
    }

    /// `true` iff the composed cost fits in the total budget.
    pub fn within_budget(&self) -> bool {
        self.composed_cost() <= self.total_budget.value()
    }
}
