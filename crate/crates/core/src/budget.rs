//! Generator-sample accounting. The total draw count is the x-axis of every
//! convergence experiment, so each sampler charges its draws here.

/// Running count of generator samples with a per-call log.
#[derive(Debug, Clone, Default)]
pub struct BudgetLedger {
    total: u64,
    log: Vec<(String, u64)>,
}

impl BudgetLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record `n` generator draws under `tag`.
    pub fn record(&mut self, tag: &str, n: u64) {
        self.total += n;
        self.log.push((tag.to_string(), n));
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn log(&self) -> &[(String, u64)] {
        &self.log
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn additivity() {
        let mut l = BudgetLedger::new();
        l.record("train", 100);
        l.record("valid", 50);
        assert_eq!(l.total(), 150);
    }

    #[test]
    fn zero_record_is_noop_on_total() {
        let mut l = BudgetLedger::new();
        l.record("x", 0);
        assert_eq!(l.total(), 0);
        assert_eq!(l.log().len(), 1);
    }

    #[test]
    fn repeated_records_accumulate() {
        let mut l = BudgetLedger::new();
        for _ in 0..10 {
            l.record("batch", 7);
        }
        assert_eq!(l.total(), 70);
    }

    proptest! {
        // Total is the sum of log entries and invariant under reordering.
        #[test]
        fn total_matches_log_any_order(mut ns in proptest::collection::vec(0u64..10_000, 1..32)) {
            let mut fwd = BudgetLedger::new();
            for &n in &ns {
                fwd.record("t", n);
            }
            ns.reverse();
            let mut rev = BudgetLedger::new();
            for &n in &ns {
                rev.record("t", n);
            }
            let sum: u64 = fwd.log().iter().map(|(_, n)| n).sum();
            prop_assert_eq!(fwd.total(), sum);
            prop_assert_eq!(fwd.total(), rev.total());
        }
    }
}
