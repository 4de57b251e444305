//! Smoothed log-odds with a symmetric additive prior.
//!
//! With `x~ = x + alpha` per token and `N~ = sum over the shared universe of x~`:
//!
//! ```text
//! delta = ln(x~+ / (N~+ - x~+)) - ln(x~- / (N~- - x~-))
//! z     = delta / sqrt(1/x~+ + 1/x~-)
//! ```

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub const DEFAULT_ALPHA: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenStats {
    pub token: String,
    pub x_pos: u64,
    pub x_neg: u64,
    pub delta: f64,
    pub z: f64,
    /// distinct support units among positive-class units containing the token
    pub support_pos: usize,
}

/// Smoothed class totals for a token universe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothedTotals {
    pub pos: f64,
    pub neg: f64,
    pub alpha: f64,
}

impl SmoothedTotals {
    pub fn new(raw_pos: u64, raw_neg: u64, universe: usize, alpha: f64) -> Self {
        let mass = alpha * universe as f64;
        SmoothedTotals { pos: raw_pos as f64 + mass, neg: raw_neg as f64 + mass, alpha }
    }

    pub fn delta_z(&self, x_pos: u64, x_neg: u64) -> (f64, f64) {
        let xp = x_pos as f64 + self.alpha;
        let xn = x_neg as f64 + self.alpha;
        let delta = (xp / (self.pos - xp)).ln() - (xn / (self.neg - xn)).ln();
        let z = delta / (1.0 / xp + 1.0 / xn).sqrt();
        (delta, z)
    }
}

/// Log-odds for every token in the union of both count maps. Tokens listed
/// with a zero count still belong to the universe.
pub fn log_odds_z(pos: &BTreeMap<String, u64>, neg: &BTreeMap<String, u64>, alpha: f64) -> Vec<TokenStats> {
    assert!(alpha > 0.0, "smoothing prior must be positive");
    let universe: BTreeSet<&String> = pos.keys().chain(neg.keys()).collect();
    let totals = SmoothedTotals::new(pos.values().sum(), neg.values().sum(), universe.len(), alpha);
    universe
        .into_iter()
        .map(|t| {
            let x_pos = pos.get(t).copied().unwrap_or(0);
            let x_neg = neg.get(t).copied().unwrap_or(0);
            let (delta, z) = totals.delta_z(x_pos, x_neg);
            TokenStats { token: t.clone(), x_pos, x_neg, delta, z, support_pos: 0 }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn map(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn symmetric_counts_give_zero() {
        let m = map(&[("a", 3), ("b", 7), ("c", 0)]);
        for s in log_odds_z(&m, &m, 0.01) {
            assert_eq!(s.delta, 0.0);
            assert_eq!(s.z, 0.0);
        }
    }

    #[test]
    fn hand_evaluated_example() {
        // token "t": 5 of 100 positive, 1 of 100 negative
        let pos = map(&[("t", 5), ("rest", 95)]);
        let neg = map(&[("t", 1), ("rest", 99)]);
        let stats = log_odds_z(&pos, &neg, 0.01);
        let t = stats.iter().find(|s| s.token == "t").unwrap();
        assert_abs_diff_eq!(t.delta, 1.643, epsilon = 1e-3);
        assert_abs_diff_eq!(t.z, 1.506, epsilon = 1e-3);
        assert!(t.delta.signum() == t.z.signum());
    }

    #[test]
    fn absent_token_in_universe_has_zero_delta() {
        let pos = map(&[("a", 4), ("ghost", 0)]);
        let neg = map(&[("a", 4)]);
        let ghost = log_odds_z(&pos, &neg, 0.01).into_iter().find(|s| s.token == "ghost").unwrap();
        assert_eq!(ghost.delta, 0.0);
    }
}
