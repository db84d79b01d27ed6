//! Single-round mathematics of the all-or-nothing public goods game:
//! reward sampling, the action rule, expected utilities, payoffs, and the
//! exponential-moving-average belief update.
//!
//! All functions here are pure (any randomness comes through an explicitly
//! passed stream), so they are safe to call concurrently as long as each
//! caller owns its stream.

use rand::Rng;
use thiserror::Error;

/// An agent's trust level: its estimate of the probability that a random
/// co-player contributes. Always in `[0, 1]`.
pub type Belief = f64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("payoff exponent must be positive and finite, got {0}")]
    PayoffExponent(f64),
    #[error("learning rate must lie strictly between 0 and 1, got {0}")]
    LearningRate(f64),
}

/// The two moves available in a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Contribute,
    Defect,
}

/// Distribution of the private reward `lambda` an agent would receive if
/// everyone in its group contributed.
///
/// The reciprocal reward `1/lambda` has CDF `F(y) = y^(1/m)` on `[0, 1]`,
/// which makes `lambda >= 1` almost surely. Sampling goes by inversion:
/// `lambda = u^(-m)` with `u` uniform on `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayoffModel {
    exponent: f64,
    /// Set when the exponent is a small integer; `powi` is then used for
    /// the inversion so reward draws are bit-stable across platforms.
    int_exponent: Option<i32>,
}

impl PayoffModel {
    pub const DEFAULT_EXPONENT: f64 = 4.0;

    pub fn new(exponent: f64) -> Result<Self, ParamError> {
        if !(exponent.is_finite() && exponent > 0.0) {
            return Err(ParamError::PayoffExponent(exponent));
        }
        let int_exponent = (exponent.fract() == 0.0 && exponent <= 64.0)
            .then_some(exponent as i32);
        Ok(Self { exponent, int_exponent })
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// CDF of the reciprocal reward, `F(y) = y^(1/m)`, for `y` in `[0, 1]`.
    pub fn reciprocal_reward_cdf(&self, y: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&y));
        y.powf(1.0 / self.exponent)
    }

    /// Inversion map from a uniform draw to a reward: `u^(-m)`.
    ///
    /// `u = 1` maps to the smallest possible reward, 1.
    pub fn lambda_from_uniform(&self, u: f64) -> f64 {
        debug_assert!(u > 0.0 && u <= 1.0);
        match self.int_exponent {
            Some(m) => u.powi(-m),
            None => u.powf(-self.exponent),
        }
    }
}

impl Default for PayoffModel {
    fn default() -> Self {
        Self::new(Self::DEFAULT_EXPONENT).unwrap()
    }
}

/// Draw a private reward.
///
/// A zero uniform draw (probability ~2^-53) would map to an infinite
/// reward and is redrawn.
pub fn sample_lambda<R: Rng + ?Sized>(rng: &mut R, model: &PayoffModel) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return model.lambda_from_uniform(u);
        }
    }
}

/// The myopic action rule: contribute exactly when the expected utility of
/// contributing, `lambda * x^(k-1)`, weakly beats the sure defect payoff 1.
///
/// Ties go to Contribute; they occur with probability zero because the
/// reward distribution is continuous.
pub fn decide_action(x: Belief, group_size: usize, lambda: f64) -> Action {
    assert!(group_size >= 2, "a game needs at least 2 players, got {group_size}");
    if lambda * x.powi(group_size as i32 - 1) >= 1.0 {
        Action::Contribute
    } else {
        Action::Defect
    }
}

/// Probability that an agent with belief `x` in a group of `group_size`
/// contributes, as seen by an outside observer: `F(x^(k-1)) = x^((k-1)/m)`.
pub fn contribute_probability(x: Belief, group_size: usize, model: &PayoffModel) -> f64 {
    assert!(group_size >= 2, "a game needs at least 2 players, got {group_size}");
    x.powf((group_size - 1) as f64 / model.exponent())
}

/// Expected one-round utilities `(contribute, defect)` given the realized
/// reward. Defecting always yields exactly 1.
pub fn expected_utilities(x: Belief, group_size: usize, lambda: f64) -> (f64, f64) {
    assert!(group_size >= 2, "a game needs at least 2 players, got {group_size}");
    (lambda * x.powi(group_size as i32 - 1), 1.0)
}

/// Exponential-moving-average belief update: move `x` a fraction `alpha`
/// towards the contribution rate observed among the other `k - 1` players.
///
/// Written as `x + alpha * (observed - x)` so that both corners are exact
/// fixed points in floating point; a final clamp absorbs ulp-scale
/// excursions for interior values.
pub fn update_belief(
    x: Belief,
    alpha: f64,
    contributors_among_others: usize,
    group_size: usize,
) -> Belief {
    assert!(group_size >= 2, "a game needs at least 2 players, got {group_size}");
    assert!(
        contributors_among_others <= group_size - 1,
        "{contributors_among_others} contributors among {} others",
        group_size - 1
    );
    let observed = contributors_among_others as f64 / (group_size - 1) as f64;
    (x + alpha * (observed - x)).clamp(0.0, 1.0)
}

/// Round payoff. Defectors receive 1 no matter what; contributors receive
/// their private reward if everyone contributed and 0 otherwise.
pub fn payoff(action: Action, all_contributed: bool, lambda: f64) -> f64 {
    match action {
        Action::Defect => 1.0,
        Action::Contribute if all_contributed => lambda,
        Action::Contribute => 0.0,
    }
}

/// Validate a learning rate, which must lie strictly inside `(0, 1)`.
pub fn validate_learning_rate(alpha: f64) -> Result<f64, ParamError> {
    if alpha.is_finite() && 0.0 < alpha && alpha < 1.0 {
        Ok(alpha)
    } else {
        Err(ParamError::LearningRate(alpha))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::sim_rng;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn lambda_inversion_boundary_and_arithmetic() {
        let model = PayoffModel::default();
        assert_eq!(model.lambda_from_uniform(1.0), 1.0);
        // 0.5^-4 = 16
        assert_eq!(model.lambda_from_uniform(0.5), 16.0);
    }

    #[test]
    fn invalid_payoff_exponents_rejected() {
        assert!(PayoffModel::new(0.0).is_err());
        assert!(PayoffModel::new(-1.0).is_err());
        assert!(PayoffModel::new(f64::NAN).is_err());
        assert!(PayoffModel::new(f64::INFINITY).is_err());
    }

    #[test]
    fn sampled_reciprocal_rewards_match_cdf() {
        // Kolmogorov-Smirnov distance between the empirical CDF of 1/lambda
        // and y^(1/4) over 1e6 draws. The 99% critical value at this sample
        // size is ~0.0016, well inside the 0.005 budget.
        let model = PayoffModel::default();
        let mut rng = sim_rng(2024);
        let n = 1_000_000usize;
        let mut ys: Vec<f64> = (0..n).map(|_| 1.0 / sample_lambda(&mut rng, &model)).collect();
        ys.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks: f64 = 0.0;
        for (i, &y) in ys.iter().enumerate() {
            let f = model.reciprocal_reward_cdf(y);
            ks = ks.max((f - i as f64 / n as f64).abs());
            ks = ks.max((f - (i + 1) as f64 / n as f64).abs());
        }
        assert!(ks < 0.005, "KS distance {ks} too large");
    }

    #[test]
    fn action_rule_examples() {
        assert_eq!(decide_action(0.0, 3, 100.0), Action::Defect);
        // weak inequality at the boundary
        assert_eq!(decide_action(1.0, 3, 1.0), Action::Contribute);
        // 0.81 * 1.3 = 1.053 >= 1
        assert_eq!(decide_action(0.9, 3, 1.3), Action::Contribute);
    }

    #[test]
    #[should_panic(expected = "at least 2 players")]
    fn action_rule_rejects_solo_games() {
        decide_action(0.5, 1, 2.0);
    }

    #[test]
    fn contribute_probability_examples() {
        let model = PayoffModel::default();
        assert_eq!(contribute_probability(0.0, 2, &model), 0.0);
        assert_eq!(contribute_probability(0.0, 9, &model), 0.0);
        // with m = 4 and groups of 5 the exponent is exactly 1
        assert_eq!(contribute_probability(0.7, 5, &model), 0.7);
        // 0.81^(2/4) = sqrt(0.81) = 0.9
        assert_relative_eq!(contribute_probability(0.81, 3, &model), 0.9, epsilon = 1e-12);
    }

    #[test]
    fn expected_utility_examples() {
        assert_eq!(expected_utilities(1.0, 4, 5.0), (5.0, 1.0));
        let (uc, ud) = expected_utilities(0.5, 4, 8.0);
        assert_relative_eq!(uc, 1.0, epsilon = 1e-12);
        assert_eq!(ud, 1.0);
        assert_eq!(expected_utilities(0.0, 2, 1e3), (0.0, 1.0));
    }

    #[test]
    fn belief_update_examples() {
        // 0.5 * 0.7 + 0.3 * (2/3)
        assert_relative_eq!(update_belief(0.5, 0.3, 2, 4), 0.55, epsilon = 1e-12);
        // full agreement is an exact fixed point
        assert_eq!(update_belief(1.0, 0.3, 3, 4), 1.0);
        assert_eq!(update_belief(1.0, 0.9999, 1, 2), 1.0);
        assert_eq!(update_belief(0.0, 0.3, 0, 4), 0.0);
        // 0.8 * 0.7
        assert_relative_eq!(update_belief(0.8, 0.3, 0, 4), 0.56, epsilon = 1e-12);
    }

    #[test]
    fn payoff_examples() {
        assert_eq!(payoff(Action::Defect, false, 7.0), 1.0);
        assert_eq!(payoff(Action::Defect, true, 7.0), 1.0);
        assert_eq!(payoff(Action::Contribute, true, 7.0), 7.0);
        assert_eq!(payoff(Action::Contribute, false, 7.0), 0.0);
    }

    #[test]
    fn learning_rate_bounds() {
        assert!(validate_learning_rate(0.3).is_ok());
        assert!(validate_learning_rate(0.0).is_err());
        assert!(validate_learning_rate(1.0).is_err());
        assert!(validate_learning_rate(f64::NAN).is_err());
    }

    #[test]
    fn decision_frequency_tracks_contribute_probability() {
        // Small version of the full acceptance grid: Monte Carlo frequency
        // of Contribute within 4 standard errors of F(x^(k-1)).
        let model = PayoffModel::default();
        let mut rng = sim_rng(9);
        for &(x, k) in &[(0.3, 2usize), (0.7, 3), (0.5, 5)] {
            let trials = 20_000;
            let hits = (0..trials)
                .filter(|_| decide_action(x, k, sample_lambda(&mut rng, &model)) == Action::Contribute)
                .count();
            let p = contribute_probability(x, k, &model);
            let se = (p * (1.0 - p) / trials as f64).sqrt();
            let freq = hits as f64 / trials as f64;
            assert!(
                (freq - p).abs() <= 4.0 * se,
                "x={x} k={k}: freq {freq} vs p {p} (se {se})"
            );
        }
    }

    proptest! {
        #[test]
        fn update_stays_in_unit_interval(
            x in 0.0f64..=1.0,
            alpha in 1e-9f64..=0.999_999_999,
            k in 2usize..=50,
            c_frac in 0.0f64..=1.0,
        ) {
            let c = ((k - 1) as f64 * c_frac).floor() as usize;
            let next = update_belief(x, alpha, c.min(k - 1), k);
            prop_assert!((0.0..=1.0).contains(&next));
        }

        #[test]
        fn update_monotone_in_belief_and_observation(
            x in 0.0f64..=0.999,
            alpha in 0.01f64..=0.99,
            k in 2usize..=20,
            c in 0usize..=19,
        ) {
            let c = c.min(k - 1);
            // monotone in x (spacing large enough that rounding cannot flip it)
            let lo = update_belief(x, alpha, c, k);
            let hi = update_belief((x + 1e-6).min(1.0), alpha, c, k);
            prop_assert!(hi >= lo);
            // monotone in the contributor count
            if c + 1 <= k - 1 {
                prop_assert!(update_belief(x, alpha, c + 1, k) >= lo);
            }
        }

        #[test]
        fn contribution_probability_monotonicities(
            x in 0.001f64..=0.999,
            k in 2usize..=20,
        ) {
            let model = PayoffModel::default();
            let p = contribute_probability(x, k, &model);
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!(contribute_probability((x + 1e-6).min(1.0), k, &model) >= p - 1e-15);
            prop_assert!(contribute_probability(x, k + 1, &model) <= p + 1e-15);
        }

        #[test]
        fn decision_agrees_with_expected_utilities(
            x in 0.0f64..=1.0,
            k in 2usize..=30,
            lambda in 1.0f64..=1e6,
        ) {
            let (uc, ud) = expected_utilities(x, k, lambda);
            let expect = if uc >= ud { Action::Contribute } else { Action::Defect };
            prop_assert_eq!(decide_action(x, k, lambda), expect);
        }
    }
}
