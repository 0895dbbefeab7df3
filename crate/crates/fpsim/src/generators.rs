//! Payoff-matrix families and random initializations used by the
//! experiment harness: Matching Pennies, identity matrices, generalized
//! Rock-Paper-Scissors, uniform random matrices, and a random family of
//! normal-form 2x2 games. All randomness is seeded and replayable.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{matching_pennies, GameMatrix, MixedStrategy};
use crate::rng::stream_rng;

/// Description of a payoff-matrix family instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GameSpec {
    MatchingPennies,
    Identity { n: usize },
    Rps { n: usize, scale: f64 },
    RandomUnit { n: usize, seed: u64 },
    Assumption41Random { seed: u64 },
}

impl GameSpec {
    pub fn family_name(&self) -> &'static str {
        match self {
            GameSpec::MatchingPennies => "matching_pennies",
            GameSpec::Identity { .. } => "identity",
            GameSpec::Rps { .. } => "rps",
            GameSpec::RandomUnit { .. } => "random_unit",
            GameSpec::Assumption41Random { .. } => "a41_random",
        }
    }
}

/// Build the payoff matrix described by `spec`.
pub fn make(spec: &GameSpec) -> Result<GameMatrix> {
    match spec {
        GameSpec::MatchingPennies => Ok(matching_pennies()),
        GameSpec::Identity { n } => {
            if *n < 2 {
                return Err(Error::InvalidParameter(format!(
                    "identity family needs n >= 2, got {n}"
                )));
            }
            let rows = (0..*n)
                .map(|i| (0..*n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
            GameMatrix::from_rows(rows)
        }
        GameSpec::Rps { n, scale } => {
            if *n < 3 {
                return Err(Error::InvalidParameter(format!(
                    "rps family needs n >= 3, got {n}"
                )));
            }
            if !scale.is_finite() || *scale <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "rps scale must be positive, got {scale}"
                )));
            }
            let rows = (0..*n)
                .map(|i| {
                    (0..*n)
                        .map(|j| {
                            if j == (i + 1) % n {
                                -scale
                            } else if (j + 1) % n == i {
                                *scale
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect();
            GameMatrix::from_rows(rows)
        }
        GameSpec::RandomUnit { n, seed } => {
            if *n < 2 {
                return Err(Error::InvalidParameter(format!(
                    "random family needs n >= 2, got {n}"
                )));
            }
            let mut rng = stream_rng(*seed, 0);
            // entries drawn row-major
            let entries: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>()).collect();
            GameMatrix::from_flat(*n, *n, entries)
        }
        GameSpec::Assumption41Random { seed } => assumption41_random(*seed),
    }
}

/// Random normal-form 2x2 game: a, d uniform in [1, 2], c uniform in
/// [-2, -0.1], b = ad/c. Then det = 0, a, d > 0 > b, c, and the interior
/// equilibrium exists by construction; numerically degenerate draws are
/// rejected and resampled from follow-on streams.
fn assumption41_random(seed: u64) -> Result<GameMatrix> {
    for attempt in 0..64 {
        let mut rng = stream_rng(seed, attempt);
        let a = 1.0 + rng.random::<f64>();
        let d = 1.0 + rng.random::<f64>();
        let c = -2.0 + 1.9 * rng.random::<f64>();
        let b = a * d / c;
        let Ok(g) = GameMatrix::from_flat(2, 2, vec![a, b, c, d]) else {
            continue;
        };
        if g.satisfies_normal_form() && crate::game::nash_2x2(&g).is_ok() {
            return Ok(g);
        }
    }
    Err(Error::Degenerate(format!(
        "no valid normal-form draw from seed {seed} after 64 attempts"
    )))
}

/// Uniform-normalized random point of the n-simplex: v ~ U[0,1]^n,
/// returned as v / |v|_1. Deterministic per seed.
pub fn random_simplex(n: usize, seed: u64) -> Result<MixedStrategy> {
    if n == 0 {
        return Err(Error::InvalidParameter("simplex dimension 0".into()));
    }
    let mut rng = stream_rng(seed, 0);
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let norm: f64 = v.iter().sum();
        if norm <= 0.0 {
            continue; // all-zero draw has probability zero but costs nothing to guard
        }
        let mut probs: Vec<f64> = v.iter().map(|x| x / norm).collect();
        // force an exact unit sum so the strategy validates bit-for-bit
        let correction: f64 = 1.0 - probs.iter().sum::<f64>();
        let last = probs.len() - 1;
        probs[last] += correction;
        if probs[last] >= 0.0 {
            return MixedStrategy::new(probs);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{nash_2x2, rho_params};

    #[test]
    fn rps3_matches_closed_form() {
        let g = make(&GameSpec::Rps { n: 3, scale: 1.0 }).unwrap();
        let want = [
            [0.0, -1.0, 1.0],
            [1.0, 0.0, -1.0],
            [-1.0, 1.0, 0.0],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(g.get(i, j), want[i][j], "({i},{j})");
            }
        }
    }

    #[test]
    fn identity_rows_have_single_one() {
        let g = make(&GameSpec::Identity { n: 15 }).unwrap();
        for i in 0..15 {
            let ones = (0..15).filter(|&j| g.get(i, j) == 1.0).count();
            let zeros = (0..15).filter(|&j| g.get(i, j) == 0.0).count();
            assert_eq!((ones, zeros), (1, 14));
        }
    }

    #[test]
    fn rps_is_skew_symmetric_and_uniform_is_equilibrium() {
        let g = make(&GameSpec::Rps {
            n: 5,
            scale: 2.0 / 3.0,
        })
        .unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(g.get(i, j) + g.get(j, i), 0.0);
            }
        }
        let u = MixedStrategy::uniform(5).unwrap();
        let gap = crate::game::duality_gap(&g, &u, &u).unwrap();
        assert!(gap.abs() < 1e-15);
    }

    #[test]
    fn matching_pennies_is_normal_form_with_unit_rhos() {
        let g = make(&GameSpec::MatchingPennies).unwrap();
        assert!(g.satisfies_normal_form());
        assert_eq!(rho_params(&g).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn a41_draws_are_normal_form_with_interior_nash() {
        for seed in 0..200u64 {
            let g = make(&GameSpec::Assumption41Random { seed }).unwrap();
            assert!(g.satisfies_normal_form(), "seed {seed}");
            let (x1, x2) = nash_2x2(&g).unwrap();
            assert!(x1.probs().iter().all(|&p| p > 0.0 && p < 1.0));
            assert!(x2.probs().iter().all(|&p| p > 0.0 && p < 1.0));
            let (r1, r2) = rho_params(&g).unwrap();
            assert!(r1 > 0.0 && r2 > 0.0);
        }
    }

    #[test]
    fn random_unit_is_seeded_and_in_range() {
        let a = make(&GameSpec::RandomUnit { n: 4, seed: 9 }).unwrap();
        let b = make(&GameSpec::RandomUnit { n: 4, seed: 9 }).unwrap();
        let c = make(&GameSpec::RandomUnit { n: 4, seed: 10 }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for i in 0..4 {
            for j in 0..4 {
                let v = a.get(i, j);
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn random_simplex_properties() {
        for seed in 0..50u64 {
            let x = random_simplex(8, seed).unwrap();
            assert!(x.probs().iter().all(|&p| p >= 0.0));
            let sum: f64 = x.probs().iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12);
        }
        assert_eq!(
            random_simplex(6, 3).unwrap(),
            random_simplex(6, 3).unwrap()
        );
        assert_eq!(random_simplex(1, 0).unwrap().probs(), &[1.0]);
    }

    #[test]
    fn invalid_dimensions_rejected() {
        assert!(make(&GameSpec::Identity { n: 1 }).is_err());
        assert!(make(&GameSpec::Rps { n: 2, scale: 1.0 }).is_err());
    }
}
