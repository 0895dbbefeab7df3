//! Tiebreaking rules for argmax selections. Ties may be broken
//! deterministically (lexicographic), randomly (seeded), or adaptively via
//! a caller-supplied callback. The callback sees only the tied index set,
//! the step number, and the player id, so adversarial rules cannot depend
//! on unobservable state and every decision stream is replayable.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Decision callback: (tied indices, step, player id) -> chosen index.
pub type TiebreakFn = Arc<dyn Fn(&[usize], u64, u8) -> usize + Send + Sync>;

/// How argmax ties are resolved.
#[derive(Clone)]
pub enum TiebreakRule {
    /// Lowest tied index wins.
    Lexicographic,
    /// Uniform choice among tied indices from a seeded stream. Equal seeds
    /// (and equal player ids) produce identical decision streams.
    SeededRandom(u64),
    /// Arbitrary (possibly adversarial) decision function.
    Callback(TiebreakFn),
}

impl TiebreakRule {
    /// Adversarial rule that always takes the last tied index.
    pub fn always_last() -> Self {
        TiebreakRule::Callback(Arc::new(|tied, _, _| *tied.last().unwrap()))
    }
}

impl fmt::Debug for TiebreakRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TiebreakRule::Lexicographic => write!(f, "Lexicographic"),
            TiebreakRule::SeededRandom(s) => write!(f, "SeededRandom({s})"),
            TiebreakRule::Callback(_) => write!(f, "Callback(..)"),
        }
    }
}

enum TiebreakerKind {
    Lexicographic,
    Seeded(ChaCha8Rng),
    Callback(TiebreakFn),
}

/// Stateful tiebreak decision stream for one player (or one choice map).
///
/// An optional relabeling couples decision streams across strategy
/// permutations: the tied set is mapped back to original labels before the
/// rule is consulted and the choice is mapped forward again. This is what
/// "running with the same tiebreak decision stream" means for a game whose
/// columns have been permuted.
pub struct Tiebreaker {
    kind: TiebreakerKind,
    player: u8,
    /// `relabel[current_index] = original_index`
    relabel: Option<Vec<usize>>,
}

impl Tiebreaker {
    pub fn new(rule: &TiebreakRule, player: u8) -> Self {
        let kind = match rule {
            TiebreakRule::Lexicographic => TiebreakerKind::Lexicographic,
            TiebreakRule::SeededRandom(seed) => {
                TiebreakerKind::Seeded(stream_rng(*seed, u64::from(player)))
            }
            TiebreakRule::Callback(f) => TiebreakerKind::Callback(Arc::clone(f)),
        };
        Tiebreaker {
            kind,
            player,
            relabel: None,
        }
    }

    /// Same decision stream, consulted through the index relabeling
    /// `relabel[current] = original`.
    pub fn with_relabel(rule: &TiebreakRule, player: u8, relabel: Vec<usize>) -> Self {
        let mut tb = Tiebreaker::new(rule, player);
        tb.relabel = Some(relabel);
        tb
    }

    /// Resolve a tie among `tied` (strictly increasing indices) at `step`.
    pub fn choose(&mut self, tied: &[usize], step: u64) -> Result<usize> {
        if tied.is_empty() {
            return Err(Error::EmptyVector("tiebreak"));
        }
        if tied.len() == 1 {
            return Ok(tied[0]);
        }
        let Some(map) = self.relabel.clone() else {
            return self.choose_raw(tied, step);
        };
        let mut original: Vec<usize> = tied.iter().map(|&i| map[i]).collect();
        original.sort_unstable();
        let picked = self.choose_raw(&original, step)?;
        let back = map
            .iter()
            .position(|&orig| orig == picked)
            .expect("relabel map must be a permutation");
        Ok(back)
    }

    fn choose_raw(&mut self, tied: &[usize], step: u64) -> Result<usize> {
        let chosen = match &mut self.kind {
            TiebreakerKind::Lexicographic => tied[0],
            TiebreakerKind::Seeded(rng) => tied[rng.random_range(0..tied.len())],
            TiebreakerKind::Callback(f) => f(tied, step, self.player),
        };
        if !tied.contains(&chosen) {
            return Err(Error::TiebreakContract {
                chosen,
                tied: tied.to_vec(),
            });
        }
        Ok(chosen)
    }
}

/// Indices whose value is within `tol` of the maximum. Values must be finite.
pub fn argmax_tied(values: &[f64], tol: f64) -> Result<Vec<usize>> {
    if values.is_empty() {
        return Err(Error::EmptyVector("argmax"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "non-finite value in argmax input".into(),
        ));
    }
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= max - tol)
        .map(|(i, _)| i)
        .collect())
}

/// Argmax with tie tolerance, resolved through the given tiebreaker.
pub fn argmax_index(
    values: &[f64],
    tol: f64,
    tb: &mut Tiebreaker,
    step: u64,
) -> Result<usize> {
    let tied = argmax_tied(values, tol)?;
    tb.choose(&tied, step)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicographic_picks_lowest() {
        let mut tb = Tiebreaker::new(&TiebreakRule::Lexicographic, 0);
        assert_eq!(tb.choose(&[1, 3, 4], 0).unwrap(), 1);
    }

    #[test]
    fn seeded_streams_replay() {
        let rule = TiebreakRule::SeededRandom(99);
        let mut a = Tiebreaker::new(&rule, 0);
        let mut b = Tiebreaker::new(&rule, 0);
        for step in 0..200 {
            let tied = [0usize, 1, 2, 3];
            assert_eq!(a.choose(&tied, step).unwrap(), b.choose(&tied, step).unwrap());
        }
    }

    #[test]
    fn callback_outside_tied_set_is_contract_violation() {
        let rule = TiebreakRule::Callback(Arc::new(|_, _, _| 17));
        let mut tb = Tiebreaker::new(&rule, 0);
        let err = tb.choose(&[0, 1], 0).unwrap_err();
        assert!(matches!(err, Error::TiebreakContract { chosen: 17, .. }));
    }

    #[test]
    fn relabel_round_trips() {
        // Column swap on a 2-strategy player: current 0 <-> original 1.
        let mut tb = Tiebreaker::with_relabel(&TiebreakRule::Lexicographic, 1, vec![1, 0]);
        // Tied set {0,1} in current labels maps to {0,1} originals; lex picks
        // original 0, which lives at current index 1.
        assert_eq!(tb.choose(&[0, 1], 5).unwrap(), 1);
    }

    #[test]
    fn argmax_respects_tolerance() {
        let tied = argmax_tied(&[1.0, 1.0 - 1e-12, 0.5], 1e-9).unwrap();
        assert_eq!(tied, vec![0, 1]);
        let tied = argmax_tied(&[1.0, 1.0 - 1e-12, 0.5], 0.0).unwrap();
        assert_eq!(tied, vec![0]);
    }
}
