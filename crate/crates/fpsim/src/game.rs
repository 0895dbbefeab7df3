//! Payoff matrices, mixed strategies, best responses, duality gap, the 2x2
//! closed-form Nash solution, and the without-loss-of-generality
//! normalization to the zero-determinant normal form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tiebreak::{argmax_index, Tiebreaker};

/// Strict-inequality margin used by the normal-form predicate, relative to
/// the matrix scale.
const NORMAL_FORM_MARGIN: f64 = 1e-12;

/// Real m x n payoff matrix (payoff to Player 1), with the two scale
/// constants every bound in this crate is phrased in: the largest absolute
/// entry `a_max`, and the smallest absolute difference `a_gap` between two
/// entries with distinct values. For a matrix whose entries are all equal,
/// `a_gap` is 0 and the energy bounds that divide by it do not apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameMatrix {
    entries: Vec<f64>, // row-major
    m: usize,
    n: usize,
    a_max: f64,
    a_gap: f64,
}

impl GameMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::DimensionMismatch("empty payoff matrix".into()));
        }
        let n = rows[0].len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch("ragged payoff matrix".into()));
        }
        let m = rows.len();
        let entries: Vec<f64> = rows.into_iter().flatten().collect();
        Self::from_flat(m, n, entries)
    }

    pub fn from_flat(m: usize, n: usize, entries: Vec<f64>) -> Result<Self> {
        if m == 0 || n == 0 || entries.len() != m * n {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix needs {} entries, got {}",
                m,
                n,
                m * n,
                entries.len()
            )));
        }
        if entries.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidParameter("non-finite matrix entry".into()));
        }
        let a_max = entries.iter().fold(0.0_f64, |acc, e| acc.max(e.abs()));
        // Smallest absolute difference over pairs of entries with unequal
        // values. Computed over the sorted distinct values.
        let mut sorted = entries.clone();
        sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut a_gap = f64::INFINITY;
        for w in sorted.windows(2) {
            let d = w[1] - w[0];
            if d > 0.0 {
                a_gap = a_gap.min(d);
            }
        }
        if !a_gap.is_finite() {
            a_gap = 0.0; // all entries equal
        }
        Ok(GameMatrix {
            entries,
            m,
            n,
            a_max,
            a_gap,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    pub fn a_gap(&self) -> f64 {
        self.a_gap
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn is_2x2(&self) -> bool {
        self.m == 2 && self.n == 2
    }

    /// Entries [a, b, c, d] of a 2x2 matrix [[a, b], [c, d]].
    pub fn abcd(&self) -> Result<[f64; 4]> {
        if !self.is_2x2() {
            return Err(Error::NotTwoByTwo {
                m: self.m,
                n: self.n,
            });
        }
        Ok([self.entries[0], self.entries[1], self.entries[2], self.entries[3]])
    }

    /// A x, for x of length n. Result has length m.
    pub fn mul_col(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "A ({}x{}) * x (len {})",
                self.m,
                self.n,
                x.len()
            )));
        }
        let mut out = vec![0.0; self.m];
        for i in 0..self.m {
            let row = &self.entries[i * self.n..(i + 1) * self.n];
            out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        Ok(out)
    }

    /// A^T x, for x of length m. Result has length n.
    pub fn mul_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.m {
            return Err(Error::DimensionMismatch(format!(
                "A^T ({}x{}) * x (len {})",
                self.n,
                self.m,
                x.len()
            )));
        }
        let mut out = vec![0.0; self.n];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &self.entries[i * self.n..(i + 1) * self.n];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * xi;
            }
        }
        Ok(out)
    }

    /// det of a 2x2 matrix.
    pub fn det_2x2(&self) -> Result<f64> {
        let [a, b, c, d] = self.abcd()?;
        Ok(a * d - b * c)
    }

    /// Normal-form predicate: det A = 0 (within 1e-9 * a_max^2) and
    /// a, d > max{0, b, c} with strict margin 1e-12 relative to scale.
    pub fn satisfies_normal_form(&self) -> bool {
        let Ok([a, b, c, d]) = self.abcd() else {
            return false;
        };
        let det = a * d - b * c;
        let det_tol = 1e-9 * self.a_max * self.a_max;
        let margin = NORMAL_FORM_MARGIN * self.a_max.max(1.0);
        det.abs() <= det_tol
            && a > margin
            && d > margin
            && a > b + margin
            && a > c + margin
            && d > b + margin
            && d > c + margin
    }
}

/// Point of the probability simplex. Entries are nonnegative and sum to 1
/// within 1e-12; the vertices are exactly the standard basis vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedStrategy {
    probs: Vec<f64>,
}

impl MixedStrategy {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidStrategy("empty strategy vector".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidStrategy(format!(
                "entries must be finite and nonnegative: {probs:?}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidStrategy(format!(
                "entries sum to {sum}, expected 1"
            )));
        }
        Ok(MixedStrategy { probs })
    }

    /// Standard basis vector e_i in dimension d.
    pub fn vertex(d: usize, i: usize) -> Result<Self> {
        if i >= d {
            return Err(Error::InvalidStrategy(format!(
                "vertex index {i} out of range for dimension {d}"
            )));
        }
        let mut probs = vec![0.0; d];
        probs[i] = 1.0;
        Ok(MixedStrategy { probs })
    }

    pub fn uniform(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidStrategy("dimension 0".into()));
        }
        Ok(MixedStrategy {
            probs: vec![1.0 / d as f64; d],
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    /// Some(i) iff this is exactly the basis vector e_i.
    pub fn vertex_index(&self) -> Option<usize> {
        let mut idx = None;
        for (i, &p) in self.probs.iter().enumerate() {
            if p == 1.0 {
                if idx.is_some() {
                    return None;
                }
                idx = Some(i);
            } else if p != 0.0 {
                return None;
            }
        }
        idx
    }
}

/// Result of normalizing a 2x2 game to the zero-determinant normal form:
/// an additive shift of every entry, an optional global negation, and an
/// optional relabeling of Player 2's strategies (column swap). The
/// transformed game has the same interior equilibrium as the original, up
/// to the recorded column permutation, and coupled tiebreak streams yield
/// identical play on both.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalizedGame {
    pub original: GameMatrix,
    pub transformed: GameMatrix,
    pub shift: f64,
    pub negated: bool,
    pub columns_swapped: bool,
}

impl NormalizedGame {
    /// Map a Player-2 strategy index of the transformed game back to the
    /// original labeling.
    pub fn unpermute_col(&self, j: usize) -> usize {
        if self.columns_swapped {
            1 - j
        } else {
            j
        }
    }
}

/// Tie tolerance for standalone best responses: relative to the matrix
/// scale, so repeated payoff accumulation does not change the semantics.
pub fn tie_tolerance(a: &GameMatrix) -> f64 {
    1e-9 * a.a_max
}

/// Vertex strategy attaining the maximum of <e_i, payoff>. Ties within the
/// tolerance are resolved by the tiebreaker.
pub fn best_response(
    a: &GameMatrix,
    payoff: &[f64],
    tb: &mut Tiebreaker,
) -> Result<MixedStrategy> {
    if payoff.is_empty() {
        return Err(Error::EmptyVector("best_response"));
    }
    if payoff.len() != a.m() && payoff.len() != a.n() {
        return Err(Error::DimensionMismatch(format!(
            "payoff vector of length {} matches neither player dimension ({}, {})",
            payoff.len(),
            a.m(),
            a.n()
        )));
    }
    let idx = argmax_index(payoff, tie_tolerance(a), tb, 0)?;
    MixedStrategy::vertex(payoff.len(), idx)
}

pub(crate) fn dg_raw(a: &GameMatrix, x1: &[f64], x2: &[f64]) -> Result<f64> {
    let ax2 = a.mul_col(x2)?;
    let atx1 = a.mul_row(x1)?;
    let hi = ax2.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = atx1.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(hi - lo)
}

/// Duality gap of a joint profile:
/// max_{x1'} <x1', A x2> - min_{x2'} <x2', A^T x1>. Zero exactly at Nash
/// equilibria, nonnegative everywhere.
pub fn duality_gap(a: &GameMatrix, x1: &MixedStrategy, x2: &MixedStrategy) -> Result<f64> {
    if x1.dim() != a.m() || x2.dim() != a.n() {
        return Err(Error::DimensionMismatch(format!(
            "profile ({}, {}) vs {}x{} game",
            x1.dim(),
            x2.dim(),
            a.m(),
            a.n()
        )));
    }
    dg_raw(a, x1.probs(), x2.probs())
}

/// Closed-form interior equilibrium of a 2x2 game [[a,b],[c,d]]:
/// x1* = ((d-c)/D, (a-b)/D), x2* = ((d-b)/D, (a-c)/D) with D = a+d-(b+c).
/// Rejects degenerate (D ~ 0) and non-interior cases.
pub fn nash_2x2(a: &GameMatrix) -> Result<(MixedStrategy, MixedStrategy)> {
    let [aa, bb, cc, dd] = a.abcd()?;
    let denom = aa + dd - (bb + cc);
    let scale = a.a_max().max(1.0);
    if denom.abs() <= 1e-12 * scale {
        return Err(Error::Degenerate(format!(
            "a+d-(b+c) = {denom} is numerically zero"
        )));
    }
    let coords = [
        (dd - cc) / denom,
        (aa - bb) / denom,
        (dd - bb) / denom,
        (aa - cc) / denom,
    ];
    if coords.iter().any(|&v| v <= 0.0 || v >= 1.0) {
        return Err(Error::NonInterior(format!(
            "equilibrium coordinates {coords:?} not strictly inside (0,1)"
        )));
    }
    let x1 = MixedStrategy::new(vec![coords[0], 1.0 - coords[0]])?;
    let x2 = MixedStrategy::new(vec![coords[2], 1.0 - coords[2]])?;
    Ok((x1, x2))
}

/// Normalize a 2x2 game with unique interior equilibrium to the normal
/// form (det = 0, and a, d > max{0, b, c}).
///
/// The additive shift k = -det A / (a+d-(b+c)) zeroes the determinant:
/// expanding det(A + k*1) = det A + k*(a+d-b-c) forces this denominator.
/// A shifted game with det 0 and an interior equilibrium already has
/// a, d > max{0, b, c} whenever a+d-(b+c) > 0; when a+d-(b+c) < 0 a column
/// swap (relabeling Player 2's strategies) flips its sign, so the swap
/// alone restores the normal form and play is preserved exactly up to the
/// recorded permutation. A global negation is therefore never required;
/// the flag is kept for interface stability and recorded as false.
pub fn normalize_2x2(a: &GameMatrix) -> Result<NormalizedGame> {
    nash_2x2(a)?; // rejects games without a unique interior equilibrium
    let [aa, bb, cc, dd] = a.abcd()?;
    let denom = aa + dd - (bb + cc);
    let det = aa * dd - bb * cc;
    let shift = -det / denom;

    let shifted = [aa + shift, bb + shift, cc + shift, dd + shift];
    let swapped_denom = shifted[0] + shifted[3] - (shifted[1] + shifted[2]);
    let (vals, columns_swapped) = if swapped_denom > 0.0 {
        (shifted, false)
    } else {
        // swap columns: [[a,b],[c,d]] -> [[b,a],[d,c]]
        ([shifted[1], shifted[0], shifted[3], shifted[2]], true)
    };
    let transformed = GameMatrix::from_flat(2, 2, vals.to_vec())?;
    if !transformed.satisfies_normal_form() {
        return Err(Error::NotNormalForm(format!(
            "normalization produced {vals:?}, which fails the predicate"
        )));
    }
    Ok(NormalizedGame {
        original: a.clone(),
        transformed,
        shift,
        negated: false,
        columns_swapped,
    })
}

/// Subspace slopes rho_1 = (d-c)/(a-b) and rho_2 = (d-b)/(a-c) of a
/// normal-form matrix; both strictly positive.
pub fn rho_params(a: &GameMatrix) -> Result<(f64, f64)> {
    let [aa, bb, cc, dd] = a.abcd()?;
    if !a.satisfies_normal_form() {
        return Err(Error::NotNormalForm(
            "rho parameters require the zero-determinant normal form".into(),
        ));
    }
    let scale = a.a_max().max(1.0);
    if (aa - bb).abs() <= 1e-12 * scale || (aa - cc).abs() <= 1e-12 * scale {
        return Err(Error::Degenerate(
            "a = b or a = c: no interior equilibrium".into(),
        ));
    }
    let rho1 = (dd - cc) / (aa - bb);
    let rho2 = (dd - bb) / (aa - cc);
    if rho1 <= 0.0 || rho2 <= 0.0 {
        return Err(Error::Degenerate(format!(
            "rho parameters must be positive, got ({rho1}, {rho2})"
        )));
    }
    Ok((rho1, rho2))
}

/// The Matching Pennies matrix [[1,-1],[-1,1]].
pub fn matching_pennies() -> GameMatrix {
    GameMatrix::from_rows(vec![vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap()
}
