//! Two-dimensional reduction of the dual dynamics for normal-form 2x2
//! games. Because the dual payoff vectors satisfy y1 = (z1, -rho1*z1) and
//! y2 = (z2, -rho2*z2), the pair z = (y11, y21) carries the whole state.
//! This module provides the quadrant/boundary partition of the z-plane,
//! the choice map Q from dual vectors to joint primal vertices, the
//! piecewise-linear energy psi, the threshold B above which one optimistic
//! step cannot increase psi, and runtime checkers for the cycling
//! invariants that drive the constant-regret bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{rho_params, GameMatrix};
use crate::report::Violation;
use crate::tiebreak::Tiebreaker;

/// Cell of the z-plane partition: four open quadrant cells P1..P4, four
/// boundary rays between cyclically adjacent cells, and the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionLabel {
    P1,
    P2,
    P3,
    P4,
    P12,
    P23,
    P34,
    P41,
    Origin,
}

impl RegionLabel {
    /// Index i of the closed cell "P-hat i" = P_i union P_{i~(i+1)} that
    /// contains this region (1-based), or None for the origin.
    pub fn phat_index(self) -> Option<u8> {
        match self {
            RegionLabel::P1 | RegionLabel::P12 => Some(1),
            RegionLabel::P2 | RegionLabel::P23 => Some(2),
            RegionLabel::P3 | RegionLabel::P34 => Some(3),
            RegionLabel::P4 | RegionLabel::P41 => Some(4),
            RegionLabel::Origin => None,
        }
    }

    /// Index i for open quadrant cells only.
    pub fn open_index(self) -> Option<u8> {
        match self {
            RegionLabel::P1 => Some(1),
            RegionLabel::P2 => Some(2),
            RegionLabel::P3 => Some(3),
            RegionLabel::P4 => Some(4),
            _ => None,
        }
    }

    pub fn is_boundary(self) -> bool {
        matches!(
            self,
            RegionLabel::P12 | RegionLabel::P23 | RegionLabel::P34 | RegionLabel::P41
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RegionLabel::P1 => "P1",
            RegionLabel::P2 => "P2",
            RegionLabel::P3 => "P3",
            RegionLabel::P4 => "P4",
            RegionLabel::P12 => "P12",
            RegionLabel::P23 => "P23",
            RegionLabel::P34 => "P34",
            RegionLabel::P41 => "P41",
            RegionLabel::Origin => "origin",
        }
    }
}

impl std::fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Wraparound successor on {1,2,3,4}.
pub fn next_idx(i: u8) -> u8 {
    i % 4 + 1
}

/// Wraparound predecessor on {1,2,3,4}.
pub fn prev_idx(i: u8) -> u8 {
    (i + 2) % 4 + 1
}

/// Boundary ray P_{i~(i+1)} for 1-based i.
pub fn boundary_of(i: u8) -> RegionLabel {
    match i {
        1 => RegionLabel::P12,
        2 => RegionLabel::P23,
        3 => RegionLabel::P34,
        4 => RegionLabel::P41,
        _ => unreachable!("boundary index {i}"),
    }
}

/// Parameters of the subspace dynamics for a normal-form matrix:
/// slopes rho1, rho2; the step matrix S whose i'th column is the dual
/// increment (dy11, dy21) when the joint vertex w = e_i is played; the
/// energy matrix M whose i'th column gives psi on cell P-hat i; the energy
/// threshold B; and the crossing cap B' = 8 a_max (1 + rho1 + rho2)^2.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubspaceParams {
    pub rho1: f64,
    pub rho2: f64,
    /// Columns of S: [(b,-c), (a,-c), (a,-a), (b,-a)].
    pub s_cols: [[f64; 2]; 4],
    /// Columns of M: [(-rho1,-rho2), (-rho1,1), (1,1), (1,-rho2)].
    pub m_cols: [[f64; 2]; 4],
    pub b: f64,
    pub b_prime: f64,
    pub a_max: f64,
    pub a_gap: f64,
}

impl SubspaceParams {
    pub fn from_game(a: &GameMatrix) -> Result<Self> {
        if !a.satisfies_normal_form() {
            return Err(Error::NotNormalForm(
                "subspace parameters require det = 0 and a, d > max{0, b, c}".into(),
            ));
        }
        let (rho1, rho2) = rho_params(a)?;
        let [aa, bb, cc, _dd] = a.abcd()?;
        let s_cols = [[bb, -cc], [aa, -cc], [aa, -aa], [bb, -aa]];
        let m_cols = [[-rho1, -rho2], [-rho1, 1.0], [1.0, 1.0], [1.0, -rho2]];
        let b = threshold_b(a.a_max(), rho1, rho2)?;
        let b_prime = 8.0 * a.a_max() * (1.0 + rho1 + rho2).powi(2);
        Ok(SubspaceParams {
            rho1,
            rho2,
            s_cols,
            m_cols,
            b,
            b_prime,
            a_max: a.a_max(),
            a_gap: a.a_gap(),
        })
    }

    /// S^T M as a 4x4 array, entry (i, j) = <S_i, M_j>.
    pub fn stm(&self) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for (i, s) in self.s_cols.iter().enumerate() {
            for (j, m) in self.m_cols.iter().enumerate() {
                out[i][j] = s[0] * m[0] + s[1] * m[1];
            }
        }
        out
    }
}

/// Closed form of S^T M for a normal-form matrix [[a,b],[c,d]]. Derived by
/// expanding the inner products and eliminating with ad = bc; the (3,1)
/// entry simplifies to c - b, making the matrix skew-symmetric.
pub fn stm_closed_form(abcd: [f64; 4]) -> [[f64; 4]; 4] {
    let [a, b, c, d] = abcd;
    [
        [0.0, d - c, b - c, b - d],
        [c - d, 0.0, a - c, a - d],
        [c - b, c - a, 0.0, a - b],
        [d - b, d - a, b - a, 0.0],
    ]
}

/// Worst-case energy bound along any optimistic run:
/// 8 a_max (1 + 2 a_max / a_gap)^2.
pub fn energy_bound(a_max: f64, a_gap: f64) -> Result<f64> {
    if a_gap <= 0.0 {
        return Err(Error::InvalidParameter(
            "energy bound needs a_gap > 0 (at least two distinct entries)".into(),
        ));
    }
    Ok(8.0 * a_max * (1.0 + 2.0 * (a_max / a_gap)).powi(2))
}

/// Projection of the dual pair onto the subspace coordinates
/// z = (y1[0], y2[0]).
pub fn project(y1: &[f64], y2: &[f64]) -> [f64; 2] {
    [y1[0], y2[0]]
}

/// Exact sign-pattern classification of a z-plane point.
pub fn classify(z: [f64; 2]) -> RegionLabel {
    classify_tol(z, 0.0)
}

/// Classification with a dead-zone: coordinates within `eps` of zero are
/// routed to the boundary sets, shielding region labels from rounding
/// noise in accumulated sums.
pub fn classify_tol(z: [f64; 2], eps: f64) -> RegionLabel {
    let z1 = if z[0].abs() <= eps { 0.0 } else { z[0] };
    let z2 = if z[1].abs() <= eps { 0.0 } else { z[1] };
    match (z1 == 0.0, z2 == 0.0) {
        (true, true) => RegionLabel::Origin,
        (true, false) => {
            if z2 > 0.0 {
                RegionLabel::P23
            } else {
                RegionLabel::P41
            }
        }
        (false, true) => {
            if z1 > 0.0 {
                RegionLabel::P34
            } else {
                RegionLabel::P12
            }
        }
        (false, false) => match (z1 > 0.0, z2 > 0.0) {
            (false, false) => RegionLabel::P1,
            (false, true) => RegionLabel::P2,
            (true, true) => RegionLabel::P3,
            (true, false) => RegionLabel::P4,
        },
    }
}

/// Choice map Q: open cell P_i maps to vertex e_i; a boundary ray maps to
/// one of its two adjacent vertices via the tiebreaker; the origin maps to
/// e_1. Returns the 0-based vertex index.
pub fn q_map(z: [f64; 2], tb: &mut Tiebreaker, step: u64) -> Result<usize> {
    match classify(z) {
        RegionLabel::P1 => Ok(0),
        RegionLabel::P2 => Ok(1),
        RegionLabel::P3 => Ok(2),
        RegionLabel::P4 => Ok(3),
        RegionLabel::P12 => tb.choose(&[0, 1], step),
        RegionLabel::P23 => tb.choose(&[1, 2], step),
        RegionLabel::P34 => tb.choose(&[2, 3], step),
        RegionLabel::P41 => tb.choose(&[0, 3], step),
        RegionLabel::Origin => Ok(0),
    }
}

/// Q resolved through the per-player tiebreak streams of the full
/// dynamics: a boundary with z1 = 0 is a Player 1 tie, z2 = 0 a Player 2
/// tie. This is the coupling that makes a subspace replay reproduce a full
/// run decision for decision.
pub fn q_map_coupled(
    z: [f64; 2],
    tb1: &mut Tiebreaker,
    tb2: &mut Tiebreaker,
    step: u64,
) -> Result<usize> {
    // joint vertex from per-player strategy indices
    fn vertex(p1: usize, p2: usize) -> usize {
        match (p1, p2) {
            (0, 0) => 2, // e3
            (0, 1) => 3, // e4
            (1, 0) => 1, // e2
            (1, 1) => 0, // e1
            _ => unreachable!(),
        }
    }
    match classify(z) {
        RegionLabel::P1 => Ok(0),
        RegionLabel::P2 => Ok(1),
        RegionLabel::P3 => Ok(2),
        RegionLabel::P4 => Ok(3),
        RegionLabel::P23 => Ok(vertex(tb1.choose(&[0, 1], step)?, 0)),
        RegionLabel::P41 => Ok(vertex(tb1.choose(&[0, 1], step)?, 1)),
        RegionLabel::P34 => Ok(vertex(0, tb2.choose(&[0, 1], step)?)),
        RegionLabel::P12 => Ok(vertex(1, tb2.choose(&[0, 1], step)?)),
        RegionLabel::Origin => {
            let p1 = tb1.choose(&[0, 1], step)?;
            let p2 = tb2.choose(&[0, 1], step)?;
            Ok(vertex(p1, p2))
        }
    }
}

/// Piecewise-linear energy psi(z) = <z, M Q(z)>. The value does not depend
/// on the boundary tiebreak because adjacent columns of M agree along each
/// boundary ray, so the piecewise form is used directly.
pub fn psi(z: [f64; 2], p: &SubspaceParams) -> f64 {
    match classify(z).phat_index() {
        None => 0.0,
        Some(i) => psi_at_vertex(z, p, (i - 1) as usize),
    }
}

/// <z, M e_w> for a 0-based vertex index w.
pub fn psi_at_vertex(z: [f64; 2], p: &SubspaceParams, w: usize) -> f64 {
    let m = p.m_cols[w];
    z[0] * m[0] + z[1] * m[1]
}

/// Energy threshold of the optimistic dynamics: the exact maximum of psi
/// over the l1 ball of radius 6 a_max, namely 6 a_max max{1, rho1, rho2}.
/// Always at most the coarser cap 6 a_max (1 + rho1 + rho2).
pub fn threshold_b(a_max: f64, rho1: f64, rho2: f64) -> Result<f64> {
    if a_max <= 0.0 || rho1 <= 0.0 || rho2 <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "threshold needs positive inputs, got a_max={a_max}, rho1={rho1}, rho2={rho2}"
        )));
    }
    Ok(6.0 * a_max * 1.0_f64.max(rho1).max(rho2))
}

/// One step of the dual-only optimistic recursion:
/// z_tilde = 2 z_cur - z_prev, z_next = z_cur + S Q(z_tilde).
#[derive(Debug, Clone, Copy)]
pub struct SubspaceStep {
    pub z_tilde: [f64; 2],
    pub z_next: [f64; 2],
    pub w_next: usize,
}

pub fn step_subspace(
    z_prev: [f64; 2],
    z_cur: [f64; 2],
    p: &SubspaceParams,
    tb: &mut Tiebreaker,
    step: u64,
) -> Result<SubspaceStep> {
    let z_tilde = [2.0 * z_cur[0] - z_prev[0], 2.0 * z_cur[1] - z_prev[1]];
    let w = q_map(z_tilde, tb, step)?;
    let s = p.s_cols[w];
    Ok(SubspaceStep {
        z_tilde,
        z_next: [z_cur[0] + s[0], z_cur[1] + s[1]],
        w_next: w,
    })
}

/// As `step_subspace` but with the boundary tiebreak coupled to the
/// per-player streams of the full dynamics.
pub fn step_subspace_coupled(
    z_prev: [f64; 2],
    z_cur: [f64; 2],
    p: &SubspaceParams,
    tb1: &mut Tiebreaker,
    tb2: &mut Tiebreaker,
    step: u64,
) -> Result<SubspaceStep> {
    let z_tilde = [2.0 * z_cur[0] - z_prev[0], 2.0 * z_cur[1] - z_prev[1]];
    let w = q_map_coupled(z_tilde, tb1, tb2, step)?;
    let s = p.s_cols[w];
    Ok(SubspaceStep {
        z_tilde,
        z_next: [z_cur[0] + s[0], z_cur[1] + s[1]],
        w_next: w,
    })
}

/// Outcome of checking the cycling invariants along an optimistic
/// z-sequence. `violations` is empty iff every above-threshold step
/// satisfied the invariants, every crossing step stayed under B', and the
/// global energy bound held.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CyclingReport {
    pub steps_checked: u64,
    pub steps_above_threshold: u64,
    pub crossings: u64,
    pub max_psi: f64,
    pub max_crossing_psi: f64,
    pub violations: Vec<Violation>,
}

impl CyclingReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn in_phat(r: RegionLabel, i: u8) -> bool {
    r.phat_index() == Some(i)
}

/// Check the above-threshold cycling invariants, the one-step energy
/// decrease, the two-step exclusion regions, and the crossing cap along a
/// z-sequence produced by the optimistic dual recursion. `zs[t]` must hold
/// z^t for t = offset..; predictions are reconstructed from consecutive
/// iterates, so checks start at index offset+1.
pub fn check_cycling_invariants(zs: &[[f64; 2]], p: &SubspaceParams) -> CyclingReport {
    let mut report = CyclingReport {
        max_psi: f64::NEG_INFINITY,
        max_crossing_psi: f64::NEG_INFINITY,
        ..Default::default()
    };
    let psi_tol = 1e-9 * p.a_max.max(1.0);
    if zs.len() < 3 {
        return report;
    }
    for t in 1..zs.len() - 1 {
        let z_prev = zs[t - 1];
        let z_cur = zs[t];
        let z_next = zs[t + 1];
        let z_tilde = [2.0 * z_cur[0] - z_prev[0], 2.0 * z_cur[1] - z_prev[1]];
        let psi_cur = psi(z_cur, p);
        let psi_next = psi(z_next, p);
        report.steps_checked += 1;
        report.max_psi = report.max_psi.max(psi_cur).max(psi_next);

        // crossing cap: entering the above-threshold regime in one step
        // cannot overshoot B'
        if psi_cur <= p.b && psi_next > p.b {
            report.crossings += 1;
            report.max_crossing_psi = report.max_crossing_psi.max(psi_next);
            if psi_next > p.b_prime + psi_tol {
                report.violations.push(
                    Violation::new("crossing-cap", t as u64)
                        .detail(format!(
                            "psi jumped to {psi_next} > B' = {} from {psi_cur} <= B = {}",
                            p.b_prime, p.b
                        ))
                        .data("psi_cur", psi_cur)
                        .data("psi_next", psi_next),
                );
            }
        }

        if psi_cur <= p.b {
            continue; // invariants only claimed above the threshold
        }
        report.steps_above_threshold += 1;

        let eps = 1e-12 * p.a_max * (t as f64 + 1.0);
        let r_cur = classify_tol(z_cur, eps);
        let r_tilde = classify_tol(z_tilde, eps);
        let r_next = classify_tol(z_next, eps);
        let Some(i) = r_cur.phat_index() else {
            continue; // origin cannot be above threshold
        };
        let ip1 = next_idx(i);
        let ip2 = next_idx(ip1);
        let im1 = prev_idx(i);

        // exclusion regions for both the prediction and the true successor
        for (name, r) in [("z_tilde", r_tilde), ("z_next", r_next)] {
            let excluded = in_phat(r, ip2) || in_phat(r, im1) || r == boundary_of(ip1);
            if excluded {
                report.violations.push(
                    Violation::new("exclusion-region", t as u64)
                        .detail(format!(
                            "{name} in {r} while z^t in P-hat {i} with psi {psi_cur} > B"
                        ))
                        .data("psi_cur", psi_cur),
                );
            }
        }

        // case (i) or case (ii)
        let case_i = in_phat(r_tilde, i) && in_phat(r_next, i);
        let case_ii = r_tilde.open_index() == Some(ip1) && r_next.open_index() == Some(ip1);
        if !(case_i || case_ii) {
            report.violations.push(
                Violation::new("cycling-case", t as u64)
                    .detail(format!(
                        "z^t in P-hat {i} (psi {psi_cur} > B) but z_tilde in {r_tilde}, \
                         z_next in {r_next}: neither case (i) nor case (ii)"
                    ))
                    .data("psi_cur", psi_cur),
            );
        }

        // one-direction implications behind the case split
        if in_phat(r_tilde, i) && !in_phat(r_next, i) {
            report.violations.push(
                Violation::new("stay-implication", t as u64)
                    .detail(format!("z_tilde in P-hat {i} but z_next in {r_next}")),
            );
        }
        if r_tilde.open_index() == Some(ip1) && r_next.open_index() != Some(ip1) {
            report.violations.push(
                Violation::new("advance-implication", t as u64)
                    .detail(format!("z_tilde in P{ip1} but z_next in {r_next}")),
            );
        }

        // non-increasing energy above the threshold
        if psi_next - psi_cur > psi_tol {
            report.violations.push(
                Violation::new("energy-increase", t as u64)
                    .detail(format!(
                        "delta psi = {} > 0 above threshold (psi {psi_cur} > B = {})",
                        psi_next - psi_cur,
                        p.b
                    ))
                    .data("psi_cur", psi_cur)
                    .data("psi_next", psi_next),
            );
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::matching_pennies;
    use crate::tiebreak::TiebreakRule;

    fn mp_params() -> SubspaceParams {
        SubspaceParams::from_game(&matching_pennies()).unwrap()
    }

    fn lex() -> Tiebreaker {
        Tiebreaker::new(&TiebreakRule::Lexicographic, 0)
    }

    #[test]
    fn project_examples() {
        let p = 0.7853981633974483_f64;
        let y1 = [-1.0, 1.0];
        let y2 = [-2.0 * (2.0 * p - 1.0), 2.0 * (2.0 * p - 1.0)];
        assert_eq!(project(&y1, &y2), [-1.0, -2.0 * (2.0 * p - 1.0)]);
        assert_eq!(project(&[0.0, 0.0], &[0.0, 0.0]), [0.0, 0.0]);
    }

    #[test]
    fn subspace_embedding_round_trip() {
        let p = mp_params();
        let z = [0.75, -1.25];
        let y1 = [z[0], -p.rho1 * z[0]];
        let y2 = [z[1], -p.rho2 * z[1]];
        assert_eq!(project(&y1, &y2), z);
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify([-1.0, -1.0]), RegionLabel::P1);
        assert_eq!(classify([3.0, 2.0]), RegionLabel::P3);
        assert_eq!(classify([-1.0, 0.0]), RegionLabel::P12);
        assert_eq!(classify([0.0, 5.0]), RegionLabel::P23);
        assert_eq!(classify([7.0, 0.0]), RegionLabel::P34);
        assert_eq!(classify([0.0, -2.0]), RegionLabel::P41);
        assert_eq!(classify([0.0, 0.0]), RegionLabel::Origin);
    }

    #[test]
    fn classify_dead_zone_routes_to_boundary() {
        assert_eq!(classify_tol([1e-15, 4.0], 1e-12), RegionLabel::P23);
        assert_eq!(classify_tol([1e-15, 4.0], 0.0), RegionLabel::P3);
    }

    #[test]
    fn q_map_examples() {
        assert_eq!(q_map([2.0, 3.0], &mut lex(), 0).unwrap(), 2); // P3 -> e3
        assert_eq!(q_map([0.0, 5.0], &mut lex(), 0).unwrap(), 1); // P23, lex -> e2
        assert_eq!(q_map([0.0, 0.0], &mut lex(), 0).unwrap(), 0); // origin -> e1
    }

    #[test]
    fn psi_is_l1_norm_under_matching_pennies() {
        let p = mp_params();
        assert_eq!((p.rho1, p.rho2), (1.0, 1.0));
        for z in [
            [0.3, 0.4],
            [-0.3, 0.4],
            [-0.3, -0.4],
            [0.3, -0.4],
            [0.0, 2.0],
            [-2.0, 0.0],
            [0.0, 0.0],
        ] {
            let l1 = z[0].abs() + z[1].abs();
            assert!((psi(z, &p) - l1).abs() < 1e-15, "psi({z:?})");
        }
        // trace vector from the alternating golden run
        let pp = std::f64::consts::FRAC_PI_4;
        let z5 = [-3.0, -4.0 * pp + 4.0];
        assert!((psi(z5, &p) - (7.0 - 4.0 * pp)).abs() < 1e-12);
    }

    #[test]
    fn psi_boundary_is_tiebreak_independent() {
        // adjacent M columns agree along each boundary ray; check with
        // randomly scaled boundary points on a non-symmetric game
        let g = GameMatrix::from_rows(vec![vec![1.5, -0.6], vec![-1.0, 0.4]]).unwrap();
        let p = SubspaceParams::from_game(&g).unwrap();
        let mut state = 0x12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..1000 {
            let r = 10.0 * next() + 1e-6;
            let cases = [
                ([-r, 0.0], 0usize, 1usize), // P12: {e1, e2}
                ([0.0, r], 1, 2),            // P23: {e2, e3}
                ([r, 0.0], 2, 3),            // P34: {e3, e4}
                ([0.0, -r], 3, 0),           // P41: {e4, e1}
            ];
            for (z, wa, wb) in cases {
                let va = psi_at_vertex(z, &p, wa);
                let vb = psi_at_vertex(z, &p, wb);
                assert!(
                    (va - vb).abs() <= 1e-12 * (1.0 + va.abs()),
                    "boundary {z:?}: {va} vs {vb}"
                );
            }
        }
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(threshold_b(1.0, 1.0, 1.0).unwrap(), 6.0);
        assert_eq!(threshold_b(1.0, 2.0, 0.5).unwrap(), 12.0);
        assert!(threshold_b(1.0, -1.0, 1.0).is_err());
        // always within the coarser cap
        for (a, r1, r2) in [(1.0, 1.0, 1.0), (2.5, 0.3, 1.8), (0.7, 4.0, 0.1)] {
            let b = threshold_b(a, r1, r2).unwrap();
            assert!(b <= 6.0 * a * (1.0 + r1 + r2) + 1e-12);
        }
    }

    #[test]
    fn threshold_matches_brute_force_maximum() {
        // maximize psi over the l1 sphere of radius 6 a_max by walking the
        // diamond perimeter
        for (rho1, rho2) in [(1.0, 1.0), (2.0, 0.5), (0.3, 0.9), (1.7, 2.4)] {
            let g = matching_pennies();
            let mut p = SubspaceParams::from_game(&g).unwrap();
            p.rho1 = rho1;
            p.rho2 = rho2;
            p.m_cols = [[-rho1, -rho2], [-rho1, 1.0], [1.0, 1.0], [1.0, -rho2]];
            let r = 6.0 * p.a_max;
            let mut best = f64::NEG_INFINITY;
            let steps = 200_000;
            for k in 0..steps {
                let u = 4.0 * r * k as f64 / steps as f64;
                // perimeter parametrization of the l1 sphere
                let (z1, z2) = if u < r {
                    (r - u, u)
                } else if u < 2.0 * r {
                    (-(u - r), r - (u - r))
                } else if u < 3.0 * r {
                    (-(r - (u - 2.0 * r)), -(u - 2.0 * r))
                } else {
                    (u - 3.0 * r, -(r - (u - 3.0 * r)))
                };
                best = best.max(psi([z1, z2], &p));
            }
            let b = threshold_b(p.a_max, rho1, rho2).unwrap();
            assert!(
                (best - b).abs() <= 1e-3,
                "rho ({rho1},{rho2}): sampled max {best}, closed form {b}"
            );
            assert!(best <= b + 1e-9);
        }
    }

    #[test]
    fn step_subspace_examples() {
        let p = mp_params();
        // zero momentum
        let st = step_subspace([1.0, 2.0], [1.0, 2.0], &p, &mut lex(), 0).unwrap();
        assert_eq!(st.z_tilde, [1.0, 2.0]);
        // hand expansion on Matching Pennies S
        let st = step_subspace([-1.0, -1.0], [-2.0, 0.0], &p, &mut lex(), 0).unwrap();
        assert_eq!(st.z_tilde, [-3.0, 1.0]);
        assert_eq!(st.w_next, 1); // P2 -> e2
        assert_eq!(st.z_next, [-1.0, 1.0]);
    }

    #[test]
    fn stm_matches_closed_form_and_is_skew() {
        let games = [
            matching_pennies(),
            GameMatrix::from_rows(vec![vec![1.5, -0.6], vec![-1.0, 0.4]]).unwrap(),
        ];
        for g in games {
            let p = SubspaceParams::from_game(&g).unwrap();
            let stm = p.stm();
            let closed = stm_closed_form(g.abcd().unwrap());
            for i in 0..4 {
                for j in 0..4 {
                    assert!(
                        (stm[i][j] - closed[i][j]).abs() <= 1e-12,
                        "entry ({i},{j}): {} vs {}",
                        stm[i][j],
                        closed[i][j]
                    );
                    assert!(
                        (stm[i][j] + stm[j][i]).abs() <= 1e-12,
                        "skew fails at ({i},{j})"
                    );
                }
            }
            // sub-diagonal entries negative under the normal form
            for i in 0..4 {
                let j = (i + 1) % 4;
                assert!(stm[j][i] < 0.0, "(S^T M)_({},{}) = {}", j + 1, i + 1, stm[j][i]);
            }
        }
    }

    #[test]
    fn cycling_report_exempts_below_threshold() {
        let p = mp_params();
        // a short, low-energy sequence triggers no assertions
        let zs = vec![[0.0, 0.0], [1.0, -1.0], [0.0, -2.0], [-1.0, -1.0]];
        let report = check_cycling_invariants(&zs, &p);
        assert_eq!(report.steps_above_threshold, 0);
        assert!(report.ok());
    }

    #[test]
    fn cycling_report_flags_corrupted_sequence() {
        let p = mp_params();
        // force psi far above B then make the next point jump two regions
        let zs = vec![[-9.0, -9.0], [-10.0, -8.0], [10.0, 8.0], [9.0, 9.0]];
        let report = check_cycling_invariants(&zs, &p);
        assert!(!report.ok());
    }
}
