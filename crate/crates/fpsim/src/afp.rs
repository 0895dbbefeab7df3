//! Alternating fictitious play on Matching Pennies, reduced to the
//! two-dimensional dual iterates, plus the phase decomposition and the
//! empirical ingredients of the square-root regret lower bound: phases of
//! constant joint vertex whose lengths scale with the energy, and energy
//! that strictly grows on a constant fraction of phase transitions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::matching_pennies;
use crate::report::Violation;
use crate::subspace::{
    boundary_of, classify, next_idx, psi, q_map, RegionLabel, SubspaceParams, SubspaceStep,
};
use crate::tiebreak::{TiebreakRule, Tiebreaker};

/// Maximal phase-start energy increase between consecutive phases under
/// Matching Pennies: at most two increasing steps per transition, each
/// changing psi = |z|_1 by at most the l1 norm of an S column, which is 2.
pub const PHASE_INCREASE_BOUND: f64 = 4.0;

/// Subspace parameters of Matching Pennies (rho1 = rho2 = 1, psi = l1).
pub fn afp_mp_params() -> SubspaceParams {
    SubspaceParams::from_game(&matching_pennies()).expect("Matching Pennies is normal-form")
}

/// Initial subspace iterates (z^2, z^3) of alternating play on Matching
/// Pennies from x1^1 = (p, 1-p) with p in (1/2, 1): Player 2's first move
/// is the second strategy, which pins z^2 = (0, -(2p-1)) and
/// z^3 = (-1, -2(2p-1)).
pub fn afp_mp_subspace_init(p: f64) -> Result<([f64; 2], [f64; 2])> {
    if !(0.5..1.0).contains(&p) || p == 0.5 {
        return Err(Error::InvalidParameter(format!(
            "subspace initialization needs p in (1/2, 1), got {p}"
        )));
    }
    let z2 = [0.0, -(2.0 * p - 1.0)];
    let z3 = [-1.0, -2.0 * (2.0 * p - 1.0)];
    Ok((z2, z3))
}

/// Closed-form golden segment z^3..z^6 of the Matching Pennies run.
pub fn mp_golden_trace(p: f64) -> [[f64; 2]; 4] {
    [
        [-1.0, -2.0 * (2.0 * p - 1.0)],
        [-2.0, -4.0 * p + 3.0],
        [-3.0, -4.0 * p + 4.0],
        [-4.0, -4.0 * p + 5.0],
    ]
}

/// One step of the dual-only alternating recursion on Matching Pennies:
/// the prediction reuses the stale coordinate of the player who did not
/// move, so z_tilde = (z_prev_1, z_cur_2) for even t and
/// (z_cur_1, z_prev_2) for odd t; then z_next = z_cur + S Q(z_tilde).
pub fn step_afp_subspace(
    z_prev: [f64; 2],
    z_cur: [f64; 2],
    t: u64,
    tb: &mut Tiebreaker,
) -> Result<SubspaceStep> {
    if t < 3 {
        return Err(Error::InvalidParameter(
            "alternating subspace steps start at t = 3".into(),
        ));
    }
    let params = afp_mp_params();
    let z_tilde = if t % 2 == 0 {
        [z_prev[0], z_cur[1]]
    } else {
        [z_cur[0], z_prev[1]]
    };
    let w = q_map(z_tilde, tb, t)?;
    let s = params.s_cols[w];
    Ok(SubspaceStep {
        z_tilde,
        z_next: [z_cur[0] + s[0], z_cur[1] + s[1]],
        w_next: w,
    })
}

/// Recorded subspace run of alternating play on Matching Pennies.
/// `zs[t]` is valid for t = 2..=T+1 and `ws[t]` for t = 3..=T.
#[derive(Debug, Clone)]
pub struct AfpSubspaceRun {
    pub p: f64,
    pub steps: u64,
    pub zs: Vec<[f64; 2]>,
    pub ws: Vec<Option<u8>>,
}

impl AfpSubspaceRun {
    pub fn z(&self, t: u64) -> [f64; 2] {
        self.zs[t as usize]
    }

    pub fn psi_at(&self, t: u64, params: &SubspaceParams) -> f64 {
        psi(self.z(t), params)
    }
}

fn sign_choice(v: f64, tb: &mut Tiebreaker, t: u64) -> Result<usize> {
    if v > 0.0 {
        Ok(0)
    } else if v < 0.0 {
        Ok(1)
    } else {
        tb.choose(&[0, 1], t)
    }
}

fn joint_vertex(s1: usize, s2: usize) -> u8 {
    match (s1, s2) {
        (0, 0) => 2, // e3
        (0, 1) => 3, // e4
        (1, 0) => 1, // e2
        (1, 1) => 0, // e1
        _ => unreachable!(),
    }
}

/// Run the alternating subspace dynamics to horizon T (even). The runner
/// follows the protocol faithfully: only the player moving at step t
/// consults its tiebreak stream; the other player's strategy is held from
/// its previous move rather than re-derived from the stale coordinate.
pub fn run_afp_subspace(p: f64, steps: u64, rule: &TiebreakRule) -> Result<AfpSubspaceRun> {
    if steps < 4 || steps % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "alternating run needs an even horizon >= 4, got {steps}"
        )));
    }
    let (z2, z3) = afp_mp_subspace_init(p)?;
    let params = afp_mp_params();
    let mut tb1 = Tiebreaker::new(rule, 0);
    let mut tb2 = Tiebreaker::new(rule, 1);

    let len = steps as usize + 2;
    let mut zs = vec![[0.0, 0.0]; len];
    let mut ws = vec![None; len];
    zs[2] = z2;
    zs[3] = z3;

    let mut s1 = 1usize; // pinned at t = 3 before first use
    let mut s2 = 1usize; // Player 2's move at t = 2 (z2_2 < 0)
    for t in 3..=steps {
        if t % 2 == 1 {
            s1 = sign_choice(zs[t as usize][0], &mut tb1, t)?;
        } else {
            s2 = sign_choice(zs[t as usize][1], &mut tb2, t)?;
        }
        let w = joint_vertex(s1, s2);
        ws[t as usize] = Some(w);
        let s = params.s_cols[w as usize];
        zs[t as usize + 1] = [zs[t as usize][0] + s[0], zs[t as usize][1] + s[1]];
    }
    Ok(AfpSubspaceRun { p, steps, zs, ws })
}

/// Maximal run of steps at a constant joint vertex. Phase 0 covers the two
/// initialization rounds t = 1, 2 (no joint vertex exists there); phase
/// k >= 1 starts at the k'th vertex change. Lengths partition [1, T], so
/// they sum to T.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Phase {
    pub k: usize,
    pub t_start: u64,
    pub tau: u64,
    pub psi_start: f64,
    pub psi_end: f64,
    pub vertex: Option<u8>,
}

/// Split a run into phases of constant joint vertex.
pub fn decompose_phases(run: &AfpSubspaceRun) -> Result<Vec<Phase>> {
    if run.steps < 4 {
        return Err(Error::Trajectory(
            "phase decomposition needs at least two recorded steps".into(),
        ));
    }
    let params = afp_mp_params();
    let mut starts: Vec<u64> = vec![1, 3]; // phase 0 = {1, 2}; phase 1 begins at t = 3
    let mut cur = run.ws[3].expect("w^3 exists");
    for t in 4..=run.steps {
        let w = run.ws[t as usize].expect("w^t exists");
        if w != cur {
            starts.push(t);
            cur = w;
        }
    }
    starts.push(run.steps + 1); // exclusive end of the final phase
    let mut phases = Vec::with_capacity(starts.len() - 1);
    for k in 0..starts.len() - 1 {
        let t_start = starts[k];
        let t_end = starts[k + 1];
        // psi is measured at the first recorded z of the phase (z^2 for
        // phase 0, whose rounds predate the z sequence)
        let z_first = t_start.max(2);
        phases.push(Phase {
            k,
            t_start,
            tau: t_end - t_start,
            psi_start: run.psi_at(z_first, &params),
            psi_end: run.psi_at(t_end - 1, &params),
            vertex: if k == 0 { None } else { run.ws[t_start as usize] },
        });
    }
    Ok(phases)
}

/// Empirical report on the lower-bound ingredients of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LbReport {
    /// Number of genuine phases (k >= 1).
    pub phases: usize,
    /// Phases whose start energy exceeds the previous one by >= 1.
    pub qualifying_increases: usize,
    pub max_phase_increase: f64,
    pub max_step_increase: f64,
    /// Observed tau_k / psi(z^{t_k}) over interior phases.
    pub min_tau_ratio: f64,
    pub max_tau_ratio: f64,
    pub mean_tau_ratio: f64,
    pub final_psi: f64,
    pub violations: Vec<Violation>,
}

impl LbReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check the per-phase energy-growth bound, count the strictly-increasing
/// phases, fit the phase-length-to-energy ratios, classify every step
/// against the cycling case analysis, and verify the arithmetic structure
/// of the iterates (z1 integral; z2 never zero for irrational p).
pub fn verify_lb_ingredients(run: &AfpSubspaceRun) -> Result<LbReport> {
    let params = afp_mp_params();
    let phases = decompose_phases(run)?;
    let mut report = LbReport {
        phases: phases.len().saturating_sub(1),
        qualifying_increases: 0,
        max_phase_increase: f64::NEG_INFINITY,
        max_step_increase: f64::NEG_INFINITY,
        min_tau_ratio: f64::INFINITY,
        max_tau_ratio: f64::NEG_INFINITY,
        mean_tau_ratio: 0.0,
        final_psi: run.psi_at(run.steps + 1, &params),
        violations: Vec::new(),
    };
    let eps = 1e-9;

    // per-phase energy growth: bound and qualifying-increase count
    for k in 1..phases.len() {
        let inc = phases[k].psi_start - phases[k - 1].psi_start;
        report.max_phase_increase = report.max_phase_increase.max(inc);
        if inc > PHASE_INCREASE_BOUND + eps {
            report.violations.push(
                Violation::new("phase-energy-growth", phases[k].t_start)
                    .detail(format!(
                        "phase {} start energy rose by {inc} > {PHASE_INCREASE_BOUND}",
                        phases[k].k
                    ))
                    .data("increase", inc),
            );
        }
        if inc >= 1.0 - eps {
            report.qualifying_increases += 1;
        }
    }
    // phases with >= 1 growth must make up at least half of all phases
    let k = report.phases;
    if k >= 2 && (report.qualifying_increases as f64) < (k as f64) / 2.0 - 1.0 {
        report.violations.push(
            Violation::new("qualifying-increase-count", run.steps)
                .detail(format!(
                    "{} of {} phases grew by >= 1; expected at least K/2 - 1",
                    report.qualifying_increases, k
                ))
                .data("qualifying", report.qualifying_increases as f64)
                .data("phases", k as f64),
        );
    }

    // phase length versus energy (interior phases only: the first full
    // phase after initialization through the last untruncated one)
    let mut ratios = Vec::new();
    for ph in phases.iter().skip(1).take(phases.len().saturating_sub(2)) {
        if ph.psi_start > 0.0 {
            ratios.push(ph.tau as f64 / ph.psi_start);
        }
    }
    if !ratios.is_empty() {
        report.min_tau_ratio = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        report.max_tau_ratio = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        report.mean_tau_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
    }

    // arithmetic structure of the iterates
    for t in 2..=run.steps + 1 {
        let z = run.z(t);
        if (z[0] - z[0].round()).abs() > 1e-9 {
            report.violations.push(
                Violation::new("z1-integrality", t)
                    .detail(format!("z1 = {} is not integral", z[0]))
                    .data("z1", z[0]),
            );
        }
        if z[1].abs() <= 1e-9 {
            report.violations.push(
                Violation::new("z2-zero", t)
                    .detail(format!("z2 = {} vanished despite irrational p", z[1]))
                    .data("z2", z[1]),
            );
        }
    }

    // per-step case classification and step-level energy growth
    for t in 3..run.steps {
        let z_prev = run.z(t - 1);
        let z_cur = run.z(t);
        let z_next = run.z(t + 1);
        let z_tilde = if t % 2 == 0 {
            [z_prev[0], z_cur[1]]
        } else {
            [z_cur[0], z_prev[1]]
        };
        let dpsi = psi(z_next, &params) - psi(z_cur, &params);
        report.max_step_increase = report.max_step_increase.max(dpsi);
        if t >= 4 {
            if let Some(case) = classify_step_case(
                classify(z_prev),
                classify(z_cur),
                classify(z_tilde),
                classify(z_next),
            ) {
                let _ = case;
            } else {
                report.violations.push(
                    Violation::new("case-analysis", t)
                        .detail(format!(
                            "step matches no cycling case: {} -> {} (tilde {}, next {})",
                            classify(z_prev),
                            classify(z_cur),
                            classify(z_tilde),
                            classify(z_next)
                        ))
                        .data("dpsi", dpsi),
                );
            }
        }
    }
    Ok(report)
}

/// Classify a step of the Matching Pennies alternating dynamics against
/// the four-case transition analysis. Successor regions are checked up to
/// the closed cells (a crossing may land exactly on the next boundary
/// ray). Returns None when no case matches.
pub fn classify_step_case(
    r_prev: RegionLabel,
    r_cur: RegionLabel,
    r_tilde: RegionLabel,
    r_next: RegionLabel,
) -> Option<u8> {
    let in_phat = |r: RegionLabel, i: u8| r.phat_index() == Some(i);
    let in_closed_next = |r: RegionLabel, i: u8| {
        // P_{i+1} together with its leading boundary ray
        r.open_index() == Some(next_idx(i)) || r == boundary_of(next_idx(i))
    };
    // Case 1: staying inside an open cell
    if let (Some(i), Some(j)) = (r_prev.open_index(), r_cur.open_index()) {
        if i == j && in_phat(r_tilde, i) && (in_phat(r_next, i) || in_closed_next(r_next, i)) {
            return Some(1);
        }
        // Case 2: crossed into the next open cell
        if j == next_idx(i)
            && (in_phat(r_tilde, i) || r_tilde.open_index() == Some(j))
            && (r_next.open_index() == Some(j) || r_next == boundary_of(j))
        {
            return Some(2);
        }
    }
    // Case 3: landed on the boundary ray ahead
    if let Some(i) = r_prev.open_index() {
        if r_cur == boundary_of(i)
            && (in_phat(r_tilde, i) || r_tilde.open_index() == Some(next_idx(i)))
            && in_closed_next(r_next, i)
        {
            return Some(3);
        }
    }
    // Case 4: stepping off a boundary ray into the next cell
    if r_prev.is_boundary() {
        let i = r_prev.phat_index().unwrap();
        if (r_cur.open_index() == Some(next_idx(i)) || r_cur == boundary_of(next_idx(i)))
            && (in_phat(r_tilde, i)
                || r_tilde.open_index() == Some(next_idx(i))
                || r_tilde == boundary_of(next_idx(i)))
            && (in_closed_next(r_next, i) || in_phat(r_next, next_idx(i)))
        {
            return Some(4);
        }
    }
    None
}

/// Least-squares slope of ln(y) against ln(x).
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter(
            "slope fit needs at least two points".into(),
        ));
    }
    if points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return Err(Error::InvalidParameter(
            "slope fit needs positive coordinates".into(),
        ));
    }
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let lx = x.ln();
        let ly = y.ln();
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(Error::Degenerate("collinear x coordinates".into()));
    }
    Ok((n * sxy - sx * sy) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn golden_trace_segment() {
        let p = FRAC_PI_4;
        let run = run_afp_subspace(p, 10, &TiebreakRule::Lexicographic).unwrap();
        let golden = mp_golden_trace(p);
        for (offset, want) in golden.iter().enumerate() {
            let t = 3 + offset as u64;
            let got = run.z(t);
            assert!(
                (got[0] - want[0]).abs() <= 1e-12 && (got[1] - want[1]).abs() <= 1e-12,
                "z^{t}: {got:?} vs {want:?}"
            );
        }
        assert_eq!(run.ws[3], Some(0)); // e1
        assert_eq!(run.ws[4], Some(0));
        assert_eq!(run.ws[5], Some(0));
        assert_eq!(run.ws[6], Some(1)); // e2
    }

    #[test]
    fn golden_trace_regions() {
        let p = FRAC_PI_4;
        let run = run_afp_subspace(p, 8, &TiebreakRule::Lexicographic).unwrap();
        assert_eq!(classify(run.z(3)), RegionLabel::P1);
        assert_eq!(classify(run.z(4)), RegionLabel::P1);
        assert_eq!(classify(run.z(5)), RegionLabel::P2);
        assert_eq!(classify(run.z(6)), RegionLabel::P2);
    }

    #[test]
    fn step_examples_from_trace() {
        let p = FRAC_PI_4;
        let run = run_afp_subspace(p, 10, &TiebreakRule::Lexicographic).unwrap();
        let mut tb = Tiebreaker::new(&TiebreakRule::Lexicographic, 0);

        // t = 3 (odd): z_tilde^4 = (z^3_1, z^2_2)
        let st = step_afp_subspace(run.z(2), run.z(3), 3, &mut tb).unwrap();
        assert_eq!(st.z_tilde, [-1.0, -(2.0 * p - 1.0)]);
        assert_eq!(classify(st.z_tilde), RegionLabel::P1);
        assert_eq!(st.w_next, 0);

        // t = 5 (odd): z_tilde^6 = (z^5_1, z^4_2) in P1 while z^5 in P2
        let st = step_afp_subspace(run.z(4), run.z(5), 5, &mut tb).unwrap();
        assert_eq!(st.z_tilde, [-3.0, -4.0 * p + 3.0]);
        assert_eq!(classify(st.z_tilde), RegionLabel::P1);

        // t = 6 (even): z_tilde^7 = (z^5_1, z^6_2) in P2, so w^6 = e2
        let st = step_afp_subspace(run.z(5), run.z(6), 6, &mut tb).unwrap();
        assert_eq!(st.z_tilde, [-3.0, -4.0 * p + 5.0]);
        assert_eq!(st.w_next, 1);
    }

    #[test]
    fn phases_start_where_the_trace_says() {
        let p = FRAC_PI_4;
        let run = run_afp_subspace(p, 40, &TiebreakRule::Lexicographic).unwrap();
        let phases = decompose_phases(&run).unwrap();
        assert_eq!(phases[1].t_start, 3);
        assert_eq!(phases[2].t_start, 6);
        let tau_sum: u64 = phases.iter().map(|ph| ph.tau).sum();
        assert_eq!(tau_sum, 40);
    }

    #[test]
    fn constant_vertex_run_is_single_phase() {
        // truncate right after phase 1 begins: only vertex e1 is ever played
        let p = FRAC_PI_4;
        let run = run_afp_subspace(p, 4, &TiebreakRule::Lexicographic).unwrap();
        let phases = decompose_phases(&run).unwrap();
        assert_eq!(phases.len(), 2); // init phase + one vertex phase
        assert_eq!(phases[1].vertex, Some(0));
    }

    #[test]
    fn psi_is_l1_all_along_the_run() {
        let params = afp_mp_params();
        let run = run_afp_subspace(FRAC_PI_4, 500, &TiebreakRule::Lexicographic).unwrap();
        for t in 2..=501u64 {
            let z = run.z(t);
            assert!((run.psi_at(t, &params) - (z[0].abs() + z[1].abs())).abs() < 1e-12);
        }
    }

    #[test]
    fn lb_ingredients_clean_on_short_runs() {
        for p in [FRAC_PI_4, 2.0_f64.sqrt() - 0.55] {
            let run = run_afp_subspace(p, 2000, &TiebreakRule::Lexicographic).unwrap();
            let report = verify_lb_ingredients(&run).unwrap();
            assert!(
                report.ok(),
                "p = {p}: violations {:?}",
                report.violations.iter().take(3).collect::<Vec<_>>()
            );
            assert!(report.phases >= 4);
            assert!(report.qualifying_increases as f64 >= report.phases as f64 / 2.0 - 1.0);
            assert!(report.max_phase_increase <= PHASE_INCREASE_BOUND + 1e-9);
        }
    }

    #[test]
    fn energy_grows_like_sqrt_t() {
        let params = afp_mp_params();
        let mut pts = Vec::new();
        for t in [1000u64, 10_000, 100_000] {
            let run = run_afp_subspace(FRAC_PI_4, t, &TiebreakRule::Lexicographic).unwrap();
            pts.push((t as f64, run.psi_at(t + 1, &params)));
        }
        let slope = fit_loglog_slope(&pts).unwrap();
        assert!((0.35..=0.65).contains(&slope), "slope {slope}");
    }

    #[test]
    fn init_rejects_bad_p() {
        assert!(afp_mp_subspace_init(0.5).is_err());
        assert!(afp_mp_subspace_init(1.2).is_err());
        assert!(afp_mp_subspace_init(0.3).is_err());
    }
}
