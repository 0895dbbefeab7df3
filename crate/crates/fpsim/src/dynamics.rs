//! Steppers for the fictitious-play family: standard and optimistic play
//! under simultaneous updates, and alternating play where the players move
//! in turn. All variants best-respond to cumulative dual payoff vectors;
//! optimism double-counts the most recent feedback vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameMatrix, MixedStrategy};
use crate::subspace::{classify, psi, RegionLabel, SubspaceParams};
use crate::tiebreak::{argmax_index, TiebreakRule, Tiebreaker};

/// Algorithm selector. `Fp` and `Ofp` run under simultaneous play,
/// `Afp` under alternating play.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algo {
    Fp,
    Ofp,
    Afp,
}

impl Algo {
    /// Optimism weight on the most recent feedback vector.
    pub fn alpha(self) -> f64 {
        match self {
            Algo::Fp | Algo::Afp => 0.0,
            Algo::Ofp => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Algo::Fp => "fp",
            Algo::Ofp => "ofp",
            Algo::Afp => "afp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlayMode {
    Simultaneous,
    Alternating,
}

/// Tie tolerance at step t: cumulative payoff sums grow linearly in t, so
/// the tied band scales with a_max * (t + 1).
pub fn step_tie_tolerance(a: &GameMatrix, t: u64) -> f64 {
    1e-9 * a.a_max() * (t as f64 + 1.0)
}

fn vertex_of(x: &[f64]) -> Option<usize> {
    let mut idx = None;
    for (i, &p) in x.iter().enumerate() {
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

fn mul_col_fast(a: &GameMatrix, x: &[f64]) -> Result<Vec<f64>> {
    if let Some(j) = vertex_of(x) {
        Ok((0..a.m()).map(|i| a.get(i, j)).collect())
    } else {
        a.mul_col(x)
    }
}

fn mul_row_fast(a: &GameMatrix, x: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = vertex_of(x) {
        Ok((0..a.n()).map(|j| a.get(i, j)).collect())
    } else {
        a.mul_row(x)
    }
}

fn support_value(y: &[f64]) -> f64 {
    y.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// State of the simultaneous-play dynamics at step t: current primal pair,
/// cumulative dual payoff vectors y1 = sum A x2^k and y2 = sum -A^T x1^k
/// over k < t, and the previous primal pair feeding the optimism term.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsState {
    pub x1: MixedStrategy,
    pub x2: MixedStrategy,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub t: u64,
    pub alpha: f64,
    pub prev_x1: MixedStrategy,
    pub prev_x2: MixedStrategy,
}

impl DynamicsState {
    /// Initial state at t = 0 from any pair of mixed strategies. The first
    /// dual update applies from t = 0, and the optimism term at t = 1 uses
    /// these iterates directly.
    pub fn initial(
        a: &GameMatrix,
        x0: (MixedStrategy, MixedStrategy),
        alpha: f64,
    ) -> Result<Self> {
        let (x1, x2) = x0;
        if x1.dim() != a.m() || x2.dim() != a.n() {
            return Err(Error::DimensionMismatch(format!(
                "initial profile ({}, {}) vs {}x{} game",
                x1.dim(),
                x2.dim(),
                a.m(),
                a.n()
            )));
        }
        Ok(DynamicsState {
            prev_x1: x1.clone(),
            prev_x2: x2.clone(),
            x1,
            x2,
            y1: vec![0.0; a.m()],
            y2: vec![0.0; a.n()],
            t: 0,
            alpha,
        })
    }
}

/// One simultaneous step: both players fold the previous opponent iterate
/// into their dual vector and best-respond to it (plus the optimism term).
pub fn step_simultaneous(
    state: &DynamicsState,
    a: &GameMatrix,
    tb1: &mut Tiebreaker,
    tb2: &mut Tiebreaker,
) -> Result<DynamicsState> {
    let ax2 = mul_col_fast(a, state.x2.probs())?;
    let atx1 = mul_row_fast(a, state.x1.probs())?;

    let y1: Vec<f64> = state.y1.iter().zip(&ax2).map(|(y, d)| y + d).collect();
    let y2: Vec<f64> = state.y2.iter().zip(&atx1).map(|(y, d)| y - d).collect();

    let t = state.t + 1;
    let tol = step_tie_tolerance(a, t);
    let pay1: Vec<f64> = y1
        .iter()
        .zip(&ax2)
        .map(|(y, d)| y + state.alpha * d)
        .collect();
    let pay2: Vec<f64> = y2
        .iter()
        .zip(&atx1)
        .map(|(y, d)| y - state.alpha * d)
        .collect();

    let i1 = argmax_index(&pay1, tol, tb1, t)?;
    let i2 = argmax_index(&pay2, tol, tb2, t)?;

    Ok(DynamicsState {
        x1: MixedStrategy::vertex(a.m(), i1)?,
        x2: MixedStrategy::vertex(a.n(), i2)?,
        y1,
        y2,
        t,
        alpha: state.alpha,
        prev_x1: state.x1.clone(),
        prev_x2: state.x2.clone(),
    })
}

/// State of the alternating-play dynamics. Player 2's iterate is the zero
/// vector until its first move at t = 2 (the cumulative-payoff convention
/// x2^1 = x2^0 = 0), which makes the uniform dual accumulation
/// y^{t+1} = y^t + (A x2^t, -A^T x1^t) reproduce y2^2 = -A^T x1^1 exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct AltState {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub t: u64,
}

impl AltState {
    pub fn initial(a: &GameMatrix, x1_init: MixedStrategy) -> Result<Self> {
        if x1_init.dim() != a.m() {
            return Err(Error::DimensionMismatch(format!(
                "initial strategy of length {} vs {} rows",
                x1_init.dim(),
                a.m()
            )));
        }
        Ok(AltState {
            x1: x1_init.probs().to_vec(),
            x2: vec![0.0; a.n()],
            y1: vec![0.0; a.m()],
            y2: vec![0.0; a.n()],
            t: 1,
        })
    }
}

/// One alternating step to time t+1: the dual vectors absorb the current
/// primal pair, then on even rounds Player 2 best-responds to y2 while
/// Player 1 holds, and on odd rounds the roles are reversed.
pub fn step_alternating(
    state: &AltState,
    a: &GameMatrix,
    tb1: &mut Tiebreaker,
    tb2: &mut Tiebreaker,
) -> Result<AltState> {
    let ax2 = mul_col_fast(a, &state.x2)?;
    let atx1 = mul_row_fast(a, &state.x1)?;
    let y1: Vec<f64> = state.y1.iter().zip(&ax2).map(|(y, d)| y + d).collect();
    let y2: Vec<f64> = state.y2.iter().zip(&atx1).map(|(y, d)| y - d).collect();

    let t = state.t + 1;
    let tol = step_tie_tolerance(a, t);
    let (x1, x2) = if t % 2 == 0 {
        let i2 = argmax_index(&y2, tol, tb2, t)?;
        let mut x2 = vec![0.0; a.n()];
        x2[i2] = 1.0;
        (state.x1.clone(), x2)
    } else {
        let i1 = argmax_index(&y1, tol, tb1, t)?;
        let mut x1 = vec![0.0; a.m()];
        x1[i1] = 1.0;
        (x1, state.x2.clone())
    };

    Ok(AltState { x1, x2, y1, y2, t })
}

/// Per-step log of a run: primal iterates, dual vectors, the running total
/// regret (computed from the dual support values), and, for normal-form
/// 2x2 games, the subspace energy and region label of each step. Rows are
/// appended once per executed step; simultaneous records hold t = 0..=T,
/// alternating records t = 1..=T with row 0 zero-filled.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub mode: PlayMode,
    pub algo: Algo,
    pub m: usize,
    pub n: usize,
    /// Horizon T; the record holds T+1 rows.
    pub steps: u64,
    x1: Vec<f64>,
    x2: Vec<f64>,
    y1: Vec<f64>,
    y2: Vec<f64>,
    /// Dual pair y^{T+1} (one update past the last recorded row).
    pub final_y1: Vec<f64>,
    pub final_y2: Vec<f64>,
    /// reg_running[t] = support value of y^{t+1} (total regret at horizon t).
    pub reg_running: Vec<f64>,
    pub psi: Option<Vec<f64>>,
    pub regions: Option<Vec<RegionLabel>>,
}

impl TrajectoryRecord {
    fn with_capacity(mode: PlayMode, algo: Algo, m: usize, n: usize, steps: u64) -> Self {
        let rows = steps as usize + 1;
        TrajectoryRecord {
            mode,
            algo,
            m,
            n,
            steps,
            x1: Vec::with_capacity(rows * m),
            x2: Vec::with_capacity(rows * n),
            y1: Vec::with_capacity(rows * m),
            y2: Vec::with_capacity(rows * n),
            final_y1: Vec::new(),
            final_y2: Vec::new(),
            reg_running: Vec::with_capacity(rows),
            psi: None,
            regions: None,
        }
    }

    fn push_row(&mut self, x1: &[f64], x2: &[f64], y1: &[f64], y2: &[f64], reg: f64) {
        self.x1.extend_from_slice(x1);
        self.x2.extend_from_slice(x2);
        self.y1.extend_from_slice(y1);
        self.y2.extend_from_slice(y2);
        self.reg_running.push(reg);
    }

    pub fn rows(&self) -> u64 {
        self.reg_running.len() as u64
    }

    /// First row holding a real iterate (0 for simultaneous play, 1 for
    /// alternating play).
    pub fn first_t(&self) -> u64 {
        match self.mode {
            PlayMode::Simultaneous => 0,
            PlayMode::Alternating => 1,
        }
    }

    pub fn x1_at(&self, t: u64) -> &[f64] {
        let t = t as usize;
        &self.x1[t * self.m..(t + 1) * self.m]
    }

    pub fn x2_at(&self, t: u64) -> &[f64] {
        let t = t as usize;
        &self.x2[t * self.n..(t + 1) * self.n]
    }

    pub fn y1_at(&self, t: u64) -> &[f64] {
        let t = t as usize;
        &self.y1[t * self.m..(t + 1) * self.m]
    }

    pub fn y2_at(&self, t: u64) -> &[f64] {
        let t = t as usize;
        &self.y2[t * self.n..(t + 1) * self.n]
    }

    /// Dual pair y^t for t = 0..=T+1 (T+1 resolves to the final pair).
    pub fn dual_at(&self, t: u64) -> (&[f64], &[f64]) {
        if t == self.steps + 1 {
            (&self.final_y1, &self.final_y2)
        } else {
            (self.y1_at(t), self.y2_at(t))
        }
    }

    /// Subspace coordinates (y1[0], y2[0]) at step t (t up to T+1).
    pub fn z_at(&self, t: u64) -> [f64; 2] {
        let (y1, y2) = self.dual_at(t);
        [y1[0], y2[0]]
    }

    /// All subspace iterates z^t for t = first..=T+1.
    pub fn z_sequence(&self) -> Vec<[f64; 2]> {
        (self.first_t()..=self.steps + 1)
            .map(|t| self.z_at(t))
            .collect()
    }
}

#[cfg(test)]
impl TrajectoryRecord {
    pub(crate) fn test_build(
        mode: PlayMode,
        algo: Algo,
        m: usize,
        n: usize,
        steps: u64,
    ) -> Self {
        TrajectoryRecord::with_capacity(mode, algo, m, n, steps)
    }

    pub(crate) fn test_push(&mut self, x1: &[f64], x2: &[f64], y1: &[f64], y2: &[f64], reg: f64) {
        self.push_row(x1, x2, y1, y2, reg);
    }

    pub(crate) fn test_set_final(&mut self, y1: Vec<f64>, y2: Vec<f64>) {
        self.final_y1 = y1;
        self.final_y2 = y2;
    }
}

fn record_subspace(record: &mut TrajectoryRecord, params: &SubspaceParams) {
    let rows = record.rows();
    let mut psis = Vec::with_capacity(rows as usize);
    let mut regions = Vec::with_capacity(rows as usize);
    for t in 0..rows {
        let z = record.z_at(t);
        psis.push(psi(z, params));
        regions.push(classify(z));
    }
    record.psi = Some(psis);
    record.regions = Some(regions);
}

/// Run T steps of simultaneous-play dynamics from an arbitrary initial
/// profile, recording every iterate. Deterministic given the tiebreak
/// decision streams.
pub fn run(
    a: &GameMatrix,
    algo: Algo,
    x0: (MixedStrategy, MixedStrategy),
    steps: u64,
    rule: &TiebreakRule,
) -> Result<TrajectoryRecord> {
    let mut tb1 = Tiebreaker::new(rule, 0);
    let mut tb2 = Tiebreaker::new(rule, 1);
    run_with(a, algo, x0, steps, &mut tb1, &mut tb2)
}

/// As `run`, with caller-supplied tiebreakers (used to couple decision
/// streams across a game and its normalized form).
pub fn run_with(
    a: &GameMatrix,
    algo: Algo,
    x0: (MixedStrategy, MixedStrategy),
    steps: u64,
    tb1: &mut Tiebreaker,
    tb2: &mut Tiebreaker,
) -> Result<TrajectoryRecord> {
    if algo == Algo::Afp {
        return Err(Error::InvalidParameter(
            "alternating play runs via run_alternating".into(),
        ));
    }
    if steps < 1 {
        return Err(Error::InvalidParameter("steps must be >= 1".into()));
    }
    let mut state = DynamicsState::initial(a, x0, algo.alpha())?;
    let mut record =
        TrajectoryRecord::with_capacity(PlayMode::Simultaneous, algo, a.m(), a.n(), steps);

    let next_energy = |x1: &[f64], x2: &[f64], y1: &[f64], y2: &[f64]| -> Result<f64> {
        let ax2 = mul_col_fast(a, x2)?;
        let atx1 = mul_row_fast(a, x1)?;
        let e1: f64 = support_value(&y1.iter().zip(&ax2).map(|(y, d)| y + d).collect::<Vec<_>>());
        let e2: f64 = support_value(&y2.iter().zip(&atx1).map(|(y, d)| y - d).collect::<Vec<_>>());
        Ok(e1 + e2)
    };

    let reg0 = next_energy(
        state.x1.probs(),
        state.x2.probs(),
        &state.y1,
        &state.y2,
    )?;
    record.push_row(
        state.x1.probs(),
        state.x2.probs(),
        &state.y1,
        &state.y2,
        reg0,
    );

    for _ in 0..steps {
        state = step_simultaneous(&state, a, tb1, tb2)?;
        let reg = next_energy(
            state.x1.probs(),
            state.x2.probs(),
            &state.y1,
            &state.y2,
        )?;
        record.push_row(
            state.x1.probs(),
            state.x2.probs(),
            &state.y1,
            &state.y2,
            reg,
        );
    }

    let ax2 = mul_col_fast(a, state.x2.probs())?;
    let atx1 = mul_row_fast(a, state.x1.probs())?;
    record.final_y1 = state.y1.iter().zip(&ax2).map(|(y, d)| y + d).collect();
    record.final_y2 = state.y2.iter().zip(&atx1).map(|(y, d)| y - d).collect();

    if a.satisfies_normal_form() {
        if let Ok(params) = SubspaceParams::from_game(a) {
            record_subspace(&mut record, &params);
        }
    }
    Ok(record)
}

/// Run T steps (T even) of alternating fictitious play from Player 1's
/// initial strategy. Row 0 of the record is zero-filled; iterates start at
/// t = 1.
pub fn run_alternating(
    a: &GameMatrix,
    x1_init: MixedStrategy,
    steps: u64,
    rule: &TiebreakRule,
) -> Result<TrajectoryRecord> {
    let mut tb1 = Tiebreaker::new(rule, 0);
    let mut tb2 = Tiebreaker::new(rule, 1);
    run_alternating_with(a, x1_init, steps, &mut tb1, &mut tb2)
}

pub fn run_alternating_with(
    a: &GameMatrix,
    x1_init: MixedStrategy,
    steps: u64,
    tb1: &mut Tiebreaker,
    tb2: &mut Tiebreaker,
) -> Result<TrajectoryRecord> {
    if steps < 2 || steps % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "alternating play needs an even horizon >= 2, got {steps}"
        )));
    }
    let mut state = AltState::initial(a, x1_init)?;
    let mut record =
        TrajectoryRecord::with_capacity(PlayMode::Alternating, Algo::Afp, a.m(), a.n(), steps);

    let energy_next = |a: &GameMatrix, st: &AltState| -> Result<f64> {
        let ax2 = mul_col_fast(a, &st.x2)?;
        let atx1 = mul_row_fast(a, &st.x1)?;
        let e1 = support_value(&st.y1.iter().zip(&ax2).map(|(y, d)| y + d).collect::<Vec<_>>());
        let e2 = support_value(&st.y2.iter().zip(&atx1).map(|(y, d)| y - d).collect::<Vec<_>>());
        Ok(e1 + e2)
    };

    // placeholder row 0
    record.push_row(
        &vec![0.0; a.m()],
        &vec![0.0; a.n()],
        &vec![0.0; a.m()],
        &vec![0.0; a.n()],
        0.0,
    );
    let reg1 = energy_next(a, &state)?;
    record.push_row(&state.x1, &state.x2, &state.y1, &state.y2, reg1);

    for _ in 1..steps {
        state = step_alternating(&state, a, tb1, tb2)?;
        let reg = energy_next(a, &state)?;
        record.push_row(&state.x1, &state.x2, &state.y1, &state.y2, reg);
    }

    let ax2 = mul_col_fast(a, &state.x2)?;
    let atx1 = mul_row_fast(a, &state.x1)?;
    record.final_y1 = state.y1.iter().zip(&ax2).map(|(y, d)| y + d).collect();
    record.final_y2 = state.y2.iter().zip(&atx1).map(|(y, d)| y - d).collect();

    if a.satisfies_normal_form() {
        if let Ok(params) = SubspaceParams::from_game(a) {
            record_subspace(&mut record, &params);
        }
    }
    Ok(record)
}
