//! Buffer-content Markov chain of the buffered schemes.
//!
//! While the trigger is active the pair `(F; C)` of stored fine and coarse
//! inputs evolves as a Markov chain driven only by the i.i.d. effective
//! availability `N`. States are indexed `i = F * eta + C` (zero-based here,
//! one-based in the operation docs), giving `n_max + 1` states.
//!
//! Row `i` of the transition matrix is assembled from buffer semantics:
//! a computation of `n > 0` units overwrites the buffer and lands in state
//! `n` with probability `l_n`; no computation shifts the buffer with
//! probability `l_0`, landing in [`shift_target`].

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Tolerance on the sum of a user-supplied probability vector.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Probability { name, value })
    }
}

/// Rejects empty vectors, entries outside `[0, 1]` and sums off by more than
/// [`PROBABILITY_TOLERANCE`]. Vectors are never renormalised.
pub fn validate_probability_vector(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::ProbabilityVector("vector is empty".into()));
    }
    if let Some((j, v)) = p
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
    {
        return Err(Error::ProbabilityVector(format!(
            "entry {j} = {v} is outside [0, 1]"
        )));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
        return Err(Error::ProbabilityVector(format!(
            "entries sum to {sum}, expected 1 (tolerance {PROBABILITY_TOLERANCE:e})"
        )));
    }
    Ok(())
}

/// Probability of `N` effective processing units during a triggered step,
/// folding dropouts into "no computation":
/// `l_0 = p_0 q + (1 - q)`, `l_j = p_j q`.
pub fn effective_availability(q: f64, p: &[f64]) -> Result<Vec<f64>> {
    check_probability("q", q)?;
    validate_probability_vector(p)?;
    let mut l: Vec<f64> = p.iter().map(|pj| pj * q).collect();
    l[0] += 1.0 - q;
    Ok(l)
}

/// Lossy channel plus processor availability statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    q: f64,
    p: Vec<f64>,
    l: Vec<f64>,
}

impl ChannelModel {
    /// `q` is the probability a triggered transmission succeeds, `p[j]` the
    /// probability that `j` processing units are available given success.
    pub fn new(q: f64, p: Vec<f64>) -> Result<Self> {
        let l = effective_availability(q, &p)?;
        Ok(Self { q, p, l })
    }

    /// Uniform availability over `0..=n_max`, the setup of the worked example.
    pub fn uniform(q: f64, n_max: usize) -> Result<Self> {
        Self::new(q, vec![1.0 / (n_max as f64 + 1.0); n_max + 1])
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn l(&self) -> &[f64] {
        &self.l
    }

    pub fn n_max(&self) -> usize {
        self.p.len() - 1
    }
}

/// Buffer content `(F; C)`: stored fine-law and coarse-law inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BufferState {
    pub fine: usize,
    pub coarse: usize,
}

impl BufferState {
    pub const EMPTY: BufferState = BufferState { fine: 0, coarse: 0 };

    pub fn new(fine: usize, coarse: usize) -> Self {
        Self { fine, coarse }
    }

    /// Zero-based chain index `F * eta + C`.
    pub fn index(self, eta: usize) -> usize {
        self.fine * eta + self.coarse
    }
}

impl From<(usize, usize)> for BufferState {
    fn from((fine, coarse): (usize, usize)) -> Self {
        Self { fine, coarse }
    }
}

fn check_eta(eta: usize) -> Result<()> {
    if eta == 0 {
        return Err(Error::Parameter { name: "eta", reason: "must be at least 1".into() });
    }
    Ok(())
}

/// All `n_max + 1` buffer states in chain order.
pub fn state_space(n_max: usize, eta: usize) -> Result<Vec<BufferState>> {
    check_eta(eta)?;
    if n_max == 0 {
        return Err(Error::Parameter { name: "n_max", reason: "must be at least 1".into() });
    }
    Ok((0..=n_max).map(|i| BufferState::new(i / eta, i % eta)).collect())
}

/// One-based index reached from state `i` when no new computation arrives.
///
/// The empty buffer stays empty, a coarse-only buffer drops one coarse
/// entry, anything holding fine entries drops one fine entry.
///
/// # Panics
/// If `i == 0` or `eta == 0`.
pub fn shift_target(i: usize, eta: usize) -> usize {
    assert!(i >= 1, "state indices are one-based");
    assert!(eta >= 1, "eta must be at least 1");
    match i {
        1 => 1,
        i if i <= eta => i - 1,
        i => i - eta,
    }
}

/// Largest number of entries the buffered scheme ever stores for
/// availabilities up to `n_max`: `max_N (floor(N / eta) + N mod eta)`.
pub fn max_stored_entries(n_max: usize, eta: usize) -> usize {
    (0..=n_max).map(|n| n / eta + n % eta).max().unwrap_or(0)
}

/// Warning text when a buffer of `lambda` slots would truncate computations
/// and so invalidate the chain model; `None` when `lambda` is large enough.
pub fn buffer_capacity_warning(lambda: usize, n_max: usize, eta: usize) -> Option<String> {
    let need = max_stored_entries(n_max, eta);
    (lambda < need).then(|| {
        format!(
            "buffer size {lambda} is below the {need} entries the scheme can store \
             (n_max = {n_max}, eta = {eta}); the buffer-chain certificate does not apply"
        )
    })
}

/// Buffer-content chain: state space and row-stochastic transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BufferChain {
    eta: usize,
    states: Vec<BufferState>,
    pi: Matrix,
}

impl BufferChain {
    pub fn eta(&self) -> usize {
        self.eta
    }

    pub fn n_max(&self) -> usize {
        self.states.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[BufferState] {
        &self.states
    }

    pub fn pi(&self) -> &Matrix {
        &self.pi
    }

    /// Chain index of `state`, if it belongs to the state space.
    pub fn index_of(&self, state: BufferState) -> Option<usize> {
        (state.coarse < self.eta)
            .then(|| state.index(self.eta))
            .filter(|&i| i < self.dim())
    }
}

/// Builds the buffer chain for effective availability `l` (length
/// `n_max + 1`) and fine-law cost `eta`.
pub fn transition_matrix(l: &[f64], eta: usize) -> Result<BufferChain> {
    validate_probability_vector(l)?;
    let n_max = l.len() - 1;
    let states = state_space(n_max, eta)?;
    let dim = n_max + 1;
    let mut pi = Matrix::zeros(dim, dim);
    for i in 1..=dim {
        let row = pi.row_mut(i - 1);
        row[1..].copy_from_slice(&l[1..]);
        row[shift_target(i, eta) - 1] += l[0];
    }
    Ok(BufferChain { eta, states, pi })
}

/// Chain of the channel/processor model for a scheme with fine-law cost `eta`.
pub fn buffer_chain(channel: &ChannelModel, eta: usize) -> Result<BufferChain> {
    transition_matrix(channel.l(), eta)
}

#[cfg(test)]
mod tests {
    use super::*;

    const L_EXAMPLE: [f64; 5] = [0.6, 0.1, 0.1, 0.1, 0.1];

    fn assert_close(a: &[f64], b: &[f64]) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-15, "{a:?} != {b:?}");
        }
    }

    #[test]
    fn effective_availability_examples() {
        let l = effective_availability(0.5, &[0.2; 5]).unwrap();
        assert_close(&l, &L_EXAMPLE);

        let p = [0.1, 0.3, 0.6];
        assert_eq!(effective_availability(1.0, &p).unwrap(), p.to_vec());
        assert_eq!(effective_availability(0.0, &p).unwrap(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn effective_availability_rejects_bad_input() {
        assert!(matches!(
            effective_availability(1.5, &[0.5, 0.5]),
            Err(Error::Probability { name: "q", .. })
        ));
        assert!(matches!(
            effective_availability(0.5, &[0.5, 0.4]),
            Err(Error::ProbabilityVector(_))
        ));
        assert!(effective_availability(0.5, &[]).is_err());
        assert!(effective_availability(0.5, &[1.2, -0.2]).is_err());
        assert!(effective_availability(f64::NAN, &[1.0]).is_err());
        // within tolerance, not renormalised
        let l = effective_availability(1.0, &[0.5, 0.5 + 1e-10]).unwrap();
        assert_eq!(l[1], 0.5 + 1e-10);
    }

    #[test]
    fn state_space_examples() {
        let pairs = |v: Vec<BufferState>| v.into_iter().map(|s| (s.fine, s.coarse)).collect::<Vec<_>>();
        assert_eq!(
            pairs(state_space(4, 2).unwrap()),
            vec![(0, 0), (0, 1), (1, 0), (1, 1), (2, 0)]
        );
        assert_eq!(
            pairs(state_space(3, 1).unwrap()),
            vec![(0, 0), (1, 0), (2, 0), (3, 0)]
        );
        assert_eq!(
            pairs(state_space(4, 3).unwrap()),
            vec![(0, 0), (0, 1), (0, 2), (1, 0), (1, 1)]
        );
        assert!(state_space(4, 0).is_err());
        assert!(state_space(0, 2).is_err());
    }

    #[test]
    fn shift_target_examples() {
        assert_eq!(shift_target(5, 2), 3);
        assert_eq!(shift_target(1, 4), 1);
        assert_eq!(shift_target(3, 3), 2);
        assert_eq!(shift_target(2, 1), 1);
        assert_eq!(shift_target(4, 3), 1);
    }

    #[test]
    fn shift_target_matches_state_semantics() {
        for eta in 1..5 {
            let states = state_space(12, eta).unwrap();
            for (i, s) in states.iter().enumerate() {
                let shifted = match (s.fine, s.coarse) {
                    (0, 0) => BufferState::EMPTY,
                    (0, c) => BufferState::new(0, c - 1),
                    (f, c) => BufferState::new(f - 1, c),
                };
                assert_eq!(shift_target(i + 1, eta) - 1, shifted.index(eta));
            }
        }
    }

    #[test]
    fn transition_matrix_eta2_example_row() {
        let chain = transition_matrix(&L_EXAMPLE, 2).unwrap();
        assert_close(chain.pi().row(3), &[0.0, 0.7, 0.1, 0.1, 0.1]);
        assert_close(chain.pi().row(4), &[0.0, 0.1, 0.7, 0.1, 0.1]);
        for i in 0..3 {
            assert_close(chain.pi().row(i), &L_EXAMPLE);
        }
    }

    #[test]
    fn transition_matrix_eta1_pattern() {
        let l = [0.5, 0.3, 0.2];
        let chain = transition_matrix(&l, 1).unwrap();
        assert_eq!(
            chain.pi().to_rows(),
            vec![vec![0.5, 0.3, 0.2], vec![0.5, 0.3, 0.2], vec![0.0, 0.8, 0.2]]
        );
    }

    #[test]
    fn column_one_support() {
        for eta in 1..=4 {
            let chain = transition_matrix(&[0.3, 0.2, 0.1, 0.1, 0.1, 0.1, 0.1], eta).unwrap();
            let support: Vec<usize> = (0..chain.dim())
                .filter(|&i| chain.pi()[(i, 0)] != 0.0)
                .map(|i| i + 1)
                .collect();
            let mut expected = vec![1, 2, eta + 1];
            expected.dedup();
            assert_eq!(support, expected, "eta = {eta}");
            for i in &support {
                assert_eq!(chain.pi()[(i - 1, 0)], 0.3);
            }
        }
    }

    #[test]
    fn transition_matrix_rejects_invalid_l() {
        assert!(transition_matrix(&[0.5, 0.6], 1).is_err());
        assert!(transition_matrix(&[1.0], 1).is_err());
        assert!(transition_matrix(&[0.5, 0.5], 0).is_err());
    }

    #[test]
    fn capacity_requirement() {
        assert_eq!(max_stored_entries(4, 2), 2);
        assert_eq!(max_stored_entries(4, 1), 4);
        assert_eq!(max_stored_entries(5, 3), 3);
        assert!(buffer_capacity_warning(4, 4, 2).is_none());
        assert!(buffer_capacity_warning(3, 4, 1).is_some());
    }

    #[test]
    fn index_of_roundtrip() {
        let chain = transition_matrix(&L_EXAMPLE, 2).unwrap();
        for (i, s) in chain.states().iter().enumerate() {
            assert_eq!(chain.index_of(*s), Some(i));
        }
        assert_eq!(chain.index_of(BufferState::new(0, 2)), None);
        assert_eq!(chain.index_of(BufferState::new(3, 0)), None);
    }
}
