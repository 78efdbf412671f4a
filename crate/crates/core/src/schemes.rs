//! Executable control algorithms: the unbuffered baselines `B1`/`B2` and the
//! buffered anytime schemes `A1` (coarse law only) and `A2` (fine law first,
//! then coarse).
//!
//! Steps are pure: they take the previous [`Buffer`] by value and return the
//! input to apply together with the updated buffer. State and input types
//! are generic; the plant map is passed in so that predictions iterate the
//! same model the caller simulates.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::markov::BufferState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Coarse law when a computation arrives, zero otherwise.
    B1,
    /// Fine law if `N >= eta`, coarse law if `0 < N < eta`, zero otherwise.
    B2,
    /// Buffered coarse-law predictions.
    A1,
    /// Buffered fine-law predictions followed by coarse-law predictions.
    A2,
}

impl Scheme {
    pub fn is_buffered(self) -> bool {
        matches!(self, Scheme::A1 | Scheme::A2)
    }

    pub fn uses_fine_law(self) -> bool {
        matches!(self, Scheme::B2 | Scheme::A2)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scheme::B1 => "B1",
            Scheme::B2 => "B2",
            Scheme::A1 => "A1",
            Scheme::A2 => "A2",
        };
        f.write_str(s)
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "B1" => Ok(Scheme::B1),
            "B2" => Ok(Scheme::B2),
            "A1" => Ok(Scheme::A1),
            "A2" => Ok(Scheme::A2),
            other => Err(Error::Parameter {
                name: "scheme",
                reason: format!("unknown scheme `{other}` (expected B1, B2, A1 or A2)"),
            }),
        }
    }
}

/// Channel outcome of one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gamma {
    /// Triggered but the packet was lost.
    Dropout,
    /// Triggered and delivered.
    Delivered,
    /// State inside the threshold; the sensor stayed silent.
    Silent,
}

impl Gamma {
    pub fn as_u8(self) -> u8 {
        match self {
            Gamma::Dropout => 0,
            Gamma::Delivered => 1,
            Gamma::Silent => 2,
        }
    }
}

impl TryFrom<u8> for Gamma {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Gamma::Dropout),
            1 => Ok(Gamma::Delivered),
            2 => Ok(Gamma::Silent),
            other => Err(Error::Gamma(other)),
        }
    }
}

/// Channel outcome and processor availability `(gamma, N)` of one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StepEnv {
    gamma: Gamma,
    n: usize,
}

impl StepEnv {
    /// `n` must be zero unless the packet was delivered.
    pub fn new(gamma: Gamma, n: usize) -> Result<Self> {
        if gamma != Gamma::Delivered && n != 0 {
            return Err(Error::Availability { gamma: gamma.as_u8(), n });
        }
        Ok(Self { gamma, n })
    }

    pub fn from_raw(gamma: u8, n: usize) -> Result<Self> {
        Self::new(Gamma::try_from(gamma)?, n)
    }

    pub const fn silent() -> Self {
        Self { gamma: Gamma::Silent, n: 0 }
    }

    pub fn gamma(&self) -> Gamma {
        self.gamma
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn computes(&self) -> bool {
        self.gamma == Gamma::Delivered && self.n > 0
    }
}

type LawFn<S, U> = dyn Fn(&S) -> U + Send + Sync;

/// A state-feedback law with its processing cost and contraction bound.
pub struct ControlLaw<S, U> {
    law: Arc<LawFn<S, U>>,
    cost_units: usize,
    contraction: f64,
}

impl<S, U> Clone for ControlLaw<S, U> {
    fn clone(&self) -> Self {
        Self { law: Arc::clone(&self.law), cost_units: self.cost_units, contraction: self.contraction }
    }
}

impl<S, U> fmt::Debug for ControlLaw<S, U> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlLaw")
            .field("cost_units", &self.cost_units)
            .field("contraction", &self.contraction)
            .finish_non_exhaustive()
    }
}

impl<S, U> ControlLaw<S, U> {
    pub fn new<F>(cost_units: usize, contraction: f64, law: F) -> Result<Self>
    where
        F: Fn(&S) -> U + Send + Sync + 'static,
    {
        if cost_units == 0 {
            return Err(Error::Parameter {
                name: "cost_units",
                reason: "a control law costs at least one processing unit".into(),
            });
        }
        Ok(Self { law: Arc::new(law), cost_units, contraction })
    }

    pub fn evaluate(&self, x: &S) -> U {
        (self.law)(x)
    }

    pub fn cost_units(&self) -> usize {
        self.cost_units
    }

    pub fn contraction(&self) -> f64 {
        self.contraction
    }
}

/// Fixed-length buffer of tentative future inputs.
///
/// The first `fine` entries came from the fine law, the next `coarse` from
/// the coarse law, the rest are zero (`U::default()`).
#[derive(Debug, Clone, PartialEq)]
pub struct Buffer<U> {
    values: Vec<U>,
    fine: usize,
    coarse: usize,
}

impl<U: Copy + Default> Buffer<U> {
    /// Empty buffer with `lambda` slots.
    pub fn new(lambda: usize) -> Result<Self> {
        if lambda == 0 {
            return Err(Error::Parameter { name: "lambda", reason: "buffer needs at least one slot".into() });
        }
        Ok(Self { values: vec![U::default(); lambda], fine: 0, coarse: 0 })
    }

    pub fn capacity(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[U] {
        &self.values
    }

    pub fn fine_count(&self) -> usize {
        self.fine
    }

    pub fn coarse_count(&self) -> usize {
        self.coarse
    }

    pub fn state(&self) -> BufferState {
        BufferState::new(self.fine, self.coarse)
    }

    pub fn head(&self) -> U {
        self.values[0]
    }

    pub fn cleared(mut self) -> Self {
        self.values.iter_mut().for_each(|v| *v = U::default());
        self.fine = 0;
        self.coarse = 0;
        self
    }

    /// Drops the head, moves everything up one slot and zeroes the tail.
    pub fn shift(mut self) -> Self {
        self.values.rotate_left(1);
        if let Some(last) = self.values.last_mut() {
            *last = U::default();
        }
        if self.fine > 0 {
            self.fine -= 1;
        } else if self.coarse > 0 {
            self.coarse -= 1;
        }
        self
    }

    /// Refills from `x`: `fine` predictions with `kappa2`, then `coarse`
    /// with `kappa1`, each evaluated on the state predicted by `plant`.
    /// Entries beyond the capacity are never computed.
    fn refill<S: Clone>(
        mut self,
        x: &S,
        plan: [(Option<&ControlLaw<S, U>>, usize); 2],
        plant: &impl Fn(&S, &U) -> S,
    ) -> Self {
        let capacity = self.capacity();
        self.values.iter_mut().for_each(|v| *v = U::default());
        let mut counts = [0usize; 2];
        let mut chi = x.clone();
        let mut slot = 0;
        for (which, (law, count)) in plan.into_iter().enumerate() {
            let Some(law) = law else { continue };
            for _ in 0..count {
                if slot == capacity {
                    break;
                }
                let u = law.evaluate(&chi);
                self.values[slot] = u;
                chi = plant(&chi, &u);
                slot += 1;
                counts[which] += 1;
            }
        }
        self.fine = counts[0];
        self.coarse = counts[1];
        self
    }
}

/// One step of the single-law buffered scheme.
pub fn a1_step<S: Clone, U: Copy + Default>(
    buffer: Buffer<U>,
    x: &S,
    env: StepEnv,
    kappa1: &ControlLaw<S, U>,
    plant: &impl Fn(&S, &U) -> S,
) -> (U, Buffer<U>) {
    let next = match env.gamma {
        Gamma::Silent => return (U::default(), buffer.cleared()),
        _ if env.computes() => buffer.refill(x, [(None, 0), (Some(kappa1), env.n)], plant),
        _ => buffer.shift(),
    };
    (next.head(), next)
}

/// One step of the two-law buffered scheme. `N` units buy
/// `floor(N / eta)` fine predictions followed by `N mod eta` coarse ones,
/// `eta` being the fine law's cost.
pub fn a2_step<S: Clone, U: Copy + Default>(
    buffer: Buffer<U>,
    x: &S,
    env: StepEnv,
    kappa1: &ControlLaw<S, U>,
    kappa2: &ControlLaw<S, U>,
    plant: &impl Fn(&S, &U) -> S,
) -> (U, Buffer<U>) {
    let eta = kappa2.cost_units();
    let next = match env.gamma {
        Gamma::Silent => return (U::default(), buffer.cleared()),
        _ if env.computes() => buffer.refill(
            x,
            [(Some(kappa2), env.n / eta), (Some(kappa1), env.n % eta)],
            plant,
        ),
        _ => buffer.shift(),
    };
    (next.head(), next)
}

/// Input of the unbuffered baselines. `kappa2` is only consulted by `B2`.
pub fn b_step<S, U: Copy + Default>(
    variant: Scheme,
    x: &S,
    env: StepEnv,
    kappa1: &ControlLaw<S, U>,
    kappa2: Option<&ControlLaw<S, U>>,
) -> Result<U> {
    if !env.computes() {
        return match variant {
            Scheme::B1 | Scheme::B2 => Ok(U::default()),
            other => Err(not_a_baseline(other)),
        };
    }
    match variant {
        Scheme::B1 => Ok(kappa1.evaluate(x)),
        Scheme::B2 => {
            let kappa2 = kappa2.ok_or_else(missing_fine_law)?;
            if env.n >= kappa2.cost_units() {
                Ok(kappa2.evaluate(x))
            } else {
                Ok(kappa1.evaluate(x))
            }
        }
        other => Err(not_a_baseline(other)),
    }
}

fn not_a_baseline(s: Scheme) -> Error {
    Error::Parameter { name: "scheme", reason: format!("{s} is buffered; use a1_step/a2_step") }
}

fn missing_fine_law() -> Error {
    Error::Parameter { name: "kappa2", reason: "scheme needs a fine control law".into() }
}

/// A scheme together with its control laws and buffer size.
#[derive(Debug, Clone)]
pub struct Controller<S, U> {
    scheme: Scheme,
    kappa1: ControlLaw<S, U>,
    kappa2: Option<ControlLaw<S, U>>,
    lambda: usize,
}

impl<S: Clone, U: Copy + Default> Controller<S, U> {
    pub fn new(
        scheme: Scheme,
        kappa1: ControlLaw<S, U>,
        kappa2: Option<ControlLaw<S, U>>,
        lambda: usize,
    ) -> Result<Self> {
        if scheme.uses_fine_law() && kappa2.is_none() {
            return Err(missing_fine_law());
        }
        if lambda == 0 {
            return Err(Error::Parameter { name: "lambda", reason: "buffer needs at least one slot".into() });
        }
        Ok(Self { scheme, kappa1, kappa2, lambda })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn kappa1(&self) -> &ControlLaw<S, U> {
        &self.kappa1
    }

    pub fn kappa2(&self) -> Option<&ControlLaw<S, U>> {
        self.kappa2.as_ref()
    }

    /// Fine-law cost, 1 for single-law schemes.
    pub fn eta(&self) -> usize {
        self.kappa2.as_ref().map_or(1, ControlLaw::cost_units)
    }

    pub fn empty_buffer(&self) -> Buffer<U> {
        Buffer::new(self.lambda).expect("lambda checked at construction")
    }

    /// Dispatches to the scheme's step. Unbuffered schemes return a cleared buffer.
    pub fn step(
        &self,
        buffer: Buffer<U>,
        x: &S,
        env: StepEnv,
        plant: &impl Fn(&S, &U) -> S,
    ) -> (U, Buffer<U>) {
        match self.scheme {
            Scheme::A1 => a1_step(buffer, x, env, &self.kappa1, plant),
            Scheme::A2 => {
                let kappa2 = self.kappa2.as_ref().expect("checked at construction");
                a2_step(buffer, x, env, &self.kappa1, kappa2, plant)
            }
            Scheme::B1 | Scheme::B2 => {
                let u = b_step(self.scheme, x, env, &self.kappa1, self.kappa2.as_ref())
                    .expect("baseline scheme with laws checked at construction");
                (u, buffer.cleared())
            }
        }
    }
}
