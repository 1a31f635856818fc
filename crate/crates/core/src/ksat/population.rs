//! Population dynamics for the coupled K-SAT survey-propagation equations.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use super::message::{check_unit, clause_factor, eta_to_phi, phi_to_eta};
use crate::error::{invalid, Result};
use crate::rng;
use crate::table::Table;

/// Populations pinned outside the chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Seeding {
    /// Nontrivial population left of the chain, trivial on the right.
    OneSided,
    /// Trivial populations on both sides.
    TwoSided,
}

impl Seeding {
    pub fn as_str(self) -> &'static str {
        match self {
            Seeding::OneSided => "one-sided",
            Seeding::TwoSided => "two-sided",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "one-sided" => Some(Seeding::OneSided),
            "two-sided" => Some(Seeding::TwoSided),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PopulationParams {
    pub k: usize,
    pub alpha: f64,
    pub half_length: usize,
    pub width: usize,
    /// Samples per position.
    pub size: usize,
    pub seed: u64,
}

impl PopulationParams {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(invalid("k", "clauses need at least two variables"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(invalid("alpha", format!("{} must be positive", self.alpha)));
        }
        if self.width == 0 {
            return Err(invalid("width", "must be at least 1"));
        }
        if self.size == 0 {
            return Err(invalid("size", "population must be non-empty"));
        }
        Ok(())
    }

    pub fn positions(&self) -> usize {
        2 * self.half_length + 1
    }

    /// The single-position ensemble with the same `k`, `alpha` and size.
    pub fn uncoupled(&self) -> Self {
        PopulationParams {
            half_length: 0,
            width: 1,
            ..*self
        }
    }
}

/// Populations of warnings at positions `−L..=L`, stored in entropic form
/// `φ = −ln(1−η)`, plus the pinned populations outside the chain.
#[derive(Clone, Debug, PartialEq)]
pub struct PopulationEnsemble {
    pub params: PopulationParams,
    phi: Vec<Vec<f64>>,
    left: Vec<f64>,
    right: Vec<f64>,
    sweeps: u64,
    degenerate: usize,
}

impl PopulationEnsemble {
    /// Every sample at every chain position equals `eta`; the pinned
    /// populations are given in entropic form.
    pub fn new(params: PopulationParams, eta: f64, left: Vec<f64>, right: Vec<f64>) -> Result<Self> {
        params.validate()?;
        check_unit("eta", eta)?;
        for (name, b) in [("left", &left), ("right", &right)] {
            if b.is_empty() || b.iter().any(|p| !(*p >= 0.0)) {
                return Err(invalid(name, "pinned population must be non-empty with φ ≥ 0"));
            }
        }
        let phi = vec![vec![eta_to_phi(eta); params.size]; params.positions()];
        Ok(PopulationEnsemble {
            params,
            phi,
            left,
            right,
            sweeps: 0,
            degenerate: 0,
        })
    }

    /// Chain initialized at `eta` with trivial pinned populations.
    pub fn trivial_boundaries(params: PopulationParams, eta: f64) -> Result<Self> {
        Self::new(params, eta, vec![0.0], vec![0.0])
    }

    /// Chain initialized at `eta` with pinned populations chosen by
    /// `seeding`. The nontrivial population is the uncoupled ensemble after
    /// `boundary_sweeps` sweeps from the same initial value.
    pub fn seeded(params: PopulationParams, eta: f64, seeding: Seeding, boundary_sweeps: usize) -> Result<Self> {
        let left = match seeding {
            Seeding::TwoSided => vec![0.0],
            Seeding::OneSided => {
                let mut u = Self::trivial_boundaries(params.uncoupled(), eta)?;
                u.params.seed = rng::derive_seed(params.seed, &[u64::MAX - 1]);
                u.run(boundary_sweeps);
                u.phi.swap_remove(0)
            }
        };
        Self::new(params, eta, left, vec![0.0])
    }

    pub fn sweeps(&self) -> u64 {
        self.sweeps
    }

    /// Degenerate clause factors met during the last sweep.
    pub fn degenerate(&self) -> usize {
        self.degenerate
    }

    fn index(&self, z: i64) -> Option<usize> {
        let l = self.params.half_length as i64;
        (-l..=l).contains(&z).then(|| (z + l) as usize)
    }

    /// Entropic samples at position `z` of the chain.
    pub fn phi(&self, z: i64) -> Option<&[f64]> {
        self.index(z).map(|i| &self.phi[i][..])
    }

    /// Warning samples at position `z` of the chain.
    pub fn eta(&self, z: i64) -> Option<Vec<f64>> {
        self.phi(z).map(|p| p.iter().map(|&x| phi_to_eta(x)).collect())
    }

    pub fn left_boundary(&self) -> &[f64] {
        &self.left
    }

    pub fn mean_phi(&self, z: i64) -> Option<f64> {
        self.phi(z).map(mean)
    }

    /// `(z, mean φ)` over the chain.
    pub fn profile(&self) -> Vec<(i64, f64)> {
        let l = self.params.half_length as i64;
        (-l..=l).zip(&self.phi).map(|(z, p)| (z, mean(p))).collect()
    }

    /// Mean `φ` over the bulk positions `|z| ≤ L/2`.
    pub fn bulk_mean_phi(&self) -> f64 {
        let h = (self.params.half_length / 2) as i64;
        let vals: Vec<f64> = self.profile().into_iter().filter(|(z, _)| z.abs() <= h).map(|(_, m)| m).collect();
        mean(&vals)
    }

    /// Number of chain positions whose mean `φ` exceeds half of `reference`.
    pub fn nontrivial_extent(&self, reference: f64) -> usize {
        self.phi.iter().filter(|p| mean(p) > 0.5 * reference).count()
    }

    /// True once the chain and pinned populations are all exactly zero,
    /// which no further sweep can change.
    pub fn is_trivial(&self) -> bool {
        self.phi.iter().chain([&self.left, &self.right]).all(|p| p.iter().all(|&x| x == 0.0))
    }

    /// Profile with columns `z, mean_phi, q10, q50, q90`.
    pub fn to_table(&self) -> Table {
        let p = &self.params;
        let mut t = Table::new(["z", "mean_phi", "q10", "q50", "q90"])
            .param("k", p.k)
            .param("alpha", p.alpha)
            .param("half_length", p.half_length)
            .param("width", p.width)
            .param("size", p.size)
            .param("seed", p.seed)
            .param("sweeps", self.sweeps);
        let l = p.half_length as i64;
        for (z, pop) in (-l..=l).zip(&self.phi) {
            let mut s = pop.clone();
            s.sort_by(f64::total_cmp);
            t.push_row([
                z.to_string(),
                mean(pop).to_string(),
                quantile(&s, 0.1).to_string(),
                quantile(&s, 0.5).to_string(),
                quantile(&s, 0.9).to_string(),
            ]);
        }
        t
    }

    /// One sweep: every position refreshes each of its samples once, in a
    /// random order. Reads from other positions use the populations at the
    /// start of the sweep; reads from the position itself see refreshed
    /// samples.
    pub fn step(&mut self) {
        let p = self.params;
        let poisson = Poisson::new(p.alpha * p.k as f64 / 2.0).expect("alpha validated positive");
        let snapshot = &self.phi;
        let (left, right) = (&self.left, &self.right);
        let sweep = self.sweeps;
        let results: Vec<(Vec<f64>, usize)> = (0..snapshot.len())
            .into_par_iter()
            .map(|i| {
                let mut rng = rng::stream(p.seed, &[sweep, i as u64]);
                let mut own = snapshot[i].clone();
                let mut order: Vec<usize> = (0..p.size).collect();
                order.shuffle(&mut rng);
                let mut degenerate = 0;
                let src = Sources {
                    snapshot,
                    left,
                    right,
                    center: i as i64,
                };
                for slot in order {
                    let (phi, d) = refresh(&p, &poisson, &src, &own, &mut rng);
                    own[slot] = phi;
                    degenerate += d;
                }
                (own, degenerate)
            })
            .collect();
        self.degenerate = 0;
        for (i, (pop, d)) in results.into_iter().enumerate() {
            self.phi[i] = pop;
            self.degenerate += d;
        }
        self.sweeps += 1;
    }

    /// Runs `sweeps` sweeps, stopping early once the state is exactly trivial.
    pub fn run(&mut self, sweeps: usize) {
        for _ in 0..sweeps {
            if self.is_trivial() {
                self.sweeps += 1;
                continue;
            }
            self.step();
        }
    }
}

/// Applies one sweep and returns the updated ensemble.
pub fn population_dynamics_step(mut pop: PopulationEnsemble) -> PopulationEnsemble {
    pop.step();
    pop
}

struct Sources<'a> {
    snapshot: &'a [Vec<f64>],
    left: &'a [f64],
    right: &'a [f64],
    center: i64,
}

impl Sources<'_> {
    #[inline]
    fn draw(&self, idx: i64, own: &[f64], rng: &mut ChaCha8Rng) -> f64 {
        let pop: &[f64] = if idx < 0 {
            self.left
        } else if idx as usize >= self.snapshot.len() {
            self.right
        } else if idx == self.center {
            own
        } else {
            &self.snapshot[idx as usize]
        };
        if pop.len() == 1 {
            pop[0]
        } else {
            pop[rng.random_range(0..pop.len())]
        }
    }
}

/// New entropic warning for a clause at `src.center`. Each of the `k−1`
/// other variables sits `k₀` positions to the right and receives
/// Poisson(αK/2) supporting and impeding warnings from clauses `k₁`
/// positions to its left.
#[inline]
fn refresh(p: &PopulationParams, poisson: &Poisson<f64>, src: &Sources, own: &[f64], rng: &mut ChaCha8Rng) -> (f64, usize) {
    let w = p.width as i64;
    let mut eta = 1.0;
    let mut degenerate = 0;
    for _ in 1..p.k {
        let k0 = if w == 1 { 0 } else { rng.random_range(0..w) };
        let mut x = [0.0f64; 2];
        for xs in &mut x {
            let n = poisson.sample(rng) as usize;
            for _ in 0..n {
                let k1 = if w == 1 { 0 } else { rng.random_range(0..w) };
                *xs += src.draw(src.center + k0 - k1, own, rng);
            }
        }
        let (f, d) = clause_factor((-x[0]).exp(), (-x[1]).exp());
        eta *= f;
        degenerate += d as usize;
        if eta == 0.0 {
            break;
        }
    }
    (eta_to_phi(eta), degenerate)
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let i = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[i]
}
