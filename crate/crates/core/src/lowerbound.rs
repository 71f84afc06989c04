//! Central-entity influence-component process used in the message lower
//! bound, in closed form and by Monte Carlo.

use crate::rng::{stream, StreamRng, TAG_EXPERIMENT};
use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CeParams {
    pub n: u32,
    pub sigma: u32,
    pub f: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CeError {
    SigmaRange,
    ProbabilityRange,
    /// n - 2f < 2n/3 or 2f + sigma > 2n/3.
    NotLargeEnough,
    /// Mean hits exceed sigma/8.
    TailRegime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Bernoulli,
    Mechanistic,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Bernoulli => "bernoulli",
            Mode::Mechanistic => "mechanistic",
        }
    }
}

/// Which non-trivial component the central entity extends each round.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    Largest,
    Smallest,
    Random,
}

impl CeParams {
    pub fn p(&self) -> f64 {
        (3.0 * self.f as f64 + 1.5 * self.sigma as f64) / self.n as f64
    }

    pub fn rounds(&self) -> u32 {
        2 * self.f
    }

    /// Expected hits in Bernoulli mode.
    pub fn mu(&self) -> f64 {
        self.rounds() as f64 * self.p()
    }

    pub fn validate(&self) -> Result<(), CeError> {
        if self.sigma < 2 || 2 * self.sigma > self.n {
            return Err(CeError::SigmaRange);
        }
        let p = self.p();
        if !(p > 0.0 && p < 1.0) {
            return Err(CeError::ProbabilityRange);
        }
        let (n, f, s) = (self.n as u64, self.f as u64, self.sigma as u64);
        if 3 * (n - (2 * f).min(n)) < 2 * n || 3 * (2 * f + s) > 2 * n {
            return Err(CeError::NotLargeEnough);
        }
        Ok(())
    }

    pub fn no_hit_probability(&self) -> f64 {
        libm::pow(1.0 - self.p(), self.rounds() as f64)
    }

    /// Chernoff bound on P[H >= sigma - 1], valid when mu <= sigma/8.
    pub fn tail_bound(&self) -> Result<f64, CeError> {
        if self.mu() > self.sigma as f64 / 8.0 + 1e-12 {
            return Err(CeError::TailRegime);
        }
        Ok(libm::exp(-(self.sigma as f64) / 24.0))
    }
}

/// One trial's outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Trial {
    pub hits: u32,
    pub rounds: u32,
    /// Sum of non-trivial component sizes after the last round.
    pub covered: u32,
}

/// Non-trivial components over a sparse node set.
pub struct CeState {
    n: u32,
    comp_of: BTreeMap<u32, usize>,
    comps: Vec<Vec<u32>>,
    tokens: Vec<u32>,
    pub exposed: u64,
}

impl CeState {
    /// `sigma` tokens, each at its own node.
    pub fn new(n: u32, sigma: u32) -> Self {
        let mut s = CeState { n, comp_of: BTreeMap::new(), comps: Vec::new(), tokens: Vec::new(), exposed: 0 };
        for v in 0..sigma {
            s.comp_of.insert(v, v as usize);
            s.comps.push(vec![v]);
            s.tokens.push(1);
        }
        s
    }

    /// Sum of the sizes of non-trivial components.
    pub fn covered(&self) -> u32 {
        self.comps.iter().map(|c| c.len() as u32).sum()
    }

    pub fn nontrivial(&self) -> usize {
        self.comps.iter().filter(|c| !c.is_empty()).count()
    }

    pub fn tokens_in_largest(&self) -> u32 {
        self.tokens.iter().copied().max().unwrap_or(0)
    }

    fn select(&self, selection: Selection, rng: &mut StreamRng) -> usize {
        let live: Vec<usize> = (0..self.comps.len()).filter(|&i| !self.comps[i].is_empty()).collect();
        match selection {
            Selection::Largest => *live.iter().max_by_key(|&&i| (self.comps[i].len(), core::cmp::Reverse(i))).unwrap(),
            Selection::Smallest => *live.iter().min_by_key(|&&i| (self.comps[i].len(), i)).unwrap(),
            Selection::Random => live[rng.gen_range(0..live.len())],
        }
    }

    fn absorb(&mut self, into: usize, from: usize) {
        let moved = core::mem::take(&mut self.comps[from]);
        for &v in &moved {
            self.comp_of.insert(v, into);
        }
        self.comps[into].extend(moved);
        self.tokens[into] += core::mem::take(&mut self.tokens[from]);
    }

    fn add_trivial(&mut self, into: usize, v: u32) {
        self.comp_of.insert(v, into);
        self.comps[into].push(v);
    }

    fn any_trivial(&self) -> u32 {
        (0..self.n).find(|v| !self.comp_of.contains_key(v)).expect("a trivial component exists")
    }

    /// One round. Returns whether two non-trivial components met.
    pub fn round(&mut self, selection: Selection, rng: &mut StreamRng) -> bool {
        let c = self.select(selection, rng);
        self.exposed += 2;
        let target = loop {
            let v = rng.gen_range(0..self.n);
            if self.comp_of.get(&v) != Some(&c) {
                break v;
            }
        };
        match self.comp_of.get(&target).copied() {
            Some(other) => {
                self.absorb(c, other);
                let t = self.any_trivial();
                self.add_trivial(c, t);
                true
            }
            None => {
                self.add_trivial(c, target);
                false
            }
        }
    }
}

pub fn trial(params: &CeParams, mode: Mode, selection: Selection, rng: &mut StreamRng) -> Trial {
    let rounds = params.rounds();
    match mode {
        Mode::Bernoulli => {
            let p = params.p();
            let hits = (0..rounds).filter(|_| rng.gen_bool(p)).count() as u32;
            Trial { hits, rounds, covered: params.sigma + rounds }
        }
        Mode::Mechanistic => {
            let mut s = CeState::new(params.n, params.sigma);
            let mut hits = 0;
            for _ in 0..rounds {
                let before = s.covered();
                hits += s.round(selection, rng) as u32;
                debug_assert_eq!(s.covered(), before + 1);
            }
            Trial { hits, rounds, covered: s.covered() }
        }
    }
}

/// Aggregated trials; mergeable so callers may split work.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary {
    pub trials: u64,
    pub no_hit: u64,
    pub tail: u64,
    pub hits: u64,
    pub rounds: u64,
    pub histogram: Vec<u64>,
}

impl Summary {
    pub fn add(&mut self, t: Trial, sigma: u32) {
        self.trials += 1;
        self.no_hit += (t.hits == 0) as u64;
        self.tail += (t.hits + 1 >= sigma) as u64;
        self.hits += t.hits as u64;
        self.rounds += t.rounds as u64;
        if self.histogram.len() <= t.hits as usize {
            self.histogram.resize(t.hits as usize + 1, 0);
        }
        self.histogram[t.hits as usize] += 1;
    }

    pub fn merge(&mut self, o: &Summary) {
        self.trials += o.trials;
        self.no_hit += o.no_hit;
        self.tail += o.tail;
        self.hits += o.hits;
        self.rounds += o.rounds;
        if self.histogram.len() < o.histogram.len() {
            self.histogram.resize(o.histogram.len(), 0);
        }
        for (a, b) in self.histogram.iter_mut().zip(&o.histogram) {
            *a += b;
        }
    }

    pub fn p_no_hit(&self) -> f64 {
        self.no_hit as f64 / self.trials as f64
    }

    pub fn p_tail(&self) -> f64 {
        self.tail as f64 / self.trials as f64
    }

    pub fn hit_rate(&self) -> f64 {
        if self.rounds == 0 { 0.0 } else { self.hits as f64 / self.rounds as f64 }
    }

    /// Standard error of a frequency with true value `q`.
    pub fn se(&self, q: f64) -> f64 {
        libm::sqrt(q * (1.0 - q) / self.trials as f64)
    }
}

/// Trials `range` of an experiment; trial `i` uses its own stream.
pub fn simulate(params: &CeParams, mode: Mode, selection: Selection, seed: u64, range: core::ops::Range<u64>) -> Summary {
    let mut s = Summary::default();
    for i in range {
        let mut rng = stream(seed, TAG_EXPERIMENT, i);
        s.add(trial(params, mode, selection, &mut rng), params.sigma);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn closed_forms() {
        let p = CeParams { n: 100, sigma: 2, f: 10 };
        assert!((p.p() - 0.33).abs() < 1e-12);
        assert!((p.no_hit_probability() - libm::pow(0.67, 20.0)).abs() < 1e-15);
        assert!((p.no_hit_probability() - 3.3e-4).abs() < 0.1e-4);
        let q = CeParams { n: 100, sigma: 2, f: 0 };
        assert_eq!(q.no_hit_probability(), 1.0);
        // p = 0.5, f = 1
        let h = CeParams { n: 12, sigma: 2, f: 1 };
        assert!((h.p() - 0.5).abs() < 1e-12);
        assert!((h.no_hit_probability() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn guards() {
        assert_eq!(CeParams { n: 100, sigma: 51, f: 1 }.validate(), Err(CeError::SigmaRange));
        assert_eq!(CeParams { n: 100, sigma: 1, f: 1 }.validate(), Err(CeError::SigmaRange));
        assert_eq!(CeParams { n: 100, sigma: 40, f: 20 }.validate(), Err(CeError::ProbabilityRange));
        assert_eq!(CeParams { n: 100, sigma: 2, f: 20 }.validate(), Err(CeError::NotLargeEnough));
        assert_eq!(CeParams { n: 100, sigma: 2, f: 10 }.validate(), Ok(()));
    }

    #[test]
    fn tail_regime() {
        let p = CeParams { n: 1320, sigma: 24, f: 10 };
        assert!((p.mu() - 1.0).abs() < 1e-12);
        assert!((p.tail_bound().unwrap() - libm::exp(-1.0)).abs() < 1e-12);
        let b = CeParams { n: 440, sigma: 24, f: 10 };
        assert!((b.mu() - 3.0).abs() < 1e-12);
        assert!(b.tail_bound().is_ok());
        assert_eq!(CeParams { n: 400, sigma: 24, f: 10 }.tail_bound(), Err(CeError::TailRegime));
    }

    #[test]
    fn zero_rounds_never_hit() {
        let p = CeParams { n: 100, sigma: 2, f: 0 };
        for m in [Mode::Bernoulli, Mode::Mechanistic] {
            let s = simulate(&p, m, Selection::Largest, 1, 0..100);
            assert_eq!(s.p_no_hit(), 1.0);
        }
    }

    #[test]
    fn bernoulli_agrees_with_closed_form() {
        let p = CeParams { n: 100, sigma: 2, f: 10 };
        let s = simulate(&p, Mode::Bernoulli, Selection::Largest, 5, 0..20_000);
        let f = s.hit_rate();
        assert!((f - p.p()).abs() < 4.0 * libm::sqrt(p.p() * (1.0 - p.p()) / s.rounds as f64));
    }

    #[test]
    fn mechanistic_hits_less_often() {
        let p = CeParams { n: 300, sigma: 6, f: 20 };
        for st in [Selection::Largest, Selection::Smallest, Selection::Random] {
            let s = simulate(&p, Mode::Mechanistic, st, 9, 0..3_000);
            assert!(s.hit_rate() <= p.p(), "{st:?} {}", s.hit_rate());
        }
    }

    proptest! {
        #[test]
        fn coverage_grows_by_one(n in 30u32..200, sigma in 2u32..10, rounds in 0u32..10, seed: u64) {
            prop_assume!(2 * sigma <= n && sigma + rounds + 1 < n);
            let mut rng = stream(seed, TAG_EXPERIMENT, 0);
            let mut s = CeState::new(n, sigma);
            for r in 0..rounds {
                s.round(Selection::Random, &mut rng);
                prop_assert_eq!(s.covered(), sigma + r + 1);
                prop_assert!(s.nontrivial() >= 1);
            }
            let toks: u32 = s.tokens.iter().sum();
            prop_assert_eq!(toks, sigma);
        }
    }
}
