//! The random bipartite primary-utility overlay.

use crate::msg::NodeId;
use crate::rng::{stream, TAG_FACTORY};
use alloc::vec::Vec;
use rand::RngCore;

/// Edge probability `min(1, c * sqrt(ln n / n))`.
pub fn edge_probability(n: u32, c: f64) -> f64 {
    if n <= 1 {
        return 1.0;
    }
    let nf = n as f64;
    let q = c * libm::sqrt(libm::log(nf) / nf);
    q.min(1.0)
}

/// Utility set of primary `p`, drawn from p's factory stream.
pub fn draw_utilities(seed: u64, n: u32, q: f64, p: NodeId) -> Vec<NodeId> {
    let mut rng = stream(seed, TAG_FACTORY, p as u64);
    if q >= 1.0 {
        return (0..n).collect();
    }
    let thr = (q * 18_446_744_073_709_551_616.0) as u64;
    (0..n).filter(|_| rng.next_u64() < thr).collect()
}

/// Overlay whose utility sets are drawn on first use, i.e. at a primary's
/// first activation.
#[derive(Clone, Debug)]
pub struct PuGraph {
    seed: u64,
    n: u32,
    q: f64,
    u_of: Vec<Option<Vec<NodeId>>>,
}

impl PuGraph {
    pub fn new(seed: u64, n: u32, c: f64) -> Self {
        PuGraph { seed, n, q: edge_probability(n, c), u_of: (0..n).map(|_| None).collect() }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn ensure(&mut self, p: NodeId) {
        let slot = &mut self.u_of[p as usize];
        if slot.is_none() {
            *slot = Some(draw_utilities(self.seed, self.n, self.q, p));
        }
    }

    /// U(p). Panics if `p` was never activated.
    pub fn utilities(&self, p: NodeId) -> &[NodeId] {
        self.u_of[p as usize].as_deref().expect("utility set drawn at first activation")
    }

    pub fn drawn(&self, p: NodeId) -> Option<&[NodeId]> {
        self.u_of[p as usize].as_deref()
    }

    pub fn full(seed: u64, n: u32, c: f64) -> FullGraph {
        let q = edge_probability(n, c);
        let u_of: Vec<Vec<NodeId>> = (0..n).map(|p| draw_utilities(seed, n, q, p)).collect();
        let mut p_of = alloc::vec![Vec::new(); n as usize];
        for (p, us) in u_of.iter().enumerate() {
            for &u in us {
                p_of[u as usize].push(p as NodeId);
            }
        }
        FullGraph { n, c, q, u_of, p_of }
    }
}

/// The whole overlay, for offline property checks.
#[derive(Clone, Debug)]
pub struct FullGraph {
    pub n: u32,
    pub c: f64,
    pub q: f64,
    pub u_of: Vec<Vec<NodeId>>,
    pub p_of: Vec<Vec<NodeId>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OverlayReport {
    /// Pairs of primaries whose common utilities fall below `eps * n`, with
    /// that many non-fragile utilities left over at worst.
    pub common_failures: u64,
    pub min_common: u32,
    pub min_common_required: f64,
    pub max_degree: u32,
    pub degree_bound: f64,
}

impl FullGraph {
    /// Property 1: every pair p, p' (including p = p') shares at least
    /// `ceil(eps n)` utilities... approximated by requiring more than
    /// `n - ceil(eps n)` common utilities so any fragile set leaves one intact.
    /// Property 2 is reported against `c_prime * sqrt(n ln n)`.
    pub fn check(&self, eps: f64, c_prime: f64) -> OverlayReport {
        let n = self.n as usize;
        let nf = self.n as f64;
        let fragile = nf - libm::ceil(eps * nf);
        let mut bits: Vec<Vec<u64>> = Vec::with_capacity(n);
        for us in &self.u_of {
            let mut b = alloc::vec![0u64; n.div_ceil(64)];
            for &u in us {
                b[u as usize / 64] |= 1 << (u % 64);
            }
            bits.push(b);
        }
        let mut failures = 0;
        let mut min_common = u32::MAX;
        for i in 0..n {
            for j in i..n {
                let c: u32 = bits[i].iter().zip(&bits[j]).map(|(a, b)| (a & b).count_ones()).sum();
                min_common = min_common.min(c);
                if (c as f64) <= fragile {
                    failures += 1;
                }
            }
        }
        let max_degree = self
            .u_of
            .iter()
            .chain(self.p_of.iter())
            .map(|v| v.len() as u32)
            .max()
            .unwrap_or(0);
        OverlayReport {
            common_failures: failures,
            min_common,
            min_common_required: fragile + 1.0,
            max_degree,
            degree_bound: c_prime * libm::sqrt(nf * libm::log(nf)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lazy_matches_full() {
        let mut g = PuGraph::new(9, 50, 3.0);
        let f = PuGraph::full(9, 50, 3.0);
        for p in 0..50 {
            g.ensure(p);
            assert_eq!(g.utilities(p), f.u_of[p as usize].as_slice());
        }
    }

    #[test]
    fn probability_clamps() {
        assert_eq!(edge_probability(8, 3.0), 1.0);
        let q = edge_probability(4096, 3.0);
        assert!((q - 3.0 * (libm::log(4096.0) / 4096.0f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn complete_graph_passes() {
        let r = PuGraph::full(1, 16, 3.0).check(0.1, 2.0);
        assert_eq!(r.common_failures, 0);
        assert_eq!(r.min_common, 16);
    }
}
