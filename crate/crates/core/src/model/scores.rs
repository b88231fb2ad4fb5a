//! Score models: how good a published distribution is, and how to produce a
//! distribution with a prescribed score.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use super::ModelError;

/// A score function together with a way to realize any score in range.
pub trait ScoreModel {
    /// Concrete representation of a published distribution.
    type Release;

    fn n_players(&self) -> usize;
    /// Score of what everybody knows before collaborating (`s0`).
    fn prior_score(&self) -> f64;
    /// Score of the best output computable from all data (`smax`).
    fn max_score(&self) -> f64;
    /// Gain of player `i` publishing alone.
    fn alpha(&self, player: usize) -> f64;
    /// A release whose score equals `target`.
    fn realize(&self, target: f64) -> Result<Self::Release, ModelError>;
    fn score(&self, release: &Self::Release) -> f64;

    fn alphas(&self) -> Vec<f64> {
        (0..self.n_players()).map(|i| self.alpha(i)).collect()
    }
}

fn check_range(target: f64, lo: f64, hi: f64) -> Result<(), ModelError> {
    if !(target >= lo - 1e-9 && target <= hi + 1e-9) {
        return Err(ModelError::Divisibility {
            target,
            reason: format!("outside [{lo}, {hi}]"),
        });
    }
    Ok(())
}

/// Binary entropy in bits.
pub(crate) fn binary_entropy(q: f64) -> f64 {
    if q <= 0.0 || q >= 1.0 {
        return 0.0;
    }
    -(q * libm::log2(q) + (1.0 - q) * libm::log2(1.0 - q))
}

/// A uniformly random `bits`-bit secret XOR-shared among `n` players.
///
/// Score is the information (in bits) a release carries about the secret. A
/// single share carries none, so every `alpha` is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct XorSecret {
    pub players: usize,
    pub bits: usize,
}

/// The first `exact_bits` bits are published exactly; the next bit is
/// published through a binary symmetric channel with crossover
/// `flip_probability`; the rest are uniform noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XorRelease {
    pub bits: usize,
    pub exact_bits: usize,
    pub flip_probability: f64,
}

impl XorRelease {
    /// Probability of observing `observation` when the secret is `secret`.
    /// Bit 0 is the most significant of the `bits`-bit value.
    pub fn likelihood(&self, secret: u64, observation: u64) -> f64 {
        let mut p = 1.0;
        for i in 0..self.bits {
            let shift = self.bits - 1 - i;
            let same = (secret >> shift) & 1 == (observation >> shift) & 1;
            p *= if i < self.exact_bits {
                if same {
                    1.0
                } else {
                    0.0
                }
            } else if i == self.exact_bits {
                if same {
                    1.0 - self.flip_probability
                } else {
                    self.flip_probability
                }
            } else {
                0.5
            };
        }
        p
    }
}

impl XorSecret {
    pub fn new(players: usize, bits: usize) -> Result<Self, ModelError> {
        if players == 0 || bits == 0 || bits > 64 {
            return Err(ModelError::InvalidInstance(
                "xor secret needs >= 1 player and 1..=64 bits".to_string(),
            ));
        }
        Ok(XorSecret { players, bits })
    }
}

impl ScoreModel for XorSecret {
    type Release = XorRelease;

    fn n_players(&self) -> usize {
        self.players
    }

    fn prior_score(&self) -> f64 {
        0.0
    }

    fn max_score(&self) -> f64 {
        self.bits as f64
    }

    fn alpha(&self, _player: usize) -> f64 {
        0.0
    }

    fn realize(&self, target: f64) -> Result<XorRelease, ModelError> {
        check_range(target, 0.0, self.max_score())?;
        let target = target.clamp(0.0, self.max_score());
        let whole = libm::floor(target);
        let exact_bits = whole as usize;
        let frac = target - whole;
        if exact_bits >= self.bits {
            return Ok(XorRelease {
                bits: self.bits,
                exact_bits: self.bits,
                flip_probability: 0.0,
            });
        }
        // 1 - h(q) falls from 1 to 0 as q goes from 0 to 1/2.
        let (mut lo, mut hi) = (0.0f64, 0.5f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 1.0 - binary_entropy(mid) > frac {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(XorRelease {
            bits: self.bits,
            exact_bits,
            flip_probability: 0.5 * (lo + hi),
        })
    }

    fn score(&self, r: &XorRelease) -> f64 {
        if r.exact_bits >= r.bits {
            return r.bits as f64;
        }
        r.exact_bits as f64 + 1.0 - binary_entropy(r.flip_probability)
    }
}

/// A directed graph whose edges are owned one per player; a release is scored
/// by the number of source-to-sink paths it makes certain.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFlow {
    vertices: usize,
    edges: Vec<(usize, usize)>,
    source: usize,
    sink: usize,
    /// All simple source-sink paths as sorted edge-index lists, in DFS order.
    paths: Vec<Vec<usize>>,
}

/// The set of edges published with certainty (sorted indices).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathRelease {
    pub edges: Vec<usize>,
}

/// Maximum number of edges accepted by [`PathFlow`].
pub const PATH_FLOW_MAX_EDGES: usize = 16;

impl PathFlow {
    pub fn new(
        vertices: usize,
        edges: Vec<(usize, usize)>,
        source: usize,
        sink: usize,
    ) -> Result<Self, ModelError> {
        if edges.is_empty() || edges.len() > PATH_FLOW_MAX_EDGES {
            return Err(ModelError::InvalidInstance(format!(
                "path flow needs 1..={PATH_FLOW_MAX_EDGES} edges"
            )));
        }
        if source >= vertices || sink >= vertices || source == sink {
            return Err(ModelError::InvalidInstance(
                "bad source or sink".to_string(),
            ));
        }
        if edges.iter().any(|&(u, v)| u >= vertices || v >= vertices) {
            return Err(ModelError::InvalidInstance(
                "edge endpoint out of range".to_string(),
            ));
        }
        let mut g = PathFlow {
            vertices,
            edges,
            source,
            sink,
            paths: Vec::new(),
        };
        g.paths = g.enumerate_paths();
        Ok(g)
    }

    /// The diamond `s -> a -> t`, `s -> b -> t` with four single-edge owners.
    pub fn diamond() -> Self {
        PathFlow::new(4, vec![(0, 1), (1, 3), (0, 2), (2, 3)], 0, 3).expect("valid diamond")
    }

    pub fn paths(&self) -> &[Vec<usize>] {
        &self.paths
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    fn enumerate_paths(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut visited = vec![false; self.vertices];
        let mut stack = Vec::new();
        visited[self.source] = true;
        self.dfs(self.source, &mut visited, &mut stack, &mut out);
        out
    }

    fn dfs(
        &self,
        v: usize,
        visited: &mut [bool],
        stack: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if v == self.sink {
            let mut p = stack.clone();
            p.sort_unstable();
            out.push(p);
            return;
        }
        for (idx, &(a, b)) in self.edges.iter().enumerate() {
            if a == v && !visited[b] {
                visited[b] = true;
                stack.push(idx);
                self.dfs(b, visited, stack, out);
                stack.pop();
                visited[b] = false;
            }
        }
    }

    fn count_within(&self, edges: &[usize]) -> usize {
        let mut known = [false; PATH_FLOW_MAX_EDGES];
        for &e in edges {
            known[e] = true;
        }
        self.paths
            .iter()
            .filter(|p| p.iter().all(|&e| known[e]))
            .count()
    }

    fn union_of(&self, chosen: impl Iterator<Item = usize>) -> Vec<usize> {
        let mut edges: Vec<usize> = chosen.flat_map(|i| self.paths[i].iter().copied()).collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }
}

impl ScoreModel for PathFlow {
    type Release = PathRelease;

    fn n_players(&self) -> usize {
        self.edges.len()
    }

    fn prior_score(&self) -> f64 {
        0.0
    }

    fn max_score(&self) -> f64 {
        self.paths.len() as f64
    }

    fn alpha(&self, player: usize) -> f64 {
        self.count_within(&[player]) as f64
    }

    /// Reveals the first `k` paths in canonical order. When their union
    /// happens to contain further paths, the first subset of paths (in
    /// bitmask order) whose union contains exactly `k` paths is used.
    fn realize(&self, target: f64) -> Result<PathRelease, ModelError> {
        check_range(target, 0.0, self.max_score())?;
        let k = libm::round(target);
        if libm::fabs(k - target) > 1e-9 {
            return Err(ModelError::Divisibility {
                target,
                reason: "path counts are integers".to_string(),
            });
        }
        let k = k as usize;
        let prefix = self.union_of(0..k);
        if self.count_within(&prefix) == k {
            return Ok(PathRelease { edges: prefix });
        }
        let p = self.paths.len();
        for mask in 0u64..(1u64 << p) {
            if mask.count_ones() as usize > k {
                continue;
            }
            let edges = self.union_of((0..p).filter(|i| mask >> i & 1 == 1));
            if self.count_within(&edges) == k {
                return Ok(PathRelease { edges });
            }
        }
        Err(ModelError::Divisibility {
            target,
            reason: "no edge set contains exactly that many paths".to_string(),
        })
    }

    fn score(&self, release: &PathRelease) -> f64 {
        self.count_within(&release.edges) as f64
    }
}

/// Loci of interest with a hidden true subset. Each player holds per-locus
/// inclusion probabilities. A release is a product distribution over loci.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneLoci {
    truth: Vec<bool>,
    evidence: Vec<Vec<f64>>,
}

/// Independent inclusion probability for every locus.
#[derive(Debug, Clone, PartialEq)]
pub struct LociRelease {
    pub inclusion: Vec<f64>,
}

impl GeneLoci {
    pub fn new(truth: Vec<bool>, evidence: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        if truth.is_empty() || !truth.iter().any(|&b| b) {
            return Err(ModelError::InvalidInstance(
                "gene loci needs at least one true locus".to_string(),
            ));
        }
        if evidence.is_empty()
            || evidence
                .iter()
                .any(|row| row.len() != truth.len() || row.iter().any(|p| !(0.0..=1.0).contains(p)))
        {
            return Err(ModelError::InvalidInstance(
                "evidence must be per-player probabilities over every locus".to_string(),
            ));
        }
        Ok(GeneLoci { truth, evidence })
    }

    pub fn truth(&self) -> &[bool] {
        &self.truth
    }

    fn score_of(&self, inclusion: &[f64]) -> f64 {
        self.truth
            .iter()
            .zip(inclusion)
            .map(|(&t, &p)| if t { p } else { -p })
            .sum()
    }

    /// Loci whose pooled posterior (independent evidence combined in
    /// log-odds over a uniform prior) is more likely than not.
    pub fn consensus_loci(&self) -> Vec<usize> {
        (0..self.truth.len())
            .filter(|&g| {
                let mut log_odds = 0.0;
                for row in &self.evidence {
                    let p = row[g].clamp(1e-12, 1.0 - 1e-12);
                    log_odds += libm::log(p / (1.0 - p));
                }
                log_odds > 0.0
            })
            .collect()
    }
}

impl ScoreModel for GeneLoci {
    type Release = LociRelease;

    fn n_players(&self) -> usize {
        self.evidence.len()
    }

    fn prior_score(&self) -> f64 {
        self.score_of(&vec![0.5; self.truth.len()])
    }

    fn max_score(&self) -> f64 {
        self.truth.iter().filter(|&&b| b).count() as f64
    }

    fn alpha(&self, player: usize) -> f64 {
        (self.score_of(&self.evidence[player]) - self.prior_score()).max(0.0)
    }

    /// Moves every locus from 1/2 toward its truth indicator by the same
    /// fraction `theta`; the score is affine in `theta`.
    fn realize(&self, target: f64) -> Result<LociRelease, ModelError> {
        let (lo, hi) = (self.prior_score(), self.max_score());
        check_range(target, lo, hi)?;
        let theta = ((target - lo) / (hi - lo)).clamp(0.0, 1.0);
        let inclusion = self
            .truth
            .iter()
            .map(|&t| 0.5 + theta * (if t { 1.0 } else { 0.0 } - 0.5))
            .collect();
        Ok(LociRelease { inclusion })
    }

    fn score(&self, release: &LociRelease) -> f64 {
        self.score_of(&release.inclusion)
    }
}

/// Mean estimation from `k_i` Gaussian samples per player with known
/// variance. Score is the reduction of squared error below `sigma^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMean {
    pub sigma: f64,
    pub counts: Vec<u64>,
}

/// The pooled sample mean over `samples` points plus independent noise of
/// variance `noise_variance`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianRelease {
    pub samples: u64,
    pub noise_variance: f64,
}

impl GaussianMean {
    pub fn new(sigma: f64, counts: Vec<u64>) -> Result<Self, ModelError> {
        if !(sigma.is_finite() && sigma > 0.0) || counts.is_empty() || counts.contains(&0) {
            return Err(ModelError::InvalidInstance(
                "gaussian mean needs sigma > 0 and positive sample counts".to_string(),
            ));
        }
        Ok(GaussianMean { sigma, counts })
    }

    fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// `R(N) = sigma^2 * (1 - 1/N)`.
    pub fn reward_for(&self, samples: u64) -> f64 {
        self.variance() * (1.0 - 1.0 / samples as f64)
    }

    pub fn total_samples(&self) -> u64 {
        self.counts.iter().sum()
    }
}

impl ScoreModel for GaussianMean {
    type Release = GaussianRelease;

    fn n_players(&self) -> usize {
        self.counts.len()
    }

    fn prior_score(&self) -> f64 {
        0.0
    }

    fn max_score(&self) -> f64 {
        self.reward_for(self.total_samples())
    }

    fn alpha(&self, player: usize) -> f64 {
        self.reward_for(self.counts[player])
    }

    fn realize(&self, target: f64) -> Result<GaussianRelease, ModelError> {
        check_range(target, 0.0, self.max_score())?;
        let target = target.clamp(0.0, self.max_score());
        let samples = self.total_samples();
        let noise_variance = (self.max_score() - target).max(0.0);
        Ok(GaussianRelease {
            samples,
            noise_variance,
        })
    }

    fn score(&self, r: &GaussianRelease) -> f64 {
        self.variance() - self.variance() / r.samples as f64 - r.noise_variance
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_endpoints() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert!((binary_entropy(0.5) - 1.0).abs() < 1e-15);
        assert!((binary_entropy(0.11) - 0.4999).abs() < 1e-3);
    }

    #[test]
    fn xor_integer_targets_reveal_prefix() {
        let m = XorSecret::new(4, 4).unwrap();
        for k in 0..=4 {
            let r = m.realize(k as f64).unwrap();
            assert_eq!(r.exact_bits, k);
            assert!((m.score(&r) - k as f64).abs() < 1e-12);
        }
        assert!(m.realize(4.5).is_err());
    }

    #[test]
    fn xor_fractional_target() {
        let m = XorSecret::new(3, 3).unwrap();
        let r = m.realize(1.25).unwrap();
        assert_eq!(r.exact_bits, 1);
        assert!((m.score(&r) - 1.25).abs() < 1e-9);
        assert!(r.flip_probability > 0.0 && r.flip_probability < 0.5);
    }

    #[test]
    fn diamond_has_two_paths() {
        let g = PathFlow::diamond();
        assert_eq!(g.max_score(), 2.0);
        assert_eq!(g.alphas(), vec![0.0; 4]);
        assert_eq!(g.paths(), &[vec![0, 1], vec![2, 3]]);
        let r = g.realize(1.0).unwrap();
        assert_eq!(r.edges, vec![0, 1]);
        assert!(matches!(
            g.realize(0.5),
            Err(ModelError::Divisibility { .. })
        ));
    }

    #[test]
    fn path_flow_avoids_induced_paths() {
        // Two parallel routes s->a->t, s->b->t plus a cross edge a->b.
        let g = PathFlow::new(4, vec![(0, 1), (1, 3), (0, 2), (2, 3), (1, 2)], 0, 3).unwrap();
        assert_eq!(g.max_score(), 3.0);
        for k in 0..=3 {
            let r = g.realize(k as f64).unwrap();
            assert_eq!(g.score(&r), k as f64);
        }
    }

    #[test]
    fn gene_loci_extremes() {
        let m = GeneLoci::new(vec![true, true, false, false], vec![vec![0.5; 4]]).unwrap();
        assert_eq!(m.prior_score(), 0.0);
        assert_eq!(m.max_score(), 2.0);
        let full = LociRelease {
            inclusion: vec![1.0, 1.0, 0.0, 0.0],
        };
        assert_eq!(m.score(&full), 2.0);
        let r = m.realize(1.0).unwrap();
        assert!((m.score(&r) - 1.0).abs() < 1e-12);
        assert_eq!(m.alpha(0), 0.0);
    }

    #[test]
    fn gene_loci_consensus() {
        let m = GeneLoci::new(
            vec![true, false, true],
            vec![vec![0.9, 0.4, 0.45], vec![0.6, 0.3, 0.7]],
        )
        .unwrap();
        assert_eq!(m.consensus_loci(), vec![0, 2]);
        assert!(m.alpha(0) > 0.0);
    }

    #[test]
    fn gaussian_example_values() {
        let m = GaussianMean::new(1.0, vec![2, 2]).unwrap();
        assert_eq!(m.alphas(), vec![0.5, 0.5]);
        assert_eq!(m.max_score(), 0.75);
        let ones = GaussianMean::new(1.0, vec![1, 1, 1]).unwrap();
        assert_eq!(ones.alphas(), vec![0.0; 3]);
    }

    #[test]
    fn gaussian_concavity_fails_with_unit_counts() {
        let m = GaussianMean::new(1.0, vec![1, 1]).unwrap();
        let pooled = m.reward_for(2);
        let separate: f64 = m.alphas().iter().sum();
        assert!(pooled > separate);
    }
}
