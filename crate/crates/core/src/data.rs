//! Data distributions, compliant offline datasets, and the NDJSON dataset
//! file format.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameSpec, RewardKind, Shape, PROB_TOL};
use crate::value::Occupancy;

pub const DATASET_FORMAT_VERSION: u32 = 1;

/// Per-timestep sampling distribution `d_h(s, joint)` of dataset tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct DataDistribution {
    horizon: usize,
    states: usize,
    joint: usize,
    /// `[h][s][joint]`
    probs: Vec<f64>,
}

impl DataDistribution {
    pub fn new(shape: &Shape, probs: Vec<f64>) -> Result<Self> {
        let (hz, ns, jc) = (shape.horizon, shape.states, shape.joint_count());
        if probs.len() != hz * ns * jc {
            return Err(Error::Shape(format!(
                "distribution has {} entries, expected {}",
                probs.len(),
                hz * ns * jc
            )));
        }
        for (h, chunk) in probs.chunks(ns * jc).enumerate() {
            if !crate::game::check_distribution(chunk, PROB_TOL) {
                return Err(Error::Probability(format!("d_{h} is not a distribution")));
            }
        }
        Ok(DataDistribution {
            horizon: hz,
            states: ns,
            joint: jc,
            probs,
        })
    }

    /// Uniform over all states and joint actions at every timestep.
    pub fn uniform(shape: &Shape) -> Self {
        let cells = shape.states * shape.joint_count();
        DataDistribution {
            horizon: shape.horizon,
            states: shape.states,
            joint: shape.joint_count(),
            probs: vec![1.0 / cells as f64; shape.horizon * cells],
        }
    }

    pub fn from_occupancy(occ: &Occupancy) -> Self {
        DataDistribution {
            horizon: occ.horizon,
            states: occ.states,
            joint: occ.joint,
            probs: occ.d.clone(),
        }
    }

    /// Nested `[h][s][joint]` layout, as found in config files.
    pub fn from_nested(shape: &Shape, nested: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let ok = nested.len() == shape.horizon
            && nested
                .iter()
                .all(|by_s| by_s.len() == shape.states && by_s.iter().all(|row| row.len() == shape.joint_count()));
        if !ok {
            return Err(Error::Shape("nested distribution does not match H, S, joint".into()));
        }
        Self::new(shape, nested.into_iter().flatten().flatten().collect())
    }

    pub fn get(&self, h: usize, s: usize, joint: usize) -> f64 {
        self.probs[(h * self.states + s) * self.joint + joint]
    }

    /// All `(s, joint)` cells of timestep `h`.
    pub fn at(&self, h: usize) -> &[f64] {
        let len = self.states * self.joint;
        &self.probs[h * len..(h + 1) * len]
    }

    /// Smallest positive entry over all timesteps.
    pub fn p_min(&self) -> f64 {
        self.probs.iter().copied().filter(|p| *p > 0.0).fold(f64::INFINITY, f64::min)
    }

    pub fn check_shape(&self, shape: &Shape) -> Result<()> {
        if self.horizon != shape.horizon || self.states != shape.states || self.joint != shape.joint_count() {
            return Err(Error::Shape("data distribution does not match the game".into()));
        }
        Ok(())
    }
}

/// Sample size above which `2 C(pi) >= C_hat(pi)` holds with probability
/// `1 - delta`: `8 log(S * prod_j A_j * H / delta) / p_min`, rounded up.
pub fn warmup_threshold(shape: &Shape, p_min: f64, delta: f64) -> u64 {
    let cells = (shape.states * shape.joint_count() * shape.horizon) as f64;
    (8.0 * (cells / delta).ln() / p_min).ceil() as u64
}

/// One dataset tuple `(h, s, a, r, s')`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub h: usize,
    pub s: usize,
    #[serde(rename = "a")]
    pub actions: Vec<usize>,
    #[serde(rename = "r")]
    pub rewards: Vec<f64>,
    pub s_next: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub version: u32,
    pub n: usize,
    pub seed: u64,
    pub game_hash: String,
}

/// `n` tuples per timestep, stored grouped by timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineDataset {
    pub n: usize,
    pub seed: u64,
    pub game_hash: String,
    pub tuples: Vec<Transition>,
}

impl OfflineDataset {
    /// Checks indices, reward ranges and the `n`-per-timestep invariant.
    pub fn validate(&self, shape: &Shape) -> Result<()> {
        let mut per_h = vec![0usize; shape.horizon];
        for (k, t) in self.tuples.iter().enumerate() {
            let in_range = t.h < shape.horizon
                && t.s < shape.states
                && t.s_next < shape.states
                && t.actions.len() == shape.players
                && t.actions.iter().zip(&shape.actions).all(|(a, n)| a < n)
                && t.rewards.len() == shape.players;
            if !in_range {
                return Err(Error::Shape(format!("tuple {k} has indices outside the game shape")));
            }
            if let Some(r) = t.rewards.iter().find(|r| !(0.0..=1.0).contains(*r)) {
                return Err(Error::Invalid(format!("tuple {k} has reward {r} outside [0, 1]")));
            }
            per_h[t.h] += 1;
        }
        if let Some(h) = per_h.iter().position(|c| *c != self.n) {
            return Err(Error::Invalid(format!(
                "timestep {h} has {} tuples, expected {}",
                per_h[h], self.n
            )));
        }
        Ok(())
    }

    pub fn write(&self, out: &mut impl Write) -> Result<()> {
        let header = DatasetHeader {
            version: DATASET_FORMAT_VERSION,
            n: self.n,
            seed: self.seed,
            game_hash: self.game_hash.clone(),
        };
        serde_json::to_writer(&mut *out, &header)?;
        out.write_all(b"\n")?;
        for t in &self.tuples {
            serde_json::to_writer(&mut *out, t)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    /// Reads a dataset and re-validates it against `shape`.
    pub fn load(path: &Path, shape: &Shape) -> Result<Self> {
        let reader = BufReader::new(fs::File::open(path)?);
        let mut lines = reader.lines();
        let header: DatasetHeader = match lines.next() {
            Some(line) => serde_json::from_str(&line?)?,
            None => return Err(Error::Invalid("empty dataset file".into())),
        };
        let mut tuples = Vec::new();
        for line in lines {
            let line = line?;
            if !line.trim().is_empty() {
                tuples.push(serde_json::from_str(&line)?);
            }
        }
        let ds = OfflineDataset {
            n: header.n,
            seed: header.seed,
            game_hash: header.game_hash,
            tuples,
        };
        ds.validate(shape)?;
        Ok(ds)
    }
}

/// Index drawn from a categorical distribution by inverting its CDF.
pub(crate) fn sample_categorical(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left u above the final partial sum.
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// Draws `n` independent tuples per timestep: `(s, a) ~ d_h`, rewards from
/// the game's reward distribution, `s' ~ P_h(. | s, a)`. Fully determined by
/// `seed`.
///
/// Zero-sum games draw one Bernoulli reward and give player 2 its complement,
/// so the constant-sum convention holds per sample.
pub fn sample_dataset(game: &GameSpec, dist: &DataDistribution, n: usize, seed: u64) -> Result<OfflineDataset> {
    let shape = game.shape();
    dist.check_shape(shape)?;
    if n == 0 {
        return Err(Error::Invalid("n must be at least 1".into()));
    }
    let jc = shape.joint_count();
    let zero_sum = game.is_zero_sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tuples = Vec::with_capacity(n * shape.horizon);
    for h in 0..shape.horizon {
        let cells = dist.at(h);
        for _ in 0..n {
            let cell = sample_categorical(cells, &mut rng);
            let (s, joint) = (cell / jc, cell % jc);
            let means = (0..shape.players).map(|j| game.reward(h, j, s, joint));
            let rewards: Vec<f64> = match game.reward_kind() {
                RewardKind::Deterministic => means.collect(),
                RewardKind::Bernoulli if zero_sum => {
                    let r1 = bernoulli(game.reward(h, 0, s, joint), &mut rng);
                    vec![r1, 1.0 - r1]
                }
                RewardKind::Bernoulli => means.map(|mean| bernoulli(mean, &mut rng)).collect(),
            };
            let s_next = sample_categorical(game.transition(h, s, joint), &mut rng);
            tuples.push(Transition {
                h,
                s,
                actions: shape.decode(joint),
                rewards,
                s_next,
            });
        }
    }
    Ok(OfflineDataset {
        n,
        seed,
        game_hash: game.content_hash(),
        tuples,
    })
}

fn bernoulli(mean: f64, rng: &mut impl Rng) -> f64 {
    if rng.gen::<f64>() < mean {
        1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Strategy;
    use crate::value::occupancy;

    fn chain_game() -> GameSpec {
        // Two states; action-independent deterministic move 0 -> 1 -> 1.
        let shape = Shape::new(2, 2, vec![2]).unwrap();
        let mut p = Vec::new();
        for _h in 0..2 {
            for _s in 0..2 {
                for _a in 0..2 {
                    p.extend([0.0, 1.0]);
                }
            }
        }
        GameSpec::new(shape, p, vec![0.25; 8], 0, RewardKind::Deterministic).unwrap()
    }

    #[test]
    fn point_mass_distribution_gives_identical_tuples() {
        let g = chain_game();
        let pi = Strategy::deterministic(g.shape(), |_, _, _| 1);
        let dist = DataDistribution::from_occupancy(&occupancy(&g, &pi).unwrap());
        let ds = sample_dataset(&g, &dist, 50, 3).unwrap();
        for t in &ds.tuples {
            assert_eq!(t.actions, vec![1]);
            assert_eq!(t.rewards, vec![0.25]);
            assert_eq!(t.s_next, 1);
            assert_eq!(t.s, t.h);
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let g = chain_game();
        let dist = DataDistribution::uniform(g.shape());
        let (mut a, mut b) = (Vec::new(), Vec::new());
        sample_dataset(&g, &dist, 100, 9).unwrap().write(&mut a).unwrap();
        sample_dataset(&g, &dist, 100, 9).unwrap().write(&mut b).unwrap();
        assert_eq!(a, b);
        let mut c = Vec::new();
        sample_dataset(&g, &dist, 100, 10).unwrap().write(&mut c).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn uniform_frequencies_within_three_standard_errors() {
        let shape = Shape::new(1, 2, vec![2, 3]).unwrap();
        let jc = 6;
        let p = vec![0.5; 2 * jc * 2];
        let g = GameSpec::new(shape.clone(), p, vec![0.5; 2 * 2 * jc], 0, RewardKind::Bernoulli).unwrap();
        let dist = DataDistribution::uniform(&shape);
        let n = 100_000;
        let ds = sample_dataset(&g, &dist, n, 11).unwrap();
        let mut freq = vec![0usize; 2 * jc];
        for t in &ds.tuples {
            freq[t.s * jc + shape.encode(&t.actions)] += 1;
        }
        let q = 1.0 / 12.0;
        let se = (q * (1.0 - q) / n as f64).sqrt();
        for f in freq {
            assert!((f as f64 / n as f64 - q).abs() < 3.0 * se);
        }
    }

    #[test]
    fn dataset_file_round_trip_and_validation() {
        let g = chain_game();
        let ds = sample_dataset(&g, &DataDistribution::uniform(g.shape()), 20, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.ndjson");
        ds.save(&path).unwrap();
        assert_eq!(OfflineDataset::load(&path, g.shape()).unwrap(), ds);

        let mut broken = ds.clone();
        broken.tuples[0].s_next = 7;
        assert!(broken.validate(g.shape()).is_err());
        let mut short = ds.clone();
        short.tuples.pop();
        assert!(short.validate(g.shape()).is_err());
    }

    #[test]
    fn warmup_threshold_formula() {
        let shape = Shape::new(1, 1, vec![2, 2]).unwrap();
        // 8 ln(4 / 0.1) / 0.25 = 118.04...
        assert_eq!(warmup_threshold(&shape, 0.25, 0.1), 119);
    }
}
