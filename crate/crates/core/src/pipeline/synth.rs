use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::graph::{Dataset, Graph, SplitSpec};
use crate::seeding::{rng_for, stream};

/// Stochastic block model with class-conditioned Gaussian features: node
/// features are `shift·noise·e_c + noise·ε` with `ε ~ N(0, I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthParams {
    pub blocks: usize,
    pub nodes: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// Class mean offset in units of `noise`.
    pub shift: f64,
    pub noise: f64,
    pub features: usize,
    pub train_fraction: f64,
    pub val_fraction: f64,
    /// Split seeds written alongside the graph.
    pub split_seeds: Vec<u64>,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            blocks: 2,
            nodes: 400,
            p_in: 0.1,
            p_out: 0.01,
            shift: 2.0,
            noise: 1.0,
            features: 16,
            train_fraction: 0.2,
            val_fraction: 0.2,
            split_seeds: vec![0, 1, 2, 3, 4],
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        for (name, p) in [("p_in", self.p_in), ("p_out", self.p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be a probability, got {p}"));
            }
        }
        if self.blocks < 2 {
            return bad("blocks must be >= 2".into());
        }
        if self.nodes < 2 * self.blocks {
            return bad("need at least two nodes per block".into());
        }
        if self.features < self.blocks {
            return bad("features must be >= blocks".into());
        }
        if !(self.noise > 0.0) || !self.shift.is_finite() {
            return bad("noise must be positive and shift finite".into());
        }
        let (t, v) = (self.train_fraction, self.val_fraction);
        if !(t > 0.0 && v >= 0.0 && t + v < 1.0) {
            return bad("split fractions must leave a non-empty test set".into());
        }
        if self.split_seeds.is_empty() {
            return bad("split_seeds must be non-empty".into());
        }
        Ok(())
    }

    pub fn block_of(&self, node: usize) -> usize {
        node * self.blocks / self.nodes
    }
}

/// Generates the graph and one stratified split per split seed. Features are
/// rounded to `f32` so the binary container round-trips them exactly.
pub fn generate_synthetic(params: &SynthParams) -> Result<Dataset, PipelineError> {
    params.validate()?;
    let n = params.nodes;
    let labels: Vec<usize> = (0..n).map(|i| params.block_of(i)).collect();

    let mut rng = rng_for(params.seed, &[stream::SYNTH, 0]);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if labels[u] == labels[v] { params.p_in } else { params.p_out };
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }

    let mut rng = rng_for(params.seed, &[stream::SYNTH, 1]);
    let mut x = DMatrix::zeros(n, params.features);
    for i in 0..n {
        for j in 0..params.features {
            let eps: f64 = StandardNormal.sample(&mut rng);
            let mean = if j == labels[i] { params.shift * params.noise } else { 0.0 };
            x[(i, j)] = ((mean + params.noise * eps) as f32) as f64;
        }
    }

    let graph = Graph::new(n, edges, x, labels.iter().map(|&c| Some(c)).collect(), params.blocks)?;
    let splits = params
        .split_seeds
        .iter()
        .map(|&s| stratified_split(&labels, params, s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset { graph, splits })
}

fn stratified_split(labels: &[usize], params: &SynthParams, split_seed: u64) -> Result<SplitSpec, PipelineError> {
    let mut rng = rng_for(params.seed, &[stream::SYNTH, 2, split_seed]);
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for c in 0..params.blocks {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        let m = members.len();
        let nt = ((params.train_fraction * m as f64).round() as usize).clamp(1, m - 1);
        let nv = ((params.val_fraction * m as f64).round() as usize).min(m - nt - 1);
        train.extend_from_slice(&members[..nt]);
        val.extend_from_slice(&members[nt..nt + nv]);
        test.extend_from_slice(&members[nt + nv..]);
    }
    for set in [&mut train, &mut val, &mut test] {
        set.sort_unstable();
    }
    Ok(SplitSpec::new(split_seed, train, val, test, labels.len())?)
}
