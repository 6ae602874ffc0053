//! Matching network, term gating and their analytic gradients.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gating::gating_weights;
use super::histogram::MatchingHistogram;
use super::loss::hinge_loss;
use crate::embeddings::dot;
use crate::error::{Error, Result};

/// Fully connected layer, weights stored row-major as `outputs × inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn glorot(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let r = (6.0 / (inputs + outputs) as f64).sqrt();
        Self {
            inputs,
            outputs,
            weights: (0..inputs * outputs).map(|_| rng.gen_range(-r..r)).collect(),
            bias: vec![0.0; outputs],
        }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.inputs)
                .zip(&self.bias)
                .map(|(row, b)| dot(row, x) + b),
        );
    }
}

/// All trainable weights: the matching MLP (tanh hidden layers, linear
/// output of width 1) and the term-gating weight vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub layers: Vec<Dense>,
    pub gating: Vec<f64>,
}

/// Output of scoring one text unit against a query.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub score: f64,
    pub per_term_scores: Vec<f64>,
    pub gates: Vec<f64>,
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases. The gating vector is initialized
    /// like a `gating_dim → 1` layer.
    pub fn init(num_bins: usize, hidden: &[usize], gating_dim: usize, rng: &mut impl Rng) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut fan_in = num_bins;
        for &h in hidden.iter().chain(std::iter::once(&1)) {
            layers.push(Dense::glorot(fan_in, h, rng));
            fan_in = h;
        }
        let gating = Dense::glorot(gating_dim, 1, rng).weights;
        Self { layers, gating }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs, l.outputs))
                .collect(),
            gating: vec![0.0; self.gating.len()],
        }
    }

    pub fn num_bins(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn gating_dim(&self) -> usize {
        self.gating.len()
    }

    pub fn validate(&self) -> Result<()> {
        let Some(last) = self.layers.last() else {
            return Err(Error::Shape("model has no layers".into()));
        };
        if last.outputs != 1 {
            return Err(Error::Shape("output layer must have width 1".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::Shape(format!("layer {i} has inconsistent sizes")));
            }
            if i > 0 && self.layers[i - 1].outputs != l.inputs {
                return Err(Error::Shape(format!("layer {i} input width mismatch")));
            }
        }
        if self.gating.is_empty() {
            return Err(Error::Shape("empty gating weight".into()));
        }
        if !self.is_finite() {
            return Err(Error::Shape("non-finite parameter".into()));
        }
        Ok(())
    }

    /// Parameter blocks in a fixed order: each layer's weights then bias,
    /// then the gating weight.
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(2 * self.layers.len() + 1);
        for l in &self.layers {
            out.push(&l.weights);
            out.push(&l.bias);
        }
        out.push(&self.gating);
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(2 * self.layers.len() + 1);
        for l in &mut self.layers {
            out.push(&mut l.weights);
            out.push(&mut l.bias);
        }
        out.push(&mut self.gating);
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.blocks().concat()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    pub fn scale(&mut self, factor: f64) {
        for block in self.blocks_mut() {
            block.iter_mut().for_each(|x| *x *= factor);
        }
    }

    /// Per-term matching score of a single histogram.
    pub fn term_score(&self, histogram: &[f64]) -> f64 {
        let mut a = histogram.to_vec();
        let mut z = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.apply(&a, &mut z);
            if i < last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            std::mem::swap(&mut a, &mut z);
        }
        a[0]
    }

    /// Score a unit: `Σ_i g_i · MLP(h_i)` with `g` the gating softmax.
    pub fn forward(
        &self,
        histograms: &[MatchingHistogram],
        gating_inputs: &[Vec<f64>],
    ) -> Result<ForwardOutput> {
        self.check_inputs(histograms, gating_inputs)?;
        let gates = gating_weights(&self.gating, gating_inputs);
        let per_term_scores: Vec<f64> =
            histograms.iter().map(|h| self.term_score(&h.values)).collect();
        let score = dot(&gates, &per_term_scores);
        Ok(ForwardOutput {
            score,
            per_term_scores,
            gates,
        })
    }

    fn check_inputs(&self, histograms: &[MatchingHistogram], gating_inputs: &[Vec<f64>]) -> Result<()> {
        if histograms.is_empty() {
            return Err(Error::Shape("no query terms".into()));
        }
        if histograms.len() != gating_inputs.len() {
            return Err(Error::Shape(format!(
                "{} histograms but {} gating inputs",
                histograms.len(),
                gating_inputs.len()
            )));
        }
        let bins = self.num_bins();
        if let Some(h) = histograms.iter().find(|h| h.values.len() != bins) {
            return Err(Error::Shape(format!(
                "histogram has {} bins, model expects {bins}",
                h.values.len()
            )));
        }
        let dim = self.gating_dim();
        if let Some(x) = gating_inputs.iter().find(|x| x.len() != dim) {
            return Err(Error::Shape(format!(
                "gating input has dimension {}, model expects {dim}",
                x.len()
            )));
        }
        Ok(())
    }

    /// Add `coeff · ∇score` for one unit to `grads`, returning the score.
    pub fn accumulate_score_gradient(
        &self,
        histograms: &[MatchingHistogram],
        gating_inputs: &[Vec<f64>],
        coeff: f64,
        grads: &mut ModelParams,
    ) -> Result<f64> {
        self.check_inputs(histograms, gating_inputs)?;
        let gates = gating_weights(&self.gating, gating_inputs);
        let n_layers = self.layers.len();

        let mut outputs = Vec::with_capacity(histograms.len());
        // Activations of every layer for every term: acts[t][0] is the input.
        let mut acts: Vec<Vec<Vec<f64>>> = Vec::with_capacity(histograms.len());
        for h in histograms {
            let mut per_layer = Vec::with_capacity(n_layers + 1);
            per_layer.push(h.values.clone());
            for (i, layer) in self.layers.iter().enumerate() {
                let mut z = Vec::new();
                layer.apply(&per_layer[i], &mut z);
                if i + 1 < n_layers {
                    z.iter_mut().for_each(|v| *v = v.tanh());
                }
                per_layer.push(z);
            }
            outputs.push(per_layer[n_layers][0]);
            acts.push(per_layer);
        }
        let score = dot(&gates, &outputs);

        // d score / d w_g = Σ_i g_i (o_i - score) x_i
        for ((g, o), x) in gates.iter().zip(&outputs).zip(gating_inputs) {
            let d_logit = coeff * g * (o - score);
            for (gw, xi) in grads.gating.iter_mut().zip(x) {
                *gw += d_logit * xi;
            }
        }

        for (t, per_layer) in acts.iter().enumerate() {
            // Upstream gradient w.r.t. the current layer's pre-activation.
            let mut delta = vec![coeff * gates[t]];
            for i in (0..n_layers).rev() {
                let layer = &self.layers[i];
                let input = &per_layer[i];
                let g_layer = &mut grads.layers[i];
                for (o, d) in delta.iter().enumerate() {
                    g_layer.bias[o] += d;
                    let row = &mut g_layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (w, a) in row.iter_mut().zip(input) {
                        *w += d * a;
                    }
                }
                if i == 0 {
                    break;
                }
                // Back through the weights, then through tanh of layer i-1.
                let mut next = vec![0.0; layer.inputs];
                for (o, d) in delta.iter().enumerate() {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (n, w) in next.iter_mut().zip(row) {
                        *n += d * w;
                    }
                }
                for (n, a) in next.iter_mut().zip(input) {
                    *n *= 1.0 - a * a;
                }
                delta = next;
            }
        }
        Ok(score)
    }
}

/// Inputs for one pairwise training example of a query.
#[derive(Debug, Clone, Copy)]
pub struct PairInput<'a> {
    pub gating_inputs: &'a [Vec<f64>],
    pub positive: &'a [MatchingHistogram],
    pub negative: &'a [MatchingHistogram],
}

/// Hinge loss of a pair and its gradient added into `grads` (scaled by `weight`).
pub fn accumulate_pair_gradient(
    params: &ModelParams,
    pair: &PairInput<'_>,
    weight: f64,
    grads: &mut ModelParams,
) -> Result<f64> {
    let s_pos = params.forward(pair.positive, pair.gating_inputs)?.score;
    let s_neg = params.forward(pair.negative, pair.gating_inputs)?.score;
    let loss = hinge_loss(s_pos, s_neg);
    if loss > 0.0 {
        params.accumulate_score_gradient(pair.positive, pair.gating_inputs, -weight, grads)?;
        params.accumulate_score_gradient(pair.negative, pair.gating_inputs, weight, grads)?;
    }
    Ok(loss)
}

/// Hinge loss of a pair and its exact gradient with respect to every parameter.
pub fn backward(params: &ModelParams, pair: &PairInput<'_>) -> Result<(f64, ModelParams)> {
    let mut grads = params.zeros_like();
    let loss = accumulate_pair_gradient(params, pair, 1.0, &mut grads)?;
    Ok((loss, grads))
}

/// Hinge loss of a pair without gradients.
pub fn pair_loss(params: &ModelParams, pair: &PairInput<'_>) -> Result<f64> {
    let s_pos = params.forward(pair.positive, pair.gating_inputs)?.score;
    let s_neg = params.forward(pair.negative, pair.gating_inputs)?.score;
    Ok(hinge_loss(s_pos, s_neg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hist(values: &[f64]) -> MatchingHistogram {
        MatchingHistogram {
            values: values.to_vec(),
        }
    }

    #[test]
    fn init_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = ModelParams::init(30, &[5, 5], 300, &mut rng);
        assert_eq!(p.layers.len(), 3);
        assert_eq!((p.layers[0].inputs, p.layers[0].outputs), (30, 5));
        assert_eq!((p.layers[1].inputs, p.layers[1].outputs), (5, 5));
        assert_eq!((p.layers[2].inputs, p.layers[2].outputs), (5, 1));
        assert_eq!(p.gating.len(), 300);
        assert_eq!(p.num_parameters(), 150 + 5 + 25 + 5 + 5 + 1 + 300);
        p.validate().unwrap();
        let r = (6.0f64 / 35.0).sqrt();
        assert!(p.layers[0].weights.iter().all(|w| w.abs() < r));
        assert!(p.layers.iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn zero_weights_score_equals_output_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut p = ModelParams::init(4, &[5, 5], 2, &mut rng);
        for l in &mut p.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
        }
        p.layers[2].bias[0] = 0.75;
        let out = p
            .forward(
                &[hist(&[1.0, 2.0, 0.0, 0.5]), hist(&[0.0, 0.0, 3.0, 0.0])],
                &[vec![1.0, 0.0], vec![0.0, 1.0]],
            )
            .unwrap();
        assert_eq!(out.per_term_scores, [0.75, 0.75]);
        assert!((out.score - 0.75).abs() < 1e-15);
    }

    #[test]
    fn single_term_score_ignores_gating() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = ModelParams::init(3, &[5, 5], 2, &mut rng);
        let out = p.forward(&[hist(&[0.1, 0.2, 0.3])], &[vec![9.0, -9.0]]).unwrap();
        assert_eq!(out.gates, [1.0]);
        assert_eq!(out.score, out.per_term_scores[0]);
    }

    #[test]
    fn shape_mismatches_are_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = ModelParams::init(3, &[5, 5], 2, &mut rng);
        assert!(p.forward(&[hist(&[0.0; 4])], &[vec![0.0; 2]]).is_err());
        assert!(p.forward(&[hist(&[0.0; 3])], &[vec![0.0; 3]]).is_err());
        assert!(p.forward(&[hist(&[0.0; 3])], &[]).is_err());
        assert!(p.forward(&[], &[]).is_err());
    }

    #[test]
    fn satisfied_margin_gives_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut p = ModelParams::init(3, &[5, 5], 1, &mut rng);
        // Make the positive score exceed the negative by more than 1.
        p.layers[2].weights.iter_mut().for_each(|w| *w = 0.0);
        p.layers[2].weights[0] = 10.0;
        p.layers[0].weights.iter_mut().for_each(|w| *w = 0.0);
        p.layers[0].weights[0] = 5.0;
        p.layers[1].weights.iter_mut().for_each(|w| *w = 0.0);
        p.layers[1].weights[0] = 5.0;
        let gi = vec![vec![1.0]];
        let pos = [hist(&[1.0, 0.0, 0.0])];
        let neg = [hist(&[0.0, 0.0, 0.0])];
        let (loss, grads) = backward(
            &p,
            &PairInput {
                gating_inputs: &gi,
                positive: &pos,
                negative: &neg,
            },
        )
        .unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.flat().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn single_term_gating_gradient_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = ModelParams::init(3, &[5, 5], 4, &mut rng);
        let gi = vec![vec![0.3, -1.0, 2.0, 0.5]];
        let pos = [hist(&[0.0, 0.1, 0.0])];
        let neg = [hist(&[0.7, 0.0, 1.1])];
        let (loss, grads) = backward(
            &p,
            &PairInput {
                gating_inputs: &gi,
                positive: &pos,
                negative: &neg,
            },
        )
        .unwrap();
        assert!(loss > 0.0);
        assert!(grads.gating.iter().all(|&g| g == 0.0));
        assert!(grads.layers[0].weights.iter().any(|&g| g != 0.0));
    }

    #[test]
    fn blocks_cover_every_parameter() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut p = ModelParams::init(3, &[2], 2, &mut rng);
        let n = p.num_parameters();
        for (i, x) in p.blocks_mut().into_iter().flatten().enumerate() {
            *x = i as f64;
        }
        assert_eq!(p.flat(), (0..n).map(|i| i as f64).collect::<Vec<_>>());
        assert_eq!(p.gating, [n as f64 - 2.0, n as f64 - 1.0]);
    }
}
