//! Message-passing power-control network and its unsupervised training.
//!
//! Layer `k` of the network turns node embeddings `beta^{k-1}` into
//! `beta^k`:
//!
//! 1. every ordered pair `m -> n` produces the message
//!    `relu(msg_k([beta_m ; e_mn]))`;
//! 2. node `n` averages its incoming messages;
//! 3. `s_n = sigmoid(comb_k([beta_n ; mean]))`;
//! 4. below the last layer the new embedding is `[s_n ; beta_n]`,
//!    so its width grows by one per layer.
//!
//! The last layer's `s_n` scales the maximum transmit power. The loss is
//! the negative sum spectral efficiency of the resulting powers, and its
//! gradient flows back through the interference terms of every link.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use log::debug;
use ndarray::{s, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{derive_seed, sum_se, sum_se_gradient, Dataset, PowerAllocation, SeedDomain};
use crate::error::{Error, Result};
use crate::graph::{build_graph, FeatureGraph, Normalizer, Variant};
use crate::nn::{Activation, AdamConfig, AdamState, Mlp, MlpGrads, MlpTrace};
use crate::scalar::Scalar;

/// Layer count and MLP widths (input widths follow from the embedding recursion).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub layers: usize,
    /// Output widths of the message MLP's dense layers.
    pub message_widths: Vec<usize>,
    /// Output widths of the combination MLP's dense layers; the last must be 1.
    pub combine_widths: Vec<usize>,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            layers: 3,
            message_widths: vec![32, 32, 32],
            combine_widths: vec![32, 16, 1],
        }
    }
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::InvalidConfig("need at least one message-passing layer".into()));
        }
        if self.message_widths.is_empty() || self.message_widths.contains(&0) {
            return Err(Error::InvalidConfig(
                "message widths must be non-empty and positive".into(),
            ));
        }
        if self.combine_widths.last() != Some(&1) || self.combine_widths.contains(&0) {
            return Err(Error::InvalidConfig("combination MLP must end in a single unit".into()));
        }
        Ok(())
    }

    /// Width of `beta^k`.
    pub fn embedding_dim(&self, k: usize) -> usize {
        if k == self.layers {
            1
        } else {
            k + 1
        }
    }

    pub fn message_dims(&self, layer: usize) -> Vec<usize> {
        std::iter::once(self.embedding_dim(layer) + 1)
            .chain(self.message_widths.iter().copied())
            .collect()
    }

    pub fn combine_dims(&self, layer: usize) -> Vec<usize> {
        let msg = *self.message_widths.last().expect("validated");
        std::iter::once(self.embedding_dim(layer) + msg)
            .chain(self.combine_widths.iter().copied())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GnnLayer<T> {
    pub message: Mlp<T>,
    pub combine: Mlp<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcgnnModel<T> {
    pub architecture: Architecture,
    pub variant: Variant,
    pub layers: Vec<GnnLayer<T>>,
    pub normalizer: Normalizer,
    pub max_power: f64,
}

impl<T: Scalar> PcgnnModel<T> {
    pub fn new(architecture: Architecture, normalizer: Normalizer, max_power: f64, seed: u64) -> Result<Self> {
        architecture.validate()?;
        let layers = (0..architecture.layers)
            .map(|l| GnnLayer {
                message: Mlp::kaiming(
                    &architecture.message_dims(l),
                    Activation::Relu,
                    Activation::Relu,
                    derive_seed(seed, SeedDomain::Custom(2 * l as u64), 0),
                ),
                combine: Mlp::kaiming(
                    &architecture.combine_dims(l),
                    Activation::Relu,
                    Activation::Sigmoid,
                    derive_seed(seed, SeedDomain::Custom(2 * l as u64 + 1), 0),
                ),
            })
            .collect();
        Ok(Self {
            variant: normalizer.variant,
            architecture,
            layers,
            normalizer,
            max_power,
        })
    }

    /// Same shape, all weights and biases zero.
    pub fn zeroed(architecture: Architecture, normalizer: Normalizer, max_power: f64) -> Result<Self> {
        architecture.validate()?;
        let layers = (0..architecture.layers)
            .map(|l| GnnLayer {
                message: Mlp::zeros(&architecture.message_dims(l), Activation::Relu, Activation::Relu),
                combine: Mlp::zeros(&architecture.combine_dims(l), Activation::Relu, Activation::Sigmoid),
            })
            .collect();
        Ok(Self {
            variant: normalizer.variant,
            architecture,
            layers,
            normalizer,
            max_power,
        })
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.message.param_count() + l.combine.param_count())
            .sum()
    }

    pub fn params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            l.message.flatten_into(&mut out);
            l.combine.flatten_into(&mut out);
        }
        out
    }

    pub fn set_params(&mut self, params: &[T]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Dimension {
                context: "model parameters",
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut src = params;
        for l in &mut self.layers {
            l.message.assign_from(&mut src);
            l.combine.assign_from(&mut src);
        }
        Ok(())
    }

    /// Convert to another scalar type.
    pub fn cast<U: Scalar>(&self) -> PcgnnModel<U> {
        let mut out = PcgnnModel::<U>::zeroed(self.architecture.clone(), self.normalizer.clone(), self.max_power)
            .expect("architecture already validated");
        out.set_params(&crate::scalar::cast_slice(&self.params()))
            .expect("same architecture");
        out
    }

    /// Normalise a raw graph with this model's input scaling.
    pub fn prepare(&self, raw: &FeatureGraph) -> Result<FeatureGraph> {
        self.normalizer.apply(raw)
    }

    fn check_graph(&self, graph: &FeatureGraph) -> Result<()> {
        if !graph.is_normalized() {
            return Err(Error::NotNormalized);
        }
        if graph.variant != self.variant {
            return Err(Error::VariantMismatch {
                model: self.variant.to_string(),
                input: graph.variant.to_string(),
            });
        }
        Ok(())
    }

    /// Run the network on one normalised graph.
    pub fn forward(&self, graph: &FeatureGraph) -> Result<(PowerAllocation, ForwardTrace<T>)> {
        let trace = self.forward_batch(&[graph])?;
        let alloc = trace.allocations(self.max_power).into_iter().next().expect("one graph");
        Ok((alloc, trace))
    }

    /// Powers for many graphs, processed in chunks without keeping traces.
    pub fn infer(&self, graphs: &[FeatureGraph], chunk: usize) -> Result<Vec<PowerAllocation>> {
        let mut out = Vec::with_capacity(graphs.len());
        for part in graphs.chunks(chunk.max(1)) {
            let refs: Vec<&FeatureGraph> = part.iter().collect();
            out.extend(self.forward_batch(&refs)?.allocations(self.max_power));
        }
        Ok(out)
    }

    /// Run the network on several disjoint graphs at once.
    pub fn forward_batch(&self, graphs: &[&FeatureGraph]) -> Result<ForwardTrace<T>> {
        for g in graphs {
            self.check_graph(g)?;
        }
        let batch = GraphBatch::new(graphs);
        let arch = &self.architecture;
        let m_nodes = batch.n_nodes();
        let mut beta = Array2::from_shape_vec((m_nodes, 1), batch.node_feat.clone()).expect("node column");
        let mut embeddings = vec![beta.clone()];
        let mut layer_traces = Vec::with_capacity(arch.layers);

        for (l, layer) in self.layers.iter().enumerate() {
            let b = beta.ncols();
            debug_assert_eq!(b, arch.embedding_dim(l));
            let msg_in = batch.message_inputs(&beta);
            let message = layer.message.forward_batch(msg_in)?;
            let agg = batch.mean_messages(message.input(), message.output());

            let width = agg.ncols();
            let mut comb_in = Array2::zeros((m_nodes, b + width));
            comb_in.slice_mut(s![.., ..b]).assign(&beta);
            comb_in.slice_mut(s![.., b..]).assign(&agg);
            let combine = layer.combine.forward_batch(comb_in)?;
            let out = combine.output();

            beta = if l + 1 < arch.layers {
                let mut next = Array2::zeros((m_nodes, b + 1));
                next.slice_mut(s![.., 0..1]).assign(out);
                next.slice_mut(s![.., 1..]).assign(&beta);
                next
            } else {
                out.clone()
            };
            embeddings.push(beta.clone());
            layer_traces.push(LayerTrace { message, combine });
        }

        Ok(ForwardTrace {
            fingerprint: batch.fingerprint,
            param_count: self.param_count(),
            batch,
            layers: layer_traces,
            embeddings,
        })
    }

    /// Mean negative sum SE over the traced graphs and its gradient with respect to all weights.
    pub fn backward(
        &self,
        trace: &ForwardTrace<T>,
        graphs: &[&FeatureGraph],
        channels: &[&Array2<f64>],
        noise: f64,
    ) -> Result<(ModelGrads<T>, f64)> {
        let mut grads = ModelGrads::zeros_like(self);
        let weight = 1.0 / graphs.len().max(1) as f64;
        let total = self.backward_into(trace, graphs, channels, noise, weight, &mut grads)?;
        Ok((grads, total * weight))
    }

    /// Add `weight` times the gradient of the summed loss of the traced
    /// graphs to `grads` and return the summed loss.
    pub fn backward_into(
        &self,
        trace: &ForwardTrace<T>,
        graphs: &[&FeatureGraph],
        channels: &[&Array2<f64>],
        noise: f64,
        weight: f64,
        grads: &mut ModelGrads<T>,
    ) -> Result<f64> {
        if trace.param_count != self.param_count() || trace.layers.len() != self.layers.len() {
            return Err(Error::StaleTrace("trace was produced by a different model"));
        }
        if graphs.len() != trace.batch.n_graphs() || GraphBatch::<T>::fingerprint_of(graphs) != trace.fingerprint {
            return Err(Error::StaleTrace("trace was produced from different graphs"));
        }
        if channels.len() != graphs.len() {
            return Err(Error::Dimension {
                context: "channel matrices",
                expected: graphs.len(),
                got: channels.len(),
            });
        }
        let batch = &trace.batch;
        let m_nodes = batch.n_nodes();
        let scale = self.max_power * weight;
        let powers = trace.powers(self.max_power);
        let mut loss = 0.0;
        let mut d_beta = Array2::<T>::zeros((m_nodes, 1));
        for (g, (p, h)) in powers.iter().zip(channels).enumerate() {
            if h.nrows() != p.len() {
                return Err(Error::Dimension {
                    context: "channel matrix",
                    expected: p.len(),
                    got: h.nrows(),
                });
            }
            loss -= sum_se(p, h, noise);
            let grad = sum_se_gradient(p, h, noise);
            let off = batch.node_offsets[g];
            for (i, gi) in grad.into_iter().enumerate() {
                d_beta[[off + i, 0]] = T::from_f64_lossy(-gi * scale);
            }
        }

        for (l, layer) in self.layers.iter().enumerate().rev() {
            let lt = &trace.layers[l];
            let b = trace.embeddings[l].ncols();
            let (d_s, mut d_prev) = if l + 1 < self.layers.len() {
                (
                    d_beta.slice(s![.., 0..1]).to_owned(),
                    d_beta.slice(s![.., 1..]).to_owned(),
                )
            } else {
                (d_beta, Array2::zeros((m_nodes, b)))
            };
            let g = &mut grads.layers[l];
            let d_comb_in = layer.combine.backward_into(&lt.combine, d_s.view(), &mut g.1)?;
            d_prev += &d_comb_in.slice(s![.., ..b]);
            let d_msg = batch.spread_mean_grad(d_comb_in.slice(s![.., b..]));
            let d_msg_in = layer.message.backward_into(&lt.message, d_msg.view(), &mut g.0)?;
            batch.scatter_source_grad(&d_msg_in, &mut d_prev);
            d_beta = d_prev;
        }
        Ok(loss)
    }
}

/// Loss for one allocation: the negative sum spectral efficiency.
pub fn pcgnn_loss(powers: &[f64], channel: &Array2<f64>, noise: f64) -> f64 {
    -sum_se(powers, channel, noise)
}

/// Gradients in the same layout as [`PcgnnModel::params`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModelGrads<T> {
    /// `(message, combine)` per layer.
    pub layers: Vec<(MlpGrads<T>, MlpGrads<T>)>,
}

impl<T: Scalar> ModelGrads<T> {
    pub fn zeros_like(model: &PcgnnModel<T>) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| (MlpGrads::zeros_like(&l.message), MlpGrads::zeros_like(&l.combine)))
                .collect(),
        }
    }

    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::new();
        for (m, c) in &self.layers {
            m.flatten_into(&mut out);
            c.flatten_into(&mut out);
        }
        out
    }
}

struct LayerTrace<T> {
    message: MlpTrace<T>,
    combine: MlpTrace<T>,
}

/// Everything the backward pass needs from one forward pass.
pub struct ForwardTrace<T> {
    fingerprint: u64,
    param_count: usize,
    batch: GraphBatch<T>,
    layers: Vec<LayerTrace<T>>,
    embeddings: Vec<Array2<T>>,
}

impl<T: Scalar> ForwardTrace<T> {
    /// Final `beta^K` per graph.
    pub fn unit_outputs(&self) -> Vec<Vec<T>> {
        let last = self.embeddings.last().expect("non-empty");
        (0..self.batch.n_graphs())
            .map(|g| {
                (self.batch.node_offsets[g]..self.batch.node_offsets[g + 1])
                    .map(|n| last[[n, 0]])
                    .collect()
            })
            .collect()
    }

    pub fn powers(&self, max_power: f64) -> Vec<Vec<f64>> {
        self.unit_outputs()
            .into_iter()
            .map(|u| {
                u.into_iter()
                    .map(|s| (s.to_f64_lossy() * max_power).clamp(0.0, max_power))
                    .collect()
            })
            .collect()
    }

    pub fn allocations(&self, max_power: f64) -> Vec<PowerAllocation> {
        self.powers(max_power)
            .into_iter()
            .map(|p| PowerAllocation::new(p, max_power).expect("clamped into the box"))
            .collect()
    }

    /// Hash of which hidden and output units are active (strictly positive).
    ///
    /// Two parameter settings with the same signature lie on the same linear
    /// piece of every ReLU.
    pub fn activation_signature(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for lt in &self.layers {
            for t in [&lt.message, &lt.combine] {
                for a in &t.activations()[1..] {
                    for v in a.iter() {
                        (*v > T::zero()).hash(&mut h);
                    }
                }
            }
        }
        h.finish()
    }

    /// Embeddings `beta^0 ..= beta^K` stacked over all nodes of the batch.
    pub fn embeddings(&self) -> &[Array2<T>] {
        &self.embeddings
    }
}

/// Several graphs laid out as one disconnected graph.
///
/// Incoming edges of node `n` occupy rows `edge_start[n]..edge_start[n + 1]`,
/// sources in ascending order.
struct GraphBatch<T> {
    node_offsets: Vec<usize>,
    node_feat: Vec<T>,
    edge_src: Vec<usize>,
    edge_feat: Vec<T>,
    edge_start: Vec<usize>,
    fingerprint: u64,
}

impl<T: Scalar> GraphBatch<T> {
    fn new(graphs: &[&FeatureGraph]) -> Self {
        let mut node_offsets = vec![0];
        let mut node_feat = Vec::new();
        let mut edge_src = Vec::new();
        let mut edge_feat = Vec::new();
        let mut edge_start = vec![0];
        for g in graphs {
            let off = *node_offsets.last().expect("non-empty");
            let n = g.n();
            node_feat.extend(g.node.iter().map(|&x| T::from_f64_lossy(x)));
            for dst in 0..n {
                for src in (0..n).filter(|&m| m != dst) {
                    edge_src.push(off + src);
                    edge_feat.push(T::from_f64_lossy(g.edge[[src, dst]]));
                }
                edge_start.push(edge_src.len());
            }
            node_offsets.push(off + n);
        }
        Self {
            fingerprint: Self::fingerprint_of(graphs),
            node_offsets,
            node_feat,
            edge_src,
            edge_feat,
            edge_start,
        }
    }

    fn fingerprint_of(graphs: &[&FeatureGraph]) -> u64 {
        let mut h = DefaultHasher::new();
        for g in graphs {
            g.variant.hash(&mut h);
            g.n().hash(&mut h);
            for x in g.node.iter().chain(g.edge.iter()) {
                x.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }

    fn n_graphs(&self) -> usize {
        self.node_offsets.len() - 1
    }

    fn n_nodes(&self) -> usize {
        self.node_feat.len()
    }

    fn n_edges(&self) -> usize {
        self.edge_src.len()
    }

    /// Rows `[beta_src ; e]` for every edge.
    fn message_inputs(&self, beta: &Array2<T>) -> Array2<T> {
        let b = beta.ncols();
        let mut x = Array2::zeros((self.n_edges(), b + 1));
        let beta = beta.as_slice().expect("standard layout");
        for ((row, &src), &e) in x
            .as_slice_mut()
            .expect("fresh array")
            .chunks_exact_mut(b + 1)
            .zip(&self.edge_src)
            .zip(&self.edge_feat)
        {
            row[..b].copy_from_slice(&beta[src * b..(src + 1) * b]);
            row[b] = e;
        }
        x
    }

    /// Mean of incoming messages per node; zero for isolated nodes.
    ///
    /// Messages are summed in the order of their input rows, which does not
    /// depend on node labels, so relabelling permutes the result exactly.
    fn mean_messages(&self, inputs: &Array2<T>, messages: &Array2<T>) -> Array2<T> {
        let width = messages.ncols();
        let in_w = inputs.ncols();
        let inputs = inputs.as_slice().expect("standard layout");
        let msgs = messages.as_slice().expect("standard layout");
        let mut agg = Array2::zeros((self.n_nodes(), width));
        let mut order: Vec<usize> = Vec::new();
        for (n, row) in agg
            .as_slice_mut()
            .expect("fresh array")
            .chunks_exact_mut(width)
            .enumerate()
        {
            let (lo, hi) = (self.edge_start[n], self.edge_start[n + 1]);
            if lo == hi {
                continue;
            }
            order.clear();
            order.extend(lo..hi);
            order.sort_unstable_by(|&a, &b| {
                let ra = &inputs[a * in_w..(a + 1) * in_w];
                let rb = &inputs[b * in_w..(b + 1) * in_w];
                ra.iter()
                    .zip(rb)
                    .map(|(x, y)| x.to_f64_lossy().total_cmp(&y.to_f64_lossy()))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            for &e in &order {
                for (acc, &v) in row.iter_mut().zip(&msgs[e * width..(e + 1) * width]) {
                    *acc += v;
                }
            }
            let inv = T::one() / T::from_f64_lossy((hi - lo) as f64);
            row.iter_mut().for_each(|v| *v *= inv);
        }
        agg
    }

    /// Per-edge message gradient from the gradient of the per-node mean.
    fn spread_mean_grad(&self, d_agg: ArrayView2<'_, T>) -> Array2<T> {
        let width = d_agg.ncols();
        let mut d_msg = Array2::zeros((self.n_edges(), width));
        let out = d_msg.as_slice_mut().expect("fresh array");
        for n in 0..self.n_nodes() {
            let (lo, hi) = (self.edge_start[n], self.edge_start[n + 1]);
            if lo == hi {
                continue;
            }
            let inv = T::one() / T::from_f64_lossy((hi - lo) as f64);
            let src = d_agg.row(n);
            for e in lo..hi {
                for (o, &g) in out[e * width..(e + 1) * width].iter_mut().zip(src.iter()) {
                    *o = g * inv;
                }
            }
        }
        d_msg
    }

    /// Add the `beta_src` part of each message-input gradient to its source node.
    fn scatter_source_grad(&self, d_msg_in: &Array2<T>, d_beta: &mut Array2<T>) {
        let b = d_beta.ncols();
        let w = d_msg_in.ncols();
        let rows = d_msg_in.as_slice().expect("standard layout");
        let dst = d_beta.as_slice_mut().expect("standard layout");
        for (row, &src) in rows.chunks_exact(w).zip(&self.edge_src) {
            for (acc, &g) in dst[src * b..(src + 1) * b].iter_mut().zip(&row[..b]) {
                *acc += g;
            }
        }
    }
}

/// Normalised graphs plus the channels and noise level that score them.
#[derive(Clone, Debug)]
pub struct TrainingSet {
    pub graphs: Vec<FeatureGraph>,
    pub channels: Vec<Array2<f64>>,
    pub noise: f64,
}

impl TrainingSet {
    /// Build graphs for `variant`, fit a normaliser on them and apply it.
    pub fn prepare(dataset: &Dataset, variant: Variant) -> Result<(Normalizer, TrainingSet)> {
        let raw: Vec<FeatureGraph> = dataset.snapshots.iter().map(|s| build_graph(s, variant)).collect();
        let normalizer = Normalizer::fit(&raw, dataset.config.area_side)?;
        let set = Self::with_normalizer(dataset, &normalizer)?;
        Ok((normalizer, set))
    }

    pub fn with_normalizer(dataset: &Dataset, normalizer: &Normalizer) -> Result<TrainingSet> {
        let graphs = dataset
            .snapshots
            .iter()
            .map(|s| normalizer.apply(&build_graph(s, normalizer.variant)))
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainingSet {
            graphs,
            channels: dataset.snapshots.iter().map(|s| s.channel.clone()).collect(),
            noise: dataset.noise_power(),
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Drives weight initialisation and mini-batch shuffling.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_size: 64,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

/// Training state that can be checkpointed and resumed.
#[derive(Clone, Debug)]
pub struct Trainer<T> {
    pub model: PcgnnModel<T>,
    pub adam: AdamState<T>,
    pub config: TrainConfig,
    /// Epochs completed so far.
    pub epoch: usize,
    /// Mean training loss of each completed epoch.
    pub history: Vec<f64>,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(model: PcgnnModel<T>, config: TrainConfig) -> Self {
        let adam = AdamState::new(config.adam, model.param_count());
        Self {
            model,
            adam,
            config,
            epoch: 0,
            history: Vec::new(),
        }
    }

    /// One pass over the shuffled training set.
    ///
    /// On a non-finite loss or gradient the model and optimiser are rolled
    /// back to their state at the start of the epoch.
    pub fn run_epoch(&mut self, data: &TrainingSet) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyInput("training set"));
        }
        let checkpoint = (self.model.params(), self.adam.clone());
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
            self.config.seed,
            SeedDomain::Custom(0x5348_5546),
            self.epoch as u64,
        ));
        order.shuffle(&mut rng);

        let mut total = 0.0;
        let result = (|| -> Result<()> {
            for chunk in order.chunks(self.config.batch_size.max(1)) {
                let weight = 1.0 / chunk.len() as f64;
                let model = &self.model;
                let parts = chunk
                    .par_iter()
                    .map(|&i| {
                        let graphs = [&data.graphs[i]];
                        let trace = model.forward_batch(&graphs)?;
                        let mut grads = ModelGrads::zeros_like(model);
                        let loss = model.backward_into(
                            &trace,
                            &graphs,
                            &[&data.channels[i]],
                            data.noise,
                            weight,
                            &mut grads,
                        )?;
                        Ok((grads.flatten(), loss))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mut grad = vec![T::zero(); model.param_count()];
                for (g, loss) in &parts {
                    if !loss.is_finite() {
                        return Err(Error::NonFinite(format!("training loss at epoch {}", self.epoch)));
                    }
                    total += loss;
                    grad.iter_mut().zip(g).for_each(|(a, &b)| *a += b);
                }
                let mut params = self.model.params();
                self.adam.step(&mut params, &grad)?;
                self.model.set_params(&params)?;
            }
            Ok(())
        })();
        if let Err(e) = result {
            self.model.set_params(&checkpoint.0)?;
            self.adam = checkpoint.1;
            return Err(e);
        }
        let mean = total / data.len() as f64;
        self.epoch += 1;
        self.history.push(mean);
        debug!("epoch {} loss {mean:.5}", self.epoch);
        Ok(mean)
    }

    /// Train until `config.epochs` epochs are complete, calling `on_epoch` after each.
    pub fn run(&mut self, data: &TrainingSet, mut on_epoch: impl FnMut(&Self)) -> Result<()> {
        while self.epoch < self.config.epochs {
            self.run_epoch(data)?;
            on_epoch(self);
        }
        Ok(())
    }
}

/// Outcome of [`train`].
#[derive(Clone, Debug)]
pub struct TrainReport<T> {
    pub model: PcgnnModel<T>,
    pub loss_history: Vec<f64>,
}

/// Fit a fresh model of `variant` on `dataset`.
pub fn train<T: Scalar>(
    dataset: &Dataset,
    variant: Variant,
    architecture: Architecture,
    config: &TrainConfig,
) -> Result<TrainReport<T>> {
    let (normalizer, data) = TrainingSet::prepare(dataset, variant)?;
    let model = PcgnnModel::new(architecture, normalizer, dataset.config.max_power, config.seed)?;
    let mut trainer = Trainer::new(model, config.clone());
    trainer.run(&data, |_| {})?;
    Ok(TrainReport {
        model: trainer.model,
        loss_history: trainer.history,
    })
}
