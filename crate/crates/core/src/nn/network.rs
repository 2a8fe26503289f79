use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use super::blocks::{DenseBlock, DenseLayerCache, ResidualUnit, RnnUnit, UnitCache, UnitSpec};
use super::dropout::Dropout;
use super::indrnn::default_recurrent_clip;
use super::linear::Linear;
use super::loss::softmax;
use super::{join, Ctx, HarRng, Real, SeqBatch, Slot, SlotRef, Visit};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Plain,
    Residual,
    Dense,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DropoutConfig {
    pub input: f64,
    pub dense_layer: f64,
    pub bottleneck: f64,
    pub transition: f64,
}

impl Default for DropoutConfig {
    fn default() -> Self {
        Self {
            input: 0.5,
            dense_layer: 0.5,
            bottleneck: 0.1,
            transition: 0.3,
        }
    }
}

impl DropoutConfig {
    pub fn disabled() -> Self {
        Self {
            input: 0.0,
            dense_layer: 0.0,
            bottleneck: 0.0,
            transition: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub architecture: Architecture,
    /// Dense layers per block (dense); IndRNN layers per block (residual);
    /// the plain stack has `sum(block_layers)` layers.
    pub block_layers: Vec<usize>,
    pub growth_rate: usize,
    /// Width of the input projection ahead of the first dense block.
    pub stem_width: usize,
    /// Layer width of the plain and residual stacks.
    pub hidden_size: usize,
    pub transition_compression: f64,
    pub dropout: DropoutConfig,
    pub n_classes: usize,
    /// The recurrent clip is `max_memory^(1/seq_len)`.
    pub max_memory: f64,
    pub seq_len: usize,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::Dense,
            block_layers: vec![8, 6, 4],
            growth_rate: 48,
            stem_width: 96,
            hidden_size: 128,
            transition_compression: 0.5,
            dropout: DropoutConfig::default(),
            n_classes: 8,
            max_memory: 2.0,
            seq_len: 21,
            bn_momentum: 0.1,
            bn_eps: 1e-5,
        }
    }
}

impl NetworkConfig {
    /// The location-group recognizer: six stacked plain IndRNN layers.
    pub fn location_default() -> Self {
        Self {
            architecture: Architecture::Plain,
            block_layers: vec![6],
            n_classes: 2,
            ..Self::default()
        }
    }

    pub fn recurrent_clip(&self) -> f64 {
        default_recurrent_clip(self.max_memory, self.seq_len)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::BadConfig(m.to_string()));
        if self.block_layers.is_empty() || self.block_layers.contains(&0) {
            return bad("block_layers must be nonempty with positive entries");
        }
        if !(self.transition_compression > 0.0 && self.transition_compression <= 1.0) {
            return bad("transition_compression must lie in (0, 1]");
        }
        let d = &self.dropout;
        if [d.input, d.dense_layer, d.bottleneck, d.transition]
            .iter()
            .any(|r| !(0.0..1.0).contains(r))
        {
            return bad("dropout rates must lie in [0, 1)");
        }
        if self.n_classes < 2 {
            return bad("need at least 2 classes");
        }
        if self.growth_rate == 0 || self.stem_width == 0 || self.hidden_size == 0 {
            return bad("layer widths must be positive");
        }
        if !(self.max_memory > 1.0) || self.seq_len == 0 {
            return bad("max_memory must exceed 1 and seq_len must be positive");
        }
        if !(self.bn_eps > 0.0) || !(0.0..=1.0).contains(&self.bn_momentum) {
            return bad("bn_eps must be positive and bn_momentum in [0, 1]");
        }
        Ok(())
    }

    fn unit_spec(&self) -> UnitSpec {
        UnitSpec {
            clip: self.recurrent_clip(),
            bn_momentum: self.bn_momentum,
            bn_eps: self.bn_eps,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Body<T> {
    Plain {
        layers: Vec<RnnUnit<T>>,
    },
    Residual {
        stem: RnnUnit<T>,
        blocks: Vec<Vec<ResidualUnit<T>>>,
    },
    Dense {
        stem: RnnUnit<T>,
        blocks: Vec<DenseBlock<T>>,
        transitions: Vec<RnnUnit<T>>,
    },
}

#[derive(Clone, Debug)]
enum BodyCache<T> {
    Plain(Vec<UnitCache<T>>),
    Residual(UnitCache<T>, Vec<Vec<Vec<UnitCache<T>>>>),
    Dense(
        UnitCache<T>,
        Vec<Vec<DenseLayerCache<T>>>,
        Vec<UnitCache<T>>,
    ),
}

/// Everything the backward pass needs from one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    input_mask: Option<Array2<T>>,
    body: BodyCache<T>,
    last: Array2<T>,
    steps: usize,
    batch: usize,
    body_width: usize,
}

/// IndRNN body followed by an affine classifier with softmax at the last
/// time step.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    config: NetworkConfig,
    input_dim: usize,
    input_dropout: Dropout,
    pub body: Body<T>,
    pub classifier: Linear<T>,
}

impl<T: Real> Network<T> {
    pub fn new(config: &NetworkConfig, input_dim: usize, rng: &mut HarRng) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(Error::BadConfig("input_dim must be positive".into()));
        }
        let spec = config.unit_spec();
        let d = &config.dropout;
        let layer_drop = Dropout::new(d.dense_layer, false);
        let (body, width) = match config.architecture {
            Architecture::Plain => {
                let depth: usize = config.block_layers.iter().sum();
                let h = config.hidden_size;
                let layers = (0..depth)
                    .map(|k| {
                        RnnUnit::new(
                            if k == 0 { input_dim } else { h },
                            h,
                            layer_drop,
                            &spec,
                            rng,
                        )
                    })
                    .collect();
                (Body::Plain { layers }, h)
            }
            Architecture::Residual => {
                let h = config.hidden_size;
                let stem = RnnUnit::new(input_dim, h, layer_drop, &spec, rng);
                let blocks = config
                    .block_layers
                    .iter()
                    .map(|&n| {
                        (0..n)
                            .step_by(2)
                            .map(|k| {
                                let units = (k..n.min(k + 2))
                                    .enumerate()
                                    .map(|(i, _)| {
                                        // dropout only inside the pair, not before the skip sum
                                        let drop = if i == 0 && k + 1 < n {
                                            layer_drop
                                        } else {
                                            Dropout::none()
                                        };
                                        RnnUnit::new(h, h, drop, &spec, rng)
                                    })
                                    .collect();
                                ResidualUnit { units }
                            })
                            .collect()
                    })
                    .collect();
                (Body::Residual { stem, blocks }, h)
            }
            Architecture::Dense => {
                let stem = RnnUnit::new(input_dim, config.stem_width, Dropout::none(), &spec, rng);
                let mut width = config.stem_width;
                let mut blocks = Vec::new();
                let mut transitions = Vec::new();
                let n_blocks = config.block_layers.len();
                for (i, &n) in config.block_layers.iter().enumerate() {
                    let block = DenseBlock::new(
                        width,
                        n,
                        config.growth_rate,
                        Dropout::new(d.bottleneck, false),
                        layer_drop,
                        &spec,
                        rng,
                    );
                    width = block.output_dim();
                    blocks.push(block);
                    if i + 1 < n_blocks {
                        let out = (width as f64 * config.transition_compression).floor() as usize;
                        if out == 0 {
                            return Err(Error::BadConfig(
                                "transition compresses to zero width".into(),
                            ));
                        }
                        transitions.push(RnnUnit::new(
                            width,
                            out,
                            Dropout::new(d.transition, false),
                            &spec,
                            rng,
                        ));
                        width = out;
                    }
                }
                (
                    Body::Dense {
                        stem,
                        blocks,
                        transitions,
                    },
                    width,
                )
            }
        };
        Ok(Self {
            config: config.clone(),
            input_dim,
            input_dropout: Dropout::new(d.input, true),
            body,
            classifier: Linear::new(width, config.n_classes, rng),
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn n_classes(&self) -> usize {
        self.config.n_classes
    }

    /// Number of IndRNN layers in the body.
    pub fn indrnn_layer_count(&self) -> usize {
        match &self.body {
            Body::Plain { layers } => layers.len(),
            Body::Residual { blocks, .. } => {
                1 + blocks
                    .iter()
                    .flatten()
                    .map(|r| r.units.len())
                    .sum::<usize>()
            }
            Body::Dense {
                blocks,
                transitions,
                ..
            } => 1 + 2 * blocks.iter().map(|b| b.layers.len()).sum::<usize>() + transitions.len(),
        }
    }

    /// Forward pass returning class probabilities; batch norm uses batch
    /// statistics when `ctx.train` is set.
    pub fn forward(
        &mut self,
        x: &SeqBatch<T>,
        ctx: &mut Ctx<'_>,
    ) -> Result<(Array2<T>, ForwardCache<T>)> {
        x.check_width(self.input_dim, "network")?;
        let (steps, batch) = (x.steps, x.batch);
        let (h, input_mask) = self.input_dropout.forward(x.clone(), ctx);
        let (h, body) = match &mut self.body {
            Body::Plain { layers } => {
                let mut h = h;
                let mut caches = Vec::with_capacity(layers.len());
                for l in layers {
                    let (y, c) = l.forward(&h, ctx)?;
                    h = y;
                    caches.push(c);
                }
                (h, BodyCache::Plain(caches))
            }
            Body::Residual { stem, blocks } => {
                let (mut h, sc) = stem.forward(&h, ctx)?;
                let mut bc = Vec::with_capacity(blocks.len());
                for block in blocks {
                    let mut uc = Vec::with_capacity(block.len());
                    for unit in block {
                        let (y, c) = unit.forward(&h, ctx)?;
                        h = y;
                        uc.push(c);
                    }
                    bc.push(uc);
                }
                (h, BodyCache::Residual(sc, bc))
            }
            Body::Dense {
                stem,
                blocks,
                transitions,
            } => {
                let (mut h, sc) = stem.forward(&h, ctx)?;
                let mut bc = Vec::with_capacity(blocks.len());
                let mut tc = Vec::with_capacity(transitions.len());
                for (i, block) in blocks.iter_mut().enumerate() {
                    let (y, c) = block.forward(&h, ctx)?;
                    h = y;
                    bc.push(c);
                    if let Some(t) = transitions.get_mut(i) {
                        let (y, c) = t.forward(&h, ctx)?;
                        h = y;
                        tc.push(c);
                    }
                }
                (h, BodyCache::Dense(sc, bc, tc))
            }
        };
        let last = h.last_step().to_owned();
        let logits = self.classifier.forward(last.view())?;
        let cache = ForwardCache {
            input_mask,
            body,
            last,
            steps,
            batch,
            body_width: h.width(),
        };
        Ok((softmax(&logits), cache))
    }

    /// Backpropagates the loss gradient with respect to the logits, adding
    /// into every parameter's `grad`. Returns the gradient with respect to
    /// the network input.
    pub fn backward(
        &mut self,
        cache: &ForwardCache<T>,
        grad_logits: &Array2<T>,
    ) -> Result<SeqBatch<T>> {
        if grad_logits.dim() != (cache.batch, self.config.n_classes) {
            return Err(Error::ShapeMismatch(format!(
                "logit grad {:?}, expected ({}, {})",
                grad_logits.dim(),
                cache.batch,
                self.config.n_classes
            )));
        }
        let (steps, batch) = (cache.steps, cache.batch);
        let g_last = self.classifier.backward(cache.last.view(), grad_logits);
        let mut g = SeqBatch::zeros(steps, batch, cache.body_width);
        g.data
            .slice_mut(s![(steps - 1) * batch.., ..])
            .assign(&g_last);

        let g = match (&mut self.body, &cache.body) {
            (Body::Plain { layers }, BodyCache::Plain(caches)) => {
                let mut g = g;
                for (l, c) in layers.iter_mut().zip(caches).rev() {
                    g = l.backward(c, g)?;
                }
                g
            }
            (Body::Residual { stem, blocks }, BodyCache::Residual(sc, bc)) => {
                let mut g = g;
                for (block, caches) in blocks.iter_mut().zip(bc).rev() {
                    for (unit, c) in block.iter_mut().zip(caches).rev() {
                        g = unit.backward(c, g)?;
                    }
                }
                stem.backward(sc, g)?
            }
            (
                Body::Dense {
                    stem,
                    blocks,
                    transitions,
                },
                BodyCache::Dense(sc, bc, tc),
            ) => {
                let mut g = g;
                for i in (0..blocks.len()).rev() {
                    if let (Some(t), Some(c)) = (transitions.get_mut(i), tc.get(i)) {
                        g = t.backward(c, g)?;
                    }
                    g = blocks[i].backward(&bc[i], g)?;
                }
                stem.backward(sc, g)?
            }
            _ => {
                return Err(Error::ShapeMismatch(
                    "cache from a different architecture".into(),
                ))
            }
        };
        Ok(Dropout::backward(cache.input_mask.as_ref(), g))
    }

    /// Eval-mode class probabilities; read-only.
    pub fn predict(&self, x: &SeqBatch<T>) -> Result<Array2<T>> {
        x.check_width(self.input_dim, "network")?;
        let h = match &self.body {
            Body::Plain { layers } => {
                let mut h = x.clone();
                for l in layers {
                    h = l.infer(&h)?;
                }
                h
            }
            Body::Residual { stem, blocks } => {
                let mut h = stem.infer(x)?;
                for unit in blocks.iter().flatten() {
                    h = unit.infer(&h)?;
                }
                h
            }
            Body::Dense {
                stem,
                blocks,
                transitions,
            } => {
                let mut h = stem.infer(x)?;
                for (i, block) in blocks.iter().enumerate() {
                    h = block.infer(&h)?;
                    if let Some(t) = transitions.get(i) {
                        h = t.infer(&h)?;
                    }
                }
                h
            }
        };
        Ok(softmax(&self.classifier.forward(h.last_step())?))
    }

    pub fn zero_grad(&mut self) {
        self.visit_mut("", &mut |_, slot| {
            if let Slot::Param(p) = slot {
                p.zero_grad();
            }
        });
    }

    /// Clamps the recurrent weights of every IndRNN layer.
    pub fn clip_recurrent(&mut self) {
        match &mut self.body {
            Body::Plain { layers } => layers.iter_mut().for_each(RnnUnit::clip_recurrent),
            Body::Residual { stem, blocks } => {
                stem.clip_recurrent();
                blocks
                    .iter_mut()
                    .flatten()
                    .flat_map(|r| &mut r.units)
                    .for_each(RnnUnit::clip_recurrent);
            }
            Body::Dense {
                stem,
                blocks,
                transitions,
            } => {
                stem.clip_recurrent();
                blocks.iter_mut().for_each(DenseBlock::clip_recurrent);
                transitions.iter_mut().for_each(RnnUnit::clip_recurrent);
            }
        }
    }

    /// Largest |u| over all IndRNN layers.
    pub fn max_recurrent_weight(&self) -> f64 {
        let mut worst: f64 = 0.0;
        self.visit("", &mut |name, slot| {
            if let SlotRef::Param(p) = slot {
                if name.ends_with(".u") {
                    worst = p.value.iter().fold(worst, |m, v| m.max(v.as_f64().abs()));
                }
            }
        });
        worst
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, slot| {
            if let SlotRef::Param(p) = slot {
                n += p.value.len();
            }
        });
        n
    }
}

impl<T: Real> Visit<T> for Network<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, SlotRef<'_, T>)) {
        match &self.body {
            Body::Plain { layers } => {
                for (k, l) in layers.iter().enumerate() {
                    l.visit(&join(prefix, &format!("plain.layer{k}")), f);
                }
            }
            Body::Residual { stem, blocks } => {
                stem.visit(&join(prefix, "stem"), f);
                for (i, block) in blocks.iter().enumerate() {
                    for (k, unit) in block.iter().enumerate() {
                        unit.visit(&join(prefix, &format!("block{i}.res{k}")), f);
                    }
                }
            }
            Body::Dense {
                stem,
                blocks,
                transitions,
            } => {
                stem.visit(&join(prefix, "stem"), f);
                for (i, block) in blocks.iter().enumerate() {
                    block.visit(&join(prefix, &format!("block{i}")), f);
                    if let Some(t) = transitions.get(i) {
                        t.visit(&join(prefix, &format!("transition{i}")), f);
                    }
                }
            }
        }
        self.classifier.visit(&join(prefix, "classifier"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_, T>)) {
        match &mut self.body {
            Body::Plain { layers } => {
                for (k, l) in layers.iter_mut().enumerate() {
                    l.visit_mut(&join(prefix, &format!("plain.layer{k}")), f);
                }
            }
            Body::Residual { stem, blocks } => {
                stem.visit_mut(&join(prefix, "stem"), f);
                for (i, block) in blocks.iter_mut().enumerate() {
                    for (k, unit) in block.iter_mut().enumerate() {
                        unit.visit_mut(&join(prefix, &format!("block{i}.res{k}")), f);
                    }
                }
            }
            Body::Dense {
                stem,
                blocks,
                transitions,
            } => {
                stem.visit_mut(&join(prefix, "stem"), f);
                for (i, block) in blocks.iter_mut().enumerate() {
                    block.visit_mut(&join(prefix, &format!("block{i}")), f);
                    if let Some(t) = transitions.get_mut(i) {
                        t.visit_mut(&join(prefix, &format!("transition{i}")), f);
                    }
                }
            }
        }
        self.classifier.visit_mut(&join(prefix, "classifier"), f);
    }
}
