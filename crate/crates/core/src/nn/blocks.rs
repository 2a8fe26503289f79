use ndarray::{concatenate, s, Array2, Axis};

use super::batchnorm::{BatchNorm, BatchNormCache};
use super::dropout::Dropout;
use super::indrnn::{Activation, IndRnnCache, IndRnnLayer};
use super::{join, Ctx, HarRng, Real, SeqBatch, Slot, SlotRef, Visit};
use crate::error::{Error, Result};

/// IndRNN → batch norm → dropout.
#[derive(Clone, Debug, PartialEq)]
pub struct RnnUnit<T> {
    pub rnn: IndRnnLayer<T>,
    pub bn: BatchNorm<T>,
    pub dropout: Dropout,
}

#[derive(Clone, Debug)]
pub struct UnitCache<T> {
    rnn: IndRnnCache<T>,
    bn: Option<BatchNormCache<T>>,
    mask: Option<Array2<T>>,
}

pub struct UnitSpec {
    pub clip: f64,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

impl<T: Real> RnnUnit<T> {
    pub fn new(
        input: usize,
        output: usize,
        dropout: Dropout,
        spec: &UnitSpec,
        rng: &mut HarRng,
    ) -> Self {
        Self {
            rnn: IndRnnLayer::new(input, output, Activation::Relu, spec.clip, rng),
            bn: BatchNorm::new(output, spec.bn_momentum, spec.bn_eps),
            dropout,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.rnn.hidden()
    }

    pub fn forward(
        &mut self,
        x: &SeqBatch<T>,
        ctx: &mut Ctx<'_>,
    ) -> Result<(SeqBatch<T>, UnitCache<T>)> {
        let (h, rnn) = self.rnn.forward(x)?;
        let (y, bn) = if ctx.train {
            let (y, c) = self.bn.forward_train(&h)?;
            (y, Some(c))
        } else {
            (self.bn.infer(&h)?, None)
        };
        let (y, mask) = self.dropout.forward(y, ctx);
        Ok((y, UnitCache { rnn, bn, mask }))
    }

    pub fn infer(&self, x: &SeqBatch<T>) -> Result<SeqBatch<T>> {
        self.bn.infer(&self.rnn.infer(x)?)
    }

    pub fn backward(&mut self, cache: &UnitCache<T>, grad: SeqBatch<T>) -> Result<SeqBatch<T>> {
        let g = Dropout::backward(cache.mask.as_ref(), grad);
        let bn_cache = cache.bn.as_ref().ok_or(Error::MissingCache)?;
        let g = self.bn.backward(bn_cache, &g)?;
        Ok(self.rnn.backward(&cache.rnn, &g)?.input)
    }

    pub fn clip_recurrent(&mut self) {
        self.rnn.clip_recurrent();
    }
}

impl<T: Real> Visit<T> for RnnUnit<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, SlotRef<'_, T>)) {
        self.rnn.visit(&join(prefix, "rnn"), f);
        self.bn.visit(&join(prefix, "bn"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_, T>)) {
        self.rnn.visit_mut(&join(prefix, "rnn"), f);
        self.bn.visit_mut(&join(prefix, "bn"), f);
    }
}

/// Bottleneck unit widening to `4·growth`, then a producer unit emitting
/// `growth` new features.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer<T> {
    pub bottleneck: RnnUnit<T>,
    pub producer: RnnUnit<T>,
}

#[derive(Clone, Debug)]
pub struct DenseLayerCache<T> {
    bottleneck: UnitCache<T>,
    producer: UnitCache<T>,
}

impl<T: Real> DenseLayer<T> {
    pub fn input_dim(&self) -> usize {
        self.bottleneck.rnn.input_dim()
    }

    pub fn growth(&self) -> usize {
        self.producer.output_dim()
    }
}

/// Layers whose inputs are the block input concatenated with every earlier
/// layer's output.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseBlock<T> {
    pub layers: Vec<DenseLayer<T>>,
}

impl<T: Real> DenseBlock<T> {
    pub fn new(
        input: usize,
        n_layers: usize,
        growth: usize,
        bottleneck_dropout: Dropout,
        layer_dropout: Dropout,
        spec: &UnitSpec,
        rng: &mut HarRng,
    ) -> Self {
        let layers = (0..n_layers)
            .map(|k| {
                let width = input + k * growth;
                DenseLayer {
                    bottleneck: RnnUnit::new(width, 4 * growth, bottleneck_dropout, spec, rng),
                    producer: RnnUnit::new(4 * growth, growth, layer_dropout, spec, rng),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, DenseLayer::input_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.input_dim() + l.growth())
    }

    pub fn forward(
        &mut self,
        x: &SeqBatch<T>,
        ctx: &mut Ctx<'_>,
    ) -> Result<(SeqBatch<T>, Vec<DenseLayerCache<T>>)> {
        let mut features = x.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &mut self.layers {
            let (b, bottleneck) = layer.bottleneck.forward(&features, ctx)?;
            let (y, producer) = layer.producer.forward(&b, ctx)?;
            features.data = concatenate(Axis(1), &[features.data.view(), y.data.view()])
                .expect("row counts agree");
            caches.push(DenseLayerCache {
                bottleneck,
                producer,
            });
        }
        Ok((features, caches))
    }

    pub fn infer(&self, x: &SeqBatch<T>) -> Result<SeqBatch<T>> {
        let mut features = x.clone();
        for layer in &self.layers {
            let y = layer.producer.infer(&layer.bottleneck.infer(&features)?)?;
            features.data = concatenate(Axis(1), &[features.data.view(), y.data.view()])
                .expect("row counts agree");
        }
        Ok(features)
    }

    pub fn backward(
        &mut self,
        caches: &[DenseLayerCache<T>],
        grad: SeqBatch<T>,
    ) -> Result<SeqBatch<T>> {
        let (steps, batch) = (grad.steps, grad.batch);
        let mut g = grad.data;
        for (layer, cache) in self.layers.iter_mut().zip(caches).rev() {
            let w = layer.input_dim();
            let gy = SeqBatch {
                data: g.slice(s![.., w..]).to_owned(),
                steps,
                batch,
            };
            let mut prev = g.slice(s![.., ..w]).to_owned();
            let gb = layer.producer.backward(&cache.producer, gy)?;
            let gx = layer.bottleneck.backward(&cache.bottleneck, gb)?;
            prev += &gx.data;
            g = prev;
        }
        Ok(SeqBatch {
            data: g,
            steps,
            batch,
        })
    }

    pub fn clip_recurrent(&mut self) {
        for l in &mut self.layers {
            l.bottleneck.clip_recurrent();
            l.producer.clip_recurrent();
        }
    }
}

impl<T: Real> Visit<T> for DenseBlock<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, SlotRef<'_, T>)) {
        for (k, l) in self.layers.iter().enumerate() {
            let p = join(prefix, &format!("layer{k}"));
            l.bottleneck.visit(&join(&p, "bottleneck"), f);
            l.producer.visit(&join(&p, "producer"), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_, T>)) {
        for (k, l) in self.layers.iter_mut().enumerate() {
            let p = join(prefix, &format!("layer{k}"));
            l.bottleneck.visit_mut(&join(&p, "bottleneck"), f);
            l.producer.visit_mut(&join(&p, "producer"), f);
        }
    }
}

/// One or two equal-width units bypassed by an identity skip.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualUnit<T> {
    pub units: Vec<RnnUnit<T>>,
}

impl<T: Real> ResidualUnit<T> {
    pub fn forward(
        &mut self,
        x: &SeqBatch<T>,
        ctx: &mut Ctx<'_>,
    ) -> Result<(SeqBatch<T>, Vec<UnitCache<T>>)> {
        let mut h = x.clone();
        let mut caches = Vec::with_capacity(self.units.len());
        for u in &mut self.units {
            let (y, c) = u.forward(&h, ctx)?;
            h = y;
            caches.push(c);
        }
        h.data += &x.data;
        Ok((h, caches))
    }

    pub fn infer(&self, x: &SeqBatch<T>) -> Result<SeqBatch<T>> {
        let mut h = x.clone();
        for u in &self.units {
            h = u.infer(&h)?;
        }
        h.data += &x.data;
        Ok(h)
    }

    pub fn backward(&mut self, caches: &[UnitCache<T>], grad: SeqBatch<T>) -> Result<SeqBatch<T>> {
        let mut g = grad.clone();
        for (u, c) in self.units.iter_mut().zip(caches).rev() {
            g = u.backward(c, g)?;
        }
        g.data += &grad.data;
        Ok(g)
    }
}

impl<T: Real> Visit<T> for ResidualUnit<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, SlotRef<'_, T>)) {
        for (k, u) in self.units.iter().enumerate() {
            u.visit(&join(prefix, &format!("unit{k}")), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_, T>)) {
        for (k, u) in self.units.iter_mut().enumerate() {
            u.visit_mut(&join(prefix, &format!("unit{k}")), f);
        }
    }
}
