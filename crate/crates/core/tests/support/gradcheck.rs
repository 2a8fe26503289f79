//! Central finite-difference gradient checks shared by the integration and
//! acceptance tests.

#![allow(dead_code)]

use indrnn_har::nn::{
    cross_entropy, BatchNorm, Ctx, DenseBlock, Dropout, HarRng, IndRnnLayer, Linear, Network,
    NetworkConfig, Param, ResidualUnit, RnnUnit, SeqBatch, Slot, UnitSpec, Visit,
};
use indrnn_har::nn::{Activation, Architecture, DropoutConfig};
use ndarray::{Array2, ArrayD};
use rand::{Rng, SeedableRng};

pub const STEPS: usize = 21;
pub const BATCH: usize = 3;
/// Step sizes tried in turn; a probe uses the first one at which halving the
/// step leaves the difference quotient unchanged, so ReLU kinks within the
/// step are stepped around instead of reported as mismatches.
const STEPS_H: [f64; 3] = [1e-5, 1e-6, 1e-7];
const SMOOTH_TOL: f64 = 1e-6;
/// Gradients smaller than this are compared on an absolute scale.
const SCALE_FLOOR: f64 = 1e-6;
/// At most this many entries are probed per tensor.
const MAX_PROBES: usize = 64;

#[derive(Clone, Debug)]
pub struct GradReport {
    pub what: String,
    pub max_rel: f64,
    pub probes: usize,
    /// Probes where no step size gave a smooth quotient.
    pub skipped: usize,
}

/// `(loss, dL/dx)`; the input gradient is only required when `backward`.
type Run<'a, M> = dyn Fn(&mut M, &SeqBatch<f64>, bool) -> (f64, Option<SeqBatch<f64>>) + 'a;

fn rel(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(SCALE_FLOOR)
}

fn probe_indices(len: usize) -> Vec<usize> {
    let stride = len.div_ceil(MAX_PROBES).max(1);
    (0..len).step_by(stride).collect()
}

fn tensor_mut<M: Visit<f64>>(m: &mut M, k: usize, f: &mut dyn FnMut(&mut Param<f64>)) {
    let mut i = 0;
    m.visit_mut("", &mut |_, slot| {
        if let Slot::Param(p) = slot {
            if i == k {
                f(p);
            }
            i += 1;
        }
    });
}

fn smooth_quotient(mut quotient: impl FnMut(f64) -> f64) -> Option<f64> {
    STEPS_H.iter().find_map(|&h| {
        let (full, half) = (quotient(h), quotient(h / 2.0));
        (rel(full, half) <= SMOOTH_TOL).then_some(half)
    })
}

pub fn check<M: Visit<f64>>(
    what: &str,
    m: &mut M,
    x: &SeqBatch<f64>,
    run: &Run<'_, M>,
) -> GradReport {
    m.visit_mut("", &mut |_, slot| {
        if let Slot::Param(p) = slot {
            p.zero_grad();
        }
    });
    let (_, gx) = run(m, x, true);
    let gx = gx.expect("input gradient");
    let mut analytic: Vec<ArrayD<f64>> = Vec::new();
    m.visit_mut("", &mut |_, slot| {
        if let Slot::Param(p) = slot {
            analytic.push(p.grad.clone());
        }
    });

    let mut max_rel = 0.0f64;
    let (mut probes, mut skipped) = (0, 0);
    let mut record = |analytic: f64, numeric: Option<f64>| match numeric {
        Some(n) => {
            max_rel = max_rel.max(rel(analytic, n));
            probes += 1;
        }
        None => skipped += 1,
    };
    for (k, grad) in analytic.iter().enumerate() {
        for j in probe_indices(grad.len()) {
            let numeric = smooth_quotient(|h| {
                let shift = |m: &mut M, d: f64| {
                    tensor_mut(m, k, &mut |p| {
                        p.value.as_slice_mut().expect("contiguous")[j] += d
                    })
                };
                shift(m, h);
                let up = run(m, x, false).0;
                shift(m, -2.0 * h);
                let dn = run(m, x, false).0;
                shift(m, h);
                (up - dn) / (2.0 * h)
            });
            record(grad.as_slice().expect("contiguous")[j], numeric);
        }
    }
    let flat = gx.data.as_slice().expect("contiguous").to_vec();
    for j in probe_indices(flat.len()) {
        let numeric = smooth_quotient(|h| {
            let mut xp = x.clone();
            xp.data.as_slice_mut().unwrap()[j] += h;
            let up = run(m, &xp, false).0;
            xp.data.as_slice_mut().unwrap()[j] -= 2.0 * h;
            let dn = run(m, &xp, false).0;
            (up - dn) / (2.0 * h)
        });
        record(flat[j], numeric);
    }
    GradReport {
        what: what.to_string(),
        max_rel,
        probes,
        skipped,
    }
}

pub fn random_batch(rng: &mut HarRng, steps: usize, batch: usize, width: usize) -> SeqBatch<f64> {
    let data = Array2::from_shape_fn((steps * batch, width), |_| rng.random_range(-1.0..1.0));
    SeqBatch::new(data, steps, batch).unwrap()
}

fn projection(rng: &mut HarRng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

/// Loss `sum(y ⊙ R)` for a fixed random `R`, so dL/dy = R.
fn projected(y: &SeqBatch<f64>, r: &Array2<f64>) -> f64 {
    (&y.data * r).sum()
}

fn spec() -> UnitSpec {
    UnitSpec {
        clip: 1.0336,
        bn_momentum: 0.1,
        bn_eps: 1e-5,
    }
}

/// Every layer type plus full plain, residual and dense networks.
pub fn all_checks(seed: u64) -> Vec<GradReport> {
    let mut rng = HarRng::seed_from_u64(seed);
    let (n_in, n_hid) = (7, 9);
    let x = random_batch(&mut rng, STEPS, BATCH, n_in);
    let mut out = Vec::new();

    for act in [Activation::Relu, Activation::Identity] {
        let mut layer = IndRnnLayer::<f64>::new(n_in, n_hid, act, 1.0336, &mut rng);
        let r = projection(&mut rng, STEPS * BATCH, n_hid);
        out.push(check(
            &format!("indrnn ({act:?})"),
            &mut layer,
            &x,
            &|l, x, back| {
                let (y, cache) = l.forward(x).unwrap();
                let loss = projected(&y, &r);
                let g = back.then(|| {
                    let gy = SeqBatch::new(r.clone(), x.steps, x.batch).unwrap();
                    l.backward(&cache, &gy).unwrap().input
                });
                (loss, g)
            },
        ));
    }

    let mut bn = BatchNorm::<f64>::new(n_in, 0.1, 1e-5);
    bn.gamma.value.mapv_inplace(|_| rng.random_range(0.5..1.5));
    bn.beta.value.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    let r = projection(&mut rng, STEPS * BATCH, n_in);
    out.push(check("batch norm", &mut bn, &x, &|b, x, back| {
        let (y, cache) = b.forward_train(x).unwrap();
        let loss = projected(&y, &r);
        let g = back.then(|| {
            b.backward(&cache, &SeqBatch::new(r.clone(), x.steps, x.batch).unwrap())
                .unwrap()
        });
        (loss, g)
    }));

    let mut linear = Linear::<f64>::new(n_in, 5, &mut rng);
    let r = projection(&mut rng, BATCH, 5);
    out.push(check("linear", &mut linear, &x, &|l, x, back| {
        let last = x.last_step();
        let y = l.forward(last).unwrap();
        let loss = (&y * &r).sum();
        let g = back.then(|| {
            let gl = l.backward(last, &r);
            let mut g = SeqBatch::zeros(x.steps, x.batch, x.width());
            g.data
                .slice_mut(ndarray::s![(x.steps - 1) * x.batch.., ..])
                .assign(&gl);
            g
        });
        (loss, g)
    }));

    let mut unit = RnnUnit::<f64>::new(n_in, n_hid, Dropout::none(), &spec(), &mut rng);
    let r = projection(&mut rng, STEPS * BATCH, n_hid);
    out.push(check(
        "indrnn + batch norm unit",
        &mut unit,
        &x,
        &|u, x, back| {
            let (y, cache) = u.forward(x, &mut Ctx::train_no_dropout()).unwrap();
            let loss = projected(&y, &r);
            let g = back.then(|| {
                u.backward(&cache, SeqBatch::new(r.clone(), x.steps, x.batch).unwrap())
                    .unwrap()
            });
            (loss, g)
        },
    ));

    let mut block = DenseBlock::<f64>::new(
        n_in,
        2,
        3,
        Dropout::none(),
        Dropout::none(),
        &spec(),
        &mut rng,
    );
    let r = projection(&mut rng, STEPS * BATCH, block.output_dim());
    out.push(check("dense block", &mut block, &x, &|b, x, back| {
        let (y, caches) = b.forward(x, &mut Ctx::train_no_dropout()).unwrap();
        let loss = projected(&y, &r);
        let g = back.then(|| {
            b.backward(&caches, SeqBatch::new(r.clone(), x.steps, x.batch).unwrap())
                .unwrap()
        });
        (loss, g)
    }));

    let mut res = ResidualUnit {
        units: vec![
            RnnUnit::<f64>::new(n_in, n_in, Dropout::none(), &spec(), &mut rng),
            RnnUnit::<f64>::new(n_in, n_in, Dropout::none(), &spec(), &mut rng),
        ],
    };
    let r = projection(&mut rng, STEPS * BATCH, n_in);
    out.push(check("residual unit", &mut res, &x, &|u, x, back| {
        let (y, caches) = u.forward(x, &mut Ctx::train_no_dropout()).unwrap();
        let loss = projected(&y, &r);
        let g = back.then(|| {
            u.backward(&caches, SeqBatch::new(r.clone(), x.steps, x.batch).unwrap())
                .unwrap()
        });
        (loss, g)
    }));

    let base = NetworkConfig {
        block_layers: vec![2, 1],
        growth_rate: 3,
        stem_width: 6,
        hidden_size: 8,
        n_classes: 4,
        dropout: DropoutConfig::disabled(),
        ..NetworkConfig::default()
    };
    let targets: Vec<usize> = (0..BATCH).map(|_| rng.random_range(0..4)).collect();
    for arch in [
        Architecture::Plain,
        Architecture::Residual,
        Architecture::Dense,
    ] {
        let cfg = NetworkConfig {
            architecture: arch,
            ..base.clone()
        };
        let mut net = Network::<f64>::new(&cfg, n_in, &mut rng).unwrap();
        out.push(check(
            &format!("{arch:?} network + cross-entropy"),
            &mut net,
            &x,
            &|n, x, back| {
                let (p, cache) = n.forward(x, &mut Ctx::train_no_dropout()).unwrap();
                let (loss, g) = cross_entropy(&p, &targets).unwrap();
                (loss, back.then(|| n.backward(&cache, &g).unwrap()))
            },
        ));
    }
    out
}
