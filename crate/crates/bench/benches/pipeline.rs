use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use hencall::baselines::GmmClassifier;
use hencall::features::{extract, FeatureSet};
use hencall::loss::{AlphaWeights, LossSpec, Mixer};
use hencall::model::{forward, init_params, Mode, ModelConfig, Standardizer};
use hencall::train::batch_loss_and_grad;
use hencall::vad::{segment_syllables, VadConfig};

fn front_end(c: &mut Criterion) {
    let clips = hencall_bench::clips(1);
    let clip = &clips[0].clip;
    let (cfg, _) = hencall_bench::features(1);
    c.bench_function("segment_syllables", |b| {
        b.iter(|| segment_syllables(black_box(clip), &VadConfig::default()))
    });
    c.bench_function("extract_features", |b| {
        b.iter(|| extract(black_box(clip), None, &cfg))
    });
}

fn model(c: &mut Criterion) {
    let (_, feats) = hencall_bench::features(2);
    let std = Standardizer::fit(&feats).unwrap();
    let inputs: Vec<_> = feats.iter().map(|f| std.apply(f).unwrap()).collect();
    let cfg = ModelConfig {
        hidden_size: 32,
        attention_dim: 32,
        channel_input_dims: std.dims(),
        ..ModelConfig::default()
    };
    let params = init_params(&cfg).unwrap();
    let spec = LossSpec {
        alpha: AlphaWeights::uniform(1.0),
        cbce_ratio: 0.1,
        mixer: Mixer::Mean,
    };
    c.bench_function("forward_desk", |b| {
        b.iter(|| forward(&params, black_box(&inputs[0]), Mode::Eval))
    });
    let xs: Vec<_> = inputs.iter().map(Vec::as_slice).collect();
    let labels: Vec<_> = feats.iter().map(|f| f.label.unwrap()).collect();
    let ys: Vec<_> = labels.iter().collect();
    c.bench_function("loss_and_grad_batch16", |b| {
        b.iter(|| batch_loss_and_grad(&params, &xs, &ys, &spec, None))
    });
}

fn baselines(c: &mut Criterion) {
    let (_, feats) = hencall_bench::features(3);
    c.bench_function("gmm_fit_k1", |b| {
        b.iter(|| GmmClassifier::fit(black_box(&feats), FeatureSet::ThreeChannel, 1, 0))
    });
}

criterion_group!(benches, front_end, model, baselines);
criterion_main!(benches);
