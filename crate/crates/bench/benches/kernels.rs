use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use halo_core::encoding::{Encoder, EncodingConfig};
use halo_core::fields::{PointField, PointFieldArch};
use halo_core::nalgebra::Vector3;
use halo_core::rendering::{composite, midpoint_sample, Ray, RenderGradOut, SampleBatch, VolumeRenderer};

fn bench_composite(c: &mut Criterion) {
    let k = 64;
    let ts = midpoint_sample(2.0, 6.0, k);
    let sigma: Vec<f64> = (0..k).map(|i| (i as f64 * 0.37).sin().abs() * 3.0).collect();
    let colors: Vec<[f64; 3]> = (0..k).map(|i| [i as f64 / k as f64, 0.5, 0.2]).collect();
    c.bench_function("composite_64", |b| {
        b.iter(|| composite(black_box(&sigma), black_box(&colors), black_box(&ts), 6.0, Some([1.0; 3])).unwrap())
    });
}

fn bench_encoding(c: &mut Criterion) {
    let enc = Encoder::new(&EncodingConfig::sinusoidal(10, 1.0), 3).unwrap();
    let points: Vec<f64> = (0..3 * 4096).map(|i| (i as f64 * 0.001).sin()).collect();
    c.bench_function("sinusoidal_l10_4096", |b| b.iter(|| enc.encode_rows::<f32>(black_box(&points))));
}

fn batch(rays: usize, k: usize) -> SampleBatch {
    let mut batch = SampleBatch::new(3, 3);
    for i in 0..rays {
        let a = i as f64 * 0.01;
        let ray = Ray::new(Vector3::new(4.0 * a.cos(), 4.0 * a.sin(), 0.5), Vector3::new(-a.cos(), -a.sin(), -0.1), 2.0, 6.0).unwrap();
        batch.push_ray(&ray, &midpoint_sample(2.0, 6.0, k)).unwrap();
    }
    batch
}

fn bench_render(c: &mut Criterion) {
    let field = PointField::<f32>::init(PointFieldArch::desk(EncodingConfig::sinusoidal(10, 1.0)), 0).unwrap();
    let batch = batch(128, 48);
    let renderer = VolumeRenderer::default();
    let mut group = c.benchmark_group("desk_field_128x48");
    group.sample_size(10);
    group.bench_function("render", |b| b.iter(|| renderer.render(&field, black_box(&batch)).unwrap()));
    group.bench_function("forward_backward", |b| {
        b.iter(|| {
            let (res, tape) = renderer.forward(&field, &batch).unwrap();
            let grads: Vec<RenderGradOut> = res.iter().map(|_| RenderGradOut { rgb: [0.1; 3], ..Default::default() }).collect();
            renderer.backward(&field, &batch, &tape, &res, &grads).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, bench_composite, bench_encoding, bench_render);
criterion_main!(benches);
