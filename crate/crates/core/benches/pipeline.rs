use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use weakpref::evalharness::{experiment_grid, Example, GridSettings, Selection, WeakExample};
use weakpref::labelmodel::{fit, weak_label_rows, LabelModelHyper};
use weakpref::lfs::{default_specs, LabelingFunctions};
use weakpref::synth::{label_matrix, preference_corpus, CorpusSpec};
use weakpref::{Execution, FeatureExtractor};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn bench_features(c: &mut Criterion) {
    let extractor = FeatureExtractor::default();
    let samples = preference_corpus(&CorpusSpec::standard(2_000, 1), &extractor);
    let lfs = LabelingFunctions::build(&default_specs(), &extractor).unwrap();
    let mut group = c.benchmark_group("apply_all");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(lfs.apply_all_with(&samples, &extractor, exec)))
        });
    }
    group.finish();
}

fn bench_posteriors(c: &mut Criterion) {
    let (matrix, _) = label_matrix(50_000, &[0.8, 0.6, 0.7, 0.65, 0.75], 0.5, 0.1, 2);
    let params = fit(&matrix, &LabelModelHyper::default()).unwrap();
    let mut group = c.benchmark_group("weak_label_rows");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(weak_label_rows(&params, &matrix, exec).unwrap()))
        });
    }
    group.finish();

    c.bench_function("fit_5000x3", |b| {
        let (m, _) = label_matrix(5_000, &[0.8, 0.6, 0.7], 0.5, 0.1, 3);
        b.iter(|| black_box(fit(&m, &LabelModelHyper::default()).unwrap()))
    });
}

fn bench_grid(c: &mut Criterion) {
    let extractor = FeatureExtractor::default();
    let samples = preference_corpus(&CorpusSpec::standard(3_000, 4), &extractor);
    let lfs = LabelingFunctions::build(&default_specs(), &extractor).unwrap();
    let pairs = extractor.extract_pairs(&samples, Execution::Parallel);
    let examples: Vec<Example> = pairs
        .iter()
        .zip(&samples)
        .map(|(p, s)| Example::from_pair(p, s.gold_label.unwrap()))
        .collect();
    let ids = samples.iter().map(|s| s.id.clone()).collect();
    let matrix = lfs.label_features(ids, &pairs, Execution::Parallel);
    let params = fit(&matrix, &LabelModelHyper::default()).unwrap();
    let preds = weak_label_rows(&params, &matrix, Execution::Parallel).unwrap().predictions;
    let index: std::collections::HashMap<&str, usize> = samples.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
    let weak: Vec<WeakExample> = preds
        .into_iter()
        .map(|p| WeakExample {
            diff: examples[index[p.sample_id.as_str()]].diff.clone(),
            prediction: p,
        })
        .collect();
    let selections = [
        Selection::Threshold(0.9),
        Selection::Threshold(0.8),
        Selection::TopN(500),
        Selection::TopN(1_000),
        Selection::All,
    ];
    let mut group = c.benchmark_group("experiment_grid");
    group.sample_size(10);
    for (name, exec) in MODES {
        let settings = GridSettings { exec, ..GridSettings::default() };
        group.bench_with_input(BenchmarkId::from_parameter(name), &settings, |b, settings| {
            b.iter(|| black_box(experiment_grid(&examples[..100], &weak, &selections, &examples[2_500..], settings).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_features, bench_posteriors, bench_grid);
criterion_main!(benches);
