use gvq::bench::{Experiment, FeatureSubset, HintSource, MethodSpec};
use gvq_core::sequence::{generate, SequenceConfig, SequenceDataset, WorldModel};
use gvq_core::synth::{DescriptorModel, DescriptorModelConfig};
use gvq_core::vocabulary::{build_vocabulary, KMeansConfig};
use gvq_core::{Rng, Vocabulary};

const DIM: usize = 32;

fn vocab() -> Vocabulary {
    let model = DescriptorModel::new(DescriptorModelConfig { dim: DIM, ..Default::default() }).unwrap();
    let train = model.sample(3000, &mut Rng::new(1));
    let cfg = KMeansConfig { max_iters: 4, ..KMeansConfig::new(400, 2) };
    build_vocabulary(&train, &cfg, 60).unwrap().0
}

fn sequence(vocab: &Vocabulary, overlap: f64) -> SequenceDataset {
    let cfg = SequenceConfig {
        num_frames: 12,
        features_per_frame: 100,
        overlap,
        carry_sigma: 0.3,
        world: WorldModel::default(),
        dim: DIM,
        seed: 3,
    };
    generate(&cfg, Some(&vocab.words)).unwrap()
}

#[test]
fn accuracy_and_cost_grow_with_expansions() {
    let v = vocab();
    let ds = sequence(&v, 0.3);
    let exp = Experiment::new(&v, &ds, HintSource::None, 0.8).unwrap();
    let stats: Vec<_> = [10, 30, 50]
        .iter()
        .map(|&e| exp.evaluate(&MethodSpec::Gnns { expansions: e, restarts: 1, steps: None }, &[0]).unwrap().all)
        .collect();
    for w in stats.windows(2) {
        assert!(w[1].accuracy.unwrap() >= w[0].accuracy.unwrap(), "{stats:?}");
        assert!(w[1].mean_evals.unwrap() > w[0].mean_evals.unwrap(), "{stats:?}");
    }
}

#[test]
fn sgnns_without_links_is_gnns() {
    let v = vocab();
    let ds = sequence(&v, 0.0);
    assert!(ds.truth_links.iter().all(|l| l.is_empty()));
    let exp = Experiment::new(&v, &ds, HintSource::Truth, 0.8).unwrap();
    for seed in [0, 9] {
        let plain = exp.run(&MethodSpec::Gnns { expansions: 20, restarts: 2, steps: None }, seed).unwrap();
        let seq = exp.run(&MethodSpec::Sgnns { expansions: 20, restarts: 2, steps: None }, seed).unwrap();
        assert_eq!(plain.results, seq.results);
    }
}

#[test]
fn hint_source_none_disables_hints() {
    let v = vocab();
    let ds = sequence(&v, 0.6);
    let exp = Experiment::new(&v, &ds, HintSource::None, 0.8).unwrap();
    let plain = exp.run(&MethodSpec::Gnns { expansions: 20, restarts: 1, steps: None }, 4).unwrap();
    let seq = exp.run(&MethodSpec::Sgnns { expansions: 20, restarts: 1, steps: None }, 4).unwrap();
    assert_eq!(plain.results, seq.results);
}

#[test]
fn hints_cut_cost_on_matched_features() {
    let v = vocab();
    let ds = sequence(&v, 0.6);
    let exp = Experiment::new(&v, &ds, HintSource::Truth, 0.8).unwrap();
    let g = exp.evaluate(&MethodSpec::Gnns { expansions: 20, restarts: 1, steps: None }, &[0]).unwrap();
    let s = exp.evaluate(&MethodSpec::Sgnns { expansions: 20, restarts: 1, steps: None }, &[0]).unwrap();
    let (g, s) = (g.subset(FeatureSubset::Matched), s.subset(FeatureSubset::Matched));
    assert_eq!(g.queries, s.queries);
    assert!(s.mean_evals.unwrap() < g.mean_evals.unwrap());
}

#[test]
fn linear_is_exact_and_costs_n() {
    let v = vocab();
    let ds = sequence(&v, 0.2);
    let exp = Experiment::new(&v, &ds, HintSource::None, 0.8).unwrap();
    let r = exp.evaluate(&MethodSpec::Linear, &[0]).unwrap();
    assert_eq!(r.all.accuracy, Some(1.0));
    assert_eq!(r.all.mean_evals, Some(v.words.len() as f64));
    assert_eq!(r.all.speedup, Some(1.0));
}

#[test]
fn runs_are_reproducible_and_seed_dependent() {
    let v = vocab();
    let ds = sequence(&v, 0.2);
    let exp = Experiment::new(&v, &ds, HintSource::None, 0.8).unwrap();
    let spec = MethodSpec::Gnns { expansions: 10, restarts: 1, steps: None };
    assert_eq!(exp.run(&spec, 5).unwrap(), exp.run(&spec, 5).unwrap());
    assert_ne!(exp.run(&spec, 5).unwrap().results, exp.run(&spec, 6).unwrap().results);
}

#[test]
fn report_is_self_consistent() {
    let v = vocab();
    let ds = sequence(&v, 0.4);
    let exp = Experiment::new(&v, &ds, HintSource::Ratio, 0.8).unwrap();
    let methods = [
        MethodSpec::Linear,
        MethodSpec::Sgnns { expansions: 15, restarts: 1, steps: Some(6) },
        MethodSpec::Kd { trees: 2, checks: 50 },
        MethodSpec::Hkm { branching: 6, iterations: 3, checks: 30 },
    ];
    let report = exp.report(&methods, &[0, 1]).unwrap();
    assert_eq!(report.features, ds.feature_count());
    assert_eq!(report.methods.len(), methods.len());
    for m in &report.methods {
        let all = &m.all;
        assert_eq!(all.queries, 2 * ds.feature_count());
        assert_eq!(all.evals_histogram.iter().sum::<u64>(), all.queries as u64);
        let n = v.words.len() as f64;
        assert!((all.speedup.unwrap() * all.mean_evals.unwrap() - n).abs() < 1e-6 * n);
    }
}
