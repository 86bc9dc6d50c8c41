use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rucb_core::harness::all_situations;
use rucb_core::risk::critical_centroid;
use rucb_core::simenv::{generate_corpus, CorpusSpec};
use rucb_core::situations::{situation_sim, Situation};

fn similarity(c: &mut Criterion) {
    let corpus = generate_corpus(&CorpusSpec::default()).unwrap();
    let situations = all_situations(&corpus.case_base);
    let (a, b) = (situations[0], situations[situations.len() / 2]);
    c.bench_function("situation_sim", |bench| {
        bench.iter(|| situation_sim(&corpus.ontology, black_box(&a), black_box(&b)).unwrap())
    });

    let mut group = c.benchmark_group("retrieve");
    for size in [100usize, 1000] {
        let spec = CorpusSpec {
            situations: size,
            ..CorpusSpec::default()
        };
        let corpus = generate_corpus(&spec).unwrap();
        // Concepts mixed from three cases, so retrieval scans the whole base.
        let cases = corpus.case_base.cases();
        let query = Situation::new(
            cases[0].situation.location(),
            cases[size / 3].situation.time(),
            cases[size / 2].situation.social(),
        )
        .unwrap();
        assert!(corpus.case_base.find(&query).is_none());
        group.bench_with_input(BenchmarkId::from_parameter(size), &query, |bench, q| {
            bench.iter(|| corpus.case_base.retrieve(&corpus.ontology, black_box(q)).unwrap())
        });
    }
    group.finish();

    c.bench_function("critical_centroid", |bench| {
        bench.iter(|| critical_centroid(&corpus.ontology, black_box(&corpus.case_base)).unwrap())
    });
}

criterion_group!(benches, similarity);
criterion_main!(benches);
