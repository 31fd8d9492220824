use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use posetfd::bounds::{bound_report, CountBasis};
use posetfd::estimators::bradley_terry::{total_ranking_path, DEFAULT_EPSILON};
use posetfd::estimators::{bradley_terry_mle, kmeans_estimate, ComparisonData};
use posetfd::experiments::{gen_clustering_data, gen_ranking_data, variable_means, ClusteringDesign, RankingDesign};
use posetfd::families::partition::ClusteringPoset;
use posetfd::families::total_ranking::{TotalRanking, TotalRankingPoset};
use posetfd::selection::{greedy_select, make_complementary_bags, SelectionConfig, StableCriterion};

const BAGS: usize = 100;
const ALPHA: f64 = 0.3;

fn ranking_estimates(p: usize) -> (TotalRankingPoset, Vec<TotalRanking>) {
    let design = RankingDesign {
        p,
        ..RankingDesign::desk()
    };
    let data = gen_ranking_data(&design, 1).unwrap();
    let poset = TotalRankingPoset::identity(p);
    let bags = make_complementary_bags(data.games.len(), BAGS, 2).unwrap();
    let estimates = bags
        .iter()
        .map(|rows| {
            let d = ComparisonData::from_games(p, rows.iter().map(|&g| data.games[g])).unwrap();
            let fit = bradley_terry_mle(&d, DEFAULT_EPSILON).unwrap();
            total_ranking_path(&poset, &fit.weights, 0.3).unwrap()
        })
        .collect();
    (poset, estimates)
}

fn ranking(c: &mut Criterion) {
    let mut group = c.benchmark_group("ranking");
    for p in [10, 15] {
        let (poset, estimates) = ranking_estimates(p);
        let criterion = StableCriterion {
            estimates: estimates.clone(),
        };
        let config = SelectionConfig::new(ALPHA, BAGS, 0).unwrap();
        group.bench_with_input(BenchmarkId::new("greedy_select", p), &p, |b, _| {
            b.iter(|| greedy_select(&poset, &criterion, &config).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("bound_report", p), &p, |b, _| {
            b.iter(|| bound_report(&poset, &estimates, ALPHA, CountBasis::Enumerated).unwrap())
        });
    }
    group.finish();
}

fn clustering(c: &mut Criterion) {
    let design = ClusteringDesign::desk();
    let data = gen_clustering_data(&design, 1).unwrap();
    let bags = make_complementary_bags(design.n, BAGS, 2).unwrap();
    let means: Vec<_> = bags
        .iter()
        .map(|rows| variable_means(&data.data, rows).unwrap())
        .collect();
    let poset = ClusteringPoset::new(design.p);
    let estimates: Vec<_> = means.iter().map(|m| kmeans_estimate(m, 8, 3).unwrap()).collect();
    let criterion = StableCriterion {
        estimates: estimates.clone(),
    };
    let config = SelectionConfig::new(ALPHA, BAGS, 0).unwrap();

    let mut group = c.benchmark_group("clustering");
    group.bench_function("kmeans_per_bag", |b| {
        b.iter(|| kmeans_estimate(&means[0], 8, 3).unwrap())
    });
    group.bench_function("greedy_select", |b| {
        b.iter(|| greedy_select(&poset, &criterion, &config).unwrap())
    });
    group.bench_function("bound_report", |b| {
        b.iter(|| bound_report(&poset, &estimates, ALPHA, CountBasis::Enumerated).unwrap())
    });
    group.finish();
}

criterion_group!(benches, ranking, clustering);
criterion_main!(benches);
