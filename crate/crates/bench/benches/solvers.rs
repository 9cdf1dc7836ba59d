use std::hint::black_box;

use bdris::circuit::scattering_from_capacitances;
use bdris::optimizer::{
    configure_fc, solve_fc_blocked, solve_fc_direct, solve_gc_blocked, CodebookSpec, FwConfig, GroupAssignment,
    ObjectiveWeights,
};
use bdris::scenario::{sample_channels, stream, Purpose};
use bdris::*;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn setup(d: usize, direct: DirectLinks) -> (NetworkScenario, ChannelSet, ObjectiveWeights) {
    let mut s = NetworkScenario::two_bs_default();
    s.direct_links = direct;
    let ch = sample_channels(&s, d, &mut stream(1, 0, Purpose::Channels, 0)).unwrap();
    let w = ObjectiveWeights::with_even_users(vec![0.3, 0.7], &ch);
    (s, ch, w)
}

fn duplication(c: &mut Criterion) {
    let mut g = c.benchmark_group("duplication_apply");
    for d in [16, 64, 100] {
        let dd = DuplicationMatrix::new(d).unwrap();
        let th = CVector::from_element(d * (d + 1) / 2, bdris::linalg::c(0.5, -0.25));
        g.bench_with_input(BenchmarkId::from_parameter(d), &d, |b, _| b.iter(|| dd.apply(black_box(&th)).unwrap()));
    }
    g.finish();
}

fn circuit(c: &mut Criterion) {
    let spec = CodebookSpec::default();
    let params = CircuitParams::default();
    let mut g = c.benchmark_group("scattering_from_capacitances");
    for d in [20, 60, 100] {
        let plan = CapacitancePlan::random(RisTopology::fully(d).unwrap(), spec.self_range, spec.inter_range, &mut stream(1, 0, Purpose::Baseline, 0));
        g.bench_with_input(BenchmarkId::from_parameter(d), &d, |b, _| {
            b.iter(|| scattering_from_capacitances(black_box(&plan), 7.4e9, &params).unwrap())
        });
    }
    g.finish();
}

fn solvers(c: &mut Criterion) {
    let mut g = c.benchmark_group("solvers");
    g.sample_size(10);
    for d in [20, 60, 100] {
        let (s, ch, w) = setup(d, DirectLinks::Blocked);
        g.bench_with_input(BenchmarkId::new("fc_closed_form", d), &d, |b, _| b.iter(|| solve_fc_blocked(&ch, &w).unwrap()));
        let topo = RisTopology::new(d, 2).unwrap();
        let asg = GroupAssignment::contiguous(2, &[(0, s.frequencies[0]), (1, s.frequencies[1])]).unwrap();
        g.bench_with_input(BenchmarkId::new("gc_closed_form", d), &d, |b, _| {
            b.iter(|| solve_gc_blocked(&ch, &w, &asg, topo).unwrap())
        });
        let (_, ch, w) = setup(d, DirectLinks::Available);
        let fw = FwConfig { iterations: 500 };
        g.bench_with_input(BenchmarkId::new("fc_frank_wolfe_500", d), &d, |b, _| {
            b.iter(|| solve_fc_direct(&ch, &w, &fw).unwrap())
        });
    }
    g.finish();
}

fn configure(c: &mut Criterion) {
    let params = CircuitParams::default();
    let spec = CodebookSpec::default();
    let mut g = c.benchmark_group("configure_fc");
    g.sample_size(10);
    for d in [20, 100] {
        let (s, ch, w) = setup(d, DirectLinks::Blocked);
        g.bench_with_input(BenchmarkId::from_parameter(d), &d, |b, _| {
            b.iter(|| configure_fc(&ch, &w, s.frequencies[0], &spec, &params, None).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, duplication, circuit, solvers, configure);
criterion_main!(benches);
