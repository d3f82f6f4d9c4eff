use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ensemble_lab::epr::{run_epr_settings, MeasurementModel, PairConfig};
use ensemble_lab::packet::{initial_packet, PacketConfig};
use ensemble_lab::probspace::{conditional_chsh_bound_scan, lemma_battery, SettingPair};
use ensemble_lab::Execution;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn chsh_scan(c: &mut Criterion) {
    let mut g = c.benchmark_group("conditional_chsh_scan");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, "step_0.1"), |b| {
            b.iter(|| conditional_chsh_bound_scan(0.1, exec).unwrap())
        });
    }
    g.finish();
}

fn battery(c: &mut Criterion) {
    let mut g = c.benchmark_group("lemma_battery");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, 200), |b| b.iter(|| lemma_battery(200, 1, exec)));
    }
    g.finish();
}

fn ensemble_evolution(c: &mut Criterion) {
    let cfg = PacketConfig { trajectories: 20_000, t_final: Some(0.1), ..PacketConfig::default() };
    let mut g = c.benchmark_group("evolve_packet");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, cfg.trajectories), |b| {
            b.iter(|| {
                let (mut state, sources) = initial_packet(&cfg).unwrap();
                let force = |_: &nalgebra::Vector3<f64>, _: f64| nalgebra::Vector3::zeros();
                ensemble_lab::dynamics::evolve(
                    &mut state,
                    &sources,
                    &force,
                    &cfg.physics,
                    cfg.steps(),
                    cfg.dt,
                    Default::default(),
                    exec,
                    |_, t: &ensemble_lab::dynamics::Trajectory| t.speed(),
                )
                .unwrap()
            })
        });
    }
    g.finish();
}

fn epr(c: &mut Criterion) {
    let mut cfg = PairConfig::new(10_000, 7, MeasurementModel::SharedStreamThreshold);
    cfg.ensemble_size = 500;
    let settings = [SettingPair::from_degrees(0.0, 0.0), SettingPair::from_degrees(0.0, 90.0)];
    let mut g = c.benchmark_group("epr_settings");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, cfg.pairs), |b| {
            b.iter(|| run_epr_settings(&cfg, &settings, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, chsh_scan, battery, ensemble_evolution, epr);
criterion_main!(benches);
