use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use qdetect::cusum::Monitoring;
use qdetect::delay_calc::{simulate_outcome, DelayMcOptions};
use qdetect::kernel::{KernelSeries, Sign};
use qdetect::oracles::f_fd_solve;
use qdetect::{calibrate_symmetric, f_origin, SignVector, SignalStrengths, ThresholdVector};
use qdetect_bench::{false_alarm_case, two_sensor_system, worst_case};

fn kernel(c: &mut Criterion) {
    let mut group = c.benchmark_group("kernel_eval");
    for eps in [0.4, 0.1, 0.02] {
        let k = KernelSeries::new(Sign::Minus, eps).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(eps), &k, |b, k| {
            b.iter(|| k.eval(black_box(0.3), 1e-12).unwrap())
        });
    }
    group.finish();
}

fn f_values(c: &mut Criterion) {
    let mut group = c.benchmark_group("f_origin");
    for n in [2, 4, 8] {
        let (s, h, cs) = false_alarm_case(n, 10.0);
        group.bench_with_input(BenchmarkId::new("false_alarm", n), &n, |b, _| {
            b.iter(|| f_origin(&s, &h, &cs, 1e-8).unwrap())
        });
        let s1 = SignVector::unit(n, 0);
        group.bench_with_input(BenchmarkId::new("delay", n), &n, |b, _| {
            b.iter(|| f_origin(&s1, &h, &cs, 1e-8).unwrap())
        });
    }
    group.finish();
}

fn calibration(c: &mut Criterion) {
    c.bench_function("calibrate_symmetric_n2_1e5", |b| {
        b.iter(|| calibrate_symmetric(2, black_box(1e5), 1e-8).unwrap())
    });
}

fn fd(c: &mut Criterion) {
    let sign = SignVector::from_ints(&[1, -1]).unwrap();
    let h = ThresholdVector::new(vec![4.0, 4.0]).unwrap();
    let cs = SignalStrengths::new(vec![1.0, 2.0]).unwrap();
    let mut group = c.benchmark_group("fd_solve");
    group.sample_size(10);
    for n in [100, 200] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| f_fd_solve(&sign, &h, &cs, n, n).unwrap())
        });
    }
    group.finish();
}

fn detection(c: &mut Criterion) {
    let spec = two_sensor_system(1.0);
    let h = ThresholdVector::uniform(2, 6.0).unwrap();
    let taus = worst_case(2, 0);
    let mut group = c.benchmark_group("delay_path");
    for mode in [Monitoring::Grid, Monitoring::Bridge] {
        let opts = DelayMcOptions {
            monitoring: mode,
            ..DelayMcOptions::new(1, 0.01, 1)
        };
        let mut path = 0;
        group.bench_function(format!("{mode:?}"), |b| {
            b.iter(|| {
                path += 1;
                simulate_outcome(&spec, &taus, &h, &opts, 1e4, path).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, kernel, f_values, calibration, fd, detection);
criterion_main!(benches);
