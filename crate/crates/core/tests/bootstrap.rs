mod common;

use common::*;
use crrr::bootstrap::{
    bootstrap_draw, gen_weights, run_bootstrap, BootstrapConfig, SchemeKind, Statistic, WeightScheme,
};
use crrr::dr::GridSpec;
use crrr::pipeline::{Pipeline, PipelineConfig};
use crrr::simulate::{gen_data, DgpSpec};
use crrr::{rng, Link, Method};

fn probit() -> PipelineConfig {
    PipelineConfig {
        link: Link::Gaussian,
        ..PipelineConfig::default()
    }
}

#[test]
fn unit_weights_reproduce_point_estimates() {
    let data = gen_data(&DgpSpec::bivariate(0.5, 1500, 8)).unwrap();
    for tail_m in [None, Some(5)] {
        let config = PipelineConfig {
            tail_m,
            ..PipelineConfig::default()
        };
        let (pipeline, point) = Pipeline::fit(&data, &config, true).unwrap();
        if tail_m.is_some() {
            assert!(pipeline.pivots(crrr::Variable::Y).unwrap().upper.is_some());
        }
        let ones = vec![1.0; data.len()];
        for method in Method::ALL {
            let expected = method.evaluate(&point.inputs, None).unwrap();
            let draw = bootstrap_draw(&pipeline, &ones, method).unwrap();
            assert!((draw - expected).abs() < 1e-10, "{method} {tail_m:?}: {draw} vs {expected}");
        }
    }
}

#[test]
fn weights_are_normalized_for_every_scheme() {
    let n = 503;
    for (kind, m) in [
        (SchemeKind::Empirical, None),
        (SchemeKind::WeightedExponential, None),
        (SchemeKind::Wild, None),
        (SchemeKind::MOfN, Some(200)),
        (SchemeKind::Subsampling, Some(250)),
    ] {
        let scheme = WeightScheme::new(kind, m);
        for key in 0..20u64 {
            let w = gen_weights(&scheme, n, &mut rng::stream(77, &[key])).unwrap();
            assert!(w.iter().all(|v| *v >= 0.0));
            assert!((w.iter().sum::<f64>() - n as f64).abs() < 1e-12 * n as f64, "{kind:?}");
        }
    }
    assert!(WeightScheme::new(SchemeKind::MOfN, None).validate(n).is_err());
    assert!(WeightScheme::new(SchemeKind::Subsampling, Some(n)).validate(n).is_err());
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let data = gen_data(&DgpSpec::bivariate(0.5, 300, 3)).unwrap();
    let config = PipelineConfig {
        grid: GridSpec::Quantiles {
            n_points: 50,
            lo_order: 0.02,
            hi_order: 0.98,
        },
        ..PipelineConfig::default()
    };
    let (pipeline, point) = Pipeline::fit(&data, &config, true).unwrap();
    let methods = [Method::CrrrCorr, Method::CrrrFullyRestricted, Method::Rrr];
    let stats: Vec<Statistic> = methods.iter().map(|&method| Statistic::Pooled { method }).collect();
    let estimates: Vec<f64> = methods
        .iter()
        .map(|m| m.evaluate(&point.inputs, None).unwrap())
        .collect();
    let boot = BootstrapConfig {
        replicates: 60,
        ..BootstrapConfig::new(2024)
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let reports = pool.install(|| run_bootstrap(&pipeline, &stats, &estimates, None, &boot).unwrap());
        serde_json::to_string(&reports).unwrap()
    };
    let single = run(1);
    assert_eq!(single, run(3));
    assert_eq!(single, run(1));
    let other_seed = BootstrapConfig { seed: 2025, ..boot };
    let changed = run_bootstrap(&pipeline, &stats, &estimates, None, &other_seed).unwrap();
    assert_ne!(single, serde_json::to_string(&changed).unwrap());
}

#[test]
fn intervals_cover_the_estimate() {
    let data = gen_data(&DgpSpec::bivariate(0.25, 400, 12)).unwrap();
    let (pipeline, point) = Pipeline::fit(&data, &probit(), true).unwrap();
    let est = Method::CrrrCorr.evaluate(&point.inputs, None).unwrap();
    let boot = BootstrapConfig {
        replicates: 100,
        ..BootstrapConfig::new(5)
    };
    let stat = [Statistic::Pooled { method: Method::CrrrCorr }];
    let report = &run_bootstrap(&pipeline, &stat, &[est], None, &boot).unwrap()[0];
    assert!(report.ci[0] <= est && est <= report.ci[1]);
    assert!(report.se > 0.0);
    assert_eq!(report.draws.len(), 100 - report.failed_replicates);
    let narrow = BootstrapConfig { alpha: 0.5, ..boot };
    let inner = &run_bootstrap(&pipeline, &stat, &[est], None, &narrow).unwrap()[0];
    assert!(report.ci[0] < inner.ci[0] && inner.ci[1] < report.ci[1]);
}

#[test]
fn subsampling_draws_are_centered() {
    let n = 625;
    let data = gen_data(&DgpSpec::bivariate(0.5, n, 31)).unwrap();
    let (pipeline, point) = Pipeline::fit(&data, &probit(), true).unwrap();
    let est = Method::CrrrCorr.evaluate(&point.inputs, None).unwrap();
    let boot = BootstrapConfig {
        scheme: WeightScheme::new(SchemeKind::Subsampling, Some(n / 2)),
        replicates: 200,
        alpha: 0.05,
        seed: 17,
    };
    let report = &run_bootstrap(
        &pipeline,
        &[Statistic::Pooled { method: Method::CrrrCorr }],
        &[est],
        None,
        &boot,
    )
    .unwrap()[0];
    let b = report.draws.len() as f64;
    let sd = variance(&report.draws).sqrt();
    assert!(mean(&report.draws).abs() < 2.0 * sd / b.sqrt(), "mean {} sd {sd}", mean(&report.draws));
}

#[test]
fn empirical_draw_spread_matches_sampling_spread() {
    // c = 0.5, n = 2500: the sampling SD of the estimator is about 0.016
    let n = 2500;
    let data = gen_data(&DgpSpec::bivariate(0.5, n, 99)).unwrap();
    let (pipeline, point) = Pipeline::fit(&data, &probit(), true).unwrap();
    let est = Method::CrrrCorr.evaluate(&point.inputs, None).unwrap();
    let report = &run_bootstrap(
        &pipeline,
        &[Statistic::Pooled { method: Method::CrrrCorr }],
        &[est],
        None,
        &BootstrapConfig::new(123),
    )
    .unwrap()[0];
    let sd = variance(&report.draws).sqrt() / (n as f64).sqrt();
    assert!((sd - 0.016).abs() <= 0.004, "draw SD {sd}");
}

#[test]
fn interval_length_shrinks_at_root_n() {
    let length = |n: usize| {
        let reps = 8;
        (0..reps)
            .map(|r| {
                let data = gen_data(&DgpSpec::bivariate(0.5, n, 500 + r)).unwrap();
                let (pipeline, point) = Pipeline::fit(&data, &probit(), true).unwrap();
                let est = Method::CrrrCorr.evaluate(&point.inputs, None).unwrap();
                let boot = BootstrapConfig {
                    replicates: 60,
                    ..BootstrapConfig::new(r)
                };
                let report = &run_bootstrap(
                    &pipeline,
                    &[Statistic::Pooled { method: Method::CrrrCorr }],
                    &[est],
                    None,
                    &boot,
                )
                .unwrap()[0];
                report.ci[1] - report.ci[0]
            })
            .sum::<f64>()
            / reps as f64
    };
    let ratio = length(625) / length(2500);
    assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}");
}
