// Reference values keep all the digits they were computed with.
#![allow(clippy::excessive_precision)]

use langlab::distributions::{ln_beta, LengthSampler};
use langlab::{DistributionSpec, LengthWindow};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn ln_beta_matches_high_precision() {
    // Values from 40-digit log-gamma.
    let cases = [
        (1.0, 1.0, 0.0),
        (1.0, 5.0, -1.609437912434100374600759),
        (0.25, 0.25, 2.003680106471454827669507),
        (5.0, 1.0, -1.609437912434100374600759),
        (2.5, 7.25, -4.905336618839303954608349),
        (0.1, 30.0, 1.914099554300973256739569),
    ];
    for (a, b, want) in cases {
        let got = ln_beta(a, b).unwrap();
        let err = if want == 0.0 {
            got.abs()
        } else {
            ((got - want) / want).abs()
        };
        assert!(err <= 1e-12, "ln B({a}, {b}) = {got}, want {want}");
    }
}

#[test]
fn pmf_reference_values() {
    let w = LengthWindow::new(1, 50).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b;
    assert!(close(DistributionSpec::RIGHT_TAILED.pmf(w, 1), 5.0 / 54.0));
    assert!(close(DistributionSpec::LEFT_TAILED.pmf(w, 50), 5.0 / 54.0));
    assert!(close(
        DistributionSpec::U_SHAPED.pmf(w, 1),
        0.18489296771808186061
    ));
    assert!(close(
        DistributionSpec::U_SHAPED.pmf(w, 25),
        0.0077458494802574832004
    ));
    let w = LengthWindow::new(50, 100).unwrap();
    assert!(close(
        DistributionSpec::U_SHAPED.pmf(w, 75),
        0.0075893676725755138428
    ));
}

#[test]
fn pmfs_normalize_and_have_expected_shapes() {
    for w in LengthWindow::presets() {
        for spec in DistributionSpec::presets() {
            let total: f64 = (w.lo()..=w.hi()).map(|n| spec.pmf(w, n)).sum();
            assert!((total - 1.0).abs() <= 1e-9, "{spec} on {w}: {total}");
        }
        let argmax = |spec: DistributionSpec| {
            (w.lo()..=w.hi())
                .max_by(|&a, &b| spec.pmf(w, a).total_cmp(&spec.pmf(w, b)))
                .unwrap()
        };
        assert_eq!(argmax(DistributionSpec::RIGHT_TAILED), w.lo());
        assert_eq!(argmax(DistributionSpec::LEFT_TAILED), w.hi());
        let u = DistributionSpec::U_SHAPED;
        let mid = (w.lo() + w.hi()) / 2;
        assert!(u.pmf(w, w.lo()) > u.pmf(w, mid));
        assert!(u.pmf(w, w.hi()) > u.pmf(w, mid));
        assert!((u.pmf(w, w.lo()) - u.pmf(w, w.hi())).abs() <= 1e-12);
    }
}

/// Pearson statistic and its p-value, pooling adjacent bins until each
/// expected count is at least 5.
fn chi_square(spec: DistributionSpec, w: LengthWindow, draws: usize, seed: u64) -> f64 {
    let sampler = LengthSampler::new(spec, w);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0usize; w.size()];
    for _ in 0..draws {
        counts[sampler.sample(&mut rng) - w.lo()] += 1;
    }
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (i, &c) in counts.iter().enumerate() {
        obs += c as f64;
        exp += spec.pmf(w, w.lo() + i) * draws as f64;
        if exp >= 5.0 {
            bins.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 || obs > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => bins.push((obs, exp)),
        }
    }
    if bins.len() < 2 {
        return 1.0;
    }
    let stat: f64 = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dist = ChiSquared::new((bins.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

#[test]
fn samples_fit_their_pmf() {
    for w in LengthWindow::presets() {
        for (i, spec) in DistributionSpec::presets().into_iter().enumerate() {
            let p = chi_square(spec, w, 100_000, 7 + i as u64);
            assert!(p > 0.001, "{spec} on {w}: p = {p}");
        }
    }
}

#[test]
fn uniform_frequency_of_one() {
    let w = LengthWindow::new(1, 50).unwrap();
    let sampler = LengthSampler::new(DistributionSpec::Uniform, w);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draws = 1_000_000;
    let ones = (0..draws).filter(|_| sampler.sample(&mut rng) == 1).count();
    let freq = ones as f64 / draws as f64;
    assert!((freq - 0.02).abs() <= 0.001, "{freq}");
}
