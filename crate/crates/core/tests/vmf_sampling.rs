use idshield::geometry::{self, UnitVector};
use idshield::vmf::{self, VmfParams, VmfSampler};
use idshield::RandomStream;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Largest gap between the empirical CDF of `samples` and `cdf`.
fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Critical value of the one-sample KS statistic at alpha = 0.001.
fn ks_critical(n: usize) -> f64 {
    1.95 / (n as f64).sqrt()
}

fn cosines(dim: usize, kappa: f64, n: usize, seed: u64) -> Vec<f64> {
    let mu = geometry::uniform_sample(dim, &mut RandomStream::new(seed ^ 0xabc)).unwrap();
    let sampler = VmfSampler::new(dim, kappa).unwrap();
    let mut rng = RandomStream::new(seed);
    (0..n)
        .map(|_| sampler.sample(&mu, &mut rng).unwrap().dot(&mu))
        .collect()
}

/// CDF of the cosine marginal, proportional to exp(kappa w) (1 - w^2)^((n-3)/2),
/// by trapezoid integration on a fine grid.
fn numeric_marginal_cdf(dim: usize, kappa: f64) -> impl Fn(f64) -> f64 {
    let steps = 200_000;
    let h = 2.0 / steps as f64;
    let half = (dim as f64 - 3.0) / 2.0;
    let density = |w: f64| {
        let t = 1.0 - w * w;
        if t <= 0.0 {
            if half == 0.0 { (kappa * w - kappa).exp() } else { 0.0 }
        } else {
            (kappa * (w - 1.0) + half * t.ln()).exp()
        }
    };
    let mut cum = vec![0.0; steps + 1];
    for i in 1..=steps {
        let a = -1.0 + (i - 1) as f64 * h;
        cum[i] = cum[i - 1] + 0.5 * h * (density(a) + density(a + h));
    }
    let total = cum[steps];
    move |w: f64| {
        let pos = ((w + 1.0) / h).clamp(0.0, steps as f64);
        let i = (pos as usize).min(steps - 1);
        let frac = pos - i as f64;
        (cum[i] + frac * (cum[i + 1] - cum[i])) / total
    }
}

#[test]
fn cosine_marginal_dim3_matches_closed_form() {
    let kappa = 5.0;
    let mut w = cosines(3, kappa, 20_000, 11);
    let norm = (kappa).exp() - (-kappa).exp();
    let d = ks_statistic(&mut w, |x| ((kappa * x).exp() - (-kappa).exp()) / norm);
    assert!(d < ks_critical(20_000), "KS D = {d}");
}

#[test]
fn cosine_marginal_high_dim_matches_quadrature() {
    for &(dim, kappa) in &[(16, 20.0), (64, 3.0), (512, 500.0)] {
        let mut w = cosines(dim, kappa, 20_000, dim as u64);
        let cdf = numeric_marginal_cdf(dim, kappa);
        let d = ks_statistic(&mut w, cdf);
        assert!(d < ks_critical(20_000), "dim {dim} kappa {kappa}: KS D = {d}");
    }
}

#[test]
fn zero_kappa_is_uniform() {
    // At dim 3 the cosine of a uniform point is uniform on [-1, 1].
    let w = cosines(3, 0.0, 40_000, 5);
    let bins = 20;
    let mut counts = vec![0.0; bins];
    for x in &w {
        counts[(((x + 1.0) / 2.0 * bins as f64) as usize).min(bins - 1)] += 1.0;
    }
    let expected = w.len() as f64 / bins as f64;
    let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(chi2);
    assert!(p > 0.001, "chi2 = {chi2}, p = {p}");
}

#[test]
fn mean_direction_and_length() {
    let dim = 16;
    let kappa = 10.0;
    let mu = geometry::uniform_sample(dim, &mut RandomStream::new(3)).unwrap();
    let params = VmfParams::new(mu.clone(), kappa).unwrap();
    let mut rng = RandomStream::new(4);
    let n = 50_000;
    let mut sum = vec![0.0; dim];
    for _ in 0..n {
        let y = vmf::sample_vmf(&params, &mut rng).unwrap();
        sum.iter_mut().zip(y.as_slice()).for_each(|(s, v)| *s += v);
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    let expected = vmf::mean_resultant_length(dim, kappa).unwrap();
    assert!((expected - 0.4876216679793914).abs() < 1e-12);
    // E[y] = A mu; each component has standard error below 0.005.
    for (m, u) in mean.iter().zip(mu.as_slice()) {
        assert!((m - expected * u).abs() < 0.02, "{m} vs {}", expected * u);
    }
}

#[test]
fn equivariant_under_pole_choice() {
    // The cosine law does not depend on where the mean direction points.
    let dim = 8;
    let sampler = VmfSampler::new(dim, 4.0).unwrap();
    let poles = [
        UnitVector::basis(dim, 0).unwrap(),
        UnitVector::basis(dim, 0).unwrap().negated(),
        geometry::uniform_sample(dim, &mut RandomStream::new(1)).unwrap(),
    ];
    let cdf = numeric_marginal_cdf(dim, 4.0);
    for (k, mu) in poles.iter().enumerate() {
        let mut rng = RandomStream::new(100 + k as u64);
        let mut w: Vec<f64> = (0..10_000).map(|_| sampler.sample(mu, &mut rng).unwrap().dot(mu)).collect();
        let d = ks_statistic(&mut w, &cdf);
        assert!(d < ks_critical(10_000), "pole {k}: KS D = {d}");
    }
}

#[test]
fn density_integrates_to_one_dim3() {
    // On S^2 the density depends only on w; the area element is 2 pi dw.
    let mu = UnitVector::basis(3, 0).unwrap();
    let params = VmfParams::new(mu, 5.0).unwrap();
    let n = 20_000;
    let h = 2.0 / n as f64;
    let f = |w: f64| {
        let s = (1.0 - w * w).max(0.0).sqrt();
        let y = UnitVector::new(vec![w, s, 0.0]).unwrap();
        vmf::log_density(&y, &params).unwrap().exp()
    };
    let mut integral = f(-1.0) + f(1.0);
    for i in 1..n {
        integral += if i % 2 == 1 { 4.0 } else { 2.0 } * f(-1.0 + i as f64 * h);
    }
    integral *= h / 3.0 * 2.0 * std::f64::consts::PI;
    assert!((integral - 1.0).abs() < 1e-9, "integral = {integral}");
}

#[test]
fn samples_are_unit_norm() {
    let mu = geometry::uniform_sample(512, &mut RandomStream::new(8)).unwrap();
    let sampler = VmfSampler::new(512, 50.0).unwrap();
    let mut rng = RandomStream::new(9);
    for _ in 0..1000 {
        let y = sampler.sample(&mu, &mut rng).unwrap();
        assert!((geometry::norm(y.as_slice()) - 1.0).abs() < 1e-12);
    }
}
