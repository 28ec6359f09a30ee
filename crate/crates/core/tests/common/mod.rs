//! Independent reference implementations used only by the tests.
#![allow(dead_code)]

use emct2::emc_sim::SequenceProtocol;
use emct2::phantom::{B1Field, Coverage, Layout, NoiseModel, PhantomSpec};

/// Isochromat simulation of a CPMG train.
///
/// `n_spins` spins carry dephasing angles `2πi/n` that each crusher adds once
/// per half echo period. After an ideal excitation along +x every spin is
/// relaxed, precessed, rotated about x by `b1 · nominal`, relaxed and
/// precessed again; the echo is the magnitude of the mean transverse
/// magnetization.
pub fn isochromat_train(t2: f64, b1: f64, protocol: &SequenceProtocol, n_spins: usize) -> Vec<f64> {
    let alpha = (b1 * protocol.nominal_refocus_deg).to_radians();
    let (sa, ca) = alpha.sin_cos();
    let phases: Vec<(f64, f64)> = (0..n_spins)
        .map(|i| (2.0 * std::f64::consts::PI * i as f64 / n_spins as f64).sin_cos())
        .collect();
    let mut mx = vec![1.0; n_spins];
    let mut my = vec![0.0; n_spins];
    let mut mz = vec![0.0; n_spins];

    let half = |mx: &mut [f64], my: &mut [f64], mz: &mut [f64], dt: f64| {
        let e2 = (-dt / t2).exp();
        let e1 = (-dt / protocol.t1_assumed).exp();
        for i in 0..n_spins {
            let (s, c) = phases[i];
            let (x, y) = (mx[i] * e2, my[i] * e2);
            mx[i] = x * c - y * s;
            my[i] = x * s + y * c;
            mz[i] = mz[i] * e1 + (1.0 - e1);
        }
    };

    let mut out = Vec::with_capacity(protocol.n_echoes);
    for k in 0..protocol.n_echoes {
        let spacing = if k == 0 { protocol.te1 } else { protocol.delta_te };
        half(&mut mx, &mut my, &mut mz, spacing / 2.0);
        for i in 0..n_spins {
            let (y, z) = (my[i], mz[i]);
            my[i] = ca * y - sa * z;
            mz[i] = sa * y + ca * z;
        }
        half(&mut mx, &mut my, &mut mz, spacing / 2.0);
        let sx: f64 = mx.iter().sum();
        let sy: f64 = my.iter().sum();
        out.push(sx.hypot(sy) / n_spins as f64);
    }
    out
}

/// Γ(n/2) for a positive integer `n`, from Γ(1/2) = √π, Γ(1) = 1 and Γ(x+1) = xΓ(x).
fn gamma_half(n: usize) -> f64 {
    let (mut x, mut g) = if n.is_multiple_of(2) { (1.0, 1.0) } else { (0.5, std::f64::consts::PI.sqrt()) };
    while x < n as f64 / 2.0 - 1e-9 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Two-sided Student-t p-value with integer `df`, by composite Simpson
/// integration of the density over `[0, |t|]`.
pub fn t_two_sided_p(t: f64, df: usize) -> f64 {
    let nu = df as f64;
    let norm = gamma_half(df + 1) / ((nu * std::f64::consts::PI).sqrt() * gamma_half(df));
    let pdf = |x: f64| norm * (1.0 + x * x / nu).powf(-(nu + 1.0) / 2.0);
    let b = t.abs();
    let n = 200_000;
    let h = b / n as f64;
    let mut s = pdf(0.0) + pdf(b);
    for i in 1..n {
        s += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let half_mass = s * h / 3.0;
    (1.0 - 2.0 * half_mass).max(0.0)
}

/// Paired t statistic computed directly from its definition.
pub fn paired_t(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let m = d.iter().sum::<f64>() / n;
    let sd = (d.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)).sqrt();
    m * n.sqrt() / sd
}

/// Row maximizing the cosine similarity with `curve`; first row wins ties.
pub fn brute_force_best_row(curve: &[f64], rows: &[f64], n_echoes: usize) -> usize {
    let norm = curve.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut best = (f64::NEG_INFINITY, 0);
    for (r, row) in rows.chunks_exact(n_echoes).enumerate() {
        let rn = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        let cos = curve.iter().zip(row).map(|(a, b)| a * b).sum::<f64>() / (norm * rn);
        if cos > best.0 {
            best = (cos, r);
        }
    }
    best.1
}

/// 128 × 120 × 4 smooth-gradient phantom, on-grid T2 in 30..200 ms, B1 ramp 0.85..1.15.
pub fn acceptance_spec() -> PhantomSpec {
    PhantomSpec {
        rows: 128,
        cols: 120,
        slices: 4,
        layout: Layout::SmoothGradient,
        t2_range: [30.0, 200.0],
        pd_range: [0.6, 1.0],
        b1_field: B1Field::PlanarRamp { from: 0.85, to: 1.15 },
        noise_sigma: 0.02,
        noise_model: NoiseModel::Gaussian,
        seed: 20240607,
        quantize: true,
        coverage: Coverage::default(),
    }
}
