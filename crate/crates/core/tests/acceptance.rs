//! Acceptance criteria for the library, one PASS/FAIL line each.
//!
//! Runs without the test harness so the report is always printed; exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;

use wavespec::benchmark::PercentStats;
use wavespec::estimation::{fit, Method, MethodKind, OptimizerConfig};
use wavespec::model::{eval_spectrum, eval_spectrum_gradient, WaveParams};
use wavespec::nonparam::{default_segment_len, periodogram, FrequencySelection};
use wavespec::sampling::{
    aliased_spectrum, aliased_spectrum_gradient, QuadratureConfig, QuadratureOverrides, SampledModel,
    SamplingScheme,
};
use wavespec::simulation::CirculantEmbedding;
use wavespec::uncertainty::{
    correlation_matrix, estimator_variance_and_ci, periodogram_covariance, sandwich_variance,
};

const DELTA: f64 = 0.78125;
const N_TABLE: usize = 2304;
const SEED: u64 = 20_240_601;

struct Report {
    lines: Vec<(bool, String)>,
}

impl Report {
    fn record(&mut self, id: u32, title: &str, pass: bool, detail: String) {
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("{tag} [{id}] {title}: {detail}");
        self.lines.push((pass, title.to_string()));
    }
}

/// Fits `methods` to `reps` records simulated at `theta`; estimates are
/// `[method][rep]`. Failed fits are dropped and counted.
fn monte_carlo(theta: &WaveParams, n: usize, methods: &[Method], reps: usize, seed: u64) -> (Vec<Vec<[f64; 4]>>, usize) {
    let scheme = SamplingScheme::new(DELTA, n).unwrap();
    let quad = QuadratureConfig::for_model(theta, &scheme);
    let emb = CirculantEmbedding::from_model(theta, &scheme, &quad).unwrap();
    let sel = FrequencySelection::full(scheme).unwrap();
    let rows: Vec<Vec<Option<[f64; 4]>>> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let x = emb.sample(seed, rep);
            methods
                .iter()
                .map(|m| {
                    fit(&x, m, &sel, &QuadratureOverrides::default(), &OptimizerConfig::default())
                        .ok()
                        .map(|r| r.theta_hat.free())
                })
                .collect()
        })
        .collect();
    let mut failures = 0;
    let per_method = (0..methods.len())
        .map(|mi| {
            rows.iter()
                .filter_map(|r| {
                    if r[mi].is_none() {
                        failures += 1;
                    }
                    r[mi]
                })
                .collect()
        })
        .collect();
    (per_method, failures)
}

fn stats(est: &[[f64; 4]], truth: [f64; 4]) -> [PercentStats; 4] {
    std::array::from_fn(|i| {
        let col: Vec<f64> = est.iter().map(|t| t[i]).collect();
        PercentStats::from_estimates(&col, truth[i]).unwrap()
    })
}

fn avg_rmse(s: &[PercentStats; 4]) -> f64 {
    s.iter().map(|p| p.rmse).sum::<f64>() / 4.0
}

/// Linear-interpolation sample quantile.
fn quantile(v: &[f64], p: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let h = (s.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

fn column(est: &[[f64; 4]], i: usize) -> Vec<f64> {
    est.iter().map(|t| t[i]).collect()
}

fn fmt4(v: [f64; 4]) -> String {
    format!("({:.2}, {:.2}, {:.2}, {:.2})", v[0], v[1], v[2], v[3])
}

fn criteria_1_to_3(report: &mut Report) {
    let theta = WaveParams::canonical();
    let truth = theta.free();
    let methods = [
        Method::debiased_whittle(),
        Method::new(MethodKind::Ls),
        Method::bls(default_segment_len(DELTA)),
    ];
    let start = Instant::now();
    let (est, failures) = monte_carlo(&theta, N_TABLE, &methods, 200, SEED);
    let secs = start.elapsed().as_secs_f64();
    let dw = stats(&est[0], truth);
    let ls = stats(&est[1], truth);
    let bls = stats(&est[2], truth);

    let bias = dw.map(|s| s.bias.abs());
    let sd = dw.map(|s| s.sd);
    let pass = bias[0] < 3.0
        && bias[1] < 3.0
        && bias[3] < 3.0
        && bias[2] < 8.0
        && sd[0] <= 13.0
        && sd[1] <= 1.5
        && sd[2] <= 26.0
        && sd[3] <= 3.5
        && failures == 0;
    // Asymptotic SD at the truth, for reading a failure: the sandwich keeps
    // the correlation of the leakage-dominated ordinates below the peak.
    let sel = FrequencySelection::full(SamplingScheme::new(DELTA, N_TABLE).unwrap()).unwrap();
    let quad = QuadratureConfig::for_model(&theta, &sel.scheme());
    let predicted: [f64; 4] = sandwich_variance(&theta, &sel, &quad, false)
        .map(|s| std::array::from_fn(|i| 100.0 * s.var_theta[i][i].sqrt() / truth[i]))
        .unwrap_or([f64::NAN; 4]);
    report.record(
        1,
        "canonical DW recovery (200 reps, N=2304)",
        pass,
        format!(
            "|bias|% {} (< 3, 3, 8, 3), SD% {} (<= 13, 1.5, 26, 3.5), sandwich SD% at the truth {}, failed fits {failures}, {secs:.0} s for 600 fits on {} threads",
            fmt4(bias),
            fmt4(sd),
            fmt4(predicted),
            rayon::current_num_threads()
        ),
    );

    let ratio = ls[3].sd / dw[3].sd;
    let (a_dw, a_ls, a_bls) = (avg_rmse(&dw), avg_rmse(&ls), avg_rmse(&bls));
    report.record(
        2,
        "estimator ordering",
        ratio >= 3.0 && a_dw < a_ls && a_dw < a_bls,
        format!("SD%(r) LS/DW = {:.2}/{:.2} = {ratio:.2} (>= 3); average RMSE% DW {a_dw:.2}, LS {a_ls:.2}, BLS {a_bls:.2}", ls[3].sd, dw[3].sd),
    );

    let five = theta.with_free([0.7, 0.7, 3.3, 5.0]);
    let (est5, _) = monte_carlo(&five, N_TABLE, &methods[..2], 200, SEED + 1);
    let (dw4, dw5) = (column(&est[0], 3), column(&est5[0], 3));
    let (ls4, ls5) = (column(&est[1], 3), column(&est5[1], 3));
    let dw_gap = quantile(&dw5, 0.01) - quantile(&dw4, 0.99);
    let ls_gap = quantile(&ls5, 0.01) - quantile(&ls4, 0.99);
    report.record(
        3,
        "tail distinguishability r=4 vs r=5",
        dw_gap > 0.0 && ls_gap < 0.0,
        format!(
            "DW: q99(r=4) {:.3} < q01(r=5) {:.3}; LS: q99(r=4) {:.3} vs q01(r=5) {:.3} (must overlap)",
            quantile(&dw4, 0.99),
            quantile(&dw5, 0.01),
            quantile(&ls4, 0.99),
            quantile(&ls5, 0.01)
        ),
    );
}

/// `|delta/(2 pi n) int f_D(w) D(w - w_j) conj(D(w - w_k)) dw|^2` by a plain
/// Riemann sum with `D(v) = sum_t e^{i t delta v}`.
fn brute_force_covariance(theta: &WaveParams, scheme: &SamplingScheme, quad: &QuadratureConfig) -> Vec<Vec<f64>> {
    let n = scheme.n;
    let h = 2.0 * PI / (quad.m as f64 * scheme.delta);
    let (lo, hi) = scheme.index_range();
    let freqs: Vec<f64> = (lo..=hi).map(|j| scheme.omega(j)).collect();
    let mut acc = vec![vec![(0.0f64, 0.0f64); n]; n];
    for i in 0..quad.m {
        let w = -PI / scheme.delta + i as f64 * h;
        let f = aliased_spectrum(w, theta, scheme, quad).unwrap() * h;
        let d: Vec<(f64, f64)> = freqs
            .iter()
            .map(|&wj| {
                (0..n).fold((0.0, 0.0), |(re, im), t| {
                    let ph = t as f64 * scheme.delta * (w - wj);
                    (re + ph.cos(), im + ph.sin())
                })
            })
            .collect();
        for a in 0..n {
            for b in 0..n {
                // d_a conj(d_b)
                let re = d[a].0 * d[b].0 + d[a].1 * d[b].1;
                let im = d[a].1 * d[b].0 - d[a].0 * d[b].1;
                acc[a][b].0 += f * re;
                acc[a][b].1 += f * im;
            }
        }
    }
    let s = scheme.delta / (2.0 * PI * n as f64);
    acc.iter()
        .map(|row| row.iter().map(|&(re, im)| (s * re).powi(2) + (s * im).powi(2)).collect())
        .collect()
}

fn criterion_4(report: &mut Report) {
    let theta = WaveParams::canonical();
    let mut worst = 0.0f64;
    let mut worst_zero = 0.0f64;
    let mut fast_secs = 0.0;
    for n in [4usize, 8, 16] {
        let scheme = SamplingScheme::new(DELTA, n).unwrap();
        let mut quad = QuadratureConfig::for_model(&theta, &scheme);
        quad.m = 4096;
        let t = Instant::now();
        let fast = periodogram_covariance(&theta, &scheme, &quad, false).unwrap().to_natural();
        fast_secs += t.elapsed().as_secs_f64();
        let slow = brute_force_covariance(&theta, &scheme, &quad);
        let (lo, _) = scheme.index_range();
        for a in 0..n {
            for b in 0..n {
                let (j, k) = (lo + a as i64, lo + b as i64);
                let zero_by_symmetry = (j == 0 && scheme.is_nyquist(k)) || (k == 0 && scheme.is_nyquist(j));
                if zero_by_symmetry {
                    let scale = (slow[a][a] * slow[b][b]).sqrt();
                    worst_zero = worst_zero.max(fast[a][b].max(slow[a][b]) / scale);
                } else {
                    worst = worst.max((fast[a][b] - slow[a][b]).abs() / slow[a][b]);
                }
            }
        }
    }
    report.record(
        4,
        "2D-FFT periodogram covariance vs brute force, N in {4, 8, 16}",
        worst < 1e-8 && worst_zero < 1e-14 && fast_secs < 1.0,
        format!(
            "max entrywise rel. error {worst:.2e} (< 1e-8); (0, Nyquist) entries, exactly zero by symmetry, at {worst_zero:.1e} of scale in both; FFT path {:.1} ms",
            fast_secs * 1e3
        ),
    );
}

/// Central difference of a scalar function of the free parameters. The step
/// is `1e-5 |theta_i|` divided by the elasticity seen on a first pass, so
/// that the relative change of the function stays near `1e-5` even where it
/// varies like `exp(-c w_p^4)`.
fn central_difference(free: [f64; 4], i: usize, value: f64, f: impl Fn([f64; 4]) -> f64) -> f64 {
    let diff = |h: f64| {
        let mut up = free;
        let mut dn = free;
        up[i] += h;
        dn[i] -= h;
        (f(up) - f(dn)) / (2.0 * h)
    };
    let h0 = 1e-5 * free[i].abs();
    let first = diff(h0);
    let elasticity = if value != 0.0 { (first * free[i] / value).abs() } else { 1.0 };
    if elasticity > 1.0 {
        diff(h0 / elasticity)
    } else {
        first
    }
}

/// Values this small are close to the subnormal range, where a double keeps
/// too few significant digits for a 1e-5 comparison.
const UNDERFLOW_FLOOR: f64 = 1e-290;

fn criterion_5(report: &mut Report) {
    // Error per component is |g_i - fd_i| / max(|fd_i|, F / |theta_i|): the
    // relative error of the derivative, floored at the log-elasticity scale
    // so components that cross zero stay finite.
    let mut worst = [0.0f64; 3];
    let mut skipped = 0usize;
    let delta = 1.0;
    let n = 128;
    let scheme = SamplingScheme::new(delta, n).unwrap();
    let nyq = PI / delta;
    let omegas: Vec<f64> = (1..=50).map(|i| nyq * i as f64 / 50.0).collect();
    let mut points = 0;
    for a in [0.4, 0.7, 1.2] {
        for wp in [0.5, 0.7, 1.1] {
            for g in [1.5, 3.3, 6.0] {
                for r in [3.0, 4.0, 5.5] {
                    let theta = WaveParams::new(a, wp, g, r).unwrap();
                    let free = theta.free();
                    let quad = QuadratureConfig::for_model(&theta, &scheme);
                    let mut check = |which: usize, value: f64, grad: [f64; 4], fd: &dyn Fn(usize) -> f64| {
                        if value.abs() < UNDERFLOW_FLOOR {
                            skipped += 1;
                            return;
                        }
                        for i in 0..4 {
                            let d = fd(i);
                            let scale = d.abs().max(value.abs() / free[i].abs());
                            worst[which] = worst[which].max((grad[i] - d).abs() / scale);
                        }
                    };
                    for &w in &omegas {
                        let f = eval_spectrum(w, &theta).unwrap();
                        check(0, f, eval_spectrum_gradient(w, &theta).unwrap(), &|i| {
                            central_difference(free, i, f, |v| eval_spectrum(w, &theta.with_free(v)).unwrap())
                        });
                        let fa = aliased_spectrum(w, &theta, &scheme, &quad).unwrap();
                        check(1, fa, aliased_spectrum_gradient(w, &theta, &scheme, &quad).unwrap(), &|i| {
                            central_difference(free, i, fa, |v| {
                                aliased_spectrum(w, &theta.with_free(v), &scheme, &quad).unwrap()
                            })
                        });
                    }
                    let model = SampledModel::new(theta, scheme, quad, false).unwrap();
                    let (ebar, grads) = model.expected_periodogram_with_gradient();
                    // Fifty positive Fourier frequencies spread over (0, Nyquist].
                    let (lo, _) = scheme.index_range();
                    for j in (1..=50).map(|i| (i as f64 * 64.0 / 50.0).round() as i64) {
                        let p = (j - lo) as usize;
                        check(2, ebar[p], std::array::from_fn(|i| grads[i][p]), &|i| {
                            central_difference(free, i, ebar[p], |v| {
                                SampledModel::new(theta.with_free(v), scheme, quad, false).unwrap().expected_periodogram()[p]
                            })
                        });
                    }
                    points += 1;
                }
            }
        }
    }
    let max = worst.iter().cloned().fold(0.0, f64::max);
    report.record(
        5,
        "gradient suite vs central differences (81 parameter points x 50 frequencies)",
        max < 1e-5 && points == 81,
        format!(
            "max relative error: spectrum {:.1e}, aliased {:.1e}, expected periodogram {:.1e} (< 1e-5); {skipped} values below {UNDERFLOW_FLOOR:e} skipped",
            worst[0], worst[1], worst[2]
        ),
    );
}

fn criterion_6(report: &mut Report) {
    let theta = WaveParams::canonical();
    let n = 256;
    let scheme = SamplingScheme::new(DELTA, n).unwrap();
    let quad = QuadratureConfig::for_model(&theta, &scheme);
    let ebar = SampledModel::new(theta, scheme, quad, false).unwrap().expected_periodogram();
    let emb = CirculantEmbedding::from_model(&theta, &scheme, &quad).unwrap();
    let start = Instant::now();
    let reps = 10_000u64;
    let sum = (0..reps)
        .into_par_iter()
        .map(|rep| periodogram(&emb.sample(SEED + 6, rep)).unwrap().values)
        .reduce(
            || vec![0.0; n],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let secs = start.elapsed().as_secs_f64();
    let (lo, _) = scheme.index_range();
    let mut worst = 0.0f64;
    let mut count = 0;
    for (p, (&s, &e)) in sum.iter().zip(&ebar).enumerate() {
        // The sample mean is removed, so the zero frequency is excluded.
        if e > 1e-3 && lo + p as i64 != 0 {
            worst = worst.max((s / reps as f64 / e - 1.0).abs());
            count += 1;
        }
    }
    report.record(
        6,
        "mean of 10,000 simulated periodograms vs expected periodogram (N=256)",
        worst < 0.03 && secs < 120.0,
        format!("max relative error {:.2}% over {count} frequencies with fbar > 1e-3 (< 3%), {secs:.1} s", worst * 100.0),
    );
}

fn criterion_7(report: &mut Report) {
    let theta = WaveParams::canonical();
    let mut worst_parseval = 0.0f64;
    let mut worst_sum = 0.0f64;
    for n in [255usize, 256, 2304] {
        let scheme = SamplingScheme::new(DELTA, n).unwrap();
        let quad = QuadratureConfig::for_model(&theta, &scheme);
        let model = SampledModel::new(theta, scheme, quad, false).unwrap();
        let emb = CirculantEmbedding::from_model(&theta, &scheme, &quad).unwrap();
        let x = emb.sample(SEED + 7, 0);
        let i = periodogram(&x).unwrap();
        let lhs = 2.0 * PI / (n as f64 * DELTA) * i.values.iter().sum::<f64>();
        let m = x.mean();
        let rhs = x.values().iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64;
        worst_parseval = worst_parseval.max((lhs / rhs - 1.0).abs());
        let c0 = model.autocovariance().values[0];
        let s = 2.0 * PI / (n as f64 * DELTA) * model.expected_periodogram().iter().sum::<f64>();
        worst_sum = worst_sum.max((s / c0 - 1.0).abs());
    }
    report.record(
        7,
        "Parseval and expected-periodogram sum rule (N = 255, 256, 2304)",
        worst_parseval < 1e-10 && worst_sum < 1e-10,
        format!("Parseval rel. error {worst_parseval:.1e}, sum rule rel. error {worst_sum:.1e} (< 1e-10)"),
    );
}

fn max_offdiagonal_correlation(theta: &WaveParams, scheme: &SamplingScheme, differenced: bool) -> f64 {
    let quad = QuadratureConfig::for_model(theta, scheme);
    let c = correlation_matrix(theta, scheme, &quad, differenced).unwrap();
    let positive: Vec<i64> = (1..(scheme.n / 2) as i64).collect();
    let skip = (positive.len() as f64 * 0.05).ceil() as usize;
    let kept = &positive[skip..];
    let mut worst = 0.0f64;
    for &j in kept {
        for &k in kept {
            if j != k {
                worst = worst.max(c[scheme.position(j)][scheme.position(k)].abs());
            }
        }
    }
    worst
}

fn criterion_8(report: &mut Report) {
    // Steeper tail r = 5, where leakage dominates near Nyquist; record
    // length 1024 samples (256 s). The canonical r = 4 is reported alongside.
    let scheme = SamplingScheme::new(0.25, 1024).unwrap();
    let steep = WaveParams::new(0.7, 0.7, 3.3, 5.0).unwrap();
    let raw = max_offdiagonal_correlation(&steep, &scheme, false);
    let diff = max_offdiagonal_correlation(&steep, &scheme, true);
    let canonical = WaveParams::canonical();
    let raw4 = max_offdiagonal_correlation(&canonical, &scheme, false);
    let diff4 = max_offdiagonal_correlation(&canonical, &scheme, true);
    report.record(
        8,
        "differencing decorrelates the 4 Hz periodogram",
        raw > 0.5 && diff < 0.2,
        format!(
            "max off-diagonal correlation above the lowest 5%, theta = (0.7, 0.7, 3.3, 5): undifferenced {raw:.3} (> 0.5), differenced {diff:.3} (< 0.2); at r = 4: {raw4:.3}, {diff4:.3}"
        ),
    );
}

fn criterion_9(report: &mut Report) {
    let theta = WaveParams::canonical();
    let truth = theta.free();
    let scheme = SamplingScheme::new(DELTA, N_TABLE).unwrap();
    let quad = QuadratureConfig::for_model(&theta, &scheme);
    let emb = CirculantEmbedding::from_model(&theta, &scheme, &quad).unwrap();
    let sel = FrequencySelection::full(scheme).unwrap();
    let reps = 500u64;
    let runs: Vec<Option<([f64; 4], (f64, f64))>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let x = emb.sample(SEED + 9, rep);
            let f = fit(&x, &Method::debiased_whittle(), &sel, &QuadratureOverrides::default(), &OptimizerConfig::default()).ok()?;
            let ci = estimator_variance_and_ci(&f, 0.95).ok()?;
            Some((f.theta_hat.free(), (ci.intervals[3].lower, ci.intervals[3].upper)))
        })
        .collect();
    let ok: Vec<_> = runs.iter().flatten().collect();
    let est: Vec<[f64; 4]> = ok.iter().map(|(t, _)| *t).collect();
    let covered = ok.iter().filter(|(_, (lo, hi))| *lo <= truth[3] && truth[3] <= *hi).count();
    let coverage = covered as f64 / ok.len() as f64;

    let predicted = wavespec::uncertainty::sandwich_variance(&theta, &sel, &quad, false).unwrap().var_theta;
    let mut ratios = [0.0; 4];
    for i in 0..4 {
        let col = column(&est, i);
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (col.len() - 1) as f64).sqrt();
        ratios[i] = predicted[i][i].sqrt() / sd;
    }
    let within = ratios.iter().all(|&q| (1.0 / 1.5..=1.5).contains(&q));
    report.record(
        9,
        "sandwich calibration (500 reps, N=2304)",
        within && (0.90..=0.98).contains(&coverage) && ok.len() == reps as usize,
        format!(
            "sandwich SD / Monte Carlo SD {} (within [0.67, 1.5]); r 95% interval coverage {:.1}% ([90, 98]); {} of {reps} fits with intervals",
            fmt4(ratios),
            coverage * 100.0,
            ok.len()
        ),
    );
}

fn criterion_10(report: &mut Report) {
    let theta = WaveParams::canonical().with_free([0.7, 0.7, 1.0, 5.0]);
    let (est, failures) = monte_carlo(&theta, N_TABLE, &[Method::debiased_whittle()], 200, SEED + 10);
    let est = &est[0];
    let at_boundary = est.iter().filter(|t| t[2] - 1.0 <= 1e-3).count() as f64 / est.len() as f64;
    let sd_r = stats(est, theta.free())[3].sd;
    report.record(
        10,
        "gamma = 1 boundary (200 reps)",
        at_boundary >= 0.2 && sd_r <= 5.0 && failures == 0,
        format!(
            "{:.1}% of gamma estimates within 1e-3 of 1 (>= 20%), SD%(r) {sd_r:.2} (<= 5), failed fits {failures}",
            at_boundary * 100.0
        ),
    );
}

fn main() {
    if let Ok(raw) = std::env::var("WAVESPEC_THREADS") {
        if let Ok(n) = raw.trim().parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
    let start = Instant::now();
    let mut report = Report { lines: Vec::new() };
    // Criterion numbers given as arguments restrict the run; cargo's own
    // harness flags are ignored.
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |ids: &[u32]| only.is_empty() || ids.iter().any(|i| only.contains(i));
    if wanted(&[1, 2, 3]) {
        criteria_1_to_3(&mut report);
    }
    let rest: [(u32, fn(&mut Report)); 7] = [
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    for (id, run) in rest {
        if wanted(&[id]) {
            run(&mut report);
        }
    }
    let failed: Vec<&str> = report.lines.iter().filter(|(p, _)| !p).map(|(_, t)| t.as_str()).collect();
    println!(
        "acceptance: {} of {} criteria passed in {:.0} s",
        report.lines.len() - failed.len(),
        report.lines.len(),
        start.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
