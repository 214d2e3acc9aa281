//! Escape-rate experiments: growth of `D(t) = quasinorm(γ(t))` along normal
//! curves, the dilation-field growth ratio, and the two worked examples
//! (the Heisenberg circle lifts and the filiform central translations).

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::algebra::StratifiedAlgebra;
use crate::control::NormSpec;
use crate::error::{Error, Result};
use crate::group::{CarnotGroup, Covector, GroupElement};
use crate::integrator::{integrate_normal, pmp_identity_residual, GeodesicTrace};

/// Slack below `1/s` tolerated for a fitted escape slope.
pub const SLOPE_TOL: f64 = 0.05;

/// A trace that falls below this fraction of its running maximum of `D`,
/// after first leaving the unit ball, counts as returning towards its start.
pub const RETREAT_FRACTION: f64 = 0.5;

/// Speeds at or below this are treated as a constant curve.
const CONSTANT_SPEED: f64 = 1e-14;

/// `count` co-vectors uniform on the sphere `N(λ) = 1`: the absolute values
/// are a uniform point of the simplex (normalized exponentials), the signs
/// are fair coin flips.
pub fn sample_unit_covectors(n: usize, count: usize, seed: u64) -> Vec<Covector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut v: Vec<f64> = (0..n)
                .map(|_| {
                    let u: f64 = 1.0 - rng.random::<f64>();
                    -u.ln()
                })
                .collect();
            let total: f64 = v.iter().sum();
            for x in &mut v {
                *x /= total;
                if rng.random::<bool>() {
                    *x = -*x;
                }
            }
            Covector(v)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    /// A slope was fitted on the escape window.
    Fitted,
    /// Zero control: the curve never moves.
    Constant,
    /// The samples of `[T/10, T]` with `D(t) > 1` are too few, or span less
    /// than a factor [`MIN_FIT_SPAN`] in time.
    NoRegime,
    /// The integrator left the floating-point range.
    Overflow { last_valid_time: f64 },
}

impl RunStatus {
    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::Fitted => "fitted",
            RunStatus::Constant => "constant",
            RunStatus::NoRegime => "no-regime",
            RunStatus::Overflow { .. } => "overflow",
        }
    }
}

/// One co-vector's escape series.
#[derive(Debug, Clone)]
pub struct EscapeRun {
    pub cov_idx: usize,
    pub covector: Covector,
    pub n_lambda: f64,
    pub speed: f64,
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    pub status: RunStatus,
    /// Least-squares slope of `log D` against `log t` on the window.
    pub slope: Option<f64>,
    /// `min D(t) / t^{1/s}` over the window.
    pub c_emp: Option<f64>,
    pub fit_points: usize,
    /// First sample time with `D > 1`.
    pub first_exceed: Option<f64>,
    /// `min D(t) / max_{t1 <= t' <= t} D(t')` over `t >= t1 = first_exceed`.
    pub retreat_ratio: Option<f64>,
}

impl EscapeRun {
    pub fn slope_ok(&self, step: usize) -> bool {
        self.slope.is_none_or(|k| k >= 1.0 / step as f64 - SLOPE_TOL)
    }

    pub fn retreat_ok(&self) -> bool {
        self.retreat_ratio.is_none_or(|r| r >= RETREAT_FRACTION)
    }
}

#[derive(Debug, Clone)]
pub struct EscapeReport {
    pub algebra: String,
    pub step: usize,
    pub horizon: f64,
    pub runs: Vec<EscapeRun>,
    pub min_slope: Option<f64>,
    pub median_slope: Option<f64>,
    /// `min c_emp · N(λ)^{1/s}` over fitted runs: an empirical stand-in for
    /// the escape constant.
    pub min_scaled_constant: Option<f64>,
}

impl EscapeReport {
    pub fn slope_floor(&self) -> f64 {
        1.0 / self.step as f64 - SLOPE_TOL
    }

    pub fn fitted(&self) -> impl Iterator<Item = &EscapeRun> {
        self.runs.iter().filter(|r| r.status == RunStatus::Fitted)
    }

    /// Every fitted slope clears `1/s - 0.05`.
    pub fn slopes_ok(&self) -> bool {
        self.runs.iter().all(|r| r.slope_ok(self.step))
    }

    /// No non-constant trace falls back below half its running maximum.
    pub fn retreat_ok(&self) -> bool {
        self.runs.iter().all(EscapeRun::retreat_ok)
    }

    pub fn contract_ok(&self) -> bool {
        self.slopes_ok() && self.retreat_ok()
    }

    /// `(ε / N(λ)^{1/s}) t^{1/s} - 1` with the empirical `ε`.
    pub fn bound_rhs(&self, run: &EscapeRun, t: f64) -> f64 {
        let s = self.step as f64;
        match self.min_scaled_constant {
            Some(eps) => eps / run.n_lambda.powf(1.0 / s) * t.powf(1.0 / s) - 1.0,
            None => f64::NAN,
        }
    }

    /// `cov_idx,t,D,bound_rhs`, every `stride`-th sample plus the last.
    pub fn write_series_csv<W: Write>(&self, mut w: W, stride: usize) -> std::io::Result<()> {
        writeln!(w, "cov_idx,t,D,bound_rhs")?;
        let stride = stride.max(1);
        for run in &self.runs {
            let last = run.times.len().saturating_sub(1);
            for (k, (t, d)) in run.times.iter().zip(&run.distances).enumerate() {
                if k % stride == 0 || k == last {
                    writeln!(w, "{},{t},{d},{}", run.cov_idx, self.bound_rhs(run, *t))?;
                }
            }
        }
        Ok(())
    }

    /// One row per co-vector.
    pub fn write_slopes_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "cov_idx,n_lambda,speed,slope,c_emp,fit_points,first_exceed,retreat_ratio,status"
        )?;
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
        for r in &self.runs {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.cov_idx,
                r.n_lambda,
                r.speed,
                opt(r.slope),
                opt(r.c_emp),
                r.fit_points,
                opt(r.first_exceed),
                opt(r.retreat_ratio),
                r.status.label()
            )?;
        }
        Ok(())
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

/// Minimum number of window samples needed for a slope fit.
pub const MIN_FIT_POINTS: usize = 10;

/// The fitted samples must span at least this ratio `t_last / t_first`.
pub const MIN_FIT_SPAN: f64 = 2.0;

/// Escape statistics of one `D(t)` series; see [`EscapeRun`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SeriesFit {
    pub slope: Option<f64>,
    pub c_emp: Option<f64>,
    pub fit_points: usize,
    pub first_exceed: Option<f64>,
    pub retreat_ratio: Option<f64>,
}

/// Fits the escape statistics of a `D(t)` series on `[T/10, T] ∩ {D > 1}`.
pub fn analyse_series(step: usize, times: &[f64], distances: &[f64]) -> SeriesFit {
    let horizon = times.last().copied().unwrap_or(0.0);
    let inv_s = 1.0 / step as f64;
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    let mut c_emp = f64::INFINITY;
    for (&t, &d) in times.iter().zip(distances) {
        if t >= horizon / 10.0 && d > 1.0 && t > 0.0 {
            lx.push(t.ln());
            ly.push(d.ln());
            c_emp = c_emp.min(d / t.powf(inv_s));
        }
    }
    let fit_points = lx.len();
    let span = match (lx.first(), lx.last()) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    };
    let slope = if fit_points >= MIN_FIT_POINTS && span >= MIN_FIT_SPAN.ln() {
        fit_slope(&lx, &ly)
    } else {
        None
    };
    let c_emp = slope.map(|_| c_emp);

    let first = times.iter().zip(distances).position(|(_, &d)| d > 1.0);
    let first_exceed = first.map(|k| times[k]);
    let retreat_ratio = first.map(|k| {
        let mut running = distances[k];
        let mut worst = 1.0f64;
        for &d in &distances[k..] {
            running = running.max(d);
            worst = worst.min(d / running);
        }
        worst
    });
    SeriesFit {
        slope,
        c_emp,
        fit_points,
        first_exceed,
        retreat_ratio,
    }
}

fn escape_run(
    group: &CarnotGroup,
    norm: &NormSpec,
    cov_idx: usize,
    lambda: &Covector,
    horizon: f64,
    h: f64,
) -> Result<EscapeRun> {
    let mut run = EscapeRun {
        cov_idx,
        covector: lambda.clone(),
        n_lambda: lambda.norm(),
        speed: 0.0,
        times: Vec::new(),
        distances: Vec::new(),
        status: RunStatus::Constant,
        slope: None,
        c_emp: None,
        fit_points: 0,
        first_exceed: None,
        retreat_ratio: None,
    };
    let trace = match integrate_normal(group, norm, lambda, &group.identity(), horizon, h) {
        Ok(t) => t,
        Err(Error::Integration { last_valid_time }) => {
            run.status = RunStatus::Overflow { last_valid_time };
            return Ok(run);
        }
        Err(e) => return Err(e),
    };
    run.speed = trace.speeds().into_iter().fold(0.0, f64::max);
    run.times = trace.times.clone();
    run.distances = trace.points.iter().map(|p| group.homogeneous_quasinorm(p)).collect();
    if run.speed <= CONSTANT_SPEED {
        return Ok(run);
    }
    let fit = analyse_series(group.step(), &run.times, &run.distances);
    run.slope = fit.slope;
    run.c_emp = fit.c_emp;
    run.fit_points = fit.fit_points;
    run.first_exceed = fit.first_exceed;
    run.retreat_ratio = fit.retreat_ratio;
    run.status = if fit.slope.is_some() {
        RunStatus::Fitted
    } else {
        RunStatus::NoRegime
    };
    Ok(run)
}

/// Integrates every co-vector from the identity on `[0, T]` and fits the
/// escape exponent of `D(t)`.
pub fn run_escape(
    group: &CarnotGroup,
    norm: &NormSpec,
    covectors: &[Covector],
    horizon: f64,
    h: f64,
) -> Result<EscapeReport> {
    let runs: Vec<EscapeRun> = covectors
        .par_iter()
        .enumerate()
        .map(|(i, l)| escape_run(group, norm, i, l, horizon, h))
        .collect::<Result<_>>()?;
    let s = group.step();
    let mut slopes: Vec<f64> = runs.iter().filter_map(|r| r.slope).collect();
    slopes.sort_by(f64::total_cmp);
    let min_slope = slopes.first().copied();
    let median_slope = (!slopes.is_empty()).then(|| {
        let k = slopes.len();
        if k % 2 == 1 {
            slopes[k / 2]
        } else {
            0.5 * (slopes[k / 2 - 1] + slopes[k / 2])
        }
    });
    let min_scaled_constant = runs
        .iter()
        .filter_map(|r| r.c_emp.map(|c| c * r.n_lambda.powf(1.0 / s as f64)))
        .reduce(f64::min);
    Ok(EscapeReport {
        algebra: group.algebra().name().to_string(),
        step: s,
        horizon,
        runs,
        min_slope,
        median_slope,
        min_scaled_constant,
    })
}

/// `λ(Vec δ(g)) / (N(λ) max(D, D^s))`, or `None` at the identity.
pub fn growth_ratio(group: &CarnotGroup, lambda: &Covector, g: &GroupElement) -> Result<Option<f64>> {
    let d = group.homogeneous_quasinorm(g);
    let n = lambda.norm();
    if d == 0.0 || n == 0.0 {
        return Ok(None);
    }
    let num = group.covector_on_dilation_field(lambda, g)?;
    Ok(Some(num / (n * d.max(d.powi(group.step() as i32)))))
}

#[derive(Debug, Clone)]
pub struct GrowthSeries {
    pub cov_idx: usize,
    pub times: Vec<f64>,
    pub ratios: Vec<f64>,
    pub sup: f64,
    /// Supremum over the first half of the horizon.
    pub sup_first_half: f64,
}

#[derive(Debug, Clone)]
pub struct GrowthReport {
    pub algebra: String,
    pub horizon: f64,
    pub series: Vec<GrowthSeries>,
    /// Supremum over every trace: the empirical growth constant.
    pub sup: f64,
}

impl GrowthReport {
    /// The supremum does not grow by more than 10% over the second half of
    /// the horizon; a diverging ratio would.
    pub fn stabilised(&self) -> bool {
        self.series
            .iter()
            .all(|s| s.sup.is_finite() && s.sup <= 1.1 * s.sup_first_half)
    }

    pub fn write_csv<W: Write>(&self, mut w: W, stride: usize) -> std::io::Result<()> {
        writeln!(w, "cov_idx,t,ratio")?;
        let stride = stride.max(1);
        for s in &self.series {
            let last = s.times.len().saturating_sub(1);
            for (k, (t, r)) in s.times.iter().zip(&s.ratios).enumerate() {
                if k % stride == 0 || k == last {
                    writeln!(w, "{},{t},{r}", s.cov_idx)?;
                }
            }
        }
        Ok(())
    }
}

/// Growth ratios along the samples of one trace; the identity is skipped.
pub fn growth_series(
    group: &CarnotGroup,
    lambda: &Covector,
    trace: &GeodesicTrace,
    cov_idx: usize,
) -> Result<GrowthSeries> {
    let horizon = trace.horizon();
    let (mut times, mut ratios) = (Vec::new(), Vec::new());
    let (mut sup, mut sup_half) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (t, g) in trace.times.iter().zip(&trace.points) {
        if let Some(r) = growth_ratio(group, lambda, g)? {
            times.push(*t);
            ratios.push(r);
            sup = sup.max(r);
            if *t <= 0.5 * horizon {
                sup_half = sup_half.max(r);
            }
        }
    }
    Ok(GrowthSeries {
        cov_idx,
        times,
        ratios,
        sup,
        sup_first_half: sup_half,
    })
}

pub fn run_growth_bound(
    group: &CarnotGroup,
    norm: &NormSpec,
    covectors: &[Covector],
    horizon: f64,
    h: f64,
) -> Result<GrowthReport> {
    let series: Vec<GrowthSeries> = covectors
        .par_iter()
        .enumerate()
        .map(|(i, l)| {
            let tr = integrate_normal(group, norm, l, &group.identity(), horizon, h)?;
            growth_series(group, l, &tr, i)
        })
        .collect::<Result<_>>()?;
    let sup = series.iter().map(|s| s.sup).fold(f64::NEG_INFINITY, f64::max);
    Ok(GrowthReport {
        algebra: group.algebra().name().to_string(),
        horizon,
        series,
        sup,
    })
}

/// Closed form of the lift of the circle of radius `1/(2πN)` travelled `N`
/// times in `[0, 1]`.
pub fn heisenberg_circle(n: f64, t: f64) -> [f64; 3] {
    let w = 2.0 * PI * n;
    // Whole turns are removed before the trig calls so that the circle
    // closes exactly at integer multiples of the period.
    let turns = n * t;
    let (sin, cos) = (2.0 * PI * (turns - turns.round())).sin_cos();
    [(cos - 1.0) / w, sin / w, (w * t - sin) / (8.0 * (PI * n).powi(2))]
}

/// The co-vector whose normal curve from the identity is the circle lift:
/// `u = (λ_X - yλ_Z, λ_Y + xλ_Z)` must equal `(-sin 2πNt, cos 2πNt)`.
pub fn heisenberg_circle_covector(n: f64) -> Covector {
    Covector(vec![0.0, 1.0, 2.0 * PI * n])
}

#[derive(Debug, Clone)]
pub struct HeisenbergComparison {
    pub n: u32,
    pub h: f64,
    pub closed_endpoint: [f64; 3],
    pub integrated_endpoint: [f64; 3],
    /// Max coordinate deviation between closed form and integration on `[0, 1]`.
    pub max_deviation: f64,
    /// Max `|‖(x', y')‖ - 1|` of the closed form, by central differences.
    pub max_speed_deviation: f64,
    pub pmp_residual: f64,
}

impl HeisenbergComparison {
    pub fn passes(&self) -> bool {
        let exact = [0.0, 0.0, 1.0 / (4.0 * PI * self.n as f64)];
        let closed_ok = self
            .closed_endpoint
            .iter()
            .zip(exact)
            .all(|(a, b)| (a - b).abs() <= 4.0 * f64::EPSILON * b.abs().max(f64::EPSILON));
        closed_ok && self.max_deviation < 1e-6 && self.max_speed_deviation < 1e-6
    }
}

pub fn example_heisenberg(n: u32, h: f64) -> Result<HeisenbergComparison> {
    if n == 0 {
        return Err(Error::InvalidInput("N must be at least 1".into()));
    }
    let group = CarnotGroup::new(StratifiedAlgebra::heisenberg());
    let nf = n as f64;
    let lam = heisenberg_circle_covector(nf);
    let trace = integrate_normal(&group, &NormSpec::Euclidean, &lam, &group.identity(), 1.0, h)?;
    let mut max_dev = 0.0f64;
    let mut max_speed_dev = 0.0f64;
    let fd = 1e-6;
    for (t, g) in trace.times.iter().zip(&trace.points) {
        let exact = heisenberg_circle(nf, *t);
        for (e, x) in exact.iter().zip(&g.0) {
            max_dev = max_dev.max((e - x).abs());
        }
        let a = heisenberg_circle(nf, t + fd);
        let b = heisenberg_circle(nf, t - fd);
        let speed = (((a[0] - b[0]) / (2.0 * fd)).powi(2) + ((a[1] - b[1]) / (2.0 * fd)).powi(2)).sqrt();
        max_speed_dev = max_speed_dev.max((speed - 1.0).abs());
    }
    let end = trace.end();
    Ok(HeisenbergComparison {
        n,
        h: trace.step,
        closed_endpoint: heisenberg_circle(nf, 1.0),
        integrated_endpoint: [end.0[0], end.0[1], end.0[2]],
        max_deviation: max_dev,
        max_speed_deviation: max_speed_dev,
        pmp_residual: pmp_identity_residual(&group, &NormSpec::Euclidean, &lam, &trace)?,
    })
}

/// Largest sample-wise deviation between the trace started at `c·g0` and
/// `c` times the trace started at `g0`.
pub fn central_translation_residual(
    group: &CarnotGroup,
    norm: &NormSpec,
    lambda: &Covector,
    g0: &GroupElement,
    center: &GroupElement,
    horizon: f64,
    h: f64,
) -> Result<f64> {
    if !group.is_central(center) {
        return Err(Error::InvalidInput("translation element is not central".into()));
    }
    let base = integrate_normal(group, norm, lambda, g0, horizon, h)?;
    let moved = integrate_normal(group, norm, lambda, &group.multiply(center, g0)?, horizon, h)?;
    let mut worst = 0.0f64;
    for (a, b) in base.points.iter().zip(&moved.points) {
        let ca = group.multiply(center, a)?;
        worst = worst.max(ca.max_abs_diff(b));
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct FiliformReport {
    pub step: usize,
    pub m_max: u32,
    /// Max over `m = 1..=m_max` and the seeded co-vectors of the central
    /// translation residual for `c = exp(m Y_s)`.
    pub central_residual: f64,
    pub scan: EscapeReport,
    /// Step 2 only: `(K, slope)` for `λ = Y_1* + K Y_2*`, each run on a horizon and step
    /// scaled by `K / 2π` so that the winding is equally resolved.
    pub winding: Vec<(f64, Option<f64>)>,
}

impl FiliformReport {
    pub fn passes(&self) -> bool {
        self.central_residual < 1e-9 && self.scan.slopes_ok()
    }
}

/// Co-vectors of unit `N` whose top-stratum component carries `weight`.
pub fn top_heavy_covectors(n: usize, count: usize, seed: u64, weight: f64) -> Vec<Covector> {
    sample_unit_covectors(n, count, seed)
        .into_iter()
        .map(|c| {
            let mut v: Vec<f64> = c.0.iter().map(|x| (1.0 - weight) * x).collect();
            let sign = if c.0[n - 1] < 0.0 { -1.0 } else { 1.0 };
            v[n - 1] += weight * sign;
            let total: f64 = v.iter().map(|x| x.abs()).sum();
            Covector(v.into_iter().map(|x| x / total).collect())
        })
        .collect()
}

/// `K / 2π` for the winding family of [`example_filiform`].
pub const WINDING_FACTORS: [f64; 3] = [1.0, 4.0, 16.0];

/// Filiform group of step `s`: central-translation invariance of the normal
/// flow for `exp(m Y_s)`, `m ≤ m_max`, and a slope scan over co-vectors with
/// a dominant top-stratum component. In step 2 also the winding family
/// `Y_1* + K Y_2*`.
pub fn example_filiform(
    step: usize,
    m_max: u32,
    count: usize,
    seed: u64,
    horizon: f64,
    h: f64,
) -> Result<FiliformReport> {
    let group = CarnotGroup::new(StratifiedAlgebra::filiform(step)?);
    let n = group.dim();
    let norm = NormSpec::Euclidean;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probes = sample_unit_covectors(n, 3, seed ^ 0x5eed);
    let mut central = 0.0f64;
    for lam in &probes {
        let g0 = GroupElement((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
        for m in 1..=m_max {
            let mut c = vec![0.0; n];
            c[n - 1] = m as f64;
            let r = central_translation_residual(&group, &norm, lam, &g0, &GroupElement(c), horizon.min(5.0), h)?;
            central = central.max(r);
        }
    }
    let scan = run_escape(&group, &norm, &top_heavy_covectors(n, count, seed, 0.8), horizon, h)?;
    let mut winding = Vec::new();
    // For s > 2 the family only produces straight lines.
    for f in WINDING_FACTORS.into_iter().filter(|_| step == 2) {
        let k = 2.0 * PI * f;
        let mut v = vec![0.0; n];
        v[1] = 1.0;
        v[n - 1] = k;
        let run = run_escape(&group, &norm, &[Covector(v)], horizon * f, h / f)?;
        winding.push((k, run.runs[0].slope));
    }
    Ok(FiliformReport {
        step,
        m_max,
        central_residual: central,
        scan,
        winding,
    })
}
