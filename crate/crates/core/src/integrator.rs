//! Normal curves, the end-point map and the energy identity
//! `λ(dEnd_u u) = ‖u‖²_{L²}`.
//!
//! The state lives in exponential coordinates, a global chart, and every
//! curve solves `γ' = dL_γ u` with classical fourth-order Runge–Kutta.

use std::io::Write;

use crate::control::{ControlValue, NormSpec};
use crate::error::{check_dim, Error, Result};
use crate::group::{CarnotGroup, Covector, GroupElement};

/// A sampled normal curve together with its control.
#[derive(Debug, Clone)]
pub struct GeodesicTrace {
    pub algebra_name: String,
    pub norm: NormSpec,
    pub covector: Covector,
    pub initial: GroupElement,
    /// Uniform step actually used, `T / steps`.
    pub step: f64,
    pub times: Vec<f64>,
    pub points: Vec<GroupElement>,
    pub controls: Vec<ControlValue>,
    /// Per-step size of the difference between the RK4 update and its
    /// trapezoidal companion `(k1 + k4) / 2`; one entry per step.
    pub local_errors: Vec<f64>,
}

impl GeodesicTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn end(&self) -> &GroupElement {
        self.points.last().expect("a trace has at least one sample")
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("a trace has at least one sample")
    }

    /// `‖u‖²_{L²}` over the trace by the trapezoid rule.
    pub fn control_energy(&self) -> f64 {
        let sq: Vec<f64> = self
            .controls
            .iter()
            .map(|u| {
                let n = self.norm.norm(&u.0);
                n * n
            })
            .collect();
        trapezoid(&sq, self.step)
    }

    /// Speeds `‖u(t_k)‖` at every sample.
    pub fn speeds(&self) -> Vec<f64> {
        self.controls.iter().map(|u| self.norm.norm(&u.0)).collect()
    }

    /// CSV with header `t,g_1..g_n,u_1..u_m,quasinorm,speed`.
    pub fn write_csv<W: Write>(&self, group: &CarnotGroup, mut w: W) -> std::io::Result<()> {
        let n = group.dim();
        let m = group.algebra().rank();
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("g_{i}")));
        header.extend((1..=m).map(|i| format!("u_{i}")));
        header.push("quasinorm".into());
        header.push("speed".into());
        writeln!(w, "{}", header.join(","))?;
        for ((t, g), u) in self.times.iter().zip(&self.points).zip(&self.controls) {
            write!(w, "{t}")?;
            for c in &g.0 {
                write!(w, ",{c}")?;
            }
            for c in &u.0 {
                write!(w, ",{c}")?;
            }
            writeln!(w, ",{},{}", group.homogeneous_quasinorm(g), self.norm.norm(&u.0))?;
        }
        Ok(())
    }
}

fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        k => h * (values[1..k - 1].iter().sum::<f64>() + 0.5 * (values[0] + values[k - 1])),
    }
}

fn axpy(y: &[f64], a: f64, x: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(p, q)| p + a * q).collect()
}

/// Embeds a first-stratum vector into the full algebra.
fn horizontal(n: usize, u: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[..u.len()].copy_from_slice(u);
    v
}

/// One RK4 step for `γ' = dL_γ f(t, γ)`. Returns the new state and the
/// local error proxy.
fn rk4_step<F>(group: &CarnotGroup, g: &[f64], t: f64, h: f64, control: &F) -> (Vec<f64>, f64)
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let n = g.len();
    let field = |t: f64, x: &[f64]| group.left_jacobian_apply(x, &horizontal(n, &control(t, x)));
    let k1 = field(t, g);
    let k2 = field(t + 0.5 * h, &axpy(g, 0.5 * h, &k1));
    let k3 = field(t + 0.5 * h, &axpy(g, 0.5 * h, &k2));
    let k4 = field(t + h, &axpy(g, h, &k3));
    let mut next = g.to_vec();
    let mut err = 0.0f64;
    for i in 0..n {
        next[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        err = err.max((h / 3.0 * (k2[i] + k3[i] - k1[i] - k4[i])).abs());
    }
    (next, err)
}

fn step_count(horizon: f64, h: f64) -> Result<usize> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    if !(h > 0.0 && h <= horizon) {
        return Err(Error::InvalidInput(format!(
            "step must satisfy 0 < h <= T, got h = {h}, T = {horizon}"
        )));
    }
    Ok(((horizon / h).round() as usize).max(1))
}

/// Integrates the normal curve of `λ` from `g0` on `[0, T]`.
pub fn integrate_normal(
    group: &CarnotGroup,
    norm: &NormSpec,
    lambda: &Covector,
    g0: &GroupElement,
    horizon: f64,
    h: f64,
) -> Result<GeodesicTrace> {
    let n = group.dim();
    check_dim(n, lambda.dim())?;
    check_dim(n, g0.dim())?;
    if let NormSpec::Polyhedral(p) = norm {
        check_dim(group.algebra().rank(), p.dim())?;
    }
    let steps = step_count(horizon, h)?;
    let h = horizon / steps as f64;
    let control = |_t: f64, x: &[f64]| -> Vec<f64> {
        let mut eta = group.coadjoint_slices(x, &lambda.0);
        eta.truncate(group.algebra().rank());
        norm.select_control(&eta).0
    };

    let mut times = Vec::with_capacity(steps + 1);
    let mut points = Vec::with_capacity(steps + 1);
    let mut controls = Vec::with_capacity(steps + 1);
    let mut local_errors = Vec::with_capacity(steps);
    let mut g = g0.0.clone();
    times.push(0.0);
    controls.push(ControlValue(control(0.0, &g)));
    points.push(GroupElement(g.clone()));
    for k in 0..steps {
        let t = k as f64 * h;
        let (next, err) = rk4_step(group, &g, t, h, &control);
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::Integration { last_valid_time: t });
        }
        g = next;
        let t1 = (k + 1) as f64 * h;
        times.push(t1);
        controls.push(ControlValue(control(t1, &g)));
        points.push(GroupElement(g.clone()));
        local_errors.push(err);
    }
    Ok(GeodesicTrace {
        algebra_name: group.algebra().name().to_string(),
        norm: norm.clone(),
        covector: lambda.clone(),
        initial: g0.clone(),
        step: h,
        times,
        points,
        controls,
        local_errors,
    })
}

/// A control on `[0, 1]`, sampled on a uniform grid and linear in between.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal {
    values: Vec<ControlValue>,
}

impl ControlSignal {
    pub fn new(values: Vec<ControlValue>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidInput("a control signal needs at least 2 nodes".into()));
        }
        let m = values[0].dim();
        for v in &values {
            check_dim(m, v.dim())?;
        }
        Ok(Self { values })
    }

    /// Samples `f` at `nodes` uniformly spaced times in `[0, 1]`.
    pub fn from_fn(nodes: usize, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        if nodes < 2 {
            return Err(Error::InvalidInput("a control signal needs at least 2 nodes".into()));
        }
        let dt = 1.0 / (nodes - 1) as f64;
        Self::new((0..nodes).map(|k| ControlValue(f(k as f64 * dt))).collect())
    }

    pub fn zeros(nodes: usize, m: usize) -> Result<Self> {
        Self::from_fn(nodes, |_| vec![0.0; m])
    }

    pub fn nodes(&self) -> usize {
        self.values.len()
    }

    pub fn dim(&self) -> usize {
        self.values[0].dim()
    }

    pub fn values(&self) -> &[ControlValue] {
        &self.values
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.values.len() - 1) as f64
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        let last = self.values.len() - 1;
        let x = (t.clamp(0.0, 1.0)) * last as f64;
        let k = (x.floor() as usize).min(last - 1);
        let w = x - k as f64;
        self.values[k]
            .0
            .iter()
            .zip(&self.values[k + 1].0)
            .map(|(a, b)| (1.0 - w) * a + w * b)
            .collect()
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.combine(a, None, 0.0)
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: Option<&ControlSignal>, b: f64) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| {
                ControlValue(
                    v.0.iter()
                        .enumerate()
                        .map(|(i, x)| a * x + other.map_or(0.0, |o| b * o.values[k].0[i]))
                        .collect(),
                )
            })
            .collect();
        Self { values }
    }

    /// Euclidean `‖u‖_{L²}` of the piecewise-linear signal by the trapezoid rule.
    pub fn l2_norm(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| v.0.iter().map(|x| x * x).sum()).collect();
        trapezoid(&sq, self.spacing()).sqrt()
    }
}

/// `End(u) = γ_u(1)` from `g0`, one RK4 step per grid interval.
pub fn end_point(group: &CarnotGroup, u: &ControlSignal, g0: &GroupElement) -> Result<GroupElement> {
    end_point_with_substeps(group, u, g0, 1)
}

/// Like [`end_point`] with `substeps` RK4 steps per grid interval.
pub fn end_point_with_substeps(
    group: &CarnotGroup,
    u: &ControlSignal,
    g0: &GroupElement,
    substeps: usize,
) -> Result<GroupElement> {
    check_dim(group.dim(), g0.dim())?;
    check_dim(group.algebra().rank(), u.dim())?;
    let steps = (u.nodes() - 1) * substeps.max(1);
    let h = 1.0 / steps as f64;
    let control = |t: f64, _x: &[f64]| u.at(t);
    let mut g = g0.0.clone();
    for k in 0..steps {
        let t = k as f64 * h;
        let (next, _) = rk4_step(group, &g, t, h, &control);
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::Integration { last_valid_time: t });
        }
        g = next;
    }
    Ok(GroupElement(g))
}

/// `dEnd_u v` by central differences with `ε = 1e-5 (1 + ‖u‖_{L²})`.
pub fn end_point_directional(
    group: &CarnotGroup,
    u: &ControlSignal,
    v: &ControlSignal,
    g0: &GroupElement,
) -> Result<Vec<f64>> {
    if u.nodes() != v.nodes() {
        return Err(Error::InvalidInput(format!(
            "control grids differ: {} vs {} nodes",
            u.nodes(),
            v.nodes()
        )));
    }
    check_dim(u.dim(), v.dim())?;
    let eps = 1e-5 * (1.0 + u.l2_norm());
    let plus = end_point(group, &u.combine(1.0, Some(v), eps), g0)?;
    let minus = end_point(group, &u.combine(1.0, Some(v), -eps), g0)?;
    Ok(plus
        .0
        .iter()
        .zip(&minus.0)
        .map(|(p, m)| (p - m) / (2.0 * eps))
        .collect())
}

/// Relative residual of `λ(dEnd_u u) = ‖u‖²_{L²}` along a trace.
///
/// The trace on `[0, T]` is rescaled to `[0, 1]`, which multiplies the
/// co-vector by `T`, so the identity reads `λ(Vec δ(γ̃(T))) = ∫_0^T ‖u‖²`
/// where `γ̃ = g0^{-1} γ` starts at the identity and carries the co-vector
/// `λ ∘ Ad_{g0}`.
pub fn pmp_identity_residual(
    group: &CarnotGroup,
    norm: &NormSpec,
    lambda: &Covector,
    trace: &GeodesicTrace,
) -> Result<f64> {
    check_dim(group.dim(), lambda.dim())?;
    if trace.covector != *lambda {
        return Err(Error::InvalidInput(
            "trace was integrated with a different co-vector".into(),
        ));
    }
    if trace.norm != *norm {
        return Err(Error::InvalidInput("trace was integrated with a different norm".into()));
    }
    if trace.algebra_name != group.algebra().name() {
        return Err(Error::InvalidInput("trace belongs to a different group".into()));
    }
    let g0 = &trace.initial;
    let relative_end = group.multiply(&g0.inverse(), trace.end())?;
    let shifted = group.coadjoint(g0, lambda)?;
    let lhs = group.covector_on_dilation_field(&shifted, &relative_end)?;
    let energy = trace.control_energy();
    Ok((lhs - energy).abs() / energy.max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::StratifiedAlgebra;
    use std::f64::consts::PI;

    fn heis() -> CarnotGroup {
        CarnotGroup::new(StratifiedAlgebra::heisenberg())
    }

    #[test]
    fn zero_covector_gives_constant_trace() {
        let g = heis();
        let g0 = GroupElement(vec![0.5, -1.0, 2.0]);
        let tr = integrate_normal(&g, &NormSpec::Euclidean, &Covector::zeros(3), &g0, 3.0, 0.1).unwrap();
        assert_eq!(tr.len(), 31);
        assert!(tr.points.iter().all(|p| *p == g0));
        assert_eq!(
            pmp_identity_residual(&g, &NormSpec::Euclidean, &Covector::zeros(3), &tr).unwrap(),
            0.0
        );
    }

    #[test]
    fn heisenberg_circle_endpoint() {
        let g = heis();
        for n in [1.0, 2.0, 5.0] {
            let lam = Covector(vec![0.0, 1.0, 2.0 * PI * n]);
            let tr = integrate_normal(&g, &NormSpec::Euclidean, &lam, &g.identity(), 1.0, 1e-4).unwrap();
            let end = tr.end();
            assert!(end.0[0].abs() < 1e-8 && end.0[1].abs() < 1e-8);
            assert!((end.0[2] - 1.0 / (4.0 * PI * n)).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let g = heis();
        let lam = Covector(vec![1.0, 0.0, 0.0]);
        let e = g.identity();
        assert!(integrate_normal(&g, &NormSpec::Euclidean, &lam, &e, 0.0, 0.1).is_err());
        assert!(integrate_normal(&g, &NormSpec::Euclidean, &lam, &e, 1.0, 2.0).is_err());
        assert!(integrate_normal(&g, &NormSpec::Euclidean, &lam, &e, 1.0, -0.1).is_err());
        assert!(integrate_normal(&g, &NormSpec::Euclidean, &Covector(vec![1.0]), &e, 1.0, 0.1).is_err());
        assert!(ControlSignal::new(vec![ControlValue(vec![0.0, 0.0])]).is_err());
    }

    #[test]
    fn overflow_is_reported() {
        // A huge co-vector drives the speed, and with it the state, past f64 range.
        let g = CarnotGroup::new(StratifiedAlgebra::filiform(4).unwrap());
        let lam = Covector(vec![1e200, 1e200, 0.0, 0.0, 1e200]);
        let err = integrate_normal(&g, &NormSpec::Euclidean, &lam, &g.identity(), 10.0, 0.5).unwrap_err();
        assert!(matches!(err, Error::Integration { .. }));
    }

    #[test]
    fn mismatched_trace_is_rejected() {
        let g = heis();
        let lam = Covector(vec![0.0, 1.0, 1.0]);
        let tr = integrate_normal(&g, &NormSpec::Euclidean, &lam, &g.identity(), 1.0, 0.01).unwrap();
        let other = Covector(vec![0.0, 1.0, 2.0]);
        assert!(pmp_identity_residual(&g, &NormSpec::Euclidean, &other, &tr).is_err());
        assert!(pmp_identity_residual(&g, &NormSpec::L1, &lam, &tr).is_err());
    }

    #[test]
    fn zero_control_end_point() {
        let g = heis();
        let g0 = GroupElement(vec![0.1, 0.2, 0.3]);
        let u = ControlSignal::zeros(11, 2).unwrap();
        assert_eq!(end_point(&g, &u, &g0).unwrap(), g0);
        let d = end_point_directional(&g, &u, &u, &g0).unwrap();
        assert!(d.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn signal_interpolation() {
        let s = ControlSignal::from_fn(3, |t| vec![t, 1.0 - t]).unwrap();
        assert_eq!(s.at(0.25), vec![0.25, 0.75]);
        assert_eq!(s.at(1.0), vec![1.0, 0.0]);
        assert!((s.l2_norm() - 0.75f64.sqrt()).abs() < 1e-15);
    }
}
