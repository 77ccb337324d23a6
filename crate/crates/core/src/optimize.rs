//! Grid search over the Hamiltonian parameters and the gate duration.
//!
//! Strategy S1 tunes the end coupling `J0` with `h0 = 0`; strategy S2 tunes
//! the end field `h0` with `J0 = J`. Both tune the register fields `h_ν`,
//! whose magnitudes are searched with the sign `(−1)^{ν+1}`. For every grid
//! point the duration is scanned over a τ grid using one cached propagator.
//!
//! Grid points are evaluated in parallel and reduced in grid order: a point
//! replaces the incumbent only if it is strictly better, so the first of
//! equal maxima wins and the result does not depend on the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{prepare_propagator, Method};
use crate::gates::{score_transfer, transfer_series, SpectatorPolicy, TargetConvention};
use crate::hamiltonian::{build_hamiltonian, HamiltonianParams};
use crate::system::SystemLayout;
use crate::{Error, Result};

/// Inclusive arithmetic range `start, start + step, …, end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl Range {
    pub fn new(start: f64, end: f64, step: f64) -> Result<Self> {
        let r = Self { start, end, step };
        r.validate()?;
        Ok(r)
    }

    pub fn single(x: f64) -> Self {
        Self {
            start: x,
            end: x,
            step: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.end.is_finite() && self.step.is_finite()) {
            return Err(Error::domain("range bounds must be finite"));
        }
        if self.end < self.start {
            return Err(Error::domain(format!("empty range [{}, {}]", self.start, self.end)));
        }
        if !(self.step > 0.0) {
            return Err(Error::domain(format!("range step must be > 0, got {}", self.step)));
        }
        Ok(())
    }

    /// Grid values; points are `start + i·step` so rounding does not
    /// accumulate, and the last point is snapped to `end` when it falls
    /// within a thousandth of a step.
    pub fn values(&self) -> Vec<f64> {
        let span = (self.end - self.start) / self.step;
        let n = (span + 1e-3).floor() as usize;
        let mut v: Vec<f64> = (0..=n).map(|i| self.start + i as f64 * self.step).collect();
        if let Some(last) = v.last_mut() {
            if (*last - self.end).abs() < 1e-3 * self.step {
                *last = self.end;
            }
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    S1,
    S2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySpec {
    pub kind: Strategy,
    /// `J0/J` grid (S1).
    #[serde(default = "default_j0")]
    pub j0: Range,
    /// `h0/J` grid (S2).
    #[serde(default = "default_h0")]
    pub h0: Range,
    /// Magnitude grid for every `h_ν/J`; pair ν uses sign `(−1)^{ν+1}`.
    #[serde(default = "default_fields")]
    pub fields: Range,
    /// Per-pair magnitude grids overriding `fields`.
    #[serde(default)]
    pub field_ranges: Option<Vec<Range>>,
    /// Gate-duration grid `Jτ`.
    #[serde(default = "default_tau")]
    pub tau: Range,
    /// Chain coupling; all other quantities are in its units.
    #[serde(default = "one")]
    pub j: f64,
    #[serde(default)]
    pub policy: SpectatorPolicy,
    #[serde(default)]
    pub convention: TargetConvention,
    #[serde(default)]
    pub method: Method,
    /// Halve every step twice around the coarse optimum.
    #[serde(default)]
    pub refine: bool,
}

fn default_j0() -> Range {
    Range {
        start: 0.01,
        end: 1.0,
        step: 0.01,
    }
}

fn default_h0() -> Range {
    Range {
        start: 20.0,
        end: 40.0,
        step: 1.0,
    }
}

fn default_fields() -> Range {
    Range {
        start: 0.0,
        end: 1.5,
        step: 0.05,
    }
}

fn default_tau() -> Range {
    Range {
        start: 1.0,
        end: 500.0,
        step: 0.25,
    }
}

fn one() -> f64 {
    1.0
}

impl StrategySpec {
    pub fn new(kind: Strategy) -> Self {
        Self {
            kind,
            j0: default_j0(),
            h0: default_h0(),
            fields: default_fields(),
            field_ranges: None,
            tau: default_tau(),
            j: 1.0,
            policy: SpectatorPolicy::default(),
            convention: TargetConvention::default(),
            method: Method::default(),
            refine: false,
        }
    }

    pub fn validate(&self, layout: &SystemLayout) -> Result<()> {
        self.j0.validate()?;
        self.h0.validate()?;
        self.fields.validate()?;
        self.tau.validate()?;
        if self.tau.start < 0.0 {
            return Err(Error::domain("gate durations must be ≥ 0"));
        }
        if let Some(r) = &self.field_ranges {
            if r.len() != layout.pair_count() {
                return Err(Error::domain(format!(
                    "{} field ranges for {} pairs",
                    r.len(),
                    layout.pair_count()
                )));
            }
            r.iter().try_for_each(|x| x.validate())?;
        }
        if !(self.j.is_finite() && self.j > 0.0) {
            return Err(Error::domain("chain coupling must be > 0"));
        }
        Ok(())
    }

    fn field_range(&self, nu: usize) -> Range {
        self.field_ranges.as_ref().map_or(self.fields, |r| r[nu - 1])
    }

    /// Axis grids: the strategy parameter first, then `h_1 … h_M`
    /// (signed).
    pub fn axes(&self, layout: &SystemLayout) -> Vec<Vec<f64>> {
        let mut axes = vec![match self.kind {
            Strategy::S1 => self.j0.values(),
            Strategy::S2 => self.h0.values(),
        }];
        for nu in 1..=layout.pair_count() {
            let sign = if nu % 2 == 1 { 1.0 } else { -1.0 };
            axes.push(self.field_range(nu).values().into_iter().map(|x| sign * x).collect());
        }
        axes
    }

    /// Hamiltonian for one grid point `[strategy parameter, h_1 … h_M]`.
    pub fn params(&self, point: &[f64]) -> Result<HamiltonianParams> {
        let h = point[1..].to_vec();
        match self.kind {
            Strategy::S1 => HamiltonianParams::new(self.j, point[0], 0.0, h),
            Strategy::S2 => HamiltonianParams::new(self.j, self.j, point[0], h),
        }
    }
}

/// Best duration and fidelity at one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub params: HamiltonianParams,
    pub tau: f64,
    pub fidelity: f64,
    pub per_pair: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub strategy: Strategy,
    pub best: PointRecord,
    /// One record per evaluated grid point, in grid order.
    pub landscape: Vec<PointRecord>,
    /// Grid points whose evaluation failed, with the reason.
    pub failures: Vec<(Vec<f64>, String)>,
}

/// Maximizes the mean fidelity over `times` for fixed parameters, reusing
/// one propagator for the whole grid.
pub fn evaluate_point(
    layout: &SystemLayout,
    params: &HamiltonianParams,
    times: &[f64],
    policy: &SpectatorPolicy,
    convention: TargetConvention,
    method: Method,
) -> Result<PointRecord> {
    if times.is_empty() {
        return Err(Error::domain("empty time grid"));
    }
    let sectors = policy_sectors(layout, policy);
    let prop = prepare_propagator(build_hamiltonian(layout, params, &sectors)?, method)?;
    let n = layout.chain_length();
    let mut best: Option<(usize, f64, Vec<f64>)> = None;
    transfer_series(layout, &prop, policy, times, |ti, ts| {
        let per_pair = ts
            .iter()
            .map(|t| score_transfer(t, convention, n))
            .collect::<Result<Vec<_>>>()?;
        let mean = per_pair.iter().sum::<f64>() / per_pair.len() as f64;
        if best.as_ref().is_none_or(|b| mean > b.1) {
            best = Some((ti, mean, per_pair));
        }
        Ok(())
    })?;
    let (ti, fidelity, per_pair) = best.expect("non-empty grid");
    Ok(PointRecord {
        params: params.clone(),
        tau: times[ti],
        fidelity,
        per_pair,
    })
}

/// Sectors the pair initial states can populate under a spectator policy.
pub fn policy_sectors(layout: &SystemLayout, policy: &SpectatorPolicy) -> Vec<usize> {
    let top = match policy {
        SpectatorPolicy::Zero => 2,
        _ => 2 * layout.pair_count(),
    };
    (0..=top).collect()
}

fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut points = vec![Vec::new()];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    points
}

fn search(
    layout: &SystemLayout,
    spec: &StrategySpec,
    points: &[Vec<f64>],
    times: &[f64],
) -> Vec<std::result::Result<PointRecord, String>> {
    points
        .par_iter()
        .map(|p| {
            spec.params(p)
                .and_then(|params| evaluate_point(layout, &params, times, &spec.policy, spec.convention, spec.method))
                .map_err(|e| e.to_string())
        })
        .collect()
}

fn reduce(
    points: Vec<Vec<f64>>,
    results: Vec<std::result::Result<PointRecord, String>>,
    best: &mut Option<PointRecord>,
    landscape: &mut Vec<PointRecord>,
    failures: &mut Vec<(Vec<f64>, String)>,
) {
    for (p, r) in points.into_iter().zip(results) {
        match r {
            Ok(rec) => {
                if best.as_ref().is_none_or(|b| rec.fidelity > b.fidelity) {
                    *best = Some(rec.clone());
                }
                landscape.push(rec);
            }
            Err(e) => failures.push((p, e)),
        }
    }
}

/// Exhaustive search over the strategy grid.
pub fn optimize(layout: &SystemLayout, spec: &StrategySpec) -> Result<OptimizationResult> {
    spec.validate(layout)?;
    let times = spec.tau.values();
    let axes = spec.axes(layout);
    let points = cartesian(&axes);
    let results = search(layout, spec, &points, &times);
    let mut best = None;
    let mut landscape = Vec::with_capacity(points.len());
    let mut failures = Vec::new();
    reduce(points, results, &mut best, &mut landscape, &mut failures);
    let mut best = best.ok_or_else(|| {
        Error::numerical(
            "optimize",
            format!("every grid point failed; first: {}", failures.first().map_or("", |f| f.1.as_str())),
        )
    })?;

    if spec.refine {
        let mut steps: Vec<f64> = axes.iter().map(|a| grid_step(a)).collect();
        let mut tau_step = spec.tau.step;
        let bounds: Vec<(f64, f64)> = axes
            .iter()
            .map(|a| {
                let lo = a.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            })
            .collect();
        for _ in 0..2 {
            steps.iter_mut().for_each(|s| *s /= 2.0);
            tau_step /= 2.0;
            let centre = point_of(spec, &best.params);
            let local: Vec<Vec<f64>> = centre
                .iter()
                .zip(&steps)
                .zip(&bounds)
                .map(|((&c, &s), &(lo, hi))| {
                    [c - s, c, c + s]
                        .into_iter()
                        .filter(|x| *x >= lo - 1e-12 && *x <= hi + 1e-12)
                        .collect()
                })
                .collect();
            let lo = (best.tau - 2.0 * tau_step).max(spec.tau.start);
            let hi = (best.tau + 2.0 * tau_step).min(spec.tau.end);
            let mut local_times = Range::new(lo, hi, tau_step)?.values();
            if !local_times.iter().any(|t| *t == best.tau) {
                local_times.push(best.tau);
                local_times.sort_by(f64::total_cmp);
            }
            let pts = cartesian(&local);
            let res = search(layout, spec, &pts, &local_times);
            let mut cand = Some(best.clone());
            reduce(pts, res, &mut cand, &mut landscape, &mut failures);
            best = cand.expect("incumbent kept");
        }
    }

    Ok(OptimizationResult {
        strategy: spec.kind,
        best,
        landscape,
        failures,
    })
}

fn grid_step(axis: &[f64]) -> f64 {
    if axis.len() < 2 {
        0.0
    } else {
        (axis[1] - axis[0]).abs()
    }
}

fn point_of(spec: &StrategySpec, p: &HamiltonianParams) -> Vec<f64> {
    let mut v = vec![match spec.kind {
        Strategy::S1 => p.j0,
        Strategy::S2 => p.h0,
    }];
    v.extend(&p.h);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::build_layout;

    #[test]
    fn range_values() {
        assert_eq!(Range::new(0.0, 1.0, 0.25).unwrap().values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let v = Range::new(0.01, 1.0, 0.01).unwrap().values();
        assert_eq!(v.len(), 100);
        assert_eq!(*v.last().unwrap(), 1.0);
        assert_eq!(Range::single(3.0).values(), vec![3.0]);
        assert!(Range::new(1.0, 0.0, 0.1).is_err());
        assert!(Range::new(0.0, 1.0, 0.0).is_err());
        assert_eq!(default_tau().values().len(), 1997);
    }

    #[test]
    fn axes_alternate_sign() {
        let l = build_layout(4, 3).unwrap();
        let mut s = StrategySpec::new(Strategy::S1);
        s.fields = Range::new(0.0, 0.1, 0.05).unwrap();
        let axes = s.axes(&l);
        assert_eq!(axes[0].len(), 100);
        assert_eq!(axes[1], vec![0.0, 0.05, 0.1]);
        assert_eq!(axes[2], vec![-0.0, -0.05, -0.1]);
        assert_eq!(axes[3], vec![0.0, 0.05, 0.1]);
        let p = s.params(&[0.04, 0.1, -0.2, 0.3]).unwrap();
        assert_eq!((p.j0, p.h0), (0.04, 0.0));
        let mut s2 = StrategySpec::new(Strategy::S2);
        s2.j = 1.0;
        let p = s2.params(&[25.0, 0.1, -0.2, 0.3]).unwrap();
        assert_eq!((p.j0, p.h0), (1.0, 25.0));
    }

    fn tiny_spec() -> StrategySpec {
        let mut s = StrategySpec::new(Strategy::S1);
        s.j0 = Range::new(0.3, 0.5, 0.1).unwrap();
        s.fields = Range::new(0.0, 0.2, 0.1).unwrap();
        s.tau = Range::new(1.0, 30.0, 0.5).unwrap();
        s
    }

    #[test]
    fn single_point_grid() {
        let l = build_layout(2, 1).unwrap();
        let mut s = tiny_spec();
        s.j0 = Range::single(0.4);
        s.fields = Range::single(0.1);
        let r = optimize(&l, &s).unwrap();
        assert_eq!(r.landscape.len(), 1);
        let direct = evaluate_point(&l, &r.best.params, &s.tau.values(), &s.policy, s.convention, s.method).unwrap();
        assert_eq!(direct, r.best);
    }

    #[test]
    fn worker_count_does_not_change_result() {
        let l = build_layout(3, 2).unwrap();
        let s = tiny_spec();
        let run = |n| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .unwrap()
                .install(|| optimize(&l, &s).unwrap())
        };
        let a = run(1);
        let b = run(3);
        assert_eq!(a, b);
        assert_eq!(a.landscape.len(), 27);
        assert!(a.landscape.iter().all(|r| r.fidelity <= a.best.fidelity));
    }

    #[test]
    fn refinement_never_loses() {
        let l = build_layout(2, 1).unwrap();
        let mut s = tiny_spec();
        let coarse = optimize(&l, &s).unwrap();
        s.refine = true;
        let fine = optimize(&l, &s).unwrap();
        assert!(fine.best.fidelity >= coarse.best.fidelity);
    }

    #[test]
    fn decoupled_registers_are_flat() {
        let l = build_layout(3, 1).unwrap();
        let p = HamiltonianParams::new(1.0, 0.0, 0.0, vec![0.0]).unwrap();
        let times = Range::new(1.0, 20.0, 1.0).unwrap().values();
        let r = evaluate_point(&l, &p, &times, &SpectatorPolicy::Plus, TargetConvention::Ideal, Method::Auto).unwrap();
        // The identity channel against a swap target.
        let id = crate::gates::PairChannel::identity(1);
        let want = crate::gates::transfer_fidelity(&id.transfer(), &crate::gates::ideal_phases(3)).unwrap();
        assert_eq!(r.tau, 1.0);
        assert!((r.fidelity - want).abs() < 1e-12);
        assert!(r.fidelity < 0.5);
    }
}
