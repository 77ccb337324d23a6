//! Two-way state exchange between the registers.
//!
//! Register A starts in `⊗_ν|ψ_ν⟩` and register B in `⊗_ν|φ_ν⟩`. A perfect
//! exchange ends in `|Φ_T⟩`, with A holding the φ's and B the ψ's. The
//! crosstalk reference `|Φ_C⟩` delivers every state to the mirror pair
//! instead: `A_ν` holds `φ_{M+1−ν}` and `B_ν` holds `ψ_{M+1−ν}`.
//!
//! Overlaps are compared in magnitude only; gate phases are not undone.

use serde::{Deserialize, Serialize};

use crate::dynamics::Propagator;
use crate::system::{encode_product_state, qubit, RegisterState, SectorState, SystemLayout};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoWayScenario {
    /// Inputs on `A_1 … A_M`.
    pub psi: Vec<[C64; 2]>,
    /// Inputs on `B_1 … B_M`.
    pub phi: Vec<[C64; 2]>,
}

impl TwoWayScenario {
    pub fn new(psi: Vec<[C64; 2]>, phi: Vec<[C64; 2]>) -> Result<Self> {
        let s = Self { psi, phi };
        s.validate()?;
        Ok(s)
    }

    /// `ψ = (|+⟩, |0⟩)`, `φ = (|0⟩, |1⟩)`.
    pub fn standard() -> Self {
        Self {
            psi: vec![qubit::PLUS, qubit::ZERO],
            phi: vec![qubit::ZERO, qubit::ONE],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.psi.len() != self.phi.len() || self.psi.is_empty() {
            return Err(Error::domain("scenario needs one ψ and one φ per pair"));
        }
        RegisterState::new(self.psi.clone(), self.phi.clone()).map(|_| ())
    }

    pub fn initial(&self, layout: &SystemLayout) -> Result<SectorState> {
        self.encode(layout, self.psi.clone(), self.phi.clone())
    }

    pub fn transmission_target(&self, layout: &SystemLayout) -> Result<SectorState> {
        self.encode(layout, self.phi.clone(), self.psi.clone())
    }

    pub fn crosstalk_target(&self, layout: &SystemLayout) -> Result<SectorState> {
        let mut a = self.phi.clone();
        let mut b = self.psi.clone();
        a.reverse();
        b.reverse();
        self.encode(layout, a, b)
    }

    fn encode(&self, layout: &SystemLayout, a: Vec<[C64; 2]>, b: Vec<[C64; 2]>) -> Result<SectorState> {
        self.validate()?;
        encode_product_state(layout, &RegisterState::new(a, b)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoWayPoint {
    pub time: f64,
    pub transmission: f64,
    pub crosstalk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoWaySeries {
    pub points: Vec<TwoWayPoint>,
    /// First point of maximal transmission.
    pub peak: TwoWayPoint,
}

/// `|⟨Φ_T|e^{−iHt}|Ψ₀⟩|²` and `|⟨Φ_C|e^{−iHt}|Ψ₀⟩|²` over an ascending grid.
pub fn transmission_and_crosstalk(
    layout: &SystemLayout,
    prop: &Propagator,
    scenario: &TwoWayScenario,
    times: &[f64],
) -> Result<TwoWaySeries> {
    if times.is_empty() {
        return Err(Error::domain("empty time grid"));
    }
    let start = scenario.initial(layout)?;
    let target = scenario.transmission_target(layout)?;
    let cross = scenario.crosstalk_target(layout)?;
    let mut points = Vec::with_capacity(times.len());
    prop.for_each_time(std::slice::from_ref(&start), times, |ti, s| {
        points.push(TwoWayPoint {
            time: times[ti],
            transmission: target.inner(&s[0]).norm_sqr(),
            crosstalk: cross.inner(&s[0]).norm_sqr(),
        });
        Ok(())
    })?;
    let peak = points
        .iter()
        .copied()
        .fold(None, |best: Option<TwoWayPoint>, p| match best {
            Some(b) if b.transmission >= p.transmission => Some(b),
            _ => Some(p),
        })
        .expect("non-empty grid");
    Ok(TwoWaySeries { points, peak })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{prepare_propagator, Method};
    use crate::hamiltonian::{build_hamiltonian, register_sectors, HamiltonianParams};
    use crate::system::build_layout;

    fn setup() -> (SystemLayout, Propagator) {
        let l = build_layout(4, 2).unwrap();
        let p = HamiltonianParams::new(1.0, 0.3, 0.0, vec![0.2, -0.14]).unwrap();
        let prop = prepare_propagator(build_hamiltonian(&l, &p, &register_sectors(&l)).unwrap(), Method::Auto).unwrap();
        (l, prop)
    }

    #[test]
    fn standard_targets_are_orthogonal() {
        let l = build_layout(4, 2).unwrap();
        let s = TwoWayScenario::standard();
        let t = s.transmission_target(&l).unwrap();
        let c = s.crosstalk_target(&l).unwrap();
        assert!(t.inner(&c).norm() < 1e-15);
        assert!(s.initial(&l).unwrap().inner(&t).norm() < 1e-15);
    }

    #[test]
    fn static_overlap_at_zero_time() {
        let (l, prop) = setup();
        let r = transmission_and_crosstalk(&l, &prop, &TwoWayScenario::standard(), &[0.0]).unwrap();
        assert!(r.points[0].transmission < 1e-15);
    }

    #[test]
    fn bounded_by_one() {
        let (l, prop) = setup();
        let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.5).collect();
        let r = transmission_and_crosstalk(&l, &prop, &TwoWayScenario::standard(), &times).unwrap();
        for p in &r.points {
            assert!(p.transmission + p.crosstalk <= 1.0 + 1e-10);
        }
        assert!(r.points.iter().all(|p| p.transmission <= r.peak.transmission));
    }

    #[test]
    fn identical_inputs_make_curves_coincide() {
        let (l, prop) = setup();
        let s = TwoWayScenario::new(vec![qubit::PLUS; 2], vec![qubit::PLUS; 2]).unwrap();
        let times: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let r = transmission_and_crosstalk(&l, &prop, &s, &times).unwrap();
        for p in &r.points {
            assert!((p.transmission - p.crosstalk).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_mismatched_inputs() {
        assert!(TwoWayScenario::new(vec![qubit::PLUS], vec![]).is_err());
    }
}
