//! Two-surface vibronic wavefunctions and their elementary algebra.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Below this population per-surface means are reported as undefined.
pub const EMPTY_SURFACE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Position,
    Momentum,
}

/// Amplitudes on the ground (`G`) and excited (`E`) electronic surfaces,
/// sharing one grid and one representation.
#[derive(Debug, Clone, PartialEq)]
pub struct VibronicState {
    grid: Grid,
    amp_g: Vec<Complex64>,
    amp_e: Vec<Complex64>,
    rep: Representation,
}

/// Harmonic ground-state packet displaced to `(x0, p0)`; the width is fixed
/// by the mass and the frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSpec {
    pub x0: f64,
    pub p0: f64,
}

/// Per-surface populations and population-normalized means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectations {
    pub pop_g: f64,
    pub pop_e: f64,
    pub x_g: Option<f64>,
    pub p_g: Option<f64>,
    pub x_e: Option<f64>,
    pub p_e: Option<f64>,
}

impl VibronicState {
    pub fn new(
        grid: Grid,
        amp_g: Vec<Complex64>,
        amp_e: Vec<Complex64>,
        rep: Representation,
    ) -> Result<Self> {
        for len in [amp_g.len(), amp_e.len()] {
            if len != grid.n() {
                return Err(Error::Length { expected: grid.n(), found: len });
            }
        }
        Ok(Self { grid, amp_g, amp_e, rep })
    }

    pub fn zeros(grid: &Grid, rep: Representation) -> Self {
        let n = grid.n();
        Self { grid: grid.clone(), amp_g: vec![Complex64::default(); n], amp_e: vec![Complex64::default(); n], rep }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn representation(&self) -> Representation {
        self.rep
    }

    pub fn ground(&self) -> &[Complex64] {
        &self.amp_g
    }

    pub fn excited(&self) -> &[Complex64] {
        &self.amp_e
    }

    pub fn ground_mut(&mut self) -> &mut [Complex64] {
        &mut self.amp_g
    }

    pub fn excited_mut(&mut self) -> &mut [Complex64] {
        &mut self.amp_e
    }

    pub fn surfaces_mut(&mut self) -> (&mut [Complex64], &mut [Complex64]) {
        (&mut self.amp_g, &mut self.amp_e)
    }

    pub fn into_parts(self) -> (Vec<Complex64>, Vec<Complex64>) {
        (self.amp_g, self.amp_e)
    }

    /// Quadrature weight of the current representation.
    pub fn weight(&self) -> f64 {
        match self.rep {
            Representation::Position => self.grid.dx(),
            Representation::Momentum => self.grid.dp(),
        }
    }

    pub fn populations(&self) -> (f64, f64) {
        let w = self.weight();
        (sum_sqr(&self.amp_g) * w, sum_sqr(&self.amp_e) * w)
    }

    pub fn norm_sqr(&self) -> f64 {
        let (g, e) = self.populations();
        g + e
    }

    /// Transform in place; a no-op when already in `target`.
    pub fn transform_to(&mut self, target: Representation) {
        if self.rep == target {
            return;
        }
        match target {
            Representation::Momentum => {
                self.grid.forward(&mut self.amp_g);
                self.grid.forward(&mut self.amp_e);
            }
            Representation::Position => {
                self.grid.inverse(&mut self.amp_g);
                self.grid.inverse(&mut self.amp_e);
            }
        }
        self.rep = target;
    }

    pub fn to_representation(&self, target: Representation) -> Self {
        let mut out = self.clone();
        out.transform_to(target);
        out
    }

    pub fn require(&self, rep: Representation) -> Result<()> {
        if self.rep == rep {
            Ok(())
        } else {
            Err(Error::Representation { expected: rep, found: self.rep })
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if !self.grid.same_lattice(&other.grid) {
            return Err(Error::GridMismatch);
        }
        other.require(self.rep)
    }

    /// `<self|other>` summed over both surfaces.
    pub fn overlap(&self, other: &Self) -> Result<Complex64> {
        self.check_compatible(other)?;
        let s = dot(&self.amp_g, &other.amp_g) + dot(&self.amp_e, &other.amp_e);
        Ok(s * self.weight())
    }

    /// Largest per-node amplitude difference on either surface.
    pub fn max_deviation(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        let dev = |a: &[Complex64], b: &[Complex64]| {
            a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0_f64, f64::max)
        };
        Ok(dev(&self.amp_g, &other.amp_g).max(dev(&self.amp_e, &other.amp_e)))
    }

    /// L2 distance `||self - other||`.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        let d = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>();
        Ok(((d(&self.amp_g, &other.amp_g) + d(&self.amp_e, &other.amp_e)) * self.weight()).sqrt())
    }

    pub fn expectations(&self) -> Expectations {
        let (pos, mom) = match self.rep {
            Representation::Position => (std::borrow::Cow::Borrowed(self), self.to_representation(Representation::Momentum)),
            Representation::Momentum => (std::borrow::Cow::Owned(self.to_representation(Representation::Position)), self.clone()),
        };
        let g = &self.grid;
        let (pop_g, pop_e) = pos.populations();
        let mean = |amp: &[Complex64], weight: f64, pop: f64, coord: &dyn Fn(usize) -> f64| {
            (pop >= EMPTY_SURFACE).then(|| {
                amp.iter().enumerate().map(|(j, z)| coord(j) * z.norm_sqr()).sum::<f64>() * weight / pop
            })
        };
        let xs = |j: usize| g.x(j);
        let ps = |k: usize| g.p(k);
        Expectations {
            pop_g,
            pop_e,
            x_g: mean(&pos.amp_g, g.dx(), pop_g, &xs),
            p_g: mean(&mom.amp_g, g.dp(), pop_g, &ps),
            x_e: mean(&pos.amp_e, g.dx(), pop_e, &xs),
            p_e: mean(&mom.amp_e, g.dp(), pop_e, &ps),
        }
    }

    /// Probability held in the outermost `n/64` position nodes on each side.
    pub fn edge_mass(&self) -> f64 {
        let pos = match self.rep {
            Representation::Position => std::borrow::Cow::Borrowed(self),
            Representation::Momentum => std::borrow::Cow::Owned(self.to_representation(Representation::Position)),
        };
        let n = self.grid.n();
        let band = (n / 64).max(1);
        let edge = |amp: &[Complex64]| sum_sqr(&amp[..band]) + sum_sqr(&amp[n - band..]);
        (edge(&pos.amp_g) + edge(&pos.amp_e)) * self.grid.dx()
    }
}

fn sum_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `sum conj(a) * b`.
pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Position width of the harmonic ground state, `sqrt(1/(2 m w))`.
pub fn sigma_x(mass: f64, omega: f64) -> f64 {
    (0.5 / (mass * omega)).sqrt()
}

/// Momentum width of the harmonic ground state, `sqrt(m w / 2)`.
pub fn sigma_p(mass: f64, omega: f64) -> f64 {
    (0.5 * mass * omega).sqrt()
}

/// Checks that a ground-state packet of the given mass and frequency is
/// resolved by `grid` when centered at `x0`.
pub fn check_resolution(grid: &Grid, mass: f64, omega: f64, x0: f64) -> Result<()> {
    if !(mass > 0.0 && omega > 0.0 && mass.is_finite() && omega.is_finite()) {
        return Err(Error::Params(format!("mass and frequency must be positive, got m={mass}, omega={omega}")));
    }
    let sx = sigma_x(mass, omega);
    if grid.dx() > 0.25 * sx {
        return Err(Error::UnderResolved(format!("dx = {} exceeds sigma_x/4 = {}", grid.dx(), 0.25 * sx)));
    }
    if grid.extent() < 12.0 * sx {
        return Err(Error::UnderResolved(format!("extent {} below 12 sigma_x = {}", grid.extent(), 12.0 * sx)));
    }
    if x0.abs() + 6.0 * sx > 0.5 * grid.extent() {
        return Err(Error::UnderResolved(format!("packet at x0 = {x0} reaches the grid edge")));
    }
    Ok(())
}

/// Harmonic ground state of `(mass, omega)` displaced to `(x0, p0)`, placed on
/// the ground surface in position representation.
pub fn ground_gaussian(grid: &Grid, mass: f64, omega: f64, x0: f64, p0: f64) -> Result<VibronicState> {
    check_resolution(grid, mass, omega, x0)?;
    let sp = sigma_p(mass, omega);
    if p0.abs() + 6.0 * sp > grid.p_max() {
        return Err(Error::UnderResolved(format!("momentum {p0} not representable, p_max = {}", grid.p_max())));
    }
    let amp_g = gaussian_amplitudes(grid, mass, omega, GaussianSpec { x0, p0 });
    Ok(VibronicState {
        grid: grid.clone(),
        amp_g,
        amp_e: vec![Complex64::default(); grid.n()],
        rep: Representation::Position,
    })
}

pub(crate) fn gaussian_amplitudes(grid: &Grid, mass: f64, omega: f64, spec: GaussianSpec) -> Vec<Complex64> {
    let a = mass * omega;
    let norm = (a / PI).powf(0.25);
    grid.positions()
        .map(|x| {
            let d = x - spec.x0;
            Complex64::from_polar(norm * (-0.5 * a * d * d).exp(), spec.p0 * x)
        })
        .collect()
}

pub fn change_representation(state: &VibronicState, target: Representation) -> VibronicState {
    state.to_representation(target)
}

pub fn overlap(a: &VibronicState, b: &VibronicState) -> Result<Complex64> {
    a.overlap(b)
}

pub fn expectations(state: &VibronicState) -> Expectations {
    state.expectations()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use proptest::prelude::*;

    fn grid() -> Grid {
        make_grid(512, 40.0).unwrap()
    }

    fn excite_all(s: &VibronicState) -> VibronicState {
        let mut out = VibronicState::zeros(s.grid(), s.representation());
        out.excited_mut().copy_from_slice(s.ground());
        out
    }

    #[test]
    fn ground_gaussian_peak_and_norm() {
        let g = grid();
        let s = ground_gaussian(&g, 1.0, 1.0, 0.0, 0.0).unwrap();
        let peak = s.ground()[g.n() / 2];
        assert!((peak.re - PI.powf(-0.25)).abs() < 1e-14);
        assert!((peak.re - 0.75113).abs() < 1e-5);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        for (m, w, x0, p0) in [(2.0, 0.5, 1.0, -0.5), (0.7, 3.0, -2.0, 4.0)] {
            let s = ground_gaussian(&g, m, w, x0, p0).unwrap();
            assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn momentum_width_of_ground_state() {
        let g = grid();
        let s = ground_gaussian(&g, 1.0, 1.0, 0.0, 0.0).unwrap().to_representation(Representation::Momentum);
        let var: f64 = s.ground().iter().enumerate().map(|(k, z)| g.p(k).powi(2) * z.norm_sqr()).sum::<f64>() * g.dp();
        assert!((var.sqrt() - 0.5_f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn resolution_guard() {
        let coarse = make_grid(64, 40.0).unwrap();
        assert!(matches!(ground_gaussian(&coarse, 1.0, 1.0, 0.0, 0.0), Err(Error::UnderResolved(_))));
        let narrow = make_grid(1024, 6.0).unwrap();
        assert!(matches!(ground_gaussian(&narrow, 1.0, 1.0, 0.0, 0.0), Err(Error::UnderResolved(_))));
        assert!(matches!(ground_gaussian(&grid(), 1.0, 1.0, 18.0, 0.0), Err(Error::UnderResolved(_))));
        assert!(matches!(ground_gaussian(&grid(), -1.0, 1.0, 0.0, 0.0), Err(Error::Params(_))));
    }

    #[test]
    fn momentum_tail_is_negligible() {
        let g = grid();
        for (m, w, p0) in [(1.0, 1.0, 0.0), (1.0, 1.0, 3.0), (4.0, 0.25, -2.0)] {
            let s = ground_gaussian(&g, m, w, 0.0, p0).unwrap().to_representation(Representation::Momentum);
            let peak = s.ground().iter().map(|z| z.norm()).fold(0.0, f64::max);
            let edge = s.ground()[g.n() / 2].norm().max(s.ground()[g.n() / 2 - 1].norm());
            assert!(edge < 1e-10 * peak, "edge {edge} peak {peak}");
        }
    }

    #[test]
    fn momentum_peak_at_boost() {
        let g = grid();
        let s = ground_gaussian(&g, 1.0, 1.0, 0.0, 2.0).unwrap().to_representation(Representation::Momentum);
        let kmax = (0..g.n()).max_by(|&a, &b| s.ground()[a].norm().total_cmp(&s.ground()[b].norm())).unwrap();
        assert_eq!(kmax, g.nearest_momentum_index(2.0));
    }

    #[test]
    fn representation_round_trip() {
        let g = grid();
        let s = ground_gaussian(&g, 1.0, 1.0, 0.5, 1.0).unwrap();
        let back = s.to_representation(Representation::Momentum).to_representation(Representation::Position);
        assert!(s.max_deviation(&back).unwrap() < 1e-12);
        let m = change_representation(&s, Representation::Momentum);
        assert!((m.norm_sqr() - s.norm_sqr()).abs() < 1e-12);
        assert_eq!(m.representation(), Representation::Momentum);
    }

    #[test]
    fn overlap_closed_forms() {
        let g = grid();
        let a = ground_gaussian(&g, 1.0, 1.0, -1.0, 0.0).unwrap();
        let b = ground_gaussian(&g, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert!((a.overlap(&a).unwrap() - 1.0).norm() < 1e-12);
        // <a|b> = exp(-m w dx^2 / 4) for equal-width Gaussians displaced by dx.
        let oracle = (-4.0_f64 / 4.0).exp();
        let ov = a.overlap(&b).unwrap();
        assert!((ov.norm() - oracle).abs() < 1e-12);
        assert!((ov.norm() - 0.3679).abs() < 1e-4);
        let e = excite_all(&b);
        assert!(a.overlap(&e).unwrap().norm() < 1e-15);
    }

    #[test]
    fn overlap_rejects_mismatch() {
        let g = grid();
        let a = ground_gaussian(&g, 1.0, 1.0, 0.0, 0.0).unwrap();
        let m = a.to_representation(Representation::Momentum);
        assert!(matches!(a.overlap(&m), Err(Error::Representation { .. })));
        let other = ground_gaussian(&make_grid(512, 41.0).unwrap(), 1.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(a.overlap(&other).unwrap_err(), Error::GridMismatch);
    }

    #[test]
    fn expectations_of_packets() {
        let g = grid();
        let ex = ground_gaussian(&g, 1.0, 1.0, 0.0, 0.0).unwrap().expectations();
        assert!((ex.pop_g - 1.0).abs() < 1e-10);
        assert!(ex.x_g.unwrap().abs() < 1e-10 && ex.p_g.unwrap().abs() < 1e-10);
        assert_eq!(ex.pop_e, 0.0);
        assert!(ex.x_e.is_none() && ex.p_e.is_none());

        let ex = ground_gaussian(&g, 1.0, 1.0, 0.7, 1.5).unwrap().expectations();
        assert!((ex.p_g.unwrap() - 1.5).abs() < g.dp() / 10.0);
        assert!((ex.x_g.unwrap() - 0.7).abs() < 1e-10);
    }

    #[test]
    fn edge_mass_detects_edges() {
        let g = grid();
        let s = ground_gaussian(&g, 1.0, 1.0, 0.0, 0.0).unwrap();
        assert!(s.edge_mass() < 1e-30);
        let mut t = VibronicState::zeros(&g, Representation::Position);
        t.ground_mut()[0] = Complex64::new(1.0, 0.0);
        assert!(t.edge_mass() > 1e-8);
    }

    fn random_state(seed: &[(f64, f64)]) -> VibronicState {
        let g = make_grid(64, 20.0).unwrap();
        let g_amp = seed.iter().cycle().take(64).map(|&(a, b)| Complex64::new(a, b)).collect();
        let e_amp = seed.iter().rev().cycle().take(64).map(|&(a, b)| Complex64::new(b, -a)).collect();
        VibronicState::new(g, g_amp, e_amp, Representation::Position).unwrap()
    }

    proptest! {
        #[test]
        fn transform_is_unitary(seed in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..16)) {
            let s = random_state(&seed);
            let m = s.to_representation(Representation::Momentum);
            prop_assert!((m.norm_sqr() - s.norm_sqr()).abs() <= 1e-12 * s.norm_sqr().max(1.0));
        }

        #[test]
        fn overlap_is_hermitian(a in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..16),
                                b in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..16)) {
            let (sa, sb) = (random_state(&a), random_state(&b));
            let d = sa.overlap(&sb).unwrap() - sb.overlap(&sa).unwrap().conj();
            prop_assert!(d.norm() < 1e-14);
        }
    }
}
