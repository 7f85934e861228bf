//! Cross-surface polarization and photon-echo detection.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::state::{dot, VibronicState};

/// First-pulse phases of the four-step cycle that isolates the rephasing
/// (echo-direction) polarization component.
pub const PHASE_CYCLE: [f64; 4] = [0.0, FRAC_PI_2, 2.0 * FRAC_PI_2, 3.0 * FRAC_PI_2];

/// Polarization `sum conj(psi_E) psi_G` with unit transition dipole.
pub fn polarization(state: &VibronicState) -> Complex64 {
    dot(state.excited(), state.ground()) * state.weight()
}

/// Combines traces recorded with the first pulse phase set to each entry of
/// [`PHASE_CYCLE`]. Rephasing contributions carry `exp(-i theta1)`; every
/// other two-pulse pathway carries `exp(0)`, `exp(+i theta1)` or
/// `exp(+-2i theta1)` and cancels.
pub fn combine_phase_cycle(traces: &[Vec<Complex64>]) -> Vec<Complex64> {
    assert_eq!(traces.len(), PHASE_CYCLE.len(), "one trace per cycle phase");
    let len = traces[0].len();
    (0..len)
        .map(|i| {
            PHASE_CYCLE
                .iter()
                .zip(traces)
                .map(|(&theta, tr)| tr[i] * Complex64::from_polar(0.25, theta))
                .sum()
        })
        .collect()
}

/// Anything that carries a sampled polarization signal.
pub trait EchoSignal {
    fn times(&self) -> &[f64];
    fn polarization(&self) -> &[Complex64];
}

/// Bare polarization trace.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolarizationTrace {
    pub times: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl EchoSignal for PolarizationTrace {
    fn times(&self) -> &[f64] {
        &self.times
    }
    fn polarization(&self) -> &[Complex64] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EchoMeasurement {
    pub tau: f64,
    /// Sample time of the largest `|P|^2` in `[t0 + tau/2, t0 + 3 tau/2]`.
    pub t_peak: f64,
    /// `|P(t_peak)|^2`.
    pub intensity: f64,
    /// `|P|^2` at the sample closest to the nominal echo time `t0 + tau`.
    pub intensity_at_echo: f64,
    /// Median `|P|^2` over the window with +-3 sigma_t around the peak removed
    /// (the larger of the two window-edge values when nothing is left).
    pub background: f64,
    pub no_echo: bool,
}

/// Locates the echo in `[t0 + tau/2, t0 + 3 tau/2]`.
///
/// The echo width `sigma_t` is read off the signal: the time from the peak to
/// where `|P|^2` first drops below `exp(-1/2)` of the peak value (the wider
/// side is used).
pub fn detect_echo<S: EchoSignal + ?Sized>(series: &S, t0: f64, tau: f64) -> Result<EchoMeasurement> {
    if !(tau > 0.0) {
        return Err(Error::NegativeDelay(tau));
    }
    let times = series.times();
    let pol = series.polarization();
    let (lo, hi) = (t0 + 0.5 * tau, t0 + 1.5 * tau);
    let eps = 1e-9 * tau.max(1.0);
    match (times.first(), times.last()) {
        (Some(&first), Some(&last)) if first <= lo + eps && last >= hi - eps => {}
        _ => return Err(Error::WindowNotCovered { lo, hi }),
    }
    let window: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= lo - eps && times[i] <= hi + eps).collect();
    if window.is_empty() {
        return Err(Error::WindowNotCovered { lo, hi });
    }
    let intensity = |i: usize| pol[i].norm_sqr();
    let peak_pos = window
        .iter()
        .enumerate()
        .max_by(|a, b| intensity(*a.1).total_cmp(&intensity(*b.1)))
        .map(|(k, _)| k)
        .expect("non-empty window");
    let peak = window[peak_pos];
    let peak_value = intensity(peak);

    let t_echo = t0 + tau;
    let nearest = *window
        .iter()
        .min_by(|&&a, &&b| (times[a] - t_echo).abs().total_cmp(&(times[b] - t_echo).abs()))
        .expect("non-empty window");

    let threshold = peak_value * (-0.5_f64).exp();
    let walk = |range: &mut dyn Iterator<Item = usize>| {
        for k in range {
            if intensity(window[k]) < threshold {
                return (times[window[k]] - times[peak]).abs();
            }
        }
        f64::INFINITY
    };
    let left = walk(&mut (0..peak_pos).rev());
    let right = walk(&mut (peak_pos + 1..window.len()));
    let sigma_t = left.max(right);
    let mut rest: Vec<f64> = window
        .iter()
        .filter(|&&i| (times[i] - times[peak]).abs() > 3.0 * sigma_t)
        .map(|&i| intensity(i))
        .collect();
    if rest.is_empty() {
        // the echo fills the window: fall back to the larger edge value
        let edges = intensity(window[0]).max(intensity(window[window.len() - 1]));
        rest.push(edges);
    }
    let background = median(&mut rest);

    Ok(EchoMeasurement {
        tau,
        t_peak: times[peak],
        intensity: peak_value,
        intensity_at_echo: intensity(nearest),
        background,
        no_echo: !(peak_value > 0.0 && peak_value >= 4.0 * background),
    })
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::model::apply_impulse;
    use crate::state::{ground_gaussian, Representation};
    use std::f64::consts::PI;

    #[test]
    fn single_impulse_polarization() {
        let g = make_grid(512, 40.0).unwrap();
        let s = ground_gaussian(&g, 1.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(polarization(&s), Complex64::default());
        for phi in [0.3, PI / 2.0, 2.0] {
            let r = apply_impulse(&s, phi, 0.7).unwrap();
            assert!((polarization(&r).norm() - phi.sin() / 2.0).abs() < 1e-12);
            let m = r.to_representation(Representation::Momentum);
            assert!((polarization(&m) - polarization(&r)).norm() < 1e-12);
        }
        let r = apply_impulse(&s, PI / 2.0, 0.0).unwrap();
        assert!((polarization(&r).norm() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn separated_packets_barely_polarize() {
        let g = make_grid(1024, 40.0).unwrap();
        let sp = 0.5_f64.sqrt();
        let a = ground_gaussian(&g, 1.0, 1.0, 0.0, 0.0).unwrap();
        let b = ground_gaussian(&g, 1.0, 1.0, 0.0, 10.0 * sp).unwrap();
        let (c, s) = ((0.6_f64).cos(), (0.6_f64).sin());
        let mut amp_g = a.ground().to_vec();
        amp_g.iter_mut().for_each(|z| *z *= c);
        let amp_e: Vec<Complex64> = b.ground().iter().map(|z| z * s).collect();
        let st = VibronicState::new(g, amp_g, amp_e, Representation::Position).unwrap();
        // closed form |<a|b>| = exp(-(dp)^2 / (8 sigma_p^2))
        let oracle = c * s * (-100.0_f64 / 8.0).exp();
        assert!((polarization(&st).norm() - oracle).abs() < 1e-12);
        assert!(polarization(&st).norm() < 1e-5 * c * s);
        let (pg, pe) = st.populations();
        assert!(polarization(&st).norm() <= (pg * pe).sqrt());
    }

    #[test]
    fn phase_cycle_isolates_minus_one_harmonic() {
        let trace = |theta: f64| {
            vec![
                Complex64::from_polar(0.3, -theta + 0.1)
                    + Complex64::from_polar(0.7, theta)
                    + Complex64::from_polar(0.2, 2.0 * theta)
                    + Complex64::from_polar(0.4, -2.0 * theta)
                    + Complex64::new(0.5, -0.5),
            ]
        };
        let traces: Vec<_> = PHASE_CYCLE.iter().map(|&t| trace(t)).collect();
        let out = combine_phase_cycle(&traces);
        assert!((out[0] - Complex64::from_polar(0.3, 0.1)).norm() < 1e-15);
    }

    fn gaussian_trace(center: f64, width: f64, floor: f64) -> PolarizationTrace {
        let times: Vec<f64> = (0..=400).map(|i| i as f64 * 0.01).collect();
        let values = times
            .iter()
            .map(|&t| Complex64::new((-(t - center).powi(2) / (4.0 * width * width)).exp() * 0.25 + floor, 0.0))
            .collect();
        PolarizationTrace { times, values }
    }

    #[test]
    fn detects_gaussian_echo() {
        let tr = gaussian_trace(3.0, 0.1, 0.0);
        let m = detect_echo(&tr, 1.0, 2.0).unwrap();
        assert!((m.t_peak - 3.0).abs() < 1e-9);
        assert!((m.intensity - 0.0625).abs() < 1e-12);
        assert_eq!(m.intensity, m.intensity_at_echo);
        assert!(!m.no_echo);
        assert!(m.background < 1e-10);
    }

    #[test]
    fn flat_or_empty_signal_is_no_echo() {
        let tr = PolarizationTrace { times: (0..=400).map(|i| i as f64 * 0.01).collect(), values: vec![Complex64::default(); 401] };
        assert!(detect_echo(&tr, 1.0, 2.0).unwrap().no_echo);
        let flat = PolarizationTrace { values: vec![Complex64::new(0.1, 0.0); 401], ..tr.clone() };
        assert!(detect_echo(&flat, 1.0, 2.0).unwrap().no_echo);
    }

    #[test]
    fn window_must_be_covered() {
        let tr = gaussian_trace(3.0, 0.1, 0.0);
        assert!(matches!(detect_echo(&tr, 2.0, 2.0), Err(Error::WindowNotCovered { .. })));
        assert!(matches!(detect_echo(&tr, -1.0, 1.0), Err(Error::WindowNotCovered { .. })));
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&mut []), 0.0);
    }
}
