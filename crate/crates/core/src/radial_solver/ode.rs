//! Dormand–Prince 5(4) with step control and a sign-change event on component 0.

use crate::error::{Result, SpikeError};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights equal the last row of A.
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeTolerance {
    pub rtol: f64,
    pub atol: f64,
    /// Number of leading components entering the error norm.
    pub controlled: usize,
}

/// Accepted step or event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<const N: usize> {
    pub samples: Vec<Sample<N>>,
    /// Where component 0 first reached zero, if it did.
    pub event: Option<Sample<N>>,
    /// Final state: the event if one stopped the run, otherwise t_end.
    pub last: Sample<N>,
    pub steps: usize,
    pub rejected: usize,
}

fn step<const N: usize, F: Fn(f64, &[f64; N]) -> [f64; N]>(f: &F, t: f64, y: &[f64; N], h: f64) -> ([f64; N], [f64; N]) {
    let mut k = [[0.0; N]; 7];
    k[0] = f(t, y);
    for s in 1..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            if A[s][j] != 0.0 {
                for i in 0..N {
                    ys[i] += h * A[s][j] * kj[i];
                }
            }
        }
        k[s] = f(t + C[s] * h, &ys);
    }
    let mut y5 = *y;
    let mut err = [0.0; N];
    for s in 0..7 {
        for i in 0..N {
            y5[i] += h * B5[s] * k[s][i];
            err[i] += h * (B5[s] - B4[s]) * k[s][i];
        }
    }
    (y5, err)
}

/// Integrates from (t0, y0) towards t_end. With `stop_at_zero` the run ends where
/// y[0] first changes sign from positive. The crossing is polished by re-taking the last step with a
/// shorter length found by the Illinois method.
pub fn integrate<const N: usize, F: Fn(f64, &[f64; N]) -> [f64; N]>(
    f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    h0: f64,
    tol: OdeTolerance,
    record: bool,
    stop_at_zero: bool,
) -> Result<Trajectory<N>> {
    let mut t = t0;
    let mut y = y0;
    let mut h = h0.min(t_end - t0);
    let mut out = Trajectory { samples: Vec::new(), event: None, last: Sample { t, y }, steps: 0, rejected: 0 };
    if record {
        out.samples.push(Sample { t, y });
    }
    while t < t_end {
        if h < 1e-14 * t.abs().max(1e-300) {
            return Err(SpikeError::StepSize { r: t });
        }
        let h_try = h.min(t_end - t);
        let (yn, e) = step(&f, t, &y, h_try);
        let mut norm: f64 = 0.0;
        for i in 0..tol.controlled {
            let sc = tol.atol + tol.rtol * y[i].abs().max(yn[i].abs());
            norm = norm.max((e[i] / sc).abs());
        }
        if !norm.is_finite() {
            h = 0.25 * h_try;
            out.rejected += 1;
            continue;
        }
        if norm > 1.0 {
            h = h_try * (0.9 * norm.powf(-0.2)).max(0.2);
            out.rejected += 1;
            continue;
        }
        out.steps += 1;
        if stop_at_zero && y[0] > 0.0 && yn[0] <= 0.0 {
            let hz = polish_crossing(&f, t, &y, h_try, yn[0]);
            let (yz, _) = step(&f, t, &y, hz);
            let ev = Sample { t: t + hz, y: yz };
            if record {
                out.samples.push(ev);
            }
            out.event = Some(ev);
            out.last = ev;
            return Ok(out);
        }
        t += h_try;
        y = yn;
        if record {
            out.samples.push(Sample { t, y });
        }
        h = h_try * (0.9 * norm.max(1e-10).powf(-0.2)).min(5.0);
    }
    out.last = Sample { t, y };
    Ok(out)
}

fn polish_crossing<const N: usize, F: Fn(f64, &[f64; N]) -> [f64; N]>(f: &F, t: f64, y: &[f64; N], h: f64, v_end: f64) -> f64 {
    let (mut a, mut fa) = (0.0, y[0]);
    let (mut b, mut fb) = (h, v_end);
    let mut side = 0;
    for _ in 0..100 {
        let c = (a * fb - b * fa) / (fb - fa);
        if !(c > a && c < b) || b - a <= 4.0 * f64::EPSILON * (t + b).abs() {
            break;
        }
        let fc = step(f, t, y, c).0[0];
        if fc == 0.0 {
            return c;
        }
        if (fc > 0.0) == (fa > 0.0) {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    if fa.abs() < fb.abs() {
        a
    } else {
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: OdeTolerance = OdeTolerance { rtol: 1e-12, atol: 1e-14, controlled: 2 };

    #[test]
    fn harmonic_oscillator_crossing() {
        // y'' = −y with y(0)=1: first zero at π/2
        let tr = integrate(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [1.0, 0.0], 10.0, 1e-3, TOL, false, true).unwrap();
        let e = tr.event.unwrap();
        assert!((e.t - std::f64::consts::FRAC_PI_2).abs() < 1e-12, "{}", e.t);
        assert!(e.y[0].abs() < 1e-14);
    }

    #[test]
    fn exponential_to_end() {
        let tr = integrate(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], 2.0, 1e-2, OdeTolerance { controlled: 1, ..TOL }, true, true).unwrap();
        let last = tr.samples.last().unwrap();
        assert_eq!(last.t, 2.0);
        assert!((last.y[0] - 2f64.exp()).abs() < 1e-10 * 2f64.exp());
        assert!(tr.event.is_none());
    }
}
