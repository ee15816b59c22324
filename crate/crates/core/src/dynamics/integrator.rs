//! Dormand–Prince 5(4) with step landing on sample times and segment edges.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::C64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub initial_step: f64,
    pub max_step: f64,
    /// Take steps of exactly this size (clipped at stops) with no error control.
    pub fixed_step: Option<f64>,
    /// Check `min eig(ρ) ≥ −1e-6` at every sample time.
    pub check_positivity: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            initial_step: 1e-3,
            max_step: 1.0,
            fixed_step: None,
            check_positivity: cfg!(debug_assertions),
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::field(
                    name,
                    format!("must be finite and > 0, got {v}"),
                ))
            }
        };
        pos(self.rel_tol, "rel_tol")?;
        pos(self.abs_tol, "abs_tol")?;
        pos(self.initial_step, "initial_step")?;
        pos(self.max_step, "max_step")?;
        if let Some(h) = self.fixed_step {
            pos(h, "fixed_step")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b − b̂ (fifth-order minus embedded fourth-order weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrate `dy/dt = f_k(y)` where `f_k` is the right-hand side on segment
/// `k`. Segment `k` runs from `edges[k−1]` to `edges[k]` (the first from `t0`,
/// the last to the final sample time). `edges` must be increasing and `> t0`.
/// `on_sample(i, t, y)` fires when the solution reaches `sample_times[i]`.
pub fn integrate<F, S>(
    mut rhs: F,
    y: &mut [C64],
    t0: f64,
    edges: &[f64],
    sample_times: &[f64],
    cfg: &IntegratorConfig,
    mut on_sample: S,
) -> Result<IntegrationStats>
where
    F: FnMut(usize, &[C64], &mut [C64]),
    S: FnMut(usize, f64, &[C64]) -> Result<()>,
{
    cfg.validate()?;
    if sample_times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::field("sample_times", "must be strictly increasing"));
    }
    if sample_times.first().is_some_and(|&t| t < t0) {
        return Err(Error::field(
            "sample_times",
            "must not precede the start time",
        ));
    }
    if edges.windows(2).any(|w| !(w[0] < w[1])) || edges.first().is_some_and(|&e| e <= t0) {
        return Err(Error::invalid(
            "segment edges must be increasing and after t0",
        ));
    }

    let n = y.len();
    let mut stats = IntegrationStats::default();
    let mut k: Vec<Vec<C64>> = (0..7).map(|_| vec![C64::new(0.0, 0.0); n]).collect();
    let mut tmp = vec![C64::new(0.0, 0.0); n];
    let mut y_new = vec![C64::new(0.0, 0.0); n];
    let mut err = vec![C64::new(0.0, 0.0); n];

    let mut t = t0;
    let mut seg = 0usize;
    let mut h = cfg.fixed_step.unwrap_or(cfg.initial_step).min(cfg.max_step);
    let mut fsal_valid = false;
    let mut next_sample = 0usize;

    while next_sample < sample_times.len() && sample_times[next_sample] == t {
        on_sample(next_sample, t, y)?;
        next_sample += 1;
    }

    while next_sample < sample_times.len() {
        while seg < edges.len() && edges[seg] <= t {
            seg += 1;
            fsal_valid = false;
        }
        let target = sample_times[next_sample];
        let stop = match edges.get(seg) {
            Some(&e) if e < target => e,
            _ => target,
        };

        if !fsal_valid {
            rhs(seg, y, &mut k[0]);
            stats.rhs_evals += 1;
            fsal_valid = true;
        }

        let mut step = h.min(cfg.max_step);
        let mut lands = false;
        if t + step >= stop || (stop - t - step) <= 1e-12 * stop.abs().max(1.0) {
            step = stop - t;
            lands = true;
        }
        let min_step = 1e-13 * t.abs().max(1.0);
        if step < min_step && !lands {
            return Err(Error::StepUnderflow { time: t });
        }

        stages(&mut rhs, seg, y, step, &mut k, &mut tmp, &mut y_new);
        stats.rhs_evals += 6;

        let accept;
        let mut factor = 1.0;
        if cfg.fixed_step.is_some() {
            accept = true;
        } else {
            for i in 0..n {
                err[i] = (k[0][i] * E1
                    + k[2][i] * E3
                    + k[3][i] * E4
                    + k[4][i] * E5
                    + k[5][i] * E6
                    + k[6][i] * E7)
                    * step;
            }
            let mut acc = 0.0;
            let mut finite = true;
            for i in 0..n {
                let sc = cfg.abs_tol + cfg.rel_tol * y[i].norm().max(y_new[i].norm());
                let e = err[i].norm() / sc;
                if !e.is_finite() {
                    finite = false;
                }
                acc += e * e;
            }
            let enorm = (acc / n.max(1) as f64).sqrt();
            if !finite {
                accept = false;
                factor = 0.2;
            } else {
                accept = enorm <= 1.0;
                factor = if enorm == 0.0 {
                    5.0
                } else {
                    (0.9 * enorm.powf(-0.2)).clamp(0.2, 5.0)
                };
                if !accept {
                    factor = factor.min(1.0);
                }
            }
        }

        if accept {
            stats.accepted += 1;
            if y_new.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite("integrator state"));
            }
            y.copy_from_slice(&y_new);
            k.swap(0, 6);
            t = if lands { stop } else { t + step };
            if cfg.fixed_step.is_none() {
                // a landing step may be artificially short; keep the larger proposal
                h = if lands {
                    h.max(step * factor)
                } else {
                    step * factor
                };
            }
            while next_sample < sample_times.len() && sample_times[next_sample] <= t {
                on_sample(next_sample, t, y)?;
                next_sample += 1;
            }
        } else {
            stats.rejected += 1;
            h = step * factor;
            if h < 1e-13 * t.abs().max(1.0) {
                return Err(Error::StepUnderflow { time: t });
            }
        }
    }
    Ok(stats)
}

#[allow(clippy::too_many_arguments)]
fn stages<F>(
    rhs: &mut F,
    seg: usize,
    y: &[C64],
    h: f64,
    k: &mut [Vec<C64>],
    tmp: &mut [C64],
    y_new: &mut [C64],
) where
    F: FnMut(usize, &[C64], &mut [C64]),
{
    let n = y.len();
    for i in 0..n {
        tmp[i] = y[i] + k[0][i] * (h * A21);
    }
    rhs(seg, tmp, &mut k[1]);
    for i in 0..n {
        tmp[i] = y[i] + (k[0][i] * A31 + k[1][i] * A32) * h;
    }
    rhs(seg, tmp, &mut k[2]);
    for i in 0..n {
        tmp[i] = y[i] + (k[0][i] * A41 + k[1][i] * A42 + k[2][i] * A43) * h;
    }
    rhs(seg, tmp, &mut k[3]);
    for i in 0..n {
        tmp[i] = y[i] + (k[0][i] * A51 + k[1][i] * A52 + k[2][i] * A53 + k[3][i] * A54) * h;
    }
    rhs(seg, tmp, &mut k[4]);
    for i in 0..n {
        tmp[i] = y[i]
            + (k[0][i] * A61 + k[1][i] * A62 + k[2][i] * A63 + k[3][i] * A64 + k[4][i] * A65) * h;
    }
    rhs(seg, tmp, &mut k[5]);
    for i in 0..n {
        y_new[i] =
            y[i] + (k[0][i] * B1 + k[2][i] * B3 + k[3][i] * B4 + k[4][i] * B5 + k[5][i] * B6) * h;
    }
    rhs(seg, y_new, &mut k[6]);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(rate: f64) -> impl FnMut(usize, &[C64], &mut [C64]) {
        move |_, y, dy| {
            for (d, v) in dy.iter_mut().zip(y) {
                *d = -*v * rate;
            }
        }
    }

    #[test]
    fn exponential_decay_is_accurate_at_samples() {
        let mut y = vec![C64::new(1.0, 0.0)];
        let times = [0.0, 0.5, 1.0, 2.0, 7.5];
        let mut got = Vec::new();
        integrate(
            decay(1.3),
            &mut y,
            0.0,
            &[],
            &times,
            &IntegratorConfig::default(),
            |_, t, y| {
                got.push((t, y[0].re));
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(got.len(), times.len());
        for (t, v) in got {
            assert!((v - (-1.3 * t).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn rotation_preserves_modulus() {
        let mut y = vec![C64::new(1.0, 0.0)];
        let rhs = |_: usize, y: &[C64], dy: &mut [C64]| dy[0] = y[0] * C64::new(0.0, 2.0);
        integrate(
            rhs,
            &mut y,
            0.0,
            &[],
            &[10.0],
            &IntegratorConfig::default(),
            |_, _, _| Ok(()),
        )
        .unwrap();
        let expect = C64::new(0.0, 20.0).exp();
        assert!((y[0] - expect).norm() < 1e-6);
    }

    #[test]
    fn segments_switch_exactly_at_edges() {
        // dy/dt = 1 on [0, 1), 0 afterwards: y(3) = 1 exactly, no smearing
        let rhs = |seg: usize, _: &[C64], dy: &mut [C64]| {
            dy[0] = C64::new(if seg == 0 { 1.0 } else { 0.0 }, 0.0)
        };
        let mut y = vec![C64::new(0.0, 0.0)];
        let mut seen = Vec::new();
        integrate(
            rhs,
            &mut y,
            0.0,
            &[1.0],
            &[0.5, 3.0],
            &IntegratorConfig::default(),
            |_, _, y| {
                seen.push(y[0].re);
                Ok(())
            },
        )
        .unwrap();
        assert!((seen[0] - 0.5).abs() < 1e-14);
        assert!((seen[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn fixed_step_order_is_at_least_three() {
        let run = |h: f64| {
            let mut y = vec![C64::new(1.0, 0.0)];
            let cfg = IntegratorConfig {
                fixed_step: Some(h),
                ..Default::default()
            };
            integrate(decay(1.0), &mut y, 0.0, &[], &[2.0], &cfg, |_, _, _| Ok(())).unwrap();
            (y[0].re - (-2.0f64).exp()).abs()
        };
        let e1 = run(0.2);
        let e2 = run(0.1);
        assert!(e1 / e2 >= 8.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn stiff_problem_reports_underflow_or_finishes() {
        let cfg = IntegratorConfig {
            rel_tol: 1e-8,
            abs_tol: 1e-300,
            ..Default::default()
        };
        let rhs = |_: usize, y: &[C64], dy: &mut [C64]| dy[0] = y[0] * y[0] * C64::new(1.0, 0.0);
        // blows up at t = 1
        let mut y = vec![C64::new(1.0, 0.0)];
        let r = integrate(rhs, &mut y, 0.0, &[], &[2.0], &cfg, |_, _, _| Ok(()));
        match r {
            Err(Error::StepUnderflow { time }) => assert!(time > 0.9 && time < 1.01, "{time}"),
            Err(Error::NonFinite(_)) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_unsorted_samples() {
        let mut y = vec![C64::new(1.0, 0.0)];
        let r = integrate(
            decay(1.0),
            &mut y,
            0.0,
            &[],
            &[1.0, 0.5],
            &IntegratorConfig::default(),
            |_, _, _| Ok(()),
        );
        assert!(r.is_err());
    }
}
