//! Locally bounded complex functions of time.
//!
//! Every coefficient function entering the generator (`h`, `b`, `c`, the
//! coherent field `f`) is one of a small set of closed forms or a
//! piecewise-constant table. Piece selection at a discontinuity goes through
//! a `probe` time: `eval_at(t, probe)` evaluates the smooth formula at `t` but
//! picks the piece containing `probe`. Integrators pass the midpoint of the
//! current step segment so that one-sided limits are used at breakpoints.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::ZERO;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeFunction {
    Zero,
    Constant {
        value: [f64; 2],
    },
    /// `amp * exp(i (theta + omega t))`.
    Exp {
        amp: [f64; 2],
        #[serde(default)]
        theta: f64,
        #[serde(default)]
        omega: f64,
    },
    /// `inner` on `[start, end)`, zero elsewhere.
    Window {
        start: f64,
        end: f64,
        inner: Box<TimeFunction>,
    },
    /// `values[l]` on `[breakpoints[l], breakpoints[l+1])`, zero outside.
    Table {
        breakpoints: Vec<f64>,
        values: Vec<[f64; 2]>,
    },
}

fn cx(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

impl TimeFunction {
    pub fn constant(z: Complex64) -> Self {
        TimeFunction::Constant { value: [z.re, z.im] }
    }

    pub fn exp(amp: Complex64, theta: f64, omega: f64) -> Self {
        TimeFunction::Exp { amp: [amp.re, amp.im], theta, omega }
    }

    pub fn window(self, start: f64, end: f64) -> Self {
        TimeFunction::Window { start, end, inner: Box::new(self) }
    }

    pub fn table(breakpoints: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        let f = TimeFunction::Table { breakpoints, values: values.iter().map(|z| [z.re, z.im]).collect() };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |x: f64| x.is_finite();
        match self {
            TimeFunction::Zero => Ok(()),
            TimeFunction::Constant { value } if value.iter().all(|x| finite(*x)) => Ok(()),
            TimeFunction::Exp { amp, theta, omega }
                if amp.iter().all(|x| finite(*x)) && finite(*theta) && finite(*omega) =>
            {
                Ok(())
            }
            TimeFunction::Window { start, end, inner } => {
                if !(start < end) || start.is_nan() {
                    return Err(Error::Validation(format!("window [{start}, {end}) is empty")));
                }
                inner.validate()
            }
            TimeFunction::Table { breakpoints, values } => {
                if breakpoints.len() != values.len() + 1 {
                    return Err(Error::Validation(format!(
                        "table has {} breakpoints for {} values",
                        breakpoints.len(),
                        values.len()
                    )));
                }
                if breakpoints.windows(2).any(|w| !(w[0] < w[1])) || breakpoints.iter().any(|x| !finite(*x)) {
                    return Err(Error::Validation("table breakpoints must be finite and strictly increasing".into()));
                }
                if values.iter().flatten().any(|x| !finite(*x)) {
                    return Err(Error::Validation("table values must be finite".into()));
                }
                Ok(())
            }
            _ => Err(Error::Validation(format!("non-finite parameters in {self:?}"))),
        }
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        self.eval_at(t, t)
    }

    /// Evaluate at `t`, selecting the piece that contains `probe`.
    pub fn eval_at(&self, t: f64, probe: f64) -> Complex64 {
        match self {
            TimeFunction::Zero => ZERO,
            TimeFunction::Constant { value } => cx(*value),
            TimeFunction::Exp { amp, theta, omega } => cx(*amp) * Complex64::from_polar(1.0, theta + omega * t),
            TimeFunction::Window { start, end, inner } => {
                if probe >= *start && probe < *end {
                    inner.eval_at(t, probe)
                } else {
                    ZERO
                }
            }
            TimeFunction::Table { breakpoints, values } => {
                if probe < breakpoints[0] || probe >= *breakpoints.last().unwrap() {
                    return ZERO;
                }
                let l = breakpoints.partition_point(|&b| b <= probe) - 1;
                cx(values[l])
            }
        }
    }

    /// Discontinuity locations.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            TimeFunction::Window { start, end, inner } => {
                let mut v = vec![*start, *end];
                v.extend(inner.breakpoints().into_iter().filter(|x| x > start && x < end));
                v
            }
            TimeFunction::Table { breakpoints, .. } => breakpoints.clone(),
            _ => Vec::new(),
        }
    }

    /// `g(x) = f(x + s)`.
    pub fn shifted(&self, s: f64) -> Self {
        match self {
            TimeFunction::Zero | TimeFunction::Constant { .. } => self.clone(),
            TimeFunction::Exp { amp, theta, omega } => {
                TimeFunction::Exp { amp: *amp, theta: theta + omega * s, omega: *omega }
            }
            TimeFunction::Window { start, end, inner } => {
                TimeFunction::Window { start: start - s, end: end - s, inner: Box::new(inner.shifted(s)) }
            }
            TimeFunction::Table { breakpoints, values } => {
                TimeFunction::Table { breakpoints: breakpoints.iter().map(|b| b - s).collect(), values: values.clone() }
            }
        }
    }

    /// Structurally zero (no sampling involved).
    pub fn is_identically_zero(&self) -> bool {
        match self {
            TimeFunction::Zero => true,
            TimeFunction::Constant { value } => value[0] == 0.0 && value[1] == 0.0,
            TimeFunction::Exp { amp, .. } => amp[0] == 0.0 && amp[1] == 0.0,
            TimeFunction::Window { inner, .. } => inner.is_identically_zero(),
            TimeFunction::Table { values, .. } => values.iter().all(|v| v[0] == 0.0 && v[1] == 0.0),
        }
    }

    /// Real-valued by construction (required for the `c` functions).
    pub fn is_real(&self) -> bool {
        match self {
            TimeFunction::Zero => true,
            TimeFunction::Constant { value } => value[1] == 0.0,
            TimeFunction::Exp { amp, omega, theta } => {
                amp[0] == 0.0 && amp[1] == 0.0
                    || (*omega == 0.0 && (cx(*amp) * Complex64::from_polar(1.0, *theta)).im == 0.0)
            }
            TimeFunction::Window { inner, .. } => inner.is_real(),
            TimeFunction::Table { values, .. } => values.iter().all(|v| v[1] == 0.0),
        }
    }

    /// Piecewise-constant replacement sampled at the midpoint of each segment
    /// of `grid`. Zero outside `[grid[0], grid.last())`.
    pub fn frozen(&self, grid: &[f64]) -> Self {
        let values = grid
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                let z = self.eval(mid);
                [z.re, z.im]
            })
            .collect();
        TimeFunction::Table { breakpoints: grid.to_vec(), values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_and_shift() {
        let f = TimeFunction::exp(Complex64::new(0.0, 2.0), 0.3, -1.5);
        let g = f.shifted(0.7);
        for t in [0.0, 0.4, 2.0] {
            assert!((g.eval(t) - f.eval(t + 0.7)).norm() < 1e-14);
        }
    }

    #[test]
    fn window_is_half_open_and_probe_selects_piece() {
        let f = TimeFunction::constant(Complex64::new(1.0, 0.0)).window(1.0, 2.0);
        assert_eq!(f.eval(0.999), ZERO);
        assert_eq!(f.eval(1.0), Complex64::new(1.0, 0.0));
        assert_eq!(f.eval(2.0), ZERO);
        // left limit at the closing breakpoint
        assert_eq!(f.eval_at(2.0, 1.5), Complex64::new(1.0, 0.0));
        assert_eq!(f.breakpoints(), vec![1.0, 2.0]);
    }

    #[test]
    fn table_lookup() {
        let f = TimeFunction::table(vec![0.0, 1.0, 3.0], vec![Complex64::new(2.0, 0.0), Complex64::new(0.0, -1.0)])
            .unwrap();
        assert_eq!(f.eval(0.5), Complex64::new(2.0, 0.0));
        assert_eq!(f.eval(1.0), Complex64::new(0.0, -1.0));
        assert_eq!(f.eval(3.0), ZERO);
        assert_eq!(f.eval(-0.1), ZERO);
        let s = f.shifted(0.5);
        assert_eq!(s.eval(0.6), Complex64::new(0.0, -1.0));
    }

    #[test]
    fn table_validation() {
        assert!(TimeFunction::table(vec![0.0, 0.0], vec![ZERO]).is_err());
        assert!(TimeFunction::table(vec![0.0, 1.0], vec![]).is_err());
    }

    #[test]
    fn realness() {
        assert!(TimeFunction::constant(Complex64::new(2.0, 0.0)).is_real());
        assert!(!TimeFunction::exp(Complex64::new(1.0, 0.0), 0.0, 1.0).is_real());
        assert!(TimeFunction::Zero.window(0.0, 1.0).is_real());
    }

    #[test]
    fn frozen_samples_midpoints() {
        let f = TimeFunction::exp(Complex64::new(1.0, 0.0), 0.0, 2.0);
        let fr = f.frozen(&[0.0, 0.5, 1.0]);
        assert_eq!(fr.eval(0.1), f.eval(0.25));
        assert_eq!(fr.eval(0.9), f.eval(0.75));
    }
}
