//! One-dimensional maximization of a piecewise-smooth leader utility.
//!
//! Worker clamping splits each rate axis into pieces on which the leader
//! utility is smooth. On every piece the first-order condition is bracketed
//! by a slope scan and refined with safeguarded Newton; the maximizer is the
//! best of those roots, the piece junctions and the interval edges.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slope tolerance for accepting a first-order root.
pub const SLOPE_TOL: f64 = 1e-8;
/// Bracket width at which refinement stops.
pub const WIDTH_TOL: f64 = 1e-10;
/// Uniform slope samples per smooth piece when bracketing roots.
const SCAN_CELLS: usize = 64;
const MAX_ITER: usize = 200;

/// A separable leg of the leader utility as a function of one rate.
pub trait RateObjective {
    /// Rates at which some worker's response switches clamp state.
    fn breakpoints(&self) -> Vec<f64>;

    /// Utility contribution at `rate`.
    fn value(&self, rate: f64) -> f64;

    /// Slope of the smooth piece containing `probe`, evaluated at `rate`.
    fn slope(&self, rate: f64, probe: f64) -> f64;

    /// Second derivative of the smooth piece containing `probe`.
    fn curvature(&self, rate: f64, probe: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSolution {
    pub rate: f64,
    /// The maximizer sits on an edge of the search interval.
    pub boundary: bool,
    /// Distance of zero from the one-sided slopes at `rate`. Zero (up to
    /// the root tolerance) at an interior maximizer, including a kink where
    /// the slope jumps from positive to negative.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy)]
enum Site {
    Lower,
    Upper,
    Kink { left: f64, right: f64 },
    Root { probe: f64 },
}

fn checked(v: f64, rate: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric {
            rate,
            detail: format!("{what} evaluated to {v}"),
        })
    }
}

/// Maximizes `obj` over `[lo, hi]`.
pub fn maximize<O: RateObjective + ?Sized>(obj: &O, lo: f64, hi: f64) -> Result<RateSolution> {
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::config(format!(
            "invalid search interval [{lo}, {hi}]"
        )));
    }
    if lo == hi {
        let residual = checked(obj.slope(lo, lo), lo, "slope")?.abs();
        return Ok(RateSolution {
            rate: lo,
            boundary: true,
            residual,
        });
    }

    let mut knots = vec![lo];
    let mut inner: Vec<f64> = obj
        .breakpoints()
        .into_iter()
        .filter(|b| *b > lo && *b < hi)
        .collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    knots.extend(inner);
    knots.push(hi);

    let mut sites: Vec<(f64, Site)> = Vec::with_capacity(knots.len() + 4);
    sites.push((lo, Site::Lower));
    for w in knots.windows(3) {
        sites.push((
            w[1],
            Site::Kink {
                left: 0.5 * (w[0] + w[1]),
                right: 0.5 * (w[1] + w[2]),
            },
        ));
    }
    sites.push((hi, Site::Upper));

    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let probe = 0.5 * (a + b);
        let h = (b - a) / SCAN_CELLS as f64;
        let mut x0 = a;
        let mut s0 = checked(obj.slope(a, probe), a, "slope")?;
        for i in 1..=SCAN_CELLS {
            let x1 = if i == SCAN_CELLS { b } else { a + h * i as f64 };
            let s1 = checked(obj.slope(x1, probe), x1, "slope")?;
            // A local maximum needs the slope to go from positive to non-positive.
            if s0 > 0.0 && s1 <= 0.0 {
                let root = if s1 == 0.0 {
                    x1
                } else {
                    newton_bisect(|x| obj.slope(x, probe), |x| obj.curvature(x, probe), x0, x1)?
                };
                sites.push((root, Site::Root { probe }));
            }
            x0 = x1;
            s0 = s1;
        }
    }

    let mut best: Option<(f64, f64, Site)> = None;
    for &(x, site) in &sites {
        let v = checked(obj.value(x), x, "utility")?;
        if best.is_none_or(|(_, bv, _)| v > bv) {
            best = Some((x, v, site));
        }
    }
    let (rate, _, site) = best.expect("at least two candidate sites");

    let residual = match site {
        Site::Lower => obj.slope(lo, 0.5 * (knots[0] + knots[1])).abs(),
        Site::Upper => {
            let k = knots.len();
            obj.slope(hi, 0.5 * (knots[k - 2] + knots[k - 1])).abs()
        }
        Site::Kink { left, right } => {
            let (l, r) = (obj.slope(rate, left), obj.slope(rate, right));
            let (mn, mx) = (l.min(r), l.max(r));
            if mn <= 0.0 && mx >= 0.0 {
                0.0
            } else {
                mn.abs().min(mx.abs())
            }
        }
        Site::Root { probe } => obj.slope(rate, probe).abs(),
    };
    Ok(RateSolution {
        rate,
        boundary: rate == lo || rate == hi,
        residual,
    })
}

/// Root of `f` on `[a, b]`, where `f(a)` and `f(b)` differ in sign.
///
/// Newton steps that leave the current bracket fall back to bisection.
/// Stops once `|f| < SLOPE_TOL` or the bracket is narrower than `WIDTH_TOL`.
pub fn newton_bisect(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
) -> Result<f64> {
    let (mut lo, mut hi) = (a, b);
    let f_lo = checked(f(lo), lo, "slope")?;
    let f_hi = checked(f(hi), hi, "slope")?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Numeric {
            rate: lo,
            detail: format!("no sign change on [{lo}, {hi}]"),
        });
    }
    let lo_positive = f_lo > 0.0;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..MAX_ITER {
        let fx = checked(f(x), x, "slope")?;
        if fx.abs() < SLOPE_TOL {
            return Ok(x);
        }
        if (fx > 0.0) == lo_positive {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo < WIDTH_TOL {
            return Ok(x);
        }
        let d = df(x);
        let step = x - fx / d;
        x = if d.is_finite() && d != 0.0 && step > lo && step < hi {
            step
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(x)
}

/// Plain bisection on a sign change, to width `tol`.
pub fn bisect(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (a, b);
    let f_lo = checked(f(lo), lo, "function")?;
    let f_hi = checked(f(hi), hi, "function")?;
    if f_lo.signum() == f_hi.signum() && f_lo != 0.0 && f_hi != 0.0 {
        return Err(Error::Numeric {
            rate: lo,
            detail: format!("no sign change on [{lo}, {hi}]"),
        });
    }
    let lo_positive = f_lo > 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = checked(f(mid), mid, "function")?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
