//! Classical flow of `½|p|² − |x|^ε`: velocity-Verlet orbits, growth
//! classification and the `|y(t)|/t` plateau.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry;

/// At most this many samples are stored per trajectory.
pub const MAX_SAMPLES: usize = 20_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub momenta: Vec<Vec<f64>>,
    /// `max |E(t) − E(0)|` relative to `max(|E(0)|, ½|p|², |x|^ε)` along the orbit.
    pub energy_drift: f64,
    pub epsilon: f64,
    pub dt: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn force(x: &[f64], eps: f64, out: &mut [f64]) {
    let r = norm(x);
    let s = eps * r.powf(eps - 2.0);
    for (o, xi) in out.iter_mut().zip(x) {
        *o = s * xi;
    }
}

pub fn energy(x: &[f64], p: &[f64], eps: f64) -> f64 {
    0.5 * p.iter().map(|v| v * v).sum::<f64>() - norm(x).powf(eps)
}

/// Velocity Verlet for `ẋ = p`, `ṗ = ε|x|^{ε−2}x`. A negative `t_end`
/// integrates backward in time.
pub fn integrate_orbit(x0: &[f64], p0: &[f64], epsilon: f64, t_end: f64, dt: f64) -> Result<Trajectory> {
    if x0.len() != p0.len() || x0.is_empty() {
        return Err(Error::invalid("x0 and p0 must have the same non-zero dimension"));
    }
    if !(dt > 0.0) || !(0.0 < epsilon && epsilon <= 2.0) {
        return Err(Error::invalid("need dt > 0 and 0 < ε ≤ 2"));
    }
    if epsilon < 2.0 && norm(x0) == 0.0 {
        return Err(Error::OriginPassage { t: 0.0, distance: 0.0 });
    }
    let steps = (t_end.abs() / dt).round() as usize;
    let h = dt * t_end.signum();
    let stride = steps.div_ceil(MAX_SAMPLES).max(1);
    let d = x0.len();
    let (mut x, mut p) = (x0.to_vec(), p0.to_vec());
    let mut a = vec![0.0; d];
    force(&x, epsilon, &mut a);
    let e0 = energy(&x, &p, epsilon);
    let mut drift: f64 = 0.0;
    let mut scale = e0.abs();
    let mut traj = Trajectory {
        times: vec![0.0],
        positions: vec![x.clone()],
        momenta: vec![p.clone()],
        energy_drift: 0.0,
        epsilon,
        dt,
    };
    for k in 1..=steps {
        for i in 0..d {
            p[i] += 0.5 * h * a[i];
            x[i] += h * p[i];
        }
        let r = norm(&x);
        let t = k as f64 * h;
        if epsilon < 2.0 && r < 10.0 * dt * norm(&p).max(1.0) {
            return Err(Error::OriginPassage { t, distance: r });
        }
        force(&x, epsilon, &mut a);
        for i in 0..d {
            p[i] += 0.5 * h * a[i];
        }
        let kin = 0.5 * p.iter().map(|v| v * v).sum::<f64>();
        scale = scale.max(kin).max(r.powf(epsilon));
        drift = drift.max((kin - r.powf(epsilon) - e0).abs());
        if k % stride == 0 || k == steps {
            traj.times.push(t);
            traj.positions.push(x.clone());
            traj.momenta.push(p.clone());
        }
    }
    traj.energy_drift = if scale > 0.0 { drift / scale } else { drift };
    Ok(traj)
}

/// Relative change of the final position when `dt` is halved.
pub fn halving_check(x0: &[f64], p0: &[f64], epsilon: f64, t_end: f64, dt: f64) -> Result<f64> {
    let a = integrate_orbit(x0, p0, epsilon, t_end, dt)?;
    let b = integrate_orbit(x0, p0, epsilon, t_end, dt / 2.0)?;
    let (xa, xb) = (a.positions.last().unwrap(), b.positions.last().unwrap());
    let diff: Vec<f64> = xa.iter().zip(xb).map(|(u, v)| u - v).collect();
    Ok(norm(&diff) / norm(xb))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum GrowthClass {
    Exponential { rate: f64 },
    Power { alpha: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsymptoticRate {
    pub growth: GrowthClass,
    pub r2_exp: f64,
    pub r2_pow: f64,
    /// Mean of `|y(t)|/t` over the last decade.
    pub y_over_t_plateau: f64,
    /// `(max − min)/mean` of `|y(t)|/t` over the last decade.
    pub plateau_variation: f64,
    /// Mean of `f(r(x(t)))/t` over the last decade.
    pub f_over_t_plateau: f64,
    pub f_plateau_variation: f64,
}

/// `|y| = |x|^{1−ε/2}` for `ε < 2`, `log|x|` at `ε = 2`.
pub fn y_magnitude(r: f64, epsilon: f64) -> f64 {
    if epsilon == 2.0 {
        r.ln()
    } else {
        r.powf(1.0 - epsilon / 2.0)
    }
}

/// Least-squares slope and `R²` of `ys` against `xs`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, r2)
}

fn plateau(vals: &[f64]) -> (f64, f64) {
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (mean, (hi - lo) / mean)
}

/// Fits over the last decade `t ∈ [T/10, T]`.
pub fn asymptotic_rate(traj: &Trajectory) -> Result<AsymptoticRate> {
    let t_end = *traj.times.last().unwrap();
    let r0 = norm(&traj.positions[0]);
    let r_end = norm(traj.positions.last().unwrap());
    if !(r_end > 10.0 * r0) || t_end <= 0.0 {
        return Err(Error::Undecided {
            r2_exp: f64::NAN,
            r2_pow: f64::NAN,
        });
    }
    let idx: Vec<usize> = (0..traj.times.len()).filter(|&i| traj.times[i] >= t_end / 10.0).collect();
    if idx.len() < 8 {
        return Err(Error::invalid("too few samples in the last decade"));
    }
    let t: Vec<f64> = idx.iter().map(|&i| traj.times[i]).collect();
    let r: Vec<f64> = idx.iter().map(|&i| norm(&traj.positions[i])).collect();
    let logr: Vec<f64> = r.iter().map(|v| v.ln()).collect();
    let logt: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let (rate, r2_exp) = linear_fit(&t, &logr);
    let (alpha, r2_pow) = linear_fit(&logt, &logr);
    let growth = if r2_exp.max(r2_pow) < 0.999 {
        return Err(Error::Undecided { r2_exp, r2_pow });
    } else if r2_exp >= r2_pow {
        GrowthClass::Exponential { rate }
    } else {
        GrowthClass::Power { alpha }
    };
    let eps = traj.epsilon;
    let yt: Vec<f64> = r.iter().zip(&t).map(|(rv, tv)| y_magnitude(*rv, eps) / tv).collect();
    let ft: Vec<f64> = r.iter().zip(&t).map(|(rv, tv)| geometry::flow(*rv, eps) / tv).collect();
    let (y_over_t_plateau, plateau_variation) = plateau(&yt);
    let (f_over_t_plateau, f_plateau_variation) = plateau(&ft);
    Ok(AsymptoticRate {
        growth,
        r2_exp,
        r2_pow,
        y_over_t_plateau,
        plateau_variation,
        f_over_t_plateau,
        f_plateau_variation,
    })
}

/// Closed-form one-dimensional solution at `ε = 2`.
pub fn exact_quadratic_orbit(x0: f64, p0: f64, t: f64) -> f64 {
    let s = std::f64::consts::SQRT_2;
    0.5 * (x0 + p0 / s) * (s * t).exp() + 0.5 * (x0 - p0 / s) * (-s * t).exp()
}

/// Self-similar escaping solution `x(t) = c t^α` with `α = 1/(1−ε/2)` and
/// `c^{2−ε} = ½(2−ε)²`. Returns `(x, ẋ)` at `t`.
pub fn self_similar_orbit(epsilon: f64, t: f64) -> (f64, f64) {
    let alpha = 2.0 / (2.0 - epsilon);
    let c = (0.5 * (2.0 - epsilon).powi(2)).powf(1.0 / (2.0 - epsilon));
    (c * t.powf(alpha), c * alpha * t.powf(alpha - 1.0))
}

impl Trajectory {
    pub const CSV_HEADER_1D: &'static str = "t,x,p,E,y_over_t";

    /// `t, x, p, E, y_over_t` in one dimension; components `x1..xd, p1..pd`
    /// otherwise.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let d = self.positions[0].len();
        if d == 1 {
            writeln!(w, "{}", Self::CSV_HEADER_1D)?;
        } else {
            let xs: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
            let ps: Vec<String> = (1..=d).map(|k| format!("p{k}")).collect();
            writeln!(w, "t,{},{},E,y_over_t", xs.join(","), ps.join(","))?;
        }
        for i in 0..self.times.len() {
            let (x, p, t) = (&self.positions[i], &self.momenta[i], self.times[i]);
            let yt = if t != 0.0 {
                y_magnitude(norm(x), self.epsilon) / t
            } else {
                f64::NAN
            };
            let join = |v: &[f64]| v.iter().map(|c| format!("{c:e}")).collect::<Vec<_>>().join(",");
            writeln!(w, "{t},{},{},{:e},{:e}", join(x), join(p), energy(x, p, self.epsilon), yt)?;
        }
        Ok(())
    }
}
