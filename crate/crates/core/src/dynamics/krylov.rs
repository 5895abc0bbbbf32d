//! Arnoldi approximations of `exp(tA) v` and of the φ1 step
//! `x + t φ1(tA) (A x)` with a posteriori error control.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::dynamics::state::{dot, norm};
use crate::error::{Error, Result};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
/// Safety factors of the step-size controller.
const SHRINK: f64 = 0.9;
const ACCEPT: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOptions {
    /// Maximal Krylov subspace dimension.
    pub m: usize,
    /// Local error tolerance per unit time.
    pub tol: f64,
    /// Maximal number of accepted plus rejected steps per call.
    pub max_steps: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions {
            m: 30,
            tol: 1e-10,
            max_steps: 1_000_000,
        }
    }
}

/// Orthonormal basis `V` and Hessenberg matrix of one Arnoldi run.
pub(crate) struct Arnoldi {
    v: Vec<Vec<C64>>,
    h: DMatrix<C64>,
    /// Number of completed columns (smaller than `m` after a happy breakdown).
    mb: usize,
    beta: f64,
    breakdown: bool,
    /// `|| A v_{m+1} ||`, used by the error estimate.
    avnorm: f64,
}

impl Arnoldi {
    /// Builds a `m`-step decomposition started from `w`.
    pub(crate) fn build<F>(apply: &F, w: &[C64], m: usize, anorm: f64) -> Result<Arnoldi>
    where
        F: Fn(&[C64], &mut [C64]),
    {
        let n = w.len();
        let m = m.min(n).max(1);
        let beta = norm(w);
        if !beta.is_finite() {
            return Err(Error::KrylovBreakdown(format!("start vector norm {beta}")));
        }
        let mut v = Vec::with_capacity(m + 1);
        v.push(w.iter().map(|x| x / beta).collect::<Vec<_>>());
        let mut h = DMatrix::<C64>::zeros(m + 2, m + 2);
        let btol = 1e-14 * anorm.max(1.0);
        let mut p = vec![ZERO; n];
        for j in 0..m {
            apply(&v[j], &mut p);
            // two passes of modified Gram-Schmidt
            for _ in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let c = dot(vi, &p);
                    h[(i, j)] += c;
                    p.iter_mut().zip(vi).for_each(|(pk, vk)| *pk -= c * vk);
                }
            }
            let s = norm(&p);
            if !s.is_finite() {
                return Err(Error::KrylovBreakdown("non-finite Arnoldi vector".into()));
            }
            if s <= btol {
                return Ok(Arnoldi {
                    v,
                    h,
                    mb: j + 1,
                    beta,
                    breakdown: true,
                    avnorm: 0.0,
                });
            }
            h[(j + 1, j)] = C64::new(s, 0.0);
            v.push(p.iter().map(|x| x / s).collect());
        }
        apply(&v[m], &mut p);
        let avnorm = norm(&p);
        Ok(Arnoldi {
            v,
            h,
            mb: m,
            beta,
            breakdown: false,
            avnorm,
        })
    }

    /// `exp(tau Ĥ)` for the expokit-augmented Hessenberg matrix.
    fn exp_augmented(&self, tau: f64) -> DMatrix<C64> {
        let mb = self.mb;
        if self.breakdown {
            let hm = self.h.view((0, 0), (mb, mb)).into_owned();
            return (hm * C64::new(tau, 0.0)).exp();
        }
        let mut hm = self.h.view((0, 0), (mb + 2, mb + 2)).into_owned();
        hm[(mb + 1, mb)] = C64::new(1.0, 0.0);
        (hm * C64::new(tau, 0.0)).exp()
    }

    /// Coefficients of `beta exp(tau H) e1` on the basis vectors, and the
    /// local error estimate of the step.
    pub(crate) fn exp_coefficients(&self, tau: f64) -> (Vec<C64>, f64) {
        let f = self.exp_augmented(tau);
        if self.breakdown {
            let coef = (0..self.mb).map(|i| f[(i, 0)] * self.beta).collect();
            return (coef, 0.0);
        }
        let m = self.mb;
        let phi1 = (f[(m, 0)] * self.beta).norm();
        let phi2 = (f[(m + 1, 0)] * self.beta * self.avnorm).norm();
        let err = if phi1 > 10.0 * phi2 {
            phi2
        } else if phi1 > phi2 {
            phi1 * phi2 / (phi1 - phi2)
        } else {
            phi1
        };
        let coef = (0..=m).map(|i| f[(i, 0)] * self.beta).collect();
        (coef, err)
    }

    /// Coefficients of `beta tau φ1(tau H) e1` and the error estimate
    /// `beta h_{m+1,m} tau^2 |e_m^T φ2(tau H) e1|`.
    pub(crate) fn phi1_coefficients(&self, tau: f64) -> (Vec<C64>, f64) {
        let mb = self.mb;
        let size = mb + 2;
        let mut a = DMatrix::<C64>::zeros(size, size);
        a.view_mut((0, 0), (mb, mb))
            .copy_from(&self.h.view((0, 0), (mb, mb)));
        a[(0, mb)] = C64::new(1.0, 0.0);
        a[(mb, mb + 1)] = C64::new(1.0, 0.0);
        let f = (a * C64::new(tau, 0.0)).exp();
        let coef: Vec<C64> = (0..mb).map(|i| f[(i, mb)] * self.beta).collect();
        let err = if self.breakdown {
            0.0
        } else {
            self.beta * self.h[(mb, mb - 1)].norm() * f[(mb - 1, mb + 1)].norm()
        };
        (coef, err)
    }

    /// `sum_i coef_i v_i`
    pub(crate) fn combine(&self, coef: &[C64]) -> Vec<C64> {
        let n = self.v[0].len();
        let mut out = vec![ZERO; n];
        for (c, vi) in coef.iter().zip(&self.v) {
            out.iter_mut().zip(vi).for_each(|(o, x)| *o += c * x);
        }
        out
    }
}

/// Initial step heuristic of expokit.
fn initial_step(m: usize, anorm: f64, beta: f64, tol: f64) -> f64 {
    let anorm = anorm.max(1e-300);
    let mf = (m + 1) as f64;
    let fact = (mf / std::f64::consts::E).powf(mf) * (2.0 * std::f64::consts::PI * mf).sqrt();
    let t = (1.0 / anorm) * ((fact * tol) / (4.0 * beta.max(1e-300) * anorm)).powf(1.0 / m as f64);
    if t.is_finite() && t > 0.0 {
        t
    } else {
        1.0 / anorm
    }
}

fn next_step(tau: f64, tol: f64, err: f64, m: usize) -> f64 {
    if err <= 0.0 {
        return tau * 10.0;
    }
    (SHRINK * tau * (tau * tol / err).powf(1.0 / m as f64)).min(10.0 * tau)
}

/// Adaptive stepper shared by the exponential and φ1 integrators.
#[derive(Debug, Clone)]
pub struct KrylovStepper {
    opts: KrylovOptions,
    anorm: f64,
    suggested: Option<f64>,
    pub steps: usize,
    pub rejections: usize,
}

impl KrylovStepper {
    /// `anorm` is an upper estimate of `||A||`.
    pub fn new(opts: KrylovOptions, anorm: f64) -> Self {
        KrylovStepper {
            opts,
            anorm: anorm.max(1e-12),
            suggested: None,
            steps: 0,
            rejections: 0,
        }
    }

    pub fn options(&self) -> KrylovOptions {
        self.opts
    }

    fn budget(&mut self) -> Result<()> {
        if self.steps + self.rejections >= self.opts.max_steps {
            return Err(Error::KrylovBreakdown(format!(
                "step budget of {} exhausted",
                self.opts.max_steps
            )));
        }
        Ok(())
    }

    fn trial(&self, beta: f64) -> f64 {
        self.suggested
            .unwrap_or_else(|| initial_step(self.opts.m, self.anorm, beta, self.opts.tol))
    }

    /// One accepted step of `exp(tau A)` with `tau <= remaining`.
    /// Returns the new vector, the step taken and the decomposition used.
    pub(crate) fn exp_step<F>(
        &mut self,
        apply: &F,
        w: &[C64],
        remaining: f64,
    ) -> Result<(Vec<C64>, f64, Arnoldi)>
    where
        F: Fn(&[C64], &mut [C64]),
    {
        let arn = Arnoldi::build(apply, w, self.opts.m, self.anorm)?;
        if arn.beta == 0.0 {
            return Ok((w.to_vec(), remaining, arn));
        }
        let mut tau = self.trial(arn.beta).min(remaining);
        if arn.breakdown {
            tau = remaining;
        }
        loop {
            self.budget()?;
            let (coef, err) = arn.exp_coefficients(tau);
            if err <= ACCEPT * tau * self.opts.tol || arn.breakdown {
                self.steps += 1;
                self.suggested = Some(next_step(tau, self.opts.tol, err, self.opts.m));
                return Ok((arn.combine(&coef), tau, arn));
            }
            self.rejections += 1;
            tau = next_step(tau, self.opts.tol, err, self.opts.m).min(0.5 * tau);
            if tau < 1e-14 * remaining.max(1.0) {
                return Err(Error::KrylovBreakdown("step size underflow".into()));
            }
        }
    }

    /// Advances `w` by `t` under `exp(tA)`.
    pub fn expv<F>(&mut self, apply: &F, w: &[C64], t: f64) -> Result<Vec<C64>>
    where
        F: Fn(&[C64], &mut [C64]),
    {
        let mut w = w.to_vec();
        let mut done = 0.0;
        while t - done > 1e-14 * t.max(1.0) {
            let (next, tau, _) = self.exp_step(apply, &w, t - done)?;
            w = next;
            done += tau;
        }
        Ok(w)
    }

    /// Advances `x` by `t` solving `x' = A x` through `x <- x + tau φ1(tau A)(A x)`.
    ///
    /// Any linear functional annihilated by `A` is conserved exactly by each
    /// step, since the correction lies in the range of `A`.
    pub fn phiv<F>(&mut self, apply: &F, x: &[C64], t: f64) -> Result<Vec<C64>>
    where
        F: Fn(&[C64], &mut [C64]),
    {
        let mut x = x.to_vec();
        let mut done = 0.0;
        let mut ax = vec![ZERO; x.len()];
        while t - done > 1e-14 * t.max(1.0) {
            apply(&x, &mut ax);
            let arn = Arnoldi::build(apply, &ax, self.opts.m, self.anorm)?;
            if arn.beta == 0.0 {
                break;
            }
            let remaining = t - done;
            let mut tau = self
                .suggested
                .unwrap_or_else(|| initial_step(self.opts.m, self.anorm, arn.beta, self.opts.tol))
                .min(remaining);
            if arn.breakdown {
                tau = remaining;
            }
            let scale = norm(&x).max(1e-300);
            loop {
                self.budget()?;
                let (coef, err) = arn.phi1_coefficients(tau);
                let err = err / scale;
                if err <= ACCEPT * tau * self.opts.tol || arn.breakdown {
                    self.steps += 1;
                    self.suggested = Some(next_step(tau, self.opts.tol, err, self.opts.m));
                    let dx = arn.combine(&coef);
                    x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
                    done += tau;
                    break;
                }
                self.rejections += 1;
                tau = next_step(tau, self.opts.tol, err, self.opts.m).min(0.5 * tau);
                if tau < 1e-14 * remaining.max(1.0) {
                    return Err(Error::KrylovBreakdown("step size underflow".into()));
                }
            }
        }
        Ok(x)
    }
}
