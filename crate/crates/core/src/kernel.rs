//! Sampled relaxation kernels.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel samples on strictly increasing times from 0; each sample holds one
/// value (scalar kernel) or nine (row-major 3x3).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeKernel {
    times: Vec<f64>,
    width: usize,
    values: Vec<f64>,
    /// Fitted asymptotic decay rate of the leading entry.
    pub decay_rate: Option<f64>,
}

impl TimeKernel {
    pub fn new(times: Vec<f64>, width: usize, values: Vec<f64>) -> Result<Self> {
        if width != 1 && width != 9 {
            return Err(Error::Parameter(format!("kernel width must be 1 or 9, got {width}")));
        }
        if times.first() != Some(&0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parameter("kernel times must increase strictly from 0".into()));
        }
        if values.len() != times.len() * width {
            return Err(Error::Parameter("kernel sample count does not match its times".into()));
        }
        let mut k = Self {
            times,
            width,
            values,
            decay_rate: None,
        };
        k.decay_rate = k.fit_decay_rate(0);
        Ok(k)
    }

    pub fn scalar(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(times, 1, values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("nonempty kernel")
    }

    pub fn sample(&self, k: usize) -> &[f64] {
        &self.values[k * self.width..(k + 1) * self.width]
    }

    /// Series of one entry (`entry = 3i + j` for matrix kernels).
    pub fn entry(&self, entry: usize) -> Vec<f64> {
        (0..self.len()).map(|k| self.values[k * self.width + entry]).collect()
    }

    /// Linear interpolation of one entry; errors beyond the horizon.
    pub fn eval(&self, entry: usize, t: f64) -> Result<f64> {
        if t < 0.0 || t > self.horizon() * (1.0 + 1e-12) {
            return Err(Error::Configuration(format!(
                "kernel history exhausted: t = {t} exceeds the kernel horizon {}; compute a longer kernel",
                self.horizon()
            )));
        }
        let k = self.times.partition_point(|&s| s <= t).saturating_sub(1);
        if k + 1 >= self.len() {
            return Ok(self.values[(self.len() - 1) * self.width + entry]);
        }
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let (v0, v1) = (
            self.values[k * self.width + entry],
            self.values[(k + 1) * self.width + entry],
        );
        Ok(v0 + (v1 - v0) * (t - t0) / (t1 - t0))
    }

    /// Trapezoidal integral of each entry over the sampled horizon.
    pub fn integral(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        for k in 1..self.len() {
            let dt = self.times[k] - self.times[k - 1];
            for (e, o) in out.iter_mut().enumerate() {
                *o += 0.5 * dt * (self.values[(k - 1) * self.width + e] + self.values[k * self.width + e]);
            }
        }
        out
    }

    /// Log-linear fit over the tail where the entry is positive and below a
    /// tenth of its initial value.
    fn fit_decay_rate(&self, entry: usize) -> Option<f64> {
        let v = self.entry(entry);
        let v0 = v[0].abs();
        let pts: Vec<(f64, f64)> = self
            .times
            .iter()
            .zip(&v)
            .filter(|&(_, &x)| x > 0.0 && x < 0.1 * v0 && x > 1e-12 * v0)
            .map(|(&t, &x)| (t, x.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let (st, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let (mt, my) = (st / n, sy / n);
        let (num, den) = pts
            .iter()
            .fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mt) * (p.1 - my), a.1 + (p.0 - mt).powi(2)));
        (den > 0.0).then(|| -num / den)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        if self.width == 1 {
            writeln!(w, "t,value")?;
        } else {
            writeln!(w, "t,v11,v12,v13,v21,v22,v23,v31,v32,v33")?;
        }
        for k in 0..self.len() {
            let row: Vec<String> = self.sample(k).iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{:e},{}", self.times[k], row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        let mut width = None;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if lineno == 0 || line.trim().is_empty() {
                continue;
            }
            let nums: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parameter(format!("kernel csv line {}: {e}", lineno + 1)))?;
            let w = *width.get_or_insert(nums.len() - 1);
            if nums.len() - 1 != w {
                return Err(Error::Parameter(format!("kernel csv line {} has the wrong width", lineno + 1)));
            }
            times.push(nums[0]);
            values.extend_from_slice(&nums[1..]);
        }
        Self::new(times, width.unwrap_or(1), values)
    }
}

/// Positive exponential sum `Σ w_k exp(-r_k t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpSum {
    pub weights: Vec<f64>,
    pub rates: Vec<f64>,
}

impl ExpSum {
    pub fn eval(&self, t: f64) -> f64 {
        self.weights.iter().zip(&self.rates).map(|(w, r)| w * (-r * t).exp()).sum()
    }

    pub fn integral(&self) -> f64 {
        self.weights.iter().zip(&self.rates).map(|(w, r)| w / r).sum()
    }

    /// Single mode `w exp(-r t)`.
    pub fn single(weight: f64, rate: f64) -> Self {
        Self {
            weights: vec![weight],
            rates: vec![rate],
        }
    }

    /// Nonnegative least-squares fit of one kernel entry with at most `modes`
    /// terms. Candidate rates are log-spaced; heavily weighted rows pin the
    /// initial value and the time integral (sampled part plus exponential tail).
    pub fn fit(kernel: &TimeKernel, entry: usize, modes: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::Parameter("exponential fit needs at least one mode".into()));
        }
        let v = kernel.entry(entry);
        let t = kernel.times();
        let v0 = v[0];
        if v0 <= 0.0 {
            return Ok(Self {
                weights: Vec::new(),
                rates: Vec::new(),
            });
        }
        let horizon = kernel.horizon();
        let t1 = t.get(1).copied().unwrap_or(horizon);
        let (r_lo, r_hi) = (0.5 / horizon, 4.0 / t1);
        let count = 4 * modes.max(2);
        let rates: Vec<f64> = (0..count)
            .map(|k| r_lo * (r_hi / r_lo).powf(k as f64 / (count - 1) as f64))
            .collect();
        let last = *v.last().unwrap_or(&0.0);
        let tail = match kernel.fit_decay_rate(entry) {
            Some(r) if r > 0.0 && last > 0.0 => last / r,
            _ => 0.0,
        };
        let target = kernel.integral()[entry] + tail;

        let design = |rates: &[f64]| {
            let rows = t.len() + 2;
            let mut a = DMatrix::zeros(rows, rates.len());
            let mut b = DVector::zeros(rows);
            for (i, &ti) in t.iter().enumerate() {
                // interval weights make the fit a quadrature-weighted L2 fit
                let lo = if i == 0 { 0.0 } else { t[i - 1] };
                let hi = if i + 1 == t.len() { ti } else { t[i + 1] };
                let w = (0.5 * (hi - lo)).max(1e-300).sqrt();
                for (j, &r) in rates.iter().enumerate() {
                    a[(i, j)] = w * (-r * ti).exp();
                }
                b[i] = w * v[i];
            }
            let norm = a.rows(0, t.len()).norm();
            let pin = 1e1 * norm / v0.abs();
            let moment = if target > 0.0 { norm / target } else { 0.0 };
            for (j, &r) in rates.iter().enumerate() {
                a[(t.len(), j)] = pin;
                a[(t.len() + 1, j)] = moment / r;
            }
            b[t.len()] = pin * v0;
            b[t.len() + 1] = moment * target;
            (a, b)
        };

        let (a, b) = design(&rates);
        let mut picked: Vec<(f64, f64)> = nnls(&a, &b, 500)
            .into_iter()
            .zip(rates)
            .filter(|(w, _)| *w > 0.0)
            .collect();
        if picked.len() > modes {
            picked.sort_by(|x, y| (y.0 / y.1).total_cmp(&(x.0 / x.1)));
            picked.truncate(modes);
            let sub: Vec<f64> = picked.iter().map(|p| p.1).collect();
            let (a, b) = design(&sub);
            picked = nnls(&a, &b, 500).into_iter().zip(sub).filter(|(w, _)| *w > 0.0).collect();
        }
        picked.sort_by(|x, y| x.1.total_cmp(&y.1));
        let (weights, rates): (Vec<f64>, Vec<f64>) = picked.into_iter().unzip();
        let mut fit = Self { weights, rates };
        // exact initial value
        let s: f64 = fit.weights.iter().sum();
        if s > 0.0 {
            fit.weights.iter_mut().for_each(|w| *w *= v0 / s);
        }
        Ok(fit)
    }
}

/// Lawson–Hanson active-set nonnegative least squares.
fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, max_iter: usize) -> Vec<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * a.norm() * b.norm();
    for _ in 0..max_iter {
        let w = a.transpose() * (b - a * &x);
        let cand = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = cand else { break };
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let sub = DMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])]);
            let Ok(z) = sub.clone().svd(true, true).solve(b, 1e-14) else { break };
            if z.iter().all(|&v| v > 0.0) {
                for (c, &k) in idx.iter().enumerate() {
                    x[k] = z[c];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (c, &k) in idx.iter().enumerate() {
                if z[c] <= 0.0 {
                    alpha = alpha.min(x[k] / (x[k] - z[c]));
                }
            }
            for (c, &k) in idx.iter().enumerate() {
                x[k] += alpha * (z[c] - x[k]);
                if x[k] <= 1e-15 {
                    x[k] = 0.0;
                    passive[k] = false;
                }
            }
        }
    }
    x.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_kernel() -> TimeKernel {
        let times: Vec<f64> = (0..=400).map(|k| k as f64 * 0.01).collect();
        let values = times.iter().map(|t| 0.3 * (-2.0 * t).exp() + 0.1 * (-20.0 * t).exp()).collect();
        TimeKernel::scalar(times, values).unwrap()
    }

    #[test]
    fn decay_rate_and_integral() {
        let k = exp_kernel();
        assert!((k.decay_rate.unwrap() - 2.0).abs() < 0.05);
        let exact = 0.3 / 2.0 * (1.0 - (-8.0f64).exp()) + 0.1 / 20.0;
        assert!((k.integral()[0] - exact).abs() < 1e-4);
        assert!(k.eval(0, 5.0).is_err());
        assert!((k.eval(0, 0.005).unwrap() - 0.5 * (k.sample(0)[0] + k.sample(1)[0])).abs() < 1e-15);
    }

    #[test]
    fn exponential_fit_reproduces_samples() {
        let k = exp_kernel();
        let fit = ExpSum::fit(&k, 0, 24).unwrap();
        assert!(fit.weights.iter().all(|&w| w > 0.0));
        assert!((fit.eval(0.0) - 0.4).abs() < 1e-12);
        for (i, &t) in k.times().iter().enumerate().step_by(10) {
            assert!((fit.eval(t) - k.sample(i)[0]).abs() < 2e-3, "t={t}");
        }
    }

    #[test]
    fn csv_roundtrip() {
        let k = TimeKernel::new(vec![0.0, 0.5], 9, (0..18).map(|v| v as f64).collect()).unwrap();
        let mut buf = Vec::new();
        k.write_csv(&mut buf).unwrap();
        let back = TimeKernel::read_csv(&buf[..]).unwrap();
        assert_eq!(back.times(), k.times());
        assert_eq!(back.entry(4), k.entry(4));
    }
}
