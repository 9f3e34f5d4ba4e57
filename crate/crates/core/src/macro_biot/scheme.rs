use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::coeffs::MacroCoefficients;
use super::forcing::{Forcing, InitialData};
use super::params::{select_regime, thermal_closure, DarcyLaw, Regime, RegimeParameters, ThermalClosure};
use crate::error::{Error, Result};

/// Which skeleton-velocity term the memory and algebraic Darcy laws carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DarcyForm {
    /// `∂w^f/∂t = m ∂u/∂t + …`
    #[default]
    Mixture,
    /// `∂w^f/∂t = ∂u/∂t + …`
    Unweighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroConfig {
    /// Number of cells on `(0, 1)`.
    pub nx: usize,
    pub dt: f64,
    pub horizon: f64,
    #[serde(default)]
    pub darcy_form: DarcyForm,
}

impl MacroConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 {
            return Err(Error::Parameter(format!("nx must be at least 2, got {}", self.nx)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Parameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= self.dt) {
            return Err(Error::Parameter(format!("horizon {} is shorter than dt {}", self.horizon, self.dt)));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt - 1e-9).ceil() as usize
    }
}

/// Column state. Nodal fields have `nx + 1` entries including the clamped
/// ends; `p`, `q`, `pi` live on the `nx` cell midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroState {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    pub wf: Vec<f64>,
    pub theta_f: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub pi: Vec<f64>,
    pub mean_q: f64,
    pub mean_theta: f64,
    pub mean_theta_f: f64,
    pub beta: f64,
    pub gamma_f: f64,
    pub gamma_s: f64,
    y: Vec<f64>,
    /// Free fluid temperature for the inviscid closure.
    theta_f_free: Vec<f64>,
}

impl MacroState {
    pub fn max_abs(&self) -> f64 {
        [&self.u, &self.v, &self.theta, &self.wf, &self.theta_f, &self.p, &self.q, &self.pi]
            .iter()
            .flat_map(|f| f.iter())
            .fold(0.0f64, |a, x| a.max(x.abs()))
    }

    /// Per-node rows `x,u,theta,wf,theta_f,p,q,pi`; cell fields are averaged
    /// onto nodes.
    pub fn csv_rows(&self, step: usize) -> Vec<String> {
        let nc = self.q.len();
        let at = |f: &[f64], j: usize| -> f64 {
            match j {
                0 => f[0],
                j if j == nc => f[nc - 1],
                j => 0.5 * (f[j - 1] + f[j]),
            }
        };
        (0..=nc)
            .map(|j| {
                format!(
                    "{step},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                    self.t,
                    self.x[j],
                    self.u[j],
                    self.theta[j],
                    self.wf[j],
                    self.theta_f[j],
                    at(&self.p, j),
                    at(&self.q, j),
                    at(&self.pi, j)
                )
            })
            .collect()
    }
}

pub const CSV_HEADER: &str = "step,t,x,u,theta,wf,theta_f,p,q,pi";

/// Samples of the Darcy driving force `−∇q/m + ρ_f F − τ0 ρ_f ∂²u/∂t²` with
/// their quadrature weights.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegimeHistory {
    pub times: Vec<f64>,
    pub weights: Vec<f64>,
    pub samples: Vec<Vec<f64>>,
}

impl RegimeHistory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn elapsed(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Right-endpoint convolution `Σ_j B(t − t_j) g_j Δt_j` at the last sample time.
    pub fn convolve(&self, kernel: impl Fn(f64) -> f64) -> Vec<f64> {
        let Some(&t) = self.times.last() else { return Vec::new() };
        let mut out = vec![0.0; self.samples[0].len()];
        for ((tj, wj), g) in self.times.iter().zip(&self.weights).zip(&self.samples) {
            let b = kernel(t - tj) * wj;
            out.iter_mut().zip(g).for_each(|(o, x)| *o += b * x);
        }
        out
    }
}

/// Per-cell linear response coefficients after eliminating `π` and `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedCoefficients {
    /// Velocity weight in `∂w^f/∂t = κ ∂u/∂t + …`.
    pub kappa: f64,
    pub rho_u: f64,
    pub sigma_eps: f64,
    pub sigma_er: f64,
    pub sigma_t: f64,
    pub s_eps: f64,
    pub s_er: f64,
    pub s_t: f64,
    pub p_eps: f64,
    pub p_er: f64,
    pub p_t: f64,
    pub heat_eps: f64,
    pub heat_er: f64,
}

impl ReducedCoefficients {
    pub fn new(c: &MacroCoefficients, p: &RegimeParameters, kappa: f64) -> Self {
        let m = c.m;
        let (l0, e0, bs) = (p.lambda0, p.eta0, p.beta0s);
        let a1 = c.a1;
        // a1 s = e_r − (C0 + ã0 − κ) ε + (β0s/η0) ã0 T
        let s_er = 1.0 / a1;
        let s_eps = -(c.c0 + c.a0_tilde - kappa) / a1;
        let s_t = bs / e0 * c.a0_tilde / a1;
        // π + ⟨q⟩ = −η0 (e_r + (κ + 1 − m) ε) + (1 − m) β0s T
        let p_er = -e0;
        let p_eps = -e0 * (kappa + 1.0 - m);
        let p_t = (1.0 - m) * bs;
        let g = l0 * c.b1 - 1.0;
        Self {
            kappa,
            rho_u: kappa * p.rho_f + (1.0 - m) * p.rho_s,
            sigma_eps: l0 * c.a0_1111 + l0 * c.b0 + g * s_eps - p_eps,
            sigma_er: g * s_er - p_er,
            sigma_t: -l0 * c.b0 * bs / e0 + g * s_t - p_t,
            s_eps,
            s_er,
            s_t,
            p_eps,
            p_er,
            p_t,
            heat_eps: bs * (kappa + 1.0 - m),
            heat_er: bs,
        }
    }

    /// Stored-energy matrix entries `(εε, εe_r symmetrized, e_r e_r)`.
    pub fn stiffness(&self, m: f64) -> (f64, f64, f64) {
        (self.sigma_eps, 0.5 * (self.sigma_er - self.s_eps / m), -self.s_er / m)
    }
}

#[derive(Debug, Clone)]
struct Layout {
    ni: usize,
    r: Option<usize>,
    z: usize,
    nz: usize,
    phi: usize,
    nphi: usize,
    mean: usize,
    len: usize,
}

impl Layout {
    fn u(&self, i: usize) -> usize {
        i
    }
    fn v(&self, i: usize) -> usize {
        self.ni + i
    }
    fn th(&self, i: usize) -> usize {
        2 * self.ni + i
    }
    fn r(&self, i: usize) -> usize {
        self.r.expect("relative displacement present") + i
    }
    fn z(&self, k: usize, i: usize) -> usize {
        self.z + k * self.ni + i
    }
    fn phi(&self, k: usize, i: usize) -> usize {
        self.phi + k * self.ni + i
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParts {
    pub kinetic: f64,
    pub elastic: f64,
    pub thermal: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.kinetic + self.elastic + self.thermal
    }
}

/// Backward-Euler discretization of one homogenized regime on a uniform
/// staggered column. The step matrix is factored once.
pub struct MacroModel {
    pub params: RegimeParameters,
    pub coeffs: MacroCoefficients,
    pub regime: Regime,
    pub closure: ThermalClosure,
    pub form: DarcyForm,
    pub reduced: ReducedCoefficients,
    cfg: MacroConfig,
    h: f64,
    layout: Layout,
    z_modes: Vec<(f64, f64)>,
    phi_modes: Vec<(f64, f64)>,
    b2: f64,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    old: DMatrix<f64>,
}

struct Assembly<'a> {
    a: &'a mut DMatrix<f64>,
    lay: &'a Layout,
    h: f64,
    nx: usize,
}

impl Assembly<'_> {
    fn node(&self, j: usize) -> Option<usize> {
        (j >= 1 && j < self.nx).then(|| j - 1)
    }

    fn add(&mut self, row: usize, col: usize, v: f64) {
        self.a[(row, col)] += v;
    }

    /// `coef · (f_{c+1} − f_c)/h` for a nodal block starting at `base`.
    fn grad(&mut self, row: usize, c: usize, base: usize, coef: f64) {
        if let Some(i) = self.node(c + 1) {
            self.add(row, base + i, coef / self.h);
        }
        if let Some(i) = self.node(c) {
            self.add(row, base + i, -coef / self.h);
        }
    }

    /// `coef · ((ϑ_c + ϑ_{c+1})/2 − ⟨ϑ⟩)`.
    fn deviation(&mut self, row: usize, c: usize, coef: f64) {
        for j in [c, c + 1] {
            if let Some(i) = self.node(j) {
                self.add(row, self.lay.th(i), 0.5 * coef);
            }
        }
        self.add(row, self.lay.mean, -coef);
    }

    fn cell_form(&mut self, row: usize, c: usize, eps: f64, er: f64, t: f64) {
        self.grad(row, c, 0, eps);
        if er != 0.0 {
            if let Some(r) = self.lay.r {
                self.grad(row, c, r, er);
            }
        }
        if t != 0.0 {
            self.deviation(row, c, t);
        }
    }
}

impl MacroModel {
    pub fn new(params: &RegimeParameters, coeffs: &MacroCoefficients, cfg: &MacroConfig) -> Result<Self> {
        cfg.validate()?;
        let form = cfg.darcy_form;
        params.validate()?;
        let coeffs = coeffs.reconciled(params.lambda0, params.eta0)?;
        let regime = select_regime(params, coeffs.fluid_connected)?;
        let closure = thermal_closure(regime, params)?;
        let m = coeffs.m;
        let two_velocity = matches!(regime, Regime::III(_));
        let kappa = match regime {
            Regime::III(DarcyLaw::Memory | DarcyLaw::Algebraic) if form == DarcyForm::Unweighted => 1.0,
            _ => m,
        };
        let reduced = ReducedCoefficients::new(&coeffs, params, kappa);
        let (k_ee, _, k_rr) = reduced.stiffness(m);
        if !(k_ee > 0.0) || (two_velocity && !(k_rr > 0.0)) {
            return Err(Error::Consistency(format!(
                "reduced column stiffness is not positive ({k_ee:e}, {k_rr:e})"
            )));
        }
        let tau_rho = params.tau0 * params.rho_f;
        let mut b2 = 0.0;
        let z_modes: Vec<(f64, f64)> = match regime {
            Regime::III(DarcyLaw::Memory) => {
                let k = coeffs
                    .b1_kernel
                    .as_ref()
                    .ok_or_else(|| Error::Configuration("regime III(a) needs the B1 kernel".into()))?;
                k.covers(cfg.horizon)?;
                k.fit.weights.iter().copied().zip(k.fit.rates.iter().copied()).collect()
            }
            Regime::III(DarcyLaw::Inviscid) => {
                let b3 = coeffs
                    .b3
                    .ok_or_else(|| Error::Configuration("regime III(c) needs B3".into()))?;
                let w = (m - b3) / tau_rho;
                if w < -1e-12 {
                    return Err(Error::Consistency(format!("m - B3_11 = {} is negative", m - b3)));
                }
                if w > 0.0 {
                    vec![(w, 0.0)]
                } else {
                    Vec::new()
                }
            }
            Regime::III(DarcyLaw::Algebraic) => {
                b2 = coeffs
                    .b2
                    .ok_or_else(|| Error::Configuration("regime III(b) needs B2".into()))?;
                if b2 < 0.0 {
                    return Err(Error::Consistency(format!("B2_11 = {b2} is negative")));
                }
                Vec::new()
            }
            _ => Vec::new(),
        };
        let phi_modes: Vec<(f64, f64)> = match closure {
            ThermalClosure::Kernel => {
                let k = coeffs
                    .b_theta_kernel
                    .as_ref()
                    .ok_or_else(|| Error::Configuration("this regime needs the b_theta kernel".into()))?;
                k.covers(cfg.horizon)?;
                k.fit.weights.iter().copied().zip(k.fit.rates.iter().copied()).collect()
            }
            ThermalClosure::Quasistatic => {
                coeffs
                    .c_theta_f
                    .ok_or_else(|| Error::Configuration("this regime needs c_theta_f".into()))?;
                Vec::new()
            }
            _ => Vec::new(),
        };
        if matches!(closure, ThermalClosure::Kernel | ThermalClosure::Inviscid) && params.c_pf <= 0.0 {
            return Err(Error::Parameter("fluid heat capacity c_pf must be positive".into()));
        }
        let ni = cfg.nx - 1;
        let mut off = 3 * ni;
        let r = two_velocity.then(|| {
            let o = off;
            off += ni;
            o
        });
        let z = off;
        off += z_modes.len() * ni;
        let phi = off;
        off += phi_modes.len() * ni;
        let layout = Layout {
            ni,
            r,
            z,
            nz: z_modes.len(),
            phi,
            nphi: phi_modes.len(),
            mean: off,
            len: off + 1,
        };
        let h = 1.0 / cfg.nx as f64;
        let mut model = Self {
            params: params.clone(),
            coeffs,
            regime,
            closure,
            form,
            reduced,
            cfg: cfg.clone(),
            h,
            layout,
            z_modes,
            phi_modes,
            b2,
            lu: DMatrix::<f64>::identity(1, 1).lu(),
            old: DMatrix::zeros(0, 0),
        };
        let (a, old) = model.assemble();
        let lu = a.lu();
        if !lu.is_invertible() {
            return Err(Error::Consistency("macroscale step matrix is singular".into()));
        }
        model.lu = lu;
        model.old = old;
        Ok(model)
    }

    pub fn config(&self) -> &MacroConfig {
        &self.cfg
    }

    pub fn unknowns(&self) -> usize {
        self.layout.len
    }

    /// Step matrix and the matrix applied to the previous state.
    fn assemble(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let lay = &self.layout;
        let (n, ni, nx, h, dt) = (lay.len, lay.ni, self.cfg.nx, self.h, self.cfg.dt);
        let p = &self.params;
        let rc = &self.reduced;
        let m = self.coeffs.m;
        let tau0 = p.tau0;
        let mut a = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, n);
        let s_form = |asm: &mut Assembly, row: usize, c: usize, coef: f64| {
            asm.cell_form(row, c, coef * rc.s_eps, coef * rc.s_er, coef * rc.s_t);
        };
        {
            let mut asm = Assembly { a: &mut a, lay, h, nx };
            for i in 0..ni {
                let j = i + 1;
                // kinematics
                asm.add(lay.u(i), lay.u(i), 1.0);
                asm.add(lay.u(i), lay.v(i), -dt);
                // momentum
                let row = lay.v(i);
                asm.add(row, lay.v(i), tau0 * rc.rho_u);
                for k in 0..lay.nz {
                    asm.add(row, lay.z(k, i), tau0 * p.rho_f);
                }
                asm.cell_form(row, j, -dt / h * rc.sigma_eps, -dt / h * rc.sigma_er, -dt / h * rc.sigma_t);
                asm.cell_form(row, j - 1, dt / h * rc.sigma_eps, dt / h * rc.sigma_er, dt / h * rc.sigma_t);
                // relative displacement and Darcy modes
                if lay.r.is_some() {
                    let row = lay.r(i);
                    asm.add(row, lay.r(i), 1.0);
                    if self.regime == Regime::III(DarcyLaw::Algebraic) {
                        let g = self.b2 * dt / (h * m);
                        s_form(&mut asm, row, j, g);
                        s_form(&mut asm, row, j - 1, -g);
                    } else {
                        for k in 0..lay.nz {
                            asm.add(row, lay.z(k, i), -dt);
                        }
                    }
                }
                for (k, &(w, rate)) in self.z_modes.iter().enumerate() {
                    let row = lay.z(k, i);
                    asm.add(row, lay.z(k, i), 1.0 + dt * rate);
                    asm.add(row, lay.v(i), w * tau0 * p.rho_f);
                    let g = w * dt / (h * m);
                    s_form(&mut asm, row, j, g);
                    s_form(&mut asm, row, j - 1, -g);
                }
                // heat storage
                let row = lay.th(i);
                self.heat_storage(&mut asm, row, i);
                let cond = dt * self.coeffs.btheta / (h * h);
                asm.add(row, lay.th(i), 2.0 * cond);
                if i > 0 {
                    asm.add(row, lay.th(i - 1), -cond);
                }
                if i + 1 < ni {
                    asm.add(row, lay.th(i + 1), -cond);
                }
                for (k, &(w, rate)) in self.phi_modes.iter().enumerate() {
                    let row = lay.phi(k, i);
                    asm.add(row, lay.phi(k, i), 1.0 + dt * rate);
                    asm.add(row, lay.th(i), w);
                }
                asm.add(lay.mean, lay.th(i), -h);
            }
            asm.add(lay.mean, lay.mean, 1.0);
        }
        {
            let mut asm = Assembly { a: &mut b, lay, h, nx };
            for i in 0..ni {
                asm.add(lay.u(i), lay.u(i), 1.0);
                let row = lay.v(i);
                asm.add(row, lay.v(i), tau0 * rc.rho_u);
                for k in 0..lay.nz {
                    asm.add(row, lay.z(k, i), tau0 * p.rho_f);
                }
                if lay.r.is_some() {
                    asm.add(lay.r(i), lay.r(i), 1.0);
                }
                for (k, &(w, _)) in self.z_modes.iter().enumerate() {
                    asm.add(lay.z(k, i), lay.z(k, i), 1.0);
                    asm.add(lay.z(k, i), lay.v(i), w * tau0 * p.rho_f);
                }
                self.heat_storage(&mut asm, lay.th(i), i);
                for (k, &(w, _)) in self.phi_modes.iter().enumerate() {
                    asm.add(lay.phi(k, i), lay.phi(k, i), 1.0);
                    asm.add(lay.phi(k, i), lay.th(i), w);
                }
            }
        }
        (a, b)
    }

    fn heat_storage(&self, asm: &mut Assembly, row: usize, i: usize) {
        let lay = &self.layout;
        let p = &self.params;
        let rc = &self.reduced;
        let m = self.coeffs.m;
        let j = i + 1;
        let mut local = p.tau0 * p.c_ps * (1.0 - m);
        match self.closure {
            ThermalClosure::Equilibrium => local += p.tau0 * p.c_pf * m,
            ThermalClosure::Kernel => {
                local += p.tau0 * p.c_pf * m;
                for k in 0..lay.nphi {
                    asm.add(row, lay.phi(k, i), p.tau0 * p.c_pf);
                }
            }
            ThermalClosure::Quasistatic | ThermalClosure::Inviscid => {}
        }
        asm.add(row, lay.th(i), local);
        asm.add(row, lay.mean, (1.0 - m) * p.beta0s * p.beta0s / p.eta0);
        for c in [j - 1, j] {
            asm.grad(row, c, 0, 0.5 * rc.heat_eps);
            if let Some(r) = lay.r {
                asm.grad(row, c, r, 0.5 * rc.heat_er);
            }
        }
    }

    fn x(&self, j: usize) -> f64 {
        j as f64 * self.h
    }

    fn forcing_vector(&self, f: &Forcing, psi: &Forcing, t: f64) -> DVector<f64> {
        let lay = &self.layout;
        let p = &self.params;
        let m = self.coeffs.m;
        let dt = self.cfg.dt;
        let mut rhs = DVector::zeros(lay.len);
        for i in 0..lay.ni {
            let x = self.x(i + 1);
            let fx = f.eval(x, t);
            let px = psi.eval(x, t);
            rhs[lay.v(i)] += dt * p.rho_hat(m) * fx;
            if lay.r.is_some() && self.regime == Regime::III(DarcyLaw::Algebraic) {
                rhs[lay.r(i)] += dt * self.b2 * p.rho_f * fx;
            }
            for (k, &(w, _)) in self.z_modes.iter().enumerate() {
                rhs[lay.z(k, i)] += w * dt * p.rho_f * fx;
            }
            let source = if self.closure == ThermalClosure::Inviscid { 1.0 - m } else { 1.0 };
            rhs[lay.th(i)] += dt * source * px;
            for (k, &(w, _)) in self.phi_modes.iter().enumerate() {
                rhs[lay.phi(k, i)] += w * dt * px / (p.tau0 * p.c_pf);
            }
        }
        rhs
    }

    pub fn initial_state(&self, init: &InitialData, psi: &Forcing) -> Result<MacroState> {
        for f in [&init.displacement, &init.velocity, &init.temperature] {
            f.validate()?;
        }
        let lay = &self.layout;
        let m = self.coeffs.m;
        let mut y = vec![0.0; lay.len];
        let mut mean = 0.0;
        for i in 0..lay.ni {
            let x = self.x(i + 1);
            y[lay.u(i)] = init.displacement.eval(x);
            y[lay.v(i)] = init.velocity.eval(x);
            y[lay.th(i)] = init.temperature.eval(x);
            mean += self.h * y[lay.th(i)];
            if self.regime == Regime::III(DarcyLaw::Inviscid) {
                for k in 0..lay.nz {
                    y[lay.z(k, i)] = (self.coeffs.b3.unwrap_or(m) - m) * y[lay.v(i)];
                }
            }
        }
        y[lay.mean] = mean;
        let free: Vec<f64> = (0..lay.ni).map(|i| m * y[lay.th(i)]).collect();
        Ok(self.state_from(0.0, y, free, init.mean_q, init.beta, psi))
    }

    /// Cell strains `(ε, e_r, T)` of an unknown vector.
    fn cells(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let lay = &self.layout;
        let nx = self.cfg.nx;
        let node = |base: Option<usize>, j: usize| -> f64 {
            match base {
                Some(b) if j >= 1 && j < nx => y[b + j - 1],
                _ => 0.0,
            }
        };
        let mut eps = vec![0.0; nx];
        let mut er = vec![0.0; nx];
        let mut dev = vec![0.0; nx];
        for c in 0..nx {
            eps[c] = (node(Some(0), c + 1) - node(Some(0), c)) / self.h;
            er[c] = (node(lay.r, c + 1) - node(lay.r, c)) / self.h;
            dev[c] = 0.5 * (node(Some(2 * lay.ni), c) + node(Some(2 * lay.ni), c + 1)) - y[lay.mean];
        }
        (eps, er, dev)
    }

    fn state_from(&self, t: f64, y: Vec<f64>, free: Vec<f64>, mean_q: f64, beta: f64, psi: &Forcing) -> MacroState {
        let lay = &self.layout;
        let p = &self.params;
        let rc = &self.reduced;
        let m = self.coeffs.m;
        let nx = self.cfg.nx;
        let nodal = |f: &dyn Fn(usize) -> f64| -> Vec<f64> {
            (0..=nx).map(|j| if j == 0 || j == nx { 0.0 } else { f(j - 1) }).collect()
        };
        let u = nodal(&|i| y[lay.u(i)]);
        let v = nodal(&|i| y[lay.v(i)]);
        let theta = nodal(&|i| y[lay.th(i)]);
        let wf = nodal(&|i| {
            let r = lay.r.map_or(0.0, |_| y[lay.r(i)]);
            r + rc.kappa * y[lay.u(i)]
        });
        let theta_f = nodal(&|i| match self.closure {
            ThermalClosure::Equilibrium => m * y[lay.th(i)],
            ThermalClosure::Kernel => m * y[lay.th(i)] + (0..lay.nphi).map(|k| y[lay.phi(k, i)]).sum::<f64>(),
            ThermalClosure::Quasistatic => {
                m * y[lay.th(i)] - self.coeffs.c_theta_f.unwrap_or(0.0) * psi.eval(self.x(i + 1), t)
            }
            ThermalClosure::Inviscid => free[i],
        });
        let (eps, er, dev) = self.cells(&y);
        let mean_theta_f = self.h * theta_f.iter().sum::<f64>();
        let mut pp = vec![0.0; nx];
        let mut q = vec![0.0; nx];
        let mut pi = vec![0.0; nx];
        for c in 0..nx {
            let s = rc.s_eps * eps[c] + rc.s_er * er[c] + rc.s_t * dev[c];
            let big_p = rc.p_eps * eps[c] + rc.p_er * er[c] + rc.p_t * dev[c];
            q[c] = mean_q + s;
            pi[c] = big_p - mean_q;
            let tf_c = 0.5 * (theta_f[c] + theta_f[c + 1]);
            pp[c] = s - p.beta0f * (tf_c - mean_theta_f);
        }
        MacroState {
            t,
            x: (0..=nx).map(|j| self.x(j)).collect(),
            u,
            v,
            theta,
            wf,
            theta_f,
            p: pp,
            q,
            pi,
            mean_q,
            mean_theta: y[lay.mean],
            mean_theta_f,
            beta,
            gamma_f: (mean_q - p.beta0f * mean_theta_f) / m,
            gamma_s: (mean_q / p.eta0 - beta) / (1.0 - m),
            y,
            theta_f_free: free,
        }
    }

    fn driver(&self, prev: &MacroState, y: &[f64], f: &Forcing, t: f64) -> Vec<f64> {
        let lay = &self.layout;
        let p = &self.params;
        let rc = &self.reduced;
        let m = self.coeffs.m;
        let (eps, er, dev) = self.cells(y);
        let s: Vec<f64> = (0..self.cfg.nx)
            .map(|c| rc.s_eps * eps[c] + rc.s_er * er[c] + rc.s_t * dev[c])
            .collect();
        (0..lay.ni)
            .map(|i| {
                let j = i + 1;
                -(s[j] - s[j - 1]) / (self.h * m) + p.rho_f * f.eval(self.x(j), t)
                    - p.tau0 * p.rho_f * (y[lay.v(i)] - prev.y[lay.v(i)]) / self.cfg.dt
            })
            .collect()
    }

    /// One implicit step with forcing evaluated at the new time level.
    pub fn step(&self, state: &MacroState, f: &Forcing, psi: &Forcing, history: &mut RegimeHistory) -> Result<MacroState> {
        let dt = self.cfg.dt;
        let t = state.t + dt;
        let yn = DVector::from_column_slice(&state.y);
        let rhs = &self.old * &yn + self.forcing_vector(f, psi, t);
        let y = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| Error::Consistency("macroscale step solve failed".into()))?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Consistency(format!("non-finite macroscale state at t = {t}")));
        }
        let y: Vec<f64> = y.iter().copied().collect();
        let m = self.coeffs.m;
        let free: Vec<f64> = if self.closure == ThermalClosure::Inviscid {
            let p = &self.params;
            state
                .theta_f_free
                .iter()
                .enumerate()
                .map(|(i, tf)| tf + dt * m * psi.eval(self.x(i + 1), t) / (p.tau0 * p.c_pf))
                .collect()
        } else {
            state.theta_f_free.clone()
        };
        history.times.push(t);
        history.weights.push(dt);
        history.samples.push(self.driver(state, &y, f, t));
        Ok(self.state_from(t, y, free, state.mean_q, state.beta, psi))
    }

    pub fn energy_parts(&self, s: &MacroState) -> EnergyParts {
        let lay = &self.layout;
        let p = &self.params;
        let m = self.coeffs.m;
        let h = self.h;
        let y = &s.y;
        let mut kinetic = 0.0;
        let mut thermal = 0.0;
        for i in 0..lay.ni {
            let v = y[lay.v(i)];
            let mut k = 0.5 * self.reduced.rho_u * v * v;
            for (kk, &(w, _)) in self.z_modes.iter().enumerate() {
                let z = y[lay.z(kk, i)];
                k += p.rho_f * v * z + 0.5 * z * z / (w * p.tau0);
            }
            kinetic += h * p.tau0 * k;
            let th = y[lay.th(i)];
            let mut e = p.tau0 * p.c_ps * (1.0 - m) * th * th;
            match self.closure {
                ThermalClosure::Equilibrium => e += p.tau0 * p.c_pf * m * th * th,
                ThermalClosure::Kernel => {
                    let mut f = m * th * th;
                    for (kk, &(w, _)) in self.phi_modes.iter().enumerate() {
                        let ph = y[lay.phi(kk, i)];
                        f += 2.0 * th * ph + ph * ph / w;
                    }
                    e += p.tau0 * p.c_pf * f;
                }
                ThermalClosure::Inviscid => e += p.tau0 * p.c_pf * s.theta_f_free[i].powi(2) / m,
                ThermalClosure::Quasistatic => {}
            }
            thermal += 0.5 * h * e;
        }
        let mean = y[lay.mean];
        thermal += 0.5 * (1.0 - m) * p.beta0s * p.beta0s / p.eta0 * mean * mean;
        let (k_ee, k_er, k_rr) = self.reduced.stiffness(m);
        let (eps, er, _) = self.cells(y);
        let elastic = 0.5
            * h
            * eps
                .iter()
                .zip(&er)
                .map(|(e, r)| k_ee * e * e + 2.0 * k_er * e * r + k_rr * r * r)
                .sum::<f64>();
        EnergyParts {
            kinetic,
            elastic,
            thermal,
        }
    }

    pub fn energy(&self, s: &MacroState) -> f64 {
        self.energy_parts(s).total()
    }

    pub fn run(&self, init: &InitialData, f: &Forcing, psi: &Forcing) -> Result<MacroRun> {
        let mut state = self.initial_state(init, psi)?;
        let mut history = RegimeHistory::default();
        let mut states = Vec::with_capacity(self.cfg.steps() + 1);
        states.push(state.clone());
        for _ in 0..self.cfg.steps() {
            state = self.step(&state, f, psi, &mut history)?;
            states.push(state.clone());
        }
        let energy = audit_energy(self, &states);
        Ok(MacroRun {
            regime: self.regime,
            states,
            energy,
            history,
        })
    }
}

#[derive(Debug, Clone)]
pub struct MacroRun {
    pub regime: Regime,
    pub states: Vec<MacroState>,
    pub energy: Vec<f64>,
    pub history: RegimeHistory,
}

impl MacroRun {
    pub fn last(&self) -> &MacroState {
        self.states.last().expect("run holds the initial state")
    }
}

/// Discrete energy (kinetic + elastic/pressure + thermal) of each stored state.
pub fn audit_energy(model: &MacroModel, states: &[MacroState]) -> Vec<f64> {
    states.iter().map(|s| model.energy(s)).collect()
}

/// First step where the series grows by more than `slack` relative to its
/// largest value.
pub fn first_increase(series: &[f64], slack: f64) -> Option<usize> {
    let scale = series.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    series
        .windows(2)
        .position(|w| w[1] > w[0] + slack * scale)
        .map(|k| k + 1)
}

fn expect(model: &MacroModel, ok: bool, name: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Configuration(format!("{name} called on a regime {} model", model.regime)))
    }
}

pub fn step_regime_i(model: &MacroModel, s: &MacroState, f: &Forcing, psi: &Forcing, h: &mut RegimeHistory) -> Result<MacroState> {
    expect(model, model.regime == Regime::I, "step_regime_i")?;
    model.step(s, f, psi, h)
}

pub fn step_regime_ii(model: &MacroModel, s: &MacroState, f: &Forcing, psi: &Forcing, h: &mut RegimeHistory) -> Result<MacroState> {
    expect(model, model.regime == Regime::II, "step_regime_ii")?;
    model.step(s, f, psi, h)
}

pub fn step_regime_iii(model: &MacroModel, s: &MacroState, f: &Forcing, psi: &Forcing, h: &mut RegimeHistory) -> Result<MacroState> {
    expect(model, matches!(model.regime, Regime::III(_)), "step_regime_iii")?;
    model.step(s, f, psi, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::ExpSum;
    use crate::macro_biot::{FieldPreset, KernelModes, Viscosity};

    fn coeffs(fluid_connected: bool) -> MacroCoefficients {
        let m = 0.5;
        let a0_tilde = -0.25;
        let b0 = -0.1;
        MacroCoefficients {
            m,
            a0_1111: 1.2,
            b0,
            b1: b0 / m,
            c0: b0,
            a0_tilde,
            a0: a0_tilde + 1.0 - m,
            a1: a0_tilde / m,
            btheta: 0.5,
            b2: Some(0.02),
            b3: Some(0.3),
            b1_kernel: Some(KernelModes::exact(ExpSum::single(m / 1.0, m / 0.02))),
            b_theta_kernel: Some(KernelModes::exact(ExpSum::single(m, 4.0))),
            c_theta_f: Some(-0.01),
            fluid_connected,
        }
    }

    fn params(tau0: f64, mu1: Viscosity) -> RegimeParameters {
        RegimeParameters {
            tau0,
            mu1,
            ..Default::default()
        }
    }

    fn cfg(dt: f64, horizon: f64) -> MacroConfig {
        MacroConfig {
            nx: 16,
            dt,
            horizon,
            darcy_form: DarcyForm::Mixture,
        }
    }

    fn cases() -> Vec<(RegimeParameters, bool)> {
        vec![
            (params(1.0, Viscosity::Infinite), true),
            (params(1.0, Viscosity::Infinite), false),
            (params(1.0, Viscosity::Finite(1.0)), false),
            (params(1.0, Viscosity::Finite(1.0)), true),
            (params(0.0, Viscosity::Finite(1.0)), true),
            (params(1.0, Viscosity::Finite(0.0)), true),
        ]
    }

    fn bump() -> InitialData {
        InitialData {
            displacement: FieldPreset::Sine { amplitude: 0.01, mode: 1 },
            velocity: FieldPreset::Sine { amplitude: 0.02, mode: 2 },
            temperature: FieldPreset::GaussianPulse {
                amplitude: 1.0,
                center: 0.4,
                width: 0.1,
            },
            mean_q: 0.0,
            beta: 0.0,
        }
    }

    #[test]
    fn regimes_follow_the_table() {
        let got: Vec<String> = cases()
            .into_iter()
            .map(|(p, fc)| {
                MacroModel::new(&p, &coeffs(fc), &cfg(0.01, 0.1))
                    .unwrap()
                    .regime
                    .to_string()
            })
            .collect();
        assert_eq!(got, ["I", "II", "II", "III(a)", "III(b)", "III(c)"]);
    }

    #[test]
    fn zero_data_stays_zero() {
        for (p, fc) in cases() {
            let model = MacroModel::new(&p, &coeffs(fc), &cfg(0.01, 0.2)).unwrap();
            let run = model.run(&InitialData::default(), &Forcing::zero(), &Forcing::zero()).unwrap();
            assert!(run.states.iter().all(|s| s.max_abs() == 0.0), "regime {}", model.regime);
        }
    }

    #[test]
    fn heat_source_warms_the_middle() {
        let model = MacroModel::new(&params(1.0, Viscosity::Infinite), &coeffs(true), &cfg(0.01, 0.1)).unwrap();
        let psi = Forcing::steady(FieldPreset::Constant { value: 1.0 });
        let run = model.run(&InitialData::default(), &Forcing::zero(), &psi).unwrap();
        let mid = |s: &MacroState| s.theta[8];
        assert!(run.states.windows(2).all(|w| mid(&w[1]) > mid(&w[0])));
    }

    #[test]
    fn energy_never_grows_without_forcing() {
        for (p, fc) in cases() {
            let model = MacroModel::new(&p, &coeffs(fc), &cfg(0.005, 0.5)).unwrap();
            let run = model.run(&bump(), &Forcing::zero(), &Forcing::zero()).unwrap();
            assert!(run.energy[0] > 0.0);
            assert_eq!(first_increase(&run.energy, 1e-12), None, "regime {}", model.regime);
            assert!(run.energy.last().unwrap() < &run.energy[0]);
        }
    }

    #[test]
    fn averages_are_consistent() {
        for (p, fc) in cases() {
            let model = MacroModel::new(&p, &coeffs(fc), &cfg(0.01, 0.1)).unwrap();
            let psi = Forcing::steady(FieldPreset::Sine { amplitude: 1.0, mode: 1 });
            let run = model.run(&bump(), &Forcing::zero(), &psi).unwrap();
            for s in &run.states {
                let h = 1.0 / 16.0;
                let mean: f64 = h * s.theta.iter().sum::<f64>();
                assert!((s.mean_theta - mean).abs() < 1e-12);
                let tf: f64 = h * s.theta_f.iter().sum::<f64>();
                assert!((s.mean_theta_f - tf).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inviscid_fluid_temperature_integrates_the_source() {
        let p = params(2.0, Viscosity::Finite(0.0));
        let model = MacroModel::new(&p, &coeffs(true), &cfg(0.01, 0.1)).unwrap();
        assert_eq!(model.closure, ThermalClosure::Inviscid);
        let psi = Forcing::steady(FieldPreset::Constant { value: 3.0 });
        let init = InitialData {
            temperature: FieldPreset::Constant { value: 1.0 },
            ..Default::default()
        };
        let run = model.run(&init, &Forcing::zero(), &psi).unwrap();
        let last = run.last();
        let want = 0.5 * (1.0 + last.t * 3.0 / (2.0 * p.c_pf));
        for tf in &last.theta_f[1..16] {
            assert!((tf - want).abs() < 1e-12);
        }
    }

    #[test]
    fn pressure_without_fluid_expansion() {
        let mut p = params(1.0, Viscosity::Finite(1.0));
        p.beta0f = 0.0;
        let model = MacroModel::new(&p, &coeffs(true), &cfg(0.01, 0.1)).unwrap();
        let init = InitialData {
            mean_q: 0.3,
            ..bump()
        };
        let run = model.run(&init, &Forcing::zero(), &Forcing::zero()).unwrap();
        for s in &run.states {
            for (pc, qc) in s.p.iter().zip(&s.q) {
                assert!((pc - (qc - s.mean_q)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn algebraic_darcy_law_holds_discretely() {
        let p = params(0.0, Viscosity::Finite(1.0));
        let c = coeffs(true);
        let model = MacroModel::new(&p, &c, &cfg(0.01, 0.1)).unwrap();
        let f = Forcing::steady(FieldPreset::Sine { amplitude: 1.0, mode: 1 });
        let run = model.run(&bump(), &f, &Forcing::zero()).unwrap();
        let m = c.m;
        for (n, w) in run.states.windows(2).enumerate() {
            let g = &run.history.samples[n];
            for i in 0..15 {
                let r = |s: &MacroState| s.wf[i + 1] - m * s.u[i + 1];
                let rt = (r(&w[1]) - r(&w[0])) / 0.01;
                assert!((rt - c.b2.unwrap() * g[i]).abs() < 1e-10 * (1.0 + rt.abs()));
            }
        }
    }

    #[test]
    fn inviscid_flow_with_b3_equal_m_moves_with_skeleton() {
        let p = params(1.0, Viscosity::Finite(0.0));
        let mut c = coeffs(true);
        c.b3 = Some(c.m);
        let model = MacroModel::new(&p, &c, &cfg(0.01, 0.1)).unwrap();
        let f = Forcing::steady(FieldPreset::Constant { value: 1.0 });
        let run = model.run(&bump(), &f, &Forcing::zero()).unwrap();
        for s in &run.states {
            for (wf, u) in s.wf.iter().zip(&s.u) {
                assert!((wf - c.m * u).abs() < 1e-13);
            }
        }
        c.b3 = Some(0.6);
        assert!(matches!(
            MacroModel::new(&p, &c, &cfg(0.01, 0.1)),
            Err(Error::Consistency(_))
        ));
    }

    #[test]
    fn missing_coefficients_are_configuration_errors() {
        let mut c = coeffs(true);
        c.b1_kernel = None;
        let r = MacroModel::new(&params(1.0, Viscosity::Finite(1.0)), &c, &cfg(0.01, 0.1));
        assert!(matches!(r, Err(Error::Configuration(_))));
        let mut c = coeffs(true);
        c.b1_kernel = Some(KernelModes {
            fit: ExpSum::single(0.5, 1.0),
            horizon: 0.05,
            tail: 0.5,
        });
        let r = MacroModel::new(&params(1.0, Viscosity::Finite(1.0)), &c, &cfg(0.01, 0.1));
        assert!(matches!(r, Err(Error::Configuration(e)) if e.contains("kernel history exhausted")));
    }

    #[test]
    fn structural_identities() {
        for (tau0, mu) in [(1.0, Viscosity::Infinite), (1.0, Viscosity::Finite(1.0))] {
            let p = params(tau0, mu);
            let c = coeffs(true).reconciled(1.0, 1.0).unwrap();
            let rc = ReducedCoefficients::new(&c, &p, c.m);
            assert!((rc.sigma_t + p.beta0s).abs() < 1e-14);
            assert!((-rc.s_t / c.m + p.beta0s).abs() < 1e-14);
            assert!((rc.sigma_er + rc.s_eps / c.m).abs() < 1e-14);
        }
    }

    #[test]
    fn first_order_in_time() {
        let p = params(1.0, Viscosity::Finite(1.0));
        let c = coeffs(true);
        let at = |dt: f64| {
            let model = MacroModel::new(&p, &c, &cfg(dt, 0.2)).unwrap();
            model.run(&bump(), &Forcing::zero(), &Forcing::zero()).unwrap().last().clone()
        };
        let reference = at(0.2 / 1280.0);
        let err = |s: &MacroState| {
            s.u.iter()
                .zip(&reference.u)
                .chain(s.theta.iter().zip(&reference.theta))
                .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()))
        };
        let e1 = err(&at(0.2 / 20.0));
        let e2 = err(&at(0.2 / 40.0));
        let ratio = e1 / e2;
        assert!((1.5..=2.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn modal_memory_matches_direct_convolution() {
        let p = params(1.0, Viscosity::Finite(1.0));
        let c = coeffs(true);
        let dt = 0.002;
        let model = MacroModel::new(&p, &c, &cfg(dt, 0.2)).unwrap();
        let f = Forcing::steady(FieldPreset::Sine { amplitude: 1.0, mode: 1 });
        let run = model.run(&bump(), &f, &Forcing::zero()).unwrap();
        let h = &run.history;
        assert_eq!(h.len(), run.states.len() - 1);
        assert!((h.elapsed() - run.last().t).abs() < 1e-12);
        let fit = &c.b1_kernel.as_ref().unwrap().fit;
        let (w, rate) = (fit.weights[0], fit.rates[0]);
        let n = run.states.len() - 1;
        let rt = |i: usize| {
            let r = |s: &MacroState| s.wf[i + 1] - c.m * s.u[i + 1];
            (r(&run.states[n]) - r(&run.states[n - 1])) / dt
        };
        let discrete = h.convolve(|s| w * (1.0 + dt * rate).powf(-(s / dt).round() - 1.0));
        let direct = h.convolve(|s| fit.eval(s));
        let scale = discrete.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        for i in 0..15 {
            assert!((rt(i) - discrete[i]).abs() < 1e-9 * scale);
            assert!((rt(i) - direct[i]).abs() < 0.05 * scale);
        }
    }
}
