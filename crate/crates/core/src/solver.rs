//! Störmer–Verlet time stepping of the semi-discrete wave system
//!
//! ```text
//! R v' + C v + D u = f(t) b,     u' = v
//! ```
//!
//! with Jacobi-preconditioned conjugate gradients for the mass solves, and
//! the observation of traces at sensor nodes on the sea surface.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{source_time, Assembler, OperatorSet, SourceSpec};
use crate::error::{Error, Result};
use crate::material::{coeff_fields, MaterialConstants, MaterialField, MaterialSampling};
use crate::mesh::{equidistant_sensors, Domain, Mesh};
use crate::prior::SeabedCurve;
use crate::sparse::{dot, norm2, CsrMatrix};

/// Norm of `u` beyond which a run is declared unstable.
pub const BLOWUP_NORM: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Observation interval; the solver step is `dt / substeps`.
    pub dt: f64,
    pub t_max: f64,
    pub substeps: usize,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub frequencies: Vec<f64>,
    pub sources: SourceSpec,
    pub sensor_xs: Vec<f64>,
    /// Solve frequency channels concurrently.
    pub parallel: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 0.0019,
            t_max: 3.95,
            substeps: 1,
            cg_tol: 1e-10,
            cg_max_iter: 500,
            frequencies: vec![4.0],
            sources: SourceSpec::default(),
            sensor_xs: equidistant_sensors(186, 188, Domain::default()).expect("valid default layout"),
            parallel: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_max >= self.dt) {
            return Err(Error::Config(format!("t_max = {} is shorter than dt = {}", self.t_max, self.dt)));
        }
        if self.substeps == 0 {
            return Err(Error::Config("substeps must be >= 1".into()));
        }
        if !(self.cg_tol > 0.0 && self.cg_tol < 1.0) {
            return Err(Error::Config(format!("cg_tol must lie in (0, 1), got {}", self.cg_tol)));
        }
        if self.cg_max_iter == 0 {
            return Err(Error::Config("cg_max_iter must be >= 1".into()));
        }
        if self.frequencies.is_empty() {
            return Err(Error::Config("at least one frequency is required".into()));
        }
        if self.sensor_xs.is_empty() {
            return Err(Error::Config("at least one sensor is required".into()));
        }
        Ok(())
    }

    /// Number of recorded snapshots.
    pub fn n_steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }

    pub fn step_size(&self) -> f64 {
        self.dt / self.substeps as f64
    }
}

/// Scratch vectors of the preconditioned CG iteration.
#[derive(Debug, Clone)]
pub struct CgWorkspace {
    inv_diag: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    p: Vec<f64>,
    ap: Vec<f64>,
}

impl CgWorkspace {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let inv_diag = a
            .diagonal()
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                if d > 0.0 {
                    Ok(1.0 / d)
                } else {
                    Err(Error::Domain(format!("non-positive diagonal entry {d} in row {i}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let n = a.n;
        Ok(Self { inv_diag, r: vec![0.0; n], z: vec![0.0; n], p: vec![0.0; n], ap: vec![0.0; n] })
    }

    /// Solves `A x = rhs` starting from the current contents of `x`.
    /// Returns the iteration count.
    pub fn solve(&mut self, a: &CsrMatrix, rhs: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<usize> {
        let rhs_norm = norm2(rhs);
        if rhs_norm == 0.0 {
            x.iter_mut().for_each(|v| *v = 0.0);
            return Ok(0);
        }
        if !rhs_norm.is_finite() {
            return Err(Error::Domain("non-finite right-hand side".into()));
        }
        let target = tol * rhs_norm;
        a.mul_vec_into(x, &mut self.r);
        for (r, b) in self.r.iter_mut().zip(rhs) {
            *r = b - *r;
        }
        let mut res = norm2(&self.r);
        if res <= target {
            return Ok(0);
        }
        for i in 0..a.n {
            self.z[i] = self.inv_diag[i] * self.r[i];
        }
        self.p.copy_from_slice(&self.z);
        let mut rz = dot(&self.r, &self.z);
        for it in 1..=max_iter {
            a.mul_vec_into(&self.p, &mut self.ap);
            let alpha = rz / dot(&self.p, &self.ap);
            for i in 0..a.n {
                x[i] += alpha * self.p[i];
                self.r[i] -= alpha * self.ap[i];
            }
            res = norm2(&self.r);
            if res <= target {
                return Ok(it);
            }
            for i in 0..a.n {
                self.z[i] = self.inv_diag[i] * self.r[i];
            }
            let rz_new = dot(&self.r, &self.z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..a.n {
                self.p[i] = self.z[i] + beta * self.p[i];
            }
        }
        Err(Error::Convergence { iterations: max_iter, residual: res / rhs_norm })
    }
}

/// Solves `A x = rhs` for symmetric positive definite `A`, starting from zero.
pub fn cg_solve(a: &CsrMatrix, rhs: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    if rhs.len() != a.n {
        return Err(Error::Shape(format!("rhs has length {}, matrix is {}x{}", rhs.len(), a.n, a.n)));
    }
    let mut x = vec![0.0; a.n];
    CgWorkspace::new(a)?.solve(a, rhs, &mut x, tol, max_iter)?;
    Ok(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub n: usize,
}

impl WaveState {
    pub fn zeros(n: usize) -> Self {
        Self { u: vec![0.0; n], v: vec![0.0; n], n: 0 }
    }

    /// `1/2 v^T R v + 1/2 u^T D u`.
    pub fn energy(&self, ops: &OperatorSet) -> f64 {
        0.5 * ops.r.quadratic_form(&self.v) + 0.5 * ops.d.quadratic_form(&self.u)
    }
}

/// One channel's time integrator: owns the load vector and CG scratch space.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    ops: &'a OperatorSet,
    b: Vec<f64>,
    tau: f64,
    cg_tol: f64,
    cg_max_iter: usize,
    cg: CgWorkspace,
    rhs: Vec<f64>,
    w1: Vec<f64>,
    w2: Vec<f64>,
    v_half: Vec<f64>,
    du: Vec<f64>,
    shadow: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(ops: &'a OperatorSet, b: Vec<f64>, tau: f64, cg_tol: f64, cg_max_iter: usize) -> Result<Self> {
        let n = ops.size();
        for (m, name) in [(&ops.r, "R"), (&ops.d, "D"), (&ops.c, "C")] {
            m.check_square(n, name)?;
        }
        if b.len() != n {
            return Err(Error::Shape(format!("load vector has length {}, expected {n}", b.len())));
        }
        Ok(Self {
            ops,
            b,
            tau,
            cg_tol,
            cg_max_iter,
            cg: CgWorkspace::new(&ops.r)?,
            rhs: vec![0.0; n],
            w1: vec![0.0; n],
            w2: vec![0.0; n],
            v_half: vec![0.0; n],
            du: vec![0.0; n],
            shadow: 0.0,
        })
    }

    /// `w = -(tau/2) R^{-1} (D u + C v - f b)`, warm-started from the previous `w`.
    fn kick(&mut self, u: &[f64], v: &[f64], f: f64, second: bool) -> Result<()> {
        let h = 0.5 * self.tau;
        self.ops.d.mul_vec_into(u, &mut self.du);
        self.rhs.copy_from_slice(&self.du);
        self.ops.c.mul_vec_add(1.0, v, &mut self.rhs);
        for (r, b) in self.rhs.iter_mut().zip(&self.b) {
            *r = -h * (*r - f * b);
        }
        let w = if second { &mut self.w2 } else { &mut self.w1 };
        self.cg.solve(&self.ops.r, &self.rhs, w, self.cg_tol, self.cg_max_iter)?;
        Ok(())
    }

    /// Advances by one step of size `tau` given the source amplitudes at the
    /// start and end of the step.
    pub fn step(&mut self, state: &mut WaveState, f_start: f64, f_end: f64) -> Result<()> {
        let step = state.n + 1;
        let wrap = |e: Error| match e {
            Error::Convergence { .. } => e,
            other => Error::Instability { step, reason: other.to_string() },
        };
        self.kick(&state.u, &state.v, f_start, false).map_err(wrap)?;
        for i in 0..state.v.len() {
            self.v_half[i] = state.v[i] + self.w1[i];
        }
        // Shadow energy 1/2 (vh^T R vh + tau vh^T D u + u^T D u), exactly
        // conserved by the undamped, unforced scheme.
        self.shadow = 0.5
            * (self.ops.r.quadratic_form(&self.v_half)
                + self.tau * dot(&self.v_half, &self.du)
                + dot(&state.u, &self.du));
        for i in 0..state.u.len() {
            state.u[i] += self.tau * self.v_half[i];
        }
        let v_half = std::mem::take(&mut self.v_half);
        let res = self.kick(&state.u, &v_half, f_end, true);
        self.v_half = v_half;
        res.map_err(wrap)?;
        for i in 0..state.v.len() {
            state.v[i] = self.v_half[i] + self.w2[i];
        }
        state.n = step;
        let norm = norm2(&state.u);
        if !norm.is_finite() || state.v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Instability { step, reason: "non-finite state".into() });
        }
        if norm > BLOWUP_NORM {
            return Err(Error::Instability { step, reason: format!("|u| = {norm:e} exceeds {BLOWUP_NORM:e}") });
        }
        Ok(())
    }

    /// Shadow energy evaluated at the start of the last step taken.
    pub fn shadow_energy(&self) -> f64 {
        self.shadow
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

/// Surface traces of every top-boundary node, `data[i][l][k]` for frequency
/// `i`, snapshot `l` (time `(l + 1) dt`) and top node `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTraces {
    pub top_xs: Vec<f64>,
    pub data: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementMeta {
    pub dt: f64,
    pub t_max: f64,
    pub substeps: usize,
    pub sensor_xs: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub nx: usize,
    pub ny: usize,
    pub seed: Option<u64>,
}

/// Sensor readings `data[i][l][k]` (frequency, snapshot, sensor) with the
/// noise scale per frequency once noise has been applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub data: Vec<Vec<Vec<f64>>>,
    pub sigma: Option<Vec<f64>>,
    pub meta: MeasurementMeta,
}

impl Measurement {
    pub fn n_freq(&self) -> usize {
        self.data.len()
    }

    pub fn n_time(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn n_sensor(&self) -> usize {
        self.data.first().and_then(|c| c.first()).map_or(0, Vec::len)
    }

    /// Reading of sensor `k` at snapshot `l` of frequency `i`.
    pub fn get(&self, i: usize, k: usize, l: usize) -> f64 {
        self.data[i][l][k]
    }

    pub fn check_shape(&self) -> Result<()> {
        let (nt, ns) = (self.n_time(), self.n_sensor());
        if self.data.len() != self.meta.frequencies.len() {
            return Err(Error::Shape(format!(
                "{} channels for {} frequencies",
                self.data.len(),
                self.meta.frequencies.len()
            )));
        }
        if ns != self.meta.sensor_xs.len() {
            return Err(Error::Shape(format!("{ns} sensors in data, {} in metadata", self.meta.sensor_xs.len())));
        }
        for ch in &self.data {
            if ch.len() != nt || ch.iter().any(|s| s.len() != ns) {
                return Err(Error::Shape("ragged measurement tensor".into()));
            }
        }
        if let Some(sigma) = &self.sigma {
            if sigma.len() != self.data.len() {
                return Err(Error::Shape(format!("{} noise levels for {} channels", sigma.len(), self.data.len())));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().flatten().flatten().for_each(|v| *v *= factor);
        out
    }
}

/// Runs one frequency channel and records the top-boundary trace after
/// every observation interval. `inspect` sees the state after each solver step.
pub fn run_channel(
    ops: &OperatorSet,
    cfg: &SolverConfig,
    f0: f64,
    top_nodes: &[usize],
    mut inspect: impl FnMut(&WaveState, &Stepper),
) -> Result<Vec<Vec<f64>>> {
    let tau = cfg.step_size();
    let mut stepper = Stepper::new(ops, ops.b_total(), tau, cfg.cg_tol, cfg.cg_max_iter)?;
    let mut state = WaveState::zeros(ops.size());
    let n_obs = cfg.n_steps();
    let mut out = Vec::with_capacity(n_obs);
    for _ in 0..n_obs {
        for _ in 0..cfg.substeps {
            let t0 = state.n as f64 * tau;
            stepper.step(&mut state, source_time(f0, t0), source_time(f0, t0 + tau))?;
            inspect(&state, &stepper);
        }
        out.push(top_nodes.iter().map(|&k| state.u[k]).collect());
    }
    Ok(out)
}

/// Everything needed to map a seabed curve to surface traces on one mesh.
#[derive(Debug, Clone)]
pub struct ForwardContext {
    pub cfg: SolverConfig,
    pub constants: MaterialConstants,
    pub sampling: MaterialSampling,
    assembler: Assembler,
}

impl ForwardContext {
    pub fn new(mesh: Mesh, constants: MaterialConstants, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        constants.validate()?;
        let (x0, x1) = (mesh.domain.x0, mesh.domain.x1);
        if let Some(&x) = cfg.sensor_xs.iter().find(|&&x| !(x >= x0 && x <= x1)) {
            return Err(Error::Alignment { x });
        }
        let assembler = Assembler::new(&mesh, &cfg.sources)?;
        let ctx = Self { cfg, constants, sampling: MaterialSampling::default(), assembler };
        ctx.check_cfl();
        Ok(ctx)
    }

    pub fn mesh(&self) -> &Mesh {
        self.assembler.mesh()
    }

    pub fn assembler(&self) -> &Assembler {
        &self.assembler
    }

    fn check_cfl(&self) {
        let (_, rho_max, _, alpha_max) = self.constants.bounds(self.mesh().domain.y0, self.mesh().domain.y1);
        let rho_min = self.constants.rho0;
        let c_max = (alpha_max / rho_min).sqrt().max((alpha_max / rho_max).sqrt());
        let ratio = c_max * self.cfg.step_size() / self.mesh().min_spacing();
        if ratio > 0.5 {
            warn!("CFL ratio {ratio:.3} exceeds 0.5; time stepping may be unstable");
        }
    }

    pub fn material(&self, h: &SeabedCurve) -> Result<MaterialField> {
        coeff_fields(h, self.mesh(), &self.constants, self.sampling)
    }

    pub fn operators(&self, material: &MaterialField) -> Result<OperatorSet> {
        self.assembler.assemble(material)
    }

    /// Top-boundary traces for every frequency.
    pub fn simulate_material(&self, material: &MaterialField) -> Result<BoundaryTraces> {
        let ops = self.operators(material)?;
        let top = self.mesh().top_nodes();
        let run = |(i, &f0): (usize, &f64)| {
            run_channel(&ops, &self.cfg, f0, &top, |_, _| {})
                .map_err(|e| Error::Channel { index: i, source: Box::new(e) })
        };
        let data = if self.cfg.parallel {
            self.cfg.frequencies.par_iter().enumerate().map(run).collect::<Result<Vec<_>>>()?
        } else {
            self.cfg.frequencies.iter().enumerate().map(run).collect::<Result<Vec<_>>>()?
        };
        Ok(BoundaryTraces { top_xs: self.mesh().top_xs(), data })
    }

    pub fn simulate(&self, h: &SeabedCurve) -> Result<BoundaryTraces> {
        self.simulate_material(&self.material(h)?)
    }

    pub fn meta(&self, seed: Option<u64>) -> MeasurementMeta {
        MeasurementMeta {
            dt: self.cfg.dt,
            t_max: self.cfg.t_max,
            substeps: self.cfg.substeps,
            sensor_xs: self.cfg.sensor_xs.clone(),
            frequencies: self.cfg.frequencies.clone(),
            nx: self.mesh().nx,
            ny: self.mesh().ny,
            seed,
        }
    }

    /// Simulated, noise-free measurement of the seabed `h`.
    pub fn forward(&self, h: &SeabedCurve) -> Result<Measurement> {
        let traces = self.simulate(h)?;
        observe(&traces, &self.cfg.sensor_xs, self.meta(None))
    }
}

/// Restricts surface traces to the sensors. Traces are piecewise linear
/// along the top boundary, so a sensor between two nodes gets the exact
/// finite-element value by linear interpolation.
pub fn observe(traces: &BoundaryTraces, sensor_xs: &[f64], meta: MeasurementMeta) -> Result<Measurement> {
    let n = traces.top_xs.len();
    if n < 2 {
        return Err(Error::Shape("trace has fewer than two top nodes".into()));
    }
    let (x0, x1) = (traces.top_xs[0], traces.top_xs[n - 1]);
    let hx = (x1 - x0) / (n - 1) as f64;
    let stencil = sensor_xs
        .iter()
        .map(|&x| {
            let t = (x - x0) / hx;
            if !(t > -1e-9 && t < (n - 1) as f64 + 1e-9) {
                return Err(Error::Alignment { x });
            }
            let r = t.round();
            if (t - r).abs() <= 1e-9 {
                return Ok((r as usize, 0.0));
            }
            let i = (t.floor() as usize).min(n - 2);
            Ok((i, t - i as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    let data = traces
        .data
        .iter()
        .map(|ch| {
            ch.iter()
                .map(|snap| {
                    stencil
                        .iter()
                        .map(|&(i, w)| if w == 0.0 { snap[i] } else { (1.0 - w) * snap[i] + w * snap[i + 1] })
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(Measurement { data, sigma: None, meta: MeasurementMeta { sensor_xs: sensor_xs.to_vec(), ..meta } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble;
    use crate::prior::Grid1d;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    #[test]
    fn cg_identity_and_zero_rhs() {
        let a = CsrMatrix::identity(5);
        let rhs = vec![1.0, -2.0, 3.0, 0.5, 0.0];
        let mut x = vec![0.0; 5];
        let its = CgWorkspace::new(&a).unwrap().solve(&a, &rhs, &mut x, 1e-12, 10).unwrap();
        assert_eq!(its, 1);
        assert_eq!(x, rhs);
        assert_eq!(cg_solve(&a, &[0.0; 5], 1e-12, 10).unwrap(), vec![0.0; 5]);
    }

    #[test]
    fn cg_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10;
        let b: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = (0..n).map(|k| b[k][i] * b[k][j]).sum::<f64>() + if i == j { 0.5 } else { 0.0 };
            }
        }
        let rhs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = cg_solve(&CsrMatrix::from_dense(&a), &rhs, 1e-12, 200).unwrap();
        let oracle = dense_solve(a, rhs);
        for (p, q) in x.iter().zip(&oracle) {
            assert!((p - q).abs() < 1e-10, "{p} vs {q}");
        }
    }

    #[test]
    fn cg_reports_non_convergence() {
        let a = CsrMatrix::from_dense(&[vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 2.0]]);
        match cg_solve(&a, &[1.0, 2.0, 3.0], 1e-14, 1) {
            Err(Error::Convergence { iterations: 1, residual }) => assert!(residual > 1e-14),
            other => panic!("{other:?}"),
        }
    }

    fn small_ops() -> (Mesh, OperatorSet) {
        let mesh = Mesh::new(12, 6, Domain::default()).unwrap();
        let mat = MaterialField::constant(mesh.triangles.len(), 1.0, 1.5);
        let src = SourceSpec { xs: vec![0.0], y: 0.0, width: 0.05 };
        (mesh.clone(), assemble(&mesh, &mat, &src).unwrap())
    }

    #[test]
    fn zero_forcing_keeps_zero_state() {
        let (_, ops) = small_ops();
        let mut st = Stepper::new(&ops, ops.b_total(), 0.01, 1e-10, 100).unwrap();
        let mut s = WaveState::zeros(ops.size());
        for _ in 0..20 {
            st.step(&mut s, 0.0, 0.0).unwrap();
        }
        assert!(s.u.iter().chain(&s.v).all(|&x| x == 0.0));
        assert_eq!(s.n, 20);
    }

    #[test]
    fn first_step_closed_form() {
        let (_, ops) = small_ops();
        let tau = 0.01;
        let b = ops.b_total();
        let mut st = Stepper::new(&ops, b.clone(), tau, 1e-13, 200).unwrap();
        let mut s = WaveState::zeros(ops.size());
        st.step(&mut s, 1.0, 0.0).unwrap();
        let rb = cg_solve(&ops.r, &b, 1e-13, 200).unwrap();
        for (u, w) in s.u.iter().zip(&rb) {
            let expected = tau * 0.5 * tau * w;
            assert!((u - expected).abs() < 1e-12 * rb.iter().fold(0.0f64, |m, x| m.max(x.abs())));
        }
    }

    #[test]
    fn shadow_energy_is_conserved_without_damping() {
        let (mesh, ops) = small_ops();
        let ops = ops.without_damping();
        let mut st = Stepper::new(&ops, ops.b_total(), 0.01, 1e-12, 200).unwrap();
        let mut s = WaveState::zeros(ops.size());
        // Kick the system, then let it evolve freely.
        for k in 0..20 {
            let f = source_time(4.0, k as f64 * 0.01);
            st.step(&mut s, f, source_time(4.0, (k + 1) as f64 * 0.01)).unwrap();
        }
        let mut energies = Vec::new();
        for _ in 0..300 {
            st.step(&mut s, 0.0, 0.0).unwrap();
            energies.push(st.shadow_energy());
        }
        let e0 = energies[1];
        assert!(e0 > 0.0);
        for e in &energies[1..] {
            assert!((e - e0).abs() < 1e-8 * e0, "{e} vs {e0} on {}x{}", mesh.nx, mesh.ny);
        }
    }

    #[test]
    fn blowup_is_reported() {
        let (_, ops) = small_ops();
        let ops = ops.without_damping();
        // Far beyond the stability limit.
        let mut st = Stepper::new(&ops, ops.b_total(), 5.0, 1e-10, 200).unwrap();
        let mut s = WaveState::zeros(ops.size());
        let mut err = None;
        for k in 0..200 {
            if let Err(e) = st.step(&mut s, if k == 0 { 1.0 } else { 0.0 }, 0.0) {
                err = Some(e);
                break;
            }
        }
        assert!(matches!(err, Some(Error::Instability { .. })), "{err:?}");
    }

    fn tiny_context(parallel: bool, freqs: Vec<f64>) -> ForwardContext {
        let d = Domain::default();
        let cfg = SolverConfig {
            dt: 0.02,
            t_max: 0.6,
            frequencies: freqs,
            sensor_xs: equidistant_sensors(10, 12, d).unwrap(),
            parallel,
            ..SolverConfig::default()
        };
        ForwardContext::new(Mesh::new(12, 6, d).unwrap(), MaterialConstants::default(), cfg).unwrap()
    }

    fn flat(h: f64) -> SeabedCurve {
        SeabedCurve::flat(Grid1d::new(-3.0, 3.0, 512).unwrap(), h)
    }

    #[test]
    fn channels_are_independent() {
        let par = tiny_context(true, vec![2.0, 3.0]).forward(&flat(-0.5)).unwrap();
        let seq = tiny_context(false, vec![2.0, 3.0]).forward(&flat(-0.5)).unwrap();
        assert_eq!(par, seq);
        let single = tiny_context(false, vec![3.0]).forward(&flat(-0.5)).unwrap();
        assert_eq!(par.data[1], single.data[0]);
        assert_eq!(par.n_time(), 30);
        assert_eq!(par.n_sensor(), 10);
        par.check_shape().unwrap();
    }

    #[test]
    fn observation_selects_and_permutes() {
        let ctx = tiny_context(false, vec![2.0]);
        let traces = ctx.simulate(&flat(-0.5)).unwrap();
        let all = observe(&traces, &traces.top_xs, ctx.meta(None)).unwrap();
        assert_eq!(all.data, traces.data);
        let xs = vec![traces.top_xs[5], traces.top_xs[2]];
        let some = observe(&traces, &xs, ctx.meta(None)).unwrap();
        let swapped = observe(&traces, &[xs[1], xs[0]], ctx.meta(None)).unwrap();
        for l in 0..some.n_time() {
            assert_eq!(some.data[0][l][0], swapped.data[0][l][1]);
            assert_eq!(some.data[0][l][0], traces.data[0][l][5]);
        }
        assert!(matches!(observe(&traces, &[3.5], ctx.meta(None)), Err(Error::Alignment { .. })));
        // Off-node sensors see the linear interpolant of the trace.
        let mid = 0.25 * traces.top_xs[3] + 0.75 * traces.top_xs[4];
        let off = observe(&traces, &[mid], ctx.meta(None)).unwrap();
        for l in 0..off.n_time() {
            let want = 0.25 * traces.data[0][l][3] + 0.75 * traces.data[0][l][4];
            assert!((off.data[0][l][0] - want).abs() <= 1e-12 * want.abs().max(1e-30));
        }
    }

    #[test]
    fn zero_amplitude_source_gives_zero_traces() {
        let d = Domain::default();
        let mut cfg = SolverConfig {
            dt: 0.02,
            t_max: 0.2,
            sensor_xs: equidistant_sensors(10, 12, d).unwrap(),
            ..SolverConfig::default()
        };
        cfg.sources.xs.clear();
        let ctx = ForwardContext::new(Mesh::new(12, 6, d).unwrap(), MaterialConstants::default(), cfg).unwrap();
        let m = ctx.forward(&flat(-0.5)).unwrap();
        assert!(m.data.iter().flatten().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn config_validation() {
        let ok = SolverConfig::default();
        assert!(ok.validate().is_ok());
        assert_eq!(ok.n_steps(), 2079);
        for bad in [
            SolverConfig { dt: 0.0, ..ok.clone() },
            SolverConfig { t_max: 0.001, ..ok.clone() },
            SolverConfig { cg_tol: 1.0, ..ok.clone() },
            SolverConfig { frequencies: vec![], ..ok.clone() },
            SolverConfig { substeps: 0, ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
    }
}
