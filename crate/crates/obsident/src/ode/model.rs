//! Model representation: vector field, observation map and metadata.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::fd::finite_diff_jacobian;
use super::jet::{Jet, Scalar};
use crate::error::{Error, Result};

/// `(t, x, θ) -> vector`.
pub type VecMap = Arc<dyn Fn(f64, &[f64], &[f64]) -> DVector<f64> + Send + Sync>;
/// `(t, x, θ) -> matrix`.
pub type MatMap = Arc<dyn Fn(f64, &[f64], &[f64]) -> DMatrix<f64> + Send + Sync>;
/// Autonomous map evaluated on Taylor jets.
pub type JetMap = Arc<dyn Fn(&[Jet], &[Jet]) -> Vec<Jet> + Send + Sync>;

/// Autonomous model equations written once for any [`Scalar`].
pub trait Equations: Send + Sync + 'static {
    fn rhs<T: Scalar>(&self, x: &[T], p: &[T]) -> Vec<T>;
    fn output<T: Scalar>(&self, x: &[T], p: &[T]) -> Vec<T>;
}

#[derive(Clone, Default)]
struct Jacobians {
    f_x: Option<MatMap>,
    f_theta: Option<MatMap>,
    h_x: Option<MatMap>,
    h_theta: Option<MatMap>,
}

/// An ODE model `ẋ = f(t, x, θ)`, `y = h(t, x, θ)`.
///
/// Immutable once built; cloning shares the underlying closures.
#[derive(Clone)]
pub struct ModelSpec {
    name: String,
    n_states: usize,
    n_params: usize,
    n_outputs: usize,
    f: VecMap,
    h: VecMap,
    jac: Jacobians,
    series_f: Option<JetMap>,
    series_h: Option<JetMap>,
    state_names: Vec<String>,
    param_names: Vec<String>,
    output_names: Vec<String>,
    state_scales: Vec<f64>,
    param_scales: Vec<f64>,
    time_varying: bool,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("n_states", &self.n_states)
            .field("n_params", &self.n_params)
            .field("n_outputs", &self.n_outputs)
            .field("state_names", &self.state_names)
            .field("param_names", &self.param_names)
            .field("output_names", &self.output_names)
            .finish()
    }
}

fn default_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

impl ModelSpec {
    /// Model from plain closures. Jacobians fall back to finite differences.
    pub fn new(
        name: impl Into<String>,
        n_states: usize,
        n_params: usize,
        n_outputs: usize,
        f: VecMap,
        h: VecMap,
    ) -> Self {
        ModelSpec {
            name: name.into(),
            n_states,
            n_params,
            n_outputs,
            f,
            h,
            jac: Jacobians::default(),
            series_f: None,
            series_h: None,
            state_names: default_names("x", n_states),
            param_names: default_names("p", n_params),
            output_names: default_names("y", n_outputs),
            state_scales: vec![1.0; n_states],
            param_scales: vec![1.0; n_params],
            time_varying: false,
        }
    }

    /// Time-invariant model whose equations can also run on Taylor jets.
    pub fn autonomous<E: Equations>(
        name: impl Into<String>,
        n_states: usize,
        n_params: usize,
        n_outputs: usize,
        eq: E,
    ) -> Self {
        let eq = Arc::new(eq);
        let (e1, e2, e3, e4) = (eq.clone(), eq.clone(), eq.clone(), eq);
        let f: VecMap = Arc::new(move |_t, x, p| DVector::from_vec(e1.rhs::<f64>(x, p)));
        let h: VecMap = Arc::new(move |_t, x, p| DVector::from_vec(e2.output::<f64>(x, p)));
        let mut m = ModelSpec::new(name, n_states, n_params, n_outputs, f, h);
        m.series_f = Some(Arc::new(move |x, p| e3.rhs::<Jet>(x, p)));
        m.series_h = Some(Arc::new(move |x, p| e4.output::<Jet>(x, p)));
        m
    }

    pub fn with_state_jacobians(mut self, f_x: MatMap, h_x: MatMap) -> Self {
        self.jac.f_x = Some(f_x);
        self.jac.h_x = Some(h_x);
        self
    }

    pub fn with_param_jacobians(mut self, f_theta: MatMap, h_theta: MatMap) -> Self {
        self.jac.f_theta = Some(f_theta);
        self.jac.h_theta = Some(h_theta);
        self
    }

    pub fn with_names(mut self, states: &[&str], params: &[&str], outputs: &[&str]) -> Self {
        assert_eq!(states.len(), self.n_states, "state name count");
        assert_eq!(params.len(), self.n_params, "parameter name count");
        assert_eq!(outputs.len(), self.n_outputs, "output name count");
        self.state_names = states.iter().map(|s| s.to_string()).collect();
        self.param_names = params.iter().map(|s| s.to_string()).collect();
        self.output_names = outputs.iter().map(|s| s.to_string()).collect();
        self
    }

    /// Characteristic magnitudes used as finite-difference step floors.
    pub fn with_scales(mut self, states: Vec<f64>, params: Vec<f64>) -> Self {
        assert_eq!(states.len(), self.n_states);
        assert_eq!(params.len(), self.n_params);
        self.state_scales = states;
        self.param_scales = params;
        self
    }

    /// Marks `f` or `h` as depending explicitly on time.
    pub fn with_time_varying(mut self, flag: bool) -> Self {
        self.time_varying = flag;
        self
    }

    pub fn is_time_varying(&self) -> bool {
        self.time_varying
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn n_states(&self) -> usize {
        self.n_states
    }
    pub fn n_params(&self) -> usize {
        self.n_params
    }
    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }
    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }
    pub fn param_names(&self) -> &[String] {
        &self.param_names
    }
    pub fn output_names(&self) -> &[String] {
        &self.output_names
    }
    pub fn state_scales(&self) -> &[f64] {
        &self.state_scales
    }
    pub fn param_scales(&self) -> &[f64] {
        &self.param_scales
    }

    /// True when the equations can be evaluated on Taylor jets.
    pub fn has_series(&self) -> bool {
        self.series_f.is_some() && self.series_h.is_some()
    }

    pub fn has_analytic_jacobians(&self) -> bool {
        self.jac.f_x.is_some() && self.jac.h_x.is_some()
    }

    pub fn has_analytic_param_jacobians(&self) -> bool {
        self.jac.f_theta.is_some() && self.jac.h_theta.is_some()
    }

    pub(crate) fn series_rhs(&self, x: &[Jet], p: &[Jet]) -> Option<Vec<Jet>> {
        self.series_f.as_ref().map(|f| f(x, p))
    }

    pub(crate) fn series_output(&self, x: &[Jet], p: &[Jet]) -> Option<Vec<Jet>> {
        self.series_h.as_ref().map(|h| h(x, p))
    }

    pub fn check_dims(&self, x: &[f64], theta: &[f64]) -> Result<()> {
        if x.len() != self.n_states {
            return Err(Error::Dimension(format!(
                "{}: state has length {}, expected {}",
                self.name,
                x.len(),
                self.n_states
            )));
        }
        if theta.len() != self.n_params {
            return Err(Error::Dimension(format!(
                "{}: parameter vector has length {}, expected {}",
                self.name,
                theta.len(),
                self.n_params
            )));
        }
        Ok(())
    }

    pub fn rhs(&self, t: f64, x: &[f64], theta: &[f64]) -> DVector<f64> {
        (self.f)(t, x, theta)
    }

    pub fn output(&self, t: f64, x: &[f64], theta: &[f64]) -> DVector<f64> {
        (self.h)(t, x, theta)
    }

    /// `∂f/∂x`, analytic when supplied.
    pub fn jac_x(&self, t: f64, x: &[f64], theta: &[f64]) -> Result<DMatrix<f64>> {
        match &self.jac.f_x {
            Some(j) => Ok(j(t, x, theta)),
            None => self.fd_jac_x(t, x, theta),
        }
    }

    /// `∂f/∂θ`, analytic when supplied.
    pub fn jac_theta(&self, t: f64, x: &[f64], theta: &[f64]) -> Result<DMatrix<f64>> {
        match &self.jac.f_theta {
            Some(j) => Ok(j(t, x, theta)),
            None => self.fd_jac_theta(t, x, theta),
        }
    }

    /// `∂h/∂x`, analytic when supplied.
    pub fn output_jac_x(&self, t: f64, x: &[f64], theta: &[f64]) -> Result<DMatrix<f64>> {
        match &self.jac.h_x {
            Some(j) => Ok(j(t, x, theta)),
            None => finite_diff_jacobian(|z| self.output(t, z, theta), x, &self.state_scales),
        }
    }

    /// `∂h/∂θ`, analytic when supplied.
    pub fn output_jac_theta(&self, t: f64, x: &[f64], theta: &[f64]) -> Result<DMatrix<f64>> {
        match &self.jac.h_theta {
            Some(j) => Ok(j(t, x, theta)),
            None => finite_diff_jacobian(|p| self.output(t, x, p), theta, &self.param_scales),
        }
    }

    pub fn fd_jac_x(&self, t: f64, x: &[f64], theta: &[f64]) -> Result<DMatrix<f64>> {
        finite_diff_jacobian(|z| self.rhs(t, z, theta), x, &self.state_scales)
    }

    pub fn fd_jac_theta(&self, t: f64, x: &[f64], theta: &[f64]) -> Result<DMatrix<f64>> {
        finite_diff_jacobian(|p| self.rhs(t, x, p), theta, &self.param_scales)
    }

    /// Freeze some parameters at given values; the remaining ones keep their order.
    pub fn fix_params(&self, fixed: &[(usize, f64)]) -> Result<ModelSpec> {
        for &(i, _) in fixed {
            if i >= self.n_params {
                return Err(Error::Dimension(format!(
                    "cannot fix parameter {i} of {}",
                    self.n_params
                )));
            }
        }
        let free: Vec<usize> = (0..self.n_params)
            .filter(|i| !fixed.iter().any(|(j, _)| j == i))
            .collect();
        let n_full = self.n_params;
        let fixed: Arc<Vec<(usize, f64)>> = Arc::new(fixed.to_vec());
        let free = Arc::new(free);

        let expand = {
            let fixed = fixed.clone();
            let free = free.clone();
            Arc::new(move |p: &[f64]| {
                let mut full = vec![0.0; n_full];
                for (k, &i) in free.iter().enumerate() {
                    full[i] = p[k];
                }
                for &(i, v) in fixed.iter() {
                    full[i] = v;
                }
                full
            })
        };
        let expand_jet = {
            let fixed = fixed.clone();
            let free = free.clone();
            move |x: &[Jet], p: &[Jet]| {
                let proto = &x[0];
                let mut full = vec![proto.constant_like(0.0); n_full];
                for (k, &i) in free.iter().enumerate() {
                    full[i] = p[k].clone();
                }
                for &(i, v) in fixed.iter() {
                    full[i] = proto.constant_like(v);
                }
                full
            }
        };
        let wrap_vec = |g: &VecMap| -> VecMap {
            let g = g.clone();
            let e = expand.clone();
            Arc::new(move |t, x, p| g(t, x, &e(p)))
        };
        let wrap_mat = |g: &Option<MatMap>| -> Option<MatMap> {
            g.as_ref().map(|g| {
                let g = g.clone();
                let e = expand.clone();
                Arc::new(move |t: f64, x: &[f64], p: &[f64]| g(t, x, &e(p))) as MatMap
            })
        };
        let wrap_mat_cols = |g: &Option<MatMap>| -> Option<MatMap> {
            g.as_ref().map(|g| {
                let g = g.clone();
                let e = expand.clone();
                let free = free.clone();
                Arc::new(move |t: f64, x: &[f64], p: &[f64]| g(t, x, &e(p)).select_columns(free.iter()))
                    as MatMap
            })
        };
        let wrap_jet = |g: &Option<JetMap>| -> Option<JetMap> {
            g.as_ref().map(|g| {
                let g = g.clone();
                let ex = expand_jet.clone();
                Arc::new(move |x: &[Jet], p: &[Jet]| g(x, &ex(x, p))) as JetMap
            })
        };

        Ok(ModelSpec {
            name: self.name.clone(),
            n_states: self.n_states,
            n_params: free.len(),
            n_outputs: self.n_outputs,
            f: wrap_vec(&self.f),
            h: wrap_vec(&self.h),
            jac: Jacobians {
                f_x: wrap_mat(&self.jac.f_x),
                h_x: wrap_mat(&self.jac.h_x),
                f_theta: wrap_mat_cols(&self.jac.f_theta),
                h_theta: wrap_mat_cols(&self.jac.h_theta),
            },
            series_f: wrap_jet(&self.series_f),
            series_h: wrap_jet(&self.series_h),
            state_names: self.state_names.clone(),
            param_names: free.iter().map(|&i| self.param_names[i].clone()).collect(),
            output_names: self.output_names.clone(),
            state_scales: self.state_scales.clone(),
            param_scales: free.iter().map(|&i| self.param_scales[i]).collect(),
            time_varying: self.time_varying,
        })
    }

    /// Same dynamics with the output map replaced.
    pub fn with_output(&self, n_outputs: usize, h: VecMap, names: &[&str]) -> ModelSpec {
        let mut m = self.clone();
        m.n_outputs = n_outputs;
        m.h = h;
        m.jac.h_x = None;
        m.jac.h_theta = None;
        m.series_h = None;
        m.output_names = names.iter().map(|s| s.to_string()).collect();
        m
    }
}
