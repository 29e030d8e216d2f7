//! Gaussian-process binary classification with a probit link.
//!
//! The latent posterior is approximated by Expectation Propagation: each
//! observation contributes a Gaussian site with natural parameters
//! (precision `tau`, precision-scaled mean `nu`). Sites are updated
//! sequentially in training order with damping, and the full posterior is
//! refactorised from scratch after each sweep.
//!
//! All computation happens in the centred latent `g = f - m`, where `m` is the
//! constant prior mean; the mean only enters through the probit likelihood.
//!
//! Pairwise (preference) models use the additive kernel
//! `k((a1, a2), (b1, b2)) = k1(a1, b1) + k2(a2, b2)` and are trained on both
//! orientations of every judgement. The two copies are tied during EP so the
//! posterior stays antisymmetric under swapping the pair.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decimal::fmt17;
use crate::normal;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpError {
    #[error("input dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid training data: {0}")]
    InvalidData(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("malformed model text: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    Rbf,
    AdditivePair,
}

/// Squared-exponential kernel, optionally summed over two input blocks.
///
/// `signal_variance` and `mean_constant` apply per block, so an additive
/// kernel has prior variance `2 * signal_variance` on the diagonal and prior
/// mean `2 * mean_constant`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    #[serde(default)]
    pub mean_constant: f64,
    #[serde(default = "default_jitter")]
    pub jitter: f64,
}

fn default_jitter() -> f64 {
    1e-6
}

impl KernelSpec {
    pub fn rbf(lengthscale: f64, signal_variance: f64) -> Self {
        KernelSpec {
            family: KernelFamily::Rbf,
            lengthscales: vec![lengthscale],
            signal_variance,
            mean_constant: 0.0,
            jitter: default_jitter(),
        }
    }

    pub fn additive_pair(lengthscale: f64, signal_variance: f64) -> Self {
        KernelSpec {
            family: KernelFamily::AdditivePair,
            lengthscales: vec![lengthscale, lengthscale],
            signal_variance,
            mean_constant: 0.0,
            jitter: default_jitter(),
        }
    }

    /// Same kernel with every block lengthscale replaced.
    pub fn with_lengthscale(&self, lengthscale: f64) -> Self {
        let mut out = self.clone();
        out.lengthscales.iter_mut().for_each(|l| *l = lengthscale);
        out
    }

    pub fn blocks(&self) -> usize {
        match self.family {
            KernelFamily::Rbf => 1,
            KernelFamily::AdditivePair => 2,
        }
    }

    pub fn prior_mean(&self) -> f64 {
        self.mean_constant * self.blocks() as f64
    }

    pub fn validate(&self) -> Result<(), GpError> {
        if self.lengthscales.len() != self.blocks() {
            return Err(GpError::InvalidKernel(format!(
                "{:?} needs {} lengthscale(s), got {}",
                self.family,
                self.blocks(),
                self.lengthscales.len()
            )));
        }
        if !self.lengthscales.iter().all(|&l| l.is_finite() && l > 0.0) {
            return Err(GpError::InvalidKernel("lengthscales must be positive".into()));
        }
        if !(self.signal_variance.is_finite() && self.signal_variance > 0.0) {
            return Err(GpError::InvalidKernel("signal variance must be positive".into()));
        }
        if !(self.jitter.is_finite() && self.jitter > 0.0) {
            return Err(GpError::InvalidKernel("jitter must be positive".into()));
        }
        if !self.mean_constant.is_finite() {
            return Err(GpError::InvalidKernel("mean constant must be finite".into()));
        }
        Ok(())
    }

    fn check_dims(&self, a: &[f64], b: &[f64]) -> Result<(), GpError> {
        if a.len() != b.len() || a.is_empty() {
            return Err(GpError::DimensionMismatch(format!("{} vs {}", a.len(), b.len())));
        }
        if self.family == KernelFamily::AdditivePair && !a.len().is_multiple_of(2) {
            return Err(GpError::DimensionMismatch(format!(
                "additive pair kernel needs an even input dimension, got {}",
                a.len()
            )));
        }
        Ok(())
    }

    /// Kernel value `k(a, b)`.
    pub fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64, GpError> {
        self.validate()?;
        self.check_dims(a, b)?;
        Ok(self.eval_unchecked(a, b))
    }

    fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        let rbf = |x: &[f64], y: &[f64], l: f64| {
            let d2: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
            self.signal_variance * (-d2 / (2.0 * l * l)).exp()
        };
        match self.family {
            KernelFamily::Rbf => rbf(a, b, self.lengthscales[0]),
            KernelFamily::AdditivePair => {
                let h = a.len() / 2;
                rbf(&a[..h], &b[..h], self.lengthscales[0])
                    + rbf(&a[h..], &b[h..], self.lengthscales[1])
            }
        }
    }

    /// Gram matrix with `jitter` added to the diagonal.
    pub fn gram(&self, points: &[Vec<f64>]) -> Result<DMatrix<f64>, GpError> {
        self.validate()?;
        if let Some(first) = points.first() {
            for p in points {
                self.check_dims(first, p)?;
            }
        }
        let n = points.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = self.eval_unchecked(&points[i], &points[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
            k[(i, i)] += self.jitter;
        }
        if k.iter().any(|v| !v.is_finite()) {
            return Err(GpError::NonFinite("kernel matrix"));
        }
        Ok(k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpOptions {
    pub max_sweeps: usize,
    pub tol: f64,
    /// Weight on the fresh site update; 1.0 is undamped.
    pub damping: f64,
}

impl Default for EpOptions {
    fn default() -> Self {
        EpOptions { max_sweeps: 100, tol: 1e-6, damping: 0.8 }
    }
}

/// Natural parameters of one EP site.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Site {
    pub tau: f64,
    pub nu: f64,
}

/// Latent predictive marginal and the probit class probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Predictive {
    pub mean: f64,
    pub variance: f64,
    pub class_prob: f64,
}

/// Probit-Gaussian integral `∫ Φ(f) N(f; mean, variance) df`, kept inside (0, 1).
pub fn probit_prob(mean: f64, variance: f64) -> f64 {
    let p = normal::cdf(mean / (1.0 + variance).sqrt());
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// A fitted EP classifier. Immutable once built.
#[derive(Debug, Clone)]
pub struct GpModel {
    inputs: Vec<Vec<f64>>,
    labels: Vec<u8>,
    kernel: KernelSpec,
    sites: Vec<Site>,
    antisymmetric: bool,
    converged: bool,
    sweeps: usize,
    log_marginal: f64,
    // Cached factorisation: L L^T = I + S^1/2 K S^1/2.
    chol: DMatrix<f64>,
    sqrt_tau: DVector<f64>,
    weights: DVector<f64>,
}

fn check_labels(labels: &[u8]) -> Result<(), GpError> {
    match labels.iter().find(|&&y| y > 1) {
        Some(y) => Err(GpError::InvalidData(format!("label {y} is not 0 or 1"))),
        None => Ok(()),
    }
}

fn sign(label: u8) -> f64 {
    if label == 1 {
        1.0
    } else {
        -1.0
    }
}

impl GpModel {
    /// Fits EP to `(inputs, labels)`. Empty data gives the prior.
    pub fn fit(
        inputs: &[Vec<f64>],
        labels: &[u8],
        kernel: &KernelSpec,
        opts: &EpOptions,
    ) -> Result<Self, GpError> {
        if inputs.len() != labels.len() {
            return Err(GpError::InvalidData(format!(
                "{} inputs but {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        check_labels(labels)?;
        Self::fit_inner(inputs.to_vec(), labels.to_vec(), kernel, opts, false)
    }

    /// Fits a preference classifier on `(first, second)` pairs.
    ///
    /// Label 1 means the first element was preferred. Each judgement enters
    /// the fit twice, as `(a, b, y)` and `(b, a, 1 - y)`, with the
    /// lexicographically ordered orientation first, so the result does not
    /// depend on how a judgement was stored.
    pub fn fit_pairwise(
        pairs: &[(Vec<f64>, Vec<f64>)],
        labels: &[u8],
        kernel: &KernelSpec,
        opts: &EpOptions,
    ) -> Result<Self, GpError> {
        if pairs.len() != labels.len() {
            return Err(GpError::InvalidData(format!(
                "{} pairs but {} labels",
                pairs.len(),
                labels.len()
            )));
        }
        check_labels(labels)?;
        kernel.validate()?;
        if kernel.family != KernelFamily::AdditivePair {
            return Err(GpError::InvalidKernel("pairwise fit needs the additive pair kernel".into()));
        }
        if kernel.lengthscales[0] != kernel.lengthscales[1] {
            return Err(GpError::InvalidKernel("pairwise fit needs identical block lengthscales".into()));
        }
        if kernel.mean_constant != 0.0 {
            return Err(GpError::InvalidKernel("pairwise fit needs a zero mean".into()));
        }
        let mut inputs = Vec::with_capacity(2 * pairs.len());
        let mut aug_labels = Vec::with_capacity(2 * pairs.len());
        for ((a, b), &y) in pairs.iter().zip(labels) {
            if a.len() != b.len() {
                return Err(GpError::DimensionMismatch(format!("pair of {} and {}", a.len(), b.len())));
            }
            let forward = [a.as_slice(), b.as_slice()].concat();
            let backward = [b.as_slice(), a.as_slice()].concat();
            let canonical_first = a.partial_cmp(b) != Some(std::cmp::Ordering::Greater);
            if canonical_first {
                inputs.push(forward);
                aug_labels.push(y);
                inputs.push(backward);
                aug_labels.push(1 - y);
            } else {
                inputs.push(backward);
                aug_labels.push(1 - y);
                inputs.push(forward);
                aug_labels.push(y);
            }
        }
        Self::fit_inner(inputs, aug_labels, kernel, opts, true)
    }

    fn fit_inner(
        inputs: Vec<Vec<f64>>,
        labels: Vec<u8>,
        kernel: &KernelSpec,
        opts: &EpOptions,
        antisymmetric: bool,
    ) -> Result<Self, GpError> {
        kernel.validate()?;
        if !(opts.damping > 0.0 && opts.damping <= 1.0) || !(opts.tol > 0.0) {
            return Err(GpError::InvalidData("EP damping must be in (0, 1] and tol positive".into()));
        }
        if inputs.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GpError::NonFinite("training inputs"));
        }
        let k = kernel.gram(&inputs)?;
        let signs: Vec<f64> = labels.iter().map(|&y| sign(y)).collect();
        let ep = run_ep(&k, &signs, kernel.prior_mean(), opts, antisymmetric)?;
        let mut model = GpModel {
            inputs,
            labels,
            kernel: kernel.clone(),
            sites: ep.sites,
            antisymmetric,
            converged: ep.converged,
            sweeps: ep.sweeps,
            log_marginal: 0.0,
            chol: DMatrix::zeros(0, 0),
            sqrt_tau: DVector::zeros(0),
            weights: DVector::zeros(0),
        };
        model.log_marginal = model.refresh_cache(&k)?;
        Ok(model)
    }

    /// Recomputes the cached factorisation from the sites and returns the EP
    /// log evidence.
    fn refresh_cache(&mut self, k: &DMatrix<f64>) -> Result<f64, GpError> {
        let n = self.sites.len();
        let tau = DVector::from_iterator(n, self.sites.iter().map(|s| s.tau));
        let nu = DVector::from_iterator(n, self.sites.iter().map(|s| s.nu));
        let post = Posterior::compute(k, &tau, &nu)?;

        // alpha = nu - sW .* (L^T \ (L \ (sW .* (K nu))))
        let knu = k * &nu;
        let rhs = post.sqrt_tau.component_mul(&knu);
        let solved = solve_chol(&post.chol, &rhs);
        self.weights = &nu - post.sqrt_tau.component_mul(&solved);

        let m0 = self.kernel.prior_mean();
        let signs: Vec<f64> = self.labels.iter().map(|&y| sign(y)).collect();
        let lml = ep_log_evidence(&post, &tau, &nu, &signs, m0);
        if !lml.is_finite() {
            return Err(GpError::NonFinite("log marginal likelihood"));
        }
        self.chol = post.chol;
        self.sqrt_tau = post.sqrt_tau;
        Ok(lml)
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn is_antisymmetric(&self) -> bool {
        self.antisymmetric
    }

    /// EP approximation to `log p(y)`.
    pub fn log_marginal(&self) -> f64 {
        self.log_marginal
    }

    fn raw_latent_many(&self, xs: &[Vec<f64>]) -> Vec<(f64, f64)> {
        let n = self.inputs.len();
        let m0 = self.kernel.prior_mean();
        if n == 0 {
            return xs
                .iter()
                .map(|x| (m0, self.kernel.eval_unchecked(x, x)))
                .collect();
        }
        let mut kstar = DMatrix::zeros(n, xs.len());
        for (j, x) in xs.iter().enumerate() {
            for (i, xi) in self.inputs.iter().enumerate() {
                kstar[(i, j)] = self.kernel.eval_unchecked(xi, x);
            }
        }
        let means = kstar.tr_mul(&self.weights);
        let mut scaled = kstar;
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row *= self.sqrt_tau[i];
        }
        self.chol.solve_lower_triangular_mut(&mut scaled);
        xs.iter()
            .enumerate()
            .map(|(j, x)| {
                let v = scaled.column(j).norm_squared();
                let prior = self.kernel.eval_unchecked(x, x);
                (m0 + means[j], (prior - v).max(0.0))
            })
            .collect()
    }

    /// Latent posterior marginals `(mean, variance)` at many points.
    pub fn predict_latent_many(&self, xs: &[Vec<f64>]) -> Result<Vec<(f64, f64)>, GpError> {
        let reference = self.inputs.first().map(Vec::as_slice);
        for x in xs {
            self.kernel.check_dims(reference.unwrap_or(x), x)?;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(GpError::NonFinite("prediction input"));
            }
        }
        if !self.antisymmetric {
            return Ok(self.raw_latent_many(xs));
        }
        // The tied posterior satisfies f(a, b) = -f(b, a); evaluating both
        // orientations makes that hold to the last bit, including f(t, t) = 0.
        let swapped: Vec<Vec<f64>> = xs
            .iter()
            .map(|x| {
                let h = x.len() / 2;
                [&x[h..], &x[..h]].concat()
            })
            .collect();
        let fwd = self.raw_latent_many(xs);
        let bwd = self.raw_latent_many(&swapped);
        Ok(fwd
            .into_iter()
            .zip(bwd)
            .map(|((mf, vf), (mb, vb))| (0.5 * (mf - mb), 0.5 * (vf + vb)))
            .collect())
    }

    pub fn predict_latent(&self, x: &[f64]) -> Result<(f64, f64), GpError> {
        Ok(self.predict_latent_many(&[x.to_vec()])?[0])
    }

    pub fn predict_many(&self, xs: &[Vec<f64>]) -> Result<Vec<Predictive>, GpError> {
        Ok(self
            .predict_latent_many(xs)?
            .into_iter()
            .map(|(mean, variance)| Predictive { mean, variance, class_prob: probit_prob(mean, variance) })
            .collect())
    }

    pub fn predict(&self, x: &[f64]) -> Result<Predictive, GpError> {
        Ok(self.predict_many(&[x.to_vec()])?[0])
    }

    /// Class probability `Φ(μ / sqrt(1 + σ²))`.
    pub fn predict_prob(&self, x: &[f64]) -> Result<f64, GpError> {
        Ok(self.predict(x)?.class_prob)
    }

    /// Text form: inputs, labels, kernel and sites at 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let family = match self.kernel.family {
            KernelFamily::Rbf => "rbf",
            KernelFamily::AdditivePair => "additive-pair",
        };
        out.push_str("gp-model 1\n");
        out.push_str(&format!(
            "kernel {family} {} {} {}",
            fmt17(self.kernel.signal_variance),
            fmt17(self.kernel.mean_constant),
            fmt17(self.kernel.jitter)
        ));
        for &l in &self.kernel.lengthscales {
            out.push(' ');
            out.push_str(&fmt17(l));
        }
        out.push('\n');
        let dim = self.inputs.first().map_or(0, Vec::len);
        out.push_str(&format!(
            "state {} {} {} {} {}\n",
            self.inputs.len(),
            dim,
            u8::from(self.antisymmetric),
            u8::from(self.converged),
            self.sweeps
        ));
        for ((x, y), s) in self.inputs.iter().zip(&self.labels).zip(&self.sites) {
            out.push_str(&format!("{y} {} {}", fmt17(s.tau), fmt17(s.nu)));
            for &v in x {
                out.push(' ');
                out.push_str(&fmt17(v));
            }
            out.push('\n');
        }
        out
    }

    /// Rebuilds a model from [`GpModel::to_text`] output without rerunning EP.
    pub fn from_text(text: &str) -> Result<Self, GpError> {
        let bad = |m: &str| GpError::Parse(m.to_string());
        let num = |s: &str| s.parse::<f64>().map_err(|_| GpError::Parse(format!("bad number {s:?}")));
        let mut lines = text.lines();
        if lines.next() != Some("gp-model 1") {
            return Err(bad("missing header"));
        }
        let kl: Vec<&str> = lines.next().ok_or_else(|| bad("missing kernel"))?.split_whitespace().collect();
        if kl.len() < 5 || kl[0] != "kernel" {
            return Err(bad("kernel line"));
        }
        let family = match kl[1] {
            "rbf" => KernelFamily::Rbf,
            "additive-pair" => KernelFamily::AdditivePair,
            other => return Err(GpError::Parse(format!("unknown family {other}"))),
        };
        let kernel = KernelSpec {
            family,
            signal_variance: num(kl[2])?,
            mean_constant: num(kl[3])?,
            jitter: num(kl[4])?,
            lengthscales: kl[5..].iter().map(|s| num(s)).collect::<Result<_, _>>()?,
        };
        kernel.validate()?;
        let st: Vec<&str> = lines.next().ok_or_else(|| bad("missing state"))?.split_whitespace().collect();
        if st.len() != 6 || st[0] != "state" {
            return Err(bad("state line"));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| GpError::Parse(format!("bad integer {s:?}")));
        let (n, dim) = (int(st[1])?, int(st[2])?);
        let antisymmetric = st[3] == "1";
        let converged = st[4] == "1";
        let sweeps = int(st[5])?;
        let mut inputs = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        let mut sites = Vec::with_capacity(n);
        for _ in 0..n {
            let f: Vec<&str> = lines.next().ok_or_else(|| bad("truncated sites"))?.split_whitespace().collect();
            if f.len() != 3 + dim {
                return Err(bad("site line width"));
            }
            let y: u8 = f[0].parse().map_err(|_| bad("label"))?;
            labels.push(y);
            sites.push(Site { tau: num(f[1])?, nu: num(f[2])? });
            inputs.push(f[3..].iter().map(|s| num(s)).collect::<Result<Vec<_>, _>>()?);
        }
        check_labels(&labels)?;
        if sites.iter().any(|s| s.tau < 0.0) {
            return Err(bad("negative site precision"));
        }
        let k = kernel.gram(&inputs)?;
        let mut model = GpModel {
            inputs,
            labels,
            kernel,
            sites,
            antisymmetric,
            converged,
            sweeps,
            log_marginal: 0.0,
            chol: DMatrix::zeros(0, 0),
            sqrt_tau: DVector::zeros(0),
            weights: DVector::zeros(0),
        };
        model.log_marginal = model.refresh_cache(&k)?;
        Ok(model)
    }
}

impl fmt::Display for GpModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "GpModel(n={}, family={:?}, lengthscales={:?}, converged={}, lml={:.4})",
            self.len(),
            self.kernel.family,
            self.kernel.lengthscales,
            self.converged,
            self.log_marginal
        )
    }
}

struct EpResult {
    sites: Vec<Site>,
    converged: bool,
    sweeps: usize,
}

/// Gaussian posterior `N(mu, Sigma)` over the centred latent for given sites.
struct Posterior {
    sigma: DMatrix<f64>,
    mu: DVector<f64>,
    chol: DMatrix<f64>,
    sqrt_tau: DVector<f64>,
}

impl Posterior {
    fn compute(k: &DMatrix<f64>, tau: &DVector<f64>, nu: &DVector<f64>) -> Result<Self, GpError> {
        let n = k.nrows();
        let sqrt_tau = tau.map(f64::sqrt);
        let mut b = DMatrix::identity(n, n);
        for j in 0..n {
            for i in 0..n {
                b[(i, j)] += sqrt_tau[i] * k[(i, j)] * sqrt_tau[j];
            }
        }
        let chol = b
            .cholesky()
            .ok_or(GpError::NonFinite("EP factorisation"))?
            .unpack();
        // V = L \ (sW K); Sigma = K - V^T V
        let mut v = k.clone();
        for (i, mut row) in v.row_iter_mut().enumerate() {
            row *= sqrt_tau[i];
        }
        chol.solve_lower_triangular_mut(&mut v);
        let sigma = k - v.tr_mul(&v);
        let mu = &sigma * nu;
        Ok(Posterior { sigma, mu, chol, sqrt_tau })
    }
}

fn solve_chol(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut x = b.clone();
    l.solve_lower_triangular_mut(&mut x);
    l.tr_solve_lower_triangular_mut(&mut x);
    x
}

/// Moments of the tilted distribution `N(g; mu, s2) Φ(y (g + m0))`:
/// returns (log normaliser, mean, variance).
fn tilted_moments(y: f64, mu: f64, s2: f64, m0: f64) -> (f64, f64, f64) {
    let denom = (1.0 + s2).sqrt();
    let z = y * (mu + m0) / denom;
    let log_z = normal::log_cdf(z);
    let r = normal::pdf_over_cdf(z);
    let mean = mu + y * s2 * r / denom;
    let var = s2 - s2 * s2 * r * (z + r) / (1.0 + s2);
    (log_z, mean, var)
}

fn rank_one_update(sigma: &mut DMatrix<f64>, i: usize, delta_tau: f64) {
    if delta_tau == 0.0 {
        return;
    }
    let s = sigma.column(i).clone_owned();
    let c = delta_tau / (1.0 + delta_tau * s[i]);
    sigma.ger(-c, &s, &s, 1.0);
}

fn run_ep(
    k: &DMatrix<f64>,
    signs: &[f64],
    m0: f64,
    opts: &EpOptions,
    tied: bool,
) -> Result<EpResult, GpError> {
    let n = signs.len();
    let mut tau = DVector::<f64>::zeros(n);
    let mut nu = DVector::<f64>::zeros(n);
    if n == 0 {
        return Ok(EpResult { sites: vec![], converged: true, sweeps: 0 });
    }
    let mut sigma = k.clone();
    let mut mu = DVector::<f64>::zeros(n);
    let d = opts.damping;
    let step = if tied { 2 } else { 1 };
    let mut converged = false;
    let mut sweeps = 0;

    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut max_change = 0.0f64;
        for i in (0..n).step_by(step) {
            let s2 = sigma[(i, i)];
            let tau_cav = 1.0 / s2 - tau[i];
            if !(tau_cav > 0.0) {
                continue;
            }
            let nu_cav = mu[i] / s2 - nu[i];
            let s2_cav = 1.0 / tau_cav;
            let mu_cav = nu_cav * s2_cav;
            let (_, mean_hat, var_hat) = tilted_moments(signs[i], mu_cav, s2_cav, m0);
            let tau_fresh = 1.0 / var_hat - tau_cav;
            let nu_fresh = mean_hat / var_hat - nu_cav;
            let tau_new = (d * tau_fresh + (1.0 - d) * tau[i]).max(0.0);
            let nu_new = d * nu_fresh + (1.0 - d) * nu[i];
            if !(tau_new.is_finite() && nu_new.is_finite()) {
                return Err(GpError::NonFinite("EP site update"));
            }
            max_change = max_change.max((tau_new - tau[i]).abs()).max((nu_new - nu[i]).abs());

            rank_one_update(&mut sigma, i, tau_new - tau[i]);
            tau[i] = tau_new;
            nu[i] = nu_new;
            if tied {
                let j = i + 1;
                rank_one_update(&mut sigma, j, tau_new - tau[j]);
                tau[j] = tau_new;
                nu[j] = -nu_new;
            }
            mu = &sigma * &nu;
        }
        let post = Posterior::compute(k, &tau, &nu)?;
        sigma = post.sigma;
        mu = post.mu;
        if max_change < opts.tol {
            converged = true;
            break;
        }
    }
    let sites = tau.iter().zip(nu.iter()).map(|(&tau, &nu)| Site { tau, nu }).collect();
    Ok(EpResult { sites, converged, sweeps })
}

fn ep_log_evidence(post: &Posterior, tau: &DVector<f64>, nu: &DVector<f64>, signs: &[f64], m0: f64) -> f64 {
    let n = tau.len();
    if n == 0 {
        return 0.0;
    }
    let v = post.sigma.diagonal();
    let mut sum_lz = 0.0;
    let mut sum_log1p = 0.0;
    let mut quad_terms = 0.0;
    for i in 0..n {
        let tau_cav = 1.0 / v[i] - tau[i];
        let nu_cav = post.mu[i] / v[i] - nu[i];
        let (log_z, _, _) = tilted_moments(signs[i], nu_cav / tau_cav, 1.0 / tau_cav, m0);
        sum_lz += log_z;
        sum_log1p += (tau[i] / tau_cav).ln_1p();
        let p = nu[i];
        let q = nu_cav;
        quad_terms += v[i] * p * p / 2.0 - q * ((tau[i] / tau_cav) * q - 2.0 * p) * v[i] / 2.0;
    }
    let log_det: f64 = post.chol.diagonal().iter().map(|d| d.ln()).sum();
    let p_sigma_p = nu.dot(&(&post.sigma * nu));
    let neg = log_det - sum_lz - p_sigma_p / 2.0 + quad_terms - sum_log1p / 2.0;
    -neg
}

/// Outcome of a hyperparameter search.
#[derive(Debug, Clone)]
pub struct HyperSelection {
    pub kernel: KernelSpec,
    pub model: GpModel,
    /// True when no candidate converged and the fallback kernel was used.
    pub fallback: bool,
}

/// Selects the candidate kernel with the largest EP log evidence among the
/// candidates whose EP converged. Ties keep the earliest candidate.
pub fn optimize_hypers(
    candidates: &[KernelSpec],
    fallback: &KernelSpec,
    fit: impl Fn(&KernelSpec) -> Result<GpModel, GpError>,
) -> Result<HyperSelection, GpError> {
    if candidates.is_empty() {
        return Err(GpError::InvalidKernel("empty hyperparameter grid".into()));
    }
    let mut best: Option<GpModel> = None;
    for cand in candidates {
        let model = match fit(cand) {
            Ok(m) => m,
            Err(GpError::NonFinite(_)) => continue,
            Err(e) => return Err(e),
        };
        if !model.converged() {
            continue;
        }
        if best.as_ref().is_none_or(|b| model.log_marginal() > b.log_marginal()) {
            best = Some(model);
        }
    }
    match best {
        Some(model) => Ok(HyperSelection { kernel: model.kernel().clone(), model, fallback: false }),
        None => {
            let model = fit(fallback)?;
            Ok(HyperSelection { kernel: fallback.clone(), model, fallback: true })
        }
    }
}

/// `count` lengthscales log-spaced over `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![(lo * hi).sqrt()],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
                .collect()
        }
    }
}
