//! Vicinity functions `V(. | theta(z_n))`, the vicinal distribution `P_nu`,
//! the convolution `phi(f, a)` and the vicinal risk `R_nu f`.

use rand::Rng as _;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, VrmError};
use crate::function::PointFunction;
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::sample::{Provenance, SampleSet, Split, MAX_DIM};
use crate::stats::Estimate;

/// Default number of Monte Carlo draws per anchor.
pub const DEFAULT_DRAWS: usize = 256;

/// Which coordinates a vicinity perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    InputsOnly,
    Joint,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VicinityKind {
    /// Point mass at the anchor.
    Dirac,
    /// Uniform on the Euclidean ball of the given radius.
    UniformBall { radius: f64 },
    /// Independent normal noise; one standard deviation for every perturbed
    /// coordinate or one per coordinate.
    Gaussian { std: Vec<f64> },
    /// Normal noise with a full covariance matrix over the perturbed block.
    GaussianCovariance { covariance: Vec<Vec<f64>> },
    /// `lambda * z_n + (1 - lambda) * z_m`, `lambda ~ Beta(alpha, alpha)`,
    /// `z_m` uniform from the partner pool (the anchors when no pool is given).
    Mixup { alpha: f64, lambda: Option<f64>, pool: Option<SampleSet> },
}

/// A vicinity family plus the coordinates it acts on.
///
/// JSON form: `{"kind": "gaussian", "std": [0.1], "scope": "inputs_only"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct VicinitySpec {
    pub kind: VicinityKind,
    /// Defaults to inputs-only for balls and Gaussians; mixup is always joint.
    pub scope: Option<Scope>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum KindTag {
    Dirac,
    UniformBall,
    Gaussian,
    GaussianCovariance,
    Mixup,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecRepr {
    kind: KindTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    std: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    covariance: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pool: Option<SampleSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scope: Option<Scope>,
}

impl From<VicinitySpec> for SpecRepr {
    fn from(s: VicinitySpec) -> Self {
        let mut r = SpecRepr {
            kind: KindTag::Dirac,
            radius: None,
            std: None,
            covariance: None,
            alpha: None,
            lambda: None,
            pool: None,
            scope: s.scope,
        };
        match s.kind {
            VicinityKind::Dirac => {}
            VicinityKind::UniformBall { radius } => {
                r.kind = KindTag::UniformBall;
                r.radius = Some(radius);
            }
            VicinityKind::Gaussian { std } => {
                r.kind = KindTag::Gaussian;
                r.std = Some(std);
            }
            VicinityKind::GaussianCovariance { covariance } => {
                r.kind = KindTag::GaussianCovariance;
                r.covariance = Some(covariance);
            }
            VicinityKind::Mixup { alpha, lambda, pool } => {
                r.kind = KindTag::Mixup;
                r.alpha = Some(alpha);
                r.lambda = lambda;
                r.pool = pool;
            }
        }
        r
    }
}

impl TryFrom<SpecRepr> for VicinitySpec {
    type Error = String;

    fn try_from(r: SpecRepr) -> std::result::Result<Self, String> {
        fn need<T>(v: Option<T>, field: &str, kind: &str) -> std::result::Result<T, String> {
            v.ok_or_else(|| format!("vicinity `{kind}` requires `{field}`"))
        }
        let stray = |present: bool, field: &str| -> std::result::Result<(), String> {
            if present {
                Err(format!("field `{field}` does not apply to this vicinity kind"))
            } else {
                Ok(())
            }
        };
        let kind = match r.kind {
            KindTag::Dirac => VicinityKind::Dirac,
            KindTag::UniformBall => VicinityKind::UniformBall { radius: need(r.radius, "radius", "uniform_ball")? },
            KindTag::Gaussian => VicinityKind::Gaussian { std: need(r.std.clone(), "std", "gaussian")? },
            KindTag::GaussianCovariance => VicinityKind::GaussianCovariance {
                covariance: need(r.covariance.clone(), "covariance", "gaussian_covariance")?,
            },
            KindTag::Mixup => {
                VicinityKind::Mixup { alpha: need(r.alpha, "alpha", "mixup")?, lambda: r.lambda, pool: r.pool.clone() }
            }
        };
        stray(r.radius.is_some() && r.kind != KindTag::UniformBall, "radius")?;
        stray(r.std.is_some() && r.kind != KindTag::Gaussian, "std")?;
        stray(r.covariance.is_some() && r.kind != KindTag::GaussianCovariance, "covariance")?;
        let mixup = r.kind == KindTag::Mixup;
        stray(!mixup && (r.alpha.is_some() || r.lambda.is_some() || r.pool.is_some()), "alpha/lambda/pool")?;
        Ok(VicinitySpec { kind, scope: r.scope })
    }
}

impl VicinitySpec {
    pub fn dirac() -> Self {
        Self { kind: VicinityKind::Dirac, scope: None }
    }

    pub fn uniform_ball(radius: f64) -> Self {
        Self { kind: VicinityKind::UniformBall { radius }, scope: None }
    }

    pub fn gaussian(std: f64) -> Self {
        Self { kind: VicinityKind::Gaussian { std: vec![std] }, scope: None }
    }

    pub fn mixup(alpha: f64) -> Self {
        Self { kind: VicinityKind::Mixup { alpha, lambda: None, pool: None }, scope: None }
    }

    pub fn with_scope(mut self, scope: Scope) -> Self {
        self.scope = Some(scope);
        self
    }

    pub fn is_dirac(&self) -> bool {
        matches!(self.kind, VicinityKind::Dirac)
    }

    pub fn effective_scope(&self) -> Scope {
        match (&self.kind, self.scope) {
            (VicinityKind::Mixup { .. }, _) => Scope::Joint,
            (_, Some(s)) => s,
            (_, None) => Scope::InputsOnly,
        }
    }

    /// Number of perturbed coordinates for points with this split.
    pub fn perturbed_dim(&self, split: Split) -> usize {
        match self.effective_scope() {
            Scope::InputsOnly => split.input_dim,
            Scope::Joint => split.dim(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            VicinityKind::Dirac => "dirac",
            VicinityKind::UniformBall { .. } => "uniform_ball",
            VicinityKind::Gaussian { .. } => "gaussian",
            VicinityKind::GaussianCovariance { .. } => "gaussian_covariance",
            VicinityKind::Mixup { .. } => "mixup",
        }
    }

    /// Binds the spec to points with `split`. `default_pool` is the partner
    /// pool used by mixup when the spec carries none.
    pub fn resolve<'a>(&'a self, split: Split, default_pool: Option<&'a SampleSet>) -> Result<Vicinity<'a>> {
        let d = self.perturbed_dim(split);
        let mut cholesky = Vec::new();
        let mut pool = None;
        match &self.kind {
            VicinityKind::Dirac => {}
            VicinityKind::UniformBall { radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return invalid("ball radius must be positive");
                }
            }
            VicinityKind::Gaussian { std } => {
                if std.len() != 1 && std.len() != d {
                    return Err(VrmError::DimensionMismatch { expected: d, found: std.len() });
                }
                if std.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                    return invalid("Gaussian standard deviations must be positive");
                }
            }
            VicinityKind::GaussianCovariance { covariance } => {
                cholesky = cholesky_lower(covariance, d)?;
            }
            VicinityKind::Mixup { alpha, lambda, pool: own } => {
                if self.scope == Some(Scope::InputsOnly) {
                    return invalid("mixup vicinities act on all coordinates");
                }
                if !(alpha.is_finite() && *alpha > 0.0) {
                    return invalid("mixup alpha must be positive");
                }
                if let Some(l) = lambda {
                    if !(0.0..=1.0).contains(l) {
                        return invalid("mixup lambda override must lie in [0, 1]");
                    }
                }
                let p = own
                    .as_ref()
                    .or(default_pool)
                    .ok_or_else(|| VrmError::InvalidParameter("mixup needs a non-empty partner pool".into()))?;
                if p.split() != split {
                    return Err(VrmError::DimensionMismatch { expected: split.dim(), found: p.dim() });
                }
                pool = Some(p);
            }
        }
        let gamma = match &self.kind {
            VicinityKind::Mixup { alpha, lambda: None, .. } => {
                Some(Gamma::new(*alpha, 1.0).map_err(|e| VrmError::InvalidParameter(e.to_string()))?)
            }
            _ => None,
        };
        Ok(Vicinity { spec: self, split, perturbed: d, cholesky, pool, gamma })
    }
}

fn cholesky_lower(cov: &[Vec<f64>], d: usize) -> Result<Vec<f64>> {
    if cov.len() != d || cov.iter().any(|r| r.len() != d) {
        return Err(VrmError::DimensionMismatch { expected: d, found: cov.len() });
    }
    for (i, row) in cov.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() || (v - cov[j][i]).abs() > 1e-12 * (1.0 + v.abs()) {
                return invalid("covariance must be finite and symmetric");
            }
        }
    }
    let m = nalgebra::DMatrix::from_fn(d, d, |i, j| cov[i][j]);
    let chol = nalgebra::Cholesky::new(m)
        .ok_or_else(|| VrmError::InvalidParameter("covariance must be positive definite".into()))?;
    let l = chol.l();
    Ok((0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| l[(i, j)]).collect())
}

/// A vicinity bound to a point layout and partner pool.
#[derive(Debug, Clone)]
pub struct Vicinity<'a> {
    spec: &'a VicinitySpec,
    split: Split,
    perturbed: usize,
    cholesky: Vec<f64>,
    pool: Option<&'a SampleSet>,
    gamma: Option<Gamma<f64>>,
}

impl Vicinity<'_> {
    pub fn spec(&self) -> &VicinitySpec {
        self.spec
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn is_dirac(&self) -> bool {
        self.spec.is_dirac()
    }

    /// Draws one point from `V(. | theta(anchor))` into `out`.
    pub fn perturb(&self, anchor: &[f64], rng: &mut Rng, out: &mut [f64]) {
        out.copy_from_slice(anchor);
        let d = self.perturbed;
        match &self.spec.kind {
            VicinityKind::Dirac => {}
            VicinityKind::UniformBall { radius } => {
                let mut dir = [0.0f64; MAX_DIM];
                let mut norm = 0.0;
                while norm == 0.0 {
                    for v in dir[..d].iter_mut() {
                        *v = StandardNormal.sample(rng);
                    }
                    norm = dir[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
                }
                let u: f64 = rng.random();
                let scale = radius * u.powf(1.0 / d as f64) / norm;
                for (o, v) in out[..d].iter_mut().zip(&dir[..d]) {
                    *o += scale * v;
                }
            }
            VicinityKind::Gaussian { std } => {
                for (i, o) in out[..d].iter_mut().enumerate() {
                    let e: f64 = StandardNormal.sample(rng);
                    *o += std[if std.len() == 1 { 0 } else { i }] * e;
                }
            }
            VicinityKind::GaussianCovariance { .. } => {
                let mut e = [0.0f64; MAX_DIM];
                for v in e[..d].iter_mut() {
                    *v = StandardNormal.sample(rng);
                }
                for i in 0..d {
                    let row = &self.cholesky[i * d..i * d + i + 1];
                    out[i] += row.iter().zip(&e[..=i]).map(|(l, v)| l * v).sum::<f64>();
                }
            }
            VicinityKind::Mixup { lambda, .. } => {
                let lam = match (lambda, &self.gamma) {
                    (Some(l), _) => *l,
                    (None, Some(g)) => beta_from_gammas(g, rng),
                    (None, None) => unreachable!("gamma sampler built at resolve time"),
                };
                let pool = self.pool.expect("pool bound at resolve time");
                let partner = pool.row(rng.random_range(0..pool.len()));
                for (o, p) in out.iter_mut().zip(partner) {
                    *o = lam * *o + (1.0 - lam) * p;
                }
            }
        }
    }

    /// `phi(f, a)` for every `f` in `fs`, all sharing the same `m` draws.
    /// Dirac returns `f(a)` exactly without sampling.
    pub fn phi_all<F: PointFunction>(&self, fs: &[F], anchor: &[f64], m: usize, seed: u64) -> Vec<Estimate> {
        if self.is_dirac() || m == 0 {
            return fs.iter().map(|f| Estimate::exact(f.eval(anchor))).collect();
        }
        let k = self.split.dim();
        let mut rng = rng_from_seed(seed);
        let mut buf = [0.0f64; MAX_DIM];
        // Welford accumulators.
        let mut mean = vec![0.0f64; fs.len()];
        let mut m2 = vec![0.0f64; fs.len()];
        for t in 0..m {
            self.perturb(anchor, &mut rng, &mut buf[..k]);
            let count = (t + 1) as f64;
            for (i, f) in fs.iter().enumerate() {
                let v = f.eval(&buf[..k]);
                let delta = v - mean[i];
                mean[i] += delta / count;
                m2[i] += delta * (v - mean[i]);
            }
        }
        mean.into_iter()
            .zip(m2)
            .map(|(mu, s)| {
                let se = if m > 1 { (s / (m - 1) as f64 / m as f64).sqrt() } else { 0.0 };
                Estimate { value: mu, std_error: se }
            })
            .collect()
    }

    pub fn phi<F: PointFunction>(&self, f: &F, anchor: &[f64], m: usize, seed: u64) -> Estimate {
        self.phi_all(std::slice::from_ref(f), anchor, m, seed)[0]
    }

    /// `(1/N) sum_n phi(f_i, z_n)` for each `f_i`; anchor `n` uses the stream
    /// `derive_seed(seed, n)` shared by every `f_i`.
    pub fn vicinal_risks<F: PointFunction>(&self, fs: &[F], z: &SampleSet, m: usize, seed: u64) -> Vec<Estimate> {
        let per_anchor: Vec<Vec<Estimate>> =
            z.rows().enumerate().map(|(n, a)| self.phi_all(fs, a, m, derive_seed(seed, n as u64))).collect();
        let count = z.len() as f64;
        (0..fs.len())
            .map(|i| {
                let mut sum = 0.0;
                let mut var = 0.0;
                for est in &per_anchor {
                    sum += est[i].value;
                    var += est[i].std_error * est[i].std_error;
                }
                Estimate { value: sum / count, std_error: var.sqrt() / count }
            })
            .collect()
    }
}

/// `X / (X + Y)` with `X, Y ~ Gamma(alpha, 1)`.
fn beta_from_gammas(gamma: &Gamma<f64>, rng: &mut Rng) -> f64 {
    loop {
        let x = gamma.sample(rng);
        let y = gamma.sample(rng);
        let s = x + y;
        if s > 0.0 {
            return x / s;
        }
    }
}

/// The vicinal distribution `P_nu = (1/N) sum_n V(. | theta(z_n))`.
#[derive(Debug, Clone)]
pub struct VicinalDistribution {
    pub anchors: SampleSet,
    pub spec: VicinitySpec,
}

impl VicinalDistribution {
    pub fn new(anchors: SampleSet, spec: VicinitySpec) -> Result<Self> {
        spec.resolve(anchors.split(), Some(&anchors))?;
        Ok(Self { anchors, spec })
    }

    pub fn vicinity(&self) -> Vicinity<'_> {
        self.spec.resolve(self.anchors.split(), Some(&self.anchors)).expect("validated at construction")
    }
}

/// `m` draws from `P_nu`: a uniform anchor, then a draw from its vicinity.
pub fn sample_vicinal(vd: &VicinalDistribution, m: usize, seed: u64) -> Result<SampleSet> {
    if m == 0 {
        return invalid("number of draws must be at least 1");
    }
    let vic = vd.vicinity();
    let k = vd.anchors.dim();
    let mut rng = rng_from_seed(seed);
    let mut data = vec![0.0; m * k];
    for row in data.chunks_exact_mut(k) {
        let n = rng.random_range(0..vd.anchors.len());
        vic.perturb(vd.anchors.row(n), &mut rng, row);
    }
    SampleSet::from_flat(
        data,
        vd.anchors.split(),
        Provenance { generator: format!("vicinal:{}", vd.spec.name()), seed: Some(seed) },
    )
}

/// Monte Carlo estimate of `phi(f, a) = int f dV(. | theta(a))`. Mixup draws
/// partners from the spec's pool, or from `{a}` alone when it has none.
pub fn phi<F: PointFunction>(
    f: &F,
    anchor: &[f64],
    split: Split,
    spec: &VicinitySpec,
    m: usize,
    seed: u64,
) -> Result<Estimate> {
    if anchor.len() != split.dim() {
        return Err(VrmError::DimensionMismatch { expected: split.dim(), found: anchor.len() });
    }
    if m == 0 {
        return invalid("number of draws must be at least 1");
    }
    let own = SampleSet::from_flat(anchor.to_vec(), split, Provenance::manual())?;
    let vic = spec.resolve(split, Some(&own))?;
    Ok(vic.phi(f, anchor, m, seed))
}

/// `R_nu f = (1/N) sum_n phi(f, z_n)`, mixup partners drawn from `Z`.
pub fn vicinal_risk<F: PointFunction>(
    f: &F,
    z: &SampleSet,
    spec: &VicinitySpec,
    m: usize,
    seed: u64,
) -> Result<Estimate> {
    if m == 0 {
        return invalid("number of draws must be at least 1");
    }
    let vic = spec.resolve(z.split(), Some(z))?;
    Ok(vic.vicinal_risks(std::slice::from_ref(f), z, m, seed)[0])
}
