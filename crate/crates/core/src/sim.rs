//! Synthetic reduced-rank regression data.
//!
//! Designs have AR(η) column correlation `Σ_ij = η^|i−j|`. When `n ≥ p` the
//! rows are i.i.d. `N(0, Σ)`; when `n < p` the design is `X = X₁X₂Σ^{1/2}`
//! with Gaussian `X₁ ∈ R^{n×q}`, `X₂ ∈ R^{q×p}`, so `rank(X) = q`.
//! Coefficients are `A = b₀ M₁M₂` with Gaussian `M₁ ∈ R^{p×r}`,
//! `M₂ ∈ R^{r×m}`, optionally given a polynomially decaying tail of
//! singular values.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal, StudentT, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RrrError};
use crate::matrix::{projection, singular_values, svd_of, DataMatrix, ProjectionOp, DEFAULT_RANK_TOL};
use crate::rng::{purpose, substream, Stream};

/// Distribution of the i.i.d. error entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorLaw {
    Gaussian,
    StudentT {
        nu: f64,
    },
    /// `uniform(−√3, √3)`, unit variance.
    Uniform,
}

impl ErrorLaw {
    pub fn label(&self) -> String {
        match self {
            ErrorLaw::Gaussian => "gaussian".into(),
            ErrorLaw::StudentT { nu } => format!("t{nu}"),
            ErrorLaw::Uniform => "uniform".into(),
        }
    }
}

/// Decaying tail added to the singular values of an exact rank-r coefficient:
/// `d_j = d_r · γ · (j − r + 1)^{−β}` for `j > r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxLowRank {
    pub gamma: f64,
    pub beta: u32,
}

fn default_sigma() -> f64 {
    1.0
}

/// One simulation scenario. Field names match the JSON scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    /// `rank(X)`; must equal `p` when `n ≥ p`.
    pub q: usize,
    pub r: usize,
    pub eta: f64,
    pub b0: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    pub error_law: ErrorLaw,
    #[serde(default)]
    pub approx_low_rank: Option<ApproxLowRank>,
    /// Rescale t-distributed errors to unit variance.
    #[serde(default)]
    pub standardize: bool,
    /// Use `X = I_n` (model `Y = A + E`, `p = q = n`).
    #[serde(default)]
    pub identity_design: bool,
    pub seed: u64,
}

impl SimScenario {
    /// Gaussian scenario with `σ = 1`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(n: usize, m: usize, p: usize, q: usize, r: usize, eta: f64, b0: f64, seed: u64) -> Self {
        SimScenario {
            n,
            m,
            p,
            q,
            r,
            eta,
            b0,
            sigma: 1.0,
            error_law: ErrorLaw::Gaussian,
            approx_low_rank: None,
            standardize: false,
            identity_design: false,
            seed,
        }
    }

    /// `Y = A + E` with `A ∈ R^{n×m}`.
    pub fn direct(n: usize, m: usize, r: usize, b0: f64, seed: u64) -> Self {
        SimScenario {
            identity_design: true,
            ..Self::new(n, m, n, n, r, 0.0, b0, seed)
        }
    }

    pub fn with_law(mut self, law: ErrorLaw) -> Self {
        self.error_law = law;
        self
    }

    pub fn with_rank(&self, r: usize) -> Self {
        SimScenario { r, ..self.clone() }
    }

    pub fn with_b0(&self, b0: f64) -> Self {
        SimScenario { b0, ..self.clone() }
    }

    pub fn high_dimensional(&self) -> bool {
        self.n < self.p
    }

    /// `N = q ∧ m`.
    pub fn n_max(&self) -> usize {
        self.q.min(self.m)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(RrrError::ConfigError(msg));
        if self.n == 0 || self.m == 0 || self.p == 0 || self.q == 0 {
            return fail("dimensions must be positive".into());
        }
        if self.identity_design {
            if self.p != self.n || self.q != self.n {
                return fail("identity design needs p = q = n".into());
            }
        } else if self.high_dimensional() {
            if self.q > self.n {
                return fail(format!("q = {} exceeds n = {}", self.q, self.n));
            }
        } else if self.q != self.p {
            return fail(format!(
                "low-dimensional design has rank p = {}, got q = {}",
                self.p, self.q
            ));
        }
        if self.r > self.q.min(self.m) {
            return fail(format!("r = {} exceeds q ∧ m = {}", self.r, self.q.min(self.m)));
        }
        if !(0.0..1.0).contains(&self.eta) {
            return fail(format!("eta must lie in [0, 1), got {}", self.eta));
        }
        if !(self.b0 > 0.0) || !(self.sigma > 0.0) {
            return fail("b0 and sigma must be positive".into());
        }
        if let ErrorLaw::StudentT { nu } = self.error_law {
            if !(nu >= 5.0) {
                return fail(format!("t errors need nu ≥ 5 (finite fourth moment), got {nu}"));
            }
        }
        if let Some(a) = self.approx_low_rank {
            if !(a.gamma > 0.0 && a.gamma < 1.0) || a.beta == 0 {
                return fail("approx_low_rank needs gamma in (0, 1) and beta ≥ 1".into());
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sc: SimScenario = serde_json::from_str(s)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut Stream) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Lower Cholesky factor of the AR(η) correlation matrix.
///
/// Closed form: `L_i0 = η^i` and `L_ij = η^{i−j} √(1−η²)` for `1 ≤ j ≤ i`.
fn ar_cholesky(p: usize, eta: f64) -> DMatrix<f64> {
    let tail = (1.0 - eta * eta).sqrt();
    DMatrix::from_fn(p, p, |i, j| {
        if j > i {
            0.0
        } else if j == 0 {
            eta.powi(i as i32)
        } else {
            eta.powi((i - j) as i32) * tail
        }
    })
}

/// Design matrix `X` (n × p).
pub fn gen_design(sc: &SimScenario, rng: &mut Stream) -> DataMatrix {
    if sc.identity_design {
        return DataMatrix::identity(sc.n);
    }
    let l_t = ar_cholesky(sc.p, sc.eta).transpose();
    let x = if sc.high_dimensional() {
        let x1 = gaussian_matrix(sc.n, sc.q, rng);
        let x2 = gaussian_matrix(sc.q, sc.p, rng);
        x1 * (x2 * l_t)
    } else {
        gaussian_matrix(sc.n, sc.p, rng) * l_t
    };
    DataMatrix::from_trusted(x)
}

/// Coefficient matrix `A` (p × m).
pub fn gen_coefficient(sc: &SimScenario, rng: &mut Stream) -> DataMatrix {
    if sc.r == 0 {
        return DataMatrix::zeros(sc.p, sc.m);
    }
    let m1 = gaussian_matrix(sc.p, sc.r, rng);
    let m2 = gaussian_matrix(sc.r, sc.m, rng);
    let exact = (m1 * m2) * sc.b0;
    let Some(decay) = sc.approx_low_rank else {
        return DataMatrix::from_trusted(exact);
    };
    let f = svd_of(&exact);
    let r = sc.r;
    let d_r = f.singular_values[r - 1];
    let mut values = f.singular_values.clone();
    for (idx, v) in values.iter_mut().enumerate().skip(r) {
        let j = idx + 1;
        *v = d_r * decay.gamma * ((j - r + 1) as f64).powi(-(decay.beta as i32));
    }
    let scaled = DMatrix::from_fn(
        f.left.ncols(),
        f.right.ncols(),
        |i, j| {
            if i == j {
                values[i]
            } else {
                0.0
            }
        },
    );
    DataMatrix::from_trusted(&f.left * scaled * f.right.transpose())
}

/// Error matrix with i.i.d. entries.
///
/// Gaussian entries are scaled by `sigma`; t entries are raw (variance
/// `ν/(ν−2)`) unless `standardize` is set; uniform entries have unit variance.
pub fn gen_noise(
    rows: usize,
    cols: usize,
    sigma: f64,
    law: ErrorLaw,
    standardize: bool,
    rng: &mut Stream,
) -> Result<DataMatrix> {
    let m = match law {
        ErrorLaw::Gaussian => DMatrix::from_fn(rows, cols, |_, _| {
            sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
        }),
        ErrorLaw::StudentT { nu } => {
            if !(nu >= 5.0) {
                return Err(RrrError::ConfigError(format!("t errors need nu ≥ 5, got {nu}")));
            }
            let dist = StudentT::new(nu).map_err(|e| RrrError::ConfigError(e.to_string()))?;
            let scale = if standardize { ((nu - 2.0) / nu).sqrt() } else { 1.0 };
            DMatrix::from_fn(rows, cols, |_, _| scale * dist.sample(rng))
        }
        ErrorLaw::Uniform => {
            let h = 3f64.sqrt();
            let dist = Uniform::new(-h, h).expect("valid bounds");
            DMatrix::from_fn(rows, cols, |_, _| dist.sample(rng))
        }
    };
    Ok(DataMatrix::from_trusted(m))
}

/// Noise for a scenario.
pub fn scenario_noise(sc: &SimScenario, rng: &mut Stream) -> Result<DataMatrix> {
    gen_noise(sc.n, sc.m, sc.sigma, sc.error_law, sc.standardize, rng)
}

/// Design-dependent part of an instance, shared across ranks.
#[derive(Debug, Clone)]
pub struct DesignData {
    pub x: DataMatrix,
    pub p: ProjectionOp,
}

impl DesignData {
    /// The design of `(scenario, seed)`; independent of `r` and `b₀`.
    pub fn generate(sc: &SimScenario) -> Result<Self> {
        sc.validate()?;
        if sc.identity_design {
            return Ok(DesignData {
                x: DataMatrix::identity(sc.n),
                p: ProjectionOp::identity(sc.n),
            });
        }
        let mut rng = substream(sc.seed, &[purpose::DESIGN]);
        let x = gen_design(sc, &mut rng);
        let p = projection(&x, DEFAULT_RANK_TOL)?;
        if p.rank() != sc.q {
            return Err(RrrError::ConfigError(format!(
                "generated design has numerical rank {}, expected q = {}",
                p.rank(),
                sc.q
            )));
        }
        Ok(DesignData { x, p })
    }
}

/// Signal part of one simulated data set.
#[derive(Debug, Clone)]
pub struct Instance {
    pub scenario: SimScenario,
    pub x: DataMatrix,
    pub a: DataMatrix,
    pub xa: DataMatrix,
    pub p: ProjectionOp,
    /// Singular values of `XA`.
    pub d_xa: Vec<f64>,
}

impl Instance {
    /// Builds `A` for `sc.r` on a shared design. The coefficient stream
    /// depends on `(seed, r)` but not on `b₀`, so rescaling `b₀` rescales `A`.
    pub fn on_design(sc: &SimScenario, design: &DesignData) -> Result<Self> {
        sc.validate()?;
        let mut rng = substream(sc.seed, &[purpose::COEFFICIENT, sc.r as u64]);
        let a = gen_coefficient(sc, &mut rng);
        let xa = design.x.matmul(&a)?;
        let d_xa = singular_values(xa.as_matrix());
        Ok(Instance {
            scenario: sc.clone(),
            x: design.x.clone(),
            a,
            xa,
            p: design.p.clone(),
            d_xa,
        })
    }

    pub fn generate(sc: &SimScenario) -> Result<Self> {
        Self::on_design(sc, &DesignData::generate(sc)?)
    }

    /// `d_r(XA)`; zero when `r = 0`.
    pub fn d_r(&self) -> f64 {
        match self.scenario.r {
            0 => 0.0,
            r => self.d_xa.get(r - 1).copied().unwrap_or(0.0),
        }
    }

    /// `Y = XA + E` for replication `rep`.
    pub fn replicate(&self, rep: u64) -> Result<(DataMatrix, DataMatrix)> {
        let sc = &self.scenario;
        let mut rng = substream(sc.seed, &[purpose::NOISE, sc.r as u64, rep]);
        let e = scenario_noise(sc, &mut rng)?;
        let y = self.xa.add(&e)?;
        Ok((y, e))
    }

    /// `d_r(XA) / Ê[d_1(PE)]`.
    pub fn snr(&self, mc_draws: usize) -> Result<f64> {
        if self.scenario.r == 0 {
            return Err(RrrError::NotAvailable("SNR is undefined for r = 0".into()));
        }
        let noise = expected_d1_pe(&self.scenario, &self.p, mc_draws)?;
        Ok(self.d_r() / noise)
    }
}

/// Monte-Carlo mean of `d_1(PE)` under the scenario's error law.
pub fn expected_d1_pe(sc: &SimScenario, p: &ProjectionOp, mc_draws: usize) -> Result<f64> {
    if mc_draws == 0 {
        return Err(RrrError::ConfigError("mc_draws must be at least 1".into()));
    }
    let mut total = 0.0;
    for i in 0..mc_draws {
        let mut rng = substream(sc.seed, &[purpose::SNR, i as u64]);
        let e = scenario_noise(sc, &mut rng)?;
        let coords = p.coordinates(&e)?;
        total += singular_values(&coords).first().copied().unwrap_or(0.0);
    }
    Ok(total / mc_draws as f64)
}
