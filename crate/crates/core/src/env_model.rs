//! Transport model: detection-rate field, correlation length and Poisson
//! sampling of detections.
//!
//! The mean detection rate at `r` for a source at `r0` is
//!
//! ```text
//! R(r, r0) = γ / ln(λ/a) · exp(V (y0 - y) / 2D) · K0(|r - r0| / λ)
//! λ        = sqrt(D η / (1 + V² η / 4D))
//! ```
//!
//! with the wind blowing along `-y` for `V > 0`. Distances are floored at the
//! searcher size `a`, so the source cell and its four neighbours share a rate.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::bessel;
use crate::error::{Error, Result};
use crate::field::GridField;
use crate::grid::{Cell, GridSpec};

/// Physical parameters of the emission and transport process.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvParams {
    gamma: f64,
    diffusivity: f64,
    wind: f64,
    lifetime: f64,
    searcher_size: f64,
    lambda: f64,
}

impl EnvParams {
    /// Validates positivity and requires `λ > a`.
    pub fn new(
        gamma: f64,
        diffusivity: f64,
        wind: f64,
        lifetime: f64,
        searcher_size: f64,
    ) -> Result<Self> {
        positive("gamma", gamma)?;
        positive("D", diffusivity)?;
        positive("eta", lifetime)?;
        positive("a", searcher_size)?;
        if !wind.is_finite() {
            return Err(Error::InvalidParameter {
                name: "V",
                value: wind,
                requirement: "finite",
            });
        }
        let lambda = correlation_length(diffusivity, lifetime, wind);
        if !(lambda > searcher_size) {
            return Err(Error::CorrelationTooShort {
                lambda,
                searcher_size,
            });
        }
        Ok(Self {
            gamma,
            diffusivity,
            wind,
            lifetime,
            searcher_size,
            lambda,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn diffusivity(&self) -> f64 {
        self.diffusivity
    }

    pub fn wind(&self) -> f64 {
        self.wind
    }

    pub fn lifetime(&self) -> f64 {
        self.lifetime
    }

    pub fn searcher_size(&self) -> f64 {
        self.searcher_size
    }

    pub fn correlation_length(&self) -> f64 {
        self.lambda
    }

    fn rebuild(&self, gamma: f64, diffusivity: f64, wind: f64) -> Result<Self> {
        Self::new(gamma, diffusivity, wind, self.lifetime, self.searcher_size)
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        self.rebuild(gamma, self.diffusivity, self.wind)
    }

    pub fn with_diffusivity(&self, diffusivity: f64) -> Result<Self> {
        self.rebuild(self.gamma, diffusivity, self.wind)
    }

    pub fn with_wind(&self, wind: f64) -> Result<Self> {
        self.rebuild(self.gamma, self.diffusivity, wind)
    }

    /// Same parameters with `D` chosen so that the correlation length equals
    /// `lambda` at the current `V` and `η`.
    pub fn with_correlation_length(&self, lambda: f64) -> Result<Self> {
        positive("lambda", lambda)?;
        self.with_diffusivity(diffusivity_for_length(lambda, self.lifetime, self.wind))
    }

    /// `ln R` at a source-minus-agent offset `(dx, dy)`.
    pub fn ln_rate_at_offset(&self, dx: i32, dy: i32) -> f64 {
        let dist = f64::from(dx).hypot(f64::from(dy)).max(self.searcher_size);
        let prefactor = self.gamma.ln() - (self.lambda / self.searcher_size).ln().ln();
        let advection = self.wind * f64::from(dy) / (2.0 * self.diffusivity);
        prefactor + advection + bessel::ln_k0(dist / self.lambda)
    }
}

/// `γ = 1, D = 1, V = 0, η = 2500, a = 1` (λ = 50).
impl Default for EnvParams {
    fn default() -> Self {
        Self::new(1.0, 1.0, 0.0, 2500.0, 1.0).expect("reference parameters are valid")
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            requirement: "finite and > 0",
        })
    }
}

/// Mean distance travelled by an emitted particle before it decays.
pub fn correlation_length(diffusivity: f64, lifetime: f64, wind: f64) -> f64 {
    (diffusivity * lifetime / (1.0 + wind * wind * lifetime / (4.0 * diffusivity))).sqrt()
}

/// Inverse of [`correlation_length`] in `D` at fixed `η` and `V`.
pub fn diffusivity_for_length(lambda: f64, lifetime: f64, wind: f64) -> f64 {
    // λ² (4D + V²η) = 4 D² η, positive root.
    let l2 = lambda * lambda;
    (l2 + lambda * (l2 + lifetime * lifetime * wind * wind).sqrt()) / (2.0 * lifetime)
}

/// Mean detection rate at `r` for a source at `r0`.
pub fn mean_rate(r: Cell, r0: Cell, params: &EnvParams) -> f64 {
    params.ln_rate_at_offset(r0.x - r.x, r0.y - r.y).exp()
}

/// Draws a Poisson count with mean `R(r, r0_true) · dt`.
pub fn sample_detections<R: Rng + ?Sized>(
    r: Cell,
    r0_true: Cell,
    params: &EnvParams,
    dt: f64,
    rng: &mut R,
) -> u64 {
    sample_poisson(mean_rate(r, r0_true, params) * dt, rng)
}

pub(crate) fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    match Poisson::new(mean) {
        Ok(dist) => {
            let k: f64 = dist.sample(rng);
            k as u64
        }
        Err(_) => 0,
    }
}

/// `R(r, r0_true)` over every cell of the grid.
pub fn mean_field(r0_true: Cell, grid: &GridSpec, params: &EnvParams) -> GridField {
    let values = grid.cells().map(|r| mean_rate(r, r0_true, params)).collect();
    GridField::new(*grid, values)
}

/// Expected detections per step, `μ = R · dt`, tabulated by the
/// source-minus-agent offset.
///
/// The rate depends on positions only through their difference, so one
/// `(2W - 1) x (2H - 1)` table covers every agent/source pair on a `W x H`
/// lattice. Offsets are laid out row-major with `dx` fastest, which makes a
/// row of candidate sources for a fixed agent a contiguous slice.
#[derive(Clone, Debug)]
pub struct RateTable {
    grid: GridSpec,
    params: EnvParams,
    dt: f64,
    stride: usize,
    mu: Vec<f64>,
    ln_mu: Vec<f64>,
    exp_neg_mu: Vec<f64>,
}

impl RateTable {
    pub fn new(grid: GridSpec, params: EnvParams, dt: f64) -> Result<Self> {
        positive("dt", dt)?;
        let w = grid.width() as i32;
        let h = grid.height() as i32;
        let stride = (2 * w - 1) as usize;
        let ln_dt = dt.ln();
        let mut ln_mu = Vec::with_capacity(stride * (2 * h - 1) as usize);
        for dy in -(h - 1)..h {
            for dx in -(w - 1)..w {
                ln_mu.push(params.ln_rate_at_offset(dx, dy) + ln_dt);
            }
        }
        let mu: Vec<f64> = ln_mu.iter().map(|l| l.exp()).collect();
        let exp_neg_mu = mu.iter().map(|m| (-m).exp()).collect();
        Ok(Self {
            grid,
            params,
            dt,
            stride,
            mu,
            ln_mu,
            exp_neg_mu,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn params(&self) -> &EnvParams {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn offset_index(&self, agent: Cell, source: Cell) -> usize {
        let dx = source.x - agent.x + self.grid.width() as i32 - 1;
        let dy = source.y - agent.y + self.grid.height() as i32 - 1;
        dy as usize * self.stride + dx as usize
    }

    /// Expected detections at `agent` in one step for a source at `source`.
    pub fn mu(&self, agent: Cell, source: Cell) -> f64 {
        self.mu[self.offset_index(agent, source)]
    }

    pub fn ln_mu(&self, agent: Cell, source: Cell) -> f64 {
        self.ln_mu[self.offset_index(agent, source)]
    }

    /// Range into the tables covering sources `(x_min..=x_max, row_y)`.
    fn row_range(&self, agent: Cell, row: usize) -> std::ops::Range<usize> {
        let source = Cell::new(self.grid.x_min(), self.grid.y_min() + row as i32);
        let start = self.offset_index(agent, source);
        start..start + self.grid.width()
    }

    /// `(μ, ln μ)` for every source in grid row `row`, for a fixed agent.
    pub fn row(&self, agent: Cell, row: usize) -> (&[f64], &[f64]) {
        let range = self.row_range(agent, row);
        (&self.mu[range.clone()], &self.ln_mu[range])
    }

    /// `e^{-μ}` for the same row as [`RateTable::row`].
    pub fn survival_row(&self, agent: Cell, row: usize) -> &[f64] {
        &self.exp_neg_mu[self.row_range(agent, row)]
    }

    /// Draws a detection count at `agent` for the true source `source`.
    pub fn sample<R: Rng + ?Sized>(&self, agent: Cell, source: Cell, rng: &mut R) -> u64 {
        sample_poisson(self.mu(agent, source), rng)
    }
}
