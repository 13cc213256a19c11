//! IPU copula sampling and density evaluation.
//!
//! Sampling uses the stochastic representation directly: draw the driver
//! `Z` from the base copula through the family quantiles, then draw
//! coordinate `k` from the component density `f_{k,Z_k}`. Density evaluation
//! sums `p_i ∏_k f_{k,i_k}(u_k)` over the driver support, truncated per
//! coordinate once the driver cdf passes `1 - tail_eps` (or at `max_index`,
//! whichever comes first); the neglected driver mass is reported alongside
//! the value rather than silently dropped.
//!
//! For shuffle and comonotone bases the driver support concentrates along
//! the segment images, so the evaluator enumerates only the index
//! combinations with nonzero mass: each cell's segment is cut at the points
//! where a coordinate's driver cdf crosses it, yielding a flat list of
//! `(mass, index-vector)` terms that is reused across evaluation points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::drivers::{BaseCopula, DriverSpec, Slope};
use crate::error::{Error, Result};
use crate::families::FamilyParams;

/// Rows per deterministic RNG stream when sampling in parallel. The split is
/// fixed so results do not depend on the number of worker threads.
pub(crate) const SHARD_ROWS: usize = 1 << 16;

/// Controls truncation of the infinite mixture sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    /// Per-coordinate driver tail mass below which enumeration stops.
    pub tail_eps: f64,
    /// Hard cap on the per-coordinate component index.
    pub max_index: u64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            tail_eps: 1e-10,
            max_index: 10_000,
        }
    }
}

impl TruncationPolicy {
    pub fn new(tail_eps: f64, max_index: u64) -> Result<Self> {
        if !(tail_eps > 0.0 && tail_eps < 1.0) {
            return Err(Error::invalid("tail_eps", format!("must lie in (0,1), got {tail_eps}")));
        }
        if max_index == 0 {
            return Err(Error::invalid("max_index", "must be at least 1"));
        }
        Ok(Self { tail_eps, max_index })
    }
}

/// A dense `count × d` sample matrix in `(0,1)^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    d: usize,
    data: Vec<f64>,
}

impl Samples {
    pub fn from_rows(d: usize, data: Vec<f64>) -> Result<Self> {
        if d < 1 || data.len() % d != 0 {
            return Err(Error::invalid("data", "length must be a multiple of d"));
        }
        Ok(Self { d, data })
    }

    pub fn count(&self) -> usize {
        self.data.len() / self.d
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.data.iter().skip(k).step_by(self.d).copied().collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Anything that can draw copula rows reproducibly. Implemented by
/// [`IpuModel`] and by raw [`BaseCopula`]s (the latter lets a base serve
/// directly as the dependence model, e.g. a Bernstein or comonotone copula).
pub trait CopulaSampler: Sync {
    fn d(&self) -> usize;
    fn sample_row(&self, rng: &mut ChaCha8Rng, out: &mut [f64]);
}

impl CopulaSampler for BaseCopula {
    fn d(&self) -> usize {
        BaseCopula::d(self)
    }

    fn sample_row(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        self.sample_into(rng, out);
    }
}

/// Deterministic parallel sampling: `count` rows are split into fixed-size
/// shards, shard `s` drawn from stream `s` of a ChaCha generator seeded with
/// `seed`. The output is bit-identical for a given `(seed, count)` regardless
/// of thread count.
pub fn sample_matrix<C: CopulaSampler + ?Sized>(sampler: &C, count: usize, seed: u64) -> Samples {
    let d = sampler.d();
    let mut data = vec![0.0f64; count * d];
    data.par_chunks_mut(SHARD_ROWS * d)
        .enumerate()
        .for_each(|(shard, chunk)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard as u64);
            for row in chunk.chunks_exact_mut(d) {
                sampler.sample_row(&mut rng, row);
            }
        });
    Samples { d, data }
}

/// An infinite partition-of-unity copula: a driver specification acting
/// through component samplers and densities.
#[derive(Debug, Clone, PartialEq)]
pub struct IpuModel {
    spec: DriverSpec,
}

impl IpuModel {
    pub fn new(spec: DriverSpec) -> Self {
        Self { spec }
    }

    pub fn spec(&self) -> &DriverSpec {
        &self.spec
    }

    pub fn d(&self) -> usize {
        self.spec.d()
    }

    /// Draw one copula row: driver first, then one component draw per
    /// coordinate. `out` doubles as the scratch buffer for the base draw.
    pub fn sample_row_with<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        self.spec.base().sample_into(rng, out);
        for (k, fam) in self.spec.families().iter().enumerate() {
            let z = fam.driver_quantile_unchecked(out[k]);
            out[k] = fam.sample_component(z, rng);
        }
    }

    /// Sample `count` rows reproducibly from `seed` (parallel).
    pub fn sample(&self, count: usize, seed: u64) -> Samples {
        sample_matrix(self, count, seed)
    }

    /// Copula density at `u` (strictly inside the open cube). One-shot
    /// convenience around [`DensityEvaluator`].
    pub fn density(&self, u: &[f64], policy: &TruncationPolicy) -> Result<DensityValue> {
        DensityEvaluator::new(self, policy)?.eval(u)
    }

    /// Density on a `resolution × resolution` grid of cell midpoints
    /// (bivariate models only).
    pub fn density_grid(&self, resolution: usize, policy: &TruncationPolicy) -> Result<DensityGrid> {
        DensityEvaluator::new(self, policy)?.eval_grid(resolution)
    }
}

impl CopulaSampler for IpuModel {
    fn d(&self) -> usize {
        IpuModel::d(self)
    }

    fn sample_row(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        self.sample_row_with(rng, out);
    }
}

/// A density value together with the truncation report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityValue {
    /// Truncated mixture sum; an under-estimate by at most the neglected
    /// driver mass times the sup of the dropped component-density products.
    pub value: f64,
    /// Driver mass not covered by the enumerated terms.
    pub neglected_mass: f64,
    /// True when `max_index` cut enumeration before `tail_eps` was reached.
    pub cap_hit: bool,
}

/// Midpoint-grid densities for a bivariate model, row-major:
/// `value(i, j) = c((i+0.5)/res, (j+0.5)/res)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    resolution: usize,
    values: Vec<f64>,
    neglected_mass: f64,
    cap_hit: bool,
}

impl DensityGrid {
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.resolution + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn midpoint(&self, index: usize) -> f64 {
        (index as f64 + 0.5) / self.resolution as f64
    }

    pub fn neglected_mass(&self) -> f64 {
        self.neglected_mass
    }

    pub fn cap_hit(&self) -> bool {
        self.cap_hit
    }

    /// Average of all cell values — the midpoint quadrature of the density
    /// over the unit square.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() / (self.values.len() as f64)
    }
}

/// One enumerated driver atom: its probability mass and index vector.
#[derive(Debug, Clone)]
struct Term {
    mass: f64,
    idx: Vec<u64>,
}

enum EvalKind {
    /// Shuffle / comonotone bases: explicit (mass, index) atoms.
    Terms(Vec<Term>),
    /// Product structure; the density factorises into per-coordinate sums.
    Independence,
    /// Bernstein base: per-observation, per-coordinate index weights.
    Bernstein { weights: Vec<Vec<Vec<f64>>> },
}

/// Reusable density evaluator: owns the truncated driver enumeration for a
/// fixed model and policy.
pub struct DensityEvaluator<'a> {
    model: &'a IpuModel,
    cutoffs: Vec<u64>,
    neglected_mass: f64,
    cap_hit: bool,
    kind: EvalKind,
}

impl<'a> DensityEvaluator<'a> {
    pub fn new(model: &'a IpuModel, policy: &TruncationPolicy) -> Result<Self> {
        let spec = model.spec();
        let fams = spec.families();
        let mut cutoffs = Vec::with_capacity(fams.len());
        let mut cap_hit = false;
        for fam in fams {
            let wanted = fam.driver_quantile_unchecked(1.0 - policy.tail_eps);
            if wanted > policy.max_index {
                cap_hit = true;
            }
            cutoffs.push(wanted.min(policy.max_index));
        }

        let (kind, neglected_mass) = match spec.base() {
            BaseCopula::ShuffleM(grid) | BaseCopula::ShuffleMWorstCase(grid) => {
                let cells: Vec<(Vec<u32>, Slope)> = grid
                    .cells()
                    .iter()
                    .map(|c| (c.ranks.clone(), c.slope))
                    .collect();
                build_terms(fams, &cutoffs, grid.n(), &cells)
            }
            BaseCopula::Comonotone { d } => {
                // the comonotone copula is a one-cell shuffle grid
                let cells = vec![(vec![1u32; *d], Slope::Positive)];
                build_terms(fams, &cutoffs, 1, &cells)
            }
            BaseCopula::Independence { .. } => {
                let covered: f64 = fams
                    .iter()
                    .zip(&cutoffs)
                    .map(|(f, &c)| f.driver_cdf(c))
                    .product();
                (EvalKind::Independence, 1.0 - covered)
            }
            BaseCopula::Bernstein { n, ranks, .. } => {
                let mut weights = Vec::with_capacity(ranks.len());
                let mut covered = 0.0;
                for row in ranks {
                    let mut per_coord = Vec::with_capacity(fams.len());
                    let mut cell_cov = 1.0;
                    for (k, fam) in fams.iter().enumerate() {
                        let (p, q) = (f64::from(row[k]), (*n + 1) as f64 - f64::from(row[k]));
                        let mut w = Vec::with_capacity(cutoffs[k] as usize + 1);
                        let mut prev = 0.0;
                        let mut sum = 0.0;
                        for i in 0..=cutoffs[k] {
                            let cur = reg_beta(p, q, fam.driver_cdf(i));
                            let wi = (cur - prev).max(0.0);
                            sum += wi;
                            w.push(wi);
                            prev = cur;
                        }
                        cell_cov *= sum;
                        per_coord.push(w);
                    }
                    covered += cell_cov;
                    weights.push(per_coord);
                }
                covered /= ranks.len() as f64;
                (EvalKind::Bernstein { weights }, 1.0 - covered)
            }
        };

        Ok(Self {
            model,
            cutoffs,
            neglected_mass: neglected_mass.max(0.0),
            cap_hit,
            kind,
        })
    }

    pub fn neglected_mass(&self) -> f64 {
        self.neglected_mass
    }

    pub fn cap_hit(&self) -> bool {
        self.cap_hit
    }

    /// Density at a single point strictly inside the cube.
    pub fn eval(&self, u: &[f64]) -> Result<DensityValue> {
        let fams = self.model.spec().families();
        if u.len() != fams.len() {
            return Err(Error::invalid(
                "u",
                format!("expected {} coordinates, got {}", fams.len(), u.len()),
            ));
        }
        for &x in u {
            if !(x > 0.0 && x < 1.0) {
                return Err(Error::invalid("u", format!("must lie strictly inside (0,1), got {x}")));
            }
        }
        let value = match &self.kind {
            EvalKind::Terms(terms) => terms
                .iter()
                .map(|t| {
                    let mut prod = t.mass;
                    for (k, fam) in fams.iter().enumerate() {
                        prod *= fam.component_density_unchecked(t.idx[k], u[k]);
                    }
                    prod
                })
                .sum(),
            EvalKind::Independence => fams
                .iter()
                .zip(&self.cutoffs)
                .zip(u)
                .map(|((fam, &cut), &x)| {
                    (0..=cut)
                        .map(|i| fam.marginal_alpha(i) * fam.component_density_unchecked(i, x))
                        .sum::<f64>()
                })
                .product(),
            EvalKind::Bernstein { weights } => {
                let mut total = 0.0;
                for per_coord in weights {
                    let mut prod = 1.0;
                    for (k, fam) in fams.iter().enumerate() {
                        let gk: f64 = per_coord[k]
                            .iter()
                            .enumerate()
                            .map(|(i, &w)| w * fam.component_density_unchecked(i as u64, u[k]))
                            .sum();
                        prod *= gk;
                    }
                    total += prod;
                }
                total / weights.len() as f64
            }
        };
        Ok(DensityValue {
            value,
            neglected_mass: self.neglected_mass,
            cap_hit: self.cap_hit,
        })
    }

    /// Dense bivariate midpoint grid. Component densities are tabulated per
    /// coordinate once, so the cost is one multiply-add per (term, cell) pair
    /// instead of per-point exponentials.
    pub fn eval_grid(&self, resolution: usize) -> Result<DensityGrid> {
        let fams = self.model.spec().families();
        if fams.len() != 2 {
            return Err(Error::invalid(
                "resolution",
                format!("grid evaluation is bivariate only, model has d = {}", fams.len()),
            ));
        }
        if resolution < 2 {
            return Err(Error::invalid("resolution", "must be at least 2"));
        }
        let res = resolution;
        let us: Vec<f64> = (0..res).map(|j| (j as f64 + 0.5) / res as f64).collect();

        let values = match &self.kind {
            EvalKind::Terms(terms) => {
                // distinct indices per coordinate -> table slots
                let (slots0, table0) = tabulate(&fams[0], terms.iter().map(|t| t.idx[0]), &us);
                let (slots1, table1) = tabulate(&fams[1], terms.iter().map(|t| t.idx[1]), &us);
                // first contraction: G[s0][v] = sum over terms of mass * f1(i1, v)
                let mut g = vec![0.0f64; slots0.len() * res];
                for t in terms {
                    let s0 = slots0.binary_search(&t.idx[0]).expect("tabulated");
                    let s1 = slots1.binary_search(&t.idx[1]).expect("tabulated");
                    let row1 = &table1[s1 * res..(s1 + 1) * res];
                    let grow = &mut g[s0 * res..(s0 + 1) * res];
                    for (out, &f1) in grow.iter_mut().zip(row1) {
                        *out += t.mass * f1;
                    }
                }
                // second contraction: C[u][v] = sum_s0 f0(s0, u) * G[s0][v]
                let mut values = vec![0.0f64; res * res];
                values
                    .par_chunks_mut(res)
                    .enumerate()
                    .for_each(|(iu, out_row)| {
                        for s0 in 0..slots0.len() {
                            let f0 = table0[s0 * res + iu];
                            if f0 == 0.0 {
                                continue;
                            }
                            let grow = &g[s0 * res..(s0 + 1) * res];
                            for (out, &gv) in out_row.iter_mut().zip(grow) {
                                *out += f0 * gv;
                            }
                        }
                    });
                values
            }
            EvalKind::Independence => {
                let mut sums = Vec::with_capacity(2);
                for (k, fam) in fams.iter().enumerate() {
                    let cut = self.cutoffs[k];
                    let col: Vec<f64> = us
                        .iter()
                        .map(|&x| {
                            (0..=cut)
                                .map(|i| fam.marginal_alpha(i) * fam.component_density_unchecked(i, x))
                                .sum::<f64>()
                        })
                        .collect();
                    sums.push(col);
                }
                let mut values = vec![0.0f64; res * res];
                for iu in 0..res {
                    for iv in 0..res {
                        values[iu * res + iv] = sums[0][iu] * sums[1][iv];
                    }
                }
                values
            }
            EvalKind::Bernstein { weights } => {
                // g[J][k][u] = sum_i w[J][k][i] f_k(i, u)
                let n_obs = weights.len();
                let mut gtab = vec![vec![vec![0.0f64; res]; 2]; n_obs];
                for (j, per_coord) in weights.iter().enumerate() {
                    for k in 0..2 {
                        let fam = &fams[k];
                        for (iu, &x) in us.iter().enumerate() {
                            gtab[j][k][iu] = per_coord[k]
                                .iter()
                                .enumerate()
                                .map(|(i, &w)| w * fam.component_density_unchecked(i as u64, x))
                                .sum();
                        }
                    }
                }
                let mut values = vec![0.0f64; res * res];
                for iu in 0..res {
                    for iv in 0..res {
                        let mut acc = 0.0;
                        for jt in gtab.iter() {
                            acc += jt[0][iu] * jt[1][iv];
                        }
                        values[iu * res + iv] = acc / n_obs as f64;
                    }
                }
                values
            }
        };

        Ok(DensityGrid {
            resolution: res,
            values,
            neglected_mass: self.neglected_mass,
            cap_hit: self.cap_hit,
        })
    }
}

/// Tabulate `f_fam(i, u)` for the distinct indices of one coordinate.
/// Returns the sorted slot list and a row-major `slots × us` table.
fn tabulate(
    fam: &FamilyParams,
    indices: impl Iterator<Item = u64>,
    us: &[f64],
) -> (Vec<u64>, Vec<f64>) {
    let mut slots: Vec<u64> = indices.collect();
    slots.sort_unstable();
    slots.dedup();
    let mut table = vec![0.0f64; slots.len() * us.len()];
    table
        .par_chunks_mut(us.len())
        .zip(slots.par_iter())
        .for_each(|(row, &i)| {
            for (slot, &x) in row.iter_mut().zip(us) {
                *slot = fam.component_density_unchecked(i, x);
            }
        });
    (slots, table)
}

/// Enumerate the driver atoms of a shuffle grid under per-coordinate index
/// cutoffs. Returns the atom list and the neglected driver mass (subintervals
/// whose index exceeds a cutoff).
fn build_terms(
    fams: &[FamilyParams],
    cutoffs: &[u64],
    n: usize,
    cells: &[(Vec<u32>, Slope)],
) -> (EvalKind, f64) {
    let n_f = n as f64;
    let cell_count = cells.len() as f64;
    let mut terms: Vec<Term> = Vec::new();
    let mut neglected = 0.0f64;
    let mut breaks: Vec<f64> = Vec::new();

    for (ranks, slope) in cells {
        breaks.clear();
        breaks.push(0.0);
        breaks.push(1.0);
        for (k, fam) in fams.iter().enumerate() {
            let r = f64::from(ranks[k]);
            let positive = k == 0 || *slope == Slope::Positive;
            let lo_u = (r - 1.0) / n_f;
            let hi_u = r / n_f;
            let mut i = if lo_u <= 0.0 {
                0
            } else {
                fam.driver_quantile_unchecked(lo_u)
            };
            loop {
                let f = fam.driver_cdf(i);
                if f >= hi_u || i >= cutoffs[k] {
                    break;
                }
                let v = if positive { n_f * f - (r - 1.0) } else { r - n_f * f };
                if v > 0.0 && v < 1.0 {
                    breaks.push(v);
                }
                i += 1;
            }
        }
        breaks.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        for w in 0..breaks.len() - 1 {
            let (v0, v1) = (breaks[w], breaks[w + 1]);
            let len = v1 - v0;
            if len <= 0.0 {
                continue;
            }
            let mid = 0.5 * (v0 + v1);
            let mut idx = Vec::with_capacity(fams.len());
            let mut truncated = false;
            for (k, fam) in fams.iter().enumerate() {
                let r = f64::from(ranks[k]);
                let positive = k == 0 || *slope == Slope::Positive;
                let u_mid = if positive {
                    (r - 1.0 + mid) / n_f
                } else {
                    (r - mid) / n_f
                };
                let i = fam.driver_quantile_unchecked(u_mid);
                if i > cutoffs[k] {
                    truncated = true;
                    break;
                }
                idx.push(i);
            }
            let mass = len / cell_count;
            if truncated {
                neglected += mass;
            } else {
                terms.push(Term { mass, idx });
            }
        }
    }
    (EvalKind::Terms(terms), neglected)
}

fn reg_beta(p: f64, q: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        statrs::function::beta::beta_reg(p, q, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{fixture, RankMatrix, FIXTURE_COTTIN_PFEIFER};

    fn nb5() -> FamilyParams {
        FamilyParams::negative_binomial(5).unwrap()
    }

    fn po6() -> FamilyParams {
        FamilyParams::poisson(6.0).unwrap()
    }

    fn symmetric_nb5() -> IpuModel {
        IpuModel::new(DriverSpec::new(BaseCopula::comonotone(2).unwrap(), vec![nb5(), nb5()]).unwrap())
    }

    fn paper_ranks() -> RankMatrix {
        RankMatrix::from_observations(&fixture(FIXTURE_COTTIN_PFEIFER).unwrap())
    }

    /// Independent route: direct summation of the closed-form symmetric
    /// negative binomial copula density with diagonal driver masses, using
    /// running-product binomials instead of log-gamma.
    fn nb_diagonal_density_oracle(a: u32, u: f64, v: f64, imax: u64) -> f64 {
        let a_f = f64::from(a);
        let mut total = 0.0;
        // b_i = (a+i+1)! / (i! a!): b_0 = a+1, b_i = b_{i-1} (a+i+1)/i
        let mut b = a_f + 1.0;
        let mut u_pow = 1.0;
        let mut v_pow = 1.0;
        for i in 0..=imax {
            let i_f = i as f64;
            if i > 0 {
                b *= (a_f + i_f + 1.0) / i_f;
                u_pow *= u;
                v_pow *= v;
            }
            let alpha = a_f / ((a_f + i_f) * (a_f + i_f + 1.0));
            let fu = b * u_pow * (1.0 - u).powf(a_f);
            let fv = b * v_pow * (1.0 - v).powf(a_f);
            total += alpha * fu * fv;
        }
        total
    }

    #[test]
    fn sampling_is_deterministic() {
        let model = symmetric_nb5();
        let s1 = model.sample(5, 42);
        let s2 = model.sample(5, 42);
        assert_eq!(s1, s2);
        let s3 = model.sample(5, 43);
        assert_ne!(s1, s3);
        assert_eq!(s1.count(), 5);
        assert_eq!(s1.d(), 2);
        assert!(s1.data().iter().all(|&x| x > 0.0 && x < 1.0));
    }

    #[test]
    fn sharded_sampling_extends_prefixes() {
        // growing the count must not change earlier shards
        let model = symmetric_nb5();
        let small = model.sample(1000, 7);
        let large = model.sample(2000, 7);
        assert_eq!(small.data(), &large.data()[..1000 * 2]);
    }

    #[test]
    fn independence_density_is_one() {
        for fam in [nb5(), po6()] {
            let model = IpuModel::new(
                DriverSpec::new(BaseCopula::independence(2).unwrap(), vec![fam, fam]).unwrap(),
            );
            let ev = DensityEvaluator::new(&model, &TruncationPolicy::default()).unwrap();
            for u in [0.05, 0.3, 0.5, 0.8, 0.99] {
                for v in [0.1, 0.62, 0.97] {
                    let d = ev.eval(&[u, v]).unwrap();
                    assert!((d.value - 1.0).abs() < 1e-6, "c({u},{v}) = {}", d.value);
                }
            }
            let grid = model.density_grid(10, &TruncationPolicy::default()).unwrap();
            assert!(grid.values().iter().all(|&x| (x - 1.0).abs() < 1e-6));
        }
    }

    #[test]
    fn symmetric_nb_density_matches_direct_sum() {
        let model = symmetric_nb5();
        let d = model.density(&[0.5, 0.5], &TruncationPolicy::default()).unwrap();
        let oracle = nb_diagonal_density_oracle(5, 0.5, 0.5, 200);
        // frozen from the oracle
        assert!((oracle - 1.9330386628054697).abs() < 1e-12);
        assert!((d.value - oracle).abs() < 1e-9, "engine {} oracle {oracle}", d.value);
        assert!(d.cap_hit, "negative binomial tail cannot reach 1e-10 below the index cap");
        assert!(d.neglected_mass > 0.0 && d.neglected_mass < 1e-3);
    }

    #[test]
    fn density_boundary_and_dimension_errors() {
        let model = symmetric_nb5();
        let policy = TruncationPolicy::default();
        assert!(model.density(&[0.0, 0.5], &policy).is_err());
        assert!(model.density(&[0.5, 1.0], &policy).is_err());
        assert!(model.density(&[0.5], &policy).is_err());
        assert!(model.density_grid(1, &policy).is_err());
    }

    #[test]
    fn density_grid_matches_pointwise_eval() {
        let ranks = paper_ranks();
        let model = IpuModel::new(
            DriverSpec::new(BaseCopula::shuffle_of_m(&ranks), vec![nb5(), nb5()]).unwrap(),
        );
        let policy = TruncationPolicy::default();
        let ev = DensityEvaluator::new(&model, &policy).unwrap();
        let grid = ev.eval_grid(8).unwrap();
        for i in [0usize, 3, 7] {
            for j in [1usize, 4, 6] {
                let u = grid.midpoint(i);
                let v = grid.midpoint(j);
                let direct = ev.eval(&[u, v]).unwrap().value;
                let tabulated = grid.value(i, j);
                let denom = direct.abs().max(1e-12);
                assert!(
                    (direct - tabulated).abs() / denom < 1e-10,
                    "({u},{v}): {direct} vs {tabulated}"
                );
            }
        }
    }

    #[test]
    fn poisson_grid_has_pole_at_upper_corner() {
        let model = IpuModel::new(
            DriverSpec::new(BaseCopula::comonotone(2).unwrap(), vec![po6(), po6()]).unwrap(),
        );
        let grid = model.density_grid(100, &TruncationPolicy::default()).unwrap();
        assert!(!grid.cap_hit());
        let mut best = (0, 0);
        let mut max = f64::MIN;
        for i in 0..100 {
            for j in 0..100 {
                if grid.value(i, j) > max {
                    max = grid.value(i, j);
                    best = (i, j);
                }
            }
        }
        assert_eq!(best, (99, 99), "pole cell should dominate");
    }

    #[test]
    fn nb_grid_has_pole_at_upper_corner() {
        let model = symmetric_nb5();
        let grid = model.density_grid(100, &TruncationPolicy::default()).unwrap();
        let mut best = (0, 0);
        let mut max = f64::MIN;
        for i in 0..100 {
            for j in 0..100 {
                if grid.value(i, j) > max {
                    max = grid.value(i, j);
                    best = (i, j);
                }
            }
        }
        assert_eq!(best, (99, 99));
    }

    #[test]
    fn symmetric_density_is_exchangeable() {
        let model = symmetric_nb5();
        let policy = TruncationPolicy::default();
        let ev = DensityEvaluator::new(&model, &policy).unwrap();
        for (u, v) in [(0.1, 0.7), (0.33, 0.9), (0.05, 0.5), (0.85, 0.97)] {
            let a = ev.eval(&[u, v]).unwrap().value;
            let b = ev.eval(&[v, u]).unwrap().value;
            assert!((a - b).abs() < 1e-9, "c({u},{v})={a} c({v},{u})={b}");
        }
    }

    #[test]
    fn density_nonnegative_everywhere_sampled() {
        let ranks = paper_ranks();
        let model = IpuModel::new(
            DriverSpec::new(
                BaseCopula::worst_case_shuffle(&ranks, None).unwrap(),
                vec![nb5(), nb5()],
            )
            .unwrap(),
        );
        let ev = DensityEvaluator::new(&model, &TruncationPolicy::default()).unwrap();
        let mut x = 0.013f64;
        let mut y = 0.77f64;
        for _ in 0..200 {
            x = (x * 61.0).fract().clamp(1e-6, 1.0 - 1e-6);
            y = (y * 47.0).fract().clamp(1e-6, 1.0 - 1e-6);
            assert!(ev.eval(&[x, y]).unwrap().value >= 0.0);
        }
    }

    #[test]
    fn term_masses_cover_driver() {
        let ranks = paper_ranks();
        for base in [
            BaseCopula::shuffle_of_m(&ranks),
            BaseCopula::worst_case_shuffle(&ranks, Some(1)).unwrap(),
            BaseCopula::comonotone(2).unwrap(),
        ] {
            let model = IpuModel::new(DriverSpec::new(base, vec![po6(), po6()]).unwrap());
            let ev = DensityEvaluator::new(&model, &TruncationPolicy::default()).unwrap();
            let EvalKind::Terms(terms) = &ev.kind else {
                panic!("expected term enumeration")
            };
            let total: f64 = terms.iter().map(|t| t.mass).sum();
            assert!(
                (total + ev.neglected_mass() - 1.0).abs() < 1e-9,
                "covered {total} neglected {}",
                ev.neglected_mass()
            );
            assert!(!ev.cap_hit());
        }
    }

    #[test]
    fn terms_match_driver_pmf() {
        // the enumerated atoms must agree with the independent
        // rectangle-mass route through DriverSpec::driver_pmf
        let ranks = paper_ranks();
        let spec = DriverSpec::new(BaseCopula::shuffle_of_m(&ranks), vec![nb5(), po6()]).unwrap();
        let model = IpuModel::new(spec.clone());
        let ev = DensityEvaluator::new(&model, &TruncationPolicy::default()).unwrap();
        let EvalKind::Terms(terms) = &ev.kind else {
            panic!("expected terms")
        };
        use std::collections::HashMap;
        let mut by_idx: HashMap<(u64, u64), f64> = HashMap::new();
        for t in terms {
            *by_idx.entry((t.idx[0], t.idx[1])).or_default() += t.mass;
        }
        for (&(i1, i2), &mass) in by_idx.iter() {
            let pmf = spec.driver_pmf(&[i1, i2]).unwrap();
            assert!((pmf - mass).abs() < 1e-12, "({i1},{i2}): pmf {pmf} vs terms {mass}");
        }
    }
}
