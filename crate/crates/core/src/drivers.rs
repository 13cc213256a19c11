//! Base copulas on `(0,1)^d` and the driver transform.
//!
//! A base copula supplies the dependence structure for the discrete driver:
//! samples `Û` from the base are pushed through the per-coordinate driver
//! quantiles `Z_k = F_k^{-1}(Û_k)`. Every base also exposes the exact measure
//! of axis-aligned rectangles, which is what turns into driver probabilities
//! `P(Z = i)` during density evaluation.
//!
//! Shuffle-of-M bases place one comonotone (or, in the worst-case variant,
//! countermonotone) segment inside each grid cell determined by an
//! observation's rank vector. The Bernstein base smooths the same rank grid
//! with beta kernels.

use rand::Rng;
use rand_distr::{Beta, Distribution, Open01};
use statrs::function::beta::beta_reg;

use crate::data::RankMatrix;
use crate::error::{Error, Result};
use crate::families::FamilyParams;

/// Orientation of the segment a shuffle cell carries, applied to coordinates
/// `2..d` relative to coordinate 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slope {
    Positive,
    Negative,
}

/// One cell of a shuffle grid: a per-coordinate rank vector and the slope of
/// the segment inside the cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShuffleCell {
    pub ranks: Vec<u32>,
    pub slope: Slope,
}

/// A shuffle-of-M copula on an `n × … × n` grid, one cell per observation;
/// each coordinate's cell indices form a permutation of `{1, …, n}` and every
/// cell carries mass `1/n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShuffleGrid {
    n: usize,
    d: usize,
    cells: Vec<ShuffleCell>,
}

impl ShuffleGrid {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cells(&self) -> &[ShuffleCell] {
        &self.cells
    }
}

/// A sampleable copula on `(0,1)^d` with an exact rectangle-mass oracle.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseCopula {
    ShuffleM(ShuffleGrid),
    ShuffleMWorstCase(ShuffleGrid),
    Bernstein { n: usize, d: usize, ranks: Vec<Vec<u32>> },
    Comonotone { d: usize },
    Independence { d: usize },
}

impl BaseCopula {
    /// The shuffle of M determined by the rank vectors: cell `J` sits at
    /// `∏_k ((r_kJ - 1)/n, r_kJ/n]` with a positively sloped segment.
    pub fn shuffle_of_m(ranks: &RankMatrix) -> Self {
        let cells = (0..ranks.n())
            .map(|j| ShuffleCell {
                ranks: ranks.row(j).to_vec(),
                slope: Slope::Positive,
            })
            .collect();
        BaseCopula::ShuffleM(ShuffleGrid {
            n: ranks.n(),
            d: ranks.d(),
            cells,
        })
    }

    /// Shuffle of M with a local lower Fréchet bound in the upper-right
    /// corner (bivariate only).
    ///
    /// The corner consists of the `m` observations whose ranks lie in the top
    /// `m` of *both* columns; they are re-paired countermonotonically (largest
    /// first-coordinate rank with the smallest corner second-coordinate rank)
    /// and their cells flipped to negative slope. When `corner_size` is not
    /// given, `m` is detected as the longest initial run: the largest `m`
    /// such that the top-`j` index sets of both columns coincide for every
    /// `j ≤ m`.
    pub fn worst_case_shuffle(ranks: &RankMatrix, corner_size: Option<usize>) -> Result<Self> {
        if ranks.d() != 2 {
            return Err(Error::invalid(
                "ranks",
                format!("worst-case shuffle is bivariate only, got d = {}", ranks.d()),
            ));
        }
        let n = ranks.n();
        let top_sets_coincide = |m: usize| -> bool {
            (0..n).all(|j| {
                let hi1 = ranks.rank(j, 0) as usize > n - m;
                let hi2 = ranks.rank(j, 1) as usize > n - m;
                hi1 == hi2
            })
        };
        let m = match corner_size {
            Some(m) => {
                if m < 1 || m > n {
                    return Err(Error::invalid(
                        "corner_size",
                        format!("must lie in 1..={n}, got {m}"),
                    ));
                }
                if !top_sets_coincide(m) {
                    return Err(Error::invalid(
                        "corner_size",
                        format!("top-{m} rank sets of the two columns differ"),
                    ));
                }
                m
            }
            None => {
                let mut m = 0;
                while m < n && top_sets_coincide(m + 1) {
                    m += 1;
                }
                if m == 0 {
                    return Err(Error::invalid(
                        "ranks",
                        "no upper-right corner: the maximal observations of the two columns differ",
                    ));
                }
                m
            }
        };

        let mut corner: Vec<usize> = (0..n).filter(|&j| ranks.rank(j, 0) as usize > n - m).collect();
        // re-pair: ascending r1 against descending r2
        corner.sort_by_key(|&j| ranks.rank(j, 0));
        let mut corner_r2: Vec<u32> = corner.iter().map(|&j| ranks.rank(j, 1)).collect();
        corner_r2.sort_unstable_by(|a, b| b.cmp(a));

        let mut cells: Vec<ShuffleCell> = (0..n)
            .map(|j| ShuffleCell {
                ranks: ranks.row(j).to_vec(),
                slope: Slope::Positive,
            })
            .collect();
        for (&j, &r2) in corner.iter().zip(corner_r2.iter()) {
            cells[j].ranks[1] = r2;
            cells[j].slope = Slope::Negative;
        }
        Ok(BaseCopula::ShuffleMWorstCase(ShuffleGrid { n, d: 2, cells }))
    }

    /// The Bernstein copula of grid size `n` built on the rank matrix:
    /// sampling picks an observation uniformly and smooths coordinate `k`
    /// with a Beta(`r`, `n+1-r`) kernel.
    pub fn bernstein(ranks: &RankMatrix) -> Self {
        BaseCopula::Bernstein {
            n: ranks.n(),
            d: ranks.d(),
            ranks: (0..ranks.n()).map(|j| ranks.row(j).to_vec()).collect(),
        }
    }

    pub fn comonotone(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(BaseCopula::Comonotone { d })
    }

    pub fn independence(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(BaseCopula::Independence { d })
    }

    pub fn d(&self) -> usize {
        match self {
            BaseCopula::ShuffleM(g) | BaseCopula::ShuffleMWorstCase(g) => g.d,
            BaseCopula::Bernstein { d, .. } => *d,
            BaseCopula::Comonotone { d } | BaseCopula::Independence { d } => *d,
        }
    }

    /// Draw one point; all marginals are uniform on `(0,1)`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.d());
        match self {
            BaseCopula::ShuffleM(g) | BaseCopula::ShuffleMWorstCase(g) => {
                let j = rng.random_range(0..g.cells.len());
                let v: f64 = rng.sample(Open01);
                let n = g.n as f64;
                let cell = &g.cells[j];
                out[0] = (f64::from(cell.ranks[0]) - 1.0 + v) / n;
                for k in 1..g.d {
                    let r = f64::from(cell.ranks[k]);
                    out[k] = match cell.slope {
                        Slope::Positive => (r - 1.0 + v) / n,
                        Slope::Negative => (r - v) / n,
                    };
                }
            }
            BaseCopula::Bernstein { n, d, ranks } => {
                let j = rng.random_range(0..ranks.len());
                for k in 0..*d {
                    let r = f64::from(ranks[j][k]);
                    let beta = Beta::new(r, (*n + 1) as f64 - r).expect("valid Beta parameters");
                    out[k] = loop {
                        let v = beta.sample(rng);
                        if v > 0.0 && v < 1.0 {
                            break v;
                        }
                    };
                }
            }
            BaseCopula::Comonotone { d } => {
                let v: f64 = rng.sample(Open01);
                out[..*d].fill(v);
            }
            BaseCopula::Independence { d } => {
                for slot in out[..*d].iter_mut() {
                    *slot = rng.sample(Open01);
                }
            }
        }
    }

    /// Measure of the half-open rectangle `∏_k [lo_k, hi_k)`.
    pub fn rectangle_mass(&self, lo: &[f64], hi: &[f64]) -> Result<f64> {
        let d = self.d();
        if lo.len() != d || hi.len() != d {
            return Err(Error::invalid(
                "rectangle",
                format!("expected {d} coordinates, got {} x {}", lo.len(), hi.len()),
            ));
        }
        for k in 0..d {
            if !(0.0..=1.0).contains(&lo[k]) || !(0.0..=1.0).contains(&hi[k]) || lo[k] > hi[k] {
                return Err(Error::invalid(
                    "rectangle",
                    format!("coordinate {k}: need 0 <= lo <= hi <= 1, got [{}, {}]", lo[k], hi[k]),
                ));
            }
        }
        Ok(match self {
            BaseCopula::ShuffleM(g) | BaseCopula::ShuffleMWorstCase(g) => {
                let n = g.n as f64;
                let mut total = 0.0;
                for cell in &g.cells {
                    total += cell_overlap(cell, n, lo, hi) / n;
                }
                total
            }
            BaseCopula::Bernstein { n, ranks, .. } => {
                let nf = ranks.len() as f64;
                let mut total = 0.0;
                for row in ranks {
                    let mut prod = 1.0;
                    for (k, &r) in row.iter().enumerate() {
                        let (p, q) = (f64::from(r), (*n + 1) as f64 - f64::from(r));
                        prod *= beta_cdf(p, q, hi[k]) - beta_cdf(p, q, lo[k]);
                        if prod == 0.0 {
                            break;
                        }
                    }
                    total += prod;
                }
                total / nf
            }
            BaseCopula::Comonotone { .. } => {
                let m = hi.iter().copied().fold(f64::INFINITY, f64::min)
                    - lo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                m.max(0.0)
            }
            BaseCopula::Independence { .. } => lo.iter().zip(hi).map(|(&l, &h)| h - l).product(),
        })
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::invalid("d", format!("need dimension >= 2, got {d}")));
    }
    Ok(())
}

/// Length of `{V ∈ (0,1) : segment point of `cell` lies in the rectangle}`.
fn cell_overlap(cell: &ShuffleCell, n: f64, lo: &[f64], hi: &[f64]) -> f64 {
    let mut v_lo = 0.0f64;
    let mut v_hi = 1.0f64;
    for (k, &r) in cell.ranks.iter().enumerate() {
        let r = f64::from(r);
        let positive = k == 0 || cell.slope == Slope::Positive;
        let (a, b) = if positive {
            // lo <= (r - 1 + V)/n < hi
            (n * lo[k] - r + 1.0, n * hi[k] - r + 1.0)
        } else {
            // lo <= (r - V)/n < hi
            (r - n * hi[k], r - n * lo[k])
        };
        v_lo = v_lo.max(a);
        v_hi = v_hi.min(b);
        if v_hi <= v_lo {
            return 0.0;
        }
    }
    v_hi - v_lo
}

fn beta_cdf(p: f64, q: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        beta_reg(p, q, x)
    }
}

/// A base copula paired with the per-coordinate partition families: the
/// complete specification of an IPU driver.
#[derive(Debug, Clone, PartialEq)]
pub struct DriverSpec {
    base: BaseCopula,
    families: Vec<FamilyParams>,
}

impl DriverSpec {
    pub fn new(base: BaseCopula, families: Vec<FamilyParams>) -> Result<Self> {
        if base.d() != families.len() {
            return Err(Error::invalid(
                "families",
                format!("base copula has d = {}, got {} families", base.d(), families.len()),
            ));
        }
        Ok(Self { base, families })
    }

    pub fn d(&self) -> usize {
        self.families.len()
    }

    pub fn base(&self) -> &BaseCopula {
        &self.base
    }

    pub fn families(&self) -> &[FamilyParams] {
        &self.families
    }

    /// Draw the driver vector `Z` with `Z_k = F_k^{-1}(Û_k)`, `Û ~ base`.
    pub fn sample_driver_into<R: Rng + ?Sized>(&self, rng: &mut R, u_buf: &mut [f64], out: &mut [u64]) {
        self.base.sample_into(rng, u_buf);
        for (k, fam) in self.families.iter().enumerate() {
            out[k] = fam.driver_quantile_unchecked(u_buf[k]);
        }
    }

    /// Convenience wrapper allocating the output.
    pub fn sample_driver<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u64> {
        let mut u = vec![0.0; self.d()];
        let mut z = vec![0u64; self.d()];
        self.sample_driver_into(rng, &mut u, &mut z);
        z
    }

    /// `P(Z = i)`: the base-copula mass of the rectangle
    /// `∏_k [F_k(i_k - 1), F_k(i_k))`.
    pub fn driver_pmf(&self, i: &[u64]) -> Result<f64> {
        if i.len() != self.d() {
            return Err(Error::invalid(
                "i",
                format!("expected {} indices, got {}", self.d(), i.len()),
            ));
        }
        let lo: Vec<f64> = self
            .families
            .iter()
            .zip(i)
            .map(|(f, &ix)| f.driver_cdf_before(ix))
            .collect();
        let hi: Vec<f64> = self.families.iter().zip(i).map(|(f, &ix)| f.driver_cdf(ix)).collect();
        self.base.rectangle_mass(&lo, &hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{fixture, FIXTURE_COTTIN_PFEIFER};
    use crate::data::RankMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn paper_ranks() -> RankMatrix {
        RankMatrix::from_observations(&fixture(FIXTURE_COTTIN_PFEIFER).unwrap())
    }

    fn identity_ranks(n: usize, d: usize) -> RankMatrix {
        RankMatrix::from_rows((1..=n).map(|i| vec![i as u32; d]).collect()).unwrap()
    }

    #[test]
    fn shuffle_of_m_cells() {
        let base = BaseCopula::shuffle_of_m(&paper_ranks());
        let BaseCopula::ShuffleM(grid) = &base else {
            panic!("wrong kind")
        };
        assert_eq!(grid.cells().len(), 20);
        assert_eq!(grid.cells()[1].ranks, vec![20, 20]);
        assert!(grid.cells().iter().all(|c| c.slope == Slope::Positive));
        // rectangle (19/20, 1] x (19/20, 1]: exactly the top cell
        let mass = base.rectangle_mass(&[0.95, 0.95], &[1.0, 1.0]).unwrap();
        assert!((mass - 0.05).abs() < 1e-12);
    }

    #[test]
    fn single_observation_shuffle_is_comonotone() {
        // n = 1 shuffle has one full-size cell: samples lie on the diagonal
        let ranks = RankMatrix::from_rows(vec![vec![1, 1]]).unwrap();
        let base = BaseCopula::shuffle_of_m(&ranks);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut p = [0.0; 2];
        for _ in 0..100 {
            base.sample_into(&mut rng, &mut p);
            assert!((p[0] - p[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn diagonal_ranks_sample_on_diagonal() {
        let base = BaseCopula::shuffle_of_m(&identity_ranks(7, 3));
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut p = [0.0; 3];
        for _ in 0..200 {
            base.sample_into(&mut rng, &mut p);
            assert!((p[0] - p[1]).abs() < 1e-15 && (p[0] - p[2]).abs() < 1e-15);
        }
    }

    #[test]
    fn worst_case_auto_detects_corner() {
        let base = BaseCopula::worst_case_shuffle(&paper_ranks(), None).unwrap();
        let BaseCopula::ShuffleMWorstCase(grid) = &base else {
            panic!("wrong kind")
        };
        let mut corner: Vec<(Vec<u32>, Slope)> = grid
            .cells()
            .iter()
            .filter(|c| c.slope == Slope::Negative)
            .map(|c| (c.ranks.clone(), c.slope))
            .collect();
        corner.sort();
        // auto-detected corner has size 3, re-paired countermonotonically
        assert_eq!(
            corner.iter().map(|(r, _)| r.clone()).collect::<Vec<_>>(),
            vec![vec![18, 20], vec![19, 19], vec![20, 18]]
        );
        // untouched cells keep their original ranks and positive slope
        assert!(grid
            .cells()
            .iter()
            .filter(|c| c.slope == Slope::Positive)
            .all(|c| c.ranks[0] <= 17));
    }

    #[test]
    fn worst_case_explicit_corner_sizes() {
        // top-4 sets differ (observation with r1=17 has r2=15)
        assert!(BaseCopula::worst_case_shuffle(&paper_ranks(), Some(4)).is_err());
        // corner_size = 1 flips just the jointly-maximal cell
        let base = BaseCopula::worst_case_shuffle(&paper_ranks(), Some(1)).unwrap();
        let BaseCopula::ShuffleMWorstCase(grid) = &base else {
            panic!("wrong kind")
        };
        let corner: Vec<_> = grid.cells().iter().filter(|c| c.slope == Slope::Negative).collect();
        assert_eq!(corner.len(), 1);
        assert_eq!(corner[0].ranks, vec![20, 20]);

        // identity ranks: the whole square can be the corner
        let base = BaseCopula::worst_case_shuffle(&identity_ranks(4, 2), Some(4)).unwrap();
        let BaseCopula::ShuffleMWorstCase(grid) = &base else {
            panic!("wrong kind")
        };
        let mut pairs: Vec<(u32, u32)> = grid.cells().iter().map(|c| (c.ranks[0], c.ranks[1])).collect();
        pairs.sort();
        assert_eq!(pairs, vec![(1, 4), (2, 3), (3, 2), (4, 1)]);
        assert!(grid.cells().iter().all(|c| c.slope == Slope::Negative));
    }

    #[test]
    fn worst_case_rejects_disjoint_maxima() {
        let ranks = RankMatrix::from_rows(vec![vec![1, 2], vec![2, 1]]).unwrap();
        assert!(BaseCopula::worst_case_shuffle(&ranks, None).is_err());
    }

    #[test]
    fn worst_case_preserves_marginal_ranks() {
        let wc = BaseCopula::worst_case_shuffle(&paper_ranks(), None).unwrap();
        let BaseCopula::ShuffleMWorstCase(grid) = &wc else {
            panic!("wrong kind")
        };
        for k in 0..2 {
            let mut rs: Vec<u32> = grid.cells().iter().map(|c| c.ranks[k]).collect();
            rs.sort_unstable();
            assert_eq!(rs, (1..=20).collect::<Vec<u32>>());
        }
    }

    #[test]
    fn sample_points_match_segment_formulas() {
        // deterministic check of the segment arithmetic via rectangle mass:
        // positive cell (20,20) puts (19 + V)/20 on both coordinates
        let base = BaseCopula::shuffle_of_m(&paper_ranks());
        let m = base.rectangle_mass(&[0.96, 0.96], &[0.97, 0.97]).unwrap();
        assert!((m - 0.05 * 0.2).abs() < 1e-12); // V in (0.2, 0.4): length 0.2

        // worst-case corner cell (20,18): coordinate 2 = (18 - V)/20
        let wc = BaseCopula::worst_case_shuffle(&paper_ranks(), None).unwrap();
        let m = wc.rectangle_mass(&[0.96, 0.88], &[0.97, 0.89]).unwrap();
        // u1=(19+V)/20 in [.96,.97) <=> V in [.2,.4); u2=(18-V)/20 in [.88,.89) <=> V in (.2,.4]
        assert!((m - 0.05 * 0.2).abs() < 1e-12);
    }

    #[test]
    fn comonotone_and_independence_masses() {
        let como = BaseCopula::comonotone(2).unwrap();
        let m = como.rectangle_mass(&[0.0, 0.2], &[0.3, 1.0]).unwrap();
        assert!((m - 0.1).abs() < 1e-15);
        let ind = BaseCopula::independence(2).unwrap();
        let m = ind.rectangle_mass(&[0.0, 0.2], &[0.3, 1.0]).unwrap();
        assert!((m - 0.24).abs() < 1e-15);
        assert!(como.rectangle_mass(&[0.5], &[1.0]).is_err());
        assert!(como.rectangle_mass(&[0.5, 0.0], &[0.4, 1.0]).is_err());
    }

    #[test]
    fn full_cube_has_unit_mass() {
        let ranks = paper_ranks();
        for base in [
            BaseCopula::shuffle_of_m(&ranks),
            BaseCopula::worst_case_shuffle(&ranks, None).unwrap(),
            BaseCopula::bernstein(&ranks),
            BaseCopula::comonotone(2).unwrap(),
            BaseCopula::independence(2).unwrap(),
        ] {
            let m = base.rectangle_mass(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
            assert!((m - 1.0).abs() < 1e-12, "{m}");
        }
    }

    #[test]
    fn bernstein_single_cell_is_independence() {
        let ranks = RankMatrix::from_rows(vec![vec![1, 1]]).unwrap();
        let base = BaseCopula::bernstein(&ranks);
        // Beta(1,1) kernels: uniform product measure
        let m = base.rectangle_mass(&[0.1, 0.5], &[0.4, 0.75]).unwrap();
        assert!((m - 0.3 * 0.25).abs() < 1e-12);
    }

    #[test]
    fn comonotone_sample_repeats_one_uniform() {
        let base = BaseCopula::comonotone(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut p = [0.0; 3];
        base.sample_into(&mut rng, &mut p);
        assert_eq!(p[0], p[1]);
        assert_eq!(p[1], p[2]);
    }

    #[test]
    fn driver_pmf_reference_values() {
        let nb5 = FamilyParams::negative_binomial(5).unwrap();
        let spec = DriverSpec::new(BaseCopula::comonotone(2).unwrap(), vec![nb5, nb5]).unwrap();
        let p00 = spec.driver_pmf(&[0, 0]).unwrap();
        assert!((p00 - 1.0 / 6.0).abs() < 1e-12);
        // disjoint diagonal intervals carry no comonotone mass
        let p05 = spec.driver_pmf(&[0, 5]).unwrap();
        assert_eq!(p05, 0.0);
    }

    #[test]
    fn driver_pmf_marginal_consistency() {
        let nb5 = FamilyParams::negative_binomial(5).unwrap();
        let ranks = paper_ranks();
        let spec = DriverSpec::new(BaseCopula::shuffle_of_m(&ranks), vec![nb5, nb5]).unwrap();
        // sum over i2 recovers the marginal alpha at i1 = 0
        let mut acc = 0.0;
        for i2 in 0..100_000u64 {
            acc += spec.driver_pmf(&[0, i2]).unwrap();
            if spec.families()[1].driver_cdf(i2) > 1.0 - 1e-10 {
                break;
            }
        }
        assert!((acc - nb5.marginal_alpha(0)).abs() < 1e-9, "{acc}");
    }

    #[test]
    fn sample_driver_through_comonotone_base() {
        // comonotone base with equal families keeps all coordinates equal
        let nb5 = FamilyParams::negative_binomial(5).unwrap();
        let spec = DriverSpec::new(BaseCopula::comonotone(2).unwrap(), vec![nb5, nb5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..500 {
            let z = spec.sample_driver(&mut rng);
            assert_eq!(z[0], z[1]);
        }
    }

    #[test]
    fn independence_driver_uncorrelated() {
        // Poisson family: the driver marginals are geometric, so the sample
        // correlation is well behaved (the negative binomial driver has an
        // infinite-mean Pareto law).
        let po6 = FamilyParams::poisson(6.0).unwrap();
        let spec = DriverSpec::new(BaseCopula::independence(2).unwrap(), vec![po6, po6]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        let (mut s1, mut s2, mut s12, mut s1q, mut s2q) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let z = spec.sample_driver(&mut rng);
            let (a, b) = (z[0] as f64, z[1] as f64);
            s1 += a;
            s2 += b;
            s12 += a * b;
            s1q += a * a;
            s2q += b * b;
        }
        let nf = n as f64;
        let cov = s12 / nf - (s1 / nf) * (s2 / nf);
        let corr = cov / ((s1q / nf - (s1 / nf).powi(2)).sqrt() * (s2q / nf - (s2 / nf).powi(2)).sqrt());
        assert!(corr.abs() < 0.01, "corr {corr}");
    }
}
