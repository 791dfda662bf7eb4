//! Latent-space evaluation: density overlap and divergence against the
//! standard-normal prior, a polynomial-kernel two-sample discrepancy, rank
//! correlation, and the end-to-end evaluation of a trained model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::attributes::AttributeKind;
use crate::autograd::Tensor;
use crate::error::{Error, Result};
use crate::melody::{Corpus, Split, TokenMelody};
use crate::scalar::Scalar;
use crate::vib::{reparameterize_values, VibModel};

pub const GRID_LO: f64 = -5.0;
pub const GRID_HI: f64 = 5.0;
pub const GRID_POINTS: usize = 1001;

/// Density values on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub lo: f64,
    pub hi: f64,
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.values.len() - 1) as f64
    }

    pub fn abscissae(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.values.len()).map(|k| self.lo + k as f64 * h).collect()
    }

    /// Trapezoidal integral of the density.
    pub fn mass(&self) -> f64 {
        trapezoid(&self.values, self.step())
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.lo == other.lo && self.hi == other.hi && self.values.len() == other.values.len() {
            Ok(())
        } else {
            Err(Error::Shape("density grids differ".into()))
        }
    }
}

fn standard_abscissae() -> Vec<f64> {
    let h = (GRID_HI - GRID_LO) / (GRID_POINTS - 1) as f64;
    (0..GRID_POINTS).map(|k| GRID_LO + k as f64 * h).collect()
}

fn trapezoid(y: &[f64], h: f64) -> f64 {
    if y.len() < 2 {
        return 0.0;
    }
    let inner: f64 = y[1..y.len() - 1].iter().sum();
    h * (inner + 0.5 * (y[0] + y[y.len() - 1]))
}

fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let u = (x - mean) / sd;
    (-0.5 * u * u).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

/// Analytic normal density on the standard grid.
pub fn normal_grid(mean: f64, sd: f64) -> DensityGrid {
    DensityGrid { lo: GRID_LO, hi: GRID_HI, values: standard_abscissae().iter().map(|&x| normal_pdf(x, mean, sd)).collect() }
}

/// Sample standard deviation with divisor `n - 1`.
fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Gaussian-kernel density estimate on the standard grid. The default
/// bandwidth is Scott's rule `n^(-1/5) * std`.
pub fn kde(samples: &[f64], bandwidth: Option<f64>) -> Result<DensityGrid> {
    if samples.len() < 2 {
        return Err(Error::SampleTooSmall { need: 2, got: samples.len() });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("kde sample".into()));
    }
    let sd = sample_std(samples);
    if !(sd > 0.0) {
        return Err(Error::Degenerate("kde of a constant sample".into()));
    }
    let h = match bandwidth {
        Some(h) if h > 0.0 => h,
        Some(h) => return Err(Error::InvalidConfig(format!("bandwidth {h}"))),
        None => (samples.len() as f64).powf(-0.2) * sd,
    };
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    // kernels beyond 12 bandwidths are below 1e-31 of their peak
    let reach = 12.0 * h;
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let values = standard_abscissae()
        .iter()
        .map(|&x| {
            let start = sorted.partition_point(|&s| s < x - reach);
            let end = sorted.partition_point(|&s| s <= x + reach);
            let sum: f64 = sorted[start..end]
                .iter()
                .map(|&s| {
                    let u = (x - s) / h;
                    (-0.5 * u * u).exp()
                })
                .sum();
            sum * norm
        })
        .collect();
    Ok(DensityGrid { lo: GRID_LO, hi: GRID_HI, values })
}

/// Trapezoidal integral of `min(p, q)`, clamped to `[0, 1]`.
pub fn overlapping_area(p: &DensityGrid, q: &DensityGrid) -> Result<f64> {
    p.check_same(q)?;
    let m: Vec<f64> = p.values.iter().zip(&q.values).map(|(a, b)| a.min(*b)).collect();
    Ok(trapezoid(&m, p.step()).clamp(0.0, 1.0))
}

/// Jensen-Shannon divergence in nats, clamped to `[0, ln 2]`.
pub fn jsd(p: &DensityGrid, q: &DensityGrid) -> Result<f64> {
    p.check_same(q)?;
    let term = |a: f64, m: f64| if a > 0.0 { a * (a / m).ln() } else { 0.0 };
    let integrand: Vec<f64> = p
        .values
        .iter()
        .zip(&q.values)
        .map(|(&a, &b)| {
            let m = 0.5 * (a + b);
            0.5 * term(a, m) + 0.5 * term(b, m)
        })
        .collect();
    Ok(trapezoid(&integrand, p.step()).clamp(0.0, std::f64::consts::LN_2))
}

fn poly_kernel(x: f64, y: f64, degree: i32, coef: f64) -> f64 {
    (x * y + coef).powi(degree)
}

/// Unbiased squared maximum mean discrepancy with kernel `(x y + coef)^degree`.
///
/// For equal sample sizes the paired form averages
/// `k(xi,xj) + k(yi,yj) - k(xi,yj) - k(xj,yi)` over `i != j`, which is
/// exactly zero when both samples are the same. May be slightly negative.
pub fn mmd_poly(x: &[f64], y: &[f64], degree: i32, coef: f64) -> Result<f64> {
    for s in [x, y] {
        if s.len() < 2 {
            return Err(Error::SampleTooSmall { need: 2, got: s.len() });
        }
    }
    let k = |a: f64, b: f64| poly_kernel(a, b, degree, coef);
    let (m, n) = (x.len(), y.len());
    if m == n {
        let mut sum = 0.0;
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    sum += k(x[i], x[j]) + k(y[i], y[j]) - k(x[i], y[j]) - k(x[j], y[i]);
                }
            }
        }
        return Ok(sum / (m * (m - 1)) as f64);
    }
    let within = |s: &[f64]| {
        let mut acc = 0.0;
        for i in 0..s.len() {
            for j in 0..s.len() {
                if i != j {
                    acc += k(s[i], s[j]);
                }
            }
        }
        acc / (s.len() * (s.len() - 1)) as f64
    };
    let cross: f64 = x.iter().map(|&a| y.iter().map(|&b| k(a, b)).sum::<f64>()).sum();
    Ok(within(x) + within(y) - 2.0 * cross / (m * n) as f64)
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation.
pub fn pearson(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!("lengths {} and {}", u.len(), v.len())));
    }
    if u.len() < 2 {
        return Err(Error::SampleTooSmall { need: 2, got: u.len() });
    }
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let (mut suv, mut suu, mut svv) = (0.0, 0.0, 0.0);
    for (&a, &b) in u.iter().zip(v) {
        suv += (a - mu) * (b - mv);
        suu += (a - mu) * (a - mu);
        svv += (b - mv) * (b - mv);
    }
    if suu == 0.0 || svv == 0.0 {
        return Err(Error::Degenerate("correlation with a constant vector".into()));
    }
    Ok((suv / (suu * svv).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation with average ranks for ties.
pub fn spearman(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!("lengths {} and {}", u.len(), v.len())));
    }
    pearson(&average_ranks(u), &average_ranks(v))
}

/// One evaluated model: a results-table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub attribute: AttributeKind,
    pub regularizer: String,
    pub gamma: f64,
    pub rho_s: f64,
    pub oa: f64,
    pub jsd: f64,
    /// Clamped at zero.
    pub mmd: f64,
    pub mmd_raw: f64,
    pub evaluated: usize,
    /// Decoded sequences whose attribute is undefined.
    pub excluded: usize,
}

pub const RESULTS_HEADER: &str = "attribute,regularizer,gamma,rho_s,oa,jsd,mmd,evaluated,excluded";

impl MetricsReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{},{}",
            self.attribute, self.regularizer, self.gamma, self.rho_s, self.oa, self.jsd, self.mmd, self.evaluated, self.excluded
        )
    }
}

/// Per-melody latent coordinates and decoded attribute for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub z_reg: f64,
    pub z_other: f64,
    /// `None` when the decoded sequence has no defined attribute.
    pub decoded_attribute: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: MetricsReport,
    /// Least |Pearson|-correlated dimension with the regularized one.
    pub other_index: usize,
    pub scatter: Vec<ScatterPoint>,
    /// KDE of the regularized dimension on the standard grid.
    pub density: DensityGrid,
    /// Decoded sequences in test-split order.
    pub decoded: Vec<TokenMelody>,
}

pub const SCATTER_HEADER: &str = "z_reg,z_other,decoded_attribute";

pub fn scatter_to_csv(points: &[ScatterPoint]) -> String {
    let mut out = format!("{SCATTER_HEADER}\n");
    for p in points {
        let a = p.decoded_attribute.map(|v| format!("{v:?}")).unwrap_or_default();
        out.push_str(&format!("{:?},{:?},{a}\n", p.z_reg, p.z_other));
    }
    out
}

/// Grid, KDE of the regularized dimension and the prior density as CSV.
pub fn density_to_csv(grid: &DensityGrid) -> String {
    let prior = normal_grid(0.0, 1.0);
    let mut out = String::from("x,density,prior\n");
    for ((x, d), p) in grid.abscissae().iter().zip(&grid.values).zip(&prior.values) {
        out.push_str(&format!("{x:.4},{d:?},{p:?}\n"));
    }
    out
}

/// What to evaluate and how to label the report.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSpec {
    pub attribute: AttributeKind,
    pub regularizer: String,
    pub gamma: f64,
    pub seed: u64,
    pub batch_size: usize,
}

/// Encodes the test split, samples latents, decodes them greedily and scores
/// the regularized dimension.
pub fn evaluate_model<T: Scalar>(model: &VibModel<T>, corpus: &Corpus, spec: &EvalSpec) -> Result<Evaluation> {
    let test = corpus.indices(Split::Test);
    if test.len() < 2 {
        return Err(Error::SampleTooSmall { need: 2, got: test.len() });
    }
    let d = model.config.latent_dim;
    let reg = model.config.reg_index;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut z_all: Vec<Vec<f64>> = Vec::with_capacity(test.len());
    let mut decoded = Vec::with_capacity(test.len());
    for chunk in test.chunks(spec.batch_size.max(1)) {
        let batch: Vec<TokenMelody> = chunk.iter().map(|&i| corpus.melodies[i]).collect();
        let lat = model.encode_values(&batch)?;
        let noise = Tensor::from_fn(batch.len(), d, |_, _| T::of(StandardNormal.sample(&mut rng)));
        let z = reparameterize_values(&lat, &noise)?;
        if !z.is_finite() {
            return Err(Error::NonFinite("sampled latents".into()));
        }
        decoded.extend(model.decode_greedy(&z)?);
        for r in 0..z.rows() {
            z_all.push(z.row(r).iter().map(|v| v.to_f64_lossy()).collect());
        }
    }

    let column = |k: usize| z_all.iter().map(|z| z[k]).collect::<Vec<f64>>();
    let z_reg = column(reg);
    let attrs: Vec<Option<f64>> = decoded.iter().map(|m| spec.attribute.compute(m).ok()).collect();
    let (mut zs, mut ats) = (Vec::new(), Vec::new());
    for (z, a) in z_reg.iter().zip(&attrs) {
        if let Some(a) = a {
            zs.push(*z);
            ats.push(*a);
        }
    }
    let excluded = attrs.len() - zs.len();
    if excluded > 0 {
        log::info!("{excluded} decoded sequences have no defined {}", spec.attribute);
    }
    // an undertrained model may decode (almost) nothing, or one constant
    // attribute; the correlation is then undefined rather than an error
    let rho_s = match spearman(&zs, &ats) {
        Ok(r) => r,
        Err(Error::SampleTooSmall { .. } | Error::Degenerate(_)) => {
            log::warn!("rank correlation undefined for {} evaluable sequences", zs.len());
            f64::NAN
        }
        Err(e) => return Err(e),
    };
    let density = kde(&z_reg, None)?;
    let prior = normal_grid(0.0, 1.0);
    let oa = overlapping_area(&density, &prior)?;
    let js = jsd(&density, &prior)?;
    let reference: Vec<f64> = (0..z_reg.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mmd_raw = mmd_poly(&z_reg, &reference, 3, 1.0)?;
    log::debug!("raw polynomial MMD {mmd_raw}");

    let mut other_index = if reg == 0 { 1.min(d - 1) } else { 0 };
    let mut best = f64::INFINITY;
    for k in (0..d).filter(|&k| k != reg) {
        let c = pearson(&column(k), &z_reg).map(f64::abs).unwrap_or(f64::INFINITY);
        if c < best {
            best = c;
            other_index = k;
        }
    }
    let z_other = column(other_index);
    let scatter = (0..z_reg.len())
        .map(|k| ScatterPoint { z_reg: z_reg[k], z_other: z_other[k], decoded_attribute: attrs[k] })
        .collect();

    Ok(Evaluation {
        report: MetricsReport {
            attribute: spec.attribute,
            regularizer: spec.regularizer.clone(),
            gamma: spec.gamma,
            rho_s,
            oa,
            jsd: js,
            mmd: mmd_raw.max(0.0),
            mmd_raw,
            evaluated: zs.len(),
            excluded,
        },
        other_index,
        scatter,
        density,
        decoded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn kde_of_large_normal_sample_matches_pdf() {
        let grid = kde(&normals(100_000, 1), None).unwrap();
        let truth = normal_grid(0.0, 1.0);
        let sup = grid.values.iter().zip(&truth.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(sup < 0.02, "{sup}");
        assert!((grid.mass() - 1.0).abs() < 1e-3);
        assert!(grid.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn kde_of_symmetric_sample_is_symmetric() {
        let half = normals(500, 2);
        let sample: Vec<f64> = half.iter().flat_map(|&x| [x, -x]).collect();
        let g = kde(&sample, None).unwrap();
        let n = g.values.len();
        let asym = (0..n).map(|k| (g.values[k] - g.values[n - 1 - k]).abs()).fold(0.0, f64::max);
        assert!(asym < 1e-12, "{asym}");
    }

    #[test]
    fn kde_rejects_degenerate_input() {
        assert!(kde(&[1.0, 1.0, 1.0], None).is_err());
        assert!(kde(&[1.0], None).is_err());
        assert!(kde(&[0.0, 1.0], Some(-1.0)).is_err());
    }

    #[test]
    fn overlap_examples() {
        let p = normal_grid(0.0, 1.0);
        let q = normal_grid(1.0, 1.0);
        assert!((overlapping_area(&p, &p).unwrap() - 1.0).abs() < 1e-3);
        let oracle = 2.0 * Normal::new(0.0, 1.0).unwrap().cdf(-0.5);
        assert!((oracle - 0.6171).abs() < 1e-4);
        assert!((overlapping_area(&p, &q).unwrap() - oracle).abs() < 0.002);
        assert_eq!(overlapping_area(&p, &q).unwrap(), overlapping_area(&q, &p).unwrap());

        let left = DensityGrid { lo: GRID_LO, hi: GRID_HI, values: (0..GRID_POINTS).map(|k| if k < 400 { 0.25 } else { 0.0 }).collect() };
        let right = DensityGrid { lo: GRID_LO, hi: GRID_HI, values: (0..GRID_POINTS).map(|k| if k > 600 { 0.25 } else { 0.0 }).collect() };
        assert_eq!(overlapping_area(&left, &right).unwrap(), 0.0);
        let other = DensityGrid { lo: -4.0, hi: 4.0, values: vec![0.0; GRID_POINTS] };
        assert!(overlapping_area(&p, &other).is_err());
        assert!(jsd(&p, &other).is_err());
    }

    #[test]
    fn jsd_examples() {
        let p = normal_grid(0.0, 1.0);
        let q = normal_grid(1.0, 1.0);
        assert!(jsd(&p, &p).unwrap() < 1e-6);
        assert_eq!(jsd(&p, &q).unwrap(), jsd(&q, &p).unwrap());

        let h = 1.0 / 400.0;
        let left = DensityGrid { lo: GRID_LO, hi: GRID_HI, values: (0..GRID_POINTS).map(|k| if k <= 400 { 1.0 / (400.0 * h) } else { 0.0 }).collect() };
        let right = DensityGrid { lo: GRID_LO, hi: GRID_HI, values: (0..GRID_POINTS).map(|k| if k >= 600 { 1.0 / (400.0 * h) } else { 0.0 }).collect() };
        assert!((jsd(&left, &right).unwrap() - std::f64::consts::LN_2).abs() < 1e-3);

        // fine-grid integration on a wide window
        let pdf = |x: f64, m: f64| (-0.5 * (x - m) * (x - m)).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let step = 1e-4;
        let oracle: f64 = (-120_000..=130_000)
            .map(|k| {
                let x = k as f64 * step;
                let (a, b) = (pdf(x, 0.0), pdf(x, 1.0));
                let m = 0.5 * (a + b);
                0.5 * a * (a / m).ln() + 0.5 * b * (b / m).ln()
            })
            .sum::<f64>()
            * step;
        assert!((jsd(&p, &q).unwrap() - oracle).abs() < 1e-3, "{oracle}");
    }

    #[test]
    fn identical_densities_have_full_overlap_and_no_divergence() {
        let g = kde(&normals(2000, 3), None).unwrap();
        assert!((overlapping_area(&g, &g).unwrap() - g.mass().min(1.0)).abs() < 1e-12);
        assert!(jsd(&g, &g).unwrap() < 1e-12);
    }

    #[test]
    fn mmd_examples() {
        let x = normals(1000, 4);
        let v = mmd_poly(&x[..500], &x[500..], 3, 1.0).unwrap();
        assert!(v.abs() < 0.05, "{v}");
        assert_eq!(mmd_poly(&x, &x, 3, 1.0).unwrap(), 0.0);
        assert_eq!(mmd_poly(&[0.0; 5], &[0.0; 5], 3, 1.0).unwrap(), 0.0);
        assert!(mmd_poly(&[1.0], &[1.0, 2.0], 3, 1.0).is_err());

        // direct summation for X = {1, 2}, Y = {0, -1}
        let k = |a: f64, b: f64| (a * b + 1.0).powi(3);
        let xx = 2.0 * k(1.0, 2.0) / 2.0;
        let yy = 2.0 * k(0.0, -1.0) / 2.0;
        let xy = (k(1.0, -1.0) + k(2.0, 0.0)) / 2.0 + (k(2.0, 0.0) + k(1.0, -1.0)) / 2.0;
        let direct = xx + yy - xy;
        assert!((mmd_poly(&[1.0, 2.0], &[0.0, -1.0], 3, 1.0).unwrap() - direct).abs() < 1e-12);

        // unequal sizes follow the general estimator
        let a = [1.0, 2.0, 0.5];
        let b = [0.0, -1.0];
        let within_a = 2.0 * (k(1.0, 2.0) + k(1.0, 0.5) + k(2.0, 0.5)) / 6.0;
        let within_b = 2.0 * k(0.0, -1.0) / 2.0;
        let cross: f64 = a.iter().flat_map(|&p| b.iter().map(move |&q| k(p, q))).sum::<f64>() / 6.0;
        assert!((mmd_poly(&a, &b, 3, 1.0).unwrap() - (within_a + within_b - 2.0 * cross)).abs() < 1e-12);
    }

    /// Rank by counting smaller and equal entries.
    fn brute_ranks(v: &[f64]) -> Vec<f64> {
        v.iter()
            .map(|&x| {
                let less = v.iter().filter(|&&y| y < x).count() as f64;
                let equal = v.iter().filter(|&&y| y == x).count() as f64;
                less + (equal + 1.0) / 2.0
            })
            .collect()
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        let u = [1.0, 2.0, 2.0, 3.0];
        let v = [1.0, 3.0, 2.0, 4.0];
        assert_eq!(average_ranks(&u), vec![1.0, 2.5, 2.5, 4.0]);
        let expected = pearson(&brute_ranks(&u), &brute_ranks(&v)).unwrap();
        assert_eq!(spearman(&u, &v).unwrap(), expected);
        assert!(spearman(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(spearman(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn spearman_matches_brute_force_on_tied_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let n = rng.random_range(3..40);
            let u: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
            assert_eq!(average_ranks(&u), brute_ranks(&u));
            match (spearman(&u, &v), pearson(&brute_ranks(&u), &brute_ranks(&v))) {
                (Ok(a), Ok(b)) => assert_eq!(a, b),
                (Err(_), Err(_)) => {}
                other => panic!("{other:?}"),
            }
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn spearman_is_invariant_under_increasing_maps(
                pairs in proptest::collection::vec((-50i32..50, -50i32..50), 3..30)
            ) {
                let u: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
                let v: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
                let fu: Vec<f64> = u.iter().map(|x| (x / 10.0).exp()).collect();
                let gv: Vec<f64> = v.iter().map(|x| x.powi(3) + 2.0 * x).collect();
                match (spearman(&u, &v), spearman(&fu, &gv)) {
                    (Ok(a), Ok(b)) => { prop_assert_eq!(a, b); prop_assert!((-1.0..=1.0).contains(&a)); }
                    (Err(_), Err(_)) => {}
                    _ => prop_assert!(false),
                }
            }

            #[test]
            fn overlap_and_divergence_are_symmetric(m1 in -2.0f64..2.0, m2 in -2.0f64..2.0, s in 0.5f64..1.5) {
                let p = normal_grid(m1, 1.0);
                let q = normal_grid(m2, s);
                let oa = overlapping_area(&p, &q).unwrap();
                prop_assert_eq!(oa, overlapping_area(&q, &p).unwrap());
                prop_assert_eq!(jsd(&p, &q).unwrap(), jsd(&q, &p).unwrap());
                prop_assert!((0.0..=1.0).contains(&oa));
                prop_assert!((0.0..=std::f64::consts::LN_2).contains(&jsd(&p, &q).unwrap()));
            }
        }
    }
}
