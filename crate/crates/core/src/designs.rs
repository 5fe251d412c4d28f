//! Design-of-experiments generators: full grids, Monte Carlo, Latin
//! hypercube and the base-2 Sobol sequence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parameters::{from_unit_cube, sample_space, ParameterSpace, RandomStream};

/// Which generator produced a design, plus what is needed to replay it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skip: Option<u64>,
}

impl Provenance {
    pub fn new(generator: impl Into<String>) -> Self {
        Provenance {
            generator: generator.into(),
            ..Default::default()
        }
    }

    pub fn seeded(generator: impl Into<String>, rng: &RandomStream) -> Self {
        Provenance {
            generator: generator.into(),
            seed: Some(rng.seed()),
            stream: Some(rng.stream()),
            skip: None,
        }
    }
}

/// Row-major `n × d` matrix of parameter realizations with column names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    names: Vec<String>,
    nrows: usize,
    values: Vec<f64>,
    provenance: Provenance,
}

impl DesignMatrix {
    pub fn new(names: Vec<String>, values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        let d = names.len();
        if d == 0 {
            return Err(Error::InvalidArgument("design needs at least one column".into()));
        }
        if values.len() % d != 0 {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: values.len() % d,
            });
        }
        Ok(DesignMatrix {
            nrows: values.len() / d,
            names,
            values,
            provenance,
        })
    }

    /// Design from explicit rows with generated column names `x0, x1, …`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        Self::from_rows_named((0..d.max(1)).map(|i| format!("x{i}")).collect(), rows)
    }

    pub fn from_rows_named(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let d = names.len();
        let mut values = Vec::with_capacity(rows.len() * d);
        for row in rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(names, values, Provenance::new("explicit"))
    }

    /// Empty design with the given columns.
    pub fn empty(names: Vec<String>) -> Self {
        DesignMatrix {
            names,
            nrows: 0,
            values: Vec::new(),
            provenance: Provenance::new("explicit"),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.ncols();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.ncols())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Sub-design of the given row indices, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> DesignMatrix {
        let mut values = Vec::with_capacity(indices.len() * self.ncols());
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        DesignMatrix {
            names: self.names.clone(),
            nrows: indices.len(),
            values,
            provenance: self.provenance.clone(),
        }
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }
}

/// Full factorial grid with equispaced points per axis (endpoints
/// included; a count of one uses the midpoint). The last axis varies
/// fastest.
pub fn grid_design(space: &ParameterSpace, points_per_axis: &[usize]) -> Result<DesignMatrix> {
    let d = space.dim();
    if points_per_axis.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: points_per_axis.len(),
        });
    }
    if let Some(axis) = points_per_axis.iter().position(|&c| c == 0) {
        return Err(Error::param(&space.entries()[axis].0, "grid point count must be at least 1"));
    }
    space.require_bounded()?;

    let axes: Vec<Vec<f64>> = space
        .entries()
        .iter()
        .zip(points_per_axis)
        .map(|((_, dist), &count)| {
            let (lo, hi) = dist.support();
            if count == 1 {
                vec![0.5 * (lo + hi)]
            } else {
                (0..count)
                    .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
                    .collect()
            }
        })
        .collect();

    let total: usize = points_per_axis.iter().product();
    let mut values = Vec::with_capacity(total * d);
    let mut index = vec![0usize; d];
    for _ in 0..total {
        values.extend(index.iter().zip(&axes).map(|(&k, axis)| axis[k]));
        for j in (0..d).rev() {
            index[j] += 1;
            if index[j] < points_per_axis[j] {
                break;
            }
            index[j] = 0;
        }
    }
    DesignMatrix::new(space.names(), values, Provenance::new("grid"))
}

/// Monte Carlo design; same draws as [`sample_space`].
pub fn mc_design(space: &ParameterSpace, n: usize, rng: &mut RandomStream) -> Result<DesignMatrix> {
    sample_space(space, n, rng)
}

/// Latin hypercube sample in the unit cube (row-major `n × d`): one point
/// placed uniformly at random inside each of `n` strata per dimension,
/// with the strata independently permuted per dimension.
pub fn lhs_unit(n: usize, d: usize, rng: &mut RandomStream) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let mut unit = vec![0.0; n * d];
    let mut strata: Vec<usize> = (0..n).collect();
    for j in 0..d {
        rng.shuffle(&mut strata);
        for (i, &stratum) in strata.iter().enumerate() {
            unit[i * d + j] = (stratum as f64 + rng.uniform_open()) / n as f64;
        }
    }
    Ok(unit)
}

pub fn lhs_design(space: &ParameterSpace, n: usize, rng: &mut RandomStream) -> Result<DesignMatrix> {
    let unit = lhs_unit(n, space.dim(), rng)?;
    from_unit_cube(space, &unit, Provenance::seeded("latin_hypercube", rng))
}

/// Sobol points `skip .. skip + n` mapped onto the space.
pub fn sobol_design(space: &ParameterSpace, n: usize, skip: u64) -> Result<DesignMatrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let unit = SobolSequence::new(space.dim())?.points(skip, n);
    let provenance = Provenance {
        generator: "sobol_sequence".into(),
        skip: Some(skip),
        ..Default::default()
    };
    from_unit_cube(space, &unit, provenance)
}

const SOBOL_BITS: usize = 32;
const DIRECTION_TABLE: &str = include_str!("sobol_directions.txt");

/// Base-2 digital Sobol sequence with Joe–Kuo direction numbers, generated
/// in Gray-code order.
#[derive(Clone, Debug)]
pub struct SobolSequence {
    directions: Vec<[u32; SOBOL_BITS]>,
}

impl SobolSequence {
    pub fn max_dim() -> usize {
        DIRECTION_TABLE.lines().filter(|l| !l.trim().is_empty()).count() + 1
    }

    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("Sobol dimension must be at least 1".into()));
        }
        if dim > Self::max_dim() {
            return Err(Error::InvalidArgument(format!(
                "dimension {dim} exceeds the Sobol direction-number table ({} dimensions)",
                Self::max_dim()
            )));
        }
        let mut directions = Vec::with_capacity(dim);
        let mut first = [0u32; SOBOL_BITS];
        for (k, v) in first.iter_mut().enumerate() {
            *v = 1u32 << (SOBOL_BITS - 1 - k);
        }
        directions.push(first);

        for line in DIRECTION_TABLE.lines().take(dim - 1) {
            let fields: Vec<u32> = line
                .split_whitespace()
                .map(|t| t.parse().expect("malformed direction table"))
                .collect();
            let (s, a, m) = (fields[1] as usize, fields[2], &fields[3..]);
            let mut v = [0u32; SOBOL_BITS];
            for k in 0..SOBOL_BITS {
                v[k] = if k < s {
                    m[k] << (SOBOL_BITS - 1 - k)
                } else {
                    let mut value = v[k - s] ^ (v[k - s] >> s);
                    for j in 1..s {
                        if (a >> (s - 1 - j)) & 1 == 1 {
                            value ^= v[k - j];
                        }
                    }
                    value
                };
            }
            directions.push(v);
        }
        Ok(SobolSequence { directions })
    }

    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    /// Row-major points `skip .. skip + n`, each coordinate in `[0, 1)`.
    pub fn points(&self, skip: u64, n: usize) -> Vec<f64> {
        let d = self.dim();
        let scale = 1.0 / (1u64 << SOBOL_BITS) as f64;
        // state at index `skip` via its Gray code
        let gray = skip ^ (skip >> 1);
        let mut state: Vec<u32> = self
            .directions
            .iter()
            .map(|v| {
                (0..SOBOL_BITS)
                    .filter(|&k| (gray >> k) & 1 == 1)
                    .fold(0u32, |acc, k| acc ^ v[k])
            })
            .collect();
        let mut out = Vec::with_capacity(n * d);
        let mut index = skip;
        for _ in 0..n {
            out.extend(state.iter().map(|&x| x as f64 * scale));
            let bit = (!index).trailing_zeros() as usize;
            for (x, v) in state.iter_mut().zip(&self.directions) {
                *x ^= v[bit];
            }
            index += 1;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parameters::{build_space, Distribution};

    fn unit_space(d: usize) -> ParameterSpace {
        build_space((0..d).map(|i| (format!("p{i}"), Distribution::uniform(0.0, 1.0)))).unwrap()
    }

    #[test]
    fn grid_counts_and_order() {
        let space = unit_space(2);
        let g = grid_design(&space, &[10, 10]).unwrap();
        assert_eq!(g.nrows(), 100);
        assert_eq!(g.row(0), &[0.0, 0.0]);
        assert_eq!(g.row(1)[0], 0.0);
        assert!((g.row(1)[1] - 1.0 / 9.0).abs() < 1e-15);
        assert_eq!(g.row(99), &[1.0, 1.0]);

        let one = build_space([("x", Distribution::uniform(0.0, 4.0))]).unwrap();
        assert_eq!(grid_design(&one, &[1]).unwrap().values(), &[2.0]);

        assert_eq!(grid_design(&unit_space(3), &[2, 3, 4]).unwrap().nrows(), 24);
    }

    #[test]
    fn grid_errors() {
        let space = build_space([("x", Distribution::normal(0.0, 1.0))]).unwrap();
        assert!(matches!(grid_design(&space, &[3]), Err(Error::UnboundedMarginal(_))));
        assert!(grid_design(&unit_space(1), &[0]).is_err());
        assert!(grid_design(&unit_space(2), &[2]).is_err());
    }

    #[test]
    fn lhs_quartiles() {
        let space = unit_space(1);
        let design = lhs_design(&space, 4, &mut RandomStream::new(3)).unwrap();
        let mut bins: Vec<usize> = design.values().iter().map(|&v| (v * 4.0) as usize).collect();
        bins.sort();
        assert_eq!(bins, vec![0, 1, 2, 3]);
        assert!(lhs_design(&space, 0, &mut RandomStream::new(3)).is_err());
        let a = lhs_design(&unit_space(3), 9, &mut RandomStream::new(5)).unwrap();
        let b = lhs_design(&unit_space(3), 9, &mut RandomStream::new(5)).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn lhs_one_sample_per_bin_exhaustive() {
        for n in 1..=64 {
            let d = 3;
            let unit = lhs_unit(n, d, &mut RandomStream::new(n as u64)).unwrap();
            for j in 0..d {
                let mut counts = vec![0usize; n];
                for i in 0..n {
                    counts[(unit[i * d + j] * n as f64) as usize] += 1;
                }
                assert!(counts.iter().all(|&c| c == 1), "n={n}, dim={j}");
            }
        }
    }

    /// Independent 1-D reference: the first Sobol coordinate is the
    /// van der Corput radical inverse of the Gray code of the index.
    fn van_der_corput_gray(i: u64) -> f64 {
        let mut g = i ^ (i >> 1);
        let mut x = 0.0;
        let mut f = 0.5;
        while g > 0 {
            if g & 1 == 1 {
                x += f;
            }
            g >>= 1;
            f *= 0.5;
        }
        x
    }

    #[test]
    fn sobol_first_dimension() {
        let seq = SobolSequence::new(1).unwrap();
        assert_eq!(seq.points(1, 3), vec![0.5, 0.75, 0.25]);
        let pts = seq.points(0, 1000);
        for (i, &p) in pts.iter().enumerate() {
            assert_eq!(p, van_der_corput_gray(i as u64));
        }
    }

    #[test]
    fn sobol_skip_is_consistent() {
        let seq = SobolSequence::new(5).unwrap();
        let all = seq.points(0, 40);
        let tail = seq.points(17, 23);
        assert_eq!(&all[17 * 5..], &tail[..]);
    }

    #[test]
    fn sobol_known_second_dimension() {
        // dims 2: s=1, a=0, m=1 -> points 0, .5, .25/.75 pattern
        let seq = SobolSequence::new(2).unwrap();
        let pts = seq.points(0, 4);
        assert_eq!(pts, vec![0.0, 0.0, 0.5, 0.5, 0.75, 0.25, 0.25, 0.75]);
    }

    #[test]
    fn sobol_each_dimension_stratifies() {
        // every coordinate of the first 2^k points hits each of the 2^k
        // dyadic intervals once
        let d = SobolSequence::max_dim();
        assert!(d >= 50);
        let seq = SobolSequence::new(d).unwrap();
        let n = 256;
        let pts = seq.points(0, n);
        for j in 0..d {
            let mut counts = vec![0; n];
            for i in 0..n {
                counts[(pts[i * d + j] * n as f64) as usize] += 1;
            }
            assert!(counts.iter().all(|&c| c == 1), "dim {j}");
        }
        assert!(SobolSequence::new(d + 1).is_err());
    }

    #[test]
    fn sobol_design_is_deterministic_and_contained() {
        let space = unit_space(2);
        let a = sobol_design(&space, 64, 1).unwrap();
        let b = sobol_design(&space, 64, 1).unwrap();
        assert_eq!(a, b);
        assert!(a.values().iter().all(|v| (0.0..1.0).contains(v)));
    }

    /// Brute-force star discrepancy over anchored boxes with corners on the
    /// point coordinates.
    fn star_discrepancy(pts: &[f64]) -> f64 {
        let n = pts.len() / 2;
        let mut xs: Vec<f64> = pts.iter().step_by(2).copied().chain([1.0]).collect();
        let mut ys: Vec<f64> = pts.iter().skip(1).step_by(2).copied().chain([1.0]).collect();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        let mut worst: f64 = 0.0;
        for &x in &xs {
            for &y in &ys {
                let (mut open, mut closed) = (0usize, 0usize);
                for p in pts.chunks_exact(2) {
                    if p[0] < x && p[1] < y {
                        open += 1;
                    }
                    if p[0] <= x && p[1] <= y {
                        closed += 1;
                    }
                }
                let vol = x * y;
                worst = worst
                    .max(vol - open as f64 / n as f64)
                    .max(closed as f64 / n as f64 - vol);
            }
        }
        worst
    }

    #[test]
    fn sobol_beats_monte_carlo_discrepancy() {
        let n = 256;
        let sobol = SobolSequence::new(2).unwrap().points(1, n);
        let d_sobol = star_discrepancy(&sobol);
        let mut total = 0.0;
        for rep in 0..100 {
            let mut rng = RandomStream::new(rep);
            let mc: Vec<f64> = (0..2 * n).map(|_| rng.uniform()).collect();
            total += star_discrepancy(&mc);
        }
        let d_mc = total / 100.0;
        assert!(d_sobol < d_mc, "sobol {d_sobol} vs mc {d_mc}");
    }

    #[test]
    fn mc_design_examples() {
        let space = unit_space(1);
        let d = mc_design(&space, 1000, &mut RandomStream::new(99)).unwrap();
        let mean = d.values().iter().sum::<f64>() / 1000.0;
        // 3 * sqrt(1/12) / sqrt(1000) = 0.027
        assert!((mean - 0.5).abs() < 0.05);
        let fixed = build_space([("a", Distribution::uniform(2.5, 2.5))]).unwrap();
        let d = mc_design(&fixed, 20, &mut RandomStream::new(1)).unwrap();
        assert!(d.values().iter().all(|&v| v == 2.5));
        assert!(mc_design(&space, 0, &mut RandomStream::new(1)).is_err());
    }
}
