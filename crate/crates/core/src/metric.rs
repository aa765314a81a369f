//! Finite presented (pseudo)metric spaces over [`ExtReal`].

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{MapError, MetricError};
use crate::extreal::{ExtReal, INF};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct RawSpace {
    points: Vec<String>,
    dist: Vec<Vec<ExtReal>>,
}

/// A finite pseudometric: distinct points may sit at distance zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct FinPseudoMetric {
    points: Vec<String>,
    dist: Vec<Vec<ExtReal>>,
}

/// A finite extended metric space.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct FinMetric {
    points: Vec<String>,
    dist: Vec<Vec<ExtReal>>,
}

fn validate_pseudo(points: &[String], dist: &[Vec<ExtReal>]) -> Result<(), MetricError> {
    let n = points.len();
    let mut seen = HashMap::new();
    for p in points {
        if seen.insert(p.as_str(), ()).is_some() {
            return Err(MetricError::DuplicatePoint(p.clone()));
        }
    }
    if dist.len() != n || dist.iter().any(|row| row.len() != n) {
        return Err(MetricError::Shape { points: n, rows: dist.len(), cols: dist.first().map_or(0, Vec::len) });
    }
    for i in 0..n {
        if !dist[i][i].is_zero() {
            return Err(MetricError::NonzeroDiagonal(points[i].clone()));
        }
        for j in 0..n {
            if dist[i][j] != dist[j][i] {
                return Err(MetricError::Asymmetric(points[i].clone(), points[j].clone()));
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if dist[i][k] > dist[i][j] + dist[j][k] {
                    return Err(MetricError::Triangle(points[i].clone(), points[j].clone(), points[k].clone()));
                }
            }
        }
    }
    Ok(())
}

macro_rules! shared_space_api {
    ($ty:ident) => {
        impl $ty {
            pub fn len(&self) -> usize {
                self.points.len()
            }

            pub fn is_empty(&self) -> bool {
                self.points.is_empty()
            }

            pub fn points(&self) -> &[String] {
                &self.points
            }

            pub fn point(&self, i: usize) -> &str {
                &self.points[i]
            }

            pub fn index_of(&self, name: &str) -> Option<usize> {
                self.points.iter().position(|p| p == name)
            }

            pub fn d(&self, i: usize, j: usize) -> ExtReal {
                self.dist[i][j]
            }

            pub fn matrix(&self) -> &[Vec<ExtReal>] {
                &self.dist
            }

            /// Distance by point name.
            pub fn dist_by_name(&self, a: &str, b: &str) -> Result<ExtReal, MetricError> {
                let i = self.index_of(a).ok_or_else(|| MetricError::UnknownPoint(a.into()))?;
                let j = self.index_of(b).ok_or_else(|| MetricError::UnknownPoint(b.into()))?;
                Ok(self.dist[i][j])
            }

            /// Smallest nonzero distance, `INF` when there is none.
            pub fn min_positive_distance(&self) -> ExtReal {
                let mut best = INF;
                for row in &self.dist {
                    for &v in row {
                        if !v.is_zero() && v < best {
                            best = v;
                        }
                    }
                }
                best
            }
        }

        impl From<$ty> for RawSpace {
            fn from(s: $ty) -> RawSpace {
                RawSpace { points: s.points, dist: s.dist }
            }
        }
    };
}

shared_space_api!(FinPseudoMetric);
shared_space_api!(FinMetric);

impl FinPseudoMetric {
    pub fn new(points: Vec<String>, dist: Vec<Vec<ExtReal>>) -> Result<Self, MetricError> {
        validate_pseudo(&points, &dist)?;
        Ok(FinPseudoMetric { points, dist })
    }

    /// The pseudometric itself, when it already separates points.
    pub fn to_metric(&self) -> Result<FinMetric, MetricError> {
        FinMetric::new(self.points.clone(), self.dist.clone())
    }
}

impl TryFrom<RawSpace> for FinPseudoMetric {
    type Error = MetricError;

    fn try_from(raw: RawSpace) -> Result<Self, MetricError> {
        FinPseudoMetric::new(raw.points, raw.dist)
    }
}

impl FinMetric {
    pub fn new(points: Vec<String>, dist: Vec<Vec<ExtReal>>) -> Result<Self, MetricError> {
        validate_pseudo(&points, &dist)?;
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if dist[i][j].is_zero() {
                    return Err(MetricError::ZeroDistance(points[i].clone(), points[j].clone()));
                }
            }
        }
        Ok(FinMetric { points, dist })
    }

    /// Points `0..n` pairwise at distance `INF`.
    pub fn discrete(n: usize) -> FinMetric {
        let points = (0..n).map(|i| i.to_string()).collect();
        FinMetric::discrete_named(points)
    }

    pub fn discrete_named(points: Vec<String>) -> FinMetric {
        let n = points.len();
        let dist = (0..n).map(|i| (0..n).map(|j| if i == j { ExtReal::ZERO } else { INF }).collect()).collect();
        FinMetric { points, dist }
    }

    pub fn singleton(name: &str) -> FinMetric {
        FinMetric::discrete_named(vec![name.to_string()])
    }

    pub fn empty() -> FinMetric {
        FinMetric { points: Vec::new(), dist: Vec::new() }
    }

    /// Two points `a`, `b` at the given distance.
    pub fn pair(a: &str, b: &str, d: ExtReal) -> Result<FinMetric, MetricError> {
        FinMetric::new(vec![a.to_string(), b.to_string()], vec![vec![ExtReal::ZERO, d], vec![d, ExtReal::ZERO]])
    }

    pub fn as_pseudo(&self) -> FinPseudoMetric {
        FinPseudoMetric { points: self.points.clone(), dist: self.dist.clone() }
    }

    /// Same distances, `INF` everywhere off the diagonal.
    pub fn discretized(&self) -> FinMetric {
        FinMetric::discrete_named(self.points.clone())
    }
}

impl TryFrom<RawSpace> for FinMetric {
    type Error = MetricError;

    fn try_from(raw: RawSpace) -> Result<Self, MetricError> {
        FinMetric::new(raw.points, raw.dist)
    }
}

/// Least pseudometric below the given edge weights: all-pairs shortest paths
/// with `INF` for disconnected pairs.
pub fn closure(points: &[String], constraints: &[(String, String, ExtReal)]) -> Result<FinPseudoMetric, MetricError> {
    let n = points.len();
    let mut index: HashMap<&str, usize> = HashMap::with_capacity(n);
    for (i, p) in points.iter().enumerate() {
        if index.insert(p.as_str(), i).is_some() {
            return Err(MetricError::DuplicatePoint(p.clone()));
        }
    }
    let mut dist = vec![vec![INF; n]; n];
    for (i, row) in dist.iter_mut().enumerate() {
        row[i] = ExtReal::ZERO;
    }
    for (x, y, w) in constraints {
        let i = *index.get(x.as_str()).ok_or_else(|| MetricError::UnknownPoint(x.clone()))?;
        let j = *index.get(y.as_str()).ok_or_else(|| MetricError::UnknownPoint(y.clone()))?;
        if *w < dist[i][j] {
            dist[i][j] = *w;
            dist[j][i] = *w;
        }
    }
    for k in 0..n {
        for i in 0..n {
            if dist[i][k].is_inf() {
                continue;
            }
            for j in 0..n {
                let via = dist[i][k] + dist[k][j];
                if via < dist[i][j] {
                    dist[i][j] = via;
                }
            }
        }
    }
    Ok(FinPseudoMetric { points: points.to_vec(), dist })
}

/// Metric reflection of a pseudometric.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Quotient {
    pub space: FinMetric,
    /// Class index of every input point.
    pub projection: Vec<usize>,
    /// Members of every class, in input order.
    pub classes: Vec<Vec<usize>>,
}

/// Merges points at distance zero. Each class is named after its first member.
pub fn metric_quotient(p: &FinPseudoMetric) -> Quotient {
    let n = p.len();
    let mut projection = vec![usize::MAX; n];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if projection[i] != usize::MAX {
            continue;
        }
        let c = classes.len();
        let members: Vec<usize> = (i..n).filter(|&j| p.d(i, j).is_zero()).collect();
        for &j in &members {
            projection[j] = c;
        }
        classes.push(members);
    }
    let points = classes.iter().map(|m| p.point(m[0]).to_string()).collect();
    let dist = classes.iter().map(|a| classes.iter().map(|b| p.d(a[0], b[0])).collect()).collect();
    Quotient { space: FinMetric { points, dist }, projection, classes }
}

/// Every map `a → m` (as index vectors) that does not expand distances.
pub fn nonexpansive_maps(a: &FinMetric, m: &FinMetric) -> Vec<Vec<usize>> {
    let n = a.len();
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(n);
    fn go(a: &FinMetric, m: &FinMetric, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let i = cur.len();
        if i == a.len() {
            out.push(cur.clone());
            return;
        }
        for v in 0..m.len() {
            if (0..i).all(|j| m.d(cur[j], v) <= a.d(j, i)) {
                cur.push(v);
                go(a, m, cur, out);
                cur.pop();
            }
        }
    }
    go(a, m, &mut current, &mut out);
    out
}

/// The power `m^a`: nonexpansive maps under the supremum distance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PowerSpace {
    pub space: FinMetric,
    pub maps: Vec<Vec<usize>>,
}

pub fn power_space(m: &FinMetric, a: &FinMetric) -> PowerSpace {
    let maps = nonexpansive_maps(a, m);
    let sup = |f: &[usize], g: &[usize]| f.iter().zip(g).map(|(&x, &y)| m.d(x, y)).fold(ExtReal::ZERO, ExtReal::max);
    let points = maps
        .iter()
        .map(|f| {
            let names: Vec<&str> = f.iter().map(|&x| m.point(x)).collect();
            format!("({})", names.join(","))
        })
        .collect();
    let dist = maps.iter().map(|f| maps.iter().map(|g| sup(f, g)).collect()).collect();
    PowerSpace { space: FinMetric { points, dist }, maps }
}

/// Checks that `f` (by index) is a nonexpansive map `a → b`.
pub fn check_nonexpansive(a: &FinMetric, b: &FinMetric, f: &[usize]) -> Result<(), MapError> {
    if f.len() != a.len() {
        return Err(MapError::NotTotal(format!("{} of {} points", f.len(), a.len())));
    }
    for (i, &fi) in f.iter().enumerate() {
        if fi >= b.len() {
            return Err(MapError::OutOfRange(a.point(i).to_string()));
        }
    }
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            if b.d(f[i], f[j]) > a.d(i, j) {
                return Err(MapError::Expanding(a.point(i).to_string(), a.point(j).to_string()));
            }
        }
    }
    Ok(())
}

/// Whether `f` is a distance-preserving bijection.
pub fn is_isometry(a: &FinMetric, b: &FinMetric, f: &[usize]) -> bool {
    if a.len() != b.len() || f.len() != a.len() {
        return false;
    }
    let mut hit = vec![false; b.len()];
    for &x in f {
        if x >= b.len() || hit[x] {
            return false;
        }
        hit[x] = true;
    }
    (0..a.len()).all(|i| (0..a.len()).all(|j| a.d(i, j) == b.d(f[i], f[j])))
}

/// Backtracking search for an isometry `a → b`.
pub fn find_isometry(a: &FinMetric, b: &FinMetric) -> Option<Vec<usize>> {
    if a.len() != b.len() {
        return None;
    }
    fn go(a: &FinMetric, b: &FinMetric, cur: &mut Vec<usize>, used: &mut [bool]) -> bool {
        let i = cur.len();
        if i == a.len() {
            return true;
        }
        for v in 0..b.len() {
            if used[v] || !(0..i).all(|j| b.d(cur[j], v) == a.d(j, i)) {
                continue;
            }
            used[v] = true;
            cur.push(v);
            if go(a, b, cur, used) {
                return true;
            }
            cur.pop();
            used[v] = false;
        }
        false
    }
    let mut cur = Vec::new();
    let mut used = vec![false; b.len()];
    go(a, b, &mut cur, &mut used).then_some(cur)
}
