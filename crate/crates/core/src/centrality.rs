//! Eigenvector centrality of weighted directed graphs and inference on the
//! resulting score vectors.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{
    chi2_quantile, estimate_d, normal_quantile, wald_test, Hypothesis, MatrixSample, TestReport,
};
use crate::matcore::{eig_nonsym, ConjugateClosure, Mat, RootSelector};

/// Directed graph with aggregated edge weights; vertices are kept in
/// lexicographic order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DirectedGraph {
    labels: Vec<String>,
    edges: BTreeMap<(usize, usize), f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub weight: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GraphJson {
    #[serde(default)]
    pub vertices: Vec<String>,
    pub edges: Vec<Edge>,
}

impl DirectedGraph {
    /// Vertices are the endpoints of the edges.
    pub fn from_edges(edges: &[Edge]) -> Result<Self> {
        Self::with_vertices(&[], edges, false)
    }

    /// Declared vertices plus, if `extend` is set, any new edge endpoints.
    /// Without `extend`, an edge touching an undeclared vertex is an error.
    pub fn with_vertices(vertices: &[String], edges: &[Edge], extend: bool) -> Result<Self> {
        let mut set: BTreeSet<String> = vertices.iter().cloned().collect();
        let strict = !vertices.is_empty() && !extend;
        for e in edges {
            for v in [&e.from, &e.to] {
                if !set.contains(v) {
                    if strict {
                        return Err(Error::UnknownVertex(v.clone()));
                    }
                    set.insert(v.clone());
                }
            }
        }
        let labels: Vec<String> = set.into_iter().collect();
        let index: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let mut agg = BTreeMap::new();
        for e in edges {
            if !e.weight.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "edge {} -> {} has non-finite weight",
                    e.from, e.to
                )));
            }
            let key = (index[e.from.as_str()], index[e.to.as_str()]);
            *agg.entry(key).or_insert(0.0) += e.weight;
        }
        Ok(DirectedGraph { labels, edges: agg })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().map(|(&(i, j), &w)| Edge {
            from: self.labels[i].clone(),
            to: self.labels[j].clone(),
            weight: w,
        })
    }

    /// Same edges over a larger vertex set.
    pub fn relabeled(&self, labels: &[String]) -> Result<Self> {
        let edges: Vec<Edge> = self.edges().collect();
        Self::with_vertices(labels, &edges, false)
    }
}

/// `A[i][j]` = aggregated weight of edge `i → j`.
pub fn adjacency(g: &DirectedGraph) -> Mat {
    let p = g.labels.len();
    let mut a = Mat::zeros(p, p);
    for (&(i, j), &w) in &g.edges {
        a[(i, j)] = w;
    }
    a
}

/// Adjacency matrices of several snapshots over the union of their vertices.
pub fn adjacency_series(graphs: &[DirectedGraph]) -> Result<(Vec<String>, Vec<Mat>)> {
    let labels: Vec<String> = graphs
        .iter()
        .flat_map(|g| g.labels.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mats = graphs
        .iter()
        .map(|g| g.relabeled(&labels).map(|h| adjacency(&h)))
        .collect::<Result<_>>()?;
    Ok((labels, mats))
}

/// Parses `from,to,weight` lines; a first line whose weight is not numeric is
/// taken as a header.
pub fn parse_edge_csv(text: &str) -> Result<Vec<Edge>> {
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = t.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: lineno + 1,
                column: fields.len().min(3) + 1,
                message: format!("expected from,to,weight but found {} fields", fields.len()),
            });
        }
        match fields[2].parse::<f64>() {
            Ok(w) => edges.push(Edge {
                from: fields[0].to_string(),
                to: fields[1].to_string(),
                weight: w,
            }),
            Err(_) if edges.is_empty() && lineno == first_content_line(text) => continue,
            Err(_) => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    column: 3,
                    message: format!("'{}' is not a number", fields[2]),
                })
            }
        }
    }
    Ok(edges)
}

fn first_content_line(text: &str) -> usize {
    text.lines()
        .position(|l| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .unwrap_or(0)
}

/// Reads an edge list from CSV, or from JSON when the extension is `.json`.
pub fn read_graph(path: &Path) -> Result<DirectedGraph> {
    let text = std::fs::read_to_string(path)?;
    let is_json = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let g: GraphJson = serde_json::from_str(&text)?;
        DirectedGraph::with_vertices(&g.vertices, &g.edges, false)
    } else {
        DirectedGraph::from_edges(&parse_edge_csv(&text)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CentralityResult {
    /// Unit Euclidean norm, first non-negligible entry positive.
    pub scores: Vec<f64>,
    /// The dominant root, or its modulus when it is complex.
    pub dominant_root: f64,
    pub used_modulus: bool,
    pub warnings: Vec<String>,
}

/// Scores from the right eigenvector of the largest-modulus root.
///
/// Real roots tied at the maximal modulus (`±λ`) resolve to the positive
/// one. A complex dominant pair yields entrywise moduli. Any other tie is an
/// error.
pub fn katz_scores(a: &Mat) -> Result<CentralityResult> {
    let s = eig_nonsym(a)?;
    let rho = s.eigenvalues[0].norm();
    let tol = 1e-8 * (1.0 + rho);
    let tied: Vec<usize> = (0..s.dim())
        .filter(|&i| rho - s.eigenvalues[i].norm() <= tol)
        .collect();
    let mut warnings = Vec::new();

    let pair = tied.len() == 2 && s.conjugate_of(tied[0]) == tied[1] && !s.is_real(tied[0]);
    let all_real = tied.iter().all(|&i| s.is_real(i));
    if pair {
        let v: Vec<f64> = s.right.column(tied[0]).iter().map(|z| z.norm()).collect();
        warnings.push(format!(
            "dominant root {} is complex; scores are moduli of the eigenvector entries",
            crate::matcore::eigen_format(s.eigenvalues[tied[0]])
        ));
        return Ok(CentralityResult {
            scores: normalize(DVector::from_vec(v)),
            dominant_root: rho,
            used_modulus: true,
            warnings,
        });
    }
    let chosen = if tied.len() == 1 {
        tied[0]
    } else if all_real {
        let positive: Vec<usize> = tied.iter().copied().filter(|&i| s.eigenvalues[i].re > 0.0).collect();
        if positive.len() != 1 {
            return Err(Error::DominantTie(format!(
                "{} real roots share the maximal modulus {rho}",
                tied.len()
            )));
        }
        warnings.push(format!(
            "roots ±{rho} tie in modulus; using the positive root"
        ));
        positive[0]
    } else {
        return Err(Error::DominantTie(format!(
            "{} roots, including a complex pair, share the maximal modulus {rho}",
            tied.len()
        )));
    };
    let lam = s.eigenvalues[chosen].re;
    if lam < 0.0 {
        warnings.push(format!("dominant root {lam} is negative"));
    }
    let v: Vec<f64> = s.right.column(chosen).iter().map(|z| z.re).collect();
    Ok(CentralityResult {
        scores: normalize(DVector::from_vec(v)),
        dominant_root: lam,
        used_modulus: false,
        warnings,
    })
}

fn normalize(mut v: DVector<f64>) -> Vec<f64> {
    let n = v.norm();
    if n > 0.0 {
        v /= n;
    }
    if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-12) {
        if first < 0.0 {
            v.neg_mut();
        }
    }
    v.iter().copied().collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Membership {
    pub inside: bool,
    pub critical_value: f64,
    pub report: TestReport,
}

/// Whether `s0` lies in the `1 − alpha` Wald confidence set for the
/// dominant eigenvector of the mean adjacency.
pub fn score_in_confidence_set(sample: &MatrixSample, s0: &[f64], alpha: f64) -> Result<Membership> {
    let p = sample.dim();
    if s0.len() != p {
        return Err(Error::Dimension(format!(
            "score vector has {} entries, graph has {p} vertices",
            s0.len()
        )));
    }
    if s0.iter().all(|&x| x == 0.0) {
        return Err(Error::InvalidArgument("score vector is zero".into()));
    }
    let hyp = Hypothesis::span(Mat::from_column_slice(p, 1, s0), RootSelector::Largest(1))
        .with_closure(ConjugateClosure::Complete);
    let report = wald_test(sample, &hyp)?;
    let critical_value = chi2_quantile(alpha, report.df);
    Ok(Membership {
        inside: report.statistic <= critical_value,
        critical_value,
        report: report.with_levels(&[alpha]),
    })
}

/// Confidence interval for the score ratio `s_i / s_p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioInterval {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Coordinatewise intervals for `s_i / s_p`, `i < p`. These are projections
/// of the joint confidence set, not the set itself.
pub fn score_intervals(sample: &MatrixSample, alpha: f64) -> Result<Vec<RatioInterval>> {
    let s = eig_nonsym(&sample.m_hat)?;
    if !s.is_real(0) {
        return Err(Error::InvalidArgument(
            "ratio intervals need a real dominant root".into(),
        ));
    }
    let est = estimate_d(sample, &RootSelector::Largest(1))?;
    let z = normal_quantile(alpha / 2.0);
    (0..est.d_hat.nrows())
        .map(|i| {
            let var = est.variance(i, 0);
            let scale = est.omega_d.amax().max(1.0) / est.n as f64;
            if var < -1e-12 * scale {
                return Err(Error::NonPositiveVariance {
                    row: i,
                    col: 0,
                    variance: var,
                });
            }
            let half = z * var.max(0.0).sqrt();
            let d = est.d_hat[(i, 0)];
            Ok(RatioInterval {
                estimate: d,
                lo: d - half,
                hi: d + half,
            })
        })
        .collect()
}
