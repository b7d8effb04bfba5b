use std::path::Path;

use eigeninf::centrality::{adjacency, adjacency_series, katz_scores, read_graph, score_in_confidence_set, score_intervals};
use eigeninf::inference::{
    estimate_d_with, estimate_from_sample, quasi_symmetry_check, t_test, wald_test, CovStructure, Hypothesis,
    MatrixSample, TestReport,
};
use eigeninf::matcore::io::{read_matrix, read_matrix_list, MatrixJson};
use eigeninf::matcore::{eig_nonsym, kron, split_spectrum_with, ConjugateClosure, RootSelector, Spectrum};
use eigeninf::simlab::{run_size_power, SimConfig};
use eigeninf::{Error, Mat, Result, Tolerances};
use serde_json::{json, Value};

use crate::output::SCHEMA_VERSION;
use crate::{Cli, Command, SampleArgs, Structure};

pub struct Outcome {
    pub report: Value,
    pub notices: Vec<String>,
    pub null_rejected: bool,
}

fn mat(m: &Mat) -> Value {
    serde_json::to_value(MatrixJson::from_mat(m)).expect("matrix serializes")
}

fn finish(command: &str, mut body: Value, notices: Vec<String>, null_rejected: bool) -> Outcome {
    let obj = body.as_object_mut().expect("report body is an object");
    obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    obj.insert("command".into(), json!(command));
    obj.insert("notices".into(), json!(notices));
    Outcome {
        report: body,
        notices,
        null_rejected,
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Decompose { input, select } => decompose(input, select),
        Command::Wald {
            data,
            upsilon,
            annihilator,
            select,
            alpha,
            assert_null,
        } => {
            check_alpha(*alpha)?;
            let sample = load_sample(data)?;
            let sel = RootSelector::parse(select)?;
            let mut notices = closure_notice(&eig_nonsym(&sample.m_hat)?, &sel)?;
            let hyp = match (upsilon, annihilator) {
                (Some(v), _) => Hypothesis::span(read_matrix(v)?, sel),
                (None, Some(a)) => Hypothesis::annihilator(read_matrix(a)?, sel),
                (None, None) => return Err(Error::InvalidArgument("give --upsilon or --annihilator".into())),
            };
            let report = wald_test(&sample, &hyp.with_closure(ConjugateClosure::Complete))?.with_levels(&[*alpha]);
            if report.diagnostics.degenerate {
                notices.push("covariance vanished and the restriction holds exactly; statistic set to 0".into());
            }
            let reject = report.rejects(*alpha);
            Ok(finish("wald", test_body(&report, *alpha, sample.n), notices, *assert_null && reject))
        }
        Command::Ttest {
            data,
            select,
            coef,
            d0,
            alpha,
            assert_null,
        } => {
            check_alpha(*alpha)?;
            let sample = load_sample(data)?;
            let sel = RootSelector::parse(select)?;
            let notices = closure_notice(&eig_nonsym(&sample.m_hat)?, &sel)?;
            let (i, j) = parse_coef(coef)?;
            let est = estimate_d_with(&sample, &sel, ConjugateClosure::Complete, &Tolerances::default())?;
            let report = t_test(&est, i, j, *d0)?.with_levels(&[*alpha]);
            let reject = report.rejects(*alpha);
            let mut body = test_body(&report, *alpha, sample.n);
            let obj = body.as_object_mut().expect("object");
            obj.insert("coefficient".into(), json!([i + 1, j + 1]));
            obj.insert("estimate".into(), json!(est.d_hat[(i, j)]));
            obj.insert("standard_error".into(), json!(est.variance(i, j).max(0.0).sqrt()));
            obj.insert("d0".into(), json!(d0));
            obj.insert("d_hat".into(), mat(&est.d_hat));
            Ok(finish("ttest", body, notices, *assert_null && reject))
        }
        Command::Centrality {
            graph,
            series,
            scores,
            alpha,
            assert_null,
        } => {
            check_alpha(*alpha)?;
            centrality(graph.as_deref(), series.as_deref(), scores.as_deref(), *alpha, *assert_null)
        }
        Command::Simulate { config, n, reps, tables } => {
            let mut cfg = match config {
                Some(path) => serde_json::from_str::<SimConfig>(&std::fs::read_to_string(path)?)?,
                None => SimConfig::trade_design(n.clone(), *reps, 0),
            };
            if let Some(seed) = cli.common.seed {
                cfg.seed = seed;
            }
            let res = run_size_power(&cfg)?;
            eprintln!("simulate: {:.2} s", res.runtime_seconds);
            if let Some(dir) = tables {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("rejection.csv"), res.tables.rejection_csv())?;
                std::fs::write(dir.join("distances.csv"), res.tables.distance_csv())?;
            }
            let mut notices = Vec::new();
            for row in res.tables.rows.iter().filter(|r| r.failure_budget_exceeded) {
                notices.push(format!(
                    "n = {}: {} Wald and {} t failures exceed the 0.1% budget",
                    row.n, row.wald_failures, row.t_failures
                ));
            }
            let body = json!({
                "seed": cfg.seed,
                "config": serde_json::to_value(&cfg)?,
                "tables": serde_json::to_value(&res.tables)?,
            });
            Ok(finish("simulate", body, notices, false))
        }
        Command::CheckSymmetry { input } => {
            let m = read_matrix(input)?;
            let q = quasi_symmetry_check(&m)?;
            let body = json!({
                "symmetrizable": q.symmetrizable,
                "verdict": if q.symmetrizable { "symmetrizable" } else { "not symmetrizable" },
                "certificate": q.certificate.as_ref().map(mat),
            });
            Ok(finish("check-symmetry", body, Vec::new(), false))
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("--alpha must lie in (0, 1), got {alpha}")))
    }
}

fn parse_coef(text: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let bad = || Error::InvalidArgument(format!("--coef expects one-based 'i,j', got '{text}'"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let i: usize = parts[0].parse().map_err(|_| bad())?;
    let j: usize = parts[1].parse().map_err(|_| bad())?;
    if i == 0 || j == 0 {
        return Err(bad());
    }
    Ok((i - 1, j - 1))
}

fn closure_notice(s: &Spectrum, sel: &RootSelector) -> Result<Vec<String>> {
    let complete = sel.resolve(s, ConjugateClosure::Complete)?;
    if sel.resolve(s, ConjugateClosure::Strict).is_ok() {
        return Ok(Vec::new());
    }
    let one_based: Vec<String> = complete.iter().map(|i| (i + 1).to_string()).collect();
    Ok(vec![format!(
        "selection split a complex conjugate pair; using roots {} instead",
        one_based.join(",")
    )])
}

fn load_sample(args: &SampleArgs) -> Result<MatrixSample> {
    if let Some(path) = &args.sample {
        let obs = read_matrix_list(path)?;
        let structure = match args.structure {
            Structure::Full => CovStructure::Full,
            Structure::KroneckerColumns => CovStructure::KroneckerColumns,
        };
        return estimate_from_sample(&obs, structure);
    }
    let (Some(mean), Some(cov), Some(n)) = (&args.mean, &args.covariance, args.n) else {
        return Err(Error::InvalidArgument(
            "give --sample, or --mean with --covariance and --n".into(),
        ));
    };
    let m = read_matrix(mean)?;
    let c = read_matrix(cov)?;
    let p = m.nrows();
    let omega = if c.shape() == (p, p) { kron(&Mat::identity(p, p), &c) } else { c };
    MatrixSample::from_moments(m, omega, n)
}

fn test_body(report: &TestReport, alpha: f64, n: usize) -> Value {
    json!({
        "statistic": report.statistic,
        "df": report.df,
        "reference": report.reference,
        "p_value": report.p_value,
        "alpha": alpha,
        "reject": report.rejects(alpha),
        "n": n,
        "diagnostics": report.diagnostics,
    })
}

fn decompose(input: &Path, select: &str) -> Result<Outcome> {
    let m = read_matrix(input)?;
    let s = eig_nonsym(&m)?;
    let sel = RootSelector::parse(select)?;
    let notices = closure_notice(&s, &sel)?;
    let split = split_spectrum_with(&s, &sel, ConjugateClosure::Complete, &Tolerances::default())?;
    let roots: Vec<Value> = s
        .eigenvalues
        .iter()
        .zip(&s.flags)
        .map(|(z, f)| json!({"re": z.re, "im": z.im, "multiplicity": f.multiplicity, "condition": f.condition}))
        .collect();
    let body = json!({
        "input": input.display().to_string(),
        "dim": m.nrows(),
        "eigenvalues": roots,
        "selected": split.selected.iter().map(|i| i + 1).collect::<Vec<_>>(),
        "gap": split.gap,
        "r_i": mat(&split.r_i),
        "l_i": mat(&split.l_i),
        "lambda_i": mat(&split.lambda_i),
        "r_j": mat(&split.r_j),
        "l_j": mat(&split.l_j),
        "lambda_j": mat(&split.lambda_j),
        "p_i": mat(&split.p_i()),
        "p_j": mat(&split.p_j()),
    });
    Ok(finish("decompose", body, notices, false))
}

fn centrality(
    graph: Option<&Path>,
    series: Option<&Path>,
    scores: Option<&str>,
    alpha: f64,
    assert_null: bool,
) -> Result<Outcome> {
    if let Some(path) = graph {
        let g = read_graph(path)?;
        let res = katz_scores(&adjacency(&g))?;
        let body = json!({
            "vertices": g.labels(),
            "scores": res.scores,
            "dominant_root": res.dominant_root,
            "used_modulus": res.used_modulus,
        });
        let mut notices = res.warnings;
        notices.push("a single snapshot gives no sampling variability; pass --series for intervals".into());
        return Ok(finish("centrality", body, notices, false));
    }
    let dir = series.expect("clap requires --graph or --series");
    let mut files: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("csv") || e.eq_ignore_ascii_case("json"))
        })
        .collect();
    files.sort();
    let graphs = files.iter().map(|p| read_graph(p)).collect::<Result<Vec<_>>>()?;
    let (labels, mats) = adjacency_series(&graphs)?;
    let sample = estimate_from_sample(&mats, CovStructure::Full)?;
    let res = katz_scores(&sample.m_hat)?;
    let mut notices = res.warnings.clone();
    let intervals = match score_intervals(&sample, alpha) {
        Ok(iv) => Some(iv),
        Err(e) => {
            notices.push(format!("ratio intervals unavailable: {e}"));
            None
        }
    };
    let mut body = json!({
        "vertices": labels,
        "periods": mats.len(),
        "scores": res.scores,
        "dominant_root": res.dominant_root,
        "used_modulus": res.used_modulus,
        "alpha": alpha,
        "ratio_reference": labels.last(),
        "ratio_intervals": intervals,
    });
    let mut rejected = false;
    if let Some(text) = scores {
        let s0 = text
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("'{t}' in --scores is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let member = score_in_confidence_set(&sample, &s0, alpha)?;
        rejected = !member.inside;
        body.as_object_mut().expect("object").insert(
            "membership".into(),
            json!({
                "scores": s0,
                "inside": member.inside,
                "statistic": member.report.statistic,
                "critical_value": member.critical_value,
                "df": member.report.df,
                "p_value": member.report.p_value,
            }),
        );
    }
    Ok(finish("centrality", body, notices, assert_null && rejected))
}
