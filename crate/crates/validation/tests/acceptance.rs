//! Acceptance gate. Prints one line per criterion and exits non-zero if any fails.

use std::time::{Duration, Instant};

use eigeninf::centrality::{score_in_confidence_set, score_intervals};
use eigeninf::inference::{quasi_symmetry_check, symmetric_in_metric, wald_test, Hypothesis, MatrixSample};
use eigeninf::matcore::{eig_nonsym, max_abs, split_spectrum, RootSelector};
use eigeninf::perturb::{fd_jacobian, jacobian_ba, jacobian_bw, JacobianKind};
use eigeninf::simlab::{
    draw_sample, log_grid, random_null_instance, random_spd, remainder_order, run_size_power, trade_matrix,
    SimConfig,
};
use eigeninf::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion<'a> = (&'static str, Duration, Box<dyn Fn() -> Outcome + 'a>);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&x)
}

fn worked_example() -> Outcome {
    let m = Mat::from_row_slice(2, 2, &[0.8, 0.5, 0.0, 0.4]);
    let s = eig_nonsym(&m).unwrap();
    let eigs: Vec<f64> = s.eigenvalues.iter().map(|z| z.re).collect();
    let left = s.left.map(|z| z.re);
    let sp1 = split_spectrum(&s, &RootSelector::Indices(vec![0])).unwrap();
    let sp2 = split_spectrum(&s, &RootSelector::Indices(vec![1])).unwrap();
    let close = |a: &Mat, b: &[f64]| max_abs(&(a - Mat::from_row_slice(2, 2, b))) < 1e-3;
    let mut errs = Vec::new();
    if (eigs[0] - 0.8).abs() >= 1e-3 || (eigs[1] - 0.4).abs() >= 1e-3 {
        errs.push(format!("eigenvalues {eigs:?}"));
    }
    // Columns of `left` are l₁, l₂.
    if !close(&left, &[1.0, 0.0, 1.25, 1.6]) {
        errs.push(format!("left vectors {:?}", left.as_slice()));
    }
    if !close(&sp1.p_i(), &[1.0, 1.25, 0.0, 0.0]) || !close(&sp2.p_i(), &[0.0, -1.25, 0.0, 1.0]) {
        errs.push("projections".into());
    }
    let detail = format!(
        "eigenvalues {:.3}, {:.3}; l1 = ({:.3}, {:.3}); l2 = ({:.3}, {:.3}) {}",
        eigs[0],
        eigs[1],
        left[(0, 0)],
        left[(1, 0)],
        left[(0, 1)],
        left[(1, 1)],
        errs.join("; ")
    );
    outcome(errs.is_empty(), detail)
}

fn projector_algebra() -> Outcome {
    let worst = (0..1000u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + i);
            let p = rng.random_range(2..=12);
            let k = rng.random_range(1..p);
            let inst = random_null_instance(&mut rng, p, k).unwrap();
            let s = &inst.split;
            let (pi, pj) = (s.p_i(), s.p_j());
            let all_l = {
                let mut l = Mat::zeros(p, p);
                l.columns_mut(0, k).copy_from(&s.l_i);
                l.columns_mut(k, p - k).copy_from(&s.l_j);
                l
            };
            let all_r = {
                let mut r = Mat::zeros(p, p);
                r.columns_mut(0, k).copy_from(&s.r_i);
                r.columns_mut(k, p - k).copy_from(&s.r_j);
                r
            };
            [
                max_abs(&(&pi * &pi - &pi)),
                max_abs(&(&pi * &pj)),
                max_abs(&(&pi + &pj - Mat::identity(p, p))),
                max_abs(&(&inst.m * &pi - &pi * &inst.m)),
                max_abs(&(all_l.transpose() * all_r - Mat::identity(p, p))),
                max_abs(&(s.reconstruct() - &inst.m)),
            ]
            .into_iter()
            .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    outcome(worst <= 1e-8, format!("1000 matrices, worst identity residual {worst:.2e}"))
}

fn jacobian_oracles() -> Outcome {
    let (bw, ba) = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(2000 + i);
            let p = rng.random_range(2..=8);
            let k = rng.random_range(1..p);
            let inst = random_null_instance(&mut rng, p, k).unwrap();
            let w = jacobian_bw(&inst.split, &inst.v_perp).unwrap();
            let w_fd = fd_jacobian(&inst.m, &inst.v_perp, &inst.selector, 1e-5, JacobianKind::Projection).unwrap();
            let a = jacobian_ba(&inst.split, &inst.v_perp).unwrap();
            let a_fd = fd_jacobian(&inst.m, &inst.v_perp, &inst.selector, 1e-5, JacobianKind::Normalized).unwrap();
            (max_abs(&(w.matrix - w_fd.matrix)), max_abs(&(a.matrix - a_fd.matrix)))
        })
        .reduce(|| (0.0, 0.0), |x, y| (x.0.max(y.0), x.1.max(y.1)));
    outcome(
        bw <= 1e-5 && ba <= 1e-5,
        format!("100 instances, max |B_W - FD| = {bw:.2e}, max |B_A - FD| = {ba:.2e}"),
    )
}

fn taylor_orders() -> Outcome {
    let grid = log_grid(1e-4, 1e-2, 9);
    let mut s1 = Vec::new();
    let mut s2 = Vec::new();
    for i in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + i);
        let p = rng.random_range(3..=6);
        let k = rng.random_range(1..p);
        let inst = random_null_instance(&mut rng, p, k).unwrap();
        let e = Mat::from_fn(p, p, |_, _| rng.random::<f64>() - 0.5);
        let r = remainder_order(&inst.m, &e, &inst.selector, &inst.v_perp, &grid).unwrap();
        s1.push(r.first_order.unwrap_or(f64::NAN));
        s2.push(r.second_order.unwrap_or(f64::NAN));
    }
    let range = |v: &[f64]| {
        v.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
    };
    let (a1, b1) = range(&s1);
    let (a2, b2) = range(&s2);
    let pass = s1.iter().all(|s| (s - 2.0).abs() <= 0.15) && s2.iter().all(|s| (s - 3.0).abs() <= 0.2);
    outcome(
        pass,
        format!("20 instances, first-order slopes in [{a1:.3}, {b1:.3}], second-order in [{a2:.3}, {b2:.3}]"),
    )
}

fn null_design() -> SimConfig {
    SimConfig::trade_design(vec![2000], 5000, 20240505)
}

fn wald_size(cfg: &SimConfig) -> Outcome {
    let res = run_size_power(cfg).unwrap();
    let row = &res.tables.rows[0];
    let size = row.wald_rejection[1];
    let pass = row.wald_df == 3 && within(size, 0.035, 0.065) && row.ks_wald <= 0.03 && !row.failure_budget_exceeded;
    outcome(
        pass,
        format!(
            "n = 2000, 5000 reps, df = {}, size at 0.05 = {size:.4}, KS to chi2 = {:.4}, failures = {} ({:.1} s)",
            row.wald_df, row.ks_wald, row.wald_failures, res.runtime_seconds
        ),
    )
}

fn t_law(cfg: &SimConfig) -> Outcome {
    let res = run_size_power(cfg).unwrap();
    let row = &res.tables.rows[0];
    let size = row.t_rejection.as_ref().unwrap()[1];
    let ks = row.ks_t.unwrap();
    let pass = within(size, 0.035, 0.065) && ks <= 0.03 && !row.failure_budget_exceeded;
    outcome(
        pass,
        format!("coefficient (1,1) of D, size at 0.05 = {size:.4}, KS to N(0,1) = {ks:.4}, failures = {}", row.t_failures),
    )
}

fn power() -> Outcome {
    let m = trade_matrix();
    let split = split_spectrum(&eig_nonsym(&m).unwrap(), &RootSelector::Largest(1)).unwrap();
    let r = split.r_i.normalize();
    let mut w = Mat::zeros(4, 1);
    w[0] = 1.0;
    w -= &r * r.dot(&w);
    let w = w.normalize();
    let angle: f64 = 0.2;
    let v = &r * angle.cos() + &w * angle.sin();
    let mut cfg = SimConfig::trade_design(vec![2000], 1000, 77);
    cfg.hypothesis.candidate = Some(v);
    cfg.hypothesis.coefficient = None;
    let res = run_size_power(&cfg).unwrap();
    let rate = res.tables.rows[0].wald_rejection[1];
    outcome(rate >= 0.9, format!("candidate rotated 0.2 rad, n = 2000, 1000 reps, rejection at 0.05 = {rate:.4}"))
}

fn covariance_rank() -> Outcome {
    let misses: Vec<String> = (0..100u64)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(4000 + i);
            let p = rng.random_range(2..=8);
            let k = rng.random_range(1..p);
            let inst = random_null_instance(&mut rng, p, k).unwrap();
            let sample = MatrixSample::from_moments(inst.m.clone(), random_spd(&mut rng, p * p), 1000).unwrap();
            let rep = wald_test(&sample, &Hypothesis::annihilator(inst.v_perp.clone(), inst.selector.clone())).unwrap();
            let want = k * inst.v_perp.ncols();
            (rep.diagnostics.numerical_rank != want)
                .then(|| format!("p={p} k={k}: rank {} != {want}", rep.diagnostics.numerical_rank))
        })
        .collect();
    outcome(
        misses.is_empty(),
        format!("100 instances, rank mismatches: {}", if misses.is_empty() { "none".into() } else { misses.join(", ") }),
    )
}

fn centrality_coverage() -> Outcome {
    let cfg = SimConfig::trade_design(vec![2000], 5000, 99);
    let split = split_spectrum(&eig_nonsym(&cfg.m_true).unwrap(), &RootSelector::Largest(1)).unwrap();
    let s_true: Vec<f64> = split.r_i.column(0).iter().copied().collect();
    let ratios: Vec<f64> = s_true[..3].iter().map(|x| x / s_true[3]).collect();
    let hits: Vec<(bool, [bool; 3])> = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(rep);
            let sample = draw_sample(&cfg.m_true, &cfg.omega_m, 2000, &mut rng).unwrap();
            let inside = score_in_confidence_set(&sample, &s_true, 0.05).unwrap().inside;
            let iv = score_intervals(&sample, 0.05).unwrap();
            let mut cover = [false; 3];
            for i in 0..3 {
                cover[i] = iv[i].lo <= ratios[i] && ratios[i] <= iv[i].hi;
            }
            (inside, cover)
        })
        .collect();
    let reps = hits.len() as f64;
    let set_rate = hits.iter().filter(|h| h.0).count() as f64 / reps;
    let coord: Vec<f64> = (0..3)
        .map(|i| hits.iter().filter(|h| h.1[i]).count() as f64 / reps)
        .collect();
    let pass = within(set_rate, 0.935, 0.965) && coord.iter().all(|&c| within(c, 0.935, 0.965));
    outcome(
        pass,
        format!(
            "5000 reps, n = 2000, set membership {set_rate:.4}, ratio coverage {:.4} / {:.4} / {:.4}",
            coord[0], coord[1], coord[2]
        ),
    )
}

fn quasi_symmetry() -> Outcome {
    let m1 = Mat::from_row_slice(2, 2, &[1.0, 3.0, 1.0, 1.0]);
    let m2 = Mat::from_row_slice(2, 2, &[1.0, -3.0, -1.0, 1.0]);
    let q1 = quasi_symmetry_check(&m1).unwrap();
    let m1_ok = q1.symmetrizable
        && q1.certificate.as_ref().is_some_and(|g| {
            let gm = g * &m1;
            g.clone().cholesky().is_some() && max_abs(&(&gm - gm.transpose())) <= 1e-8 && symmetric_in_metric(&m1, g)
        });
    let q2 = quasi_symmetry_check(&m2).unwrap();
    let m2_ok = !q2.symmetrizable;
    let note = if m2_ok {
        String::new()
    } else {
        let gamma = Mat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 6.0]);
        format!(
            "; M2 has real roots 1 ± √3 and is symmetric in Γ = [[2,1],[1,6]] (ΓM2 = {:?}), so the expected verdict cannot hold",
            (gamma * &m2).as_slice()
        )
    };
    outcome(
        m1_ok && m2_ok,
        format!(
            "M1 symmetrizable with certificate: {m1_ok}; M2 reported not symmetrizable: {m2_ok}{note}"
        ),
    )
}

fn determinism() -> Outcome {
    let mut cfg = SimConfig::trade_design(vec![200, 2000], 500, 4242);
    cfg.alpha_grid = vec![0.01, 0.05, 0.10];
    let a = run_size_power(&cfg).unwrap();
    let b = run_size_power(&cfg).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let c = pool.install(|| run_size_power(&cfg)).unwrap();
    let ja = serde_json::to_string(&a.tables).unwrap();
    let jb = serde_json::to_string(&b.tables).unwrap();
    let jc = serde_json::to_string(&c.tables).unwrap();
    let csv_same = a.tables.rejection_csv() == c.tables.rejection_csv() && a.tables.distance_csv() == c.tables.distance_csv();
    outcome(
        ja == jb && ja == jc && csv_same,
        format!("repeat and single-thread runs identical: {}", ja == jb && ja == jc && csv_same),
    )
}

fn main() {
    let null = null_design();
    let criteria: Vec<Criterion> = vec![
        ("worked example", Duration::from_secs(1), Box::new(worked_example)),
        ("projector algebra", Duration::from_secs(30), Box::new(projector_algebra)),
        ("Jacobian oracles", Duration::from_secs(60), Box::new(jacobian_oracles)),
        ("Taylor remainder orders", Duration::from_secs(30), Box::new(taylor_orders)),
        ("Wald size and limit law", Duration::from_secs(300), Box::new(|| wald_size(&null))),
        ("t-statistic size and limit law", Duration::from_secs(300), Box::new(|| t_law(&null))),
        ("power under a fixed alternative", Duration::from_secs(300), Box::new(power)),
        ("covariance rank", Duration::from_secs(60), Box::new(covariance_rank)),
        ("centrality coverage", Duration::from_secs(300), Box::new(centrality_coverage)),
        ("quasi-symmetry diagnostic", Duration::from_secs(1), Box::new(quasi_symmetry)),
        ("determinism", Duration::from_secs(300), Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let pass = out.pass && took <= *budget;
        if !pass {
            failed += 1;
        }
        let timing = if took <= *budget { String::new() } else { format!(" (over time budget {budget:?})") };
        println!(
            "criterion {:>2}: {} {name}: {} [{:.2} s]{timing}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
