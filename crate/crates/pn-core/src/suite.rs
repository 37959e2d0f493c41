//! Check orchestration: assemble deterministic reports from the pointwise
//! algebra suite, the connection residuals, and the full realization
//! certification.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra;
use crate::connection;
use crate::error::{Error, Result};
use crate::fields::{sample_points, sample_states, FieldBundle};
use crate::problem::{ConnectionMode, Numerics};
use crate::realize;
use crate::report::{CheckRecord, Report};
use crate::spray;

/// Pointwise structure checks: Jacobi, torsion, intertwining, concomitant,
/// hierarchy antisymmetry, and the connection compatibility residuals.
pub fn run_check_suite(
    bundle: &FieldBundle,
    mode: ConnectionMode,
    num: &Numerics,
    hierarchy_ext: bool,
) -> Result<Report> {
    let points = sample_points(&bundle.patch, num.samples, num.seed)?;
    let mut recs = Vec::new();
    let seed = num.seed;
    let tol = num.tol_algebra;
    let nsamp = points.len();

    let mut jacobi = 0.0f64;
    for x in &points {
        jacobi = jacobi.max(algebra::schouten_bracket(&bundle.pi, &bundle.pi, x)?.max_abs());
    }
    recs.push(CheckRecord::evaluated(
        "schouten-jacobi",
        "[Pi,Pi] = 0 (Jacobi identity)",
        jacobi,
        tol,
        nsamp,
        seed,
    ));

    match &bundle.nij {
        None => {
            for name in ["nijenhuis-torsion", "intertwining", "concomitant"] {
                recs.push(CheckRecord::skipped(name, "no Nijenhuis operator given", seed));
            }
        }
        Some(nf) => {
            let mut torsion = 0.0f64;
            let mut inter = 0.0f64;
            let mut conc = 0.0f64;
            for x in &points {
                torsion = torsion.max(algebra::nijenhuis_torsion(nf, x)?.max_abs());
                let ev = bundle.eval(x)?;
                let nm = ev.nij.as_ref().unwrap();
                inter = inter.max(algebra::intertwine_residual(&ev.pi, nm).abs().max());
                conc = conc.max(algebra::concomitant(&ev)?.max_abs());
            }
            recs.push(CheckRecord::evaluated(
                "nijenhuis-torsion",
                "T(N) = 0 (vanishing Nijenhuis torsion)",
                torsion,
                tol,
                nsamp,
                seed,
            ));
            recs.push(CheckRecord::evaluated(
                "intertwining",
                "N Pi = Pi N^T (anchor compatibility)",
                inter,
                tol,
                nsamp,
                seed,
            ));
            recs.push(CheckRecord::evaluated(
                "concomitant",
                "C(Pi, N) = 0 (Magri-Morosi concomitant)",
                conc,
                tol,
                nsamp,
                seed,
            ));

            let mut ks = vec![1i32, -1];
            if hierarchy_ext {
                ks.extend([2, -2]);
            }
            for k in ks {
                let name = format!("hierarchy-antisymmetry-k{}", k);
                let mut worst = 0.0f64;
                let mut singular = false;
                for x in &points {
                    let pm = bundle.pi.value(x)?;
                    let nm = nf.value(x)?;
                    match algebra::hierarchy(&pm, &nm, k) {
                        Ok((_, asym)) => worst = worst.max(asym),
                        Err(Error::Singular(_)) => {
                            singular = true;
                            break;
                        }
                        Err(e) => return Err(e),
                    }
                }
                if singular {
                    recs.push(CheckRecord::skipped(
                        &name,
                        "N numerically singular on the patch",
                        seed,
                    ));
                } else {
                    recs.push(CheckRecord::evaluated(
                        &name,
                        "N^k Pi antisymmetric (bi-Hamiltonian ladder)",
                        worst,
                        tol,
                        nsamp,
                        seed,
                    ));
                }
            }
        }
    }

    match (mode, &bundle.nij) {
        (ConnectionMode::Explicit | ConnectionMode::Zero, Some(_)) => {
            let mut nabla = 0.0f64;
            let mut parallel = 0.0f64;
            for x in &points {
                nabla = nabla.max(connection::nabla_n_residual(bundle, x)?.max_abs());
                parallel = parallel.max(connection::tilde_nabla_parallel_residual(bundle, x)?);
            }
            recs.push(CheckRecord::evaluated(
                "nabla-n-compatibility",
                "dN skew part matches Gamma contraction (connection compatibility)",
                nabla,
                tol,
                nsamp,
                seed,
            ));
            recs.push(CheckRecord::evaluated(
                "tilde-parallel",
                "transpose of N parallel for the induced contravariant derivative",
                parallel,
                tol,
                nsamp,
                seed,
            ));
        }
        (ConnectionMode::Solve, Some(nf)) => {
            let mut worst = 0.0f64;
            for x in &points {
                let (_, res) = connection::solve_connection_pointwise(nf, x)?;
                worst = worst.max(res);
            }
            recs.push(CheckRecord::evaluated(
                "connection-solvability",
                "pointwise least-squares connection system consistent",
                worst,
                tol,
                nsamp,
                seed,
            ));
            recs.push(CheckRecord::skipped(
                "tilde-parallel",
                "solve mode yields no smooth connection field",
                seed,
            ));
        }
        _ => {
            recs.push(CheckRecord::skipped(
                "nabla-n-compatibility",
                "connection or Nijenhuis operator missing",
                seed,
            ));
        }
    }

    Ok(Report::assemble(recs))
}

/// Interior base samples paired with covectors, for flow-based checks;
/// trajectories launched from the patch interior rarely escape, and samples
/// whose flow does escape are skipped by the caller.
fn flow_states(
    bundle: &FieldBundle,
    count: usize,
    y_max: f64,
    seed: u64,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    sample_states(&bundle.patch.shrink(0.5), count, y_max, seed)
}

fn record_over_states<F>(
    name: &str,
    anchor: &str,
    states: &[(Vec<f64>, Vec<f64>)],
    tol: f64,
    seed: u64,
    mut f: F,
) -> CheckRecord
where
    F: FnMut(&[f64], &[f64]) -> Result<f64>,
{
    let mut worst = 0.0f64;
    let mut used = 0usize;
    let mut last_err: Option<Error> = None;
    for (x, y) in states {
        match f(x, y) {
            Ok(v) => {
                worst = worst.max(v);
                used += 1;
            }
            Err(e @ (Error::FlowEscape { .. } | Error::NonFinite { .. })) => {
                last_err = Some(e);
            }
            Err(e) => {
                last_err = Some(e);
            }
        }
    }
    if used == 0 {
        let reason = match last_err {
            Some(e) => format!("all samples failed: {}", e),
            None => "no usable samples".into(),
        };
        CheckRecord::skipped(name, &reason, seed)
    } else {
        CheckRecord::evaluated(name, anchor, worst, tol, used, seed)
    }
}

/// Full realization certification: spray axioms, flow convergence,
/// zero-section formulas, boundary-term cross-check, closedness,
/// nondegeneracy, recursion-operator torsion, the chain identity, and the
/// Poisson-map property of the projection.
pub fn run_realize_suite(
    bundle: &FieldBundle,
    num: &Numerics,
    hierarchy_ext: bool,
) -> Result<Report> {
    bundle.require_gamma()?;
    let has_n = bundle.nij.is_some();
    let seed = num.seed;
    let m = num.rk4_steps;
    let m_fd = (m / 8).max(25);
    let mut recs = Vec::new();

    let (proj, dil) = spray::spray_axioms_residual(bundle, num.samples, num.y_max, seed)?;
    recs.push(CheckRecord::evaluated(
        "spray-projection",
        "spray projects to the anchor map of Pi",
        proj,
        num.tol_algebra,
        num.samples,
        seed,
    ));
    recs.push(CheckRecord::evaluated(
        "spray-dilation",
        "spray equivariant under fiber dilations",
        dil,
        num.tol_algebra,
        num.samples,
        seed,
    ));

    let probe = flow_states(bundle, 1, num.y_max * 0.5, seed)?;
    recs.push(record_over_states(
        "flow-richardson",
        "flow endpoint stable under step halving (RK4 self-consistency)",
        &probe,
        num.tol_flow,
        seed,
        |x, y| {
            let coarse = spray::flow(bundle, x, y, (m / 2).max(10), false, &[])?;
            let fine = spray::flow(bundle, x, y, m, false, &[])?;
            let (xc, yc) = coarse.end_state();
            let (xf, yf) = fine.end_state();
            let mut worst = 0.0f64;
            for i in 0..x.len() {
                worst = worst.max((xc[i] - xf[i]).abs()).max((yc[i] - yf[i]).abs());
            }
            Ok(worst)
        },
    ));

    let zs_points = sample_points(&bundle.patch.shrink(0.6), num.samples.min(20), seed)?;
    let zs_states: Vec<(Vec<f64>, Vec<f64>)> = zs_points
        .iter()
        .map(|x| (x.clone(), vec![0.0; bundle.dim()]))
        .collect();
    for k in [0i32, 1] {
        if k == 1 && !has_n {
            recs.push(CheckRecord::skipped(
                "zero-section-formula-k1",
                "no Nijenhuis operator given",
                seed,
            ));
            continue;
        }
        recs.push(record_over_states(
            &format!("zero-section-formula-k{}", k),
            "integrated form matches the closed zero-section block formula",
            &zs_states,
            num.tol_flow,
            seed,
            |x, _| realize::zero_section_formula_residual(bundle, x, k, m),
        ));
    }

    let n = bundle.dim();
    let bt_states = flow_states(bundle, num.samples.min(10), num.y_max * 0.5, seed ^ 0x51)?;
    for k in [0i32, 1] {
        if k == 1 && !has_n {
            recs.push(CheckRecord::skipped(
                "boundary-vs-quadrature-k1",
                "no Nijenhuis operator given",
                seed,
            ));
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0xb7 + k as u64));
        recs.push(record_over_states(
            &format!("boundary-vs-quadrature-k{}", k),
            "transported boundary-term value agrees with the quadrature form",
            &bt_states,
            num.tol_flow,
            seed,
            |x, y| {
                let rf = realize::realized_form(bundle, x, y, k, m)?;
                let u = DVector::from_iterator(2 * n, (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)));
                let w = DVector::from_iterator(2 * n, (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)));
                let bt = realize::boundary_term_form(bundle, x, y, &u, &w, k, m)?;
                let direct = (w.transpose() * &rf.matrix * &u)[(0, 0)];
                Ok((bt - direct).abs())
            },
        ));
    }

    let cl_states = flow_states(bundle, num.samples.min(3), num.y_max * 0.5, seed ^ 0x17)?;
    for k in [0i32, 1] {
        if k == 1 && !has_n {
            recs.push(CheckRecord::skipped(
                "closedness-k1",
                "no Nijenhuis operator given",
                seed,
            ));
            continue;
        }
        recs.push(record_over_states(
            &format!("closedness-k{}", k),
            "coordinate cocycle of the integrated form vanishes",
            &cl_states,
            num.tol_fd,
            seed,
            |x, y| realize::closedness_residual(bundle, x, y, k, num.fd_step, m_fd),
        ));
    }

    {
        let mut sigma_min = f64::INFINITY;
        let ks: Vec<i32> = if has_n { vec![0, 1] } else { vec![0] };
        let nd = record_over_states(
            "nondegeneracy",
            "integrated forms have full rank near the zero section",
            &zs_states,
            0.0,
            seed,
            |x, y| {
                let mut deficit = 0.0f64;
                for &k in &ks {
                    let rf = realize::realized_form(bundle, x, y, k, m)?;
                    let (smin, _) = realize::nondegeneracy_report(&rf);
                    sigma_min = sigma_min.min(smin);
                    deficit = deficit.max((1e-8 - smin).max(0.0));
                }
                Ok(deficit)
            },
        );
        recs.push(nd);
        if sigma_min.is_finite() {
            recs.push(CheckRecord::info(
                "nondegeneracy-sigma-min",
                "smallest singular value observed across realized forms",
                sigma_min,
                zs_states.len(),
                seed,
            ));
        }
    }

    if has_n {
        let rt_states = flow_states(bundle, num.samples.min(2), num.y_max * 0.3, seed ^ 0x29)?;
        recs.push(record_over_states(
            "recursion-torsion",
            "recursion operator of the form pair is torsion-free",
            &rt_states,
            num.tol_torsion,
            seed,
            |x, y| realize::recursion_torsion_residual(bundle, x, y, m_fd, 1e-4),
        ));

        let ch_states = flow_states(bundle, 1, num.y_max * 0.5, seed ^ 0x31)?;
        recs.push(record_over_states(
            "chain-identity",
            "k=2 integrated form equals base form composed with R squared",
            &ch_states,
            num.tol_fd,
            seed,
            |x, y| realize::chain_identity_residual(bundle, x, y, m),
        ));
    } else {
        recs.push(CheckRecord::skipped(
            "recursion-torsion",
            "no Nijenhuis operator given",
            seed,
        ));
        recs.push(CheckRecord::skipped(
            "chain-identity",
            "no Nijenhuis operator given",
            seed,
        ));
    }

    let mut pm_ks = vec![0i32];
    if has_n {
        pm_ks.push(1);
        if hierarchy_ext {
            pm_ks.extend([2, -1, -2]);
        }
    }
    let pm_points = sample_points(&bundle.patch.shrink(0.5), num.samples.min(8), seed ^ 0x43)?;
    for k in pm_ks {
        let name = format!("poisson-map-k{}", k);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x67 + k.unsigned_abs() as u64));
        let states: Vec<(Vec<f64>, Vec<f64>)> = pm_points
            .iter()
            .flat_map(|x| {
                let zero = vec![0.0; n];
                let y: Vec<f64> = (0..n)
                    .map(|_| rng.gen_range(-1.0..1.0) * num.y_max.min(0.05))
                    .collect();
                [(x.clone(), zero), (x.clone(), y)]
            })
            .collect();
        let rec = record_over_states(
            &name,
            "projection pushes the inverse form to the matching ladder structure",
            &states,
            num.tol_flow,
            seed,
            |x, y| realize::poisson_map_residual(bundle, x, y, k, m),
        );
        recs.push(rec);
    }

    Ok(Report::assemble(recs))
}

/// Empirical covector-box sweep: smallest singular value of the realized
/// forms per y_max, plus the first radius at which nondegeneracy fails.
/// All records are informational; no maximality claim is made.
pub fn run_sweep(bundle: &FieldBundle, num: &Numerics, y_list: &[f64]) -> Result<Report> {
    bundle.require_gamma()?;
    let has_n = bundle.nij.is_some();
    let m = num.rk4_steps;
    let mut recs = Vec::new();
    let mut first_failure: Option<f64> = None;
    for (idx, &y_max) in y_list.iter().enumerate() {
        let states = flow_states(bundle, num.samples.min(5), y_max, num.seed ^ idx as u64)?;
        let mut sigma = f64::INFINITY;
        let mut used = 0usize;
        for (x, y) in &states {
            let ks: Vec<i32> = if has_n { vec![0, 1] } else { vec![0] };
            let mut ok = true;
            for k in ks {
                match realize::realized_form(bundle, x, y, k, m) {
                    Ok(rf) => sigma = sigma.min(realize::nondegeneracy_report(&rf).0),
                    Err(Error::FlowEscape { .. } | Error::NonFinite { .. }) => ok = false,
                    Err(e) => return Err(e),
                }
            }
            if ok {
                used += 1;
            }
        }
        let value = if sigma.is_finite() { sigma } else { -1.0 };
        if first_failure.is_none() && (used == 0 || value <= 1e-8) {
            first_failure = Some(y_max);
        }
        recs.push(CheckRecord::info(
            &format!("sweep-{:02}-ymax-{:.4}", idx, y_max),
            "smallest singular value of realized forms at this covector radius",
            value,
            used,
            num.seed,
        ));
    }
    recs.push(CheckRecord::info(
        "sweep-first-failure",
        "first listed y_max with degenerate or unreachable forms (-1 = none)",
        first_failure.unwrap_or(-1.0),
        y_list.len(),
        num.seed,
    ));
    Ok(Report::assemble(recs))
}

/// Numeric Schouten residual of two matrix fields on R^d by central
/// differences: full antisymmetrization of
/// `T(a,b,c) = Σ_l (A^{la} ∂_l B^{bc} + B^{la} ∂_l A^{bc})`.
fn matrix_schouten_residual<F, G>(d: usize, at: F, bt: G, xi: &[f64], h: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<DMatrix<f64>>,
    G: Fn(&[f64]) -> Result<DMatrix<f64>>,
{
    let a0 = at(xi)?;
    let b0 = bt(xi)?;
    let mut da = Vec::with_capacity(d);
    let mut db = Vec::with_capacity(d);
    for l in 0..d {
        let mut xp = xi.to_vec();
        let mut xm = xi.to_vec();
        xp[l] += h;
        xm[l] -= h;
        da.push((at(&xp)? - at(&xm)?) / (2.0 * h));
        db.push((bt(&xp)? - bt(&xm)?) / (2.0 * h));
    }
    let t = |a: usize, b: usize, c: usize| -> f64 {
        (0..d)
            .map(|l| a0[(l, a)] * db[l][(b, c)] + b0[(l, a)] * da[l][(b, c)])
            .sum()
    };
    let mut worst = 0.0f64;
    for a in 0..d {
        for b in (a + 1)..d {
            for c in (b + 1)..d {
                let v = 0.5
                    * (t(a, b, c) - t(a, c, b) + t(b, c, a) - t(b, a, c) + t(c, a, b)
                        - t(c, b, a));
                worst = worst.max(v.abs());
            }
        }
    }
    Ok(worst)
}

/// Exploratory pencil study: spray-axiom residuals of the interpolated
/// spray for each s, and Schouten residuals of pairs of inverted pencil
/// forms. All records are informational — compatibility of the inverted
/// family is an open question and no verdict is asserted.
pub fn run_pencil(
    f0: &FieldBundle,
    f1: &FieldBundle,
    num: &Numerics,
    s_list: &[f64],
) -> Result<Report> {
    let mut recs = Vec::new();
    for (idx, &s) in s_list.iter().enumerate() {
        let r = spray::convex_spray_residual(f0, f1, s, num.samples.min(20), num.y_max, num.seed)?;
        recs.push(CheckRecord::info(
            &format!("pencil-{:02}-spray-axioms-s{:.2}", idx, s),
            "axiom residual of the interpolated spray against the interpolated bivector",
            r,
            num.samples.min(20),
            num.seed,
        ));
    }

    // inverted-pencil compatibility probe on the first bundle's forms
    if f0.gamma.is_some() && f0.nij.is_some() {
        let m = (num.rk4_steps / 8).max(25);
        let d = 2 * f0.dim();
        let states = flow_states(f0, 1, num.y_max * 0.3, num.seed ^ 0x77)?;
        let pencil_inv = |s: f64| {
            move |xi: &[f64]| -> Result<DMatrix<f64>> {
                let n2 = xi.len() / 2;
                let (x, y) = xi.split_at(n2);
                let w0 = realize::realized_form(f0, x, y, 0, m)?.matrix;
                let w1 = realize::realized_form(f0, x, y, 1, m)?.matrix;
                let ws = w0 * (1.0 - s) + w1 * s;
                ws.try_inverse()
                    .ok_or_else(|| Error::Singular("pencil form not invertible".into()))
            }
        };
        for (idx, pair) in s_list.windows(2).enumerate() {
            let (sa, sb) = (pair[0], pair[1]);
            if let Some((x, y)) = states.first() {
                let mut xi = x.clone();
                xi.extend_from_slice(y);
                let r =
                    matrix_schouten_residual(d, pencil_inv(sa), pencil_inv(sb), &xi, 1e-4)?;
                recs.push(CheckRecord::info(
                    &format!("pencil-{:02}-schouten-s{:.2}-s{:.2}", idx, sa, sb),
                    "numeric Schouten residual of the two inverted pencil forms (exploratory)",
                    r,
                    1,
                    num.seed,
                ));
            }
        }
    }
    Ok(Report::assemble(recs))
}
