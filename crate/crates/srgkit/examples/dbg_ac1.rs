use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use srgkit::gains::data::{build_data_matrices, shift_data, DataMatrices};
use srgkit::gains::ss::gain_annulus;
use srgkit::gains::GainOpts;
use srgkit::lti::{
    is_persistently_exciting, lag, numerical_rank, simulate, OperatorKind, StateSpace,
};
use srgkit::sdp::{
    solver_from_env, FeasibilityStatus, LmiConstraint, LmiProblem, PsdTerm,
    DEFAULT_EPS_REL, RELAXED_EPS_REL,
};

const RANK_TOL: f64 = 1e-9;

fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn random_system(seed: u64, stable: bool) -> StateSpace<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.gen_range(1..=4usize);
        let m = rng.gen_range(1..=2usize);
        let mut a = gaussian_matrix(&mut rng, n, n);
        let rho = a
            .complex_eigenvalues()
            .iter()
            .map(|e| e.norm())
            .fold(0.0f64, f64::max)
            .max(1e-6);
        let target = if stable {
            rng.gen_range(0.3..0.95)
        } else {
            rng.gen_range(1.05..1.3)
        };
        a *= target / rho;
        let b = gaussian_matrix(&mut rng, n, m);
        let c = gaussian_matrix(&mut rng, m, n);
        let d = gaussian_matrix(&mut rng, m, m) * 0.5;
        let ss = StateSpace::new(a.clone(), b.clone(), c, d).unwrap();
        if ss.has_unit_circle_eigenvalue(0.03) {
            continue;
        }
        if lag(&ss, RANK_TOL).is_err() {
            continue;
        }
        let mut ctrb = DMatrix::<f64>::zeros(n, n * m);
        let mut blk = b.clone();
        for i in 0..n {
            ctrb.view_mut((0, i * m), (n, m)).copy_from(&blk);
            blk = &a * blk;
        }
        if numerical_rank(&ctrb, RANK_TOL) < n {
            continue;
        }
        return ss;
    }
}

fn exciting_input(ss: &StateSpace<f64>, steps: usize, seed: u64) -> DMatrix<f64> {
    let n = ss.state_dim();
    let m = ss.io_dim();
    let l = lag(ss, RANK_TOL).unwrap().max(1);
    let order = n + l + 1;
    let mut salt = 0u64;
    loop {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (salt << 32));
        let u = gaussian_matrix(&mut rng, steps, m);
        if is_persistently_exciting(&u, order, RANK_TOL).unwrap() {
            return u;
        }
        salt += 1;
    }
}

struct Compressed {
    v_plus: DMatrix<f64>,
    v_now: DMatrix<f64>,
    v_y: DMatrix<f64>,
    v_u: DMatrix<f64>,
}

fn compress(dm: &DataMatrices<f64>) -> Compressed {
    let p = 2 * dm.window_len() * dm.io_dim();
    let m = dm.io_dim();
    let rows = 2 * p + 2 * m;
    let mut w = DMatrix::<f64>::zeros(rows, dm.num_cols());
    w.view_mut((0, 0), (p, dm.num_cols())).copy_from(dm.xi_plus());
    w.view_mut((p, 0), (p, dm.num_cols())).copy_from(dm.xi());
    w.view_mut((2 * p, 0), (m, dm.num_cols())).copy_from(dm.y());
    w.view_mut((2 * p + m, 0), (m, dm.num_cols())).copy_from(dm.u());
    for j in 0..w.ncols() {
        let norm = w.column(j).norm().max(1e-300);
        for i in 0..rows {
            w[(i, j)] /= norm;
        }
    }
    let svd = w.clone().svd(true, false);
    let u_fac = svd.u.expect("left factor requested");
    let sv = &svd.singular_values;
    let smax = sv[0].max(1e-300);
    let tol = 1e-10 * smax;
    let rank = sv.iter().filter(|&&s| s > tol).count().max(1);
    let mut smin_pos = smax;
    for &s in sv.iter() {
        if s > 0.0 {
            smin_pos = smin_pos.min(s);
        }
    }
    let scale = if smax > 1e10 * smin_pos { 1.0 / smax } else { 1.0 };
    let mut wr = DMatrix::<f64>::zeros(rows, rank);
    for r in 0..rank {
        for i in 0..rows {
            wr[(i, r)] = u_fac[(i, r)] * sv[r] * scale;
        }
    }
    Compressed {
        v_plus: wr.view((0, 0), (p, rank)).into_owned(),
        v_now: wr.view((p, 0), (p, rank)).into_owned(),
        v_y: wr.view((2 * p, 0), (m, rank)).into_owned(),
        v_u: wr.view((2 * p + m, 0), (m, rank)).into_owned(),
    }
}

fn data_problem(
    cd: &Compressed,
    p_dim: usize,
    level: f64,
    is_max: bool,
    eps_rel: f64,
) -> LmiProblem<f64> {
    let sq = level * level;
    let yty = cd.v_y.transpose() * &cd.v_y;
    let utu = cd.v_u.transpose() * &cd.v_u;
    let constant = if is_max { yty - utu.scale(sq) } else { utu.scale(sq) - yty };
    let mut prob = LmiProblem::new(p_dim, false, 0);
    prob.eps_rel = eps_rel;
    prob.constraints.push(LmiConstraint {
        constant,
        p_terms: vec![
            PsdTerm { factor: cd.v_plus.clone(), sign: 1.0 },
            PsdTerm { factor: cd.v_now.clone(), sign: -1.0 },
        ],
        scalar_terms: vec![],
    });
    prob
}

fn main() {
    let ss = random_system(1015, true);
    println!(
        "system: n={} m={} rho={:.4}",
        ss.state_dim(),
        ss.io_dim(),
        ss.spectral_radius()
    );
    let l = lag(&ss, RANK_TOL).unwrap().max(1);
    println!("lag l = {l}");
    let u = exciting_input(&ss, 60, 77);
    let traj = simulate(&ss, &u).unwrap();
    let dm = build_data_matrices(&traj, l).unwrap();

    let alpha = 0.0_f64;
    let opts = GainOpts::default();
    let model = gain_annulus(&ss, alpha, OperatorKind::L2, &opts).unwrap();
    println!("model route at alpha={alpha}: zeta={} gamma={:?}", model.zeta, model.gamma);

    let shifted = shift_data(&dm, alpha);
    let cd = compress(&shifted);
    let bracket = 10.0 * (cd.v_y.norm() / cd.v_u.norm().max(1e-12)).max(1.0);
    println!(
        "compressed: rank={} |v_y|={:.4} |v_u|={:.4} bracket={:.4}",
        cd.v_y.ncols(),
        cd.v_y.norm(),
        cd.v_u.norm(),
        bracket
    );

    let p_dim = 2 * shifted.window_len() * shifted.io_dim();
    let zeta_model = model.zeta;

    use srgkit::gains::ss::gain_freq_oracle;
    let ob = gain_freq_oracle(&ss, alpha, 10000).unwrap();
    println!("freq oracle: min={} max={:?}", ob.zeta, ob.gamma);
    use srgkit::gains::data::{min_gain_data, max_gain_data, DataGainOpts};
    let dopts = DataGainOpts { base: opts, state_dim: Some(ss.state_dim()) };
    let zd = min_gain_data(&shifted, OperatorKind::L2, &dopts).unwrap();
    let gd = max_gain_data(&shifted, OperatorKind::L2, &dopts).unwrap();
    println!("data route: zeta={zd} gamma={gd:?}");

    // Probe the min problem around the model threshold with whitened factors.
    let gram = &cd.v_plus * cd.v_plus.transpose() + &cd.v_now * cd.v_now.transpose();
    let eig = gram.symmetric_eigen();
    println!(
        "factor gram eigs: min={:.3e} max={:.3e}",
        eig.eigenvalues.min(),
        eig.eigenvalues.max()
    );
    let lam_floor = 1e-14 * eig.eigenvalues.max();
    let mut white = DMatrix::<f64>::zeros(p_dim, p_dim);
    for k in 0..p_dim {
        let w = 1.0 / eig.eigenvalues[k].max(lam_floor).sqrt();
        let col = eig.eigenvectors.column(k);
        for i in 0..p_dim {
            for j in 0..p_dim {
                white[(i, j)] += w * col[i] * col[j];
            }
        }
    }
    let cd_pre = Compressed {
        v_plus: &white * &cd.v_plus,
        v_now: &white * &cd.v_now,
        v_y: cd.v_y.clone(),
        v_u: cd.v_u.clone(),
    };

    use srgkit::sdp::{BarrierOpts, BarrierSolver, FeasibilitySolver};
    let solver = BarrierSolver::<f64>::new(BarrierOpts::default());
    for frac in [0.85, 0.9, 0.95, 0.99, 1.01, 1.1, 1.2] {
        let level = zeta_model * frac;
        let prob = data_problem(&cd_pre, p_dim, level, false, DEFAULT_EPS_REL);
        let res = solver.check(&prob).unwrap();
        let tag = match res.status {
            FeasibilityStatus::Feasible => "FEAS",
            FeasibilityStatus::Infeasible => "INFEAS",
            FeasibilityStatus::Inconclusive => "INCONCLUSIVE",
        };
        println!(
            "min level {level:>12.6} ({frac:.2} zeta): {tag} iters={} stages={} shift={:.3e}",
            res.diagnostics.iterations, res.diagnostics.stages, res.diagnostics.shift
        );
    }

    // Model-side min LMI probes: G'PG - E'PE - H'H + z^2 J <= 0.
    let n = ss.state_dim();
    let m = ss.io_dim();
    let mut g_fac = DMatrix::<f64>::zeros(n, n + m);
    g_fac.view_mut((0, 0), (n, n)).copy_from(ss.a());
    g_fac.view_mut((0, n), (n, m)).copy_from(ss.b());
    let mut e_fac = DMatrix::<f64>::zeros(n, n + m);
    e_fac.view_mut((0, 0), (n, n)).fill_with_identity();
    let mut h = DMatrix::<f64>::zeros(m, n + m);
    h.view_mut((0, 0), (m, n)).copy_from(ss.c());
    h.view_mut((0, n), (m, m)).copy_from(ss.d());
    let hth = h.transpose() * &h;
    {
        use std::io::Write;
        let mut f = std::fs::File::create("/tmp/r15.json").unwrap();
        let dump = |m: &DMatrix<f64>| -> String {
            let rows: Vec<String> = (0..m.nrows())
                .map(|i| {
                    let cols: Vec<String> =
                        (0..m.ncols()).map(|j| format!("{:.17e}", m[(i, j)])).collect();
                    format!("[{}]", cols.join(","))
                })
                .collect();
            format!("[{}]", rows.join(","))
        };
        write!(
            f,
            "{{\"A\":{},\"B\":{},\"C\":{},\"D\":{}}}",
            dump(ss.a()), dump(ss.b()), dump(ss.c()), dump(ss.d())
        )
        .unwrap();
    }
    println!("D = {:?}, zeros(A - B D^-1 C) radius:", ss.d()[(0, 0)]);
    let a_inv = ss.a() - ss.b() * ss.c() / ss.d()[(0, 0)];
    for e in a_inv.complex_eigenvalues().iter() {
        print!(" {:.4}", e.norm());
    }
    println!();
    let var_scale: f64 = 1e8;
    let fs = var_scale.sqrt();
    for frac in [0.85_f64, 0.9, 0.95, 0.99, 1.01, 1.05] {
        let level = 0.8098853740709283 * frac;
        let mut constant = -&hth;
        for j in 0..m {
            constant[(n + j, n + j)] += level * level;
        }
        let mut prob = LmiProblem::new(n, false, 0);
        prob.eps_rel = DEFAULT_EPS_REL;
        prob.constraints.push(LmiConstraint {
            constant,
            p_terms: vec![
                PsdTerm { factor: g_fac.scale(fs), sign: 1.0 },
                PsdTerm { factor: e_fac.scale(fs), sign: -1.0 },
            ],
            scalar_terms: vec![],
        });
        let res = solver.check(&prob).unwrap();
        let tag = match res.status {
            FeasibilityStatus::Feasible => "FEAS",
            FeasibilityStatus::Infeasible => "INFEAS",
            FeasibilityStatus::Inconclusive => "INCONCLUSIVE",
        };
        println!(
            "model min level {level:>12.6} ({frac:.2} zeta_true): {tag} iters={} stages={} shift={:.3e} msg={}",
            res.diagnostics.iterations, res.diagnostics.stages, res.diagnostics.shift,
            res.diagnostics.message
        );
    }
    let _ = RELAXED_EPS_REL;
}
