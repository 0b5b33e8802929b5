//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any fails.

#![allow(clippy::needless_range_loop)]

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twofluid_core::closure::*;
use twofluid_core::linearlab::fit::EXPONENT_TOLERANCE;
use twofluid_core::linearlab::*;
use twofluid_core::solver::*;
use twofluid_core::spectral::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn frob(m: &CMat4) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn random_params(rng: &mut ChaCha8Rng) -> FluidParams {
    let mu_plus = rng.gen_range(0.2..2.0);
    let mu_minus = rng.gen_range(0.2..2.0);
    FluidParams {
        mu_plus,
        mu_minus,
        lambda_plus: rng.gen_range(-0.6 * mu_plus..1.0),
        lambda_minus: rng.gen_range(-0.6 * mu_minus..1.0),
        sigma_plus: rng.gen_range(0.1..3.0),
        sigma_minus: rng.gen_range(0.1..3.0),
        gamma_plus: rng.gen_range(1.0..3.0),
        gamma_minus: rng.gen_range(1.0..3.0),
        rbar_plus: 1.0,
        rbar_minus: 1.0,
    }
}

fn asym() -> FluidParams {
    FluidParams {
        mu_plus: 0.7,
        mu_minus: 1.6,
        lambda_plus: 0.1,
        lambda_minus: -0.3,
        sigma_plus: 0.4,
        sigma_minus: 2.5,
        gamma_plus: 1.4,
        gamma_minus: 2.2,
        rbar_plus: 1.0,
        rbar_minus: 1.0,
    }
}

/// 20 coefficient draws; draw 0 is tuned to a vanishing discriminant and
/// draw 1 to a confluent pair inside the frequency grid.
fn draws(xis: &[f64]) -> Vec<LinearCoefficients> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    (0..20)
        .map(|d| {
            let mut c = linear_coefficients(&random_params(&mut rng)).unwrap();
            if d == 0 {
                c.sigma_plus = 0.05;
                c.sigma_minus = r_zero_sigma_minus(&c).unwrap();
            }
            if d == 1 {
                c.sigma_plus = 0.05;
                c.sigma_minus = confluent_sigma_minus(&c, xis[120]).unwrap();
            }
            c
        })
        .collect()
}

fn criteria_1_2() -> (Outcome, Outcome) {
    let xis = log_grid(1e-4, 1e2, 200);
    let mut worst = 0.0f64;
    let mut worst_res = 0.0f64;
    let (mut distinct, mut confluent) = (0usize, 0usize);
    let mut failures = 0usize;
    let mut r_zero = f64::INFINITY;
    for (d, c) in draws(&xis).iter().enumerate() {
        if d == 0 {
            r_zero = diffusive_asymptotics(c).r_squared.abs();
        }
        for &xi in &xis {
            let m = build_mode_system(xi, c);
            let dec = match semigroup_decomposition(&m) {
                Ok(x) => x,
                Err(_) => {
                    failures += 1;
                    continue;
                }
            };
            match dec.branch {
                Branch::Distinct => {
                    distinct += 1;
                    worst_res = worst_res.max(dec.residuals().max());
                }
                Branch::Confluent => confluent += 1,
            }
            for &t in &[0.1, 1.0, 10.0, 100.0] {
                let o = matrix_exp_oracle(&m.a1_complex(), t).unwrap();
                let e = frob(&(semigroup_eval(&dec, t) - o)) / frob(&o).max(f64::MIN_POSITIVE);
                worst = worst.max(e);
            }
        }
    }
    let c1 = Outcome {
        pass: worst <= 1e-8 && failures == 0 && distinct > 0 && confluent > 0 && r_zero < 1e-10,
        detail: format!(
            "max rel error {worst:.2e} (<= 1e-8); branches distinct {distinct}, confluent {confluent}; |R^2| of tuned draw {r_zero:.1e}; failures {failures}"
        ),
    };
    let c2 = Outcome {
        pass: worst_res <= 1e-10 && distinct > 0,
        detail: format!("max projector residual {worst_res:.2e} over {distinct} distinct modes (<= 1e-10)"),
    };
    (c1, c2)
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = x.iter().zip(y).map(|(a, b)| (a.ln(), b.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn criterion_3() -> Outcome {
    let xis = log_grid(1e-4, 1e-2, 25);
    let mut min_acoustic = f64::INFINITY;
    let mut min_diffusive = f64::INFINITY;
    let mut worst_freq = 0.0f64;
    for p in [FluidParams::symmetric(), asym()] {
        let c = linear_coefficients(&p).unwrap();
        let mut rem = [vec![], vec![], vec![], vec![]];
        for &xi in &xis {
            let exact = eigenvalues_exact(&build_mode_system(xi, &c)).values;
            let approx = eigenvalues_asymptotic(xi, &c);
            for i in 0..4 {
                rem[i].push((exact[i] - approx[i]).norm());
            }
        }
        min_acoustic = min_acoustic.min(slope(&xis, &rem[0])).min(slope(&xis, &rem[1]));
        min_diffusive = min_diffusive.min(slope(&xis, &rem[2])).min(slope(&xis, &rem[3]));
        let xi = 1e-4;
        let freq = eigenvalues_exact(&build_mode_system(xi, &c)).values[0].im / xi;
        let want = (c.beta1 + c.beta4).sqrt();
        worst_freq = worst_freq.max((freq - want).abs() / want);
    }
    Outcome {
        pass: min_acoustic >= 2.8 && min_diffusive >= 3.8 && worst_freq <= 1e-3,
        detail: format!(
            "remainder slopes acoustic {min_acoustic:.3} (>= 2.8), diffusive {min_diffusive:.3} (>= 3.8); frequency rel error {worst_freq:.1e} (<= 1e-3)"
        ),
    }
}

fn criteria_4_5() -> (Outcome, Outcome) {
    let times = log_grid(DEFAULT_WINDOW[0], DEFAULT_WINDOW[1], DEFAULT_SAMPLES);
    let mut worst_dev = 0.0f64;
    let mut worst_gap = 0.0f64;
    let mut fails = Vec::new();
    let mut gap_fails = Vec::new();
    for (name, p) in [("symmetric", FluidParams::symmetric()), ("asymmetric", asym())] {
        let lab = LinearLab::new(&p).unwrap();
        let data = make_generic_data(0.5, lab.eta()).unwrap();
        let table = lab.norm_table(&data, &times, &[0, 1, 2, 3], false).unwrap();
        let report = verify_rates(&table, DEFAULT_WINDOW, EXPONENT_TOLERANCE).unwrap();
        for c in &report.claims {
            worst_dev = worst_dev.max((c.fit.exponent - c.expected).abs());
        }
        fails.extend(report.failures().map(|c| format!("{name}:{}:k{}={:.3}", c.variable, c.k, c.fit.exponent)));
        for k in 0..4 {
            let exp = |v: Variable| report.claims.iter().find(|c| c.variable == v && c.k == k).unwrap().fit.exponent;
            let gap = exp(Variable::Combination) - exp(Variable::NPlus);
            worst_gap = worst_gap.max((gap + 0.5).abs());
            if (gap + 0.5).abs() > 0.07 {
                gap_fails.push(format!("{name}:k{k}={gap:.3}"));
            }
        }
    }
    let c4 = Outcome {
        pass: fails.is_empty(),
        detail: format!("max exponent deviation {worst_dev:.4} (<= 0.05) over 2 parameter sets x 9 variables x k=0..3; failures {fails:?}"),
    };
    let c5 = Outcome {
        pass: gap_fails.is_empty(),
        detail: format!("max |gap + 1/2| {worst_gap:.4} (<= 0.07); failures {gap_fails:?}"),
    };
    (c4, c5)
}

fn criterion_6() -> Outcome {
    let times = log_grid(DEFAULT_WINDOW[0], DEFAULT_WINDOW[1], DEFAULT_SAMPLES);
    let mut worst = 0.0f64;
    let mut fails = Vec::new();
    for (name, p) in [("symmetric", FluidParams::symmetric()), ("asymmetric", asym())] {
        let lab = LinearLab::new(&p).unwrap();
        let data = make_lower_bound_data(0.5, 1.0, 2.0, lab.eta()).unwrap();
        let table = lab.norm_table(&data, &times, &[0], true).unwrap();
        let picked: Vec<NormSeries> = table
            .into_iter()
            .filter(|s| {
                matches!(s.variable, Variable::NPlus | Variable::NMinus | Variable::PhiPlus | Variable::PhiMinus)
            })
            .collect();
        let report = verify_lower_bounds(&picked, DEFAULT_WINDOW, 3.0).unwrap();
        for c in &report.claims {
            worst = worst.max(c.band.unwrap());
        }
        fails.extend(report.failures().map(|c| format!("{name}:{}={:.2}", c.variable, c.band.unwrap())));
    }
    Outcome {
        pass: fails.is_empty(),
        detail: format!("max band ratio {worst:.3} (<= 3) for low-frequency n+-, phi+-; failures {fails:?}"),
    }
}

fn bisection_oracle(rp: f64, rm: f64, p: &FluidParams) -> f64 {
    let phi = |rho: f64| rho.powf(p.gamma_plus) - (rm * rho / (rho - rp)).powf(p.gamma_minus);
    let mut hi = 2.0 * rp + 1.0;
    while phi(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = rp;
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = FluidParams {
            gamma_plus: rng.gen_range(1.0..3.0),
            gamma_minus: rng.gen_range(1.0..3.0),
            ..FluidParams::symmetric()
        };
        let rp = rng.gen_range(0.05..5.0);
        let rm = rng.gen_range(0.05..5.0);
        let got = solve_rho_plus(rp, rm, &p).unwrap();
        let want = bisection_oracle(rp, rm, &p);
        worst = worst.max((got - want).abs() / want);
    }
    let p = FluidParams::symmetric();
    let s = closure_state(1.0, 1.0, &p).unwrap();
    let c = linear_coefficients(&p).unwrap();
    let sym_err = [
        s.rho_plus - 2.0,
        s.rho_minus - 2.0,
        s.alpha_plus - 0.5,
        s.alpha_minus - 0.5,
        s.c2 - 2.0,
        c.beta1 - 2.0,
        c.beta2 - 2.0,
        c.beta3 - 2.0,
        c.beta4 - 2.0,
    ]
    .iter()
    .fold(0.0f64, |a, e| a.max(e.abs()));
    Outcome {
        pass: worst <= 1e-10 && sym_err <= 1e-12,
        detail: format!("max rel deviation from bisection {worst:.1e} (<= 1e-10); symmetric constants error {sym_err:.1e} (<= 1e-12)"),
    }
}

fn desk_solver(dim: usize, p: &FluidParams) -> Solver {
    let grid = Grid::new(GridSpec { dim, n: DeskScale::points(dim), length: DeskScale::length() }).unwrap();
    Solver::new(grid, p).unwrap()
}

fn criterion_8() -> Outcome {
    let p = asym();
    let mut notes = Vec::new();
    let mut pass = true;
    let mut drift = 0.0f64;

    // Linear-limit fidelity over t in [0, 10].
    let mut fidelity = 0.0f64;
    for dim in [1, 2] {
        let mut sv = desk_solver(dim, &p);
        let s0 = init_state(sv.grid(), &InitialData::RandomBand { amplitude: 1e-6, max_mode: 40, seed: 1 }).unwrap();
        let rec = sv.run(&s0, 0.1, 100, 100, &[0]).unwrap();
        drift = drift.max(rec.max_mass_drift());
        let lin = sv.linear_propagator_step(&s0, 10.0).unwrap();
        let fin = rec.final_state.unwrap();
        fidelity = fidelity.max(fin.distance(&lin) / lin.norm());
    }
    pass &= fidelity <= 1e-6;
    notes.push(format!("linear-limit rel {fidelity:.1e} (<= 1e-6)"));

    // Temporal self-convergence, 1-D desk grid.
    let mut sv = desk_solver(1, &p);
    let s0 = init_state(sv.grid(), &InitialData::RandomBand { amplitude: 0.05, max_mode: 40, seed: 3 }).unwrap();
    let finals: Vec<FieldState> = [0.2f64, 0.1, 0.05, 0.025]
        .iter()
        .map(|&dt| {
            let steps = (2.0 / dt).round() as usize;
            let rec = sv.run(&s0, dt, steps, steps, &[0]).unwrap();
            drift = drift.max(rec.max_mass_drift());
            rec.final_state.unwrap()
        })
        .collect();
    let e: Vec<f64> = (0..3).map(|i| finals[i].distance(&finals[i + 1])).collect();
    let order = (e[0] / e[1]).log2().min((e[1] / e[2]).log2());
    pass &= order >= 1.9;
    notes.push(format!("temporal order {order:.3} (>= 1.9)"));

    // Linear energy identity, 2-D desk grid.
    let mut sv = desk_solver(2, &p).linear_only();
    let s0 = init_state(sv.grid(), &InitialData::RandomBand { amplitude: 0.01, max_mode: 40, seed: 8 }).unwrap();
    let h = 1e-3;
    let mut worst_id = 0.0f64;
    for &t in &[0.5, 2.0, 5.0, 10.0] {
        let mut e = |tau: f64| {
            let st = sv.linear_propagator_step(&s0, tau).unwrap();
            energy_report(sv.grid(), sv.coefficients(), &st)
        };
        let d = (-e(t + 2.0 * h).e0 + 8.0 * e(t + h).e0 - 8.0 * e(t - h).e0 + e(t - 2.0 * h).e0) / (12.0 * h);
        let mid = e(t);
        worst_id = worst_id.max((d + mid.d0).abs() / mid.e0.max(mid.d0));
    }
    pass &= worst_id <= 1e-5;
    notes.push(format!("energy identity {worst_id:.1e} (<= 1e-5)"));

    // Small-amplitude nonlinear runs: E0 nonincreasing.
    let mut worst_rise = f64::NEG_INFINITY;
    for (dim, steps) in [(1usize, 200usize), (2, 20)] {
        let mut sv = desk_solver(dim, &p);
        let s0 = init_state(sv.grid(), &InitialData::RandomBand { amplitude: 1e-3, max_mode: 40, seed: 12 }).unwrap();
        let rec = sv.run(&s0, 0.1, steps, 1, &[0]).unwrap();
        drift = drift.max(rec.max_mass_drift());
        let e0 = rec.energy[0].e0;
        for w in rec.energy.windows(2) {
            let rise = (w[1].e0 - w[0].e0) / (e0 * (w[1].time - w[0].time));
            worst_rise = worst_rise.max(rise);
        }
    }
    pass &= worst_rise <= 1e-6;
    notes.push(format!("max E0 rise {worst_rise:.1e} E0(0) per unit time (<= 1e-6)"));

    pass &= drift <= 1e-8;
    notes.push(format!("mass drift {drift:.1e} (<= 1e-8)"));
    Outcome { pass, detail: notes.join("; ") }
}

fn report(id: u32, name: &str, start: Instant, o: &Outcome, all: &mut bool) {
    *all &= o.pass;
    println!(
        "criterion {id} [{name}]: {} - {} ({:.1} s)",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        start.elapsed().as_secs_f64()
    );
}

fn main() -> ExitCode {
    let mut all = true;
    let t = Instant::now();
    let (c1, c2) = criteria_1_2();
    report(1, "semigroup correctness", t, &c1, &mut all);
    report(2, "projector algebra", t, &c2, &mut all);
    let t = Instant::now();
    report(3, "eigenvalue asymptotics", t, &criterion_3(), &mut all);
    let t = Instant::now();
    let (c4, c5) = criteria_4_5();
    report(4, "upper decay rates", t, &c4, &mut all);
    report(5, "combination gap", t, &c5, &mut all);
    let t = Instant::now();
    report(6, "lower bounds", t, &criterion_6(), &mut all);
    let t = Instant::now();
    report(7, "closure", t, &criterion_7(), &mut all);
    let t = Instant::now();
    report(8, "nonlinear solver", t, &criterion_8(), &mut all);
    if all {
        println!("acceptance: all criteria PASS");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAIL");
        ExitCode::FAILURE
    }
}
